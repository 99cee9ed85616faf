//! Random forest binary classifier.
//!
//! Trees are grown on class-balanced bootstrap samples (the minority class is
//! drawn with replacement up to the size of the majority class), split on Gini
//! impurity over `floor(sqrt(d))` randomly chosen features per node, and grown
//! until leaves are pure or cannot be split. Leaves store the fraction of
//! positive samples that reached them; the forest averages these.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ForestError {
    /// Training data lacks positive or negative samples.
    SingleClass,
    NoFeatures,
    /// A sample's length differs from the first sample's.
    InconsistentSchema {
        sample: usize,
        expected: usize,
        got: usize,
    },
    NonFinite {
        sample: usize,
    },
    LabelCountMismatch,
}

impl fmt::Display for ForestError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ForestError::SingleClass => {
                write!(f, "training data needs at least one sample of each class")
            }
            ForestError::NoFeatures => write!(f, "samples have no features"),
            ForestError::InconsistentSchema {
                sample,
                expected,
                got,
            } => {
                write!(f, "sample {sample} has {got} features, expected {expected}")
            }
            ForestError::NonFinite { sample } => {
                write!(f, "sample {sample} has a non-finite feature")
            }
            ForestError::LabelCountMismatch => {
                write!(f, "number of labels differs from number of samples")
            }
        }
    }
}

impl core::error::Error for ForestError {}

#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    /// `x[feature] <= threshold` goes left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        probability: f64,
    },
}

/// A decision tree; node 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if x[feature] <= threshold { left } else { right };
                }
                TreeNode::Leaf { probability } => return probability,
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Forest {
    pub trees: Vec<Tree>,
    pub n_features: usize,
    pub seed: u64,
}

impl Forest {
    /// Mean positive-class probability over all trees.
    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        if self.trees.is_empty() {
            return 0.5;
        }
        self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
    }

    /// Checks split feature indices and leaf probabilities.
    pub fn is_well_formed(&self) -> bool {
        self.trees.iter().all(|t| {
            t.nodes.iter().all(|n| match *n {
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    feature < self.n_features
                        && threshold.is_finite()
                        && left < t.nodes.len()
                        && right < t.nodes.len()
                }
                TreeNode::Leaf { probability } => (0.0..=1.0).contains(&probability),
            })
        })
    }
}

/// Validated training data shared by all trees.
pub struct TrainingSet<'a> {
    features: &'a [Vec<f64>],
    labels: &'a [bool],
    n_features: usize,
    positives: Vec<usize>,
    negatives: Vec<usize>,
}

impl<'a> TrainingSet<'a> {
    pub fn new(features: &'a [Vec<f64>], labels: &'a [bool]) -> Result<Self, ForestError> {
        if features.len() != labels.len() {
            return Err(ForestError::LabelCountMismatch);
        }
        let n_features = features.first().map_or(0, |f| f.len());
        for (i, f) in features.iter().enumerate() {
            if f.len() != n_features {
                return Err(ForestError::InconsistentSchema {
                    sample: i,
                    expected: n_features,
                    got: f.len(),
                });
            }
            if f.iter().any(|v| !v.is_finite()) {
                return Err(ForestError::NonFinite { sample: i });
            }
        }
        let positives: Vec<usize> = (0..labels.len()).filter(|&i| labels[i]).collect();
        let negatives: Vec<usize> = (0..labels.len()).filter(|&i| !labels[i]).collect();
        if positives.is_empty() || negatives.is_empty() {
            return Err(ForestError::SingleClass);
        }
        if n_features == 0 {
            return Err(ForestError::NoFeatures);
        }
        Ok(TrainingSet {
            features,
            labels,
            n_features,
            positives,
            negatives,
        })
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }
}

/// Per-tree RNG stream: seeded with `seed + tree_index`.
pub fn tree_rng(seed: u64, tree_index: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_add(tree_index as u64))
}

pub fn train_forest(
    features: &[Vec<f64>],
    labels: &[bool],
    n_trees: usize,
    seed: u64,
) -> Result<Forest, ForestError> {
    let data = TrainingSet::new(features, labels)?;
    let trees = (0..n_trees)
        .map(|t| grow_tree(&data, &mut tree_rng(seed, t)))
        .collect();
    Ok(Forest {
        trees,
        n_features: data.n_features,
        seed,
    })
}

/// Grows one tree on a fresh class-balanced bootstrap sample.
pub fn grow_tree<R: Rng>(data: &TrainingSet<'_>, rng: &mut R) -> Tree {
    let per_class = data.positives.len().max(data.negatives.len());
    let mut counts = vec![0u32; data.labels.len()];
    for class in [&data.positives, &data.negatives] {
        for _ in 0..per_class {
            counts[class[rng.random_range(0..class.len())]] += 1;
        }
    }
    // unique samples with multiplicities
    let mut samples: Vec<(usize, f64)> = counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(i, &c)| (i, c as f64))
        .collect();

    let mtry = ((libm::sqrt(data.n_features as f64)) as usize).max(1);
    let mut feature_order: Vec<usize> = (0..data.n_features).collect();
    let mut nodes = vec![TreeNode::Leaf { probability: 0.0 }];
    let mut work = vec![(0usize, 0usize, samples.len())];
    let mut column: Vec<(f64, f64, bool)> = Vec::new();

    while let Some((node, start, end)) = work.pop() {
        let slice = &mut samples[start..end];
        let (mut wpos, mut wtot) = (0.0, 0.0);
        for &(i, w) in slice.iter() {
            wtot += w;
            if data.labels[i] {
                wpos += w;
            }
        }
        let probability = wpos / wtot;
        if wpos == 0.0 || wpos == wtot || slice.len() < 2 {
            nodes[node] = TreeNode::Leaf { probability };
            continue;
        }

        feature_order.shuffle(rng);
        let mut best: Option<(f64, usize, f64)> = None;
        for (tried, &f) in feature_order.iter().enumerate() {
            if tried >= mtry && best.is_some() {
                break;
            }
            column.clear();
            column.extend(
                slice
                    .iter()
                    .map(|&(i, w)| (data.features[i][f], w, data.labels[i])),
            );
            column.sort_by(|a, b| a.0.total_cmp(&b.0));
            if let Some((impurity, threshold)) = best_threshold(&column, wpos, wtot) {
                if best.is_none_or(|(b, _, _)| impurity < b) {
                    best = Some((impurity, f, threshold));
                }
            }
        }
        let Some((_, feature, threshold)) = best else {
            nodes[node] = TreeNode::Leaf { probability };
            continue;
        };

        // partition in place: left part satisfies x <= threshold
        let mut mid = 0;
        for k in 0..slice.len() {
            if data.features[slice[k].0][feature] <= threshold {
                slice.swap(k, mid);
                mid += 1;
            }
        }
        let (left, right) = (nodes.len(), nodes.len() + 1);
        nodes.push(TreeNode::Leaf { probability: 0.0 });
        nodes.push(TreeNode::Leaf { probability: 0.0 });
        nodes[node] = TreeNode::Split {
            feature,
            threshold,
            left,
            right,
        };
        work.push((right, start + mid, end));
        work.push((left, start, start + mid));
    }
    Tree { nodes }
}

fn gini(pos: f64, total: f64) -> f64 {
    let p = pos / total;
    2.0 * p * (1.0 - p)
}

/// Best threshold on one sorted feature column: minimal weighted Gini over
/// cuts between distinct values. `None` if the column is constant.
fn best_threshold(column: &[(f64, f64, bool)], wpos: f64, wtot: f64) -> Option<(f64, f64)> {
    let (mut lpos, mut ltot) = (0.0, 0.0);
    let mut best: Option<(f64, f64)> = None;
    for k in 0..column.len() - 1 {
        let (v, w, label) = column[k];
        ltot += w;
        if label {
            lpos += w;
        }
        let next = column[k + 1].0;
        if next <= v {
            continue;
        }
        let rtot = wtot - ltot;
        let impurity = ltot * gini(lpos, ltot) + rtot * gini(wpos - lpos, rtot);
        if best.is_none_or(|(b, _)| impurity < b) {
            let mid = v + (next - v) / 2.0;
            let threshold = if mid < next { mid } else { v };
            best = Some((impurity, threshold));
        }
    }
    best
}
