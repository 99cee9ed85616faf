//! Training targets, cost learning and the cost table consumed by the solver.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::crag::{Crag, Solution};
use crate::features::FeatureSet;
use crate::forest::{Forest, ForestError};
use crate::image::LabelImage;
use crate::solver::Mode;

/// Probabilities are clamped to `[P_MIN, 1 - P_MIN]` before the log-odds.
pub const P_MIN: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub enum CostModelError {
    DimensionMismatch {
        crag: (u32, u32),
        image: (u32, u32),
    },
    /// Cost or feature vectors do not match the CRAG.
    KeyMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },
    SchemaMismatch {
        expected: usize,
        got: usize,
    },
    NonFinite,
    Forest(ForestError),
}

impl fmt::Display for CostModelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CostModelError::DimensionMismatch { crag, image } => {
                write!(
                    f,
                    "image is {}x{}, CRAG is {}x{}",
                    image.0, image.1, crag.0, crag.1
                )
            }
            CostModelError::KeyMismatch { expected, got } => write!(
                f,
                "got {} node / {} edge entries, CRAG has {} / {}",
                got.0, got.1, expected.0, expected.1
            ),
            CostModelError::SchemaMismatch { expected, got } => {
                write!(f, "model expects {expected} features, got {got}")
            }
            CostModelError::NonFinite => write!(f, "costs must be finite"),
            CostModelError::Forest(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for CostModelError {}

impl From<ForestError> for CostModelError {
    fn from(e: ForestError) -> Self {
        CostModelError::Forest(e)
    }
}

/// Selection cost per candidate (`f`) and merge cost per adjacency edge
/// (`g`), indexed like the owning CRAG.
#[derive(Debug, Clone, PartialEq)]
pub struct CostTable {
    pub f: Vec<f64>,
    pub g: Vec<f64>,
}

impl CostTable {
    pub fn new(crag: &Crag, f: Vec<f64>, g: Vec<f64>) -> Result<Self, CostModelError> {
        let table = CostTable { f, g };
        table.check(crag)?;
        Ok(table)
    }

    pub fn zeros(crag: &Crag) -> Self {
        CostTable {
            f: vec![0.0; crag.num_candidates()],
            g: vec![0.0; crag.num_edges()],
        }
    }

    pub fn check(&self, crag: &Crag) -> Result<(), CostModelError> {
        let expected = (crag.num_candidates(), crag.num_edges());
        let got = (self.f.len(), self.g.len());
        if expected != got {
            return Err(CostModelError::KeyMismatch { expected, got });
        }
        if self.f.iter().chain(&self.g).any(|c| !c.is_finite()) {
            return Err(CostModelError::NonFinite);
        }
        Ok(())
    }

    /// `sum_i y_i f_i + sum_e m_e g_e`, summed in index order (candidates
    /// first) so every caller gets bit-identical values for one assignment.
    pub fn objective(&self, y: &[bool], m: &[bool]) -> f64 {
        let mut total = 0.0;
        for (&c, &s) in self.f.iter().zip(y) {
            if s {
                total += c;
            }
        }
        for (&c, &s) in self.g.iter().zip(m) {
            if s {
                total += c;
            }
        }
        total
    }
}

/// `log((1 - p) / p)` with `p` clamped to `[1e-6, 1 - 1e-6]`: negative when the
/// positive class is more likely, so selecting or merging is rewarded.
pub fn cost_from_probability(p: f64) -> f64 {
    let p = p.clamp(P_MIN, 1.0 - P_MIN);
    libm::log((1.0 - p) / p)
}

/// Ground-truth matching of a CRAG.
#[derive(Debug, Clone, PartialEq)]
pub struct BestEffort {
    pub solution: Solution,
    /// Per candidate: the ground-truth label shared by all of its leaves, if
    /// that label exists and is non-zero.
    pub object: Vec<Option<u32>>,
}

/// Ground-truth label of each leaf: the label with the largest pixel
/// overlap, ties to the smaller label (so background wins its ties).
pub fn leaf_labels(crag: &Crag, gt: &LabelImage) -> Result<Vec<Option<u32>>, CostModelError> {
    if gt.width() != crag.width() || gt.height() != crag.height() {
        return Err(CostModelError::DimensionMismatch {
            crag: (crag.width(), crag.height()),
            image: (gt.width(), gt.height()),
        });
    }
    let labels = gt.as_slice();
    let mut out = vec![None; crag.num_candidates()];
    for &l in crag.leaves() {
        let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
        for p in crag.pixels(l) {
            *counts.entry(labels[p]).or_default() += 1;
        }
        // BTreeMap iterates ascending, so `>` keeps the smaller label on ties
        let mut best = (0u32, 0usize);
        for (&label, &count) in &counts {
            if count > best.1 {
                best = (label, count);
            }
        }
        out[l] = Some(best.0);
    }
    Ok(out)
}

/// The feasible assignment closest to the ground truth.
///
/// Every candidate whose leaves all carry the same non-zero label is
/// eligible; the selected candidates are the eligible ones without an
/// eligible ancestor. Edges between selected candidates of the same object
/// are merged. Under [`Mode::MergeTreeOnly`] no edge is merged, and under
/// [`Mode::LeafMulticutOnly`] only leaves are eligible.
///
/// The returned objective is 0; use [`CostTable::objective`] to score it.
pub fn best_effort(crag: &Crag, gt: &LabelImage, mode: Mode) -> Result<BestEffort, CostModelError> {
    let leaf = leaf_labels(crag, gt)?;
    let n = crag.num_candidates();
    // candidate label: Some(l) iff all leaves share l (0 included)
    let mut shared: Vec<Option<u32>> = vec![None; n];
    for &v in crag.preorder().iter().rev() {
        shared[v] = if crag.is_leaf(v) {
            leaf[v]
        } else {
            let mut it = crag.children(v).iter().map(|&c| shared[c]);
            let first = it.next().flatten();
            if first.is_some() && it.all(|s| s == first) {
                first
            } else {
                None
            }
        };
    }
    let object: Vec<Option<u32>> = shared.iter().map(|s| s.filter(|&l| l != 0)).collect();

    let mut solution = Solution::empty(crag);
    for &v in crag.preorder() {
        let eligible = object[v].is_some() && (mode != Mode::LeafMulticutOnly || crag.is_leaf(v));
        let covered = crag.ancestors(v).any(|a| solution.y[a]);
        if eligible && !covered {
            solution.y[v] = true;
        }
    }
    if mode != Mode::MergeTreeOnly {
        for e in 0..crag.num_edges() {
            let (u, v) = crag.endpoints(e);
            solution.m[e] = solution.y[u] && solution.y[v] && object[u] == object[v];
        }
    }
    Ok(BestEffort { solution, object })
}

/// Training samples: one per candidate and one per adjacency edge.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Samples {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<bool>,
}

impl Samples {
    pub fn extend(&mut self, other: Samples) {
        self.features.extend(other.features);
        self.labels.extend(other.labels);
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Positive candidates are those covering leaves of a single object (not
/// only the selected ones); positive edges join two positive candidates of
/// the same object. Everything else is negative.
pub fn label_instances(
    crag: &Crag,
    best: &BestEffort,
    features: &FeatureSet,
) -> Result<(Samples, Samples), CostModelError> {
    let expected = (crag.num_candidates(), crag.num_edges());
    let got = (features.nodes.len(), features.edges.len());
    if expected != got || best.object.len() != expected.0 {
        return Err(CostModelError::KeyMismatch { expected, got });
    }
    let nodes = Samples {
        features: features.nodes.clone(),
        labels: best.object.iter().map(|o| o.is_some()).collect(),
    };
    let edges = Samples {
        features: features.edges.clone(),
        labels: (0..crag.num_edges())
            .map(|e| {
                let (u, v) = crag.endpoints(e);
                best.object[u].is_some() && best.object[u] == best.object[v]
            })
            .collect(),
    };
    Ok((nodes, edges))
}

/// Node costs from `node_forest`, edge costs from `edge_forest`.
pub fn predict_costs(
    node_forest: &Forest,
    edge_forest: &Forest,
    crag: &Crag,
    features: &FeatureSet,
) -> Result<CostTable, CostModelError> {
    let expected = (crag.num_candidates(), crag.num_edges());
    let got = (features.nodes.len(), features.edges.len());
    if expected != got {
        return Err(CostModelError::KeyMismatch { expected, got });
    }
    let predict = |forest: &Forest, rows: &[Vec<f64>]| -> Result<Vec<f64>, CostModelError> {
        rows.iter()
            .map(|x| {
                if x.len() != forest.n_features {
                    return Err(CostModelError::SchemaMismatch {
                        expected: forest.n_features,
                        got: x.len(),
                    });
                }
                Ok(cost_from_probability(forest.predict_proba(x)))
            })
            .collect()
    };
    let f = predict(node_forest, &features.nodes)?;
    let g = predict(edge_forest, &features.edges)?;
    CostTable::new(crag, f, g)
}
