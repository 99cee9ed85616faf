//! Segmentation metrics: variation of information, Rand index and an
//! object detection score.
//!
//! All three are computed from a [`ContingencyTable`] of label co-occurrences.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::fmt;

use crate::image::LabelImage;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalError {
    DimensionMismatch,
    /// No pixel is left to compare after excluding background.
    EmptyOverlap,
    /// The Rand index needs at least two pixels.
    DegenerateInput,
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalError::DimensionMismatch => write!(f, "images differ in size"),
            EvalError::EmptyOverlap => write!(f, "no pixels left to evaluate"),
            EvalError::DegenerateInput => write!(f, "fewer than two pixels"),
        }
    }
}

impl core::error::Error for EvalError {}

/// Pixel counts per `(gt, pred)` label pair.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ContingencyTable {
    pub counts: BTreeMap<(u32, u32), u64>,
    pub gt: BTreeMap<u32, u64>,
    pub pred: BTreeMap<u32, u64>,
    pub total: u64,
}

impl ContingencyTable {
    /// With `ignore_background`, pixels whose ground-truth label is 0 are skipped.
    pub fn new(
        pred: &LabelImage,
        gt: &LabelImage,
        ignore_background: bool,
    ) -> Result<Self, EvalError> {
        if (pred.width(), pred.height()) != (gt.width(), gt.height()) {
            return Err(EvalError::DimensionMismatch);
        }
        let mut table = ContingencyTable::default();
        for (&p, &g) in pred.as_slice().iter().zip(gt.as_slice()) {
            if ignore_background && g == 0 {
                continue;
            }
            *table.counts.entry((g, p)).or_default() += 1;
            *table.gt.entry(g).or_default() += 1;
            *table.pred.entry(p).or_default() += 1;
            table.total += 1;
        }
        Ok(table)
    }
}

/// `sum p log2 p`, summed in ascending count order so that the result does
/// not depend on how the table is keyed.
fn plogp_sum<'a>(counts: impl Iterator<Item = &'a u64>, total: f64) -> f64 {
    let mut counts: Vec<u64> = counts.copied().collect();
    counts.sort_unstable();
    counts
        .into_iter()
        .map(|c| {
            let p = c as f64 / total;
            p * libm::log2(p)
        })
        .sum()
}

/// Variation of information in bits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Voi {
    /// `H(pred | gt)`: over-segmentation.
    pub split: f64,
    /// `H(gt | pred)`: under-segmentation.
    pub merge: f64,
    pub total: f64,
}

pub fn voi(pred: &LabelImage, gt: &LabelImage, ignore_background: bool) -> Result<Voi, EvalError> {
    let table = ContingencyTable::new(pred, gt, ignore_background)?;
    if table.total == 0 {
        return Err(EvalError::EmptyOverlap);
    }
    let n = table.total as f64;
    let joint = plogp_sum(table.counts.values(), n);
    let h_gt = -plogp_sum(table.gt.values(), n);
    let h_pred = -plogp_sum(table.pred.values(), n);
    // H(A|B) = H(A,B) - H(B); clamp rounding noise below zero
    let split = (-joint - h_gt).max(0.0);
    let merge = (-joint - h_pred).max(0.0);
    Ok(Voi {
        split,
        merge,
        total: split + merge,
    })
}

fn pairs(c: u64) -> f64 {
    let c = c as f64;
    c * (c - 1.0) / 2.0
}

/// Fraction of unordered pixel pairs on which both labelings agree.
pub fn rand_index(
    pred: &LabelImage,
    gt: &LabelImage,
    ignore_background: bool,
) -> Result<f64, EvalError> {
    let table = ContingencyTable::new(pred, gt, ignore_background)?;
    match table.total {
        0 => return Err(EvalError::EmptyOverlap),
        1 => return Err(EvalError::DegenerateInput),
        _ => {}
    }
    let all = pairs(table.total);
    let joint: f64 = table.counts.values().map(|&c| pairs(c)).sum();
    let same_gt: f64 = table.gt.values().map(|&c| pairs(c)).sum();
    let same_pred: f64 = table.pred.values().map(|&c| pairs(c)).sum();
    let disagreements = same_gt + same_pred - 2.0 * joint;
    Ok((all - disagreements) / all)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
}

/// Matching threshold: a pair counts as a detection if its IoU exceeds this.
pub const IOU_THRESHOLD: f64 = 0.5;

/// Object-level precision and recall. Label 0 is background on both sides.
/// Objects are paired one-to-one greedily by decreasing intersection over
/// union, and only pairs with IoU above [`IOU_THRESHOLD`] count.
pub fn detection_score(pred: &LabelImage, gt: &LabelImage) -> Result<Detection, EvalError> {
    let table = ContingencyTable::new(pred, gt, false)?;
    let n_gt = table.gt.keys().filter(|&&l| l != 0).count();
    let n_pred = table.pred.keys().filter(|&&l| l != 0).count();

    let mut candidates: Vec<(f64, u32, u32)> = table
        .counts
        .iter()
        .filter(|(&(g, p), _)| g != 0 && p != 0)
        .map(|(&(g, p), &inter)| {
            let union = table.gt[&g] + table.pred[&p] - inter;
            (inter as f64 / union as f64, g, p)
        })
        .filter(|&(iou, _, _)| iou > IOU_THRESHOLD)
        .collect();
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut used_gt = BTreeMap::new();
    let mut used_pred = BTreeMap::new();
    let mut tp = 0;
    for (_, g, p) in candidates {
        if used_gt.contains_key(&g) || used_pred.contains_key(&p) {
            continue;
        }
        used_gt.insert(g, p);
        used_pred.insert(p, g);
        tp += 1;
    }

    let both_empty = n_gt == 0 && n_pred == 0;
    let ratio = |num: usize, den: usize| match den {
        0 if both_empty => 1.0,
        0 => 0.0,
        _ => num as f64 / den as f64,
    };
    let precision = ratio(tp, n_pred);
    let recall = ratio(tp, n_gt);
    let f_score = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(Detection {
        true_positives: tp,
        false_positives: n_pred - tp,
        false_negatives: n_gt - tp,
        precision,
        recall,
        f_score,
    })
}
