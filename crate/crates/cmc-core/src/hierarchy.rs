//! Superpixels, merge-trees and candidate extraction.
//!
//! The pipeline is: seeded watershed on a boundary map, then greedy merging
//! of the adjacent region pair with the smallest merge score, then selection
//! of the merge-tree nodes that become CRAG candidates.

use alloc::collections::{BTreeMap, BTreeSet, BinaryHeap};
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Reverse;
use core::fmt;

use crate::crag::{build_crag, CandidateId, CandidateSpec, Crag, CragError};
use crate::image::{BoundaryMap, Grid, LabelImage, Pixel};
use crate::stats::median_sorted;

#[derive(Debug, Clone, PartialEq)]
pub enum HierarchyError {
    /// No pixel lies below the seed threshold.
    NoSeeds {
        threshold: f64,
    },
    InvalidThreshold(f64),
    /// The two regions share no 4-neighbor pixel pair.
    NotAdjacent,
    /// Superpixel and boundary images differ in size.
    DimensionMismatch,
    Crag(CragError),
}

impl fmt::Display for HierarchyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HierarchyError::NoSeeds { threshold } => {
                write!(f, "no boundary value below seed threshold {threshold}")
            }
            HierarchyError::InvalidThreshold(t) => {
                write!(f, "seed threshold {t} is outside [0, 1]")
            }
            HierarchyError::NotAdjacent => write!(f, "regions are not 4-adjacent"),
            HierarchyError::DimensionMismatch => {
                write!(f, "superpixel and boundary images have different sizes")
            }
            HierarchyError::Crag(e) => write!(f, "invalid CRAG: {e}"),
        }
    }
}

impl core::error::Error for HierarchyError {}

impl From<CragError> for HierarchyError {
    fn from(e: CragError) -> Self {
        HierarchyError::Crag(e)
    }
}

/// Seeded watershed by priority flooding.
///
/// Seeds are the 4-connected components of pixels with boundary value below
/// `seed_threshold`, labelled `1..=K` in row-major order of their first pixel.
/// Flooding pops pixels in ascending boundary value (FIFO among equal values)
/// and hands each unlabelled neighbor the label of the pixel that reached it.
pub fn seeded_watershed(
    boundary: &BoundaryMap,
    seed_threshold: f64,
) -> Result<LabelImage, HierarchyError> {
    if !(0.0..=1.0).contains(&seed_threshold) {
        return Err(HierarchyError::InvalidThreshold(seed_threshold));
    }
    let grid = Grid::new(boundary.width(), boundary.height());
    let values = boundary.as_slice();
    let mut labels = vec![0u32; grid.len()];
    let mut next = 0u32;
    let mut stack = Vec::new();
    for start in 0..grid.len() {
        if labels[start] != 0 || values[start] >= seed_threshold {
            continue;
        }
        next += 1;
        labels[start] = next;
        stack.push(start);
        while let Some(p) = stack.pop() {
            for q in grid.neighbors4(p) {
                if labels[q] == 0 && values[q] < seed_threshold {
                    labels[q] = next;
                    stack.push(q);
                }
            }
        }
    }
    if next == 0 {
        return Err(HierarchyError::NoSeeds {
            threshold: seed_threshold,
        });
    }

    // keys: (value bits, insertion counter, pixel); values are non-negative so
    // bit order equals numeric order
    let mut heap = BinaryHeap::new();
    let mut counter = 0u64;
    for p in 0..grid.len() {
        if labels[p] != 0 {
            heap.push(Reverse((values[p].to_bits(), counter, p)));
            counter += 1;
        }
    }
    while let Some(Reverse((_, _, p))) = heap.pop() {
        for q in grid.neighbors4(p) {
            if labels[q] == 0 {
                labels[q] = labels[p];
                heap.push(Reverse((values[q].to_bits(), counter, q)));
                counter += 1;
            }
        }
    }
    Ok(LabelImage::new(grid.width, grid.height, labels).expect("sized from grid"))
}

/// `min(|a|, |b|)` times the median interface intensity, where each 4-neighbor
/// pair `(p in a, q in b)` contributes `max(boundary[p], boundary[q])`.
pub fn merge_score(
    region_a: &[Pixel],
    region_b: &[Pixel],
    boundary: &BoundaryMap,
) -> Result<f64, HierarchyError> {
    let grid = Grid::new(boundary.width(), boundary.height());
    let b: BTreeSet<usize> = region_b.iter().map(|&p| grid.index(p)).collect();
    let mut interface = Vec::new();
    for &p in region_a {
        let pi = grid.index(p);
        for q in grid.neighbors4(pi) {
            if b.contains(&q) {
                interface.push(boundary.at(pi).max(boundary.at(q)));
            }
        }
    }
    if interface.is_empty() {
        return Err(HierarchyError::NotAdjacent);
    }
    interface.sort_by(f64::total_cmp);
    Ok(score_of(region_a.len().min(region_b.len()), &interface))
}

fn score_of(min_size: usize, sorted_interface: &[f64]) -> f64 {
    min_size as f64 * median_sorted(sorted_interface)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MergeEvent {
    pub a: u32,
    pub b: u32,
    pub merged: u32,
    pub score: f64,
}

/// Initial superpixels plus the ordered merge events built on them.
#[derive(Debug, Clone, PartialEq)]
pub struct MergeTree {
    pub superpixels: LabelImage,
    pub events: Vec<MergeEvent>,
}

impl MergeTree {
    /// Superpixel labels present in the image, ascending. Label 0 is excluded.
    pub fn leaf_ids(&self) -> Vec<u32> {
        let set: BTreeSet<u32> = self
            .superpixels
            .as_slice()
            .iter()
            .copied()
            .filter(|&l| l != 0)
            .collect();
        set.into_iter().collect()
    }
}

fn merge_sorted(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        if a[i] <= b[j] {
            out.push(a[i]);
            i += 1;
        } else {
            out.push(b[j]);
            j += 1;
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

/// Greedy agglomeration: repeatedly merge the adjacent pair with the smallest
/// current score, ties broken by the smaller `(min_id, max_id)` pair.
///
/// Label 0 is treated as excluded background. New regions get ids above the
/// largest superpixel label, in merge order. Merging stops early only if the
/// region adjacency graph is disconnected.
pub fn build_merge_tree(
    superpixels: &LabelImage,
    boundary: &BoundaryMap,
) -> Result<MergeTree, HierarchyError> {
    if !superpixels.same_shape(boundary) {
        return Err(HierarchyError::DimensionMismatch);
    }
    let grid = Grid::new(superpixels.width(), superpixels.height());
    let labels = superpixels.as_slice();
    let values = boundary.as_slice();

    let mut size: BTreeMap<u32, usize> = BTreeMap::new();
    for &l in labels.iter().filter(|&&l| l != 0) {
        *size.entry(l).or_default() += 1;
    }
    let mut interfaces: BTreeMap<u32, BTreeMap<u32, Vec<f64>>> =
        size.keys().map(|&l| (l, BTreeMap::new())).collect();
    for (p, q) in grid.forward_pairs() {
        let (lp, lq) = (labels[p], labels[q]);
        if lp == 0 || lq == 0 || lp == lq {
            continue;
        }
        let v = values[p].max(values[q]);
        interfaces
            .get_mut(&lp)
            .unwrap()
            .entry(lq)
            .or_default()
            .push(v);
        interfaces
            .get_mut(&lq)
            .unwrap()
            .entry(lp)
            .or_default()
            .push(v);
    }
    for nbrs in interfaces.values_mut() {
        for list in nbrs.values_mut() {
            list.sort_by(f64::total_cmp);
        }
    }

    let mut queue: BTreeSet<(u64, u32, u32)> = BTreeSet::new();
    let mut current: BTreeMap<(u32, u32), u64> = BTreeMap::new();
    let push = |queue: &mut BTreeSet<(u64, u32, u32)>,
                current: &mut BTreeMap<(u32, u32), u64>,
                a: u32,
                b: u32,
                score: f64| {
        let key = (a.min(b), a.max(b));
        let bits = score.to_bits();
        queue.insert((bits, key.0, key.1));
        current.insert(key, bits);
    };
    for (&a, nbrs) in &interfaces {
        for (&b, list) in nbrs {
            if a < b {
                push(
                    &mut queue,
                    &mut current,
                    a,
                    b,
                    score_of(size[&a].min(size[&b]), list),
                );
            }
        }
    }

    let mut next_id = superpixels.max_label() + 1;
    let mut events = Vec::with_capacity(size.len().saturating_sub(1));
    while let Some((bits, a, b)) = queue.pop_first() {
        current.remove(&(a, b));
        let merged = next_id;
        next_id += 1;
        events.push(MergeEvent {
            a,
            b,
            merged,
            score: f64::from_bits(bits),
        });

        let na = interfaces.remove(&a).unwrap_or_default();
        let nb = interfaces.remove(&b).unwrap_or_default();
        let mut combined: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
        for (x, list) in na.into_iter().chain(nb) {
            if x == a || x == b {
                continue;
            }
            let entry = combined.entry(x).or_default();
            *entry = merge_sorted(entry, &list);
        }
        for &old in &[a, b] {
            for &x in combined.keys() {
                let key = (old.min(x), old.max(x));
                if let Some(bits) = current.remove(&key) {
                    queue.remove(&(bits, key.0, key.1));
                }
                if let Some(n) = interfaces.get_mut(&x) {
                    n.remove(&old);
                }
            }
        }
        let new_size = size.remove(&a).unwrap_or(0) + size.remove(&b).unwrap_or(0);
        size.insert(merged, new_size);
        for (&x, list) in &combined {
            let s = score_of(new_size.min(size[&x]), list);
            push(&mut queue, &mut current, merged, x, s);
            interfaces.get_mut(&x).unwrap().insert(merged, list.clone());
        }
        interfaces.insert(merged, combined);
    }
    Ok(MergeTree {
        superpixels: superpixels.clone(),
        events,
    })
}

/// Turns a merge-tree into a CRAG.
///
/// A node's level is 0 for superpixels and `1 + max(child levels)` for merged
/// regions. Included are all nodes with `level <= max_merges` and, when
/// `score_threshold` is given, whose subtree contains no merge scored above
/// the threshold. Adjacency edges join every pair of included, disjoint,
/// 4-touching candidates on any level.
pub fn extract_candidates(
    tree: &MergeTree,
    max_merges: u32,
    score_threshold: Option<f64>,
) -> Result<Crag, HierarchyError> {
    let sp = &tree.superpixels;
    let grid = Grid::new(sp.width(), sp.height());
    let labels = sp.as_slice();

    let mut pixels: BTreeMap<u32, Vec<Pixel>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        if l != 0 {
            pixels.entry(l).or_default().push(grid.pixel(i));
        }
    }

    // level and worst score below each node
    let mut info: BTreeMap<u32, (u32, f64)> = pixels.keys().map(|&l| (l, (0, 0.0))).collect();
    let mut parent: BTreeMap<u32, u32> = BTreeMap::new();
    let mut included: BTreeSet<u32> = pixels.keys().copied().collect();
    let mut specs: Vec<CandidateSpec> = Vec::new();
    let mut subset = Vec::new();
    for ev in &tree.events {
        let (la, sa) = info[&ev.a];
        let (lb, sb) = info[&ev.b];
        let level = 1 + la.max(lb);
        let worst = ev.score.max(sa).max(sb);
        info.insert(ev.merged, (level, worst));
        parent.insert(ev.a, ev.merged);
        parent.insert(ev.b, ev.merged);
        let within_score = score_threshold.is_none_or(|t| worst <= t);
        if level <= max_merges
            && within_score
            && included.contains(&ev.a)
            && included.contains(&ev.b)
        {
            included.insert(ev.merged);
            specs.push(CandidateSpec::merged(ev.merged, level));
            subset.push((CandidateId(ev.a), CandidateId(ev.merged)));
            subset.push((CandidateId(ev.b), CandidateId(ev.merged)));
        }
    }

    let chain = |leaf: u32| -> Vec<u32> {
        let mut out = vec![leaf];
        let mut cur = leaf;
        while let Some(&p) = parent.get(&cur) {
            if !included.contains(&p) {
                break;
            }
            out.push(p);
            cur = p;
        }
        out
    };
    let mut leaf_pairs: BTreeSet<(u32, u32)> = BTreeSet::new();
    for (p, q) in grid.forward_pairs() {
        let (lp, lq) = (labels[p], labels[q]);
        if lp != 0 && lq != 0 && lp != lq {
            leaf_pairs.insert((lp.min(lq), lp.max(lq)));
        }
    }
    let chains: BTreeMap<u32, Vec<u32>> = pixels.keys().map(|&l| (l, chain(l))).collect();
    let mut adjacency: BTreeSet<(u32, u32)> = BTreeSet::new();
    for &(l1, l2) in &leaf_pairs {
        let (c1, c2) = (&chains[&l1], &chains[&l2]);
        for &u in c1 {
            if c2.contains(&u) {
                break;
            }
            for &v in c2 {
                if c1.contains(&v) {
                    break;
                }
                adjacency.insert((u.min(v), u.max(v)));
            }
        }
    }

    let mut candidates: Vec<CandidateSpec> = pixels
        .into_iter()
        .map(|(l, px)| CandidateSpec::leaf(l, px))
        .collect();
    candidates.extend(specs);
    let adjacency: Vec<(CandidateId, CandidateId)> = adjacency
        .into_iter()
        .map(|(u, v)| (CandidateId(u), CandidateId(v)))
        .collect();
    Ok(build_crag(
        candidates,
        &adjacency,
        &subset,
        grid.width,
        grid.height,
    )?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::Raster;

    fn map(width: u32, height: u32, f: impl Fn(u32, u32) -> f64) -> BoundaryMap {
        let v = (0..height)
            .flat_map(|r| (0..width).map(move |c| (r, c)))
            .map(|(r, c)| f(r, c))
            .collect();
        Raster::new_unit(width, height, v).unwrap()
    }

    #[test]
    fn watershed_constant_zero_is_one_region() {
        let ws = seeded_watershed(&Raster::constant(5, 4, 0.0), 0.5).unwrap();
        assert!(ws.as_slice().iter().all(|&l| l == 1));
    }

    #[test]
    fn watershed_barrier_column() {
        let b = map(4, 4, |_, c| if c == 2 { 1.0 } else { 0.0 });
        let ws = seeded_watershed(&b, 0.5).unwrap();
        assert_eq!(ws.max_label(), 2);
        for r in 0..4 {
            assert_eq!(ws.get(r, 0), 1);
            assert_eq!(ws.get(r, 1), 1);
            assert_eq!(ws.get(r, 3), 2);
        }
        // the barrier column is claimed as a whole by one side
        let barrier: BTreeSet<u32> = (0..4).map(|r| ws.get(r, 2)).collect();
        assert_eq!(barrier.len(), 1);
    }

    #[test]
    fn watershed_without_seeds() {
        let err = seeded_watershed(&Raster::constant(2, 2, 1.0), 0.5).unwrap_err();
        assert_eq!(err, HierarchyError::NoSeeds { threshold: 0.5 });
        assert!(seeded_watershed(&Raster::constant(2, 2, 1.0), 1.5).is_err());
    }

    #[test]
    fn merge_score_examples() {
        // a: column 0, rows 0..3; b: column 1 rows 0..3 plus two pixels in column 2
        let b = map(3, 3, |r, c| {
            if c == 1 {
                [0.2, 0.4, 0.6][r as usize]
            } else {
                0.0
            }
        });
        let a_px = [(0, 0), (1, 0), (2, 0)];
        let b_px = [(0, 1), (1, 1), (2, 1), (0, 2), (1, 2)];
        assert!((merge_score(&a_px, &b_px, &b).unwrap() - 1.2).abs() < 1e-12);

        let zero = Raster::constant(3, 3, 0.0);
        assert_eq!(merge_score(&a_px, &b_px, &zero).unwrap(), 0.0);

        let b2 = map(
            2,
            2,
            |r, c| if c == 1 { [0.1, 0.3][r as usize] } else { 0.0 },
        );
        let s = merge_score(&[(0, 0), (1, 0)], &[(0, 1), (1, 1)], &b2).unwrap();
        assert!((s - 0.4).abs() < 1e-12);

        assert_eq!(
            merge_score(&[(0, 0)], &[(2, 2)], &zero),
            Err(HierarchyError::NotAdjacent)
        );
    }

    #[test]
    fn single_region_has_no_events() {
        let sp = LabelImage::new(2, 2, vec![1; 4]).unwrap();
        let t = build_merge_tree(&sp, &Raster::constant(2, 2, 0.3)).unwrap();
        assert!(t.events.is_empty());
    }

    #[test]
    fn collinear_regions_merge_weakest_interface_first() {
        // A | B | C, each 1x2 columns; interface A-B at 0.1, B-C at 0.9
        let sp = LabelImage::new(3, 2, vec![1, 2, 3, 1, 2, 3]).unwrap();
        let b = map(3, 2, |_, c| [0.1, 0.0, 0.9][c as usize]);
        let t = build_merge_tree(&sp, &b).unwrap();
        assert_eq!(t.events.len(), 2);
        assert_eq!(
            (t.events[0].a, t.events[0].b, t.events[0].merged),
            (1, 2, 4)
        );
        assert!((t.events[0].score - 0.2).abs() < 1e-12);
        assert_eq!(
            (t.events[1].a, t.events[1].b, t.events[1].merged),
            (3, 4, 5)
        );
    }

    /// The 4x2 layout of the `fixtures::quad` CRAG, with boundary values that
    /// make a+b then c+d then e+f the cheapest merges.
    fn quad_tree() -> MergeTree {
        let sp = LabelImage::new(4, 2, vec![1, 1, 2, 2, 3, 3, 3, 4]).unwrap();
        let b = map(4, 2, |r, c| {
            [[0.9, 0.1, 0.1, 0.9], [0.9, 0.9, 0.3, 0.3]][r as usize][c as usize]
        });
        build_merge_tree(&sp, &b).unwrap()
    }

    #[test]
    fn quad_hierarchy_events() {
        let t = quad_tree();
        let pairs: Vec<(u32, u32, u32)> = t.events.iter().map(|e| (e.a, e.b, e.merged)).collect();
        assert_eq!(pairs, vec![(1, 2, 5), (3, 4, 6), (5, 6, 7)]);
    }

    #[test]
    fn quad_extraction_has_cross_level_edges() {
        let crag = extract_candidates(&quad_tree(), 2, None).unwrap();
        assert_eq!(crag.num_candidates(), 7);
        let edges: Vec<(u32, u32)> = crag.edges().iter().map(|e| (e.a.0, e.b.0)).collect();
        assert!(edges.contains(&(3, 5)), "{edges:?}");
        assert!(edges.contains(&(5, 6)));
        assert_eq!(edges.len(), 10);
        assert_eq!(crag.edges(), crate::fixtures::quad::crag().edges());
    }

    #[test]
    fn zero_merges_gives_superpixel_graph() {
        let crag = extract_candidates(&quad_tree(), 0, None).unwrap();
        assert_eq!(crag.num_candidates(), 4);
        assert!(crag.roots().len() == 4);
        let edges: Vec<(u32, u32)> = crag.edges().iter().map(|e| (e.a.0, e.b.0)).collect();
        assert_eq!(edges, vec![(1, 2), (1, 3), (2, 3), (2, 4), (3, 4)]);
    }

    #[test]
    fn chain_of_eight_is_cut_at_level_five() {
        // eight 1-pixel leaves in a row; boundary rises left to right so merges run left-to-right
        let sp = LabelImage::new(8, 1, (1..=8).collect()).unwrap();
        let b = map(8, 1, |_, c| c as f64 / 8.0);
        let t = build_merge_tree(&sp, &b).unwrap();
        assert_eq!(t.events.len(), 7);
        let crag = extract_candidates(&t, 5, None).unwrap();
        // leaves + merged nodes of level 1..=5
        assert_eq!(crag.num_candidates(), 8 + 5);
        assert!((0..crag.num_candidates()).all(|i| crag.level(i) <= 5));
        let full = extract_candidates(&t, u32::MAX, None).unwrap();
        assert_eq!(full.num_candidates(), 15);
    }

    #[test]
    fn score_threshold_prunes_expensive_subtrees() {
        let t = quad_tree();
        let first = t.events[0].score;
        let crag = extract_candidates(&t, 5, Some(first)).unwrap();
        // only merges scored at most the first survive
        for i in 0..crag.num_candidates() {
            if !crag.is_leaf(i) {
                let ev = t.events.iter().find(|e| e.merged == crag.id(i).0).unwrap();
                assert!(ev.score <= first);
            }
        }
        assert!(crag.num_candidates() < 7);
    }
}
