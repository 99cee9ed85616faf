//! Small hand-built CRAGs shared by unit tests, integration tests and docs.

/// The four-superpixel hierarchy `a, b, c, d -> e = a+b, f = c+d -> g = e+f`
/// on a 4x2 image:
///
/// ```text
/// row 0:  a a b b
/// row 1:  c c c d
/// ```
///
/// Adjacency covers every touching disjoint pair across levels, so `a`, `b`
/// and `c` form a triangle and `e` touches `c`, `d` and `f`.
pub mod quad {
    use alloc::vec;
    use alloc::vec::Vec;

    use crate::crag::{build_crag, CandidateId, CandidateSpec, Crag, Edge, Solution};

    pub const A: u32 = 1;
    pub const B: u32 = 2;
    pub const C: u32 = 3;
    pub const D: u32 = 4;
    pub const E: u32 = 5;
    pub const F: u32 = 6;
    pub const G: u32 = 7;

    pub const WIDTH: u32 = 4;
    pub const HEIGHT: u32 = 2;

    pub fn candidates() -> Vec<CandidateSpec> {
        vec![
            CandidateSpec::leaf(A, vec![(0, 0), (0, 1)]),
            CandidateSpec::leaf(B, vec![(0, 2), (0, 3)]),
            CandidateSpec::leaf(C, vec![(1, 0), (1, 1), (1, 2)]),
            CandidateSpec::leaf(D, vec![(1, 3)]),
            CandidateSpec::merged(E, 1),
            CandidateSpec::merged(F, 1),
            CandidateSpec::merged(G, 2),
        ]
    }

    pub fn adjacency() -> Vec<(CandidateId, CandidateId)> {
        [
            (A, B),
            (A, C),
            (B, C),
            (B, D),
            (C, D),
            (E, C),
            (E, D),
            (E, F),
            (A, F),
            (B, F),
        ]
        .into_iter()
        .map(|(x, y)| (CandidateId(x), CandidateId(y)))
        .collect()
    }

    pub fn subset() -> Vec<(CandidateId, CandidateId)> {
        [(A, E), (B, E), (C, F), (D, F), (E, G), (F, G)]
            .into_iter()
            .map(|(x, y)| (CandidateId(x), CandidateId(y)))
            .collect()
    }

    pub fn crag() -> Crag {
        build_crag(candidates(), &adjacency(), &subset(), WIDTH, HEIGHT).expect("fixture is valid")
    }

    /// Selects the listed candidates and merges the listed edges; objective 0.
    pub fn assignment(crag: &Crag, selected: &[u32], merged: &[(u32, u32)]) -> Solution {
        let mut s = Solution::empty(crag);
        for &id in selected {
            s.y[crag.index_of(CandidateId(id)).expect("known id")] = true;
        }
        for &(x, y) in merged {
            let e = crag
                .edge_index(Edge::new(CandidateId(x), CandidateId(y)))
                .expect("known edge");
            s.m[e] = true;
        }
        s
    }
}

/// Random small CRAGs with exactly representable costs, for checking the
/// solver against exhaustive enumeration.
pub mod random {
    use alloc::vec;
    use alloc::vec::Vec;
    use rand::seq::SliceRandom;
    use rand::Rng;

    use crate::costmodel::CostTable;
    use crate::crag::{build_crag, CandidateId, CandidateSpec, Crag};
    use crate::solver::BRUTE_FORCE_LIMIT;

    /// Side of the square canvas the leaves are grown on.
    pub const SIDE: u32 = 3;

    /// Partitions a `SIDE x SIDE` grid into `leaves` 4-connected regions by
    /// random growth from seeds.
    fn partition<R: Rng>(rng: &mut R, leaves: usize) -> Vec<u32> {
        let n = (SIDE * SIDE) as usize;
        let mut label = vec![0u32; n];
        let mut cells: Vec<usize> = (0..n).collect();
        cells.shuffle(rng);
        for (l, &c) in cells[..leaves].iter().enumerate() {
            label[c] = l as u32 + 1;
        }
        let side = SIDE as usize;
        let neighbors = |p: usize| {
            let (r, c) = (p / side, p % side);
            let mut out = Vec::with_capacity(4);
            if r > 0 {
                out.push(p - side);
            }
            if c > 0 {
                out.push(p - 1);
            }
            if c + 1 < side {
                out.push(p + 1);
            }
            if r + 1 < side {
                out.push(p + side);
            }
            out
        };
        loop {
            let frontier: Vec<usize> = (0..n)
                .filter(|&p| label[p] == 0 && neighbors(p).iter().any(|&q| label[q] != 0))
                .collect();
            if frontier.is_empty() {
                break;
            }
            let p = frontier[rng.random_range(0..frontier.len())];
            let owners: Vec<u32> = neighbors(p)
                .into_iter()
                .map(|q| label[q])
                .filter(|&l| l != 0)
                .collect();
            label[p] = owners[rng.random_range(0..owners.len())];
        }
        label
    }

    /// A CRAG with `1..=max_leaves` leaves (skewed toward more) and candidate levels at most
    /// `max_depth`. Merges join touching roots at random; adjacency keeps each
    /// touching disjoint pair with probability 0.8 and is trimmed so that the
    /// instance stays within the brute-force limit.
    pub fn crag<R: Rng>(rng: &mut R, max_leaves: usize, max_depth: u32) -> Crag {
        // the larger of two draws, so that bigger instances dominate
        let max_leaves = max_leaves.clamp(1, (SIDE * SIDE) as usize);
        let leaves = rng
            .random_range(1..=max_leaves)
            .max(rng.random_range(1..=max_leaves));
        let label = partition(rng, leaves);
        let side = SIDE as usize;
        let mut masks: Vec<Vec<bool>> = (1..=leaves as u32)
            .map(|l| label.iter().map(|&x| x == l).collect())
            .collect();
        let mut levels: Vec<u32> = vec![0; leaves];
        let touching = |a: &[bool], b: &[bool]| {
            (0..a.len()).any(|p| {
                a[p] && ((p % side + 1 < side && b[p + 1])
                    || (p % side > 0 && b[p - 1])
                    || (p + side < a.len() && b[p + side])
                    || (p >= side && b[p - side]))
            })
        };
        let mut roots: Vec<usize> = (0..leaves).collect();
        let mut subset = Vec::new();
        let merges = rng.random_range(0..leaves).max(rng.random_range(0..leaves));
        for _ in 0..merges {
            let mut pairs = Vec::new();
            for (x, &a) in roots.iter().enumerate() {
                for &b in &roots[x + 1..] {
                    if levels[a].max(levels[b]) < max_depth && touching(&masks[a], &masks[b]) {
                        pairs.push((a, b));
                    }
                }
            }
            if pairs.is_empty() {
                break;
            }
            let (a, b) = pairs[rng.random_range(0..pairs.len())];
            let id = masks.len();
            masks.push(
                masks[a]
                    .iter()
                    .zip(&masks[b])
                    .map(|(&x, &y)| x || y)
                    .collect(),
            );
            levels.push(levels[a].max(levels[b]) + 1);
            subset.push((a, id));
            subset.push((b, id));
            roots.retain(|&r| r != a && r != b);
            roots.push(id);
        }

        let n = masks.len();
        let nested = |a: usize, b: usize| masks[a].iter().zip(&masks[b]).any(|(&x, &y)| x && y);
        let mut adjacency = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                if !nested(a, b) && touching(&masks[a], &masks[b]) && rng.random_bool(0.8) {
                    adjacency.push((a, b));
                }
            }
        }
        adjacency.shuffle(rng);
        adjacency.truncate(BRUTE_FORCE_LIMIT.saturating_sub(n));
        adjacency.sort_unstable();

        let id = |i: usize| CandidateId(i as u32 + 1);
        let candidates: Vec<CandidateSpec> = (0..n)
            .map(|i| {
                if i < leaves {
                    let pixels = (0..side * side)
                        .filter(|&p| masks[i][p])
                        .map(|p| ((p / side) as u32, (p % side) as u32))
                        .collect();
                    CandidateSpec::leaf(i as u32 + 1, pixels)
                } else {
                    CandidateSpec::merged(i as u32 + 1, levels[i])
                }
            })
            .collect();
        let adjacency: Vec<_> = adjacency.into_iter().map(|(a, b)| (id(a), id(b))).collect();
        let subset: Vec<_> = subset.into_iter().map(|(c, p)| (id(c), id(p))).collect();
        build_crag(candidates, &adjacency, &subset, SIDE, SIDE).expect("generated CRAG is valid")
    }

    /// Costs drawn uniformly from the multiples of 1/64 in `[-1, 1]`, so every
    /// objective is an exact binary fraction.
    pub fn costs<R: Rng>(rng: &mut R, crag: &Crag) -> CostTable {
        let mut draw = || rng.random_range(-64i32..=64) as f64 / 64.0;
        let f = (0..crag.num_candidates()).map(|_| draw()).collect();
        let g = (0..crag.num_edges()).map(|_| draw()).collect();
        CostTable { f, g }
    }
}
