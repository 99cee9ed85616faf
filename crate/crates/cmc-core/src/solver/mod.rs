//! Exact minimization of the candidate multi-cut objective.
//!
//! [`solve`] fixes provably useless candidates, splits the remaining
//! variables into independent blocks and solves each block by
//! branch-and-bound. Path constraints are not enumerated up front: after each
//! round the incumbent is checked, every violated constraint is added, and
//! the affected blocks are solved again until no violation remains.

#![allow(clippy::needless_range_loop)]

mod bnb;

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::costmodel::{CostModelError, CostTable};
use crate::crag::{
    check_keys, shortest_merged_path, validate_assignment, Crag, PathConstraint, Solution,
    Violation,
};
use crate::image::LabelImage;
use crate::unionfind::UnionFind;
use bnb::{Block, LocalPath, Search};

/// Which part of the model may be used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    /// Any candidates, any merges.
    #[default]
    Full,
    /// No merges: a pure merge-tree selection.
    MergeTreeOnly,
    /// Only leaf candidates may be selected; leaves may stay unselected.
    LeafMulticutOnly,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Full => "full",
            Mode::MergeTreeOnly => "mt",
            Mode::LeafMulticutOnly => "mc",
        }
    }

    /// Whether an assignment respects the restriction (ignores feasibility).
    pub fn admits(self, crag: &Crag, y: &[bool], m: &[bool]) -> bool {
        match self {
            Mode::Full => true,
            Mode::MergeTreeOnly => m.iter().all(|&x| !x),
            Mode::LeafMulticutOnly => (0..y.len()).all(|i| !y[i] || crag.is_leaf(i)),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = SolverError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "full" | "cmc" => Ok(Mode::Full),
            "mt" | "merge_tree_only" => Ok(Mode::MergeTreeOnly),
            "mc" | "leaf_multicut_only" => Ok(Mode::LeafMulticutOnly),
            _ => Err(SolverError::UnknownMode),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SolverError {
    Costs(CostModelError),
    /// Brute force refused: more than [`BRUTE_FORCE_LIMIT`] variables.
    TooLarge {
        variables: usize,
    },
    InfeasibleSolution(Vec<Violation>),
    KeyMismatch,
    UnknownMode,
}

impl fmt::Display for SolverError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolverError::Costs(e) => write!(f, "{e}"),
            SolverError::TooLarge { variables } => {
                write!(
                    f,
                    "{variables} variables exceed the enumeration limit of {BRUTE_FORCE_LIMIT}"
                )
            }
            SolverError::InfeasibleSolution(v) => {
                write!(f, "solution violates {} constraints", v.len())
            }
            SolverError::KeyMismatch => write!(f, "solution does not match the CRAG"),
            SolverError::UnknownMode => write!(f, "mode must be one of full, mt, mc"),
        }
    }
}

impl core::error::Error for SolverError {}

impl From<CostModelError> for SolverError {
    fn from(e: CostModelError) -> Self {
        SolverError::Costs(e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Optimal,
    /// Interrupted; the solution is feasible but possibly suboptimal.
    TimeLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutcome {
    pub solution: Solution,
    pub status: Status,
    /// Number of solve/separate rounds.
    pub rounds: usize,
    /// Objective of the relaxed problem after each round.
    pub round_objectives: Vec<f64>,
    pub constraints_added: usize,
    pub nodes_explored: u64,
    /// Variables left after presolve.
    pub free_variables: usize,
    pub blocks: usize,
}

/// Solves to optimality.
pub fn solve(crag: &Crag, costs: &CostTable, mode: Mode) -> Result<SolveOutcome, SolverError> {
    solve_with(crag, costs, mode, &mut || false)
}

/// Solves until optimal or until `should_stop` returns true (it is polled
/// periodically). On interruption the incumbent is made feasible by merging
/// every edge inside a merged component.
pub fn solve_with<S: FnMut() -> bool>(
    crag: &Crag,
    costs: &CostTable,
    mode: Mode,
    should_stop: &mut S,
) -> Result<SolveOutcome, SolverError> {
    costs.check(crag)?;
    let n = crag.num_candidates();
    let k = crag.num_edges();

    // presolve: mode restrictions, then drop candidates that can only cost
    let mut y_free = vec![true; n];
    let mut m_free = vec![mode != Mode::MergeTreeOnly; k];
    if mode == Mode::LeafMulticutOnly {
        for i in 0..n {
            y_free[i] = crag.is_leaf(i);
        }
    }
    loop {
        let mut changed = false;
        for e in 0..k {
            let (u, v) = crag.endpoints(e);
            if m_free[e] && !(y_free[u] && y_free[v]) {
                m_free[e] = false;
                changed = true;
            }
        }
        for i in 0..n {
            if y_free[i]
                && costs.f[i] >= 0.0
                && crag
                    .incident_edges(i)
                    .iter()
                    .all(|&e| !m_free[e] || costs.g[e] >= 0.0)
            {
                y_free[i] = false;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    // independent blocks: free candidates linked by free edges or by sharing a chain
    let mut uf = UnionFind::new(n);
    for e in (0..k).filter(|&e| m_free[e]) {
        let (u, v) = crag.endpoints(e);
        uf.union(u, v);
    }
    let nearest_free = |i: usize| crag.ancestors(i).find(|&a| y_free[a]);
    for i in (0..n).filter(|&i| y_free[i]) {
        if let Some(a) = nearest_free(i) {
            uf.union(i, a);
        }
    }
    let mut block_of_root: BTreeMap<usize, usize> = BTreeMap::new();
    let mut node_block = vec![usize::MAX; n];
    let mut local = vec![usize::MAX; n];
    let mut members: Vec<Vec<usize>> = Vec::new();
    for &i in crag.preorder() {
        if !y_free[i] {
            continue;
        }
        let r = uf.find(i);
        let b = *block_of_root.entry(r).or_insert_with(|| {
            members.push(Vec::new());
            members.len() - 1
        });
        node_block[i] = b;
        local[i] = members[b].len();
        members[b].push(i);
    }
    let mut block_edges: Vec<Vec<usize>> = vec![Vec::new(); members.len()];
    let mut edge_local = vec![usize::MAX; k];
    for e in (0..k).filter(|&e| m_free[e]) {
        let b = node_block[crag.endpoints(e).0];
        edge_local[e] = block_edges[b].len();
        block_edges[b].push(e);
    }
    let mut blocks: Vec<Block> = members
        .iter()
        .zip(&block_edges)
        .map(|(nodes, edges)| {
            let nn = nodes.len();
            let parent: Vec<Option<usize>> = nodes
                .iter()
                .map(|&i| nearest_free(i).map(|a| local[a]))
                .collect();
            let mut children = vec![Vec::new(); nn];
            let mut roots = Vec::new();
            for (li, p) in parent.iter().enumerate() {
                match p {
                    Some(p) => children[*p].push(li),
                    None => roots.push(li),
                }
            }
            let ends: Vec<(usize, usize)> = edges
                .iter()
                .map(|&e| {
                    let (u, v) = crag.endpoints(e);
                    (local[u], local[v])
                })
                .collect();
            let mut incident = vec![Vec::new(); nn];
            for (le, &(u, v)) in ends.iter().enumerate() {
                incident[u].push(le);
                incident[v].push(le);
            }
            let mut cost: Vec<f64> = nodes.iter().map(|&i| costs.f[i]).collect();
            cost.extend(edges.iter().map(|&e| costs.g[e]));
            // nodes were collected in preorder, so reverse order is a valid postorder
            let postorder: Vec<usize> = (0..nn).rev().collect();
            Block {
                n_nodes: nn,
                watch: vec![Vec::new(); ends.len()],
                ends,
                parent,
                children,
                postorder,
                roots,
                incident,
                cost,
                paths: Vec::new(),
            }
        })
        .collect();

    let free_variables = blocks.iter().map(|b| b.n_vars()).sum();
    let mut y = vec![false; n];
    let mut m = vec![false; k];
    let mut block_obj = vec![0.0; blocks.len()];
    let mut pending: Vec<usize> = (0..blocks.len()).collect();
    let mut outcome = SolveOutcome {
        solution: Solution::empty(crag),
        status: Status::Optimal,
        rounds: 0,
        round_objectives: Vec::new(),
        constraints_added: 0,
        nodes_explored: 0,
        free_variables,
        blocks: blocks.len(),
    };

    loop {
        outcome.rounds += 1;
        for &b in &pending {
            let search = Search::new(&blocks[b], should_stop);
            let (assignment, obj, explored, interrupted) = search.run();
            outcome.nodes_explored += explored;
            block_obj[b] = obj;
            for (li, &i) in members[b].iter().enumerate() {
                y[i] = assignment[li];
            }
            for (le, &e) in block_edges[b].iter().enumerate() {
                m[e] = assignment[blocks[b].n_nodes + le];
            }
            if interrupted {
                outcome.status = Status::TimeLimit;
                break;
            }
        }
        outcome.round_objectives.push(block_obj.iter().sum());
        if outcome.status == Status::TimeLimit {
            close_merges(crag, &y, &mut m);
            break;
        }
        let cuts = separate_path_constraints(crag, &m);
        if cuts.is_empty() {
            break;
        }
        outcome.constraints_added += cuts.len();
        pending.clear();
        for cut in cuts {
            let b = node_block[crag.endpoints(cut.bypassed).0];
            blocks[b].add_path(LocalPath {
                bypass: edge_local[cut.bypassed],
                path: cut.path.iter().map(|&e| edge_local[e]).collect(),
            });
            if pending.last() != Some(&b) && !pending.contains(&b) {
                pending.push(b);
            }
        }
        pending.sort_unstable();
    }

    let objective = costs.objective(&y, &m);
    outcome.solution = Solution { y, m, objective };
    Ok(outcome)
}

/// Merges every unmerged edge whose endpoints are already joined.
fn close_merges(crag: &Crag, y: &[bool], m: &mut [bool]) {
    let mut uf = UnionFind::new(crag.num_candidates());
    for e in (0..m.len()).filter(|&e| m[e]) {
        let (u, v) = crag.endpoints(e);
        uf.union(u, v);
    }
    for e in 0..m.len() {
        let (u, v) = crag.endpoints(e);
        if !m[e] && y[u] && y[v] && uf.find(u) == uf.find(v) {
            m[e] = true;
        }
    }
}

/// One shortest path constraint for every unmerged edge whose endpoints are
/// connected through merged edges. Empty iff no path constraint is violated.
pub fn separate_path_constraints(crag: &Crag, m: &[bool]) -> Vec<PathConstraint> {
    let mut uf = UnionFind::new(crag.num_candidates());
    for e in (0..m.len()).filter(|&e| m[e]) {
        let (u, v) = crag.endpoints(e);
        uf.union(u, v);
    }
    (0..m.len())
        .filter(|&e| !m[e])
        .filter_map(|e| {
            let (u, v) = crag.endpoints(e);
            if uf.find(u) != uf.find(v) {
                return None;
            }
            shortest_merged_path(crag, m, u, v).map(|path| PathConstraint { bypassed: e, path })
        })
        .collect()
}

/// Largest `|V| + |E|` accepted by [`brute_force`].
pub const BRUTE_FORCE_LIMIT: usize = 26;

/// Exhaustive oracle: the minimum-objective assignment that passes
/// [`validate_assignment`] and the mode restriction, ties broken toward the
/// lexicographically smallest `(y, m)` bit vector.
///
/// Assignments that merge an edge with an unselected endpoint or select two
/// overlapping candidates are skipped without calling the validator, since
/// it would reject them regardless of the remaining bits.
pub fn brute_force(crag: &Crag, costs: &CostTable, mode: Mode) -> Result<Solution, SolverError> {
    costs.check(crag)?;
    let n = crag.num_candidates();
    let k = crag.num_edges();
    if n + k > BRUTE_FORCE_LIMIT {
        return Err(SolverError::TooLarge { variables: n + k });
    }
    let mut best: Option<(f64, Vec<bool>, Vec<bool>)> = None;
    let mut y = vec![false; n];
    let mut m = vec![false; k];
    for ymask in 0u32..(1 << n) {
        for i in 0..n {
            // y_0 is the most significant position of the lexicographic order
            y[i] = ymask >> (n - 1 - i) & 1 == 1;
        }
        let overlapping = (0..n).any(|i| y[i] && crag.ancestors(i).any(|a| y[a]));
        if overlapping {
            continue;
        }
        let open: Vec<usize> = (0..k)
            .filter(|&e| {
                let (u, v) = crag.endpoints(e);
                y[u] && y[v]
            })
            .collect();
        for mmask in 0u32..(1 << open.len()) {
            m.iter_mut().for_each(|x| *x = false);
            for (j, &e) in open.iter().enumerate() {
                m[e] = mmask >> (open.len() - 1 - j) & 1 == 1;
            }
            if !mode.admits(crag, &y, &m) {
                continue;
            }
            if !validate_assignment(crag, &y, &m)
                .map_err(|_| SolverError::KeyMismatch)?
                .is_empty()
            {
                continue;
            }
            let obj = costs.objective(&y, &m);
            let better = match &best {
                None => true,
                Some((b, by, bm)) => obj < *b || (obj == *b && (&y, &m) < (by, bm)),
            };
            if better {
                best = Some((obj, y.clone(), m.clone()));
            }
        }
    }
    let (objective, y, m) = best.expect("the empty assignment is always feasible");
    Ok(Solution { y, m, objective })
}

/// Connected components of selected candidates joined by merged edges. Each
/// component gets a label `>= 1`, numbered by its first pixel in row-major
/// order; pixels of unselected candidates are 0.
pub fn extract_segmentation(crag: &Crag, solution: &Solution) -> Result<LabelImage, SolverError> {
    check_keys(crag, &solution.y, &solution.m).map_err(|_| SolverError::KeyMismatch)?;
    let violations = validate_assignment(crag, &solution.y, &solution.m)
        .map_err(|_| SolverError::KeyMismatch)?;
    if !violations.is_empty() {
        return Err(SolverError::InfeasibleSolution(violations));
    }
    let n = crag.num_candidates();
    let mut uf = UnionFind::new(n);
    for e in solution.merged() {
        let (u, v) = crag.endpoints(e);
        uf.union(u, v);
    }
    let mut first_pixel: BTreeMap<usize, usize> = BTreeMap::new();
    for i in solution.selected() {
        let lowest = crag.pixels(i).min().expect("candidates are non-empty");
        let root = uf.find(i);
        let entry = first_pixel.entry(root).or_insert(lowest);
        *entry = (*entry).min(lowest);
    }
    let mut order: Vec<(usize, usize)> = first_pixel
        .into_iter()
        .map(|(root, px)| (px, root))
        .collect();
    order.sort_unstable();
    let label_of: BTreeMap<usize, u32> = order
        .iter()
        .enumerate()
        .map(|(l, &(_, root))| (root, l as u32 + 1))
        .collect();

    let mut image = LabelImage::background(crag.width(), crag.height());
    for i in solution.selected() {
        let label = label_of[&uf.find(i)];
        for p in crag.pixels(i) {
            image.as_mut_slice()[p] = label;
        }
    }
    Ok(image)
}

#[cfg(test)]
mod tests;
