//! The candidate region adjacency graph (CRAG).
//!
//! A CRAG holds every segment candidate of a merge-tree (the initial
//! superpixels plus the regions obtained by merging them), the subset forest
//! relating children to parents, and undirected adjacency edges between
//! touching, non-overlapping candidates on any level of the tree.
//!
//! Only leaves own pixels. A merged candidate covers the union of the pixels
//! of its leaf descendants, which is resolved through a per-pixel leaf map and
//! an Euler-tour interval test instead of storing the union.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::image::{Grid, Pixel};
use crate::unionfind::UnionFind;

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CandidateId(pub u32);

impl fmt::Display for CandidateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// An unordered pair of candidate ids, stored with `a < b`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge {
    pub a: CandidateId,
    pub b: CandidateId,
}

impl Edge {
    pub fn new(x: CandidateId, y: CandidateId) -> Self {
        if x <= y {
            Edge { a: x, b: y }
        } else {
            Edge { a: y, b: x }
        }
    }

    /// The `"i-j"` key used by the JSON formats.
    pub fn key(&self) -> String {
        format!("{}-{}", self.a.0, self.b.0)
    }

    pub fn parse_key(key: &str) -> Option<Self> {
        let (a, b) = key.split_once('-')?;
        Some(Edge::new(
            CandidateId(a.trim().parse().ok()?),
            CandidateId(b.trim().parse().ok()?),
        ))
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.a, self.b)
    }
}

/// Input description of one candidate.
///
/// Leaves carry their pixels. Merged candidates may leave `pixels` empty; if
/// they do list pixels, the list must equal the union of their children.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateSpec {
    pub id: CandidateId,
    pub level: u32,
    pub pixels: Vec<Pixel>,
}

impl CandidateSpec {
    pub fn leaf(id: u32, pixels: Vec<Pixel>) -> Self {
        CandidateSpec {
            id: CandidateId(id),
            level: 0,
            pixels,
        }
    }

    pub fn merged(id: u32, level: u32) -> Self {
        CandidateSpec {
            id: CandidateId(id),
            level,
            pixels: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CragError {
    DuplicateId(CandidateId),
    UnknownId(CandidateId),
    EmptyLeaf(CandidateId),
    PixelOutOfBounds {
        id: CandidateId,
        pixel: Pixel,
    },
    OverlappingLeaves {
        a: CandidateId,
        b: CandidateId,
    },
    LeavesDoNotCoverImage {
        id: Option<CandidateId>,
        pixel: Pixel,
    },
    SubsetNotForest {
        ids: Vec<CandidateId>,
    },
    PixelsDisagreeWithChildren(CandidateId),
    AdjacencyBetweenOverlapping {
        a: CandidateId,
        b: CandidateId,
    },
    AdjacencyNotTouching {
        a: CandidateId,
        b: CandidateId,
    },
}

impl fmt::Display for CragError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CragError::DuplicateId(id) => write!(f, "candidate id {id} appears twice"),
            CragError::UnknownId(id) => write!(f, "reference to unknown candidate id {id}"),
            CragError::EmptyLeaf(id) => write!(f, "leaf candidate {id} has no pixels"),
            CragError::PixelOutOfBounds { id, pixel } => {
                write!(f, "candidate {id} has pixel {pixel:?} outside the image")
            }
            CragError::OverlappingLeaves { a, b } => {
                write!(f, "leaf candidates {a} and {b} share pixels")
            }
            CragError::LeavesDoNotCoverImage {
                id: Some(id),
                pixel,
            } => {
                write!(f, "leaf {id} covers excluded pixel {pixel:?}")
            }
            CragError::LeavesDoNotCoverImage { id: None, pixel } => {
                write!(f, "pixel {pixel:?} is not covered by any leaf")
            }
            CragError::SubsetNotForest { ids } => {
                write!(
                    f,
                    "subset relation is not a forest around candidates {ids:?}"
                )
            }
            CragError::PixelsDisagreeWithChildren(id) => {
                write!(
                    f,
                    "pixels of candidate {id} differ from the union of its children"
                )
            }
            CragError::AdjacencyBetweenOverlapping { a, b } => {
                write!(f, "adjacency edge ({a}, {b}) joins overlapping candidates")
            }
            CragError::AdjacencyNotTouching { a, b } => {
                write!(
                    f,
                    "adjacency edge ({a}, {b}) joins candidates that do not touch"
                )
            }
        }
    }
}

impl core::error::Error for CragError {}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Node {
    id: CandidateId,
    level: u32,
    parent: Option<usize>,
    children: Vec<usize>,
    /// Linear pixel indices; empty for merged candidates.
    pixels: Vec<u32>,
    size: usize,
}

const NO_LEAF: u32 = u32::MAX;

/// Candidate region adjacency graph. Immutable once built.
///
/// Candidates are indexed densely in ascending id order and adjacency edges in
/// ascending `(a, b)` order; [`Solution`] and cost vectors use these indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Crag {
    grid: Grid,
    nodes: Vec<Node>,
    index: BTreeMap<CandidateId, usize>,
    edges: Vec<Edge>,
    endpoints: Vec<(usize, usize)>,
    edge_index: BTreeMap<Edge, usize>,
    incident: Vec<Vec<usize>>,
    leaf_at: Vec<u32>,
    leaves: Vec<usize>,
    roots: Vec<usize>,
    tin: Vec<usize>,
    tout: Vec<usize>,
    euler: Vec<usize>,
}

/// Builds a CRAG, checking every structural invariant.
///
/// Leaves may leave pixels uncovered (background excluded upstream); see
/// [`build_crag_with_foreground`] to demand exact coverage of a mask.
pub fn build_crag(
    candidates: Vec<CandidateSpec>,
    adjacency: &[(CandidateId, CandidateId)],
    subset: &[(CandidateId, CandidateId)],
    width: u32,
    height: u32,
) -> Result<Crag, CragError> {
    build(
        candidates,
        adjacency,
        subset,
        Grid::new(width, height),
        None,
    )
}

/// Like [`build_crag`], but the union of leaf pixels must equal `foreground`
/// (row-major, one flag per pixel).
pub fn build_crag_with_foreground(
    candidates: Vec<CandidateSpec>,
    adjacency: &[(CandidateId, CandidateId)],
    subset: &[(CandidateId, CandidateId)],
    width: u32,
    height: u32,
    foreground: &[bool],
) -> Result<Crag, CragError> {
    build(
        candidates,
        adjacency,
        subset,
        Grid::new(width, height),
        Some(foreground),
    )
}

fn build(
    mut candidates: Vec<CandidateSpec>,
    adjacency: &[(CandidateId, CandidateId)],
    subset: &[(CandidateId, CandidateId)],
    grid: Grid,
    foreground: Option<&[bool]>,
) -> Result<Crag, CragError> {
    candidates.sort_by_key(|c| c.id);
    for w in candidates.windows(2) {
        if w[0].id == w[1].id {
            return Err(CragError::DuplicateId(w[0].id));
        }
    }
    let index: BTreeMap<CandidateId, usize> = candidates
        .iter()
        .enumerate()
        .map(|(i, c)| (c.id, i))
        .collect();
    let lookup = |id: CandidateId| index.get(&id).copied().ok_or(CragError::UnknownId(id));

    let n = candidates.len();
    let mut parent: Vec<Option<usize>> = vec![None; n];
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
    let subset_set: BTreeSet<(CandidateId, CandidateId)> = subset.iter().copied().collect();
    for &(child, par) in &subset_set {
        let (c, p) = (lookup(child)?, lookup(par)?);
        if c == p {
            return Err(CragError::SubsetNotForest { ids: vec![child] });
        }
        if let Some(old) = parent[c] {
            return Err(CragError::SubsetNotForest {
                ids: vec![child, candidates[old].id, par],
            });
        }
        parent[c] = Some(p);
        children[p].push(c);
    }
    // cycle check: walk up from each node with a step budget
    for start in 0..n {
        let mut cur = start;
        let mut steps = 0;
        while let Some(p) = parent[cur] {
            steps += 1;
            if steps > n {
                let mut ids = vec![candidates[start].id];
                let mut c = parent[start].unwrap();
                while c != start && ids.len() <= n {
                    ids.push(candidates[c].id);
                    c = parent[c].unwrap();
                }
                ids.sort();
                ids.dedup();
                return Err(CragError::SubsetNotForest { ids });
            }
            cur = p;
        }
    }

    let mut leaf_at = vec![NO_LEAF; grid.len()];
    let mut nodes = Vec::with_capacity(n);
    for (i, spec) in candidates.iter().enumerate() {
        let is_leaf = children[i].is_empty();
        let mut pixels = Vec::new();
        if is_leaf {
            if spec.pixels.is_empty() {
                return Err(CragError::EmptyLeaf(spec.id));
            }
            pixels.reserve(spec.pixels.len());
            for &px in &spec.pixels {
                if !grid.contains(px) {
                    return Err(CragError::PixelOutOfBounds {
                        id: spec.id,
                        pixel: px,
                    });
                }
                let li = grid.index(px);
                if leaf_at[li] != NO_LEAF {
                    let other = candidates[leaf_at[li] as usize].id;
                    let (a, b) = if other <= spec.id {
                        (other, spec.id)
                    } else {
                        (spec.id, other)
                    };
                    return Err(CragError::OverlappingLeaves { a, b });
                }
                if let Some(mask) = foreground {
                    if !mask[li] {
                        return Err(CragError::LeavesDoNotCoverImage {
                            id: Some(spec.id),
                            pixel: px,
                        });
                    }
                }
                leaf_at[li] = i as u32;
                pixels.push(li as u32);
            }
            pixels.sort_unstable();
        }
        nodes.push(Node {
            id: spec.id,
            level: spec.level,
            parent: parent[i],
            children: core::mem::take(&mut children[i]),
            size: pixels.len(),
            pixels,
        });
    }
    if let Some(mask) = foreground {
        if let Some(li) = (0..grid.len()).find(|&li| mask[li] && leaf_at[li] == NO_LEAF) {
            return Err(CragError::LeavesDoNotCoverImage {
                id: None,
                pixel: grid.pixel(li),
            });
        }
    }

    let roots: Vec<usize> = (0..n).filter(|&i| nodes[i].parent.is_none()).collect();
    let mut tin = vec![0; n];
    let mut tout = vec![0; n];
    let mut euler = Vec::with_capacity(n);
    for &r in &roots {
        let mut stack = vec![(r, false)];
        while let Some((v, done)) = stack.pop() {
            if done {
                tout[v] = euler.len() - 1;
                continue;
            }
            tin[v] = euler.len();
            euler.push(v);
            stack.push((v, true));
            for &c in nodes[v].children.iter().rev() {
                stack.push((c, false));
            }
        }
    }
    // sizes bottom-up: children occupy later Euler positions than parents
    for &v in euler.iter().rev() {
        if !nodes[v].children.is_empty() {
            nodes[v].size = nodes[v].children.iter().map(|&c| nodes[c].size).sum();
        }
    }
    let leaves: Vec<usize> = (0..n).filter(|&i| nodes[i].children.is_empty()).collect();

    let mut crag = Crag {
        grid,
        nodes,
        index,
        edges: Vec::new(),
        endpoints: Vec::new(),
        edge_index: BTreeMap::new(),
        incident: vec![Vec::new(); n],
        leaf_at,
        leaves,
        roots,
        tin,
        tout,
        euler,
    };

    for (i, spec) in candidates.iter().enumerate() {
        if !crag.is_leaf(i) && !spec.pixels.is_empty() {
            let mut given: Vec<usize> = spec.pixels.iter().map(|&p| grid.index(p)).collect();
            given.sort_unstable();
            let mut derived: Vec<usize> = crag.pixels(i).collect();
            derived.sort_unstable();
            if spec.pixels.iter().any(|&p| !grid.contains(p)) || given != derived {
                return Err(CragError::PixelsDisagreeWithChildren(spec.id));
            }
        }
    }

    let edge_set: BTreeSet<Edge> = adjacency.iter().map(|&(x, y)| Edge::new(x, y)).collect();
    for edge in edge_set {
        let lookup = |id: CandidateId| crag.index_of(id).ok_or(CragError::UnknownId(id));
        let (u, v) = (lookup(edge.a)?, lookup(edge.b)?);
        if crag.overlaps(u, v) {
            return Err(CragError::AdjacencyBetweenOverlapping {
                a: edge.a,
                b: edge.b,
            });
        }
        if !crag.touches(u, v) {
            return Err(CragError::AdjacencyNotTouching {
                a: edge.a,
                b: edge.b,
            });
        }
        let e = crag.edges.len();
        crag.edges.push(edge);
        crag.endpoints.push((u, v));
        crag.edge_index.insert(edge, e);
        crag.incident[u].push(e);
        crag.incident[v].push(e);
    }
    Ok(crag)
}

impl Crag {
    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn width(&self) -> u32 {
        self.grid.width
    }

    pub fn height(&self) -> u32 {
        self.grid.height
    }

    pub fn num_candidates(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn id(&self, i: usize) -> CandidateId {
        self.nodes[i].id
    }

    pub fn ids(&self) -> impl Iterator<Item = CandidateId> + '_ {
        self.nodes.iter().map(|n| n.id)
    }

    pub fn index_of(&self, id: CandidateId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn level(&self, i: usize) -> u32 {
        self.nodes[i].level
    }

    pub fn parent(&self, i: usize) -> Option<usize> {
        self.nodes[i].parent
    }

    pub fn children(&self, i: usize) -> &[usize] {
        &self.nodes[i].children
    }

    pub fn is_leaf(&self, i: usize) -> bool {
        self.nodes[i].children.is_empty()
    }

    pub fn leaves(&self) -> &[usize] {
        &self.leaves
    }

    pub fn roots(&self) -> &[usize] {
        &self.roots
    }

    /// Ancestors of `i`, nearest first.
    pub fn ancestors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        core::iter::successors(self.nodes[i].parent, move |&p| self.nodes[p].parent)
    }

    /// `i` itself followed by all its descendants, in pre-order.
    pub fn subtree(&self, i: usize) -> &[usize] {
        &self.euler[self.tin[i]..=self.tout[i]]
    }

    /// Candidate indices in pre-order: every parent precedes its children.
    pub fn preorder(&self) -> &[usize] {
        &self.euler
    }

    /// True if `anc` is `desc` or one of its ancestors.
    pub fn contains(&self, anc: usize, desc: usize) -> bool {
        self.tin[anc] <= self.tin[desc] && self.tin[desc] <= self.tout[anc]
    }

    /// Two candidates overlap iff one contains the other.
    pub fn overlaps(&self, u: usize, v: usize) -> bool {
        self.contains(u, v) || self.contains(v, u)
    }

    pub fn leaves_of(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.subtree(i)
            .iter()
            .copied()
            .filter(move |&v| self.is_leaf(v))
    }

    /// Linear pixel indices covered by candidate `i`.
    pub fn pixels(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.leaves_of(i)
            .flat_map(move |l| self.nodes[l].pixels.iter().map(|&p| p as usize))
    }

    pub fn pixel_coords(&self, i: usize) -> impl Iterator<Item = Pixel> + '_ {
        let grid = self.grid;
        self.pixels(i).map(move |p| grid.pixel(p))
    }

    pub fn size(&self, i: usize) -> usize {
        self.nodes[i].size
    }

    /// The leaf owning a linear pixel index, if any.
    pub fn leaf_at(&self, pixel: usize) -> Option<usize> {
        let l = self.leaf_at[pixel];
        (l != NO_LEAF).then_some(l as usize)
    }

    pub fn covers_pixel(&self, i: usize, pixel: usize) -> bool {
        self.leaf_at(pixel).is_some_and(|l| self.contains(i, l))
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> Edge {
        self.edges[e]
    }

    pub fn endpoints(&self, e: usize) -> (usize, usize) {
        self.endpoints[e]
    }

    pub fn edge_index(&self, edge: Edge) -> Option<usize> {
        self.edge_index.get(&edge).copied()
    }

    pub fn incident_edges(&self, i: usize) -> &[usize] {
        &self.incident[i]
    }

    /// All 4-neighbor pixel pairs `(p, q)` with `p` in `u` and `q` in `v`.
    pub fn interface(&self, u: usize, v: usize) -> Vec<(usize, usize)> {
        let mut pairs = Vec::new();
        for p in self.pixels(u) {
            for q in self.grid.neighbors4(p) {
                if self.covers_pixel(v, q) {
                    pairs.push((p, q));
                }
            }
        }
        pairs
    }

    fn touches(&self, u: usize, v: usize) -> bool {
        let (small, other) = if self.size(u) <= self.size(v) {
            (u, v)
        } else {
            (v, u)
        };
        self.pixels(small)
            .any(|p| self.grid.neighbors4(p).any(|q| self.covers_pixel(other, q)))
    }
}

/// A set of mutually overlapping candidates; at most one may be selected.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConflictClique {
    pub members: Vec<CandidateId>,
}

/// One clique per leaf: the leaf and all of its ancestors.
pub fn conflict_cliques(crag: &Crag) -> Vec<ConflictClique> {
    crag.leaves()
        .iter()
        .map(|&l| ConflictClique {
            members: core::iter::once(l)
                .chain(crag.ancestors(l))
                .map(|i| crag.id(i))
                .collect(),
        })
        .collect()
}

/// Binary selection of candidates (`y`) and merges of adjacency edges (`m`),
/// indexed like the owning [`Crag`].
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub y: Vec<bool>,
    pub m: Vec<bool>,
    pub objective: f64,
}

impl Solution {
    pub fn empty(crag: &Crag) -> Self {
        Solution {
            y: vec![false; crag.num_candidates()],
            m: vec![false; crag.num_edges()],
            objective: 0.0,
        }
    }

    pub fn selected(&self) -> impl Iterator<Item = usize> + '_ {
        self.y
            .iter()
            .enumerate()
            .filter(|(_, &s)| s)
            .map(|(i, _)| i)
    }

    pub fn merged(&self) -> impl Iterator<Item = usize> + '_ {
        self.m
            .iter()
            .enumerate()
            .filter(|(_, &s)| s)
            .map(|(e, _)| e)
    }
}

/// A path constraint: if every edge of `path` is merged, `bypassed` must be
/// merged as well. Edges are indices into [`Crag::edges`].
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct PathConstraint {
    pub bypassed: usize,
    pub path: Vec<usize>,
}

impl PathConstraint {
    pub fn edges(&self, crag: &Crag) -> (Edge, Vec<Edge>) {
        (
            crag.edge(self.bypassed),
            self.path.iter().map(|&e| crag.edge(e)).collect(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// Two or more selected members of one conflict clique.
    Overlap { members: Vec<CandidateId> },
    /// A merged edge with an unselected endpoint.
    Incidence {
        edge: Edge,
        unselected: Vec<CandidateId>,
    },
    /// An unmerged edge whose endpoints are joined by merged edges.
    Path { edge: Edge, path: Vec<Edge> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyMismatch {
    pub expected: (usize, usize),
    pub got: (usize, usize),
}

impl fmt::Display for KeyMismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "solution has {} candidate / {} edge entries, CRAG has {} / {}",
            self.got.0, self.got.1, self.expected.0, self.expected.1
        )
    }
}

impl core::error::Error for KeyMismatch {}

pub fn check_keys(crag: &Crag, y: &[bool], m: &[bool]) -> Result<(), KeyMismatch> {
    let expected = (crag.num_candidates(), crag.num_edges());
    let got = (y.len(), m.len());
    if expected != got {
        return Err(KeyMismatch { expected, got });
    }
    Ok(())
}

/// Checks overlap, incidence and path constraints; returns every violation.
pub fn validate_solution(crag: &Crag, solution: &Solution) -> Result<Vec<Violation>, KeyMismatch> {
    validate_assignment(crag, &solution.y, &solution.m)
}

pub fn validate_assignment(
    crag: &Crag,
    y: &[bool],
    m: &[bool],
) -> Result<Vec<Violation>, KeyMismatch> {
    check_keys(crag, y, m)?;
    let mut out = Vec::new();

    let mut seen: BTreeSet<Vec<CandidateId>> = BTreeSet::new();
    for &l in crag.leaves() {
        let mut members: Vec<CandidateId> = core::iter::once(l)
            .chain(crag.ancestors(l))
            .filter(|&i| y[i])
            .map(|i| crag.id(i))
            .collect();
        if members.len() > 1 {
            members.sort();
            if seen.insert(members.clone()) {
                out.push(Violation::Overlap { members });
            }
        }
    }

    for (e, &merged) in m.iter().enumerate() {
        let (u, v) = crag.endpoints(e);
        if merged && !(y[u] && y[v]) {
            let unselected = [u, v]
                .into_iter()
                .filter(|&i| !y[i])
                .map(|i| crag.id(i))
                .collect();
            out.push(Violation::Incidence {
                edge: crag.edge(e),
                unselected,
            });
        }
    }

    let mut uf = UnionFind::new(crag.num_candidates());
    for e in (0..m.len()).filter(|&e| m[e]) {
        let (u, v) = crag.endpoints(e);
        uf.union(u, v);
    }
    for e in (0..m.len()).filter(|&e| !m[e]) {
        let (u, v) = crag.endpoints(e);
        if uf.find(u) == uf.find(v) {
            let path = shortest_merged_path(crag, m, u, v)
                .expect("endpoints share a component")
                .into_iter()
                .map(|p| crag.edge(p))
                .collect();
            out.push(Violation::Path {
                edge: crag.edge(e),
                path,
            });
        }
    }
    Ok(out)
}

/// Shortest path (edge count) from `from` to `to` over merged edges, as edge
/// indices in walking order. Neighbors are expanded in edge-index order.
pub fn shortest_merged_path(crag: &Crag, m: &[bool], from: usize, to: usize) -> Option<Vec<usize>> {
    let n = crag.num_candidates();
    let mut via: Vec<Option<usize>> = vec![None; n];
    let mut seen = vec![false; n];
    let mut queue = VecDeque::new();
    seen[from] = true;
    queue.push_back(from);
    while let Some(u) = queue.pop_front() {
        if u == to {
            break;
        }
        for &e in crag.incident_edges(u) {
            if !m[e] {
                continue;
            }
            let (a, b) = crag.endpoints(e);
            let w = if a == u { b } else { a };
            if !seen[w] {
                seen[w] = true;
                via[w] = Some(e);
                queue.push_back(w);
            }
        }
    }
    if !seen[to] || from == to {
        return None;
    }
    let mut path = Vec::new();
    let mut cur = to;
    while cur != from {
        let e = via[cur]?;
        path.push(e);
        let (a, b) = crag.endpoints(e);
        cur = if a == cur { b } else { a };
    }
    path.reverse();
    Some(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::quad;

    fn ids(v: &[u32]) -> Vec<CandidateId> {
        v.iter().map(|&i| CandidateId(i)).collect()
    }

    #[test]
    fn quad_crag_is_valid() {
        let crag = quad::crag();
        assert_eq!(crag.num_candidates(), 7);
        assert_eq!(crag.num_edges(), 10);
        let g = crag.index_of(CandidateId(quad::G)).unwrap();
        assert_eq!(crag.size(g), 8);
        let e = crag.index_of(CandidateId(quad::E)).unwrap();
        let a = crag.index_of(CandidateId(quad::A)).unwrap();
        assert!(crag.contains(e, a) && crag.contains(g, a) && !crag.contains(a, e));
    }

    #[test]
    fn single_leaf_whole_image() {
        let px: Vec<Pixel> = (0..2).flat_map(|r| (0..3).map(move |c| (r, c))).collect();
        let crag = build_crag(vec![CandidateSpec::leaf(7, px)], &[], &[], 3, 2).unwrap();
        assert_eq!(crag.num_candidates(), 1);
        assert_eq!(
            conflict_cliques(&crag),
            vec![ConflictClique { members: ids(&[7]) }]
        );
    }

    #[test]
    fn overlapping_leaves_rejected() {
        let err = build_crag(
            vec![
                CandidateSpec::leaf(1, vec![(0, 0), (0, 1)]),
                CandidateSpec::leaf(2, vec![(0, 1)]),
            ],
            &[],
            &[],
            2,
            1,
        )
        .unwrap_err();
        assert_eq!(
            err,
            CragError::OverlappingLeaves {
                a: CandidateId(1),
                b: CandidateId(2)
            }
        );
    }

    #[test]
    fn structural_errors_name_ids() {
        let leaf = |id, px| CandidateSpec::leaf(id, vec![px]);
        // two parents
        let err = build_crag(
            vec![
                leaf(1, (0, 0)),
                CandidateSpec::merged(2, 1),
                CandidateSpec::merged(3, 1),
            ],
            &[],
            &[
                (CandidateId(1), CandidateId(2)),
                (CandidateId(1), CandidateId(3)),
            ],
            1,
            1,
        )
        .unwrap_err();
        assert!(
            matches!(err, CragError::SubsetNotForest { ref ids } if ids.contains(&CandidateId(1)))
        );
        // cycle between two merged nodes above a leaf
        let err = build_crag(
            vec![
                leaf(1, (0, 0)),
                CandidateSpec::merged(2, 1),
                CandidateSpec::merged(3, 1),
            ],
            &[],
            &[
                (CandidateId(2), CandidateId(3)),
                (CandidateId(3), CandidateId(2)),
            ],
            1,
            1,
        )
        .unwrap_err();
        assert_eq!(err, CragError::SubsetNotForest { ids: ids(&[2, 3]) });
        // adjacency to an ancestor
        let err = build_crag(
            vec![
                leaf(1, (0, 0)),
                leaf(2, (0, 1)),
                CandidateSpec::merged(3, 1),
            ],
            &[(CandidateId(1), CandidateId(3))],
            &[
                (CandidateId(1), CandidateId(3)),
                (CandidateId(2), CandidateId(3)),
            ],
            2,
            1,
        )
        .unwrap_err();
        assert_eq!(
            err,
            CragError::AdjacencyBetweenOverlapping {
                a: CandidateId(1),
                b: CandidateId(3)
            }
        );
        // not touching
        let err = build_crag(
            vec![leaf(1, (0, 0)), leaf(2, (0, 2))],
            &[(CandidateId(1), CandidateId(2))],
            &[],
            3,
            1,
        )
        .unwrap_err();
        assert_eq!(
            err,
            CragError::AdjacencyNotTouching {
                a: CandidateId(1),
                b: CandidateId(2)
            }
        );
        let err = build_crag(vec![leaf(1, (0, 5))], &[], &[], 3, 1).unwrap_err();
        assert_eq!(
            err,
            CragError::PixelOutOfBounds {
                id: CandidateId(1),
                pixel: (0, 5)
            }
        );
        let err = build_crag(vec![CandidateSpec::leaf(4, vec![])], &[], &[], 3, 1).unwrap_err();
        assert_eq!(err, CragError::EmptyLeaf(CandidateId(4)));
        let err = build_crag(
            vec![leaf(1, (0, 0))],
            &[],
            &[(CandidateId(1), CandidateId(9))],
            3,
            1,
        )
        .unwrap_err();
        assert_eq!(err, CragError::UnknownId(CandidateId(9)));
    }

    #[test]
    fn foreground_mask_must_be_covered_exactly() {
        let spec = || vec![CandidateSpec::leaf(1, vec![(0, 0)])];
        assert!(build_crag_with_foreground(spec(), &[], &[], 2, 1, &[true, false]).is_ok());
        assert_eq!(
            build_crag_with_foreground(spec(), &[], &[], 2, 1, &[true, true]).unwrap_err(),
            CragError::LeavesDoNotCoverImage {
                id: None,
                pixel: (0, 1)
            }
        );
        assert_eq!(
            build_crag_with_foreground(spec(), &[], &[], 2, 1, &[false, true]).unwrap_err(),
            CragError::LeavesDoNotCoverImage {
                id: Some(CandidateId(1)),
                pixel: (0, 0)
            }
        );
    }

    #[test]
    fn merged_pixels_must_match_children() {
        let mut parent = CandidateSpec::merged(3, 1);
        parent.pixels = vec![(0, 0)];
        let err = build_crag(
            vec![
                CandidateSpec::leaf(1, vec![(0, 0)]),
                CandidateSpec::leaf(2, vec![(0, 1)]),
                parent,
            ],
            &[],
            &[
                (CandidateId(1), CandidateId(3)),
                (CandidateId(2), CandidateId(3)),
            ],
            2,
            1,
        )
        .unwrap_err();
        assert_eq!(err, CragError::PixelsDisagreeWithChildren(CandidateId(3)));
    }

    #[test]
    fn quad_conflict_cliques() {
        use quad::*;
        let crag = quad::crag();
        let mut got: Vec<Vec<CandidateId>> = conflict_cliques(&crag)
            .into_iter()
            .map(|c| {
                let mut m = c.members;
                m.sort();
                m
            })
            .collect();
        got.sort();
        let mut want = vec![
            ids(&[A, E, G]),
            ids(&[B, E, G]),
            ids(&[C, F, G]),
            ids(&[D, F, G]),
        ];
        for w in &mut want {
            w.sort();
        }
        want.sort();
        assert_eq!(got, want);
    }

    #[test]
    fn chain_with_lone_leaf_cliques() {
        // a -> e -> g, lone leaf b
        let crag = build_crag(
            vec![
                CandidateSpec::leaf(1, vec![(0, 0)]),
                CandidateSpec::leaf(2, vec![(0, 1)]),
                CandidateSpec::merged(5, 1),
                CandidateSpec::merged(7, 2),
            ],
            &[(CandidateId(2), CandidateId(7))],
            &[
                (CandidateId(1), CandidateId(5)),
                (CandidateId(5), CandidateId(7)),
            ],
            2,
            1,
        )
        .unwrap();
        let cliques = conflict_cliques(&crag);
        assert_eq!(
            cliques,
            vec![
                ConflictClique {
                    members: ids(&[1, 5, 7])
                },
                ConflictClique { members: ids(&[2]) }
            ]
        );
    }

    #[test]
    fn cross_merge_is_valid_and_mixed_selection_is_not() {
        use quad::*;
        let crag = quad::crag();
        let valid = quad::assignment(&crag, &[E, C, D], &[(E, C)]);
        assert_eq!(validate_solution(&crag, &valid).unwrap(), vec![]);

        let invalid = quad::assignment(&crag, &[A, B, C, E], &[(A, B), (A, C)]);
        let v = validate_solution(&crag, &invalid).unwrap();
        assert!(
            v.contains(&Violation::Overlap {
                members: ids(&[A, E])
            }),
            "{v:?}"
        );
        assert!(
            v.contains(&Violation::Overlap {
                members: ids(&[B, E])
            }),
            "{v:?}"
        );
        let bc = Edge::new(CandidateId(B), CandidateId(C));
        let path = vec![
            Edge::new(CandidateId(A), CandidateId(B)),
            Edge::new(CandidateId(A), CandidateId(C)),
        ];
        assert!(v.contains(&Violation::Path { edge: bc, path }), "{v:?}");
        assert_eq!(v.len(), 3);
    }

    #[test]
    fn incidence_and_key_mismatch() {
        use quad::*;
        let crag = quad::crag();
        let s = quad::assignment(&crag, &[E], &[(E, C)]);
        let v = validate_solution(&crag, &s).unwrap();
        assert_eq!(
            v,
            vec![Violation::Incidence {
                edge: Edge::new(CandidateId(E), CandidateId(C)),
                unselected: ids(&[C])
            }]
        );
        let bad = Solution {
            y: vec![false; 3],
            m: vec![],
            objective: 0.0,
        };
        assert!(validate_solution(&crag, &bad).is_err());
        assert_eq!(
            validate_solution(&crag, &Solution::empty(&crag)).unwrap(),
            vec![]
        );
    }

    #[test]
    fn edge_keys() {
        let e = Edge::new(CandidateId(9), CandidateId(3));
        assert_eq!(e.key(), "3-9");
        assert_eq!(Edge::parse_key("3-9"), Some(e));
        assert_eq!(Edge::parse_key("x"), None);
    }
}
