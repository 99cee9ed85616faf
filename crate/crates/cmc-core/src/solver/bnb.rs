//! Depth-first branch-and-bound over one independent block of variables.
//!
//! Variables `0..nodes` are candidate selections and `nodes..nodes+edges` are
//! merge indicators. Constraints are enforced by propagation whenever a
//! variable is fixed:
//!
//! * selecting a candidate deselects every free ancestor and descendant,
//! * deselecting a candidate unmerges its edges,
//! * merging an edge selects both endpoints,
//! * path constraints fix the bypassed edge or the last free path edge.
//!
//! The bound relaxes every attractive free edge onto its endpoints
//! (`m_e <= (y_u + y_v) / 2`) and then picks the cheapest antichain of the
//! subset forest by a bottom-up pass, which respects all conflict cliques.

use alloc::vec;
use alloc::vec::Vec;

pub(crate) const FREE: i8 = -1;

/// A path constraint in block-local edge numbering.
#[derive(Debug, Clone)]
pub(crate) struct LocalPath {
    pub bypass: usize,
    pub path: Vec<usize>,
}

#[derive(Debug, Clone)]
pub(crate) struct Block {
    pub n_nodes: usize,
    /// Endpoints of each local edge, as local node indices.
    pub ends: Vec<(usize, usize)>,
    /// Nearest ancestor inside the block.
    pub parent: Vec<Option<usize>>,
    pub children: Vec<Vec<usize>>,
    /// Local nodes with children listed before parents.
    pub postorder: Vec<usize>,
    pub roots: Vec<usize>,
    pub incident: Vec<Vec<usize>>,
    /// Cost per local variable.
    pub cost: Vec<f64>,
    pub paths: Vec<LocalPath>,
    /// Path constraints mentioning each local edge.
    pub watch: Vec<Vec<usize>>,
}

impl Block {
    pub fn n_vars(&self) -> usize {
        self.n_nodes + self.ends.len()
    }

    pub fn add_path(&mut self, c: LocalPath) {
        let id = self.paths.len();
        self.watch[c.bypass].push(id);
        for &e in &c.path {
            self.watch[e].push(id);
        }
        self.paths.push(c);
    }
}

pub(crate) struct Search<'a, S: FnMut() -> bool> {
    block: &'a Block,
    order: Vec<usize>,
    val: Vec<i8>,
    trail: Vec<usize>,
    queue: Vec<usize>,
    best: Vec<i8>,
    best_obj: f64,
    pub explored: u64,
    pub interrupted: bool,
    stop: &'a mut S,
    // scratch for the bound
    weight: Vec<f64>,
    value: Vec<f64>,
}

impl<'a, S: FnMut() -> bool> Search<'a, S> {
    pub fn new(block: &'a Block, stop: &'a mut S) -> Self {
        let nv = block.n_vars();
        let mut order: Vec<usize> = (0..nv).collect();
        order.sort_by(|&a, &b| {
            block.cost[b]
                .abs()
                .total_cmp(&block.cost[a].abs())
                .then(a.cmp(&b))
        });
        Search {
            block,
            order,
            val: vec![FREE; nv],
            trail: Vec::new(),
            queue: Vec::new(),
            best: vec![0; nv],
            best_obj: 0.0,
            explored: 0,
            interrupted: false,
            stop,
            weight: vec![0.0; block.n_nodes],
            value: vec![0.0; block.n_nodes],
        }
    }

    /// Runs the search; returns the best assignment found (all zeros is the
    /// starting incumbent) and its objective.
    pub fn run(mut self) -> (Vec<bool>, f64, u64, bool) {
        self.branch(0);
        let assignment = self.best.iter().map(|&v| v == 1).collect();
        (assignment, self.best_obj, self.explored, self.interrupted)
    }

    fn branch(&mut self, from: usize) {
        if self.interrupted {
            return;
        }
        self.explored += 1;
        if self.explored.is_multiple_of(4096) && (self.stop)() {
            self.interrupted = true;
            return;
        }
        let bound = self.bound();
        if bound >= self.best_obj {
            return;
        }
        let Some(k) = (from..self.order.len()).find(|&k| self.val[self.order[k]] == FREE) else {
            // every variable fixed: the bound is the exact objective
            self.best_obj = bound;
            self.best.copy_from_slice(&self.val);
            return;
        };
        let var = self.order[k];
        let first = if self.block.cost[var] < 0.0 { 1 } else { 0 };
        for value in [first, 1 - first] {
            let mark = self.trail.len();
            if self.assign(var, value) && self.propagate() {
                self.branch(k + 1);
            }
            self.undo(mark);
            if self.interrupted {
                return;
            }
        }
    }

    fn undo(&mut self, mark: usize) {
        while self.trail.len() > mark {
            let v = self.trail.pop().unwrap();
            self.val[v] = FREE;
        }
        self.queue.clear();
    }

    fn assign(&mut self, var: usize, value: i8) -> bool {
        match self.val[var] {
            FREE => {
                self.val[var] = value;
                self.trail.push(var);
                self.queue.push(var);
                true
            }
            v => v == value,
        }
    }

    fn propagate(&mut self) -> bool {
        let b = self.block;
        let n = b.n_nodes;
        while let Some(var) = self.queue.pop() {
            let value = self.val[var];
            if var < n {
                let i = var;
                if value == 1 {
                    let mut up = b.parent[i];
                    while let Some(a) = up {
                        if !self.assign(a, 0) {
                            return false;
                        }
                        up = b.parent[a];
                    }
                    let mut stack: Vec<usize> = b.children[i].clone();
                    while let Some(d) = stack.pop() {
                        if !self.assign(d, 0) {
                            return false;
                        }
                        stack.extend_from_slice(&b.children[d]);
                    }
                } else {
                    for &e in &b.incident[i] {
                        if !self.assign(n + e, 0) {
                            return false;
                        }
                    }
                }
            } else {
                let e = var - n;
                if value == 1 {
                    let (u, v) = b.ends[e];
                    if !self.assign(u, 1) || !self.assign(v, 1) {
                        return false;
                    }
                }
                for &c in &b.watch[e] {
                    if !self.check_path(c) {
                        return false;
                    }
                }
            }
        }
        true
    }

    fn check_path(&mut self, c: usize) -> bool {
        let n = self.block.n_nodes;
        let con = &self.block.paths[c];
        let (mut ones, mut free, mut last_free) = (0, 0, 0);
        for &e in &con.path {
            match self.val[n + e] {
                1 => ones += 1,
                FREE => {
                    free += 1;
                    last_free = e;
                }
                _ => {}
            }
        }
        let len = con.path.len();
        match self.val[n + con.bypass] {
            0 if ones == len => false,
            0 if ones + 1 == len && free == 1 => self.assign(n + last_free, 0),
            FREE if ones == len => self.assign(n + con.bypass, 1),
            _ => true,
        }
    }

    fn bound(&mut self) -> f64 {
        let b = self.block;
        let n = b.n_nodes;
        let mut constant = 0.0;
        self.weight.copy_from_slice(&b.cost[..n]);
        for (e, &(u, v)) in b.ends.iter().enumerate() {
            let g = b.cost[n + e];
            match self.val[n + e] {
                1 => constant += g,
                FREE if g < 0.0 => match (self.val[u], self.val[v]) {
                    (1, 1) => constant += g,
                    (1, _) => self.weight[v] += g,
                    (_, 1) => self.weight[u] += g,
                    _ => {
                        self.weight[u] += g / 2.0;
                        self.weight[v] += g / 2.0;
                    }
                },
                _ => {}
            }
        }
        for &i in &b.postorder {
            let below: f64 = b.children[i].iter().map(|&c| self.value[c]).sum();
            self.value[i] = match self.val[i] {
                1 => self.weight[i],
                0 => below,
                _ => self.weight[i].min(below),
            };
        }
        constant + b.roots.iter().map(|&r| self.value[r]).sum::<f64>()
    }
}
