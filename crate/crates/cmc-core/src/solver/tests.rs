use super::*;
use crate::crag::{build_crag, validate_solution, CandidateId, CandidateSpec, Edge};
use crate::fixtures::{quad, random};
use alloc::vec;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn quad_costs(crag: &Crag, f: &[(u32, f64)], g: &[((u32, u32), f64)]) -> CostTable {
    let mut costs = CostTable::zeros(crag);
    costs.f.iter_mut().for_each(|c| *c = 1.0);
    costs.g.iter_mut().for_each(|c| *c = 1.0);
    for &(id, c) in f {
        costs.f[crag.index_of(CandidateId(id)).unwrap()] = c;
    }
    for &((a, b), c) in g {
        costs.g[crag
            .edge_index(Edge::new(CandidateId(a), CandidateId(b)))
            .unwrap()] = c;
    }
    costs
}

fn merged_ids(crag: &Crag, s: &Solution) -> Vec<(u32, u32)> {
    s.merged()
        .map(|e| crag.edge(e))
        .map(|e| (e.a.0, e.b.0))
        .collect()
}

fn selected_ids(crag: &Crag, s: &Solution) -> Vec<u32> {
    s.selected().map(|i| crag.id(i).0).collect()
}

#[test]
fn nonnegative_costs_give_empty_solution() {
    let crag = quad::crag();
    let out = solve(&crag, &quad_costs(&crag, &[], &[]), Mode::Full).unwrap();
    assert_eq!(out.solution, Solution::empty(&crag));
    assert_eq!(out.status, Status::Optimal);
    assert_eq!(out.rounds, 1);
    assert_eq!(out.free_variables, 0);
}

#[test]
fn triangle_needs_a_cut() {
    // a, b, c attractive in pairs (a,b) and (a,c), repulsive (b,c): merging
    // all three costs 1 more than the best partial clustering
    let crag = quad::crag();
    let f = [(quad::A, -1.0), (quad::B, -1.0), (quad::C, -1.0)];
    let g = [
        ((quad::A, quad::B), -2.0),
        ((quad::A, quad::C), -2.0),
        ((quad::B, quad::C), 1.0),
    ];
    let costs = quad_costs(&crag, &f, &g);
    let out = solve(&crag, &costs, Mode::Full).unwrap();
    assert!(validate_solution(&crag, &out.solution).unwrap().is_empty());
    // optimum: all three selected, two attractive edges plus the repulsive one
    // that closes the cycle: -3 - 4 + 1 = -6
    assert_eq!(out.solution.objective, -6.0);
    assert_eq!(
        selected_ids(&crag, &out.solution),
        vec![quad::A, quad::B, quad::C]
    );
    assert_eq!(merged_ids(&crag, &out.solution).len(), 3);
    assert!(out.rounds >= 2 && out.constraints_added >= 1);
    assert_eq!(
        brute_force(&crag, &costs, Mode::Full).unwrap().objective,
        -6.0
    );
}

#[test]
fn cheap_cut_prefers_separation() {
    let crag = quad::crag();
    let f = [(quad::A, -1.0), (quad::B, -1.0), (quad::C, -1.0)];
    let g = [
        ((quad::A, quad::B), -0.5),
        ((quad::A, quad::C), -0.5),
        ((quad::B, quad::C), 2.0),
    ];
    let costs = quad_costs(&crag, &f, &g);
    let out = solve(&crag, &costs, Mode::Full).unwrap();
    // merging everything: -3 - 1 + 2 = -2; one attractive edge: -3.5
    assert_eq!(out.solution.objective, -3.5);
    assert_eq!(merged_ids(&crag, &out.solution).len(), 1);
}

#[test]
fn merge_tree_mode_never_merges() {
    let crag = quad::crag();
    let f = [(quad::A, -1.0), (quad::E, -1.5)];
    let g = [((quad::A, quad::B), -5.0)];
    let costs = quad_costs(&crag, &f, &g);
    let out = solve(&crag, &costs, Mode::MergeTreeOnly).unwrap();
    assert!(out.solution.merged().next().is_none());
    assert_eq!(selected_ids(&crag, &out.solution), vec![quad::E]);
    let full = solve(&crag, &costs, Mode::Full).unwrap();
    // a (−1) + b (+1) + edge (−5) beats e alone
    assert_eq!(full.solution.objective, -5.0);
}

#[test]
fn leaf_mode_selects_only_leaves() {
    let crag = quad::crag();
    let f = [(quad::G, -10.0), (quad::D, -0.25)];
    let costs = quad_costs(&crag, &f, &[]);
    let out = solve(&crag, &costs, Mode::LeafMulticutOnly).unwrap();
    assert_eq!(selected_ids(&crag, &out.solution), vec![quad::D]);
    assert_eq!(
        solve(&crag, &costs, Mode::Full).unwrap().solution.objective,
        -10.0
    );
}

#[test]
fn separation_on_a_four_cycle() {
    let mut candidates = Vec::new();
    for (id, px) in [(1, (0, 0)), (2, (0, 1)), (3, (1, 1)), (4, (1, 0))] {
        candidates.push(CandidateSpec::leaf(id, vec![px]));
    }
    let adjacency: Vec<_> = [(1, 2), (2, 3), (3, 4), (1, 4)]
        .map(|(a, b)| (CandidateId(a), CandidateId(b)))
        .to_vec();
    let crag = build_crag(candidates, &adjacency, &[], 2, 2).unwrap();
    let mut m = vec![true; 4];
    let open = crag
        .edge_index(Edge::new(CandidateId(1), CandidateId(4)))
        .unwrap();
    m[open] = false;
    let cuts = separate_path_constraints(&crag, &m);
    assert_eq!(cuts.len(), 1);
    assert_eq!(cuts[0].bypassed, open);
    assert_eq!(cuts[0].path.len(), 3);
    m[open] = true;
    assert!(separate_path_constraints(&crag, &m).is_empty());
}

#[test]
fn brute_force_limit() {
    let mut candidates = Vec::new();
    for c in 0..27 {
        candidates.push(CandidateSpec::leaf(c + 1, vec![(0, c)]));
    }
    let crag = build_crag(candidates, &[], &[], 27, 1).unwrap();
    let costs = CostTable::zeros(&crag);
    assert_eq!(
        brute_force(&crag, &costs, Mode::Full),
        Err(SolverError::TooLarge { variables: 27 })
    );
    // the exact solver has no such limit
    assert!(solve(&crag, &costs, Mode::Full).is_ok());
}

#[test]
fn brute_force_breaks_ties_lexicographically() {
    let crag = quad::crag();
    let costs = CostTable::zeros(&crag);
    assert_eq!(
        brute_force(&crag, &costs, Mode::Full).unwrap(),
        Solution::empty(&crag)
    );
    // {a, b} and {e} tie at -2; y_e comes after y_a, so selecting e alone is smaller
    let f = [(quad::A, -1.0), (quad::B, -1.0)];
    let g = [((quad::A, quad::B), 2.0)];
    let mut costs = quad_costs(&crag, &f, &g);
    costs.f[crag.index_of(CandidateId(quad::E)).unwrap()] = -2.0;
    let s = brute_force(&crag, &costs, Mode::Full).unwrap();
    assert_eq!(s.objective, -2.0);
    assert_eq!(selected_ids(&crag, &s), vec![quad::E]);
}

#[test]
fn cost_mismatch_is_rejected() {
    let crag = quad::crag();
    let costs = CostTable {
        f: vec![0.0; 3],
        g: vec![],
    };
    assert!(matches!(
        solve(&crag, &costs, Mode::Full),
        Err(SolverError::Costs(_))
    ));
}

#[test]
fn interrupted_solve_is_feasible() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..20 {
        let crag = random::crag(&mut rng, 5, 3);
        let costs = random::costs(&mut rng, &crag);
        let out = solve_with(&crag, &costs, Mode::Full, &mut || true).unwrap();
        assert!(validate_solution(&crag, &out.solution).unwrap().is_empty());
        assert_eq!(
            out.solution.objective,
            costs.objective(&out.solution.y, &out.solution.m)
        );
    }
}

#[test]
fn matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..60 {
        let crag = random::crag(&mut rng, 5, 3);
        let costs = random::costs(&mut rng, &crag);
        for mode in [Mode::Full, Mode::MergeTreeOnly, Mode::LeafMulticutOnly] {
            let exact = solve(&crag, &costs, mode).unwrap();
            let oracle = brute_force(&crag, &costs, mode).unwrap();
            assert_eq!(exact.solution.objective, oracle.objective, "{mode}");
            assert!(validate_solution(&crag, &exact.solution)
                .unwrap()
                .is_empty());
            assert!(mode.admits(&crag, &exact.solution.y, &exact.solution.m));
            assert_eq!(exact.status, Status::Optimal);
        }
    }
}

#[test]
fn segmentation_of_cross_merge() {
    let crag = quad::crag();
    let s = quad::assignment(
        &crag,
        &[quad::A, quad::B, quad::C, quad::D],
        &[(quad::A, quad::B), (quad::A, quad::C), (quad::B, quad::C)],
    );
    let img = extract_segmentation(&crag, &s).unwrap();
    assert_eq!(img.as_slice(), &[1, 1, 1, 1, 1, 1, 1, 2]);
    let s = quad::assignment(&crag, &[quad::D, quad::E], &[]);
    let img = extract_segmentation(&crag, &s).unwrap();
    assert_eq!(img.as_slice(), &[1, 1, 1, 1, 0, 0, 0, 2]);
}

#[test]
fn segmentation_rejects_infeasible() {
    let crag = quad::crag();
    let s = quad::assignment(&crag, &[quad::A, quad::E], &[]);
    assert!(
        matches!(extract_segmentation(&crag, &s), Err(SolverError::InfeasibleSolution(v)) if v.len() == 1)
    );
}

#[test]
fn mode_names() {
    for mode in [Mode::Full, Mode::MergeTreeOnly, Mode::LeafMulticutOnly] {
        assert_eq!(mode.as_str().parse::<Mode>().unwrap(), mode);
    }
    assert!("tree".parse::<Mode>().is_err());
}
