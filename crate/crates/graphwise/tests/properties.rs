use graphwise::estimation::{clime, constraint_residual, empirical_covariance, symmetrize, ClimeConfig, Symmetrization};
use graphwise::graphs::{edge, greedy_structure_search, max_spanning_tree, Edge, EdgeSet, EdgeWeights, Graph, Structure};
use graphwise::harness::Counts;
use graphwise::inference::{bootstrap_quantile, step_down_frozen, BootstrapMatrix};
use graphwise::lowerbound::{single_edge_chi2_bound, Divider, DividerMode};
use graphwise::model::{Dataset, ModelClassParams};
use graphwise::seeds;
use graphwise::witness::{find_witness, WitnessProperty};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn all_pairs(d: usize) -> Vec<Edge> {
    (1..=d).flat_map(|a| (a + 1..=d).map(move |b| edge(a, b))).collect()
}

fn graph_from_bits(d: usize, bits: &[bool]) -> Graph {
    Graph::from_edges(d, all_pairs(d).into_iter().zip(bits).filter(|(_, &b)| b).map(|(e, _)| e)).unwrap()
}

fn graph_strategy(max_d: usize) -> impl Strategy<Value = Graph> {
    (2..=max_d).prop_flat_map(|d| {
        proptest::collection::vec(any::<bool>(), d * (d - 1) / 2).prop_map(move |bits| graph_from_bits(d, &bits))
    })
}

fn weights_strategy(min_d: usize, max_d: usize) -> impl Strategy<Value = EdgeWeights> {
    (min_d..=max_d).prop_flat_map(|d| {
        proptest::collection::vec(0.0..1.0f64, d * (d - 1) / 2).prop_map(move |ws| {
            let pairs = all_pairs(d);
            EdgeWeights::from_fn(d, |e| ws[pairs.iter().position(|&p| p == e).unwrap()]).unwrap()
        })
    })
}

fn is_forest(d: usize, edges: &EdgeSet) -> bool {
    Graph::from_edges(d, edges.iter()).map(|g| !g.has_cycle()).unwrap_or(false)
}

fn brute_max_tree_weight(w: &EdgeWeights) -> f64 {
    let d = w.d();
    let pairs = all_pairs(d);
    let mut best = f64::NEG_INFINITY;
    let mut pick = Vec::with_capacity(d - 1);
    fn rec(w: &EdgeWeights, pairs: &[Edge], start: usize, pick: &mut Vec<Edge>, need: usize, best: &mut f64) {
        if pick.len() == need {
            let g = Graph::from_edges(w.d(), pick.iter().copied()).unwrap();
            if g.is_connected() {
                *best = best.max(pick.iter().map(|&e| w.get(e)).sum());
            }
            return;
        }
        for i in start..pairs.len() {
            pick.push(pairs[i]);
            rec(w, pairs, i + 1, pick, need, best);
            pick.pop();
        }
    }
    rec(w, &pairs, 0, &mut pick, d - 1, &mut best);
    best
}

fn random_sigma(d: usize, n: usize, seed: u64) -> DMatrix<f64> {
    use rand::Rng;
    let mut rng = seeds::rng(seed);
    let x = DMatrix::from_fn(n, d, |_, _| rng.random_range(-1.0..1.0));
    empirical_covariance(&Dataset::new(x).unwrap())
}

fn boot_strategy() -> impl Strategy<Value = BootstrapMatrix> {
    (100usize..300, 1usize..6).prop_flat_map(|(b, m)| {
        proptest::collection::vec(-3.0..3.0f64, b * m)
            .prop_map(move |v| BootstrapMatrix { values: DMatrix::from_vec(b, m, v) })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn predistance_symmetric_and_membership_free(g in graph_strategy(7), i in 0usize..21, j in 0usize..21) {
        let pairs = all_pairs(g.d());
        let (e, f) = (pairs[i % pairs.len()], pairs[j % pairs.len()]);
        let dist = g.edge_predistance(e, f).unwrap();
        prop_assert_eq!(dist, g.edge_predistance(f, e).unwrap());
        let mut toggled = g.clone();
        for x in [e, f] {
            if !toggled.remove_edge(x) {
                toggled.add_edge(x).unwrap();
            }
        }
        prop_assert_eq!(dist, toggled.edge_predistance(e, f).unwrap());
    }

    #[test]
    fn spanning_tree_is_maximal(w in weights_strategy(2, 6)) {
        let tree = max_spanning_tree(&w).unwrap();
        let d = w.d();
        prop_assert_eq!(tree.len(), d - 1);
        let g = Graph::from_edges(d, tree.iter()).unwrap();
        prop_assert!(g.is_connected() && !g.has_cycle());
        let weight: f64 = tree.iter().map(|e| w.get(e)).sum();
        prop_assert!((weight - brute_max_tree_weight(&w)).abs() < 1e-9);
    }

    #[test]
    fn search_returns_the_target_shape(w in weights_strategy(5, 9), s0 in 1usize..3) {
        let cycle = greedy_structure_search(&w, Structure::Cycle).unwrap();
        let g = Graph::from_edges(w.d(), cycle.iter()).unwrap();
        let verts = cycle.vertices();
        prop_assert!(verts.iter().all(|&v| g.degree(v) == 2));
        prop_assert_eq!(cycle.len(), verts.len());
        prop_assert!(g.has_cycle_of_length(cycle.len()));
        let star = greedy_structure_search(&w, Structure::DegreeAbove(s0)).unwrap();
        prop_assert_eq!(star.len(), s0 + 1);
        let sg = Graph::from_edges(w.d(), star.iter()).unwrap();
        prop_assert_eq!(sg.max_degree(), s0 + 1);
        prop_assert!(is_forest(w.d(), &star));
    }

    #[test]
    fn adding_an_edge_merges_at_most_two_components(g in graph_strategy(8), i in 0usize..28) {
        let pairs = all_pairs(g.d());
        let e = pairs[i % pairs.len()];
        let before = g.component_count();
        let mut h = g.clone();
        h.add_edge(e).unwrap();
        let after = h.component_count();
        prop_assert!(after == before || after + 1 == before);
    }

    #[test]
    fn witnesses_satisfy_their_property(w in weights_strategy(6, 9)) {
        let d = w.d();
        let m = DMatrix::from_fn(d, d, |i, j| if i == j { 1.0 } else { w.get(edge(i.min(j) + 1, i.max(j) + 1)) });
        let est = clime(&(DMatrix::identity(d, d) * 2.0), &ClimeConfig::new(0.1).unwrap()).unwrap();
        let est = graphwise::estimation::PrecisionEstimate { matrix: m, ..est };
        for property in [
            WitnessProperty::Connectivity,
            WitnessProperty::Components { m: 2 },
            WitnessProperty::Cycle,
            WitnessProperty::Triangle,
            WitnessProperty::PathLength { m: 2 },
            WitnessProperty::MaxDegree { s0: 2 },
            WitnessProperty::Clique { s: 3 },
        ] {
            let witness = find_witness(&est, property).unwrap();
            let g = Graph::from_edges(d, witness.iter()).unwrap();
            prop_assert!(property.holds(&g), "{} witness {:?}", property.name(), witness);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn clime_certificate_and_monotone_norm(d in 3usize..7, seed in any::<u64>(), l1 in 0.05..0.3f64, gap in 0.01..0.3f64) {
        let sigma = random_sigma(d, 3 * d, seed);
        let small = clime(&sigma, &ClimeConfig::new(l1).unwrap()).unwrap();
        let large = clime(&sigma, &ClimeConfig::new(l1 + gap).unwrap()).unwrap();
        for est in [&small, &large] {
            prop_assert!(constraint_residual(&sigma, &est.columns) <= est.lambda + 1e-7);
        }
        let norm = |m: &DMatrix<f64>| m.iter().map(|v| v.abs()).sum::<f64>();
        prop_assert!(norm(&small.columns) >= norm(&large.columns) - 1e-9);
    }

    #[test]
    fn symmetrization_is_idempotent(d in 2usize..7, seed in any::<u64>()) {
        let m = random_sigma(d, d + 1, seed) - DMatrix::from_fn(d, d, |i, j| (i * d + j) as f64 * 0.01);
        for rule in [Symmetrization::SmallerMagnitude, Symmetrization::Average] {
            let once = symmetrize(&m, rule);
            prop_assert_eq!(symmetrize(&once, rule), once);
        }
    }

    #[test]
    fn quantile_monotone(boot in boot_strategy(), a1 in 0.01..0.5f64, a2 in 0.01..0.5f64) {
        let m = boot.values.ncols();
        let all: Vec<usize> = (0..m).collect();
        let (lo, hi) = if a1 <= a2 { (a1, a2) } else { (a2, a1) };
        prop_assert!(bootstrap_quantile(&boot, &all, lo).unwrap() >= bootstrap_quantile(&boot, &all, hi).unwrap());
        for k in 1..m {
            prop_assert!(bootstrap_quantile(&boot, &all[..k], lo).unwrap() <= bootstrap_quantile(&boot, &all[..k + 1], lo).unwrap());
        }
    }

    #[test]
    fn step_down_monotone_in_alpha(boot in boot_strategy(), raw in proptest::collection::vec(0.0..5.0f64, 6), a1 in 0.01..0.5f64, a2 in 0.01..0.5f64) {
        let stats = &raw[..boot.values.ncols()];
        let (lo, hi) = if a1 <= a2 { (a1, a2) } else { (a2, a1) };
        let strict = step_down_frozen(stats, &boot, lo, 0.0).unwrap();
        let loose = step_down_frozen(stats, &boot, hi, 0.0).unwrap();
        prop_assert!(strict.rejected.iter().all(|e| loose.rejected.contains(e)));
    }

    #[test]
    fn chi2_bound_is_at_most_one(d in 6usize..12, theta in 0.0..0.05f64, n in 10usize..2000) {
        let c = Divider::single_edge(Graph::chain(d), [edge(1, d)], DividerMode::Add).unwrap();
        let params = ModelClassParams::new(4, 2.0, 3.0).unwrap();
        let b = single_edge_chi2_bound(&c, theta, n, &params).unwrap();
        prop_assert!(b <= 1.0);
    }

    #[test]
    fn rate_standard_error(rejected in 0usize..200, accepted in 0usize..200, failed in 0usize..5) {
        let c = Counts { rejected, accepted, failed };
        match c.rate() {
            None => prop_assert_eq!(rejected + accepted, 0),
            Some((p, se)) => {
                let m = (rejected + accepted) as f64;
                prop_assert_eq!(p, rejected as f64 / m);
                prop_assert_eq!(se, (p * (1.0 - p) / m).sqrt());
            }
        }
    }

    #[test]
    fn seeds_are_deterministic_and_path_sensitive(parent in any::<u64>(), a in any::<u64>(), b in any::<u64>()) {
        prop_assert_eq!(seeds::derive(parent, &[a, b]), seeds::derive(parent, &[a, b]));
        if a != b {
            prop_assert_ne!(seeds::derive(parent, &[a]), seeds::derive(parent, &[b]));
        }
    }
}
