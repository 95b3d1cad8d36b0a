use std::path::Path;

use proptest::prelude::*;

use stylerank::alpharank::{
    self, fixation_probability, rank_profiles, response_graph, sink_components, stationary_distribution,
    transition_matrix, RankConfig,
};
use stylerank::egta::PayoffTensor;
use stylerank::pipeline;

fn tensor_strategy(max: usize) -> impl Strategy<Value = PayoffTensor> {
    (1..=max, 1..=max).prop_flat_map(|(n1, n2)| {
        prop::collection::vec(prop::collection::vec(-8i32..8, 2), n1 * n2).prop_map(move |cells| {
            let names = |p: &str, n: usize| (0..n).map(|i| format!("{p}{i}")).collect::<Vec<_>>();
            let payoffs = cells.iter().map(|c| c.iter().map(|&v| v as f64 / 4.0).collect()).collect();
            PayoffTensor::new(vec![names("r", n1), names("c", n2)], payoffs, vec![1; n1 * n2]).unwrap()
        })
    })
}

fn unilateral(t: &PayoffTensor, a: usize, b: usize) -> bool {
    let (pa, pb) = (t.profile(a), t.profile(b));
    pa.iter().zip(&pb).filter(|(x, y)| x != y).count() == 1
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn transition_matrix_is_row_stochastic(t in tensor_strategy(6), alpha in 0.1f64..10.0) {
        let rc = RankConfig { alpha, ..RankConfig::default() };
        let c = transition_matrix(&t, &rc).unwrap();
        let deviations: usize = t.all_strategies().iter().map(|s| s.len() - 1).sum();
        if deviations > 0 {
            prop_assert_eq!(c.eta, 1.0 / deviations as f64);
        }
        let n = t.num_profiles();
        for i in 0..n {
            prop_assert!((c.matrix.row(i).sum() - 1.0).abs() <= 1e-12);
            for j in 0..n {
                prop_assert!(c.matrix[(i, j)] >= 0.0);
                if i != j && c.matrix[(i, j)] != 0.0 {
                    prop_assert!(unilateral(&t, i, j));
                }
            }
        }
    }

    #[test]
    fn stationary_solutions_are_accurate(t in tensor_strategy(6), alpha in 0.1f64..10.0) {
        let r = rank_profiles(&t, &RankConfig { alpha, ..RankConfig::default() }).unwrap();
        prop_assert!(r.residual < 1e-10);
        prop_assert!((r.pi.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!(r.pi.iter().all(|&p| p >= 0.0));
        let c = transition_matrix(&t, &r.config).unwrap();
        prop_assert!(c.residual(&r.pi) < 1e-10);
    }

    #[test]
    fn constant_shift_leaves_chain_unchanged(t in tensor_strategy(5), shift in -20i32..20, alpha in 0.1f64..10.0) {
        let rc = RankConfig { alpha, ..RankConfig::default() };
        let a = transition_matrix(&t, &rc).unwrap();
        let b = transition_matrix(&t.shifted(shift as f64), &rc).unwrap();
        prop_assert_eq!(&a.matrix, &b.matrix);
        prop_assert_eq!(rank_profiles(&t, &rc).unwrap().ranking, rank_profiles(&t.shifted(shift as f64), &rc).unwrap().ranking);
    }

    #[test]
    fn relabeling_permutes_masses(t in tensor_strategy(4).prop_filter("square", |t| t.strategies(0).len() == t.strategies(1).len()), seed in any::<u64>()) {
        let n = t.strategies(0).len();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut s = seed;
        for i in (1..n).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            perm.swap(i, (s >> 33) as usize % (i + 1));
        }
        let rc = RankConfig::default();
        let a = rank_profiles(&t, &rc).unwrap();
        let b = rank_profiles(&t.permuted(&perm), &rc).unwrap();
        for (idx, label) in a.labels.iter().enumerate() {
            let other = b.mass_of(label).unwrap();
            prop_assert!((a.pi[idx] - other).abs() < 1e-9);
        }
    }

    #[test]
    fn fixation_brackets_neutral(d in 1e-6f64..5.0, alpha in 0.1f64..10.0, m in 2usize..200) {
        let neutral = 1.0 / m as f64;
        prop_assert!(fixation_probability(d, 0.0, alpha, m).unwrap() > neutral);
        prop_assert!(fixation_probability(-d, 0.0, alpha, m).unwrap() < neutral);
    }

    #[test]
    fn sink_components_match_reachability(n in 1usize..=12, edges in prop::collection::vec((0usize..12, 0usize..12), 0..40)) {
        let mut adj = vec![Vec::new(); n];
        for (a, b) in edges {
            if a < n && b < n && !adj[a].contains(&b) {
                adj[a].push(b);
            }
        }
        let mut reach = vec![vec![false; n]; n];
        for (s, row) in reach.iter_mut().enumerate() {
            let mut stack = vec![s];
            row[s] = true;
            while let Some(v) = stack.pop() {
                for &w in &adj[v] {
                    if !row[w] {
                        row[w] = true;
                        stack.push(w);
                    }
                }
            }
        }
        let in_sink = |v: usize| (0..n).all(|u| !reach[v][u] || reach[u][v]);
        let mut brute: Vec<usize> = (0..n).filter(|&v| in_sink(v)).collect();
        brute.sort_unstable();
        let mut got: Vec<usize> = sink_components(&adj).into_iter().flatten().collect();
        got.sort_unstable();
        prop_assert_eq!(got, brute);
    }
}

#[test]
fn fixation_closed_form_values() {
    let direct = (1.0 - (-0.1f64).exp()) / (1.0 - (-10.0f64).exp());
    let rho = fixation_probability(0.05, 0.0, 2.0, 100).unwrap();
    assert!((rho - direct).abs() < 1e-15);
    assert!((rho - 0.095167).abs() < 1e-6);
    assert_eq!(fixation_probability(0.0, 0.0, 2.0, 100).unwrap(), 0.01);
    assert!((fixation_probability(1e-13, 0.0, 2.0, 100).unwrap() - 0.01).abs() < 1e-9);
}

fn gcg() -> PayoffTensor {
    pipeline::load_payoffs(&Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/gcg_payoff_matrix.csv")).unwrap()
}

#[test]
fn fixture_has_121_profiles_and_eta_one_twentieth() {
    let t = gcg();
    assert_eq!(t.num_profiles(), 121);
    let c = transition_matrix(&t, &RankConfig::default()).unwrap();
    assert_eq!(c.eta, 0.05);
    for i in 0..121 {
        assert!((0..121).filter(|&j| j != i && c.matrix[(i, j)] != 0.0).count() <= 20);
    }
}

#[test]
fn fixture_mass_plateaus_beyond_alpha_six() {
    let t = gcg();
    let rc = RankConfig { alpha_grid: alpharank::alpha_grid(6.0, 10.0, 0.01).unwrap(), ..RankConfig::default() };
    let sweep = alpharank::alpha_sweep(&t, &rc).unwrap();
    let at_ten = sweep.last().unwrap().outcome.as_ref().unwrap().mass_of("(WL,CA)").unwrap();
    for p in &sweep {
        let m = p.outcome.as_ref().unwrap().mass_of("(WL,CA)").unwrap();
        assert!((m - at_ten).abs() <= 0.02, "alpha {}: {m} vs {at_ten}", p.alpha);
    }
}

#[test]
fn fixture_top_profile_is_a_sink_at_alpha_6_4() {
    let t = gcg();
    let rc = RankConfig { alpha: 6.4, ..RankConfig::default() };
    let r = rank_profiles(&t, &rc).unwrap();
    let g = response_graph(&r, rc.m, 1.0);
    let top = t.find_profile(&["WL", "CA"]).unwrap();
    assert!(g.edges.iter().all(|e| e.from != top));
    assert!(g.edges.iter().any(|e| e.to == top));
    assert!(g.mcc_members.contains(&top));
    for e in &g.edges {
        assert!(unilateral(&t, e.from, e.to));
        assert!(e.weight > 1.0);
    }
}

#[test]
fn three_cycle_forms_one_sink() {
    // Each player prefers to move one step along a -> b -> c -> a.
    let p = vec![vec![0.0, -1.0, 1.0], vec![1.0, 0.0, -1.0], vec![-1.0, 1.0, 0.0]];
    let t = PayoffTensor::from_bimatrix(&["a", "b", "c"], &p, &p, 1).unwrap();
    let rc = RankConfig { model: alpharank::PopulationModel::Single, ..RankConfig::default() };
    let r = rank_profiles(&t, &rc).unwrap();
    let g = response_graph(&r, rc.m, 1.0);
    assert_eq!(g.sink_components, vec![vec![0, 1, 2]]);
}

#[test]
fn identity_chain_is_uniform_after_damping() {
    let c = alpharank::TransitionMatrix {
        matrix: nalgebra::DMatrix::identity(5, 5),
        eta: 0.0,
        labels: (0..5).map(|i| i.to_string()).collect(),
        deviations: Vec::new(),
    };
    let st = stationary_distribution(&c, 1e-8).unwrap();
    assert!(st.pi.iter().all(|p| (p - 0.2).abs() < 1e-12));
}
