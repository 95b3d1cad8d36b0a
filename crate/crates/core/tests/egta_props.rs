use std::path::Path;

use proptest::prelude::*;

use stylerank::egta::{self, read_payoff_csv, write_payoff_csv, PayoffTensor, PolicySet, SimulationConfig};
use stylerank::game::GridConfig;
use stylerank::learner::{Policy, QNetwork};
use stylerank::rng;
use stylerank::styles::StyleSpec;

fn tensor_pair() -> impl Strategy<Value = (PayoffTensor, PayoffTensor, PayoffTensor)> {
    (1usize..5, 1usize..5).prop_flat_map(|(n1, n2)| {
        let cells = prop::collection::vec((-1000i32..1000, -1000i32..1000, 1u64..100), n1 * n2);
        (cells.clone(), cells.clone(), cells).prop_map(move |(a, b, c)| {
            let build = |cells: Vec<(i32, i32, u64)>| {
                let s = vec![(0..n1).map(|i| format!("r{i}")).collect(), (0..n2).map(|i| format!("c{i}")).collect()];
                let payoffs = cells.iter().map(|&(x, y, _)| vec![x as f64 / 8.0, y as f64 / 8.0]).collect();
                PayoffTensor::new(s, payoffs, cells.iter().map(|c| c.2).collect()).unwrap()
            };
            (build(a), build(b), build(c))
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn aggregate_is_order_free((a, b, c) in tensor_pair()) {
        let abc = egta::aggregate(&[a.clone(), b.clone(), c.clone()]).unwrap();
        let cab = egta::aggregate(&[c.clone(), a.clone(), b.clone()]).unwrap();
        for p in 0..abc.num_profiles() {
            for k in 0..2 {
                prop_assert!((abc.payoff(p, k) - cab.payoff(p, k)).abs() < 1e-12);
            }
            prop_assert_eq!(abc.runs(p), a.runs(p) + b.runs(p) + c.runs(p));
        }
    }

    #[test]
    fn aggregate_of_copies_is_the_table((a, _, _) in tensor_pair(), copies in 1usize..5) {
        let many = vec![a.clone(); copies];
        let merged = egta::aggregate(&many).unwrap();
        for p in 0..a.num_profiles() {
            prop_assert_eq!(merged.payoffs(p), a.payoffs(p));
            prop_assert_eq!(merged.runs(p), a.runs(p) * copies as u64);
        }
    }

    #[test]
    fn csv_round_trips((a, _, _) in tensor_pair()) {
        let text = write_payoff_csv(&a, &["x".to_string()]).unwrap();
        let (back, comments) = read_payoff_csv(&text).unwrap();
        prop_assert_eq!(&back, &a);
        prop_assert_eq!(comments, vec!["x".to_string()]);
        prop_assert_eq!(write_payoff_csv(&back, &["x".to_string()]).unwrap(), text);
    }

    #[test]
    fn nash_ignores_constant_shifts((a, _, _) in tensor_pair(), shift in -100i32..100) {
        prop_assert_eq!(egta::pure_nash(&a).unwrap(), egta::pure_nash(&a.shifted(shift as f64)).unwrap());
    }
}

#[test]
fn fixture_round_trips_byte_for_byte() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/gcg_payoff_matrix.csv");
    let text = std::fs::read_to_string(path).unwrap();
    let (tensor, comments) = read_payoff_csv(&text).unwrap();
    assert_eq!(tensor.num_profiles(), 121);
    assert_eq!(write_payoff_csv(&tensor, &comments).unwrap(), text);
}

fn random_policies(names: &[&str]) -> PolicySet {
    let map = names
        .iter()
        .map(|&name| {
            let net = QNetwork::new(&[15, 12, 9], &mut rng::stream(4, &format!("net/{name}"))).unwrap();
            let policy = Policy { network: net, style: StyleSpec::from_code("I").unwrap(), fingerprint: String::new(), num_blocks: 3, num_colors: 3 };
            (name.to_string(), policy)
        })
        .collect();
    PolicySet::Shared(map)
}

#[test]
fn estimates_follow_profile_names_not_positions() {
    let grid = GridConfig { rows: 2, cols: 2, num_blocks: 3, num_colors: 3, ..GridConfig::default() };
    let graph = grid.build_graph().unwrap();
    let policies = random_policies(&["p", "q", "s"]);
    let sim = SimulationConfig { runs: 40, master_seed: 9, max_rounds: 20, ..SimulationConfig::default() };
    let order = |names: &[&str]| names.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    let (a, va) = egta::estimate_payoffs(&policies, &order(&["p", "q", "s"]), &graph, &grid, &sim).unwrap();
    let (b, vb) = egta::estimate_payoffs(&policies, &order(&["s", "p", "q"]), &graph, &grid, &sim).unwrap();
    for (i, row) in ["p", "q", "s"].iter().enumerate() {
        for (j, col) in ["p", "q", "s"].iter().enumerate() {
            let pa = a.find_profile(&[row, col]).unwrap();
            let pb = b.find_profile(&[row, col]).unwrap();
            assert_eq!(a.payoffs(pa), b.payoffs(pb));
            assert_eq!(va[i * 3 + j].violation_rate, vb.iter().find(|v| v.row == *row && v.col == *col).unwrap().violation_rate);
        }
    }
}

#[test]
fn estimates_do_not_depend_on_thread_count() {
    let grid = GridConfig { rows: 2, cols: 2, num_blocks: 3, num_colors: 3, ..GridConfig::default() };
    let graph = grid.build_graph().unwrap();
    let policies = random_policies(&["p", "q"]);
    let sim = SimulationConfig { runs: 30, master_seed: 2, max_rounds: 20, ..SimulationConfig::default() };
    let names = vec!["p".to_string(), "q".to_string()];
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| egta::estimate_payoffs(&policies, &names, &graph, &grid, &sim).unwrap().0)
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn missing_policy_is_named() {
    let grid = GridConfig { rows: 2, cols: 2, num_blocks: 3, num_colors: 3, ..GridConfig::default() };
    let graph = grid.build_graph().unwrap();
    let policies = random_policies(&["p"]);
    let sim = SimulationConfig { runs: 1, ..SimulationConfig::default() };
    let err = egta::estimate_payoffs(&policies, &["p".to_string(), "zz".to_string()], &graph, &grid, &sim).unwrap_err();
    assert!(err.to_string().contains("zz"), "{err}");
}
