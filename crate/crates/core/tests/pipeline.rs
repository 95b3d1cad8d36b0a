use std::fs;
use std::path::{Path, PathBuf};

use stylerank::config::{PipelineConfig, StyleEntry};
use stylerank::egta::{self, PayoffTensor};
use stylerank::game::GridConfig;
use stylerank::learner::Hyperparams;
use stylerank::pipeline::{self, PipelineError};

fn tiny(out: &Path) -> PipelineConfig {
    PipelineConfig {
        seed: 5,
        out: out.to_path_buf(),
        grid: GridConfig { rows: 2, cols: 3, num_blocks: 4, num_colors: 3, ..GridConfig::default() },
        hyperparams: Hyperparams {
            episodes: 12,
            hidden_sizes: vec![8],
            batch_size: 4,
            replay_capacity: 500,
            ..Hyperparams::default()
        },
        ..PipelineConfig::default()
    }
}

fn read(path: &Path) -> String {
    fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn first_line(path: &Path) -> String {
    read(path).lines().next().unwrap_or_default().to_string()
}

#[test]
fn full_pipeline_on_a_tiny_board() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny(dir.path());
    cfg.egta.runs = 1;

    let trained = pipeline::cmd_train(&cfg).unwrap();
    assert_eq!(trained.len(), 11);
    for t in &trained {
        assert!(t.checkpoint.exists());
        assert!(first_line(&t.log).starts_with("# fingerprint: "));
    }
    let logs: Vec<String> = trained.iter().map(|t| read(&t.log)).collect();
    let checkpoints: Vec<Vec<u8>> = trained.iter().map(|t| fs::read(&t.checkpoint).unwrap()).collect();
    let again = pipeline::cmd_train(&cfg).unwrap();
    assert_eq!(again.iter().map(|t| read(&t.log)).collect::<Vec<_>>(), logs);
    assert_eq!(again.iter().map(|t| fs::read(&t.checkpoint).unwrap()).collect::<Vec<_>>(), checkpoints);

    let sim = pipeline::cmd_simulate(&cfg).unwrap();
    assert_eq!(sim.tensor.num_profiles(), 121);
    let text = read(&sim.payoffs);
    assert!(text.starts_with("# fingerprint: "));
    let header = text.lines().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(header, egta::PAYOFF_HEADER.join(","));
    let (tensor, _) = egta::read_payoff_csv(&text).unwrap();
    assert_eq!(tensor, sim.tensor);
    assert!((0..121).all(|p| tensor.runs(p) == 1 && tensor.payoffs(p).iter().all(|v| v.is_finite())));
    let violations = egta::read_violation_csv(&read(&sim.violations)).unwrap();
    assert_eq!(violations.len(), 121);

    let rank_dir = dir.path().join("rank");
    cfg.rank.alpha_grid = "0.5:2:0.5".into();
    let ranked = pipeline::cmd_rank(&sim.payoffs, &cfg.rank, &rank_dir).unwrap();
    assert!(ranked.result.residual < 1e-10);
    for f in &ranked.files {
        let body = read(f);
        if f.extension().is_some_and(|e| e == "json") {
            let v: serde_json::Value = serde_json::from_str(&body).unwrap();
            assert_eq!(v["nodes"].as_array().unwrap().len(), 121);
        } else {
            assert!(body.lines().next().unwrap().contains("fingerprint: "), "{}", f.display());
        }
    }
}

#[test]
fn changed_config_refuses_old_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny(dir.path());
    cfg.styles = vec![StyleEntry::Code("C".into()), StyleEntry::Code("W".into())];
    pipeline::cmd_train(&cfg).unwrap();
    let old = pipeline::policy_fingerprint(&cfg, &cfg.resolve_styles().unwrap()[0], 0);

    cfg.hyperparams.lr *= 2.0;
    let new = pipeline::policy_fingerprint(&cfg, &cfg.resolve_styles().unwrap()[0], 0);
    let err = pipeline::cmd_simulate(&cfg).unwrap_err();
    assert!(matches!(err, PipelineError::FingerprintMismatch { .. }));
    let msg = err.to_string();
    assert!(msg.contains(&old) && msg.contains(&new), "{msg}");
}

#[test]
fn missing_checkpoint_names_the_style() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny(dir.path());
    cfg.styles = vec![StyleEntry::Code("C".into())];
    pipeline::cmd_train(&cfg).unwrap();
    cfg.styles.push(StyleEntry::Code("LE".into()));
    let msg = pipeline::cmd_simulate(&cfg).unwrap_err().to_string();
    assert!(msg.contains("LE.policy"), "{msg}");
}

#[test]
fn unknown_style_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny(dir.path());
    cfg.styles = vec![StyleEntry::Code("C".into()), StyleEntry::Code("QQ".into())];
    let msg = pipeline::cmd_train(&cfg).unwrap_err().to_string();
    assert!(msg.contains("QQ"), "{msg}");
}

fn write_table(dir: &Path, name: &str, t: &PayoffTensor) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, egta::write_payoff_csv(t, &[]).unwrap()).unwrap();
    path
}

#[test]
fn aggregate_files() {
    let dir = tempfile::tempdir().unwrap();
    let names = ["a", "b"];
    let constant = |v: f64| PayoffTensor::from_bimatrix(&names, &[vec![v; 2], vec![v; 2]], &[vec![-v; 2], vec![-v; 2]], 3).unwrap();
    let one = write_table(dir.path(), "one.csv", &constant(1.0));
    let three = write_table(dir.path(), "three.csv", &constant(3.0));

    let out = dir.path().join("mean.csv");
    let mean = pipeline::cmd_aggregate(&[one.clone(), three], &out).unwrap();
    assert!((0..4).all(|p| mean.payoffs(p) == [2.0, -2.0] && mean.runs(p) == 6));
    assert!(first_line(&out).starts_with("# fingerprint: "));
    assert_eq!(pipeline::load_payoffs(&out).unwrap(), mean);

    let same = pipeline::cmd_aggregate(std::slice::from_ref(&one), &dir.path().join("same.csv")).unwrap();
    assert_eq!(same, constant(1.0));

    let other = PayoffTensor::from_bimatrix(&["a", "z"], &[vec![0.0; 2], vec![0.0; 2]], &[vec![0.0; 2], vec![0.0; 2]], 1).unwrap();
    let other = write_table(dir.path(), "other.csv", &other);
    let msg = pipeline::cmd_aggregate(&[one, other], &dir.path().join("bad.csv")).unwrap_err().to_string();
    assert!(msg.contains('b') && msg.contains('z'), "{msg}");
}

#[test]
fn malformed_input_reports_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    fs::write(&path, "# c\nrow,col,p1,p2,n_runs\na,a,1,1,1\na,b,oops,1,1\n").unwrap();
    let msg = pipeline::load_payoffs(&path).unwrap_err().to_string();
    assert!(msg.contains("bad.csv") && msg.contains("line 4"), "{msg}");
}
