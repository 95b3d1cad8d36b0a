//! The end-to-end commands: train, simulate, rank, aggregate, nash.
//!
//! Output layout under `out`:
//!
//! ```text
//! policies/STYLE.policy        checkpoints (policies/pop2/ for a second set)
//! logs/STYLE.train.csv         training logs
//! payoffs.csv, violations.csv  simulated meta-game
//! rankings.csv, alpha_sweep.csv, response_graph.dot, response_graph.json
//! ```
//!
//! Every text output starts with a `# fingerprint: ...` line. Files are
//! written to a temporary sibling and renamed into place.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::alpharank::{self, AlphaRankError, RankResult, ResponseGraph};
use crate::config::{fingerprint, PipelineConfig, RankSection};
use crate::egta::{self, EgtaError, PayoffTensor, PolicySet};
use crate::game::GameError;
use crate::learner::{self, LearnerError, LogRow, Policy};
use crate::rng;
use crate::styles::{StyleError, StyleSpec};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("training style `{style}`: {source}")]
    Training { style: String, source: LearnerError },
    #[error("{}: fingerprint {found} does not match the configuration's {expected}", path.display())]
    FingerprintMismatch { path: PathBuf, expected: String, found: String },
    #[error("{}: {source}", path.display())]
    Input { path: PathBuf, source: EgtaError },
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Style(#[from] StyleError),
    #[error(transparent)]
    Learner(#[from] LearnerError),
    #[error(transparent)]
    Egta(#[from] EgtaError),
    #[error(transparent)]
    AlphaRank(#[from] AlphaRankError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io { path: path.to_path_buf(), source }
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), PipelineError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(dir))?;
    tmp.write_all(bytes).map_err(io_err(path))?;
    tmp.as_file().sync_all().map_err(io_err(path))?;
    tmp.persist(path).map_err(|e| PipelineError::Io { path: path.to_path_buf(), source: e.error })?;
    Ok(())
}

fn read_text(path: &Path) -> Result<String, PipelineError> {
    fs::read_to_string(path).map_err(io_err(path))
}

pub fn policy_path(out: &Path, population: usize, style: &str) -> PathBuf {
    let dir = out.join("policies");
    let dir = if population == 0 { dir } else { dir.join(format!("pop{}", population + 1)) };
    dir.join(format!("{style}.policy"))
}

pub fn log_path(out: &Path, population: usize, style: &str) -> PathBuf {
    let suffix = if population == 0 { String::new() } else { format!(".pop{}", population + 1) };
    out.join("logs").join(format!("{style}{suffix}.train.csv"))
}

fn populations(cfg: &PipelineConfig) -> usize {
    if cfg.egta.independent_policies {
        2
    } else {
        1
    }
}

fn train_label(population: usize, style: &str) -> String {
    if population == 0 {
        format!("train/{style}")
    } else {
        format!("train/{style}/pop{}", population + 1)
    }
}

/// Fingerprint a checkpoint must carry to be used under `cfg`.
pub fn policy_fingerprint(cfg: &PipelineConfig, style: &StyleSpec, population: usize) -> String {
    fingerprint(&serde_json::json!({
        "seed": cfg.seed,
        "population": population,
        "style": style,
        "grid": cfg.grid,
        "hyperparams": cfg.hyperparams,
    }))
}

#[derive(Debug, Clone)]
pub struct TrainedStyle {
    pub style: String,
    pub population: usize,
    pub checkpoint: PathBuf,
    pub log: PathBuf,
    pub final_return: f64,
}

/// Trains one policy per configured style (per population with
/// independent policies). Rerunning with the same config rewrites
/// byte-identical files.
pub fn cmd_train(cfg: &PipelineConfig) -> Result<Vec<TrainedStyle>, PipelineError> {
    cfg.validate()?;
    let styles = cfg.resolve_styles()?;
    let jobs: Vec<(usize, &StyleSpec)> =
        (0..populations(cfg)).flat_map(|p| styles.iter().map(move |s| (p, s))).collect();
    jobs.par_iter()
        .map(|&(population, style)| {
            let mut stream = rng::stream(cfg.seed, &train_label(population, &style.name));
            let mut out = learner::train_policy(style, &cfg.grid, &cfg.hyperparams, &mut stream)
                .map_err(|source| PipelineError::Training { style: style.name.clone(), source })?;
            out.policy.fingerprint = policy_fingerprint(cfg, style, population);

            let checkpoint = policy_path(&cfg.out, population, &style.name);
            let mut bytes = Vec::new();
            learner::write_checkpoint(&out.policy, &mut bytes)?;
            write_atomic(&checkpoint, &bytes)?;

            let log = log_path(&cfg.out, population, &style.name);
            write_atomic(&log, training_log(&out.policy.fingerprint, &style.name, &out.log).as_bytes())?;
            Ok(TrainedStyle {
                style: style.name.clone(),
                population,
                checkpoint,
                log,
                final_return: out.log.last().map_or(f64::NAN, |r| r.episode_return),
            })
        })
        .collect()
}

fn training_log(fp: &str, style: &str, rows: &[LogRow]) -> String {
    let mut text = format!("# fingerprint: {fp}\n# style: {style}\n{}\n", LogRow::CSV_HEADER);
    for row in rows {
        text.push_str(&row.to_csv());
        text.push('\n');
    }
    text
}

/// Loads every checkpoint `cfg` refers to, refusing any whose fingerprint
/// differs from the configuration's.
pub fn load_policies(cfg: &PipelineConfig) -> Result<PolicySet, PipelineError> {
    let styles = cfg.resolve_styles()?;
    let mut sets = Vec::new();
    for population in 0..populations(cfg) {
        let mut map = BTreeMap::new();
        for style in &styles {
            let path = policy_path(&cfg.out, population, &style.name);
            let file = fs::File::open(&path).map_err(io_err(&path))?;
            let policy = learner::read_checkpoint(std::io::BufReader::new(file))
                .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
            let expected = policy_fingerprint(cfg, style, population);
            if policy.fingerprint != expected {
                return Err(PipelineError::FingerprintMismatch { path, expected, found: policy.fingerprint });
            }
            map.insert(style.name.clone(), policy);
        }
        sets.push(map);
    }
    Ok(if sets.len() == 1 { PolicySet::Shared(sets.pop().expect("one set")) } else { PolicySet::PerPopulation(sets) })
}

#[derive(Debug, Clone)]
pub struct SimulateOutput {
    pub tensor: PayoffTensor,
    pub payoffs: PathBuf,
    pub violations: PathBuf,
}

/// Plays every ordered style profile and writes the payoff and violation
/// tables.
pub fn cmd_simulate(cfg: &PipelineConfig) -> Result<SimulateOutput, PipelineError> {
    cfg.validate()?;
    let policies = load_policies(cfg)?;
    let names: Vec<String> = cfg.resolve_styles()?.into_iter().map(|s| s.name).collect();
    let graph = cfg.grid.build_graph()?;
    let (tensor, violations) = egta::estimate_payoffs(&policies, &names, &graph, &cfg.grid, &cfg.simulation())?;
    let comments = vec![format!("fingerprint: {}", cfg.fingerprint())];
    let payoffs_path = cfg.out.join("payoffs.csv");
    let violations_path = cfg.out.join("violations.csv");
    write_atomic(&payoffs_path, egta::write_payoff_csv(&tensor, &comments)?.as_bytes())?;
    write_atomic(&violations_path, egta::write_violation_csv(&violations, &comments).as_bytes())?;
    Ok(SimulateOutput { tensor, payoffs: payoffs_path, violations: violations_path })
}

pub fn load_payoffs(path: &Path) -> Result<PayoffTensor, PipelineError> {
    let text = read_text(path)?;
    egta::read_payoff_csv(&text)
        .map(|(t, _)| t)
        .map_err(|source| PipelineError::Input { path: path.to_path_buf(), source })
}

#[derive(Debug, Clone)]
pub struct RankOutput {
    pub result: RankResult,
    pub graph: ResponseGraph,
    /// `(alpha, error)` for every failed sweep point.
    pub sweep_failures: Vec<(f64, AlphaRankError)>,
    pub files: Vec<PathBuf>,
}

/// Ranks the profiles of a payoff table, writes the ranking, the response
/// graph (DOT and JSON) and the α-sweep into `out`.
pub fn cmd_rank(input: &Path, rank: &RankSection, out: &Path) -> Result<RankOutput, PipelineError> {
    let rc = rank.rank_config()?;
    let text = read_text(input)?;
    let (tensor, _) =
        egta::read_payoff_csv(&text).map_err(|source| PipelineError::Input { path: input.to_path_buf(), source })?;
    let result = alpharank::rank_profiles(&tensor, &rc)?;
    let graph = alpharank::response_graph(&result, rc.m, rank.edge_threshold);
    let sweep = alpharank::alpha_sweep(&tensor, &rc)?;
    let sweep_failures =
        sweep.iter().filter_map(|p| p.outcome.as_ref().err().map(|e| (p.alpha, e.clone()))).collect();

    let fp = fingerprint(&serde_json::json!({ "payoffs": fingerprint(&text), "rank": rank }));
    let comments = vec![format!("fingerprint: {fp}")];
    let files = vec![
        (out.join("rankings.csv"), alpharank::rankings_csv(&result, &comments)),
        (out.join("alpha_sweep.csv"), alpharank::sweep_csv(&sweep, &comments)),
        (out.join("response_graph.dot"), format!("// fingerprint: {fp}\n{}", graph.to_dot())),
        (out.join("response_graph.json"), graph.to_json() + "\n"),
    ];
    for (path, body) in &files {
        write_atomic(path, body.as_bytes())?;
    }
    Ok(RankOutput { result, graph, sweep_failures, files: files.into_iter().map(|(p, _)| p).collect() })
}

/// Cell-wise mean of several payoff tables, written to `output`.
pub fn cmd_aggregate(inputs: &[PathBuf], output: &Path) -> Result<PayoffTensor, PipelineError> {
    if inputs.is_empty() {
        return Err(PipelineError::Config("aggregate needs at least one input".into()));
    }
    let mut tensors = Vec::with_capacity(inputs.len());
    let mut digests = Vec::with_capacity(inputs.len());
    for path in inputs {
        let text = read_text(path)?;
        let (t, _) =
            egta::read_payoff_csv(&text).map_err(|source| PipelineError::Input { path: path.clone(), source })?;
        tensors.push(t);
        digests.push(fingerprint(&text));
    }
    let merged = egta::aggregate(&tensors)?;
    let comments = vec![
        format!("fingerprint: {}", fingerprint(&digests)),
        format!("cell-wise mean of {} tables", inputs.len()),
    ];
    write_atomic(output, egta::write_payoff_csv(&merged, &comments)?.as_bytes())?;
    Ok(merged)
}

/// Labels of the weak pure Nash equilibria, in profile order.
pub fn cmd_nash(input: &Path) -> Result<Vec<String>, PipelineError> {
    let tensor = load_payoffs(input)?;
    let eqs = egta::pure_nash(&tensor)?;
    let n2 = tensor.strategies(1).len();
    Ok(eqs.into_iter().map(|(i, j)| tensor.profile_label(i * n2 + j)).collect())
}

/// Greedy policy loaded from a checkpoint file.
pub fn load_policy(path: &Path) -> Result<Policy, PipelineError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    Ok(learner::read_checkpoint(std::io::BufReader::new(file))?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested/file.txt");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "two");
        assert_eq!(fs::read_dir(path.parent().unwrap()).unwrap().count(), 1);
    }

    #[test]
    fn layout_paths() {
        let out = Path::new("o");
        assert_eq!(policy_path(out, 0, "CA"), Path::new("o/policies/CA.policy"));
        assert_eq!(policy_path(out, 1, "CA"), Path::new("o/policies/pop2/CA.policy"));
        assert_eq!(log_path(out, 0, "W"), Path::new("o/logs/W.train.csv"));
    }
}
