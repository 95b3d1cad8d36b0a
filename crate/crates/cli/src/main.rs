//! `stylerank`: train style policies, simulate the meta-game and rank it.
//!
//! Every flag can also be set through an environment variable with the
//! `STYLERANK_` prefix, e.g. `STYLERANK_ALPHA=10`.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use stylerank::alpharank::parse_alpha_grid;
use stylerank::config::PipelineConfig;
use stylerank::pipeline;

#[derive(Parser)]
#[command(name = "stylerank", version, about = "Rank styles of play in the graph-coloring game with alpha-Rank")]
struct Cli {
    #[command(flatten)]
    opts: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Overrides {
    /// TOML pipeline configuration.
    #[arg(long, global = true, env = "STYLERANK_CONFIG")]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true, env = "STYLERANK_SEED")]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, env = "STYLERANK_OUT")]
    out: Option<PathBuf>,
    /// Games simulated per profile.
    #[arg(long, global = true, env = "STYLERANK_RUNS")]
    runs: Option<usize>,
    /// Training episodes per style.
    #[arg(long, global = true, env = "STYLERANK_EPISODES")]
    episodes: Option<usize>,
    /// Selection intensity.
    #[arg(long, global = true, env = "STYLERANK_ALPHA", allow_negative_numbers = true)]
    alpha: Option<f64>,
    /// Sweep grid as START:END:STEP.
    #[arg(long, global = true, env = "STYLERANK_ALPHA_GRID")]
    alpha_grid: Option<String>,
    /// Population size m.
    #[arg(long, global = true, env = "STYLERANK_POP_SIZE")]
    pop_size: Option<usize>,
    /// Response-graph edges need rho/rho_m above this.
    #[arg(long, global = true, env = "STYLERANK_EDGE_THRESHOLD", allow_negative_numbers = true)]
    edge_threshold: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Train one policy per configured style.
    Train,
    /// Simulate all style profiles with the trained policies.
    Simulate,
    /// Rank the profiles of a payoff table with alpha-Rank.
    Rank {
        /// Payoff CSV; defaults to OUT/payoffs.csv.
        payoffs: Option<PathBuf>,
        /// How many ranked profiles to print.
        #[arg(long, default_value_t = 10)]
        top: usize,
    },
    /// Cell-wise mean of several payoff tables.
    Aggregate {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Output CSV; defaults to OUT/aggregate.csv.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// List the pure Nash equilibria of a payoff table.
    Nash { payoffs: PathBuf },
    /// Train, simulate and rank in one go.
    Run {
        #[arg(long, default_value_t = 10)]
        top: usize,
    },
    /// Print the board layout and its block adjacency.
    Grid,
    /// Print the effective configuration as TOML.
    Config,
}

fn load_config(o: &Overrides) -> Result<PipelineConfig> {
    let mut cfg = match &o.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            PipelineConfig::from_toml(&text).with_context(|| format!("in {}", path.display()))?
        }
        None => PipelineConfig::default(),
    };
    if let Some(seed) = o.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &o.out {
        cfg.out = out.clone();
    }
    if let Some(runs) = o.runs {
        cfg.egta.runs = runs;
    }
    if let Some(episodes) = o.episodes {
        cfg.hyperparams.episodes = episodes;
    }
    if let Some(alpha) = o.alpha {
        cfg.rank.alpha = alpha;
    }
    if let Some(grid) = &o.alpha_grid {
        parse_alpha_grid(grid)?;
        cfg.rank.alpha_grid = grid.clone();
    }
    if let Some(m) = o.pop_size {
        cfg.rank.m = m;
    }
    if let Some(t) = o.edge_threshold {
        cfg.rank.edge_threshold = t;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn train(cfg: &PipelineConfig) -> Result<()> {
    let start = Instant::now();
    let trained = pipeline::cmd_train(cfg)?;
    for t in &trained {
        println!("{:<6} pop{}  {}  last return {:.2}", t.style, t.population + 1, t.checkpoint.display(), t.final_return);
    }
    eprintln!("trained {} policies in {:.1?}", trained.len(), start.elapsed());
    Ok(())
}

fn simulate(cfg: &PipelineConfig) -> Result<PathBuf> {
    let start = Instant::now();
    let out = pipeline::cmd_simulate(cfg)?;
    println!("{}", out.payoffs.display());
    println!("{}", out.violations.display());
    eprintln!("simulated {} profiles x {} games in {:.1?}", out.tensor.num_profiles(), cfg.egta.runs, start.elapsed());
    Ok(out.payoffs)
}

fn rank(cfg: &PipelineConfig, payoffs: &Path, top: usize) -> Result<()> {
    let out = pipeline::cmd_rank(payoffs, &cfg.rank, &cfg.out)?;
    println!("alpha = {}, m = {}, residual {:.1e}", cfg.rank.alpha, cfg.rank.m, out.result.residual);
    println!("{:>4}  {:<16} {:>8}", "rank", "profile", "mass");
    for (i, (label, mass)) in out.result.top(top).into_iter().enumerate() {
        println!("{:>4}  {:<16} {:>8.4}", i + 1, label, mass);
    }
    let mcc: Vec<&str> = out.graph.mcc_members.iter().map(|&i| out.graph.nodes[i].label.as_str()).collect();
    println!("sink components: {}", mcc.join(" "));
    for (alpha, err) in &out.sweep_failures {
        eprintln!("warning: sweep point alpha={alpha} failed: {err}");
    }
    for f in &out.files {
        eprintln!("wrote {}", f.display());
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let cfg = load_config(&cli.opts)?;
    match cli.command {
        Command::Train => train(&cfg)?,
        Command::Simulate => {
            simulate(&cfg)?;
        }
        Command::Rank { payoffs, top } => {
            let path = payoffs.unwrap_or_else(|| cfg.out.join("payoffs.csv"));
            rank(&cfg, &path, top)?;
        }
        Command::Aggregate { inputs, output } => {
            let output = output.unwrap_or_else(|| cfg.out.join("aggregate.csv"));
            let merged = pipeline::cmd_aggregate(&inputs, &output)?;
            println!("{} ({} profiles)", output.display(), merged.num_profiles());
        }
        Command::Nash { payoffs } => {
            let eqs = pipeline::cmd_nash(&payoffs)?;
            if eqs.is_empty() {
                println!("no pure Nash equilibrium");
            }
            for e in eqs {
                println!("{e}");
            }
        }
        Command::Run { top } => {
            train(&cfg)?;
            let payoffs = simulate(&cfg)?;
            rank(&cfg, &payoffs, top)?;
        }
        Command::Grid => {
            let graph = cfg.grid.build_graph()?;
            print!("{}", graph.dump());
        }
        Command::Config => print!("{}", cfg.to_toml()),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn negative_alpha_is_rejected() {
        let cli = Cli::try_parse_from(["stylerank", "rank", "--alpha", "-1"]).unwrap();
        assert!(load_config(&cli.opts).is_err());
    }

    #[test]
    fn bad_grid_is_rejected() {
        let cli = Cli::try_parse_from(["stylerank", "rank", "--alpha-grid", "1:2"]).unwrap();
        assert!(load_config(&cli.opts).is_err());
    }
}
