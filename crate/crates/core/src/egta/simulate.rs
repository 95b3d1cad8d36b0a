use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;

use super::{EgtaError, PayoffTensor};
use crate::game::{self, BlockGraph, GridConfig};
use crate::learner::Policy;
use crate::rng;

/// Which engine slot each profile player takes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Seating {
    /// Profile player 1 always acts first within a round.
    Fixed,
    /// A per-game coin decides who acts first; payoffs are mapped back to
    /// the profile players.
    #[default]
    Randomized,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    /// Games per profile.
    pub runs: usize,
    pub master_seed: u64,
    /// Games are cut off after this many rounds.
    pub max_rounds: usize,
    pub seating: Seating,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig { runs: 5000, master_seed: 0, max_rounds: 100, seating: Seating::Randomized }
    }
}

/// Policies realizing each style, either one set shared by both
/// populations or one set per population.
#[derive(Debug, Clone)]
pub enum PolicySet {
    Shared(BTreeMap<String, Policy>),
    PerPopulation(Vec<BTreeMap<String, Policy>>),
}

impl PolicySet {
    pub fn get(&self, population: usize, style: &str) -> Result<&Policy, EgtaError> {
        let map = match self {
            PolicySet::Shared(m) => Some(m),
            PolicySet::PerPopulation(v) => v.get(population),
        };
        map.and_then(|m| m.get(style))
            .ok_or_else(|| EgtaError::MissingPolicy { population, style: style.to_string() })
    }
}

/// Outcome of one simulated game, from the profile players' point of view.
#[derive(Debug, Clone, PartialEq)]
pub struct GameRecord {
    /// Undiscounted sum of base rewards per profile player.
    pub payoffs: [f64; 2],
    pub violation_rate: f64,
    pub rounds: usize,
    pub truncated: bool,
}

/// Plays one greedy game between `players[0]` and `players[1]`. With
/// `swap`, `players[1]` takes the first engine slot.
pub fn play_game<R: Rng + ?Sized>(
    players: [&Policy; 2],
    graph: &BlockGraph,
    grid: &GridConfig,
    max_rounds: usize,
    swap: bool,
    rng: &mut R,
) -> Result<GameRecord, EgtaError> {
    let seats = if swap { [players[1], players[0]] } else { players };
    let mut state = game::init_state(graph, grid, rng);
    let mut totals = [0.0; 2];
    let mut rounds = 0;
    while !game::is_terminal(&state) && rounds < max_rounds {
        let joint = [seats[0].greedy_action(&state), seats[1].greedy_action(&state)];
        let out = game::step(&state, &joint, graph, rng)?;
        totals[0] += out.base_reward[0];
        totals[1] += out.base_reward[1];
        state = out.next_state;
        rounds += 1;
    }
    let payoffs = if swap { [totals[1], totals[0]] } else { totals };
    Ok(GameRecord {
        payoffs,
        violation_rate: state.violation_rate(graph),
        rounds,
        truncated: !game::is_terminal(&state),
    })
}

/// Monte-Carlo summary of one profile.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileEstimate {
    pub mean: [f64; 2],
    /// Standard error of the mean (sample standard deviation / sqrt(N)).
    pub std_err: [f64; 2],
    pub violation_rate: f64,
    pub truncated: usize,
    pub runs: usize,
}

/// Simulates `sim.runs` games of the profile `(row, col)`. Game `r` uses
/// the stream labeled `sim/ROW,COL/r` under the master seed.
pub fn estimate_profile(
    policies: &PolicySet,
    profile: (&str, &str),
    graph: &BlockGraph,
    grid: &GridConfig,
    sim: &SimulationConfig,
) -> Result<ProfileEstimate, EgtaError> {
    if sim.runs == 0 {
        return Err(EgtaError::Invalid("at least one run per profile is required".into()));
    }
    let players = [policies.get(0, profile.0)?, policies.get(1, profile.1)?];
    let mut sum = [0.0; 2];
    let mut sum_sq = [0.0; 2];
    let mut violations = 0.0;
    let mut truncated = 0;
    for run in 0..sim.runs {
        let mut stream = rng::stream(sim.master_seed, &format!("sim/{},{}/{run}", profile.0, profile.1));
        let swap = match sim.seating {
            Seating::Fixed => false,
            Seating::Randomized => stream.gen_bool(0.5),
        };
        let rec = play_game(players, graph, grid, sim.max_rounds, swap, &mut stream)?;
        for k in 0..2 {
            sum[k] += rec.payoffs[k];
            sum_sq[k] += rec.payoffs[k] * rec.payoffs[k];
        }
        violations += rec.violation_rate;
        truncated += rec.truncated as usize;
    }
    let n = sim.runs as f64;
    let mean = [sum[0] / n, sum[1] / n];
    let std_err = [0, 1].map(|k| {
        if sim.runs < 2 {
            return 0.0;
        }
        let var = ((sum_sq[k] - n * mean[k] * mean[k]) / (n - 1.0)).max(0.0);
        (var / n).sqrt()
    });
    Ok(ProfileEstimate { mean, std_err, violation_rate: violations / n, truncated, runs: sim.runs })
}

/// Violation statistics of one profile.
#[derive(Debug, Clone, PartialEq)]
pub struct ViolationRow {
    pub row: String,
    pub col: String,
    pub violation_rate: f64,
    pub runs: u64,
}

/// Mean share of same-colored adjacent colored blocks at game end.
pub fn violation_stats(
    policies: &PolicySet,
    profile: (&str, &str),
    graph: &BlockGraph,
    grid: &GridConfig,
    sim: &SimulationConfig,
) -> Result<ViolationRow, EgtaError> {
    let est = estimate_profile(policies, profile, graph, grid, sim)?;
    Ok(ViolationRow {
        row: profile.0.to_string(),
        col: profile.1.to_string(),
        violation_rate: est.violation_rate,
        runs: est.runs as u64,
    })
}

/// Payoff tensor over all ordered profiles of `strategies` (shared by both
/// populations), plus per-profile violation statistics. Profiles run in
/// parallel; results do not depend on the thread count.
pub fn estimate_payoffs(
    policies: &PolicySet,
    strategies: &[String],
    graph: &BlockGraph,
    grid: &GridConfig,
    sim: &SimulationConfig,
) -> Result<(PayoffTensor, Vec<ViolationRow>), EgtaError> {
    for s in strategies {
        policies.get(0, s)?;
        policies.get(1, s)?;
    }
    let n = strategies.len();
    let estimates: Vec<ProfileEstimate> = (0..n * n)
        .into_par_iter()
        .map(|idx| estimate_profile(policies, (&strategies[idx / n], &strategies[idx % n]), graph, grid, sim))
        .collect::<Result<_, _>>()?;
    let payoffs = estimates.iter().map(|e| e.mean.to_vec()).collect();
    let runs = vec![sim.runs as u64; n * n];
    let tensor = PayoffTensor::new(vec![strategies.to_vec(), strategies.to_vec()], payoffs, runs)?;
    let violations = estimates
        .iter()
        .enumerate()
        .map(|(idx, e)| ViolationRow {
            row: strategies[idx / n].clone(),
            col: strategies[idx % n].clone(),
            violation_rate: e.violation_rate,
            runs: e.runs as u64,
        })
        .collect();
    Ok((tensor, violations))
}
