//! The empirical meta-game: payoff tensors estimated by simulation, pure
//! Nash equilibria and cell-wise aggregation across configurations.

mod csv_io;
mod simulate;

pub use csv_io::{read_payoff_csv, read_violation_csv, write_payoff_csv, write_violation_csv, PAYOFF_HEADER, VIOLATION_HEADER};
pub use simulate::{
    estimate_payoffs, estimate_profile, play_game, violation_stats, GameRecord, PolicySet, ProfileEstimate, Seating,
    SimulationConfig, ViolationRow,
};

use std::collections::BTreeSet;

use thiserror::Error;

use crate::game::GameError;
use crate::learner::LearnerError;

#[derive(Debug, Error)]
pub enum EgtaError {
    #[error("no policy for style `{style}` in population {population}")]
    MissingPolicy { population: usize, style: String },
    #[error("payoff tensor: {0}")]
    Invalid(String),
    #[error("strategy sets differ; symmetric difference: {0:?}")]
    StrategyMismatch(Vec<String>),
    #[error("strategy order differs: {0:?} vs {1:?}")]
    OrderMismatch(Vec<String>, Vec<String>),
    #[error("operation needs a two-population tensor, got {0} populations")]
    NotBimatrix(usize),
    #[error("CSV line {line}: {msg}")]
    Csv { line: u64, msg: String },
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Learner(#[from] LearnerError),
}

/// Expected payoffs of every strategy profile.
///
/// Profiles are indexed in mixed radix with the first population most
/// significant, so for two populations profile `(i, j)` sits at
/// `i * n2 + j`.
#[derive(Debug, Clone, PartialEq)]
pub struct PayoffTensor {
    strategies: Vec<Vec<String>>,
    payoffs: Vec<Vec<f64>>,
    runs: Vec<u64>,
}

impl PayoffTensor {
    pub fn new(strategies: Vec<Vec<String>>, payoffs: Vec<Vec<f64>>, runs: Vec<u64>) -> Result<Self, EgtaError> {
        if strategies.is_empty() || strategies.iter().any(Vec::is_empty) {
            return Err(EgtaError::Invalid("every population needs at least one strategy".into()));
        }
        for list in &strategies {
            let uniq: BTreeSet<_> = list.iter().collect();
            if uniq.len() != list.len() {
                return Err(EgtaError::Invalid(format!("duplicate strategy names in {list:?}")));
            }
        }
        let profiles: usize = strategies.iter().map(Vec::len).product();
        if payoffs.len() != profiles || runs.len() != profiles {
            return Err(EgtaError::Invalid(format!(
                "expected {profiles} profiles, got {} payoff rows and {} run counts",
                payoffs.len(),
                runs.len()
            )));
        }
        let k = strategies.len();
        if let Some(bad) = payoffs.iter().position(|p| p.len() != k || p.iter().any(|x| !x.is_finite())) {
            return Err(EgtaError::Invalid(format!("profile {bad} needs {k} finite payoffs")));
        }
        Ok(PayoffTensor { strategies, payoffs, runs })
    }

    /// Two populations sharing `names`; `p1[i][j]`, `p2[i][j]` are the
    /// payoffs of the row and column player at `(i, j)`.
    pub fn from_bimatrix(names: &[&str], p1: &[Vec<f64>], p2: &[Vec<f64>], runs: u64) -> Result<Self, EgtaError> {
        let n = names.len();
        if p1.len() != n || p2.len() != n || p1.iter().chain(p2).any(|r| r.len() != n) {
            return Err(EgtaError::Invalid("bimatrix dimensions do not match the strategy list".into()));
        }
        let list: Vec<String> = names.iter().map(|s| s.to_string()).collect();
        let payoffs = (0..n * n).map(|idx| vec![p1[idx / n][idx % n], p2[idx / n][idx % n]]).collect();
        Self::new(vec![list.clone(), list], payoffs, vec![runs; n * n])
    }

    pub fn num_populations(&self) -> usize {
        self.strategies.len()
    }

    pub fn strategies(&self, population: usize) -> &[String] {
        &self.strategies[population]
    }

    pub fn all_strategies(&self) -> &[Vec<String>] {
        &self.strategies
    }

    pub fn num_profiles(&self) -> usize {
        self.payoffs.len()
    }

    pub fn profile_index(&self, profile: &[usize]) -> usize {
        debug_assert_eq!(profile.len(), self.strategies.len());
        profile.iter().zip(&self.strategies).fold(0, |acc, (&s, list)| acc * list.len() + s)
    }

    pub fn profile(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.strategies.len()];
        for (k, list) in self.strategies.iter().enumerate().rev() {
            out[k] = index % list.len();
            index /= list.len();
        }
        out
    }

    pub fn profile_names(&self, index: usize) -> Vec<&str> {
        self.profile(index).iter().zip(&self.strategies).map(|(&s, list)| list[s].as_str()).collect()
    }

    /// `"(WL,CA)"`
    pub fn profile_label(&self, index: usize) -> String {
        format!("({})", self.profile_names(index).join(","))
    }

    pub fn find_profile(&self, names: &[&str]) -> Option<usize> {
        if names.len() != self.strategies.len() {
            return None;
        }
        let mut idx = Vec::with_capacity(names.len());
        for (name, list) in names.iter().zip(&self.strategies) {
            idx.push(list.iter().position(|s| s == name)?);
        }
        Some(self.profile_index(&idx))
    }

    pub fn payoff(&self, profile_index: usize, population: usize) -> f64 {
        self.payoffs[profile_index][population]
    }

    pub fn payoffs(&self, profile_index: usize) -> &[f64] {
        &self.payoffs[profile_index]
    }

    pub fn runs(&self, profile_index: usize) -> u64 {
        self.runs[profile_index]
    }

    /// Same tensor with every payoff shifted by `delta`.
    pub fn shifted(&self, delta: f64) -> Self {
        let payoffs = self.payoffs.iter().map(|p| p.iter().map(|x| x + delta).collect()).collect();
        PayoffTensor { strategies: self.strategies.clone(), payoffs, runs: self.runs.clone() }
    }

    /// Reorders every population's strategies by `perm` (new position `i`
    /// holds old strategy `perm[i]`). Requires equal-sized populations.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let strategies: Vec<Vec<String>> =
            self.strategies.iter().map(|list| perm.iter().map(|&p| list[p].clone()).collect()).collect();
        let mut payoffs = vec![Vec::new(); self.payoffs.len()];
        let mut runs = vec![0; self.runs.len()];
        for (new_idx, slot) in payoffs.iter_mut().enumerate() {
            let new_profile = self.profile(new_idx);
            let old_profile: Vec<usize> = new_profile.iter().map(|&s| perm[s]).collect();
            let old_idx = self.profile_index(&old_profile);
            *slot = self.payoffs[old_idx].clone();
            runs[new_idx] = self.runs[old_idx];
        }
        PayoffTensor { strategies, payoffs, runs }
    }
}

/// Pure Nash equilibria of a two-population tensor under weak inequalities:
/// `(i, j)` qualifies iff `P1(i, j) >= P1(i', j)` for all `i'` and
/// `P2(i, j) >= P2(i, j')` for all `j'`.
pub fn pure_nash(tensor: &PayoffTensor) -> Result<Vec<(usize, usize)>, EgtaError> {
    if tensor.num_populations() != 2 {
        return Err(EgtaError::NotBimatrix(tensor.num_populations()));
    }
    let (n1, n2) = (tensor.strategies(0).len(), tensor.strategies(1).len());
    let at = |i: usize, j: usize| i * n2 + j;
    let best_row: Vec<f64> = (0..n2)
        .map(|j| (0..n1).map(|i| tensor.payoff(at(i, j), 0)).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let best_col: Vec<f64> = (0..n1)
        .map(|i| (0..n2).map(|j| tensor.payoff(at(i, j), 1)).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let mut out = Vec::new();
    for i in 0..n1 {
        for j in 0..n2 {
            if tensor.payoff(at(i, j), 0) >= best_row[j] && tensor.payoff(at(i, j), 1) >= best_col[i] {
                out.push((i, j));
            }
        }
    }
    Ok(out)
}

/// Cell-wise mean of congruent tensors; run counts add up.
pub fn aggregate(tensors: &[PayoffTensor]) -> Result<PayoffTensor, EgtaError> {
    let first = tensors.first().ok_or_else(|| EgtaError::Invalid("nothing to aggregate".into()))?;
    for t in &tensors[1..] {
        if t.strategies != first.strategies {
            let a: BTreeSet<&String> = first.strategies.iter().flatten().collect();
            let b: BTreeSet<&String> = t.strategies.iter().flatten().collect();
            let diff: Vec<String> = a.symmetric_difference(&b).map(|s| s.to_string()).collect();
            if diff.is_empty() {
                return Err(EgtaError::OrderMismatch(first.strategies.concat(), t.strategies.concat()));
            }
            return Err(EgtaError::StrategyMismatch(diff));
        }
    }
    let count = tensors.len() as f64;
    let k = first.num_populations();
    let payoffs = (0..first.num_profiles())
        .map(|p| (0..k).map(|pop| tensors.iter().map(|t| t.payoff(p, pop)).sum::<f64>() / count).collect())
        .collect();
    let runs = (0..first.num_profiles()).map(|p| tensors.iter().map(|t| t.runs(p)).sum()).collect();
    PayoffTensor::new(first.strategies.clone(), payoffs, runs)
}
