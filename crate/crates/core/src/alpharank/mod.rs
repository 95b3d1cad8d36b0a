//! α-Rank: fixation probabilities, the profile transition chain, its
//! stationary distribution, rankings, α-sweeps and response graphs.

mod graph;
mod output;

pub use graph::{response_graph, sink_components, strongly_connected_components, GraphEdge, GraphNode, ResponseGraph};
pub use output::{rankings_csv, sig2, sweep_csv};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use thiserror::Error;

use crate::egta::PayoffTensor;

/// Below this |Δf| the fixation probability is taken to be exactly 1/m.
pub const NEUTRAL_DELTA: f64 = 1e-12;
/// Mixing weight toward uniform used by the power-iteration fallback.
pub const DEFAULT_DAMPING: f64 = 1e-8;
/// Residual the fallback iterates down to.
pub const POWER_TOLERANCE: f64 = 1e-12;
/// Residual a linear solve must reach to be accepted.
pub const ACCEPT_RESIDUAL: f64 = 1e-10;
pub const POWER_MAX_ITERATIONS: usize = 2_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlphaRankError {
    #[error("invalid rank configuration: {0}")]
    Config(String),
    #[error("non-finite fitness input")]
    NonFinite,
    #[error("single-population ranking needs two populations with identical strategy lists")]
    NotSymmetric,
    #[error("row {row} of the transition matrix sums to {sum} before the diagonal")]
    RowSum { row: usize, sum: f64 },
    #[error("power iteration stopped after {iterations} iterations at residual {residual:e}")]
    NoConvergence { iterations: usize, residual: f64 },
}

/// How profiles map to states of the evolutionary chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PopulationModel {
    /// One population per player; states are joint profiles.
    #[default]
    Multi,
    /// A symmetric two-player game played within one population; states
    /// are strategies and a mutant's fitness is its payoff against the
    /// resident.
    Single,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RankConfig {
    pub alpha: f64,
    /// Population size.
    pub m: usize,
    pub alpha_grid: Vec<f64>,
    pub damping: f64,
    pub model: PopulationModel,
}

impl Default for RankConfig {
    fn default() -> Self {
        RankConfig {
            alpha: 2.0,
            m: 100,
            alpha_grid: alpha_grid(0.1, 10.0, 0.01).expect("static grid"),
            damping: DEFAULT_DAMPING,
            model: PopulationModel::Multi,
        }
    }
}

impl RankConfig {
    pub fn validate(&self) -> Result<(), AlphaRankError> {
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(AlphaRankError::Config(format!("alpha must be positive, got {}", self.alpha)));
        }
        if self.m < 2 {
            return Err(AlphaRankError::Config(format!("population size must be at least 2, got {}", self.m)));
        }
        if !(0.0..1.0).contains(&self.damping) {
            return Err(AlphaRankError::Config(format!("damping must lie in [0, 1), got {}", self.damping)));
        }
        if let Some(a) = self.alpha_grid.iter().find(|a| !(a.is_finite() && **a > 0.0)) {
            return Err(AlphaRankError::Config(format!("alpha grid holds non-positive value {a}")));
        }
        Ok(())
    }

    pub fn with_alpha(&self, alpha: f64) -> Self {
        RankConfig { alpha, ..self.clone() }
    }
}

/// Inclusive grid `start, start+step, ..., end`, each point rounded to
/// ten decimals so that `0.1:10:0.01` prints cleanly.
pub fn alpha_grid(start: f64, end: f64, step: f64) -> Result<Vec<f64>, AlphaRankError> {
    if !(start.is_finite() && end.is_finite() && step.is_finite()) || step <= 0.0 || start <= 0.0 || end < start {
        return Err(AlphaRankError::Config(format!("bad alpha grid {start}:{end}:{step}")));
    }
    let count = ((end - start) / step + 1e-9).floor() as usize + 1;
    if count > 1_000_000 {
        return Err(AlphaRankError::Config(format!("alpha grid has {count} points")));
    }
    Ok((0..count).map(|i| ((start + i as f64 * step) * 1e10).round() / 1e10).collect())
}

/// Parses `START:END:STEP`.
pub fn parse_alpha_grid(spec: &str) -> Result<Vec<f64>, AlphaRankError> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || AlphaRankError::Config(format!("alpha grid `{spec}` is not START:END:STEP"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let nums: Vec<f64> = parts.iter().map(|p| p.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|_| bad())?;
    alpha_grid(nums[0], nums[1], nums[2])
}

/// Probability that one mutant with fitness `f_mutant` takes over a
/// population of `m` residents with fitness `f_resident`:
/// `(1 - exp(-αΔf)) / (1 - exp(-αmΔf))`, or exactly `1/m` when Δf is
/// negligible.
pub fn fixation_probability(f_mutant: f64, f_resident: f64, alpha: f64, m: usize) -> Result<f64, AlphaRankError> {
    if !(f_mutant.is_finite() && f_resident.is_finite() && alpha.is_finite()) {
        return Err(AlphaRankError::NonFinite);
    }
    if alpha <= 0.0 || m < 2 {
        return Err(AlphaRankError::Config(format!("need alpha > 0 and m >= 2, got {alpha}, {m}")));
    }
    let delta = f_mutant - f_resident;
    let mf = m as f64;
    if delta.abs() < NEUTRAL_DELTA {
        return Ok(1.0 / mf);
    }
    let u = alpha * delta;
    if u > 0.0 {
        Ok((-u).exp_m1() / (-mf * u).exp_m1())
    } else {
        let v = -u;
        Ok((-(mf - 1.0) * v).exp() * (-v).exp_m1() / (-mf * v).exp_m1())
    }
}

/// One unilateral deviation of the chain.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Deviation {
    pub from: usize,
    pub to: usize,
    /// Deviating population.
    pub population: usize,
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    pub matrix: DMatrix<f64>,
    pub eta: f64,
    /// State labels, e.g. `"(WL,CA)"` or `"Rock"`.
    pub labels: Vec<String>,
    pub deviations: Vec<Deviation>,
}

impl TransitionMatrix {
    pub fn size(&self) -> usize {
        self.labels.len()
    }

    /// `max_j |(πC)_j - π_j|`
    pub fn residual(&self, pi: &[f64]) -> f64 {
        let p = DVector::from_column_slice(pi);
        let moved = self.matrix.tr_mul(&p);
        (moved - p).amax()
    }
}

pub fn transition_matrix(tensor: &PayoffTensor, rc: &RankConfig) -> Result<TransitionMatrix, AlphaRankError> {
    rc.validate()?;
    let (labels, fitness_pairs) = match rc.model {
        PopulationModel::Multi => multi_population(tensor),
        PopulationModel::Single => single_population(tensor)?,
    };
    let n = labels.len();
    let deviations_per_state: usize = match rc.model {
        PopulationModel::Multi => tensor.all_strategies().iter().map(|s| s.len() - 1).sum(),
        PopulationModel::Single => n - 1,
    };
    let eta = if deviations_per_state == 0 { 0.0 } else { 1.0 / deviations_per_state as f64 };
    let mut matrix = DMatrix::zeros(n, n);
    let mut deviations = Vec::with_capacity(fitness_pairs.len());
    for (from, to, population, f_mut, f_res) in fitness_pairs {
        let rho = fixation_probability(f_mut, f_res, rc.alpha, rc.m)?;
        matrix[(from, to)] = eta * rho;
        deviations.push(Deviation { from, to, population, rho });
    }
    for row in 0..n {
        let off: f64 = (0..n).filter(|&j| j != row).map(|j| matrix[(row, j)]).sum();
        if off > 1.0 + 1e-12 {
            return Err(AlphaRankError::RowSum { row, sum: off });
        }
        matrix[(row, row)] = 1.0 - off;
    }
    Ok(TransitionMatrix { matrix, eta, labels, deviations })
}

type FitnessPair = (usize, usize, usize, f64, f64);

fn multi_population(tensor: &PayoffTensor) -> (Vec<String>, Vec<FitnessPair>) {
    let labels = (0..tensor.num_profiles()).map(|i| tensor.profile_label(i)).collect();
    let mut pairs = Vec::new();
    for from in 0..tensor.num_profiles() {
        let profile = tensor.profile(from);
        for (k, list) in tensor.all_strategies().iter().enumerate() {
            for alt in 0..list.len() {
                if alt == profile[k] {
                    continue;
                }
                let mut next = profile.clone();
                next[k] = alt;
                let to = tensor.profile_index(&next);
                pairs.push((from, to, k, tensor.payoff(to, k), tensor.payoff(from, k)));
            }
        }
    }
    (labels, pairs)
}

fn single_population(tensor: &PayoffTensor) -> Result<(Vec<String>, Vec<FitnessPair>), AlphaRankError> {
    if tensor.num_populations() != 2 || tensor.strategies(0) != tensor.strategies(1) {
        return Err(AlphaRankError::NotSymmetric);
    }
    let labels = tensor.strategies(0).to_vec();
    let n = labels.len();
    let mut pairs = Vec::new();
    for s in 0..n {
        let resident = tensor.payoff(tensor.profile_index(&[s, s]), 0);
        for t in (0..n).filter(|&t| t != s) {
            let mutant = tensor.payoff(tensor.profile_index(&[t, s]), 0);
            pairs.push((s, t, 0, mutant, resident));
        }
    }
    Ok((labels, pairs))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    LinearSolve,
    /// Closed classes solved by elimination, weighted from the uniform start.
    ClassDecomposition { classes: usize },
    PowerIteration { iterations: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stationary {
    pub pi: Vec<f64>,
    /// `‖πC − π‖∞` against the undamped matrix.
    pub residual: f64,
    pub method: SolveMethod,
}

/// Solves `πC = π`, `Σπ = 1`. A unique solution comes from an LU solve of
/// `(C − I)ᵀ` with its last equation replaced by the normalization; when
/// that system is singular or its answer is unusable, the chain is split
/// into closed classes, each solved by GTH elimination and weighted by the
/// probability of being absorbed into it from the uniform start. Power
/// iteration on `(1 − d)C + d/n` from the uniform vector is the last resort.
pub fn stationary_distribution(c: &TransitionMatrix, damping: f64) -> Result<Stationary, AlphaRankError> {
    let n = c.size();
    if n == 1 {
        return Ok(Stationary { pi: vec![1.0], residual: 0.0, method: SolveMethod::LinearSolve });
    }
    if let Some(pi) = linear_solve(&c.matrix) {
        let residual = c.residual(&pi);
        if residual < ACCEPT_RESIDUAL {
            return Ok(Stationary { pi, residual, method: SolveMethod::LinearSolve });
        }
    }
    if let Some((pi, classes)) = class_decomposition(&c.matrix) {
        let residual = c.residual(&pi);
        if residual < ACCEPT_RESIDUAL {
            return Ok(Stationary { pi, residual, method: SolveMethod::ClassDecomposition { classes } });
        }
    }
    power_iteration(c, damping)
}

fn linear_solve(c: &DMatrix<f64>) -> Option<Vec<f64>> {
    let n = c.nrows();
    let mut a = c.transpose() - DMatrix::identity(n, n);
    a.row_mut(n - 1).fill(1.0);
    let mut b = DVector::zeros(n);
    b[n - 1] = 1.0;
    let lu = a.lu();
    let u = lu.u();
    let scale = u.amax().max(1.0);
    if u.diagonal().iter().any(|d| d.abs() < 1e-13 * scale) {
        return None;
    }
    let x = lu.solve(&b)?;
    if x.iter().any(|v| !v.is_finite() || *v < -1e-10) {
        return None;
    }
    let mut pi: Vec<f64> = x.iter().map(|v| v.max(0.0)).collect();
    let total: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|v| *v /= total);
    Some(pi)
}

fn class_decomposition(c: &DMatrix<f64>) -> Option<(Vec<f64>, usize)> {
    let n = c.nrows();
    let adjacency: Vec<Vec<usize>> =
        (0..n).map(|i| (0..n).filter(|&j| j != i && c[(i, j)] > 0.0).collect()).collect();
    let closed = sink_components(&adjacency);
    let mut class_of = vec![usize::MAX; n];
    for (k, members) in closed.iter().enumerate() {
        for &i in members {
            class_of[i] = k;
        }
    }
    let mass = absorbed_mass(c, &class_of)?;

    let mut pi = vec![0.0; n];
    for members in &closed {
        let local = gth(&c.select_rows(members).select_columns(members))?;
        for (&i, p) in members.iter().zip(local) {
            pi[i] = mass[i] / n as f64 * p;
        }
    }
    let total: f64 = pi.iter().sum();
    if !total.is_finite() || total <= 0.0 {
        return None;
    }
    pi.iter_mut().for_each(|v| *v /= total);
    Some((pi, closed.len()))
}

/// `ln(eᵃ + eᵇ)`.
fn ln_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

fn ln_sum(values: impl Iterator<Item = f64>) -> f64 {
    values.fold(f64::NEG_INFINITY, ln_add)
}

// Both eliminations below only add, multiply and divide nonnegative
// numbers, so they run on logarithms and never underflow.

/// Mass each closed state's class ends up holding when one unit starts on
/// every state. Transient states are censored out one at a time.
fn absorbed_mass(c: &DMatrix<f64>, class_of: &[usize]) -> Option<Vec<f64>> {
    let n = c.nrows();
    let mut a = c.map(f64::ln);
    let mut unit = vec![0.0; n];
    let mut alive = vec![true; n];
    for t in (0..n).filter(|&t| class_of[t] == usize::MAX) {
        alive[t] = false;
        let s = ln_sum((0..n).filter(|&j| alive[j]).map(|j| a[(t, j)]));
        if !s.is_finite() {
            return None;
        }
        let feeders: Vec<usize> = (0..n).filter(|&i| alive[i] && a[(i, t)] > f64::NEG_INFINITY).collect();
        for j in (0..n).filter(|&j| alive[j]) {
            let share = a[(t, j)] - s;
            if share == f64::NEG_INFINITY {
                continue;
            }
            unit[j] = ln_add(unit[j], unit[t] + share);
            for &i in feeders.iter().filter(|&&i| i != j) {
                a[(i, j)] = ln_add(a[(i, j)], a[(i, t)] + share);
            }
        }
    }
    let classes = class_of.iter().filter(|&&k| k != usize::MAX).max().map_or(0, |k| k + 1);
    let mut per_class = vec![f64::NEG_INFINITY; classes];
    for i in (0..n).filter(|&i| class_of[i] != usize::MAX) {
        per_class[class_of[i]] = ln_add(per_class[class_of[i]], unit[i]);
    }
    Some((0..n).map(|i| if class_of[i] == usize::MAX { 0.0 } else { per_class[class_of[i]].exp() }).collect())
}

/// Grassmann-Taksar-Heyman elimination for an irreducible chain. Stays
/// accurate when some transitions are many orders of magnitude below others.
fn gth(p: &DMatrix<f64>) -> Option<Vec<f64>> {
    let n = p.nrows();
    let mut a = p.map(f64::ln);
    let mut out = vec![f64::NEG_INFINITY; n];
    for k in (1..n).rev() {
        let s = ln_sum((0..k).map(|j| a[(k, j)]));
        out[k] = s;
        if s == f64::NEG_INFINITY {
            continue;
        }
        for j in 0..k {
            a[(k, j)] -= s;
        }
        for i in 0..k {
            let w = a[(i, k)];
            if w > f64::NEG_INFINITY {
                for j in 0..k {
                    a[(i, j)] = ln_add(a[(i, j)], w + a[(k, j)]);
                }
            }
        }
    }
    let mut x = vec![f64::NEG_INFINITY; n];
    x[0] = 0.0;
    for k in 1..n {
        if out[k] == f64::NEG_INFINITY {
            // Nothing leads back from k: it holds all of the censored mass.
            x[..k].iter_mut().for_each(|v| *v = f64::NEG_INFINITY);
            x[k] = 0.0;
        } else {
            x[k] = ln_sum((0..k).map(|i| x[i] + a[(i, k)])) - out[k];
        }
    }
    let top = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return None;
    }
    let w: Vec<f64> = x.iter().map(|v| (v - top).exp()).collect();
    let total: f64 = w.iter().sum();
    Some(w.into_iter().map(|v| v / total).collect())
}

fn power_iteration(c: &TransitionMatrix, damping: f64) -> Result<Stationary, AlphaRankError> {
    let n = c.size();
    let uniform = 1.0 / n as f64;
    // Rows are sparse: the diagonal plus the unilateral deviations.
    let mut rows: Vec<Vec<(usize, f64)>> = (0..n).map(|i| vec![(i, c.matrix[(i, i)])]).collect();
    for d in &c.deviations {
        rows[d.from].push((d.to, c.matrix[(d.from, d.to)]));
    }
    let mut pi = vec![uniform; n];
    let mut next = vec![0.0; n];
    for iteration in 1..=POWER_MAX_ITERATIONS {
        next.iter_mut().for_each(|v| *v = damping * uniform);
        for (i, row) in rows.iter().enumerate() {
            let w = (1.0 - damping) * pi[i];
            for &(j, p) in row {
                next[j] += w * p;
            }
        }
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|v| *v /= total);
        let change = pi.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        std::mem::swap(&mut pi, &mut next);
        if change < POWER_TOLERANCE {
            let residual = c.residual(&pi);
            return Ok(Stationary { pi, residual, method: SolveMethod::PowerIteration { iterations: iteration } });
        }
    }
    Err(AlphaRankError::NoConvergence { iterations: POWER_MAX_ITERATIONS, residual: c.residual(&pi) })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankResult {
    pub labels: Vec<String>,
    pub pi: Vec<f64>,
    /// State indices by descending mass.
    pub ranking: Vec<usize>,
    pub deviations: Vec<Deviation>,
    pub residual: f64,
    pub method: SolveMethod,
    pub config: RankConfig,
}

impl RankResult {
    pub fn mass_of(&self, label: &str) -> Option<f64> {
        self.labels.iter().position(|l| l == label).map(|i| self.pi[i])
    }

    /// `(label, mass)` pairs in rank order.
    pub fn top(&self, k: usize) -> Vec<(&str, f64)> {
        self.ranking.iter().take(k).map(|&i| (self.labels[i].as_str(), self.pi[i])).collect()
    }
}

/// Descending mass; masses equal on a 1e-12 grid are ordered by label.
pub fn rank_order(labels: &[String], pi: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..pi.len()).collect();
    let key = |i: usize| (pi[i] * 1e12).round();
    order.sort_by(|&a, &b| key(b).total_cmp(&key(a)).then_with(|| labels[a].cmp(&labels[b])));
    order
}

pub fn rank_profiles(tensor: &PayoffTensor, rc: &RankConfig) -> Result<RankResult, AlphaRankError> {
    let c = transition_matrix(tensor, rc)?;
    let st = stationary_distribution(&c, rc.damping)?;
    let ranking = rank_order(&c.labels, &st.pi);
    Ok(RankResult {
        labels: c.labels,
        pi: st.pi,
        ranking,
        deviations: c.deviations,
        residual: st.residual,
        method: st.method,
        config: rc.clone(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub alpha: f64,
    pub outcome: Result<RankResult, AlphaRankError>,
}

/// Ranks at every α of `rc.alpha_grid`, in grid order. A failing α is
/// recorded and the sweep moves on.
pub fn alpha_sweep(tensor: &PayoffTensor, rc: &RankConfig) -> Result<Vec<SweepPoint>, AlphaRankError> {
    rc.validate()?;
    if rc.alpha_grid.is_empty() {
        return Err(AlphaRankError::Config("alpha grid is empty".into()));
    }
    Ok(rc
        .alpha_grid
        .par_iter()
        .map(|&alpha| SweepPoint { alpha, outcome: rank_profiles(tensor, &rc.with_alpha(alpha)) })
        .collect())
}
