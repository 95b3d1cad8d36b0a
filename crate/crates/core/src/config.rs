//! Pipeline configuration, read from TOML.
//!
//! ```toml
//! seed = 7
//! out = "out"
//! styles = ["I", "C", "CA", { name = "X", tone = 0.5, difficulty = 0.0, approach = -0.2 }]
//!
//! [grid]
//! rows = 4
//! cols = 5
//!
//! [hyperparams]
//! episodes = 2000
//!
//! [egta]
//! runs = 500
//!
//! [rank]
//! alpha = 2.0
//! alpha_grid = "0.1:10:0.01"
//! ```
//!
//! Every section and field is optional; omitted ones take their defaults.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::alpharank::{self, PopulationModel, RankConfig, DEFAULT_DAMPING};
use crate::egta::{Seating, SimulationConfig};
use crate::game::GridConfig;
use crate::learner::Hyperparams;
use crate::styles::{StyleSpec, CATALOG};
use crate::pipeline::PipelineError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StyleEntry {
    Code(String),
    Custom { name: String, tone: f64, difficulty: f64, approach: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EgtaSection {
    pub runs: usize,
    pub max_rounds: usize,
    pub seating: Seating,
    /// Train a separate policy set for the second population.
    pub independent_policies: bool,
}

impl Default for EgtaSection {
    fn default() -> Self {
        let sim = SimulationConfig::default();
        EgtaSection { runs: sim.runs, max_rounds: sim.max_rounds, seating: sim.seating, independent_policies: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RankSection {
    pub alpha: f64,
    pub m: usize,
    /// `START:END:STEP`
    pub alpha_grid: String,
    pub edge_threshold: f64,
    pub damping: f64,
    pub model: PopulationModel,
}

impl Default for RankSection {
    fn default() -> Self {
        RankSection {
            alpha: 2.0,
            m: 100,
            alpha_grid: "0.1:10:0.01".into(),
            edge_threshold: 1.0,
            damping: DEFAULT_DAMPING,
            model: PopulationModel::Multi,
        }
    }
}

impl RankSection {
    pub fn rank_config(&self) -> Result<RankConfig, PipelineError> {
        let rc = RankConfig {
            alpha: self.alpha,
            m: self.m,
            alpha_grid: alpharank::parse_alpha_grid(&self.alpha_grid)?,
            damping: self.damping,
            model: self.model,
        };
        rc.validate()?;
        if !self.edge_threshold.is_finite() || self.edge_threshold < 0.0 {
            return Err(PipelineError::Config(format!("edge_threshold must be non-negative, got {}", self.edge_threshold)));
        }
        Ok(rc)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Master seed; every phase derives its streams from it.
    pub seed: u64,
    pub out: PathBuf,
    pub styles: Vec<StyleEntry>,
    pub grid: GridConfig,
    pub hyperparams: Hyperparams,
    pub egta: EgtaSection,
    pub rank: RankSection,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            out: PathBuf::from("out"),
            styles: CATALOG.iter().map(|c| StyleEntry::Code(c.to_string())).collect(),
            grid: GridConfig::default(),
            hyperparams: Hyperparams::default(),
            egta: EgtaSection::default(),
            rank: RankSection::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        self.grid.validate()?;
        self.hyperparams.validate()?;
        self.resolve_styles()?;
        self.rank.rank_config()?;
        if self.egta.runs == 0 || self.egta.max_rounds == 0 {
            return Err(PipelineError::Config("egta.runs and egta.max_rounds must be positive".into()));
        }
        Ok(())
    }

    /// Style specs in configured order. Unknown codes are reported by name.
    pub fn resolve_styles(&self) -> Result<Vec<StyleSpec>, PipelineError> {
        if self.styles.is_empty() {
            return Err(PipelineError::Config("no styles configured".into()));
        }
        let mut out: Vec<StyleSpec> = Vec::with_capacity(self.styles.len());
        for entry in &self.styles {
            let spec = match entry {
                StyleEntry::Code(code) => StyleSpec::from_code(code)
                    .map_err(|_| PipelineError::Config(format!("unknown style `{code}`")))?,
                StyleEntry::Custom { name, tone, difficulty, approach } => {
                    StyleSpec::custom(name.clone(), *tone, *difficulty, *approach)?
                }
            };
            if spec.name.is_empty() || !spec.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
                return Err(PipelineError::Config(format!(
                    "style name `{}` must be non-empty ASCII letters, digits, `_` or `-`",
                    spec.name
                )));
            }
            if out.iter().any(|s| s.name == spec.name) {
                return Err(PipelineError::Config(format!("style `{}` is listed twice", spec.name)));
            }
            out.push(spec);
        }
        Ok(out)
    }

    pub fn simulation(&self) -> SimulationConfig {
        SimulationConfig {
            runs: self.egta.runs,
            master_seed: self.seed,
            max_rounds: self.egta.max_rounds,
            seating: self.egta.seating,
        }
    }

    /// Digest of everything that determines trained policies and payoffs.
    pub fn fingerprint(&self) -> String {
        fingerprint(&serde_json::json!({
            "seed": self.seed,
            "styles": self.styles,
            "grid": self.grid,
            "hyperparams": self.hyperparams,
            "egta": self.egta,
        }))
    }
}

/// First 8 bytes of SHA-256 over the JSON form of `value`, in hex.
pub fn fingerprint<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_string(value).expect("serializable");
    hex::encode(&Sha256::digest(json.as_bytes())[..8])
}
