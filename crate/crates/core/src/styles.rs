//! Styles of play and the preference-adoption reward.
//!
//! A style is a point in three preference dimensions, each in `[-1, 1]`:
//!
//! | dimension  | `+`            | `-`              |
//! |------------|----------------|------------------|
//! | tone       | warm (`W`)     | cool (`C`)       |
//! | difficulty | ambitious (`A`)| lazy (`L`)       |
//! | approach   | extravagant (`E`) | minimalistic (`M`) |
//!
//! `I` is indifferent in all three. Catalog styles use magnitude 0.7.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{Action, BlockGraph, GameState};

/// Weight of every nonzero dimension in the catalog styles.
pub const PREFERENCE_WEIGHT: f64 = 0.7;

/// Names of the catalog styles, in catalog order.
pub const CATALOG: [&str; 11] = ["I", "C", "W", "E", "M", "L", "A", "AE", "CA", "LE", "WL"];

/// Palette names for up to ten colors. The first half is warm.
pub const PALETTE: [&str; 10] = ["red", "orange", "yellow", "amber", "pink", "blue", "green", "cyan", "violet", "teal"];

#[derive(Debug, Error, PartialEq)]
pub enum StyleError {
    #[error("unknown style code `{0}`")]
    UnknownCode(String),
    #[error("style `{name}`: weight {value} for {dimension} is outside [-1, 1]")]
    WeightRange { name: String, dimension: &'static str, value: f64 },
    #[error("block index {0} is out of range")]
    UnknownBlock(usize),
    #[error("color index {0} is out of range")]
    UnknownColor(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StyleSpec {
    pub name: String,
    pub tone: f64,
    pub difficulty: f64,
    pub approach: f64,
}

impl StyleSpec {
    /// A custom style; weights must lie in `[-1, 1]`.
    pub fn custom(name: impl Into<String>, tone: f64, difficulty: f64, approach: f64) -> Result<Self, StyleError> {
        let spec = StyleSpec { name: name.into(), tone, difficulty, approach };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), StyleError> {
        for (dimension, value) in [("tone", self.tone), ("difficulty", self.difficulty), ("approach", self.approach)] {
            if !(-1.0..=1.0).contains(&value) {
                return Err(StyleError::WeightRange { name: self.name.clone(), dimension, value });
            }
        }
        Ok(())
    }

    /// Parses a letter code such as `"CA"` or `"I"`: at most one letter per
    /// dimension, each contributing ±[`PREFERENCE_WEIGHT`].
    pub fn from_code(code: &str) -> Result<Self, StyleError> {
        let unknown = || StyleError::UnknownCode(code.to_string());
        let mut dims: [Option<f64>; 3] = [None; 3];
        if code == "I" {
            return Ok(StyleSpec { name: "I".into(), tone: 0.0, difficulty: 0.0, approach: 0.0 });
        }
        if code.is_empty() {
            return Err(unknown());
        }
        for ch in code.chars() {
            let (dim, sign) = match ch {
                'W' => (0, 1.0),
                'C' => (0, -1.0),
                'A' => (1, 1.0),
                'L' => (1, -1.0),
                'E' => (2, 1.0),
                'M' => (2, -1.0),
                _ => return Err(unknown()),
            };
            if dims[dim].replace(sign * PREFERENCE_WEIGHT).is_some() {
                return Err(unknown());
            }
        }
        Ok(StyleSpec {
            name: code.to_string(),
            tone: dims[0].unwrap_or(0.0),
            difficulty: dims[1].unwrap_or(0.0),
            approach: dims[2].unwrap_or(0.0),
        })
    }

    pub fn weights(&self) -> [f64; 3] {
        [self.tone, self.difficulty, self.approach]
    }

    /// Largest attainable magnitude of [`preference_reward`].
    pub fn bound(&self) -> f64 {
        self.tone.abs() + self.difficulty.abs() + self.approach.abs()
    }
}

/// The eleven catalog styles.
pub fn style_catalog() -> Vec<StyleSpec> {
    CATALOG.iter().map(|c| StyleSpec::from_code(c).expect("catalog codes parse")).collect()
}

/// Whether palette index `color` is warm. The first `ceil(n/2)` colors are
/// warm, the rest cool.
pub fn is_warm(color: usize, num_colors: usize) -> bool {
    color < num_colors.div_ceil(2)
}

pub fn color_name(color: usize, num_colors: usize) -> String {
    if num_colors <= PALETTE.len() && color < num_colors {
        // Keep the warm/cool split aligned with the palette names.
        let half = num_colors.div_ceil(2);
        let idx = if color < half { color } else { 5 + (color - half) };
        if idx < PALETTE.len() {
            return PALETTE[idx].to_string();
        }
    }
    format!("c{color}")
}

/// Preference-adoption reward of `action` in `state`:
///
/// * tone: `tone * (+1 warm | -1 cool)`;
/// * difficulty: `difficulty * (2 * degree(b) / max_degree - 1)`;
/// * approach: `approach * (1 - 2 * freq(c))`, with `freq(c)` the share of
///   colored blocks already carrying `c`.
///
/// Paid whether the action is legal or not; never part of the meta-game payoff.
pub fn preference_reward(
    style: &StyleSpec,
    state: &GameState,
    action: Action,
    graph: &BlockGraph,
) -> Result<f64, StyleError> {
    if action.block >= graph.num_blocks() || action.block >= state.num_blocks() {
        return Err(StyleError::UnknownBlock(action.block));
    }
    let n = state.num_colors();
    let c = action.color.index();
    if c >= n {
        return Err(StyleError::UnknownColor(c));
    }
    let tone = if is_warm(c, n) { 1.0 } else { -1.0 };
    let max_degree = graph.max_degree();
    let difficulty = if max_degree == 0 {
        0.0
    } else {
        2.0 * graph.degree(action.block) as f64 / max_degree as f64 - 1.0
    };
    let approach = 1.0 - 2.0 * state.color_frequency(action.color);
    Ok(style.tone * tone + style.difficulty * difficulty + style.approach * approach)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{BlockStatus, Color, GridConfig};
    use std::collections::BTreeMap;

    fn graph() -> BlockGraph {
        GridConfig::default().build_graph().unwrap()
    }

    #[test]
    fn catalog_shape() {
        let cat = style_catalog();
        assert_eq!(cat.len(), 11);
        let mut names: Vec<_> = cat.iter().map(|s| s.name.clone()).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), 11);
        for s in &cat {
            let nonzero = s.weights().iter().filter(|w| **w != 0.0).count();
            assert_eq!(nonzero, if s.name == "I" { 0 } else { s.name.len() });
            assert!(s.weights().iter().all(|w| *w == 0.0 || w.abs() == 0.7));
        }
        let ca = cat.iter().find(|s| s.name == "CA").unwrap();
        assert_eq!(ca.weights(), [-0.7, 0.7, 0.0]);
        let wl = cat.iter().find(|s| s.name == "WL").unwrap();
        assert_eq!(wl.weights(), [0.7, -0.7, 0.0]);
    }

    #[test]
    fn bad_codes() {
        assert!(StyleSpec::from_code("WC").is_err());
        assert!(StyleSpec::from_code("X").is_err());
        assert!(StyleSpec::from_code("").is_err());
        assert!(StyleSpec::custom("x", 1.5, 0.0, 0.0).is_err());
    }

    #[test]
    fn indifferent_style_is_zero() {
        let g = graph();
        let s = GameState::blank(10, 10);
        let i = StyleSpec::from_code("I").unwrap();
        for b in 0..10 {
            for c in 0..10 {
                assert_eq!(preference_reward(&i, &s, Action::new(b, c), &g).unwrap(), 0.0);
            }
        }
    }

    #[test]
    fn warm_on_max_degree_block() {
        let g = graph();
        let b = (0..10).max_by_key(|&b| (g.degree(b), std::cmp::Reverse(b))).unwrap();
        let w = StyleSpec::from_code("W").unwrap();
        let r = preference_reward(&w, &GameState::blank(10, 10), Action::new(b, 0), &g).unwrap();
        assert!((r - 0.7).abs() < 1e-15);
        let a = StyleSpec::from_code("A").unwrap();
        let r = preference_reward(&a, &GameState::blank(10, 10), Action::new(b, 0), &g).unwrap();
        assert!((r - 0.7).abs() < 1e-15);
    }

    #[test]
    fn minimalist_rewards_reuse() {
        let g = graph();
        let colors = (0..10)
            .map(|b| if b < 3 { BlockStatus::Colored(Color(6)) } else { BlockStatus::White })
            .collect();
        let s = GameState::from_parts(colors, BTreeMap::new(), 10).unwrap();
        let m = StyleSpec::from_code("M").unwrap();
        let r = preference_reward(&m, &s, Action::new(5, 6), &g).unwrap();
        assert!((r - 0.7).abs() < 1e-15);
        let r = preference_reward(&m, &s, Action::new(5, 2), &g).unwrap();
        assert!((r + 0.7).abs() < 1e-15);
    }

    #[test]
    fn out_of_range_inputs() {
        let g = graph();
        let s = GameState::blank(10, 10);
        let w = StyleSpec::from_code("W").unwrap();
        assert_eq!(preference_reward(&w, &s, Action::new(10, 0), &g), Err(StyleError::UnknownBlock(10)));
        assert_eq!(preference_reward(&w, &s, Action::new(0, 10), &g), Err(StyleError::UnknownColor(10)));
    }

    #[test]
    fn palette_split() {
        assert_eq!((0..10).filter(|&c| is_warm(c, 10)).count(), 5);
        assert_eq!(color_name(0, 10), "red");
        assert_eq!(color_name(5, 10), "blue");
        assert_eq!(color_name(2, 3), "blue");
        assert_eq!(color_name(12, 20), "c12");
    }
}
