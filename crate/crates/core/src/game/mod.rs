//! The stochastic two-player graph-coloring game.
//!
//! A rectangular grid is partitioned into connected blocks; blocks are the
//! vertices of the coloring graph. Each round the environment reveals some
//! hidden blocks, then both players simultaneously pick a `(block, color)`
//! pair. See [`step`] for how a round is resolved.

mod grid;
mod state;

pub use grid::{generate_grid, BlockGraph, Cell, GridConfig};
pub use state::{
    init_state, is_terminal, reveal_phase, step, Action, BlockStatus, Color, GameState, StepEvents, StepOutcome,
    DELAY, GAIN, PENALTY, SANCTION,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GameError {
    #[error("invalid grid configuration: {0}")]
    Config(String),
    #[error("grid dump, line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid game state: {0}")]
    State(String),
    #[error("block index {0} is out of range")]
    UnknownBlock(usize),
    #[error("color index {0} is out of range")]
    UnknownColor(usize),
    #[error("the engine supports one or two players, got {0}")]
    PlayerCount(usize),
    #[error("cannot step a terminal state")]
    Terminal,
}
