//! Ranking styles of play in a stochastic graph-coloring game.
//!
//! The pipeline trains one Q-learning policy per style, estimates the
//! empirical meta-game payoffs by simulating every strategy profile, and
//! ranks profiles with alpha-Rank:
//!
//! * [`game`]: the underlying dynamic game.
//! * [`styles`]: preference vectors and the preference-adoption reward.
//! * [`learner`]: Double-DQN training of style-adherent policies.
//! * [`egta`]: payoff estimation, pure Nash equilibria, aggregation.
//! * [`alpharank`]: fixation probabilities, the profile Markov chain, its
//!   stationary distribution, sweeps and response graphs.
//! * [`pipeline`]: the command implementations behind the CLI.

pub mod alpharank;
pub mod config;
pub mod egta;
pub mod game;
pub mod learner;
pub mod pipeline;
pub mod rng;
pub mod styles;
