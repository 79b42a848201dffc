//! Belief-evolution simulator and rate analysis for anonymous buffer
//! shuffling in parallel mixnets.
//!
//! An adversary watches `n` cards being shuffled in rounds: a public uniform
//! permutation splits the cards into `M = n/K` groups of `K`, and each group
//! is then privately shuffled by its server. The adversary's knowledge about
//! one tracked card is a weight vector over positions; honest servers replace
//! the weights of their group by the group mean, corrupted servers reveal
//! their permutation (identity on weights), and adversary-marked cards carry
//! no weight at all.
//!
//! The crate provides:
//!
//! - [`engine`]: seeded round samplers and the belief update, for Monte Carlo
//!   trials;
//! - [`metrics`]: the anonymity measures (sum-of-squares potential, max
//!   difference, variation distance, max weight, relative entropy, support
//!   count) and their inter-metric inequality checks;
//! - [`rates`]: closed-form per-round convergence rates `E[dPhi/Phi]` for the
//!   uniform, corrupted-server, marked-input, combined, and binomial-assignment
//!   settings, plus round-count calculators;
//! - [`oracle`]: exact brute-force enumeration over all partitions (and
//!   honesty labelings) in rational arithmetic, the ground truth the closed
//!   forms are checked against;
//! - [`montecarlo`]: parallel, deterministically seeded experiment harness
//!   with per-round statistics and theory comparison;
//! - [`cli`]: the `bufshuf` command line (`simulate`, `verify-rates`,
//!   `sweep`).

pub mod cli;
pub mod config;
pub mod engine;
pub mod metrics;
pub mod montecarlo;
pub mod oracle;
pub mod rates;
pub mod state;

pub use config::{AssignmentMode, ConfigError, MixConfig};
pub use engine::{EngineError, Trajectory};
pub use metrics::MetricReport;
pub use montecarlo::ExperimentResult;
pub use rates::{ExponentPolicy, RatePrediction};
pub use state::{initial_state, BeliefState, RoundAssignment, StateError};
