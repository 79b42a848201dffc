//! Seeded parallel trials with per-round statistics and theory comparison.
//!
//! Trial i always uses the rng stream derived from (master_seed, i) and
//! aggregation reduces the per-trial values in fixed trial-index order with
//! compensated summation, so results are bit-identical regardless of how
//! many workers run the trials.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::config::MixConfig;
use crate::engine::{run_trial, trial_rng};
use crate::rates::RatePrediction;

/// Absolute share of the comparison band that covers floating-point noise:
/// rounds where every trial produces the same potential (t = 0, fully
/// corrupted dynamics, one-shot mixing) have stderr ~ 0 and a few-ulp
/// summation residue that a bare z-test would flag.
const NOISE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MonteCarloError {
    #[error("at least 2 trials are required, got {0}")]
    TooFewTrials(u64),
}

/// Per-round aggregate over all trials.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundStats {
    pub round: u32,
    pub mean_phi: f64,
    pub sample_std: f64,
    pub stderr: f64,
    pub trials: u64,
}

/// Per-round Monte Carlo statistics of the potential, with the inputs that
/// reproduce them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentResult {
    pub config: MixConfig,
    pub rounds: Vec<RoundStats>,
    pub trials: u64,
    pub master_seed: u64,
}

/// Neumaier compensated sum in the iteration order of `values`.
fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut compensation = 0.0f64;
    for value in values {
        let t = sum + value;
        if sum.abs() >= value.abs() {
            compensation += (sum - t) + value;
        } else {
            compensation += (value - t) + sum;
        }
        sum = t;
    }
    sum + compensation
}

/// Runs `trials` independent trajectories with derived per-trial seeds and
/// aggregates the potential per round. Deterministic given
/// `(config, rounds, trials, master_seed)`.
pub fn run_experiment(
    config: &MixConfig,
    rounds: u32,
    trials: u64,
    master_seed: u64,
) -> Result<ExperimentResult, MonteCarloError> {
    if trials < 2 {
        return Err(MonteCarloError::TooFewTrials(trials));
    }
    let trajectories: Vec<Vec<f64>> = (0..trials)
        .into_par_iter()
        .map(|i| run_trial(config, rounds, &mut trial_rng(master_seed, i)).phis)
        .collect();

    let stats = (0..=rounds)
        .map(|round| {
            let column = || trajectories.iter().map(|phis| phis[round as usize]);
            let mean = compensated_sum(column()) / trials as f64;
            let variance =
                compensated_sum(column().map(|x| (x - mean) * (x - mean))) / (trials - 1) as f64;
            let sample_std = variance.max(0.0).sqrt();
            RoundStats {
                round,
                mean_phi: mean,
                sample_std,
                stderr: sample_std / (trials as f64).sqrt(),
                trials,
            }
        })
        .collect();

    Ok(ExperimentResult {
        config: *config,
        rounds: stats,
        trials,
        master_seed,
    })
}

/// One round of empirical-vs-predicted comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub round: u32,
    pub empirical: f64,
    pub predicted: f64,
    pub z_score: f64,
    pub within_3_sigma: bool,
}

/// Comparison table plus the overall verdict: all rounds whose prediction
/// sits above the noise floor (predicted >= 10 stderr) must be within the
/// band.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoryComparison {
    pub rows: Vec<ComparisonRow>,
    pub pass: bool,
}

/// Compares per-round empirical means against `(1-rate)^t phi0`.
///
/// The band is `3 stderr` plus a `1e-12`-relative floor for rounds where the
/// dynamics are exact and stderr is pure rounding residue. Rounds with
/// `predicted < 10 stderr` are shown but excluded from the pass flag
/// (signal below the sampling noise).
pub fn compare_to_theory(result: &ExperimentResult, prediction: &RatePrediction) -> TheoryComparison {
    let mut pass = true;
    let rows = result
        .rounds
        .iter()
        .map(|stats| {
            let predicted = prediction.predicted_phi(stats.round);
            let diff = stats.mean_phi - predicted;
            let floor = NOISE_FLOOR * predicted.abs().max(1.0);
            let within_3_sigma = diff.abs() <= 3.0 * stats.stderr + floor;
            let z_score = if stats.stderr > 0.0 {
                diff / stats.stderr
            } else if diff.abs() <= floor {
                0.0
            } else {
                diff.signum() * f64::INFINITY
            };
            if predicted >= 10.0 * stats.stderr && !within_3_sigma {
                pass = false;
            }
            ComparisonRow {
                round: stats.round,
                empirical: stats.mean_phi,
                predicted,
                z_score,
                within_3_sigma,
            }
        })
        .collect();
    TheoryComparison { rows, pass }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::AssignmentMode::ExactPartition;
    use crate::rates::{self, rate_to_f64};

    fn cfg(n: u64, k: u64, s: u64, f: u64) -> MixConfig {
        MixConfig::new(n, k, s, f, ExactPartition).unwrap()
    }

    #[test]
    fn rejects_degenerate_trial_counts() {
        assert_eq!(
            run_experiment(&cfg(4, 2, 2, 0), 1, 1, 0),
            Err(MonteCarloError::TooFewTrials(1))
        );
    }

    #[test]
    fn single_honest_server_mixes_in_one_round() {
        let result = run_experiment(&cfg(16, 16, 1, 0), 1, 50, 11).unwrap();
        assert_eq!(result.rounds[1].mean_phi, 0.0);
        assert_eq!(result.rounds[1].sample_std, 0.0);
    }

    #[test]
    fn fully_corrupted_dynamics_are_constant() {
        let result = run_experiment(&cfg(8, 2, 0, 0), 6, 64, 3).unwrap();
        let phi0 = 1.0 - 1.0 / 8.0;
        for stats in &result.rounds {
            assert_eq!(stats.mean_phi, phi0);
            assert_eq!(stats.sample_std, 0.0);
        }
        let prediction = RatePrediction::new(0.0, phi0).unwrap();
        let cmp = compare_to_theory(&result, &prediction);
        assert!(cmp.pass);
        assert!(cmp.rows.iter().all(|r| r.z_score == 0.0 && r.within_3_sigma));
    }

    #[test]
    fn experiment_is_bit_reproducible() {
        let config = cfg(16, 4, 3, 1);
        let a = run_experiment(&config, 8, 200, 99).unwrap();
        let b = run_experiment(&config, 8, 200, 99).unwrap();
        assert_eq!(a, b);
        let c = run_experiment(&config, 8, 200, 100).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn aggregation_is_worker_count_independent() {
        let config = cfg(16, 4, 4, 0);
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| run_experiment(&config, 6, 300, 5).unwrap());
        let many = rayon::ThreadPoolBuilder::new()
            .num_threads(8)
            .build()
            .unwrap()
            .install(|| run_experiment(&config, 6, 300, 5).unwrap());
        assert_eq!(single, many);
    }

    #[test]
    fn mean_phi_is_non_increasing() {
        let result = run_experiment(&cfg(32, 4, 6, 2), 10, 500, 21).unwrap();
        for pair in result.rounds.windows(2) {
            assert!(pair[1].mean_phi <= pair[0].mean_phi + 1e-12);
            assert!(pair[1].stderr >= 0.0);
            assert!((pair[1].stderr - pair[1].sample_std / (500f64).sqrt()).abs() < 1e-18);
        }
    }

    #[test]
    fn synthetic_perfect_match_scores_zero() {
        let phi0 = 0.75;
        let prediction = RatePrediction::new(0.5, phi0).unwrap();
        let result = ExperimentResult {
            config: cfg(4, 2, 2, 0),
            rounds: (0..4)
                .map(|round| RoundStats {
                    round,
                    mean_phi: prediction.predicted_phi(round),
                    sample_std: 0.0,
                    stderr: 0.0,
                    trials: 100,
                })
                .collect(),
            trials: 100,
            master_seed: 0,
        };
        let cmp = compare_to_theory(&result, &prediction);
        assert!(cmp.pass);
        assert!(cmp.rows.iter().all(|r| r.z_score == 0.0));
    }

    #[test]
    fn uniform_configuration_tracks_its_rate() {
        let config = cfg(64, 8, 8, 0);
        let result = run_experiment(&config, 5, 4000, 7).unwrap();
        let rate = rate_to_f64(&rates::rate_uniform(64, 8).unwrap());
        let prediction = RatePrediction::new(rate, 1.0 - 1.0 / 64.0).unwrap();
        let cmp = compare_to_theory(&result, &prediction);
        assert!(cmp.pass, "rows: {:#?}", cmp.rows);
    }

    #[test]
    fn detects_a_wrong_rate() {
        let config = cfg(64, 8, 8, 0);
        let result = run_experiment(&config, 5, 4000, 7).unwrap();
        let prediction = RatePrediction::new(0.5, 1.0 - 1.0 / 64.0).unwrap();
        let cmp = compare_to_theory(&result, &prediction);
        assert!(!cmp.pass);
    }
}
