//! Round execution: assignment sampling and the belief update.
//!
//! Each round is (sample a card-to-server assignment, apply the update):
//! honest servers replace the weights of their unmarked members by the group
//! mean, corrupted servers are the identity (the adversary undoes their
//! permutation), and marked cards never carry weight. Only the belief vector
//! evolves; card identities and the permutations themselves are never
//! simulated.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::config::{AssignmentMode, MixConfig};
use crate::metrics::{self, MetricReport};
use crate::state::{initial_state, BeliefState, RoundAssignment};

/// The trial generator: platform-stable, seedable, with independent streams.
pub type TrialRng = ChaCha8Rng;

/// Derives the generator for one trial from `(master_seed, trial_index)`.
/// All trials share the seed-derived key and differ in the stream id, so
/// their outputs never overlap.
pub fn trial_rng(master_seed: u64, trial_index: u64) -> TrialRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(trial_index);
    rng
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("state has {state_len} weights but the assignment has {unmarked} unmarked cards")]
    ShapeMismatch { state_len: usize, unmarked: usize },
}

fn honest_flags(config: &MixConfig) -> Vec<bool> {
    // Corrupted servers are the fixed prefix 0..m-s; the uniform assignment
    // makes any fixed placement equivalent.
    let m = config.m() as usize;
    let s = config.s() as usize;
    let mut flags = vec![false; m];
    flags[m - s..].iter_mut().for_each(|h| *h = true);
    flags
}

fn marked_flags(config: &MixConfig) -> Vec<bool> {
    let n = config.n() as usize;
    let f = config.f() as usize;
    let mut flags = vec![false; n];
    flags[n - f..].iter_mut().for_each(|m| *m = true);
    flags
}

/// Uniformly random partition of the n cards into M consecutive groups of K:
/// a uniform shuffle of the card indices chunked into blocks of K. The
/// adversary sees the permutation, so only group membership matters.
pub fn sample_partition(config: &MixConfig, rng: &mut impl Rng) -> RoundAssignment {
    debug_assert_eq!(config.assignment_mode(), AssignmentMode::ExactPartition);
    let n = config.n() as usize;
    let k = config.k() as usize;
    let mut cards: Vec<u32> = (0..n as u32).collect();
    cards.shuffle(rng);
    let mut group_of = vec![0u32; n];
    for (server, chunk) in cards.chunks(k).enumerate() {
        for &card in chunk {
            group_of[card as usize] = server as u32;
        }
    }
    RoundAssignment::new(group_of, honest_flags(config), marked_flags(config))
        .expect("sampled assignment is well formed")
}

/// Each card goes to an independently uniform server; group sizes are
/// Binomial(n, K/n). Servers holding fewer than two unmarked cards are
/// no-ops for the update.
pub fn sample_binomial_assignment(config: &MixConfig, rng: &mut impl Rng) -> RoundAssignment {
    debug_assert_eq!(
        config.assignment_mode(),
        AssignmentMode::BinomialAssignment
    );
    let n = config.n() as usize;
    let m = config.m() as u32;
    let group_of: Vec<u32> = (0..n).map(|_| rng.gen_range(0..m)).collect();
    RoundAssignment::new(group_of, honest_flags(config), marked_flags(config))
        .expect("sampled assignment is well formed")
}

/// Applies one round to a belief state.
///
/// For every honest server, the weights of its unmarked members are replaced
/// by their mean; corrupted servers leave weights unchanged. Total weight is
/// preserved and the potential cannot increase.
pub fn apply_round(
    state: &BeliefState,
    assignment: &RoundAssignment,
) -> Result<BeliefState, EngineError> {
    let unmarked = assignment.unmarked_count();
    if state.len() != unmarked {
        return Err(EngineError::ShapeMismatch {
            state_len: state.len(),
            unmarked,
        });
    }

    let servers = assignment.server_count();
    let mut sum = vec![0.0f64; servers];
    let mut count = vec![0usize; servers];
    // Weight index of an unmarked card = its rank among unmarked cards.
    let mut weight_index = Vec::with_capacity(unmarked);
    for card in 0..assignment.card_count() {
        if assignment.is_marked(card) {
            continue;
        }
        let server = assignment.server_of(card);
        sum[server] += state.weights()[weight_index.len()];
        count[server] += 1;
        weight_index.push((card, server));
    }

    let mut weights = state.weights().to_vec();
    for (i, &(_, server)) in weight_index.iter().enumerate() {
        if assignment.is_honest(server) && count[server] >= 2 {
            weights[i] = sum[server] / count[server] as f64;
        }
    }
    Ok(BeliefState::from_update(weights, state.round() + 1))
}

/// One trial's record: the potential after every round (starting with the
/// initial state), optional per-round metric reports, and the final state.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub phis: Vec<f64>,
    pub reports: Option<Vec<MetricReport>>,
    pub final_state: BeliefState,
}

/// Runs `rounds` successive (sample, update) steps from the initial state,
/// recording the potential after every round. `phis[t]` is `Phi(t)`.
pub fn run_trial(config: &MixConfig, rounds: u32, rng: &mut impl Rng) -> Trajectory {
    run_trial_inner(config, rounds, rng, false)
}

/// Like [`run_trial`] but also records a full [`MetricReport`] per round.
pub fn run_trial_with_reports(config: &MixConfig, rounds: u32, rng: &mut impl Rng) -> Trajectory {
    run_trial_inner(config, rounds, rng, true)
}

fn run_trial_inner(
    config: &MixConfig,
    rounds: u32,
    rng: &mut impl Rng,
    record_reports: bool,
) -> Trajectory {
    let mut state = initial_state(config);
    let mut phis = Vec::with_capacity(rounds as usize + 1);
    let mut reports = record_reports.then(|| Vec::with_capacity(rounds as usize + 1));
    phis.push(metrics::phi(&state));
    if let Some(reports) = reports.as_mut() {
        reports.push(MetricReport::from_state(&state));
    }
    for _ in 0..rounds {
        let assignment = match config.assignment_mode() {
            AssignmentMode::ExactPartition => sample_partition(config, rng),
            AssignmentMode::BinomialAssignment => sample_binomial_assignment(config, rng),
        };
        state = apply_round(&state, &assignment).expect("trial state matches its config");
        phis.push(metrics::phi(&state));
        if let Some(reports) = reports.as_mut() {
            reports.push(MetricReport::from_state(&state));
        }
    }
    Trajectory {
        phis,
        reports,
        final_state: state,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::AssignmentMode::{BinomialAssignment, ExactPartition};
    use proptest::prelude::*;
    use statrs::distribution::{Binomial, ChiSquared, ContinuousCDF, Discrete};
    use std::collections::HashMap;

    fn cfg(n: u64, k: u64, s: u64, f: u64) -> MixConfig {
        MixConfig::new(n, k, s, f, ExactPartition).unwrap()
    }

    fn binomial_cfg(n: u64, k: u64, s: u64, f: u64) -> MixConfig {
        MixConfig::new(n, k, s, f, BinomialAssignment).unwrap()
    }

    #[test]
    fn two_cards_always_share_the_single_group() {
        let config = cfg(2, 2, 1, 0);
        let mut rng = trial_rng(1, 0);
        for _ in 0..50 {
            let a = sample_partition(&config, &mut rng);
            assert_eq!(a.server_of(0), 0);
            assert_eq!(a.server_of(1), 0);
        }
    }

    #[test]
    fn each_pairing_of_four_cards_is_equally_likely() {
        // The 3 unordered pairings of 4 cards, identified by card 0's partner.
        let config = cfg(4, 2, 2, 0);
        let mut rng = trial_rng(2, 0);
        let samples = 100_000;
        let mut counts = [0u64; 4];
        for _ in 0..samples {
            let a = sample_partition(&config, &mut rng);
            let partner = (1..4).find(|&c| a.server_of(c) == a.server_of(0)).unwrap();
            counts[partner] += 1;
        }
        // expected 33333 per pairing, sigma ~ 149; allow 5 sigma.
        for partner in 1..4 {
            let diff = counts[partner] as f64 - samples as f64 / 3.0;
            assert!(diff.abs() < 750.0, "pairing counts skewed: {counts:?}");
        }
    }

    #[test]
    fn pair_cooccurrence_frequency_matches_hypergeometric() {
        // Pr(two fixed cards share a group) = (K-1)/(n-1).
        let config = cfg(12, 3, 4, 0);
        let mut rng = trial_rng(3, 0);
        let samples = 100_000;
        let mut together = 0u64;
        for _ in 0..samples {
            let a = sample_partition(&config, &mut rng);
            if a.server_of(0) == a.server_of(1) {
                together += 1;
            }
        }
        let p = 2.0 / 11.0;
        let sigma = (samples as f64 * p * (1.0 - p)).sqrt();
        let diff = together as f64 - samples as f64 * p;
        assert!(diff.abs() < 5.0 * sigma, "co-occurrence off: {together}");
    }

    #[test]
    fn single_server_binomial_assignment_is_total() {
        let config = binomial_cfg(16, 16, 1, 0);
        let mut rng = trial_rng(4, 0);
        let a = sample_binomial_assignment(&config, &mut rng);
        assert!((0..16).all(|c| a.server_of(c) == 0));
    }

    #[test]
    fn binomial_group_sizes_have_the_right_mean() {
        let config = binomial_cfg(256, 16, 16, 0);
        let mut rng = trial_rng(5, 0);
        let samples = 10_000;
        let mut total = 0u64;
        for _ in 0..samples {
            let a = sample_binomial_assignment(&config, &mut rng);
            total += a.group_loads()[0] as u64;
        }
        let mean = total as f64 / samples as f64;
        // load ~ Binomial(256, 1/16): mean 16, sigma 3.87; stderr 0.0387.
        assert!((mean - 16.0).abs() < 0.2, "mean load {mean}");
    }

    #[test]
    fn binomial_group_sizes_pass_goodness_of_fit() {
        let config = binomial_cfg(256, 16, 16, 0);
        let mut rng = trial_rng(6, 0);
        let samples = 10_000usize;
        let mut histogram: HashMap<usize, u64> = HashMap::new();
        for _ in 0..samples {
            let load = sample_binomial_assignment(&config, &mut rng).group_loads()[0];
            *histogram.entry(load).or_default() += 1;
        }
        // Chi-square against exact Binomial(256, 1/16) masses, merging the
        // tails so every bin expects at least 5 samples.
        let dist = Binomial::new(1.0 / 16.0, 256).unwrap();
        let mut bins: Vec<(f64, u64)> = Vec::new();
        let mut tail_expected = 0.0;
        let mut tail_observed = 0u64;
        for load in 0..=256usize {
            let expected = dist.pmf(load as u64) * samples as f64;
            let observed = histogram.get(&load).copied().unwrap_or(0);
            if expected < 5.0 {
                tail_expected += expected;
                tail_observed += observed;
            } else {
                bins.push((expected, observed));
            }
        }
        bins.push((tail_expected, tail_observed));
        let stat: f64 = bins
            .iter()
            .map(|&(e, o)| (o as f64 - e).powi(2) / e)
            .sum();
        let dof = bins.len() as f64 - 1.0;
        let threshold = ChiSquared::new(dof).unwrap().inverse_cdf(0.999);
        assert!(
            stat < threshold,
            "chi-square {stat:.2} exceeds {threshold:.2} with {dof} dof"
        );
    }

    #[test]
    fn averaging_two_cards() {
        let state = BeliefState::new(vec![1.0, 0.0], 0).unwrap();
        let a = RoundAssignment::new(vec![0, 0], vec![true], vec![false, false]).unwrap();
        let next = apply_round(&state, &a).unwrap();
        assert_eq!(next.weights(), &[0.5, 0.5]);
        assert_eq!(next.round(), 1);
    }

    #[test]
    fn averaging_is_per_group() {
        let state = BeliefState::new(vec![1.0, 0.0, 0.0, 0.0], 0).unwrap();
        let a = RoundAssignment::new(vec![0, 0, 1, 1], vec![true, true], vec![false; 4]).unwrap();
        assert_eq!(
            apply_round(&state, &a).unwrap().weights(),
            &[0.5, 0.5, 0.0, 0.0]
        );
    }

    #[test]
    fn corrupted_server_is_identity() {
        let state = BeliefState::new(vec![1.0, 0.0, 0.0, 0.0], 0).unwrap();
        let a = RoundAssignment::new(vec![0, 0, 1, 1], vec![false, true], vec![false; 4]).unwrap();
        assert_eq!(
            apply_round(&state, &a).unwrap().weights(),
            &[1.0, 0.0, 0.0, 0.0]
        );
    }

    #[test]
    fn lone_unmarked_card_is_not_averaged() {
        // Card 3 marked; group {0,3} has one unmarked card, so no averaging
        // reaches the tracked card.
        let state = BeliefState::new(vec![1.0, 0.0, 0.0], 0).unwrap();
        let a = RoundAssignment::new(
            vec![0, 1, 1, 0],
            vec![true, true],
            vec![false, false, false, true],
        )
        .unwrap();
        assert_eq!(apply_round(&state, &a).unwrap().weights(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let state = BeliefState::new(vec![1.0, 0.0], 0).unwrap();
        let a = RoundAssignment::new(vec![0, 0, 1, 1], vec![true, true], vec![false; 4]).unwrap();
        assert_eq!(
            apply_round(&state, &a),
            Err(EngineError::ShapeMismatch {
                state_len: 2,
                unmarked: 4
            })
        );
    }

    #[test]
    fn zero_round_trial_records_initial_phi() {
        let config = cfg(8, 2, 4, 0);
        let t = run_trial(&config, 0, &mut trial_rng(7, 0));
        assert_eq!(t.phis, vec![1.0 - 1.0 / 8.0]);
        assert_eq!(t.final_state.round(), 0);
    }

    #[test]
    fn one_honest_server_holding_everything_mixes_in_one_round() {
        let config = cfg(16, 16, 1, 0);
        let t = run_trial(&config, 1, &mut trial_rng(8, 0));
        assert_eq!(t.phis[1], 0.0);
        assert!(t.final_state.weights().iter().all(|&w| w == 1.0 / 16.0));
    }

    #[test]
    fn fully_corrupted_mixnet_never_mixes() {
        let config = cfg(4, 2, 0, 0);
        let t = run_trial(&config, 20, &mut trial_rng(9, 0));
        assert!(t.phis.iter().all(|&p| p == 0.75));
        assert_eq!(t.final_state.weights(), &[1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn trials_are_deterministic_in_config_and_seed() {
        let config = cfg(16, 4, 3, 1);
        let a = run_trial(&config, 12, &mut trial_rng(42, 3));
        let b = run_trial(&config, 12, &mut trial_rng(42, 3));
        assert_eq!(a, b);
        let c = run_trial(&config, 12, &mut trial_rng(42, 4));
        assert_ne!(a.phis, c.phis, "distinct streams should diverge");
    }

    #[test]
    fn trial_reports_align_with_phis() {
        let config = cfg(8, 4, 2, 0);
        let t = run_trial_with_reports(&config, 5, &mut trial_rng(10, 0));
        let reports = t.reports.as_ref().unwrap();
        assert_eq!(reports.len(), t.phis.len());
        for (phi, report) in t.phis.iter().zip(reports) {
            assert_eq!(*phi, report.phi);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn rounds_preserve_weight_and_never_raise_phi(
            seed in 0u64..1000,
            s in 0u64..=4,
            f in 0u64..=2,
            rounds in 0u32..30,
        ) {
            let config = MixConfig::new(8, 2, s, f, ExactPartition).unwrap();
            let mut rng = trial_rng(seed, 0);
            let mut state = initial_state(&config);
            let mut last_phi = metrics::phi(&state);
            for _ in 0..rounds {
                let a = sample_partition(&config, &mut rng);
                let next = apply_round(&state, &a).unwrap();
                let sum_before: f64 = state.weights().iter().sum();
                let sum_after: f64 = next.weights().iter().sum();
                prop_assert!((sum_before - sum_after).abs() <= 1e-12);
                prop_assert!(next.weights().iter().all(|&w| (0.0..=1.0).contains(&w)));
                let phi = metrics::phi(&next);
                prop_assert!(phi <= last_phi + 1e-12);
                last_phi = phi;
                state = next;
            }
            prop_assert!(BeliefState::new(state.weights().to_vec(), state.round()).is_ok());
        }

        #[test]
        fn binomial_rounds_preserve_invariants(seed in 0u64..500, rounds in 0u32..20) {
            let config = MixConfig::new(16, 4, 3, 1, BinomialAssignment).unwrap();
            let t = run_trial(&config, rounds, &mut trial_rng(seed, 1));
            let sum: f64 = t.final_state.weights().iter().sum();
            prop_assert!((sum - 1.0).abs() <= 1e-9);
            for pair in t.phis.windows(2) {
                prop_assert!(pair[1] <= pair[0] + 1e-12);
            }
        }
    }
}
