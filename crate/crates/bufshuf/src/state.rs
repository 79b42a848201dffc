//! The adversary's belief vector and one round's card-to-server assignment.

use thiserror::Error;

use crate::config::MixConfig;

/// Relative tolerance for the sum-to-one invariant. Sized so that honest
/// floating-point drift over ~10^3 rounds stays inside it; anything larger
/// indicates a bug.
pub const SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StateError {
    #[error("weight w[{index}] = {value} is outside [0, 1]")]
    WeightOutOfRange { index: usize, value: f64 },
    #[error("weights sum to {sum}, expected 1 within relative tolerance {SUM_TOLERANCE}")]
    BadSum { sum: f64 },
    #[error("a belief state needs at least one weight")]
    Empty,
    #[error("assignment is inconsistent: {0}")]
    BadAssignment(String),
}

/// The adversary's distribution over which unmarked card is the tracked one.
///
/// One weight per unmarked card; weights are probabilities summing to 1.
/// Immutable after construction: round updates produce a new state.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefState {
    weights: Vec<f64>,
    round: u32,
}

impl BeliefState {
    /// Builds a state, checking the probability invariants.
    pub fn new(weights: Vec<f64>, round: u32) -> Result<Self, StateError> {
        if weights.is_empty() {
            return Err(StateError::Empty);
        }
        for (index, &value) in weights.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(StateError::WeightOutOfRange { index, value });
            }
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(StateError::BadSum { sum });
        }
        Ok(BeliefState { weights, round })
    }

    /// Internal constructor for engine-produced states. The update rule
    /// preserves the invariants, so only debug builds re-check them.
    pub(crate) fn from_update(weights: Vec<f64>, round: u32) -> Self {
        debug_assert!(!weights.is_empty());
        debug_assert!(weights.iter().all(|w| (0.0..=1.0).contains(w)));
        debug_assert!((weights.iter().sum::<f64>() - 1.0).abs() <= SUM_TOLERANCE);
        BeliefState { weights, round }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Number of unmarked cards, `n - f`.
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Rounds applied so far.
    pub fn round(&self) -> u32 {
        self.round
    }
}

/// The adversary's initial knowledge: the tracked card (unmarked index 0)
/// holds all the weight.
pub fn initial_state(config: &MixConfig) -> BeliefState {
    let len = config.unmarked() as usize;
    let mut weights = vec![0.0; len];
    weights[0] = 1.0;
    BeliefState::from_update(weights, 0)
}

/// One round's card-to-server mapping plus per-server honesty and per-card
/// marked flags.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundAssignment {
    /// Server index for each card, `0..m`.
    group_of: Vec<u32>,
    /// Per-server flag; honest servers shuffle privately.
    honest: Vec<bool>,
    /// Per-card flag; marked cards are adversary-tracked and carry no weight.
    marked: Vec<bool>,
}

impl RoundAssignment {
    pub fn new(
        group_of: Vec<u32>,
        honest: Vec<bool>,
        marked: Vec<bool>,
    ) -> Result<Self, StateError> {
        if group_of.len() != marked.len() {
            return Err(StateError::BadAssignment(format!(
                "{} cards mapped but {} marked flags",
                group_of.len(),
                marked.len()
            )));
        }
        let m = honest.len() as u32;
        if let Some(&g) = group_of.iter().find(|&&g| g >= m) {
            return Err(StateError::BadAssignment(format!(
                "card assigned to server {g} but only {m} servers exist"
            )));
        }
        Ok(RoundAssignment {
            group_of,
            honest,
            marked,
        })
    }

    pub fn card_count(&self) -> usize {
        self.group_of.len()
    }

    pub fn server_count(&self) -> usize {
        self.honest.len()
    }

    pub fn server_of(&self, card: usize) -> usize {
        self.group_of[card] as usize
    }

    pub fn is_honest(&self, server: usize) -> bool {
        self.honest[server]
    }

    pub fn is_marked(&self, card: usize) -> bool {
        self.marked[card]
    }

    pub fn unmarked_count(&self) -> usize {
        self.marked.iter().filter(|&&m| !m).count()
    }

    /// Cards held by each server.
    pub fn group_loads(&self) -> Vec<usize> {
        let mut loads = vec![0usize; self.server_count()];
        for &g in &self.group_of {
            loads[g as usize] += 1;
        }
        loads
    }
}
