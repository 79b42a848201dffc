//! Experiment configuration and validation.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// How cards are assigned to servers at the start of each round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AssignmentMode {
    /// Uniform permutation chunked into `M` consecutive groups of exactly `K`.
    #[serde(rename = "exact")]
    ExactPartition,
    /// Each card goes to an independently uniform server; group sizes are
    /// Binomial(n, K/n).
    #[serde(rename = "binomial")]
    BinomialAssignment,
}

impl fmt::Display for AssignmentMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AssignmentMode::ExactPartition => f.write_str("exact"),
            AssignmentMode::BinomialAssignment => f.write_str("binomial"),
        }
    }
}

impl FromStr for AssignmentMode {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        match s {
            "exact" => Ok(AssignmentMode::ExactPartition),
            "binomial" => Ok(AssignmentMode::BinomialAssignment),
            other => Err(ConfigError::Range(format!(
                "assignment must be `exact` or `binomial`, got `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    /// `K` does not divide `n`, so there is no whole number of servers.
    #[error("buffer size k={k} does not divide n={n}; server count m = n/k must be an integer")]
    Divisibility { n: u64, k: u64 },
    /// A parameter is outside its allowed range.
    #[error("parameter out of range: {0}")]
    Range(String),
}

/// Validated experiment parameters.
///
/// `m = n/k` is derived, honest servers are the last `s` server indices, and
/// marked cards are the last `f` card indices (the uniform assignment makes
/// any fixed choice equivalent).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MixConfig {
    n: u64,
    k: u64,
    m: u64,
    s: u64,
    f: u64,
    #[serde(rename = "assignment")]
    assignment_mode: AssignmentMode,
}

impl MixConfig {
    /// Validates raw parameters and derives the server count `m = n/k`.
    ///
    /// Errors: [`ConfigError::Divisibility`] when `k` does not divide `n`;
    /// [`ConfigError::Range`] when `k < 2`, `k > n`, `f > n-2`, or `s > m`.
    pub fn new(
        n: u64,
        k: u64,
        s: u64,
        f: u64,
        assignment_mode: AssignmentMode,
    ) -> Result<Self, ConfigError> {
        if k < 2 {
            return Err(ConfigError::Range(format!("k must be at least 2, got {k}")));
        }
        if k > n {
            return Err(ConfigError::Range(format!("k={k} exceeds n={n}")));
        }
        if n % k != 0 {
            return Err(ConfigError::Divisibility { n, k });
        }
        let m = n / k;
        if s > m {
            return Err(ConfigError::Range(format!(
                "honest server count s={s} exceeds server count m={m}"
            )));
        }
        // k >= 2 and k <= n imply n >= 2 here, so n - 2 cannot underflow.
        if f > n - 2 {
            return Err(ConfigError::Range(format!(
                "marked card count f={f} exceeds n-2={}",
                n - 2
            )));
        }
        Ok(MixConfig {
            n,
            k,
            m,
            s,
            f,
            assignment_mode,
        })
    }

    /// Total number of cards.
    pub fn n(&self) -> u64 {
        self.n
    }

    /// Cards per server in a round.
    pub fn k(&self) -> u64 {
        self.k
    }

    /// Number of servers, `n / k`.
    pub fn m(&self) -> u64 {
        self.m
    }

    /// Number of honest (non-corrupted) servers.
    pub fn s(&self) -> u64 {
        self.s
    }

    /// Number of adversary-marked cards.
    pub fn f(&self) -> u64 {
        self.f
    }

    /// Number of unmarked cards, `n - f`; the belief vector length.
    pub fn unmarked(&self) -> u64 {
        self.n - self.f
    }

    pub fn assignment_mode(&self) -> AssignmentMode {
        self.assignment_mode
    }
}

/// Validates raw parameters into a [`MixConfig`]. Alias for [`MixConfig::new`].
pub fn validate_config(
    n: u64,
    k: u64,
    s: u64,
    f: u64,
    assignment_mode: AssignmentMode,
) -> Result<MixConfig, ConfigError> {
    MixConfig::new(n, k, s, f, assignment_mode)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    use AssignmentMode::*;

    #[test]
    fn derives_server_count() {
        let cfg = MixConfig::new(16, 4, 4, 0, ExactPartition).unwrap();
        assert_eq!(cfg.m(), 4);
        assert_eq!(cfg.unmarked(), 16);
    }

    #[test]
    fn rejects_non_divisible_k() {
        assert_eq!(
            MixConfig::new(16, 5, 1, 0, ExactPartition),
            Err(ConfigError::Divisibility { n: 16, k: 5 })
        );
    }

    #[test]
    fn rejects_too_many_marked_cards() {
        // f <= n-2: at least two unmarked cards must remain.
        assert!(matches!(
            MixConfig::new(4, 2, 2, 3, ExactPartition),
            Err(ConfigError::Range(_))
        ));
        assert!(MixConfig::new(4, 2, 2, 2, ExactPartition).is_ok());
    }

    #[test]
    fn rejects_bad_k_and_s() {
        assert!(matches!(
            MixConfig::new(4, 1, 1, 0, ExactPartition),
            Err(ConfigError::Range(_))
        ));
        assert!(matches!(
            MixConfig::new(4, 8, 1, 0, ExactPartition),
            Err(ConfigError::Range(_))
        ));
        assert!(matches!(
            MixConfig::new(4, 2, 3, 0, ExactPartition),
            Err(ConfigError::Range(_))
        ));
    }

    #[test]
    fn binomial_mode_still_needs_integer_server_count() {
        assert_eq!(
            MixConfig::new(10, 4, 1, 0, BinomialAssignment),
            Err(ConfigError::Divisibility { n: 10, k: 4 })
        );
        assert!(MixConfig::new(8, 4, 2, 0, BinomialAssignment).is_ok());
    }

    #[test]
    fn assignment_mode_round_trips_through_strings() {
        assert_eq!("exact".parse::<AssignmentMode>().unwrap(), ExactPartition);
        assert_eq!(
            "binomial".parse::<AssignmentMode>().unwrap(),
            BinomialAssignment
        );
        assert!("riffle".parse::<AssignmentMode>().is_err());
    }

    proptest! {
        // Total: every raw input yields a config or a specific error, never a panic.
        #[test]
        fn validation_is_total(n in 0u64..10_000, k in 0u64..10_000, s in 0u64..10_000, f in 0u64..10_000) {
            match MixConfig::new(n, k, s, f, ExactPartition) {
                Ok(cfg) => {
                    prop_assert_eq!(cfg.m() * cfg.k(), cfg.n());
                    prop_assert!(cfg.k() >= 2 && cfg.k() <= cfg.n());
                    prop_assert!(cfg.s() <= cfg.m());
                    prop_assert!(cfg.f() <= cfg.n() - 2);
                }
                Err(ConfigError::Divisibility { .. }) => prop_assert!(k >= 2 && k <= n && n % k != 0),
                Err(ConfigError::Range(_)) => {
                    prop_assert!(k < 2 || k > n || (n % k == 0 && (s > n / k || f > n - 2)));
                }
            }
        }
    }
}
