//! Anonymity measures on a belief state, all taken against the uniform
//! distribution over the `n - f` unmarked cards.

use serde::Serialize;

use crate::state::BeliefState;

/// Potential values this close below zero are rounding residue and clamp
/// to 0.
const PHI_CLAMP: f64 = 1e-12;

/// Support threshold: floating-point averaging never turns a nonzero weight
/// into exactly 0, and true zeros stay exactly 0, so anything above this is
/// genuine support and anything below is structural zero.
const SUPPORT_THRESHOLD: f64 = 1e-15;

/// Slack allowed when checking the inter-metric inequalities.
const INEQUALITY_SLACK: f64 = 1e-12;

/// Sum-of-squares potential: `sum(w_i^2) - 1/(n-f)`, the squared L2 distance
/// from uniform. Zero exactly on the uniform state.
pub fn phi(state: &BeliefState) -> f64 {
    let raw = state.weights().iter().map(|w| w * w).sum::<f64>() - 1.0 / state.len() as f64;
    if raw < 0.0 && raw > -PHI_CLAMP {
        0.0
    } else {
        raw
    }
}

/// Maximum difference from uniform (L-infinity distance): `max_i |w_i - 1/(n-f)|`.
pub fn alpha(state: &BeliefState) -> f64 {
    let u = 1.0 / state.len() as f64;
    state
        .weights()
        .iter()
        .map(|w| (w - u).abs())
        .fold(0.0, f64::max)
}

/// Variation distance from uniform: `(1/2) sum_i |w_i - 1/(n-f)|`.
pub fn beta(state: &BeliefState) -> f64 {
    let u = 1.0 / state.len() as f64;
    0.5 * state.weights().iter().map(|w| (w - u).abs()).sum::<f64>()
}

/// The largest belief weight, `max_i w_i`. Its minimum is `1/(n-f)` on the
/// uniform state, not 0; the reciprocal is the effective anonymity-set size.
pub fn anon_prime(state: &BeliefState) -> f64 {
    state.weights().iter().copied().fold(0.0, f64::max)
}

/// Effective anonymity-set size, `1 / anon_prime`.
pub fn anon(state: &BeliefState) -> f64 {
    1.0 / anon_prime(state)
}

/// Relative entropy to uniform in bits: `sum_{w_i > 0} w_i log2((n-f) w_i)`,
/// with the convention `0 log 0 = 0`. Ranges from 0 (uniform) to
/// `log2(n-f)` (point mass).
pub fn relative_entropy_bits(state: &BeliefState) -> f64 {
    let len = state.len() as f64;
    state
        .weights()
        .iter()
        .filter(|&&w| w > 0.0)
        .map(|&w| w * (len * w).log2())
        .sum()
}

/// Number of positions the tracked card could still occupy: weights above
/// the structural-zero threshold.
pub fn k_support(state: &BeliefState) -> usize {
    state
        .weights()
        .iter()
        .filter(|&&w| w > SUPPORT_THRESHOLD)
        .count()
}

/// All anonymity measures evaluated on one belief state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    pub phi: f64,
    pub alpha: f64,
    pub beta: f64,
    pub anon_prime: f64,
    pub anon: f64,
    pub rel_entropy_bits: f64,
    pub k_support: usize,
}

impl MetricReport {
    pub fn from_state(state: &BeliefState) -> Self {
        let anon_prime = anon_prime(state);
        MetricReport {
            phi: phi(state),
            alpha: alpha(state),
            beta: beta(state),
            anon_prime,
            anon: 1.0 / anon_prime,
            rel_entropy_bits: relative_entropy_bits(state),
            k_support: k_support(state),
        }
    }

    /// Header matching [`MetricReport::to_csv_row`].
    pub fn csv_header() -> &'static str {
        "phi,alpha,beta,anon_prime,anon,rel_entropy_bits,k_support"
    }

    /// One CSV row, floats at full double precision.
    pub fn to_csv_row(&self) -> String {
        format!(
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
            self.phi,
            self.alpha,
            self.beta,
            self.anon_prime,
            self.anon,
            self.rel_entropy_bits,
            self.k_support
        )
    }
}

/// One inter-metric relation, evaluated as `lhs <= rhs` with slack.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InequalityCheck {
    pub name: &'static str,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Evaluates the six relations between the measures (with `n` meaning the
/// unmarked count `n - f`):
///
/// alpha <= sqrt(phi), beta <= sqrt(n phi)/2, anon' <= sqrt(phi) + 1/n,
/// sqrt(phi)/2 <= beta, sqrt(phi/n) <= alpha, anon' <= alpha + 1/n.
///
/// They hold for every valid belief state; a violation indicates a bug.
pub fn check_inequalities(state: &BeliefState) -> Vec<InequalityCheck> {
    let n = state.len() as f64;
    let phi = phi(state);
    let alpha = alpha(state);
    let beta = beta(state);
    let anon_prime = anon_prime(state);
    let sqrt_phi = phi.sqrt();

    let check = |name, lhs: f64, rhs: f64| InequalityCheck {
        name,
        lhs,
        rhs,
        holds: lhs <= rhs + INEQUALITY_SLACK,
    };

    vec![
        check("alpha <= sqrt(phi)", alpha, sqrt_phi),
        check("beta <= sqrt(n*phi)/2", beta, (n * phi).sqrt() / 2.0),
        check(
            "anon_prime <= sqrt(phi) + 1/n",
            anon_prime,
            sqrt_phi + 1.0 / n,
        ),
        check("sqrt(phi)/2 <= beta", sqrt_phi / 2.0, beta),
        check("sqrt(phi/n) <= alpha", (phi / n).sqrt(), alpha),
        check(
            "anon_prime <= alpha + 1/n",
            anon_prime,
            alpha + 1.0 / n,
        ),
    ]
}
