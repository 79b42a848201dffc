//! Closed-form per-round convergence rates `E[dPhi/Phi]` and round-count
//! calculators.
//!
//! Every rate is computed as an exact rational (binomial coefficients grow
//! past 64 bits quickly) and converted to floating point only at the
//! interface via [`rate_to_f64`].
//!
//! The marked-input and combined settings ship in two variants each: the
//! closed form exactly as printed (`*_paper`) and a first-principles
//! re-derivation (`*_derived`). They disagree — e.g. (n=4, K=2, f=1) gives
//! 1/4 printed vs 1/2 derived — and the enumeration oracle in [`crate::oracle`]
//! arbitrates: the derived form is the one it confirms. Neither replaces the
//! other here; `verify-rates` reports both.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RateError {
    #[error("parameter out of range: {0}")]
    Range(String),
}

/// Which exponent the binomial-assignment load weight uses for the
/// complement factor `(1 - K/n)^e`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExponentPolicy {
    /// `e = J`, the expression as printed. The weights then sum to less
    /// than 1 over the loads, so this does not describe a distribution.
    AsPrinted,
    /// `e = n - J`, making the weight the Binomial(n, K/n) mass at load J.
    /// Matches the exhaustive-assignment oracle when f = 0.
    Corrected,
}

/// Binomial coefficient C(n, k) in arbitrary precision; 0 when k > n.
pub fn choose(n: u64, k: u64) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let k = k.min(n - k);
    let mut result = BigInt::one();
    for i in 0..k {
        result = result * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    result
}

fn int(x: u64) -> BigInt {
    BigInt::from(x)
}

fn ratio(num: BigInt, den: BigInt) -> BigRational {
    BigRational::new(num, den)
}

/// Converts an exact rate to floating point at the interface boundary.
pub fn rate_to_f64(rate: &BigRational) -> f64 {
    rate.to_f64().expect("rate in [0,1] converts to f64")
}

fn check_nk(n: u64, k: u64) -> Result<(), RateError> {
    if k < 2 {
        return Err(RateError::Range(format!("k must be at least 2, got {k}")));
    }
    if k > n {
        return Err(RateError::Range(format!("k={k} exceeds n={n}")));
    }
    Ok(())
}

/// Checks K | n and returns the server count M = n/K.
fn server_count(n: u64, k: u64) -> Result<u64, RateError> {
    if n % k != 0 {
        return Err(RateError::Range(format!("k={k} does not divide n={n}")));
    }
    Ok(n / k)
}

fn check_s(s: u64, m: u64) -> Result<(), RateError> {
    if s > m {
        return Err(RateError::Range(format!(
            "honest server count s={s} exceeds server count m={m}"
        )));
    }
    Ok(())
}

fn check_f(n: u64, f: u64) -> Result<(), RateError> {
    if f > n - 2 {
        return Err(RateError::Range(format!(
            "marked card count f={f} exceeds n-2={}",
            n - 2
        )));
    }
    Ok(())
}

/// Per-round rate with all servers honest and no marked cards:
/// `n(K-1) / (K(n-1))`. Equals 1 at K = n (one round mixes completely),
/// and `1 - rate < 1/K` always.
pub fn rate_uniform(n: u64, k: u64) -> Result<BigRational, RateError> {
    check_nk(n, k)?;
    Ok(ratio(int(n) * int(k - 1), int(k) * int(n - 1)))
}

/// Rate with only `s` of the `M = n/K` servers honest: `s(K-1) / (n-1)`.
/// Reduces to [`rate_uniform`] at s = M.
pub fn rate_corrupt_servers(n: u64, k: u64, s: u64) -> Result<BigRational, RateError> {
    check_nk(n, k)?;
    let m = server_count(n, k)?;
    check_s(s, m)?;
    Ok(ratio(int(s) * int(k - 1), int(n - 1)))
}

/// Inner hypergeometric sum of the printed marked-input rate:
/// `sum_{K'=2}^{K} C(K,K') C(n-K, n-f-K') (K'-1)/K'`.
fn printed_inner_sum(n: u64, k: u64, f: u64) -> BigRational {
    let mut sum = BigRational::zero();
    for kp in 2..=k {
        let Some(rest) = (n - f).checked_sub(kp) else {
            break;
        };
        let c = choose(k, kp) * choose(n - k, rest);
        if c.is_zero() {
            continue;
        }
        sum += ratio(c * int(kp - 1), int(kp));
    }
    sum
}

/// Marked-input rate in its printed closed form, evaluated exactly as
/// written:
///
/// `(n-f) / ((n-1) C(n,f)) * sum_{K'=2}^{K} C(K,K') C(n-K, n-f-K') (K'-1)/K'`
///
/// Reduces to [`rate_uniform`] at f = 0. On small instances it does NOT
/// reproduce brute-force enumeration (see [`rate_fake_derived`] and the
/// oracle); it is kept verbatim so the discrepancy stays visible.
pub fn rate_fake_paper(n: u64, k: u64, f: u64) -> Result<BigRational, RateError> {
    check_nk(n, k)?;
    server_count(n, k)?;
    check_f(n, f)?;
    let sum = printed_inner_sum(n, k, f);
    Ok(ratio(int(n - f), int(n - 1) * choose(n, f)) * sum)
}

/// Marked-input rate re-derived from first principles. With
/// `H(K') = C(n-f,K') C(f,K-K') / C(n,K)` the probability that a given group
/// holds exactly K' unmarked cards:
///
/// `sum_{K'=2}^{K} (n/K) H(K') (K'-1) / (n-f-1)`
///
/// Reduces to [`rate_uniform`] at f = 0 and matches the enumeration oracle
/// exactly on every instance small enough to enumerate.
pub fn rate_fake_derived(n: u64, k: u64, f: u64) -> Result<BigRational, RateError> {
    check_nk(n, k)?;
    let m = server_count(n, k)?;
    check_f(n, f)?;
    let cnk = choose(n, k);
    let mut sum = BigRational::zero();
    for kp in 2..=k.min(n - f) {
        let h = choose(n - f, kp) * choose(f, k - kp);
        if h.is_zero() {
            continue;
        }
        sum += ratio(int(m) * h * int(kp - 1), cnk.clone() * int(n - f - 1));
    }
    Ok(sum)
}

/// Combined corrupted-servers + marked-inputs rate, printed form:
///
/// `sK(n-f) / (n(n-1) C(n,f)) * sum_{K'=2}^{K} C(K,K') C(n-K, n-f-K') (K'-1)/K'`
///
/// Reduces to [`rate_fake_paper`] at s = M and to [`rate_corrupt_servers`]
/// at f = 0.
pub fn rate_combined_paper(n: u64, k: u64, s: u64, f: u64) -> Result<BigRational, RateError> {
    check_nk(n, k)?;
    let m = server_count(n, k)?;
    check_s(s, m)?;
    check_f(n, f)?;
    let sum = printed_inner_sum(n, k, f);
    Ok(ratio(
        int(s) * int(k) * int(n - f),
        int(n) * int(n - 1) * choose(n, f),
    ) * sum)
}

/// Combined rate from first principles: the honest-group fraction `sK/n`
/// times [`rate_fake_derived`]. Reduces to [`rate_fake_derived`] at s = M
/// and to [`rate_corrupt_servers`] at f = 0; matches the oracle exactly.
pub fn rate_combined_derived(n: u64, k: u64, s: u64, f: u64) -> Result<BigRational, RateError> {
    let m = server_count(n, k)?;
    check_s(s, m)?;
    let fake = rate_fake_derived(n, k, f)?;
    Ok(ratio(int(s) * int(k), int(n)) * fake)
}

/// Rate for the binomial assignment mode: server loads J are weighted by
/// `C(n,J) (K/n)^J (1-K/n)^e` with `e` chosen by `policy`, and each load
/// contributes its hypergeometric marked-input term:
///
/// `(n-f) * sum_{J=2}^{n} C(n,J) p^J (1-p)^e (sJ/n)
///     * sum_{K'=2}^{J} [C(n-f,K') C(f,J-K') / C(n,J)] (K'-1)/(K'(n-1))`
///
/// Under [`ExponentPolicy::Corrected`] and f = 0 this equals the exhaustive
/// M^n-assignment oracle; under [`ExponentPolicy::AsPrinted`] the load
/// weights do not even sum to 1. Both are exposed, neither is asserted
/// correct for f > 0.
pub fn rate_binomial(
    n: u64,
    k: u64,
    s: u64,
    f: u64,
    policy: ExponentPolicy,
) -> Result<BigRational, RateError> {
    check_nk(n, k)?;
    let m = server_count(n, k)?;
    check_s(s, m)?;
    check_f(n, f)?;
    let exp_of = |x: u64| -> Result<i32, RateError> {
        i32::try_from(x).map_err(|_| RateError::Range(format!("n={n} too large for exponent")))
    };
    let p = ratio(int(k), int(n));
    let q = BigRational::one() - p.clone();

    let mut total = BigRational::zero();
    for j in 2..=n {
        let e = match policy {
            ExponentPolicy::AsPrinted => j,
            ExponentPolicy::Corrected => n - j,
        };
        let cnj = choose(n, j);
        let weight = ratio(cnj.clone(), BigInt::one()) * p.pow(exp_of(j)?) * q.pow(exp_of(e)?);
        if weight.is_zero() {
            continue;
        }
        let mut inner = BigRational::zero();
        for kp in 2..=j.min(n - f) {
            let h = choose(n - f, kp) * choose(f, j - kp);
            if h.is_zero() {
                continue;
            }
            inner += ratio(h * int(kp - 1), cnj.clone() * int(kp) * int(n - 1));
        }
        total += weight * ratio(int(s) * int(j), int(n)) * inner;
    }
    Ok(ratio(int(n - f), BigInt::one()) * total)
}

/// Expected potential after `t` rounds: `(1 - rate)^t * phi0`.
pub fn predicted_phi(rate: f64, t: u32, phi0: f64) -> f64 {
    (1.0 - rate).powi(t as i32) * phi0
}

/// A per-round rate together with the initial potential it decays from.
///
/// `phi0` is 1 when reproducing the `E[Phi(t)] <= K^{-t}` style bounds
/// (which use `Phi(0) < 1`) and the exact `1 - 1/(n-f)` when predicting
/// experiment curves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatePrediction {
    pub rate: f64,
    pub phi0: f64,
}

impl RatePrediction {
    pub fn new(rate: f64, phi0: f64) -> Result<Self, RateError> {
        if !(0.0..=1.0).contains(&rate) {
            return Err(RateError::Range(format!("rate {rate} outside [0, 1]")));
        }
        if !phi0.is_finite() || phi0 < 0.0 {
            return Err(RateError::Range(format!("phi0 {phi0} invalid")));
        }
        Ok(RatePrediction { rate, phi0 })
    }

    /// `(1 - rate)^t * phi0`, non-increasing in `t`.
    pub fn predicted_phi(&self, t: u32) -> f64 {
        predicted_phi(self.rate, t, self.phi0)
    }
}

/// Ceiling with a tiny downward nudge: the log ratio for e.g. rate = 1/2,
/// n = 256 must come out as the exact integer 8, and bare f64 logs can land
/// one ulp above it.
fn ceil_rounds(t: f64) -> u64 {
    (t - 1e-9).ceil().max(1.0) as u64
}

/// Rounds needed so the expected potential drops below `n^{-b}`:
/// `ceil(b ln n / ln(1/(1-rate)))`, and 1 when rate = 1.
///
/// For rate >= 1/2 this is at most `ceil(b log2 n)`; for
/// rate >= 1 - n^{-1/c} it is at most `b c`.
pub fn rounds_for_target(rate: f64, n: u64, b: f64) -> Result<u64, RateError> {
    if !(rate > 0.0) {
        return Err(RateError::Range(format!("rate must be positive, got {rate}")));
    }
    if rate > 1.0 {
        return Err(RateError::Range(format!("rate {rate} exceeds 1")));
    }
    if b < 1.0 {
        return Err(RateError::Range(format!("b must be at least 1, got {b}")));
    }
    if n < 2 {
        return Err(RateError::Range(format!("n must be at least 2, got {n}")));
    }
    if rate >= 1.0 {
        return Ok(1);
    }
    let t = b * (n as f64).ln() / (1.0 / (1.0 - rate)).ln();
    Ok(ceil_rounds(t))
}

/// Rounds after which `Phi(t) > n^{-b}` with probability at most `n^{-b}`:
/// twice [`rounds_for_target`], by Markov's inequality on
/// `E[Phi(2t)] <= n^{-2b}`.
pub fn markov_rounds(rate: f64, n: u64, b: f64) -> Result<u64, RateError> {
    Ok(2 * rounds_for_target(rate, n, b)?)
}
