//! Exact brute-force ground truth.
//!
//! Enumerates every round outcome on small instances — all unordered
//! partitions into groups of K (or all M^n card-to-server maps in binomial
//! mode), crossed with all C(M,s) choices of which groups are honest — and
//! averages the potential drop in arbitrary-precision rational arithmetic.
//! No floating point anywhere in this module: this is the arbiter the
//! closed forms in [`crate::rates`] are judged against.

use itertools::Itertools;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use thiserror::Error;

use crate::config::{AssignmentMode, MixConfig};

/// Enumeration refuses instances with more partitions than this.
pub const DEFAULT_PARTITION_CAP: u64 = 1_000_000;

/// Combinatorial-explosion guard on the card count.
pub const MAX_ENUM_CARDS: u64 = 12;

/// Binomial-mode exhaustive enumeration visits all M^n assignments; only
/// feasible for very small instances.
pub const MAX_BINOMIAL_CARDS: u64 = 8;
pub const MAX_BINOMIAL_SERVERS: u64 = 3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("instance too large to enumerate: {0}")]
    TooLarge(String),
    #[error("k={k} does not divide n={n}")]
    NotDivisible { n: u64, k: u64 },
    #[error("E[dPhi]/Phi is not constant across probe states ({0} vs {1}); modeling bug")]
    NotConstant(BigRational, BigRational),
    #[error("need at least 3 probe states, got {0}")]
    NotEnoughProbes(usize),
    #[error("bad probe state: {0}")]
    BadProbe(String),
}

/// Number of unordered partitions of an n-set into n/k groups of k:
/// `n! / ((k!)^m m!)`.
pub fn partition_count(n: u64, k: u64) -> Result<BigInt, OracleError> {
    if k == 0 || n % k != 0 {
        return Err(OracleError::NotDivisible { n, k });
    }
    let factorial = |x: u64| (1..=x).map(BigInt::from).product::<BigInt>();
    let m = n / k;
    Ok(factorial(n) / (factorial(k).pow(m as u32) * factorial(m)))
}

/// Streams every unordered partition of `{0..n-1}` into groups of `k`,
/// each exactly once, with the default size cap.
pub fn enumerate_partitions(n: u64, k: u64) -> Result<PartitionIter, OracleError> {
    enumerate_partitions_with_cap(n, k, DEFAULT_PARTITION_CAP)
}

pub fn enumerate_partitions_with_cap(
    n: u64,
    k: u64,
    cap: u64,
) -> Result<PartitionIter, OracleError> {
    if n > MAX_ENUM_CARDS {
        return Err(OracleError::TooLarge(format!(
            "n={n} exceeds the enumeration limit {MAX_ENUM_CARDS}"
        )));
    }
    let count = partition_count(n, k)?;
    if count > BigInt::from(cap) {
        return Err(OracleError::TooLarge(format!(
            "{count} partitions exceed the cap {cap}"
        )));
    }
    Ok(PartitionIter::new(n as usize, k as usize))
}

struct Frame {
    pool: Vec<usize>,
    companions: itertools::Combinations<std::vec::IntoIter<usize>>,
}

impl Frame {
    fn new(pool: Vec<usize>, k: usize) -> Self {
        let rest = pool[1..].to_vec();
        Frame {
            pool,
            companions: rest.into_iter().combinations(k - 1),
        }
    }
}

/// Lazy partition stream. Each group is led by its smallest element and the
/// leaders appear in increasing order, so every unordered partition shows up
/// exactly once.
pub struct PartitionIter {
    k: usize,
    stack: Vec<Frame>,
    groups: Vec<Vec<usize>>,
}

impl PartitionIter {
    fn new(n: usize, k: usize) -> Self {
        let stack = if n == 0 {
            Vec::new()
        } else {
            vec![Frame::new((0..n).collect(), k)]
        };
        PartitionIter {
            k,
            stack,
            groups: Vec::new(),
        }
    }
}

impl Iterator for PartitionIter {
    type Item = Vec<Vec<usize>>;

    fn next(&mut self) -> Option<Self::Item> {
        while !self.stack.is_empty() {
            let depth = self.stack.len() - 1;
            let top = self.stack.last_mut().expect("stack is non-empty");
            match top.companions.next() {
                None => {
                    self.stack.pop();
                }
                Some(companions) => {
                    let mut group = Vec::with_capacity(self.k);
                    group.push(top.pool[0]);
                    group.extend(companions);
                    let remaining: Vec<usize> = top
                        .pool
                        .iter()
                        .copied()
                        .filter(|e| !group.contains(e))
                        .collect();
                    self.groups.truncate(depth);
                    self.groups.push(group);
                    if remaining.is_empty() {
                        return Some(self.groups.clone());
                    }
                    self.stack.push(Frame::new(remaining, self.k));
                }
            }
        }
        None
    }
}

/// Potential of an exact-rational weight vector over its own support size.
pub fn phi_rational(weights: &[BigRational]) -> BigRational {
    let sum_sq: BigRational = weights.iter().map(|w| w * w).sum();
    sum_sq - BigRational::new(BigInt::one(), BigInt::from(weights.len() as u64))
}

/// One round in exact arithmetic: honest groups average the weights of their
/// unmarked members (card indices below `unmarked`), everything else is
/// untouched.
fn apply_round_rational(
    weights: &[BigRational],
    groups: &[Vec<usize>],
    honest: &[bool],
    unmarked: usize,
) -> Vec<BigRational> {
    let mut out = weights.to_vec();
    for (server, group) in groups.iter().enumerate() {
        if !honest[server] {
            continue;
        }
        let members: Vec<usize> = group.iter().copied().filter(|&c| c < unmarked).collect();
        if members.len() < 2 {
            continue;
        }
        let sum: BigRational = members.iter().map(|&c| weights[c].clone()).sum();
        let mean = sum / BigRational::from_integer(BigInt::from(members.len() as u64));
        for &c in &members {
            out[c] = mean.clone();
        }
    }
    out
}

fn check_probe(weights: &[BigRational], config: &MixConfig) -> Result<(), OracleError> {
    if weights.len() as u64 != config.unmarked() {
        return Err(OracleError::BadProbe(format!(
            "probe has {} weights, config needs n-f={}",
            weights.len(),
            config.unmarked()
        )));
    }
    let sum: BigRational = weights.iter().cloned().sum();
    if !sum.is_one() {
        return Err(OracleError::BadProbe(format!("weights sum to {sum}, not 1")));
    }
    Ok(())
}

fn honesty_choices(m: usize, s: usize) -> Vec<Vec<bool>> {
    (0..m)
        .combinations(s)
        .map(|subset| {
            let mut flags = vec![false; m];
            for server in subset {
                flags[server] = true;
            }
            flags
        })
        .collect()
}

/// Exact `E[dPhi]` for one round from the given state: the potential drop
/// averaged over every partition (or every M^n assignment in binomial mode)
/// and, uniformly, over every choice of which s groups are honest, with
/// marked cards excluded from the averaging.
pub fn exact_expected_delta_phi(
    weights: &[BigRational],
    config: &MixConfig,
) -> Result<BigRational, OracleError> {
    check_probe(weights, config)?;
    let unmarked = config.unmarked() as usize;
    let phi_before = phi_rational(weights);
    let honesty = honesty_choices(config.m() as usize, config.s() as usize);

    let mut total = BigRational::zero();
    let mut outcomes = BigInt::zero();
    let mut visit = |groups: &[Vec<usize>]| {
        for honest in &honesty {
            let after = apply_round_rational(weights, groups, honest, unmarked);
            total += &phi_before - phi_rational(&after);
            outcomes += BigInt::one();
        }
    };

    match config.assignment_mode() {
        AssignmentMode::ExactPartition => {
            for partition in enumerate_partitions(config.n(), config.k())? {
                visit(&partition);
            }
        }
        AssignmentMode::BinomialAssignment => {
            let n = config.n();
            let m = config.m();
            if n > MAX_BINOMIAL_CARDS || m > MAX_BINOMIAL_SERVERS {
                return Err(OracleError::TooLarge(format!(
                    "binomial enumeration needs n <= {MAX_BINOMIAL_CARDS} and m <= {MAX_BINOMIAL_SERVERS}, got n={n} m={m}"
                )));
            }
            // Mixed-radix counter over all m^n card-to-server maps.
            let mut assignment = vec![0u64; n as usize];
            loop {
                let mut groups: Vec<Vec<usize>> = vec![Vec::new(); m as usize];
                for (card, &server) in assignment.iter().enumerate() {
                    groups[server as usize].push(card);
                }
                visit(&groups);
                let mut card = 0usize;
                loop {
                    if card == assignment.len() {
                        return Ok(total / BigRational::from_integer(outcomes));
                    }
                    assignment[card] += 1;
                    if assignment[card] < m {
                        break;
                    }
                    assignment[card] = 0;
                    card += 1;
                }
            }
        }
    }
    Ok(total / BigRational::from_integer(outcomes))
}

/// Exact per-round rate plus the per-probe values that certify its
/// state-independence.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactRateReport {
    pub rate: BigRational,
    pub probe_rates: Vec<BigRational>,
}

/// Computes `E[dPhi]/Phi` on every probe state and checks the values agree
/// exactly; disagreement means the update model is broken, not the probes.
pub fn exact_rate(
    config: &MixConfig,
    probes: &[Vec<BigRational>],
) -> Result<ExactRateReport, OracleError> {
    if probes.len() < 3 {
        return Err(OracleError::NotEnoughProbes(probes.len()));
    }
    let mut probe_rates = Vec::with_capacity(probes.len());
    for probe in probes {
        check_probe(probe, config)?;
        let phi = phi_rational(probe);
        if phi.is_zero() {
            return Err(OracleError::BadProbe(
                "probe is uniform; E[dPhi]/Phi undefined".into(),
            ));
        }
        probe_rates.push(exact_expected_delta_phi(probe, config)? / phi);
    }
    for rate in &probe_rates[1..] {
        if rate != &probe_rates[0] {
            return Err(OracleError::NotConstant(
                probe_rates[0].clone(),
                rate.clone(),
            ));
        }
    }
    Ok(ExactRateReport {
        rate: probe_rates[0].clone(),
        probe_rates,
    })
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic pseudo-random simplex points with small rational entries
/// (numerators in 1..=64 over their sum). Uniform draws are rejected so
/// every probe has positive potential.
pub fn random_rational_probes(len: usize, count: usize, seed: u64) -> Vec<Vec<BigRational>> {
    assert!(len >= 2, "a probe needs at least two weights");
    let mut state = seed ^ 0xD1B5_4A32_D192_ED03;
    let mut probes = Vec::with_capacity(count);
    while probes.len() < count {
        let numerators: Vec<u64> = (0..len).map(|_| 1 + splitmix64(&mut state) % 64).collect();
        if numerators.iter().all(|&a| a == numerators[0]) {
            continue;
        }
        let total: u64 = numerators.iter().sum();
        probes.push(
            numerators
                .into_iter()
                .map(|a| BigRational::new(BigInt::from(a), BigInt::from(total)))
                .collect(),
        );
    }
    probes
}

/// Exact rate as a float, for interfaces that do not need the rational.
pub fn exact_rate_f64(config: &MixConfig, probes: &[Vec<BigRational>]) -> Result<f64, OracleError> {
    Ok(exact_rate(config, probes)?
        .rate
        .to_f64()
        .expect("rate in [0,1]"))
}
