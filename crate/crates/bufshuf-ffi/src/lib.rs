//! C ABI for the bufshuf simulator.
//!
//! Handles are opaque pointers created and freed here; every fallible call
//! returns a [`BufshufStatus`] and writes its result through out-pointers.
//! The generated header lives at `include/bufshuf.h`.

use std::ffi::CString;
use std::os::raw::c_char;
use std::ptr;

use bufshuf::config::{AssignmentMode, MixConfig};
use bufshuf::metrics;
use bufshuf::montecarlo::{run_experiment, ExperimentResult};
use bufshuf::rates;
use bufshuf::state::BeliefState;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BufshufStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// A parameter was outside its allowed range.
    InvalidArgument = 2,
    /// The buffer size does not divide the card count.
    Divisibility = 3,
    /// Weights do not form a probability vector.
    InvalidWeights = 4,
    /// The experiment failed to run (e.g. fewer than 2 trials).
    ExperimentFailed = 5,
}

/// Opaque handle around a validated configuration.
pub struct BufshufConfig(MixConfig);

/// Opaque handle around per-round experiment statistics.
pub struct BufshufExperiment(ExperimentResult);

/// All anonymity measures for one weight vector.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BufshufMetricReport {
    pub phi: f64,
    pub alpha: f64,
    pub beta: f64,
    pub anon_prime: f64,
    pub anon: f64,
    pub rel_entropy_bits: f64,
    pub k_support: u64,
}

fn config_status(err: &bufshuf::config::ConfigError) -> BufshufStatus {
    match err {
        bufshuf::config::ConfigError::Divisibility { .. } => BufshufStatus::Divisibility,
        bufshuf::config::ConfigError::Range(_) => BufshufStatus::InvalidArgument,
    }
}

/// Validates a configuration and returns a handle through `out`.
/// `binomial_assignment` selects the binomial card-to-server mode; 0 keeps
/// the exact-partition mode. Free with [`bufshuf_config_free`].
///
/// # Safety
/// `out` must be a valid pointer to a `*mut BufshufConfig`.
#[no_mangle]
pub unsafe extern "C" fn bufshuf_config_new(
    n: u64,
    k: u64,
    honest: u64,
    fake: u64,
    binomial_assignment: i32,
    out: *mut *mut BufshufConfig,
) -> BufshufStatus {
    if out.is_null() {
        return BufshufStatus::NullPointer;
    }
    let mode = if binomial_assignment != 0 {
        AssignmentMode::BinomialAssignment
    } else {
        AssignmentMode::ExactPartition
    };
    match MixConfig::new(n, k, honest, fake, mode) {
        Ok(config) => {
            *out = Box::into_raw(Box::new(BufshufConfig(config)));
            BufshufStatus::Ok
        }
        Err(err) => {
            *out = ptr::null_mut();
            config_status(&err)
        }
    }
}

/// # Safety
/// `config` must be null or a pointer returned by [`bufshuf_config_new`]
/// that has not been freed yet.
#[no_mangle]
pub unsafe extern "C" fn bufshuf_config_free(config: *mut BufshufConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Derived server count m = n/k of a configuration.
///
/// # Safety
/// `config` must be a live pointer from [`bufshuf_config_new`].
#[no_mangle]
pub unsafe extern "C" fn bufshuf_config_servers(config: *const BufshufConfig) -> u64 {
    if config.is_null() {
        return 0;
    }
    (*config).0.m()
}

macro_rules! rate_out {
    ($out:ident, $rate:expr) => {{
        if $out.is_null() {
            return BufshufStatus::NullPointer;
        }
        match $rate {
            Ok(rate) => {
                *$out = rates::rate_to_f64(&rate);
                BufshufStatus::Ok
            }
            Err(_) => {
                *$out = f64::NAN;
                BufshufStatus::InvalidArgument
            }
        }
    }};
}

/// Per-round rate with all servers honest and no marked cards.
///
/// # Safety
/// `out` must be a valid pointer to a double.
#[no_mangle]
pub unsafe extern "C" fn bufshuf_rate_uniform(n: u64, k: u64, out: *mut f64) -> BufshufStatus {
    rate_out!(out, rates::rate_uniform(n, k))
}

/// Rate with only `s` of the n/k servers honest.
///
/// # Safety
/// `out` must be a valid pointer to a double.
#[no_mangle]
pub unsafe extern "C" fn bufshuf_rate_corrupt_servers(
    n: u64,
    k: u64,
    s: u64,
    out: *mut f64,
) -> BufshufStatus {
    rate_out!(out, rates::rate_corrupt_servers(n, k, s))
}

/// Marked-input rate, printed closed form (disagrees with enumeration on
/// small instances; kept for comparison).
///
/// # Safety
/// `out` must be a valid pointer to a double.
#[no_mangle]
pub unsafe extern "C" fn bufshuf_rate_fake_paper(
    n: u64,
    k: u64,
    f: u64,
    out: *mut f64,
) -> BufshufStatus {
    rate_out!(out, rates::rate_fake_paper(n, k, f))
}

/// Marked-input rate, first-principles form (matches enumeration).
///
/// # Safety
/// `out` must be a valid pointer to a double.
#[no_mangle]
pub unsafe extern "C" fn bufshuf_rate_fake_derived(
    n: u64,
    k: u64,
    f: u64,
    out: *mut f64,
) -> BufshufStatus {
    rate_out!(out, rates::rate_fake_derived(n, k, f))
}

/// Combined corrupted-servers + marked-inputs rate, printed form.
///
/// # Safety
/// `out` must be a valid pointer to a double.
#[no_mangle]
pub unsafe extern "C" fn bufshuf_rate_combined_paper(
    n: u64,
    k: u64,
    s: u64,
    f: u64,
    out: *mut f64,
) -> BufshufStatus {
    rate_out!(out, rates::rate_combined_paper(n, k, s, f))
}

/// Combined rate, first-principles form (matches enumeration).
///
/// # Safety
/// `out` must be a valid pointer to a double.
#[no_mangle]
pub unsafe extern "C" fn bufshuf_rate_combined_derived(
    n: u64,
    k: u64,
    s: u64,
    f: u64,
    out: *mut f64,
) -> BufshufStatus {
    rate_out!(out, rates::rate_combined_derived(n, k, s, f))
}

/// Binomial-assignment rate. `corrected_exponent != 0` selects the exponent
/// policy under which the load weights form the Binomial(n, K/n)
/// distribution; 0 evaluates the sum exactly as printed.
///
/// # Safety
/// `out` must be a valid pointer to a double.
#[no_mangle]
pub unsafe extern "C" fn bufshuf_rate_binomial(
    n: u64,
    k: u64,
    s: u64,
    f: u64,
    corrected_exponent: i32,
    out: *mut f64,
) -> BufshufStatus {
    let policy = if corrected_exponent != 0 {
        rates::ExponentPolicy::Corrected
    } else {
        rates::ExponentPolicy::AsPrinted
    };
    rate_out!(out, rates::rate_binomial(n, k, s, f, policy))
}

/// Rounds needed so the expected potential drops below `n^-b`.
///
/// # Safety
/// `out` must be a valid pointer to a uint64.
#[no_mangle]
pub unsafe extern "C" fn bufshuf_rounds_for_target(
    rate: f64,
    n: u64,
    b: f64,
    out: *mut u64,
) -> BufshufStatus {
    if out.is_null() {
        return BufshufStatus::NullPointer;
    }
    match rates::rounds_for_target(rate, n, b) {
        Ok(rounds) => {
            *out = rounds;
            BufshufStatus::Ok
        }
        Err(_) => BufshufStatus::InvalidArgument,
    }
}

/// Rounds after which the potential exceeds `n^-b` with probability at most
/// `n^-b` (twice [`bufshuf_rounds_for_target`], by Markov's inequality).
///
/// # Safety
/// `out` must be a valid pointer to a uint64.
#[no_mangle]
pub unsafe extern "C" fn bufshuf_markov_rounds(
    rate: f64,
    n: u64,
    b: f64,
    out: *mut u64,
) -> BufshufStatus {
    if out.is_null() {
        return BufshufStatus::NullPointer;
    }
    match rates::markov_rounds(rate, n, b) {
        Ok(rounds) => {
            *out = rounds;
            BufshufStatus::Ok
        }
        Err(_) => BufshufStatus::InvalidArgument,
    }
}

/// Evaluates every anonymity measure on a weight vector (probabilities
/// summing to 1).
///
/// # Safety
/// `weights` must point to `len` readable doubles and `out` to a writable
/// report struct.
#[no_mangle]
pub unsafe extern "C" fn bufshuf_metric_report(
    weights: *const f64,
    len: usize,
    out: *mut BufshufMetricReport,
) -> BufshufStatus {
    if weights.is_null() || out.is_null() {
        return BufshufStatus::NullPointer;
    }
    let slice = std::slice::from_raw_parts(weights, len);
    let state = match BeliefState::new(slice.to_vec(), 0) {
        Ok(state) => state,
        Err(_) => return BufshufStatus::InvalidWeights,
    };
    let report = metrics::MetricReport::from_state(&state);
    *out = BufshufMetricReport {
        phi: report.phi,
        alpha: report.alpha,
        beta: report.beta,
        anon_prime: report.anon_prime,
        anon: report.anon,
        rel_entropy_bits: report.rel_entropy_bits,
        k_support: report.k_support as u64,
    };
    BufshufStatus::Ok
}

/// Runs `trials` seeded trials of `rounds` rounds and returns per-round
/// statistics through `out`. Deterministic in (config, rounds, trials, seed).
/// Free with [`bufshuf_experiment_free`].
///
/// # Safety
/// `config` must be a live configuration handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bufshuf_run_experiment(
    config: *const BufshufConfig,
    rounds: u32,
    trials: u64,
    master_seed: u64,
    out: *mut *mut BufshufExperiment,
) -> BufshufStatus {
    if config.is_null() || out.is_null() {
        return BufshufStatus::NullPointer;
    }
    match run_experiment(&(*config).0, rounds, trials, master_seed) {
        Ok(result) => {
            *out = Box::into_raw(Box::new(BufshufExperiment(result)));
            BufshufStatus::Ok
        }
        Err(_) => {
            *out = ptr::null_mut();
            BufshufStatus::ExperimentFailed
        }
    }
}

/// Number of per-round rows (rounds + 1, row 0 being the initial state).
///
/// # Safety
/// `experiment` must be a live experiment handle.
#[no_mangle]
pub unsafe extern "C" fn bufshuf_experiment_len(experiment: *const BufshufExperiment) -> usize {
    if experiment.is_null() {
        return 0;
    }
    (*experiment).0.rounds.len()
}

/// Reads one per-round row. Any of the value pointers may be null to skip
/// that field.
///
/// # Safety
/// `experiment` must be a live experiment handle; non-null value pointers
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn bufshuf_experiment_row(
    experiment: *const BufshufExperiment,
    round: usize,
    mean_phi: *mut f64,
    sample_std: *mut f64,
    stderr: *mut f64,
) -> BufshufStatus {
    if experiment.is_null() {
        return BufshufStatus::NullPointer;
    }
    let rows = &(*experiment).0.rounds;
    let Some(row) = rows.get(round) else {
        return BufshufStatus::InvalidArgument;
    };
    if !mean_phi.is_null() {
        *mean_phi = row.mean_phi;
    }
    if !sample_std.is_null() {
        *sample_std = row.sample_std;
    }
    if !stderr.is_null() {
        *stderr = row.stderr;
    }
    BufshufStatus::Ok
}

/// Serializes the experiment to a JSON string. Free with
/// [`bufshuf_string_free`].
///
/// # Safety
/// `experiment` must be a live experiment handle.
#[no_mangle]
pub unsafe extern "C" fn bufshuf_experiment_to_json(
    experiment: *const BufshufExperiment,
) -> *mut c_char {
    if experiment.is_null() {
        return ptr::null_mut();
    }
    match serde_json::to_string(&(*experiment).0) {
        Ok(json) => CString::new(json).map_or(ptr::null_mut(), CString::into_raw),
        Err(_) => ptr::null_mut(),
    }
}

/// # Safety
/// `s` must be null or a string returned by [`bufshuf_experiment_to_json`].
#[no_mangle]
pub unsafe extern "C" fn bufshuf_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// # Safety
/// `experiment` must be null or a pointer from [`bufshuf_run_experiment`]
/// that has not been freed yet.
#[no_mangle]
pub unsafe extern "C" fn bufshuf_experiment_free(experiment: *mut BufshufExperiment) {
    if !experiment.is_null() {
        drop(Box::from_raw(experiment));
    }
}
