//! The `bufshuf` command line: `simulate`, `verify-rates`, `sweep`.
//!
//! Exit codes: 0 success; 1 theory-comparison failure under `--strict`;
//! 2 configuration error; 3 an enumerable instance where the f=0 closed
//! forms disagree with the oracle (engine/oracle bug).

use std::collections::HashMap;
use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use num_rational::BigRational;
use serde_json::{Map, Value};

use crate::config::{AssignmentMode, MixConfig};
use crate::montecarlo::{compare_to_theory, run_experiment, TheoryComparison};
use crate::oracle;
use crate::rates::{self, rate_to_f64, ExponentPolicy, RateError, RatePrediction};

pub const EXIT_OK: i32 = 0;
pub const EXIT_STRICT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_ORACLE_MISMATCH: i32 = 3;

/// Floats are emitted with 17 significant digits so the exact double
/// round-trips, in CSV and JSON alike.
fn fmt_f64(x: f64) -> String {
    format!("{:.16e}", x)
}

/// A JSON number carrying the full-precision literal; non-finite values
/// (infinite z-scores) become null.
fn json_number(x: f64) -> Value {
    if x.is_finite() {
        Value::Number(serde_json::from_str(&fmt_f64(x)).expect("formatted float parses"))
    } else {
        Value::Null
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    fn parse(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(format!("format must be `csv` or `json`, got `{other}`")),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "bufshuf",
    version,
    about = "Buffer-shuffling mixnet simulator and convergence-rate analysis"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run seeded shuffling trials and compare the potential curve to theory
    Simulate(SimulateArgs),
    /// Check the closed-form rates against the exact enumeration oracle
    VerifyRates(VerifyRatesArgs),
    /// Tabulate round counts needed to reach the anonymity target
    Sweep(SweepArgs),
}

#[derive(Args, Debug, Default)]
struct SimulateArgs {
    /// Number of cards/messages
    #[arg(long)]
    n: Option<u64>,
    /// Buffer size: cards per server each round
    #[arg(long)]
    k: Option<u64>,
    /// Honest server count (default: all m = n/k servers)
    #[arg(long)]
    honest: Option<u64>,
    /// Adversary-marked card count
    #[arg(long)]
    fake: Option<u64>,
    /// Rounds per trial
    #[arg(long)]
    rounds: Option<u32>,
    /// Independent trials
    #[arg(long)]
    trials: Option<u64>,
    /// Master seed; trial i runs on its own derived stream
    #[arg(long)]
    seed: Option<u64>,
    /// Card-to-server assignment: exact | binomial
    #[arg(long)]
    assignment: Option<String>,
    /// Output format: csv | json
    #[arg(long)]
    format: Option<String>,
    /// Write the output document here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
    /// Exit 1 when the empirical curve strays from the predicted one
    #[arg(long)]
    strict: bool,
    /// Worker threads (default: BUFSHUF_WORKERS, then all cores)
    #[arg(long)]
    workers: Option<usize>,
    /// key=value file with keys n, k, s, f, assignment, rounds, trials, seed;
    /// flags override file values
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct VerifyRatesArgs {
    /// Largest card count in the grid (even n >= 4; enumeration-sized)
    #[arg(long, default_value_t = 8)]
    max_n: u64,
    /// Largest marked-card count per instance
    #[arg(long, default_value_t = 2)]
    max_f: u64,
    /// Probe states per instance (at least 3)
    #[arg(long, default_value_t = 3)]
    probes: usize,
    /// Probe-state seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output format: csv | json
    #[arg(long)]
    format: Option<String>,
    /// Write the output document here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// Card counts, comma separated
    #[arg(long, value_delimiter = ',', required = true)]
    n: Vec<u64>,
    /// Buffer sizes, comma separated
    #[arg(long, value_delimiter = ',', required = true)]
    k: Vec<u64>,
    /// Honest server counts (default: all m servers per point)
    #[arg(long, value_delimiter = ',')]
    honest: Vec<u64>,
    /// Marked card counts (default: 0)
    #[arg(long, value_delimiter = ',')]
    fake: Vec<u64>,
    /// Anonymity exponents b: target E[Phi] <= n^-b
    #[arg(long, value_delimiter = ',')]
    b: Vec<f64>,
    /// Output format: csv | json
    #[arg(long)]
    format: Option<String>,
    /// Write the output document here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run() -> i32 {
    run_from(std::env::args_os())
}

pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = err.print();
            return code;
        }
    };
    match cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::VerifyRates(args) => cmd_verify_rates(args),
        Command::Sweep(args) => cmd_sweep(args),
    }
}

// ---------------------------------------------------------------- simulate

/// Keys accepted in a `--config` file; `s` and `f` are the file spellings of
/// `--honest` and `--fake`.
const CONFIG_KEYS: [&str; 8] = ["n", "k", "s", "f", "assignment", "rounds", "trials", "seed"];

fn parse_config_file(path: &PathBuf) -> Result<HashMap<String, String>, String> {
    let text =
        fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let mut values = HashMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("{}:{}: expected key=value", path.display(), lineno + 1))?;
        let key = key.trim();
        if !CONFIG_KEYS.contains(&key) {
            return Err(format!(
                "{}:{}: unknown key `{key}` (expected one of {})",
                path.display(),
                lineno + 1,
                CONFIG_KEYS.join(", ")
            ));
        }
        values.insert(key.to_string(), value.trim().to_string());
    }
    Ok(values)
}

fn file_value<T: std::str::FromStr>(
    file: &HashMap<String, String>,
    key: &str,
) -> Result<Option<T>, String> {
    match file.get(key) {
        None => Ok(None),
        Some(raw) => raw
            .parse()
            .map(Some)
            .map_err(|_| format!("config file: cannot parse {key}={raw}")),
    }
}

#[derive(Debug)]
struct SimulatePlan {
    config: MixConfig,
    rounds: u32,
    trials: u64,
    seed: u64,
    format: OutputFormat,
}

fn resolve_simulate(args: &SimulateArgs) -> Result<SimulatePlan, String> {
    let file = match &args.config {
        Some(path) => parse_config_file(path)?,
        None => HashMap::new(),
    };
    let n = args
        .n
        .or(file_value(&file, "n")?)
        .ok_or("missing --n (or n= in the config file)")?;
    let k = args
        .k
        .or(file_value(&file, "k")?)
        .ok_or("missing --k (or k= in the config file)")?;
    let fake = args.fake.or(file_value(&file, "f")?).unwrap_or(0);
    let assignment = match &args.assignment {
        Some(raw) => raw.parse::<AssignmentMode>().map_err(|e| e.to_string())?,
        None => match file.get("assignment") {
            Some(raw) => raw.parse::<AssignmentMode>().map_err(|e| e.to_string())?,
            None => AssignmentMode::ExactPartition,
        },
    };
    // All servers honest unless told otherwise. When k does not divide n the
    // placeholder is irrelevant: validation rejects the config first.
    let default_honest = if k != 0 { n / k } else { 0 };
    let honest = args
        .honest
        .or(file_value(&file, "s")?)
        .unwrap_or(default_honest);
    let config = MixConfig::new(n, k, honest, fake, assignment).map_err(|e| e.to_string())?;
    let format = OutputFormat::parse(args.format.as_deref().unwrap_or("csv"))?;
    Ok(SimulatePlan {
        config,
        rounds: args.rounds.or(file_value(&file, "rounds")?).unwrap_or(8),
        trials: args.trials.or(file_value(&file, "trials")?).unwrap_or(1000),
        seed: args.seed.or(file_value(&file, "seed")?).unwrap_or(0),
        format,
    })
}

/// The closed form predicting this configuration, by adversary flags. The
/// marked-input families use the re-derived rates (the enumeration oracle
/// confirms those); binomial mode uses the corrected exponent policy.
fn theory_rate(config: &MixConfig) -> Result<(&'static str, BigRational), RateError> {
    let (n, k, s, f) = (config.n(), config.k(), config.s(), config.f());
    match config.assignment_mode() {
        AssignmentMode::BinomialAssignment => Ok((
            "rate_binomial_corrected",
            rates::rate_binomial(n, k, s, f, ExponentPolicy::Corrected)?,
        )),
        AssignmentMode::ExactPartition => {
            if f == 0 && s == config.m() {
                Ok(("rate_uniform", rates::rate_uniform(n, k)?))
            } else if f == 0 {
                Ok(("rate_corrupt_servers", rates::rate_corrupt_servers(n, k, s)?))
            } else if s == config.m() {
                Ok(("rate_fake_derived", rates::rate_fake_derived(n, k, f)?))
            } else {
                Ok((
                    "rate_combined_derived",
                    rates::rate_combined_derived(n, k, s, f)?,
                ))
            }
        }
    }
}

fn worker_pool(workers: Option<usize>) -> Result<Option<rayon::ThreadPool>, String> {
    let count = match workers {
        Some(w) => Some(w),
        None => match std::env::var("BUFSHUF_WORKERS") {
            Ok(raw) => Some(
                raw.parse()
                    .map_err(|_| format!("BUFSHUF_WORKERS={raw} is not a worker count"))?,
            ),
            Err(_) => None,
        },
    };
    match count {
        None => Ok(None),
        Some(0) => Err("worker count must be at least 1".into()),
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map(Some)
            .map_err(|e| format!("cannot build worker pool: {e}")),
    }
}

fn write_output(out: &Option<PathBuf>, doc: &str) -> Result<(), String> {
    match out {
        Some(path) => {
            fs::write(path, doc).map_err(|e| format!("cannot write {}: {e}", path.display()))
        }
        None => {
            print!("{doc}");
            Ok(())
        }
    }
}

fn simulate_csv(comparison: &TheoryComparison, stderrs: &[f64]) -> String {
    let mut doc = String::from("round,mean_phi,stderr,predicted_phi,z_score\n");
    for (row, stderr) in comparison.rows.iter().zip(stderrs) {
        doc.push_str(&format!(
            "{},{},{},{},{}\n",
            row.round,
            fmt_f64(row.empirical),
            fmt_f64(*stderr),
            fmt_f64(row.predicted),
            fmt_f64(row.z_score),
        ));
    }
    doc
}

fn simulate_json(
    plan: &SimulatePlan,
    comparison: &TheoryComparison,
    stderrs: &[f64],
    rate_name: &str,
    rate: f64,
    phi0: f64,
) -> String {
    let mut config = match serde_json::to_value(plan.config).expect("config serializes") {
        Value::Object(map) => map,
        _ => unreachable!("MixConfig serializes to an object"),
    };
    config.insert("rounds".into(), plan.rounds.into());
    config.insert("trials".into(), plan.trials.into());
    config.insert("seed".into(), plan.seed.into());
    config.insert("theory_rate_name".into(), rate_name.into());
    config.insert("theory_rate".into(), json_number(rate));
    config.insert("phi0".into(), json_number(phi0));

    let rows: Vec<Value> = comparison
        .rows
        .iter()
        .zip(stderrs)
        .map(|(row, stderr)| {
            let mut entry = Map::new();
            entry.insert("round".into(), row.round.into());
            entry.insert("mean_phi".into(), json_number(row.empirical));
            entry.insert("stderr".into(), json_number(*stderr));
            entry.insert("predicted_phi".into(), json_number(row.predicted));
            entry.insert("z_score".into(), json_number(row.z_score));
            entry.insert("within_3_sigma".into(), row.within_3_sigma.into());
            Value::Object(entry)
        })
        .collect();

    let mut doc = Map::new();
    doc.insert("config".into(), Value::Object(config));
    doc.insert("rows".into(), Value::Array(rows));
    doc.insert(
        "verdict".into(),
        if comparison.pass { "pass" } else { "fail" }.into(),
    );
    let mut text = serde_json::to_string_pretty(&Value::Object(doc)).expect("document serializes");
    text.push('\n');
    text
}

fn cmd_simulate(args: SimulateArgs) -> i32 {
    let plan = match resolve_simulate(&args) {
        Ok(plan) => plan,
        Err(message) => {
            eprintln!("bufshuf simulate: {message}");
            return EXIT_CONFIG;
        }
    };
    let pool = match worker_pool(args.workers) {
        Ok(pool) => pool,
        Err(message) => {
            eprintln!("bufshuf simulate: {message}");
            return EXIT_CONFIG;
        }
    };
    let (rate_name, rate_exact) = match theory_rate(&plan.config) {
        Ok(rate) => rate,
        Err(err) => {
            eprintln!("bufshuf simulate: {err}");
            return EXIT_CONFIG;
        }
    };
    let run = || run_experiment(&plan.config, plan.rounds, plan.trials, plan.seed);
    let result = match pool.map_or_else(run, |pool| pool.install(run)) {
        Ok(result) => result,
        Err(err) => {
            eprintln!("bufshuf simulate: {err}");
            return EXIT_CONFIG;
        }
    };

    let rate = rate_to_f64(&rate_exact);
    let phi0 = 1.0 - 1.0 / plan.config.unmarked() as f64;
    let prediction = RatePrediction::new(rate, phi0).expect("rate in [0,1]");
    let comparison = compare_to_theory(&result, &prediction);
    let stderrs: Vec<f64> = result.rounds.iter().map(|r| r.stderr).collect();

    let doc = match plan.format {
        OutputFormat::Csv => simulate_csv(&comparison, &stderrs),
        OutputFormat::Json => simulate_json(&plan, &comparison, &stderrs, rate_name, rate, phi0),
    };
    if let Err(message) = write_output(&args.out, &doc) {
        eprintln!("bufshuf simulate: {message}");
        return EXIT_CONFIG;
    }
    if args.strict && !comparison.pass {
        eprintln!("bufshuf simulate: empirical curve strayed from {rate_name} (strict mode)");
        return EXIT_STRICT_FAILURE;
    }
    EXIT_OK
}

// ------------------------------------------------------------ verify-rates

struct RateRow {
    name: &'static str,
    n: u64,
    k: u64,
    s: u64,
    f: u64,
    value: BigRational,
    oracle: BigRational,
    verified: bool,
}

fn rational_string(r: &BigRational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

fn rational_json(r: &BigRational) -> Value {
    let mut obj = Map::new();
    obj.insert("num".into(), r.numer().to_string().into());
    obj.insert("den".into(), r.denom().to_string().into());
    Value::Object(obj)
}

/// The (n, K, s, f) verification grid: even n from 4 to max_n, K in {2, n/2},
/// every honest count 1..=M, f from 0 to min(max_f, n-2).
fn verify_grid(max_n: u64, max_f: u64) -> Vec<(u64, u64, u64, u64)> {
    let mut grid = Vec::new();
    let mut n = 4;
    while n <= max_n {
        let mut ks = vec![2];
        if n / 2 != 2 {
            ks.push(n / 2);
        }
        for k in ks {
            let m = n / k;
            for s in 1..=m {
                for f in 0..=max_f.min(n - 2) {
                    grid.push((n, k, s, f));
                }
            }
        }
        n += 2;
    }
    grid
}

fn cmd_verify_rates(args: VerifyRatesArgs) -> i32 {
    let format = match OutputFormat::parse(args.format.as_deref().unwrap_or("csv")) {
        Ok(format) => format,
        Err(message) => {
            eprintln!("bufshuf verify-rates: {message}");
            return EXIT_CONFIG;
        }
    };
    if args.probes < 3 {
        eprintln!("bufshuf verify-rates: at least 3 probe states are required");
        return EXIT_CONFIG;
    }

    let mut rows: Vec<RateRow> = Vec::new();
    let mut all_matched = true;
    let mut f0_formulas_ok = true;
    for (n, k, s, f) in verify_grid(args.max_n, args.max_f) {
        let config = match MixConfig::new(n, k, s, f, AssignmentMode::ExactPartition) {
            Ok(config) => config,
            Err(err) => {
                eprintln!("bufshuf verify-rates: grid point n={n} k={k} s={s} f={f}: {err}");
                return EXIT_CONFIG;
            }
        };
        let probe_seed = args.seed ^ (n << 24 | k << 16 | s << 8 | f);
        let probes =
            oracle::random_rational_probes(config.unmarked() as usize, args.probes, probe_seed);
        let report = match oracle::exact_rate(&config, &probes) {
            Ok(report) => report,
            Err(err) => {
                eprintln!("bufshuf verify-rates: oracle failed on n={n} k={k} s={s} f={f}: {err}");
                return EXIT_ORACLE_MISMATCH;
            }
        };
        let m = config.m();
        let family: [(&'static str, Result<BigRational, RateError>); 6] = [
            ("rate_uniform", rates::rate_uniform(n, k)),
            ("rate_corrupt_servers", rates::rate_corrupt_servers(n, k, s)),
            ("rate_fake_paper", rates::rate_fake_paper(n, k, f)),
            ("rate_fake_derived", rates::rate_fake_derived(n, k, f)),
            (
                "rate_combined_paper",
                rates::rate_combined_paper(n, k, s, f),
            ),
            (
                "rate_combined_derived",
                rates::rate_combined_derived(n, k, s, f),
            ),
        ];
        let mut instance_matched = false;
        for (name, value) in family {
            let value = value.expect("grid point is in every rate's domain");
            let verified = value == report.rate;
            instance_matched |= verified;
            if f == 0 {
                // The f = 0 closed forms are exact; a mismatch on the ones
                // applicable to this (s, f) is an engine/oracle bug.
                let applicable = match name {
                    "rate_corrupt_servers" | "rate_combined_paper" | "rate_combined_derived" => {
                        true
                    }
                    "rate_uniform" | "rate_fake_paper" | "rate_fake_derived" => s == m,
                    _ => false,
                };
                if applicable && !verified {
                    f0_formulas_ok = false;
                }
            }
            rows.push(RateRow {
                name,
                n,
                k,
                s,
                f,
                value,
                oracle: report.rate.clone(),
                verified,
            });
        }
        all_matched &= instance_matched;
    }

    let pass = all_matched && f0_formulas_ok;
    let doc = match format {
        OutputFormat::Csv => {
            let mut doc =
                String::from("name,n,k,s,f,value_exact,value_float,oracle_value,verified\n");
            for row in &rows {
                doc.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{}\n",
                    row.name,
                    row.n,
                    row.k,
                    row.s,
                    row.f,
                    rational_string(&row.value),
                    fmt_f64(rate_to_f64(&row.value)),
                    rational_string(&row.oracle),
                    row.verified,
                ));
            }
            doc
        }
        OutputFormat::Json => {
            let rows: Vec<Value> = rows
                .iter()
                .map(|row| {
                    let mut entry = Map::new();
                    entry.insert("name".into(), row.name.into());
                    entry.insert("n".into(), row.n.into());
                    entry.insert("k".into(), row.k.into());
                    entry.insert("s".into(), row.s.into());
                    entry.insert("f".into(), row.f.into());
                    entry.insert("value_exact".into(), rational_json(&row.value));
                    entry.insert("value_float".into(), json_number(rate_to_f64(&row.value)));
                    entry.insert("oracle_value".into(), rational_json(&row.oracle));
                    entry.insert("verified".into(), row.verified.into());
                    Value::Object(entry)
                })
                .collect();
            let mut doc = Map::new();
            doc.insert("rows".into(), Value::Array(rows));
            doc.insert("verdict".into(), if pass { "pass" } else { "fail" }.into());
            let mut text =
                serde_json::to_string_pretty(&Value::Object(doc)).expect("document serializes");
            text.push('\n');
            text
        }
    };
    if let Err(message) = write_output(&args.out, &doc) {
        eprintln!("bufshuf verify-rates: {message}");
        return EXIT_CONFIG;
    }

    if !f0_formulas_ok {
        eprintln!("bufshuf verify-rates: an f=0 closed form disagrees with the oracle");
        return EXIT_ORACLE_MISMATCH;
    }
    if !all_matched {
        eprintln!("bufshuf verify-rates: an instance matched no rate family");
        return EXIT_ORACLE_MISMATCH;
    }
    EXIT_OK
}

// ------------------------------------------------------------------- sweep

fn cmd_sweep(args: SweepArgs) -> i32 {
    let format = match OutputFormat::parse(args.format.as_deref().unwrap_or("csv")) {
        Ok(format) => format,
        Err(message) => {
            eprintln!("bufshuf sweep: {message}");
            return EXIT_CONFIG;
        }
    };
    let fakes = if args.fake.is_empty() {
        vec![0]
    } else {
        args.fake.clone()
    };
    let bs = if args.b.is_empty() {
        vec![1.0]
    } else {
        args.b.clone()
    };

    struct SweepRow {
        n: u64,
        k: u64,
        s: u64,
        f: u64,
        b: f64,
        rate: f64,
        rounds: u64,
        markov: u64,
    }
    let mut rows: Vec<SweepRow> = Vec::new();
    for &n in &args.n {
        for &k in &args.k {
            let honests = if args.honest.is_empty() {
                if k == 0 || n % k != 0 {
                    eprintln!("bufshuf sweep: grid point n={n} k={k}: k does not divide n");
                    return EXIT_CONFIG;
                }
                vec![n / k]
            } else {
                args.honest.clone()
            };
            for &s in &honests {
                for &f in &fakes {
                    let config = match MixConfig::new(n, k, s, f, AssignmentMode::ExactPartition) {
                        Ok(config) => config,
                        Err(err) => {
                            eprintln!("bufshuf sweep: grid point n={n} k={k} s={s} f={f}: {err}");
                            return EXIT_CONFIG;
                        }
                    };
                    let (_, rate_exact) = theory_rate(&config).expect("validated grid point");
                    let rate = rate_to_f64(&rate_exact);
                    for &b in &bs {
                        let rounds = match rates::rounds_for_target(rate, n, b) {
                            Ok(rounds) => rounds,
                            Err(err) => {
                                eprintln!(
                                    "bufshuf sweep: grid point n={n} k={k} s={s} f={f} b={b}: {err}"
                                );
                                return EXIT_CONFIG;
                            }
                        };
                        let markov =
                            rates::markov_rounds(rate, n, b).expect("same domain as rounds");
                        rows.push(SweepRow {
                            n,
                            k,
                            s,
                            f,
                            b,
                            rate,
                            rounds,
                            markov,
                        });
                    }
                }
            }
        }
    }

    let doc = match format {
        OutputFormat::Csv => {
            let mut doc = String::from("n,k,s,f,b,rate,rounds_for_target,markov_rounds\n");
            for row in &rows {
                doc.push_str(&format!(
                    "{},{},{},{},{},{},{},{}\n",
                    row.n,
                    row.k,
                    row.s,
                    row.f,
                    fmt_f64(row.b),
                    fmt_f64(row.rate),
                    row.rounds,
                    row.markov,
                ));
            }
            doc
        }
        OutputFormat::Json => {
            let rows: Vec<Value> = rows
                .iter()
                .map(|row| {
                    let mut entry = Map::new();
                    entry.insert("n".into(), row.n.into());
                    entry.insert("k".into(), row.k.into());
                    entry.insert("s".into(), row.s.into());
                    entry.insert("f".into(), row.f.into());
                    entry.insert("b".into(), json_number(row.b));
                    entry.insert("rate".into(), json_number(row.rate));
                    entry.insert("rounds_for_target".into(), row.rounds.into());
                    entry.insert("markov_rounds".into(), row.markov.into());
                    Value::Object(entry)
                })
                .collect();
            let mut doc = Map::new();
            doc.insert("rows".into(), Value::Array(rows));
            doc.insert("verdict".into(), "pass".into());
            let mut text =
                serde_json::to_string_pretty(&Value::Object(doc)).expect("document serializes");
            text.push('\n');
            text
        }
    };
    if let Err(message) = write_output(&args.out, &doc) {
        eprintln!("bufshuf sweep: {message}");
        return EXIT_CONFIG;
    }
    EXIT_OK
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_has_17_significant_digits() {
        assert_eq!(fmt_f64(0.75), "7.5000000000000000e-1");
        assert_eq!(fmt_f64(0.0), "0.0000000000000000e0");
        let x = 0.1 + 0.2;
        assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn config_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        fs::write(
            &path,
            "# reproducible run\nn = 16\nk=4\ns=3\nf = 1\nassignment=exact\nrounds=5\ntrials=100\nseed=9\n",
        )
        .unwrap();
        let args = SimulateArgs {
            config: Some(path),
            ..Default::default()
        };
        let plan = resolve_simulate(&args).unwrap();
        assert_eq!(plan.config.n(), 16);
        assert_eq!(plan.config.k(), 4);
        assert_eq!(plan.config.s(), 3);
        assert_eq!(plan.config.f(), 1);
        assert_eq!(plan.rounds, 5);
        assert_eq!(plan.trials, 100);
        assert_eq!(plan.seed, 9);
    }

    #[test]
    fn flags_override_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        fs::write(&path, "n=16\nk=4\ns=4\nseed=9\n").unwrap();
        let args = SimulateArgs {
            config: Some(path),
            seed: Some(1),
            honest: Some(2),
            ..Default::default()
        };
        let plan = resolve_simulate(&args).unwrap();
        assert_eq!(plan.seed, 1);
        assert_eq!(plan.config.s(), 2);
    }

    #[test]
    fn config_file_rejects_unknown_keys() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        fs::write(&path, "n=16\nshufflers=4\n").unwrap();
        let args = SimulateArgs {
            config: Some(path),
            ..Default::default()
        };
        assert!(resolve_simulate(&args).unwrap_err().contains("shufflers"));
    }

    #[test]
    fn defaults_fill_everything_but_n_and_k() {
        let args = SimulateArgs {
            n: Some(8),
            k: Some(2),
            ..Default::default()
        };
        let plan = resolve_simulate(&args).unwrap();
        assert_eq!(plan.config.s(), 4);
        assert_eq!(plan.config.f(), 0);
        assert_eq!(plan.rounds, 8);
        assert_eq!(plan.trials, 1000);
        assert_eq!(plan.format, OutputFormat::Csv);
    }

    #[test]
    fn theory_rate_picks_the_right_family() {
        use AssignmentMode::*;
        let pick = |n, k, s, f, mode| {
            theory_rate(&MixConfig::new(n, k, s, f, mode).unwrap())
                .unwrap()
                .0
        };
        assert_eq!(pick(16, 4, 4, 0, ExactPartition), "rate_uniform");
        assert_eq!(pick(16, 4, 3, 0, ExactPartition), "rate_corrupt_servers");
        assert_eq!(pick(16, 4, 4, 2, ExactPartition), "rate_fake_derived");
        assert_eq!(pick(16, 4, 3, 2, ExactPartition), "rate_combined_derived");
        assert_eq!(
            pick(16, 4, 4, 0, BinomialAssignment),
            "rate_binomial_corrected"
        );
    }

    #[test]
    fn verify_grid_is_even_and_bounded() {
        let grid = verify_grid(8, 2);
        assert!(grid.iter().all(|&(n, k, s, f)| {
            n % 2 == 0 && n >= 4 && n <= 8 && (k == 2 || k == n / 2) && s >= 1 && s <= n / k && f <= 2
        }));
        // n=4: k=2 only (n/2 == 2), s in 1..=2, f in 0..=2.
        assert_eq!(
            grid.iter().filter(|&&(n, _, _, _)| n == 4).count(),
            2 * 3
        );
        assert!(verify_grid(3, 2).is_empty());
    }
}
