//! `hashcount` command-line front end.
//!
//! Exit codes: 0 success, 2 unreadable or malformed input, 3 invalid
//! parameters, 4 algorithm failure (⊥ or a violated witness), 5 timeout.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use hashcount::counting::{partitioned_weightmc_ln, weightmc, CountError, CountParams};
use hashcount::formula::{
    parse_weighted_dimacs, write_weighted_dimacs, Assignment, CnfFormula, LiteralWeights, Lit, WeightModel,
};
use hashcount::oracle::{exact_count, OracleConfig, OracleError};
use hashcount::sampling::{FailureReason, SampleParams, Sampler, SamplingError};
use hashcount::Budget;

#[derive(Parser)]
#[command(name = "hashcount", version, about = "Approximate weighted model counting and sampling with XOR hashing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Approximate weighted model count.
    Count(CountArgs),
    /// Approximately weighted-uniform witnesses.
    Sample(SampleArgs),
    /// Weighted count split into dyadic weight windows (large tilt).
    Pcount(PcountArgs),
    /// Adds benchmark literal weights with tilt at most r to a CNF.
    Genbench(GenbenchArgs),
    /// Exact weighted count by enumeration, or witness verification.
    Exact(ExactArgs),
}

#[derive(Args)]
struct Common {
    /// Weighted DIMACS input.
    input: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// File with the independent support (`c ind` line or plain variable list).
    #[arg(long)]
    support: Option<PathBuf>,
    /// Emit one JSON object instead of text.
    #[arg(long)]
    json: bool,
    /// Include wall time in the output (otherwise it goes to stderr).
    #[arg(long)]
    timing: bool,
}

#[derive(Args)]
struct Limits {
    /// Worker threads for the core iterations.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Consecutive core iterations sharing one w_max estimate.
    #[arg(long, default_value_t = 16)]
    chain: usize,
    /// Search-step budget per solver call.
    #[arg(long)]
    call_steps: Option<u64>,
    /// Wall-clock budget per solver call, in seconds.
    #[arg(long)]
    call_timeout: Option<f64>,
    /// Same-size retries after a solver budget overrun.
    #[arg(long, default_value_t = 3)]
    retries: u32,
    /// Overall wall-clock limit, in seconds.
    #[arg(long)]
    timeout: Option<f64>,
}

#[derive(Args)]
struct CountArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    limits: Limits,
    #[arg(long, default_value_t = 0.8)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.2)]
    delta: f64,
    /// Upper bound on the tilt.
    #[arg(short = 'r', long = "tilt", default_value_t = 3.0)]
    tilt: f64,
}

#[derive(Args)]
struct SampleArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    limits: Limits,
    #[arg(long, default_value_t = 5.0)]
    epsilon: f64,
    #[arg(short = 'r', long = "tilt", default_value_t = 3.0)]
    tilt: f64,
    #[arg(long, default_value_t = 1)]
    samples: u64,
}

#[derive(Args)]
struct PcountArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    limits: Limits,
    #[arg(long, default_value_t = 0.8)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.2)]
    delta: f64,
    /// Lower weight bound L; accepts `2^-10` form. Default: product of the
    /// smaller literal weights.
    #[arg(long)]
    low: Option<String>,
    /// Upper weight bound H. Default: product of the larger literal weights.
    #[arg(long)]
    high: Option<String>,
}

#[derive(Args)]
struct GenbenchArgs {
    /// Base CNF; existing weights are replaced.
    input: PathBuf,
    #[arg(short = 'r', long = "tilt", default_value_t = 3.0)]
    tilt: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ExactArgs {
    input: PathBuf,
    #[arg(long)]
    support: Option<PathBuf>,
    #[arg(long)]
    json: bool,
    /// Print every witness with its weight.
    #[arg(long)]
    list: bool,
    /// Check each model line of this file against the formula.
    #[arg(long)]
    verify: Option<PathBuf>,
    /// Solver step cap for the enumeration.
    #[arg(long, default_value_t = 1 << 22)]
    step_cap: u64,
}

/// A failed run: exit code plus message.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Failure { code: 2, message: message.into() }
    }

    fn params(message: impl Into<String>) -> Self {
        Failure { code: 3, message: message.into() }
    }

    fn failed(message: impl Into<String>) -> Self {
        Failure { code: 4, message: message.into() }
    }
}

impl From<CountError> for Failure {
    fn from(e: CountError) -> Self {
        let code = match e {
            CountError::InvalidParams(_) | CountError::NotWhiteBox => 3,
            CountError::Timeout => 5,
            _ => 4,
        };
        Failure { code, message: e.to_string() }
    }
}

impl From<SamplingError> for Failure {
    fn from(e: SamplingError) -> Self {
        match e {
            SamplingError::Count(c) => c.into(),
            SamplingError::EpsilonTooSmall { .. } | SamplingError::InvalidParams(_) => Failure::params(e.to_string()),
            SamplingError::Timeout => Failure { code: 5, message: e.to_string() },
            SamplingError::StateMismatch => Failure::failed(e.to_string()),
        }
    }
}

impl From<OracleError> for Failure {
    fn from(e: OracleError) -> Self {
        match e {
            OracleError::NotIndependentSupport { .. } => Failure::input(e.to_string()),
            _ => Failure::failed(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let started = Instant::now();
    let (result, timing) = match cli.command {
        Command::Count(a) => (cmd_count(&a, started), a.common.timing),
        Command::Sample(a) => (cmd_sample(&a, started), a.common.timing),
        Command::Pcount(a) => (cmd_pcount(&a, started), a.common.timing),
        Command::Genbench(a) => (cmd_genbench(&a), true),
        Command::Exact(a) => (cmd_exact(&a), true),
    };
    if !timing {
        eprintln!("c wall time {:.3}s", started.elapsed().as_secs_f64());
    }
    match result {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(Failure { code, message }) => {
            eprintln!("error: {message}");
            ExitCode::from(code)
        }
    }
}

fn read_input(path: &Path) -> Result<(CnfFormula, WeightModel), Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    parse_weighted_dimacs(&text).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

/// Variables listed in a support file: either `c ind` lines or bare
/// integers, with `0` terminators ignored.
fn read_support(path: &Path) -> Result<Vec<u32>, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    let mut vars = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        let body = if let Some(rest) = line.strip_prefix("c ind") {
            rest
        } else if line.starts_with('c') || line.starts_with('p') || line.is_empty() {
            continue;
        } else {
            line
        };
        for tok in body.split_whitespace() {
            let v: u32 = tok
                .parse()
                .map_err(|_| Failure::input(format!("{}: bad support entry `{tok}`", path.display())))?;
            if v != 0 {
                vars.push(v);
            }
        }
    }
    Ok(vars)
}

fn load(input: &Path, support: Option<&PathBuf>) -> Result<(CnfFormula, WeightModel), Failure> {
    let (formula, weights) = read_input(input)?;
    match support {
        None => Ok((formula, weights)),
        Some(path) => {
            let vars = read_support(path)?;
            let f = formula.with_support(vars).map_err(|e| Failure::input(e.to_string()))?;
            Ok((f, weights))
        }
    }
}

fn seconds(s: Option<f64>, what: &str) -> Result<Option<Duration>, Failure> {
    match s {
        None => Ok(None),
        Some(x) if x.is_finite() && x > 0.0 => Ok(Some(Duration::from_secs_f64(x))),
        Some(x) => Err(Failure::params(format!("{what} must be a positive number of seconds, got {x}"))),
    }
}

fn count_params(epsilon: f64, delta: f64, tilt: f64, seed: u64, limits: &Limits) -> Result<CountParams, Failure> {
    let mut p = CountParams::new(epsilon, delta, tilt)?.with_seed(seed);
    p.budget = Budget {
        max_steps: limits.call_steps,
        max_time: seconds(limits.call_timeout, "--call-timeout")?,
    };
    p.retry_cap = limits.retries;
    p.jobs = limits.jobs;
    p.chain = limits.chain;
    p.timeout = seconds(limits.timeout, "--timeout")?;
    p.validate()?;
    Ok(p)
}

/// `null` for non-finite values, which JSON cannot carry.
fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

fn render(json_mode: bool, mut obj: Value, text: String, timing: bool, started: Instant) -> String {
    let secs = started.elapsed().as_secs_f64();
    if json_mode {
        if timing {
            obj["wall_time_s"] = json!(secs);
        }
        let mut s = obj.to_string();
        s.push('\n');
        s
    } else if timing {
        format!("{text}wall_time_s {secs:.3}\n")
    } else {
        text
    }
}

fn cmd_count(a: &CountArgs, started: Instant) -> Result<String, Failure> {
    let (formula, weights) = load(&a.common.input, a.common.support.as_ref())?;
    let params = count_params(a.epsilon, a.delta, a.tilt, a.common.seed, &a.limits)?;
    let out = weightmc(&formula, &weights, &params)?;
    let obj = json!({
        "command": "count",
        "estimate": out.estimate(),
        "log2_estimate": num(out.log2_estimate()),
        "wmax": out.wmax(),
        "pivot": out.pivot,
        "iterations": out.iterations,
        "failed_cores": out.failed_cores,
        "solver_calls": out.solver_calls,
        "seed": a.common.seed,
    });
    let mut text = String::new();
    let _ = writeln!(text, "estimate {}", out.estimate());
    let _ = writeln!(text, "log2_estimate {}", out.log2_estimate());
    let _ = writeln!(text, "wmax {}", out.wmax());
    let _ = writeln!(text, "pivot {}", out.pivot);
    let _ = writeln!(text, "iterations {}", out.iterations);
    let _ = writeln!(text, "failed_cores {}", out.failed_cores);
    let _ = writeln!(text, "solver_calls {}", out.solver_calls);
    Ok(render(a.common.json, obj, text, a.common.timing, started))
}

fn reason_name(r: Option<FailureReason>) -> &'static str {
    match r {
        Some(FailureReason::NoWitness) => "no-witness",
        Some(FailureReason::CellOutOfRange) => "cell-out-of-range",
        Some(FailureReason::BudgetExceeded) => "budget-exceeded",
        None => "none",
    }
}

fn cmd_sample(a: &SampleArgs, started: Instant) -> Result<String, Failure> {
    let (formula, weights) = load(&a.common.input, a.common.support.as_ref())?;
    if a.samples == 0 {
        return Err(Failure::params("--samples must be at least 1"));
    }
    let mut params = SampleParams::new(a.epsilon, a.tilt)?;
    params.budget = Budget {
        max_steps: a.limits.call_steps,
        max_time: seconds(a.limits.call_timeout, "--call-timeout")?,
    };
    params.retry_cap = a.limits.retries;
    params.jobs = a.limits.jobs.max(1);
    let deadline = seconds(a.limits.timeout, "--timeout")?.map(|d| started + d);
    let mut sampler = Sampler::new(&formula, &weights, params)?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.common.seed);

    let mut text = String::new();
    let mut drawn = Vec::new();
    let mut successes = 0u64;
    for k in 0..a.samples {
        if deadline.is_some_and(|d| Instant::now() >= d) {
            return Err(Failure { code: 5, message: format!("timeout after {k} draws") });
        }
        let out = sampler.sample(&mut rng)?;
        match &out.witness {
            Some(y) => {
                successes += 1;
                text.push_str(&y.to_model_line());
                text.push('\n');
                drawn.push(json!(y.to_lits()));
            }
            None => {
                let _ = writeln!(text, "c draw {} failed: {}", k + 1, reason_name(out.failure));
                drawn.push(json!({ "failed": reason_name(out.failure) }));
            }
        }
    }
    let kp = sampler.kappa_pivot();
    let _ = writeln!(text, "c successes {successes}/{}", a.samples);
    let _ = writeln!(text, "c kappa {} pivot {}", kp.kappa, kp.pivot);
    let state = sampler.state();
    if let Some(s) = state {
        let _ = writeln!(text, "c count_estimate {} q {}", s.ln_count.exp(), s.q);
    }
    let obj = json!({
        "command": "sample",
        "samples": drawn,
        "successes": successes,
        "failures": a.samples - successes,
        "kappa": kp.kappa,
        "pivot": kp.pivot,
        "hi_thresh": kp.hi_thresh(),
        "lo_thresh": kp.lo_thresh(),
        "count_estimate": state.map(|s| num(s.ln_count.exp())),
        "q": state.map(|s| s.q),
        "seed": a.common.seed,
    });
    let rendered = render(a.common.json, obj, text, a.common.timing, started);
    if successes == 0 {
        print!("{rendered}");
        return Err(Failure::failed("no draw succeeded"));
    }
    Ok(rendered)
}

/// Parses `0.25`, `1e-3` or `2^-10`.
fn parse_bound(s: &str) -> Result<f64, Failure> {
    let bad = || Failure::params(format!("bad weight bound `{s}`"));
    let v = if let Some((base, exp)) = s.split_once('^') {
        let b: f64 = base.trim().parse().map_err(|_| bad())?;
        let e: f64 = exp.trim().parse().map_err(|_| bad())?;
        b.powf(e)
    } else {
        s.trim().parse().map_err(|_| bad())?
    };
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(bad())
    }
}

fn cmd_pcount(a: &PcountArgs, started: Instant) -> Result<String, Failure> {
    let (formula, weights) = load(&a.common.input, a.common.support.as_ref())?;
    let lw = weights
        .literal_weights()
        .ok_or_else(|| Failure::params("pcount needs literal-product (white-box) weights given as `w` lines"))?;
    let (mut ln_low, mut ln_high) = lw.ln_weight_bounds();
    if let Some(l) = &a.low {
        ln_low = parse_bound(l)?.ln();
    }
    if let Some(h) = &a.high {
        ln_high = parse_bound(h)?.ln();
    }
    if ln_low >= ln_high {
        // All witnesses weigh the same; one window around that weight.
        if a.low.is_none() && a.high.is_none() {
            ln_low = ln_high - std::f64::consts::LN_2;
        } else {
            return Err(Failure::params("need L < H"));
        }
    }
    let params = count_params(a.epsilon, a.delta, 2.0, a.common.seed, &a.limits)?;
    let out = partitioned_weightmc_ln(&formula, &weights, ln_low, ln_high, &params)?;
    let windows: Vec<Value> = out
        .windows
        .iter()
        .map(|w| {
            json!({
                "index": w.index,
                "low": num(w.window.low()),
                "high": num(w.window.high()),
                "estimate": num(w.outcome.estimate()),
                "solver_calls": w.outcome.solver_calls,
            })
        })
        .collect();
    let mut text = String::new();
    let _ = writeln!(text, "estimate {}", out.estimate());
    let _ = writeln!(text, "log2_estimate {}", out.ln_estimate / std::f64::consts::LN_2);
    let _ = writeln!(text, "windows {}", out.windows.len());
    let _ = writeln!(text, "delta_per_window {}", out.delta_per_window);
    let _ = writeln!(text, "solver_calls {}", out.solver_calls);
    for w in &out.windows {
        let _ = writeln!(
            text,
            "window {} ({}, {}] estimate {}",
            w.index,
            w.window.low(),
            w.window.high(),
            w.outcome.estimate()
        );
    }
    let obj = json!({
        "command": "pcount",
        "estimate": num(out.estimate()),
        "log2_estimate": num(out.ln_estimate / std::f64::consts::LN_2),
        "low": num(ln_low.exp()),
        "high": num(ln_high.exp()),
        "delta_per_window": out.delta_per_window,
        "solver_calls": out.solver_calls,
        "windows": windows,
        "seed": a.common.seed,
    });
    Ok(render(a.common.json, obj, text, a.common.timing, started))
}

fn cmd_genbench(a: &GenbenchArgs) -> Result<String, Failure> {
    let (formula, _) = read_input(&a.input)?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let (weights, chosen) = LiteralWeights::benchmark(formula.num_vars(), a.tilt, &mut rng)
        .map_err(|e| Failure::params(e.to_string()))?;
    let p = chosen.first().map_or(0.5, |&v| weights.get(v).0);
    let body = write_weighted_dimacs(&formula, &WeightModel::LiteralProduct(weights))
        .map_err(|e| Failure::params(e.to_string()))?;
    let mut out = String::new();
    let _ = writeln!(out, "c genbench r={} m={} p={} seed={}", a.tilt, chosen.len(), p, a.seed);
    out.push_str(&body);
    Ok(out)
}

/// Model lines of a witness file: `v`-prefixed or bare literal lists,
/// optionally `0`-terminated. Comment lines are skipped.
fn read_models(path: &Path, num_vars: u32) -> Result<Vec<(usize, Assignment)>, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('c') || line.starts_with('s') {
            continue;
        }
        let body = line.strip_prefix('v').unwrap_or(line);
        let mut values = vec![false; num_vars as usize];
        let mut seen = vec![false; num_vars as usize];
        for tok in body.split_whitespace() {
            let x: i64 = tok
                .parse()
                .map_err(|_| Failure::input(format!("{} line {}: bad literal `{tok}`", path.display(), i + 1)))?;
            if x == 0 {
                break;
            }
            let lit = Lit::from_dimacs(x)
                .filter(|l| l.var() <= num_vars)
                .ok_or_else(|| Failure::input(format!("{} line {}: literal {x} out of range", path.display(), i + 1)))?;
            let idx = lit.var() as usize - 1;
            values[idx] = !lit.is_negated();
            seen[idx] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Failure::input(format!(
                "{} line {}: variable {} unassigned",
                path.display(),
                i + 1,
                missing + 1
            )));
        }
        out.push((i + 1, Assignment::from_bools(values)));
    }
    Ok(out)
}

fn cmd_exact(a: &ExactArgs) -> Result<String, Failure> {
    let (formula, weights) = load(&a.input, a.support.as_ref())?;
    if let Some(path) = &a.verify {
        let models = read_models(path, formula.num_vars())?;
        for (line, y) in &models {
            if let Some(ci) = formula.first_violated(y) {
                return Err(Failure::failed(format!(
                    "{} line {line}: violates clause {} ({})",
                    path.display(),
                    ci + 1,
                    formula.clauses()[ci]
                )));
            }
        }
        return Ok(format!("verified {} models\n", models.len()));
    }
    let config = OracleConfig {
        step_cap: a.step_cap,
        ..OracleConfig::default()
    };
    let r = exact_count(&formula, &weights, config)?;
    let mut text = String::new();
    let _ = writeln!(text, "count {}", r.count);
    let _ = writeln!(text, "log2_count {}", r.ln_count / std::f64::consts::LN_2);
    let _ = writeln!(text, "solutions {}", r.num_solutions);
    let _ = writeln!(text, "wmin {}", r.wmin);
    let _ = writeln!(text, "wmax {}", r.wmax);
    let _ = writeln!(text, "tilt {}", r.tilt());
    let mut listed = Vec::new();
    if a.list {
        for (y, w) in r.solutions.iter().flatten() {
            let _ = writeln!(text, "{} c weight {}", y.to_model_line(), w);
            listed.push(json!({ "model": y.to_lits(), "weight": w }));
        }
    }
    if a.json {
        let mut obj = json!({
            "command": "exact",
            "count": r.count,
            "log2_count": num(r.ln_count / std::f64::consts::LN_2),
            "solutions": r.num_solutions,
            "wmin": r.wmin,
            "wmax": r.wmax,
            "tilt": r.tilt(),
        });
        if a.list {
            obj["models"] = Value::Array(listed);
        }
        return Ok(format!("{obj}\n"));
    }
    Ok(text)
}
