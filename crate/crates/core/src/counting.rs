//! Hashing-based approximate weighted model counting.
//!
//! * [`bounded_weight_sat`] enumerates witnesses of one cell until their
//!   scaled weight exceeds a pivot, tracking a running `w_max` estimate.
//! * [`weightmc_core`] adds random XOR rows one at a time until a cell is
//!   small enough, then scales the cell weight back up.
//! * [`weightmc`] takes the median of many core runs.
//! * [`partitioned_weightmc`] splits the witnesses into dyadic weight
//!   windows, each with tilt at most 2, and counts them separately.
//!
//! Weights travel as natural logs; a count of zero is `-inf`.

use std::f64::consts::LN_2;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::formula::{Assignment, CnfFormula, WeightError, WeightModel};
use crate::numeric::{mix64, LnSum};
use crate::satengine::{Budget, EngineError, SolveOutcome, SolverInstance, WeightWindow};
use crate::xorhash::{sample_hash, HashConstraintSet};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CountError {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error("solver budget exhausted")]
    BudgetExceeded,
    #[error("overall timeout reached")]
    Timeout,
    #[error("all {iterations} core iterations failed")]
    AllCoresFailed { iterations: usize },
    #[error("weight window {window} failed")]
    WindowFailed { window: u32 },
    #[error("partitioned counting needs literal-product (white-box) weights")]
    NotWhiteBox,
    #[error(transparent)]
    Weight(#[from] WeightError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// `2 · ⌈e^{3/2} (1 + 1/ε)²⌉`.
pub fn pivot_for_epsilon(epsilon: f64) -> u64 {
    2 * (1.5f64.exp() * (1.0 + 1.0 / epsilon).powi(2)).ceil() as u64
}

/// `⌈35 · log₂(3/δ)⌉`.
pub fn iterations_for_delta(delta: f64) -> usize {
    (35.0 * (3.0 / delta).log2()).ceil() as usize
}

/// Witnesses of one cell, as returned by [`bounded_weight_sat`].
#[derive(Debug, Clone)]
pub struct BoundedEnumeration {
    pub solutions: Vec<Assignment>,
    /// Natural-log weight of each solution.
    pub ln_weights: Vec<f64>,
    /// `ln w(Y)`; `-inf` when `Y` is empty.
    pub ln_total: f64,
    /// `ln(w_min · r)`, the updated `w_max` estimate.
    pub ln_new_wmax: f64,
    /// True iff the loop stopped because the scaled weight passed the pivot.
    pub saturated: bool,
    pub solver_calls: u64,
}

impl BoundedEnumeration {
    pub fn w_total(&self) -> f64 {
        self.ln_total.exp()
    }

    pub fn new_wmax(&self) -> f64 {
        self.ln_new_wmax.exp()
    }

    /// `w(Y) / w_max` against the updated estimate.
    pub fn scaled_weight(&self) -> f64 {
        (self.ln_total - self.ln_new_wmax).exp()
    }
}

/// Enumerates witnesses of `F ∧ hash` with blocking clauses over the
/// independent support until `w_total / (w_min · r) > pivot` or no witness
/// is left. `w_min` starts at `w_max / r`. Everything added to `engine` is
/// popped before returning.
pub fn bounded_weight_sat(
    engine: &mut SolverInstance,
    weights: &WeightModel,
    hash: Option<&HashConstraintSet>,
    pivot: f64,
    r: f64,
    ln_wmax: f64,
    budget: &Budget,
) -> Result<BoundedEnumeration, CountError> {
    let ln_r = r.ln();
    let empty = HashConstraintSet::default();
    let cp = engine.push_constraints(hash.unwrap_or(&empty))?;
    let mut ln_wmin = ln_wmax - ln_r;
    let mut total = LnSum::new(ln_wmax);
    let mut solutions = Vec::new();
    let mut ln_weights = Vec::new();
    let mut saturated = false;
    let mut solver_calls = 0;
    let result = loop {
        solver_calls += 1;
        let y = match engine.solve(budget) {
            SolveOutcome::Sat(y) => y,
            SolveOutcome::Unsat => break Ok(()),
            SolveOutcome::BudgetExceeded => break Err(CountError::BudgetExceeded),
        };
        let lw = match weights.ln_weight(&y) {
            Ok(lw) => lw,
            Err(e) => break Err(e.into()),
        };
        if let Err(e) = engine.add_blocking_clause(&y.project(engine.support())) {
            break Err(e.into());
        }
        total.add_ln(lw);
        ln_wmin = ln_wmin.min(lw);
        solutions.push(y);
        ln_weights.push(lw);
        if total.ratio_to(ln_wmin + ln_r) > pivot {
            saturated = true;
            break Ok(());
        }
    };
    engine.pop_to(cp)?;
    result?;
    Ok(BoundedEnumeration {
        solutions,
        ln_weights,
        ln_total: total.ln(),
        ln_new_wmax: ln_wmin + ln_r,
        saturated,
        solver_calls,
    })
}

/// Result of one [`weightmc_core`] run.
#[derive(Debug, Clone, PartialEq)]
pub struct CoreOutcome {
    /// `ln(c · w_max) = ln(w(Y) · 2^i)`; `None` is ⊥. Negative infinity
    /// is a count of zero.
    pub ln_product: Option<f64>,
    /// `ln c` with `c = w(Y) · 2^i / w_max` (`w(Y) / w_max` on the
    /// unhashed path).
    pub ln_scaled: Option<f64>,
    pub ln_wmax: f64,
    /// Number of hash rows of the accepted cell; 0 on the unhashed path.
    pub hash_rows: u32,
    pub retries: u32,
    pub solver_calls: u64,
}

/// Runs `f` and retries it on a budget overrun, at most `retry_cap` times.
pub(crate) fn with_retries<T>(
    retry_cap: u32,
    retries: &mut u32,
    deadline: Option<Instant>,
    mut f: impl FnMut() -> Result<T, CountError>,
) -> Result<Option<T>, CountError> {
    let mut used = 0;
    loop {
        if deadline.is_some_and(|d| Instant::now() >= d) {
            return Err(CountError::Timeout);
        }
        match f() {
            Ok(v) => return Ok(Some(v)),
            Err(CountError::BudgetExceeded) if used < retry_cap => {
                used += 1;
                *retries += 1;
            }
            Err(CountError::BudgetExceeded) => return Ok(None),
            Err(e) => return Err(e),
        }
    }
}

pub(crate) fn capped_budget(budget: &Budget, deadline: Option<Instant>) -> Budget {
    let mut b = *budget;
    if let Some(d) = deadline {
        let left = d.saturating_duration_since(Instant::now());
        b.max_time = Some(b.max_time.map_or(left, |t| t.min(left)));
    }
    b
}

/// Knobs shared by the core loop and its callers.
#[derive(Debug, Clone, Copy)]
pub struct CoreConfig {
    pub budget: Budget,
    pub retry_cap: u32,
    pub deadline: Option<Instant>,
}

impl Default for CoreConfig {
    fn default() -> Self {
        CoreConfig {
            budget: Budget::unlimited(),
            retry_cap: 3,
            deadline: None,
        }
    }
}

/// One approximate count. If the unhashed enumeration is already small
/// (`w(Y)/w_max ≤ pivot`) it is returned as `w(Y)/w_max`. Otherwise hash
/// rows are added one at a time, `i = 1, 2, …`, until
/// `0 < w(Y)/w_max ≤ pivot` or `i = n`; the result is
/// `w(Y) · 2^i / w_max`, or ⊥ if the last cell is empty or too heavy.
/// A round whose solver budget runs out is repeated with the same `i`.
pub fn weightmc_core<R: Rng + ?Sized>(
    engine: &mut SolverInstance,
    weights: &WeightModel,
    pivot: f64,
    r: f64,
    ln_wmax: f64,
    rng: &mut R,
    config: &CoreConfig,
) -> Result<CoreOutcome, CountError> {
    let calls_before = engine.stats().solve_calls;
    let mut retries = 0;
    let n = engine.num_vars();
    let support = engine.support().to_vec();
    let bottom = |ln_wmax, retries, engine: &SolverInstance| CoreOutcome {
        ln_product: None,
        ln_scaled: None,
        ln_wmax,
        hash_rows: 0,
        retries,
        solver_calls: engine.stats().solve_calls - calls_before,
    };

    let first = with_retries(config.retry_cap, &mut retries, config.deadline, || {
        let budget = capped_budget(&config.budget, config.deadline);
        bounded_weight_sat(engine, weights, None, pivot, r, ln_wmax, &budget)
    })?;
    let Some(first) = first else {
        return Ok(bottom(ln_wmax, retries, engine));
    };
    let mut ln_wmax = first.ln_new_wmax;
    if first.scaled_weight() <= pivot {
        return Ok(CoreOutcome {
            ln_product: Some(first.ln_total),
            ln_scaled: Some(first.ln_total - ln_wmax),
            ln_wmax,
            hash_rows: 0,
            retries,
            solver_calls: engine.stats().solve_calls - calls_before,
        });
    }

    let mut i: u32 = 0;
    let cell = loop {
        i += 1;
        let round = with_retries(config.retry_cap, &mut retries, config.deadline, || {
            let h = sample_hash(&support, i as usize, rng);
            let budget = capped_budget(&config.budget, config.deadline);
            bounded_weight_sat(engine, weights, Some(&h), pivot, r, ln_wmax, &budget)
        })?;
        let Some(cell) = round else {
            return Ok(bottom(ln_wmax, retries, engine));
        };
        ln_wmax = cell.ln_new_wmax;
        let w = cell.scaled_weight();
        if (w > 0.0 && w <= pivot) || i >= n {
            break cell;
        }
    };
    let scaled = cell.scaled_weight();
    if scaled > pivot || cell.ln_total == f64::NEG_INFINITY {
        return Ok(bottom(ln_wmax, retries, engine));
    }
    // A cell with i rows holds 1/2^i of the weight in expectation.
    let shift = i as f64 * LN_2;
    Ok(CoreOutcome {
        ln_product: Some(cell.ln_total + shift),
        ln_scaled: Some(cell.ln_total - ln_wmax + shift),
        ln_wmax,
        hash_rows: i,
        retries,
        solver_calls: engine.stats().solve_calls - calls_before,
    })
}

/// Parameters of [`weightmc`].
#[derive(Debug, Clone, Copy)]
pub struct CountParams {
    pub epsilon: f64,
    pub delta: f64,
    /// Upper bound `r` on the tilt.
    pub tilt: f64,
    pub seed: u64,
    /// Per solver call.
    pub budget: Budget,
    /// Same-`i` retries after a budget overrun before a core gives up.
    pub retry_cap: u32,
    /// Worker threads for the core iterations.
    pub jobs: usize,
    /// Consecutive core iterations that thread one `w_max` estimate. The
    /// estimate restarts at 1 for each chain; results do not depend on
    /// `jobs`.
    pub chain: usize,
    pub timeout: Option<Duration>,
}

impl CountParams {
    pub fn new(epsilon: f64, delta: f64, tilt: f64) -> Result<Self, CountError> {
        let p = CountParams {
            epsilon,
            delta,
            tilt,
            seed: 0,
            budget: Budget::unlimited(),
            retry_cap: 3,
            jobs: 1,
            chain: 16,
            timeout: None,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), CountError> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(CountError::InvalidParams(format!(
                "epsilon must be in (0,1), got {}",
                self.epsilon
            )));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(CountError::InvalidParams(format!(
                "delta must be in (0,1), got {}",
                self.delta
            )));
        }
        if !(self.tilt.is_finite() && self.tilt >= 1.0) {
            return Err(CountError::InvalidParams(format!(
                "tilt bound must be >= 1, got {}",
                self.tilt
            )));
        }
        if self.jobs == 0 || self.chain == 0 {
            return Err(CountError::InvalidParams(
                "jobs and chain must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn pivot(&self) -> u64 {
        pivot_for_epsilon(self.epsilon)
    }

    pub fn iterations(&self) -> usize {
        iterations_for_delta(self.delta)
    }
}

/// Result of [`weightmc`].
#[derive(Debug, Clone)]
pub struct WeightMcOutcome {
    /// `ln` of the median estimate; `-inf` for a zero count.
    pub ln_estimate: f64,
    /// Smallest final `w_max` estimate over all chains.
    pub ln_wmax: f64,
    pub pivot: u64,
    pub iterations: usize,
    /// `ln(c · w_max)` of each non-⊥ core, in iteration order.
    pub core_estimates: Vec<f64>,
    pub failed_cores: usize,
    pub solver_calls: u64,
    pub retries: u64,
}

impl WeightMcOutcome {
    pub fn estimate(&self) -> f64 {
        self.ln_estimate.exp()
    }

    pub fn log2_estimate(&self) -> f64 {
        self.ln_estimate / LN_2
    }

    pub fn wmax(&self) -> f64 {
        self.ln_wmax.exp()
    }
}

/// Lower median.
fn median(mut values: Vec<f64>) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    Some(values[(values.len() - 1) / 2])
}

/// Approximate weighted model count of `formula` over its independent
/// support.
pub fn weightmc(
    formula: &CnfFormula,
    weights: &WeightModel,
    params: &CountParams,
) -> Result<WeightMcOutcome, CountError> {
    weightmc_on(&SolverInstance::new(formula), weights, params)
}

struct ChainResult {
    cores: Vec<Result<CoreOutcome, CountError>>,
    ln_wmax: f64,
}

fn run_chain(
    base: &SolverInstance,
    weights: &WeightModel,
    params: &CountParams,
    pivot: f64,
    range: std::ops::Range<usize>,
    deadline: Option<Instant>,
) -> ChainResult {
    let mut engine = base.clone();
    let mut ln_wmax = 0.0;
    let config = CoreConfig {
        budget: params.budget,
        retry_cap: params.retry_cap,
        deadline,
    };
    let mut cores = Vec::with_capacity(range.len());
    for idx in range {
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        rng.set_stream(idx as u64);
        engine.reseed(mix64(params.seed ^ mix64(idx as u64)));
        let out = weightmc_core(&mut engine, weights, pivot, params.tilt, ln_wmax, &mut rng, &config);
        if let Ok(o) = &out {
            ln_wmax = o.ln_wmax;
        }
        let stop = out.is_err();
        cores.push(out);
        if stop {
            break;
        }
    }
    ChainResult { cores, ln_wmax }
}

/// [`weightmc`] on a prepared solver instance, which may carry a weight
/// window. `base` is cloned per chain and left untouched.
pub fn weightmc_on(
    base: &SolverInstance,
    weights: &WeightModel,
    params: &CountParams,
) -> Result<WeightMcOutcome, CountError> {
    params.validate()?;
    let pivot = params.pivot();
    let t = params.iterations();
    let deadline = params.timeout.map(|d| Instant::now() + d);
    let chains: Vec<std::ops::Range<usize>> = (0..t)
        .step_by(params.chain)
        .map(|s| s..(s + params.chain).min(t))
        .collect();
    let jobs = if weights.allows_parallel() {
        params.jobs.min(chains.len()).max(1)
    } else {
        1
    };

    let results: Vec<Mutex<Option<ChainResult>>> = chains.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let work = || loop {
        let k = next.fetch_add(1, Ordering::Relaxed);
        if k >= chains.len() {
            break;
        }
        let res = run_chain(base, weights, params, pivot as f64, chains[k].clone(), deadline);
        *results[k].lock().unwrap() = Some(res);
    };
    if jobs == 1 {
        work();
    } else {
        std::thread::scope(|s| {
            for _ in 0..jobs {
                s.spawn(work);
            }
        });
    }

    let mut estimates = Vec::with_capacity(t);
    let mut failed = 0;
    let mut ln_wmax = f64::INFINITY;
    let mut solver_calls = 0;
    let mut retries = 0;
    for slot in results {
        let chain = slot.into_inner().unwrap().expect("every chain ran");
        ln_wmax = ln_wmax.min(chain.ln_wmax);
        for core in chain.cores {
            let core = core?;
            solver_calls += core.solver_calls;
            retries += core.retries as u64;
            match core.ln_product {
                Some(v) => estimates.push(v),
                None => failed += 1,
            }
        }
    }
    let ln_estimate = median(estimates.clone()).ok_or(CountError::AllCoresFailed { iterations: t })?;
    Ok(WeightMcOutcome {
        ln_estimate,
        ln_wmax,
        pivot,
        iterations: t,
        core_estimates: estimates,
        failed_cores: failed,
        solver_calls,
        retries,
    })
}

/// Number of dyadic windows `⌈log₂(H/L)⌉ + 1` for `ln(H/L)`.
pub fn window_count(ln_ratio: f64) -> u32 {
    let log2 = ln_ratio / LN_2;
    let rounded = log2.round();
    let steps = if (log2 - rounded).abs() < 1e-9 {
        rounded
    } else {
        log2.ceil()
    };
    steps.max(0.0) as u32 + 1
}

#[derive(Debug, Clone)]
pub struct WindowReport {
    /// 1-based window index `m`.
    pub index: u32,
    pub window: WeightWindow,
    pub outcome: WeightMcOutcome,
}

#[derive(Debug, Clone)]
pub struct PartitionedOutcome {
    pub ln_estimate: f64,
    pub windows: Vec<WindowReport>,
    pub delta_per_window: f64,
    pub solver_calls: u64,
}

impl PartitionedOutcome {
    pub fn estimate(&self) -> f64 {
        self.ln_estimate.exp()
    }
}

/// Counts each window `(H/2^m, H/2^{m-1}]`, `m = 1..=N`, with tilt bound 2
/// and confidence `δ/N`, and sums the results. Requires `0 < L ≤ w_min`
/// and `w_max ≤ H` over the witnesses; bounds are given as natural logs.
pub fn partitioned_weightmc_ln(
    formula: &CnfFormula,
    weights: &WeightModel,
    ln_low: f64,
    ln_high: f64,
    params: &CountParams,
) -> Result<PartitionedOutcome, CountError> {
    let lw = weights.literal_weights().ok_or(CountError::NotWhiteBox)?;
    if !(ln_low.is_finite() && ln_high.is_finite() && ln_low < ln_high) {
        return Err(CountError::InvalidParams("need 0 < L < H".into()));
    }
    let n = window_count(ln_high - ln_low);
    let delta_per_window = params.delta / n as f64;
    let template = SolverInstance::new(formula).with_weights(lw.clone());
    let mut total = LnSum::new(ln_high);
    let mut windows = Vec::with_capacity(n as usize);
    let mut solver_calls = 0;
    for m in 1..=n {
        let window = WeightWindow::dyadic(ln_high, m);
        let mut base = template.clone();
        base.set_window(Some(window))?;
        let mut p = *params;
        p.delta = delta_per_window;
        p.tilt = 2.0;
        p.seed = mix64(params.seed ^ mix64(0x5eed_0000 + m as u64));
        let outcome = match weightmc_on(&base, weights, &p) {
            Ok(o) => o,
            Err(CountError::AllCoresFailed { .. }) => return Err(CountError::WindowFailed { window: m }),
            Err(e) => return Err(e),
        };
        total.add_ln(outcome.ln_estimate);
        solver_calls += outcome.solver_calls;
        windows.push(WindowReport {
            index: m,
            window,
            outcome,
        });
    }
    Ok(PartitionedOutcome {
        ln_estimate: total.ln(),
        windows,
        delta_per_window,
        solver_calls,
    })
}

/// [`partitioned_weightmc_ln`] with linear bounds `L` and `H`.
pub fn partitioned_weightmc(
    formula: &CnfFormula,
    weights: &WeightModel,
    low: f64,
    high: f64,
    params: &CountParams,
) -> Result<PartitionedOutcome, CountError> {
    if !(low > 0.0 && low < high) {
        return Err(CountError::InvalidParams("need 0 < L < H".into()));
    }
    partitioned_weightmc_ln(formula, weights, low.ln(), high.ln(), params)
}
