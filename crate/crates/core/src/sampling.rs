//! Approximately weighted-uniform witness generation.
//!
//! A call first enumerates the unhashed formula up to `hiThresh`; if that
//! fits, the witness is drawn directly from the full solution set. Otherwise
//! an approximate count (computed once and cached in a [`SamplerState`])
//! picks a hash size `q`, and cells with `q-3 ..= q` rows are tried until one
//! has scaled weight in `[loThresh, hiThresh]`.

use std::collections::hash_map::DefaultHasher;
use std::f64::consts::LN_2;
use std::hash::{Hash, Hasher};
use std::time::{Duration, Instant};

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use thiserror::Error;

use crate::counting::{
    bounded_weight_sat, capped_budget, with_retries, weightmc_on, BoundedEnumeration, CountError,
    CountParams,
};
use crate::formula::{Assignment, CnfFormula, WeightModel};
use crate::satengine::{Budget, SolverInstance};
use crate::xorhash::sample_hash;

/// `(1+κ)(2.36 + 0.51/(1−κ)²) − 1` at `κ = 0`; the smallest tolerance with
/// a root.
pub const MIN_EPSILON: f64 = 1.87;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplingError {
    #[error("epsilon must exceed {min}, got {epsilon}")]
    EpsilonTooSmall { epsilon: f64, min: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error("sampler state was built for a different formula, epsilon or tilt bound")]
    StateMismatch,
    #[error("overall timeout reached")]
    Timeout,
    #[error("approximate count failed: {0}")]
    Count(#[from] CountError),
}

fn tolerance_of(kappa: f64) -> f64 {
    (1.0 + kappa) * (2.36 + 0.51 / ((1.0 - kappa) * (1.0 - kappa))) - 1.0
}

/// `κ` and the sampler's pivot for a tolerance `ε`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KappaPivot {
    pub kappa: f64,
    pub pivot: u64,
}

impl KappaPivot {
    /// `1 + (1+κ)·pivot`.
    pub fn hi_thresh(&self) -> f64 {
        1.0 + (1.0 + self.kappa) * self.pivot as f64
    }

    /// `pivot / (1+κ)`.
    pub fn lo_thresh(&self) -> f64 {
        self.pivot as f64 / (1.0 + self.kappa)
    }
}

/// Solves `ε = (1+κ)(2.36 + 0.51/(1−κ)²) − 1` for `κ ∈ (0,1)` by bisection
/// and sets `pivot = ⌈e^{3/2}(1 + 1/κ)²⌉`.
pub fn compute_kappa_pivot(epsilon: f64) -> Result<KappaPivot, SamplingError> {
    if !(epsilon.is_finite() && epsilon > MIN_EPSILON) {
        return Err(SamplingError::EpsilonTooSmall {
            epsilon,
            min: MIN_EPSILON,
        });
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while hi - lo > 1e-15 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if tolerance_of(mid) < epsilon {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let kappa = 0.5 * (lo + hi);
    let pivot = (1.5f64.exp() * (1.0 + 1.0 / kappa).powi(2)).ceil() as u64;
    Ok(KappaPivot { kappa, pivot })
}

/// Knobs for [`weightgen`] and [`Sampler`].
#[derive(Debug, Clone, Copy)]
pub struct SampleParams {
    pub epsilon: f64,
    /// Upper bound `r` on the tilt.
    pub tilt: f64,
    /// Per solver call.
    pub budget: Budget,
    pub retry_cap: u32,
    /// Worker threads for the one-time count.
    pub jobs: usize,
    /// Wall-clock limit for one draw (not counting the one-time count).
    pub timeout: Option<Duration>,
}

impl SampleParams {
    pub fn new(epsilon: f64, tilt: f64) -> Result<Self, SamplingError> {
        compute_kappa_pivot(epsilon)?;
        if !(tilt.is_finite() && tilt >= 1.0) {
            return Err(SamplingError::InvalidParams(format!(
                "tilt bound must be >= 1, got {tilt}"
            )));
        }
        Ok(SampleParams {
            epsilon,
            tilt,
            budget: Budget::unlimited(),
            retry_cap: 3,
            jobs: 1,
            timeout: None,
        })
    }
}

fn fingerprint(formula: &CnfFormula, weights: &WeightModel, epsilon: f64, tilt: f64) -> u64 {
    let mut h = DefaultHasher::new();
    formula.hash(&mut h);
    epsilon.to_bits().hash(&mut h);
    tilt.to_bits().hash(&mut h);
    if let Some(w) = weights.literal_weights() {
        for v in 1..=w.num_vars() {
            let (p, q) = w.get(v);
            (p.to_bits(), q.to_bits()).hash(&mut h);
        }
    }
    h.finish()
}

/// One-time approximate count reused by every hashed-path draw.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplerState {
    /// `ln C`, the approximate weighted count.
    pub ln_count: f64,
    /// `ln w_max` as threaded through the counting run.
    pub ln_wmax: f64,
    pub kappa_pivot: KappaPivot,
    pub hi_thresh: f64,
    pub lo_thresh: f64,
    /// `⌈log₂C − log₂w_max + log₂1.8 − log₂pivot⌉`.
    pub q: i64,
    /// Solver calls spent by the count.
    pub count_solver_calls: u64,
    fingerprint: u64,
}

impl SamplerState {
    fn new(ln_count: f64, ln_wmax: f64, kp: KappaPivot, count_solver_calls: u64, fingerprint: u64) -> Self {
        let q = ((ln_count - ln_wmax) / LN_2 + 1.8f64.log2() - (kp.pivot as f64).log2()).ceil();
        SamplerState {
            ln_count,
            ln_wmax,
            kappa_pivot: kp,
            hi_thresh: kp.hi_thresh(),
            lo_thresh: kp.lo_thresh(),
            q: if q.is_finite() { q as i64 } else { i64::MIN },
            count_solver_calls,
            fingerprint,
        }
    }
}

/// Runs the one-time count (tolerance 0.8, confidence 0.2, tilt `r`) and
/// freezes its result.
pub fn make_sampler_state(
    formula: &CnfFormula,
    weights: &WeightModel,
    params: &SampleParams,
    seed: u64,
) -> Result<SamplerState, SamplingError> {
    let base = SolverInstance::new(formula);
    make_state_on(&base, formula, weights, params, seed)
}

fn make_state_on(
    base: &SolverInstance,
    formula: &CnfFormula,
    weights: &WeightModel,
    params: &SampleParams,
    seed: u64,
) -> Result<SamplerState, SamplingError> {
    let kp = compute_kappa_pivot(params.epsilon)?;
    let mut cp = CountParams::new(0.8, 0.2, params.tilt)?.with_seed(seed);
    cp.budget = params.budget;
    cp.retry_cap = params.retry_cap;
    cp.jobs = params.jobs;
    let out = weightmc_on(base, weights, &cp)?;
    Ok(SamplerState::new(
        out.ln_estimate,
        out.ln_wmax,
        kp,
        out.solver_calls,
        fingerprint(formula, weights, params.epsilon, params.tilt),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplePath {
    /// The whole solution set fit under `hiThresh`.
    Unhashed,
    Hashed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureReason {
    /// The formula has no witness.
    NoWitness,
    /// The last cell's scaled weight was outside `[loThresh, hiThresh]`.
    CellOutOfRange,
    /// A solver call ran out of budget after all retries.
    BudgetExceeded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleOutcome {
    /// `None` is ⊥.
    pub witness: Option<Assignment>,
    pub path: SamplePath,
    /// Hash rows of the final cell; 0 on the unhashed path.
    pub hash_rows: u32,
    /// Scaled weight `w(Y)/w_max` of the final cell.
    pub cell_weight: f64,
    pub cell_size: usize,
    pub failure: Option<FailureReason>,
    /// Solver calls spent by this draw, including a count run on its behalf.
    pub solver_calls: u64,
    /// Whether this draw had to run the approximate count.
    pub counted: bool,
}

impl SampleOutcome {
    pub fn is_bottom(&self) -> bool {
        self.witness.is_none()
    }
}

/// Draws `y ∈ Y` with probability `w(y)/w(Y)`.
fn draw_weighted<R: Rng + ?Sized>(cell: &BoundedEnumeration, rng: &mut R) -> Assignment {
    let top = cell.ln_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let rel: Vec<f64> = cell.ln_weights.iter().map(|lw| (lw - top).exp()).collect();
    let dist = WeightedIndex::new(&rel).expect("cell weights are positive");
    cell.solutions[dist.sample(rng)].clone()
}

/// Repeated draws from one formula. The approximate count is computed on the
/// first hashed-path draw (or supplied up front) and reused afterwards. The
/// unhashed enumeration is reused too: whether the solution set exceeds
/// `hiThresh` does not depend on the order its witnesses are found in, and
/// when it does not, the enumeration is the whole set.
#[derive(Debug, Clone)]
pub struct Sampler {
    formula: CnfFormula,
    weights: WeightModel,
    params: SampleParams,
    kappa_pivot: KappaPivot,
    engine: SolverInstance,
    state: Option<SamplerState>,
    unhashed: Option<BoundedEnumeration>,
    fingerprint: u64,
}

impl Sampler {
    pub fn new(formula: &CnfFormula, weights: &WeightModel, params: SampleParams) -> Result<Self, SamplingError> {
        let kappa_pivot = compute_kappa_pivot(params.epsilon)?;
        Ok(Sampler {
            formula: formula.clone(),
            weights: weights.clone(),
            params,
            kappa_pivot,
            engine: SolverInstance::new(formula),
            state: None,
            unhashed: None,
            fingerprint: fingerprint(formula, weights, params.epsilon, params.tilt),
        })
    }

    /// Installs a precomputed state; it must match this sampler's formula,
    /// weights, `ε` and `r`.
    pub fn with_state(mut self, state: SamplerState) -> Result<Self, SamplingError> {
        if state.fingerprint != self.fingerprint {
            return Err(SamplingError::StateMismatch);
        }
        self.state = Some(state);
        Ok(self)
    }

    pub fn state(&self) -> Option<&SamplerState> {
        self.state.as_ref()
    }

    pub fn kappa_pivot(&self) -> KappaPivot {
        self.kappa_pivot
    }

    /// One draw. Returns `Ok` with `witness = None` for ⊥.
    pub fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<SampleOutcome, SamplingError> {
        let calls_before = self.engine.stats().solve_calls;
        let deadline = self.params.timeout.map(|d| Instant::now() + d);
        let hi = self.kappa_pivot.hi_thresh();
        let lo = self.kappa_pivot.lo_thresh();
        let r = self.params.tilt;
        let mut retries = 0;
        self.engine.reseed(rng.gen());

        let mut outcome = SampleOutcome {
            witness: None,
            path: SamplePath::Unhashed,
            hash_rows: 0,
            cell_weight: 0.0,
            cell_size: 0,
            failure: None,
            solver_calls: 0,
            counted: false,
        };
        let weights = &self.weights;
        let budget = self.params.budget;
        if self.unhashed.is_none() {
            let engine = &mut self.engine;
            let first = with_retries(self.params.retry_cap, &mut retries, deadline, || {
                bounded_weight_sat(engine, weights, None, hi, r, 0.0, &capped_budget(&budget, deadline))
            })
            .map_err(timeout_or)?;
            let Some(first) = first else {
                outcome.failure = Some(FailureReason::BudgetExceeded);
                outcome.solver_calls = self.engine.stats().solve_calls - calls_before;
                return Ok(outcome);
            };
            self.unhashed = Some(first);
        }
        let first = self.unhashed.as_ref().expect("unhashed enumeration is set");
        outcome.cell_weight = first.scaled_weight();
        outcome.cell_size = first.solutions.len();
        if first.scaled_weight() <= hi {
            if first.solutions.is_empty() {
                outcome.failure = Some(FailureReason::NoWitness);
            } else {
                outcome.witness = Some(draw_weighted(first, rng));
            }
            outcome.solver_calls = self.engine.stats().solve_calls - calls_before;
            return Ok(outcome);
        }

        outcome.path = SamplePath::Hashed;
        let mut count_calls = 0;
        if self.state.is_none() {
            let state = make_state_on(&self.engine, &self.formula, &self.weights, &self.params, rng.gen())?;
            count_calls = state.count_solver_calls;
            outcome.counted = true;
            self.state = Some(state);
        }
        let state = self.state.as_ref().expect("state is set");
        let q = state.q;
        let mut ln_wmax = state.ln_wmax;
        let support = self.engine.support().to_vec();
        let mut i = (q - 4).max(0);
        let cell = loop {
            i += 1;
            let rows = i as usize;
            let engine = &mut self.engine;
            let round = with_retries(self.params.retry_cap, &mut retries, deadline, || {
                let h = sample_hash(&support, rows, rng);
                bounded_weight_sat(engine, weights, Some(&h), hi, r, ln_wmax, &capped_budget(&budget, deadline))
            })
            .map_err(timeout_or)?;
            let Some(cell) = round else {
                outcome.failure = Some(FailureReason::BudgetExceeded);
                outcome.hash_rows = i as u32;
                outcome.solver_calls = self.engine.stats().solve_calls - calls_before + count_calls;
                return Ok(outcome);
            };
            ln_wmax = cell.ln_new_wmax;
            let w = cell.scaled_weight();
            if (lo <= w && w <= hi) || i >= q {
                break cell;
            }
        };
        let w = cell.scaled_weight();
        outcome.hash_rows = i as u32;
        outcome.cell_weight = w;
        outcome.cell_size = cell.solutions.len();
        if w > hi || w < lo {
            outcome.failure = Some(FailureReason::CellOutOfRange);
        } else {
            outcome.witness = Some(draw_weighted(&cell, rng));
        }
        outcome.solver_calls = self.engine.stats().solve_calls - calls_before + count_calls;
        Ok(outcome)
    }
}

fn timeout_or(e: CountError) -> SamplingError {
    match e {
        CountError::Timeout => SamplingError::Timeout,
        e => SamplingError::Count(e),
    }
}

/// One draw. `cached` skips the approximate count; it must have been built
/// for the same formula, weights, `ε` and `r`.
pub fn weightgen<R: Rng + ?Sized>(
    formula: &CnfFormula,
    weights: &WeightModel,
    params: &SampleParams,
    rng: &mut R,
    cached: Option<&SamplerState>,
) -> Result<SampleOutcome, SamplingError> {
    let mut sampler = Sampler::new(formula, weights, *params)?;
    if let Some(state) = cached {
        sampler = sampler.with_state(state.clone())?;
    }
    sampler.sample(rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::{LiteralWeights, Lit};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn kappa_for_epsilon_five() {
        let kp = compute_kappa_pivot(5.0).unwrap();
        assert!((kp.kappa - 0.460_066_481_511_512_4).abs() < 1e-9);
        assert!((tolerance_of(kp.kappa) - 5.0).abs() < 1e-9);
        assert_eq!(kp.pivot, 46);
        assert!((kp.hi_thresh() - 68.163_058_149_529_57).abs() < 1e-6);
        assert!((kp.lo_thresh() - 31.505_414_707_129_756).abs() < 1e-6);
    }

    #[test]
    fn kappa_rejects_small_epsilon() {
        assert!(matches!(
            compute_kappa_pivot(1.0),
            Err(SamplingError::EpsilonTooSmall { min, .. }) if min == MIN_EPSILON
        ));
        assert!(compute_kappa_pivot(MIN_EPSILON).is_err());
        assert!(compute_kappa_pivot(1.9).is_ok());
    }

    fn three_solutions() -> (CnfFormula, WeightModel) {
        // Witnesses 01, 10, 11 with weights 0.2, 0.3, 0.3.
        let f = CnfFormula::new(2, vec![vec![Lit::pos(1), Lit::pos(2)]], None).unwrap();
        let mut w = LiteralWeights::new(2);
        w.set(1, 0.6, 0.4).unwrap();
        w.set(2, 0.5, 0.5).unwrap();
        (f, WeightModel::LiteralProduct(w))
    }

    #[test]
    fn perfect_path_frequencies() {
        let (f, w) = three_solutions();
        let params = SampleParams::new(5.0, 2.0).unwrap();
        let mut sampler = Sampler::new(&f, &w, params).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut counts = [0usize; 4];
        let n = 100_000;
        for _ in 0..n {
            let out = sampler.sample(&mut rng).unwrap();
            assert_eq!(out.path, SamplePath::Unhashed);
            let y = out.witness.unwrap();
            assert!(f.evaluate(&y));
            counts[(y.get(1) as usize) << 1 | y.get(2) as usize] += 1;
        }
        assert!(sampler.state().is_none());
        assert_eq!(counts[0], 0);
        let freq = |k: usize| counts[k] as f64 / n as f64;
        assert!((freq(0b01) - 0.25).abs() < 0.01);
        assert!((freq(0b10) - 0.375).abs() < 0.01);
        assert!((freq(0b11) - 0.375).abs() < 0.01);
    }

    #[test]
    fn unsat_is_bottom() {
        let f = CnfFormula::new(1, vec![vec![Lit::pos(1)], vec![Lit::neg(1)]], None).unwrap();
        let params = SampleParams::new(5.0, 1.0).unwrap();
        let out = weightgen(&f, &WeightModel::Uniform, &params, &mut ChaCha8Rng::seed_from_u64(0), None).unwrap();
        assert!(out.is_bottom());
        assert_eq!(out.failure, Some(FailureReason::NoWitness));
    }

    #[test]
    fn state_mismatch_is_rejected() {
        let f = CnfFormula::new(8, Vec::<Vec<Lit>>::new(), None).unwrap();
        let p5 = SampleParams::new(5.0, 1.0).unwrap();
        let state = make_sampler_state(&f, &WeightModel::Uniform, &p5, 1).unwrap();
        let p3 = SampleParams::new(3.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(
            weightgen(&f, &WeightModel::Uniform, &p3, &mut rng, Some(&state)).unwrap_err(),
            SamplingError::StateMismatch
        );
        assert!(weightgen(&f, &WeightModel::Uniform, &p5, &mut rng, Some(&state)).is_ok());
    }

    #[test]
    fn cached_state_skips_count() {
        let f = CnfFormula::new(8, Vec::<Vec<Lit>>::new(), None).unwrap();
        let params = SampleParams::new(5.0, 1.0).unwrap();
        let mut sampler = Sampler::new(&f, &WeightModel::Uniform, params).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let first = sampler.sample(&mut rng).unwrap();
        assert_eq!(first.path, SamplePath::Hashed);
        assert!(first.counted);
        let second = sampler.sample(&mut rng).unwrap();
        assert!(!second.counted);
        assert!(second.solver_calls < first.solver_calls);
    }

    #[test]
    fn same_seed_same_draws() {
        let f = CnfFormula::new(9, vec![vec![Lit::pos(1), Lit::neg(4)]], None).unwrap();
        let params = SampleParams::new(5.0, 1.0).unwrap();
        let draw = |seed| {
            let mut s = Sampler::new(&f, &WeightModel::Uniform, params).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..20).map(|_| s.sample(&mut rng).unwrap().witness).collect::<Vec<_>>()
        };
        assert_eq!(draw(3), draw(3));
        for y in draw(3).into_iter().flatten() {
            assert!(f.evaluate(&y));
        }
    }
}
