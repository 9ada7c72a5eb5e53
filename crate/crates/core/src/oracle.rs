//! Exhaustive ground truth for small instances: exact weighted counts, an
//! ideal sampler, and distances between distributions.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use thiserror::Error;

use crate::formula::{Assignment, CnfFormula, PartialAssignment, WeightError, WeightModel};
use crate::numeric::LnSum;
use crate::satengine::{Budget, EngineError, SolveOutcome, SolverInstance};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("instance too large for the oracle (step cap {cap} reached)")]
    TooLarge { cap: u64 },
    #[error("declared support is not independent: two witnesses share projection {projection}")]
    NotIndependentSupport { projection: String },
    #[error("formula is unsatisfiable")]
    Unsatisfiable,
    #[error("brute force limited to {max} variables, got {got}")]
    TooManyVariables { got: u32, max: u32 },
    #[error(transparent)]
    Weight(#[from] WeightError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

#[derive(Debug, Clone, Copy)]
pub struct OracleConfig {
    /// Total solver steps allowed for one enumeration.
    pub step_cap: u64,
    /// Solutions are kept in the result only up to this many.
    pub list_cap: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            step_cap: 1 << 22,
            list_cap: 1 << 16,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExactResult {
    pub count: f64,
    /// `ln count`; `-inf` when unsatisfiable.
    pub ln_count: f64,
    pub num_solutions: u64,
    /// Lightest and heaviest witness; both 0 when unsatisfiable.
    pub wmin: f64,
    pub wmax: f64,
    pub ln_wmin: f64,
    pub ln_wmax: f64,
    /// Witnesses with their weights, sorted by support projection. `None`
    /// when there are more than [`OracleConfig::list_cap`].
    pub solutions: Option<Vec<(Assignment, f64)>>,
}

impl ExactResult {
    /// `wmax / wmin`; 1 when unsatisfiable.
    pub fn tilt(&self) -> f64 {
        if self.num_solutions == 0 {
            1.0
        } else {
            (self.ln_wmax - self.ln_wmin).exp()
        }
    }
}

/// Every witness of `formula`, keyed by its projection on the declared
/// support. Enumeration blocks over all variables so that a dependent
/// support is detected rather than silently collapsed.
fn enumerate(
    formula: &CnfFormula,
    config: &OracleConfig,
) -> Result<BTreeMap<PartialAssignment, Assignment>, OracleError> {
    let full: Vec<u32> = (1..=formula.num_vars()).collect();
    let mut engine = SolverInstance::new(&formula.with_support(full).expect("full support is valid"));
    let mut found = BTreeMap::new();
    loop {
        let used = engine.stats().steps;
        if used >= config.step_cap {
            return Err(OracleError::TooLarge { cap: config.step_cap });
        }
        let budget = Budget {
            max_steps: Some(config.step_cap - used),
            max_time: None,
        };
        let y = match engine.solve(&budget) {
            SolveOutcome::Sat(y) => y,
            SolveOutcome::Unsat => return Ok(found),
            SolveOutcome::BudgetExceeded => return Err(OracleError::TooLarge { cap: config.step_cap }),
        };
        engine.add_blocking_clause(&y.project(engine.support()))?;
        let key = y.project(formula.support());
        match found.entry(key) {
            Entry::Vacant(e) => {
                e.insert(y);
            }
            Entry::Occupied(e) => {
                return Err(OracleError::NotIndependentSupport {
                    projection: e.key().to_string(),
                })
            }
        }
    }
}

fn summarize(
    witnesses: impl Iterator<Item = Assignment>,
    model: &WeightModel,
    list_cap: usize,
) -> Result<ExactResult, OracleError> {
    let mut sum: Option<LnSum> = None;
    let mut ln_wmin = f64::INFINITY;
    let mut ln_wmax = f64::NEG_INFINITY;
    let mut listed = Vec::new();
    let mut n = 0u64;
    for y in witnesses {
        let lw = model.ln_weight(&y)?;
        sum.get_or_insert_with(|| LnSum::new(lw)).add_ln(lw);
        ln_wmin = ln_wmin.min(lw);
        ln_wmax = ln_wmax.max(lw);
        n += 1;
        if listed.len() <= list_cap {
            listed.push((y, lw.exp()));
        }
    }
    let ln_count = sum.map_or(f64::NEG_INFINITY, |s| s.ln());
    if n == 0 {
        ln_wmin = f64::NEG_INFINITY;
    }
    Ok(ExactResult {
        count: ln_count.exp(),
        ln_count,
        num_solutions: n,
        wmin: ln_wmin.exp(),
        wmax: ln_wmax.exp(),
        ln_wmin,
        ln_wmax,
        solutions: (listed.len() <= list_cap).then_some(listed),
    })
}

/// Exact weighted model count by solver enumeration.
pub fn exact_count(formula: &CnfFormula, model: &WeightModel, config: OracleConfig) -> Result<ExactResult, OracleError> {
    let found = enumerate(formula, &config)?;
    summarize(found.into_values(), model, config.list_cap)
}

/// Largest instance accepted by [`brute_force`].
pub const BRUTE_FORCE_MAX_VARS: u32 = 24;

/// Exact weighted model count by evaluating all `2^n` assignments. Does not
/// check the support.
pub fn brute_force(formula: &CnfFormula, model: &WeightModel) -> Result<ExactResult, OracleError> {
    let n = formula.num_vars();
    if n > BRUTE_FORCE_MAX_VARS {
        return Err(OracleError::TooManyVariables {
            got: n,
            max: BRUTE_FORCE_MAX_VARS,
        });
    }
    let sat = (0..1u64 << n)
        .map(|bits| Assignment::from_bits(n, bits))
        .filter(|y| formula.evaluate(y));
    summarize(sat, model, usize::MAX)
}

/// Anything that assigns probabilities to support projections.
pub trait KeyedDistribution {
    fn probabilities(&self) -> BTreeMap<PartialAssignment, f64>;
}

/// Exact distribution `Pr[y] = w(y) / w(R_F)` over witnesses, keyed by
/// support projection.
#[derive(Debug, Clone)]
pub struct ExactDistribution {
    keys: Vec<PartialAssignment>,
    witnesses: Vec<Assignment>,
    probs: Vec<f64>,
}

impl ExactDistribution {
    pub fn new(formula: &CnfFormula, model: &WeightModel, config: OracleConfig) -> Result<Self, OracleError> {
        let found = enumerate(formula, &config)?;
        if found.is_empty() {
            return Err(OracleError::Unsatisfiable);
        }
        let mut keys = Vec::with_capacity(found.len());
        let mut witnesses = Vec::with_capacity(found.len());
        let mut ln_w = Vec::with_capacity(found.len());
        for (k, y) in found {
            ln_w.push(model.ln_weight(&y)?);
            keys.push(k);
            witnesses.push(y);
        }
        let mut total = LnSum::new(ln_w[0]);
        for &lw in &ln_w {
            total.add_ln(lw);
        }
        let ln_total = total.ln();
        let probs = ln_w.iter().map(|lw| (lw - ln_total).exp()).collect();
        Ok(ExactDistribution { keys, witnesses, probs })
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&PartialAssignment, &Assignment, f64)> {
        self.keys
            .iter()
            .zip(&self.witnesses)
            .zip(&self.probs)
            .map(|((k, y), &p)| (k, y, p))
    }

    pub fn probability(&self, key: &PartialAssignment) -> f64 {
        self.keys.binary_search(key).map_or(0.0, |i| self.probs[i])
    }

    /// `n` independent draws.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, n: u64) -> EmpiricalDistribution {
        let dist = WeightedIndex::new(&self.probs).expect("probabilities are positive");
        let mut out = EmpiricalDistribution::new();
        for _ in 0..n {
            out.record(self.keys[dist.sample(rng)].clone());
        }
        out
    }
}

impl KeyedDistribution for ExactDistribution {
    fn probabilities(&self) -> BTreeMap<PartialAssignment, f64> {
        self.keys.iter().cloned().zip(self.probs.iter().copied()).collect()
    }
}

/// The ideal sampler: `n` draws from the exact distribution.
pub fn ideal_sample<R: Rng + ?Sized>(
    formula: &CnfFormula,
    model: &WeightModel,
    rng: &mut R,
    n: u64,
    config: OracleConfig,
) -> Result<EmpiricalDistribution, OracleError> {
    Ok(ExactDistribution::new(formula, model, config)?.sample(rng, n))
}

/// Draw counts per support projection.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EmpiricalDistribution {
    counts: BTreeMap<PartialAssignment, u64>,
    total: u64,
}

impl EmpiricalDistribution {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, key: PartialAssignment) {
        *self.counts.entry(key).or_insert(0) += 1;
        self.total += 1;
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn count(&self, key: &PartialAssignment) -> u64 {
        self.counts.get(key).copied().unwrap_or(0)
    }

    pub fn frequency(&self, key: &PartialAssignment) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.count(key) as f64 / self.total as f64
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&PartialAssignment, u64)> {
        self.counts.iter().map(|(k, &c)| (k, c))
    }

    /// Number of distinct keys seen.
    pub fn distinct(&self) -> usize {
        self.counts.len()
    }

    /// One `<projection> : <count>` line per key.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, c) in &self.counts {
            let _ = writeln!(s, "{k} : {c}");
        }
        s
    }
}

impl KeyedDistribution for EmpiricalDistribution {
    fn probabilities(&self) -> BTreeMap<PartialAssignment, f64> {
        self.counts
            .iter()
            .map(|(k, &c)| (k.clone(), c as f64 / self.total.max(1) as f64))
            .collect()
    }
}

/// `Σ |p_a(y) − p_b(y)|` over the union of keys.
pub fn l1_distance(a: &impl KeyedDistribution, b: &impl KeyedDistribution) -> f64 {
    let pa = a.probabilities();
    let mut pb = b.probabilities();
    let mut d = 0.0;
    for (k, p) in pa {
        d += (p - pb.remove(&k).unwrap_or(0.0)).abs();
    }
    d + pb.values().map(|p| p.abs()).sum::<f64>()
}

/// Pearson statistic `Σ (O − E)² / E` of observed counts against an exact
/// distribution, with `k − 1` degrees of freedom. Keys observed but absent
/// from `expected` make the statistic infinite.
pub fn chi_square(observed: &EmpiricalDistribution, expected: &ExactDistribution) -> (f64, usize) {
    let n = observed.total() as f64;
    let mut stat = 0.0;
    for (k, _, p) in expected.iter() {
        let e = n * p;
        let o = observed.count(k) as f64;
        stat += (o - e).powi(2) / e;
    }
    if observed.iter().any(|(k, _)| expected.probability(k) == 0.0) {
        stat = f64::INFINITY;
    }
    (stat, expected.len().saturating_sub(1))
}

/// Two-sample Kolmogorov–Smirnov test. Returns the statistic `D` and the
/// asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    assert!(!a.is_empty() && !b.is_empty(), "samples must be non-empty");
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len(), b.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let x = a[i].min(b[j]);
        while i < n && a[i] <= x {
            i += 1;
        }
        while j < m && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let en = ((n * m) as f64 / (n + m) as f64).sqrt();
    (d, kolmogorov_q((en + 0.12 + 0.11 / en) * d))
}

/// `Q(λ) = 2 Σ_{k≥1} (−1)^{k−1} e^{−2k²λ²}`.
fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=200 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}
