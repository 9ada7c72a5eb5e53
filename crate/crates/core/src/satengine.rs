//! CNF + XOR satisfiability with blocking clauses and an optional weight
//! window.
//!
//! The search is chronological DPLL: watched-literal unit propagation on
//! clauses, complete parity propagation by Gauss-Jordan elimination of the
//! residual XOR system at every propagation fixpoint, and branch-and-bound
//! pruning against the weight window using per-variable log factors.
//! There is no clause learning. A conflict undoes the most recent decision
//! and asserts its negation one level down.
//!
//! Enumeration is incremental: blocking the model that was just returned
//! backjumps to the deepest level the blocking clause depends on instead of
//! restarting the search.

use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::formula::{Assignment, CnfFormula, LiteralWeights, Lit, PartialAssignment};
use crate::xorhash::{HashConstraintSet, XorConstraint};

static NEXT_INSTANCE_ID: AtomicU64 = AtomicU64::new(1);

const FALSE: u8 = 0;
const TRUE: u8 = 1;
const UNDEF: u8 = 2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("blocking assignment must cover exactly the independent support")]
    BlockingSupportMismatch,
    #[error("checkpoint does not belong to this instance or was already popped")]
    StaleCheckpoint,
    #[error("variable {var} outside 1..={num_vars}")]
    VarOutOfRange { var: u32, num_vars: u32 },
    #[error("a weight window needs literal-product weights")]
    WindowWithoutWeights,
    #[error("invalid weight window: need 0 <= low < high")]
    InvalidWindow,
}

/// Half-open weight interval `(low, high]`, stored as natural logs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightWindow {
    ln_low: f64,
    ln_high: f64,
}

impl WeightWindow {
    pub fn new(low: f64, high: f64) -> Result<Self, EngineError> {
        if !(low >= 0.0 && low < high && high.is_finite()) {
            return Err(EngineError::InvalidWindow);
        }
        Ok(WeightWindow {
            ln_low: low.ln(),
            ln_high: high.ln(),
        })
    }

    /// `(H / 2^m, H / 2^{m-1}]` for `ln_h = ln H`. Adjacent windows share
    /// their boundary bit-for-bit, so they partition `(0, H]` exactly.
    pub fn dyadic(ln_h: f64, m: u32) -> Self {
        assert!(m >= 1);
        WeightWindow {
            ln_low: dyadic_boundary(ln_h, m),
            ln_high: dyadic_boundary(ln_h, m - 1),
        }
    }

    pub fn low(&self) -> f64 {
        self.ln_low.exp()
    }

    pub fn high(&self) -> f64 {
        self.ln_high.exp()
    }

    pub fn ln_low(&self) -> f64 {
        self.ln_low
    }

    pub fn ln_high(&self) -> f64 {
        self.ln_high
    }

    /// Membership of a weight given by its natural log.
    pub fn contains_ln(&self, ln_w: f64) -> bool {
        ln_w > self.ln_low && ln_w <= self.ln_high
    }
}

fn dyadic_boundary(ln_h: f64, k: u32) -> f64 {
    ln_h - k as f64 * std::f64::consts::LN_2
}

/// Per-call limits. `None` means unlimited.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Budget {
    pub max_steps: Option<u64>,
    pub max_time: Option<Duration>,
}

impl Budget {
    pub fn unlimited() -> Self {
        Budget::default()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SolveOutcome {
    Sat(Assignment),
    Unsat,
    BudgetExceeded,
}

impl SolveOutcome {
    pub fn is_sat(&self) -> bool {
        matches!(self, SolveOutcome::Sat(_))
    }
}

/// Token returned by a push; popping it restores the state before the push.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Checkpoint {
    instance: u64,
    depth: usize,
    serial: u64,
}

#[derive(Debug, Clone)]
struct Layer {
    serial: u64,
    clauses: usize,
    units: usize,
    empties: usize,
    xors: usize,
    window: Option<WeightWindow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SearchState {
    /// Trail empty; the next solve starts from the root.
    Fresh,
    /// Mid-search: trail is a valid partial state, queue may be pending.
    Searching,
    /// Trail holds a full model that satisfies every constraint.
    AtModel,
    /// Search space exhausted under the current constraints.
    Exhausted,
}

#[derive(Debug, Clone, Default)]
pub struct EngineStats {
    pub solve_calls: u64,
    pub steps: u64,
    pub decisions: u64,
    pub conflicts: u64,
}

#[derive(Debug, Clone)]
struct WindowTrack {
    ln_pos: Vec<f64>,
    ln_neg: Vec<f64>,
    /// Log weight of the assigned variables.
    cur: f64,
    /// Sum of min / max log factors over unassigned variables.
    free_min: f64,
    free_max: f64,
}

impl WindowTrack {
    fn new(w: &LiteralWeights) -> Self {
        let n = w.num_vars();
        let ln_pos: Vec<f64> = (1..=n).map(|v| w.ln_factor(v, true)).collect();
        let ln_neg: Vec<f64> = (1..=n).map(|v| w.ln_factor(v, false)).collect();
        let mut t = WindowTrack {
            ln_pos,
            ln_neg,
            cur: 0.0,
            free_min: 0.0,
            free_max: 0.0,
        };
        t.reset();
        t
    }

    fn reset(&mut self) {
        self.cur = 0.0;
        self.free_min = self
            .ln_pos
            .iter()
            .zip(&self.ln_neg)
            .map(|(a, b)| a.min(*b))
            .sum();
        self.free_max = self
            .ln_pos
            .iter()
            .zip(&self.ln_neg)
            .map(|(a, b)| a.max(*b))
            .sum();
    }

    fn assign(&mut self, var: usize, value: bool) {
        let (p, n) = (self.ln_pos[var], self.ln_neg[var]);
        self.free_min -= p.min(n);
        self.free_max -= p.max(n);
        self.cur += if value { p } else { n };
    }

    fn unassign(&mut self, var: usize, value: bool) {
        let (p, n) = (self.ln_pos[var], self.ln_neg[var]);
        self.free_min += p.min(n);
        self.free_max += p.max(n);
        self.cur -= if value { p } else { n };
    }

    fn ln_weight(&self, value: &[u8]) -> f64 {
        value
            .iter()
            .enumerate()
            .map(|(i, &v)| if v == TRUE { self.ln_pos[i] } else { self.ln_neg[i] })
            .sum()
    }
}

/// Assignment trail and per-variable bookkeeping.
#[derive(Debug, Clone)]
struct Trail {
    value: Vec<u8>,
    level: Vec<u32>,
    lits: Vec<u32>,
    /// Start of each decision level `1..` in `lits`.
    limits: Vec<usize>,
    decisions: Vec<u32>,
    qhead: usize,
    next_var: usize,
    true_mask: Vec<u64>,
    free_mask: Vec<u64>,
    window: Option<WindowTrack>,
}

#[inline]
fn lit_code(l: Lit) -> u32 {
    (l.var() - 1) * 2 + l.is_negated() as u32
}

#[inline]
fn code_var(code: u32) -> usize {
    (code >> 1) as usize
}

impl Trail {
    fn new(n: usize) -> Self {
        let words = n.div_ceil(64).max(1);
        let mut free_mask = vec![0u64; words];
        for v in 0..n {
            free_mask[v / 64] |= 1 << (v % 64);
        }
        Trail {
            value: vec![UNDEF; n],
            level: vec![0; n],
            lits: Vec::with_capacity(n),
            limits: Vec::new(),
            decisions: Vec::new(),
            qhead: 0,
            next_var: 0,
            true_mask: vec![0; words],
            free_mask,
            window: None,
        }
    }

    #[inline]
    fn lit_value(&self, code: u32) -> u8 {
        let v = self.value[code_var(code)];
        if v == UNDEF {
            UNDEF
        } else {
            v ^ (code as u8 & 1)
        }
    }

    fn decision_level(&self) -> u32 {
        self.limits.len() as u32
    }

    #[inline]
    fn assign(&mut self, code: u32, level: u32) {
        let var = code_var(code);
        debug_assert_eq!(self.value[var], UNDEF);
        let val = (code & 1) == 0;
        self.value[var] = val as u8;
        self.level[var] = level;
        self.lits.push(code);
        self.free_mask[var / 64] &= !(1 << (var % 64));
        if val {
            self.true_mask[var / 64] |= 1 << (var % 64);
        }
        if let Some(w) = &mut self.window {
            w.assign(var, val);
        }
    }

    fn new_level(&mut self, decision: u32) {
        self.limits.push(self.lits.len());
        self.decisions.push(decision);
        let level = self.decision_level();
        self.assign(decision, level);
    }

    /// Undo every level above `level`.
    fn cancel_until(&mut self, level: u32) {
        if self.decision_level() <= level {
            return;
        }
        let keep = self.limits[level as usize];
        for i in keep..self.lits.len() {
            let code = self.lits[i];
            let var = code_var(code);
            let val = self.value[var] == TRUE;
            self.value[var] = UNDEF;
            self.free_mask[var / 64] |= 1 << (var % 64);
            self.true_mask[var / 64] &= !(1 << (var % 64));
            if let Some(w) = &mut self.window {
                w.unassign(var, val);
            }
            if var < self.next_var {
                self.next_var = var;
            }
        }
        self.lits.truncate(keep);
        self.limits.truncate(level as usize);
        self.decisions.truncate(level as usize);
        self.qhead = self.lits.len();
    }

    fn clear(&mut self) {
        self.cancel_until(0);
        for i in 0..self.lits.len() {
            let var = code_var(self.lits[i]);
            self.value[var] = UNDEF;
            self.free_mask[var / 64] |= 1 << (var % 64);
            self.true_mask[var / 64] &= !(1 << (var % 64));
        }
        self.lits.clear();
        self.qhead = 0;
        self.next_var = 0;
        if let Some(w) = &mut self.window {
            w.reset();
        }
    }
}

/// Parity matrix in reduced row-echelon form, one bitset per row.
#[derive(Debug, Clone, Default)]
struct XorMatrix {
    words: usize,
    rows: Vec<Vec<u64>>,
    parity: Vec<bool>,
    inconsistent: bool,
}

/// Reduces `rows` in place to reduced row-echelon form, dropping zero rows.
/// Returns false if a `0 = 1` row appears.
fn gauss_jordan(rows: &mut Vec<Vec<u64>>, parity: &mut Vec<bool>) -> bool {
    let (rank, consistent) = eliminate(rows, parity);
    rows.truncate(rank);
    parity.truncate(rank);
    consistent
}

/// Gauss-Jordan elimination over GF(2) on the given rows. The first `rank`
/// rows end up in reduced row-echelon form; the rest are zero. Returns the
/// rank and whether every zero row has parity 0.
fn eliminate(rows: &mut [Vec<u64>], parity: &mut [bool]) -> (usize, bool) {
    let words = rows.first().map_or(0, |r| r.len());
    let n = rows.len();
    let mut rank = 0;
    'outer: for w in 0..words {
        loop {
            // lowest pivot bit still available in this word
            let mut mask = 0u64;
            for row in &rows[rank..] {
                mask |= row[w];
            }
            if mask == 0 {
                break;
            }
            let bit = mask & mask.wrapping_neg();
            let p = (rank..n).find(|&i| rows[i][w] & bit != 0).expect("bit present");
            rows.swap(rank, p);
            parity.swap(rank, p);
            let (head, tail) = rows.split_at_mut(rank);
            let (pivot, rest) = tail.split_first_mut().expect("pivot row");
            let pivot_par = parity[rank];
            for (i, row) in head.iter_mut().enumerate() {
                if row[w] & bit != 0 {
                    for k in w..words {
                        row[k] ^= pivot[k];
                    }
                    parity[i] ^= pivot_par;
                }
            }
            for (j, row) in rest.iter_mut().enumerate() {
                if row[w] & bit != 0 {
                    for k in w..words {
                        row[k] ^= pivot[k];
                    }
                    parity[rank + 1 + j] ^= pivot_par;
                }
            }
            rank += 1;
            if rank == n {
                break 'outer;
            }
        }
    }
    let consistent = parity[rank..].iter().all(|p| !p);
    (rank, consistent)
}

impl XorMatrix {
    fn build(n: usize, constraints: &[XorConstraint]) -> Self {
        let words = n.div_ceil(64).max(1);
        let mut rows = Vec::with_capacity(constraints.len());
        let mut parity = Vec::with_capacity(constraints.len());
        for c in constraints {
            let mut r = vec![0u64; words];
            for &v in c.vars() {
                let i = v as usize - 1;
                r[i / 64] ^= 1 << (i % 64);
            }
            rows.push(r);
            parity.push(c.parity());
        }
        let inconsistent = !gauss_jordan(&mut rows, &mut parity);
        XorMatrix {
            words,
            rows,
            parity,
            inconsistent,
        }
    }
}

enum XorStep {
    Conflict,
    Implied,
    Quiet,
}

/// A CNF formula conjoined with XOR rows, blocking clauses and an optional
/// weight window, with incremental solving.
#[derive(Debug)]
pub struct SolverInstance {
    id: u64,
    num_vars: u32,
    support: Vec<u32>,
    clauses: Vec<Vec<u32>>,
    units: Vec<u32>,
    empties: usize,
    watches: Vec<Vec<u32>>,
    xors: Vec<XorConstraint>,
    matrix: XorMatrix,
    matrix_dirty: bool,
    weights: Option<LiteralWeights>,
    window: Option<WeightWindow>,
    trail: Trail,
    state: SearchState,
    layers: Vec<Layer>,
    next_serial: u64,
    rng: ChaCha8Rng,
    polarity_bits: u64,
    polarity_left: u32,
    scratch_rows: Vec<Vec<u64>>,
    scratch_par: Vec<bool>,
    stats: EngineStats,
}

impl Clone for SolverInstance {
    fn clone(&self) -> Self {
        SolverInstance {
            id: NEXT_INSTANCE_ID.fetch_add(1, Ordering::Relaxed),
            num_vars: self.num_vars,
            support: self.support.clone(),
            clauses: self.clauses.clone(),
            units: self.units.clone(),
            empties: self.empties,
            watches: self.watches.clone(),
            xors: self.xors.clone(),
            matrix: self.matrix.clone(),
            matrix_dirty: self.matrix_dirty,
            weights: self.weights.clone(),
            window: self.window,
            trail: self.trail.clone(),
            state: self.state,
            layers: self.layers.clone(),
            next_serial: self.next_serial,
            rng: self.rng.clone(),
            polarity_bits: self.polarity_bits,
            polarity_left: self.polarity_left,
            scratch_rows: Vec::new(),
            scratch_par: Vec::new(),
            stats: self.stats.clone(),
        }
    }
}

impl SolverInstance {
    pub fn new(formula: &CnfFormula) -> Self {
        let n = formula.num_vars() as usize;
        let mut inst = SolverInstance {
            id: NEXT_INSTANCE_ID.fetch_add(1, Ordering::Relaxed),
            num_vars: formula.num_vars(),
            support: formula.support().to_vec(),
            clauses: Vec::new(),
            units: Vec::new(),
            empties: 0,
            watches: vec![Vec::new(); 2 * n],
            xors: Vec::new(),
            matrix: XorMatrix::default(),
            matrix_dirty: false,
            weights: None,
            window: None,
            trail: Trail::new(n),
            state: SearchState::Fresh,
            layers: Vec::new(),
            next_serial: 0,
            rng: ChaCha8Rng::seed_from_u64(0),
            polarity_bits: 0,
            polarity_left: 0,
            scratch_rows: Vec::new(),
            scratch_par: Vec::new(),
            stats: EngineStats::default(),
        };
        for c in formula.clauses() {
            inst.push_clause(c.lits().iter().map(|&l| lit_code(l)).collect());
        }
        inst
    }

    /// Reseeds the branching-polarity stream.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.reseed(seed);
        self
    }

    pub fn reseed(&mut self, seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        self.polarity_left = 0;
    }

    /// Literal weights used by the weight window.
    pub fn with_weights(mut self, weights: LiteralWeights) -> Self {
        assert_eq!(weights.num_vars(), self.num_vars);
        self.reset();
        self.weights = Some(weights);
        self
    }

    pub fn num_vars(&self) -> u32 {
        self.num_vars
    }

    pub fn support(&self) -> &[u32] {
        &self.support
    }

    pub fn window(&self) -> Option<WeightWindow> {
        self.window
    }

    pub fn stats(&self) -> &EngineStats {
        &self.stats
    }

    pub fn set_window(&mut self, window: Option<WeightWindow>) -> Result<(), EngineError> {
        if window.is_some() && self.weights.is_none() {
            return Err(EngineError::WindowWithoutWeights);
        }
        self.reset();
        self.window = window;
        Ok(())
    }

    fn reset(&mut self) {
        self.trail.clear();
        self.state = SearchState::Fresh;
    }

    /// Stores a clause (already normalized, codes) and attaches its watches
    /// on positions 0 and 1.
    fn push_clause(&mut self, clause: Vec<u32>) {
        match clause.len() {
            0 => self.empties += 1,
            1 => self.units.push(clause[0]),
            _ => {
                let idx = self.clauses.len() as u32;
                self.watches[clause[0] as usize].push(idx);
                self.watches[clause[1] as usize].push(idx);
                self.clauses.push(clause);
            }
        }
    }

    /// Adds an arbitrary clause. Duplicate literals are merged and
    /// tautologies ignored.
    pub fn add_clause(&mut self, lits: &[Lit]) -> Result<(), EngineError> {
        if let Some(l) = lits.iter().find(|l| l.var() > self.num_vars) {
            return Err(EngineError::VarOutOfRange {
                var: l.var(),
                num_vars: self.num_vars,
            });
        }
        let mut codes: Vec<u32> = Vec::with_capacity(lits.len());
        for &l in lits {
            let c = lit_code(l);
            if codes.contains(&(c ^ 1)) {
                return Ok(());
            }
            if !codes.contains(&c) {
                codes.push(c);
            }
        }
        self.add_codes(codes);
        Ok(())
    }

    fn add_codes(&mut self, mut codes: Vec<u32>) {
        match self.state {
            SearchState::Exhausted => {
                self.push_clause(codes);
            }
            SearchState::AtModel
                if codes.len() >= 2
                    && codes.iter().all(|&c| self.trail.lit_value(c) == FALSE) =>
            {
                // Blocking the current model: backjump to the deepest level
                // the clause depends on and flip that level's decision.
                // Watch the two literals with the highest levels.
                for slot in 0..2 {
                    let best = (slot..codes.len())
                        .max_by_key(|&i| self.trail.level[code_var(codes[i])])
                        .expect("clause of length >= 2");
                    codes.swap(slot, best);
                }
                let dmax = self.trail.level[code_var(codes[0])];
                self.push_clause(codes);
                if dmax == 0 {
                    self.state = SearchState::Exhausted;
                    return;
                }
                let decision = self.trail.decisions[dmax as usize - 1];
                self.trail.cancel_until(dmax - 1);
                self.trail.assign(decision ^ 1, dmax - 1);
                let added = self.clauses.last().expect("clause of length >= 2");
                let (first, second) = (added[0], added[1]);
                if self.trail.lit_value(second) == FALSE && self.trail.lit_value(first) == UNDEF {
                    self.trail.assign(first, dmax - 1);
                }
                self.stats.conflicts += 1;
                self.state = SearchState::Searching;
            }
            _ => {
                self.reset();
                self.push_clause(codes);
            }
        }
    }

    /// Excludes every later witness that agrees with `sigma_s` on the whole
    /// independent support.
    pub fn add_blocking_clause(&mut self, sigma_s: &PartialAssignment) -> Result<(), EngineError> {
        if sigma_s.len() != self.support.len() || !sigma_s.vars().eq(self.support.iter().copied()) {
            return Err(EngineError::BlockingSupportMismatch);
        }
        let codes = sigma_s
            .entries()
            .iter()
            .map(|&(v, b)| lit_code(Lit::new(v, b)))
            .collect();
        self.add_codes(codes);
        Ok(())
    }

    /// Opens a scope; everything added until the matching pop is undone by it.
    pub fn push(&mut self) -> Checkpoint {
        self.next_serial += 1;
        self.layers.push(Layer {
            serial: self.next_serial,
            clauses: self.clauses.len(),
            units: self.units.len(),
            empties: self.empties,
            xors: self.xors.len(),
            window: self.window,
        });
        Checkpoint {
            instance: self.id,
            depth: self.layers.len() - 1,
            serial: self.next_serial,
        }
    }

    /// Opens a scope and conjoins the hash rows `h(x) = α`.
    pub fn push_constraints(&mut self, hs: &HashConstraintSet) -> Result<Checkpoint, EngineError> {
        for row in hs.rows() {
            if let Some(&var) = row.vars().iter().find(|&&v| v == 0 || v > self.num_vars) {
                return Err(EngineError::VarOutOfRange {
                    var,
                    num_vars: self.num_vars,
                });
            }
        }
        let cp = self.push();
        if hs.m() > 0 {
            self.reset();
            self.xors.extend(hs.rows().iter().cloned());
            self.matrix_dirty = true;
        }
        Ok(cp)
    }

    /// Restores the state saved by `cp`, discarding every layer above it.
    pub fn pop_to(&mut self, cp: Checkpoint) -> Result<(), EngineError> {
        if cp.instance != self.id
            || self.layers.get(cp.depth).map(|l| l.serial) != Some(cp.serial)
        {
            return Err(EngineError::StaleCheckpoint);
        }
        let layer = self.layers[cp.depth].clone();
        self.layers.truncate(cp.depth);
        self.reset();
        if self.clauses.len() != layer.clauses {
            self.clauses.truncate(layer.clauses);
            for w in &mut self.watches {
                w.retain(|&c| (c as usize) < layer.clauses);
            }
        }
        self.units.truncate(layer.units);
        self.empties = layer.empties;
        if self.xors.len() != layer.xors {
            self.xors.truncate(layer.xors);
            self.matrix_dirty = true;
        }
        self.window = layer.window;
        Ok(())
    }

    fn next_polarity(&mut self) -> bool {
        if self.polarity_left == 0 {
            self.polarity_bits = self.rng.gen();
            self.polarity_left = 64;
        }
        let b = self.polarity_bits & 1 == 1;
        self.polarity_bits >>= 1;
        self.polarity_left -= 1;
        b
    }

    fn start(&mut self) -> bool {
        if self.matrix_dirty {
            self.matrix = XorMatrix::build(self.num_vars as usize, &self.xors);
            self.matrix_dirty = false;
        }
        if self.empties > 0 || self.matrix.inconsistent {
            return false;
        }
        self.trail.clear();
        self.trail.window = match (&self.window, &self.weights) {
            (Some(_), Some(w)) => Some(WindowTrack::new(w)),
            _ => None,
        };
        for i in 0..self.units.len() {
            let u = self.units[i];
            match self.trail.lit_value(u) {
                FALSE => return false,
                TRUE => {}
                _ => self.trail.assign(u, 0),
            }
        }
        true
    }

    /// Decides satisfiability of everything currently conjoined.
    pub fn solve(&mut self, budget: &Budget) -> SolveOutcome {
        self.stats.solve_calls += 1;
        match self.state {
            SearchState::Exhausted => return SolveOutcome::Unsat,
            SearchState::AtModel => return SolveOutcome::Sat(self.model()),
            SearchState::Fresh => {
                if !self.start() {
                    self.state = SearchState::Exhausted;
                    return SolveOutcome::Unsat;
                }
                self.state = SearchState::Searching;
            }
            SearchState::Searching => {}
        }
        let started = Instant::now();
        let start_steps = self.stats.steps;
        let mut iterations: u64 = 0;
        loop {
            iterations += 1;
            if let Some(max) = budget.max_steps {
                if self.stats.steps - start_steps > max {
                    self.reset();
                    return SolveOutcome::BudgetExceeded;
                }
            }
            if let Some(limit) = budget.max_time {
                if iterations.is_multiple_of(256) && started.elapsed() > limit {
                    self.reset();
                    return SolveOutcome::BudgetExceeded;
                }
            }
            let ok = self.propagate() && {
                if self.trail.lits.len() == self.num_vars as usize {
                    if self.verify_full() {
                        self.state = SearchState::AtModel;
                        return SolveOutcome::Sat(self.model());
                    }
                    false
                } else {
                    true
                }
            };
            if !ok {
                self.stats.conflicts += 1;
                let level = self.trail.decision_level();
                if level == 0 {
                    self.state = SearchState::Exhausted;
                    self.trail.clear();
                    return SolveOutcome::Unsat;
                }
                let decision = self.trail.decisions[level as usize - 1];
                self.trail.cancel_until(level - 1);
                self.trail.assign(decision ^ 1, level - 1);
                continue;
            }
            // decide: lowest-index free variable, random polarity
            let mut v = self.trail.next_var;
            while self.trail.value[v] != UNDEF {
                v += 1;
            }
            self.trail.next_var = v;
            let positive = self.next_polarity();
            self.stats.decisions += 1;
            self.stats.steps += 1;
            self.trail.new_level(v as u32 * 2 + (!positive) as u32);
        }
    }

    fn model(&self) -> Assignment {
        Assignment::from_bools(self.trail.value.iter().map(|&v| v == TRUE).collect())
    }

    /// Unit propagation to fixpoint over clauses and XOR rows, then the
    /// window bound check. Returns false on conflict.
    fn propagate(&mut self) -> bool {
        let level = self.trail.decision_level();
        loop {
            while self.trail.qhead < self.trail.lits.len() {
                let p = self.trail.lits[self.trail.qhead];
                self.trail.qhead += 1;
                self.stats.steps += 1;
                let false_lit = p ^ 1;
                let mut ws = std::mem::take(&mut self.watches[false_lit as usize]);
                let (mut i, mut j) = (0, 0);
                let mut conflict = false;
                while i < ws.len() {
                    let ci = ws[i];
                    i += 1;
                    let clause = &mut self.clauses[ci as usize];
                    if clause[0] == false_lit {
                        clause.swap(0, 1);
                    }
                    let first = clause[0];
                    if self.trail.lit_value(first) == TRUE {
                        ws[j] = ci;
                        j += 1;
                        continue;
                    }
                    let mut moved = false;
                    for k in 2..clause.len() {
                        if self.trail.lit_value(clause[k]) != FALSE {
                            clause.swap(1, k);
                            self.watches[clause[1] as usize].push(ci);
                            moved = true;
                            break;
                        }
                    }
                    if moved {
                        continue;
                    }
                    ws[j] = ci;
                    j += 1;
                    if self.trail.lit_value(first) == FALSE {
                        conflict = true;
                        while i < ws.len() {
                            ws[j] = ws[i];
                            j += 1;
                            i += 1;
                        }
                    } else {
                        self.trail.assign(first, level);
                    }
                }
                ws.truncate(j);
                self.watches[false_lit as usize] = ws;
                if conflict {
                    return false;
                }
            }
            if !self.matrix.rows.is_empty() {
                match self.xor_propagate(level) {
                    XorStep::Conflict => return false,
                    XorStep::Implied => continue,
                    XorStep::Quiet => {}
                }
            }
            return self.window_feasible();
        }
    }

    /// Eliminates the residual XOR system under the current trail. Rows
    /// reduced to a single free variable are implied.
    fn xor_propagate(&mut self, level: u32) -> XorStep {
        let words = self.matrix.words;
        let m = self.matrix.rows.len();
        self.scratch_rows.resize_with(m, || vec![0; words]);
        self.scratch_par.resize(m, false);
        let mut live = 0;
        for r in 0..m {
            let row = &self.matrix.rows[r];
            let mut par = self.matrix.parity[r];
            let mut any = false;
            let dst = &mut self.scratch_rows[live];
            for w in 0..words {
                par ^= (row[w] & self.trail.true_mask[w]).count_ones() & 1 == 1;
                dst[w] = row[w] & self.trail.free_mask[w];
                any |= dst[w] != 0;
            }
            if !any {
                if par {
                    return XorStep::Conflict;
                }
                continue;
            }
            self.scratch_par[live] = par;
            live += 1;
        }
        if live == 0 {
            return XorStep::Quiet;
        }
        let (rank, consistent) = eliminate(&mut self.scratch_rows[..live], &mut self.scratch_par[..live]);
        let mut implied = false;
        if consistent {
            for r in 0..rank {
                let row = &self.scratch_rows[r];
                let ones: u32 = row.iter().map(|w| w.count_ones()).sum();
                if ones == 1 {
                    let w = row.iter().position(|&x| x != 0).unwrap();
                    let var = w * 64 + row[w].trailing_zeros() as usize;
                    let code = var as u32 * 2 + (!self.scratch_par[r]) as u32;
                    self.trail.assign(code, level);
                    implied = true;
                }
            }
        }
        if !consistent {
            XorStep::Conflict
        } else if implied {
            XorStep::Implied
        } else {
            XorStep::Quiet
        }
    }

    /// False when no completion of the trail can land inside the window.
    fn window_feasible(&self) -> bool {
        let (Some(win), Some(track)) = (&self.window, &self.trail.window) else {
            return true;
        };
        let lo = track.cur + track.free_min;
        let hi = track.cur + track.free_max;
        let slack = 1e-9 * (1.0 + win.ln_high.abs().max(lo.abs()).max(hi.abs()));
        let below = win.ln_low.is_finite() && hi + slack <= win.ln_low;
        let above = lo - slack > win.ln_high;
        !(below || above)
    }

    /// Final check of a full trail. Propagation already guarantees the
    /// clauses and XOR rows (re-checked in debug builds); the window test is
    /// exact here because pruning uses a tolerance.
    fn verify_full(&self) -> bool {
        let t = &self.trail;
        debug_assert!(self.units.iter().all(|&u| t.lit_value(u) == TRUE));
        debug_assert!(self
            .clauses
            .iter()
            .all(|c| c.iter().any(|&l| t.lit_value(l) == TRUE)));
        debug_assert!(self.xors.iter().all(|x| x
            .vars()
            .iter()
            .fold(false, |acc, &v| acc ^ (t.value[v as usize - 1] == TRUE))
            == x.parity()));
        if let (Some(win), Some(track)) = (&self.window, &t.window) {
            if !win.contains_ln(track.ln_weight(&t.value)) {
                return false;
            }
        }
        true
    }

    /// DIMACS text with `x` lines for the XOR rows; the window, if any, is
    /// recorded as a comment.
    pub fn dump_dimacs(&self) -> String {
        use std::fmt::Write;
        let decode = |c: u32| {
            let v = (c >> 1) as i64 + 1;
            if c & 1 == 1 {
                -v
            } else {
                v
            }
        };
        let mut out = String::new();
        let total = self.clauses.len() + self.units.len() + self.empties;
        let _ = writeln!(out, "p cnf {} {}", self.num_vars, total);
        if let Some(w) = &self.window {
            let _ = writeln!(out, "c window ln_low={} ln_high={}", w.ln_low, w.ln_high);
        }
        for &u in &self.units {
            let _ = writeln!(out, "{} 0", decode(u));
        }
        for c in &self.clauses {
            let mut lits = c.clone();
            lits.sort_unstable();
            for l in lits {
                let _ = write!(out, "{} ", decode(l));
            }
            out.push_str("0\n");
        }
        for _ in 0..self.empties {
            out.push_str("0\n");
        }
        for x in &self.xors {
            let _ = writeln!(out, "{}", x.to_dimacs_line());
        }
        out
    }
}
