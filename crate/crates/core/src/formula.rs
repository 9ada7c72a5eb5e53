//! Weighted CNF formulas.
//!
//! A [`CnfFormula`] is a clause list over variables `1..=n` together with a
//! declared independent support `S`. Weights live separately in a
//! [`WeightModel`]; the literal-product variant keeps its factors in log
//! space so that products over thousands of variables do not underflow.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use thiserror::Error;

/// A literal over a 1-based variable index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Lit {
    var: u32,
    negated: bool,
}

impl Lit {
    /// Panics if `var` is zero.
    pub fn new(var: u32, negated: bool) -> Self {
        assert!(var >= 1, "variable indices are 1-based");
        Lit { var, negated }
    }

    pub fn pos(var: u32) -> Self {
        Lit::new(var, false)
    }

    pub fn neg(var: u32) -> Self {
        Lit::new(var, true)
    }

    /// Converts a signed DIMACS integer. Returns `None` for 0 or values that
    /// do not fit a `u32` index.
    pub fn from_dimacs(value: i64) -> Option<Self> {
        if value == 0 {
            return None;
        }
        let var = u32::try_from(value.unsigned_abs()).ok()?;
        Some(Lit::new(var, value < 0))
    }

    pub fn to_dimacs(self) -> i64 {
        if self.negated {
            -(self.var as i64)
        } else {
            self.var as i64
        }
    }

    pub fn var(self) -> u32 {
        self.var
    }

    pub fn is_negated(self) -> bool {
        self.negated
    }

    /// Truth value of the literal under `sigma`.
    pub fn eval(self, sigma: &Assignment) -> bool {
        sigma.get(self.var) != self.negated
    }
}

impl std::ops::Not for Lit {
    type Output = Lit;

    fn not(self) -> Lit {
        Lit {
            var: self.var,
            negated: !self.negated,
        }
    }
}

impl fmt::Display for Lit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_dimacs())
    }
}

/// A disjunction of literals. Normalized clauses never mention a variable
/// twice and are never empty.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Clause {
    lits: Vec<Lit>,
}

/// Outcome of normalizing a raw literal list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Normalized {
    Clause(Clause),
    /// The list contained a complementary pair.
    Tautology,
    Empty,
}

impl Clause {
    /// Deduplicates literals, keeping first-occurrence order.
    pub fn normalize(lits: impl IntoIterator<Item = Lit>) -> Normalized {
        let mut out: Vec<Lit> = Vec::new();
        for lit in lits {
            if out.contains(&!lit) {
                return Normalized::Tautology;
            }
            if !out.contains(&lit) {
                out.push(lit);
            }
        }
        if out.is_empty() {
            Normalized::Empty
        } else {
            Normalized::Clause(Clause { lits: out })
        }
    }

    pub fn lits(&self) -> &[Lit] {
        &self.lits
    }

    pub fn len(&self) -> usize {
        self.lits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lits.is_empty()
    }

    pub fn is_satisfied(&self, sigma: &Assignment) -> bool {
        self.lits.iter().any(|l| l.eval(sigma))
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for lit in &self.lits {
            write!(f, "{} ", lit)?;
        }
        write!(f, "0")
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormulaError {
    #[error("literal {lit} refers to a variable outside 1..={num_vars}")]
    LiteralOutOfRange { lit: i64, num_vars: u32 },
    #[error("independent support variable {var} outside 1..={num_vars}")]
    SupportOutOfRange { var: u32, num_vars: u32 },
    #[error("independent support is empty")]
    EmptySupport,
    #[error("clause {index} is empty")]
    EmptyClause { index: usize },
}

/// Clauses over `num_vars` variables plus a declared independent support.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CnfFormula {
    num_vars: u32,
    clauses: Vec<Clause>,
    support: Vec<u32>,
    dropped_tautologies: usize,
}

impl CnfFormula {
    /// Builds a formula from raw literal lists. Tautological clauses are
    /// dropped and counted; `support = None` means the full variable set.
    pub fn new(
        num_vars: u32,
        clauses: impl IntoIterator<Item = Vec<Lit>>,
        support: Option<Vec<u32>>,
    ) -> Result<Self, FormulaError> {
        let mut kept = Vec::new();
        let mut dropped_tautologies = 0;
        for (index, raw) in clauses.into_iter().enumerate() {
            if let Some(bad) = raw.iter().find(|l| l.var() > num_vars) {
                return Err(FormulaError::LiteralOutOfRange {
                    lit: bad.to_dimacs(),
                    num_vars,
                });
            }
            match Clause::normalize(raw) {
                Normalized::Clause(c) => kept.push(c),
                Normalized::Tautology => dropped_tautologies += 1,
                Normalized::Empty => return Err(FormulaError::EmptyClause { index }),
            }
        }
        let support: Vec<u32> = match support {
            None => (1..=num_vars).collect(),
            Some(vars) => {
                let set: BTreeSet<u32> = vars.into_iter().collect();
                if let Some(&var) = set.iter().find(|&&v| v == 0 || v > num_vars) {
                    return Err(FormulaError::SupportOutOfRange { var, num_vars });
                }
                set.into_iter().collect()
            }
        };
        if support.is_empty() {
            return Err(FormulaError::EmptySupport);
        }
        Ok(CnfFormula {
            num_vars,
            clauses: kept,
            support,
            dropped_tautologies,
        })
    }

    pub fn num_vars(&self) -> u32 {
        self.num_vars
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    /// Independent support, sorted ascending.
    pub fn support(&self) -> &[u32] {
        &self.support
    }

    pub fn has_full_support(&self) -> bool {
        self.support.len() == self.num_vars as usize
    }

    /// Number of tautological clauses removed while building.
    pub fn dropped_tautologies(&self) -> usize {
        self.dropped_tautologies
    }

    /// Same clauses with a different independent support.
    pub fn with_support(&self, support: Vec<u32>) -> Result<Self, FormulaError> {
        let mut f = CnfFormula::new(
            self.num_vars,
            self.clauses.iter().map(|c| c.lits.clone()),
            Some(support),
        )?;
        f.dropped_tautologies = self.dropped_tautologies;
        Ok(f)
    }

    pub fn evaluate(&self, sigma: &Assignment) -> bool {
        self.first_violated(sigma).is_none()
    }

    /// Index of the first clause falsified by `sigma`.
    pub fn first_violated(&self, sigma: &Assignment) -> Option<usize> {
        debug_assert_eq!(sigma.num_vars(), self.num_vars);
        self.clauses.iter().position(|c| !c.is_satisfied(sigma))
    }
}

/// A total assignment over variables `1..=n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Assignment {
    values: Vec<bool>,
}

impl Assignment {
    /// `values[i]` is the value of variable `i + 1`.
    pub fn from_bools(values: Vec<bool>) -> Self {
        Assignment { values }
    }

    /// Assignment whose bit `i` of `bits` gives variable `i + 1`.
    pub fn from_bits(num_vars: u32, bits: u64) -> Self {
        assert!(num_vars <= 64);
        Assignment {
            values: (0..num_vars).map(|i| bits >> i & 1 == 1).collect(),
        }
    }

    pub fn num_vars(&self) -> u32 {
        self.values.len() as u32
    }

    pub fn get(&self, var: u32) -> bool {
        self.values[var as usize - 1]
    }

    pub fn values(&self) -> &[bool] {
        &self.values
    }

    pub fn project(&self, support: &[u32]) -> PartialAssignment {
        PartialAssignment {
            entries: support.iter().map(|&v| (v, self.get(v))).collect(),
        }
    }

    /// Signed DIMACS literals, one per variable.
    pub fn to_lits(&self) -> Vec<i64> {
        self.values
            .iter()
            .enumerate()
            .map(|(i, &b)| if b { i as i64 + 1 } else { -(i as i64 + 1) })
            .collect()
    }

    /// `v 1 -2 3 0` style model line.
    pub fn to_model_line(&self) -> String {
        let mut s = String::from("v");
        for lit in self.to_lits() {
            s.push(' ');
            s.push_str(&lit.to_string());
        }
        s.push_str(" 0");
        s
    }
}

/// Restriction of an assignment to a variable subset, ordered by variable.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PartialAssignment {
    entries: Vec<(u32, bool)>,
}

impl PartialAssignment {
    pub fn new(mut entries: Vec<(u32, bool)>) -> Self {
        entries.sort_unstable();
        PartialAssignment { entries }
    }

    pub fn entries(&self) -> &[(u32, bool)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn vars(&self) -> impl Iterator<Item = u32> + '_ {
        self.entries.iter().map(|&(v, _)| v)
    }

    pub fn get(&self, var: u32) -> Option<bool> {
        self.entries
            .binary_search_by_key(&var, |&(v, _)| v)
            .ok()
            .map(|i| self.entries[i].1)
    }
}

impl fmt::Display for PartialAssignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for &(v, b) in &self.entries {
            if !first {
                write!(f, " ")?;
            }
            first = false;
            if b {
                write!(f, "{}", v)?;
            } else {
                write!(f, "-{}", v)?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WeightError {
    #[error("weight {0} is outside (0, 1]")]
    OutOfRange(f64),
    #[error("weight model cannot be used here: {0}")]
    Unsupported(&'static str),
}

/// Per-variable literal weights `(w_pos, w_neg)`, each in `(0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LiteralWeights {
    pos: Vec<f64>,
    neg: Vec<f64>,
    ln_pos: Vec<f64>,
    ln_neg: Vec<f64>,
}

impl LiteralWeights {
    /// All literals weighted 1.
    pub fn new(num_vars: u32) -> Self {
        let n = num_vars as usize;
        LiteralWeights {
            pos: vec![1.0; n],
            neg: vec![1.0; n],
            ln_pos: vec![0.0; n],
            ln_neg: vec![0.0; n],
        }
    }

    pub fn num_vars(&self) -> u32 {
        self.pos.len() as u32
    }

    pub fn set(&mut self, var: u32, w_pos: f64, w_neg: f64) -> Result<(), WeightError> {
        for w in [w_pos, w_neg] {
            if !(w > 0.0 && w <= 1.0) {
                return Err(WeightError::OutOfRange(w));
            }
        }
        let i = var as usize - 1;
        self.pos[i] = w_pos;
        self.neg[i] = w_neg;
        self.ln_pos[i] = w_pos.ln();
        self.ln_neg[i] = w_neg.ln();
        Ok(())
    }

    /// `(w_pos, w_neg)` of `var`.
    pub fn get(&self, var: u32) -> (f64, f64) {
        let i = var as usize - 1;
        (self.pos[i], self.neg[i])
    }

    /// Natural-log factor contributed by `var` taking `value`.
    pub fn ln_factor(&self, var: u32, value: bool) -> f64 {
        let i = var as usize - 1;
        if value {
            self.ln_pos[i]
        } else {
            self.ln_neg[i]
        }
    }

    pub fn is_default(&self, var: u32) -> bool {
        self.get(var) == (1.0, 1.0)
    }

    pub fn ln_weight(&self, sigma: &Assignment) -> f64 {
        sigma
            .values()
            .iter()
            .enumerate()
            .map(|(i, &b)| if b { self.ln_pos[i] } else { self.ln_neg[i] })
            .sum()
    }

    /// `(ln L, ln H)`: log of the smallest and largest weight any total
    /// assignment can have.
    pub fn ln_weight_bounds(&self) -> (f64, f64) {
        let lo = (0..self.pos.len())
            .map(|i| self.ln_pos[i].min(self.ln_neg[i]))
            .sum();
        let hi = (0..self.pos.len())
            .map(|i| self.ln_pos[i].max(self.ln_neg[i]))
            .sum();
        (lo, hi)
    }

    /// Benchmark weights: `m = max(15, ⌈n/100⌉)` randomly chosen variables
    /// (all of them when `n < m`) get `(p, 1−p)` with `(p/(1−p))^m = r`;
    /// every other literal weighs 1. Witness tilt is then at most `r`.
    /// Returns the weights and the chosen variables.
    pub fn benchmark<R: Rng + ?Sized>(num_vars: u32, r: f64, rng: &mut R) -> Result<(Self, Vec<u32>), WeightError> {
        if num_vars == 0 {
            return Err(WeightError::Unsupported("benchmark weights need at least one variable"));
        }
        if !(r.is_finite() && r >= 1.0) {
            return Err(WeightError::OutOfRange(r));
        }
        let m = benchmark_weighted_count(num_vars);
        let root = r.powf(1.0 / m as f64);
        let p = root / (1.0 + root);
        let mut chosen: Vec<u32> = rand::seq::index::sample(rng, num_vars as usize, m as usize)
            .into_iter()
            .map(|i| i as u32 + 1)
            .collect();
        chosen.sort_unstable();
        let mut w = LiteralWeights::new(num_vars);
        for &v in &chosen {
            w.set(v, p, 1.0 - p)?;
        }
        Ok((w, chosen))
    }

    /// A priori tilt bound `∏ max(w_pos, w_neg) / min(w_pos, w_neg)`.
    pub fn tilt_upper_bound(&self) -> f64 {
        let (lo, hi) = self.ln_weight_bounds();
        (hi - lo).exp()
    }
}

/// Number of variables [`LiteralWeights::benchmark`] weights:
/// `min(n, max(15, ⌈n/100⌉))`.
pub fn benchmark_weighted_count(num_vars: u32) -> u32 {
    num_vars.div_ceil(100).max(15).min(num_vars)
}

/// Opaque weight callback. Results are validated to lie in `(0, 1]`.
pub type WeightFn = dyn Fn(&Assignment) -> f64 + Send + Sync;

/// How an assignment is weighted.
#[derive(Clone)]
pub enum WeightModel {
    Uniform,
    LiteralProduct(LiteralWeights),
    BlackBox {
        func: Arc<WeightFn>,
        /// Whether the callback may be invoked from several threads at once.
        concurrent: bool,
    },
}

impl fmt::Debug for WeightModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightModel::Uniform => write!(f, "Uniform"),
            WeightModel::LiteralProduct(w) => f.debug_tuple("LiteralProduct").field(w).finish(),
            WeightModel::BlackBox { concurrent, .. } => f
                .debug_struct("BlackBox")
                .field("concurrent", concurrent)
                .finish_non_exhaustive(),
        }
    }
}

impl WeightModel {
    pub fn black_box(func: impl Fn(&Assignment) -> f64 + Send + Sync + 'static) -> Self {
        WeightModel::BlackBox {
            func: Arc::new(func),
            concurrent: false,
        }
    }

    /// Natural log of `w(sigma)`.
    pub fn ln_weight(&self, sigma: &Assignment) -> Result<f64, WeightError> {
        match self {
            WeightModel::Uniform => Ok(0.0),
            WeightModel::LiteralProduct(w) => Ok(w.ln_weight(sigma)),
            WeightModel::BlackBox { func, .. } => {
                let w = func(sigma);
                if w.is_finite() && w > 0.0 && w <= 1.0 {
                    Ok(w.ln())
                } else {
                    Err(WeightError::OutOfRange(w))
                }
            }
        }
    }

    /// `w(sigma)` in linear space. Literal products over many variables may
    /// round to zero here; use [`WeightModel::ln_weight`] for those.
    pub fn weight(&self, sigma: &Assignment) -> Result<f64, WeightError> {
        match self {
            WeightModel::BlackBox { func, .. } => {
                let w = func(sigma);
                if w.is_finite() && w > 0.0 && w <= 1.0 {
                    Ok(w)
                } else {
                    Err(WeightError::OutOfRange(w))
                }
            }
            _ => self.ln_weight(sigma).map(f64::exp),
        }
    }

    pub fn literal_weights(&self) -> Option<&LiteralWeights> {
        match self {
            WeightModel::LiteralProduct(w) => Some(w),
            _ => None,
        }
    }

    /// Whether independent evaluations may run on separate threads.
    pub fn allows_parallel(&self) -> bool {
        match self {
            WeightModel::BlackBox { concurrent, .. } => *concurrent,
            _ => true,
        }
    }
}

/// Upper bound `r ≥ 1` on the ratio between the heaviest and lightest witness.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct TiltBound(f64);

impl TiltBound {
    pub fn new(r: f64) -> Option<Self> {
        (r.is_finite() && r >= 1.0).then_some(TiltBound(r))
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("line {line}: missing or malformed `p cnf` header")]
    MalformedHeader { line: usize },
    #[error("line {line}: content before the `p cnf` header")]
    MissingHeader { line: usize },
    #[error("line {line}: invalid token `{token}`")]
    InvalidToken { line: usize, token: String },
    #[error("line {line}: literal {lit} out of range 1..={num_vars}")]
    LiteralOutOfRange { line: usize, lit: i64, num_vars: u32 },
    #[error("line {line}: weight {weight} outside (0,1)")]
    WeightOutOfRange { line: usize, weight: f64 },
    #[error("line {line}: duplicate weight for literal {lit}")]
    DuplicateWeight { line: usize, lit: i64 },
    #[error("line {line}: empty clause")]
    EmptyClause { line: usize },
    #[error("{0}")]
    Formula(#[from] FormulaError),
}

fn parse_int(tok: &str, line: usize) -> Result<i64, ParseError> {
    tok.parse().map_err(|_| ParseError::InvalidToken {
        line,
        token: tok.to_string(),
    })
}

/// Parses DIMACS CNF with optional `w <var> <p>` / `w -<var> <q>` weight
/// lines and `c ind ... 0` independent-support lines.
///
/// `w v p` sets `(w_pos, w_neg) = (p, 1 - p)` and requires `0 < p < 1`.
/// `w -v q` overrides `w_neg` alone and requires `0 < q ≤ 1`. Clauses
/// containing a complementary pair are dropped (see
/// [`CnfFormula::dropped_tautologies`]).
pub fn parse_weighted_dimacs(text: &str) -> Result<(CnfFormula, WeightModel), ParseError> {
    let mut header: Option<(u32, usize)> = None;
    let mut clauses: Vec<Vec<Lit>> = Vec::new();
    let mut current: Vec<Lit> = Vec::new();
    let mut support: Option<Vec<u32>> = None;
    let mut pos_w: Vec<(u32, f64)> = Vec::new();
    let mut neg_w: Vec<(u32, f64)> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            continue;
        }
        if trimmed.starts_with('%') {
            break;
        }
        let tokens: Vec<&str> = trimmed.split_whitespace().collect();
        match tokens[0] {
            "c" => {
                if tokens.get(1) == Some(&"ind") {
                    let n = header.ok_or(ParseError::MissingHeader { line })?.0;
                    let set = support.get_or_insert_with(Vec::new);
                    for tok in &tokens[2..] {
                        let v = parse_int(tok, line)?;
                        if v == 0 {
                            break;
                        }
                        if v < 0 || v > n as i64 {
                            return Err(ParseError::LiteralOutOfRange {
                                line,
                                lit: v,
                                num_vars: n,
                            });
                        }
                        set.push(v as u32);
                    }
                }
            }
            t if t.starts_with('c') => {}
            "p" => {
                if header.is_some() || tokens.len() != 4 || tokens[1] != "cnf" {
                    return Err(ParseError::MalformedHeader { line });
                }
                let n = tokens[2]
                    .parse::<u32>()
                    .map_err(|_| ParseError::MalformedHeader { line })?;
                let m = tokens[3]
                    .parse::<usize>()
                    .map_err(|_| ParseError::MalformedHeader { line })?;
                header = Some((n, m));
            }
            "w" => {
                let n = header.ok_or(ParseError::MissingHeader { line })?.0;
                let args = match tokens.len() {
                    3 => &tokens[1..3],
                    4 if tokens[3] == "0" => &tokens[1..3],
                    _ => {
                        return Err(ParseError::InvalidToken {
                            line,
                            token: trimmed.to_string(),
                        })
                    }
                };
                let lit = parse_int(args[0], line)?;
                if lit == 0 || lit.unsigned_abs() > n as u64 {
                    return Err(ParseError::LiteralOutOfRange {
                        line,
                        lit,
                        num_vars: n,
                    });
                }
                let weight: f64 = args[1].parse().map_err(|_| ParseError::InvalidToken {
                    line,
                    token: args[1].to_string(),
                })?;
                let var = lit.unsigned_abs() as u32;
                let (list, ok) = if lit > 0 {
                    (&mut pos_w, weight > 0.0 && weight < 1.0)
                } else {
                    (&mut neg_w, weight > 0.0 && weight <= 1.0)
                };
                if !ok {
                    return Err(ParseError::WeightOutOfRange { line, weight });
                }
                if list.iter().any(|&(v, _)| v == var) {
                    return Err(ParseError::DuplicateWeight { line, lit });
                }
                list.push((var, weight));
            }
            _ => {
                let n = header.ok_or(ParseError::MissingHeader { line })?.0;
                for tok in &tokens {
                    let v = parse_int(tok, line)?;
                    if v == 0 {
                        if current.is_empty() {
                            return Err(ParseError::EmptyClause { line });
                        }
                        clauses.push(std::mem::take(&mut current));
                        continue;
                    }
                    if v.unsigned_abs() > n as u64 {
                        return Err(ParseError::LiteralOutOfRange {
                            line,
                            lit: v,
                            num_vars: n,
                        });
                    }
                    current.push(Lit::from_dimacs(v).expect("nonzero literal"));
                }
            }
        }
    }
    let (num_vars, _declared) = header.ok_or(ParseError::MalformedHeader { line: 0 })?;
    // a final clause missing its terminating 0 is accepted
    if !current.is_empty() {
        clauses.push(current);
    }
    let formula = CnfFormula::new(num_vars, clauses, support)?;
    let model = if pos_w.is_empty() && neg_w.is_empty() {
        WeightModel::Uniform
    } else {
        let mut weights = LiteralWeights::new(num_vars);
        for &(v, p) in &pos_w {
            weights.set(v, p, 1.0 - p).expect("checked range");
        }
        for &(v, q) in &neg_w {
            let (p, _) = weights.get(v);
            weights.set(v, p, q).expect("checked range");
        }
        WeightModel::LiteralProduct(weights)
    };
    Ok((formula, model))
}

/// Writes `p cnf`, `c ind`, `w` lines and clauses, in that order. Black-box
/// models cannot be written.
pub fn write_weighted_dimacs(
    formula: &CnfFormula,
    model: &WeightModel,
) -> Result<String, WeightError> {
    use fmt::Write;
    let mut out = String::new();
    let _ = writeln!(out, "p cnf {} {}", formula.num_vars(), formula.clauses().len());
    out.push_str("c ind");
    for v in formula.support() {
        let _ = write!(out, " {}", v);
    }
    out.push_str(" 0\n");
    match model {
        WeightModel::Uniform => {}
        WeightModel::LiteralProduct(w) => {
            for var in 1..=w.num_vars() {
                let (p, q) = w.get(var);
                if p < 1.0 {
                    let _ = writeln!(out, "w {} {}", var, p);
                    if q != 1.0 - p {
                        let _ = writeln!(out, "w -{} {}", var, q);
                    }
                } else if q != 1.0 {
                    let _ = writeln!(out, "w -{} {}", var, q);
                }
            }
        }
        WeightModel::BlackBox { .. } => {
            return Err(WeightError::Unsupported("black-box weights have no text form"))
        }
    }
    for c in formula.clauses() {
        let _ = writeln!(out, "{}", c);
    }
    Ok(out)
}
