//! Random members of the 3-wise independent XOR hash family, restricted to an
//! independent support.
//!
//! Row `i` of a hash `h` computes `a_{i,0} ⊕ ⊕_l a_{i,l}·y[l]`. The cell
//! selector bit `α_i` is folded into the stored parity together with
//! `a_{i,0}`, so a row is satisfied iff the XOR of its variables equals
//! [`XorConstraint::parity`].

use std::fmt;

use rand::Rng;

use crate::formula::Assignment;

/// `⊕_{v ∈ vars} v = parity`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct XorConstraint {
    vars: Vec<u32>,
    parity: bool,
}

impl XorConstraint {
    pub fn new(mut vars: Vec<u32>, parity: bool) -> Self {
        vars.sort_unstable();
        vars.dedup();
        XorConstraint { vars, parity }
    }

    /// Sorted, duplicate-free.
    pub fn vars(&self) -> &[u32] {
        &self.vars
    }

    pub fn parity(&self) -> bool {
        self.parity
    }

    pub fn is_satisfied(&self, sigma: &Assignment) -> bool {
        self.vars.iter().fold(false, |acc, &v| acc ^ sigma.get(v)) == self.parity
    }

    /// `x 1 -2 3 0` form; a negated first literal encodes parity 0. Empty rows
    /// have no such form and are written as comments.
    pub fn to_dimacs_line(&self) -> String {
        if self.vars.is_empty() {
            return format!("c empty-xor {}", self.parity as u8);
        }
        let mut s = String::from("x");
        for (i, v) in self.vars.iter().enumerate() {
            if i == 0 && !self.parity {
                s.push_str(&format!(" -{}", v));
            } else {
                s.push_str(&format!(" {}", v));
            }
        }
        s.push_str(" 0");
        s
    }

    /// Inverse of [`XorConstraint::to_dimacs_line`]. Every negated literal
    /// flips the parity, so any sign pattern is accepted.
    pub fn from_dimacs_line(line: &str) -> Option<Self> {
        let mut tokens = line.split_whitespace();
        match tokens.next()? {
            "x" => {}
            "c" => {
                if tokens.next()? != "empty-xor" {
                    return None;
                }
                let parity = match tokens.next()? {
                    "0" => false,
                    "1" => true,
                    _ => return None,
                };
                return Some(XorConstraint::new(Vec::new(), parity));
            }
            _ => return None,
        }
        let mut parity = true;
        let mut vars = Vec::new();
        for tok in tokens {
            let v: i64 = tok.parse().ok()?;
            if v == 0 {
                return Some(XorConstraint::new(vars, parity));
            }
            if v < 0 {
                parity = !parity;
            }
            vars.push(u32::try_from(v.unsigned_abs()).ok()?);
        }
        None
    }
}

impl fmt::Display for XorConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_dimacs_line())
    }
}

/// `m` XOR rows drawn over one support: a hash `h` together with its target
/// cell `α`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct HashConstraintSet {
    rows: Vec<XorConstraint>,
}

impl HashConstraintSet {
    pub fn from_rows(rows: Vec<XorConstraint>) -> Self {
        HashConstraintSet { rows }
    }

    pub fn rows(&self) -> &[XorConstraint] {
        &self.rows
    }

    pub fn m(&self) -> usize {
        self.rows.len()
    }

    /// Whether `sigma` lies in the cell `h^{-1}(α)`.
    pub fn cell_membership(&self, sigma: &Assignment) -> bool {
        self.rows.iter().all(|r| r.is_satisfied(sigma))
    }

    pub fn to_dimacs(&self) -> String {
        let mut s = String::new();
        for r in &self.rows {
            s.push_str(&r.to_dimacs_line());
            s.push('\n');
        }
        s
    }
}

/// Draws `h ∈ H_xor(|S|, m, 3)` and `α ∈ {0,1}^m` uniformly: every support
/// variable enters each row with probability 1/2, and the parity is the XOR
/// of the fair bits `a_{i,0}` and `α_i`.
///
/// Panics if `support` is empty or `m == 0`.
pub fn sample_hash<R: Rng + ?Sized>(support: &[u32], m: usize, rng: &mut R) -> HashConstraintSet {
    assert!(!support.is_empty(), "hash support must be non-empty");
    assert!(m >= 1, "hash needs at least one row");
    let mut rows = Vec::with_capacity(m);
    for _ in 0..m {
        let mut vars = Vec::with_capacity(support.len() / 2 + 1);
        for chunk in support.chunks(64) {
            let bits: u64 = rng.gen();
            for (j, &v) in chunk.iter().enumerate() {
                if bits >> j & 1 == 1 {
                    vars.push(v);
                }
            }
        }
        let a0: bool = rng.gen();
        let alpha: bool = rng.gen();
        rows.push(XorConstraint {
            vars,
            parity: a0 ^ alpha,
        });
    }
    HashConstraintSet { rows }
}
