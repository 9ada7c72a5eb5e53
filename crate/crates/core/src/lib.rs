//! Approximate weighted model counting and approximately weighted-uniform
//! witness sampling for CNF formulas.
//!
//! Random XOR hashes over an independent support split the witnesses into
//! cells of roughly equal weight; a small cell is enumerated with an
//! embedded CNF+XOR solver and its weight is scaled back up (counting) or
//! one of its witnesses is drawn (sampling). An exhaustive oracle provides
//! exact counts and an ideal sampler for validation.
//!
//! ```
//! use hashcount::formula::parse_weighted_dimacs;
//! use hashcount::oracle::exact_count;
//!
//! let (f, w) = parse_weighted_dimacs("p cnf 2 1\n1 2 0\nw 1 0.6\n").unwrap();
//! let exact = exact_count(&f, &w, Default::default()).unwrap();
//! assert!((exact.count - 1.6).abs() < 1e-12);
//! ```

pub mod counting;
pub mod formula;
pub mod oracle;
pub mod sampling;
pub mod satengine;
pub mod xorhash;

mod numeric;

pub use counting::{weightmc, CountParams, WeightMcOutcome};
pub use formula::{Assignment, CnfFormula, Lit, WeightModel};
pub use sampling::{weightgen, SamplerState};
pub use satengine::{Budget, SolveOutcome, SolverInstance, WeightWindow};
