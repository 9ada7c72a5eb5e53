#![allow(dead_code)]

use hashcount::formula::{CnfFormula, LiteralWeights, Lit, WeightModel};
use rand::Rng;

/// Random 3-CNF over `n` variables with `m` clauses of distinct variables.
pub fn random_3cnf<R: Rng>(n: u32, m: usize, rng: &mut R) -> CnfFormula {
    let clauses: Vec<Vec<Lit>> = (0..m)
        .map(|_| {
            rand::seq::index::sample(rng, n as usize, 3)
                .into_iter()
                .map(|v| Lit::new(v as u32 + 1, rng.gen()))
                .collect()
        })
        .collect();
    CnfFormula::new(n, clauses, None).unwrap()
}

/// Benchmark literal weights with tilt at most `r`.
pub fn bench_weights<R: Rng>(n: u32, r: f64, rng: &mut R) -> WeightModel {
    WeightModel::LiteralProduct(LiteralWeights::benchmark(n, r, rng).unwrap().0)
}

pub fn within(est: f64, exact: f64, factor: f64) -> bool {
    est >= exact / factor && est <= exact * factor
}

pub fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    xs[(xs.len() - 1) / 2]
}
