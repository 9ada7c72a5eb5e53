//! Solver answers against exhaustive enumeration.

mod common;

use std::collections::BTreeSet;

use hashcount::formula::{Assignment, CnfFormula, LiteralWeights, Lit, WeightModel};
use hashcount::satengine::{Budget, SolveOutcome, SolverInstance, WeightWindow};
use hashcount::xorhash::{HashConstraintSet, XorConstraint};
use proptest::prelude::*;

#[derive(Debug, Clone)]
struct Instance {
    n: u32,
    clauses: Vec<Vec<(u32, bool)>>,
    xors: Vec<(Vec<u32>, bool)>,
    weights: Vec<f64>,
    window: Option<(f64, f64)>,
}

fn instance() -> impl Strategy<Value = Instance> {
    (1u32..=10).prop_flat_map(|n| {
        let clause = prop::collection::vec((1..=n, any::<bool>()), 1..=4);
        let xor = (prop::collection::vec(1..=n, 0..=n as usize), any::<bool>());
        (
            Just(n),
            prop::collection::vec(clause, 0..=3 * n as usize),
            prop::collection::vec(xor, 0..=3),
            prop::collection::vec(0.05f64..0.95, n as usize),
            prop::option::of((0.0f64..1.0, 0.0f64..1.0)),
        )
            .prop_map(|(n, clauses, xors, weights, window)| Instance {
                n,
                clauses,
                xors,
                weights,
                window,
            })
    })
}

struct Built {
    formula: CnfFormula,
    weights: LiteralWeights,
    hash: HashConstraintSet,
    window: Option<WeightWindow>,
}

fn build(inst: &Instance) -> Option<Built> {
    let clauses = inst
        .clauses
        .iter()
        .map(|c| c.iter().map(|&(v, neg)| Lit::new(v, neg)).collect::<Vec<_>>());
    let formula = CnfFormula::new(inst.n, clauses, None).ok()?;
    let mut weights = LiteralWeights::new(inst.n);
    for (i, &p) in inst.weights.iter().enumerate() {
        weights.set(i as u32 + 1, p, 1.0 - p).unwrap();
    }
    let hash = HashConstraintSet::from_rows(
        inst.xors
            .iter()
            .map(|(vars, parity)| XorConstraint::new(vars.clone(), *parity))
            .collect(),
    );
    let window = inst.window.map(|(a, b)| {
        // Map the unit square onto a window inside the weight range.
        let (ln_lo, ln_hi) = weights.ln_weight_bounds();
        let span = ln_hi - ln_lo;
        let (x, y) = if a < b { (a, b) } else { (b, a + 1e-3) };
        let lo = (ln_lo + span * x - 1e-9).exp();
        let hi = (ln_lo + span * y.min(1.0) + 1e-9).exp();
        WeightWindow::new(lo, hi).unwrap()
    });
    Some(Built {
        formula,
        weights,
        hash,
        window,
    })
}

fn admits(b: &Built, sigma: &Assignment) -> bool {
    b.formula.evaluate(sigma)
        && b.hash.cell_membership(sigma)
        && b.window.is_none_or(|w| w.contains_ln(b.weights.ln_weight(sigma)))
}

fn brute(b: &Built) -> BTreeSet<Vec<bool>> {
    let n = b.formula.num_vars();
    (0..1u64 << n)
        .map(|bits| Assignment::from_bits(n, bits))
        .filter(|s| admits(b, s))
        .map(|s| s.values().to_vec())
        .collect()
}

fn engine_models(b: &Built, seed: u64) -> BTreeSet<Vec<bool>> {
    let mut engine = SolverInstance::new(&b.formula)
        .with_weights(b.weights.clone())
        .with_seed(seed);
    engine.set_window(b.window).unwrap();
    let cp = engine.push_constraints(&b.hash).unwrap();
    let support = b.formula.support().to_vec();
    let mut out = BTreeSet::new();
    loop {
        match engine.solve(&Budget::unlimited()) {
            SolveOutcome::Sat(sigma) => {
                assert!(admits(b, &sigma), "engine returned a non-model");
                assert!(out.insert(sigma.values().to_vec()), "model repeated");
                engine.add_blocking_clause(&sigma.project(&support)).unwrap();
            }
            SolveOutcome::Unsat => break,
            SolveOutcome::BudgetExceeded => panic!("unlimited budget exceeded"),
        }
    }
    engine.pop_to(cp).unwrap();
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn enumeration_matches_brute_force(inst in instance(), seed in any::<u64>()) {
        let Some(b) = build(&inst) else { return Ok(()) };
        let expected = brute(&b);
        let got = engine_models(&b, seed);
        prop_assert_eq!(&got, &expected);

        // A first call alone decides satisfiability.
        let mut engine = SolverInstance::new(&b.formula).with_weights(b.weights.clone()).with_seed(seed);
        engine.set_window(b.window).unwrap();
        engine.push_constraints(&b.hash).unwrap();
        prop_assert_eq!(engine.solve(&Budget::unlimited()).is_sat(), !expected.is_empty());
    }

    #[test]
    fn pop_restores_the_solution_set(inst in instance(), seed in any::<u64>()) {
        let Some(b) = build(&inst) else { return Ok(()) };
        let plain = Built {
            formula: b.formula.clone(),
            weights: b.weights.clone(),
            hash: HashConstraintSet::from_rows(Vec::new()),
            window: None,
        };
        let mut engine = SolverInstance::new(&b.formula).with_weights(b.weights.clone()).with_seed(seed);
        let outer = engine.push();
        engine.set_window(b.window).unwrap();
        let cp = engine.push_constraints(&b.hash).unwrap();
        while let SolveOutcome::Sat(s) = engine.solve(&Budget::unlimited()) {
            engine.add_blocking_clause(&s.project(b.formula.support())).unwrap();
        }
        engine.pop_to(cp).unwrap();
        engine.pop_to(outer).unwrap();
        let mut after = BTreeSet::new();
        while let SolveOutcome::Sat(s) = engine.solve(&Budget::unlimited()) {
            after.insert(s.values().to_vec());
            engine.add_blocking_clause(&s.project(b.formula.support())).unwrap();
        }
        prop_assert_eq!(after, brute(&plain));
    }
}

#[test]
fn window_partition_covers_each_model_once() {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
    let f = common::random_3cnf(11, 25, &mut rng);
    let WeightModel::LiteralProduct(w) = common::bench_weights(11, 1024.0, &mut rng) else { unreachable!() };
    let (ln_lo, ln_hi) = w.ln_weight_bounds();
    let windows = hashcount::counting::window_count(ln_hi - ln_lo);
    let all = brute(&Built {
        formula: f.clone(),
        weights: w.clone(),
        hash: HashConstraintSet::from_rows(Vec::new()),
        window: None,
    });
    let mut seen = BTreeSet::new();
    for m in 1..=windows {
        let b = Built {
            formula: f.clone(),
            weights: w.clone(),
            hash: HashConstraintSet::from_rows(Vec::new()),
            window: Some(WeightWindow::dyadic(ln_hi, m)),
        };
        for model in engine_models(&b, m as u64) {
            assert!(seen.insert(model), "model in two windows");
        }
    }
    assert_eq!(seen, all);
}
