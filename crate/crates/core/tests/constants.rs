//! Derived constants checked against exact rational arithmetic.

use hashcount::counting::{iterations_for_delta, pivot_for_epsilon, window_count};
use hashcount::sampling::{compute_kappa_pivot, MIN_EPSILON};
use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, ToPrimitive, Zero};

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// `e^{3/2}` as a truncated Taylor series; 60 terms leave an error far
/// below 1e-40.
fn exp_three_halves() -> BigRational {
    let x = rat(3, 2);
    let mut term = BigRational::one();
    let mut sum = BigRational::one();
    for k in 1..60 {
        term = term * &x / BigRational::from_integer(BigInt::from(k));
        sum += &term;
    }
    sum
}

fn ceil(x: &BigRational) -> i64 {
    x.ceil().to_integer().to_i64().unwrap()
}

/// `(1+κ)(2.36 + 0.51/(1−κ)²) − 1`.
fn tolerance_of(kappa: &BigRational) -> BigRational {
    let one = BigRational::one();
    let gap = &one - kappa;
    (&one + kappa) * (rat(236, 100) + rat(51, 100) / (&gap * &gap)) - one
}

/// Root of `tolerance_of(κ) = ε` by rational bisection to 2^-80.
fn kappa_oracle(epsilon: &BigRational) -> BigRational {
    let (mut lo, mut hi) = (BigRational::zero(), BigRational::one());
    let two = rat(2, 1);
    for _ in 0..80 {
        let mid = (&lo + &hi) / &two;
        if tolerance_of(&mid) < *epsilon {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo + hi) / two
}

fn f(x: &BigRational) -> f64 {
    x.to_f64().unwrap()
}

#[test]
fn counting_pivot_matches_exact_evaluation() {
    let eps = rat(4, 5);
    let one = BigRational::one();
    let factor = &one + &one / &eps;
    let exact = exp_three_halves() * &factor * &factor;
    // 22.689... so the pivot is 2·23.
    assert_eq!(ceil(&exact), 23);
    assert_eq!(pivot_for_epsilon(0.8), 2 * ceil(&exact) as u64);
    assert_eq!(pivot_for_epsilon(0.8), 46);
}

#[test]
fn iteration_count_matches_integer_bounds() {
    // ⌈35·log₂15⌉ = 137 iff 2^136 < 15^35 ≤ 2^137.
    let p = BigInt::from(15).pow(35);
    assert!(BigInt::from(2).pow(136) < p);
    assert!(p <= BigInt::from(2).pow(137));
    assert_eq!(iterations_for_delta(0.2), 137);
}

#[test]
fn sampler_constants_match_rational_bisection() {
    let kappa = kappa_oracle(&rat(5, 1));
    let residual = tolerance_of(&kappa) - rat(5, 1);
    assert!(residual.abs() < rat(1, 1_000_000_000_000));

    let one = BigRational::one();
    let factor = &one + &one / &kappa;
    let pivot = ceil(&(exp_three_halves() * &factor * &factor));
    let hi = &one + (&one + &kappa) * BigRational::from_integer(BigInt::from(pivot));
    let lo = BigRational::from_integer(BigInt::from(pivot)) / (&one + &kappa);

    let kp = compute_kappa_pivot(5.0).unwrap();
    assert!((kp.kappa - f(&kappa)).abs() < 1e-6);
    assert_eq!(kp.pivot as i64, pivot);
    assert_eq!(pivot, 46);
    assert!((kp.hi_thresh() - f(&hi)).abs() < 1e-6);
    assert!((kp.lo_thresh() - f(&lo)).abs() < 1e-6);

    // Frozen from the rational evaluation above.
    assert!((f(&kappa) - 0.460_066_481_511_512).abs() < 1e-12);
    assert!((f(&hi) - 68.163_058_149_529_57).abs() < 1e-9);
    assert!((f(&lo) - 31.505_414_707_129_756).abs() < 1e-9);

    // Displayed values at their printed precision.
    assert!((kp.kappa - 0.4602).abs() < 5e-4);
    assert!((kp.hi_thresh() - 68.17).abs() < 0.01);
    assert!((kp.lo_thresh() - 31.50).abs() < 0.01);
}

#[test]
fn minimum_sampler_tolerance() {
    assert_eq!(tolerance_of(&BigRational::zero()), rat(187, 100));
    assert_eq!(MIN_EPSILON, 1.87);
    assert!(compute_kappa_pivot(1.87).is_err());
    assert!(compute_kappa_pivot(1.88).is_ok());
}

#[test]
fn window_count_for_ten_octaves() {
    // ⌈log₂(1 / 2^-10)⌉ + 1
    assert_eq!(window_count(10.0 * std::f64::consts::LN_2), 11);
    assert_eq!(window_count((1.0f64 / 2f64.powi(-10)).ln()), 11);
}
