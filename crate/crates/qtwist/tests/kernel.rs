use num_bigint::BigInt;
use num_traits::{One, Zero};
use proptest::prelude::*;

use qtwist::kernel::{exp_series, q, q_binom, q_int, qf, series_inv, series_mul, Ctx, Series, Q};

const K: usize = 4;

fn series(c: &[i64]) -> Series {
    Series::from_vec(c.iter().map(|&x| q(x)).collect())
}

fn arb_q() -> impl Strategy<Value = Q> {
    (-9i64..=9, 1i64..=5).prop_map(|(n, d)| qf(n, d))
}

fn arb_series() -> impl Strategy<Value = Series> {
    proptest::collection::vec(arb_q(), K).prop_map(Series::from_vec)
}

fn arb_unit() -> impl Strategy<Value = Series> {
    (arb_series(), arb_q().prop_filter("nonzero", |x| !x.is_zero())).prop_map(|(s, c0)| {
        let mut c = s.coeffs().to_vec();
        c[0] = c0;
        Series::from_vec(c)
    })
}

fn arb_nilpotent() -> impl Strategy<Value = Series> {
    arb_series().prop_map(|s| {
        let mut c = s.coeffs().to_vec();
        c[0] = Q::zero();
        Series::from_vec(c)
    })
}

fn mul(a: &Series, b: &Series) -> Series {
    series_mul(a, b).unwrap()
}

// e^{t ħ} by its Taylor coefficients.
fn exp_linear(order: usize, t: &Q) -> Series {
    let mut c = Vec::with_capacity(order);
    let mut term = Q::one();
    for n in 0..order {
        if n > 0 {
            term = term * t / Q::from_integer(BigInt::from(n));
        }
        c.push(term.clone());
    }
    Series::from_vec(c)
}

// [n]_q = q^{n-1} + q^{n-3} + ... + q^{1-n}, q = e^{ħd/2}
fn q_int_oracle(order: usize, n: i64, d: &Q) -> Series {
    let mut acc = Series::zero(order);
    let mut i = 1 - n;
    while i < n {
        acc += &exp_linear(order, &(d * Q::from_integer(BigInt::from(i)) / Q::from_integer(BigInt::from(2))));
        i += 2;
    }
    acc
}

#[test]
fn examples() {
    assert_eq!(mul(&series(&[1, 1, 0]), &series(&[1, -1, 0])), series(&[1, 0, -1]));
    assert_eq!(series_inv(&series(&[1, 1, 0])).unwrap(), series(&[1, -1, 1]));
    assert_eq!(exp_series(&series(&[0, 1, 0])).unwrap(), Series::from_vec(vec![q(1), q(1), qf(1, 2)]));
    assert!(q_int(3, 1, &q(7)).is_one());
    assert!(q_int(3, 0, &q(7)).is_zero());
    assert_eq!(q_int(3, 2, &q(2)), series(&[2, 0, 1]));
    assert_eq!(q_binom(3, 2, 1, &q(2)).unwrap(), series(&[2, 0, 1]));
}

#[test]
fn order_mismatch_is_an_error() {
    assert!(series_mul(&series(&[1, 0]), &series(&[1, 0, 0])).is_err());
    assert!(series_inv(&series(&[0, 1, 0])).is_err());
    assert!(exp_series(&series(&[1, 0, 0])).is_err());
    assert!(q_binom(3, 2, 3, &q(1)).is_err());
}

#[test]
fn q_int_matches_closed_sum() {
    for n in 0..=7 {
        for d in [q(1), q(2), qf(1, 3), qf(-3, 2)] {
            assert_eq!(q_int(6, n, &d), q_int_oracle(6, n, &d), "n={n} d={d}");
        }
    }
}

#[test]
fn q_binom_pascal_rule() {
    // [n, i] = q^{-i}[n-1, i] + q^{n-i}[n-1, i-1]
    for d in [q(1), q(2), qf(1, 2)] {
        for n in 1..=6i64 {
            for i in 1..n {
                let lhs = q_binom(K, n, i, &d).unwrap();
                let half =
                    |k: i64| exp_linear(K, &(&d * Q::from_integer(BigInt::from(k)) / Q::from_integer(BigInt::from(2))));
                let rhs = &mul(&half(-i), &q_binom(K, n - 1, i, &d).unwrap())
                    + &mul(&half(n - i), &q_binom(K, n - 1, i - 1, &d).unwrap());
                assert_eq!(lhs, rhs, "n={n} i={i}");
            }
        }
    }
}

#[test]
fn q_binom_symmetry_and_classical_limit() {
    for n in 0..=6i64 {
        for i in 0..=n {
            let b = q_binom(K, n, i, &q(2)).unwrap();
            assert_eq!(b, q_binom(K, n, n - i, &q(2)).unwrap());
            let classical: i64 = (1..=i).fold(1, |acc, k| acc * (n - k + 1) / k);
            assert_eq!(b.c0(), &q(classical));
        }
    }
}

proptest! {
    #[test]
    fn ring_laws(a in arb_series(), b in arb_series(), c in arb_series()) {
        prop_assert_eq!(mul(&a, &b), mul(&b, &a));
        prop_assert_eq!(mul(&mul(&a, &b), &c), mul(&a, &mul(&b, &c)));
        prop_assert_eq!(mul(&a, &(&b + &c)), &mul(&a, &b) + &mul(&a, &c));
        prop_assert_eq!(mul(&a, &Series::constant(K, q(1))), a.clone());
        prop_assert!((&a - &a).is_zero());
    }

    #[test]
    fn truncation_drops_high_degrees(a in arb_nilpotent(), b in arb_nilpotent()) {
        let ctx = Ctx::new(K);
        prop_assert!(mul(&ctx.monomial(K - 1, q(1)), &ctx.hbar()).is_zero());
        // valuations add
        let top = mul(&a.pow(K as u32 - 1), &b);
        prop_assert!(top.is_zero());
    }

    #[test]
    fn inverse_is_two_sided(a in arb_unit()) {
        let inv = series_inv(&a).unwrap();
        prop_assert!(mul(&a, &inv).is_one());
        prop_assert!(mul(&inv, &a).is_one());
        prop_assert_eq!(series_inv(&inv).unwrap(), a);
    }

    #[test]
    fn exp_is_a_homomorphism(a in arb_nilpotent(), b in arb_nilpotent()) {
        let lhs = exp_series(&(&a + &b)).unwrap();
        prop_assert_eq!(lhs, mul(&exp_series(&a).unwrap(), &exp_series(&b).unwrap()));
        prop_assert!(mul(&exp_series(&a).unwrap(), &exp_series(&(-&a)).unwrap()).is_one());
    }

    #[test]
    fn q_int_reduces_to_n(n in 0i64..12, num in -6i64..=6, den in 1i64..=4) {
        let d = qf(num, den);
        let s = q_int(K, n, &d);
        prop_assert_eq!(s.c0(), &q(n));
        // even in ħ: [n] is invariant under q ↦ q^{-1}
        prop_assert_eq!(s, q_int(K, n, &(-d)));
    }
}
