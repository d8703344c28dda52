use num_traits::{One, Zero};
use qtwist::cgx::{BracketSpec, FunctionAlgebra, PWFunction};
use qtwist::kernel::{q, qf, series_inv, Ctx, Series, Q};
use qtwist::liebialg::{standard_r, twisted_r, LieAlgebra};
use qtwist::que::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

const K: usize = 3;

fn uq() -> Uq {
    Uq::new(K, DEFAULT_DEGREE_BOUND)
}

fn one() -> Series {
    Series::constant(K, Q::one())
}

fn mono(m: Mono) -> UqElement {
    UqElement::monomial(K, m, one())
}

fn monos_up_to(d: usize) -> Vec<Mono> {
    let mut out = Vec::new();
    for a in 0..=d {
        for b in 0..=d - a {
            for c in 0..=d - a - b {
                out.push((a, b, c));
            }
        }
    }
    out
}

/// (q^H − q^{−H})/(q − q^{−1}) with q = e^{ħ/2}, expanded as Σ_j c_j H^j.
fn qint_h_oracle() -> UqElement {
    let big = Ctx::new(K + 1);
    let fact = |n: usize| (1..=n).fold(Q::one(), |a, i| a * q(i as i64));
    // (q − q⁻¹)/ħ = Σ_{i odd} 2 (1/2)^i ħ^{i−1}/i!
    let mut den = big.zero();
    for i in (1..=K).step_by(2) {
        den += &big.monomial(i - 1, q(2) * qf(1, 2).pow(i as i32) / fact(i));
    }
    let den_inv = series_inv(&den).unwrap();
    let mut out = UqElement::zero(K);
    for j in (1..=K).step_by(2) {
        let num = big.monomial(j - 1, q(2) * qf(1, 2).pow(j as i32) / fact(j));
        let c = (&num * &den_inv).truncate(K);
        out = out.add(&mono((0, j, 0)).scale(&c));
    }
    out
}

#[test]
fn normal_form_examples() {
    let u = uq();
    let fe = u.normalize(&[(one(), vec![Gen::F, Gen::E])]).unwrap();
    assert_eq!(fe, mono((1, 0, 1)));
    let ef = u.normalize(&[(one(), vec![Gen::E, Gen::F])]).unwrap();
    assert_eq!(ef, mono((1, 0, 1)).add(&qint_h_oracle()));
    let m1 = Series::constant(K, -Q::one());
    let c = u.normalize(&[(one(), vec![Gen::H, Gen::E]), (m1.clone(), vec![Gen::E, Gen::H])]).unwrap();
    assert_eq!(c, mono((0, 0, 1)).scale(&Series::constant(K, q(2))));
    let c = u.normalize(&[(one(), vec![Gen::H, Gen::F]), (m1, vec![Gen::F, Gen::H])]).unwrap();
    assert_eq!(c, mono((1, 0, 0)).scale(&Series::constant(K, q(-2))));
}

#[test]
fn normal_form_is_idempotent_and_associative() {
    let u = uq();
    let words: Vec<Vec<Gen>> = vec![
        vec![Gen::E, Gen::E, Gen::F],
        vec![Gen::E, Gen::H, Gen::F],
        vec![Gen::F, Gen::E, Gen::E, Gen::H],
        vec![Gen::H, Gen::E, Gen::F, Gen::F],
    ];
    for w in &words {
        let x = u.normalize(&[(one(), w.clone())]).unwrap();
        let mut y = UqElement::zero(K);
        for (m, c) in &x.terms {
            let word: Vec<Gen> = std::iter::repeat_n(Gen::F, m.0)
                .chain(std::iter::repeat_n(Gen::H, m.1))
                .chain(std::iter::repeat_n(Gen::E, m.2))
                .collect();
            y = y.add(&u.normalize(&[(c.clone(), word)]).unwrap());
        }
        assert_eq!(x, y);
    }
    let sample = [(1, 0, 1), (0, 2, 1), (2, 0, 0), (0, 0, 2), (1, 1, 0)];
    for a in sample {
        for b in sample {
            for c in sample {
                let l = u.mul(&u.mul(&mono(a), &mono(b)).unwrap(), &mono(c)).unwrap();
                let r = u.mul(&mono(a), &u.mul(&mono(b), &mono(c)).unwrap()).unwrap();
                assert_eq!(l, r, "{a:?} {b:?} {c:?}");
            }
        }
    }
}

#[test]
fn degree_bound_is_reported() {
    let u = Uq::new(K, 3);
    let err = u.mul(&mono((2, 0, 0)), &mono((0, 0, 2))).unwrap_err();
    assert!(matches!(err, QueError::DegreeBound { bound: 3, .. }));
}

#[test]
fn hopf_structure_on_generators() {
    let u = uq();
    let h = u.gen(Gen::H);
    let dh = u.coproduct(&h).unwrap();
    let expect = h.to_tensor().tensor(&u.one().to_tensor()).add(&u.one().to_tensor().tensor(&h.to_tensor()));
    assert_eq!(dh, expect);
    assert_eq!(u.antipode(&h).unwrap(), h.scale(&Series::constant(K, -Q::one())));
    assert!(u.counit(&h).is_zero());
    assert!(u.counit(&u.gen(Gen::E)).is_zero());
    assert!(u.counit(&u.gen(Gen::F)).is_zero());
}

#[test]
fn hopf_axioms_on_low_degree_monomials() {
    let u = uq();
    for m in monos_up_to(3) {
        let x = mono(m);
        let xt = x.to_tensor();
        let d = u.coproduct(&x).unwrap();
        // coassociativity
        assert_eq!(u.coproduct_leg(&d, 0).unwrap(), u.coproduct_leg(&d, 1).unwrap(), "{m:?}");
        // counit
        assert_eq!(u.counit_leg(&d, 0), xt, "{m:?}");
        assert_eq!(u.counit_leg(&d, 1), xt, "{m:?}");
        // antipode
        let eps = UqTensor::one(1, K).scale(&u.counit(&x));
        assert_eq!(u.mul_legs(&u.antipode_leg(&d, 0).unwrap(), 0, 1).unwrap(), eps, "{m:?}");
        assert_eq!(u.mul_legs(&u.antipode_leg(&d, 1).unwrap(), 0, 1).unwrap(), eps, "{m:?}");
    }
    // Δ is an algebra map
    for a in monos_up_to(2) {
        for b in monos_up_to(2) {
            let ab = u.mul(&mono(a), &mono(b)).unwrap();
            let lhs = u.coproduct(&ab).unwrap();
            let rhs = u.tmul(&u.coproduct(&mono(a)).unwrap(), &u.coproduct(&mono(b)).unwrap()).unwrap();
            assert_eq!(lhs, rhs, "{a:?} {b:?}");
        }
    }
}

#[test]
fn mismatched_half_powers_in_f_coproduct_break_the_relations() {
    // Δ(F) = F⊗K^{−1/2} + K⊗F (the other half-power convention) breaks [E,F] = [H]_q
    let u = uq();
    let t = |x: UqElement| x.to_tensor();
    let e = t(u.gen(Gen::E));
    let f = t(u.gen(Gen::F));
    let de = e.tensor(&t(u.k_pow(&qf(-1, 2)))).add(&t(u.k_pow(&qf(1, 2))).tensor(&e));
    let good_df = f.tensor(&t(u.k_pow(&qf(-1, 2)))).add(&t(u.k_pow(&qf(1, 2))).tensor(&f));
    let bad_df = f.tensor(&t(u.k_pow(&qf(-1, 2)))).add(&t(u.k_pow(&q(1))).tensor(&f));
    let target = u.coproduct(&u.qint_h()).unwrap();
    let comm = |df: &UqTensor| u.tmul(&de, df).unwrap().sub(&u.tmul(df, &de).unwrap());
    assert_eq!(comm(&good_df), target);
    assert_ne!(comm(&bad_df), target);
}

#[test]
fn r_matrix_examples() {
    let u = uq();
    let r = u.r_matrix_sl2().unwrap();
    assert_eq!(r.truncate(1), UqTensor::one(2, 1));
    assert_eq!(u.counit_leg(&r, 0), UqTensor::one(1, K));
    assert_eq!(u.counit_leg(&r, 1), UqTensor::one(1, K));
    let g = LieAlgebra::named("sl2").unwrap();
    let st = standard_r(&g).unwrap();
    assert_eq!(r.to_lie(1, &g, 1), Some(st.r.clone()));
    // hand expansion: ¼h⊗h + f⊗e
    let mut hand = qtwist::liebialg::LieTensor::zero(2);
    hand.add_term(vec![g.index("h").unwrap(), g.index("h").unwrap()], qf(1, 4));
    hand.add_term(vec![g.index("f").unwrap(), g.index("e").unwrap()], Q::one());
    assert_eq!(st.r, hand);
}

#[test]
fn r_matrix_axioms_on_generators() {
    let u = Uq::new(K, 4 * K + 2);
    let r = u.r_matrix_sl2().unwrap();
    let rinv = u.tinv(&r).unwrap();
    assert_eq!(u.tmul(&r, &rinv).unwrap(), UqTensor::one(2, K));
    for gen in [Gen::E, Gen::F, Gen::H] {
        assert!(u.almost_cocommutativity_residual(&r, &rinv, &u.gen(gen)).unwrap().is_zero());
    }
    let (a, b) = u.hexagon_residuals(&r).unwrap();
    assert!(a.is_zero() && b.is_zero());
}

#[test]
fn twi_small_cases() {
    let u = uq();
    let r = u.r_matrix_sl2().unwrap();
    assert_eq!(u.twi_m(&r, 1).unwrap(), UqTensor::one(2, K));
    assert_eq!(u.twi_m(&r, 2).unwrap(), r.embed(&[1, 2], 4));
    // m = 3 unrolled: R_{2,4} R_{3,5} R_{3,4} (legs 1-based)
    let unrolled = u.tmul_all(&[&r.embed(&[1, 3], 6), &r.embed(&[2, 4], 6), &r.embed(&[2, 3], 6)]).unwrap();
    assert_eq!(u.twi_m(&r, 3).unwrap(), unrolled);
    for m in [2, 3] {
        assert_eq!(u.twi_m(&r, m).unwrap(), u.twi_m_inductive(&r, m).unwrap(), "m = {m}");
    }
}

#[test]
fn twi_satisfies_twist_axioms() {
    let u = uq();
    let r = u.r_matrix_sl2().unwrap();
    for m in [2, 3] {
        let (a, b, c) = u.twist_residuals(&u.twi_m(&r, m).unwrap(), m).unwrap();
        assert!(a.is_zero() && b.is_zero() && c.is_zero(), "m = {m}");
    }
    // 1 + ħ·EF⊗1⊗1⊗1 fails the counit condition
    let ef = u.mul(&u.gen(Gen::E), &u.gen(Gen::F)).unwrap();
    let bad = UqTensor::one(4, K).add(&ef.to_tensor().embed(&[0], 4).scale(&Ctx::new(K).hbar()));
    assert!(matches!(u.twist_hopf(&bad, 2), Err(QueError::TwistAxiom(_))));
}

#[test]
fn r_matrix_m_semiclassical_limit_and_counit() {
    let u = uq();
    let g = LieAlgebra::named("sl2").unwrap();
    let st = standard_r(&g).unwrap();
    let r = u.r_matrix_sl2().unwrap();
    assert_eq!(u.r_matrix_m(&r, 1).unwrap(), r);
    for m in [2, 3] {
        let rm = u.r_matrix_m(&r, m).unwrap();
        assert_eq!(rm.truncate(1), UqTensor::one(2 * m, 1));
        assert_eq!(rm.to_lie(1, &g, m), Some(twisted_r(&g, &st.r, m)), "m = {m}");
        let mut e = rm.clone();
        for _ in 0..m {
            e = u.counit_leg(&e, 0);
        }
        assert_eq!(e, UqTensor::one(m, K));
    }
}

/// The inverse factors placed with their first leg in the first block.
fn r_matrix_m_other_leg_order(u: &Uq, r: &UqTensor, m: usize) -> UqTensor {
    let rinv = u.tinv(r).unwrap();
    let n = 2 * m;
    let mut acc = UqTensor::one(n, K);
    for k in (2..=m).rev() {
        for l in 1..k {
            acc = u.tmul(&acc, &rinv.embed(&[l - 1, m + k - 1], n)).unwrap();
        }
    }
    for k in 1..=m {
        acc = u.tmul(&acc, &r.embed(&[k - 1, m + k - 1], n)).unwrap();
    }
    u.tmul(&acc, &u.twi_m(r, m).unwrap()).unwrap()
}

#[test]
fn r_matrix_m_leg_order_matters() {
    let u = uq();
    let g = LieAlgebra::named("sl2").unwrap();
    let st = standard_r(&g).unwrap();
    let r = u.r_matrix_sl2().unwrap();
    let other = r_matrix_m_other_leg_order(&u, &r, 2);
    assert_ne!(other.to_lie(1, &g, 2), Some(twisted_r(&g, &st.r, 2)));
    let th = u.twist_hopf(&u.twi_m(&r, 2).unwrap(), 2).unwrap();
    let x = u.gen(Gen::E).to_tensor().tensor(&UqTensor::one(1, K));
    let d = th.coproduct(&x).unwrap();
    let inv = u.tinv(&other).unwrap();
    let res = d.permute(&[2, 3, 0, 1]).sub(&u.tmul_all(&[&other, &d, &inv]).unwrap());
    assert!(!res.is_zero());
}

fn gens2() -> Vec<UqTensor> {
    let u1 = |g: Gen| UqElement::generator(K, g).to_tensor();
    let id = UqTensor::one(1, K);
    let mut out = Vec::new();
    for g in [Gen::E, Gen::F, Gen::H] {
        out.push(u1(g).tensor(&id));
        out.push(id.tensor(&u1(g)));
    }
    out
}

#[test]
fn r_matrix_m_is_quasitriangular_for_the_twisted_coproduct() {
    let u = uq();
    let r = u.r_matrix_sl2().unwrap();
    let r2 = u.r_matrix_m(&r, 2).unwrap();
    let r2inv = u.tinv(&r2).unwrap();
    let th = u.twist_hopf(&u.twi_m(&r, 2).unwrap(), 2).unwrap();
    for x in gens2() {
        let d = th.coproduct(&x).unwrap();
        let res = d.permute(&[2, 3, 0, 1]).sub(&u.tmul_all(&[&r2, &d, &r2inv]).unwrap());
        assert!(res.is_zero());
    }
    // (Δ_J⊗I)R = R₁₃R₂₃ and (I⊗Δ_J)R = R₁₃R₁₂ with 2-leg blocks
    let b = |i: usize, j: usize| r2.embed(&[2 * i, 2 * i + 1, 2 * j, 2 * j + 1], 6);
    let lhs = th.coproduct_block(&r2, 0).unwrap();
    assert!(lhs.sub(&u.tmul(&b(0, 2), &b(1, 2)).unwrap()).is_zero());
    let lhs = th.coproduct_block(&r2, 1).unwrap();
    assert!(lhs.sub(&u.tmul(&b(0, 2), &b(0, 1)).unwrap()).is_zero());
}

#[test]
fn twisted_hopf_structure() {
    let u = uq();
    let r = u.r_matrix_sl2().unwrap();
    // identity twist
    let th1 = u.twist_hopf(&UqTensor::one(2, K), 1).unwrap();
    for g in [Gen::E, Gen::F, Gen::H] {
        let x = u.gen(g);
        assert_eq!(th1.coproduct(&x.to_tensor()).unwrap(), u.coproduct(&x).unwrap());
    }
    let th = u.twist_hopf(&u.twi_m(&r, 2).unwrap(), 2).unwrap();
    for x in gens2() {
        assert!(th.coassociativity_residual(&x).unwrap().is_zero());
        assert!(th.antipode_residual(&x).unwrap().is_zero());
    }
    // Δ: H → (H⊗H)_{R₂₃} is an algebra and coalgebra map on generators
    for g in [Gen::E, Gen::F, Gen::H] {
        let x = u.gen(g);
        let dx = u.coproduct(&x).unwrap();
        let lhs = th.coproduct(&dx).unwrap();
        let rhs = u.coproduct_leg(&u.coproduct_leg(&dx, 1).unwrap(), 0).unwrap();
        assert_eq!(lhs, rhs, "{g:?}");
    }
    let de = u.coproduct(&u.gen(Gen::E)).unwrap();
    let df = u.coproduct(&u.gen(Gen::F)).unwrap();
    let comm = u.tmul(&de, &df).unwrap().sub(&u.tmul(&df, &de).unwrap());
    assert_eq!(comm, u.coproduct(&u.qint_h()).unwrap());
}

#[test]
fn qirreps_satisfy_relations_and_reduce_to_classical() {
    let u = uq();
    for n in 0..5 {
        let v = qirrep_build(n, K);
        assert!(v.check_relations(&u));
        let d = v.dim();
        assert_eq!(d, (n + 1) as usize);
        for k in 0..d {
            for l in 0..d {
                let e = if l == k + 1 { q((l as i64) * (n - l as i64 + 1)) } else { Q::zero() };
                let f = if k == l + 1 { Q::one() } else { Q::zero() };
                let h = if k == l { q(n - 2 * k as i64) } else { Q::zero() };
                assert_eq!(v.e[k][l].coeff(0), e);
                assert_eq!(v.f[k][l].coeff(0), f);
                assert_eq!(v.h[k][l].coeff(0), h);
            }
        }
    }
}

fn qa() -> QFunctionAlgebra {
    QFunctionAlgebra::new(K, DEFAULT_DEGREE_BOUND).unwrap()
}

fn classical() -> FunctionAlgebra {
    FunctionAlgebra::classical(Arc::new(LieAlgebra::named("sl2").unwrap()))
}

fn coefficients(n: i64) -> Vec<(usize, usize)> {
    let d = (n + 1) as usize;
    (0..d).flat_map(|a| (0..d).map(move |b| (a, b))).collect()
}

#[test]
fn dual_action_matches_antipode_pairing() {
    let a = qa();
    let u = &a.uq;
    for (i, j) in coefficients(2) {
        let f = a.coefficient(2, i, j).unwrap();
        for m in monos_up_to(2) {
            let x = mono(m).to_tensor();
            let lhs = a.evaluate(&f, &x).unwrap();
            let moved = a.act(&x, &f, ActSide::Left).unwrap();
            let rhs = a.evaluate(&moved, &UqTensor::one(1, K)).unwrap();
            assert_eq!(lhs, rhs, "{i}{j} {m:?}");
        }
    }
    let _ = u;
}

#[test]
fn q_multiply_is_a_deformation_of_the_classical_product() {
    let a = qa();
    let c = classical();
    for (i, j) in coefficients(1) {
        let f = a.coefficient(1, i, j).unwrap();
        assert_eq!(a.q_multiply(&f, &a.one(1)).unwrap(), f);
        for (k, l) in coefficients(1) {
            let g = a.coefficient(1, k, l).unwrap();
            let fg = a.q_multiply(&f, &g).unwrap();
            let cf = c.coefficient(&[1], i, j).unwrap();
            let cg = c.coefficient(&[1], k, l).unwrap();
            assert_eq!(fg.truncate(1), c.multiply(&cf, &cg).unwrap());
            let gf = a.q_multiply(&g, &f).unwrap();
            assert!(fg.sub(&gf).hbar_coeff(0).is_zero());
        }
    }
}

#[test]
fn q_multiply_is_associative_and_noncommutative() {
    let a = qa();
    let f = a.coefficient(1, 0, 0).unwrap();
    let g = a.coefficient(1, 1, 0).unwrap();
    let h = a.coefficient(2, 1, 2).unwrap();
    let l = a.q_multiply(&a.q_multiply(&f, &g).unwrap(), &h).unwrap();
    let r = a.q_multiply(&f, &a.q_multiply(&g, &h).unwrap()).unwrap();
    assert_eq!(l, r);
    assert_ne!(a.q_multiply(&f, &g).unwrap(), a.q_multiply(&g, &f).unwrap());
}

#[test]
fn semiclassical_limit_of_the_quantum_group_function_algebra() {
    let a = qa();
    let c = classical();
    let f = a.coefficient(1, 0, 1).unwrap();
    assert!(semiclassical_bracket(&f, &f, |x, y| a.q_multiply(x, y)).unwrap().is_zero());
    for (i, j) in coefficients(1) {
        for (k, l) in coefficients(1) {
            let f = a.coefficient(1, i, j).unwrap();
            let g = a.coefficient(1, k, l).unwrap();
            let qb = semiclassical_bracket(&f, &g, |x, y| a.q_multiply(x, y)).unwrap();
            let cf = c.coefficient(&[1], i, j).unwrap();
            let cg = c.coefficient(&[1], k, l).unwrap();
            let cb = c.classical_bracket(&cf, &cg, &BracketSpec::Twisted { m: 1 }).unwrap();
            assert_eq!(qb, cb, "{i}{j} {k}{l}");
        }
    }
}

/// Semi-invariant generators of weight ϖ₁ in each of two factors.
fn affine_generators(a: &QFunctionAlgebra) -> Vec<(usize, QFunction)> {
    let mut out = Vec::new();
    for j in 0..2 {
        for i in 0..2 {
            out.push((j, a.embed(&a.coefficient(1, i, 0).unwrap(), j, 2)));
        }
    }
    out
}

#[test]
fn semiclassical_limit_of_the_twisted_affine_product() {
    let a = qa();
    let c = classical();
    let gens = affine_generators(&a);
    for (_, f) in &gens {
        for (_, g) in &gens {
            let qb = semiclassical_bracket(f, g, |x, y| a.quantum_affine_multiply(x, y)).unwrap();
            let cb = c.classical_bracket(&f.truncate(1), &g.truncate(1), &BracketSpec::Mixed { m: 2 }).unwrap();
            assert_eq!(qb, cb);
        }
    }
}

#[test]
fn affine_product_case_split() {
    let a = qa();
    let gens = affine_generators(&a);
    for (i, f) in &gens {
        for (j, g) in &gens {
            let direct = a.quantum_affine_multiply(f, g).unwrap();
            assert_eq!(direct, a.factorized_multiply(f, *i, g, *j).unwrap());
            if i <= j {
                assert_eq!(direct, a.q_multiply(f, g).unwrap());
            }
        }
    }
    let f = a.coefficient(1, 0, 0).unwrap();
    assert_eq!(a.quantum_affine_multiply(&f, &f).unwrap(), a.q_multiply(&f, &f).unwrap());
    let bad = a.embed(&a.coefficient(1, 0, 0).unwrap(), 1, 2);
    assert!(matches!(a.factorized_multiply(&bad, 0, &bad, 1), Err(QueError::NotSingleFactor)));
}

#[test]
fn affine_products_of_the_two_factors_span_the_same_space() {
    // A_1·A_2 and A_2·A_1 on the weight-(ϖ₁,ϖ₁) window
    let a = qa();
    let f = |i: usize, j: usize| a.embed(&a.coefficient(1, i, 0).unwrap(), j, 2);
    let mut span12 = Vec::new();
    let mut span21 = Vec::new();
    for i in 0..2 {
        for k in 0..2 {
            span12.push(a.quantum_affine_multiply(&f(i, 0), &f(k, 1)).unwrap());
            span21.push(a.quantum_affine_multiply(&f(k, 1), &f(i, 0)).unwrap());
        }
    }
    // every A_2·A_1 product is a unit-triangular combination of A_1·A_2 products
    let key = |p: &QFunction| -> Vec<Series> {
        let blk = p.blocks.values().next().unwrap();
        (0..2)
            .flat_map(|x| (0..2).map(move |y| (x, y)))
            .map(|(x, y)| blk.get(&vec![x, 0, y, 0]).cloned().unwrap_or_else(|| Series::zero(K)))
            .collect()
    };
    let m: Vec<Vec<Series>> = span12.iter().map(key).collect();
    let transpose: Vec<Vec<Series>> = (0..4).map(|r| (0..4).map(|c| m[c][r].clone()).collect()).collect();
    let inv = qtwist::linalg::inverse(&transpose, K).unwrap();
    for p in &span21 {
        let v = key(p);
        let coeffs: Vec<Series> =
            (0..4).map(|r| (0..4).fold(Series::zero(K), |acc, c| &acc + &(&inv[r][c] * &v[c]))).collect();
        let mut rebuilt = PWFunction::zero(2, K);
        for (c, s) in coeffs.iter().enumerate() {
            rebuilt.add_scaled(&span12[c], s);
        }
        assert_eq!(&rebuilt, p);
    }
}

#[test]
fn affine_product_is_associative_on_random_triples() {
    let a = qa();
    let gens = affine_generators(&a);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..6 {
        let mut pick = || {
            let (_, f) = &gens[rng.gen_range(0..gens.len())];
            let (_, g) = &gens[rng.gen_range(0..gens.len())];
            f.add(&g.scale_q(&q(rng.gen_range(-2..3))))
        };
        let (x, y, z) = (pick(), pick(), pick());
        let l = a.quantum_affine_multiply(&a.quantum_affine_multiply(&x, &y).unwrap(), &z).unwrap();
        let r = a.quantum_affine_multiply(&x, &a.quantum_affine_multiply(&y, &z).unwrap()).unwrap();
        assert_eq!(l, r);
    }
}

#[test]
fn twisted_group_product_and_bimodule_product_have_the_expected_limits() {
    let a = qa();
    let c = classical();
    let gens = affine_generators(&a);
    for (_, f) in &gens {
        for (_, g) in &gens {
            let cb = c.classical_bracket(&f.truncate(1), &g.truncate(1), &BracketSpec::Twisted { m: 2 }).unwrap();
            assert_eq!(semiclassical_bracket(f, g, |x, y| a.h_multiply(x, y)).unwrap(), cb);
            assert_eq!(a.h_multiply(f, g).unwrap(), a.quantum_affine_multiply(f, g).unwrap());
        }
    }
}

#[test]
fn tensor_json_round_trip_shape() {
    let u = uq();
    let r = u.r_matrix_sl2().unwrap();
    let j = r.to_json();
    assert_eq!(j.arity, 2);
    assert_eq!(j.order, K);
    assert_eq!(j.terms.len(), r.terms.len());
    let text = serde_json::to_string(&j).unwrap();
    let back: UqTensorJson = serde_json::from_str(&text).unwrap();
    assert_eq!(back, j);
}
