mod common;

use std::collections::BTreeMap;
use std::sync::Arc;

use num_traits::{One, Zero};
use proptest::prelude::*;

use common::{commutator, from_sparse, rep_of, Mat};
use qtwist::cgx::{irrep_build, BracketSpec, CgError, FunctionAlgebra, PWFunction, Side, SpMat};
use qtwist::kernel::{q, qf, Series, Q};
use qtwist::liebialg::{standard_r, LieAlgebra, LieTensor};
use qtwist::linalg::{Echelon, SparseVec};

fn sl2() -> Arc<LieAlgebra> {
    Arc::new(LieAlgebra::named("sl2").unwrap())
}

fn sl3() -> Arc<LieAlgebra> {
    Arc::new(LieAlgebra::named("sl3").unwrap())
}

fn basis(i: usize) -> SparseVec {
    [(i, Q::one())].into_iter().collect()
}

fn weyl_dim_sl2(n: i64) -> usize {
    (n + 1) as usize
}

fn weyl_dim_sl3(a: i64, b: i64) -> usize {
    ((a + 1) * (b + 1) * (a + b + 2) / 2) as usize
}

/// Peel dominant maxima off the formal character of V(λ)⊗V(μ).
fn character_decomposition(g: &LieAlgebra, lambda: &[i64], mu: &[i64]) -> BTreeMap<Vec<i64>, usize> {
    let wl = irrep_build(g, lambda, 64).unwrap().weights;
    let wm = irrep_build(g, mu, 64).unwrap().weights;
    let mut ch: BTreeMap<Vec<i64>, i64> = BTreeMap::new();
    for a in &wl {
        for b in &wm {
            let s: Vec<i64> = a.iter().zip(b).map(|(x, y)| x + y).collect();
            *ch.entry(s).or_default() += 1;
        }
    }
    let mut out = BTreeMap::new();
    loop {
        ch.retain(|_, c| *c != 0);
        // a weight with no higher weight present is dominant and highest
        let Some(top) = ch
            .keys()
            .filter(|w| w.iter().all(|&x| x >= 0))
            .max_by_key(|w| (w.iter().sum::<i64>(), (*w).clone()))
            .cloned()
        else {
            break;
        };
        let mult = ch[&top];
        assert!(mult > 0);
        *out.entry(top.clone()).or_default() += mult as usize;
        for w in irrep_build(g, &top, 64).unwrap().weights {
            *ch.entry(w).or_default() -= mult;
        }
    }
    assert!(ch.is_empty());
    out
}

fn sp_mul(a: &SpMat, b: &SpMat) -> BTreeMap<(usize, usize), Q> {
    let mut out: BTreeMap<(usize, usize), Q> = BTreeMap::new();
    for (&(i, k), x) in a {
        for (&(k2, j), y) in b {
            if k == k2 {
                *out.entry((i, j)).or_insert_with(Q::zero) += x.c0() * y.c0();
            }
        }
    }
    out.retain(|_, x| !x.is_zero());
    out
}

fn add_all(fa: &FunctionAlgebra, fs: &[PWFunction], m: usize) -> PWFunction {
    fs.iter().fold(PWFunction::zero(m, fa.order), |acc, f| acc.add(f))
}

fn act(fa: &FunctionAlgebra, x: usize, f: &PWFunction, side: Side) -> PWFunction {
    fa.invariant_action(&basis(x), f, side).unwrap()
}

fn mul(fa: &FunctionAlgebra, f: &PWFunction, g: &PWFunction) -> PWFunction {
    fa.multiply(f, g).unwrap()
}

/// Σ c [(a^L f)(b^L g) − (a^R f)(b^R g)] straight from the definition.
fn bracket_by_definition(fa: &FunctionAlgebra, r: &LieTensor, f: &PWFunction, g: &PWFunction) -> PWFunction {
    let mut out = PWFunction::zero(f.m, fa.order);
    for (idx, c) in &r.terms {
        let cs = Series::constant(1, c.clone());
        let ll = mul(fa, &act(fa, idx[0], f, Side::Left), &act(fa, idx[1], g, Side::Left));
        let rr = mul(fa, &act(fa, idx[0], f, Side::Right), &act(fa, idx[1], g, Side::Right));
        out = out.add(&ll.sub(&rr).scale(&cs));
    }
    out
}

/// A random element of ℂ[SL2] with blocks of highest weight ≤ 2.
fn arb_fn() -> impl Strategy<Value = Vec<(i64, usize, usize, i64)>> {
    proptest::collection::vec((0i64..=2, 0usize..3, 0usize..3, -3i64..=3), 1..4)
}

fn build(fa: &FunctionAlgebra, spec: &[(i64, usize, usize, i64)]) -> PWFunction {
    let mut f = PWFunction::zero(1, fa.order);
    for &(w, a, b, c) in spec {
        let d = (w + 1) as usize;
        f = f.add(&fa.coefficient(&[w], a % d, b % d).unwrap().scale_q(&q(c)));
    }
    f
}

// words in U(sl2) of length ≤ 2
fn words() -> Vec<Vec<usize>> {
    let mut w = vec![vec![]];
    for a in 0..3 {
        w.push(vec![a]);
        for b in 0..3 {
            w.push(vec![a, b]);
        }
    }
    w
}

#[test]
fn irrep_dimensions_follow_weyl() {
    let g = sl2();
    for n in 0..=10 {
        assert_eq!(irrep_build(&g, &[n], 64).unwrap().dim, weyl_dim_sl2(n));
    }
    let g3 = sl3();
    for a in 0..=3 {
        for b in 0..=3 - a {
            let v = irrep_build(&g3, &[a, b], 64).unwrap();
            assert_eq!(v.dim, weyl_dim_sl3(a, b), "({a},{b})");
            // Weyl group invariance of the weight multiset
            let count = |ws: &[Vec<i64>]| {
                let mut m: BTreeMap<Vec<i64>, usize> = BTreeMap::new();
                for w in ws {
                    *m.entry(w.clone()).or_default() += 1;
                }
                m
            };
            let base = count(&v.weights);
            let s1: Vec<Vec<i64>> = v.weights.iter().map(|w| vec![-w[0], w[0] + w[1]]).collect();
            let s2: Vec<Vec<i64>> = v.weights.iter().map(|w| vec![w[0] + w[1], -w[1]]).collect();
            assert_eq!(count(&s1), base);
            assert_eq!(count(&s2), base);
            assert_eq!(base[&vec![a, b]], 1);
        }
    }
    assert!(matches!(irrep_build(&g, &[80], 64), Err(CgError::DimensionBound { .. })));
}

#[test]
fn sl3_fundamental_weights() {
    let v = irrep_build(&sl3(), &[1, 0], 64).unwrap();
    let mut ws = v.weights.clone();
    ws.sort();
    // ϖ₁, ϖ₁−α₁, ϖ₁−α₁−α₂ in fundamental coordinates
    let mut want = vec![vec![1, 0], vec![-1, 1], vec![0, -1]];
    want.sort();
    assert_eq!(ws, want);
}

#[test]
fn irreps_are_representations() {
    for (g, ws) in
        [(sl2(), vec![vec![1], vec![2], vec![3]]), (sl3(), vec![vec![1, 0], vec![0, 1], vec![1, 1], vec![2, 0]])]
    {
        for w in ws {
            let v = irrep_build(&g, &w, 64).unwrap();
            let rho: Vec<Mat> = v.action.iter().map(|m| from_sparse(v.dim, m)).collect();
            for i in 0..g.dim() {
                for j in 0..g.dim() {
                    assert_eq!(rep_of(&rho, g.bracket_basis(i, j)), commutator(&rho[i], &rho[j]), "{w:?} {i} {j}");
                }
            }
        }
    }
}

#[test]
fn cg_multiplicities_match_characters() {
    let g = sl2();
    let fa = FunctionAlgebra::classical(g.clone());
    for n in 0..=4i64 {
        for m in 0..=4i64 {
            let e = fa.cg(&[n], &[m]).unwrap();
            let got: Vec<i64> = e.summands.iter().map(|s| s.weight[0]).collect();
            let want: Vec<i64> = ((n - m).abs()..=n + m).rev().step_by(2).collect();
            assert_eq!(got, want, "{n}⊗{m}");
            assert_eq!(e.cartan_component().weight, vec![n + m]);
        }
    }
    let g3 = sl3();
    let fa3 = FunctionAlgebra::classical(g3.clone());
    for (l, m) in [([1, 0], [1, 0]), ([1, 0], [0, 1]), ([1, 1], [1, 0]), ([1, 1], [1, 1]), ([2, 0], [0, 1])] {
        let e = fa3.cg(&l, &m).unwrap();
        let mut got: BTreeMap<Vec<i64>, usize> = BTreeMap::new();
        for s in &e.summands {
            *got.entry(s.weight.clone()).or_default() += 1;
        }
        assert_eq!(got, character_decomposition(&g3, &l, &m), "{l:?}⊗{m:?}");
        let total: usize = e.summands.iter().map(|s| s.dim).sum();
        assert_eq!(total, weyl_dim_sl3(l[0], l[1]) * weyl_dim_sl3(m[0], m[1]));
        assert_eq!(e.cartan_component().weight, vec![l[0] + m[0], l[1] + m[1]]);
    }
}

#[test]
fn cg_intertwiners_are_biorthogonal() {
    let fa = FunctionAlgebra::classical(sl3());
    for (l, m) in [([1, 0], [1, 0]), ([1, 1], [1, 0]), ([0, 1], [1, 1])] {
        let e = fa.cg(&l, &m).unwrap();
        for (a, sa) in e.summands.iter().enumerate() {
            for (b, sb) in e.summands.iter().enumerate() {
                let p = sp_mul(&sa.proj, &sb.inj);
                if a == b {
                    let id: BTreeMap<(usize, usize), Q> = (0..sa.dim).map(|i| ((i, i), Q::one())).collect();
                    assert_eq!(p, id);
                } else {
                    assert!(p.is_empty());
                }
            }
        }
    }
}

#[test]
fn defining_coefficients_are_independent() {
    let fa = FunctionAlgebra::classical(sl2());
    let mut e = Echelon::new();
    for a in 0..2 {
        for b in 0..2 {
            let f = fa.coefficient(&[1], a, b).unwrap();
            let vals: SparseVec = words()
                .iter()
                .enumerate()
                .map(|(k, w)| (k, fa.evaluate(&f, std::slice::from_ref(w)).unwrap()))
                .filter(|(_, x)| !x.is_zero())
                .collect();
            e.insert(&vals);
        }
    }
    assert_eq!(e.rank(), 4);
    // ξ = 0 gives the zero function
    assert!(fa
        .matrix_coefficient(&[1], &[Series::zero(1), Series::zero(1)], &[Series::constant(1, q(1)), Series::zero(1)])
        .unwrap()
        .is_zero());
}

#[test]
fn product_of_semi_invariants_sits_in_the_sum_block() {
    let fa = FunctionAlgebra::classical(sl3());
    for (w1, w2) in [([1, 0], [0, 1]), ([1, 0], [1, 0]), ([1, 1], [0, 1])] {
        let f = fa.phi(&w1, 1).unwrap();
        let g = fa.phi(&w2, 0).unwrap();
        let p = mul(&fa, &f, &g);
        assert!(p.is_semi_invariant());
        let tops: Vec<_> = p.blocks.keys().cloned().collect();
        let dual = fa.g.roots.as_ref().unwrap().dual_weight(&[w1[0] + w2[0], w1[1] + w2[1]]);
        assert_eq!(tops, vec![vec![dual]]);
    }
}

#[test]
fn weight_reading_on_phi() {
    for (name, ws) in [("sl2", vec![vec![1], vec![2], vec![3]]), ("sl3", vec![vec![1, 0], vec![0, 1], vec![1, 2]])] {
        for s in [q(1), qf(1, 3), q(-2)] {
            let g = Arc::new(LieAlgebra::with_form_scale(name, s.clone()).unwrap());
            let fa = FunctionAlgebra::classical(g.clone());
            let rd = g.roots.as_ref().unwrap();
            for w in &ws {
                // ℂ[G]^ϖ: coefficients of V(ϖ) against its highest-weight vector
                let dim = irrep_build(&g, w, 64).unwrap().dim;
                for a in 0..dim {
                    let f = fa.coefficient(w, a, 0).unwrap();
                    for (i, &hi) in rd.h.iter().enumerate() {
                        assert_eq!(act(&fa, hi, &f, Side::Right), f.scale_q(&-rd.pair_h(w, i)), "{name} {w:?} s={s}");
                    }
                    for pr in &rd.pos_roots {
                        assert!(act(&fa, pr.e, &f, Side::Right).is_zero());
                    }
                }
                // Φ_ϖ lands in the block of the dual weight
                let f = fa.phi(w, 0).unwrap();
                let dual = rd.dual_weight(w);
                for (i, &hi) in rd.h.iter().enumerate() {
                    assert_eq!(act(&fa, hi, &f, Side::Right), f.scale_q(&-rd.pair_h(&dual, i)));
                }
            }
        }
    }
}

#[test]
fn bracket_matches_bivector_definition() {
    let g = sl2();
    let fa = FunctionAlgebra::classical(g.clone());
    let sr = standard_r(&g).unwrap();
    let fs: Vec<PWFunction> =
        vec![fa.coefficient(&[1], 0, 1).unwrap(), fa.coefficient(&[2], 1, 0).unwrap(), fa.phi(&[1], 1).unwrap()];
    for f in &fs {
        for h in &fs {
            let b = fa.classical_bracket(f, h, &BracketSpec::Twisted { m: 1 }).unwrap();
            assert_eq!(b, bracket_by_definition(&fa, &sr.r, f, h));
            // only the antisymmetric part of r contributes
            assert_eq!(b, bracket_by_definition(&fa, &sr.lambda, f, h));
            assert!(fa.classical_bracket(f, &fa.one(1), &BracketSpec::Twisted { m: 1 }).unwrap().is_zero());
        }
    }
}

#[test]
fn lambda_right_vanishes_on_semi_invariants() {
    let g = sl3();
    let fa = FunctionAlgebra::classical(g.clone());
    let lambda = standard_r(&g).unwrap().lambda;
    let fs = [fa.phi(&[1, 0], 0).unwrap(), fa.phi(&[0, 1], 2).unwrap(), fa.phi(&[1, 1], 3).unwrap()];
    for f in &fs {
        for h in &fs {
            let mut acc = PWFunction::zero(1, 1);
            for (idx, c) in &lambda.terms {
                let t = mul(&fa, &act(&fa, idx[0], f, Side::Right), &act(&fa, idx[1], h, Side::Right));
                acc = acc.add(&t.scale_q(c));
            }
            assert!(acc.is_zero());
        }
    }
}

#[test]
fn cross_factor_bracket() {
    // {f_1, g_2}^(2) = ⟨ϖ⊗λ, r_0⟩ f_1 g_2 − r_0^{L⊗L}(f_1, g_2) − Σ_α (e_α^L f)_1 (e_{−α}^L g)_2
    for (name, pairs) in [
        ("sl2", vec![(vec![1], vec![1]), (vec![1], vec![2])]),
        ("sl3", vec![(vec![1, 0], vec![0, 1]), (vec![1, 0], vec![1, 0])]),
    ] {
        let g = Arc::new(LieAlgebra::named(name).unwrap());
        let fa = FunctionAlgebra::classical(g.clone());
        let rd = g.roots.as_ref().unwrap().clone();
        let sr = standard_r(&g).unwrap();
        let n = g.dim();
        for (w1, w2) in pairs {
            let dim1 = irrep_build(&g, &w1, 64).unwrap().dim;
            for a in 0..dim1 {
                let f = fa.embed(&fa.phi(&w1, a).unwrap(), 0, 2);
                let h = fa.embed(&fa.phi(&w2, 0).unwrap(), 1, 2);
                let got = fa.classical_bracket(&f, &h, &BracketSpec::Mixed { m: 2 }).unwrap();
                let fh = mul(&fa, &f, &h);
                let mut pair = Q::zero();
                let mut want = PWFunction::zero(2, 1);
                for (idx, c) in &sr.r0.terms {
                    let (i, j) = (
                        rd.h.iter().position(|&x| x == idx[0]).unwrap(),
                        rd.h.iter().position(|&x| x == idx[1]).unwrap(),
                    );
                    pair += c * rd.pair_h(&w1, i) * rd.pair_h(&w2, j);
                    let t = mul(&fa, &act(&fa, idx[0], &f, Side::Left), &act(&fa, n + idx[1], &h, Side::Left));
                    want = want.sub(&t.scale_q(c));
                }
                want = want.add(&fh.scale_q(&pair));
                for pr in &rd.pos_roots {
                    let t = mul(&fa, &act(&fa, pr.e, &f, Side::Left), &act(&fa, n + pr.f, &h, Side::Left));
                    want = want.sub(&t);
                }
                assert_eq!(got, want, "{name} {w1:?} {w2:?} a={a}");
                // same answer from the twisted bracket on G^2
                assert_eq!(got, fa.classical_bracket(&f, &h, &BracketSpec::Twisted { m: 2 }).unwrap());
            }
        }
    }
}

#[test]
fn mixed_bracket_is_graded_and_jacobi() {
    let fa = FunctionAlgebra::classical(sl2());
    let spec = BracketSpec::Mixed { m: 2 };
    let mut gens = Vec::new();
    for j in 0..2 {
        for w in 1..=2i64 {
            for a in 0..=(w as usize) {
                gens.push((j, w, fa.embed(&fa.phi(&[w], a).unwrap(), j, 2)));
            }
        }
    }
    let br = |f: &PWFunction, h: &PWFunction| fa.classical_bracket(f, h, &spec).unwrap();
    for (j1, w1, f) in &gens {
        for (j2, w2, h) in &gens {
            let b = br(f, h);
            let mut want = vec![vec![0i64]; 2];
            want[*j1][0] += w1;
            want[*j2][0] += w2;
            for k in b.blocks.keys() {
                assert_eq!(k, &want);
            }
            assert_eq!(b, br(h, f).scale_q(&q(-1)));
        }
    }
    let sample: Vec<&PWFunction> = gens.iter().map(|(_, _, f)| f).step_by(2).collect();
    for a in &sample {
        for b in &sample {
            for c in &sample {
                let j = add_all(&fa, &[br(&br(a, b), c), br(&br(b, c), a), br(&br(c, a), b)], 2);
                assert!(j.is_zero());
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn multiply_is_commutative_associative_unital(a in arb_fn(), b in arb_fn(), c in arb_fn()) {
        let fa = FunctionAlgebra::classical(sl2());
        let (f, g, h) = (build(&fa, &a), build(&fa, &b), build(&fa, &c));
        prop_assert_eq!(mul(&fa, &f, &g), mul(&fa, &g, &f));
        prop_assert_eq!(mul(&fa, &mul(&fa, &f, &g), &h), mul(&fa, &f, &mul(&fa, &g, &h)));
        prop_assert_eq!(mul(&fa, &f, &fa.one(1)), f.clone());
        prop_assert_eq!(mul(&fa, &f, &g.add(&h)), mul(&fa, &f, &g).add(&mul(&fa, &f, &h)));
    }

    #[test]
    fn multiply_agrees_with_pairing(a in arb_fn(), b in arb_fn()) {
        let fa = FunctionAlgebra::classical(sl2());
        let (f, g) = (build(&fa, &a), build(&fa, &b));
        let fg = mul(&fa, &f, &g);
        let ev = |h: &PWFunction, w: Vec<usize>| fa.evaluate(h, &[w]).unwrap();
        for w in words() {
            // Δ(x_1 ⋯ x_k) summed over the subsets of letters
            let k = w.len();
            let mut rhs = Q::zero();
            for mask in 0..(1usize << k) {
                let left: Vec<usize> = (0..k).filter(|i| mask & (1 << i) != 0).map(|i| w[i]).collect();
                let right: Vec<usize> = (0..k).filter(|i| mask & (1 << i) == 0).map(|i| w[i]).collect();
                rhs += ev(&f, left) * ev(&g, right);
            }
            prop_assert_eq!(ev(&fg, w.clone()), rhs);
        }
    }

    #[test]
    fn invariant_fields_agree_with_pairing(a in arb_fn(), x in 0usize..3) {
        let fa = FunctionAlgebra::classical(sl2());
        let f = build(&fa, &a);
        let xl = act(&fa, x, &f, Side::Left);
        let xr = act(&fa, x, &f, Side::Right);
        for w in words() {
            // x^L f(u) = f(ux), x^R f(u) = f(xu)
            let mut ux = w.clone();
            ux.push(x);
            let mut xu = vec![x];
            xu.extend(&w);
            prop_assert_eq!(fa.evaluate(&xl, std::slice::from_ref(&w)).unwrap(), fa.evaluate(&f, &[ux]).unwrap());
            prop_assert_eq!(fa.evaluate(&xr, std::slice::from_ref(&w)).unwrap(), fa.evaluate(&f, &[xu]).unwrap());
        }
    }

    #[test]
    fn invariant_fields_are_derivations(a in arb_fn(), b in arb_fn(), x in 0usize..3, left in any::<bool>()) {
        let fa = FunctionAlgebra::classical(sl2());
        let side = if left { Side::Left } else { Side::Right };
        let (f, g) = (build(&fa, &a), build(&fa, &b));
        let lhs = act(&fa, x, &mul(&fa, &f, &g), side);
        let rhs = mul(&fa, &act(&fa, x, &f, side), &g).add(&mul(&fa, &f, &act(&fa, x, &g, side)));
        prop_assert_eq!(lhs, rhs);
        prop_assert!(fa.invariant_action(&SparseVec::new(), &f, side).unwrap().is_zero());
    }

    #[test]
    fn bracket_is_a_biderivation(a in arb_fn(), b in arb_fn(), c in arb_fn()) {
        let fa = FunctionAlgebra::classical(sl2());
        let spec = BracketSpec::Twisted { m: 1 };
        let (f, g, h) = (build(&fa, &a), build(&fa, &b), build(&fa, &c));
        let br = |x: &PWFunction, y: &PWFunction| fa.classical_bracket(x, y, &spec).unwrap();
        prop_assert_eq!(br(&f, &g), br(&g, &f).scale_q(&q(-1)));
        let lhs = br(&f, &mul(&fa, &g, &h));
        let rhs = mul(&fa, &br(&f, &g), &h).add(&mul(&fa, &g, &br(&f, &h)));
        prop_assert_eq!(lhs, rhs);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn twisted_bracket_jacobi(a in arb_fn(), b in arb_fn(), c in arb_fn()) {
        let fa = FunctionAlgebra::classical(sl2());
        let spec = BracketSpec::Twisted { m: 1 };
        let (f, g, h) = (build(&fa, &a), build(&fa, &b), build(&fa, &c));
        let br = |x: &PWFunction, y: &PWFunction| fa.classical_bracket(x, y, &spec).unwrap();
        let j = add_all(&fa, &[br(&br(&f, &g), &h), br(&br(&g, &h), &f), br(&br(&h, &f), &g)], 1);
        prop_assert!(j.is_zero());
    }
}
