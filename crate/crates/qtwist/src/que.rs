//! Truncated Drinfeld–Jimbo algebra U_ħ(sl2), its R-matrix, Hopf twists,
//! the twisted m-fold products, and the quantized function algebras.
//!
//! Conventions: q = e^{ħ/2}, K = q^H = e^{ħH/2},
//! [E,F] = (K − K⁻¹)/(q − q⁻¹), [H,E] = 2E, [H,F] = −2F,
//! Δ(E) = E⊗K^{-1/2} + K^{1/2}⊗E, Δ(F) = F⊗K^{-1/2} + K^{1/2}⊗F,
//! S(E) = −q⁻¹E, S(F) = −qF, S(H) = −H.
//! Elements are kept in the PBW normal form Σ c·F^a H^b E^c with coefficients
//! in ℚ[[ħ]]/(ħ^K); powers of K are expanded as polynomials in H.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, RwLock};

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cgx::{CgError, Flavor, FunctionAlgebra, PWFunction, RepData, SpMat, DEFAULT_DIM_BOUND};
use crate::kernel::{q, q_factorial, q_int, qf, series_inv, Ctx, Series, Q};
use crate::liebialg::{LieAlgebra, LieTensor};
use crate::linalg::SMatrix;

/// (a, b, c) ↦ F^a H^b E^c
pub type Mono = (usize, usize, usize);

const ONE: Mono = (0, 0, 0);

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum QueError {
    #[error("PBW degree {degree} exceeds the bound {bound}")]
    DegreeBound { degree: usize, bound: usize },
    #[error("element is not invertible (constant part is not a unit scalar)")]
    NotInvertible,
    #[error("arity mismatch: {0} vs {1}")]
    Arity(usize, usize),
    #[error("twist axioms fail: {0}")]
    TwistAxiom(String),
    #[error("commutator is not O(ħ)")]
    NotDeformation,
    #[error("function is not supported on the given single factor")]
    NotSingleFactor,
    #[error(transparent)]
    Cg(#[from] CgError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Gen {
    E,
    F,
    H,
}

impl Gen {
    fn mono(self) -> Mono {
        match self {
            Gen::F => (1, 0, 0),
            Gen::H => (0, 1, 0),
            Gen::E => (0, 0, 1),
        }
    }
}

pub fn mono_degree(m: &Mono) -> usize {
    m.0 + m.1 + m.2
}

fn binom(n: usize, k: usize) -> Q {
    let mut r = Q::one();
    for i in 0..k {
        r = r * q((n - i) as i64) / q((i + 1) as i64);
    }
    r
}

fn add_into<K: Ord + Clone>(map: &mut BTreeMap<K, Series>, k: K, x: &Series) {
    if x.is_zero() {
        return;
    }
    match map.get_mut(&k) {
        Some(e) => {
            *e += x;
            if e.is_zero() {
                map.remove(&k);
            }
        }
        None => {
            map.insert(k, x.clone());
        }
    }
}

/// Σ c·F^a H^b E^c
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UqElement {
    pub order: usize,
    pub terms: BTreeMap<Mono, Series>,
}

impl UqElement {
    pub fn zero(order: usize) -> Self {
        UqElement { order, terms: BTreeMap::new() }
    }

    pub fn one(order: usize) -> Self {
        Self::monomial(order, ONE, Series::constant(order, Q::one()))
    }

    pub fn monomial(order: usize, m: Mono, c: Series) -> Self {
        let mut x = Self::zero(order);
        add_into(&mut x.terms, m, &c);
        x
    }

    pub fn generator(order: usize, g: Gen) -> Self {
        Self::monomial(order, g.mono(), Series::constant(order, Q::one()))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.terms.keys().map(mono_degree).max().unwrap_or(0)
    }

    pub fn add(&self, o: &UqElement) -> UqElement {
        let mut x = self.clone();
        for (m, c) in &o.terms {
            add_into(&mut x.terms, *m, c);
        }
        x
    }

    pub fn sub(&self, o: &UqElement) -> UqElement {
        self.add(&o.scale(&Series::constant(self.order, -Q::one())))
    }

    pub fn scale(&self, s: &Series) -> UqElement {
        let mut x = Self::zero(self.order);
        for (m, c) in &self.terms {
            add_into(&mut x.terms, *m, &(c * s));
        }
        x
    }

    pub fn to_tensor(&self) -> UqTensor {
        let mut t = UqTensor::zero(1, self.order);
        for (m, c) in &self.terms {
            add_into(&mut t.terms, vec![*m], c);
        }
        t
    }
}

/// Σ c·x₁⊗⋯⊗x_k over PBW monomials.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UqTensor {
    pub arity: usize,
    pub order: usize,
    pub terms: BTreeMap<Vec<Mono>, Series>,
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq, Eq)]
pub struct UqTermJson {
    /// per leg: [a, b, c] for F^a H^b E^c
    pub legs: Vec<[usize; 3]>,
    pub coeff: Vec<String>,
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq, Eq)]
pub struct UqTensorJson {
    pub arity: usize,
    pub order: usize,
    pub terms: Vec<UqTermJson>,
}

impl UqTensor {
    pub fn zero(arity: usize, order: usize) -> Self {
        UqTensor { arity, order, terms: BTreeMap::new() }
    }

    pub fn one(arity: usize, order: usize) -> Self {
        let mut t = Self::zero(arity, order);
        t.terms.insert(vec![ONE; arity], Series::constant(order, Q::one()));
        t
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add_term(&mut self, legs: Vec<Mono>, c: &Series) {
        debug_assert_eq!(legs.len(), self.arity);
        add_into(&mut self.terms, legs, c);
    }

    pub fn add(&self, o: &UqTensor) -> UqTensor {
        assert_eq!(self.arity, o.arity, "arity mismatch");
        let mut t = self.clone();
        for (k, c) in &o.terms {
            add_into(&mut t.terms, k.clone(), c);
        }
        t
    }

    pub fn sub(&self, o: &UqTensor) -> UqTensor {
        self.add(&o.scale(&Series::constant(self.order, -Q::one())))
    }

    pub fn scale(&self, s: &Series) -> UqTensor {
        let mut t = Self::zero(self.arity, self.order);
        for (k, c) in &self.terms {
            add_into(&mut t.terms, k.clone(), &(c * s));
        }
        t
    }

    /// Outer product: legs of self followed by legs of o.
    pub fn tensor(&self, o: &UqTensor) -> UqTensor {
        let mut t = Self::zero(self.arity + o.arity, self.order);
        for (k1, c1) in &self.terms {
            for (k2, c2) in &o.terms {
                let mut k = k1.clone();
                k.extend_from_slice(k2);
                add_into(&mut t.terms, k, &(c1 * c2));
            }
        }
        t
    }

    /// Place leg i at position legs[i] of an arity-n tensor; other legs are 1.
    pub fn embed(&self, legs: &[usize], n: usize) -> UqTensor {
        assert_eq!(legs.len(), self.arity);
        let mut t = Self::zero(n, self.order);
        for (k, c) in &self.terms {
            let mut key = vec![ONE; n];
            for (i, &p) in legs.iter().enumerate() {
                key[p] = k[i];
            }
            add_into(&mut t.terms, key, c);
        }
        t
    }

    /// New leg perm[i] receives old leg i.
    pub fn permute(&self, perm: &[usize]) -> UqTensor {
        let mut t = Self::zero(self.arity, self.order);
        for (k, c) in &self.terms {
            let mut key = vec![ONE; self.arity];
            for (i, &p) in perm.iter().enumerate() {
                key[p] = k[i];
            }
            add_into(&mut t.terms, key, c);
        }
        t
    }

    pub fn truncate(&self, k: usize) -> UqTensor {
        let mut t = Self::zero(self.arity, k);
        for (key, c) in &self.terms {
            add_into(&mut t.terms, key.clone(), &c.truncate(k));
        }
        t
    }

    /// Coefficient of ħ^j.
    pub fn hbar_coeff(&self, j: usize) -> BTreeMap<Vec<Mono>, Q> {
        self.terms.iter().map(|(k, c)| (k.clone(), c.coeff(j))).filter(|(_, c)| !c.is_zero()).collect()
    }

    /// Scalar part: coefficient of 1⊗⋯⊗1.
    pub fn scalar_part(&self) -> Series {
        self.terms.get(&vec![ONE; self.arity]).cloned().unwrap_or_else(|| Series::zero(self.order))
    }

    pub fn max_degree(&self) -> usize {
        self.terms.keys().flat_map(|k| k.iter().map(mono_degree)).max().unwrap_or(0)
    }

    /// Smallest ħ-valuation among the coefficients (None for zero).
    pub fn valuation(&self) -> Option<usize> {
        self.terms.values().filter_map(|c| c.valuation()).min()
    }

    pub fn to_json(&self) -> UqTensorJson {
        UqTensorJson {
            arity: self.arity,
            order: self.order,
            terms: self
                .terms
                .iter()
                .map(|(k, c)| UqTermJson { legs: k.iter().map(|m| [m.0, m.1, m.2]).collect(), coeff: c.to_strings() })
                .collect(),
        }
    }

    /// Read the ħ^j coefficient as a tensor in g^m ⊗ g^m (sl2 basis h, e, f),
    /// where legs 0..m form the first factor. None if a term is not of the form
    /// one generator per block.
    pub fn to_lie(&self, j: usize, g: &LieAlgebra, m: usize) -> Option<LieTensor> {
        let n = g.dim();
        let idx = |mo: &Mono| -> Option<usize> {
            match mo {
                (0, 1, 0) => g.index("h").ok(),
                (0, 0, 1) => g.index("e").ok(),
                (1, 0, 0) => g.index("f").ok(),
                _ => None,
            }
        };
        let mut out = LieTensor::zero(2);
        for (k, c) in self.hbar_coeff(j) {
            let mut legs = Vec::new();
            for (p, mo) in k.iter().enumerate() {
                if *mo != ONE {
                    legs.push((p, idx(mo)?));
                }
            }
            if legs.len() != 2 || legs[0].0 >= m || legs[1].0 < m {
                return None;
            }
            out.add_term(vec![legs[0].0 * n + legs[0].1, (legs[1].0 - m) * n + legs[1].1], c);
        }
        Some(out)
    }
}

/// The algebra with its truncation order K and PBW degree bound D.
pub struct Uq {
    pub order: usize,
    pub degree_bound: usize,
    ctx: Ctx,
    /// [x]_q as a polynomial in x
    qint_poly: Vec<Series>,
    pc_cache: RwLock<HashMap<usize, Arc<Vec<Series>>>>,
    mul_cache: RwLock<HashMap<(Mono, Mono), Arc<Vec<(Mono, Series)>>>>,
    cop_cache: RwLock<HashMap<Mono, Arc<UqTensor>>>,
}

pub const DEFAULT_DEGREE_BOUND: usize = 12;
pub const DEFAULT_ORDER: usize = 4;

impl Uq {
    pub fn new(order: usize, degree_bound: usize) -> Self {
        assert!(order >= 1, "truncation order must be positive");
        let ctx = Ctx::new(order);
        // [x] = (e^{ħx/2} − e^{−ħx/2}) / (e^{ħ/2} − e^{−ħ/2}); numerator and
        // denominator are ħ times odd power series
        let mut unit = Vec::new();
        for i in 0..order {
            let j = i + 1;
            unit.push(if j % 2 == 1 { q(2) * qf(1, 2).pow(j as i32) / factorial(j) } else { Q::zero() });
        }
        let uinv = series_inv(&ctx.from_coeffs(&unit)).expect("unit");
        let mut poly = vec![Series::zero(order); order + 1];
        for j in (1..=order).step_by(2) {
            let c = q(2) * qf(1, 2).pow(j as i32) / factorial(j);
            poly[j] = &ctx.monomial(j - 1, c) * &uinv;
        }
        while poly.len() > 1 && poly.last().is_some_and(|c| c.is_zero()) {
            poly.pop();
        }
        Uq {
            order,
            degree_bound,
            ctx,
            qint_poly: poly,
            pc_cache: RwLock::new(HashMap::new()),
            mul_cache: RwLock::new(HashMap::new()),
            cop_cache: RwLock::new(HashMap::new()),
        }
    }

    pub fn ctx(&self) -> Ctx {
        self.ctx
    }

    pub fn one(&self) -> UqElement {
        UqElement::one(self.order)
    }

    pub fn gen(&self, g: Gen) -> UqElement {
        UqElement::generator(self.order, g)
    }

    /// [x]_q as a polynomial in x (coefficient of x^j at index j).
    pub fn qint_polynomial(&self) -> &[Series] {
        &self.qint_poly
    }

    fn check(&self, m: &Mono) -> Result<(), QueError> {
        let d = mono_degree(m);
        if d > self.degree_bound {
            return Err(QueError::DegreeBound { degree: d, bound: self.degree_bound });
        }
        Ok(())
    }

    /// p(x) ↦ p(x + s)
    fn shift_poly(&self, p: &[Series], s: i64) -> Vec<Series> {
        let mut out = vec![Series::zero(self.order); p.len()];
        for (j, c) in p.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            for (i, o) in out.iter_mut().enumerate().take(j + 1) {
                let f = binom(j, i) * q(s).pow((j - i) as i32);
                if !f.is_zero() {
                    *o += &c.scale(&f);
                }
            }
        }
        out
    }

    /// Σ_{k<c} [H − 2k]_q
    fn p_c(&self, c: usize) -> Arc<Vec<Series>> {
        if let Some(p) = self.pc_cache.read().expect("lock").get(&c) {
            return p.clone();
        }
        let mut acc = vec![Series::zero(self.order); self.qint_poly.len()];
        for k in 0..c {
            for (a, b) in acc.iter_mut().zip(self.shift_poly(&self.qint_poly, -2 * k as i64)) {
                *a += &b;
            }
        }
        let arc = Arc::new(acc);
        self.pc_cache.write().expect("lock").insert(c, arc.clone());
        arc
    }

    fn right_f(&self, x: &BTreeMap<Mono, Series>) -> BTreeMap<Mono, Series> {
        let mut out = BTreeMap::new();
        for (&(a, b, c), s) in x {
            // F^a H^b E^c F = F^{a+1}(H−2)^b E^c + F^a H^b P_c(H) E^{c−1}
            for i in 0..=b {
                let f = binom(b, i) * q(-2).pow((b - i) as i32);
                add_into(&mut out, (a + 1, i, c), &s.scale(&f));
            }
            if c > 0 {
                let p = self.p_c(c);
                for (j, pj) in p.iter().enumerate() {
                    if !pj.is_zero() {
                        add_into(&mut out, (a, b + j, c - 1), &(s * pj));
                    }
                }
            }
        }
        out
    }

    fn right_h(&self, x: &BTreeMap<Mono, Series>) -> BTreeMap<Mono, Series> {
        let mut out = BTreeMap::new();
        for (&(a, b, c), s) in x {
            // E^c H = (H − 2c) E^c
            add_into(&mut out, (a, b + 1, c), s);
            if c > 0 {
                add_into(&mut out, (a, b, c), &s.scale(&q(-2 * c as i64)));
            }
        }
        out
    }

    /// Normal form of x·y for monomials.
    pub fn mul_mono(&self, x: Mono, y: Mono) -> Result<Arc<Vec<(Mono, Series)>>, QueError> {
        if y == ONE || x == ONE {
            let m = if y == ONE { x } else { y };
            self.check(&m)?;
            return Ok(Arc::new(vec![(m, Series::constant(self.order, Q::one()))]));
        }
        if let Some(r) = self.mul_cache.read().expect("lock").get(&(x, y)) {
            return Ok(r.clone());
        }
        let mut cur: BTreeMap<Mono, Series> = BTreeMap::new();
        cur.insert(x, Series::constant(self.order, Q::one()));
        for _ in 0..y.0 {
            cur = self.right_f(&cur);
        }
        for _ in 0..y.1 {
            cur = self.right_h(&cur);
        }
        let out: Vec<(Mono, Series)> = cur.into_iter().map(|((a, b, c), s)| ((a, b, c + y.2), s)).collect();
        for (m, _) in &out {
            self.check(m)?;
        }
        let arc = Arc::new(out);
        self.mul_cache.write().expect("lock").insert((x, y), arc.clone());
        Ok(arc)
    }

    pub fn mul(&self, x: &UqElement, y: &UqElement) -> Result<UqElement, QueError> {
        let mut out = UqElement::zero(self.order);
        for (m1, c1) in &x.terms {
            for (m2, c2) in &y.terms {
                let c = c1 * c2;
                if c.is_zero() {
                    continue;
                }
                for (m, s) in self.mul_mono(*m1, *m2)?.iter() {
                    add_into(&mut out.terms, *m, &(&c * s));
                }
            }
        }
        Ok(out)
    }

    pub fn pow(&self, x: &UqElement, n: usize) -> Result<UqElement, QueError> {
        let mut acc = self.one();
        for _ in 0..n {
            acc = self.mul(&acc, x)?;
        }
        Ok(acc)
    }

    /// Normal form of Σ c·(product of generators).
    pub fn normalize(&self, expr: &[(Series, Vec<Gen>)]) -> Result<UqElement, QueError> {
        let mut out = UqElement::zero(self.order);
        for (c, word) in expr {
            let mut acc = UqElement::monomial(self.order, ONE, c.clone());
            for g in word {
                acc = self.mul(&acc, &self.gen(*g))?;
            }
            out = out.add(&acc);
        }
        Ok(out)
    }

    /// K^t = e^{ħtH/2} as a polynomial in H.
    pub fn k_pow(&self, t: &Q) -> UqElement {
        let mut x = UqElement::zero(self.order);
        let mut c = Q::one();
        for j in 0..self.order {
            add_into(&mut x.terms, (0, j, 0), &self.ctx.monomial(j, c.clone()));
            c = c * t / q(2) / q((j + 1) as i64);
        }
        x
    }

    /// (K − K⁻¹)/(q − q⁻¹) = [H]_q
    pub fn qint_h(&self) -> UqElement {
        let mut x = UqElement::zero(self.order);
        for (j, c) in self.qint_poly.iter().enumerate() {
            add_into(&mut x.terms, (0, j, 0), c);
        }
        x
    }

    pub fn qpar(&self) -> Series {
        self.ctx.exp_hbar(&qf(1, 2))
    }

    // ---- tensors ----

    pub fn tmul(&self, x: &UqTensor, y: &UqTensor) -> Result<UqTensor, QueError> {
        if x.arity != y.arity {
            return Err(QueError::Arity(x.arity, y.arity));
        }
        let mut out = UqTensor::zero(x.arity, self.order);
        for (k1, c1) in &x.terms {
            for (k2, c2) in &y.terms {
                let c = c1 * c2;
                if c.is_zero() {
                    continue;
                }
                let mut partial: Vec<(Vec<Mono>, Series)> = vec![(Vec::with_capacity(x.arity), c)];
                for (a, b) in k1.iter().zip(k2) {
                    let prods = self.mul_mono(*a, *b)?;
                    if prods.len() == 1 && prods[0].1.is_one() {
                        for (k, _) in partial.iter_mut() {
                            k.push(prods[0].0);
                        }
                        continue;
                    }
                    let mut next = Vec::with_capacity(partial.len() * prods.len());
                    for (k, s) in &partial {
                        for (m, t) in prods.iter() {
                            let v = s * t;
                            if v.is_zero() {
                                continue;
                            }
                            let mut kk = k.clone();
                            kk.push(*m);
                            next.push((kk, v));
                        }
                    }
                    partial = next;
                }
                for (k, s) in partial {
                    add_into(&mut out.terms, k, &s);
                }
            }
        }
        Ok(out)
    }

    pub fn tmul_all(&self, xs: &[&UqTensor]) -> Result<UqTensor, QueError> {
        let mut acc = UqTensor::one(xs[0].arity, self.order);
        for x in xs {
            acc = self.tmul(&acc, x)?;
        }
        Ok(acc)
    }

    /// Inverse of t = c·1 + N with c a nonzero rational and N = O(ħ).
    pub fn tinv(&self, t: &UqTensor) -> Result<UqTensor, QueError> {
        let s = t.scalar_part();
        let c = s.c0().clone();
        if c.is_zero() {
            return Err(QueError::NotInvertible);
        }
        let cinv = Series::constant(self.order, c.recip());
        let one = UqTensor::one(t.arity, self.order);
        let rest = t.scale(&cinv).sub(&one);
        if rest.terms.values().any(|x| !x.c0().is_zero()) {
            return Err(QueError::NotInvertible);
        }
        // (1 + N)⁻¹ = Σ (−N)^k, N^k = O(ħ^k)
        let neg = rest.scale(&Series::constant(self.order, -Q::one()));
        let mut acc = one.clone();
        let mut p = one;
        for _ in 1..self.order {
            p = self.tmul(&p, &neg)?;
            if p.is_zero() {
                break;
            }
            acc = acc.add(&p);
        }
        Ok(acc.scale(&cinv))
    }

    /// Δ on a monomial.
    pub fn coproduct_mono(&self, m: Mono) -> Result<Arc<UqTensor>, QueError> {
        if let Some(t) = self.cop_cache.read().expect("lock").get(&m) {
            return Ok(t.clone());
        }
        let khalf = self.k_pow(&qf(1, 2)).to_tensor();
        let kmhalf = self.k_pow(&qf(-1, 2)).to_tensor();
        let one = UqTensor::one(1, self.order);
        let e = self.gen(Gen::E).to_tensor();
        let f = self.gen(Gen::F).to_tensor();
        let h = self.gen(Gen::H).to_tensor();
        let de = e.tensor(&kmhalf).add(&khalf.tensor(&e));
        let df = f.tensor(&kmhalf).add(&khalf.tensor(&f));
        let dh = h.tensor(&one).add(&one.tensor(&h));
        let mut acc = UqTensor::one(2, self.order);
        for _ in 0..m.0 {
            acc = self.tmul(&acc, &df)?;
        }
        for _ in 0..m.1 {
            acc = self.tmul(&acc, &dh)?;
        }
        for _ in 0..m.2 {
            acc = self.tmul(&acc, &de)?;
        }
        let arc = Arc::new(acc);
        self.cop_cache.write().expect("lock").insert(m, arc.clone());
        Ok(arc)
    }

    pub fn coproduct(&self, x: &UqElement) -> Result<UqTensor, QueError> {
        let mut out = UqTensor::zero(2, self.order);
        for (m, c) in &x.terms {
            out = out.add(&self.coproduct_mono(*m)?.scale(c));
        }
        Ok(out)
    }

    pub fn antipode_mono(&self, m: Mono) -> Result<UqElement, QueError> {
        let qq = self.qpar();
        let qi = series_inv(&qq).expect("unit");
        let se = self.gen(Gen::E).scale(&-&qi);
        let sf = self.gen(Gen::F).scale(&-&qq);
        let sh = self.gen(Gen::H).scale(&Series::constant(self.order, -Q::one()));
        // anti-multiplicative: S(F^a H^b E^c) = S(E)^c S(H)^b S(F)^a
        let mut acc = self.pow(&se, m.2)?;
        acc = self.mul(&acc, &self.pow(&sh, m.1)?)?;
        self.mul(&acc, &self.pow(&sf, m.0)?)
    }

    pub fn antipode(&self, x: &UqElement) -> Result<UqElement, QueError> {
        let mut out = UqElement::zero(self.order);
        for (m, c) in &x.terms {
            out = out.add(&self.antipode_mono(*m)?.scale(c));
        }
        Ok(out)
    }

    pub fn counit(&self, x: &UqElement) -> Series {
        x.terms.get(&ONE).cloned().unwrap_or_else(|| Series::zero(self.order))
    }

    /// Δ on leg i; the two new legs sit at i and i+1.
    pub fn coproduct_leg(&self, t: &UqTensor, i: usize) -> Result<UqTensor, QueError> {
        let mut out = UqTensor::zero(t.arity + 1, self.order);
        for (k, c) in &t.terms {
            let d = self.coproduct_mono(k[i])?;
            for (dk, dc) in &d.terms {
                let mut key = k[..i].to_vec();
                key.extend_from_slice(dk);
                key.extend_from_slice(&k[i + 1..]);
                add_into(&mut out.terms, key, &(c * dc));
            }
        }
        Ok(out)
    }

    pub fn antipode_leg(&self, t: &UqTensor, i: usize) -> Result<UqTensor, QueError> {
        let mut out = UqTensor::zero(t.arity, self.order);
        let mut cache: HashMap<Mono, UqElement> = HashMap::new();
        for (k, c) in &t.terms {
            if let std::collections::hash_map::Entry::Vacant(e) = cache.entry(k[i]) {
                e.insert(self.antipode_mono(k[i])?);
            }
            for (m, s) in &cache[&k[i]].terms {
                let mut key = k.clone();
                key[i] = *m;
                add_into(&mut out.terms, key, &(c * s));
            }
        }
        Ok(out)
    }

    /// ε on leg i; the leg is removed.
    pub fn counit_leg(&self, t: &UqTensor, i: usize) -> UqTensor {
        let mut out = UqTensor::zero(t.arity - 1, self.order);
        for (k, c) in &t.terms {
            if k[i] == ONE {
                let mut key = k.clone();
                key.remove(i);
                add_into(&mut out.terms, key, c);
            }
        }
        out
    }

    /// Multiply leg j into leg i (leg_i · leg_j); leg j is removed.
    pub fn mul_legs(&self, t: &UqTensor, i: usize, j: usize) -> Result<UqTensor, QueError> {
        let mut out = UqTensor::zero(t.arity - 1, self.order);
        for (k, c) in &t.terms {
            for (m, s) in self.mul_mono(k[i], k[j])?.iter() {
                let mut key = k.clone();
                key[i] = *m;
                key.remove(j);
                add_into(&mut out.terms, key, &(c * s));
            }
        }
        Ok(out)
    }

    /// Δ^{(m)}: H → H^{⊗m}.
    pub fn iterated_coproduct(&self, x: &UqTensor, leg: usize, m: usize) -> Result<UqTensor, QueError> {
        let mut t = x.clone();
        for _ in 1..m {
            t = self.coproduct_leg(&t, leg)?;
        }
        Ok(t)
    }

    /// Δ_A for A = H^{⊗m} applied to block b of a tensor made of m-leg blocks.
    pub fn coproduct_block(&self, t: &UqTensor, m: usize, b: usize) -> Result<UqTensor, QueError> {
        let mut out = t.clone();
        for l in (0..m).rev() {
            out = self.coproduct_leg(&out, b * m + l)?;
        }
        // block b now reads l₀' l₀'' l₁' l₁'' …; sort into (l' …)(l'' …)
        let mut perm: Vec<usize> = (0..out.arity).collect();
        for l in 0..m {
            perm[b * m + 2 * l] = b * m + l;
            perm[b * m + 2 * l + 1] = b * m + m + l;
        }
        Ok(out.permute(&perm))
    }

    pub fn counit_block(&self, t: &UqTensor, m: usize, b: usize) -> UqTensor {
        let mut out = t.clone();
        for l in (0..m).rev() {
            out = self.counit_leg(&out, b * m + l);
        }
        out
    }

    /// R = e^{ħH⊗H/4} Σ_n q^{n(n−1)/2}(q−q⁻¹)^n/[n]! · K^{−n/2}F^n ⊗ E^n K^{n/2}
    pub fn r_matrix_sl2(&self) -> Result<UqTensor, QueError> {
        let qq = self.qpar();
        let qi = series_inv(&qq).expect("unit");
        let diff = &qq - &qi;
        let mut sum = UqTensor::zero(2, self.order);
        for n in 0..self.order {
            let qf_n = q_factorial(self.order, n as i64, &Q::one());
            let c = &(&qq.pow((n * n.saturating_sub(1) / 2) as u32) * &diff.pow(n as u32))
                * &series_inv(&qf_n).expect("unit");
            if c.is_zero() {
                continue;
            }
            let kl = self.k_pow(&qf(-(n as i64), 2));
            let kr = self.k_pow(&qf(n as i64, 2));
            let left = self.mul(&kl, &self.pow(&self.gen(Gen::F), n)?)?;
            let right = self.mul(&self.pow(&self.gen(Gen::E), n)?, &kr)?;
            sum = sum.add(&left.to_tensor().tensor(&right.to_tensor()).scale(&c));
        }
        let mut ex = UqTensor::zero(2, self.order);
        let mut c = Q::one();
        for j in 0..self.order {
            ex.add_term(vec![(0, j, 0), (0, j, 0)], &self.ctx.monomial(j, c.clone()));
            c = c / q(4) / q((j + 1) as i64);
        }
        self.tmul(&ex, &sum)
    }

    /// Δ^op − RΔR⁻¹ on x.
    pub fn almost_cocommutativity_residual(
        &self,
        r: &UqTensor,
        rinv: &UqTensor,
        x: &UqElement,
    ) -> Result<UqTensor, QueError> {
        let d = self.coproduct(x)?;
        let lhs = d.permute(&[1, 0]);
        let rhs = self.tmul_all(&[r, &d, rinv])?;
        Ok(lhs.sub(&rhs))
    }

    /// ((Δ⊗I)R − R₁₃R₂₃, (I⊗Δ)R − R₁₃R₁₂)
    pub fn hexagon_residuals(&self, r: &UqTensor) -> Result<(UqTensor, UqTensor), QueError> {
        let r13 = r.embed(&[0, 2], 3);
        let r23 = r.embed(&[1, 2], 3);
        let r12 = r.embed(&[0, 1], 3);
        let a = self.coproduct_leg(r, 0)?.sub(&self.tmul(&r13, &r23)?);
        let b = self.coproduct_leg(r, 1)?.sub(&self.tmul(&r13, &r12)?);
        Ok((a, b))
    }

    /// Twi^m(R) = ∏_{k=2}^{m} ∏_{l=k−1}^{1} R_{k, m+l} in H^{⊗2m}.
    pub fn twi_m(&self, r: &UqTensor, m: usize) -> Result<UqTensor, QueError> {
        let mut acc = UqTensor::one(2 * m, self.order);
        for k in 2..=m {
            for l in (1..k).rev() {
                acc = self.tmul(&acc, &r.embed(&[k - 1, m + l - 1], 2 * m))?;
            }
        }
        Ok(acc)
    }

    /// Twi^m(R) = Twi^{m−1}(R)·(Δ^{(m−1)}⊗I⊗Δ^{(m−1)}⊗I)(R₂₃)
    pub fn twi_m_inductive(&self, r: &UqTensor, m: usize) -> Result<UqTensor, QueError> {
        if m <= 1 {
            return Ok(UqTensor::one(2 * m.max(1), self.order));
        }
        let prev = self.twi_m_inductive(r, m - 1)?;
        let legs: Vec<usize> = (0..m - 1).chain(m..2 * m - 1).collect();
        let prev = prev.embed(&legs, 2 * m);
        let spread = self.iterated_coproduct(r, 1, m - 1)?;
        let legs: Vec<usize> = std::iter::once(m - 1).chain(m..2 * m - 1).collect();
        let step = spread.embed(&legs, 2 * m);
        self.tmul(&prev, &step)
    }

    /// R^(m) = (∏_{k=m}^{2} ∏_{l=1}^{k−1} (R⁻¹)_{m+k,l})(∏_{k=1}^{m} R_{k,m+k}) Twi^m(R).
    /// The inverse factors carry their first leg in the second block; with the
    /// legs the other way round the ħ-linear term is not r^(m).
    pub fn r_matrix_m(&self, r: &UqTensor, m: usize) -> Result<UqTensor, QueError> {
        let rinv = self.tinv(r)?;
        let n = 2 * m;
        let mut acc = UqTensor::one(n, self.order);
        for k in (2..=m).rev() {
            for l in 1..k {
                acc = self.tmul(&acc, &rinv.embed(&[m + k - 1, l - 1], n))?;
            }
        }
        for k in 1..=m {
            acc = self.tmul(&acc, &r.embed(&[k - 1, m + k - 1], n))?;
        }
        self.tmul(&acc, &self.twi_m(r, m)?)
    }

    /// Residuals of (Δ_A⊗I)(J)J₁₂ = (I⊗Δ_A)(J)J₂₃ and (ε_A⊗I)J = (I⊗ε_A)J = 1
    /// for J over A = H^{⊗m}.
    pub fn twist_residuals(&self, j: &UqTensor, m: usize) -> Result<(UqTensor, UqTensor, UqTensor), QueError> {
        if j.arity != 2 * m {
            return Err(QueError::Arity(j.arity, 2 * m));
        }
        let left: Vec<usize> = (0..2 * m).collect();
        let right: Vec<usize> = (m..3 * m).collect();
        let lhs = self.tmul(&self.coproduct_block(j, m, 0)?, &j.embed(&left, 3 * m))?;
        let rhs = self.tmul(&self.coproduct_block(j, m, 1)?, &j.embed(&right, 3 * m))?;
        let one = UqTensor::one(m, self.order);
        let e1 = self.counit_block(j, m, 0).sub(&one);
        let e2 = self.counit_block(j, m, 1).sub(&one);
        Ok((lhs.sub(&rhs), e1, e2))
    }

    pub fn twist_hopf(&self, j: &UqTensor, m: usize) -> Result<TwistedHopf<'_>, QueError> {
        let (a, b, c) = self.twist_residuals(j, m)?;
        if !(a.is_zero() && b.is_zero() && c.is_zero()) {
            return Err(QueError::TwistAxiom(format!(
                "cocycle residual has {} terms, counit residuals {} and {}",
                a.terms.len(),
                b.terms.len(),
                c.terms.len()
            )));
        }
        let j_inv = self.tinv(j)?;
        let mut sj = j.clone();
        for l in 0..m {
            sj = self.antipode_leg(&sj, l)?;
        }
        let mut qq = sj;
        for l in (0..m).rev() {
            qq = self.mul_legs(&qq, l, m + l)?;
        }
        let q_inv = self.tinv(&qq)?;
        Ok(TwistedHopf { uq: self, m, j: j.clone(), j_inv, q: qq, q_inv })
    }
}

fn factorial(n: usize) -> Q {
    (1..=n).fold(Q::one(), |a, i| a * q(i as i64))
}

/// (H^{⊗m})_J with Δ_J = J⁻¹Δ_A J and S_J = Q⁻¹S_A Q, Q = μ_A((S_A⊗I)J).
pub struct TwistedHopf<'a> {
    pub uq: &'a Uq,
    pub m: usize,
    pub j: UqTensor,
    pub j_inv: UqTensor,
    pub q: UqTensor,
    pub q_inv: UqTensor,
}

impl TwistedHopf<'_> {
    /// Δ_J applied to block b of a tensor made of m-leg blocks.
    pub fn coproduct_block(&self, t: &UqTensor, b: usize) -> Result<UqTensor, QueError> {
        let d = self.uq.coproduct_block(t, self.m, b)?;
        let legs: Vec<usize> = (b * self.m..(b + 2) * self.m).collect();
        let j = self.j.embed(&legs, d.arity);
        let ji = self.j_inv.embed(&legs, d.arity);
        self.uq.tmul_all(&[&ji, &d, &j])
    }

    pub fn coproduct(&self, x: &UqTensor) -> Result<UqTensor, QueError> {
        self.coproduct_block(x, 0)
    }

    /// S_J applied to block b.
    pub fn antipode_block(&self, t: &UqTensor, b: usize) -> Result<UqTensor, QueError> {
        let mut s = t.clone();
        for l in 0..self.m {
            s = self.uq.antipode_leg(&s, b * self.m + l)?;
        }
        let legs: Vec<usize> = (b * self.m..(b + 1) * self.m).collect();
        let qq = self.q.embed(&legs, t.arity);
        let qi = self.q_inv.embed(&legs, t.arity);
        self.uq.tmul_all(&[&qi, &s, &qq])
    }

    /// μ(S_J⊗I)Δ_J(x) − ε(x)1
    pub fn antipode_residual(&self, x: &UqTensor) -> Result<UqTensor, QueError> {
        let d = self.coproduct(x)?;
        let mut s = self.antipode_block(&d, 0)?;
        for l in (0..self.m).rev() {
            s = self.uq.mul_legs(&s, l, self.m + l)?;
        }
        let mut eps = x.clone();
        for l in (0..self.m).rev() {
            eps = self.uq.counit_leg(&eps, l);
        }
        Ok(s.sub(&UqTensor::one(self.m, self.uq.order).scale(&eps.scalar_part())))
    }

    /// (Δ_J⊗I)Δ_J(x) − (I⊗Δ_J)Δ_J(x)
    pub fn coassociativity_residual(&self, x: &UqTensor) -> Result<UqTensor, QueError> {
        let d = self.coproduct(x)?;
        Ok(self.coproduct_block(&d, 0)?.sub(&self.coproduct_block(&d, 1)?))
    }
}

// ---- representations ----

/// V_ħ(n): basis v_0 … v_n, F v_k = v_{k+1}, E v_k = [k][n−k+1] v_{k−1},
/// H v_k = (n−2k) v_k.
#[derive(Clone, Debug)]
pub struct QIrrep {
    pub n: i64,
    pub order: usize,
    pub e: SMatrix,
    pub f: SMatrix,
    pub h: SMatrix,
    pub data: RepData,
}

fn dense_to_sparse(m: &SMatrix) -> SpMat {
    let mut out = SpMat::new();
    for (i, row) in m.iter().enumerate() {
        for (j, x) in row.iter().enumerate() {
            if !x.is_zero() {
                out.insert((i, j), x.clone());
            }
        }
    }
    out
}

pub fn qirrep_build(n: i64, order: usize) -> QIrrep {
    assert!(n >= 0, "highest weight must be dominant");
    let dim = (n + 1) as usize;
    let z = Series::zero(order);
    let mut e = vec![vec![z.clone(); dim]; dim];
    let mut f = vec![vec![z.clone(); dim]; dim];
    let mut h = vec![vec![z.clone(); dim]; dim];
    for k in 0..dim {
        let ki = k as i64;
        h[k][k] = Series::constant(order, q(n - 2 * ki));
        if k + 1 < dim {
            f[k + 1][k] = Series::constant(order, Q::one());
        }
        if k > 0 {
            e[k - 1][k] = &q_int(order, ki, &Q::one()) * &q_int(order, n - ki + 1, &Q::one());
        }
    }
    let data = RepData {
        highest: vec![n],
        dim,
        weights: (0..dim as i64).map(|k| vec![n - 2 * k]).collect(),
        words: (0..dim).map(|k| vec![0; k]).collect(),
        e: vec![dense_to_sparse(&e)],
        f: vec![dense_to_sparse(&f)],
        classical: None,
    };
    QIrrep { n, order, e, f, h, data }
}

fn dense_mul(a: &SMatrix, b: &SMatrix, order: usize) -> SMatrix {
    crate::linalg::mat_mul(a, b, order)
}

fn dense_add(a: &SMatrix, b: &SMatrix) -> SMatrix {
    a.iter().zip(b).map(|(r, s)| r.iter().zip(s).map(|(x, y)| x + y).collect()).collect()
}

fn dense_scale(a: &SMatrix, c: &Series) -> SMatrix {
    a.iter().map(|r| r.iter().map(|x| x * c).collect()).collect()
}

impl QIrrep {
    pub fn dim(&self) -> usize {
        self.data.dim
    }

    pub fn mono_matrix(&self, m: Mono) -> SMatrix {
        let mut acc = crate::linalg::identity(self.dim(), self.order);
        for _ in 0..m.0 {
            acc = dense_mul(&acc, &self.f, self.order);
        }
        for _ in 0..m.1 {
            acc = dense_mul(&acc, &self.h, self.order);
        }
        for _ in 0..m.2 {
            acc = dense_mul(&acc, &self.e, self.order);
        }
        acc
    }

    pub fn matrix_of(&self, x: &UqElement) -> SMatrix {
        let d = self.dim();
        let mut acc = vec![vec![Series::zero(self.order); d]; d];
        for (m, c) in &x.terms {
            acc = dense_add(&acc, &dense_scale(&self.mono_matrix(*m), c));
        }
        acc
    }

    /// Relations [E,F] = [H]_q, [H,E] = 2E, [H,F] = −2F on the matrices.
    pub fn check_relations(&self, uq: &Uq) -> bool {
        let o = self.order;
        let comm = |a: &SMatrix, b: &SMatrix| {
            let ab = dense_mul(a, b, o);
            let ba = dense_mul(b, a, o);
            dense_add(&ab, &dense_scale(&ba, &Series::constant(o, -Q::one())))
        };
        let ef = comm(&self.e, &self.f);
        let qh = self.matrix_of(&uq.qint_h());
        let he = comm(&self.h, &self.e);
        let hf = comm(&self.h, &self.f);
        ef == qh
            && he == dense_scale(&self.e, &Series::constant(o, q(2)))
            && hf == dense_scale(&self.f, &Series::constant(o, q(-2)))
    }
}

// ---- quantized function algebras ----

/// Quantized functions share the Peter–Weyl block layout of `PWFunction`.
pub type QFunction = PWFunction;

/// Which side a U_ħ-tensor acts on: left acts on ξ-slots, right on v-slots.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ActSide {
    Left,
    Right,
}

/// ℂ_ħ[SL2]^{⊗m} with its bimodule structure and twisted products.
pub struct QFunctionAlgebra {
    pub uq: Arc<Uq>,
    pub fa: FunctionAlgebra,
    pub r: UqTensor,
    qreps: RwLock<HashMap<i64, Arc<QIrrep>>>,
    smat: RwLock<HashMap<(i64, Mono), Arc<SMatrix>>>,
    twi: RwLock<HashMap<usize, Arc<UqTensor>>>,
    twi_inv: RwLock<HashMap<usize, Arc<UqTensor>>>,
}

/// Terms of a tensor grouped by their first `m` legs.
type Split = Vec<(Vec<Mono>, Vec<(Vec<Mono>, Series)>)>;

fn split_tensor(t: &UqTensor, m: usize) -> Split {
    let mut g: BTreeMap<Vec<Mono>, Vec<(Vec<Mono>, Series)>> = BTreeMap::new();
    for (k, c) in &t.terms {
        g.entry(k[..m].to_vec()).or_default().push((k[m..].to_vec(), c.clone()));
    }
    g.into_iter().collect()
}

impl QFunctionAlgebra {
    pub fn new(order: usize, degree_bound: usize) -> Result<Self, QueError> {
        let uq = Arc::new(Uq::new(order, degree_bound));
        let g = Arc::new(LieAlgebra::named("sl2").expect("bundled sl2"));
        let r = uq.r_matrix_sl2()?;
        Ok(QFunctionAlgebra {
            fa: FunctionAlgebra::new(g, Flavor::Quantum, order, DEFAULT_DIM_BOUND),
            uq,
            r,
            qreps: RwLock::new(HashMap::new()),
            smat: RwLock::new(HashMap::new()),
            twi: RwLock::new(HashMap::new()),
            twi_inv: RwLock::new(HashMap::new()),
        })
    }

    pub fn order(&self) -> usize {
        self.uq.order
    }

    pub fn qirrep(&self, n: i64) -> Arc<QIrrep> {
        if let Some(r) = self.qreps.read().expect("lock").get(&n) {
            return r.clone();
        }
        let arc = Arc::new(qirrep_build(n, self.order()));
        self.qreps.write().expect("lock").entry(n).or_insert_with(|| arc.clone());
        arc
    }

    /// ρ(S(m)) on V_ħ(n).
    fn antipode_matrix(&self, n: i64, m: Mono) -> Result<Arc<SMatrix>, QueError> {
        if let Some(x) = self.smat.read().expect("lock").get(&(n, m)) {
            return Ok(x.clone());
        }
        let s = self.uq.antipode_mono(m)?;
        let arc = Arc::new(self.qirrep(n).matrix_of(&s));
        self.smat.write().expect("lock").insert((n, m), arc.clone());
        Ok(arc)
    }

    pub fn coefficient(&self, n: i64, a: usize, b: usize) -> Result<QFunction, QueError> {
        Ok(self.fa.coefficient(&[n], a, b)?)
    }

    pub fn one(&self, m: usize) -> QFunction {
        self.fa.one(m)
    }

    pub fn embed(&self, f: &QFunction, j: usize, m: usize) -> QFunction {
        self.fa.embed(f, j, m)
    }

    pub fn q_multiply(&self, f: &QFunction, g: &QFunction) -> Result<QFunction, QueError> {
        Ok(self.fa.multiply(f, g)?)
    }

    /// Left action y·c_{ξ,v} = c_{y·ξ,v} or right action c_{ξ,v}·y = c_{ξ,S(y)v}
    /// of a pure leg tuple, factor by factor.
    fn act_legs(&self, legs: &[Mono], f: &QFunction, side: ActSide) -> Result<QFunction, QueError> {
        let mut cur = f.clone();
        for (j, m) in legs.iter().enumerate() {
            if *m == ONE {
                continue;
            }
            let mut next = PWFunction::zero(f.m, self.order());
            for (w, b) in &cur.blocks {
                let s = self.antipode_matrix(w[j][0], *m)?;
                for (idx, c) in b {
                    let (a, v) = (idx[2 * j], idx[2 * j + 1]);
                    match side {
                        // ξ ↦ ξ∘S(y): C'[c'] = Σ_a C[a] S(y)[a][c']
                        ActSide::Left => {
                            for (c2, x) in s[a].iter().enumerate() {
                                if !x.is_zero() {
                                    let mut i2 = idx.clone();
                                    i2[2 * j] = c2;
                                    next.add_entry(w.clone(), i2, c * x);
                                }
                            }
                        }
                        // v ↦ S(y)v: C'[a][d] = Σ_v C[a][v] S(y)[d][v]
                        ActSide::Right => {
                            for (d, row) in s.iter().enumerate() {
                                if !row[v].is_zero() {
                                    let mut i2 = idx.clone();
                                    i2[2 * j + 1] = d;
                                    next.add_entry(w.clone(), i2, c * &row[v]);
                                }
                            }
                        }
                    }
                }
            }
            cur = next;
        }
        Ok(cur)
    }

    pub fn act(&self, t: &UqTensor, f: &QFunction, side: ActSide) -> Result<QFunction, QueError> {
        if t.arity != f.m {
            return Err(QueError::Arity(t.arity, f.m));
        }
        let mut out = PWFunction::zero(f.m, self.order());
        for (k, c) in &t.terms {
            out.add_scaled(&self.act_legs(k, f, side)?, c);
        }
        Ok(out)
    }

    /// f(x) for x ∈ U_ħ^{⊗m}: Σ C[a][b] Π_j S(x_j)[a_j][b_j].
    pub fn evaluate(&self, f: &QFunction, x: &UqTensor) -> Result<Series, QueError> {
        if x.arity != f.m {
            return Err(QueError::Arity(x.arity, f.m));
        }
        let mut total = Series::zero(self.order());
        for (w, b) in &f.blocks {
            for (k, c) in &x.terms {
                let mats = k
                    .iter()
                    .enumerate()
                    .map(|(j, m)| self.antipode_matrix(w[j][0], *m))
                    .collect::<Result<Vec<_>, _>>()?;
                for (idx, y) in b {
                    let mut v = c * y;
                    for (j, s) in mats.iter().enumerate() {
                        if v.is_zero() {
                            break;
                        }
                        v = &v * &s[idx[2 * j]][idx[2 * j + 1]];
                    }
                    total += &v;
                }
            }
        }
        Ok(total)
    }

    pub fn twi(&self, m: usize) -> Result<Arc<UqTensor>, QueError> {
        if let Some(t) = self.twi.read().expect("lock").get(&m) {
            return Ok(t.clone());
        }
        let t = Arc::new(self.uq.twi_m(&self.r, m)?);
        self.twi.write().expect("lock").insert(m, t.clone());
        Ok(t)
    }

    fn twi_inverse(&self, m: usize) -> Result<Arc<UqTensor>, QueError> {
        if let Some(t) = self.twi_inv.read().expect("lock").get(&m) {
            return Ok(t.clone());
        }
        let t = Arc::new(self.uq.tinv(&*self.twi(m)?)?);
        self.twi_inv.write().expect("lock").insert(m, t.clone());
        Ok(t)
    }

    fn by_block(f: &QFunction) -> Vec<QFunction> {
        f.blocks
            .iter()
            .map(|(w, b)| {
                let mut p = PWFunction::zero(f.m, f.order);
                p.blocks.insert(w.clone(), b.clone());
                p
            })
            .collect()
    }

    /// μ(J·(f⊗g)) for J = Twi^m(R̃), R̃ = τ₂₃(R ⊗ R₀⁻¹) on ℂ_ħ[N\G]^{⊗m}. The
    /// U_ħ(t) legs act on a block of weight n by ⟨n,·⟩, so R₀⁻¹ = e^{−ħr₀}
    /// contributes e^{−ħ n n'/4} per factor pair.
    pub fn quantum_affine_multiply(&self, f: &QFunction, g: &QFunction) -> Result<QFunction, QueError> {
        if f.m != g.m {
            return Err(QueError::Arity(f.m, g.m));
        }
        if !(f.is_semi_invariant() && g.is_semi_invariant()) {
            return Err(CgError::NotSemiInvariant.into());
        }
        let m = f.m;
        let split = split_tensor(&*self.twi(m)?, m);
        let ctx = self.uq.ctx();
        let mut out = PWFunction::zero(m, self.order());
        for fb in Self::by_block(f) {
            let wf = fb.weights()[0].clone();
            for gb in Self::by_block(g) {
                let wg = gb.weights()[0].clone();
                let mut expo = Q::zero();
                for k in 1..m {
                    for l in 0..k {
                        expo -= qf(wf[k][0] * wg[l][0], 4);
                    }
                }
                let scalar = ctx.exp_hbar(&expo);
                for (lf, rest) in &split {
                    let af = self.act_legs(lf, &fb, ActSide::Left)?;
                    if af.is_zero() {
                        continue;
                    }
                    let mut ag = PWFunction::zero(m, self.order());
                    for (lg, c) in rest {
                        ag.add_scaled(&self.act_legs(lg, &gb, ActSide::Left)?, c);
                    }
                    if ag.is_zero() {
                        continue;
                    }
                    out.add_scaled(&self.q_multiply(&af, &ag)?, &scalar);
                }
            }
        }
        Ok(out)
    }

    /// Product of f ∈ A_i and g ∈ A_j (single-factor elements of ℂ_ħ[N\G]^{⊗m},
    /// factors 0-based): f·g if i ≤ j, else R̃_{ij}·(g·f).
    pub fn factorized_multiply(&self, f: &QFunction, i: usize, g: &QFunction, j: usize) -> Result<QFunction, QueError> {
        if f.m != g.m {
            return Err(QueError::Arity(f.m, g.m));
        }
        let m = f.m;
        if i >= m || j >= m {
            return Err(QueError::Arity(i.max(j) + 1, m));
        }
        let single = |h: &QFunction, k: usize| {
            h.weights().iter().all(|w| w.iter().enumerate().all(|(l, x)| l == k || x.iter().all(|&y| y == 0)))
        };
        if !(single(f, i) && single(g, j)) {
            return Err(QueError::NotSingleFactor);
        }
        if !(f.is_semi_invariant() && g.is_semi_invariant()) {
            return Err(CgError::NotSemiInvariant.into());
        }
        if i <= j {
            return self.q_multiply(f, g);
        }
        let gf = self.q_multiply(g, f)?;
        let rij = self.r.embed(&[i, j], m);
        let ctx = self.uq.ctx();
        let mut out = PWFunction::zero(m, self.order());
        for p in Self::by_block(&gf) {
            let w = p.weights()[0].clone();
            let scalar = ctx.exp_hbar(&qf(-w[i][0] * w[j][0], 4));
            out.add_scaled(&self.act(&rij, &p, ActSide::Left)?, &scalar);
        }
        Ok(out)
    }

    /// μ(J·(f⊗g)) on ℂ_ħ[G]^{⊗m} with J = Twi^m(R) acting on the left.
    pub fn twisted_multiply(&self, f: &QFunction, g: &QFunction) -> Result<QFunction, QueError> {
        if f.m != g.m {
            return Err(QueError::Arity(f.m, g.m));
        }
        let m = f.m;
        let mut out = PWFunction::zero(m, self.order());
        for (lf, rest) in &split_tensor(&*self.twi(m)?, m) {
            let af = self.act_legs(lf, f, ActSide::Left)?;
            if af.is_zero() {
                continue;
            }
            let mut ag = PWFunction::zero(m, self.order());
            for (lg, c) in rest {
                ag.add_scaled(&self.act_legs(lg, g, ActSide::Left)?, c);
            }
            out = out.add(&self.q_multiply(&af, &ag)?);
        }
        Ok(out)
    }

    /// ℋ^(m) product μ(J·(f⊗g)·J⁻¹), the dual of Δ_J = J⁻¹Δ_A J.
    pub fn h_multiply(&self, f: &QFunction, g: &QFunction) -> Result<QFunction, QueError> {
        if f.m != g.m {
            return Err(QueError::Arity(f.m, g.m));
        }
        let m = f.m;
        let jl = split_tensor(&*self.twi(m)?, m);
        let jr = split_tensor(&*self.twi_inverse(m)?, m);
        let mut out = PWFunction::zero(m, self.order());
        for (rf, rrest) in &jr {
            let f1 = self.act_legs(rf, f, ActSide::Right)?;
            if f1.is_zero() {
                continue;
            }
            let mut g1 = PWFunction::zero(m, self.order());
            for (rg, c) in rrest {
                g1.add_scaled(&self.act_legs(rg, g, ActSide::Right)?, c);
            }
            if g1.is_zero() {
                continue;
            }
            for (lf, lrest) in &jl {
                let f2 = self.act_legs(lf, &f1, ActSide::Left)?;
                if f2.is_zero() {
                    continue;
                }
                let mut g2 = PWFunction::zero(m, self.order());
                for (lg, c) in lrest {
                    g2.add_scaled(&self.act_legs(lg, &g1, ActSide::Left)?, c);
                }
                if g2.is_zero() {
                    continue;
                }
                out = out.add(&self.q_multiply(&f2, &g2)?);
            }
        }
        Ok(out)
    }
}

/// {f,g} = (1/ħ)(f·g − g·f) mod ħ, as an order-1 function.
pub fn semiclassical_bracket<F>(f: &QFunction, g: &QFunction, product: F) -> Result<PWFunction, QueError>
where
    F: Fn(&QFunction, &QFunction) -> Result<QFunction, QueError>,
{
    let c = product(f, g)?.sub(&product(g, f)?);
    if c.order < 2 {
        return Err(QueError::NotDeformation);
    }
    if !c.hbar_coeff(0).is_zero() {
        return Err(QueError::NotDeformation);
    }
    Ok(c.hbar_coeff(1))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uq() -> Uq {
        Uq::new(3, DEFAULT_DEGREE_BOUND)
    }

    #[test]
    fn ef_relation() {
        let u = uq();
        let one = Series::constant(3, Q::one());
        let ef = u.normalize(&[(one.clone(), vec![Gen::E, Gen::F])]).unwrap();
        let fe = u.normalize(&[(one.clone(), vec![Gen::F, Gen::E])]).unwrap();
        assert_eq!(ef.sub(&fe), u.qint_h());
        // [H]_q = H + ħ²(H³ − H)/24 + …
        let qh = u.qint_h();
        assert_eq!(qh.terms[&(0, 1, 0)].coeff(0), q(1));
        assert_eq!(qh.terms[&(0, 3, 0)].coeff(2), qf(1, 24));
        let he = u.normalize(&[(one.clone(), vec![Gen::H, Gen::E]), (-&one, vec![Gen::E, Gen::H])]).unwrap();
        assert_eq!(he, u.gen(Gen::E).scale(&Series::constant(3, q(2))));
    }

    #[test]
    fn associativity_of_normal_form() {
        let u = uq();
        let monos = [(1, 0, 1), (0, 1, 2), (2, 1, 0), (1, 1, 1)];
        for x in monos {
            for y in monos {
                for z in monos {
                    let ex = |m: Mono| UqElement::monomial(3, m, Series::constant(3, Q::one()));
                    let a = u.mul(&u.mul(&ex(x), &ex(y)).unwrap(), &ex(z)).unwrap();
                    let b = u.mul(&ex(x), &u.mul(&ex(y), &ex(z)).unwrap()).unwrap();
                    assert_eq!(a, b);
                }
            }
        }
    }

    #[test]
    fn r_matrix_axioms() {
        let u = uq();
        let r = u.r_matrix_sl2().unwrap();
        let rinv = u.tinv(&r).unwrap();
        for g in [Gen::E, Gen::F, Gen::H] {
            assert!(u.almost_cocommutativity_residual(&r, &rinv, &u.gen(g)).unwrap().is_zero(), "{g:?}");
        }
        let (a, b) = u.hexagon_residuals(&r).unwrap();
        assert!(a.is_zero());
        assert!(b.is_zero());
    }

    #[test]
    fn qirrep_relations() {
        let u = uq();
        for n in 0..4 {
            assert!(qirrep_build(n, 3).check_relations(&u));
        }
    }
}
