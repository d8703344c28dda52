//! Strongly coisotropic Hopf subalgebras of U_ħ(sl2)^{⊗m}, their characters
//! and character monoid, semi-invariant gradings, and quantum sections.
//!
//! Everything is decided inside a window: per-leg PBW degree ≤ d and ħ-order
//! < K. Subspaces are ℚ-spans in coordinates (leg monomials, ħ-power), so a
//! ℚ[[ħ]]-module is represented by all of its ħ-shifts.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_traits::{One, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::cgx::PWFunction;
use crate::kernel::{Series, Q};
use crate::linalg::{kernel_basis, sv_add_scaled, Echelon, SMatrix, SparseVec};
use crate::que::{ActSide, Gen, Mono, QFunction, QFunctionAlgebra, QueError, Uq, UqTensor};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CoisoError {
    #[error(transparent)]
    Que(#[from] QueError),
    #[error("window exhausted: {0}")]
    Window(String),
    #[error("not strongly coisotropic: {0}")]
    NotStronglyCoisotropic(String),
    #[error("inconsistent character: {0}")]
    BadCharacter(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
}

/// Three-valued answer of a windowed membership question.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum Verdict {
    True,
    False { witness: String },
    Inconclusive { reason: String },
}

impl Verdict {
    pub fn is_true(&self) -> bool {
        matches!(self, Verdict::True)
    }

    pub fn is_false(&self) -> bool {
        matches!(self, Verdict::False { .. })
    }

    pub fn is_inconclusive(&self) -> bool {
        matches!(self, Verdict::Inconclusive { .. })
    }

    /// False wins over inconclusive, which wins over true.
    pub fn and(self, other: Verdict) -> Verdict {
        match (self, other) {
            (f @ Verdict::False { .. }, _) | (_, f @ Verdict::False { .. }) => f,
            (i @ Verdict::Inconclusive { .. }, _) | (_, i @ Verdict::Inconclusive { .. }) => i,
            _ => Verdict::True,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoisoSide {
    /// Δ(U) ⊂ U⊗U + H⊗[U,U]
    Right,
    /// Δ(U) ⊂ U⊗U + [U,U]⊗H
    Left,
}

/// Column order used by the echelon forms; changing it changes the chosen
/// complements but never the answers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PivotOrder {
    Forward,
    Reverse,
}

/// Coordinates for blocks of `legs` legs: mixed radix in the monomial
/// exponents, then the ħ-power.
#[derive(Clone, Copy, Debug)]
struct Coder {
    radix: usize,
    order: usize,
    legs: usize,
    reverse: bool,
}

impl Coder {
    fn block(&self, legs: &[Mono]) -> usize {
        let r = self.radix;
        let mut c = 0usize;
        for m in legs {
            c = ((c * r + m.0) * r + m.1) * r + m.2;
        }
        if self.reverse {
            r.pow(3 * self.legs as u32) - 1 - c
        } else {
            c
        }
    }

    fn key(&self, legs: &[Mono], j: usize) -> usize {
        self.block(legs) * self.order + j
    }

    /// ħ^shift · t
    fn vector(&self, t: &UqTensor, shift: usize) -> SparseVec {
        let mut v = SparseVec::new();
        for (k, c) in &t.terms {
            for j in 0..self.order.saturating_sub(shift) {
                let x = c.coeff(j);
                if !x.is_zero() {
                    v.insert(self.key(k, j + shift), x);
                }
            }
        }
        v
    }
}

fn swap_blocks(x: &UqTensor, m: usize) -> UqTensor {
    let perm: Vec<usize> = (0..2 * m).map(|i| if i < m { i + m } else { i - m }).collect();
    x.permute(&perm)
}

/// Terms grouped by the first m legs.
fn split_first(x: &UqTensor, m: usize) -> BTreeMap<Vec<Mono>, UqTensor> {
    let mut g: BTreeMap<Vec<Mono>, UqTensor> = BTreeMap::new();
    for (k, c) in &x.terms {
        g.entry(k[..m].to_vec()).or_insert_with(|| UqTensor::zero(x.arity - m, x.order)).add_term(k[m..].to_vec(), c);
    }
    g
}

/// The subalgebra of U_ħ(sl2)^{⊗m} generated by a list of elements, cut to
/// per-leg PBW degree ≤ `degree`.
pub struct HopfSubalgebra {
    pub uq: Arc<Uq>,
    pub m: usize,
    pub labels: Vec<String>,
    pub gens: Vec<UqTensor>,
    pub degree: usize,
    /// independent word products: (word in generator indices, value)
    pub elems: Vec<(Vec<usize>, UqTensor)>,
    /// word products that were already in the span
    pub relations: Vec<(Vec<usize>, UqTensor)>,
    /// words whose product left the window
    pub exceeded: Vec<Vec<usize>>,
    coder: Coder,
    /// U_K over ℚ, all ħ-shifts inserted
    span: Echelon,
    /// insertion index -> (element, ħ-shift)
    tags: Vec<(usize, usize)>,
    /// U mod ħ, in ħ⁰ coordinates
    span0: Echelon,
}

impl HopfSubalgebra {
    pub fn new(
        uq: Arc<Uq>,
        m: usize,
        gens: Vec<(String, UqTensor)>,
        degree: usize,
        pivots: PivotOrder,
    ) -> Result<Self, CoisoError> {
        if degree > uq.degree_bound {
            return Err(CoisoError::Window(format!("degree {degree} exceeds the PBW bound {}", uq.degree_bound)));
        }
        if let Some((_, g)) = gens.iter().find(|(_, g)| g.arity != m) {
            return Err(QueError::Arity(g.arity, m).into());
        }
        let coder =
            Coder { radix: uq.degree_bound + 1, order: uq.order, legs: m, reverse: pivots == PivotOrder::Reverse };
        let (labels, gens): (Vec<String>, Vec<UqTensor>) = gens.into_iter().unzip();
        let mut u = HopfSubalgebra {
            m,
            labels,
            gens,
            degree,
            elems: Vec::new(),
            relations: Vec::new(),
            exceeded: Vec::new(),
            coder,
            span: Echelon::new(),
            tags: Vec::new(),
            span0: Echelon::new(),
            uq,
        };
        let one = UqTensor::one(m, u.uq.order);
        u.push(Vec::new(), one);
        let mut frontier = 0;
        while frontier < u.elems.len() {
            let (word, x) = u.elems[frontier].clone();
            frontier += 1;
            for gi in 0..u.gens.len() {
                let mut w = word.clone();
                w.push(gi);
                let p = match u.uq.tmul(&x, &u.gens[gi]) {
                    Ok(p) => p,
                    Err(QueError::DegreeBound { .. }) => {
                        u.exceeded.push(w);
                        continue;
                    }
                    Err(e) => return Err(e.into()),
                };
                if p.max_degree() > degree {
                    u.exceeded.push(w);
                } else if u.span.contains(&u.coder.vector(&p, 0)) {
                    u.relations.push((w, p));
                } else {
                    u.push(w, p);
                }
            }
        }
        for row in u.span.basis() {
            let v0: SparseVec = row.into_iter().filter(|(k, _)| k % u.coder.order == 0).collect();
            if !v0.is_empty() {
                u.span0.insert(&v0);
            }
        }
        Ok(u)
    }

    fn push(&mut self, word: Vec<usize>, x: UqTensor) {
        let idx = self.elems.len();
        for j in 0..self.uq.order {
            self.span.insert(&self.coder.vector(&x, j));
            self.tags.push((idx, j));
        }
        self.elems.push((word, x));
    }

    /// U_ħ(sl2) subalgebra generated by some of H, E, F.
    pub fn sl2(uq: Arc<Uq>, gens: &[Gen], degree: usize) -> Result<Self, CoisoError> {
        Self::power(uq, gens, 1, degree, PivotOrder::Forward)
    }

    /// U^{⊗m} for U generated by some of H, E, F: generators g placed on
    /// each leg.
    pub fn power(uq: Arc<Uq>, gens: &[Gen], m: usize, degree: usize, pivots: PivotOrder) -> Result<Self, CoisoError> {
        let mut list = Vec::new();
        for l in 0..m {
            for g in gens {
                let t = uq.gen(*g).to_tensor().embed(&[l], m);
                let name = format!("{g:?}");
                list.push((if m == 1 { name } else { format!("{name}_{}", l + 1) }, t));
            }
        }
        Self::new(uq, m, list, degree, pivots)
    }

    pub fn order(&self) -> usize {
        self.uq.order
    }

    /// ℚ-dimension of the window (all ħ-shifts counted).
    pub fn dim(&self) -> usize {
        self.span.rank()
    }

    /// Dimension of the window modulo ħ.
    pub fn dim0(&self) -> usize {
        self.span0.rank()
    }

    /// The window is U₀ ⊗ ℚ[ħ]/ħ^K for a ℚ-subspace U₀ (needed to move all
    /// ħ-powers onto one tensor factor).
    pub fn defined_over_q(&self) -> bool {
        self.span.rank() == self.order() * self.span0.rank() && self.span0.basis().iter().all(|b| self.span.contains(b))
    }

    pub fn contains(&self, t: &UqTensor) -> bool {
        t.arity == self.m && self.span.contains(&self.coder.vector(t, 0))
    }

    pub fn word_label(&self, word: &[usize]) -> String {
        if word.is_empty() {
            "1".into()
        } else {
            word.iter().map(|&g| self.labels[g].as_str()).collect::<Vec<_>>().join("·")
        }
    }

    fn word_value(&self, zeta: &Character, word: &[usize]) -> Series {
        let mut v = Series::constant(self.order(), Q::one());
        for &g in word {
            v = &v * &zeta.values[g];
        }
        v
    }

    /// ζ on a window vector; None when the vector is outside the window.
    fn value_of_vector(&self, zeta: &Character, v: &SparseVec) -> Option<Series> {
        let comb = self.span.express(v)?;
        let mut out = Series::zero(self.order());
        for (idx, c) in comb {
            let (e, j) = self.tags[idx];
            let w = self.word_value(zeta, &self.elems[e].0).shift(j);
            out += &w.scale(&c);
        }
        Some(out)
    }

    /// ζ(x) for x in the window.
    pub fn character_value(&self, zeta: &Character, x: &UqTensor) -> Option<Series> {
        self.value_of_vector(zeta, &self.coder.vector(x, 0))
    }
}

/// Window of the two-sided ideal [U,U] generated by the commutators.
pub struct Ideal {
    pub elems: Vec<UqTensor>,
    pub exceeded: usize,
    coder: Coder,
    span: Echelon,
}

impl Ideal {
    pub fn dim(&self) -> usize {
        self.span.rank()
    }

    pub fn is_zero(&self) -> bool {
        self.span.rank() == 0
    }

    pub fn contains(&self, x: &UqTensor) -> bool {
        self.span.contains(&self.coder.vector(x, 0))
    }
}

/// Commutators of generators, closed under one-sided multiplication by
/// generators inside the degree window.
pub fn ideal_commutator(u: &HopfSubalgebra) -> Result<Ideal, CoisoError> {
    let mut id = Ideal { elems: Vec::new(), exceeded: 0, coder: u.coder, span: Echelon::new() };
    let mut queue = Vec::new();
    let add = |id: &mut Ideal, queue: &mut Vec<UqTensor>, x: UqTensor| -> Result<(), CoisoError> {
        if x.is_zero() {
            return Ok(());
        }
        if x.max_degree() > u.degree {
            id.exceeded += 1;
            return Ok(());
        }
        if id.span.contains(&u.coder.vector(&x, 0)) {
            return Ok(());
        }
        if !u.contains(&x) {
            return Err(CoisoError::Window("an ideal element escaped the subalgebra window".into()));
        }
        for j in 0..u.order() {
            id.span.insert(&u.coder.vector(&x, j));
        }
        id.elems.push(x.clone());
        queue.push(x);
        Ok(())
    };
    for i in 0..u.gens.len() {
        for j in i + 1..u.gens.len() {
            let c = match (u.uq.tmul(&u.gens[i], &u.gens[j]), u.uq.tmul(&u.gens[j], &u.gens[i])) {
                (Ok(a), Ok(b)) => a.sub(&b),
                _ => {
                    id.exceeded += 1;
                    continue;
                }
            };
            add(&mut id, &mut queue, c)?;
        }
    }
    while let Some(x) = queue.pop() {
        for g in &u.gens {
            for p in [u.uq.tmul(g, &x), u.uq.tmul(&x, g)] {
                match p {
                    Ok(p) => add(&mut id, &mut queue, p)?,
                    Err(QueError::DegreeBound { .. }) => id.exceeded += 1,
                    Err(e) => return Err(e.into()),
                }
            }
        }
    }
    Ok(id)
}

/// Is x ∈ U⊗U + H⊗[U,U] (right) or U⊗U + [U,U]⊗H (left)? x has two blocks
/// of m legs.
///
/// Moving every ħ onto the second factor identifies the test space with
/// U₀⊗U_K + H₀⊗I_K over ℚ, and x lies in it iff (1⊗q_U)x = 0 and
/// (q_{U₀}⊗q_I)x = 0 for the quotient maps q.
pub fn membership(u: &HopfSubalgebra, ideal: &Ideal, x: &UqTensor, side: CoisoSide) -> Result<Verdict, CoisoError> {
    if x.arity != 2 * u.m {
        return Err(QueError::Arity(x.arity, 2 * u.m).into());
    }
    if !u.defined_over_q() {
        return Ok(Verdict::Inconclusive { reason: "subalgebra window is not spanned by ħ-constant elements".into() });
    }
    let x = match side {
        CoisoSide::Right => x.clone(),
        CoisoSide::Left => swap_blocks(x, u.m),
    };
    if x.max_degree() > u.degree {
        return Ok(Verdict::Inconclusive {
            reason: format!("element has PBW degree {} beyond the window {}", x.max_degree(), u.degree),
        });
    }
    let mut columns: BTreeMap<usize, SparseVec> = BTreeMap::new();
    for (first, y) in split_first(&x, u.m) {
        let v = u.coder.vector(&y, 0);
        if !u.span.contains(&v) {
            return Ok(Verdict::False { witness: format!("component {first:?} ⊗ (·) leaves H⊗U") });
        }
        let key = u.coder.key(&first, 0);
        for (c, a) in ideal.span.reduce(&v) {
            columns.entry(c).or_default().insert(key, a);
        }
    }
    for col in columns.values() {
        if !u.span0.contains(col) {
            return Ok(Verdict::False {
                witness: "component outside U⊗U + H⊗[U,U] after quotienting [U,U]".into()
            });
        }
    }
    Ok(Verdict::True)
}

/// (φ⊗ψ)(Δ̃_U x) for x ∈ U⊗U + H⊗[U,U]: project the first factor onto U₀
/// along the echelon complement, then pair.
fn reduced_pairing(u: &HopfSubalgebra, x: &UqTensor, phi: &Character, psi: &Character) -> Result<Series, CoisoError> {
    let mut columns: BTreeMap<usize, SparseVec> = BTreeMap::new();
    for (first, y) in split_first(x, u.m) {
        let key = u.coder.key(&first, 0);
        for (c, a) in u.coder.vector(&y, 0) {
            columns.entry(c).or_default().insert(key, a);
        }
    }
    let pivots = u.span0.pivots();
    let basis = u.span0.basis();
    let mut ys: Vec<SparseVec> = vec![SparseVec::new(); pivots.len()];
    for (c, col) in &columns {
        let mut proj = col.clone();
        sv_add_scaled(&mut proj, &u.span0.reduce(col), &-Q::one());
        for (i, p) in pivots.iter().enumerate() {
            if let Some(a) = proj.get(p) {
                ys[i].insert(*c, a.clone());
            }
        }
    }
    let mut out = Series::zero(u.order());
    for (b, y) in basis.iter().zip(&ys) {
        if y.is_empty() {
            continue;
        }
        let fb =
            u.value_of_vector(phi, b).ok_or_else(|| CoisoError::Window("U₀ basis vector outside the window".into()))?;
        let gy = u
            .value_of_vector(psi, y)
            .ok_or_else(|| CoisoError::NotStronglyCoisotropic("second factor outside U".into()))?;
        out += &(&fb * &gy);
    }
    Ok(out)
}

/// Result of a strong coisotropy check with its window.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CoisoCheck {
    pub verdict: Verdict,
    pub checked: usize,
    pub window: usize,
}

/// Δ(u) for every window element of degree ≤ source_degree.
pub fn strong_coiso_hopf(
    u: &HopfSubalgebra,
    ideal: &Ideal,
    side: CoisoSide,
    delta: &dyn Fn(&UqTensor) -> Result<UqTensor, QueError>,
    source_degree: usize,
) -> Result<CoisoCheck, CoisoError> {
    let mut verdict = Verdict::True;
    let mut checked = 0;
    for (word, x) in &u.elems {
        if x.max_degree() > source_degree {
            continue;
        }
        checked += 1;
        let d = match delta(x) {
            Ok(d) => d,
            Err(QueError::DegreeBound { .. }) => {
                verdict = verdict
                    .and(Verdict::Inconclusive { reason: format!("Δ({}) exceeds the PBW bound", u.word_label(word)) });
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        match membership(u, ideal, &d, side)? {
            Verdict::False { witness } => {
                return Ok(CoisoCheck {
                    verdict: Verdict::False { witness: format!("Δ({}): {witness}", u.word_label(word)) },
                    checked,
                    window: u.degree,
                })
            }
            v => verdict = verdict.and(v),
        }
    }
    Ok(CoisoCheck { verdict, checked, window: u.degree })
}

/// R ∈ U⊗U + H⊗[U,U].
pub fn r_membership_hopf(u: &HopfSubalgebra, ideal: &Ideal, r: &UqTensor) -> Result<Verdict, CoisoError> {
    membership(u, ideal, r, CoisoSide::Right)
}

/// Builds windows large enough for the tensors being tested; a negative
/// answer is confirmed on a window two degrees larger before it is reported.
pub struct WindowedChecker {
    pub uq: Arc<Uq>,
    pub m: usize,
    pub gens: Vec<(String, UqTensor)>,
    pub pivots: PivotOrder,
}

impl WindowedChecker {
    pub fn sl2_power(uq: Arc<Uq>, gens: &[Gen], m: usize) -> Result<Self, CoisoError> {
        let u = HopfSubalgebra::power(uq.clone(), gens, m, 0, PivotOrder::Forward)?;
        Ok(WindowedChecker { uq, m, gens: u.labels.into_iter().zip(u.gens).collect(), pivots: PivotOrder::Forward })
    }

    fn decide<F>(&self, need: usize, f: F) -> Result<(Verdict, usize), CoisoError>
    where
        F: Fn(&HopfSubalgebra, &Ideal) -> Result<Verdict, CoisoError>,
    {
        let mut last = Verdict::Inconclusive { reason: "no window fits the PBW bound".into() };
        let mut window = need;
        for d in [need, need + 2] {
            if d > self.uq.degree_bound {
                break;
            }
            window = d;
            let u = HopfSubalgebra::new(self.uq.clone(), self.m, self.gens.clone(), d, self.pivots)?;
            let id = ideal_commutator(&u)?;
            last = f(&u, &id)?;
            if !last.is_false() {
                return Ok((last, d));
            }
        }
        if last.is_false() && window == need {
            // could not confirm on a larger window
            last = Verdict::Inconclusive { reason: format!("negative at degree {need} but no larger window fits") };
        }
        Ok((last, window))
    }

    pub fn strong_coiso(
        &self,
        side: CoisoSide,
        delta: &dyn Fn(&UqTensor) -> Result<UqTensor, QueError>,
        source_degree: usize,
    ) -> Result<CoisoCheck, CoisoError> {
        let small = HopfSubalgebra::new(self.uq.clone(), self.m, self.gens.clone(), source_degree, self.pivots)?;
        let mut need = source_degree;
        for (_, x) in &small.elems {
            match delta(x) {
                Ok(d) => need = need.max(d.max_degree()),
                Err(QueError::DegreeBound { .. }) => need = self.uq.degree_bound + 1,
                Err(e) => return Err(e.into()),
            }
        }
        let checked = std::cell::Cell::new(0);
        let (verdict, window) = self.decide(need, |u, id| {
            let c = strong_coiso_hopf(u, id, side, delta, source_degree)?;
            checked.set(c.checked);
            Ok(c.verdict)
        })?;
        Ok(CoisoCheck { verdict, checked: checked.get(), window })
    }

    pub fn r_membership(&self, r: &UqTensor) -> Result<(Verdict, usize), CoisoError> {
        self.decide(r.max_degree(), |u, id| r_membership_hopf(u, id, r))
    }
}

/// A character stored by its values on the generators.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Character {
    pub values: Vec<Series>,
}

impl Character {
    /// The counit ε.
    pub fn counit(u: &HopfSubalgebra) -> Character {
        Character { values: u.gens.iter().map(|g| g.scalar_part()).collect() }
    }

    /// ζ_λ: the character by which U acts on the right on highest-weight
    /// coefficients c_{ξ,v_λ}. With c·y = c_{ξ,S(y)v} this is H_l ↦ −λ_l,
    /// E, F ↦ 0.
    pub fn highest_weight(u: &HopfSubalgebra, lambda: &[i64]) -> Result<Character, CoisoError> {
        if lambda.len() != u.m {
            return Err(CoisoError::Precondition(format!("need {} weights", u.m)));
        }
        let ctx = u.uq.ctx();
        let values = u
            .gens
            .iter()
            .map(|g| {
                let mut v = ctx.zero();
                for (k, c) in &g.terms {
                    let mut x = c.clone();
                    for (l, &(a, b, e)) in k.iter().enumerate() {
                        if a != 0 || e != 0 {
                            x = ctx.zero();
                            break;
                        }
                        x = x.scale(&Q::from_integer((-lambda[l]).pow(b as u32).into()));
                    }
                    v += &x;
                }
                v
            })
            .collect();
        Ok(Character { values })
    }

    /// Multiplicative on every word product of the window and zero on the
    /// [U,U] window.
    pub fn validate(&self, u: &HopfSubalgebra, ideal: &Ideal) -> Result<(), CoisoError> {
        if self.values.len() != u.gens.len() {
            return Err(CoisoError::BadCharacter("wrong number of generator values".into()));
        }
        for (word, p) in u.relations.iter().chain(u.elems.iter()) {
            let v = u.character_value(self, p).ok_or_else(|| CoisoError::Window("word outside the window".into()))?;
            if v != u.word_value(self, word) {
                return Err(CoisoError::BadCharacter(format!("not multiplicative on {}", u.word_label(word))));
            }
        }
        for x in &ideal.elems {
            let v = u
                .character_value(self, x)
                .ok_or_else(|| CoisoError::Window("ideal element outside the window".into()))?;
            if !v.is_zero() {
                return Err(CoisoError::BadCharacter("does not vanish on [U,U]".into()));
            }
        }
        Ok(())
    }

    pub fn to_strings(&self) -> Vec<Vec<String>> {
        self.values.iter().map(|v| v.to_strings()).collect()
    }
}

/// Ch(U) with (φψ)(u) = (φ⊗ψ)(Δ̃_U u).
pub struct CharacterMonoid<'a> {
    pub u: &'a HopfSubalgebra,
    deltas: Vec<UqTensor>,
}

impl<'a> CharacterMonoid<'a> {
    /// Requires U right strongly coisotropic on its generators; since
    /// U⊗U + H⊗[U,U] is a subalgebra this covers all of U.
    pub fn new(
        u: &'a HopfSubalgebra,
        ideal: &Ideal,
        delta: &dyn Fn(&UqTensor) -> Result<UqTensor, QueError>,
    ) -> Result<Self, CoisoError> {
        let mut deltas = Vec::new();
        for (i, g) in u.gens.iter().enumerate() {
            let d = delta(g)?;
            match membership(u, ideal, &d, CoisoSide::Right)? {
                Verdict::True => deltas.push(d),
                Verdict::False { witness } => {
                    return Err(CoisoError::NotStronglyCoisotropic(format!("Δ({}): {witness}", u.labels[i])))
                }
                Verdict::Inconclusive { reason } => return Err(CoisoError::Window(reason)),
            }
        }
        Ok(CharacterMonoid { u, deltas })
    }

    pub fn unit(&self) -> Character {
        Character::counit(self.u)
    }

    pub fn product(&self, phi: &Character, psi: &Character) -> Result<Character, CoisoError> {
        let values = self.deltas.iter().map(|d| reduced_pairing(self.u, d, phi, psi)).collect::<Result<Vec<_>, _>>()?;
        Ok(Character { values })
    }

    pub fn power(&self, zeta: &Character, n: usize) -> Result<Character, CoisoError> {
        let mut out = self.unit();
        for _ in 0..n {
            out = self.product(&out, zeta)?;
        }
        Ok(out)
    }
}

/// All Peter–Weyl entries of ℂ_ħ[SL2]^{⊗m} with every weight ≤ a bound.
#[derive(Clone, Debug)]
pub struct FunctionWindow {
    pub m: usize,
    pub order: usize,
    pub weight_bound: i64,
    pub entries: Vec<(Vec<Vec<i64>>, Vec<usize>)>,
    index: BTreeMap<(Vec<Vec<i64>>, Vec<usize>), usize>,
}

impl FunctionWindow {
    pub fn sl2(m: usize, order: usize, weight_bound: i64) -> Self {
        let mut entries = Vec::new();
        let mut weights: Vec<Vec<i64>> = vec![Vec::new()];
        for _ in 0..m {
            weights = weights
                .into_iter()
                .flat_map(|w| (0..=weight_bound).map(move |n| [w.clone(), vec![n]].concat()))
                .collect();
        }
        for w in weights {
            let mut idxs: Vec<Vec<usize>> = vec![Vec::new()];
            for &n in &w {
                let d = (n + 1) as usize;
                idxs = idxs
                    .into_iter()
                    .flat_map(|i| (0..d * d).map(move |k| [i.clone(), vec![k / d, k % d]].concat()))
                    .collect();
            }
            for i in idxs {
                entries.push((w.iter().map(|&n| vec![n]).collect(), i));
            }
        }
        let index = entries.iter().cloned().enumerate().map(|(i, e)| (e, i)).collect();
        FunctionWindow { m, order, weight_bound, entries, index }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn basis_function(&self, k: usize) -> QFunction {
        let (w, idx) = &self.entries[k];
        let mut f = PWFunction::zero(self.m, self.order);
        f.add_entry(w.clone(), idx.clone(), Series::constant(self.order, Q::one()));
        f
    }

    fn from_coords(&self, x: &[Series]) -> QFunction {
        let mut f = PWFunction::zero(self.m, self.order);
        for (k, c) in x.iter().enumerate() {
            let (w, idx) = &self.entries[k];
            f.add_entry(w.clone(), idx.clone(), c.clone());
        }
        f
    }

    /// ħ^shift · f in (entry, ħ-power) coordinates; None outside the window.
    fn vector(&self, f: &QFunction, shift: usize) -> Option<SparseVec> {
        let mut v = SparseVec::new();
        for (w, b) in &f.blocks {
            for (idx, c) in b {
                let k = *self.index.get(&(w.clone(), idx.clone()))?;
                for j in 0..self.order.saturating_sub(shift) {
                    let x = c.coeff(j);
                    if !x.is_zero() {
                        v.insert(k * self.order + j + shift, x);
                    }
                }
            }
        }
        Some(v)
    }

    /// ℚ[[ħ]]-span of some functions as a ℚ-echelon form.
    pub fn span(&self, fs: &[QFunction]) -> Option<Echelon> {
        let mut e = Echelon::new();
        for f in fs {
            for j in 0..self.order {
                e.insert(&self.vector(f, j)?);
            }
        }
        Some(e)
    }

    pub fn same_span(&self, a: &[QFunction], b: &[QFunction]) -> bool {
        match (self.span(a), self.span(b)) {
            (Some(x), Some(y)) => x.basis() == y.basis(),
            _ => false,
        }
    }

    /// Membership of f in the span; None when f leaves the window.
    pub fn in_span(&self, span: &Echelon, f: &QFunction) -> Option<bool> {
        Some(span.contains(&self.vector(f, 0)?))
    }
}

/// Solve M x = 0 for the columns given by `images(k)`, the image of the k-th
/// window basis function, collected into rows keyed by `R`.
fn solve_window<R: Ord + Clone>(
    window: &FunctionWindow,
    images: impl Fn(usize) -> Result<Vec<(R, Series)>, CoisoError>,
) -> Result<Vec<QFunction>, CoisoError> {
    let n = window.len();
    let mut rows: BTreeMap<R, Vec<Series>> = BTreeMap::new();
    for k in 0..n {
        for (r, c) in images(k)? {
            let row = rows.entry(r).or_insert_with(|| vec![Series::zero(window.order); n]);
            row[k] += &c;
        }
    }
    let m: SMatrix = rows.into_values().filter(|r| r.iter().any(|x| !x.is_zero())).collect();
    let ker = kernel_basis(&m, n, window.order).map_err(|e| CoisoError::Window(format!("eigenspace solve: {e}")))?;
    Ok(ker.iter().map(|x| window.from_coords(x)).collect())
}

fn function_entries(f: &QFunction) -> Vec<((Vec<Vec<i64>>, Vec<usize>), Series)> {
    f.blocks.iter().flat_map(|(w, b)| b.iter().map(move |(i, c)| ((w.clone(), i.clone()), c.clone()))).collect()
}

/// A^ζ = {f : f·u = ζ(u)f} on the window, for the right action
/// c_{ξ,v}·y = c_{ξ,S(y)v}. Solved on the generators, then verified on every
/// element of the subalgebra window.
pub fn semi_invariants(
    qa: &QFunctionAlgebra,
    u: &HopfSubalgebra,
    zeta: &Character,
    window: &FunctionWindow,
) -> Result<Vec<QFunction>, CoisoError> {
    if window.m != u.m {
        return Err(QueError::Arity(window.m, u.m).into());
    }
    let sol = solve_window(window, |k| {
        let e = window.basis_function(k);
        let mut out = Vec::new();
        for (gi, g) in u.gens.iter().enumerate() {
            let img = qa.act(g, &e, ActSide::Right)?.sub(&e.scale(&zeta.values[gi]));
            out.extend(function_entries(&img).into_iter().map(|(key, c)| ((gi, key), c)));
        }
        Ok(out)
    })?;
    for f in &sol {
        for (word, x) in &u.elems {
            let lhs = qa.act(x, f, ActSide::Right)?;
            if lhs != f.scale(&u.word_value(zeta, word)) {
                return Err(CoisoError::BadCharacter(format!("eigen-equation fails on {}", u.word_label(word))));
            }
        }
    }
    Ok(sol)
}

/// Semi-invariant subspaces for a list of characters.
#[derive(Clone, Debug, Default)]
pub struct GradedSemiInvariants {
    pub entries: Vec<(Character, Vec<QFunction>)>,
}

impl GradedSemiInvariants {
    pub fn compute(
        qa: &QFunctionAlgebra,
        u: &HopfSubalgebra,
        chars: &[Character],
        window: &FunctionWindow,
    ) -> Result<Self, CoisoError> {
        use rayon::prelude::*;
        let entries = chars
            .par_iter()
            .map(|z| semi_invariants(qa, u, z, window).map(|fs| (z.clone(), fs)))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(GradedSemiInvariants { entries })
    }

    pub fn get(&self, zeta: &Character) -> Option<&[QFunction]> {
        self.entries.iter().find(|(z, _)| z == zeta).map(|(_, fs)| fs.as_slice())
    }

    /// A^{ζ₁}·A^{ζ₂} ⊂ A^{ζ₁ζ₂} for every pair whose product character is
    /// listed; products leaving the window are inconclusive.
    pub fn closure(
        &self,
        monoid: &CharacterMonoid<'_>,
        window: &FunctionWindow,
        product: &(dyn Fn(&QFunction, &QFunction) -> Result<QFunction, QueError> + Sync),
    ) -> Result<Verdict, CoisoError> {
        let mut verdict = Verdict::True;
        for (z1, a) in &self.entries {
            for (z2, b) in &self.entries {
                let z = monoid.product(z1, z2)?;
                let Some(target) = self.get(&z) else { continue };
                let span =
                    window.span(target).ok_or_else(|| CoisoError::Window("semi-invariant outside window".into()))?;
                for f in a {
                    for g in b {
                        let p = product(f, g)?;
                        match window.in_span(&span, &p) {
                            Some(true) => {}
                            Some(false) => {
                                return Ok(Verdict::False {
                                    witness: "a product leaves the product character's space".into(),
                                })
                            }
                            None => {
                                verdict = verdict
                                    .and(Verdict::Inconclusive { reason: "product leaves the weight window".into() })
                            }
                        }
                    }
                }
            }
        }
        Ok(verdict)
    }
}

/// Δ(c_{ξ,v}) = Σ_i c_{ε^i,v} ⊗ c_{ξ,e_i}, dual to the product of U_ħ
/// under f(x) = ⟨ξ, S(x)v⟩.
pub fn function_coproduct(qa: &QFunctionAlgebra, f: &QFunction) -> Result<Vec<(QFunction, QFunction)>, CoisoError> {
    if f.m != 1 {
        return Err(QueError::NotSingleFactor.into());
    }
    let mut out = Vec::new();
    for (w, b) in &f.blocks {
        let dim = (w[0][0] + 1) as usize;
        for (idx, c) in b {
            let (a, v) = (idx[0], idx[1]);
            for i in 0..dim {
                let alpha = qa.coefficient(w[0][0], i, v)?;
                let beta = qa.coefficient(w[0][0], a, i)?.scale(c);
                out.push((alpha, beta));
            }
        }
    }
    Ok(out)
}

/// (p⊗1)(Σ α⊗β) evaluated at x: Σ α(x) β.
fn pair_first(qa: &QFunctionAlgebra, pairs: &[(QFunction, QFunction)], x: &UqTensor) -> Result<QFunction, CoisoError> {
    let mut out = PWFunction::zero(1, qa.order());
    for (a, b) in pairs {
        let s = qa.evaluate(a, x)?;
        if !s.is_zero() {
            out.add_scaled(b, &s);
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SectionCheck {
    pub prequantum: Verdict,
    pub graded: Verdict,
    /// p(d) on the generators of U
    pub character: Vec<Vec<String>>,
    /// dim of ℋ^d_n (over ℚ[[ħ]]) for n = 0..=max_n
    pub graded_dims: Vec<usize>,
}

fn block_weight(f: &QFunction) -> Option<i64> {
    if f.m != 1 || f.blocks.len() != 1 {
        return None;
    }
    f.blocks.keys().next().map(|w| w[0][0])
}

/// Prequantum: Δ(d) ∈ d⊗d + ker(p)⊗ℋ. Graded: ℋ^d_n = ℋ^{p(d)ⁿ} for
/// n ≤ max_n, where ℋ^d_n = {l : Δ(l) ∈ dⁿ⊗l + ker(p)⊗ℋ}, and the pieces
/// multiply into each other. ker(p) is the annihilator of the U-window.
pub fn quantum_section_check(
    qa: &QFunctionAlgebra,
    u: &HopfSubalgebra,
    ideal: &Ideal,
    d: &QFunction,
    max_n: usize,
) -> Result<SectionCheck, CoisoError> {
    let wd = block_weight(d)
        .ok_or_else(|| CoisoError::Precondition("d must be a single-block function on one factor".into()))?;
    if u.m != 1 {
        return Err(CoisoError::Precondition("sections live on one factor".into()));
    }
    let top = wd * max_n as i64;
    let mut out = SectionCheck {
        prequantum: Verdict::True,
        graded: Verdict::True,
        character: Vec::new(),
        graded_dims: Vec::new(),
    };
    // a function on V(n)-blocks is determined by its values on H^b E^c, F^a H^b
    // with b, c ≤ n; the window must reach them
    if (u.degree as i64) < 2 * top {
        let reason = format!("subalgebra window {} too small for weight {}", u.degree, top);
        out.prequantum = Verdict::Inconclusive { reason: reason.clone() };
        out.graded = Verdict::Inconclusive { reason };
        return Ok(out);
    }
    let plain = |t: &UqTensor| u.uq.coproduct_block(t, 1, 0);
    let left = strong_coiso_hopf(u, ideal, CoisoSide::Left, &plain, 1)?;
    if !left.verdict.is_true() {
        return Err(CoisoError::Precondition(format!("U is not left strongly coisotropic: {:?}", left.verdict)));
    }

    let zeta = Character { values: u.gens.iter().map(|g| qa.evaluate(d, g)).collect::<Result<Vec<_>, _>>()? };
    out.character = zeta.to_strings();

    let pairs = function_coproduct(qa, d)?;
    for (word, x) in &u.elems {
        let lhs = pair_first(qa, &pairs, x)?.sub(&d.scale(&qa.evaluate(d, x)?));
        if !lhs.is_zero() {
            out.prequantum =
                Verdict::False { witness: format!("(p⊗1)(Δ(d) − d⊗d) ≠ 0 at {}", u.word_label(word)) };
            break;
        }
    }

    if let Err(e) = zeta.validate(u, ideal) {
        out.graded = Verdict::False { witness: format!("p(d) is not a character: {e}") };
        return Ok(out);
    }
    let monoid = CharacterMonoid::new(u, ideal, &plain)?;
    let window = FunctionWindow::sl2(1, qa.order(), top);
    let mut dn = qa.one(1);
    let mut pieces: Vec<Vec<QFunction>> = Vec::new();
    for n in 0..=max_n {
        if n > 0 {
            dn = qa.q_multiply(&dn, d)?;
        }
        let zn = monoid.power(&zeta, n)?;
        for (gi, g) in u.gens.iter().enumerate() {
            if qa.evaluate(&dn, g)? != zn.values[gi] {
                out.graded = Verdict::False { witness: format!("p(d^{n}) ≠ p(d)^{n} on {}", u.labels[gi]) };
                return Ok(out);
            }
        }
        let by_definition = solve_window(&window, |k| {
            let e = window.basis_function(k);
            let ce = function_coproduct(qa, &e)?;
            let mut rows = Vec::new();
            for (xi, (_, x)) in u.elems.iter().enumerate() {
                let img = pair_first(qa, &ce, x)?.sub(&e.scale(&qa.evaluate(&dn, x)?));
                rows.extend(function_entries(&img).into_iter().map(|(key, c)| ((xi, key), c)));
            }
            Ok(rows)
        })?;
        let by_character = semi_invariants(qa, u, &zn, &window)?;
        if !window.same_span(&by_definition, &by_character) {
            out.graded = Verdict::False { witness: format!("ℋ^d_{n} differs from ℋ^(p(d)^{n})") };
            return Ok(out);
        }
        out.graded_dims.push(by_definition.len());
        pieces.push(by_definition);
    }
    for a in 0..=max_n {
        for b in 0..=max_n - a {
            let span = window.span(&pieces[a + b]).expect("window");
            for f in &pieces[a] {
                for g in &pieces[b] {
                    if window.in_span(&span, &qa.q_multiply(f, g)?) != Some(true) {
                        out.graded = Verdict::False { witness: format!("ℋ^d_{a}·ℋ^d_{b} ⊄ ℋ^d_{}", a + b) };
                        return Ok(out);
                    }
                }
            }
        }
    }
    Ok(out)
}
