//! Function algebras on G^m in Peter–Weyl form: irreducible representations,
//! Clebsch–Gordan decompositions, matrix coefficients, invariant vector fields
//! and Poisson brackets.
//!
//! A function is stored blockwise: for each tuple of highest weights λ̲ the
//! block holds coefficients C with f = Σ C[a][b] c_{ε^a, e_b} factorwise,
//! where c_{ξ,v}(u) = ξ(S(u)·v). Products follow (fg)(u) = f(u₁)g(u₂), so
//! c^V_{ξ,v} c^W_{ρ,w} = c^{W⊗V}_{ρ⊗ξ, w⊗v}. The same engine serves the
//! quantized algebras (see `que`), with coefficients in the truncated series
//! ring; classical functions use truncation order 1.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::sync::{Arc, RwLock};

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::{parse_q, q, Ctx, Series, Q};
use crate::liebialg::{mix_tensor, standard_r, twisted_r, LieAlgebra, LieTensor, QMat};
use crate::linalg::{inverse, kernel_basis, Echelon, LinalgError, SparseVec};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CgError {
    #[error("dim V({weight:?}) = {dim} exceeds the bound {bound}")]
    DimensionBound { weight: Vec<i64>, dim: usize, bound: usize },
    #[error("no highest-weight vector of weight {0:?}")]
    NoHighestWeight(Vec<i64>),
    #[error("representation check failed: {0}")]
    Relations(String),
    #[error("decomposition is singular (truncation order too low or broken module)")]
    Singular,
    #[error("factor count mismatch: {0} vs {1}")]
    FactorMismatch(usize, usize),
    #[error("weight {0:?} is not dominant for this algebra")]
    BadWeight(Vec<i64>),
    #[error("input is not semi-invariant (v-slot off the highest-weight vector)")]
    NotSemiInvariant,
    #[error("operation needs the classical algebra")]
    NeedsClassical,
    #[error("parse error: {0}")]
    Parse(String),
}

impl From<LinalgError> for CgError {
    fn from(_: LinalgError) -> Self {
        CgError::Singular
    }
}

/// Sparse matrix with series entries, (row, col) -> entry.
pub type SpMat = BTreeMap<(usize, usize), Series>;
pub type SpVec = BTreeMap<usize, Series>;

pub fn spmat_apply(m: &SpMat, v: &SpVec) -> SpVec {
    let mut out = SpVec::new();
    for (&(r, c), x) in m {
        if let Some(y) = v.get(&c) {
            let t = x * y;
            let e = out.entry(r).or_insert_with(|| Series::zero(t.order()));
            *e += &t;
        }
    }
    out.retain(|_, x| !x.is_zero());
    out
}

pub fn qmat_to_series(m: &QMat, order: usize) -> SpMat {
    m.iter().map(|(k, x)| (*k, Series::constant(order, x.clone()))).collect()
}

/// Weyl dimension formula for type A_{n-1} in fundamental-weight coordinates.
pub fn weyl_dim_a(w: &[i64]) -> usize {
    let n = w.len() + 1;
    let mut num = Q::one();
    for i in 0..n {
        for j in i + 1..n {
            let s: i64 = w[i..j].iter().sum();
            num *= q(s + (j - i) as i64) / q((j - i) as i64);
        }
    }
    num.to_integer().to_string().parse().expect("dimension fits")
}

/// Classical irreducible representation with exact rational action matrices.
#[derive(Clone, Debug)]
pub struct Irrep {
    pub highest: Vec<i64>,
    pub dim: usize,
    pub weights: Vec<Vec<i64>>,
    /// lowering word (simple indices, first applied first) giving each basis vector
    pub words: Vec<Vec<usize>>,
    /// action of every basis element of g
    pub action: Vec<QMat>,
}

struct Leg {
    dim: usize,
    mats: Vec<QMat>,
    weights: Vec<Vec<i64>>,
}

fn perm_sign(v: &mut [usize]) -> i64 {
    let mut sign = 1;
    for i in 0..v.len() {
        for j in 0..v.len() - 1 - i {
            if v[j] > v[j + 1] {
                v.swap(j, j + 1);
                sign = -sign;
            }
        }
    }
    sign
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// ∧^k of the defining representation.
fn wedge_leg(g: &LieAlgebra, k: usize) -> Leg {
    let rd = g.roots.as_ref().expect("root data");
    let n = rd.defining_dim;
    let subs = subsets(n, k);
    let pos: HashMap<Vec<usize>, usize> = subs.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
    let mut mats = Vec::new();
    for d in &rd.defining {
        let mut m = QMat::new();
        for (c, s) in subs.iter().enumerate() {
            for p in 0..k {
                for (&(t, col), val) in d {
                    if col != s[p] || (t != s[p] && s.contains(&t)) {
                        continue;
                    }
                    let mut s2 = s.clone();
                    s2[p] = t;
                    let sign = perm_sign(&mut s2);
                    let e = m.entry((pos[&s2], c)).or_insert_with(Q::zero);
                    *e += val * q(sign);
                }
            }
        }
        m.retain(|_, v| !v.is_zero());
        mats.push(m);
    }
    let weights = subs
        .iter()
        .map(|s| (0..rd.rank).map(|i| s.contains(&i) as i64 - s.contains(&(i + 1)) as i64).collect())
        .collect();
    Leg { dim: subs.len(), mats, weights }
}

struct Ambient {
    legs: Vec<Leg>,
    rank: usize,
}

impl Ambient {
    fn dim(&self) -> usize {
        self.legs.iter().map(|l| l.dim).product()
    }
    fn decode(&self, mut idx: usize) -> Vec<usize> {
        let mut d = vec![0; self.legs.len()];
        for (slot, leg) in d.iter_mut().zip(&self.legs).rev() {
            *slot = idx % leg.dim;
            idx /= leg.dim;
        }
        d
    }
    fn encode(&self, d: &[usize]) -> usize {
        d.iter().zip(&self.legs).fold(0, |acc, (x, l)| acc * l.dim + x)
    }
    fn weight(&self, idx: usize) -> Vec<i64> {
        let mut w = vec![0; self.rank];
        for (x, leg) in self.decode(idx).iter().zip(&self.legs) {
            for (a, b) in w.iter_mut().zip(&leg.weights[*x]) {
                *a += b;
            }
        }
        w
    }
    fn apply(&self, x: usize, v: &SparseVec) -> SparseVec {
        let mut out = SparseVec::new();
        for (idx, c) in v {
            let d = self.decode(*idx);
            for (l, leg) in self.legs.iter().enumerate() {
                for (&(r, col), val) in &leg.mats[x] {
                    if col != d[l] {
                        continue;
                    }
                    let mut d2 = d.clone();
                    d2[l] = r;
                    let e = out.entry(self.encode(&d2)).or_insert_with(Q::zero);
                    *e += c * val;
                }
            }
        }
        out.retain(|_, v| !v.is_zero());
        out
    }
}

/// Build V(λ) inside ⊗_k (∧^k ℂ^n)^{⊗λ_k}: solve for the highest-weight vector,
/// then generate the module with lowering operators.
pub fn irrep_build(g: &LieAlgebra, lambda: &[i64], bound: usize) -> Result<Irrep, CgError> {
    let rd = g.roots.as_ref().ok_or(CgError::NeedsClassical)?;
    if lambda.len() != rd.rank || lambda.iter().any(|&x| x < 0) {
        return Err(CgError::BadWeight(lambda.to_vec()));
    }
    let expected = weyl_dim_a(lambda);
    if expected > bound {
        return Err(CgError::DimensionBound { weight: lambda.to_vec(), dim: expected, bound });
    }
    let mut legs = Vec::new();
    for (k, &mult) in lambda.iter().enumerate() {
        for _ in 0..mult {
            legs.push(wedge_leg(g, k + 1));
        }
    }
    let amb = Ambient { legs, rank: rd.rank };
    let top: Vec<usize> = (0..amb.dim()).filter(|&i| amb.weight(i) == lambda).collect();
    // E_i restricted to the weight-λ space
    let mut rows: BTreeMap<usize, Vec<Series>> = BTreeMap::new();
    for (c, &idx) in top.iter().enumerate() {
        for i in 0..rd.rank {
            let img = amb.apply(rd.simple_e(i), &[(idx, Q::one())].into_iter().collect());
            for (r, x) in img {
                let row = rows.entry(r * rd.rank + i).or_insert_with(|| vec![Series::zero(1); top.len()]);
                row[c] = Series::constant(1, x);
            }
        }
    }
    let mat: Vec<Vec<Series>> = rows.into_values().collect();
    let ker = kernel_basis(&mat, top.len(), 1)?;
    let hw = ker.first().ok_or_else(|| CgError::NoHighestWeight(lambda.to_vec()))?;
    let hw: SparseVec =
        hw.iter().enumerate().filter(|(_, s)| !s.is_zero()).map(|(c, s)| (top[c], s.c0().clone())).collect();

    let mut basis = vec![hw];
    let mut words: Vec<Vec<usize>> = vec![vec![]];
    let mut weights = vec![lambda.to_vec()];
    let mut all = Echelon::new();
    all.insert(&basis[0]);
    let mut per_weight: BTreeMap<Vec<i64>, Echelon> = BTreeMap::new();
    per_weight.entry(lambda.to_vec()).or_default().insert(&basis[0]);
    let mut queue = VecDeque::from([0usize]);
    while let Some(k) = queue.pop_front() {
        for i in 0..rd.rank {
            let y = amb.apply(rd.simple_f(i), &basis[k]);
            if y.is_empty() {
                continue;
            }
            let mut w = weights[k].clone();
            for (j, a) in w.iter_mut().enumerate() {
                *a -= rd.cartan[i][j];
            }
            let ech = per_weight.entry(w.clone()).or_default();
            if ech.insert(&y) {
                all.insert(&y);
                let mut word = words[k].clone();
                word.push(i);
                basis.push(y);
                words.push(word);
                weights.push(w);
                queue.push_back(basis.len() - 1);
                if basis.len() > bound {
                    return Err(CgError::DimensionBound { weight: lambda.to_vec(), dim: basis.len(), bound });
                }
            }
        }
    }
    if basis.len() != expected {
        return Err(CgError::Relations(format!("built dim {} but Weyl dimension is {expected}", basis.len())));
    }
    let mut action = Vec::with_capacity(g.dim());
    for x in 0..g.dim() {
        let mut m = QMat::new();
        for (k, b) in basis.iter().enumerate() {
            let y = amb.apply(x, b);
            let coords =
                all.express(&y).ok_or_else(|| CgError::Relations(format!("{} leaves the submodule", g.labels[x])))?;
            for (r, c) in coords {
                m.insert((r, k), c);
            }
        }
        action.push(m);
    }
    let irr = Irrep { highest: lambda.to_vec(), dim: basis.len(), weights, words, action };
    irr.check_relations(g)?;
    Ok(irr)
}

impl Irrep {
    pub fn check_relations(&self, g: &LieAlgebra) -> Result<(), CgError> {
        let n = g.dim();
        for i in 0..n {
            for j in 0..n {
                let lhs = crate::liebialg::qmat_commutator(&self.action[i], &self.action[j]);
                let mut rhs = QMat::new();
                for (k, c) in g.bracket_basis(i, j) {
                    for (pos, v) in &self.action[*k] {
                        let e = rhs.entry(*pos).or_insert_with(Q::zero);
                        *e += c * v;
                    }
                }
                rhs.retain(|_, v| !v.is_zero());
                if lhs != rhs {
                    return Err(CgError::Relations(format!("[{}, {}]", g.labels[i], g.labels[j])));
                }
            }
        }
        Ok(())
    }

    /// Action matrix of an arbitrary element of g.
    pub fn matrix_of(&self, x: &SparseVec) -> QMat {
        let mut m = QMat::new();
        for (i, c) in x {
            for (pos, v) in &self.action[*i] {
                let e = m.entry(*pos).or_insert_with(Q::zero);
                *e += c * v;
            }
        }
        m.retain(|_, v| !v.is_zero());
        m
    }
}

/// Representation data as used by the function-algebra engine.
#[derive(Clone, Debug)]
pub struct RepData {
    pub highest: Vec<i64>,
    pub dim: usize,
    pub weights: Vec<Vec<i64>>,
    pub words: Vec<Vec<usize>>,
    pub e: Vec<SpMat>,
    pub f: Vec<SpMat>,
    pub classical: Option<Arc<Irrep>>,
}

impl RepData {
    pub fn from_irrep(g: &LieAlgebra, irr: Arc<Irrep>, order: usize) -> Self {
        let rd = g.roots.as_ref().expect("root data");
        RepData {
            highest: irr.highest.clone(),
            dim: irr.dim,
            weights: irr.weights.clone(),
            words: irr.words.clone(),
            e: (0..rd.rank).map(|i| qmat_to_series(&irr.action[rd.simple_e(i)], order)).collect(),
            f: (0..rd.rank).map(|i| qmat_to_series(&irr.action[rd.simple_f(i)], order)).collect(),
            classical: Some(irr),
        }
    }
}

/// One summand V(ν) ⊂ W⊗V with intertwiners.
#[derive(Clone, Debug)]
pub struct CgSummand {
    pub weight: Vec<i64>,
    pub dim: usize,
    /// W⊗V-index × summand-index
    pub inj: SpMat,
    /// summand-index × W⊗V-index
    pub proj: SpMat,
}

#[derive(Clone, Debug)]
pub struct CgEntry {
    pub left: Vec<i64>,
    pub right: Vec<i64>,
    pub summands: Vec<CgSummand>,
    /// for each W⊗V index p: (summand, α, ι[p][α])
    inj_rows: Vec<Vec<(usize, usize, Series)>>,
    /// for each W⊗V index q: (summand, β, π[β][q])
    proj_cols: Vec<Vec<(usize, usize, Series)>>,
}

impl CgEntry {
    /// Projection onto the top summand ν = λ+μ (the Cartan component).
    pub fn cartan_component(&self) -> &CgSummand {
        &self.summands[0]
    }
}

/// Which coproduct acts on tensor products.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Flavor {
    Classical,
    /// U_ħ(sl2) with Δ(E) = E⊗K^{-1/2} + K^{1/2}⊗E, K^{1/2} = e^{ħH/4}
    Quantum,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
}

/// Block coefficients: index (ξ₁, v₁, …, ξ_m, v_m) -> coefficient.
pub type Block = BTreeMap<Vec<usize>, Series>;

/// Element of ℂ[G^m] (or its quantization) in Peter–Weyl form.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PWFunction {
    pub m: usize,
    pub order: usize,
    pub blocks: BTreeMap<Vec<Vec<i64>>, Block>,
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq, Eq)]
pub struct EntryJson {
    pub index: Vec<usize>,
    pub coeff: Vec<String>,
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq, Eq)]
pub struct BlockJson {
    pub weights: Vec<Vec<i64>>,
    pub entries: Vec<EntryJson>,
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq, Eq)]
pub struct FunctionJson {
    pub m: usize,
    pub order: usize,
    pub blocks: Vec<BlockJson>,
}

impl PWFunction {
    pub fn zero(m: usize, order: usize) -> Self {
        PWFunction { m, order, blocks: BTreeMap::new() }
    }

    pub fn one(m: usize, order: usize, rank: usize) -> Self {
        let mut f = Self::zero(m, order);
        f.add_entry(vec![vec![0; rank]; m], vec![0; 2 * m], Series::constant(order, Q::one()));
        f
    }

    pub fn is_zero(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn add_entry(&mut self, w: Vec<Vec<i64>>, idx: Vec<usize>, c: Series) {
        if c.is_zero() {
            return;
        }
        let b = self.blocks.entry(w.clone()).or_default();
        let e = b.entry(idx.clone()).or_insert_with(|| Series::zero(c.order()));
        *e += &c;
        if e.is_zero() {
            b.remove(&idx);
            if b.is_empty() {
                self.blocks.remove(&w);
            }
        }
    }

    pub fn add_scaled(&mut self, other: &PWFunction, c: &Series) {
        assert_eq!(self.m, other.m, "factor count mismatch");
        for (w, b) in &other.blocks {
            for (idx, x) in b {
                self.add_entry(w.clone(), idx.clone(), x * c);
            }
        }
    }

    pub fn add(&self, other: &PWFunction) -> PWFunction {
        let mut f = self.clone();
        f.add_scaled(other, &Series::constant(self.order, Q::one()));
        f
    }

    pub fn sub(&self, other: &PWFunction) -> PWFunction {
        let mut f = self.clone();
        f.add_scaled(other, &Series::constant(self.order, -Q::one()));
        f
    }

    pub fn scale(&self, c: &Series) -> PWFunction {
        let mut f = Self::zero(self.m, self.order);
        f.add_scaled(self, c);
        f
    }

    pub fn scale_q(&self, c: &Q) -> PWFunction {
        self.scale(&Series::constant(self.order, c.clone()))
    }

    /// Outer tensor product: factors of self followed by factors of other.
    pub fn outer(&self, other: &PWFunction) -> PWFunction {
        let mut f = Self::zero(self.m + other.m, self.order);
        for (w1, b1) in &self.blocks {
            for (w2, b2) in &other.blocks {
                let mut w = w1.clone();
                w.extend(w2.iter().cloned());
                for (i1, x1) in b1 {
                    for (i2, x2) in b2 {
                        let mut idx = i1.clone();
                        idx.extend_from_slice(i2);
                        f.add_entry(w.clone(), idx, x1 * x2);
                    }
                }
            }
        }
        f
    }

    pub fn weights(&self) -> Vec<Vec<Vec<i64>>> {
        self.blocks.keys().cloned().collect()
    }

    /// Every v-slot sits on the highest-weight vector.
    pub fn is_semi_invariant(&self) -> bool {
        self.blocks.values().all(|b| b.keys().all(|idx| idx.iter().skip(1).step_by(2).all(|&v| v == 0)))
    }

    /// Drop ħ-terms of degree ≥ k.
    pub fn truncate(&self, k: usize) -> PWFunction {
        let mut f = Self::zero(self.m, k);
        for (w, b) in &self.blocks {
            for (idx, x) in b {
                f.add_entry(w.clone(), idx.clone(), x.truncate(k));
            }
        }
        f
    }

    /// Coefficient of ħ^j as an order-1 function.
    pub fn hbar_coeff(&self, j: usize) -> PWFunction {
        let mut f = Self::zero(self.m, 1);
        for (w, b) in &self.blocks {
            for (idx, x) in b {
                f.add_entry(w.clone(), idx.clone(), Series::constant(1, x.coeff(j)));
            }
        }
        f
    }

    /// Divide by ħ^j; errors if lower terms are present.
    pub fn unshift(&self, j: usize) -> Option<PWFunction> {
        let mut f = Self::zero(self.m, self.order);
        for (w, b) in &self.blocks {
            for (idx, x) in b {
                if x.valuation().is_some_and(|v| v < j) {
                    return None;
                }
                f.add_entry(w.clone(), idx.clone(), x.unshift(j));
            }
        }
        Some(f)
    }

    pub fn to_json(&self) -> FunctionJson {
        FunctionJson {
            m: self.m,
            order: self.order,
            blocks: self
                .blocks
                .iter()
                .map(|(w, b)| BlockJson {
                    weights: w.clone(),
                    entries: b.iter().map(|(i, x)| EntryJson { index: i.clone(), coeff: x.to_strings() }).collect(),
                })
                .collect(),
        }
    }

    pub fn from_json(j: &FunctionJson) -> Result<PWFunction, CgError> {
        let mut f = Self::zero(j.m, j.order);
        for b in &j.blocks {
            if b.weights.len() != j.m {
                return Err(CgError::FactorMismatch(b.weights.len(), j.m));
            }
            for e in &b.entries {
                let cs = e.coeff.iter().map(|s| parse_q(s).ok_or_else(|| CgError::Parse(s.clone()))).collect::<Result<
                    Vec<_>,
                    _,
                >>(
                )?;
                f.add_entry(b.weights.clone(), e.index.clone(), Ctx::new(j.order).from_coeffs(&cs));
            }
        }
        Ok(f)
    }
}

/// A first-order operator on one factor: x^L or x^R with x ∈ g.
#[derive(Clone, Debug)]
pub struct Field {
    pub factor: usize,
    pub x: SparseVec,
    pub side: Side,
    pub coeff: Q,
}

/// Σ c·A⊗B applied as {f,g} = Σ c (A f)(B g).
#[derive(Clone, Debug, Default)]
pub struct Bivector {
    pub terms: Vec<(Field, Field)>,
}

/// The Poisson structures on functions.
#[derive(Clone, Debug)]
pub enum BracketSpec {
    /// {,}_{r}^{(m)} = (r^(m))^L − (r^(m))^R on ℂ[G^m]
    Twisted { m: usize },
    /// {,}^{(m)} = (π^(1))^m − ρ^(m)(Mix^m(r̃)) on ℂ[N\G]^⊗m
    Mixed { m: usize },
    /// r^L − r^R for an arbitrary r on g^m
    Custom { m: usize, r: LieTensor },
}

impl BracketSpec {
    pub fn m(&self) -> usize {
        match self {
            BracketSpec::Twisted { m } | BracketSpec::Mixed { m } | BracketSpec::Custom { m, .. } => *m,
        }
    }
}

/// Representations, CG tables and products for one flavor and truncation order.
/// The caches are read-mostly; population takes the write lock briefly.
pub struct FunctionAlgebra {
    pub g: Arc<LieAlgebra>,
    pub flavor: Flavor,
    pub order: usize,
    pub dim_bound: usize,
    reps: RwLock<HashMap<Vec<i64>, Arc<RepData>>>,
    cg: RwLock<HashMap<(Vec<i64>, Vec<i64>), Arc<CgEntry>>>,
}

pub const DEFAULT_DIM_BOUND: usize = 64;

impl FunctionAlgebra {
    pub fn classical(g: Arc<LieAlgebra>) -> Self {
        Self::new(g, Flavor::Classical, 1, DEFAULT_DIM_BOUND)
    }

    pub fn new(g: Arc<LieAlgebra>, flavor: Flavor, order: usize, dim_bound: usize) -> Self {
        FunctionAlgebra {
            g,
            flavor,
            order,
            dim_bound,
            reps: RwLock::new(HashMap::new()),
            cg: RwLock::new(HashMap::new()),
        }
    }

    pub fn rank(&self) -> usize {
        self.g.roots.as_ref().map(|r| r.rank).unwrap_or(1)
    }

    pub fn ctx(&self) -> Ctx {
        Ctx::new(self.order)
    }

    pub fn rep(&self, w: &[i64]) -> Result<Arc<RepData>, CgError> {
        if let Some(r) = self.reps.read().expect("lock").get(w) {
            return Ok(r.clone());
        }
        let built = match self.flavor {
            Flavor::Classical => {
                let irr = irrep_build(&self.g, w, self.dim_bound)?;
                RepData::from_irrep(&self.g, Arc::new(irr), self.order)
            }
            Flavor::Quantum => {
                if w.len() != 1 || w[0] < 0 {
                    return Err(CgError::BadWeight(w.to_vec()));
                }
                if (w[0] + 1) as usize > self.dim_bound {
                    return Err(CgError::DimensionBound {
                        weight: w.to_vec(),
                        dim: (w[0] + 1) as usize,
                        bound: self.dim_bound,
                    });
                }
                crate::que::qirrep_build(w[0], self.order).data
            }
        };
        let arc = Arc::new(built);
        self.reps.write().expect("lock").entry(w.to_vec()).or_insert_with(|| arc.clone());
        Ok(arc)
    }

    pub fn irrep(&self, w: &[i64]) -> Result<Arc<Irrep>, CgError> {
        self.rep(w)?.classical.clone().ok_or(CgError::NeedsClassical)
    }

    /// E_i or F_i on W⊗V via the coproduct of this flavor.
    fn tensor_op(&self, w: &RepData, v: &RepData, i: usize, raise: bool) -> SpMat {
        let (mw, mv) = if raise { (&w.e[i], &v.e[i]) } else { (&w.f[i], &v.f[i]) };
        let nv = v.dim;
        let ctx = self.ctx();
        let mut out = SpMat::new();
        let mut add = |r: usize, c: usize, x: Series| {
            let e = out.entry((r, c)).or_insert_with(|| Series::zero(x.order()));
            *e += &x;
        };
        for (&(r, c), x) in mw {
            for b in 0..nv {
                let k = match self.flavor {
                    Flavor::Classical => x.clone(),
                    Flavor::Quantum => x * &ctx.exp_hbar(&Q::new((-v.weights[b][0]).into(), 4.into())),
                };
                add(r * nv + b, c * nv + b, k);
            }
        }
        for (&(r, c), x) in mv {
            for a in 0..w.dim {
                let k = match self.flavor {
                    Flavor::Classical => x.clone(),
                    Flavor::Quantum => x * &ctx.exp_hbar(&Q::new(w.weights[a][0].into(), 4.into())),
                };
                add(a * nv + r, a * nv + c, k);
            }
        }
        out.retain(|_, x| !x.is_zero());
        out
    }

    /// Decompose V(left)⊗V(right) into irreducibles.
    pub fn cg(&self, left: &[i64], right: &[i64]) -> Result<Arc<CgEntry>, CgError> {
        let key = (left.to_vec(), right.to_vec());
        if let Some(e) = self.cg.read().expect("lock").get(&key) {
            return Ok(e.clone());
        }
        let entry = Arc::new(self.cg_compute(left, right)?);
        self.cg.write().expect("lock").entry(key).or_insert_with(|| entry.clone());
        Ok(entry)
    }

    fn cg_compute(&self, left: &[i64], right: &[i64]) -> Result<CgEntry, CgError> {
        let w = self.rep(left)?;
        let v = self.rep(right)?;
        let rank = self.rank();
        let n = w.dim * v.dim;
        let order = self.order;
        let weights: Vec<Vec<i64>> = (0..n)
            .map(|p| w.weights[p / v.dim].iter().zip(&v.weights[p % v.dim]).map(|(a, b)| a + b).collect())
            .collect();
        let es: Vec<SpMat> = (0..rank).map(|i| self.tensor_op(&w, &v, i, true)).collect();
        let fs: Vec<SpMat> = (0..rank).map(|i| self.tensor_op(&w, &v, i, false)).collect();
        let mut dominant: Vec<Vec<i64>> = weights
            .iter()
            .filter(|x| x.iter().all(|&a| a >= 0))
            .cloned()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        dominant.sort_by(|a, b| {
            let sa: i64 = a.iter().sum();
            let sb: i64 = b.iter().sum();
            sb.cmp(&sa).then(b.cmp(a))
        });
        let mut summands = Vec::new();
        let mut columns: Vec<SpVec> = Vec::new();
        for nu in dominant {
            let space: Vec<usize> = (0..n).filter(|&p| weights[p] == nu).collect();
            let mut rows2: BTreeMap<(usize, usize), Vec<Series>> = BTreeMap::new();
            for (i, e) in es.iter().enumerate() {
                for (&(r, col), x) in e {
                    if let Ok(c) = space.binary_search(&col) {
                        let row = rows2.entry((r, i)).or_insert_with(|| vec![Series::zero(order); space.len()]);
                        row[c] = x.clone();
                    }
                }
            }
            let mat: Vec<Vec<Series>> = rows2.into_values().collect();
            let ker = kernel_basis(&mat, space.len(), order)?;
            let target = self.rep(&nu)?;
            for x in ker {
                let hw: SpVec =
                    x.into_iter().enumerate().filter(|(_, s)| !s.is_zero()).map(|(c, s)| (space[c], s)).collect();
                let mut inj = SpMat::new();
                for (a, word) in target.words.iter().enumerate() {
                    let mut y = hw.clone();
                    for &i in word {
                        y = spmat_apply(&fs[i], &y);
                    }
                    for (p, s) in &y {
                        inj.insert((*p, a), s.clone());
                    }
                    columns.push(y);
                }
                summands.push(CgSummand { weight: nu.clone(), dim: target.dim, inj, proj: SpMat::new() });
            }
        }
        if columns.len() != n {
            return Err(CgError::Singular);
        }
        let b: Vec<Vec<Series>> = (0..n)
            .map(|p| columns.iter().map(|col| col.get(&p).cloned().unwrap_or_else(|| Series::zero(order))).collect())
            .collect();
        let binv = inverse(&b, order)?;
        let mut offset = 0;
        for s in summands.iter_mut() {
            for a in 0..s.dim {
                for (qq, x) in binv[offset + a].iter().enumerate() {
                    if !x.is_zero() {
                        s.proj.insert((a, qq), x.clone());
                    }
                }
            }
            offset += s.dim;
        }
        let mut inj_rows = vec![Vec::new(); n];
        let mut proj_cols = vec![Vec::new(); n];
        for (k, s) in summands.iter().enumerate() {
            for (&(p, a), x) in &s.inj {
                inj_rows[p].push((k, a, x.clone()));
            }
            for (&(b, qq), x) in &s.proj {
                proj_cols[qq].push((k, b, x.clone()));
            }
        }
        Ok(CgEntry { left: left.to_vec(), right: right.to_vec(), summands, inj_rows, proj_cols })
    }

    /// c^{V(λ)}_{ξ,v} for coordinate vectors ξ (dual basis) and v.
    pub fn matrix_coefficient(&self, w: &[i64], xi: &[Series], v: &[Series]) -> Result<PWFunction, CgError> {
        let r = self.rep(w)?;
        if xi.len() != r.dim || v.len() != r.dim {
            return Err(CgError::BadWeight(w.to_vec()));
        }
        let mut f = PWFunction::zero(1, self.order);
        for (a, x) in xi.iter().enumerate() {
            for (b, y) in v.iter().enumerate() {
                f.add_entry(vec![w.to_vec()], vec![a, b], x * y);
            }
        }
        Ok(f)
    }

    /// c_{ε^a, e_b} in V(λ).
    pub fn coefficient(&self, w: &[i64], a: usize, b: usize) -> Result<PWFunction, CgError> {
        let r = self.rep(w)?;
        if a >= r.dim || b >= r.dim {
            return Err(CgError::BadWeight(w.to_vec()));
        }
        let mut f = PWFunction::zero(1, self.order);
        f.add_entry(vec![w.to_vec()], vec![a, b], Series::constant(self.order, Q::one()));
        Ok(f)
    }

    /// Φ_ϖ(ε^a) = c^{V(−w₀ϖ)}_{ε^a, v} with v the highest-weight basis vector.
    pub fn phi(&self, varpi: &[i64], a: usize) -> Result<PWFunction, CgError> {
        let dual = match &self.g.roots {
            Some(rd) => rd.dual_weight(varpi),
            None => varpi.to_vec(),
        };
        self.coefficient(&dual, a, 0)
    }

    pub fn one(&self, m: usize) -> PWFunction {
        PWFunction::one(m, self.order, self.rank())
    }

    /// Place a one-factor function into factor j of m.
    pub fn embed(&self, f: &PWFunction, j: usize, m: usize) -> PWFunction {
        assert_eq!(f.m, 1);
        let mut out = if j > 0 { self.one(j) } else { PWFunction::zero(0, self.order) };
        out = if j > 0 { out.outer(f) } else { f.clone() };
        if m > j + 1 {
            out = out.outer(&self.one(m - j - 1));
        }
        out
    }

    /// Pointwise product, decomposed back into Peter–Weyl blocks.
    pub fn multiply(&self, f: &PWFunction, g: &PWFunction) -> Result<PWFunction, CgError> {
        if f.m != g.m {
            return Err(CgError::FactorMismatch(f.m, g.m));
        }
        let m = f.m;
        let mut out = PWFunction::zero(m, self.order);
        for (wf, bf) in &f.blocks {
            for (wg, bg) in &g.blocks {
                let cgs = (0..m).map(|j| self.cg(&wg[j], &wf[j])).collect::<Result<Vec<_>, _>>()?;
                let dims_f = (0..m).map(|j| self.rep(&wf[j]).map(|r| r.dim)).collect::<Result<Vec<_>, _>>()?;
                // combined coefficients indexed by (p_j, q_j) in W_j⊗V_j
                let mut cur: BTreeMap<Vec<usize>, Series> = BTreeMap::new();
                for (i_f, x) in bf {
                    for (i_g, y) in bg {
                        let mut idx = Vec::with_capacity(2 * m);
                        for j in 0..m {
                            idx.push(i_g[2 * j] * dims_f[j] + i_f[2 * j]);
                            idx.push(i_g[2 * j + 1] * dims_f[j] + i_f[2 * j + 1]);
                        }
                        let t = x * y;
                        let e = cur.entry(idx).or_insert_with(|| Series::zero(self.order));
                        *e += &t;
                    }
                }
                cur.retain(|_, x| !x.is_zero());
                // decompose factor by factor; the summand choice is kept in `ks`
                let mut stage: BTreeMap<(Vec<usize>, Vec<usize>), Series> =
                    cur.into_iter().map(|(k, v)| ((Vec::new(), k), v)).collect();
                for (j, cg) in cgs.iter().enumerate() {
                    let mut next: BTreeMap<(Vec<usize>, Vec<usize>), Series> = BTreeMap::new();
                    for ((ks, idx), x) in &stage {
                        let (p, qq) = (idx[2 * j], idx[2 * j + 1]);
                        for (k1, a, iv) in &cg.inj_rows[p] {
                            let xa = x * iv;
                            for (k2, b, pv) in &cg.proj_cols[qq] {
                                if k1 != k2 {
                                    continue;
                                }
                                let mut ks2 = ks.clone();
                                ks2.push(*k1);
                                let mut idx2 = idx.clone();
                                idx2[2 * j] = *a;
                                idx2[2 * j + 1] = *b;
                                let t = &xa * pv;
                                let e = next.entry((ks2, idx2)).or_insert_with(|| Series::zero(self.order));
                                *e += &t;
                            }
                        }
                    }
                    next.retain(|_, x| !x.is_zero());
                    stage = next;
                }
                for ((ks, idx), x) in stage {
                    let w: Vec<Vec<i64>> = ks.iter().zip(&cgs).map(|(k, cg)| cg.summands[*k].weight.clone()).collect();
                    out.add_entry(w, idx, x);
                }
            }
        }
        Ok(out)
    }

    /// x^L f(u) = f(ux) acts on the ξ-slot by the dual action, x^R f(u) = f(xu)
    /// acts on the v-slot by −x. `x` is indexed by the basis of g^m.
    pub fn invariant_action(&self, x: &SparseVec, f: &PWFunction, side: Side) -> Result<PWFunction, CgError> {
        let n = self.g.dim();
        let mut out = PWFunction::zero(f.m, self.order);
        let mut per_factor: BTreeMap<usize, SparseVec> = BTreeMap::new();
        for (i, c) in x {
            per_factor.entry(i / n).or_default().insert(i % n, c.clone());
        }
        for (j, xj) in per_factor {
            if j >= f.m {
                return Err(CgError::FactorMismatch(j + 1, f.m));
            }
            out = out.add(&self.field_apply(&Field { factor: j, x: xj, side, coeff: Q::one() }, f)?);
        }
        Ok(out)
    }

    pub fn field_apply(&self, fld: &Field, f: &PWFunction) -> Result<PWFunction, CgError> {
        let j = fld.factor;
        let mut out = PWFunction::zero(f.m, self.order);
        for (w, b) in &f.blocks {
            let irr = self.irrep(&w[j])?;
            let mat = irr.matrix_of(&fld.x);
            for (idx, c) in b {
                let (a, v) = (idx[2 * j], idx[2 * j + 1]);
                match fld.side {
                    // C'[c'][v] = −Σ_a C[a][v] ρ(x)[a][c']
                    Side::Left => {
                        for (&(_, c2), val) in mat.range((a, 0)..(a + 1, 0)) {
                            let mut idx2 = idx.clone();
                            idx2[2 * j] = c2;
                            out.add_entry(w.clone(), idx2, c.scale(&(-(val * &fld.coeff))));
                        }
                    }
                    // C'[a][d] = −Σ_v C[a][v] ρ(x)[d][v]
                    Side::Right => {
                        for (&(d, col), val) in &mat {
                            if col != v {
                                continue;
                            }
                            let mut idx2 = idx.clone();
                            idx2[2 * j + 1] = d;
                            out.add_entry(w.clone(), idx2, c.scale(&(-(val * &fld.coeff))));
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// Apply Σ c (A f)(B g).
    pub fn apply_bivector(&self, bv: &Bivector, f: &PWFunction, g: &PWFunction) -> Result<PWFunction, CgError> {
        let mut out = PWFunction::zero(f.m, self.order);
        // group by the first field so each A f is multiplied once
        let mut groups: BTreeMap<(usize, Side, Vec<(usize, Q)>), (Field, PWFunction)> = BTreeMap::new();
        for (a, b) in &bv.terms {
            let key = (a.factor, a.side, a.x.iter().map(|(i, c)| (*i, c.clone())).collect());
            let bg = self.field_apply(b, g)?.scale_q(&a.coeff);
            let slot = groups.entry(key).or_insert_with(|| {
                let mut a1 = a.clone();
                a1.coeff = Q::one();
                (a1, PWFunction::zero(g.m, self.order))
            });
            slot.1 = slot.1.add(&bg);
        }
        for (_, (a, bg)) in groups {
            if bg.is_zero() {
                continue;
            }
            let af = self.field_apply(&a, f)?;
            out = out.add(&self.multiply(&af, &bg)?);
        }
        Ok(out)
    }

    fn split_leg(&self, i: usize) -> (usize, SparseVec) {
        let n = self.g.dim();
        (i / n, [(i % n, Q::one())].into_iter().collect())
    }

    /// r^L − r^R for r on g^m.
    pub fn bivector_lr(&self, r: &LieTensor) -> Bivector {
        let mut bv = Bivector::default();
        for (k, c) in &r.terms {
            let (fa, xa) = self.split_leg(k[0]);
            let (fb, xb) = self.split_leg(k[1]);
            for (side, sign) in [(Side::Left, Q::one()), (Side::Right, -Q::one())] {
                bv.terms.push((
                    Field { factor: fa, x: xa.clone(), side, coeff: c * &sign },
                    Field { factor: fb, x: xb.clone(), side, coeff: Q::one() },
                ));
            }
        }
        bv
    }

    /// (π^(1))^m − ρ^(m)(Mix^m(r̃)) with ρ(y, x) = y^L − x^R on g ⊕ t.
    pub fn bivector_mixed(&self, m: usize) -> Result<Bivector, CgError> {
        let st = standard_r(&self.g).map_err(|_| CgError::NeedsClassical)?;
        let n = self.g.dim();
        let mut bv = Bivector::default();
        for k in 0..m {
            bv.terms.extend(self.bivector_lr(&st.lambda.shift(k * n)).terms);
        }
        let nt = st.g_tilde.dim();
        let mix = mix_tensor(&st.g_tilde, &st.r_tilde, m);
        let rho = |i: usize| -> Field {
            let (fac, local) = (i / nt, i % nt);
            if local < n {
                Field { factor: fac, x: [(local, Q::one())].into_iter().collect(), side: Side::Left, coeff: Q::one() }
            } else {
                let h = self.g.cartan_idx[local - n];
                Field { factor: fac, x: [(h, Q::one())].into_iter().collect(), side: Side::Right, coeff: -Q::one() }
            }
        };
        for (k, c) in &mix.terms {
            let mut a = rho(k[0]);
            let b = rho(k[1]);
            a.coeff = -(c * &a.coeff);
            bv.terms.push((a, b));
        }
        Ok(bv)
    }

    pub fn bivector(&self, spec: &BracketSpec) -> Result<Bivector, CgError> {
        match spec {
            BracketSpec::Twisted { m } => {
                let st = standard_r(&self.g).map_err(|_| CgError::NeedsClassical)?;
                Ok(self.bivector_lr(&twisted_r(&self.g, &st.r, *m)))
            }
            BracketSpec::Mixed { m } => self.bivector_mixed(*m),
            BracketSpec::Custom { r, .. } => Ok(self.bivector_lr(r)),
        }
    }

    pub fn classical_bracket(&self, f: &PWFunction, g: &PWFunction, spec: &BracketSpec) -> Result<PWFunction, CgError> {
        if self.flavor != Flavor::Classical {
            return Err(CgError::NeedsClassical);
        }
        if f.m != spec.m() || g.m != spec.m() {
            return Err(CgError::FactorMismatch(f.m, spec.m()));
        }
        if matches!(spec, BracketSpec::Mixed { .. }) && !(f.is_semi_invariant() && g.is_semi_invariant()) {
            return Err(CgError::NotSemiInvariant);
        }
        let bv = self.bivector(spec)?;
        self.apply_bivector(&bv, f, g)
    }

    /// p_{λ,μ}: projection of a vector of V(λ)⊗V(μ) (index a·dim μ + b)
    /// onto the Cartan component V(λ+μ).
    pub fn hw_projection(&self, left: &[i64], right: &[i64], x: &SpVec) -> Result<SpVec, CgError> {
        let cg = self.cg(left, right)?;
        Ok(spmat_apply(&cg.cartan_component().proj, x))
    }

    /// Pairing evaluator: f(u) for u = ⊗_j (x_{j,1} ⋯ x_{j,k_j}) ∈ U(g)^⊗m, a
    /// product of basis elements of g in each factor. Independent of CG data.
    pub fn evaluate(&self, f: &PWFunction, words: &[Vec<usize>]) -> Result<Q, CgError> {
        if words.len() != f.m {
            return Err(CgError::FactorMismatch(words.len(), f.m));
        }
        let mut total = Q::zero();
        for (w, b) in &f.blocks {
            // S(u) = (−1)^k x_k ⋯ x_1 acting on e_v, read off at ε^a
            let mut mats = Vec::new();
            for (j, word) in words.iter().enumerate() {
                let irr = self.irrep(&w[j])?;
                let mut m: QMat = (0..irr.dim).map(|i| ((i, i), Q::one())).collect();
                for &x in word {
                    m = crate::liebialg::qmat_mul(&irr.action[x], &m);
                }
                let sign = if word.len() % 2 == 0 { Q::one() } else { -Q::one() };
                // the product above is x_k ⋯ x_1 since each factor multiplies on the left
                mats.push(m.into_iter().map(|(k, v)| (k, v * &sign)).collect::<QMat>());
            }
            for (idx, c) in b {
                let mut val = c.c0().clone();
                for (j, m) in mats.iter().enumerate() {
                    val *= m.get(&(idx[2 * j], idx[2 * j + 1])).cloned().unwrap_or_else(Q::zero);
                    if val.is_zero() {
                        break;
                    }
                }
                total += val;
            }
        }
        Ok(total)
    }
}
