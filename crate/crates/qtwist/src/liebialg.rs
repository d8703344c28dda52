//! Semisimple Lie algebras of type A with exact structure constants, sparse
//! tensors over g^⊗k, r-matrix constructions and coisotropy checks.
//!
//! Wedge convention used throughout: a∧b = a⊗b − b⊗a.

use std::collections::BTreeMap;
use std::path::Path;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::{parse_q, q, q_to_string, qf, Q};
use crate::linalg::{sv_add_scaled, Echelon, SparseVec};

#[derive(Debug, Error)]
pub enum LieError {
    #[error("cannot parse algebra definition: {0}")]
    Parse(String),
    #[error("unsupported algebra: {0}")]
    Unsupported(String),
    #[error("Jacobi identity fails on ({0}, {1}, {2})")]
    Jacobi(String, String, String),
    #[error("invariant form fails on ({0}, {1}, {2})")]
    Invariance(String, String, String),
    #[error("invariant form is degenerate on the Cartan subalgebra")]
    Degenerate,
    #[error("subspace is not closed under the bracket")]
    NotSubalgebra,
    #[error("unknown basis label {0}")]
    UnknownLabel(String),
    #[error("expected a tensor of arity {expected}, got {got}")]
    Arity { expected: usize, got: usize },
}

/// Sparse square matrix over ℚ, (row, col) -> entry.
pub type QMat = BTreeMap<(usize, usize), Q>;

pub fn qmat_mul(a: &QMat, b: &QMat) -> QMat {
    let mut out = QMat::new();
    for (&(i, k), x) in a {
        for (&(k2, j), y) in b.range((k, 0)..(k + 1, 0)) {
            debug_assert_eq!(k, k2);
            let e = out.entry((i, j)).or_insert_with(Q::zero);
            *e += x * y;
        }
    }
    out.retain(|_, v| !v.is_zero());
    out
}

pub fn qmat_commutator(a: &QMat, b: &QMat) -> QMat {
    let mut out = qmat_mul(a, b);
    for (k, v) in qmat_mul(b, a) {
        let e = out.entry(k).or_insert_with(Q::zero);
        *e -= v;
    }
    out.retain(|_, v| !v.is_zero());
    out
}

pub fn qmat_trace(a: &QMat) -> Q {
    a.iter().filter(|((i, j), _)| i == j).map(|(_, v)| v.clone()).sum()
}

#[derive(Clone, Debug)]
pub struct PosRoot {
    /// coordinates in the simple-root basis
    pub root: Vec<i64>,
    pub e: usize,
    pub f: usize,
}

#[derive(Clone, Debug)]
pub struct RootData {
    pub rank: usize,
    pub cartan: Vec<Vec<i64>>,
    pub symmetrizers: Vec<Q>,
    pub form_scale: Q,
    /// basis index of h_{α_i}
    pub h: Vec<usize>,
    pub pos_roots: Vec<PosRoot>,
    /// defining-representation matrices of every basis element (type A)
    pub defining: Vec<QMat>,
    pub defining_dim: usize,
}

impl RootData {
    pub fn simple_e(&self, i: usize) -> usize {
        self.pos_roots[i].e
    }
    pub fn simple_f(&self, i: usize) -> usize {
        self.pos_roots[i].f
    }
    /// ϖ ↦ −w_0(ϖ) in fundamental-weight coordinates (type A reverses them).
    pub fn dual_weight(&self, w: &[i64]) -> Vec<i64> {
        w.iter().rev().copied().collect()
    }
    /// ⟨λ, h_{α_i}⟩ for λ in fundamental-weight coordinates.
    pub fn pair_h(&self, w: &[i64], i: usize) -> Q {
        qf(w[i], 1) / &self.form_scale
    }
}

#[derive(Clone, Debug)]
pub struct LieAlgebra {
    pub name: String,
    pub labels: Vec<String>,
    /// brackets[i*n + j] = [x_i, x_j]
    brackets: Vec<SparseVec>,
    pub gram: Vec<Vec<Q>>,
    /// basis indices spanning the Cartan subalgebra
    pub cartan_idx: Vec<usize>,
    pub roots: Option<RootData>,
    /// (offset, dim) of each direct summand
    pub components: Vec<(usize, usize)>,
}

#[derive(Deserialize)]
struct AlgebraFile {
    name: String,
    #[serde(rename = "type")]
    kind: String,
    rank: usize,
    cartan: Vec<Vec<i64>>,
    form_scale: Option<toml::Value>,
}

impl LieAlgebra {
    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn bracket_basis(&self, i: usize, j: usize) -> &SparseVec {
        &self.brackets[i * self.dim() + j]
    }

    pub fn index(&self, label: &str) -> Result<usize, LieError> {
        self.labels.iter().position(|l| l == label).ok_or_else(|| LieError::UnknownLabel(label.to_string()))
    }

    pub fn form(&self, a: &SparseVec, b: &SparseVec) -> Q {
        let mut s = Q::zero();
        for (i, x) in a {
            for (j, y) in b {
                if !self.gram[*i][*j].is_zero() {
                    s += x * y * &self.gram[*i][*j];
                }
            }
        }
        s
    }

    pub fn bracket(&self, a: &SparseVec, b: &SparseVec) -> SparseVec {
        let mut out = SparseVec::new();
        for (i, x) in a {
            for (j, y) in b {
                sv_add_scaled(&mut out, self.bracket_basis(*i, *j), &(x * y));
            }
        }
        out
    }

    /// sl_n in its defining realization with invariant form s·tr(XY).
    /// Basis: h_i = (E_ii − E_{i+1,i+1})/s, e_β = E_ij and e_{−β} = E_ji/s for i<j,
    /// so that ⟨e_β, e_{−β}⟩ = 1 and h_α = [e_α, e_{−α}].
    pub fn sl(n: usize, s: Q) -> Result<Self, LieError> {
        if n < 2 {
            return Err(LieError::Unsupported(format!("sl{n}")));
        }
        if s.is_zero() {
            return Err(LieError::Degenerate);
        }
        let rank = n - 1;
        let mut mats: Vec<QMat> = Vec::new();
        let mut labels = Vec::new();
        let inv_s = s.recip();
        for i in 0..rank {
            let mut m = QMat::new();
            m.insert((i, i), inv_s.clone());
            m.insert((i + 1, i + 1), -inv_s.clone());
            mats.push(m);
            labels.push(if n == 2 { "h".to_string() } else { format!("h{}", i + 1) });
        }
        // positive roots ordered by height, then by start
        let mut pairs = Vec::new();
        for ht in 1..n {
            for i in 0..n - ht {
                pairs.push((i, i + ht));
            }
        }
        let root_label =
            |i: usize, j: usize| -> String { (i + 1..=j).map(|k| k.to_string()).collect::<Vec<_>>().join("") };
        let mut pos_roots = Vec::new();
        for &(i, j) in &pairs {
            let mut m = QMat::new();
            m.insert((i, j), Q::one());
            mats.push(m);
            labels.push(if n == 2 { "e".to_string() } else { format!("e{}", root_label(i, j)) });
        }
        for &(i, j) in &pairs {
            let mut m = QMat::new();
            m.insert((j, i), inv_s.clone());
            mats.push(m);
            labels.push(if n == 2 { "f".to_string() } else { format!("f{}", root_label(i, j)) });
        }
        for (k, &(i, j)) in pairs.iter().enumerate() {
            let mut root = vec![0; rank];
            for r in root.iter_mut().take(j).skip(i) {
                *r = 1;
            }
            pos_roots.push(PosRoot { root, e: rank + k, f: rank + pairs.len() + k });
        }
        let dim = mats.len();
        let coords = |m: &QMat| -> SparseVec {
            let mut v = SparseVec::new();
            for (k, &(i, j)) in pairs.iter().enumerate() {
                if let Some(x) = m.get(&(i, j)) {
                    v.insert(rank + k, x.clone());
                }
                if let Some(x) = m.get(&(j, i)) {
                    v.insert(rank + pairs.len() + k, x * &s);
                }
            }
            let mut partial = Q::zero();
            for i in 0..rank {
                if let Some(x) = m.get(&(i, i)) {
                    partial += x;
                }
                if !partial.is_zero() {
                    v.insert(i, &partial * &s);
                }
            }
            v
        };
        let mut brackets = Vec::with_capacity(dim * dim);
        for a in &mats {
            for b in &mats {
                brackets.push(coords(&qmat_commutator(a, b)));
            }
        }
        let gram: Vec<Vec<Q>> =
            mats.iter().map(|a| mats.iter().map(|b| &s * qmat_trace(&qmat_mul(a, b))).collect()).collect();
        let mut cartan = vec![vec![0i64; rank]; rank];
        for (i, row) in cartan.iter_mut().enumerate() {
            for (j, c) in row.iter_mut().enumerate() {
                *c = if i == j {
                    2
                } else if i.abs_diff(j) == 1 {
                    -1
                } else {
                    0
                };
            }
        }
        let g = LieAlgebra {
            name: format!("sl{n}"),
            labels,
            brackets,
            gram,
            cartan_idx: (0..rank).collect(),
            roots: Some(RootData {
                rank,
                cartan,
                symmetrizers: vec![q(2) / &s; rank],
                form_scale: s,
                h: (0..rank).collect(),
                pos_roots,
                defining: mats,
                defining_dim: n,
            }),
            components: vec![(0, dim)],
        };
        g.validate()?;
        Ok(g)
    }

    pub fn from_toml_str(text: &str) -> Result<Self, LieError> {
        let f: AlgebraFile = toml::from_str(text).map_err(|e| LieError::Parse(e.to_string()))?;
        if f.kind != "A" {
            return Err(LieError::Unsupported(format!("type {}", f.kind)));
        }
        if f.rank == 0 || f.cartan.len() != f.rank || f.cartan.iter().any(|r| r.len() != f.rank) {
            return Err(LieError::Parse("cartan matrix shape does not match rank".into()));
        }
        let s = match f.form_scale {
            None => Q::one(),
            Some(toml::Value::Integer(i)) => q(i),
            Some(toml::Value::String(s)) => parse_q(&s).ok_or_else(|| LieError::Parse(format!("form_scale {s}")))?,
            Some(v) => return Err(LieError::Parse(format!("form_scale {v}"))),
        };
        let mut g = Self::sl(f.rank + 1, s)?;
        if g.roots.as_ref().map(|r| &r.cartan) != Some(&f.cartan) {
            return Err(LieError::Parse("cartan matrix is not of type A".into()));
        }
        g.name = f.name;
        Ok(g)
    }

    pub fn load(path: &Path) -> Result<Self, LieError> {
        let text = std::fs::read_to_string(path).map_err(|e| LieError::Parse(e.to_string()))?;
        Self::from_toml_str(&text)
    }

    /// Built-in definitions shipped in data/.
    pub fn named(name: &str) -> Result<Self, LieError> {
        match name {
            "sl2" => Self::from_toml_str(include_str!("../data/sl2.toml")),
            "sl3" => Self::from_toml_str(include_str!("../data/sl3.toml")),
            other => Err(LieError::Unsupported(other.to_string())),
        }
    }

    pub fn with_form_scale(name: &str, s: Q) -> Result<Self, LieError> {
        let base = Self::named(name)?;
        let rank = base.roots.as_ref().map(|r| r.rank).unwrap_or(1);
        let mut g = Self::sl(rank + 1, s)?;
        g.name = base.name;
        Ok(g)
    }

    /// Abelian algebra t with the restricted form.
    pub fn cartan_part(&self) -> LieAlgebra {
        let r = self.cartan_idx.len();
        let labels = self.cartan_idx.iter().map(|&i| format!("{}'", self.labels[i])).collect();
        let gram = self
            .cartan_idx
            .iter()
            .map(|&i| self.cartan_idx.iter().map(|&j| self.gram[i][j].clone()).collect())
            .collect();
        LieAlgebra {
            name: format!("t({})", self.name),
            labels,
            brackets: vec![SparseVec::new(); r * r],
            gram,
            cartan_idx: (0..r).collect(),
            roots: None,
            components: vec![(0, r)],
        }
    }

    pub fn direct_sum(parts: &[&LieAlgebra]) -> LieAlgebra {
        let dim: usize = parts.iter().map(|p| p.dim()).sum();
        let mut labels = Vec::new();
        let mut brackets = vec![SparseVec::new(); dim * dim];
        let mut gram = vec![vec![Q::zero(); dim]; dim];
        let mut cartan_idx = Vec::new();
        let mut components = Vec::new();
        let mut off = 0;
        for (k, p) in parts.iter().enumerate() {
            let n = p.dim();
            for l in &p.labels {
                labels.push(format!("({l})_{}", k + 1));
            }
            for i in 0..n {
                for j in 0..n {
                    brackets[(off + i) * dim + off + j] =
                        p.bracket_basis(i, j).iter().map(|(t, x)| (t + off, x.clone())).collect();
                    gram[off + i][off + j] = p.gram[i][j].clone();
                }
            }
            cartan_idx.extend(p.cartan_idx.iter().map(|i| i + off));
            components.push((off, n));
            off += n;
        }
        LieAlgebra {
            name: parts.iter().map(|p| p.name.clone()).collect::<Vec<_>>().join("+"),
            labels,
            brackets,
            gram,
            cartan_idx,
            roots: None,
            components,
        }
    }

    pub fn power(&self, m: usize) -> LieAlgebra {
        let parts: Vec<&LieAlgebra> = (0..m).map(|_| self).collect();
        let mut g = Self::direct_sum(&parts);
        g.name = format!("{}^{m}", self.name);
        g
    }

    /// Antisymmetry, Jacobi and invariance of the form on basis triples.
    pub fn validate(&self) -> Result<(), LieError> {
        let n = self.dim();
        let lbl = |i: usize| self.labels[i].clone();
        for i in 0..n {
            for j in 0..n {
                let mut s = self.bracket_basis(i, j).clone();
                sv_add_scaled(&mut s, self.bracket_basis(j, i), &Q::one());
                if !s.is_empty() {
                    return Err(LieError::Jacobi(lbl(i), lbl(j), lbl(j)));
                }
            }
        }
        let unit = |i: usize| -> SparseVec { [(i, Q::one())].into_iter().collect() };
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let (x, y, z) = (unit(i), unit(j), unit(k));
                    let mut s = self.bracket(&x, &self.bracket(&y, &z));
                    sv_add_scaled(&mut s, &self.bracket(&y, &self.bracket(&z, &x)), &Q::one());
                    sv_add_scaled(&mut s, &self.bracket(&z, &self.bracket(&x, &y)), &Q::one());
                    if !s.is_empty() {
                        return Err(LieError::Jacobi(lbl(i), lbl(j), lbl(k)));
                    }
                    let inv = self.form(&self.bracket(&x, &y), &z) + self.form(&y, &self.bracket(&x, &z));
                    if !inv.is_zero() {
                        return Err(LieError::Invariance(lbl(i), lbl(j), lbl(k)));
                    }
                }
            }
        }
        if let Some(rd) = &self.roots {
            for pr in &rd.pos_roots {
                if self.gram[pr.e][pr.f] != Q::one() {
                    return Err(LieError::Invariance(lbl(pr.e), lbl(pr.f), String::new()));
                }
            }
        }
        Ok(())
    }

    pub fn basis_vec(&self, i: usize) -> SparseVec {
        [(i, Q::one())].into_iter().collect()
    }
}

/// Sparse element of g^⊗k.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LieTensor {
    pub arity: usize,
    pub terms: BTreeMap<Vec<usize>, Q>,
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq, Eq)]
pub struct TensorTerm {
    pub legs: Vec<String>,
    pub coeff: String,
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq, Eq)]
pub struct TensorJson {
    pub algebra: String,
    pub arity: usize,
    pub terms: Vec<TensorTerm>,
}

impl LieTensor {
    pub fn zero(arity: usize) -> Self {
        LieTensor { arity, terms: BTreeMap::new() }
    }

    pub fn basis(i: usize) -> Self {
        Self::monomial(vec![i], Q::one())
    }

    pub fn monomial(idx: Vec<usize>, c: Q) -> Self {
        let mut t = Self::zero(idx.len());
        t.add_term(idx, c);
        t
    }

    pub fn from_vec(v: &SparseVec) -> Self {
        LieTensor { arity: 1, terms: v.iter().map(|(i, x)| (vec![*i], x.clone())).collect() }
    }

    pub fn to_vec(&self) -> SparseVec {
        assert_eq!(self.arity, 1);
        self.terms.iter().map(|(k, x)| (k[0], x.clone())).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add_term(&mut self, idx: Vec<usize>, c: Q) {
        debug_assert_eq!(idx.len(), self.arity);
        if c.is_zero() {
            return;
        }
        let e = self.terms.entry(idx.clone()).or_insert_with(Q::zero);
        *e += c;
        if e.is_zero() {
            self.terms.remove(&idx);
        }
    }

    pub fn add_scaled(&mut self, other: &LieTensor, c: &Q) {
        assert_eq!(self.arity, other.arity, "arity mismatch");
        for (k, x) in &other.terms {
            self.add_term(k.clone(), x * c);
        }
    }

    pub fn scale(&self, c: &Q) -> LieTensor {
        let mut t = Self::zero(self.arity);
        t.add_scaled(self, c);
        t
    }

    pub fn add(&self, other: &LieTensor) -> LieTensor {
        let mut t = self.clone();
        t.add_scaled(other, &Q::one());
        t
    }

    pub fn sub(&self, other: &LieTensor) -> LieTensor {
        let mut t = self.clone();
        t.add_scaled(other, &-Q::one());
        t
    }

    pub fn tensor(&self, other: &LieTensor) -> LieTensor {
        let mut t = Self::zero(self.arity + other.arity);
        for (a, x) in &self.terms {
            for (b, y) in &other.terms {
                let mut k = a.clone();
                k.extend_from_slice(b);
                t.add_term(k, x * y);
            }
        }
        t
    }

    /// a∧b = a⊗b − b⊗a for arity-1 inputs.
    pub fn wedge(a: &LieTensor, b: &LieTensor) -> LieTensor {
        a.tensor(b).sub(&b.tensor(a))
    }

    /// Reorder legs: leg i of the result is leg perm[i] of self.
    pub fn permute(&self, perm: &[usize]) -> LieTensor {
        let mut t = Self::zero(self.arity);
        for (k, x) in &self.terms {
            t.add_term(perm.iter().map(|&p| k[p]).collect(), x.clone());
        }
        t
    }

    pub fn swap(&self) -> LieTensor {
        self.permute(&[1, 0])
    }

    pub fn symmetric_part(&self) -> LieTensor {
        self.add(&self.swap()).scale(&qf(1, 2))
    }

    pub fn antisymmetric_part(&self) -> LieTensor {
        self.sub(&self.swap()).scale(&qf(1, 2))
    }

    /// Shift every index by `offset` (embedding into a direct summand).
    pub fn shift(&self, offset: usize) -> LieTensor {
        let mut t = Self::zero(self.arity);
        for (k, x) in &self.terms {
            t.add_term(k.iter().map(|i| i + offset).collect(), x.clone());
        }
        t
    }

    /// Place leg j into summand comps[j] of a direct sum with the given offsets.
    pub fn embed_legs(&self, offsets: &[usize]) -> LieTensor {
        let mut t = Self::zero(self.arity);
        for (k, x) in &self.terms {
            t.add_term(k.iter().zip(offsets).map(|(i, o)| i + o).collect(), x.clone());
        }
        t
    }

    pub fn to_json(&self, g: &LieAlgebra) -> TensorJson {
        TensorJson {
            algebra: g.name.clone(),
            arity: self.arity,
            terms: self
                .terms
                .iter()
                .map(|(k, x)| TensorTerm {
                    legs: k.iter().map(|&i| g.labels[i].clone()).collect(),
                    coeff: q_to_string(x),
                })
                .collect(),
        }
    }

    pub fn from_json(g: &LieAlgebra, j: &TensorJson) -> Result<LieTensor, LieError> {
        let mut t = Self::zero(j.arity);
        for term in &j.terms {
            if term.legs.len() != j.arity {
                return Err(LieError::Arity { expected: j.arity, got: term.legs.len() });
            }
            let idx = term.legs.iter().map(|l| g.index(l)).collect::<Result<Vec<_>, _>>()?;
            let c = parse_q(&term.coeff).ok_or_else(|| LieError::Parse(term.coeff.clone()))?;
            t.add_term(idx, c);
        }
        Ok(t)
    }

    pub fn display(&self, g: &LieAlgebra) -> String {
        if self.is_zero() {
            return "0".into();
        }
        let mut s = String::new();
        for (n, (k, x)) in self.terms.iter().enumerate() {
            let neg = x < &Q::zero();
            let mag = if neg { -x.clone() } else { x.clone() };
            if n > 0 {
                s.push_str(if neg { " - " } else { " + " });
            } else if neg {
                s.push('-');
            }
            if !mag.is_one() {
                s.push_str(&q_to_string(&mag));
                s.push('·');
            }
            s.push_str(&k.iter().map(|&i| g.labels[i].as_str()).collect::<Vec<_>>().join("⊗"));
        }
        s
    }

    /// Flatten into a vector indexed by base-n digits.
    pub fn flatten(&self, n: usize) -> SparseVec {
        self.terms.iter().map(|(k, x)| (k.iter().fold(0usize, |acc, &i| acc * n + i), x.clone())).collect()
    }

    pub fn unflatten(v: &SparseVec, n: usize, arity: usize) -> LieTensor {
        let mut t = Self::zero(arity);
        for (&f, x) in v {
            let mut idx = vec![0; arity];
            let mut r = f;
            for slot in idx.iter_mut().rev() {
                *slot = r % n;
                r /= n;
            }
            t.add_term(idx, x.clone());
        }
        t
    }
}

/// x·T = Σ_legs (1⊗…⊗ad x⊗…⊗1)(T).
pub fn ad_diag(g: &LieAlgebra, x: &SparseVec, t: &LieTensor) -> LieTensor {
    let mut out = LieTensor::zero(t.arity);
    for (k, c) in &t.terms {
        for leg in 0..t.arity {
            for (xi, xc) in x {
                for (r, rc) in g.bracket_basis(*xi, k[leg]) {
                    let mut idx = k.clone();
                    idx[leg] = *r;
                    out.add_term(idx, c * xc * rc);
                }
            }
        }
    }
    out
}

pub struct StandardR {
    pub r: LieTensor,
    pub r0: LieTensor,
    pub lambda: LieTensor,
    /// r̃ = (r, 0) − (0, r0) on g ⊕ t
    pub r_tilde: LieTensor,
    pub g_tilde: LieAlgebra,
}

fn invert_q(m: &[Vec<Q>]) -> Option<Vec<Vec<Q>>> {
    let n = m.len();
    let mut a: Vec<Vec<Q>> = m
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = r.clone();
            row.extend((0..n).map(|j| if i == j { Q::one() } else { Q::zero() }));
            row
        })
        .collect();
    for c in 0..n {
        let p = (c..n).find(|&i| !a[i][c].is_zero())?;
        a.swap(c, p);
        let inv = a[c][c].recip();
        for x in a[c].iter_mut() {
            *x *= &inv;
        }
        for i in 0..n {
            if i != c && !a[i][c].is_zero() {
                let f = a[i][c].clone();
                let pivot_row = a[c].clone();
                for (x, y) in a[i].iter_mut().zip(&pivot_row) {
                    *x -= &f * y;
                }
            }
        }
    }
    Some(a.into_iter().map(|r| r[n..].to_vec()).collect())
}

/// ½ × canonical element of the form restricted to the Cartan subalgebra.
pub fn cartan_r0(g: &LieAlgebra) -> Result<LieTensor, LieError> {
    let idx = &g.cartan_idx;
    let gt: Vec<Vec<Q>> = idx.iter().map(|&i| idx.iter().map(|&j| g.gram[i][j].clone()).collect()).collect();
    let inv = invert_q(&gt).ok_or(LieError::Degenerate)?;
    let mut r0 = LieTensor::zero(2);
    for (a, &i) in idx.iter().enumerate() {
        for (b, &j) in idx.iter().enumerate() {
            r0.add_term(vec![i, j], &inv[a][b] * qf(1, 2));
        }
    }
    Ok(r0)
}

pub fn standard_r(g: &LieAlgebra) -> Result<StandardR, LieError> {
    let rd = g.roots.as_ref().ok_or_else(|| LieError::Unsupported("algebra without root data".into()))?;
    let r0 = cartan_r0(g)?;
    let mut r = r0.clone();
    let mut lambda = LieTensor::zero(2);
    for pr in &rd.pos_roots {
        r.add_term(vec![pr.f, pr.e], Q::one());
        lambda.add_scaled(&LieTensor::wedge(&LieTensor::basis(pr.f), &LieTensor::basis(pr.e)), &qf(1, 2));
    }
    let t = g.cartan_part();
    let g_tilde = LieAlgebra::direct_sum(&[g, &t]);
    let n = g.dim();
    let mut r_tilde = r.clone();
    let r0_t = {
        let mut z = LieTensor::zero(2);
        for (k, x) in &r0.terms {
            let a = g.cartan_idx.iter().position(|&c| c == k[0]).expect("cartan index");
            let b = g.cartan_idx.iter().position(|&c| c == k[1]).expect("cartan index");
            z.add_term(vec![n + a, n + b], x.clone());
        }
        z
    };
    r_tilde.add_scaled(&r0_t, &-Q::one());
    Ok(StandardR { r, r0, lambda, r_tilde, g_tilde })
}

/// [r12,r13] + [r12,r23] + [r13,r23].
pub fn cybe_residual(g: &LieAlgebra, r: &LieTensor) -> LieTensor {
    assert_eq!(r.arity, 2);
    let mut out = LieTensor::zero(3);
    for (a, x) in &r.terms {
        for (b, y) in &r.terms {
            let c = x * y;
            let (i, j, k, l) = (a[0], a[1], b[0], b[1]);
            for (p, z) in g.bracket_basis(i, k) {
                out.add_term(vec![*p, j, l], &c * z);
            }
            for (p, z) in g.bracket_basis(j, k) {
                out.add_term(vec![i, *p, l], &c * z);
            }
            for (p, z) in g.bracket_basis(j, l) {
                out.add_term(vec![i, k, *p], &c * z);
            }
        }
    }
    out
}

/// δ_r(x) = [x⊗1 + 1⊗x, r].
pub fn cobracket(g: &LieAlgebra, r: &LieTensor, x: &SparseVec) -> LieTensor {
    ad_diag(g, x, r)
}

/// Mix^m(r) on g^m: Σ_{k<l} Σ_i (y_i)_k ∧ (x_i)_l for r = Σ_i x_i⊗y_i.
pub fn mix_tensor(g: &LieAlgebra, r: &LieTensor, m: usize) -> LieTensor {
    let n = g.dim();
    let mut out = LieTensor::zero(2);
    for k in 0..m {
        for l in k + 1..m {
            for (idx, c) in &r.terms {
                let y = LieTensor::basis(idx[1] + k * n);
                let x = LieTensor::basis(idx[0] + l * n);
                out.add_scaled(&LieTensor::wedge(&y, &x), c);
            }
        }
    }
    out
}

/// (r, …, r) on g^m.
pub fn diagonal_r(g: &LieAlgebra, r: &LieTensor, m: usize) -> LieTensor {
    let n = g.dim();
    let mut out = LieTensor::zero(2);
    for k in 0..m {
        out.add_scaled(&r.shift(k * n), &Q::one());
    }
    out
}

/// r^(m) = (r, …, r) − Mix^m(r).
pub fn twisted_r(g: &LieAlgebra, r: &LieTensor, m: usize) -> LieTensor {
    diagonal_r(g, r, m).sub(&mix_tensor(g, r, m))
}

/// diag_m(x) = (x, …, x).
pub fn diag_embed(g: &LieAlgebra, x: &SparseVec, m: usize) -> SparseVec {
    let n = g.dim();
    let mut v = SparseVec::new();
    for k in 0..m {
        for (i, c) in x {
            v.insert(i + k * n, c.clone());
        }
    }
    v
}

pub struct TwistCheck {
    pub ok: bool,
    pub residual: LieTensor,
}

/// δ(t) + ½[t,t] for antisymmetric t, where δ extends to ∧²g as a
/// derivation and [t,t] is the algebraic Schouten square.
pub fn verify_twisting_element(g: &LieAlgebra, t: &LieTensor, delta: &dyn Fn(usize) -> LieTensor) -> TwistCheck {
    assert_eq!(t.arity, 2);
    // (δ⊗1)(t), then cyclic sum
    let mut d1 = LieTensor::zero(3);
    for (k, c) in &t.terms {
        let dk = delta(k[0]);
        d1.add_scaled(&dk.tensor(&LieTensor::basis(k[1])), c);
    }
    let mut dt = LieTensor::zero(3);
    for perm in [[0, 1, 2], [1, 2, 0], [2, 0, 1]] {
        dt.add_scaled(&d1.permute(&perm), &Q::one());
    }
    let cyb = cybe_residual(g, t);
    // with a∧b = a⊗b − b⊗a, ½[t,t] is the CYBE expression of t itself
    let residual = dt.add(&cyb);
    TwistCheck { ok: residual.is_zero(), residual }
}

/// Cobracket closure of (g^m, δ_r componentwise) on basis indices of g^m.
pub fn product_cobracket<'a>(
    g: &'a LieAlgebra,
    gm: &'a LieAlgebra,
    r: &'a LieTensor,
    m: usize,
) -> impl Fn(usize) -> LieTensor + 'a {
    let rr = diagonal_r(g, r, m);
    move |i| cobracket(gm, &rr, &gm.basis_vec(i))
}

/// Span of vectors in g, stored with a canonical reduced echelon basis.
#[derive(Clone, Debug)]
pub struct Subspace {
    pub ambient: usize,
    pub vectors: Vec<SparseVec>,
    pub echelon: Echelon,
}

impl Subspace {
    pub fn new(ambient: usize, vectors: Vec<SparseVec>) -> Self {
        let echelon = Echelon::from_vectors(vectors.iter());
        Subspace { ambient, vectors, echelon }
    }

    pub fn from_labels(g: &LieAlgebra, labels: &[&str]) -> Result<Self, LieError> {
        let vs = labels.iter().map(|l| g.index(l).map(|i| g.basis_vec(i))).collect::<Result<Vec<_>, _>>()?;
        Ok(Self::new(g.dim(), vs))
    }

    pub fn whole(g: &LieAlgebra) -> Self {
        Self::new(g.dim(), (0..g.dim()).map(|i| g.basis_vec(i)).collect())
    }

    pub fn dim(&self) -> usize {
        self.echelon.rank()
    }

    pub fn basis(&self) -> Vec<SparseVec> {
        self.echelon.basis()
    }

    pub fn contains(&self, v: &SparseVec) -> bool {
        self.echelon.contains(v)
    }

    /// u^m inside g^m.
    pub fn power(&self, m: usize) -> Subspace {
        let n = self.ambient;
        let mut vs = Vec::new();
        for k in 0..m {
            for b in self.basis() {
                vs.push(b.iter().map(|(i, x)| (i + k * n, x.clone())).collect());
            }
        }
        Subspace::new(n * m, vs)
    }

    pub fn derived(&self, g: &LieAlgebra) -> Subspace {
        let b = self.basis();
        let mut vs = Vec::new();
        for (i, x) in b.iter().enumerate() {
            for y in b.iter().skip(i + 1) {
                vs.push(g.bracket(x, y));
            }
        }
        Subspace::new(self.ambient, vs)
    }

    pub fn is_subalgebra(&self, g: &LieAlgebra) -> bool {
        let b = self.basis();
        b.iter().all(|x| b.iter().all(|y| self.contains(&g.bracket(x, y))))
    }
}

/// Echelon span of A⊗B inside g⊗g (flattened).
fn tensor_span(n: usize, a: &[SparseVec], b: &[SparseVec], e: &mut Echelon) {
    for x in a {
        for y in b {
            let t = LieTensor::from_vec(x).tensor(&LieTensor::from_vec(y));
            e.insert(&t.flatten(n));
        }
    }
}

fn full_basis(n: usize) -> Vec<SparseVec> {
    (0..n).map(|i| [(i, Q::one())].into_iter().collect()).collect()
}

#[derive(Clone, Debug, Serialize, PartialEq, Eq)]
pub struct CoisoResult {
    pub strongly: bool,
    pub coisotropic: bool,
}

pub fn strongly_coisotropic_lie(g: &LieAlgebra, u: &Subspace, r: &LieTensor) -> Result<CoisoResult, LieError> {
    if !u.is_subalgebra(g) {
        return Err(LieError::NotSubalgebra);
    }
    let n = g.dim();
    let uu = u.derived(g);
    let all = full_basis(n);
    let mut strong = Echelon::new();
    tensor_span(n, &all, &uu.basis(), &mut strong);
    tensor_span(n, &uu.basis(), &all, &mut strong);
    let mut weak = Echelon::new();
    tensor_span(n, &all, &u.basis(), &mut weak);
    tensor_span(n, &u.basis(), &all, &mut weak);
    let mut res = CoisoResult { strongly: true, coisotropic: true };
    for x in u.basis() {
        let d = cobracket(g, r, &x).flatten(n);
        res.strongly &= strong.contains(&d);
        res.coisotropic &= weak.contains(&d);
    }
    Ok(res)
}

/// r ∈ u⊗u + g⊗[u,u] + [u,u]⊗g.
pub fn r_membership_lie(g: &LieAlgebra, u: &Subspace, r: &LieTensor) -> bool {
    let n = g.dim();
    let uu = u.derived(g);
    let all = full_basis(n);
    let mut e = Echelon::new();
    tensor_span(n, &u.basis(), &u.basis(), &mut e);
    tensor_span(n, &all, &uu.basis(), &mut e);
    tensor_span(n, &uu.basis(), &all, &mut e);
    e.contains(&r.flatten(n))
}

/// Borel subalgebra b = t ⊕ n.
pub fn borel(g: &LieAlgebra) -> Subspace {
    let rd = g.roots.as_ref().expect("root data");
    let mut labels: Vec<usize> = rd.h.clone();
    labels.extend(rd.pos_roots.iter().map(|p| p.e));
    Subspace::new(g.dim(), labels.into_iter().map(|i| g.basis_vec(i)).collect())
}
