//! Exact linear algebra: sparse reduced row echelon forms over ℚ and
//! unit-pivot elimination over the truncated series ring.

use std::collections::BTreeMap;

use num_traits::{One, Zero};
use thiserror::Error;

use crate::kernel::{series_inv, Series, Q};

pub type SparseVec = BTreeMap<usize, Q>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LinalgError {
    #[error("matrix is singular over the truncated series ring")]
    Singular,
    #[error("dimension mismatch")]
    Dimension,
}

pub fn sv_add_scaled(acc: &mut SparseVec, v: &SparseVec, c: &Q) {
    if c.is_zero() {
        return;
    }
    for (k, x) in v {
        let e = acc.entry(*k).or_insert_with(Q::zero);
        *e += x * c;
        if e.is_zero() {
            acc.remove(k);
        }
    }
}

pub fn sv_scale(v: &SparseVec, c: &Q) -> SparseVec {
    if c.is_zero() {
        return SparseVec::new();
    }
    v.iter().map(|(k, x)| (*k, x * c)).collect()
}

/// Reduced row echelon basis with pivots in increasing column order.
/// Each row optionally remembers which combination of inserted vectors it is.
#[derive(Clone, Debug, Default)]
pub struct Echelon {
    /// pivot column -> (row, combination of inserted vectors)
    rows: BTreeMap<usize, (SparseVec, SparseVec)>,
    inserted: usize,
}

impl Echelon {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    pub fn pivots(&self) -> Vec<usize> {
        self.rows.keys().copied().collect()
    }

    /// Canonical basis rows (sorted by pivot).
    pub fn basis(&self) -> Vec<SparseVec> {
        self.rows.values().map(|(r, _)| r.clone()).collect()
    }

    /// Reduce v against the basis; returns the residual and the combination
    /// of inserted vectors that was subtracted.
    pub fn reduce_tracked(&self, v: &SparseVec) -> (SparseVec, SparseVec) {
        let mut r = v.clone();
        let mut comb = SparseVec::new();
        for (p, (row, rc)) in &self.rows {
            if let Some(c) = r.get(p).cloned() {
                sv_add_scaled(&mut r, row, &-c.clone());
                sv_add_scaled(&mut comb, rc, &c);
            }
        }
        (r, comb)
    }

    pub fn reduce(&self, v: &SparseVec) -> SparseVec {
        let mut r = v.clone();
        for (p, (row, _)) in &self.rows {
            if let Some(c) = r.get(p).cloned() {
                sv_add_scaled(&mut r, row, &-c);
            }
        }
        r
    }

    pub fn contains(&self, v: &SparseVec) -> bool {
        self.reduce(v).is_empty()
    }

    /// Coordinates of v in terms of the inserted vectors (None if not in span).
    pub fn express(&self, v: &SparseVec) -> Option<SparseVec> {
        let (r, comb) = self.reduce_tracked(v);
        if r.is_empty() {
            Some(comb)
        } else {
            None
        }
    }

    /// Insert a vector; returns true if it enlarged the span.
    pub fn insert(&mut self, v: &SparseVec) -> bool {
        let idx = self.inserted;
        self.inserted += 1;
        let mut tag = SparseVec::new();
        tag.insert(idx, Q::one());
        let (mut r, comb) = self.reduce_tracked(v);
        if r.is_empty() {
            return false;
        }
        let mut rc = tag;
        sv_add_scaled(&mut rc, &comb, &-Q::one());
        let (&p, lead) = r.iter().next().expect("nonempty");
        let inv = lead.recip();
        r = sv_scale(&r, &inv);
        rc = sv_scale(&rc, &inv);
        // keep the form reduced: clear column p from existing rows
        for (row, c) in self.rows.values_mut() {
            if let Some(x) = row.get(&p).cloned() {
                sv_add_scaled(row, &r, &-x.clone());
                sv_add_scaled(c, &rc, &-x);
            }
        }
        self.rows.insert(p, (r, rc));
        true
    }

    pub fn from_vectors<'a>(vs: impl IntoIterator<Item = &'a SparseVec>) -> Self {
        let mut e = Echelon::new();
        for v in vs {
            e.insert(v);
        }
        e
    }
}

/// Dense matrix over the series ring.
pub type SMatrix = Vec<Vec<Series>>;

/// Gauss–Jordan with pivots restricted to units (nonzero constant term).
/// Returns (reduced matrix, pivot columns). Errors if after elimination a
/// nonzero non-unit entry survives outside the pivot rows, which means the
/// rank drops modulo ħ.
fn unit_rref(m: &SMatrix, ncols: usize) -> Result<(SMatrix, Vec<usize>), LinalgError> {
    let mut a = m.clone();
    let nrows = a.len();
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..ncols {
        if r == nrows {
            break;
        }
        let Some(pr) = (r..nrows).find(|&i| a[i][c].is_unit()) else {
            continue;
        };
        a.swap(r, pr);
        let inv = series_inv(&a[r][c]).expect("unit pivot");
        a[r] = a[r].iter().map(|x| x * &inv).collect();
        for i in 0..nrows {
            if i != r && !a[i][c].is_zero() {
                let f = a[i][c].clone();
                for j in 0..ncols {
                    if !a[r][j].is_zero() {
                        let t = &f * &a[r][j];
                        a[i][j] -= &t;
                    }
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    for row in a.iter().skip(r) {
        if row.iter().any(|x| !x.is_zero()) {
            return Err(LinalgError::Singular);
        }
    }
    Ok((a, pivots))
}

/// Basis of the kernel {x : M x = 0}, one vector per free column with that
/// coordinate set to 1.
pub fn kernel_basis(m: &SMatrix, ncols: usize, order: usize) -> Result<Vec<Vec<Series>>, LinalgError> {
    if m.is_empty() {
        return Ok((0..ncols)
            .map(|f| {
                (0..ncols)
                    .map(|j| if j == f { Series::constant(order, Q::one()) } else { Series::zero(order) })
                    .collect()
            })
            .collect());
    }
    let (a, pivots) = unit_rref(m, ncols)?;
    let free: Vec<usize> = (0..ncols).filter(|c| !pivots.contains(c)).collect();
    let mut out = Vec::new();
    for &f in &free {
        let mut x = vec![Series::zero(order); ncols];
        x[f] = Series::constant(order, Q::one());
        for (i, &p) in pivots.iter().enumerate() {
            x[p] = -&a[i][f];
        }
        out.push(x);
    }
    Ok(out)
}

pub fn inverse(m: &SMatrix, order: usize) -> Result<SMatrix, LinalgError> {
    let n = m.len();
    if m.iter().any(|r| r.len() != n) {
        return Err(LinalgError::Dimension);
    }
    let mut aug: SMatrix = m
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            for j in 0..n {
                r.push(if i == j { Series::constant(order, Q::one()) } else { Series::zero(order) });
            }
            r
        })
        .collect();
    for c in 0..n {
        let pr = (c..n).find(|&i| aug[i][c].is_unit()).ok_or(LinalgError::Singular)?;
        aug.swap(c, pr);
        let inv = series_inv(&aug[c][c]).expect("unit pivot");
        aug[c] = aug[c].iter().map(|x| x * &inv).collect();
        for i in 0..n {
            if i != c && !aug[i][c].is_zero() {
                let f = aug[i][c].clone();
                for j in 0..2 * n {
                    if !aug[c][j].is_zero() {
                        let t = &f * &aug[c][j];
                        aug[i][j] -= &t;
                    }
                }
            }
        }
    }
    Ok(aug.into_iter().map(|r| r[n..].to_vec()).collect())
}

pub fn mat_mul(a: &SMatrix, b: &SMatrix, order: usize) -> SMatrix {
    let n = a.len();
    let k = b.len();
    let m = if k == 0 { 0 } else { b[0].len() };
    let mut out = vec![vec![Series::zero(order); m]; n];
    for i in 0..n {
        for l in 0..k {
            if a[i][l].is_zero() {
                continue;
            }
            for j in 0..m {
                if !b[l][j].is_zero() {
                    let t = &a[i][l] * &b[l][j];
                    out[i][j] += &t;
                }
            }
        }
    }
    out
}

pub fn identity(n: usize, order: usize) -> SMatrix {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { Series::constant(order, Q::one()) } else { Series::zero(order) }).collect())
        .collect()
}
