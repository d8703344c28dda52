//! Dense rational matrices for oracle computations in the integration tests.
#![allow(dead_code)]

use num_traits::{One, Zero};
use qtwist::kernel::Q;
use qtwist::liebialg::{LieTensor, QMat};
use qtwist::linalg::SparseVec;

pub type Mat = Vec<Vec<Q>>;

pub fn zeros(n: usize) -> Mat {
    vec![vec![Q::zero(); n]; n]
}

pub fn eye(n: usize) -> Mat {
    let mut m = zeros(n);
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = Q::one();
    }
    m
}

pub fn unit(n: usize, i: usize, j: usize, c: Q) -> Mat {
    let mut m = zeros(n);
    m[i][j] = c;
    m
}

pub fn from_sparse(n: usize, m: &QMat) -> Mat {
    let mut d = zeros(n);
    for ((i, j), x) in m {
        d[*i][*j] = x.clone();
    }
    d
}

pub fn add(a: &Mat, b: &Mat) -> Mat {
    a.iter().zip(b).map(|(r, s)| r.iter().zip(s).map(|(x, y)| x + y).collect()).collect()
}

pub fn sub(a: &Mat, b: &Mat) -> Mat {
    a.iter().zip(b).map(|(r, s)| r.iter().zip(s).map(|(x, y)| x - y).collect()).collect()
}

pub fn scale(a: &Mat, c: &Q) -> Mat {
    a.iter().map(|r| r.iter().map(|x| x * c).collect()).collect()
}

pub fn mul(a: &Mat, b: &Mat) -> Mat {
    let n = a.len();
    let k = b.len();
    let p = b[0].len();
    let mut out = vec![vec![Q::zero(); p]; n];
    for i in 0..n {
        for l in 0..k {
            if a[i][l].is_zero() {
                continue;
            }
            for j in 0..p {
                if !b[l][j].is_zero() {
                    out[i][j] += &a[i][l] * &b[l][j];
                }
            }
        }
    }
    out
}

pub fn commutator(a: &Mat, b: &Mat) -> Mat {
    sub(&mul(a, b), &mul(b, a))
}

pub fn kron(a: &Mat, b: &Mat) -> Mat {
    let (n, m) = (a.len(), b.len());
    let mut out = zeros(n * m);
    for i in 0..n {
        for j in 0..n {
            if a[i][j].is_zero() {
                continue;
            }
            for k in 0..m {
                for l in 0..m {
                    out[i * m + k][j * m + l] = &a[i][j] * &b[k][l];
                }
            }
        }
    }
    out
}

pub fn is_zero(a: &Mat) -> bool {
    a.iter().all(|r| r.iter().all(|x| x.is_zero()))
}

/// ρ(v) = Σ v_i ρ(x_i).
pub fn rep_of(rho: &[Mat], v: &SparseVec) -> Mat {
    let n = rho[0].len();
    v.iter().fold(zeros(n), |acc, (i, c)| add(&acc, &scale(&rho[*i], c)))
}

/// ρ^{⊗k}(t) for a tensor of arity k.
pub fn rep_tensor(rho: &[Mat], t: &LieTensor) -> Mat {
    let n = rho[0].len();
    let mut out = zeros(n.pow(t.arity as u32));
    for (idx, c) in &t.terms {
        let mut m = rho[idx[0]].clone();
        for &i in &idx[1..] {
            m = kron(&m, &rho[i]);
        }
        out = add(&out, &scale(&m, c));
    }
    out
}

/// Defining representation of sl_n in the basis h_i, e_β (by height, then
/// start), f_β, rescaled so that the trace form times s pairs e_β with f_β to 1.
pub fn defining_sl(n: usize, s: &Q) -> Vec<Mat> {
    let inv = s.recip();
    let mut out = Vec::new();
    for i in 0..n - 1 {
        let mut m = unit(n, i, i, inv.clone());
        m[i + 1][i + 1] = -inv.clone();
        out.push(m);
    }
    let mut pairs = Vec::new();
    for ht in 1..n {
        for i in 0..n - ht {
            pairs.push((i, i + ht));
        }
    }
    for &(i, j) in &pairs {
        out.push(unit(n, i, j, Q::one()));
    }
    for &(i, j) in &pairs {
        out.push(unit(n, j, i, inv.clone()));
    }
    out
}
