//! Dense exact linear algebra over the rationals.

use num_traits::{One, Zero};

use crate::expr::Q;

pub type Vector = Vec<Q>;
/// Row-major.
pub type Matrix = Vec<Vec<Q>>;

pub fn zeros(r: usize, c: usize) -> Matrix {
    vec![vec![Q::zero(); c]; r]
}

pub fn identity(n: usize) -> Matrix {
    let mut m = zeros(n, n);
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = Q::one();
    }
    m
}

pub fn mul(a: &Matrix, b: &Matrix) -> Matrix {
    let (n, k, m) = (a.len(), b.len(), b.first().map_or(0, |r| r.len()));
    let mut out = zeros(n, m);
    for i in 0..n {
        for l in 0..k {
            if a[i][l].is_zero() {
                continue;
            }
            for j in 0..m {
                out[i][j] += &a[i][l] * &b[l][j];
            }
        }
    }
    out
}

pub fn mul_vec(a: &Matrix, v: &[Q]) -> Vector {
    a.iter()
        .map(|row| row.iter().zip(v).fold(Q::zero(), |s, (x, y)| s + x * y))
        .collect()
}

pub fn transpose(a: &Matrix) -> Matrix {
    let m = a.first().map_or(0, |r| r.len());
    (0..m).map(|j| a.iter().map(|r| r[j].clone()).collect()).collect()
}

pub fn trace(a: &Matrix) -> Q {
    (0..a.len()).fold(Q::zero(), |s, i| s + &a[i][i])
}

/// Reduced row echelon form in place; returns pivot columns.
pub fn rref(a: &mut Matrix) -> Vec<usize> {
    let rows = a.len();
    let cols = a.first().map_or(0, |r| r.len());
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(p) = (r..rows).find(|&i| !a[i][c].is_zero()) else {
            continue;
        };
        a.swap(r, p);
        let inv = a[r][c].recip();
        for x in a[r].iter_mut() {
            *x *= &inv;
        }
        for i in 0..rows {
            if i != r && !a[i][c].is_zero() {
                let f = a[i][c].clone();
                for j in 0..cols {
                    let d = &f * &a[r][j];
                    a[i][j] -= d;
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    pivots
}

pub fn rank(a: &Matrix) -> usize {
    rref(&mut a.clone()).len()
}

/// Basis of {x : A x = 0}.
pub fn nullspace(a: &Matrix, ncols: usize) -> Vec<Vector> {
    let mut m = a.clone();
    let piv = rref(&mut m);
    let free: Vec<usize> = (0..ncols).filter(|c| !piv.contains(c)).collect();
    free.iter()
        .map(|&f| {
            let mut v = vec![Q::zero(); ncols];
            v[f] = Q::one();
            for (r, &p) in piv.iter().enumerate() {
                v[p] = -m[r][f].clone();
            }
            v
        })
        .collect()
}

/// Linearly independent subset spanning the same space, in echelon form.
pub fn span_basis(vs: &[Vector], n: usize) -> Vec<Vector> {
    if vs.is_empty() {
        return vec![];
    }
    let mut m: Matrix = vs.to_vec();
    let k = rref(&mut m).len();
    m.truncate(k);
    debug_assert!(m.iter().all(|r| r.len() == n));
    m
}

pub fn inverse(a: &Matrix) -> Option<Matrix> {
    let n = a.len();
    let mut m: Matrix = a
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = r.clone();
            row.extend((0..n).map(|j| if i == j { Q::one() } else { Q::zero() }));
            row
        })
        .collect();
    let piv = rref(&mut m);
    if piv.len() < n || piv.iter().enumerate().any(|(i, &p)| p != i) {
        return None;
    }
    Some(m.into_iter().map(|r| r[n..].to_vec()).collect())
}

/// Solves A x = b for some x, if consistent.
pub fn solve(a: &Matrix, b: &[Q]) -> Option<Vector> {
    let ncols = a.first().map_or(0, |r| r.len());
    let mut m: Matrix = a
        .iter()
        .zip(b)
        .map(|(r, bi)| {
            let mut row = r.clone();
            row.push(bi.clone());
            row
        })
        .collect();
    let piv = rref(&mut m);
    if piv.contains(&ncols) {
        return None;
    }
    let mut x = vec![Q::zero(); ncols];
    for (r, &p) in piv.iter().enumerate() {
        x[p] = m[r][ncols].clone();
    }
    Some(x)
}

/// Extends a basis `sub` of a subspace of Qⁿ by standard vectors to a basis of Qⁿ.
pub fn complete_basis(sub: &[Vector], n: usize) -> Vec<Vector> {
    let mut out = sub.to_vec();
    for i in 0..n {
        let mut e = vec![Q::zero(); n];
        e[i] = Q::one();
        let mut trial = out.clone();
        trial.push(e.clone());
        if rank(&trial) > out.len() {
            out.push(e);
        }
    }
    out
}

pub fn is_zero_matrix(a: &Matrix) -> bool {
    a.iter().all(|r| r.iter().all(|x| x.is_zero()))
}
