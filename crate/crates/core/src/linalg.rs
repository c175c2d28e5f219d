//! Small dense helpers on row-major `Vec<T>` matrices.

use num_complex::Complex;
use serde::Serialize;

use crate::grid::Grid;
use crate::scalar::{lit, Real};

/// First columns of the real circulants `E` and `O` such that the operator
/// with real symbol `sym` acts on `v = a + ib` as `(E a - O b) + i(O a + E b)`.
/// `E` is symmetric and `O` antisymmetric by construction.
pub fn circulant_columns<T: Real>(grid: &Grid<T>, sym: impl Fn(usize) -> T) -> (Vec<T>, Vec<T>) {
    let n = grid.n_points();
    let mut buf: Vec<Complex<T>> = (0..n).map(|j| Complex::new(sym(j), T::zero())).collect();
    T::ifft(&mut buf);
    let half: T = lit(0.5);
    let mut e = vec![T::zero(); n];
    let mut o = vec![T::zero(); n];
    for j in 0..n {
        let r = (n - j) % n;
        e[j] = half * (buf[j].re + buf[r].re);
        o[j] = half * (buf[j].im - buf[r].im);
    }
    (e, o)
}

/// Entry `(i, j)` of the circulant with first column `col`.
#[inline]
pub fn circ<T: Copy>(col: &[T], i: usize, j: usize) -> T {
    let n = col.len();
    col[(i + n - j) % n]
}

pub fn mat_vec<T: Real>(n: usize, a: &[T], x: &[T]) -> Vec<T> {
    (0..n)
        .map(|i| {
            a[i * n..(i + 1) * n]
                .iter()
                .zip(x)
                .fold(T::zero(), |s, (p, q)| s + *p * *q)
        })
        .collect()
}

pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |s, (x, y)| s + *x * *y)
}

pub fn norm<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

/// Largest absolute asymmetry `|a_ij - a_ji|`.
pub fn asymmetry<T: Real>(n: usize, a: &[T]) -> T {
    let mut m = T::zero();
    for i in 0..n {
        for j in 0..i {
            m = m.max((a[i * n + j] - a[j * n + i]).abs());
        }
    }
    m
}

pub fn symmetrize<T: Real>(n: usize, a: &[T]) -> Vec<T> {
    let half: T = lit(0.5);
    let mut s = a.to_vec();
    for i in 0..n {
        for j in 0..n {
            s[i * n + j] = half * (a[i * n + j] + a[j * n + i]);
        }
    }
    s
}

/// Orthonormalize by modified Gram-Schmidt, dropping vectors whose residual
/// norm falls below `drop_tol` times their original norm.
pub fn orthonormalize<T: Real>(vs: &[Vec<T>], drop_tol: T) -> Vec<Vec<T>> {
    let mut out: Vec<Vec<T>> = Vec::new();
    for v in vs {
        let n0 = norm(v);
        if n0 == T::zero() {
            continue;
        }
        let mut w = v.clone();
        for _ in 0..2 {
            for q in &out {
                let c = dot(q, &w);
                for (wi, qi) in w.iter_mut().zip(q) {
                    *wi -= c * *qi;
                }
            }
        }
        let nw = norm(&w);
        if nw > drop_tol * n0 {
            out.push(w.into_iter().map(|x| x / nw).collect());
        }
    }
    out
}

/// Principal angles (radians, ascending) between the spans of two families of
/// vectors. Returns `None` if either family is rank deficient.
pub fn principal_angles<T: Real>(a: &[Vec<T>], b: &[Vec<T>]) -> Option<Vec<T>> {
    let tol: T = lit(1e-10);
    let qa = orthonormalize(a, tol);
    let qb = orthonormalize(b, tol);
    if qa.len() != a.len() || qb.len() != b.len() || qa.is_empty() || qb.is_empty() {
        return None;
    }
    let k = qb.len();
    // G = C^T C with C = Qa^T Qb; eigenvalues are the squared cosines.
    let c: Vec<Vec<T>> = qa
        .iter()
        .map(|x| qb.iter().map(|y| dot(x, y)).collect())
        .collect();
    let mut g = vec![T::zero(); k * k];
    for i in 0..k {
        for j in 0..k {
            g[i * k + j] = c.iter().fold(T::zero(), |s, row| s + row[i] * row[j]);
        }
    }
    let vals = T::sym_eigvals(k, &g);
    let mut angles: Vec<T> = vals
        .iter()
        .map(|&v| v.max(T::zero()).min(T::one()).sqrt().acos())
        .collect();
    angles.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
    Some(angles)
}

/// Inertia `(p, z, n)` of a symmetric matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Signature {
    pub p: usize,
    pub z: usize,
    pub n: usize,
}

/// Classify eigenvalues with zero threshold `tol`; also counts values within
/// `3 tol` of the threshold as marginal.
pub fn classify<T: Real>(vals: &[T], tol: T) -> (Signature, usize) {
    let three: T = lit(3.0);
    let mut s = Signature { p: 0, z: 0, n: 0 };
    let mut marginal = 0;
    for &v in vals {
        if v > tol {
            s.p += 1;
        } else if v < -tol {
            s.n += 1;
        } else {
            s.z += 1;
        }
        let a = v.abs();
        if a > tol && a <= three * tol {
            marginal += 1;
        }
    }
    (s, marginal)
}

/// Connected components of the sparsity graph of a dense symmetric matrix.
pub fn blocks<T: Real>(n: usize, a: &[T]) -> Vec<Vec<usize>> {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for i in 0..n {
        for j in 0..i {
            if a[i * n + j] != T::zero() || a[j * n + i] != T::zero() {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        if slot[r] == usize::MAX {
            slot[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[r]].push(i);
    }
    groups
}

/// Principal submatrix on `idx`.
pub fn submatrix<T: Real>(n: usize, a: &[T], idx: &[usize]) -> Vec<T> {
    let k = idx.len();
    let mut s = vec![T::zero(); k * k];
    for (r, &i) in idx.iter().enumerate() {
        for (c, &j) in idx.iter().enumerate() {
            s[r * k + c] = a[i * n + j];
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn circulant_matches_second_derivative() {
        let g = Grid::<f64>::periodic(2.0 * PI, 16).unwrap();
        let q = g.wavenumbers().to_vec();
        let (e, o) = circulant_columns(&g, |j| q[j] * q[j]);
        assert!(o.iter().all(|x| x.abs() < 1e-15));
        // -d2 applied to sin x gives sin x
        let x = g.nodes();
        let mut m = vec![0.0; 256];
        for i in 0..16 {
            for j in 0..16 {
                m[i * 16 + j] = circ(&e, i, j);
            }
        }
        let v: Vec<f64> = x.iter().map(|t| t.sin()).collect();
        let r = mat_vec(16, &m, &v);
        for (a, b) in r.iter().zip(&v) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn odd_symbol_gives_antisymmetric_part() {
        let g = Grid::<f64>::periodic(2.0 * PI, 8).unwrap();
        let q = g.odd_wavenumbers().to_vec();
        let (e, o) = circulant_columns(&g, |j| q[j]);
        assert!(e.iter().all(|x| x.abs() < 1e-15));
        for j in 1..8 {
            assert!((o[j] + o[8 - j]).abs() < 1e-15);
        }
    }

    #[test]
    fn angles_of_rotated_planes() {
        let a = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]];
        let t: f64 = 0.3;
        let b = vec![vec![1.0, 0.0, 0.0], vec![0.0, t.cos(), t.sin()]];
        let ang = principal_angles(&a, &b).unwrap();
        assert!(ang[0].abs() < 1e-7);
        assert!((ang[1] - t).abs() < 1e-12);
        assert!(principal_angles(&a, &[vec![0.0; 3]]).is_none());
    }

    #[test]
    fn classify_counts_and_margins() {
        let (s, m) = classify(&[-2.0, 1e-9, 2e-6, 5.0], 1e-6);
        assert_eq!(s, Signature { p: 2, z: 1, n: 1 });
        assert_eq!(m, 1);
    }

    #[test]
    fn block_detection() {
        let a = vec![
            1.0, 0.0, 2.0, 0.0, //
            0.0, 1.0, 0.0, 0.0, //
            2.0, 0.0, 1.0, 0.0, //
            0.0, 0.0, 0.0, 3.0,
        ];
        let b = blocks(4, &a);
        assert_eq!(b, vec![vec![0, 2], vec![1], vec![3]]);
        assert_eq!(submatrix(4, &a, &b[0]), vec![1.0, 2.0, 2.0, 1.0]);
    }
}
