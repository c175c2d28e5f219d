//! Discretized Hessian of the Lyapunov function and its spectrum.

use num_complex::Complex;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::Grid;
use crate::linalg::{blocks, circ, circulant_columns, principal_angles};
use crate::model::{
    hessian_weights, lyapunov_gradient_raw, lyapunov_hessian_apply, lyapunov_symbol,
    nonlinear_potential, orbit_tangent, ModelParams,
};
use crate::profiles::{frame_field, Profile};
use crate::scalar::{lit, to_f64, Real};

/// Residual level (relative to `max(1, sup u)`) above which a profile is not
/// accepted as an equilibrium.
pub const EQUILIBRIUM_TOL: f64 = 1e-6;
pub const KER_TOL_REL: f64 = 1e-6;

/// L2 gradient of the Lyapunov function at the profile.
pub fn grad_l<T: Real>(prof: &Profile<T>) -> Field<T> {
    lyapunov_gradient_raw(&prof.model, &prof.xi, &prof.field)
}

/// Hessian of the Lyapunov function at an equilibrium.
///
/// `apply` acts in the lab frame of the profile; the dense matrix, spectra and
/// symmetry tangents live in the co-moving frame, where the profile is
/// de-boosted and de-phased. Both are unitarily equivalent.
#[derive(Debug, Clone)]
pub struct HessOp<T> {
    model: ModelParams<T>,
    xi: Vec<T>,
    field: Field<T>,
    frame_xi: Vec<T>,
    frame: Field<T>,
    imag_shift: T,
    tangent: Vec<Field<T>>,
}

pub fn assemble<T: Real>(prof: &Profile<T>) -> Result<HessOp<T>> {
    let res = prof.residual();
    let tol = lit::<T>(EQUILIBRIUM_TOL) * prof.field.sup_norm().max(T::one());
    if !(res <= tol) {
        return Err(Error::NotEquilibrium {
            residual: to_f64(res),
            tol: to_f64(tol),
        });
    }
    Ok(assemble_unchecked(prof))
}

/// Same as [`assemble`] without the stationarity check.
pub fn assemble_unchecked<T: Real>(prof: &Profile<T>) -> HessOp<T> {
    let (frame, frame_xi) = frame_field(prof);
    let tangent = prof
        .model
        .generators(prof.grid())
        .into_iter()
        .map(|g| orbit_tangent(g, &frame))
        .collect();
    HessOp {
        model: prof.model,
        xi: prof.xi.clone(),
        field: prof.field.clone(),
        frame_xi,
        frame,
        imag_shift: T::zero(),
        tangent,
    }
}

impl<T: Real> HessOp<T> {
    pub fn grid(&self) -> &Grid<T> {
        self.field.grid()
    }

    pub fn model(&self) -> &ModelParams<T> {
        &self.model
    }

    pub fn tag(&self) -> &'static str {
        self.model.tag()
    }

    pub fn n_components(&self) -> usize {
        self.field.n_components()
    }

    /// Real dimension `2 m N`.
    pub fn dimension(&self) -> usize {
        2 * self.n_components() * self.field.n_points()
    }

    /// Orbit tangent `i B_g u` for every generator, in the co-moving frame.
    pub fn symmetry_tangent(&self) -> &[Field<T>] {
        &self.tangent
    }

    pub fn frame_profile(&self) -> &Field<T> {
        &self.frame
    }

    pub fn frame_xi(&self) -> &[T] {
        &self.frame_xi
    }

    /// Operator with `s` added on the imaginary block (a deliberately broken
    /// variant used to exercise the kernel checks).
    pub fn with_imag_shift(mut self, s: T) -> Self {
        self.imag_shift = s;
        self
    }

    fn shift_imag(&self, v: &Field<T>, out: Field<T>) -> Field<T> {
        if self.imag_shift == T::zero() {
            return out;
        }
        let s = self.imag_shift;
        out.map(|c, j, z| z + Complex::new(T::zero(), s * v.component(c)[j].im))
    }

    /// Hessian action at the lab-frame profile.
    pub fn apply(&self, v: &Field<T>) -> Field<T> {
        let out = lyapunov_hessian_apply(&self.model, &self.xi, &self.field, v);
        self.shift_imag(v, out)
    }

    /// Hessian action in the co-moving frame.
    pub fn apply_frame(&self, v: &Field<T>) -> Field<T> {
        let out = lyapunov_hessian_apply(&self.model, &self.frame_xi, &self.frame, v);
        self.shift_imag(v, out)
    }

    /// Dense row-major matrix of the frame operator in the real layout of
    /// [`Field::to_real_vec`].
    pub fn dense(&self) -> Vec<T> {
        let grid = self.grid();
        let n = grid.n_points();
        let m = self.n_components();
        let dim = 2 * m * n;
        let mut a = vec![T::zero(); dim * dim];
        for c in 0..m {
            let (e, o) = circulant_columns(grid, |j| {
                lyapunov_symbol(&self.model, grid, &self.frame_xi, c, j)
            });
            let re = c * n;
            let im = (m + c) * n;
            for i in 0..n {
                for j in 0..n {
                    let ev = circ(&e, i, j);
                    let ov = circ(&o, i, j);
                    a[(re + i) * dim + re + j] = ev;
                    a[(im + i) * dim + im + j] = ev;
                    a[(re + i) * dim + im + j] = -ov;
                    a[(im + i) * dim + re + j] = ov;
                }
            }
        }
        let pot = nonlinear_potential(&self.model, &self.frame);
        let w = hessian_weights(&self.model, &self.frame);
        for j in 0..n {
            for c in 0..m {
                let uc = self.frame.component(c)[j];
                let rc = c * n + j;
                let ic = (m + c) * n + j;
                a[rc * dim + rc] -= pot[c][j];
                a[ic * dim + ic] -= pot[c][j] - self.imag_shift;
                for k in 0..m {
                    let uk = self.frame.component(k)[j];
                    let wk = w[c][k][j];
                    let rk = k * n + j;
                    let ik = (m + k) * n + j;
                    a[rc * dim + rk] -= wk * uc.re * uk.re;
                    a[rc * dim + ik] -= wk * uc.re * uk.im;
                    a[ic * dim + rk] -= wk * uc.im * uk.re;
                    a[ic * dim + ik] -= wk * uc.im * uk.im;
                }
            }
        }
        a
    }
}

/// Eigen-data of the frame Hessian.
#[derive(Debug, Clone, Serialize)]
pub struct SpectralReport<T> {
    /// Lowest `n_eigs` eigenvalues, ascending.
    pub eigenvalues: Vec<T>,
    pub n_neg: usize,
    pub dim_ker: usize,
    /// Smallest eigenvalue above `ker_tol`.
    pub gap_pos: Option<T>,
    pub ker_tol: T,
    pub spectral_radius: T,
    /// Eigenvalues with `ker_tol < |lambda| <= 3 ker_tol`.
    pub marginal: usize,
    pub dimension: usize,
    #[serde(skip)]
    pub kernel_vectors: Vec<Field<T>>,
}

struct Eig<T> {
    vals: Vec<T>,
    vecs: Vec<Vec<T>>,
}

/// Even/odd basis of a block closed under `x -> -x`, if the block commutes
/// with the reflection. Each basis vector is a list of `(index, coefficient)`.
fn parity_basis<T: Real>(
    dim: usize,
    a: &[T],
    idx: &[usize],
    n: usize,
) -> Option<Vec<Vec<Vec<(usize, T)>>>> {
    let mirror = |g: usize| (g / n) * n + (n - g % n) % n;
    let pos: std::collections::HashMap<usize, usize> =
        idx.iter().enumerate().map(|(r, &g)| (g, r)).collect();
    if idx.iter().any(|&g| !pos.contains_key(&mirror(g))) || idx.len() < 4 {
        return None;
    }
    let scale = idx
        .iter()
        .fold(T::zero(), |s, &i| s.max(a[i * dim + i].abs()))
        .max(T::one());
    let tol = scale * lit(1e-13);
    for &i in idx {
        for &j in idx {
            if (a[i * dim + j] - a[mirror(i) * dim + mirror(j)]).abs() > tol {
                return None;
            }
        }
    }
    let r = lit::<T>(0.5).sqrt();
    let mut even = Vec::new();
    let mut odd = Vec::new();
    for &g in idx {
        let h = mirror(g);
        if h == g {
            even.push(vec![(g, T::one())]);
        } else if g < h {
            even.push(vec![(g, r), (h, r)]);
            odd.push(vec![(g, r), (h, -r)]);
        }
    }
    Some(vec![even, odd])
}

fn project<T: Real>(dim: usize, a: &[T], basis: &[Vec<(usize, T)>]) -> Vec<T> {
    let k = basis.len();
    let mut s = vec![T::zero(); k * k];
    for (p, bp) in basis.iter().enumerate() {
        for (q, bq) in basis.iter().enumerate().skip(p) {
            let mut v = T::zero();
            for &(i, ci) in bp {
                for &(j, cj) in bq {
                    v += ci * cj * a[i * dim + j];
                }
            }
            s[p * k + q] = v;
            s[q * k + p] = v;
        }
    }
    s
}

fn dense_eigen<T: Real>(dim: usize, a: &[T], n: usize, vectors: bool) -> Eig<T> {
    let mut tasks: Vec<Vec<Vec<(usize, T)>>> = Vec::new();
    for idx in blocks(dim, a) {
        match parity_basis(dim, a, &idx, n) {
            Some(parts) => tasks.extend(parts.into_iter().filter(|p| !p.is_empty())),
            None => tasks.push(idx.iter().map(|&i| vec![(i, T::one())]).collect()),
        }
    }
    let parts: Vec<Eig<T>> = tasks
        .par_iter()
        .map(|basis| {
            let k = basis.len();
            let sub = project(dim, a, basis);
            if vectors {
                let (vals, vs) = T::sym_eig(k, &sub);
                let vecs = vs
                    .iter()
                    .map(|y| {
                        let mut x = vec![T::zero(); dim];
                        for (p, b) in basis.iter().enumerate() {
                            for &(i, ci) in b {
                                x[i] += ci * y[p];
                            }
                        }
                        x
                    })
                    .collect();
                Eig { vals, vecs }
            } else {
                Eig {
                    vals: T::sym_eigvals(k, &sub),
                    vecs: Vec::new(),
                }
            }
        })
        .collect();
    let mut pairs: Vec<(T, Option<Vec<T>>)> = Vec::with_capacity(dim);
    for e in parts {
        if vectors {
            pairs.extend(e.vals.into_iter().zip(e.vecs).map(|(v, x)| (v, Some(x))));
        } else {
            pairs.extend(e.vals.into_iter().map(|v| (v, None)));
        }
    }
    pairs.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap_or(std::cmp::Ordering::Equal));
    let vals = pairs.iter().map(|p| p.0).collect();
    let vecs = pairs.into_iter().filter_map(|p| p.1).collect();
    Eig { vals, vecs }
}

/// Every eigenvalue of the frame operator, ascending.
pub fn all_eigenvalues<T: Real>(op: &HessOp<T>) -> Vec<T> {
    let dim = op.dimension();
    dense_eigen(dim, &op.dense(), op.field.n_points(), false).vals
}

/// Default zero threshold: `1e-6` times the spectral radius.
pub fn default_ker_tol<T: Real>(eigs: &[T]) -> T {
    let r = eigs.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    r * lit(KER_TOL_REL)
}

/// Lowest `n_eigs` eigenvalues, Morse index, kernel and positive gap.
pub fn spectrum<T: Real>(
    op: &HessOp<T>,
    n_eigs: usize,
    ker_tol: Option<T>,
) -> Result<SpectralReport<T>> {
    let dim = op.dimension();
    let eig = dense_eigen(dim, &op.dense(), op.field.n_points(), true);
    if eig.vals.iter().any(|v| !v.is_finite()) {
        return Err(Error::Eigensolver("non-finite eigenvalue".into()));
    }
    let radius = eig.vals.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    let tol = ker_tol.unwrap_or_else(|| radius * lit(KER_TOL_REL));
    let three: T = lit(3.0);
    let mut n_neg = 0;
    let mut kernel_vectors = Vec::new();
    let mut marginal = 0;
    let mut gap_pos = None;
    let grid = op.field.grid_arc().clone();
    let m = op.n_components();
    for (v, x) in eig.vals.iter().zip(&eig.vecs) {
        let a = v.abs();
        if *v < -tol {
            n_neg += 1;
        } else if a <= tol {
            kernel_vectors.push(Field::from_real_vec(grid.clone(), m, x)?);
        } else if gap_pos.is_none() {
            gap_pos = Some(*v);
        }
        if a > tol && a <= three * tol {
            marginal += 1;
        }
    }
    Ok(SpectralReport {
        eigenvalues: eig.vals.iter().take(n_eigs).copied().collect(),
        n_neg,
        dim_ker: kernel_vectors.len(),
        gap_pos,
        ker_tol: tol,
        spectral_radius: radius,
        marginal,
        dimension: dim,
        kernel_vectors,
    })
}

/// Principal angles between the computed kernel and the orbit tangent, or
/// `None` when the dimensions differ or either family is degenerate.
pub fn kernel_angles<T: Real>(rep: &SpectralReport<T>, op: &HessOp<T>) -> Option<Vec<T>> {
    if rep.dim_ker != op.tangent.len() {
        return None;
    }
    let a: Vec<Vec<T>> = rep.kernel_vectors.iter().map(|f| f.to_real_vec()).collect();
    let b: Vec<Vec<T>> = op.tangent.iter().map(|f| f.to_real_vec()).collect();
    principal_angles(&a, &b)
}

pub fn kernel_matches_orbit<T: Real>(rep: &SpectralReport<T>, op: &HessOp<T>, tol: T) -> bool {
    match kernel_angles(rep, op) {
        Some(ang) => ang.iter().all(|&t| t <= tol),
        None => false,
    }
}
