//! Newton solver for real, even, co-moving profiles on a line grid.
//!
//! Unknowns are the values on the half line `x in [0, R]` (plus the wrap
//! node); the full profile is their mirror image. Restricting to even real
//! fields removes the phase and translation directions from the kernel of the
//! linearization, so the reduced Jacobian is invertible at a nondegenerate
//! equilibrium.

use std::sync::Arc;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::Grid;
use crate::linalg::circulant_columns;
use crate::model::{
    hessian_weights, lyapunov_gradient_raw, lyapunov_symbol, nonlinear_potential, ModelParams,
};
use crate::scalar::{lit, to_f64, Real};

pub(crate) struct NewtonOutcome<T> {
    pub u: Vec<Vec<T>>,
}

/// Half-line indices `N/2, .., N-1, 0` and their mirror partners.
pub(crate) fn half_indices(n: usize) -> Vec<(usize, usize)> {
    let mut v: Vec<usize> = (n / 2..n).collect();
    v.push(0);
    v.into_iter().map(|j| (j, (n - j) % n)).collect()
}

pub(crate) fn frame_xi<T: Real>(omega: &[T], grid: &Grid<T>, params: &ModelParams<T>) -> Vec<T> {
    let mut xi = omega.to_vec();
    xi.resize(params.group_dim(grid), T::zero());
    xi
}

fn residual<T: Real>(
    params: &ModelParams<T>,
    grid: &Arc<Grid<T>>,
    xi: &[T],
    u: &[Vec<T>],
) -> Vec<Vec<T>> {
    let f = Field::from_parts(
        grid.clone(),
        u.iter()
            .map(|c| c.iter().map(|&x| Complex::new(x, T::zero())).collect())
            .collect(),
    );
    let g = lyapunov_gradient_raw(params, xi, &f);
    g.components()
        .iter()
        .map(|c| c.iter().map(|z| z.re).collect())
        .collect()
}

fn sup<T: Real>(r: &[Vec<T>]) -> T {
    r.iter().flatten().fold(T::zero(), |m, x| m.max(x.abs()))
}

/// Dense real Jacobian restricted to even fields, in half-line coordinates.
pub(crate) fn reduced_jacobian<T: Real>(
    params: &ModelParams<T>,
    grid: &Grid<T>,
    xi: &[T],
    u: &[Vec<T>],
) -> (usize, Vec<T>) {
    let n = grid.n_points();
    let m = u.len();
    let half = half_indices(n);
    let h = half.len();
    let dim = m * h;
    let cols: Vec<Vec<T>> = (0..m)
        .map(|c| circulant_columns(grid, |j| lyapunov_symbol(params, grid, xi, c, j)).0)
        .collect();
    let f = Field::from_parts(
        Arc::new(grid.clone()),
        u.iter()
            .map(|c| c.iter().map(|&x| Complex::new(x, T::zero())).collect())
            .collect(),
    );
    let pot = nonlinear_potential(params, &f);
    let w = hessian_weights(params, &f);
    let mut jac = vec![T::zero(); dim * dim];
    for c in 0..m {
        for (i, &(a, _)) in half.iter().enumerate() {
            let row = (c * h + i) * dim;
            for (k, &(b, bm)) in half.iter().enumerate() {
                let mut s = cols[c][(a + n - b) % n];
                if bm != b {
                    s += cols[c][(a + n - bm) % n];
                }
                jac[row + c * h + k] += s;
            }
            // local terms sit on the diagonal in space
            for c2 in 0..m {
                let mut s = -w[c][c2][a] * u[c2][a] * u[c][a];
                if c2 == c {
                    s -= pot[c][a];
                }
                jac[row + c2 * h + i] += s;
            }
        }
    }
    (dim, jac)
}

/// Smallest |eigenvalue| of the reduced Jacobian after symmetrization by the
/// mirror multiplicities, together with the largest |eigenvalue|.
pub(crate) fn reduced_extremes<T: Real>(
    params: &ModelParams<T>,
    grid: &Grid<T>,
    xi: &[T],
    u: &[Vec<T>],
) -> (T, T) {
    let (dim, jac) = reduced_jacobian(params, grid, xi, u);
    let n = grid.n_points();
    let half = half_indices(n);
    let h = half.len();
    let wt: Vec<T> = (0..dim)
        .map(|r| {
            let (a, b) = half[r % h];
            if a == b {
                T::one()
            } else {
                lit(2.0)
            }
        })
        .collect();
    let mut s = vec![T::zero(); dim * dim];
    for i in 0..dim {
        for j in 0..dim {
            s[i * dim + j] = jac[i * dim + j] * (wt[i] / wt[j]).sqrt();
        }
    }
    // symmetrize away roundoff
    let half_t: T = lit(0.5);
    for i in 0..dim {
        for j in 0..i {
            let v = half_t * (s[i * dim + j] + s[j * dim + i]);
            s[i * dim + j] = v;
            s[j * dim + i] = v;
        }
    }
    let vals = T::sym_eigvals(dim, &s);
    let lo = vals.iter().fold(T::infinity(), |m, v| m.min(v.abs()));
    let hi = vals.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    (lo, hi)
}

pub(crate) fn solve_even_real<T: Real>(
    params: &ModelParams<T>,
    grid: &Arc<Grid<T>>,
    omega: &[T],
    guess: Vec<Vec<T>>,
    tol: T,
    max_iter: usize,
) -> Result<NewtonOutcome<T>> {
    let n = grid.n_points();
    let half = half_indices(n);
    let h = half.len();
    let xi = frame_xi(omega, grid, params);
    let mut u: Vec<Vec<T>> = guess
        .into_iter()
        .map(|c| {
            let mut e = c.clone();
            for &(a, b) in &half {
                let v = (c[a] + c[b]) * lit(0.5);
                e[a] = v;
                e[b] = v;
            }
            e
        })
        .collect();
    let m = u.len();
    let mut r = residual(params, grid, &xi, &u);
    let mut res = sup(&r);
    for it in 0..max_iter {
        if !res.is_finite() {
            break;
        }
        if res <= tol {
            return Ok(NewtonOutcome { u });
        }
        let (dim, jac) = reduced_jacobian(params, grid, &xi, &u);
        let rhs: Vec<T> = (0..dim).map(|k| -r[k / h][half[k % h].0]).collect();
        let step = T::lu_solve(dim, &jac, &rhs)
            .ok_or_else(|| Error::SingularSolve("reduced Newton Jacobian".into()))?;
        let mut t = T::one();
        let mut accepted = false;
        for _ in 0..12 {
            let mut trial = u.clone();
            for c in 0..m {
                for (i, &(a, b)) in half.iter().enumerate() {
                    let v = u[c][a] + t * step[c * h + i];
                    trial[c][a] = v;
                    trial[c][b] = v;
                }
            }
            let rt = residual(params, grid, &xi, &trial);
            let rest = sup(&rt);
            if rest < res {
                u = trial;
                r = rt;
                res = rest;
                accepted = true;
                break;
            }
            t *= lit(0.5);
        }
        if !accepted {
            return Err(Error::NewtonFailed {
                iterations: it + 1,
                residual: to_f64(res),
            });
        }
    }
    if res <= tol {
        return Ok(NewtonOutcome { u });
    }
    Err(Error::NewtonFailed {
        iterations: max_iter,
        residual: to_f64(res),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_index_pairs() {
        let h = half_indices(8);
        assert_eq!(h, vec![(4, 4), (5, 3), (6, 2), (7, 1), (0, 0)]);
    }

    #[test]
    fn cubic_soliton_converges_from_perturbed_guess() {
        let grid = Arc::new(Grid::line(20.0, 256).unwrap());
        let guess: Vec<f64> = grid
            .nodes()
            .iter()
            .map(|&x: &f64| 1.3 / (0.9 * x).cosh())
            .collect();
        let out = solve_even_real(
            &ModelParams::single(3.0),
            &grid,
            &[-1.0],
            vec![guess],
            1e-10,
            40,
        )
        .unwrap();
        let u0 = out.u[0][128];
        assert!((u0 - 2f64.sqrt()).abs() < 1e-7, "u(0) = {u0}");
    }
}
