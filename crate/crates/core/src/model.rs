//! Model definitions: energies, momentum maps and the Lyapunov function
//! `L_xi = H - xi . F` with its gradient and Hessian action.

use num_complex::Complex;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::field::{apply_symbol, inner_raw, Field};
use crate::grid::{Grid, GridKind};
use crate::scalar::{lit, Real};

/// Cubic two-component coupling
/// `i u_t + beta u_xx + (alpha|u1|^2 + delta|u2|^2) u1 = 0` (and symmetric),
/// with the plane-wave offset `k` entering as `(d/dx +- ik)` on the torus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoupledParams<T> {
    pub alpha: T,
    pub gamma: T,
    pub delta: T,
    pub beta: T,
    pub k: T,
}

impl<T: Real> CoupledParams<T> {
    pub fn new(alpha: T, gamma: T, delta: T) -> Self {
        Self {
            alpha,
            gamma,
            delta,
            beta: T::one(),
            k: T::zero(),
        }
    }

    pub fn with_beta(mut self, beta: T) -> Self {
        self.beta = beta;
        self
    }

    pub fn with_k(mut self, k: T) -> Self {
        self.k = k;
        self
    }

    /// Coupling matrix `[[alpha, delta], [delta, gamma]]`.
    pub fn matrix(&self) -> [[T; 2]; 2] {
        [[self.alpha, self.delta], [self.delta, self.gamma]]
    }

    /// `alpha gamma - delta^2`.
    pub fn det(&self) -> T {
        self.alpha * self.gamma - self.delta * self.delta
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelParams<T> {
    /// `i u_t + u_xx + |u|^(p-1) u = 0`; `d` only enters the symbolic criteria.
    SingleNls {
        p: T,
        d: usize,
    },
    Coupled(CoupledParams<T>),
}

/// Infinitesimal generator of the symmetry group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Generator {
    /// Phase rotation of one component; conjugate quantity is its mass.
    Phase(usize),
    /// Spatial translation; conjugate quantity is the linear momentum.
    Translation,
}

impl<T: Real> ModelParams<T> {
    pub fn single(p: T) -> Self {
        Self::SingleNls { p, d: 1 }
    }

    pub fn n_components(&self) -> usize {
        match self {
            Self::SingleNls { .. } => 1,
            Self::Coupled(_) => 2,
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Self::SingleNls { .. } => "single_nls",
            Self::Coupled(_) => "coupled",
        }
    }

    pub fn validate(&self, grid: &Grid<T>) -> Result<()> {
        match *self {
            Self::SingleNls { p, d } => {
                if !(p > T::one()) || !p.is_finite() {
                    return invalid("single NLS needs p > 1");
                }
                if !(1..=3).contains(&d) {
                    return invalid("dimension d must be 1, 2 or 3");
                }
                if grid.kind() != GridKind::Line {
                    return invalid("single NLS profiles live on a line grid");
                }
            }
            Self::Coupled(c) => {
                if !(c.beta > T::zero()) {
                    return invalid("beta must be positive");
                }
                match grid.kind() {
                    GridKind::Line => {
                        if c.k != T::zero() {
                            return invalid("wavenumber offset k is only meaningful on a torus");
                        }
                    }
                    GridKind::Periodic => {
                        let units = c.k * grid.length() / T::TAU();
                        if (units - units.round()).abs() > lit(1e-9) {
                            return invalid("k must lie in (2 pi / L) Z on the torus");
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Generators in the order used for `xi` and `F`.
    pub fn generators(&self, grid: &Grid<T>) -> Vec<Generator> {
        let mut g: Vec<Generator> = (0..self.n_components()).map(Generator::Phase).collect();
        if grid.kind() == GridKind::Line {
            g.push(Generator::Translation);
        }
        g
    }

    pub fn group_dim(&self, grid: &Grid<T>) -> usize {
        self.generators(grid).len()
    }
}

/// Sign of the `k` shift for component `c`: `+` for the first, `-` for the second.
fn k_sign<T: Real>(c: usize) -> T {
    if c == 0 {
        T::one()
    } else {
        -T::one()
    }
}

/// Real symbol of the kinetic operator `K` for component `c` at transform index `j`.
pub fn kinetic_symbol<T: Real>(params: &ModelParams<T>, grid: &Grid<T>, c: usize, j: usize) -> T {
    let q = grid.wavenumbers()[j];
    match params {
        ModelParams::SingleNls { .. } => q * q,
        ModelParams::Coupled(cp) => {
            let qo = grid.odd_wavenumbers()[j];
            let two: T = lit(2.0);
            cp.beta * (q * q + cp.k * cp.k + two * k_sign::<T>(c) * cp.k * qo)
        }
    }
}

/// Symbol of the generator operator `B_g` (`F_g = 1/2 <u, B_g u>`).
pub fn generator_symbol<T: Real>(g: Generator, grid: &Grid<T>, c: usize, j: usize) -> T {
    match g {
        Generator::Phase(k) => {
            if k == c {
                T::one()
            } else {
                T::zero()
            }
        }
        Generator::Translation => grid.odd_wavenumbers()[j],
    }
}

/// Symbol of the linear part of the Lyapunov gradient, `K - xi . B`.
pub fn lyapunov_symbol<T: Real>(
    params: &ModelParams<T>,
    grid: &Grid<T>,
    xi: &[T],
    c: usize,
    j: usize,
) -> T {
    let gens = params.generators(grid);
    let mut s = kinetic_symbol(params, grid, c, j);
    for (g, &x) in gens.iter().zip(xi) {
        s -= x * generator_symbol(*g, grid, c, j);
    }
    s
}

pub(crate) fn check_shape<T: Real>(params: &ModelParams<T>, u: &Field<T>) -> Result<()> {
    if u.n_components() != params.n_components() {
        return Err(Error::ComponentMismatch {
            expected: params.n_components(),
            got: u.n_components(),
        });
    }
    Ok(())
}

fn check_xi<T: Real>(params: &ModelParams<T>, grid: &Grid<T>, xi: &[T]) -> Result<()> {
    let m = params.group_dim(grid);
    if xi.len() != m {
        return invalid(format!(
            "xi has length {}, group dimension is {m}",
            xi.len()
        ));
    }
    Ok(())
}

/// `B_g u`.
pub fn apply_generator<T: Real>(g: Generator, u: &Field<T>) -> Field<T> {
    match g {
        Generator::Phase(c) => u.only_component(c),
        Generator::Translation => {
            let q = u.grid().odd_wavenumbers().to_vec();
            apply_symbol(u, |_, j| Complex::new(q[j], T::zero()))
        }
    }
}

/// Tangent to the group orbit `i B_g u`: `i u_c` for phases, `u_x` for translation.
pub fn orbit_tangent<T: Real>(g: Generator, u: &Field<T>) -> Field<T> {
    apply_generator(g, u).times_i()
}

/// Pointwise nonlinear potential `N_c(x)` with `grad P = N u`.
pub fn nonlinear_potential<T: Real>(params: &ModelParams<T>, u: &Field<T>) -> Vec<Vec<T>> {
    let n = u.n_points();
    match *params {
        ModelParams::SingleNls { p, .. } => {
            let e = p - T::one();
            vec![u.component(0).iter().map(|z| z.norm().powf(e)).collect()]
        }
        ModelParams::Coupled(cp) => {
            let a = cp.matrix();
            (0..2)
                .map(|c| {
                    (0..n)
                        .map(|j| {
                            a[c][0] * u.component(0)[j].norm_sqr()
                                + a[c][1] * u.component(1)[j].norm_sqr()
                        })
                        .collect()
                })
                .collect()
        }
    }
}

/// Nonlinear part of the energy, `H = 1/2 <u, K u> - P(u)`.
pub fn potential_energy<T: Real>(params: &ModelParams<T>, u: &Field<T>) -> T {
    let h = u.grid().spacing();
    match *params {
        ModelParams::SingleNls { p, .. } => {
            let s = u
                .component(0)
                .iter()
                .fold(T::zero(), |s, z| s + z.norm().powf(p + T::one()));
            s * h / (p + T::one())
        }
        ModelParams::Coupled(cp) => {
            let a = cp.matrix();
            let mut s = T::zero();
            for j in 0..u.n_points() {
                let r = [u.component(0)[j].norm_sqr(), u.component(1)[j].norm_sqr()];
                for c in 0..2 {
                    for k in 0..2 {
                        s += a[c][k] * r[c] * r[k];
                    }
                }
            }
            s * h / lit(4.0)
        }
    }
}

/// Energy `H` and momentum map `F` in generator order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Invariants<T> {
    pub energy: T,
    pub f: Vec<T>,
}

pub fn kinetic_apply<T: Real>(params: &ModelParams<T>, u: &Field<T>) -> Field<T> {
    let grid = u.grid().clone();
    apply_symbol(u, |c, j| {
        Complex::new(kinetic_symbol(params, &grid, c, j), T::zero())
    })
}

pub fn energy<T: Real>(params: &ModelParams<T>, u: &Field<T>) -> T {
    let ku = kinetic_apply(params, u);
    inner_raw(u, &ku) / lit(2.0) - potential_energy(params, u)
}

pub fn momentum_map<T: Real>(params: &ModelParams<T>, u: &Field<T>) -> Vec<T> {
    params
        .generators(u.grid())
        .into_iter()
        .map(|g| inner_raw(u, &apply_generator(g, u)) / lit(2.0))
        .collect()
}

pub fn invariants_of<T: Real>(u: &Field<T>, params: &ModelParams<T>) -> Result<Invariants<T>> {
    check_shape(params, u)?;
    params.validate(u.grid())?;
    Ok(Invariants {
        energy: energy(params, u),
        f: momentum_map(params, u),
    })
}

/// `L_xi(u) = H(u) - xi . F(u)`.
pub fn lyapunov_value<T: Real>(params: &ModelParams<T>, xi: &[T], u: &Field<T>) -> T {
    let f = momentum_map(params, u);
    f.iter()
        .zip(xi)
        .fold(energy(params, u), |s, (a, b)| s - *a * *b)
}

/// Real L2 gradient of `L_xi` at `u` (no shape checks).
pub(crate) fn lyapunov_gradient_raw<T: Real>(
    params: &ModelParams<T>,
    xi: &[T],
    u: &Field<T>,
) -> Field<T> {
    let grid = u.grid().clone();
    let lin = apply_symbol(u, |c, j| {
        Complex::new(lyapunov_symbol(params, &grid, xi, c, j), T::zero())
    });
    let pot = nonlinear_potential(params, u);
    lin.map(|c, j, z| z - u.component(c)[j] * pot[c][j])
}

pub fn lyapunov_gradient<T: Real>(
    params: &ModelParams<T>,
    xi: &[T],
    u: &Field<T>,
) -> Result<Field<T>> {
    check_shape(params, u)?;
    check_xi(params, u.grid(), xi)?;
    Ok(lyapunov_gradient_raw(params, xi, u))
}

/// Weight `W_ck(x)` of the `Re(conj(u_k) v_k) u_c` term in the Hessian.
pub(crate) fn hessian_weights<T: Real>(params: &ModelParams<T>, u: &Field<T>) -> Vec<Vec<Vec<T>>> {
    match *params {
        ModelParams::SingleNls { p, .. } => {
            let e = p - T::one();
            let w = u
                .component(0)
                .iter()
                .map(|z| {
                    let r2 = z.norm_sqr();
                    if r2 > T::zero() {
                        e * z.norm().powf(e) / r2
                    } else {
                        T::zero()
                    }
                })
                .collect();
            vec![vec![w]]
        }
        ModelParams::Coupled(cp) => {
            let a = cp.matrix();
            let n = u.n_points();
            let two: T = lit(2.0);
            (0..2)
                .map(|c| (0..2).map(|k| vec![two * a[c][k]; n]).collect())
                .collect()
        }
    }
}

/// Pointwise (local) part of the Hessian action: `-N v - sum_k W Re(conj(u_k) v_k) u`.
pub(crate) fn local_hessian_apply<T: Real>(
    params: &ModelParams<T>,
    u: &Field<T>,
    v: &Field<T>,
) -> Field<T> {
    let pot = nonlinear_potential(params, u);
    let w = hessian_weights(params, u);
    let m = u.n_components();
    v.map(|c, j, z| {
        let mut out = -z * pot[c][j];
        for k in 0..m {
            let uk = u.component(k)[j];
            let vk = v.component(k)[j];
            let re = uk.re * vk.re + uk.im * vk.im;
            out -= u.component(c)[j] * (w[c][k][j] * re);
        }
        out
    })
}

/// Action of the Hessian of `L_xi` at `u` on `v`.
pub(crate) fn lyapunov_hessian_apply<T: Real>(
    params: &ModelParams<T>,
    xi: &[T],
    u: &Field<T>,
    v: &Field<T>,
) -> Field<T> {
    let grid = u.grid().clone();
    let lin = apply_symbol(v, |c, j| {
        Complex::new(lyapunov_symbol(params, &grid, xi, c, j), T::zero())
    });
    lin.add(&local_hessian_apply(params, u, v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn line() -> Arc<Grid<f64>> {
        Arc::new(Grid::line(20.0, 512).unwrap())
    }

    #[test]
    fn sech_mass() {
        let u = Field::from_fn(line(), 1, |_, x| Complex::new(1.0 / x.cosh(), 0.0));
        let inv = invariants_of(&u, &ModelParams::single(3.0)).unwrap();
        assert!((inv.f[0] - 1.0).abs() < 1e-10);
        assert!(inv.f[1].abs() < 1e-14);
    }

    #[test]
    fn soliton_mass() {
        let u = Field::from_fn(line(), 1, |_, x| Complex::new(2f64.sqrt() / x.cosh(), 0.0));
        let inv = invariants_of(&u, &ModelParams::single(3.0)).unwrap();
        assert!((inv.f[0] - 2.0).abs() < 1e-10);
        // H = 1/2 int u'^2 - 1/4 int u^4 = 2/3 - 4/3 for sqrt2 sech
        assert!((inv.energy + 2.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn plane_wave_masses() {
        let g = Arc::new(Grid::periodic(2.0 * PI, 16).unwrap());
        let u = Field::from_fn(g, 2, |_, _| Complex::new(1.0, 0.0));
        let params = ModelParams::Coupled(CoupledParams::new(-1.0, -1.0, -0.5));
        let inv = invariants_of(&u, &params).unwrap();
        assert_eq!(inv.f.len(), 2);
        assert!((inv.f[0] - PI).abs() < 1e-13);
        assert!((inv.f[1] - PI).abs() < 1e-13);
    }

    #[test]
    fn covariant_kinetic_energy() {
        // (d/dx + ik) annihilates e^{-ikx}
        let g = Arc::new(Grid::periodic(2.0 * PI, 16).unwrap());
        let params = ModelParams::Coupled(CoupledParams::new(0.0, 0.0, 0.0).with_k(2.0));
        let u = Field::from_fn(g, 2, |c, x| {
            let s = if c == 0 { -2.0 } else { 2.0 };
            Complex::from_polar(1.0, s * x)
        });
        assert!(energy(&params, &u).abs() < 1e-12);
    }

    #[test]
    fn shape_errors() {
        let u = Field::zeros(line(), 2);
        assert!(invariants_of(&u, &ModelParams::single(3.0)).is_err());
        let g = Arc::new(Grid::periodic(2.0 * PI, 16).unwrap());
        let bad_k = ModelParams::Coupled(CoupledParams::new(1.0, 1.0, 0.0).with_k(0.5));
        assert!(bad_k.validate(&g).is_err());
    }

    #[test]
    fn gradient_of_zero_is_zero() {
        let u = Field::zeros(line(), 1);
        let g = lyapunov_gradient(&ModelParams::single(3.0), &[-1.0, 0.0], &u).unwrap();
        assert_eq!(g.sup_norm(), 0.0);
    }
}
