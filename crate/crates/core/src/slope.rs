//! The slope matrix `D^2 W = -D F_hat` and its signature.

use num_complex::Complex;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::field::{apply_symbol, Field};
use crate::grid::{Grid, GridKind};
use crate::linalg::{
    asymmetry, circulant_columns, classify, orthonormalize, symmetrize, Signature,
};
use crate::model::{invariants_of, CoupledParams, ModelParams};
use crate::newton::half_indices;
use crate::profiles::{
    closed_form_mass, comoving_frame, coupled_zeta_sq, Family, Profile, ProfileKind,
};
use crate::scalar::{lit, Real};

pub const Z_TOL_REL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SlopeMethod {
    ClosedForm,
    FiniteDifference,
}

#[derive(Debug, Clone, Serialize)]
pub struct Restricted<T> {
    /// Basis vectors of the subalgebra, one per row.
    pub basis: Vec<Vec<T>>,
    pub d2w_tilde: Vec<T>,
    pub signature: Signature,
}

#[derive(Debug, Clone, Serialize)]
pub struct SlopeReport<T> {
    pub m: usize,
    /// Row-major, symmetrized.
    pub d2w: Vec<T>,
    pub eigenvalues: Vec<T>,
    pub signature: Signature,
    /// Eigenvalues within `3 z_tol` of the zero threshold.
    pub marginal: usize,
    pub z_tol: T,
    /// Largest `|a_ij - a_ji|` before symmetrization.
    pub asymmetry: T,
    /// `max|lambda| / min|lambda|` when non-degenerate.
    pub condition: Option<T>,
    pub method: SlopeMethod,
    pub restricted: Option<Restricted<T>>,
}

impl<T: Real> SlopeReport<T> {
    fn from_matrix(m: usize, raw: Vec<T>, method: SlopeMethod) -> Self {
        let asym = asymmetry(m, &raw);
        let d2w = symmetrize(m, &raw);
        let eigenvalues = T::sym_eigvals(m, &d2w);
        let norm = eigenvalues.iter().fold(T::zero(), |s, v| s.max(v.abs()));
        let z_tol = norm * lit(Z_TOL_REL);
        let (signature, marginal) = classify(&eigenvalues, z_tol);
        let lo = eigenvalues
            .iter()
            .fold(T::infinity(), |s, v| s.min(v.abs()));
        let condition = if signature.z == 0 && lo > T::zero() {
            Some(norm / lo)
        } else {
            None
        };
        Self {
            m,
            d2w,
            eigenvalues,
            signature,
            marginal,
            z_tol,
            asymmetry: asym,
            condition,
            method,
            restricted: None,
        }
    }

    pub fn entry(&self, i: usize, j: usize) -> T {
        self.d2w[i * self.m + j]
    }

    /// Attach `B^T D^2W B` for the given basis.
    pub fn with_restriction(mut self, basis: &[Vec<T>]) -> Result<Self> {
        self.restricted = Some(restrict(self.m, &self.d2w, basis)?);
        Ok(self)
    }
}

/// `B^T A B` with its signature; the basis must have full rank.
pub fn restrict<T: Real>(m: usize, a: &[T], basis: &[Vec<T>]) -> Result<Restricted<T>> {
    if basis.is_empty() || basis.iter().any(|b| b.len() != m) {
        return invalid("subalgebra basis must be non-empty with vectors of length m");
    }
    let q = orthonormalize(basis, lit(1e-10));
    if q.len() != basis.len() {
        return invalid("subalgebra basis is rank deficient");
    }
    let k = basis.len();
    let mut t = vec![T::zero(); k * k];
    for i in 0..k {
        for j in 0..k {
            let mut s = T::zero();
            for r in 0..m {
                for c in 0..m {
                    s += basis[i][r] * a[r * m + c] * basis[j][c];
                }
            }
            t[i * k + j] = s;
        }
    }
    let vals = T::sym_eigvals(k, &t);
    let norm = vals.iter().fold(T::zero(), |s, v| s.max(v.abs()));
    let (signature, _) = classify(&vals, norm * lit(Z_TOL_REL));
    Ok(Restricted {
        basis: basis.to_vec(),
        d2w_tilde: t,
        signature,
    })
}

/// `F(u_xi)` for the family member at `xi`.
pub fn fhat<T: Real>(fam: &Family<T>, xi: &[T]) -> Result<Vec<T>> {
    let prof = fam.solve(xi)?;
    Ok(invariants_of(&prof.field, &prof.model)?.f)
}

/// Centered-difference Jacobian `D_xi F_hat` (row `a`, column `b` is `dF_a/dxi_b`).
pub fn fhat_jacobian<T: Real>(fam: &Family<T>, xi: &[T], h: T) -> Result<Vec<T>> {
    let m = xi.len();
    if !(h > T::zero()) {
        return invalid("finite-difference step must be positive");
    }
    let points: Vec<(usize, T)> = (0..m).flat_map(|b| [(b, h), (b, -h)]).collect();
    let values: Vec<Result<Vec<T>>> = points
        .par_iter()
        .map(|&(b, s)| {
            let mut x = xi.to_vec();
            x[b] += s;
            fhat(fam, &x)
        })
        .collect();
    let values: Vec<Vec<T>> = values.into_iter().collect::<Result<_>>()?;
    let mut jac = vec![T::zero(); m * m];
    let two: T = lit(2.0);
    for b in 0..m {
        let (fp, fm) = (&values[2 * b], &values[2 * b + 1]);
        for a in 0..m {
            jac[a * m + b] = (fp[a] - fm[a]) / (two * h);
        }
    }
    Ok(jac)
}

/// Finite-difference slope matrix at `xi` with step `h`.
pub fn d2w_fd<T: Real>(fam: &Family<T>, xi: &[T], h: T) -> Result<SlopeReport<T>> {
    let m = xi.len();
    let jac = fhat_jacobian(fam, xi, h)?;
    let raw: Vec<T> = jac.iter().map(|&v| -v).collect();
    Ok(SlopeReport::from_matrix(
        m,
        raw,
        SlopeMethod::FiniteDifference,
    ))
}

/// Points at which the slope matrix is known in closed form.
#[derive(Debug, Clone, PartialEq)]
pub enum ClosedFormPoint<T> {
    /// Power NLS ground state boosted by `c` (length `d`). `mass` is
    /// `int u_omega^2`; it defaults to the exact value when `d = 1`.
    SingleNls {
        p: T,
        d: usize,
        omega: T,
        c: Vec<T>,
        mass: Option<T>,
    },
    /// Cubic coupled soliton on the diagonal `omega_1 = omega_2`. `mass` is
    /// `int u_omega*^2` of the scalar profile and `vk` the value of
    /// `int u L_delta^{-1} u`.
    Coupled {
        params: CoupledParams<T>,
        omega_star: T,
        d: usize,
        c: Vec<T>,
        mass: T,
        vk: T,
    },
    /// Torus plane wave.
    Torus {
        params: CoupledParams<T>,
        zeta: [T; 2],
        length: T,
    },
}

/// `d/d omega int u_omega^2` for the power NLS: `(2/(p-1) - d/2) M / omega`.
pub fn mass_slope<T: Real>(p: T, d: usize, omega: T, mass: T) -> T {
    let two: T = lit(2.0);
    (two / (p - T::one()) - lit::<T>(d as f64) / two) * mass / omega
}

fn check_d<T>(d: usize, c: &[T]) -> Result<()> {
    if !(1..=3).contains(&d) {
        return invalid("dimension d must be 1, 2 or 3");
    }
    if c.len() != d {
        return invalid("velocity must have d entries");
    }
    Ok(())
}

pub fn d2w_closed<T: Real>(point: &ClosedFormPoint<T>) -> Result<SlopeReport<T>> {
    let half: T = lit(0.5);
    let quarter: T = lit(0.25);
    match point {
        ClosedFormPoint::SingleNls {
            p,
            d,
            omega,
            c,
            mass,
        } => {
            check_d(*d, c)?;
            if !(*omega < T::zero()) || !(*p > T::one()) {
                return invalid("need omega < 0 and p > 1");
            }
            let mass = match (mass, d) {
                (Some(m), _) => *m,
                (None, 1) => closed_form_mass(*omega, *p),
                (None, _) => {
                    return Err(Error::Unsupported(
                        "closed-form mass is only available for d = 1".into(),
                    ))
                }
            };
            let ms = mass_slope(*p, *d, *omega, mass);
            let m = d + 1;
            let g = -half * ms;
            let mut a = vec![T::zero(); m * m];
            a[0] = g;
            for k in 0..*d {
                a[k + 1] = half * c[k] * g;
                a[(k + 1) * m] = half * c[k] * g;
                for l in 0..*d {
                    let mut v = quarter * c[l] * c[k] * g;
                    if l == k {
                        v -= quarter * mass;
                    }
                    a[(l + 1) * m + k + 1] = v;
                }
            }
            Ok(SlopeReport::from_matrix(m, a, SlopeMethod::ClosedForm))
        }
        ClosedFormPoint::Coupled {
            params,
            omega_star,
            d,
            c,
            mass,
            vk,
        } => {
            check_d(*d, c)?;
            let (z1, z2) = coupled_zeta_sq(params)?;
            let s = z1 + z2;
            let a_term =
                (T::one() - lit::<T>(*d as f64) * half) * *mass / (lit::<T>(2.0) * *omega_star);
            let b = *vk;
            let g = [
                [z1 * (z1 * a_term + z2 * b) / s, z1 * z2 * (a_term - b) / s],
                [z1 * z2 * (a_term - b) / s, z2 * (z2 * a_term + z1 * b) / s],
            ];
            let f_sum = half * (z1 + z2) * *mass;
            let gsum: T = g.iter().flatten().fold(T::zero(), |x, y| x + *y);
            let m = d + 2;
            let mut df = vec![T::zero(); m * m];
            for a in 0..2 {
                for bb in 0..2 {
                    df[a * m + bb] = g[a][bb];
                }
                for k in 0..*d {
                    df[a * m + 2 + k] = half * c[k] * (g[a][0] + g[a][1]);
                }
            }
            for k in 0..*d {
                for bb in 0..2 {
                    df[(2 + k) * m + bb] = half * c[k] * (g[0][bb] + g[1][bb]);
                }
                for l in 0..*d {
                    let mut v = quarter * c[k] * c[l] * gsum;
                    if k == l {
                        v += half * f_sum;
                    }
                    df[(2 + k) * m + 2 + l] = v;
                }
            }
            let raw = df.into_iter().map(|v| -v).collect();
            Ok(SlopeReport::from_matrix(m, raw, SlopeMethod::ClosedForm))
        }
        ClosedFormPoint::Torus {
            params,
            zeta: _,
            length,
        } => {
            let det = params.det();
            if det == T::zero() {
                return invalid("alpha gamma = delta^2: D^2 W is undefined");
            }
            let f = half * *length / det;
            let a = vec![
                f * params.gamma,
                -f * params.delta,
                -f * params.delta,
                f * params.alpha,
            ];
            Ok(SlopeReport::from_matrix(2, a, SlopeMethod::ClosedForm))
        }
    }
}

/// Closed-form point matching a profile, with the grid quantities it needs.
pub fn closed_form_point<T: Real>(prof: &Profile<T>) -> Result<ClosedFormPoint<T>> {
    match (prof.kind, prof.model) {
        (ProfileKind::Soliton, ModelParams::SingleNls { p, .. }) => {
            let mass = crate::field::inner_raw(&prof.field, &prof.field);
            Ok(ClosedFormPoint::SingleNls {
                p,
                d: 1,
                omega: prof.omega[0],
                c: vec![prof.boost_velocity()],
                mass: Some(mass),
            })
        }
        (ProfileKind::CoupledSoliton, ModelParams::Coupled(params)) => {
            if (prof.omega[0] - prof.omega[1]).abs() > lit::<T>(1e-12) * prof.omega[0].abs() {
                return Err(Error::Unsupported(
                    "closed-form coupled slope needs omega_1 = omega_2".into(),
                ));
            }
            let vk = vk_integral(prof)?;
            Ok(ClosedFormPoint::Coupled {
                params,
                omega_star: prof.omega[0],
                d: 1,
                c: vec![prof.boost_velocity()],
                mass: vk.mass,
                vk: vk.value,
            })
        }
        (ProfileKind::PlaneWave, ModelParams::Coupled(params)) => Ok(ClosedFormPoint::Torus {
            params,
            zeta: [
                prof.field.component(0)[0].norm(),
                prof.field.component(1)[0].norm(),
            ],
            length: prof.grid().length(),
        }),
        _ => Err(Error::Unsupported("no closed form for this profile".into())),
    }
}

/// `int u L^{-1} u` together with the solve residual.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct VkIntegral<T> {
    pub value: T,
    /// Sup-norm of `L y - u`.
    pub residual: T,
    /// `int u^2` of the scalar profile.
    pub mass: T,
    /// Sup-norm of `L_+(S u) - 2 omega u` (single NLS only, zero otherwise).
    pub identity_residual: T,
}

/// Solve `(K + diag(v)) y = rhs` on the even subspace of a line grid, where
/// `K` has the even symbol `sym`.
fn even_solve<T: Real>(
    grid: &Grid<T>,
    sym: impl Fn(usize) -> T,
    v: &[T],
    rhs: &[T],
) -> Result<Vec<T>> {
    let n = grid.n_points();
    let (e, _) = circulant_columns(grid, sym);
    let half = half_indices(n);
    let h = half.len();
    let mut a = vec![T::zero(); h * h];
    for (i, &(r, _)) in half.iter().enumerate() {
        for (k, &(c, cm)) in half.iter().enumerate() {
            let mut s = e[(r + n - c) % n];
            if cm != c {
                s += e[(r + n - cm) % n];
            }
            a[i * h + k] = s;
        }
        a[i * h + i] += v[r];
    }
    let b: Vec<T> = half.iter().map(|&(r, _)| rhs[r]).collect();
    let y =
        T::lu_solve(h, &a, &b).ok_or_else(|| Error::SingularSolve("even-subspace solve".into()))?;
    let mut out = vec![T::zero(); n];
    for (i, &(r, rm)) in half.iter().enumerate() {
        out[r] = y[i];
        out[rm] = y[i];
    }
    Ok(out)
}

fn apply_real<T: Real>(
    grid: &std::sync::Arc<Grid<T>>,
    sym: impl Fn(usize) -> T,
    v: &[T],
    y: &[T],
) -> Vec<T> {
    let f = Field::from_parts(
        grid.clone(),
        vec![y.iter().map(|&x| Complex::new(x, T::zero())).collect()],
    );
    let k = apply_symbol(&f, |_, j| Complex::new(sym(j), T::zero()));
    k.component(0)
        .iter()
        .zip(v.iter().zip(y))
        .map(|(z, (a, b))| z.re + *a * *b)
        .collect()
}

fn sup<T: Real>(a: &[T]) -> T {
    a.iter().fold(T::zero(), |m, x| m.max(x.abs()))
}

fn line_frame<T: Real>(prof: &Profile<T>) -> Result<Vec<Vec<T>>> {
    if prof.grid().kind() != GridKind::Line {
        return invalid("this computation needs a line-grid profile");
    }
    let f = comoving_frame(prof);
    Ok(f.comps)
}

/// `int u L_delta^{-1} u` for a symmetric coupled soliton, with
/// `L_delta = -d_xx - omega - (3 - 2 delta (zeta1^2 + zeta2^2)) u^2`.
pub fn vk_integral<T: Real>(prof: &Profile<T>) -> Result<VkIntegral<T>> {
    let params = match prof.model {
        ModelParams::Coupled(cp) if prof.kind == ProfileKind::CoupledSoliton => cp,
        _ => return invalid("vk_integral needs a coupled soliton"),
    };
    let comps = line_frame(prof)?;
    let (z1, z2) = coupled_zeta_sq(&params)?;
    let omega = prof.omega[0];
    let zs = z1.sqrt();
    let u: Vec<T> = comps[0].iter().map(|&x| x / zs).collect();
    let s = z1 + z2;
    let coef = lit::<T>(3.0) - lit::<T>(2.0) * params.delta * s;
    let grid = prof.grid_arc();
    let q = grid.wavenumbers().to_vec();
    let sym = |j: usize| q[j] * q[j] - omega;
    let v: Vec<T> = u.iter().map(|&x| -coef * x * x).collect();
    let y = even_solve(grid, sym, &v, &u)?;
    let ly = apply_real(grid, sym, &v, &y);
    let residual = sup(&ly.iter().zip(&u).map(|(a, b)| *a - *b).collect::<Vec<_>>());
    let hx = grid.spacing();
    let value = u.iter().zip(&y).fold(T::zero(), |a, (x, z)| a + *x * *z) * hx;
    let mass = u.iter().fold(T::zero(), |a, x| a + *x * *x) * hx;
    Ok(VkIntegral {
        value,
        residual,
        mass,
        identity_residual: T::zero(),
    })
}

/// `int u L_+^{-1} u` for a single-NLS soliton with
/// `L_+ = -d_xx - p u^{p-1} - omega`, and the residual of `L_+(S u) = 2 omega u`
/// with `S = x d_x + 2/(p-1)`.
pub fn vk_integral_single<T: Real>(prof: &Profile<T>) -> Result<VkIntegral<T>> {
    let p = match prof.model {
        ModelParams::SingleNls { p, .. } => p,
        _ => return invalid("vk_integral_single needs a single NLS soliton"),
    };
    let comps = line_frame(prof)?;
    let u = &comps[0];
    let omega = prof.omega[0];
    let grid = prof.grid_arc();
    let q = grid.wavenumbers().to_vec();
    let sym = |j: usize| q[j] * q[j] - omega;
    let v: Vec<T> = u.iter().map(|&x| -p * x.abs().powf(p - T::one())).collect();
    let y = even_solve(grid, sym, &v, u)?;
    let ly = apply_real(grid, sym, &v, &y);
    let residual = sup(&ly.iter().zip(u).map(|(a, b)| *a - *b).collect::<Vec<_>>());
    let hx = grid.spacing();
    let value = u.iter().zip(&y).fold(T::zero(), |a, (x, z)| a + *x * *z) * hx;
    let mass = u.iter().fold(T::zero(), |a, x| a + *x * *x) * hx;
    // S u = x u' + 2/(p-1) u
    let f = Field::from_parts(
        grid.clone(),
        vec![u.iter().map(|&x| Complex::new(x, T::zero())).collect()],
    );
    let du = crate::field::gradient_raw(&f);
    let two: T = lit(2.0);
    let su: Vec<T> = (0..u.len())
        .map(|j| grid.nodes()[j] * du.component(0)[j].re + two / (p - T::one()) * u[j])
        .collect();
    let lsu = apply_real(grid, sym, &v, &su);
    let identity_residual = sup(&lsu
        .iter()
        .zip(u)
        .map(|(a, b)| *a - two * omega * *b)
        .collect::<Vec<_>>());
    Ok(VkIntegral {
        value,
        residual,
        mass,
        identity_residual,
    })
}

/// `d2w_fd` with the restriction to a subalgebra attached.
pub fn d2w_tilde<T: Real>(fam: &Family<T>, xi: &[T], basis: &[Vec<T>]) -> Result<SlopeReport<T>> {
    d2w_fd(fam, xi, fam.fd_step())?.with_restriction(basis)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::{
        boost, continue_family, coupled_soliton, family_at, plane_wave, soliton_explicit,
    };
    use std::f64::consts::{PI, TAU};
    use std::sync::Arc;

    fn line() -> Arc<Grid<f64>> {
        Arc::new(Grid::line(20.0, 256).unwrap())
    }

    #[test]
    fn soliton_closed_form_matrix() {
        let r = d2w_closed::<f64>(&ClosedFormPoint::SingleNls {
            p: 3.0,
            d: 1,
            omega: -1.0,
            c: vec![0.0],
            mass: None,
        })
        .unwrap();
        assert!((r.entry(0, 0) - 1.0).abs() < 1e-12);
        assert!(r.entry(0, 1).abs() < 1e-12);
        assert!((r.entry(1, 1) + 1.0).abs() < 1e-12);
        assert_eq!(r.signature, Signature { p: 1, z: 0, n: 1 });
    }

    #[test]
    fn soliton_fd_matches_closed_form() {
        let p = boost(&soliton_explicit(-1.0, line()).unwrap(), 0.5).unwrap();
        let fam = family_at(&p).unwrap();
        let fd = d2w_fd(&fam, &p.xi, fam.fd_step()).unwrap();
        let cf = d2w_closed(&closed_form_point(&p).unwrap()).unwrap();
        for (a, b) in fd.d2w.iter().zip(&cf.d2w) {
            assert!((a - b).abs() < 1e-6, "{:?} vs {:?}", fd.d2w, cf.d2w);
        }
        assert!(fd.asymmetry < 1e-6);
    }

    #[test]
    fn torus_closed_form() {
        let params = CoupledParams::new(-1.0, -1.0, -0.5);
        let r = d2w_closed(&ClosedFormPoint::Torus {
            params,
            zeta: [1.0, 1.0],
            length: TAU,
        })
        .unwrap();
        let f = TAU / 1.5;
        assert!((r.entry(0, 0) + f).abs() < 1e-12 && (r.entry(0, 1) - 0.5 * f).abs() < 1e-12);
        assert_eq!(r.signature, Signature { p: 0, z: 0, n: 2 });
        let r = d2w_closed(&ClosedFormPoint::Torus {
            params: CoupledParams::new(-1.0, -1.0, -2.0),
            zeta: [1.0, 1.0],
            length: TAU,
        })
        .unwrap();
        assert_eq!(r.signature, Signature { p: 1, z: 0, n: 1 });
        let g = Arc::new(Grid::periodic(TAU, 16).unwrap());
        let pw = plane_wave(1.0, 1.0, params, g).unwrap();
        let fam = family_at(&pw).unwrap();
        let f: Vec<f64> = fhat(&fam, &pw.xi).unwrap();
        assert!((f[0] - PI).abs() < 1e-12 && (f[1] - PI).abs() < 1e-12);
        let fd = d2w_fd(&fam, &pw.xi, fam.fd_step()).unwrap();
        let cf = d2w_closed(&closed_form_point(&pw).unwrap()).unwrap();
        for (a, b) in fd.d2w.iter().zip(&cf.d2w) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn single_vk_identity() {
        let g = Arc::new(Grid::<f64>::line(30.0, 384).unwrap());
        let p = soliton_explicit(-1.0, g).unwrap();
        let vk = vk_integral_single(&p).unwrap();
        assert!((vk.value + 1.0).abs() < 1e-8, "{}", vk.value);
        assert!(vk.residual < 1e-9, "{}", vk.residual);
        assert!(vk.identity_residual < 1e-8, "{}", vk.identity_residual);
    }

    #[test]
    fn coupled_vk_sign_and_fd() {
        let g = line();
        let p = coupled_soliton(-1.0, CoupledParams::new(1.0, 1.0, 2.0), g.clone()).unwrap();
        let vk = vk_integral(&p).unwrap();
        assert!(vk.value > 0.0 && vk.residual < 1e-9);
        let b = boost(&p, 0.3).unwrap();
        let fam = continue_family(&b, &b.xi.clone(), 1).unwrap();
        let fd = d2w_fd(&fam, &b.xi, fam.fd_step()).unwrap();
        let cf = d2w_closed(&closed_form_point(&b).unwrap()).unwrap();
        for (x, y) in fd.d2w.iter().zip(&cf.d2w) {
            assert!((x - y).abs() < 1e-6, "{:?} vs {:?}", fd.d2w, cf.d2w);
        }
    }

    #[test]
    fn restriction_rules() {
        let a = vec![2.0, 0.0, 0.0, -1.0];
        let r = restrict(2, &a, &[vec![1.0, 0.0]]).unwrap();
        assert_eq!(r.d2w_tilde, vec![2.0]);
        assert!(restrict(2, &a, &[vec![0.0, 0.0]]).is_err());
        let full = restrict(2, &a, &[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(full.d2w_tilde, a);
    }
}
