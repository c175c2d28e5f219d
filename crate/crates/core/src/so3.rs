//! Central-force particle with an angular momentum penalty, symmetric under SO(3).
//!
//! `H_a(q, p) = |p|^2/2 + V(|q|) - a |q x p|^2`, momentum map `F = q x p`.

use nalgebra::{Matrix3, Matrix6, SymmetricEigen, Vector3, Vector6};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::linalg::{classify, principal_angles, Signature};

pub const KER_TOL: f64 = 1e-8;
pub const FD_STEP: f64 = 1e-5;

/// Radial potential `V(r)` with first and second derivatives.
pub trait CentralPotential: Sync {
    fn v(&self, r: f64) -> f64;
    fn dv(&self, r: f64) -> f64;
    fn d2v(&self, r: f64) -> f64;
}

/// `V(r) = omega r^2 / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Harmonic(pub f64);

impl CentralPotential for Harmonic {
    fn v(&self, r: f64) -> f64 {
        0.5 * self.0 * r * r
    }
    fn dv(&self, r: f64) -> f64 {
        self.0 * r
    }
    fn d2v(&self, _r: f64) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct So3State {
    pub q: [f64; 3],
    pub p: [f64; 3],
    pub alpha: f64,
    pub omega_pot: f64,
    pub xi: [f64; 3],
}

fn v3(a: [f64; 3]) -> Vector3<f64> {
    Vector3::from(a)
}

fn arr(v: Vector3<f64>) -> [f64; 3] {
    [v.x, v.y, v.z]
}

impl So3State {
    pub fn momentum(&self) -> [f64; 3] {
        arr(v3(self.q).cross(&v3(self.p)))
    }

    pub fn energy(&self) -> f64 {
        energy(
            &Harmonic(self.omega_pot),
            self.alpha,
            &v3(self.q),
            &v3(self.p),
        )
    }

    pub fn with(&self, q: Vector3<f64>, p: Vector3<f64>) -> Self {
        Self {
            q: arr(q),
            p: arr(p),
            ..*self
        }
    }

    fn phase(&self) -> Vector6<f64> {
        let mut z = Vector6::zeros();
        z.fixed_rows_mut::<3>(0).copy_from(&v3(self.q));
        z.fixed_rows_mut::<3>(3).copy_from(&v3(self.p));
        z
    }
}

fn energy(pot: &dyn CentralPotential, alpha: f64, q: &Vector3<f64>, p: &Vector3<f64>) -> f64 {
    0.5 * p.norm_squared() + pot.v(q.norm()) - alpha * q.cross(p).norm_squared()
}

/// `L_xi(q, p) = H_a - xi . (q x p)`.
pub fn lagrangian(pot: &dyn CentralPotential, alpha: f64, xi: &[f64; 3], z: &Vector6<f64>) -> f64 {
    let q = z.fixed_rows::<3>(0).into_owned();
    let p = z.fixed_rows::<3>(3).into_owned();
    energy(pot, alpha, &q, &p) - v3(*xi).dot(&q.cross(&p))
}

pub fn lagrangian_gradient(
    pot: &dyn CentralPotential,
    alpha: f64,
    xi: &[f64; 3],
    z: &Vector6<f64>,
) -> Vector6<f64> {
    let q = z.fixed_rows::<3>(0).into_owned();
    let p = z.fixed_rows::<3>(3).into_owned();
    let xi = v3(*xi);
    let f = q.cross(&p);
    let r = q.norm();
    let gq = q * (pot.dv(r) / r) - p.cross(&f) * (2.0 * alpha) - p.cross(&xi);
    let gp = p - f.cross(&q) * (2.0 * alpha) - xi.cross(&q);
    let mut g = Vector6::zeros();
    g.fixed_rows_mut::<3>(0).copy_from(&gq);
    g.fixed_rows_mut::<3>(3).copy_from(&gp);
    g
}

/// Circular orbit of radius `rho` in the `(e1, e2)` plane.
pub fn circular_orbit(rho: f64, omega_pot: f64, alpha: f64) -> Result<So3State> {
    if !(rho > 0.0) || !(omega_pot > 0.0) {
        return invalid("rho and omega_pot must be positive");
    }
    if !(2.0 * alpha * rho * rho > 1.0) {
        return invalid(format!(
            "circular orbit needs 2 alpha rho^2 > 1 (got {})",
            2.0 * alpha * rho * rho
        ));
    }
    let sigma = omega_pot.sqrt() * rho;
    let eta = (1.0 - 2.0 * alpha * rho * rho) / (rho * rho);
    let q = Vector3::new(rho, 0.0, 0.0);
    let p = Vector3::new(0.0, sigma, 0.0);
    Ok(So3State {
        q: arr(q),
        p: arr(p),
        alpha,
        omega_pot,
        xi: arr(q.cross(&p) * eta),
    })
}

/// The circular orbit selected by a given `xi`, oriented with `F` antiparallel to `xi`.
pub fn orbit_for_xi(xi: &[f64; 3], omega_pot: f64, alpha: f64) -> Result<So3State> {
    let x = v3(*xi);
    let n = x.norm();
    if !(n > 0.0) {
        return invalid("xi must be nonzero");
    }
    if !(alpha > 0.0) {
        return invalid("alpha must be positive");
    }
    let rho = ((1.0 + n / omega_pot.sqrt()) / (2.0 * alpha)).sqrt();
    let m = -x / n;
    let a = if m.x.abs() < 0.9 {
        Vector3::x()
    } else {
        Vector3::y()
    };
    let e1 = (a - m * m.dot(&a)).normalize();
    let e2 = m.cross(&e1);
    let sigma = omega_pot.sqrt() * rho;
    Ok(So3State {
        q: arr(e1 * rho),
        p: arr(e2 * sigma),
        alpha,
        omega_pot,
        xi: *xi,
    })
}

pub fn stationarity_residual(state: &So3State) -> f64 {
    lagrangian_gradient(
        &Harmonic(state.omega_pot),
        state.alpha,
        &state.xi,
        &state.phase(),
    )
    .norm()
}

fn skew_xi(xi: &Vector3<f64>) -> Matrix3<f64> {
    // d^2/dq_i dp_j of xi . (q x p) = eps_{ijk} xi_k
    Matrix3::new(0.0, xi.z, -xi.y, -xi.z, 0.0, xi.x, xi.y, -xi.x, 0.0)
}

/// Analytic Hessian of `L_xi` in the coordinates `(q, p)`.
pub fn hessian6_analytic(pot: &dyn CentralPotential, state: &So3State) -> Matrix6<f64> {
    let q = v3(state.q);
    let p = v3(state.p);
    let a = state.alpha;
    let r = q.norm();
    let qh = q / r;
    let id = Matrix3::identity();
    let vq = qh * qh.transpose() * pot.d2v(r) + (id - qh * qh.transpose()) * (pot.dv(r) / r);
    let (qq, pp, qp) = (q.dot(&q), p.dot(&p), q.dot(&p));
    let f_qq = id * (2.0 * pp) - p * p.transpose() * 2.0;
    let f_pp = id * (2.0 * qq) - q * q.transpose() * 2.0;
    let f_qp = q * p.transpose() * 4.0 - p * q.transpose() * 2.0 - id * (2.0 * qp);
    let xq = skew_xi(&v3(state.xi));
    let mut h = Matrix6::zeros();
    h.fixed_view_mut::<3, 3>(0, 0).copy_from(&(vq - f_qq * a));
    h.fixed_view_mut::<3, 3>(3, 3).copy_from(&(id - f_pp * a));
    let off = -f_qp * a - xq;
    h.fixed_view_mut::<3, 3>(0, 3).copy_from(&off);
    h.fixed_view_mut::<3, 3>(3, 0).copy_from(&off.transpose());
    h
}

/// Central differences of the analytic gradient with step `h`.
pub fn hessian6_fd(pot: &dyn CentralPotential, state: &So3State, h: f64) -> Matrix6<f64> {
    let z = state.phase();
    let mut m = Matrix6::zeros();
    for j in 0..6 {
        let mut zp = z;
        let mut zm = z;
        zp[j] += h;
        zm[j] -= h;
        let d = (lagrangian_gradient(pot, state.alpha, &state.xi, &zp)
            - lagrangian_gradient(pot, state.alpha, &state.xi, &zm))
            / (2.0 * h);
        m.set_column(j, &d);
    }
    (m + m.transpose()) * 0.5
}

#[derive(Debug, Clone, Serialize)]
pub struct Hessian6Report {
    pub matrix: [[f64; 6]; 6],
    pub eigenvalues: Vec<f64>,
    pub n_neg: usize,
    pub dim_ker: usize,
    pub ker_tol: f64,
    pub marginal: usize,
    /// Largest entrywise gap between the analytic and finite-difference Hessians.
    pub fd_error: f64,
    pub tangent_dim: usize,
    pub kernel_angles: Option<Vec<f64>>,
    pub kernel_matches_orbit: bool,
}

/// Orbit tangent `(eta x q, eta x p)` for `eta` spanning the isotropy algebra
/// of `F`.
pub fn orbit_tangent(state: &So3State) -> Vec<Vector6<f64>> {
    let f = v3(state.momentum());
    let n = f.norm();
    let etas: Vec<Vector3<f64>> = if n > 0.0 {
        vec![f / n]
    } else {
        vec![Vector3::x(), Vector3::y(), Vector3::z()]
    };
    etas.iter()
        .map(|e| {
            let mut t = Vector6::zeros();
            t.fixed_rows_mut::<3>(0).copy_from(&e.cross(&v3(state.q)));
            t.fixed_rows_mut::<3>(3).copy_from(&e.cross(&v3(state.p)));
            t
        })
        .collect()
}

pub fn hessian6(state: &So3State) -> Hessian6Report {
    let pot = Harmonic(state.omega_pot);
    let h = hessian6_analytic(&pot, state);
    let fd = hessian6_fd(&pot, state, FD_STEP);
    let fd_error = (h - fd).amax();
    let eig = SymmetricEigen::new(h);
    let mut idx: Vec<usize> = (0..6).collect();
    idx.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals: Vec<f64> = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let radius = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let ker_tol = KER_TOL * radius.max(1.0);
    let (sig, marginal) = classify(&vals, ker_tol);
    let kernel: Vec<Vec<f64>> = idx
        .iter()
        .filter(|&&i| eig.eigenvalues[i].abs() <= ker_tol)
        .map(|&i| eig.eigenvectors.column(i).iter().copied().collect())
        .collect();
    let tangent: Vec<Vec<f64>> = orbit_tangent(state)
        .iter()
        .map(|t| t.iter().copied().collect())
        .collect();
    let kernel_angles = if kernel.len() == tangent.len() {
        principal_angles(&kernel, &tangent)
    } else {
        None
    };
    let kernel_matches_orbit = kernel_angles
        .as_ref()
        .is_some_and(|a| a.iter().all(|x| *x < 1e-6));
    let mut matrix = [[0.0; 6]; 6];
    for (i, row) in matrix.iter_mut().enumerate() {
        for (j, x) in row.iter_mut().enumerate() {
            *x = h[(i, j)];
        }
    }
    Hessian6Report {
        matrix,
        eigenvalues: vals,
        n_neg: sig.n,
        dim_ker: sig.z,
        ker_tol,
        marginal,
        fd_error,
        tangent_dim: tangent.len(),
        kernel_angles,
        kernel_matches_orbit,
    }
}

/// `W(xi) = (omega / 4 alpha) (1 + |xi| / sqrt(omega))^2`.
pub fn w_closed(xi_norm: f64, omega_pot: f64, alpha: f64) -> f64 {
    0.25 * omega_pot / alpha * (1.0 + xi_norm / omega_pot.sqrt()).powi(2)
}

/// `D^2 W = (1/2a)[(1 + sqrt(omega)/|xi|) I - (sqrt(omega)/|xi|) xi_hat xi_hat^T]`.
pub fn d2w_closed(xi: &[f64; 3], omega_pot: f64, alpha: f64) -> Result<Matrix3<f64>> {
    let x = v3(*xi);
    let n = x.norm();
    if !(n > 0.0) {
        return invalid("xi must be nonzero");
    }
    let s = omega_pot.sqrt() / n;
    let xh = x / n;
    Ok((Matrix3::identity() * (1.0 + s) - xh * xh.transpose() * s) / (2.0 * alpha))
}

/// `W(xi)` evaluated as `L_xi` at the selected circular orbit.
pub fn w_from_orbit(xi: &[f64; 3], omega_pot: f64, alpha: f64) -> Result<f64> {
    let s = orbit_for_xi(xi, omega_pot, alpha)?;
    Ok(lagrangian(&Harmonic(omega_pot), alpha, xi, &s.phase()))
}

/// Central second differences of [`w_from_orbit`].
pub fn d2w_fd(xi: &[f64; 3], omega_pot: f64, alpha: f64, h: f64) -> Result<Matrix3<f64>> {
    let w = |d: Vector3<f64>| w_from_orbit(&arr(v3(*xi) + d), omega_pot, alpha);
    let mut m = Matrix3::zeros();
    let w0 = w(Vector3::zeros())?;
    for i in 0..3 {
        let ei = Vector3::ith(i, h);
        m[(i, i)] = (w(ei)? - 2.0 * w0 + w(-ei)?) / (h * h);
        for j in 0..i {
            let ej = Vector3::ith(j, h);
            let v = (w(ei + ej)? - w(ei - ej)? - w(ej - ei)? + w(-ei - ej)?) / (4.0 * h * h);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    Ok(m)
}

fn sym_eigs3(m: &Matrix3<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = SymmetricEigen::new(*m)
        .eigenvalues
        .iter()
        .copied()
        .collect();
    v.sort_by(f64::total_cmp);
    v
}

#[derive(Debug, Clone, Serialize)]
pub struct WReport {
    pub w: f64,
    pub d2w: [[f64; 3]; 3],
    pub eigenvalues: Vec<f64>,
    pub signature: Signature,
    /// Largest entrywise gap to the finite-difference matrix.
    pub fd_error: f64,
    /// `D^2 W` restricted to the line spanned by `xi`.
    pub d2w_tilde: f64,
    pub p_tilde: usize,
}

/// `W` and `D^2 W` at `xi = |xi| e3`, plus the restriction to `span{xi}`.
pub fn w_so3(xi_norm: f64, omega_pot: f64, alpha: f64) -> Result<WReport> {
    if !(xi_norm > 0.0) {
        return invalid("xi must be nonzero");
    }
    let xi = [0.0, 0.0, xi_norm];
    let d2 = d2w_closed(&xi, omega_pot, alpha)?;
    let fd = d2w_fd(&xi, omega_pot, alpha, 1e-4)?;
    let eigenvalues = sym_eigs3(&d2);
    let tol = 1e-6 * eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let (signature, _) = classify(&eigenvalues, tol);
    let d2w_tilde = d2[(2, 2)];
    let mut m = [[0.0; 3]; 3];
    for (i, row) in m.iter_mut().enumerate() {
        for (j, x) in row.iter_mut().enumerate() {
            *x = d2[(i, j)];
        }
    }
    Ok(WReport {
        w: w_closed(xi_norm, omega_pot, alpha),
        d2w: m,
        eigenvalues,
        signature,
        fd_error: (d2 - fd).amax(),
        d2w_tilde,
        p_tilde: usize::from(d2w_tilde > tol),
    })
}

fn rotate(v: &Vector3<f64>, axis: &Vector3<f64>, angle: f64) -> Vector3<f64> {
    let (s, c) = angle.sin_cos();
    v * c + axis.cross(v) * s + axis * axis.dot(v) * (1.0 - c)
}

const YOSHIDA: [f64; 3] = {
    let cbrt2 = 1.259_921_049_894_873_2;
    let w1 = 1.0 / (2.0 - cbrt2);
    let w0 = -cbrt2 * w1;
    [w1, w0, w1]
};

fn verlet(pot: &dyn CentralPotential, q: &mut Vector3<f64>, p: &mut Vector3<f64>, dt: f64) {
    let force = |q: &Vector3<f64>| -q * (pot.dv(q.norm()) / q.norm());
    *p += force(q) * (0.5 * dt);
    *q += *p * dt;
    *p += force(q) * (0.5 * dt);
}

/// Exact flow of `-a |F|^2`: rotation of `q` and `p` about `F`.
fn penalty_flow(alpha: f64, q: &mut Vector3<f64>, p: &mut Vector3<f64>, dt: f64) {
    let f = q.cross(p);
    let n = f.norm();
    if n == 0.0 {
        return;
    }
    let axis = f / n;
    let angle = -2.0 * alpha * n * dt;
    *q = rotate(q, &axis, angle);
    *p = rotate(p, &axis, angle);
}

/// One step: exact penalty rotation around a fourth order Yoshida composition
/// of Stormer-Verlet for the central force part.
pub fn so3_step(
    pot: &dyn CentralPotential,
    alpha: f64,
    q: &mut Vector3<f64>,
    p: &mut Vector3<f64>,
    dt: f64,
) {
    penalty_flow(alpha, q, p, 0.5 * dt);
    for w in YOSHIDA {
        verlet(pot, q, p, w * dt);
    }
    penalty_flow(alpha, q, p, 0.5 * dt);
}

/// Distance in `R^6` from `state` to the rotations of `reference` about `axis`.
pub fn orbit_distance(state: &So3State, reference: &So3State, axis: &[f64; 3]) -> (f64, f64) {
    let n = v3(*axis).normalize();
    let a = [v3(reference.q), v3(reference.p)];
    let b = [v3(state.q), v3(state.p)];
    let (mut ca, mut sa) = (0.0, 0.0);
    for (x, y) in a.iter().zip(&b) {
        let perp = x - n * n.dot(x);
        ca += y.dot(&perp);
        sa += y.dot(&n.cross(x));
    }
    let theta = sa.atan2(ca);
    let d2: f64 = a
        .iter()
        .zip(&b)
        .map(|(x, y)| (rotate(x, &n, theta) - y).norm_squared())
        .sum();
    (d2.sqrt(), theta)
}

#[derive(Debug, Clone, Serialize)]
pub struct So3Trajectory {
    pub times: Vec<f64>,
    pub distances: Vec<f64>,
    pub energy: Vec<f64>,
    pub momentum: Vec<[f64; 3]>,
    pub max_distance: f64,
    pub energy_drift: f64,
    pub momentum_drift: f64,
}

impl So3Trajectory {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,distance,H,F1,F2,F3\n");
        for i in 0..self.times.len() {
            let f = self.momentum[i];
            s.push_str(&format!(
                "{:e},{:e},{:e},{:e},{:e},{:e}\n",
                self.times[i], self.distances[i], self.energy[i], f[0], f[1], f[2]
            ));
        }
        s
    }
}

/// Integrate from `state`, measuring the distance to the orbit of `reference`.
pub fn integrate_so3(
    state: &So3State,
    reference: &So3State,
    dt: f64,
    t_end: f64,
    stride: usize,
) -> Result<So3Trajectory> {
    if !(dt > 0.0) || !(t_end >= 0.0) || stride == 0 {
        return invalid("need dt > 0, t_end >= 0 and a positive stride");
    }
    let pot = Harmonic(state.omega_pot);
    let axis = reference.momentum();
    let steps = (t_end / dt - 1e-9).ceil().max(0.0) as usize;
    let dt = if steps == 0 { dt } else { t_end / steps as f64 };
    let (mut q, mut p) = (v3(state.q), v3(state.p));
    let mut tr = So3Trajectory {
        times: Vec::new(),
        distances: Vec::new(),
        energy: Vec::new(),
        momentum: Vec::new(),
        max_distance: 0.0,
        energy_drift: 0.0,
        momentum_drift: 0.0,
    };
    let mut record = |t: f64, q: &Vector3<f64>, p: &Vector3<f64>| {
        let s = state.with(*q, *p);
        tr.times.push(t);
        tr.distances.push(orbit_distance(&s, reference, &axis).0);
        tr.energy.push(s.energy());
        tr.momentum.push(s.momentum());
    };
    record(0.0, &q, &p);
    for k in 1..=steps {
        so3_step(&pot, state.alpha, &mut q, &mut p, dt);
        if k % stride == 0 || k == steps {
            record(k as f64 * dt, &q, &p);
        }
    }
    tr.max_distance = tr.distances.iter().fold(0.0f64, |m, d| m.max(*d));
    let h0 = tr.energy[0];
    tr.energy_drift = tr.energy.iter().fold(0.0f64, |m, h| m.max((h - h0).abs()));
    let f0 = v3(tr.momentum[0]);
    tr.momentum_drift = tr
        .momentum
        .iter()
        .fold(0.0f64, |m, f| m.max((v3(*f) - f0).norm()));
    Ok(tr)
}

/// `state` displaced by a random vector of Euclidean norm `eps` in `R^6`.
pub fn perturb(state: &So3State, eps: f64, seed: u64) -> So3State {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = Vector6::<f64>::from_fn(|_, _| rng.gen_range(-1.0..1.0));
    let d = d * (eps / d.norm());
    let z = state.phase() + d;
    state.with(
        z.fixed_rows::<3>(0).into_owned(),
        z.fixed_rows::<3>(3).into_owned(),
    )
}

/// Everything computed for one circular orbit.
#[derive(Debug, Clone, Serialize)]
pub struct So3Report {
    pub rho: f64,
    pub omega_pot: f64,
    pub alpha: f64,
    pub state: So3State,
    pub xi_norm: f64,
    pub stationarity_residual: f64,
    pub hessian: Hessian6Report,
    pub w: WReport,
    /// `W` evaluated at the orbit, for comparison with the closed form.
    pub w_at_orbit: f64,
}

pub fn so3_report(rho: f64, omega_pot: f64, alpha: f64) -> Result<So3Report> {
    let state = circular_orbit(rho, omega_pot, alpha)?;
    let xi_norm = v3(state.xi).norm();
    Ok(So3Report {
        rho,
        omega_pot,
        alpha,
        stationarity_residual: stationarity_residual(&state),
        hessian: hessian6(&state),
        w: w_so3(xi_norm, omega_pot, alpha)?,
        w_at_orbit: w_from_orbit(&state.xi, omega_pot, alpha)?,
        xi_norm,
        state,
    })
}
