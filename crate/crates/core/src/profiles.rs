//! Relative-equilibrium profiles and xi-parametrized families.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use num_complex::Complex;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::field::Field;
use crate::grid::{Grid, GridKind};
use crate::hessian;
use crate::model::{lyapunov_gradient_raw, CoupledParams, ModelParams};
use crate::newton::{frame_xi, reduced_extremes, solve_even_real};
use crate::scalar::{lit, to_f64, Real};

pub const DEFAULT_NEWTON_TOL: f64 = 1e-11;
const MAX_NEWTON_ITER: usize = 40;
const MAX_HALVINGS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    Soliton,
    CoupledSoliton,
    PlaneWave,
}

/// A relative equilibrium candidate.
///
/// `omega` holds the per-component frequencies in the co-moving frame
/// (`xi_c + |c|^2/4` on the line, `xi` itself on the torus); `velocity` is
/// the boost `c` (empty on the torus).
#[derive(Debug, Clone, PartialEq)]
pub struct Profile<T> {
    pub field: Field<T>,
    pub xi: Vec<T>,
    pub omega: Vec<T>,
    pub velocity: Vec<T>,
    pub model: ModelParams<T>,
    pub kind: ProfileKind,
}

impl<T: Real> Profile<T> {
    pub fn grid(&self) -> &Grid<T> {
        self.field.grid()
    }

    pub fn grid_arc(&self) -> &Arc<Grid<T>> {
        self.field.grid_arc()
    }

    /// Sup-norm of the gradient of the Lyapunov function.
    pub fn residual(&self) -> T {
        lyapunov_gradient_raw(&self.model, &self.xi, &self.field).sup_norm()
    }

    pub fn boost_velocity(&self) -> T {
        self.velocity.first().copied().unwrap_or(T::zero())
    }
}

fn check_line<T: Real>(grid: &Grid<T>) -> Result<()> {
    if grid.kind() != GridKind::Line {
        return invalid("this profile needs a line grid");
    }
    Ok(())
}

fn sech<T: Real>(x: T) -> T {
    T::one() / x.cosh()
}

/// Closed-form d = 1 ground state of `u'' + |u|^(p-1) u = -omega u`.
pub fn closed_form_soliton<T: Real>(omega: T, p: T, x: T) -> T {
    let w = -omega;
    let pm1 = p - T::one();
    let two: T = lit(2.0);
    let amp = ((p + T::one()) * w / two).powf(T::one() / pm1);
    let b = pm1 * w.sqrt() / two;
    amp * sech(b * x).powf(two / pm1)
}

/// Mass `int u^2` of the closed-form d = 1 ground state.
pub fn closed_form_mass<T: Real>(omega: T, p: T) -> T {
    let w = to_f64(-omega);
    let p = to_f64(p);
    let amp = ((p + 1.0) * w / 2.0).powf(1.0 / (p - 1.0));
    let b = (p - 1.0) * w.sqrt() / 2.0;
    let s = 2.0 / (p - 1.0);
    let beta = std::f64::consts::PI.sqrt() * libm::tgamma(s) / libm::tgamma(s + 0.5);
    lit(amp * amp / b * beta)
}

fn real_field<T: Real>(grid: &Arc<Grid<T>>, comps: &[Vec<T>]) -> Field<T> {
    Field::from_parts(
        grid.clone(),
        comps
            .iter()
            .map(|c| c.iter().map(|&x| Complex::new(x, T::zero())).collect())
            .collect(),
    )
}

fn line_xi<T: Real>(omega: &[T], c: T) -> Vec<T> {
    let q = c * c / lit(4.0);
    let mut xi: Vec<T> = omega.iter().map(|&w| w - q).collect();
    xi.push(c);
    xi
}

fn make_line_profile<T: Real>(
    grid: &Arc<Grid<T>>,
    comps: &[Vec<T>],
    omega: Vec<T>,
    model: ModelParams<T>,
    kind: ProfileKind,
) -> Profile<T> {
    Profile {
        field: real_field(grid, comps),
        xi: line_xi(&omega, T::zero()),
        omega,
        velocity: vec![T::zero()],
        model,
        kind,
    }
}

/// `sqrt(-2 omega) sech(sqrt(-omega) x)`, the cubic d = 1 soliton.
pub fn soliton_explicit<T: Real>(omega: T, grid: Arc<Grid<T>>) -> Result<Profile<T>> {
    if !(omega < T::zero()) {
        return invalid("omega must be negative");
    }
    check_line(&grid)?;
    let three: T = lit(3.0);
    let u: Vec<T> = grid
        .nodes()
        .iter()
        .map(|&x| closed_form_soliton(omega, three, x))
        .collect();
    Ok(make_line_profile(
        &grid,
        &[u],
        vec![omega],
        ModelParams::single(three),
        ProfileKind::Soliton,
    ))
}

/// Newton-solved positive even ground state for general `p`.
pub fn soliton_solve<T: Real>(omega: T, p: T, grid: Arc<Grid<T>>, tol: T) -> Result<Profile<T>> {
    if !(omega < T::zero()) {
        return invalid("omega must be negative");
    }
    let model = ModelParams::single(p);
    model.validate(&grid)?;
    let guess: Vec<T> = grid
        .nodes()
        .iter()
        .map(|&x| closed_form_soliton(omega, p, x))
        .collect();
    let out = solve_even_real(&model, &grid, &[omega], vec![guess], tol, MAX_NEWTON_ITER)?;
    check_positive(&out.u[0])?;
    Ok(make_line_profile(
        &grid,
        &out.u,
        vec![omega],
        model,
        ProfileKind::Soliton,
    ))
}

fn check_positive<T: Real>(u: &[T]) -> Result<()> {
    let max = u.iter().fold(T::zero(), |m, &x| m.max(x));
    let min = u.iter().fold(T::infinity(), |m, &x| m.min(x));
    if !(max > T::zero()) || min < -max * lit(1e-6) {
        return Err(Error::InvalidInput(
            "negative/oscillating profile detected".into(),
        ));
    }
    Ok(())
}

/// `(zeta1^2, zeta2^2)` solving `alpha z1 + delta z2 = 1`, `delta z1 + gamma z2 = 1`.
pub fn coupled_zeta_sq<T: Real>(params: &CoupledParams<T>) -> Result<(T, T)> {
    let det = params.det();
    if det == T::zero() {
        return invalid("inadmissible coupling: alpha gamma = delta^2");
    }
    let z1 = (params.gamma - params.delta) / det;
    let z2 = (params.alpha - params.delta) / det;
    if !(z1 > T::zero() && z2 > T::zero()) {
        return invalid(
            "inadmissible coupling: delta must lie outside [min(alpha,gamma), max(alpha,gamma)]",
        );
    }
    Ok((z1, z2))
}

/// Symmetric-frequency coupled soliton `u_omega* (zeta1, zeta2)`.
pub fn coupled_soliton<T: Real>(
    omega_star: T,
    params: CoupledParams<T>,
    grid: Arc<Grid<T>>,
) -> Result<Profile<T>> {
    if !(omega_star < T::zero()) {
        return invalid("omega must be negative");
    }
    check_line(&grid)?;
    if params.beta != T::one() || params.k != T::zero() {
        return invalid("line coupled solitons use beta = 1 and k = 0");
    }
    let (z1, z2) = coupled_zeta_sq(&params)?;
    let three: T = lit(3.0);
    let base: Vec<T> = grid
        .nodes()
        .iter()
        .map(|&x| closed_form_soliton(omega_star, three, x))
        .collect();
    let comps = vec![
        base.iter().map(|&v| v * z1.sqrt()).collect(),
        base.iter().map(|&v| v * z2.sqrt()).collect(),
    ];
    Ok(make_line_profile(
        &grid,
        &comps,
        vec![omega_star, omega_star],
        ModelParams::Coupled(params),
        ProfileKind::CoupledSoliton,
    ))
}

/// Dispersion relation `xi = beta k^2 - A zeta^2`.
pub fn plane_wave_xi<T: Real>(params: &CoupledParams<T>, z1: T, z2: T) -> Vec<T> {
    let bk = params.beta * params.k * params.k;
    let (s1, s2) = (z1 * z1, z2 * z2);
    vec![
        bk - (params.alpha * s1 + params.delta * s2),
        bk - (params.delta * s1 + params.gamma * s2),
    ]
}

/// Constant two-component plane wave on a torus.
pub fn plane_wave<T: Real>(
    zeta1: T,
    zeta2: T,
    params: CoupledParams<T>,
    grid: Arc<Grid<T>>,
) -> Result<Profile<T>> {
    if zeta1 == T::zero() || zeta2 == T::zero() {
        return invalid("plane-wave amplitudes must be nonzero");
    }
    if grid.kind() != GridKind::Periodic {
        return invalid("plane waves need a periodic grid");
    }
    let model = ModelParams::Coupled(params);
    model.validate(&grid)?;
    let xi = plane_wave_xi(&params, zeta1, zeta2);
    let field = Field::from_fn(grid, 2, |c, _| {
        Complex::new(if c == 0 { zeta1 } else { zeta2 }, T::zero())
    });
    Ok(Profile {
        field,
        omega: xi.clone(),
        xi,
        velocity: Vec::new(),
        model,
        kind: ProfileKind::PlaneWave,
    })
}

/// Galilean boost `u -> e^{icx/2} u`; line grids only.
pub fn boost<T: Real>(prof: &Profile<T>, c: T) -> Result<Profile<T>> {
    if c == T::zero() {
        return Ok(prof.clone());
    }
    if prof.grid().kind() != GridKind::Line {
        return Err(Error::Unsupported("boost on the torus".into()));
    }
    let half: T = lit(0.5);
    let nodes = prof.grid().nodes().to_vec();
    let field = prof
        .field
        .map(|_, j, z| z * Complex::from_polar(T::one(), half * c * nodes[j]));
    let v = prof.boost_velocity() + c;
    Ok(Profile {
        field,
        xi: line_xi(&prof.omega, v),
        omega: prof.omega.clone(),
        velocity: vec![v],
        model: prof.model,
        kind: prof.kind,
    })
}

/// Real profile in the co-moving, de-phased frame.
#[derive(Debug, Clone)]
pub(crate) struct Frame<T> {
    pub comps: Vec<Vec<T>>,
}

/// De-boosted field, each component rotated to be real and positive at its
/// peak, together with the frame parameters.
pub(crate) fn frame_field<T: Real>(prof: &Profile<T>) -> (Field<T>, Vec<T>) {
    let grid = prof.grid();
    let c = prof.boost_velocity();
    let half: T = lit(0.5);
    let nodes = grid.nodes();
    let mut comps = Vec::new();
    for k in 0..prof.field.n_components() {
        let v: Vec<Complex<T>> = prof
            .field
            .component(k)
            .iter()
            .zip(nodes)
            .map(|(z, &x)| *z * Complex::from_polar(T::one(), -half * c * x))
            .collect();
        let peak = v
            .iter()
            .copied()
            .fold(Complex::new(T::zero(), T::zero()), |m, z| {
                if z.norm() > m.norm() {
                    z
                } else {
                    m
                }
            });
        let rot = if peak.norm() > T::zero() {
            peak.conj() / peak.norm()
        } else {
            Complex::new(T::one(), T::zero())
        };
        comps.push(v.iter().map(|z| *z * rot).collect());
    }
    let xi = match grid.kind() {
        GridKind::Line => frame_xi(&prof.omega, grid, &prof.model),
        GridKind::Periodic => prof.xi.clone(),
    };
    (Field::from_parts(prof.grid_arc().clone(), comps), xi)
}

pub(crate) fn comoving_frame<T: Real>(prof: &Profile<T>) -> Frame<T> {
    let (f, _) = frame_field(prof);
    let comps = f
        .components()
        .iter()
        .map(|c| c.iter().map(|z| z.re).collect())
        .collect();
    Frame { comps }
}

/// Spectral (zero-padded) interpolation of real periodic data onto `n2` points.
pub(crate) fn resample<T: Real>(u: &[T], n2: usize) -> Vec<T> {
    let n = u.len();
    let mut buf: Vec<Complex<T>> = u.iter().map(|&x| Complex::new(x, T::zero())).collect();
    T::fft(&mut buf);
    let mut big = vec![Complex::new(T::zero(), T::zero()); n2];
    let h = n / 2;
    let half: T = lit(0.5);
    big[..h].copy_from_slice(&buf[..h]);
    for j in 1..h {
        big[n2 - j] = buf[n - j];
    }
    // split the Nyquist mode symmetrically
    big[h] = buf[h] * half;
    big[n2 - h] = buf[h] * half;
    T::ifft(&mut big);
    let scale: T = lit(n2 as f64 / n as f64);
    big.iter().map(|z| z.re * scale).collect()
}

fn rebuild_line<T: Real>(
    template: &Profile<T>,
    grid: &Arc<Grid<T>>,
    comps: &[Vec<T>],
    omega: Vec<T>,
) -> Result<Profile<T>> {
    let base = make_line_profile(grid, comps, omega, template.model, template.kind);
    boost(&base, template.boost_velocity())
}

/// Re-solve the profile by Newton on its own grid (line models) to tolerance `tol`.
pub fn polish<T: Real>(prof: &Profile<T>, tol: T) -> Result<Profile<T>> {
    polish_on(prof, prof.grid_arc().clone(), tol)
}

fn polish_on<T: Real>(prof: &Profile<T>, grid: Arc<Grid<T>>, tol: T) -> Result<Profile<T>> {
    match (grid.kind(), prof.kind) {
        (GridKind::Periodic, _) | (_, ProfileKind::PlaneWave) => {
            let z1 = prof.field.component(0)[0].norm();
            let z2 = prof.field.component(1)[0].norm();
            match prof.model {
                ModelParams::Coupled(cp) => plane_wave(z1, z2, cp, grid),
                _ => invalid("plane waves carry coupled parameters"),
            }
        }
        (GridKind::Line, _) => {
            let frame = comoving_frame(prof);
            let guess: Vec<Vec<T>> = if grid.same_as(prof.grid()) {
                frame.comps
            } else {
                frame
                    .comps
                    .iter()
                    .map(|c| resample(c, grid.n_points()))
                    .collect()
            };
            let out =
                solve_even_real(&prof.model, &grid, &prof.omega, guess, tol, MAX_NEWTON_ITER)?;
            if prof.kind == ProfileKind::Soliton {
                check_positive(&out.u[0])?;
            }
            rebuild_line(prof, &grid, &out.u, prof.omega.clone())
        }
    }
}

/// The same equilibrium on a grid with twice as many points.
pub fn refine<T: Real>(prof: &Profile<T>, tol: T) -> Result<Profile<T>> {
    let fine = Arc::new(prof.grid().refined()?);
    polish_on(prof, fine, tol)
}

#[derive(Debug)]
enum FamilySolver<T> {
    Soliton {
        grid: Arc<Grid<T>>,
        p: T,
    },
    Coupled {
        grid: Arc<Grid<T>>,
        params: CoupledParams<T>,
        anchors: Vec<(Vec<T>, Vec<Vec<T>>)>,
    },
    PlaneWave {
        grid: Arc<Grid<T>>,
        params: CoupledParams<T>,
        signs: [T; 2],
    },
}

fn xi_key<T: Real>(xi: &[T]) -> Vec<u64> {
    xi.iter().map(|&x| to_f64(x).to_bits()).collect()
}

/// Re-solvable map `xi -> u_xi` around a center, with a memo table.
#[derive(Debug)]
pub struct Family<T> {
    center_xi: Vec<T>,
    fd_step: T,
    tol: T,
    path: Vec<Vec<T>>,
    solver: FamilySolver<T>,
    cache: RwLock<HashMap<Vec<u64>, Arc<Profile<T>>>>,
}

impl<T: Real> Family<T> {
    pub fn center_xi(&self) -> &[T] {
        &self.center_xi
    }

    pub fn fd_step(&self) -> T {
        self.fd_step
    }

    pub fn with_fd_step(mut self, h: T) -> Self {
        self.fd_step = h;
        self
    }

    /// Parameters visited by the continuation, start to target.
    pub fn path(&self) -> &[Vec<T>] {
        &self.path
    }

    pub fn model(&self) -> ModelParams<T> {
        match &self.solver {
            FamilySolver::Soliton { p, .. } => ModelParams::single(*p),
            FamilySolver::Coupled { params, .. } | FamilySolver::PlaneWave { params, .. } => {
                ModelParams::Coupled(*params)
            }
        }
    }

    pub fn group_dim(&self) -> usize {
        self.center_xi.len()
    }

    pub fn center(&self) -> Result<Arc<Profile<T>>> {
        self.solve(&self.center_xi.clone())
    }

    /// Profile at `xi`, solved on demand and memoized.
    pub fn solve(&self, xi: &[T]) -> Result<Arc<Profile<T>>> {
        if xi.len() != self.center_xi.len() {
            return invalid("xi has the wrong length for this family");
        }
        let key = xi_key(xi);
        if let Some(p) = self.cache.read().expect("family cache poisoned").get(&key) {
            return Ok(p.clone());
        }
        let prof = Arc::new(self.solve_uncached(xi)?);
        self.cache
            .write()
            .expect("family cache poisoned")
            .insert(key, prof.clone());
        Ok(prof)
    }

    fn solve_uncached(&self, xi: &[T]) -> Result<Profile<T>> {
        match &self.solver {
            FamilySolver::Soliton { grid, p } => {
                let c = xi[1];
                let omega = xi[0] + c * c / lit(4.0);
                let base = soliton_solve(omega, *p, grid.clone(), self.tol)?;
                let mut prof = boost(&base, c)?;
                prof.xi = xi.to_vec();
                Ok(prof)
            }
            FamilySolver::Coupled {
                grid,
                params,
                anchors,
            } => {
                let c = xi[2];
                let q = c * c / lit(4.0);
                let omega = vec![xi[0] + q, xi[1] + q];
                if !(omega[0] < T::zero() && omega[1] < T::zero()) {
                    return invalid("coupled family left the region omega_1, omega_2 < 0");
                }
                let guess = anchors
                    .iter()
                    .min_by(|a, b| {
                        let da = dist(&a.0, &omega);
                        let db = dist(&b.0, &omega);
                        da.partial_cmp(&db).unwrap_or(std::cmp::Ordering::Equal)
                    })
                    .map(|a| a.1.clone())
                    .ok_or_else(|| Error::InvalidInput("coupled family without anchor".into()))?;
                let model = ModelParams::Coupled(*params);
                let out = solve_even_real(&model, grid, &omega, guess, self.tol, MAX_NEWTON_ITER)?;
                let base =
                    make_line_profile(grid, &out.u, omega, model, ProfileKind::CoupledSoliton);
                let mut prof = boost(&base, c)?;
                prof.xi = xi.to_vec();
                Ok(prof)
            }
            FamilySolver::PlaneWave {
                grid,
                params,
                signs,
            } => {
                let (s1, s2) = plane_wave_zeta_sq(params, xi)?;
                let mut prof = plane_wave(
                    signs[0] * s1.sqrt(),
                    signs[1] * s2.sqrt(),
                    *params,
                    grid.clone(),
                )?;
                prof.xi = xi.to_vec();
                prof.omega = xi.to_vec();
                Ok(prof)
            }
        }
    }
}

fn dist<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .fold(T::zero(), |s, (x, y)| s + (*x - *y) * (*x - *y))
        .sqrt()
}

/// Inverse dispersion relation: `zeta^2 = A^{-1} (beta k^2 - xi)`.
pub fn plane_wave_zeta_sq<T: Real>(params: &CoupledParams<T>, xi: &[T]) -> Result<(T, T)> {
    let det = params.det();
    if det == T::zero() {
        return invalid("alpha gamma = delta^2: the momentum map is not invertible");
    }
    let bk = params.beta * params.k * params.k;
    let r1 = bk - xi[0];
    let r2 = bk - xi[1];
    let s1 = (params.gamma * r1 - params.delta * r2) / det;
    let s2 = (params.alpha * r2 - params.delta * r1) / det;
    if !(s1 > T::zero() && s2 > T::zero()) {
        return invalid("xi outside the plane-wave family (zeta^2 must be positive)");
    }
    Ok((s1, s2))
}

/// Default finite-difference step `1e-4 (1 + |xi|)`.
pub fn default_fd_step<T: Real>(xi: &[T]) -> T {
    let n = xi.iter().fold(T::zero(), |s, x| s + *x * *x).sqrt();
    lit::<T>(1e-4) * (T::one() + n)
}

/// Continue `prof` in `steps` increments to `target_xi` and return the family
/// centered there.
pub fn continue_family<T: Real>(
    prof: &Profile<T>,
    target_xi: &[T],
    steps: usize,
) -> Result<Family<T>> {
    continue_family_with_tol(prof, target_xi, steps, lit(DEFAULT_NEWTON_TOL))
}

pub fn continue_family_with_tol<T: Real>(
    prof: &Profile<T>,
    target_xi: &[T],
    steps: usize,
    tol: T,
) -> Result<Family<T>> {
    if steps == 0 {
        return invalid("continuation needs at least one step");
    }
    if target_xi.len() != prof.xi.len() {
        return invalid("target xi has the wrong length");
    }
    let res = prof.residual();
    let scale = prof.field.sup_norm().max(T::one());
    if !(res <= lit::<T>(1e-6) * scale) {
        return Err(Error::NotEquilibrium {
            residual: to_f64(res),
            tol: to_f64(lit::<T>(1e-6) * scale),
        });
    }
    let op = hessian::assemble(prof)?;
    let rep = hessian::spectrum(&op, op.symmetry_tangent().len() + 4, None)?;
    if !hessian::kernel_matches_orbit(&rep, &op, lit(1e-4)) {
        return Err(Error::KernelDegenerate(format!(
            "kernel dimension {} does not match the {} symmetry directions",
            rep.dim_ker,
            op.symmetry_tangent().len()
        )));
    }
    let grid = prof.grid_arc().clone();
    let start = prof.xi.clone();
    let mut path = vec![start.clone()];
    let solver = match (prof.kind, prof.model) {
        (ProfileKind::PlaneWave, ModelParams::Coupled(params)) => {
            let signs = [
                prof.field.component(0)[0].re.signum(),
                prof.field.component(1)[0].re.signum(),
            ];
            for s in 1..=steps {
                let t: T = lit(s as f64 / steps as f64);
                let xi = lerp(&start, target_xi, t);
                plane_wave_zeta_sq(&params, &xi)?;
                path.push(xi);
            }
            FamilySolver::PlaneWave {
                grid,
                params,
                signs,
            }
        }
        (_, model) => {
            let frame = comoving_frame(prof);
            let mut anchors = vec![(prof.omega.clone(), frame.comps.clone())];
            let mut current = frame.comps;
            let mut t = T::zero();
            let mut dt: T = T::one() / lit(steps as f64);
            let mut halvings = 0;
            let omega_of = |xi: &[T]| -> Vec<T> {
                let c = *xi.last().expect("line xi carries a velocity");
                let q = c * c / lit(4.0);
                xi[..xi.len() - 1].iter().map(|&w| w + q).collect()
            };
            while t < T::one() {
                let t_next = (t + dt).min(T::one());
                let xi = lerp(&start, target_xi, t_next);
                let omega = omega_of(&xi);
                if omega.iter().any(|&w| !(w < T::zero())) {
                    return invalid("continuation path leaves the region omega < 0");
                }
                match solve_even_real(&model, &grid, &omega, current.clone(), tol, MAX_NEWTON_ITER)
                {
                    Ok(out) => {
                        let fx = frame_xi(&omega, &grid, &model);
                        let (lo, hi) = reduced_extremes(&model, &grid, &fx, &out.u);
                        if lo < lit::<T>(1e-6) * hi {
                            return Err(Error::KernelDegenerate(format!(
                                "reduced Jacobian nearly singular at xi = {:?}",
                                xi.iter().map(|x| to_f64(*x)).collect::<Vec<_>>()
                            )));
                        }
                        current = out.u;
                        anchors.push((omega, current.clone()));
                        path.push(xi);
                        t = t_next;
                    }
                    Err(e) => {
                        halvings += 1;
                        if halvings > MAX_HALVINGS {
                            return Err(e);
                        }
                        dt *= lit(0.5);
                    }
                }
            }
            match model {
                ModelParams::SingleNls { p, .. } => FamilySolver::Soliton { grid, p },
                ModelParams::Coupled(params) => FamilySolver::Coupled {
                    grid,
                    params,
                    anchors,
                },
            }
        }
    };
    let fam = Family {
        center_xi: target_xi.to_vec(),
        fd_step: default_fd_step(target_xi),
        tol,
        path,
        solver,
        cache: RwLock::new(HashMap::new()),
    };
    Ok(fam)
}

/// Family centered at the profile's own parameters.
pub fn family_at<T: Real>(prof: &Profile<T>) -> Result<Family<T>> {
    continue_family(prof, &prof.xi.clone(), 1)
}

fn lerp<T: Real>(a: &[T], b: &[T], t: T) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| x + (y - x) * t).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::invariants_of;

    fn line(r: f64, n: usize) -> Arc<Grid<f64>> {
        Arc::new(Grid::line(r, n).unwrap())
    }

    #[test]
    fn explicit_soliton_values() {
        let p = soliton_explicit(-1.0, line(20.0, 512)).unwrap();
        assert!((p.field.component(0)[256].re - 2f64.sqrt()).abs() < 1e-12);
        let inv = invariants_of(&p.field, &p.model).unwrap();
        assert!((inv.f[0] - 2.0).abs() < 1e-10);
        let q = soliton_explicit(-4.0, line(20.0, 512)).unwrap();
        for (x, z) in q.grid().nodes().iter().zip(q.field.component(0)) {
            assert!((z.re - 8f64.sqrt() / (2.0 * x).cosh()).abs() < 1e-12);
        }
        assert!(soliton_explicit(0.0, line(20.0, 512)).is_err());
    }

    #[test]
    fn explicit_soliton_is_stationary_on_wide_box() {
        let p = soliton_explicit(-1.0, line(30.0, 768)).unwrap();
        assert!(p.residual() <= 1e-9, "residual {}", p.residual());
    }

    #[test]
    fn newton_matches_closed_form() {
        let g = line(30.0, 768);
        let e = soliton_explicit(-1.0, g.clone()).unwrap();
        let s = soliton_solve(-1.0, 3.0, g, 1e-12).unwrap();
        let d = s.field.sub(&e.field).sup_norm();
        assert!(d <= 1e-10, "difference {d}");
    }

    #[test]
    fn quadratic_soliton_amplitude() {
        let s = soliton_solve(-1.0, 2.0, line(20.0, 512), 1e-11).unwrap();
        assert!((s.field.component(0)[256].re - 1.5).abs() < 1e-8);
        assert!(soliton_solve(0.0, 3.0, line(20.0, 512), 1e-11).is_err());
    }

    #[test]
    fn coupled_zeta_values() {
        let (a, b): (f64, f64) = coupled_zeta_sq(&CoupledParams::new(1.0, 1.0, 2.0)).unwrap();
        assert!((a - 1.0 / 3.0).abs() < 1e-15 && (b - 1.0 / 3.0).abs() < 1e-15);
        let (a, b): (f64, f64) = coupled_zeta_sq(&CoupledParams::new(2.0, 3.0, 1.0)).unwrap();
        assert!((a - 0.4).abs() < 1e-15 && (b - 0.2).abs() < 1e-15);
        assert!((2.0 * a + 1.0 * b - 1.0).abs() < 1e-15);
        assert!(coupled_zeta_sq(&CoupledParams::new(1.0, 1.0, 1.0)).is_err());
        assert!(coupled_zeta_sq(&CoupledParams::new(1.0, 3.0, 2.0)).is_err());
    }

    #[test]
    fn plane_wave_dispersion() {
        let g = Arc::new(Grid::periodic(std::f64::consts::TAU, 16).unwrap());
        let p = plane_wave(1.0, 1.0, CoupledParams::new(-1.0, -1.0, -0.5), g.clone()).unwrap();
        assert_eq!(p.xi, vec![1.5, 1.5]);
        let p = plane_wave(1.0, 1.0, CoupledParams::new(-1.0, -1.0, -2.0), g.clone()).unwrap();
        assert_eq!(p.xi, vec![3.0, 3.0]);
        let free = CoupledParams::new(0.0, 0.0, 0.0).with_k(1.0);
        let p = plane_wave(1.0, 1.0, free, g.clone()).unwrap();
        assert_eq!(p.xi, vec![1.0, 1.0]);
        assert!(p.residual() < 1e-12);
        assert!(plane_wave(0.0, 1.0, free, g).is_err());
    }

    #[test]
    fn boost_updates_xi_and_momentum() {
        let p = soliton_explicit(-1.0, line(20.0, 512)).unwrap();
        assert_eq!(boost(&p, 0.0).unwrap(), p);
        let b = boost(&p, 2.0).unwrap();
        assert_eq!(b.xi, vec![-2.0, 2.0]);
        let inv = invariants_of(&b.field, &b.model).unwrap();
        assert!((inv.f[0] - 2.0).abs() < 1e-9);
        assert!((inv.f[1] - 2.0).abs() < 1e-9);
        let g = Arc::new(Grid::periodic(std::f64::consts::TAU, 16).unwrap());
        let w = plane_wave(1.0, 1.0, CoupledParams::new(-1.0, -1.0, -0.5), g).unwrap();
        assert!(boost(&w, 2.0).is_err());
    }

    #[test]
    fn resample_is_exact_for_band_limited_data() {
        let g = Grid::<f64>::periodic(std::f64::consts::TAU, 16).unwrap();
        let u: Vec<f64> = g
            .nodes()
            .iter()
            .map(|x| (2.0 * x).cos() + x.sin())
            .collect();
        let v = resample(&u, 32);
        let g2 = Grid::<f64>::periodic(std::f64::consts::TAU, 32).unwrap();
        for (x, y) in g2.nodes().iter().zip(&v) {
            assert!(((2.0 * x).cos() + x.sin() - y).abs() < 1e-13);
        }
    }
}
