//! Split-step time evolution and empirical orbital stability.

use std::fmt::Write as _;
use std::io::{self, Write};
use std::sync::Arc;

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::field::{apply_symbol, inner_raw, Field};
use crate::grid::{Grid, GridKind};
use crate::linalg::{dot, orthonormalize};
use crate::model::{
    apply_generator, check_shape, energy, kinetic_symbol, momentum_map, nonlinear_potential,
    orbit_tangent, Generator, ModelParams,
};
use crate::profiles::Profile;
use crate::scalar::{lit, to_f64, Real};

pub const BLOW_UP_SUP: f64 = 1e6;

/// Strang splitting of `i u_t = K u - N(u) u`.
#[derive(Debug, Clone)]
pub struct Propagator<T> {
    model: ModelParams<T>,
    grid: Arc<Grid<T>>,
    symbol: Vec<Vec<T>>,
}

impl<T: Real> Propagator<T> {
    pub fn new(model: ModelParams<T>, grid: Arc<Grid<T>>) -> Result<Self> {
        model.validate(&grid)?;
        let symbol = (0..model.n_components())
            .map(|c| {
                (0..grid.n_points())
                    .map(|j| kinetic_symbol(&model, &grid, c, j))
                    .collect()
            })
            .collect();
        Ok(Self {
            model,
            grid,
            symbol,
        })
    }

    fn nonlinear(&self, u: &mut [Vec<Complex<T>>], t: T) {
        let f = Field::from_parts(self.grid.clone(), u.to_vec());
        let pot = nonlinear_potential(&self.model, &f);
        for (c, comp) in u.iter_mut().enumerate() {
            for (j, z) in comp.iter_mut().enumerate() {
                *z *= Complex::from_polar(T::one(), pot[c][j] * t);
            }
        }
    }

    fn linear(&self, u: &mut [Vec<Complex<T>>], t: T) {
        for (c, comp) in u.iter_mut().enumerate() {
            T::fft(comp);
            for (j, z) in comp.iter_mut().enumerate() {
                *z *= Complex::from_polar(T::one(), -self.symbol[c][j] * t);
            }
            T::ifft(comp);
        }
    }

    /// One step of size `dt`; negative `dt` runs backwards.
    pub fn step(&self, u: &mut [Vec<Complex<T>>], dt: T) {
        let half = dt * lit(0.5);
        self.nonlinear(u, half);
        self.linear(u, dt);
        self.nonlinear(u, half);
    }

    /// Advance a field by `steps` steps of size `dt`.
    pub fn advance(&self, u: &Field<T>, dt: T, steps: usize) -> Result<Field<T>> {
        let mut v = u.components().to_vec();
        for k in 0..steps {
            self.step(&mut v, dt);
            guard(&v, dt * lit((k + 1) as f64))?;
        }
        Ok(Field::from_parts(self.grid.clone(), v))
    }
}

fn guard<T: Real>(v: &[Vec<Complex<T>>], t: T) -> Result<()> {
    let sup = v.iter().flatten().fold(T::zero(), |m, z| {
        if z.norm().is_nan() {
            T::infinity()
        } else {
            m.max(z.norm())
        }
    });
    if !(sup <= lit(BLOW_UP_SUP)) {
        return Err(Error::BlowUp {
            time: to_f64(t),
            sup: to_f64(sup),
        });
    }
    Ok(())
}

/// Sampled solution with its invariants.
#[derive(Debug, Clone)]
pub struct Trajectory<T> {
    pub times: Vec<T>,
    pub snapshots: Vec<Field<T>>,
    pub energy: Vec<T>,
    /// Momentum map per sample, in generator order.
    pub f: Vec<Vec<T>>,
    pub dt: T,
    pub stride: usize,
    pub scheme: &'static str,
}

fn step_count<T: Real>(dt: T, t_end: T) -> Result<(usize, T)> {
    if !(dt > T::zero()) || !(t_end >= T::zero()) {
        return invalid("need dt > 0 and t_end >= 0");
    }
    let n = (to_f64(t_end) / to_f64(dt) - 1e-9).ceil().max(0.0) as usize;
    let dt_eff = if n == 0 { dt } else { t_end / lit(n as f64) };
    Ok((n, dt_eff))
}

/// Evolve and call `sample(t, u)` at `t = 0` and every `stride` steps (and at the end).
pub fn evolve_with<T: Real>(
    u0: &Field<T>,
    params: &ModelParams<T>,
    dt: T,
    t_end: T,
    stride: usize,
    mut sample: impl FnMut(T, &Field<T>) -> Result<()>,
) -> Result<T> {
    check_shape(params, u0)?;
    if stride == 0 {
        return invalid("sample stride must be positive");
    }
    let (n, dt) = step_count(dt, t_end)?;
    let prop = Propagator::new(*params, u0.grid_arc().clone())?;
    let grid = u0.grid_arc().clone();
    let mut v = u0.components().to_vec();
    sample(T::zero(), u0)?;
    for k in 1..=n {
        prop.step(&mut v, dt);
        let t = dt * lit(k as f64);
        guard(&v, t)?;
        if k % stride == 0 || k == n {
            sample(t, &Field::from_parts(grid.clone(), v.clone()))?;
        }
    }
    Ok(dt)
}

pub fn evolve<T: Real>(
    u0: &Field<T>,
    params: &ModelParams<T>,
    dt: T,
    t_end: T,
    stride: usize,
) -> Result<Trajectory<T>> {
    let mut tr = Trajectory {
        times: Vec::new(),
        snapshots: Vec::new(),
        energy: Vec::new(),
        f: Vec::new(),
        dt,
        stride,
        scheme: "strang",
    };
    let dt_eff = evolve_with(u0, params, dt, t_end, stride, |t, u| {
        tr.times.push(t);
        tr.energy.push(energy(params, u));
        tr.f.push(momentum_map(params, u));
        tr.snapshots.push(u.clone());
        Ok(())
    })?;
    tr.dt = dt_eff;
    Ok(tr)
}

impl<T: Real> Trajectory<T> {
    /// Largest relative energy deviation from the first sample.
    pub fn energy_drift(&self) -> T {
        let h0 = self.energy[0];
        let scale = h0.abs().max(T::min_positive_value());
        self.energy
            .iter()
            .fold(T::zero(), |m, h| m.max((*h - h0).abs() / scale))
    }

    /// Largest absolute deviation of any momentum component.
    pub fn momentum_drift(&self) -> T {
        let f0 = &self.f[0];
        self.f.iter().fold(T::zero(), |m, f| {
            f.iter().zip(f0).fold(m, |m, (a, b)| m.max((*a - *b).abs()))
        })
    }

    /// `t,H,F1,..` per sample.
    pub fn to_csv(&self) -> String {
        let m = self.f.first().map_or(0, |f| f.len());
        let mut s = String::from("t,H");
        for k in 0..m {
            let _ = write!(s, ",F{}", k + 1);
        }
        s.push('\n');
        for (i, t) in self.times.iter().enumerate() {
            let _ = write!(s, "{:e},{:e}", to_f64(*t), to_f64(self.energy[i]));
            for v in &self.f[i] {
                let _ = write!(s, ",{:e}", to_f64(*v));
            }
            s.push('\n');
        }
        s
    }

    /// Header `N, components, dt, stride` (u64, u64, f64, u64), then each
    /// snapshot as interleaved re/im per component, all little-endian.
    pub fn write_binary(&self, mut w: impl Write) -> io::Result<()> {
        let n = self.snapshots.first().map_or(0, |f| f.n_points());
        let m = self.snapshots.first().map_or(0, |f| f.n_components());
        w.write_all(&(n as u64).to_le_bytes())?;
        w.write_all(&(m as u64).to_le_bytes())?;
        w.write_all(&to_f64(self.dt).to_le_bytes())?;
        w.write_all(&(self.stride as u64).to_le_bytes())?;
        for f in &self.snapshots {
            for c in f.components() {
                for z in c {
                    w.write_all(&to_f64(z.re).to_le_bytes())?;
                    w.write_all(&to_f64(z.im).to_le_bytes())?;
                }
            }
        }
        Ok(())
    }
}

/// Group element `(phases.., shift)` with `u ~ Phi_g(ref)`, and the H1 distance.
#[derive(Debug, Clone, Serialize)]
pub struct Alignment<T> {
    pub g: Vec<T>,
    pub distance: T,
    /// False when the refinement did not converge and `g` is the coarse minimum.
    pub converged: bool,
}

/// `Phi_g(u)_c = exp(-i gamma_c) u_c(x - a)`.
pub fn group_action<T: Real>(gens: &[Generator], g: &[T], u: &Field<T>) -> Field<T> {
    let mut out = u.clone();
    for (gen, &x) in gens.iter().zip(g) {
        out = match gen {
            Generator::Phase(c) => {
                let rot = Complex::from_polar(T::one(), -x);
                out.map(|k, _, z| if k == *c { z * rot } else { z })
            }
            Generator::Translation => out.shifted(x),
        };
    }
    out
}

fn wrap_angle<T: Real>(x: T) -> T {
    let tau = T::TAU();
    let mut y = x % tau;
    if y > T::PI() {
        y -= tau;
    } else if y <= -T::PI() {
        y += tau;
    }
    y
}

fn h1_distance<T: Real>(a: &Field<T>, b: &Field<T>) -> T {
    a.sub(b).norm_h1()
}

/// Best phases for `w ~ Phi_{(gamma, 0)}(r)` given a fixed translation.
fn best_phases<T: Real>(w: &Field<T>, r: &Field<T>) -> Vec<T> {
    (0..r.n_components())
        .map(|c| {
            let z = w
                .component(c)
                .iter()
                .zip(r.component(c))
                .fold(Complex::new(T::zero(), T::zero()), |s, (a, b)| {
                    s + *a * b.conj()
                });
            if z.norm() > T::zero() {
                -z.arg()
            } else {
                T::zero()
            }
        })
        .collect()
}

fn coarse<T: Real>(u: &Field<T>, r: &Field<T>, gens: &[Generator]) -> Vec<T> {
    let has_shift = gens.contains(&Generator::Translation);
    let mut a = T::zero();
    if has_shift {
        // cross-correlation of the moduli
        let n = u.n_points();
        let mut acc = vec![Complex::new(T::zero(), T::zero()); n];
        for c in 0..u.n_components() {
            let mut fu: Vec<Complex<T>> = u
                .component(c)
                .iter()
                .map(|z| Complex::new(z.norm(), T::zero()))
                .collect();
            let mut fr: Vec<Complex<T>> = r
                .component(c)
                .iter()
                .map(|z| Complex::new(z.norm(), T::zero()))
                .collect();
            T::fft(&mut fu);
            T::fft(&mut fr);
            for j in 0..n {
                acc[j] += fu[j] * fr[j].conj();
            }
        }
        T::ifft(&mut acc);
        let best = (0..n)
            .max_by(|&i, &j| {
                acc[i]
                    .re
                    .partial_cmp(&acc[j].re)
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .unwrap_or(0);
        let h = u.grid().spacing();
        let s = if best > n / 2 {
            best as f64 - n as f64
        } else {
            best as f64
        };
        a = h * lit(s);
    }
    let w = if has_shift { u.shifted(-a) } else { u.clone() };
    let ph = best_phases(&w, r);
    gens.iter()
        .map(|g| match g {
            Generator::Phase(c) => ph[*c],
            Generator::Translation => a,
        })
        .collect()
}

fn refine_alignment<T: Real>(
    u: &Field<T>,
    gens: &[Generator],
    tangents: &[Field<T>],
    mut g: Vec<T>,
) -> Option<Vec<T>> {
    let m = gens.len();
    for _ in 0..50 {
        let w = inverse_action(gens, &g, u);
        let res: Vec<T> = tangents.iter().map(|t| inner_raw(&w, t)).collect();
        let xw: Vec<Field<T>> = gens.iter().map(|&gg| orbit_tangent(gg, &w)).collect();
        let mut jac = vec![T::zero(); m * m];
        for (i, t) in tangents.iter().enumerate() {
            for (j, x) in xw.iter().enumerate() {
                jac[i * m + j] = inner_raw(x, t);
            }
        }
        let rhs: Vec<T> = res.iter().map(|x| -*x).collect();
        let step = T::lu_solve(m, &jac, &rhs)?;
        for (gi, s) in g.iter_mut().zip(&step) {
            *gi += *s;
        }
        let size = step.iter().fold(T::zero(), |a, s| a.max(s.abs()));
        if !size.is_finite() {
            return None;
        }
        if size <= lit::<T>(1e-14) * (T::one() + g.iter().fold(T::zero(), |a, x| a.max(x.abs()))) {
            return Some(g);
        }
    }
    None
}

/// `Phi_{-g} u`.
fn inverse_action<T: Real>(gens: &[Generator], g: &[T], u: &Field<T>) -> Field<T> {
    let neg: Vec<T> = g.iter().map(|x| -*x).collect();
    group_action(gens, &neg, u)
}

fn normalize_g<T: Real>(gens: &[Generator], g: &mut [T]) {
    for (gen, x) in gens.iter().zip(g.iter_mut()) {
        if matches!(gen, Generator::Phase(_)) {
            *x = wrap_angle(*x);
        }
    }
}

/// Align `u` to the group orbit of `reference` starting from `guess` (or a
/// coarse search when `None`).
pub fn align_to_orbit_from<T: Real>(
    u: &Field<T>,
    reference: &Field<T>,
    guess: Option<&[T]>,
) -> Result<Alignment<T>> {
    u.compatible(reference)?;
    let model_gens: Vec<Generator> = {
        let mut v: Vec<Generator> = (0..u.n_components()).map(Generator::Phase).collect();
        if u.grid().kind() == GridKind::Line {
            v.push(Generator::Translation);
        }
        v
    };
    let gens = &model_gens;
    // H1 pairing against the tangent, written as an L2 pairing with (1 - d_xx) X
    let q = u.grid().wavenumbers().to_vec();
    let tangents: Vec<Field<T>> = gens
        .iter()
        .map(|&g| {
            apply_symbol(&orbit_tangent(g, reference), |_, j| {
                Complex::new(T::one() + q[j] * q[j], T::zero())
            })
        })
        .collect();
    let start = match guess {
        Some(g) if g.len() == gens.len() => g.to_vec(),
        _ => coarse(u, reference, gens),
    };
    let (mut g, converged) = match refine_alignment(u, gens, &tangents, start.clone()) {
        Some(g) => (g, true),
        None => {
            let c = coarse(u, reference, gens);
            match refine_alignment(u, gens, &tangents, c.clone()) {
                Some(g) => (g, true),
                None => (c, false),
            }
        }
    };
    normalize_g(gens, &mut g);
    let w = inverse_action(gens, &g, u);
    Ok(Alignment {
        distance: h1_distance(&w, reference),
        g,
        converged,
    })
}

pub fn align_to_orbit<T: Real>(u: &Field<T>, reference: &Profile<T>) -> Result<Alignment<T>> {
    align_to_orbit_from(u, &reference.field, None)
}

/// Perturbation shapes for stability experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum Perturbation {
    /// Random coefficients on the lowest `modes` Fourier modes (times a
    /// Gaussian envelope on line grids).
    RandomBandLimited { modes: usize },
    /// Random amplitudes on the Fourier modes `+-n` only.
    FourierMode { n: usize },
    /// Random band-limited, projected off the orbit tangent and the
    /// directions `B_g u`.
    KernelOrthogonal { modes: usize },
}

fn envelope<T: Real>(grid: &Grid<T>, x: T) -> T {
    match grid.kind() {
        GridKind::Periodic => T::one(),
        GridKind::Line => {
            let s = grid.extent() / lit(6.0);
            (-(x * x) / (lit::<T>(2.0) * s * s)).exp()
        }
    }
}

fn random_modes<T: Real>(
    grid: &Arc<Grid<T>>,
    m: usize,
    modes: &[i64],
    rng: &mut ChaCha8Rng,
) -> Field<T> {
    let base = T::TAU() / grid.length();
    let coefs: Vec<Vec<(i64, Complex<T>)>> = (0..m)
        .map(|_| {
            modes
                .iter()
                .map(|&k| {
                    let re: f64 = rng.gen_range(-1.0..1.0);
                    let im: f64 = rng.gen_range(-1.0..1.0);
                    (k, Complex::new(lit(re), lit(im)))
                })
                .collect()
        })
        .collect();
    Field::from_fn(grid.clone(), m, |c, x| {
        let s = coefs[c]
            .iter()
            .fold(Complex::new(T::zero(), T::zero()), |s, (k, a)| {
                s + *a * Complex::from_polar(T::one(), base * lit(*k as f64) * x)
            });
        s * envelope(grid, x)
    })
}

fn h1_normalize<T: Real>(v: Field<T>) -> Result<Field<T>> {
    let n = v.norm_h1();
    if !(n > T::zero()) {
        return invalid("perturbation vanished");
    }
    Ok(v.scale(T::one() / n))
}

/// H1-normalized perturbation direction at `prof`.
pub fn perturbation<T: Real>(
    prof: &Profile<T>,
    class: Perturbation,
    seed: u64,
) -> Result<Field<T>> {
    let grid = prof.grid_arc();
    let m = prof.field.n_components();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let band = |k: usize| -> Vec<i64> { (-(k as i64)..=k as i64).collect() };
    match class {
        Perturbation::RandomBandLimited { modes } => {
            h1_normalize(random_modes(grid, m, &band(modes), &mut rng))
        }
        Perturbation::FourierMode { n } => {
            if n == 0 {
                return invalid("mode number must be positive");
            }
            let k = n as i64;
            h1_normalize(random_modes(grid, m, &[-k, k], &mut rng))
        }
        Perturbation::KernelOrthogonal { modes } => {
            let v = random_modes(grid, m, &band(modes), &mut rng);
            let gens = prof.model.generators(prof.grid());
            let mut dirs: Vec<Vec<T>> = Vec::new();
            for &g in &gens {
                dirs.push(orbit_tangent(g, &prof.field).to_real_vec());
                dirs.push(apply_generator(g, &prof.field).to_real_vec());
            }
            let q = orthonormalize(&dirs, lit(1e-10));
            let mut x = v.to_real_vec();
            for _ in 0..2 {
                for b in &q {
                    let c = dot(b, &x);
                    for (xi, bi) in x.iter_mut().zip(b) {
                        *xi -= c * *bi;
                    }
                }
            }
            h1_normalize(Field::from_real_vec(grid.clone(), m, &x)?)
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentOptions<T> {
    pub eps: T,
    pub dt: T,
    pub t_end: T,
    pub stride: usize,
    pub perturbation: Perturbation,
    pub seed: u64,
    /// Keep the sampled fields in the returned trajectory.
    pub keep_snapshots: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DynamicVerdict {
    /// Orbit distance stayed within `10 eps`.
    Bounded,
    Grew,
}

#[derive(Debug, Clone, Serialize)]
pub struct OrbitDistanceSeries<T> {
    pub times: Vec<T>,
    pub distances: Vec<T>,
    pub group_params: Vec<Vec<T>>,
}

impl<T: Real> OrbitDistanceSeries<T> {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,distance");
        let m = self.group_params.first().map_or(0, |g| g.len());
        for k in 0..m {
            let _ = write!(s, ",g{}", k + 1);
        }
        s.push('\n');
        for i in 0..self.times.len() {
            let _ = write!(
                s,
                "{:e},{:e}",
                to_f64(self.times[i]),
                to_f64(self.distances[i])
            );
            for g in &self.group_params[i] {
                let _ = write!(s, ",{:e}", to_f64(*g));
            }
            s.push('\n');
        }
        s
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport<T> {
    pub series: OrbitDistanceSeries<T>,
    pub initial_distance: T,
    pub max_distance: T,
    pub growth_rate: Option<T>,
    pub verdict: DynamicVerdict,
    /// Set for `p < 3`, where the continuum argument does not cover the run.
    pub empirical_only: bool,
    pub energy_drift: T,
    /// Largest deviation of any momentum-map component.
    pub momentum_drift: T,
    pub options: ExperimentOptions<T>,
    #[serde(skip)]
    pub trajectory: Trajectory<T>,
}

/// Least-squares slope of `log d` against `t` over samples with `d` in `[lo, hi]`.
pub fn fit_growth_rate<T: Real>(times: &[T], d: &[T], lo: T, hi: T) -> Option<T> {
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(d)
        .filter(|(_, &x)| x >= lo && x <= hi)
        .map(|(&t, &x)| (to_f64(t), to_f64(x).ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(lit(sxy / sxx))
}

/// Perturb, evolve, align every sample to the orbit and summarize.
pub fn stability_experiment<T: Real>(
    prof: &Profile<T>,
    opts: &ExperimentOptions<T>,
) -> Result<StabilityReport<T>> {
    if !(opts.eps > T::zero()) {
        return invalid("eps must be positive");
    }
    let v = perturbation(prof, opts.perturbation, opts.seed)?;
    let u0 = prof.field.axpy(opts.eps, &v);
    let mut series = OrbitDistanceSeries {
        times: Vec::new(),
        distances: Vec::new(),
        group_params: Vec::new(),
    };
    let mut guess: Option<Vec<T>> = None;
    let mut tr = Trajectory {
        times: Vec::new(),
        snapshots: Vec::new(),
        energy: Vec::new(),
        f: Vec::new(),
        dt: opts.dt,
        stride: opts.stride,
        scheme: "strang",
    };
    tr.dt = evolve_with(
        &u0,
        &prof.model,
        opts.dt,
        opts.t_end,
        opts.stride,
        |t, u| {
            let a = align_to_orbit_from(u, &prof.field, guess.as_deref())?;
            guess = Some(a.g.clone());
            series.times.push(t);
            series.distances.push(a.distance);
            series.group_params.push(a.g);
            tr.times.push(t);
            tr.energy.push(energy(&prof.model, u));
            tr.f.push(momentum_map(&prof.model, u));
            if opts.keep_snapshots {
                tr.snapshots.push(u.clone());
            }
            Ok(())
        },
    )?;
    let max_distance = series.distances.iter().fold(T::zero(), |m, d| m.max(*d));
    let ten: T = lit(10.0);
    let growth_rate = fit_growth_rate(&series.times, &series.distances, ten * opts.eps, lit(0.1));
    let verdict = if max_distance <= ten * opts.eps {
        DynamicVerdict::Bounded
    } else {
        DynamicVerdict::Grew
    };
    let empirical_only = matches!(prof.model, ModelParams::SingleNls { p, .. } if p < lit(3.0));
    Ok(StabilityReport {
        initial_distance: series.distances[0],
        series,
        max_distance,
        growth_rate,
        verdict,
        empirical_only,
        energy_drift: tr.energy_drift(),
        momentum_drift: tr.momentum_drift(),
        options: opts.clone(),
        trajectory: tr,
    })
}
