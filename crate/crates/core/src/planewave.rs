//! Closed-form spectra and linear stability of torus plane waves.

use std::fmt::Write as _;

use num_complex::Complex;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::linalg::Signature;
use crate::model::CoupledParams;
use crate::scalar::{lit, to_f64, Real};
use crate::slope::{d2w_closed, ClosedFormPoint};

/// `S = alpha zeta1^2 + gamma zeta2^2`.
fn s_term<T: Real>(p: &CoupledParams<T>, zeta: [T; 2]) -> T {
    p.alpha * zeta[0] * zeta[0] + p.gamma * zeta[1] * zeta[1]
}

/// `C_pm = -S +- sqrt(S^2 - 4 zeta1^2 zeta2^2 (alpha gamma - delta^2))`.
pub fn c_plusminus<T: Real>(params: &CoupledParams<T>, zeta: [T; 2]) -> (T, T) {
    let s = s_term(params, zeta);
    let z = zeta[0] * zeta[0] * zeta[1] * zeta[1];
    // the discriminant equals (alpha z1^2 - gamma z2^2)^2 + 4 z1^2 z2^2 delta^2
    let a = params.alpha * zeta[0] * zeta[0] - params.gamma * zeta[1] * zeta[1];
    let disc = a * a + lit::<T>(4.0) * z * params.delta * params.delta;
    let r = disc.max(T::zero()).sqrt();
    (-s + r, -s - r)
}

fn n_l<T: Real>(n: usize, length: T) -> T {
    T::TAU() / length * lit(n as f64)
}

/// `[lambda^+_{+,n}, lambda^+_{-,n}, lambda^-_{+,n}, lambda^-_{-,n}]`.
pub fn hessian_mode_eigs<T: Real>(
    n: usize,
    params: &CoupledParams<T>,
    zeta: [T; 2],
    length: T,
) -> [T; 4] {
    let (cp, cm) = c_plusminus(params, zeta);
    let nl = n_l(n, length);
    let b = params.beta;
    let base = b * nl * nl;
    let half: T = lit(0.5);
    let sixteen: T = lit(16.0);
    let root = |c: T| (c * c + sixteen * b * b * params.k * params.k * nl * nl).sqrt();
    let (rp, rm) = (root(cp), root(cm));
    [
        base + half * (cp + rp),
        base + half * (cp - rp),
        base + half * (cm + rm),
        base + half * (cm - rm),
    ]
}

/// Margin `beta (2 pi / L)^2 + C_- - 4 beta k^2` of the coercivity condition.
pub fn coercivity_condition<T: Real>(
    params: &CoupledParams<T>,
    zeta: [T; 2],
    length: T,
) -> Result<(bool, T)> {
    if params.det() == T::zero() {
        return invalid("alpha gamma = delta^2: the momentum map is not invertible");
    }
    let (_, cm) = c_plusminus(params, zeta);
    let nl = n_l(1, length);
    let margin = params.beta * nl * nl + cm - lit::<T>(4.0) * params.beta * params.k * params.k;
    Ok((margin > T::zero(), margin))
}

/// Whether the squared linearization eigenvalues are known in closed form.
pub fn closed_form_applies<T: Real>(params: &CoupledParams<T>, zeta: [T; 2]) -> bool {
    let a = params.alpha * zeta[0] * zeta[0];
    let g = params.gamma * zeta[1] * zeta[1];
    params.k == T::zero() || (a - g).abs() <= lit::<T>(1e-12) * (a.abs() + g.abs())
}

/// Coefficients `[c0, c1, c2, c3]` of the monic quartic `P_n`.
pub fn char_poly<T: Real>(
    n: usize,
    params: &CoupledParams<T>,
    zeta: [T; 2],
    length: T,
) -> [Complex<T>; 4] {
    let nl = n_l(n, length);
    let b = params.beta;
    let bn = b * nl * nl;
    let bk2 = b * params.k * params.k;
    let s = s_term(params, zeta);
    let a = params.alpha * zeta[0] * zeta[0] - params.gamma * zeta[1] * zeta[1];
    let z = zeta[0] * zeta[0] * zeta[1] * zeta[1];
    let (two, four, eight): (T, T, T) = (lit(2.0), lit(4.0), lit(8.0));
    let c2 = -two * bn * (-bn + s - four * bk2);
    let c1 = eight * bn * b * params.k * nl * a;
    let c0 = bn * bn * bn * (bn - two * s)
        + four * bn * bn * z * params.det()
        + eight * bn * bk2 * bn * (-bn + s + two * bk2);
    [
        Complex::new(c0, T::zero()),
        Complex::new(T::zero(), c1),
        Complex::new(c2, T::zero()),
        Complex::new(T::zero(), T::zero()),
    ]
}

fn horner<T: Real>(c: &[Complex<T>; 4], z: Complex<T>) -> (Complex<T>, Complex<T>) {
    // monic quartic and its derivative
    let mut p = Complex::new(T::one(), T::zero());
    let mut dp = Complex::new(T::zero(), T::zero());
    for k in (0..4).rev() {
        dp = dp * z + p;
        p = p * z + c[k];
    }
    (p, dp)
}

/// Roots of a monic quartic by Aberth iteration.
pub fn quartic_roots<T: Real>(c: &[Complex<T>; 4]) -> [Complex<T>; 4] {
    let bound = c.iter().fold(T::zero(), |m, z| m.max(z.norm())) + T::one();
    if c.iter().all(|z| z.norm() == T::zero()) {
        return [Complex::new(T::zero(), T::zero()); 4];
    }
    let mut z: [Complex<T>; 4] = std::array::from_fn(|k| {
        let t = lit::<T>(0.4 + k as f64 * std::f64::consts::FRAC_PI_2);
        Complex::from_polar(bound * lit(0.5), t)
    });
    let eps: T = T::epsilon() * lit(4.0);
    for _ in 0..500 {
        let mut moved = T::zero();
        for i in 0..4 {
            let (p, dp) = horner(c, z[i]);
            if p.norm() == T::zero() {
                continue;
            }
            let ratio = p / dp;
            let mut s = Complex::new(T::zero(), T::zero());
            for j in 0..4 {
                if j != i {
                    let d = z[i] - z[j];
                    if d.norm() > T::zero() {
                        s += Complex::new(T::one(), T::zero()) / d;
                    }
                }
            }
            let w = ratio / (Complex::new(T::one(), T::zero()) - ratio * s);
            if w.re.is_finite() && w.im.is_finite() {
                z[i] -= w;
                moved = moved.max(w.norm() / (T::one() + z[i].norm()));
            }
        }
        if moved <= eps {
            break;
        }
    }
    z.sort_by(|a, b| {
        (a.re, a.im)
            .partial_cmp(&(b.re, b.im))
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    z
}

/// Linearization eigenvalue data for one mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LinEigs<T> {
    /// `lambda^2` in closed form, `(plus, minus)`.
    ClosedForm(T, T),
    /// The four roots of `P_n`.
    Roots([Complex<T>; 4]),
}

impl<T: Real> LinEigs<T> {
    /// Largest real part among the eigenvalues of the linearization.
    pub fn growth_rate(&self) -> T {
        match *self {
            LinEigs::ClosedForm(p, m) => p.max(m).max(T::zero()).sqrt(),
            LinEigs::Roots(r) => r.iter().fold(T::zero(), |a, z| a.max(z.re)),
        }
    }
}

pub fn linearization_eigs<T: Real>(
    n: usize,
    params: &CoupledParams<T>,
    zeta: [T; 2],
    length: T,
) -> LinEigs<T> {
    let nl = n_l(n, length);
    let b = params.beta;
    let bn = b * nl * nl;
    let s = s_term(params, zeta);
    let z = zeta[0] * zeta[0] * zeta[1] * zeta[1];
    let four: T = lit(4.0);
    if closed_form_applies(params, zeta) {
        let bk2 = b * params.k * params.k;
        let a = params.alpha * zeta[0] * zeta[0] - params.gamma * zeta[1] * zeta[1];
        let rad = if params.k == T::zero() {
            a * a + four * z * params.delta * params.delta
        } else {
            four * z * params.delta * params.delta + lit::<T>(16.0) * bk2 * (bn - s)
        };
        if rad >= T::zero() {
            let r = rad.sqrt();
            let mid = -bn + s - four * bk2;
            return LinEigs::ClosedForm(bn * (mid + r), bn * (mid - r));
        }
    }
    LinEigs::Roots(quartic_roots(&char_poly(n, params, zeta, length)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LinearVerdict {
    Stable,
    Unstable,
    /// Outside the closed-form regimes; only the roots are reported.
    NumericalOnly,
}

#[derive(Debug, Clone, Serialize)]
pub struct ModeRow<T> {
    pub n: usize,
    pub lambda_plus_plus: T,
    pub lambda_plus_minus: T,
    pub lambda_minus_plus: T,
    pub lambda_minus_minus: T,
    pub lambda2_plus: Option<T>,
    pub lambda2_minus: Option<T>,
    /// Roots of `P_n` as `[re, im]` pairs when no closed form applies.
    pub roots: Option<Vec<[T; 2]>>,
    pub growth_rate: T,
}

#[derive(Debug, Clone, Serialize)]
pub struct ModeTable<T> {
    pub rows: Vec<ModeRow<T>>,
    pub c_plus: T,
    pub c_minus: T,
    pub coercivity_margin: T,
    pub p_d2w: usize,
    /// Negative Hessian eigenvalues over the table, `+-n` counted separately.
    pub n_neg: usize,
    /// Zero Hessian eigenvalues over the table, `+-n` counted separately.
    pub n_zero: usize,
    pub coercive: bool,
    pub linearly_stable: LinearVerdict,
    /// Largest growth rate over the table, from closed forms or roots.
    pub max_growth_rate: T,
}

/// Per-mode table for `n = 0..=n_max` with verdicts.
pub fn mode_table<T: Real>(
    params: &CoupledParams<T>,
    zeta: [T; 2],
    length: T,
    n_max: usize,
) -> Result<ModeTable<T>> {
    if n_max < 1 {
        return invalid("n_max must be at least 1");
    }
    if zeta[0] == T::zero() || zeta[1] == T::zero() {
        return invalid("plane-wave amplitudes must be nonzero");
    }
    let (c_plus, c_minus) = c_plusminus(params, zeta);
    let (_, margin) = coercivity_condition(params, zeta, length)?;
    let d2w = d2w_closed(&ClosedFormPoint::Torus {
        params: *params,
        zeta,
        length,
    })?;
    let scale = c_plus
        .abs()
        .max(c_minus.abs())
        .max(params.beta * n_l(n_max, length).powi(2));
    let zero_tol = scale * lit(1e-12);
    let closed = closed_form_applies(params, zeta);
    let mut rows = Vec::with_capacity(n_max + 1);
    let mut sig = Signature { p: 0, z: 0, n: 0 };
    let mut unstable = false;
    let mut max_growth = T::zero();
    for n in 0..=n_max {
        let l = hessian_mode_eigs(n, params, zeta, length);
        let mult = if n == 0 { 1 } else { 2 };
        for &v in &l {
            if v < -zero_tol {
                sig.n += mult;
            } else if v <= zero_tol {
                sig.z += mult;
            } else {
                sig.p += mult;
            }
        }
        let lin = linearization_eigs(n, params, zeta, length);
        let g = lin.growth_rate();
        max_growth = max_growth.max(g);
        let (l2p, l2m, roots) = match lin {
            LinEigs::ClosedForm(p, m) => {
                let thr = lit::<T>(1e-12) * (params.beta * n_l(n, length).powi(2)).max(T::one());
                if p > thr {
                    unstable = true;
                }
                (Some(p), Some(m), None)
            }
            LinEigs::Roots(r) => {
                if closed {
                    unstable = true;
                }
                (None, None, Some(r.iter().map(|z| [z.re, z.im]).collect()))
            }
        };
        rows.push(ModeRow {
            n,
            lambda_plus_plus: l[0],
            lambda_plus_minus: l[1],
            lambda_minus_plus: l[2],
            lambda_minus_minus: l[3],
            lambda2_plus: l2p,
            lambda2_minus: l2m,
            roots,
            growth_rate: g,
        });
    }
    let coercive = sig.n == d2w.signature.p && sig.z == 2;
    let linearly_stable = if !closed {
        LinearVerdict::NumericalOnly
    } else if unstable {
        LinearVerdict::Unstable
    } else {
        LinearVerdict::Stable
    };
    Ok(ModeTable {
        rows,
        c_plus,
        c_minus,
        coercivity_margin: margin,
        p_d2w: d2w.signature.p,
        n_neg: sig.n,
        n_zero: sig.z,
        coercive,
        linearly_stable,
        max_growth_rate: max_growth,
    })
}

impl<T: Real> ModeTable<T> {
    /// One row per mode.
    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "n,lambda_plus_plus,lambda_plus_minus,lambda_minus_plus,lambda_minus_minus,lambda2_plus,lambda2_minus,growth_rate\n",
        );
        let opt = |v: Option<T>| v.map(|x| format!("{:e}", to_f64(x))).unwrap_or_default();
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{:e},{:e},{:e},{:e},{},{},{:e}",
                r.n,
                to_f64(r.lambda_plus_plus),
                to_f64(r.lambda_plus_minus),
                to_f64(r.lambda_minus_plus),
                to_f64(r.lambda_minus_minus),
                opt(r.lambda2_plus),
                opt(r.lambda2_minus),
                to_f64(r.growth_rate)
            );
        }
        s
    }

    /// For `n >= 1`, whether both `lambda^pm_{-,n}` increase with `n`.
    pub fn minus_branch_increasing(&self) -> bool {
        self.rows.windows(2).skip(1).all(|w| {
            w[1].lambda_plus_minus >= w[0].lambda_plus_minus
                && w[1].lambda_minus_minus >= w[0].lambda_minus_minus
        })
    }
}

/// Every eigenvalue of the discretized torus Hessian on `n_points` nodes,
/// ascending. The Nyquist mode carries no first-derivative coupling.
pub fn torus_spectrum_closed<T: Real>(
    params: &CoupledParams<T>,
    zeta: [T; 2],
    length: T,
    n_points: usize,
) -> Vec<T> {
    let h = n_points / 2;
    let mut out = Vec::with_capacity(4 * n_points);
    for n in 0..h {
        let l = hessian_mode_eigs(n, params, zeta, length);
        let mult = if n == 0 { 1 } else { 2 };
        for _ in 0..mult {
            out.extend_from_slice(&l);
        }
    }
    let ny = hessian_mode_eigs(h, &params.with_k(T::zero()), zeta, length);
    out.extend_from_slice(&ny);
    out.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    out
}
