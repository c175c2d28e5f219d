use std::sync::Arc;

use num_complex::Complex;

use crate::error::{invalid, Error, Result};
use crate::grid::{Grid, GridKind};
use crate::scalar::{lit, to_f64, Real};

/// Relative boundary level a line-grid field must stay below before spectral
/// differentiation is trusted.
pub const BOUNDARY_DECAY_REL: f64 = 1e-7;

/// One- or two-component complex field on a shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Field<T> {
    grid: Arc<Grid<T>>,
    comps: Vec<Vec<Complex<T>>>,
}

impl<T: Real> Field<T> {
    pub fn new(grid: Arc<Grid<T>>, comps: Vec<Vec<Complex<T>>>) -> Result<Self> {
        if comps.is_empty() || comps.len() > 2 {
            return invalid(format!(
                "fields carry 1 or 2 components, got {}",
                comps.len()
            ));
        }
        if comps.iter().any(|c| c.len() != grid.n_points()) {
            return invalid("component length differs from the grid size");
        }
        let f = Self { grid, comps };
        if !f.is_finite() {
            return Err(Error::NonFinite("Field::new"));
        }
        Ok(f)
    }

    pub fn zeros(grid: Arc<Grid<T>>, m: usize) -> Self {
        let n = grid.n_points();
        Self {
            comps: vec![vec![Complex::new(T::zero(), T::zero()); n]; m],
            grid,
        }
    }

    /// Build from a closure `(component, x) -> value`.
    pub fn from_fn(grid: Arc<Grid<T>>, m: usize, f: impl Fn(usize, T) -> Complex<T>) -> Self {
        let comps = (0..m)
            .map(|c| grid.nodes().iter().map(|&x| f(c, x)).collect())
            .collect();
        Self { grid, comps }
    }

    pub fn from_real(grid: Arc<Grid<T>>, comps: Vec<Vec<T>>) -> Result<Self> {
        let comps = comps
            .into_iter()
            .map(|c| c.into_iter().map(|x| Complex::new(x, T::zero())).collect())
            .collect();
        Self::new(grid, comps)
    }

    pub(crate) fn from_parts(grid: Arc<Grid<T>>, comps: Vec<Vec<Complex<T>>>) -> Self {
        Self { grid, comps }
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn grid_arc(&self) -> &Arc<Grid<T>> {
        &self.grid
    }

    pub fn n_components(&self) -> usize {
        self.comps.len()
    }

    pub fn n_points(&self) -> usize {
        self.grid.n_points()
    }

    pub fn component(&self, c: usize) -> &[Complex<T>] {
        &self.comps[c]
    }

    pub fn components(&self) -> &[Vec<Complex<T>>] {
        &self.comps
    }

    pub fn into_components(self) -> Vec<Vec<Complex<T>>> {
        self.comps
    }

    pub fn is_finite(&self) -> bool {
        self.comps
            .iter()
            .flatten()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn compatible(&self, other: &Self) -> Result<()> {
        if !self.grid.same_as(&other.grid) {
            return Err(Error::GridMismatch);
        }
        if self.comps.len() != other.comps.len() {
            return Err(Error::ComponentMismatch {
                expected: self.comps.len(),
                got: other.comps.len(),
            });
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(usize, usize, Complex<T>) -> Complex<T>) -> Self {
        let comps = self
            .comps
            .iter()
            .enumerate()
            .map(|(c, v)| v.iter().enumerate().map(|(j, &z)| f(c, j, z)).collect())
            .collect();
        Self::from_parts(self.grid.clone(), comps)
    }

    fn zip(&self, other: &Self, f: impl Fn(Complex<T>, Complex<T>) -> Complex<T>) -> Self {
        assert!(self.compatible(other).is_ok(), "incompatible fields");
        let comps = self
            .comps
            .iter()
            .zip(&other.comps)
            .map(|(a, b)| a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect())
            .collect();
        Self::from_parts(self.grid.clone(), comps)
    }

    /// Panics on incompatible operands.
    pub fn add(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a + b)
    }

    /// Panics on incompatible operands.
    pub fn sub(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a - b)
    }

    /// `self + a * x`; panics on incompatible operands.
    pub fn axpy(&self, a: T, x: &Self) -> Self {
        self.zip(x, |u, v| u + v * a)
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|_, _, z| z * s)
    }

    pub fn scale_complex(&self, s: Complex<T>) -> Self {
        self.map(|_, _, z| z * s)
    }

    /// Multiply by i.
    pub fn times_i(&self) -> Self {
        self.map(|_, _, z| Complex::new(-z.im, z.re))
    }

    /// Keep only component `c`, zeroing the others.
    pub fn only_component(&self, c: usize) -> Self {
        self.map(|k, _, z| {
            if k == c {
                z
            } else {
                Complex::new(T::zero(), T::zero())
            }
        })
    }

    pub fn sup_norm(&self) -> T {
        self.comps
            .iter()
            .flatten()
            .fold(T::zero(), |m, z| m.max(z.norm()))
    }

    pub fn norm_l2(&self) -> T {
        inner_raw(self, self).sqrt()
    }

    /// Discrete H1 norm: L2 of the values and of the spectral derivative.
    pub fn norm_h1(&self) -> T {
        let d = gradient_raw(self);
        (inner_raw(self, self) + inner_raw(&d, &d)).sqrt()
    }

    /// Real layout `[Re c0, Re c1, .., Im c0, Im c1, ..]`.
    pub fn to_real_vec(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(2 * self.comps.len() * self.n_points());
        for c in &self.comps {
            out.extend(c.iter().map(|z| z.re));
        }
        for c in &self.comps {
            out.extend(c.iter().map(|z| z.im));
        }
        out
    }

    pub fn from_real_vec(grid: Arc<Grid<T>>, m: usize, v: &[T]) -> Result<Self> {
        let n = grid.n_points();
        if v.len() != 2 * m * n {
            return invalid("real vector length does not match 2 * components * n");
        }
        let comps = (0..m)
            .map(|c| {
                (0..n)
                    .map(|j| Complex::new(v[c * n + j], v[(m + c) * n + j]))
                    .collect()
            })
            .collect();
        Self::new(grid, comps)
    }

    /// Spectral translation `x -> u(x - a)` (periodic wrap).
    pub fn shifted(&self, a: T) -> Self {
        let q = self.grid.odd_wavenumbers().to_vec();
        apply_symbol(self, |_, j| Complex::from_polar(T::one(), -q[j] * a))
    }
}

/// Multiply each component in transform space by `sym(component, index)`.
pub fn apply_symbol<T: Real>(f: &Field<T>, sym: impl Fn(usize, usize) -> Complex<T>) -> Field<T> {
    let comps = f
        .comps
        .iter()
        .enumerate()
        .map(|(c, v)| {
            let mut buf = v.clone();
            T::fft(&mut buf);
            for (j, z) in buf.iter_mut().enumerate() {
                *z *= sym(c, j);
            }
            T::ifft(&mut buf);
            buf
        })
        .collect();
    Field::from_parts(f.grid.clone(), comps)
}

/// On line grids, reject fields whose boundary values are not negligible.
pub fn check_decay<T: Real>(f: &Field<T>) -> Result<()> {
    if f.grid.kind() != GridKind::Line {
        return Ok(());
    }
    let sup = f.sup_norm();
    let threshold = sup * lit(BOUNDARY_DECAY_REL);
    let n = f.n_points();
    for c in &f.comps {
        let edge = c[0].norm().max(c[n - 1].norm());
        if edge > threshold {
            return Err(Error::BoundaryDecay {
                value: to_f64(edge),
                threshold: to_f64(threshold),
            });
        }
    }
    Ok(())
}

pub(crate) fn laplacian_raw<T: Real>(f: &Field<T>) -> Field<T> {
    let q = f.grid.wavenumbers().to_vec();
    apply_symbol(f, |_, j| Complex::new(-q[j] * q[j], T::zero()))
}

pub(crate) fn gradient_raw<T: Real>(f: &Field<T>) -> Field<T> {
    let q = f.grid.odd_wavenumbers().to_vec();
    apply_symbol(f, |_, j| Complex::new(T::zero(), q[j]))
}

/// Componentwise second derivative by multiplication with -k^2.
pub fn laplacian<T: Real>(f: &Field<T>) -> Result<Field<T>> {
    check_decay(f)?;
    Ok(laplacian_raw(f))
}

/// Componentwise first derivative by multiplication with ik (Nyquist zeroed).
pub fn gradient<T: Real>(f: &Field<T>) -> Result<Field<T>> {
    check_decay(f)?;
    Ok(gradient_raw(f))
}

pub(crate) fn inner_raw<T: Real>(f: &Field<T>, g: &Field<T>) -> T {
    let mut s = T::zero();
    for (a, b) in f.comps.iter().zip(&g.comps) {
        for (x, y) in a.iter().zip(b) {
            s += x.re * y.re + x.im * y.im;
        }
    }
    s * f.grid.spacing()
}

/// Real L2 pairing `Re sum_c int conj(f_c) g_c dx` by the rectangle rule.
pub fn inner<T: Real>(f: &Field<T>, g: &Field<T>) -> Result<T> {
    f.compatible(g)?;
    Ok(inner_raw(f, g))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn sech(x: f64) -> f64 {
        1.0 / x.cosh()
    }

    fn torus(n: usize) -> Arc<Grid<f64>> {
        Arc::new(Grid::periodic(2.0 * PI, n).unwrap())
    }

    fn max_err(f: &Field<f64>, g: impl Fn(f64) -> Complex<f64>, window: f64) -> f64 {
        f.grid()
            .nodes()
            .iter()
            .zip(f.component(0))
            .filter(|(x, _)| x.abs() <= window)
            .map(|(&x, z)| (*z - g(x)).norm())
            .fold(0.0, f64::max)
    }

    #[test]
    fn plane_wave_derivatives() {
        let g = torus(32);
        let f = Field::from_fn(g, 1, |_, x| Complex::from_polar(1.0, x));
        let lap = laplacian(&f).unwrap();
        assert!(max_err(&lap, |x| -Complex::from_polar(1.0, x), 10.0) < 1e-13);
        let d = gradient(&f).unwrap();
        assert!(
            max_err(
                &d,
                |x| Complex::<f64>::i() * Complex::from_polar(1.0, x),
                10.0
            ) < 1e-13
        );
    }

    #[test]
    fn constant_derivatives_vanish() {
        let f = Field::from_fn(torus(16), 2, |_, _| Complex::new(3.0, -1.0));
        assert!(laplacian(&f).unwrap().sup_norm() < 1e-14);
        assert!(gradient(&f).unwrap().sup_norm() < 1e-14);
    }

    #[test]
    fn sech_derivatives_on_line() {
        // The truncation at R = 20 leaves a 1e-7 kink at the wrap point, so
        // the interior is checked there and the full grid at R = 30.
        for (r, n, window) in [(20.0, 512, 10.0), (30.0, 768, 30.0)] {
            let g = Arc::new(Grid::line(r, n).unwrap());
            let f = Field::from_fn(g, 1, |_, x| Complex::new(sech(x), 0.0));
            let lap = laplacian(&f).unwrap();
            let e2 = max_err(
                &lap,
                |x| Complex::new(sech(x) - 2.0 * sech(x).powi(3), 0.0),
                window,
            );
            assert!(e2 <= 1e-8, "laplacian error {e2}");
            let d = gradient(&f).unwrap();
            let e1 = max_err(&d, |x| Complex::new(-sech(x) * x.tanh(), 0.0), window);
            assert!(e1 <= 1e-8, "gradient error {e1}");
        }
    }

    #[test]
    fn inner_products() {
        let g = torus(16);
        let one = Field::from_fn(g.clone(), 1, |_, _| Complex::new(1.0, 0.0));
        let i = Field::from_fn(g, 1, |_, _| Complex::new(0.0, 1.0));
        assert!((inner(&one, &one).unwrap() - 2.0 * PI).abs() < 1e-13);
        assert!(inner(&one, &i).unwrap().abs() < 1e-15);
        let line = Arc::new(Grid::line(20.0, 512).unwrap());
        let s = Field::from_fn(line, 1, |_, x| Complex::new(sech(x), 0.0));
        assert!((inner(&s, &s).unwrap() - 2.0).abs() < 1e-10);
    }

    #[test]
    fn mismatched_inner_rejected() {
        let a = Field::zeros(torus(16), 1);
        let b = Field::zeros(torus(32), 1);
        assert_eq!(inner(&a, &b), Err(Error::GridMismatch));
        let c = Field::zeros(torus(16), 2);
        assert!(inner(&a, &c).is_err());
    }

    #[test]
    fn boundary_check_rejects_non_decaying() {
        let g = Arc::new(Grid::line(5.0, 64).unwrap());
        let f = Field::from_fn(g, 1, |_, x: f64| Complex::new((-x * x / 8.0).exp(), 0.0));
        assert!(matches!(laplacian(&f), Err(Error::BoundaryDecay { .. })));
    }

    #[test]
    fn real_vector_roundtrip() {
        let g = torus(8);
        let f = Field::from_fn(g.clone(), 2, |c, x| Complex::new(x + c as f64, -x));
        let v = f.to_real_vec();
        assert_eq!(v.len(), 32);
        assert_eq!(v[8], 1.0);
        assert_eq!(Field::from_real_vec(g, 2, &v).unwrap(), f);
    }

    #[test]
    fn shift_is_translation() {
        let g = torus(32);
        let f = Field::from_fn(g, 1, |_, x| Complex::new(x.sin(), x.cos()));
        let s = f.shifted(0.3);
        assert!(max_err(&s, |x| Complex::new((x - 0.3).sin(), (x - 0.3).cos()), 10.0) < 1e-13);
    }

    #[test]
    fn rejects_non_finite() {
        let g = torus(8);
        assert!(Field::new(g, vec![vec![Complex::new(f64::NAN, 0.0); 8]]).is_err());
    }
}
