use std::cell::RefCell;
use std::fmt::{Debug, Display};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};
use rustfft::FftPlanner;

/// Floating point scalar the toolkit is generic over: `f32` or `f64`.
///
/// Dense linear algebra and FFTs are delegated to nalgebra and rustfft
/// through the backend methods below, so generic code only needs `Float`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// In-place unnormalized forward transform.
    fn fft(buf: &mut [Complex<Self>]);
    /// In-place inverse transform, normalized by 1/N.
    fn ifft(buf: &mut [Complex<Self>]);
    /// Eigen-decomposition of a dense symmetric row-major `n x n` matrix.
    /// Eigenvalues ascending; eigenvectors returned column by column.
    fn sym_eig(n: usize, a: &[Self]) -> (Vec<Self>, Vec<Vec<Self>>);
    /// Eigenvalues only, ascending.
    fn sym_eigvals(n: usize, a: &[Self]) -> Vec<Self>;
    /// Solve `a x = b` for a dense row-major `n x n` matrix by LU.
    fn lu_solve(n: usize, a: &[Self], b: &[Self]) -> Option<Vec<Self>>;
}

/// Convert an `f64` literal into the working scalar.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("literal out of range")
}

#[inline]
pub fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

macro_rules! impl_real {
    ($t:ty, $planner:ident) => {
        thread_local! {
            static $planner: RefCell<FftPlanner<$t>> = RefCell::new(FftPlanner::new());
        }

        impl Real for $t {
            fn fft(buf: &mut [Complex<Self>]) {
                let n = buf.len();
                let plan = $planner.with(|p| p.borrow_mut().plan_fft_forward(n));
                plan.process(buf);
            }

            fn ifft(buf: &mut [Complex<Self>]) {
                let n = buf.len();
                let plan = $planner.with(|p| p.borrow_mut().plan_fft_inverse(n));
                plan.process(buf);
                let s = 1.0 / n as $t;
                for z in buf.iter_mut() {
                    *z *= s;
                }
            }

            fn sym_eig(n: usize, a: &[Self]) -> (Vec<Self>, Vec<Vec<Self>>) {
                let m = DMatrix::from_row_slice(n, n, a);
                let eig = m.symmetric_eigen();
                let mut idx: Vec<usize> = (0..n).collect();
                idx.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
                let vals = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
                let vecs = idx
                    .iter()
                    .map(|&i| eig.eigenvectors.column(i).iter().copied().collect())
                    .collect();
                (vals, vecs)
            }

            fn sym_eigvals(n: usize, a: &[Self]) -> Vec<Self> {
                let m = DMatrix::from_row_slice(n, n, a);
                let mut vals: Vec<Self> = m.symmetric_eigenvalues().iter().copied().collect();
                vals.sort_by(|x, y| x.total_cmp(y));
                vals
            }

            fn lu_solve(n: usize, a: &[Self], b: &[Self]) -> Option<Vec<Self>> {
                let m = DMatrix::from_row_slice(n, n, a);
                let rhs = DVector::from_column_slice(b);
                let x = m.lu().solve(&rhs)?;
                if x.iter().all(|v| v.is_finite()) {
                    Some(x.iter().copied().collect())
                } else {
                    None
                }
            }
        }
    };
}

impl_real!(f32, PLANNER_F32);
impl_real!(f64, PLANNER_F64);
