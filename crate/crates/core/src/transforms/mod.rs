//! Orthonormal 2D transforms that diagonalize the structured systems: FFT for
//! periodic, DCT-II for reflective and DST-I for the antireflective interior.

mod plan;

use std::sync::Arc;

use ndarray::{Array2, ArrayView2, Axis};
use rustdct::{DctPlanner, Dst1, TransformType2And3};
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{DeblurError, Result};

pub use plan::{effective_psf, plan_system, solve_system, SpectralFactors, SpectralPlan, EIGEN_FLOOR};

fn for_each_lane<T: Copy + Default>(a: &mut Array2<T>, axis: Axis, mut f: impl FnMut(&mut [T])) {
    let mut buf = vec![T::default(); a.len_of(axis)];
    for mut lane in a.lanes_mut(axis) {
        for (b, v) in buf.iter_mut().zip(lane.iter()) {
            *b = *v;
        }
        f(&mut buf);
        for (v, b) in lane.iter_mut().zip(buf.iter()) {
            *v = *b;
        }
    }
}

/// Orthonormal DCT-II / DCT-III along one axis length.
#[derive(Clone)]
pub(crate) struct Cosine1d {
    plan: Arc<dyn TransformType2And3<f64>>,
    n: usize,
}

impl Cosine1d {
    pub(crate) fn new(planner: &mut DctPlanner<f64>, n: usize) -> Self {
        Self {
            plan: planner.plan_dct2(n),
            n,
        }
    }

    pub(crate) fn forward(&self, buf: &mut [f64]) {
        self.plan.process_dct2(buf);
        let n = self.n as f64;
        buf[0] *= (1.0 / n).sqrt();
        let s = (2.0 / n).sqrt();
        buf[1..].iter_mut().for_each(|v| *v *= s);
    }

    pub(crate) fn inverse(&self, buf: &mut [f64]) {
        let n = self.n as f64;
        buf[0] *= 2.0 * (1.0 / n).sqrt();
        let s = (2.0 / n).sqrt();
        buf[1..].iter_mut().for_each(|v| *v *= s);
        self.plan.process_dct3(buf);
    }
}

/// Orthonormal (self-inverse) DST-I.
#[derive(Clone)]
pub(crate) struct Sine1d {
    plan: Arc<dyn Dst1<f64>>,
    scale: f64,
}

impl Sine1d {
    pub(crate) fn new(planner: &mut DctPlanner<f64>, n: usize) -> Self {
        Self {
            plan: planner.plan_dst1(n),
            scale: (2.0 / (n as f64 + 1.0)).sqrt(),
        }
    }

    pub(crate) fn apply(&self, buf: &mut [f64]) {
        self.plan.process_dst1(buf);
        buf.iter_mut().for_each(|v| *v *= self.scale);
    }
}

/// Separable 2D DCT-II with planned row and column transforms.
#[derive(Clone)]
pub(crate) struct Cosine2d {
    rows: Cosine1d,
    cols: Cosine1d,
}

impl Cosine2d {
    pub(crate) fn new(rows: usize, cols: usize) -> Self {
        let mut planner = DctPlanner::new();
        Self {
            rows: Cosine1d::new(&mut planner, rows),
            cols: Cosine1d::new(&mut planner, cols),
        }
    }

    pub(crate) fn forward(&self, a: &mut Array2<f64>) {
        for_each_lane(a, Axis(1), |b| self.cols.forward(b));
        for_each_lane(a, Axis(0), |b| self.rows.forward(b));
    }

    pub(crate) fn inverse(&self, a: &mut Array2<f64>) {
        for_each_lane(a, Axis(0), |b| self.rows.inverse(b));
        for_each_lane(a, Axis(1), |b| self.cols.inverse(b));
    }
}

/// Separable 2D DST-I.
#[derive(Clone)]
pub(crate) struct Sine2d {
    rows: Sine1d,
    cols: Sine1d,
}

impl Sine2d {
    pub(crate) fn new(rows: usize, cols: usize) -> Self {
        let mut planner = DctPlanner::new();
        Self {
            rows: Sine1d::new(&mut planner, rows),
            cols: Sine1d::new(&mut planner, cols),
        }
    }

    pub(crate) fn apply(&self, a: &mut Array2<f64>) {
        for_each_lane(a, Axis(1), |b| self.cols.apply(b));
        for_each_lane(a, Axis(0), |b| self.rows.apply(b));
    }
}

/// Unnormalized 2D complex FFT pair.
#[derive(Clone)]
pub(crate) struct Fourier2d {
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl Fourier2d {
    pub(crate) fn new(rows: usize, cols: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            row_fwd: planner.plan_fft_forward(cols),
            row_inv: planner.plan_fft_inverse(cols),
            col_fwd: planner.plan_fft_forward(rows),
            col_inv: planner.plan_fft_inverse(rows),
        }
    }

    pub(crate) fn forward(&self, a: &mut Array2<Complex64>) {
        for_each_lane(a, Axis(1), |b| self.row_fwd.process(b));
        for_each_lane(a, Axis(0), |b| self.col_fwd.process(b));
    }

    /// Inverse including the `1/N` factor.
    pub(crate) fn inverse(&self, a: &mut Array2<Complex64>) {
        for_each_lane(a, Axis(0), |b| self.col_inv.process(b));
        for_each_lane(a, Axis(1), |b| self.row_inv.process(b));
        let scale = 1.0 / a.len() as f64;
        a.mapv_inplace(|v| v * scale);
    }
}

fn check_dims(x: ArrayView2<'_, f64>, min: usize, what: &str) -> Result<()> {
    let (r, c) = x.dim();
    if r < min || c < min {
        return Err(DeblurError::Shape(format!("{what} needs at least {min}x{min}, got {r}x{c}")));
    }
    Ok(())
}

/// Orthonormal 2D DCT-II.
pub fn dct2(x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    check_dims(x, 2, "dct2")?;
    let mut a = x.to_owned();
    Cosine2d::new(a.nrows(), a.ncols()).forward(&mut a);
    Ok(a)
}

/// Inverse of [`dct2`] (orthonormal DCT-III).
pub fn idct2(x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    check_dims(x, 2, "idct2")?;
    let mut a = x.to_owned();
    Cosine2d::new(a.nrows(), a.ncols()).inverse(&mut a);
    Ok(a)
}

/// Orthonormal 2D DST-I of an `n x m` interior block; it is its own inverse.
pub fn dst1(x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    check_dims(x, 1, "dst1 (interior of at least 3 samples per axis)")?;
    let mut a = x.to_owned();
    Sine2d::new(a.nrows(), a.ncols()).apply(&mut a);
    Ok(a)
}

/// Orthonormal 2D DFT of a real image (full complex spectrum).
pub fn fft2_real(x: ArrayView2<'_, f64>) -> Result<Array2<Complex64>> {
    check_dims(x, 2, "fft2")?;
    let mut a = x.mapv(|v| Complex64::new(v, 0.0));
    Fourier2d::new(a.nrows(), a.ncols()).forward(&mut a);
    let scale = 1.0 / (a.len() as f64).sqrt();
    a.mapv_inplace(|v| v * scale);
    Ok(a)
}

/// Inverse of [`fft2_real`], keeping the real part.
pub fn ifft2_real(x: ArrayView2<'_, Complex64>) -> Result<Array2<f64>> {
    let (r, c) = x.dim();
    if r < 2 || c < 2 {
        return Err(DeblurError::Shape(format!("ifft2 needs at least 2x2, got {r}x{c}")));
    }
    let mut a = x.to_owned();
    Fourier2d::new(r, c).inverse(&mut a);
    let scale = (a.len() as f64).sqrt();
    Ok(a.mapv(|v| v.re * scale))
}
