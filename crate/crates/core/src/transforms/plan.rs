use ndarray::{s, Array1, Array2, ArrayView2, Zip};
use rustdct::DctPlanner;
use rustfft::num_complex::Complex64;

use super::{Cosine2d, Fourier2d, Sine1d, Sine2d};
use crate::error::{DeblurError, Result};
use crate::grid::{BoundaryModel, Image, Psf};
use crate::operators;

/// Magnitude below which an eigenvalue is clamped.
pub const EIGEN_FLOOR: f64 = 1e-14;

const CG_TOL: f64 = 1e-13;
const CG_MAX_ITER: usize = 20_000;

/// The PSF the fast path actually diagonalizes under `bc`.
///
/// Reflective and antireflective plans need a quadrantally symmetric kernel.
/// Array-symmetric kernels of even size are symmetrized about their center.
pub fn effective_psf(psf: &Psf, bc: BoundaryModel) -> Result<Psf> {
    match bc {
        BoundaryModel::Zero | BoundaryModel::Periodic => Ok(psf.clone()),
        BoundaryModel::Reflective | BoundaryModel::Antireflective => {
            if psf.is_quadrantally_symmetric() {
                Ok(psf.clone())
            } else if psf.is_array_symmetric() {
                Ok(psf.symmetrized())
            } else {
                Err(DeblurError::Symmetry(bc.name().to_string()))
            }
        }
    }
}

#[derive(Clone)]
struct AntireflectiveBasis {
    row_edge: Option<Sine1d>,
    col_edge: Option<Sine1d>,
    interior: Option<Sine2d>,
}

impl AntireflectiveBasis {
    fn new(rows: usize, cols: usize) -> Self {
        let mut planner = DctPlanner::new();
        let row_edge = (cols > 2).then(|| Sine1d::new(&mut planner, cols - 2));
        let col_edge = (rows > 2).then(|| Sine1d::new(&mut planner, rows - 2));
        let interior = (rows > 2 && cols > 2).then(|| Sine2d::new(rows - 2, cols - 2));
        Self {
            row_edge,
            col_edge,
            interior,
        }
    }
}

#[derive(Clone)]
enum Basis {
    Fourier(Fourier2d),
    Cosine(Cosine2d),
    Antireflective(AntireflectiveBasis),
    Krylov,
}

/// Transform-domain spectra of `H'H` and `D'D` for one PSF, image size and
/// boundary model. Build once and call [`SpectralFactors::plan`] per ratio.
#[derive(Clone)]
pub struct SpectralFactors {
    bc: BoundaryModel,
    rows: usize,
    cols: usize,
    psf: Psf,
    blur: Array2<f64>,
    lap: Array2<f64>,
    basis: Basis,
}

impl SpectralFactors {
    pub fn new(psf: &Psf, dims: (usize, usize), bc: BoundaryModel) -> Result<Self> {
        let (rows, cols) = dims;
        if rows < 2 || cols < 2 {
            return Err(DeblurError::Shape(format!("image must be at least 2x2, got {rows}x{cols}")));
        }
        let (pr, pc) = psf.dim();
        if pr > rows || pc > cols {
            return Err(DeblurError::Unsupported(format!(
                "PSF support {pr}x{pc} exceeds the {rows}x{cols} image"
            )));
        }
        let psf = effective_psf(psf, bc)?;
        let mass = psf.mass();
        if mass * mass <= EIGEN_FLOOR {
            return Err(DeblurError::Singular(format!(
                "PSF mass {mass:e} leaves the zero frequency unconstrained"
            )));
        }
        let (blur, lap, basis) = match bc {
            BoundaryModel::Periodic => fourier_spectra(&psf, rows, cols),
            BoundaryModel::Reflective => cosine_spectra(&psf, rows, cols),
            BoundaryModel::Antireflective => antireflective_spectra(&psf, rows, cols),
            BoundaryModel::Zero => (Array2::zeros((0, 0)), Array2::zeros((0, 0)), Basis::Krylov),
        };
        Ok(Self {
            bc,
            rows,
            cols,
            psf,
            blur,
            lap,
            basis,
        })
    }

    pub fn bc(&self) -> BoundaryModel {
        self.bc
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// The kernel whose operators the factors diagonalize.
    pub fn psf(&self) -> &Psf {
        &self.psf
    }

    pub fn plan(&self, ratio: f64) -> Result<SpectralPlan> {
        if !(ratio >= 0.0 && ratio.is_finite()) {
            return Err(DeblurError::Params(format!("ratio must be finite and >= 0, got {ratio}")));
        }
        let mut clamped = 0;
        let mut min_modulus = f64::INFINITY;
        let eigenvalues = if matches!(self.basis, Basis::Krylov) {
            None
        } else {
            let mut eig = &self.blur + &(&self.lap * ratio);
            eig.mapv_inplace(|v| {
                min_modulus = min_modulus.min(v.abs());
                if v.abs() < EIGEN_FLOOR {
                    clamped += 1;
                    if v < 0.0 {
                        -EIGEN_FLOOR
                    } else {
                        EIGEN_FLOOR
                    }
                } else {
                    v
                }
            });
            Some(eig)
        };
        if eigenvalues.iter().flatten().any(|v| !v.is_finite()) {
            return Err(DeblurError::Singular("non-finite eigenvalue".into()));
        }
        Ok(SpectralPlan {
            bc: self.bc,
            rows: self.rows,
            cols: self.cols,
            ratio,
            psf: self.psf.clone(),
            eigenvalues,
            min_modulus,
            clamped,
            basis: self.basis.clone(),
        })
    }
}

/// A ready-to-use solver for `(H'H + ratio * D'D) u = b`.
#[derive(Clone)]
pub struct SpectralPlan {
    bc: BoundaryModel,
    rows: usize,
    cols: usize,
    ratio: f64,
    psf: Psf,
    eigenvalues: Option<Array2<f64>>,
    min_modulus: f64,
    clamped: usize,
    basis: Basis,
}

impl std::fmt::Debug for SpectralPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralPlan")
            .field("bc", &self.bc)
            .field("dims", &(self.rows, self.cols))
            .field("ratio", &self.ratio)
            .field("min_modulus", &self.min_modulus)
            .field("clamped", &self.clamped)
            .finish()
    }
}

impl SpectralPlan {
    pub fn bc(&self) -> BoundaryModel {
        self.bc
    }

    pub fn n_rows(&self) -> usize {
        self.rows
    }

    pub fn n_cols(&self) -> usize {
        self.cols
    }

    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    pub fn psf(&self) -> &Psf {
        &self.psf
    }

    /// System eigenvalues in the transform basis.
    ///
    /// Periodic: `rows x cols` in FFT order. Reflective: `rows x cols` in DCT
    /// order. Antireflective: the `(rows-1) x (cols-1)` symbol grid, where
    /// entry `[0, 0]` is the corner scalar, row and column 0 drive the edge
    /// solves and the rest the interior. Zero boundaries have none.
    pub fn eigenvalues(&self) -> Option<ArrayView2<'_, f64>> {
        self.eigenvalues.as_ref().map(|e| e.view())
    }

    /// Smallest eigenvalue modulus before clamping (`inf` for Krylov plans).
    pub fn min_modulus(&self) -> f64 {
        self.min_modulus
    }

    /// Number of eigenvalues lifted to the floor.
    pub fn clamped(&self) -> usize {
        self.clamped
    }

    /// Applies the system operator matrix-free.
    pub fn apply(&self, u: &Image) -> Result<Image> {
        self.check_dims(u)?;
        Ok(Image::from_array_unchecked(operators::system_array(
            u.view(),
            &self.psf,
            self.bc,
            self.ratio,
        )))
    }

    fn check_dims(&self, rhs: &Image) -> Result<()> {
        if rhs.dim() != (self.rows, self.cols) {
            return Err(DeblurError::Shape(format!(
                "plan is {}x{}, right-hand side is {}x{}",
                self.rows,
                self.cols,
                rhs.rows(),
                rhs.cols()
            )));
        }
        Ok(())
    }
}

/// Builds the plan for `H'H + ratio * D'D` in one call.
pub fn plan_system(
    psf: &Psf,
    dims: (usize, usize),
    bc: BoundaryModel,
    ratio: f64,
) -> Result<SpectralPlan> {
    SpectralFactors::new(psf, dims, bc)?.plan(ratio)
}

/// Solves the planned system for `rhs`.
pub fn solve_system(plan: &SpectralPlan, rhs: &Image) -> Result<Image> {
    plan.check_dims(rhs)?;
    let eig = plan.eigenvalues.as_ref();
    let out = match &plan.basis {
        Basis::Fourier(fft) => {
            let eig = eig.expect("fourier plan has eigenvalues");
            let mut a = rhs.view().mapv(|v| Complex64::new(v, 0.0));
            fft.forward(&mut a);
            Zip::from(&mut a).and(eig).for_each(|v, l| *v /= *l);
            fft.inverse(&mut a);
            a.mapv(|v| v.re)
        }
        Basis::Cosine(dct) => {
            let eig = eig.expect("cosine plan has eigenvalues");
            let mut a = rhs.view().to_owned();
            dct.forward(&mut a);
            a /= eig;
            dct.inverse(&mut a);
            a
        }
        Basis::Antireflective(basis) => {
            solve_antireflective(rhs.view(), eig.expect("antireflective plan has eigenvalues"), basis)
        }
        Basis::Krylov => conjugate_gradient(plan, rhs.view())?,
    };
    if out.iter().any(|v| !v.is_finite()) {
        return Err(DeblurError::Singular("solve produced non-finite values".into()));
    }
    Ok(Image::from_array_unchecked(out))
}

fn fourier_spectra(psf: &Psf, rows: usize, cols: usize) -> (Array2<f64>, Array2<f64>, Basis) {
    let fft = Fourier2d::new(rows, cols);
    let mut kernel = Array2::<Complex64>::zeros((rows, cols));
    for (dr, dc, w) in psf.taps() {
        let r = dr.rem_euclid(rows as isize) as usize;
        let c = dc.rem_euclid(cols as isize) as usize;
        kernel[[r, c]] += w;
    }
    fft.forward(&mut kernel);
    let blur = kernel.mapv(|v| v.norm_sqr());
    let lap = Array2::from_shape_fn((rows, cols), |(p, q)| {
        let tp = 2.0 * std::f64::consts::PI * p as f64 / rows as f64;
        let tq = 2.0 * std::f64::consts::PI * q as f64 / cols as f64;
        (2.0 - 2.0 * tp.cos()) + (2.0 - 2.0 * tq.cos())
    });
    (blur, lap, Basis::Fourier(fft))
}

fn cosine_spectra(psf: &Psf, rows: usize, cols: usize) -> (Array2<f64>, Array2<f64>, Basis) {
    let dct = Cosine2d::new(rows, cols);
    let bc = BoundaryModel::Reflective;
    let mut e00 = Array2::<f64>::zeros((rows, cols));
    e00[[0, 0]] = 1.0;
    let mut blur = operators::system_array(e00.view(), psf, bc, 0.0);
    let mut lap = operators::laplacian_array(e00.view(), bc);
    let mut denom = e00;
    dct.forward(&mut blur);
    dct.forward(&mut lap);
    dct.forward(&mut denom);
    denom.mapv_inplace(|d| if d.abs() < EIGEN_FLOOR { EIGEN_FLOOR.copysign(d) } else { d });
    blur /= &denom;
    lap /= &denom;
    (blur, lap, Basis::Cosine(dct))
}

fn antireflective_spectra(psf: &Psf, rows: usize, cols: usize) -> (Array2<f64>, Array2<f64>, Basis) {
    let pi = std::f64::consts::PI;
    let taps = psf.taps();
    let theta = |p: usize| p as f64 * pi / (rows - 1) as f64;
    let phi = |q: usize| q as f64 * pi / (cols - 1) as f64;
    let shape = (rows - 1, cols - 1);
    let blur = Array2::from_shape_fn(shape, |(p, q)| {
        let (t, f) = (theta(p), phi(q));
        let h: f64 = taps
            .iter()
            .map(|&(dr, dc, w)| w * (dr as f64 * t).cos() * (dc as f64 * f).cos())
            .sum();
        h * h
    });
    let lap = Array2::from_shape_fn(shape, |(p, q)| {
        (2.0 - 2.0 * theta(p).cos()) + (2.0 - 2.0 * phi(q).cos())
    });
    (blur, lap, Basis::Antireflective(AntireflectiveBasis::new(rows, cols)))
}

/// Linear interpolation between `a` at index 0 and `b` at index `n - 1`.
fn lerp(a: f64, b: f64, i: usize, n: usize) -> f64 {
    let t = i as f64 / (n - 1) as f64;
    (1.0 - t) * a + t * b
}

/// Transfinite (Coons) interpolation of the outer ring of `v`.
fn coons(v: ArrayView2<'_, f64>) -> Array2<f64> {
    let (r, c) = v.dim();
    Array2::from_shape_fn((r, c), |(i, j)| {
        let vertical = lerp(v[[0, j]], v[[r - 1, j]], i, r);
        let horizontal = lerp(v[[i, 0]], v[[i, c - 1]], j, c);
        let top = lerp(v[[0, 0]], v[[0, c - 1]], j, c);
        let bottom = lerp(v[[r - 1, 0]], v[[r - 1, c - 1]], j, c);
        vertical + horizontal - lerp(top, bottom, i, r)
    })
}

/// Solves one boundary line: end values are known, the interior goes through
/// a 1D sine transform against `symbol`.
fn solve_edge(
    b: &[f64],
    ends: (f64, f64),
    k00: f64,
    symbol: ndarray::ArrayView1<'_, f64>,
    sine: &Sine1d,
) -> Vec<f64> {
    let n = b.len() + 2;
    let mut w: Vec<f64> = (1..n - 1)
        .map(|j| b[j - 1] - k00 * lerp(ends.0, ends.1, j, n))
        .collect();
    sine.apply(&mut w);
    w.iter_mut().zip(symbol.iter()).for_each(|(v, l)| *v /= *l);
    sine.apply(&mut w);
    (1..n - 1)
        .map(|j| lerp(ends.0, ends.1, j, n) + w[j - 1])
        .collect()
}

fn solve_antireflective(
    b: ArrayView2<'_, f64>,
    eig: &Array2<f64>,
    basis: &AntireflectiveBasis,
) -> Array2<f64> {
    let (r, c) = b.dim();
    let k00 = eig[[0, 0]];
    let mut x = Array2::<f64>::zeros((r, c));
    for &i in &[0, r - 1] {
        for &j in &[0, c - 1] {
            x[[i, j]] = b[[i, j]] / k00;
        }
    }
    if let Some(sine) = &basis.row_edge {
        for &i in &[0, r - 1] {
            let line: Vec<f64> = b.slice(s![i, 1..c - 1]).to_vec();
            let sol = solve_edge(&line, (x[[i, 0]], x[[i, c - 1]]), k00, eig.slice(s![0, 1..]), sine);
            x.slice_mut(s![i, 1..c - 1]).assign(&Array1::from(sol));
        }
    }
    if let Some(sine) = &basis.col_edge {
        for &j in &[0, c - 1] {
            let line: Vec<f64> = b.slice(s![1..r - 1, j]).to_vec();
            let sol = solve_edge(&line, (x[[0, j]], x[[r - 1, j]]), k00, eig.slice(s![1.., 0]), sine);
            x.slice_mut(s![1..r - 1, j]).assign(&Array1::from(sol));
        }
    }
    if let Some(sine) = &basis.interior {
        let mut w = (&b - &coons(b)).slice(s![1..r - 1, 1..c - 1]).to_owned();
        sine.apply(&mut w);
        w /= &eig.slice(s![1.., 1..]);
        sine.apply(&mut w);
        let ring = coons(x.view());
        let mut inner = x.slice_mut(s![1..r - 1, 1..c - 1]);
        inner.assign(&ring.slice(s![1..r - 1, 1..c - 1]));
        inner += &w;
    }
    x
}

fn conjugate_gradient(plan: &SpectralPlan, b: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let apply = |u: &Array2<f64>| operators::system_array(u.view(), &plan.psf, plan.bc, plan.ratio);
    let b_norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut x = Array2::<f64>::zeros(b.dim());
    if b_norm == 0.0 {
        return Ok(x);
    }
    let mut r = b.to_owned();
    let mut p = r.clone();
    let mut rr = operators::inner(r.view(), r.view());
    for _ in 0..CG_MAX_ITER {
        if rr.sqrt() <= CG_TOL * b_norm {
            return Ok(x);
        }
        let ap = apply(&p);
        let pap = operators::inner(p.view(), ap.view());
        if !(pap > 0.0) {
            return Err(DeblurError::Singular("system is not positive definite".into()));
        }
        let step = rr / pap;
        x.scaled_add(step, &p);
        r.scaled_add(-step, &ap);
        let rr_next = operators::inner(r.view(), r.view());
        p = &r + &(&p * (rr_next / rr));
        rr = rr_next;
    }
    if rr.sqrt() <= 1e-10 * b_norm {
        return Ok(x);
    }
    Err(DeblurError::Convergence(format!(
        "conjugate gradients stalled at relative residual {:e}",
        rr.sqrt() / b_norm
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian(size: usize, delta: f64) -> Psf {
        let h = (size as f64 - 1.0) / 2.0;
        let w = Array2::from_shape_fn((size, size), |(i, j)| {
            let (x, y) = (i as f64 - h, j as f64 - h);
            (-(x * x + y * y) / (2.0 * delta * delta)).exp()
        });
        let s = w.sum();
        Psf::with_default_center(w / s).unwrap()
    }

    fn lcg_image(rows: usize, cols: usize, seed: u64) -> Image {
        let mut s = seed;
        let v = (0..rows * cols)
            .map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (s >> 11) as f64 / (1u64 << 53) as f64
            })
            .collect();
        Image::from_shape_vec(rows, cols, v).unwrap()
    }

    #[test]
    fn delta_identity_plans_have_unit_eigenvalues() {
        for bc in [BoundaryModel::Periodic, BoundaryModel::Reflective, BoundaryModel::Antireflective] {
            let plan = plan_system(&Psf::delta(), (6, 7), bc, 0.0).unwrap();
            let eig = plan.eigenvalues().unwrap();
            assert!(eig.iter().all(|v| (v - 1.0).abs() < 1e-12), "{bc}");
            let b = lcg_image(6, 7, 1);
            let u = solve_system(&plan, &b).unwrap();
            assert!(u.max_abs_diff(&b) < 1e-12, "{bc}");
        }
    }

    #[test]
    fn periodic_dc_gain_is_one() {
        let plan = plan_system(&gaussian(5, 1.0), (16, 16), BoundaryModel::Periodic, 3.0).unwrap();
        assert!((plan.eigenvalues().unwrap()[[0, 0]] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn solves_invert_the_matrix_free_operator() {
        let psf = gaussian(5, 1.0);
        for bc in BoundaryModel::ALL {
            for (rows, cols) in [(16, 16), (9, 12)] {
                let plan = plan_system(&psf, (rows, cols), bc, 0.5).unwrap();
                let x = lcg_image(rows, cols, 11);
                let b = plan.apply(&x).unwrap();
                let u = solve_system(&plan, &b).unwrap();
                assert!(u.max_abs_diff(&x) < 1e-8, "{bc} {rows}x{cols}: {}", u.max_abs_diff(&x));
            }
        }
    }

    #[test]
    fn zero_rhs_gives_zero() {
        for bc in BoundaryModel::ALL {
            let plan = plan_system(&gaussian(3, 1.0), (8, 8), bc, 1.0).unwrap();
            let u = solve_system(&plan, &Image::zeros(8, 8).unwrap()).unwrap();
            assert!(u.norm() == 0.0);
        }
    }

    #[test]
    fn nonsymmetric_kernels_need_periodic_or_zero() {
        let psf = Psf::new(ndarray::array![[0.2, 0.5], [0.1, 0.2]], (0, 0)).unwrap();
        for bc in [BoundaryModel::Reflective, BoundaryModel::Antireflective] {
            assert!(matches!(plan_system(&psf, (8, 8), bc, 1.0), Err(DeblurError::Symmetry(_))));
        }
        assert!(plan_system(&psf, (8, 8), BoundaryModel::Periodic, 1.0).is_ok());
    }

    #[test]
    fn plan_mismatch_is_a_shape_error() {
        let plan = plan_system(&Psf::delta(), (8, 8), BoundaryModel::Periodic, 1.0).unwrap();
        assert!(matches!(
            solve_system(&plan, &Image::zeros(8, 9).unwrap()),
            Err(DeblurError::Shape(_))
        ));
    }

    #[test]
    fn tiny_eigenvalues_are_clamped_and_counted() {
        // (1/2, 1/2) kills the Nyquist frequency on even periodic grids.
        let psf = Psf::new(ndarray::array![[0.5, 0.5]], (0, 0)).unwrap();
        let plan = plan_system(&psf, (4, 4), BoundaryModel::Periodic, 0.0).unwrap();
        assert_eq!(plan.clamped(), 4);
        assert!(plan.min_modulus() < EIGEN_FLOOR);
    }

    #[test]
    fn eigenvalues_are_deterministic() {
        let psf = gaussian(5, 1.3);
        for bc in [BoundaryModel::Periodic, BoundaryModel::Reflective, BoundaryModel::Antireflective] {
            let a = plan_system(&psf, (12, 10), bc, 2.0).unwrap();
            let b = plan_system(&psf, (12, 10), bc, 2.0).unwrap();
            assert_eq!(a.eigenvalues().unwrap(), b.eigenvalues().unwrap());
        }
    }
}
