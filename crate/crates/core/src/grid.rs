//! Shared domain types: images, PSFs, gradient fields, boundary models and
//! solver parameters, plus evaluation of the penalized energy.
//!
//! Indexing is `(row, col) = (y, x)` everywhere. Direction 1 is the
//! horizontal difference (along a row), direction 2 the vertical one.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{DeblurError, Result};
use crate::operators;

/// A real-valued grayscale image. Values are nominally in `[0, 1]` but are
/// never clamped here.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    data: Array2<f64>,
}

impl Image {
    /// Wraps a pixel matrix, checking that it is at least 2x2 and finite.
    pub fn new(data: Array2<f64>) -> Result<Self> {
        let (rows, cols) = data.dim();
        if rows < 2 || cols < 2 {
            return Err(DeblurError::Shape(format!(
                "images need at least 2x2 pixels, got {rows}x{cols}"
            )));
        }
        if let Some(bad) = data.iter().find(|v| !v.is_finite()) {
            return Err(DeblurError::Data(format!("non-finite pixel value {bad}")));
        }
        Ok(Self { data })
    }

    pub fn from_shape_vec(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        let data = Array2::from_shape_vec((rows, cols), values)
            .map_err(|e| DeblurError::Shape(e.to_string()))?;
        Self::new(data)
    }

    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        Self::new(Array2::zeros((rows, cols)))
    }

    pub fn constant(rows: usize, cols: usize, value: f64) -> Result<Self> {
        Self::new(Array2::from_elem((rows, cols), value))
    }

    pub(crate) fn from_array_unchecked(data: Array2<f64>) -> Self {
        debug_assert!(data.nrows() >= 2 && data.ncols() >= 2);
        Self { data }
    }

    pub fn rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn cols(&self) -> usize {
        self.data.ncols()
    }

    pub fn dim(&self) -> (usize, usize) {
        self.data.dim()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.data.view()
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn into_array(self) -> Array2<f64> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[[row, col]]
    }

    /// Pixel values in row-major order.
    pub fn to_vec(&self) -> Vec<f64> {
        self.data.iter().copied().collect()
    }

    pub fn transpose(&self) -> Image {
        Image::from_array_unchecked(self.data.t().to_owned())
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Largest absolute pixel difference.
    pub fn max_abs_diff(&self, other: &Image) -> f64 {
        Zip::from(&self.data)
            .and(&other.data)
            .fold(0.0_f64, |acc, a, b| acc.max((a - b).abs()))
    }

    pub fn ensure_same_dim(&self, other: &Image, what: &str) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(DeblurError::Shape(format!(
                "{what}: {:?} vs {:?}",
                self.dim(),
                other.dim()
            )));
        }
        Ok(())
    }
}

/// A compactly supported blur kernel with an explicit origin.
#[derive(Debug, Clone, PartialEq)]
pub struct Psf {
    weights: Array2<f64>,
    center: (usize, usize),
}

impl Psf {
    pub fn new(weights: Array2<f64>, center: (usize, usize)) -> Result<Self> {
        let (rows, cols) = weights.dim();
        if rows == 0 || cols == 0 {
            return Err(DeblurError::Shape("empty PSF".into()));
        }
        if center.0 >= rows || center.1 >= cols {
            return Err(DeblurError::Params(format!(
                "PSF center {center:?} outside the {rows}x{cols} kernel"
            )));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(DeblurError::Data("non-finite PSF weight".into()));
        }
        let mass: f64 = weights.sum();
        if !(mass > 0.0) {
            return Err(DeblurError::Data(format!(
                "PSF weights must have positive sum, got {mass}"
            )));
        }
        Ok(Self { weights, center })
    }

    /// Center taken as `ceil(size / 2)` in one-based terms on each axis.
    pub fn with_default_center(weights: Array2<f64>) -> Result<Self> {
        let (rows, cols) = weights.dim();
        let center = (rows.saturating_sub(1) / 2, cols.saturating_sub(1) / 2);
        Self::new(weights, center)
    }

    /// The identity kernel.
    pub fn delta() -> Self {
        Self {
            weights: Array2::ones((1, 1)),
            center: (0, 0),
        }
    }

    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }

    pub fn center(&self) -> (usize, usize) {
        self.center
    }

    pub fn dim(&self) -> (usize, usize) {
        self.weights.dim()
    }

    pub fn mass(&self) -> f64 {
        self.weights.sum()
    }

    /// Nonzero taps as `(row offset, col offset, weight)` relative to the center.
    pub fn taps(&self) -> Vec<(isize, isize, f64)> {
        let (cr, cc) = (self.center.0 as isize, self.center.1 as isize);
        self.weights
            .indexed_iter()
            .filter(|(_, w)| **w != 0.0)
            .map(|((r, c), w)| (r as isize - cr, c as isize - cc, *w))
            .collect()
    }

    /// Offset range `(min_dr, max_dr, min_dc, max_dc)` covered by the kernel array.
    pub fn offset_bounds(&self) -> (isize, isize, isize, isize) {
        let (rows, cols) = self.dim();
        let (cr, cc) = (self.center.0 as isize, self.center.1 as isize);
        (-cr, rows as isize - 1 - cr, -cc, cols as isize - 1 - cc)
    }

    /// Weight at a given offset from the center, zero outside the support.
    pub fn weight_at(&self, dr: isize, dc: isize) -> f64 {
        let r = self.center.0 as isize + dr;
        let c = self.center.1 as isize + dc;
        let (rows, cols) = self.dim();
        if r < 0 || c < 0 || r >= rows as isize || c >= cols as isize {
            0.0
        } else {
            self.weights[[r as usize, c as usize]]
        }
    }

    /// The kernel rotated by 180 degrees about its center: `h'(d) = h(-d)`.
    pub fn flipped(&self) -> Psf {
        let (rows, cols) = self.dim();
        let weights = Array2::from_shape_fn((rows, cols), |(r, c)| {
            self.weights[[rows - 1 - r, cols - 1 - c]]
        });
        Psf {
            weights,
            center: (rows - 1 - self.center.0, cols - 1 - self.center.1),
        }
    }

    pub fn transposed(&self) -> Psf {
        Psf {
            weights: self.weights.t().to_owned(),
            center: (self.center.1, self.center.0),
        }
    }

    /// True when the weights are invariant under horizontal and vertical flips
    /// about the center (compared up to 1e-12 of the largest weight).
    pub fn is_quadrantally_symmetric(&self) -> bool {
        let tol = 1e-12 * self.max_abs_weight();
        let (lo_r, hi_r, lo_c, hi_c) = self.offset_bounds();
        for dr in lo_r.min(-hi_r)..=hi_r.max(-lo_r) {
            for dc in lo_c.min(-hi_c)..=hi_c.max(-lo_c) {
                let w = self.weight_at(dr, dc);
                if (w - self.weight_at(-dr, dc)).abs() > tol
                    || (w - self.weight_at(dr, -dc)).abs() > tol
                {
                    return false;
                }
            }
        }
        true
    }

    /// True when the weight array itself is flip-invariant. For even sizes this is
    /// symmetry about a half-pixel point rather than about the center.
    pub fn is_array_symmetric(&self) -> bool {
        let tol = 1e-12 * self.max_abs_weight();
        let (rows, cols) = self.dim();
        self.weights.indexed_iter().all(|((r, c), w)| {
            (w - self.weights[[rows - 1 - r, c]]).abs() <= tol
                && (w - self.weights[[r, cols - 1 - c]]).abs() <= tol
        })
    }

    /// Average of the four axis flips about the center. Identity for
    /// quadrantally symmetric kernels; mass is preserved.
    pub fn symmetrized(&self) -> Psf {
        let (lo_r, hi_r, lo_c, hi_c) = self.offset_bounds();
        let rr = hi_r.max(-lo_r);
        let rc = hi_c.max(-lo_c);
        let weights = Array2::from_shape_fn((2 * rr as usize + 1, 2 * rc as usize + 1), |(r, c)| {
            let (dr, dc) = (r as isize - rr, c as isize - rc);
            0.25 * (self.weight_at(dr, dc)
                + self.weight_at(-dr, dc)
                + self.weight_at(dr, -dc)
                + self.weight_at(-dr, -dc))
        });
        Psf {
            weights,
            center: (rr as usize, rc as usize),
        }
    }

    fn max_abs_weight(&self) -> f64 {
        self.weights.iter().fold(0.0_f64, |m, w| m.max(w.abs()))
    }
}

/// The auxiliary variable `z = (z1, z2)` of the splitting.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientField {
    pub z1: Array2<f64>,
    pub z2: Array2<f64>,
}

impl GradientField {
    pub fn new(z1: Array2<f64>, z2: Array2<f64>) -> Result<Self> {
        if z1.dim() != z2.dim() {
            return Err(DeblurError::Shape(format!(
                "gradient components differ: {:?} vs {:?}",
                z1.dim(),
                z2.dim()
            )));
        }
        if z1.iter().chain(z2.iter()).any(|v| !v.is_finite()) {
            return Err(DeblurError::Data("non-finite gradient entry".into()));
        }
        Ok(Self { z1, z2 })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            z1: Array2::zeros((rows, cols)),
            z2: Array2::zeros((rows, cols)),
        }
    }

    pub fn dim(&self) -> (usize, usize) {
        self.z1.dim()
    }

    /// Pixelwise Euclidean magnitude `|z_i|`.
    pub fn magnitude(&self) -> Array2<f64> {
        Zip::from(&self.z1)
            .and(&self.z2)
            .map_collect(|a, b| a.hypot(*b))
    }

    pub fn transpose(&self) -> GradientField {
        GradientField {
            z1: self.z2.t().to_owned(),
            z2: self.z1.t().to_owned(),
        }
    }
}

/// Rule for the pixels outside the image frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryModel {
    Zero,
    Periodic,
    Reflective,
    Antireflective,
}

impl BoundaryModel {
    pub const ALL: [BoundaryModel; 4] = [
        BoundaryModel::Zero,
        BoundaryModel::Periodic,
        BoundaryModel::Reflective,
        BoundaryModel::Antireflective,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BoundaryModel::Zero => "zero",
            BoundaryModel::Periodic => "periodic",
            BoundaryModel::Reflective => "reflective",
            BoundaryModel::Antireflective => "antireflective",
        }
    }
}

impl fmt::Display for BoundaryModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BoundaryModel {
    type Err = DeblurError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "zero" | "dirichlet" => Ok(BoundaryModel::Zero),
            "periodic" => Ok(BoundaryModel::Periodic),
            "reflective" | "symmetric" => Ok(BoundaryModel::Reflective),
            "antireflective" | "anti-reflective" | "antisymmetric" => {
                Ok(BoundaryModel::Antireflective)
            }
            other => Err(DeblurError::Params(format!("unknown boundary model '{other}'"))),
        }
    }
}

/// Parameters of the alternating minimization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveParams {
    /// Fidelity weight.
    pub alpha: f64,
    /// Penalty continuation ladder, strictly increasing.
    pub beta_ladder: Vec<f64>,
    /// Stop an inner loop once the relative change of `u` drops below this.
    pub inner_tol: f64,
    /// Iteration cap per penalty value.
    pub inner_max: usize,
    pub rng_seed: u64,
}

impl SolveParams {
    /// `2^1, ..., 2^7`.
    pub fn default_ladder() -> Vec<f64> {
        (1..=7).map(|j| 2f64.powi(j)).collect()
    }

    pub fn new(alpha: f64) -> Self {
        Self {
            alpha,
            beta_ladder: Self::default_ladder(),
            inner_tol: 1e-3,
            inner_max: 10,
            rng_seed: 0,
        }
    }

    pub fn with_ladder(mut self, ladder: Vec<f64>) -> Self {
        self.beta_ladder = ladder;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(DeblurError::Params(format!("alpha must be positive, got {}", self.alpha)));
        }
        if self.beta_ladder.is_empty() {
            return Err(DeblurError::Params("empty beta ladder".into()));
        }
        if self.beta_ladder.iter().any(|b| !(*b > 0.0 && b.is_finite())) {
            return Err(DeblurError::Params("beta values must be positive".into()));
        }
        if self.beta_ladder.windows(2).any(|w| w[1] <= w[0]) {
            return Err(DeblurError::Params("beta ladder must be strictly increasing".into()));
        }
        if !(self.inner_tol > 0.0 && self.inner_tol < 1.0) {
            return Err(DeblurError::Params(format!(
                "inner_tol must lie in (0, 1), got {}",
                self.inner_tol
            )));
        }
        if self.inner_max == 0 {
            return Err(DeblurError::Params("inner_max must be at least 1".into()));
        }
        Ok(())
    }
}

/// The three terms of the penalized functional and their sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    /// `alpha/2 * ||Hu - f||^2`
    pub fidelity: f64,
    /// `sum |z|`
    pub tv_z: f64,
    /// `beta/2 * sum |z - grad u|^2`
    pub coupling: f64,
    pub total: f64,
}

/// Evaluates the penalized energy `g(u, z)` with unit cell area.
pub fn energy(
    u: &Image,
    z: &GradientField,
    f: &Image,
    psf: &Psf,
    bc: BoundaryModel,
    alpha: f64,
    beta: f64,
) -> Result<EnergyReport> {
    u.ensure_same_dim(f, "energy: u and f")?;
    if z.dim() != u.dim() {
        return Err(DeblurError::Shape(format!(
            "energy: z is {:?}, u is {:?}",
            z.dim(),
            u.dim()
        )));
    }
    if !(alpha > 0.0) || !(beta > 0.0) {
        return Err(DeblurError::Params("alpha and beta must be positive".into()));
    }
    if z.z1.iter().chain(z.z2.iter()).any(|v| !v.is_finite()) {
        return Err(DeblurError::Data("non-finite gradient entry".into()));
    }
    let hu = operators::apply_blur(u, psf, bc)?;
    let grad = operators::gradient(u, bc)?;

    let residual: f64 = Zip::from(hu.as_array())
        .and(f.as_array())
        .fold(0.0, |acc, a, b| acc + (a - b) * (a - b));
    let tv_z: f64 = Zip::from(&z.z1)
        .and(&z.z2)
        .fold(0.0, |acc, a, b| acc + a.hypot(*b));
    let mismatch: f64 = Zip::from(&z.z1)
        .and(&z.z2)
        .and(&grad.z1)
        .and(&grad.z2)
        .fold(0.0, |acc, a, b, ga, gb| {
            acc + (a - ga) * (a - ga) + (b - gb) * (b - gb)
        });

    let fidelity = 0.5 * alpha * residual;
    let coupling = 0.5 * beta * mismatch;
    Ok(EnergyReport {
        fidelity,
        tv_z,
        coupling,
        total: fidelity + tv_z + coupling,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

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
    fn image_rejects_tiny_and_nonfinite() {
        assert!(Image::zeros(1, 5).is_err());
        assert!(Image::new(array![[0.0, f64::NAN], [0.0, 0.0]]).is_err());
        assert!(Image::zeros(2, 2).is_ok());
    }

    #[test]
    fn psf_validation() {
        assert!(Psf::new(array![[0.0, 0.0]], (0, 0)).is_err());
        assert!(Psf::new(array![[1.0, 0.0]], (1, 1)).is_err());
        assert!(Psf::new(array![[-1.0, 0.5]], (0, 0)).is_err());
        let p = Psf::with_default_center(Array2::ones((16, 16))).unwrap();
        assert_eq!(p.center(), (7, 7));
        let p = Psf::with_default_center(Array2::ones((9, 9))).unwrap();
        assert_eq!(p.center(), (4, 4));
    }

    #[test]
    fn psf_symmetry_flags() {
        let sym = Psf::with_default_center(array![[1.0, 2.0, 1.0], [2.0, 4.0, 2.0], [1.0, 2.0, 1.0]])
            .unwrap();
        assert!(sym.is_quadrantally_symmetric());
        let skew = Psf::with_default_center(array![[1.0, 2.0, 3.0], [2.0, 4.0, 2.0], [1.0, 2.0, 1.0]])
            .unwrap();
        assert!(!skew.is_quadrantally_symmetric());
        // Symmetric about the array midpoint but not about any pixel.
        let even = Psf::with_default_center(array![[1.0, 1.0], [1.0, 1.0]]).unwrap();
        assert!(!even.is_quadrantally_symmetric());
        assert!(even.is_array_symmetric());
        let s = even.symmetrized();
        assert!(s.is_quadrantally_symmetric());
        assert!((s.mass() - 4.0).abs() < 1e-15);
    }

    #[test]
    fn flipped_negates_offsets() {
        let p = Psf::new(array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]], (0, 1)).unwrap();
        let f = p.flipped();
        for (dr, dc, w) in p.taps() {
            assert_eq!(f.weight_at(-dr, -dc), w);
        }
        assert_eq!(f.flipped(), p);
    }

    #[test]
    fn boundary_model_parses() {
        for bc in BoundaryModel::ALL {
            assert_eq!(bc.name().parse::<BoundaryModel>().unwrap(), bc);
        }
        assert!("mirror".parse::<BoundaryModel>().is_err());
    }

    #[test]
    fn params_validation() {
        assert!(SolveParams::new(1.0).validate().is_ok());
        assert_eq!(SolveParams::new(1.0).beta_ladder, vec![2., 4., 8., 16., 32., 64., 128.]);
        assert!(SolveParams::new(0.0).validate().is_err());
        assert!(SolveParams::new(1.0).with_ladder(vec![4.0, 2.0]).validate().is_err());
        let mut p = SolveParams::new(1.0);
        p.inner_tol = 1.0;
        assert!(p.validate().is_err());
        p.inner_tol = 0.5;
        p.inner_max = 0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn energy_of_exact_constant_fit_is_zero() {
        let f = Image::constant(6, 5, 0.3).unwrap();
        let z = GradientField::zeros(6, 5);
        for bc in BoundaryModel::ALL {
            let e = energy(&f, &z, &f, &Psf::delta(), bc, 2.0, 3.0).unwrap();
            assert_eq!(e.fidelity, 0.0);
            assert_eq!(e.tv_z, 0.0);
            if bc != BoundaryModel::Zero {
                assert_eq!(e.coupling, 0.0);
                assert_eq!(e.total, 0.0);
            }
        }
    }

    #[test]
    fn coupling_vanishes_when_z_is_the_gradient() {
        let u = lcg_image(7, 9, 3);
        let f = lcg_image(7, 9, 4);
        for bc in BoundaryModel::ALL {
            let z = operators::gradient(&u, bc).unwrap();
            let e = energy(&u, &z, &f, &Psf::delta(), bc, 1.0, 10.0).unwrap();
            assert_eq!(e.coupling, 0.0);
        }
    }

    #[test]
    fn energy_matches_straight_loop_oracle() {
        // Independent elementwise sum with wraparound indexing.
        let n = 8;
        let u = lcg_image(n, n, 11);
        let f = lcg_image(n, n, 12);
        let z = GradientField::new(
            lcg_image(n, n, 13).into_array() - 0.5,
            lcg_image(n, n, 14).into_array() - 0.5,
        )
        .unwrap();
        let psf = Psf::new(array![[0.1, 0.2], [0.3, 0.15], [0.05, 0.2]], (1, 0)).unwrap();
        let (alpha, beta) = (3.5, 7.25);

        let mut fid = 0.0;
        let mut tv = 0.0;
        let mut cpl = 0.0;
        for i in 0..n {
            for j in 0..n {
                let mut hu = 0.0;
                for k in 0..3 {
                    for l in 0..2 {
                        let r = (i as isize - (k as isize - 1)).rem_euclid(n as isize) as usize;
                        let c = (j as isize - l as isize).rem_euclid(n as isize) as usize;
                        hu += psf.weights()[[k, l]] * u.get(r, c);
                    }
                }
                fid += (hu - f.get(i, j)).powi(2);
                let g1 = u.get(i, (j + 1) % n) - u.get(i, j);
                let g2 = u.get((i + 1) % n, j) - u.get(i, j);
                let (a, b) = (z.z1[[i, j]], z.z2[[i, j]]);
                tv += (a * a + b * b).sqrt();
                cpl += (a - g1).powi(2) + (b - g2).powi(2);
            }
        }
        let expected = 0.5 * alpha * fid + tv + 0.5 * beta * cpl;
        let e = energy(&u, &z, &f, &psf, BoundaryModel::Periodic, alpha, beta).unwrap();
        assert!((e.total - expected).abs() <= 1e-12 * expected);
        assert!((e.total - (e.fidelity + e.tv_z + e.coupling)).abs() <= 1e-12 * e.total);
    }

    #[test]
    fn energy_is_transpose_invariant_for_symmetric_psf() {
        let u = lcg_image(6, 9, 21);
        let f = lcg_image(6, 9, 22);
        let z = GradientField::new(lcg_image(6, 9, 23).into_array(), lcg_image(6, 9, 24).into_array())
            .unwrap();
        let psf = Psf::with_default_center(array![[1.0, 2.0, 1.0], [2.0, 5.0, 2.0], [1.0, 2.0, 1.0]])
            .unwrap();
        for bc in BoundaryModel::ALL {
            let a = energy(&u, &z, &f, &psf, bc, 2.0, 5.0).unwrap();
            let b = energy(&u.transpose(), &z.transpose(), &f.transpose(), &psf.transposed(), bc, 2.0, 5.0)
                .unwrap();
            assert!((a.total - b.total).abs() <= 1e-12 * a.total, "{bc}");
        }
    }

    #[test]
    fn energy_total_nondecreasing_in_beta() {
        let u = lcg_image(6, 6, 31);
        let f = lcg_image(6, 6, 32);
        let z = GradientField::new(lcg_image(6, 6, 33).into_array(), lcg_image(6, 6, 34).into_array())
            .unwrap();
        let psf = Psf::delta();
        let mut last = 0.0;
        for beta in [0.5, 1.0, 4.0, 16.0] {
            let e = energy(&u, &z, &f, &psf, BoundaryModel::Reflective, 1.0, beta).unwrap();
            assert!(e.total >= last);
            last = e.total;
        }
        let z = operators::gradient(&u, BoundaryModel::Reflective).unwrap();
        let a = energy(&u, &z, &f, &psf, BoundaryModel::Reflective, 1.0, 1.0).unwrap();
        let b = energy(&u, &z, &f, &psf, BoundaryModel::Reflective, 1.0, 100.0).unwrap();
        assert_eq!(a.total, b.total);
    }

    #[test]
    fn energy_rejects_mismatched_shapes() {
        let u = Image::zeros(4, 4).unwrap();
        let f = Image::zeros(4, 5).unwrap();
        let z = GradientField::zeros(4, 4);
        let err = energy(&u, &z, &f, &Psf::delta(), BoundaryModel::Zero, 1.0, 1.0).unwrap_err();
        assert!(matches!(err, DeblurError::Shape(_)));
        let f = Image::zeros(4, 4).unwrap();
        let z = GradientField::zeros(3, 4);
        assert!(energy(&u, &z, &f, &Psf::delta(), BoundaryModel::Zero, 1.0, 1.0).is_err());
    }
}
