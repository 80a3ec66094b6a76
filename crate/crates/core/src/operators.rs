//! Matrix-free blur, correlation and finite-difference operators under each
//! boundary model, and the domain-enlargement projector.
//!
//! Ghost pixels are resolved per axis and combined as a tensor product, so a
//! corner ghost under antireflection is `4u(0,0) - 2u(i,0) - 2u(0,j) + u(i,j)`.

use ndarray::{s, Array2, ArrayView2, Axis, Zip};

use crate::error::{DeblurError, Result};
use crate::grid::{BoundaryModel, GradientField, Image, Psf};

/// Linear combination of in-range samples that defines the value at 1D index
/// `i` of a length-`n` signal. Beyond the first mirror image the rules are
/// applied repeatedly.
pub(crate) fn ghost_terms(i: isize, n: usize, bc: BoundaryModel) -> Vec<(usize, f64)> {
    let ni = n as isize;
    if (0..ni).contains(&i) {
        return vec![(i as usize, 1.0)];
    }
    match bc {
        BoundaryModel::Zero => Vec::new(),
        BoundaryModel::Periodic => vec![(i.rem_euclid(ni) as usize, 1.0)],
        BoundaryModel::Reflective => {
            // Half-sample symmetry: u[-1] = u[0], u[n] = u[n-1].
            let m = i.rem_euclid(2 * ni);
            let k = if m < ni { m } else { 2 * ni - 1 - m };
            vec![(k as usize, 1.0)]
        }
        BoundaryModel::Antireflective => {
            // u[-j] = 2u[0] - u[j] and u[n-1+j] = 2u[n-1] - u[n-1-j].
            let (pivot, mirrored) = if i < 0 { (0, -i) } else { (ni - 1, 2 * (ni - 1) - i) };
            if n == 1 {
                return vec![(0, 1.0)];
            }
            let mut terms = vec![(pivot as usize, 2.0)];
            for (k, c) in ghost_terms(mirrored, n, bc) {
                terms.push((k, -c));
            }
            terms
        }
    }
}

/// Extends `data` along one axis by `before`/`after` ghost lanes.
pub(crate) fn extend_axis(
    data: ArrayView2<'_, f64>,
    axis: Axis,
    before: usize,
    after: usize,
    bc: BoundaryModel,
) -> Array2<f64> {
    let n = data.len_of(axis);
    let mut shape = [data.nrows(), data.ncols()];
    shape[axis.index()] += before + after;
    let mut out = Array2::zeros(shape);
    for (k, mut lane) in out.axis_iter_mut(axis).enumerate() {
        let i = k as isize - before as isize;
        for (src, c) in ghost_terms(i, n, bc) {
            lane.scaled_add(c, &data.index_axis(axis, src));
        }
    }
    out
}

/// Ghost-extends on all four sides.
pub(crate) fn extend_array(
    data: ArrayView2<'_, f64>,
    pad: Pad,
    bc: BoundaryModel,
) -> Array2<f64> {
    let rows = extend_axis(data, Axis(0), pad.top, pad.bottom, bc);
    extend_axis(rows.view(), Axis(1), pad.left, pad.right, bc)
}

/// Convolution `out(x) = sum_d h(d) u~(x - d)` with ghosts from `bc`.
pub(crate) fn convolve(u: ArrayView2<'_, f64>, psf: &Psf, bc: BoundaryModel) -> Array2<f64> {
    let (rows, cols) = u.dim();
    let (min_dr, max_dr, min_dc, max_dc) = psf.offset_bounds();
    let pad = Pad {
        top: max_dr.max(0) as usize,
        bottom: (-min_dr).max(0) as usize,
        left: max_dc.max(0) as usize,
        right: (-min_dc).max(0) as usize,
    };
    let ext = extend_array(u, pad, bc);
    let mut out = Array2::zeros((rows, cols));
    for (dr, dc, w) in psf.taps() {
        let r0 = (pad.top as isize - dr) as usize;
        let c0 = (pad.left as isize - dc) as usize;
        out.scaled_add(w, &ext.slice(s![r0..r0 + rows, c0..c0 + cols]));
    }
    out
}

fn check_support(u: &Image, psf: &Psf) -> Result<()> {
    let (pr, pc) = psf.dim();
    if pr > u.rows() || pc > u.cols() {
        return Err(DeblurError::Unsupported(format!(
            "PSF support {pr}x{pc} exceeds the {}x{} image",
            u.rows(),
            u.cols()
        )));
    }
    Ok(())
}

/// Blurs `u` with `psf` under the boundary model `bc`.
pub fn apply_blur(u: &Image, psf: &Psf, bc: BoundaryModel) -> Result<Image> {
    check_support(u, psf)?;
    Ok(Image::from_array_unchecked(convolve(u.view(), psf, bc)))
}

/// Correlation with `psf`: blur by the 180-degree rotated kernel under the same `bc`.
pub fn apply_correlation(u: &Image, psf: &Psf, bc: BoundaryModel) -> Result<Image> {
    check_support(u, psf)?;
    Ok(Image::from_array_unchecked(convolve(u.view(), &psf.flipped(), bc)))
}

/// Forward difference along `axis`, last lane closed by the ghost rule.
fn forward_difference(u: ArrayView2<'_, f64>, axis: Axis, bc: BoundaryModel) -> Array2<f64> {
    let n = u.len_of(axis);
    let mut out = Array2::zeros(u.dim());
    for i in 0..n {
        let mut lane = out.index_axis_mut(axis, i);
        for (k, c) in ghost_terms(i as isize + 1, n, bc) {
            lane.scaled_add(c, &u.index_axis(axis, k));
        }
        lane -= &u.index_axis(axis, i);
    }
    out
}

/// `D'q` along `axis`: the backward stencil `q[i-1] - q[i]`, closed so that
/// `D'D` is the boundary-closed positive semidefinite Laplacian.
fn adjoint_difference(q: ArrayView2<'_, f64>, axis: Axis, bc: BoundaryModel) -> Array2<f64> {
    let n = q.len_of(axis);
    let mut out = Array2::zeros(q.dim());
    for i in 0..n {
        // (use q[i-1], use q[i]) per lane
        let (prev, this) = match bc {
            BoundaryModel::Zero => (i >= 1, true),
            BoundaryModel::Periodic => (true, true),
            BoundaryModel::Reflective => (i >= 1, i + 1 < n),
            BoundaryModel::Antireflective => {
                let inner = i >= 1 && i + 1 < n;
                (inner, inner)
            }
        };
        let mut lane = out.index_axis_mut(axis, i);
        if prev {
            let k = if i == 0 { n - 1 } else { i - 1 };
            lane += &q.index_axis(axis, k);
        }
        if this {
            lane -= &q.index_axis(axis, i);
        }
    }
    out
}

/// Forward differences: `z1` horizontal, `z2` vertical.
pub fn gradient(u: &Image, bc: BoundaryModel) -> Result<GradientField> {
    Ok(GradientField {
        z1: forward_difference(u.view(), Axis(1), bc),
        z2: forward_difference(u.view(), Axis(0), bc),
    })
}

/// `D1'z1 + D2'z2`. For periodic boundaries this is exactly `D^T z`.
pub fn adjoint_gradient(z: &GradientField, bc: BoundaryModel) -> Result<Image> {
    let (rows, cols) = z.dim();
    if rows < 2 || cols < 2 {
        return Err(DeblurError::Shape(format!("gradient field too small: {rows}x{cols}")));
    }
    let mut out = adjoint_difference(z.z1.view(), Axis(1), bc);
    out += &adjoint_difference(z.z2.view(), Axis(0), bc);
    Ok(Image::from_array_unchecked(out))
}

/// `D'D u`, the boundary-closed 5-point Laplacian (positive semidefinite sign).
pub fn laplacian(u: &Image, bc: BoundaryModel) -> Result<Image> {
    adjoint_gradient(&gradient(u, bc)?, bc)
}

pub(crate) fn laplacian_array(u: ArrayView2<'_, f64>, bc: BoundaryModel) -> Array2<f64> {
    let mut out = adjoint_difference(forward_difference(u, Axis(1), bc).view(), Axis(1), bc);
    out += &adjoint_difference(forward_difference(u, Axis(0), bc).view(), Axis(0), bc);
    out
}

pub(crate) fn system_array(
    u: ArrayView2<'_, f64>,
    psf: &Psf,
    bc: BoundaryModel,
    ratio: f64,
) -> Array2<f64> {
    let hu = convolve(u, psf, bc);
    let mut out = convolve(hu.view(), &psf.flipped(), bc);
    if ratio != 0.0 {
        out.scaled_add(ratio, &laplacian_array(u, bc));
    }
    out
}

/// `(H'H + ratio * D'D) u`, the u-step system operator, matrix-free.
pub fn apply_system(u: &Image, psf: &Psf, bc: BoundaryModel, ratio: f64) -> Result<Image> {
    check_support(u, psf)?;
    Ok(Image::from_array_unchecked(system_array(u.view(), psf, bc, ratio)))
}

/// Per-side margins of an enlarged domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Pad {
    pub top: usize,
    pub bottom: usize,
    pub left: usize,
    pub right: usize,
}

impl Pad {
    pub fn uniform(p: usize) -> Self {
        Self {
            top: p,
            bottom: p,
            left: p,
            right: p,
        }
    }

    /// Margins that make the enlarged domain exactly twice the original on
    /// each axis, i.e. one full period of the mirror-symmetric extension.
    pub fn full_reflection(rows: usize, cols: usize) -> Self {
        Self {
            top: rows / 2,
            bottom: rows - rows / 2,
            left: cols / 2,
            right: cols - cols / 2,
        }
    }

    pub fn min_side(&self) -> usize {
        self.top.min(self.bottom).min(self.left).min(self.right)
    }

    pub fn is_zero(&self) -> bool {
        *self == Pad::default()
    }
}

impl From<usize> for Pad {
    fn from(p: usize) -> Self {
        Pad::uniform(p)
    }
}

/// An enlarged domain around an image of `dims`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PaddedDomain {
    pub rows: usize,
    pub cols: usize,
    pub pad: Pad,
    pub extension: BoundaryModel,
}

impl PaddedDomain {
    pub fn new(rows: usize, cols: usize, pad: impl Into<Pad>, extension: BoundaryModel) -> Self {
        Self {
            rows,
            cols,
            pad: pad.into(),
            extension,
        }
    }

    /// Margin sized after the PSF: `max(psf rows, psf cols)` on every side.
    pub fn for_psf(rows: usize, cols: usize, psf: &Psf, extension: BoundaryModel) -> Self {
        let (pr, pc) = psf.dim();
        Self::new(rows, cols, pr.max(pc), extension)
    }

    pub fn padded_dims(&self) -> (usize, usize) {
        (
            self.rows + self.pad.top + self.pad.bottom,
            self.cols + self.pad.left + self.pad.right,
        )
    }

    /// Smallest margin that contains the PSF half-support.
    pub fn min_pad_for(psf: &Psf) -> usize {
        let (pr, pc) = psf.dim();
        pr.max(pc).div_ceil(2)
    }

    fn validate(&self) -> Result<()> {
        let p = self.pad;
        let largest_row_pad = p.top.max(p.bottom);
        let largest_col_pad = p.left.max(p.right);
        match self.extension {
            BoundaryModel::Antireflective => {
                if largest_row_pad >= self.rows || largest_col_pad >= self.cols {
                    return Err(DeblurError::Unsupported(format!(
                        "antireflective extension needs pad < image size ({}x{}), got {p:?}",
                        self.rows, self.cols
                    )));
                }
            }
            BoundaryModel::Reflective => {
                if largest_row_pad > self.rows || largest_col_pad > self.cols {
                    return Err(DeblurError::Unsupported(format!(
                        "reflective extension needs pad <= image size ({}x{}), got {p:?}",
                        self.rows, self.cols
                    )));
                }
            }
            BoundaryModel::Zero | BoundaryModel::Periodic => {}
        }
        Ok(())
    }
}

/// Embeds `f` in the enlarged domain; the margin follows `dom.extension`.
pub fn extend(f: &Image, dom: &PaddedDomain) -> Result<Image> {
    if f.dim() != (dom.rows, dom.cols) {
        return Err(DeblurError::Shape(format!(
            "extend: image is {:?}, domain expects {:?}",
            f.dim(),
            (dom.rows, dom.cols)
        )));
    }
    dom.validate()?;
    Ok(Image::from_array_unchecked(extend_array(f.view(), dom.pad, dom.extension)))
}

/// Extracts the original frame from an image on the enlarged domain.
pub fn crop(u: &Image, dom: &PaddedDomain) -> Result<Image> {
    if u.dim() != dom.padded_dims() {
        return Err(DeblurError::Shape(format!(
            "crop: image is {:?}, padded domain is {:?}",
            u.dim(),
            dom.padded_dims()
        )));
    }
    let p = dom.pad;
    let inner = u
        .view()
        .slice(s![p.top..p.top + dom.rows, p.left..p.left + dom.cols])
        .to_owned();
    Ok(Image::from_array_unchecked(inner))
}

/// Pointwise `<a, b>` of two equally sized arrays.
pub(crate) fn inner(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> f64 {
    Zip::from(a).and(b).fold(0.0, |acc, x, y| acc + x * y)
}
