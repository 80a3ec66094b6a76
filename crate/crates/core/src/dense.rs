//! Explicit matrices of every operator on small grids, built entry by entry
//! from the ghost-pixel rules. This is the reference the fast paths are
//! checked against.

use nalgebra::{DMatrix, DVector};

use crate::error::{DeblurError, Result};
use crate::grid::{BoundaryModel, Image, Psf};

/// Largest grid side the oracle accepts.
pub const ORACLE_CAP: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorTag {
    Blur,
    Correlation,
    Grad1,
    Grad2,
    AdjGrad1,
    AdjGrad2,
    System,
}

/// Difference direction: `Horizontal` is direction 1, `Vertical` direction 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Horizontal,
    Vertical,
}

/// An `N x N` matrix acting on images flattened row-major (`i * cols + j`).
#[derive(Debug, Clone)]
pub struct DenseOperator {
    pub rows: usize,
    pub cols: usize,
    pub matrix: DMatrix<f64>,
    pub tag: OperatorTag,
}

impl DenseOperator {
    pub fn dim(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn apply(&self, u: &Image) -> Result<Image> {
        self.check(u)?;
        let y = &self.matrix * flatten(u);
        unflatten(&y, self.rows, self.cols)
    }

    /// Dense LU solve.
    pub fn solve(&self, b: &Image) -> Result<Image> {
        self.check(b)?;
        let x = self
            .matrix
            .clone()
            .lu()
            .solve(&flatten(b))
            .ok_or_else(|| DeblurError::Singular("dense matrix is singular".into()))?;
        unflatten(&x, self.rows, self.cols)
    }

    /// Eigenvalues of the symmetric part, ascending.
    pub fn symmetric_eigenvalues(&self) -> Vec<f64> {
        let sym = (&self.matrix + self.matrix.transpose()) * 0.5;
        let mut ev: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn max_asymmetry(&self) -> f64 {
        (&self.matrix - self.matrix.transpose()).amax()
    }

    pub fn transpose(&self) -> DenseOperator {
        DenseOperator {
            matrix: self.matrix.transpose(),
            ..self.clone()
        }
    }

    fn check(&self, u: &Image) -> Result<()> {
        if u.dim() != (self.rows, self.cols) {
            return Err(DeblurError::Shape(format!(
                "operator acts on {}x{}, got {}x{}",
                self.rows,
                self.cols,
                u.rows(),
                u.cols()
            )));
        }
        Ok(())
    }
}

pub fn flatten(u: &Image) -> DVector<f64> {
    DVector::from_iterator(u.len(), u.view().iter().copied())
}

pub fn unflatten(v: &DVector<f64>, rows: usize, cols: usize) -> Result<Image> {
    Image::from_shape_vec(rows, cols, v.iter().copied().collect())
}

fn check_dims(dims: (usize, usize)) -> Result<()> {
    let (r, c) = dims;
    if r < 2 || c < 2 {
        return Err(DeblurError::Shape(format!("grid must be at least 2x2, got {r}x{c}")));
    }
    if r > ORACLE_CAP || c > ORACLE_CAP {
        return Err(DeblurError::Params(format!(
            "dense oracle is capped at {ORACLE_CAP}x{ORACLE_CAP}, got {r}x{c}"
        )));
    }
    Ok(())
}

/// Weights expressing sample `i` of a length-`n` signal through in-range samples.
fn resolve(i: isize, n: usize, bc: BoundaryModel) -> Vec<(usize, f64)> {
    let ni = n as isize;
    if (0..ni).contains(&i) {
        return vec![(i as usize, 1.0)];
    }
    match bc {
        BoundaryModel::Zero => vec![],
        BoundaryModel::Periodic => vec![(i.rem_euclid(ni) as usize, 1.0)],
        BoundaryModel::Reflective => {
            let m = i.rem_euclid(2 * ni);
            vec![((if m < ni { m } else { 2 * ni - 1 - m }) as usize, 1.0)]
        }
        BoundaryModel::Antireflective => {
            // The line through both end samples plus the odd, 2(n-1)-periodic
            // continuation of the remainder.
            let last = ni - 1;
            let t = i as f64 / last as f64;
            let mut out = vec![(0, 1.0 - t), (n - 1, t)];
            let m = i.rem_euclid(2 * last);
            let (k, sign) = if m <= last { (m, 1.0) } else { (2 * last - m, -1.0) };
            let s = k as f64 / last as f64;
            out.push((k as usize, sign));
            out.push((0, -sign * (1.0 - s)));
            out.push((n - 1, -sign * s));
            out
        }
    }
}

fn check_support(psf: &Psf, dims: (usize, usize)) -> Result<()> {
    let (pr, pc) = psf.dim();
    if pr > dims.0 || pc > dims.1 {
        return Err(DeblurError::Unsupported(format!(
            "PSF support {pr}x{pc} exceeds the {}x{} grid",
            dims.0, dims.1
        )));
    }
    Ok(())
}

fn convolution_matrix(psf: &Psf, dims: (usize, usize), bc: BoundaryModel) -> DMatrix<f64> {
    let (rows, cols) = dims;
    let mut m = DMatrix::zeros(rows * cols, rows * cols);
    for i in 0..rows {
        for j in 0..cols {
            let out = i * cols + j;
            for (dr, dc, w) in psf.taps() {
                let rs = resolve(i as isize - dr, rows, bc);
                let cs = resolve(j as isize - dc, cols, bc);
                for &(a, ca) in &rs {
                    for &(b, cb) in &cs {
                        m[(out, a * cols + b)] += w * ca * cb;
                    }
                }
            }
        }
    }
    m
}

/// Matrix of the blur `sum_d h(d) u~(x - d)`.
pub fn build_blur(psf: &Psf, dims: (usize, usize), bc: BoundaryModel) -> Result<DenseOperator> {
    check_dims(dims)?;
    check_support(psf, dims)?;
    Ok(DenseOperator {
        rows: dims.0,
        cols: dims.1,
        matrix: convolution_matrix(psf, dims, bc),
        tag: OperatorTag::Blur,
    })
}

/// Matrix of the correlation: the blur by the doubly flipped PSF, same `bc`.
pub fn build_correlation(
    psf: &Psf,
    dims: (usize, usize),
    bc: BoundaryModel,
) -> Result<DenseOperator> {
    check_dims(dims)?;
    check_support(psf, dims)?;
    Ok(DenseOperator {
        rows: dims.0,
        cols: dims.1,
        matrix: convolution_matrix(&psf.flipped(), dims, bc),
        tag: OperatorTag::Correlation,
    })
}

/// Forward difference `u(x + e) - u(x)` with the ghost rule closing the last lane.
pub fn build_grad(dims: (usize, usize), direction: Direction, bc: BoundaryModel) -> Result<DenseOperator> {
    check_dims(dims)?;
    let (rows, cols) = dims;
    let mut m = DMatrix::zeros(rows * cols, rows * cols);
    for i in 0..rows {
        for j in 0..cols {
            let out = i * cols + j;
            m[(out, out)] -= 1.0;
            match direction {
                Direction::Horizontal => {
                    for (b, c) in resolve(j as isize + 1, cols, bc) {
                        m[(out, i * cols + b)] += c;
                    }
                }
                Direction::Vertical => {
                    for (a, c) in resolve(i as isize + 1, rows, bc) {
                        m[(out, a * cols + j)] += c;
                    }
                }
            }
        }
    }
    let tag = match direction {
        Direction::Horizontal => OperatorTag::Grad1,
        Direction::Vertical => OperatorTag::Grad2,
    };
    Ok(DenseOperator {
        rows,
        cols,
        matrix: m,
        tag,
    })
}

/// `D'` for one direction. Zero, periodic and reflective closures give the
/// transpose of the forward difference. Antireflective keeps the backward
/// stencil `q[i-1] - q[i]` on interior lanes and zeroes the two boundary lanes.
pub fn build_adjgrad(
    dims: (usize, usize),
    direction: Direction,
    bc: BoundaryModel,
) -> Result<DenseOperator> {
    let tag = match direction {
        Direction::Horizontal => OperatorTag::AdjGrad1,
        Direction::Vertical => OperatorTag::AdjGrad2,
    };
    if bc != BoundaryModel::Antireflective {
        let mut d = build_grad(dims, direction, bc)?.transpose();
        d.tag = tag;
        return Ok(d);
    }
    check_dims(dims)?;
    let (rows, cols) = dims;
    let mut m = DMatrix::zeros(rows * cols, rows * cols);
    for i in 0..rows {
        for j in 0..cols {
            let out = i * cols + j;
            let (k, n) = match direction {
                Direction::Horizontal => (j, cols),
                Direction::Vertical => (i, rows),
            };
            if k == 0 || k == n - 1 {
                continue;
            }
            let prev = match direction {
                Direction::Horizontal => out - 1,
                Direction::Vertical => out - cols,
            };
            m[(out, prev)] += 1.0;
            m[(out, out)] -= 1.0;
        }
    }
    Ok(DenseOperator {
        rows,
        cols,
        matrix: m,
        tag,
    })
}

/// `H'H + ratio * (D1'D1 + D2'D2)`.
pub fn build_system(
    psf: &Psf,
    dims: (usize, usize),
    bc: BoundaryModel,
    ratio: f64,
) -> Result<DenseOperator> {
    if !(ratio >= 0.0 && ratio.is_finite()) {
        return Err(DeblurError::Params(format!("ratio must be finite and >= 0, got {ratio}")));
    }
    let h = build_blur(psf, dims, bc)?;
    let ht = build_correlation(psf, dims, bc)?;
    let mut m = &ht.matrix * &h.matrix;
    for dir in [Direction::Horizontal, Direction::Vertical] {
        let d = build_grad(dims, dir, bc)?;
        let dt = build_adjgrad(dims, dir, bc)?;
        m += (&dt.matrix * &d.matrix) * ratio;
    }
    Ok(DenseOperator {
        rows: dims.0,
        cols: dims.1,
        matrix: m,
        tag: OperatorTag::System,
    })
}
