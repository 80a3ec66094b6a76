//! Python bindings: images are 2-D float64 numpy arrays, boundary models are
//! strings (`zero`, `periodic`, `reflective`, `antireflective`).

use numpy::{IntoPyArray, PyArray1, PyArray2, PyReadonlyArray2};
use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use tvdeblur_core::harness::{self, SolveMode};
use tvdeblur_core::solver::SolveTrace;
use tvdeblur_core::transforms::{self, SpectralPlan};
use tvdeblur_core::{dense, operators, BoundaryModel, DeblurError, GradientField, Image, SolveParams};

type Pair<'py> = (Bound<'py, PyArray2<f64>>, Bound<'py, PyArray2<f64>>);

fn err(e: DeblurError) -> PyErr {
    if e.is_numerical() {
        PyArithmeticError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn image(a: PyReadonlyArray2<'_, f64>) -> PyResult<Image> {
    Image::new(a.as_array().to_owned()).map_err(err)
}

fn bc(name: &str) -> PyResult<BoundaryModel> {
    name.parse().map_err(err)
}

fn out<'py>(py: Python<'py>, u: Image) -> Bound<'py, PyArray2<f64>> {
    u.into_array().into_pyarray(py)
}

fn params(alpha: f64, betas: Option<Vec<f64>>, inner_tol: f64, inner_max: usize) -> PyResult<SolveParams> {
    let mut p = SolveParams::new(alpha);
    if let Some(b) = betas {
        p = p.with_ladder(b);
    }
    p.inner_tol = inner_tol;
    p.inner_max = inner_max;
    p.validate().map_err(err)?;
    Ok(p)
}

fn trace_dict<'py>(py: Python<'py>, t: &SolveTrace) -> PyResult<Bound<'py, PyAny>> {
    let d = PyDict::new(py);
    d.set_item("status", format!("{:?}", t.status))?;
    d.set_item("iterations", t.total_iterations())?;
    d.set_item("monotonicity_violations", t.monotonicity_violations)?;
    d.set_item("seconds", t.seconds)?;
    d.set_item("energies", t.records.iter().map(|r| r.energy).collect::<Vec<_>>())?;
    d.set_item("betas", t.records.iter().map(|r| r.beta).collect::<Vec<_>>())?;
    d.set_item("rel_changes", t.records.iter().map(|r| r.rel_change).collect::<Vec<_>>())?;
    d.set_item(
        "blocks",
        t.blocks
            .iter()
            .map(|b| (b.beta, b.iterations, b.converged, b.final_energy.total))
            .collect::<Vec<_>>(),
    )?;
    Ok(d.into_any())
}

/// Point spread function with an explicit center (row, col), zero-based.
#[pyclass(name = "Psf", module = "tvdeblur", from_py_object)]
#[derive(Clone)]
struct PyPsf {
    inner: tvdeblur_core::Psf,
}

#[pymethods]
impl PyPsf {
    #[new]
    #[pyo3(signature = (weights, center=None))]
    fn new(weights: PyReadonlyArray2<'_, f64>, center: Option<(usize, usize)>) -> PyResult<Self> {
        let w = weights.as_array().to_owned();
        let inner = match center {
            Some(c) => tvdeblur_core::Psf::new(w, c),
            None => tvdeblur_core::Psf::with_default_center(w),
        }
        .map_err(err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn gaussian(hsize: usize, delta: f64) -> PyResult<Self> {
        Ok(Self { inner: harness::gaussian_psf(hsize, delta).map_err(err)? })
    }

    #[staticmethod]
    fn motion(length: usize, angle: f64) -> PyResult<Self> {
        Ok(Self { inner: harness::motion_psf(length, angle).map_err(err)? })
    }

    #[staticmethod]
    fn delta() -> Self {
        Self { inner: tvdeblur_core::Psf::delta() }
    }

    #[getter]
    fn weights<'py>(&self, py: Python<'py>) -> Bound<'py, PyArray2<f64>> {
        self.inner.weights().clone().into_pyarray(py)
    }

    #[getter]
    fn center(&self) -> (usize, usize) {
        self.inner.center()
    }

    #[getter]
    fn shape(&self) -> (usize, usize) {
        self.inner.dim()
    }

    fn mass(&self) -> f64 {
        self.inner.mass()
    }

    fn is_symmetric(&self) -> bool {
        self.inner.is_quadrantally_symmetric()
    }

    fn __repr__(&self) -> String {
        let (r, c) = self.inner.dim();
        format!("Psf({r}x{c}, center={:?})", self.inner.center())
    }
}

/// Factorized `H'H + ratio * D'D` for one grid, boundary model and ratio.
#[pyclass(name = "SystemPlan", module = "tvdeblur")]
struct PyPlan {
    inner: SpectralPlan,
}

#[pymethods]
impl PyPlan {
    #[new]
    fn new(psf: &PyPsf, shape: (usize, usize), bc_name: &str, ratio: f64) -> PyResult<Self> {
        let inner = transforms::plan_system(&psf.inner, shape, bc(bc_name)?, ratio).map_err(err)?;
        Ok(Self { inner })
    }

    fn solve<'py>(&self, py: Python<'py>, rhs: PyReadonlyArray2<'_, f64>) -> PyResult<Bound<'py, PyArray2<f64>>> {
        let b = image(rhs)?;
        let u = py.detach(|| transforms::solve_system(&self.inner, &b)).map_err(err)?;
        Ok(out(py, u))
    }

    fn apply<'py>(&self, py: Python<'py>, u: PyReadonlyArray2<'_, f64>) -> PyResult<Bound<'py, PyArray2<f64>>> {
        Ok(out(py, self.inner.apply(&image(u)?).map_err(err)?))
    }

    /// Transform-domain eigenvalues, or None for the Krylov (zero) plan.
    fn eigenvalues<'py>(&self, py: Python<'py>) -> Option<Bound<'py, PyArray2<f64>>> {
        self.inner.eigenvalues().map(|e| e.to_owned().into_pyarray(py))
    }

    #[getter]
    fn min_modulus(&self) -> f64 {
        self.inner.min_modulus()
    }

    #[getter]
    fn clamped(&self) -> usize {
        self.inner.clamped()
    }
}

/// Restore `f` under a boundary model; returns `(u, trace)`.
#[pyfunction]
#[pyo3(signature = (f, psf, bc_name, alpha, betas=None, inner_tol=1e-3, inner_max=10))]
#[allow(clippy::too_many_arguments)]
fn solve<'py>(
    py: Python<'py>,
    f: PyReadonlyArray2<'_, f64>,
    psf: &PyPsf,
    bc_name: &str,
    alpha: f64,
    betas: Option<Vec<f64>>,
    inner_tol: f64,
    inner_max: usize,
) -> PyResult<(Bound<'py, PyArray2<f64>>, Bound<'py, PyAny>)> {
    let f = image(f)?;
    let bc = bc(bc_name)?;
    let p = params(alpha, betas, inner_tol, inner_max)?;
    let psf = psf.inner.clone();
    let (u, trace) = py.detach(|| tvdeblur_core::solver::solve(&f, &psf, bc, &p)).map_err(err)?;
    Ok((out(py, u), trace_dict(py, &trace)?))
}

/// Extend `f` by `pad`, solve periodically, crop back; returns `(u, trace)`.
#[pyfunction]
#[pyo3(signature = (f, psf, extension, pad, alpha, betas=None, inner_tol=1e-3, inner_max=10))]
#[allow(clippy::too_many_arguments)]
fn solve_enlarged<'py>(
    py: Python<'py>,
    f: PyReadonlyArray2<'_, f64>,
    psf: &PyPsf,
    extension: &str,
    pad: usize,
    alpha: f64,
    betas: Option<Vec<f64>>,
    inner_tol: f64,
    inner_max: usize,
) -> PyResult<(Bound<'py, PyArray2<f64>>, Bound<'py, PyAny>)> {
    let f = image(f)?;
    let mode = SolveMode::Enlarge { extension: bc(extension)?, pad: Some(pad) };
    let p = params(alpha, betas, inner_tol, inner_max)?;
    let psf = psf.inner.clone();
    let (u, trace) = py.detach(|| mode.run(&f, &psf, &p)).map_err(err)?;
    Ok((out(py, u), trace_dict(py, &trace)?))
}

/// Blur `truth`, crop the field of view and add noise; returns `(f, fov)`.
#[pyfunction]
#[pyo3(signature = (truth, psf, sigma2, seed=0))]
fn simulate<'py>(
    py: Python<'py>,
    truth: PyReadonlyArray2<'_, f64>,
    psf: &PyPsf,
    sigma2: f64,
    seed: u64,
) -> PyResult<(Bound<'py, PyArray2<f64>>, Bound<'py, PyDict>)> {
    let (f, fov) = harness::simulate(&image(truth)?, &psf.inner, sigma2, seed).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("top", fov.top)?;
    d.set_item("left", fov.left)?;
    d.set_item("rows", fov.rows)?;
    d.set_item("cols", fov.cols)?;
    Ok((out(py, f), d))
}

#[pyfunction]
fn snr(restored: PyReadonlyArray2<'_, f64>, truth: PyReadonlyArray2<'_, f64>) -> PyResult<f64> {
    harness::snr(&image(restored)?, &image(truth)?).map_err(err)
}

#[pyfunction]
fn builtin_image<'py>(py: Python<'py>, name: &str, rows: usize, cols: usize) -> PyResult<Bound<'py, PyArray2<f64>>> {
    Ok(out(py, harness::builtin_image(name, rows, cols).map_err(err)?))
}

#[pyfunction]
fn blur<'py>(py: Python<'py>, u: PyReadonlyArray2<'_, f64>, psf: &PyPsf, bc_name: &str) -> PyResult<Bound<'py, PyArray2<f64>>> {
    Ok(out(py, operators::apply_blur(&image(u)?, &psf.inner, bc(bc_name)?).map_err(err)?))
}

#[pyfunction]
fn correlate<'py>(py: Python<'py>, u: PyReadonlyArray2<'_, f64>, psf: &PyPsf, bc_name: &str) -> PyResult<Bound<'py, PyArray2<f64>>> {
    Ok(out(py, operators::apply_correlation(&image(u)?, &psf.inner, bc(bc_name)?).map_err(err)?))
}

/// Forward differences `(z1, z2)`: horizontal then vertical.
#[pyfunction]
fn gradient<'py>(
    py: Python<'py>,
    u: PyReadonlyArray2<'_, f64>,
    bc_name: &str,
) -> PyResult<Pair<'py>> {
    let g = operators::gradient(&image(u)?, bc(bc_name)?).map_err(err)?;
    Ok((g.z1.into_pyarray(py), g.z2.into_pyarray(py)))
}

#[pyfunction]
fn adjoint_gradient<'py>(
    py: Python<'py>,
    z1: PyReadonlyArray2<'_, f64>,
    z2: PyReadonlyArray2<'_, f64>,
    bc_name: &str,
) -> PyResult<Bound<'py, PyArray2<f64>>> {
    let z = GradientField::new(z1.as_array().to_owned(), z2.as_array().to_owned()).map_err(err)?;
    Ok(out(py, operators::adjoint_gradient(&z, bc(bc_name)?).map_err(err)?))
}

/// Isotropic shrinkage of `(g1, g2)` with threshold `1 / beta`.
#[pyfunction]
fn shrink<'py>(
    py: Python<'py>,
    g1: PyReadonlyArray2<'_, f64>,
    g2: PyReadonlyArray2<'_, f64>,
    beta: f64,
) -> PyResult<Pair<'py>> {
    let g = GradientField::new(g1.as_array().to_owned(), g2.as_array().to_owned()).map_err(err)?;
    let z = tvdeblur_core::solver::shrink(&g, beta).map_err(err)?;
    Ok((z.z1.into_pyarray(py), z.z2.into_pyarray(py)))
}

/// Dense `H'H + ratio * D'D` as an `(N, N)` matrix, row-major pixel order.
#[pyfunction]
fn dense_system<'py>(
    py: Python<'py>,
    psf: &PyPsf,
    shape: (usize, usize),
    bc_name: &str,
    ratio: f64,
) -> PyResult<Bound<'py, PyArray2<f64>>> {
    let m = dense::build_system(&psf.inner, shape, bc(bc_name)?, ratio).map_err(err)?;
    let n = m.matrix.nrows();
    let a = ndarray::Array2::from_shape_fn((n, n), |(i, j)| m.matrix[(i, j)]);
    Ok(a.into_pyarray(py))
}

/// `[fidelity, tv_z, coupling, total]` of the split functional.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
fn energy<'py>(
    py: Python<'py>,
    u: PyReadonlyArray2<'_, f64>,
    z1: PyReadonlyArray2<'_, f64>,
    z2: PyReadonlyArray2<'_, f64>,
    f: PyReadonlyArray2<'_, f64>,
    psf: &PyPsf,
    bc_name: &str,
    alpha: f64,
    beta: f64,
) -> PyResult<Bound<'py, PyArray1<f64>>> {
    let z = GradientField::new(z1.as_array().to_owned(), z2.as_array().to_owned()).map_err(err)?;
    let e = tvdeblur_core::energy(&image(u)?, &z, &image(f)?, &psf.inner, bc(bc_name)?, alpha, beta).map_err(err)?;
    Ok(ndarray::arr1(&[e.fidelity, e.tv_z, e.coupling, e.total]).into_pyarray(py))
}

#[pymodule]
fn tvdeblur(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPsf>()?;
    m.add_class::<PyPlan>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(solve_enlarged, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(snr, m)?)?;
    m.add_function(wrap_pyfunction!(builtin_image, m)?)?;
    m.add_function(wrap_pyfunction!(blur, m)?)?;
    m.add_function(wrap_pyfunction!(correlate, m)?)?;
    m.add_function(wrap_pyfunction!(gradient, m)?)?;
    m.add_function(wrap_pyfunction!(adjoint_gradient, m)?)?;
    m.add_function(wrap_pyfunction!(shrink, m)?)?;
    m.add_function(wrap_pyfunction!(dense_system, m)?)?;
    m.add_function(wrap_pyfunction!(energy, m)?)?;
    Ok(())
}
