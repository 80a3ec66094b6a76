//! Simulation, scoring and alpha sweeps.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use ndarray::{s, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{DeblurError, Result};
use crate::grid::{BoundaryModel, Image, Psf, SolveParams};
use crate::operators::{self, Pad};
use crate::solver::{solve, solve_enlarged, SolveTrace};

/// Normalized `hsize x hsize` Gaussian with spread `delta`, centered at index
/// `(hsize - 1) / 2`.
pub fn gaussian_psf(hsize: usize, delta: f64) -> Result<Psf> {
    if hsize == 0 {
        return Err(DeblurError::Params("hsize must be at least 1".into()));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(DeblurError::Params(format!("delta must be positive, got {delta}")));
    }
    let h = (hsize as f64 - 1.0) / 2.0;
    let w = Array2::from_shape_fn((hsize, hsize), |(i, j)| {
        let (x, y) = (j as f64 - h, i as f64 - h);
        (-(x * x + y * y) / (2.0 * delta * delta)).exp()
    });
    let sum = w.sum();
    Psf::with_default_center(w / sum)
}

/// One-sided linear motion blur of `length` pixels at `angle` degrees
/// (counter-clockwise from the +column axis), anchored at the kernel origin.
pub fn motion_psf(length: usize, angle_deg: f64) -> Result<Psf> {
    if length < 2 {
        return Err(DeblurError::Params("motion length must be at least 2".into()));
    }
    if !angle_deg.is_finite() {
        return Err(DeblurError::Params("motion angle must be finite".into()));
    }
    let (sin, cos) = angle_deg.to_radians().sin_cos();
    let steps = 4 * (length - 1);
    let points: Vec<(f64, f64)> = (0..=steps)
        .map(|k| {
            let t = (length - 1) as f64 * k as f64 / steps as f64;
            (-t * sin, t * cos)
        })
        .collect();
    let min_r = points.iter().map(|p| p.0.floor()).fold(0.0, f64::min) as isize;
    let max_r = points.iter().map(|p| p.0.ceil()).fold(0.0, f64::max) as isize;
    let min_c = points.iter().map(|p| p.1.floor()).fold(0.0, f64::min) as isize;
    let max_c = points.iter().map(|p| p.1.ceil()).fold(0.0, f64::max) as isize;
    let shape = ((max_r - min_r + 1) as usize, (max_c - min_c + 1) as usize);
    let mut w = Array2::<f64>::zeros(shape);
    for (r, c) in points {
        let (r0, c0) = (r.floor(), c.floor());
        let (fr, fc) = (r - r0, c - c0);
        let (i, j) = ((r0 as isize - min_r) as usize, (c0 as isize - min_c) as usize);
        for (di, wr) in [(0, 1.0 - fr), (1, fr)] {
            for (dj, wc) in [(0, 1.0 - fc), (1, fc)] {
                if wr * wc > 0.0 {
                    w[[i + di, j + dj]] += wr * wc;
                }
            }
        }
    }
    let sum = w.sum();
    Psf::new(w / sum, ((-min_r) as usize, (-min_c) as usize))
}

/// Where the observed image sits inside the true image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct FieldOfView {
    pub top: usize,
    pub left: usize,
    pub rows: usize,
    pub cols: usize,
    pub full_rows: usize,
    pub full_cols: usize,
}

impl FieldOfView {
    /// The part of a full-frame image covered by the field of view.
    pub fn crop(&self, full: &Image) -> Result<Image> {
        if full.dim() != (self.full_rows, self.full_cols) {
            return Err(DeblurError::Shape(format!(
                "field of view belongs to a {}x{} frame, got {:?}",
                self.full_rows,
                self.full_cols,
                full.dim()
            )));
        }
        let a = full
            .view()
            .slice(s![self.top..self.top + self.rows, self.left..self.left + self.cols])
            .to_owned();
        Image::new(a)
    }
}

/// Blurs the whole truth with zero boundaries, keeps the pixels that do not
/// depend on the boundary rule and adds seeded Gaussian noise.
pub fn simulate(truth: &Image, psf: &Psf, sigma2: f64, seed: u64) -> Result<(Image, FieldOfView)> {
    simulate_with_extension(truth, psf, sigma2, seed, BoundaryModel::Zero)
}

/// As [`simulate`], blurring under the given boundary model instead. The
/// cropped output is the same for every model.
pub fn simulate_with_extension(
    truth: &Image,
    psf: &Psf,
    sigma2: f64,
    seed: u64,
    bc: BoundaryModel,
) -> Result<(Image, FieldOfView)> {
    if !(sigma2 >= 0.0 && sigma2.is_finite()) {
        return Err(DeblurError::Params(format!("noise variance must be >= 0, got {sigma2}")));
    }
    let (pr, pc) = psf.dim();
    let (mr, mc) = (pr - 1, pc - 1);
    let (rows, cols) = truth.dim();
    if rows < 2 * mr + 2 || cols < 2 * mc + 2 {
        return Err(DeblurError::Shape(format!(
            "a {rows}x{cols} truth is too small for a {pr}x{pc} PSF"
        )));
    }
    let blurred = operators::apply_blur(truth, psf, bc)?;
    let fov = FieldOfView {
        top: mr,
        left: mc,
        rows: rows - 2 * mr,
        cols: cols - 2 * mc,
        full_rows: rows,
        full_cols: cols,
    };
    let mut observed = fov.crop(&blurred)?.into_array();
    if sigma2 > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, sigma2.sqrt())
            .map_err(|e| DeblurError::Params(format!("noise distribution: {e}")))?;
        observed.iter_mut().for_each(|v| *v += normal.sample(&mut rng));
    }
    Ok((Image::new(observed)?, fov))
}

/// `10 log10(||u - mean(u)||^2 / ||u - restored||^2)`; `+inf` for an exact match.
pub fn snr(restored: &Image, truth: &Image) -> Result<f64> {
    restored.ensure_same_dim(truth, "snr")?;
    let mean = truth.mean();
    let signal: f64 = truth.view().iter().map(|v| (v - mean) * (v - mean)).sum();
    let err: f64 = truth
        .view()
        .iter()
        .zip(restored.view().iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    if err == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (signal / err).log10())
}

/// `n` logarithmically spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi >= lo && hi.is_finite()) || n == 0 {
        return Err(DeblurError::Params(format!("bad log grid [{lo}, {hi}] x {n}")));
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    let (a, b) = (lo.log10(), hi.log10());
    Ok((0..n)
        .map(|k| 10f64.powf(a + (b - a) * k as f64 / (n - 1) as f64))
        .collect())
}

/// Twelve log-spaced values over `[1e1, 1e7]`.
pub fn default_alpha_grid() -> Vec<f64> {
    log_grid(1e1, 1e7, 12).expect("static grid")
}

/// Piecewise-constant scene: a shaded backdrop with a rectangle, a disk and a
/// triangle, several of which run off the frame.
pub fn cartoon(rows: usize, cols: usize) -> Result<Image> {
    let (h, w) = (rows as f64, cols as f64);
    Image::new(Array2::from_shape_fn((rows, cols), |(i, j)| {
        let (y, x) = (i as f64 / h, j as f64 / w);
        let mut v = if y < 0.55 { 0.25 } else { 0.45 };
        if x < 0.22 {
            v = 0.1;
        }
        if (0.15..0.45).contains(&y) && (0.35..1.0).contains(&x) {
            v = 0.85;
        }
        if (x - 0.3).powi(2) + (y - 0.75).powi(2) < 0.2f64.powi(2) {
            v = 0.65;
        }
        if y > 0.6 && x > 0.6 && (x - 0.6) > 1.3 * (1.0 - y) {
            v = 1.0;
        }
        if y < 0.08 && x > 0.5 {
            v = 0.55;
        }
        v
    }))
}

/// Smooth scene: a diagonal intensity ramp with a bright disk.
pub fn ramp_disk(rows: usize, cols: usize) -> Result<Image> {
    let (h, w) = (rows as f64, cols as f64);
    Image::new(Array2::from_shape_fn((rows, cols), |(i, j)| {
        let (y, x) = (i as f64 / h, j as f64 / w);
        let mut v = 0.1 + 0.5 * x + 0.25 * y;
        if (x - 0.55).powi(2) + (y - 0.45).powi(2) < 0.22f64.powi(2) {
            v = 0.95;
        }
        v
    }))
}

/// Built-in truth images by name: `cartoon` or `ramp-disk`.
pub fn builtin_image(name: &str, rows: usize, cols: usize) -> Result<Image> {
    match name {
        "cartoon" => cartoon(rows, cols),
        "ramp-disk" | "ramp_disk" | "rampdisk" => ramp_disk(rows, cols),
        other => Err(DeblurError::Params(format!(
            "unknown built-in image '{other}' (expected cartoon or ramp-disk)"
        ))),
    }
}

/// How the deblurring problem is closed at the image border.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMode {
    /// Impose a boundary model and use its fast solver.
    Boundary(BoundaryModel),
    /// Extend by `pad` (default: PSF size) and solve periodically on the larger domain.
    Enlarge {
        extension: BoundaryModel,
        pad: Option<usize>,
    },
}

impl SolveMode {
    pub fn run(&self, f: &Image, psf: &Psf, params: &SolveParams) -> Result<(Image, SolveTrace)> {
        match *self {
            SolveMode::Boundary(bc) => solve(f, psf, bc, params),
            SolveMode::Enlarge { extension, pad } => {
                let (pr, pc) = psf.dim();
                let pad = pad.unwrap_or(pr.max(pc));
                solve_enlarged(f, psf, extension, Pad::uniform(pad), params)
            }
        }
    }
}

impl fmt::Display for SolveMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolveMode::Boundary(bc) => write!(f, "{bc}"),
            SolveMode::Enlarge { extension, pad: Some(p) } => write!(f, "enlarge:{extension}:{p}"),
            SolveMode::Enlarge { extension, pad: None } => write!(f, "enlarge:{extension}"),
        }
    }
}

impl FromStr for SolveMode {
    type Err = DeblurError;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        match parts.as_slice() {
            [bc] => Ok(SolveMode::Boundary(bc.parse()?)),
            ["enlarge", ext] => Ok(SolveMode::Enlarge {
                extension: ext.parse()?,
                pad: None,
            }),
            ["enlarge", ext, pad] => {
                let pad = pad
                    .parse()
                    .map_err(|_| DeblurError::Params(format!("bad pad '{pad}' in mode '{s}'")))?;
                Ok(SolveMode::Enlarge {
                    extension: ext.parse()?,
                    pad: Some(pad),
                })
            }
            _ => Err(DeblurError::Params(format!(
                "bad mode '{s}' (expected periodic, reflective, antireflective or enlarge:<ext>:<pad>)"
            ))),
        }
    }
}

/// One alpha sweep over several modes on a single simulated observation.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub truth: Image,
    pub psf: Psf,
    pub sigma2: f64,
    pub seed: u64,
    pub modes: Vec<SolveMode>,
    pub alphas: Vec<f64>,
    /// Ladder and inner-loop settings; `alpha` is overridden per cell.
    pub params: SolveParams,
    /// Also run `alpha = 0.05 / sigma2`.
    pub include_reference: bool,
    /// Worker threads; 0 lets the pool decide.
    pub jobs: usize,
}

impl Experiment {
    pub fn new(truth: Image, psf: Psf, sigma2: f64, modes: Vec<SolveMode>) -> Self {
        Self {
            truth,
            psf,
            sigma2,
            seed: 0,
            modes,
            alphas: default_alpha_grid(),
            params: SolveParams::new(1.0),
            include_reference: true,
            jobs: 0,
        }
    }

    /// `0.05 / sigma2`, if the noise is nonzero.
    pub fn reference_alpha(&self) -> Option<f64> {
        (self.sigma2 > 0.0).then(|| 0.05 / self.sigma2)
    }

    /// The alpha values actually run: deduplicated, sorted, with the reference.
    pub fn alpha_grid(&self) -> Result<Vec<f64>> {
        let mut out: Vec<f64> = Vec::new();
        let reference = if self.include_reference { self.reference_alpha() } else { None };
        for &a in self.alphas.iter().chain(reference.iter()) {
            if !(a > 0.0 && a.is_finite()) {
                return Err(DeblurError::Params(format!("alpha values must be positive, got {a}")));
            }
            if !out.contains(&a) {
                out.push(a);
            }
        }
        if out.is_empty() {
            return Err(DeblurError::Params("empty alpha grid".into()));
        }
        out.sort_by(f64::total_cmp);
        Ok(out)
    }
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub mode: String,
    pub alpha: f64,
    /// `None` when the cell failed.
    pub snr_db: Option<f64>,
    pub seconds: f64,
    pub iterations: usize,
    pub is_best: bool,
    pub is_reference: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    /// Sorted by `(mode order, alpha)`.
    pub rows: Vec<SweepRow>,
    pub observed: Image,
    pub fov: FieldOfView,
    /// Restoration at the best alpha for each mode that produced one.
    pub best: Vec<(String, Image)>,
}

impl SweepResult {
    pub fn best_row(&self, mode: &str) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.mode == mode && r.is_best)
    }

    /// Writes the CSV table. With `timing` off the seconds column is `0`.
    pub fn write_csv<W: Write>(&self, out: W, timing: bool) -> Result<()> {
        let io = |e: csv::Error| DeblurError::Data(format!("writing CSV: {e}"));
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["mode", "alpha", "snr_db", "seconds", "iterations", "is_best", "is_reference"])
            .map_err(io)?;
        for r in &self.rows {
            let snr = match r.snr_db {
                Some(v) => format!("{v}"),
                None => "failed".to_string(),
            };
            let seconds = if timing { format!("{:.6}", r.seconds) } else { "0".to_string() };
            w.write_record([
                r.mode.clone(),
                format!("{}", r.alpha),
                snr,
                seconds,
                r.iterations.to_string(),
                r.is_best.to_string(),
                r.is_reference.to_string(),
            ])
            .map_err(io)?;
        }
        w.flush().map_err(|e| DeblurError::Data(format!("writing CSV: {e}")))?;
        Ok(())
    }
}

struct Cell {
    row: SweepRow,
    image: Option<Image>,
}

/// Simulates once, then restores for every `(mode, alpha)` pair.
pub fn sweep(exp: &Experiment) -> Result<SweepResult> {
    exp.params.validate()?;
    let alphas = exp.alpha_grid()?;
    if exp.modes.is_empty() {
        return Err(DeblurError::Params("no modes to sweep".into()));
    }
    let (observed, fov) = simulate(&exp.truth, &exp.psf, exp.sigma2, exp.seed)?;
    let truth = fov.crop(&exp.truth)?;
    let reference = if exp.include_reference { exp.reference_alpha() } else { None };

    let jobs: Vec<(usize, SolveMode, f64)> = exp
        .modes
        .iter()
        .enumerate()
        .flat_map(|(m, mode)| alphas.iter().map(move |&a| (m, *mode, a)))
        .collect();
    let run_cell = |&(_, mode, alpha): &(usize, SolveMode, f64)| -> Cell {
        let params = SolveParams {
            alpha,
            ..exp.params.clone()
        };
        let t0 = Instant::now();
        let outcome = mode.run(&observed, &exp.psf, &params).and_then(|(u, trace)| {
            let s = snr(&u, &truth)?;
            Ok((u, trace.total_iterations(), s))
        });
        let seconds = t0.elapsed().as_secs_f64();
        let mut row = SweepRow {
            mode: mode.to_string(),
            alpha,
            snr_db: None,
            seconds,
            iterations: 0,
            is_best: false,
            is_reference: reference == Some(alpha),
            error: None,
        };
        match outcome {
            Ok((u, iterations, s)) => {
                row.snr_db = Some(s);
                row.iterations = iterations;
                Cell { row, image: Some(u) }
            }
            Err(e) => {
                row.error = Some(e.to_string());
                Cell { row, image: None }
            }
        }
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(exp.jobs)
        .build()
        .map_err(|e| DeblurError::Params(format!("thread pool: {e}")))?;
    let mut cells: Vec<Cell> = pool.install(|| jobs.par_iter().map(run_cell).collect());

    let mut best = Vec::new();
    for m in 0..exp.modes.len() {
        let range = m * alphas.len()..(m + 1) * alphas.len();
        let mut pick: Option<usize> = None;
        for k in range {
            if let Some(s) = cells[k].row.snr_db {
                if pick.is_none_or(|p| s > cells[p].row.snr_db.unwrap_or(f64::NEG_INFINITY)) {
                    pick = Some(k);
                }
            }
        }
        if let Some(k) = pick {
            cells[k].row.is_best = true;
            if let Some(img) = cells[k].image.take() {
                best.push((cells[k].row.mode.clone(), img));
            }
        }
    }
    Ok(SweepResult {
        rows: cells.into_iter().map(|c| c.row).collect(),
        observed,
        fov,
        best,
    })
}
