//! Alternating minimization of the penalized TV functional with penalty
//! continuation.

use std::time::Instant;

use ndarray::Zip;
use serde::Serialize;

use crate::error::{DeblurError, Result};
use crate::grid::{energy, BoundaryModel, EnergyReport, GradientField, Image, Psf, SolveParams};
use crate::operators::{self, Pad, PaddedDomain};
use crate::transforms::{effective_psf, solve_system, SpectralFactors, SpectralPlan};

/// Magnitudes below this count as exactly zero in the shrink.
const SHRINK_ZERO: f64 = 1e-300;

/// Relative slack allowed before an energy increase is flagged.
pub const MONOTONICITY_SLACK: f64 = 1e-12;

/// Isotropic shrinkage `max(|g| - 1/beta, 0) * g / |g|`, with `0` where `g = 0`.
pub fn shrink(g: &GradientField, beta: f64) -> Result<GradientField> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(DeblurError::Params(format!("beta must be positive, got {beta}")));
    }
    let threshold = 1.0 / beta;
    let mut z1 = g.z1.clone();
    let mut z2 = g.z2.clone();
    Zip::from(&mut z1).and(&mut z2).for_each(|a, b| {
        let m = a.hypot(*b);
        if m < SHRINK_ZERO || m <= threshold {
            *a = 0.0;
            *b = 0.0;
        } else {
            let s = (m - threshold) / m;
            *a *= s;
            *b *= s;
        }
    });
    Ok(GradientField { z1, z2 })
}

/// Solves `(H'H + (beta/alpha) D'D) u = H'f + (beta/alpha) D'z` with a prepared plan.
pub fn u_step(
    z: &GradientField,
    f: &Image,
    psf: &Psf,
    bc: BoundaryModel,
    alpha: f64,
    beta: f64,
    plan: &SpectralPlan,
) -> Result<Image> {
    if !(alpha > 0.0) || !(beta > 0.0) {
        return Err(DeblurError::Params("alpha and beta must be positive".into()));
    }
    if plan.bc() != bc {
        return Err(DeblurError::Precondition(format!(
            "plan was built for {} boundaries, not {bc}",
            plan.bc()
        )));
    }
    if (plan.n_rows(), plan.n_cols()) != f.dim() || z.dim() != f.dim() {
        return Err(DeblurError::Shape(format!(
            "plan is {}x{}, f is {:?}, z is {:?}",
            plan.n_rows(),
            plan.n_cols(),
            f.dim(),
            z.dim()
        )));
    }
    let ratio = beta / alpha;
    if (plan.ratio() - ratio).abs() > 1e-12 * ratio {
        return Err(DeblurError::Precondition(format!(
            "plan ratio {} does not match beta/alpha = {ratio}",
            plan.ratio()
        )));
    }
    if effective_psf(psf, bc)? != *plan.psf() {
        return Err(DeblurError::Precondition("plan was built for a different PSF".into()));
    }
    let mut rhs = operators::apply_correlation(f, plan.psf(), bc)?.into_array();
    rhs.scaled_add(ratio, operators::adjoint_gradient(z, bc)?.as_array());
    solve_system(plan, &Image::from_array_unchecked(rhs))
}

/// One inner iteration: `z^{k+1} = shrink(grad u^k)`, then `u^{k+1}`.
#[derive(Debug, Clone, Serialize)]
pub struct IterationRecord {
    pub beta: f64,
    /// One-based index within the current beta block.
    pub iteration: usize,
    /// `g(u^k, z^{k+1})`, after the z-step.
    pub energy_after_z: f64,
    /// `g(u^{k+1}, z^{k+1})`, after the u-step.
    pub energy: f64,
    /// `||u^{k+1} - u^k|| / ||u^k||`
    pub rel_change: f64,
    pub seconds: f64,
}

/// Summary of one rung of the beta ladder.
#[derive(Debug, Clone, Serialize)]
pub struct BlockSummary {
    pub beta: f64,
    pub iterations: usize,
    /// True if the relative-change test stopped the block.
    pub converged: bool,
    pub final_energy: EnergyReport,
    pub clamped_eigenvalues: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    /// Every beta block met the relative-change tolerance.
    Converged,
    /// At least one block stopped at the iteration cap.
    IterationCap,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveTrace {
    pub records: Vec<IterationRecord>,
    pub blocks: Vec<BlockSummary>,
    pub status: SolveStatus,
    /// Half-steps whose energy rose by more than [`MONOTONICITY_SLACK`] (relative).
    pub monotonicity_violations: usize,
    pub seconds: f64,
}

impl SolveTrace {
    pub fn total_iterations(&self) -> usize {
        self.records.len()
    }

    pub fn final_energy(&self) -> Option<f64> {
        self.records.last().map(|r| r.energy)
    }
}

fn increased(before: f64, after: f64) -> bool {
    after - before > MONOTONICITY_SLACK * before.abs().max(f64::MIN_POSITIVE)
}

fn relative_change(new: &Image, old: &Image) -> f64 {
    let diff = Zip::from(new.as_array())
        .and(old.as_array())
        .fold(0.0, |acc, a, b| acc + (a - b) * (a - b))
        .sqrt();
    let base = old.norm();
    if base > 0.0 {
        diff / base
    } else if diff == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Runs the penalty ladder starting from `f`.
pub fn solve(
    f: &Image,
    psf: &Psf,
    bc: BoundaryModel,
    params: &SolveParams,
) -> Result<(Image, SolveTrace)> {
    params.validate()?;
    let factors = SpectralFactors::new(psf, f.dim(), bc)?;
    let psf = factors.psf().clone();
    let alpha = params.alpha;
    let start = Instant::now();

    let mut u = f.clone();
    let mut records = Vec::new();
    let mut blocks = Vec::new();
    let mut violations = 0;
    for &beta in &params.beta_ladder {
        let plan = factors.plan(beta / alpha)?;
        let mut previous: Option<f64> = None;
        let mut converged = false;
        let mut iterations = 0;
        let mut last_report = None;
        for k in 1..=params.inner_max {
            let t0 = Instant::now();
            let z = shrink(&operators::gradient(&u, bc)?, beta)?;
            let after_z = energy(&u, &z, f, &psf, bc, alpha, beta)?.total;
            let next = u_step(&z, f, &psf, bc, alpha, beta, &plan)?;
            let report = energy(&next, &z, f, &psf, bc, alpha, beta)?;
            if previous.is_some_and(|e| increased(e, after_z)) {
                violations += 1;
            }
            if increased(after_z, report.total) {
                violations += 1;
            }
            previous = Some(report.total);
            let rel = relative_change(&next, &u);
            u = next;
            iterations = k;
            last_report = Some(report);
            records.push(IterationRecord {
                beta,
                iteration: k,
                energy_after_z: after_z,
                energy: report.total,
                rel_change: rel,
                seconds: t0.elapsed().as_secs_f64(),
            });
            if rel < params.inner_tol {
                converged = true;
                break;
            }
        }
        blocks.push(BlockSummary {
            beta,
            iterations,
            converged,
            final_energy: last_report.expect("inner_max >= 1"),
            clamped_eigenvalues: plan.clamped(),
        });
    }
    let status = if blocks.iter().all(|b| b.converged) {
        SolveStatus::Converged
    } else {
        SolveStatus::IterationCap
    };
    Ok((
        u,
        SolveTrace {
            records,
            blocks,
            status,
            monotonicity_violations: violations,
            seconds: start.elapsed().as_secs_f64(),
        },
    ))
}

/// Extends `f` by `pad`, solves with periodic boundaries on the larger
/// domain and crops the result back.
///
/// Non-periodic extensions need a margin of at least half the PSF support.
pub fn solve_enlarged(
    f: &Image,
    psf: &Psf,
    extension: BoundaryModel,
    pad: impl Into<Pad>,
    params: &SolveParams,
) -> Result<(Image, SolveTrace)> {
    let dom = PaddedDomain::new(f.rows(), f.cols(), pad, extension);
    let min = PaddedDomain::min_pad_for(psf);
    if extension != BoundaryModel::Periodic && dom.pad.min_side() < min {
        return Err(DeblurError::Precondition(format!(
            "pad {:?} is below the minimum {min} for a {}x{} PSF",
            dom.pad,
            psf.dim().0,
            psf.dim().1
        )));
    }
    let big = operators::extend(f, &dom)?;
    let (u, trace) = solve(&big, psf, BoundaryModel::Periodic, params)?;
    Ok((operators::crop(&u, &dom)?, trace))
}
