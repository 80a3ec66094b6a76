use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use tvdeblur_core::dense::{self, Direction, ORACLE_CAP};
use tvdeblur_core::harness::{
    self, builtin_image, log_grid, Experiment, FieldOfView, SolveMode,
};
use tvdeblur_core::operators;
use tvdeblur_core::solver::SolveTrace;
use tvdeblur_core::transforms::{plan_system, solve_system};
use tvdeblur_core::{BoundaryModel, DeblurError, GradientField, Image, Psf, SolveParams};

use crate::imageio::{read_image, write_atomic, write_image, write_json};
use crate::{psfspec, CliError, DeblurArgs, OracleArgs, PsfSource, SimulateArgs, SolverArgs, SweepArgs, TruthSource};

const ORACLE_TOL: f64 = 1e-8;

fn load_psf(src: &PsfSource) -> Result<(Psf, String), CliError> {
    match (&src.psf, &src.psf_file) {
        (Some(spec), None) => Ok((psfspec::parse_spec(spec)?, spec.clone())),
        (None, Some(path)) => Ok((psfspec::read_file(path)?, format!("file:{}", path.display()))),
        _ => Err(CliError::Usage("give exactly one of --psf and --psf-file".into())),
    }
}

fn load_truth(src: &TruthSource) -> Result<(Image, String), CliError> {
    match (&src.truth, &src.builtin) {
        (Some(path), None) => Ok((read_image(path)?, path.display().to_string())),
        (None, Some(spec)) => {
            let bad = || CliError::Usage(format!("bad --builtin '{spec}' (expected name:ROWSxCOLS)"));
            let (name, size) = spec.split_once(':').ok_or_else(bad)?;
            let (r, c) = size.split_once('x').ok_or_else(bad)?;
            let rows = r.parse().map_err(|_| bad())?;
            let cols = c.parse().map_err(|_| bad())?;
            Ok((builtin_image(name, rows, cols)?, format!("builtin:{spec}")))
        }
        _ => Err(CliError::Usage("give exactly one of --truth and --builtin".into())),
    }
}

fn solve_params(alpha: f64, s: &SolverArgs) -> Result<SolveParams, CliError> {
    let mut p = SolveParams::new(alpha);
    if let Some(b) = &s.betas {
        p = p.with_ladder(b.clone());
    }
    p.inner_tol = s.inner_tol;
    p.inner_max = s.inner_max;
    p.validate()?;
    Ok(p)
}

/// `obs.pgm` -> `obs.meta.json`.
fn meta_path(out: &Path) -> PathBuf {
    out.with_extension("meta.json")
}

fn trace_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".trace.json");
    PathBuf::from(s)
}

#[derive(Serialize)]
struct SimulationMeta<'a> {
    truth: &'a str,
    psf: &'a str,
    sigma2: f64,
    noiseless: bool,
    seed: u64,
    field_of_view: FieldOfView,
}

pub fn simulate(a: &SimulateArgs) -> Result<(), CliError> {
    let (psf, psf_name) = load_psf(&a.psf)?;
    let (truth, truth_name) = load_truth(&a.truth)?;
    let (observed, fov) = harness::simulate(&truth, &psf, a.sigma2, a.seed)?;
    write_image(&a.out, &observed)?;
    let meta = SimulationMeta {
        truth: &truth_name,
        psf: &psf_name,
        sigma2: a.sigma2,
        noiseless: a.sigma2 == 0.0,
        seed: a.seed,
        field_of_view: fov,
    };
    write_json(&meta_path(&a.out), &meta)?;
    println!(
        "observed {}x{} at offset ({}, {}) -> {}",
        fov.rows,
        fov.cols,
        fov.top,
        fov.left,
        a.out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct TraceFile<'a> {
    mode: String,
    psf: &'a str,
    params: &'a SolveParams,
    trace: &'a SolveTrace,
}

pub fn deblur(a: &DeblurArgs) -> Result<(), CliError> {
    let (psf, psf_name) = load_psf(&a.psf)?;
    let mut mode: SolveMode = a.mode.parse()?;
    if let SolveMode::Enlarge { pad: pad @ None, .. } = &mut mode {
        *pad = a.pad;
    }
    let params = solve_params(a.alpha, &a.solver)?;
    let f = read_image(&a.input)?;
    let (u, trace) = mode.run(&f, &psf, &params)?;
    write_image(&a.out, &u)?;
    let file = TraceFile {
        mode: mode.to_string(),
        psf: &psf_name,
        params: &params,
        trace: &trace,
    };
    write_json(&trace_path(&a.out), &file)?;
    if trace.monotonicity_violations > 0 {
        eprintln!(
            "warning: {} energy rises within a beta block",
            trace.monotonicity_violations
        );
    }
    println!(
        "{mode}: {} iterations, final energy {:.6e}, {:.2} s -> {}",
        trace.total_iterations(),
        trace.final_energy().unwrap_or(f64::NAN),
        trace.seconds,
        a.out.display()
    );
    Ok(())
}

fn parse_grid(spec: &str) -> Result<Vec<f64>, CliError> {
    let bad = |m: String| CliError::Usage(format!("bad --alpha-grid '{spec}': {m}"));
    let parts: Vec<&str> = spec.split(':').collect();
    let [lo, hi, n] = parts.as_slice() else {
        return Err(bad("expected LO:HI:N".into()));
    };
    let lo: f64 = lo.parse().map_err(|_| bad(format!("'{lo}' is not a number")))?;
    let hi: f64 = hi.parse().map_err(|_| bad(format!("'{hi}' is not a number")))?;
    let n: usize = n.parse().map_err(|_| bad(format!("'{n}' is not a count")))?;
    log_grid(lo, hi, n).map_err(|e| bad(e.to_string()))
}

fn file_safe(mode: &str) -> String {
    mode.replace(':', "_")
}

pub fn sweep(a: &SweepArgs) -> Result<(), CliError> {
    let (psf, _) = load_psf(&a.psf)?;
    let (truth, _) = load_truth(&a.truth)?;
    let modes = a
        .modes
        .iter()
        .map(|m| m.parse::<SolveMode>())
        .collect::<Result<Vec<_>, _>>()?;
    let mut exp = Experiment::new(truth, psf, a.sigma2, modes);
    exp.seed = a.seed;
    exp.jobs = a.jobs;
    exp.include_reference = a.reference_alpha;
    exp.params = solve_params(1.0, &a.solver)?;
    if let Some(alphas) = &a.alphas {
        exp.alphas = alphas.clone();
    } else if let Some(g) = &a.alpha_grid {
        exp.alphas = parse_grid(g)?;
    }
    if a.reference_alpha && exp.reference_alpha().is_none() {
        return Err(CliError::Usage("--reference-alpha needs a positive --sigma2".into()));
    }
    let result = harness::sweep(&exp)?;

    fs::create_dir_all(&a.out_dir)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", a.out_dir.display())))?;
    let mut csv = Vec::new();
    result.write_csv(&mut csv, !a.no_timing)?;
    write_atomic(&a.out_dir.join("sweep.csv"), &csv)?;
    write_image(&a.out_dir.join("observed.pgm"), &result.observed)?;
    for (mode, image) in &result.best {
        write_image(&a.out_dir.join(format!("best_{}.pgm", file_safe(mode))), image)?;
    }
    let mut failed = 0;
    for row in &result.rows {
        if let Some(err) = &row.error {
            failed += 1;
            eprintln!("{} alpha={:e}: {err}", row.mode, row.alpha);
        }
    }
    for mode in &a.modes {
        let name = mode.parse::<SolveMode>()?.to_string();
        match result.best_row(&name) {
            Some(r) => println!("{name}: best alpha {:e}, SNR {:.2} dB", r.alpha, r.snr_db.unwrap_or(f64::NAN)),
            None => println!("{name}: every cell failed"),
        }
    }
    if failed == result.rows.len() {
        return Err(CliError::Numerical("every sweep cell failed".into()));
    }
    Ok(())
}

fn noise_image(n: usize, seed: u64) -> Result<Image, DeblurError> {
    harness::simulate(&Image::zeros(n, n)?, &Psf::delta(), 1.0, seed).map(|(f, _)| f)
}

pub fn oracle_check(a: &OracleArgs) -> Result<(), CliError> {
    if a.n > ORACLE_CAP {
        return Err(CliError::Usage(format!("n = {} exceeds the oracle cap of {ORACLE_CAP}", a.n)));
    }
    let psf = psfspec::parse_spec(&a.psf)?;
    let n = a.n;
    let u = noise_image(n, a.seed)?;
    let z = GradientField::new(
        noise_image(n, a.seed + 1)?.into_array(),
        noise_image(n, a.seed + 2)?.into_array(),
    )?;
    let mut worst: f64 = 0.0;
    println!("{:<12} {:<15} {:>12}", "operator", "boundary", "max |diff|");
    for bc in BoundaryModel::ALL {
        let mut report = |name: &str, dev: Option<f64>| {
            match dev {
                Some(d) => {
                    worst = worst.max(d);
                    let flag = if d > ORACLE_TOL { "  FAIL" } else { "" };
                    println!("{name:<12} {:<15} {d:>12.3e}{flag}", bc.name());
                }
                None => println!("{name:<12} {:<15} {:>12}", bc.name(), "skipped"),
            }
        };
        let blur = dense::build_blur(&psf, (n, n), bc)?;
        report("blur", Some(operators::apply_blur(&u, &psf, bc)?.max_abs_diff(&blur.apply(&u)?)));
        let corr = dense::build_correlation(&psf, (n, n), bc)?;
        report(
            "correlation",
            Some(operators::apply_correlation(&u, &psf, bc)?.max_abs_diff(&corr.apply(&u)?)),
        );
        let g = operators::gradient(&u, bc)?;
        for (name, dir, field) in [("grad-h", Direction::Horizontal, &g.z1), ("grad-v", Direction::Vertical, &g.z2)] {
            let d = dense::build_grad((n, n), dir, bc)?.apply(&u)?;
            report(name, Some(Image::new(field.clone())?.max_abs_diff(&d)));
        }
        let a1 = dense::build_adjgrad((n, n), Direction::Horizontal, bc)?.apply(&Image::new(z.z1.clone())?)?;
        let a2 = dense::build_adjgrad((n, n), Direction::Vertical, bc)?.apply(&Image::new(z.z2.clone())?)?;
        let dense_adj = Image::new(a1.into_array() + a2.as_array())?;
        report("adjgrad", Some(operators::adjoint_gradient(&z, bc)?.max_abs_diff(&dense_adj)));
        let sys = dense::build_system(&psf, (n, n), bc, a.ratio)?;
        report("system", Some(operators::apply_system(&u, &psf, bc, a.ratio)?.max_abs_diff(&sys.apply(&u)?)));
        let solve = match plan_system(&psf, (n, n), bc, a.ratio) {
            Ok(plan) => Some(solve_system(&plan, &u)?.max_abs_diff(&sys.solve(&u)?)),
            Err(DeblurError::Symmetry(_)) => None,
            Err(e) => return Err(e.into()),
        };
        report("solve", solve);
    }
    println!("worst deviation {worst:.3e} (tolerance {ORACLE_TOL:e})");
    if worst > ORACLE_TOL {
        return Err(CliError::Numerical(format!("oracle deviation {worst:.3e} exceeds {ORACLE_TOL:e}")));
    }
    Ok(())
}
