mod common;

use tvdeblur_core::dense;
use tvdeblur_core::harness::{cartoon, gaussian_psf, motion_psf, simulate, snr};
use tvdeblur_core::operators::{self, Pad, PaddedDomain};
use tvdeblur_core::solver::{shrink, solve, solve_enlarged, u_step};
use tvdeblur_core::transforms::{plan_system, solve_system, SpectralFactors};
use tvdeblur_core::{BoundaryModel, DeblurError, GradientField, Image, Psf, SolveParams};

#[test]
fn u_step_matches_dense_solve() {
    let psf = gaussian_psf(3, 1.0).unwrap();
    let f = common::random_image(12, 12, 1);
    let z = common::random_field(12, 12, 2);
    let (alpha, beta) = (40.0, 8.0);
    for bc in BoundaryModel::ALL {
        let plan = SpectralFactors::new(&psf, (12, 12), bc).unwrap().plan(beta / alpha).unwrap();
        let u = u_step(&z, &f, &psf, bc, alpha, beta, &plan).unwrap();

        let m = dense::build_system(&psf, (12, 12), bc, beta / alpha).unwrap();
        let c = dense::build_correlation(&psf, (12, 12), bc).unwrap();
        let mut rhs = c.apply(&f).unwrap().into_array();
        let dz = operators::adjoint_gradient(&z, bc).unwrap();
        rhs.scaled_add(beta / alpha, dz.as_array());
        let want = m.solve(&Image::new(rhs).unwrap()).unwrap();
        assert!(u.max_abs_diff(&want) < 1e-9, "{bc}: {}", u.max_abs_diff(&want));
    }
}

#[test]
fn near_identity_problem_is_recovered() {
    let truth = cartoon(48, 48).unwrap();
    let (f, _) = simulate(&truth, &Psf::delta(), 0.0, 0).unwrap();
    for bc in [BoundaryModel::Periodic, BoundaryModel::Reflective, BoundaryModel::Antireflective] {
        let (u, _) = solve(&f, &Psf::delta(), bc, &SolveParams::new(1e6)).unwrap();
        assert!(snr(&u, &truth).unwrap() > 40.0, "{bc}");
    }
}

#[test]
fn trace_energies_fall_within_each_beta() {
    let truth = cartoon(64, 64).unwrap();
    let psf = gaussian_psf(5, 1.5).unwrap();
    let (f, _) = simulate(&truth, &psf, 1e-4, 11).unwrap();
    for bc in [BoundaryModel::Zero, BoundaryModel::Periodic, BoundaryModel::Reflective] {
        let (_, trace) = solve(&f, &psf, bc, &SolveParams::new(500.0)).unwrap();
        assert_eq!(trace.monotonicity_violations, 0, "{bc}");
        for w in trace.records.windows(2) {
            if w[0].beta == w[1].beta {
                assert!(w[1].energy <= w[0].energy * (1.0 + 1e-12), "{bc}");
            }
        }
        for r in &trace.records {
            assert!(r.energy <= r.energy_after_z * (1.0 + 1e-12), "{bc}");
        }
    }
}

#[test]
fn default_ladder_is_used() {
    let f = cartoon(24, 24).unwrap();
    let (_, trace) = solve(&f, &Psf::delta(), BoundaryModel::Periodic, &SolveParams::new(100.0)).unwrap();
    let betas: Vec<f64> = trace.blocks.iter().map(|b| b.beta).collect();
    assert_eq!(betas, vec![2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0]);
    assert!(trace.records.len() <= 70);
}

fn converged_blocks() -> Vec<tvdeblur_core::solver::BlockSummary> {
    let truth = cartoon(64, 64).unwrap();
    let psf = gaussian_psf(5, 1.5).unwrap();
    let (f, _) = simulate(&truth, &psf, 1e-4, 12).unwrap();
    let mut params = SolveParams::new(500.0);
    params.inner_tol = 1e-6;
    params.inner_max = 2000;
    let (_, trace) = solve(&f, &psf, BoundaryModel::Reflective, &params).unwrap();
    assert!(trace.blocks.iter().all(|b| b.converged));
    trace.blocks
}

#[test]
fn splitting_residual_shrinks_along_the_ladder() {
    let residual: Vec<f64> =
        converged_blocks().iter().map(|b| 2.0 * b.final_energy.coupling / b.beta).collect();
    for w in residual.windows(2) {
        assert!(w[1] <= w[0], "{residual:?}");
    }
}

#[test]
fn weighted_coupling_is_not_monotone_at_small_beta() {
    // While z is mostly zero the u-step is a Tikhonov solve and
    // beta * |grad u|^2 grows before the shrinkage engages.
    let coupling: Vec<f64> = converged_blocks().iter().map(|b| b.final_energy.coupling).collect();
    assert!(coupling[1] > coupling[0]);
    for w in coupling[1..].windows(2) {
        assert!(w[1] <= w[0], "{coupling:?}");
    }
}

#[test]
fn solves_are_deterministic() {
    let truth = cartoon(48, 40).unwrap();
    let psf = gaussian_psf(5, 1.0).unwrap();
    let (f, _) = simulate(&truth, &psf, 1e-4, 2).unwrap();
    for bc in [BoundaryModel::Periodic, BoundaryModel::Antireflective] {
        let (a, _) = solve(&f, &psf, bc, &SolveParams::new(300.0)).unwrap();
        let (b, _) = solve(&f, &psf, bc, &SolveParams::new(300.0)).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn nonsymmetric_psf_needs_enlargement() {
    let truth = cartoon(64, 48).unwrap();
    let psf = motion_psf(7, 20.0).unwrap();
    let (f, _) = simulate(&truth, &psf, 1e-4, 3).unwrap();
    let params = SolveParams::new(500.0);
    let err = solve(&f, &psf, BoundaryModel::Reflective, &params).unwrap_err();
    assert!(matches!(err, DeblurError::Symmetry(_)));
    assert!(err.to_string().contains("enlarge:reflective"));
    for ext in [BoundaryModel::Periodic, BoundaryModel::Reflective, BoundaryModel::Antireflective] {
        let (u, trace) = solve_enlarged(&f, &psf, ext, 8, &params).unwrap();
        assert_eq!(u.dim(), f.dim());
        assert!(u.view().iter().all(|v| v.is_finite()));
        assert!(trace.total_iterations() > 0);
    }
}

#[test]
fn enlarged_u_step_matches_dense_on_small_grid() {
    // The periodic system on the enlarged grid, checked against the oracle.
    let psf = motion_psf(4, 45.0).unwrap();
    let f = common::random_image(10, 10, 4);
    let dom = PaddedDomain::new(10, 10, 4, BoundaryModel::Antireflective);
    let big = operators::extend(&f, &dom).unwrap();
    let plan = plan_system(&psf, big.dim(), BoundaryModel::Periodic, 0.2).unwrap();
    let m = dense::build_system(&psf, big.dim(), BoundaryModel::Periodic, 0.2).unwrap();
    let fast = solve_system(&plan, &big).unwrap();
    assert!(fast.max_abs_diff(&m.solve(&big).unwrap()) < 1e-9);
}

#[test]
fn reflection_equivalence_of_the_linear_systems() {
    let psf = gaussian_psf(5, 1.0).unwrap();
    for (rows, cols) in [(32, 32), (20, 26)] {
        let b = common::random_image(rows, cols, 9);
        let dom = PaddedDomain::new(rows, cols, Pad::full_reflection(rows, cols), BoundaryModel::Reflective);
        let small = plan_system(&psf, (rows, cols), BoundaryModel::Reflective, 0.3).unwrap();
        let big = plan_system(&psf, dom.padded_dims(), BoundaryModel::Periodic, 0.3).unwrap();
        let x = solve_system(&small, &b).unwrap();
        let y = solve_system(&big, &operators::extend(&b, &dom).unwrap()).unwrap();
        assert!(x.max_abs_diff(&operators::crop(&y, &dom).unwrap()) < 1e-12);
    }
}

/// Alternating minimization with the separable (anisotropic) shrink.
fn anisotropic_run(f: &Image, psf: &Psf, bc: BoundaryModel) -> Image {
    let alpha = 500.0;
    let mut u = f.clone();
    for beta in [2.0, 8.0, 32.0, 128.0] {
        let plan = plan_system(psf, f.dim(), bc, beta / alpha).unwrap();
        for _ in 0..8 {
            let g = operators::gradient(&u, bc).unwrap();
            let soft = |a: f64| a.signum() * (a.abs() - 1.0 / beta).max(0.0);
            let z = GradientField::new(g.z1.mapv(soft), g.z2.mapv(soft)).unwrap();
            let mut rhs = operators::apply_correlation(f, psf, bc).unwrap().into_array();
            rhs.scaled_add(beta / alpha, operators::adjoint_gradient(&z, bc).unwrap().as_array());
            u = solve_system(&plan, &Image::new(rhs).unwrap()).unwrap();
        }
    }
    u
}

#[test]
fn reflection_equivalence_holds_for_separable_tv() {
    // With the pixelwise magnitude replaced by per-component shrinkage the
    // mirrored periodic problem and the reflective one coincide.
    let psf = gaussian_psf(5, 1.0).unwrap();
    let (f, _) = simulate(&cartoon(40, 40).unwrap(), &psf, 1e-4, 3).unwrap();
    let dom = PaddedDomain::new(32, 32, Pad::full_reflection(32, 32), BoundaryModel::Reflective);
    let a = anisotropic_run(&f, &psf, BoundaryModel::Reflective);
    let big = anisotropic_run(&operators::extend(&f, &dom).unwrap(), &psf, BoundaryModel::Periodic);
    assert!(a.max_abs_diff(&operators::crop(&big, &dom).unwrap()) < 1e-10);
}

#[test]
fn isotropic_shrink_couples_mirrored_components() {
    // Mirroring turns forward differences into backward ones, so a mirrored
    // pixel pairs z1 and z2 from different original pixels.
    let u = common::random_image(6, 6, 13);
    let dom = PaddedDomain::new(6, 6, Pad::full_reflection(6, 6), BoundaryModel::Reflective);
    let big = operators::extend(&u, &dom).unwrap();
    let g = operators::gradient(&big, BoundaryModel::Periodic).unwrap();
    let small = operators::gradient(&u, BoundaryModel::Reflective).unwrap();
    // Column -1 of the original frame holds z1 = 0 but z2 of column 0.
    let (r, c) = (dom.pad.top + 2, dom.pad.left - 1);
    assert_eq!(g.z1[[r, c]], 0.0);
    assert_eq!(g.z2[[r, c]], small.z2[[2, 0]]);
    let z = shrink(&g, 4.0).unwrap();
    assert!(z.z1.iter().all(|v| v.is_finite()));
}
