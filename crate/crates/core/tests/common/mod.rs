#![allow(dead_code)]

use ndarray::{array, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tvdeblur_core::dense::{self, Direction};
use tvdeblur_core::harness::gaussian_psf;
use tvdeblur_core::operators;
use tvdeblur_core::transforms::{plan_system, solve_system};
use tvdeblur_core::{BoundaryModel, GradientField, Image, Psf};

pub fn random_image(rows: usize, cols: usize, seed: u64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Image::new(Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-1.0..1.0))).unwrap()
}

pub fn random_field(rows: usize, cols: usize, seed: u64) -> GradientField {
    GradientField::new(
        random_image(rows, cols, seed).into_array(),
        random_image(rows, cols, seed + 1).into_array(),
    )
    .unwrap()
}

/// 3x2 kernel with no symmetry at all.
pub fn lopsided() -> Psf {
    Psf::new(array![[0.05, 0.2], [0.3, 0.1], [0.25, 0.1]], (1, 0)).unwrap()
}

/// Named PSFs used by the oracle comparisons.
pub fn oracle_psfs(bc: BoundaryModel) -> Vec<(&'static str, Psf)> {
    let mut v = vec![
        ("delta", Psf::delta()),
        ("gauss3", gaussian_psf(3, 1.0).unwrap()),
        ("gauss5", gaussian_psf(5, 1.0).unwrap()),
    ];
    if matches!(bc, BoundaryModel::Zero | BoundaryModel::Periodic) {
        v.push(("lopsided3x2", lopsided()));
    }
    v
}

/// Largest deviation between each fast operator and its dense matrix.
pub struct OracleReport {
    pub blur: f64,
    pub correlation: f64,
    pub gradient: f64,
    pub adjoint_gradient: f64,
    pub solve: f64,
}

impl OracleReport {
    pub fn max(&self) -> f64 {
        [self.blur, self.correlation, self.gradient, self.adjoint_gradient, self.solve]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

pub fn oracle_check(psf: &Psf, n: usize, bc: BoundaryModel, ratio: f64, seed: u64) -> OracleReport {
    let dims = (n, n);
    let u = random_image(n, n, seed);
    let z = random_field(n, n, seed + 10);

    let blur = dense::build_blur(psf, dims, bc).unwrap().apply(&u).unwrap();
    let corr = dense::build_correlation(psf, dims, bc).unwrap().apply(&u).unwrap();
    let fast_grad = operators::gradient(&u, bc).unwrap();
    let g1 = dense::build_grad(dims, Direction::Horizontal, bc).unwrap().apply(&u).unwrap();
    let g2 = dense::build_grad(dims, Direction::Vertical, bc).unwrap().apply(&u).unwrap();
    let z1 = Image::new(z.z1.clone()).unwrap();
    let z2 = Image::new(z.z2.clone()).unwrap();
    let a1 = dense::build_adjgrad(dims, Direction::Horizontal, bc).unwrap().apply(&z1).unwrap();
    let a2 = dense::build_adjgrad(dims, Direction::Vertical, bc).unwrap().apply(&z2).unwrap();
    let adj = Image::new(a1.as_array() + a2.as_array()).unwrap();

    let solve = if matches!(bc, BoundaryModel::Zero | BoundaryModel::Periodic) || psf.is_quadrantally_symmetric() {
        let plan = plan_system(psf, dims, bc, ratio).unwrap();
        let fast = solve_system(&plan, &u).unwrap();
        let slow = dense::build_system(psf, dims, bc, ratio).unwrap().solve(&u).unwrap();
        fast.max_abs_diff(&slow)
    } else {
        0.0
    };

    let diff = |a: &Array2<f64>, b: &Image| {
        a.iter().zip(b.view().iter()).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
    };
    OracleReport {
        blur: operators::apply_blur(&u, psf, bc).unwrap().max_abs_diff(&blur),
        correlation: operators::apply_correlation(&u, psf, bc).unwrap().max_abs_diff(&corr),
        gradient: diff(&fast_grad.z1, &g1).max(diff(&fast_grad.z2, &g2)),
        adjoint_gradient: operators::adjoint_gradient(&z, bc).unwrap().max_abs_diff(&adj),
        solve,
    }
}
