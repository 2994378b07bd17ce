//! Shared fixtures for the integration suites.
#![allow(dead_code)] // each test binary uses its own subset

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ksym_core::chart::{ManifoldSpec, Point};

pub fn flat11() -> ManifoldSpec {
    ManifoldSpec::flat(1, 1)
}

pub fn flat22() -> ManifoldSpec {
    ManifoldSpec::flat(2, 2)
}

/// `t = x1`: flat, with a coordinate-dependent frame.
pub fn tx() -> ManifoldSpec {
    let mut spec = ManifoldSpec::flat(1, 1);
    spec.set_t_src(1, 1, 1, "x1");
    spec
}

/// `t = y1^2/2`: the curved workhorse.
pub fn tq() -> ManifoldSpec {
    let mut spec = ManifoldSpec::flat(1, 1);
    spec.set_t_src(1, 1, 1, "y1^2/2");
    spec
}

/// `t = 1`: flat with a constant shear.
pub fn t1() -> ManifoldSpec {
    let mut spec = ManifoldSpec::flat(1, 1);
    spec.set_t_src(1, 1, 1, "1");
    spec
}

/// The curved `n = 2, k = 1` fixture for the characteristic-class checks.
pub fn curved_n2() -> ManifoldSpec {
    let mut spec = ManifoldSpec::flat(2, 1);
    spec.set_t_src(1, 1, 1, "y1^2/2");
    spec.set_t_src(2, 1, 2, "y2^2/2");
    spec
}

/// A seeded random `n = 1, k = 2` spec that passes validation: diagonal
/// entries affine in their own block variable, with the slope shared across
/// the blocks as the compatibility condition requires.
pub fn k2_random(seed: u64) -> ManifoldSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c1: f64 = rng.gen_range(-0.5..0.5);
    let c2: f64 = rng.gen_range(-0.5..0.5);
    let slope: f64 = rng.gen_range(-0.8..0.8);
    let mut spec = ManifoldSpec::flat(1, 2);
    spec.set_t_src(1, 1, 1, &format!("{c1}+{slope}*y1"));
    spec.set_t_src(1, 2, 1, &format!("{c2}+{slope}*y2"));
    spec
}

/// A seeded random `n = 2, k = 2` diagonal affine spec (also valid).
pub fn k2n2_random(seed: u64) -> ManifoldSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut spec = ManifoldSpec::flat(2, 2);
    for i in 1..=2usize {
        let c: Vec<f64> = (0..2).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let slope: f64 = rng.gen_range(-0.8..0.8);
        for alpha in 1..=2usize {
            let var = (alpha - 1) * 2 + i;
            spec.set_t_src(i, alpha, i, &format!("{}+{slope}*y{var}", c[alpha - 1]));
        }
    }
    spec
}

/// A `k = 2` spec with quadratic block dependence; fails the compatibility
/// check C5.
pub fn k2_invalid(seed: u64) -> ManifoldSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c: f64 = rng.gen_range(0.3..1.0);
    let mut spec = ManifoldSpec::flat(1, 2);
    spec.set_t_src(1, 1, 1, &format!("{c}*y1^2"));
    spec
}

pub fn sample_points(dim: usize, count: usize, seed: u64) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| DVector::from_fn(dim, |_, _| rng.gen_range(-1.0..1.0)))
        .collect()
}
