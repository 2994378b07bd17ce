//! Benchmark fixtures shared by the criterion targets.

use ksym_core::chart::ManifoldSpec;

/// The curved `n = k = 1` workhorse.
pub fn quadratic_spec() -> ManifoldSpec {
    let mut spec = ManifoldSpec::flat(1, 1);
    spec.set_t_src(1, 1, 1, "y1^2/2");
    spec
}

/// A curved `n = 2, k = 1` spec with transcendental entries, valid for the
/// connection machinery (diagonal table, own-variable plus x dependence).
pub fn wide_spec() -> ManifoldSpec {
    let mut spec = ManifoldSpec::flat(2, 1);
    spec.set_t_src(1, 1, 1, "sin(y1)+x1");
    spec.set_t_src(2, 1, 2, "y2^3/3+exp(x2/4)");
    spec
}
