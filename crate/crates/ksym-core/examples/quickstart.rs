//! Compute the canonical connection and curvature of a curved chart
//! presentation, then check the transport closed form.

use ksym_core::chart::ManifoldSpec;
use ksym_core::connection::{connection_coeffs_at, curvature_at, parallel_transport};
use ksym_core::ehresmann::horizontal_integral_curve;
use nalgebra::dvector;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut spec = ManifoldSpec::flat(1, 1);
    spec.set_t_src(1, 1, 1, "y1^2/2");

    let p = dvector![0.0, 2.0];
    let gamma = connection_coeffs_at(&spec, &p)?;
    println!("nabla_X Y coefficient at y1 = 2: {}", gamma.get(0, 1, 1));
    println!("nabla_X X coefficient at y1 = 2: {}", gamma.get(0, 0, 0));

    let r = curvature_at(&spec, &p)?;
    println!("R(Y, X) Y component: {}", r.get(1, 0, 1, 1));
    println!("R(Y, X) X component: {}", r.get(1, 0, 0, 0));

    // Transport d/dy along the horizontal flow from (0, 1) for time 2;
    // the coefficient contracts to (2 / (2 + s))^2 = 1/4.
    let curve = horizontal_integral_curve(&spec, &dvector![0.0, 1.0], &[1.0], 2.0, 2000)?;
    let moved = parallel_transport(&spec, &curve, &dvector![0.0, 1.0], 2000)?;
    println!("transported Y coefficient after time 2: {:.9}", moved[1]);
    Ok(())
}
