//! Flat normal form: transport the adapted frame at a base point into a
//! commuting parallel frame, realize the straightening chart as flow
//! parameters of those fields, and verify that the chart carries every
//! `omega_alpha`, the foliation, and the transversal distribution to the
//! standard model.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::chart::{adapted_frame_from_jets, ManifoldSpec, Point};
use crate::connection::{
    coeffs_from_jets, curvature_at, rk4_step, transport_rhs, ConnectionError,
};
use crate::expr::EvalError;
use crate::structures::standard_forms;

#[derive(Debug, Clone, Error)]
pub enum NormalFormError {
    #[error("spec is not flat: curvature residual {0:e}")]
    NotFlat(f64),
    #[error("parallel frame is path dependent (gap {0:e})")]
    PathDependence(f64),
    #[error("parallel frame fields do not commute (bracket residual {0:e})")]
    NotCommuting(f64),
    #[error("Newton iteration did not converge after {iterations} steps (gap {gap:e})")]
    NewtonDivergence { iterations: usize, gap: f64 },
    #[error("flow chart Jacobian is degenerate (|det| = {0:e})")]
    DegenerateJacobian(f64),
    #[error(transparent)]
    Connection(#[from] ConnectionError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Axis-aligned coordinate box.
#[derive(Debug, Clone)]
pub struct Region {
    pub min: DVector<f64>,
    pub max: DVector<f64>,
}

impl Region {
    pub fn symmetric(dim: usize, half_width: f64) -> Region {
        Region {
            min: DVector::from_element(dim, -half_width),
            max: DVector::from_element(dim, half_width),
        }
    }

    fn sample_points(&self, count: usize, seed: u64) -> Vec<Point> {
        let dim = self.min.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| {
                DVector::from_fn(dim, |i, _| {
                    if self.max[i] > self.min[i] {
                        rng.gen_range(self.min[i]..self.max[i])
                    } else {
                        self.min[i]
                    }
                })
            })
            .collect()
    }
}

/// Flatness certificate: the curvature residual over 50 seeded points of the
/// region must stay below `1e-9`.
fn ensure_flat(spec: &ManifoldSpec, region: &Region) -> Result<(), NormalFormError> {
    let mut worst = 0.0f64;
    for q in region.sample_points(50, 0) {
        worst = worst.max(curvature_at(spec, &q)?.max_abs());
    }
    if worst > 1e-9 {
        return Err(NormalFormError::NotFlat(worst));
    }
    Ok(())
}

/// Transport the frame-component matrix `w` along the straight coordinate
/// segment `from -> to`.
fn transport_frame_along_segment(
    spec: &ManifoldSpec,
    from: &Point,
    to: &Point,
    w: &DMatrix<f64>,
    steps: usize,
) -> Result<DMatrix<f64>, NormalFormError> {
    let chart = spec.chart;
    let dim = chart.dim();
    let delta = to - from;
    if delta.amax() == 0.0 {
        return Ok(w.clone());
    }
    let mut flat = DVector::from_column_slice(w.as_slice());
    let mut rhs = |t: f64, y: &DVector<f64>| -> Result<DVector<f64>, NormalFormError> {
        let pt = from + &delta * t;
        let jets = spec.t_jets(&pt)?;
        let frame = adapted_frame_from_jets(chart, &jets);
        let gamma = coeffs_from_jets(chart, &jets, &pt)?;
        let u = frame.to_frame(&delta);
        let mut out = DVector::zeros(dim * dim);
        for col in 0..dim {
            let w_col = y.rows(col * dim, dim).into_owned();
            out.rows_mut(col * dim, dim)
                .copy_from(&transport_rhs(&gamma, &u, &w_col));
        }
        Ok(out)
    };
    let h = 1.0 / steps as f64;
    for s in 0..steps {
        flat = rk4_step(&mut rhs, h * s as f64, &flat, h)?;
    }
    Ok(DMatrix::from_column_slice(dim, dim, flat.as_slice()))
}

/// Transport the adapted frame at `x0` to `p` along the axis-aligned
/// polyline that changes the coordinates in the given order. Returns the
/// frame components of the transported frame at `p`.
fn polyline_frame(
    spec: &ManifoldSpec,
    x0: &Point,
    p: &Point,
    order: &[usize],
    steps: usize,
) -> Result<DMatrix<f64>, NormalFormError> {
    let dim = spec.dim();
    let mut w = DMatrix::identity(dim, dim);
    let mut current = x0.clone();
    for &axis in order {
        let mut next = current.clone();
        next[axis] = p[axis];
        w = transport_frame_along_segment(spec, &current, &next, &w, steps)?;
        current = next;
    }
    Ok(w)
}

/// Parallel transport of the adapted frame at `x0` to `p` along coordinate
/// polylines; flatness makes the result path independent, and that is
/// asserted by comparing the ascending- and descending-axis polylines.
///
/// The returned columns are the transported frame fields in the coordinate
/// basis at `p`.
pub fn parallel_frame(
    spec: &ManifoldSpec,
    x0: &Point,
    p: &Point,
) -> Result<DMatrix<f64>, NormalFormError> {
    Ok(parallel_frame_with_gap(spec, x0, p)?.0)
}

/// [`parallel_frame`] returning the measured gap between the two polylines.
pub fn parallel_frame_with_gap(
    spec: &ManifoldSpec,
    x0: &Point,
    p: &Point,
) -> Result<(DMatrix<f64>, f64), NormalFormError> {
    let dim = spec.dim();
    let region = enclosing_region(x0, p);
    ensure_flat(spec, &region)?;
    let steps = 64;
    let ascending: Vec<usize> = (0..dim).collect();
    let descending: Vec<usize> = (0..dim).rev().collect();
    let wa = polyline_frame(spec, x0, p, &ascending, steps)?;
    let wb = polyline_frame(spec, x0, p, &descending, steps)?;
    let gap = (&wa - &wb).amax();
    if gap > 1e-7 {
        return Err(NormalFormError::PathDependence(gap));
    }
    let jets = spec.t_jets(p)?;
    let frame = adapted_frame_from_jets(spec.chart, &jets);
    Ok((frame.matrix() * wa, gap))
}

fn enclosing_region(x0: &Point, p: &Point) -> Region {
    let dim = x0.len();
    let mut min = DVector::zeros(dim);
    let mut max = DVector::zeros(dim);
    for i in 0..dim {
        min[i] = x0[i].min(p[i]).min(-1.0);
        max[i] = x0[i].max(p[i]).max(1.0);
    }
    Region { min, max }
}

/// The flow-parameter chart around `x0`: the new coordinates of `p` are the
/// parameters `(a_1, ..., a_dim)` with `p` reached from `x0` by flowing
/// along the parallel frame fields, Y-block flows first, then X-block flows.
#[derive(Debug, Clone)]
pub struct CoordinateMap {
    spec: ManifoldSpec,
    pub base_point: Point,
    /// Adapted frame at the base point, cached for reporting.
    pub base_frame: DMatrix<f64>,
    pub region: Region,
    /// Frame slots in the order their flows are applied.
    flow_order: Vec<usize>,
    /// RK4 steps per unit flow time.
    steps_per_unit: usize,
}

impl CoordinateMap {
    /// Forward chart: `p` to its flow parameters, by Newton iteration with
    /// the analytic Jacobian (the co-transported frame at the flow end).
    pub fn new_coords(&self, p: &Point) -> Result<Point, NormalFormError> {
        let mut a = p - &self.base_point;
        for iteration in 0..50 {
            let (reached, frame_cols) = self.flow_with_frame(&a)?;
            let gap = (&reached - p).amax();
            if gap < 1e-11 {
                return Ok(a);
            }
            let lu = frame_cols.clone().lu();
            let det = lu.determinant();
            if det.abs() < 1e-8 {
                return Err(NormalFormError::DegenerateJacobian(det.abs()));
            }
            let delta = lu
                .solve(&(&reached - p))
                .expect("determinant checked above");
            a -= delta;
            let _ = iteration;
        }
        let (reached, _) = self.flow_with_frame(&a)?;
        Err(NormalFormError::NewtonDivergence {
            iterations: 50,
            gap: (&reached - p).amax(),
        })
    }

    /// Inverse chart: flow parameters back to the original coordinates.
    pub fn old_coords(&self, a: &Point) -> Result<Point, NormalFormError> {
        Ok(self.flow_with_frame(a)?.0)
    }

    /// Flow from the base point along the parallel frame fields by the given
    /// parameters, co-transporting the whole frame; returns the endpoint and
    /// the transported frame columns in the coordinate basis there.
    fn flow_with_frame(&self, a: &Point) -> Result<(Point, DMatrix<f64>), NormalFormError> {
        let spec = &self.spec;
        let chart = spec.chart;
        let dim = chart.dim();
        let mut p = self.base_point.clone();
        let mut w = DMatrix::identity(dim, dim);

        for &slot in &self.flow_order {
            let time = a[slot];
            if time == 0.0 {
                continue;
            }
            let steps = ((time.abs() * self.steps_per_unit as f64).ceil() as usize).max(8);
            let mut state = DVector::zeros(dim + dim * dim);
            state.rows_mut(0, dim).copy_from(&p);
            state
                .rows_mut(dim, dim * dim)
                .copy_from(&DVector::from_column_slice(w.as_slice()));
            let mut rhs = |_t: f64, y: &DVector<f64>| -> Result<DVector<f64>, NormalFormError> {
                let pt = y.rows(0, dim).into_owned();
                let jets = spec.t_jets(&pt)?;
                let frame = adapted_frame_from_jets(chart, &jets);
                let gamma = coeffs_from_jets(chart, &jets, &pt)?;
                let w_flat = y.rows(dim, dim * dim);
                let w_dir = w_flat.rows(slot * dim, dim).into_owned();
                let mut out = DVector::zeros(dim + dim * dim);
                out.rows_mut(0, dim).copy_from(&frame.from_frame(&w_dir));
                for col in 0..dim {
                    let w_col = w_flat.rows(col * dim, dim).into_owned();
                    out.rows_mut(dim + col * dim, dim)
                        .copy_from(&transport_rhs(&gamma, &w_dir, &w_col));
                }
                Ok(out)
            };
            let h = time / steps as f64;
            for s in 0..steps {
                state = rk4_step(&mut rhs, h * s as f64, &state, h)?;
            }
            p = state.rows(0, dim).into_owned();
            w = DMatrix::from_column_slice(dim, dim, state.rows(dim, dim * dim).as_slice());
        }

        let jets = spec.t_jets(&p)?;
        let frame = adapted_frame_from_jets(chart, &jets);
        let cols = frame.matrix() * &w;
        Ok((p, cols))
    }

    /// A copy of the map with a different flow composition order, for
    /// commutation diagnostics.
    pub fn with_flow_order(&self, order: Vec<usize>) -> CoordinateMap {
        assert_eq!(order.len(), self.spec.dim());
        CoordinateMap {
            flow_order: order,
            ..self.clone()
        }
    }
}

/// Build the flow-parameter chart on the region: checks flatness, checks
/// that the parallel frame fields commute (bracket residual below `1e-7` at
/// five seeded points), and fixes the composition order as Y-block flows
/// first, X-block flows last.
pub fn normal_form_chart(
    spec: &ManifoldSpec,
    x0: &Point,
    region: Region,
) -> Result<CoordinateMap, NormalFormError> {
    let chart = spec.chart;
    let dim = chart.dim();
    ensure_flat(spec, &region)?;

    // E-field commutation via central differences of the polyline frames.
    let step = 1e-4;
    let e_field = |q: &Point| -> Result<DMatrix<f64>, NormalFormError> {
        let ascending: Vec<usize> = (0..dim).collect();
        let w = polyline_frame(spec, x0, q, &ascending, 32)?;
        let jets = spec.t_jets(q)?;
        let frame = adapted_frame_from_jets(chart, &jets);
        Ok(frame.matrix() * w)
    };
    let mut worst = 0.0f64;
    for q in region.sample_points(5, 1) {
        let e0 = e_field(&q)?;
        let mut de = Vec::with_capacity(dim);
        for m in 0..dim {
            let mut plus = q.clone();
            plus[m] += step;
            let mut minus = q.clone();
            minus[m] -= step;
            de.push((e_field(&plus)? - e_field(&minus)?) / (2.0 * step));
        }
        for a in 0..dim {
            for b in (a + 1)..dim {
                let mut bracket = DVector::zeros(dim);
                for m in 0..dim {
                    bracket += de[m].column(b) * e0[(m, a)] - de[m].column(a) * e0[(m, b)];
                }
                worst = worst.max(bracket.amax());
            }
        }
    }
    if worst > 1e-7 {
        return Err(NormalFormError::NotCommuting(worst));
    }

    let mut flow_order: Vec<usize> = (chart.n..dim).collect();
    flow_order.extend(0..chart.n);
    let jets = spec.t_jets(x0)?;
    let base_frame = adapted_frame_from_jets(chart, &jets).matrix().clone();
    Ok(CoordinateMap {
        spec: spec.clone(),
        base_point: x0.clone(),
        base_frame,
        region,
        flow_order,
        steps_per_unit: 128,
    })
}

/// Verify the chart on a sampled grid: pull each standard form back through
/// the inverse map (finite-difference Jacobians, step `1e-5`) and compare
/// with the standard coefficients, and check the pushforward of each `X_i`
/// has no vertical component. Returns the largest deviation.
pub fn verify_normal_form(
    map: &CoordinateMap,
    spec: &ManifoldSpec,
    grid: usize,
) -> Result<f64, NormalFormError> {
    assert!(grid >= 2);
    let chart = spec.chart;
    let dim = chart.dim();
    let forms = standard_forms(chart);
    // The target coefficients are the constant standard matrices.
    let origin = DVector::zeros(dim);
    let standard: Vec<DMatrix<f64>> = forms
        .iter()
        .map(|f| f.full_matrix(&origin).expect("constant coefficients"))
        .collect();

    let points: Vec<Point> = if dim == 2 {
        let mut pts = Vec::with_capacity(grid * grid);
        for i in 0..grid {
            for j in 0..grid {
                let fx = i as f64 / (grid - 1) as f64;
                let fy = j as f64 / (grid - 1) as f64;
                pts.push(DVector::from_vec(vec![
                    map.region.min[0] + fx * (map.region.max[0] - map.region.min[0]),
                    map.region.min[1] + fy * (map.region.max[1] - map.region.min[1]),
                ]));
            }
        }
        pts
    } else {
        map.region.sample_points(grid * grid, 2)
    };

    let fd_step = 1e-5;
    let mut worst = 0.0f64;
    for p in &points {
        let a = map.new_coords(p)?;
        // Finite-difference Jacobian of the inverse (flow) map at a.
        let mut jac = DMatrix::zeros(dim, dim);
        for m in 0..dim {
            let mut plus = a.clone();
            plus[m] += fd_step;
            let mut minus = a.clone();
            minus[m] -= fd_step;
            let col = (map.old_coords(&plus)? - map.old_coords(&minus)?) / (2.0 * fd_step);
            jac.set_column(m, &col);
        }
        let back = map.old_coords(&a)?;
        for (alpha, omega) in forms.iter().enumerate() {
            let w_old = omega.full_matrix(&back)?;
            let pulled = jac.transpose() * w_old * &jac;
            worst = worst.max((&pulled - &standard[alpha]).amax());
        }
        // Pushforward of the X fields: dphi(X_i) = J^-1 X_i(p).
        let jets = spec.t_jets(p)?;
        let frame = adapted_frame_from_jets(chart, &jets);
        let lu = jac.lu();
        for i in 0..chart.n {
            let image = lu
                .solve(&frame.column(i))
                .ok_or(NormalFormError::DegenerateJacobian(0.0))?;
            worst = worst.max(image.rows(chart.n, dim - chart.n).amax());
        }
    }
    Ok(worst)
}

/// Probe helper used by the CLI artifacts: tabulated `(p, p')` pairs over
/// seeded sample points of the region.
pub fn tabulate_chart(
    map: &CoordinateMap,
    count: usize,
) -> Result<Vec<(Vec<f64>, Vec<f64>)>, NormalFormError> {
    let mut out = Vec::with_capacity(count);
    for p in map.region.sample_points(count, 3) {
        let a = map.new_coords(&p)?;
        out.push((p.as_slice().to_vec(), a.as_slice().to_vec()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::dvector;

    fn constant_spec() -> ManifoldSpec {
        let mut spec = ManifoldSpec::flat(1, 1);
        spec.set_t_src(1, 1, 1, "1");
        spec
    }

    fn x_spec() -> ManifoldSpec {
        let mut spec = ManifoldSpec::flat(1, 1);
        spec.set_t_src(1, 1, 1, "x1");
        spec
    }

    fn xy_spec() -> ManifoldSpec {
        let mut spec = ManifoldSpec::flat(1, 1);
        spec.set_t_src(1, 1, 1, "x1*y1");
        spec
    }

    #[test]
    fn parallel_frame_flat_is_identity() {
        let spec = ManifoldSpec::flat(2, 1);
        let e = parallel_frame(&spec, &DVector::zeros(4), &dvector![0.5, -0.3, 0.8, 0.1]).unwrap();
        assert_eq!(e, DMatrix::identity(4, 4));
    }

    #[test]
    fn parallel_frame_constant_t() {
        // t = 1: the adapted frame is constant and parallel.
        let spec = constant_spec();
        let e = parallel_frame(&spec, &dvector![0.0, 0.0], &dvector![0.7, -0.2]).unwrap();
        assert_relative_eq!(e[(0, 0)], 1.0, epsilon = 1e-12);
        assert_relative_eq!(e[(1, 0)], -1.0, epsilon = 1e-12);
        assert_relative_eq!(e[(0, 1)], 0.0, epsilon = 1e-12);
        assert_relative_eq!(e[(1, 1)], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn parallel_frame_x_dependent_t() {
        // t = x1 has vanishing coefficients, so transport keeps the frame
        // components and E_X(p) equals the adapted X at p.
        let spec = x_spec();
        let p = dvector![2.0, 0.4];
        let e = parallel_frame(&spec, &dvector![0.0, 0.0], &p).unwrap();
        assert_relative_eq!(e[(0, 0)], 1.0, epsilon = 1e-10);
        assert_relative_eq!(e[(1, 0)], -2.0, epsilon = 1e-10);
        assert_relative_eq!(e[(0, 1)], 0.0, epsilon = 1e-12);
        assert_relative_eq!(e[(1, 1)], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn parallel_frame_block_preservation() {
        // t = x1 y1 transports nontrivially but keeps the blocks.
        let spec = xy_spec();
        let e = parallel_frame(&spec, &dvector![0.0, 0.0], &dvector![0.8, 0.6]).unwrap();
        // Columns: E_X must have no influence from the Y slot of the frame
        // decomposition and vice versa; in coordinates, E_Y stays vertical.
        assert_eq!(e[(0, 1)], 0.0);
        assert!(e[(1, 1)] > 0.0);
    }

    #[test]
    fn parallel_frame_rejects_curved_specs() {
        let mut spec = ManifoldSpec::flat(1, 1);
        spec.set_t_src(1, 1, 1, "y1^2/2");
        let err = parallel_frame(&spec, &dvector![0.0, 0.0], &dvector![0.5, 0.5]).unwrap_err();
        assert!(matches!(err, NormalFormError::NotFlat(_)));
    }

    #[test]
    fn chart_flat_is_identity() {
        let spec = ManifoldSpec::flat(1, 1);
        let map = normal_form_chart(&spec, &DVector::zeros(2), Region::symmetric(2, 1.0)).unwrap();
        for p in [dvector![0.3, -0.7], dvector![-0.9, 0.2]] {
            let a = map.new_coords(&p).unwrap();
            assert_relative_eq!(a[0], p[0], epsilon = 1e-10);
            assert_relative_eq!(a[1], p[1], epsilon = 1e-10);
        }
    }

    #[test]
    fn chart_constant_t_hand_map() {
        // t = 1 straightens through (x, y) -> (x, y + x).
        let spec = constant_spec();
        let map = normal_form_chart(&spec, &DVector::zeros(2), Region::symmetric(2, 1.5)).unwrap();
        let a = map.new_coords(&dvector![1.0, 1.0]).unwrap();
        assert_relative_eq!(a[0], 1.0, epsilon = 1e-9);
        assert_relative_eq!(a[1], 2.0, epsilon = 1e-9);
        for p in [dvector![0.4, -0.3], dvector![-0.8, 0.9]] {
            let a = map.new_coords(&p).unwrap();
            assert_relative_eq!(a[0], p[0], epsilon = 1e-9);
            assert_relative_eq!(a[1], p[1] + p[0], epsilon = 1e-9);
        }
    }

    #[test]
    fn chart_x_t_hand_map() {
        // t = x1 straightens through (x, y) -> (x, y + x^2/2).
        let spec = x_spec();
        let map = normal_form_chart(&spec, &DVector::zeros(2), Region::symmetric(2, 2.5)).unwrap();
        let a = map.new_coords(&dvector![2.0, 1.0]).unwrap();
        assert_relative_eq!(a[0], 2.0, epsilon = 1e-8);
        assert_relative_eq!(a[1], 3.0, epsilon = 1e-8);
    }

    #[test]
    fn chart_round_trips() {
        let spec = xy_spec();
        let map = normal_form_chart(&spec, &DVector::zeros(2), Region::symmetric(2, 1.0)).unwrap();
        for p in [dvector![0.4, 0.6], dvector![-0.5, -0.2], dvector![0.9, -0.8]] {
            let a = map.new_coords(&p).unwrap();
            let back = map.old_coords(&a).unwrap();
            assert!((&back - &p).amax() < 1e-10);
        }
    }

    #[test]
    fn composition_order_independence() {
        let spec = xy_spec();
        let map = normal_form_chart(&spec, &DVector::zeros(2), Region::symmetric(2, 1.0)).unwrap();
        let permuted = map.with_flow_order(vec![0, 1]);
        for p in [dvector![0.5, 0.5], dvector![-0.6, 0.3]] {
            let a = map.new_coords(&p).unwrap();
            let b = permuted.new_coords(&p).unwrap();
            assert!(
                (&a - &b).amax() < 1e-6,
                "flow orders disagree by {:e}",
                (&a - &b).amax()
            );
        }
    }

    #[test]
    fn verify_identity_map() {
        let spec = ManifoldSpec::flat(1, 1);
        let map = normal_form_chart(&spec, &DVector::zeros(2), Region::symmetric(2, 1.0)).unwrap();
        let res = verify_normal_form(&map, &spec, 8).unwrap();
        assert!(res < 1e-9, "flat residual {res:e}");
    }

    #[test]
    fn verify_hand_mapped_specs() {
        for spec in [constant_spec(), x_spec(), xy_spec()] {
            let map =
                normal_form_chart(&spec, &DVector::zeros(2), Region::symmetric(2, 1.0)).unwrap();
            let res = verify_normal_form(&map, &spec, 10).unwrap();
            assert!(res < 1e-6, "normal form residual {res:e}");
        }
    }

    #[test]
    fn chart_rejects_curved_specs() {
        let mut spec = ManifoldSpec::flat(1, 1);
        spec.set_t_src(1, 1, 1, "y1^2/2");
        let err =
            normal_form_chart(&spec, &DVector::zeros(2), Region::symmetric(2, 1.0)).unwrap_err();
        assert!(matches!(err, NormalFormError::NotFlat(_)));
    }
}
