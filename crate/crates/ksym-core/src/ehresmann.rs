//! Rectangles spanned by a vertical geodesic and a horizontal curve: the
//! transversal distribution acts as an Ehresmann connection by transporting
//! the vertical velocity along the horizontal curve and shooting geodesics.

use nalgebra::DVector;
use serde::Serialize;
use thiserror::Error;

use crate::chart::{adapted_frame_from_jets, ManifoldSpec, Point, TangentVector};
use crate::connection::{
    coeffs_from_jets, geodesic, rk4_step, transport_rhs, ConnectionError, Curve,
};
use crate::expr::EvalError;

/// Coordinates beyond this magnitude abort an integration; a leaf that runs
/// away before the rectangle closes is reported as incomplete.
const BLOWUP_LIMIT: f64 = 1e6;

#[derive(Debug, Clone, Error)]
pub enum RectangleError {
    #[error("vertical edge is not a geodesic (residual {0:e})")]
    NotGeodesic(f64),
    #[error("vertical edge leaves the leaf (x-velocity {0:e})")]
    NotVertical(f64),
    #[error("horizontal edge leaves the transversal distribution (residual {0:e})")]
    NotHorizontal(f64),
    #[error("curves do not share the initial point (gap {0:e})")]
    MismatchedCorner(f64),
    #[error("leaf is incomplete: integration escaped the chart (|coordinate| > {BLOWUP_LIMIT:e})")]
    IncompleteLeaf,
    #[error(transparent)]
    Connection(#[from] ConnectionError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// A grid `sigma(t_i, s_j)` over `[0, a] x [0, b]` with its generating
/// curves: `alpha` vertical (the `t` direction), `beta` horizontal (the `s`
/// direction).
#[derive(Debug, Clone)]
pub struct Rectangle {
    pub ts: Vec<f64>,
    pub ss: Vec<f64>,
    /// `points[i][j] = sigma(ts[i], ss[j])`.
    pub points: Vec<Vec<Point>>,
    pub vertical: Curve,
    pub horizontal: Curve,
}

/// Serialized form of the grid for external plotting.
#[derive(Debug, Clone, Serialize)]
pub struct RectangleGrid {
    pub ts: Vec<f64>,
    pub ss: Vec<f64>,
    pub points: Vec<Vec<Vec<f64>>>,
}

impl Rectangle {
    pub fn to_grid(&self) -> RectangleGrid {
        RectangleGrid {
            ts: self.ts.clone(),
            ss: self.ss.clone(),
            points: self
                .points
                .iter()
                .map(|row| row.iter().map(|p| p.as_slice().to_vec()).collect())
                .collect(),
        }
    }
}

/// Integral curve of `sum_i c_i X_i` from `p0` over `[0, T]`, by RK4; the
/// tangent stays in the transversal distribution by construction.
pub fn horizontal_integral_curve(
    spec: &ManifoldSpec,
    p0: &Point,
    direction: &[f64],
    total_time: f64,
    steps: usize,
) -> Result<Curve, RectangleError> {
    assert!(steps > 0);
    assert_eq!(direction.len(), spec.chart.n, "one coefficient per X field");
    assert!(
        direction.iter().any(|&c| c != 0.0),
        "direction must be nonzero"
    );
    let chart = spec.chart;
    let velocity = |q: &Point| -> Result<TangentVector, RectangleError> {
        let jets = spec.t_jets(q)?;
        let frame = adapted_frame_from_jets(chart, &jets);
        let mut v = DVector::zeros(chart.dim());
        for (i, &c) in direction.iter().enumerate() {
            if c != 0.0 {
                v += frame.column(i) * c;
            }
        }
        Ok(v)
    };
    let mut rhs =
        |_t: f64, y: &DVector<f64>| -> Result<DVector<f64>, RectangleError> { velocity(y) };

    let h = total_time / steps as f64;
    let mut times = vec![0.0];
    let mut points = vec![p0.clone()];
    let mut velocities = vec![velocity(p0)?];
    let mut state = p0.clone();
    for s in 0..steps {
        state = rk4_step(&mut rhs, h * s as f64, &state, h)?;
        if state.amax() > BLOWUP_LIMIT {
            return Err(RectangleError::IncompleteLeaf);
        }
        times.push(h * (s + 1) as f64);
        velocities.push(velocity(&state)?);
        points.push(state.clone());
    }
    Ok(Curve::new(times, points, velocities))
}

/// Residual of the geodesic equation along a sampled curve, from finite
/// differences of the frame components of its velocity.
fn geodesic_residual(spec: &ManifoldSpec, curve: &Curve) -> Result<f64, RectangleError> {
    let chart = spec.chart;
    let times = curve.times();
    let mut worst = 0.0f64;
    for w in times.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        let h = t1 - t0;
        let mid = 0.5 * (t0 + t1);
        let frame_vel = |t: f64| -> Result<DVector<f64>, RectangleError> {
            let (pt, vel) = curve.eval(t);
            let jets = spec.t_jets(&pt)?;
            Ok(adapted_frame_from_jets(chart, &jets).to_frame(&vel))
        };
        let dw = (frame_vel(t1)? - frame_vel(t0)?) / h;
        let (pt, vel) = curve.eval(mid);
        let jets = spec.t_jets(&pt)?;
        let frame = adapted_frame_from_jets(chart, &jets);
        let gamma = coeffs_from_jets(chart, &jets, &pt)?;
        let wv = frame.to_frame(&vel);
        let expected = transport_rhs(&gamma, &wv, &wv);
        worst = worst.max((dw - expected).amax());
    }
    Ok(worst)
}

/// Build the rectangle spanned by a vertical geodesic `vertical` and a
/// horizontal curve `horizontal` with the same initial point: transport the
/// vertical initial velocity along the horizontal curve, then shoot a
/// geodesic from every horizontal sample.
///
/// `grid = (n_t, n_s)` gives the number of cells per direction; the returned
/// grid has `(n_t + 1) x (n_s + 1)` nodes.
pub fn build_rectangle(
    spec: &ManifoldSpec,
    vertical: &Curve,
    horizontal: &Curve,
    grid: (usize, usize),
) -> Result<Rectangle, RectangleError> {
    let (n_t, n_s) = grid;
    assert!(n_t >= 1 && n_s >= 1);
    let chart = spec.chart;
    let dim = chart.dim();
    let n = chart.n;

    let corner_gap = (vertical.start_point() - horizontal.start_point()).amax();
    if corner_gap > 1e-9 {
        return Err(RectangleError::MismatchedCorner(corner_gap));
    }

    // The vertical edge must be a leaf curve and a geodesic.
    let mut x_vel = 0.0f64;
    for v in vertical.velocities() {
        x_vel = x_vel.max(v.rows(0, n).amax());
    }
    if x_vel > 1e-6 {
        return Err(RectangleError::NotVertical(x_vel));
    }
    let geo_res = geodesic_residual(spec, vertical)?;
    if geo_res > 1e-6 {
        return Err(RectangleError::NotGeodesic(geo_res));
    }

    // The horizontal edge must stay in the transversal distribution: its
    // velocity has no Y components in the adapted frame.
    let mut y_res = 0.0f64;
    for (pt, vel) in horizontal.points().iter().zip(horizontal.velocities()) {
        let jets = spec.t_jets(pt)?;
        let frame = adapted_frame_from_jets(chart, &jets);
        let w = frame.to_frame(vel);
        y_res = y_res.max(w.rows(n, dim - n).amax());
    }
    if y_res > 1e-6 {
        return Err(RectangleError::NotHorizontal(y_res));
    }

    let a = vertical.end_time() - vertical.start_time();
    let b = horizontal.end_time() - horizontal.start_time();
    let ts: Vec<f64> = (0..=n_t).map(|i| a * i as f64 / n_t as f64).collect();
    let ss: Vec<f64> = (0..=n_s).map(|j| b * j as f64 / n_s as f64).collect();

    // Transport the vertical initial velocity along the horizontal curve
    // incrementally, recording it at every grid parameter s.
    let v0 = vertical.velocities()[0].clone();
    let start_jets = spec.t_jets(horizontal.start_point())?;
    let mut w = adapted_frame_from_jets(chart, &start_jets).to_frame(&v0);
    let substeps = 32usize;
    let mut transported: Vec<TangentVector> = Vec::with_capacity(n_s + 1);
    {
        let mut rhs = |t: f64, w: &DVector<f64>| -> Result<DVector<f64>, RectangleError> {
            let (pt, vel) = horizontal.eval(t);
            let jets = spec.t_jets(&pt)?;
            let frame = adapted_frame_from_jets(chart, &jets);
            let gamma = coeffs_from_jets(chart, &jets, &pt)?;
            Ok(transport_rhs(&gamma, &frame.to_frame(&vel), w))
        };
        let t_base = horizontal.start_time();
        transported.push(v0.clone());
        for j in 1..=n_s {
            let seg0 = t_base + ss[j - 1];
            let h = (ss[j] - ss[j - 1]) / substeps as f64;
            for m in 0..substeps {
                w = rk4_step(&mut rhs, seg0 + h * m as f64, &w, h)?;
            }
            let (pt, _) = horizontal.eval(t_base + ss[j]);
            let jets = spec.t_jets(&pt)?;
            let frame = adapted_frame_from_jets(chart, &jets);
            transported.push(frame.from_frame(&w));
        }
    }

    // Transport preserves the vertical foliation: check tangency before
    // shooting the geodesics.
    for v in &transported {
        let x_part = v.rows(0, n).amax();
        if x_part > 1e-8 {
            return Err(RectangleError::NotVertical(x_part));
        }
    }

    let t_base = horizontal.start_time();
    let geod_steps = (n_t * 8).max(64);
    let mut columns: Vec<Vec<Point>> = Vec::with_capacity(n_s + 1);
    for (j, s) in ss.iter().enumerate() {
        let (start, _) = horizontal.eval(t_base + s);
        let leaf_curve = geodesic(spec, &start, &transported[j], a, geod_steps)?;
        if leaf_curve
            .points()
            .iter()
            .any(|p| p.amax() > BLOWUP_LIMIT)
        {
            return Err(RectangleError::IncompleteLeaf);
        }
        let column = ts
            .iter()
            .map(|&t| leaf_curve.eval(t).0)
            .collect::<Vec<_>>();
        columns.push(column);
    }

    // Reindex to points[i][j] = sigma(t_i, s_j).
    let points = (0..=n_t)
        .map(|i| (0..=n_s).map(|j| columns[j][i].clone()).collect())
        .collect();

    Ok(Rectangle {
        ts,
        ss,
        points,
        vertical: vertical.clone(),
        horizontal: horizontal.clone(),
    })
}

/// Chain rectangles across a partition of the vertical edge: split the
/// vertical curve at the given interior knots, build the stage rectangle
/// from each piece against the running horizontal edge, and take each
/// stage's final horizontal edge as the next generator. The pieces inherit
/// the geodesic property from the vertical curve, so each stage satisfies
/// the preconditions of [`build_rectangle`].
pub fn build_rectangle_chain(
    spec: &ManifoldSpec,
    vertical: &Curve,
    horizontal: &Curve,
    knots: &[f64],
    grid: (usize, usize),
) -> Result<Rectangle, RectangleError> {
    let (n_t, n_s) = grid;
    assert!(n_t >= 1 && n_s >= 1);
    let (t0, t1) = (vertical.start_time(), vertical.end_time());
    assert!(
        knots.windows(2).all(|w| w[0] < w[1])
            && knots.iter().all(|&k| k > t0 && k < t1),
        "knots must be strictly increasing interior times"
    );
    let mut cuts = vec![t0];
    cuts.extend_from_slice(knots);
    cuts.push(t1);

    // A fine s-grid keeps the finite-difference velocities of the
    // intermediate horizontal edges within the horizontality threshold.
    let refine = (1024usize).div_ceil(n_s);
    let ns_fine = n_s * refine;

    let total = t1 - t0;
    let mut ts = vec![0.0];
    let mut rows: Vec<Vec<Point>> = Vec::new();
    let mut first_stage_ss: Option<Vec<f64>> = None;
    let mut current_horizontal = horizontal.clone();

    for pair in cuts.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let piece = vertical.resampled(a, b, 33);
        let stage_nt = ((n_t as f64) * (b - a) / total).ceil().max(1.0) as usize;
        let rect = build_rectangle(spec, &piece, &current_horizontal, (stage_nt, ns_fine))?;
        if first_stage_ss.is_none() {
            first_stage_ss = Some(rect.ss.clone());
        }
        // Append this stage's rows, skipping its base row (already present
        // as the previous stage's top row, or as the corner row for the
        // first stage).
        if rows.is_empty() {
            rows.push(rect.points[0].clone());
        }
        for (i, &t) in rect.ts.iter().enumerate().skip(1) {
            ts.push(a - t0 + t);
            rows.push(rect.points[i].clone());
        }
        // The next horizontal generator is the top edge, with
        // finite-difference velocities on the fine s-grid.
        let top = rows.last().expect("stage added rows").clone();
        let ss = &rect.ss;
        let m = ss.len() - 1;
        let mut velocities = Vec::with_capacity(ss.len());
        for j in 0..=m {
            let v = if j == 0 {
                let h = ss[1] - ss[0];
                (&top[1] * 4.0 - &top[2] - &top[0] * 3.0) / (2.0 * h)
            } else if j == m {
                let h = ss[m] - ss[m - 1];
                (&top[m] * 3.0 - &top[m - 1] * 4.0 + &top[m - 2]) / (2.0 * h)
            } else {
                (&top[j + 1] - &top[j - 1]) / (ss[j + 1] - ss[j - 1])
            };
            velocities.push(v);
        }
        current_horizontal = Curve::new(ss.clone(), top, velocities);
    }

    // Subsample the fine s-grid back to the requested resolution.
    let ss_fine = first_stage_ss.expect("at least one stage");
    let ss: Vec<f64> = (0..=n_s).map(|j| ss_fine[j * refine]).collect();
    let points: Vec<Vec<Point>> = rows
        .iter()
        .map(|row| (0..=n_s).map(|j| row[j * refine].clone()).collect())
        .collect();
    Ok(Rectangle {
        ts,
        ss,
        points,
        vertical: vertical.clone(),
        horizontal: horizontal.clone(),
    })
}

/// Verify the rectangle axioms on the grid: `t`-slices are vertical,
/// `s`-slices are horizontal, and the initial edges reproduce the
/// generating curves. Returns the largest residual found.
pub fn verify_rectangle(rect: &Rectangle, spec: &ManifoldSpec) -> Result<f64, RectangleError> {
    let chart = spec.chart;
    let dim = chart.dim();
    let n = chart.n;
    let n_t = rect.ts.len() - 1;
    let n_s = rect.ss.len() - 1;
    let mut worst = 0.0f64;

    // Finite-difference tangent along a grid line: central inside,
    // second-order one-sided at the ends (uniform spacing).
    let tangent = |values: &dyn Fn(usize) -> Point, idx: usize, count: usize, params: &[f64]| {
        if count == 1 {
            return (values(1) - values(0)) / (params[1] - params[0]);
        }
        if idx == 0 {
            let h = params[1] - params[0];
            (values(0) * -3.0 + values(1) * 4.0 - values(2)) / (2.0 * h)
        } else if idx == count {
            let h = params[count] - params[count - 1];
            (values(count) * 3.0 - values(count - 1) * 4.0 + values(count - 2)) / (2.0 * h)
        } else {
            (values(idx + 1) - values(idx - 1)) / (params[idx + 1] - params[idx - 1])
        }
    };

    for j in 0..=n_s {
        for i in 0..=n_t {
            // t-direction tangent: must be vertical (no x components).
            let f = |i2: usize| rect.points[i2][j].clone();
            let dt = tangent(&f, i, n_t, &rect.ts);
            worst = worst.max(dt.rows(0, n).amax());

            // s-direction tangent: must be horizontal (no Y frame components).
            let g = |j2: usize| rect.points[i][j2].clone();
            let ds = tangent(&g, j, n_s, &rect.ss);
            let jets = spec.t_jets(&rect.points[i][j])?;
            let frame = adapted_frame_from_jets(chart, &jets);
            let w = frame.to_frame(&ds);
            worst = worst.max(w.rows(n, dim - n).amax());
        }
    }

    // Edge reproduction.
    let t_base = rect.vertical.start_time();
    for (i, &t) in rect.ts.iter().enumerate() {
        let (expected, _) = rect.vertical.eval(t_base + t);
        worst = worst.max((&rect.points[i][0] - expected).amax());
    }
    let s_base = rect.horizontal.start_time();
    for (j, &s) in rect.ss.iter().enumerate() {
        let (expected, _) = rect.horizontal.eval(s_base + s);
        worst = worst.max((&rect.points[0][j] - expected).amax());
    }
    Ok(worst)
}
