//! The per-subcommand check suites. Each suite evaluates its checks on the
//! seeded sampling plan and contributes records and artifacts to the report.

use nalgebra::{DMatrix, DVector};
use serde_json::{json, Map, Value};

use ksym_core::chart::{adapted_frame_at, ManifoldSpec, Point};
use ksym_core::charclass::{
    curvature_two_form_at, invariant_polynomial_residual, trace_power, wedge_power_residual,
    CharClassError,
};
use ksym_core::connection::{
    coeffs_from_defining_relations, connection_coeffs_at, curvature_at, curvature_closed_form_at,
    geodesic, parallel_transport, parallelism_residual, torsion_at, Curve,
};
use ksym_core::ehresmann::{build_rectangle, horizontal_integral_curve, verify_rectangle};
use ksym_core::kaehler::{
    almost_complex, levi_civita_comparison, nijenhuis_at, structure_operator, KaehlerError,
};
use ksym_core::normalform::{
    normal_form_chart, parallel_frame_with_gap, tabulate_chart, verify_normal_form, Region,
};
use ksym_core::structures::{
    standard_forms, validate_spec, CheckRecord, CheckStatus, SamplingPlan, Witness,
};

/// Everything a suite needs: the spec, its region, the sampling plan, and
/// the integrator controls.
pub struct SuiteContext<'a> {
    pub spec: &'a ManifoldSpec,
    pub region: &'a Region,
    pub plan: &'a SamplingPlan,
    pub grid: usize,
    pub steps: usize,
}

type SuiteResult = Result<Vec<CheckRecord>, String>;

fn check(id: &str, description: &str, residual: f64, tolerance: f64) -> CheckRecord {
    CheckRecord {
        id: id.to_string(),
        description: description.to_string(),
        status: if residual <= tolerance {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        },
        max_residual: residual,
        witness: None,
    }
}

fn skipped(id: &str, description: &str, residual: f64) -> CheckRecord {
    CheckRecord {
        id: id.to_string(),
        description: description.to_string(),
        status: CheckStatus::Skipped,
        max_residual: residual,
        witness: None,
    }
}

fn failure(id: &str, description: &str, detail: String) -> CheckRecord {
    CheckRecord {
        id: id.to_string(),
        description: description.to_string(),
        status: CheckStatus::Fail,
        max_residual: f64::INFINITY,
        witness: Some(Witness {
            point: vec![],
            vectors: vec![],
            detail,
        }),
    }
}

fn vector_json(v: &DVector<f64>) -> Value {
    json!(v.as_slice().to_vec())
}

fn matrix_json(m: &DMatrix<f64>) -> Value {
    let rows: Vec<Vec<f64>> = (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|c| m[(r, c)]).collect())
        .collect();
    json!(rows)
}

/// Largest sampled curvature component; the flatness probe shared by the
/// rectangle and normal-form suites.
fn flatness_residual(ctx: &SuiteContext) -> Result<f64, String> {
    let mut worst = 0.0f64;
    for p in ctx.plan.sample_points() {
        worst = worst.max(curvature_at(ctx.spec, &p).map_err(|e| e.to_string())?.max_abs());
    }
    Ok(worst)
}

pub fn validate_suite(ctx: &SuiteContext, _artifacts: &mut Map<String, Value>) -> SuiteResult {
    let report = validate_spec(ctx.spec, ctx.plan).map_err(|e| e.to_string())?;
    Ok(report.checks)
}

pub fn connection_suite(ctx: &SuiteContext, artifacts: &mut Map<String, Value>) -> SuiteResult {
    let spec = ctx.spec;
    let chart = spec.chart;
    let dim = spec.dim();
    let n = chart.n;
    let forms = standard_forms(chart);
    let mut uniqueness = 0.0f64;
    let mut structure = 0.0f64;
    let mut parallel = 0.0f64;
    let mut mixed_torsion = 0.0f64;
    let mut leafwise_torsion = 0.0f64;
    for p in ctx.plan.sample_points() {
        let closed = connection_coeffs_at(spec, &p).map_err(|e| e.to_string())?;
        let defined = coeffs_from_defining_relations(spec, &p).map_err(|e| e.to_string())?;
        uniqueness = uniqueness.max(closed.max_abs_diff(&defined));
        // Y-lower rows vanish; X-lower rows preserve the blocks.
        for b in 0..dim {
            for c in 0..dim {
                for a in n..dim {
                    structure = structure.max(defined.get(a, b, c).abs());
                }
            }
        }
        for a in 0..n {
            for b in 0..dim {
                let b_block = chart.y_block_of(b);
                for c in 0..dim {
                    if chart.y_block_of(c) != b_block {
                        structure = structure.max(defined.get(a, b, c).abs());
                    }
                }
            }
        }
        parallel = parallel.max(parallelism_residual(spec, &forms, &p).map_err(|e| e.to_string())?);
        let t = torsion_at(spec, &p).map_err(|e| e.to_string())?;
        mixed_torsion = mixed_torsion
            .max(t.max_abs_on_blocks(true, false))
            .max(t.max_abs_on_blocks(false, true));
        leafwise_torsion = leafwise_torsion
            .max(t.max_abs_on_blocks(false, false))
            .max(t.max_abs_on_blocks(true, true));
    }
    let base = connection_coeffs_at(spec, &spec.base_point).map_err(|e| e.to_string())?;
    let table: Vec<Vec<Vec<f64>>> = (0..dim)
        .map(|a| {
            (0..dim)
                .map(|b| (0..dim).map(|c| base.get(a, b, c)).collect())
                .collect()
        })
        .collect();
    artifacts.insert("connection_coeffs_base".into(), json!(table));
    Ok(vec![
        check(
            "CN1",
            "uniqueness: defining relations match the closed form",
            uniqueness,
            ctx.plan.tolerance,
        ),
        check(
            "CN2",
            "structure: Y-lower rows vanish and blocks are preserved",
            structure,
            ctx.plan.tolerance,
        ),
        check(
            "CN3",
            "parallelism: nabla omega_alpha = 0",
            parallel,
            1e-9,
        ),
        check("CN4", "mixed torsion T(L, Q) = 0", mixed_torsion, 1e-10),
        check(
            "CN5",
            "leafwise torsion T(L, L) = T(Q, Q) = 0",
            leafwise_torsion,
            1e-10,
        ),
    ])
}

pub fn curvature_suite(ctx: &SuiteContext, artifacts: &mut Map<String, Value>) -> SuiteResult {
    let spec = ctx.spec;
    let dim = spec.dim();
    let mut route_gap = 0.0f64;
    let mut leafwise = 0.0f64;
    let mut antisymmetry = 0.0f64;
    let mut full = 0.0f64;
    for p in ctx.plan.sample_points() {
        let r = curvature_at(spec, &p).map_err(|e| e.to_string())?;
        let closed = curvature_closed_form_at(spec, &p).map_err(|e| e.to_string())?;
        route_gap = route_gap.max(r.max_abs_diff(&closed));
        leafwise = leafwise
            .max(r.max_abs_on_blocks(false, false))
            .max(r.max_abs_on_blocks(true, true));
        full = full.max(r.max_abs());
        for a in 0..dim {
            for b in 0..dim {
                for c in 0..dim {
                    for d in 0..dim {
                        antisymmetry =
                            antisymmetry.max((r.get(a, b, c, d) + r.get(b, a, c, d)).abs());
                    }
                }
            }
        }
    }
    let base = curvature_at(spec, &spec.base_point).map_err(|e| e.to_string())?;
    let table: Vec<Vec<Vec<Vec<f64>>>> = (0..dim)
        .map(|a| {
            (0..dim)
                .map(|b| {
                    (0..dim)
                        .map(|c| (0..dim).map(|d| base.get(a, b, c, d)).collect())
                        .collect()
                })
                .collect()
        })
        .collect();
    artifacts.insert("curvature_base".into(), json!(table));
    let mut checks = vec![
        check(
            "CU1",
            "bracket-definition curvature matches the closed form",
            route_gap,
            1e-9,
        ),
        check(
            "CU2",
            "leafwise curvature R(L, L) = R(Q, Q) = 0",
            leafwise,
            1e-9,
        ),
        check("CU3", "antisymmetry in the first pair", antisymmetry, 1e-12),
    ];
    if spec.chart.k >= 2 {
        checks.push(check(
            "CU4",
            "k >= 2 rigidity: the whole curvature vanishes",
            full,
            1e-9,
        ));
    } else {
        checks.push(skipped(
            "CU4",
            "k >= 2 rigidity: the whole curvature vanishes (needs k >= 2)",
            0.0,
        ));
    }
    Ok(checks)
}

fn reversed(curve: &Curve) -> Curve {
    let total = curve.end_time() - curve.start_time();
    let mut times: Vec<f64> = curve
        .times()
        .iter()
        .rev()
        .map(|&t| total - (t - curve.start_time()))
        .collect();
    // Guard against rounding producing equal neighbors.
    for i in 1..times.len() {
        if times[i] <= times[i - 1] {
            times[i] = times[i - 1] + f64::EPSILON;
        }
    }
    let points: Vec<Point> = curve.points().iter().rev().cloned().collect();
    let velocities: Vec<DVector<f64>> = curve.velocities().iter().rev().map(|v| -v).collect();
    Curve::new(times, points, velocities)
}

pub fn transport_suite(ctx: &SuiteContext, artifacts: &mut Map<String, Value>) -> SuiteResult {
    let spec = ctx.spec;
    let dim = spec.dim();
    let base = &spec.base_point;

    // TR1: transport along a vertical segment keeps frame components.
    let mut vertical_gap = 0.0f64;
    {
        let mut top = base.clone();
        top[dim - 1] += 0.8;
        let curve = Curve::line(base.clone(), top.clone(), 5);
        let v0 = DVector::from_fn(dim, |i, _| 0.2 + 0.1 * i as f64);
        let v1 = parallel_transport(spec, &curve, &v0, ctx.steps.max(8)).map_err(|e| e.to_string())?;
        let w0 = adapted_frame_at(spec, base).map_err(|e| e.to_string())?.to_frame(&v0);
        let w1 = adapted_frame_at(spec, &top).map_err(|e| e.to_string())?.to_frame(&v1);
        vertical_gap = vertical_gap.max((w0 - w1).amax());
    }

    // TR2: a closed loop inside a leaf returns the vector.
    let mut loop_gap = 0.0f64;
    {
        let corner = |dy1: f64, dy2: f64| {
            let mut p = base.clone();
            p[spec.chart.n] += dy1;
            if dim > spec.chart.n + 1 {
                p[spec.chart.n + 1] += dy2;
            }
            p
        };
        let loop_corners = [
            corner(0.0, 0.0),
            corner(0.6, 0.0),
            corner(0.6, 0.5),
            corner(0.0, 0.0),
        ];
        let v0 = DVector::from_fn(dim, |i, _| 0.3 - 0.05 * i as f64);
        let mut v = v0.clone();
        for pair in loop_corners.windows(2) {
            if (&pair[1] - &pair[0]).amax() == 0.0 {
                continue;
            }
            let leg = Curve::line(pair[0].clone(), pair[1].clone(), 5);
            v = parallel_transport(spec, &leg, &v, ctx.steps.max(8)).map_err(|e| e.to_string())?;
        }
        loop_gap = loop_gap.max((&v - &v0).amax());
    }

    // TR3: transport out and back along a horizontal curve is the identity.
    let mut round_trip = 0.0f64;
    let mut direction = vec![0.0; spec.chart.n];
    direction[0] = 1.0;
    let out_curve = horizontal_integral_curve(spec, base, &direction, 0.5, ctx.steps.max(64))
        .map_err(|e| e.to_string())?;
    {
        let v0 = DVector::from_fn(dim, |i, _| 1.0 - 0.1 * i as f64);
        let there =
            parallel_transport(spec, &out_curve, &v0, ctx.steps.max(64)).map_err(|e| e.to_string())?;
        let back_curve = reversed(&out_curve);
        let back = parallel_transport(spec, &back_curve, &there, ctx.steps.max(64))
            .map_err(|e| e.to_string())?;
        round_trip = round_trip.max((&back - &v0).amax());
    }

    // Artifact: the leaf velocity transported along the horizontal curve.
    {
        let mut v0 = DVector::zeros(dim);
        v0[spec.chart.n] = 1.0;
        let moved = parallel_transport(spec, &out_curve, &v0, ctx.steps.max(64))
            .map_err(|e| e.to_string())?;
        artifacts.insert("transported_leaf_vector".into(), vector_json(&moved));
        artifacts.insert(
            "transport_endpoint".into(),
            vector_json(out_curve.end_point()),
        );
    }

    Ok(vec![
        check(
            "TR1",
            "transport along vertical curves preserves frame components",
            vertical_gap,
            1e-12,
        ),
        check(
            "TR2",
            "transport around a leafwise loop returns the vector",
            loop_gap,
            ctx.plan.tolerance,
        ),
        check(
            "TR3",
            "transport out and back along a horizontal curve is the identity",
            round_trip,
            1e-8,
        ),
    ])
}

pub fn geodesic_suite(ctx: &SuiteContext, artifacts: &mut Map<String, Value>) -> SuiteResult {
    let spec = ctx.spec;
    let dim = spec.dim();
    let n = spec.chart.n;
    let base = &spec.base_point;

    // GE1/GE3: vertical geodesics are straight and stay in the leaf.
    let mut v0 = DVector::zeros(dim);
    v0[n] = 1.0;
    let curve = geodesic(spec, base, &v0, 1.0, ctx.steps.max(32)).map_err(|e| e.to_string())?;
    let expected = base + &v0;
    let vertical_gap = (curve.end_point() - expected).amax();
    let mut leaf_escape = 0.0f64;
    for v in curve.velocities() {
        leaf_escape = leaf_escape.max(v.rows(0, n).amax());
    }

    // GE2: self-convergence of the integrator on a horizontal shot.
    let convergence = {
        let v0 = adapted_frame_at(spec, base).map_err(|e| e.to_string())?.column(0);
        let steps = ctx.steps.max(200);
        let coarse = geodesic(spec, base, &v0, 1.0, steps).map_err(|e| e.to_string())?;
        let fine = geodesic(spec, base, &v0, 1.0, steps * 10).map_err(|e| e.to_string())?;
        artifacts.insert("geodesic_endpoint".into(), vector_json(fine.end_point()));
        (coarse.end_point() - fine.end_point()).amax()
    };

    Ok(vec![
        check(
            "GE1",
            "vertical geodesics are straight coordinate lines",
            vertical_gap,
            1e-9,
        ),
        check(
            "GE2",
            "endpoint agrees with a 10x finer integration",
            convergence,
            1e-8,
        ),
        check(
            "GE3",
            "a leaf velocity stays leafwise along its geodesic",
            leaf_escape,
            1e-12,
        ),
    ])
}

pub fn rectangle_suite(ctx: &SuiteContext, artifacts: &mut Map<String, Value>) -> SuiteResult {
    let spec = ctx.spec;
    let dim = spec.dim();
    let n = spec.chart.n;
    let base = &spec.base_point;
    let mut v0 = DVector::zeros(dim);
    v0[n] = 1.0;
    let mut direction = vec![0.0; n];
    direction[0] = 1.0;

    let vertical = match geodesic(spec, base, &v0, 1.0, ctx.steps.max(64)) {
        Ok(c) => c,
        Err(e) => {
            return Ok(vec![failure(
                "RE1",
                "rectangle construction from the base point",
                e.to_string(),
            )])
        }
    };
    let horizontal =
        match horizontal_integral_curve(spec, base, &direction, 1.0, ctx.steps.max(64)) {
            Ok(c) => c,
            Err(e) => {
                return Ok(vec![failure(
                    "RE1",
                    "rectangle construction from the base point",
                    e.to_string(),
                )])
            }
        };
    let rect = match build_rectangle(spec, &vertical, &horizontal, (ctx.grid, ctx.grid)) {
        Ok(r) => r,
        Err(e) => {
            return Ok(vec![failure(
                "RE1",
                "rectangle construction from the base point",
                e.to_string(),
            )])
        }
    };
    artifacts.insert(
        "rectangle_grid".into(),
        serde_json::to_value(rect.to_grid()).expect("grid serializes"),
    );

    let residual = verify_rectangle(&rect, spec).map_err(|e| e.to_string())?;
    let flat = flatness_residual(ctx)? <= 1e-9;
    let mut checks = vec![check(
        "RE1",
        "rectangle construction: edges valid, transported velocity leafwise",
        0.0,
        1.0,
    )];
    if flat {
        // A true axiom defect persists under grid refinement; the
        // finite-difference stencil noise of the verifier shrinks with the
        // spacing. Certify the residual vanishes in the grid limit.
        let fine_rect = build_rectangle(spec, &vertical, &horizontal, (2 * ctx.grid, 2 * ctx.grid))
            .map_err(|e| e.to_string())?;
        let fine = verify_rectangle(&fine_rect, spec).map_err(|e| e.to_string())?;
        let tolerance = (0.6 * residual).max(1e-6);
        checks.push(check(
            "RE2",
            "rectangle axioms: slice residuals vanish under grid refinement",
            fine,
            tolerance,
        ));
    } else {
        checks.push(skipped(
            "RE2",
            "rectangle axioms (asserted on flat specs; the geodesic sweep \
             tilts at second order under curvature, residual reported)",
            residual,
        ));
    }
    Ok(checks)
}

pub fn normal_form_suite(
    ctx: &SuiteContext,
    artifacts: &mut Map<String, Value>,
    skip_when_curved: bool,
) -> SuiteResult {
    let spec = ctx.spec;
    let flat_res = flatness_residual(ctx)?;
    let descriptions = [
        ("NF1", "flatness certificate: sampled curvature vanishes"),
        ("NF2", "parallel frame is path independent across polylines"),
        ("NF3", "parallel frame fields commute; flow chart constructed"),
        ("NF4", "chart carries the forms, foliation, and transversal to the model"),
    ];
    if flat_res > 1e-9 {
        if skip_when_curved {
            let mut checks = vec![skipped(
                descriptions[0].0,
                "flatness certificate (spec is curved; normal form not applicable)",
                flat_res,
            )];
            for (id, d) in &descriptions[1..] {
                checks.push(skipped(id, d, 0.0));
            }
            return Ok(checks);
        }
        let mut checks = vec![check(descriptions[0].0, descriptions[0].1, flat_res, 1e-9)];
        for (id, d) in &descriptions[1..] {
            checks.push(skipped(id, d, 0.0));
        }
        return Ok(checks);
    }

    let mut checks = vec![check(descriptions[0].0, descriptions[0].1, flat_res, 1e-9)];

    // NF2: path independence at two probe points of the region.
    let mut gap = 0.0f64;
    let probes = [
        ctx.region.max.clone() * 0.8,
        ctx.region.min.clone() * 0.6,
    ];
    for p in &probes {
        match parallel_frame_with_gap(spec, &spec.base_point, p) {
            Ok((_, g)) => gap = gap.max(g),
            Err(e) => {
                checks.push(failure(descriptions[1].0, descriptions[1].1, e.to_string()));
                for (id, d) in &descriptions[2..] {
                    checks.push(skipped(id, d, 0.0));
                }
                return Ok(checks);
            }
        }
    }
    checks.push(check(descriptions[1].0, descriptions[1].1, gap, 1e-7));

    let map = match normal_form_chart(spec, &spec.base_point, ctx.region.clone()) {
        Ok(m) => m,
        Err(e) => {
            checks.push(failure(descriptions[2].0, descriptions[2].1, e.to_string()));
            checks.push(skipped(descriptions[3].0, descriptions[3].1, 0.0));
            return Ok(checks);
        }
    };
    checks.push(check(descriptions[2].0, descriptions[2].1, 0.0, 1.0));

    let residual = verify_normal_form(&map, spec, ctx.grid).map_err(|e| e.to_string())?;
    checks.push(check(descriptions[3].0, descriptions[3].1, residual, 1e-5));

    let pairs = tabulate_chart(&map, 10).map_err(|e| e.to_string())?;
    let tabulated: Vec<Value> = pairs
        .iter()
        .map(|(p, a)| json!({ "p": p, "p_new": a }))
        .collect();
    artifacts.insert("normal_form_pairs".into(), json!(tabulated));
    Ok(checks)
}

pub fn kaehler_suite(ctx: &SuiteContext, artifacts: &mut Map<String, Value>) -> SuiteResult {
    let spec = ctx.spec;
    let chart = spec.chart;
    let n = chart.n;
    let id2n = DMatrix::identity(2 * n, 2 * n);
    let mut w_std = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        w_std[(i, n + i)] = -0.5;
        w_std[(n + i, i)] = 0.5;
    }

    let mut j_square = 0.0f64;
    let mut block_swap = 0.0f64;
    let mut compat = 0.0f64;
    let mut skewness = 0.0f64;
    let mut spd_ok = true;
    let sample_cap = ctx.plan.sample_count.min(20);
    let points: Vec<Point> = ctx.plan.sample_points().into_iter().take(sample_cap).collect();
    for p in &points {
        for alpha in 1..=chart.k {
            let op = structure_operator(spec, alpha, p).map_err(|e| e.to_string())?;
            let ga = &op.gram * &op.a;
            skewness = skewness.max((&ga + ga.transpose()).amax());
            let ac = match almost_complex(spec, alpha, p) {
                Ok(ac) => ac,
                Err(KaehlerError::PropertyViolation { identity, residual }) => {
                    return Ok(vec![failure(
                        "KA1",
                        "almost complex structure construction",
                        format!("{identity} violated with residual {residual:e}"),
                    )]);
                }
                Err(e) => return Err(e.to_string()),
            };
            j_square = j_square.max((&ac.j * &ac.j + &id2n).amax());
            block_swap = block_swap
                .max(ac.j.view((0, 0), (n, n)).amax())
                .max(ac.j.view((n, n), (n, n)).amax());
            spd_ok &= ac.ghat.clone().cholesky().is_some();
            compat = compat.max((&ac.ghat * &ac.j - &w_std).amax());
        }
    }

    // Base-point tensors as artifacts.
    {
        let ac = almost_complex(spec, 1, &spec.base_point).map_err(|e| e.to_string())?;
        artifacts.insert("j_base".into(), matrix_json(&ac.j));
        artifacts.insert("ghat_base".into(), matrix_json(&ac.ghat));
    }

    // Nijenhuis values at up to 10 points, with the antisymmetry check.
    let mut nijenhuis_antisymmetry = 0.0f64;
    let mut nijenhuis_values = Vec::new();
    for p in points.iter().take(10) {
        let nuv = nijenhuis_at(spec, 1, p, n, 0).map_err(|e| e.to_string())?;
        let nvu = nijenhuis_at(spec, 1, p, 0, n).map_err(|e| e.to_string())?;
        nijenhuis_antisymmetry = nijenhuis_antisymmetry.max((&nuv + &nvu).amax());
        nijenhuis_values.push(json!({
            "point": p.as_slice().to_vec(),
            "n_y1_x1": nuv.as_slice().to_vec(),
        }));
    }
    artifacts.insert("nijenhuis".into(), json!(nijenhuis_values));

    let mut checks = vec![
        check("KA1", "J^2 = -I on L_alpha + Q", j_square, 1e-12),
        check(
            "KA2",
            "J swaps the L_alpha and Q blocks",
            block_swap,
            1e-12,
        ),
        check(
            "KA3",
            "derived metric is SPD and omega(u, v) = ghat(u, J v)",
            if spd_ok { compat } else { f64::INFINITY },
            1e-10,
        ),
        check(
            "KA4",
            "structure operator is metric-skew (G A antisymmetric)",
            skewness,
            1e-12,
        ),
        check(
            "KA5",
            "Nijenhuis tensor antisymmetry at sampled points",
            nijenhuis_antisymmetry,
            1e-5,
        ),
    ];

    // KA6: Levi-Civita diagnostic, informational.
    match levi_civita_comparison(spec, &spec.base_point) {
        Ok(dev) => {
            artifacts.insert("levi_civita_deviation".into(), json!(dev));
            checks.push(skipped(
                "KA6",
                "Levi-Civita deviation from the canonical connection (diagnostic)",
                dev,
            ));
        }
        Err(e) => {
            checks.push(skipped(
                "KA6",
                &format!("Levi-Civita diagnostic not applicable: {e}"),
                0.0,
            ));
        }
    }
    Ok(checks)
}

pub fn charclass_suite(ctx: &SuiteContext, artifacts: &mut Map<String, Value>) -> SuiteResult {
    let spec = ctx.spec;
    let n = spec.chart.n;
    let mut slot_violation = 0.0f64;
    let mut wedge = 0.0f64;
    let mut invariant = 0.0f64;
    let sample_cap = ctx.plan.sample_count.min(25);
    for p in ctx.plan.sample_points().into_iter().take(sample_cap) {
        match curvature_two_form_at(spec, &p) {
            Ok(_) => {}
            Err(CharClassError::StructureViolation { value, .. }) => {
                slot_violation = slot_violation.max(value.abs());
                continue;
            }
            Err(e) => return Err(e.to_string()),
        }
        wedge = wedge.max(wedge_power_residual(spec, &p, n + 1).map_err(|e| e.to_string())?);
        invariant = invariant
            .max(invariant_polynomial_residual(spec, &p, n + 1).map_err(|e| e.to_string())?);
    }
    {
        let base = &spec.base_point;
        let omega = curvature_two_form_at(spec, base).map_err(|e| e.to_string())?;
        artifacts.insert(
            "curvature_two_form_base".into(),
            serde_json::to_value(&omega).expect("form serializes"),
        );
        let tr = trace_power(spec, base, 1).map_err(|e| e.to_string())?;
        artifacts.insert(
            "trace_power_1_base".into(),
            serde_json::to_value(&tr).expect("form serializes"),
        );
    }
    Ok(vec![
        check(
            "CH1",
            "curvature 2-form lives on the dx ^ dy slots",
            slot_violation,
            1e-10,
        ),
        check(
            "CH2",
            "wedge power beyond n vanishes",
            wedge,
            1e-12,
        ),
        check(
            "CH3",
            "trace powers of degree beyond 2n vanish",
            invariant,
            1e-12,
        ),
    ])
}
