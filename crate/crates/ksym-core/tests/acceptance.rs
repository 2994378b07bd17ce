//! Acceptance suite: one test per criterion, each printing a pass/fail line
//! with its residuals and runtime. Tolerances are pinned in the assertions.

mod common;

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;
use ksym_core::chart::{adapted_frame_at, ManifoldSpec};
use ksym_core::charclass::{invariant_polynomial_residual, wedge_power_residual};
use ksym_core::connection::{
    coeffs_from_defining_relations, connection_coeffs_at, curvature_at, curvature_closed_form_at,
    geodesic, parallel_transport, parallelism_residual, torsion_at,
};
use ksym_core::ehresmann::{build_rectangle, horizontal_integral_curve, verify_rectangle};
use ksym_core::expr::{eval_jet2, format_field, parse_scalar_field, Expr, ScalarField};
use ksym_core::kaehler::almost_complex;
use ksym_core::normalform::{normal_form_chart, verify_normal_form, Region};
use ksym_core::structures::{
    eval_two_form, standard_forms, standard_omega, validate_spec, SamplingPlan,
};

struct Criterion {
    name: &'static str,
    budget_seconds: f64,
    start: Instant,
}

impl Criterion {
    fn begin(name: &'static str, budget_seconds: f64) -> Criterion {
        Criterion {
            name,
            budget_seconds,
            start: Instant::now(),
        }
    }

    fn finish(self, ok: bool, detail: String) {
        let elapsed = self.start.elapsed().as_secs_f64();
        let verdict = if ok { "pass" } else { "fail" };
        println!(
            "criterion {}: {verdict} ({detail}, {elapsed:.2} s)",
            self.name
        );
        assert!(ok, "criterion {} failed: {detail}", self.name);
        assert!(
            elapsed < self.budget_seconds,
            "criterion {} exceeded its {} s budget ({elapsed:.2} s)",
            self.name,
            self.budget_seconds
        );
    }
}

/// 1. The standard forms pair the frame fields to -(1/2) delta delta,
///    exactly, for all indices at n = 2, k = 2.
#[test]
fn criterion_01_convention_fidelity() {
    let c = Criterion::begin("01 convention-fidelity", 1.0);
    let mut ok = true;
    for spec in [flat22(), k2n2_random(7)] {
        let chart = spec.chart;
        let p = DVector::from_fn(6, |i, _| 0.1 * i as f64 - 0.2);
        let frame = adapted_frame_at(&spec, &p).unwrap();
        for alpha in 1..=2usize {
            let omega = standard_omega(chart, alpha).unwrap();
            for beta in 1..=2usize {
                for i in 1..=2usize {
                    for j in 1..=2usize {
                        let y = frame.column(chart.y_frame(beta, i));
                        let x = frame.column(chart.x_frame(j));
                        let value = eval_two_form(&omega, &p, &y, &x).unwrap();
                        let expected = if alpha == beta && i == j { -0.5 } else { 0.0 };
                        // Exact equality: no tolerance.
                        ok &= value == expected;
                    }
                }
            }
        }
    }
    c.finish(ok, "omega_a(Y_bi, X_j) = -(1/2) d_ab d_ij exactly".into());
}

fn theorem_fixtures() -> Vec<(&'static str, ManifoldSpec)> {
    vec![
        ("flat", flat22()),
        ("t=x1", tx()),
        ("t=y1^2/2", tq()),
        ("k2-random", k2_random(42)),
    ]
}

/// 2. Parallelism of the forms, vanishing mixed and leafwise torsion, and
///    leafwise curvature on the four fixtures, 100 seeded points each.
#[test]
fn criterion_02_connection_properties() {
    let c = Criterion::begin("02 connection-properties", 10.0);
    let mut worst_par = 0.0f64;
    let mut worst_mixed = 0.0f64;
    let mut worst_leaf_t = 0.0f64;
    let mut worst_leaf_r = 0.0f64;
    for (name, spec) in theorem_fixtures() {
        let forms = standard_forms(spec.chart);
        for p in sample_points(spec.dim(), 100, 0xC2) {
            worst_par = worst_par.max(parallelism_residual(&spec, &forms, &p).unwrap());
            let t = torsion_at(&spec, &p).unwrap();
            worst_mixed = worst_mixed
                .max(t.max_abs_on_blocks(true, false))
                .max(t.max_abs_on_blocks(false, true));
            worst_leaf_t = worst_leaf_t
                .max(t.max_abs_on_blocks(false, false))
                .max(t.max_abs_on_blocks(true, true));
            let r = curvature_at(&spec, &p).unwrap();
            worst_leaf_r = worst_leaf_r
                .max(r.max_abs_on_blocks(false, false))
                .max(r.max_abs_on_blocks(true, true));
        }
        let _ = name;
    }
    let ok = worst_par < 1e-9 && worst_mixed < 1e-10 && worst_leaf_t < 1e-10 && worst_leaf_r < 1e-9;
    c.finish(
        ok,
        format!(
            "nabla omega {worst_par:.2e}, mixed torsion {worst_mixed:.2e}, \
             leafwise torsion {worst_leaf_t:.2e}, leafwise curvature {worst_leaf_r:.2e}"
        ),
    );
}

/// 3. Uniqueness: the defining-relations reconstruction equals the closed
///    form on 100 points of each fixture.
#[test]
fn criterion_03_uniqueness() {
    let c = Criterion::begin("03 uniqueness", 10.0);
    let mut worst = 0.0f64;
    for (_, spec) in theorem_fixtures() {
        for p in sample_points(spec.dim(), 100, 0xC3) {
            let closed = connection_coeffs_at(&spec, &p).unwrap();
            let defined = coeffs_from_defining_relations(&spec, &p).unwrap();
            worst = worst.max(closed.max_abs_diff(&defined));
        }
    }
    c.finish(worst < 1e-9, format!("route gap {worst:.2e}"));
}

/// 4. Curvature oracle equivalence on the curved fixture, with the
///    hand-derived components R(Y,X)Y = +Y and R(Y,X)X = -X.
#[test]
fn criterion_04_curvature_equivalence() {
    let c = Criterion::begin("04 curvature-equivalence", 5.0);
    let spec = tq();
    let mut worst_gap = 0.0f64;
    let mut worst_hand = 0.0f64;
    for p in sample_points(2, 100, 0xC4) {
        let brackets = curvature_at(&spec, &p).unwrap();
        let closed = curvature_closed_form_at(&spec, &p).unwrap();
        worst_gap = worst_gap.max(brackets.max_abs_diff(&closed));
        // Frame slots: X = 0, Y = 1.
        worst_hand = worst_hand
            .max((brackets.get(1, 0, 1, 1) - 1.0).abs())
            .max(brackets.get(1, 0, 1, 0).abs())
            .max((brackets.get(1, 0, 0, 0) + 1.0).abs())
            .max(brackets.get(1, 0, 0, 1).abs());
    }
    let ok = worst_gap < 1e-9 && worst_hand < 1e-9;
    c.finish(
        ok,
        format!("route gap {worst_gap:.2e}, hand-value gap {worst_hand:.2e}"),
    );
}

/// 5. k = 2 rigidity: every randomly generated spec that passes validation
///    is flat; a quadratic spec is rejected by validation.
#[test]
fn criterion_05_k2_rigidity() {
    let c = Criterion::begin("05 k2-rigidity", 5.0);
    let mut worst = 0.0f64;
    let mut validated = 0usize;
    for seed in 1..=5u64 {
        for spec in [k2_random(seed), k2n2_random(seed)] {
            let plan = SamplingPlan {
                sample_count: 40,
                ..SamplingPlan::default_for(spec.dim())
            };
            let report = validate_spec(&spec, &plan).unwrap();
            if !report.all_passed() {
                continue;
            }
            validated += 1;
            for p in sample_points(spec.dim(), 100, 0xC5 + seed) {
                worst = worst.max(curvature_at(&spec, &p).unwrap().max_abs());
            }
        }
    }
    // The filter must not be vacuous in either direction.
    let rejected = {
        let spec = k2_invalid(9);
        let plan = SamplingPlan {
            sample_count: 40,
            ..SamplingPlan::default_for(spec.dim())
        };
        !validate_spec(&spec, &plan).unwrap().all_passed()
    };
    let ok = validated == 10 && rejected && worst < 1e-9;
    c.finish(
        ok,
        format!("{validated}/10 validated, curvature {worst:.2e}, quadratic spec rejected {rejected}"),
    );
}

/// 6. Transport closed form: Y along the X integral curve from (0, 1) for
///    time 2 on the curved fixture gives coefficient 1/4 at step 1e-3.
#[test]
fn criterion_06_transport_closed_form() {
    let c = Criterion::begin("06 transport-closed-form", 1.0);
    let spec = tq();
    let steps = 2000; // duration 2 at RK4 step 1e-3
    let curve =
        horizontal_integral_curve(&spec, &DVector::from_vec(vec![0.0, 1.0]), &[1.0], 2.0, steps)
            .unwrap();
    let v = parallel_transport(&spec, &curve, &DVector::from_vec(vec![0.0, 1.0]), steps).unwrap();
    let gap = (v[1] - 0.25).abs().max(v[0].abs());
    c.finish(gap <= 1e-6, format!("coefficient gap {gap:.2e}"));
}

/// 7. Normal form: the flow charts match the hand-derived maps and the
///    verification residual stays below 1e-5 on a 20 x 20 grid.
#[test]
fn criterion_07_normal_form() {
    let c = Criterion::begin("07 normal-form", 30.0);
    let mut worst_map = 0.0f64;
    let mut worst_verify = 0.0f64;
    let origin = DVector::zeros(2);

    struct Case {
        spec: ManifoldSpec,
        half_width: f64,
        expected: fn(f64, f64) -> (f64, f64),
    }
    let cases = [
        Case {
            spec: t1(),
            half_width: 1.5,
            expected: |x, y| (x, y + x),
        },
        Case {
            spec: tx(),
            half_width: 2.5,
            expected: |x, y| (x, y + x * x / 2.0),
        },
    ];
    for case in &cases {
        let region = Region::symmetric(2, case.half_width);
        let map = normal_form_chart(&case.spec, &origin, region).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0xC7);
        for _ in 0..20 {
            let p = DVector::from_fn(2, |_, _| {
                rng.gen_range(-case.half_width..case.half_width)
            });
            let a = map.new_coords(&p).unwrap();
            let (ex, ey) = (case.expected)(p[0], p[1]);
            worst_map = worst_map.max((a[0] - ex).abs()).max((a[1] - ey).abs());
        }
        worst_verify = worst_verify.max(verify_normal_form(&map, &case.spec, 20).unwrap());
    }
    let ok = worst_map < 1e-8 && worst_verify < 1e-5;
    c.finish(
        ok,
        format!("map gap {worst_map:.2e}, verification residual {worst_verify:.2e}"),
    );
}

/// 8. Characteristic vanishing: wedge power h = n + 1 and trace powers of
///    degree above 2n vanish on the curved n = 2 fixture.
#[test]
fn criterion_08_characteristic_vanishing() {
    let c = Criterion::begin("08 characteristic-vanishing", 5.0);
    let spec = curved_n2();
    let mut worst_wedge = 0.0f64;
    let mut worst_trace = 0.0f64;
    for p in sample_points(4, 25, 0xC8) {
        worst_wedge = worst_wedge.max(wedge_power_residual(&spec, &p, 3).unwrap());
        worst_trace = worst_trace.max(invariant_polynomial_residual(&spec, &p, 3).unwrap());
    }
    let ok = worst_wedge < 1e-12 && worst_trace < 1e-12;
    c.finish(
        ok,
        format!("wedge power {worst_wedge:.2e}, trace power {worst_trace:.2e}"),
    );
}

/// 9. Kaehler tensors on every fixture with the identity metric, plus the
///    closed-form J and ghat on the flat n = k = 1 fixture.
#[test]
fn criterion_09_kaehler_tensors() {
    let c = Criterion::begin("09 kaehler-tensors", 2.0);
    let mut worst_sq = 0.0f64;
    let mut worst_swap = 0.0f64;
    let mut worst_compat = 0.0f64;
    let mut spd_ok = true;
    let mut fixtures = theorem_fixtures();
    fixtures.push(("flat11", flat11()));
    for (_, spec) in &fixtures {
        let n = spec.chart.n;
        let id = DMatrix::identity(2 * n, 2 * n);
        for p in sample_points(spec.dim(), 10, 0xC9) {
            for alpha in 1..=spec.chart.k {
                let ac = almost_complex(spec, alpha, &p).unwrap();
                worst_sq = worst_sq.max((&ac.j * &ac.j + &id).amax());
                worst_swap = worst_swap
                    .max(ac.j.view((0, 0), (n, n)).amax())
                    .max(ac.j.view((n, n), (n, n)).amax());
                spd_ok &= ac.ghat.clone().cholesky().is_some();
                // omega(u, v) = ghat(u, J v) on the subspace: Ghat J = W,
                // and W in the (Y, X) frame is [[0, -I/2], [I/2, 0]].
                let mut w = DMatrix::zeros(2 * n, 2 * n);
                for i in 0..n {
                    w[(i, n + i)] = -0.5;
                    w[(n + i, i)] = 0.5;
                }
                worst_compat = worst_compat.max((&ac.ghat * &ac.j - w).amax());
            }
        }
    }
    // Closed-form values on the flat fixture.
    let ac = almost_complex(&flat11(), 1, &DVector::zeros(2)).unwrap();
    let j_target = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
    let ghat_target = DMatrix::from_diagonal_element(2, 2, 0.5);
    let closed_gap = (&ac.j - j_target)
        .amax()
        .max((&ac.ghat - ghat_target).amax());

    let ok = worst_sq < 1e-12
        && worst_swap < 1e-12
        && spd_ok
        && worst_compat < 1e-10
        && closed_gap < 1e-12;
    c.finish(
        ok,
        format!(
            "J^2+I {worst_sq:.2e}, block swap {worst_swap:.2e}, ghat SPD {spd_ok}, \
             compatibility {worst_compat:.2e}, flat closed form {closed_gap:.2e}"
        ),
    );
}

/// 10. Rectangles on the flat and constant-shear fixtures: the verification
///     residual stays below 1e-6 on a 20 x 20 grid and the transported
///     velocities stay tangent to the leaves to 1e-8.
#[test]
fn criterion_10_rectangle() {
    let c = Criterion::begin("10 rectangle", 10.0);
    let mut worst = 0.0f64;
    let mut worst_tangency = 0.0f64;
    for spec in [flat11(), t1()] {
        let origin = DVector::zeros(2);
        let vertical = geodesic(&spec, &origin, &DVector::from_vec(vec![0.0, 1.0]), 1.0, 64)
            .unwrap();
        let horizontal = horizontal_integral_curve(&spec, &origin, &[1.0], 1.0, 64).unwrap();
        let rect = build_rectangle(&spec, &vertical, &horizontal, (20, 20)).unwrap();
        worst = worst.max(verify_rectangle(&rect, &spec).unwrap());
        // Transport the vertical velocity to a few horizontal parameters and
        // measure its leaf tangency directly.
        for s in [0.25, 0.5, 1.0] {
            let partial =
                horizontal_integral_curve(&spec, &origin, &[1.0], s, 64).unwrap();
            let v =
                parallel_transport(&spec, &partial, &DVector::from_vec(vec![0.0, 1.0]), 64)
                    .unwrap();
            worst_tangency = worst_tangency.max(v[0].abs());
        }
    }
    let ok = worst < 1e-6 && worst_tangency < 1e-8;
    c.finish(
        ok,
        format!("rectangle residual {worst:.2e}, tangency {worst_tangency:.2e}"),
    );
}

/// Seeded generator of polynomial/trig expression trees in the parser's
/// image (literals nonnegative; negation is a node).
fn random_expr(rng: &mut ChaCha8Rng, dim_vars: usize, depth: usize) -> Expr {
    if depth == 0 || rng.gen_range(0..10) < 3 {
        return if rng.gen_bool(0.5) {
            Expr::Lit((rng.gen_range(0.0..1.5f64) * 100.0).round() / 100.0)
        } else {
            Expr::Var(rng.gen_range(0..dim_vars))
        };
    }
    let a = Box::new(random_expr(rng, dim_vars, depth - 1));
    match rng.gen_range(0..8) {
        0 | 1 => Expr::Add(a, Box::new(random_expr(rng, dim_vars, depth - 1))),
        2 => Expr::Sub(a, Box::new(random_expr(rng, dim_vars, depth - 1))),
        3 | 4 => Expr::Mul(a, Box::new(random_expr(rng, dim_vars, depth - 1))),
        5 => Expr::Pow(a, 2),
        6 => Expr::Call(ksym_core::expr::Func::Sin, a),
        _ => Expr::Call(ksym_core::expr::Func::Cos, a),
    }
}

/// 11. Jet gradients and Hessians against central finite differences of the
///     plain value evaluator, and the parse/format round trip, over 200
///     seeded expressions.
#[test]
fn criterion_11_ad_soundness() {
    let c = Criterion::begin("11 ad-soundness", 5.0);
    let mut rng = ChaCha8Rng::seed_from_u64(0xCB);
    let mut worst_fd = 0.0f64;
    let mut round_trips = 0usize;
    let step = 1e-4;
    for _ in 0..200 {
        let n = rng.gen_range(1..=2usize);
        let k = rng.gen_range(1..=2usize);
        let dim = n * (k + 1);
        let field = ScalarField {
            ast: random_expr(&mut rng, dim, 3),
            n,
            k,
        };

        // Round trip through the formatter.
        let printed = format_field(&field);
        let reparsed = parse_scalar_field(&printed, n, k).unwrap();
        if reparsed == field {
            round_trips += 1;
        }

        let p: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let jet = eval_jet2(&field, &p).unwrap();
        let value_at = |q: &[f64]| field.eval_value(q).unwrap();

        for i in 0..dim {
            let mut plus = p.clone();
            plus[i] += step;
            let mut minus = p.clone();
            minus[i] -= step;
            let fd = (value_at(&plus) - value_at(&minus)) / (2.0 * step);
            worst_fd = worst_fd.max((jet.grad[i] - fd).abs());
            for j in 0..dim {
                let fd2 = if i == j {
                    (value_at(&plus) - 2.0 * value_at(&p) + value_at(&minus)) / (step * step)
                } else {
                    let mut pp = p.clone();
                    pp[i] += step;
                    pp[j] += step;
                    let mut pm = p.clone();
                    pm[i] += step;
                    pm[j] -= step;
                    let mut mp = p.clone();
                    mp[i] -= step;
                    mp[j] += step;
                    let mut mm = p.clone();
                    mm[i] -= step;
                    mm[j] -= step;
                    (value_at(&pp) - value_at(&pm) - value_at(&mp) + value_at(&mm))
                        / (4.0 * step * step)
                };
                worst_fd = worst_fd.max((jet.hess[(i, j)] - fd2).abs());
            }
        }
    }
    let ok = worst_fd < 1e-5 && round_trips == 200;
    c.finish(
        ok,
        format!("finite-difference gap {worst_fd:.2e}, round trips {round_trips}/200"),
    );
}
