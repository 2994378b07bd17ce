use criterion::{black_box, criterion_group, criterion_main, Criterion};
use nalgebra::{dvector, DVector};

use ksym_bench::{quadratic_spec, wide_spec};
use ksym_core::connection::{
    coeffs_from_defining_relations, connection_coeffs_at, curvature_at, geodesic,
    parallel_transport, Curve,
};
use ksym_core::expr::{eval_jet2, parse_scalar_field};
use ksym_core::structures::{validate_spec, SamplingPlan};

fn bench_jets(c: &mut Criterion) {
    let field = parse_scalar_field("sin(x1*y1)*exp(x2/2)/(1+y3^2)+y4^3", 2, 2).unwrap();
    let p = [0.3, -0.4, 0.8, -0.2, 0.5, 0.9];
    c.bench_function("eval_jet2 dim6", |b| {
        b.iter(|| eval_jet2(black_box(&field), black_box(&p)).unwrap())
    });
}

fn bench_connection(c: &mut Criterion) {
    let spec = wide_spec();
    let p = DVector::from_vec(vec![0.2, -0.3, 0.4, 0.1]);
    c.bench_function("connection_coeffs_at dim4", |b| {
        b.iter(|| connection_coeffs_at(black_box(&spec), black_box(&p)).unwrap())
    });
    c.bench_function("coeffs_from_defining_relations dim4", |b| {
        b.iter(|| coeffs_from_defining_relations(black_box(&spec), black_box(&p)).unwrap())
    });
    c.bench_function("curvature_at dim4", |b| {
        b.iter(|| curvature_at(black_box(&spec), black_box(&p)).unwrap())
    });
}

fn bench_validate(c: &mut Criterion) {
    let spec = wide_spec();
    let plan = SamplingPlan {
        sample_count: 20,
        ..SamplingPlan::default_for(spec.dim())
    };
    c.bench_function("validate_spec 20 samples dim4", |b| {
        b.iter(|| validate_spec(black_box(&spec), black_box(&plan)).unwrap())
    });
}

fn bench_integrators(c: &mut Criterion) {
    let spec = quadratic_spec();
    let p0 = dvector![0.0, 1.0];
    let v0 = dvector![1.0, -0.5];
    c.bench_function("geodesic 200 steps", |b| {
        b.iter(|| geodesic(black_box(&spec), &p0, &v0, 1.0, 200).unwrap())
    });
    let curve = Curve::line(dvector![0.0, 0.5], dvector![1.0, 0.25], 17);
    let w = dvector![0.0, 1.0];
    c.bench_function("parallel_transport 200 steps", |b| {
        b.iter(|| parallel_transport(black_box(&spec), &curve, &w, 200).unwrap())
    });
}

criterion_group!(
    benches,
    bench_jets,
    bench_connection,
    bench_validate,
    bench_integrators
);
criterion_main!(benches);
