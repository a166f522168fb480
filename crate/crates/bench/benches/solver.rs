use std::f64::consts::PI;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use parabolic::parafit::{fit, Method, SearchOptions};
use parabolic::relax::{build_relaxation, find_substitutable, parse_instance, Variant};
use parabolic::verify::{certify_max, check_conditions, CERT_TOL};
use parabolic::{Approximable, BoxDomain, FuncDef, Paraboloid, ParaboloidSet, Side};

const SIN_TABLE: &str = include_str!("../../../fixtures/tables/sin_exp_e01.json");
const SIN_CAP: &str = include_str!("../../../fixtures/instances/sin_cap.json");

fn certification(c: &mut Criterion) {
    let sin = FuncDef::by_name("sin").unwrap();
    let dom = BoxDomain::interval(-PI / 2.0, 1.5 * PI).unwrap();
    let set = ParaboloidSet::new(vec![
        Paraboloid::univariate(-0.05375, 0.16887, -0.654036),
        Paraboloid::univariate(-0.20301, 0.63779, -0.110597),
        Paraboloid::univariate(-0.39804, 1.25049, -0.047268),
    ]);
    c.bench_function("check_conditions sin eps 0.1", |b| {
        b.iter(|| check_conditions(black_box(&set), &sin, &dom, 0.1, Side::Below, CERT_TOL).unwrap())
    });
    let p = Paraboloid::univariate(-0.2, 0.7, -0.1);
    let g = |x: &[f64]| p.eval(x) - sin.value(x);
    c.bench_function("certify_max paraboloid minus sin", |b| {
        b.iter(|| certify_max(&g, black_box(3.0), &dom, 1e-7).unwrap())
    });
}

fn fitting(c: &mut Criterion) {
    let sin = FuncDef::by_name("sin").unwrap();
    let dom = BoxDomain::interval(-PI / 2.0, 1.5 * PI).unwrap();
    let opts = SearchOptions::default();
    let mut group = c.benchmark_group("fit");
    group.sample_size(10);
    group.bench_function("practical sin eps 1", |b| {
        b.iter(|| fit(&sin, &dom, black_box(1.0), Side::Below, Method::Practical, &opts).unwrap())
    });
    group.finish();
}

fn relaxation(c: &mut Criterion) {
    let inst = parse_instance(SIN_CAP).unwrap();
    c.bench_function("relax sin_cap para", |b| {
        b.iter(|| {
            let mut table = parabolic::lookup::LookupTable::from_json(SIN_TABLE).unwrap();
            let plan = find_substitutable(black_box(&inst), &mut table, 0.1).unwrap();
            build_relaxation(&inst, &plan, Variant::Para).unwrap()
        })
    });
}

criterion_group!(benches, certification, fitting, relaxation);
criterion_main!(benches);
