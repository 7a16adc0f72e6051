use std::f64::consts::PI;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use perilib_core::coords::derive_mass_params;
use perilib_core::dynamics::{build_parameter_chain, check_theorem_main1, ChainInputs};
use perilib_core::hamiltonians::vector_field;
use perilib_core::kepler::{solve_kepler, solve_radial};
use perilib_core::normalform::{nqp_primitive, poisson_bracket, tf_average_split, DeskModel, Frequencies};
use perilib_core::potentials::{f_eps_eval, u_hat};
use perilib_core::{ActionAngleState, ChartState, Frame, HamiltonianIndex, HamiltonianSpec, QuadratureSpec};

fn kepler(c: &mut Criterion) {
    c.bench_function("solve_kepler e=0.9", |b| b.iter(|| solve_kepler(black_box(0.9), black_box(1.3), 1e-14)));
    c.bench_function("solve_radial", |b| b.iter(|| solve_radial(black_box(2.7), 1e-14)));
}

fn potentials(c: &mut Criterion) {
    let q = QuadratureSpec::default();
    c.bench_function("u_hat 256 nodes", |b| b.iter(|| u_hat(black_box(0.3), 1.0, black_box(0.4), black_box(0.7), &q)));
    c.bench_function("f_eps_eval 256 nodes", |b| b.iter(|| f_eps_eval(black_box(0.3), black_box(0.8), &q)));
}

fn flow(c: &mut Criterion) {
    let q = QuadratureSpec::default();
    let masses = derive_mass_params(1.0, 1.0, Frame::M0centric).unwrap();
    let spec = HamiltonianSpec::new(HamiltonianIndex::H2, 1.0, 1.0, masses).unwrap();
    let st = ChartState::ActionAngle(ActionAngleState::new(0.9, 0.3, 12.0, PI));
    c.bench_function("vector_field action-angle", |b| b.iter(|| vector_field(&spec, black_box(&st), &q)));

    let p = build_parameter_chain(&ChainInputs::default()).unwrap();
    let sur = ChainInputs::default().surrogates;
    c.bench_function("check_theorem", |b| b.iter(|| check_theorem_main1(&p.spec, &p.domain, 10, &sur)));
}

fn normal_form(c: &mut Criterion) {
    let (h, f) = DeskModel::default().build().unwrap();
    let (_, osc) = tf_average_split(&f);
    let freq = Frequencies::from_series(&h, vec![]).unwrap();
    let mut g = c.benchmark_group("normal form");
    g.sample_size(10);
    g.bench_function("poisson_bracket desk", |b| b.iter(|| poisson_bracket(black_box(&f), black_box(&h))));
    g.bench_function("nqp_primitive desk", |b| b.iter(|| nqp_primitive(black_box(&osc), &freq)));
    g.finish();
}

criterion_group!(benches, kepler, potentials, flow, normal_form);
criterion_main!(benches);
