use num_complex::Complex64;
use perilib_core::normalform::*;

fn re(v: f64) -> Complex64 {
    Complex64::new(v, 0.0)
}

fn desk() -> (DeskModel, TFSeries, TFSeries) {
    let m = DeskModel::default();
    let (h, f) = m.build().unwrap();
    (m, h, f)
}

#[test]
fn desk_perturbation_round_trips() {
    let m = DeskModel::default();
    let (_, f) = m.build().unwrap();
    let quad = perilib_core::QuadratureSpec::new(m.quad_nodes).unwrap();
    let l = m.spec.lambda;
    let mut worst: f64 = 0.0;
    for &(g, gam, y, x) in &[(l - 0.013, 0.4, 10.7, 3.1), (l - 0.041, 2.9, 13.2, 3.2), (l - 0.002, 5.5, 11.9, 3.09)] {
        let st = perilib_core::ActionAngleState::new(g, gam, y, x);
        let want = perilib_core::hamiltonians::perturbation(&m.spec, &st, &quad).unwrap();
        let got = f.eval(&[g], &[gam], &[], &[], y, x);
        worst = worst.max((got.re - want).abs() / want.abs());
        assert!(got.im.abs() < 1e-12 * want.abs());
    }
    assert!(worst < 1e-8, "{worst}");
}

#[test]
fn first_step_bookkeeping() {
    let (m, h, f) = desk();
    let w = m.weights();
    let (avg, osc) = tf_average_split(&f);
    let freq = Frequencies::from_series(&h, vec![]).unwrap();
    let phi = nqp_primitive(&osc, &freq).unwrap();
    // {phi, h} + osc is the homological defect
    let lh = lie_transform(&h, &phi, 6, &w).unwrap();
    let first = poisson_bracket(&phi, &h).unwrap();
    let defect = first.add(&osc).unwrap();
    assert!(defect.max_abs() < 1e-8 * osc.max_abs().max(1e-300) + 1e-18);
    assert!(lh.report.contraction < 0.5);
    // running the driver for one step moves exactly the average into g
    let run = normal_form_steps(&h, &f, 1, &[w], 8).unwrap();
    assert!(run.g_star.sub(&avg).unwrap().max_abs() == 0.0);
}

#[test]
fn canonical_pairs_survive_the_flow() {
    let (m, h, f) = desk();
    let w = m.weights();
    let sh = m.shape().unwrap();
    let (_, osc) = tf_average_split(&f);
    let phi = nqp_primitive(&osc, &Frequencies::from_series(&h, vec![]).unwrap()).unwrap();
    let flow = |s: &TFSeries| lie_transform(s, &phi, 8, &w).unwrap().value;
    let action = flow(&tf_build(&sh, |p| Ok(re(p.actions[0]))).unwrap());
    let phase = flow(&tf_build(&sh, |p| Ok(Complex64::from_polar(1.0, p.angles[0]))).unwrap());
    let y = flow(&tf_build(&sh, |p| Ok(re(p.y))).unwrap());
    let x = flow(&tf_build(&sh, |p| Ok(re(p.x))).unwrap());
    let b1 = poisson_bracket(&action, &phase).unwrap();
    let b2 = poisson_bracket(&y, &x).unwrap();
    let l = m.spec.lambda;
    for &(g, gam, yy, xx) in &[(l - 0.01, 0.3, 11.0, 3.12), (l - 0.04, 4.0, 13.5, 3.2)] {
        let ratio = b1.eval(&[g], &[gam], &[], &[], yy, xx) / (Complex64::i() * phase.eval(&[g], &[gam], &[], &[], yy, xx));
        assert!((ratio - 1.0).norm() < 1e-6, "{ratio}");
        let v = b2.eval(&[g], &[gam], &[], &[], yy, xx);
        assert!((v - 1.0).norm() < 1e-6, "{v}");
    }
}

#[test]
fn desk_run_decays_and_accumulates_averages() {
    let (m, h, f) = desk();
    let run = normal_form_steps(&h, &f, 3, &[m.weights()], 8).unwrap();
    assert_eq!(run.records.len(), 4);
    let osc: Vec<f64> = run.records.iter().map(|r| r.osc_norm).collect();
    assert!(osc.windows(2).all(|p| p[1] < p[0]), "{osc:?}");
    assert!(run.osc_ratios().iter().all(|&r| r <= 0.5));
    assert!(osc[2] <= 1e-3 * osc[0], "{osc:?}");
    for r in &run.records[..3] {
        assert!(r.residual_abs.unwrap() < 1e-8);
    }
}

#[test]
fn normal_input_needs_no_step() {
    let (m, h, _) = desk();
    let sh = m.shape().unwrap();
    let f = TFSeries::from_grid_fn(&sh, |i, y, x| 1e-6 * i[0] * x / y).unwrap();
    let run = normal_form_steps(&h, &f, 3, &[m.weights()], 8).unwrap();
    assert_eq!(run.records.len(), 1);
    assert!(run.f_star.is_zero());
    assert_eq!(run.g_star, f);
}

#[test]
fn zero_steps_echo_the_input() {
    let (m, h, f) = desk();
    let run = normal_form_steps(&h, &f, 0, &[m.weights()], 8).unwrap();
    assert_eq!(run.records.len(), 1);
    assert_eq!(run.f_star, f);
}

#[test]
fn oversized_perturbation_loses_contraction() {
    let (m, h, f) = desk();
    let big = f.scale(re(1e7));
    match normal_form_steps(&h, &big, 3, &[m.weights()], 8) {
        Err(perilib_core::Error::ContractionLoss { factor, .. }) => assert!(factor >= 1.0),
        other => panic!("expected contraction loss, got {:?}", other.map(|r| r.records)),
    }
}

#[test]
fn serialized_series_round_trip() {
    let (_, _, f) = desk();
    let back = TFSeries::from_json(&f.to_json()).unwrap();
    assert_eq!(back, f);
}
