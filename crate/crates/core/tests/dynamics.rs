use std::f64::consts::PI;

use perilib_core::coords::{derive_mass_params, Frame, HamiltonianIndex};
use perilib_core::dynamics::portrait::{find_equilibria, phase_portrait};
use perilib_core::dynamics::theorem::{
    build_parameter_chain, check_theorem_main1, libration_initial_state, run_libration_experiment, ChainInputs, DomainParams,
};
use perilib_core::dynamics::trajectory::{integrate, EventKind, IntegrateOptions};
use perilib_core::{ChartState, HamiltonianSpec, SecularState};

#[test]
fn portrait_csv_lists_every_polyline() {
    let p = phase_portrait(0.3, 1.0, (64, 64), 8).unwrap();
    let mut buf = Vec::new();
    p.write_csv(&mut buf, Some("seed=1")).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("# seed=1"));
    let headers = text.lines().filter(|l| l.starts_with("# polyline")).count();
    assert_eq!(headers, p.polylines.len());
    let rows = text.lines().filter(|l| !l.starts_with('#') && !l.starts_with("level")).count();
    assert_eq!(rows, p.polylines.iter().map(|l| l.points.len()).sum::<usize>());
}

#[test]
fn equilibria_serialize_to_json() {
    let eq = find_equilibria(0.7, 1.0, 64).unwrap();
    let js = serde_json::to_string(&eq).unwrap();
    assert!(js.contains("\"saddle\"") && js.contains("\"center\""));
}

#[test]
fn libration_refused_when_hypotheses_fail() {
    let inp = ChainInputs::default();
    let p = build_parameter_chain(&inp).unwrap();
    let bad = DomainParams { eps0: 1.5, ..p.domain };
    let rep = check_theorem_main1(&p.spec, &bad, 10, &inp.surrogates);
    assert!(!rep.pass);
    let s0 = libration_initial_state(&p.spec, &p.domain, 0.1, 0.0).unwrap();
    assert!(run_libration_experiment(&p.spec, &bad, &rep, &s0, 1.0, &IntegrateOptions::default()).is_err());
}

#[test]
fn libration_run_records_events_in_order() {
    let inp = ChainInputs::default();
    let p = build_parameter_chain(&inp).unwrap();
    let rep = check_theorem_main1(&p.spec, &p.domain, 10, &inp.surrogates);
    assert!(rep.pass);
    let s0 = libration_initial_state(&p.spec, &p.domain, 0.3, 0.2).unwrap();
    let opts = IntegrateOptions { stop_at_winding: Some(2.5 * PI), ..Default::default() };
    let (tr, out) = run_libration_experiment(&p.spec, &p.domain, &rep, &s0, rep.t_domain, &opts).unwrap();
    assert!(out.meets_2pi && !out.exited, "{out:?} {:?}", tr.events);
    assert!(tr.events.windows(2).all(|w| w[0].time <= w[1].time));
    assert!(tr.count(EventKind::Winding2Pi) >= 1);
}

#[test]
fn dipole_cancellation_slows_the_jacobi_precession() {
    // In the Jacobi frame the first-order terms of the two branches cancel,
    // so the perihelion drifts far more slowly than in the m0-centric frame.
    let rate = |index| {
        let inp = ChainInputs { index, ..Default::default() };
        let p = build_parameter_chain(&inp).unwrap();
        let s0 = libration_initial_state(&p.spec, &p.domain, 0.1, 0.0).unwrap();
        let v = perilib_core::hamiltonians::vector_field(&p.spec, &ChartState::ActionAngle(s0), &perilib_core::QuadratureSpec::default())
            .unwrap();
        v[1].abs()
    };
    assert!(rate(HamiltonianIndex::H2) > 1e6 * rate(HamiltonianIndex::H1));
}

#[test]
fn generic_orbit_conserves_energy() {
    let masses = derive_mass_params(0.5, 0.2, Frame::Jacobi).unwrap();
    let spec = HamiltonianSpec::new(HamiltonianIndex::H1, 1.0, 1.0, masses).unwrap();
    let st = ChartState::Secular(SecularState::new(0.02, 0.6, 30.0, 0.4));
    let tr = integrate(&spec, &st, 200.0, &IntegrateOptions::default()).unwrap();
    assert!(!tr.exited());
    assert!(tr.max_energy_drift() < 1e-8, "{}", tr.max_energy_drift());
}
