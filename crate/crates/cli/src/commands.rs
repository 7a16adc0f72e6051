use num_complex::Complex64;
use perilib_core::dynamics::theorem::libration_initial_state;
use perilib_core::dynamics::{
    check_theorem_main1, detect_libration, detect_rotation, find_equilibria, integrate, phase_portrait, run_libration_experiment,
    EventKind, IntegrateOptions, LibrationSummary, Trajectory,
};
use perilib_core::normalform::{normal_form_steps, DeskModel, NormWeights};
use perilib_core::potentials::{check_commutation, check_renorm_identity};
use perilib_core::{ChartState, HamiltonianSpec};
use serde_json::{json, Value};

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::output::Sink;

pub fn portrait(cfg: &ExperimentConfig, out: &Sink) -> CliResult<()> {
    let p = &cfg.portrait;
    let lambda = cfg.lambda();
    let grid = (p.grid[0], p.grid[1]);
    let portrait = phase_portrait(p.eps, lambda, grid, p.levels).map_err(|e| CliError::at("portrait.eps", e))?;
    let equilibria = find_equilibria(p.eps, lambda, p.equilibria_grid).map_err(|e| CliError::at("portrait.eps", e))?;
    let rotation = detect_rotation(p.eps, lambda, grid, p.levels);
    out.csv("portrait.csv", |w, h| portrait.write_csv(w, Some(h)))?;
    out.json(
        "equilibria.json",
        json!({
            "eps": p.eps,
            "Lambda": lambda,
            "centers": equilibria.iter().filter(|e| matches!(e.kind, perilib_core::dynamics::EquilibriumKind::Center)).count(),
            "saddles": equilibria.iter().filter(|e| matches!(e.kind, perilib_core::dynamics::EquilibriumKind::Saddle)).count(),
            "equilibria": equilibria,
            "rotation_level": rotation,
        }),
    )?;
    Ok(())
}

pub fn verify_renorm(cfg: &ExperimentConfig, seed: u64, out: &Sink) -> CliResult<()> {
    let v = &cfg.verify_renorm;
    let lambda = cfg.lambda();
    let quad = cfg.quad();
    if v.eps.is_empty() {
        return Err(CliError::Config("verify_renorm.eps: list is empty".into()));
    }
    // refuse before any work so a bad entry never yields a partial report
    for (i, &eps) in v.eps.iter().enumerate() {
        if !(eps.abs() < 0.5) {
            return Err(CliError::Config(format!(
                "verify_renorm.eps[{i}]: eps = {eps} violates |eps| < 1/2, outside which the renormalizing identity does not hold"
            )));
        }
    }
    let mut rows = Vec::with_capacity(v.eps.len());
    for (i, &eps) in v.eps.iter().enumerate() {
        let s = seed.wrapping_add(i as u64);
        let check = check_renorm_identity(eps, lambda, v.samples, &quad, s)?;
        let comm = check_commutation(eps, lambda, v.commutation_samples, v.fd_step, &quad, s)?;
        rows.push(json!({
            "eps": eps,
            "samples": check.samples,
            "max_residual": check.max_residual,
            "rejected": check.rejected,
            "commutation_max": comm,
            "commutation_samples": v.commutation_samples,
        }));
    }
    out.json("renorm.json", json!({ "Lambda": lambda, "quad_nodes": quad.n_nodes, "fd_step": v.fd_step, "results": rows }))?;
    Ok(())
}

fn summarize(traj: &Trajectory) -> CliResult<Option<LibrationSummary>> {
    match traj.states.len() {
        1 => Ok(Some(LibrationSummary { winding: 0.0, total_variation: 0.0, squeezes: 0, gcal_drift: 0.0 })),
        n if n < 10 => Ok(None),
        _ => Ok(Some(detect_libration(traj)?)),
    }
}

fn trajectory_json(traj: &Trajectory, lib: Option<LibrationSummary>) -> Value {
    let last = traj.states.last().copied().unwrap_or([f64::NAN; 4]);
    json!({
        "chart": traj.chart,
        "samples": traj.states.len(),
        "duration": traj.times.last().copied().unwrap_or(0.0),
        "winding": lib.map(|l| l.winding),
        "total_variation": lib.map(|l| l.total_variation),
        "squeezes": lib.map(|l| l.squeezes),
        "gcal_drift": lib.map(|l| l.gcal_drift),
        "energy_drift": traj.max_energy_drift(),
        "winding_events": traj.count(EventKind::Winding2Pi),
        "exited": traj.exited(),
        "events": traj.events,
        "final_state": last,
        "failure": traj.failure,
    })
}

/// Turn a mid-run failure into a numerical exit after the outputs exist.
fn failure_exit(traj: &Trajectory) -> CliResult<()> {
    match &traj.failure {
        Some(why) => Err(CliError::Numerical(format!(
            "integration failed at t = {:e}: {why}; last good state {:?}",
            traj.times.last().copied().unwrap_or(0.0),
            traj.states.last().unwrap_or(&[f64::NAN; 4])
        ))),
        None => Ok(()),
    }
}

pub fn evolve(cfg: &ExperimentConfig, out: &Sink) -> CliResult<()> {
    let (spec, dom) = cfg.system()?;
    let e = &cfg.evolve;
    let opts = IntegrateOptions { ctrl: cfg.step_control(), quad: cfg.quad(), domain: None, stop_at_winding: e.stop_at_winding };
    if let Some(lib) = e.libration {
        let dom = dom.ok_or_else(|| CliError::Config("evolve.libration: needs [domain] or [chain]".into()))?;
        let report = check_theorem_main1(&spec, &dom, lib.steps, &cfg.surrogates);
        if !report.pass {
            let failed: Vec<_> = report.inequality_values.iter().filter(|i| !i.holds).map(|i| i.label.clone()).collect();
            return Err(CliError::Numerical(format!("libration run refused: hypotheses fail ({})", failed.join("; "))));
        }
        let st0 = libration_initial_state(&spec, &dom, lib.y_fraction, lib.gamma0).map_err(|e| CliError::at("evolve.libration", e))?;
        let budget = lib.budget.unwrap_or(report.t_domain);
        let (traj, outcome) = run_libration_experiment(&spec, &dom, &report, &st0, budget, &opts)?;
        out.csv("trajectory.csv", |w, h| traj.write_csv(w, Some(h)))?;
        let mut body = trajectory_json(&traj, Some(outcome.summary));
        body["libration"] = json!(outcome);
        body["theorem"] = json!(report);
        body["initial_state"] = json!(ChartState::ActionAngle(st0));
        out.json("summary.json", body)?;
        return failure_exit(&traj);
    }
    let st = e.state.ok_or_else(|| CliError::Config("evolve.state: required unless evolve.libration is set".into()))?;
    let st0 = ChartState::from_array(e.chart, st);
    let traj = integrate(&spec, &st0, e.duration, &opts).map_err(|err| CliError::at("evolve.state", err))?;
    let lib = summarize(&traj)?;
    out.csv("trajectory.csv", |w, h| traj.write_csv(w, Some(h)))?;
    let mut body = trajectory_json(&traj, lib);
    body["initial_state"] = json!(st0);
    out.json("summary.json", body)?;
    failure_exit(&traj)
}

pub fn check_theorem(cfg: &ExperimentConfig, out: &Sink) -> CliResult<()> {
    let (spec, dom) = cfg.system()?;
    let dom = dom.ok_or_else(|| CliError::Config("domain: section required (or use [chain])".into()))?;
    let report = check_theorem_main1(&spec, &dom, cfg.check_theorem.steps, &cfg.surrogates);
    out.json(
        "theorem.json",
        json!({
            "note": "surrogate constants stand in for existential ones; a pass is a numerical illustration, not a proof",
            "steps": cfg.check_theorem.steps,
            "spec": spec,
            "domain": dom,
            "report": report,
        }),
    )?;
    Ok(())
}

fn desk_model(cfg: &ExperimentConfig, spec: HamiltonianSpec) -> DeskModel {
    let n = &cfg.normalform;
    DeskModel {
        spec,
        delta: n.delta,
        y_box: n.y_box,
        x_box: n.x_box,
        nodes: n.nodes,
        fourier_cutoff: n.fourier_cutoff,
        pq_degree: n.pq_degree,
        quad_nodes: cfg.quadrature.nodes,
    }
}

pub fn normalform(cfg: &ExperimentConfig, out: &Sink) -> CliResult<()> {
    let n = &cfg.normalform;
    let spec = if cfg.masses.is_some() || cfg.chain.is_some() { cfg.system()?.0 } else { DeskModel::default().spec };
    let model = desk_model(cfg, spec);
    let base = model.weights();
    let o = n.weights;
    let w = NormWeights::new(
        o.rho.unwrap_or(base.rho),
        o.s.unwrap_or(base.s),
        o.delta.unwrap_or(base.delta),
        o.r.unwrap_or(base.r),
        o.xi.unwrap_or(base.xi),
    )
    .map_err(|e| CliError::at("normalform.weights", e))?;
    let (h, f) = model.build().map_err(|e| CliError::at("normalform", e))?;
    let f = f.scale(Complex64::new(n.perturbation_scale, 0.0));
    let run = normal_form_steps(&h, &f, n.steps, &[w], n.max_order)?;
    out.json(
        "norms.json",
        json!({
            "steps": n.steps,
            "model": model,
            "weights": w,
            "records": run.records,
            "osc_ratios": run.osc_ratios(),
        }),
    )?;
    for (name, s) in [("g_star.json", &run.g_star), ("f_star.json", &run.f_star)] {
        let doc: Value = serde_json::from_str(&s.to_json()).expect("series documents are valid JSON");
        out.json(name, doc)?;
    }
    Ok(())
}
