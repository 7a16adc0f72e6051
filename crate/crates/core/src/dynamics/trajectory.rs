//! Flows of the secular Hamiltonians with event annotations.

use std::f64::consts::{PI, TAU};
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::integrator::{self, Flow, Outcome, StepControl};
use crate::error::{Error, Result};
use crate::hamiltonians::{self, Chart, ChartState, HamiltonianSpec};
use crate::kepler;
use crate::potentials::QuadratureSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    Squeeze,
    #[serde(rename = "winding-2pi")]
    Winding2Pi,
    DomainExit,
}

impl EventKind {
    pub fn label(self) -> &'static str {
        match self {
            EventKind::Squeeze => "squeeze",
            EventKind::Winding2Pi => "winding-2pi",
            EventKind::DomainExit => "domain-exit",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
}

/// Box in the action-angle chart that a run must stay in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseBox {
    pub gcal: (f64, f64),
    pub y: (f64, f64),
    pub x: (f64, f64),
}

impl PhaseBox {
    pub fn contains(&self, st: &[f64; 4]) -> bool {
        let inside = |v: f64, (lo, hi): (f64, f64)| v > lo && v < hi;
        inside(st[0], self.gcal) && inside(st[2], self.y) && inside(st[3], self.x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct IntegrateOptions {
    pub ctrl: StepControl,
    pub quad: QuadratureSpec,
    pub domain: Option<PhaseBox>,
    /// stop once the perihelion angle has moved this far from its start
    pub stop_at_winding: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub chart: Chart,
    #[serde(rename = "Lambda")]
    pub lambda: f64,
    pub times: Vec<f64>,
    pub states: Vec<[f64; 4]>,
    pub energies: Vec<f64>,
    pub events: Vec<Event>,
    /// why the integrator gave up early; the samples end at the last good state
    #[serde(default)]
    pub failure: Option<String>,
}

/// Signed angular momentum `G` of a chart state.
pub fn angular_momentum(chart: Chart, lambda: f64, st: &[f64; 4]) -> f64 {
    match chart {
        Chart::Secular => st[1],
        Chart::ActionAngle => (lambda * lambda - st[0] * st[0]).max(0.0).sqrt() * st[1].cos(),
    }
}

/// The libration angle: `gamma` itself, or in the secular chart the polar
/// angle of `(g - g_c, G/Lambda)` about the libration centre `g_c`.
pub fn libration_angle(chart: Chart, lambda: f64, centre: f64, st: &[f64; 4]) -> f64 {
    match chart {
        Chart::ActionAngle => st[1],
        Chart::Secular => {
            let dg = (st[3] - centre + PI).rem_euclid(TAU) - PI;
            (st[1] / lambda).atan2(dg)
        }
    }
}

/// `Gcal` of a chart state.
pub fn gcal_of(chart: Chart, lambda: f64, st: &[f64; 4]) -> f64 {
    match chart {
        Chart::ActionAngle => st[0],
        Chart::Secular => (lambda * lambda - st[1] * st[1]).max(0.0).sqrt() * st[3].cos(),
    }
}

fn radius(spec: &HamiltonianSpec, chart: Chart, st: &[f64; 4]) -> Result<f64> {
    match chart {
        Chart::Secular => Ok(st[2]),
        Chart::ActionAngle => {
            let xi = kepler::solve_radial(st[3], kepler::DEFAULT_TOL)?.xi;
            Ok(st[2] * st[2] / spec.m0.powi(3) * (1.0 - xi.cos()))
        }
    }
}

fn in_domain(spec: &HamiltonianSpec, chart: Chart, st: &[f64; 4], dom: &Option<PhaseBox>) -> bool {
    if let Some(b) = dom {
        if !b.contains(st) {
            return false;
        }
    }
    let g_ok = match chart {
        Chart::Secular => st[1].abs() < spec.lambda,
        Chart::ActionAngle => st[0].abs() < spec.lambda && st[3] > 0.0 && st[3] < TAU,
    };
    g_ok && matches!(radius(spec, chart, st), Ok(r) if r > spec.admissible_radius() * (1.0 + 1e-9))
}

/// Integrate Hamilton's equations for `duration`, recording squeezes,
/// full turns of the libration angle and domain exits.
pub fn integrate(spec: &HamiltonianSpec, state0: &ChartState, duration: f64, opts: &IntegrateOptions) -> Result<Trajectory> {
    let chart = state0.chart();
    let lambda = spec.lambda;
    let y0 = state0.to_array();
    if !in_domain(spec, chart, &y0, &opts.domain) {
        return Err(Error::Domain(format!("initial state {y0:?} outside the domain")));
    }
    let quad = opts.quad;
    let energy = |st: &[f64; 4]| hamiltonians::energy(spec, &ChartState::from_array(chart, *st), &quad);
    let field = |_: f64, st: &[f64; 4]| hamiltonians::vector_field(spec, &ChartState::from_array(chart, *st), &quad);

    let mut traj =
        Trajectory { chart, lambda, times: vec![0.0], states: vec![y0], energies: vec![energy(&y0)?], events: vec![], failure: None };
    let centre = if y0[3].cos() >= 0.0 { 0.0 } else { PI };
    let angle = |st: &[f64; 4]| libration_angle(chart, lambda, centre, st);
    let mut unwrapped = angle(&y0);
    let start_angle = unwrapped;
    let mut turns_logged = 0i64;

    let outcome = integrator::integrate_adaptive(field, 0.0, y0, duration, &opts.ctrl, |t0, s0, t1, s1| {
        if !in_domain(spec, chart, s1, &opts.domain) {
            let inside = |s: &[f64; 4]| if in_domain(spec, chart, s, &opts.domain) { 1.0 } else { -1.0 };
            let te = integrator::bisect_event(&field, t0, s0, t1 - t0, &opts.ctrl, inside).unwrap_or(t1);
            traj.events.push(Event { time: te, kind: EventKind::DomainExit });
            return Ok(Flow::Stop);
        }
        let g_prev = angular_momentum(chart, lambda, s0);
        let g_next = angular_momentum(chart, lambda, s1);
        if g_prev != 0.0 && g_next != 0.0 && (g_prev > 0.0) != (g_next > 0.0) {
            let te = integrator::bisect_event(&field, t0, s0, t1 - t0, &opts.ctrl, |s| angular_momentum(chart, lambda, s))?;
            traj.events.push(Event { time: te, kind: EventKind::Squeeze });
        }
        let a1 = angle(s1);
        let step = (a1 - unwrapped + PI).rem_euclid(TAU) - PI;
        unwrapped += step;
        let moved = unwrapped - start_angle;
        let turns = (moved.abs() / TAU).floor() as i64;
        if turns > turns_logged {
            turns_logged = turns;
            traj.events.push(Event { time: t1, kind: EventKind::Winding2Pi });
        }
        traj.times.push(t1);
        traj.states.push(*s1);
        traj.energies.push(energy(s1)?);
        match opts.stop_at_winding {
            Some(w) if moved.abs() >= w => Ok(Flow::Stop),
            _ => Ok(Flow::Continue),
        }
    });
    let outcome = match outcome {
        Ok(o) => o,
        Err(e) if e.is_numerical() => {
            traj.failure = Some(e.to_string());
            return Ok(traj);
        }
        Err(e) => return Err(e),
    };
    if let Outcome::Refused(e) = outcome {
        if e.is_numerical() {
            let t = *traj.times.last().unwrap_or(&0.0);
            traj.events.push(Event { time: t, kind: EventKind::DomainExit });
        } else {
            return Err(e);
        }
    }
    Ok(traj)
}

impl Trajectory {
    pub fn max_energy_drift(&self) -> f64 {
        let e0 = self.energies[0];
        let scale = if e0 == 0.0 { 1.0 } else { e0.abs() };
        self.energies.iter().map(|e| (e - e0).abs() / scale).fold(0.0, f64::max)
    }

    pub fn exited(&self) -> bool {
        self.events.iter().any(|e| e.kind == EventKind::DomainExit)
    }

    pub fn count(&self, kind: EventKind) -> usize {
        self.events.iter().filter(|e| e.kind == kind).count()
    }

    pub fn write_csv<W: Write>(&self, mut w: W, header_comment: Option<&str>) -> std::io::Result<()> {
        if let Some(c) = header_comment {
            writeln!(w, "# {c}")?;
        }
        match self.chart {
            Chart::Secular => writeln!(w, "t,R,G,r,g,energy")?,
            Chart::ActionAngle => writeln!(w, "t,Gcal,gamma,y,x,energy")?,
        }
        for ((t, s), e) in self.times.iter().zip(&self.states).zip(&self.energies) {
            writeln!(w, "{t:e},{:e},{:e},{:e},{:e},{e:e}", s[0], s[1], s[2], s[3])?;
        }
        for ev in &self.events {
            writeln!(w, "# event,{:e},{}", ev.time, ev.kind.label())?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LibrationSummary {
    /// largest excursion of the unwrapped libration angle from its start
    pub winding: f64,
    /// sum of absolute angle increments
    pub total_variation: f64,
    pub squeezes: usize,
    pub gcal_drift: f64,
}

/// Winding, squeeze count and `Gcal` drift of a sampled trajectory.
pub fn detect_libration(traj: &Trajectory) -> Result<LibrationSummary> {
    if traj.states.len() < 10 {
        return Err(Error::arg("traj", format!("{} samples; need at least 10", traj.states.len())));
    }
    let chart = traj.chart;
    let lambda = traj.lambda;
    let s0 = &traj.states[0];
    let centre = if s0[3].cos() >= 0.0 { 0.0 } else { PI };
    let mut prev = libration_angle(chart, lambda, centre, s0);
    let (mut acc, mut winding, mut tv) = (0.0f64, 0.0f64, 0.0f64);
    let gc0 = gcal_of(chart, lambda, s0);
    let mut drift: f64 = 0.0;
    let mut squeezes = 0;
    let mut last_sign = 0.0;
    for s in &traj.states {
        let a = libration_angle(chart, lambda, centre, s);
        let d = (a - prev + PI).rem_euclid(TAU) - PI;
        prev = a;
        acc += d;
        tv += d.abs();
        winding = winding.max(acc.abs());
        drift = drift.max((gcal_of(chart, lambda, s) - gc0).abs());
        let g = angular_momentum(chart, lambda, s);
        if g != 0.0 {
            let sg = g.signum();
            if last_sign != 0.0 && sg != last_sign {
                squeezes += 1;
            }
            last_sign = sg;
        }
    }
    Ok(LibrationSummary { winding, total_variation: tv, squeezes, gcal_drift: drift })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coords::{derive_mass_params, Frame, HamiltonianIndex, SecularState};

    fn synthetic(chart: Chart, f: impl Fn(f64) -> [f64; 4], t_end: f64) -> Trajectory {
        let n = 400;
        let times: Vec<f64> = (0..=n).map(|k| t_end * k as f64 / n as f64).collect();
        let states: Vec<[f64; 4]> = times.iter().map(|&t| f(t)).collect();
        Trajectory { chart, lambda: 1.0, energies: vec![0.0; times.len()], times, states, events: vec![], failure: None }
    }

    #[test]
    fn synthetic_winding() {
        let w = 3.0;
        let tr = synthetic(Chart::ActionAngle, |t| [0.9, w * t, 10.0, PI], TAU / w);
        let s = detect_libration(&tr).unwrap();
        assert!((s.winding - TAU).abs() < 1e-12);
    }

    #[test]
    fn synthetic_squeezes() {
        let tr = synthetic(Chart::Secular, |t| [0.0, t.cos(), 10.0, 0.1], TAU);
        assert_eq!(detect_libration(&tr).unwrap().squeezes, 2);
    }

    #[test]
    fn short_trajectories_are_rejected() {
        let mut tr = synthetic(Chart::Secular, |t| [0.0, t, 10.0, 0.0], 1.0);
        tr.states.truncate(5);
        assert!(detect_libration(&tr).is_err());
    }

    #[test]
    fn radial_manifold_is_invariant_until_exit() {
        let masses = derive_mass_params(1.0, 1.0, Frame::Jacobi).unwrap();
        let spec = HamiltonianSpec::new(HamiltonianIndex::H1, 1.0, 1.0, masses).unwrap();
        let st = ChartState::Secular(SecularState::new(0.1, 0.0, 20.0, 0.0));
        let tr = integrate(&spec, &st, 300.0, &IntegrateOptions::default()).unwrap();
        assert!(tr.energies[0] < 0.0);
        for s in &tr.states {
            assert!(s[1].abs() < 1e-9 && s[3].abs() < 1e-9);
        }
        // the quadrature loses accuracy right at the singular radius, so
        // conservation is checked away from it
        let far = 1.5 * spec.branch_radius();
        let e0 = tr.energies[0];
        for (s, e) in tr.states.iter().zip(&tr.energies) {
            if s[2] > far {
                assert!(((e - e0) / e0).abs() < 1e-8);
            }
        }
        // radial fall reaches the branch radius well before t = 300
        assert!(tr.exited());
    }

    #[test]
    fn zero_duration_is_a_single_row() {
        let masses = derive_mass_params(1.0, 1.0, Frame::Jacobi).unwrap();
        let spec = HamiltonianSpec::new(HamiltonianIndex::H1, 1.0, 1.0, masses).unwrap();
        let st = ChartState::Secular(SecularState::new(0.1, 0.2, 20.0, 0.1));
        let tr = integrate(&spec, &st, 0.0, &IntegrateOptions::default()).unwrap();
        assert_eq!(tr.times.len(), 1);
        let mut buf = Vec::new();
        tr.write_csv(&mut buf, None).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.starts_with("t,R,G,r,g,energy"));
    }

    #[test]
    fn step_budget_exhaustion_keeps_the_samples() {
        let masses = derive_mass_params(1.0, 1.0, Frame::Jacobi).unwrap();
        let spec = HamiltonianSpec::new(HamiltonianIndex::H1, 1.0, 1.0, masses).unwrap();
        let st = ChartState::Secular(SecularState::new(0.1, 0.2, 20.0, 0.1));
        let mut opts = IntegrateOptions::default();
        opts.ctrl.max_steps = 5;
        let tr = integrate(&spec, &st, 1e4, &opts).unwrap();
        assert!(tr.failure.as_deref().unwrap().contains("budget"));
        assert_eq!(tr.states.len(), 6);
    }
}
