//! Hypothesis checker for the libration theorem, a parameter builder that
//! satisfies it with explicit margins, and the numerical libration run.
//!
//! The theorem's constants are existential. `Surrogates` supplies stand-in
//! values; a passing report is a numerical illustration, not a proof.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::trajectory::{self, IntegrateOptions, LibrationSummary, PhaseBox, Trajectory};
use crate::coords::{derive_mass_params, ActionAngleState, Frame, HamiltonianIndex};
use crate::error::{Error, Result};
use crate::hamiltonians::{self, ChartState, HamiltonianSpec};
use crate::kepler;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Surrogates {
    /// the larger constant, allowed to depend on the angle width
    pub c_upper: f64,
    /// the smaller constant, independent of the angle width
    pub c_lower: f64,
}

impl Default for Surrogates {
    fn default() -> Self {
        Self { c_upper: 10.0, c_lower: 2.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<")]
    Less,
    #[serde(rename = "<=")]
    LessEq,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Inequality {
    pub label: String,
    pub lhs: f64,
    pub relation: Relation,
    pub rhs: f64,
    pub holds: bool,
}

impl Inequality {
    fn new(label: &str, lhs: f64, relation: Relation, rhs: f64) -> Self {
        let holds = match relation {
            Relation::Less => lhs < rhs,
            Relation::LessEq => lhs <= rhs,
        };
        Self { label: label.to_string(), lhs, relation, rhs, holds }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremReport {
    pub inequality_values: Vec<Inequality>,
    pub pass: bool,
    /// libration time from the closed formula
    pub t_estimate: f64,
    /// the time the proof shows the orbit stays in the domain
    pub t_domain: f64,
    pub c0: f64,
    pub n0: f64,
    pub eta: f64,
    pub surrogates: Surrogates,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainParams {
    pub eps0: f64,
    pub delta: f64,
    pub s0: f64,
    pub alpha_minus: f64,
    pub alpha_plus: f64,
}

/// Grid used for the measured Kepler constant.
pub const C0_GRID: usize = 64;

pub fn check_theorem_main1(spec: &HamiltonianSpec, dom: &DomainParams, n_steps: u64, sur: &Surrogates) -> TheoremReport {
    let DomainParams { eps0, delta, s0, alpha_minus: am, alpha_plus: ap } = *dom;
    let lambda = spec.lambda;
    let m0 = spec.m0;
    let a = spec.semi_major_axis();
    let (b_lo, b_hi) = spec.mass_bounds();
    let c0 = kepler::estimate_c0(eps0, C0_GRID).unwrap_or(f64::NAN);
    let (cu, cl) = (sur.c_upper, sur.c_lower);
    let c02e2 = c0 * c0 * eps0 * eps0;

    let inv_n0 = cl
        * f64::max(b_lo * lambda / (c02e2 * delta * s0) * (a / am).sqrt(), b_lo / (c0 * c0 * eps0.powf(2.5)) * (a / am))
        * (ap / am).powf(1.5);
    let n0 = 1.0 / inv_n0;
    let ratio2 = (ap / am).powi(2);
    let eta = cl
        * f64::max(
            f64::max(ap * ap / (b_lo * (am.powi(3) * a).sqrt()), ratio2 / (c0 * c0 * eps0.powf(2.5)) * (a / am).sqrt()),
            ratio2 / c02e2 * lambda / (s0 * delta) * (-n0).exp2(),
        );

    use Relation::*;
    let list = vec![
        Inequality::new("eps0 < 1", eps0, Less, 1.0),
        Inequality::new("delta <= Lambda/4", delta, LessEq, lambda / 4.0),
        Inequality::new("holomorphy strip: C^* delta/Lambda < 1", cu * delta / lambda, Less, 1.0),
        Inequality::new("radial window: alpha_- < alpha_+/4", am, Less, ap / 4.0),
        Inequality::new("Kepler bound: 4 beta^* a/(c0 alpha_- eps0) < 1", 4.0 * b_hi * a / (c0 * am * eps0), Less, 1.0),
        Inequality::new("C^* delta/(beta_* Lambda) <= 1", cu * delta / (b_lo * lambda), LessEq, 1.0),
        Inequality::new("1/N0 < c0^2 eps0^2 alpha_-^2/(2 alpha_+^2)", inv_n0, Less, c02e2 / (2.0 * ratio2)),
        Inequality::new("N < N0", n_steps as f64, Less, n0),
        Inequality::new("eta < 1", eta, Less, 1.0),
    ];
    let pass = list.iter().all(|i| i.holds) && c0.is_finite();
    let t_estimate = lambda * ap.powi(3) / (b_lo * m0 * m0 * a) * 3.0 * PI / eta;
    let big_delta = cl * m0 * m0 * a * b_lo / (c02e2 * am * am);
    let t_domain =
        f64::min(f64::min((am.powi(3) / m0).sqrt(), (m0.powi(3) * am * eps0).sqrt() / big_delta), n0.exp2() * s0 * delta / big_delta);
    TheoremReport { inequality_values: list, pass, t_estimate, t_domain, c0, n0, eta, surrogates: *sur }
}

/// Inputs of the parameter construction: fixed first, then everything else
/// is derived in order (angle width, radial scale, masses).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainInputs {
    pub eps0: f64,
    /// `delta / Lambda`
    pub delta_ratio: f64,
    pub lambda: f64,
    pub m0: f64,
    pub index: HamiltonianIndex,
    pub mu: f64,
    /// factor by which every derived bound is beaten (> 1)
    pub margin: f64,
    pub surrogates: Surrogates,
}

impl Default for ChainInputs {
    fn default() -> Self {
        Self {
            eps0: 0.5,
            delta_ratio: 0.05,
            lambda: 1.0,
            m0: 1.0,
            index: HamiltonianIndex::H2,
            mu: 1.0,
            margin: 4.0,
            surrogates: Surrogates::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainParams {
    pub spec: HamiltonianSpec,
    pub domain: DomainParams,
}

/// Ratio `alpha_+ / alpha_-` used by the construction.
pub const RADIAL_RATIO: f64 = 256.0;

/// Build parameters that satisfy every hypothesis with the given margin.
pub fn build_parameter_chain(inp: &ChainInputs) -> Result<ChainParams> {
    if !(inp.margin > 1.0) {
        return Err(Error::arg("margin", "must exceed 1"));
    }
    if !(inp.delta_ratio > 0.0 && inp.delta_ratio <= 0.25) {
        return Err(Error::arg("delta_ratio", "must lie in (0, 1/4]"));
    }
    let ChainInputs { eps0, lambda, m0, mu, margin: m, .. } = *inp;
    let (cu, cl) = (inp.surrogates.c_upper, inp.surrogates.c_lower);
    let c0 = kepler::estimate_c0(eps0, C0_GRID)?;
    let rho = RADIAL_RATIO;
    let a = lambda * lambda / m0.powi(3);
    let delta = inp.delta_ratio * lambda;
    // beta_upper / beta_star for the chosen Hamiltonian, fixed by mu
    let (frame, spread) = match inp.index {
        HamiltonianIndex::H2 => (Frame::M0centric, (1.0 + mu) / mu),
        HamiltonianIndex::H1 => (Frame::Jacobi, (1.0 + mu) * mu.max(1.0) / mu),
    };
    let c04 = c0.powi(4);

    // radial scale: large enough for the second eta term and for a
    // non-empty mass window
    let sqrt_a_min = f64::max(cl * rho * rho / (c0 * c0 * eps0.powf(2.5)), 2.0 * cl * cl * rho.powf(5.5) / (c04 * eps0.powf(4.5)));
    let mut sqrt_big_a = m * m * sqrt_a_min;
    // the mass window's lower end also has to clear C^* delta/Lambda
    sqrt_big_a = sqrt_big_a.max(m * m * cu * inp.delta_ratio / (cl * rho * rho));
    let big_a = sqrt_big_a * sqrt_big_a;

    let b_min = f64::max(cl * rho * rho * sqrt_big_a, cu * inp.delta_ratio);
    let b_max = f64::min(c04 * eps0.powf(4.5) * big_a / (2.0 * cl * rho.powf(3.5)), c0 * eps0 * big_a / (4.0 * spread));
    if !(b_max > m * b_min) {
        return Err(Error::Domain(format!("empty mass window [{b_min:e}, {b_max:e}]")));
    }
    let beta_star = (b_min * b_max).sqrt();
    let s0 = m * 2.0 * cl * beta_star * rho.powf(3.5) / (c04 * eps0.powi(4) * inp.delta_ratio * sqrt_big_a);

    let beta = match inp.index {
        HamiltonianIndex::H2 => beta_star / mu,
        HamiltonianIndex::H1 => beta_star * (1.0 + mu) / mu,
    };
    let kappa = kappa_for_beta(beta, mu, frame);
    let masses = derive_mass_params(mu, kappa, frame)?;
    let spec = HamiltonianSpec::new(inp.index, m0, lambda, masses)?;
    let alpha_minus = big_a * a;
    Ok(ChainParams { spec, domain: DomainParams { eps0, delta, s0, alpha_minus, alpha_plus: rho * alpha_minus } })
}

/// Invert the frame's `beta(mu, kappa)` for `kappa`.
pub fn kappa_for_beta(beta: f64, mu: f64, frame: Frame) -> f64 {
    let m2 = mu * mu;
    match frame {
        Frame::M0centric => (beta * m2 + (beta * beta * m2 * m2 + 4.0 * (1.0 + mu) * beta * m2).sqrt()) / (2.0 * (1.0 + mu)),
        Frame::Jacobi => {
            let p = (1.0 + mu).powi(2);
            (beta * m2 + (beta * beta * m2 * m2 + 4.0 * p * (1.0 + mu) * beta * m2).sqrt()) / (2.0 * p)
        }
    }
}

/// The domain box in the action-angle chart.
pub fn phase_box(spec: &HamiltonianSpec, dom: &DomainParams) -> PhaseBox {
    let m3 = spec.m0.powi(3);
    let s = dom.eps0.sqrt();
    PhaseBox {
        gcal: (spec.lambda - dom.delta, spec.lambda),
        y: ((m3 * dom.alpha_minus).sqrt(), (m3 * dom.alpha_plus).sqrt()),
        x: (2.0 * s, 2.0 * PI - 2.0 * s),
    }
}

/// Initial data of the libration run: close to the circular orbit, at
/// apocentre of the radial motion, inside the admissible `y` window.
pub fn libration_initial_state(spec: &HamiltonianSpec, dom: &DomainParams, y_fraction: f64, gamma0: f64) -> Result<ActionAngleState> {
    let m3 = spec.m0.powi(3);
    let lo = 2.0 * (m3 * dom.alpha_minus).sqrt();
    let hi = 0.5 * ((m3 * dom.alpha_minus).sqrt() + (m3 * dom.alpha_plus).sqrt());
    if !(0.0..=1.0).contains(&y_fraction) {
        return Err(Error::arg("y_fraction", "must lie in [0, 1]"));
    }
    Ok(ActionAngleState::new(spec.lambda - dom.delta / 4.0, gamma0, lo + y_fraction * (hi - lo), PI))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LibrationOutcome {
    pub summary: LibrationSummary,
    pub duration: f64,
    pub exited: bool,
    pub energy_drift: f64,
    pub min_radius_ratio: f64,
    pub meets_2pi: bool,
    pub meets_3pi: bool,
}

/// Step cap for the libration run so that the angle is sampled finely.
pub const LIBRATION_MIN_STEPS: f64 = 2000.0;

/// Integrate the action-angle flow from `state0` inside the theorem's domain.
/// The run lasts `min(T_estimate, budget)` and may stop early once the angle
/// has wound `stop_at_winding`.
pub fn run_libration_experiment(
    spec: &HamiltonianSpec,
    dom: &DomainParams,
    report: &TheoremReport,
    state0: &ActionAngleState,
    budget: f64,
    opts: &IntegrateOptions,
) -> Result<(Trajectory, LibrationOutcome)> {
    if !report.pass {
        return Err(Error::Domain("theorem hypotheses fail; refusing the libration run".into()));
    }
    let pbox = phase_box(spec, dom);
    if (state0.x - PI).abs() > 1e-12 || (state0.gcal - spec.lambda).abs() > dom.delta / 2.0 {
        return Err(Error::Domain("initial data outside the libration window".into()));
    }
    let duration = report.t_estimate.min(budget);
    let mut o = *opts;
    o.domain = Some(pbox);
    if o.ctrl.h_max.is_none() {
        // resolve the angle: roughly a hundred samples per radian at the start
        let v = hamiltonians::vector_field(spec, &ChartState::ActionAngle(*state0), &o.quad)?;
        let by_rate = if v[1] != 0.0 { 0.01 / v[1].abs() } else { f64::INFINITY };
        o.ctrl.h_max = Some((duration / LIBRATION_MIN_STEPS).min(by_rate));
    }
    let traj = trajectory::integrate(spec, &ChartState::ActionAngle(*state0), duration, &o)?;
    let summary = trajectory::detect_libration(&traj)?;
    let r_floor = 2.0 * spec.mass_bounds().1 * spec.semi_major_axis();
    let m3 = spec.m0.powi(3);
    let min_r = traj
        .states
        .iter()
        .map(|st| {
            let xi = kepler::solve_radial(st[3], kepler::DEFAULT_TOL).map(|k| k.xi).unwrap_or(0.0);
            st[2] * st[2] / m3 * (1.0 - xi.cos())
        })
        .fold(f64::INFINITY, f64::min);
    let out = LibrationOutcome {
        summary,
        duration: *traj.times.last().unwrap(),
        exited: traj.exited(),
        energy_drift: traj.max_energy_drift(),
        min_radius_ratio: min_r / r_floor,
        meets_2pi: summary.winding >= 2.0 * PI,
        meets_3pi: summary.winding >= 3.0 * PI,
    };
    Ok((traj, out))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_satisfies_every_inequality() {
        for index in [HamiltonianIndex::H1, HamiltonianIndex::H2] {
            let inp = ChainInputs { index, ..Default::default() };
            let p = build_parameter_chain(&inp).unwrap();
            let rep = check_theorem_main1(&p.spec, &p.domain, 10, &inp.surrogates);
            assert!(rep.pass, "{:#?}", rep.inequality_values);
            assert!(rep.t_estimate > 0.0 && rep.t_domain > 0.0);
        }
    }

    #[test]
    fn heavy_masses_break_the_kepler_bound() {
        let inp = ChainInputs::default();
        let mut p = build_parameter_chain(&inp).unwrap();
        p.spec.masses = derive_mass_params(1.0, 1e40, Frame::M0centric).unwrap();
        let rep = check_theorem_main1(&p.spec, &p.domain, 10, &inp.surrogates);
        let kep = rep.inequality_values.iter().find(|i| i.label.starts_with("Kepler bound")).unwrap();
        assert!(!kep.holds && !rep.pass);
    }

    #[test]
    fn eps0_at_least_one_fails_first_line() {
        let inp = ChainInputs::default();
        let p = build_parameter_chain(&inp).unwrap();
        let dom = DomainParams { eps0: 1.0, ..p.domain };
        let rep = check_theorem_main1(&p.spec, &dom, 10, &inp.surrogates);
        assert!(!rep.inequality_values[0].holds && !rep.pass);
    }

    #[test]
    fn kappa_inversion() {
        for frame in [Frame::Jacobi, Frame::M0centric] {
            for &(beta, mu) in &[(3.0, 1.0), (1e12, 0.3), (0.2, 5.0)] {
                let k = kappa_for_beta(beta, mu, frame);
                let p = derive_mass_params(mu, k, frame).unwrap();
                assert!((p.beta - beta).abs() / beta < 1e-12);
            }
        }
    }
}
