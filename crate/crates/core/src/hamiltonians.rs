//! The two reduced secular Hamiltonians, in the secular chart and in the
//! action-angle chart, with their radial restrictions and gradients.

use serde::{Deserialize, Serialize};

use crate::coords::{self, ActionAngleState, HamiltonianIndex, MassParams, SecularState};
use crate::error::{Error, Result};
use crate::kepler;
use crate::potentials::{self, QuadratureSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianSpec {
    pub index: HamiltonianIndex,
    pub m0: f64,
    #[serde(rename = "Lambda")]
    pub lambda: f64,
    pub masses: MassParams,
}

/// One averaged-potential term: weight times `m0^2/r F(eps_scale * eps)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialBranch {
    pub weight: f64,
    pub eps_scale: f64,
}

impl HamiltonianSpec {
    pub fn new(index: HamiltonianIndex, m0: f64, lambda: f64, masses: MassParams) -> Result<Self> {
        if !(m0 > 0.0) {
            return Err(Error::arg("m0", format!("{m0} must be positive")));
        }
        if !(lambda > 0.0) {
            return Err(Error::arg("Lambda", format!("{lambda} must be positive")));
        }
        Ok(Self { index, m0, lambda, masses })
    }

    pub fn semi_major_axis(&self) -> f64 {
        coords::semi_major_axis(self.m0, self.lambda)
    }

    pub fn eps_of_r(&self, r: f64) -> f64 {
        self.semi_major_axis() / r
    }

    pub fn branches(&self) -> Vec<PotentialBranch> {
        let (b, bb) = (self.masses.beta, self.masses.beta_bar);
        match self.index {
            HamiltonianIndex::H1 => {
                vec![PotentialBranch { weight: bb / (b + bb), eps_scale: b }, PotentialBranch { weight: b / (b + bb), eps_scale: -bb }]
            }
            HamiltonianIndex::H2 => vec![PotentialBranch { weight: bb / (b + bb), eps_scale: b + bb }],
        }
    }

    /// Weight of the bare Kepler term `-m0^2/r`.
    pub fn kepler_weight(&self) -> f64 {
        let (b, bb) = (self.masses.beta, self.masses.beta_bar);
        match self.index {
            HamiltonianIndex::H1 => 0.0,
            HamiltonianIndex::H2 => b / (b + bb),
        }
    }

    /// `(beta_star, beta_upper)` keyed to this Hamiltonian.
    pub fn mass_bounds(&self) -> (f64, f64) {
        self.masses.bounds_for(self.index)
    }

    /// Radius where the radial potential hits its branch point.
    pub fn branch_radius(&self) -> f64 {
        let (b, bb) = (self.masses.beta, self.masses.beta_bar);
        let scale = match self.index {
            HamiltonianIndex::H1 => b,
            HamiltonianIndex::H2 => b + bb,
        };
        2.0 * scale * self.semi_major_axis()
    }

    /// Smallest radius at which every branch keeps `|eps| < 1/2`.
    pub fn admissible_radius(&self) -> f64 {
        2.0 * self.mass_bounds().1 * self.semi_major_axis()
    }
}

pub fn h_secular(spec: &HamiltonianSpec, s: &SecularState, quad: &QuadratureSpec) -> Result<f64> {
    if !(s.r > 0.0) {
        return Err(Error::Domain(format!("r={} must be positive", s.r)));
    }
    let m0 = spec.m0;
    let eps = spec.eps_of_r(s.r);
    let scale = m0 * m0 / s.r;
    let mut h = s.big_r * s.big_r / (2.0 * m0) + s.big_g * s.big_g / (2.0 * m0 * s.r * s.r) - spec.kepler_weight() * scale;
    for br in spec.branches() {
        let e = br.eps_scale * eps;
        let t = potentials::e_hat(e, spec.lambda, s.big_g, s.g);
        h -= br.weight * scale * potentials::f_eps(e, t, quad)?;
    }
    Ok(h)
}

/// Split of the action-angle Hamiltonian into its Kepler part and the
/// perturbation.
pub fn perturbation(spec: &HamiltonianSpec, st: &ActionAngleState, quad: &QuadratureSpec) -> Result<f64> {
    let (_, r) = coords::rr_forward(spec.m0, st.y, st.x)?;
    perturbation_at_r(spec, st.gcal, st.gamma, r, quad)
}

fn perturbation_at_r(spec: &HamiltonianSpec, gcal: f64, gamma: f64, r: f64, quad: &QuadratureSpec) -> Result<f64> {
    let lambda = spec.lambda;
    if gcal.abs() > lambda {
        return Err(Error::Domain(format!("|Gcal|={} exceeds Lambda", gcal.abs())));
    }
    let m0 = spec.m0;
    let eps = spec.eps_of_r(r);
    let scale = m0 * m0 / r;
    let ecc2 = 1.0 - (gcal / lambda).powi(2);
    let mut f = scale * eps * ecc2 * gamma.cos().powi(2) / 2.0;
    for br in spec.branches() {
        let e = br.eps_scale * eps;
        let t = potentials::e_hat_aa(e, lambda, gcal, gamma);
        f -= br.weight * scale * potentials::f_eps_eval(e, t, quad)?.minus_one;
    }
    Ok(f)
}

pub fn h_action_angle(spec: &HamiltonianSpec, st: &ActionAngleState, quad: &QuadratureSpec) -> Result<f64> {
    if !(st.y > 0.0) {
        return Err(Error::Domain(format!("y={} must be positive", st.y)));
    }
    Ok(-spec.m0.powi(5) / (2.0 * st.y * st.y) + perturbation(spec, st, quad)?)
}

/// Radial Hamiltonian potential on the invariant manifold `G = 0, g = 0`.
pub fn v_radial(spec: &HamiltonianSpec, r: f64) -> Result<f64> {
    let rb = spec.branch_radius();
    if !(r > (1.0 + 1e-9) * rb) {
        return Err(Error::Domain(format!("r={r} at or below branch radius {rb}")));
    }
    let m0 = spec.m0;
    let a = spec.semi_major_axis();
    let sr = r.sqrt();
    let mut v = -spec.kepler_weight() * m0 * m0 / r;
    for br in spec.branches() {
        let q = (r - 2.0 * br.eps_scale * a).sqrt();
        v -= br.weight * 2.0 * m0 * m0 / (q * (sr + q));
    }
    Ok(v)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Chart {
    Secular,
    ActionAngle,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "chart", rename_all = "kebab-case")]
pub enum ChartState {
    Secular(SecularState),
    ActionAngle(ActionAngleState),
}

impl ChartState {
    pub fn chart(&self) -> Chart {
        match self {
            ChartState::Secular(_) => Chart::Secular,
            ChartState::ActionAngle(_) => Chart::ActionAngle,
        }
    }
    pub fn to_array(&self) -> [f64; 4] {
        match self {
            ChartState::Secular(s) => s.to_array(),
            ChartState::ActionAngle(s) => s.to_array(),
        }
    }
    pub fn from_array(chart: Chart, a: [f64; 4]) -> Self {
        match chart {
            Chart::Secular => ChartState::Secular(SecularState::from_array(a)),
            Chart::ActionAngle => ChartState::ActionAngle(ActionAngleState::from_array(a)),
        }
    }
}

pub fn energy(spec: &HamiltonianSpec, st: &ChartState, quad: &QuadratureSpec) -> Result<f64> {
    match st {
        ChartState::Secular(s) => h_secular(spec, s, quad),
        ChartState::ActionAngle(s) => h_action_angle(spec, s, quad),
    }
}

/// Ingredients shared by both charts: derivatives of the potential part
/// `sum_j w_j m0^2/r F_j` with respect to the eccentricity-like action `t`
/// inputs, collected per branch.
struct BranchTerms {
    eps: f64,
    value_minus_one: f64,
    value: f64,
    d_t: f64,
    d_eps: f64,
    weight: f64,
}

fn branch_terms(spec: &HamiltonianSpec, r: f64, t_of: impl Fn(f64) -> f64, quad: &QuadratureSpec) -> Result<Vec<BranchTerms>> {
    let eps = spec.eps_of_r(r);
    spec.branches()
        .into_iter()
        .map(|br| {
            let e = br.eps_scale * eps;
            let v = potentials::f_eps_eval(e, t_of(e), quad)?;
            Ok(BranchTerms { eps: e, value_minus_one: v.minus_one, value: v.value, d_t: v.d_t, d_eps: v.d_eps, weight: br.weight })
        })
        .collect()
}

/// Analytic partials in the order of the chart's state array:
/// `(R, G, r, g)` or `(Gcal, gamma, y, x)`.
pub fn gradient(spec: &HamiltonianSpec, st: &ChartState, h_fd: f64, quad: &QuadratureSpec) -> Result<[f64; 4]> {
    check_margin(spec, st, h_fd)?;
    match st {
        ChartState::Secular(s) => gradient_secular(spec, s, quad),
        ChartState::ActionAngle(s) => gradient_action_angle(spec, s, quad),
    }
}

fn check_margin(spec: &HamiltonianSpec, st: &ChartState, h_fd: f64) -> Result<()> {
    let m = 2.0 * h_fd;
    match st {
        ChartState::Secular(s) => {
            if s.big_g.abs() + m * spec.lambda >= spec.lambda {
                return Err(Error::Domain(format!("|G|={} too close to Lambda", s.big_g.abs())));
            }
            if s.r * (1.0 - m) <= spec.admissible_radius() {
                return Err(Error::Domain(format!("r={} too close to the branch radius", s.r)));
            }
        }
        ChartState::ActionAngle(s) => {
            if s.gcal.abs() > spec.lambda {
                return Err(Error::Domain(format!("|Gcal|={} exceeds Lambda", s.gcal.abs())));
            }
            if s.x <= m || s.x >= std::f64::consts::TAU - m || !(s.y > 0.0) {
                return Err(Error::Domain(format!("(y, x)=({}, {}) outside the chart", s.y, s.x)));
            }
        }
    }
    Ok(())
}

fn gradient_secular(spec: &HamiltonianSpec, s: &SecularState, quad: &QuadratureSpec) -> Result<[f64; 4]> {
    let (m0, lambda) = (spec.m0, spec.lambda);
    let (gg, g, r) = (s.big_g, s.g, s.r);
    let scale = m0 * m0 / r;
    let terms = branch_terms(spec, r, |e| potentials::e_hat(e, lambda, gg, g), quad)?;
    let ratio2 = (gg / lambda).powi(2);
    let mut d_gg = gg / (m0 * r * r);
    let mut d_g = 0.0;
    let mut d_r = -gg * gg / (m0 * r * r * r) + spec.kepler_weight() * scale / r;
    for b in &terms {
        let (de_gg, de_g) = potentials::e_hat_gradient(b.eps, lambda, gg, g);
        d_gg -= b.weight * scale * b.d_t * de_gg;
        d_g -= b.weight * scale * b.d_t * de_g;
        d_r += b.weight * scale / r * (b.value + b.eps * (b.d_eps + b.d_t * ratio2));
    }
    Ok([s.big_r / m0, d_gg, d_r, d_g])
}

fn gradient_action_angle(spec: &HamiltonianSpec, s: &ActionAngleState, quad: &QuadratureSpec) -> Result<[f64; 4]> {
    let (m0, lambda) = (spec.m0, spec.lambda);
    let (gc, ga) = (s.gcal, s.gamma);
    let xi = kepler::solve_radial(s.x, kepler::DEFAULT_TOL)?.xi;
    let one_minus = 1.0 - xi.cos();
    let m3 = m0.powi(3);
    let r = s.y * s.y / m3 * one_minus;
    let scale = m0 * m0 / r;
    let (sg, cg) = ga.sin_cos();
    let ecc2 = 1.0 - (gc / lambda).powi(2);
    let p = (lambda * lambda - gc * gc) * cg * cg;
    let terms = branch_terms(spec, r, |e| potentials::e_hat_aa(e, lambda, gc, ga), quad)?;
    let mut d_gc = -gc * cg * cg / (m0 * r * r);
    let mut d_ga = -(lambda * lambda - gc * gc) * sg * cg / (m0 * r * r);
    let mut d_r = -p / (m0 * r * r * r);
    for b in &terms {
        let dt_gc = 1.0 / lambda - 2.0 * b.eps * gc * cg * cg / (lambda * lambda);
        let dt_ga = -2.0 * b.eps * ecc2 * sg * cg;
        d_gc -= b.weight * scale * b.d_t * dt_gc;
        d_ga -= b.weight * scale * b.d_t * dt_ga;
        d_r += b.weight * scale / r * (b.value_minus_one + b.eps * (b.d_eps + b.d_t * ecc2 * cg * cg));
    }
    let dr_dy = 2.0 * r / s.y;
    let dr_dx = s.y * s.y / m3 * xi.sin() / one_minus;
    Ok([d_gc, d_ga, m0.powi(5) / s.y.powi(3) + d_r * dr_dy, d_r * dr_dx])
}

/// Central finite differences, step `h_fd * max(1, |z_i|)` per coordinate.
pub fn gradient_fd(spec: &HamiltonianSpec, st: &ChartState, h_fd: f64, quad: &QuadratureSpec) -> Result<[f64; 4]> {
    check_margin(spec, st, h_fd)?;
    let chart = st.chart();
    let z = st.to_array();
    let mut out = [0.0; 4];
    for i in 0..4 {
        let h = h_fd * z[i].abs().max(1.0);
        let mut up = z;
        let mut dn = z;
        up[i] += h;
        dn[i] -= h;
        let hu = energy(spec, &ChartState::from_array(chart, up), quad)?;
        let hd = energy(spec, &ChartState::from_array(chart, dn), quad)?;
        out[i] = (hu - hd) / (2.0 * h);
    }
    Ok(out)
}

/// Hamilton's equations in the chart's state order.
pub fn vector_field(spec: &HamiltonianSpec, st: &ChartState, quad: &QuadratureSpec) -> Result<[f64; 4]> {
    Ok(match st {
        ChartState::Secular(s) => {
            // pairs (R, r) and (G, g)
            let d = gradient_secular(spec, s, quad)?;
            [-d[2], -d[3], d[0], d[1]]
        }
        ChartState::ActionAngle(s) => {
            // pairs (Gcal, gamma) and (y, x)
            let d = gradient_action_angle(spec, s, quad)?;
            [-d[1], d[0], -d[3], d[2]]
        }
    })
}
