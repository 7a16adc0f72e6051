//! Experiment configuration: one TOML file with a section per concern.
//! Every section is optional except where a subcommand needs it; unknown
//! keys are rejected so typos surface as config errors.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use perilib_core::coords::derive_mass_params;
use perilib_core::dynamics::{build_parameter_chain, ChainInputs, DomainParams, StepControl, Surrogates};
use perilib_core::{Chart, Frame, HamiltonianIndex, HamiltonianSpec, QuadratureSpec};
use serde::Deserialize;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: Option<u64>,
    pub masses: Option<MassesCfg>,
    pub hamiltonian: Option<HamiltonianCfg>,
    pub domain: Option<DomainParams>,
    /// derive masses and domain from the parameter construction instead
    pub chain: Option<ChainCfg>,
    #[serde(default)]
    pub surrogates: Surrogates,
    #[serde(default)]
    pub quadrature: QuadratureCfg,
    #[serde(default)]
    pub integrator: IntegratorCfg,
    #[serde(default)]
    pub output: OutputCfg,
    #[serde(default)]
    pub portrait: PortraitCfg,
    #[serde(default)]
    pub verify_renorm: VerifyRenormCfg,
    #[serde(default)]
    pub evolve: EvolveCfg,
    #[serde(default)]
    pub check_theorem: CheckTheoremCfg,
    #[serde(default)]
    pub normalform: NormalFormCfg,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MassesCfg {
    pub mu: f64,
    pub kappa: f64,
    pub frame: Frame,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HamiltonianCfg {
    /// defaults to the frame's natural Hamiltonian
    pub index: Option<HamiltonianIndex>,
    #[serde(default = "one")]
    pub lambda: f64,
    #[serde(default = "one")]
    pub m0: f64,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChainCfg {
    pub eps0: f64,
    pub delta_ratio: f64,
    pub lambda: f64,
    pub m0: f64,
    pub index: HamiltonianIndex,
    pub mu: f64,
    pub margin: f64,
}

impl Default for ChainCfg {
    fn default() -> Self {
        let d = ChainInputs::default();
        Self { eps0: d.eps0, delta_ratio: d.delta_ratio, lambda: d.lambda, m0: d.m0, index: d.index, mu: d.mu, margin: d.margin }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureCfg {
    pub nodes: usize,
}

impl Default for QuadratureCfg {
    fn default() -> Self {
        Self { nodes: QuadratureSpec::default().n_nodes }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorCfg {
    pub rtol: f64,
    pub atol: f64,
    pub energy_tol: f64,
    pub max_steps: usize,
    pub h0: Option<f64>,
    pub h_max: Option<f64>,
}

impl Default for IntegratorCfg {
    fn default() -> Self {
        let c = StepControl::default();
        Self { rtol: c.rtol, atol: c.atol, energy_tol: c.energy_tol, max_steps: c.max_steps, h0: c.h0, h_max: c.h_max }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputCfg {
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PortraitCfg {
    pub eps: f64,
    pub grid: [usize; 2],
    pub levels: usize,
    /// seeds per axis for the equilibrium search
    pub equilibria_grid: usize,
}

impl Default for PortraitCfg {
    fn default() -> Self {
        Self { eps: 0.3, grid: [128, 128], levels: 24, equilibria_grid: 64 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyRenormCfg {
    pub eps: Vec<f64>,
    pub samples: usize,
    pub commutation_samples: usize,
    pub fd_step: f64,
}

impl Default for VerifyRenormCfg {
    fn default() -> Self {
        Self { eps: vec![0.0, 0.1, 0.3], samples: 200, commutation_samples: 50, fd_step: 1e-5 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolveCfg {
    pub chart: Chart,
    /// `[R, G, r, g]` or `[Gcal, gamma, y, x]` depending on `chart`
    pub state: Option<[f64; 4]>,
    pub duration: f64,
    pub stop_at_winding: Option<f64>,
    /// run the theorem's libration experiment instead of a free orbit
    pub libration: Option<LibrationCfg>,
}

impl Default for EvolveCfg {
    fn default() -> Self {
        Self { chart: Chart::Secular, state: None, duration: 100.0, stop_at_winding: None, libration: None }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LibrationCfg {
    /// position of `y` between its lower bound and the window midpoint
    pub y_fraction: f64,
    pub gamma0: f64,
    /// cap on the run length; the domain time when absent
    pub budget: Option<f64>,
    pub steps: u64,
}

impl Default for LibrationCfg {
    fn default() -> Self {
        Self { y_fraction: 0.3, gamma0: 0.2, budget: None, steps: 10 }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CheckTheoremCfg {
    /// number of normal-form steps `N`
    pub steps: u64,
}

impl Default for CheckTheoremCfg {
    fn default() -> Self {
        Self { steps: 10 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NormalFormCfg {
    pub steps: usize,
    pub max_order: usize,
    pub delta: f64,
    pub y_box: (f64, f64),
    pub x_box: (f64, f64),
    pub nodes: usize,
    pub fourier_cutoff: i32,
    pub pq_degree: u32,
    /// multiplies the perturbation; large values break contraction
    pub perturbation_scale: f64,
    pub weights: WeightOverrides,
}

impl Default for NormalFormCfg {
    fn default() -> Self {
        Self {
            steps: 3,
            max_order: 8,
            delta: 0.05,
            y_box: (10.0, 14.0),
            x_box: (PI - 0.1, PI + 0.1),
            nodes: 16,
            fourier_cutoff: 8,
            pq_degree: 4,
            perturbation_scale: 1.0,
            weights: WeightOverrides::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightOverrides {
    pub rho: Option<f64>,
    pub s: Option<f64>,
    pub delta: Option<f64>,
    pub r: Option<f64>,
    pub xi: Option<f64>,
}

fn one() -> f64 {
    1.0
}

fn positive(field: &str, v: f64) -> CliResult<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Config(format!("{field}: {v} must be positive and finite")))
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> CliResult<()> {
        if self.chain.is_some() && (self.masses.is_some() || self.domain.is_some()) {
            return Err(CliError::Config("chain: cannot be combined with [masses] or [domain]".into()));
        }
        if let Some(m) = &self.masses {
            positive("masses.mu", m.mu)?;
            positive("masses.kappa", m.kappa)?;
        }
        if let Some(h) = &self.hamiltonian {
            positive("hamiltonian.lambda", h.lambda)?;
            positive("hamiltonian.m0", h.m0)?;
        }
        if let Some(d) = &self.domain {
            positive("domain.eps0", d.eps0)?;
            positive("domain.delta", d.delta)?;
            positive("domain.s0", d.s0)?;
            positive("domain.alpha_minus", d.alpha_minus)?;
            positive("domain.alpha_plus", d.alpha_plus)?;
            if !(d.alpha_minus < d.alpha_plus / 4.0) {
                return Err(CliError::Config(format!(
                    "domain.alpha_minus: {} must be below alpha_plus/4 = {}",
                    d.alpha_minus,
                    d.alpha_plus / 4.0
                )));
            }
        }
        positive("surrogates.c_upper", self.surrogates.c_upper)?;
        positive("surrogates.c_lower", self.surrogates.c_lower)?;
        QuadratureSpec::new(self.quadrature.nodes).map_err(|e| CliError::at("quadrature.nodes", e))?;
        let i = &self.integrator;
        positive("integrator.rtol", i.rtol)?;
        positive("integrator.atol", i.atol)?;
        positive("integrator.energy_tol", i.energy_tol)?;
        if i.max_steps == 0 {
            return Err(CliError::Config("integrator.max_steps: must be at least 1".into()));
        }
        if let Some(h) = i.h0 {
            positive("integrator.h0", h)?;
        }
        if let Some(h) = i.h_max {
            positive("integrator.h_max", h)?;
        }
        if !(self.evolve.duration >= 0.0 && self.evolve.duration.is_finite()) {
            return Err(CliError::Config(format!("evolve.duration: {} must be nonnegative", self.evolve.duration)));
        }
        let p = &self.portrait;
        if p.grid[0] < 4 || p.grid[1] < 4 {
            return Err(CliError::Config("portrait.grid: need at least 4 points per axis".into()));
        }
        if p.levels == 0 {
            return Err(CliError::Config("portrait.levels: must be at least 1".into()));
        }
        if self.verify_renorm.samples == 0 {
            return Err(CliError::Config("verify_renorm.samples: must be at least 1".into()));
        }
        positive("verify_renorm.fd_step", self.verify_renorm.fd_step)?;
        let n = &self.normalform;
        positive("normalform.delta", n.delta)?;
        positive("normalform.perturbation_scale", n.perturbation_scale)?;
        if !(n.y_box.0 > 0.0 && n.y_box.1 > n.y_box.0) {
            return Err(CliError::Config(format!("normalform.y_box: {:?} must be an increasing positive interval", n.y_box)));
        }
        if !(n.x_box.0 > 0.0 && n.x_box.1 > n.x_box.0 && n.x_box.1 < 2.0 * PI) {
            return Err(CliError::Config(format!("normalform.x_box: {:?} must be an increasing interval inside (0, 2 pi)", n.x_box)));
        }
        Ok(())
    }

    /// Lambda for commands that need nothing else.
    pub fn lambda(&self) -> f64 {
        match (&self.chain, &self.hamiltonian) {
            (Some(c), _) => c.lambda,
            (None, Some(h)) => h.lambda,
            (None, None) => 1.0,
        }
    }

    pub fn quad(&self) -> QuadratureSpec {
        QuadratureSpec::new(self.quadrature.nodes).expect("validated on load")
    }

    pub fn step_control(&self) -> StepControl {
        let i = self.integrator;
        StepControl { rtol: i.rtol, atol: i.atol, energy_tol: i.energy_tol, max_steps: i.max_steps, h0: i.h0, h_max: i.h_max }
    }

    /// The Hamiltonian and, when configured, the theorem's domain.
    pub fn system(&self) -> CliResult<(HamiltonianSpec, Option<DomainParams>)> {
        if let Some(c) = &self.chain {
            let inp = ChainInputs {
                eps0: c.eps0,
                delta_ratio: c.delta_ratio,
                lambda: c.lambda,
                m0: c.m0,
                index: c.index,
                mu: c.mu,
                margin: c.margin,
                surrogates: self.surrogates,
            };
            let p = build_parameter_chain(&inp).map_err(|e| CliError::at("chain", e))?;
            return Ok((p.spec, Some(p.domain)));
        }
        let m = self.masses.ok_or_else(|| CliError::Config("masses: section required (or use [chain])".into()))?;
        let h = self.hamiltonian.unwrap_or(HamiltonianCfg { index: None, lambda: 1.0, m0: 1.0 });
        let masses = derive_mass_params(m.mu, m.kappa, m.frame).map_err(|e| CliError::at("masses", e))?;
        let index = h.index.unwrap_or(m.frame.natural_index());
        let spec = HamiltonianSpec::new(index, h.m0, h.lambda, masses).map_err(|e| CliError::at("hamiltonian", e))?;
        Ok((spec, self.domain))
    }
}
