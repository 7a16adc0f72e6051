//! Mass parameters and the canonical changes of coordinates between the
//! secular chart (R, G, r, g) and the action-angle chart (Gcal, gamma, y, x).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kepler;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frame {
    Jacobi,
    M0centric,
}

/// Which reduced Hamiltonian the mass bounds are keyed to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HamiltonianIndex {
    H1,
    H2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MassParams {
    pub mu: f64,
    pub kappa: f64,
    pub frame: Frame,
    pub gamma_scale: f64,
    pub beta: f64,
    pub beta_bar: f64,
    /// lower mass bound for the frame's own Hamiltonian (see `bounds_for`)
    pub beta_star: f64,
    /// upper mass bound for the frame's own Hamiltonian
    pub beta_upper: f64,
}

impl Frame {
    pub fn natural_index(self) -> HamiltonianIndex {
        match self {
            Frame::Jacobi => HamiltonianIndex::H1,
            Frame::M0centric => HamiltonianIndex::H2,
        }
    }
}

impl MassParams {
    /// `(beta_star, beta_upper)` for either Hamiltonian.
    pub fn bounds_for(&self, index: HamiltonianIndex) -> (f64, f64) {
        let (b, bb) = (self.beta, self.beta_bar);
        match index {
            HamiltonianIndex::H1 => (b * bb / (b + bb), b.max(bb)),
            HamiltonianIndex::H2 => (bb, b + bb),
        }
    }
}

pub fn derive_mass_params(mu: f64, kappa: f64, frame: Frame) -> Result<MassParams> {
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(Error::arg("mu", format!("{mu} must be positive")));
    }
    if !(kappa > 0.0) || !kappa.is_finite() {
        return Err(Error::arg("kappa", format!("{kappa} must be positive")));
    }
    let (beta, gamma_scale) = match frame {
        Frame::Jacobi => {
            let d = mu * mu * (1.0 + mu + kappa);
            (kappa * kappa * (1.0 + mu).powi(2) / d, kappa.powi(3) * (1.0 + mu).powi(4) / (mu * d))
        }
        Frame::M0centric => {
            let d = mu * mu * (1.0 + kappa);
            (kappa * kappa * (1.0 + mu) / d, kappa.powi(3) * (1.0 + mu).powi(3) / (mu * d))
        }
    };
    let mut p = MassParams { mu, kappa, frame, gamma_scale, beta, beta_bar: mu * beta, beta_star: 0.0, beta_upper: 0.0 };
    let (lo, hi) = p.bounds_for(frame.natural_index());
    p.beta_star = lo;
    p.beta_upper = hi;
    Ok(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecularState {
    #[serde(rename = "R")]
    pub big_r: f64,
    #[serde(rename = "G")]
    pub big_g: f64,
    pub r: f64,
    pub g: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionAngleState {
    #[serde(rename = "Gcal")]
    pub gcal: f64,
    pub gamma: f64,
    pub y: f64,
    pub x: f64,
}

impl SecularState {
    pub fn new(big_r: f64, big_g: f64, r: f64, g: f64) -> Self {
        Self { big_r, big_g, r, g }
    }
    pub fn to_array(self) -> [f64; 4] {
        [self.big_r, self.big_g, self.r, self.g]
    }
    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }
}

impl ActionAngleState {
    pub fn new(gcal: f64, gamma: f64, y: f64, x: f64) -> Self {
        Self { gcal, gamma, y, x }
    }
    pub fn to_array(self) -> [f64; 4] {
        [self.gcal, self.gamma, self.y, self.x]
    }
    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }
}

/// `(Gcal, gamma) -> (G, g)`, the action-angle chart around the circular
/// orbits `Gcal = +-Lambda`.
pub fn gg_forward(lambda: f64, gcal: f64, gamma: f64) -> Result<(f64, f64)> {
    if gcal == 0.0 {
        return Err(Error::arg("Gcal", "zero: branch undefined"));
    }
    if gcal.abs() > lambda {
        return Err(Error::arg("Gcal", format!("|{gcal}| exceeds Lambda={lambda}")));
    }
    let q = (1.0 - (gcal / lambda).powi(2)).max(0.0);
    let big_g = (lambda * lambda - gcal * gcal).max(0.0).sqrt() * gamma.cos();
    let k = if gcal < 0.0 { PI } else { 0.0 };
    let g = -((lambda / gcal) * q.sqrt() * gamma.sin()).atan() + k;
    Ok((big_g, g))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    Near0,
    NearPi,
}

/// Inverse of [`gg_forward`] on the chart of the requested branch.
pub fn gg_inverse(lambda: f64, big_g: f64, g: f64, branch: Branch) -> Result<(f64, f64)> {
    if big_g.abs() >= lambda {
        return Err(Error::Domain(format!("|G|={} not below Lambda={lambda}", big_g.abs())));
    }
    let c = g.cos();
    let inside = match branch {
        Branch::Near0 => c > 0.0,
        Branch::NearPi => c < 0.0,
    };
    if !inside {
        return Err(Error::Domain(format!("g={g} outside the {branch:?} chart")));
    }
    let w = (lambda * lambda - big_g * big_g).sqrt();
    let gcal = w * c;
    let gamma = if big_g == 0.0 && g.sin() == 0.0 { 0.0 } else { (-w * g.sin()).atan2(big_g) };
    Ok((gcal, gamma))
}

/// `(y, x) -> (R, r)`. The momentum carries its sign: outgoing for `x < pi`.
pub fn rr_forward(m0: f64, y: f64, x: f64) -> Result<(f64, f64)> {
    if !(y > 0.0) {
        return Err(Error::arg("y", format!("{y} must be positive")));
    }
    let xi = kepler::solve_radial(x, kepler::DEFAULT_TOL)?.xi;
    let one_minus = 1.0 - xi.cos();
    if one_minus <= 0.0 {
        return Err(Error::Domain("collision: r = 0".into()));
    }
    let m3 = m0.powi(3);
    let r = y * y / m3 * one_minus;
    let big_r = m3 / y * (0.5 * xi).cos() / (0.5 * xi).sin();
    Ok((big_r, r))
}

/// Semi-major axis and eccentricity.
pub fn orbital_elements(m0: f64, lambda: f64, big_g: f64) -> Result<(f64, f64)> {
    if big_g.abs() > lambda {
        return Err(Error::arg("G", format!("|{big_g}| exceeds Lambda={lambda}")));
    }
    let a = lambda * lambda / m0.powi(3);
    let e = (1.0 - (big_g / lambda).powi(2)).max(0.0).sqrt();
    Ok((a, e))
}

/// Semi-major axis alone.
pub fn semi_major_axis(m0: f64, lambda: f64) -> f64 {
    lambda * lambda / m0.powi(3)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn unit_masses_jacobi() {
        let p = derive_mass_params(1.0, 1.0, Frame::Jacobi).unwrap();
        assert!((p.beta - 4.0 / 3.0).abs() < 1e-15);
        assert!((p.beta_bar - 4.0 / 3.0).abs() < 1e-15);
        assert!((p.gamma_scale - 16.0 / 3.0).abs() < 1e-14);
        let (lo, hi) = p.bounds_for(HamiltonianIndex::H1);
        assert!((lo - 2.0 / 3.0).abs() < 1e-15 && (hi - 4.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn mass_ratio_is_exact_and_bounds_ordered() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let mu = 10f64.powf(rng.gen_range(-3.0..3.0));
            let kappa = 10f64.powf(rng.gen_range(-3.0..3.0));
            for frame in [Frame::Jacobi, Frame::M0centric] {
                let p = derive_mass_params(mu, kappa, frame).unwrap();
                assert_eq!(p.beta_bar, mu * p.beta);
                for idx in [HamiltonianIndex::H1, HamiltonianIndex::H2] {
                    let (lo, hi) = p.bounds_for(idx);
                    assert!(lo < hi);
                }
            }
        }
        assert!(derive_mass_params(0.0, 1.0, Frame::Jacobi).is_err());
        assert!(derive_mass_params(1.0, -1.0, Frame::M0centric).is_err());
    }

    #[test]
    fn gg_forward_examples() {
        let (gg, g) = gg_forward(1.0, 1.0, 0.7).unwrap();
        assert!(gg.abs() < 1e-15 && g.abs() < 1e-15);
        let (gg, g) = gg_forward(1.0, 0.5, 0.0).unwrap();
        assert!((gg - 3f64.sqrt() / 2.0).abs() < 1e-15 && g.abs() < 1e-15);
        let (gg, g) = gg_forward(1.0, -0.5, 0.0).unwrap();
        assert!((gg - 3f64.sqrt() / 2.0).abs() < 1e-15 && (g - PI).abs() < 1e-15);
        assert!(gg_forward(1.0, 0.0, 0.1).is_err());
        assert!(gg_forward(1.0, 1.5, 0.1).is_err());
    }

    #[test]
    fn gg_inverse_examples() {
        let (gc, ga) = gg_inverse(2.0, 0.0, 0.0, Branch::Near0).unwrap();
        assert_eq!((gc, ga), (2.0, 0.0));
        let (gc, ga) = gg_inverse(1.0, 3f64.sqrt() / 2.0, PI, Branch::NearPi).unwrap();
        assert!((gc + 0.5).abs() < 1e-15 && ga.abs() < 1e-15);
        assert!(gg_inverse(1.0, 0.1, PI, Branch::Near0).is_err());
    }

    fn wrap(a: f64) -> f64 {
        (a + PI).rem_euclid(2.0 * PI) - PI
    }

    #[test]
    fn gg_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let lambda = 1.3;
        let mut worst: f64 = 0.0;
        for i in 0..100 {
            let branch = if i % 2 == 0 { Branch::Near0 } else { Branch::NearPi };
            let g0 = rng.gen_range(-1.4..1.4) + if branch == Branch::NearPi { PI } else { 0.0 };
            let big_g = rng.gen_range(-0.95..0.95) * lambda;
            let (gc, ga) = gg_inverse(lambda, big_g, g0, branch).unwrap();
            let (gb, gg) = gg_forward(lambda, gc, ga).unwrap();
            worst = worst.max((gb - big_g).abs()).max(wrap(gg - g0).abs());
        }
        assert!(worst < 1e-12, "{worst}");
    }

    #[test]
    fn gg_forward_is_canonical() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let lambda = 1.0;
        let h = 1e-6;
        for _ in 0..200 {
            let gc = rng.gen_range(0.05..0.95) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let ga = rng.gen_range(-3.0..3.0);
            let f = |a: f64, b: f64| gg_forward(lambda, a, b).unwrap();
            let (p1, q1) = f(gc + h, ga);
            let (p0, q0) = f(gc - h, ga);
            let (p3, q3) = f(gc, ga + h);
            let (p2, q2) = f(gc, ga - h);
            let (gg_gc, g_gc) = ((p1 - p0) / (2.0 * h), (q1 - q0) / (2.0 * h));
            let (gg_ga, g_ga) = ((p3 - p2) / (2.0 * h), (q3 - q2) / (2.0 * h));
            // (Gcal, gamma) action-angle -> (G, g): {G, g} must equal {Gcal, gamma}
            let det = gg_gc * g_ga - gg_ga * g_gc;
            assert!((det - 1.0).abs() < 1e-8, "det {det}");
        }
    }

    #[test]
    fn rr_forward_examples_and_energy() {
        let (m0, y) = (1.7, 2.3);
        let (big_r, r) = rr_forward(m0, y, PI).unwrap();
        assert!(big_r.abs() < 1e-14 && (r - 2.0 * y * y / m0.powi(3)).abs() < 1e-13);
        let (_, r) = rr_forward(1.0, 1.0, PI / 2.0).unwrap();
        // bisection oracle: xi' = 2.3098814600..., 1 - cos xi' = 1.6736120291...
        assert!((r - 1.673_612_029_183_214_6).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let y = rng.gen_range(0.3..5.0);
            let x = rng.gen_range(0.3..(2.0 * PI - 0.3));
            let m0 = rng.gen_range(0.5..2.0);
            let (big_r, r) = rr_forward(m0, y, x).unwrap();
            let lhs = big_r * big_r / (2.0 * m0) - m0 * m0 / r;
            let rhs = -m0.powi(5) / (2.0 * y * y);
            assert!((lhs - rhs).abs() < 1e-12 * rhs.abs().max(1.0));
        }
        assert!(rr_forward(1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn rr_forward_is_canonical() {
        let h = 1e-6;
        for &(y, x) in &[(1.0, 1.0), (2.0, 3.0), (0.7, 5.0)] {
            let f = |a: f64, b: f64| rr_forward(1.0, a, b).unwrap();
            let (p1, q1) = f(y + h, x);
            let (p0, q0) = f(y - h, x);
            let (p3, q3) = f(y, x + h);
            let (p2, q2) = f(y, x - h);
            let det = (p1 - p0) * (q3 - q2) - (p3 - p2) * (q1 - q0);
            assert!((det / (4.0 * h * h) - 1.0).abs() < 1e-7);
        }
    }

    #[test]
    fn orbital_elements_examples() {
        assert_eq!(orbital_elements(1.0, 1.0, 1.0).unwrap(), (1.0, 0.0));
        assert_eq!(orbital_elements(1.0, 1.0, 0.0).unwrap(), (1.0, 1.0));
        let (a, e) = orbital_elements(1.0, 2.0, 1.0).unwrap();
        assert_eq!(a, 4.0);
        assert!((e - 3f64.sqrt() / 2.0).abs() < 1e-15);
        assert!(orbital_elements(1.0, 1.0, 1.1).is_err());
    }
}
