//! Rescaled averaged potential, its commuting integral, and the
//! renormalizing function that links them.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kepler;

/// Radicands below this are treated as hitting the singular locus.
pub const RADICAND_GUARD: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    TrapezoidPeriodic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub n_nodes: usize,
    pub rule: Rule,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self { n_nodes: 256, rule: Rule::TrapezoidPeriodic }
    }
}

impl QuadratureSpec {
    pub fn new(n_nodes: usize) -> Result<Self> {
        if n_nodes < 32 || !n_nodes.is_multiple_of(2) {
            return Err(Error::arg("n_nodes", format!("{n_nodes}: need an even count >= 32")));
        }
        Ok(Self { n_nodes, rule: Rule::TrapezoidPeriodic })
    }

    fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        let n = self.n_nodes;
        (0..n).map(move |k| TAU * k as f64 / n as f64)
    }
}

/// `(rho, p)` at mean anomaly `ell` on the ellipse of action `G`.
pub fn rho_p(lambda: f64, big_g: f64, ell: f64, g: f64) -> Result<(f64, f64)> {
    if big_g.abs() > lambda {
        return Err(Error::arg("G", format!("|{big_g}| exceeds Lambda={lambda}")));
    }
    let e = (1.0 - (big_g / lambda).powi(2)).max(0.0).sqrt();
    if e >= 1.0 {
        // degenerate ellipse: Kepler's equation reads xi - sin xi = ell
        let xi = kepler::solve_radial(ell.rem_euclid(TAU), kepler::DEFAULT_TOL)?.xi;
        return Ok(rho_p_at_xi(e, big_g / lambda, xi, g));
    }
    let xi = kepler::solve_kepler(e, ell, kepler::DEFAULT_TOL)?.xi;
    Ok(rho_p_at_xi(e, big_g / lambda, xi, g))
}

#[inline]
fn rho_p_at_xi(e: f64, ratio: f64, xi: f64, g: f64) -> (f64, f64) {
    let (s, c) = xi.sin_cos();
    let rho = 1.0 - e * c;
    let p = (c - e) * g.cos() - ratio * s * g.sin();
    (rho, p)
}

/// Averaged rescaled potential. The mean-anomaly average is computed in the
/// eccentric anomaly (`d ell = rho d xi`), which keeps the integrand smooth
/// and periodic even for `e -> 1`.
pub fn u_hat(eps: f64, lambda: f64, big_g: f64, g: f64, quad: &QuadratureSpec) -> Result<f64> {
    if big_g.abs() > lambda {
        return Err(Error::arg("G", format!("|{big_g}| exceeds Lambda={lambda}")));
    }
    if eps == 0.0 {
        return Ok(1.0);
    }
    let ratio = big_g / lambda;
    let e = (1.0 - ratio * ratio).max(0.0).sqrt();
    let mut sum = 0.0;
    let mut min_rad = f64::INFINITY;
    for xi in quad.nodes() {
        let (rho, p) = rho_p_at_xi(e, ratio, xi, g);
        let rad = 1.0 + 2.0 * eps * p + eps * eps * rho * rho;
        min_rad = min_rad.min(rad);
        if rad > 0.0 {
            sum += rho / rad.sqrt();
        }
    }
    if min_rad < RADICAND_GUARD {
        return Err(Error::SingularLocus { min: min_rad, guard: RADICAND_GUARD });
    }
    Ok(sum / quad.n_nodes as f64)
}

pub fn e_hat(eps: f64, lambda: f64, big_g: f64, g: f64) -> f64 {
    let s = big_g / lambda;
    (1.0 - s * s).max(0.0).sqrt() * g.cos() + eps * s * s
}

/// `(dE/dG, dE/dg)`; the first is singular at `|G| = Lambda`.
pub fn e_hat_gradient(eps: f64, lambda: f64, big_g: f64, g: f64) -> (f64, f64) {
    let s = big_g / lambda;
    let w = (1.0 - s * s).max(0.0).sqrt();
    let (sg, cg) = g.sin_cos();
    let d_g = if big_g == 0.0 { 0.0 } else { -(s / lambda) * cg / w + 2.0 * eps * s / lambda };
    (d_g, -w * sg)
}

/// The integral in the action-angle chart.
pub fn e_hat_aa(eps: f64, lambda: f64, gcal: f64, gamma: f64) -> f64 {
    let s = gcal / lambda;
    s + eps * (1.0 - s * s) * gamma.cos().powi(2)
}

/// Value of the renormalizing function and the derivatives the flows need,
/// from one sweep over the nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenormEval {
    pub value: f64,
    /// `value - 1` without cancellation, for tiny `eps`
    pub minus_one: f64,
    pub d_t: f64,
    pub d_eps: f64,
}

pub fn f_eps_eval(eps: f64, t: f64, quad: &QuadratureSpec) -> Result<RenormEval> {
    if !(eps.abs() < 0.5) {
        return Err(Error::arg("eps", format!("|{eps}| must be below 1/2")));
    }
    let mut acc = [0.0f64; 4];
    let mut min_rad = f64::INFINITY;
    for xi in quad.nodes() {
        let u = 1.0 - xi.cos();
        let d = 1.0 - 2.0 * eps * u * t + eps * eps * u * u;
        min_rad = min_rad.min(d);
        if d <= 0.0 {
            continue;
        }
        let sd = d.sqrt();
        let d32 = d * sd;
        acc[0] += u / sd;
        // u/sqrt(D) - u = u (1 - D)/(sqrt(D)(1 + sqrt(D))) and the mean of u is 1
        acc[1] += u * u * eps * (2.0 * t - eps * u) / (sd * (1.0 + sd));
        acc[2] += eps * u * u / d32;
        acc[3] += u * u * (t - eps * u) / d32;
    }
    if min_rad < RADICAND_GUARD {
        return Err(Error::SingularLocus { min: min_rad, guard: RADICAND_GUARD });
    }
    let n = quad.n_nodes as f64;
    Ok(RenormEval { value: acc[0] / n, minus_one: acc[1] / n, d_t: acc[2] / n, d_eps: acc[3] / n })
}

pub fn f_eps(eps: f64, t: f64, quad: &QuadratureSpec) -> Result<f64> {
    Ok(f_eps_eval(eps, t, quad)?.value)
}

pub fn f_eps_derivative(eps: f64, t: f64, quad: &QuadratureSpec) -> Result<f64> {
    Ok(f_eps_eval(eps, t, quad)?.d_t)
}

/// Closed form of the renormalizing function at `t = 1`.
pub fn f_eps_at_one(eps: f64) -> Result<f64> {
    if !(eps < 0.5) {
        return Err(Error::arg("eps", format!("{eps} must be below 1/2")));
    }
    let s = (1.0 - 2.0 * eps).sqrt();
    Ok(2.0 / (s * (1.0 + s)))
}

/// The real `t` at which the renormalizing function loses holomorphy.
pub fn singularity_t(eps: f64) -> Result<f64> {
    if eps == 0.0 {
        return Err(Error::arg("eps", "zero: no singular locus"));
    }
    Ok(eps + 0.25 / eps)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenormCheck {
    pub eps: f64,
    pub samples: usize,
    pub max_residual: f64,
    /// samples discarded by the singular-locus guard and redrawn
    pub rejected: usize,
}

fn sample_points(n: usize, lambda: f64, seed: u64, margin: f64) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| (rng.gen_range(-1.0 + margin..1.0 - margin) * lambda, rng.gen_range(-PI..PI))).collect()
}

/// Largest `|U - F(E)|` over seeded random points of the cylinder.
pub fn check_renorm_identity(eps: f64, lambda: f64, sample_n: usize, quad: &QuadratureSpec, seed: u64) -> Result<RenormCheck> {
    if !(eps.abs() < 0.5) {
        return Err(Error::arg("eps", format!("|{eps}| must be below 1/2")));
    }
    let mut rejected = 0;
    let mut worst: f64 = 0.0;
    let mut got = 0;
    let mut round = 0u64;
    while got < sample_n {
        let pts = sample_points(sample_n - got, lambda, seed.wrapping_add(round), 0.0);
        let res: Vec<Option<f64>> = pts
            .par_iter()
            .map(|&(big_g, g)| {
                let u = u_hat(eps, lambda, big_g, g, quad).ok()?;
                let f = f_eps(eps, e_hat(eps, lambda, big_g, g), quad).ok()?;
                Some((u - f).abs())
            })
            .collect();
        for r in res {
            match r {
                Some(v) => {
                    worst = worst.max(v);
                    got += 1;
                }
                None => rejected += 1,
            }
        }
        round += 1;
        if round > 100 {
            return Err(Error::Domain("too many samples rejected near the singular locus".into()));
        }
    }
    Ok(RenormCheck { eps, samples: sample_n, max_residual: worst, rejected })
}

/// Largest canonical bracket `{U, E}` in `(G, g)` by central differences.
pub fn check_commutation(eps: f64, lambda: f64, sample_n: usize, h: f64, quad: &QuadratureSpec, seed: u64) -> Result<f64> {
    let margin = 2.0 * h / lambda + 1e-3;
    let pts = sample_points(sample_n, lambda, seed, margin);
    let vals: Result<Vec<f64>> = pts
        .par_iter()
        .map(|&(big_g, g)| {
            let u = |a: f64, b: f64| u_hat(eps, lambda, a, b, quad);
            let e = |a: f64, b: f64| e_hat(eps, lambda, a, b);
            let u_gg = (u(big_g + h, g)? - u(big_g - h, g)?) / (2.0 * h);
            let u_g = (u(big_g, g + h)? - u(big_g, g - h)?) / (2.0 * h);
            let e_gg = (e(big_g + h, g) - e(big_g - h, g)) / (2.0 * h);
            let e_g = (e(big_g, g + h) - e(big_g, g - h)) / (2.0 * h);
            Ok((u_gg * e_g - u_g * e_gg).abs())
        })
        .collect();
    Ok(vals?.into_iter().fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q() -> QuadratureSpec {
        QuadratureSpec::default()
    }

    #[test]
    fn quadrature_spec_validation() {
        assert!(QuadratureSpec::new(16).is_err());
        assert!(QuadratureSpec::new(33).is_err());
        assert!(QuadratureSpec::new(64).is_ok());
    }

    #[test]
    fn rho_p_examples() {
        let (rho, p) = rho_p(1.0, 1.0, 0.8, 0.0).unwrap();
        assert!((rho - 1.0).abs() < 1e-15 && (p - 0.8f64.cos()).abs() < 1e-15);
        let (rho, _) = rho_p(1.0, 0.0, 0.0, 0.4).unwrap();
        assert!(rho.abs() < 1e-15);
    }

    #[test]
    fn rho_p_matches_symbolic_recomputation() {
        let (lambda, big_g, ell, g): (f64, f64, f64, f64) = (1.4, 0.6, 2.1, -0.9);
        let e = (1.0 - (big_g / lambda).powi(2)).sqrt();
        let xi = kepler::solve_kepler(e, ell, 1e-15).unwrap().xi;
        let want_p = (xi.cos() - e) * g.cos() - (big_g / lambda) * xi.sin() * g.sin();
        let (rho, p) = rho_p(lambda, big_g, ell, g).unwrap();
        assert!((rho - (1.0 - e * xi.cos())).abs() < 1e-15);
        assert!((p - want_p).abs() < 1e-15);
    }

    #[test]
    fn u_hat_examples() {
        assert_eq!(u_hat(0.0, 1.0, 0.3, 1.0, &q()).unwrap(), 1.0);
        let closed = f_eps_at_one(0.25).unwrap();
        assert!((u_hat(0.25, 1.0, 0.0, 0.0, &q()).unwrap() - closed).abs() < 1e-10);
        assert!((closed - 1.65685).abs() < 1e-5);
        let fine = QuadratureSpec::new(512).unwrap();
        let a = u_hat(0.3, 1.0, 0.41, 2.2, &q()).unwrap();
        let b = u_hat(0.3, 1.0, 0.41, 2.2, &fine).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn e_hat_examples() {
        assert_eq!(e_hat(0.3, 2.0, 0.0, 0.0), 1.0);
        assert_eq!(e_hat(0.3, 2.0, 0.0, PI), -1.0);
        assert!((e_hat(0.3, 2.0, 2.0, 1.1) - 0.3).abs() < 1e-15);
        assert_eq!(e_hat_aa(0.3, 2.0, 2.0, 0.5), 1.0);
        assert_eq!(e_hat_aa(0.3, 2.0, 0.0, 0.0), 0.3);
    }

    #[test]
    fn e_hat_charts_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let lambda = rng.gen_range(0.5..2.0);
            let eps = rng.gen_range(-0.45..0.45);
            let gcal = rng.gen_range(0.01..1.0) * lambda * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let gamma = rng.gen_range(-PI..PI);
            let (big_g, g) = crate::coords::gg_forward(lambda, gcal, gamma).unwrap();
            let a = e_hat_aa(eps, lambda, gcal, gamma);
            let b = e_hat(eps, lambda, big_g, g);
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn e_hat_is_even() {
        for &(big_g, g) in &[(0.3, 0.2), (0.9, 2.0), (-0.4, -1.0)] {
            let v = e_hat(0.37, 1.0, big_g, g);
            assert_eq!(v, e_hat(0.37, 1.0, -big_g, g));
            assert_eq!(v, e_hat(0.37, 1.0, big_g, -g));
        }
    }

    #[test]
    fn e_hat_gradient_matches_differences() {
        let h = 1e-6;
        for &(eps, big_g, g) in &[(0.3, 0.3, 0.2), (-0.2, -0.6, 2.5), (0.8, 0.1, -1.0)] {
            let (dg, dgg) = e_hat_gradient(eps, 1.2, big_g, g);
            let fd_g = (e_hat(eps, 1.2, big_g + h, g) - e_hat(eps, 1.2, big_g - h, g)) / (2.0 * h);
            let fd_gg = (e_hat(eps, 1.2, big_g, g + h) - e_hat(eps, 1.2, big_g, g - h)) / (2.0 * h);
            assert!((dg - fd_g).abs() < 1e-8);
            assert!((dgg - fd_gg).abs() < 1e-8);
        }
    }

    #[test]
    fn f_eps_examples() {
        assert!((f_eps(0.0, 0.7, &q()).unwrap() - 1.0).abs() < 1e-15);
        assert!((f_eps(0.25, 1.0, &q()).unwrap() - 1.65685).abs() < 1e-5);
        for eps in [0.1, 0.2, 0.3, 0.4, -0.3] {
            let a = f_eps(eps, 1.0, &q()).unwrap();
            assert!((a - f_eps_at_one(eps).unwrap()).abs() < 1e-10);
        }
        assert!(f_eps(0.6, 0.0, &q()).is_err());
        assert!(f_eps_at_one(0.5).is_err());
        assert_eq!(f_eps_at_one(0.0).unwrap(), 1.0);
    }

    #[test]
    fn minus_one_is_consistent() {
        for &(eps, t) in &[(0.3, 0.4), (-0.2, 0.9), (1e-9, 0.5), (0.1, -1.0)] {
            let v = f_eps_eval(eps, t, &q()).unwrap();
            assert!((v.minus_one - (v.value - 1.0)).abs() < 1e-14);
        }
        // tiny eps: leading behaviour is eps (2t + ... ) * mean(u^2)/2 = 1.5 eps t
        let v = f_eps_eval(1e-12, 0.8, &q()).unwrap();
        assert!((v.minus_one / 1e-12 - 1.5 * 0.8).abs() < 1e-6);
    }

    #[test]
    fn derivatives_match_differences() {
        let h = 1e-5;
        for &(eps, t) in &[(0.25, 0.0), (0.4, 0.9), (-0.3, -0.5), (0.1, 1.5)] {
            let v = f_eps_eval(eps, t, &q()).unwrap();
            let fd_t = (f_eps(eps, t + h, &q()).unwrap() - f_eps(eps, t - h, &q()).unwrap()) / (2.0 * h);
            let fd_e = (f_eps(eps + h, t, &q()).unwrap() - f_eps(eps - h, t, &q()).unwrap()) / (2.0 * h);
            assert!((v.d_t - fd_t).abs() < 1e-7, "{} {}", v.d_t, fd_t);
            assert!((v.d_eps - fd_e).abs() < 1e-7);
        }
        assert_eq!(f_eps_derivative(0.0, 0.3, &q()).unwrap(), 0.0);
        for t in [-0.9, 0.0, 0.9] {
            assert!(f_eps_derivative(0.3, t, &q()).unwrap() > 0.0);
        }
    }

    #[test]
    fn f_eps_symmetry() {
        for &(eps, t) in &[(0.3, 0.2), (0.45, -0.7), (0.1, 1.3)] {
            let a = f_eps(eps, t, &q()).unwrap();
            let b = f_eps(-eps, -t, &q()).unwrap();
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn singularity_examples() {
        assert_eq!(singularity_t(0.25).unwrap(), 1.25);
        assert_eq!(singularity_t(0.5).unwrap(), 1.0);
        assert!(singularity_t(0.0).is_err());
        for k in 1..50 {
            let eps = 0.5 * k as f64 / 50.0;
            assert!(singularity_t(eps).unwrap() > 1.0);
        }
        assert!(matches!(f_eps(0.25, 1.25, &q()), Err(Error::SingularLocus { .. })));
    }

    #[test]
    fn identity_and_commutation() {
        for eps in [0.0, 0.3, -0.3] {
            let r = check_renorm_identity(eps, 1.0, 40, &q(), 9).unwrap();
            assert!(r.max_residual < 1e-8, "{r:?}");
        }
        assert!(check_commutation(0.3, 1.0, 20, 1e-5, &q(), 4).unwrap() < 1e-6);
    }
}
