//! Small-divisor-free primitive: the homological equation is integrated
//! along the non-periodic coordinate `x` instead of dividing by frequencies.

use num_complex::Complex64;

use super::cheb;
use super::series::{ModeKey, Shape, TFSeries};
use crate::error::{Error, Result};

/// Frequencies of the integrable part, tabulated on the `(I, y)` sub-grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Frequencies {
    /// one table per action
    pub omega_i: Vec<Vec<f64>>,
    /// constant normal frequencies of the `(p, q)` pairs
    pub omega_j: Vec<f64>,
    pub omega_y: Vec<f64>,
}

fn sub_len(shape: &Shape) -> usize {
    shape.nodes.pow(shape.n_angles as u32 + 1)
}

impl Frequencies {
    pub fn from_fn(shape: &Shape, f: impl Fn(&[f64], f64) -> (Vec<f64>, f64), omega_j: Vec<f64>) -> Result<Self> {
        if omega_j.len() != shape.m_pq {
            return Err(Error::arg("omega_j", "one frequency per (p, q) pair"));
        }
        let n = shape.nodes;
        let na = shape.n_angles;
        let mut omega_i = vec![Vec::with_capacity(sub_len(shape)); na];
        let mut omega_y = Vec::with_capacity(sub_len(shape));
        for s in 0..sub_len(shape) {
            let pt = shape.grid_point(s * n);
            let (wi, wy) = f(&pt[..na], pt[na]);
            if wi.len() != na {
                return Err(Error::arg("omega_i", "one frequency per action"));
            }
            for (t, w) in omega_i.iter_mut().zip(wi) {
                t.push(w);
            }
            omega_y.push(wy);
        }
        let out = Self { omega_i, omega_j, omega_y };
        out.check()?;
        Ok(out)
    }

    /// Gradient of an integrable `h(I, y)` given as a series.
    pub fn from_series(h: &TFSeries, omega_j: Vec<f64>) -> Result<Self> {
        let sh = h.shape();
        let zero = ModeKey::zero(sh);
        let scale = h.max_abs().max(f64::MIN_POSITIVE);
        for (k, v) in h.modes() {
            if *k != zero && v.iter().any(|c| c.norm() > 1e-14 * scale) {
                return Err(Error::arg("h", "integrable part must not depend on angles or (p, q)"));
            }
        }
        let n = sh.nodes;
        let base = TFSeries::from_modes(sh, h.mode(&zero).map(|v| (zero.clone(), v.to_vec())))?;
        let line_avg = |s: &TFSeries, label: &'static str| -> Result<Vec<f64>> {
            let vals = s.mode(&zero).map(|v| v.to_vec()).unwrap_or_else(|| vec![Complex64::new(0.0, 0.0); sh.grid_len()]);
            let top = vals.iter().map(|c| c.norm()).fold(0.0, f64::max);
            let mut out = Vec::with_capacity(sub_len(sh));
            for line in vals.chunks(n) {
                let (lo, hi) = line.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), c| (a.min(c.re), b.max(c.re)));
                if hi - lo > 1e-9 * top.max(f64::MIN_POSITIVE) {
                    return Err(Error::arg(label, "integrable part must not depend on x"));
                }
                out.push(line.iter().map(|c| c.re).sum::<f64>() / n as f64);
            }
            Ok(out)
        };
        let omega_i = (0..sh.n_angles).map(|a| line_avg(&base.d_action(a), "h")).collect::<Result<_>>()?;
        let omega_y = line_avg(&base.d_y(), "h")?;
        if omega_j.len() != sh.m_pq {
            return Err(Error::arg("omega_j", "one frequency per (p, q) pair"));
        }
        let out = Self { omega_i, omega_j, omega_y };
        out.check()?;
        Ok(out)
    }

    fn check(&self) -> Result<()> {
        let all_pos = self.omega_y.iter().all(|&w| w > 0.0);
        let all_neg = self.omega_y.iter().all(|&w| w < 0.0);
        if !(all_pos || all_neg) || self.omega_y.iter().any(|w| !w.is_finite()) {
            return Err(Error::Domain("omega_y vanishes on the box".into()));
        }
        Ok(())
    }

    fn lambda(&self, key: &ModeKey, s: usize) -> Complex64 {
        let normal: f64 = key.h.iter().zip(&key.j).zip(&self.omega_j).map(|((&h, &j), w)| (h as f64 - j as f64) * w).sum();
        let tor: f64 = key.k.iter().zip(&self.omega_i).map(|(&k, t)| k as f64 * t[s]).sum();
        Complex64::new(normal, tor)
    }
}

/// Lower end of integration: `x = 0` when it lies in the box, otherwise the
/// box's lower edge.
pub fn nqp_base_point((a, b): (f64, f64)) -> f64 {
    if a <= 0.0 && 0.0 <= b {
        0.0
    } else {
        a
    }
}

/// Solve `omega_y dphi/dx + lambda phi = f` mode by mode with
/// `phi(x0) = 0`. Normal-class modes are skipped.
pub fn nqp_primitive(f_osc: &TFSeries, freq: &Frequencies) -> Result<TFSeries> {
    let sh = f_osc.shape();
    if freq.omega_y.len() != sub_len(sh) {
        return Err(Error::Shape("frequency tables do not match the grid".into()));
    }
    let n = sh.nodes;
    let bx = sh.boxes[sh.x_axis()];
    let x0 = nqp_base_point(bx);
    let half = 0.5 * (bx.1 - bx.0);
    let xs = cheb::nodes_on(n, bx);
    let to_coef = cheb::values_to_coeffs(n);
    let eval_n1 = cheb::coeffs_to_values(n, n + 1);
    let t0 = Complex64::new(cheb::to_reference(x0, bx), 0.0);
    let mut modes = Vec::new();
    for (key, vals) in f_osc.modes() {
        if key.is_average() {
            continue;
        }
        let mut out = vec![Complex64::new(0.0, 0.0); vals.len()];
        for (s, line) in vals.chunks(n).enumerate() {
            let wy = freq.omega_y[s];
            let c = freq.lambda(key, s) / wy;
            let g: Vec<Complex64> = line.iter().zip(&xs).map(|(v, &x)| v * (c * (x - x0)).exp()).collect();
            let coef: Vec<Complex64> = (0..n).map(|k| (0..n).map(|i| to_coef.get(k, i) * g[i]).sum()).collect();
            let anti = cheb::integrate_coeffs(&coef, half);
            let at_base = cheb::clenshaw(&anti, t0);
            for i in 0..n {
                let a: Complex64 = (0..=n).map(|k| eval_n1.get(i, k) * anti[k]).sum();
                out[s * n + i] = (-c * (xs[i] - x0)).exp() * (a - at_base) / wy;
            }
        }
        modes.push((key.clone(), out));
    }
    TFSeries::from_modes(sh, modes)
}

/// Largest gridwise residual of `omega_y dphi/dx + lambda phi - f` over the
/// non-normal modes, absolute and relative to `max |f|`.
pub fn homological_residual(phi: &TFSeries, f_osc: &TFSeries, freq: &Frequencies) -> Result<(f64, f64)> {
    let sh = f_osc.shape();
    sh.check_compatible(phi.shape())?;
    let n = sh.nodes;
    let dphi = phi.d_x();
    let zeros = vec![Complex64::new(0.0, 0.0); sh.grid_len()];
    let mut worst: f64 = 0.0;
    let keys: std::collections::BTreeSet<&ModeKey> = phi.modes().map(|(k, _)| k).chain(f_osc.modes().map(|(k, _)| k)).collect();
    for key in keys {
        if key.is_average() {
            continue;
        }
        let p = phi.mode(key).unwrap_or(&zeros);
        let dp = dphi.mode(key).unwrap_or(&zeros);
        let f = f_osc.mode(key).unwrap_or(&zeros);
        for i in 0..sh.grid_len() {
            let s = i / n;
            let r = freq.omega_y[s] * dp[i] + freq.lambda(key, s) * p[i] - f[i];
            worst = worst.max(r.norm());
        }
    }
    let scale = f_osc.max_abs();
    Ok((worst, if scale > 0.0 { worst / scale } else { worst }))
}
