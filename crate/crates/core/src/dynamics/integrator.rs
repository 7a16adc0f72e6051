//! Dormand-Prince 5(4) with step-size control, generic over the state size.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepControl {
    pub rtol: f64,
    pub atol: f64,
    /// relative energy drift tolerated before a run is flagged
    pub energy_tol: f64,
    pub max_steps: usize,
    /// initial step; chosen automatically when absent
    pub h0: Option<f64>,
    /// cap on the step, useful to resolve events on smooth long runs
    #[serde(default)]
    pub h_max: Option<f64>,
}

impl Default for StepControl {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-10, energy_tol: 1e-8, max_steps: 2_000_000, h0: None, h_max: None }
    }
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [5179.0 / 57600.0, 0.0, 7571.0 / 16695.0, 393.0 / 640.0, -92097.0 / 339200.0, 187.0 / 2100.0, 1.0 / 40.0];

/// One trial step. Returns the 5th-order solution and the scaled error norm.
pub fn dopri_step<const N: usize>(
    f: &impl Fn(f64, &[f64; N]) -> Result<[f64; N]>,
    t: f64,
    y: &[f64; N],
    h: f64,
    ctrl: &StepControl,
) -> Result<([f64; N], f64)> {
    let mut k = [[0.0; N]; 7];
    k[0] = f(t, y)?;
    for s in 1..7 {
        let mut ys = *y;
        for (j, kj) in k.iter().enumerate().take(s) {
            let a = A[s][j];
            if a != 0.0 {
                for i in 0..N {
                    ys[i] += h * a * kj[i];
                }
            }
        }
        k[s] = f(t + C[s] * h, &ys)?;
    }
    let mut y5 = *y;
    let mut err2 = 0.0;
    for i in 0..N {
        let mut d5 = 0.0;
        let mut d4 = 0.0;
        for s in 0..7 {
            d5 += B5[s] * k[s][i];
            d4 += B4[s] * k[s][i];
        }
        y5[i] += h * d5;
        let sc = ctrl.atol + ctrl.rtol * y[i].abs().max(y5[i].abs());
        err2 += (h * (d5 - d4) / sc).powi(2);
    }
    Ok((y5, (err2 / N as f64).sqrt()))
}

fn initial_step<const N: usize>(
    f: &impl Fn(f64, &[f64; N]) -> Result<[f64; N]>,
    t: f64,
    y: &[f64; N],
    span: f64,
    ctrl: &StepControl,
) -> Result<f64> {
    // Hairer-Norsett-Wanner starting step heuristic
    let f0 = f(t, y)?;
    let (mut d0, mut d1) = (0.0f64, 0.0f64);
    for i in 0..N {
        let sc = ctrl.atol + ctrl.rtol * y[i].abs();
        d0 += (y[i] / sc).powi(2);
        d1 += (f0[i] / sc).powi(2);
    }
    let (d0, d1) = ((d0 / N as f64).sqrt(), (d1 / N as f64).sqrt());
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 * span } else { 0.01 * d0 / d1 };
    let h0 = h0.min(span);
    let mut y1 = *y;
    for i in 0..N {
        y1[i] += h0 * f0[i];
    }
    let f1 = f(t + h0, &y1)?;
    let mut d2 = 0.0f64;
    for i in 0..N {
        let sc = ctrl.atol + ctrl.rtol * y[i].abs();
        d2 += ((f1[i] - f0[i]) / sc).powi(2);
    }
    let d2 = (d2 / N as f64).sqrt() / h0;
    let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6 * span) } else { (0.01 / d1.max(d2)).powf(0.2) };
    Ok((100.0 * h0).min(h1).min(span))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flow {
    Continue,
    Stop,
}

/// What ended a run.
#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Completed,
    Stopped,
    /// the vector field refused every step size down to underflow
    Refused(Error),
}

/// Integrate from `t0` to `t0 + span`, calling `on_step(t_prev, y_prev, t, y)`
/// after each accepted step.
pub fn integrate_adaptive<const N: usize>(
    f: impl Fn(f64, &[f64; N]) -> Result<[f64; N]>,
    t0: f64,
    y0: [f64; N],
    span: f64,
    ctrl: &StepControl,
    mut on_step: impl FnMut(f64, &[f64; N], f64, &[f64; N]) -> Result<Flow>,
) -> Result<Outcome> {
    if span <= 0.0 {
        return Ok(Outcome::Completed);
    }
    let t_end = t0 + span;
    let mut t = t0;
    let mut y = y0;
    let mut h = match ctrl.h0 {
        Some(h) => h.min(span),
        None => initial_step(&f, t, &y, span, ctrl)?,
    };
    let h_cap = ctrl.h_max.unwrap_or(f64::INFINITY);
    let mut steps = 0;
    while t < t_end {
        h = h.min(h_cap);
        if steps >= ctrl.max_steps {
            return Err(Error::StepBudget { steps, t });
        }
        let last = t + h >= t_end;
        let h_try = if last { t_end - t } else { h };
        if h_try <= 4.0 * f64::EPSILON * t.abs().max(span) {
            return Err(Error::StepUnderflow { t, h: h_try });
        }
        match dopri_step(&f, t, &y, h_try, ctrl) {
            Ok((y_new, err)) if err.is_finite() && err <= 1.0 => {
                let t_new = if last { t_end } else { t + h_try };
                steps += 1;
                let flow = on_step(t, &y, t_new, &y_new)?;
                t = t_new;
                y = y_new;
                let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                h = h_try * fac;
                if flow == Flow::Stop {
                    return Ok(Outcome::Stopped);
                }
            }
            Ok((_, err)) => {
                let fac = if err.is_finite() { (0.9 * err.powf(-0.2)).clamp(0.1, 0.9) } else { 0.1 };
                h = h_try * fac;
            }
            Err(e) => {
                // trial stage left the chart: retry smaller
                h = h_try * 0.25;
                if h <= 1e-14 * t.abs().max(span) {
                    return Ok(Outcome::Refused(e));
                }
            }
        }
    }
    Ok(Outcome::Completed)
}

/// Locate a zero of `g(state)` inside the accepted step `[t, t + h]` by
/// bisection, re-stepping from `y` each time.
pub fn bisect_event<const N: usize>(
    f: &impl Fn(f64, &[f64; N]) -> Result<[f64; N]>,
    t: f64,
    y: &[f64; N],
    h: f64,
    ctrl: &StepControl,
    g: impl Fn(&[f64; N]) -> f64,
) -> Result<f64> {
    let g0 = g(y);
    let (mut lo, mut hi) = (0.0, h);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let (ym, _) = dopri_step(f, t, y, mid, ctrl)?;
        if (g(&ym) > 0.0) == (g0 > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * (t.abs() + h) {
            break;
        }
    }
    Ok(t + 0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    #[test]
    fn harmonic_oscillator_period_and_energy() {
        // H = (R^2 + r^2)/2
        let f = |_: f64, y: &[f64; 2]| -> Result<[f64; 2]> { Ok([-y[1], y[0]]) };
        let ctrl = StepControl::default();
        let mut last = (0.0, [1.0, 0.0]);
        let mut drift: f64 = 0.0;
        let mut crossings = vec![];
        integrate_adaptive(f, 0.0, [1.0, 0.0], 2.5 * TAU, &ctrl, |t0, y0, t1, y1| {
            drift = drift.max(((y1[0] * y1[0] + y1[1] * y1[1]) / 2.0 - 0.5).abs() / 0.5);
            if y0[1] < 0.0 && y1[1] >= 0.0 {
                crossings.push(bisect_event(&f, t0, y0, t1 - t0, &ctrl, |y| y[1]).unwrap());
            }
            last = (t1, *y1);
            Ok(Flow::Continue)
        })
        .unwrap();
        assert!(drift < 1e-8, "{drift}");
        assert_eq!(crossings.len(), 2);
        assert!((crossings[1] - crossings[0] - TAU).abs() < 1e-8);
        assert!((last.0 - 2.5 * TAU).abs() < 1e-12);
    }

    #[test]
    fn refusing_field_is_reported() {
        let f = |t: f64, y: &[f64; 1]| -> Result<[f64; 1]> {
            if t > 1.0 {
                Err(Error::Domain("wall".into()))
            } else {
                Ok([y[0]])
            }
        };
        let out = integrate_adaptive(f, 0.0, [1.0], 2.0, &StepControl::default(), |_, _, _, _| Ok(Flow::Continue)).unwrap();
        assert!(matches!(out, Outcome::Refused(_)));
    }
}
