//! Poisson bracket of two series.

use super::series::{mul_sum, TFSeries};
use crate::error::Result;

/// `{f, g}` with `(I, phi)`, `(p, q)` and `(y, x)` as canonical pairs, each
/// contributing `d_momentum f d_coordinate g - d_momentum g d_coordinate f`.
pub fn poisson_bracket(f: &TFSeries, g: &TFSeries) -> Result<TFSeries> {
    f.shape().check_compatible(g.shape())?;
    let sh = f.shape();
    let mut factors: Vec<(TFSeries, TFSeries, f64)> = Vec::new();
    for a in 0..sh.n_angles {
        factors.push((f.d_action(a), g.d_angle(a), 1.0));
        factors.push((g.d_action(a), f.d_angle(a), -1.0));
    }
    for i in 0..sh.m_pq {
        factors.push((f.d_p(i), g.d_q(i), 1.0));
        factors.push((g.d_p(i), f.d_q(i), -1.0));
    }
    factors.push((f.d_y(), g.d_x(), 1.0));
    factors.push((g.d_y(), f.d_x(), -1.0));
    let refs: Vec<(&TFSeries, &TFSeries, f64)> = factors.iter().map(|(a, b, s)| (a, b, *s)).collect();
    mul_sum(&refs)
}
