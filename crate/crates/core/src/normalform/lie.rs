//! Time-one flow `exp(L_phi) H = sum_j L_phi^j H / j!`, `L_phi H = {phi, H}`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::bracket::poisson_bracket;
use super::series::{tf_norm, NormWeights, TFSeries};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LieOutcome {
    pub value: TFSeries,
    /// `value - H`, kept separately to avoid cancelling against a large `H`
    pub increment: TFSeries,
    pub report: LieReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LieReport {
    /// norms of `L^j H / j!` for `j = 0..`
    pub term_norms: Vec<f64>,
    /// largest ratio of consecutive term norms from the second term on
    pub contraction: f64,
    /// geometric bound on the omitted terms
    pub tail_bound: f64,
}

pub fn lie_transform(h: &TFSeries, phi: &TFSeries, max_order: usize, w: &NormWeights) -> Result<LieOutcome> {
    h.shape().check_compatible(phi.shape())?;
    let mut term = h.clone();
    let mut increment = TFSeries::zero(h.shape());
    let mut norms = vec![tf_norm(h, w)];
    for j in 1..=max_order {
        if phi.is_zero() || term.is_zero() {
            break;
        }
        term = poisson_bracket(phi, &term)?.scale(Complex64::new(1.0 / j as f64, 0.0));
        norms.push(tf_norm(&term, w));
        increment = increment.add(&term)?;
    }
    let contraction = norms.windows(2).skip(1).filter(|p| p[0] > 0.0).map(|p| p[1] / p[0]).fold(0.0, f64::max);
    if contraction >= 1.0 {
        return Err(Error::ContractionLoss { step: 0, factor: contraction });
    }
    let last = *norms.last().unwrap();
    let tail_bound = if norms.len() > max_order { last * contraction / (1.0 - contraction) } else { 0.0 };
    Ok(LieOutcome { value: h.add(&increment)?, increment, report: LieReport { term_norms: norms, contraction, tail_bound } })
}
