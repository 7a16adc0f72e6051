//! Iterated homological steps: move the average of the perturbation into
//! the normal part and push the rest to higher order.

use serde::{Deserialize, Serialize};

use super::lie::lie_transform;
use super::nqp::{homological_residual, nqp_primitive, Frequencies};
use super::series::{tf_average_split, tf_norm, NormWeights, TFSeries};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub f_norm: f64,
    pub osc_norm: f64,
    pub avg_norm: f64,
    /// filled for steps that built a generator
    pub phi_norm: Option<f64>,
    pub residual_abs: Option<f64>,
    pub residual_rel: Option<f64>,
    pub contraction: Option<f64>,
    pub tail_bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalFormRun {
    pub g_star: TFSeries,
    pub f_star: TFSeries,
    pub records: Vec<StepRecord>,
}

impl NormalFormRun {
    /// `||osc f_{j+1}|| / ||osc f_j||` for consecutive records.
    pub fn osc_ratios(&self) -> Vec<f64> {
        self.records.windows(2).map(|p| p[1].osc_norm / p[0].osc_norm).collect()
    }
}

/// Run `n_steps` steps on `h + f`. `weights[j]` measures step `j`; the last
/// entry is reused when the schedule is shorter.
pub fn normal_form_steps(h: &TFSeries, f: &TFSeries, n_steps: usize, weights: &[NormWeights], max_order: usize) -> Result<NormalFormRun> {
    h.shape().check_compatible(f.shape())?;
    if weights.is_empty() {
        return Err(Error::arg("weights", "schedule must not be empty"));
    }
    let freq = Frequencies::from_series(h, vec![0.0; h.shape().m_pq])?;
    let mut g = TFSeries::zero(h.shape());
    let mut fj = f.clone();
    let mut records = Vec::with_capacity(n_steps + 1);
    let w_at = |j: usize| weights[j.min(weights.len() - 1)];
    for j in 0..=n_steps {
        let w = w_at(j);
        let (avg, osc) = tf_average_split(&fj);
        let mut rec = StepRecord {
            step: j,
            f_norm: tf_norm(&fj, &w),
            osc_norm: tf_norm(&osc, &w),
            avg_norm: tf_norm(&avg, &w),
            phi_norm: None,
            residual_abs: None,
            residual_rel: None,
            contraction: None,
            tail_bound: None,
        };
        if j == n_steps {
            records.push(rec);
            break;
        }
        if osc.is_zero() {
            // already normal
            g = g.add(&avg)?;
            fj = TFSeries::zero(h.shape());
            records.push(rec);
            break;
        }
        let phi = nqp_primitive(&osc, &freq)?;
        let (ra, rr) = homological_residual(&phi, &osc, &freq)?;
        let full = h.add(&g)?.add(&fj)?;
        let lie = lie_transform(&full, &phi, max_order, &w).map_err(|e| match e {
            Error::ContractionLoss { factor, .. } => Error::ContractionLoss { step: j, factor },
            other => other,
        })?;
        rec.phi_norm = Some(tf_norm(&phi, &w));
        rec.residual_abs = Some(ra);
        rec.residual_rel = Some(rr);
        rec.contraction = Some(lie.report.contraction);
        rec.tail_bound = Some(lie.report.tail_bound);
        records.push(rec);
        // new perturbation: osc + sum_{i>=1} L^i(h + g + f)/i!, in which
        // {phi, h} cancels osc up to the homological residual
        g = g.add(&avg)?;
        fj = osc.add(&lie.increment)?;
    }
    Ok(NormalFormRun { g_star: g, f_star: fj, records })
}
