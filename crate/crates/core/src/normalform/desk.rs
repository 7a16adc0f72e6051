//! The desk-scale model: one angle (the perihelion angle), no `(p, q)`
//! pairs, Kepler part `-m0^5/(2 y^2)` and the secular perturbation sampled
//! on a small box far from the inner binary.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::series::{tf_build, NormWeights, Shape, TFSeries};
use crate::coords::{derive_mass_params, ActionAngleState, Frame, HamiltonianIndex};
use crate::error::Result;
use crate::hamiltonians::{self, HamiltonianSpec};
use crate::potentials::QuadratureSpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeskModel {
    pub spec: HamiltonianSpec,
    /// width of the action box below `Lambda`
    pub delta: f64,
    pub y_box: (f64, f64),
    pub x_box: (f64, f64),
    pub nodes: usize,
    pub fourier_cutoff: i32,
    pub pq_degree: u32,
    pub quad_nodes: usize,
}

impl Default for DeskModel {
    fn default() -> Self {
        let masses = derive_mass_params(1.0, 1.0, Frame::M0centric).expect("fixed masses are valid");
        Self {
            spec: HamiltonianSpec::new(HamiltonianIndex::H2, 1.0, 1.0, masses).expect("fixed spec is valid"),
            delta: 0.05,
            y_box: (10.0, 14.0),
            x_box: (PI - 0.1, PI + 0.1),
            nodes: 16,
            fourier_cutoff: 8,
            pq_degree: 4,
            quad_nodes: 256,
        }
    }
}

impl DeskModel {
    pub fn shape(&self) -> Result<Shape> {
        let l = self.spec.lambda;
        Shape::new(1, 0, self.fourier_cutoff, self.pq_degree, self.nodes, vec![(l - self.delta, l), self.y_box, self.x_box])
    }

    /// Weights matched to the box: widths are fractions of the box sides.
    pub fn weights(&self) -> NormWeights {
        NormWeights {
            rho: 0.5 * self.delta,
            s: 0.1,
            delta: 1.0,
            r: 0.1 * (self.y_box.1 - self.y_box.0),
            xi: 0.1 * (self.x_box.1 - self.x_box.0),
        }
    }

    /// `(h, f)` as series on the model's shape.
    pub fn build(&self) -> Result<(TFSeries, TFSeries)> {
        let shape = self.shape()?;
        let m5 = self.spec.m0.powi(5);
        let h = TFSeries::from_grid_fn(&shape, |_, y, _| -m5 / (2.0 * y * y))?;
        let quad = QuadratureSpec::new(self.quad_nodes)?;
        let spec = self.spec;
        let f = tf_build(&shape, |p| {
            let st = ActionAngleState::new(p.actions[0], p.angles[0], p.y, p.x);
            Ok(Complex64::new(hamiltonians::perturbation(&spec, &st, &quad)?, 0.0))
        })?;
        Ok((h, f))
    }
}
