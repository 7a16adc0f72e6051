//! Lie-series normal form on truncated Taylor-Fourier series.

pub mod bracket;
pub mod cheb;
pub mod desk;
pub mod lie;
pub mod nqp;
pub mod series;
pub mod steps;

pub use bracket::poisson_bracket;
pub use desk::DeskModel;
pub use lie::{lie_transform, LieOutcome, LieReport};
pub use nqp::{homological_residual, nqp_primitive, Frequencies};
pub use series::{tf_average_split, tf_build, tf_norm, tf_norm_complex, ModeKey, NormWeights, SamplePoint, Shape, TFSeries};
pub use steps::{normal_form_steps, NormalFormRun, StepRecord};
