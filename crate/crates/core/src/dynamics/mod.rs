//! Secular flows, phase portraits and the libration experiment.

pub mod integrator;
pub mod portrait;
pub mod theorem;
pub mod trajectory;

pub use integrator::StepControl;
pub use portrait::{detect_rotation, find_equilibria, phase_portrait, EquilibriumKind, EquilibriumReport, Portrait};
pub use theorem::{
    build_parameter_chain, check_theorem_main1, run_libration_experiment, ChainInputs, ChainParams, DomainParams, Surrogates, TheoremReport,
};
pub use trajectory::{detect_libration, integrate, Event, EventKind, IntegrateOptions, LibrationSummary, Trajectory};
