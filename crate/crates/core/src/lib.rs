//! Simulator and analysis library for mean-field gradient-descent training
//! of two-layer ReLU networks.
//!
//! The parameter measure of a width-`m` network is represented by `m`
//! particles `(a_i, w_i, b_i)`; training integrates the per-particle
//! gradient flow with explicit Euler steps while recording risk, norm and
//! force diagnostics. The library covers:
//!
//! - network evaluation and the path-norm / second-moment functionals
//!   ([`ensemble`]);
//! - closed-form Lipschitz targets inside and outside the network's
//!   natural function space ([`targets`]);
//! - seeded, sub-streamed sampling and Gaussian initialization
//!   ([`sampling`]);
//! - risk functionals, analytic mean-field gradients, and the
//!   radial/angular force split ([`risk`]);
//! - the Euler trainer with checkpoint records and random-feature mode
//!   ([`dynamics`]);
//! - decay-rate estimation, power-law fits, and the second-moment growth
//!   audit ([`analysis`]);
//! - a closed-form scalar flow that validates the integrator and the rate
//!   pipeline ([`oracle`]);
//! - batch experiment presets with CSV/JSON artifacts ([`runner`]).
//!
//! Everything is deterministic: one seed fixes the data, the
//! initialization and the evaluation set through independent ChaCha8
//! sub-streams, and all reductions over data use fixed-shape pairwise
//! trees, so identical configs produce byte-identical artifacts at any
//! thread count.

pub mod analysis;
pub mod dynamics;
pub mod ensemble;
pub mod error;
pub mod oracle;
pub mod risk;
pub mod runner;
pub mod sampling;
pub mod sum;
pub mod targets;

pub use analysis::{
    decay_rate, fit_power_law, moment_audit, sublinear_check, FitWindow, RateReport,
};
pub use dynamics::{
    euler_step, train, Mode, TrainOn, TrainOutput, TrainerConfig, TrajectoryRecord,
};
pub use ensemble::{feature, moment_bound_constant, ActivationKind, Particle, ParticleEnsemble};
pub use error::{Error, Result};
pub use oracle::ScalarFlow;
pub use risk::{
    empirical_risk, force_split, per_particle_gradient, population_risk_estimate, ForceSplit,
    GradientField,
};
pub use runner::{compare, presets, run, run_oracle, Preset, RunConfig, RunStatus};
pub use sampling::{init_ensemble, sample_uniform_cube, Dataset, RngSpec, SubStream};
pub use targets::{TargetFunction, TargetKind, TargetStats};
