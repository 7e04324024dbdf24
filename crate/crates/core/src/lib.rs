pub mod asymptotics;
pub mod canonical;
pub mod error;
pub mod io;
pub mod linalg;
pub mod model;
pub mod netlist;
pub mod spectral;
pub mod timedomain;
pub mod tolerance;

pub use canonical::{CanonicalOperator, LossDecomposition};
pub use error::{Error, ErrorCategory, ParseError, Result};
pub use model::{validate, LagrangianSystem, ValidationReport};
pub use tolerance::Tolerances;
pub use spectral::{
    characteristic_scalars, classify, identity_suite, limiting_frequencies, overdamping_thresholds, q_factor,
    spectrum, Analyzer, DichotomyReport, IdentityReport, Mode, ModeClass,
};
pub use asymptotics::{asymptotic_residuals, expansion_coefficients, sweep, AsymptoticModel, SweepResult};
pub use netlist::{compile, emit, parse, Coupling, LoopDecl, Netlist};
pub use timedomain::{energy_balance_residual, integrate, integrate_at, Trajectory};
