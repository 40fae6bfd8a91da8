//! Finite differences, ODE integration and numeric cross-checks of the
//! symbolic results.

mod adi;
mod coeffs;
mod determining;
mod ermakov;
mod fig3;
mod flow;
mod grid;
mod interp;
mod ode;
mod quad;
mod residual;

pub use adi::{solve_fd, Boundary, Exec, FdData};
pub use coeffs::{expr_field, CompiledPde, NumericEnv, SlotMap, TimeFn};
pub use determining::{
    admissible_initial_data, integrate_determining_system, solution_dimension, DeterminingRun, DeterminingSystem,
};
pub use ermakov::{ermakov_suite, ErmakovReport};
pub use fig3::{dominant_frequency, FLAT_AMPLITUDE, fig3_scenario, Fig3Config, Fig3Result};
pub use flow::{flow_check, transform_field, NumericTransform};
pub use grid::{max_rel_error, Direction, Field, Grid, Provenance};
pub use interp::{cubic_weights, sample};
pub use ode::{dp45, OdeOptions};
pub use quad::integrate;
pub use residual::discrete_residual;

use crate::expr::ExprError;
use crate::models::ModelError;

#[derive(Debug, thiserror::Error)]
pub enum NumericError {
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("no numeric value for `{0}`")]
    Unbound(String),
    #[error("non-finite value at step {step} (t = {t})")]
    NonFinite { step: usize, t: f64 },
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("singular leading coefficient: {0}")]
    Singular(String),
    #[error("constraint violated: {0}")]
    Constraint(String),
    #[error("integrator failure: {0}")]
    Integrator(String),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, NumericError>;
