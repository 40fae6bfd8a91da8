//! Lie point symmetries of linear evolution equations from financial
//! mathematics: exact symbolic verification, algebra classification,
//! reductions to the heat equation and finite-difference cross-checks.

pub mod expr;
pub mod jet;
pub mod linalg;
pub mod models;
pub mod symmetry;
pub mod algebra;
pub mod reduce;
pub mod numeric;
pub mod cli;
