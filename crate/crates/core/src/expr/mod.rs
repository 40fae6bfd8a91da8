//! Exact expression kernel.
//!
//! Every expression is kept as an expanded polynomial with rational
//! coefficients in atoms: variables, opaque functions of `t` (indexed by
//! derivative order), antiderivative atoms, roots, jet coordinates, and
//! exponentials of such polynomials. Equality of canonical forms is equality
//! of values on the supported class, so `is_zero` is a map lookup.

mod calc;
mod core;
mod eval;
mod parse;
mod print;
mod table;

pub use self::calc::{diff, diff_capped, substitute, Bindings, DEFAULT_ORDER_CAP};
pub use self::core::{q, qpow, qr, sqrt_rational, AntiDef, Atom, Class, Expr, Mono, RootDef, Sym, Q, TIME};
pub use self::eval::{eval_numeric, Compiled, Env};
pub use self::table::SymbolTable;

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ExprError {
    #[error("syntax error at offset {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("undeclared symbol `{0}`")]
    Undeclared(String),
    #[error("derivative of `{name}` exceeds order cap {cap}")]
    OrderCap { name: String, cap: u8 },
    #[error("expression `{0}` is not an invertible monomial")]
    NonInvertible(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("square root of negative value {0}")]
    NegativeRoot(String),
    #[error("unbound symbol `{0}`")]
    Unbound(String),
    #[error("substitution not supported: {0}")]
    Substitution(String),
}

pub fn is_zero(e: &Expr) -> bool {
    e.is_zero()
}
