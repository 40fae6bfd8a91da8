//! Jet coordinates of the dependent variable and total derivatives.

use crate::expr::{Atom, Expr, ExprError};

pub fn jet(nt: u8, nx: u8, ny: u8) -> Expr {
    Expr::atom(Atom::Jet([nt, nx, ny]))
}

pub fn u() -> Expr {
    jet(0, 0, 0)
}

/// The independent coordinate for a jet slot: 0 → t, 1 → x, 2 → y.
pub fn coord(slot: usize) -> Atom {
    Atom::var(["t", "x", "y"][slot])
}

/// Slot of a coordinate atom, for t, x, y only.
pub fn slot_of(a: &Atom) -> Option<usize> {
    (0..3).find(|&k| coord(k) == *a)
}

/// D_k f = ∂f/∂z_k + Σ_J (∂f/∂u_J) u_{J+k}, with z_k the coordinate for `slot`.
pub fn total_d_wrt(f: &Expr, z: &Atom, slot: usize) -> Result<Expr, ExprError> {
    let mut out = f.diff(z)?;
    for a in f.atoms() {
        if let Atom::Jet(j) = a {
            let mut k = j;
            k[slot] += 1;
            out += &(f.diff(&a)? * Expr::atom(Atom::Jet(k)));
        }
    }
    Ok(out)
}

pub fn total_d(f: &Expr, slot: usize) -> Result<Expr, ExprError> {
    total_d_wrt(f, &coord(slot), slot)
}

/// Applies D_t^nt D_x^nx D_y^ny.
pub fn total_d_multi(f: &Expr, j: [u8; 3]) -> Result<Expr, ExprError> {
    let mut e = f.clone();
    for (slot, n) in j.iter().enumerate() {
        for _ in 0..*n {
            e = total_d(&e, slot)?;
        }
    }
    Ok(e)
}

/// Jet atoms that occur in `e`.
pub fn jets_in(e: &Expr) -> Vec<[u8; 3]> {
    e.atoms()
        .into_iter()
        .filter_map(|a| match a {
            Atom::Jet(j) => Some(j),
            _ => None,
        })
        .collect()
}
