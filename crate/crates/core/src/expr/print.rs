use std::fmt;

use num_traits::{One, Signed};

use super::core::{Expr, Mono, Q};

fn write_mono(f: &mut fmt::Formatter<'_>, m: &Mono) -> fmt::Result {
    let mut first = true;
    for (a, e) in &m.pows {
        if !first {
            f.write_str("*")?;
        }
        first = false;
        if *e == 1 {
            write!(f, "{a}")?;
        } else {
            write!(f, "{a}^{e}")?;
        }
    }
    if let Some(p) = &m.exp {
        if !first {
            f.write_str("*")?;
        }
        write!(f, "exp({p})")?;
    }
    Ok(())
}

fn write_term(f: &mut fmt::Formatter<'_>, m: &Mono, c: &Q) -> fmt::Result {
    if m.is_one() {
        return write!(f, "{c}");
    }
    if !c.is_one() {
        write!(f, "{c}*")?;
    }
    write_mono(f, m)
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return f.write_str("0");
        }
        for (i, (m, c)) in self.terms().enumerate() {
            if i == 0 {
                if c.is_negative() {
                    f.write_str("-")?;
                }
            } else if c.is_negative() {
                f.write_str(" - ")?;
            } else {
                f.write_str(" + ")?;
            }
            write_term(f, m, &c.abs())?;
        }
        Ok(())
    }
}
