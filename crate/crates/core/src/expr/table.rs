use std::collections::BTreeMap;
use std::sync::Arc;

use super::core::{AntiDef, Atom, Class, Expr, RootDef, Sym};
use super::{parse, ExprError, DEFAULT_ORDER_CAP};

/// Declared symbols; maps printed names to atoms.
#[derive(Clone, Debug)]
pub struct SymbolTable {
    names: BTreeMap<String, Atom>,
    pub cap: u8,
}

impl Default for SymbolTable {
    fn default() -> Self {
        Self::new()
    }
}

impl SymbolTable {
    /// Table with t, x, y and the jet coordinates of u.
    pub fn new() -> Self {
        let mut t = SymbolTable {
            names: BTreeMap::new(),
            cap: DEFAULT_ORDER_CAP,
        };
        for v in ["t", "x", "y"] {
            t.var(v);
        }
        for nt in 0..=3u8 {
            for nx in 0..=4u8 {
                for ny in 0..=(4 - nx) {
                    let a = Atom::Jet([nt, nx, ny]);
                    t.names.insert(a.name(), a);
                }
            }
        }
        t
    }

    fn put(&mut self, a: Atom) -> Expr {
        self.names.insert(a.name(), a.clone());
        Expr::atom(a)
    }

    pub fn var(&mut self, name: &str) -> Expr {
        self.put(Atom::Var(Sym::new(name, Class::Plain)))
    }

    pub fn positive(&mut self, name: &str) -> Expr {
        self.put(Atom::Var(Sym::new(name, Class::Positive)))
    }

    /// Declares ρ together with its root w = √(1−ρ²); returns (ρ, w).
    pub fn corr(&mut self, name: &str, root: &str) -> (Expr, Expr) {
        let a = Atom::Var(Sym::new(name, Class::Corr(Arc::from(root))));
        let w = a.corr_root().unwrap();
        self.put(w.clone());
        (self.put(a), Expr::atom(w))
    }

    pub fn fun(&mut self, name: &str) -> Expr {
        self.put(Atom::Fun(Sym::new(name, Class::Plain), 0))
    }

    pub fn positive_fun(&mut self, name: &str) -> Expr {
        self.put(Atom::Fun(Sym::new(name, Class::Positive), 0))
    }

    pub fn corr_fun(&mut self, name: &str, root: &str) -> (Expr, Expr) {
        let a = Atom::Fun(Sym::new(name, Class::Corr(Arc::from(root))), 0);
        let w = a.corr_root().unwrap();
        self.put(w.clone());
        (self.put(a), Expr::atom(w))
    }

    pub fn anti(&mut self, name: &str, integrand: Expr) -> Expr {
        self.put(Atom::Anti(Arc::new(AntiDef {
            name: Arc::from(name),
            integrand,
        })))
    }

    /// Registers an existing atom (e.g. one found inside a parsed expression).
    pub fn adopt(&mut self, a: &Atom) {
        let base = match a {
            Atom::Fun(s, _) => Atom::Fun(s.clone(), 0),
            other => other.clone(),
        };
        if let Some(w) = base.corr_root() {
            self.names.insert(w.name(), w);
        }
        if let Atom::Root(r) = &base {
            if let RootDef::Corr { base: b, .. } = &**r {
                self.names.insert(b.name(), b.clone());
            }
        }
        self.names.insert(base.name(), base);
    }

    /// Registers every atom of an expression.
    pub fn adopt_all(&mut self, e: &Expr) {
        for a in e.atoms() {
            self.adopt(&a);
        }
    }

    /// Handles a declaration line `NAME := int(expr)`.
    pub fn declare(&mut self, line: &str) -> Result<Expr, ExprError> {
        let (lhs, rhs) = line.split_once(":=").ok_or(ExprError::Syntax {
            pos: 0,
            msg: "expected `:=`".into(),
        })?;
        let name = lhs.trim();
        let valid = name.chars().next().is_some_and(|c| c.is_ascii_alphabetic())
            && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
        if !valid {
            return Err(ExprError::Syntax {
                pos: 0,
                msg: format!("invalid identifier `{name}`"),
            });
        }
        let offset = lhs.len() + 2;
        let body = rhs.trim_start();
        let lead = rhs.len() - body.len();
        let inner = body
            .strip_prefix("int(")
            .and_then(|s| s.trim_end().strip_suffix(')'))
            .ok_or(ExprError::Syntax {
                pos: offset + lead,
                msg: "expected `int(...)`".into(),
            })?;
        let integrand = parse::parse(inner, self).map_err(|e| match e {
            ExprError::Syntax { pos, msg } => ExprError::Syntax {
                pos: pos + offset + lead + 4,
                msg,
            },
            other => other,
        })?;
        Ok(self.anti(name, integrand))
    }

    pub fn lookup(&self, name: &str) -> Option<&Atom> {
        self.names.get(name)
    }

    pub fn parse(&self, text: &str) -> Result<Expr, ExprError> {
        parse::parse(text, self)
    }

    /// Checks that every atom of `e` is declared here.
    pub fn check(&self, e: &Expr) -> Result<(), ExprError> {
        for a in e.atoms() {
            let known = match &a {
                Atom::Fun(s, _) => self.names.get(&*s.name) == Some(&Atom::Fun(s.clone(), 0)),
                Atom::Root(r) if matches!(&**r, RootDef::Int(_)) => true,
                other => self.names.get(&other.name()) == Some(other),
            };
            if !known {
                return Err(ExprError::Undeclared(a.name()));
            }
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &SymbolTable) {
        for (k, v) in &other.names {
            self.names.insert(k.clone(), v.clone());
        }
    }

    pub fn atoms(&self) -> impl Iterator<Item = &Atom> {
        self.names.values()
    }
}
