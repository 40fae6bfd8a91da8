use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::ExprError;

pub type Q = BigRational;

pub fn q(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn qr(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

/// How a scalar symbol behaves under canonicalization.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Class {
    Plain,
    /// Strictly positive; may carry negative integer exponents.
    Positive,
    /// A correlation-like symbol ρ with companion root w = √(1−ρ²); ρ² is always rewritten as 1 − w².
    Corr(Arc<str>),
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Sym {
    pub name: Arc<str>,
    pub class: Class,
}

impl Sym {
    pub fn new(name: &str, class: Class) -> Self {
        Sym { name: Arc::from(name), class }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AntiDef {
    pub name: Arc<str>,
    pub integrand: Expr,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RootDef {
    /// w = √(1 − base²), strictly positive.
    Corr { name: Arc<str>, base: Atom },
    /// √n for a square-free integer n ≥ 2.
    Int(BigInt),
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Atom {
    Var(Sym),
    /// Opaque function of t with its derivative order.
    Fun(Sym, u8),
    Anti(Arc<AntiDef>),
    Root(Arc<RootDef>),
    /// Jet coordinate of the dependent variable: (t-order, first-space order, second-space order).
    Jet([u8; 3]),
}

pub const TIME: &str = "t";

impl Atom {
    pub fn var(name: &str) -> Atom {
        Atom::Var(Sym::new(name, Class::Plain))
    }

    pub fn t() -> Atom {
        Atom::var(TIME)
    }

    pub fn u() -> Atom {
        Atom::Jet([0, 0, 0])
    }

    pub fn is_time(&self) -> bool {
        matches!(self, Atom::Var(s) if &*s.name == TIME)
    }

    pub fn invertible(&self) -> bool {
        match self {
            Atom::Var(s) => s.class == Class::Positive,
            Atom::Fun(s, k) => *k == 0 && s.class == Class::Positive,
            Atom::Root(_) => true,
            _ => false,
        }
    }

    /// The root atom that absorbs squares of this atom, if any.
    pub fn corr_root(&self) -> Option<Atom> {
        let sym = match self {
            Atom::Var(s) | Atom::Fun(s, 0) => s,
            _ => return None,
        };
        match &sym.class {
            Class::Corr(root) => Some(Atom::Root(Arc::new(RootDef::Corr {
                name: root.clone(),
                base: self.clone(),
            }))),
            _ => None,
        }
    }

    pub fn jet_name(j: [u8; 3]) -> String {
        let mut s = String::from("u");
        if j != [0, 0, 0] {
            s.push('_');
            for (n, c) in j.iter().zip(['t', 'x', 'y']) {
                for _ in 0..*n {
                    s.push(c);
                }
            }
        }
        s
    }

    /// Name used by the printer and by numeric environments.
    pub fn name(&self) -> String {
        match self {
            Atom::Var(s) => s.name.to_string(),
            Atom::Fun(s, k) => format!("{}{}", s.name, "'".repeat(*k as usize)),
            Atom::Anti(a) => a.name.to_string(),
            Atom::Root(r) => match &**r {
                RootDef::Corr { name, .. } => name.to_string(),
                RootDef::Int(n) => format!("sqrt({n})"),
            },
            Atom::Jet(j) => Atom::jet_name(*j),
        }
    }

    /// True when the atom depends on t (explicitly or as a time function).
    pub fn depends_on_time(&self) -> bool {
        match self {
            Atom::Var(_) => self.is_time(),
            Atom::Fun(..) | Atom::Anti(_) => true,
            Atom::Root(r) => match &**r {
                RootDef::Corr { base, .. } => base.depends_on_time(),
                RootDef::Int(_) => false,
            },
            Atom::Jet(_) => false,
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Mono {
    pub pows: Vec<(Atom, i32)>,
    pub exp: Option<Expr>,
}

impl Mono {
    pub fn one() -> Mono {
        Mono::default()
    }

    pub fn is_one(&self) -> bool {
        self.pows.is_empty() && self.exp.is_none()
    }

    pub fn power_of(&self, a: &Atom) -> i32 {
        self.pows
            .iter()
            .find(|(b, _)| b == a)
            .map(|(_, e)| *e)
            .unwrap_or(0)
    }

    pub fn invertible(&self) -> bool {
        self.pows.iter().all(|(a, _)| a.invertible())
    }

    fn inverse(&self) -> Mono {
        Mono {
            pows: self.pows.iter().map(|(a, e)| (a.clone(), -e)).collect(),
            exp: self.exp.as_ref().map(|p| -p),
        }
    }

    /// Product with square reduction of integer roots.
    fn mul(&self, other: &Mono) -> (Q, Mono) {
        let mut merged: BTreeMap<Atom, i32> = BTreeMap::new();
        for (a, e) in self.pows.iter().chain(other.pows.iter()) {
            *merged.entry(a.clone()).or_insert(0) += e;
        }
        let exp = match (&self.exp, &other.exp) {
            (None, None) => None,
            (Some(p), None) | (None, Some(p)) => Some(p.clone()),
            (Some(p), Some(r)) => {
                let s = p + r;
                if s.is_zero() {
                    None
                } else {
                    Some(s)
                }
            }
        };
        let mut coef = Q::one();
        let mut radicand = BigInt::one();
        let mut pows = Vec::with_capacity(merged.len());
        for (a, e) in merged {
            if e == 0 {
                continue;
            }
            if let Atom::Root(r) = &a {
                if let RootDef::Int(n) = &**r {
                    let (half, rem) = e.div_mod_floor(&2);
                    coef *= qpow(&Q::from_integer(n.clone()), half);
                    if rem == 1 {
                        radicand *= n;
                    }
                    continue;
                }
            }
            pows.push((a, e));
        }
        if radicand > BigInt::one() {
            let (outside, inside) = square_split(&radicand);
            coef *= Q::from_integer(outside);
            if inside > BigInt::one() {
                pows.push((Atom::Root(Arc::new(RootDef::Int(inside))), 1));
                pows.sort();
            }
        }
        (coef, Mono { pows, exp })
    }
}

pub fn qpow(base: &Q, e: i32) -> Q {
    if e >= 0 {
        num_traits::pow(base.clone(), e as usize)
    } else {
        num_traits::pow(base.recip(), (-e) as usize)
    }
}

/// Writes n = outside² · inside with inside square-free.
fn square_split(n: &BigInt) -> (BigInt, BigInt) {
    let mut outside = BigInt::one();
    let mut inside = BigInt::one();
    let mut rest = n.clone();
    let mut p = BigInt::from(2);
    while &p * &p <= rest {
        let mut count = 0;
        while (&rest % &p).is_zero() {
            rest /= &p;
            count += 1;
        }
        for _ in 0..count / 2 {
            outside *= &p;
        }
        if count % 2 == 1 {
            inside *= &p;
        }
        p += 1;
    }
    inside *= rest;
    (outside, inside)
}

/// Canonical polynomial over the rationals.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Expr {
    terms: Arc<BTreeMap<Mono, Q>>,
}

fn insert(map: &mut BTreeMap<Mono, Q>, mono: Mono, coef: Q) {
    if coef.is_zero() {
        return;
    }
    // ρ² → 1 − w² for correlation atoms
    let hit = mono.pows.iter().position(|(a, e)| *e >= 2 && a.corr_root().is_some());
    if let Some(i) = hit {
        let root = mono.pows[i].0.corr_root().unwrap();
        let mut lower = mono.clone();
        lower.pows[i].1 -= 2;
        if lower.pows[i].1 == 0 {
            lower.pows.remove(i);
        }
        let w2 = Mono {
            pows: vec![(root, 2)],
            exp: None,
        };
        let (c2, with_w) = lower.mul(&w2);
        insert(map, lower, coef.clone());
        insert(map, with_w, -coef * c2);
        return;
    }
    use std::collections::btree_map::Entry;
    match map.entry(mono) {
        Entry::Vacant(v) => {
            v.insert(coef);
        }
        Entry::Occupied(mut o) => {
            *o.get_mut() += coef;
            if o.get().is_zero() {
                o.remove();
            }
        }
    }
}

impl Expr {
    pub fn zero() -> Expr {
        Expr::default()
    }

    pub fn one() -> Expr {
        Expr::constant(Q::one())
    }

    pub fn int(n: i64) -> Expr {
        Expr::constant(q(n))
    }

    pub fn frac(n: i64, d: i64) -> Expr {
        Expr::constant(qr(n, d))
    }

    pub fn constant(c: Q) -> Expr {
        Expr::from_terms([(Mono::one(), c)])
    }

    pub fn atom(a: Atom) -> Expr {
        Expr::from_terms([(
            Mono {
                pows: vec![(a, 1)],
                exp: None,
            },
            Q::one(),
        )])
    }

    pub fn from_terms<I: IntoIterator<Item = (Mono, Q)>>(it: I) -> Expr {
        let mut map = BTreeMap::new();
        for (m, c) in it {
            insert(&mut map, m, c);
        }
        Expr {
            terms: Arc::new(map),
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Mono, &Q)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// The rational value when the expression is constant.
    pub fn as_rational(&self) -> Option<Q> {
        match self.terms.len() {
            0 => Some(Q::zero()),
            1 => {
                let (m, c) = self.terms.iter().next().unwrap();
                m.is_one().then(|| c.clone())
            }
            _ => None,
        }
    }

    pub fn as_monomial(&self) -> Option<(Q, Mono)> {
        if self.terms.len() != 1 {
            return None;
        }
        let (m, c) = self.terms.iter().next().unwrap();
        Some((c.clone(), m.clone()))
    }

    pub fn scale(&self, c: &Q) -> Expr {
        if c.is_zero() {
            return Expr::zero();
        }
        Expr::from_terms(self.terms.iter().map(|(m, k)| (m.clone(), k * c)))
    }

    pub fn exp(arg: &Expr) -> Expr {
        if arg.is_zero() {
            return Expr::one();
        }
        Expr::from_terms([(
            Mono {
                pows: vec![],
                exp: Some(arg.clone()),
            },
            Q::one(),
        )])
    }

    pub fn pow(&self, e: i32) -> Result<Expr, ExprError> {
        if e >= 0 {
            let mut acc = Expr::one();
            for _ in 0..e {
                acc = &acc * self;
            }
            return Ok(acc);
        }
        let inv = self.recip()?;
        inv.pow(-e)
    }

    pub fn recip(&self) -> Result<Expr, ExprError> {
        let (c, m) = self
            .as_monomial()
            .ok_or_else(|| ExprError::NonInvertible(self.to_string()))?;
        if !m.invertible() {
            return Err(ExprError::NonInvertible(self.to_string()));
        }
        let inv = m.inverse();
        // normalize through a product so integer roots are reduced
        let (k, m2) = Mono::one().mul(&inv);
        Ok(Expr::from_terms([(m2, c.recip() * k)]))
    }

    pub fn div(&self, other: &Expr) -> Result<Expr, ExprError> {
        if let Some(c) = other.as_rational() {
            if c.is_zero() {
                return Err(ExprError::DivisionByZero);
            }
            return Ok(self.scale(&c.recip()));
        }
        Ok(self * &other.recip()?)
    }

    /// All atoms occurring anywhere (including inside exponentials, excluding antiderivative integrands).
    pub fn atoms(&self) -> std::collections::BTreeSet<Atom> {
        let mut out = std::collections::BTreeSet::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms(&self, out: &mut std::collections::BTreeSet<Atom>) {
        for m in self.terms.keys() {
            for (a, _) in &m.pows {
                out.insert(a.clone());
            }
            if let Some(p) = &m.exp {
                p.collect_atoms(out);
            }
        }
    }

    pub fn contains(&self, a: &Atom) -> bool {
        self.terms.keys().any(|m| {
            m.pows.iter().any(|(b, _)| b == a) || m.exp.as_ref().is_some_and(|p| p.contains(a))
        })
    }

    /// Max degree in a given atom (exponentials count as non-polynomial: None).
    pub fn degree_in(&self, a: &Atom) -> Option<i32> {
        let mut d = 0;
        for m in self.terms.keys() {
            if m.exp.as_ref().is_some_and(|p| p.contains(a)) {
                return None;
            }
            d = d.max(m.power_of(a));
        }
        Some(d)
    }

    /// Groups terms by the exponent vector of the given atoms: e = Σ c_k · Π atoms^k.
    pub fn split_by(&self, atoms: &[Atom]) -> BTreeMap<Vec<i32>, Expr> {
        let mut groups: BTreeMap<Vec<i32>, Vec<(Mono, Q)>> = BTreeMap::new();
        for (m, c) in self.terms.iter() {
            let key: Vec<i32> = atoms.iter().map(|a| m.power_of(a)).collect();
            let rest = Mono {
                pows: m
                    .pows
                    .iter()
                    .filter(|(a, _)| !atoms.contains(a))
                    .cloned()
                    .collect(),
                exp: m.exp.clone(),
            };
            groups.entry(key).or_default().push((rest, c.clone()));
        }
        groups
            .into_iter()
            .map(|(k, v)| (k, Expr::from_terms(v)))
            .collect()
    }

    /// Coefficient of atom^k (k may be 0), treating other atoms as coefficients.
    pub fn coeff(&self, a: &Atom, k: i32) -> Expr {
        let parts = self.split_by(std::slice::from_ref(a));
        parts.get(&vec![k]).cloned().unwrap_or_default()
    }

    pub fn to_f64_if_const(&self) -> Option<f64> {
        self.as_rational().and_then(|c| c.to_f64())
    }

    pub fn is_positive_constant(&self) -> bool {
        self.as_rational().is_some_and(|c| c.is_positive())
    }
}

pub fn sqrt_rational(r: &Q) -> Result<Expr, ExprError> {
    if r.is_negative() {
        return Err(ExprError::NegativeRoot(r.to_string()));
    }
    if r.is_zero() {
        return Ok(Expr::zero());
    }
    // √(p/q) = √(p q) / q
    let pq = r.numer() * r.denom();
    let (outside, inside) = square_split(&pq);
    let coef = Q::new(outside, r.denom().clone());
    if inside.is_one() {
        return Ok(Expr::constant(coef));
    }
    Ok(Expr::from_terms([(
        Mono {
            pows: vec![(Atom::Root(Arc::new(RootDef::Int(inside))), 1)],
            exp: None,
        },
        coef,
    )]))
}

fn add(a: &Expr, b: &Expr) -> Expr {
    if a.is_zero() {
        return b.clone();
    }
    if b.is_zero() {
        return a.clone();
    }
    let mut map = (*a.terms).clone();
    for (m, c) in b.terms.iter() {
        insert(&mut map, m.clone(), c.clone());
    }
    Expr {
        terms: Arc::new(map),
    }
}

fn mul(a: &Expr, b: &Expr) -> Expr {
    let mut map = BTreeMap::new();
    for (ma, ca) in a.terms.iter() {
        for (mb, cb) in b.terms.iter() {
            let (k, m) = ma.mul(mb);
            insert(&mut map, m, ca * cb * k);
        }
    }
    Expr {
        terms: Arc::new(map),
    }
}

macro_rules! binop {
    ($tr:ident, $f:ident, $body:expr) => {
        impl std::ops::$tr<&Expr> for &Expr {
            type Output = Expr;
            fn $f(self, rhs: &Expr) -> Expr {
                $body(self, rhs)
            }
        }
        impl std::ops::$tr<Expr> for Expr {
            type Output = Expr;
            fn $f(self, rhs: Expr) -> Expr {
                $body(&self, &rhs)
            }
        }
        impl std::ops::$tr<&Expr> for Expr {
            type Output = Expr;
            fn $f(self, rhs: &Expr) -> Expr {
                $body(&self, rhs)
            }
        }
        impl std::ops::$tr<Expr> for &Expr {
            type Output = Expr;
            fn $f(self, rhs: Expr) -> Expr {
                $body(self, &rhs)
            }
        }
    };
}

binop!(Add, add, add);
binop!(Mul, mul, mul);
binop!(Sub, sub, |a: &Expr, b: &Expr| add(a, &-b));

impl std::ops::Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::from_terms(self.terms.iter().map(|(m, c)| (m.clone(), -c.clone())))
    }
}

impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        -&self
    }
}

impl std::ops::AddAssign<&Expr> for Expr {
    fn add_assign(&mut self, rhs: &Expr) {
        *self = add(self, rhs);
    }
}

impl std::iter::Sum for Expr {
    fn sum<I: Iterator<Item = Expr>>(iter: I) -> Expr {
        let mut map = BTreeMap::new();
        for e in iter {
            for (m, c) in e.terms.iter() {
                insert(&mut map, m.clone(), c.clone());
            }
        }
        Expr {
            terms: Arc::new(map),
        }
    }
}

impl From<i64> for Expr {
    fn from(n: i64) -> Expr {
        Expr::int(n)
    }
}

impl From<Atom> for Expr {
    fn from(a: Atom) -> Expr {
        Expr::atom(a)
    }
}
