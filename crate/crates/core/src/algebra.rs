//! Lie brackets, exact structure constants and identification of the
//! decompositions that occur for the catalog equations.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_traits::{One, Signed, ToPrimitive, Zero};
use serde_json::json;

use crate::expr::{Atom, Expr, ExprError, Mono, Q};
use crate::linalg::{self, Matrix, Vector};
use crate::symmetry::VectorField;

#[derive(Debug, thiserror::Error)]
pub enum AlgebraError {
    #[error("basis element `{0}` is a combination of the others")]
    Dependent(String),
    #[error("[{a}, {b}] leaves the span of the basis; remainder {remainder}")]
    NotClosed { a: String, b: String, remainder: String },
    #[error(transparent)]
    Expr(#[from] ExprError),
}

/// [X, Y]ᵃ = X(Yᵃ) − Y(Xᵃ) on the components (ξᵗ, ξˣ, ξʸ, η).
pub fn commutator(a: &VectorField, b: &VectorField) -> Result<VectorField, ExprError> {
    let ca = a.components();
    let cb = b.components();
    let mut out = [Expr::zero(), Expr::zero(), Expr::zero(), Expr::zero()];
    for k in 0..4 {
        out[k] = a.apply(cb[k])? - b.apply(ca[k])?;
    }
    let [xt, xx, xy, eta] = out;
    Ok(VectorField::new(&format!("[{}, {}]", a.name, b.name), xt, xx, xy, eta))
}

type Key = (usize, Mono);

fn coordinates(v: &VectorField) -> BTreeMap<Key, Q> {
    let mut out = BTreeMap::new();
    for (k, e) in v.components().iter().enumerate() {
        for (m, c) in e.terms() {
            out.insert((k, m.clone()), c.clone());
        }
    }
    out
}

/// Splits off the u-free part of η: the component in the solution-symmetry ideal.
fn split_infinite(v: &VectorField) -> (VectorField, Expr) {
    let u = Atom::u();
    let rest = v.eta.coeff(&u, 0);
    let mut main = v.clone();
    main.eta = &v.eta - &rest;
    (main, rest)
}

/// Rational structure constants cᵏᵢⱼ with [eᵢ, eⱼ] = Σₖ cᵏᵢⱼ eₖ.
#[derive(Clone, Debug)]
pub struct StructureConstants {
    pub names: Vec<String>,
    /// c[i][j][k]
    pub c: Vec<Vec<Vec<Q>>>,
    /// Pairs whose bracket also has a component f(t,x,y)∂u in the ∞A₁ ideal.
    pub infinite: Vec<(usize, usize, Expr)>,
}

pub fn structure_constants(basis: &[VectorField]) -> Result<StructureConstants, AlgebraError> {
    let n = basis.len();
    let coords: Vec<BTreeMap<Key, Q>> = basis.iter().map(coordinates).collect();
    let mut rows: BTreeMap<Key, usize> = BTreeMap::new();
    for c in &coords {
        for k in c.keys() {
            let len = rows.len();
            rows.entry(k.clone()).or_insert(len);
        }
    }
    let mut a = linalg::zeros(rows.len(), n);
    for (j, c) in coords.iter().enumerate() {
        for (k, v) in c {
            a[rows[k]][j] = v.clone();
        }
    }
    if linalg::rank(&a) < n {
        for j in 1..n {
            let cols: Vec<Vector> = (0..=j).map(|i| (0..rows.len()).map(|r| a[r][i].clone()).collect()).collect();
            if linalg::rank(&cols) <= j {
                return Err(AlgebraError::Dependent(basis[j].name.clone()));
            }
        }
        return Err(AlgebraError::Dependent(basis[0].name.clone()));
    }
    let mut c = vec![vec![vec![Q::zero(); n]; n]; n];
    let mut infinite = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let br = commutator(&basis[i], &basis[j])?;
            let (main, rest) = split_infinite(&br);
            let bc = coordinates(&main);
            let mut rhs = vec![Q::zero(); rows.len()];
            let mut outside = false;
            for (k, v) in &bc {
                match rows.get(k) {
                    Some(&r) => rhs[r] = v.clone(),
                    None => outside = true,
                }
            }
            let sol = if outside { None } else { linalg::solve(&a, &rhs) };
            let Some(sol) = sol else {
                return Err(AlgebraError::NotClosed {
                    a: basis[i].name.clone(),
                    b: basis[j].name.clone(),
                    remainder: main.to_string(),
                });
            };
            if !rest.is_zero() {
                infinite.push((i, j, rest));
            }
            for k in 0..n {
                c[j][i][k] = -sol[k].clone();
                c[i][j][k] = sol[k].clone();
            }
        }
    }
    Ok(StructureConstants {
        names: basis.iter().map(|b| b.name.clone()).collect(),
        c,
        infinite,
    })
}

impl StructureConstants {
    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn bracket(&self, x: &[Q], y: &[Q]) -> Vector {
        let n = self.dim();
        let mut out = vec![Q::zero(); n];
        for i in 0..n {
            if x[i].is_zero() {
                continue;
            }
            for j in 0..n {
                if y[j].is_zero() {
                    continue;
                }
                let f = &x[i] * &y[j];
                for k in 0..n {
                    if !self.c[i][j][k].is_zero() {
                        out[k] += &f * &self.c[i][j][k];
                    }
                }
            }
        }
        out
    }

    /// ad(x) as a matrix acting on coordinate columns.
    pub fn ad(&self, x: &[Q]) -> Matrix {
        let n = self.dim();
        let mut m = linalg::zeros(n, n);
        for j in 0..n {
            let mut e = vec![Q::zero(); n];
            e[j] = Q::one();
            let col = self.bracket(x, &e);
            for k in 0..n {
                m[k][j] = col[k].clone();
            }
        }
        m
    }

    /// Structure constants in the basis fᵢ = Σⱼ p[i][j] eⱼ (p invertible).
    pub fn change_basis(&self, p: &Matrix) -> Option<StructureConstants> {
        let n = self.dim();
        let pinv_t = linalg::transpose(&linalg::inverse(p)?);
        let mut c = vec![vec![vec![Q::zero(); n]; n]; n];
        for i in 0..n {
            for j in 0..n {
                let br = self.bracket(&p[i], &p[j]);
                // coordinates in the new basis: solve Σ_k d_k p[k] = br
                let d = linalg::mul_vec(&pinv_t, &br);
                c[i][j] = d;
            }
        }
        Some(StructureConstants {
            names: (0..n).map(|i| format!("f{}", i + 1)).collect(),
            c,
            infinite: vec![],
        })
    }

    pub fn jacobi_holds(&self) -> bool {
        let n = self.dim();
        let e = |i: usize| {
            let mut v = vec![Q::zero(); n];
            v[i] = Q::one();
            v
        };
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let (a, b, c) = (e(i), e(j), e(k));
                    let t1 = self.bracket(&self.bracket(&a, &b), &c);
                    let t2 = self.bracket(&self.bracket(&b, &c), &a);
                    let t3 = self.bracket(&self.bracket(&c, &a), &b);
                    if (0..n).any(|m| !(&t1[m] + &t2[m] + &t3[m]).is_zero()) {
                        return false;
                    }
                }
            }
        }
        true
    }

    fn unit_basis(&self) -> Vec<Vector> {
        let n = self.dim();
        (0..n)
            .map(|i| {
                let mut v = vec![Q::zero(); n];
                v[i] = Q::one();
                v
            })
            .collect()
    }

    fn span_of_brackets(&self, a: &[Vector], b: &[Vector]) -> Vec<Vector> {
        let mut vs = Vec::new();
        for x in a {
            for y in b {
                vs.push(self.bracket(x, y));
            }
        }
        linalg::span_basis(&vs, self.dim())
    }

    fn killing(&self) -> Matrix {
        let n = self.dim();
        let ads: Vec<Matrix> = self.unit_basis().iter().map(|e| self.ad(e)).collect();
        let mut k = linalg::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = linalg::trace(&linalg::mul(&ads[i], &ads[j]));
                k[i][j] = v.clone();
                k[j][i] = v;
            }
        }
        k
    }

    /// Centralizer of `sub` inside `sub`.
    fn center_of(&self, sub: &[Vector]) -> Vec<Vector> {
        let n = self.dim();
        if sub.is_empty() {
            return vec![];
        }
        // unknown α: x = Σ αᵢ subᵢ, constraints [x, subⱼ] = 0
        let m = sub.len();
        let mut rows = Vec::new();
        for y in sub {
            let cols: Vec<Vector> = sub.iter().map(|s| self.bracket(s, y)).collect();
            for k in 0..n {
                rows.push((0..m).map(|i| cols[i][k].clone()).collect::<Vector>());
            }
        }
        linalg::nullspace(&rows, m)
            .into_iter()
            .map(|alpha| combine(&alpha, sub, n))
            .collect()
    }

    fn is_subspace_of(&self, a: &[Vector], b: &[Vector]) -> bool {
        let mut all = b.to_vec();
        all.extend(a.iter().cloned());
        linalg::rank(&all) == linalg::rank(&b.to_vec())
    }

    fn lower_central(&self, sub: &[Vector]) -> Vec<usize> {
        let mut dims = vec![sub.len()];
        let mut cur = sub.to_vec();
        for _ in 0..self.dim() + 1 {
            let next = self.span_of_brackets(sub, &cur);
            if next.len() == cur.len() {
                break;
            }
            dims.push(next.len());
            cur = next;
            if cur.is_empty() {
                break;
            }
        }
        dims
    }

    fn derived_series(&self) -> Vec<usize> {
        let mut cur = self.unit_basis();
        let mut dims = vec![cur.len()];
        loop {
            let next = self.span_of_brackets(&cur, &cur);
            if next.len() == cur.len() {
                break;
            }
            dims.push(next.len());
            cur = next;
            if cur.is_empty() {
                break;
            }
        }
        dims
    }

    fn is_heisenberg(&self, sub: &[Vector]) -> bool {
        let d = sub.len();
        if d < 3 || d % 2 == 0 {
            return false;
        }
        let z = self.center_of(sub);
        let der = self.span_of_brackets(sub, sub);
        z.len() == 1 && der.len() == 1 && self.is_subspace_of(&der, &z)
    }
}

fn combine(alpha: &[Q], vs: &[Vector], n: usize) -> Vector {
    let mut x = vec![Q::zero(); n];
    for (a, v) in alpha.iter().zip(vs) {
        if a.is_zero() {
            continue;
        }
        for k in 0..n {
            x[k] += a * &v[k];
        }
    }
    x
}

/// Coordinates of `v` in the basis `cols` (columns), which must span it.
fn coords_in(cols: &[Vector], v: &[Q]) -> Vector {
    let n = v.len();
    let a: Matrix = (0..n).map(|r| cols.iter().map(|c| c[r].clone()).collect()).collect();
    linalg::solve(&a, v).expect("vector lies in the span")
}

#[derive(Clone, Debug)]
pub struct AlgebraSignature {
    pub dim: usize,
    pub constants: StructureConstants,
    pub derived_series: Vec<usize>,
    pub lower_central_series: Vec<usize>,
    pub center_dim: usize,
    pub radical_dim: usize,
    pub nilradical_dim: usize,
    pub is_abelian: bool,
    pub is_nilpotent: bool,
    pub is_solvable: bool,
    pub is_sl2: bool,
    pub is_heisenberg_w: bool,
    pub has_so2_rotation: bool,
    pub label: String,
}

fn subscript(n: usize) -> String {
    n.to_string()
        .chars()
        .map(|c| char::from_u32(0x2080 + c.to_digit(10).unwrap()).unwrap())
        .collect()
}

/// True when A² = κI with κ < 0.
fn is_rotation(a: &Matrix) -> bool {
    let n = a.len();
    if n == 0 || n % 2 == 1 {
        return false;
    }
    let sq = linalg::mul(a, a);
    let kappa = sq[0][0].clone();
    if !kappa.is_negative() {
        return false;
    }
    (0..n).all(|i| (0..n).all(|j| sq[i][j] == if i == j { kappa.clone() } else { Q::zero() }))
}

fn poly_trim(p: &mut Vec<Q>) {
    while p.last().is_some_and(|c| c.is_zero()) {
        p.pop();
    }
}

fn poly_rem(a: &[Q], b: &[Q]) -> Vec<Q> {
    let mut r = a.to_vec();
    poly_trim(&mut r);
    let db = b.len() - 1;
    while r.len() > db && !r.is_empty() {
        let f = r.last().unwrap() / b.last().unwrap();
        let shift = r.len() - 1 - db;
        for (i, c) in b.iter().enumerate() {
            r[shift + i] -= &f * c;
        }
        poly_trim(&mut r);
    }
    r
}

fn poly_gcd(mut a: Vec<Q>, mut b: Vec<Q>) -> Vec<Q> {
    poly_trim(&mut a);
    poly_trim(&mut b);
    while !b.is_empty() {
        let r = poly_rem(&a, &b);
        a = b;
        b = r;
    }
    a
}

/// Does some real combination λA + μB act as a rotation?
fn pencil_has_rotation(a: &Matrix, b: &Matrix) -> bool {
    if is_rotation(b) {
        return true;
    }
    let n = a.len();
    if n == 0 {
        return false;
    }
    // (A + τB)² = A² + τ(AB + BA) + τ²B² = κ(τ)I
    let a2 = linalg::mul(a, a);
    let b2 = linalg::mul(b, b);
    let ab = linalg::mul(a, b);
    let ba = linalg::mul(b, a);
    let nq = Q::from_integer((n as i64).into());
    let kappa: [Q; 3] = [
        linalg::trace(&a2) / &nq,
        (linalg::trace(&ab) + linalg::trace(&ba)) / &nq,
        linalg::trace(&b2) / &nq,
    ];
    let mut g: Vec<Q> = vec![];
    for i in 0..n {
        for j in 0..n {
            let d = if i == j { 1 } else { 0 };
            let e = [
                a2[i][j].clone() - if d == 1 { kappa[0].clone() } else { Q::zero() },
                &ab[i][j] + &ba[i][j] - if d == 1 { kappa[1].clone() } else { Q::zero() },
                b2[i][j].clone() - if d == 1 { kappa[2].clone() } else { Q::zero() },
            ];
            g = poly_gcd(g, e.to_vec());
        }
    }
    let kappa_at = |tau: f64| {
        kappa[0].to_f64().unwrap() + tau * kappa[1].to_f64().unwrap() + tau * tau * kappa[2].to_f64().unwrap()
    };
    match g.len() {
        // every combination squares to a scalar: is the quadratic form κ negative somewhere?
        0 => {
            let [c0, c1, c2] = kappa.clone().map(|k| k.to_f64().unwrap());
            c0 < 0.0 || c2 < 0.0 || c1 * c1 > 4.0 * c0 * c2
        }
        1 => false,
        2 => kappa_at(-(g[0].to_f64().unwrap() / g[1].to_f64().unwrap())) < 0.0,
        _ => {
            let (c, b, a2c) = (
                g[0].to_f64().unwrap(),
                g[1].to_f64().unwrap(),
                g[2].to_f64().unwrap(),
            );
            let disc = b * b - 4.0 * a2c * c;
            if disc < 0.0 {
                return false;
            }
            let s = disc.sqrt();
            [(-b + s) / (2.0 * a2c), (-b - s) / (2.0 * a2c)]
                .iter()
                .any(|&t| kappa_at(t) < 0.0)
        }
    }
}

/// Full signature and decomposition label.
pub fn signature(sc: &StructureConstants) -> AlgebraSignature {
    let n = sc.dim();
    let all = sc.unit_basis();
    let derived = sc.span_of_brackets(&all, &all);
    let center = sc.center_of(&all);
    let derived_series = sc.derived_series();
    let lower = sc.lower_central(&all);
    let is_abelian = derived.is_empty();
    let is_nilpotent = *lower.last().unwrap() == 0;
    let is_solvable = *derived_series.last().unwrap() == 0;
    let is_sl2 = n == 3 && derived.len() == 3;
    let is_heis = sc.is_heisenberg(&all);

    let kill = sc.killing();
    // radical = [L, L]^⊥ with respect to the Killing form
    let rad_rows: Vec<Vector> = derived.iter().map(|d| linalg::mul_vec(&kill, d)).collect();
    let radical: Vec<Vector> = if rad_rows.is_empty() {
        all.clone()
    } else {
        linalg::nullspace(&rad_rows, n)
    };
    // nilradical candidate: radical ∩ (Killing-orthogonal to the radical)
    let gram: Matrix = radical
        .iter()
        .map(|r| radical.iter().map(|s| dot(&linalg::mul_vec(&kill, r), s)).collect())
        .collect();
    let nil: Vec<Vector> = if radical.is_empty() {
        vec![]
    } else {
        let ns = linalg::nullspace(&gram, radical.len());
        let vs: Vec<Vector> = ns.iter().map(|a| combine(a, &radical, n)).collect();
        linalg::span_basis(&vs, n)
    };

    let (label, rot) = label_for(sc, &all, &nil, &kill, is_abelian, is_heis);
    AlgebraSignature {
        dim: n,
        constants: sc.clone(),
        derived_series,
        lower_central_series: lower,
        center_dim: center.len(),
        radical_dim: radical.len(),
        nilradical_dim: nil.len(),
        is_abelian,
        is_nilpotent,
        is_solvable,
        is_sl2,
        is_heisenberg_w: is_heis,
        has_so2_rotation: rot,
        label,
    }
}

fn dot(a: &[Q], b: &[Q]) -> Q {
    a.iter().zip(b).fold(Q::zero(), |s, (x, y)| s + x * y)
}

const UNRECOGNIZED: &str = "unrecognized";

fn label_for(
    sc: &StructureConstants,
    all: &[Vector],
    nil: &[Vector],
    kill: &Matrix,
    is_abelian: bool,
    is_heis: bool,
) -> (String, bool) {
    let n = sc.dim();
    if is_abelian {
        let l = match n {
            1 => "A₁".to_string(),
            2 => "A₁⊕A₁ (abelian)".to_string(),
            k => format!("{k}A₁ (abelian)"),
        };
        return (l, false);
    }
    if is_heis {
        return (format!("W{}", subscript(n)), false);
    }
    if nil.is_empty() {
        if n == 3 && sc.span_of_brackets(all, all).len() == 3 {
            // sl(2,R) has an indefinite Killing form, so(3) a negative definite one
            let neg_def = !has_positive_direction(kill);
            return (if neg_def { "so(3)" } else { "sl(2,R)" }.to_string(), false);
        }
        return (UNRECOGNIZED.into(), false);
    }
    // N must be a nilpotent ideal
    let is_ideal = sc.is_subspace_of(&sc.span_of_brackets(all, nil), nil);
    let nil_lc = sc.lower_central(nil);
    if !is_ideal || *nil_lc.last().unwrap() != 0 || !sc.is_heisenberg(nil) {
        return (UNRECOGNIZED.into(), false);
    }
    let w = format!("W{}", subscript(nil.len()));
    let z = sc.center_of(nil);
    // basis: Z, V (complement of Z in N), C (complement of N in L)
    let mut zv = z.clone();
    for v in nil {
        let mut trial = zv.clone();
        trial.push(v.clone());
        if linalg::rank(&trial) > zv.len() {
            zv = trial;
        }
    }
    let comp: Vec<Vector> = linalg::complete_basis(&zv, n)[zv.len()..].to_vec();
    let basis: Vec<Vector> = zv.iter().chain(comp.iter()).cloned().collect();
    let nz = z.len();
    let nv = zv.len() - nz;
    let nn = zv.len();
    let action = |e: &Vector| -> Matrix {
        // ad(e) on N/Z in the V coordinates
        let mut m = linalg::zeros(nv, nv);
        for j in 0..nv {
            let br = sc.bracket(e, &zv[nz + j]);
            let c = coords_in(&basis, &br);
            for i in 0..nv {
                m[i][j] = c[nz + i].clone();
            }
        }
        m
    };
    // quotient structure constants on C
    let qd = comp.len();
    let qbr = |a: usize, b: usize| -> Vector {
        let c = coords_in(&basis, &sc.bracket(&comp[a], &comp[b]));
        c[nn..].to_vec()
    };
    let quotient_abelian = (0..qd).all(|a| (0..qd).all(|b| qbr(a, b).iter().all(|x| x.is_zero())));
    match qd {
        1 => {
            let rot = is_rotation(&action(&comp[0]));
            let inner = if rot { "so(2)" } else { "A₁" };
            (format!("{{{inner}⊕ₛ{w}}}"), rot)
        }
        2 if quotient_abelian => {
            let rot = pencil_has_rotation(&action(&comp[0]), &action(&comp[1]));
            if rot {
                (format!("{{{{A₁⊕ₛso(2)}}⊕ₛ{w}}}"), true)
            } else {
                (format!("{{{{A₁⊕A₁}}⊕ₛ{w}}}"), false)
            }
        }
        3 | 4 => {
            // quotient derived algebra must be a 3-dim simple part
            let mut dvs = Vec::new();
            for a in 0..qd {
                for b in 0..qd {
                    dvs.push(qbr(a, b));
                }
            }
            let dq = linalg::span_basis(&dvs, qd);
            if dq.len() != 3 {
                return (UNRECOGNIZED.into(), false);
            }
            if qd == 3 {
                return (format!("{{sl(2,R)⊕ₛ{w}}}"), false);
            }
            // the quotient center, lifted
            let mut rows = Vec::new();
            for b in 0..qd {
                let cols: Vec<Vector> = (0..qd).map(|a| qbr(a, b)).collect();
                for k in 0..qd {
                    rows.push((0..qd).map(|a| cols[a][k].clone()).collect::<Vector>());
                }
            }
            let cz = linalg::nullspace(&rows, qd);
            if cz.len() != 1 {
                return (UNRECOGNIZED.into(), false);
            }
            let lift = combine(&cz[0], &comp, n);
            let rot = is_rotation(&action(&lift));
            if rot {
                (format!("{{{{sl(2,R)⊕ₛso(2)}}⊕ₛ{w}}}"), true)
            } else {
                (format!("{{{{sl(2,R)⊕A₁}}⊕ₛ{w}}}"), false)
            }
        }
        _ => (UNRECOGNIZED.into(), false),
    }
}

fn has_positive_direction(k: &Matrix) -> bool {
    // Sylvester: negative definite iff leading minors alternate in sign starting negative
    let n = k.len();
    for d in 1..=n {
        let sub: Matrix = (0..d).map(|i| k[i][..d].to_vec()).collect();
        let det = determinant(&sub);
        let want_negative = d % 2 == 1;
        if (want_negative && !det.is_negative()) || (!want_negative && !det.is_positive()) {
            return true;
        }
    }
    false
}

fn determinant(a: &Matrix) -> Q {
    let n = a.len();
    let mut m = a.clone();
    let mut det = Q::one();
    for c in 0..n {
        let Some(p) = (c..n).find(|&r| !m[r][c].is_zero()) else {
            return Q::zero();
        };
        if p != c {
            m.swap(p, c);
            det = -det;
        }
        det *= &m[c][c];
        let inv = m[c][c].recip();
        for r in (c + 1)..n {
            let f = &m[r][c] * &inv;
            for j in c..n {
                let d = &f * &m[c][j];
                m[r][j] -= d;
            }
        }
    }
    det
}

/// [L, L] as explicit vector fields: an echelon basis of the span of all brackets,
/// combined from `basis`.
pub fn derived_algebra(basis: &[VectorField]) -> Result<Vec<VectorField>, AlgebraError> {
    let sc = structure_constants(basis)?;
    let n = sc.dim();
    let mut rows = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            rows.push(sc.c[i][j].clone());
        }
    }
    let span = linalg::span_basis(&rows, n);
    Ok(span
        .iter()
        .enumerate()
        .map(|(r, v)| {
            let parts: Vec<(Q, &VectorField)> = v.iter().cloned().zip(basis).filter(|(c, _)| !c.is_zero()).collect();
            let mut f = VectorField::combination(&parts);
            f.name = format!("D{}", r + 1);
            f
        })
        .collect())
}

/// Decomposition label of the span of `basis`.
pub fn classify(basis: &[VectorField]) -> Result<String, AlgebraError> {
    Ok(signature(&structure_constants(basis)?).label)
}

/// JSON commutator table: entry [i][j] is the bracket written in the basis.
pub fn table_json(sc: &StructureConstants) -> serde_json::Value {
    let n = sc.dim();
    let mut rows = Vec::new();
    for i in 0..n {
        let mut row = Vec::new();
        for j in 0..n {
            row.push(json!(combination_text(sc, &sc.c[i][j])));
        }
        rows.push(row);
    }
    json!({ "basis": sc.names, "brackets": rows })
}

fn combination_text(sc: &StructureConstants, v: &[Q]) -> String {
    let mut s = String::new();
    for (k, c) in v.iter().enumerate() {
        if c.is_zero() {
            continue;
        }
        let sign = if c.is_negative() { "-" } else { "+" };
        let mag = c.abs();
        if s.is_empty() {
            if c.is_negative() {
                s.push('-');
            }
        } else {
            let _ = write!(s, " {sign} ");
        }
        if mag.is_one() {
            s.push_str(&sc.names[k]);
        } else {
            let _ = write!(s, "{mag}*{}", sc.names[k]);
        }
    }
    if s.is_empty() {
        "0".into()
    } else {
        s
    }
}

/// Aligned plain-text commutator table.
pub fn table_text(sc: &StructureConstants) -> String {
    let n = sc.dim();
    let cells: Vec<Vec<String>> = (0..n)
        .map(|i| (0..n).map(|j| combination_text(sc, &sc.c[i][j])).collect())
        .collect();
    let w0 = sc.names.iter().map(|s| s.chars().count()).max().unwrap_or(1);
    let widths: Vec<usize> = (0..n)
        .map(|j| {
            cells
                .iter()
                .map(|r| r[j].chars().count())
                .chain(std::iter::once(sc.names[j].chars().count()))
                .max()
                .unwrap()
        })
        .collect();
    let pad = |s: &str, w: usize| format!("{s}{}", " ".repeat(w.saturating_sub(s.chars().count())));
    let mut out = String::new();
    let _ = write!(out, "{} |", pad("", w0));
    for j in 0..n {
        let _ = write!(out, " {}", pad(&sc.names[j], widths[j]));
    }
    out.push('\n');
    for i in 0..n {
        let _ = write!(out, "{} |", pad(&sc.names[i], w0));
        for j in 0..n {
            let _ = write!(out, " {}", pad(&cells[i][j], widths[j]));
        }
        out.push('\n');
    }
    for (i, j, rest) in &sc.infinite {
        let _ = writeln!(out, "[{}, {}] lands in ∞A₁ with ({rest}) du", sc.names[*i], sc.names[*j]);
    }
    out
}
