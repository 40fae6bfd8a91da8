//! Catalog generators per model, with the corrections the engine required.

use num_traits::{Signed, Zero};

use crate::expr::{q, qr, sqrt_rational, Atom, Expr, RootDef, Q};
use crate::jet;
use crate::models::{ModelError, Params};

use super::VectorField;

#[derive(Clone, Debug)]
pub struct Generator {
    pub field: VectorField,
    /// What was changed relative to the printed form, if anything.
    pub repair: Option<&'static str>,
}

fn gen(name: &str, xt: Expr, xx: Expr, xy: Expr, eta_mult: Expr) -> Generator {
    Generator {
        field: VectorField::new(name, xt, xx, xy, eta_mult * jet::u()),
        repair: None,
    }
}

fn repaired(mut g: Generator, note: &'static str) -> Generator {
    g.repair = Some(note);
    g
}

fn xy() -> (Expr, Expr, Expr) {
    (
        Expr::atom(Atom::t()),
        Expr::atom(Atom::var("x")),
        Expr::atom(Atom::var("y")),
    )
}

fn z() -> Expr {
    Expr::zero()
}

fn one() -> Expr {
    Expr::one()
}

fn h(e: Expr) -> Expr {
    e.scale(&qr(1, 2))
}

/// Generators of the maximal finite algebra the catalog records for `p.model`,
/// together with the time translation and u∂u where they apply.
pub fn catalog_generators(p: &mut Params) -> Result<Vec<Generator>, ModelError> {
    let (t, x, y) = xy();
    let gens = match p.model {
        "heat1d" => vec![
            gen("X_t", one(), z(), z(), z()),
            gen("X_u", z(), z(), z(), one()),
            gen("X1", z(), one(), z(), z()),
            gen("X2", z(), t.scale(&q(2)), z(), -x.clone()),
            gen("X3", t.scale(&q(2)), x.clone(), z(), z()),
            gen(
                "X4",
                (&t * &t).scale(&q(4)),
                (&t * &x).scale(&q(4)),
                z(),
                -(&x * &x + t.scale(&q(2))),
            ),
        ],
        "heat2d" => vec![
            gen("X_t", one(), z(), z(), z()),
            gen("X_u", z(), z(), z(), one()),
            gen("X1", z(), one(), z(), z()),
            gen("X2", z(), t.scale(&q(2)), z(), -x.clone()),
            gen("X3", z(), z(), one(), z()),
            gen("X4", z(), z(), t.scale(&q(2)), -y.clone()),
            gen("X5", z(), y.clone(), -x.clone(), z()),
            gen("X6", t.scale(&q(2)), x.clone(), y.clone(), z()),
            gen(
                "X7",
                (&t * &t).scale(&q(4)),
                (&t * &x).scale(&q(4)),
                (&t * &y).scale(&q(4)),
                -(&x * &x + &y * &y + t.scale(&q(4))),
            ),
        ],
        "bs2d_canonical" => bs2d_canonical(p)?,
        "twofactor_q0" => twofactor_q0(p)?,
        "twofactor_canonical" => twofactor_general(p)?,
        "bs2d_special_nonauto" => special_nonauto(p)?,
        other => {
            return Err(ModelError::Unsupported(format!(
                "no generator catalog for `{other}`; transform to a canonical model first"
            )))
        }
    };
    Ok(gens)
}

fn bs2d_canonical(p: &Params) -> Result<Vec<Generator>, ModelError> {
    let (t, x, y) = xy();
    let (f1, f2, k) = (p.get("phi1")?.clone(), p.get("phi2")?.clone(), p.get("k")?.clone());
    // φ₁² + φ₂² + 8k
    let c = &f1 * &f1 + &f2 * &f2 + k.scale(&q(8));
    Ok(vec![
        gen("X_t", one(), z(), z(), z()),
        gen("X_u", z(), z(), z(), one()),
        gen("X1", z(), one(), z(), z()),
        repaired(
            gen("X2", z(), t.clone(), z(), &x + h(&f1 * &t)),
            "u-coefficient x + φ₁t/2 in place of the printed form",
        ),
        gen("X3", z(), z(), one(), z()),
        repaired(
            gen("X4", z(), z(), t.clone(), &y + h(&f2 * &t)),
            "u-coefficient y + φ₂t/2 in place of the printed form",
        ),
        gen("X5", z(), y.clone(), -x.clone(), h(&f1 * &y - &f2 * &x)),
        repaired(
            gen(
                "X6",
                t.scale(&q(2)),
                x.clone(),
                y.clone(),
                h(&f1 * &x + &f2 * &y + h(&t * &c)),
            ),
            "u-coefficient carries t(φ₁² + φ₂² + 8k)/4",
        ),
        repaired(
            gen(
                "X7",
                &t * &t,
                &t * &x,
                &t * &y,
                h(&x * &x + &y * &y) + h(&t * (&f1 * &x + &f2 * &y)) + (&t * &t * &c).scale(&qr(1, 8)) - &t,
            ),
            "u-coefficient carries t²(φ₁² + φ₂² + 8k)/8 − t",
        ),
    ])
}

fn twofactor_q0(p: &Params) -> Result<Vec<Generator>, ModelError> {
    let (t, x, y) = xy();
    let (p1, p2, p3) = (p.get("p1")?.clone(), p.get("p2")?.clone(), p.get("p3")?.clone());
    let e_plus = Expr::exp(&h(&p1 * &t));
    let e_minus = Expr::exp(&h(-(&p1 * &t)));
    let p1s = &p1 * &p1;
    Ok(vec![
        gen("X_t", one(), z(), z(), z()),
        gen("X_F", z(), z(), z(), one()),
        gen("X'1", z(), p2.clone(), -p1.clone(), z()),
        gen("X'2", z(), e_plus, z(), z()),
        gen(
            "X'3",
            z(),
            &p1 * &p2 * &t + p2.scale(&q(2)),
            -(&t * &p1s),
            &p1s * &y,
        ),
        gen(
            "X'4",
            z(),
            &e_minus * (&p1s - &p2 * &p2),
            &e_minus * (&p1 * &p2).scale(&q(2)),
            &e_minus * &p1s * (&p1 * &x + &p2 * &y + &p3),
        ),
    ])
}

/// 1/(α + β√n) for rational α, β.
fn recip_quadratic(e: &Expr) -> Result<Expr, ModelError> {
    if let Some(r) = e.as_rational() {
        if r.is_zero() {
            return Err(ModelError::Invariant("singular eigen system".into()));
        }
        return Ok(Expr::constant(r.recip()));
    }
    let roots: Vec<(Atom, Q)> = e
        .atoms()
        .into_iter()
        .filter_map(|a| match &a {
            Atom::Root(r) => match &**r {
                RootDef::Int(n) => Some((a.clone(), Q::from_integer(n.clone()))),
                _ => None,
            },
            _ => None,
        })
        .collect();
    let [(root, n)] = roots.as_slice() else {
        return Err(ModelError::Unsupported(format!("cannot invert `{e}`")));
    };
    let parts = e.split_by(std::slice::from_ref(root));
    let get = |k: i32| parts.get(&vec![k]).cloned().unwrap_or_else(Expr::zero);
    let (Some(al), Some(be)) = (get(0).as_rational(), get(1).as_rational()) else {
        return Err(ModelError::Unsupported(format!("cannot invert `{e}`")));
    };
    let norm = &al * &al - &be * &be * n;
    if norm.is_zero() {
        return Err(ModelError::Invariant("singular eigen system".into()));
    }
    let conj = Expr::constant(al) - Expr::atom(root.clone()).scale(&be);
    Ok(conj.scale(&norm.recip()))
}

fn rational_param(p: &Params, n: &str) -> Result<Q, ModelError> {
    p.get(n)?
        .as_rational()
        .ok_or_else(|| ModelError::Params(format!("{n} must be a rational constant for the eigen construction")))
}

/// One eigen-mode of the canonical two-factor drift matrix: eigenvalue 2c of M.
pub struct TwoFactorMode {
    pub c: Expr,
    /// Eigenvector of M.
    pub v: [Expr; 2],
    /// Eigenvector of Mᵀ.
    pub beta: [Expr; 2],
    /// (M/2 + cI)⁻¹β.
    pub w: [Expr; 2],
    pub gamma: Expr,
}

fn eigvec(m: [[Q; 2]; 2], lam: &Expr) -> [Expr; 2] {
    let [[a, b], [c, d]] = m;
    if !b.is_zero() {
        [Expr::constant(b), lam - Expr::constant(a)]
    } else if !c.is_zero() {
        [lam - Expr::constant(d), Expr::constant(c)]
    } else if (lam - Expr::constant(a)).is_zero() {
        [one(), z()]
    } else {
        [z(), one()]
    }
}

/// The two modes c± = eig(M/2), M = [[p₁, p₂], [q₁, q₂]].
pub fn two_factor_modes(p: &Params) -> Result<Vec<TwoFactorMode>, ModelError> {
    let [p1, p2, q1, q2] = ["p1", "p2", "q1", "q2"].map(|n| rational_param(p, n));
    let (p1, p2, q1, q2) = (p1?, p2?, q1?, q2?);
    let m3 = (p.get("p3")?.clone(), p.get("q3")?.clone());
    let tr = &p1 + &q2;
    let det = &p1 * &q2 - &p2 * &q1;
    let disc = &tr * &tr - det.clone() * q(4);
    if !disc.is_positive() {
        return Err(ModelError::Unsupported(
            "drift matrix needs distinct real eigenvalues".into(),
        ));
    }
    if det.is_zero() {
        return Err(ModelError::Unsupported("drift matrix has a zero eigenvalue".into()));
    }
    let sq = sqrt_rational(&disc)?;
    let m = [[p1.clone(), p2.clone()], [q1.clone(), q2.clone()]];
    let mt = [[p1.clone(), q1.clone()], [p2.clone(), q2.clone()]];
    let mut modes = Vec::new();
    for sign in [1i64, -1] {
        // eigenvalue λ = 2c of M
        let lam = (Expr::constant(tr.clone()) + sq.scale(&q(sign))).scale(&qr(1, 2));
        let c = lam.scale(&qr(1, 2));
        let v = eigvec(m.clone(), &lam);
        let beta = eigvec(mt.clone(), &lam);
        let n11 = Expr::constant(&p1 / q(2)) + &c;
        let n22 = Expr::constant(&q2 / q(2)) + &c;
        let n12 = Expr::constant(&p2 / q(2));
        let n21 = Expr::constant(&q1 / q(2));
        let idet = recip_quadratic(&(&n11 * &n22 - &n12 * &n21))?;
        let w = [
            (&n22 * &beta[0] - &n12 * &beta[1]) * &idet,
            (-(&n21 * &beta[0]) + &n11 * &beta[1]) * &idet,
        ];
        let gamma = (&m3.0 * &beta[0] + &m3.1 * &beta[1]) * recip_quadratic(&c.scale(&q(2)))?;
        modes.push(TwoFactorMode { c, v, beta, w, gamma });
    }
    Ok(modes)
}

fn twofactor_general(p: &Params) -> Result<Vec<Generator>, ModelError> {
    let (t, x, y) = xy();
    let modes = two_factor_modes(p)?;
    let mut out = vec![
        gen("X_t", one(), z(), z(), z()),
        gen("X_F", z(), z(), z(), one()),
    ];
    for (i, md) in modes.iter().enumerate() {
        let e = Expr::exp(&(&md.c * &t));
        out.push(gen(&format!("X{}", i + 1), z(), &e * &md.v[0], &e * &md.v[1], z()));
    }
    for (i, md) in modes.iter().enumerate() {
        let e = Expr::exp(&(-(&md.c * &t)));
        let mult = &md.beta[0] * &x + &md.beta[1] * &y + &md.gamma;
        out.push(repaired(
            gen(&format!("X{}", i + 3), z(), &e * &md.w[0], &e * &md.w[1], &e * mult),
            "time factor e^{-ct} in place of e^{ct}",
        ));
    }
    Ok(out)
}

fn special_nonauto(p: &mut Params) -> Result<Vec<Generator>, ModelError> {
    let (t, x, y) = xy();
    let l = [p.get("L1")?.clone(), p.get("L2")?.clone()];
    let k = p.get("k")?.clone();
    let tt = &t * &t;
    let mut anti = |name: String, e: Expr| p.table.anti(&name, e);
    let mut ii = Vec::new();
    let mut mm = Vec::new();
    let mut nn = Vec::new();
    let mut jj = Vec::new();
    let mut aa = Vec::new();
    let mut bb = Vec::new();
    let mut cc = Vec::new();
    for (i, li) in l.iter().enumerate() {
        let s = i + 1;
        let d1 = li.diff(&Atom::t())?;
        let d2 = d1.diff(&Atom::t())?;
        let ip = anti(format!("IL{s}"), li.clone());
        let mp = anti(format!("ML{s}"), &t * &d1);
        let np = anti(format!("NL{s}"), &tt * &d2);
        jj.push(anti(format!("JL{s}"), &np + mp.scale(&q(3))));
        aa.push(anti(format!("AL{s}"), li * &np));
        bb.push(anti(format!("BL{s}"), li * &mp));
        cc.push(anti(format!("CL{s}"), &tt * li * &d1));
        ii.push(ip);
        mm.push(mp);
        nn.push(np);
    }
    let ee = anti("EL".into(), &t * (&l[0] * &l[0] + &l[1] * &l[1]));
    let z8_x = |i: usize, xi: &Expr| -> Result<Expr, ModelError> {
        let d1 = l[i].diff(&Atom::t())?;
        Ok(-h(xi * (&nn[i] + mm[i].scale(&q(3)) - &tt * &d1 - &t * &l[i] - xi)))
    };
    let g = (&t * (&t * &k - one())).scale(&q(4)) - &aa[0] - &aa[1] - (&bb[0] + &bb[1]).scale(&q(3))
        + &cc[0]
        + &cc[1]
        + &ee;
    let z8_eta = z8_x(0, &x)? + z8_x(1, &y)? + g.scale(&qr(1, 4));
    Ok(vec![
        gen("X_u", z(), z(), z(), one()),
        gen("Z1", z(), one(), z(), z()),
        gen("Z2", z(), t.clone(), z(), h(ii[0].clone()) + &x),
        gen("Z3", z(), z(), one(), z()),
        gen("Z4", z(), z(), t.clone(), h(ii[1].clone()) + &y),
        repaired(
            gen("Z5", z(), &y + h(ii[1].clone()), -(&x + h(ii[0].clone())), z()),
            "no u-component",
        ),
        gen("Z6", one(), -h(l[0].clone()), -h(l[1].clone()), k.clone()),
        repaired(
            gen(
                "Z7",
                t.scale(&q(2)),
                &x - h(ii[0].clone()) - &mm[0],
                &y - h(ii[1].clone()) - &mm[1],
                (&t * &k).scale(&q(2)),
            ),
            "u-coefficient 2tk and spatial shifts −I/2 − M",
        ),
        repaired(
            gen(
                "Z8",
                tt.clone(),
                &t * &x - h(jj[0].clone()),
                &t * &y - h(jj[1].clone()),
                z8_eta,
            ),
            "u-coefficient rebuilt from the integral terms with 4t(tk − 1)",
        ),
    ])
}

/// Integration-by-parts values of the Z-generator antiderivatives in terms of
/// I = ∫Λ and G = ∫tΛ², fixing their integration constants consistently.
/// Requires `catalog_generators` to have declared the atoms on `p`.
pub fn special_antiderivative_relations(p: &mut Params) -> Result<crate::expr::Bindings, ModelError> {
    let t = Expr::atom(Atom::t());
    let tt = &t * &t;
    let l = [p.get("L1")?.clone(), p.get("L2")?.clone()];
    let atom = |p: &Params, n: &str| -> Result<Atom, ModelError> {
        p.table
            .lookup(n)
            .cloned()
            .ok_or_else(|| ModelError::Params(format!("antiderivative `{n}` not declared")))
    };
    let mut b = crate::expr::Bindings::new();
    let mut gs = Vec::new();
    for (i, li) in l.iter().enumerate() {
        let s = i + 1;
        let gi = p.table.anti(&format!("GL{s}"), &t * li * li);
        let ii = Expr::atom(atom(p, &format!("IL{s}"))?);
        let d1 = li.diff(&Atom::t())?;
        let half_tl2 = h(&tt * li * li);
        b.insert(atom(p, &format!("ML{s}"))?, &t * li - &ii);
        b.insert(atom(p, &format!("NL{s}"))?, &tt * &d1 - (&t * li).scale(&q(2)) + ii.scale(&q(2)));
        b.insert(atom(p, &format!("JL{s}"))?, &tt * li - &t * &ii);
        b.insert(atom(p, &format!("AL{s}"))?, &half_tl2 - gi.scale(&q(3)) + &ii * &ii);
        b.insert(atom(p, &format!("BL{s}"))?, &gi - h(&ii * &ii));
        b.insert(atom(p, &format!("CL{s}"))?, half_tl2 - &gi);
        gs.push(gi);
    }
    b.insert(atom(p, "EL")?, &gs[0] + &gs[1]);
    Ok(b)
}
