//! Batch entry points. Every run resolves a [`RunConfig`] from an optional
//! TOML file plus flags, writes its artifacts under the output directory
//! together with `run-manifest.json`, and maps outcomes to exit codes.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::algebra::{self, structure_constants, AlgebraError};
use crate::expr::{Expr, ExprError, Q};
use crate::models::{catalog, EvolutionPDE, ModelError, Params};
use crate::numeric::{
    self, admissible_initial_data, ermakov_suite, expr_field, fig3_scenario, integrate_determining_system,
    solution_dimension, solve_fd, Boundary, DeterminingSystem, Direction, Exec, FdData, Fig3Config, Grid,
    NumericEnv, NumericError, Provenance,
};
use crate::reduce::{
    invariant_solution, is_maximally_symmetric_1p1, reduce_once, solve_reduced_ode, to_heat,
    translation_with_scaling,
};
use crate::symmetry::{catalog_generators, check_symmetry, special_antiderivative_relations, VectorField};

pub const EXIT_OK: u8 = 0;
pub const EXIT_THRESHOLD: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_NUMERIC: u8 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("check failed: {0}")]
    Threshold(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Numeric(_) => EXIT_NUMERIC,
            CliError::Threshold(_) => EXIT_THRESHOLD,
        }
    }
}

impl From<ExprError> for CliError {
    fn from(e: ExprError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::UnknownModel(_) | ModelError::Params(_) | ModelError::Invariant(_) | ModelError::Expr(_) => {
                CliError::Config(e.to_string())
            }
            other => CliError::Numeric(other.to_string()),
        }
    }
}

impl From<NumericError> for CliError {
    fn from(e: NumericError) -> Self {
        match e {
            NumericError::Grid(_) | NumericError::Constraint(_) | NumericError::Unbound(_) => {
                CliError::Config(e.to_string())
            }
            NumericError::Expr(x) => x.into(),
            NumericError::Model(x) => x.into(),
            other => CliError::Numeric(other.to_string()),
        }
    }
}

impl From<AlgebraError> for CliError {
    fn from(e: AlgebraError) -> Self {
        CliError::Numeric(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Numeric(format!("i/o: {e}"))
    }
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(name = "symfin", version, about = "Lie point symmetries and finite-difference checks for financial evolution equations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Catalog model id.
    #[arg(long, global = true)]
    pub model: Option<String>,
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Node and step counts, `NXxNYxNT` or `NXxNY`.
    #[arg(long, global = true)]
    pub grid: Option<String>,
    /// Acceptance tolerance of the command.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Check every catalog generator of a model.
    Verify,
    /// Commutator table and decomposition label of the finite algebra.
    Classify,
    /// Drift removal, invariant reduction and the closed-form solution.
    Reduce,
    /// Finite-difference solve of a canonical model.
    Solve,
    /// Oscillating-rate scenario: closed form vs finite differences and its frequency.
    Fig3,
    /// Ermakov–Pinney invariant suite.
    Ermakov,
    /// Integrate a determining system and check its residuals.
    Determining,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Verify => "verify",
            Command::Classify => "classify",
            Command::Reduce => "reduce",
            Command::Solve => "solve",
            Command::Fig3 => "fig3",
            Command::Ermakov => "ermakov",
            Command::Determining => "determining",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub x: Option<(f64, f64)>,
    pub y: Option<(f64, f64)>,
    pub nx: Option<usize>,
    pub ny: Option<usize>,
    pub t: Option<(f64, f64)>,
    pub nt: Option<usize>,
    pub direction: Option<Direction>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReduceConfig {
    pub c1: String,
    pub c2: String,
}

impl Default for ReduceConfig {
    fn default() -> Self {
        ReduceConfig { c1: "1/2".into(), c2: "1/4".into() }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveConfig {
    /// Data at the start of the march, in x and y.
    pub initial: Option<String>,
    /// Reference solution in t, x, y: used for Dirichlet data and the error report.
    pub exact: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ErmakovConfig {
    /// ω² as an expression in t.
    pub omega2: String,
    pub abc: [f64; 3],
    pub t_span: (f64, f64),
    pub x0: [f64; 2],
    pub pinney_tol: f64,
}

impl Default for ErmakovConfig {
    fn default() -> Self {
        ErmakovConfig {
            omega2: "1 + t/10".into(),
            abc: [1.0, 0.0, 1.0],
            t_span: (0.0, 50.0),
            x0: [1.0, 0.3],
            pinney_tol: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeterminingConfig {
    pub system: DeterminingSystem,
    /// P₁, P₂, P₃, Q₁, Q₂, Q₃ (two-factor) or P₁, Q₁, Q₂, Q₃ (Black-Scholes) in t.
    pub coefficients: Vec<String>,
    pub k: Option<String>,
    pub b2: Option<f64>,
    /// Initial state; defaults to the sum of an admissible basis.
    pub init: Option<Vec<f64>>,
    pub t_end: f64,
    pub samples: usize,
}

impl Default for DeterminingConfig {
    fn default() -> Self {
        DeterminingConfig {
            system: DeterminingSystem::TwoFactor,
            coefficients: ["0", "2", "0", "1", "1", "0"].map(String::from).to_vec(),
            k: None,
            b2: None,
            init: None,
            t_end: 2.0,
            samples: 41,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<String>,
    pub model: Option<String>,
    pub out: Option<PathBuf>,
    /// Parameter bindings as expression strings.
    pub params: BTreeMap<String, String>,
    /// TOML file of generators replacing the catalog ones.
    pub generators: Option<PathBuf>,
    /// Expected decomposition label for `classify`.
    pub expect: Option<String>,
    pub tol: Option<f64>,
    pub grid: GridConfig,
    pub reduce: ReduceConfig,
    pub solve: SolveConfig,
    pub fig3: Fig3Config,
    pub ermakov: ErmakovConfig,
    pub determining: DeterminingConfig,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Applies the command-line flags on top of the file.
    pub fn resolve(mut self, cli: &Cli) -> Result<RunConfig> {
        if let Some(c) = &self.command {
            if c != cli.command.name() {
                return Err(CliError::Config(format!(
                    "config is for `{c}` but `{}` was requested",
                    cli.command.name()
                )));
            }
        }
        self.command = Some(cli.command.name().to_string());
        if cli.model.is_some() {
            self.model = cli.model.clone();
        }
        if cli.out.is_some() {
            self.out = cli.out.clone();
        }
        if let Some(t) = cli.tol {
            self.tol = Some(t);
        }
        if let Some(t) = self.tol {
            if !(t.is_finite() && t > 0.0) {
                return Err(CliError::Config(format!("tolerance {t} must be positive")));
            }
        }
        if let Some(g) = &cli.grid {
            let parts: Vec<usize> = g
                .split('x')
                .map(|s| s.trim().parse::<usize>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| CliError::Config(format!("--grid `{g}`: expected NXxNY or NXxNYxNT")))?;
            match parts.as_slice() {
                [nx, ny] => {
                    self.grid.nx = Some(*nx);
                    self.grid.ny = Some(*ny);
                }
                [nx, ny, nt] => {
                    self.grid.nx = Some(*nx);
                    self.grid.ny = Some(*ny);
                    self.grid.nt = Some(*nt);
                }
                _ => return Err(CliError::Config(format!("--grid `{g}`: expected NXxNY or NXxNYxNT"))),
            }
        }
        Ok(self)
    }

    fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("symfin-out"))
    }

    fn model_or(&self, default: &str) -> String {
        let m = self.model.clone().unwrap_or_else(|| default.to_string());
        if m == "twofactor_autonomous" {
            "twofactor_canonical".into()
        } else {
            m
        }
    }

    fn tol_or(&self, default: f64) -> f64 {
        self.tol.unwrap_or(default)
    }
}

/// Outcome of one command: its JSON report, repairs applied and the verdict.
struct Outcome {
    report: Value,
    repairs: Vec<String>,
    failure: Option<String>,
}

impl Outcome {
    fn new(report: Value) -> Outcome {
        Outcome { report, repairs: vec![], failure: None }
    }
}

fn write_json(path: &Path, v: &Value) -> Result<()> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| CliError::Numeric(e.to_string()))?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

fn parse_q(text: &str, what: &str) -> Result<Q> {
    Params::symbolic("heat2d")?
        .table
        .parse(text)?
        .as_rational()
        .ok_or_else(|| CliError::Config(format!("{what} = `{text}` is not a rational constant")))
}

fn bind_all(p: &mut Params, bindings: &BTreeMap<String, String>) -> Result<()> {
    for (name, text) in bindings {
        p.bind(name, text)?;
    }
    Ok(())
}

/// Rational values used by `classify` for parameters the config leaves open.
fn classify_defaults(model: &str) -> &'static [(&'static str, &'static str)] {
    match model {
        "bs2d_canonical" => &[("phi1", "1"), ("phi2", "11/10"), ("k", "1/20")],
        "twofactor_canonical" => &[("p1", "0"), ("p2", "2"), ("p3", "1/3"), ("q1", "1"), ("q2", "1"), ("q3", "0")],
        "twofactor_q0" => &[("p1", "1/2"), ("p2", "1/3"), ("p3", "1/5")],
        _ => &[],
    }
}

/// Decomposition label the catalog records for the finite algebra of a model.
pub fn expected_label(model: &str) -> Option<&'static str> {
    match model {
        "heat2d" | "bs2d_canonical" | "bs2d_special_nonauto" => Some("{{sl(2,R)⊕ₛso(2)}⊕ₛW₅}"),
        "heat1d" => Some("{sl(2,R)⊕ₛW₃}"),
        "twofactor_canonical" | "twofactor_autonomous" | "twofactor_q0" => Some("{A₁⊕ₛW₅}"),
        _ => None,
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GeneratorFile {
    generator: Vec<GeneratorSpec>,
}

/// One generator ξᵗ∂t + ξˣ∂x + ξʸ∂y + φu∂u; `phi` is the multiplier of u.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GeneratorSpec {
    name: String,
    #[serde(default)]
    xt: Option<String>,
    #[serde(default)]
    xx: Option<String>,
    #[serde(default)]
    xy: Option<String>,
    #[serde(default)]
    phi: Option<String>,
}

fn load_generators(path: &Path, p: &Params) -> Result<Vec<VectorField>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let file: GeneratorFile = toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let parse = |s: &Option<String>| -> Result<Expr> {
        match s {
            Some(s) => Ok(p.table.parse(s)?),
            None => Ok(Expr::zero()),
        }
    };
    file.generator
        .iter()
        .map(|g| {
            Ok(VectorField::new(
                &g.name,
                parse(&g.xt)?,
                parse(&g.xx)?,
                parse(&g.xy)?,
                parse(&g.phi)? * crate::jet::u(),
            ))
        })
        .collect()
}

fn model_params(cfg: &RunConfig, model: &str) -> Result<Params> {
    let mut p = Params::symbolic(model)?;
    bind_all(&mut p, &cfg.params)?;
    Ok(p)
}

fn cmd_verify(cfg: &RunConfig) -> Result<Outcome> {
    let model = cfg.model_or("bs2d_canonical");
    let mut p = model_params(cfg, &model)?;
    let pde = catalog(&p)?;
    let (fields, repairs): (Vec<VectorField>, Vec<Option<&str>>) = match &cfg.generators {
        Some(path) => {
            let f = load_generators(path, &p)?;
            let n = f.len();
            (f, vec![None; n])
        }
        None => catalog_generators(&mut p)?.into_iter().map(|g| (g.field, g.repair)).unzip(),
    };
    let mut reports = Vec::new();
    let mut failed = Vec::new();
    let mut applied = Vec::new();
    for (x, rep) in fields.iter().zip(&repairs) {
        let mut r = check_symmetry(&pde, x)?;
        if let Some(note) = rep {
            r.repairs.push(note.to_string());
            applied.push(format!("{}: {note}", x.name));
        }
        if !r.verdict {
            failed.push(format!("{} residual {}", x.name, r.residual.as_ref().map(|e| e.to_string()).unwrap_or_default()));
        }
        println!("{:<6} {}", x.name, if r.verdict { "symmetry" } else { "NOT a symmetry" });
        reports.push(r.to_json());
    }
    let mut o = Outcome::new(json!({
        "model": model,
        "equation": pde.to_string(),
        "generators": reports,
        "verified": fields.len() - failed.len(),
        "total": fields.len(),
    }));
    o.repairs = applied;
    if !failed.is_empty() {
        for f in &failed {
            eprintln!("{f}");
        }
        o.failure = Some(format!("{} of {} generators fail", failed.len(), fields.len()));
    }
    Ok(o)
}

fn cmd_classify(cfg: &RunConfig) -> Result<Outcome> {
    let model = cfg.model_or("bs2d_canonical");
    let alias = cfg.model.clone().unwrap_or_else(|| model.clone());
    let mut p = if model == "bs2d_special_nonauto" {
        Params::time_dependent(&model)?
    } else {
        Params::symbolic(&model)?
    };
    for (name, text) in classify_defaults(&model) {
        if !cfg.params.contains_key(*name) {
            p.bind(name, text)?;
        }
    }
    bind_all(&mut p, &cfg.params)?;
    let mut repairs = Vec::new();
    let basis: Vec<VectorField> = match &cfg.generators {
        Some(path) => load_generators(path, &p)?,
        None => {
            let gens = catalog_generators(&mut p)?;
            repairs = gens
                .iter()
                .filter_map(|g| g.repair.map(|r| format!("{}: {r}", g.field.name)))
                .collect();
            let fields: Vec<VectorField> = gens.into_iter().map(|g| g.field).collect();
            if model == "bs2d_special_nonauto" {
                let rel = special_antiderivative_relations(&mut p)?;
                fields.iter().map(|f| f.subs(&rel)).collect::<std::result::Result<_, _>>()?
            } else {
                fields
            }
        }
    };
    let sc = structure_constants(&basis)?;
    let label = algebra::signature(&sc).label;
    println!("{}", algebra::table_text(&sc));
    println!("{label}");
    let expect = cfg
        .expect
        .clone()
        .or_else(|| if cfg.generators.is_none() { expected_label(&alias).map(String::from) } else { None });
    let mut o = Outcome::new(json!({
        "model": model,
        "table": algebra::table_json(&sc),
        "label": label,
        "expected": expect,
        "jacobi": sc.jacobi_holds(),
    }));
    o.repairs = repairs;
    match expect {
        Some(e) if e != label => o.failure = Some(format!("label {label} differs from the expected {e}")),
        None => o.failure = Some(format!("no expected label recorded for `{alias}`; set `expect`")),
        _ => {}
    }
    Ok(o)
}

fn cmd_reduce(cfg: &RunConfig) -> Result<Outcome> {
    let model = cfg.model_or("bs2d_special_nonauto");
    let mut p = Params::time_dependent(&model)?;
    bind_all(&mut p, &cfg.params)?;
    let pde = catalog(&p)?;
    let mut report = json!({ "model": model, "equation": pde.to_string() });
    let mut failure = None;
    if let Ok(tr) = to_heat(&pde) {
        report["to_heat"] = json!({
            "time_scale": tr.time_scale.to_string(),
            "old_coordinates": tr.old.iter().map(|(a, e)| json!([a.name(), e.to_string()])).collect::<Vec<_>>(),
            "multiplier": tr.multiplier.to_string(),
            "inverse": tr.inverse.as_ref().map(|v| v.iter().map(|e| e.to_string()).collect::<Vec<_>>()),
        });
    }
    match invariant_solution(&pde, &parse_q(&cfg.reduce.c1, "c1")?, &parse_q(&cfg.reduce.c2, "c2")?) {
        Ok(sol) => {
            let ok = sol.satisfies(&pde)?;
            report["closed_form"] = sol.to_json();
            report["closed_form_satisfies_equation"] = json!(ok);
            if !ok {
                failure = Some("closed form does not satisfy the equation".to_string());
            }
            let u = crate::jet::u();
            let x1 = VectorField::translation(1).add(&VectorField::new("", Expr::zero(), Expr::zero(), Expr::zero(), u.scale(&sol.c1)));
            let once = reduce_once(&pde, &x1)?;
            let maximal = is_maximally_symmetric_1p1(&once)?;
            let twice = reduce_once(&once, &translation_with_scaling(2, &sol.c2))?;
            let (rate, _) = solve_reduced_ode(&twice)?;
            let agrees = (&rate - &sol.integrand).is_zero();
            report["reductions"] = json!({
                "first": once.to_string(),
                "first_maximally_symmetric": maximal,
                "second": twice.to_string(),
                "rate": rate.to_string(),
                "rate_matches_closed_form": agrees,
            });
            if !(maximal && agrees) {
                failure = Some("reduction chain does not reproduce the closed form".to_string());
            }
        }
        Err(e) if report.get("to_heat").is_none() => {
            return Err(CliError::Config(format!("`{model}` has neither a heat transformation nor an invariant solution: {e}")))
        }
        Err(_) => {}
    }
    for (k, v) in report.as_object().into_iter().flatten() {
        if k != "closed_form" && k != "to_heat" && k != "reductions" {
            println!("{k}: {v}");
        }
    }
    if let Some(w) = report.pointer("/closed_form/w_expression") {
        println!("w: {}", w.as_str().unwrap_or_default());
    }
    Ok(Outcome { report, repairs: vec![], failure })
}

fn grid_from(cfg: &GridConfig) -> Result<Grid> {
    Ok(Grid::new(
        cfg.x.unwrap_or((-2.0, 2.0)),
        cfg.y.unwrap_or((-2.0, 2.0)),
        cfg.nx.unwrap_or(101),
        cfg.ny.unwrap_or(101),
        cfg.t.unwrap_or((0.0, 1.0)),
        cfg.nt.unwrap_or(400),
        cfg.direction.unwrap_or(Direction::Forward),
    )?)
}

/// Compiles an expression in (t, x, y) into a callable.
fn compiled_txy(e: &Expr, env: &NumericEnv) -> Result<impl Fn(f64, f64, f64) -> f64 + Sync> {
    let mut env = env.clone();
    env.resolve_antiderivatives(e)?;
    let slots = env.slots(&[e], &["t", "x", "y"])?;
    let c = slots.compile(e)?;
    Ok(move |t: f64, x: f64, y: f64| {
        let mut v = slots.values(t);
        v[1] = x;
        v[2] = y;
        c.eval(&v)
    })
}

fn cmd_solve(cfg: &RunConfig, exec: Exec) -> Result<Outcome> {
    let model = cfg.model_or("heat2d");
    let p = model_params(cfg, &model)?;
    let pde: EvolutionPDE = catalog(&p)?;
    let grid = grid_from(&cfg.grid)?;
    let env = NumericEnv::new();
    let start = match grid.direction {
        Direction::Forward => grid.t.0,
        Direction::Backward => grid.t.1,
    };
    let exact_expr = cfg.solve.exact.as_ref().map(|s| p.table.parse(s)).transpose()?;
    let exact = exact_expr.as_ref().map(|e| compiled_txy(e, &env)).transpose()?;
    let initial_expr = match (&cfg.solve.initial, &exact_expr) {
        (Some(s), _) => p.table.parse(s)?,
        (None, Some(_)) => Expr::zero(),
        (None, None) => return Err(CliError::Config("solve needs `solve.initial` or `solve.exact`".into())),
    };
    let initial_fn = compiled_txy(&initial_expr, &env)?;
    let initial = |x: f64, y: f64| match (&cfg.solve.initial, &exact) {
        (None, Some(f)) => f(start, x, y),
        _ => initial_fn(start, x, y),
    };
    let boundary = match &exact {
        Some(f) => Boundary::Dirichlet(f),
        None => Boundary::Linear,
    };
    let field = solve_fd(&pde, &env, &grid, &FdData { initial: &initial, boundary }, exec)?;
    let out = cfg.out_dir();
    let mid = (grid.ny - 1) / 2;
    field.write_csv(BufWriter::new(fs::File::create(out.join("solve.csv"))?), Some(mid))?;
    let mut report = json!({
        "model": model,
        "equation": pde.to_string(),
        "grid": grid,
        "csv": "solve.csv",
        "csv_slice_y": grid.ys(mid),
    });
    let mut failure = None;
    if let Some(e) = &exact_expr {
        let reference = expr_field(e, &env, &grid, ["x", "y"], Provenance::ClosedForm)?;
        let err = numeric::max_rel_error(&field.values, &reference.values);
        let tol = cfg.tol_or(1e-3);
        report["max_rel_error"] = json!(err);
        report["tolerance"] = json!(tol);
        println!("max rel error {err:.3e} (tolerance {tol:.1e})");
        if err > tol {
            failure = Some(format!("error {err:.3e} above {tol:.1e}"));
        }
    }
    let residual = numeric::discrete_residual(&field, &pde, &env)?;
    report["discrete_residual"] = json!(residual);
    println!("discrete residual {residual:.3e}");
    Ok(Outcome { report, repairs: vec![], failure })
}

fn cmd_fig3(cfg: &RunConfig, exec: Exec) -> Result<Outcome> {
    let mut f = cfg.fig3.clone();
    let g = &cfg.grid;
    if let Some(x) = g.x {
        f.x = x;
    }
    if let Some(y) = g.y {
        f.y = y;
    }
    if let Some(n) = g.nx {
        f.nx = n;
    }
    if let Some(n) = g.ny {
        f.ny = n;
    }
    if let Some(n) = g.nt {
        f.nt = n;
    }
    if let Some((t0, t1)) = g.t {
        if t0 != 0.0 {
            return Err(CliError::Config("fig3 runs on [0, T]".into()));
        }
        f.t_end = t1;
    }
    let r = fig3_scenario(&f, exec)?;
    let out = cfg.out_dir();
    r.fd.write_csv(BufWriter::new(fs::File::create(out.join("fig3.csv"))?), Some(r.probe.1))?;
    let tol = cfg.tol_or(1e-3);
    let freq = r.frequency.map_or_else(|| "none".to_string(), |w| format!("{w:.6}"));
    println!("frequency {freq} (omega {:.6}, bin {:.6})", f.omega, r.bin_width);
    println!("max rel error {:.3e} (tolerance {tol:.1e})", r.max_rel_error);
    let mut failure = None;
    if r.max_rel_error > tol {
        failure = Some(format!("FD vs closed form {:.3e} above {tol:.1e}", r.max_rel_error));
    } else if f.eps != 0.0 {
        match r.frequency {
            Some(w) if (w - f.omega).abs() <= r.bin_width => {}
            _ => failure = Some(format!("detected frequency {freq} is not within one bin of {}", f.omega)),
        }
    } else if r.frequency.is_some() {
        failure = Some(format!("flat rate but frequency {freq} detected"));
    }
    let report = json!({
        "config": f,
        "closed_form": r.solution.to_json(),
        "max_rel_error": r.max_rel_error,
        "tolerance": tol,
        "frequency": r.frequency,
        "frequency_report": freq,
        "peak_amplitude": r.peak_amplitude,
        "bin_width": r.bin_width,
        "probe": { "x": r.fd.grid.xs(r.probe.0), "y": r.fd.grid.ys(r.probe.1) },
        "csv": "fig3.csv",
    });
    Ok(Outcome { report, repairs: vec![], failure })
}

fn cmd_ermakov(cfg: &RunConfig) -> Result<Outcome> {
    let e = &cfg.ermakov;
    let w2 = Params::symbolic("heat1d")?.table.parse(&e.omega2)?;
    let env = NumericEnv::new();
    let slots = env.slots(&[&w2], &["t"])?;
    let c = slots.compile(&w2)?;
    let omega = |t: f64| c.eval(&slots.values(t)).max(0.0).sqrt();
    let rep = ermakov_suite(omega, e.abc, e.t_span, e.x0)?;
    let tol = cfg.tol_or(1e-6);
    println!(
        "invariant drift {:.3e}, pinney residual {:.3e}, wronskian drift {:.3e}",
        rep.invariant_drift, rep.pinney_residual, rep.wronskian_drift
    );
    let failure = if rep.invariant_drift > tol {
        Some(format!("invariant drift {:.3e} above {tol:.1e}", rep.invariant_drift))
    } else if rep.pinney_residual > e.pinney_tol {
        Some(format!("Pinney residual {:.3e} above {:.1e}", rep.pinney_residual, e.pinney_tol))
    } else if !rep.time_increasing {
        Some("canonical time is not increasing".into())
    } else {
        None
    };
    let report = json!({ "config": e, "tolerance": tol, "report": rep });
    Ok(Outcome { report, repairs: vec![], failure })
}

fn cmd_determining(cfg: &RunConfig) -> Result<Outcome> {
    let d = &cfg.determining;
    let table = Params::symbolic("heat1d")?.table;
    let coeffs: Vec<Expr> = d.coefficients.iter().map(|s| table.parse(s)).collect::<std::result::Result<_, _>>()?;
    let k = d.k.as_ref().map(|s| table.parse(s)).transpose()?;
    if d.samples < 2 || !(d.t_end > 0.0) {
        return Err(CliError::Config("determining needs t_end > 0 and at least two samples".into()));
    }
    let times: Vec<f64> = (0..d.samples).map(|i| d.t_end * i as f64 / (d.samples - 1) as f64).collect();
    let basis = admissible_initial_data(d.system, &coeffs, k.as_ref(), d.t_end)?;
    let (init, b2) = match &d.init {
        Some(v) => (v.clone(), d.b2.unwrap_or(0.0)),
        None => {
            let mut v = vec![0.0; 9];
            for b in &basis {
                for (a, c) in v.iter_mut().zip(b) {
                    *a += c;
                }
            }
            let b2 = d.b2.unwrap_or(v[8]);
            v.truncate(8);
            (v, b2)
        }
    };
    let run = integrate_determining_system(d.system, &coeffs, k.as_ref(), b2, &init, &times)?;
    let dim = solution_dimension(d.system, &coeffs, k.as_ref(), d.t_end)?;
    let tol = cfg.tol_or(1e-7);
    for (name, r) in &run.residuals {
        println!("{name:<6} {r:.3e}");
    }
    println!("admissible initial data: {dim} dimensions");
    let failure = (run.max_residual > tol).then(|| format!("max residual {:.3e} above {tol:.1e}", run.max_residual));
    let report = json!({
        "config": d,
        "tolerance": tol,
        "solution_dimension": dim,
        "run": run,
    });
    Ok(Outcome { report, repairs: vec![], failure })
}

fn exec_from_env() -> Result<Exec> {
    match std::env::var("SYMFIN_THREADS") {
        Ok(s) => {
            let n: usize = s
                .trim()
                .parse()
                .map_err(|_| CliError::Config(format!("SYMFIN_THREADS=`{s}` is not a count")))?;
            if n <= 1 {
                return Ok(Exec::Sequential);
            }
            #[cfg(feature = "parallel")]
            {
                // a pool may already exist when embedded; that one is kept
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            Ok(Exec::Parallel)
        }
        Err(_) => Ok(Exec::Parallel),
    }
}

fn run_command(cli: &Cli) -> (RunConfig, Result<Outcome>) {
    let cfg = match &cli.config {
        Some(path) => RunConfig::load(path),
        None => Ok(RunConfig::default()),
    }
    .and_then(|c| c.resolve(cli));
    let cfg = match cfg {
        Ok(c) => c,
        Err(e) => return (RunConfig::default(), Err(e)),
    };
    let outcome = (|| {
        let exec = exec_from_env()?;
        fs::create_dir_all(cfg.out_dir())?;
        match cli.command {
            Command::Verify => cmd_verify(&cfg),
            Command::Classify => cmd_classify(&cfg),
            Command::Reduce => cmd_reduce(&cfg),
            Command::Solve => cmd_solve(&cfg, exec),
            Command::Fig3 => cmd_fig3(&cfg, exec),
            Command::Ermakov => cmd_ermakov(&cfg),
            Command::Determining => cmd_determining(&cfg),
        }
    })();
    (cfg, outcome)
}

/// Runs one command and returns its exit code.
pub fn run(cli: &Cli) -> u8 {
    let (cfg, outcome) = run_command(cli);
    let (code, report, repairs, message) = match outcome {
        Ok(o) => {
            let code = if o.failure.is_some() { EXIT_THRESHOLD } else { EXIT_OK };
            (code, Some(o.report), o.repairs, o.failure)
        }
        Err(e) => (e.code(), None, vec![], Some(e.to_string())),
    };
    if let Some(m) = &message {
        eprintln!("symfin {}: {m}", cli.command.name());
    }
    let out = cfg.out_dir();
    if code == EXIT_CONFIG && !out.exists() {
        return code;
    }
    let name = cli.command.name();
    let mut written = Ok(());
    if let Some(r) = &report {
        written = write_json(&out.join(format!("{name}.json")), r);
    }
    let manifest = json!({
        "tool": "symfin",
        "version": env!("CARGO_PKG_VERSION"),
        "command": name,
        "config": cfg,
        "repairs": repairs,
        "exit_code": code,
        "message": message,
    });
    written = written.and(write_json(&out.join("run-manifest.json"), &manifest));
    match written {
        Ok(()) => code,
        Err(e) => {
            eprintln!("symfin {name}: {e}");
            code.max(EXIT_NUMERIC)
        }
    }
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = run(&cli);
    let _ = std::io::stdout().flush();
    ExitCode::from(code)
}
