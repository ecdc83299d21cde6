//! Command-line driver: `verify`, `flow`, `reduce` and `orbit`.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::Error;
use crate::flowkn::{h_monotonicity_check, integrate_generator_flow, FlowExit, DEFAULT_DESCENT_TOL, DEFAULT_MAX_STEPS};
use crate::hamilton::{strong_hamiltonian_test, HamiltonianModel, PointwiseModel};
use crate::models::{build_model, BuiltModel, ModelSpec, MODEL_NAMES};
use crate::orbit::{orbit_kahler_check, OrbitChart, DEFAULT_BOX, DEFAULT_DT};
use crate::reduction::{
    carrier_identity_check, ghs_check, level_set_points, reduced_pair, type_formula_check, CarrierIdentity, LEVEL_TOL,
    REDUCED_TOL,
};
use crate::verify::{run_verify, Tolerances, SCHEMA_VERSION};

pub const EXIT_PASS: u8 = 0;
pub const EXIT_CHECK_FAILED: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_CONSTRUCTION: u8 = 3;
pub const EXIT_DESCENT: u8 = 4;
pub const EXIT_NOT_STRONG: u8 = 5;

const STRONG_TOL: f64 = 1e-9;
const GHS_TOL: f64 = 1e-6;

#[derive(Parser, Debug)]
#[command(name = "gkred", version, about = "Hamiltonian actions and reduction of generalized Kähler structures")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run the invariant battery on sampled points.
    Verify(Common),
    /// Integrate the flow of `Y_u` and write a CSV trajectory.
    Flow(FlowArgs),
    /// Reduce at descent-found points of the zero level set.
    Reduce(Common),
    /// Check the Kähler structure on a complexified orbit.
    Orbit(OrbitArgs),
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    #[arg(long)]
    pub model: String,
    /// Model parameter, `key=value`.
    #[arg(long = "param", value_parser = parse_pair)]
    pub params: Vec<(String, f64)>,
    #[arg(long, default_value_t = 20)]
    pub points: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Tolerance override, `name=value`.
    #[arg(long = "tol", value_parser = parse_pair)]
    pub tols: Vec<(String, f64)>,
    /// Output file; stdout if absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct FlowArgs {
    #[command(flatten)]
    pub common: Common,
    /// Generator index, or comma-separated coefficients `u₁,..,u_d`.
    #[arg(long, default_value = "0")]
    pub generator: String,
    /// Start point; the first seeded sample if absent.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub start: Option<Vec<f64>>,
    #[arg(long = "T", default_value_t = 1.0)]
    pub t_final: f64,
    #[arg(long, default_value_t = 1e-2)]
    pub dt: f64,
}

#[derive(Args, Debug, Clone)]
pub struct OrbitArgs {
    #[command(flatten)]
    pub common: Common,
    /// Base point; a descent-found level-set point if absent.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub start: Option<Vec<f64>>,
    /// Half-width of the parameter box.
    #[arg(long = "box", default_value_t = DEFAULT_BOX)]
    pub half_width: f64,
    #[arg(long, default_value_t = DEFAULT_DT)]
    pub dt: f64,
}

fn parse_pair(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected name=value, got `{s}`"))?;
    let v: f64 = v.trim().parse().map_err(|e| format!("bad value in `{s}`: {e}"))?;
    Ok((k.trim().to_string(), v))
}

/// A failed command: exit code and message for stderr.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Failure { code, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::UnknownModel(_) | Error::Input(_) => EXIT_USAGE,
            _ => EXIT_CONSTRUCTION,
        };
        Failure::new(code, e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::new(EXIT_CONSTRUCTION, format!("i/o error: {e}"))
    }
}

/// JSON formatter writing every float with 17 significant digits.
struct Digits17;

impl serde_json::ser::Formatter for Digits17 {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        write!(w, "{v:.16e}")
    }
    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, v: f32) -> io::Result<()> {
        self.write_f64(w, f64::from(v))
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Digits17);
    value.serialize(&mut ser).expect("reports serialize");
    buf.push(b'\n');
    String::from_utf8(buf).expect("serde_json writes UTF-8")
}

fn open_out(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn emit<T: Serialize>(out: Option<&Path>, value: &T) -> Result<(), Failure> {
    let mut w = open_out(out)?;
    w.write_all(to_json(value).as_bytes())?;
    w.flush()?;
    Ok(())
}

fn model_spec(c: &Common) -> Result<ModelSpec, Failure> {
    if !MODEL_NAMES.contains(&c.model.as_str()) {
        return Err(Failure::new(
            EXIT_USAGE,
            format!("unknown model `{}`; available: {}", c.model, MODEL_NAMES.join(", ")),
        ));
    }
    let mut spec = ModelSpec::new(c.model.clone());
    spec.seed = c.seed;
    for (k, v) in &c.params {
        spec = spec.param(k, *v);
    }
    Ok(spec)
}

fn build(c: &Common) -> Result<BuiltModel, Failure> {
    build_model(&model_spec(c)?).map_err(|e| match e {
        Error::Input(_) | Error::UnknownModel(_) => Failure::from(e),
        e => Failure::new(EXIT_CONSTRUCTION, e.to_string()),
    })
}

fn field_model<'a>(m: &'a BuiltModel, command: &str) -> Result<&'a HamiltonianModel, Failure> {
    m.as_field().ok_or_else(|| {
        Failure::new(
            EXIT_USAGE,
            format!("model `{}` is pointwise only; `{command}` needs a model with differentiable fields", m.pointwise().name()),
        )
    })
}

fn status(pass: bool) -> u8 {
    if pass {
        EXIT_PASS
    } else {
        EXIT_CHECK_FAILED
    }
}

fn cmd_verify(c: &Common) -> Result<u8, Failure> {
    let model = build(c)?;
    let mut tol = Tolerances::for_model(&model);
    for (k, v) in &c.tols {
        tol.set(k, *v)?;
    }
    let report = run_verify(&model, c.points, c.seed, &tol)?;
    emit(c.out.as_deref(), &report)?;
    Ok(status(report.pass))
}

#[derive(Serialize)]
struct FlowFooter {
    schema: u32,
    model: String,
    coefficients: Vec<f64>,
    steps: usize,
    rejected_steps: usize,
    exit: FlowExit,
    truncated: bool,
    h_derivative_residual: f64,
    h_pointwise_residual: f64,
    integral_residual: f64,
    h_non_increasing: bool,
}

fn coefficients(spec: &str, d: usize) -> Result<Vec<f64>, Failure> {
    let usage = |m: String| Failure::new(EXIT_USAGE, m);
    if !spec.contains(',') {
        if let Ok(a) = spec.trim().parse::<usize>() {
            if a >= d {
                return Err(usage(format!("generator index {a} out of range for a {d}-dimensional algebra")));
            }
            let mut u = vec![0.0; d];
            u[a] = 1.0;
            return Ok(u);
        }
    }
    let u: Vec<f64> = spec
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| usage(format!("bad generator `{spec}`: {e}")))?;
    if u.len() != d {
        return Err(usage(format!("generator needs {d} coefficients, got {}", u.len())));
    }
    Ok(u)
}

fn cmd_flow(a: &FlowArgs) -> Result<u8, Failure> {
    let built = build(&a.common)?;
    let m = field_model(&built, "flow")?;
    let u = coefficients(&a.generator, m.lie().dim)?;
    let start = match &a.start {
        Some(s) => s.clone(),
        None => m
            .sample(1, a.common.seed)
            .pop()
            .ok_or_else(|| Failure::new(EXIT_CONSTRUCTION, "sampler produced no start point"))?,
    };
    if start.len() != m.n() {
        return Err(Failure::new(EXIT_USAGE, format!("start needs {} coordinates, got {}", m.n(), start.len())));
    }
    let tr = integrate_generator_flow(m, &u, &start, a.t_final, a.dt)?;
    let mono = h_monotonicity_check(&tr, m, &u)?;
    let mut w = open_out(a.common.out.as_deref())?;
    tr.write_csv(&mut w)?;
    w.flush()?;
    let footer = FlowFooter {
        schema: SCHEMA_VERSION,
        model: m.name.clone(),
        coefficients: u,
        steps: tr.len(),
        rejected_steps: tr.rejected_steps,
        exit: tr.exit,
        truncated: !matches!(tr.exit, FlowExit::Completed | FlowExit::FixedPoint),
        h_derivative_residual: mono.max_discrepancy,
        h_pointwise_residual: mono.max_pointwise,
        integral_residual: mono.integral_residual,
        h_non_increasing: mono.non_increasing,
    };
    match &a.common.out {
        Some(p) => {
            let mut name = p.as_os_str().to_owned();
            name.push(".footer.json");
            emit(Some(Path::new(&name)), &footer)?;
        }
        None => eprint!("{}", to_json(&footer)),
    }
    Ok(EXIT_PASS)
}

#[derive(Serialize)]
struct ReductionRecord {
    structure: crate::reduction::ReducedStructure,
    type_formula: crate::reduction::TypeFormula,
    carrier_identity: CarrierIdentity,
    ghs: crate::reduction::GhsReport,
    pass: bool,
}

#[derive(Serialize)]
struct ReduceReport {
    schema: u32,
    model: String,
    seed: u64,
    requested: usize,
    found: usize,
    records: Vec<ReductionRecord>,
    pass: bool,
}

fn reduce_at(m: &HamiltonianModel, x: &[f64]) -> crate::error::Result<ReductionRecord> {
    let structure = reduced_pair(m, x)?;
    let type_formula = type_formula_check(m, x)?;
    let carrier_identity = carrier_identity_check(m, x, LEVEL_TOL)?;
    let ghs = ghs_check(m, x, GHS_TOL)?;
    let carrier_ok = matches!(carrier_identity, CarrierIdentity::Checked { pass: true, .. });
    let pass = structure.residuals.pass(REDUCED_TOL) && type_formula.holds() && carrier_ok && ghs.pass;
    Ok(ReductionRecord { structure, type_formula, carrier_identity, ghs, pass })
}

fn cmd_reduce(c: &Common) -> Result<u8, Failure> {
    let built = build(c)?;
    let m = field_model(&built, "reduce")?;
    let strong = strong_hamiltonian_test(m, &m.sample(c.points.max(1), c.seed), STRONG_TOL)?;
    if !strong.pass {
        return Err(Failure::new(
            EXIT_NOT_STRONG,
            format!("model `{}` is not strong Hamiltonian: |S| = {:e} at {:?}", m.name, strong.max_s_pairing, strong.witness),
        ));
    }
    let pts = level_set_points(m, c.points, c.seed, DEFAULT_DESCENT_TOL, DEFAULT_MAX_STEPS);
    if pts.is_empty() {
        return Err(Failure::new(EXIT_DESCENT, format!("descent found no level-set point for `{}`", m.name)));
    }
    let records: Vec<ReductionRecord> =
        pts.par_iter().map(|x| reduce_at(m, x)).collect::<crate::error::Result<_>>()?;
    let pass = records.len() == c.points && records.iter().all(|r| r.pass);
    let report = ReduceReport {
        schema: SCHEMA_VERSION,
        model: m.name.clone(),
        seed: c.seed,
        requested: c.points,
        found: records.len(),
        records,
        pass,
    };
    emit(c.out.as_deref(), &report)?;
    Ok(status(pass))
}

#[derive(Serialize)]
struct OrbitReport {
    schema: u32,
    model: String,
    seed: u64,
    base_point: Vec<f64>,
    half_width: f64,
    records: Vec<crate::orbit::OrbitKahlerReport>,
    pass: bool,
}

fn cmd_orbit(a: &OrbitArgs) -> Result<u8, Failure> {
    let c = &a.common;
    let built = build(c)?;
    let m = field_model(&built, "orbit")?;
    let base = match &a.start {
        Some(s) => s.clone(),
        None => level_set_points(m, 1, c.seed, DEFAULT_DESCENT_TOL, DEFAULT_MAX_STEPS)
            .pop()
            .ok_or_else(|| Failure::new(EXIT_DESCENT, format!("descent found no base point for `{}`", m.name)))?,
    };
    let mut oc = OrbitChart::new(m, base)?;
    oc.half_width = a.half_width;
    oc.dt = a.dt;
    let params = oc.sample_parameters(c.points, c.seed);
    let records: Vec<_> =
        params.par_iter().map(|p| orbit_kahler_check(&oc, p)).collect::<crate::error::Result<_>>()?;
    let pass = records.iter().all(|r| r.pass());
    let report = OrbitReport {
        schema: SCHEMA_VERSION,
        model: m.name.clone(),
        seed: c.seed,
        base_point: oc.base_point.clone(),
        half_width: oc.half_width,
        records,
        pass,
    };
    emit(c.out.as_deref(), &report)?;
    Ok(status(pass))
}

/// Runs a parsed command; errors carry their exit code.
pub fn execute(cli: &Cli) -> Result<u8, Failure> {
    match &cli.command {
        Command::Verify(c) => cmd_verify(c),
        Command::Flow(a) => cmd_flow(a),
        Command::Reduce(c) => cmd_reduce(c),
        Command::Orbit(a) => cmd_orbit(a),
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS });
        }
    };
    match execute(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("gkred: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
