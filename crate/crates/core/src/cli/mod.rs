//! The `polynorm` command line.

mod io;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use crate::approx::{self, FitOptions, TargetNorm};
use crate::certify::{self, CertifyOptions, Outcome};
use crate::conic::SolverOptions;
use crate::error::{Error, Result};
use crate::jsr::{self, JsrOptions};
use crate::sos::{self, Verdict};

pub const EXIT_OK: i32 = 0;
pub const EXIT_REFUTED: i32 = 2;
pub const EXIT_NOT_CERTIFIED: i32 = 3;
pub const EXIT_SOLVER: i32 = 4;
pub const EXIT_USAGE: i32 = 64;

/// Smallest tolerance accepted on the command line.
const MIN_TOL: f64 = 1e-12;

#[derive(Parser, Debug)]
#[command(name = "polynorm", version, about = "Polynomial norms: SOS certificates, approximation and JSR bounds")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Seed for every random choice in the run.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Interior-point stopping tolerance (at least 1e-12).
    #[arg(long = "solver-tol", global = true)]
    pub solver_tol: Option<f64>,
    /// Interior-point iteration cap.
    #[arg(long = "max-iters", global = true)]
    pub max_iters: Option<usize>,
    /// Write the JSON report here instead of standard output.
    #[arg(long, global = true)]
    pub report: Option<PathBuf>,
    /// Print progress to standard error.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Decide whether a form is (r-)SOS or (r-)sos-convex.
    Sos(SosArgs),
    /// Certify that f^{1/d} is a norm.
    Certify(CertifyArgs),
    /// Moment-form approximation of a norm.
    Approximate(ApproximateArgs),
    /// Least-squares fit of an sos-convex form to sampled norm values.
    Fit(FitArgs),
    /// Joint spectral radius certificates and bounds.
    Jsr(JsrArgs),
}

#[derive(Args, Debug)]
pub struct SosArgs {
    #[arg(long)]
    pub form: PathBuf,
    /// Multiply by (Σx²)^r before testing.
    #[arg(long, default_value_t = 0)]
    pub r: u32,
    /// Test sos-convexity instead of nonnegativity.
    #[arg(long)]
    pub convex: bool,
    #[arg(long = "emit-cert")]
    pub emit_cert: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CertifyArgs {
    #[arg(long)]
    pub form: PathBuf,
    #[arg(long = "r-max", default_value_t = 3)]
    pub r_max: u32,
    #[arg(long = "deg-q", default_value_t = 0)]
    pub deg_q: u32,
    /// Certify a positive definite Hessian instead.
    #[arg(long)]
    pub hessian: bool,
    /// Sampling oracle size.
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    #[arg(long = "emit-cert")]
    pub emit_cert: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ApproximateArgs {
    /// `p:<p>` (p ≥ 1 or `inf`) or `polytope:<vertices.json>`.
    #[arg(long)]
    pub target: String,
    #[arg(long)]
    pub degree: u32,
    /// Dimension for p-norm targets.
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    #[arg(long = "emit-levelset")]
    pub emit_levelset: Option<PathBuf>,
    #[arg(long = "emit-form")]
    pub emit_form: Option<PathBuf>,
    #[arg(long, default_value_t = 256)]
    pub resolution: usize,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    /// CSV of points with the target norm value in the last column.
    #[arg(long)]
    pub samples: PathBuf,
    #[arg(long)]
    pub degree: u32,
    /// Hold out 20% of the samples (split by seed) and report errors on them.
    #[arg(long)]
    pub holdout: bool,
    #[arg(long = "no-polish")]
    pub no_polish: bool,
    #[arg(long = "emit-levelset")]
    pub emit_levelset: Option<PathBuf>,
    #[arg(long = "emit-form")]
    pub emit_form: Option<PathBuf>,
    #[arg(long, default_value_t = 256)]
    pub resolution: usize,
}

#[derive(Args, Debug)]
pub struct JsrArgs {
    #[arg(long)]
    pub matrices: PathBuf,
    #[arg(long, value_delimiter = ',', default_values_t = jsr::DEFAULT_DEGREES)]
    pub degrees: Vec<u32>,
    /// Use r-sos-convexity in the norm condition.
    #[arg(long, default_value_t = 0)]
    pub r: u32,
    /// Longest product enumerated for the lower bound.
    #[arg(long = "lower-depth", default_value_t = 4)]
    pub lower_depth: usize,
    /// Bisect for an upper bound at the last degree.
    #[arg(long = "upper-bound")]
    pub upper_bound: bool,
    #[arg(long, default_value_t = 1e-3)]
    pub tol: f64,
    #[arg(long = "emit-figure")]
    pub emit_figure: Option<PathBuf>,
    #[arg(long, default_value_t = 256)]
    pub resolution: usize,
    #[arg(long = "emit-cert")]
    pub emit_cert: Option<PathBuf>,
}

impl Common {
    pub fn solver(&self) -> Result<SolverOptions> {
        let mut opts = SolverOptions::default();
        if let Some(t) = self.solver_tol {
            if !(t >= MIN_TOL) {
                return Err(Error::InvalidInput(format!(
                    "--solver-tol must be at least {MIN_TOL:e}, got {t}"
                )));
            }
            opts.tol = t;
        }
        if let Some(m) = self.max_iters {
            opts.max_iters = m;
        }
        Ok(opts)
    }
}

/// Exit code for a library error: input problems are usage errors, the
/// rest is solver trouble.
pub fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::Solver(_) | Error::NoConvergence | Error::Quadrature(_) => EXIT_SOLVER,
        _ => EXIT_USAGE,
    }
}

/// Parses `args`, runs the subcommand and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("polynorm: {e}");
        return EXIT_USAGE;
    }
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("polynorm: {e}");
            exit_code_for(&e)
        }
    }
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("POLYNORM_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| Error::InvalidInput(format!("POLYNORM_THREADS must be a count, got {v:?}")))?;
    // A pool that is already built (repeated runs in one process) is kept.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Runs the parsed command and writes its report.
pub fn execute(cli: &Cli) -> Result<i32> {
    let start = Instant::now();
    let (code, mut report) = match &cli.command {
        Command::Sos(a) => run_sos(a, &cli.common)?,
        Command::Certify(a) => run_certify(a, &cli.common)?,
        Command::Approximate(a) => run_approximate(a, &cli.common)?,
        Command::Fit(a) => run_fit(a, &cli.common)?,
        Command::Jsr(a) => run_jsr(a, &cli.common)?,
    };
    report["exit_code"] = json!(code);
    report["seed"] = json!(cli.common.seed);
    report["timings"] = json!({ "seconds": start.elapsed().as_secs_f64() });
    let text = serde_json::to_string_pretty(&report)? + "\n";
    match &cli.common.report {
        Some(p) => io::write_text(p, &text)?,
        None => print!("{text}"),
    }
    Ok(code)
}

fn note(common: &Common, msg: impl AsRef<str>) {
    if common.verbose > 0 {
        eprintln!("{}", msg.as_ref());
    }
}

fn emit_json(path: &Option<PathBuf>, value: &impl serde::Serialize) -> Result<Value> {
    match path {
        Some(p) => {
            io::write_text(p, &(serde_json::to_string_pretty(value)? + "\n"))?;
            Ok(json!(p))
        }
        None => Ok(Value::Null),
    }
}

fn run_sos(a: &SosArgs, common: &Common) -> Result<(i32, Value)> {
    let f = io::read_form(&a.form)?;
    let opts = common.solver()?;
    let out = if a.convex {
        sos::is_r_sos_convex_with(&f, a.r, &opts)?
    } else {
        sos::is_r_sos_with(&f, a.r, &opts)?
    };
    let kind = if a.convex { "sos-convex" } else { "SOS" };
    let summary = match out.verdict {
        Verdict::Sos => format!("{kind} with multiplier r={}", a.r),
        Verdict::NotSos => format!("not {kind} with multiplier r={}", a.r),
        Verdict::Undecided => format!("undecided at multiplier r={}", a.r),
    };
    note(common, &summary);
    let code = match out.verdict {
        Verdict::Sos => EXIT_OK,
        Verdict::NotSos => EXIT_REFUTED,
        Verdict::Undecided => EXIT_SOLVER,
    };
    let cert_path = match (&out.certificate, out.verdict) {
        (Some(c), Verdict::Sos) => emit_json(&a.emit_cert, c)?,
        _ => Value::Null,
    };
    Ok((
        code,
        json!({
            "command": "sos",
            "form": a.form,
            "r": a.r,
            "convex": a.convex,
            "verdict": out.verdict,
            "summary": summary,
            "margin": finite_or_null(out.margin),
            "solver_status": out.solver_status,
            "iterations": out.iterations,
            "certificate_path": cert_path,
            "diagnostics": out.diagnostics,
        }),
    ))
}

fn finite_or_null(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        Value::Null
    }
}

fn certify_code<C>(rep: &certify::Report<C>) -> i32 {
    match &rep.outcome {
        Outcome::Certified(_) => EXIT_OK,
        Outcome::Refuted(_) => EXIT_REFUTED,
        Outcome::NotCertified if rep.solver_trouble => EXIT_SOLVER,
        Outcome::NotCertified => EXIT_NOT_CERTIFIED,
    }
}

fn run_certify(a: &CertifyArgs, common: &Common) -> Result<(i32, Value)> {
    let f = io::read_form(&a.form)?;
    let opts = CertifyOptions {
        r_max: a.r_max,
        deg_q: a.deg_q,
        samples: a.samples,
        seed: common.seed,
        solver: common.solver()?,
    };
    let (code, mut report) = if a.hessian {
        let rep = certify::certify_pd_hessian(&f, &opts)?;
        let path = match &rep.outcome {
            Outcome::Certified(c) => emit_json(&a.emit_cert, c)?,
            _ => Value::Null,
        };
        let mut v = serde_json::to_value(&rep)?;
        v["certificate_path"] = path;
        (certify_code(&rep), v)
    } else {
        let rep = certify::certify_polynomial_norm(&f, &opts)?;
        let path = match &rep.outcome {
            Outcome::Certified(c) => emit_json(&a.emit_cert, c)?,
            _ => Value::Null,
        };
        let mut v = serde_json::to_value(&rep)?;
        v["certificate_path"] = path;
        (certify_code(&rep), v)
    };
    note(common, format!("{} ({})", report["outcome"]["status"], a.form.display()));
    report["command"] = json!("certify");
    report["form"] = json!(a.form);
    report["mode"] = json!(if a.hessian { "hessian" } else { "norm" });
    report["verdict"] = report["outcome"]["status"].clone();
    Ok((code, report))
}

/// Parses `p:<p>` or `polytope:<path>`.
pub fn parse_target(spec: &str, n: usize) -> Result<(TargetNorm, usize)> {
    let bad = || Error::Parse {
        location: "--target".into(),
        message: format!("expected p:<p> or polytope:<file>, got {spec:?}"),
    };
    let (kind, rest) = spec.split_once(':').ok_or_else(bad)?;
    match kind {
        "p" => {
            let p = if rest == "inf" {
                f64::INFINITY
            } else {
                rest.parse::<f64>().map_err(|_| bad())?
            };
            if n == 0 {
                return Err(Error::InvalidInput("--n must be positive".into()));
            }
            Ok((TargetNorm::p_norm(p)?, n))
        }
        "polytope" => {
            let verts = io::read_vertices(Path::new(rest))?;
            let dim = verts.first().map_or(0, |v| v.len());
            Ok((TargetNorm::polytope(verts)?, dim))
        }
        _ => Err(bad()),
    }
}

fn run_approximate(a: &ApproximateArgs, common: &Common) -> Result<(i32, Value)> {
    let (target, n) = parse_target(&a.target, a.n)?;
    let table = approx::moment_table(&target, n, a.degree, common.seed)?;
    let f = table.form();
    note(common, format!("moment form of degree {} in {n} variables", a.degree));
    let form_path = emit_json(&a.emit_form, &f)?;
    let level_path = match &a.emit_levelset {
        Some(p) => {
            io::write_points(p, &approx::emit_level_set(&f, 1.0, a.resolution)?)?;
            json!(p)
        }
        None => Value::Null,
    };
    Ok((
        EXIT_OK,
        json!({
            "command": "approximate",
            "target": a.target,
            "n": n,
            "degree": a.degree,
            "form": f,
            "exact": table.std_error.is_none(),
            "coefficient_std_error": table.coefficient_error(),
            "polar_volume": table.volume,
            "approx_factor": approx::approx_factor(n, a.degree),
            "form_path": form_path,
            "levelset_path": level_path,
        }),
    ))
}

fn run_fit(a: &FitArgs, common: &Common) -> Result<(i32, Value)> {
    let (points, values) = io::read_samples(&a.samples)?;
    let (train, hold) = if a.holdout {
        approx::holdout_split(points.len(), common.seed)
    } else {
        ((0..points.len()).collect(), Vec::new())
    };
    let pick = |idx: &[usize]| -> (Vec<Vec<f64>>, Vec<f64>) {
        (
            idx.iter().map(|&i| points[i].clone()).collect(),
            idx.iter().map(|&i| values[i]).collect(),
        )
    };
    let (tp, tv) = pick(&train);
    let opts = FitOptions {
        solver: common.solver()?,
        polish: !a.no_polish,
    };
    let rep = approx::fit_polynomial_norm(&tp, &tv, a.degree, &opts)?;
    note(common, format!("objective {:.6e}", rep.objective));
    let holdout = if hold.is_empty() {
        Value::Null
    } else {
        let (hp, hv) = pick(&hold);
        json!({
            "count": hp.len(),
            "max_relative_error": approx::holdout_error(&rep.f, &hp, &hv),
            "rms_relative_error": approx::holdout_rms_error(&rep.f, &hp, &hv),
        })
    };
    let form_path = emit_json(&a.emit_form, &rep.f)?;
    let level_path = match &a.emit_levelset {
        Some(p) => {
            io::write_points(p, &approx::emit_level_set(&rep.f, 1.0, a.resolution)?)?;
            json!(p)
        }
        None => Value::Null,
    };
    let mut v = serde_json::to_value(&rep)?;
    v["command"] = json!("fit");
    v["samples"] = json!(a.samples);
    v["training_count"] = json!(tp.len());
    v["bound_holds"] = json!(rep.bound_holds());
    v["holdout"] = holdout;
    v["form_path"] = form_path;
    v["levelset_path"] = level_path;
    Ok((EXIT_OK, v))
}

fn run_jsr(a: &JsrArgs, common: &Common) -> Result<(i32, Value)> {
    let fam = io::read_family(&a.matrices)?;
    let opts = JsrOptions {
        r: a.r,
        seed: common.seed,
        solver: common.solver()?,
        ..JsrOptions::default()
    };
    let lower = jsr::jsr_lower_bound(&fam, a.lower_depth)?;
    let rep = jsr::jsr_certify(&fam, &a.degrees, &opts)?;
    for at in &rep.attempts {
        note(common, format!("d = {}: {:?} (margin {:.3e})", at.d, at.verdict, at.margin));
    }
    let feasibility: serde_json::Map<String, Value> = rep
        .attempts
        .iter()
        .map(|at| {
            let s = match at.verdict {
                Verdict::Sos => "certified",
                Verdict::NotSos => "infeasible",
                Verdict::Undecided => "undecided",
            };
            (at.d.to_string(), json!(s))
        })
        .collect();
    let upper = if a.upper_bound {
        let d = *a.degrees.last().expect("clap supplies defaults");
        serde_json::to_value(jsr::jsr_upper_bound(&fam, d, a.tol, &opts)?)?
    } else {
        Value::Null
    };
    let (figure_path, cert_path) = match rep.certificate() {
        Some(cert) => {
            let fig = match &a.emit_figure {
                Some(p) => {
                    let fig = jsr::emit_contraction_figure(cert, &fam, a.resolution)?;
                    io::write_figure(p, &fig)?;
                    json!({ "path": p, "contained": fig.contained(), "margin": fig.margin })
                }
                None => Value::Null,
            };
            (fig, emit_json(&a.emit_cert, cert)?)
        }
        None => (Value::Null, Value::Null),
    };
    let code = if rep.is_certified() {
        EXIT_OK
    } else {
        EXIT_NOT_CERTIFIED
    };
    let mut v = serde_json::to_value(&rep)?;
    v["command"] = json!("jsr");
    v["matrices"] = json!(a.matrices);
    v["verdict"] = v["outcome"]["status"].clone();
    v["feasibility"] = Value::Object(feasibility);
    v["lower_bound"] = json!({ "depth": a.lower_depth, "value": lower });
    v["upper_bound"] = upper;
    v["figure"] = figure_path;
    v["certificate_path"] = cert_path;
    Ok((code, v))
}
