//! The `spnodal` command line: `solve`, `ground`, `verify`, `sweep`,
//! `export`.
//!
//! Exit codes: 0 success, 2 verification failure, 3 solver failure or
//! non-convergence, 64 usage error, 65 invalid configuration or input.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::discretization::{DomainKind, GridDomain};
use crate::error::{Error, Result};
use crate::io::{self, ExportFormat};
use crate::minimizer::{
    ground_guess, initial_guess, minimize_ground, minimize_nodal, multistart, InitStyle,
    MinimizeOptions, MultistartReport, SolveOutcome,
};
use crate::nonlinearity::{Form, Nonlinearity};
use crate::parallel::{map_ordered, thread_cap};
use crate::problem::Problem;
use crate::verify::{convergence_study, run_suite, Mutation, StudyConfig, SuiteConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_CONFIG: i32 = 65;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DomainConfig {
    pub kind: DomainKind,
    pub n: usize,
    pub extent: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NonlinearityConfig {
    pub form: Form,
    pub lambda: f64,
    pub p: f64,
    pub mu: f64,
    pub q: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolverConfig {
    pub cg_tol: f64,
    pub proj_tol: f64,
    pub grad_tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub init_style: InitStyle,
    /// Run every initial-guess style and keep the lowest two-domain result.
    pub multistart: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldFormat {
    /// `SPNODAL1` field files only.
    Spnodal,
    /// Field files plus the plot export suited to the grid.
    Plot,
}

impl FromStr for FieldFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spnodal" | "field" => Ok(FieldFormat::Spnodal),
            "plot" => Ok(FieldFormat::Plot),
            other => Err(Error::Parse(format!("unknown field format `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub field_format: FieldFormat,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub domain: DomainConfig,
    pub nonlinearity: NonlinearityConfig,
    pub solver: SolverConfig,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            domain: DomainConfig {
                kind: DomainKind::RadialBall,
                n: 255,
                extent: 1.0,
            },
            nonlinearity: NonlinearityConfig {
                form: Form::PurePower,
                lambda: 1.0,
                p: 5.0,
                mu: 0.0,
                q: 5.0,
            },
            solver: SolverConfig {
                cg_tol: 1e-10,
                proj_tol: 1e-10,
                grad_tol: 1e-6,
                max_iter: 5000,
                seed: 42,
                init_style: InitStyle::Dipole,
                multistart: true,
            },
            output: OutputConfig {
                directory: PathBuf::from("spnodal-out"),
                field_format: FieldFormat::Spnodal,
            },
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("invalid value `{value}` for `{key}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(Error::Parse(format!("invalid value `{value}` for `{key}`"))),
    }
}

impl RunConfig {
    /// Sets one flat key. Keys accept `-` or `_` and an optional section
    /// prefix (`solver.grad_tol`).
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let norm = key.trim().replace('-', "_");
        let k = norm.rsplit('.').next().unwrap_or("");
        match k {
            "domain" | "kind" => self.domain.kind = value.trim().parse()?,
            "n" => self.domain.n = parse(k, value)?,
            "extent" | "radius" | "side" => self.domain.extent = parse(k, value)?,
            "form" => {
                self.nonlinearity.form = match value.trim() {
                    "pure_power" | "pure" => Form::PurePower,
                    "two_power" | "two" => Form::TwoPower,
                    other => return Err(Error::Parse(format!("unknown form `{other}`"))),
                }
            }
            "lambda" => self.nonlinearity.lambda = parse(k, value)?,
            "p" => self.nonlinearity.p = parse(k, value)?,
            "mu" => self.nonlinearity.mu = parse(k, value)?,
            "q" => self.nonlinearity.q = parse(k, value)?,
            "cg_tol" => self.solver.cg_tol = parse(k, value)?,
            "proj_tol" => self.solver.proj_tol = parse(k, value)?,
            "grad_tol" => self.solver.grad_tol = parse(k, value)?,
            "max_iter" => self.solver.max_iter = parse(k, value)?,
            "seed" => self.solver.seed = parse(k, value)?,
            "init" | "init_style" => self.solver.init_style = value.trim().parse()?,
            "multistart" => self.solver.multistart = parse_bool(k, value)?,
            "output" | "directory" => self.output.directory = PathBuf::from(value.trim()),
            "field_format" => self.output.field_format = value.trim().parse()?,
            _ => return Err(Error::Parse(format!("unknown configuration key `{key}`"))),
        }
        Ok(())
    }

    pub fn from_key_values(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (k, v) in io::parse_key_values(text)? {
            cfg.set(&k, &v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_key_values(&self) -> String {
        let form = match self.nonlinearity.form {
            Form::PurePower => "pure_power",
            Form::TwoPower => "two_power",
        };
        let ff = match self.output.field_format {
            FieldFormat::Spnodal => "spnodal",
            FieldFormat::Plot => "plot",
        };
        io::format_key_values([
            ("domain", self.domain.kind.to_string()),
            ("n", self.domain.n.to_string()),
            ("extent", self.domain.extent.to_string()),
            ("form", form.to_string()),
            ("lambda", self.nonlinearity.lambda.to_string()),
            ("p", self.nonlinearity.p.to_string()),
            ("mu", self.nonlinearity.mu.to_string()),
            ("q", self.nonlinearity.q.to_string()),
            ("cg_tol", format!("{:e}", self.solver.cg_tol)),
            ("proj_tol", format!("{:e}", self.solver.proj_tol)),
            ("grad_tol", format!("{:e}", self.solver.grad_tol)),
            ("max_iter", self.solver.max_iter.to_string()),
            ("seed", self.solver.seed.to_string()),
            ("init", self.solver.init_style.to_string()),
            ("multistart", self.solver.multistart.to_string()),
            ("output", self.output.directory.display().to_string()),
            ("field_format", ff.to_string()),
        ])
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.domain.n < 3 {
            return bad(format!("n = {} must be at least 3", self.domain.n));
        }
        if !(self.domain.extent > 0.0 && self.domain.extent.is_finite()) {
            return bad(format!("extent = {} must be positive", self.domain.extent));
        }
        for (name, t) in [
            ("cg_tol", self.solver.cg_tol),
            ("proj_tol", self.solver.proj_tol),
            ("grad_tol", self.solver.grad_tol),
        ] {
            if !(t > 0.0 && t < 1.0) {
                return bad(format!("{name} = {t} must lie in (0, 1)"));
            }
        }
        if self.solver.max_iter == 0 {
            return bad("max_iter must be at least 1".into());
        }
        self.nonlinearity().map(|_| ())
    }

    pub fn nonlinearity(&self) -> Result<Nonlinearity> {
        let c = &self.nonlinearity;
        match c.form {
            Form::PurePower => Nonlinearity::pure_power(c.lambda, c.p),
            Form::TwoPower => Nonlinearity::two_power(c.lambda, c.p, c.mu, c.q),
        }
    }

    pub fn grid(&self) -> Result<GridDomain> {
        GridDomain::build(self.domain.kind, self.domain.n, self.domain.extent)
    }

    pub fn options(&self) -> MinimizeOptions {
        MinimizeOptions {
            tol_grad: self.solver.grad_tol,
            max_iter: self.solver.max_iter,
            proj_tol: self.solver.proj_tol,
            ..MinimizeOptions::default()
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "spnodal",
    version,
    about = "Least-energy nodal solutions of the Schrödinger–Poisson system"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Minimize the energy over the nodal constraint set.
    Solve(SolveArgs),
    /// Minimize the energy over the one-signed constraint set.
    Ground(ConfigArgs),
    /// Run the invariant suite.
    Verify(VerifyArgs),
    /// One solve per exponent p, aggregated into sweep.csv.
    Sweep(SweepArgs),
    /// Convert a stored field to a plot format.
    Export(ExportArgs),
}

/// Configuration sources: `--config FILE`, then individual flags.
#[derive(Args, Debug, Default)]
struct ConfigArgs {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// box3d | ball3d | radial_ball (alias: ball)
    #[arg(long)]
    domain: Option<String>,
    #[arg(long)]
    n: Option<String>,
    /// Box side or ball radius.
    #[arg(long)]
    extent: Option<String>,
    /// pure_power | two_power
    #[arg(long)]
    form: Option<String>,
    #[arg(long)]
    lambda: Option<String>,
    #[arg(long)]
    p: Option<String>,
    #[arg(long)]
    mu: Option<String>,
    #[arg(long)]
    q: Option<String>,
    #[arg(long)]
    cg_tol: Option<String>,
    #[arg(long)]
    proj_tol: Option<String>,
    #[arg(long)]
    grad_tol: Option<String>,
    #[arg(long)]
    max_iter: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// dipole | mode2 | random_signed
    #[arg(long)]
    init: Option<String>,
    /// true | false
    #[arg(long)]
    multistart: Option<String>,
    /// Output directory.
    #[arg(long)]
    output: Option<String>,
    /// spnodal | plot
    #[arg(long)]
    field_format: Option<String>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::Parse(format!("cannot read config {}: {e}", path.display())))?;
            for (k, v) in io::parse_key_values(&text)? {
                cfg.set(&k, &v)?;
            }
        }
        let flags = [
            ("domain", &self.domain),
            ("n", &self.n),
            ("extent", &self.extent),
            ("form", &self.form),
            ("lambda", &self.lambda),
            ("p", &self.p),
            ("mu", &self.mu),
            ("q", &self.q),
            ("cg_tol", &self.cg_tol),
            ("proj_tol", &self.proj_tol),
            ("grad_tol", &self.grad_tol),
            ("max_iter", &self.max_iter),
            ("seed", &self.seed),
            ("init", &self.init),
            ("multistart", &self.multistart),
            ("output", &self.output),
            ("field_format", &self.field_format),
        ];
        for (k, v) in flags {
            if let Some(v) = v {
                cfg.set(k, v)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Skip the ground-state run (and the c0 > cN comparison).
    #[arg(long)]
    no_ground: bool,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Random fields per check.
    #[arg(long, default_value = "100")]
    samples: String,
    /// Inject a deliberate fault by name, e.g. `stiffness_skew`.
    #[arg(long, default_value = "none")]
    mutation: String,
    /// Comma-separated resolutions for a Poisson convergence study.
    #[arg(long)]
    ladder: Option<String>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Comma-separated exponents.
    #[arg(long)]
    p_list: String,
}

#[derive(Args, Debug)]
struct ExportArgs {
    /// `SPNODAL1` field file.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// vtk | columns (default: by grid kind)
    #[arg(long)]
    format: Option<String>,
}

/// Failure with its exit code.
struct Failure(i32, String);

impl Failure {
    fn config(e: Error) -> Self {
        Failure(EXIT_CONFIG, e.to_string())
    }

    fn solver(e: Error) -> Self {
        Failure(EXIT_SOLVER, e.to_string())
    }
}

type Outcome = std::result::Result<i32, Failure>;

/// Runs the CLI on `argv` (program name first) with the process streams.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(argv, &mut stdout.lock(), &mut stderr.lock())
}

pub fn run_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{}", e.render());
                    return EXIT_OK;
                }
                ErrorKind::ValueValidation | ErrorKind::InvalidValue => EXIT_CONFIG,
                _ => EXIT_USAGE,
            };
            let _ = write!(err, "{}", e.render());
            return code;
        }
    };
    let result = match cli.command {
        Command::Solve(a) => cmd_solve(&a, out, err),
        Command::Ground(a) => cmd_ground(&a, out),
        Command::Verify(a) => cmd_verify(&a, out),
        Command::Sweep(a) => cmd_sweep(&a, out, err),
        Command::Export(a) => cmd_export(&a, out),
    };
    match result {
        Ok(code) => code,
        Err(Failure(code, msg)) => {
            let _ = writeln!(err, "error: {msg}");
            code
        }
    }
}

fn prepare_dir(dir: &Path) -> std::result::Result<(), Failure> {
    fs::create_dir_all(dir)
        .map_err(|e| Failure(EXIT_CONFIG, format!("cannot create {}: {e}", dir.display())))
}

fn write_file(path: &Path, text: &str) -> std::result::Result<(), Failure> {
    fs::write(path, text)
        .map_err(|e| Failure(EXIT_SOLVER, format!("cannot write {}: {e}", path.display())))
}

#[derive(Clone, Serialize)]
struct StartSummary {
    style: InitStyle,
    c0: Option<f64>,
    status: Option<crate::minimizer::RunStatus>,
    nodal_domains: Option<usize>,
    error: Option<String>,
}

#[derive(Serialize)]
struct SolveReport<'a> {
    config: &'a RunConfig,
    nodal: &'a SolveOutcome,
    ground: Option<&'a SolveOutcome>,
    /// `c₀ > c_N > 0`.
    ordering_holds: Option<bool>,
    starts: Vec<StartSummary>,
    starts_agree: Option<bool>,
    warnings: Vec<String>,
}

fn summarize(report: &MultistartReport) -> Vec<StartSummary> {
    report
        .runs
        .iter()
        .map(|r| match &r.outcome {
            Ok(o) => StartSummary {
                style: r.style,
                c0: Some(o.c0),
                status: Some(o.status),
                nodal_domains: Some(o.nodal.count),
                error: None,
            },
            Err(e) => StartSummary {
                style: r.style,
                c0: None,
                status: None,
                nodal_domains: None,
                error: Some(e.clone()),
            },
        })
        .collect()
}

struct NodalRun {
    outcome: SolveOutcome,
    ground: Option<SolveOutcome>,
    starts: Vec<StartSummary>,
    agree: Option<bool>,
    warnings: Vec<String>,
}

/// Nodal descent (multistart or single) plus the optional ground state.
fn nodal_run(
    cfg: &RunConfig,
    with_ground: bool,
    threads: usize,
) -> std::result::Result<NodalRun, Failure> {
    let d = cfg.grid().map_err(Failure::config)?;
    let nl = cfg.nonlinearity().map_err(Failure::config)?;
    let p = Problem::with_tol(&d, &nl, cfg.solver.cg_tol);
    let opts = cfg.options();
    let (outcome, starts, agree, warnings) = if cfg.solver.multistart {
        // The configured style goes first so that ties keep it.
        let mut styles = vec![cfg.solver.init_style];
        styles.extend(
            InitStyle::ALL
                .into_iter()
                .filter(|s| *s != cfg.solver.init_style),
        );
        let report = multistart(&p, &styles, cfg.solver.seed, &opts, threads);
        let starts = summarize(&report);
        let best = match report.best_outcome() {
            Some(o) => o.clone(),
            None => {
                // Nothing qualified: surface the configured start's result.
                match report.runs[0].outcome.clone() {
                    Ok(o) => o,
                    Err(e) => {
                        return Err(Failure(
                            EXIT_SOLVER,
                            format!("{}; {}", e, report.warnings.join("; ")),
                        ))
                    }
                }
            }
        };
        (best, starts, Some(report.agree), report.warnings)
    } else {
        let u0 = initial_guess(&d, cfg.solver.init_style, cfg.solver.seed);
        let o = minimize_nodal(&p, &u0, &opts).map_err(Failure::solver)?;
        (o, Vec::new(), None, Vec::new())
    };
    let ground = if with_ground {
        Some(minimize_ground(&p, &ground_guess(&d), &opts).map_err(Failure::solver)?)
    } else {
        None
    };
    Ok(NodalRun {
        outcome,
        ground,
        starts,
        agree,
        warnings,
    })
}

fn write_outputs(
    dir: &Path,
    cfg: &RunConfig,
    d: &GridDomain,
    run: &NodalRun,
) -> std::result::Result<Option<bool>, Failure> {
    let o = &run.outcome;
    write_file(&dir.join("metrics.csv"), &io::format_metrics(&o.history))?;
    write_file(
        &dir.join("w.field"),
        &io::format_field(d, &o.w).map_err(Failure::solver)?,
    )?;
    write_file(&dir.join("config.txt"), &cfg.to_key_values())?;
    if cfg.output.field_format == FieldFormat::Plot {
        write_plot(dir, "w", d, &o.w)?;
    }
    let ordering = run.ground.as_ref().map(|g| o.c0 > g.c0 && g.c0 > 0.0);
    if let Some(g) = &run.ground {
        write_file(
            &dir.join("ground_metrics.csv"),
            &io::format_metrics(&g.history),
        )?;
        write_file(
            &dir.join("ground.field"),
            &io::format_field(d, &g.w).map_err(Failure::solver)?,
        )?;
        if cfg.output.field_format == FieldFormat::Plot {
            write_plot(dir, "ground", d, &g.w)?;
        }
    }
    let report = SolveReport {
        config: cfg,
        nodal: o,
        ground: run.ground.as_ref(),
        ordering_holds: ordering,
        starts: run.starts.clone(),
        starts_agree: run.agree,
        warnings: run.warnings.clone(),
    };
    write_file(&dir.join("report.json"), &io::to_json(&report))?;
    Ok(ordering)
}

fn write_plot(
    dir: &Path,
    stem: &str,
    d: &GridDomain,
    u: &crate::Field,
) -> std::result::Result<(), Failure> {
    let fmt = ExportFormat::for_kind(d.kind());
    let ext = if fmt == ExportFormat::Vtk {
        "vtk"
    } else {
        "dat"
    };
    let text = io::export(d, u, fmt).map_err(Failure::solver)?;
    write_file(&dir.join(format!("{stem}.{ext}")), &text)
}

fn cmd_solve(a: &SolveArgs, out: &mut dyn Write, err: &mut dyn Write) -> Outcome {
    let cfg = a.config.resolve().map_err(Failure::config)?;
    let d = cfg.grid().map_err(Failure::config)?;
    prepare_dir(&cfg.output.directory)?;
    let run = nodal_run(&cfg, !a.no_ground, thread_cap())?;
    let ordering = write_outputs(&cfg.output.directory, &cfg, &d, &run)?;
    let o = &run.outcome;
    let _ = writeln!(out, "domain        {}", d.describe());
    let _ = writeln!(out, "c0            {}", o.c0);
    let _ = writeln!(out, "nodal domains {}", o.nodal.count);
    let _ = writeln!(
        out,
        "status        {:?} after {} iterations",
        o.status, o.iterations
    );
    let _ = writeln!(
        out,
        "grad norm     {:e} (relative {:e})",
        o.grad_norm,
        o.grad_norm / o.norm
    );
    let _ = writeln!(
        out,
        "energy bound  J - |w|^2/4 = {:e} ({})",
        o.energy_bound.gap,
        if o.energy_bound.holds {
            "holds"
        } else {
            "VIOLATED"
        }
    );
    if let Some(j) = &o.jacobian {
        let _ = writeln!(
            out,
            "jacobian det  {:e} ({})",
            j.det,
            if j.certified {
                "certified"
            } else {
                "not certified"
            }
        );
    }
    if let Some(dm) = &o.dominance {
        let _ = writeln!(
            out,
            "h(1,1) max    {}",
            if dm.strict { "strict" } else { "NOT strict" }
        );
    }
    if let Some(g) = &run.ground {
        let _ = writeln!(out, "cN            {}", g.c0);
        let _ = writeln!(out, "c0 > cN > 0   {}", ordering.unwrap_or(false));
    }
    for w in &run.warnings {
        let _ = writeln!(err, "warning: {w}");
    }
    let _ = writeln!(out, "wrote         {}", cfg.output.directory.display());
    if o.converged() && o.nodal.count == 2 {
        Ok(EXIT_OK)
    } else {
        let _ = writeln!(
            err,
            "error: nodal descent ended {:?} with {} nodal domains (relative gradient {:e})",
            o.status,
            o.nodal.count,
            o.grad_norm / o.norm
        );
        Ok(EXIT_SOLVER)
    }
}

fn cmd_ground(a: &ConfigArgs, out: &mut dyn Write) -> Outcome {
    let cfg = a.resolve().map_err(Failure::config)?;
    let d = cfg.grid().map_err(Failure::config)?;
    let nl = cfg.nonlinearity().map_err(Failure::config)?;
    prepare_dir(&cfg.output.directory)?;
    let p = Problem::with_tol(&d, &nl, cfg.solver.cg_tol);
    let g = minimize_ground(&p, &ground_guess(&d), &cfg.options()).map_err(Failure::solver)?;
    let dir = &cfg.output.directory;
    write_file(&dir.join("metrics.csv"), &io::format_metrics(&g.history))?;
    write_file(
        &dir.join("w.field"),
        &io::format_field(&d, &g.w).map_err(Failure::solver)?,
    )?;
    write_file(&dir.join("config.txt"), &cfg.to_key_values())?;
    if cfg.output.field_format == FieldFormat::Plot {
        write_plot(dir, "w", &d, &g.w)?;
    }
    #[derive(Serialize)]
    struct GroundReport<'a> {
        config: &'a RunConfig,
        ground: &'a SolveOutcome,
    }
    write_file(
        &dir.join("report.json"),
        &io::to_json(&GroundReport {
            config: &cfg,
            ground: &g,
        }),
    )?;
    let _ = writeln!(out, "domain        {}", d.describe());
    let _ = writeln!(out, "cN            {}", g.c0);
    let _ = writeln!(out, "nodal domains {}", g.nodal.count);
    let _ = writeln!(
        out,
        "status        {:?} after {} iterations",
        g.status, g.iterations
    );
    let _ = writeln!(out, "wrote         {}", dir.display());
    if g.converged() && g.nodal.count == 1 {
        Ok(EXIT_OK)
    } else {
        Err(Failure(
            EXIT_SOLVER,
            format!(
                "ground-state descent ended {:?} with {} nodal domains",
                g.status, g.nodal.count
            ),
        ))
    }
}

fn parse_list<T: FromStr>(what: &str, s: &str) -> Result<Vec<T>> {
    let items: Vec<T> = s
        .split(',')
        .filter(|x| !x.trim().is_empty())
        .map(|x| parse(what, x))
        .collect::<Result<_>>()?;
    if items.is_empty() {
        return Err(Error::Parse(format!("empty {what} list")));
    }
    Ok(items)
}

fn cmd_verify(a: &VerifyArgs, out: &mut dyn Write) -> Outcome {
    let cfg = a.config.resolve().map_err(Failure::config)?;
    let samples: usize = parse("samples", &a.samples).map_err(Failure::config)?;
    let mutation: Mutation = a.mutation.parse().map_err(Failure::config)?;
    let ladder = a
        .ladder
        .as_deref()
        .map(|l| parse_list::<usize>("ladder", l))
        .transpose()
        .map_err(Failure::config)?;
    let d = cfg.grid().map_err(Failure::config)?;
    let nl = cfg.nonlinearity().map_err(Failure::config)?;
    let suite = SuiteConfig {
        seed: cfg.solver.seed,
        n_samples: samples,
        mutation,
    };
    let report = run_suite(&d, &nl, &suite).map_err(|e| match e {
        Error::InvalidArgument(_) => Failure::config(e),
        e => Failure::solver(e),
    })?;
    prepare_dir(&cfg.output.directory)?;
    write_file(
        &cfg.output.directory.join("verify.json"),
        &io::to_json(&report),
    )?;
    for c in &report.checks {
        let _ = writeln!(
            out,
            "[{}] {:30} worst {:.3e}  tol {:.0e}  n={}{}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.worst,
            c.tolerance,
            c.tested,
            c.note
                .as_deref()
                .map(|n| format!("  ({n})"))
                .unwrap_or_default()
        );
    }
    let _ = writeln!(
        out,
        "smallest eigenvalue {:.6}, bound constant {:.6e}",
        report.smallest_eigenvalue, report.bound_constant
    );
    if let Some(ladder) = ladder {
        let study = StudyConfig {
            kind: cfg.domain.kind,
            extent: cfg.domain.extent,
            ladder,
            nonlinearity: nl.clone(),
            opts: cfg.options(),
            solve: false,
        };
        let table = convergence_study(&study).map_err(Failure::config)?;
        let _ = writeln!(out, "n      h            poisson error");
        for r in &table.rows {
            let _ = writeln!(
                out,
                "{:<6} {:<12.6e} {}",
                r.n,
                r.h,
                r.poisson_error.map_or("-".into(), |e| format!("{e:.6e}"))
            );
        }
        let orders: Vec<String> = table
            .poisson_orders
            .iter()
            .map(|o| o.map_or("-".into(), |v| format!("{v:.3}")))
            .collect();
        let _ = writeln!(out, "orders {}", orders.join(" "));
    }
    let _ = writeln!(
        out,
        "{}",
        if report.passed {
            "all checks passed"
        } else {
            "some checks FAILED"
        }
    );
    Ok(if report.passed {
        EXIT_OK
    } else {
        EXIT_VERIFY_FAILED
    })
}

fn p_label(p: f64) -> String {
    format!("p_{p}")
}

fn cmd_sweep(a: &SweepArgs, out: &mut dyn Write, err: &mut dyn Write) -> Outcome {
    let base = a.config.resolve().map_err(Failure::config)?;
    let ps: Vec<f64> = parse_list("p-list", &a.p_list).map_err(Failure::config)?;
    let mut configs = Vec::new();
    for p in &ps {
        let mut c = base.clone();
        c.nonlinearity.p = *p;
        c.output.directory = base.output.directory.join(p_label(*p));
        c.validate().map_err(Failure::config)?;
        configs.push(c);
    }
    let d = base.grid().map_err(Failure::config)?;
    prepare_dir(&base.output.directory)?;
    let threads = thread_cap();
    let rows = map_ordered(
        &configs,
        threads,
        |c| -> std::result::Result<NodalRun, Failure> {
            prepare_dir(&c.output.directory)?;
            let run = nodal_run(c, true, 1)?;
            write_outputs(&c.output.directory, c, &d, &run)?;
            Ok(run)
        },
    );
    let mut csv = String::from("p,c0,cN,norm,norm_plus,norm_minus,det\n");
    let mut failed = false;
    for (c, row) in configs.iter().zip(rows) {
        let p = c.nonlinearity.p;
        match row {
            Ok(run) => {
                let o = &run.outcome;
                let ok = o.converged() && o.nodal.count == 2;
                failed |= !ok;
                let cn = run.ground.as_ref().map_or(f64::NAN, |g| g.c0);
                let det = o.jacobian.map_or(f64::NAN, |j| j.det);
                csv.push_str(&format!(
                    "{p},{:e},{:e},{:e},{:e},{:e},{:e}\n",
                    o.c0, cn, o.norm, o.energy_bound.norm_plus, o.energy_bound.norm_minus, det
                ));
                let _ = writeln!(
                    out,
                    "p={p}  c0={}  cN={}  domains={}  {:?}",
                    o.c0, cn, o.nodal.count, o.status
                );
            }
            Err(Failure(_, msg)) => {
                failed = true;
                csv.push_str(&format!("{p},,,,,,\n"));
                let _ = writeln!(err, "error: p={p}: {msg}");
            }
        }
    }
    write_file(&base.output.directory.join("sweep.csv"), &csv)?;
    let _ = writeln!(
        out,
        "wrote {}",
        base.output.directory.join("sweep.csv").display()
    );
    Ok(if failed { EXIT_SOLVER } else { EXIT_OK })
}

fn cmd_export(a: &ExportArgs, out: &mut dyn Write) -> Outcome {
    let (d, u) = io::read_field(&a.input).map_err(Failure::config)?;
    let fmt = match &a.format {
        Some(f) => f.parse().map_err(Failure::config)?,
        None => ExportFormat::for_kind(d.kind()),
    };
    let text = io::export(&d, &u, fmt).map_err(Failure::config)?;
    fs::write(&a.output, text).map_err(|e| {
        Failure(
            EXIT_CONFIG,
            format!("cannot write {}: {e}", a.output.display()),
        )
    })?;
    let _ = writeln!(out, "wrote {}", a.output.display());
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn code(args: &[&str]) -> i32 {
        let mut o = Vec::new();
        let mut e = Vec::new();
        run_with(
            std::iter::once("spnodal").chain(args.iter().copied()),
            &mut o,
            &mut e,
        )
    }

    #[test]
    fn usage_and_config_errors_map_to_codes() {
        assert_eq!(code(&["--help"]), EXIT_OK);
        assert_eq!(code(&["solve", "--bogus"]), EXIT_USAGE);
        assert_eq!(code(&["frobnicate"]), EXIT_USAGE);
        assert_eq!(code(&[]), EXIT_USAGE);
        assert_eq!(code(&["solve", "--p", "3"]), EXIT_CONFIG);
        assert_eq!(code(&["solve", "--n", "2"]), EXIT_CONFIG);
        assert_eq!(code(&["solve", "--grad-tol", "1.5"]), EXIT_CONFIG);
        assert_eq!(code(&["solve", "--n", "many"]), EXIT_CONFIG);
        assert_eq!(code(&["verify", "--mutation", "nope"]), EXIT_CONFIG);
    }

    #[test]
    fn key_values_round_trip_the_config() {
        let mut cfg = RunConfig::default();
        cfg.set("solver.grad-tol", "1e-4").unwrap();
        cfg.set("domain", "box3d").unwrap();
        cfg.set("form", "two_power").unwrap();
        cfg.set("mu", "0.5").unwrap();
        cfg.set("q", "4.5").unwrap();
        let back = RunConfig::from_key_values(&cfg.to_key_values()).unwrap();
        assert_eq!(back, cfg);
        assert!(cfg.set("colour", "blue").is_err());
    }
}
