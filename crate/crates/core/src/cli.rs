//! Command-line front end.
//!
//! Each subcommand runs one pipeline and writes a canonical JSON report (CSV
//! for `probe-conjecture`) that embeds the arguments that produced it. Exit
//! status: 0 on success, 2 for usage, domain, resource and I/O errors, 3 when
//! a checked invariant fails. Errors are written to stderr as
//! `{"error":{"kind":...,"message":...}}`.

use std::ffi::OsString;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::chain::{build_chain, chain_constants, DEFAULT_SAFETY};
use crate::error::{Error, Result};
use crate::fractal::{build, builtin, Builtin, IfsDocument, IfsSystem};
use crate::gradient::{minimal_gradient, FieldDocument, GradientField, GradientMode, ScalarField};
use crate::io::{read_json, to_canonical_json, to_csv};
use crate::oscillation::{best_constant_scan_with_tol, conjecture_probe, ScanConfig, SpikePoint};
use crate::space::{
    Ball, MetricMeasureSpace, SpaceDocument, DEFAULT_PROFILE_CENTERS, DEFAULT_PROFILE_RADII,
    DEFAULT_TOL,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 2;
pub const EXIT_INVARIANT: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "hajlasz",
    version,
    about = "Hajłasz gradients and oscillation estimates on discretized fractals"
)]
pub struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Slack for inequality checks.
    #[arg(long, global = true, default_value_t = DEFAULT_TOL)]
    pub tol: f64,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Discretize a builtin or custom IFS attractor.
    BuildSpace(BuildSpaceArgs),
    /// Profile the Ahlfors regularity constant of a space.
    CheckAhlfors(CheckAhlforsArgs),
    /// Build the disjoint ball chain for a root ball.
    Chain(ChainArgs),
    /// Compute a minimal Hajłasz gradient of a field.
    Gradient(GradientArgs),
    /// Scan seeded balls for the empirical oscillation constant.
    VerifyOsc(VerifyOscArgs),
    /// Log-log spike fields across levels of a space of dimension s > 1.
    ProbeConjecture(ProbeArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct BuildSpaceArgs {
    /// cantor3, cantor-dust, interval or snowflake:<eps>.
    #[arg(
        long,
        conflicts_with = "system_file",
        required_unless_present = "system_file"
    )]
    pub system: Option<String>,
    /// JSON file `{maps: [{ratio, offset, matrix?}], base_diameter?}`.
    #[arg(long)]
    pub system_file: Option<PathBuf>,
    #[arg(long)]
    pub level: usize,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct CheckAhlforsArgs {
    #[arg(long)]
    pub space: PathBuf,
    /// Dimension to test (default: the space's declared s).
    #[arg(long)]
    pub s: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_PROFILE_RADII)]
    pub radii: usize,
    #[arg(long, default_value_t = DEFAULT_PROFILE_CENTERS)]
    pub centers: usize,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct ChainArgs {
    #[arg(long)]
    pub space: PathBuf,
    #[arg(long)]
    pub center: usize,
    #[arg(long)]
    pub radius: f64,
    #[arg(long, default_value_t = DEFAULT_SAFETY)]
    pub safety: f64,
    /// Regularity constant (default: profiled at the space's s).
    #[arg(long)]
    pub c_a: Option<f64>,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct GradientArgs {
    #[arg(long)]
    pub space: PathBuf,
    /// JSON file `{field: [...]}`.
    #[arg(long)]
    pub field: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pub s: f64,
    /// exact-lp, local-search or oracle.
    #[arg(long, default_value = "exact-lp")]
    pub mode: String,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct VerifyOscArgs {
    #[arg(long)]
    pub space: PathBuf,
    #[arg(long)]
    pub field: PathBuf,
    /// JSON file `{field: [...]}` holding the gradient values.
    #[arg(long)]
    pub grad: PathBuf,
    /// Exponent (default: the space's declared s).
    #[arg(long)]
    pub s: Option<f64>,
    #[arg(long, default_value_t = 64)]
    pub centers: usize,
    #[arg(long, default_value_t = 16)]
    pub radii: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct ProbeArgs {
    #[arg(long, default_value = "cantor-dust")]
    pub system: String,
    /// Inclusive range `a..b` or a comma-separated list.
    #[arg(long, default_value = "3..6")]
    pub levels: String,
    #[arg(long, default_value_t = 0.05)]
    pub rho: f64,
    /// `first` or `nearest:<x>,<y>,...`.
    #[arg(long, default_value = "first")]
    pub x0: String,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
struct Report<'a, T: Serialize> {
    config: RunConfig<'a>,
    #[serde(flatten)]
    body: T,
}

#[derive(Serialize)]
struct RunConfig<'a> {
    #[serde(flatten)]
    command: &'a Command,
    tol: f64,
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return EXIT_OK;
            }
            report_error("usage", &e.to_string());
            return EXIT_DOMAIN;
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            report_error(e.kind(), &e.to_string());
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    if e.is_invariant_failure() {
        EXIT_INVARIANT
    } else {
        EXIT_DOMAIN
    }
}

fn report_error(kind: &str, message: &str) {
    #[derive(Serialize)]
    struct Inner<'a> {
        kind: &'a str,
        message: &'a str,
    }
    #[derive(Serialize)]
    struct Outer<'a> {
        error: Inner<'a>,
    }
    let text = to_canonical_json(&Outer {
        error: Inner {
            kind,
            message: message.trim_end(),
        },
    })
    .unwrap_or_else(|_| "{\"error\":{\"kind\":\"internal\",\"message\":\"\"}}\n".into());
    let _ = std::io::stderr().write_all(text.as_bytes());
}

pub fn execute(cli: &Cli) -> Result<()> {
    if !(cli.tol >= 0.0 && cli.tol.is_finite()) {
        return Err(Error::Domain(format!(
            "--tol must be finite and nonnegative, got {}",
            cli.tol
        )));
    }
    match cli.threads {
        Some(0) => Err(Error::Domain("--threads must be positive".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Resource(e.to_string()))?;
            pool.install(|| dispatch(cli))
        }
        None => dispatch(cli),
    }
}

fn dispatch(cli: &Cli) -> Result<()> {
    let config = RunConfig {
        command: &cli.command,
        tol: cli.tol,
    };
    match &cli.command {
        Command::BuildSpace(a) => build_space(config, a),
        Command::CheckAhlfors(a) => check_ahlfors(config, a),
        Command::Chain(a) => chain(config, a),
        Command::Gradient(a) => gradient(config, a, cli.tol),
        Command::VerifyOsc(a) => verify_osc(config, a, cli.tol),
        Command::ProbeConjecture(a) => probe(a),
    }
}

fn require_inputs(paths: &[&Path]) -> Result<()> {
    for p in paths {
        if !p.is_file() {
            return Err(Error::Domain(format!(
                "input file {} does not exist",
                p.display()
            )));
        }
    }
    Ok(())
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn emit_report<T: Serialize>(out: Option<&Path>, config: RunConfig<'_>, body: T) -> Result<()> {
    emit(out, &to_canonical_json(&Report { config, body })?)
}

fn load_space(path: &Path) -> Result<MetricMeasureSpace> {
    MetricMeasureSpace::from_document(read_json::<SpaceDocument>(path)?)
}

fn load_field(space: &MetricMeasureSpace, path: &Path) -> Result<ScalarField> {
    ScalarField::new(space, read_json::<FieldDocument>(path)?.field)
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Domain(format!("--{name} must be positive, got {v}")))
    }
}

fn build_space(config: RunConfig<'_>, a: &BuildSpaceArgs) -> Result<()> {
    let disc = match (&a.system, &a.system_file) {
        (Some(name), _) => builtin(name.parse::<Builtin>()?, a.level)?,
        (None, Some(path)) => {
            require_inputs(&[path])?;
            let system = IfsSystem::from_document(read_json::<IfsDocument>(path)?)?;
            build(&system, a.level)?
        }
        (None, None) => {
            return Err(Error::Domain(
                "one of --system or --system-file is required".into(),
            ))
        }
    };
    emit_report(a.out.as_deref(), config, disc.space.to_document())
}

fn check_ahlfors(config: RunConfig<'_>, a: &CheckAhlforsArgs) -> Result<()> {
    require_inputs(&[&a.space])?;
    if let Some(s) = a.s {
        positive("s", s)?;
    }
    if a.radii == 0 || a.centers == 0 {
        return Err(Error::Domain(
            "--radii and --centers must be positive".into(),
        ));
    }
    let space = load_space(&a.space)?;
    let s = a.s.unwrap_or(space.s());
    let centers = space.spread_centers(a.centers);
    let profile = space.ahlfors_profile(s, a.radii, &centers)?;
    emit_report(a.out.as_deref(), config, profile)
}

fn chain(config: RunConfig<'_>, a: &ChainArgs) -> Result<()> {
    require_inputs(&[&a.space])?;
    if let Some(c_a) = a.c_a {
        positive("c-a", c_a)?;
    }
    let space = load_space(&a.space)?;
    let root = Ball {
        center: a.center,
        radius: a.radius,
    };
    crate::chain::check_root(&space, &root)?;
    let c_a = match a.c_a {
        Some(c) => c,
        None => space.ahlfors_profile_default(space.s())?.c_a,
    };
    let constants = chain_constants(c_a, space.s(), a.safety)?;
    let chain = build_chain(&space, root, constants)?;
    emit_report(a.out.as_deref(), config, chain)
}

#[derive(Serialize)]
struct GradientBody {
    field: Vec<f64>,
    s: f64,
    norm: f64,
    mode: GradientMode,
    certificate_residual: Option<f64>,
    admissible: bool,
    slack: f64,
}

fn gradient(config: RunConfig<'_>, a: &GradientArgs, tol: f64) -> Result<()> {
    require_inputs(&[&a.space, &a.field])?;
    positive("s", a.s)?;
    let mode: GradientMode = a.mode.parse()?;
    let space = load_space(&a.space)?;
    let u = load_field(&space, &a.field)?;
    let m = minimal_gradient(&space, &u, a.s, mode)?;
    let checked = GradientField::check(&space, &u, m.gradient.values().to_vec(), tol)?;
    emit_report(
        a.out.as_deref(),
        config,
        GradientBody {
            field: m.gradient.values().to_vec(),
            s: a.s,
            norm: m.norm,
            mode: m.mode,
            certificate_residual: m.certificate_residual,
            admissible: checked.admissible,
            slack: checked.slack,
        },
    )
}

fn verify_osc(config: RunConfig<'_>, a: &VerifyOscArgs, tol: f64) -> Result<()> {
    require_inputs(&[&a.space, &a.field, &a.grad])?;
    if let Some(s) = a.s {
        positive("s", s)?;
    }
    if a.centers == 0 || a.radii == 0 {
        return Err(Error::Domain(
            "--centers and --radii must be positive".into(),
        ));
    }
    let space = load_space(&a.space)?;
    let s = a.s.unwrap_or(space.s());
    let u = load_field(&space, &a.field)?;
    let g = GradientField::check(&space, &u, read_json::<FieldDocument>(&a.grad)?.field, tol)?;
    let scan = ScanConfig {
        centers: a.centers,
        radii: a.radii,
        seed: a.seed,
    };
    let report = best_constant_scan_with_tol(&space, &u, &g, s, scan, tol)?;
    let violations = report.violations;
    emit_report(a.out.as_deref(), config, report)?;
    if violations > 0 {
        return Err(Error::InvariantViolation(format!(
            "{violations} balls have zero gradient energy on 2B but positive oscillation"
        )));
    }
    Ok(())
}

/// `a..b` (inclusive), `a..=b`, or `a,b,c`.
pub fn parse_levels(text: &str) -> Result<Vec<usize>> {
    let bad = || Error::Domain(format!("cannot parse levels '{text}'"));
    let num = |t: &str| t.trim().parse::<usize>().map_err(|_| bad());
    let levels = if let Some((lo, hi)) = text.split_once("..") {
        let hi = hi.strip_prefix('=').unwrap_or(hi);
        let (lo, hi) = (num(lo)?, num(hi)?);
        if lo > hi {
            return Err(bad());
        }
        (lo..=hi).collect()
    } else {
        text.split(',').map(num).collect::<Result<Vec<_>>>()?
    };
    if levels.is_empty() {
        return Err(bad());
    }
    Ok(levels)
}

pub fn parse_spike_point(text: &str) -> Result<SpikePoint> {
    if text == "first" {
        return Ok(SpikePoint::First);
    }
    let coords = text.strip_prefix("nearest:").ok_or_else(|| {
        Error::Domain(format!(
            "x0 must be 'first' or 'nearest:<coords>', got '{text}'"
        ))
    })?;
    let parsed = coords
        .split(',')
        .map(|c| c.trim().parse::<f64>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|_| Error::Domain(format!("cannot parse coordinates '{coords}'")))?;
    Ok(SpikePoint::Nearest(parsed))
}

#[derive(Serialize)]
struct TrendRow {
    level: usize,
    grad_norm: String,
    field_norm: String,
    osc_at_rho: String,
    points: usize,
    resolution_h: String,
    x0: usize,
    system: String,
    rho: String,
    s: String,
}

fn fmt_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

fn probe(a: &ProbeArgs) -> Result<()> {
    let which: Builtin = a.system.parse()?;
    let levels = parse_levels(&a.levels)?;
    let x0 = parse_spike_point(&a.x0)?;
    positive("rho", a.rho)?;
    let s = builtin(which, 0)?.space.s();
    let rows = conjecture_probe(which, &levels, &x0, a.rho)?;
    let table: Vec<TrendRow> = rows
        .iter()
        .map(|r| TrendRow {
            level: r.level,
            grad_norm: fmt_float(r.grad_norm),
            field_norm: fmt_float(r.field_norm),
            osc_at_rho: fmt_float(r.osc_at_rho),
            points: r.points,
            resolution_h: fmt_float(r.resolution_h),
            x0: r.x0,
            system: which.to_string(),
            rho: fmt_float(a.rho),
            s: fmt_float(s),
        })
        .collect();
    emit(a.out.as_deref(), &to_csv(&table)?)
}
