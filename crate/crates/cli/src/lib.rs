//! The `locpass` command line: verify, index, sweep and export.

pub mod config;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use locpass_core::approx::ApproxError;
use locpass_core::cert::Certificate;
use locpass_core::expr::{parse_system, SystemModel};
use locpass_core::pipeline::{export, run, PipelineError, RunOutcome, Task};
use locpass_core::sos::{IndexSymbol, SosError};
use locpass_sdp::export_sdpa;
use rayon::prelude::*;
use serde_json::json;
use sha2::{Digest, Sha256};
use thiserror::Error;

use config::{Mode, RunConfig, Settings};

pub const EXIT_CERTIFIED: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NOT_CERTIFIED: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Io { .. } => EXIT_USAGE,
            CliError::Internal(_) => EXIT_INTERNAL,
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Approx(ApproxError::Interval(_)) => CliError::Internal(e.to_string()),
            PipelineError::Approx(_) | PipelineError::Config(_) => CliError::Usage(e.to_string()),
            PipelineError::Sos(SosError::Options(_) | SosError::Supply(_) | SosError::AsymmetricSupply(_) | SosError::Region(_)) => {
                CliError::Usage(e.to_string())
            }
            _ => CliError::Internal(e.to_string()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "locpass", version, about = "Local stability, passivity and passivity indices via SOS programming")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Certify stability or dissipativity; writes the certificate JSON.
    Verify(Common),
    /// Maximize the OFP or IFP index.
    Index(Common),
    /// OFP/IFP index over a list of state-ball radii; writes `r,index,status` CSV.
    Sweep(SweepArgs),
    /// Write the SDP in SDPA sparse format without solving.
    Export(Common),
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// System description file.
    system: PathBuf,
    /// Flat `key = value` settings; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    mode: Option<String>,
    /// auto, exact, taylor or bernstein.
    #[arg(long)]
    approx: Option<String>,
    /// Taylor order or Bernstein degree.
    #[arg(long)]
    order: Option<u32>,
    /// Taylor error encoding: box or ellipsoid.
    #[arg(long)]
    variant: Option<String>,
    /// Degree of the storage function.
    #[arg(long)]
    vdeg: Option<u32>,
    /// Degree of the S-procedure multipliers (automatic by default).
    #[arg(long)]
    sdeg: Option<u32>,
    /// Solver tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Seed of the validation sampler.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    samples: Option<usize>,
    /// Output path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replace the state region by the ball of this radius.
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Find the index by bisection on feasibility problems.
    #[arg(long)]
    bisection: bool,
    /// Print solver iterations to stderr.
    #[arg(long)]
    verbose: bool,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// `a,b,c` or `start:stop:step`.
    #[arg(long)]
    radii: Option<String>,
    /// Worker threads (default: logical cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// Directory for one certificate per certified row.
    #[arg(long)]
    certs: Option<PathBuf>,
}

impl Common {
    fn flag_settings(&self) -> Result<Settings, CliError> {
        let mut s = Settings::default();
        let strs = [
            ("mode", self.mode.clone()),
            ("approx", self.approx.clone()),
            ("variant", self.variant.clone()),
            ("order", self.order.map(|v| v.to_string())),
            ("vdeg", self.vdeg.map(|v| v.to_string())),
            ("sdeg", self.sdeg.map(|v| v.to_string())),
            ("tol", self.tol.map(|v| v.to_string())),
            ("seed", self.seed.map(|v| v.to_string())),
            ("samples", self.samples.map(|v| v.to_string())),
            ("out", self.out.as_ref().map(|p| p.display().to_string())),
            ("radius", self.radius.map(|v| v.to_string())),
            ("rho", self.rho.map(|v| v.to_string())),
            ("nu", self.nu.map(|v| v.to_string())),
            ("gamma", self.gamma.map(|v| v.to_string())),
            ("bisection", self.bisection.then(|| "true".to_string())),
            ("verbose", self.verbose.then(|| "true".to_string())),
        ];
        for (k, v) in strs {
            if let Some(v) = v {
                s.set(k, v)?;
            }
        }
        Ok(s)
    }

    /// Model plus settings layered as system options < config file < flags.
    fn load(&self, extra: Settings, default_mode: Mode) -> Result<(SystemModel, RunConfig), CliError> {
        let text = read(&self.system)?;
        let model = parse_system(&text).map_err(|e| CliError::Usage(format!("{}: {e}", self.system.display())))?;
        let mut s = Settings::default();
        for (k, v) in &model.options {
            s.set(k, v.clone())?;
        }
        if let Some(c) = &self.config {
            s.merge(&Settings::parse_file(&read(c)?)?);
        }
        s.merge(&self.flag_settings()?);
        s.merge(&extra);
        let cfg = RunConfig::resolve(&s, default_mode)?;
        Ok((model, cfg))
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

/// Hex SHA-256 of a certificate's JSON text.
pub fn certificate_hash(cert: &Certificate) -> String {
    hex::encode(Sha256::digest(cert.to_json().as_bytes()))
}

/// Output streams, injectable for tests.
pub struct Io<'a> {
    pub out: &'a mut dyn std::io::Write,
    pub err: &'a mut dyn std::io::Write,
}

/// Run with `args` (including the program name); returns the exit code.
pub fn main_with_args<I, T>(args: I, io: &mut Io) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(io.err, "{e}");
                return EXIT_USAGE;
            }
            let _ = write!(io.out, "{e}");
            return EXIT_CERTIFIED;
        }
    };
    let result = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| dispatch(cli, io)));
    match result {
        Ok(Ok(code)) => code,
        Ok(Err(e)) => {
            let _ = writeln!(io.err, "error: {e}");
            e.exit_code()
        }
        Err(_) => {
            let _ = writeln!(io.err, "error: internal failure");
            EXIT_INTERNAL
        }
    }
}

fn dispatch(cli: Cli, io: &mut Io) -> Result<i32, CliError> {
    match cli.command {
        Command::Verify(c) => cmd_verify(&c, io, false),
        Command::Index(c) => cmd_verify(&c, io, true),
        Command::Sweep(a) => cmd_sweep(&a, io),
        Command::Export(c) => cmd_export(&c, io),
    }
}

fn diagnostic(out: &RunOutcome) -> serde_json::Value {
    json!({
        "certified": false,
        "reason": out.reason,
        "status": out.status,
        "gram_dimension": out.gram_dimension,
        "num_constraints": out.num_constraints,
        "num_free": out.num_free,
        "report": out.certificate.as_ref().and_then(|c| c.report.as_ref()),
    })
}

/// Certificate JSON on `--out` (summary on stdout), or on stdout (summary on stderr).
fn emit(cfg: &RunConfig, io: &mut Io, body: &str, summary: &str) -> Result<(), CliError> {
    match &cfg.out {
        Some(p) => {
            write(p, body)?;
            let _ = io.out.write_all(summary.as_bytes());
        }
        None => {
            let _ = writeln!(io.out, "{body}");
            let _ = io.err.write_all(summary.as_bytes());
        }
    }
    Ok(())
}

fn run_task(model: &SystemModel, cfg: &RunConfig, optimize: bool) -> Result<(Task, RunOutcome), CliError> {
    let model = cfg.apply_radius(model);
    let task = cfg.task(&model, optimize)?;
    match run(&model, &task, &cfg.pipeline) {
        Ok(out) => Ok((task, out)),
        Err(PipelineError::Sos(e @ SosError::InfeasibleEqualities { .. })) => Ok((
            task,
            RunOutcome {
                certified: false,
                reason: Some(e.to_string()),
                certificate: None,
                status: None,
                gram_dimension: 0,
                num_constraints: 0,
                num_free: 0,
            },
        )),
        Err(e) => Err(e.into()),
    }
}

fn cmd_verify(c: &Common, io: &mut Io, optimize: bool) -> Result<i32, CliError> {
    let default_mode = if optimize { Mode::Ofp } else { Mode::Stability };
    let (model, cfg) = c.load(Settings::default(), default_mode)?;
    let (_, out) = run_task(&model, &cfg, optimize)?;
    let mut summary = String::new();
    if out.certified {
        let cert = out.certificate.as_ref().expect("certified runs carry a certificate");
        let _ = writeln!(summary, "certified: {:?}", cert.kind);
        if let Some(ix) = &cert.index {
            match ix.bracket_width {
                Some(w) => {
                    let _ = writeln!(summary, "{} = {:.6} (bracket width {:.1e})", symbol_name(ix.symbol), tidy(ix.value), w);
                }
                None => {
                    let _ = writeln!(summary, "{} = {:.6}", symbol_name(ix.symbol), tidy(ix.value));
                }
            }
        }
        let _ = writeln!(summary, "sha256 = {}", certificate_hash(cert));
        emit(&cfg, io, &cert.to_json(), &summary)?;
        Ok(EXIT_CERTIFIED)
    } else {
        let _ = writeln!(summary, "not certified: {}", out.reason.as_deref().unwrap_or("unknown"));
        let body = serde_json::to_string_pretty(&diagnostic(&out)).expect("diagnostic serializes");
        emit(&cfg, io, &body, &summary)?;
        Ok(EXIT_NOT_CERTIFIED)
    }
}

/// Round to the printed precision so tiny negatives do not print as `-0`.
fn tidy(v: f64) -> f64 {
    (v * 1e6).round() / 1e6 + 0.0
}

fn symbol_name(s: IndexSymbol) -> &'static str {
    match s {
        IndexSymbol::Rho => "rho",
        IndexSymbol::Nu => "nu",
    }
}

/// One sweep row: `(index, status, certificate)`.
fn sweep_row(model: &SystemModel, cfg: &RunConfig, r: f64) -> (Option<f64>, String, Option<Certificate>) {
    let mut row_cfg = cfg.clone();
    row_cfg.radius = Some(r);
    match run_task(model, &row_cfg, true) {
        Ok((_, out)) if out.certified => {
            let cert = out.certificate.expect("certified runs carry a certificate");
            (cert.index.as_ref().map(|i| i.value), "certified".into(), Some(cert))
        }
        Ok((_, out)) => {
            let status = match (out.status, &out.certificate) {
                (_, Some(_)) => "invalid".to_string(),
                (Some(s), None) => format!("{s:?}").to_lowercase(),
                (None, None) => "infeasible".to_string(),
            };
            (None, status, None)
        }
        Err(_) => (None, "error".into(), None),
    }
}

fn cmd_sweep(a: &SweepArgs, io: &mut Io) -> Result<i32, CliError> {
    let mut extra = Settings::default();
    if let Some(r) = &a.radii {
        extra.set("radii", r.clone())?;
    }
    if let Some(j) = a.jobs {
        extra.set("jobs", j.to_string())?;
    }
    let (model, cfg) = a.common.load(extra, Mode::Ofp)?;
    if cfg.radii.is_empty() {
        return Err(CliError::Usage("sweep needs a non-empty radius list (--radii)".into()));
    }
    if cfg.radii.iter().any(|&r| !(r > 0.0)) || cfg.radii.windows(2).any(|w| w[1] < w[0]) {
        return Err(CliError::Usage("radii must be positive and ascending".into()));
    }
    // Validates mode and supply before spending solver time.
    cfg.task(&model, true)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cfg.jobs {
        pool = pool.num_threads(j);
    }
    let pool = pool.build().map_err(|e| CliError::Internal(e.to_string()))?;
    let rows: Vec<_> = pool.install(|| cfg.radii.par_iter().map(|&r| sweep_row(&model, &cfg, r)).collect());
    let mut csv = String::from("r,index,status\n");
    for (&r, (ix, status, _)) in cfg.radii.iter().zip(&rows) {
        let ix = ix.map(|v| format!("{:.6}", tidy(v))).unwrap_or_default();
        let _ = writeln!(csv, "{r},{ix},{status}");
    }
    if let Some(dir) = &a.certs {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.clone(), source })?;
        for (&r, (_, _, cert)) in cfg.radii.iter().zip(&rows) {
            if let Some(c) = cert {
                write(&dir.join(format!("r{r}.json")), &c.to_json())?;
            }
        }
    }
    match &cfg.out {
        Some(p) => write(p, &csv)?,
        None => {
            let _ = io.out.write_all(csv.as_bytes());
        }
    }
    Ok(EXIT_CERTIFIED)
}

fn cmd_export(c: &Common, io: &mut Io) -> Result<i32, CliError> {
    let (model, cfg) = c.load(Settings::default(), Mode::Stability)?;
    let model = cfg.apply_radius(&model);
    let task = cfg.task(&model, matches!(cfg.mode, Mode::Ofp | Mode::Ifp) && c.rho.is_none() && c.nu.is_none())?;
    let (_, compiled) = export(&model, &task, &cfg.pipeline)?;
    let path = cfg.out.clone().unwrap_or_else(|| c.system.with_extension("dat-s"));
    write(&path, &export_sdpa(&compiled.sdp))?;
    let sdp = &compiled.sdp;
    let _ = writeln!(
        io.out,
        "constraints {}\nblocks {}\ngram_dimension {}\nfree {}\nwritten {}",
        sdp.constraints.len(),
        sdp.blocks.len(),
        sdp.gram_dimension(),
        sdp.num_free,
        path.display()
    );
    Ok(EXIT_CERTIFIED)
}
