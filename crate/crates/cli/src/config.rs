//! Run configuration: flat `key = value` settings layered from the system
//! file's `option` lines, a config file, then command-line flags.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;

use locpass_core::approx::{BernsteinErrorMode, RemainderMode};
use locpass_core::expr::SystemModel;
use locpass_core::pipeline::{ApproxChoice, PipelineConfig, Task};
use locpass_core::sos::{make_supply, Index, SupplyKind, SupplyParams, TaylorVariant};
use nalgebra::DMatrix;

use crate::CliError;

/// Keys accepted in config files and `option` lines.
pub const KEYS: &[&str] = &[
    "mode",
    "approx",
    "order",
    "variant",
    "vdeg",
    "vmin",
    "sdeg",
    "tol",
    "max_iter",
    "seed",
    "samples",
    "out",
    "radii",
    "radius",
    "jobs",
    "bisection",
    "gamma",
    "rho",
    "nu",
    "q",
    "s",
    "r",
    "remainder",
    "subdivisions",
    "bernstein_error",
    "verbose",
];

/// Raw settings; later layers overwrite earlier ones.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Settings(pub BTreeMap<String, String>);

impl Settings {
    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<(), CliError> {
        if !KEYS.contains(&key) {
            return Err(CliError::Usage(format!("unknown setting `{key}`")));
        }
        self.0.insert(key.to_string(), value.into());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    /// Overlay `other` on top of `self`.
    pub fn merge(&mut self, other: &Settings) {
        for (k, v) in &other.0 {
            self.0.insert(k.clone(), v.clone());
        }
    }

    /// Parse a config file: one `key = value` per line, `#` comments.
    pub fn parse_file(text: &str) -> Result<Settings, CliError> {
        let mut s = Settings::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("config line {}: expected key = value", lineno + 1)))?;
            s.set(k.trim(), v.trim())?;
        }
        Ok(s)
    }

    fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        self.get(key)
            .map(|v| v.parse::<T>().map_err(|_| CliError::Usage(format!("invalid value `{v}` for `{key}`"))))
            .transpose()
    }
}

/// Verification target.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Stability,
    /// General `(Q, S, R)` dissipativity.
    Dissipativity,
    Passivity,
    Ofp,
    Ifp,
    Qsr,
    L2Gain,
}

impl FromStr for Mode {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self, CliError> {
        Ok(match s {
            "stability" => Mode::Stability,
            "dissipativity" => Mode::Dissipativity,
            "passivity" => Mode::Passivity,
            "ofp" => Mode::Ofp,
            "ifp" => Mode::Ifp,
            "qsr" => Mode::Qsr,
            "l2gain" => Mode::L2Gain,
            other => return Err(CliError::Usage(format!("unknown mode `{other}`"))),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub pipeline: PipelineConfig,
    pub out: Option<PathBuf>,
    pub radii: Vec<f64>,
    pub radius: Option<f64>,
    pub jobs: Option<usize>,
    settings: Settings,
}

fn parse_matrix(key: &str, v: &str) -> Result<DMatrix<f64>, CliError> {
    let rows: Vec<Vec<f64>> = v
        .split(';')
        .map(|r| {
            r.split(',')
                .map(|x| x.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| CliError::Usage(format!("invalid matrix `{v}` for `{key}`")))
        })
        .collect::<Result<_, _>>()?;
    let cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != cols) {
        return Err(CliError::Usage(format!("ragged matrix for `{key}`")));
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

/// `a,b,c` or `start:stop:step` (inclusive).
pub fn parse_radii(v: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Usage(format!("invalid radius list `{v}`"));
    let v = v.trim();
    if v.is_empty() {
        return Ok(vec![]);
    }
    if v.contains(':') {
        let parts: Vec<f64> = v.split(':').map(|x| x.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|_| bad())?;
        let [a, b, step] = parts[..] else { return Err(bad()) };
        if step <= 0.0 || b < a {
            return Err(bad());
        }
        let count = ((b - a) / step + 1e-9).floor() as usize;
        return Ok((0..=count).map(|i| a + step * i as f64).collect());
    }
    v.split(',').map(|x| x.trim().parse::<f64>().map_err(|_| bad())).collect()
}

impl RunConfig {
    /// Resolve settings; `default_mode` applies when `mode` is unset.
    pub fn resolve(s: &Settings, default_mode: Mode) -> Result<RunConfig, CliError> {
        let mode = match s.get("mode") {
            Some(m) => m.parse()?,
            None => default_mode,
        };
        let mut p = PipelineConfig::default();
        let order: Option<u32> = s.parsed("order")?;
        p.approx = match s.get("approx").unwrap_or("auto") {
            "auto" => ApproxChoice::Auto,
            "exact" => ApproxChoice::Exact,
            "taylor" => ApproxChoice::Taylor { order: order.unwrap_or(5) },
            "bernstein" => ApproxChoice::Bernstein { degree: order.unwrap_or(6) },
            other => return Err(CliError::Usage(format!("unknown approximation `{other}`"))),
        };
        p.variant = match s.get("variant").unwrap_or("box") {
            "box" => TaylorVariant::Box,
            "ellipsoid" => TaylorVariant::Ellipsoid,
            other => return Err(CliError::Usage(format!("unknown variant `{other}`"))),
        };
        if let Some(d) = s.parsed("vdeg")? {
            p.build.v_degree = d;
        }
        if let Some(d) = s.parsed("vmin")? {
            p.build.v_min_degree = d;
        }
        if let Some(d) = s.parsed::<u32>("sdeg")? {
            p.build.region_mult_degree = Some(d);
            p.build.error_mult_degree = Some(d);
        }
        if let Some(t) = s.parsed::<f64>("tol")? {
            if t <= 0.0 {
                return Err(CliError::Usage("tol must be positive".into()));
            }
            p.solver.tol = t;
        }
        if let Some(k) = s.parsed("max_iter")? {
            p.solver.max_iter = k;
        }
        if let Some(v) = s.parsed("verbose")? {
            p.solver.verbose = v;
        }
        if let Some(v) = s.parsed("seed")? {
            p.seed = v;
        }
        if let Some(v) = s.parsed("samples")? {
            p.samples = v;
        }
        if let Some(v) = s.parsed("bisection")? {
            p.bisection = v;
        }
        if let Some(v) = s.parsed("subdivisions")? {
            p.subdivisions = v;
        }
        p.remainder_mode = match s.get("remainder").unwrap_or("per-beta") {
            "per-beta" => RemainderMode::PerBeta,
            "uniform" => RemainderMode::Uniform,
            other => return Err(CliError::Usage(format!("unknown remainder mode `{other}`"))),
        };
        p.bernstein_error = match s.get("bernstein_error").unwrap_or("empirical") {
            "empirical" => BernsteinErrorMode::Empirical,
            "lipschitz" => BernsteinErrorMode::Lipschitz,
            other => return Err(CliError::Usage(format!("unknown Bernstein error mode `{other}`"))),
        };
        let radii = s.get("radii").map(parse_radii).transpose()?.unwrap_or_default();
        let radius: Option<f64> = s.parsed("radius")?;
        if radius.is_some_and(|r| r <= 0.0) {
            return Err(CliError::Usage("radius must be positive".into()));
        }
        let jobs: Option<usize> = s.parsed("jobs")?;
        if jobs == Some(0) {
            return Err(CliError::Usage("jobs must be at least 1".into()));
        }
        Ok(RunConfig {
            mode,
            pipeline: p,
            out: s.get("out").map(PathBuf::from),
            radii,
            radius,
            jobs,
            settings: s.clone(),
        })
    }

    /// The model with `radius` applied, if set.
    pub fn apply_radius(&self, model: &SystemModel) -> SystemModel {
        match self.radius {
            Some(r) => model.with_state_ball(r),
            None => model.clone(),
        }
    }

    /// Task for `model`; `optimize` leaves the OFP/IFP index as a decision.
    pub fn task(&self, model: &SystemModel, optimize: bool) -> Result<Task, CliError> {
        let s = &self.settings;
        let (m, p) = (model.m(), model.p());
        let fixed = |key: &str| -> Result<Option<Index>, CliError> {
            if optimize {
                return Ok(Some(Index::Decision));
            }
            match s.parsed::<f64>(key)? {
                Some(v) => Ok(Some(Index::Fixed(v))),
                None => Err(CliError::Usage(format!("mode needs `{key}`; use `index` to maximize it"))),
            }
        };
        let matrix = |key: &str| s.get(key).map(|v| parse_matrix(key, v)).transpose();
        let mut params = SupplyParams { m, p, ..Default::default() };
        let kind = match self.mode {
            Mode::Stability if !optimize => return Ok(Task::Stability),
            Mode::Ofp => {
                params.rho = fixed("rho")?;
                SupplyKind::Ofp
            }
            Mode::Ifp => {
                params.nu = fixed("nu")?;
                SupplyKind::Ifp
            }
            _ if optimize => return Err(CliError::Usage("`index` needs mode ofp or ifp".into())),
            Mode::Passivity => SupplyKind::Passivity,
            Mode::Qsr | Mode::Dissipativity => {
                params.q = matrix("q")?;
                params.s = matrix("s")?;
                params.r = matrix("r")?;
                SupplyKind::Qsr
            }
            Mode::L2Gain => {
                params.gamma = s.parsed("gamma")?;
                SupplyKind::L2Gain
            }
            Mode::Stability => unreachable!(),
        };
        if (m == 0 || p == 0) && kind != SupplyKind::Qsr {
            return Err(CliError::Usage("dissipativity modes need inputs and outputs".into()));
        }
        let w = make_supply(kind, &params).map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(Task::Dissipativity(w))
    }
}
