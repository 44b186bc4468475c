//! Experiment drivers behind the `tbc` command line tool.
//!
//! A run is described by a [`RunConfig`], read from a TOML file of
//! `key = value` lines and optionally patched by `key=value` overrides:
//!
//! ```text
//! domain       = [-10.0, 10.0, -10.0, 10.0]   # x_l, x_r, x_b, x_t
//! n            = 64            # sets n1 and n2; n1 / n2 override it
//! t_max        = 1.5
//! dt           = 1e-3          # or nt = 1501, the number of time levels
//! engine       = "tbc"         # "hf" or "tbc"
//! method       = "np"          # hf: "cq" | "cp"; tbc: "cq" | "np"
//! stepper      = "tr"          # "bdf1" | "bdf2" | "tr" (no bdf2 for tbc)
//! pade_order   = 30
//! profile      = "cg"          # "cg" | "hg"
//! profile_type = "iia"         # "iia" | "iib"
//! c0           = 8.0
//! output       = "out"
//! dump_times   = [0.0, 0.75, 1.5]
//! dt_set       = [0.01171875, 0.005859375]   # or nt_set = [129, 257]
//! ```
//!
//! Every key is optional; missing keys take the desk-scale defaults of
//! [`RunConfig::default`]. The error of a run at `t_j` is the LGL quadrature
//! of `|u - u_num|^2` over the rectangle, normalized by the norm of the
//! initial profile.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::exact::{profile_from_table, Family, ProfileSpec, ProfileType};
use crate::hf::{HfConfig, HfFamily, HfSolver};
use crate::kron::KronOperator;
use crate::rational::{cq_weights, Stepper};
use crate::spectral::{CMat, Discretization, DomainMap, RMat};
use crate::tbc::{TbcConfig, TbcFamily, TbcSolver};
use crate::Evolution;

/// Boundary treatment.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Engine {
    /// High-frequency approximate boundary conditions.
    Hf,
    /// Exact transparent boundary conditions.
    Tbc,
}

/// Realization of the half-order operators.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    /// Convolution quadrature.
    Cq,
    /// Padé auxiliary equations of the high-frequency conditions.
    Cp,
    /// Two-time Padé scheme of the transparent conditions.
    Np,
}

impl Engine {
    fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hf" => Ok(Engine::Hf),
            "tbc" => Ok(Engine::Tbc),
            other => Err(Error::Config(format!("unknown engine '{other}'"))),
        }
    }
}

impl Method {
    fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cq" => Ok(Method::Cq),
            "cp" => Ok(Method::Cp),
            "np" => Ok(Method::Np),
            other => Err(Error::Config(format!("unknown method '{other}'"))),
        }
    }
}

/// Number of points per direction of the uniform grid written by
/// [`dump_field`].
pub const DUMP_GRID: usize = 256;

/// Lower clamp of the `log10|u|` column of field dumps.
pub const LOG_FLOOR: f64 = -16.0;

/// Validated description of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    /// `[x_l, x_r, x_b, x_t]`.
    pub domain: [f64; 4],
    pub n1: usize,
    pub n2: usize,
    pub t_max: f64,
    pub dt: f64,
    pub engine: Engine,
    pub method: Method,
    pub stepper: Stepper,
    pub pade_order: usize,
    pub profile: Family,
    pub profile_type: ProfileType,
    pub c0: f64,
    pub output: PathBuf,
    pub dump_times: Vec<f64>,
    /// Time steps of a convergence study.
    pub dt_set: Vec<f64>,
}

impl Default for RunConfig {
    /// Desk-scale defaults: `N = 64` on `(-10, 10)^2`, `T_max = 1.5`,
    /// `dt = 1e-3`, NP-TR with Padé order 30, chirped-Gaussian IIA profile
    /// with `c0 = 8` and the study steps `2^-7 .. 2^-11` times `T_max`.
    fn default() -> Self {
        let t_max = 1.5;
        Self {
            domain: [-10.0, 10.0, -10.0, 10.0],
            n1: 64,
            n2: 64,
            t_max,
            dt: 1e-3,
            engine: Engine::Tbc,
            method: Method::Np,
            stepper: Stepper::Tr,
            pade_order: 30,
            profile: Family::Cg,
            profile_type: ProfileType::IIA,
            c0: 8.0,
            output: PathBuf::from("out"),
            dump_times: Vec::new(),
            dt_set: (7..=11).map(|k| t_max / f64::from(1u32 << k)).collect(),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    domain: Option<[f64; 4]>,
    n: Option<usize>,
    n1: Option<usize>,
    n2: Option<usize>,
    t_max: Option<f64>,
    dt: Option<f64>,
    nt: Option<usize>,
    engine: Option<String>,
    method: Option<String>,
    stepper: Option<String>,
    pade_order: Option<usize>,
    profile: Option<String>,
    profile_type: Option<String>,
    c0: Option<f64>,
    output: Option<PathBuf>,
    dump_times: Option<Vec<f64>>,
    dt_set: Option<Vec<f64>>,
    nt_set: Option<Vec<usize>>,
}

/// Number of steps `T_max / dt`, which must be an integer.
fn step_count(t_max: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::Config(format!("time step must be positive, got {dt}")));
    }
    let ratio = t_max / dt;
    let steps = ratio.round();
    if steps < 1.0 || (ratio - steps).abs() > 1e-9 * steps.max(1.0) {
        return Err(Error::Config(format!(
            "T_max = {t_max} is not a whole number of steps dt = {dt}"
        )));
    }
    Ok(steps as usize)
}

fn dt_from_levels(t_max: f64, nt: usize) -> Result<f64> {
    if nt < 2 {
        return Err(Error::Config(format!("nt must be at least 2, got {nt}")));
    }
    Ok(t_max / (nt - 1) as f64)
}

impl RunConfig {
    /// Parameters of the long evolution runs: `(-10, 10)^2`, `T_max = 5`,
    /// `dt = 1e-3` and 200 x 200 LGL points.
    pub fn full_evolution() -> Self {
        Self {
            n1: 199,
            n2: 199,
            t_max: 5.0,
            dt: 1e-3,
            dt_set: (8..=16).map(|k| 5.0 / f64::from((1u32 << k) - 1)).collect(),
            ..Self::default()
        }
    }

    /// Parses a TOML document and applies `key=value` overrides on top of it.
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(format!("invalid config file: {e}")))?;
        for item in overrides {
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override '{item}' is not key=value")))?;
            let key = key.trim();
            let value = value.trim();
            let parsed: toml::Table = format!("{key} = {value}")
                .parse()
                .or_else(|_| format!("{key} = {}", toml::Value::String(value.into())).parse())
                .map_err(|e: toml::de::Error| Error::Config(format!("invalid override '{item}': {e}")))?;
            table.extend(parsed);
        }
        let raw: RawConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(format!("invalid config: {e}")))?;
        Self::from_raw(raw)
    }

    /// Reads a config file and applies overrides; without a file only the
    /// overrides are applied to the defaults.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let text = match path {
            Some(p) => fs::read_to_string(p)
                .map_err(|e| Error::Config(format!("cannot read config {}: {e}", p.display())))?,
            None => String::new(),
        };
        Self::from_toml(&text, overrides)
    }

    fn from_raw(raw: RawConfig) -> Result<Self> {
        let d = Self::default();
        let t_max = raw.t_max.unwrap_or(d.t_max);
        let dt = match (raw.dt, raw.nt) {
            (Some(dt), Some(nt)) => {
                let steps = step_count(t_max, dt)?;
                if steps + 1 != nt {
                    return Err(Error::Config(format!(
                        "nt = {nt} is inconsistent with T_max / dt + 1 = {}",
                        steps + 1
                    )));
                }
                dt
            }
            (Some(dt), None) => dt,
            (None, Some(nt)) => dt_from_levels(t_max, nt)?,
            (None, None) => d.dt,
        };
        let dt_set = match (raw.dt_set, raw.nt_set) {
            (Some(_), Some(_)) => return Err(Error::Config("give either dt_set or nt_set".into())),
            (Some(s), None) => s,
            (None, Some(s)) => s
                .into_iter()
                .map(|nt| dt_from_levels(t_max, nt))
                .collect::<Result<_>>()?,
            (None, None) => (7..=11).map(|k| t_max / f64::from(1u32 << k)).collect(),
        };
        let cfg = Self {
            domain: raw.domain.unwrap_or(d.domain),
            n1: raw.n1.or(raw.n).unwrap_or(d.n1),
            n2: raw.n2.or(raw.n).unwrap_or(d.n2),
            t_max,
            dt,
            engine: raw.engine.as_deref().map_or(Ok(d.engine), Engine::parse)?,
            method: raw.method.as_deref().map_or(Ok(d.method), Method::parse)?,
            stepper: raw.stepper.as_deref().map_or(Ok(d.stepper), Stepper::parse)?,
            pade_order: raw.pade_order.unwrap_or(d.pade_order),
            profile: raw.profile.as_deref().map_or(Ok(d.profile), Family::parse)?,
            profile_type: raw
                .profile_type
                .as_deref()
                .map_or(Ok(d.profile_type), ProfileType::parse)?,
            c0: raw.c0.unwrap_or(d.c0),
            output: raw.output.unwrap_or(d.output),
            dump_times: raw.dump_times.unwrap_or_default(),
            dt_set,
        };
        cfg.validate()?;
        for &dt in &cfg.dt_set {
            step_count(cfg.t_max, dt)?;
        }
        Ok(cfg)
    }

    /// Checks the geometry, the step counts and the engine/method/stepper
    /// combination.
    pub fn validate(&self) -> Result<()> {
        let [xl, xr, xb, xt] = self.domain;
        DomainMap::new(xl, xr, xb, xt).map_err(|e| Error::Config(e.to_string()))?;
        if self.n1 < 2 || self.n2 < 2 {
            return Err(Error::Config(format!(
                "polynomial degrees must be at least 2, got {} x {}",
                self.n1, self.n2
            )));
        }
        if !(self.t_max > 0.0) || !self.t_max.is_finite() {
            return Err(Error::Config(format!("T_max must be positive, got {}", self.t_max)));
        }
        step_count(self.t_max, self.dt)?;
        if let Some(t) = self.dump_times.iter().find(|t| !(**t >= 0.0 && **t <= self.t_max)) {
            return Err(Error::Config(format!("dump time {t} lies outside [0, {}]", self.t_max)));
        }
        if !(self.c0 >= 0.0) || !self.c0.is_finite() {
            return Err(Error::Config(format!("c0 must be non-negative, got {}", self.c0)));
        }
        match (self.engine, self.method) {
            (Engine::Hf, Method::Np) => {
                return Err(Error::Config("method np requires engine tbc".into()));
            }
            (Engine::Tbc, Method::Cp) => {
                return Err(Error::Config("method cp requires engine hf".into()));
            }
            _ => {}
        }
        if self.engine == Engine::Tbc && self.stepper == Stepper::Bdf2 {
            return Err(Error::Config("the transparent boundary engine supports bdf1 and tr only".into()));
        }
        if matches!(self.method, Method::Cp | Method::Np) && self.pade_order == 0 {
            return Err(Error::Config("Pade order must be at least 1".into()));
        }
        Ok(())
    }

    /// Number of time steps `N_t - 1`.
    pub fn steps(&self) -> usize {
        step_count(self.t_max, self.dt).unwrap_or(0)
    }

    /// Copy with another time step.
    pub fn with_dt(&self, dt: f64) -> Self {
        Self { dt, ..self.clone() }
    }

    /// Variant label such as `NP30-TR`, `CQ-BDF2` or `TBC-CQ-TR`.
    pub fn label(&self) -> String {
        let s = self.stepper.name().to_ascii_uppercase();
        match (self.engine, self.method) {
            (Engine::Hf, Method::Cq) => format!("CQ-{s}"),
            (Engine::Hf, _) => format!("CP{}-{s}", self.pade_order),
            (Engine::Tbc, Method::Cq) => format!("TBC-CQ-{s}"),
            (Engine::Tbc, _) => format!("NP{}-{s}", self.pade_order),
        }
    }

    /// The tabulated initial profile.
    pub fn profile_spec(&self) -> ProfileSpec {
        profile_from_table(self.profile, self.profile_type, self.c0)
    }

    /// Spatial discretization of the run.
    pub fn discretization(&self) -> Result<Discretization> {
        let [xl, xr, xb, xt] = self.domain;
        Discretization::new(DomainMap::new(xl, xr, xb, xt)?, self.n1, self.n2)
    }
}

/// A time-stepping engine chosen at run time.
#[derive(Debug)]
pub enum Solver {
    Hf(HfSolver),
    Tbc(TbcSolver),
}

impl Solver {
    /// Builds the engine selected by `cfg` from the coefficients `u0`.
    pub fn new(cfg: &RunConfig, disc: &Discretization, u0: CMat) -> Result<Self> {
        let stepper = cfg.stepper;
        let (k, dt) = (cfg.pade_order, cfg.dt);
        match (cfg.engine, cfg.method) {
            (Engine::Hf, m) => {
                let family = if m == Method::Cq { HfFamily::Cq } else { HfFamily::Cp };
                let c = HfConfig { family, stepper, k, dt };
                Ok(Solver::Hf(HfSolver::new(c, disc, u0)?))
            }
            (Engine::Tbc, m) => {
                let family = if m == Method::Cq { TbcFamily::Cq } else { TbcFamily::Np };
                let c = TbcConfig { family, stepper, k, dt };
                Ok(Solver::Tbc(TbcSolver::new(c, disc, u0)?))
            }
        }
    }

    /// Left-hand side operator of the main time step.
    pub fn operator(&self) -> &KronOperator {
        match self {
            Solver::Hf(s) => s.operator(),
            Solver::Tbc(s) => s.operator(),
        }
    }

    fn inner(&self) -> &dyn Evolution {
        match self {
            Solver::Hf(s) => s,
            Solver::Tbc(s) => s,
        }
    }
}

impl Evolution for Solver {
    fn step(&mut self) -> Result<()> {
        match self {
            Solver::Hf(s) => s.step(),
            Solver::Tbc(s) => s.step(),
        }
    }

    fn field(&self) -> &CMat {
        self.inner().field()
    }

    fn steps(&self) -> usize {
        self.inner().steps()
    }

    fn dt(&self) -> f64 {
        self.inner().dt()
    }

    fn state_size(&self) -> usize {
        self.inner().state_size()
    }

    fn factor_count(&self) -> usize {
        self.inner().factor_count()
    }

    fn warnings(&self) -> &[String] {
        self.inner().warnings()
    }
}

/// Coefficients of the interpolant of `spec` at time `t` on the LGL grid.
pub fn project(disc: &Discretization, spec: &ProfileSpec, t: f64) -> Result<CMat> {
    disc.interpolate(&disc.sample(|x1, x2| spec.eval(x1, x2, t)))
}

/// `||exact - numerical|| / norm0` with nodal values on the LGL grid.
pub fn relative_error(disc: &Discretization, exact: &CMat, numerical: &CMat, norm0: f64) -> f64 {
    disc.nodal_l2(&(exact - numerical)) / norm0
}

/// Error series of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct EvolutionRun {
    pub label: String,
    /// `(t_j, e(t_j))` for `j = 0 .. N_t - 1`.
    pub series: Vec<(f64, f64)>,
    pub warnings: Vec<String>,
}

impl EvolutionRun {
    /// `max_j e(t_j)`.
    pub fn max_error(&self) -> f64 {
        self.series.iter().map(|p| p.1).fold(0.0, f64::max)
    }
}

/// Runs `cfg` from the projected initial profile and records the relative
/// error after every step.
pub fn run_evolution(cfg: &RunConfig) -> Result<EvolutionRun> {
    run_evolution_with(cfg, &cfg.profile_spec())
}

/// [`run_evolution`] for an explicitly given exact solution in place of the
/// tabulated profile of `cfg`.
pub fn run_evolution_with(cfg: &RunConfig, spec: &ProfileSpec) -> Result<EvolutionRun> {
    cfg.validate()?;
    let disc = cfg.discretization()?;
    let exact0 = disc.sample(|x1, x2| spec.eval(x1, x2, 0.0));
    let norm0 = disc.nodal_l2(&exact0);
    if !(norm0 > 0.0) {
        return Err(Error::Config("initial profile vanishes on the grid".into()));
    }
    let u0 = disc.interpolate(&exact0)?;
    let mut series = vec![(0.0, relative_error(&disc, &exact0, &disc.nodal_values(&u0), norm0))];
    let mut solver = Solver::new(cfg, &disc, u0)?;
    let steps = cfg.steps();
    series.reserve(steps);
    solver.run(steps, |j, u| {
        let t = j as f64 * cfg.dt;
        let exact = disc.sample(|x1, x2| spec.eval(x1, x2, t));
        series.push((t, relative_error(&disc, &exact, &disc.nodal_values(u), norm0)));
        Ok(())
    })?;
    Ok(EvolutionRun {
        label: cfg.label(),
        series,
        warnings: solver.warnings().to_vec(),
    })
}

/// Formats a float with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes a CSV file with a header line and one row per record.
pub fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<()> {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.into_iter().map(fmt_f64).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, out)?;
    Ok(())
}

/// Writes the series of a run as `t,error` rows.
pub fn write_evolution_csv(path: &Path, run: &EvolutionRun) -> Result<()> {
    write_csv(path, &["t", "error"], run.series.iter().map(|&(t, e)| vec![t, e]))
}

/// Result of a convergence study.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceStudy {
    pub label: String,
    /// `(dt, max_j e(t_j))`, ordered as requested.
    pub rows: Vec<(f64, f64)>,
    /// Least-squares slope over the pre-plateau points, if at least three.
    pub slope: Option<f64>,
}

/// Least-squares slope of `log e` against `log dt` after discarding the
/// plateau: every point whose error is below twice the smallest error. At
/// least three remaining points are required.
pub fn fit_slope(points: &[(f64, f64)]) -> Option<f64> {
    let floor = points.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let kept: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.0 > 0.0 && p.1 >= 2.0 * floor && p.1.is_finite())
        .map(|p| (p.0.ln(), p.1.ln()))
        .collect();
    if kept.len() < 3 {
        return None;
    }
    let n = kept.len() as f64;
    let mx = kept.iter().map(|p| p.0).sum::<f64>() / n;
    let my = kept.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = kept.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = kept.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Runs `cfg` for every time step in `dts`, in parallel, and fits the
/// convergence slope of the maximal error.
pub fn run_convergence(cfg: &RunConfig, dts: &[f64]) -> Result<ConvergenceStudy> {
    if dts.len() < 4 {
        return Err(Error::Config(format!(
            "a convergence study needs at least 4 time steps, got {}",
            dts.len()
        )));
    }
    for &dt in dts {
        step_count(cfg.t_max, dt)?;
    }
    let runs: Vec<Result<f64>> = dts
        .par_iter()
        .map(|&dt| run_evolution(&cfg.with_dt(dt)).map(|r| r.max_error()))
        .collect();
    let rows = dts
        .iter()
        .zip(runs)
        .map(|(&dt, e)| e.map(|e| (dt, e)))
        .collect::<Result<Vec<_>>>()?;
    Ok(ConvergenceStudy {
        label: cfg.label(),
        slope: fit_slope(&rows),
        rows,
    })
}

/// Writes `dt,max_error` rows.
pub fn write_convergence_csv(path: &Path, study: &ConvergenceStudy) -> Result<()> {
    write_csv(path, &["dt", "max_error"], study.rows.iter().map(|&(dt, e)| vec![dt, e]))
}

/// A field sampled on a uniform grid.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldDump {
    pub nx: usize,
    pub ny: usize,
    /// `[x_l, x_r, x_b, x_t]`.
    pub domain: [f64; 4],
    pub t: f64,
    /// Rows `[x1, x2, Re u, Im u, log10|u|]`, `x1` running fastest.
    pub rows: Vec<[f64; 5]>,
}

fn uniform(n: usize) -> Vec<f64> {
    (0..n).map(|i| -1.0 + 2.0 * i as f64 / (n - 1) as f64).collect()
}

impl FieldDump {
    /// Samples the expansion `u` on an `nx x ny` uniform grid including the
    /// boundary.
    pub fn from_expansion(disc: &Discretization, u: &CMat, t: f64, nx: usize, ny: usize) -> Self {
        let (y1, y2) = (uniform(nx), uniform(ny));
        let values = disc.evaluate(u, &y1, &y2);
        let dom = &disc.dom;
        let mut rows = Vec::with_capacity(nx * ny);
        for (j, &b) in y2.iter().enumerate() {
            for (i, &a) in y1.iter().enumerate() {
                let (x1, x2) = dom.to_physical(a, b);
                let v = values[(i, j)];
                let log = v.norm().log10().max(LOG_FLOOR);
                rows.push([x1, x2, v.re, v.im, log]);
            }
        }
        Self {
            nx,
            ny,
            domain: [dom.x_l, dom.x_r, dom.x_b, dom.x_t],
            t,
            rows,
        }
    }

    /// Writes the header `# nx ny x_l x_r x_b x_t t` and the rows.
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut out = String::with_capacity(self.rows.len() * 120);
        let [xl, xr, xb, xt] = self.domain;
        let _ = writeln!(
            out,
            "# {} {} {} {} {} {} {}",
            self.nx,
            self.ny,
            fmt_f64(xl),
            fmt_f64(xr),
            fmt_f64(xb),
            fmt_f64(xt),
            fmt_f64(self.t)
        );
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|&v| fmt_f64(v)).collect();
            out.push_str(&cells.join(" "));
            out.push('\n');
        }
        fs::write(path, out)?;
        Ok(())
    }

    /// Reads a file produced by [`FieldDump::write`].
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let bad = |what: &str| Error::Config(format!("malformed field dump {}: {what}", path.display()));
        let mut lines = text.lines();
        let header = lines.next().and_then(|l| l.strip_prefix('#')).ok_or_else(|| bad("missing header"))?;
        let h: Vec<&str> = header.split_whitespace().collect();
        if h.len() != 7 {
            return Err(bad("header needs 7 fields"));
        }
        let int = |s: &str| s.parse::<usize>().map_err(|_| bad("bad grid size"));
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad("bad number"));
        let (nx, ny) = (int(h[0])?, int(h[1])?);
        let domain = [num(h[2])?, num(h[3])?, num(h[4])?, num(h[5])?];
        let t = num(h[6])?;
        let mut rows = Vec::with_capacity(nx * ny);
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let v: Vec<f64> = line.split_whitespace().map(num).collect::<Result<_>>()?;
            let row: [f64; 5] = v.try_into().map_err(|_| bad("row needs 5 columns"))?;
            rows.push(row);
        }
        if rows.len() != nx * ny {
            return Err(bad("row count differs from nx * ny"));
        }
        Ok(Self {
            nx,
            ny,
            domain,
            t,
            rows,
        })
    }
}

/// Runs `cfg` and writes a [`DUMP_GRID`]-square field dump at every requested
/// time, rounded to the nearest time level. Returns the written paths.
pub fn dump_field(cfg: &RunConfig, times: &[f64]) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    if let Some(t) = times.iter().find(|t| !(**t >= 0.0 && **t <= cfg.t_max)) {
        return Err(Error::Config(format!("dump time {t} lies outside [0, {}]", cfg.t_max)));
    }
    let disc = cfg.discretization()?;
    let u0 = project(&disc, &cfg.profile_spec(), 0.0)?;
    let mut solver = Solver::new(cfg, &disc, u0)?;
    let mut levels: Vec<usize> = times.iter().map(|t| (t / cfg.dt).round() as usize).collect();
    levels.sort_unstable();
    levels.dedup();
    fs::create_dir_all(&cfg.output)?;
    let mut paths = Vec::with_capacity(levels.len());
    for level in levels {
        while solver.steps() < level {
            solver.step()?;
        }
        let t = level as f64 * cfg.dt;
        let path = cfg.output.join(format!("field_{}_t{:.6}.dat", cfg.label(), t));
        FieldDump::from_expansion(&disc, solver.field(), t, DUMP_GRID, DUMP_GRID).write(&path)?;
        paths.push(path);
    }
    Ok(paths)
}

/// Writes the first `n` convolution-quadrature weights of every method for
/// `nu = 1/2` and `nu = -1/2` as the columns of a CSV file.
pub fn write_weights_csv(path: &Path, n: usize, dt: f64) -> Result<()> {
    let mut header = vec!["k".to_string()];
    let mut columns = Vec::new();
    for scheme in [Stepper::Bdf1, Stepper::Bdf2, Stepper::Tr] {
        for (nu, tag) in [(0.5, "half"), (-0.5, "minus_half")] {
            header.push(format!("{}_{tag}", scheme.name()));
            columns.push(cq_weights(scheme, nu, n, dt)?.omega);
        }
    }
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = (0..n).map(|k| {
        let mut row = vec![k as f64];
        row.extend(columns.iter().map(|c| c[k]));
        row
    });
    write_csv(path, &header, rows)
}

/// Sparse matrix in 1-based triplet form.
#[derive(Clone, Debug, PartialEq)]
pub struct Triplets {
    pub nrows: usize,
    pub ncols: usize,
    /// `(row, col, re, im)` with 1-based indices.
    pub entries: Vec<(usize, usize, f64, f64)>,
}

impl Triplets {
    /// Nonzero entries of a real dense matrix.
    pub fn from_real(m: &RMat) -> Self {
        let mut entries = Vec::new();
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                if m[(i, j)] != 0.0 {
                    entries.push((i + 1, j + 1, m[(i, j)], 0.0));
                }
            }
        }
        Self {
            nrows: m.nrows(),
            ncols: m.ncols(),
            entries,
        }
    }

    /// Nonzero entries of the global matrix of a Kronecker operator.
    pub fn from_operator(op: &KronOperator) -> Self {
        let n = op.n1() * op.n2();
        let entries = op
            .entries()
            .into_iter()
            .filter(|(_, v)| v.re != 0.0 || v.im != 0.0)
            .map(|((i, j), v)| (i + 1, j + 1, v.re, v.im))
            .collect();
        Self {
            nrows: n,
            ncols: n,
            entries,
        }
    }

    /// Writes the header `% nrows ncols nnz` followed by `row col re im` lines.
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut out = format!("% {} {} {}\n", self.nrows, self.ncols, self.entries.len());
        for &(i, j, re, im) in &self.entries {
            let _ = writeln!(out, "{i} {j} {} {}", fmt_f64(re), fmt_f64(im));
        }
        fs::write(path, out)?;
        Ok(())
    }

    /// Reads a file produced by [`Triplets::write`].
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let bad = || Error::Config(format!("malformed triplet file {}", path.display()));
        let mut lines = text.lines();
        let header: Vec<usize> = lines
            .next()
            .and_then(|l| l.strip_prefix('%'))
            .ok_or_else(bad)?
            .split_whitespace()
            .map(|s| s.parse().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        let [nrows, ncols, nnz] = header[..] else {
            return Err(bad());
        };
        let mut entries = Vec::with_capacity(nnz);
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 4 {
                return Err(bad());
            }
            entries.push((
                f[0].parse().map_err(|_| bad())?,
                f[1].parse().map_err(|_| bad())?,
                f[2].parse().map_err(|_| bad())?,
                f[3].parse().map_err(|_| bad())?,
            ));
        }
        if entries.len() != nnz {
            return Err(bad());
        }
        Ok(Self { nrows, ncols, entries })
    }
}

/// Writes the one-dimensional mass, stiffness and boundary matrices of both
/// directions and the global step operator of the configured engine.
pub fn dump_matrices(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let disc = cfg.discretization()?;
    fs::create_dir_all(&cfg.output)?;
    let mut paths = Vec::new();
    let mut emit = |name: String, t: Triplets| -> Result<()> {
        let path = cfg.output.join(name);
        t.write(&path)?;
        paths.push(path);
        Ok(())
    };
    for (d, ops) in [(1, &disc.ops1), (2, &disc.ops2)] {
        emit(format!("mass_{d}.txt"), Triplets::from_real(&ops.mass))?;
        emit(format!("stiff_{d}.txt"), Triplets::from_real(&ops.stiff))?;
        emit(format!("lambda_{d}.txt"), Triplets::from_real(&ops.lambda))?;
    }
    let u0 = CMat::zeros(cfg.n1 + 1, cfg.n2 + 1);
    let solver = Solver::new(cfg, &disc, u0)?;
    emit(format!("operator_{}.txt", cfg.label()), Triplets::from_operator(solver.operator()))?;
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_exact_power_law() {
        let pts: Vec<(f64, f64)> = (0..6).map(|k| {
            let dt = 0.1 / f64::from(1u32 << k);
            (dt, 3.0 * dt * dt)
        }).collect();
        // the smallest point is within 2x of itself and is dropped
        assert!((fit_slope(&pts).unwrap() - 2.0).abs() < 1e-6);
    }

    #[test]
    fn plateau_points_are_excluded() {
        let pts = [(0.1, 1e-1), (0.05, 2.5e-2), (0.025, 6.25e-3), (0.0125, 1e-3), (0.00625, 1.2e-3)];
        assert!((fit_slope(&pts).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn too_few_points_leave_slope_undefined() {
        let pts = [(0.1, 1e-2), (0.05, 2.5e-3), (0.025, 1e-3), (0.0125, 1e-3)];
        assert_eq!(fit_slope(&pts), None);
    }

    #[test]
    fn defaults_are_desk_scale() {
        let c = RunConfig::from_toml("", &[]).unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.steps(), 1500);
        assert_eq!(c.dt_set.len(), 5);
        assert_eq!(c.label(), "NP30-TR");
    }

    #[test]
    fn overrides_patch_the_file() {
        let text = "engine = \"hf\"\nmethod = \"cp\"\nstepper = \"bdf2\"\nn = 16\n";
        let c = RunConfig::from_toml(text, &["n2=20".into(), "method=cq".into(), "t_max=1".into()]).unwrap();
        assert_eq!((c.n1, c.n2), (16, 20));
        assert_eq!(c.method, Method::Cq);
        assert_eq!(c.label(), "CQ-BDF2");
    }

    #[test]
    fn level_count_sets_the_step() {
        let c = RunConfig::from_toml("t_max = 5\nnt = 5001\n", &[]).unwrap();
        assert!((c.dt - 1e-3).abs() < 1e-15);
        assert_eq!(c.steps(), 5000);
        assert!(RunConfig::from_toml("t_max = 5\nnt = 5000\ndt = 1e-3\n", &[]).is_err());
    }

    #[test]
    fn invalid_combinations_are_config_errors() {
        for bad in [
            "engine = \"tbc\"\nstepper = \"bdf2\"",
            "engine = \"tbc\"\nmethod = \"cp\"",
            "engine = \"hf\"\nmethod = \"np\"",
            "dt = 0.7",
            "domain = [1.0, -1.0, 0.0, 1.0]",
            "unknown_key = 1",
            "dump_times = [2.0]",
        ] {
            assert!(matches!(RunConfig::from_toml(bad, &[]), Err(Error::Config(_))), "{bad}");
        }
    }

    #[test]
    fn full_scale_parameters_are_expressible() {
        let c = RunConfig::full_evolution();
        c.validate().unwrap();
        assert_eq!(c.steps() + 1, 5001);
        assert_eq!(c.dt_set.len(), 9);
        for dt in &c.dt_set {
            assert!(step_count(c.t_max, *dt).is_ok());
        }
    }
}
