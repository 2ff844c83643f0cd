//! Run configuration: TOML file plus command-line overrides.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use vll_core::fields::{BcVariant, PhysParams, Recipe};
use vll_core::grid::Grid;

/// Problem with the configuration; carries the dotted key path when known.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfigError {
    pub key: Option<String>,
    pub message: String,
}

impl ConfigError {
    pub fn new(key: Option<&str>, message: impl Into<String>) -> Self {
        Self {
            key: key.map(str::to_string),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.key {
            Some(k) => write!(f, "`{k}`: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    SolveInviscid,
    SolveViscous,
    SolveLinearized,
    BuildBlayer,
    Residual,
    #[default]
    Converge,
    Linstab,
    Diagnose,
}

impl Command {
    pub const ALL: [Command; 8] = [
        Command::SolveInviscid,
        Command::SolveViscous,
        Command::SolveLinearized,
        Command::BuildBlayer,
        Command::Residual,
        Command::Converge,
        Command::Linstab,
        Command::Diagnose,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Command::SolveInviscid => "solve-inviscid",
            Command::SolveViscous => "solve-viscous",
            Command::SolveLinearized => "solve-linearized",
            Command::BuildBlayer => "build-blayer",
            Command::Residual => "residual",
            Command::Converge => "converge",
            Command::Linstab => "linstab",
            Command::Diagnose => "diagnose",
        }
    }

    /// Commands that sweep over the `eps` list.
    pub fn is_sweep(&self) -> bool {
        matches!(self, Command::Converge | Command::Linstab)
    }
}

impl FromStr for Command {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, ConfigError> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| ConfigError::new(Some("command"), format!("unknown command `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Plot {
    #[default]
    Svg,
    None,
}

impl FromStr for Plot {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, ConfigError> {
        match s {
            "svg" => Ok(Plot::Svg),
            "none" => Ok(Plot::None),
            other => Err(ConfigError::new(Some("io.plot"), format!("expected svg | none (got `{other}`)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSection {
    pub lx: f64,
    pub ly: f64,
    pub nx: usize,
    pub ny: usize,
    /// Minimum clustering strength of the wall stretching.
    pub stretch: f64,
    /// Layer width the grid must resolve; defaults to the smallest `ε` in use.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_hint: Option<f64>,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            lx: 2.0 * std::f64::consts::PI,
            ly: 8.0,
            nx: 128,
            ny: 256,
            stretch: 2.5,
            eps_hint: None,
        }
    }
}

/// Dissipation is given as multiples of `ε²`: `ν₂ = nu2·ε²` and so on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhysSection {
    /// `ε` of single runs; sweeps use the `eps` list instead.
    pub eps: f64,
    pub alpha: f64,
    pub nu1: f64,
    pub nu2: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    pub bc: BcVariant,
}

impl Default for PhysSection {
    fn default() -> Self {
        Self {
            eps: 0.1,
            alpha: 1.0,
            nu1: 0.0,
            nu2: 1.0,
            kappa1: 0.0,
            kappa2: 0.0,
            bc: BcVariant::Navier,
        }
    }
}

impl PhysSection {
    pub fn params(&self, eps: f64) -> PhysParams {
        let e2 = eps * eps;
        PhysParams {
            eps,
            alpha: self.alpha,
            nu1: self.nu1 * e2,
            nu2: self.nu2 * e2,
            kappa1: self.kappa1 * e2,
            kappa2: self.kappa2 * e2,
            bc_variant: self.bc,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimSection {
    #[serde(rename = "T")]
    pub t_end: f64,
    /// Fixed step; when omitted the step is chosen from the CFL target.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    pub save_every: usize,
    /// Headroom on the initial speed when choosing the step.
    pub speed_margin: f64,
}

impl Default for SimSection {
    fn default() -> Self {
        Self {
            t_end: 0.25,
            dt: None,
            save_every: 20,
            speed_margin: 1.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IoSection {
    pub out: PathBuf,
    /// Run directory read by `diagnose`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    pub plot: Plot,
}

impl Default for IoSection {
    fn default() -> Self {
        Self {
            out: PathBuf::from("vll-out"),
            input: None,
            plot: Plot::Svg,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NormSection {
    /// Conormal order of the linear-stability norm and of `E_m`.
    pub m: usize,
    /// Highest conormal order reported by `diagnose`.
    pub m_max: usize,
    pub k_max: usize,
}

impl Default for NormSection {
    fn default() -> Self {
        Self { m: 2, m_max: 7, k_max: 2 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct StudySection {
    pub floor_check: bool,
    /// Exit with status 4 when the fitted rates leave their bands.
    pub assert: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub command: Command,
    /// Unknown keys are fatal when set, warnings otherwise.
    pub strict: bool,
    pub eps: Vec<f64>,
    pub order: usize,
    pub recipe: Recipe,
    pub amplitude: f64,
    pub grid: GridSection,
    pub phys: PhysSection,
    pub sim: SimSection,
    pub io: IoSection,
    pub norms: NormSection,
    pub study: StudySection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: Command::Converge,
            strict: true,
            eps: vec![0.2, 0.1, 0.05, 0.025],
            order: 2,
            recipe: Recipe::VortexPair,
            amplitude: 1.0,
            grid: GridSection::default(),
            phys: PhysSection::default(),
            sim: SimSection::default(),
            io: IoSection::default(),
            norms: NormSection::default(),
            study: StudySection::default(),
        }
    }
}

/// Parsed configuration together with the ignored keys of a non-strict parse.
#[derive(Clone, Debug, PartialEq)]
pub struct Parsed {
    pub config: RunConfig,
    pub unknown: Vec<String>,
}

/// Parse TOML text. Unknown keys fail unless the text sets `strict = false`.
pub fn parse_config_str(text: &str) -> Result<Parsed, ConfigError> {
    let mut unknown = Vec::new();
    let de = toml::Deserializer::new(text);
    let mut track = |path: serde_ignored::Path<'_>| unknown.push(path.to_string());
    let ignored = serde_ignored::Deserializer::new(de, &mut track);
    let config: RunConfig = serde_path_to_error::deserialize(ignored).map_err(|e| {
        let path = e.path().to_string();
        let key = (path != ".").then_some(path);
        ConfigError {
            key,
            message: e.into_inner().message().trim().to_string(),
        }
    })?;
    if config.strict {
        if let Some(k) = unknown.first() {
            return Err(ConfigError::new(Some(k), "unknown key"));
        }
    }
    Ok(Parsed { config, unknown })
}

pub fn parse_config_file(path: &Path) -> Result<Parsed, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::new(None, format!("cannot read config {}: {e}", path.display())))?;
    parse_config_str(&text)
}

/// Command-line overrides; `None` leaves the file value in place.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub command: Option<Command>,
    pub out: Option<PathBuf>,
    pub input: Option<PathBuf>,
    pub eps: Option<Vec<f64>>,
    pub order: Option<usize>,
    pub alpha: Option<f64>,
    pub bc: Option<BcVariant>,
    pub t_end: Option<f64>,
    pub nx: Option<usize>,
    pub ny: Option<usize>,
    pub plot: Option<Plot>,
    pub strict: bool,
    pub assert: bool,
}

impl RunConfig {
    pub fn apply(mut self, o: &Overrides) -> Self {
        if let Some(c) = o.command {
            self.command = c;
        }
        if let Some(p) = &o.out {
            self.io.out = p.clone();
        }
        if let Some(p) = &o.input {
            self.io.input = Some(p.clone());
        }
        if let Some(e) = &o.eps {
            // A single value on a single-run command is that run's eps.
            if !self.command.is_sweep() && e.len() == 1 {
                self.phys.eps = e[0];
            }
            self.eps = e.clone();
        }
        if let Some(k) = o.order {
            self.order = k;
        }
        if let Some(a) = o.alpha {
            self.phys.alpha = a;
        }
        if let Some(b) = o.bc {
            self.phys.bc = b;
        }
        if let Some(t) = o.t_end {
            self.sim.t_end = t;
        }
        if let Some(n) = o.nx {
            self.grid.nx = n;
        }
        if let Some(n) = o.ny {
            self.grid.ny = n;
        }
        if let Some(p) = o.plot {
            self.io.plot = p;
        }
        self.strict |= o.strict;
        self.study.assert |= o.assert;
        self
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Smallest `ε` the selected command uses.
    pub fn eps_min(&self) -> f64 {
        if self.command.is_sweep() {
            self.eps.iter().copied().fold(f64::INFINITY, f64::min)
        } else {
            self.phys.eps
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let err = |k: &str, m: String| Err(ConfigError::new(Some(k), m));
        for e in &self.eps {
            if !(*e > 0.0 && *e < 1.0) {
                return err("eps", format!("every eps must lie in (0, 1) (got {e})"));
            }
        }
        if self.command.is_sweep() && self.eps.len() < 3 {
            return err("eps", format!("a sweep needs >= 3 values (got {})", self.eps.len()));
        }
        if !(self.phys.eps > 0.0 && self.phys.eps < 1.0) {
            return err("phys.eps", format!("must lie in (0, 1) (got {})", self.phys.eps));
        }
        if let Err(e) = self.phys.params(self.phys.eps).validate() {
            return err("phys", e.to_string());
        }
        if !(self.amplitude.is_finite()) {
            return err("amplitude", "must be finite".into());
        }
        if !(self.sim.t_end >= 0.0 && self.sim.t_end.is_finite()) {
            return err("sim.T", format!("must be >= 0 (got {})", self.sim.t_end));
        }
        if let Some(dt) = self.sim.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return err("sim.dt", format!("must be positive (got {dt})"));
            }
        }
        if self.sim.save_every == 0 {
            return err("sim.save_every", "must be >= 1".into());
        }
        if !(self.sim.speed_margin >= 1.0) {
            return err("sim.speed_margin", format!("must be >= 1 (got {})", self.sim.speed_margin));
        }
        if let Some(h) = self.grid.eps_hint {
            if !(h > 0.0 && h <= 1.0) {
                return err("grid.eps_hint", format!("must lie in (0, 1] (got {h})"));
            }
        }
        if self.command == Command::Diagnose && self.io.input.is_none() {
            return err("io.input", "diagnose needs the run directory to read".into());
        }
        Ok(())
    }

    pub fn build_grid(&self) -> vll_core::Result<Grid> {
        let g = &self.grid;
        Grid::build(g.lx, g.ly, g.nx, g.ny, g.stretch, g.eps_hint.unwrap_or_else(|| self.eps_min()))
    }
}

/// Comma-separated `ε` list of the `--eps` flag.
pub fn parse_eps_list(s: &str) -> Result<Vec<f64>, ConfigError> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| ConfigError::new(Some("eps"), format!("`{t}` is not a number")))
        })
        .collect()
}
