//! Command dispatch for the `vll` binary.

pub mod config;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde_json::json;
use vll_core::blayer::{ApproxSolution, Expansion};
use vll_core::fields::{make_initial_data, Field, State};
use vll_core::grid::Grid;
use vll_core::norms::{reports_csv, NormReport};
use vll_core::snapshot::Snapshot;
use vll_core::solver::{run, SimConfig, Trajectory, Which};
use vll_core::study::{converge, linstab_study, RateReport, StudyOptions, COL_CONORMAL};

pub use config::{Command, ConfigError, Overrides, Parsed, Plot, RunConfig};

/// Slope band checked by `converge --assert`.
pub const CONVERGE_BAND: (f64, f64) = (0.75, 1.25);
pub const CONVERGE_ASSERT_COLUMNS: [&str; 4] = ["L2_u", "L2_theta", "Linf_u", "Linf_theta"];
/// Slope floor checked by `linstab --assert`.
pub const LINSTAB_MIN_SLOPE: f64 = 1.7;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_ASSERT: i32 = 4;

#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    Core(vll_core::Error),
    /// Rates outside their bands; the report is already on disk.
    Assert(Vec<String>),
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<vll_core::Error> for CliError {
    fn from(e: vll_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "config error: {e}"),
            CliError::Core(e) => e.fmt(f),
            CliError::Assert(v) => write!(f, "acceptance check failed: {}", v.join("; ")),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Core(e) if e.is_numerical() => EXIT_NUMERICAL,
            CliError::Core(_) => EXIT_CONFIG,
            CliError::Assert(_) => EXIT_ASSERT,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Core(e) if e.is_numerical() => "numerical",
            CliError::Core(_) => "setup",
            CliError::Assert(_) => "assert",
        }
    }

    /// Machine-readable error record.
    pub fn record(&self, command: &str) -> serde_json::Value {
        let mut v = json!({
            "command": command,
            "kind": self.kind(),
            "exit_code": self.exit_code(),
            "message": self.to_string(),
        });
        match self {
            CliError::Config(ConfigError { key: Some(k), .. }) => v["key"] = json!(k),
            CliError::Assert(list) => v["failures"] = json!(list),
            _ => {}
        }
        v
    }
}

/// Files written by a command, relative to the output directory.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Outcome {
    pub out_dir: PathBuf,
    pub artifacts: Vec<String>,
}

struct Out {
    dir: PathBuf,
    written: Vec<String>,
}

impl Out {
    fn create(dir: &Path) -> std::io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn text(&mut self, name: &str, body: &str) -> std::io::Result<()> {
        fs::write(self.dir.join(name), body)?;
        self.written.push(name.to_string());
        Ok(())
    }

    fn snapshot(&mut self, name: &str, s: &Snapshot) -> vll_core::Result<()> {
        s.write(&self.dir.join(name))?;
        self.written.push(name.to_string());
        Ok(())
    }
}

pub const CONFIG_COPY: &str = "config.toml";
pub const ERROR_RECORD: &str = "error.json";

fn snap_name(i: usize) -> String {
    format!("snap_{i:04}.vlls")
}

fn sim_config(cfg: &RunConfig, g: &Grid, s0: &State, eps: f64) -> SimConfig {
    let dt = cfg
        .sim
        .dt
        .unwrap_or_else(|| SimConfig::auto_dt(g, s0.max_speed() * cfg.sim.speed_margin, cfg.sim.t_end));
    SimConfig {
        dt,
        t_end: cfg.sim.t_end,
        scheme: Default::default(),
        params: cfg.phys.params(eps),
        save_every: cfg.sim.save_every,
    }
}

fn study_options(cfg: &RunConfig) -> StudyOptions {
    StudyOptions {
        recipe: cfg.recipe,
        amplitude: cfg.amplitude,
        order: cfg.order,
        m: cfg.norms.m,
        floor_check: cfg.study.floor_check,
    }
}

fn write_trajectory(out: &mut Out, traj: &Trajectory) -> vll_core::Result<()> {
    for (i, s) in traj.snapshots.iter().enumerate() {
        out.snapshot(&snap_name(i), &Snapshot::from_state(s))?;
    }
    out.text("diagnostics.csv", &traj.diagnostics_csv())?;
    Ok(())
}

fn write_report(out: &mut Out, r: &RateReport, plot: Plot) -> std::io::Result<()> {
    out.text("rate_report.json", &r.to_json())?;
    out.text("rate_report.csv", &r.to_csv())?;
    if plot == Plot::Svg {
        out.text("rate_report.svg", &r.to_svg())?;
    }
    Ok(())
}

/// Failures of the rate bands, one line each.
pub fn converge_failures(r: &RateReport) -> Vec<String> {
    let (lo, hi) = CONVERGE_BAND;
    CONVERGE_ASSERT_COLUMNS
        .iter()
        .filter_map(|c| match r.slope(c) {
            Some(s) if (lo..=hi).contains(&s) => None,
            Some(s) => Some(format!("{c} slope {s:.3} outside [{lo}, {hi}]")),
            None => Some(format!("{c} slope undefined")),
        })
        .collect()
}

pub fn linstab_failures(r: &RateReport) -> Vec<String> {
    match r.slope(COL_CONORMAL) {
        Some(s) if s >= LINSTAB_MIN_SLOPE => vec![],
        Some(s) => vec![format!("{COL_CONORMAL} slope {s:.3} below {LINSTAB_MIN_SLOPE}")],
        None => vec![format!("{COL_CONORMAL} slope undefined")],
    }
}

fn check(fails: Vec<String>) -> Result<(), CliError> {
    if fails.is_empty() {
        Ok(())
    } else {
        Err(CliError::Assert(fails))
    }
}

/// Snapshot files of a run directory in index order.
fn stored_snapshots(dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("snap_") && n.ends_with(".vlls"))
        })
        .collect();
    v.sort();
    Ok(v)
}

/// Validate, create the output directory with a config copy, run the command.
pub fn dispatch(cfg: &RunConfig) -> Result<Outcome, CliError> {
    cfg.validate()?;
    let mut out = Out::create(&cfg.io.out)?;
    let _ = fs::remove_file(out.dir.join(ERROR_RECORD));
    out.text(CONFIG_COPY, &cfg.to_toml())?;
    run_command(cfg, &mut out)?;
    Ok(Outcome {
        out_dir: out.dir,
        artifacts: out.written,
    })
}

fn run_command(cfg: &RunConfig, out: &mut Out) -> Result<(), CliError> {
    if cfg.command == Command::Diagnose {
        return diagnose(cfg, out);
    }
    let g = cfg.build_grid()?;
    let s0 = make_initial_data(&g, cfg.recipe, cfg.amplitude, cfg.phys.alpha)?;
    let eps = cfg.phys.eps;
    match cfg.command {
        Command::SolveInviscid | Command::SolveViscous => {
            let which = if cfg.command == Command::SolveInviscid {
                Which::Inviscid
            } else {
                Which::Viscous
            };
            let traj = run(&g, &s0, &sim_config(cfg, &g, &s0, eps), which);
            write_trajectory(out, &traj)?;
            if let Some(e) = traj.failure {
                return Err(e.into());
            }
        }
        Command::SolveLinearized => {
            let sc = sim_config(cfg, &g, &s0, eps);
            let ex = Arc::new(Expansion::build(&g, &s0, &inviscid(&sc), cfg.order)?);
            let approx = ApproxSolution::new(ex, eps, cfg.order)?;
            let bg = approx.background(&g, &sc.params)?;
            let c = eps.powi(cfg.order as i32 + 1);
            let e0 = State {
                u1: s0.u1.scale(c),
                u2: s0.u2.scale(c),
                theta: s0.theta.scale(c),
                p: Field::zeros(g.nx(), g.ny()),
                time: s0.time,
                wall_ghost: None,
            };
            let traj = run(&g, &e0, &sc, Which::Linearized(&bg));
            write_trajectory(out, &traj)?;
            if let Some(e) = traj.failure {
                return Err(e.into());
            }
        }
        Command::BuildBlayer => {
            let sc = sim_config(cfg, &g, &s0, eps);
            let ex = Expansion::build(&g, &s0, &inviscid(&sc), cfg.order)?;
            for k in 0..=cfg.order {
                for (i, p) in ex.profiles(k).iter().enumerate() {
                    out.snapshot(&format!("inner_k{k}_{i:04}.vlls"), &p.to_snapshot())?;
                }
            }
            let m = ex.matching();
            let summary = json!({
                "order": cfg.order,
                "worst_matching_ratio": m.worst_ratio(),
                "max_decay": m.decay.iter().copied().fold(0.0, f64::max),
                "matching": m,
            });
            out.text("blayer.json", &pretty(&summary))?;
        }
        Command::Residual => {
            let sc = sim_config(cfg, &g, &s0, eps);
            let ex = Arc::new(Expansion::build(&g, &s0, &inviscid(&sc), cfg.order)?);
            let approx = ApproxSolution::new(ex, eps, cfg.order)?;
            let scale = eps.powi(cfg.order as i32);
            let mut csv = String::from("time,R_u1,R_u2,R_theta,defect_L2\n");
            for t in approx.times() {
                let (a, b, c) = approx.residual(&g, t, &sc.params)?;
                let (na, nb, nc) = (g.l2(&a), g.l2(&b), g.l2(&c));
                let d = scale * (na * na + nb * nb + nc * nc).sqrt();
                let _ = writeln!(csv, "{t:.17e},{na:.17e},{nb:.17e},{nc:.17e},{d:.17e}");
            }
            out.text("residual.csv", &csv)?;
        }
        Command::Converge | Command::Linstab => {
            let base = sim_config(cfg, &g, &s0, cfg.eps_min());
            let opts = study_options(cfg);
            let (report, fails) = if cfg.command == Command::Converge {
                let r = converge(&base, &cfg.eps, &g, &opts)?;
                let f = converge_failures(&r);
                (r, f)
            } else {
                let r = linstab_study(&base, &cfg.eps, &g, &opts)?;
                let f = linstab_failures(&r);
                (r, f)
            };
            write_report(out, &report, cfg.io.plot)?;
            if cfg.study.assert {
                check(fails)?;
            }
        }
        Command::Diagnose => unreachable!("handled above"),
    }
    Ok(())
}

fn inviscid(sc: &SimConfig) -> SimConfig {
    SimConfig {
        params: sc.params.without_dissipation(),
        ..sc.clone()
    }
}

fn pretty(v: &serde_json::Value) -> String {
    serde_json::to_string_pretty(v).expect("json serializes")
}

/// Norm table of a stored run. The grid comes from the run's config copy when present.
fn diagnose(cfg: &RunConfig, out: &mut Out) -> Result<(), CliError> {
    let dir = cfg.io.input.as_ref().expect("validated");
    let copy = dir.join(CONFIG_COPY);
    let run_cfg = if copy.exists() {
        config::parse_config_file(&copy)?.config
    } else {
        cfg.clone()
    };
    let g = run_cfg.build_grid()?;
    let files = stored_snapshots(dir)?;
    if files.is_empty() {
        return Err(ConfigError::new(Some("io.input"), format!("no snapshots in {}", dir.display())).into());
    }
    let mut reports = Vec::with_capacity(files.len());
    for f in &files {
        let s = Snapshot::read(f)?.to_state()?;
        if (s.u1.nx(), s.u1.ny()) != (g.nx(), g.ny()) {
            return Err(vll_core::Error::ShapeMismatch {
                expected: (g.nx(), g.ny()),
                got: (s.u1.nx(), s.u1.ny()),
            }
            .into());
        }
        reports.push(NormReport::compute(
            &g,
            &s,
            run_cfg.phys.alpha,
            cfg.norms.m_max,
            cfg.norms.k_max,
            cfg.norms.m,
        )?);
    }
    out.text("norms.csv", &reports_csv(&reports))?;
    out.text("norms.json", &serde_json::to_string_pretty(&reports).expect("json"))?;
    Ok(())
}

/// Write the error record into the output directory when it can be created.
pub fn write_error_record(cfg_out: &Path, record: &serde_json::Value) {
    if fs::create_dir_all(cfg_out).is_ok() {
        let _ = fs::write(cfg_out.join(ERROR_RECORD), pretty(record));
    }
}
