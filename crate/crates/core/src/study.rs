//! ε sweeps: viscous runs against the inviscid reference and the assembled
//! expansion, linearised error runs, rate fits and report emission.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::blayer::{ApproxSolution, Expansion};
use crate::error::{Error, Result};
use crate::fields::{make_initial_data, Field, Recipe, State};
use crate::grid::{ddy, Grid, LAYER_NODES};
use crate::norms::{em_parts, hco_norm_vec};
use crate::solver::{run, SimConfig, Which};

/// Relative deviation above which a fit is flagged as non-linear.
pub const FIT_THRESHOLD: f64 = 0.1;
/// Boundary zone for the split `L∞` columns, in units of `ε`.
pub const BOUNDARY_ZONE: f64 = 5.0;

pub const COL_L2_U: &str = "L2_u";
pub const COL_LINF_U: &str = "Linf_u";
pub const COL_L2_THETA: &str = "L2_theta";
pub const COL_LINF_THETA: &str = "Linf_theta";
pub const COL_RESIDUAL: &str = "residual_L2";
pub const COL_EM: &str = "Em_sup";
pub const COL_CONORMAL: &str = "conormal";
/// `sup_t ‖∂y D‖` of the expansion defect `D`.
pub const COL_RESIDUAL_DY: &str = "residual_dy_L2";
/// Columns present in every report.
pub const CORE_COLUMNS: [&str; 6] = [COL_L2_U, COL_LINF_U, COL_L2_THETA, COL_LINF_THETA, COL_RESIDUAL, COL_EM];

/// Least-squares slope of `log err` against `log ε` and the largest relative
/// deviation of a point from the fitted line.
pub fn fit_rate(points: &[(f64, f64)]) -> Result<(f64, f64)> {
    let f = fit_full(points)?;
    Ok((f.0, f.1))
}

/// `(slope, fit_residual, 95% half-width of the slope)`.
fn fit_full(points: &[(f64, f64)]) -> Result<(f64, f64, f64)> {
    if points.len() < 3 {
        return Err(Error::Fit(format!("need >= 3 points (got {})", points.len())));
    }
    if let Some(&(e, v)) = points.iter().find(|p| !(p.1 > 0.0) || !p.1.is_finite()) {
        return Err(Error::Fit(format!(
            "error {v:e} at eps={e} is not positive; it may be below the discretization floor"
        )));
    }
    if points.iter().any(|p| !(p.0 > 0.0)) {
        return Err(Error::Fit("eps values must be positive".into()));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx <= 1e-24 * n {
        return Err(Error::Fit("eps values are not distinct; slope undefined".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let mut dev: f64 = 0.0;
    let mut sse = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        let r = y - (icpt + slope * x);
        sse += r * r;
        dev = dev.max((r.exp() - 1.0).abs());
    }
    let half = if points.len() > 2 {
        let dof = n - 2.0;
        let se = (sse / dof / sxx).sqrt();
        let t = StudentsT::new(0.0, 1.0, dof).map_or(f64::NAN, |d| d.inverse_cdf(0.975));
        t * se
    } else {
        f64::NAN
    };
    Ok((slope, dev, half))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitStatus {
    Fitted,
    /// Every error is exactly zero.
    Trivial,
    /// Fewer than three usable points or a nonpositive error.
    Undefined,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub status: FitStatus,
    pub slope: Option<f64>,
    pub fit_residual: Option<f64>,
    pub ci95: Option<f64>,
    /// Fit residual above [`FIT_THRESHOLD`].
    pub nonlinear: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl SlopeFit {
    fn from_points(points: &[(f64, f64)]) -> Self {
        if points.len() >= 3 && points.iter().all(|p| p.1 == 0.0) {
            return Self {
                status: FitStatus::Trivial,
                slope: None,
                fit_residual: None,
                ci95: None,
                nonlinear: false,
                note: None,
            };
        }
        match fit_full(points) {
            Ok((s, r, h)) => Self {
                status: FitStatus::Fitted,
                slope: Some(s),
                fit_residual: Some(r),
                ci95: h.is_finite().then_some(h),
                nonlinear: r > FIT_THRESHOLD,
                note: None,
            },
            Err(e) => Self {
                status: FitStatus::Undefined,
                slope: None,
                fit_residual: None,
                ci95: None,
                nonlinear: false,
                note: Some(e.to_string()),
            },
        }
    }
}

/// Errors of one `ε`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsRow {
    pub eps: f64,
    pub errors: BTreeMap<String, f64>,
    /// Set when the run stopped before `T`; errors then cover the saved part.
    pub failure: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub kind: String,
    pub eps_values: Vec<f64>,
    pub errors: Vec<EpsRow>,
    pub slopes: BTreeMap<String, SlopeFit>,
    /// Per column: errors nondecreasing in `ε` across the sweep.
    pub monotone: BTreeMap<String, bool>,
    /// Result of the resolution-doubling control, when requested.
    pub floor_limited: Option<bool>,
    pub config_hash: String,
}

impl RateReport {
    pub fn slope(&self, col: &str) -> Option<f64> {
        self.slopes.get(col).and_then(|s| s.slope)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn columns(&self) -> Vec<String> {
        self.slopes.keys().cloned().collect()
    }

    /// One row per `ε`.
    pub fn to_csv(&self) -> String {
        let cols = self.columns();
        let mut out = String::new();
        let _ = writeln!(out, "eps,{},failure", cols.join(","));
        for r in &self.errors {
            let vals: Vec<String> = cols
                .iter()
                .map(|c| r.errors.get(c).map_or(String::new(), |v| format!("{v:.17e}")))
                .collect();
            let fail = r.failure.as_deref().unwrap_or("").replace([',', '\n'], ";");
            let _ = writeln!(out, "{:.17e},{},{}", r.eps, vals.join(","), fail);
        }
        out
    }

    /// Log-log plot of every fitted column with its fit line.
    pub fn to_svg(&self) -> String {
        let (w, h, pad) = (640.0, 480.0, 60.0);
        let series: Vec<(&String, Vec<(f64, f64)>)> = self
            .slopes
            .iter()
            .filter(|(_, s)| s.status == FitStatus::Fitted)
            .map(|(c, _)| (c, points_of(&self.errors, c)))
            .collect();
        let all: Vec<(f64, f64)> = series
            .iter()
            .flat_map(|(_, p)| p.iter().map(|(e, v)| (e.log10(), v.log10())))
            .collect();
        let mut out = String::new();
        let _ = writeln!(
            out,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">"
        );
        let _ = writeln!(out, "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>");
        if all.is_empty() {
            out.push_str("</svg>\n");
            return out;
        }
        let (x0, x1) = bounds(all.iter().map(|p| p.0));
        let (y0, y1) = bounds(all.iter().map(|p| p.1));
        let px = |x: f64| pad + (x - x0) / (x1 - x0) * (w - 2.0 * pad);
        let py = |y: f64| h - pad - (y - y0) / (y1 - y0) * (h - 2.0 * pad);
        let _ = writeln!(
            out,
            "<path d=\"M{pad} {pad} V{} H{}\" stroke=\"black\" fill=\"none\"/>",
            h - pad,
            w - pad
        );
        let _ = writeln!(
            out,
            "<text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\">log10 eps</text>",
            w / 2.0,
            h - 20.0
        );
        const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"];
        for (n, (name, pts)) in series.iter().enumerate() {
            let color = COLORS[n % COLORS.len()];
            let d: Vec<String> = pts
                .iter()
                .map(|(e, v)| format!("{:.2},{:.2}", px(e.log10()), py(v.log10())))
                .collect();
            let _ = writeln!(
                out,
                "<polyline points=\"{}\" stroke=\"{color}\" fill=\"none\"/>",
                d.join(" ")
            );
            for p in &d {
                let (cx, cy) = p.split_once(',').expect("pair");
                let _ = writeln!(out, "<circle cx=\"{cx}\" cy=\"{cy}\" r=\"3\" fill=\"{color}\"/>");
            }
            if let Some(s) = self.slopes[*name].slope {
                let lx: Vec<f64> = pts.iter().map(|p| p.0.log10()).collect();
                let ly: Vec<f64> = pts.iter().map(|p| p.1.log10()).collect();
                let c = ly.iter().sum::<f64>() / ly.len() as f64 - s * lx.iter().sum::<f64>() / lx.len() as f64;
                let (a, b) = bounds(lx.iter().copied());
                let _ = writeln!(
                    out,
                    "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"{color}\" stroke-dasharray=\"4 3\"/>",
                    px(a),
                    py(c + s * a),
                    px(b),
                    py(c + s * b)
                );
                let _ = writeln!(
                    out,
                    "<text x=\"{}\" y=\"{}\" font-size=\"11\" fill=\"{color}\">{name} slope {s:.3}</text>",
                    w - pad - 150.0,
                    pad + 14.0 * n as f64
                );
            }
        }
        out.push_str("</svg>\n");
        out
    }
}

fn bounds(it: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = it.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn points_of(rows: &[EpsRow], col: &str) -> Vec<(f64, f64)> {
    rows.iter()
        .filter(|r| r.failure.is_none())
        .filter_map(|r| r.errors.get(col).map(|v| (r.eps, *v)))
        .collect()
}

/// Sweep options shared by both studies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyOptions {
    pub recipe: Recipe,
    pub amplitude: f64,
    /// Expansion order of the approximate solution.
    pub order: usize,
    /// Conormal order of the linearised error norm and of `E_m`.
    pub m: usize,
    /// Run the resolution-doubling control at the smallest `ε`.
    pub floor_check: bool,
}

impl Default for StudyOptions {
    fn default() -> Self {
        Self {
            recipe: Recipe::VortexPair,
            amplitude: 1.0,
            order: 2,
            m: 2,
            floor_check: false,
        }
    }
}

#[derive(Serialize)]
struct HashInput<'a> {
    kind: &'a str,
    cfg: &'a SimConfig,
    eps: &'a [f64],
    grid: (f64, f64, usize, usize, f64),
    opts: &'a StudyOptions,
}

/// SHA-256 of the canonical JSON of everything a report depends on.
pub fn config_hash(kind: &str, cfg: &SimConfig, eps: &[f64], g: &Grid, opts: &StudyOptions) -> String {
    let input = HashInput {
        kind,
        cfg,
        eps,
        grid: (g.lx(), g.ly(), g.nx(), g.ny(), g.stretch()),
        opts,
    };
    let bytes = serde_json::to_vec(&input).expect("hash input serializes");
    hex::encode(Sha256::digest(&bytes))
}

/// Sorted, strictly decreasing copy of `eps`; rejects fewer than three or repeated values.
fn sweep_values(eps: &[f64]) -> Result<Vec<f64>> {
    if eps.len() < 3 {
        return Err(Error::Fit(format!("a sweep needs >= 3 eps values (got {})", eps.len())));
    }
    if let Some(e) = eps.iter().find(|e| !(**e > 0.0 && **e < 1.0)) {
        return Err(Error::InvalidParams(format!("eps must lie in (0, 1) (got {e})")));
    }
    let mut v = eps.to_vec();
    v.sort_by(|a, b| b.partial_cmp(a).expect("finite"));
    if v.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Fit("eps values are not distinct; slope undefined".into()));
    }
    Ok(v)
}

fn check_layer(g: &Grid, eps_min: f64) -> Result<()> {
    let n = g.nodes_below(eps_min);
    if n < LAYER_NODES {
        return Err(Error::Sizing(format!(
            "{n} nodes in [0, {eps_min}] (need {LAYER_NODES}); rebuild the grid with eps_hint <= {eps_min}"
        )));
    }
    Ok(())
}

fn l2_vec(g: &Grid, fs: &[&Field]) -> f64 {
    fs.iter().map(|f| g.inner(f, f)).sum::<f64>().max(0.0).sqrt()
}

fn sup_mag(a: &Field, b: &Field, rows: impl Fn(usize) -> bool) -> f64 {
    let nx = a.nx();
    (0..a.ny())
        .filter(|&j| rows(j))
        .flat_map(|j| (0..nx).map(move |i| (i, j)))
        .map(|(i, j)| a.get(i, j).hypot(b.get(i, j)))
        .fold(0.0, f64::max)
}

fn diff(a: &State, b: &State) -> State {
    State {
        u1: a.u1.sub(&b.u1),
        u2: a.u2.sub(&b.u2),
        theta: a.theta.sub(&b.theta),
        p: Field::zeros(a.u1.nx(), a.u1.ny()),
        time: a.time,
        wall_ghost: None,
    }
}

fn bump(map: &mut BTreeMap<String, f64>, key: &str, v: f64) {
    let e = map.entry(key.to_string()).or_insert(0.0);
    *e = e.max(v);
}

fn finish(kind: &str, eps: Vec<f64>, rows: Vec<EpsRow>, floor_limited: Option<bool>, hash: String) -> RateReport {
    let mut cols: Vec<String> = rows.iter().flat_map(|r| r.errors.keys().cloned()).collect();
    cols.sort();
    cols.dedup();
    let mut slopes = BTreeMap::new();
    let mut monotone = BTreeMap::new();
    for c in &cols {
        let pts = points_of(&rows, c);
        slopes.insert(c.clone(), SlopeFit::from_points(&pts));
        // eps decreasing along the sweep, so errors should not increase
        monotone.insert(c.clone(), pts.windows(2).all(|w| w[1].1 <= w[0].1));
    }
    RateReport {
        kind: kind.into(),
        eps_values: eps,
        errors: rows,
        slopes,
        monotone,
        floor_limited,
        config_hash: hash,
    }
}

fn shared_expansion(g: &Grid, s0: &State, cfg: &SimConfig, order: usize) -> Result<Arc<Expansion>> {
    let icfg = SimConfig {
        params: cfg.params.without_dissipation(),
        ..cfg.clone()
    };
    Ok(Arc::new(Expansion::build(g, s0, &icfg, order)?))
}

/// Viscous runs per `ε` against the inviscid reference and the assembled expansion.
pub fn converge(base: &SimConfig, eps_list: &[f64], g: &Grid, opts: &StudyOptions) -> Result<RateReport> {
    let eps = sweep_values(eps_list)?;
    check_layer(g, *eps.last().expect("nonempty"))?;
    let hash = config_hash("converge", base, &eps, g, opts);
    let s0 = make_initial_data(g, opts.recipe, opts.amplitude, base.params.alpha)?;
    let ex = shared_expansion(g, &s0, base, opts.order)?;

    let rows: Vec<EpsRow> = eps
        .par_iter()
        .map(|&e| converge_one(g, &s0, base, &ex, e, opts))
        .collect::<Result<Vec<_>>>()?;

    let floor_limited = if opts.floor_check {
        let e = *eps.last().expect("nonempty");
        let floor = resolution_floor(g, &s0, &base.clone_at(e), opts)?;
        let signal = rows.last().and_then(|r| r.errors.get(COL_L2_U)).copied().unwrap_or(0.0);
        Some(signal <= floor)
    } else {
        None
    };
    Ok(finish("converge", eps, rows, floor_limited, hash))
}

trait AtEps {
    fn clone_at(&self, eps: f64) -> SimConfig;
}

impl AtEps for SimConfig {
    fn clone_at(&self, eps: f64) -> SimConfig {
        SimConfig {
            params: self.params.at_eps(eps),
            ..self.clone()
        }
    }
}

fn converge_one(g: &Grid, s0: &State, base: &SimConfig, ex: &Arc<Expansion>, e: f64, opts: &StudyOptions) -> Result<EpsRow> {
    let cfg = base.clone_at(e);
    let traj = run(g, s0, &cfg, Which::Viscous);
    let approx = ApproxSolution::new(ex.clone(), e, opts.order)?;
    let zone = |j: usize| g.y(j) <= BOUNDARY_ZONE * e;
    let mut errors = BTreeMap::new();
    let scale = e.powi(opts.order as i32);
    for (sv, so) in traj.snapshots.iter().zip(&ex.outer.snapshots) {
        let d = diff(sv, so);
        bump(&mut errors, COL_L2_U, l2_vec(g, &[&d.u1, &d.u2]));
        bump(&mut errors, COL_L2_THETA, g.l2(&d.theta));
        bump(&mut errors, COL_LINF_U, sup_mag(&d.u1, &d.u2, |_| true));
        bump(&mut errors, COL_LINF_THETA, d.theta.max_abs());
        bump(&mut errors, "Linf_u_boundary", sup_mag(&d.u1, &d.u2, zone));
        bump(&mut errors, "Linf_u_interior", sup_mag(&d.u1, &d.u2, |j| !zone(j)));
        let ua = approx.assemble(g, sv.time)?;
        let da = diff(sv, &ua);
        bump(&mut errors, "L2_u_vs_approx", l2_vec(g, &[&da.u1, &da.u2]));
        bump(&mut errors, "Linf_u_vs_approx", sup_mag(&da.u1, &da.u2, |_| true));
        bump(&mut errors, "L2_theta_vs_approx", g.l2(&da.theta));
        let r = approx.residual(g, sv.time, &cfg.params)?;
        bump(&mut errors, COL_RESIDUAL, scale * l2_vec(g, &[&r.0, &r.1, &r.2]));
        let dy = [ddy(g, &r.0)?, ddy(g, &r.1)?, ddy(g, &r.2)?];
        bump(&mut errors, COL_RESIDUAL_DY, scale * l2_vec(g, &[&dy[0], &dy[1], &dy[2]]));
        bump(&mut errors, COL_EM, em_parts(g, &da, cfg.params.alpha, opts.m)?.total());
    }
    Ok(EpsRow {
        eps: e,
        errors,
        failure: traj.failure.map(|f| f.to_string()),
    })
}

/// `sup_t ‖u_h − u_{h/2}‖_{L²}` at the nodes shared by the two grids.
fn resolution_floor(g: &Grid, s0: &State, cfg: &SimConfig, opts: &StudyOptions) -> Result<f64> {
    let fine = Grid::build(g.lx(), g.ly(), 2 * g.nx(), 2 * g.ny() - 1, g.stretch(), 1.0)?;
    let f0 = make_initial_data(&fine, opts.recipe, opts.amplitude, cfg.params.alpha)?;
    let fcfg = SimConfig {
        dt: cfg.dt / 2.0,
        save_every: 2 * cfg.save_every,
        ..cfg.clone()
    };
    let coarse = run(g, s0, cfg, Which::Viscous).into_result()?;
    let finer = run(&fine, &f0, &fcfg, Which::Viscous).into_result()?;
    let inject = |f: &Field| {
        let mut out = Field::zeros(g.nx(), g.ny());
        for j in 0..g.ny() {
            for i in 0..g.nx() {
                out.set(i, j, f.get(2 * i, 2 * j));
            }
        }
        out
    };
    Ok(coarse
        .snapshots
        .iter()
        .zip(&finer.snapshots)
        .map(|(c, f)| l2_vec(g, &[&c.u1.sub(&inject(&f.u1)), &c.u2.sub(&inject(&f.u2))]))
        .fold(0.0, f64::max))
}

/// Linearised error runs driven by the order-`K` remainder with data `ε^{K+1} u₀`.
pub fn linstab_study(base: &SimConfig, eps_list: &[f64], g: &Grid, opts: &StudyOptions) -> Result<RateReport> {
    if opts.order < 2 {
        return Err(Error::UnsupportedOrder(opts.order));
    }
    if opts.m == 0 {
        return Err(Error::InvalidParams("conormal order m must be >= 1".into()));
    }
    let eps = sweep_values(eps_list)?;
    check_layer(g, *eps.last().expect("nonempty"))?;
    let hash = config_hash("linstab", base, &eps, g, opts);
    let s0 = make_initial_data(g, opts.recipe, opts.amplitude, base.params.alpha)?;
    let ex = shared_expansion(g, &s0, base, opts.order)?;
    let rows: Vec<EpsRow> = eps
        .par_iter()
        .map(|&e| linstab_one(g, &s0, base, &ex, e, opts))
        .collect::<Result<Vec<_>>>()?;
    Ok(finish("linstab", eps, rows, None, hash))
}

fn linstab_one(g: &Grid, s0: &State, base: &SimConfig, ex: &Arc<Expansion>, e: f64, opts: &StudyOptions) -> Result<EpsRow> {
    let cfg = base.clone_at(e);
    let approx = ApproxSolution::new(ex.clone(), e, opts.order)?;
    let bg = approx.background(g, &cfg.params)?;
    let c = e.powi(opts.order as i32 + 1);
    let e0 = State {
        u1: s0.u1.scale(c),
        u2: s0.u2.scale(c),
        theta: s0.theta.scale(c),
        p: Field::zeros(g.nx(), g.ny()),
        time: s0.time,
        wall_ghost: None,
    };
    let traj = run(g, &e0, &cfg, Which::Linearized(&bg));
    let mut errors = BTreeMap::new();
    for s in &traj.snapshots {
        let fs = [&s.u1, &s.u2, &s.theta];
        let dys = [ddy(g, &s.u1)?, ddy(g, &s.u2)?, ddy(g, &s.theta)?];
        let n = hco_norm_vec(g, &fs, opts.m)? + hco_norm_vec(g, &[&dys[0], &dys[1], &dys[2]], opts.m - 1)?;
        bump(&mut errors, COL_CONORMAL, n);
        bump(&mut errors, COL_L2_U, l2_vec(g, &[&s.u1, &s.u2]));
        bump(&mut errors, COL_L2_THETA, g.l2(&s.theta));
        bump(&mut errors, COL_LINF_U, sup_mag(&s.u1, &s.u2, |_| true));
        bump(&mut errors, COL_LINF_THETA, s.theta.max_abs());
        bump(&mut errors, COL_EM, em_parts(g, s, cfg.params.alpha, opts.m)?.total());
        let r = approx.residual(g, s.time, &cfg.params)?;
        bump(&mut errors, COL_RESIDUAL, c / e * l2_vec(g, &[&r.0, &r.1, &r.2]));
    }
    Ok(EpsRow {
        eps: e,
        errors,
        failure: traj.failure.map(|f| f.to_string()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_laws() {
        for p in [1.0, 2.0] {
            let pts: Vec<(f64, f64)> = [0.2f64, 0.1, 0.05, 0.025].iter().map(|&e| (e, 3.0 * e.powf(p))).collect();
            let (s, r) = fit_rate(&pts).unwrap();
            assert!((s - p).abs() < 1e-12);
            assert!(r < 1e-12);
        }
    }

    #[test]
    fn floor_contamination_is_flagged() {
        let pts: Vec<(f64, f64)> = [0.2, 0.1, 0.05, 0.025, 0.0125, 0.00625]
            .iter()
            .map(|&e| (e, e + 0.01))
            .collect();
        let f = SlopeFit::from_points(&pts);
        assert!(f.nonlinear, "{f:?}");
    }

    #[test]
    fn degenerate_abscissae_and_bad_errors() {
        assert!(fit_rate(&[(0.1, 1.0), (0.1, 2.0), (0.1, 3.0)]).is_err());
        assert!(fit_rate(&[(0.2, 1.0), (0.1, 0.0), (0.05, 3.0)]).is_err());
        assert!(fit_rate(&[(0.2, 1.0), (0.1, 0.5)]).is_err());
        assert!(sweep_values(&[0.1, 0.1, 0.1]).is_err());
    }

    #[test]
    fn zero_errors_are_trivial() {
        let f = SlopeFit::from_points(&[(0.2, 0.0), (0.1, 0.0), (0.05, 0.0)]);
        assert_eq!(f.status, FitStatus::Trivial);
    }

    #[test]
    fn sweep_is_sorted_decreasing() {
        assert_eq!(sweep_values(&[0.05, 0.2, 0.1]).unwrap(), vec![0.2, 0.1, 0.05]);
    }
}
