//! Conormal Sobolev norms, the `η` variable, the energy functional `E_m`
//! and audits of the discrete energy balance and maximum principle.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{Field, State};
use crate::grid::{ddx, ddy, z2, Grid, M_MAX};
use crate::solver::Trajectory;

/// `Z^β f` for every `|β| ≤ m`, keyed by `(β₁, β₂)`; `Z₂` is applied first.
fn conormal_family(g: &Grid, f: &Field, m: usize) -> Result<Vec<((usize, usize), Field)>> {
    if m > M_MAX {
        return Err(Error::OrderCap { order: m, cap: M_MAX });
    }
    g.check(f)?;
    let mut out = Vec::new();
    let mut cur = f.clone();
    for b2 in 0..=m {
        if b2 > 0 {
            cur = z2(g, &cur)?;
        }
        let spec = g.forward(&cur);
        for b1 in 0..=m - b2 {
            let zf = if b1 == 0 {
                cur.clone()
            } else {
                g.inverse(&g.dx_spectrum(&spec, b1))
            };
            out.push(((b1, b2), zf));
        }
    }
    Ok(out)
}

/// `Σ_{|β|≤m} ‖Z^β (f₁, …, f_n)‖_{L²}`; each term is the product-space norm.
pub fn hco_norm_vec(g: &Grid, fs: &[&Field], m: usize) -> Result<f64> {
    Ok(hco_by_order(g, fs, m)?.iter().sum())
}

/// Contribution of each total order `0..=m` to the sum-of-norms.
fn hco_by_order(g: &Grid, fs: &[&Field], m: usize) -> Result<Vec<f64>> {
    let fams = fs
        .iter()
        .map(|f| conormal_family(g, f, m))
        .collect::<Result<Vec<_>>>()?;
    let mut by_order = vec![0.0; m + 1];
    if fams.is_empty() {
        return Ok(by_order);
    }
    for (idx, ((b1, b2), _)) in fams[0].iter().enumerate() {
        let sq: f64 = fams.iter().map(|fam| g.inner(&fam[idx].1, &fam[idx].1)).sum();
        by_order[b1 + b2] += sq.max(0.0).sqrt();
    }
    Ok(by_order)
}

/// `‖f‖_{H^m_co}`.
pub fn hco_norm(g: &Grid, f: &Field, m: usize) -> Result<f64> {
    hco_norm_vec(g, &[f], m)
}

fn sup_pointwise(fs: &[&Field]) -> f64 {
    let n = fs.first().map_or(0, |f| f.values().len());
    (0..n)
        .map(|i| fs.iter().map(|f| f.values()[i].powi(2)).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
}

/// `‖(f₁, …, f_n)‖_{k,∞} = Σ_{|β|≤k} sup |Z^β f|`.
pub fn linf_k_vec(g: &Grid, fs: &[&Field], k: usize) -> Result<f64> {
    let fams = fs
        .iter()
        .map(|f| conormal_family(g, f, k))
        .collect::<Result<Vec<_>>>()?;
    if fams.is_empty() {
        return Ok(0.0);
    }
    Ok((0..fams[0].len())
        .map(|idx| sup_pointwise(&fams.iter().map(|fam| &fam[idx].1).collect::<Vec<_>>()))
        .sum())
}

pub fn linf_k(g: &Grid, f: &Field, k: usize) -> Result<f64> {
    linf_k_vec(g, &[f], k)
}

/// `η = ∂yu₁ − ∂xu₂ − αu₁`.
pub fn eta_field(g: &Grid, s: &State, alpha: f64) -> Result<Field> {
    let mut eta = ddy(g, &s.u1)?;
    eta.axpy(-1.0, &ddx(g, &s.u2)?);
    eta.axpy(-alpha, &s.u1);
    Ok(eta)
}

/// Pieces of `E_m`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmParts {
    /// `‖(u, θ)‖²_{H^m_co}`.
    pub state: f64,
    /// `‖(η, ∂yθ)‖²_{H^{m−1}_co}`.
    pub normal: f64,
    /// `‖(η, ∂yθ)‖²_{1,∞}`.
    pub sup: f64,
}

impl EmParts {
    pub fn total(&self) -> f64 {
        self.state + self.normal + self.sup
    }
}

pub fn em_parts(g: &Grid, s: &State, alpha: f64, m: usize) -> Result<EmParts> {
    if m == 0 {
        return Err(Error::InvalidParams("E_m needs m >= 1".into()));
    }
    let eta = eta_field(g, s, alpha)?;
    let thy = ddy(g, &s.theta)?;
    Ok(EmParts {
        state: hco_norm_vec(g, &[&s.u1, &s.u2, &s.theta], m)?.powi(2),
        normal: hco_norm_vec(g, &[&eta, &thy], m - 1)?.powi(2),
        sup: linf_k_vec(g, &[&eta, &thy], 1)?.powi(2),
    })
}

/// `E_m(t)`.
#[allow(non_snake_case)]
pub fn Em(g: &Grid, s: &State, alpha: f64, m: usize) -> Result<f64> {
    Ok(em_parts(g, s, alpha, m)?.total())
}

/// `‖f‖²_∞ / (‖∂yf‖_{H^{m0}_co}‖f‖_{H^{m0}_co} + ‖f‖²_{H^{m0}_co})`, zero for `f = 0`.
pub fn embedding_ratio(g: &Grid, f: &Field, m0: usize) -> Result<f64> {
    if m0 < 2 {
        return Err(Error::InvalidParams(format!("embedding needs m0 >= 2 (got {m0})")));
    }
    let n = hco_norm(g, f, m0)?;
    let dn = hco_norm(g, &ddy(g, f)?, m0)?;
    let den = dn * n + n * n;
    if den == 0.0 {
        return Ok(0.0);
    }
    Ok(f.max_abs().powi(2) / den)
}

/// Ratios of the left sides of the three velocity estimates built on `η`
/// to their right sides (order `m0`).
pub fn eta_estimate_ratios(g: &Grid, s: &State, alpha: f64, m0: usize) -> Result<[f64; 3]> {
    if m0 < 2 {
        return Err(Error::InvalidParams(format!("estimates need m0 >= 2 (got {m0})")));
    }
    let eta = eta_field(g, s, alpha)?;
    let u = [&s.u1, &s.u2];
    let grads = [ddx(g, &s.u1)?, ddy(g, &s.u1)?, ddx(g, &s.u2)?, ddy(g, &s.u2)?];
    let grad_refs: Vec<&Field> = grads.iter().collect();
    let w1inf = sup_pointwise(&u) + sup_pointwise(&grad_refs);
    let ratio = |num: f64, den: f64| if den == 0.0 { 0.0 } else { num / den };
    let hu = |m: usize| hco_norm_vec(g, &u, m);
    let he = |m: usize| hco_norm(g, &eta, m);
    Ok([
        ratio(w1inf, hu(m0 + 2)? + he(m0 + 1)? + eta.max_abs()),
        ratio(linf_k_vec(g, &u, 2)?, hu(m0 + 3)? + he(m0 + 2)?),
        ratio(
            linf_k_vec(g, &grad_refs, 1)?,
            hu(m0 + 3)? + he(m0 + 3)? + linf_k(g, &eta, 1)?,
        ),
    ])
}

/// Norm diagnostics of one state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub time: f64,
    /// Per field, `‖·‖_{H^m_co}` for `m = 0..=m_max`.
    pub hco: BTreeMap<String, Vec<f64>>,
    /// Per field, `‖·‖_{k,∞}` for `k = 0..=k_max`.
    pub linf_k: BTreeMap<String, Vec<f64>>,
    /// `‖η‖_{H^m_co}` for `m = 0..=m_max`.
    pub eta_hco: Vec<f64>,
    #[serde(rename = "Em")]
    pub em: f64,
}

/// Cumulative sums of per-order contributions.
fn cumulative(v: Vec<f64>) -> Vec<f64> {
    v.iter()
        .scan(0.0, |acc, x| {
            *acc += x;
            Some(*acc)
        })
        .collect()
}

impl NormReport {
    pub fn compute(g: &Grid, s: &State, alpha: f64, m_max: usize, k_max: usize, m_em: usize) -> Result<Self> {
        let eta = eta_field(g, s, alpha)?;
        let named = [("u1", &s.u1), ("u2", &s.u2), ("theta", &s.theta)];
        let mut hco = BTreeMap::new();
        let mut linf = BTreeMap::new();
        for (name, f) in named {
            hco.insert(name.to_string(), cumulative(hco_by_order(g, &[f], m_max)?));
            let l = (0..=k_max).map(|k| linf_k(g, f, k)).collect::<Result<Vec<_>>>()?;
            linf.insert(name.to_string(), l);
        }
        Ok(Self {
            time: s.time,
            hco,
            linf_k: linf,
            eta_hco: cumulative(hco_by_order(g, &[&eta], m_max)?),
            em: Em(g, s, alpha, m_em)?,
        })
    }

    pub fn is_valid(&self) -> bool {
        let ok = |v: &[f64]| v.iter().all(|x| x.is_finite() && *x >= 0.0) && v.windows(2).all(|w| w[1] >= w[0]);
        self.hco.values().all(|v| ok(v))
            && self.linf_k.values().all(|v| ok(v))
            && ok(&self.eta_hco)
            && self.em.is_finite()
            && self.em >= 0.0
    }
}

/// One CSV row per report: time, then every norm column.
pub fn reports_csv(reports: &[NormReport]) -> String {
    let mut out = String::new();
    let Some(first) = reports.first() else {
        return out;
    };
    let mut header = vec!["time".to_string()];
    for (name, v) in &first.hco {
        header.extend((0..v.len()).map(|m| format!("hco{m}_{name}")));
    }
    for (name, v) in &first.linf_k {
        header.extend((0..v.len()).map(|k| format!("linf{k}_{name}")));
    }
    header.extend((0..first.eta_hco.len()).map(|m| format!("hco{m}_eta")));
    header.push("Em".into());
    let _ = writeln!(out, "{}", header.join(","));
    for r in reports {
        let mut row = vec![format!("{:.17e}", r.time)];
        for v in r.hco.values().chain(r.linf_k.values()) {
            row.extend(v.iter().map(|x| format!("{x:.17e}")));
        }
        row.extend(r.eta_hco.iter().map(|x| format!("{x:.17e}")));
        row.push(format!("{:.17e}", r.em));
        let _ = writeln!(out, "{}", row.join(","));
    }
    out
}

/// Residual of the discrete energy balance per interior step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditSeries {
    pub times: Vec<f64>,
    /// `(E_{n+1} − E_{n−1})/(2Δt) − RHS_n`.
    pub residual: Vec<f64>,
    /// Boundary slip term of each step (never negative).
    pub boundary: Vec<f64>,
}

impl AuditSeries {
    /// `Σ Δt |r_n|`: the time-integrated imbalance.
    pub fn integrated(&self) -> f64 {
        let dt = match self.times.as_slice() {
            [a, b, ..] => b - a,
            _ => 0.0,
        };
        self.residual.iter().map(|r| r.abs()).sum::<f64>() * dt
    }

    pub fn max_abs(&self) -> f64 {
        self.residual.iter().fold(0.0, |m, r| m.max(r.abs()))
    }
}

/// Energy-balance audit over the per-step diagnostics of a run.
pub fn energy_audit(traj: &Trajectory) -> Result<AuditSeries> {
    let d = &traj.diagnostics;
    if d.len() < 3 {
        return Err(Error::Audit(format!("need >= 3 diagnostic records (got {})", d.len())));
    }
    let mut out = AuditSeries {
        times: Vec::new(),
        residual: Vec::new(),
        boundary: Vec::new(),
    };
    for n in 1..d.len() - 1 {
        let dt2 = d[n + 1].time - d[n - 1].time;
        out.times.push(d[n].time);
        out.residual.push((d[n + 1].energy() - d[n - 1].energy()) / dt2 - d[n].balance());
        out.boundary.push(d[n].boundary_flux);
    }
    Ok(out)
}

/// `max_t max|θ(t)| / max|θ₀| − 1`, or `None` when `θ₀ = 0`.
pub fn max_principle_audit(traj: &Trajectory) -> Option<f64> {
    let peaks: Vec<f64> = if traj.diagnostics.is_empty() {
        traj.snapshots.iter().map(|s| s.theta.max_abs()).collect()
    } else {
        traj.diagnostics.iter().map(|d| d.max_theta).collect()
    };
    let first = *peaks.first()?;
    if first == 0.0 {
        return None;
    }
    Some(peaks.iter().fold(0.0f64, |m, &v| m.max(v)) / first - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid() -> Grid {
        Grid::build(2.0 * PI, 8.0, 32, 96, 1.5, 1.0).unwrap()
    }

    #[test]
    fn order_zero_is_l2() {
        let g = grid();
        let f = g.sample(|x, y| x.sin() * (-y).exp());
        assert!((hco_norm(&g, &f, 0).unwrap() - g.l2(&f)).abs() < 1e-14);
    }

    #[test]
    fn x_only_fields_skip_normal_terms() {
        let g = grid();
        let f = g.sample(|x, _| (2.0 * x).cos());
        let direct: f64 = (0..=3).map(|k| g.l2(&crate::grid::ddx_n(&g, &f, k).unwrap())).sum();
        assert!((hco_norm(&g, &f, 3).unwrap() - direct).abs() < 1e-10 * direct);
    }

    #[test]
    fn cap_is_enforced() {
        let g = grid();
        let f = Field::zeros(32, 96);
        assert!(matches!(hco_norm(&g, &f, M_MAX + 1), Err(Error::OrderCap { .. })));
    }

    #[test]
    fn eta_is_vorticity_without_slip() {
        let g = grid();
        let mut s = State::zeros(&g);
        s.u1 = g.sample(|x, y| x.cos() * (-y).exp());
        s.u2 = g.sample(|x, y| x.sin() * y * (-y).exp());
        let eta = eta_field(&g, &s, 0.0).unwrap();
        let curl = ddy(&g, &s.u1).unwrap().sub(&ddx(&g, &s.u2).unwrap());
        assert_eq!(eta, curl);
    }

    #[test]
    fn em_zero_and_parts_sum() {
        let g = grid();
        let z = State::zeros(&g);
        assert_eq!(Em(&g, &z, 1.0, 2).unwrap(), 0.0);
        let mut s = State::zeros(&g);
        s.u1 = g.sample(|x, y| x.cos() * (-y * y).exp());
        s.theta = g.sample(|x, y| x.sin() * (-y).exp());
        let p = em_parts(&g, &s, 1.0, 2).unwrap();
        let total = Em(&g, &s, 1.0, 2).unwrap();
        assert!((total - (p.state + p.normal + p.sup)).abs() <= 1e-12 * total);
    }

    #[test]
    fn embedding_of_zero_is_zero() {
        let g = grid();
        assert_eq!(embedding_ratio(&g, &Field::zeros(32, 96), 2).unwrap(), 0.0);
        assert!(embedding_ratio(&g, &Field::zeros(32, 96), 1).is_err());
    }
}
