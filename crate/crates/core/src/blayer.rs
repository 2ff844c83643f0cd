//! Boundary-layer expansion: inner profiles in the fast variable `z = y/ε`,
//! their assembly with the inviscid flow, and the defect of the result.
//!
//! The approximation of order `K` is
//!
//! ```text
//! u_a = u⁰ + w,   θ_a = θ⁰ + Θ,   p_a = p⁰ + Π
//! w₁ = εU₁¹ + ε²U₁² + ∂yψ_L,   w₂ = ε²U₂² + ε³U₂³ − ∂xψ_L
//! ψ_L = ε (∫₀^∞ w₁ dz) e^{−y²}
//! ```
//!
//! where `U₂^{i+1} = ∫_z^∞ ∂xU₁^i` keeps `w` divergence-free and the
//! streamfunction lift `ψ_L` cancels its wall normal velocity.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::banded::{Banded, BandedLu};
use crate::error::{Error, Result};
use crate::fields::{Field, PhysParams, State};
use crate::grid::{ddx, ddy, Grid};
use crate::snapshot::Snapshot;
use crate::solver::stepper::tableau;
use crate::solver::{run_with, RunOptions, SimConfig, StageView, Trajectory, Which, CFL_LIMIT};

/// Default extent of the fast variable.
pub const ZMAX: f64 = 20.0;
/// Largest admissible profile magnitude near `z = Zmax`.
pub const DECAY_TOL: f64 = 1e-8;
/// Default number of `z` nodes.
pub const NZ: usize = 401;
/// Fewest `z` nodes accepted.
pub const NZ_MIN: usize = 256;
/// Decay is monitored on `z ≥ TAIL · Zmax`; the last node is pinned to zero.
const TAIL: f64 = 0.95;

/// Uniform grid in `(x, z)`, periodic in `x`.
#[derive(Debug)]
pub struct ZGrid {
    xz: Grid,
    dz: f64,
}

impl ZGrid {
    pub fn new(lx: f64, nx: usize, zmax: f64, nz: usize) -> Result<Self> {
        if nz < NZ_MIN {
            return Err(Error::InvalidGrid(format!("z grid needs >= {NZ_MIN} nodes (got {nz})")));
        }
        if !(zmax >= ZMAX) {
            return Err(Error::InvalidGrid(format!("Zmax must be >= {ZMAX} (got {zmax})")));
        }
        let xz = Grid::build(lx, zmax, nx, nz, 0.0, 1.0)?;
        Ok(Self {
            dz: zmax / (nz - 1) as f64,
            xz,
        })
    }

    /// Matching `z` grid for the physical grid `g` with the default extent.
    pub fn for_grid(g: &Grid) -> Result<Self> {
        Self::new(g.lx(), g.nx(), ZMAX, NZ)
    }

    pub fn nx(&self) -> usize {
        self.xz.nx()
    }

    pub fn nz(&self) -> usize {
        self.xz.ny()
    }

    pub fn dz(&self) -> f64 {
        self.dz
    }

    pub fn zmax(&self) -> f64 {
        self.xz.ly()
    }

    pub fn z(&self, k: usize) -> f64 {
        k as f64 * self.dz
    }

    /// The `(x, z)` grid, for spectral `x` derivatives.
    pub fn xz(&self) -> &Grid {
        &self.xz
    }

    fn zeros(&self) -> Field {
        Field::zeros(self.nx(), self.nz())
    }

    /// Four-point Lagrange stencil at `z`, or `None` past the last node.
    fn cubic(&self, z: f64) -> Option<(usize, [f64; 4])> {
        let n = self.nz();
        if z >= self.zmax() {
            return None;
        }
        let s = z / self.dz;
        let k0 = (s.floor() as usize).saturating_sub(1).min(n - 4);
        let mut w = [0.0; 4];
        for (a, wa) in w.iter_mut().enumerate() {
            let mut v = 1.0;
            for b in 0..4 {
                if b != a {
                    v *= (s - (k0 + b) as f64) / (a as f64 - b as f64);
                }
            }
            *wa = v;
        }
        Some((k0, w))
    }

    /// `∂z` by central differences; at `z = 0` the given slope or a one-sided formula.
    fn d1(&self, f: &Field, wall: Option<&[f64]>) -> Field {
        let (nx, n) = (self.nx(), self.nz());
        let h = self.dz;
        let mut out = self.zeros();
        for k in 1..n - 1 {
            for i in 0..nx {
                out.set(i, k, (f.get(i, k + 1) - f.get(i, k - 1)) / (2.0 * h));
            }
        }
        for i in 0..nx {
            let v0 = match wall {
                Some(s) => s[i],
                None => (-3.0 * f.get(i, 0) + 4.0 * f.get(i, 1) - f.get(i, 2)) / (2.0 * h),
            };
            out.set(i, 0, v0);
            let v = (3.0 * f.get(i, n - 1) - 4.0 * f.get(i, n - 2) + f.get(i, n - 3)) / (2.0 * h);
            out.set(i, n - 1, v);
        }
        out
    }

    /// `∂zz` with Neumann slope `flux` at `z = 0` (ghost node) and zero at `Zmax`.
    fn d2(&self, f: &Field, flux: &[f64]) -> Field {
        let (nx, n) = (self.nx(), self.nz());
        let h2 = self.dz * self.dz;
        let mut out = self.zeros();
        for i in 0..nx {
            let v = (2.0 * f.get(i, 1) - 2.0 * f.get(i, 0) - 2.0 * self.dz * flux[i]) / h2;
            out.set(i, 0, v);
        }
        for k in 1..n - 1 {
            for i in 0..nx {
                let v = (f.get(i, k + 1) - 2.0 * f.get(i, k) + f.get(i, k - 1)) / h2;
                out.set(i, k, v);
            }
        }
        out
    }

    /// `∫_z^{Zmax} f dz'` by the trapezoid rule.
    fn tail_integral(&self, f: &Field) -> Field {
        let (nx, n) = (self.nx(), self.nz());
        let mut out = self.zeros();
        for k in (0..n - 1).rev() {
            for i in 0..nx {
                let v = out.get(i, k + 1) + 0.5 * self.dz * (f.get(i, k) + f.get(i, k + 1));
                out.set(i, k, v);
            }
        }
        out
    }

    fn dx(&self, f: &Field) -> Field {
        ddx(&self.xz, f).expect("z-grid field")
    }

    /// Largest magnitude on the decay-monitoring tail.
    pub fn tail_max(&self, f: &Field) -> f64 {
        let k0 = (TAIL * (self.nz() - 1) as f64).floor() as usize;
        (k0..self.nz())
            .flat_map(|k| f.row(k).iter())
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// `Γ(∂z f)` by the one-sided second-order formula.
    pub fn wall_slope(&self, f: &Field) -> Vec<f64> {
        (0..self.nx())
            .map(|i| (-3.0 * f.get(i, 0) + 4.0 * f.get(i, 1) - f.get(i, 2)) / (2.0 * self.dz))
            .collect()
    }
}

/// Wall traces of the inviscid flow used as inner-equation coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct WallTraces {
    /// `Γu₁⁰`.
    pub u1: Vec<f64>,
    /// `Γ∂xu₁⁰`, equal to `−Γ∂yu₂⁰`.
    pub u1_x: Vec<f64>,
    /// `Γ∂yu₁⁰`.
    pub u1_y: Vec<f64>,
    /// `Γ∂x∂yu₁⁰`, equal to `−Γ∂yyu₂⁰`.
    pub u1_xy: Vec<f64>,
    pub theta_x: Vec<f64>,
    pub theta_y: Vec<f64>,
    pub theta_xy: Vec<f64>,
}

impl WallTraces {
    pub fn from_fields(g: &Grid, u1: &Field, theta: &Field) -> Result<Self> {
        let row0 = |f: &Field| f.row(0).to_vec();
        let u1y = ddy(g, u1)?;
        let thy = ddy(g, theta)?;
        Ok(Self {
            u1: row0(u1),
            u1_x: row0(&ddx(g, u1)?),
            u1_xy: row0(&ddx(g, &u1y)?),
            u1_y: row0(&u1y),
            theta_x: row0(&ddx(g, theta)?),
            theta_xy: row0(&ddx(g, &thy)?),
            theta_y: row0(&thy),
        })
    }

    /// Spatially uniform traces, all derivatives zero except `Γ∂yu₁⁰`.
    pub fn uniform(nx: usize, u1: f64, u1_y: f64) -> Self {
        let z = vec![0.0; nx];
        Self {
            u1: vec![u1; nx],
            u1_y: vec![u1_y; nx],
            u1_x: z.clone(),
            u1_xy: z.clone(),
            theta_x: z.clone(),
            theta_y: z.clone(),
            theta_xy: z,
        }
    }

    /// Neumann data `αΓu₁⁰ − Γ∂yu₁⁰` of the first inner profile.
    pub fn flux(&self, alpha: f64) -> Vec<f64> {
        self.u1.iter().zip(&self.u1_y).map(|(u, d)| alpha * u - d).collect()
    }
}

/// Traces at every stage of a run with step `dt` started at `t0`.
#[derive(Clone, Debug)]
pub struct TraceSeries {
    pub t0: f64,
    pub dt: f64,
    pub stages: Vec<[WallTraces; 3]>,
    /// Traces of the final state.
    pub last: WallTraces,
}

impl TraceSeries {
    /// The same traces at every stage.
    pub fn frozen(t0: f64, dt: f64, steps: usize, tr: WallTraces) -> Self {
        Self {
            t0,
            dt,
            stages: vec![[tr.clone(), tr.clone(), tr.clone()]; steps],
            last: tr,
        }
    }

    pub fn steps(&self) -> usize {
        self.stages.len()
    }

    /// Traces at the start of step `n` (`n = steps` gives the final state).
    pub fn at_step(&self, n: usize) -> &WallTraces {
        if n == self.steps() {
            &self.last
        } else {
            &self.stages[n][0]
        }
    }
}

/// One order of the inner expansion at one time, on the `(x, z)` grid.
#[derive(Clone, Debug, PartialEq)]
pub struct InnerProfile {
    pub order: usize,
    pub time: f64,
    pub u1: Field,
    pub u2: Field,
    pub theta: Field,
    pub p: Field,
}

impl InnerProfile {
    fn zero(zg: &ZGrid, order: usize, time: f64) -> Self {
        Self {
            order,
            time,
            u1: zg.zeros(),
            u2: zg.zeros(),
            theta: zg.zeros(),
            p: zg.zeros(),
        }
    }

    pub fn is_zero(&self) -> bool {
        [&self.u1, &self.u2, &self.theta, &self.p]
            .iter()
            .all(|f| f.values().iter().all(|&v| v == 0.0))
    }

    pub fn tail_max(&self, zg: &ZGrid) -> f64 {
        [&self.u1, &self.u2, &self.theta, &self.p]
            .iter()
            .map(|f| zg.tail_max(f))
            .fold(0.0, f64::max)
    }

    /// Snapshot whose rows are `z` levels.
    pub fn to_snapshot(&self) -> Snapshot {
        let mut s = Snapshot::new(
            self.time,
            vec![
                ("U1".into(), self.u1.clone()),
                ("U2".into(), self.u2.clone()),
                ("Theta".into(), self.theta.clone()),
                ("P".into(), self.p.clone()),
            ],
        );
        s.header.axis = Some("z_fast".into());
        s.header.order = Some(self.order);
        s
    }
}

/// Order-0 inner profiles: identically zero.
pub fn leading_profiles(zg: &ZGrid, times: &[f64]) -> Vec<InnerProfile> {
    times.iter().map(|&t| InnerProfile::zero(zg, 0, t)).collect()
}

/// Prognostic inner unknowns `(U₁¹, Θ¹, U₁², Θ²)`.
#[derive(Clone, Debug)]
pub struct InnerState {
    pub time: f64,
    pub u1: Field,
    pub th1: Field,
    pub u12: Field,
    pub th2: Field,
}

/// Inner fields and their derivatives at one time.
struct InnerEval {
    u1: Field,
    u1_x: Field,
    u1_z: Field,
    u1_zz: Field,
    u1_t: Field,
    u1_xz: Field,
    u1_xx: Field,
    u1_xt: Field,
    th1: Field,
    th1_x: Field,
    th1_z: Field,
    th1_t: Field,
    u12: Field,
    u12_x: Field,
    u12_z: Field,
    u12_zz: Field,
    u12_t: Field,
    u12_xz: Field,
    u12_xx: Field,
    u12_xt: Field,
    th2: Field,
    th2_x: Field,
    th2_z: Field,
    th2_t: Field,
}

/// Explicit and implicit parts of the inner equations.
struct InnerOps<'a> {
    zg: &'a ZGrid,
    alpha: f64,
    second: bool,
}

struct Rhs {
    u1: Field,
    th1: Field,
    u12: Field,
    th2: Field,
}

fn row_mul(f: &Field, c: &[f64]) -> Field {
    let mut out = f.clone();
    for k in 0..f.ny() {
        for (v, a) in out.row_mut(k).iter_mut().zip(c) {
            *v *= a;
        }
    }
    out
}

fn z_mul(zg: &ZGrid, f: &Field, power: i32) -> Field {
    let mut out = f.clone();
    for k in 0..f.ny() {
        let zk = zg.z(k).powi(power);
        out.row_mut(k).iter_mut().for_each(|v| *v *= zk);
    }
    out
}

fn zero_last_row(f: &mut Field) {
    let n = f.ny();
    f.row_mut(n - 1).iter_mut().for_each(|v| *v = 0.0);
}

impl InnerOps<'_> {
    /// Transport `Γu₁⁰ ∂x f + z Γ∂yu₂⁰ ∂z f` given `∂x f`, `∂z f`.
    fn transport(&self, tr: &WallTraces, fx: &Field, fz: &Field) -> Field {
        let mut out = row_mul(fx, &tr.u1);
        let b: Vec<f64> = tr.u1_x.iter().map(|v| -v).collect();
        out.axpy(1.0, &row_mul(&z_mul(self.zg, fz, 1), &b));
        out
    }

    fn flux2(&self, u1: &Field) -> Vec<f64> {
        u1.row(0).iter().map(|v| self.alpha * v).collect()
    }

    /// All derivatives of a state, with the time derivatives from the equations.
    fn eval(&self, s: &InnerState, tr: &WallTraces) -> InnerEval {
        let zg = self.zg;
        let g1 = tr.flux(self.alpha);
        let u1_x = zg.dx(&s.u1);
        let u1_z = zg.d1(&s.u1, Some(&g1));
        let u1_zz = zg.d2(&s.u1, &g1);
        let th1_x = zg.dx(&s.th1);
        let th1_z = zg.d1(&s.th1, None);
        let g1x: Vec<f64> = (0..zg.nx()).map(|i| self.alpha * tr.u1_x[i] - tr.u1_xy[i]).collect();
        let u1_xz = zg.d1(&u1_x, Some(&g1x));
        let u1_xx = zg.dx(&u1_x);

        // U₂² = ∫_z^∞ ∂xU₁¹, P² = −∫_z^∞ Θ¹
        let v2 = zg.tail_integral(&u1_x);
        let m1x = v2.row(0).to_vec();
        let p2x = zg.tail_integral(&th1_x).scale(-1.0);
        let mut w2 = v2.clone();
        for k in 0..zg.nz() {
            w2.row_mut(k).iter_mut().zip(&m1x).for_each(|(v, m)| *v -= m);
        }

        let mut u1_t = self.transport(tr, &u1_x, &u1_z).scale(-1.0);
        u1_t.axpy(-1.0, &row_mul(&s.u1, &tr.u1_x));
        u1_t.axpy(1.0, &u1_zz);
        zero_last_row(&mut u1_t);

        let mut th1_t = self.transport(tr, &th1_x, &th1_z).scale(-1.0);
        th1_t.axpy(-1.0, &row_mul(&s.u1, &tr.theta_x));
        zero_last_row(&mut th1_t);

        let u1_xt = zg.dx(&u1_t);
        let (u12, th2) = (s.u12.clone(), s.th2.clone());
        let g2 = self.flux2(&s.u1);
        let u12_x = zg.dx(&u12);
        let u12_z = zg.d1(&u12, Some(&g2));
        let u12_zz = zg.d2(&u12, &g2);
        let th2_x = zg.dx(&th2);
        let th2_z = zg.d1(&th2, None);
        let u12_xx = zg.dx(&u12_x);
        let (u12_t, th2_t, u12_xz) = if self.second {
            let g2x: Vec<f64> = u1_x.row(0).iter().map(|v| self.alpha * v).collect();
            let u12_xz = zg.d1(&u12_x, Some(&g2x));
            let neg_uxy: Vec<f64> = tr.u1_xy.iter().map(|v| -v).collect();

            // collected O(ε²) inner terms of the u₁ equation
            let mut f2 = row_mul(&z_mul(zg, &u1_x, 1), &tr.u1_y);
            f2.axpy(1.0, &row_mul(&z_mul(zg, &s.u1, 1), &tr.u1_xy));
            f2.axpy(0.5, &row_mul(&z_mul(zg, &u1_z, 2), &neg_uxy));
            f2.axpy(1.0, &row_mul(&v2, &tr.u1_y));
            f2.axpy(1.0, &s.u1.mul(&u1_x));
            f2.axpy(1.0, &w2.mul(&u1_z));
            f2.axpy(1.0, &p2x);

            let mut u12_t = self.transport(tr, &u12_x, &u12_z).scale(-1.0);
            u12_t.axpy(-1.0, &row_mul(&u12, &tr.u1_x));
            u12_t.axpy(1.0, &u12_zz);
            u12_t.axpy(-1.0, &f2);
            zero_last_row(&mut u12_t);

            // collected O(ε²) inner terms of the θ equation
            let mut g2f = row_mul(&u12, &tr.theta_x);
            g2f.axpy(1.0, &row_mul(&z_mul(zg, &th1_x, 1), &tr.u1_y));
            g2f.axpy(0.5, &row_mul(&z_mul(zg, &th1_z, 2), &neg_uxy));
            g2f.axpy(1.0, &row_mul(&z_mul(zg, &s.u1, 1), &tr.theta_xy));
            g2f.axpy(1.0, &row_mul(&v2, &tr.theta_y));
            g2f.axpy(1.0, &s.u1.mul(&th1_x));
            g2f.axpy(1.0, &w2.mul(&th1_z));

            let mut th2_t = self.transport(tr, &th2_x, &th2_z).scale(-1.0);
            th2_t.axpy(-1.0, &g2f);
            zero_last_row(&mut th2_t);
            (u12_t, th2_t, u12_xz)
        } else {
            (zg.zeros(), zg.zeros(), zg.zeros())
        };
        let u12_xt = zg.dx(&u12_t);
        InnerEval {
            u1: s.u1.clone(),
            u1_x,
            u1_z,
            u1_zz,
            u1_t,
            u1_xz,
            u1_xx,
            u1_xt,
            th1: s.th1.clone(),
            th1_x,
            th1_z,
            th1_t,
            u12,
            u12_x,
            u12_z,
            u12_zz,
            u12_t,
            u12_xz,
            u12_xx,
            u12_xt,
            th2,
            th2_x,
            th2_z,
            th2_t,
        }
    }

    /// Explicit tendencies: everything except `∂zz`.
    fn explicit(&self, s: &InnerState, tr: &WallTraces) -> Rhs {
        let e = self.eval(s, tr);
        let strip = |t: &Field, zz: &Field| t.sub(zz);
        Rhs {
            u1: strip(&e.u1_t, &e.u1_zz),
            th1: e.th1_t,
            u12: strip(&e.u12_t, &e.u12_zz),
            th2: e.th2_t,
        }
    }
}

/// `r + dt Σ_j (a_ex[i][j] e_j + a_im[i][j] l_j)` over earlier stages.
fn combine(base: &Field, ex: &[&Field], im: Option<&[&Field]>, coef: (&[f64; 3], &[f64; 3]), dt: f64) -> Field {
    let mut r = base.clone();
    for (j, e) in ex.iter().enumerate() {
        r.axpy(dt * coef.0[j], e);
        if let Some(l) = im {
            if coef.1[j] != 0.0 {
                r.axpy(dt * coef.1[j], l[j]);
            }
        }
    }
    r
}

/// `(I − c ∂zz)` with the ghost-node Neumann condition and zero at `Zmax`.
struct HeatSolve {
    lu: BandedLu,
    c: f64,
}

impl HeatSolve {
    fn new(zg: &ZGrid, c: f64) -> Result<Self> {
        let n = zg.nz();
        let r = c / (zg.dz * zg.dz);
        let mut b = Banded::zeros(n, 1, 1);
        b.set(0, 0, 1.0 + 2.0 * r);
        b.set(0, 1, -2.0 * r);
        for k in 1..n - 1 {
            b.set(k, k - 1, -r);
            b.set(k, k, 1.0 + 2.0 * r);
            b.set(k, k + 1, -r);
        }
        b.set(n - 1, n - 1, 1.0);
        Ok(Self { lu: b.factor()?, c })
    }

    /// Solve `(I − c ∂zz) f = r` for the slope `flux` at the wall.
    fn solve(&self, zg: &ZGrid, r: &Field, flux: &[f64]) -> Field {
        let (nx, n) = (zg.nx(), zg.nz());
        let mut out = zg.zeros();
        let mut col = vec![0.0; n];
        for i in 0..nx {
            for (k, c) in col.iter_mut().enumerate() {
                *c = r.get(i, k);
            }
            col[0] -= 2.0 * self.c * flux[i] / zg.dz;
            col[n - 1] = 0.0;
            self.lu.solve(&mut col);
            for (k, c) in col.iter().enumerate() {
                out.set(i, k, *c);
            }
        }
        out
    }
}

/// Inner solution at the stored times.
#[derive(Clone, Debug)]
pub struct InnerRun {
    pub states: Vec<InnerState>,
    pub traces: Vec<WallTraces>,
}

/// March the inner problems with the outer run's step and tableau. `order`
/// is 1 for `(U₁¹, Θ¹)` only and 2 to add the second-order profiles.
pub fn solve_inner(
    series: &TraceSeries,
    alpha: f64,
    zg: &ZGrid,
    order: usize,
    save_every: usize,
) -> Result<InnerRun> {
    if !(1..=2).contains(&order) {
        return Err(Error::UnsupportedOrder(order));
    }
    let ops = InnerOps {
        zg,
        alpha,
        second: order == 2,
    };
    let (a_ex, a_im, b, c) = tableau();
    let dt = series.dt;
    let heat = HeatSolve::new(zg, a_im[1][1] * dt)?;
    let drift_cfl = |tr: &WallTraces| {
        let b = tr.u1_x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let a = tr.u1.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        dt * (b * zg.zmax() / zg.dz + a / zg.xz.dx())
    };
    let mut s = InnerState {
        time: series.t0,
        u1: zg.zeros(),
        th1: zg.zeros(),
        u12: zg.zeros(),
        th2: zg.zeros(),
    };
    let mut out = InnerRun {
        states: Vec::new(),
        traces: Vec::new(),
    };
    let n_steps = series.steps();
    for n in 0..=n_steps {
        if n % save_every == 0 || n == n_steps {
            out.states.push(s.clone());
            out.traces.push(series.at_step(n).clone());
        }
        if n == n_steps {
            break;
        }
        let t = series.t0 + n as f64 * dt;
        let mut ex: Vec<Rhs> = Vec::with_capacity(3);
        let mut im: Vec<(Field, Field)> = Vec::with_capacity(3);
        for i in 0..3 {
            let tr = &series.stages[n][i];
            let cfl = drift_cfl(tr);
            if cfl > 3.0 * CFL_LIMIT {
                return Err(Error::Cfl {
                    time: t + c[i] * dt,
                    cfl,
                    limit: 3.0 * CFL_LIMIT,
                });
            }
            let si = if i == 0 {
                s.clone()
            } else {
                let co = (&a_ex[i], &a_im[i]);
                let pick = |f: fn(&Rhs) -> &Field| ex.iter().map(f).collect::<Vec<_>>();
                let l1: Vec<&Field> = im.iter().map(|l| &l.0).collect();
                let l2: Vec<&Field> = im.iter().map(|l| &l.1).collect();
                let r1 = combine(&s.u1, &pick(|r| &r.u1), Some(&l1), co, dt);
                let u1 = heat.solve(zg, &r1, &tr.flux(alpha));
                let mut th1 = combine(&s.th1, &pick(|r| &r.th1), None, co, dt);
                zero_last_row(&mut th1);
                let (u12, th2) = if ops.second {
                    let r2 = combine(&s.u12, &pick(|r| &r.u12), Some(&l2), co, dt);
                    let u12 = heat.solve(zg, &r2, &ops.flux2(&u1));
                    let mut th2 = combine(&s.th2, &pick(|r| &r.th2), None, co, dt);
                    zero_last_row(&mut th2);
                    (u12, th2)
                } else {
                    (zg.zeros(), zg.zeros())
                };
                InnerState {
                    time: t + c[i] * dt,
                    u1,
                    th1,
                    u12,
                    th2,
                }
            };
            let l1 = zg.d2(&si.u1, &tr.flux(alpha));
            let l2 = if ops.second {
                zg.d2(&si.u12, &ops.flux2(&si.u1))
            } else {
                zg.zeros()
            };
            ex.push(ops.explicit(&si, tr));
            im.push((l1, l2));
        }
        let mut next = s.clone();
        for j in 0..3 {
            if b[j] != 0.0 {
                next.u1.axpy(dt * b[j], &ex[j].u1);
                next.u1.axpy(dt * b[j], &im[j].0);
                next.th1.axpy(dt * b[j], &ex[j].th1);
                next.u12.axpy(dt * b[j], &ex[j].u12);
                next.u12.axpy(dt * b[j], &im[j].1);
                next.th2.axpy(dt * b[j], &ex[j].th2);
            }
        }
        for f in [&mut next.u1, &mut next.th1, &mut next.u12, &mut next.th2] {
            zero_last_row(f);
        }
        next.time = t + dt;
        let finite = [&next.u1, &next.th1, &next.u12, &next.th2].iter().all(|f| f.is_finite());
        if !finite {
            return Err(Error::BlowUp {
                time: next.time,
                what: "inner profile".into(),
            });
        }
        let tail = [&next.u1, &next.th1, &next.u12, &next.th2]
            .iter()
            .map(|f| zg.tail_max(f))
            .fold(0.0, f64::max);
        if tail > DECAY_TOL {
            return Err(Error::Decay {
                value: tail,
                tol: DECAY_TOL,
            });
        }
        s = next;
    }
    Ok(out)
}

/// `U₁¹` (with `Θ¹` and the zero `U₂¹`, `P¹`) at every stored time.
pub fn solve_first_order_profile(
    series: &TraceSeries,
    alpha: f64,
    zg: &ZGrid,
    save_every: usize,
) -> Result<Vec<InnerProfile>> {
    let run = solve_inner(series, alpha, zg, 1, save_every)?;
    Ok(run
        .states
        .iter()
        .map(|s| InnerProfile {
            order: 1,
            time: s.time,
            u1: s.u1.clone(),
            u2: zg.zeros(),
            theta: s.th1.clone(),
            p: zg.zeros(),
        })
        .collect())
}

/// The `ε`-independent ingredients: inviscid run and inner profiles.
#[derive(Debug)]
pub struct Expansion {
    pub order: usize,
    pub alpha: f64,
    pub outer: Trajectory,
    pub inner: InnerRun,
    pub zg: ZGrid,
}

impl Expansion {
    /// Run the inviscid system from `s0` recording wall traces, then the inner problems.
    pub fn build(g: &Grid, s0: &State, cfg: &SimConfig, order: usize) -> Result<Self> {
        if order > 2 {
            return Err(Error::UnsupportedOrder(order));
        }
        let alpha = cfg.params.wall_alpha();
        let zg = ZGrid::for_grid(g)?;
        let (steps, dt) = cfg.steps();
        let mut stages: Vec<[Option<WallTraces>; 3]> = vec![[None, None, None]; steps];
        let mut last = None;
        let mut trace_err = None;
        let outer = {
            let mut obs = |v: &StageView<'_>| match WallTraces::from_fields(g, v.u1, v.theta) {
                Ok(tr) if v.step < steps => stages[v.step][v.stage] = Some(tr),
                Ok(tr) => last = Some(tr),
                Err(e) => trace_err = Some(e),
            };
            let opts = RunOptions {
                observer: Some(&mut obs),
                pressure: true,
                ..Default::default()
            };
            run_with(g, s0, cfg, Which::Inviscid, opts).into_result()?
        };
        if let Some(e) = trace_err {
            return Err(e);
        }
        let series = TraceSeries {
            t0: s0.time,
            dt,
            stages: stages
                .into_iter()
                .map(|st| st.map(|t| t.expect("every stage observed")))
                .collect(),
            last: last.expect("final state observed"),
        };
        let inner = if order == 0 {
            let times: Vec<f64> = outer.snapshots.iter().map(|s| s.time).collect();
            InnerRun {
                states: times
                    .iter()
                    .map(|&t| InnerState {
                        time: t,
                        u1: zg.zeros(),
                        th1: zg.zeros(),
                        u12: zg.zeros(),
                        th2: zg.zeros(),
                    })
                    .collect(),
                traces: (0..times.len()).map(|_| series.last.clone()).collect(),
            }
        } else {
            solve_inner(&series, alpha, &zg, order, cfg.save_every)?
        };
        debug_assert_eq!(inner.states.len(), outer.snapshots.len());
        Ok(Self {
            order,
            alpha,
            outer,
            inner,
            zg,
        })
    }

    pub fn times(&self) -> Vec<f64> {
        self.outer.snapshots.iter().map(|s| s.time).collect()
    }

    /// Inner profiles of `order` at every stored time.
    pub fn profiles(&self, order: usize) -> Vec<InnerProfile> {
        let zg = &self.zg;
        self.inner
            .states
            .iter()
            .map(|s| match order {
                1 if self.order >= 1 => InnerProfile {
                    order,
                    time: s.time,
                    u1: s.u1.clone(),
                    u2: zg.zeros(),
                    theta: s.th1.clone(),
                    p: zg.zeros(),
                },
                2 if self.order >= 1 => InnerProfile {
                    order,
                    time: s.time,
                    u1: s.u12.clone(),
                    u2: zg.tail_integral(&zg.dx(&s.u1)),
                    theta: s.th2.clone(),
                    p: zg.tail_integral(&s.th1).scale(-1.0),
                },
                _ => InnerProfile::zero(zg, order, s.time),
            })
            .collect()
    }

    /// Residuals of the matching conditions at every stored time.
    pub fn matching(&self) -> MatchReport {
        let zg = &self.zg;
        let mut rep = MatchReport::default();
        for (s, tr) in self.inner.states.iter().zip(&self.inner.traces) {
            let slope1 = zg.wall_slope(&s.u1);
            let slope2 = zg.wall_slope(&s.u12);
            let defect0 = (0..zg.nx())
                .map(|i| (tr.u1_y[i] + slope1[i] - self.alpha * tr.u1[i]).abs())
                .fold(0.0, f64::max);
            let defect1 = if self.order >= 2 {
                (0..zg.nx())
                    .map(|i| (slope2[i] - self.alpha * s.u1.get(i, 0)).abs())
                    .fold(0.0, f64::max)
            } else {
                0.0
            };
            // u₂² = −∂x∫U₁¹ from the lift against U₂² = ∫∂xU₁¹
            let v2 = zg.tail_integral(&zg.dx(&s.u1));
            let m1x = zg.dx(&zg.tail_integral(&s.u1));
            let normal = v2
                .row(0)
                .iter()
                .zip(m1x.row(0))
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            // reference: dz² times the larger of max|∂z³U| and the wall shear scale
            let third = |f: &Field| {
                let h = zg.dz;
                (0..zg.nx())
                    .map(|i| {
                        ((f.get(i, 3) - 3.0 * f.get(i, 2) + 3.0 * f.get(i, 1) - f.get(i, 0)) / h.powi(3)).abs()
                    })
                    .fold(0.0, f64::max)
            };
            let shear = tr.u1_y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let h2 = zg.dz * zg.dz * third(&s.u1).max(third(&s.u12)).max(shear);
            rep.times.push(s.time);
            rep.slip.push([defect0, defect1]);
            rep.normal.push(normal);
            rep.h2_reference.push(h2);
            rep.decay.push(
                [&s.u1, &s.th1, &s.u12, &s.th2]
                    .iter()
                    .map(|f| zg.tail_max(f))
                    .fold(0.0, f64::max),
            );
        }
        rep
    }
}

/// Matching residuals per stored time.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct MatchReport {
    pub times: Vec<f64>,
    /// `|∂yu₁ⁱ + ∂zU₁^{i+1} − α(u₁ⁱ + U₁ⁱ)|` at the wall for `i = 0, 1`.
    pub slip: Vec<[f64; 2]>,
    /// `|u₂ + U₂|` at the wall of the order-2 pair.
    pub normal: Vec<f64>,
    /// `dz² max|∂z³U|`, the truncation scale of the wall slope.
    pub h2_reference: Vec<f64>,
    pub decay: Vec<f64>,
}

impl MatchReport {
    /// Largest residual relative to the `h²` reference.
    pub fn worst_ratio(&self) -> f64 {
        self.slip
            .iter()
            .zip(&self.normal)
            .zip(&self.h2_reference)
            .map(|((s, n), r)| s[0].max(s[1]).max(*n) / r)
            .fold(0.0, f64::max)
    }
}

/// Approximate solution of order `K` at a fixed `ε`.
#[derive(Clone, Debug)]
pub struct ApproxSolution {
    pub k: usize,
    pub eps: f64,
    pub expansion: Arc<Expansion>,
}

/// `w`, `Θ`, `Π` and their derivatives on the physical grid.
struct Layer {
    w1: [Field; 5],
    w2: [Field; 5],
    th: [Field; 5],
    pi: Field,
    pi_x: Field,
    pi_y: Field,
}

const V: usize = 0;
const T: usize = 1;
const X: usize = 2;
const Y: usize = 3;
const YY: usize = 4;

impl ApproxSolution {
    pub fn new(expansion: Arc<Expansion>, eps: f64, k: usize) -> Result<Self> {
        if k > 2 || k > expansion.order {
            return Err(Error::UnsupportedOrder(k));
        }
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::InvalidParams(format!("eps must lie in (0, 1) (got {eps})")));
        }
        Ok(Self { k, eps, expansion })
    }

    pub fn times(&self) -> Vec<f64> {
        self.expansion.times()
    }

    /// Index pair and weight of `t` among the stored times.
    fn bracket(&self, t: f64) -> Result<(usize, usize, f64)> {
        let times = self.times();
        let (lo, hi) = (times[0], *times.last().expect("nonempty"));
        let tol = 1e-9 * hi.abs().max(1.0);
        if t < lo - tol || t > hi + tol {
            return Err(Error::TimeOutOfRange { t, lo, hi });
        }
        let j = times.partition_point(|&s| s < t - tol).min(times.len() - 1);
        if (times[j] - t).abs() <= tol || j == 0 {
            return Ok((j, j, 0.0));
        }
        let w = (t - times[j - 1]) / (times[j] - times[j - 1]);
        Ok((j - 1, j, w))
    }

    /// Interpolate inner fields on `g`'s rows; zero past `Zmax`.
    fn to_y(&self, g: &Grid, f: &Field) -> Field {
        let zg = &self.expansion.zg;
        let mut out = Field::zeros(g.nx(), g.ny());
        for j in 0..g.ny() {
            if let Some((k0, w)) = zg.cubic(g.y(j) / self.eps) {
                let row = out.row_mut(j);
                for (m, wm) in w.iter().enumerate() {
                    for (o, v) in row.iter_mut().zip(f.row(k0 + m)) {
                        *o += wm * v;
                    }
                }
            }
        }
        out
    }

    fn layer(&self, g: &Grid, idx: usize) -> Result<Layer> {
        let ex = &self.expansion;
        let zg = &ex.zg;
        let e = self.eps;
        let zero = || Field::zeros(g.nx(), g.ny());
        let mut w1: [Field; 5] = std::array::from_fn(|_| zero());
        let mut w2: [Field; 5] = std::array::from_fn(|_| zero());
        let mut th: [Field; 5] = std::array::from_fn(|_| zero());
        let (mut pi, mut pi_x, mut pi_y) = (zero(), zero(), zero());
        if self.k == 0 {
            return Ok(Layer {
                w1,
                w2,
                th,
                pi,
                pi_x,
                pi_y,
            });
        }
        let ops = InnerOps {
            zg,
            alpha: ex.alpha,
            second: self.k == 2,
        };
        let ev = ops.eval(&ex.inner.states[idx], &ex.inner.traces[idx]);
        let y = |f: &Field| self.to_y(g, f);
        let add = |dst: &mut Field, c: f64, f: &Field| dst.axpy(c, &y(f));

        // horizontal inner velocity and its vertical partner, one order at a time
        type Parts<'a> = (&'a Field, &'a Field, &'a Field, &'a Field, &'a Field, &'a Field, &'a Field, &'a Field);
        let mut orders: Vec<(f64, Parts<'_>)> = vec![(
            e,
            (&ev.u1, &ev.u1_t, &ev.u1_x, &ev.u1_z, &ev.u1_zz, &ev.u1_xz, &ev.u1_xx, &ev.u1_xt),
        )];
        if self.k == 2 {
            orders.push((
                e * e,
                (&ev.u12, &ev.u12_t, &ev.u12_x, &ev.u12_z, &ev.u12_zz, &ev.u12_xz, &ev.u12_xx, &ev.u12_xt),
            ));
        }
        let nx = g.nx();
        let mut m = vec![0.0; nx];
        let mut m_t = vec![0.0; nx];
        let mut m_x = vec![0.0; nx];
        let mut m_xx = vec![0.0; nx];
        let mut m_xt = vec![0.0; nx];
        for (c, (u, ut, ux, uz, uzz, uxz, uxx, uxt)) in orders {
            add(&mut w1[V], c, u);
            add(&mut w1[T], c, ut);
            add(&mut w1[X], c, ux);
            add(&mut w1[Y], c / e, uz);
            add(&mut w1[YY], c / (e * e), uzz);
            let v = zg.tail_integral(ux);
            let v_t = zg.tail_integral(uxt);
            let v_x = zg.tail_integral(uxx);
            add(&mut w2[V], c * e, &v);
            add(&mut w2[T], c * e, &v_t);
            add(&mut w2[X], c * e, &v_x);
            add(&mut w2[Y], -c, ux);
            add(&mut w2[YY], -c / e, uxz);
            let mm = zg.tail_integral(u);
            let mm_t = zg.tail_integral(ut);
            for i in 0..nx {
                m[i] += c * mm.get(i, 0);
                m_t[i] += c * mm_t.get(i, 0);
                m_x[i] += c * v.get(i, 0);
                m_xx[i] += c * v_x.get(i, 0);
                m_xt[i] += c * v_t.get(i, 0);
            }
        }
        // ψ_L = ε M(x) χ(y), χ = e^{−y²}
        for j in 0..g.ny() {
            let yy = g.y(j);
            let chi = (-yy * yy).exp();
            let c1 = -2.0 * yy * chi;
            let c2 = (4.0 * yy * yy - 2.0) * chi;
            let c3 = (12.0 * yy - 8.0 * yy.powi(3)) * chi;
            for i in 0..nx {
                let bump = |f: &mut Field, v: f64| f.set(i, j, f.get(i, j) + e * v);
                bump(&mut w1[V], m[i] * c1);
                bump(&mut w1[T], m_t[i] * c1);
                bump(&mut w1[X], m_x[i] * c1);
                bump(&mut w1[Y], m[i] * c2);
                bump(&mut w1[YY], m[i] * c3);
                bump(&mut w2[V], -m_x[i] * chi);
                bump(&mut w2[T], -m_xt[i] * chi);
                bump(&mut w2[X], -m_xx[i] * chi);
                bump(&mut w2[Y], -m_x[i] * c1);
                bump(&mut w2[YY], -m_x[i] * c2);
            }
        }

        let th1_zz = zg.d2(&ev.th1, &vec![0.0; zg.nx()]);
        let mut thermal = vec![(e, &ev.th1, &ev.th1_t, &ev.th1_x, &ev.th1_z, &th1_zz)];
        let th2_zz = zg.d2(&ev.th2, &vec![0.0; zg.nx()]);
        if self.k == 2 {
            thermal.push((e * e, &ev.th2, &ev.th2_t, &ev.th2_x, &ev.th2_z, &th2_zz));
        }
        for (c, f, ft, fx, fz, fzz) in thermal {
            add(&mut th[V], c, f);
            add(&mut th[T], c, ft);
            add(&mut th[X], c, fx);
            add(&mut th[Y], c / e, fz);
            add(&mut th[YY], c / (e * e), fzz);
        }
        // Π = ε²P², ∂zP² = Θ¹
        add(&mut pi, -e * e, &zg.tail_integral(&ev.th1));
        add(&mut pi_x, -e * e, &zg.tail_integral(&ev.th1_x));
        add(&mut pi_y, e, &ev.th1);
        Ok(Layer {
            w1,
            w2,
            th,
            pi,
            pi_x,
            pi_y,
        })
    }

    fn assemble_at(&self, g: &Grid, idx: usize) -> Result<State> {
        let o = &self.expansion.outer.snapshots[idx];
        let l = self.layer(g, idx)?;
        Ok(State {
            u1: o.u1.add(&l.w1[V]),
            u2: o.u2.add(&l.w2[V]),
            theta: o.theta.add(&l.th[V]),
            p: o.p.add(&l.pi),
            time: o.time,
            wall_ghost: None,
        })
    }

    /// Defect of the equations at a stored time, divided by `−ε^K` so that
    /// the error `u^ε − u_a` is driven by `+ε^K R`.
    fn residual_at(&self, g: &Grid, idx: usize, p: &PhysParams) -> Result<(Field, Field, Field)> {
        let o = &self.expansion.outer.snapshots[idx];
        let l = self.layer(g, idx)?;
        let dxo = |f: &Field| ddx(g, f);
        let dyo = |f: &Field| ddy(g, f);
        let (o1x, o1y) = (dxo(&o.u1)?, dyo(&o.u1)?);
        let (o2x, o2y) = (dxo(&o.u2)?, dyo(&o.u2)?);
        let (tx, ty) = (dxo(&o.theta)?, dyo(&o.theta)?);
        let o1yy = dyo(&o1y)?;
        let o2yy = dyo(&o2y)?;
        let diss_x = |f: &Field, c: f64| -> Result<Field> {
            if c > 0.0 {
                Ok(crate::grid::ddx_n(g, f, 2)?.scale(c))
            } else {
                Ok(Field::zeros(g.nx(), g.ny()))
            }
        };
        let (w1, w2, th) = (&l.w1, &l.w2, &l.th);
        let ua1 = o.u1.add(&w1[V]);
        let ua2 = o.u2.add(&w2[V]);

        // D = ∂t w + u_a·∇w + w·∇u⁰ + ∇Π − dissipation(u_a) − Θ e₂
        let momentum = |w: &[Field; 5], ox: &Field, oy: &Field, oyy: &Field, of: &Field| -> Result<Field> {
            let mut d = w[T].clone();
            d.axpy(1.0, &ua1.mul(&w[X]));
            d.axpy(1.0, &ua2.mul(&w[Y]));
            d.axpy(1.0, &w1[V].mul(ox));
            d.axpy(1.0, &w2[V].mul(oy));
            d.axpy(-p.nu2, &oyy.add(&w[YY]));
            d.axpy(-1.0, &diss_x(&of.add(&w[V]), p.nu1)?);
            Ok(d)
        };
        let mut d1 = momentum(w1, &o1x, &o1y, &o1yy, &o.u1)?;
        d1.axpy(1.0, &l.pi_x);
        let mut d2 = momentum(w2, &o2x, &o2y, &o2yy, &o.u2)?;
        d2.axpy(1.0, &l.pi_y);
        d2.axpy(-1.0, &th[V]);

        let mut d3 = th[T].clone();
        d3.axpy(1.0, &ua1.mul(&th[X]));
        d3.axpy(1.0, &ua2.mul(&th[Y]));
        d3.axpy(1.0, &w1[V].mul(&tx));
        d3.axpy(1.0, &w2[V].mul(&ty));
        if p.kappa2 > 0.0 {
            d3.axpy(-p.kappa2, &dyo(&ty)?.add(&th[YY]));
        }
        d3.axpy(-1.0, &diss_x(&o.theta.add(&th[V]), p.kappa1)?);

        let s = -1.0 / self.eps.powi(self.k as i32);
        Ok((d1.scale(s), d2.scale(s), d3.scale(s)))
    }

    /// Sample `(u_a, θ_a, p_a)` at time `t`, linear in time between stored times.
    pub fn assemble(&self, g: &Grid, t: f64) -> Result<State> {
        let (a, b, w) = self.bracket(t)?;
        let sa = self.assemble_at(g, a)?;
        if a == b {
            return Ok(sa);
        }
        let sb = self.assemble_at(g, b)?;
        let mix = |x: &Field, y: &Field| x.zip_map(y, |p, q| (1.0 - w) * p + w * q);
        Ok(State {
            u1: mix(&sa.u1, &sb.u1),
            u2: mix(&sa.u2, &sb.u2),
            theta: mix(&sa.theta, &sb.theta),
            p: mix(&sa.p, &sb.p),
            time: t,
            wall_ghost: None,
        })
    }

    /// Remainder `R` with defect `= −ε^K R`, at time `t`.
    pub fn residual(&self, g: &Grid, t: f64, params: &PhysParams) -> Result<(Field, Field, Field)> {
        let (a, b, w) = self.bracket(t)?;
        let ra = self.residual_at(g, a, params)?;
        if a == b {
            return Ok(ra);
        }
        let rb = self.residual_at(g, b, params)?;
        let mix = |x: &Field, y: &Field| x.zip_map(y, |p, q| (1.0 - w) * p + w * q);
        Ok((mix(&ra.0, &rb.0), mix(&ra.1, &rb.1), mix(&ra.2, &rb.2)))
    }

    /// Precompute `u_a` and `ε^K R` at all stored times for use as a background.
    pub fn background(&self, g: &Grid, params: &PhysParams) -> Result<StoredBackground> {
        let scale = self.eps.powi(self.k as i32);
        let mut samples = Vec::new();
        for idx in 0..self.times().len() {
            let s = self.assemble_at(g, idx)?;
            let r = self.residual_at(g, idx, params)?;
            samples.push(crate::solver::BaseFields {
                u1: s.u1,
                u2: s.u2,
                theta: s.theta,
                force_u1: r.0.scale(scale),
                force_u2: r.1.scale(scale),
                force_theta: r.2.scale(scale),
            });
        }
        Ok(StoredBackground {
            times: self.times(),
            samples,
        })
    }
}

/// Background sampled at fixed times and interpolated linearly between them.
pub struct StoredBackground {
    pub times: Vec<f64>,
    pub samples: Vec<crate::solver::BaseFields>,
}

impl StoredBackground {
    /// Same fields without the forcing.
    pub fn unforced(mut self) -> Self {
        for s in &mut self.samples {
            for f in [&mut s.force_u1, &mut s.force_u2, &mut s.force_theta] {
                f.values_mut().iter_mut().for_each(|v| *v = 0.0);
            }
        }
        self
    }
}

impl crate::solver::Background for StoredBackground {
    fn base(&self, g: &Grid, t: f64) -> Result<crate::solver::BaseFields> {
        let (lo, hi) = (self.times[0], *self.times.last().expect("nonempty"));
        let tol = 1e-9 * hi.abs().max(1.0);
        if t < lo - tol || t > hi + tol {
            return Err(Error::TimeOutOfRange { t, lo, hi });
        }
        let n = self.times.len();
        let b = self.times.partition_point(|&s| s < t).clamp(1.min(n - 1), n - 1);
        let a = b.saturating_sub(1);
        let w = if a == b {
            0.0
        } else {
            ((t - self.times[a]) / (self.times[b] - self.times[a])).clamp(0.0, 1.0)
        };
        let (sa, sb) = (&self.samples[a], &self.samples[b]);
        let mix = |x: &Field, y: &Field| {
            g.check(x).map(|_| x.zip_map(y, |p, q| (1.0 - w) * p + w * q))
        };
        Ok(crate::solver::BaseFields {
            u1: mix(&sa.u1, &sb.u1)?,
            u2: mix(&sa.u2, &sb.u2)?,
            theta: mix(&sa.theta, &sb.theta)?,
            force_u1: mix(&sa.force_u1, &sb.force_u1)?,
            force_u2: mix(&sa.force_u2, &sb.force_u2)?,
            force_theta: mix(&sa.force_theta, &sb.force_theta)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{make_initial_data, PhysParams, Recipe};
    use crate::solver::Scheme;
    use statrs::function::erf::erfc;
    use std::f64::consts::PI;

    /// Half-line heat equation from rest with constant wall flux `g`.
    fn heat_oracle(g: f64, t: f64, z: f64) -> f64 {
        let s = t.sqrt();
        -g * (2.0 * s / PI.sqrt() * (-z * z / (4.0 * t)).exp() - z * erfc(z / (2.0 * s)))
    }

    fn frozen_error(nz: usize, dt: f64) -> f64 {
        let zg = ZGrid::new(2.0 * PI, 8, ZMAX, nz).unwrap();
        let steps = (0.1 / dt).round() as usize;
        let tr = WallTraces::uniform(8, 1.0, 0.5);
        let g = tr.flux(1.0)[0];
        let series = TraceSeries::frozen(0.0, dt, steps, tr);
        let prof = solve_first_order_profile(&series, 1.0, &zg, steps).unwrap();
        let last = prof.last().unwrap();
        let t = last.time;
        (0..zg.nz())
            .map(|k| (last.u1.get(3, k) - heat_oracle(g, t, zg.z(k))).abs())
            .fold(0.0, f64::max)
            / heat_oracle(g, t, 0.0).abs()
    }

    #[test]
    fn frozen_traces_follow_the_heat_kernel() {
        let coarse = frozen_error(401, 1e-3);
        let fine = frozen_error(801, 5e-4);
        assert!(coarse < 5e-3, "{coarse:e}");
        assert!(coarse / fine > 3.0, "{coarse:e} {fine:e}");
    }

    #[test]
    fn slip_compatible_traces_give_no_layer() {
        let zg = ZGrid::new(2.0 * PI, 8, ZMAX, NZ_MIN).unwrap();
        // αu₁ = ∂yu₁: zero wall flux
        let series = TraceSeries::frozen(0.0, 1e-3, 50, WallTraces::uniform(8, 0.7, 0.7));
        let run = solve_inner(&series, 1.0, &zg, 2, 10).unwrap();
        for s in &run.states {
            assert_eq!(s.u1.max_abs(), 0.0);
            assert_eq!(s.u12.max_abs(), 0.0);
            assert_eq!(s.th1.max_abs(), 0.0);
        }
    }

    #[test]
    fn leading_order_is_zero_and_order_three_is_refused() {
        let zg = ZGrid::new(2.0 * PI, 8, ZMAX, NZ_MIN).unwrap();
        assert!(leading_profiles(&zg, &[0.0, 0.1]).iter().all(|p| p.is_zero()));
        let series = TraceSeries::frozen(0.0, 1e-3, 2, WallTraces::uniform(8, 1.0, 0.0));
        assert!(matches!(solve_inner(&series, 1.0, &zg, 3, 1), Err(Error::UnsupportedOrder(3))));
    }

    fn small_expansion(order: usize) -> (Grid, Arc<Expansion>) {
        let g = Grid::build(2.0 * PI, 8.0, 16, 48, 2.5, 1.0).unwrap();
        let s0 = make_initial_data(&g, Recipe::VortexPair, 1.0, 1.0).unwrap();
        let cfg = SimConfig {
            dt: 2e-3,
            t_end: 0.02,
            scheme: Scheme::ImexRk3,
            params: PhysParams::inviscid(1.0),
            save_every: 5,
        };
        let ex = Expansion::build(&g, &s0, &cfg, order).unwrap();
        (g, Arc::new(ex))
    }

    #[test]
    fn order_zero_assembly_is_the_outer_flow() {
        let (g, ex) = small_expansion(2);
        let a = ApproxSolution::new(ex.clone(), 0.1, 0).unwrap();
        for s in &ex.outer.snapshots {
            let u = a.assemble(&g, s.time).unwrap();
            assert_eq!(u.u1, s.u1);
            assert_eq!(u.theta, s.theta);
        }
        assert!(ex.profiles(0).iter().all(|p| p.is_zero()));
        assert!(matches!(
            a.assemble(&g, 1.0),
            Err(Error::TimeOutOfRange { .. })
        ));
    }

    #[test]
    fn expansion_matches_and_decays() {
        let (_, ex) = small_expansion(2);
        let m = ex.matching();
        assert_eq!(m.times.len(), ex.times().len());
        assert!(m.worst_ratio() <= 5.0, "{}", m.worst_ratio());
        assert!(m.decay.iter().all(|d| *d <= DECAY_TOL));
        assert!(matches!(ApproxSolution::new(ex, 0.1, 3), Err(Error::UnsupportedOrder(3))));
    }

    #[test]
    fn profile_snapshot_is_tagged() {
        let (_, ex) = small_expansion(1);
        let p = &ex.profiles(1)[1];
        let snap = p.to_snapshot();
        assert_eq!(snap.header.axis.as_deref(), Some("z_fast"));
        assert_eq!(snap.header.order, Some(1));
        let back = Snapshot::decode(&snap.encode()).unwrap();
        assert_eq!(back.field("U1"), Some(&p.u1));
    }
}
