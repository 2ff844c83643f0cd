//! Time integration of the inviscid, viscous and linearised systems.

pub mod explicit;
pub mod mms;
pub mod stepper;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::elliptic::split_pressure;
use crate::error::{Error, Result};
use crate::fields::{divergence, wall_slip_defect, Field, PhysParams, State};
use crate::grid::{ddx, Grid};

pub use explicit::{Background, BaseFields, Derivs, Dynamics, Source, StageFields, Tendency};
pub use stepper::{Observer, Spec3, StageView, Stepper};

/// Advective CFL limit checked every step.
pub const CFL_LIMIT: f64 = 0.5;
/// Target CFL number used when picking a default step.
pub const CFL_TARGET: f64 = 0.35;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    ImexRk3,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    #[serde(rename = "T")]
    pub t_end: f64,
    pub scheme: Scheme,
    pub params: PhysParams,
    pub save_every: usize,
}

impl SimConfig {
    /// Step size giving CFL ≈ [`CFL_TARGET`] for speed `umax`, rounded so that `T/dt` is an integer.
    pub fn auto_dt(g: &Grid, umax: f64, t_end: f64) -> f64 {
        let h = g.dx().min(g.min_dy());
        let dt_max = CFL_TARGET * h / umax.max(1e-12);
        if t_end <= 0.0 {
            return dt_max;
        }
        let n = (t_end / dt_max).ceil().max(1.0);
        t_end / n
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParams(format!("dt must be positive (got {})", self.dt)));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::InvalidParams(format!("T must be >= 0 (got {})", self.t_end)));
        }
        if self.save_every == 0 {
            return Err(Error::InvalidParams("save_every must be >= 1".into()));
        }
        Ok(())
    }

    /// Number of steps and the step actually used (`T` is hit exactly).
    pub fn steps(&self) -> (usize, f64) {
        if self.t_end == 0.0 {
            return (0, self.dt);
        }
        let r = self.t_end / self.dt;
        let n = if (r - r.round()).abs() <= 1e-9 * r.max(1.0) {
            r.round()
        } else {
            r.ceil()
        } as usize;
        let n = n.max(1);
        (n, self.t_end / n as f64)
    }
}

pub enum Which<'a> {
    Inviscid,
    Viscous,
    Linearized(&'a dyn Background),
}

impl Which<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            Which::Inviscid => "inviscid",
            Which::Viscous => "viscous",
            Which::Linearized(_) => "linearized",
        }
    }
}

/// Per-step scalar diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diag {
    pub time: f64,
    pub ke: f64,
    pub pe_theta: f64,
    /// Discrete interior dissipation rate (non-negative).
    pub dissipation: f64,
    /// Slip term `ν₂ α ∫ u₁(x,0)² dx`.
    pub boundary_flux: f64,
    pub buoyancy_work: f64,
    pub advection_work: f64,
    pub source_work: f64,
    pub max_theta: f64,
    pub div_max: f64,
    pub eta_trace_max: f64,
}

impl Diag {
    pub fn energy(&self) -> f64 {
        self.ke + self.pe_theta
    }

    /// Right-hand side of the discrete energy balance.
    pub fn balance(&self) -> f64 {
        self.buoyancy_work + self.advection_work + self.source_work
            - self.dissipation
            - self.boundary_flux
    }
}

pub const DIAG_HEADER: &str =
    "time,KE,PE_theta,dissipation,boundary_flux,max_theta,div_max,eta_trace_max";

#[derive(Debug)]
pub struct Trajectory {
    pub snapshots: Vec<State>,
    pub diagnostics: Vec<Diag>,
    pub dt: f64,
    pub which: &'static str,
    /// Set when the run stopped before `T`.
    pub failure: Option<Error>,
}

impl Trajectory {
    pub fn is_complete(&self) -> bool {
        self.failure.is_none()
    }

    pub fn into_result(self) -> Result<Trajectory> {
        match self.failure {
            Some(e) => Err(e),
            None => Ok(Trajectory { failure: None, ..self }),
        }
    }

    pub fn last(&self) -> &State {
        self.snapshots.last().expect("trajectory holds the initial state")
    }

    pub fn diagnostics_csv(&self) -> String {
        let mut s = String::from(DIAG_HEADER);
        s.push('\n');
        for d in &self.diagnostics {
            let _ = writeln!(
                s,
                "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
                d.time,
                d.ke,
                d.pe_theta,
                d.dissipation,
                d.boundary_flux,
                d.max_theta,
                d.div_max,
                d.eta_trace_max
            );
        }
        s
    }
}

/// Options beyond the configuration.
#[derive(Default)]
pub struct RunOptions<'a> {
    pub source: Option<&'a dyn Source>,
    pub observer: Option<&'a mut Observer<'a>>,
    /// Fill `p` in saved snapshots from the pressure split.
    pub pressure: bool,
}

fn effective_params(which: &Which<'_>, p: &PhysParams) -> PhysParams {
    match which {
        Which::Inviscid => PhysParams {
            nu1: 0.0,
            nu2: 0.0,
            kappa1: 0.0,
            kappa2: 0.0,
            ..*p
        },
        _ => *p,
    }
}

/// Diagnostics of a state given its explicit tendency at the same time.
///
pub fn diagnose(
    g: &Grid,
    params: &PhysParams,
    t: f64,
    (u1, u2, th): (&Field, &Field, &Field),
    tend: &Tendency,
) -> Result<Diag> {
    let p = params;
    let inner = |a: &Field, b: &Field| g.inner(a, b);
    let dx = g.dx();
    let dirichlet = |f: &Field| {
        let d = g.sbp().dy(f);
        inner(&d, &d)
    };
    let mut dissipation = 0.0;
    if p.nu2 > 0.0 {
        dissipation += p.nu2 * (dirichlet(u1) + dirichlet(u2));
    }
    if p.nu1 > 0.0 {
        let (a, b) = (ddx(g, u1)?, ddx(g, u2)?);
        dissipation += p.nu1 * (inner(&a, &a) + inner(&b, &b));
    }
    if p.kappa2 > 0.0 {
        dissipation += p.kappa2 * dirichlet(th);
    }
    if p.kappa1 > 0.0 {
        let a = ddx(g, th)?;
        dissipation += p.kappa1 * inner(&a, &a);
    }
    let boundary_flux = p.nu2 * p.wall_alpha() * u1.row(0).iter().map(|v| v * v).sum::<f64>() * dx;
    Ok(Diag {
        time: t,
        ke: 0.5 * (inner(u1, u1) + inner(u2, u2)),
        pe_theta: 0.5 * inner(th, th),
        dissipation,
        boundary_flux,
        buoyancy_work: inner(u2, th),
        advection_work: inner(u1, &tend.adv_u1) + inner(u2, &tend.adv_u2) + inner(th, &tend.adv_theta),
        source_work: inner(u1, &tend.src_u1) + inner(u2, &tend.src_u2) + inner(th, &tend.src_theta),
        max_theta: th.max_abs(),
        div_max: divergence(g, u1, u2)?.max_abs(),
        eta_trace_max: wall_slip_defect(g, u1, p.alpha),
    })
}

fn pressure_of(
    g: &Grid,
    params: &PhysParams,
    (u1, th): (&Field, &Field),
    tend: &Tendency,
) -> Result<Field> {
    let (f1, f2) = tend.momentum(th);
    Ok(split_pressure(g, &f1, &f2, u1, params)?.p)
}

/// Integrate to `cfg.T`, saving every `save_every` steps and at the end.
pub fn run(g: &Grid, s0: &State, cfg: &SimConfig, which: Which<'_>) -> Trajectory {
    run_with(g, s0, cfg, which, RunOptions::default())
}

pub fn run_with<'a>(
    g: &Grid,
    s0: &State,
    cfg: &SimConfig,
    which: Which<'a>,
    mut opts: RunOptions<'a>,
) -> Trajectory {
    let (n_steps, dt) = cfg.steps();
    let name = which.name();
    let mut traj = Trajectory {
        snapshots: Vec::new(),
        diagnostics: Vec::new(),
        dt,
        which: name,
        failure: None,
    };
    if let Err(e) = cfg.validate().and_then(|_| {
        g.check(&s0.u1)?;
        g.check(&s0.u2)?;
        g.check(&s0.theta)
    }) {
        traj.snapshots.push(s0.clone());
        traj.failure = Some(e);
        return traj;
    }
    let params = effective_params(&which, &cfg.params);
    let dynamics = match &which {
        Which::Linearized(bg) => Dynamics::Linearized { background: *bg },
        _ => Dynamics::Nonlinear {
            source: opts.source,
        },
    };
    let result = (|| -> Result<()> {
        let stepper = Stepper::new(g, params, dt)?;
        let mut u = stepper.from_fields(&s0.u1, &s0.u2, &s0.theta);
        let h = g.dx().min(g.min_dy());
        for n in 0..=n_steps {
            let t = s0.time + n as f64 * dt;
            let out = if n < n_steps {
                Some(stepper.step(&dynamics, n, t, &u, opts.observer.as_deref_mut())?)
            } else {
                None
            };
            let (fields, tend) = match &out {
                Some(o) => (
                    (&o.start_fields.0, &o.start_fields.1, &o.start_fields.2),
                    &o.start_tendency,
                ),
                None => {
                    // final state: evaluate once more for diagnostics
                    let (u1, u2, th) = u.to_fields(g);
                    if !(u1.is_finite() && u2.is_finite() && th.is_finite()) {
                        return Err(Error::BlowUp {
                            time: t,
                            what: "final state".into(),
                        });
                    }
                    if let Some(obs) = opts.observer.as_deref_mut() {
                        obs(&StageView {
                            step: n,
                            stage: 0,
                            time: t,
                            u1: &u1,
                            u2: &u2,
                            theta: &th,
                        });
                    }
                    let tend = dynamics.tendency(
                        &Derivs { g, ops: g.sbp() },
                        t,
                        &StageFields {
                            u1: &u1,
                            u2: &u2,
                            theta: &th,
                        },
                    )?;
                    let d = diagnose(g, &params, t, (&u1, &u2, &th), &tend)?;
                    traj.diagnostics.push(d);
                    let p = if opts.pressure {
                        pressure_of(g, &params, (&u1, &th), &tend)?
                    } else {
                        Field::zeros(g.nx(), g.ny())
                    };
                    traj.snapshots.push(State {
                        u1,
                        u2,
                        theta: th,
                        p,
                        time: t,
                        wall_ghost: None,
                    });
                    break;
                }
            };
            let d = diagnose(g, &params, t, fields, tend)?;
            traj.diagnostics.push(d);
            if n % cfg.save_every == 0 {
                let p = if opts.pressure {
                    pressure_of(g, &params, (fields.0, fields.2), tend)?
                } else {
                    Field::zeros(g.nx(), g.ny())
                };
                traj.snapshots.push(State {
                    u1: fields.0.clone(),
                    u2: fields.1.clone(),
                    theta: fields.2.clone(),
                    p,
                    time: t,
                    wall_ghost: None,
                });
            }
            let speed = fields
                .0
                .values()
                .iter()
                .zip(fields.1.values())
                .fold(0.0f64, |m, (a, b)| m.max(a.hypot(*b)));
            let cfl = dt * speed / h;
            if cfl > CFL_LIMIT {
                return Err(Error::Cfl {
                    time: t,
                    cfl,
                    limit: CFL_LIMIT,
                });
            }
            u = out.expect("non-final step").next;
        }
        Ok(())
    })();
    if let Err(e) = result {
        if traj.snapshots.is_empty() {
            traj.snapshots.push(s0.clone());
        }
        traj.failure = Some(e);
    }
    traj
}

fn single_step(g: &Grid, s: &State, cfg: &SimConfig, which: Which<'_>, source: Option<&dyn Source>) -> Result<State> {
    let params = effective_params(&which, &cfg.params);
    let dynamics = match &which {
        Which::Linearized(bg) => Dynamics::Linearized { background: *bg },
        _ => Dynamics::Nonlinear { source },
    };
    let stepper = Stepper::new(g, params, cfg.dt)?;
    let u = stepper.from_fields(&s.u1, &s.u2, &s.theta);
    let out = stepper.step(&dynamics, 0, s.time, &u, None)?;
    let (u1, u2, theta) = out.next.to_fields(g);
    let t = s.time + cfg.dt;
    if !(u1.is_finite() && u2.is_finite() && theta.is_finite()) {
        return Err(Error::BlowUp {
            time: t,
            what: "step result".into(),
        });
    }
    Ok(State {
        u1,
        u2,
        theta,
        p: Field::zeros(g.nx(), g.ny()),
        time: t,
        wall_ghost: None,
    })
}

/// One explicit step of the zero-dissipation system.
pub fn step_inviscid(g: &Grid, s: &State, cfg: &SimConfig) -> Result<State> {
    single_step(g, s, cfg, Which::Inviscid, None)
}

/// One IMEX step with vertical (and optional horizontal) dissipation.
pub fn step_viscous(g: &Grid, s: &State, cfg: &SimConfig) -> Result<State> {
    single_step(g, s, cfg, Which::Viscous, None)
}

/// One step of the error system linearised about `a`.
pub fn step_linearized(g: &Grid, e: &State, a: &dyn Background, cfg: &SimConfig) -> Result<State> {
    single_step(g, e, cfg, Which::Linearized(a), None)
}

/// One step with an injected forcing.
pub fn step_forced(g: &Grid, s: &State, cfg: &SimConfig, which: Which<'_>, source: &dyn Source) -> Result<State> {
    single_step(g, s, cfg, which, Some(source))
}
