//! ARS(2,3,3) IMEX stepping in the discrete divergence-free coordinates.
//!
//! Every non-flat `x` mode is advanced as the Galerkin system
//! `M s' = Bᴴ W (F + L B s)` built on the summation-by-parts pair `(D, W)`, so
//! the velocity stays exactly in the discrete divergence-free space,
//! `d/dt ½‖u‖²_W = ⟨u, F + L u⟩_W` holds exactly in the semi-discrete setting,
//! and the implied pressure gradient is consistent up to the walls. Flat modes
//! (mean and Nyquist) carry `û₂ = 0`.
//!
//! The state is the streamfunction coordinate `v = û₂` with `û₁ = (i/k) D v`.

use rustfft::num_complex::Complex64;

use crate::banded::{BandedLu, Sparse};
use crate::elliptic::DivFreeBasis;
use crate::error::{Error, Result};
use crate::fields::{Field, PhysParams};
use crate::grid::{Grid, Spectrum};

use super::explicit::{Derivs, Dynamics, StageFields, Tendency};

/// Implicit diagonal coefficient `γ = (3 + √3)/6`.
pub fn gamma() -> f64 {
    (3.0 + 3f64.sqrt()) / 6.0
}

/// Butcher tableaux `(A_ex, A_im, b, c)`.
pub fn tableau() -> ([[f64; 3]; 3], [[f64; 3]; 3], [f64; 3], [f64; 3]) {
    let g = gamma();
    (
        [[0.0, 0.0, 0.0], [g, 0.0, 0.0], [g - 1.0, 2.0 * (1.0 - g), 0.0]],
        [[0.0, 0.0, 0.0], [0.0, g, 0.0], [0.0, 1.0 - 2.0 * g, g]],
        [0.0, 0.5, 0.5],
        [0.0, g, 1.0 - g],
    )
}

/// Velocity and temperature in `x`-spectral form.
#[derive(Clone, Debug)]
pub struct Spec3 {
    pub u1: Spectrum,
    pub u2: Spectrum,
    pub theta: Spectrum,
}

impl Spec3 {
    pub fn from_fields(g: &Grid, u1: &Field, u2: &Field, theta: &Field) -> Self {
        Self {
            u1: g.forward(u1),
            u2: g.forward(u2),
            theta: g.forward(theta),
        }
    }

    pub fn axpy(&mut self, a: f64, x: &Spec3) {
        for (dst, src) in [
            (&mut self.u1, &x.u1),
            (&mut self.u2, &x.u2),
            (&mut self.theta, &x.theta),
        ] {
            for (d, s) in dst.data.iter_mut().zip(&src.data) {
                *d += s * a;
            }
        }
    }

    pub fn to_fields(&self, g: &Grid) -> (Field, Field, Field) {
        let mut u2 = g.inverse(&self.u2);
        let n = g.ny();
        u2.row_mut(0).iter_mut().for_each(|v| *v = 0.0);
        u2.row_mut(n - 1).iter_mut().for_each(|v| *v = 0.0);
        (g.inverse(&self.u1), u2, g.inverse(&self.theta))
    }
}

struct ModeOps {
    k: f64,
    flat: bool,
    mass: Option<BandedLu>,
    implicit_u: Option<BandedLu>,
    implicit_theta: Option<BandedLu>,
}

/// Stage solutions handed to observers.
pub struct StageView<'a> {
    pub step: usize,
    pub stage: usize,
    pub time: f64,
    pub u1: &'a Field,
    pub u2: &'a Field,
    pub theta: &'a Field,
}

pub type Observer<'a> = dyn FnMut(&StageView<'_>) + 'a;

/// Result of one step: the new state and the start-of-step tendency.
pub struct StepOutput {
    pub next: Spec3,
    pub start_fields: (Field, Field, Field),
    pub start_tendency: Tendency,
}

pub struct Stepper<'g> {
    g: &'g Grid,
    params: PhysParams,
    dt: f64,
    basis: DivFreeBasis,
    d2_u: Sparse,
    d2_theta: Sparse,
    modes: Vec<ModeOps>,
    viscous: bool,
    diffusive: bool,
}

impl<'g> Stepper<'g> {
    pub fn new(g: &'g Grid, params: PhysParams, dt: f64) -> Result<Self> {
        params.validate()?;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParams(format!("dt must be positive (got {dt})")));
        }
        let n = g.ny();
        let basis = DivFreeBasis::new(g);
        let aw = params.wall_alpha();
        let ops = g.sbp();
        let s_u = ops.weighted_d2(aw);
        let d2_u = ops.pointwise_d2(aw);
        let d2_theta = ops.pointwise_d2(0.0);
        let viscous = params.nu1 > 0.0 || params.nu2 > 0.0;
        let diffusive = params.kappa1 > 0.0 || params.kappa2 > 0.0;
        let gdt = gamma() * dt;
        let mut modes = Vec::with_capacity(g.nk());
        for m in 0..g.nk() {
            let k = g.wavenumber(m);
            let flat = g.is_flat_mode(m);
            let (mass, implicit_u) = if flat {
                let imp = if viscous {
                    let a = Sparse::identity(n).plus(&d2_u.scaled(-gdt * params.nu2));
                    Some(a.to_banded().factor()?)
                } else {
                    None
                };
                (None, imp)
            } else {
                let msp = basis.mass(k);
                let mass = msp.to_banded().factor()?;
                let imp = if viscous {
                    let kmat = basis
                        .pull_back(k, &s_u, &s_u)
                        .scaled(params.nu2)
                        .plus(&msp.scaled(-params.nu1 * k * k));
                    Some(msp.plus(&kmat.scaled(-gdt)).to_banded().factor()?)
                } else {
                    None
                };
                (Some(mass), imp)
            };
            let implicit_theta = if diffusive {
                let mut a = Sparse::identity(n).plus(&d2_theta.scaled(-gdt * params.kappa2));
                for j in 0..n {
                    a.add(j, j, gdt * params.kappa1 * k * k);
                }
                Some(a.to_banded().factor()?)
            } else {
                None
            };
            modes.push(ModeOps {
                k,
                flat,
                mass,
                implicit_u,
                implicit_theta,
            });
        }
        Ok(Self {
            g,
            params,
            dt,
            basis,
            d2_u,
            d2_theta,
            modes,
            viscous,
            diffusive,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn params(&self) -> &PhysParams {
        &self.params
    }

    /// Spectral state from divergence-free fields; `û₁` of the non-flat modes
    /// is rebuilt from `û₂`.
    pub fn from_fields(&self, u1: &Field, u2: &Field, theta: &Field) -> Spec3 {
        let mut s = Spec3::from_fields(self.g, u1, u2, theta);
        let n = self.g.ny();
        let zero = vec![Complex64::new(0.0, 0.0); n];
        for (m, ops) in self.modes.iter().enumerate() {
            if ops.flat {
                s.u2.set_mode(m, &zero);
            } else {
                let (a, b) = self.basis.expand(ops.k, &s.u2.mode(m)[1..n - 1]);
                s.u1.set_mode(m, &a);
                s.u2.set_mode(m, &b);
            }
        }
        s
    }

    /// `L U` for the implicit operator, mode by mode.
    pub fn apply_l(&self, u: &Spec3) -> Spec3 {
        let n = self.g.ny();
        let p = &self.params;
        let mut out = Spec3 {
            u1: Spectrum::zeros(u.u1.nk, n),
            u2: Spectrum::zeros(u.u1.nk, n),
            theta: Spectrum::zeros(u.u1.nk, n),
        };
        let mut tmp = vec![Complex64::new(0.0, 0.0); n];
        for (m, ops) in self.modes.iter().enumerate() {
            let k2 = ops.k * ops.k;
            if self.viscous {
                let c = u.u1.mode(m);
                self.d2_u.apply_complex(&c, &mut tmp);
                let col: Vec<Complex64> = tmp
                    .iter()
                    .zip(&c)
                    .map(|(d, v)| d * p.nu2 - v * (p.nu1 * k2))
                    .collect();
                out.u1.set_mode(m, &col);
                let c = u.u2.mode(m);
                self.d2_u.apply_complex(&c, &mut tmp);
                let mut col: Vec<Complex64> = tmp
                    .iter()
                    .zip(&c)
                    .map(|(d, v)| d * p.nu2 - v * (p.nu1 * k2))
                    .collect();
                col[0] = Complex64::new(0.0, 0.0);
                col[n - 1] = Complex64::new(0.0, 0.0);
                out.u2.set_mode(m, &col);
            }
            if self.diffusive {
                let c = u.theta.mode(m);
                self.d2_theta.apply_complex(&c, &mut tmp);
                let col: Vec<Complex64> = tmp
                    .iter()
                    .zip(&c)
                    .map(|(d, v)| d * p.kappa2 - v * (p.kappa1 * k2))
                    .collect();
                out.theta.set_mode(m, &col);
            }
        }
        out
    }

    /// Solve `(I − γ dt L) U = R` (implicit) or `U = P R` (projection only).
    pub fn solve(&self, r: &Spec3, implicit: bool) -> Spec3 {
        let n = self.g.ny();
        let mut out = r.clone();
        let zero = vec![Complex64::new(0.0, 0.0); n];
        for (m, ops) in self.modes.iter().enumerate() {
            let lu_u = if implicit { ops.implicit_u.as_ref() } else { None };
            if ops.flat {
                if let Some(lu) = lu_u {
                    let mut c = r.u1.mode(m);
                    lu.solve_complex(&mut c);
                    out.u1.set_mode(m, &c);
                }
                out.u2.set_mode(m, &zero);
            } else {
                let lu = lu_u.or(ops.mass.as_ref()).expect("non-flat mode has a mass matrix");
                let mut v = self.basis.test(ops.k, &r.u1.mode(m), &r.u2.mode(m));
                lu.solve_complex(&mut v);
                let (a, b) = self.basis.expand(ops.k, &v);
                out.u1.set_mode(m, &a);
                out.u2.set_mode(m, &b);
            }
            if implicit {
                if let Some(lu) = &ops.implicit_theta {
                    let mut c = r.theta.mode(m);
                    lu.solve_complex(&mut c);
                    out.theta.set_mode(m, &c);
                }
            }
        }
        out
    }

    fn forward_tendency(&self, t: &Tendency, theta: &Field) -> Spec3 {
        let (f1, f2) = t.momentum(theta);
        Spec3::from_fields(self.g, &f1, &f2, &t.temperature())
    }

    /// One ARS(2,3,3) step from `(t, un)`.
    pub fn step(
        &self,
        dynamics: &Dynamics<'_>,
        step: usize,
        t: f64,
        un: &Spec3,
        mut observer: Option<&mut Observer<'_>>,
    ) -> Result<StepOutput> {
        let (a_ex, a_im, b, c) = tableau();
        let dt = self.dt;
        let mut stages: Vec<Spec3> = Vec::with_capacity(3);
        let mut f: Vec<Spec3> = Vec::with_capacity(3);
        let mut lu: Vec<Spec3> = Vec::with_capacity(3);
        let mut start = None;
        for i in 0..3 {
            let ui = if i == 0 {
                un.clone()
            } else {
                let mut r = un.clone();
                for j in 0..i {
                    if a_ex[i][j] != 0.0 {
                        r.axpy(dt * a_ex[i][j], &f[j]);
                    }
                    if a_im[i][j] != 0.0 && (self.viscous || self.diffusive) {
                        r.axpy(dt * a_im[i][j], &lu[j]);
                    }
                }
                self.solve(&r, true)
            };
            let (u1, u2, th) = ui.to_fields(self.g);
            let ts = t + c[i] * dt;
            if !(u1.is_finite() && u2.is_finite() && th.is_finite()) {
                return Err(Error::BlowUp {
                    time: ts,
                    what: format!("stage {i} of step {step}"),
                });
            }
            if let Some(obs) = observer.as_deref_mut() {
                obs(&StageView {
                    step,
                    stage: i,
                    time: ts,
                    u1: &u1,
                    u2: &u2,
                    theta: &th,
                });
            }
            let derivs = Derivs {
                g: self.g,
                ops: self.g.sbp(),
            };
            let tend = dynamics.tendency(
                &derivs,
                ts,
                &StageFields {
                    u1: &u1,
                    u2: &u2,
                    theta: &th,
                },
            )?;
            f.push(self.forward_tendency(&tend, &th));
            lu.push(self.apply_l(&ui));
            if i == 0 {
                start = Some(((u1, u2, th), tend));
            }
            stages.push(ui);
        }
        let mut r = un.clone();
        for j in 0..3 {
            if b[j] != 0.0 {
                r.axpy(dt * b[j], &f[j]);
                if self.viscous || self.diffusive {
                    r.axpy(dt * b[j], &lu[j]);
                }
            }
        }
        let next = self.solve(&r, false);
        let (start_fields, start_tendency) = start.expect("stage 0 ran");
        Ok(StepOutput {
            next,
            start_fields,
            start_tendency,
        })
    }
}
