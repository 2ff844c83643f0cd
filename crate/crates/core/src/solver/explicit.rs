//! Explicit right-hand sides: advection, buoyancy and injected sources.

use crate::error::Result;
use crate::fields::Field;
use crate::grid::{ddx, Grid};
use crate::sbp::YOps;

/// Physical-space fields of the current stage.
pub struct StageFields<'a> {
    pub u1: &'a Field,
    pub u2: &'a Field,
    pub theta: &'a Field,
}

/// Explicit tendency split by origin, so the energy audit can attribute work.
pub struct Tendency {
    pub adv_u1: Field,
    pub adv_u2: Field,
    pub adv_theta: Field,
    pub src_u1: Field,
    pub src_u2: Field,
    pub src_theta: Field,
}

impl Tendency {
    /// Momentum tendency including the buoyancy `θ e₂`.
    pub fn momentum(&self, theta: &Field) -> (Field, Field) {
        (
            self.adv_u1.add(&self.src_u1),
            self.adv_u2.add(&self.src_u2).add(theta),
        )
    }

    pub fn temperature(&self) -> Field {
        self.adv_theta.add(&self.src_theta)
    }
}

/// External forcing `(f₁, f₂, f_θ)` at time `t`.
pub trait Source: Send + Sync {
    fn forcing(&self, g: &Grid, t: f64) -> Result<(Field, Field, Field)>;
}

/// Background of a linearisation at time `t` and the forcing applied to the
/// perturbation. Gradients are taken by the stepper with its own operators.
pub struct BaseFields {
    pub u1: Field,
    pub u2: Field,
    pub theta: Field,
    pub force_u1: Field,
    pub force_u2: Field,
    pub force_theta: Field,
}

/// Time-dependent background for the linearised error system.
pub trait Background: Send + Sync {
    fn base(&self, g: &Grid, t: f64) -> Result<BaseFields>;
}

/// Spectral `x` and summation-by-parts `y` derivatives.
pub struct Derivs<'a> {
    pub g: &'a Grid,
    pub ops: &'a YOps,
}

impl Derivs<'_> {
    pub fn dx(&self, f: &Field) -> Result<Field> {
        ddx(self.g, f)
    }

    pub fn dy(&self, f: &Field) -> Field {
        self.ops.dy(f)
    }

    /// `u·∇f` in standard form.
    pub fn advect(&self, u1: &Field, u2: &Field, f: &Field) -> Result<Field> {
        let mut out = u1.mul(&self.dx(f)?);
        out.axpy(1.0, &u2.mul(&self.dy(f)));
        Ok(out)
    }

    /// `½(u·∇f + ∇·(u f))`. With `u₂ = 0` at both walls this is skew-adjoint
    /// in the `W` inner product, so `⟨f, skew(u, f)⟩ = 0` exactly.
    pub fn skew(&self, u1: &Field, u2: &Field, f: &Field) -> Result<Field> {
        let mut out = self.advect(u1, u2, f)?;
        out.axpy(1.0, &self.dx(&u1.mul(f))?);
        out.axpy(1.0, &self.dy(&u2.mul(f)));
        Ok(out.scale(0.5))
    }
}

pub enum Dynamics<'a> {
    /// Advection `−u·∇u`, `−u·∇θ` in skew form, optional forcing.
    Nonlinear { source: Option<&'a dyn Source> },
    /// `−(e·∇u_a + u_a·∇e)`, `−(e·∇θ_a + u_a·∇θ)`, plus background forcing.
    Linearized { background: &'a dyn Background },
}

impl Dynamics<'_> {
    pub fn tendency(&self, d: &Derivs<'_>, t: f64, s: &StageFields<'_>) -> Result<Tendency> {
        let g = d.g;
        match self {
            Dynamics::Nonlinear { source } => {
                let adv_u1 = d.skew(s.u1, s.u2, s.u1)?.scale(-1.0);
                let adv_u2 = d.skew(s.u1, s.u2, s.u2)?.scale(-1.0);
                let adv_theta = d.skew(s.u1, s.u2, s.theta)?.scale(-1.0);
                let (src_u1, src_u2, src_theta) = match source {
                    Some(src) => src.forcing(g, t)?,
                    None => {
                        let z = Field::zeros(g.nx(), g.ny());
                        (z.clone(), z.clone(), z)
                    }
                };
                Ok(Tendency {
                    adv_u1,
                    adv_u2,
                    adv_theta,
                    src_u1,
                    src_u2,
                    src_theta,
                })
            }
            Dynamics::Linearized { background } => {
                let b = background.base(g, t)?;
                // −(e·∇a + skew(u_a, e)) for each component `a` with perturbation `e`
                let lin = |a: &Field, e: &Field| -> Result<Field> {
                    let mut out = d.advect(s.u1, s.u2, a)?;
                    out.axpy(1.0, &d.skew(&b.u1, &b.u2, e)?);
                    Ok(out.scale(-1.0))
                };
                Ok(Tendency {
                    adv_u1: lin(&b.u1, s.u1)?,
                    adv_u2: lin(&b.u2, s.u2)?,
                    adv_theta: lin(&b.theta, s.theta)?,
                    src_u1: b.force_u1,
                    src_u2: b.force_u2,
                    src_theta: b.force_theta,
                })
            }
        }
    }
}
