//! Sampled fields, states, physical parameters and well-prepared initial data.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::elliptic::Projector;
use crate::error::{Error, Result};
use crate::grid::{ddx, ddy, Grid};

/// Scalar samples on an `nx × ny` grid, stored row-major with `x` fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    nx: usize,
    ny: usize,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(nx: usize, ny: usize) -> Self {
        Self {
            nx,
            ny,
            values: vec![0.0; nx * ny],
        }
    }

    pub fn from_vec(nx: usize, ny: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != nx * ny {
            return Err(Error::ShapeMismatch {
                expected: (nx, ny),
                got: (values.len(), 1),
            });
        }
        Ok(Self { nx, ny, values })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.nx + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.values[j * self.nx + i] = v;
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.values[j * self.nx..(j + 1) * self.nx]
    }

    pub fn row_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.values[j * self.nx..(j + 1) * self.nx]
    }

    pub fn same_shape(&self, other: &Field) -> bool {
        self.nx == other.nx && self.ny == other.ny
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_diff(&self, other: &Field) -> f64 {
        assert!(self.same_shape(other));
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            nx: self.nx,
            ny: self.ny,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Field {
        assert!(self.same_shape(other));
        Field {
            nx: self.nx,
            ny: self.ny,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn add(&self, other: &Field) -> Field {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Field) -> Field {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Field) -> Field {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn scale(&self, s: f64) -> Field {
        self.map(|v| v * s)
    }

    /// `self += a * x`.
    pub fn axpy(&mut self, a: f64, x: &Field) {
        assert!(self.same_shape(x));
        for (s, v) in self.values.iter_mut().zip(&x.values) {
            *s += a * v;
        }
    }
}

/// Boundary-condition family at `y = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BcVariant {
    /// `u₂ = 0` and `∂y u₁ = α u₁`.
    #[default]
    Navier,
    /// `u₂ = 0` only; the tangential component carries no slip term.
    ImpermeableOnly,
}

impl FromStr for BcVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "navier" => Ok(BcVariant::Navier),
            "impermeable" | "impermeable_only" => Ok(BcVariant::ImpermeableOnly),
            other => Err(Error::InvalidParams(format!(
                "unknown boundary variant `{other}` (expected navier | impermeable)"
            ))),
        }
    }
}

/// Dissipation coefficients and boundary data.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysParams {
    pub eps: f64,
    pub alpha: f64,
    pub nu1: f64,
    pub nu2: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    pub bc_variant: BcVariant,
}

impl PhysParams {
    /// Vertical viscosity `ε²`, no diffusivity, Navier slip.
    pub fn headline(eps: f64, alpha: f64) -> Self {
        Self {
            eps,
            alpha,
            nu1: 0.0,
            nu2: eps * eps,
            kappa1: 0.0,
            kappa2: 0.0,
            bc_variant: BcVariant::Navier,
        }
    }

    /// All dissipation switched off.
    pub fn inviscid(alpha: f64) -> Self {
        Self {
            nu2: 0.0,
            ..Self::headline(1.0, alpha)
        }
    }

    /// The same family at another `ε`: every dissipation coefficient scales as `ε²`.
    pub fn at_eps(&self, eps: f64) -> Self {
        let r = (eps / self.eps).powi(2);
        Self {
            eps,
            nu1: self.nu1 * r,
            nu2: self.nu2 * r,
            kappa1: self.kappa1 * r,
            kappa2: self.kappa2 * r,
            ..*self
        }
    }

    /// Dissipation switched off, boundary data kept.
    pub fn without_dissipation(&self) -> Self {
        Self {
            nu1: 0.0,
            nu2: 0.0,
            kappa1: 0.0,
            kappa2: 0.0,
            ..*self
        }
    }

    pub fn is_inviscid(&self) -> bool {
        self.nu1 == 0.0 && self.nu2 == 0.0 && self.kappa1 == 0.0 && self.kappa2 == 0.0
    }

    /// Slip coefficient that enters the wall row (zero without the Navier term).
    pub fn wall_alpha(&self) -> f64 {
        match self.bc_variant {
            BcVariant::Navier => self.alpha,
            BcVariant::ImpermeableOnly => 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps <= 1.0) {
            return Err(Error::InvalidParams(format!(
                "eps must lie in (0, 1] (got {})",
                self.eps
            )));
        }
        if !self.alpha.is_finite() {
            return Err(Error::InvalidParams("alpha must be finite".into()));
        }
        for (name, v) in [
            ("nu1", self.nu1),
            ("nu2", self.nu2),
            ("kappa1", self.kappa1),
            ("kappa2", self.kappa2),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParams(format!(
                    "{name} must be finite and >= 0 (got {v})"
                )));
            }
        }
        Ok(())
    }
}

/// Velocity, temperature and pressure at one time instant.
#[derive(Clone, Debug, PartialEq)]
pub struct State {
    pub u1: Field,
    pub u2: Field,
    pub theta: Field,
    pub p: Field,
    pub time: f64,
    /// Ghost row of `u₁` below the wall closing the centred Navier relation.
    pub wall_ghost: Option<Vec<f64>>,
}

impl State {
    pub fn zeros(g: &Grid) -> Self {
        let z = Field::zeros(g.nx(), g.ny());
        Self {
            u1: z.clone(),
            u2: z.clone(),
            theta: z.clone(),
            p: z,
            time: 0.0,
            wall_ghost: None,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.u1.is_finite() && self.u2.is_finite() && self.theta.is_finite() && self.p.is_finite()
    }

    pub fn max_speed(&self) -> f64 {
        self.u1
            .values()
            .iter()
            .zip(self.u2.values())
            .fold(0.0, |m, (a, b)| m.max(a.hypot(*b)))
    }
}

/// Closed-form profile `P(y) e^{-a y²}` with polynomial `P`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussPoly {
    /// Coefficients of `P`, lowest degree first.
    pub coef: Vec<f64>,
    pub a: f64,
}

impl GaussPoly {
    pub fn new(coef: Vec<f64>, a: f64) -> Self {
        Self { coef, a }
    }

    pub fn eval(&self, y: f64) -> f64 {
        let p = self.coef.iter().rev().fold(0.0, |acc, c| acc * y + c);
        p * (-self.a * y * y).exp()
    }

    /// `(P' - 2 a y P) e^{-a y²}`.
    pub fn derivative(&self) -> GaussPoly {
        let n = self.coef.len();
        let mut out = vec![0.0; n + 1];
        for (d, c) in self.coef.iter().enumerate() {
            if d > 0 {
                out[d - 1] += d as f64 * c;
            }
            out[d + 1] -= 2.0 * self.a * c;
        }
        while out.len() > 1 && *out.last().unwrap() == 0.0 {
            out.pop();
        }
        GaussPoly::new(out, self.a)
    }

    /// `[f, f', f'', ...]` up to order `n`.
    pub fn derivatives(&self, n: usize) -> Vec<GaussPoly> {
        let mut out = vec![self.clone()];
        for _ in 0..n {
            let next = out.last().unwrap().derivative();
            out.push(next);
        }
        out
    }
}

/// Streamfunction profile `g(y) = (y + α y²/2) e^{-y²/2}`: `g(0) = 0`, `g'(0) = 1`, `g''(0) = α`.
pub fn slip_profile(alpha: f64) -> GaussPoly {
    GaussPoly::new(vec![0.0, 1.0, 0.5 * alpha], 0.5)
}

/// Temperature profile `e^{-y²}`.
pub fn theta_profile() -> GaussPoly {
    GaussPoly::new(vec![1.0], 1.0)
}

/// Named initial-data recipes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Recipe {
    VortexPair,
    ShearJet,
    Manufactured,
}

impl Recipe {
    pub fn name(&self) -> &'static str {
        match self {
            Recipe::VortexPair => "vortex_pair",
            Recipe::ShearJet => "shear_jet",
            Recipe::Manufactured => "manufactured",
        }
    }
}

impl fmt::Display for Recipe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Recipe {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vortex_pair" => Ok(Recipe::VortexPair),
            "shear_jet" => Ok(Recipe::ShearJet),
            "manufactured" => Ok(Recipe::Manufactured),
            other => Err(Error::UnknownRecipe(other.to_string())),
        }
    }
}

/// Base wavenumber of the recipes, so that data are periodic for any `Lx`.
pub fn base_wavenumber(g: &Grid) -> f64 {
    2.0 * PI / g.lx()
}

/// Analytic velocity and temperature of a recipe at `t = 0`.
pub fn recipe_fields(
    g: &Grid,
    recipe: Recipe,
    amplitude: f64,
    alpha: f64,
) -> (Field, Field, Field) {
    let k0 = base_wavenumber(g);
    let a = amplitude;
    match recipe {
        Recipe::VortexPair | Recipe::Manufactured => {
            let gp = slip_profile(alpha).derivatives(1);
            let th = theta_profile();
            let scale_t = if recipe == Recipe::VortexPair { 0.5 } else { 1.0 };
            let u1 = g.sample(|x, y| a * (k0 * x).sin() * gp[1].eval(y));
            let u2 = g.sample(|x, y| -a * k0 * (k0 * x).cos() * gp[0].eval(y));
            let theta = g.sample(|x, y| scale_t * a * (k0 * x).sin() * th.eval(y));
            (u1, u2, theta)
        }
        Recipe::ShearJet => {
            let u1 = g.sample(|_, y| a * (1.0 + alpha * y) * (-y * y).exp());
            let u2 = Field::zeros(g.nx(), g.ny());
            let theta = g.sample(|x, y| 0.5 * a * (k0 * x).sin() * (-y * y).exp());
            (u1, u2, theta)
        }
    }
}

/// Streamfunction of the recipes that have one (`u₁ = ∂yψ`, `u₂ = −∂xψ`).
pub fn recipe_streamfunction(g: &Grid, recipe: Recipe, amplitude: f64, alpha: f64) -> Option<Field> {
    let k0 = base_wavenumber(g);
    match recipe {
        Recipe::VortexPair | Recipe::Manufactured => {
            let gp = slip_profile(alpha);
            Some(g.sample(|x, y| amplitude * (k0 * x).sin() * gp.eval(y)))
        }
        Recipe::ShearJet => None,
    }
}

/// Well-prepared initial state: divergence-free, impermeable, slip-compatible.
///
/// Velocities come from the sampled streamfunction through the discrete
/// operators, so the discrete divergence vanishes to roundoff. The first
/// interior row of `ψ` then absorbs an `O(h³)` correction that makes the
/// discrete slip relation hold exactly on the wall row.
pub fn make_initial_data(g: &Grid, recipe: Recipe, amplitude: f64, alpha: f64) -> Result<State> {
    if !(amplitude >= 0.0 && amplitude.is_finite()) {
        return Err(Error::InvalidParams(format!(
            "amplitude must be finite and >= 0 (got {amplitude})"
        )));
    }
    let (u1, u2, theta) = match recipe_streamfunction(g, recipe, amplitude, alpha) {
        Some(mut psi) => {
            let n = g.ny();
            psi.row_mut(0).iter_mut().for_each(|v| *v = 0.0);
            psi.row_mut(n - 1).iter_mut().for_each(|v| *v = 0.0);
            enforce_discrete_slip(g, &mut psi, alpha);
            let (_, _, theta) = recipe_fields(g, recipe, amplitude, alpha);
            (ddy(g, &psi)?, ddx(g, &psi)?.scale(-1.0), theta)
        }
        None => {
            let (u1, u2, theta) = recipe_fields(g, recipe, amplitude, alpha);
            let (u1, u2) = project_div_free(g, &u1, &u2)?;
            (u1, u2, theta)
        }
    };
    Ok(State {
        u1,
        u2,
        theta,
        p: Field::zeros(g.nx(), g.ny()),
        time: 0.0,
        wall_ghost: None,
    })
}

/// Adjust row 1 of `ψ` so that `(D D ψ)₀ = α (D ψ)₀` in every column.
fn enforce_discrete_slip(g: &Grid, psi: &mut Field, alpha: f64) {
    let d = g.sbp().matrix();
    let row0 = &g.d1_stencils()[0];
    let mut a = vec![0.0; g.ny()];
    for (m, c) in row0.c.iter().enumerate() {
        for &(col, v) in d.row(row0.start + m) {
            a[col] += c * v;
        }
    }
    for &(col, v) in d.row(0) {
        a[col] -= alpha * v;
    }
    for i in 0..g.nx() {
        let eta: f64 = a.iter().enumerate().map(|(j, c)| c * psi.get(i, j)).sum();
        let v = psi.get(i, 1) - eta / a[1];
        psi.set(i, 1, v);
    }
}

/// Parse and build in one go.
pub fn make_initial_data_named(g: &Grid, recipe: &str, amplitude: f64, alpha: f64) -> Result<State> {
    make_initial_data(g, recipe.parse()?, amplitude, alpha)
}

/// Discrete divergence `∂x u₁ + ∂y u₂`.
pub fn divergence(g: &Grid, u1: &Field, u2: &Field) -> Result<Field> {
    Ok(ddx(g, u1)?.add(&ddy(g, u2)?))
}

/// `W`-orthogonal projection onto discretely divergence-free fields with `u₂ = 0` at both walls.
pub fn project_div_free(g: &Grid, u1: &Field, u2: &Field) -> Result<(Field, Field)> {
    g.check(u1)?;
    g.check(u2)?;
    Projector::new(g)?.project(g, u1, u2)
}

/// `max_x |∂y u₁ − α u₁|` at `y = 0` with the one-sided wall stencil.
pub fn wall_slip_defect(g: &Grid, u1: &Field, alpha: f64) -> f64 {
    let st = &g.d1_stencils()[0];
    (0..g.nx())
        .map(|i| {
            let d: f64 = st.c.iter().enumerate().map(|(m, c)| c * (u1.get(i, m) - u1.get(i, 0))).sum();
            (d - alpha * u1.get(i, 0)).abs()
        })
        .fold(0.0, f64::max)
}

/// Impose `u₂ = 0` on the wall row and close the slip relation through a ghost row.
///
/// The ghost values `u₁(x, −h₀) = u₁(x, h₀) − 2 h₀ α u₁(x, 0)` make the centred
/// wall difference satisfy `∂y u₁ = α u₁` exactly; the interior values are left alone.
pub fn apply_navier_bc(g: &Grid, s: &State, params: &PhysParams) -> State {
    let mut out = s.clone();
    out.u2.row_mut(0).iter_mut().for_each(|v| *v = 0.0);
    out.wall_ghost = match params.bc_variant {
        BcVariant::Navier => {
            let h0 = g.spacing(0);
            Some(
                (0..g.nx())
                    .map(|i| out.u1.get(i, 1) - 2.0 * h0 * params.alpha * out.u1.get(i, 0))
                    .collect(),
            )
        }
        BcVariant::ImpermeableOnly => None,
    };
    out
}

/// Centred wall defect `|(u₁(h₀) − ghost)/(2h₀) − α u₁(0)|`, zero after [`apply_navier_bc`].
pub fn ghost_slip_defect(g: &Grid, s: &State, alpha: f64) -> Option<f64> {
    let ghost = s.wall_ghost.as_ref()?;
    let h0 = g.spacing(0);
    Some(
        (0..g.nx())
            .map(|i| ((s.u1.get(i, 1) - ghost[i]) / (2.0 * h0) - alpha * s.u1.get(i, 0)).abs())
            .fold(0.0, f64::max),
    )
}
