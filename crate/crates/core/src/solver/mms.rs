//! Manufactured solution and its forcing.
//!
//! `ψ* = A cos t sin(k x) g(y)`, `θ* = A cos t sin(k x) e^{-y²}` with the slip
//! profile `g`, so the exact pair satisfies impermeability and the Navier
//! relation for all time.

use crate::error::Result;
use crate::fields::{base_wavenumber, slip_profile, theta_profile, Field, GaussPoly, PhysParams};
use crate::grid::Grid;

use super::explicit::Source;

pub struct Manufactured {
    pub amplitude: f64,
    pub params: PhysParams,
    g: Vec<GaussPoly>,
    th: Vec<GaussPoly>,
}

impl Manufactured {
    pub fn new(amplitude: f64, params: PhysParams) -> Self {
        Self {
            amplitude,
            g: slip_profile(params.alpha).derivatives(3),
            th: theta_profile().derivatives(2),
            params,
        }
    }

    /// Exact `(u₁, u₂, θ)` at time `t`.
    pub fn exact(&self, grid: &Grid, t: f64) -> (Field, Field, Field) {
        let k = base_wavenumber(grid);
        let a = self.amplitude * t.cos();
        (
            grid.sample(|x, y| a * (k * x).sin() * self.g[1].eval(y)),
            grid.sample(|x, y| -a * k * (k * x).cos() * self.g[0].eval(y)),
            grid.sample(|x, y| a * (k * x).sin() * self.th[0].eval(y)),
        )
    }
}

impl Source for Manufactured {
    fn forcing(&self, grid: &Grid, t: f64) -> Result<(Field, Field, Field)> {
        let k = base_wavenumber(grid);
        let amp = self.amplitude;
        let (c, sn) = (t.cos(), t.sin());
        let p = &self.params;
        let (mut f1, mut f2, mut f3) = (
            Field::zeros(grid.nx(), grid.ny()),
            Field::zeros(grid.nx(), grid.ny()),
            Field::zeros(grid.nx(), grid.ny()),
        );
        for j in 0..grid.ny() {
            let y = grid.y(j);
            let g: Vec<f64> = self.g.iter().map(|q| q.eval(y)).collect();
            let th: Vec<f64> = self.th.iter().map(|q| q.eval(y)).collect();
            for i in 0..grid.nx() {
                let x = grid.x(i);
                let (s, co) = ((k * x).sin(), (k * x).cos());
                let u1 = amp * c * s * g[1];
                let u2 = -amp * c * k * co * g[0];
                let theta = amp * c * s * th[0];
                let a2 = amp * amp * c * c;
                let v1 = -amp * sn * s * g[1] + a2 * k * s * co * (g[1] * g[1] - g[0] * g[2])
                    - p.nu2 * amp * c * s * g[3]
                    + p.nu1 * k * k * u1;
                let v2 = amp * sn * k * co * g[0] + a2 * k * k * g[0] * g[1] - theta
                    + p.nu2 * amp * c * k * co * g[2]
                    + p.nu1 * k * k * u2;
                let v3 = -amp * sn * s * th[0] + a2 * k * s * co * (g[1] * th[0] - g[0] * th[1])
                    - p.kappa2 * amp * c * s * th[2]
                    + p.kappa1 * k * k * theta;
                f1.set(i, j, v1);
                f2.set(i, j, v2);
                f3.set(i, j, v3);
            }
        }
        Ok((f1, f2, f3))
    }
}
