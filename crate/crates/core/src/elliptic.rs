//! Neumann pressure solves, the `p = p₁ + p₂` splitting, and the discrete
//! divergence-free basis shared by the projection and the time steppers.
//!
//! Every mode `k` of the `x` transform decouples. In `y` the second-difference
//! rows are closed by ghost nodes, and `S = W·D2` is symmetric for all the
//! closures used here.

use rustfft::num_complex::Complex64;

use crate::banded::{BandedLu, Sparse};
use crate::error::{Error, Result};
use crate::fields::{Field, PhysParams};
use crate::grid::{ddx, ddy, Grid, Spectrum, Stencil};

/// Relative residual tolerance of the direct solves.
pub const SOLVER_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct NeumannProblem {
    pub rhs: Field,
    /// `∂y p` at `y = 0`, one value per `x` node.
    pub bottom_flux: Vec<f64>,
    /// `∂y p` at `y = Ly`.
    pub top_flux: Vec<f64>,
}

impl NeumannProblem {
    pub fn homogeneous(rhs: Field) -> Self {
        let nx = rhs.nx();
        Self {
            rhs,
            bottom_flux: vec![0.0; nx],
            top_flux: vec![0.0; nx],
        }
    }

    fn check(&self, g: &Grid) -> Result<()> {
        g.check(&self.rhs)?;
        if self.bottom_flux.len() != g.nx() || self.top_flux.len() != g.nx() {
            return Err(Error::ShapeMismatch {
                expected: (g.nx(), 1),
                got: (self.bottom_flux.len(), self.top_flux.len()),
            });
        }
        Ok(())
    }

    /// `∫ rhs − (∫ top_flux − ∫ bottom_flux)` with the trapezoid rule the
    /// compact solver is consistent with.
    pub fn compatibility_defect(&self, g: &Grid) -> f64 {
        let dx = g.dx();
        let w = g.trapezoid_weights();
        let total: f64 = (0..g.ny()).map(|j| w[j] * self.rhs.row(j).iter().sum::<f64>()).sum();
        total * dx
            - dx * (self.top_flux.iter().sum::<f64>() - self.bottom_flux.iter().sum::<f64>())
    }
}

/// Compact `S = W·D2` (trapezoid `W`) with ghost-node closures: wall row `∂y f = a_w f`, top row `∂y f = 0`.
pub fn weighted_d2(g: &Grid, wall_alpha: f64) -> Sparse {
    let n = g.ny();
    let mut s = Sparse::new(n, n);
    for j in 0..n - 1 {
        let c = 1.0 / g.spacing(j);
        s.add(j, j, -c);
        s.add(j, j + 1, c);
        s.add(j + 1, j + 1, -c);
        s.add(j + 1, j, c);
    }
    s.add(0, 0, -wall_alpha);
    s
}

/// `D2` itself: `W⁻¹ S` with trapezoid `W`.
pub fn pointwise_d2(g: &Grid, wall_alpha: f64) -> Sparse {
    let s = weighted_d2(g, wall_alpha);
    let w = g.trapezoid_weights();
    let mut out = Sparse::new(s.rows, s.cols);
    for r in 0..s.rows {
        for &(c, v) in s.row(r) {
            out.add(r, c, v / w[r]);
        }
    }
    out
}

/// First-difference matrix restricted to interior columns, `n × (n − 2)`.
pub fn interior_d1(stencils: &[Stencil]) -> Sparse {
    let n = stencils.len();
    let mut d = Sparse::new(n, n - 2);
    for (j, st) in stencils.iter().enumerate() {
        for (m, c) in st.c.iter().enumerate() {
            let node = st.start + m;
            if node >= 1 && node <= n - 2 {
                d.add(j, node - 1, *c);
            }
        }
    }
    d
}

/// Coordinates of the discretely divergence-free fields at one `x` mode.
///
/// For wavenumber `k ≠ 0` the admissible pairs are `û₂ = E v`, `û₁ = (i/k) D E v`
/// with interior values `v`. The `W` inner product on velocities pulls back to
/// `M = (1/k²) DᵀWD + W_int`, real symmetric positive definite.
#[derive(Clone, Debug)]
pub struct DivFreeBasis {
    n: usize,
    w: Vec<f64>,
    dint: Sparse,
    dint_t: Sparse,
}

impl DivFreeBasis {
    pub fn new(g: &Grid) -> Self {
        Self::from_parts(g.d1_stencils(), g.y_weights())
    }

    pub fn from_parts(stencils: &[Stencil], w: &[f64]) -> Self {
        let dint = interior_d1(stencils);
        Self {
            n: stencils.len(),
            w: w.to_vec(),
            dint_t: dint.transpose(),
            dint,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dint(&self) -> &Sparse {
        &self.dint
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn mass(&self, k: f64) -> Sparse {
        let n = self.n;
        let mut wd = self.dint.clone();
        let mut scaled = Sparse::new(wd.rows, wd.cols);
        for r in 0..wd.rows {
            for &(c, v) in wd.row(r) {
                scaled.add(r, c, v * self.w[r]);
            }
        }
        wd = scaled;
        let mut m = self.dint_t.mul(&wd).scaled(1.0 / (k * k));
        for a in 0..n - 2 {
            m.add(a, a, self.w[a + 1]);
        }
        m
    }

    /// Pull back a bilinear velocity operator `(S₁ on û₁, S₂ on û₂)` given in weighted form.
    pub fn pull_back(&self, k: f64, s1: &Sparse, s2: &Sparse) -> Sparse {
        let n = self.n;
        let a = self.dint_t.mul(&s1.mul(&self.dint)).scaled(1.0 / (k * k));
        let mut b = Sparse::new(n - 2, n - 2);
        for r in 1..n - 1 {
            for &(c, v) in s2.row(r) {
                if c >= 1 && c <= n - 2 {
                    b.add(r - 1, c - 1, v);
                }
            }
        }
        a.plus(&b)
    }

    /// `Bᴴ W r`.
    pub fn test(&self, k: f64, r1: &[Complex64], r2: &[Complex64]) -> Vec<Complex64> {
        let n = self.n;
        let wr1: Vec<Complex64> = r1.iter().zip(&self.w).map(|(z, w)| z * *w).collect();
        let mut out = vec![Complex64::new(0.0, 0.0); n - 2];
        self.dint_t.apply_complex(&wr1, &mut out);
        let f = Complex64::new(0.0, -1.0 / k);
        for a in 0..n - 2 {
            out[a] = out[a] * f + r2[a + 1] * self.w[a + 1];
        }
        out
    }

    /// `B v`.
    pub fn expand(&self, k: f64, v: &[Complex64]) -> (Vec<Complex64>, Vec<Complex64>) {
        let n = self.n;
        let mut u1 = vec![Complex64::new(0.0, 0.0); n];
        self.dint.apply_complex(v, &mut u1);
        let f = Complex64::new(0.0, 1.0 / k);
        u1.iter_mut().for_each(|z| *z *= f);
        let mut u2 = vec![Complex64::new(0.0, 0.0); n];
        u2[1..n - 1].copy_from_slice(v);
        (u1, u2)
    }
}

/// Cached `W`-orthogonal projector onto discretely divergence-free velocities.
pub struct Projector {
    basis: DivFreeBasis,
    // factored mass matrix per mode; `None` for the mean and Nyquist modes
    mass: Vec<Option<BandedLu>>,
    k: Vec<f64>,
}

impl Projector {
    pub fn new(g: &Grid) -> Result<Self> {
        let basis = DivFreeBasis::new(g);
        let mut mass = Vec::with_capacity(g.nk());
        let mut k = Vec::with_capacity(g.nk());
        for m in 0..g.nk() {
            k.push(g.wavenumber(m));
            if g.is_flat_mode(m) {
                mass.push(None);
            } else {
                mass.push(Some(basis.mass(g.wavenumber(m)).to_banded().factor()?));
            }
        }
        Ok(Self { basis, mass, k })
    }

    pub fn basis(&self) -> &DivFreeBasis {
        &self.basis
    }

    /// Project one mode in place.
    pub fn project_mode(&self, m: usize, u1: &mut [Complex64], u2: &mut [Complex64]) {
        match &self.mass[m] {
            None => u2.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0)),
            Some(lu) => {
                let k = self.k[m];
                let mut v = self.basis.test(k, u1, u2);
                lu.solve_complex(&mut v);
                let (a, b) = self.basis.expand(k, &v);
                u1.copy_from_slice(&a);
                u2.copy_from_slice(&b);
            }
        }
    }

    pub fn project_spectrum(&self, s1: &mut Spectrum, s2: &mut Spectrum) {
        for m in 0..s1.nk {
            let mut a = s1.mode(m);
            let mut b = s2.mode(m);
            self.project_mode(m, &mut a, &mut b);
            s1.set_mode(m, &a);
            s2.set_mode(m, &b);
        }
    }

    pub fn project(&self, g: &Grid, u1: &Field, u2: &Field) -> Result<(Field, Field)> {
        let mut s1 = g.forward(u1);
        let mut s2 = g.forward(u2);
        self.project_spectrum(&mut s1, &mut s2);
        let (a, b) = (g.inverse(&s1), g.inverse(&s2));
        let mut b = b;
        b.row_mut(0).iter_mut().for_each(|v| *v = 0.0);
        let n = g.ny();
        b.row_mut(n - 1).iter_mut().for_each(|v| *v = 0.0);
        Ok((a, b))
    }
}

/// Per-mode Neumann operator `S − k²W`, closed by flux data through ghost rows.
struct NeumannModes {
    lus: Vec<BandedLu>,
    ops: Vec<Sparse>,
}

impl NeumannModes {
    fn new(g: &Grid) -> Result<Self> {
        let n = g.ny();
        let s = weighted_d2(g, 0.0);
        let w = g.trapezoid_weights();
        let mut lus = Vec::with_capacity(g.nk());
        let mut ops = Vec::with_capacity(g.nk());
        for m in 0..g.nk() {
            let k = g.laplace_wavenumber(m);
            let mut a = s.scaled(-1.0);
            for j in 0..n {
                a.add(j, j, k * k * w[j]);
            }
            ops.push(a.clone());
            if m == 0 {
                // pin p₀ = 0 to remove the constant null space
                let mut pinned = Sparse::new(n, n);
                pinned.add(0, 0, 1.0);
                for r in 1..n {
                    for &(c, v) in a.row(r) {
                        if c != 0 {
                            pinned.add(r, c, v);
                        }
                    }
                }
                a = pinned;
            }
            lus.push(a.to_banded().factor().map_err(|e| {
                Error::Elliptic(format!("mode {m}: {e}"))
            })?);
        }
        Ok(Self { lus, ops })
    }
}

fn weighted_rhs(g: &Grid, r: &[Complex64], g0: Complex64, gt: Complex64) -> Vec<Complex64> {
    let w = g.trapezoid_weights();
    let n = g.ny();
    let mut b: Vec<Complex64> = r.iter().zip(w).map(|(z, w)| -(z * *w)).collect();
    b[0] -= g0;
    b[n - 1] += gt;
    b
}

/// Solve `Δp = rhs` with `∂y p` prescribed at both walls; zero domain mean.
pub fn solve_neumann(g: &Grid, prob: &NeumannProblem) -> Result<Field> {
    prob.check(g)?;
    let modes = NeumannModes::new(g)?;
    let n = g.ny();
    let rhs = g.forward(&prob.rhs);
    let fb = g.forward_row(&prob.bottom_flux);
    let ft = g.forward_row(&prob.top_flux);
    // the compact operator is consistent with trapezoid weights; the gauge uses the grid quadrature
    let w = g.trapezoid_weights();
    let wq = g.y_weights();
    let ly = g.ly();
    let mut out = Spectrum::zeros(g.nk(), n);
    let mut history = Vec::new();
    let mut scale = f64::MIN_POSITIVE;
    for m in 0..g.nk() {
        let mut r = rhs.mode(m);
        if m == 0 {
            let total: Complex64 = r.iter().zip(w).map(|(z, w)| z * *w).sum();
            let c = (total - (ft[0] - fb[0])) / ly;
            r.iter_mut().for_each(|z| *z -= c);
        }
        let b = weighted_rhs(g, &r, fb[m], ft[m]);
        let mut p = b.clone();
        if m == 0 {
            p[0] = Complex64::new(0.0, 0.0);
        }
        modes.lus[m].solve_complex(&mut p);
        if m == 0 {
            let mean: Complex64 = p.iter().zip(wq).map(|(z, w)| z * *w).sum::<Complex64>() / ly;
            p.iter_mut().for_each(|z| *z -= mean);
        }
        let mut ap = vec![Complex64::new(0.0, 0.0); n];
        modes.ops[m].apply_complex(&p, &mut ap);
        scale = b.iter().map(|z| z.norm()).fold(scale, f64::max);
        let res = ap
            .iter()
            .zip(&b)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        history.push(res);
        out.set_mode(m, &p);
    }
    history.iter_mut().for_each(|r| *r /= scale);
    let worst = history.iter().cloned().fold(0.0, f64::max);
    if !(worst <= SOLVER_TOL) {
        return Err(Error::Elliptic(format!(
            "relative residual {worst:e} exceeds {SOLVER_TOL:e}; per-mode residuals {history:?}"
        )));
    }
    Ok(g.inverse(&out))
}

/// Discrete `Δp` including the flux closure, matching [`solve_neumann`].
pub fn neumann_laplacian(g: &Grid, p: &Field, bottom_flux: &[f64], top_flux: &[f64]) -> Result<Field> {
    g.check(p)?;
    let n = g.ny();
    let d2 = pointwise_d2(g, 0.0);
    let mut out = Field::zeros(g.nx(), n);
    let mut col = vec![0.0; n];
    let mut res = vec![0.0; n];
    for i in 0..g.nx() {
        for j in 0..n {
            col[j] = p.get(i, j);
        }
        d2.apply(&col, &mut res);
        res[0] -= 2.0 * bottom_flux[i] / g.spacing(0);
        res[n - 1] += 2.0 * top_flux[i] / g.spacing(n - 2);
        for j in 0..n {
            out.set(i, j, res[j]);
        }
    }
    let mut s = g.forward(&out);
    let pxx = g.forward(p);
    for m in 0..g.nk() {
        let k = g.laplace_wavenumber(m);
        for j in 0..n {
            *s.at_mut(m, j) -= pxx.at(m, j) * (k * k);
        }
    }
    Ok(g.inverse(&s))
}

#[derive(Clone, Debug)]
pub struct PressureSplit {
    pub p1: Field,
    pub p2: Field,
    pub p: Field,
}

/// `p₁` carries `∇·F` with flux `F₂(x,0)`; `p₂` is harmonic with flux `−ν₂ α ∂x u₁(x,0)`.
pub fn split_pressure(
    g: &Grid,
    f1: &Field,
    f2: &Field,
    u1: &Field,
    params: &PhysParams,
) -> Result<PressureSplit> {
    g.check(f1)?;
    g.check(f2)?;
    g.check(u1)?;
    let nx = g.nx();
    let rhs = ddx(g, f1)?.add(&ddy(g, f2)?);
    let p1 = solve_neumann(
        g,
        &NeumannProblem {
            rhs,
            bottom_flux: f2.row(0).to_vec(),
            top_flux: vec![0.0; nx],
        },
    )?;
    let a = params.wall_alpha() * params.nu2;
    let p2 = if a == 0.0 {
        Field::zeros(nx, g.ny())
    } else {
        let dxu = ddx(g, u1)?;
        solve_neumann(
            g,
            &NeumannProblem {
                rhs: Field::zeros(nx, g.ny()),
                bottom_flux: dxu.row(0).iter().map(|v| -a * v).collect(),
                top_flux: vec![0.0; nx],
            },
        )?
    };
    let p = p1.add(&p2);
    Ok(PressureSplit { p1, p2, p })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::divergence;
    use std::f64::consts::PI;

    fn grid(nx: usize, ny: usize) -> Grid {
        Grid::build(2.0 * PI, 4.0, nx, ny, 2.0, 1.0).unwrap()
    }

    #[test]
    fn weighted_d2_is_symmetric() {
        let g = grid(8, 20);
        let s = weighted_d2(&g, 0.7);
        for r in 0..20 {
            for c in 0..20 {
                assert!((s.get(r, c) - s.get(c, r)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_problem_gives_zero() {
        let g = grid(16, 24);
        let p = solve_neumann(&g, &NeumannProblem::homogeneous(Field::zeros(16, 24))).unwrap();
        assert_eq!(p.max_abs(), 0.0);
    }

    #[test]
    fn gauge_is_zero_mean() {
        let g = grid(16, 32);
        let rhs = g.sample(|x, y| x.cos() * (-y).exp() + 0.3);
        let p = solve_neumann(&g, &NeumannProblem::homogeneous(rhs)).unwrap();
        assert!(g.integrate(&p).abs() < 1e-10);
    }

    #[test]
    fn projection_properties() {
        let g = grid(16, 40);
        let u1 = g.sample(|x, y| x.sin() * (1.0 + y).recip() + (2.0 * x).cos() * (-y).exp());
        let u2 = g.sample(|x, y| x.cos() * y * (-y).exp());
        let pr = Projector::new(&g).unwrap();
        let (a, b) = pr.project(&g, &u1, &u2).unwrap();
        assert!(divergence(&g, &a, &b).unwrap().max_abs() < 1e-10);
        let (a2, b2) = pr.project(&g, &a, &b).unwrap();
        assert!(a2.max_diff(&a) < 1e-10 && b2.max_diff(&b) < 1e-10);
        let ortho = g.inner(&a, &u1.sub(&a)) + g.inner(&b, &u2.sub(&b));
        assert!(ortho.abs() < 1e-10, "{ortho}");
    }
}
