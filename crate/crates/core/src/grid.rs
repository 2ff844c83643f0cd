//! Truncated half-plane grid: periodic in `x`, boundary-clustered in `y`.
//!
//! `x` derivatives are Fourier-spectral; `y` derivatives are three-point finite
//! differences on the stretched nodes. The trapezoid weights in `y` are chosen
//! so that `W·D2` is symmetric for the second-difference operators used by the
//! solvers, which is what makes the discrete energy balance close exactly.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::fields::Field;
use crate::sbp::{apply_rows, YOps};

/// Minimum number of `y` nodes required inside `[0, eps_hint]`.
pub const LAYER_NODES: usize = 8;
/// Largest stretching parameter tried when searching for layer resolution.
pub const STRETCH_MAX: f64 = 12.0;
/// Default cap on conormal multi-index length.
pub const M_MAX: usize = 7;

/// Multi-index `(β₁, β₂)` for `Z₁^β₁ Z₂^β₂` with `Z₁ = ∂x`, `Z₂ = φ(y)∂y`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ConormalIndex {
    pub b1: usize,
    pub b2: usize,
}

impl ConormalIndex {
    pub fn new(b1: usize, b2: usize) -> Self {
        Self { b1, b2 }
    }

    pub fn order(&self) -> usize {
        self.b1 + self.b2
    }

    /// All indices with `|β| ≤ m`, ordered by `(|β|, β₂)`.
    pub fn up_to(m: usize) -> Vec<ConormalIndex> {
        let mut out = Vec::new();
        for total in 0..=m {
            for b2 in 0..=total {
                out.push(ConormalIndex::new(total - b2, b2));
            }
        }
        out
    }
}

/// Conormal weight `φ(y) = y / (y + 1)`.
pub fn phi(y: f64) -> f64 {
    y / (y + 1.0)
}

/// Row-wise Fourier coefficients of a field: `ny` rows of `nx/2 + 1` modes.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    pub nk: usize,
    pub ny: usize,
    pub data: Vec<Complex64>,
}

impl Spectrum {
    pub fn zeros(nk: usize, ny: usize) -> Self {
        Self {
            nk,
            ny,
            data: vec![Complex64::new(0.0, 0.0); nk * ny],
        }
    }

    #[inline]
    pub fn at(&self, k: usize, j: usize) -> Complex64 {
        self.data[j * self.nk + k]
    }

    #[inline]
    pub fn at_mut(&mut self, k: usize, j: usize) -> &mut Complex64 {
        &mut self.data[j * self.nk + k]
    }

    /// Column of mode `k` over all `y` nodes.
    pub fn mode(&self, k: usize) -> Vec<Complex64> {
        (0..self.ny).map(|j| self.at(k, j)).collect()
    }

    pub fn set_mode(&mut self, k: usize, col: &[Complex64]) {
        for (j, v) in col.iter().enumerate() {
            *self.at_mut(k, j) = *v;
        }
    }
}

/// First-derivative stencil: `f'(y_j) ≈ Σ c[m] f[start + m]`.
#[derive(Clone, Debug)]
pub struct Stencil {
    pub start: usize,
    pub c: Vec<f64>,
}

impl Stencil {
    #[inline]
    pub fn apply(&self, col: &[f64]) -> f64 {
        self.c
            .iter()
            .enumerate()
            .map(|(m, c)| c * col[self.start + m])
            .sum()
    }
}

/// Structured grid on `[0, Lx) × [0, Ly]`.
#[derive(Clone)]
pub struct Grid {
    lx: f64,
    ly: f64,
    nx: usize,
    ny: usize,
    stretch: f64,
    y: Vec<f64>,
    metric: Vec<f64>,
    trapezoid: Vec<f64>,
    ops: YOps,
    wavenumbers: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("lx", &self.lx)
            .field("ly", &self.ly)
            .field("nx", &self.nx)
            .field("ny", &self.ny)
            .field("stretch", &self.stretch)
            .finish()
    }
}

fn stretched_nodes(ly: f64, ny: usize, s: f64) -> (Vec<f64>, Vec<f64>) {
    let n = ny - 1;
    let mut y = Vec::with_capacity(ny);
    let mut metric = Vec::with_capacity(ny);
    for j in 0..ny {
        let xi = j as f64 / n as f64;
        if s < 1e-12 {
            y.push(ly * xi);
            metric.push(ly);
        } else {
            let t = (s * (1.0 - xi)).tanh();
            y.push(ly * (1.0 - t / s.tanh()));
            metric.push(ly * s * (1.0 - t * t) / s.tanh());
        }
    }
    y[0] = 0.0;
    y[n] = ly;
    (y, metric)
}

fn count_below(y: &[f64], bound: f64) -> usize {
    y.iter().take_while(|&&v| v <= bound).count()
}

impl Grid {
    /// Build the grid. `stretch` is the minimum clustering parameter; when
    /// `eps_hint < 1` it is raised as needed so that at least
    /// [`LAYER_NODES`] nodes lie in `[0, eps_hint]`.
    pub fn build(
        lx: f64,
        ly: f64,
        nx: usize,
        ny: usize,
        stretch: f64,
        eps_hint: f64,
    ) -> Result<Grid> {
        if nx < 8 || nx % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "Nx must be even and >= 8 (got {nx})"
            )));
        }
        if ny < 8 {
            return Err(Error::InvalidGrid(format!("Ny must be >= 8 (got {ny})")));
        }
        if !(lx > 0.0 && ly > 0.0) || !lx.is_finite() || !ly.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "domain lengths must be positive (Lx={lx}, Ly={ly})"
            )));
        }
        if !(stretch >= 0.0) || !stretch.is_finite() {
            return Err(Error::InvalidGrid(format!("stretch must be >= 0 (got {stretch})")));
        }
        if !(eps_hint > 0.0 && eps_hint <= 1.0) {
            return Err(Error::InvalidGrid(format!(
                "eps_hint must lie in (0, 1] (got {eps_hint})"
            )));
        }

        let mut s = stretch;
        if eps_hint < 1.0 {
            let ok = |s: f64| count_below(&stretched_nodes(ly, ny, s).0, eps_hint) >= LAYER_NODES;
            if !ok(s) {
                if s >= STRETCH_MAX || !ok(STRETCH_MAX) {
                    let best = count_below(&stretched_nodes(ly, ny, STRETCH_MAX.max(s)).0, eps_hint);
                    return Err(Error::Sizing(format!(
                        "Ny={ny} places at most {best} nodes in [0, {eps_hint}] \
                         (need {LAYER_NODES}, stretch <= {STRETCH_MAX}); increase Ny or eps_hint"
                    )));
                }
                let (mut lo, mut hi) = (s, STRETCH_MAX);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if ok(mid) {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                s = hi;
            }
        }

        let (y, metric) = stretched_nodes(ly, ny, s);
        for w in y.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::InvalidGrid(
                    "stretching collapsed adjacent nodes; reduce stretch".into(),
                ));
            }
        }

        let h: Vec<f64> = y.windows(2).map(|w| w[1] - w[0]).collect();
        let mut wy = vec![0.0; ny];
        for (j, hj) in h.iter().enumerate() {
            wy[j] += 0.5 * hj;
            wy[j + 1] += 0.5 * hj;
        }

        let ops = YOps::new(&y);
        let nk = nx / 2 + 1;
        let wavenumbers = (0..nk)
            .map(|k| {
                if k == nx / 2 {
                    0.0
                } else {
                    2.0 * PI * k as f64 / lx
                }
            })
            .collect();

        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(nx);
        let ifft = planner.plan_fft_inverse(nx);

        Ok(Grid {
            lx,
            ly,
            nx,
            ny,
            stretch: s,
            y,
            metric,
            trapezoid: wy,
            ops,
            wavenumbers,
            fft,
            ifft,
        })
    }

    pub fn lx(&self) -> f64 {
        self.lx
    }
    pub fn ly(&self) -> f64 {
        self.ly
    }
    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    /// Number of stored Fourier modes, `nx/2 + 1`.
    pub fn nk(&self) -> usize {
        self.nx / 2 + 1
    }
    /// Effective clustering parameter after the layer-resolution search.
    pub fn stretch(&self) -> f64 {
        self.stretch
    }
    pub fn dx(&self) -> f64 {
        self.lx / self.nx as f64
    }
    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.dx()
    }
    pub fn y_nodes(&self) -> &[f64] {
        &self.y
    }
    pub fn y(&self, j: usize) -> f64 {
        self.y[j]
    }
    /// `dy/dξ` of the stretching map at each node.
    pub fn metric(&self) -> &[f64] {
        &self.metric
    }
    /// Quadrature weights in `y`: the norm of the summation-by-parts pair.
    pub fn y_weights(&self) -> &[f64] {
        self.ops.weights()
    }
    /// Trapezoid weights, used only with the compact second differences.
    pub fn trapezoid_weights(&self) -> &[f64] {
        &self.trapezoid
    }
    pub fn spacing(&self, j: usize) -> f64 {
        self.y[j + 1] - self.y[j]
    }
    pub fn min_dy(&self) -> f64 {
        self.spacing(0)
    }
    pub fn max_dy(&self) -> f64 {
        self.spacing(self.ny - 2)
    }
    pub fn d1_stencils(&self) -> &[Stencil] {
        self.ops.stencils()
    }
    /// The `y` derivative and quadrature as one summation-by-parts pair.
    pub fn sbp(&self) -> &YOps {
        &self.ops
    }
    /// Derivative wavenumber of stored mode `k` (zero for the Nyquist mode).
    pub fn wavenumber(&self, k: usize) -> f64 {
        self.wavenumbers[k]
    }
    /// True for the modes whose `x` derivative vanishes (mean and Nyquist).
    pub fn is_flat_mode(&self, k: usize) -> bool {
        k == 0 || k == self.nx / 2
    }
    pub fn nodes_below(&self, bound: f64) -> usize {
        count_below(&self.y, bound)
    }

    pub fn check(&self, f: &Field) -> Result<()> {
        if f.nx() != self.nx || f.ny() != self.ny {
            return Err(Error::ShapeMismatch {
                expected: (self.nx, self.ny),
                got: (f.nx(), f.ny()),
            });
        }
        Ok(())
    }

    /// Sample `f(x, y)` at every node.
    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> Field {
        let mut out = Field::zeros(self.nx, self.ny);
        for j in 0..self.ny {
            let y = self.y[j];
            for i in 0..self.nx {
                out.set(i, j, f(self.x(i), y));
            }
        }
        out
    }

    /// Row-wise forward transform.
    pub fn forward(&self, f: &Field) -> Spectrum {
        let nk = self.nk();
        let mut out = Spectrum::zeros(nk, self.ny);
        let mut buf = vec![Complex64::new(0.0, 0.0); self.nx];
        for j in 0..self.ny {
            for (b, v) in buf.iter_mut().zip(f.row(j)) {
                *b = Complex64::new(*v, 0.0);
            }
            self.fft.process(&mut buf);
            out.data[j * nk..(j + 1) * nk].copy_from_slice(&buf[..nk]);
        }
        out
    }

    /// Row-wise inverse transform (the Nyquist coefficient is taken as real).
    pub fn inverse(&self, s: &Spectrum) -> Field {
        let nk = self.nk();
        let nx = self.nx;
        let mut out = Field::zeros(nx, self.ny);
        let mut buf = vec![Complex64::new(0.0, 0.0); nx];
        let scale = 1.0 / nx as f64;
        for j in 0..self.ny {
            let row = &s.data[j * nk..(j + 1) * nk];
            buf[0] = Complex64::new(row[0].re, 0.0);
            for k in 1..nk - 1 {
                buf[k] = row[k];
                buf[nx - k] = row[k].conj();
            }
            buf[nx / 2] = Complex64::new(row[nk - 1].re, 0.0);
            self.ifft.process(&mut buf);
            for (o, b) in out.row_mut(j).iter_mut().zip(&buf) {
                *o = b.re * scale;
            }
        }
        out
    }

    /// Forward transform of a single row of `nx` samples.
    pub fn forward_row(&self, row: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = row.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fft.process(&mut buf);
        buf.truncate(self.nk());
        buf
    }

    /// Wavenumber of mode `k` as seen by the Laplacian (the Nyquist mode keeps `π Nx / Lx`).
    pub fn laplace_wavenumber(&self, k: usize) -> f64 {
        2.0 * PI * k as f64 / self.lx
    }

    /// Spectral `∂x^order` in coefficient space.
    pub fn dx_spectrum(&self, s: &Spectrum, order: usize) -> Spectrum {
        let mut out = s.clone();
        if order == 0 {
            return out;
        }
        for k in 0..s.nk {
            let ik = Complex64::new(0.0, self.wavenumber(k)).powu(order as u32);
            for j in 0..s.ny {
                *out.at_mut(k, j) *= ik;
            }
        }
        out
    }

    /// Apply the first-derivative stencil to one column of values.
    pub fn d1_apply<T>(&self, col: &[T], out: &mut [T])
    where
        T: Copy + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T>,
    {
        for (j, st) in self.ops.stencils().iter().enumerate() {
            let s = st.start;
            let mut acc = col[s] * st.c[0];
            for (m, c) in st.c.iter().enumerate().skip(1) {
                acc = acc + col[s + m] * *c;
            }
            out[j] = acc;
        }
    }

    /// Weighted integral `∫∫ f dx dy`.
    pub fn integrate(&self, f: &Field) -> f64 {
        let dx = self.dx();
        (0..self.ny)
            .map(|j| self.ops.weights()[j] * f.row(j).iter().sum::<f64>())
            .sum::<f64>()
            * dx
    }

    /// Weighted inner product `∫∫ f g dx dy`.
    pub fn inner(&self, f: &Field, g: &Field) -> f64 {
        let dx = self.dx();
        (0..self.ny)
            .map(|j| {
                self.ops.weights()[j]
                    * f.row(j)
                        .iter()
                        .zip(g.row(j))
                        .map(|(a, b)| a * b)
                        .sum::<f64>()
            })
            .sum::<f64>()
            * dx
    }

    pub fn l2(&self, f: &Field) -> f64 {
        self.inner(f, f).max(0.0).sqrt()
    }

    /// Boundary integral `∫ f(x, 0) dx`.
    pub fn integrate_wall(&self, f: &Field) -> f64 {
        f.row(0).iter().sum::<f64>() * self.dx()
    }
}

/// Spectral `x` derivative.
pub fn ddx(g: &Grid, f: &Field) -> Result<Field> {
    g.check(f)?;
    Ok(g.inverse(&g.dx_spectrum(&g.forward(f), 1)))
}

/// `∂x^order` applied spectrally.
pub fn ddx_n(g: &Grid, f: &Field, order: usize) -> Result<Field> {
    g.check(f)?;
    if order == 0 {
        return Ok(f.clone());
    }
    Ok(g.inverse(&g.dx_spectrum(&g.forward(f), order)))
}

/// Summation-by-parts `y` derivative: fourth order inside, second order at the walls.
pub fn ddy(g: &Grid, f: &Field) -> Result<Field> {
    g.check(f)?;
    Ok(apply_rows(g.ops.stencils(), f))
}

/// `Z₂ = φ(y)∂y`.
pub fn z2(g: &Grid, f: &Field) -> Result<Field> {
    let mut out = ddy(g, f)?;
    for j in 0..g.ny {
        let p = phi(g.y[j]);
        out.row_mut(j).iter_mut().for_each(|v| *v *= p);
    }
    Ok(out)
}

/// `Z^β f = Z₁^β₁ Z₂^β₂ f` with `m_max` as the cap on `|β|`.
pub fn conormal_apply_capped(
    g: &Grid,
    f: &Field,
    beta: ConormalIndex,
    m_max: usize,
) -> Result<Field> {
    if beta.order() > m_max {
        return Err(Error::OrderCap {
            order: beta.order(),
            cap: m_max,
        });
    }
    g.check(f)?;
    let mut cur = f.clone();
    for _ in 0..beta.b2 {
        cur = z2(g, &cur)?;
    }
    ddx_n(g, &cur, beta.b1)
}

/// `Z^β f` with the default cap [`M_MAX`].
pub fn conormal_apply(g: &Grid, f: &Field, beta: ConormalIndex) -> Result<Field> {
    conormal_apply_capped(g, f, beta, M_MAX)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(nx: usize, ny: usize, s: f64) -> Grid {
        Grid::build(2.0 * PI, 10.0, nx, ny, s, 1.0).unwrap()
    }

    #[test]
    fn uniform_when_unstretched() {
        let g = grid(64, 64, 0.0);
        for j in 0..63 {
            assert!((g.spacing(j) - 10.0 / 63.0).abs() < 1e-12);
        }
        assert_eq!(g.y(0), 0.0);
        assert_eq!(g.y(63), 10.0);
    }

    #[test]
    fn layer_search_places_eight_nodes() {
        let g = Grid::build(2.0 * PI, 10.0, 64, 128, 2.0, 0.05).unwrap();
        // Direct enumeration of the nodes.
        let n = g.y_nodes().iter().filter(|&&y| y <= 0.05).count();
        assert!(n >= 8, "{n} nodes below 0.05");
        assert!(g.stretch() >= 2.0);
    }

    #[test]
    fn layer_unreachable_is_a_sizing_error() {
        let err = Grid::build(2.0 * PI, 10.0, 64, 8, 0.0, 0.001).unwrap_err();
        assert!(matches!(err, Error::Sizing(_)), "{err}");
    }

    #[test]
    fn rejects_odd_nx() {
        assert!(matches!(
            Grid::build(1.0, 1.0, 63, 16, 0.0, 1.0),
            Err(Error::InvalidGrid(_))
        ));
    }

    #[test]
    fn spacing_monotone_under_stretch() {
        let g = grid(16, 64, 3.0);
        assert!(g.min_dy() < 10.0 / 63.0);
        assert!(g.max_dy() > 10.0 / 63.0);
        let h: Vec<f64> = (0..63).map(|j| g.spacing(j)).collect();
        assert!(h.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn quadrature_exactness() {
        let g = grid(32, 40, 2.5);
        let one = g.sample(|_, _| 1.0);
        assert!((g.integrate(&one) - 2.0 * PI * 10.0).abs() < 1e-12);
        let f = g.sample(|x, y| x.sin() * (1.0 + y * y).ln());
        assert!(g.integrate(&f).abs() < 1e-12);
        assert!(g.y_weights().iter().all(|&w| w > 0.0));
    }

    #[test]
    fn ddx_spectral() {
        let g = grid(64, 16, 1.0);
        let f = g.sample(|x, _| x.sin());
        let d = ddx(&g, &f).unwrap();
        let exact = g.sample(|x, _| x.cos());
        assert!(d.max_diff(&exact) < 1e-12);

        let f = g.sample(|x, y| (7.0 * x).sin() * y);
        let d = ddx(&g, &f).unwrap();
        let exact = g.sample(|x, y| 7.0 * (7.0 * x).cos() * y);
        assert!(d.max_diff(&exact) < 1e-12 * 10.0 * 7.0);

        let c = g.sample(|_, _| 3.5);
        assert_eq!(ddx(&g, &c).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn ddy_exact_for_quadratics_and_constants() {
        let g = grid(8, 33, 2.0);
        let c = g.sample(|_, _| -2.0);
        assert_eq!(ddy(&g, &c).unwrap().max_abs(), 0.0);
        // the wall rows reproduce quadratics on uniform nodes; on stretched
        // nodes the rate is checked on smooth data below
        let g = grid(8, 33, 0.0);
        let f = g.sample(|_, y| y * y);
        let exact = g.sample(|_, y| 2.0 * y);
        assert!(ddy(&g, &f).unwrap().max_diff(&exact) < 1e-9);
    }

    #[test]
    fn ddy_second_order() {
        let err = |ny: usize, f: fn(f64) -> f64, df: fn(f64) -> f64| {
            let g = grid(8, ny, 2.0);
            let d = ddy(&g, &g.sample(|_, y| f(y))).unwrap();
            d.max_diff(&g.sample(|_, y| df(y)))
        };
        for (f, df) in [
            ((|y: f64| (-y).exp()) as fn(f64) -> f64, (|y: f64| -(-y).exp()) as fn(f64) -> f64),
            (|y: f64| (0.3 * y).sin() * y, |y: f64| 0.3 * (0.3 * y).cos() * y + (0.3 * y).sin()),
        ] {
            let e1 = err(129, f, df);
            let e2 = err(257, f, df);
            let e3 = err(513, f, df);
            let (r1, r2) = (e1 / e2, e2 / e3);
            assert!(r1 > 3.5 && r2 > 3.5, "ratios {r1} {r2}");
        }
    }

    #[test]
    fn conormal_examples() {
        let g = grid(32, 65, 2.0);
        let f = g.sample(|_, y| (y - 1.0).powi(3) + 2.0);
        let z = conormal_apply(&g, &f, ConormalIndex::new(0, 1)).unwrap();
        assert!(z.row(0).iter().all(|&v| v == 0.0));

        let f = g.sample(|_, y| y);
        let z = conormal_apply(&g, &f, ConormalIndex::new(0, 1)).unwrap();
        assert!(z.max_diff(&g.sample(|_, y| y / (1.0 + y))) < 1e-12);

        let f = g.sample(|x, _| x.sin());
        let z = conormal_apply(&g, &f, ConormalIndex::new(2, 0)).unwrap();
        assert!(z.max_diff(&g.sample(|x, _| -x.sin())) < 1e-12);

        assert!(matches!(
            conormal_apply(&g, &f, ConormalIndex::new(5, 3)),
            Err(Error::OrderCap { .. })
        ));
    }

    #[test]
    fn conormal_commutes() {
        let g = grid(32, 65, 2.0);
        let f = g.sample(|x, y| (x + 0.3).cos() * (-y * y).exp() + (2.0 * x).sin() * y / (1.0 + y));
        let a = conormal_apply(&g, &f, ConormalIndex::new(1, 1)).unwrap();
        let b = ddx(&g, &z2(&g, &f).unwrap()).unwrap();
        let c = z2(&g, &ddx(&g, &f).unwrap()).unwrap();
        assert!(a.max_diff(&b) < 1e-10);
        assert!(a.max_diff(&c) < 1e-10);
    }

    #[test]
    fn wall_row_annihilated_by_z2() {
        let g = grid(16, 40, 3.0);
        let f = g.sample(|x, y| (x * 3.0).cos() + (y * 5.0).exp().ln_1p());
        for b2 in 1..4 {
            let z = conormal_apply(&g, &f, ConormalIndex::new(1, b2)).unwrap();
            assert!(z.row(0).iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn forward_inverse_roundtrip() {
        let g = grid(16, 9, 0.5);
        let f = g.sample(|x, y| (x * 2.0).sin() + y * (x).cos() + 0.25);
        let back = g.inverse(&g.forward(&f));
        assert!(back.max_diff(&f) < 1e-13);
    }
}
