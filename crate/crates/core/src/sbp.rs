//! Summation-by-parts operators in `y` used by the time steppers.
//!
//! `D` is the diagonal-norm fourth-order interior, second-order boundary
//! first-derivative operator, mapped to the stretched nodes through the
//! discrete metric `y_ξ = D_ξ y`. With `W = H y_ξ` the identity
//! `W D + (W D)ᵀ = diag(−1, 0, …, 0, 1)` holds exactly, so the `W`-adjoint of
//! the discrete divergence is a consistent gradient up to the walls.

use crate::banded::Sparse;
use crate::fields::Field;
use crate::grid::Stencil;

const H_BLOCK: [f64; 4] = [17.0 / 48.0, 59.0 / 48.0, 43.0 / 48.0, 49.0 / 48.0];
const INTERIOR: [f64; 5] = [1.0 / 12.0, -2.0 / 3.0, 0.0, 2.0 / 3.0, -1.0 / 12.0];

fn boundary_rows() -> [Vec<f64>; 4] {
    [
        vec![-24.0 / 17.0, 59.0 / 34.0, -4.0 / 17.0, -3.0 / 34.0],
        vec![-0.5, 0.0, 0.5],
        vec![4.0 / 43.0, -59.0 / 86.0, 0.0, 59.0 / 86.0, -4.0 / 43.0],
        vec![3.0 / 98.0, 0.0, -59.0 / 98.0, 0.0, 32.0 / 49.0, -4.0 / 49.0],
    ]
}

/// Index-space operator `D_ξ` (unit spacing) for `n >= 8` nodes.
fn index_stencils(n: usize) -> Vec<Stencil> {
    assert!(n >= 8, "SBP operator needs at least 8 nodes");
    let rows = boundary_rows();
    let mut d = Vec::with_capacity(n);
    for r in &rows {
        d.push(Stencil {
            start: 0,
            c: r.clone(),
        });
    }
    for j in 4..n - 4 {
        d.push(Stencil {
            start: j - 2,
            c: INTERIOR.to_vec(),
        });
    }
    for b in (0..4).rev() {
        let r = &rows[b];
        let mut c: Vec<f64> = r.iter().map(|v| -v).collect();
        c.reverse();
        d.push(Stencil {
            start: n - r.len(),
            c,
        });
    }
    d
}

/// Derivative rows applied as `Σ c_m (f_m − f_j)`, so constants map to zero exactly.
pub(crate) fn apply_rows(st: &[Stencil], f: &Field) -> Field {
    let nx = f.nx();
    let mut out = Field::zeros(nx, f.ny());
    for (j, s) in st.iter().enumerate() {
        let mut acc = vec![0.0; nx];
        for (m, c) in s.c.iter().enumerate() {
            let node = s.start + m;
            if node == j || *c == 0.0 {
                continue;
            }
            let (r, own) = (f.row(node), f.row(j));
            for i in 0..nx {
                acc[i] += c * (r[i] - own[i]);
            }
        }
        out.row_mut(j).copy_from_slice(&acc);
    }
    out
}

fn apply_col(st: &Stencil, j: usize, col: &[f64]) -> f64 {
    st.c
        .iter()
        .enumerate()
        .map(|(m, c)| c * (col[st.start + m] - col[j]))
        .sum()
}

/// SBP pair `(D, W)` on a set of nodes.
#[derive(Clone, Debug)]
pub struct YOps {
    d: Vec<Stencil>,
    w: Vec<f64>,
}

impl YOps {
    pub fn new(y: &[f64]) -> Self {
        let n = y.len();
        let dxi = index_stencils(n);
        let metric: Vec<f64> = dxi.iter().enumerate().map(|(j, s)| apply_col(s, j, y)).collect();
        let d = dxi
            .iter()
            .zip(&metric)
            .map(|(s, m)| Stencil {
                start: s.start,
                c: s.c.iter().map(|c| c / m).collect(),
            })
            .collect();
        let w = (0..n)
            .map(|j| {
                let h = if j < 4 {
                    H_BLOCK[j]
                } else if j >= n - 4 {
                    H_BLOCK[n - 1 - j]
                } else {
                    1.0
                };
                h * metric[j]
            })
            .collect();
        Self { d, w }
    }

    pub fn stencils(&self) -> &[Stencil] {
        &self.d
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn dy(&self, f: &Field) -> Field {
        apply_rows(&self.d, f)
    }

    /// `D` as a sparse `n × n` matrix.
    pub fn matrix(&self) -> Sparse {
        let n = self.d.len();
        let mut m = Sparse::new(n, n);
        for (j, s) in self.d.iter().enumerate() {
            for (k, c) in s.c.iter().enumerate() {
                if *c != 0.0 {
                    m.add(j, s.start + k, *c);
                }
            }
        }
        m
    }

    /// Weighted viscous form `S = −DᵀWD − a_w e₀e₀ᵀ`: the Navier relation
    /// `∂y f = a_w f` enters weakly at the wall, `∂y f = 0` at the top.
    pub fn weighted_d2(&self, wall_alpha: f64) -> Sparse {
        let d = self.matrix();
        let mut wd = Sparse::new(d.rows, d.cols);
        for r in 0..d.rows {
            for &(c, v) in d.row(r) {
                wd.add(r, c, v * self.w[r]);
            }
        }
        let mut s = d.transpose().mul(&wd).scaled(-1.0);
        if wall_alpha != 0.0 {
            s.add(0, 0, -wall_alpha);
        }
        s
    }

    /// `W⁻¹ S`.
    pub fn pointwise_d2(&self, wall_alpha: f64) -> Sparse {
        let s = self.weighted_d2(wall_alpha);
        let mut out = Sparse::new(s.rows, s.cols);
        for r in 0..s.rows {
            for &(c, v) in s.row(r) {
                out.add(r, c, v / self.w[r]);
            }
        }
        out
    }

    /// `∫∫ f g` with `W` in `y` and spacing `dx` in `x`.
    pub fn inner(&self, dx: f64, f: &Field, g: &Field) -> f64 {
        (0..self.w.len())
            .map(|j| {
                self.w[j]
                    * f.row(j)
                        .iter()
                        .zip(g.row(j))
                        .map(|(a, b)| a * b)
                        .sum::<f64>()
            })
            .sum::<f64>()
            * dx
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nodes(n: usize, s: f64) -> Vec<f64> {
        (0..n)
            .map(|j| {
                let xi = j as f64 / (n - 1) as f64;
                8.0 * (1.0 - (s * (1.0 - xi)).tanh() / s.tanh())
            })
            .collect()
    }

    #[test]
    fn summation_by_parts_holds() {
        for n in [8, 9, 12, 40] {
            let ops = YOps::new(&nodes(n, 2.0));
            let d = ops.matrix();
            let mut q = vec![vec![0.0; n]; n];
            for r in 0..n {
                for &(c, v) in d.row(r) {
                    q[r][c] += ops.w[r] * v;
                }
            }
            for a in 0..n {
                for b in 0..n {
                    let mut want = 0.0;
                    if a == b && a == 0 {
                        want = -1.0;
                    }
                    if a == b && a == n - 1 {
                        want = 1.0;
                    }
                    assert!((q[a][b] + q[b][a] - want).abs() < 1e-12, "n={n} ({a},{b})");
                }
            }
        }
    }

    #[test]
    fn weights_integrate_length() {
        let ops = YOps::new(&nodes(33, 2.5));
        assert!((ops.w.iter().sum::<f64>() - 8.0).abs() < 1e-12);
        assert!(ops.w.iter().all(|w| *w > 0.0));
    }

    #[test]
    fn derivative_is_second_order_at_walls() {
        let err = |n: usize| {
            let y = nodes(n, 2.0);
            let ops = YOps::new(&y);
            let f = Field::from_vec(1, n, y.iter().map(|v| (0.7 * v).sin()).collect()).unwrap();
            let d = ops.dy(&f);
            (0..n)
                .map(|j| (d.get(0, j) - 0.7 * (0.7 * y[j]).cos()).abs())
                .fold(0.0, f64::max)
        };
        let r = err(64) / err(128);
        assert!(r > 3.5, "ratio {r}");
    }

    #[test]
    fn viscous_form_is_symmetric_and_consistent() {
        let y = nodes(200, 2.0);
        let ops = YOps::new(&y);
        let s = ops.weighted_d2(1.5);
        for r in 0..s.rows {
            for c in 0..s.cols {
                assert!((s.get(r, c) - s.get(c, r)).abs() < 1e-9);
            }
        }
        // f = e^{-y}(1 + a y) with f' − a f = −(1 + a y)e^{-y} + ... chosen so f'(0) = 1.5 f(0)
        let a = 1.5;
        let f: Vec<f64> = y.iter().map(|v| (-v).exp() * (1.0 + (a + 1.0) * v)).collect();
        let l = ops.pointwise_d2(a);
        let mut out = vec![0.0; y.len()];
        l.apply(&f, &mut out);
        for j in 5..y.len() - 5 {
            let exact = (-y[j]).exp() * ((a + 1.0) * y[j] - 2.0 * (a + 1.0) + 1.0);
            assert!((out[j] - exact).abs() < 1e-2, "row {j}");
        }
    }
}
