//! Small sparse and banded linear algebra for the per-mode `y` systems.

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};

/// Row-list sparse matrix used to assemble operator products.
#[derive(Clone, Debug, Default)]
pub struct Sparse {
    pub rows: usize,
    pub cols: usize,
    entries: Vec<Vec<(usize, f64)>>,
}

impl Sparse {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            entries: vec![Vec::new(); rows],
        }
    }

    pub fn add(&mut self, r: usize, c: usize, v: f64) {
        debug_assert!(r < self.rows && c < self.cols);
        if v == 0.0 {
            return;
        }
        let row = &mut self.entries[r];
        match row.iter_mut().find(|(cc, _)| *cc == c) {
            Some((_, x)) => *x += v,
            None => row.push((c, v)),
        }
    }

    pub fn row(&self, r: usize) -> &[(usize, f64)] {
        &self.entries[r]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.entries[r]
            .iter()
            .find(|(cc, _)| *cc == c)
            .map_or(0.0, |(_, v)| *v)
    }

    pub fn transpose(&self) -> Sparse {
        let mut t = Sparse::new(self.cols, self.rows);
        for (r, row) in self.entries.iter().enumerate() {
            for &(c, v) in row {
                t.add(c, r, v);
            }
        }
        t
    }

    pub fn mul(&self, other: &Sparse) -> Sparse {
        assert_eq!(self.cols, other.rows);
        let mut out = Sparse::new(self.rows, other.cols);
        for (r, row) in self.entries.iter().enumerate() {
            for &(m, a) in row {
                for &(c, b) in other.row(m) {
                    out.add(r, c, a * b);
                }
            }
        }
        out
    }

    pub fn scaled(&self, s: f64) -> Sparse {
        let mut out = self.clone();
        for row in &mut out.entries {
            for e in row.iter_mut() {
                e.1 *= s;
            }
        }
        out
    }

    pub fn plus(&self, other: &Sparse) -> Sparse {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (r, row) in other.entries.iter().enumerate() {
            for &(c, v) in row {
                out.add(r, c, v);
            }
        }
        out
    }

    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (r, row) in self.entries.iter().enumerate() {
            y[r] = row.iter().map(|&(c, v)| v * x[c]).sum();
        }
    }

    pub fn apply_complex(&self, x: &[Complex64], y: &mut [Complex64]) {
        for (r, row) in self.entries.iter().enumerate() {
            y[r] = row.iter().map(|&(c, v)| x[c] * v).sum();
        }
    }

    /// Largest `|r - c|` over stored entries, split into (lower, upper).
    pub fn bandwidths(&self) -> (usize, usize) {
        let (mut kl, mut ku) = (0, 0);
        for (r, row) in self.entries.iter().enumerate() {
            for &(c, _) in row {
                if c < r {
                    kl = kl.max(r - c);
                } else {
                    ku = ku.max(c - r);
                }
            }
        }
        (kl, ku)
    }

    pub fn to_banded(&self) -> Banded {
        assert_eq!(self.rows, self.cols);
        let (kl, ku) = self.bandwidths();
        let mut b = Banded::zeros(self.rows, kl, ku);
        for (r, row) in self.entries.iter().enumerate() {
            for &(c, v) in row {
                b.add(r, c, v);
            }
        }
        b
    }

    pub fn identity(n: usize) -> Sparse {
        let mut s = Sparse::new(n, n);
        for i in 0..n {
            s.add(i, i, 1.0);
        }
        s
    }
}

/// Square banded matrix with `kl` sub- and `ku` super-diagonals.
#[derive(Clone, Debug)]
pub struct Banded {
    n: usize,
    kl: usize,
    ku: usize,
    // row r, column c stored at r * width + (c + kl - r)
    data: Vec<f64>,
}

impl Banded {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        Self {
            n,
            kl,
            ku,
            data: vec![0.0; n * (kl + ku + 1)],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn width(&self) -> usize {
        self.kl + self.ku + 1
    }

    fn in_band(&self, r: usize, c: usize) -> bool {
        c + self.kl >= r && c <= r + self.ku
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        if self.in_band(r, c) {
            self.data[r * self.width() + c + self.kl - r]
        } else {
            0.0
        }
    }

    pub fn add(&mut self, r: usize, c: usize, v: f64) {
        assert!(self.in_band(r, c), "entry ({r},{c}) outside band");
        let w = self.width();
        self.data[r * w + c + self.kl - r] += v;
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        assert!(self.in_band(r, c), "entry ({r},{c}) outside band");
        let w = self.width();
        self.data[r * w + c + self.kl - r] = v;
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for r in 0..self.n {
            let lo = r.saturating_sub(self.kl);
            let hi = (r + self.ku).min(self.n - 1);
            y[r] = (lo..=hi).map(|c| self.get(r, c) * x[c]).sum();
        }
    }

    /// LU factorisation without pivoting. Fails on a vanishing pivot.
    pub fn factor(mut self) -> Result<BandedLu> {
        let n = self.n;
        let scale = self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !scale.is_finite() {
            return Err(Error::Implicit("non-finite matrix entries".into()));
        }
        let tiny = 1e-14 * scale.max(f64::MIN_POSITIVE);
        for k in 0..n {
            let piv = self.get(k, k);
            if !(piv.abs() > tiny) {
                return Err(Error::Implicit(format!(
                    "pivot {piv:e} at row {k} below {tiny:e}"
                )));
            }
            let rmax = (k + self.kl).min(n - 1);
            let cmax = (k + self.ku).min(n - 1);
            for r in k + 1..=rmax {
                let l = self.get(r, k) / piv;
                self.set(r, k, l);
                for c in k + 1..=cmax {
                    let v = self.get(r, c) - l * self.get(k, c);
                    self.set(r, c, v);
                }
            }
        }
        Ok(BandedLu { lu: self })
    }
}

#[derive(Clone, Debug)]
pub struct BandedLu {
    lu: Banded,
}

impl BandedLu {
    pub fn n(&self) -> usize {
        self.lu.n
    }

    pub fn solve(&self, b: &mut [f64]) {
        let a = &self.lu;
        let n = a.n;
        for r in 0..n {
            let lo = r.saturating_sub(a.kl);
            let s: f64 = (lo..r).map(|c| a.get(r, c) * b[c]).sum();
            b[r] -= s;
        }
        for r in (0..n).rev() {
            let hi = (r + a.ku).min(n - 1);
            let s: f64 = (r + 1..=hi).map(|c| a.get(r, c) * b[c]).sum();
            b[r] = (b[r] - s) / a.get(r, r);
        }
    }

    /// Solve with a complex right-hand side (real matrix).
    pub fn solve_complex(&self, b: &mut [Complex64]) {
        let mut re: Vec<f64> = b.iter().map(|z| z.re).collect();
        let mut im: Vec<f64> = b.iter().map(|z| z.im).collect();
        self.solve(&mut re);
        self.solve(&mut im);
        for (z, (r, i)) in b.iter_mut().zip(re.into_iter().zip(im)) {
            *z = Complex64::new(r, i);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn banded_solve_matches_dense_product() {
        let n = 12;
        let mut s = Sparse::new(n, n);
        for i in 0..n {
            s.add(i, i, 6.0 + i as f64 * 0.1);
            if i + 1 < n {
                s.add(i, i + 1, -1.0);
                s.add(i + 1, i, -1.5);
            }
            if i + 2 < n {
                s.add(i, i + 2, 0.5);
            }
        }
        let x: Vec<f64> = (0..n).map(|i| (i as f64).sin() + 0.3).collect();
        let mut b = vec![0.0; n];
        s.apply(&x, &mut b);
        let lu = s.to_banded().factor().unwrap();
        lu.solve(&mut b);
        for (u, v) in b.iter().zip(&x) {
            assert!((u - v).abs() < 1e-13);
        }
    }

    #[test]
    fn zero_pivot_reported() {
        let b = Banded::zeros(3, 1, 1);
        assert!(matches!(b.factor(), Err(Error::Implicit(_))));
    }

    #[test]
    fn sparse_products() {
        let mut a = Sparse::new(2, 3);
        a.add(0, 0, 1.0);
        a.add(0, 2, 2.0);
        a.add(1, 1, 3.0);
        let ata = a.transpose().mul(&a);
        assert_eq!(ata.get(0, 0), 1.0);
        assert_eq!(ata.get(0, 2), 2.0);
        assert_eq!(ata.get(2, 2), 4.0);
        assert_eq!(ata.get(1, 1), 9.0);
        assert_eq!(ata.bandwidths(), (2, 2));
    }
}
