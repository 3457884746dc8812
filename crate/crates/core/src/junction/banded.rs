//! Symmetric positive-definite banded matrix with in-place Cholesky.

use crate::error::{Error, Result};

pub(crate) struct BandedSpd {
    n: usize,
    bw: usize,
    /// Row `p` holds entries (p, p−bw) ..= (p, p).
    data: Vec<f64>,
}

impl BandedSpd {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self {
            n,
            bw,
            data: vec![0.0; n * (bw + 1)],
        }
    }

    #[inline]
    fn slot(&self, row: usize, col: usize) -> usize {
        debug_assert!(col <= row && row - col <= self.bw);
        row * (self.bw + 1) + self.bw - (row - col)
    }

    /// Adds to entry (row, col) of the lower triangle (`col ≤ row`).
    #[inline]
    pub fn add(&mut self, row: usize, col: usize, v: f64) {
        let s = self.slot(row, col);
        self.data[s] += v;
    }

    pub fn copy_from(&mut self, other: &BandedSpd) {
        self.data.copy_from_slice(&other.data);
    }

    pub fn factorize(&mut self) -> Result<()> {
        let (n, bw) = (self.n, self.bw);
        let w = bw + 1;
        for p in 0..n {
            let j0 = p.saturating_sub(bw);
            for j in j0..=p {
                let k0 = j0.max(j.saturating_sub(bw));
                let mut s = self.data[p * w + bw - (p - j)];
                if j > k0 {
                    let rp = &self.data[p * w + bw - (p - k0)..p * w + bw - (p - j)];
                    let rj = &self.data[j * w + bw - (j - k0)..j * w + bw];
                    s -= rp.iter().zip(rj).map(|(a, b)| a * b).sum::<f64>();
                }
                if j == p {
                    if !(s > 0.0 && s.is_finite()) {
                        return Err(Error::Numerical(format!(
                            "banded Cholesky: non-positive pivot {s:e} at row {p}"
                        )));
                    }
                    self.data[p * w + bw] = s.sqrt();
                } else {
                    self.data[p * w + bw - (p - j)] = s / self.data[j * w + bw];
                }
            }
        }
        Ok(())
    }

    /// Solves (L Lᵀ) x = b in place after [`factorize`](Self::factorize).
    pub fn solve(&self, b: &mut [f64]) {
        let (n, bw) = (self.n, self.bw);
        let w = bw + 1;
        for p in 0..n {
            let j0 = p.saturating_sub(bw);
            let row = &self.data[p * w + bw - (p - j0)..p * w + bw];
            let s: f64 = row.iter().zip(&b[j0..p]).map(|(l, x)| l * x).sum();
            b[p] = (b[p] - s) / self.data[p * w + bw];
        }
        for p in (0..n).rev() {
            b[p] /= self.data[p * w + bw];
            let bp = b[p];
            let j0 = p.saturating_sub(bw);
            for j in j0..p {
                b[j] -= self.data[p * w + bw - (p - j)] * bp;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    #[test]
    fn matches_dense_solve() {
        let n = 12;
        let bw = 3;
        let mut dense = DMatrix::<f64>::zeros(n, n);
        let mut band = BandedSpd::zeros(n, bw);
        for p in 0..n {
            for j in p.saturating_sub(bw)..p {
                let v = -0.3 - 0.01 * (p + j) as f64;
                dense[(p, j)] = v;
                dense[(j, p)] = v;
                band.add(p, j, v);
            }
            dense[(p, p)] = 4.0 + p as f64 * 0.1;
            band.add(p, p, 4.0 + p as f64 * 0.1);
        }
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let expected = dense
            .clone()
            .lu()
            .solve(&nalgebra::DVector::from_vec(rhs.clone()))
            .unwrap();
        band.factorize().unwrap();
        let mut x = rhs;
        band.solve(&mut x);
        for i in 0..n {
            assert!((x[i] - expected[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn indefinite_is_rejected() {
        let mut band = BandedSpd::zeros(2, 1);
        band.add(0, 0, 1.0);
        band.add(1, 0, 2.0);
        band.add(1, 1, 1.0);
        assert!(band.factorize().is_err());
    }
}
