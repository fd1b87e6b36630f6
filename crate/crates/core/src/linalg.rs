//! Banded symmetric factorization and a block inverse-iteration eigensolver
//! for the small-bandwidth systems produced by the mode discretization.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;

use crate::error::{Error, Result};
use crate::exec;
use crate::numerics::rng_for;

/// Symmetric matrix in lower band storage: entry `(i, j)` with
/// `i − bw ≤ j ≤ i` lives at `data[i * (bw + 1) + (i − j)]`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct BandMatrix {
    pub n: usize,
    pub bw: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self {
            n,
            bw,
            data: vec![0.0; n * (bw + 1)],
        }
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.bw);
        i * (self.bw + 1) + (i - j)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j > self.bw {
            0.0
        } else {
            self.data[self.idx(i, j)]
        }
    }

    /// Adds `v` at `(i, j)` and, implicitly, `(j, i)`.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let lo = i.saturating_sub(self.bw);
            for j in lo..=i {
                let a = self.data[self.idx(i, j)];
                y[i] += a * x[j];
                if j != i {
                    y[j] += a * x[i];
                }
            }
        }
        y
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    /// Cholesky factor `L` with `A = L Lᵀ`, in the same band layout.
    pub fn cholesky(&self) -> Result<BandCholesky> {
        let (n, bw) = (self.n, self.bw);
        let mut l = self.clone();
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            for j in lo..=i {
                let mut sum = self.data[self.idx(i, j)];
                let kl = lo.max(j.saturating_sub(bw));
                for k in kl..j {
                    sum -= l.data[l.idx(i, k)] * l.data[l.idx(j, k)];
                }
                let at = l.idx(i, j);
                if i == j {
                    if !(sum > 0.0) {
                        return Err(Error::Eigensolver(format!(
                            "matrix is not positive definite (pivot {sum:e} at row {i})"
                        )));
                    }
                    l.data[at] = sum.sqrt();
                } else {
                    l.data[at] = sum / l.data[l.idx(j, j)];
                }
            }
        }
        Ok(BandCholesky { l })
    }
}

#[derive(Debug, Clone)]
pub(crate) struct BandCholesky {
    l: BandMatrix,
}

impl BandCholesky {
    #[allow(clippy::needless_range_loop)]
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let l = &self.l;
        let (n, bw) = (l.n, l.bw);
        let mut y = b.to_vec();
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let mut sum = y[i];
            for k in lo..i {
                sum -= l.data[l.idx(i, k)] * y[k];
            }
            y[i] = sum / l.data[l.idx(i, i)];
        }
        for i in (0..n).rev() {
            let hi = (i + bw).min(n - 1);
            let mut sum = y[i];
            for k in i + 1..=hi {
                sum -= l.data[l.idx(k, i)] * y[k];
            }
            y[i] = sum / l.data[l.idx(i, i)];
        }
        y
    }
}

const MAX_ITERATIONS: usize = 2000;

/// Assembles an `n × k` matrix from independently computed columns.
fn columns<F>(n: usize, k: usize, f: F) -> DMatrix<f64>
where
    F: Fn(usize) -> Vec<f64> + Sync + Send,
{
    let cols = exec::map_indexed(k, f);
    DMatrix::from_fn(n, k, |r, c| cols[c][r])
}

/// Lowest `count` eigenpairs of a symmetric positive semidefinite band
/// matrix, by block inverse iteration with shift `−shift` and Rayleigh–Ritz.
/// Returns ascending eigenvalues and the corresponding unit eigenvectors.
pub(crate) fn lowest_eigenpairs(
    a: &BandMatrix,
    count: usize,
    shift: f64,
    tol: f64,
    seed: u64,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = a.n;
    if count == 0 || count > n {
        return Err(Error::Eigensolver(format!(
            "cannot extract {count} eigenpairs of a {n}x{n} matrix"
        )));
    }
    let block = (2 * count).max(count + 6).min(n);
    let mut shifted = a.clone();
    for i in 0..n {
        shifted.add(i, i, shift);
    }
    let factor = shifted.cholesky()?;
    let mut rng = rng_for(seed, 0);
    let mut q = DMatrix::from_fn(n, block, |_, _| rng.gen::<f64>() - 0.5);
    for _ in 0..MAX_ITERATIONS {
        let basis = columns(n, block, |c| factor.solve(q.column(c).as_slice())).qr().q();
        let ab = columns(n, block, |c| a.matvec(basis.column(c).as_slice()));
        let h = basis.transpose() * &ab;
        let h = (&h + h.transpose()) * 0.5;
        let eig = SymmetricEigen::new(h);
        let mut order: Vec<usize> = (0..block).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
        let vals: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let rot = DMatrix::from_fn(block, block, |r, c| eig.eigenvectors[(r, order[c])]);
        q = &basis * &rot;
        let aq = &ab * &rot;
        let scale = vals[count - 1].abs().max(1.0);
        let converged = (0..count).all(|c| {
            let res = (aq.column(c) - q.column(c) * vals[c]).norm();
            res <= tol * scale
        });
        if converged {
            let vecs = (0..count).map(|c| q.column(c).iter().copied().collect()).collect();
            return Ok((vals[..count].to_vec(), vecs));
        }
    }
    Err(Error::Eigensolver("block iteration did not converge".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(n: usize, bw: usize) -> BandMatrix {
        let mut a = BandMatrix::zeros(n, bw);
        for i in 0..n {
            a.add(i, i, 4.0 + i as f64 * 0.1);
            for d in 1..=bw.min(i) {
                a.add(i, i - d, -1.0 / (d as f64 + 1.0));
            }
        }
        a
    }

    #[test]
    fn solve_matches_dense() {
        let a = sample(40, 5);
        let b: Vec<f64> = (0..40).map(|i| (i as f64).sin()).collect();
        let x = a.cholesky().unwrap().solve(&b);
        let dense = a.to_dense().lu().solve(&nalgebra::DVector::from_vec(b)).unwrap();
        for (u, v) in x.iter().zip(dense.iter()) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn indefinite_is_rejected() {
        let mut a = BandMatrix::zeros(3, 1);
        a.add(0, 0, 1.0);
        a.add(1, 1, -1.0);
        a.add(2, 2, 1.0);
        assert!(a.cholesky().is_err());
    }

    #[test]
    fn eigenpairs_match_dense() {
        let a = sample(60, 4);
        let (vals, vecs) = lowest_eigenpairs(&a, 4, 0.0, 1e-10, 1).unwrap();
        let mut dense: Vec<f64> = SymmetricEigen::new(a.to_dense()).eigenvalues.iter().copied().collect();
        dense.sort_by(f64::total_cmp);
        for (v, d) in vals.iter().zip(&dense) {
            assert!((v - d).abs() < 1e-9, "{v} {d}");
        }
        let r = a.matvec(&vecs[0]);
        let res: f64 = r.iter().zip(&vecs[0]).map(|(x, y)| (x - vals[0] * y).powi(2)).sum();
        assert!(res.sqrt() < 1e-8);
    }
}
