//! The variational Neumann problem `(du, dv) = (f, v)` on functions, one
//! Fourier mode at a time.
//!
//! Writing `u = g(r, s) e^{i(lα + mβ)}` in the polar coordinates of `T`, the
//! Dirichlet form and the `L²` pairing decouple across modes:
//!
//! ```text
//! ‖du‖² = ∬ [|g_r|² + |g_s|² + (l²/r² + m²/s²)|g|²] 4π² r s dr ds,
//! ‖u‖²  = ∬ |g|² 4π² r s dr ds,
//! ```
//!
//! over the triangle `{0 < r < s < 1}`. Each mode is discretized by cell
//! centered finite volumes on the uniform grid of step `h = 1/n`: one node
//! per cell at `((i+½)h, (j+½)h)` for `0 ≤ i ≤ j < n`, where the diagonal
//! cells are the half squares below `r = s`. Their node sits at the midpoint
//! of the hypotenuse, so every segment joining neighbouring nodes is
//! orthogonal to the shared face and the two-point flux is consistent.
//!
//! - mass: `M_P = ∫_P 4π² r s`, computed exactly (lumped);
//! - flux across a face `F`: `∫_F 4π² r s dℓ / h` times the jump;
//! - potential: `(l²/r_P² + m²/s_P²) M_P`, evaluated at the node, which is
//!   never on the singular edges `r = 0` or `s = 0`.
//!
//! Boundary faces on `s = 1` and `r = s` carry no flux: the Neumann
//! condition is natural. Faces on `r = 0` carry zero weight.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bergman::{v_eval, v_gradient, LaurentIndex};
use crate::error::{invalid, Error, Result};
use crate::exec;
use crate::linalg::{lowest_eigenpairs, BandMatrix};
use crate::numerics::{integrate_t, periodic_nodes, rng_for, PolarPoint, QuadratureSpec, VOLUME_T};

pub const MIN_GRID: usize = 8;

/// Periodic nodes per angle used to extract a Fourier mode of a source.
pub const ANGULAR_NODES: usize = 32;

/// Relative change between grids `n` and `2n` accepted as converged.
pub const REFINEMENT_TOLERANCE: f64 = 0.01;

/// Eigenvalues below this are compared in absolute terms.
pub const ZERO_EIGENVALUE: f64 = 1e-8;

const EIGEN_TOLERANCE: f64 = 1e-10;
const EIGEN_SHIFT: f64 = 1.0;

/// Discrete stiffness and mass forms of one angular mode.
#[derive(Debug, Clone)]
pub struct ModeProblem {
    pub l: i32,
    pub m: i32,
    pub n: usize,
    /// `(r, s)` of every node, ordered by rows of constant `s`.
    pub nodes: Vec<(f64, f64)>,
    /// Diagonal of the lumped mass form.
    pub mass: Vec<f64>,
    stiffness: BandMatrix,
}

/// Index of cell `(i, j)`, `i ≤ j`, in row-major order over `s`.
pub fn node_index(i: usize, j: usize) -> usize {
    j * (j + 1) / 2 + i
}

pub fn build_mode(l: i32, m: i32, n: usize) -> Result<ModeProblem> {
    if n < MIN_GRID {
        return Err(invalid(format!("grid size must be at least {MIN_GRID}, got {n}")));
    }
    let h = 1.0 / n as f64;
    let size = n * (n + 1) / 2;
    let c = 4.0 * PI * PI;
    let (l2, m2) = ((l as f64).powi(2), (m as f64).powi(2));
    let mut nodes = Vec::with_capacity(size);
    let mut mass = Vec::with_capacity(size);
    for j in 0..n {
        let (s_lo, s_hi) = (j as f64 * h, (j + 1) as f64 * h);
        for i in 0..=j {
            let (r_lo, r_hi) = (i as f64 * h, (i + 1) as f64 * h);
            nodes.push(((i as f64 + 0.5) * h, (j as f64 + 0.5) * h));
            mass.push(if i == j {
                c * (s_hi * s_hi - s_lo * s_lo).powi(2) / 8.0
            } else {
                c * (r_hi * r_hi - r_lo * r_lo) * (s_hi * s_hi - s_lo * s_lo) / 4.0
            });
        }
    }
    let mut stiffness = BandMatrix::zeros(size, n.saturating_sub(1).max(1));
    let mut couple = |a: usize, b: usize, t: f64| {
        stiffness.add(a, a, t);
        stiffness.add(b, b, t);
        stiffness.add(a, b, -t);
    };
    for j in 0..n {
        let (s_lo, s_hi) = (j as f64 * h, (j + 1) as f64 * h);
        for i in 0..=j {
            let p = node_index(i, j);
            // Face r = (i+1)h between (i, j) and (i+1, j).
            if i < j {
                let r_f = (i + 1) as f64 * h;
                let weight = c * r_f * (s_hi * s_hi - s_lo * s_lo) / 2.0;
                couple(p, node_index(i + 1, j), weight / h);
            }
            // Face s = (j+1)h between (i, j) and (i, j+1).
            if j + 1 < n {
                let (r_lo, r_hi) = (i as f64 * h, (i + 1) as f64 * h);
                let weight = c * s_hi * (r_hi * r_hi - r_lo * r_lo) / 2.0;
                couple(p, node_index(i, j + 1), weight / h);
            }
        }
    }
    if l2 + m2 > 0.0 {
        for (p, &(r, s)) in nodes.iter().enumerate() {
            stiffness.add(p, p, (l2 / (r * r) + m2 / (s * s)) * mass[p]);
        }
    }
    Ok(ModeProblem {
        l,
        m,
        n,
        nodes,
        mass,
        stiffness,
    })
}

impl ModeProblem {
    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn stiffness_apply(&self, x: &[f64]) -> Vec<f64> {
        self.stiffness.matvec(x)
    }

    /// `yᵀ K x`.
    pub fn stiffness_form(&self, x: &[f64], y: &[f64]) -> f64 {
        dot(&self.stiffness.matvec(x), y)
    }

    /// `yᵀ M x`.
    pub fn mass_form(&self, x: &[f64], y: &[f64]) -> f64 {
        x.iter().zip(y).zip(&self.mass).map(|((a, b), m)| a * b * m).sum()
    }

    pub fn stiffness_dense(&self) -> DMatrix<f64> {
        self.stiffness.to_dense()
    }

    pub fn mass_dense(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&self.mass))
    }

    /// `M^{−1/2} K M^{−1/2}`, which has the eigenvalues of the pencil `(K, M)`.
    fn symmetrized(&self) -> BandMatrix {
        let scale: Vec<f64> = self.mass.iter().map(|m| 1.0 / m.sqrt()).collect();
        let mut a = BandMatrix::zeros(self.len(), self.stiffness.bw);
        for i in 0..self.len() {
            for j in i.saturating_sub(self.stiffness.bw)..=i {
                let v = self.stiffness.get(i, j);
                if v != 0.0 {
                    a.add(i, j, v * scale[i] * scale[j]);
                }
            }
        }
        a
    }

    /// Lowest `count` generalized eigenpairs `K x = λ M x`, ascending, with
    /// `M`-orthonormal eigenvectors.
    pub fn eigenpairs(&self, count: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        if count == 0 {
            return Err(invalid("eigenvalue count must be at least 1"));
        }
        let (vals, vecs) = lowest_eigenpairs(&self.symmetrized(), count, EIGEN_SHIFT, EIGEN_TOLERANCE, 0)?;
        let vecs = vecs
            .into_iter()
            .map(|y| y.iter().zip(&self.mass).map(|(v, m)| v / m.sqrt()).collect())
            .collect();
        if let Some(bad) = vals.iter().find(|&&v| v < -ZERO_EIGENVALUE) {
            return Err(Error::Eigensolver(format!(
                "negative eigenvalue {bad} of a semidefinite pencil"
            )));
        }
        // Roundoff below zero is reported as zero.
        let vals = vals.into_iter().map(|v| v.max(0.0)).collect();
        Ok((vals, vecs))
    }

    /// Mass-weighted mean `(u, 1) / (1, 1)` of grid values.
    pub fn mean(&self, x: &[Complex64]) -> Complex64 {
        let total: f64 = self.mass.iter().sum();
        x.iter().zip(&self.mass).map(|(v, m)| v * *m).sum::<Complex64>() / total
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Low-lying spectrum of one mode with a refinement diagnostic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumResult {
    pub l: i32,
    pub m: i32,
    pub n: usize,
    /// Ascending eigenvalues on grid `n`.
    pub eigenvalues: Vec<f64>,
    /// The same eigenvalues on grid `2n`.
    pub refined: Vec<f64>,
    /// `|λ(n) − λ(2n)| / λ(2n)`, or the absolute change for zero eigenvalues.
    pub relative_change: Vec<f64>,
    pub converged: bool,
}

/// One row of the tabular spectrum output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRow {
    pub l: i32,
    pub m: i32,
    pub n: usize,
    pub index: usize,
    pub eigenvalue: f64,
    pub converged: bool,
}

impl SpectrumResult {
    pub fn to_rows(&self) -> Vec<SpectrumRow> {
        self.eigenvalues
            .iter()
            .enumerate()
            .map(|(index, &eigenvalue)| SpectrumRow {
                l: self.l,
                m: self.m,
                n: self.n,
                index,
                eigenvalue,
                converged: self.converged,
            })
            .collect()
    }
}

fn change(coarse: f64, fine: f64) -> f64 {
    if fine.abs() < ZERO_EIGENVALUE {
        (coarse - fine).abs()
    } else {
        (coarse - fine).abs() / fine.abs()
    }
}

/// Lowest `count` eigenvalues of mode `(l, m)` on grids `n` and `2n`.
pub fn neumann_spectrum(l: i32, m: i32, n: usize, count: usize) -> Result<SpectrumResult> {
    let coarse = build_mode(l, m, n)?.eigenpairs(count)?.0;
    let refined = build_mode(l, m, 2 * n)?.eigenpairs(count)?.0;
    let relative_change: Vec<f64> = coarse.iter().zip(&refined).map(|(&a, &b)| change(a, b)).collect();
    let converged = coarse.iter().zip(&refined).all(|(&a, &b)| {
        if b.abs() < ZERO_EIGENVALUE {
            a.abs() < ZERO_EIGENVALUE
        } else {
            change(a, b) < REFINEMENT_TOLERANCE
        }
    });
    Ok(SpectrumResult {
        l,
        m,
        n,
        eigenvalues: coarse,
        refined,
        relative_change,
        converged,
    })
}

/// First nonzero eigenvalue over modes `0 ≤ l, m ≤ mode_cut` on grid `n`.
/// Modes `±l`, `±m` share a spectrum, so nonnegative modes suffice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoincareEstimate {
    pub n: usize,
    pub mode_cut: u32,
    /// `1/λ̂`, a lower estimate of the optimal Poincaré constant.
    pub constant: f64,
    pub lambda: f64,
    pub argmin: (i32, i32),
    pub per_mode: Vec<(i32, i32, f64)>,
}

pub fn poincare_estimate(n: usize, mode_cut: u32) -> Result<PoincareEstimate> {
    if mode_cut < 1 {
        return Err(invalid("mode_cut must be at least 1"));
    }
    let modes: Vec<(i32, i32)> = (0..=mode_cut as i32)
        .flat_map(|l| (0..=mode_cut as i32).map(move |m| (l, m)))
        .collect();
    let firsts = exec::map_slice(&modes, |&(l, m)| -> Result<f64> {
        let problem = build_mode(l, m, n)?;
        if (l, m) == (0, 0) {
            let (vals, _) = problem.eigenpairs(2)?;
            Ok(vals[1])
        } else {
            Ok(problem.eigenpairs(1)?.0[0])
        }
    });
    let mut per_mode = Vec::with_capacity(modes.len());
    for (&(l, m), v) in modes.iter().zip(firsts) {
        per_mode.push((l, m, v?));
    }
    let &(l, m, lambda) = per_mode
        .iter()
        .min_by(|a, b| a.2.total_cmp(&b.2))
        .expect("at least four modes");
    if !(lambda > 0.0) {
        return Err(Error::Eigensolver(format!(
            "nonpositive first eigenvalue {lambda} in mode ({l}, {m})"
        )));
    }
    Ok(PoincareEstimate {
        n,
        mode_cut,
        constant: 1.0 / lambda,
        lambda,
        argmin: (l, m),
        per_mode,
    })
}

/// `1/λ̂` from [`poincare_estimate`].
pub fn poincare_constant(n: usize, mode_cut: u32) -> Result<f64> {
    Ok(poincare_estimate(n, mode_cut)?.constant)
}

/// Discrete solution of one mode of the Neumann problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeumannSolution {
    pub l: i32,
    pub m: i32,
    pub n: usize,
    /// `u` at the nodes.
    pub values: Vec<Complex64>,
    /// Mode `(l, m)` of the source at the nodes, after mean removal.
    pub source: Vec<Complex64>,
    /// Mean `f_a` removed from the `(0, 0)` mode; zero for other modes.
    pub source_mean: Complex64,
    /// `‖K u − M f̂‖ / ‖M f̂‖`.
    pub residual: f64,
}

/// Solves `K u = M b` for one mode. In the `(0, 0)` mode `K` annihilates the
/// constants, the data must satisfy `(b, 1) = 0`, and the solution is
/// normalized by `(u, 1) = 0`.
pub fn solve_mode_system(problem: &ModeProblem, rhs: &[Complex64]) -> Result<Vec<Complex64>> {
    solve_system(problem, rhs, true)
}

fn solve_system(problem: &ModeProblem, rhs: &[Complex64], check: bool) -> Result<Vec<Complex64>> {
    if rhs.len() != problem.len() {
        return Err(invalid(format!("expected {} values, got {}", problem.len(), rhs.len())));
    }
    let singular = problem.l == 0 && problem.m == 0;
    let load: Vec<Complex64> = rhs.iter().zip(&problem.mass).map(|(b, m)| b * *m).collect();
    if singular && check {
        let total: Complex64 = load.iter().sum();
        let scale: f64 = load.iter().map(|v| v.norm()).sum();
        if total.norm() > 1e-12 * scale.max(f64::MIN_POSITIVE) {
            return Err(invalid(format!(
                "inconsistent data for the (0, 0) mode: (f, 1) = {total} is not zero"
            )));
        }
    }
    let mut k = problem.stiffness.clone();
    if singular {
        // Pin the first node: the equation there follows from the others.
        for j in 1..=k.bw.min(k.n - 1) {
            let v = k.get(j, 0);
            k.add(j, 0, -v);
        }
        let d = k.get(0, 0);
        k.add(0, 0, 1.0 - d);
    }
    let factor = k.cholesky()?;
    let solve = |part: fn(&Complex64) -> f64| {
        let mut b: Vec<f64> = load.iter().map(part).collect();
        if singular {
            b[0] = 0.0;
        }
        factor.solve(&b)
    };
    let (re, im) = (solve(|c| c.re), solve(|c| c.im));
    let mut u: Vec<Complex64> = re.into_iter().zip(im).map(|(a, b)| Complex64::new(a, b)).collect();
    if singular {
        let mean = problem.mean(&u);
        u.iter_mut().for_each(|v| *v -= mean);
    }
    Ok(u)
}

/// Mode `(l, m)` of `f` at every node, by the periodic rule with
/// [`ANGULAR_NODES`] points per angle.
pub fn mode_coefficients<F>(f: F, problem: &ModeProblem) -> Vec<Complex64>
where
    F: Fn(&PolarPoint) -> Complex64 + Sync + Send,
{
    let angles = periodic_nodes(ANGULAR_NODES);
    let norm = (ANGULAR_NODES * ANGULAR_NODES) as f64;
    let (l, m) = (problem.l as f64, problem.m as f64);
    exec::map_slice(&problem.nodes, |&(r, s)| {
        let mut acc = Complex64::new(0.0, 0.0);
        for &alpha in &angles {
            for &beta in &angles {
                let p = PolarPoint { r, alpha, s, beta };
                acc += f(&p) * Complex64::from_polar(1.0, -(l * alpha + m * beta));
            }
        }
        acc / norm
    })
}

/// Solves `(du, dv) = (f − f_a, v)` in mode `(l, m)` on grid `n`; the mean
/// `f_a` is removed only in the `(0, 0)` mode, the others have mean zero.
pub fn solve_neumann<F>(f: F, l: i32, m: i32, n: usize) -> Result<NeumannSolution>
where
    F: Fn(&PolarPoint) -> Complex64 + Sync + Send,
{
    let problem = build_mode(l, m, n)?;
    let mut source = mode_coefficients(f, &problem);
    if let Some(bad) = source.iter().find(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(invalid(format!("source has non-finite mode coefficient {bad}")));
    }
    let mut source_mean = Complex64::new(0.0, 0.0);
    if l == 0 && m == 0 {
        source_mean = problem.mean(&source);
        source.iter_mut().for_each(|v| *v -= source_mean);
    }
    let values = solve_system(&problem, &source, false)?;
    let residual = {
        let apply = |part: fn(&Complex64) -> f64| problem.stiffness_apply(&values.iter().map(part).collect::<Vec<_>>());
        let (kr, ki) = (apply(|c| c.re), apply(|c| c.im));
        let mut num = 0.0;
        let mut den = 0.0;
        for p in 0..problem.len() {
            let b = source[p] * problem.mass[p];
            num += (Complex64::new(kr[p], ki[p]) - b).norm_sqr();
            den += b.norm_sqr();
        }
        if den == 0.0 {
            num.sqrt()
        } else {
            (num / den).sqrt()
        }
    };
    Ok(NeumannSolution {
        l,
        m,
        n,
        values,
        source,
        source_mean,
        residual,
    })
}

/// Outcome of testing `‖f − f_a‖² ≤ 1.1·C·‖df‖²` on random real fields
/// `f = Re Σ a_{jk} v_{jk}` with `j ≤ 2`, `0 ≤ k ≤ 3`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoincareCheck {
    pub constant: f64,
    pub n_fields: usize,
    /// `‖f − f_a‖² / (C ‖df‖²)` per field.
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
    pub violations: usize,
}

pub const POINCARE_SLACK: f64 = 1.1;

fn random_field(seed: u64, index: usize) -> Vec<(LaurentIndex, Complex64)> {
    let mut rng = rng_for(seed, index as u64);
    let mut out = Vec::new();
    for j in 0..=2u32 {
        for k in 0..=3i32 {
            let a = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            out.push((LaurentIndex { j, k }, a));
        }
    }
    out
}

pub fn poincare_check(constant: f64, n_fields: usize, seed: u64, quad: &QuadratureSpec) -> Result<PoincareCheck> {
    if !(constant > 0.0 && constant.is_finite()) {
        return Err(invalid(format!("Poincaré constant must be positive, got {constant}")));
    }
    let mut ratios = Vec::with_capacity(n_fields);
    for index in 0..n_fields {
        let terms = random_field(seed, index);
        let value = |p: &PolarPoint| -> f64 {
            terms
                .iter()
                .map(|(i, a)| (a * v_eval(*i, p).unwrap_or_default()).re)
                .sum()
        };
        let mean = integrate_t(|p| Complex64::new(value(p), 0.0), quad)?.re / VOLUME_T;
        let spread = integrate_t(|p| Complex64::new((value(p) - mean).powi(2), 0.0), quad)?.re;
        let energy = integrate_t(
            |p| {
                let mut g = [Complex64::new(0.0, 0.0); 2];
                for (i, a) in &terms {
                    let d = v_gradient(*i, p).unwrap_or_default();
                    g[0] += a * d[0];
                    g[1] += a * d[1];
                }
                // |∇ Re h|² = |∂_z h|² + |∂_w h|² for holomorphic h.
                Complex64::new(g[0].norm_sqr() + g[1].norm_sqr(), 0.0)
            },
            quad,
        )?
        .re;
        ratios.push(spread / (constant * energy));
    }
    let max_ratio = ratios.iter().copied().fold(0.0, f64::max);
    let violations = ratios.iter().filter(|&&r| r > POINCARE_SLACK).count();
    Ok(PoincareCheck {
        constant,
        n_fields,
        ratios,
        max_ratio,
        violations,
    })
}
