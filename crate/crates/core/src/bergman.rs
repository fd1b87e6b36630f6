//! The Laurent system `v_{jk}(z, w) = (z/w)^j w^k`, `j ≥ 0`, `k ≥ −1`, of the
//! Bergman space of `T`.
//!
//! On every torus `{|z| = r, |w| = s}` the function `v_{jk}` is a multiple of
//! the Fourier mode `e^{i(jα + (k−j)β)}`, and `(j, k) ↦ (j, k − j)` is
//! injective, so distinct basis elements are orthogonal. Their norms are
//!
//! ```text
//! ‖v_{jk}‖² = 4π² ∫₀¹ ∫₀^s r^{2j+1} s^{2k−2j+1} dr ds = π² / ((j+1)(k+2)).
//! ```

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::numerics::{
    grows_under_refinement, integrate_t, integrate_t_region_many, PolarPoint, QuadratureSpec, TRegion,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LaurentIndex {
    pub j: u32,
    pub k: i32,
}

impl LaurentIndex {
    pub fn new(j: u32, k: i32) -> Result<Self> {
        if k < -1 {
            return Err(invalid(format!("Laurent index k must be >= -1, got {k}")));
        }
        Ok(Self { j, k })
    }

    /// Angular frequencies `(j, k − j)` of the basis element.
    pub fn modes(&self) -> (i64, i64) {
        (self.j as i64, self.k as i64 - self.j as i64)
    }
}

/// Indices `0 ≤ j ≤ jmax`, `−1 ≤ k ≤ kmax`, ordered by `(j, k)`.
pub fn rectangle(jmax: u32, kmax: i32) -> Vec<LaurentIndex> {
    (0..=jmax)
        .flat_map(|j| (-1..=kmax).map(move |k| LaurentIndex { j, k }))
        .collect()
}

/// `r^j s^{k−j} e^{i(jα + (k−j)β)}`; no checks.
fn eval_polar(idx: LaurentIndex, p: &PolarPoint) -> Complex64 {
    let (a, b) = idx.modes();
    let modulus = p.r.powi(a as i32) * p.s.powi(b as i32);
    Complex64::from_polar(modulus, a as f64 * p.alpha + b as f64 * p.beta)
}

/// `v_{jk}(p)`, evaluated in polar form.
pub fn v_eval(idx: LaurentIndex, p: &PolarPoint) -> Result<Complex64> {
    if p.s == 0.0 {
        return Err(invalid("v_jk is singular at w = 0"));
    }
    Ok(eval_polar(idx, p))
}

/// `(∂_z v_{jk}, ∂_w v_{jk})(p) = (j z^{j−1} w^{k−j}, (k−j) z^j w^{k−j−1})`.
pub fn v_gradient(idx: LaurentIndex, p: &PolarPoint) -> Result<[Complex64; 2]> {
    if p.s == 0.0 {
        return Err(invalid("v_jk is singular at w = 0"));
    }
    let (a, b) = idx.modes();
    let term = |c: i64, ea: i64, eb: i64| {
        if c == 0 {
            return Complex64::new(0.0, 0.0);
        }
        let modulus = p.r.powi(ea as i32) * p.s.powi(eb as i32);
        c as f64 * Complex64::from_polar(modulus, ea as f64 * p.alpha + eb as f64 * p.beta)
    };
    Ok([term(a, a - 1, b), term(b, a, b - 1)])
}

pub fn v_norm_sq(idx: LaurentIndex) -> f64 {
    PI * PI / ((idx.j as f64 + 1.0) * (idx.k as f64 + 2.0))
}

/// `(f, g) = ∫_T f ḡ dV`.
pub fn inner_product<F, G>(f: F, g: G, spec: &QuadratureSpec) -> Result<Complex64>
where
    F: Fn(&PolarPoint) -> Complex64 + Sync + Send,
    G: Fn(&PolarPoint) -> Complex64 + Sync + Send,
{
    integrate_t(|p| f(p) * g(p).conj(), spec)
}

/// Gram matrix `G[a][b] = (v_a, v_b)` by quadrature, in one sweep.
pub fn gram_matrix(indices: &[LaurentIndex], spec: &QuadratureSpec) -> Result<Vec<Vec<Complex64>>> {
    let m = indices.len();
    let pairs: Vec<(usize, usize)> = (0..m).flat_map(|a| (a..m).map(move |b| (a, b))).collect();
    let values = integrate_t_region_many(
        |p, out| {
            let v: Vec<Complex64> = indices.iter().map(|&i| eval_polar(i, p)).collect();
            for (o, &(a, b)) in out.iter_mut().zip(&pairs) {
                *o = v[a] * v[b].conj();
            }
        },
        pairs.len(),
        spec,
        &TRegion::FULL,
    )?;
    let mut g = vec![vec![Complex64::new(0.0, 0.0); m]; m];
    for (&(a, b), v) in pairs.iter().zip(values) {
        g[a][b] = v;
        g[b][a] = v.conj();
    }
    Ok(g)
}

/// JSON record of one coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoefficientRecord {
    pub j: u32,
    pub k: i32,
    pub re: f64,
    pub im: f64,
}

/// Truncated expansion `Σ a_{jk} v_{jk}` on the rectangle `j ≤ jmax, k ≤ kmax`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LaurentCoefficients {
    pub entries: BTreeMap<LaurentIndex, Complex64>,
    pub jmax: u32,
    pub kmax: i32,
    /// `‖f‖²` of the projected field, when produced by [`project`].
    pub source_norm_sq: Option<f64>,
}

impl LaurentCoefficients {
    pub fn new(jmax: u32, kmax: i32) -> Self {
        Self {
            entries: BTreeMap::new(),
            jmax,
            kmax,
            source_norm_sq: None,
        }
    }

    pub fn insert(&mut self, idx: LaurentIndex, value: Complex64) -> Result<()> {
        if idx.j > self.jmax || idx.k > self.kmax || idx.k < -1 {
            return Err(invalid(format!(
                "index {idx:?} outside rectangle j <= {}, k <= {}",
                self.jmax, self.kmax
            )));
        }
        self.entries.insert(idx, value);
        Ok(())
    }

    pub fn get(&self, j: u32, k: i32) -> Complex64 {
        self.entries.get(&LaurentIndex { j, k }).copied().unwrap_or_default()
    }

    /// `Σ |a_{jk}|² ‖v_{jk}‖²`.
    pub fn bessel_sum(&self) -> f64 {
        self.entries.iter().map(|(i, a)| a.norm_sqr() * v_norm_sq(*i)).sum()
    }

    /// `‖f‖² − Σ |a|²‖v‖²`; non-negative up to quadrature error.
    pub fn bessel_residual(&self) -> Option<f64> {
        self.source_norm_sq.map(|n| n - self.bessel_sum())
    }

    pub fn to_records(&self) -> Vec<CoefficientRecord> {
        self.entries
            .iter()
            .map(|(i, a)| CoefficientRecord {
                j: i.j,
                k: i.k,
                re: a.re,
                im: a.im,
            })
            .collect()
    }

    pub fn from_records(records: &[CoefficientRecord]) -> Result<Self> {
        let jmax = records.iter().map(|r| r.j).max().unwrap_or(0);
        let kmax = records.iter().map(|r| r.k).max().unwrap_or(-1);
        let mut out = Self::new(jmax, kmax);
        for r in records {
            out.insert(LaurentIndex::new(r.j, r.k)?, Complex64::new(r.re, r.im))?;
        }
        Ok(out)
    }
}

/// Bergman projection truncated to the rectangle:
/// `a_{jk} = (f, v_{jk}) / ‖v_{jk}‖²`. Fails when `‖f‖²` keeps growing
/// across levels `L/4`, `L/2`, `L`.
pub fn project<F>(f: F, jmax: u32, kmax: i32, spec: &QuadratureSpec) -> Result<LaurentCoefficients>
where
    F: Fn(&PolarPoint) -> Complex64 + Sync + Send,
{
    let indices = rectangle(jmax, kmax);
    let values = integrate_t_region_many(
        |p, out| {
            let fv = f(p);
            out[0] = Complex64::new(fv.norm_sqr(), 0.0);
            for (o, &i) in out[1..].iter_mut().zip(&indices) {
                *o = fv * eval_polar(i, p).conj();
            }
        },
        indices.len() + 1,
        spec,
        &TRegion::FULL,
    )
    .map_err(|e| invalid(format!("field is not square integrable on T: {e}")))?;
    let norm_sq = values[0].re;
    let coarse = |level: usize| -> Result<f64> {
        Ok(integrate_t(|p| Complex64::new(f(p).norm_sqr(), 0.0), &spec.with_level(level.max(2)))?.re)
    };
    let estimates = [coarse(spec.level / 4)?, coarse(spec.level / 2)?, norm_sq];
    if !norm_sq.is_finite() || grows_under_refinement(&estimates) {
        return Err(invalid(format!(
            "field has divergent L2 norm (estimates {estimates:?})"
        )));
    }
    let mut out = LaurentCoefficients::new(jmax, kmax);
    out.source_norm_sq = Some(norm_sq);
    for (&i, v) in indices.iter().zip(&values[1..]) {
        out.entries.insert(i, v / v_norm_sq(i));
    }
    Ok(out)
}

/// `Σ a_{jk} v_{jk}(p)` over the stored entries.
pub fn reconstruct(coeffs: &LaurentCoefficients, p: &PolarPoint) -> Complex64 {
    coeffs.entries.iter().map(|(&i, a)| a * eval_polar(i, p)).sum()
}

/// Partial sum `Σ v_{jk}(p) conj(v_{jk}(q)) / ‖v_{jk}‖²` of the Bergman kernel.
pub fn kernel_truncated(p: &PolarPoint, q: &PolarPoint, jmax: u32, kmax: i32) -> Complex64 {
    rectangle(jmax, kmax)
        .into_iter()
        .map(|i| eval_polar(i, p) * eval_polar(i, q).conj() / v_norm_sq(i))
        .sum()
}
