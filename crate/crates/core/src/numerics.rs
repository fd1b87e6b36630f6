//! Shared numerics: polar points in C², Gauss–Legendre rules, deterministic
//! quadrature over the Hartogs triangle and seeded uniform sampling.
//!
//! All integrals over `T = {|z| < |w| < 1}` are computed in polar coordinates
//! `z = r e^{iα}`, `w = s e^{iβ}` with volume element `r s dr ds dα dβ`. The
//! inner radius is mapped affinely onto `(0, s)`, so the weight `r s` kills the
//! corner at the origin and no node ever lands on `r = 0` or `s = 0`.
//!
//! Radial axes use Gauss–Legendre nodes; the two angular axes use the periodic
//! midpoint rule, which integrates `e^{i m θ}` exactly for `|m| < level`.
//!
//! Random streams come from `ChaCha8Rng`. The generator is part of the public
//! contract: changing it changes every seeded result.

use std::f64::consts::{FRAC_PI_4, PI};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, UnitDisc};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::exec;

/// Wraps an angle into `(-π, π]`.
pub fn normalize_angle(theta: f64) -> f64 {
    let mut t = theta % (2.0 * PI);
    if t <= -PI {
        t += 2.0 * PI;
    } else if t > PI {
        t -= 2.0 * PI;
    }
    t
}

/// A point `(r e^{iα}, s e^{iβ})` of C².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarPoint {
    pub r: f64,
    pub alpha: f64,
    pub s: f64,
    pub beta: f64,
}

impl PolarPoint {
    /// Builds a point, folding negative radii into the angle and wrapping
    /// both angles into `(-π, π]`.
    pub fn new(r: f64, alpha: f64, s: f64, beta: f64) -> Self {
        let (r, alpha) = if r < 0.0 { (-r, alpha + PI) } else { (r, alpha) };
        let (s, beta) = if s < 0.0 { (-s, beta + PI) } else { (s, beta) };
        Self {
            r,
            alpha: normalize_angle(alpha),
            s,
            beta: normalize_angle(beta),
        }
    }

    pub fn from_cartesian(z: Complex64, w: Complex64) -> Self {
        let (r, alpha) = z.to_polar();
        let (s, beta) = w.to_polar();
        Self::new(r, alpha, s, beta)
    }

    pub fn z(&self) -> Complex64 {
        Complex64::from_polar(self.r, self.alpha)
    }

    pub fn w(&self) -> Complex64 {
        Complex64::from_polar(self.s, self.beta)
    }

    pub fn to_cartesian(&self) -> (Complex64, Complex64) {
        (self.z(), self.w())
    }

    /// Real coordinates `(Re z, Im z, Re w, Im w)`.
    pub fn to_real4(&self) -> [f64; 4] {
        let (z, w) = self.to_cartesian();
        [z.re, z.im, w.re, w.im]
    }

    pub fn from_real4(x: [f64; 4]) -> Self {
        Self::from_cartesian(Complex64::new(x[0], x[1]), Complex64::new(x[2], x[3]))
    }

    /// Euclidean norm in C² = R⁴.
    pub fn norm(&self) -> f64 {
        self.r.hypot(self.s)
    }

    /// Euclidean distance `|p − q|`.
    pub fn dist(&self, other: &PolarPoint) -> f64 {
        let (z1, w1) = self.to_cartesian();
        let (z2, w2) = other.to_cartesian();
        (z1 - z2).norm().hypot((w1 - w2).norm())
    }

    /// Multiplies both coordinates by a positive factor.
    pub fn scaled(&self, factor: f64) -> Self {
        Self::new(self.r * factor, self.alpha, self.s * factor, self.beta)
    }

    pub fn in_t(&self) -> bool {
        self.r < self.s && self.s < 1.0
    }

    pub fn in_t_inf(&self) -> bool {
        self.r < self.s
    }
}

/// Controls every integral and sample: node count per axis, Monte Carlo
/// sample count and the RNG seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub level: usize,
    pub mc_samples: usize,
    pub seed: u64,
}

impl QuadratureSpec {
    pub fn new(level: usize) -> Self {
        Self {
            level,
            ..Self::default()
        }
    }

    pub fn with_level(self, level: usize) -> Self {
        Self { level, ..self }
    }
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            level: 24,
            mc_samples: 100_000,
            seed: 0,
        }
    }
}

/// Gauss–Legendre nodes (ascending) and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 {
        return Err(invalid("Gauss-Legendre rule needs n >= 1"));
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // Tricomi-style initial guess, refined by Newton on P_n.
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Ok((nodes, weights))
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let dp = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, dp)
}

/// Gauss–Legendre rule mapped to `(0, 1)`.
pub fn gauss_legendre_unit(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let (x, w) = gauss_legendre(n)?;
    Ok((
        x.iter().map(|t| 0.5 * (t + 1.0)).collect(),
        w.iter().map(|v| 0.5 * v).collect(),
    ))
}

/// Periodic midpoint nodes on `(-π, π)`, each with weight `2π/n`.
pub fn periodic_nodes(n: usize) -> Vec<f64> {
    let h = 2.0 * PI / n as f64;
    (0..n).map(|k| -PI + (k as f64 + 0.5) * h).collect()
}

/// Shell of `T` in the `s` variable: `s_min < s < s_max`, with the node map
/// `s = s_min + (s_max - s_min) y^grading`, `y ∈ (0, 1)`.
///
/// A grading exponent above one clusters nodes near `s_min`, which restores
/// spectral convergence for integrands behaving like a power of `s - s_min`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TRegion {
    pub s_min: f64,
    pub s_max: f64,
    pub grading: f64,
}

impl TRegion {
    pub const FULL: TRegion = TRegion {
        s_min: 0.0,
        s_max: 1.0,
        grading: 1.0,
    };

    pub fn new(s_min: f64, s_max: f64, grading: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&s_min) || !(s_min < s_max && s_max <= 1.0) || grading < 1.0 {
            return Err(invalid(format!(
                "bad region s in ({s_min}, {s_max}) with grading {grading}"
            )));
        }
        Ok(Self { s_min, s_max, grading })
    }
}

/// `∫_T f dV`.
pub fn integrate_t<F>(f: F, spec: &QuadratureSpec) -> Result<Complex64>
where
    F: Fn(&PolarPoint) -> Complex64 + Sync + Send,
{
    integrate_t_region(f, spec, &TRegion::FULL)
}

/// `∫ f dV` over `{0 < r < s, s_min < s < s_max}`.
pub fn integrate_t_region<F>(f: F, spec: &QuadratureSpec, region: &TRegion) -> Result<Complex64>
where
    F: Fn(&PolarPoint) -> Complex64 + Sync + Send,
{
    let v = integrate_t_region_many(|p, out| out[0] = f(p), 1, spec, region)?;
    Ok(v[0])
}

/// Integrates `m` fields in one sweep over the nodes. `f(p, out)` writes the
/// `m` integrand values at `p` into `out`.
pub fn integrate_t_region_many<F>(f: F, m: usize, spec: &QuadratureSpec, region: &TRegion) -> Result<Vec<Complex64>>
where
    F: Fn(&PolarPoint, &mut [Complex64]) + Sync + Send,
{
    let n = spec.level;
    let (y, wy) = gauss_legendre_unit(n)?;
    let width = region.s_max - region.s_min;
    let g = region.grading;
    let radial = |idx: usize| {
        let (i, k) = (idx / n, idx % n);
        let s = region.s_min + width * y[i].powf(g);
        let ds = width * g * y[i].powf(g - 1.0) * wy[i];
        let r = s * y[k];
        let dr = s * wy[k];
        (r, s, ds * dr * r * s)
    };
    sweep(radial, f, m, n)
}

/// Sums `f` over the tensor grid `radial(idx) × periodic² ` with `n * n`
/// radial nodes; `radial` returns `(r, s, weight)`. Nodes whose weight
/// underflows to zero contribute nothing and are not evaluated, so strongly
/// graded maps may approach singular points without overflowing `f`.
fn sweep<R, F>(radial: R, f: F, m: usize, n: usize) -> Result<Vec<Complex64>>
where
    R: Fn(usize) -> (f64, f64, f64) + Sync + Send,
    F: Fn(&PolarPoint, &mut [Complex64]) + Sync + Send,
{
    let angles = periodic_nodes(n);
    let h = 2.0 * PI / n as f64;
    let zero = Complex64::new(0.0, 0.0);
    let rows = exec::map_indexed(n * n, |idx| -> Result<Vec<Complex64>> {
        let (r, s, weight) = radial(idx);
        let mut acc = vec![zero; m];
        if weight == 0.0 {
            return Ok(acc);
        }
        let mut buf = vec![zero; m];
        for &alpha in &angles {
            for &beta in &angles {
                let p = PolarPoint { r, alpha, s, beta };
                f(&p, &mut buf);
                for (a, v) in acc.iter_mut().zip(&buf) {
                    if !v.re.is_finite() || !v.im.is_finite() {
                        return Err(Error::NonFinite {
                            point: p,
                            value: v.to_string(),
                        });
                    }
                    *a += v;
                }
            }
        }
        let w = weight * h * h;
        acc.iter_mut().for_each(|a| *a *= w);
        Ok(acc)
    });
    let mut total = vec![zero; m];
    for row in rows {
        for (t, v) in total.iter_mut().zip(row?) {
            *t += v;
        }
    }
    Ok(total)
}

/// `∫ f dV` over the spherical shell `{rho_lo < |p| < rho_hi} ∩ T`, with
/// `rho_hi ≤ 1` so that the constraint `|w| < 1` never binds.
///
/// Uses `r = ρ cos θ`, `s = ρ sin θ`, `θ ∈ (π/4, π/2)`, where
/// `dV = ρ³ cos θ sin θ dρ dθ dα dβ`.
pub fn integrate_shell_t<F>(f: F, rho_lo: f64, rho_hi: f64, spec: &QuadratureSpec) -> Result<Complex64>
where
    F: Fn(&PolarPoint) -> Complex64 + Sync + Send,
{
    if !(0.0 <= rho_lo && rho_lo < rho_hi && rho_hi <= 1.0) {
        return Err(invalid(format!("bad shell ({rho_lo}, {rho_hi})")));
    }
    let n = spec.level;
    let (y, wy) = gauss_legendre_unit(n)?;
    let radial = |idx: usize| {
        let (i, k) = (idx / n, idx % n);
        let rho = rho_lo + (rho_hi - rho_lo) * y[i];
        let drho = (rho_hi - rho_lo) * wy[i];
        let theta = FRAC_PI_4 + FRAC_PI_4 * y[k];
        let dtheta = FRAC_PI_4 * wy[k];
        let (st, ct) = theta.sin_cos();
        (rho * ct, rho * st, drho * dtheta * rho.powi(3) * ct * st)
    };
    let v = sweep(radial, |p, out| out[0] = f(p), 1, n)?;
    Ok(v[0])
}

/// True when a sequence of estimates at doubling levels does not settle:
/// the last increment is at least half the previous one and not negligible.
pub fn grows_under_refinement(estimates: &[f64]) -> bool {
    estimates.windows(3).any(|w| {
        let d1 = w[1] - w[0];
        let d2 = w[2] - w[1];
        d1 > 1e-9 * w[1].abs() && d2 >= 0.5 * d1
    })
}

/// Volume of the Hartogs triangle, `π²/2`.
pub const VOLUME_T: f64 = PI * PI / 2.0;

/// Deterministic RNG for `(seed, stream)`.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

const SAMPLE_BLOCK: usize = 4096;

/// `count` i.i.d. points uniform on `T`, by rejection from the unit bidisk.
///
/// Work is split into fixed blocks with one RNG stream each, so the output
/// depends only on `(count, seed)`.
pub fn sample_t(count: usize, seed: u64) -> Vec<PolarPoint> {
    let blocks = count.div_ceil(SAMPLE_BLOCK);
    let chunks = exec::map_indexed(blocks, |b| {
        let quota = SAMPLE_BLOCK.min(count - b * SAMPLE_BLOCK);
        let mut rng = rng_for(seed, b as u64);
        let mut out = Vec::with_capacity(quota);
        while out.len() < quota {
            if let Some(p) = bidisk_candidate(&mut rng) {
                out.push(p);
            }
        }
        out
    });
    chunks.into_iter().flatten().collect()
}

fn bidisk_candidate<R: Rng>(rng: &mut R) -> Option<PolarPoint> {
    let [zx, zy]: [f64; 2] = UnitDisc.sample(rng);
    let [wx, wy]: [f64; 2] = UnitDisc.sample(rng);
    let p = PolarPoint::from_cartesian(Complex64::new(zx, zy), Complex64::new(wx, wy));
    p.in_t().then_some(p)
}

/// One uniform point of `T` drawn from `rng`.
pub fn sample_t_one<R: Rng>(rng: &mut R) -> PolarPoint {
    loop {
        if let Some(p) = bidisk_candidate(rng) {
            return p;
        }
    }
}

/// Fraction of bidisk candidates accepted, estimated from `trials` draws.
pub fn acceptance_rate(trials: usize, seed: u64) -> f64 {
    let mut rng = rng_for(seed, u64::MAX);
    let hits = (0..trials).filter(|_| bidisk_candidate(&mut rng).is_some()).count();
    hits as f64 / trials as f64
}
