//! Surface measure of boundary balls, `σ(B_ρ(p) ∩ S)`, for `S = bT_∞` and
//! `S = bT`.
//!
//! The cone `bT_∞ = {|z| = |w|}` is parametrized by
//! `q(t, α, β) = (t e^{iα}, t e^{iβ}) / √2` with `|q| = t` and surface element
//! `½ t² dt dα dβ`. By the rotation symmetry of both coordinates every center can
//! be rotated to real coordinates `p = (a, b)`, `a, b ≥ 0`, and then
//!
//! ```text
//! |q − p|² = (t/√2 − a)² + (t/√2 − b)² + 2√2 t a sin²(α/2) + 2√2 t b sin²(β/2).
//! ```
//!
//! For fixed `(t, α)` the admissible `β` form a symmetric interval whose length
//! is computed exactly; `t` and `α` use midpoint grids on windows that bracket
//! the support. Indicator integrands are discontinuous, so midpoint grids are
//! used instead of Gauss rules.
//!
//! The cylinder `{|w| = 1, |z| < 1}` has surface element `dA(z) dβ`; for fixed
//! `β` the `z`-slice of the ball is a disk, and its overlap with the unit disk
//! is a closed-form lens area.

use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::exec;
use crate::numerics::{rng_for, PolarPoint, QuadratureSpec};

/// Diameter of `T`.
pub const DIAM_T: f64 = 2.0 * SQRT_2;

/// `f(0) = 2π²/3`.
pub const PROFILE_AT_ZERO: f64 = 2.0 * PI * PI / 3.0;

/// `lim_{t→∞} f(t) = 4π/3`.
pub const PROFILE_LIMIT: f64 = 4.0 * PI / 3.0;

const ON_BOUNDARY_TOL: f64 = 1e-9;

/// Measure of `B_ρ((a, b)) ∩ {q(t, α, β) : t < t_max}` on the cone.
pub fn cone_ball_measure(a: f64, b: f64, rho: f64, t_max: f64, cells: usize) -> f64 {
    let (a, b) = (a.abs(), b.abs());
    let center_norm = a.hypot(b);
    let lo = (center_norm - rho).max(0.0);
    let hi = (center_norm + rho).min(t_max);
    if hi <= lo || cells == 0 {
        return 0.0;
    }
    let ht = (hi - lo) / cells as f64;
    let mut total = 0.0;
    for i in 0..cells {
        let t = lo + (i as f64 + 0.5) * ht;
        total += 0.5 * t * t * angular_area(a, b, rho, t, cells) * ht;
    }
    total
}

/// Area of `{(α, β) : |q(t, α, β) − (a, b)| < ρ}` in `(-π, π]²`.
fn angular_area(a: f64, b: f64, rho: f64, t: f64, cells: usize) -> f64 {
    let u = t / SQRT_2;
    let slack = rho * rho - (u - a).powi(2) - (u - b).powi(2);
    if slack <= 0.0 {
        return 0.0;
    }
    let ka = 2.0 * SQRT_2 * t * a;
    let kb = 2.0 * SQRT_2 * t * b;
    // β-interval length for a given remaining slack
    let beta_len = |m: f64| -> f64 {
        if m <= 0.0 {
            0.0
        } else if kb <= 0.0 || m >= kb {
            2.0 * PI
        } else {
            4.0 * (m / kb).sqrt().asin()
        }
    };
    if ka <= 0.0 {
        return 2.0 * PI * beta_len(slack);
    }
    let nu = slack / ka;
    let half = if nu >= 1.0 { PI } else { 2.0 * nu.sqrt().asin() };
    let ha = 2.0 * half / cells as f64;
    let mut area = 0.0;
    for k in 0..cells {
        let alpha = -half + (k as f64 + 0.5) * ha;
        let sa = (0.5 * alpha).sin();
        area += beta_len(slack - ka * sa * sa);
    }
    area * ha
}

/// Profile `f(t) = σ(B₁(q(t, 0, 0)) ∩ bT_∞)`.
pub fn f_profile(t: f64, spec: &QuadratureSpec) -> Result<f64> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(invalid(format!("profile argument must be finite and >= 0, got {t}")));
    }
    let c = t / SQRT_2;
    Ok(cone_ball_measure(c, c, 1.0, f64::INFINITY, spec.level))
}

fn check_cone_point(p: &PolarPoint) -> Result<()> {
    if (p.r - p.s).abs() > ON_BOUNDARY_TOL {
        return Err(invalid(format!("{p:?} is not on the cone |z| = |w|")));
    }
    Ok(())
}

/// `σ(B_ρ(p) ∩ bT_∞) = ρ³ f(|p|/ρ)`.
pub fn sigma_ball_tinf(p: &PolarPoint, rho: f64, spec: &QuadratureSpec) -> Result<f64> {
    check_cone_point(p)?;
    if !(rho > 0.0) {
        return Err(invalid(format!("radius must be positive, got {rho}")));
    }
    Ok(rho.powi(3) * f_profile(p.norm() / rho, spec)?)
}

/// Brute-force `σ(B_ρ(p) ∩ bT_∞)`: a plain 3D midpoint grid over the
/// cone parameters, testing membership with Cartesian distances at the
/// actual center (no rotation, no rescaling).
pub fn sigma_ball_tinf_direct(p: &PolarPoint, rho: f64, cells: usize) -> Result<f64> {
    check_cone_point(p)?;
    if !(rho > 0.0) {
        return Err(invalid(format!("radius must be positive, got {rho}")));
    }
    let (zp, wp) = p.to_cartesian();
    let norm = p.norm();
    let lo = (norm - rho).max(0.0);
    let hi = norm + rho;
    let window = |center_angle: f64, modulus: f64| -> (f64, f64) {
        if modulus > rho {
            let half = (rho / modulus).asin();
            (center_angle - half, 2.0 * half)
        } else {
            (-PI, 2.0 * PI)
        }
    };
    let (a0, alen) = window(zp.arg(), zp.norm());
    let (b0, blen) = window(wp.arg(), wp.norm());
    let (ht, ha, hb) = ((hi - lo) / cells as f64, alen / cells as f64, blen / cells as f64);
    let rows = exec::map_indexed(cells, |i| {
        let t = lo + (i as f64 + 0.5) * ht;
        let u = t / SQRT_2;
        let mut hits = 0usize;
        for k in 0..cells {
            let zq = Complex64::from_polar(u, a0 + (k as f64 + 0.5) * ha);
            let dz = (zq - zp).norm_sqr();
            if dz >= rho * rho {
                continue;
            }
            for l in 0..cells {
                let wq = Complex64::from_polar(u, b0 + (l as f64 + 0.5) * hb);
                if dz + (wq - wp).norm_sqr() < rho * rho {
                    hits += 1;
                }
            }
        }
        0.5 * t * t * hits as f64
    });
    Ok(rows.into_iter().sum::<f64>() * ht * ha * hb)
}

/// Comparison of the dilation law `σ(B_ρ(p) ∩ bT_∞) = ρ³ f(|p|/ρ)` with
/// [`sigma_ball_tinf_direct`] on random cone centers and radii.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DilationReport {
    pub n_cases: usize,
    pub cells: usize,
    pub max_rel_diff: f64,
    pub worst: (PolarPoint, f64),
}

/// Case number `index`: `|p|` uniform in `[0, 2]`, random angles, and `ρ`
/// log-uniform in `[0.05, 2]`.
fn dilation_case(seed: u64, index: u64) -> (PolarPoint, f64) {
    let mut rng = rng_for(seed, index);
    let m = rng.gen_range(0.0..2.0) / SQRT_2;
    let p = PolarPoint::new(m, rng.gen_range(-PI..PI), m, rng.gen_range(-PI..PI));
    let rho = 10f64.powf(rng.gen_range((0.05f64).log10()..(2.0f64).log10()));
    (p, rho)
}

pub fn dilation_check(n_cases: usize, seed: u64, spec: &QuadratureSpec, cells: usize) -> Result<DilationReport> {
    if n_cases == 0 || cells == 0 {
        return Err(invalid("dilation check needs at least one case and one cell"));
    }
    let mut report = DilationReport {
        n_cases,
        cells,
        max_rel_diff: 0.0,
        worst: (PolarPoint::default(), 0.0),
    };
    for i in 0..n_cases {
        let (p, rho) = dilation_case(seed, i as u64);
        let scaled = sigma_ball_tinf(&p, rho, spec)?;
        let direct = sigma_ball_tinf_direct(&p, rho, cells)?;
        let rel = (scaled - direct).abs() / scaled;
        if rel > report.max_rel_diff {
            report.max_rel_diff = rel;
            report.worst = (p, rho);
        }
    }
    Ok(report)
}

/// Area of `{|z − d| < R} ∩ {|z| < 1}` for center offset `d ≥ 0`.
pub fn lens_area(d: f64, radius: f64) -> f64 {
    if radius <= 0.0 {
        return 0.0;
    }
    if d + radius <= 1.0 {
        return PI * radius * radius;
    }
    if d + 1.0 <= radius {
        return PI;
    }
    if d >= 1.0 + radius {
        return 0.0;
    }
    let (r1, r2) = (radius, 1.0);
    let c1 = ((d * d + r1 * r1 - r2 * r2) / (2.0 * d * r1)).clamp(-1.0, 1.0);
    let c2 = ((d * d + r2 * r2 - r1 * r1) / (2.0 * d * r2)).clamp(-1.0, 1.0);
    let k = ((-d + r1 + r2) * (d + r1 - r2) * (d - r1 + r2) * (d + r1 + r2)).max(0.0);
    r1 * r1 * c1.acos() + r2 * r2 * c2.acos() - 0.5 * k.sqrt()
}

/// Measure of `B_ρ(p) ∩ {|w| = 1, |z| < 1}` for a center rotated to `(a, b)`.
pub fn cylinder_ball_measure(a: f64, b: f64, rho: f64, cells: usize) -> f64 {
    let (a, b) = (a.abs(), b.abs());
    // |e^{iβ} − b|² = (1 − b)² + 4b sin²(β/2)
    let base = rho * rho - (1.0 - b).powi(2);
    if base <= 0.0 || cells == 0 {
        return 0.0;
    }
    let half = if b <= 0.0 || base >= 4.0 * b {
        PI
    } else {
        2.0 * (base / (4.0 * b)).sqrt().asin()
    };
    let h = 2.0 * half / cells as f64;
    let mut total = 0.0;
    for k in 0..cells {
        let beta = -half + (k as f64 + 0.5) * h;
        let sb = (0.5 * beta).sin();
        let r2 = base - 4.0 * b * sb * sb;
        if r2 > 0.0 {
            total += lens_area(a, r2.sqrt());
        }
    }
    total * h
}

/// Which stratum of `bT` a point lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stratum {
    Cone,
    Cylinder,
}

pub fn stratum_of(p: &PolarPoint) -> Result<Stratum> {
    if (p.r - p.s).abs() <= ON_BOUNDARY_TOL && p.s <= 1.0 + ON_BOUNDARY_TOL {
        Ok(Stratum::Cone)
    } else if (p.s - 1.0).abs() <= ON_BOUNDARY_TOL && p.r <= 1.0 + ON_BOUNDARY_TOL {
        Ok(Stratum::Cylinder)
    } else {
        Err(invalid(format!("{p:?} is not on bT")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallMeasure {
    pub cone: f64,
    pub cylinder: f64,
}

impl BallMeasure {
    pub fn total(&self) -> f64 {
        self.cone + self.cylinder
    }
}

/// `σ(B_ρ(p) ∩ bT)`, split into the cone part `|z| = |w| ≤ 1` and the
/// cylinder part `|w| = 1`.
pub fn sigma_ball_bt(p: &PolarPoint, rho: f64, spec: &QuadratureSpec) -> Result<BallMeasure> {
    stratum_of(p)?;
    if !(rho > 0.0 && rho <= DIAM_T) {
        return Err(invalid(format!("radius must lie in (0, 2√2], got {rho}")));
    }
    let n = spec.level;
    Ok(BallMeasure {
        cone: cone_ball_measure(p.r, p.s, rho, SQRT_2, n),
        cylinder: cylinder_ball_measure(p.r, p.s, rho, n),
    })
}

/// Acceptance window for `σ/ρ³` in an ADR scan. Regularity fixes no numeric
/// constant, so the window is a configured convention.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdrWindow {
    pub lo: f64,
    pub hi: f64,
}

impl Default for AdrWindow {
    fn default() -> Self {
        Self { lo: 0.3, hi: 30.0 }
    }
}

/// Largest allowed ratio between `σ/ρ³` at `ρ` and at `ρ/2`.
pub const MAX_HALVING_FACTOR: f64 = 16.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdrSample {
    pub center: PolarPoint,
    pub stratum: Stratum,
    pub rho: f64,
    pub sigma: f64,
    pub ratio: f64,
    /// `σ(B_{ρ/2}(p))/(ρ/2)³`.
    pub ratio_half: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdrReport {
    pub samples: Vec<AdrSample>,
    pub min_ratio: f64,
    pub max_ratio: f64,
    /// Largest of `ratio/ratio_half` and its inverse.
    pub max_halving_factor: f64,
    pub window: AdrWindow,
    pub pass: bool,
}

/// Center number `index`: even indices on the cone, odd on the cylinder.
pub fn sample_boundary_center(seed: u64, index: u64) -> PolarPoint {
    let mut rng = rng_for(seed, index);
    let alpha = rng.gen_range(-PI..PI);
    let beta = rng.gen_range(-PI..PI);
    if index.is_multiple_of(2) {
        let t: f64 = rng.gen_range(0.0..SQRT_2);
        let m = t / SQRT_2;
        PolarPoint::new(m, alpha, m, beta)
    } else {
        // uniform in the unit disk for z
        let r = rng.gen::<f64>().sqrt();
        PolarPoint::new(r, alpha, 1.0, beta)
    }
}

/// Tabulates `σ(B_ρ(p) ∩ bT)/ρ³` for `n_centers` boundary centers and every
/// radius in `rho_set`, together with the value at `ρ/2`.
pub fn adr_scan(
    n_centers: usize,
    rho_set: &[f64],
    seed: u64,
    spec: &QuadratureSpec,
    window: AdrWindow,
) -> Result<AdrReport> {
    if n_centers == 0 {
        return Err(invalid("n_centers must be at least 1"));
    }
    if let Some(bad) = rho_set.iter().find(|r| !(**r > 0.0 && **r <= DIAM_T)) {
        return Err(invalid(format!("radius {bad} outside (0, 2√2]")));
    }
    let cells: Vec<(usize, f64)> = (0..n_centers)
        .flat_map(|i| rho_set.iter().map(move |&r| (i, r)))
        .collect();
    let samples = exec::map_slice(&cells, |&(i, rho)| -> Result<AdrSample> {
        let center = sample_boundary_center(seed, i as u64);
        let sigma = sigma_ball_bt(&center, rho, spec)?.total();
        let half = sigma_ball_bt(&center, 0.5 * rho, spec)?.total();
        Ok(AdrSample {
            center,
            stratum: stratum_of(&center)?,
            rho,
            sigma,
            ratio: sigma / rho.powi(3),
            ratio_half: half / (0.5 * rho).powi(3),
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let mut min_ratio = f64::INFINITY;
    let mut max_ratio: f64 = 0.0;
    let mut max_halving: f64 = 1.0;
    for s in &samples {
        for v in [s.ratio, s.ratio_half] {
            min_ratio = min_ratio.min(v);
            max_ratio = max_ratio.max(v);
        }
        let q = s.ratio / s.ratio_half;
        max_halving = max_halving.max(q).max(1.0 / q);
    }
    let pass =
        min_ratio >= window.lo && max_ratio <= window.hi && max_halving <= MAX_HALVING_FACTOR && min_ratio.is_finite();
    Ok(AdrReport {
        samples,
        min_ratio,
        max_ratio,
        max_halving_factor: max_halving,
        window,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_at_zero() {
        let f0 = f_profile(0.0, &QuadratureSpec::new(400)).unwrap();
        assert!((f0 - PROFILE_AT_ZERO).abs() / PROFILE_AT_ZERO < 1e-4, "{f0}");
        assert!(f_profile(-1.0, &QuadratureSpec::new(10)).is_err());
    }

    #[test]
    fn lens_area_limits() {
        assert!((lens_area(0.0, 0.5) - PI * 0.25).abs() < 1e-15);
        assert!((lens_area(0.2, 3.0) - PI).abs() < 1e-15);
        assert_eq!(lens_area(2.5, 1.0), 0.0);
        // two unit circles at distance 1: 2π/3 − √3/2
        let expect = 2.0 * PI / 3.0 - 3f64.sqrt() / 2.0;
        assert!((lens_area(1.0, 1.0) - expect).abs() < 1e-12);
    }

    #[test]
    fn off_boundary_centers_are_rejected() {
        let spec = QuadratureSpec::new(20);
        let p = PolarPoint::new(0.2, 0.0, 0.5, 0.0);
        assert!(sigma_ball_tinf(&p, 0.1, &spec).is_err());
        assert!(sigma_ball_bt(&p, 0.1, &spec).is_err());
        let q = PolarPoint::new(0.5, 0.0, 0.5, 0.0);
        assert!(sigma_ball_bt(&q, 3.0, &spec).is_err());
        assert!(sigma_ball_bt(&q, 0.0, &spec).is_err());
    }

    #[test]
    fn origin_ball_has_no_cylinder_part() {
        let spec = QuadratureSpec::new(300);
        let o = PolarPoint::new(0.0, 0.0, 0.0, 0.0);
        for rho in [0.3, 0.8, 1.0] {
            let m = sigma_ball_bt(&o, rho, &spec).unwrap();
            assert_eq!(m.cylinder, 0.0);
            let f0 = f_profile(0.0, &spec).unwrap();
            assert!((m.total() - rho.powi(3) * f0).abs() < 1e-12);
        }
    }

    #[test]
    fn cylinder_lower_bound() {
        let spec = QuadratureSpec::new(300);
        let p = PolarPoint::new(0.0, 0.0, 1.0, 0.0);
        for rho in [0.01, 0.05, 0.2] {
            let m = sigma_ball_bt(&p, rho, &spec).unwrap();
            let bound = 0.5 * PI * (rho / SQRT_2).powi(2) * (2.0 * rho / (2.0 * SQRT_2));
            assert!(m.total() >= bound, "rho {rho}: {} < {bound}", m.total());
            assert_eq!(m.cone, 0.0);
            // small balls on a flat piece: (4/3)πρ³
            assert!((m.total() / rho.powi(3) - PROFILE_LIMIT).abs() < 0.05);
        }
    }
}
