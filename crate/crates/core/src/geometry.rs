//! Boundary distances for `T` and `T_∞`, the explicit connecting curves that
//! make both uniform domains, and a sampling certifier for the two uniformity
//! inequalities
//!
//! ```text
//! ℓ(γ) ≤ c |p₁ − p₂|,      min{|p − p₁|, |p − p₂|} ≤ c dist(p, b·)  (p ∈ γ).
//! ```
//!
//! A curve is `p₁ → q₁` (segment), `q₁ → q₂` (arc with constant radii and
//! affinely varying angles), `q₂ → p₂` (segment). The segments are radial in
//! both coordinates, so `|w| − |z|` changes linearly along them.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::exec;
use crate::numerics::{normalize_angle, rng_for, sample_t_one, PolarPoint};

/// Uniformity constant established for `T_∞` (`5 + 2π < 12`).
pub const T_INF_CONSTANT: f64 = 12.0;

/// Uniformity constant established for `T` (`(1+4√2)(5+2π+4√2)/√2 < 80`).
pub const T_CONSTANT: f64 = 80.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Domain {
    #[serde(rename = "T")]
    T,
    #[serde(rename = "T_infinity")]
    TInfinity,
}

impl Domain {
    pub fn constant(self) -> f64 {
        match self {
            Domain::T => T_CONSTANT,
            Domain::TInfinity => T_INF_CONSTANT,
        }
    }

    pub fn contains(self, p: &PolarPoint) -> bool {
        match self {
            Domain::T => p.in_t(),
            Domain::TInfinity => p.in_t_inf(),
        }
    }

    /// Distance to the boundary by the closed-form formula; negative or zero
    /// outside the domain.
    fn boundary_distance(self, p: &PolarPoint) -> f64 {
        match self {
            Domain::T => ((p.s - p.r) / SQRT_2).min(1.0 - p.s),
            Domain::TInfinity => (p.s - p.r) / SQRT_2,
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Domain::T => "T",
            Domain::TInfinity => "T_infinity",
        })
    }
}

impl FromStr for Domain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "T" | "t" => Ok(Domain::T),
            "T_infinity" | "Tinf" | "T_inf" | "tinf" => Ok(Domain::TInfinity),
            other => Err(invalid(format!("unknown domain {other:?}"))),
        }
    }
}

/// `dist(p, bT_∞) = |s − r| / √2`.
pub fn dist_b_tinf(p: &PolarPoint) -> f64 {
    (p.s - p.r).abs() / SQRT_2
}

/// `dist(p, bT) = min{(s − r)/√2, 1 − s}` for `p ∈ T`.
pub fn dist_b_t(p: &PolarPoint) -> Result<f64> {
    if !p.in_t() {
        return Err(invalid(format!("point {p:?} is not in T")));
    }
    Ok(Domain::T.boundary_distance(p))
}

/// Left-hand side of the polar distance inequality,
/// `|r₁−r₂| + |s₁−s₂| + min(r)|α₁−α₂| + min(s)|β₁−β₂|`, with both angle
/// differences reduced to `[0, π]`. It never exceeds `3|p₁ − p₂|`.
pub fn polar_lhs(p1: &PolarPoint, p2: &PolarPoint) -> f64 {
    let da = normalize_angle(p1.alpha - p2.alpha).abs();
    let db = normalize_angle(p1.beta - p2.beta).abs();
    (p1.r - p2.r).abs() + (p1.s - p2.s).abs() + p1.r.min(p2.r) * da + p1.s.min(p2.s) * db
}

/// Arc `t ↦ (r e^{i(α₀ + t Δα)}, s e^{i(β₀ + t Δβ)})`, `t ∈ [0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Arc {
    pub r: f64,
    pub s: f64,
    pub alpha0: f64,
    pub beta0: f64,
    pub dalpha: f64,
    pub dbeta: f64,
}

impl Arc {
    pub fn point(&self, t: f64) -> PolarPoint {
        PolarPoint::new(
            self.r,
            self.alpha0 + t * self.dalpha,
            self.s,
            self.beta0 + t * self.dbeta,
        )
    }

    pub fn length(&self) -> f64 {
        (self.r * self.dalpha).hypot(self.s * self.dbeta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Piece {
    First,
    Arc,
    Last,
}

/// Piecewise curve `p1 → q1 → (arc) → q2 → p2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub p1: PolarPoint,
    pub q1: PolarPoint,
    pub arc: Arc,
    pub q2: PolarPoint,
    pub p2: PolarPoint,
}

fn lerp(a: &PolarPoint, b: &PolarPoint, t: f64) -> PolarPoint {
    let (za, wa) = a.to_cartesian();
    let (zb, wb) = b.to_cartesian();
    PolarPoint::from_cartesian(za + (zb - za) * t, wa + (wb - wa) * t)
}

impl Curve {
    /// Closed-form length `|p₁−q₁| + √(r²Δα² + s²Δβ²) + |q₂−p₂|`.
    pub fn length(&self) -> f64 {
        self.p1.dist(&self.q1) + self.arc.length() + self.q2.dist(&self.p2)
    }

    pub fn point(&self, piece: Piece, t: f64) -> PolarPoint {
        match piece {
            Piece::First => lerp(&self.p1, &self.q1, t),
            Piece::Arc => self.arc.point(t),
            Piece::Last => lerp(&self.q2, &self.p2, t),
        }
    }

    /// `n` equally spaced parameters per piece, endpoints included.
    pub fn samples(&self, n: usize) -> Vec<PolarPoint> {
        let n = n.max(2);
        let mut out = Vec::with_capacity(3 * n);
        for piece in [Piece::First, Piece::Arc, Piece::Last] {
            for k in 0..n {
                out.push(self.point(piece, k as f64 / (n - 1) as f64));
            }
        }
        out
    }

    /// Length of the inscribed polyline through `samples(n)`.
    pub fn polyline_length(&self, n: usize) -> f64 {
        let pts = self.samples(n);
        pts.windows(2).map(|w| w[0].dist(&w[1])).sum()
    }

    /// Largest mismatch between consecutive pieces' shared endpoints.
    pub fn endpoint_mismatch(&self) -> f64 {
        let a = self.point(Piece::First, 1.0).dist(&self.arc.point(0.0));
        let b = self.arc.point(1.0).dist(&self.point(Piece::Last, 0.0));
        a.max(b)
    }
}

fn check_pair(domain: Domain, p1: &PolarPoint, p2: &PolarPoint) -> Result<f64> {
    for p in [p1, p2] {
        if !domain.contains(p) {
            return Err(invalid(format!("point {p:?} is not in {domain}")));
        }
    }
    let d = p1.dist(p2);
    if d == 0.0 {
        return Err(invalid("endpoints coincide"));
    }
    Ok(d)
}

fn build(p1: &PolarPoint, p2: &PolarPoint, d: f64, shrink: f64) -> Curve {
    let r_low = p1.r.min(p2.r) * shrink;
    let s_high = (p1.s.max(p2.s) + d) * shrink;
    let dalpha = normalize_angle(p2.alpha - p1.alpha);
    let dbeta = normalize_angle(p2.beta - p1.beta);
    let arc = Arc {
        r: r_low,
        s: s_high,
        alpha0: p1.alpha,
        beta0: p1.beta,
        dalpha,
        dbeta,
    };
    Curve {
        p1: *p1,
        q1: arc.point(0.0),
        arc,
        q2: arc.point(1.0),
        p2: *p2,
    }
}

/// Curve in `T_∞` joining `p1` and `p2`: arc radii `r_* = min(r₁, r₂)` and
/// `s* = max(s₁, s₂) + |p₁ − p₂|`.
pub fn connect_tinf(p1: &PolarPoint, p2: &PolarPoint) -> Result<Curve> {
    let d = check_pair(Domain::TInfinity, p1, p2)?;
    Ok(build(p1, p2, d, 1.0))
}

/// Curve in `T`: the `T_∞` arc shrunk by `1/(1 + 2|p₁ − p₂|)`, then joined
/// radially to the endpoints.
pub fn connect_t(p1: &PolarPoint, p2: &PolarPoint) -> Result<Curve> {
    let d = check_pair(Domain::T, p1, p2)?;
    Ok(build(p1, p2, d, 1.0 / (1.0 + 2.0 * d)))
}

pub fn connect(domain: Domain, p1: &PolarPoint, p2: &PolarPoint) -> Result<Curve> {
    match domain {
        Domain::T => connect_t(p1, p2),
        Domain::TInfinity => connect_tinf(p1, p2),
    }
}

/// Observed ratios for one curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveRatios {
    pub length_ratio: f64,
    pub dist_ratio: f64,
    /// Smallest boundary distance over the sampled curve points.
    pub min_boundary_distance: f64,
}

pub fn curve_ratios(domain: Domain, curve: &Curve, n_curve_samples: usize) -> CurveRatios {
    let chord = curve.p1.dist(&curve.p2);
    let mut dist_ratio: f64 = 0.0;
    let mut min_bd = f64::INFINITY;
    for p in curve.samples(n_curve_samples) {
        let bd = domain.boundary_distance(&p);
        min_bd = min_bd.min(bd);
        let near = p.dist(&curve.p1).min(p.dist(&curve.p2));
        let ratio = if bd > 0.0 { near / bd } else { f64::INFINITY };
        dist_ratio = dist_ratio.max(ratio);
    }
    CurveRatios {
        length_ratio: curve.length() / chord,
        dist_ratio,
        min_boundary_distance: min_bd,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformityReport {
    pub domain: Domain,
    pub n_pairs: usize,
    pub n_curve_samples: usize,
    pub seed: u64,
    pub max_length_ratio: f64,
    pub max_dist_ratio: f64,
    pub min_boundary_distance: f64,
    pub worst_length_pair: (PolarPoint, PolarPoint),
    pub worst_dist_pair: (PolarPoint, PolarPoint),
    pub paper_constant: f64,
    pub pass: bool,
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    10f64.powf(rng.gen_range(lo..hi))
}

fn random_angle(rng: &mut ChaCha8Rng) -> f64 {
    rng.gen_range(-PI..PI)
}

/// Pushes `p` toward the boundary of `domain` by a log-uniform amount.
fn hug_boundary(domain: Domain, p: PolarPoint, rng: &mut ChaCha8Rng) -> PolarPoint {
    let eta = log_uniform(rng, -6.0, 0.0);
    if domain == Domain::T && rng.gen_bool(0.5) {
        let s = 1.0 - (1.0 - p.s) * eta;
        PolarPoint { s, ..p }
    } else {
        PolarPoint {
            r: p.s * (1.0 - eta),
            ..p
        }
    }
}

/// Draws pair number `index` of a uniformity scan. Pairs cycle through four
/// families: independent uniform points, close pairs, boundary-hugging pairs
/// and multi-scale pairs.
pub fn sample_pair(domain: Domain, seed: u64, index: u64) -> (PolarPoint, PolarPoint) {
    let mut rng = rng_for(seed, index);
    loop {
        let p1 = sample_t_one(&mut rng);
        let p2 = match index % 4 {
            0 => sample_t_one(&mut rng),
            1 => {
                let eps = log_uniform(&mut rng, -4.0, -0.5);
                let mut x = p1.to_real4();
                let dir: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
                let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
                for i in 0..4 {
                    x[i] += eps * dir[i] / norm;
                }
                PolarPoint::from_real4(x)
            }
            2 => {
                let q = sample_t_one(&mut rng);
                let q = hug_boundary(domain, q, &mut rng);
                let p = hug_boundary(domain, p1, &mut rng);
                if domain.contains(&p) && domain.contains(&q) && p.dist(&q) > 0.0 {
                    return (p, q);
                }
                continue;
            }
            _ => {
                let q = sample_t_one(&mut rng);
                match domain {
                    Domain::TInfinity => q.scaled(log_uniform(&mut rng, -3.0, 3.0)),
                    Domain::T => {
                        let f = log_uniform(&mut rng, -4.0, 0.0);
                        let q = q.scaled(f);
                        PolarPoint::new(q.r, random_angle(&mut rng), q.s, q.beta)
                    }
                }
            }
        };
        if domain.contains(&p2) && p1.dist(&p2) > 0.0 {
            return (p1, p2);
        }
    }
}

/// Samples `n_pairs` point pairs, builds the connecting curves and records
/// the largest length and distance ratios.
pub fn verify_uniform(domain: Domain, n_pairs: usize, n_curve_samples: usize, seed: u64) -> Result<UniformityReport> {
    if n_pairs == 0 {
        return Err(invalid("n_pairs must be at least 1"));
    }
    if n_curve_samples < 2 {
        return Err(invalid("n_curve_samples must be at least 2"));
    }
    let per_pair = exec::map_indexed(n_pairs, |i| -> Result<_> {
        let (p1, p2) = sample_pair(domain, seed, i as u64);
        let curve = connect(domain, &p1, &p2)?;
        Ok((p1, p2, curve_ratios(domain, &curve, n_curve_samples)))
    });

    let mut report = UniformityReport {
        domain,
        n_pairs,
        n_curve_samples,
        seed,
        max_length_ratio: 0.0,
        max_dist_ratio: 0.0,
        min_boundary_distance: f64::INFINITY,
        worst_length_pair: Default::default(),
        worst_dist_pair: Default::default(),
        paper_constant: domain.constant(),
        pass: false,
    };
    for item in per_pair {
        let (p1, p2, ratios) = item?;
        if ratios.length_ratio > report.max_length_ratio {
            report.max_length_ratio = ratios.length_ratio;
            report.worst_length_pair = (p1, p2);
        }
        if ratios.dist_ratio > report.max_dist_ratio {
            report.max_dist_ratio = ratios.dist_ratio;
            report.worst_dist_pair = (p1, p2);
        }
        report.min_boundary_distance = report.min_boundary_distance.min(ratios.min_boundary_distance);
    }
    report.pass = report.max_length_ratio <= report.paper_constant && report.max_dist_ratio <= report.paper_constant;
    Ok(report)
}

/// Outcome of fuzzing `polar_lhs(p₁, p₂) ≤ 3|p₁ − p₂|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarLemmaReport {
    pub n_pairs: usize,
    pub seed: u64,
    pub max_ratio: f64,
    pub violations: usize,
    /// First violating pair, or the pair attaining `max_ratio`.
    pub witness: (PolarPoint, PolarPoint),
}

/// Constant of the polar distance inequality.
pub const POLAR_LEMMA_CONSTANT: f64 = 3.0;

/// Pair number `index` of the polar inequality fuzz: even indices reuse the
/// uniformity families on `T_∞`, odd ones draw Gaussian points of `C²`
/// with independent log-uniform scales.
fn fuzz_pair(seed: u64, index: u64) -> (PolarPoint, PolarPoint) {
    if index.is_multiple_of(2) {
        return sample_pair(Domain::TInfinity, seed, index);
    }
    let mut rng = rng_for(seed ^ 0x9e37_79b9_7f4a_7c15, index);
    let draw = |rng: &mut ChaCha8Rng| {
        let scale = log_uniform(rng, -3.0, 1.0);
        PolarPoint::from_real4(std::array::from_fn(|_| {
            scale * rng.sample::<f64, _>(rand_distr::StandardNormal)
        }))
    };
    (draw(&mut rng), draw(&mut rng))
}

pub fn polar_lemma_fuzz(n_pairs: usize, seed: u64) -> Result<PolarLemmaReport> {
    if n_pairs == 0 {
        return Err(invalid("n_pairs must be at least 1"));
    }
    const CHUNK: usize = 4096;
    let chunks = n_pairs.div_ceil(CHUNK);
    let partial = exec::map_indexed(chunks, |c| {
        let mut best = (0.0f64, Default::default());
        let mut violations = 0usize;
        let mut first = None;
        for i in c * CHUNK..((c + 1) * CHUNK).min(n_pairs) {
            let (p1, p2) = fuzz_pair(seed, i as u64);
            let d = p1.dist(&p2);
            if d == 0.0 {
                continue;
            }
            let ratio = polar_lhs(&p1, &p2) / d;
            if ratio > POLAR_LEMMA_CONSTANT {
                violations += 1;
                first.get_or_insert((p1, p2));
            }
            if ratio > best.0 {
                best = (ratio, (p1, p2));
            }
        }
        (best, violations, first)
    });
    let mut report = PolarLemmaReport {
        n_pairs,
        seed,
        max_ratio: 0.0,
        violations: 0,
        witness: Default::default(),
    };
    let mut first_violation = None;
    for ((ratio, pair), violations, first) in partial {
        if ratio > report.max_ratio {
            report.max_ratio = ratio;
            report.witness = pair;
        }
        report.violations += violations;
        if first_violation.is_none() {
            first_violation = first;
        }
    }
    if let Some(pair) = first_violation {
        report.witness = pair;
    }
    Ok(report)
}

impl Default for PolarPoint {
    fn default() -> Self {
        PolarPoint::new(0.0, 0.0, 0.0, 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(r: f64, s: f64) -> PolarPoint {
        PolarPoint::new(r, 0.0, s, 0.0)
    }

    #[test]
    fn boundary_distances() {
        assert!((dist_b_tinf(&pt(0.0, 1.0)) - 1.0 / SQRT_2).abs() < 1e-15);
        assert_eq!(dist_b_tinf(&pt(0.4, 0.4)), 0.0);
        assert!((dist_b_tinf(&pt(0.2, 0.6)) - 0.282_842_712_474_619).abs() < 1e-12);
        assert!((dist_b_t(&pt(0.2, 0.6)).unwrap() - 0.282_842_712_474_619).abs() < 1e-12);
        assert!((dist_b_t(&pt(0.0, 0.99)).unwrap() - 0.01).abs() < 1e-12);
        assert!(dist_b_t(&pt(0.5, 0.4)).is_err());
        assert!(dist_b_t(&pt(0.1, 1.0)).is_err());
    }

    #[test]
    fn polar_lhs_examples() {
        let p = PolarPoint::new(0.3, 1.0, 0.8, -2.0);
        assert_eq!(polar_lhs(&p, &p), 0.0);
        let a = PolarPoint::new(1.0, 0.0, 1.0, 0.0);
        let b = PolarPoint::new(1.0, PI, 1.0, 0.0);
        assert!((polar_lhs(&a, &b) - PI).abs() < 1e-12);
        assert!((a.dist(&b) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_arc_example() {
        let p1 = pt(0.0, 1.0);
        let p2 = pt(0.0, 2.0);
        let c = connect_tinf(&p1, &p2).unwrap();
        assert_eq!(c.arc.r, 0.0);
        assert_eq!(c.arc.s, 3.0);
        assert_eq!(c.arc.length(), 0.0);
        assert!((c.length() - 3.0).abs() < 1e-12);
        assert!(c.length() <= T_INF_CONSTANT * p1.dist(&p2));
    }

    #[test]
    fn coincident_or_outside_points_are_rejected() {
        let p = pt(0.1, 0.5);
        assert!(connect_tinf(&p, &p).is_err());
        assert!(connect_t(&p, &p).is_err());
        assert!(connect_tinf(&p, &pt(0.6, 0.5)).is_err());
        assert!(connect_t(&p, &pt(0.1, 1.5)).is_err());
    }

    #[test]
    fn swapping_endpoints_reverses_the_curve() {
        let p1 = PolarPoint::new(0.2, 0.4, 0.7, 2.5);
        let p2 = PolarPoint::new(0.5, -1.0, 0.6, -2.9);
        for domain in [Domain::T, Domain::TInfinity] {
            let a = connect(domain, &p1, &p2).unwrap();
            let b = connect(domain, &p2, &p1).unwrap();
            assert!((a.length() - b.length()).abs() < 1e-12);
            assert!(a.q1.dist(&b.q2) < 1e-12 && a.q2.dist(&b.q1) < 1e-12);
        }
    }

    #[test]
    fn endpoints_match_and_length_formula_agrees_with_polyline() {
        let p1 = PolarPoint::new(0.1, 3.0, 0.4, 1.0);
        let p2 = PolarPoint::new(0.35, -2.8, 0.9, -0.3);
        for domain in [Domain::T, Domain::TInfinity] {
            let c = connect(domain, &p1, &p2).unwrap();
            assert!(c.endpoint_mismatch() < 1e-12);
            assert!(c.point(Piece::First, 0.0).dist(&p1) < 1e-12);
            assert!(c.point(Piece::Last, 1.0).dist(&p2) < 1e-12);
            let poly = c.polyline_length(1 << 10);
            assert!((poly - c.length()).abs() / c.length() < 1e-6);
        }
    }

    #[test]
    fn t_curve_stays_inside() {
        let p1 = PolarPoint::new(0.0, 0.0, 0.999, 0.0);
        let p2 = PolarPoint::new(0.998, 3.0, 0.999, -3.0);
        let c = connect_t(&p1, &p2).unwrap();
        assert!(c.samples(512).iter().all(|p| p.in_t()));
    }

    #[test]
    fn report_is_deterministic() {
        let a = verify_uniform(Domain::T, 1, 16, 42).unwrap();
        let b = verify_uniform(Domain::T, 1, 16, 42).unwrap();
        assert_eq!(a, b);
        assert!(verify_uniform(Domain::T, 0, 16, 42).is_err());
        assert!(verify_uniform(Domain::T, 5, 1, 42).is_err());
    }

    #[test]
    fn domain_parsing() {
        assert_eq!("T".parse::<Domain>().unwrap(), Domain::T);
        assert_eq!("Tinf".parse::<Domain>().unwrap(), Domain::TInfinity);
        assert!("S".parse::<Domain>().is_err());
    }
}
