//! The approximation families behind the identity of weak and strong `∂̄` on
//! functions.
//!
//! # The `u_δ` family
//!
//! For `u = v_{j,−1} = z^j w^{−j−1}` and `0 < δ ≤ 1`, set `φ_δ(s) = (s/δ)^δ` for
//! `s < δ` and `φ_δ = 1` otherwise, and `u_δ = φ_δ(|w|) u`. Since `u` is
//! holomorphic and `∂|w|/∂w̄ = w/(2|w|)`,
//!
//! ```text
//! ∂̄u_δ = u φ_δ'(s) w/(2s) dw̄ = u (δ/2) (s/δ)^δ / w̄ dw̄      (s < δ),
//! |∂̄u_δ| = ½ (s/δ)^{δ−1} |u|.
//! ```
//!
//! Integrating, `‖∂̄u_δ‖² = π²δ / (4(j+1))`, so `‖∂̄u_δ‖ = √δ ‖∂̄u₁‖`, which
//! tends to zero with `δ`.
//!
//! Near `s = 0` these integrands behave like `s^{2δ−1}`, so for small `δ` a
//! fixed fraction of the mass sits at radii far below the smallest `f64`.
//! Integrals over `T_δ` are therefore taken in the variables `y = (s/δ)^δ`,
//! `t = r/s`, in which the integrands are polynomials in `y`.
//!
//! # The cutoff `χ_δ`
//!
//! `χ_δ(p) = S((|p| − δ)/δ)` with the quintic smoothstep
//! `S(x) = 10x³ − 15x⁴ + 6x⁵` on `[0, 1]`. `S` is `C²`, `max S' = S'(½) = 15/8`,
//! hence `|dχ_δ| ≤ (15/8)/δ`. For a radial function `|∂̄χ| = |dχ|/2`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};
use crate::exec;
pub use crate::numerics::grows_under_refinement;
use crate::numerics::{
    gauss_legendre_unit, integrate_shell_t, integrate_t_region, periodic_nodes, PolarPoint, QuadratureSpec, TRegion,
};

/// `u = v_{j,−1}` and its interpolant `u_δ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaFamilySpec {
    pub j: u32,
    pub delta: f64,
}

impl DeltaFamilySpec {
    pub fn new(j: u32, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(invalid(format!("delta must lie in (0, 1], got {delta}")));
        }
        Ok(Self { j, delta })
    }

    fn weight(&self, s: f64) -> (f64, f64) {
        if s < self.delta {
            let x = s / self.delta;
            (x.powf(self.delta), x.powf(self.delta - 1.0))
        } else {
            (1.0, 0.0)
        }
    }
}

/// `v_{j,−1}(p) = z^j w^{−j−1}`.
pub fn u_eval(j: u32, p: &PolarPoint) -> Complex64 {
    let jf = j as f64;
    Complex64::from_polar(
        p.r.powi(j as i32) * p.s.powi(-(j as i32) - 1),
        jf * p.alpha - (jf + 1.0) * p.beta,
    )
}

pub fn u_delta_eval(spec: &DeltaFamilySpec, p: &PolarPoint) -> Complex64 {
    spec.weight(p.s).0 * u_eval(spec.j, p)
}

/// Wirtinger derivatives `(∂_z, ∂_z̄, ∂_w, ∂_w̄)` of `u_δ`, closed form.
pub fn wirtinger_u_delta(spec: &DeltaFamilySpec, p: &PolarPoint) -> [Complex64; 4] {
    let (z, w) = p.to_cartesian();
    let j = spec.j as i32;
    let u = u_eval(spec.j, p);
    let (phi, dphi) = spec.weight(p.s);
    let uz = if j == 0 {
        Complex64::new(0.0, 0.0)
    } else {
        z.powi(j - 1) * w.powi(-j - 1) * j as f64
    };
    let uw = -(j as f64 + 1.0) * u / w;
    let half = dphi / (2.0 * p.s);
    [
        phi * uz,
        Complex64::new(0.0, 0.0),
        phi * uw + u * half * w.conj(),
        u * half * w,
    ]
}

/// `|du_δ|² = 2 Σ (|∂_{z_i} u_δ|² + |∂_{z̄_i} u_δ|²)`, the real gradient squared.
pub fn grad_sq_u_delta(spec: &DeltaFamilySpec, p: &PolarPoint) -> f64 {
    2.0 * wirtinger_u_delta(spec, p).iter().map(|c| c.norm_sqr()).sum::<f64>()
}

/// `∫_{T_δ} F dV` for integrands of the form `F = s^{−2}·|x^δ G(t, α, β)|²`
/// with `x = s/δ`, `t = r/s`.
///
/// With `y = x^δ` the measure `s³t ds dt dα dβ` turns `F dV` into a
/// polynomial weight in `y`, so the integrand never has to be formed at the
/// possibly unrepresentable radius `s`. The caller supplies
/// the reduced density `h(y, q)` at the unit point `q = (t, α, 1, β)`, already
/// multiplied by every Jacobian factor except the tensor weights.
fn integrate_t_delta<H>(h: H, y_nodes: usize, quad: &QuadratureSpec) -> Result<f64>
where
    H: Fn(f64, &PolarPoint) -> f64 + Sync + Send,
{
    let n = quad.level;
    let (y, wy) = gauss_legendre_unit(y_nodes)?;
    let (t, wt) = gauss_legendre_unit(n)?;
    let angles = periodic_nodes(n);
    let hh = (2.0 * PI / n as f64).powi(2);
    let rows = exec::map_indexed(y_nodes * n, |idx| -> Result<f64> {
        let (i, k) = (idx / n, idx % n);
        let mut acc = 0.0;
        for &alpha in &angles {
            for &beta in &angles {
                let q = PolarPoint {
                    r: t[k],
                    alpha,
                    s: 1.0,
                    beta,
                };
                let v = h(y[i], &q);
                if !v.is_finite() {
                    return Err(Error::NonFinite {
                        point: q,
                        value: v.to_string(),
                    });
                }
                acc += v;
            }
        }
        Ok(acc * wy[i] * wt[k] * hh)
    });
    rows.into_iter().sum()
}

/// Wirtinger vector rescaled to `C = s²·x^{−δ}·(∂u_δ)`, which depends only on
/// `t` and the angles; computed from the closed form at `s = δ/2`.
fn rescaled_wirtinger(spec: &DeltaFamilySpec, q: &PolarPoint) -> [Complex64; 4] {
    let s_ref = 0.5 * spec.delta;
    let p = PolarPoint {
        r: q.r * s_ref,
        alpha: q.alpha,
        s: s_ref,
        beta: q.beta,
    };
    let scale = s_ref * s_ref / 0.5f64.powf(spec.delta);
    wirtinger_u_delta(spec, &p).map(|c| c * scale)
}

/// `‖∂̄u_δ‖_{L²(T)}`, by quadrature of the closed-form `∂̄u_δ` over `T_δ`.
///
/// With `y = (s/δ)^δ` one has `s^{−4} x^{2δ} s³ t ds = (t y / δ) dy`.
pub fn dbar_u_delta_norm(spec: &DeltaFamilySpec, quad: &QuadratureSpec) -> Result<f64> {
    let d = spec.delta;
    let v = integrate_t_delta(
        |y, q| {
            let c = rescaled_wirtinger(spec, q);
            (c[1].norm_sqr() + c[3].norm_sqr()) * q.r * y / d
        },
        quad.level,
        quad,
    )?;
    Ok(v.sqrt())
}

/// Exact `‖∂̄u_δ‖ = (π/2) √(δ/(j+1))`.
pub fn dbar_u_delta_norm_exact(spec: &DeltaFamilySpec) -> f64 {
    0.5 * std::f64::consts::PI * (spec.delta / (spec.j as f64 + 1.0)).sqrt()
}

/// `‖u_δ − u‖_{L²(T)}`; the difference is supported in `T_δ`.
///
/// Here `|u_δ − u|² dV = (1 − y)² |u(q)|² t δ y^{2/δ−1} dy dt dα dβ`, a
/// polynomial of degree `2/δ + 1` in `y`, integrated exactly.
pub fn l2_gap(spec: &DeltaFamilySpec, quad: &QuadratureSpec) -> Result<f64> {
    let d = spec.delta;
    let y_nodes = quad.level.max((1.0 / d).ceil() as usize + 2);
    let v = integrate_t_delta(
        |y, q| (1.0 - y).powi(2) * u_eval(spec.j, q).norm_sqr() * q.r * d * y.powf(2.0 / d - 1.0),
        y_nodes,
        quad,
    )?;
    Ok(v.sqrt())
}

/// Dirichlet energy `‖du_δ‖²`, split at `s = δ`.
pub fn dirichlet_energy_u_delta(spec: &DeltaFamilySpec, quad: &QuadratureSpec) -> Result<f64> {
    let d = spec.delta;
    let mut total = integrate_t_delta(
        |y, q| {
            let c = rescaled_wirtinger(spec, q);
            2.0 * c.iter().map(|c| c.norm_sqr()).sum::<f64>() * q.r * y / d
        },
        quad.level,
        quad,
    )?;
    if d < 1.0 {
        let f = |p: &PolarPoint| Complex64::new(grad_sq_u_delta(spec, p), 0.0);
        total += integrate_t_region(f, quad, &TRegion::new(d, 1.0, 1.0)?)?.re;
    }
    Ok(total)
}

/// Dirichlet energy of `u = v_{j,−1}` itself over `T`, at one quadrature
/// level. The exact value is infinite; the estimates grow without bound as
/// the level is refined.
pub fn dirichlet_energy_u(j: u32, quad: &QuadratureSpec) -> Result<f64> {
    let v = integrate_t_region(
        |p| {
            let (z, w) = p.to_cartesian();
            let ji = j as i32;
            let uz = if j == 0 {
                Complex64::new(0.0, 0.0)
            } else {
                z.powi(ji - 1) * w.powi(-ji - 1) * j as f64
            };
            let uw = -(j as f64 + 1.0) * u_eval(j, p) / w;
            Complex64::new(2.0 * (uz.norm_sqr() + uw.norm_sqr()), 0.0)
        },
        quad,
        &TRegion::FULL,
    )?;
    Ok(v.re)
}

/// `max_x S'(x) = S'(½) = 15/8`.
pub const SMOOTHSTEP_SLOPE: f64 = 15.0 / 8.0;

pub fn smoothstep(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * x * (10.0 + x * (-15.0 + 6.0 * x))
}

pub fn smoothstep_slope(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    30.0 * x * x * (1.0 - x) * (1.0 - x)
}

/// `χ_δ(p)`: zero on `B_δ(0)`, one outside `B_{2δ}(0)`.
pub fn chi_delta(delta: f64, p: &PolarPoint) -> f64 {
    smoothstep((p.norm() - delta) / delta)
}

/// Real gradient of `χ_δ` in `(Re z, Im z, Re w, Im w)`.
pub fn dchi_delta(delta: f64, p: &PolarPoint) -> [f64; 4] {
    let rho = p.norm();
    let slope = smoothstep_slope((rho - delta) / delta) / delta;
    if slope == 0.0 {
        return [0.0; 4];
    }
    let x = p.to_real4();
    x.map(|c| slope * c / rho)
}

/// `|∂̄χ_δ|(p) = |χ'(|p|)| / 2`.
pub fn dbar_chi_abs(delta: f64, p: &PolarPoint) -> f64 {
    0.5 * smoothstep_slope((p.norm() - delta) / delta) / delta
}

/// Both sides of
/// `∫_T |∂̄χ_δ|²|f|² ≤ (∫_{B_{2δ}∩T} |∂̄χ_δ|⁴)^{1/2} (∫_{B_{2δ}∩T} |f|⁴)^{1/2}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffCheck {
    pub delta: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub first_factor: f64,
    pub second_factor: f64,
}

impl CutoffCheck {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs
    }
}

fn check_cutoff_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta <= 0.5) {
        return Err(invalid(format!("cutoff scale must lie in (0, 1/2], got {delta}")));
    }
    Ok(())
}

/// `‖(∂̄χ_δ) f‖²_{L²(T)}`; the integrand lives on the shell `δ < |p| < 2δ`.
pub fn cutoff_lhs<F>(f: F, delta: f64, quad: &QuadratureSpec) -> Result<f64>
where
    F: Fn(&PolarPoint) -> Complex64 + Sync + Send,
{
    check_cutoff_delta(delta)?;
    let v = integrate_shell_t(
        |p| Complex64::new(dbar_chi_abs(delta, p).powi(2) * f(p).norm_sqr(), 0.0),
        delta,
        2.0 * delta,
        quad,
    )?;
    Ok(v.re)
}

/// `(∫_{B_{2δ}∩T} |∂̄χ_δ|⁴)^{1/2}`.
pub fn cutoff_first_factor(delta: f64, quad: &QuadratureSpec) -> Result<f64> {
    check_cutoff_delta(delta)?;
    let v = integrate_shell_t(
        |p| Complex64::new(dbar_chi_abs(delta, p).powi(4), 0.0),
        delta,
        2.0 * delta,
        quad,
    )?;
    Ok(v.re.sqrt())
}

/// Evaluates both sides of the Cauchy–Schwarz bound. When `f` is not in `L⁴`
/// near the origin, detected as unbounded growth of `∫_{B_{2δ}∩T}|f|⁴` across
/// three refinement levels, the second factor and `rhs` are `+∞` and the
/// inequality holds trivially.
pub fn cutoff_commutator_check<F>(f: F, delta: f64, quad: &QuadratureSpec) -> Result<CutoffCheck>
where
    F: Fn(&PolarPoint) -> Complex64 + Sync + Send,
{
    check_cutoff_delta(delta)?;
    let l4 = |level: usize| -> Result<f64> {
        let q = quad.with_level(level.max(4));
        let v = integrate_shell_t(|p| Complex64::new(f(p).norm_sqr().powi(2), 0.0), 0.0, 2.0 * delta, &q)?;
        Ok(v.re)
    };
    let estimates = [l4(quad.level / 4)?, l4(quad.level / 2)?, l4(quad.level)?];
    let second = if grows_under_refinement(&estimates) {
        f64::INFINITY
    } else {
        estimates[2].sqrt()
    };
    let lhs = cutoff_lhs(&f, delta, quad)?;
    let first = cutoff_first_factor(delta, quad)?;
    Ok(CutoffCheck {
        delta,
        lhs,
        rhs: first * second,
        first_factor: first,
        second_factor: second,
    })
}

/// True when `∫_{B_{2δ}∩T}|f|⁴` stays bounded under refinement.
pub fn is_l4_near_origin(check: &CutoffCheck) -> bool {
    check.second_factor.is_finite()
}
