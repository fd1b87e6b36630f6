use std::f64::consts::{LN_2, PI};

use hartogs::dbar::{
    chi_delta, cutoff_commutator_check, cutoff_first_factor, cutoff_lhs, dbar_chi_abs, dbar_u_delta_norm,
    dbar_u_delta_norm_exact, dchi_delta, dirichlet_energy_u, dirichlet_energy_u_delta, grad_sq_u_delta,
    grows_under_refinement, is_l4_near_origin, l2_gap, smoothstep, smoothstep_slope, u_delta_eval, u_eval,
    wirtinger_u_delta, DeltaFamilySpec, SMOOTHSTEP_SLOPE,
};
use hartogs::numerics::{
    gauss_legendre_unit, integrate_t_region, rng_for, sample_t, PolarPoint, QuadratureSpec, TRegion,
};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::Rng;

fn spec(j: u32, delta: f64) -> DeltaFamilySpec {
    DeltaFamilySpec::new(j, delta).unwrap()
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// `∫₀¹ g(x) dx` by a 64-point Gauss rule.
fn gauss_1d(g: impl Fn(f64) -> f64) -> f64 {
    let (x, w) = gauss_legendre_unit(64).unwrap();
    x.iter().zip(&w).map(|(x, w)| w * g(*x)).sum()
}

/// `‖u_δ − u‖² = 2π²δ²/(j+1) · (½ − 2/(2+δ) + 1/(2+2δ))`.
fn gap_exact(j: u32, delta: f64) -> f64 {
    let d = delta;
    (2.0 * PI * PI * d * d / (j as f64 + 1.0) * (0.5 - 2.0 / (2.0 + d) + 1.0 / (2.0 + 2.0 * d))).sqrt()
}

#[test]
fn wirtinger_derivatives_match_finite_differences() {
    let mut rng = rng_for(13, 0);
    let mut checked = 0;
    while checked < 1000 {
        let j = rng.gen_range(0..3u32);
        let delta = [1.0, 0.5, 0.1][checked % 3];
        let s = rng.gen_range(0.05..0.95);
        let p = PolarPoint::new(rng.gen::<f64>() * s, rng.gen_range(-PI..PI), s, rng.gen_range(-PI..PI));
        let h = 1e-6 * s;
        if (s - delta).abs() < 10.0 * h || p.s - p.r < 10.0 * h {
            continue;
        }
        let sp = spec(j, delta);
        let f = |x: [f64; 4]| u_delta_eval(&sp, &PolarPoint::from_real4(x));
        let x = p.to_real4();
        let partial = |axis: usize| {
            let (mut a, mut b) = (x, x);
            a[axis] += h;
            b[axis] -= h;
            (f(a) - f(b)) / (2.0 * h)
        };
        let i = c(0.0, 1.0);
        let fd = [
            0.5 * (partial(0) - i * partial(1)),
            0.5 * (partial(0) + i * partial(1)),
            0.5 * (partial(2) - i * partial(3)),
            0.5 * (partial(2) + i * partial(3)),
        ];
        let exact = wirtinger_u_delta(&sp, &p);
        let scale = exact.iter().map(|v| v.norm()).fold(1.0, f64::max);
        for k in 0..4 {
            assert!(
                (fd[k] - exact[k]).norm() < 1e-6 * scale,
                "j={j} δ={delta} component {k} at {p:?}: {} vs {}",
                fd[k],
                exact[k]
            );
        }
        checked += 1;
    }
}

#[test]
fn interpolant_never_exceeds_u() {
    for (n, p) in sample_t(10_000, 4).into_iter().enumerate() {
        let sp = spec((n % 3) as u32, [1.0, 0.5, 0.1, 0.01][n % 4]);
        assert!(u_delta_eval(&sp, &p).norm() <= u_eval(sp.j, &p).norm());
    }
}

#[test]
fn piecewise_definition() {
    for p in sample_t(200, 6) {
        let one = spec(1, 1.0);
        assert!((u_delta_eval(&one, &p) - p.s * u_eval(1, &p)).norm() <= 1e-14 * u_eval(1, &p).norm());
        let sp = spec(2, 0.3);
        if p.s >= 0.3 {
            assert_eq!(u_delta_eval(&sp, &p), u_eval(2, &p));
        }
    }
}

#[test]
fn interpolant_is_continuous_across_the_interface() {
    for delta in [0.9, 0.5, 0.1, 0.01] {
        for j in 0..3 {
            let sp = spec(j, delta);
            let below = PolarPoint::new(0.3 * delta, 0.4, delta * (1.0 - 1e-15), -0.2);
            let above = PolarPoint::new(0.3 * delta, 0.4, delta, -0.2);
            let (a, b) = (u_delta_eval(&sp, &below), u_delta_eval(&sp, &above));
            assert!((a - b).norm() <= 1e-12 * b.norm(), "δ={delta} j={j}: {a} vs {b}");
        }
    }
}

#[test]
fn dbar_norm_follows_the_square_root_law() {
    let quad = QuadratureSpec::new(20);
    for j in 0..3 {
        let unit = dbar_u_delta_norm(&spec(j, 1.0), &quad).unwrap();
        for delta in [0.5, 0.1, 0.01, 2f64.powi(-8)] {
            let v = dbar_u_delta_norm(&spec(j, delta), &quad).unwrap();
            let exact = dbar_u_delta_norm_exact(&spec(j, delta));
            assert!((v - exact).abs() < 1e-10 * exact, "j={j} δ={delta}: {v} vs {exact}");
            assert!((v / unit - delta.sqrt()).abs() < 1e-10, "ratio {}", v / unit);
        }
    }
    let at = |level| dbar_u_delta_norm(&spec(0, 1.0), &QuadratureSpec::new(level)).unwrap();
    assert!((at(12) - PI / 2.0).abs() < 1e-12 && (at(24) - PI / 2.0).abs() < 1e-12);
}

/// Direct quadrature of `|∂̄u_δ|²` in `(r, s)` on a graded grid, with no
/// change of variables; valid where the mass near `s = 0` is representable.
#[test]
fn dbar_norm_agrees_with_plain_quadrature() {
    for (j, delta) in [(0, 0.5), (1, 0.5), (2, 0.8)] {
        let sp = spec(j, delta);
        let f = |p: &PolarPoint| c(wirtinger_u_delta(&sp, p)[3].norm_sqr(), 0.0);
        let region = TRegion::new(0.0, delta, 6.0).unwrap();
        let v = integrate_t_region(f, &QuadratureSpec::new(48), &region)
            .unwrap()
            .re
            .sqrt();
        let exact = dbar_u_delta_norm_exact(&sp);
        assert!((v - exact).abs() < 1e-4 * exact, "j={j} δ={delta}: {v} vs {exact}");
    }
}

#[test]
fn l2_gap_matches_closed_form_and_decays() {
    let quad = QuadratureSpec::new(20);
    assert!((l2_gap(&spec(0, 1.0), &quad).unwrap() - PI / 6f64.sqrt()).abs() < 1e-12);
    for j in 0..3 {
        let gaps: Vec<f64> = (1..=8)
            .map(|e| l2_gap(&spec(j, 2f64.powi(-e)), &quad).unwrap())
            .collect();
        for (e, g) in (1..=8).zip(&gaps) {
            let exact = gap_exact(j, 2f64.powi(-e));
            assert!((g - exact).abs() < 1e-10 * exact, "j={j} δ=2^-{e}: {g} vs {exact}");
        }
        assert!(gaps.windows(2).all(|w| w[1] < w[0]));
        assert!(gaps[7] < 0.1 * gaps[0]);
    }
}

#[test]
fn interpolant_has_finite_energy_while_u_does_not() {
    for j in 0..3 {
        let u: Vec<f64> = [8, 16, 32]
            .iter()
            .map(|&l| dirichlet_energy_u(j, &QuadratureSpec::new(l)).unwrap())
            .collect();
        assert!(grows_under_refinement(&u), "j={j}: {u:?}");
        for delta in [0.5, 0.1, 0.01] {
            let e: Vec<f64> = [8, 16, 32]
                .iter()
                .map(|&l| dirichlet_energy_u_delta(&spec(j, delta), &QuadratureSpec::new(l)).unwrap())
                .collect();
            assert!(e.iter().all(|v| v.is_finite()), "j={j} δ={delta}: {e:?}");
            assert!(!grows_under_refinement(&e), "j={j} δ={delta}: {e:?}");
        }
    }
}

#[test]
fn gradient_squared_is_twice_the_wirtinger_sum() {
    let sp = spec(1, 0.4);
    for p in sample_t(50, 3) {
        let w = wirtinger_u_delta(&sp, &p);
        assert_eq!(w[1], c(0.0, 0.0));
        let sum: f64 = w.iter().map(|v| v.norm_sqr()).sum();
        assert!((grad_sq_u_delta(&sp, &p) - 2.0 * sum).abs() <= 1e-12 * sum.max(1.0));
    }
}

#[test]
fn smoothstep_slope_peaks_at_fifteen_eighths() {
    let scan = (0..=1_000_000)
        .map(|i| smoothstep_slope(i as f64 / 1e6))
        .fold(0.0, f64::max);
    assert!((scan - SMOOTHSTEP_SLOPE).abs() < 1e-9, "{scan}");
    assert_eq!(smoothstep(-0.5), 0.0);
    assert_eq!(smoothstep(1.5), 1.0);
}

#[test]
fn cutoff_gradient_is_bounded_by_slope_over_delta() {
    let mut rng = rng_for(9, 0);
    for i in 0..100_000 {
        let delta = [0.25, 0.05, 1e-3][i % 3];
        let x: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-2.5 * delta..2.5 * delta));
        let p = PolarPoint::from_real4(x);
        let g = dchi_delta(delta, &p).iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(g * delta <= SMOOTHSTEP_SLOPE + 1e-9, "{g} at {p:?}");
        assert!((dbar_chi_abs(delta, &p) - 0.5 * g).abs() <= 1e-9 / delta);
    }
}

#[test]
fn cutoff_gradient_matches_finite_differences() {
    let delta = 0.1;
    let mut rng = rng_for(10, 0);
    for _ in 0..500 {
        let x: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-0.12..0.12));
        let g = dchi_delta(delta, &PolarPoint::from_real4(x));
        let h = 1e-7;
        for axis in 0..4 {
            let (mut a, mut b) = (x, x);
            a[axis] += h;
            b[axis] -= h;
            let fd = (chi_delta(delta, &PolarPoint::from_real4(a)) - chi_delta(delta, &PolarPoint::from_real4(b)))
                / (2.0 * h);
            assert!((fd - g[axis]).abs() < 1e-5, "axis {axis}: {fd} vs {}", g[axis]);
        }
    }
}

#[test]
fn cutoff_profile_and_radiality() {
    let delta = 0.2;
    assert_eq!(chi_delta(delta, &PolarPoint::new(0.1, 0.0, 0.15, 0.0)), 0.0);
    assert_eq!(chi_delta(delta, &PolarPoint::new(0.3, 1.0, 0.4, 2.0)), 1.0);
    let a = PolarPoint::new(0.18, 0.3, 0.24, -1.0);
    let b = PolarPoint::new(0.24, 2.0, 0.18, 0.5);
    assert!((chi_delta(delta, &a) - chi_delta(delta, &b)).abs() <= 1e-15);
}

#[test]
fn constant_field_lhs_matches_one_dimensional_oracle() {
    let quad = QuadratureSpec::new(48);
    let integral = gauss_1d(|x| smoothstep_slope(x).powi(2) * (1.0 + x).powi(3));
    let first = (PI * PI / 16.0 * gauss_1d(|x| smoothstep_slope(x).powi(4) * (1.0 + x).powi(3))).sqrt();
    for e in 2..=8 {
        let delta = 2f64.powi(-e);
        let lhs = cutoff_lhs(|_| c(1.0, 0.0), delta, &quad).unwrap();
        let exact = PI * PI / 4.0 * delta * delta * integral;
        assert!((lhs - exact).abs() < 1e-8 * exact, "δ=2^-{e}: {lhs} vs {exact}");
        let ff = cutoff_first_factor(delta, &quad).unwrap();
        assert!((ff - first).abs() < 1e-8 * first, "δ=2^-{e}: {ff} vs {first}");
    }
}

/// For `1/w` the shell integral does not depend on `δ`: it equals
/// `(π² ln 2 / 2) ∫₀¹ S'(x)² (1 + x) dx`.
#[test]
fn pole_field_lhs_is_scale_invariant() {
    let quad = QuadratureSpec::new(48);
    let exact = PI * PI * LN_2 / 2.0 * gauss_1d(|x| smoothstep_slope(x).powi(2) * (1.0 + x));
    for e in 2..=8 {
        let lhs = cutoff_lhs(|p| u_eval(0, p), 2f64.powi(-e), &quad).unwrap();
        assert!((lhs - exact).abs() < 1e-8 * exact, "δ=2^-{e}: {lhs} vs {exact}");
    }
}

#[test]
fn lhs_decays_like_delta_squared_for_bounded_fields() {
    let quad = QuadratureSpec::new(32);
    let fields: [fn(&PolarPoint) -> Complex64; 4] =
        [|_| c(1.0, 0.0), |p| p.z() / p.w(), |p| p.z(), |p| c(1.0, 0.0) + p.w()];
    for f in fields {
        let lhs: Vec<f64> = (2..=8).map(|e| cutoff_lhs(f, 2f64.powi(-e), &quad).unwrap()).collect();
        for w in lhs.windows(2) {
            assert!(w[1] < w[0] && w[1] / w[0] <= 0.26, "{lhs:?}");
        }
    }
}

#[test]
fn cauchy_schwarz_holds_and_flags_non_l4_fields() {
    let quad = QuadratureSpec::new(32);
    for e in [2, 4, 6, 8] {
        let delta = 2f64.powi(-e);
        let one = cutoff_commutator_check(|_| c(1.0, 0.0), delta, &quad).unwrap();
        assert!(one.holds() && is_l4_near_origin(&one));
        let ratio = cutoff_commutator_check(|p| p.z() / p.w(), delta, &quad).unwrap();
        assert!(ratio.holds() && is_l4_near_origin(&ratio));
        let pole = cutoff_commutator_check(|p| u_eval(0, p), delta, &quad).unwrap();
        assert!(pole.holds() && !is_l4_near_origin(&pole));
        assert!(pole.rhs.is_infinite());
    }
}

#[test]
fn invalid_scales_are_rejected() {
    assert!(DeltaFamilySpec::new(0, 0.0).is_err());
    assert!(DeltaFamilySpec::new(0, 1.5).is_err());
    assert!(DeltaFamilySpec::new(0, f64::NAN).is_err());
    let quad = QuadratureSpec::new(8);
    assert!(cutoff_lhs(|_| c(1.0, 0.0), 0.75, &quad).is_err());
    assert!(cutoff_first_factor(0.0, &quad).is_err());
}

proptest! {
    #[test]
    fn cutoff_lies_in_unit_interval(delta in 1e-4f64..0.5, x in proptest::array::uniform4(-1.0f64..1.0)) {
        let p = PolarPoint::from_real4(x);
        let v = chi_delta(delta, &p);
        prop_assert!((0.0..=1.0).contains(&v));
        if p.norm() <= delta { prop_assert_eq!(v, 0.0); }
        if p.norm() >= 2.0 * delta { prop_assert_eq!(v, 1.0); }
    }

    #[test]
    fn interpolant_is_dominated(j in 0u32..4, delta in 1e-3f64..=1.0, seed in any::<u64>()) {
        let sp = spec(j, delta);
        for p in sample_t(16, seed) {
            prop_assert!(u_delta_eval(&sp, &p).norm() <= u_eval(j, &p).norm());
        }
    }
}
