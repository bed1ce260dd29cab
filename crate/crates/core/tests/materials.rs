mod common;

use nozzleopt::materials::{
    cross_viscosity, giesekus_steady_shear, weissenberg_number, CrossWlfParams, GiesekusParams, MaterialError,
    ViscosityModel,
};
use proptest::prelude::*;

use common::startup_shear;

#[test]
fn zero_shear_viscosity_at_nozzle_temperature() {
    // D1 exp(-A1 (T - T*) / (A2 + T - T*)) evaluated by hand at 503 K.
    let expected = 3.317e9 * (-20.19f64 * 130.0 / (51.6 + 130.0)).exp();
    let p = CrossWlfParams::default();
    let got = p.eta0(503.0).unwrap();
    assert!((got / expected - 1.0).abs() < 1e-12, "{got} vs {expected}");
    assert!((got - 1755.0).abs() < 5.0, "{got}");
    assert_eq!(p.eta0(373.0).unwrap(), 3.317e9);
}

#[test]
fn cross_shear_thinning_matches_hand_value() {
    let p = CrossWlfParams::default();
    let eta0 = p.eta0(503.0).unwrap();
    let gd = 250.0;
    let expected = eta0 / (1.0 + (eta0 * gd / 1.009e5f64).powf(0.75));
    assert!((cross_viscosity(gd, 503.0, &p).unwrap() / expected - 1.0).abs() < 1e-12);
    assert_eq!(cross_viscosity(0.0, 503.0, &p).unwrap(), eta0);
}

#[test]
fn below_the_wlf_pole_is_a_domain_error() {
    let p = CrossWlfParams::default();
    let err = cross_viscosity(1.0, 300.0, &p).unwrap_err();
    assert!(matches!(err, MaterialError::DomainError { .. }), "{err}");
    assert!(cross_viscosity(-1.0, 503.0, &p).is_err());
}

#[test]
fn model_enum_agrees_with_free_function() {
    let p = CrossWlfParams::default();
    let m = ViscosityModel::CrossWlf(p);
    for (gd, t) in [(1e-3, 450.0), (10.0, 503.0), (1e4, 520.0)] {
        let a = m.viscosity(gd, t);
        let b = cross_viscosity(gd, t, &p).unwrap();
        assert!((a / b - 1.0).abs() < 1e-14);
    }
    let pl = ViscosityModel::PowerLaw { k: 3000.0, n: 0.4 };
    assert!((pl.viscosity(8.0, 0.0) - 3000.0 * 8f64.powf(-0.6)).abs() < 1e-9);
}

proptest! {
    #[test]
    fn cross_viscosity_is_shear_thinning(gd in 1e-4f64..1e5, k in 1.001f64..10.0, t in 430.0f64..560.0) {
        let p = CrossWlfParams::default();
        let a = cross_viscosity(gd, t, &p).unwrap();
        let b = cross_viscosity(gd * k, t, &p).unwrap();
        prop_assert!(b < a);
        prop_assert!(a > 0.0 && a <= p.eta0(t).unwrap());
    }

    #[test]
    fn cross_viscosity_falls_with_temperature(gd in 0.0f64..1e4, t in 330.0f64..600.0, dt in 0.5f64..50.0) {
        let p = CrossWlfParams::default();
        prop_assert!(cross_viscosity(gd, t + dt, &p).unwrap() < cross_viscosity(gd, t, &p).unwrap());
    }

    #[test]
    fn giesekus_split_round_trips(eta in 1.0f64..1e5, beta in 0.0f64..2.0) {
        let p = GiesekusParams { eta_total: eta, beta, ..GiesekusParams::default() };
        prop_assert!(((p.eta_p() + p.eta_s()) / eta - 1.0).abs() < 1e-14);
        prop_assert!((p.eta_s() - beta * p.eta_p()).abs() <= 1e-12 * eta);
    }
}

#[test]
fn steady_shear_matches_transient_integration() {
    let p = GiesekusParams::default();
    let gd = 10.0;
    let s = giesekus_steady_shear(gd, &p).unwrap();
    let ode = startup_shear(gd, &p, 150.0 * p.lambda, p.lambda / 400.0);
    assert!((ode[0][1] - ode[1][0]).abs() < 1e-12);
    let scale = p.eta_p() * gd;
    for (got, want) in [(s.xx, ode[0][0]), (s.xy, ode[0][1]), (s.yy, ode[1][1])] {
        assert!((got - want).abs() <= 1e-6 * scale, "{got} vs {want}");
    }
}

/// Closed-form steady shear stress of the Giesekus model.
fn closed_form_shear_stress(gd: f64, p: &GiesekusParams) -> f64 {
    let (a, wi) = (p.alpha_g, p.lambda * gd);
    let c = 16.0 * a * (1.0 - a) * wi * wi;
    let lam2 = ((1.0 + c).sqrt() - 1.0) / (8.0 * a * (1.0 - a) * wi * wi);
    let lam = lam2.sqrt();
    let f = (1.0 - lam) / (1.0 + (1.0 - 2.0 * a) * lam);
    p.eta_p() * gd * (1.0 - f).powi(2) / (1.0 + (1.0 - 2.0 * a) * f)
}

#[test]
fn steady_shear_matches_closed_form() {
    let p = GiesekusParams::default();
    for gd in [0.5, 3.0, 10.0, 40.0, 200.0] {
        let s = giesekus_steady_shear(gd, &p).unwrap();
        let want = closed_form_shear_stress(gd, &p);
        assert!((s.xy / want - 1.0).abs() < 1e-9, "gd {gd}: {} vs {want}", s.xy);
    }
}

#[test]
fn normal_stress_signs() {
    let p = GiesekusParams::default();
    for gd in [0.1, 1.0, 10.0, 100.0] {
        let s = giesekus_steady_shear(gd, &p).unwrap();
        assert!(s.xx - s.yy >= 0.0, "N1 < 0 at {gd}");
        assert!(s.yy <= 0.0, "N2 > 0 at {gd}");
        // Shear thinning below the Newtonian polymer stress.
        assert!(s.xy <= p.eta_p() * gd * (1.0 + 1e-12));
    }
    let s = giesekus_steady_shear(0.0, &p).unwrap();
    assert_eq!((s.xx, s.xy, s.yy), (0.0, 0.0, 0.0));
}

#[test]
fn weissenberg_number_definition() {
    let p = GiesekusParams::default();
    assert!((weissenberg_number(&p, 5.0, 0.25) - 0.2 * 5.0 / 0.25).abs() < 1e-15);
}
