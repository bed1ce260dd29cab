use std::sync::OnceLock;

use proptest::prelude::*;

use nozzleopt::geometry::{build_angle_profile, BoundaryProfile, NozzleDims};
use nozzleopt::mesh::{generate_mesh, Mesh, MeshParams};
use nozzleopt::objective::{pressure_drop, section_average_pressure, ObjectiveError};
use nozzleopt::solver::{FlowGeometry, FlowSolution};

const GEOMETRIES: [FlowGeometry; 2] = [FlowGeometry::Planar, FlowGeometry::Axisymmetric];

fn nozzle() -> &'static (NozzleDims, Mesh) {
    static CELL: OnceLock<(NozzleDims, Mesh)> = OnceLock::new();
    CELL.get_or_init(|| {
        let dims = NozzleDims::default();
        let profile = build_angle_profile(&dims, 40.0).unwrap();
        let mesh = generate_mesh(&profile, &dims, &MeshParams { h: 0.3, ..MeshParams::default() }).unwrap();
        (dims, mesh)
    })
}

fn solution(p: Vec<f64>, geometry: FlowGeometry, mesh: &Mesh) -> FlowSolution {
    FlowSolution {
        geometry,
        u: mesh.nodes.iter().map(|_| [1.0, 0.0]).collect(),
        p,
        t: None,
        sigma_p: None,
        strain_rate: None,
        converged: true,
        residual_history: vec![],
        continuation_trace: vec![],
        u_in: 1.0,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn affine_in_x_fields_are_reproduced(a in -1e6..1e6f64, b in -1e5..1e5f64, s in 0.0..=1.0f64) {
        let (dims, mesh) = nozzle();
        let p: Vec<f64> = mesh.nodes.iter().map(|q| a + b * q[0]).collect();
        let x = s * dims.l_total;
        for g in GEOMETRIES {
            let got = section_average_pressure(&p, mesh, x, g).unwrap();
            prop_assert!((got - (a + b * x)).abs() <= 1e-9 * (a.abs() + b.abs() * dims.l_total + 1.0));
        }
    }

    #[test]
    fn average_is_linear(alpha in -3.0..3.0f64, beta in -3.0..3.0f64, s in 0.0..=1.0f64) {
        let (dims, mesh) = nozzle();
        let f: Vec<f64> = mesh.nodes.iter().map(|q| (q[0] * 0.7).sin() + q[1] * q[1]).collect();
        let h: Vec<f64> = mesh.nodes.iter().map(|q| q[0] * q[1] - 2.0).collect();
        let mix: Vec<f64> = f.iter().zip(&h).map(|(f, h)| alpha * f + beta * h).collect();
        let x = s * dims.l_total;
        for g in GEOMETRIES {
            let avg = |v: &[f64]| section_average_pressure(v, mesh, x, g).unwrap();
            prop_assert!((avg(&mix) - alpha * avg(&f) - beta * avg(&h)).abs() < 1e-10);
        }
    }

    #[test]
    fn pressure_drop_ignores_the_gauge(c in -1e7..1e7f64) {
        let (dims, mesh) = nozzle();
        let p: Vec<f64> = mesh.nodes.iter().map(|q| 5e4 * (dims.l_total - q[0]) + 1e3 * q[1]).collect();
        let shifted: Vec<f64> = p.iter().map(|v| v + c).collect();
        for g in GEOMETRIES {
            let a = pressure_drop(&solution(p.clone(), g, mesh), mesh, dims).unwrap().delta_p;
            let b = pressure_drop(&solution(shifted.clone(), g, mesh), mesh, dims).unwrap().delta_p;
            prop_assert!((a - b).abs() <= 1e-9 * (a.abs() + c.abs()));
        }
    }
}

#[test]
fn radial_weighting_matches_closed_form() {
    let (len, r) = (4.0, 1.5);
    let profile = BoundaryProfile::straight_channel(len, r);
    let mesh = generate_mesh(&profile, profile.dims(), &MeshParams::uniform(0.2)).unwrap();
    let p: Vec<f64> = mesh.nodes.iter().map(|q| q[1]).collect();
    for x in [0.0, 1.3, len] {
        let planar = section_average_pressure(&p, &mesh, x, FlowGeometry::Planar).unwrap();
        let axi = section_average_pressure(&p, &mesh, x, FlowGeometry::Axisymmetric).unwrap();
        // Means of y over [0, R] with weights 1 and y.
        assert!((planar - r / 2.0).abs() < 1e-12, "{planar}");
        assert!((axi - 2.0 * r / 3.0).abs() < 1e-12, "{axi}");
    }
}

#[test]
fn poiseuille_pressure_drop_spans_the_stations() {
    let (dims, mesh) = nozzle();
    let grad = 3.2e5;
    let p: Vec<f64> = mesh.nodes.iter().map(|q| grad * (dims.l_total - q[0])).collect();
    let rep = pressure_drop(&solution(p, FlowGeometry::Axisymmetric, mesh), mesh, dims).unwrap();
    let want = grad * (dims.l_total - dims.l_pressure);
    assert!((rep.delta_p - want).abs() < 1e-6 * want);
    assert!(rep.p_outlet_avg.abs() < 1e-6 * want);
    assert_eq!(rep.eval_x_inlet, dims.l_pressure);
    assert!(rep.feasible);
}

#[test]
fn unconverged_solutions_are_infeasible_not_errors() {
    let (dims, mesh) = nozzle();
    let mut sol = solution(vec![1.0; mesh.n_nodes()], FlowGeometry::Planar, mesh);
    sol.converged = false;
    assert!(!pressure_drop(&sol, mesh, dims).unwrap().feasible);
}

#[test]
fn stations_outside_the_mesh_are_rejected() {
    let (dims, mesh) = nozzle();
    let p = vec![0.0; mesh.n_nodes()];
    for x in [-0.1, dims.l_total + 0.1, f64::NAN] {
        let e = section_average_pressure(&p, mesh, x, FlowGeometry::Planar).unwrap_err();
        assert!(matches!(e, ObjectiveError::OutOfDomain { .. }));
    }
}
