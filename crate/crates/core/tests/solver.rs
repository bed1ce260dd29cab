use nozzleopt::geometry::BoundaryProfile;
use nozzleopt::materials::GnfFluid;
use nozzleopt::mesh::{generate_mesh, Mesh, MeshParams};
use nozzleopt::objective::section_average_pressure;
use nozzleopt::solver::{detect_recirculation, mass_balance, solve_gnf, BoundaryConditions, FlowGeometry, SolverConfig};

fn channel(length: f64, radius: f64, h: f64) -> Mesh {
    let profile = BoundaryProfile::straight_channel(length, radius);
    generate_mesh(&profile, profile.dims(), &MeshParams::uniform(h)).unwrap()
}

fn isothermal_bc(u_in: f64) -> BoundaryConditions {
    BoundaryConditions { u_in, t_wall: 503.0, t_in: 503.0, ..Default::default() }
}

/// Mean pressure drop per unit length (Pa/mm) between two stations.
fn gradient(p: &[f64], mesh: &Mesh, a: f64, b: f64, g: FlowGeometry) -> f64 {
    let pa = section_average_pressure(p, mesh, a, g).unwrap();
    let pb = section_average_pressure(p, mesh, b, g).unwrap();
    (pa - pb) / (b - a)
}

#[test]
fn hagen_poiseuille_pipe() {
    let (len, r, eta, u) = (8.0, 1.0, 1000.0, 1.0);
    let mesh = channel(len, r, 0.1);
    let sol = solve_gnf(&mesh, &isothermal_bc(u), &GnfFluid::newtonian(eta), &SolverConfig::isothermal(FlowGeometry::Axisymmetric))
        .unwrap();
    // dp/dx = 8 eta Q / (pi R^4), Q = u pi R^2, SI units.
    let expected = 8.0 * eta * (u * 1e-3) / (r * 1e-3f64).powi(2) * 1e-3;
    let got = gradient(&sol.p, &mesh, 3.0, 7.0, FlowGeometry::Axisymmetric);
    assert!((got / expected - 1.0).abs() < 0.02, "{got} vs {expected} Pa/mm");
}

#[test]
fn power_law_pipe() {
    let (len, r, k, n, u) = (8.0, 1.0, 3000.0, 0.4, 2.0);
    let mesh = channel(len, r, 0.1);
    let sol = solve_gnf(&mesh, &isothermal_bc(u), &GnfFluid::power_law(k, n), &SolverConfig::isothermal(FlowGeometry::Axisymmetric))
        .unwrap();
    // dp/dx = (2K/R) (Q (3n+1) / (pi n R^3))^n with Q = u pi R^2, SI units.
    let (r_si, u_si) = (r * 1e-3, u * 1e-3);
    let q = u_si * std::f64::consts::PI * r_si * r_si;
    let expected = 2.0 * k / r_si * (q * (3.0 * n + 1.0) / (std::f64::consts::PI * n * r_si.powi(3))).powf(n) * 1e-3;
    let got = gradient(&sol.p, &mesh, 3.0, 7.0, FlowGeometry::Axisymmetric);
    assert!((got / expected - 1.0).abs() < 0.03, "{got} vs {expected} Pa/mm");
}

#[test]
fn planar_poiseuille_channel() {
    // Half channel of half-width b with the symmetry line on y = 0.
    let (len, b, eta, u) = (8.0, 1.0, 500.0, 3.0);
    let mesh = channel(len, b, 0.1);
    let sol =
        solve_gnf(&mesh, &isothermal_bc(u), &GnfFluid::newtonian(eta), &SolverConfig::isothermal(FlowGeometry::Planar))
            .unwrap();
    // dp/dx = 3 eta U / b^2 for mean velocity U.
    let expected = 3.0 * eta * (u * 1e-3) / (b * 1e-3f64).powi(2) * 1e-3;
    let got = gradient(&sol.p, &mesh, 3.0, 7.0, FlowGeometry::Planar);
    assert!((got / expected - 1.0).abs() < 0.02, "{got} vs {expected} Pa/mm");
    // Developed profile u = 1.5 U (1 - y^2 / b^2).
    let mut worst: f64 = 0.0;
    for (i, q) in mesh.nodes.iter().enumerate() {
        if (q[0] - 5.0).abs() < 0.5 {
            let want = 1.5 * u * (1.0 - q[1] * q[1] / (b * b));
            worst = worst.max((sol.u[i][0] - want).abs() / (1.5 * u));
        }
    }
    assert!(worst < 0.02, "{worst}");
}

#[test]
fn zero_inlet_velocity_gives_rest_state() {
    let mesh = channel(4.0, 1.0, 0.2);
    let sol =
        solve_gnf(&mesh, &isothermal_bc(0.0), &GnfFluid::newtonian(100.0), &SolverConfig::isothermal(FlowGeometry::Axisymmetric))
            .unwrap();
    assert!(sol.u.iter().all(|u| u[0].abs() < 1e-12 && u[1].abs() < 1e-12));
    assert!(sol.p.iter().all(|p| p.abs() < 1e-9));
}

#[test]
fn straight_channel_has_no_vortex() {
    let mesh = channel(6.0, 1.0, 0.1);
    let sol = solve_gnf(&mesh, &isothermal_bc(1.0), &GnfFluid::newtonian(100.0), &SolverConfig::isothermal(FlowGeometry::Axisymmetric))
        .unwrap();
    let rep = detect_recirculation(&sol, &mesh);
    assert!(!rep.has_vortex && rep.vortex_area == 0.0);
    let mb = mass_balance(&sol, &mesh);
    assert!(mb.rel_error < 1e-10, "{mb:?}");
    // Inflow equals u pi R^2 (mm^3/s).
    assert!((mb.q_in / std::f64::consts::PI - 1.0).abs() < 1e-12, "{mb:?}");
}
