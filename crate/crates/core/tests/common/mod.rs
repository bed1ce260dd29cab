//! Fixtures shared by several test targets.
#![allow(dead_code)]

use nozzleopt::materials::GiesekusParams;
use nozzleopt::mesh::{BoundaryEdge, BoundaryTag, Mesh};

/// Structured slab `[0, l] x [0, h]`: fixed wall below, sliding wall above,
/// open ends.
pub fn couette_mesh(l: f64, h: f64, nx: usize, ny: usize) -> Mesh {
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut nodes = Vec::new();
    for j in 0..=ny {
        for i in 0..=nx {
            nodes.push([l * i as f64 / nx as f64, h * j as f64 / ny as f64]);
        }
    }
    let mut elements = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            if (i + j) % 2 == 0 {
                elements.push([a, b, c]);
                elements.push([a, c, d]);
            } else {
                elements.push([a, b, d]);
                elements.push([b, c, d]);
            }
        }
    }
    let mut boundary = Vec::new();
    for i in 0..nx {
        boundary.push(BoundaryEdge { nodes: [id(i, 0), id(i + 1, 0)], tag: BoundaryTag::Wall });
        boundary.push(BoundaryEdge { nodes: [id(i + 1, ny), id(i, ny)], tag: BoundaryTag::MovingWall });
    }
    for j in 0..ny {
        boundary.push(BoundaryEdge { nodes: [id(nx, j), id(nx, j + 1)], tag: BoundaryTag::Outlet });
        boundary.push(BoundaryEdge { nodes: [id(0, j + 1), id(0, j)], tag: BoundaryTag::Outlet });
    }
    Mesh::from_parts(nodes, elements, boundary, h / ny as f64).unwrap()
}

/// Start-up of simple shear, `λ dσ/dt = 2 η_p D − σ + λ (Lσ + σLᵀ) − (αλ/η_p) σσ`,
/// integrated with classical Runge–Kutta.
pub fn startup_shear(gd: f64, p: &GiesekusParams, t_end: f64, dt: f64) -> [[f64; 2]; 2] {
    let (l, ep, a) = (p.lambda, p.eta_p(), p.alpha_g);
    let grad = [[0.0, gd], [0.0, 0.0]];
    let d = [[0.0, 0.5 * gd], [0.5 * gd, 0.0]];
    let mul = |x: [[f64; 2]; 2], y: [[f64; 2]; 2]| {
        let mut z = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                z[i][j] = x[i][0] * y[0][j] + x[i][1] * y[1][j];
            }
        }
        z
    };
    let tr = |x: [[f64; 2]; 2]| [[x[0][0], x[1][0]], [x[0][1], x[1][1]]];
    let rhs = |s: [[f64; 2]; 2]| {
        let ls = mul(grad, s);
        let slt = mul(s, tr(grad));
        let ss = mul(s, s);
        let mut out = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                out[i][j] = (2.0 * ep * d[i][j] - s[i][j] + l * (ls[i][j] + slt[i][j]) - a * l / ep * ss[i][j]) / l;
            }
        }
        out
    };
    let axpy = |s: [[f64; 2]; 2], k: [[f64; 2]; 2], h: f64| {
        [[s[0][0] + h * k[0][0], s[0][1] + h * k[0][1]], [s[1][0] + h * k[1][0], s[1][1] + h * k[1][1]]]
    };
    let mut s = [[0.0; 2]; 2];
    let steps = (t_end / dt).round() as usize;
    for _ in 0..steps {
        let k1 = rhs(s);
        let k2 = rhs(axpy(s, k1, 0.5 * dt));
        let k3 = rhs(axpy(s, k2, 0.5 * dt));
        let k4 = rhs(axpy(s, k3, dt));
        for i in 0..2 {
            for j in 0..2 {
                s[i][j] += dt / 6.0 * (k1[i][j] + 2.0 * k2[i][j] + 2.0 * k3[i][j] + k4[i][j]);
            }
        }
    }
    s
}
