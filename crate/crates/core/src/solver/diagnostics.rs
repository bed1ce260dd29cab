//! Post-processing: boundary fluxes, backflow regions, outlet temperatures.

use std::collections::HashMap;

use super::{FlowGeometry, FlowSolution};
use crate::mesh::{BoundaryTag, Mesh, PointLocator};

/// Elements whose mean axial velocity is below `-VORTEX_VELOCITY_TOL * u_in`
/// count as backflow.
pub const VORTEX_VELOCITY_TOL: f64 = 1e-3;

/// Outward flux `∫ u·n dA` through all edges with `tag`; `2πy` weighting
/// for axisymmetric solutions (mm³/s), unit weight for planar ones (mm²/s).
pub fn boundary_flux(sol: &FlowSolution, mesh: &Mesh, tag: BoundaryTag) -> f64 {
    let mut third: HashMap<(usize, usize), usize> = HashMap::new();
    for t in &mesh.elements {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            third.insert((a.min(b), a.max(b)), t[(k + 2) % 3]);
        }
    }
    let g = 0.5 / 3f64.sqrt();
    let mut flux = 0.0;
    for edge in mesh.boundary.iter().filter(|b| b.tag == tag) {
        let [a, b] = edge.nodes;
        let (pa, pb) = (mesh.nodes[a], mesh.nodes[b]);
        let c = mesh.nodes[third[&(a.min(b), a.max(b))]];
        let d = [pb[0] - pa[0], pb[1] - pa[1]];
        let len = (d[0] * d[0] + d[1] * d[1]).sqrt();
        let mut nrm = [d[1] / len, -d[0] / len];
        if nrm[0] * (c[0] - pa[0]) + nrm[1] * (c[1] - pa[1]) > 0.0 {
            nrm = [-nrm[0], -nrm[1]];
        }
        for s in [0.5 - g, 0.5 + g] {
            let u = [0, 1].map(|i| (1.0 - s) * sol.u[a][i] + s * sol.u[b][i]);
            let y = (1.0 - s) * pa[1] + s * pb[1];
            let w = match sol.geometry {
                FlowGeometry::Axisymmetric => 2.0 * std::f64::consts::PI * y,
                FlowGeometry::Planar => 1.0,
            };
            flux += 0.5 * len * w * (u[0] * nrm[0] + u[1] * nrm[1]);
        }
    }
    flux
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassBalance {
    pub q_in: f64,
    pub q_out: f64,
    /// `|q_in - q_out| / q_in`
    pub rel_error: f64,
}

pub fn mass_balance(sol: &FlowSolution, mesh: &Mesh) -> MassBalance {
    let q_in = -boundary_flux(sol, mesh, BoundaryTag::Inlet);
    let q_out = boundary_flux(sol, mesh, BoundaryTag::Outlet);
    MassBalance { q_in, q_out, rel_error: (q_in - q_out).abs() / q_in.abs().max(1e-300) }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RecirculationReport {
    pub has_vortex: bool,
    /// mm²
    pub vortex_area: f64,
    /// Area centroid of each backflow region (mm).
    pub centers: Vec<[f64; 2]>,
}

/// Connected backflow regions that touch the wall.
pub fn detect_recirculation(sol: &FlowSolution, mesh: &Mesh) -> RecirculationReport {
    let thresh = -VORTEX_VELOCITY_TOL * sol.u_in.abs().max(1e-300);
    let back: Vec<bool> = mesh
        .elements
        .iter()
        .map(|t| (sol.u[t[0]][0] + sol.u[t[1]][0] + sol.u[t[2]][0]) / 3.0 < thresh)
        .collect();
    let mut edge_elems: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    for (e, t) in mesh.elements.iter().enumerate() {
        if back[e] {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                edge_elems.entry((a.min(b), a.max(b))).or_default().push(e);
            }
        }
    }
    let on_wall: Vec<bool> = mesh.node_tags().iter().map(|t| t.iter().any(|g| g.is_wall())).collect();
    let mut seen = vec![false; mesh.n_elements()];
    let mut report = RecirculationReport::default();
    for start in 0..mesh.n_elements() {
        if !back[start] || seen[start] {
            continue;
        }
        let mut stack = vec![start];
        seen[start] = true;
        let (mut area, mut cx, mut cy, mut touches) = (0.0, 0.0, 0.0, false);
        while let Some(e) = stack.pop() {
            let t = mesh.elements[e];
            let a = mesh.element_area(e);
            let [p0, p1, p2] = mesh.element_coords(e);
            area += a;
            cx += a * (p0[0] + p1[0] + p2[0]) / 3.0;
            cy += a * (p0[1] + p1[1] + p2[1]) / 3.0;
            touches |= t.iter().any(|&n| on_wall[n]);
            for k in 0..3 {
                let (na, nb) = (t[k], t[(k + 1) % 3]);
                for &f in &edge_elems[&(na.min(nb), na.max(nb))] {
                    if !seen[f] {
                        seen[f] = true;
                        stack.push(f);
                    }
                }
            }
        }
        if touches {
            report.vortex_area += area;
            report.centers.push([cx / area, cy / area]);
        }
    }
    report.has_vortex = !report.centers.is_empty();
    report
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutletProfile {
    /// `(y, T)` pairs from the axis to the wall (mm, K).
    pub samples: Vec<(f64, f64)>,
    pub min_t: f64,
}

/// Temperature sampled at `n_samples` equally spaced points across the outlet face.
pub fn outlet_temperature_profile(sol: &FlowSolution, mesh: &Mesh, n_samples: usize) -> Option<OutletProfile> {
    let t = sol.t.as_ref()?;
    let outlet: Vec<usize> = mesh
        .boundary
        .iter()
        .filter(|b| b.tag == BoundaryTag::Outlet)
        .flat_map(|b| b.nodes)
        .collect();
    if outlet.is_empty() || n_samples == 0 {
        return None;
    }
    let x = mesh.nodes[outlet[0]][0];
    let y_max = outlet.iter().map(|&n| mesh.nodes[n][1]).fold(0.0, f64::max);
    let loc = PointLocator::new(mesh);
    let samples: Vec<(f64, f64)> = (0..n_samples)
        .map(|i| {
            let y = if n_samples == 1 { 0.0 } else { y_max * i as f64 / (n_samples - 1) as f64 };
            (y, loc.interpolate(t, [x, y]))
        })
        .collect();
    let min_t = samples.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
    Some(OutletProfile { samples, min_t })
}
