//! Pressure-loss objective: section-averaged inlet and outlet pressures.

use thiserror::Error;

use crate::geometry::NozzleDims;
use crate::mesh::Mesh;
use crate::solver::{
    detect_recirculation, mass_balance, outlet_temperature_profile, FlowGeometry, FlowSolution, RecirculationReport,
};

/// Failed evaluations are charged this multiple of the incumbent objective.
pub const INFEASIBLE_PENALTY_FACTOR: f64 = 10.0;

/// Outlet temperature samples used for the diagnostics.
const OUTLET_SAMPLES: usize = 64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ObjectiveError {
    #[error("station x = {x} mm lies outside the mesh [{lo}, {hi}]")]
    OutOfDomain { x: f64, lo: f64, hi: f64 },
    #[error("relative improvement needs a positive baseline, got {0}")]
    DomainError(f64),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Diagnostics {
    pub vortex: RecirculationReport,
    pub min_outlet_t: Option<f64>,
    pub mass_balance_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveReport {
    /// Pa
    pub p_inlet_avg: f64,
    /// Pa
    pub p_outlet_avg: f64,
    /// Pa
    pub delta_p: f64,
    /// Axial position of the inlet averaging station (mm).
    pub eval_x_inlet: f64,
    pub feasible: bool,
    pub diagnostics: Diagnostics,
}

impl ObjectiveReport {
    pub const CSV_HEADER: &'static str =
        "p_inlet_kpa,p_outlet_kpa,delta_p_kpa,feasible,has_vortex,vortex_area_mm2,min_outlet_t_k,mass_balance_error";

    /// One CSV row matching [`CSV_HEADER`](Self::CSV_HEADER); pressures in kPa.
    pub fn csv_row(&self) -> String {
        format!(
            "{:.6},{:.6},{:.6},{},{},{:.6e},{},{:.3e}",
            self.p_inlet_avg / 1e3,
            self.p_outlet_avg / 1e3,
            self.delta_p / 1e3,
            self.feasible,
            self.diagnostics.vortex.has_vortex,
            self.diagnostics.vortex.vortex_area,
            self.diagnostics.min_outlet_t.map_or(String::new(), |t| format!("{t:.3}")),
            self.diagnostics.mass_balance_error,
        )
    }
}

/// Cross-sectional mean of the nodal pressure at `x_station` (mm), weighted
/// by `y` for axisymmetric fields.
///
/// Every element whose axial extent satisfies `x_min < x <= x_max`
/// contributes its chord, so shared vertical edges count once; at the left
/// end of the mesh the rule flips to `x_min <= x < x_max`.
pub fn section_average_pressure(
    p: &[f64],
    mesh: &Mesh,
    x_station: f64,
    geometry: FlowGeometry,
) -> Result<f64, ObjectiveError> {
    let lo = mesh.nodes.iter().map(|n| n[0]).fold(f64::INFINITY, f64::min);
    let hi = mesh.nodes.iter().map(|n| n[0]).fold(f64::NEG_INFINITY, f64::max);
    if !(x_station >= lo && x_station <= hi) {
        return Err(ObjectiveError::OutOfDomain { x: x_station, lo, hi });
    }
    let at_start = x_station == lo;
    let g = 0.5 / 3f64.sqrt();
    let (mut num, mut den) = (0.0, 0.0);
    for t in &mesh.elements {
        let pts = t.map(|n| mesh.nodes[n]);
        let xmin = pts.iter().map(|q| q[0]).fold(f64::INFINITY, f64::min);
        let xmax = pts.iter().map(|q| q[0]).fold(f64::NEG_INFINITY, f64::max);
        let hit = if at_start { xmin <= x_station && x_station < xmax } else { xmin < x_station && x_station <= xmax };
        if !hit {
            continue;
        }
        let mut chord: Vec<(f64, f64)> = Vec::with_capacity(4);
        for k in 0..3 {
            let (a, b) = (k, (k + 1) % 3);
            let (xa, xb) = (pts[a][0], pts[b][0]);
            if xa == x_station {
                chord.push((pts[a][1], p[t[a]]));
            }
            if (xa - x_station) * (xb - x_station) < 0.0 {
                let s = (x_station - xa) / (xb - xa);
                chord.push((pts[a][1] + s * (pts[b][1] - pts[a][1]), p[t[a]] + s * (p[t[b]] - p[t[a]])));
            }
        }
        if chord.len() < 2 {
            continue;
        }
        let lo_pt = chord.iter().copied().fold((f64::INFINITY, 0.0), |m, c| if c.0 < m.0 { c } else { m });
        let hi_pt = chord.iter().copied().fold((f64::NEG_INFINITY, 0.0), |m, c| if c.0 > m.0 { c } else { m });
        let len = hi_pt.0 - lo_pt.0;
        if len <= 0.0 {
            continue;
        }
        for s in [0.5 - g, 0.5 + g] {
            let y = lo_pt.0 + s * len;
            let pv = lo_pt.1 + s * (hi_pt.1 - lo_pt.1);
            let w = match geometry {
                FlowGeometry::Axisymmetric => y,
                FlowGeometry::Planar => 1.0,
            } * 0.5
                * len;
            num += w * pv;
            den += w;
        }
    }
    Ok(num / den)
}

/// `Δp = p̄(L_pressure) − p̄(L_total)` with diagnostics. Non-converged
/// solutions yield `feasible = false` instead of an error.
pub fn pressure_drop(sol: &FlowSolution, mesh: &Mesh, dims: &NozzleDims) -> Result<ObjectiveReport, ObjectiveError> {
    let p_in = section_average_pressure(&sol.p, mesh, dims.l_pressure, sol.geometry)?;
    let p_out = section_average_pressure(&sol.p, mesh, dims.l_total, sol.geometry)?;
    let vortex = detect_recirculation(sol, mesh);
    let min_outlet_t = outlet_temperature_profile(sol, mesh, OUTLET_SAMPLES).map(|o| o.min_t);
    let delta_p = p_in - p_out;
    Ok(ObjectiveReport {
        p_inlet_avg: p_in,
        p_outlet_avg: p_out,
        delta_p,
        eval_x_inlet: dims.l_pressure,
        feasible: sol.converged && delta_p.is_finite(),
        diagnostics: Diagnostics { vortex, min_outlet_t, mass_balance_error: mass_balance(sol, mesh).rel_error },
    })
}

/// `1 − dp_opt / dp_baseline`.
pub fn relative_improvement(dp_opt: f64, dp_baseline: f64) -> Result<f64, ObjectiveError> {
    if !(dp_baseline > 0.0) {
        return Err(ObjectiveError::DomainError(dp_baseline));
    }
    Ok(1.0 - dp_opt / dp_baseline)
}
