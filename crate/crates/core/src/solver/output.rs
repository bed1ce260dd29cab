//! Field and convergence-history files.

use std::io::{self, Write};

use super::FlowSolution;
use crate::mesh::Mesh;

impl FlowSolution {
    /// Legacy VTK file with velocity (mm/s), pressure (Pa) and, when present,
    /// temperature (K) and polymeric stress components (Pa).
    pub fn write_vtk<W: Write>(&self, mesh: &Mesh, w: W) -> io::Result<()> {
        let mut scalars: Vec<(&str, Vec<f64>)> = vec![("pressure", self.p.clone())];
        if let Some(t) = &self.t {
            scalars.push(("temperature", t.clone()));
        }
        if let Some(s) = &self.sigma_p {
            for (i, name) in ["sigma_p_xx", "sigma_p_xy", "sigma_p_yy"].into_iter().enumerate() {
                scalars.push((name, s.iter().map(|v| v[i]).collect()));
            }
        }
        let refs: Vec<(&str, &[f64])> = scalars.iter().map(|(n, v)| (*n, v.as_slice())).collect();
        mesh.write_vtk(w, &refs, &[("velocity", &self.u)])
    }

    /// `iteration,relative_correction` rows.
    pub fn write_residual_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "iteration,relative_correction")?;
        for (i, r) in self.residual_history.iter().enumerate() {
            writeln!(w, "{},{:e}", i + 1, r)?;
        }
        Ok(())
    }
}
