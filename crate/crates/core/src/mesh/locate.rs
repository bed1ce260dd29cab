//! Point location in a triangle mesh via a uniform bucket grid.

use super::Mesh;

pub struct PointLocator<'a> {
    mesh: &'a Mesh,
    x0: f64,
    y0: f64,
    cell: f64,
    nx: usize,
    ny: usize,
    bins: Vec<Vec<usize>>,
}

/// Barycentric coordinates of `p` in triangle `t`.
pub(crate) fn barycentric(t: [[f64; 2]; 3], p: [f64; 2]) -> [f64; 3] {
    let det = (t[1][0] - t[0][0]) * (t[2][1] - t[0][1]) - (t[2][0] - t[0][0]) * (t[1][1] - t[0][1]);
    let l1 = ((p[0] - t[0][0]) * (t[2][1] - t[0][1]) - (t[2][0] - t[0][0]) * (p[1] - t[0][1])) / det;
    let l2 = ((t[1][0] - t[0][0]) * (p[1] - t[0][1]) - (p[0] - t[0][0]) * (t[1][1] - t[0][1])) / det;
    [1.0 - l1 - l2, l1, l2]
}

impl<'a> PointLocator<'a> {
    pub fn new(mesh: &'a Mesh) -> Self {
        let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
        for p in &mesh.nodes {
            x0 = x0.min(p[0]);
            y0 = y0.min(p[1]);
            x1 = x1.max(p[0]);
            y1 = y1.max(p[1]);
        }
        let area = ((x1 - x0) * (y1 - y0)).max(1e-300);
        let cell = (area / mesh.elements.len().max(1) as f64).sqrt() * 2.0;
        let nx = ((x1 - x0) / cell).ceil() as usize + 1;
        let ny = ((y1 - y0) / cell).ceil() as usize + 1;
        let mut bins = vec![Vec::new(); nx * ny];
        for (e, t) in mesh.elements.iter().enumerate() {
            let xs = t.map(|n| mesh.nodes[n][0]);
            let ys = t.map(|n| mesh.nodes[n][1]);
            let i0 = ((xs.iter().cloned().fold(f64::MAX, f64::min) - x0) / cell) as usize;
            let i1 = ((xs.iter().cloned().fold(f64::MIN, f64::max) - x0) / cell) as usize;
            let j0 = ((ys.iter().cloned().fold(f64::MAX, f64::min) - y0) / cell) as usize;
            let j1 = ((ys.iter().cloned().fold(f64::MIN, f64::max) - y0) / cell) as usize;
            for i in i0..=i1.min(nx - 1) {
                for j in j0..=j1.min(ny - 1) {
                    bins[j * nx + i].push(e);
                }
            }
        }
        Self { mesh, x0, y0, cell, nx, ny, bins }
    }

    fn bin(&self, p: [f64; 2]) -> Option<usize> {
        let i = ((p[0] - self.x0) / self.cell).floor();
        let j = ((p[1] - self.y0) / self.cell).floor();
        if i < 0.0 || j < 0.0 || i as usize >= self.nx || j as usize >= self.ny {
            return None;
        }
        Some(j as usize * self.nx + i as usize)
    }

    /// Element containing `p` (with a small tolerance) and its barycentric coordinates.
    pub fn locate(&self, p: [f64; 2]) -> Option<(usize, [f64; 3])> {
        const TOL: f64 = 1e-10;
        let b = self.bin(p)?;
        self.bins[b].iter().find_map(|&e| {
            let l = barycentric(self.mesh.element_coords(e), p);
            (l.iter().all(|&v| v >= -TOL)).then_some((e, l))
        })
    }

    /// Like [`locate`](Self::locate), but points outside the mesh snap to the
    /// element whose barycentric coordinates are least negative.
    pub fn locate_nearest(&self, p: [f64; 2]) -> (usize, [f64; 3]) {
        if let Some(hit) = self.locate(p) {
            return hit;
        }
        let mut best = (0, [1.0, 0.0, 0.0]);
        let mut best_score = f64::NEG_INFINITY;
        let mut scan = |e: usize| {
            let l = barycentric(self.mesh.element_coords(e), p);
            let score = l.iter().cloned().fold(f64::INFINITY, f64::min);
            if score > best_score {
                best_score = score;
                let c = l.map(|v| v.max(0.0));
                let s = c[0] + c[1] + c[2];
                best = (e, c.map(|v| v / s));
            }
        };
        match self.bin(p) {
            Some(b) if !self.bins[b].is_empty() => self.bins[b].iter().for_each(|&e| scan(e)),
            _ => (0..self.mesh.elements.len()).for_each(&mut scan),
        }
        best
    }

    /// Linear interpolation of a nodal field at `p`.
    pub fn interpolate(&self, field: &[f64], p: [f64; 2]) -> f64 {
        let (e, l) = self.locate_nearest(p);
        let t = self.mesh.elements[e];
        l[0] * field[t[0]] + l[1] * field[t[1]] + l[2] * field[t[2]]
    }
}
