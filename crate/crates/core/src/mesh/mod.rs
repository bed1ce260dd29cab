//! Boundary-conforming triangular meshes of the nozzle half-domain.
//!
//! The half-domain is `{0 <= x <= l_total, 0 <= y <= r(x)}`. Boundary points
//! are equidistributed against an axial size function, interior points come
//! from a staggered lattice kept clear of the boundary, and the constrained
//! Delaunay triangulation of both is lightly smoothed. The same mesh serves
//! axisymmetric and planar solves.

mod io;
mod locate;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use spade::{ConstrainedDelaunayTriangulation, HasPosition, Point2, Triangulation};
use thiserror::Error;

use crate::geometry::{BoundaryProfile, NozzleDims};

pub use locate::PointLocator;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeshError {
    #[error("mesh generation failed: {0}")]
    MeshFailure(String),
    #[error("invalid mesh: {0}")]
    Invalid(String),
    #[error("mesh parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BoundaryTag {
    Inlet,
    Outlet,
    Wall,
    HeatedWall,
    Axis,
    /// Wall sliding axially at `BoundaryConditions::wall_speed`.
    MovingWall,
}

impl BoundaryTag {
    pub fn is_wall(self) -> bool {
        matches!(self, BoundaryTag::Wall | BoundaryTag::HeatedWall | BoundaryTag::MovingWall)
    }

    pub fn name(self) -> &'static str {
        match self {
            BoundaryTag::Inlet => "Inlet",
            BoundaryTag::Outlet => "Outlet",
            BoundaryTag::Wall => "Wall",
            BoundaryTag::HeatedWall => "HeatedWall",
            BoundaryTag::Axis => "Axis",
            BoundaryTag::MovingWall => "MovingWall",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "Inlet" => BoundaryTag::Inlet,
            "Outlet" => BoundaryTag::Outlet,
            "Wall" => BoundaryTag::Wall,
            "HeatedWall" => BoundaryTag::HeatedWall,
            "Axis" => BoundaryTag::Axis,
            "MovingWall" => BoundaryTag::MovingWall,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub nodes: [usize; 2],
    pub tag: BoundaryTag,
}

/// Linear triangles with counter-clockwise node order and tagged boundary edges.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub nodes: Vec<[f64; 2]>,
    pub elements: Vec<[usize; 3]>,
    pub boundary: Vec<BoundaryEdge>,
    /// Nominal element size `h` the mesh was generated for (mm).
    pub resolution: f64,
}

/// Mesh generation controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshParams {
    /// Far-field element size (mm).
    pub h: f64,
    /// Size factor applied near the contraction and outlet land (`<= 1`).
    pub grading: f64,
    /// Refined zone starts this far upstream of the contraction (mm).
    pub refine_margin: f64,
    /// Length of the linear size transition upstream of the refined zone (mm).
    pub transition: f64,
    /// Distance between the downstream end of the heated wall and the outlet face (mm).
    pub heated_offset: f64,
    pub smoothing_passes: usize,
    pub min_quality: f64,
}

impl Default for MeshParams {
    fn default() -> Self {
        Self {
            h: 0.1,
            grading: 0.5,
            refine_margin: 0.5,
            transition: 2.0,
            heated_offset: 0.0,
            smoothing_passes: 4,
            min_quality: 0.2,
        }
    }
}

impl MeshParams {
    pub fn uniform(h: f64) -> Self {
        Self { h, grading: 1.0, ..Self::default() }
    }

    fn check(&self) -> Result<(), MeshError> {
        if !(self.h.is_finite() && self.h > 0.0) {
            return Err(MeshError::MeshFailure(format!("element size must be positive, got {}", self.h)));
        }
        if !(self.grading > 0.0 && self.grading <= 1.0) {
            return Err(MeshError::MeshFailure(format!("grading must lie in (0, 1], got {}", self.grading)));
        }
        if self.refine_margin < 0.0 || self.transition < 0.0 || self.heated_offset < 0.0 {
            return Err(MeshError::MeshFailure("negative refinement or heating distances".into()));
        }
        Ok(())
    }
}

/// Summary numbers of a mesh. Element size is the side of the equilateral
/// triangle with the same area.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshStatistics {
    pub n_nodes: usize,
    pub n_elements: usize,
    pub min_quality: f64,
    pub h_min: f64,
    pub h_max: f64,
}

/// Axial element-size function.
#[derive(Debug, Clone, Copy)]
struct SizeField {
    h: f64,
    h_fine: f64,
    fine_from: f64,
    coarse_until: f64,
}

impl SizeField {
    fn new(profile: &BoundaryProfile, p: &MeshParams) -> Self {
        let fine_from = profile.markers().contraction_start - p.refine_margin;
        Self {
            h: p.h,
            h_fine: p.h * p.grading,
            fine_from,
            coarse_until: fine_from - p.transition,
        }
    }

    fn at(&self, x: f64) -> f64 {
        if x >= self.fine_from {
            self.h_fine
        } else if x <= self.coarse_until {
            self.h
        } else {
            let s = (x - self.coarse_until) / (self.fine_from - self.coarse_until);
            self.h + (self.h_fine - self.h) * s
        }
    }
}

pub(crate) fn triangle_area(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

/// `2 r_in / r_circ`: 1 for equilateral triangles, 0 for degenerate ones.
pub fn triangle_quality(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    let la = dist(b, c);
    let lb = dist(a, c);
    let lc = dist(a, b);
    let area = triangle_area(a, b, c);
    if area <= 0.0 {
        return 0.0;
    }
    let s = 0.5 * (la + lb + lc);
    let r_in = area / s;
    let r_circ = la * lb * lc / (4.0 * area);
    2.0 * r_in / r_circ
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

fn point_segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    let t = if len2 > 0.0 {
        (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    dist(p, [a[0] + t * d[0], a[1] + t * d[1]])
}

fn turning_angle(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    let u = [b[0] - a[0], b[1] - a[1]];
    let v = [c[0] - b[0], c[1] - b[1]];
    let cross = u[0] * v[1] - u[1] * v[0];
    let dot = u[0] * v[0] + u[1] * v[1];
    cross.atan2(dot).abs()
}

/// Places nodes along a polyline so that spacing follows the size field.
/// Returns the end points plus the new interior nodes.
fn discretize_polyline(poly: &[[f64; 2]], size: &SizeField) -> Vec<[f64; 2]> {
    const SUB: usize = 64;
    // Fine samples with cumulative size-normalized length.
    let mut samples = vec![poly[0]];
    let mut cum = vec![0.0];
    for w in poly.windows(2) {
        let (a, b) = (w[0], w[1]);
        let len = dist(a, b);
        for i in 1..=SUB {
            let t = i as f64 / SUB as f64;
            let xm = a[0] + (b[0] - a[0]) * (t - 0.5 / SUB as f64);
            let prev = cum[cum.len() - 1];
            cum.push(prev + len / SUB as f64 / size.at(xm));
            samples.push([a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t]);
        }
    }
    let total = cum[cum.len() - 1];
    let n = total.round().max(1.0) as usize;
    let mut out = vec![poly[0]];
    let mut k = 0;
    for j in 1..n {
        let target = total * j as f64 / n as f64;
        while cum[k + 1] < target {
            k += 1;
        }
        let frac = (target - cum[k]) / (cum[k + 1] - cum[k]);
        let (a, b) = (samples[k], samples[k + 1]);
        out.push([a[0] + (b[0] - a[0]) * frac, a[1] + (b[1] - a[1]) * frac]);
    }
    out.push(poly[poly.len() - 1]);
    out
}

#[derive(Debug, Clone, Copy)]
struct Site {
    p: [f64; 2],
    id: usize,
}

impl HasPosition for Site {
    type Scalar = f64;
    fn position(&self) -> Point2<f64> {
        Point2::new(self.p[0], self.p[1])
    }
}

/// Wall polyline with extra vertices at the heated-wall limits.
fn wall_with_breaks(profile: &BoundaryProfile, breaks: &[f64], chord: f64) -> Vec<[f64; 2]> {
    let mut wall = profile.wall_polyline(chord);
    for &xb in breaks {
        if xb <= 0.0 || xb >= profile.length() {
            continue;
        }
        if wall.iter().any(|p| (p[0] - xb).abs() < 1e-12) {
            continue;
        }
        if let Some(i) = wall.windows(2).position(|w| w[0][0] < xb && xb < w[1][0]) {
            let (a, b) = (wall[i], wall[i + 1]);
            let t = (xb - a[0]) / (b[0] - a[0]);
            wall.insert(i + 1, [xb, a[1] + (b[1] - a[1]) * t]);
        }
    }
    wall
}

/// Meshes the half-domain under `profile`.
///
/// Wall edges inside `[l_total - heated_offset - l_heat, l_total - heated_offset]`
/// are tagged `HeatedWall`; the remaining wall edges are `Wall`.
pub fn generate_mesh(profile: &BoundaryProfile, dims: &NozzleDims, params: &MeshParams) -> Result<Mesh, MeshError> {
    params.check()?;
    let size = SizeField::new(profile, params);
    let length = profile.length();
    let heat_end = length - params.heated_offset;
    let heat_start = heat_end - dims.l_heat;
    let wall = wall_with_breaks(profile, &[heat_start, heat_end], size.h_fine.min(size.h) * 0.25);
    let r_in = wall[0][1];
    let r_out = wall[wall.len() - 1][1];

    // Counter-clockwise loop: axis, outlet, wall (reversed), inlet. The wall
    // is split into pieces at kinks and at the heated-wall limits.
    let mut pieces: Vec<(Vec<[f64; 2]>, BoundaryTag)> = vec![
        (vec![[0.0, 0.0], [length, 0.0]], BoundaryTag::Axis),
        (vec![[length, 0.0], [length, r_out]], BoundaryTag::Outlet),
    ];
    let rev: Vec<[f64; 2]> = wall.iter().rev().copied().collect();
    let mut cur = vec![rev[0]];
    for i in 1..rev.len() {
        cur.push(rev[i]);
        let split = i + 1 == rev.len()
            || [heat_start, heat_end].iter().any(|&xb| (rev[i][0] - xb).abs() < 1e-12)
            || turning_angle(rev[i - 1], rev[i], rev[i + 1]) > 0.1;
        if split {
            pieces.push((std::mem::replace(&mut cur, vec![rev[i]]), BoundaryTag::Wall));
        }
    }
    pieces.push((vec![[0.0, r_in], [0.0, 0.0]], BoundaryTag::Inlet));

    let mut bnodes: Vec<[f64; 2]> = Vec::new();
    let mut btags: Vec<BoundaryTag> = Vec::new();
    for (poly, tag) in &pieces {
        let pts = discretize_polyline(poly, &size);
        for k in 0..pts.len() - 1 {
            let tag = if tag.is_wall() {
                let xm = 0.5 * (pts[k][0] + pts[k + 1][0]);
                if xm >= heat_start && xm <= heat_end {
                    BoundaryTag::HeatedWall
                } else {
                    BoundaryTag::Wall
                }
            } else {
                *tag
            };
            bnodes.push(pts[k]);
            btags.push(tag);
        }
    }
    let nb = bnodes.len();
    let segments: Vec<([f64; 2], [f64; 2])> = (0..nb).map(|i| (bnodes[i], bnodes[(i + 1) % nb])).collect();

    // Staggered interior lattice on columns equidistributed in 1/h.
    let mut interior: Vec<[f64; 2]> = Vec::new();
    let col_spacing = |x: f64| size.at(x) * 3f64.sqrt() * 0.5;
    let mut cols = vec![0.0];
    {
        const SAMPLES: usize = 4096;
        let mut cum = vec![0.0; SAMPLES + 1];
        for i in 0..SAMPLES {
            let xm = length * (i as f64 + 0.5) / SAMPLES as f64;
            cum[i + 1] = cum[i] + length / SAMPLES as f64 / col_spacing(xm);
        }
        let n = cum[SAMPLES].round().max(1.0) as usize;
        let mut k = 0;
        for j in 1..n {
            let target = cum[SAMPLES] * j as f64 / n as f64;
            while cum[k + 1] < target {
                k += 1;
            }
            let frac = (target - cum[k]) / (cum[k + 1] - cum[k]);
            cols.push(length * (k as f64 + frac) / SAMPLES as f64);
        }
    }
    let seg_bins = SegmentBins::new(&segments, size.h_fine.min(size.h));
    for (k, &x) in cols.iter().enumerate().skip(1) {
        let hx = size.at(x);
        let r = profile.radius_at(x);
        let rows = (r / hx).round().max(1.0);
        let dy = r / rows;
        let shift = if k % 2 == 1 { 0.5 } else { 0.0 };
        let mut j = 0usize;
        loop {
            let y = (j as f64 + shift) * dy;
            j += 1;
            if y >= r {
                break;
            }
            if y <= 0.0 {
                continue;
            }
            let p = [x, y];
            if seg_bins.min_distance(p, &segments, hx) >= 0.55 * hx && inside_loop(p, &bnodes) {
                interior.push(p);
            }
        }
    }

    let mut sites: Vec<Site> = bnodes.iter().chain(interior.iter()).enumerate().map(|(id, &p)| Site { p, id }).collect();
    let edges: Vec<[usize; 2]> = (0..nb).map(|i| [i, (i + 1) % nb]).collect();
    let cdt = ConstrainedDelaunayTriangulation::<Site>::bulk_load_cdt(std::mem::take(&mut sites), edges)
        .map_err(|e| MeshError::MeshFailure(format!("triangulation failed: {e:?}")))?;

    let mut nodes: Vec<[f64; 2]> = bnodes.iter().chain(interior.iter()).copied().collect();
    let mut elements = Vec::new();
    for face in cdt.inner_faces() {
        let v = face.vertices();
        let ids = [v[0].data().id, v[1].data().id, v[2].data().id];
        let c = [
            (nodes[ids[0]][0] + nodes[ids[1]][0] + nodes[ids[2]][0]) / 3.0,
            (nodes[ids[0]][1] + nodes[ids[1]][1] + nodes[ids[2]][1]) / 3.0,
        ];
        if !inside_loop(c, &bnodes) {
            continue;
        }
        let tri = if triangle_area(nodes[ids[0]], nodes[ids[1]], nodes[ids[2]]) > 0.0 {
            ids
        } else {
            [ids[0], ids[2], ids[1]]
        };
        elements.push(tri);
    }
    elements.sort_unstable();

    smooth(&mut nodes, &elements, nb, params.smoothing_passes);

    let boundary: Vec<BoundaryEdge> = (0..nb)
        .map(|i| BoundaryEdge { nodes: [i, (i + 1) % nb], tag: btags[i] })
        .collect();
    let mesh = Mesh { nodes, elements, boundary, resolution: params.h };
    mesh.validate()?;
    let q = mesh.min_quality();
    if q < params.min_quality {
        return Err(MeshError::MeshFailure(format!(
            "minimum element quality {q:.3} below floor {}",
            params.min_quality
        )));
    }
    Ok(mesh)
}

/// Ray-casting point-in-polygon test for the closed boundary loop.
fn inside_loop(p: [f64; 2], poly: &[[f64; 2]]) -> bool {
    let mut inside = false;
    let n = poly.len();
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (poly[i], poly[j]);
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
            if p[0] < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Uniform bucket grid over boundary segments for clearance queries.
struct SegmentBins {
    x0: f64,
    y0: f64,
    cell: f64,
    nx: usize,
    ny: usize,
    bins: Vec<Vec<usize>>,
}

impl SegmentBins {
    fn new(segments: &[([f64; 2], [f64; 2])], h_min: f64) -> Self {
        let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
        for (a, b) in segments {
            for p in [a, b] {
                x0 = x0.min(p[0]);
                y0 = y0.min(p[1]);
                x1 = x1.max(p[0]);
                y1 = y1.max(p[1]);
            }
        }
        let cell = (2.0 * h_min).max(((x1 - x0) * (y1 - y0) / 1e6).sqrt()).max(1e-9);
        let nx = ((x1 - x0) / cell).ceil() as usize + 1;
        let ny = ((y1 - y0) / cell).ceil() as usize + 1;
        let mut bins = vec![Vec::new(); nx * ny];
        for (k, (a, b)) in segments.iter().enumerate() {
            let i0 = ((a[0].min(b[0]) - x0) / cell).floor() as usize;
            let i1 = ((a[0].max(b[0]) - x0) / cell).floor() as usize;
            let j0 = ((a[1].min(b[1]) - y0) / cell).floor() as usize;
            let j1 = ((a[1].max(b[1]) - y0) / cell).floor() as usize;
            for i in i0..=i1.min(nx - 1) {
                for j in j0..=j1.min(ny - 1) {
                    bins[j * nx + i].push(k);
                }
            }
        }
        Self { x0, y0, cell, nx, ny, bins }
    }

    /// Distance to the nearest segment, exact whenever it is below `radius`.
    fn min_distance(&self, p: [f64; 2], segments: &[([f64; 2], [f64; 2])], radius: f64) -> f64 {
        let reach = (radius / self.cell).ceil() as isize + 1;
        let ci = ((p[0] - self.x0) / self.cell).floor() as isize;
        let cj = ((p[1] - self.y0) / self.cell).floor() as isize;
        let mut best = f64::INFINITY;
        for i in (ci - reach).max(0)..=(ci + reach).min(self.nx as isize - 1) {
            for j in (cj - reach).max(0)..=(cj + reach).min(self.ny as isize - 1) {
                for &k in &self.bins[j as usize * self.nx + i as usize] {
                    let (a, b) = segments[k];
                    best = best.min(point_segment_distance(p, a, b));
                }
            }
        }
        best
    }
}

/// Laplacian smoothing of interior nodes; a move is kept only if it does not
/// lower the worst quality of the node's patch.
fn smooth(nodes: &mut [[f64; 2]], elements: &[[usize; 3]], n_fixed: usize, passes: usize) {
    let n = nodes.len();
    let mut patch: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut nbrs: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (e, tri) in elements.iter().enumerate() {
        for k in 0..3 {
            patch[tri[k]].push(e);
            for l in 0..3 {
                if l != k && !nbrs[tri[k]].contains(&tri[l]) {
                    nbrs[tri[k]].push(tri[l]);
                }
            }
        }
    }
    let patch_quality = |nodes: &[[f64; 2]], v: usize| -> f64 {
        patch[v]
            .iter()
            .map(|&e| {
                let t = elements[e];
                triangle_quality(nodes[t[0]], nodes[t[1]], nodes[t[2]])
            })
            .fold(f64::INFINITY, f64::min)
    };
    for _ in 0..passes {
        for v in n_fixed..n {
            if nbrs[v].is_empty() {
                continue;
            }
            let m = nbrs[v].len() as f64;
            let target = [
                nbrs[v].iter().map(|&u| nodes[u][0]).sum::<f64>() / m,
                nbrs[v].iter().map(|&u| nodes[u][1]).sum::<f64>() / m,
            ];
            let before = patch_quality(nodes, v);
            let old = nodes[v];
            nodes[v] = target;
            if patch_quality(nodes, v) < before {
                nodes[v] = old;
            }
        }
    }
}

impl Mesh {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn element_coords(&self, e: usize) -> [[f64; 2]; 3] {
        let t = self.elements[e];
        [self.nodes[t[0]], self.nodes[t[1]], self.nodes[t[2]]]
    }

    pub fn element_area(&self, e: usize) -> f64 {
        let [a, b, c] = self.element_coords(e);
        triangle_area(a, b, c)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.elements.len()).map(|e| self.element_area(e)).sum()
    }

    pub fn min_quality(&self) -> f64 {
        (0..self.elements.len())
            .map(|e| {
                let [a, b, c] = self.element_coords(e);
                triangle_quality(a, b, c)
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Per-node flags: which tags touch the node.
    pub fn node_tags(&self) -> Vec<Vec<BoundaryTag>> {
        let mut tags = vec![Vec::new(); self.nodes.len()];
        for e in &self.boundary {
            for &n in &e.nodes {
                if !tags[n].contains(&e.tag) {
                    tags[n].push(e.tag);
                }
            }
        }
        tags
    }

    /// Undirected edges with the number of incident elements.
    pub fn edge_counts(&self) -> HashMap<(usize, usize), usize> {
        let mut map = HashMap::new();
        for t in &self.elements {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *map.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        map
    }

    /// Checks orientation, boundary closure and tag uniqueness.
    pub fn validate(&self) -> Result<(), MeshError> {
        for (e, t) in self.elements.iter().enumerate() {
            if t.iter().any(|&n| n >= self.nodes.len()) {
                return Err(MeshError::Invalid(format!("element {e} references a missing node")));
            }
            if self.element_area(e) <= 0.0 {
                return Err(MeshError::Invalid(format!("element {e} has non-positive area")));
            }
        }
        let counts = self.edge_counts();
        let mut tagged: HashMap<(usize, usize), BoundaryTag> = HashMap::new();
        for b in &self.boundary {
            let key = (b.nodes[0].min(b.nodes[1]), b.nodes[0].max(b.nodes[1]));
            if tagged.insert(key, b.tag).is_some() {
                return Err(MeshError::Invalid(format!("boundary edge {key:?} tagged twice")));
            }
            match counts.get(&key) {
                Some(1) => {}
                _ => return Err(MeshError::Invalid(format!("boundary edge {key:?} is not a mesh boundary edge"))),
            }
        }
        for (key, &c) in &counts {
            if c > 2 {
                return Err(MeshError::Invalid(format!("edge {key:?} shared by {c} elements")));
            }
            if c == 1 && !tagged.contains_key(key) {
                return Err(MeshError::Invalid(format!("untagged boundary edge {key:?}")));
            }
        }
        let mut degree = vec![0usize; self.nodes.len()];
        for b in &self.boundary {
            degree[b.nodes[0]] += 1;
            degree[b.nodes[1]] += 1;
        }
        if degree.iter().any(|&d| d != 0 && d != 2) {
            return Err(MeshError::Invalid("boundary edges do not form closed loops".into()));
        }
        Ok(())
    }

    /// Builds a mesh from raw parts and validates it.
    pub fn from_parts(
        nodes: Vec<[f64; 2]>,
        elements: Vec<[usize; 3]>,
        boundary: Vec<BoundaryEdge>,
        resolution: f64,
    ) -> Result<Self, MeshError> {
        let m = Self { nodes, elements, boundary, resolution };
        m.validate()?;
        Ok(m)
    }
}

/// Exact counts and extrema over a mesh.
pub fn mesh_statistics(mesh: &Mesh) -> MeshStatistics {
    let mut h_min = f64::INFINITY;
    let mut h_max: f64 = 0.0;
    for e in 0..mesh.n_elements() {
        let h = (4.0 * mesh.element_area(e) / 3f64.sqrt()).sqrt();
        h_min = h_min.min(h);
        h_max = h_max.max(h);
    }
    MeshStatistics {
        n_nodes: mesh.n_nodes(),
        n_elements: mesh.n_elements(),
        min_quality: mesh.min_quality(),
        h_min,
        h_max,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_angle_profile, build_spline_profile};

    fn tri_mesh() -> Mesh {
        Mesh::from_parts(
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            vec![[0, 1, 2]],
            vec![
                BoundaryEdge { nodes: [0, 1], tag: BoundaryTag::Axis },
                BoundaryEdge { nodes: [1, 2], tag: BoundaryTag::Wall },
                BoundaryEdge { nodes: [2, 0], tag: BoundaryTag::Inlet },
            ],
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn single_triangle_statistics() {
        let s = mesh_statistics(&tri_mesh());
        assert_eq!((s.n_nodes, s.n_elements), (3, 1));
    }

    #[test]
    fn split_square_has_equal_qualities() {
        let m = Mesh::from_parts(
            vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
            vec![[0, 1, 2], [0, 2, 3]],
            vec![
                BoundaryEdge { nodes: [0, 1], tag: BoundaryTag::Axis },
                BoundaryEdge { nodes: [1, 2], tag: BoundaryTag::Outlet },
                BoundaryEdge { nodes: [2, 3], tag: BoundaryTag::Wall },
                BoundaryEdge { nodes: [3, 0], tag: BoundaryTag::Inlet },
            ],
            1.0,
        )
        .unwrap();
        let q0 = triangle_quality(m.nodes[0], m.nodes[1], m.nodes[2]);
        let q1 = triangle_quality(m.nodes[0], m.nodes[2], m.nodes[3]);
        assert!((q0 - q1).abs() < 1e-15);
        assert!((mesh_statistics(&m).min_quality - q0).abs() < 1e-15);
    }

    #[test]
    fn equilateral_quality_is_one() {
        let q = triangle_quality([0.0, 0.0], [1.0, 0.0], [0.5, 3f64.sqrt() / 2.0]);
        assert!((q - 1.0).abs() < 1e-12);
    }

    #[test]
    fn straight_channel_topology() {
        let r = 0.8;
        let profile = BoundaryProfile::straight_channel(4.0, r);
        let m = generate_mesh(&profile, profile.dims(), &MeshParams::uniform(r / 4.0)).unwrap();
        let edges = m.edge_counts().len() as i64;
        assert_eq!(m.n_nodes() as i64 - edges + m.n_elements() as i64, 1);
        assert!((m.total_area() - 4.0 * r).abs() < 1e-12);
    }

    #[test]
    fn table1_thirty_degrees_quality_and_tags() {
        let dims = NozzleDims::default();
        let profile = build_angle_profile(&dims, 30.0).unwrap();
        let params = MeshParams { h: 0.1, grading: 0.5, ..MeshParams::default() };
        let m = generate_mesh(&profile, &dims, &params).unwrap();
        let s = mesh_statistics(&m);
        assert!(s.min_quality >= 0.2, "{s:?}");
        assert!(s.h_min <= 1.2 * 0.1 * 0.5, "{s:?}");
        let area = profile.planar_area();
        assert!((m.total_area() - area).abs() / area < 1e-3);
        let x_heat = dims.l_total - dims.l_heat;
        for b in &m.boundary {
            let [a, c] = b.nodes;
            if b.tag == BoundaryTag::HeatedWall {
                assert!(m.nodes[a][0] >= x_heat - 1e-9 && m.nodes[c][0] >= x_heat - 1e-9);
            }
            match b.tag {
                BoundaryTag::Axis => assert!(m.nodes[a][1] == 0.0 && m.nodes[c][1] == 0.0),
                BoundaryTag::Inlet => assert!(m.nodes[a][0] == 0.0 && m.nodes[c][0] == 0.0),
                BoundaryTag::Outlet => assert!(m.nodes[a][0] == 18.0 && m.nodes[c][0] == 18.0),
                _ => {}
            }
        }
        assert!(m.boundary.iter().any(|b| b.tag == BoundaryTag::Wall));
        assert!(m.boundary.iter().any(|b| b.tag == BoundaryTag::HeatedWall));
        for p in &m.nodes {
            assert!(p[1] >= 0.0 && p[1] <= profile.radius_at(p[0]) + 1e-9);
        }
    }

    #[test]
    fn step_and_spline_profiles_mesh() {
        let dims = NozzleDims::default();
        let params = MeshParams { h: 0.2, grading: 0.25, ..MeshParams::default() };
        for profile in [
            build_angle_profile(&dims, 90.0).unwrap(),
            build_angle_profile(&dims, 5.0).unwrap(),
            build_spline_profile(&dims, 45.0, &[1.6, 1.5, 1.1, 0.5, 0.3, 0.25], 6, 3).unwrap(),
        ] {
            let m = generate_mesh(&profile, &dims, &params).unwrap();
            assert!(m.min_quality() >= 0.2);
            let area = profile.planar_area();
            assert!((m.total_area() - area).abs() / area < 1e-3, "{} vs {}", m.total_area(), area);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let dims = NozzleDims::default();
        let profile = build_angle_profile(&dims, 50.0).unwrap();
        let p = MeshParams { h: 0.2, grading: 0.25, ..MeshParams::default() };
        assert_eq!(generate_mesh(&profile, &dims, &p).unwrap(), generate_mesh(&profile, &dims, &p).unwrap());
    }

    #[test]
    fn rejects_bad_parameters() {
        let dims = NozzleDims::default();
        let profile = build_angle_profile(&dims, 50.0).unwrap();
        assert!(generate_mesh(&profile, &dims, &MeshParams { h: 0.0, ..MeshParams::default() }).is_err());
        assert!(generate_mesh(&profile, &dims, &MeshParams { grading: 2.0, ..MeshParams::default() }).is_err());
    }
}
