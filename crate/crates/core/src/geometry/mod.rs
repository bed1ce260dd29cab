//! Nozzle dimensions, contraction profiles and manufacturability constraints.
//!
//! All lengths are in millimetres. The profile `r(x)` is the wall radius of
//! the axisymmetric nozzle (or the half-height of the planar channel) as a
//! function of the axial coordinate `x`, measured from the inlet face.
//!
//! The contraction half-angle is measured between the converging wall and the
//! nozzle axis, so 90° is a flat step. The outlet land is anchored at the tip:
//! the contraction always ends exactly `l_out` upstream of the outlet face.

mod bspline;

use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bspline::ClampedBSpline;

/// Smallest admissible contraction half-angle in degrees.
pub const ALPHA_MIN_DEG: f64 = 5.0;
/// Largest admissible contraction half-angle in degrees (step contraction).
pub const ALPHA_MAX_DEG: f64 = 90.0;
/// Margin `y_i - y_{i+1} >= MONOTONICITY_MARGIN` (mm) enforced by the optimizer.
pub const MONOTONICITY_MARGIN: f64 = 1e-3;

const ENDPOINT_TOL: f64 = 1e-9;
const COLLINEAR_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("invalid nozzle dimension `{field}`: {reason}")]
    InvalidDims { field: &'static str, reason: String },
    #[error("half-angle {alpha}° outside [{ALPHA_MIN_DEG}°, {ALPHA_MAX_DEG}°]")]
    AngleOutOfBounds { alpha: f64 },
    #[error("geometry infeasible: {0}")]
    GeometryInfeasible(String),
    #[error("constraint violated: {0}")]
    ConstraintViolated(String),
}

/// Fixed nozzle lengths and diameters in millimetres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NozzleDims {
    pub l_total: f64,
    pub l_heat: f64,
    pub l_out: f64,
    pub l_pressure: f64,
    pub d_in: f64,
    pub d_out: f64,
}

impl Default for NozzleDims {
    fn default() -> Self {
        Self {
            l_total: 18.0,
            l_heat: 14.66,
            l_out: 0.9,
            l_pressure: 1.0,
            d_in: 3.2,
            d_out: 0.5,
        }
    }
}

impl NozzleDims {
    pub fn r_in(&self) -> f64 {
        0.5 * self.d_in
    }

    pub fn r_out(&self) -> f64 {
        0.5 * self.d_out
    }

    /// Every violated invariant, in field order.
    pub fn violations(&self) -> Vec<GeometryError> {
        let mut out = Vec::new();
        let fields = [
            ("l_total", self.l_total),
            ("l_heat", self.l_heat),
            ("l_out", self.l_out),
            ("l_pressure", self.l_pressure),
            ("d_in", self.d_in),
            ("d_out", self.d_out),
        ];
        for (field, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                out.push(GeometryError::InvalidDims {
                    field,
                    reason: format!("must be positive and finite, got {v}"),
                });
            }
        }
        if self.d_out >= self.d_in {
            out.push(GeometryError::InvalidDims {
                field: "d_out",
                reason: format!("outlet diameter {} must be below inlet diameter {}", self.d_out, self.d_in),
            });
        }
        if self.l_out >= self.l_total {
            out.push(GeometryError::InvalidDims {
                field: "l_out",
                reason: format!("outlet land {} must be shorter than l_total {}", self.l_out, self.l_total),
            });
        }
        if self.l_heat > self.l_total {
            out.push(GeometryError::InvalidDims {
                field: "l_heat",
                reason: format!("heated length {} exceeds l_total {}", self.l_heat, self.l_total),
            });
        }
        if self.l_pressure >= self.l_total {
            out.push(GeometryError::InvalidDims {
                field: "l_pressure",
                reason: format!("pressure station {} must lie inside l_total {}", self.l_pressure, self.l_total),
            });
        }
        out
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        match self.violations().into_iter().next() {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }

    /// Axial length of a straight taper at half-angle `alpha_deg`.
    pub fn taper_length(&self, alpha_deg: f64) -> f64 {
        if alpha_deg >= ALPHA_MAX_DEG {
            return 0.0;
        }
        (self.r_in() - self.r_out()) / alpha_deg.to_radians().tan()
    }

    /// Taper start for half-angle `alpha_deg` with the outlet land anchored at the tip.
    pub fn contraction_start(&self, alpha_deg: f64) -> f64 {
        self.l_total - self.l_out - self.taper_length(alpha_deg)
    }

    /// Ordinates on the straight taper of `alpha`, sampled at `n_ctrl` uniform abscissae.
    pub fn taper_ordinates(&self, n_ctrl: usize) -> Vec<f64> {
        let (a, b) = (self.r_in(), self.r_out());
        let m = (n_ctrl.max(2) - 1) as f64;
        (0..n_ctrl.max(2))
            .map(|i| {
                if i == 0 {
                    a
                } else if i + 1 == n_ctrl.max(2) {
                    b
                } else {
                    a - (a - b) * i as f64 / m
                }
            })
            .collect()
    }
}

/// Shape parameters of the contraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProfileParams {
    /// Straight taper at half-angle `alpha` (degrees).
    Angle { alpha: f64 },
    /// B-spline contraction. `alpha_scale` sets the taper length (and hence all
    /// control abscissae); `y_ctrl` holds every control ordinate, including the
    /// end points pinned to the inlet and outlet radii.
    Spline { alpha_scale: f64, y_ctrl: Vec<f64> },
}

impl ProfileParams {
    /// Builds the boundary profile; splines use the given degree.
    pub fn build(&self, dims: &NozzleDims, degree: usize) -> Result<BoundaryProfile, GeometryError> {
        match self {
            ProfileParams::Angle { alpha } => build_angle_profile(dims, *alpha),
            ProfileParams::Spline { alpha_scale, y_ctrl } => {
                build_spline_profile(dims, *alpha_scale, y_ctrl, y_ctrl.len(), degree)
            }
        }
    }

    /// The governing half-angle (the angle itself, or the spline's scale angle).
    pub fn alpha(&self) -> f64 {
        match self {
            ProfileParams::Angle { alpha } => *alpha,
            ProfileParams::Spline { alpha_scale, .. } => *alpha_scale,
        }
    }
}

/// Linear inequality residuals `y_i - y_{i+1}` of the monotone-decrease constraint.
///
/// The profile is feasible when every residual is strictly positive. Angle
/// parametrizations carry no such constraints.
pub fn monotonicity_constraints(params: &ProfileParams) -> Vec<f64> {
    match params {
        ProfileParams::Angle { .. } => Vec::new(),
        ProfileParams::Spline { y_ctrl, .. } => y_ctrl.windows(2).map(|w| w[0] - w[1]).collect(),
    }
}

fn check_alpha(alpha: f64) -> Result<(), GeometryError> {
    if !(alpha.is_finite() && (ALPHA_MIN_DEG..=ALPHA_MAX_DEG).contains(&alpha)) {
        return Err(GeometryError::AngleOutOfBounds { alpha });
    }
    Ok(())
}

fn check_fit(dims: &NozzleDims, alpha: f64) -> Result<f64, GeometryError> {
    let taper = dims.taper_length(alpha);
    if taper + dims.l_out > dims.l_total {
        return Err(GeometryError::GeometryInfeasible(format!(
            "taper of {taper:.6} mm at {alpha}° plus outlet land {} mm exceeds l_total {} mm",
            dims.l_out, dims.l_total
        )));
    }
    Ok(taper)
}

/// Straight conical (or planar wedge) contraction at half-angle `alpha` degrees.
pub fn build_angle_profile(dims: &NozzleDims, alpha: f64) -> Result<BoundaryProfile, GeometryError> {
    dims.validate()?;
    check_alpha(alpha)?;
    let taper = check_fit(dims, alpha)?;
    let end = dims.l_total - dims.l_out;
    Ok(BoundaryProfile {
        dims: *dims,
        contraction_start: end - taper,
        contraction_end: end,
        shape: Contraction::Line,
    })
}

/// B-spline contraction whose control abscissae are spread uniformly over the
/// taper implied by `alpha_scale` and whose ordinates are `y_ctrl`.
pub fn build_spline_profile(
    dims: &NozzleDims,
    alpha_scale: f64,
    y_ctrl: &[f64],
    n_ctrl: usize,
    degree: usize,
) -> Result<BoundaryProfile, GeometryError> {
    dims.validate()?;
    check_alpha(alpha_scale)?;
    if degree == 0 {
        return Err(GeometryError::GeometryInfeasible("spline degree must be at least 1".into()));
    }
    if n_ctrl < degree + 1 {
        return Err(GeometryError::GeometryInfeasible(format!(
            "{n_ctrl} control points cannot carry a degree-{degree} spline"
        )));
    }
    if y_ctrl.len() != n_ctrl {
        return Err(GeometryError::GeometryInfeasible(format!(
            "expected {n_ctrl} control ordinates, got {}",
            y_ctrl.len()
        )));
    }
    let (r_in, r_out) = (dims.r_in(), dims.r_out());
    for (i, w) in monotonicity_constraints(&ProfileParams::Spline {
        alpha_scale,
        y_ctrl: y_ctrl.to_vec(),
    })
    .iter()
    .enumerate()
    {
        if !(*w > 0.0) {
            return Err(GeometryError::ConstraintViolated(format!(
                "control ordinate {} ({}) is not below ordinate {} ({})",
                i + 1,
                y_ctrl[i + 1],
                i,
                y_ctrl[i]
            )));
        }
    }
    if (y_ctrl[0] - r_in).abs() > ENDPOINT_TOL || (y_ctrl[n_ctrl - 1] - r_out).abs() > ENDPOINT_TOL {
        return Err(GeometryError::ConstraintViolated(format!(
            "end ordinates must equal the inlet radius {r_in} and outlet radius {r_out}"
        )));
    }
    let taper = check_fit(dims, alpha_scale)?;
    let end = dims.l_total - dims.l_out;
    let start = end - taper;

    let m = (n_ctrl - 1) as f64;
    let collinear = y_ctrl
        .iter()
        .enumerate()
        .all(|(i, &y)| (y - (r_in - (r_in - r_out) * i as f64 / m)).abs() <= COLLINEAR_TOL);
    let shape = if taper == 0.0 || collinear {
        Contraction::Line
    } else {
        let mut ctrl: Vec<[f64; 2]> = y_ctrl
            .iter()
            .enumerate()
            .map(|(i, &y)| [start + taper * i as f64 / m, y])
            .collect();
        ctrl[0] = [start, r_in];
        ctrl[n_ctrl - 1] = [end, r_out];
        Contraction::Spline(ClampedBSpline::new(degree, ctrl))
    };
    Ok(BoundaryProfile {
        dims: *dims,
        contraction_start: start,
        contraction_end: end,
        shape,
    })
}

#[derive(Debug, Clone, PartialEq)]
enum Contraction {
    Line,
    Spline(ClampedBSpline),
}

/// Axial positions of the profile's section boundaries (mm).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectionMarkers {
    pub inlet_face: f64,
    pub contraction_start: f64,
    pub contraction_end: f64,
    pub outlet_face: f64,
}

/// Wall radius as a function of axial position: straight inlet section,
/// contraction, and outlet land.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryProfile {
    dims: NozzleDims,
    contraction_start: f64,
    contraction_end: f64,
    shape: Contraction,
}

impl BoundaryProfile {
    /// A straight channel of constant radius `radius` over `[0, length]`.
    ///
    /// Used for verification flows; there is no contraction.
    pub fn straight_channel(length: f64, radius: f64) -> Self {
        let dims = NozzleDims {
            l_total: length,
            l_heat: length,
            l_out: 0.0,
            l_pressure: 0.0,
            d_in: 2.0 * radius,
            d_out: 2.0 * radius,
        };
        Self {
            dims,
            contraction_start: length,
            contraction_end: length,
            shape: Contraction::Line,
        }
    }

    pub fn dims(&self) -> &NozzleDims {
        &self.dims
    }

    pub fn length(&self) -> f64 {
        self.dims.l_total
    }

    pub fn markers(&self) -> SectionMarkers {
        SectionMarkers {
            inlet_face: 0.0,
            contraction_start: self.contraction_start,
            contraction_end: self.contraction_end,
            outlet_face: self.dims.l_total,
        }
    }

    pub fn is_step(&self) -> bool {
        self.contraction_end - self.contraction_start <= 0.0 && self.dims.d_in != self.dims.d_out
    }

    pub fn is_spline(&self) -> bool {
        matches!(self.shape, Contraction::Spline(_))
    }

    /// Wall radius at `x`. At a step the upstream radius is returned.
    pub fn radius_at(&self, x: f64) -> f64 {
        let (r_in, r_out) = (self.dims.r_in(), self.dims.r_out());
        if x <= self.contraction_start {
            return r_in;
        }
        if x >= self.contraction_end {
            return r_out;
        }
        match &self.shape {
            Contraction::Line => {
                let s = (x - self.contraction_start) / (self.contraction_end - self.contraction_start);
                r_in + (r_out - r_in) * s
            }
            Contraction::Spline(sp) => sp.point(sp.parameter_at_x(x))[1],
        }
    }

    /// Wall polyline from the inlet corner `(0, r_in)` to the outlet corner
    /// `(l_total, r_out)`. Curved parts are sampled with chords no longer than
    /// `max_chord`; straight parts contribute only their end points.
    pub fn wall_polyline(&self, max_chord: f64) -> Vec<[f64; 2]> {
        let (r_in, r_out) = (self.dims.r_in(), self.dims.r_out());
        let mut pts = vec![[0.0, r_in]];
        let mut push = |p: [f64; 2]| {
            let last = pts[pts.len() - 1];
            if (p[0] - last[0]).abs() > 0.0 || (p[1] - last[1]).abs() > 0.0 {
                pts.push(p);
            }
        };
        push([self.contraction_start, r_in]);
        if let Contraction::Spline(sp) = &self.shape {
            let n = curve_samples(sp, max_chord);
            for i in 1..n {
                push(sp.point(i as f64 / n as f64));
            }
        }
        push([self.contraction_end, r_out]);
        push([self.dims.l_total, r_out]);
        pts
    }

    /// Cross-sectional integral `∫ r(x) dx` over `[0, l_total]` (mm²).
    pub fn planar_area(&self) -> f64 {
        let (r_in, r_out) = (self.dims.r_in(), self.dims.r_out());
        let taper = self.contraction_end - self.contraction_start;
        let inlet = r_in * self.contraction_start;
        let outlet = r_out * (self.dims.l_total - self.contraction_end);
        let mid = match &self.shape {
            Contraction::Line => 0.5 * (r_in + r_out) * taper,
            Contraction::Spline(sp) => {
                // ∫ y dx = ∫ y(t) x'(t) dt, Gauss-Legendre per knot span.
                let (gx, gw) = gauss_legendre_5();
                let mut breaks: Vec<f64> = sp.knots().to_vec();
                breaks.dedup();
                let mut acc = 0.0;
                for w in breaks.windows(2) {
                    let (a, b) = (w[0], w[1]);
                    for (xi, wi) in gx.iter().zip(gw.iter()) {
                        let t = 0.5 * (a + b) + 0.5 * (b - a) * xi;
                        acc += 0.5 * (b - a) * wi * sp.point(t)[1] * sp.tangent(t)[0];
                    }
                }
                acc
            }
        };
        inlet + mid + outlet
    }

    /// Writes `x r` pairs (mm, six decimals) sampled at most `spacing` apart,
    /// always including the section corners.
    pub fn write_polyline<W: Write>(&self, mut out: W, spacing: f64) -> io::Result<()> {
        let mut xs: Vec<f64> = Vec::new();
        let corners = [0.0, self.contraction_start, self.contraction_end, self.dims.l_total];
        for w in corners.windows(2) {
            let n = ((w[1] - w[0]) / spacing).ceil().max(1.0) as usize;
            for i in 0..n {
                xs.push(w[0] + (w[1] - w[0]) * i as f64 / n as f64);
            }
        }
        xs.push(self.dims.l_total);
        writeln!(out, "# x_mm r_mm")?;
        let mut last: Option<f64> = None;
        for x in xs {
            if last == Some(x) {
                if self.is_step() {
                    writeln!(out, "{:.6} {:.6}", x, self.dims.r_out())?;
                }
                continue;
            }
            writeln!(out, "{:.6} {:.6}", x, self.radius_at(x))?;
            last = Some(x);
        }
        Ok(())
    }
}

fn curve_samples(sp: &ClampedBSpline, max_chord: f64) -> usize {
    let poly_len: f64 = sp
        .control_points()
        .windows(2)
        .map(|w| ((w[1][0] - w[0][0]).powi(2) + (w[1][1] - w[0][1]).powi(2)).sqrt())
        .sum();
    ((poly_len / max_chord.max(1e-6)).ceil() as usize).clamp(16, 4096)
}

fn gauss_legendre_5() -> ([f64; 5], [f64; 5]) {
    let a = 0.538_469_310_105_683_1;
    let b = 0.906_179_845_938_664;
    let wa = 0.478_628_670_499_366_5;
    let wb = 0.236_926_885_056_189_1;
    ([-b, -a, 0.0, a, b], [wb, wa, 0.568_888_888_888_888_9, wa, wb])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn table1() -> NozzleDims {
        NozzleDims::default()
    }

    #[test]
    fn defaults_match_table_one() {
        let d = table1();
        assert_eq!(
            (d.l_total, d.l_heat, d.l_out, d.l_pressure, d.d_in, d.d_out),
            (18.0, 14.66, 0.9, 1.0, 3.2, 0.5)
        );
        assert!(d.validate().is_ok());
    }

    #[test]
    fn thirty_degree_taper() {
        let p = build_angle_profile(&table1(), 30.0).unwrap();
        let m = p.markers();
        let taper = 1.35 / 30f64.to_radians().tan();
        assert!((m.contraction_end - m.contraction_start - taper).abs() < 1e-12);
        assert!((taper - 2.3383).abs() < 1e-4);
        assert!((m.contraction_start - 14.7617).abs() < 1e-4);
    }

    #[test]
    fn ninety_degree_is_a_step() {
        let p = build_angle_profile(&table1(), 90.0).unwrap();
        let m = p.markers();
        assert_eq!(m.contraction_end - m.contraction_start, 0.0);
        assert!((m.contraction_start - 17.1).abs() < 1e-12);
        assert!(p.is_step());
        assert_eq!(p.radius_at(17.0), 1.6);
        assert_eq!(p.radius_at(17.2), 0.25);
    }

    #[test]
    fn fig3_optimum_taper_length() {
        let taper = table1().taper_length(56.07068249);
        let expected = 1.35 / 56.07068249f64.to_radians().tan();
        assert!((taper - expected).abs() < 1e-12, "{taper}");
        assert!((taper - 0.908).abs() < 1e-3);
    }

    #[test]
    fn angle_bounds_and_fit() {
        assert!(matches!(
            build_angle_profile(&table1(), 4.0),
            Err(GeometryError::AngleOutOfBounds { .. })
        ));
        assert!(matches!(
            build_angle_profile(&table1(), 91.0),
            Err(GeometryError::AngleOutOfBounds { .. })
        ));
        let short = NozzleDims { l_total: 3.0, l_heat: 2.5, ..table1() };
        assert!(matches!(
            build_angle_profile(&short, 10.0),
            Err(GeometryError::GeometryInfeasible(_))
        ));
    }

    #[test]
    fn monotonicity_residuals() {
        let r = |y: Vec<f64>| monotonicity_constraints(&ProfileParams::Spline { alpha_scale: 30.0, y_ctrl: y });
        let a = r(vec![1.6, 1.0, 0.25]);
        assert!((a[0] - 0.6).abs() < 1e-15 && (a[1] - 0.75).abs() < 1e-15);
        assert_eq!(r(vec![1.0, 1.0]), vec![0.0]);
        assert!((r(vec![0.5, 0.9])[0] + 0.4).abs() < 1e-15);
        assert!(monotonicity_constraints(&ProfileParams::Angle { alpha: 40.0 }).is_empty());
    }

    #[test]
    fn spline_rejects_increasing_ordinates() {
        let e = build_spline_profile(&table1(), 30.0, &[1.6, 1.0, 1.2, 0.25], 4, 3);
        assert!(matches!(e, Err(GeometryError::ConstraintViolated(_))));
        let e = build_spline_profile(&table1(), 30.0, &[1.6, 1.0, 0.5], 3, 3);
        assert!(matches!(e, Err(GeometryError::GeometryInfeasible(_))));
    }

    #[test]
    fn collinear_spline_equals_angle_profile() {
        let dims = table1();
        let y = dims.taper_ordinates(6);
        let s = build_spline_profile(&dims, 30.0, &y, 6, 3).unwrap();
        let a = build_angle_profile(&dims, 30.0).unwrap();
        for i in 0..=2000 {
            let x = 18.0 * i as f64 / 2000.0;
            assert!((s.radius_at(x) - a.radius_at(x)).abs() <= 1e-9);
        }
    }

    #[test]
    fn example_spline_is_monotone() {
        let dims = table1();
        let y = [1.6, 1.3, 1.0, 0.7, 0.4, 0.25];
        let s = build_spline_profile(&dims, 30.0, &y, 6, 3).unwrap();
        assert!(s.is_spline());
        let mut prev = f64::INFINITY;
        for i in 0..=1000 {
            let r = s.radius_at(18.0 * i as f64 / 1000.0);
            assert!(r <= prev + 1e-12);
            prev = r;
        }
    }

    #[test]
    fn spline_area_matches_dense_quadrature() {
        let dims = table1();
        let s = build_spline_profile(&dims, 40.0, &[1.6, 1.5, 0.9, 0.6, 0.3, 0.25], 6, 3).unwrap();
        let n = 200_000;
        let h = dims.l_total / n as f64;
        let trap: f64 = (0..n).map(|i| 0.5 * h * (s.radius_at(i as f64 * h) + s.radius_at((i + 1) as f64 * h))).sum();
        assert!((trap - s.planar_area()).abs() < 1e-6, "{trap} vs {}", s.planar_area());
    }

    #[test]
    fn polyline_output_precision() {
        let p = build_angle_profile(&table1(), 90.0).unwrap();
        let mut buf = Vec::new();
        p.write_polyline(&mut buf, 1.0).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("17.100000 1.600000"));
        assert!(text.contains("17.100000 0.250000"));
        assert!(text.lines().last().unwrap().starts_with("18.000000 0.250000"));
    }

    #[test]
    fn dims_violations_name_fields() {
        let d = NozzleDims { d_out: 4.0, ..table1() };
        let v = d.violations();
        assert!(v.iter().any(|e| matches!(e, GeometryError::InvalidDims { field: "d_out", .. })));
    }

    proptest! {
        #[test]
        fn feasible_profiles_are_monotone_and_pinned(
            alpha in 5.0f64..90.0,
            mut steps in proptest::collection::vec(0.05f64..1.0, 5),
            degree in 1usize..4,
        ) {
            let dims = table1();
            let total: f64 = steps.iter().sum();
            for s in steps.iter_mut() { *s *= (dims.r_in() - dims.r_out()) / total; }
            let mut y = vec![dims.r_in()];
            for s in &steps[..steps.len() - 1] { let last = *y.last().unwrap(); y.push(last - s); }
            y.push(dims.r_out());
            let p = build_spline_profile(&dims, alpha, &y, y.len(), degree).unwrap();
            prop_assert_eq!(p.radius_at(0.0), dims.r_in());
            prop_assert_eq!(p.radius_at(dims.l_total), dims.r_out());
            let mut prev = f64::INFINITY;
            for i in 0..=1000 {
                let r = p.radius_at(dims.l_total * i as f64 / 1000.0);
                prop_assert!(r <= prev + 1e-12);
                prev = r;
            }
            let again = build_spline_profile(&dims, alpha, &y, y.len(), degree).unwrap();
            prop_assert_eq!(p, again);
        }
    }
}
