//! Element residuals of the stabilized P1 discretizations, written once for
//! any scalar type so that dual numbers deliver exact element Jacobians.
//!
//! All quantities are dimensionless: lengths in units of 1 mm, velocities in
//! units of the feeding rate, viscosities relative to a reference viscosity
//! and stresses relative to `eta_ref * u_in / 1 mm`.

use crate::materials::{Real, ViscosityModel};
use crate::mesh::Mesh;

/// Interior three-point rule, exact for quadratics.
pub(crate) const QP: [[f64; 3]; 3] = [
    [2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0],
    [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0],
    [1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0],
];

#[derive(Debug, Clone, Copy)]
pub(crate) struct ElementGeom {
    /// Constant gradients of the three barycentric shape functions.
    pub grad: [[f64; 2]; 3],
    pub area: f64,
    /// Side of the equilateral triangle with the same area.
    pub h: f64,
    /// Radial coordinate at each quadrature point.
    pub y: [f64; 3],
}

pub(crate) fn element_geometry(mesh: &Mesh) -> Vec<ElementGeom> {
    (0..mesh.n_elements())
        .map(|e| {
            let [p0, p1, p2] = mesh.element_coords(e);
            let a2 = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
            let grad = [
                [(p1[1] - p2[1]) / a2, (p2[0] - p1[0]) / a2],
                [(p2[1] - p0[1]) / a2, (p0[0] - p2[0]) / a2],
                [(p0[1] - p1[1]) / a2, (p1[0] - p0[0]) / a2],
            ];
            let area = 0.5 * a2;
            let y = QP.map(|n| n[0] * p0[1] + n[1] * p1[1] + n[2] * p2[1]);
            ElementGeom { grad, area, h: (4.0 * area / 3f64.sqrt()).sqrt(), y }
        })
        .collect()
}

pub(crate) trait Kernel: Sync {
    /// Unknowns per node.
    fn ndof(&self) -> usize;
    /// Element residual; `frozen` evaluates material nonlinearities at the
    /// real part only (Picard linearization).
    fn residual<D: Real>(&self, e: usize, x: &[D], r: &mut [D], frozen: bool);
}

#[inline]
fn interp<D: Real>(x: &[D], nd: usize, f: usize, n: &[f64; 3]) -> D {
    x[f] * n[0] + x[nd + f] * n[1] + x[2 * nd + f] * n[2]
}

#[inline]
fn gradient<D: Real>(x: &[D], nd: usize, f: usize, g: &ElementGeom) -> [D; 2] {
    [
        x[f] * g.grad[0][0] + x[nd + f] * g.grad[1][0] + x[2 * nd + f] * g.grad[2][0],
        x[f] * g.grad[0][1] + x[nd + f] * g.grad[1][1] + x[2 * nd + f] * g.grad[2][1],
    ]
}

/// Stabilization constants: `tau = 1 / (c1 eta / h^2 + c2 Re |u| / h)`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Stab {
    pub c1: f64,
    pub c2: f64,
    pub devss: f64,
    pub stress_supg: f64,
}

impl From<super::Stabilization> for Stab {
    fn from(s: super::Stabilization) -> Self {
        Self { c1: s.c1, c2: s.c2, devss: s.devss, stress_supg: s.stress_supg }
    }
}

/// Generalized Newtonian flow with optional heat transfer, Galerkin/least-squares
/// stabilized. Node unknowns `[u, v, p]` or `[u, v, p, theta]`.
pub(crate) struct GnfKernel<'a> {
    pub geom: &'a [ElementGeom],
    pub axisym: bool,
    pub law: ViscosityModel,
    pub energy: bool,
    pub dissipation: bool,
    pub re: f64,
    pub pe: f64,
    pub br: f64,
    /// Physical shear rate per unit dimensionless shear rate (1/s).
    pub gamma_scale: f64,
    /// Dimensionless shear-rate floor.
    pub gamma_min: f64,
    pub eta_ref: f64,
    /// Physical temperature is `t_in + theta * dt_scale`.
    pub t_in: f64,
    pub dt_scale: f64,
    /// Temperature used when the energy equation is off, and the anchor of
    /// the thermal coupling homotopy.
    pub t_fixed: f64,
    /// The viscosity sees `t_fixed + coupling * (T - t_fixed)`.
    pub coupling: f64,
    /// The dimensionless viscosity is raised to this power, blending from
    /// the reference viscosity (0) to the full law (1).
    pub shear_blend: f64,
    /// Viscosity is evaluated at no less than this temperature.
    pub t_floor: Option<f64>,
    pub body: [f64; 2],
    pub stab: Stab,
}

impl Kernel for GnfKernel<'_> {
    fn ndof(&self) -> usize {
        if self.energy { 4 } else { 3 }
    }

    fn residual<D: Real>(&self, e: usize, x: &[D], r: &mut [D], frozen: bool) {
        let g = &self.geom[e];
        let nd = self.ndof();
        let zero = D::from(0.0);
        r.iter_mut().for_each(|v| *v = zero);
        let [ux, uy] = gradient(x, nd, 0, g);
        let [vx, vy] = gradient(x, nd, 1, g);
        let gp = gradient(x, nd, 2, g);
        let gt = if self.energy { gradient(x, nd, 3, g) } else { [zero, zero] };
        let (h, w) = (g.h, g.area / 3.0);
        let re = self.re;
        for (q, n) in QP.iter().enumerate() {
            let u = interp(x, nd, 0, n);
            let v = interp(x, nd, 1, n);
            let p = interp(x, nd, 2, n);
            let (wy, hoop) = if self.axisym { (w * g.y[q], v / g.y[q]) } else { (w, zero) };
            let sxy = uy + vx;
            let gd2 = (ux * ux + vy * vy + hoop * hoop) * 2.0 + sxy * sxy;
            let gd = (gd2 + self.gamma_min * self.gamma_min).sqrt();
            let mut t = if self.energy {
                (interp(x, nd, 3, n) * self.dt_scale + (self.t_in - self.t_fixed)) * self.coupling + self.t_fixed
            } else {
                D::from(self.t_fixed)
            };
            if let Some(tf) = self.t_floor {
                if t.re() < tf {
                    t = D::from(tf);
                }
            }
            let mut eta = self.law.viscosity(gd * self.gamma_scale, t) / self.eta_ref;
            if self.shear_blend != 1.0 {
                eta = eta.powf(self.shear_blend);
            }
            if frozen {
                eta = D::from(eta.re());
            }
            let speed = (u * u + v * v + 1e-12).sqrt();
            let tau = (eta * (self.stab.c1 / (h * h)) + speed * (self.stab.c2 * re / h)).recip();
            let adv_u = (u * ux + v * uy) * re - self.body[0];
            let adv_v = (u * vx + v * vy) * re - self.body[1];
            let mx = adv_u + gp[0];
            let my = adv_v + gp[1];
            let div = ux + vy + hoop;
            let (conv, src, tau_t) = if self.energy {
                let conv = (u * gt[0] + v * gt[1]) * self.pe;
                let src = if self.dissipation { eta * gd2 * self.br } else { zero };
                let tau_t = (speed * (2.0 * self.pe / h) + 4.0 / (h * h)).recip();
                (conv, src, tau_t)
            } else {
                (zero, zero, zero)
            };
            for k in 0..3 {
                let (nk, dx, dy) = (n[k], g.grad[k][0], g.grad[k][1]);
                let stream = u * dx + v * dy;
                let supg = stream * tau * re;
                r[k * nd] += (eta * (ux * dx * 2.0 + sxy * dy) - p * dx + adv_u * nk + supg * mx) * wy;
                let hoop_term = if self.axisym { (eta * hoop * 2.0 - p) * (nk / g.y[q]) } else { zero };
                r[k * nd + 1] += (eta * (sxy * dx + vy * dy * 2.0) - p * dy + hoop_term + adv_v * nk + supg * my) * wy;
                r[k * nd + 2] += (div * nk + (mx * dx + my * dy) * tau) * wy;
                if self.energy {
                    r[k * nd + 3] += ((conv - src) * nk
                        + gt[0] * dx
                        + gt[1] * dy
                        + stream * tau_t * self.pe * (conv - src))
                        * wy;
                }
            }
        }
    }
}

/// Planar Giesekus flow. Node unknowns
/// `[u, v, p, s_xx, s_xy, s_yy, g_xx, g_xy, g_yx, g_yy]` with `s` the polymer
/// stress and `g` the L2 projection of the velocity gradient
/// (`g_ij ~ du_i/dx_j`). The momentum equation carries the extra elliptic
/// term `2 eta_a (eps(u) - sym(g))` with `eta_a = devss * eta_p`, which
/// vanishes in the continuous limit. The constitutive equation uses `g` in
/// place of the raw gradient and is tested with a streamline-upwinded test
/// function. With `log_conformation` the stress unknowns are `log(c) / wi`.
pub(crate) struct GiesekusKernel<'a> {
    pub geom: &'a [ElementGeom],
    pub eta_s: f64,
    pub eta_p: f64,
    /// `lambda * u_in / 1 mm`
    pub wi: f64,
    pub alpha: f64,
    pub re: f64,
    pub stab: Stab,
    /// Stress unknowns hold `log(c) / wi` instead of the polymer stress.
    pub log_conformation: bool,
}

impl Kernel for GiesekusKernel<'_> {
    fn ndof(&self) -> usize {
        10
    }

    fn residual<D: Real>(&self, e: usize, x: &[D], r: &mut [D], _frozen: bool) {
        let g = &self.geom[e];
        let nd = 10;
        let zero = D::from(0.0);
        r.iter_mut().for_each(|v| *v = zero);
        let [ux, uy] = gradient(x, nd, 0, g);
        let [vx, vy] = gradient(x, nd, 1, g);
        let gp = gradient(x, nd, 2, g);
        let gs = [gradient(x, nd, 3, g), gradient(x, nd, 4, g), gradient(x, nd, 5, g)];
        let (h, w) = (g.h, g.area / 3.0);
        let (re, wi, ep) = (self.re, self.wi, self.eta_p);
        let eta = self.eta_s + self.eta_p;
        let eta_a = self.stab.devss * ep;
        let quad = self.alpha * wi / ep;
        let eps = [ux, (uy + vx) * 0.5, vy];
        let raw = [ux, uy, vx, vy];
        for n in QP.iter() {
            let u = interp(x, nd, 0, n);
            let v = interp(x, nd, 1, n);
            let p = interp(x, nd, 2, n);
            let su = [interp(x, nd, 3, n), interp(x, nd, 4, n), interp(x, nd, 5, n)];
            let s = if self.log_conformation { super::conformation::stress(su, wi, ep) } else { su };
            let gr = [interp(x, nd, 6, n), interp(x, nd, 7, n), interp(x, nd, 8, n), interp(x, nd, 9, n)];
            let d = [gr[0], (gr[1] + gr[2]) * 0.5, gr[3]];
            let tt: [D; 3] =
                std::array::from_fn(|i| eps[i] * (2.0 * (self.eta_s + eta_a)) - d[i] * (2.0 * eta_a) + s[i]);
            let speed = (u * u + v * v + 1e-12).sqrt();
            let tau = (speed * (self.stab.c2 * re / h) + self.stab.c1 * eta / (h * h)).recip();
            let adv_u = (u * ux + v * uy) * re;
            let adv_v = (u * vx + v * vy) * re;
            let mx = adv_u + gp[0];
            let my = adv_v + gp[1];
            let div = ux + vy;

            let [gxx, gxy, gyx, gyy] = gr;
            let adv: [D; 3] = std::array::from_fn(|i| u * gs[i][0] + v * gs[i][1]);
            let cres = if self.log_conformation {
                super::conformation::residual(su, adv, gr, wi, self.alpha, ep)
            } else {
                let upper = [
                    (gxx * s[0] + gxy * s[1]) * 2.0,
                    gxx * s[1] + gxy * s[2] + gyx * s[0] + gyy * s[1],
                    (gyx * s[1] + gyy * s[2]) * 2.0,
                ];
                let sq = [s[0] * s[0] + s[1] * s[1], s[1] * (s[0] + s[2]), s[1] * s[1] + s[2] * s[2]];
                std::array::from_fn(|i| (adv[i] - upper[i]) * wi + s[i] + sq[i] * quad - d[i] * (2.0 * ep))
            };
            let lnorm = (gxx * gxx + gxy * gxy + gyx * gyx + gyy * gyy + 1e-12).sqrt();
            let delta = (speed * (2.0 * wi / h) + lnorm * wi + 1.0).recip() * (wi * self.stab.stress_supg);

            for k in 0..3 {
                let (nk, dx, dy) = (n[k], g.grad[k][0], g.grad[k][1]);
                let stream = u * dx + v * dy;
                let supg = stream * tau * re;
                let b = k * nd;
                r[b] += (tt[0] * dx + tt[1] * dy - p * dx + adv_u * nk + supg * mx) * w;
                r[b + 1] += (tt[1] * dx + tt[2] * dy - p * dy + adv_v * nk + supg * my) * w;
                r[b + 2] += (div * nk + (mx * dx + my * dy) * tau) * w;
                let test = stream * delta + nk;
                for i in 0..3 {
                    r[b + 3 + i] += cres[i] * test * w;
                }
                for i in 0..4 {
                    r[b + 6 + i] += (gr[i] - raw[i]) * (nk * w);
                }
            }
        }
    }
}
