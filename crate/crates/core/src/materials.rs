//! Constitutive laws: Cross-WLF viscosity and the Giesekus model in steady
//! simple shear.

use num_dual::DualNum;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Scalar type of the element kernels: `f64` or a forward-mode dual number.
pub trait Real: DualNum<Primitive = f64> + Copy {}
impl<T: DualNum<Primitive = f64> + Copy> Real for T {}

/// Shear-rate floor used inside the solver (1/s).
pub const GAMMA_DOT_MIN: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MaterialError {
    #[error("invalid material parameter {field}: {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error("temperature {t} K is at or below the WLF singularity {pole} K")]
    DomainError { t: f64, pole: f64 },
    #[error("steady-shear root finder did not converge (residual {residual:e})")]
    NoConvergence { residual: f64 },
}

fn invalid(field: &'static str, reason: impl Into<String>) -> MaterialError {
    MaterialError::Invalid { field, reason: reason.into() }
}

/// Cross model with WLF temperature shift, plus thermal properties.
///
/// `rho`, `cp` and `kappa` defaults are placeholders for a generic PLA melt.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrossWlfParams {
    /// Critical shear stress (Pa).
    pub tau_star: f64,
    pub n: f64,
    /// Zero-shear viscosity at `t_ref` (Pa·s).
    pub d1: f64,
    /// K
    pub t_ref: f64,
    pub a1: f64,
    /// K
    pub a2: f64,
    /// kg/m³
    pub rho: f64,
    /// J/(kg·K)
    pub cp: f64,
    /// W/(m·K)
    pub kappa: f64,
}

impl Default for CrossWlfParams {
    fn default() -> Self {
        Self {
            tau_star: 1.009e5,
            n: 0.25,
            d1: 3.317e9,
            t_ref: 373.0,
            a1: 20.19,
            a2: 51.6,
            rho: 1250.0,
            cp: 1800.0,
            kappa: 0.2,
        }
    }
}

impl CrossWlfParams {
    pub fn validate(&self) -> Result<(), MaterialError> {
        if !(self.n > 0.0 && self.n < 1.0) {
            return Err(invalid("n", format!("must lie in (0, 1), got {}", self.n)));
        }
        for (field, v) in [
            ("tau_star", self.tau_star),
            ("d1", self.d1),
            ("a2", self.a2),
            ("rho", self.rho),
            ("cp", self.cp),
            ("kappa", self.kappa),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(field, format!("must be positive, got {v}")));
            }
        }
        if !(self.a1.is_finite() && self.t_ref.is_finite()) {
            return Err(invalid("a1", "WLF coefficients must be finite"));
        }
        Ok(())
    }

    /// Temperature at which the WLF shift is singular.
    pub fn wlf_pole(&self) -> f64 {
        self.t_ref - self.a2
    }

    /// Zero-shear viscosity at `t`.
    pub fn eta0(&self, t: f64) -> Result<f64, MaterialError> {
        if t <= self.wlf_pole() {
            return Err(MaterialError::DomainError { t, pole: self.wlf_pole() });
        }
        Ok(self.eta0_generic(t))
    }

    pub fn eta0_generic<D: Real>(&self, t: D) -> D {
        let dt = t - self.t_ref;
        (dt * (-self.a1) / (dt + self.a2)).exp() * self.d1
    }

    /// Cross viscosity for dual-number arguments; no domain checks.
    pub fn viscosity_generic<D: Real>(&self, gamma_dot: D, t: D) -> D {
        let eta0 = self.eta0_generic(t);
        let x = eta0 * gamma_dot / self.tau_star;
        eta0 / (x.powf(1.0 - self.n) + 1.0)
    }
}

/// Cross-WLF viscosity (Pa·s) at shear rate `gamma_dot` (1/s) and temperature `t` (K).
pub fn cross_viscosity(gamma_dot: f64, t: f64, p: &CrossWlfParams) -> Result<f64, MaterialError> {
    if !(gamma_dot >= 0.0) {
        return Err(invalid("gamma_dot", format!("shear rate must be non-negative, got {gamma_dot}")));
    }
    let eta0 = p.eta0(t)?;
    Ok(eta0 / (1.0 + (eta0 * gamma_dot / p.tau_star).powf(1.0 - p.n)))
}

/// Giesekus fluid parameters. The total viscosity splits into polymer and
/// solvent parts with `eta_s = beta * eta_p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GiesekusParams {
    /// Relaxation time (s).
    pub lambda: f64,
    pub alpha_g: f64,
    pub beta: f64,
    /// Pa·s
    pub eta_total: f64,
    /// kg/m³
    pub rho: f64,
}

impl Default for GiesekusParams {
    fn default() -> Self {
        Self { lambda: 0.2, alpha_g: 0.05, beta: 0.15, eta_total: 2000.0, rho: 1250.0 }
    }
}

impl GiesekusParams {
    pub fn validate(&self) -> Result<(), MaterialError> {
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(invalid("lambda", format!("must be non-negative, got {}", self.lambda)));
        }
        if !(self.alpha_g > 0.0 && self.alpha_g <= 0.5) {
            return Err(invalid("alpha_g", format!("must lie in (0, 0.5], got {}", self.alpha_g)));
        }
        if !(self.beta >= 0.0 && self.beta < 1.0) {
            return Err(invalid("beta", format!("must lie in [0, 1), got {}", self.beta)));
        }
        if !(self.eta_total.is_finite() && self.eta_total > 0.0) {
            return Err(invalid("eta_total", format!("must be positive, got {}", self.eta_total)));
        }
        if !(self.rho.is_finite() && self.rho > 0.0) {
            return Err(invalid("rho", format!("must be positive, got {}", self.rho)));
        }
        Ok(())
    }

    pub fn eta_p(&self) -> f64 {
        self.eta_total / (1.0 + self.beta)
    }

    /// Computed as the remainder so that `eta_s + eta_p == eta_total` exactly
    /// (`eta_p >= eta_total / 2`, so the subtraction is exact).
    pub fn eta_s(&self) -> f64 {
        self.eta_total - self.eta_p()
    }
}

/// Polymeric stress components (Pa).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShearStress {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

/// Residual of the steady homogeneous Giesekus equations for `u = (γ̇ y, 0)`.
pub fn giesekus_shear_residual(s: [f64; 3], gamma_dot: f64, p: &GiesekusParams) -> [f64; 3] {
    let [xx, xy, yy] = s;
    let (l, ep) = (p.lambda, p.eta_p());
    let a = p.alpha_g * l / ep;
    [
        -2.0 * l * gamma_dot * xy + xx + a * (xx * xx + xy * xy),
        -l * gamma_dot * yy + xy + a * xy * (xx + yy) - ep * gamma_dot,
        yy + a * (xy * xy + yy * yy),
    ]
}

fn shear_jacobian(s: [f64; 3], gamma_dot: f64, p: &GiesekusParams) -> [[f64; 3]; 3] {
    let [xx, xy, yy] = s;
    let l = p.lambda;
    let a = p.alpha_g * l / p.eta_p();
    [
        [1.0 + 2.0 * a * xx, -2.0 * l * gamma_dot + 2.0 * a * xy, 0.0],
        [a * xy, 1.0 + a * (xx + yy), -l * gamma_dot + a * xy],
        [0.0, 2.0 * a * xy, 1.0 + 2.0 * a * yy],
    ]
}

fn solve3(m: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let mat = nalgebra::Matrix3::from_fn(|i, j| m[i][j]);
    let x = mat.lu().solve(&nalgebra::Vector3::new(b[0], b[1], b[2]))?;
    Some([x[0], x[1], x[2]])
}

/// Steady simple-shear polymeric stresses of the Giesekus model.
///
/// Damped Newton iteration, continued in shear rate from the Newtonian
/// limit so that the physical root branch is followed.
pub fn giesekus_steady_shear(gamma_dot: f64, p: &GiesekusParams) -> Result<ShearStress, MaterialError> {
    if !(gamma_dot >= 0.0) {
        return Err(invalid("gamma_dot", format!("shear rate must be non-negative, got {gamma_dot}")));
    }
    let ep = p.eta_p();
    if gamma_dot == 0.0 {
        return Ok(ShearStress { xx: 0.0, xy: 0.0, yy: 0.0 });
    }
    let norm = |r: [f64; 3]| (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
    let wi = p.lambda * gamma_dot;
    let stages = if wi <= 0.1 { 1 } else { (wi / 0.1).log2().ceil() as usize + 1 };
    let mut s = [0.0; 3];
    let mut residual = 0.0;
    for k in 0..stages {
        let g = gamma_dot * 0.5f64.powi((stages - 1 - k) as i32);
        if k == 0 {
            s = [2.0 * p.lambda * ep * g * g, ep * g, 0.0];
        }
        let scale = ep * g;
        let mut converged = false;
        for _ in 0..100 {
            let r = giesekus_shear_residual(s, g, p);
            residual = norm(r) / scale;
            if residual < 1e-13 {
                converged = true;
                break;
            }
            let Some(d) = solve3(shear_jacobian(s, g, p), r) else { break };
            let mut t = 1.0;
            loop {
                let trial = [s[0] - t * d[0], s[1] - t * d[1], s[2] - t * d[2]];
                if norm(giesekus_shear_residual(trial, g, p)) / scale < (1.0 - 1e-4 * t) * residual || t < 1e-6 {
                    s = trial;
                    break;
                }
                t *= 0.5;
            }
        }
        if !converged {
            return Err(MaterialError::NoConvergence { residual });
        }
    }
    Ok(ShearStress { xx: s[0], xy: s[1], yy: s[2] })
}

/// `Wi = λ u_char / l_char` with `u_char` in mm/s and `l_char` in mm.
pub fn weissenberg_number(p: &GiesekusParams, u_char: f64, l_char: f64) -> f64 {
    debug_assert!(l_char > 0.0);
    p.lambda * u_char / l_char
}

/// Viscosity laws understood by the generalized Newtonian solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ViscosityModel {
    CrossWlf(CrossWlfParams),
    Newtonian { eta: f64 },
    /// `η = K γ̇^(n−1)`
    PowerLaw { k: f64, n: f64 },
}

impl ViscosityModel {
    pub fn viscosity<D: Real>(&self, gamma_dot: D, t: D) -> D {
        match self {
            ViscosityModel::CrossWlf(p) => p.viscosity_generic(gamma_dot, t),
            ViscosityModel::Newtonian { eta } => gamma_dot * 0.0 + *eta,
            ViscosityModel::PowerLaw { k, n } => gamma_dot.powf(n - 1.0) * *k,
        }
    }

    pub fn is_temperature_dependent(&self) -> bool {
        matches!(self, ViscosityModel::CrossWlf(_))
    }

    pub fn validate(&self) -> Result<(), MaterialError> {
        match self {
            ViscosityModel::CrossWlf(p) => p.validate(),
            ViscosityModel::Newtonian { eta } if !(eta.is_finite() && *eta > 0.0) => {
                Err(invalid("eta", format!("must be positive, got {eta}")))
            }
            ViscosityModel::PowerLaw { k, n } if !(*k > 0.0 && *n > 0.0) => {
                Err(invalid("k", format!("power law needs k > 0 and n > 0, got k={k}, n={n}")))
            }
            _ => Ok(()),
        }
    }
}

impl From<CrossWlfParams> for ViscosityModel {
    fn from(p: CrossWlfParams) -> Self {
        ViscosityModel::CrossWlf(p)
    }
}

/// Viscosity law together with the thermal properties the energy equation needs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GnfFluid {
    pub law: ViscosityModel,
    /// kg/m³
    pub rho: f64,
    /// J/(kg·K)
    pub cp: f64,
    /// W/(m·K)
    pub kappa: f64,
}

impl GnfFluid {
    /// Newtonian fluid with the placeholder thermal properties of [`CrossWlfParams`].
    pub fn newtonian(eta: f64) -> Self {
        let d = CrossWlfParams::default();
        Self { law: ViscosityModel::Newtonian { eta }, rho: d.rho, cp: d.cp, kappa: d.kappa }
    }

    pub fn power_law(k: f64, n: f64) -> Self {
        Self { law: ViscosityModel::PowerLaw { k, n }, ..Self::newtonian(1.0) }
    }

    pub fn validate(&self) -> Result<(), MaterialError> {
        self.law.validate()?;
        for (field, v) in [("rho", self.rho), ("cp", self.cp), ("kappa", self.kappa)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(field, format!("must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

impl From<CrossWlfParams> for GnfFluid {
    fn from(p: CrossWlfParams) -> Self {
        Self { law: ViscosityModel::CrossWlf(p), rho: p.rho, cp: p.cp, kappa: p.kappa }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_shear_at_reference_temperature() {
        let p = CrossWlfParams::default();
        assert_eq!(cross_viscosity(0.0, 373.0, &p).unwrap(), 3.317e9);
    }

    #[test]
    fn pole_is_a_domain_error() {
        let p = CrossWlfParams::default();
        assert!(matches!(cross_viscosity(1.0, 321.4, &p), Err(MaterialError::DomainError { .. })));
        assert!(cross_viscosity(1.0, 322.5, &p).is_ok());
    }

    #[test]
    fn generic_matches_plain() {
        let p = CrossWlfParams::default();
        for (g, t) in [(0.5, 480.0), (30.0, 503.0), (1e3, 400.0)] {
            let a = cross_viscosity(g, t, &p).unwrap();
            let b = p.viscosity_generic(g, t);
            assert!((a - b).abs() <= 1e-14 * a);
        }
    }

    #[test]
    fn newtonian_limit_of_giesekus() {
        let p = GiesekusParams { lambda: 0.0, ..GiesekusParams::default() };
        let s = giesekus_steady_shear(7.0, &p).unwrap();
        assert!((s.xy - p.eta_p() * 7.0).abs() < 1e-9);
        assert!(s.xx.abs() < 1e-9 && s.yy.abs() < 1e-9);
    }

    #[test]
    fn weissenberg_arithmetic() {
        let p = GiesekusParams::default();
        assert!((weissenberg_number(&p, 10.0, 0.25) - 8.0).abs() < 1e-12);
        assert_eq!(weissenberg_number(&GiesekusParams { lambda: 0.0, ..p }, 10.0, 0.25), 0.0);
    }

    #[test]
    fn viscosity_split_round_trip() {
        let p = GiesekusParams::default();
        assert_eq!(p.eta_s() + p.eta_p(), p.eta_total);
    }
}
