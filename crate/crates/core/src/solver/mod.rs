//! Steady stabilized finite-element flow solves.
//!
//! Two paths share the machinery: an axisymmetric (or planar) generalized
//! Newtonian fluid with optional heat transfer, and a planar isothermal
//! Giesekus fluid reached by continuation in relaxation time and mobility.
//! Fields are linear on triangles for every unknown.

mod conformation;
mod diagnostics;
mod kernels;
mod nonlinear;
mod output;
mod sparse;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::materials::{GiesekusParams, GnfFluid, MaterialError, ViscosityModel, GAMMA_DOT_MIN};
use crate::mesh::{BoundaryTag, Mesh, PointLocator};
use kernels::{element_geometry, GiesekusKernel, GnfKernel, Kernel, Stab};
use nonlinear::{NonlinearOptions, Outcome, Problem};

pub use diagnostics::{
    boundary_flux, detect_recirculation, mass_balance, outlet_temperature_profile, MassBalance, OutletProfile,
    RecirculationReport, VORTEX_VELOCITY_TOL,
};

/// 1 mm in metres.
const L0: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("invalid solver input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Material(#[from] MaterialError),
    #[error("nonlinear solve did not converge: {message}")]
    NoConvergence {
        message: String,
        /// Last converged continuation stage `(lambda, alpha_g)`, if any.
        last_stage: Option<(f64, f64)>,
        partial: Box<FlowSolution>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowGeometry {
    /// Half meridian plane of a body of revolution; `y` is the radius.
    Axisymmetric,
    /// Half of a symmetric planar channel.
    Planar,
}

/// Inlet, wall and temperature data. Lengths in mm, velocities in mm/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundaryConditions {
    /// Uniform inlet axial velocity (feeding rate), mm/s.
    pub u_in: f64,
    /// Heated-wall temperature (K).
    pub t_wall: f64,
    /// Inlet temperature (K).
    pub t_in: f64,
    /// Axial velocity of walls tagged `MovingWall` (mm/s).
    pub wall_speed: f64,
}

impl Default for BoundaryConditions {
    fn default() -> Self {
        Self { u_in: 1.0, t_wall: 503.0, t_in: 293.0, wall_speed: 0.0 }
    }
}

impl BoundaryConditions {
    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.u_in.is_finite() && self.u_in >= 0.0) {
            return Err(SolverError::InvalidInput(format!("u_in must be non-negative, got {}", self.u_in)));
        }
        if !self.wall_speed.is_finite() {
            return Err(SolverError::InvalidInput(format!("wall_speed must be finite, got {}", self.wall_speed)));
        }
        if !(self.t_wall.is_finite() && self.t_in.is_finite() && self.t_wall > 0.0 && self.t_in > 0.0) {
            return Err(SolverError::InvalidInput("temperatures must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Stabilization {
    /// Viscous coefficient of the momentum/pressure stabilization parameter.
    pub c1: f64,
    /// Advective coefficient of the momentum/pressure stabilization parameter.
    pub c2: f64,
    /// Extra elliptic viscosity of the viscoelastic formulation, as a multiple of `eta_p`.
    pub devss: f64,
    /// Scale of the streamline-upwind weight on the constitutive equation.
    pub stress_supg: f64,
}

impl Default for Stabilization {
    fn default() -> Self {
        Self { c1: 12.0, c2: 2.0, devss: 1.0, stress_supg: 1.0 }
    }
}

/// Geometric walk from `lambda / lambda_ratio` to `lambda` in `stages`
/// steps, with the mobility factor decreasing geometrically from
/// `alpha_start` to its target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContinuationSchedule {
    pub stages: usize,
    pub lambda_ratio: f64,
    pub alpha_start: f64,
    /// Bisections allowed per failed stage.
    pub max_refinements: usize,
    /// Newton iterations allowed per viscoelastic stage before it counts as failed.
    pub stage_max_iters: usize,
}

impl Default for ContinuationSchedule {
    fn default() -> Self {
        Self { stages: 8, lambda_ratio: 16.0, alpha_start: 0.25, max_refinements: 4, stage_max_iters: 15 }
    }
}

impl ContinuationSchedule {
    /// `(lambda, alpha_g)` stages ending at the material values.
    pub fn stages_for(&self, mat: &GiesekusParams) -> Vec<(f64, f64)> {
        if mat.lambda == 0.0 || self.stages <= 1 {
            return vec![(mat.lambda, mat.alpha_g)];
        }
        let a0 = self.alpha_start.max(mat.alpha_g);
        let m = (self.stages - 1) as f64;
        (0..self.stages)
            .map(|k| {
                let s = k as f64 / m;
                let lam = mat.lambda * self.lambda_ratio.powf(s - 1.0);
                let alpha = a0 * (mat.alpha_g / a0).powf(s);
                (lam, alpha)
            })
            .map(|(l, a)| if l == mat.lambda { (l, mat.alpha_g) } else { (l, a) })
            .collect()
    }
}

/// Unknowns carried for the polymer stress.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StressVariable {
    /// The polymer stress itself.
    Stress,
    /// The matrix logarithm of the conformation tensor, scaled by `1 / lambda`.
    LogConformation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub geometry: FlowGeometry,
    /// Relative nonlinear correction at which iteration stops.
    pub tol_nl: f64,
    pub max_iters: usize,
    /// Under-relaxation of the Picard iterations.
    pub relaxation: f64,
    /// Picard iterations before switching to Newton.
    pub picard_iters: usize,
    pub newton: bool,
    pub stabilization: Stabilization,
    pub continuation: ContinuationSchedule,
    pub stress_variable: StressVariable,
    /// Solve the energy equation (generalized Newtonian path only).
    pub energy: bool,
    pub viscous_dissipation: bool,
    /// Viscosity is evaluated at no less than this temperature (K). For the
    /// Cross-WLF law it defaults to the WLF reference temperature.
    pub viscosity_temperature_floor: Option<f64>,
    /// Body force per unit mass (m/s²).
    pub body_force: [f64; 2],
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            geometry: FlowGeometry::Axisymmetric,
            tol_nl: 1e-6,
            max_iters: 200,
            relaxation: 0.7,
            picard_iters: 4,
            newton: true,
            stabilization: Stabilization::default(),
            continuation: ContinuationSchedule::default(),
            stress_variable: StressVariable::LogConformation,
            energy: true,
            viscous_dissipation: true,
            viscosity_temperature_floor: None,
            body_force: [0.0, 0.0],
        }
    }
}

impl SolverConfig {
    /// Defaults for the planar viscoelastic path.
    pub fn viscoelastic() -> Self {
        Self { geometry: FlowGeometry::Planar, energy: false, picard_iters: 0, ..Self::default() }
    }

    /// Isothermal generalized Newtonian solve.
    pub fn isothermal(geometry: FlowGeometry) -> Self {
        Self { geometry, energy: false, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.relaxation > 0.0 && self.relaxation <= 1.0) {
            return Err(SolverError::InvalidInput(format!("relaxation must lie in (0, 1], got {}", self.relaxation)));
        }
        if !(self.tol_nl > 0.0) {
            return Err(SolverError::InvalidInput(format!("tol_nl must be positive, got {}", self.tol_nl)));
        }
        if self.max_iters == 0 {
            return Err(SolverError::InvalidInput("max_iters must be positive".into()));
        }
        let st = &self.stabilization;
        if ![st.c1, st.c2, st.devss, st.stress_supg].iter().all(|v| v.is_finite() && *v >= 0.0) || st.c1 == 0.0 {
            return Err(SolverError::InvalidInput(
                "stabilization coefficients must be finite and non-negative, with c1 > 0".into(),
            ));
        }
        let c = &self.continuation;
        if c.stages == 0 || c.stage_max_iters == 0 || !(c.lambda_ratio >= 1.0) {
            return Err(SolverError::InvalidInput(
                "continuation needs at least one stage, stage_max_iters > 0 and lambda_ratio >= 1".into(),
            ));
        }
        Ok(())
    }

    fn nonlinear(&self) -> NonlinearOptions {
        NonlinearOptions {
            tol: self.tol_nl,
            max_iters: self.max_iters,
            picard_iters: self.picard_iters,
            relaxation: self.relaxation,
            newton: self.newton,
        }
    }
}

/// Nodal fields of a steady solve in physical units.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowSolution {
    pub geometry: FlowGeometry,
    /// Velocity (mm/s).
    pub u: Vec<[f64; 2]>,
    /// Pressure (Pa).
    pub p: Vec<f64>,
    /// Temperature (K), when the energy equation was solved.
    pub t: Option<Vec<f64>>,
    /// Polymeric stress `[xx, xy, yy]` (Pa), viscoelastic path.
    pub sigma_p: Option<Vec<[f64; 3]>>,
    /// Projected rate of strain `[xx, xy, yy]` (1/s), viscoelastic path.
    pub strain_rate: Option<Vec<[f64; 3]>>,
    pub converged: bool,
    /// Relative nonlinear correction of every iteration, all stages.
    pub residual_history: Vec<f64>,
    /// Converged continuation stages `(lambda, alpha_g)`.
    pub continuation_trace: Vec<(f64, f64)>,
    pub u_in: f64,
}

/// Previous solution used as the initial guess on a (possibly different) mesh.
#[derive(Clone, Copy)]
pub struct WarmStart<'a> {
    pub mesh: &'a Mesh,
    pub solution: &'a FlowSolution,
}

struct NodeTags {
    inlet: bool,
    wall: bool,
    moving: bool,
    heated: bool,
    axis: bool,
    outlet: bool,
}

fn node_tags(mesh: &Mesh) -> Vec<NodeTags> {
    mesh.node_tags()
        .into_iter()
        .map(|t| NodeTags {
            inlet: t.contains(&BoundaryTag::Inlet),
            wall: t.iter().any(|g| g.is_wall()),
            moving: t.contains(&BoundaryTag::MovingWall),
            heated: t.contains(&BoundaryTag::HeatedWall),
            axis: t.contains(&BoundaryTag::Axis),
            outlet: t.contains(&BoundaryTag::Outlet),
        })
        .collect()
}

/// Velocity conditions shared by both paths: the inlet wins at the inlet/wall
/// corner so that the imposed flux is exactly `u_in` times the inlet section.
fn velocity_dirichlet(tags: &NodeTags, u_inlet: f64, u_wall: f64) -> [Option<f64>; 2] {
    if tags.inlet {
        [Some(u_inlet), Some(0.0)]
    } else if tags.moving {
        [Some(u_wall), Some(0.0)]
    } else if tags.wall {
        [Some(0.0), Some(0.0)]
    } else if tags.axis || tags.outlet {
        [None, Some(0.0)]
    } else {
        [None, None]
    }
}

fn interpolate_fields(warm: &WarmStart<'_>, mesh: &Mesh) -> Vec<([f64; 2], f64, Option<f64>, Option<[f64; 3]>)> {
    let loc = PointLocator::new(warm.mesh);
    let s = warm.solution;
    mesh.nodes
        .iter()
        .map(|&p| {
            let (e, l) = loc.locate_nearest(p);
            let t = warm.mesh.elements[e];
            let mix = |f: &dyn Fn(usize) -> f64| l[0] * f(t[0]) + l[1] * f(t[1]) + l[2] * f(t[2]);
            let u = [mix(&|n| s.u[n][0]), mix(&|n| s.u[n][1])];
            let pr = mix(&|n| s.p[n]);
            let tt = s.t.as_ref().map(|tv| mix(&|n| tv[n]));
            let sg = s.sigma_p.as_ref().map(|sv| [mix(&|n| sv[n][0]), mix(&|n| sv[n][1]), mix(&|n| sv[n][2])]);
            (u, pr, tt, sg)
        })
        .collect()
}

/// Viscosity used to make the equations dimensionless.
fn reference_viscosity(law: &ViscosityModel, shear_rate: f64, t: f64) -> f64 {
    law.viscosity(shear_rate.max(GAMMA_DOT_MIN), t)
}

/// Generalized Newtonian solve with optional heat transfer.
pub fn solve_gnf(
    mesh: &Mesh,
    bc: &BoundaryConditions,
    fluid: &GnfFluid,
    cfg: &SolverConfig,
) -> Result<FlowSolution, SolverError> {
    solve_gnf_from(mesh, bc, fluid, cfg, None)
}

pub fn solve_gnf_from(
    mesh: &Mesh,
    bc: &BoundaryConditions,
    fluid: &GnfFluid,
    cfg: &SolverConfig,
    warm: Option<WarmStart<'_>>,
) -> Result<FlowSolution, SolverError> {
    bc.validate()?;
    cfg.validate()?;
    fluid.validate()?;
    let u0 = if bc.u_in > 0.0 { bc.u_in } else { 1.0 };
    let t_floor = cfg.viscosity_temperature_floor.or(match fluid.law {
        ViscosityModel::CrossWlf(p) => Some(p.t_ref),
        _ => None,
    });
    let eta_ref = reference_viscosity(&fluid.law, u0, t_floor.map_or(bc.t_wall, |f| bc.t_wall.max(f)));
    let p0 = eta_ref * u0;
    let u_si = u0 * L0;
    let dt_scale = if bc.t_wall != bc.t_in { bc.t_wall - bc.t_in } else { 1.0 };
    let geom = element_geometry(mesh);
    let kernel = GnfKernel {
        geom: &geom,
        axisym: cfg.geometry == FlowGeometry::Axisymmetric,
        law: fluid.law,
        energy: cfg.energy,
        dissipation: cfg.viscous_dissipation,
        re: fluid.rho * u_si * L0 / eta_ref,
        pe: fluid.rho * fluid.cp * u_si * L0 / fluid.kappa,
        br: eta_ref * u_si * u_si / (fluid.kappa * dt_scale),
        gamma_scale: u0,
        gamma_min: GAMMA_DOT_MIN / u0,
        eta_ref,
        t_in: bc.t_in,
        dt_scale,
        t_fixed: bc.t_wall,
        coupling: 1.0,
        shear_blend: 1.0,
        t_floor,
        body: cfg.body_force.map(|b| fluid.rho * b * L0 * L0 / (eta_ref * u_si)),
        stab: Stab::from(cfg.stabilization),
    };
    let nd = if cfg.energy { 4 } else { 3 };
    let theta_wall = (bc.t_wall - bc.t_in) / dt_scale;
    let mut fixed = vec![None; mesh.n_nodes() * nd];
    for (n, tags) in node_tags(mesh).iter().enumerate() {
        let [fu, fv] = velocity_dirichlet(tags, bc.u_in / u0, bc.wall_speed / u0);
        fixed[n * nd] = fu;
        fixed[n * nd + 1] = fv;
        if cfg.energy {
            if tags.inlet {
                fixed[n * nd + 3] = Some(0.0);
            } else if tags.heated {
                fixed[n * nd + 3] = Some(theta_wall);
            }
        }
    }
    let groups = if cfg.energy { vec![vec![0, 1], vec![2], vec![3]] } else { vec![vec![0, 1], vec![2]] };
    let mut problem = Problem::new(mesh, kernel, fixed, groups);
    let mut x0 = vec![0.0; problem.n()];
    if let Some(w) = warm {
        for (n, (u, p, t, _)) in interpolate_fields(&w, mesh).into_iter().enumerate() {
            x0[n * nd] = u[0] / u0;
            x0[n * nd + 1] = u[1] / u0;
            x0[n * nd + 2] = p / p0;
            if cfg.energy {
                x0[n * nd + 3] = t.map_or(0.0, |t| (t - bc.t_in) / dt_scale);
            }
        }
    }
    let opts = cfg.nonlinear();
    let mut history = Vec::new();
    let thermal = cfg.energy && fluid.law.is_temperature_dependent();
    // A power law has no zero-shear plateau, so a cold start sees an
    // unbounded viscosity; it goes straight to the homotopy.
    let plateau = !matches!(fluid.law, ViscosityModel::PowerLaw { n, .. } if n != 1.0);
    let mut out = None;
    if warm.is_some() || (!thermal && plateau) {
        let o = problem.solve(x0.clone(), &opts);
        history.extend(o.history.iter().copied());
        out = Some(o);
    }
    if !out.as_ref().is_some_and(|o| o.converged) {
        // Homotopy from the viscosity at the wall temperature (thermal) or
        // from the reference viscosity (isothermal) to the full law.
        let o = if thermal {
            homotopy(&mut problem, &opts, cfg.continuation.max_refinements, &mut history, |k, s| k.coupling = s)
        } else {
            homotopy(&mut problem, &opts, cfg.continuation.max_refinements, &mut history, |k, s| k.shear_blend = s)
        };
        out = Some(o);
    }
    let out = out.expect("at least one nonlinear solve ran");
    let n = mesh.n_nodes();
    let sol = FlowSolution {
        geometry: cfg.geometry,
        u: (0..n).map(|i| [out.x[i * nd] * u0, out.x[i * nd + 1] * u0]).collect(),
        p: (0..n).map(|i| out.x[i * nd + 2] * p0).collect(),
        t: cfg.energy.then(|| (0..n).map(|i| bc.t_in + out.x[i * nd + 3] * dt_scale).collect()),
        sigma_p: None,
        strain_rate: None,
        converged: out.converged,
        residual_history: history,
        continuation_trace: Vec::new(),
        u_in: bc.u_in,
    };
    if sol.converged {
        Ok(sol)
    } else {
        Err(SolverError::NoConvergence { message: out.message, last_stage: None, partial: Box::new(sol) })
    }
}

/// Walks `set(kernel, s)` from `s = 0` to `s = 1` from a zero start,
/// bisecting failed steps.
fn homotopy<K: Kernel>(
    problem: &mut Problem<K>,
    opts: &NonlinearOptions,
    max_refinements: usize,
    history: &mut Vec<f64>,
    set: impl Fn(&mut K, f64),
) -> Outcome {
    let mut x = vec![0.0; problem.n()];
    let mut current = 0.0;
    let mut pending = vec![1.0, 0.75, 0.5, 0.25, 0.0];
    let mut refinements = 0;
    loop {
        let s = *pending.last().expect("the target stage is never popped");
        set(&mut problem.kernel, s);
        let o = problem.solve(x.clone(), opts);
        history.extend(o.history.iter().copied());
        if o.converged && s == 1.0 {
            return o;
        }
        if o.converged {
            x = o.x;
            current = s;
            pending.pop();
            refinements = 0;
        } else if refinements < max_refinements && s > 0.0 {
            pending.push(0.5 * (current + s));
            refinements += 1;
        } else {
            return o;
        }
    }
}

/// Planar isothermal Giesekus solve with continuation in `(lambda, alpha_g)`.
pub fn solve_viscoelastic(
    mesh: &Mesh,
    bc: &BoundaryConditions,
    mat: &GiesekusParams,
    cfg: &SolverConfig,
) -> Result<FlowSolution, SolverError> {
    solve_viscoelastic_from(mesh, bc, mat, cfg, None)
}

/// As [`solve_viscoelastic`], first trying a direct solve at the target
/// parameters from `warm`; falls back to the full continuation.
pub fn solve_viscoelastic_from(
    mesh: &Mesh,
    bc: &BoundaryConditions,
    mat: &GiesekusParams,
    cfg: &SolverConfig,
    warm: Option<WarmStart<'_>>,
) -> Result<FlowSolution, SolverError> {
    bc.validate()?;
    cfg.validate()?;
    mat.validate()?;
    if cfg.geometry != FlowGeometry::Planar {
        return Err(SolverError::InvalidInput("the viscoelastic path is planar only".into()));
    }
    let u0 = if bc.u_in > 0.0 { bc.u_in } else { 1.0 };
    let eta_ref = mat.eta_total;
    let p0 = eta_ref * u0;
    let geom = element_geometry(mesh);
    let kernel = GiesekusKernel {
        geom: &geom,
        eta_s: mat.eta_s() / eta_ref,
        eta_p: mat.eta_p() / eta_ref,
        wi: 0.0,
        alpha: mat.alpha_g,
        re: mat.rho * u0 * L0 * L0 / eta_ref,
        stab: Stab::from(cfg.stabilization),
        log_conformation: cfg.stress_variable == StressVariable::LogConformation,
    };
    let log_conf = kernel.log_conformation;
    let ep = kernel.eta_p;
    const ND: usize = 10;
    let mut fixed = vec![None; mesh.n_nodes() * ND];
    for (n, tags) in node_tags(mesh).iter().enumerate() {
        let [fu, fv] = velocity_dirichlet(tags, bc.u_in / u0, bc.wall_speed / u0);
        fixed[n * ND] = fu;
        fixed[n * ND + 1] = fv;
        // Stress conditions belong to the hyperbolic constitutive equation;
        // at lambda = 0 it is algebraic and the solve must reduce to Newtonian.
        if mat.lambda == 0.0 {
            continue;
        }
        if tags.inlet {
            for f in 3..6 {
                fixed[n * ND + f] = Some(0.0);
            }
        } else if tags.axis {
            fixed[n * ND + 4] = Some(0.0);
        }
    }
    let groups = vec![vec![0, 1], vec![2], vec![3, 4, 5], vec![6, 7, 8, 9]];
    let mut problem = Problem::new(mesh, kernel, fixed, groups);
    let opts = cfg.nonlinear();
    let stage_opts = NonlinearOptions { max_iters: opts.max_iters.min(cfg.continuation.stage_max_iters), ..opts };
    let set_stage = |problem: &mut Problem<GiesekusKernel<'_>>, (lam, alpha): (f64, f64)| {
        problem.kernel.wi = lam * u0;
        problem.kernel.alpha = alpha;
    };
    let mut history = Vec::new();
    let mut trace = Vec::new();
    let target = (mat.lambda, mat.alpha_g);

    let finish = |x: &[f64], converged: bool, history: Vec<f64>, trace: Vec<(f64, f64)>| {
        let n = mesh.n_nodes();
        let wi = trace.last().map_or(0.0, |t| t.0 * u0);
        let stress = |i: usize| {
            let s = [x[i * ND + 3], x[i * ND + 4], x[i * ND + 5]];
            let s = if log_conf { conformation::stress(s, wi, ep) } else { s };
            s.map(|v| v * p0)
        };
        FlowSolution {
            geometry: FlowGeometry::Planar,
            u: (0..n).map(|i| [x[i * ND] * u0, x[i * ND + 1] * u0]).collect(),
            p: (0..n).map(|i| x[i * ND + 2] * p0).collect(),
            t: None,
            sigma_p: Some((0..n).map(stress).collect()),
            strain_rate: Some(
                (0..n)
                    .map(|i| {
                        let g = &x[i * ND + 6..i * ND + 10];
                        [g[0] * u0, 0.5 * (g[1] + g[2]) * u0, g[3] * u0]
                    })
                    .collect(),
            ),
            converged,
            residual_history: history,
            continuation_trace: trace,
            u_in: bc.u_in,
        }
    };

    if let Some(w) = warm {
        let mut x0 = vec![0.0; problem.n()];
        for (n, (u, p, _, s)) in interpolate_fields(&w, mesh).into_iter().enumerate() {
            x0[n * ND] = u[0] / u0;
            x0[n * ND + 1] = u[1] / u0;
            x0[n * ND + 2] = p / p0;
            if let Some(s) = s {
                let s = s.map(|v| v / p0);
                let s = if log_conf { conformation::from_stress(s, target.0 * u0, ep) } else { s };
                x0[n * ND + 3..n * ND + 6].copy_from_slice(&s);
            }
        }
        fill_projected_gradient(mesh, &geom, &mut x0, ND);
        set_stage(&mut problem, target);
        let out = problem.solve(x0, &stage_opts);
        history.extend(out.history);
        if out.converged {
            return Ok(finish(&out.x, true, history, vec![target]));
        }
    }

    // Newtonian start, then the continuation walk.
    set_stage(&mut problem, (0.0, mat.alpha_g));
    let out = problem.solve(vec![0.0; problem.n()], &opts);
    history.extend(out.history);
    if !out.converged {
        let partial = finish(&out.x, false, history, trace);
        return Err(SolverError::NoConvergence { message: out.message, last_stage: None, partial: Box::new(partial) });
    }
    let mut x = out.x;
    if mat.lambda == 0.0 {
        return Ok(finish(&x, true, history, vec![target]));
    }
    let mut current = (0.0, cfg.continuation.alpha_start.max(mat.alpha_g));
    // Inserted stages closer than this (relative) to the last converged one
    // count as a stall, so repeated tiny successes cannot crawl forever.
    const MIN_LAMBDA_STEP: f64 = 1e-3;
    let mut pending: Vec<(f64, f64)> = cfg.continuation.stages_for(mat).into_iter().rev().collect();
    let mut refinements = 0;
    while let Some(&stage) = pending.last() {
        set_stage(&mut problem, stage);
        let out = problem.solve(x.clone(), &stage_opts);
        history.extend(out.history.iter().copied());
        if out.converged {
            x = out.x;
            trace.push(stage);
            current = stage;
            pending.pop();
            refinements = 0;
        } else if refinements < cfg.continuation.max_refinements && stage.0 - current.0 > MIN_LAMBDA_STEP * stage.0 {
            let lam = if current.0 > 0.0 { (current.0 * stage.0).sqrt() } else { 0.5 * stage.0 };
            let alpha = (current.1 * stage.1).sqrt();
            pending.push((lam, alpha));
            refinements += 1;
        } else {
            let last = trace.last().copied();
            let partial = finish(&x, false, history, trace);
            return Err(SolverError::NoConvergence {
                message: format!("continuation stalled before lambda = {:.4e} s: {}", stage.0, out.message),
                last_stage: last,
                partial: Box::new(partial),
            });
        }
    }
    Ok(finish(&x, true, history, trace))
}

/// Sets the projected gradient dofs (offset 6) to area-weighted nodal
/// averages of the element velocity gradient.
fn fill_projected_gradient(mesh: &Mesh, geom: &[kernels::ElementGeom], x: &mut [f64], nd: usize) {
    let n = mesh.n_nodes();
    let mut acc = vec![[0.0; 4]; n];
    let mut wsum = vec![0.0; n];
    for (e, t) in mesh.elements.iter().enumerate() {
        let g = &geom[e];
        let mut grad = [0.0; 4];
        for k in 0..3 {
            for (c, f) in [(0, 0), (1, 0), (2, 1), (3, 1)] {
                grad[c] += x[t[k] * nd + f] * g.grad[k][c % 2];
            }
        }
        for &node in t {
            for i in 0..4 {
                acc[node][i] += g.area * grad[i];
            }
            wsum[node] += g.area;
        }
    }
    for node in 0..n {
        for i in 0..4 {
            x[node * nd + 6 + i] = acc[node][i] / wsum[node].max(1e-300);
        }
    }
}
