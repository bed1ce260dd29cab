//! Nozzle shape optimization on top of the generic minimizer.

use crate::geometry::{NozzleDims, ProfileParams, ALPHA_MAX_DEG, ALPHA_MIN_DEG, MONOTONICITY_MARGIN};
use crate::materials::{GiesekusParams, GnfFluid};
use crate::mesh::{generate_mesh, Mesh, MeshParams};
use crate::objective::{pressure_drop, ObjectiveReport};
use crate::solver::{
    solve_gnf_from, solve_viscoelastic_from, BoundaryConditions, FlowSolution, SolverConfig, SolverError, WarmStart,
};

use serde::{Deserialize, Serialize};

use super::{minimize_with, LinearConstraint, OptError, OptProblem, OptResult, RunOptions};

/// Pressure drop (Pa) of a candidate shape, `None` when it cannot be evaluated.
pub trait ShapeObjective {
    fn evaluate(&mut self, params: &ProfileParams) -> Option<f64>;
}

impl<F: FnMut(&ProfileParams) -> Option<f64>> ShapeObjective for F {
    fn evaluate(&mut self, params: &ProfileParams) -> Option<f64> {
        self(params)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ShapeModel {
    Gnf(GnfFluid),
    Viscoelastic(GiesekusParams),
}

/// One evaluated shape.
#[derive(Debug, Clone)]
pub struct ShapeEvaluation {
    pub params: ProfileParams,
    pub report: Option<ObjectiveReport>,
    pub error: Option<String>,
}

/// Mesh, solve and measure `Δp` for each candidate, warm-starting each solve
/// from the previous converged field.
pub struct NozzleSimulation {
    pub dims: NozzleDims,
    pub model: ShapeModel,
    pub bc: BoundaryConditions,
    pub solver: SolverConfig,
    pub mesh: MeshParams,
    pub spline_degree: usize,
    pub log: Vec<ShapeEvaluation>,
    warm: Option<(Mesh, FlowSolution)>,
}

impl NozzleSimulation {
    pub fn new(dims: NozzleDims, model: ShapeModel, bc: BoundaryConditions, solver: SolverConfig, mesh: MeshParams) -> Self {
        Self { dims, model, bc, solver, mesh, spline_degree: 3, log: Vec::new(), warm: None }
    }

    /// Full evaluation returning the solved mesh and field alongside the report.
    pub fn simulate(&mut self, params: &ProfileParams) -> Result<(Mesh, FlowSolution, ObjectiveReport), String> {
        let profile = params.build(&self.dims, self.spline_degree).map_err(|e| e.to_string())?;
        let mesh = generate_mesh(&profile, &self.dims, &self.mesh).map_err(|e| e.to_string())?;
        let warm = self.warm.as_ref().map(|(m, s)| WarmStart { mesh: m, solution: s });
        let solved = match &self.model {
            ShapeModel::Gnf(f) => solve_gnf_from(&mesh, &self.bc, f, &self.solver, warm),
            ShapeModel::Viscoelastic(p) => solve_viscoelastic_from(&mesh, &self.bc, p, &self.solver, warm),
        };
        let sol = match solved {
            Ok(s) => s,
            Err(SolverError::NoConvergence { message, .. }) => return Err(format!("no convergence: {message}")),
            Err(e) => return Err(e.to_string()),
        };
        let report = pressure_drop(&sol, &mesh, &self.dims).map_err(|e| e.to_string())?;
        self.warm = Some((mesh.clone(), sol.clone()));
        Ok((mesh, sol, report))
    }
}

impl ShapeObjective for NozzleSimulation {
    fn evaluate(&mut self, params: &ProfileParams) -> Option<f64> {
        let (report, error) = match self.simulate(params) {
            Ok((_, _, r)) => (Some(r), None),
            Err(e) => (None, Some(e)),
        };
        let dp = report.as_ref().filter(|r| r.feasible).map(|r| r.delta_p);
        self.log.push(ShapeEvaluation { params: params.clone(), report, error });
        dp
    }
}

/// Bounds and stopping rules shared by both parametrizations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShapeSettings {
    pub alpha_bounds: (f64, f64),
    pub budget: usize,
    pub tol_x: f64,
    pub init_radius: f64,
    pub multistart: bool,
}

impl Default for ShapeSettings {
    fn default() -> Self {
        Self { alpha_bounds: (ALPHA_MIN_DEG, ALPHA_MAX_DEG), budget: 60, tol_x: 1e-4, init_radius: 0.1, multistart: false }
    }
}

impl ShapeSettings {
    fn problem(&self, x0: Vec<f64>, lower: Vec<f64>, upper: Vec<f64>) -> OptProblem {
        let mut p = OptProblem::new(x0, lower, upper);
        p.budget = self.budget;
        p.tol_x = self.tol_x;
        p.init_radius = self.init_radius;
        p.multistart = self.multistart;
        p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplineSettings {
    pub shape: ShapeSettings,
    pub n_ctrl: usize,
    pub degree: usize,
    /// Keep every ordinate on the straight taper and optimize the scale only.
    pub freeze_ordinates: bool,
}

impl Default for SplineSettings {
    fn default() -> Self {
        Self { shape: ShapeSettings { budget: 120, ..ShapeSettings::default() }, n_ctrl: 6, degree: 3, freeze_ordinates: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AngleResult {
    pub alpha_opt: f64,
    /// Pa
    pub delta_p_opt: f64,
    pub result: OptResult,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplineResult {
    pub params: ProfileParams,
    /// Pa
    pub delta_p_opt: f64,
    pub result: OptResult,
}

pub fn optimize_angle<O: ShapeObjective>(
    objective: &mut O,
    alpha0: f64,
    settings: &ShapeSettings,
    run: &RunOptions,
) -> Result<AngleResult, OptError> {
    let (lo, hi) = settings.alpha_bounds;
    let problem = settings.problem(vec![alpha0], vec![lo], vec![hi]);
    let result = minimize_with(&problem, run, |x| objective.evaluate(&ProfileParams::Angle { alpha: x[0] }))?;
    Ok(AngleResult { alpha_opt: result.x_best[0], delta_p_opt: result.f_best, result })
}

fn spline_params(dims: &NozzleDims, n_ctrl: usize, frozen: bool, x: &[f64]) -> ProfileParams {
    let y_ctrl = if frozen {
        dims.taper_ordinates(n_ctrl)
    } else {
        let mut y = Vec::with_capacity(n_ctrl);
        y.push(dims.r_in());
        y.extend_from_slice(&x[1..]);
        y.push(dims.r_out());
        y
    };
    ProfileParams::Spline { alpha_scale: x[0], y_ctrl }
}

/// Optimizes the scale angle and the interior control ordinates (the end
/// ordinates stay at the inlet and outlet radii), starting from the straight
/// taper at `alpha_seed`.
pub fn optimize_spline<O: ShapeObjective>(
    objective: &mut O,
    dims: &NozzleDims,
    alpha_seed: f64,
    settings: &SplineSettings,
    run: &RunOptions,
) -> Result<SplineResult, OptError> {
    let n_ctrl = settings.n_ctrl;
    if n_ctrl < settings.degree + 1 || n_ctrl < 3 {
        return Err(OptError::InvalidProblem(format!("{n_ctrl} control points for degree {}", settings.degree)));
    }
    let (lo, hi) = settings.shape.alpha_bounds;
    let (r_in, r_out) = (dims.r_in(), dims.r_out());
    let frozen = settings.freeze_ordinates;
    let problem = if frozen {
        settings.shape.problem(vec![alpha_seed], vec![lo], vec![hi])
    } else {
        let inner = n_ctrl - 2;
        let taper = dims.taper_ordinates(n_ctrl);
        let mut x0 = vec![alpha_seed];
        x0.extend_from_slice(&taper[1..n_ctrl - 1]);
        let mut lower = vec![lo];
        lower.extend(std::iter::repeat_n(r_out, inner));
        let mut upper = vec![hi];
        upper.extend(std::iter::repeat_n(r_in, inner));
        let mut p = settings.shape.problem(x0, lower, upper);
        let row = |pairs: &[(usize, f64)]| {
            let mut a = vec![0.0; inner + 1];
            for &(i, v) in pairs {
                a[i] = v;
            }
            a
        };
        // y_0 = r_in and y_{n-1} = r_out are constants.
        p.constraints.push(LinearConstraint { a: row(&[(1, -1.0)]), b: MONOTONICITY_MARGIN - r_in });
        for i in 1..inner {
            p.constraints.push(LinearConstraint { a: row(&[(i, 1.0), (i + 1, -1.0)]), b: MONOTONICITY_MARGIN });
        }
        p.constraints.push(LinearConstraint { a: row(&[(inner, 1.0)]), b: MONOTONICITY_MARGIN + r_out });
        p
    };
    let result = minimize_with(&problem, run, |x| objective.evaluate(&spline_params(dims, n_ctrl, frozen, x)))?;
    Ok(SplineResult { params: spline_params(dims, n_ctrl, frozen, &result.x_best), delta_p_opt: result.f_best, result })
}
