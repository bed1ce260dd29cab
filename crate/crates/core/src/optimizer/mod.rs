//! Derivative-free trust-region minimization with quadratic interpolation
//! models, box bounds and linear inequality constraints.
//!
//! Variables are rescaled to the unit box. The model interpolates `2n + 1`
//! points; with fewer points than a full quadratic needs, the Hessian is the
//! one closest in Frobenius norm to the previous model's. Every evaluated point
//! satisfies the bounds and constraints.

mod model;
mod shape;
mod subproblem;

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::objective::INFEASIBLE_PENALTY_FACTOR;
use model::Interpolation;
use subproblem::{maximize_abs, minimize_model, Region};

pub use shape::{
    optimize_angle, optimize_spline, AngleResult, NozzleSimulation, ShapeEvaluation, ShapeModel, ShapeObjective,
    ShapeSettings, SplineResult, SplineSettings,
};

const ETA_ACCEPT: f64 = 0.1;
const ETA_EXPAND: f64 = 0.7;
const MAX_RADIUS: f64 = 0.5;

#[derive(Debug, Error)]
pub enum OptError {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("infeasible start: {0}")]
    InfeasibleStart(String),
    #[error("interpolation set became degenerate")]
    Degenerate,
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// `a·x >= b`
#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint {
    pub a: Vec<f64>,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptProblem {
    pub x0: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub constraints: Vec<LinearConstraint>,
    /// Maximum number of objective evaluations.
    pub budget: usize,
    /// Final trust-region radius as a fraction of each variable's range.
    pub tol_x: f64,
    /// Initial trust-region radius as a fraction of each variable's range.
    pub init_radius: f64,
    /// Relative improvement below which an accepted step counts as stagnant.
    pub stagnation_tol: f64,
    /// Restart from additional deterministic points and keep the best run.
    pub multistart: bool,
}

impl OptProblem {
    pub fn new(x0: Vec<f64>, lower: Vec<f64>, upper: Vec<f64>) -> Self {
        Self {
            x0,
            lower,
            upper,
            constraints: Vec::new(),
            budget: 200,
            tol_x: 1e-4,
            init_radius: 0.1,
            stagnation_tol: 1e-8,
            multistart: false,
        }
    }

    pub fn dim(&self) -> usize {
        self.x0.len()
    }

    fn validate(&self) -> Result<(), OptError> {
        let n = self.dim();
        let bad = |m: String| Err(OptError::InvalidProblem(m));
        if n == 0 {
            return bad("no variables".into());
        }
        if self.lower.len() != n || self.upper.len() != n {
            return bad("bounds do not match the dimension".into());
        }
        for i in 0..n {
            if !(self.lower[i].is_finite() && self.upper[i].is_finite() && self.lower[i] < self.upper[i]) {
                return bad(format!("bounds of variable {i} are empty or not finite"));
            }
        }
        if self.constraints.iter().any(|c| c.a.len() != n) {
            return bad("constraint row does not match the dimension".into());
        }
        if self.budget < 2 * n + 1 {
            return bad(format!("budget {} is below the {} interpolation points", self.budget, 2 * n + 1));
        }
        if !(self.tol_x > 0.0 && self.tol_x < self.init_radius && self.init_radius <= MAX_RADIUS) {
            return bad("need 0 < tol_x < init_radius <= 0.5".into());
        }
        Ok(())
    }

    pub fn is_feasible(&self, x: &[f64]) -> bool {
        x.iter().enumerate().all(|(i, &v)| v >= self.lower[i] && v <= self.upper[i])
            && self.constraints.iter().all(|c| dot(&c.a, x) >= c.b)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistoryEntry {
    pub x: Vec<f64>,
    /// Objective value, or the penalty charged for a failed evaluation.
    pub f: f64,
    pub feasible: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    RadiusFloor,
    Budget,
    Stagnation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptResult {
    pub x_best: Vec<f64>,
    pub f_best: f64,
    pub n_evals: usize,
    pub history: Vec<HistoryEntry>,
    pub termination: Termination,
}

impl OptResult {
    pub const CSV_HEADER: &'static str = "eval,feasible,f,x";

    pub fn write_history_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}", Self::CSV_HEADER)?;
        for (i, h) in self.history.iter().enumerate() {
            let xs: Vec<String> = h.x.iter().map(|v| format!("{v:.12e}")).collect();
            writeln!(w, "{},{},{:.12e},{}", i + 1, h.feasible, h.f, xs.join(";"))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub path: PathBuf,
    /// Rewrite the file after this many new evaluations.
    pub every: usize,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub checkpoint: Option<Checkpoint>,
    /// Previously evaluated points; revisiting them costs no objective call.
    pub resume: Vec<HistoryEntry>,
}

const CHECKPOINT_MAGIC: &str = "# nozzleopt optimizer checkpoint v1";

pub fn write_checkpoint(path: &Path, history: &[HistoryEntry]) -> Result<(), OptError> {
    let tmp = path.with_extension("tmp");
    {
        let mut w = std::io::BufWriter::new(fs::File::create(&tmp)?);
        writeln!(w, "{CHECKPOINT_MAGIC}")?;
        for h in history {
            // Bit patterns make the restart exact.
            let xs: Vec<String> = h.x.iter().map(|v| format!("{:016x}", v.to_bits())).collect();
            writeln!(w, "{} {:016x} {}", u8::from(h.feasible), h.f.to_bits(), xs.join(" "))?;
        }
        w.flush()?;
    }
    fs::rename(tmp, path)?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<Vec<HistoryEntry>, OptError> {
    let r = BufReader::new(fs::File::open(path)?);
    let mut lines = r.lines();
    if lines.next().transpose()?.as_deref() != Some(CHECKPOINT_MAGIC) {
        return Err(OptError::Checkpoint("missing header".into()));
    }
    let bits = |s: &str| u64::from_str_radix(s, 16).map(f64::from_bits);
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let mut it = line.split_whitespace();
        let err = || OptError::Checkpoint(format!("malformed entry {}", i + 1));
        let feasible = match it.next() {
            Some("1") => true,
            Some("0") => false,
            _ => return Err(err()),
        };
        let f = it.next().ok_or_else(err).and_then(|s| bits(s).map_err(|_| err()))?;
        let x = it.map(bits).collect::<Result<Vec<f64>, _>>().map_err(|_| err())?;
        out.push(HistoryEntry { x, f, feasible });
    }
    Ok(out)
}

struct Evaluator<'a, F> {
    f: F,
    lower: &'a [f64],
    range: Vec<f64>,
    cache: HashMap<Vec<u64>, (f64, bool)>,
    history: Vec<HistoryEntry>,
    best_feasible: Option<f64>,
    budget: usize,
    checkpoint: Option<Checkpoint>,
    since_checkpoint: usize,
}

impl<F: FnMut(&[f64]) -> Option<f64>> Evaluator<'_, F> {
    fn to_x(&self, z: &DVector<f64>) -> Vec<f64> {
        z.iter().enumerate().map(|(i, v)| self.lower[i] + v * self.range[i]).collect()
    }

    fn exhausted(&self) -> bool {
        self.history.len() >= self.budget
    }

    /// `Some(f)` for a successful evaluation, `None` for a failure.
    fn eval(&mut self, z: &DVector<f64>) -> Result<Option<f64>, OptError> {
        let x = self.to_x(z);
        let key: Vec<u64> = x.iter().map(|v| v.to_bits()).collect();
        let (f, ok) = match self.cache.get(&key) {
            Some(&(f, ok)) => (f, ok),
            None => match (self.f)(&x) {
                Some(f) if f.is_finite() => (f, true),
                _ => {
                    let base = self.best_feasible.map_or(1.0, f64::abs);
                    (INFEASIBLE_PENALTY_FACTOR * base, false)
                }
            },
        };
        self.cache.insert(key, (f, ok));
        if ok {
            self.best_feasible = Some(self.best_feasible.map_or(f, |b| b.min(f)));
        }
        self.history.push(HistoryEntry { x, f, feasible: ok });
        self.since_checkpoint += 1;
        if let Some(cp) = &self.checkpoint {
            if self.since_checkpoint >= cp.every.max(1) {
                write_checkpoint(&cp.path, &self.history)?;
                self.since_checkpoint = 0;
            }
        }
        Ok(ok.then_some(f))
    }
}

struct Run {
    x_best: DVector<f64>,
    f_best: f64,
    termination: Termination,
}

pub fn minimize<F: FnMut(&[f64]) -> Option<f64>>(problem: &OptProblem, f: F) -> Result<OptResult, OptError> {
    minimize_with(problem, &RunOptions::default(), f)
}

pub fn minimize_with<F: FnMut(&[f64]) -> Option<f64>>(
    problem: &OptProblem,
    options: &RunOptions,
    f: F,
) -> Result<OptResult, OptError> {
    problem.validate()?;
    if !problem.is_feasible(&problem.x0) {
        return Err(OptError::InfeasibleStart("x0 violates the bounds or constraints".into()));
    }
    let n = problem.dim();
    let range: Vec<f64> = (0..n).map(|i| problem.upper[i] - problem.lower[i]).collect();
    let halfspaces: Vec<(DVector<f64>, f64)> = problem
        .constraints
        .iter()
        .map(|c| {
            let a = DVector::from_iterator(n, (0..n).map(|i| c.a[i] * range[i]));
            (a, c.b - dot(&c.a, &problem.lower))
        })
        .collect();
    let mut ev = Evaluator {
        f,
        lower: &problem.lower,
        range: range.clone(),
        cache: options
            .resume
            .iter()
            .map(|h| (h.x.iter().map(|v| v.to_bits()).collect(), (h.f, h.feasible)))
            .collect(),
        history: Vec::new(),
        best_feasible: None,
        budget: problem.budget,
        checkpoint: options.checkpoint.clone(),
        since_checkpoint: 0,
    };
    let z0 = DVector::from_iterator(n, (0..n).map(|i| (problem.x0[i] - problem.lower[i]) / range[i]));
    let mut best = trust_region(problem, &halfspaces, &mut ev, z0, true)?;
    if problem.multistart {
        for z in multistart_points(n) {
            let x = ev.to_x(&z);
            if ev.exhausted() || !problem.is_feasible(&x) {
                continue;
            }
            match trust_region(problem, &halfspaces, &mut ev, z, false) {
                Ok(r) if r.f_best < best.f_best => best = r,
                Ok(_) | Err(OptError::InfeasibleStart(_)) | Err(OptError::Degenerate) => {}
                Err(e) => return Err(e),
            }
        }
    }
    if let Some(cp) = &ev.checkpoint {
        write_checkpoint(&cp.path, &ev.history)?;
    }
    Ok(OptResult {
        x_best: ev.to_x(&best.x_best),
        f_best: best.f_best,
        n_evals: ev.history.len(),
        history: ev.history,
        termination: best.termination,
    })
}

fn multistart_points(n: usize) -> Vec<DVector<f64>> {
    [0.25, 0.75, 0.5].iter().map(|&v| DVector::from_element(n, v)).collect()
}

fn trust_region<F: FnMut(&[f64]) -> Option<f64>>(
    problem: &OptProblem,
    halfspaces: &[(DVector<f64>, f64)],
    ev: &mut Evaluator<F>,
    z0: DVector<f64>,
    first: bool,
) -> Result<Run, OptError> {
    let n = z0.len();
    let m_target = 2 * n + 1;
    let delta_min = problem.tol_x;
    let mut delta = problem.init_radius;
    let f0 = match ev.eval(&z0)? {
        Some(f) => f,
        None if first => return Err(OptError::InfeasibleStart("objective failed at x0".into())),
        None => return Err(OptError::InfeasibleStart("objective failed at restart point".into())),
    };
    let (mut pts, mut fv) = stencil(&z0, f0, delta, halfspaces, ev)?;
    if pts.len() < n + 1 {
        return Err(OptError::InfeasibleStart("cannot build an initial interpolation set".into()));
    }

    let mut h_prev = DMatrix::zeros(n, n);
    let mut stagnant = 0usize;
    let mut fix_geometry = false;
    loop {
        let k = argmin(&fv);
        let center = pts[k].clone();
        let fk = fv[k];
        let run = |t| Ok(Run { x_best: center.clone(), f_best: fk, termination: t });
        if ev.exhausted() {
            return run(Termination::Budget);
        }
        let interp = match Interpolation::new(&pts, &center) {
            Some(i) => i,
            None => {
                // Rebuild the coordinate stencil around the incumbent.
                (pts, fv) = stencil(&center, fk, delta, halfspaces, ev)?;
                if pts.len() < n + 1 {
                    return Err(OptError::Degenerate);
                }
                continue;
            }
        };
        let region = Region { center: &center, radius: delta, halfspaces };
        let far = far_point(&pts, &center, k, delta);
        if std::mem::take(&mut fix_geometry) {
            if let Some(t) = far {
                geometry_step(&interp, t, &region, &mut pts, &mut fv, ev)?;
                continue;
            }
        }
        let q = interp.model(&fv, &h_prev);
        h_prev = q.h.clone();
        let z = minimize_model(&q, &region);
        let step = (&z - &center).norm();
        let pred = fk - q.value(&z);

        if step < 0.5 * delta_min || !(pred > 1e-14 * fk.abs().max(1e-300)) {
            // Model predicts nothing useful here.
            if let Some(t) = far.filter(|_| pts.len() >= m_target) {
                geometry_step(&interp, t, &region, &mut pts, &mut fv, ev)?;
                continue;
            }
            if delta <= delta_min {
                return run(Termination::RadiusFloor);
            }
            delta = (0.5 * delta).max(delta_min);
            continue;
        }

        let Some(fz) = ev.eval(&z)? else {
            if delta <= delta_min {
                return run(Termination::RadiusFloor);
            }
            delta = (0.5 * delta).max(delta_min);
            continue;
        };
        let rho = (fk - fz) / pred;
        if rho > ETA_ACCEPT {
            let improvement = (fk - fz) / fk.abs().max(1e-300);
            if improvement < problem.stagnation_tol {
                stagnant += 1;
            } else {
                stagnant = 0;
            }
        }
        let new_center = if fz < fk { &z } else { &center };
        insert_point(&interp, &mut pts, &mut fv, z.clone(), fz, k, new_center, delta);

        if rho > ETA_EXPAND {
            delta = (2.0 * step).max(delta).min(MAX_RADIUS);
        } else if rho <= ETA_ACCEPT {
            if far.is_some() && pts.len() >= m_target {
                fix_geometry = true;
            } else {
                if delta <= delta_min {
                    let k = argmin(&fv);
                    return Ok(Run { x_best: pts[k].clone(), f_best: fv[k], termination: Termination::RadiusFloor });
                }
                delta = (0.5 * delta).max(delta_min);
            }
        }
        if stagnant >= 3 * n {
            let k = argmin(&fv);
            return Ok(Run { x_best: pts[k].clone(), f_best: fv[k], termination: Termination::Stagnation });
        }
    }
}

/// `z` plus feasible points `z ± delta e_i`, shortening a step up to eight
/// times to stay inside the constraints.
#[allow(clippy::type_complexity)]
fn stencil<F: FnMut(&[f64]) -> Option<f64>>(
    z0: &DVector<f64>,
    f0: f64,
    delta: f64,
    halfspaces: &[(DVector<f64>, f64)],
    ev: &mut Evaluator<F>,
) -> Result<(Vec<DVector<f64>>, Vec<f64>), OptError> {
    let feasible = |z: &DVector<f64>| {
        z.iter().all(|&v| (0.0..=1.0).contains(&v)) && halfspaces.iter().all(|(a, b)| a.dot(z) >= *b)
    };
    let mut pts = vec![z0.clone()];
    let mut fv = vec![f0];
    for i in 0..z0.len() {
        for sign in [1.0, -1.0] {
            let mut step = delta;
            for _ in 0..8 {
                let mut z = z0.clone();
                z[i] += sign * step;
                if feasible(&z) {
                    if ev.exhausted() {
                        return Ok((pts, fv));
                    }
                    if let Some(f) = ev.eval(&z)? {
                        pts.push(z);
                        fv.push(f);
                    }
                    break;
                }
                step *= 0.5;
            }
        }
    }
    Ok((pts, fv))
}

fn argmin(f: &[f64]) -> usize {
    let mut k = 0;
    for (i, &v) in f.iter().enumerate() {
        if v < f[k] {
            k = i;
        }
    }
    k
}

/// Interpolation point farther than `2 delta` from the center, if any.
fn far_point(pts: &[DVector<f64>], center: &DVector<f64>, k: usize, delta: f64) -> Option<usize> {
    let mut best = None;
    let mut dmax = 2.0 * delta;
    for (i, p) in pts.iter().enumerate() {
        let d = (p - center).norm();
        if i != k && d > dmax {
            dmax = d;
            best = Some(i);
        }
    }
    best
}

/// Replaces point `t` by the feasible point maximizing its Lagrange function.
fn geometry_step<F: FnMut(&[f64]) -> Option<f64>>(
    interp: &Interpolation,
    t: usize,
    region: &Region,
    pts: &mut [DVector<f64>],
    fv: &mut [f64],
    ev: &mut Evaluator<F>,
) -> Result<(), OptError> {
    let l = interp.lagrange(t);
    let z = maximize_abs(&l, region);
    match ev.eval(&z)? {
        Some(f) => {
            pts[t] = z;
            fv[t] = f;
        }
        // Failed evaluation: pull the point halfway toward the center.
        None => {
            let c = region.center;
            let toward = c + (&pts[t] - c) * 0.5;
            if let Some(f) = ev.eval(&toward)? {
                pts[t] = toward;
                fv[t] = f;
            }
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn insert_point(
    interp: &Interpolation,
    pts: &mut Vec<DVector<f64>>,
    fv: &mut Vec<f64>,
    z: DVector<f64>,
    fz: f64,
    k: usize,
    center: &DVector<f64>,
    delta: f64,
) {
    let m_target = 2 * z.len() + 1;
    if pts.len() < m_target {
        pts.push(z);
        fv.push(fz);
        return;
    }
    let keep_k = fz >= fv[k];
    let mut best = None;
    let mut score = -1.0;
    for t in 0..pts.len() {
        if keep_k && t == k {
            continue;
        }
        let dist = (&pts[t] - center).norm() / delta;
        let s = interp.lagrange(t).value(&z).abs() * dist.powi(2).max(1.0);
        if s > score {
            score = s;
            best = Some(t);
        }
    }
    if let Some(t) = best {
        pts[t] = z;
        fv[t] = fz;
    }
}
