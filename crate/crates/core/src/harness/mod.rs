//! Experiment configuration, parameter sweeps and result files.
//!
//! A run reads an [`ExperimentConfig`] (TOML), expands its sweep into
//! operating points, and for each point solves the 30° baseline, optimizes the
//! contraction and writes one CSV row plus field files. Points are independent
//! and run on up to `workers` threads; rows are always written in sweep order.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{NozzleDims, ProfileParams, ALPHA_MAX_DEG, ALPHA_MIN_DEG};
use crate::materials::{CrossWlfParams, GiesekusParams, GnfFluid};
use crate::mesh::{Mesh, MeshParams};
use crate::objective::{relative_improvement, ObjectiveReport};
use crate::optimizer::{
    optimize_angle, optimize_spline, read_checkpoint, Checkpoint, NozzleSimulation, OptResult, RunOptions,
    ShapeModel, ShapeSettings, SplineSettings,
};
use crate::solver::{BoundaryConditions, FlowSolution, SolverConfig};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error("invalid config:\n  {}", .0.join("\n  "))]
    Validation(Vec<String>),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// Temperature-dependent generalized Newtonian fluid, axisymmetric.
    ViscousGnf,
    /// Isothermal Giesekus fluid, planar.
    Viscoelastic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parametrization {
    Angle,
    /// Angle search first, then the spline search seeded at the optimal angle.
    Spline,
}

impl Parametrization {
    fn name(self) -> &'static str {
        match self {
            Parametrization::Angle => "angle",
            Parametrization::Spline => "spline",
        }
    }
}

/// Operating points are the Cartesian product of both lists; an empty
/// `d_out` list means the diameter in `dims`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Sweep {
    /// mm/s
    pub feeding_rates: Vec<f64>,
    /// mm
    pub d_out: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Temperatures {
    /// K
    pub t_wall: f64,
    /// K
    pub t_in: f64,
}

impl Default for Temperatures {
    fn default() -> Self {
        let bc = BoundaryConditions::default();
        Self { t_wall: bc.t_wall, t_in: bc.t_in }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub model: ModelKind,
    pub parametrization: Parametrization,
    /// Recorded in the run metadata; the optimizer itself is deterministic.
    pub seed: u64,
    pub output_dir: PathBuf,
    pub workers: usize,
    /// Angle of the reference nozzle (degrees).
    pub baseline_alpha: f64,
    /// Starting angle of the angle search (degrees).
    pub alpha0: f64,
    /// Optimizer checkpoint interval in evaluations, 0 to disable.
    pub checkpoint_every: usize,
    /// Replay existing checkpoints before optimizing.
    pub resume: bool,
    pub dims: NozzleDims,
    pub sweep: Sweep,
    pub temperatures: Temperatures,
    pub fluid: GnfFluid,
    pub giesekus: GiesekusParams,
    /// Defaults to the model's solver settings when absent.
    pub solver: Option<SolverConfig>,
    pub mesh: MeshParams,
    pub optimizer: ShapeSettings,
    pub spline: SplineSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: "experiment".into(),
            model: ModelKind::ViscousGnf,
            parametrization: Parametrization::Angle,
            seed: 0,
            output_dir: PathBuf::from("results"),
            workers: 1,
            baseline_alpha: 30.0,
            alpha0: 30.0,
            checkpoint_every: 1,
            resume: false,
            dims: NozzleDims::default(),
            sweep: Sweep { feeding_rates: vec![1.83], d_out: Vec::new() },
            temperatures: Temperatures::default(),
            fluid: GnfFluid::from(CrossWlfParams::default()),
            giesekus: GiesekusParams::default(),
            solver: None,
            mesh: MeshParams::default(),
            optimizer: ShapeSettings::default(),
            spline: SplineSettings::default(),
        }
    }
}

/// Names accepted by [`preset`].
pub const PRESETS: [&str; 3] = ["viscous-feed-rate", "viscous-outlet-diameter", "viscoelastic-feed-rate"];

/// Shipped experiment matrices.
pub fn preset(name: &str) -> Option<ExperimentConfig> {
    let base = ExperimentConfig { name: name.to_string(), ..ExperimentConfig::default() };
    match name {
        "viscous-feed-rate" => Some(ExperimentConfig {
            sweep: Sweep { feeding_rates: vec![0.67, 1.0, 1.41, 1.83, 2.16, 2.5, 2.83], d_out: Vec::new() },
            ..base
        }),
        // Run at the 1.83 mm/s operating point of the feed-rate sweep.
        "viscous-outlet-diameter" => Some(ExperimentConfig {
            sweep: Sweep { feeding_rates: vec![1.83], d_out: vec![0.4, 0.5, 0.6, 0.8] },
            ..base
        }),
        "viscoelastic-feed-rate" => Some(ExperimentConfig {
            model: ModelKind::Viscoelastic,
            alpha0: 50.0,
            sweep: Sweep { feeding_rates: vec![5.0, 7.5, 10.0, 12.5], d_out: Vec::new() },
            ..base
        }),
        _ => None,
    }
}

/// One operating point of a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    /// mm/s
    pub u_in: f64,
    /// mm
    pub d_out: f64,
}

impl SweepPoint {
    /// File-name stem, e.g. `u1.830_d0.500`.
    pub fn key(&self) -> String {
        format!("u{:.3}_d{:.3}", self.u_in, self.d_out)
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, HarnessError> {
        toml::from_str(s).map_err(|e| HarnessError::Parse(e.to_string()))
    }

    pub fn to_toml_string(&self) -> Result<String, HarnessError> {
        toml::to_string(self).map_err(|e| HarnessError::Parse(e.to_string()))
    }

    pub fn solver_config(&self) -> SolverConfig {
        self.solver.clone().unwrap_or_else(|| match self.model {
            ModelKind::ViscousGnf => SolverConfig::default(),
            ModelKind::Viscoelastic => SolverConfig::viscoelastic(),
        })
    }

    /// Sweep points sorted by feeding rate, then outlet diameter.
    pub fn points(&self) -> Vec<SweepPoint> {
        let diameters = if self.sweep.d_out.is_empty() { vec![self.dims.d_out] } else { self.sweep.d_out.clone() };
        let mut pts: Vec<SweepPoint> = self
            .sweep
            .feeding_rates
            .iter()
            .flat_map(|&u_in| diameters.iter().map(move |&d_out| SweepPoint { u_in, d_out }))
            .collect();
        pts.sort_by(|a, b| a.u_in.total_cmp(&b.u_in).then(a.d_out.total_cmp(&b.d_out)));
        pts
    }

    fn shape_model(&self) -> ShapeModel {
        match self.model {
            ModelKind::ViscousGnf => ShapeModel::Gnf(self.fluid),
            ModelKind::Viscoelastic => ShapeModel::Viscoelastic(self.giesekus),
        }
    }

    fn simulation(&self, pt: SweepPoint) -> NozzleSimulation {
        let bc = BoundaryConditions {
            u_in: pt.u_in,
            t_wall: self.temperatures.t_wall,
            t_in: self.temperatures.t_in,
            ..BoundaryConditions::default()
        };
        let mut sim = NozzleSimulation::new(
            NozzleDims { d_out: pt.d_out, ..self.dims },
            self.shape_model(),
            bc,
            self.solver_config(),
            self.mesh,
        );
        sim.spline_degree = self.spline.degree;
        sim
    }

    /// Every violated invariant, each prefixed with the offending field.
    pub fn validate(&self) -> Result<(), Vec<String>> {
        let mut errs = Vec::new();
        if self.sweep.feeding_rates.is_empty() {
            errs.push("sweep.feeding_rates: must not be empty".to_string());
        }
        for (i, u) in self.sweep.feeding_rates.iter().enumerate() {
            if !(u.is_finite() && *u > 0.0) {
                errs.push(format!("sweep.feeding_rates[{i}]: must be positive, got {u}"));
            }
        }
        for e in self.dims.violations() {
            errs.push(format!("dims: {e}"));
        }
        for (i, d) in self.sweep.d_out.iter().enumerate() {
            if !(d.is_finite() && *d > 0.0 && *d < self.dims.d_in) {
                errs.push(format!("sweep.d_out[{i}]: must lie in (0, dims.d_in = {}), got {d}", self.dims.d_in));
            }
        }
        match self.model {
            ModelKind::ViscousGnf => {
                if let Err(e) = self.fluid.validate() {
                    errs.push(format!("fluid: {e}"));
                }
                let t = self.temperatures;
                if !(t.t_wall.is_finite() && t.t_wall > 0.0 && t.t_in.is_finite() && t.t_in > 0.0) {
                    errs.push(format!("temperatures: must be positive, got t_wall {} t_in {}", t.t_wall, t.t_in));
                }
            }
            ModelKind::Viscoelastic => {
                if let Err(e) = self.giesekus.validate() {
                    errs.push(format!("giesekus: {e}"));
                }
            }
        }
        if let Err(e) = self.solver_config().validate() {
            errs.push(format!("solver: {e}"));
        }
        if !(self.mesh.h.is_finite() && self.mesh.h > 0.0) {
            errs.push(format!("mesh.h: must be positive, got {}", self.mesh.h));
        }
        if !(self.mesh.grading > 0.0 && self.mesh.grading <= 1.0) {
            errs.push(format!("mesh.grading: must lie in (0, 1], got {}", self.mesh.grading));
        }
        let (lo, hi) = self.optimizer.alpha_bounds;
        if !(ALPHA_MIN_DEG <= lo && lo < hi && hi <= ALPHA_MAX_DEG) {
            errs.push(format!("optimizer.alpha_bounds: need {ALPHA_MIN_DEG} <= lo < hi <= {ALPHA_MAX_DEG}, got ({lo}, {hi})"));
        }
        for (field, a) in [("alpha0", self.alpha0), ("baseline_alpha", self.baseline_alpha)] {
            if !(ALPHA_MIN_DEG..=ALPHA_MAX_DEG).contains(&a) {
                errs.push(format!("{field}: {a} outside [{ALPHA_MIN_DEG}, {ALPHA_MAX_DEG}]"));
            }
        }
        for (field, s) in [("optimizer", &self.optimizer), ("spline.shape", &self.spline.shape)] {
            if s.budget == 0 {
                errs.push(format!("{field}.budget: must be positive"));
            }
            if !(s.tol_x > 0.0 && s.init_radius > 0.0) {
                errs.push(format!("{field}: tol_x and init_radius must be positive"));
            }
        }
        if self.spline.n_ctrl < (self.spline.degree + 1).max(3) {
            errs.push(format!("spline.n_ctrl: {} is too few for degree {}", self.spline.n_ctrl, self.spline.degree));
        }
        if self.workers == 0 {
            errs.push("workers: must be at least 1".to_string());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(errs)
        }
    }
}

/// Parses and checks a config file, reporting every violation at once.
pub fn validate_config(path: &Path) -> Result<ExperimentConfig, HarnessError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let cfg = ExperimentConfig::from_toml_str(&text)?;
    cfg.validate().map_err(HarnessError::Validation)?;
    Ok(cfg)
}

/// One sweep point of [`run_experiment`]. Pressures are in kPa.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultRow {
    pub u_in: f64,
    pub d_out: f64,
    pub parametrization: String,
    pub alpha_opt: Option<f64>,
    /// Spline control ordinates (mm), empty for the angle search.
    pub y_ctrl: Vec<f64>,
    pub dp_baseline: Option<f64>,
    /// Best angle-search value; equals `dp_opt` for the angle search.
    pub dp_angle: Option<f64>,
    pub dp_opt: Option<f64>,
    pub rel_improvement: Option<f64>,
    pub n_evals: usize,
    pub termination: String,
    pub has_vortex: Option<bool>,
    pub vortex_area: Option<f64>,
    pub min_outlet_t: Option<f64>,
    pub mass_balance_error: Option<f64>,
    pub error: Option<String>,
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or(String::new(), |v| v.to_string())
}

impl ResultRow {
    pub const CSV_HEADER: &'static str = "u_in_mm_s,d_out_mm,parametrization,status,alpha_opt_deg,y_ctrl_mm,\
        dp_baseline,dp_angle,dp_opt,pressure_unit,rel_improvement,n_evals,termination,\
        has_vortex,vortex_area_mm2,min_outlet_t_k,mass_balance_error,error";

    /// Floats are written in shortest round-trip form.
    pub fn csv_row(&self) -> String {
        let y: Vec<String> = self.y_ctrl.iter().map(f64::to_string).collect();
        let status = if self.error.is_some() { "failed" } else { "ok" };
        let error = self.error.as_deref().unwrap_or("").replace([',', '\n'], ";");
        format!(
            "{},{},{},{status},{},{},{},{},{},kPa,{},{},{},{},{},{},{},{error}",
            self.u_in,
            self.d_out,
            self.parametrization,
            opt(self.alpha_opt),
            y.join(";"),
            opt(self.dp_baseline),
            opt(self.dp_angle),
            opt(self.dp_opt),
            opt(self.rel_improvement),
            self.n_evals,
            self.termination,
            opt(self.has_vortex),
            opt(self.vortex_area),
            opt(self.min_outlet_t),
            opt(self.mass_balance_error),
        )
    }
}

/// Runs `f` on indices `0..n` with up to `workers` threads, results in index order.
fn run_parallel<T: Send>(n: usize, workers: usize, f: impl Fn(usize) -> T + Sync) -> Vec<T> {
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<T>>> = Mutex::new((0..n).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..workers.clamp(1, n.max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= n {
                    break;
                }
                let v = f(i);
                slots.lock().unwrap()[i] = Some(v);
            });
        }
    });
    slots.into_inner().unwrap().into_iter().map(|v| v.expect("worker finished")).collect()
}

fn write_file(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>) -> Result<(), HarnessError> {
    let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
    body(&mut w).and_then(|_| w.flush()).map_err(io_err(path))
}

fn write_fields(dir: &Path, stem: &str, mesh: &Mesh, sol: &FlowSolution) -> Result<(), HarnessError> {
    write_file(&dir.join(format!("{stem}.vtk")), |w| sol.write_vtk(mesh, w))
}

fn report_of(sim: &NozzleSimulation, params: &ProfileParams) -> Option<ObjectiveReport> {
    sim.log.iter().rev().find(|e| &e.params == params).and_then(|e| e.report.clone())
}

struct PointOutcome {
    row: ResultRow,
    seconds: f64,
}

fn run_point(cfg: &ExperimentConfig, pt: SweepPoint, out: &Path) -> Result<PointOutcome, HarnessError> {
    let started = Instant::now();
    let key = pt.key();
    let fields = out.join("fields");
    let mut row = ResultRow {
        u_in: pt.u_in,
        d_out: pt.d_out,
        parametrization: cfg.parametrization.name().into(),
        ..ResultRow::default()
    };
    let mut sim = cfg.simulation(pt);
    let finish = |row, started: Instant| Ok(PointOutcome { row, seconds: started.elapsed().as_secs_f64() });

    let baseline = ProfileParams::Angle { alpha: cfg.baseline_alpha };
    let dp_base = match sim.simulate(&baseline) {
        Ok((mesh, sol, rep)) if rep.feasible => {
            write_fields(&fields, &format!("{key}_baseline"), &mesh, &sol)?;
            rep.delta_p / 1e3
        }
        Ok(_) => {
            row.error = Some("baseline solve infeasible".into());
            return finish(row, started);
        }
        Err(e) => {
            row.error = Some(format!("baseline: {e}"));
            return finish(row, started);
        }
    };
    row.dp_baseline = Some(dp_base);

    let run_opts = |stage: &str| -> Result<RunOptions, HarnessError> {
        let path = out.join("checkpoints").join(format!("{key}_{stage}.ckpt"));
        let resume = if cfg.resume && path.exists() {
            read_checkpoint(&path).map_err(|e| HarnessError::Parse(e.to_string()))?
        } else {
            Vec::new()
        };
        let checkpoint = (cfg.checkpoint_every > 0).then(|| Checkpoint { path, every: cfg.checkpoint_every });
        Ok(RunOptions { checkpoint, resume })
    };

    let angle = match optimize_angle(&mut sim, cfg.alpha0, &cfg.optimizer, &run_opts("angle")?) {
        Ok(a) => a,
        Err(e) => {
            row.error = Some(format!("angle search: {e}"));
            return finish(row, started);
        }
    };
    row.alpha_opt = Some(angle.alpha_opt);
    row.dp_angle = Some(angle.delta_p_opt / 1e3);
    let (best, result): (ProfileParams, OptResult) = match cfg.parametrization {
        Parametrization::Angle => (ProfileParams::Angle { alpha: angle.alpha_opt }, angle.result),
        Parametrization::Spline => {
            let dims = sim.dims;
            match optimize_spline(&mut sim, &dims, angle.alpha_opt, &cfg.spline, &run_opts("spline")?) {
                Ok(s) => {
                    if let ProfileParams::Spline { alpha_scale, y_ctrl } = &s.params {
                        row.alpha_opt = Some(*alpha_scale);
                        row.y_ctrl = y_ctrl.clone();
                    }
                    (s.params, s.result)
                }
                Err(e) => {
                    row.error = Some(format!("spline search: {e}"));
                    return finish(row, started);
                }
            }
        }
    };
    write_file(&out.join("history").join(format!("{key}.csv")), |w| result.write_history_csv(w))?;
    let dp_opt = result.f_best / 1e3;
    row.dp_opt = Some(dp_opt);
    row.rel_improvement = relative_improvement(dp_opt, dp_base).ok();
    row.n_evals = result.n_evals;
    row.termination = format!("{:?}", result.termination).to_lowercase();
    if let Some(rep) = report_of(&sim, &best) {
        row.has_vortex = Some(rep.diagnostics.vortex.has_vortex);
        row.vortex_area = Some(rep.diagnostics.vortex.vortex_area);
        row.min_outlet_t = rep.diagnostics.min_outlet_t;
        row.mass_balance_error = Some(rep.diagnostics.mass_balance_error);
    }
    match sim.simulate(&best) {
        Ok((mesh, sol, _)) => {
            write_fields(&fields, &format!("{key}_opt"), &mesh, &sol)?;
            let profile = best.build(&sim.dims, sim.spline_degree).map_err(|e| HarnessError::Parse(e.to_string()))?;
            write_file(&fields.join(format!("{key}_opt_profile.txt")), |w| profile.write_polyline(w, 0.05))?;
        }
        Err(e) => row.error = Some(format!("re-solving the optimum: {e}")),
    }
    finish(row, started)
}

fn prepare_output(cfg: &ExperimentConfig, subdirs: &[&str]) -> Result<(), HarnessError> {
    cfg.validate().map_err(HarnessError::Validation)?;
    for d in subdirs {
        let p = cfg.output_dir.join(d);
        fs::create_dir_all(&p).map_err(io_err(&p))?;
    }
    let path = cfg.output_dir.join("config.toml");
    let text = cfg.to_toml_string()?;
    fs::write(&path, text).map_err(io_err(&path))
}

fn unix_seconds() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

fn write_metadata(cfg: &ExperimentConfig, kind: &str, started: u64, seconds: &[(String, f64)]) -> Result<(), HarnessError> {
    let mut s = String::new();
    let _ = writeln!(s, "kind = {kind:?}\nname = {:?}\nseed = {}", cfg.name, cfg.seed);
    let _ = writeln!(s, "version = {:?}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(s, "started_unix = {started}\nfinished_unix = {}\n\n[wall_seconds]", unix_seconds());
    for (k, t) in seconds {
        let _ = writeln!(s, "{k:?} = {t:.3}");
    }
    let path = cfg.output_dir.join("run_metadata.toml");
    fs::write(&path, s).map_err(io_err(&path))
}

/// Runs every sweep point and writes `results.csv`, per-point field files,
/// optimizer histories and `run_metadata.toml` under `output_dir`. A failing
/// point yields a row with its error; the run continues.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>, HarnessError> {
    prepare_output(cfg, &["fields", "history", "checkpoints"])?;
    let started = unix_seconds();
    let pts = cfg.points();
    let outcomes = run_parallel(pts.len(), cfg.workers, |i| run_point(cfg, pts[i], &cfg.output_dir));
    let mut rows = Vec::with_capacity(pts.len());
    let mut timing = Vec::with_capacity(pts.len());
    for (pt, o) in pts.iter().zip(outcomes) {
        let o = o?;
        timing.push((pt.key(), o.seconds));
        rows.push(o.row);
    }
    write_file(&cfg.output_dir.join("results.csv"), |w| {
        writeln!(w, "{}", ResultRow::CSV_HEADER)?;
        rows.iter().try_for_each(|r| writeln!(w, "{}", r.csv_row()))
    })?;
    write_metadata(cfg, "sweep", started, &timing)?;
    Ok(rows)
}

/// One solved angle of [`flow_field_gallery`].
#[derive(Debug, Clone, PartialEq)]
pub struct GalleryRow {
    pub u_in: f64,
    pub d_out: f64,
    pub alpha: f64,
    pub report: Option<ObjectiveReport>,
    pub error: Option<String>,
    pub seconds: f64,
}

impl GalleryRow {
    pub const CSV_HEADER: &'static str = "u_in_mm_s,d_out_mm,alpha_deg,status,\
        p_inlet_kpa,p_outlet_kpa,delta_p_kpa,feasible,has_vortex,vortex_area_mm2,min_outlet_t_k,mass_balance_error,error";

    pub fn csv_row(&self) -> String {
        let (status, body) = match &self.report {
            Some(r) => ("ok", r.csv_row()),
            None => ("failed", ",,,,,,,".to_string()),
        };
        let error = self.error.as_deref().unwrap_or("").replace([',', '\n'], ";");
        format!("{},{},{},{status},{body},{error}", self.u_in, self.d_out, self.alpha)
    }
}

/// Solves every sweep point at each angle without optimizing and writes
/// `gallery.csv` plus one field file per solve under `output_dir/gallery`.
pub fn flow_field_gallery(cfg: &ExperimentConfig, angles: &[f64]) -> Result<Vec<GalleryRow>, HarnessError> {
    let mut errs: Vec<String> = angles
        .iter()
        .filter(|a| !(ALPHA_MIN_DEG..=ALPHA_MAX_DEG).contains(*a))
        .map(|a| format!("angles: {a} outside [{ALPHA_MIN_DEG}, {ALPHA_MAX_DEG}]"))
        .collect();
    if angles.is_empty() {
        errs.push("angles: must not be empty".into());
    }
    if !errs.is_empty() {
        return Err(HarnessError::Validation(errs));
    }
    prepare_output(cfg, &["gallery"])?;
    let started = unix_seconds();
    let pts = cfg.points();
    let dir = cfg.output_dir.join("gallery");
    let per_point = run_parallel(pts.len(), cfg.workers, |i| -> Result<Vec<GalleryRow>, HarnessError> {
        let pt = pts[i];
        let mut sim = cfg.simulation(pt);
        let mut rows = Vec::new();
        for &alpha in angles {
            let t0 = Instant::now();
            let (report, error) = match sim.simulate(&ProfileParams::Angle { alpha }) {
                Ok((mesh, sol, rep)) => {
                    write_fields(&dir, &format!("{}_a{alpha:.2}", pt.key()), &mesh, &sol)?;
                    (Some(rep), None)
                }
                Err(e) => (None, Some(e)),
            };
            rows.push(GalleryRow {
                u_in: pt.u_in,
                d_out: pt.d_out,
                alpha,
                report,
                error,
                seconds: t0.elapsed().as_secs_f64(),
            });
        }
        Ok(rows)
    });
    let mut rows = Vec::new();
    for r in per_point {
        rows.extend(r?);
    }
    write_file(&cfg.output_dir.join("gallery.csv"), |w| {
        writeln!(w, "{}", GalleryRow::CSV_HEADER)?;
        rows.iter().try_for_each(|r| writeln!(w, "{}", r.csv_row()))
    })?;
    let timing: Vec<(String, f64)> =
        rows.iter().map(|r| (format!("u{:.3}_d{:.3}_a{:.2}", r.u_in, r.d_out, r.alpha), r.seconds)).collect();
    write_metadata(cfg, "gallery", started, &timing)?;
    Ok(rows)
}
