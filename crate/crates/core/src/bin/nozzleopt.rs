use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use nozzleopt::harness::{
    flow_field_gallery, preset, run_experiment, validate_config, ExperimentConfig, HarnessError, Parametrization,
    PRESETS,
};

#[derive(Parser)]
#[command(name = "nozzleopt", version, about = "Nozzle contraction shape optimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML experiment config.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in experiment matrix instead of a config file.
    #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(PRESETS))]
    preset: Option<String>,
    /// Output directory (overrides the config).
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Far-field element size in mm (overrides the config).
    #[arg(long)]
    mesh_size: Option<f64>,
    /// Replay optimizer checkpoints found in the output directory.
    #[arg(long)]
    resume: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize the contraction half-angle at every sweep point.
    OptimizeAngle(Common),
    /// Angle search followed by the spline search at every sweep point.
    OptimizeSpline(Common),
    /// Run the sweep with the parametrization named in the config.
    Sweep(Common),
    /// Solve fixed angles and export the flow fields.
    Gallery {
        #[command(flatten)]
        common: Common,
        /// Half-angles in degrees.
        #[arg(long, value_delimiter = ',', default_value = "30,50,70,90")]
        angles: Vec<f64>,
    },
    /// Check a config file, or print a preset as TOML.
    Validate {
        #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
        config: Option<PathBuf>,
        #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(PRESETS))]
        preset: Option<String>,
    },
}

fn load(c: &Common) -> Result<ExperimentConfig, HarnessError> {
    let mut cfg = match (&c.config, &c.preset) {
        (Some(path), _) => validate_config(path)?,
        (None, Some(name)) => preset(name).expect("preset names are checked by clap"),
        (None, None) => ExperimentConfig::default(),
    };
    if let Some(o) = &c.output {
        cfg.output_dir = o.clone();
    }
    if let Some(w) = c.workers {
        cfg.workers = w;
    }
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(h) = c.mesh_size {
        cfg.mesh.h = h;
    }
    cfg.resume |= c.resume;
    Ok(cfg)
}

fn sweep(c: &Common, param: Option<Parametrization>) -> Result<(), HarnessError> {
    let mut cfg = load(c)?;
    if let Some(p) = param {
        cfg.parametrization = p;
    }
    let rows = run_experiment(&cfg)?;
    for r in &rows {
        match &r.error {
            None => println!(
                "u_in {:>6} mm/s  d_out {:.3} mm  alpha {:>7.3}  dp {:>10.3} -> {:>10.3} kPa  ({:+.2}%)",
                r.u_in,
                r.d_out,
                r.alpha_opt.unwrap_or(f64::NAN),
                r.dp_baseline.unwrap_or(f64::NAN),
                r.dp_opt.unwrap_or(f64::NAN),
                100.0 * r.rel_improvement.unwrap_or(f64::NAN),
            ),
            Some(e) => println!("u_in {:>6} mm/s  d_out {:.3} mm  failed: {e}", r.u_in, r.d_out),
        }
    }
    println!("results in {}", cfg.output_dir.join("results.csv").display());
    Ok(())
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::OptimizeAngle(c) => sweep(&c, Some(Parametrization::Angle)),
        Command::OptimizeSpline(c) => sweep(&c, Some(Parametrization::Spline)),
        Command::Sweep(c) => sweep(&c, None),
        Command::Gallery { common, angles } => {
            let cfg = load(&common)?;
            for r in flow_field_gallery(&cfg, &angles)? {
                match &r.report {
                    Some(rep) => println!(
                        "u_in {:>6} mm/s  alpha {:>5}  dp {:>10.3} kPa  vortex {}",
                        r.u_in,
                        r.alpha,
                        rep.delta_p / 1e3,
                        if rep.diagnostics.vortex.has_vortex { "yes" } else { "no" }
                    ),
                    None => println!("u_in {:>6} mm/s  alpha {:>5}  failed: {}", r.u_in, r.alpha, r.error.unwrap_or_default()),
                }
            }
            println!("fields in {}", cfg.output_dir.join("gallery").display());
            Ok(())
        }
        Command::Validate { config: Some(path), .. } => {
            validate_config(&path)?;
            println!("{}: ok", path.display());
            Ok(())
        }
        Command::Validate { preset: Some(name), .. } => {
            print!("{}", preset(&name).expect("checked by clap").to_toml_string()?);
            Ok(())
        }
        Command::Validate { .. } => unreachable!("clap requires --config or --preset"),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
