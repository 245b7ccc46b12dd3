//! `layercgh`: batch front end for scene synthesis, hologram generation,
//! evaluation, reconstruction, encoding and parameter sweeps.

mod commands;
mod error;
mod run_config;
mod table;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use layercgh::{Method, TiltAxis};

use crate::error::{exit, CliError};
use crate::run_config::{CommonFlags, RunConfig, SweepAxis};

#[derive(Debug, Parser)]
#[command(name = "layercgh", version, about = "Layer-based computer-generated holography")]
struct Cli {
    #[command(flatten)]
    common: CommonFlags,

    /// Log progress (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Synthesize RGB-D scenes into the output directory.
    Scenegen {
        /// Number of scenes (defaults to n_scenes from the config).
        #[arg(long, short = 'n')]
        count: Option<usize>,
    },
    /// Compute holograms for every scene in the output directory.
    Generate {
        #[arg(long, short = 'm')]
        method: Option<Method>,
        /// Replace holograms already listed in the manifest.
        #[arg(long)]
        overwrite: bool,
    },
    /// Score holograms by focal image projection (PSNR, SSIM).
    Evaluate {
        /// Only evaluate this method.
        #[arg(long, short = 'm')]
        method: Option<Method>,
        /// Layer count of the focal image projection (default: the
        /// generation layer count).
        #[arg(long)]
        fip_layers: Option<usize>,
    },
    /// Write reconstructed amplitudes as PFM images.
    Reconstruct {
        /// Hologram id from the manifest, e.g. scene_0000:AP.
        #[arg(long)]
        sample: String,
        /// Distances in millimeters.
        #[arg(long, value_delimiter = ',', conflicts_with = "stack")]
        z: Vec<f64>,
        /// Number of evenly spaced planes over the depth range.
        #[arg(long)]
        stack: Option<usize>,
    },
    /// Double-phase encode a hologram for a phase-only display.
    Encode {
        #[arg(long)]
        sample: String,
        /// Off-axis carrier angle in degrees.
        #[arg(long, default_value_t = 0.0)]
        angle: f64,
        #[arg(long, default_value = "horizontal")]
        axis: TiltAxis,
    },
    /// Evaluate a method over several values of one parameter.
    Sweep {
        #[arg(long)]
        axis: Option<SweepAxis>,
        /// Comma-separated values: layer counts, depth ranges in mm, or
        /// padding modes.
        #[arg(long, value_delimiter = ',')]
        values: Vec<String>,
        #[arg(long, short = 'n')]
        count: Option<usize>,
        #[arg(long, short = 'm')]
        method: Option<Method>,
    },
    /// Print the alias-free propagation bound per color channel.
    Zmax,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut rc = RunConfig::load(cli.common.config.as_deref())?;
    rc.apply(&cli.common);
    if let Command::Zmax = cli.command {
        for line in commands::zmax(&rc)? {
            println!("{line}");
        }
        return Ok(());
    }
    let ctx = commands::Context::new(rc)?;
    if ctx.run.threads > 0 {
        // ignore the error if a pool was already installed
        let _ = rayon::ThreadPoolBuilder::new().num_threads(ctx.run.threads).build_global();
    }
    let dir: PathBuf = ctx.run.output_dir.clone();
    match cli.command {
        Command::Zmax => unreachable!(),
        Command::Scenegen { count } => {
            let recs = commands::scenegen(&ctx, count.unwrap_or(ctx.run.n_scenes))?;
            println!("wrote {} scenes to {}", recs.len(), dir.display());
        }
        Command::Generate { method, overwrite } => {
            let m = method.unwrap_or(ctx.run.method);
            let recs = commands::generate(&ctx, m, overwrite)?;
            println!("wrote {} {m} holograms to {}", recs.len(), dir.display());
        }
        Command::Evaluate { method, fip_layers } => {
            let ev = commands::evaluate(&ctx, method, fip_layers)?;
            println!("{} channel scores written to {}", ev.records.len(), dir.join("metrics.csv").display());
            print!("{}", table::render(&ev.rows));
        }
        Command::Reconstruct { sample, z, stack } => {
            let distances = match stack {
                Some(n) if n > 0 => commands::stack_distances(ctx.optical.depth_range, n),
                Some(_) => return Err(CliError::Config("--stack needs at least one plane".into())),
                None => z.iter().map(|mm| mm * 1e-3).collect(),
            };
            for p in commands::reconstruct(&ctx, &sample, &distances)? {
                println!("{}", p.display());
            }
        }
        Command::Encode { sample, angle, axis } => {
            for p in commands::encode(&ctx, &sample, angle, axis)? {
                println!("{}", p.display());
            }
        }
        Command::Sweep { axis, values, count, method } => {
            let axis = axis
                .or(ctx.run.sweep.axis)
                .ok_or_else(|| CliError::Config("sweep needs --axis".into()))?;
            let values = if values.is_empty() { ctx.run.sweep.values.clone() } else { values };
            let res = commands::sweep(
                &ctx,
                axis,
                &values,
                count.unwrap_or(ctx.run.n_scenes),
                method.unwrap_or(ctx.run.method),
            )?;
            for (value, rows) in &res.points {
                println!("== {:?} = {value}", res.axis);
                print!("{}", table::render(rows));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { exit::USAGE as u8 } else { exit::OK as u8 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("layercgh: {}: {e}", e.label());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
