// `!(x > 0.0)` deliberately rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;
use nmodes_core::continuation::{compute_generator, ContinuationOptions, Eigenmanifold};
use nmodes_core::dynamics::{find_equilibrium, linearize, MechanicalModel};
use nmodes_core::io::{
    read_archive, write_archive, write_atomic, write_energy_frequency_csv, write_report_csv, write_strobe_csv,
};
use nmodes_core::metrics::{compare, energy_frequency_table, strobe, MetricOptions, ModeBranch};
use nmodes_core::models::{load_model_spec, PlanarChain};
use nmodes_core::Error;

/// Arc-length stations per strobe frame.
const STROBE_STATIONS: usize = 101;

#[derive(Parser)]
#[command(name = "nmodes", version, about = "Nonlinear normal modes of planar soft and rigid arms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Linear modes at the stable equilibrium, ascending in frequency.
    Linearize {
        #[arg(long)]
        model: PathBuf,
        /// Also write the table as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Continue one mode in energy and write its generator archive.
    Manifold {
        #[arg(long)]
        model: PathBuf,
        /// 1-based mode index in ascending frequency order.
        #[arg(long)]
        mode: usize,
        /// Reference energy step in J.
        #[arg(long, default_value_t = 0.05)]
        de: f64,
        /// Final energy in J.
        #[arg(long, default_value_t = 1.0)]
        emax: f64,
        /// Newton iterations per correction.
        #[arg(long, default_value_t = 15)]
        nmax: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare two mode archives in task space.
    Compare {
        #[arg(long)]
        model_a: PathBuf,
        #[arg(long)]
        model_b: PathBuf,
        #[arg(long)]
        archive_a: PathBuf,
        #[arg(long)]
        archive_b: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        sampling: Sampling,
    },
    /// Backbone shapes at fractions of the period.
    Strobe {
        #[arg(long)]
        archive: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        energy: f64,
        /// Comma-separated fractions of the period in [0, 1].
        #[arg(long, value_delimiter = ',', required = true)]
        fractions: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Frequency of every stored orbit of an archive.
    EnergyFrequency {
        #[arg(long)]
        archive: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct Sampling {
    /// Time samples per period for the Fréchet metrics.
    #[arg(long, default_value_t = 512)]
    samples: usize,
    /// Gauss-Legendre points for the arc-length integrals.
    #[arg(long, default_value_t = 10)]
    quadrature_points: usize,
}

/// Failure with an explicit exit status.
#[derive(Debug)]
struct Exit(u8, String);

impl std::fmt::Display for Exit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.1)
    }
}

impl std::error::Error for Exit {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Exit(2, msg.into()).into()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(2);
    }
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_status(&e))
        }
    }
}

fn configure_threads() -> anyhow::Result<()> {
    let Ok(value) = std::env::var("NMODES_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| anyhow!("NMODES_THREADS must be a positive integer, got {value:?}"))?;
    rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()?;
    Ok(())
}

/// 2 for invalid input, 1 for numerical failures.
fn exit_status(e: &anyhow::Error) -> u8 {
    if let Some(Exit(code, _)) = e.downcast_ref::<Exit>() {
        return *code;
    }
    match e.downcast_ref::<Error>() {
        Some(
            Error::Spec(_)
            | Error::Domain(_)
            | Error::Range(_)
            | Error::InvalidModel(_)
            | Error::DimensionMismatch { .. }
            | Error::Json(_)
            | Error::Io(_),
        ) => 2,
        _ => 1,
    }
}

fn run(command: Command) -> anyhow::Result<u8> {
    match command {
        Command::Linearize { model, out } => cmd_linearize(&model, out.as_deref()),
        Command::Manifold { model, mode, de, emax, nmax, out } => cmd_manifold(&model, mode, de, emax, nmax, &out),
        Command::Compare { model_a, model_b, archive_a, archive_b, out, sampling } => {
            cmd_compare([&model_a, &model_b], [&archive_a, &archive_b], &out, &sampling)
        }
        Command::Strobe { archive, model, energy, fractions, out } => {
            cmd_strobe(&archive, &model, energy, &fractions, &out)
        }
        Command::EnergyFrequency { archive, out } => cmd_energy_frequency(&archive, &out),
    }
}

fn load_model(path: &Path) -> anyhow::Result<(PlanarChain, DVector<f64>)> {
    let (_, model) = load_model_spec(path)?;
    let q_eq = find_equilibrium(&model, &model.rest_configuration())?;
    Ok((model, q_eq))
}

/// Archive at `path` checked against the model it claims to describe.
fn load_archive_for(path: &Path, model: &PlanarChain, model_path: &Path) -> anyhow::Result<Eigenmanifold> {
    let manifold = read_archive(path)?;
    if manifold.fingerprint != model.fingerprint() {
        return Err(usage(format!(
            "fingerprint mismatch: {} was not computed for the model in {}",
            path.display(),
            model_path.display()
        )));
    }
    Ok(manifold)
}

fn cmd_linearize(path: &Path, out: Option<&Path>) -> anyhow::Result<u8> {
    let (model, q_eq) = load_model(path)?;
    let modes = linearize(&model, &q_eq)?;
    let mut csv = String::from("mode,omega_rad_s,freq_hz,period_s\n");
    println!("{:>4} {:>16} {:>16} {:>16}", "mode", "omega [rad/s]", "f [Hz]", "period [s]");
    for i in 1..=modes.len() {
        let (omega, period) = (modes.frequency(i), modes.period(i));
        let freq = omega / (2.0 * std::f64::consts::PI);
        println!("{i:>4} {omega:>16.9e} {freq:>16.9e} {period:>16.9e}");
        csv.push_str(&format!("{i},{omega:.8e},{freq:.8e},{period:.8e}\n"));
    }
    if let Some(out) = out {
        write_atomic(out, csv.as_bytes()).with_context(|| format!("writing {}", out.display()))?;
    }
    Ok(0)
}

fn cmd_manifold(path: &Path, mode: usize, de: f64, emax: f64, nmax: usize, out: &Path) -> anyhow::Result<u8> {
    if !(de > 0.0) || !(emax > 0.0) || nmax == 0 {
        return Err(usage("--de and --emax must be positive and --nmax at least 1"));
    }
    let (model, q_eq) = load_model(path)?;
    let n = model.n_dofs();
    if mode == 0 || mode > n {
        return Err(usage(format!("mode index exceeds DoFs: mode {mode} requested, model has {n}")));
    }
    let mut options = ContinuationOptions {
        energy_step: de,
        max_energy: emax,
        ..Default::default()
    };
    options.shooting.max_iterations = nmax;
    let manifold = compute_generator(&model, &q_eq, mode, &options)?;
    write_archive(out, &manifold).with_context(|| format!("writing {}", out.display()))?;
    let range = manifold
        .energy_range()
        .map_or_else(|| "no points".to_string(), |(a, b)| format!("E in [{a:.6}, {b:.6}] J"));
    eprintln!("{} mode {mode}: {} points, {range}", manifold.model, manifold.points.len());
    if let Some(d) = &manifold.diagnostic {
        eprintln!("warning: partial branch: {d}");
    }
    Ok(if manifold.is_complete() { 0 } else { 3 })
}

fn cmd_compare(models: [&Path; 2], archives: [&Path; 2], out: &Path, sampling: &Sampling) -> anyhow::Result<u8> {
    if sampling.samples < 2 || sampling.quadrature_points == 0 {
        return Err(usage("--samples must be at least 2 and --quadrature-points at least 1"));
    }
    let (model_a, _) = load_model(models[0])?;
    let (model_b, _) = load_model(models[1])?;
    let manifold_a = load_archive_for(archives[0], &model_a, models[0])?;
    let manifold_b = load_archive_for(archives[1], &model_b, models[1])?;
    let options = MetricOptions {
        samples: sampling.samples,
        quadrature_points: sampling.quadrature_points,
        ..Default::default()
    };
    let a = ModeBranch::new(&model_a, &manifold_a);
    let b = ModeBranch::new(&model_b, &manifold_b);
    let report = compare(&a, &b, &options)?;
    write_report_csv(out, &[report]).with_context(|| format!("writing {}", out.display()))?;
    Ok(0)
}

fn cmd_strobe(archive: &Path, model_path: &Path, energy: f64, fractions: &[f64], out: &Path) -> anyhow::Result<u8> {
    let (model, _) = load_model(model_path)?;
    let manifold = load_archive_for(archive, &model, model_path)?;
    let branch = ModeBranch::new(&model, &manifold);
    let frames = strobe(&branch, energy, fractions, STROBE_STATIONS, &MetricOptions::default())?;
    write_strobe_csv(out, &manifold.model, manifold.mode_index, energy, &frames)
        .with_context(|| format!("writing {}", out.display()))?;
    Ok(0)
}

fn cmd_energy_frequency(archive: &Path, out: &Path) -> anyhow::Result<u8> {
    let manifold = read_archive(archive)?;
    if manifold.points.is_empty() {
        return Err(usage(format!("{} holds no generator points", archive.display())));
    }
    let rows = energy_frequency_table(&manifold);
    write_energy_frequency_csv(out, &manifold.model, manifold.mode_index, &rows)
        .with_context(|| format!("writing {}", out.display()))?;
    Ok(0)
}
