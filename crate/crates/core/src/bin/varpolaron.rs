use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{error, info};

use varpolaron::cli::{self, RunConfig};
use varpolaron::corr::{evaluate_kernel, KernelKind, TimeGrid};
use varpolaron::dynamics::{run_method, MethodMode};
use varpolaron::model::{BathSpec, SiteNetwork, SpectralDensityFamily};
use varpolaron::oracle;
use varpolaron::varopt::SiteFraction;
use varpolaron::{Error, Result};

#[derive(Parser)]
#[command(name = "varpolaron", version, about = "Variational polaron master equation for exciton transfer networks")]
struct Cli {
    /// Worker threads for sweep points (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    /// Config edit applied before validation, e.g. run.temperature_K=77 (repeatable).
    #[arg(long = "override", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the base point of a config (the [sweep] table is ignored).
    Simulate { config: PathBuf },
    /// Run every point of the config's [sweep] grid.
    Sweep { config: PathBuf },
    /// Diagnostic comparisons against independent reference calculations.
    #[command(subcommand)]
    Oracle(OracleCommand),
}

#[derive(Args)]
struct CubicBath {
    /// Reorganization energy, cm^-1.
    #[arg(long, default_value_t = 50.0)]
    lambda: f64,
    /// Cutoff frequency, cm^-1.
    #[arg(long, default_value_t = 100.0)]
    omega_c: f64,
    #[arg(long, default_value_t = 300.0)]
    temperature: f64,
}

impl CubicBath {
    fn family(&self) -> Result<SpectralDensityFamily> {
        SpectralDensityFamily::cubic(self.lambda, self.omega_c)
    }
}

#[derive(Subcommand)]
enum OracleCommand {
    /// Uncoupled dimer: exact independent-boson coherence against the weak-coupling engine.
    Dephasing {
        #[command(flatten)]
        bath: CubicBath,
        #[arg(long, default_value_t = 0.5)]
        t_max: f64,
        #[arg(long, default_value_t = 0.001)]
        dt: f64,
    },
    /// Kernels at F = 0 and F = 1 by reference quadrature against the engine.
    Kernels {
        #[command(flatten)]
        bath: CubicBath,
        /// Times in ps.
        #[arg(long, value_delimiter = ',', default_value = "0,0.01,0.05,0.2,1")]
        times: Vec<f64>,
    },
    /// Exact dynamics of a config's baths discretized into a few modes, against the
    /// weak-coupling engine driven by the same modes.
    FiniteMode {
        config: PathBuf,
        #[arg(long, default_value_t = 3)]
        modes: usize,
        #[arg(long, default_value_t = 6)]
        max_quanta: usize,
        #[arg(long, default_value_t = 0.3)]
        t_max: f64,
        #[arg(long, default_value_t = 0.001)]
        dt: f64,
    },
}

fn run_config(cfg: &RunConfig, sweep: bool, workers: usize) -> Result<ExitCode> {
    let points = if sweep {
        cfg.sweep_points()
    } else {
        if !cfg.sweep.is_empty() {
            info!("simulate runs the base point only; use `sweep` for the [sweep] grid");
        }
        vec![cfg.base_point()]
    };
    let report = cli::run(cfg, &points, workers)?;
    let failures = report.failures();
    println!(
        "{} runs, {failures} failed, {:.1} s; manifest {}",
        points.len() * cfg.methods.len(),
        report.wall_seconds,
        report.manifest.display()
    );
    Ok(if failures == 0 { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn dephasing(bath: &CubicBath, t_max: f64, dt: f64) -> Result<()> {
    let family = bath.family()?;
    let baths = BathSpec::broadcast(family.clone(), 2, bath.temperature)?;
    let net = SiteNetwork::new(vec![0.0, 0.0], nalgebra::DMatrix::zeros(2, 2))?;
    let rho0 = varpolaron::dynamics::CMatrix::from_element(2, 2, num_complex::Complex64::new(0.5, 0.0));
    let grid = TimeGrid::new(dt, t_max)?;
    let traj = run_method(&net, &baths, MethodMode::WeakCoupling, &rho0, &grid)?;
    println!("t_ps,gamma,oracle_abs_rho12,engine_abs_rho12");
    let stride = (grid.n_steps() / 20).max(1);
    let mut worst = 0.0f64;
    for k in (0..=grid.n_steps()).step_by(stride) {
        let t = grid.time(k);
        let gamma = oracle::independent_boson_decoherence(&family, baths.beta(), t)?;
        // both sites dephase independently
        let exact = 0.5 * (-2.0 * gamma).exp();
        let engine = traj.lab_states[k][(0, 1)].norm();
        worst = worst.max((exact - engine).abs());
        println!("{t:.6},{gamma:.10e},{exact:.10e},{engine:.10e}");
    }
    println!("max |difference| = {worst:.3e}");
    Ok(())
}

fn kernels(bath: &CubicBath, times: &[f64]) -> Result<()> {
    let family = bath.family()?;
    let beta = BathSpec::broadcast(family.clone(), 1, bath.temperature)?.beta();
    println!("kind,fraction,t_ps,oracle_re,oracle_im,engine_re,engine_im");
    let mut worst = 0.0f64;
    for (fname, fraction) in [("0", SiteFraction::Zero), ("1", SiteFraction::One)] {
        for kind in [KernelKind::Zz, KernelKind::Xy, KernelKind::Yz] {
            for &t in times {
                let r = oracle::reference_kernel(kind, &family, &fraction, beta, t)?;
                let e = evaluate_kernel(kind, &family, &fraction, beta, t)?;
                let scale = r.norm().max(1e-300);
                if r.norm() > 0.0 || e.norm() > 0.0 {
                    worst = worst.max((r - e).norm() / scale.max(e.norm()));
                }
                println!("{kind:?},{fname},{t},{:.12e},{:.12e},{:.12e},{:.12e}", r.re, r.im, e.re, e.im);
            }
        }
    }
    println!("max relative difference = {worst:.3e}");
    Ok(())
}

fn finite_mode(cfg: &RunConfig, modes: usize, max_quanta: usize, t_max: f64, dt: f64) -> Result<()> {
    let point = cfg.base_point();
    let baths = cfg.baths_at(&point)?;
    let rho0 = cfg.initial_state_at(&point)?;
    let grid = TimeGrid::new(dt, t_max)?;
    let fbath = oracle::FiniteBath::from_baths(&baths, modes, max_quanta)?;
    let exact = oracle::finite_mode_exact(&cfg.network, &fbath, baths.beta(), &rho0, &grid)?;
    let engine = oracle::engine_on_finite_bath(&cfg.network, &fbath, baths.beta(), &rho0, &grid)?;
    let n = cfg.n_sites();
    println!(
        "# dimension {}, leakage {:.2e}, norm defect {:.2e}",
        exact.dimension, exact.leakage, exact.norm_defect
    );
    let mut head = vec!["t_ps".to_string()];
    for s in 1..=n {
        head.push(format!("exact_p{s}"));
        head.push(format!("engine_p{s}"));
    }
    println!("{}", head.join(","));
    let stride = (grid.n_steps() / 20).max(1);
    for k in (0..=grid.n_steps()).step_by(stride) {
        let mut row = vec![format!("{:.6}", grid.time(k))];
        for s in 0..n {
            row.push(format!("{:.8}", exact.population(k, s)));
            row.push(format!("{:.8}", engine.population(k, s)));
        }
        println!("{}", row.join(","));
    }
    let worst = (0..=grid.n_steps())
        .flat_map(|k| (0..n).map(move |s| (k, s)))
        .map(|(k, s)| (exact.population(k, s) - engine.population(k, s)).abs())
        .fold(0.0f64, f64::max);
    println!("max population difference = {worst:.3e}");
    Ok(())
}

fn dispatch(args: Cli) -> Result<ExitCode> {
    match args.command {
        Command::Simulate { config } => run_config(&cli::load_config(&config, &args.overrides)?, false, args.workers),
        Command::Sweep { config } => run_config(&cli::load_config(&config, &args.overrides)?, true, args.workers),
        Command::Oracle(cmd) => {
            match cmd {
                OracleCommand::Dephasing { bath, t_max, dt } => dephasing(&bath, t_max, dt)?,
                OracleCommand::Kernels { bath, times } => kernels(&bath, &times)?,
                OracleCommand::FiniteMode {
                    config,
                    modes,
                    max_quanta,
                    t_max,
                    dt,
                } => finite_mode(&cli::load_config(&config, &args.overrides)?, modes, max_quanta, t_max, dt)?,
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(Error::Config(diags)) => {
            for d in diags {
                error!("{d}");
            }
            ExitCode::from(2)
        }
        Err(e) => {
            error!("{e}");
            ExitCode::from(1)
        }
    }
}
