//! Runs sweep points × methods, writes CSVs and the manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;

use super::config::{InitialState, RunConfig, SweepPoint};
use super::csv::emit_csv;
use crate::corr::{cache, KernelSet, TimeGrid};
use crate::dynamics::{prepare_frame, simulate, MethodMode, StageTimings};
use crate::error::{Error, Result};
use crate::model::SpectralDensityFamily;
use crate::varopt::{free_energy_bound, SolveOptions};

pub const MANIFEST_NAME: &str = "manifest.toml";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CacheUse {
    Off,
    Hit,
    Miss,
}

/// Solver diagnostics and output of one successful (point, method) run.
#[derive(Clone, Debug, Serialize)]
pub struct MethodSummary {
    pub csv: String,
    /// System part of the free-energy bound A_B at the frame used, cm^-1.
    pub free_energy_bound_cm: f64,
    pub residual: f64,
    pub iterations: usize,
    #[serde(rename = "B")]
    pub b: Vec<f64>,
    #[serde(rename = "R")]
    pub r: Vec<f64>,
    /// 1-based sites where the stationary fraction is not confined to [0, 1].
    pub unbounded_sites: Vec<usize>,
    pub min_eigenvalue: f64,
    pub max_trace_defect: f64,
    pub kernel_cache: CacheUse,
    /// Per-start bounds of the variational solve, in start order.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub candidate_bounds_cm: Vec<f64>,
    #[serde(skip)]
    pub timings: StageTimings,
}

#[derive(Clone, Debug)]
pub struct MethodOutcome {
    pub mode: MethodMode,
    pub result: std::result::Result<MethodSummary, String>,
}

#[derive(Clone, Debug)]
pub struct PointOutcome {
    pub point: SweepPoint,
    pub methods: Vec<MethodOutcome>,
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub points: Vec<PointOutcome>,
    pub manifest: PathBuf,
    pub wall_seconds: f64,
}

impl RunReport {
    pub fn failures(&self) -> usize {
        self.points
            .iter()
            .flat_map(|p| &p.methods)
            .filter(|m| m.result.is_err())
            .count()
    }

    pub fn csv_paths(&self, dir: &Path) -> Vec<PathBuf> {
        self.points
            .iter()
            .flat_map(|p| &p.methods)
            .filter_map(|m| m.result.as_ref().ok().map(|s| dir.join(&s.csv)))
            .collect()
    }
}

pub fn csv_name(point: &SweepPoint, mode: MethodMode) -> String {
    format!("{}_{mode}.csv", point.label)
}

fn run_one(cfg: &RunConfig, point: &SweepPoint, mode: MethodMode, cache_dir: Option<&Path>) -> Result<MethodSummary> {
    let baths = cfg.baths_at(point)?;
    let rho0 = cfg.initial_state_at(point)?;
    let grid = TimeGrid::new(cfg.dt, cfg.t_max)?;
    let net = &cfg.network;

    let t0 = Instant::now();
    let (frame, solution) =
        prepare_frame(net, &baths, mode, &SolveOptions::default()).map_err(|e| e.at_stage("frame"))?;
    let t1 = Instant::now();
    let (kernels, cache_use) = match cache_dir {
        None => (KernelSet::for_baths(&baths, &frame, &grid), CacheUse::Off),
        Some(dir) => {
            let key = cache::cache_key(&baths, &frame, &grid);
            match cache::load(dir, &key) {
                Some(k) => (Ok(k), CacheUse::Hit),
                None => {
                    let k = KernelSet::for_baths(&baths, &frame, &grid);
                    if let Ok(k) = &k {
                        if let Err(e) = cache::store(dir, &key, k) {
                            warn!("kernel cache not written: {e}");
                        }
                    }
                    (k, CacheUse::Miss)
                }
            }
        }
    };
    let kernels = kernels.map_err(|e| e.at_stage("kernels"))?;
    let t2 = Instant::now();
    let traj = simulate(net, &frame, kernels, &rho0, mode).map_err(|e| e.at_stage("propagation"))?;
    let t3 = Instant::now();

    let name = csv_name(point, mode);
    emit_csv(&traj, &cfg.output_dir.join(&name))?;

    let (residual, iterations, unbounded, candidates) = match &solution {
        Some(s) => (
            s.residual,
            s.iterations,
            s.unbounded_sites.iter().map(|k| k + 1).collect(),
            s.candidates.iter().map(|c| c.bound).collect(),
        ),
        None => (0.0, 0, Vec::new(), Vec::new()),
    };
    Ok(MethodSummary {
        csv: name,
        free_energy_bound_cm: free_energy_bound(net, &frame.state, frame.beta),
        residual,
        iterations,
        b: frame.state.b.clone(),
        r: frame.state.r.clone(),
        unbounded_sites: unbounded,
        min_eigenvalue: traj.min_eigenvalue,
        max_trace_defect: traj.max_defects().0,
        kernel_cache: cache_use,
        candidate_bounds_cm: candidates,
        timings: StageTimings {
            solve: (t1 - t0).as_secs_f64(),
            kernels: (t2 - t1).as_secs_f64(),
            propagate: (t3 - t2).as_secs_f64(),
        },
    })
}

/// Runs every (point, method) pair on `workers` threads (0 = all cores).
/// Failures are recorded per pair; the manifest is written either way.
pub fn run(cfg: &RunConfig, points: &[SweepPoint], workers: usize) -> Result<RunReport> {
    let started = SystemTime::now();
    let clock = Instant::now();
    fs::create_dir_all(&cfg.output_dir).map_err(|e| Error::io(&cfg.output_dir, e))?;
    let cache_dir = cfg.cache.then(|| cfg.output_dir.join("cache"));

    let tasks: Vec<(usize, MethodMode)> = (0..points.len())
        .flat_map(|p| cfg.methods.iter().map(move |&m| (p, m)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidInput(format!("worker pool: {e}")))?;
    let results: Vec<MethodOutcome> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(p, mode)| {
                let point = &points[p];
                let result = run_one(cfg, point, mode, cache_dir.as_deref()).map_err(|e| e.to_string());
                match &result {
                    Ok(s) => info!("{} {mode}: wrote {}", point.label, s.csv),
                    Err(e) => warn!("{} {mode} failed: {e}", point.label),
                }
                MethodOutcome { mode, result }
            })
            .collect()
    });

    let mut results = results.into_iter();
    let outcomes: Vec<PointOutcome> = points
        .iter()
        .map(|point| PointOutcome {
            point: point.clone(),
            methods: results.by_ref().take(cfg.methods.len()).collect(),
        })
        .collect();
    let wall_seconds = clock.elapsed().as_secs_f64();
    let manifest = cfg.output_dir.join(MANIFEST_NAME);
    let text = manifest_text(cfg, &outcomes, started, wall_seconds)?;
    fs::write(&manifest, text).map_err(|e| Error::io(&manifest, e))?;
    Ok(RunReport {
        points: outcomes,
        manifest,
        wall_seconds,
    })
}

#[derive(Serialize)]
struct SystemEntry<'a> {
    label: &'a str,
    energies_cm: Vec<f64>,
    couplings_cm: Vec<Vec<f64>>,
}

#[derive(Serialize, Default)]
struct BathEntry {
    site: usize,
    family: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    omega_c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    eta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    omega_1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    omega_2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    c_1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    c_2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    omega: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    values: Option<Vec<f64>>,
}

fn bath_entry(site: usize, f: &SpectralDensityFamily) -> BathEntry {
    match f {
        SpectralDensityFamily::CubicExponential { lambda, omega_c } => BathEntry {
            site,
            family: "cubic",
            lambda: Some(*lambda),
            omega_c: Some(*omega_c),
            ..Default::default()
        },
        SpectralDensityFamily::FmoSmooth {
            eta,
            omega_1,
            omega_2,
            c_1,
            c_2,
        } => BathEntry {
            site,
            family: "fmo",
            eta: Some(*eta),
            omega_1: Some(*omega_1),
            omega_2: Some(*omega_2),
            c_1: Some(*c_1),
            c_2: Some(*c_2),
            ..Default::default()
        },
        SpectralDensityFamily::Tabulated(t) => {
            let (omega, values) = t.knots();
            BathEntry {
                site,
                family: "tabulated",
                omega: Some(omega.to_vec()),
                values: Some(values.to_vec()),
                ..Default::default()
            }
        }
    }
}

#[derive(Serialize)]
#[allow(non_snake_case)]
struct RunEntry {
    temperature_K: f64,
    dt_ps: f64,
    t_max_ps: f64,
    methods: Vec<&'static str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    initial_site: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    initial_state_re: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    initial_state_im: Option<Vec<Vec<f64>>>,
}

#[derive(Serialize)]
#[allow(non_snake_case)]
struct SweepEntry {
    eta: Vec<f64>,
    temperature_K: Vec<f64>,
    initial_site: Vec<usize>,
}

#[derive(Serialize)]
struct OutputEntry {
    dir: String,
    cache: bool,
}

#[derive(Serialize)]
struct MethodEntry<'a> {
    mode: &'static str,
    status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<&'a str>,
    #[serde(flatten, skip_serializing_if = "Option::is_none")]
    summary: Option<&'a MethodSummary>,
}

#[derive(Serialize)]
#[allow(non_snake_case)]
struct PointEntry<'a> {
    label: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    eta: Option<f64>,
    temperature_K: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    initial_site: Option<usize>,
    method: Vec<MethodEntry<'a>>,
}

#[derive(Serialize)]
struct TimingRun<'a> {
    label: &'a str,
    mode: &'static str,
    solve_s: f64,
    kernels_s: f64,
    propagate_s: f64,
}

#[derive(Serialize)]
struct TimingEntry<'a> {
    started_unix_s: u64,
    wall_s: f64,
    run: Vec<TimingRun<'a>>,
}

/// Everything outside `[timing]` depends only on the config and the engine version.
#[derive(Serialize)]
struct Manifest<'a> {
    engine_version: &'static str,
    failures: usize,
    system: SystemEntry<'a>,
    run: RunEntry,
    bath: Vec<BathEntry>,
    sweep: SweepEntry,
    output: OutputEntry,
    point: Vec<PointEntry<'a>>,
    timing: TimingEntry<'a>,
}

fn rows(m: &nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn manifest_text(cfg: &RunConfig, points: &[PointOutcome], started: SystemTime, wall: f64) -> Result<String> {
    let (initial_site, re, im) = match &cfg.initial {
        InitialState::Site(s) => (Some(*s), None, None),
        InitialState::Matrix(m) => (None, Some(rows(&m.map(|z| z.re))), Some(rows(&m.map(|z| z.im)))),
    };
    let manifest = Manifest {
        engine_version: env!("CARGO_PKG_VERSION"),
        failures: points.iter().flat_map(|p| &p.methods).filter(|m| m.result.is_err()).count(),
        system: SystemEntry {
            label: &cfg.system_label,
            energies_cm: cfg.network.energies().to_vec(),
            couplings_cm: rows(cfg.network.couplings()),
        },
        run: RunEntry {
            temperature_K: cfg.temperature,
            dt_ps: cfg.dt,
            t_max_ps: cfg.t_max,
            methods: cfg.methods.iter().map(MethodMode::as_str).collect(),
            initial_site,
            initial_state_re: re,
            initial_state_im: im,
        },
        bath: cfg.baths.iter().enumerate().map(|(k, f)| bath_entry(k + 1, f)).collect(),
        sweep: SweepEntry {
            eta: cfg.sweep.eta.clone(),
            temperature_K: cfg.sweep.temperature.clone(),
            initial_site: cfg.sweep.initial_site.clone(),
        },
        output: OutputEntry {
            dir: cfg.output_dir.display().to_string(),
            cache: cfg.cache,
        },
        point: points
            .iter()
            .map(|p| PointEntry {
                label: &p.point.label,
                eta: p.point.eta,
                temperature_K: p.point.temperature,
                initial_site: p.point.initial_site,
                method: p
                    .methods
                    .iter()
                    .map(|m| MethodEntry {
                        mode: m.mode.as_str(),
                        status: if m.result.is_ok() { "ok" } else { "failed" },
                        error: m.result.as_ref().err().map(String::as_str),
                        summary: m.result.as_ref().ok(),
                    })
                    .collect(),
            })
            .collect(),
        timing: TimingEntry {
            started_unix_s: started.duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
            wall_s: wall,
            run: points
                .iter()
                .flat_map(|p| {
                    p.methods.iter().filter_map(move |m| {
                        m.result.as_ref().ok().map(|s| TimingRun {
                            label: &p.point.label,
                            mode: m.mode.as_str(),
                            solve_s: s.timings.solve,
                            kernels_s: s.timings.kernels,
                            propagate_s: s.timings.propagate,
                        })
                    })
                })
                .collect(),
        },
    };
    toml::to_string(&manifest).map_err(|e| Error::InvalidInput(format!("manifest serialization: {e}")))
}
