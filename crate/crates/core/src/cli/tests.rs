use std::fs;

use super::*;
use crate::dynamics::{run_method, MethodMode};
use crate::error::Error;
use crate::model::{SiteNetwork, SpectralDensityFamily};

const FMO_77K: &str = include_str!("../../configs/fmo_fig5b.cfg");
const FMO_SWEEP: &str = include_str!("../../configs/fmo_fig4_sweep.cfg");
const THREE_A: &str = include_str!("../../configs/three_site_a.cfg");
const THREE_B: &str = include_str!("../../configs/three_site_b.cfg");
const THREE_C: &str = include_str!("../../configs/three_site_c.cfg");
const DIMER: &str = include_str!("../../configs/uncoupled_dimer.cfg");

fn diagnostics(text: &str) -> Vec<String> {
    match parse_config(text) {
        Err(Error::Config(d)) => d,
        other => panic!("expected diagnostics, got {other:?}"),
    }
}

const MINIMAL: &str = r#"
[system]
energies = [100, 0]
couplings = [[0, 50], [50, 0]]

[bath]
family = "cubic"
lambda = 20
omega_c = 100

[run]
temperature_K = 300
"#;

#[test]
fn fmo_77k_config_resolves() {
    let cfg = parse_config(FMO_77K).unwrap();
    assert_eq!(cfg.system_label, "fmo7");
    assert_eq!(cfg.network, SiteNetwork::fmo7());
    assert_eq!(cfg.temperature, 77.0);
    assert_eq!(cfg.initial, InitialState::Site(1));
    assert_eq!(cfg.baths, vec![SpectralDensityFamily::fmo(1.0).unwrap(); 7]);
    assert_eq!(cfg.sweep.initial_site, vec![1, 6]);
}

#[test]
fn shipped_configs_parse() {
    for text in [FMO_77K, FMO_SWEEP, THREE_A, THREE_B, THREE_C, DIMER] {
        parse_config(text).unwrap();
    }
    let a = parse_config(THREE_A).unwrap();
    assert_eq!(a.methods, MethodMode::ALL.to_vec());
    assert_eq!(a.baths[2], SpectralDensityFamily::cubic(120.0, 200.0).unwrap());
    assert_eq!(a.network.coupling(0, 1), 20.0);
    assert_eq!(parse_config(FMO_SWEEP).unwrap().sweep_points().len(), 12);
}

#[test]
fn defaults_applied() {
    let cfg = parse_config(MINIMAL).unwrap();
    assert_eq!(cfg.dt, DEFAULT_DT_PS);
    assert_eq!(cfg.t_max, DEFAULT_T_MAX_PS);
    assert_eq!(cfg.methods, MethodMode::ALL.to_vec());
    assert_eq!(cfg.initial, InitialState::Site(1));
    assert!(cfg.cache);
    assert!(cfg.sweep.is_empty());
    assert_eq!(cfg.baths.len(), 2);
}

#[test]
fn missing_temperature_is_named() {
    let d = diagnostics(&MINIMAL.replace("temperature_K = 300", ""));
    assert_eq!(d.len(), 1);
    assert!(d[0].starts_with("run.temperature_K"), "{d:?}");
}

#[test]
fn per_site_bath_count_must_match() {
    let mut text = "[system]\npreset = \"fmo7\"\n[run]\ntemperature_K = 77\n".to_string();
    for k in 1..=3 {
        text.push_str(&format!("[bath.{k}]\nfamily = \"fmo\"\n"));
    }
    let d = diagnostics(&text);
    assert!(d.iter().any(|m| m.contains("3 entries") && m.contains("7 sites")), "{d:?}");
}

#[test]
fn unknown_keys_and_foreign_parameters_rejected() {
    let d = diagnostics(&MINIMAL.replace("temperature_K = 300", "temperature_K = 300\ntemprature = 4"));
    assert!(d.iter().any(|m| m.starts_with("run.temprature: unknown key")), "{d:?}");
    let d = diagnostics(&MINIMAL.replace("omega_c = 100", "omega_c = 100\neta = 2"));
    assert!(d.iter().any(|m| m.starts_with("bath.eta: not a parameter")), "{d:?}");
    let d = diagnostics(&format!("{MINIMAL}\n[extra]\nx = 1\n"));
    assert!(d.iter().any(|m| m.starts_with("extra: unknown key")), "{d:?}");
}

#[test]
fn several_problems_reported_together() {
    let text = MINIMAL
        .replace("temperature_K = 300", "dt_ps = \"fast\"\nmethods = [\"exact\"]")
        .replace("lambda = 20", "lambda = -1");
    let d = diagnostics(&text);
    assert!(d.iter().any(|m| m.starts_with("run.temperature_K")), "{d:?}");
    assert!(d.iter().any(|m| m.starts_with("run.dt_ps")), "{d:?}");
    assert!(d.iter().any(|m| m.starts_with("run.methods[0]")), "{d:?}");
    assert!(d.iter().any(|m| m.starts_with("bath:")), "{d:?}");
}

#[test]
fn syntax_errors_carry_position() {
    let d = diagnostics("[system\npreset = 1");
    assert!(d[0].contains("line 1"), "{d:?}");
}

#[test]
fn initial_state_validated() {
    let ok = MINIMAL.replace(
        "temperature_K = 300",
        "temperature_K = 300\ninitial_state_re = [[0.5, 0.5], [0.5, 0.5]]",
    );
    let cfg = parse_config(&ok).unwrap();
    assert!(matches!(cfg.initial, InitialState::Matrix(_)));
    let bad = MINIMAL.replace(
        "temperature_K = 300",
        "temperature_K = 300\ninitial_state_re = [[0.5, 0.9], [0.9, 0.5]]",
    );
    let d = diagnostics(&bad);
    assert!(d[0].starts_with("run.initial_state_re"), "{d:?}");
    let d = diagnostics(&MINIMAL.replace("temperature_K = 300", "temperature_K = 300\ninitial_site = 3"));
    assert!(d[0].starts_with("run.initial_site"), "{d:?}");
}

#[test]
fn overrides_edit_nested_keys() {
    let mut t: toml::Table = MINIMAL.parse().unwrap();
    apply_overrides(
        &mut t,
        &[
            "run.temperature_K=77".into(),
            "run.methods=[\"weak\"]".into(),
            "output.dir=elsewhere".into(),
            "sweep.eta=[1, 2]".into(),
        ],
    )
    .unwrap();
    let cfg = from_table(&t).unwrap();
    assert_eq!(cfg.temperature, 77.0);
    assert_eq!(cfg.methods, vec![MethodMode::WeakCoupling]);
    assert_eq!(cfg.output_dir, std::path::PathBuf::from("elsewhere"));
    assert_eq!(cfg.sweep.eta, vec![1.0, 2.0]);
    assert!(apply_overrides(&mut t, &["novalue".into()]).is_err());
    assert!(apply_overrides(&mut t, &["run.temperature_K.x=1".into()]).is_err());
}

#[test]
fn sweep_labels_encode_coordinates() {
    let cfg = parse_config(FMO_SWEEP).unwrap();
    let pts = cfg.sweep_points();
    assert_eq!(pts[0].label, "eta0.5_T5K");
    assert_eq!(pts[7].label, "eta2.0_T77K");
    assert_eq!(csv_name(&pts[7], MethodMode::Variational), "eta2.0_T77K_variational.csv");
    let single = parse_config(MINIMAL).unwrap().sweep_points();
    assert_eq!(single.len(), 1);
    assert_eq!(single[0].label, "T300K");
    let starts = parse_config(FMO_77K).unwrap().sweep_points();
    assert_eq!(starts[1].label, "T77K_site6");
    assert_eq!(starts[1].initial_site, Some(6));
}

#[test]
fn eta_scales_each_family() {
    let cubic = SpectralDensityFamily::cubic(10.0, 50.0).unwrap();
    assert_eq!(scale_family(&cubic, 2.0).unwrap(), SpectralDensityFamily::cubic(20.0, 50.0).unwrap());
    let fmo = SpectralDensityFamily::fmo(0.5).unwrap();
    assert_eq!(scale_family(&fmo, 4.0).unwrap(), SpectralDensityFamily::fmo(2.0).unwrap());
    assert!(scale_family(&fmo, -1.0).is_err());
}

fn dimer_trajectory() -> crate::dynamics::Trajectory {
    let cfg = parse_config(MINIMAL).unwrap();
    let p = cfg.base_point();
    let grid = crate::corr::TimeGrid::new(0.002, 0.1).unwrap();
    run_method(
        &cfg.network,
        &cfg.baths_at(&p).unwrap(),
        MethodMode::Variational,
        &cfg.initial_state_at(&p).unwrap(),
        &grid,
    )
    .unwrap()
}

#[test]
fn csv_round_trip_is_lossless() {
    let traj = dimer_trajectory();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csv");
    emit_csv(&traj, &path).unwrap();
    let text = fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().next().unwrap(), "t_ps,p1,p2,re_rho_1_2,im_rho_1_2");
    assert_eq!(text.lines().count(), traj.times.len() + 1);
    let (times, states) = read_csv(&path).unwrap();
    assert_eq!(times.len(), traj.times.len());
    for (k, rho) in states.iter().enumerate() {
        assert!((times[k] - traj.times[k]).abs() <= 1e-10);
        let diff = (rho - &traj.lab_states[k]).iter().fold(0.0f64, |m, z| m.max(z.norm()));
        assert!(diff <= 1e-10, "row {k}: {diff}");
    }
}

#[test]
fn single_site_csv_has_one_population() {
    assert_eq!(header(1), "t_ps,p1");
    assert_eq!(header(3), "t_ps,p1,p2,p3,re_rho_1_2,im_rho_1_2,re_rho_1_3,im_rho_1_3,re_rho_2_3,im_rho_2_3");
}

fn small_run_config(dir: &std::path::Path) -> RunConfig {
    let text = MINIMAL.replace("temperature_K = 300", "temperature_K = 300\nt_max_ps = 0.05\ndt_ps = 0.005");
    let mut cfg = parse_config(&text).unwrap();
    cfg.output_dir = dir.to_path_buf();
    cfg
}

#[test]
fn run_writes_csvs_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_run_config(dir.path());
    let report = run(&cfg, &cfg.sweep_points(), 1).unwrap();
    assert_eq!(report.failures(), 0);
    let csvs = report.csv_paths(dir.path());
    assert_eq!(csvs.len(), 3);
    for p in &csvs {
        assert!(p.exists(), "{}", p.display());
    }
    let manifest: toml::Table = fs::read_to_string(&report.manifest).unwrap().parse().unwrap();
    let methods = manifest["point"][0]["method"].as_array().unwrap();
    assert_eq!(methods.len(), 3);
    for m in methods {
        for key in ["free_energy_bound_cm", "residual", "iterations", "B", "R"] {
            assert!(m.get(key).is_some(), "missing {key} in {m}");
        }
    }
    assert_eq!(methods[0]["kernel_cache"].as_str(), Some("miss"));

    // second run: cache hits, identical outputs outside [timing]
    let first: Vec<Vec<u8>> = csvs.iter().map(|p| fs::read(p).unwrap()).collect();
    let strip = |t: &str| t.split("[timing]").next().unwrap().replace("\"hit\"", "\"miss\"");
    let manifest_1 = strip(&fs::read_to_string(&report.manifest).unwrap());
    let again = run(&cfg, &cfg.sweep_points(), 2).unwrap();
    let second: Vec<Vec<u8>> = again.csv_paths(dir.path()).iter().map(|p| fs::read(p).unwrap()).collect();
    assert_eq!(first, second);
    let text_2 = fs::read_to_string(&again.manifest).unwrap();
    assert!(text_2.contains("kernel_cache = \"hit\""));
    assert_eq!(manifest_1, strip(&text_2));
}

#[test]
fn failed_points_are_recorded_and_others_continue() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_run_config(dir.path());
    cfg.methods = vec![MethodMode::WeakCoupling];
    cfg.sweep.initial_site = vec![1, 5];
    let report = run(&cfg, &cfg.sweep_points(), 1).unwrap();
    assert_eq!(report.failures(), 1);
    assert!(dir.path().join("T300K_site1_weak.csv").exists());
    let manifest: toml::Table = fs::read_to_string(&report.manifest).unwrap().parse().unwrap();
    assert_eq!(manifest["failures"].as_integer(), Some(1));
    assert_eq!(manifest["point"][1]["method"][0]["status"].as_str(), Some("failed"));
}
