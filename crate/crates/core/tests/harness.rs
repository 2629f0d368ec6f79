use std::process::Command;

use bistatic_core::gdop::{gdop, select_mode, MeasurementErrorModel};
use bistatic_core::geometry::{BistaticPair, Mode, NodePosition, TargetState};
use bistatic_core::harness::{
    csv_string, run_doppler, run_gdop_map, run_iso_range_sweep, run_multistatic, Engine, GridSpec,
    MultistaticSummary, ScenarioConfig, SweepSummary,
};

fn pool(threads: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap()
}

fn model_cfg() -> ScenarioConfig {
    let mut cfg = ScenarioConfig::preset("scenario3", 100).unwrap();
    cfg.sweep.points = 90;
    cfg.sweep.trials = 4;
    cfg.sweep.seed = 99;
    cfg
}

#[test]
fn sweep_csv_is_identical_across_thread_counts() {
    let cfg = model_cfg();
    let one = pool(1).install(|| csv_string(&run_iso_range_sweep(&cfg).unwrap().rows).unwrap());
    let four = pool(4).install(|| csv_string(&run_iso_range_sweep(&cfg).unwrap().rows).unwrap());
    assert_eq!(one, four);
}

#[test]
fn signal_sweep_csv_is_identical_across_thread_counts() {
    let mut cfg = ScenarioConfig::preset("scenario2", 100).unwrap();
    cfg.sweep.engine = Engine::Signal;
    cfg.sweep.points = 12;
    let one = pool(1).install(|| csv_string(&run_iso_range_sweep(&cfg).unwrap().rows).unwrap());
    let three = pool(3).install(|| csv_string(&run_iso_range_sweep(&cfg).unwrap().rows).unwrap());
    assert_eq!(one, three);
}

#[test]
fn multistatic_csv_is_identical_across_thread_counts() {
    let cfg = model_cfg();
    let one = pool(1).install(|| csv_string(&run_multistatic(&cfg).unwrap().rows).unwrap());
    let four = pool(4).install(|| csv_string(&run_multistatic(&cfg).unwrap().rows).unwrap());
    assert_eq!(one, four);
}

#[test]
fn different_seeds_differ() {
    let a = model_cfg();
    let mut b = model_cfg();
    b.sweep.seed += 1;
    let ra = csv_string(&run_iso_range_sweep(&a).unwrap().rows).unwrap();
    let rb = csv_string(&run_iso_range_sweep(&b).unwrap().rows).unwrap();
    assert_ne!(ra, rb);
}

#[test]
fn every_point_has_a_row_with_a_status() {
    let cfg = model_cfg();
    let res = run_iso_range_sweep(&cfg).unwrap();
    assert_eq!(res.rows.len(), cfg.sweep.points);
    assert!(res.rows.iter().all(|r| !r.status.is_empty()));
    let s = &res.summary;
    assert_eq!(s.ok + s.partial + s.excluded + s.failed, cfg.sweep.points);
    // Points within 5 deg of the pair axis (90 and 270 deg) are excluded.
    for r in &res.rows {
        let near_axis = (r.theta2_deg - 90.0).abs() < 5.0 || (r.theta2_deg - 270.0).abs() < 5.0;
        assert_eq!(r.status == "excluded", near_axis, "{r:?}");
    }
}

#[test]
fn summaries_can_be_recomputed_from_csv() {
    let cfg = model_cfg();
    let res = run_iso_range_sweep(&cfg).unwrap();
    let text = csv_string(&res.rows).unwrap();
    let rows: Vec<_> = csv::Reader::from_reader(text.as_bytes()).deserialize().collect::<Result<_, _>>().unwrap();
    let again = SweepSummary::from_rows(&rows);
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(1.0);
    let (s, t) = (&res.summary, &again);
    assert_eq!((s.points, s.ok, s.partial, s.excluded, s.failed), (t.points, t.ok, t.partial, t.excluded, t.failed));
    for (a, b) in [
        (s.mean_abs_tdoa_err_ns, t.mean_abs_tdoa_err_ns),
        (s.mean_abs_aoa_err_deg, t.mean_abs_aoa_err_deg),
        (s.mean_err_mode1_m, t.mean_err_mode1_m),
        (s.mean_err_mode2_m, t.mean_err_mode2_m),
        (s.mean_gdop_mode1_m, t.mean_gdop_mode1_m),
        (s.mean_gdop_mode2_m, t.mean_gdop_mode2_m),
    ] {
        assert!(close(a, b), "{a} vs {b}");
    }

    let ms = run_multistatic(&cfg).unwrap();
    let text = csv_string(&ms.rows).unwrap();
    let rows: Vec<_> = csv::Reader::from_reader(text.as_bytes()).deserialize().collect::<Result<_, _>>().unwrap();
    let again = MultistaticSummary::from_rows(&rows);
    assert_eq!(ms.summary.ok, again.ok);
    for (a, b) in [
        (ms.summary.mean_fused_err_m, again.mean_fused_err_m),
        (ms.summary.median_fused_err_m, again.median_fused_err_m),
        (ms.summary.mean_best_pair_err_m, again.mean_best_pair_err_m),
        (ms.summary.fused_win_rate, again.fused_win_rate),
    ] {
        assert!(close(a, b), "{a} vs {b}");
    }
}

#[test]
fn config_round_trips_through_a_file() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["scenario1", "scenario2", "scenario3"] {
        let cfg = ScenarioConfig::preset(name, 400).unwrap();
        let path = dir.path().join(format!("{name}.toml"));
        std::fs::write(&path, cfg.to_toml_string().unwrap()).unwrap();
        let back = ScenarioConfig::load(path.to_str().unwrap(), None).unwrap();
        assert_eq!(back, cfg);
    }
}

#[test]
fn gdop_map_flags_degenerate_cells_and_matches_direct_calls() {
    let cfg = ScenarioConfig::preset("scenario3", 100).unwrap();
    let grid = GridSpec { x_min: -25.0, x_max: 50.0, y_min: -25.0, y_max: 25.0, nx: 31, ny: 21 };
    let cells = run_gdop_map(&cfg, &grid).unwrap();
    assert_eq!(cells.len(), 31 * 21);
    let err = cfg.error_model();
    let pair = cfg.pair(Mode::Mode1);
    for c in &cells {
        let t = TargetState::at(c.x_m, c.y_m);
        let g2 = gdop(&pair.with_mode(Mode::Mode2), &t, &err).ok().map(|r| r.gdop.to_bits());
        assert_eq!(c.gdop_mode2_m.map(f64::to_bits), g2);
        if let Ok(m) = select_mode(&pair, &t, &err) {
            assert_eq!(c.best_mode, Some(if m == Mode::Mode1 { 1 } else { 2 }));
        }
    }
    // The grid passes through both nodes: those cells cannot be evaluated.
    let at_node = cells.iter().find(|c| c.x_m == 0.0 && c.y_m == 0.0).unwrap();
    assert!(at_node.gdop_mode1_m.is_none() && at_node.gdop_mode2_m.is_none() && at_node.best_mode.is_none());
}

#[test]
fn near_collinear_pair_has_the_larger_gdop() {
    // One node shared by two pairs; the target sits just off the first pair's baseline.
    let err = MeasurementErrorModel::from_mean_abs(3.55e-9, 0.16f64.to_radians());
    let n1 = NodePosition::with_sigma(0.0, 0.0, 0.01);
    let along = BistaticPair::new(n1, NodePosition::with_sigma(25.0, 0.0, 0.01), Mode::Mode1);
    let across = BistaticPair::new(n1, NodePosition::with_sigma(0.0, 25.0, 0.01), Mode::Mode1);
    let target = TargetState::at(12.5, 0.5);
    let g_along = gdop(&along, &target, &err).unwrap().gdop;
    let g_across = gdop(&across, &target, &err).unwrap().gdop;
    assert!(g_along > 2.0 * g_across, "{g_along} vs {g_across}");
}

#[test]
fn doppler_direction_and_stationary_target() {
    let mut cfg = ScenarioConfig::preset("scenario3", 100).unwrap();
    let inward = run_doppler(&cfg).unwrap().record;
    let m = cfg.motion.as_mut().unwrap();
    m.direction = bistatic_core::harness::config::MotionDirection::RadialOutward;
    let outward = run_doppler(&cfg).unwrap().record;
    assert!(inward.doppler_est_hz < 0.0 && outward.doppler_est_hz > 0.0);
    assert!((inward.doppler_est_hz + outward.doppler_est_hz).abs() < 2.0, "{inward:?} {outward:?}");

    cfg.motion.as_mut().unwrap().speed_mps = 0.0;
    cfg.motion.as_mut().unwrap().pulses = 16;
    let res = run_doppler(&cfg).unwrap();
    let zero_bin = res.map.doppler_axis.iter().position(|&f| f == 0.0).unwrap();
    assert_eq!(res.record.peak_doppler_bin, zero_bin);
}

fn cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_bistatic")).args(args).output().unwrap()
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.csv");
    let ok = cli(&["sweep", "--scenario", "scenario3", "--points", "36", "--out", out.to_str().unwrap()]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("theta2_deg,x_m,y_m,tdoa_true_ns,tdoa_meas_ns,tdoa_err_ns,aoa_true_deg,aoa_meas_deg,aoa_err_deg,err_mode1_m,err_mode2_m,gdop_mode1_m,gdop_mode2_m,status\n"));
    assert_eq!(text.lines().count(), 37);

    assert_eq!(cli(&["sweep", "--scenario", "scenario9"]).status.code(), Some(1));
    assert_eq!(cli(&["sweep", "--bandwidth-mhz", "200"]).status.code(), Some(1));
    assert_eq!(cli(&["sweep", "--engine", "quantum"]).status.code(), Some(1));
    assert_eq!(cli(&["sweep", "--bogus"]).status.code(), Some(1));

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "scenario_id = \"x\"\n[nodes]\nn1 = [0.0, 0.0]\nn2 = [10.0, 0.0]\n[radar]\nbandwidth_mhz = 100\n[sweep]\nsum_range_m = 5.0\n").unwrap();
    assert_eq!(cli(&["sweep", "--scenario", bad.to_str().unwrap()]).status.code(), Some(1));

    let listed = cli(&["scenarios"]);
    assert_eq!(listed.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&listed.stdout).lines().count(), 3);
}

#[test]
fn cli_reports_detection_failure_with_exit_code_two() {
    // A target broadside to the pair axis sits at the receive array's endfire.
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("endfire.toml");
    let mut cfg = ScenarioConfig::preset("scenario3", 100).unwrap();
    cfg.motion.as_mut().unwrap().theta2_deg = 0.0;
    std::fs::write(&cfg_path, cfg.to_toml_string().unwrap()).unwrap();
    let out = cli(&["doppler", "--scenario", cfg_path.to_str().unwrap(), "--out", dir.path().join("d.csv").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}
