//! End-to-end runs through the public API: synthesis, fusion, estimation
//! and evaluation.

use coopsense_core::dump::{read_tensor, write_tensor, TensorDump, TensorKind};
use coopsense_core::estimators::{localize, Method, SensingTensor};
use coopsense_core::eval::{
    run_cell, run_sweep, Cooperation, ExperimentSpec, FusionLevel, CSV_HEADER,
};
use coopsense_core::fusion::{fuse_symbol_level, FusionOptions, Occupancy};
use coopsense_core::scenario::{Point, Scenario, Target};
use coopsense_core::waveform::{synthesize_echo, GainMode, Side};
use coopsense_core::Error;

fn single_target_spec(x: f64, y: f64) -> ExperimentSpec {
    let mut spec = ExperimentSpec::desk();
    let refl = spec.scenario.targets[0].reflectivity;
    spec.scenario.targets = vec![Target {
        reflectivity: refl,
        ..Target::stationary(x, y)
    }];
    spec.trials = 2;
    spec
}

#[test]
fn fused_reference_scene_localizes_every_target() {
    let spec = ExperimentSpec::desk();
    let cfg = &spec.config;
    let s = &spec.scenario;
    let a = synthesize_echo(cfg, s, Side::MbsRx, 0, 0, spec.gain_mode).unwrap();
    let b = synthesize_echo(cfg, s, Side::MibsRx, 0, 0, spec.gain_mode).unwrap();
    let fused = fuse_symbol_level(&a, &b, cfg.q().unwrap(), FusionOptions::default()).unwrap();
    assert_eq!(fused.n_bins(), 127);
    // Even bins below 64 overlap, odd bins above 64 are never observed.
    assert_eq!(fused.count(Occupancy::Overlap), 32);
    assert_eq!(fused.count(Occupancy::MibsOnly), 32);
    assert_eq!(fused.count(Occupancy::MbsOnly), 32);
    assert_eq!(fused.count(Occupancy::Empty), 31);

    let grid = spec.build_grid().unwrap();
    let input = SensingTensor::from_fused(&fused).unwrap();
    let r = localize(
        Method::Gdft,
        &input,
        &grid,
        3,
        &spec.estimator,
        &s.mbs_pos,
        &s.mibs_pos,
    )
    .unwrap();
    let mut got = r.estimates.clone();
    got.sort_by(|p, q| p.x.total_cmp(&q.x));
    assert_eq!(got, s.truths());
    assert!(!r.incomplete);
}

#[test]
fn noiseless_single_target_is_exact_for_every_setup() {
    let spec = single_target_spec(150.0, 50.0);
    for c in Cooperation::ALL {
        for f in FusionLevel::ALL {
            let s = ExperimentSpec {
                cooperation: c,
                fusion_level: f,
                ..spec.clone()
            };
            let cell = run_cell(&s, None).unwrap();
            assert_eq!(cell.smse_m, Some(0.0), "{c}/{f}");
            assert_eq!(cell.failures, 0);
        }
    }
}

#[test]
fn sweep_is_reproducible_and_seed_sensitive() {
    let mut spec = ExperimentSpec::desk();
    spec.trials = 4;
    spec.noise_sweep_dbm_hz = vec![-150.0, -140.0];
    let csv = |spec: &ExperimentSpec| {
        let r = run_sweep(spec).unwrap();
        let mut buf = Vec::new();
        r.write_csv(&mut buf, false).unwrap();
        let mut rec = Vec::new();
        r.write_records(&mut rec).unwrap();
        (String::from_utf8(buf).unwrap(), rec)
    };
    let a = csv(&spec);
    assert_eq!(a, csv(&spec));
    assert_eq!(a.0.lines().next().unwrap(), CSV_HEADER);
    assert_eq!(a.0.lines().count(), 3);

    spec.base_seed = 1000;
    assert_ne!(a.1, csv(&spec).1);
}

#[test]
fn records_have_one_line_per_trial() {
    let mut spec = single_target_spec(100.0, 40.0);
    spec.noise_sweep_dbm_hz = vec![-160.0];
    let r = run_sweep(&spec).unwrap();
    let mut buf = Vec::new();
    r.write_records(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("{\"noise_dbm_hz\":-160.0,\"method\":\"gdft\""));
    assert!(lines[1].contains("\"seed\":1"));
}

#[test]
fn dumped_echo_reads_back_bit_exact() {
    let spec = ExperimentSpec::desk();
    let s = spec.scenario.with_noise(Some(-150.0));
    let e = synthesize_echo(&spec.config, &s, Side::MibsRx, 0, 9, GainMode::Unit).unwrap();
    let mut buf = Vec::new();
    write_tensor(&mut buf, &TensorDump::from(&e)).unwrap();
    let back = read_tensor(buf.as_slice()).unwrap();
    assert_eq!(back.kind, TensorKind::Echo(Side::MibsRx));
    assert_eq!(back.spacing_hz, 480e3);
    assert_eq!(back.data, e.data);
}

#[test]
fn invalid_scenes_are_rejected() {
    let mut spec = ExperimentSpec::desk();
    spec.scenario = Scenario {
        mibs_pos: Point::new(0.0, 0.0),
        ..Scenario::reference()
    };
    assert!(matches!(run_cell(&spec, None), Err(Error::Config(_))));

    let mut spec = ExperimentSpec::desk();
    spec.noise_sweep_dbm_hz.clear();
    assert!(matches!(run_sweep(&spec), Err(Error::Precondition(_))));
}
