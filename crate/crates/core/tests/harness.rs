mod common;

use leoem::harness::trial_seed;
use leoem::{
    emit_results, read_results, run_trial, sweep_bem_order, sweep_em_iterations, sweep_snr, Error,
    Method, MethodSummary, RunOptions, SweepAxis, SweepPoint, SweepResult, SystemConfig,
};
use proptest::prelude::*;

fn opts(cfg: &SystemConfig, trials: usize) -> RunOptions {
    RunOptions {
        trials,
        ..RunOptions::from_config(cfg)
    }
}

#[test]
fn trial_scores_every_method_on_one_realization() {
    let cfg = SystemConfig::default();
    let m = run_trial(&cfg, 3).unwrap();
    let methods: Vec<_> = m.iter().map(|t| t.method).collect();
    assert_eq!(methods, vec![Method::Pb, Method::Pls, Method::Em]);
    assert!(m
        .iter()
        .all(|t| t.nmse.is_finite() && (0.0..=1.0).contains(&t.ser)));
    assert_eq!(m, run_trial(&cfg, 3).unwrap());
    assert_eq!(trial_seed(7, 3), 10);
}

#[test]
fn static_noiseless_limit_is_exact() {
    let cfg = SystemConfig {
        max_user_doppler_hz: 0.0,
        delay_spread_s: 0.0,
        snr_db: 400.0,
        ..SystemConfig::default()
    };
    for seed in 0..5 {
        for m in run_trial(&cfg, seed).unwrap() {
            assert!(m.nmse < 1e-8, "{m:?}");
            assert_eq!(m.ser, 0.0);
        }
    }
}

#[test]
fn em_ser_falls_with_snr_and_pb_beats_pls() {
    let cfg = SystemConfig::default();
    let r = sweep_snr(&cfg, &[-5.0, 0.0, 5.0, 10.0], &opts(&cfg, 500)).unwrap();
    let ser: Vec<f64> = r
        .series(Method::Em)
        .iter()
        .map(|(_, m)| m.mean_ser)
        .collect();
    assert!(ser.windows(2).all(|w| w[1] <= w[0]), "{ser:?}");
    for p in &r.points {
        let pb = p.get(Method::Pb).unwrap();
        let pls = p.get(Method::Pls).unwrap();
        assert!(
            pb.mean_nmse <= pls.mean_nmse,
            "at {} dB: {} vs {}",
            p.value,
            pb.mean_nmse,
            pls.mean_nmse
        );
    }
    let at10 = r.points.last().unwrap();
    assert!(at10.get(Method::Em).unwrap().mean_nmse < at10.get(Method::Pb).unwrap().mean_nmse);
}

#[test]
fn em_median_non_increasing_over_iterations() {
    let cfg = SystemConfig::default();
    let grid: Vec<usize> = (1..=10).collect();
    let o = opts(&cfg, 500).with_methods(&[Method::Em]);
    for (snr, r) in sweep_em_iterations(&cfg, &grid, &[0.0, 10.0], &o).unwrap() {
        let med: Vec<f64> = r
            .series(Method::Em)
            .iter()
            .map(|(_, m)| m.median_nmse)
            .collect();
        assert!(med.windows(2).all(|w| w[1] <= w[0]), "{snr} dB: {med:?}");
        assert!(med[9] < med[0]);
    }
}

#[test]
fn single_iteration_grid_equals_one_iteration_em() {
    let cfg = SystemConfig {
        n_em: 1,
        ..SystemConfig::default()
    };
    let o = opts(&cfg, 6);
    let iters = sweep_em_iterations(&cfg, &[1], &[cfg.snr_db], &o).unwrap();
    let snr = sweep_snr(&cfg, &[cfg.snr_db], &o).unwrap();
    assert_eq!(iters[0].1.points[0].methods, snr.points[0].methods);
}

#[test]
fn complete_basis_sweep_matches_unprojected_order() {
    let cfg = SystemConfig {
        n_data: 12,
        ..SystemConfig::default()
    };
    let o = opts(&cfg, 4).with_methods(&[Method::Em]);
    let r = sweep_bem_order(&cfg, &[12], &o).unwrap();
    assert_eq!(r.points.len(), 1);
    assert_eq!(r.axis, SweepAxis::BemOrder);
    assert!(matches!(
        sweep_bem_order(&cfg, &[13], &o),
        Err(Error::Size(_))
    ));
    assert!(matches!(sweep_snr(&cfg, &[], &o), Err(Error::Config(_))));
}

#[test]
fn sweep_independent_of_worker_count() {
    let cfg = SystemConfig::default();
    let run = |w| {
        let o = RunOptions {
            workers: Some(w),
            ..opts(&cfg, 9)
        };
        sweep_snr(&cfg, &[0.0, 10.0], &o).unwrap()
    };
    assert_eq!(run(1), run(3));
}

#[test]
fn emitted_files_are_stable_and_parse_back() {
    let cfg = SystemConfig::default();
    let r = sweep_snr(&cfg, &[0.0, 5.0], &opts(&cfg, 5)).unwrap();
    let dir = std::env::temp_dir().join(format!("leoem-emit-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let (csv1, dat1) = emit_results(&r, dir.join("a.csv")).unwrap();
    let (csv2, dat2) = emit_results(&r, dir.join("b.csv")).unwrap();
    assert_eq!(std::fs::read(&csv1).unwrap(), std::fs::read(&csv2).unwrap());
    assert_eq!(std::fs::read(&dat1).unwrap(), std::fs::read(&dat2).unwrap());
    assert_eq!(read_results(&csv1, SweepAxis::Snr).unwrap(), r);
    let missing = dir.join("no/such/dir/x.csv");
    assert!(matches!(emit_results(&r, missing), Err(Error::Io(_))));
    std::fs::remove_dir_all(&dir).unwrap();
}

fn summary() -> impl Strategy<Value = MethodSummary> {
    (
        prop::sample::select(Method::ALL.to_vec()),
        prop::array::uniform6(0.0..1e3f64),
        1usize..10_000,
    )
        .prop_map(|(method, v, trials)| MethodSummary {
            method,
            mean_nmse: v[0],
            mean_ser: v[1],
            median_nmse: v[2],
            median_ser: v[3],
            ci_nmse: v[4],
            ci_ser: v[5],
            trials,
        })
}

proptest! {
    #[test]
    fn csv_round_trip(
        points in prop::collection::vec((-50.0..50.0f64, prop::collection::vec(summary(), 1..4)), 0..6),
        seed in any::<u64>(),
    ) {
        let r = SweepResult {
            axis: SweepAxis::Snr,
            seed,
            points: points.into_iter().map(|(value, methods)| SweepPoint { value, methods }).collect(),
        };
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let back = SweepResult::read_csv(buf.as_slice(), SweepAxis::Snr).unwrap();
        if r.points.is_empty() {
            prop_assert!(back.points.is_empty());
        } else {
            prop_assert_eq!(back, r);
        }
    }
}
