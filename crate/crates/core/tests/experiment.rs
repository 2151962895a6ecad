use procrec_core::markov::{build_conditional_tables, SplitView};
use procrec_core::predictor::{prepare_experiment, run_experiment, MetricKind, StatsScope};
use procrec_core::{ExperimentConfig, ReturnSeries, SchemeKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Heavy-tailed returns with a little autocorrelation.
fn synthetic_returns(n: usize, seed: u64) -> ReturnSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut prev = 0.0;
    let values = (0..n)
        .map(|_| {
            let u: f64 = rng.gen_range(-1.0..1.0);
            let shock = u * u * u * 0.02;
            prev = 0.2 * prev + shock;
            prev
        })
        .collect();
    ReturnSeries::from_values("SYN", values).unwrap()
}

#[test]
fn full_scale_report_shape() {
    let returns = synthetic_returns(6306, 1);
    let config = ExperimentConfig::default();
    let report = run_experiment(&config, &returns).unwrap();
    assert_eq!(report.runs, 50);
    assert_eq!(report.split_index, 3153);
    assert_eq!(report.orders.len(), 8);
    for (o, k) in report.orders.iter().zip(1..) {
        assert_eq!(o.k, k);
        assert_eq!(o.n_predictions, 3153);
        assert_eq!(o.e_k_runs.len(), 50);
        assert_eq!(o.e_rand_k_runs.len(), 50);
        assert_eq!(o.fallback_histogram.len(), k + 1);
        assert_eq!(o.fallback_histogram.iter().sum::<u64>(), 50 * 3153);
        assert!(o.e_k_mean < o.e_rand_k_mean, "k={k}");
        for e in o.e_k_runs.iter().chain(&o.e_rand_k_runs) {
            assert!((0.0..=4.0).contains(e));
        }
    }
}

#[test]
fn report_is_deterministic() {
    let returns = synthetic_returns(2000, 2);
    let config = ExperimentConfig { runs: 3, k_max: 5, seed: 42, ..Default::default() };
    let a = run_experiment(&config, &returns).unwrap().to_json_pretty().unwrap();
    let b = run_experiment(&config, &returns).unwrap().to_json_pretty().unwrap();
    assert_eq!(a, b);
    let other = ExperimentConfig { seed: 43, ..config };
    assert_ne!(a, run_experiment(&other, &returns).unwrap().to_json_pretty().unwrap());
}

#[test]
fn per_order_results_do_not_depend_on_k_range() {
    // sub-streams are keyed by (run, k), so restricting the k range must not
    // change the surviving orders
    let returns = synthetic_returns(3000, 3);
    let wide = ExperimentConfig { runs: 4, k_min: 1, k_max: 6, ..Default::default() };
    let narrow = ExperimentConfig { k_min: 3, k_max: 6, ..wide };
    let a = run_experiment(&wide, &returns).unwrap();
    let b = run_experiment(&narrow, &returns).unwrap();
    for o in &b.orders {
        assert_eq!(Some(o), a.order(o.k));
    }
}

#[test]
fn means_recompute_from_runs() {
    let returns = synthetic_returns(3000, 4);
    let config = ExperimentConfig { runs: 7, k_max: 4, ..Default::default() };
    let report = run_experiment(&config, &returns).unwrap();
    for o in &report.orders {
        for (mean, runs) in [(o.e_k_mean, &o.e_k_runs), (o.e_rand_k_mean, &o.e_rand_k_runs)] {
            let recomputed = runs.iter().sum::<f64>() / runs.len() as f64;
            assert!((recomputed - mean).abs() <= 1e-12);
            let lo = runs.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = runs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            assert!(lo - 1e-12 <= mean && mean <= hi + 1e-12);
        }
    }
}

#[test]
fn training_tables_ignore_the_test_half() {
    let returns = synthetic_returns(4000, 5);
    let config = ExperimentConfig { stats_scope: StatsScope::Train, k_max: 6, ..Default::default() };
    let base = prepare_experiment(&config, &returns).unwrap();

    let mut values = returns.values().to_vec();
    for v in &mut values[2000..] {
        *v = -*v * 3.0;
    }
    let scrambled = ReturnSeries::from_values("SYN", values).unwrap();
    let other = prepare_experiment(&config, &scrambled).unwrap();
    assert_eq!(base.tables.to_dump(), other.tables.to_dump());
    assert_ne!(base.sequence.symbols[2000..], other.sequence.symbols[2000..]);

    // the experiment's tables equal tables built from the first half alone
    let h1 = &base.sequence.symbols[..base.split];
    let direct = build_conditional_tables(h1, 6, &base.scheme).unwrap();
    assert_eq!(direct.to_dump(), base.tables.to_dump());
    let view = build_conditional_tables(&SplitView::new(&base.sequence.symbols, base.split), 6, &base.scheme).unwrap();
    assert_eq!(view.to_dump(), direct.to_dump());
}

#[test]
fn signed_metric_is_centered_for_symmetric_errors() {
    let returns = synthetic_returns(6000, 6);
    let config = ExperimentConfig { runs: 10, k_max: 3, metric: MetricKind::Signed, ..Default::default() };
    let report = run_experiment(&config, &returns).unwrap();
    let abs = run_experiment(&ExperimentConfig { metric: MetricKind::Absolute, ..config }, &returns).unwrap();
    for (s, a) in report.orders.iter().zip(&abs.orders) {
        assert!(s.e_k_mean.abs() < a.e_k_mean);
        assert!(s.e_k_mean.abs() < 0.1, "{}", s.e_k_mean);
    }
}

#[test]
fn three_symbol_scheme_runs() {
    let returns = synthetic_returns(3000, 7);
    let config = ExperimentConfig { scheme: SchemeKind::Three, runs: 5, ..Default::default() };
    let report = run_experiment(&config, &returns).unwrap();
    assert_eq!(report.scheme, "three");
    assert_eq!(report.cut_points.len(), 2);
    for o in &report.orders {
        assert!(o.e_k_mean <= 2.0 && o.e_rand_k_mean <= 2.0);
    }
}

#[test]
fn degenerate_and_short_inputs() {
    let flat = ReturnSeries::from_values("FLAT", vec![0.0; 100]).unwrap();
    assert!(matches!(
        run_experiment(&ExperimentConfig::default(), &flat),
        Err(procrec_core::Error::DegenerateStd)
    ));
    let short = synthetic_returns(3, 8);
    assert!(run_experiment(&ExperimentConfig::default(), &short).is_err());
    // training half too short for k_max = 8
    let small = synthetic_returns(16, 9);
    assert!(matches!(
        run_experiment(&ExperimentConfig::default(), &small),
        Err(procrec_core::Error::SequenceTooShort { .. })
    ));
}
