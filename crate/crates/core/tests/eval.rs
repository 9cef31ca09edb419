use std::sync::Arc;

use credible::conformal::{
    calibrate_global, calibrate_self, CalibrationConfig, Method,
};
use credible::eval::{
    amc, conditional_coverage, mae, read_repetitions_csv, run_experiment, summarize,
    write_summary_csv, ExperimentConfig,
};
use credible::rng::stream;
use credible::scores::{ScoreFunction, ScoreSpec};
use credible::surrogate::{SurrogatePosterior, SurrogateSpec};
use credible::{CalibrationSet, ParameterTransform, Task, TaskConfig, TaskName};
use ndarray::Array2;

fn gaussian_linear(dim: usize) -> Task {
    let config = TaskConfig {
        dim,
        ..TaskConfig::default()
    };
    Task::with_config(TaskName::GaussianLinear, config).unwrap()
}

fn score_for(task: &Task, spec: &SurrogateSpec, transform: ParameterTransform) -> ScoreFunction {
    let s = SurrogatePosterior::fit(spec, task, None)
        .unwrap()
        .with_transform(transform)
        .unwrap();
    ScoreFunction::new(&ScoreSpec::default(), Arc::new(s), 0.1, 17).unwrap()
}

fn small_config() -> ExperimentConfig {
    ExperimentConfig {
        tasks: vec![TaskName::GaussianLinear, TaskName::Heteroskedastic],
        budget: 1000,
        test_size: 200,
        eval_size: 10,
        coverage_draws: 200,
        repetitions: 2,
        draws: 200,
        self_draws: 200,
        seed: 99,
        ..ExperimentConfig::default()
    }
}

#[test]
fn whole_and_empty_regions() {
    let task = gaussian_linear(2);
    let score = score_for(&task, &SurrogateSpec::oracle(), ParameterTransform::Identity);
    let x = [0.3, -0.1];
    let draws = task.oracle_posterior_sample(&x, &mut stream(1, &[]), 1000).unwrap();
    let cfg = CalibrationConfig::new(0.1, 0);

    // Five calibration pairs cannot reach rank ⌈6 · 0.9⌉ = 6.
    let few = task.generate_dataset(5, &mut stream(2, &[])).unwrap();
    let whole = calibrate_global(&score, &few, &cfg).unwrap();
    assert_eq!(whole.cutoff_at(&x).unwrap(), f64::INFINITY);
    let obs = whole.observe(&x).unwrap();
    let delta = conditional_coverage(&whole, &obs, draws.view()).unwrap();
    assert_eq!(delta, 1.0);
    assert!((mae(&[delta; 20], 0.1).unwrap() - 0.1).abs() < 1e-15);

    // One pair sitting on the mode: the cutoff is the minimum attainable score.
    let mode = task.oracle_at(&x).unwrap().mean();
    let at_mode = CalibrationSet::new(
        Array2::from_shape_vec((1, 2), mode).unwrap(),
        Array2::from_shape_vec((1, 2), x.to_vec()).unwrap(),
    )
    .unwrap();
    let cfg_half = CalibrationConfig::new(0.5, 0);
    let empty = calibrate_global(&score, &at_mode, &cfg_half).unwrap();
    let obs = empty.observe(&x).unwrap();
    assert_eq!(conditional_coverage(&empty, &obs, draws.view()).unwrap(), 0.0);

    let pairs: Vec<_> = (0..few.len())
        .map(|i| (whole.observe(few.x_row(i)).unwrap(), few.theta_row(i).to_vec()))
        .collect();
    assert_eq!(amc(&whole, &pairs).unwrap(), 1.0);
}

#[test]
fn oracle_hpd_region_has_nominal_conditional_coverage() {
    let task = gaussian_linear(10);
    let score = score_for(&task, &SurrogateSpec::oracle(), ParameterTransform::Identity);
    let mut cfg = CalibrationConfig::new(0.1, 3);
    cfg.draws.self_draws = 20_000;
    let region = calibrate_self(&score, &cfg).unwrap();
    let x = task.generate_dataset(1, &mut stream(4, &[])).unwrap();
    let x = x.x_row(0);
    let draws = task.oracle_posterior_sample(x, &mut stream(5, &[]), 1000).unwrap();
    let obs = region.observe(x).unwrap();
    let delta = conditional_coverage(&region, &obs, draws.view()).unwrap();
    // Binomial 3σ at K = 1000 is 0.028.
    assert!((delta - 0.9).abs() < 0.03, "{delta}");
}

#[test]
fn global_conformal_amc_is_nominal() {
    let task = gaussian_linear(10);
    for spec in [SurrogateSpec::variance_scaled(0.5), SurrogateSpec::oracle()] {
        let score = score_for(&task, &spec, ParameterTransform::Identity);
        let calib = task.generate_dataset(2000, &mut stream(6, &[])).unwrap();
        let region = calibrate_global(&score, &calib, &CalibrationConfig::new(0.1, 7)).unwrap();
        let test = task.generate_dataset(2000, &mut stream(8, &[])).unwrap();
        let pairs: Vec<_> = (0..test.len())
            .map(|i| (region.observe(test.x_row(i)).unwrap(), test.theta_row(i).to_vec()))
            .collect();
        let c = amc(&region, &pairs).unwrap();
        assert!((c - 0.9).abs() <= 0.02, "{c}");
    }
}

#[test]
fn overconfident_self_calibration_undercovers_on_a_slice() {
    let task = gaussian_linear(10);
    let g = ParameterTransform::select([0]);
    let score = score_for(&task, &SurrogateSpec::variance_scaled(0.5), g.clone());
    let region = calibrate_self(&score, &CalibrationConfig::new(0.1, 9)).unwrap();
    let test = task.generate_dataset(2000, &mut stream(10, &[])).unwrap();
    let pairs: Vec<_> = (0..test.len())
        .map(|i| (region.observe(test.x_row(i)).unwrap(), g.apply(test.theta_row(i))))
        .collect();
    let c = amc(&region, &pairs).unwrap();
    // 2Φ(1.6449·√0.5) − 1 = 0.7553.
    assert!((c - 0.7553).abs() <= 0.03, "{c}");
}

#[test]
fn same_seed_gives_identical_reports() {
    let cfg = small_config();
    let a = run_experiment(&cfg).unwrap();
    let b = run_experiment(&cfg).unwrap();
    let csv = |r: &credible::eval::ExperimentReport| {
        let mut s = Vec::new();
        let mut p = Vec::new();
        r.write_summary_csv(&mut s).unwrap();
        r.write_repetitions_csv(&mut p).unwrap();
        (s, p)
    };
    assert_eq!(csv(&a), csv(&b));
    assert!(a.is_complete());

    let other = run_experiment(&ExperimentConfig { seed: 100, ..cfg }).unwrap();
    assert_ne!(csv(&a).1, csv(&other).1);
}

#[test]
fn report_shape_and_round_trip() {
    let cfg = small_config();
    let report = run_experiment(&cfg).unwrap();
    assert_eq!(report.summaries.len(), 2 * Method::ALL.len());
    for s in &report.summaries {
        assert_eq!(s.mae_values.len(), cfg.repetitions);
        let i = s.amc.unwrap();
        assert!(i.lo <= i.mean && i.mean <= i.hi);
        for &v in s.mae_values.iter().chain(&s.amc_values) {
            assert!((0.0..=1.0).contains(&v));
        }
        assert!(s.mae_values.iter().all(|&v| v <= 0.9));
    }

    let mut summary = Vec::new();
    report.write_summary_csv(&mut summary).unwrap();
    let text = String::from_utf8(summary.clone()).unwrap();
    assert_eq!(text.lines().next(), Some("task,method,metric,mean,lo,hi"));
    assert_eq!(text.lines().count(), 1 + 2 * 5 * 2);

    let mut reps = Vec::new();
    report.write_repetitions_csv(&mut reps).unwrap();
    let values = read_repetitions_csv(reps.as_slice()).unwrap();
    assert_eq!(values.len(), 2 * 5 * 2 * cfg.repetitions);
    let mut rebuilt = Vec::new();
    write_summary_csv(&summarize(&values).unwrap(), &mut rebuilt).unwrap();
    assert_eq!(rebuilt, summary);

    let mut json = Vec::new();
    report.write_json(&mut json).unwrap();
    let v: serde_json::Value = serde_json::from_slice(&json).unwrap();
    assert!(v["runtime_seconds"].as_f64().unwrap() >= 0.0);
}

#[test]
fn single_repetition_is_degenerate() {
    let cfg = ExperimentConfig {
        tasks: vec![TaskName::Heteroskedastic],
        repetitions: 1,
        ..small_config()
    };
    let report = run_experiment(&cfg).unwrap();
    for s in &report.summaries {
        let i = s.mae.unwrap();
        assert!(i.degenerate());
        assert_eq!((i.lo, i.hi), (i.mean, i.mean));
    }
}

#[test]
fn failing_repetitions_are_recorded() {
    // The fitted surrogate needs more training pairs than parameters plus one.
    let cfg = ExperimentConfig {
        tasks: vec![TaskName::GaussianLinear],
        surrogate: SurrogateSpec {
            kind: credible::surrogate::SurrogateKind::ConditionalGaussianFit,
            ..SurrogateSpec::default()
        },
        budget: 12,
        train_fraction: 0.5,
        ..small_config()
    };
    let report = run_experiment(&cfg).unwrap();
    assert!(!report.is_complete());
    assert_eq!(report.failures.len(), cfg.repetitions);
    assert!(report.summaries.iter().all(|s| s.mae.is_none()));
    let mut out = Vec::new();
    report.write_summary_csv(&mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert!(text.lines().nth(1).unwrap().ends_with(",,,"));
}

#[test]
fn invalid_configs_are_rejected() {
    let base = small_config();
    for bad in [
        ExperimentConfig { train_fraction: 1.0, ..base.clone() },
        ExperimentConfig { repetitions: 0, ..base.clone() },
        ExperimentConfig { alpha: 0.0, ..base.clone() },
        ExperimentConfig { methods: vec![], ..base.clone() },
        ExperimentConfig { transform: ParameterTransform::select([5]), ..base.clone() },
    ] {
        assert!(run_experiment(&bad).is_err());
    }
}
