use enpi::baselines::{run_icp, run_weighted_icp, run_weighted_icp_with, SplitState, WeightScheme};
use enpi::datagen::{generate, SimConfig};
use enpi::eval::{coverage_rate, run_trials, DataSource, ExperimentReport};
use enpi::{EnsembleConfig, Method, RegressorSpec};

fn iid(seed: u64) -> enpi::Dataset {
    generate(&SimConfig {
        p: 8,
        rho: 0.0,
        train_len: 200,
        test_len: 200,
        seed,
        ..SimConfig::multi()
    })
    .unwrap()
}

#[test]
fn no_shift_weighted_matches_icp_widths() {
    let mut ratios = Vec::new();
    for seed in 0..5 {
        let data = iid(seed);
        let spec = RegressorSpec::ridge();
        let icp = run_icp(&data, &spec, 0.1, seed).unwrap();
        let wicp = run_weighted_icp(&data, &spec, 0.1, seed).unwrap();
        assert_eq!(wicp.fallback_steps, 0);
        let mean = |r: &enpi::baselines::BaselineRun| {
            r.intervals.iter().map(|i| i.half_width).sum::<f64>() / r.intervals.len() as f64
        };
        ratios.push(mean(&wicp) / mean(&icp));
    }
    let avg = ratios.iter().sum::<f64>() / ratios.len() as f64;
    assert!((avg - 1.0).abs() <= 0.10, "{ratios:?}");
}

#[test]
fn calibration_window_keeps_its_length() {
    let data = iid(7);
    let split = SplitState::fit(&data, &RegressorSpec::ridge(), 0.5, 7).unwrap();
    assert_eq!(split.calibration_window.capacity(), 100);
    assert_eq!(split.proper_indices.len(), 100);
    let run = run_weighted_icp_with(&data, &RegressorSpec::ridge(), 0.1, 7, WeightScheme::Uniform).unwrap();
    assert_eq!(run.records.len(), 200);
}

#[test]
fn icp_covers_iid_data() {
    let data = iid(9);
    let run = run_icp(&data, &RegressorSpec::ridge(), 0.1, 9).unwrap();
    let c = coverage_rate(&run.records).unwrap();
    assert!((0.82..=0.98).contains(&c), "{c}");
}

#[test]
fn weighted_icp_on_random_walk_is_reported() {
    // no coverage promise here; the run must complete and produce finite centers
    let trials = run_trials(
        Method::Wicp,
        &DataSource::Simulated(SimConfig::rand()),
        &RegressorSpec::ridge(),
        &EnsembleConfig::default(),
        WeightScheme::default(),
        0.1,
        3,
        4,
    )
    .unwrap();
    let report = ExperimentReport::from_trials("wicp", "ridge", "rand", 0.1, &trials).unwrap();
    println!("wicp on rand: coverage {:.4}, width {:.4}", report.coverage_mean, report.width_mean);
    assert!(trials.iter().flatten().all(|r| r.center.is_finite()));
}
