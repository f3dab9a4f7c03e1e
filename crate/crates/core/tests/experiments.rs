use std::collections::BTreeSet;
use std::sync::atomic::{AtomicUsize, Ordering};

use fcodt::datasets::{train_test_split, Manifest};
use fcodt::evaluation::{
    aggregate_benchmark, grid_search_lambda, read_records_csv, run_benchmark, run_depth_sweep, run_sample_sweep,
    write_aggregate_csv, write_records_csv, CellKey, CellOutput, ExperimentConfig, ExperimentKind, Method,
    ReferenceScore, ResultRecord, RunControl,
};
use fcodt::SplitCriteria;
use proptest::prelude::*;

fn quick() -> ExperimentConfig {
    ExperimentConfig {
        repeats: 2,
        train_size: 200,
        test_size: 80,
        sample_sizes: vec![40, 80, 160],
        sim_size: 200,
        lambda_grid: vec![0.1, 10.0],
        folds: 3,
        ..ExperimentConfig::default()
    }
}

fn csv_bytes(records: &[ResultRecord]) -> Vec<u8> {
    let mut buf = Vec::new();
    write_records_csv(records, &mut buf).unwrap();
    buf
}

#[test]
fn depth_sweep_has_one_record_per_cell() {
    let config = quick();
    let res = run_depth_sweep(&config, RunControl::default()).unwrap();
    // methods × datasets × depths × repeats
    assert_eq!(res.records.len(), 2 * 2 * 5 * config.repeats);
    assert_eq!(res.timings.len(), res.records.len());
    assert!(res.records.iter().all(|r| r.metric == "mse" && r.param_name == "depth" && r.lambda.is_some()));
    let depths: BTreeSet<u64> = res.records.iter().map(|r| r.param_value).collect();
    assert_eq!(depths, [2, 3, 4, 5, 6].into_iter().collect());
}

#[test]
fn sample_sweep_has_one_record_per_cell() {
    let config = ExperimentConfig {
        sample_sizes: vec![50, 100, 200, 500, 1000, 2000],
        fixed_lambda: Some(1.0),
        ..quick()
    };
    let res = run_sample_sweep(&config, RunControl::default()).unwrap();
    assert_eq!(res.records.len(), 2 * 2 * 6 * config.repeats);
    assert!(res.records.iter().all(|r| r.param_name == "n" && r.lambda == Some(1.0)));
}

#[test]
fn record_seeds_are_cell_seeds() {
    let config = quick();
    let res = run_depth_sweep(&config, RunControl::default()).unwrap();
    for r in &res.records {
        let key = CellKey {
            experiment: ExperimentKind::Depth,
            dataset: r.dataset.clone(),
            param: r.param_value,
            method: r.method.parse().unwrap(),
            repeat: r.repeat,
        };
        assert_eq!(r.seed, key.seed(config.seed_base));
    }
}

#[test]
fn results_are_independent_of_worker_count() {
    let one = ExperimentConfig { workers: 1, ..quick() };
    let many = ExperimentConfig { workers: 4, ..quick() };
    for run in [run_depth_sweep, run_sample_sweep] {
        let a = run(&one, RunControl::default()).unwrap();
        let b = run(&many, RunControl::default()).unwrap();
        assert_eq!(csv_bytes(&a.records), csv_bytes(&b.records));
    }
    let a = run_benchmark(&one, None, RunControl::default()).unwrap();
    let b = run_benchmark(&many, None, RunControl::default()).unwrap();
    assert_eq!(csv_bytes(&a.records), csv_bytes(&b.records));
}

#[test]
fn different_seed_bases_give_different_results() {
    let a = run_depth_sweep(&quick(), RunControl::default()).unwrap();
    let b = run_depth_sweep(&ExperimentConfig { seed_base: 1, ..quick() }, RunControl::default()).unwrap();
    assert_ne!(csv_bytes(&a.records), csv_bytes(&b.records));
}

#[test]
fn resume_reuses_completed_cells() {
    let config = quick();
    let full = run_depth_sweep(&config, RunControl::default()).unwrap();
    // Keep every third cell, as if the run had been interrupted.
    let completed: Vec<ResultRecord> = full.records.iter().step_by(3).cloned().collect();
    let kept = completed.len();
    let fresh = AtomicUsize::new(0);
    let hook = |_: &CellOutput| {
        fresh.fetch_add(1, Ordering::Relaxed);
    };
    let resumed = run_depth_sweep(
        &config,
        RunControl {
            completed,
            on_cell: Some(&hook),
        },
    )
    .unwrap();
    assert_eq!(resumed.reused_cells, kept);
    assert_eq!(fresh.load(Ordering::Relaxed), full.records.len() - kept);
    assert_eq!(resumed.timings.len(), full.records.len() - kept);
    assert_eq!(csv_bytes(&resumed.records), csv_bytes(&full.records));
}

#[test]
fn resume_ignores_records_of_other_experiments() {
    let config = quick();
    let full = run_depth_sweep(&config, RunControl::default()).unwrap();
    let foreign: Vec<ResultRecord> = full
        .records
        .iter()
        .map(|r| ResultRecord {
            repeat: r.repeat + 100,
            ..r.clone()
        })
        .collect();
    let res = run_depth_sweep(
        &config,
        RunControl {
            completed: foreign,
            on_cell: None,
        },
    )
    .unwrap();
    assert_eq!(res.reused_cells, 0);
    assert_eq!(res.records, full.records);
}

#[test]
fn records_survive_csv_round_trip() {
    let res = run_benchmark(&quick(), None, RunControl::default()).unwrap();
    let bytes = csv_bytes(&res.records);
    assert_eq!(read_records_csv(bytes.as_slice()).unwrap(), res.records);
}

#[test]
fn sweeps_reject_cart() {
    let config = ExperimentConfig {
        methods: Some(vec![Method::FcOdt, Method::Cart]),
        ..quick()
    };
    assert!(run_depth_sweep(&config, RunControl::default()).is_err());
    assert!(run_sample_sweep(&config, RunControl::default()).is_err());
}

#[test]
fn benchmark_without_manifest_runs_simulations_and_skips_the_rest() {
    let res = run_benchmark(&quick(), None, RunControl::default()).unwrap();
    let datasets: BTreeSet<&str> = res.records.iter().map(|r| r.dataset.as_str()).collect();
    assert_eq!(datasets, ["sim1", "sim2"].into_iter().collect());
    assert_eq!(res.skipped.len(), 8);
    // 3 methods × 2 datasets × repeats, two metrics each.
    assert_eq!(res.records.len(), 3 * 2 * 2 * 2);
    for r in res.records.iter().filter(|r| r.method == "cart") {
        assert_eq!(r.lambda, None);
    }
    let r2: Vec<f64> = res.records.iter().filter(|r| r.metric == "r2").map(|r| r.value).collect();
    assert!(r2.iter().all(|v| *v < 1.0 && *v > 0.0));
}

#[test]
fn benchmark_loads_manifest_datasets_with_scaling() {
    let dir = std::env::temp_dir().join(format!("fcodt-bench-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let mut csv = String::from("a,b,y\n");
    for i in 0..90 {
        let (a, b) = (i as f64 * 10.0, ((i * 7) % 13) as f64);
        csv.push_str(&format!("{a},{b},{}\n", 0.01 * a - b));
    }
    std::fs::write(dir.join("toy.csv"), csv).unwrap();
    let manifest = Manifest::from_toml(
        "[datasets.toy]\npath = \"toy.csv\"\nformat = \"csv\"\ntarget = \"y\"\n",
        &dir,
    )
    .unwrap();
    for scale in [false, true] {
        let config = ExperimentConfig {
            datasets: Some(vec!["toy".into()]),
            min_max_scale: scale,
            fixed_lambda: Some(1e-6),
            criteria: SplitCriteria::with_depth(2),
            ..quick()
        };
        let res = run_benchmark(&config, Some(&manifest), RunControl::default()).unwrap();
        assert!(res.skipped.is_empty());
        // The residual path carries the root's exact linear fit to every leaf.
        for r in res.records.iter().filter(|r| r.metric == "r2" && r.method == "fc_odt") {
            assert!(r.value > 0.999, "{r:?}");
        }
    }
    std::fs::remove_dir_all(dir).unwrap();
}

fn record(dataset: &str, method: &str, repeat: usize, value: f64) -> ResultRecord {
    ResultRecord {
        experiment: "benchmark".into(),
        dataset: dataset.into(),
        method: method.into(),
        repeat,
        param_name: "depth".into(),
        param_value: 4,
        metric: "r2".into(),
        value,
        ..Default::default()
    }
}

#[test]
fn aggregate_marks_significant_differences_and_ranks() {
    let mut records = Vec::new();
    for i in 0..10 {
        let jitter = i as f64 * 2e-3;
        records.push(record("a", "fc_odt", i, 0.80 + jitter));
        records.push(record("a", "ridge_odt", i, 0.90 + jitter));
        records.push(record("a", "cart", i, 0.50 + jitter));
        records.push(record("b", "fc_odt", i, 0.70 + jitter));
        records.push(record("b", "ridge_odt", i, 0.70 + jitter));
        records.push(record("b", "cart", i, 0.60 + jitter));
    }
    let reference = vec![
        ReferenceScore { dataset: "a".into(), method: "tao".into(), mean: 0.85, std: 0.01 },
        ReferenceScore { dataset: "z".into(), method: "gone".into(), mean: 0.1, std: 0.0 },
    ];
    let s = aggregate_benchmark(&records, &reference, 0.1);
    assert_eq!(s.methods, ["fc_odt", "ridge_odt", "cart", "tao"]);
    let a = &s.rows[0];
    assert_eq!(a.cells[0].as_ref().unwrap().marker, None);
    assert_eq!(a.cells[1].as_ref().unwrap().marker, Some('◦'));
    assert_eq!(a.cells[2].as_ref().unwrap().marker, Some('•'));
    assert_eq!(a.cells[3].as_ref().unwrap().count, 0);
    let b = &s.rows[1];
    assert_eq!(b.cells[1].as_ref().unwrap().marker, None);
    assert_eq!(b.cells[1].as_ref().unwrap().p_value, Some(1.0));
    assert!(b.cells[3].is_none());

    // a: ridge 1, tao 2, fc 3, cart 4. b: fc and ridge tie for 1-2, cart 3.
    let ranks: Vec<f64> = s.average_ranks.iter().map(|r| r.unwrap()).collect();
    assert_eq!(ranks, [(3.0 + 1.5) / 2.0, (1.0 + 1.5) / 2.0, (4.0 + 3.0) / 2.0, 2.0]);
    let cell = a.cells[0].as_ref().unwrap();
    assert!((cell.mean - 0.809).abs() < 1e-12);
    let std = (0..10).map(|i| (i as f64 * 2e-3 - 0.009).powi(2)).sum::<f64>() / 9.0;
    assert!((cell.std - std.sqrt()).abs() < 1e-12);

    let mut out = Vec::new();
    write_aggregate_csv(&s, &mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "dataset,fc_odt,ridge_odt,cart,tao");
    assert_eq!(lines[1], "a,0.809±0.006,0.909±0.006◦,0.509±0.006•,0.850±0.010");
    assert_eq!(lines[2], "b,0.709±0.006,0.709±0.006,0.609±0.006•,");
    assert_eq!(lines[3], "average rank,2.25,1.25,3.50,2.00");
}

#[test]
fn grid_search_breaks_ties_toward_small_lambda() {
    // CART ignores λ, so every grid value scores the same.
    let data = fcodt::datasets::gen_sim1(120, 0.1, 3);
    let g = grid_search_lambda(&data, Method::Cart, &SplitCriteria::with_depth(2), &[5.0, 0.5, 50.0], 3, 1).unwrap();
    assert_eq!(g.best_lambda, 0.5);
    assert_eq!(g.table.len(), 3);
    assert!(g.table.iter().all(|r| r.mean_mse == g.table[0].mean_mse && r.fold_mse.len() == 3));
}

proptest! {
    #[test]
    fn splits_partition_the_rows(n in 2usize..400, frac in 0.05f64..0.95, seed in any::<u64>()) {
        let s = train_test_split(n, frac, seed).unwrap();
        prop_assert!(s.is_partition_of(n));
        let train: BTreeSet<usize> = s.train_indices.iter().copied().collect();
        prop_assert!(s.test_indices.iter().all(|i| !train.contains(i)));
        prop_assert!(!s.train_indices.is_empty() && !s.test_indices.is_empty());
    }
}
