//! End-to-end pipeline behaviour on small synthetic cohorts.

use std::collections::HashMap;
use std::sync::OnceLock;

use radstack::features::ExtractionConfig;
use radstack::pipeline::{
    evaluate_predictions, extract_synthetic, load_predictions, persist, run_experiments, synthesize, CohortSpec,
    CohortTables, PipelineConfig, RaterNoise, SealedLabels, WITHOUT_FILTERING, WITH_FILTERING,
};

fn small_spec() -> CohortSpec {
    CohortSpec {
        n_discovery: 16,
        n_test: 8,
        grid: 24,
        n_raters: 3,
        ..CohortSpec::default()
    }
}

fn small_config(seed: u64) -> PipelineConfig {
    PipelineConfig {
        master_seed: seed,
        n_features: 5,
        n_forests: 5,
        uauc_iters: 5,
        ..PipelineConfig::default()
    }
}

fn tables() -> &'static CohortTables {
    static TABLES: OnceLock<CohortTables> = OnceLock::new();
    TABLES.get_or_init(|| {
        let cohort = synthesize(&small_spec(), 3).unwrap();
        extract_synthetic(&cohort, &ExtractionConfig::default()).unwrap()
    })
}

#[test]
fn identical_raters_have_perfect_agreement() {
    let spec = CohortSpec {
        n_test: 6,
        rater_noise: RaterNoise::none(),
        ..small_spec()
    };
    let cohort = synthesize(&spec, 5).unwrap();
    let tables = extract_synthetic(&cohort, &ExtractionConfig::default()).unwrap();
    let out = run_experiments(&tables.inputs().unwrap(), &small_config(5)).unwrap();
    let stability = out.stability.unwrap();
    let finite: Vec<_> = stability.entries.iter().filter(|e| e.occc.is_finite()).collect();
    assert!(!finite.is_empty());
    for e in &finite {
        assert!((e.occc - 1.0).abs() < 1e-12, "{} has OCCC {}", e.descriptor, e.occc);
    }
    assert_eq!(stability.retained.len(), finite.len());
}

#[test]
fn same_seed_gives_identical_reports() {
    let inputs = tables().inputs().unwrap();
    let a = run_experiments(&inputs, &small_config(9)).unwrap().report.to_json();
    let b = run_experiments(&inputs, &small_config(9)).unwrap().report.to_json();
    assert_eq!(a, b);
}

#[test]
fn test_labels_do_not_influence_training() {
    let t = tables();
    let cfg = small_config(2);
    let base = run_experiments(&t.inputs().unwrap(), &cfg).unwrap();
    let mut flipped = t.inputs().unwrap();
    let inverted: Vec<usize> = t.test_labels.iter().map(|&c| 1 - c).collect();
    flipped.test_labels = SealedLabels::from_values(t.task, &t.test_ids, &inverted);
    let other = run_experiments(&flipped, &cfg).unwrap();
    // NaN agreement values rule out a direct equality check.
    let json = |s: &Option<radstack::stability::StabilityReport>| serde_json::to_string(s).unwrap();
    assert_eq!(json(&base.stability), json(&other.stability));
    for (x, y) in base.experiments.iter().zip(&other.experiments) {
        assert_eq!(x.selection, y.selection);
        assert_eq!(x.predictions, y.predictions);
    }
    // Only the scores move: inverting binary labels mirrors every AUC.
    for (x, y) in base.report.experiments.iter().zip(&other.report.experiments) {
        for (a, b) in x.evaluation.schemes.iter().zip(&y.evaluation.schemes) {
            assert!((a.auc + b.auc - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn saved_predictions_reproduce_the_report() {
    let t = tables();
    let out = run_experiments(&t.inputs().unwrap(), &small_config(4)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    persist(&out, dir.path()).unwrap();
    let labels: HashMap<String, usize> = t.test_ids.iter().cloned().zip(t.test_labels.iter().copied()).collect();
    for name in [WITHOUT_FILTERING, WITH_FILTERING] {
        let preds = load_predictions(&dir.path().join(name).join("predictions.json")).unwrap();
        let eval = evaluate_predictions(&preds, &labels, 2).unwrap();
        assert_eq!(&eval, &out.report.experiment(name).unwrap().evaluation);
    }
    let report = std::fs::read_to_string(dir.path().join("report.json")).unwrap();
    assert_eq!(report, out.report.to_json());
}

#[test]
fn every_scheme_is_scored() {
    let t = tables();
    let out = run_experiments(&t.inputs().unwrap(), &small_config(1)).unwrap();
    let e1 = out.report.experiment(WITHOUT_FILTERING).unwrap();
    let e2 = out.report.experiment(WITH_FILTERING).unwrap();
    let names: Vec<&str> = e1.evaluation.schemes.iter().map(|s| s.scheme.as_str()).collect();
    assert_eq!(names, ["rater1", "rater2", "rater3", "staple"]);
    assert_eq!(e1.selected.len(), 5);
    assert_eq!(e2.selected.len(), 5);
    assert!(e2.n_pool < e1.n_pool);
    assert_eq!(out.report.comparisons.len(), names.len());
}
