//! Experiment orchestration: stability filter, cleaning, selection, ensemble
//! training, per-scheme prediction and evaluation, with a stage clock that
//! keeps test labels sealed until the evaluate stage.

use std::cell::Cell;
use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{PipelineConfig, SmoteMode};
use crate::descriptor::FeatureDescriptor;
use crate::error::{Error, Result};
use crate::evaluation::{delong_test, rsd, task_auc};
use crate::manifest::{load_manifest, CohortManifest, Task};
use crate::matrix::FeatureMatrix;
use crate::modeling::{save_model, smote, train_ensemble, ForestEnsembleModel};
use crate::seed;
use crate::selection::{select, uauc, SelectionResult};
use crate::stability::{stability_filter, stability_filter_on, RaterStack, StabilityReport};
use crate::stats::{mean, sample_std};
use crate::tableprep::{apply_clean, fit_clean, mad_filter, ColumnStats};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Load,
    Stability,
    Prep,
    Select,
    Train,
    Predict,
    Evaluate,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Load => "load",
            Stage::Stability => "stability",
            Stage::Prep => "prep",
            Stage::Select => "select",
            Stage::Train => "train",
            Stage::Predict => "predict",
            Stage::Evaluate => "evaluate",
        }
    }
}

/// Current pipeline stage. Once `Evaluate` is entered the clock cannot go back.
#[derive(Debug)]
pub struct StageClock {
    stage: Cell<Stage>,
}

impl Default for StageClock {
    fn default() -> Self {
        StageClock {
            stage: Cell::new(Stage::Load),
        }
    }
}

impl StageClock {
    pub fn enter(&self, stage: Stage) -> Result<()> {
        if self.stage.get() == Stage::Evaluate && stage != Stage::Evaluate {
            return Err(Error::Leakage(format!(
                "stage {} entered after evaluation started",
                stage.name()
            )));
        }
        self.stage.set(stage);
        Ok(())
    }

    pub fn stage(&self) -> Stage {
        self.stage.get()
    }
}

#[derive(Debug, Clone)]
enum LabelSource {
    Manifest(PathBuf),
    Values(Vec<(String, usize)>),
}

/// Test outcome labels that can only be read in the evaluate stage.
#[derive(Debug, Clone)]
pub struct SealedLabels {
    task: Task,
    source: LabelSource,
}

impl SealedLabels {
    pub fn from_manifest(path: &Path, task: Task) -> SealedLabels {
        SealedLabels {
            task,
            source: LabelSource::Manifest(path.to_path_buf()),
        }
    }

    pub fn from_values(task: Task, ids: &[String], labels: &[usize]) -> SealedLabels {
        SealedLabels {
            task,
            source: LabelSource::Values(ids.iter().cloned().zip(labels.iter().copied()).collect()),
        }
    }

    /// Subject-to-class map; fails with a leakage error outside the evaluate stage.
    pub fn open(&self, clock: &StageClock) -> Result<HashMap<String, usize>> {
        if clock.stage() != Stage::Evaluate {
            return Err(Error::Leakage(format!(
                "test labels requested during the {} stage",
                clock.stage().name()
            )));
        }
        match &self.source {
            LabelSource::Values(v) => Ok(v.iter().cloned().collect()),
            LabelSource::Manifest(path) => {
                let m = load_manifest(path)?;
                manifest_labels(&m, self.task)
            }
        }
    }
}

/// Subject-to-class map from manifest labels; every subject must be labelled for `task`.
pub fn manifest_labels(m: &CohortManifest, task: Task) -> Result<HashMap<String, usize>> {
    m.subjects
        .iter()
        .map(|s| match s.label {
            Some(l) if l.task == task => Ok((s.id.clone(), l.value as usize)),
            Some(l) => Err(Error::InvalidLabel(format!(
                "subject {} is labelled for {:?}, expected {:?}",
                s.id, l.task, task
            ))),
            None => Err(Error::InvalidLabel(format!("subject {} has no label", s.id))),
        })
        .collect()
}

fn labels_for(ids: &[String], map: &HashMap<String, usize>) -> Result<Vec<usize>> {
    ids.iter()
        .map(|id| {
            map.get(id)
                .copied()
                .ok_or_else(|| Error::InvalidLabel(format!("no label for subject {id}")))
        })
        .collect()
}

/// Everything a run consumes, already loaded.
#[derive(Debug, Clone)]
pub struct PipelineInputs {
    pub discovery: FeatureMatrix,
    pub discovery_labels: Vec<usize>,
    /// One test table per segmentation scheme.
    pub schemes: Vec<(String, FeatureMatrix)>,
    /// Rater tables for stability filtering.
    pub raters: Option<RaterStack>,
    pub test_labels: SealedLabels,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemePredictions {
    pub scheme: String,
    pub subject_ids: Vec<String>,
    pub probs: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeScore {
    pub scheme: String,
    pub auc: f64,
    pub per_class: Vec<f64>,
    pub n_subjects: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub schemes: Vec<SchemeScore>,
    pub auc_mean: f64,
    pub auc_std: f64,
    pub rsd_percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedFeature {
    pub descriptor: FeatureDescriptor,
    pub relevance: f64,
    pub uauc_mean: f64,
    pub uauc_std: f64,
    pub occc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub stability_filtering: bool,
    pub n_pool: usize,
    pub n_after_mad: usize,
    pub smote_applied: bool,
    pub selected: Vec<SelectedFeature>,
    pub evaluation: Evaluation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelongComparison {
    pub scheme: String,
    pub auc_with_filtering: f64,
    pub auc_without_filtering: f64,
    pub z: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilitySummary {
    pub tau: f64,
    pub raters: Vec<String>,
    pub n_candidates: usize,
    pub n_retained: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub config_hash: String,
    pub master_seed: u64,
    pub task: Task,
    pub selector: String,
    pub n_discovery: usize,
    pub n_test: usize,
    pub schemes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub provenance: Provenance,
    pub stability: Option<StabilitySummary>,
    pub experiments: Vec<ExperimentReport>,
    /// DeLong tests of the filtered against the unfiltered model per scheme (binary tasks).
    pub comparisons: Vec<DelongComparison>,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn experiment(&self, name: &str) -> Option<&ExperimentReport> {
        self.experiments.iter().find(|e| e.name == name)
    }
}

pub const WITHOUT_FILTERING: &str = "without-stability-filtering";
pub const WITH_FILTERING: &str = "with-stability-filtering";

/// Per-scheme AUC, mean, sample std and RSD across schemes.
pub fn evaluate_predictions(
    preds: &[SchemePredictions],
    labels: &HashMap<String, usize>,
    n_classes: usize,
) -> Result<Evaluation> {
    let mut schemes = Vec::with_capacity(preds.len());
    for p in preds {
        let y = labels_for(&p.subject_ids, labels)?;
        let roc = task_auc(&p.probs, &y, n_classes)?;
        schemes.push(SchemeScore {
            scheme: p.scheme.clone(),
            auc: roc.auc,
            per_class: roc.per_class,
            n_subjects: y.len(),
        });
    }
    let aucs: Vec<f64> = schemes.iter().map(|s| s.auc).collect();
    Ok(Evaluation {
        auc_mean: mean(&aucs),
        auc_std: if aucs.len() > 1 { sample_std(&aucs) } else { 0.0 },
        rsd_percent: rsd(&aucs).unwrap_or(f64::NAN),
        schemes,
    })
}

/// Model and intermediates of one experiment, before evaluation.
#[derive(Debug, Clone)]
pub struct FittedExperiment {
    pub name: String,
    pub stability_filtering: bool,
    pub n_pool: usize,
    pub n_after_mad: usize,
    pub smote_applied: bool,
    pub stats: ColumnStats,
    pub selection: SelectionResult,
    pub model: ForestEnsembleModel,
    pub uauc: Vec<(f64, f64)>,
    pub predictions: Vec<SchemePredictions>,
}

fn needs_smote(mode: SmoteMode, y: &[usize], n_classes: usize) -> bool {
    match mode {
        SmoteMode::On => true,
        SmoteMode::Off => false,
        SmoteMode::Auto => {
            let counts: Vec<usize> = (0..n_classes).map(|c| y.iter().filter(|&&l| l == c).count()).collect();
            counts.iter().any(|&n| n != counts[0])
        }
    }
}

fn stage<T>(stage: Stage, f: impl FnOnce() -> Result<T>) -> Result<T> {
    f().map_err(|e| e.in_stage(stage.name()))
}

fn fit_experiment(
    name: &str,
    pool: Vec<FeatureDescriptor>,
    stability_filtering: bool,
    inputs: &PipelineInputs,
    config: &PipelineConfig,
    clock: &StageClock,
) -> Result<FittedExperiment> {
    let k = config.task.n_classes();
    let y = &inputs.discovery_labels;
    let master = config.master_seed;

    clock.enter(Stage::Prep)?;
    let (clean, stats, n_after_mad) = stage(Stage::Prep, || {
        let pooled = inputs.discovery.select_columns(&pool)?;
        let keep = mad_filter(&pooled);
        if keep.is_empty() {
            return Err(Error::InvalidInput("no feature survives the MAD filter".into()));
        }
        let (clean, stats) = fit_clean(&pooled.select_columns(&keep)?);
        Ok((clean, stats, keep.len()))
    })?;

    clock.enter(Stage::Select)?;
    let smote_applied = needs_smote(config.smote, y, k);
    let smote_seed = seed::derive_named(master, "smote");
    let selection = stage(Stage::Select, || {
        if smote_applied && config.smote_before_selection {
            let (xs, ys) = smote(&clean.rows(), y, config.smote_k, smote_seed)?;
            let ids = (0..xs.len()).map(|i| format!("row{i}")).collect();
            let m = FeatureMatrix::new(clean.descriptors.clone(), ids, xs.concat())?;
            select(config.selector, &m, &ys, k, config.n_features, config.mrmr_scheme)
        } else {
            select(config.selector, &clean, y, k, config.n_features, config.mrmr_scheme)
        }
    })?;
    let selected: Vec<FeatureDescriptor> = selection.selected.clone();

    clock.enter(Stage::Train)?;
    let sel_stats = ColumnStats {
        columns: selected
            .iter()
            .map(|d| stats.get(d).cloned().expect("selected columns were fitted"))
            .collect(),
    };
    let model = stage(Stage::Train, || {
        let x = clean.select_columns(&selected)?.rows();
        let (x, yt) = if smote_applied {
            smote(&x, y, config.smote_k, smote_seed)?
        } else {
            (x, y.clone())
        };
        let mut model = train_ensemble(
            &x,
            &yt,
            k,
            &config.forest,
            config.n_forests,
            seed::derive_named(master, "ensemble"),
        )?;
        model.selected = selected.clone();
        model.stats = Some(sel_stats.clone());
        Ok(model)
    })?;
    let uauc_seed = seed::derive_named(master, "uauc");
    let uauc_vals = stage(Stage::Train, || {
        selected
            .iter()
            .map(|d| {
                let col = clean.column(clean.find_column(d).expect("selected column"));
                let s = seed::derive_named(uauc_seed, &d.to_string());
                let r = uauc(&col, y, k, config.uauc_iters, 0.7, &config.forest, s)?;
                Ok((r.mean, r.std))
            })
            .collect::<Result<Vec<_>>>()
    })?;

    clock.enter(Stage::Predict)?;
    let predictions = stage(Stage::Predict, || {
        inputs
            .schemes
            .iter()
            .map(|(scheme, table)| {
                let test = apply_clean(&table.select_columns(&selected)?, &sel_stats)?;
                Ok(SchemePredictions {
                    scheme: scheme.clone(),
                    subject_ids: test.subject_ids.clone(),
                    probs: model.predict(&test.rows()),
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;

    Ok(FittedExperiment {
        name: name.to_string(),
        stability_filtering,
        n_pool: pool.len(),
        n_after_mad,
        smote_applied,
        stats: sel_stats,
        selection,
        model,
        uauc: uauc_vals,
        predictions,
    })
}

fn check_inputs(inputs: &PipelineInputs, config: &PipelineConfig) -> Result<()> {
    if inputs.discovery.n_rows() != inputs.discovery_labels.len() {
        return Err(Error::LengthMismatch {
            expected: inputs.discovery.n_rows(),
            actual: inputs.discovery_labels.len(),
        });
    }
    let k = config.task.n_classes();
    if let Some(&bad) = inputs.discovery_labels.iter().find(|&&c| c >= k) {
        return Err(Error::InvalidLabel(format!("class {bad} out of range for {:?}", config.task)));
    }
    if inputs.schemes.is_empty() {
        return Err(Error::InvalidInput("no test feature tables".into()));
    }
    if config.stability_filtering && inputs.raters.is_none() {
        return Err(Error::InvalidInput("stability filtering needs rater tables".into()));
    }
    if config.include_age && inputs.discovery.find_column(&FeatureDescriptor::age()).is_none() {
        return Err(Error::InvalidInput("include_age is set but the discovery table has no Age column".into()));
    }
    Ok(())
}

/// Everything a run produced: the report plus the persisted intermediates.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: RunReport,
    pub stability: Option<StabilityReport>,
    pub experiments: Vec<FittedExperiment>,
}

/// Run the unfiltered experiment and, when enabled, the stability-filtered
/// one, then evaluate both on every scheme.
pub fn run_experiments(inputs: &PipelineInputs, config: &PipelineConfig) -> Result<RunOutput> {
    config.validate()?;
    check_inputs(inputs, config)?;
    let clock = StageClock::default();
    let k = config.task.n_classes();

    let age = FeatureDescriptor::age();
    let base_pool: Vec<FeatureDescriptor> = inputs
        .discovery
        .descriptors
        .iter()
        .filter(|d| config.include_age || **d != age)
        .cloned()
        .collect();

    clock.enter(Stage::Stability)?;
    let stability = match (&inputs.raters, config.stability_filtering) {
        (Some(stack), true) => Some(stage(Stage::Stability, || stability_filter(stack, config.tau))?),
        _ => None,
    };

    let mut experiments = vec![fit_experiment(WITHOUT_FILTERING, base_pool.clone(), false, inputs, config, &clock)?];
    if let Some(report) = &stability {
        let available: std::collections::HashSet<&FeatureDescriptor> = base_pool.iter().collect();
        let pool = report
            .augmented_pool(config.include_age)
            .into_iter()
            .filter(|d| available.contains(d))
            .collect();
        experiments.push(fit_experiment(WITH_FILTERING, pool, true, inputs, config, &clock)?);
    }

    clock.enter(Stage::Evaluate)?;
    let labels = stage(Stage::Evaluate, || inputs.test_labels.open(&clock))?;
    let mut reports = Vec::with_capacity(experiments.len());
    for exp in &experiments {
        let evaluation = stage(Stage::Evaluate, || evaluate_predictions(&exp.predictions, &labels, k))?;
        let occc = match &inputs.raters {
            Some(stack) => selected_occc(stack, &exp.selection.selected, config.tau),
            None => vec![None; exp.selection.selected.len()],
        };
        let relevance: HashMap<&FeatureDescriptor, f64> = exp
            .selection
            .diagnostics
            .iter()
            .map(|d| (&d.descriptor, d.relevance))
            .collect();
        let selected = exp
            .selection
            .selected
            .iter()
            .zip(&exp.uauc)
            .zip(occc)
            .map(|((d, &(um, us)), o)| SelectedFeature {
                descriptor: d.clone(),
                relevance: relevance.get(d).copied().unwrap_or(f64::NAN),
                uauc_mean: um,
                uauc_std: us,
                occc: o,
            })
            .collect();
        reports.push(ExperimentReport {
            name: exp.name.clone(),
            stability_filtering: exp.stability_filtering,
            n_pool: exp.n_pool,
            n_after_mad: exp.n_after_mad,
            smote_applied: exp.smote_applied,
            selected,
            evaluation,
        });
    }

    let mut comparisons = Vec::new();
    if k == 2 && experiments.len() == 2 {
        for (without, with) in experiments[0].predictions.iter().zip(&experiments[1].predictions) {
            let y = labels_for(&with.subject_ids, &labels)?;
            let truth: Vec<bool> = y.iter().map(|&c| c == 1).collect();
            let score = |p: &SchemePredictions| p.probs.iter().map(|r| r[1]).collect::<Vec<f64>>();
            let d = stage(Stage::Evaluate, || delong_test(&score(with), &score(without), &truth))?;
            comparisons.push(DelongComparison {
                scheme: with.scheme.clone(),
                auc_with_filtering: d.auc_a,
                auc_without_filtering: d.auc_b,
                z: d.z,
                p: d.p,
            });
        }
    }

    let report = RunReport {
        provenance: Provenance {
            tool: "radstack".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config_hash: config.result_hash(),
            master_seed: config.master_seed,
            task: config.task,
            selector: config.selector.token().into(),
            n_discovery: inputs.discovery.n_rows(),
            n_test: inputs.schemes[0].1.n_rows(),
            schemes: inputs.schemes.iter().map(|(s, _)| s.clone()).collect(),
        },
        stability: stability.as_ref().map(|s| StabilitySummary {
            tau: s.tau,
            raters: s.raters.clone(),
            n_candidates: s.entries.len(),
            n_retained: s.retained.len(),
        }),
        experiments: reports,
        comparisons,
    };
    Ok(RunOutput {
        report,
        stability,
        experiments,
    })
}

/// OCCC of each selected descriptor over the rater stack; None where the
/// stack lacks the column.
fn selected_occc(stack: &RaterStack, selected: &[FeatureDescriptor], tau: f64) -> Vec<Option<f64>> {
    let index = stack.matrices[0].column_index();
    selected
        .iter()
        .map(|d| {
            if !index.contains_key(d) || *d == FeatureDescriptor::age() {
                return None;
            }
            stability_filter_on(stack, std::slice::from_ref(d), tau)
                .ok()
                .map(|r| r.entries[0].occc)
        })
        .collect()
}

/// Load every table named by `config.paths`. Test manifests stay sealed.
pub fn load_inputs(config: &PipelineConfig) -> Result<PipelineInputs> {
    config.validate_paths()?;
    let p = &config.paths;
    let disc_manifest = load_manifest(&p.discovery_manifest)?;
    let discovery = FeatureMatrix::read_csv(&p.discovery_features)?;
    let discovery_labels = labels_for(&discovery.subject_ids, &manifest_labels(&disc_manifest, config.task)?)?;
    let test_ids = load_manifest(&p.test_manifest)?.strip_labels().ids();
    let mut schemes = Vec::with_capacity(p.test_features.len());
    for (name, path) in &p.test_features {
        let m = FeatureMatrix::read_csv(path)?;
        if let Some(id) = m.subject_ids.iter().find(|id| !test_ids.contains(id)) {
            return Err(Error::InvalidInput(format!(
                "scheme {name}: subject {id} is not in the test manifest"
            )));
        }
        schemes.push((name.clone(), m));
    }
    let raters = if config.stability_filtering {
        let (names, tables): (Vec<String>, Vec<FeatureMatrix>) = p
            .rater_features
            .iter()
            .map(|(n, path)| Ok((n.clone(), FeatureMatrix::read_csv(path)?)))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .unzip();
        Some(RaterStack::new(names, tables)?)
    } else {
        None
    };
    Ok(PipelineInputs {
        discovery,
        discovery_labels,
        schemes,
        raters,
        test_labels: SealedLabels::from_manifest(&p.test_manifest, config.task),
    })
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::parse(path.display().to_string(), e))?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_predictions(path: &Path) -> Result<Vec<SchemePredictions>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), e))
}

/// Write the report and every intermediate under `dir`.
pub fn persist(output: &RunOutput, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    if let Some(s) = &output.stability {
        s.save(&dir.join("stability.json"))?;
    }
    for exp in &output.experiments {
        let sub = dir.join(&exp.name);
        fs::create_dir_all(&sub).map_err(|e| Error::io(&sub, e))?;
        exp.selection.save(&sub.join("selection.json"))?;
        exp.stats.save(&sub.join("stats.json"))?;
        save_model(&exp.model, &sub.join("model.rsm"))?;
        write_json(&exp.predictions, &sub.join("predictions.json"))?;
    }
    let path = dir.join("report.json");
    fs::write(&path, output.report.to_json()).map_err(|e| Error::io(&path, e))
}

/// File-driven run: load inputs, run both experiments and persist to the
/// configured output directory when one is set.
pub fn run_pipeline(config: &PipelineConfig) -> Result<RunReport> {
    let inputs = stage(Stage::Load, || load_inputs(config))?;
    let output = run_experiments(&inputs, config)?;
    if !config.paths.output_dir.as_os_str().is_empty() {
        persist(&output, &config.paths.output_dir)?;
    }
    Ok(output.report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sealed_labels_refuse_early_reads() {
        let clock = StageClock::default();
        let sealed = SealedLabels::from_values(Task::IDH, &["a".into()], &[1]);
        for s in [Stage::Load, Stage::Stability, Stage::Prep, Stage::Select, Stage::Train, Stage::Predict] {
            clock.enter(s).unwrap();
            assert!(matches!(sealed.open(&clock), Err(Error::Leakage(_))));
        }
        clock.enter(Stage::Evaluate).unwrap();
        assert_eq!(sealed.open(&clock).unwrap()["a"], 1);
        assert!(clock.enter(Stage::Train).is_err());
    }

    #[test]
    fn auto_smote_only_when_unbalanced() {
        assert!(!needs_smote(SmoteMode::Auto, &[0, 1, 0, 1], 2));
        assert!(needs_smote(SmoteMode::Auto, &[0, 1, 0, 0], 2));
        assert!(needs_smote(SmoteMode::On, &[0, 1], 2));
        assert!(!needs_smote(SmoteMode::Off, &[0, 0, 1], 2));
    }
}
