//! Configuration, experiment orchestration, run reports and synthetic cohorts.

mod config;
mod run;
mod synth;
mod tables;

pub use config::{PipelineConfig, PipelinePaths, SmoteMode};
pub use run::{
    evaluate_predictions, load_inputs, load_predictions, manifest_labels, persist, run_experiments, run_pipeline,
    DelongComparison, Evaluation, ExperimentReport, FittedExperiment, PipelineInputs, Provenance, RunOutput,
    RunReport, SchemePredictions, SchemeScore, SealedLabels, SelectedFeature, StabilitySummary, Stage, StageClock,
    WITHOUT_FILTERING, WITH_FILTERING,
};
pub use synth::{
    make_synthetic_cohort, synthesize, write_cohort, CohortSpec, RaterNoise, SyntheticCohort, SyntheticSubject,
    WrittenCohort, TRUTH_RATER,
};
pub use tables::{extract_cohort, extract_synthetic, CohortTables, FUSED_SCHEME};
