use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use radstack::evaluation::{dsc, frs_rank, hd95, perm_test, MetricCell, MetricTable, SegMetric};
use radstack::fusion::{fuse_multiregion, MAX_ITER, TOL};
use radstack::manifest::load_manifest;
use radstack::modeling::{load_model, save_model, smote, train_ensemble};
use radstack::pipeline::{
    evaluate_predictions, extract_cohort, extract_synthetic, load_predictions, manifest_labels, run_pipeline,
    synthesize, write_cohort, CohortSpec, PipelineConfig, RaterNoise, SchemePredictions, SmoteMode,
};
use radstack::selection::{select, SelectionResult, SelectorKind};
use radstack::stability::{stability_filter, RaterStack, StabilityReport};
use radstack::tableprep::{apply_clean, fit_clean, mad_filter, ColumnStats};
use radstack::volume::{derive_regions, read_label_mask, write_label_mask, TumorRegion};
use radstack::{Error, FeatureMatrix, Task};

#[derive(Parser)]
#[command(name = "radstack", version, about = "Multiregional radiomics with agreement-based stability filtering")]
struct Cli {
    /// Pipeline config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output file or directory, depending on the command.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum TaskArg {
    Idh,
    Os,
}

impl From<TaskArg> for Task {
    fn from(t: TaskArg) -> Task {
        match t {
            TaskArg::Idh => Task::IDH,
            TaskArg::Os => Task::OS,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Extract a feature table from a manifest with one rater's masks.
    Extract {
        #[arg(long)]
        manifest: PathBuf,
        /// Mask key; defaults to the first rater in name order.
        #[arg(long)]
        rater: Option<String>,
        #[arg(long)]
        with_age: bool,
    },
    /// OCCC/ICC of every candidate descriptor across rater tables.
    Stability {
        /// Rater tables as NAME=PATH.
        #[arg(long = "rater", required = true, value_parser = parse_named)]
        raters: Vec<(String, PathBuf)>,
        #[arg(long, default_value_t = 0.95)]
        tau: f64,
    },
    /// Fit cleaning statistics on a discovery table, or apply saved ones.
    Prep(PrepArgs),
    /// Select features from a cleaned discovery table.
    Select {
        #[arg(long)]
        table: PathBuf,
        /// Manifest supplying the labels.
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_enum, default_value = "idh")]
        task: TaskArg,
        #[arg(long, default_value = "mrmr")]
        method: String,
        #[arg(long, default_value_t = 10)]
        n: usize,
    },
    /// Train the forest ensemble on selected columns of a cleaned table.
    Train {
        #[arg(long)]
        table: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_enum, default_value = "idh")]
        task: TaskArg,
        #[arg(long)]
        selection: PathBuf,
        /// Cleaning statistics stored with the model for test-time use.
        #[arg(long)]
        stats: Option<PathBuf>,
        #[arg(long)]
        forests: Option<usize>,
    },
    /// Class probabilities for raw test tables (cleaned with the model's statistics).
    Predict {
        #[arg(long)]
        model: PathBuf,
        /// Test tables as SCHEME=PATH.
        #[arg(long = "table", required = true, value_parser = parse_named)]
        tables: Vec<(String, PathBuf)>,
    },
    /// Per-scheme AUC, mean, std and RSD from saved predictions.
    Evaluate {
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_enum, default_value = "idh")]
        task: TaskArg,
    },
    /// STAPLE fusion of multi-label masks.
    Fuse {
        #[arg(long, num_args = 2.., required = true)]
        masks: Vec<PathBuf>,
        /// Per-region sensitivities, specificities and convergence.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// DSC and HD95 of several raters against a reference, per subject and region.
    Segmetrics {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        reference: String,
        #[arg(long, num_args = 1.., required = true)]
        methods: Vec<String>,
    },
    /// Final ranking scores and pairwise permutation tests from a metric table.
    Rank {
        #[arg(long)]
        metrics: PathBuf,
        #[arg(long, default_value_t = 1000)]
        permutations: usize,
    },
    /// Full pipeline from a config file.
    Run,
    /// Generate a synthetic cohort; optionally extract its tables and write a run config.
    Synth(SynthArgs),
}

#[derive(Args)]
struct PrepArgs {
    #[arg(long)]
    table: PathBuf,
    /// Apply these statistics instead of fitting.
    #[arg(long)]
    stats: Option<PathBuf>,
    /// Where to write fitted statistics.
    #[arg(long)]
    stats_out: Option<PathBuf>,
    /// Restrict the pool to the stability-retained descriptors of this report.
    #[arg(long)]
    pool: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 40)]
    n_discovery: usize,
    #[arg(long, default_value_t = 20)]
    n_test: usize,
    #[arg(long, default_value_t = 48)]
    grid: usize,
    #[arg(long, default_value_t = 7)]
    raters: usize,
    #[arg(long, value_enum, default_value = "idh")]
    task: TaskArg,
    /// Identical rater masks.
    #[arg(long)]
    no_rater_noise: bool,
    /// Also extract feature tables and write `run.toml`.
    #[arg(long)]
    extract: bool,
}

fn parse_named(s: &str) -> std::result::Result<(String, PathBuf), String> {
    let (name, path) = s.split_once('=').ok_or_else(|| format!("expected NAME=PATH, got {s:?}"))?;
    Ok((name.to_string(), PathBuf::from(path)))
}

fn out_path(cli: &Cli) -> Result<&Path> {
    cli.out
        .as_deref()
        .ok_or_else(|| Error::InvalidInput("--out is required for this command".into()).into())
}

fn write_json<T: serde::Serialize>(value: &T, path: &Path) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)?).with_context(|| format!("writing {}", path.display()))
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.master_seed = s;
    }
    if let Some(t) = cli.threads {
        cfg.threads = t;
    }
    Ok(cfg)
}

fn labels_of(manifest: &Path, task: Task, ids: &[String]) -> Result<Vec<usize>> {
    let map = manifest_labels(&load_manifest(manifest)?, task)?;
    ids.iter()
        .map(|id| {
            map.get(id)
                .copied()
                .ok_or_else(|| Error::InvalidLabel(format!("no label for subject {id}")).into())
        })
        .collect()
}

fn execute(cli: &Cli, cfg: &PipelineConfig) -> Result<()> {
    match &cli.command {
        Command::Extract {
            manifest,
            rater,
            with_age,
        } => {
            let mut ext = cfg.extraction.clone();
            ext.include_age |= *with_age;
            let table = extract_cohort(&load_manifest(manifest)?, rater.as_deref(), &ext)?;
            table.write_csv(out_path(cli)?)?;
            info!("{} subjects x {} features", table.n_rows(), table.n_cols());
        }
        Command::Stability { raters, tau } => {
            let (names, tables): (Vec<String>, Vec<FeatureMatrix>) = raters
                .iter()
                .map(|(n, p)| Ok((n.clone(), FeatureMatrix::read_csv(p)?)))
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .unzip();
            let report = stability_filter(&RaterStack::new(names, tables)?, *tau)?;
            info!("{} of {} candidates retained", report.retained.len(), report.entries.len());
            report.save(out_path(cli)?)?;
        }
        Command::Prep(args) => {
            let table = FeatureMatrix::read_csv(&args.table)?;
            let table = match &args.pool {
                Some(p) => {
                    let pool = StabilityReport::load(p)?.augmented_pool(cfg.include_age);
                    let present: Vec<_> = pool.into_iter().filter(|d| table.find_column(d).is_some()).collect();
                    table.select_columns(&present)?
                }
                None => table,
            };
            let cleaned = match &args.stats {
                Some(s) => {
                    let stats = ColumnStats::load(s)?;
                    let keep: Vec<_> = stats.columns.iter().map(|c| c.descriptor.clone()).collect();
                    apply_clean(&table.select_columns(&keep)?, &stats)?
                }
                None => {
                    let keep = mad_filter(&table);
                    let (cleaned, stats) = fit_clean(&table.select_columns(&keep)?);
                    if let Some(p) = &args.stats_out {
                        stats.save(p)?;
                    }
                    cleaned
                }
            };
            cleaned.write_csv(out_path(cli)?)?;
        }
        Command::Select {
            table,
            manifest,
            task,
            method,
            n,
        } => {
            let m = FeatureMatrix::read_csv(table)?;
            let task = Task::from(*task);
            let y = labels_of(manifest, task, &m.subject_ids)?;
            let kind = SelectorKind::parse(method)?;
            let result = select(kind, &m, &y, task.n_classes(), *n, cfg.mrmr_scheme)?;
            result.save(out_path(cli)?)?;
        }
        Command::Train {
            table,
            manifest,
            task,
            selection,
            stats,
            forests,
        } => {
            let task = Task::from(*task);
            let sel = SelectionResult::load(selection)?;
            let m = FeatureMatrix::read_csv(table)?.select_columns(&sel.selected)?;
            let y = labels_of(manifest, task, &m.subject_ids)?;
            let k = task.n_classes();
            let seed = radstack::seed::derive_named(cfg.master_seed, "smote");
            let unbalanced = (1..k).any(|c| y.iter().filter(|&&l| l == c).count() != y.iter().filter(|&&l| l == 0).count());
            let (x, y) = if cfg.smote == SmoteMode::On || (cfg.smote == SmoteMode::Auto && unbalanced) {
                smote(&m.rows(), &y, cfg.smote_k, seed)?
            } else {
                (m.rows(), y)
            };
            let n_forests = forests.unwrap_or(cfg.n_forests);
            let ens_seed = radstack::seed::derive_named(cfg.master_seed, "ensemble");
            let mut model = train_ensemble(&x, &y, k, &cfg.forest, n_forests, ens_seed)?;
            model.selected = sel.selected.clone();
            if let Some(p) = stats {
                let all = ColumnStats::load(p)?;
                let columns = sel
                    .selected
                    .iter()
                    .map(|d| all.get(d).cloned().ok_or_else(|| Error::Unfitted(d.to_string())))
                    .collect::<radstack::Result<Vec<_>>>()?;
                model.stats = Some(ColumnStats { columns });
            }
            save_model(&model, out_path(cli)?)?;
        }
        Command::Predict { model, tables } => {
            let model = load_model(model)?;
            let mut preds = Vec::with_capacity(tables.len());
            for (scheme, path) in tables {
                let t = FeatureMatrix::read_csv(path)?.select_columns(&model.selected)?;
                let t = match &model.stats {
                    Some(s) => apply_clean(&t, s)?,
                    None => t,
                };
                preds.push(SchemePredictions {
                    scheme: scheme.clone(),
                    subject_ids: t.subject_ids.clone(),
                    probs: model.predict(&t.rows()),
                });
            }
            write_json(&preds, out_path(cli)?)?;
        }
        Command::Evaluate {
            predictions,
            manifest,
            task,
        } => {
            let task = Task::from(*task);
            let preds = load_predictions(predictions)?;
            let labels = manifest_labels(&load_manifest(manifest)?, task)?;
            let eval = evaluate_predictions(&preds, &labels, task.n_classes())?;
            match &cli.out {
                Some(p) => write_json(&eval, p)?,
                None => println!("{}", serde_json::to_string_pretty(&eval)?),
            }
        }
        Command::Fuse { masks, report } => {
            let masks = masks
                .iter()
                .map(|p| read_label_mask(p))
                .collect::<radstack::Result<Vec<_>>>()?;
            let (fused, results) = fuse_multiregion(&masks, MAX_ITER, TOL)?;
            write_label_mask(&fused, out_path(cli)?)?;
            if let Some(p) = report {
                let named: BTreeMap<&str, _> = ["WT", "TC", "ENC"].into_iter().zip(&results).collect();
                write_json(&named, p)?;
            }
        }
        Command::Segmetrics {
            manifest,
            reference,
            methods,
        } => {
            let m = load_manifest(manifest)?;
            let mut cells = Vec::new();
            for s in &m.subjects {
                let truth = derive_regions(&read_label_mask(s.mask_path(reference)?)?)?;
                let others = methods
                    .iter()
                    .map(|r| derive_regions(&read_label_mask(s.mask_path(r)?)?))
                    .collect::<radstack::Result<Vec<_>>>()?;
                for region in TumorRegion::ALL {
                    let t = truth.get(region);
                    let name = format!("{region:?}");
                    let d = others.iter().map(|o| dsc(o.get(region), t)).collect::<radstack::Result<Vec<_>>>()?;
                    let h = others.iter().map(|o| hd95(o.get(region), t)).collect::<radstack::Result<Vec<_>>>()?;
                    for (metric, values) in [(SegMetric::Dsc, d), (SegMetric::Hd95, h)] {
                        cells.push(MetricCell {
                            subject: s.id.clone(),
                            region: name.clone(),
                            metric,
                            values,
                        });
                    }
                }
            }
            let table = MetricTable {
                methods: methods.clone(),
                cells,
            };
            write_json(&table, out_path(cli)?)?;
        }
        Command::Rank { metrics, permutations } => {
            let text = fs::read_to_string(metrics).with_context(|| format!("reading {}", metrics.display()))?;
            let table: MetricTable = serde_json::from_str(&text).map_err(|e| Error::parse("metric table", e))?;
            let ranking = frs_rank(&table)?;
            let best = ranking
                .frs
                .iter()
                .enumerate()
                .min_by_key(|&(i, &r)| (r, i))
                .map(|(i, _)| i)
                .expect("at least two methods");
            let mut tests = BTreeMap::new();
            for (i, other) in table.methods.iter().enumerate().filter(|&(i, _)| i != best) {
                let seed = radstack::seed::derive(cfg.master_seed, i as u64);
                tests.insert(other.clone(), perm_test(&table, &table.methods[best], other, *permutations, seed)?);
            }
            let out = serde_json::json!({
                "ranking": ranking,
                "best": table.methods[best],
                "permutation_p_vs_best": tests,
            });
            match &cli.out {
                Some(p) => write_json(&out, p)?,
                None => println!("{}", serde_json::to_string_pretty(&out)?),
            }
        }
        Command::Run => {
            let mut cfg = cfg.clone();
            if cli.config.is_none() {
                return Err(Error::InvalidInput("run needs --config".into()).into());
            }
            if let Some(out) = &cli.out {
                cfg.paths.output_dir = out.clone();
            }
            let report = run_pipeline(&cfg)?;
            for e in &report.experiments {
                info!(
                    "{}: AUROC {:.3} +/- {:.3}, RSD {:.2}%",
                    e.name, e.evaluation.auc_mean, e.evaluation.auc_std, e.evaluation.rsd_percent
                );
            }
            if cfg.paths.output_dir.as_os_str().is_empty() {
                println!("{}", report.to_json());
            }
        }
        Command::Synth(args) => {
            let root = out_path(cli)?;
            let spec = CohortSpec {
                n_discovery: args.n_discovery,
                n_test: args.n_test,
                grid: args.grid,
                n_raters: args.raters,
                task: args.task.into(),
                rater_noise: if args.no_rater_noise {
                    RaterNoise::none()
                } else {
                    RaterNoise::default()
                },
                ..CohortSpec::default()
            };
            let cohort = synthesize(&spec, cfg.master_seed)?;
            let written = write_cohort(&cohort, root)?;
            if args.extract {
                let tables = extract_synthetic(&cohort, &cfg.extraction)?;
                let mut paths = tables.write(&root.join("features"))?;
                paths.discovery_manifest = written.discovery_manifest.clone();
                paths.test_manifest = written.test_manifest.clone();
                paths.output_dir = root.join("results");
                relativize(&mut paths, root);
                let run_cfg = PipelineConfig {
                    task: spec.task,
                    master_seed: cfg.master_seed,
                    paths,
                    ..cfg.clone()
                };
                let path = root.join("run.toml");
                fs::write(&path, run_cfg.to_toml()).with_context(|| format!("writing {}", path.display()))?;
            }
        }
    }
    Ok(())
}

/// Store config paths relative to the config's own directory.
fn relativize(paths: &mut radstack::pipeline::PipelinePaths, base: &Path) {
    let rel = |p: &mut PathBuf| {
        if let Ok(r) = p.strip_prefix(base) {
            *p = r.to_path_buf();
        }
    };
    rel(&mut paths.discovery_manifest);
    rel(&mut paths.discovery_features);
    rel(&mut paths.test_manifest);
    rel(&mut paths.output_dir);
    paths.test_features.values_mut().for_each(rel);
    paths.rater_features.values_mut().for_each(rel);
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(e) if !e.is_validation() => 3,
        Some(_) => 2,
        None => 3,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = load_config(&cli).and_then(|cfg| {
        if cfg.threads > 0 {
            rayon::ThreadPoolBuilder::new()
                .num_threads(cfg.threads)
                .build_global()
                .map_err(|e| anyhow!("thread pool: {e}"))?;
        }
        execute(&cli, &cfg)
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
