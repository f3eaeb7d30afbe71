//! The orchestrated run: predict every cell, then audit, evaluate, and
//! regress against the annotations.
//!
//! Reruns are cheap and safe: the response cache makes a repeated or
//! interrupted run complete only the missing model calls, and all output
//! files are written in fixed orders with fixed float formatting, so two
//! runs with the same config and seed produce byte-identical trees.

use std::fs;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::Serialize;

use crate::annotation::{load_annotations, na_rate, Round};
use crate::corpus::{load_corpus, CurriculumDocument};
use crate::eval::{render_markdown as render_eval_markdown, write_eval_csv, ICC_VARIANT};
use crate::framework::CompetencyFramework;
use crate::gateway::Gateway;
use crate::pipeline::analysis::{
    build_eval_reports, build_pair_observations, document_metadata, gold_labels,
    join_predictions,
};
use crate::pipeline::config::RunConfig;
use crate::pipeline::cot::{score_cell, CellOutcome};
use crate::pipeline::records::{write_predictions, PredictionRecord};
use crate::pipeline::PipelineError;
use crate::prompt::{PromptFactory, Strategy, TemplateSet};
use crate::regression::{
    render_markdown as render_regress_markdown, run_eq1, Dependent, EncodeOptions,
};
use crate::annotation::AlignmentLabel;

/// What a run produced, for callers and CLI summaries.
#[derive(Debug)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub n_documents: usize,
    pub n_predictions: usize,
    pub n_failed_records: usize,
    pub n_unmatched_gold: usize,
    /// Requests actually sent to backends (cache misses), summed over models.
    pub model_calls: u64,
    pub stages: Vec<String>,
}

#[derive(Debug, Serialize)]
struct Manifest {
    version: &'static str,
    /// The verbatim input config, copied next to this manifest.
    config_file: &'static str,
    seed: u64,
    parallelism: usize,
    kappa_weights: String,
    icc_variant: &'static str,
    /// Guided questions are answered in one model call per document, not
    /// one per question.
    extraction_mode: &'static str,
    stages: Vec<String>,
    counts: ManifestCounts,
    warnings: Vec<String>,
}

#[derive(Debug, Serialize)]
struct ManifestCounts {
    documents: usize,
    frameworks: usize,
    strategies: usize,
    models: usize,
    summary_prompts_planned: usize,
    scoring_cells: usize,
    prediction_records: usize,
    failed_records: usize,
    no_response_records: usize,
    unmatched_gold: usize,
    scorediff_dropped_l5: usize,
}

struct Cell {
    model_idx: usize,
    fw_idx: usize,
    strategy: Strategy,
    doc_idx: usize,
}

/// Run the full pipeline for a config. `raw_config` is the config file's
/// original bytes, copied verbatim into the output directory.
pub fn execute(cfg: &RunConfig, raw_config: &str) -> Result<RunSummary, PipelineError> {
    cfg.validate()?;

    let templates = match &cfg.template_dir {
        Some(dir) => TemplateSet::with_overrides(dir)?,
        None => TemplateSet::bundled(),
    };
    let factory = PromptFactory::new(templates, cfg.max_prompt_chars);

    let mut frameworks = Vec::with_capacity(cfg.frameworks.len());
    for &key in &cfg.frameworks {
        let fw = match &cfg.framework_dir {
            Some(dir) => CompetencyFramework::load(&dir.join(format!("{key}.json")), key)?,
            None => CompetencyFramework::bundled(key)?,
        };
        if cfg.strategies.contains(&Strategy::Def) {
            fw.require_definitions()?;
        }
        frameworks.push(fw);
    }

    let mut docs: Vec<CurriculumDocument> = Vec::new();
    for (&doc_type, path) in &cfg.corpus {
        let loaded = load_corpus(path)?;
        if let Some(stray) = loaded.iter().find(|d| d.doc_type != doc_type) {
            return Err(PipelineError::Config(format!(
                "{} configured for {doc_type} but contains a {} row",
                path.display(),
                stray.doc_type
            )));
        }
        docs.extend(loaded);
    }
    if docs.is_empty() {
        return Err(PipelineError::Config("corpora contain no documents".into()));
    }

    let gateways: Vec<Gateway> = cfg
        .models
        .iter()
        .map(|m| Gateway::from_config(m.clone(), &cfg.cache_dir, cfg.seed, cfg.parallelism))
        .collect::<Result<_, _>>()?;

    fs::create_dir_all(&cfg.out_dir)?;
    fs::write(cfg.out_dir.join("config.toml"), raw_config)?;

    // Every (model, framework, strategy, document) cell, in a fixed order.
    let mut cells = Vec::new();
    for model_idx in 0..cfg.models.len() {
        for fw_idx in 0..frameworks.len() {
            for &strategy in &cfg.strategies {
                for doc_idx in 0..docs.len() {
                    cells.push(Cell {
                        model_idx,
                        fw_idx,
                        strategy,
                        doc_idx,
                    });
                }
            }
        }
    }

    let outcomes: Vec<Option<Result<CellOutcome, PipelineError>>> =
        run_cells(cfg, &cells, &docs, &frameworks, &gateways, &factory);

    // Assemble one record per (cell, competency).
    let mut records: Vec<PredictionRecord> = Vec::new();
    let mut failed_records = 0usize;
    let mut no_response_records = 0usize;
    for (cell, outcome) in cells.iter().zip(outcomes) {
        let outcome = outcome.expect("all cells ran")?;
        let doc = &docs[cell.doc_idx];
        let fw = &frameworks[cell.fw_idx];
        let model_name = &cfg.models[cell.model_idx].model_name;
        let failure_by_id: std::collections::BTreeMap<&str, _> = outcome
            .scores
            .failures
            .iter()
            .map(|(id, kind)| (id.as_str(), *kind))
            .collect();
        for c in &fw.competencies {
            let failure = failure_by_id.get(c.id.as_str()).copied();
            let label = match outcome.scores.labels.get(&c.id) {
                Some(&label) => label,
                // Failed cells still evaluate; NA is the declared stand-in.
                None => AlignmentLabel::Na,
            };
            if failure.is_some() {
                failed_records += 1;
                if failure == Some(crate::gateway::FailureKind::NoResponse) {
                    no_response_records += 1;
                }
            }
            records.push(PredictionRecord {
                course_id: doc.course_id.clone(),
                doc_type: doc.doc_type,
                framework: fw.key,
                competency_id: c.id.clone(),
                strategy: cell.strategy,
                model_name: model_name.clone(),
                label,
                failure,
                prompt_hash: outcome
                    .prompt_hash_by_id
                    .get(&c.id)
                    .cloned()
                    .unwrap_or_default(),
                summary_hash: outcome.summary_hash.clone(),
            });
        }
    }
    records.sort_by_key(|r| r.sort_key());

    let expected = docs.len()
        * cfg.strategies.len()
        * cfg.models.len()
        * frameworks.iter().map(|f| f.competencies.len()).sum::<usize>();
    assert_eq!(records.len(), expected, "one record per cell per competency");

    write_predictions(&cfg.out_dir.join("predictions.csv"), &records)?;
    let mut stages = vec!["predict".to_string()];
    let mut warnings: Vec<String> = Vec::new();
    let mut unmatched_gold = 0usize;
    let mut scorediff_dropped_l5 = 0usize;

    if let Some(annotations_path) = &cfg.annotations {
        let annotations = load_annotations(annotations_path)?;

        // NA audit over final-round labels.
        let final_records: Vec<_> = annotations
            .iter()
            .filter(|r| r.round == Round::Final)
            .cloned()
            .collect();
        let rates = na_rate(&final_records)?;
        let mut w = csv::Writer::from_path(cfg.out_dir.join("na_audit.csv"))
            .map_err(std::io::Error::from)?;
        w.write_record([
            "framework",
            "doc_type",
            "na_count",
            "total",
            "na_fraction",
            "na_percent",
        ])
        .map_err(std::io::Error::from)?;
        for row in &rates {
            w.write_record([
                row.framework.to_string(),
                row.doc_type.to_string(),
                row.na_count.to_string(),
                row.total.to_string(),
                format!("{:.6}", row.na_fraction),
                format!("{:.1}", row.na_fraction * 100.0),
            ])
            .map_err(std::io::Error::from)?;
        }
        w.flush()?;
        stages.push("na_audit".into());

        // Evaluation.
        let gold = gold_labels(&annotations);
        let (joined, unmatched) = join_predictions(&records, &gold);
        unmatched_gold = unmatched;
        if unmatched > 0 {
            warnings.push(format!(
                "{unmatched} prediction records had no matching gold annotation"
            ));
        }
        let reports = build_eval_reports(
            &joined,
            &cfg.granularity,
            cfg.kappa_weights,
            &cfg.exclude_doc_types,
        );
        scorediff_dropped_l5 = reports
            .iter()
            .filter(|r| r.level == crate::eval::GranularityLevel::L5 && r.doc_type.is_none())
            .map(|r| r.n_scorediff_dropped)
            .sum();
        let eval_dir = cfg.out_dir.join("eval");
        fs::create_dir_all(&eval_dir)?;
        let file = fs::File::create(eval_dir.join("report.csv"))?;
        write_eval_csv(&reports, file).map_err(std::io::Error::from)?;
        fs::write(eval_dir.join("report.md"), render_eval_markdown(&reports))?;
        stages.push("eval".into());

        // Heterogeneity regressions over the configured strategy.
        let metadata = document_metadata(&docs);
        let observations = build_pair_observations(
            &joined,
            cfg.regression_strategy,
            &metadata,
            &cfg.granularity,
            &cfg.exclude_doc_types,
        );
        let opts = EncodeOptions {
            reference_model: cfg.reference_model.clone(),
            reference_subject: cfg
                .reference_subject
                .unwrap_or(crate::corpus::SubjectCategory::Stem),
            standardize_word_count: cfg.standardize_word_count,
        };
        let regress_dir = cfg.out_dir.join("regress");
        fs::create_dir_all(&regress_dir)?;
        let mut fitted = Vec::new();
        for dependent in [Dependent::Accuracy, Dependent::ScoreDiff] {
            for &level in &cfg.granularity {
                match run_eq1(&observations, level, dependent, &opts) {
                    Ok(result) => {
                        let name = format!(
                            "{}_{}.csv",
                            dependent.as_str(),
                            level.as_str().to_lowercase()
                        );
                        let file = fs::File::create(regress_dir.join(name))?;
                        result.write_csv(file).map_err(std::io::Error::from)?;
                        fitted.push(result);
                    }
                    Err(err) => warnings.push(format!(
                        "regression {} {} skipped: {err}",
                        dependent.as_str(),
                        level.as_str()
                    )),
                }
            }
        }
        if !fitted.is_empty() {
            let refs: Vec<&_> = fitted.iter().collect();
            fs::write(regress_dir.join("summary.md"), render_regress_markdown(&refs))?;
        }
        stages.push("regress".into());
    }

    let needs_summary = cfg.strategies.iter().any(|s| s.needs_summary());
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION"),
        config_file: "config.toml",
        seed: cfg.seed,
        parallelism: cfg.parallelism,
        kappa_weights: cfg.kappa_weights.as_str().to_string(),
        icc_variant: ICC_VARIANT,
        extraction_mode: "single_call_per_document",
        stages: stages.clone(),
        counts: ManifestCounts {
            documents: docs.len(),
            frameworks: frameworks.len(),
            strategies: cfg.strategies.len(),
            models: cfg.models.len(),
            summary_prompts_planned: if needs_summary {
                docs.len() * cfg.models.len()
            } else {
                0
            },
            scoring_cells: cells.len(),
            prediction_records: records.len(),
            failed_records,
            no_response_records,
            unmatched_gold,
            scorediff_dropped_l5,
        },
        warnings,
    };
    fs::write(
        cfg.out_dir.join("run_manifest.toml"),
        toml::to_string(&manifest).expect("manifest serializes"),
    )?;

    Ok(RunSummary {
        out_dir: cfg.out_dir.clone(),
        n_documents: docs.len(),
        n_predictions: records.len(),
        n_failed_records: failed_records,
        n_unmatched_gold: unmatched_gold,
        model_calls: gateways.iter().map(|g| g.dispatched_calls()).sum(),
        stages,
    })
}

/// Run all cells across a bounded worker pool, preserving job order.
fn run_cells(
    cfg: &RunConfig,
    cells: &[Cell],
    docs: &[CurriculumDocument],
    frameworks: &[CompetencyFramework],
    gateways: &[Gateway],
    factory: &PromptFactory,
) -> Vec<Option<Result<CellOutcome, PipelineError>>> {
    let results: Mutex<Vec<Option<Result<CellOutcome, PipelineError>>>> =
        Mutex::new((0..cells.len()).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    let workers = cfg.parallelism.min(cells.len()).max(1);

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= cells.len() {
                    break;
                }
                let cell = &cells[i];
                let outcome = score_cell(
                    &docs[cell.doc_idx],
                    &frameworks[cell.fw_idx],
                    cell.strategy,
                    factory,
                    &gateways[cell.model_idx],
                    cfg.competency_chunk_size,
                );
                results.lock().unwrap()[i] = Some(outcome);
            });
        }
    });
    results.into_inner().unwrap()
}
