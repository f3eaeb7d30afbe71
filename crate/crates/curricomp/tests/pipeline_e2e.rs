//! End-to-end pipeline behavior on synthetic corpora with the mock backend.

mod common;

use std::collections::BTreeSet;
use std::fs;

use common::*;
use curricomp::framework::{CompetencyFramework, FrameworkKey};
use curricomp::pipeline::{execute, load_predictions};

#[test]
fn one_strategy_one_model_yields_one_record_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    // 8 courses x 5 doc types = 40 documents against the 8 EU competencies.
    let run = synth_run_config(dir.path(), 8, 3, "ZERO", &["mock-a"], "eu");
    let summary = execute(&run.config, &run.raw).unwrap();
    assert_eq!(summary.n_documents, 40);
    assert_eq!(summary.n_predictions, 320);

    let records = load_predictions(&run.config.out_dir.join("predictions.csv")).unwrap();
    assert_eq!(records.len(), 320);
    // Completeness: every cell exactly once, each with a label.
    let cells: BTreeSet<_> = records
        .iter()
        .map(|r| {
            (
                r.course_id.clone(),
                r.doc_type,
                r.framework,
                r.competency_id.clone(),
                r.strategy,
                r.model_name.clone(),
            )
        })
        .collect();
    assert_eq!(cells.len(), 320);
}

#[test]
fn model_call_count_decomposes_into_summaries_plus_scoring_cells() {
    let dir = tempfile::tempdir().unwrap();
    let run = synth_run_config(
        dir.path(),
        4,
        11,
        "ZERO,DEF,CQA,CQ,QA,A",
        &["mock-a", "mock-b"],
        "eu,esdc",
    );
    let summary = execute(&run.config, &run.raw).unwrap();
    let docs = 4 * 5;
    let scoring_cells = docs * 2 /* frameworks */ * 6 /* strategies */ * 2 /* models */;
    // One deduplicated extraction per (document, model): CQA, QA, and A all
    // reuse it, and it is independent of the framework.
    let summaries = docs * 2;
    assert_eq!(summary.model_calls, (scoring_cells + summaries) as u64);
}

#[test]
fn rerun_with_warm_cache_makes_no_model_calls_and_reproduces_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let run = synth_run_config(dir.path(), 3, 21, "ZERO,CQA", &["mock-a"], "eu");

    let first = execute(&run.config, &run.raw).unwrap();
    assert!(first.model_calls > 0);
    let predictions = fs::read(run.config.out_dir.join("predictions.csv")).unwrap();

    // Simulate an interrupted run by wiping the outputs; the response cache
    // survives, so the rerun completes without touching the backend.
    fs::remove_dir_all(&run.config.out_dir).unwrap();
    let second = execute(&run.config, &run.raw).unwrap();
    assert_eq!(second.model_calls, 0, "warm cache answers everything");
    let predictions_again = fs::read(run.config.out_dir.join("predictions.csv")).unwrap();
    assert_eq!(predictions, predictions_again);
}

#[test]
fn def_with_missing_definitions_aborts_before_dispatch() {
    let dir = tempfile::tempdir().unwrap();
    let mut run = synth_run_config(dir.path(), 2, 5, "DEF", &["mock-a"], "eu");

    // A framework directory whose EU file has one definition blanked.
    let fw_dir = dir.path().join("frameworks");
    fs::create_dir_all(&fw_dir).unwrap();
    let mut fw = CompetencyFramework::bundled(FrameworkKey::Eu).unwrap();
    fw.competencies[5].definition = None;
    fs::write(
        fw_dir.join("eu.json"),
        serde_json_string(&fw),
    )
    .unwrap();
    run.config.framework_dir = Some(fw_dir);

    let err = execute(&run.config, &run.raw).unwrap_err();
    let message = err.to_string();
    assert!(message.contains("definition"), "got: {message}");
    assert!(
        !run.config.out_dir.join("predictions.csv").exists(),
        "validation failure must abort before any dispatch"
    );
}

fn serde_json_string(fw: &CompetencyFramework) -> String {
    serde_json::to_string_pretty(fw).unwrap()
}

#[test]
fn run_outputs_include_reports_when_annotations_are_configured() {
    let dir = tempfile::tempdir().unwrap();
    let run = synth_run_config(dir.path(), 3, 33, "ZERO", &["mock-a", "mock-b"], "eu,onet,esdc");
    let summary = execute(&run.config, &run.raw).unwrap();
    assert_eq!(
        summary.stages,
        vec!["predict", "na_audit", "eval", "regress"]
    );
    let out = &run.config.out_dir;
    for file in [
        "config.toml",
        "predictions.csv",
        "na_audit.csv",
        "run_manifest.toml",
        "eval/report.csv",
        "eval/report.md",
        "regress/accuracy_l5.csv",
        "regress/accuracy_l2.csv",
        "regress/scorediff_l5.csv",
        "regress/scorediff_l2.csv",
        "regress/summary.md",
    ] {
        assert!(out.join(file).exists(), "missing {file}");
    }
    let eval_csv = fs::read_to_string(out.join("eval/report.csv")).unwrap();
    // 2 models x 3 frameworks x (5 doc types + all) x 4 levels, plus header.
    assert_eq!(eval_csv.lines().count(), 2 * 3 * 6 * 4 + 1);
    assert_eq!(summary.n_unmatched_gold, 0);
}

#[test]
fn excluded_doc_types_disappear_from_reports_but_not_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let mut run = synth_run_config(dir.path(), 3, 41, "ZERO", &["mock-a"], "eu");
    run.config.exclude_doc_types = vec![curricomp::DocumentType::InstructionalSchedule];
    let summary = execute(&run.config, &run.raw).unwrap();
    assert_eq!(summary.n_predictions, 3 * 5 * 8);
    let eval_csv =
        fs::read_to_string(run.config.out_dir.join("eval/report.csv")).unwrap();
    assert!(!eval_csv.contains("instructional_schedule"));
    let predictions =
        fs::read_to_string(run.config.out_dir.join("predictions.csv")).unwrap();
    assert!(predictions.contains("instructional_schedule"));
}
