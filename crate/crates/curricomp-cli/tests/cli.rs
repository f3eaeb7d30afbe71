//! End-to-end checks of the command-line interface against a synthetic run.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use curricomp::annotation::{write_annotations, AlignmentLabel, AnnotationRecord, Round};
use curricomp::corpus::{write_corpus, CurriculumDocument, DocumentType, SubjectCategory};
use curricomp::framework::{CompetencyFramework, FrameworkKey};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_curricomp"))
}

fn run_ok(cmd: &mut Command) -> String {
    let output = cmd.output().expect("command runs");
    assert!(
        output.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
    String::from_utf8_lossy(&output.stdout).into_owned()
}

struct Fixture {
    corpus_lo: PathBuf,
    corpus_ccd: PathBuf,
    annotations: PathBuf,
    config: PathBuf,
    out_dir: PathBuf,
}

fn build_fixture(dir: &Path) -> Fixture {
    let labels = [
        AlignmentLabel::S0,
        AlignmentLabel::S1,
        AlignmentLabel::S2,
        AlignmentLabel::S3,
        AlignmentLabel::Na,
    ];
    let mut lo = Vec::new();
    let mut ccd = Vec::new();
    for c in 0..4 {
        let subject = SubjectCategory::ALL[c % 4];
        lo.push(
            CurriculumDocument::new(
                format!("C{c}"),
                format!("Course {c}"),
                "DEPT",
                subject,
                DocumentType::LearningObjective,
                format!("Students master objective {c} and apply it in projects over {c} weeks."),
            )
            .unwrap(),
        );
        ccd.push(
            CurriculumDocument::new(
                format!("C{c}"),
                format!("Course {c}"),
                "DEPT",
                subject,
                DocumentType::ConciseCourseDescription,
                format!("A survey course {c} covering methods, teamwork, and presentations."),
            )
            .unwrap(),
        );
    }
    let corpus_lo = dir.join("lo.csv");
    let corpus_ccd = dir.join("ccd.csv");
    write_corpus(&corpus_lo, &lo).unwrap();
    write_corpus(&corpus_ccd, &ccd).unwrap();

    let eu = CompetencyFramework::bundled(FrameworkKey::Eu).unwrap();
    let mut annotations = Vec::new();
    for (d, doc) in lo.iter().chain(ccd.iter()).enumerate() {
        for (i, comp) in eu.competencies.iter().enumerate() {
            for (r, rater) in ["rater-1", "rater-2"].iter().enumerate() {
                annotations.push(AnnotationRecord {
                    course_id: doc.course_id.clone(),
                    doc_type: doc.doc_type,
                    framework: FrameworkKey::Eu,
                    competency_id: comp.id.clone(),
                    annotator_id: rater.to_string(),
                    round: Round::Final,
                    label: labels[(d + i + r) % 5],
                });
            }
        }
    }
    let annotations_path = dir.join("annotations.csv");
    write_annotations(&annotations_path, &annotations).unwrap();

    let out_dir = dir.join("out");
    let config = dir.join("run.toml");
    fs::write(
        &config,
        format!(
            r#"seed = 77
out_dir = {out:?}
cache_dir = {cache:?}
parallelism = 2
frameworks = ["eu"]
strategies = ["ZERO", "A"]
annotations = {ann:?}

[corpus]
learning_objective = {lo:?}
concise_course_description = {ccd:?}

[[models]]
backend = "deterministic_mock"
model_name = "mock-a"
"#,
            out = out_dir.to_str().unwrap(),
            cache = dir.join("cache").to_str().unwrap(),
            ann = annotations_path.to_str().unwrap(),
            lo = corpus_lo.to_str().unwrap(),
            ccd = corpus_ccd.to_str().unwrap(),
        ),
    )
    .unwrap();

    Fixture {
        corpus_lo,
        corpus_ccd,
        annotations: annotations_path,
        config,
        out_dir,
    }
}

#[test]
fn frameworks_subcommand_lists_and_validates() {
    let stdout = run_ok(bin().arg("frameworks"));
    assert!(stdout.contains("21 competencies"));
    assert!(stdout.contains("8 competencies"));
    assert!(stdout.contains("9 competencies"));

    let stdout = run_ok(bin().args(["frameworks", "--key", "eu"]));
    assert!(stdout.contains("Digital competence"));
}

#[test]
fn ingest_reports_counts_and_samples() {
    let dir = tempfile::tempdir().unwrap();
    let fixture = build_fixture(dir.path());
    let stdout = run_ok(bin().args([
        "ingest",
        "--input",
        fixture.corpus_lo.to_str().unwrap(),
    ]));
    assert!(stdout.contains("4 documents"));

    let sampled = dir.path().join("sampled.csv");
    run_ok(bin().args([
        "--seed",
        "5",
        "ingest",
        "--input",
        fixture.corpus_ccd.to_str().unwrap(),
        "--sample",
        "2",
        "--output",
        sampled.to_str().unwrap(),
    ]));
    let text = fs::read_to_string(&sampled).unwrap();
    assert_eq!(text.lines().count(), 3, "header plus two rows");
}

#[test]
fn full_run_then_reanalysis_via_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let fixture = build_fixture(dir.path());

    let stdout = run_ok(bin().args([
        "--config",
        fixture.config.to_str().unwrap(),
        "run",
    ]));
    assert!(stdout.contains("run complete"));
    assert!(fixture.out_dir.join("predictions.csv").exists());
    assert!(fixture.out_dir.join("eval/report.csv").exists());
    assert!(fixture.out_dir.join("na_audit.csv").exists());

    // Re-derive evaluation into a fresh directory without a config.
    let reeval = dir.path().join("reeval");
    run_ok(bin().args([
        "--out-dir",
        reeval.to_str().unwrap(),
        "eval",
        "--predictions",
        fixture.out_dir.join("predictions.csv").to_str().unwrap(),
        "--annotations",
        fixture.annotations.to_str().unwrap(),
    ]));
    assert!(reeval.join("eval/report.csv").exists());

    // Regressions need the config for corpus metadata.
    run_ok(bin().args([
        "--config",
        fixture.config.to_str().unwrap(),
        "regress",
        "--predictions",
        fixture.out_dir.join("predictions.csv").to_str().unwrap(),
        "--annotations",
        fixture.annotations.to_str().unwrap(),
    ]));
    assert!(fixture.out_dir.join("regress/summary.md").exists());

    // Re-render the Markdown report from the run directory.
    let stdout = run_ok(bin().args([
        "report",
        "--run-dir",
        fixture.out_dir.to_str().unwrap(),
    ]));
    assert!(stdout.contains("re-rendered"));
}

#[test]
fn irr_and_na_audit_read_annotation_files() {
    let dir = tempfile::tempdir().unwrap();
    let fixture = build_fixture(dir.path());

    let stdout = run_ok(bin().args([
        "irr",
        "--annotations",
        fixture.annotations.to_str().unwrap(),
        "--annotator-a",
        "rater-1",
        "--annotator-b",
        "rater-2",
        "--round",
        "final",
    ]));
    assert!(stdout.contains("kappa"));
    assert!(stdout.contains("confusion"));

    let stdout = run_ok(bin().args([
        "na-audit",
        "--annotations",
        fixture.annotations.to_str().unwrap(),
    ]));
    assert!(stdout.contains("learning_objective"));
    assert!(stdout.contains('%'));
}
