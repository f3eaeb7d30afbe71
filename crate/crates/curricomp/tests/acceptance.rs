//! Acceptance suite: one test per criterion, each printing a pass line and
//! enforcing its stated tolerance and runtime budget.

mod common;

use std::fs;
use std::time::Instant;

use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use curricomp::annotation::{
    bundled_score_distribution, cohen_kappa, distribution_probabilities, expand_distribution,
    na_rate, AlignmentLabel,
};
use curricomp::corpus::{CurriculumDocument, DocumentType, SubjectCategory};
use curricomp::eval::{
    collapse, icc_at_level, mcg_accuracy, weighted_kappa, GranularityLevel, WeightScheme,
};
use curricomp::framework::{CompetencyFramework, FrameworkKey};
use curricomp::gateway::parse_scores;
use curricomp::pipeline::execute;
use curricomp::prompt::{select_question_set, PromptError, PromptFactory, Strategy};
use curricomp::regression::fit_ols;

use AlignmentLabel::{Na, S0, S1, S2, S3};
use GranularityLevel::{L2, L3, L4, L5};

#[test]
fn acceptance_01_collapse_table_exactness() {
    let started = Instant::now();
    // (label, level) -> (class code, display), all twenty cells.
    let expected: [(AlignmentLabel, GranularityLevel, usize, &str); 20] = [
        (S3, L5, 3, "3"),
        (S2, L5, 2, "2"),
        (S1, L5, 1, "1"),
        (S0, L5, 0, "0"),
        (Na, L5, 4, "NA"),
        (S3, L4, 3, "3"),
        (S2, L4, 2, "2"),
        (S1, L4, 1, "1"),
        (S0, L4, 0, "0&NA"),
        (Na, L4, 0, "0&NA"),
        (S3, L3, 2, "3"),
        (S2, L3, 1, "1&2"),
        (S1, L3, 1, "1&2"),
        (S0, L3, 0, "0&NA"),
        (Na, L3, 0, "0&NA"),
        (S3, L2, 1, "covered"),
        (S2, L2, 1, "covered"),
        (S1, L2, 1, "covered"),
        (S0, L2, 0, "0&NA"),
        (Na, L2, 0, "0&NA"),
    ];
    for (label, level, code, display) in expected {
        let got = collapse(label, level);
        assert_eq!(got.code, code, "{label} at {level}");
        assert_eq!(got.display, display, "{label} at {level}");
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
    println!("PASS collapse-table exactness: 20/20 cells in {elapsed:?}");
}

#[test]
fn acceptance_02_metric_oracle_equivalence() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xACC2);
    let mut checked = 0usize;
    for instance in 0..200 {
        let n = rng.random_range(4..=50);
        let (gold, pred) = random_label_pairs(&mut rng, n);
        for level in GranularityLevel::ALL {
            let acc = curricomp::eval::ConfusionMatrix::from_labels(&gold, &pred, level)
                .unwrap()
                .accuracy();
            let acc_oracle = oracle_accuracy(&gold, &pred, level);
            assert!(
                (acc - acc_oracle).abs() < 1e-9,
                "accuracy, instance {instance} at {level}"
            );

            let prf = curricomp::eval::ConfusionMatrix::from_labels(&gold, &pred, level)
                .unwrap()
                .macro_prf();
            let (op, or, of) = oracle_macro_prf(&gold, &pred, level);
            assert!((prf.precision - op).abs() < 1e-9, "macro-P at {level}");
            assert!((prf.recall - or).abs() < 1e-9, "macro-R at {level}");
            assert!((prf.f1 - of).abs() < 1e-9, "macro-F1 at {level}");

            for scheme in [WeightScheme::Quadratic, WeightScheme::Linear] {
                match (
                    weighted_kappa(&gold, &pred, level, scheme),
                    oracle_weighted_kappa(&gold, &pred, level, scheme),
                ) {
                    (Ok(got), Some(want)) => assert!(
                        (got - want).abs() < 1e-9,
                        "weighted kappa {scheme:?} at {level}: {got} vs {want}"
                    ),
                    (Err(_), None) => {}
                    (got, want) => {
                        panic!("weighted-kappa definedness mismatch: {got:?} vs {want:?}")
                    }
                }
            }

            match (
                icc_at_level(&gold, &pred, level),
                oracle_icc_at_level(&gold, &pred, level),
            ) {
                (Ok(got), Some(want)) => assert!(
                    (got - want).abs() < 1e-9,
                    "ICC at {level}: {got} vs {want}"
                ),
                (Err(_), None) => {}
                (got, want) => panic!("ICC definedness mismatch: {got:?} vs {want:?}"),
            }
            checked += 1;
        }

        match (oracle_cohen_kappa(&gold, &pred), cohen_kappa(&gold, &pred)) {
            (Some(want), Ok(got)) => {
                assert!((got - want).abs() < 1e-9, "unweighted kappa")
            }
            (None, Err(_)) => {}
            (want, got) => panic!("kappa definedness mismatch: {got:?} vs {want:?}"),
        }
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 30.0, "took {elapsed:?}");
    println!(
        "PASS metric-oracle equivalence: 200 instances x 4 levels ({checked} level-slices) \
         within 1e-9 in {elapsed:?}"
    );
}

#[test]
fn acceptance_03_hand_computed_anchors() {
    let chance = cohen_kappa(&[S3, S0, S3, S0], &[S3, S0, S0, S3]).unwrap();
    assert_eq!(chance, 0.0, "chance-level anchor must be exact");
    let inverse = cohen_kappa(&[S3, S3, S0, S0], &[S0, S0, S3, S3]).unwrap();
    assert_eq!(inverse, -1.0, "total-disagreement anchor must be exact");

    // At two classes the 0/1 weights collapse weighted kappa onto the
    // unweighted statistic.
    let mut rng = ChaCha8Rng::seed_from_u64(0xACC3);
    let mut compared = 0usize;
    while compared < 100 {
        let n = rng.random_range(4..=40);
        let (gold, pred) = random_label_pairs(&mut rng, n);
        let binarize = |labels: &[AlignmentLabel]| -> Vec<AlignmentLabel> {
            labels
                .iter()
                .map(|&l| if collapse(l, L2).code == 1 { S3 } else { S0 })
                .collect()
        };
        match (
            weighted_kappa(&gold, &pred, L2, WeightScheme::Quadratic),
            cohen_kappa(&binarize(&gold), &binarize(&pred)),
        ) {
            (Ok(wk), Ok(uk)) => {
                assert!((wk - uk).abs() < 1e-12, "{wk} vs {uk}");
                compared += 1;
            }
            (Err(_), Err(_)) => {}
            (wk, uk) => panic!("definedness mismatch: {wk:?} vs {uk:?}"),
        }
    }
    println!(
        "PASS hand-computed anchors: kappa anchors exact; weighted==unweighted at 2 classes \
         on {compared} instances within 1e-12"
    );
}

#[test]
fn acceptance_04_score_distribution_fixture() {
    // Reported NA percentages per framework x document type.
    let expected_na: [(FrameworkKey, DocumentType, f64); 15] = [
        (FrameworkKey::Eu, DocumentType::LearningObjective, 18.0),
        (FrameworkKey::Eu, DocumentType::ConciseCourseDescription, 21.9),
        (FrameworkKey::Eu, DocumentType::DetailedCourseDescription, 21.2),
        (FrameworkKey::Eu, DocumentType::LearningActivityContent, 5.9),
        (FrameworkKey::Eu, DocumentType::InstructionalSchedule, 26.6),
        (FrameworkKey::Onet, DocumentType::LearningObjective, 20.7),
        (FrameworkKey::Onet, DocumentType::ConciseCourseDescription, 26.6),
        (FrameworkKey::Onet, DocumentType::DetailedCourseDescription, 24.0),
        (FrameworkKey::Onet, DocumentType::LearningActivityContent, 24.9),
        (FrameworkKey::Onet, DocumentType::InstructionalSchedule, 45.0),
        (FrameworkKey::Esdc, DocumentType::LearningObjective, 11.9),
        (FrameworkKey::Esdc, DocumentType::ConciseCourseDescription, 13.3),
        (FrameworkKey::Esdc, DocumentType::DetailedCourseDescription, 20.7),
        (FrameworkKey::Esdc, DocumentType::LearningActivityContent, 9.4),
        (FrameworkKey::Esdc, DocumentType::InstructionalSchedule, 35.6),
    ];
    let rows = bundled_score_distribution();
    let records = expand_distribution(&rows);
    let rates = na_rate(&records).unwrap();
    for (framework, doc_type, expected_percent) in expected_na {
        let got = rates
            .iter()
            .find(|r| r.framework == framework && r.doc_type == doc_type)
            .unwrap_or_else(|| panic!("missing group {framework}/{doc_type}"));
        let got_percent = got.na_fraction * 100.0;
        assert!(
            (got_percent - expected_percent).abs() < 0.1,
            "{framework}/{doc_type}: {got_percent:.3}% vs {expected_percent}%"
        );
    }

    let probs = distribution_probabilities(
        &rows,
        FrameworkKey::Eu,
        DocumentType::ConciseCourseDescription,
    )
    .unwrap();
    let mcg = mcg_accuracy(&probs).unwrap();
    assert!(
        (mcg - 0.409).abs() < 0.001,
        "EU concise-description majority baseline: {mcg}"
    );
    println!(
        "PASS score-distribution fixture: 15 NA rates within 0.1pp, majority baseline \
         {mcg:.4} within 0.001 of 0.409"
    );
}

#[test]
fn acceptance_05_ols_correctness() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xACC5);

    // Random full-rank systems against the normal-equation oracle.
    for instance in 0..100 {
        let p = rng.random_range(2..=20);
        let n = rng.random_range((p + 2).max(30)..=200);
        let gauss = |rng: &mut ChaCha8Rng| -> f64 {
            let u1: f64 = rng.random_range(1e-12..1.0);
            let u2: f64 = rng.random_range(0.0..1.0);
            (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
        };
        let mut x_rows = vec![vec![0.0f64; p]; n];
        for row in x_rows.iter_mut() {
            row[0] = 1.0;
            for value in row.iter_mut().skip(1) {
                *value = gauss(&mut rng);
            }
        }
        let y_vec: Vec<f64> = (0..n).map(|_| gauss(&mut rng)).collect();

        let x = nalgebra::DMatrix::from_fn(n, p, |i, j| x_rows[i][j]);
        let y = nalgebra::DVector::from_column_slice(&y_vec);
        let fit = fit_ols(&x, &y).unwrap();
        let oracle = oracle_ols(&x_rows, &y_vec);
        for j in 0..p {
            let scale = oracle.beta[j].abs().max(1.0);
            assert!(
                (fit.estimates[j] - oracle.beta[j]).abs() <= 1e-6 * scale,
                "instance {instance}, coefficient {j}: {} vs {}",
                fit.estimates[j],
                oracle.beta[j]
            );
        }
        // Adjusted R^2 equals the closed form exactly as computed from the
        // fit's own R^2, and the oracle's within 1e-9.
        let closed_form =
            1.0 - (1.0 - fit.r2) * (n as f64 - 1.0) / (n as f64 - p as f64);
        assert!((fit.adjusted_r2 - closed_form).abs() < 1e-9);
        assert!((fit.adjusted_r2 - oracle.adjusted_r2).abs() < 1e-9);
    }

    // Known-coefficient recovery at n = 10,000 (three reported standard
    // errors), on an Eq-1-shaped design.
    let obs_count = 10_000;
    let docs = [
        DocumentType::LearningObjective,
        DocumentType::InstructionalSchedule,
        DocumentType::ConciseCourseDescription,
    ];
    let mut x_rows = Vec::with_capacity(obs_count);
    for _ in 0..obs_count {
        let dt = docs[rng.random_range(0..3)];
        let wc: f64 = rng.random_range(-2.0..2.0);
        x_rows.push(vec![
            1.0,
            if dt == DocumentType::InstructionalSchedule { 1.0 } else { 0.0 },
            if dt == DocumentType::ConciseCourseDescription { 1.0 } else { 0.0 },
            wc,
        ]);
    }
    let truth = [0.5, -0.2, 0.1, 0.05];
    let y_vec: Vec<f64> = x_rows
        .iter()
        .map(|row| {
            let mean: f64 = row.iter().zip(truth).map(|(x, b)| x * b).sum();
            let u1: f64 = rng.random_range(1e-12..1.0);
            let u2: f64 = rng.random_range(0.0..1.0);
            mean + 0.1 * (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
        })
        .collect();
    let x = nalgebra::DMatrix::from_fn(obs_count, 4, |i, j| x_rows[i][j]);
    let y = nalgebra::DVector::from_column_slice(&y_vec);
    let fit = fit_ols(&x, &y).unwrap();
    for (j, &true_coef) in truth.iter().enumerate() {
        assert!(
            (fit.estimates[j] - true_coef).abs() <= 3.0 * fit.std_errors[j],
            "coefficient {j}: {} vs {} (3se {})",
            fit.estimates[j],
            true_coef,
            3.0 * fit.std_errors[j]
        );
    }

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 60.0, "took {elapsed:?}");
    println!(
        "PASS OLS correctness: 100 oracle systems at 1e-6 relative, known-coefficient \
         recovery at n=10000, adjusted R2 closed form at 1e-9, in {elapsed:?}"
    );
}

#[test]
fn acceptance_06_end_to_end_determinism() {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let run = synth_run_config(
        dir.path(),
        10,
        424_242,
        "ZERO,DEF,CQA,CQ,QA,A",
        &["mock-small", "mock-large"],
        "onet,eu,esdc",
    );

    let first = execute(&run.config, &run.raw).unwrap();
    let single_run = started.elapsed();
    let collect = |root: &std::path::Path| -> Vec<(String, Vec<u8>)> {
        let mut files = Vec::new();
        let mut stack = vec![root.to_path_buf()];
        while let Some(dir) = stack.pop() {
            for entry in fs::read_dir(&dir).unwrap() {
                let path = entry.unwrap().path();
                if path.is_dir() {
                    stack.push(path);
                } else {
                    let rel = path.strip_prefix(root).unwrap().to_string_lossy().to_string();
                    files.push((rel, fs::read(&path).unwrap()));
                }
            }
        }
        files.sort();
        files
    };
    let first_tree = collect(&run.config.out_dir);

    // Second run from scratch: wipe outputs and the response cache.
    fs::remove_dir_all(&run.config.out_dir).unwrap();
    fs::remove_dir_all(&run.config.cache_dir).unwrap();
    let second = execute(&run.config, &run.raw).unwrap();
    let second_tree = collect(&run.config.out_dir);

    assert_eq!(first.n_predictions, second.n_predictions);
    assert_eq!(first_tree.len(), second_tree.len());
    for ((name_a, bytes_a), (name_b, bytes_b)) in first_tree.iter().zip(&second_tree) {
        assert_eq!(name_a, name_b);
        assert_eq!(bytes_a, bytes_b, "{name_a} differs between runs");
    }
    // 10 courses x 5 types x 38 competencies x 6 strategies x 2 models.
    assert_eq!(first.n_predictions, 10 * 5 * 38 * 6 * 2);
    assert!(
        single_run.as_secs_f64() < 300.0,
        "single run took {single_run:?}"
    );
    println!(
        "PASS end-to-end determinism: {} files byte-identical across two cold runs; \
         single run in {single_run:?}",
        first_tree.len()
    );
}

#[test]
fn acceptance_07_strategy_input_contract() {
    let factory = PromptFactory::default();
    let doc = CurriculumDocument::new(
        "C1",
        "Fieldwork",
        "GEO",
        SubjectCategory::Stem,
        DocumentType::LearningObjective,
        "Students plan and execute field measurements.",
    )
    .unwrap();
    let fw = CompetencyFramework::bundled(FrameworkKey::Eu).unwrap();
    let qs = select_question_set(doc.doc_type);
    let summary = curricomp::prompt::StructuredSummary {
        course_id: doc.course_id.clone(),
        doc_type: doc.doc_type,
        answers: qs
            .labels()
            .iter()
            .map(|l| (l.to_string(), format!("answer for {l}")))
            .collect(),
        raw_model_text: String::new(),
    };

    let mut accepted_total = 0usize;
    for strategy in Strategy::ALL {
        let mut accepted = Vec::new();
        for mask in 0..8u8 {
            let with_doc = mask & 1 != 0;
            let with_qs = mask & 2 != 0;
            let with_summary = mask & 4 != 0;
            match factory.render_scoring_prompt(
                strategy,
                with_doc.then_some(&doc),
                &fw,
                with_qs.then_some(qs),
                with_summary.then_some(&summary),
            ) {
                Ok(_) => accepted.push(mask),
                Err(PromptError::StrategyInputMismatch { .. }) => {}
                Err(other) => panic!("unexpected error for {strategy}: {other}"),
            }
        }
        assert_eq!(
            accepted.len(),
            1,
            "{strategy} must accept exactly one combination, got {accepted:?}"
        );
        accepted_total += 1;
    }
    println!(
        "PASS strategy-input contract: {accepted_total}/6 strategies accept exactly one of \
         8 input combinations"
    );
}

#[test]
fn acceptance_08_parser_totality_fuzz() {
    let fw = CompetencyFramework::bundled(FrameworkKey::Esdc).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0xACC8);

    // A valid response to mutate.
    let valid: Vec<String> = fw
        .competencies
        .iter()
        .map(|c| format!("{}: {}", c.name, ["0", "1", "2", "3", "NA"][c.id.len() % 5]))
        .collect();

    let mut checked = 0usize;
    for case in 0..10_000usize {
        let raw: String = match case % 3 {
            // Random bytes, lossily decoded.
            0 => {
                let len = rng.random_range(0..400);
                let bytes: Vec<u8> = (0..len).map(|_| rng.random::<u8>()).collect();
                String::from_utf8_lossy(&bytes).into_owned()
            }
            // Valid output truncated at an arbitrary char boundary.
            1 => {
                let full = valid.join("\n");
                let cut = rng.random_range(0..=full.chars().count());
                full.chars().take(cut).collect()
            }
            // Lines shuffled, some dropped, garbage interleaved.
            _ => {
                let mut lines = valid.clone();
                for i in (1..lines.len()).rev() {
                    lines.swap(i, rng.random_range(0..=i));
                }
                lines.truncate(rng.random_range(0..=lines.len()));
                if rng.random_bool(0.5) {
                    lines.insert(
                        rng.random_range(0..=lines.len()),
                        "== not a competency line ==".into(),
                    );
                }
                lines.join("\n")
            }
        };

        let parsed = parse_scores(&raw, &fw);
        let mut accounted: Vec<&str> = parsed.labels.keys().map(|s| s.as_str()).collect();
        accounted.extend(parsed.failures.iter().map(|(id, _)| id.as_str()));
        accounted.sort_unstable();
        let mut expected: Vec<&str> = fw.competencies.iter().map(|c| c.id.as_str()).collect();
        expected.sort_unstable();
        assert_eq!(accounted, expected, "case {case} accounting");
        checked += 1;
    }
    println!("PASS parser totality: {checked} fuzzed inputs, every competency accounted once");
}

#[test]
fn acceptance_09_framework_fixtures() {
    let onet = CompetencyFramework::bundled(FrameworkKey::Onet).unwrap();
    let eu = CompetencyFramework::bundled(FrameworkKey::Eu).unwrap();
    let esdc = CompetencyFramework::bundled(FrameworkKey::Esdc).unwrap();
    assert_eq!(onet.competencies.len(), 21);
    assert_eq!(eu.competencies.len(), 8);
    assert_eq!(esdc.competencies.len(), 9);

    let onet_names: Vec<&str> = onet.competency_names();
    for name in [
        "Complex problem solving",
        "Critical thinking",
        "Judgment and decision making",
        "Category flexibility",
        "Perceptual speed",
        "Concerns for others",
        "Achievement/effort",
        "Oral expression",
        "Written comprehension",
    ] {
        assert!(onet_names.contains(&name), "missing {name}");
    }
    let eu_names = eu.competency_names();
    for name in [
        "Literacy competence",
        "Multilingual competence",
        "Digital competence",
        "Citizenship competence",
        "Entrepreneurship competence",
    ] {
        assert!(eu_names.contains(&name), "missing {name}");
    }
    let esdc_names = esdc.competency_names();
    for name in ["Adaptability", "Creativity and Innovation", "Numeracy", "Writing"] {
        assert!(esdc_names.contains(&name), "missing {name}");
    }

    // Blanking a single definition must fail definition-grounded validation.
    let mut broken = eu.clone();
    broken.competencies[4].definition = Some(String::new());
    assert!(broken.require_definitions().is_err());
    let factory = PromptFactory::default();
    let doc = CurriculumDocument::new(
        "C1",
        "T",
        "D",
        SubjectCategory::Stem,
        DocumentType::LearningObjective,
        "Students write proofs.",
    )
    .unwrap();
    let err = factory
        .render_scoring_prompt(Strategy::Def, Some(&doc), &broken, None, None)
        .unwrap_err();
    assert!(matches!(err, PromptError::MissingDefinition(_)));
    println!(
        "PASS framework fixtures: 21/8/9 competencies with expected names; definition \
         validation rejects a blanked entry"
    );
}
