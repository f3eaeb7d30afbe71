//! Shared test support: independent metric oracles and synthetic data.
//!
//! Every oracle here recomputes its statistic straight from the definition,
//! sharing no code with the implementation it checks.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use curricomp::annotation::{AlignmentLabel, AnnotationRecord, Round};
use curricomp::corpus::{CurriculumDocument, DocumentType, SubjectCategory};
use curricomp::eval::{GranularityLevel, WeightScheme};
use curricomp::framework::{CompetencyFramework, FrameworkKey};

// ---------------------------------------------------------------------------
// Label collapse, restated independently from the taxonomy table.

/// Class index of a label at a level, written out case by case.
pub fn oracle_collapse_code(label: AlignmentLabel, level: GranularityLevel) -> usize {
    use AlignmentLabel::*;
    use GranularityLevel::*;
    match (level, label) {
        (L5, S0) => 0,
        (L5, S1) => 1,
        (L5, S2) => 2,
        (L5, S3) => 3,
        (L5, Na) => 4,
        (L4, S0) | (L4, Na) => 0,
        (L4, S1) => 1,
        (L4, S2) => 2,
        (L4, S3) => 3,
        (L3, S0) | (L3, Na) => 0,
        (L3, S1) | (L3, S2) => 1,
        (L3, S3) => 2,
        (L2, S0) | (L2, Na) => 0,
        (L2, S1) | (L2, S2) | (L2, S3) => 1,
    }
}

fn classes(level: GranularityLevel) -> usize {
    match level {
        GranularityLevel::L5 => 5,
        GranularityLevel::L4 => 4,
        GranularityLevel::L3 => 3,
        GranularityLevel::L2 => 2,
    }
}

// ---------------------------------------------------------------------------
// Classification metric oracles.

pub fn oracle_accuracy(
    gold: &[AlignmentLabel],
    pred: &[AlignmentLabel],
    level: GranularityLevel,
) -> f64 {
    let correct = gold
        .iter()
        .zip(pred)
        .filter(|(g, p)| oracle_collapse_code(**g, level) == oracle_collapse_code(**p, level))
        .count();
    correct as f64 / gold.len() as f64
}

/// Macro precision/recall/F1 over classes present in gold or predictions,
/// with the zero-denominator-means-zero rule.
pub fn oracle_macro_prf(
    gold: &[AlignmentLabel],
    pred: &[AlignmentLabel],
    level: GranularityLevel,
) -> (f64, f64, f64) {
    let k = classes(level);
    let mut p_sum = 0.0;
    let mut r_sum = 0.0;
    let mut f_sum = 0.0;
    let mut present = 0usize;
    for class in 0..k {
        let tp = gold
            .iter()
            .zip(pred)
            .filter(|(g, p)| {
                oracle_collapse_code(**g, level) == class
                    && oracle_collapse_code(**p, level) == class
            })
            .count() as f64;
        let in_gold = gold
            .iter()
            .filter(|g| oracle_collapse_code(**g, level) == class)
            .count() as f64;
        let in_pred = pred
            .iter()
            .filter(|p| oracle_collapse_code(**p, level) == class)
            .count() as f64;
        if in_gold == 0.0 && in_pred == 0.0 {
            continue;
        }
        present += 1;
        let precision = if in_pred > 0.0 { tp / in_pred } else { 0.0 };
        let recall = if in_gold > 0.0 { tp / in_gold } else { 0.0 };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        p_sum += precision;
        r_sum += recall;
        f_sum += f1;
    }
    let d = present.max(1) as f64;
    (p_sum / d, r_sum / d, f_sum / d)
}

/// Unweighted Cohen's kappa over the five nominal labels. `None` when
/// expected agreement is 1.
pub fn oracle_cohen_kappa(gold: &[AlignmentLabel], pred: &[AlignmentLabel]) -> Option<f64> {
    let n = gold.len() as f64;
    let po = gold.iter().zip(pred).filter(|(g, p)| g == p).count() as f64 / n;
    let mut pe = 0.0;
    for label in AlignmentLabel::ALL {
        let pg = gold.iter().filter(|&&g| g == label).count() as f64 / n;
        let pp = pred.iter().filter(|&&p| p == label).count() as f64 / n;
        pe += pg * pp;
    }
    if (1.0 - pe).abs() < 1e-12 {
        return None;
    }
    Some((po - pe) / (1.0 - pe))
}

/// Weighted kappa from count matrices: kappa = 1 - sum(wO)/sum(wE), with
/// E_ij = row_i * col_j / n. NA (code 4 at the 5-level) takes weight 1
/// against any scored class and 0 against itself.
pub fn oracle_weighted_kappa(
    gold: &[AlignmentLabel],
    pred: &[AlignmentLabel],
    level: GranularityLevel,
    scheme: WeightScheme,
) -> Option<f64> {
    let k = classes(level);
    let n = gold.len() as f64;
    let mut observed = vec![vec![0.0f64; k]; k];
    for (g, p) in gold.iter().zip(pred) {
        observed[oracle_collapse_code(*g, level)][oracle_collapse_code(*p, level)] += 1.0;
    }
    let row_sums: Vec<f64> = observed.iter().map(|r| r.iter().sum()).collect();
    let col_sums: Vec<f64> = (0..k).map(|j| observed.iter().map(|r| r[j]).sum()).collect();

    let weight = |i: usize, j: usize| -> f64 {
        if level == GranularityLevel::L5 && (i == 4 || j == 4) {
            return if i == j { 0.0 } else { 1.0 };
        }
        let d = (i as f64 - j as f64).abs() / (k as f64 - 1.0);
        match scheme {
            WeightScheme::Quadratic => d * d,
            WeightScheme::Linear => d,
        }
    };

    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..k {
        for j in 0..k {
            num += weight(i, j) * observed[i][j];
            den += weight(i, j) * row_sums[i] * col_sums[j] / n;
        }
    }
    if den.abs() < 1e-9 {
        return None;
    }
    Some(1.0 - num / den)
}

/// ICC(2,1) from a two-way ANOVA computed via explicit cell residuals.
/// `None` when fewer than three subjects survive or the data has no
/// variance.
pub fn oracle_icc2_1(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len();
    if n < 3 {
        return None;
    }
    let nf = n as f64;
    let k = 2.0f64;
    let grand: f64 = (a.iter().sum::<f64>() + b.iter().sum::<f64>()) / (nf * k);
    let col_means = [
        a.iter().sum::<f64>() / nf,
        b.iter().sum::<f64>() / nf,
    ];

    let mut ss_rows = 0.0;
    let mut ss_err = 0.0;
    let mut ss_total = 0.0;
    for i in 0..n {
        let row_mean = (a[i] + b[i]) / 2.0;
        ss_rows += k * (row_mean - grand).powi(2);
        for (j, x) in [a[i], b[i]].into_iter().enumerate() {
            ss_total += (x - grand).powi(2);
            let residual = x - row_mean - col_means[j] + grand;
            ss_err += residual * residual;
        }
    }
    let ss_cols = nf * ((col_means[0] - grand).powi(2) + (col_means[1] - grand).powi(2));
    if ss_total.abs() < 1e-12 {
        return None;
    }
    let ms_rows = ss_rows / (nf - 1.0);
    let ms_cols = ss_cols / (k - 1.0);
    let ms_err = ss_err / ((nf - 1.0) * (k - 1.0));
    let den = ms_rows + (k - 1.0) * ms_err + (k / nf) * (ms_cols - ms_err);
    if den.abs() < 1e-12 {
        return None;
    }
    Some((ms_rows - ms_err) / den)
}

/// ICC(2,1) on collapsed codes at a level, excluding NA pairs at the
/// 5-level.
pub fn oracle_icc_at_level(
    gold: &[AlignmentLabel],
    pred: &[AlignmentLabel],
    level: GranularityLevel,
) -> Option<f64> {
    let mut a = Vec::new();
    let mut b = Vec::new();
    for (g, p) in gold.iter().zip(pred) {
        if level == GranularityLevel::L5
            && (*g == AlignmentLabel::Na || *p == AlignmentLabel::Na)
        {
            continue;
        }
        a.push(oracle_collapse_code(*g, level) as f64);
        b.push(oracle_collapse_code(*p, level) as f64);
    }
    oracle_icc2_1(&a, &b)
}

// ---------------------------------------------------------------------------
// OLS normal-equation oracle.

pub struct OracleOls {
    pub beta: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub r2: f64,
    pub adjusted_r2: f64,
}

/// Solve (X'X) beta = X'y by Gauss-Jordan with partial pivoting and compute
/// classical standard errors from the explicitly inverted normal matrix.
pub fn oracle_ols(x: &[Vec<f64>], y: &[f64]) -> OracleOls {
    let n = x.len();
    let p = x[0].len();
    // Normal matrix and right-hand side by explicit summation.
    let mut xtx = vec![vec![0.0f64; p]; p];
    let mut xty = vec![0.0f64; p];
    for row in 0..n {
        for i in 0..p {
            xty[i] += x[row][i] * y[row];
            for j in 0..p {
                xtx[i][j] += x[row][i] * x[row][j];
            }
        }
    }
    let inverse = invert(&xtx);
    let mut beta = vec![0.0f64; p];
    for i in 0..p {
        for j in 0..p {
            beta[i] += inverse[i][j] * xty[j];
        }
    }

    let mut rss = 0.0;
    for row in 0..n {
        let fitted: f64 = (0..p).map(|j| x[row][j] * beta[j]).sum();
        rss += (y[row] - fitted).powi(2);
    }
    let sigma2 = rss / (n - p) as f64;
    let std_errors: Vec<f64> = (0..p).map(|j| (sigma2 * inverse[j][j]).sqrt()).collect();

    let y_mean: f64 = y.iter().sum::<f64>() / n as f64;
    let tss: f64 = y.iter().map(|v| (v - y_mean).powi(2)).sum();
    let r2 = if tss > 0.0 { 1.0 - rss / tss } else { 1.0 };
    let adjusted_r2 = 1.0 - (1.0 - r2) * (n as f64 - 1.0) / (n - p) as f64;

    OracleOls {
        beta,
        std_errors,
        r2,
        adjusted_r2,
    }
}

fn invert(m: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let p = m.len();
    let mut a: Vec<Vec<f64>> = m
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut wide = row.clone();
            wide.extend((0..p).map(|j| if i == j { 1.0 } else { 0.0 }));
            wide
        })
        .collect();
    for col in 0..p {
        let pivot = (col..p)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        a.swap(col, pivot);
        let lead = a[col][col];
        assert!(lead.abs() > 1e-12, "oracle matrix is singular");
        for value in a[col].iter_mut() {
            *value /= lead;
        }
        let pivot_row = a[col].clone();
        for (i, row) in a.iter_mut().enumerate() {
            if i == col {
                continue;
            }
            let factor = row[col];
            for (value, pivot_value) in row.iter_mut().zip(&pivot_row) {
                *value -= factor * pivot_value;
            }
        }
    }
    a.into_iter().map(|row| row[p..].to_vec()).collect()
}

// ---------------------------------------------------------------------------
// Synthetic data.

const TOPIC_WORDS: &[&str] = &[
    "statistics",
    "rhetoric",
    "thermodynamics",
    "ceramics",
    "macroeconomics",
    "linguistics",
    "genetics",
    "logistics",
    "philosophy",
    "robotics",
];

const ACTIVITY_WORDS: &[&str] = &[
    "analyze",
    "present",
    "debate",
    "model",
    "survey",
    "prototype",
    "critique",
    "simulate",
    "document",
    "measure",
];

/// Deterministic synthetic corpus: `courses` courses, each with one document
/// of every type, spread over subjects with varied word counts.
pub fn synth_corpus(courses: usize, seed: u64) -> Vec<CurriculumDocument> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut docs = Vec::new();
    for c in 0..courses {
        let course_id = format!("C{c:03}");
        let subject = SubjectCategory::ALL[c % 4];
        let topic = TOPIC_WORDS[c % TOPIC_WORDS.len()];
        for (t, doc_type) in DocumentType::ALL.into_iter().enumerate() {
            let sentences = 2 + ((c * 5 + t) % 7) + rng.random_range(0..3);
            let mut text = String::new();
            for s in 0..sentences {
                let verb = ACTIVITY_WORDS[(c + s + t) % ACTIVITY_WORDS.len()];
                text.push_str(&format!(
                    "Students {verb} key problems in {topic} during unit {s} with graded feedback. "
                ));
            }
            docs.push(
                CurriculumDocument::new(
                    course_id.clone(),
                    format!("Course {c}: {topic}"),
                    format!("DEPT{}", c % 6),
                    subject,
                    doc_type,
                    text.trim_end(),
                )
                .unwrap(),
            );
        }
    }
    docs
}

/// Write one corpus CSV per document type; returns the path map for a run
/// config.
pub fn write_corpus_files(
    dir: &Path,
    docs: &[CurriculumDocument],
) -> BTreeMap<DocumentType, PathBuf> {
    let mut paths = BTreeMap::new();
    for doc_type in DocumentType::ALL {
        let subset: Vec<CurriculumDocument> = docs
            .iter()
            .filter(|d| d.doc_type == doc_type)
            .cloned()
            .collect();
        if subset.is_empty() {
            continue;
        }
        let path = dir.join(format!("{doc_type}.csv"));
        curricomp::corpus::write_corpus(&path, &subset).unwrap();
        paths.insert(doc_type, path);
    }
    paths
}

fn hash_label(parts: &[&str], seed: u64) -> AlignmentLabel {
    use std::hash::{Hash, Hasher};
    let mut hasher = std::collections::hash_map::DefaultHasher::new();
    seed.hash(&mut hasher);
    for p in parts {
        p.hash(&mut hasher);
    }
    AlignmentLabel::ALL[(hasher.finish() % 5) as usize]
}

/// Deterministic gold annotations for every (document, framework,
/// competency) of the corpus, single final-round annotator.
pub fn synth_annotations(
    docs: &[CurriculumDocument],
    frameworks: &[FrameworkKey],
    seed: u64,
) -> Vec<AnnotationRecord> {
    let mut records = Vec::new();
    for doc in docs {
        for &key in frameworks {
            let fw = CompetencyFramework::bundled(key).unwrap();
            for c in &fw.competencies {
                records.push(AnnotationRecord {
                    course_id: doc.course_id.clone(),
                    doc_type: doc.doc_type,
                    framework: key,
                    competency_id: c.id.clone(),
                    annotator_id: "rater-1".into(),
                    round: Round::Final,
                    label: hash_label(
                        &[&doc.course_id, doc.doc_type.as_str(), key.as_str(), &c.id],
                        seed,
                    ),
                });
            }
        }
    }
    records
}

/// Random label vectors for metric oracle comparisons.
pub fn random_label_pairs(
    rng: &mut ChaCha8Rng,
    n: usize,
) -> (Vec<AlignmentLabel>, Vec<AlignmentLabel>) {
    let gold = (0..n)
        .map(|_| AlignmentLabel::ALL[rng.random_range(0..5)])
        .collect();
    let pred = (0..n)
        .map(|_| AlignmentLabel::ALL[rng.random_range(0..5)])
        .collect();
    (gold, pred)
}

/// A ready-to-run config over a synthetic corpus written into `dir`.
pub struct SynthRun {
    pub config: curricomp::RunConfig,
    pub raw: String,
}

pub fn synth_run_config(
    dir: &Path,
    courses: usize,
    seed: u64,
    strategies: &str,
    models: &[&str],
    frameworks: &str,
) -> SynthRun {
    let docs = synth_corpus(courses, seed);
    let corpus_dir = dir.join("corpus");
    std::fs::create_dir_all(&corpus_dir).unwrap();
    let paths = write_corpus_files(&corpus_dir, &docs);

    let keys: Vec<FrameworkKey> = frameworks
        .split(',')
        .map(|s| FrameworkKey::parse(s).unwrap())
        .collect();
    let annotations = synth_annotations(&docs, &keys, seed ^ 0x5eed);
    let annotations_path = dir.join("annotations.csv");
    curricomp::annotation::write_annotations(&annotations_path, &annotations).unwrap();

    let mut corpus_lines = String::new();
    for (doc_type, path) in &paths {
        corpus_lines.push_str(&format!("{doc_type} = {:?}\n", path.to_str().unwrap()));
    }
    let model_blocks: String = models
        .iter()
        .map(|name| {
            format!(
                "[[models]]\nbackend = \"deterministic_mock\"\nmodel_name = \"{name}\"\n"
            )
        })
        .collect();
    let strategy_list: Vec<String> = strategies
        .split(',')
        .map(|s| format!("{:?}", s.trim()))
        .collect();
    let framework_toml: Vec<String> = keys.iter().map(|k| format!("\"{k}\"")).collect();

    let raw = format!(
        r#"seed = {seed}
out_dir = {out:?}
cache_dir = {cache:?}
parallelism = 3
frameworks = [{frameworks}]
strategies = [{strategies}]
annotations = {annotations:?}

[corpus]
{corpus_lines}
{model_blocks}"#,
        out = dir.join("out").to_str().unwrap(),
        cache = dir.join("cache").to_str().unwrap(),
        frameworks = framework_toml.join(", "),
        strategies = strategy_list.join(", "),
        annotations = annotations_path.to_str().unwrap(),
    );
    let config: curricomp::RunConfig = toml::from_str(&raw).expect("synth config parses");
    SynthRun { config, raw }
}
