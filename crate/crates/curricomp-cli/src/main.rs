//! Command-line frontend wiring the pipeline: ingest corpora, run strategies
//! against models, evaluate, regress, and emit reports.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use curricomp::annotation::{
    disagreement_reports, load_annotations, na_rate, AlignmentLabel, Round,
};
use curricomp::corpus::{load_corpus, stratified_sample, write_corpus};
use curricomp::eval::{render_markdown as render_eval_markdown, write_eval_csv};
use curricomp::framework::{CompetencyFramework, FrameworkKey};
use curricomp::pipeline::{
    build_eval_reports, build_pair_observations, document_metadata, execute, gold_labels,
    join_predictions, load_predictions, RunConfig,
};
use curricomp::regression::{
    render_markdown as render_regress_markdown, run_eq1, Dependent, EncodeOptions,
};

#[derive(Parser)]
#[command(
    name = "curricomp",
    about = "Map curriculum documents to competency frameworks and evaluate the predictions",
    version
)]
struct Cli {
    /// Run configuration file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the configured cache directory.
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,
    /// Override the configured output directory.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Override the configured parallelism bound.
    #[arg(long, global = true)]
    parallelism: Option<usize>,
    /// Override the configured template directory.
    #[arg(long, global = true)]
    template_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a corpus file and optionally draw a stratified sample.
    Ingest {
        /// Corpus file (CSV or JSON lines).
        #[arg(long)]
        input: PathBuf,
        /// Draw a stratified sample of this many documents.
        #[arg(long)]
        sample: Option<usize>,
        /// Where to write the sampled corpus CSV.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// List the bundled frameworks or validate a framework file.
    Frameworks {
        /// Framework file to validate (requires --key).
        #[arg(long)]
        validate: Option<PathBuf>,
        /// Framework key: onet, eu, or esdc.
        #[arg(long)]
        key: Option<String>,
    },
    /// Inter-rater reliability between two annotators.
    Irr {
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long)]
        annotator_a: String,
        #[arg(long)]
        annotator_b: String,
        /// Annotation round: calibration or final.
        #[arg(long, default_value = "calibration")]
        round: String,
    },
    /// Execute the full pipeline from the config file.
    Run,
    /// Recompute evaluation reports from saved predictions.
    Eval {
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        annotations: PathBuf,
    },
    /// Recompute heterogeneity regressions from saved predictions.
    Regress {
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        annotations: PathBuf,
    },
    /// NA-rate audit per framework and document type.
    NaAudit {
        #[arg(long)]
        annotations: PathBuf,
        /// Write the audit as CSV instead of printing it.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Re-render the Markdown reports inside a completed run directory.
    Report {
        #[arg(long)]
        run_dir: PathBuf,
    },
}

fn main() -> Result<()> {
    // Die quietly when a downstream pipe closes early (e.g. `... | head`).
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    env_logger::init();
    let cli = Cli::parse();
    match &cli.command {
        Command::Ingest {
            input,
            sample,
            output,
        } => ingest(&cli, input, *sample, output.as_deref()),
        Command::Frameworks { validate, key } => frameworks(validate.as_deref(), key.as_deref()),
        Command::Irr {
            annotations,
            annotator_a,
            annotator_b,
            round,
        } => irr(annotations, annotator_a, annotator_b, round),
        Command::Run => run(&cli),
        Command::Eval {
            predictions,
            annotations,
        } => eval(&cli, predictions, annotations),
        Command::Regress {
            predictions,
            annotations,
        } => regress(&cli, predictions, annotations),
        Command::NaAudit {
            annotations,
            output,
        } => na_audit(annotations, output.as_deref()),
        Command::Report { run_dir } => report(run_dir),
    }
}

/// Load the config file and fold in the global CLI overrides.
fn load_config(cli: &Cli) -> Result<(RunConfig, String)> {
    let path = cli
        .config
        .as_deref()
        .context("this command needs --config <file>")?;
    let (mut cfg, raw) =
        RunConfig::load(path).with_context(|| format!("loading {}", path.display()))?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(dir) = &cli.cache_dir {
        cfg.cache_dir = dir.clone();
    }
    if let Some(dir) = &cli.out_dir {
        cfg.out_dir = dir.clone();
    }
    if let Some(p) = cli.parallelism {
        cfg.parallelism = p;
    }
    if let Some(dir) = &cli.template_dir {
        cfg.template_dir = Some(dir.clone());
    }
    Ok((cfg, raw))
}

fn ingest(cli: &Cli, input: &Path, sample: Option<usize>, output: Option<&Path>) -> Result<()> {
    let docs = load_corpus(input).with_context(|| format!("loading {}", input.display()))?;
    println!("{}: {} documents", input.display(), docs.len());
    let words: Vec<usize> = docs.iter().map(|d| d.word_count).collect();
    if let (Some(&min), Some(&max)) = (words.iter().min(), words.iter().max()) {
        let mean = words.iter().sum::<usize>() as f64 / words.len() as f64;
        println!("word count: min {min}, mean {mean:.1}, max {max}");
    }
    for subject in curricomp::SubjectCategory::ALL {
        let count = docs.iter().filter(|d| d.subject == subject).count();
        if count > 0 {
            println!("  {}: {}", subject.display_name(), count);
        }
    }
    if let Some(n) = sample {
        let seed = cli.seed.unwrap_or(0);
        let outcome = stratified_sample(&docs, n, seed)?;
        for warning in &outcome.warnings {
            eprintln!("warning: {warning}");
        }
        let out = output.context("--sample needs --output <file>")?;
        write_corpus(out, &outcome.docs)?;
        println!(
            "wrote {} sampled documents to {} (seed {seed})",
            outcome.docs.len(),
            out.display()
        );
    }
    Ok(())
}

fn frameworks(validate: Option<&Path>, key: Option<&str>) -> Result<()> {
    match (validate, key) {
        (Some(path), Some(key)) => {
            let key = FrameworkKey::parse(key).context("key must be onet, eu, or esdc")?;
            let fw = CompetencyFramework::load(path, key)?;
            println!(
                "{}: {} ({} competencies) — valid",
                path.display(),
                fw.title,
                fw.competencies.len()
            );
        }
        (Some(_), None) => bail!("--validate needs --key"),
        (None, Some(key)) => {
            let key = FrameworkKey::parse(key).context("key must be onet, eu, or esdc")?;
            let fw = CompetencyFramework::bundled(key)?;
            println!("{} ({} competencies)", fw.title, fw.competencies.len());
            for c in &fw.competencies {
                println!("  {} [{}]", c.name, c.id);
            }
        }
        (None, None) => {
            for key in FrameworkKey::ALL {
                let fw = CompetencyFramework::bundled(key)?;
                println!(
                    "{:4}  {} ({} competencies)",
                    key.to_string(),
                    fw.title,
                    fw.competencies.len()
                );
            }
        }
    }
    Ok(())
}

fn irr(annotations: &Path, annotator_a: &str, annotator_b: &str, round: &str) -> Result<()> {
    let round = match round.to_ascii_lowercase().as_str() {
        "calibration" => Round::Calibration,
        "final" => Round::Final,
        other => bail!("unknown round {other:?}; use calibration or final"),
    };
    let records = load_annotations(annotations)?;
    let reports = disagreement_reports(&records, annotator_a, annotator_b, round);
    if reports.is_empty() {
        bail!("no aligned pairs between {annotator_a:?} and {annotator_b:?} in that round");
    }
    println!("kappa treats NA as a fifth nominal category");
    for r in &reports {
        match r.kappa {
            Some(k) => println!(
                "{}: kappa {:.3} over {} pairs ({} disagreements are 0-vs-NA)",
                r.framework, k, r.n_pairs, r.zero_vs_na
            ),
            None => println!(
                "{}: kappa undefined (single shared category) over {} pairs",
                r.framework, r.n_pairs
            ),
        }
        println!("  confusion (rows {annotator_a}, cols {annotator_b}; order 0,1,2,3,NA):");
        for (i, row) in r.confusion.iter().enumerate() {
            let label = AlignmentLabel::ALL[i];
            println!(
                "    {:>2} | {}",
                label,
                row.iter()
                    .map(|c| format!("{c:>4}"))
                    .collect::<Vec<_>>()
                    .join(" ")
            );
        }
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    let (cfg, raw) = load_config(cli)?;
    let summary = execute(&cfg, &raw)?;
    println!("run complete: {}", summary.out_dir.display());
    println!(
        "  {} documents, {} prediction records ({} failed), {} model calls",
        summary.n_documents, summary.n_predictions, summary.n_failed_records, summary.model_calls
    );
    println!("  stages: {}", summary.stages.join(", "));
    Ok(())
}

/// Shared eval/regress preamble: joined prediction-gold pairs plus options.
struct Joined {
    cfg: Option<RunConfig>,
    pairs: Vec<curricomp::pipeline::JoinedPair>,
    out_dir: PathBuf,
}

fn join(cli: &Cli, predictions: &Path, annotations: &Path) -> Result<Joined> {
    let cfg = match &cli.config {
        Some(_) => Some(load_config(cli)?.0),
        None => None,
    };
    let records = load_predictions(predictions)?;
    let gold = gold_labels(&load_annotations(annotations)?);
    let (pairs, unmatched) = join_predictions(&records, &gold);
    if unmatched > 0 {
        eprintln!("warning: {unmatched} predictions had no matching gold annotation");
    }
    let out_dir = cli
        .out_dir
        .clone()
        .or_else(|| cfg.as_ref().map(|c| c.out_dir.clone()))
        .unwrap_or_else(|| PathBuf::from("."));
    Ok(Joined {
        cfg,
        pairs,
        out_dir,
    })
}

fn eval(cli: &Cli, predictions: &Path, annotations: &Path) -> Result<()> {
    let joined = join(cli, predictions, annotations)?;
    let (levels, scheme, exclude) = match &joined.cfg {
        Some(c) => (
            c.granularity.clone(),
            c.kappa_weights,
            c.exclude_doc_types.clone(),
        ),
        None => (
            curricomp::GranularityLevel::ALL.to_vec(),
            Default::default(),
            Vec::new(),
        ),
    };
    let reports = build_eval_reports(&joined.pairs, &levels, scheme, &exclude);
    let eval_dir = joined.out_dir.join("eval");
    fs::create_dir_all(&eval_dir)?;
    let file = fs::File::create(eval_dir.join("report.csv"))?;
    write_eval_csv(&reports, file)?;
    fs::write(eval_dir.join("report.md"), render_eval_markdown(&reports))?;
    println!(
        "wrote {} evaluation rows to {}",
        reports.len(),
        eval_dir.display()
    );
    Ok(())
}

fn regress(cli: &Cli, predictions: &Path, annotations: &Path) -> Result<()> {
    let joined = join(cli, predictions, annotations)?;
    let cfg = joined
        .cfg
        .as_ref()
        .context("regress needs --config for the corpus paths")?;
    let mut docs = Vec::new();
    for path in cfg.corpus.values() {
        docs.extend(load_corpus(path)?);
    }
    let metadata = document_metadata(&docs);
    let observations = build_pair_observations(
        &joined.pairs,
        cfg.regression_strategy,
        &metadata,
        &cfg.granularity,
        &cfg.exclude_doc_types,
    );
    let opts = EncodeOptions {
        reference_model: cfg.reference_model.clone(),
        reference_subject: cfg
            .reference_subject
            .unwrap_or(curricomp::SubjectCategory::Stem),
        standardize_word_count: cfg.standardize_word_count,
    };
    let regress_dir = joined.out_dir.join("regress");
    fs::create_dir_all(&regress_dir)?;
    let mut fitted = Vec::new();
    for dependent in [Dependent::Accuracy, Dependent::ScoreDiff] {
        for &level in &cfg.granularity {
            match run_eq1(&observations, level, dependent, &opts) {
                Ok(result) => {
                    let name =
                        format!("{}_{}.csv", dependent.as_str(), level.as_str().to_lowercase());
                    let file = fs::File::create(regress_dir.join(name))?;
                    result.write_csv(file)?;
                    fitted.push(result);
                }
                Err(err) => eprintln!(
                    "warning: regression {} {} skipped: {err}",
                    dependent.as_str(),
                    level.as_str()
                ),
            }
        }
    }
    let refs: Vec<&_> = fitted.iter().collect();
    fs::write(regress_dir.join("summary.md"), render_regress_markdown(&refs))?;
    println!(
        "wrote {} regression tables to {}",
        fitted.len(),
        regress_dir.display()
    );
    Ok(())
}

fn na_audit(annotations: &Path, output: Option<&Path>) -> Result<()> {
    let records: Vec<_> = load_annotations(annotations)?
        .into_iter()
        .filter(|r| r.round == Round::Final)
        .collect();
    let rates = na_rate(&records)?;
    match output {
        Some(path) => {
            let mut w = csv::Writer::from_path(path)?;
            w.write_record(["framework", "doc_type", "na_count", "total", "na_percent"])?;
            for row in &rates {
                w.write_record([
                    row.framework.to_string(),
                    row.doc_type.to_string(),
                    row.na_count.to_string(),
                    row.total.to_string(),
                    format!("{:.1}", row.na_fraction * 100.0),
                ])?;
            }
            w.flush()?;
            println!("wrote {} rows to {}", rates.len(), path.display());
        }
        None => {
            println!("{:<6} {:<28} {:>6} {:>6} {:>7}", "fw", "doc_type", "NA", "n", "NA%");
            for row in &rates {
                println!(
                    "{:<6} {:<28} {:>6} {:>6} {:>6.1}%",
                    row.framework.to_string(),
                    row.doc_type.to_string(),
                    row.na_count,
                    row.total,
                    row.na_fraction * 100.0
                );
            }
        }
    }
    Ok(())
}

fn report(run_dir: &Path) -> Result<()> {
    let config_path = run_dir.join("config.toml");
    let (cfg, _) = RunConfig::load(&config_path)
        .with_context(|| format!("reading {}", config_path.display()))?;
    let predictions = run_dir.join("predictions.csv");
    let annotations = cfg
        .annotations
        .clone()
        .context("run config has no annotations path; nothing to report")?;
    let records = load_predictions(&predictions)?;
    let gold = gold_labels(&load_annotations(&annotations)?);
    let (pairs, _) = join_predictions(&records, &gold);
    let reports = build_eval_reports(
        &pairs,
        &cfg.granularity,
        cfg.kappa_weights,
        &cfg.exclude_doc_types,
    );
    let eval_dir = run_dir.join("eval");
    fs::create_dir_all(&eval_dir)?;
    fs::write(eval_dir.join("report.md"), render_eval_markdown(&reports))?;
    println!("re-rendered {}", eval_dir.join("report.md").display());
    Ok(())
}
