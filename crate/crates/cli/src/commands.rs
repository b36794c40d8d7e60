//! The five subcommands: clean, vocab, train, evaluate, sweep.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use dptext_core::corpus::{
    examples_from_docs, label_mapping, read_checkpoint, read_corpus, read_vocabulary,
    split_indices, write_checkpoint, write_corpus, write_key_values, write_vocabulary,
    RawDocument,
};
use dptext_core::features::{build_vocabulary, Vocabulary};
use dptext_core::metrics::{confusion, csv_row, metrics, Averaging, MetricsReport, CSV_HEADER};
use dptext_core::model::{predict, LabeledExample, ModelParams};
use dptext_core::text::{clean_document, StopwordList};
use dptext_core::trainer::{train_baseline, train_dp, TrainConfig, TrainReport};
use dptext_core::PrivacyParams;

use crate::config::{RunConfig, TrainMode};
use crate::{CliError, SplitArg};

pub fn cmd_clean(corpus: &Path, stopwords: Option<&Path>, out: &Path) -> Result<(), CliError> {
    let docs = read_corpus(corpus)?;
    let stops = match stopwords {
        Some(path) => StopwordList::from_file(path)?,
        None => StopwordList::english(),
    };
    let cleaned: Vec<RawDocument> = docs
        .iter()
        .map(|doc| {
            RawDocument::new(
                doc.id.clone(),
                doc.label.clone(),
                clean_document(&doc.text, &stops).join(" "),
            )
        })
        .collect();
    write_corpus(out, &cleaned)?;
    println!("cleaned {} documents -> {}", cleaned.len(), out.display());
    Ok(())
}

pub fn cmd_vocab(corpus: &Path, out: &Path, min_doc_freq: usize) -> Result<(), CliError> {
    let docs = read_corpus(corpus)?;
    let token_lists: Vec<Vec<String>> = docs
        .iter()
        .map(|doc| doc.text.split_whitespace().map(str::to_string).collect())
        .collect();
    let vocab = build_vocabulary(&token_lists, min_doc_freq)?;
    write_vocabulary(out, &vocab)?;
    println!(
        "vocabulary of {} tokens over {} documents -> {}",
        vocab.len(),
        vocab.num_documents(),
        out.display()
    );
    Ok(())
}

struct Dataset {
    docs: Vec<RawDocument>,
    vocab: Vocabulary,
    labels: BTreeMap<String, usize>,
    train: Vec<usize>,
    val: Vec<usize>,
    test: Vec<usize>,
}

impl Dataset {
    fn load(config: &RunConfig) -> Result<Self, CliError> {
        let corpus_path = RunConfig::require(&config.corpus, "corpus")?;
        let vocab_path = RunConfig::require(&config.vocab, "vocab")?;
        let docs = read_corpus(&corpus_path)?;
        let vocab = read_vocabulary(&vocab_path)?;
        let labels = label_mapping(&docs)?;
        let (train, val, test) = split_indices(docs.len(), config.split, config.split_seed)?;
        Ok(Self {
            docs,
            vocab,
            labels,
            train,
            val,
            test,
        })
    }

    fn subset(&self, indices: &[usize]) -> Vec<RawDocument> {
        indices.iter().map(|&i| self.docs[i].clone()).collect()
    }

    fn split_docs(&self, split: SplitArg) -> Vec<RawDocument> {
        match split {
            SplitArg::Train => self.subset(&self.train),
            SplitArg::Val => self.subset(&self.val),
            SplitArg::Test => self.subset(&self.test),
            SplitArg::All => self.docs.clone(),
        }
    }
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "model".to_string())
}

fn run_training(
    examples: &[LabeledExample],
    train_config: &TrainConfig,
    mode: TrainMode,
) -> Result<(ModelParams, TrainReport), CliError> {
    match mode {
        TrainMode::Dp => {
            let (theta, report, _) = train_dp(examples, train_config)?;
            Ok((theta, report))
        }
        TrainMode::Baseline => {
            let (theta, report) = train_baseline(examples, train_config)?;
            Ok((theta, report))
        }
    }
}

pub fn cmd_train(config: &RunConfig) -> Result<(), CliError> {
    let model_path = RunConfig::require(&config.model, "model")?;
    let report_path = config
        .report
        .clone()
        .unwrap_or_else(|| model_path.with_extension("report.txt"));
    let dataset = Dataset::load(config)?;
    let train_docs = dataset.subset(&dataset.train);
    if train_docs.is_empty() {
        return Err(CliError::Data("train split is empty".to_string()));
    }
    let examples = examples_from_docs(&train_docs, &dataset.vocab, config.scheme, &dataset.labels)?;
    let train_config = config.to_train_config()?;
    let (theta, report) = run_training(&examples, &train_config, config.mode)?;

    write_checkpoint(&model_path, &theta)?;
    let mut entries = vec![("command".to_string(), "train".to_string())];
    entries.extend(config.echo_entries());
    entries.push(("train_documents".into(), train_docs.len().to_string()));
    entries.push(("classes".into(), theta.num_classes().to_string()));
    entries.push(("features".into(), theta.num_features().to_string()));
    entries.push(("steps".into(), report.steps_taken.to_string()));
    entries.push(("spent_epsilon".into(), report.spent_epsilon.to_string()));
    entries.push(("spent_delta".into(), report.spent_delta.to_string()));
    entries.push(("early_stopped".into(), report.early_stopped.to_string()));
    let final_loss = report
        .epoch_losses
        .last()
        .copied()
        .unwrap_or(f64::NAN);
    entries.push(("final_loss".into(), final_loss.to_string()));
    write_key_values(&report_path, &entries)?;

    println!(
        "trained {} steps, final loss {final_loss}, spent epsilon = {}, spent delta = {}",
        report.steps_taken, report.spent_epsilon, report.spent_delta
    );
    println!(
        "checkpoint -> {} , report -> {} ({:.2}s)",
        model_path.display(),
        report_path.display(),
        report.wall_time_secs
    );
    if report.early_stopped {
        println!(
            "early stop: privacy budget exhausted after {} steps; partial model saved",
            report.steps_taken
        );
    }
    Ok(())
}

fn append_metrics_row(path: &Path, row: &str) -> Result<(), CliError> {
    let needs_header = std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let mut file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(dptext_core::Error::from)?;
    if needs_header {
        writeln!(file, "{CSV_HEADER}").map_err(dptext_core::Error::from)?;
    }
    writeln!(file, "{row}").map_err(dptext_core::Error::from)?;
    Ok(())
}

fn evaluate_examples(
    theta: &ModelParams,
    examples: &[LabeledExample],
) -> Result<MetricsReport, CliError> {
    let preds: Vec<usize> = examples
        .iter()
        .map(|ex| predict(theta, &ex.features))
        .collect::<dptext_core::Result<_>>()?;
    let truth: Vec<usize> = examples.iter().map(|ex| ex.label).collect();
    let counts = confusion(&preds, &truth, theta.num_classes())?;
    Ok(metrics(
        &counts,
        Averaging::for_num_classes(theta.num_classes()),
    ))
}

pub fn cmd_evaluate(config: &RunConfig, split: SplitArg) -> Result<(), CliError> {
    let model_path = RunConfig::require(&config.model, "model")?;
    let dataset = Dataset::load(config)?;
    let theta = read_checkpoint(&model_path)?;
    if theta.num_features() != dataset.vocab.len() {
        return Err(CliError::Data(format!(
            "checkpoint expects {} features but the vocabulary has {}",
            theta.num_features(),
            dataset.vocab.len()
        )));
    }
    if theta.num_classes() != dataset.labels.len() {
        return Err(CliError::Data(format!(
            "checkpoint expects {} classes but the corpus has {} labels",
            theta.num_classes(),
            dataset.labels.len()
        )));
    }
    let docs = dataset.split_docs(split);
    if docs.is_empty() {
        return Err(CliError::Data(format!("split {:?} is empty", split.as_str())));
    }
    let examples = examples_from_docs(&docs, &dataset.vocab, config.scheme, &dataset.labels)?;
    let report = evaluate_examples(&theta, &examples)?;
    let tag = format!("{}-{}", file_stem(&model_path), split.as_str());
    let row = csv_row(&tag, &report);
    println!(
        "# split={} documents={} averaging={}",
        split.as_str(),
        docs.len(),
        report.averaging.as_str()
    );
    println!("{row}");
    if let Some(out) = &config.metrics_out {
        append_metrics_row(out, &row)?;
        println!("# appended -> {}", out.display());
    }
    Ok(())
}

pub const SWEEP_CSV_HEADER: &str = "epsilon,seed,accuracy,precision,recall,f1";

pub fn cmd_sweep(
    config: &RunConfig,
    epsilons: &[f64],
    seeds: &[u64],
    out: &PathBuf,
) -> Result<(), CliError> {
    if epsilons.is_empty() {
        return Err(CliError::Usage(
            "sweep needs a non-empty --epsilons list".to_string(),
        ));
    }
    let dataset = Dataset::load(config)?;
    let train_docs = dataset.subset(&dataset.train);
    let test_docs = dataset.subset(&dataset.test);
    if train_docs.is_empty() || test_docs.is_empty() {
        return Err(CliError::Data(
            "sweep needs non-empty train and test splits".to_string(),
        ));
    }
    let train_set =
        examples_from_docs(&train_docs, &dataset.vocab, config.scheme, &dataset.labels)?;
    let test_set = examples_from_docs(&test_docs, &dataset.vocab, config.scheme, &dataset.labels)?;

    let base = config.to_train_config()?;
    let mut lines = vec![SWEEP_CSV_HEADER.to_string()];
    let mut failures = 0usize;
    let mut total = 0usize;
    let run = |train_config: TrainConfig,
                   mode: TrainMode,
                   epsilon_tag: String,
                   seed: u64,
                   failures: &mut usize|
     -> String {
        let outcome = run_training(&train_set, &train_config, mode)
            .and_then(|(theta, _)| evaluate_examples(&theta, &test_set));
        match outcome {
            Ok(m) => format!(
                "{},{},{:.4},{:.4},{:.4},{:.4}",
                epsilon_tag, seed, m.accuracy, m.precision, m.recall, m.f1
            ),
            Err(err) => {
                eprintln!("sweep run (epsilon={epsilon_tag}, seed={seed}) failed: {err}");
                *failures += 1;
                format!("{epsilon_tag},{seed},nan,nan,nan,nan")
            }
        }
    };

    for &epsilon in epsilons {
        for &seed in seeds {
            total += 1;
            let privacy = match PrivacyParams::new(epsilon, config.delta) {
                Ok(p) => p,
                Err(err) => {
                    eprintln!("sweep run (epsilon={epsilon}, seed={seed}) failed: {err}");
                    failures += 1;
                    lines.push(format!("{epsilon},{seed},nan,nan,nan,nan"));
                    continue;
                }
            };
            let train_config = TrainConfig {
                privacy,
                seed,
                ..base.clone()
            };
            lines.push(run(train_config, TrainMode::Dp, epsilon.to_string(), seed, &mut failures));
        }
    }
    for &seed in seeds {
        total += 1;
        let train_config = TrainConfig {
            seed,
            noise_enabled: false,
            ..base.clone()
        };
        lines.push(run(
            train_config,
            TrainMode::Baseline,
            "inf".to_string(),
            seed,
            &mut failures,
        ));
    }

    let mut content = lines.join("\n");
    content.push('\n');
    std::fs::write(out, content).map_err(dptext_core::Error::from)?;
    println!(
        "sweep wrote {} rows ({} failed) -> {}",
        total,
        failures,
        out.display()
    );
    if failures == total {
        return Err(CliError::Data("all sweep runs failed".to_string()));
    }
    Ok(())
}
