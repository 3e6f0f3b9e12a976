//! Batch front end for the name-classification pipeline.
//!
//! Five subcommands wire the library end to end: `prepare` turns a labeled
//! CSV (or a census-style surname aggregate) into an encoded train/test
//! dataset plus vocabulary, `train` fits the recurrent classifier, `evaluate`
//! writes a classification report for the held-out split, `predict` labels
//! raw names with a saved model, and `aggregate` rolls contribution amounts
//! up into per-class dollar shares.
//!
//! Every run writes a JSON manifest next to its outputs recording the
//! resolved configuration, the input/output paths, the seed, and the
//! wall-clock duration. Exit codes: 0 success, 1 usage error, 2 data or
//! validation error.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use onomast::apply::{
    impute, load_contributions_csv, shares, shares_by_year, ContributionSchema, ShareMode,
};
use onomast::corpus::{
    expand_census_aggregate, load_census_csv, load_labeled_csv, split_train_test, CensusSchema,
    CsvSchema, LabelSet, NameRecord,
};
use onomast::eval::ConfusionMatrix;
use onomast::model_io::{load, save, ModelContainer};
use onomast::nn::{
    predict_proba_threaded, train, LabeledSequence, ModelConfig, TrainConfig,
};
use onomast::textprep::{
    build_vocabulary, encode, encode_record, tokenize_records, NameMode, PrepConfig, Vocabulary,
};

/// Fixed default seed so casual runs reproduce without extra flags.
const DEFAULT_SEED: u64 = 42;

#[derive(Parser)]
#[command(
    name = "onomast",
    version,
    about = "Train and apply a character-level name classifier",
    long_about = "Batch pipeline for name-based classification: prepare an encoded \
dataset from labeled names or a census-style surname aggregate, train a \
character-bigram recurrent classifier, evaluate it on the held-out split, \
predict labels for raw names, and aggregate contribution amounts into \
per-class shares. All subcommands are deterministic given their inputs, \
flags, and seed."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Encode a labeled corpus into train/test splits plus a vocabulary
    Prepare(PrepareArgs),
    /// Fit the classifier on a prepared dataset and save a model container
    Train(TrainArgs),
    /// Score a saved model on the prepared test split and write a report
    Evaluate(EvaluateArgs),
    /// Label raw names with a saved model
    Predict(PredictArgs),
    /// Roll contribution amounts up into per-class dollar shares
    Aggregate(AggregateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    /// Classify on the last name alone (window 20)
    Last,
    /// Classify on "Last First" when a first name is present (window 25)
    Full,
}

impl From<ModeArg> for NameMode {
    fn from(mode: ModeArg) -> Self {
        match mode {
            ModeArg::Last => NameMode::LastOnly,
            ModeArg::Full => NameMode::Full,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum InputKind {
    /// One row per labeled name
    Labeled,
    /// Surname aggregate with per-class percentage columns, sampled into
    /// individual labeled records
    Census,
}

#[derive(Clone, Copy, ValueEnum)]
enum ShareModeArg {
    /// Each record's full amount goes to its most probable class
    Hard,
    /// Each record's amount is split across classes by predicted probability
    Soft,
}

impl From<ShareModeArg> for ShareMode {
    fn from(mode: ShareModeArg) -> Self {
        match mode {
            ShareModeArg::Hard => ShareMode::Hard,
            ShareModeArg::Soft => ShareMode::Soft,
        }
    }
}

#[derive(Args)]
struct PrepareArgs {
    /// Input CSV of labeled names, or a census-style aggregate
    #[arg(long)]
    input: PathBuf,
    /// Directory for the encoded dataset, vocabulary, and manifest
    #[arg(long)]
    out_dir: PathBuf,
    /// How to interpret the input file
    #[arg(long, value_enum, default_value = "labeled")]
    input_kind: InputKind,
    /// Records to sample when expanding a census aggregate
    #[arg(long, default_value_t = 100_000)]
    census_samples: usize,
    /// Which name fields feed the classifier
    #[arg(long, value_enum, default_value = "last")]
    mode: ModeArg,
    /// Sequence window in bigram tokens [default: 20 for last, 25 for full]
    #[arg(long)]
    window: Option<usize>,
    /// Drop tokens occurring fewer than this many times
    #[arg(long, default_value_t = 3)]
    min_count: usize,
    /// Drop tokens appearing in more than this fraction of names
    #[arg(long, default_value_t = 0.30)]
    max_doc_frac: f64,
    /// Fraction of records held out for evaluation
    #[arg(long, default_value_t = 0.2)]
    test_fraction: f64,
    /// Seed for census expansion and the train/test split
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Column holding the last name (labeled input) or surname (census)
    #[arg(long, default_value = "last_name")]
    last_name_col: String,
    /// Column holding the first name
    #[arg(long, default_value = "first_name")]
    first_name_col: String,
    /// Input has no first-name column
    #[arg(long)]
    no_first_name_col: bool,
    /// Column holding the class label
    #[arg(long, default_value = "label")]
    label_col: String,
    /// Census: column holding the surname count
    #[arg(long, default_value = "count")]
    count_col: String,
    /// Census: LABEL=COLUMN percentage mappings (repeatable; defaults to
    /// white=pctwhite black=pctblack api=pctapi hispanic=pcthispanic)
    #[arg(long = "race-col", value_name = "LABEL=COLUMN")]
    race_cols: Vec<String>,
}

#[derive(Args)]
struct TrainArgs {
    /// Directory written by `prepare`
    #[arg(long)]
    data: PathBuf,
    /// Output path for the model container
    #[arg(long)]
    out: PathBuf,
    /// Token embedding width
    #[arg(long, default_value_t = 32)]
    embed_dim: usize,
    /// Recurrent state width
    #[arg(long, default_value_t = 64)]
    hidden_dim: usize,
    /// Input dropout rate
    #[arg(long, default_value_t = 0.2)]
    dropout: f64,
    /// Recurrent-state dropout rate
    #[arg(long, default_value_t = 0.2)]
    recurrent_dropout: f64,
    /// Training epochs
    #[arg(long, default_value_t = 15)]
    epochs: usize,
    /// Minibatch size
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    /// ADAM step size
    #[arg(long, default_value_t = 0.001)]
    learning_rate: f64,
    /// ADAM first-moment decay
    #[arg(long, default_value_t = 0.9)]
    adam_beta1: f64,
    /// ADAM second-moment decay
    #[arg(long, default_value_t = 0.999)]
    adam_beta2: f64,
    /// ADAM denominator fuzz
    #[arg(long, default_value_t = 1e-8)]
    adam_epsilon: f64,
    /// Rescale each batch gradient to this global norm when it is larger
    /// (off by default)
    #[arg(long)]
    grad_clip_norm: Option<f64>,
    /// Seed for parameter init, shuffling, and dropout masks
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Directory written by `prepare`
    #[arg(long)]
    data: PathBuf,
    /// Model container written by `train`
    #[arg(long)]
    model: PathBuf,
    /// Directory for the report files and manifest
    #[arg(long)]
    out_dir: PathBuf,
    /// Worker threads for scoring
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Args)]
struct PredictArgs {
    /// Model container written by `train`
    #[arg(long)]
    model: PathBuf,
    /// Input CSV of raw names
    #[arg(long)]
    input: PathBuf,
    /// Output CSV of labels and per-class probabilities
    #[arg(long)]
    output: PathBuf,
    /// Worker threads for scoring
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Column holding the last name
    #[arg(long, default_value = "last_name")]
    last_name_col: String,
    /// Column holding the first name
    #[arg(long, default_value = "first_name")]
    first_name_col: String,
    /// Input has no first-name column
    #[arg(long)]
    no_first_name_col: bool,
}

#[derive(Args)]
struct AggregateArgs {
    /// Model container written by `train`
    #[arg(long)]
    model: PathBuf,
    /// Input CSV of contribution records
    #[arg(long)]
    input: PathBuf,
    /// Output CSV of per-class shares
    #[arg(long)]
    output: PathBuf,
    /// How amounts are attributed to classes
    #[arg(long, value_enum, default_value = "hard")]
    share_mode: ShareModeArg,
    /// Emit one share table per contribution year instead of one overall
    #[arg(long)]
    by_year: bool,
    /// Worker threads for scoring
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Column holding the last name
    #[arg(long, default_value = "last_name")]
    last_name_col: String,
    /// Column holding the first name
    #[arg(long, default_value = "first_name")]
    first_name_col: String,
    /// Input has no first-name column
    #[arg(long)]
    no_first_name_col: bool,
    /// Column holding the contribution amount
    #[arg(long, default_value = "amount")]
    amount_col: String,
    /// Column holding the contribution year
    #[arg(long, default_value = "year")]
    year_col: String,
    /// Input has no year column
    #[arg(long)]
    no_year_col: bool,
}

/// Provenance record written next to every subcommand's outputs.
#[derive(Serialize)]
struct RunManifest {
    subcommand: String,
    config: BTreeMap<String, serde_json::Value>,
    inputs: Vec<String>,
    outputs: Vec<String>,
    seed: Option<u64>,
    duration_seconds: f64,
}

impl RunManifest {
    fn new(subcommand: &str) -> Self {
        Self {
            subcommand: subcommand.to_string(),
            config: BTreeMap::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            seed: None,
            duration_seconds: 0.0,
        }
    }

    fn set(&mut self, key: &str, value: serde_json::Value) {
        self.config.insert(key.to_string(), value);
    }

    fn input(&mut self, path: &Path) {
        self.inputs.push(path.display().to_string());
    }

    fn output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    fn write(mut self, path: &Path, started: Instant) -> anyhow::Result<()> {
        self.duration_seconds = started.elapsed().as_secs_f64();
        let body = serde_json::to_string_pretty(&self).context("serializing run manifest")?;
        fs::write(path, body)
            .with_context(|| format!("writing run manifest {}", path.display()))?;
        Ok(())
    }
}

/// Everything `train` and `evaluate` need to interpret an encoded dataset:
/// the preprocessing settings, the label order, and the vocabulary tokens in
/// index order.
#[derive(Serialize, Deserialize)]
struct DatasetDescriptor {
    prep: PrepConfig,
    labels: Vec<String>,
    vocab_tokens: Vec<String>,
    n_train: usize,
    n_test: usize,
    unencodable_train: usize,
    unencodable_test: usize,
}

const DESCRIPTOR_FILE: &str = "dataset.json";
const TRAIN_FILE: &str = "train.csv";
const TEST_FILE: &str = "test.csv";
const VOCAB_FILE: &str = "vocab.tsv";
const MANIFEST_FILE: &str = "manifest.json";

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // --help and --version land here too; they are not usage errors
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Prepare(args) => run_prepare(args),
        Command::Train(args) => run_train(args),
        Command::Evaluate(args) => run_evaluate(args),
        Command::Predict(args) => run_predict(args),
        Command::Aggregate(args) => run_aggregate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn run_prepare(args: PrepareArgs) -> anyhow::Result<()> {
    let started = Instant::now();
    let mode: NameMode = args.mode.into();
    let mut prep = PrepConfig::for_mode(mode);
    if let Some(window) = args.window {
        prep.window = window;
    }
    prep.min_count = args.min_count;
    prep.max_doc_fraction = args.max_doc_frac;
    prep.validate()?;

    let records: Vec<NameRecord> = match args.input_kind {
        InputKind::Labeled => {
            let schema = CsvSchema {
                last_name: args.last_name_col.clone(),
                first_name: if args.no_first_name_col {
                    None
                } else {
                    Some(args.first_name_col.clone())
                },
                label: args.label_col.clone(),
            };
            let loaded = load_labeled_csv(&args.input, &schema)
                .with_context(|| format!("reading labeled corpus {}", args.input.display()))?;
            if loaded.dropped > 0 {
                eprintln!(
                    "note: dropped {} rows with a blank name or label",
                    loaded.dropped
                );
            }
            loaded.records
        }
        InputKind::Census => {
            let schema = CensusSchema {
                surname: args.last_name_col.clone(),
                count: args.count_col.clone(),
                percentage_columns: parse_race_cols(&args.race_cols)?,
            };
            let rows = load_census_csv(&args.input, &schema)
                .with_context(|| format!("reading census aggregate {}", args.input.display()))?;
            expand_census_aggregate(&rows, args.census_samples, args.seed)
                .context("expanding census aggregate into labeled records")?
        }
    };

    let labels = LabelSet::from_labels(records.iter().map(|r| r.label.clone()));
    let (train_records, test_records) = split_train_test(&records, args.test_fraction, args.seed)?;

    let (train_tokens, train_kept) = tokenize_records(&train_records, mode);
    let vocab = build_vocabulary(&train_tokens, &prep)
        .context("building the vocabulary from the training split")?;
    let train_examples = encode_split(&train_records, &train_tokens, &train_kept, &vocab, &prep, &labels);
    let (test_tokens, test_kept) = tokenize_records(&test_records, mode);
    let test_examples = encode_split(&test_records, &test_tokens, &test_kept, &vocab, &prep, &labels);

    fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating output directory {}", args.out_dir.display()))?;
    let descriptor = DatasetDescriptor {
        prep: prep.clone(),
        labels: labels.labels().to_vec(),
        vocab_tokens: vocab.tokens().to_vec(),
        n_train: train_examples.len(),
        n_test: test_examples.len(),
        unencodable_train: train_records.len() - train_examples.len(),
        unencodable_test: test_records.len() - test_examples.len(),
    };
    let descriptor_path = args.out_dir.join(DESCRIPTOR_FILE);
    fs::write(
        &descriptor_path,
        serde_json::to_string_pretty(&descriptor).context("serializing dataset descriptor")?,
    )
    .with_context(|| format!("writing {}", descriptor_path.display()))?;
    let train_path = args.out_dir.join(TRAIN_FILE);
    write_encoded_csv(&train_path, &train_examples, &labels)?;
    let test_path = args.out_dir.join(TEST_FILE);
    write_encoded_csv(&test_path, &test_examples, &labels)?;
    let vocab_path = args.out_dir.join(VOCAB_FILE);
    fs::write(&vocab_path, vocab.to_tsv())
        .with_context(|| format!("writing {}", vocab_path.display()))?;

    println!(
        "prepared {} train / {} test records, {} classes, {} vocabulary tokens -> {}",
        descriptor.n_train,
        descriptor.n_test,
        labels.len(),
        vocab.tokens().len(),
        args.out_dir.display()
    );

    let mut manifest = RunManifest::new("prepare");
    manifest.set("input_kind", json!(match args.input_kind {
        InputKind::Labeled => "labeled",
        InputKind::Census => "census",
    }));
    if matches!(args.input_kind, InputKind::Census) {
        manifest.set("census_samples", json!(args.census_samples));
    }
    manifest.set("mode", json!(match mode {
        NameMode::LastOnly => "last",
        NameMode::Full => "full",
    }));
    manifest.set("window", json!(prep.window));
    manifest.set("min_count", json!(prep.min_count));
    manifest.set("max_doc_fraction", json!(prep.max_doc_fraction));
    manifest.set("test_fraction", json!(args.test_fraction));
    manifest.set("n_train", json!(descriptor.n_train));
    manifest.set("n_test", json!(descriptor.n_test));
    manifest.set(
        "unencodable",
        json!(descriptor.unencodable_train + descriptor.unencodable_test),
    );
    manifest.set("labels", json!(descriptor.labels));
    manifest.input(&args.input);
    manifest.output(&descriptor_path);
    manifest.output(&train_path);
    manifest.output(&test_path);
    manifest.output(&vocab_path);
    manifest.seed = Some(args.seed);
    manifest.write(&args.out_dir.join(MANIFEST_FILE), started)
}

fn run_train(args: TrainArgs) -> anyhow::Result<()> {
    let started = Instant::now();
    let descriptor = read_descriptor(&args.data)?;
    let labels = LabelSet::from_labels(descriptor.labels.clone());
    let vocab = Vocabulary::from_tokens(descriptor.vocab_tokens.clone());
    let examples = read_encoded_csv(&args.data.join(TRAIN_FILE), &labels)?;

    let config = ModelConfig {
        vocab_size: vocab.index_space(),
        embed_dim: args.embed_dim,
        hidden_dim: args.hidden_dim,
        n_classes: labels.len(),
        dropout: args.dropout,
        recurrent_dropout: args.recurrent_dropout,
        window: descriptor.prep.window,
    };
    let tconfig = TrainConfig {
        epochs: args.epochs,
        batch_size: args.batch_size,
        adam_alpha: args.learning_rate,
        adam_beta1: args.adam_beta1,
        adam_beta2: args.adam_beta2,
        adam_epsilon: args.adam_epsilon,
        grad_clip_norm: args.grad_clip_norm,
        seed: args.seed,
    };
    let model = train(&examples, &config, &tconfig)
        .with_context(|| format!("training on {}", args.data.display()))?;
    for (epoch, loss) in model.loss_history.iter().enumerate() {
        println!("epoch {}/{}: loss {loss:.6}", epoch + 1, tconfig.epochs);
    }

    let container = ModelContainer {
        prep: descriptor.prep,
        model: config,
        labels,
        vocabulary: vocab,
        params: model.params,
    };
    save(&container, &args.out)
        .with_context(|| format!("saving model {}", args.out.display()))?;

    let loss_path = sibling(&args.out, "loss.csv");
    let mut loss_csv = String::from("epoch,loss\n");
    for (epoch, loss) in model.loss_history.iter().enumerate() {
        loss_csv.push_str(&format!("{},{loss}\n", epoch + 1));
    }
    fs::write(&loss_path, loss_csv)
        .with_context(|| format!("writing {}", loss_path.display()))?;
    println!("saved model to {}", args.out.display());

    let mut manifest = RunManifest::new("train");
    manifest.set("embed_dim", json!(args.embed_dim));
    manifest.set("hidden_dim", json!(args.hidden_dim));
    manifest.set("dropout", json!(args.dropout));
    manifest.set("recurrent_dropout", json!(args.recurrent_dropout));
    manifest.set("epochs", json!(args.epochs));
    manifest.set("batch_size", json!(args.batch_size));
    manifest.set("learning_rate", json!(args.learning_rate));
    manifest.set("adam_beta1", json!(args.adam_beta1));
    manifest.set("adam_beta2", json!(args.adam_beta2));
    manifest.set("adam_epsilon", json!(args.adam_epsilon));
    manifest.set("grad_clip_norm", json!(args.grad_clip_norm));
    manifest.set("window", json!(container.prep.window));
    manifest.set("n_examples", json!(examples.len()));
    manifest.set("final_loss", json!(model.loss_history.last().copied()));
    manifest.input(&args.data.join(DESCRIPTOR_FILE));
    manifest.input(&args.data.join(TRAIN_FILE));
    manifest.output(&args.out);
    manifest.output(&loss_path);
    manifest.seed = Some(args.seed);
    manifest.write(&sibling(&args.out, "manifest.json"), started)
}

fn run_evaluate(args: EvaluateArgs) -> anyhow::Result<()> {
    let started = Instant::now();
    let descriptor = read_descriptor(&args.data)?;
    let container = load(&args.model)
        .with_context(|| format!("loading model {}", args.model.display()))?;
    if container.prep != descriptor.prep {
        bail!(
            "model {} was trained with different preprocessing than dataset {}",
            args.model.display(),
            args.data.display()
        );
    }
    if container.labels.labels() != descriptor.labels.as_slice()
        || container.vocabulary.tokens() != descriptor.vocab_tokens.as_slice()
    {
        bail!(
            "model {} does not match the labels/vocabulary of dataset {}",
            args.model.display(),
            args.data.display()
        );
    }

    let labels = container.labels.clone();
    let examples = read_encoded_csv(&args.data.join(TEST_FILE), &labels)?;
    let sequences: Vec<Vec<usize>> = examples.iter().map(|e| e.indices.clone()).collect();
    let probs = predict_proba_threaded(&sequences, &container.params, &container.model, args.threads)?;
    let predicted: Vec<usize> = probs.iter().map(|p| onomast::apply::argmax(p)).collect();
    let truth: Vec<usize> = examples.iter().map(|e| e.label).collect();
    let report = ConfusionMatrix::from_indices(&labels, &truth, &predicted)?.report();

    fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating output directory {}", args.out_dir.display()))?;
    let text_path = args.out_dir.join("report.txt");
    fs::write(&text_path, format!("{report}\n"))
        .with_context(|| format!("writing {}", text_path.display()))?;
    let tsv_path = args.out_dir.join("report.tsv");
    fs::write(&tsv_path, report.to_tsv())
        .with_context(|| format!("writing {}", tsv_path.display()))?;
    println!("{report}");

    let mut manifest = RunManifest::new("evaluate");
    manifest.set("threads", json!(args.threads));
    manifest.set("n_test", json!(examples.len()));
    manifest.set("accuracy", json!(report.accuracy));
    manifest.set("weighted_f1", json!(report.weighted.f1));
    manifest.input(&args.data.join(DESCRIPTOR_FILE));
    manifest.input(&args.data.join(TEST_FILE));
    manifest.input(&args.model);
    manifest.output(&text_path);
    manifest.output(&tsv_path);
    manifest.write(&args.out_dir.join(MANIFEST_FILE), started)
}

fn run_predict(args: PredictArgs) -> anyhow::Result<()> {
    let started = Instant::now();
    let container = load(&args.model)
        .with_context(|| format!("loading model {}", args.model.display()))?;
    let names = read_name_csv(
        &args.input,
        &args.last_name_col,
        (!args.no_first_name_col).then_some(args.first_name_col.as_str()),
    )?;

    // encode everything first so scoring can batch across threads
    let mut encoded = Vec::new();
    let mut row_of_encoded = Vec::new();
    let mut skipped = 0usize;
    for (row, record) in names.iter().enumerate() {
        match encode_record(record, &container.vocabulary, &container.prep) {
            Some(seq) => {
                encoded.push(seq.indices);
                row_of_encoded.push(row);
            }
            None => skipped += 1,
        }
    }
    let probs = predict_proba_threaded(&encoded, &container.params, &container.model, args.threads)?;

    let mut writer = csv::Writer::from_path(&args.output)
        .with_context(|| format!("writing {}", args.output.display()))?;
    let mut header = vec!["last_name".to_string(), "first_name".to_string(), "label".to_string()];
    for label in container.labels.labels() {
        header.push(format!("p_{label}"));
    }
    writer.write_record(&header)?;
    let mut next = 0usize;
    for (row, record) in names.iter().enumerate() {
        let mut fields = vec![
            record.last_name.clone(),
            record.first_name.clone().unwrap_or_default(),
        ];
        if next < row_of_encoded.len() && row_of_encoded[next] == row {
            let p = &probs[next];
            fields.push(container.labels.label(onomast::apply::argmax(p)).to_string());
            fields.extend(p.iter().map(|x| x.to_string()));
            next += 1;
        } else {
            // name was empty after normalization; leave the prediction blank
            fields.extend(std::iter::repeat_n(String::new(), 1 + container.labels.len()));
        }
        writer.write_record(&fields)?;
    }
    writer.flush()?;
    println!(
        "predicted {} of {} records ({} blank) -> {}",
        encoded.len(),
        names.len(),
        skipped,
        args.output.display()
    );

    let mut manifest = RunManifest::new("predict");
    manifest.set("threads", json!(args.threads));
    manifest.set("n_records", json!(names.len()));
    manifest.set("n_predicted", json!(encoded.len()));
    manifest.set("n_skipped", json!(skipped));
    manifest.input(&args.model);
    manifest.input(&args.input);
    manifest.output(&args.output);
    manifest.write(&sibling(&args.output, "manifest.json"), started)
}

fn run_aggregate(args: AggregateArgs) -> anyhow::Result<()> {
    let started = Instant::now();
    let container = load(&args.model)
        .with_context(|| format!("loading model {}", args.model.display()))?;
    let schema = ContributionSchema {
        last_name: args.last_name_col.clone(),
        first_name: (!args.no_first_name_col).then(|| args.first_name_col.clone()),
        amount: args.amount_col.clone(),
        year: (!args.no_year_col).then(|| args.year_col.clone()),
    };
    let records = load_contributions_csv(&args.input, &schema)
        .with_context(|| format!("reading contributions {}", args.input.display()))?;
    let imputation = impute(&records, &container, args.threads)
        .context("imputing classes for contribution records")?;
    if imputation.skipped > 0 {
        eprintln!(
            "note: skipped {} records with names that normalize to nothing",
            imputation.skipped
        );
    }

    let mode: ShareMode = args.share_mode.into();
    if args.by_year {
        let tables = shares_by_year(&imputation.records, &container.labels, mode)?;
        onomast::apply::write_share_csv(&tables, &args.output)
            .with_context(|| format!("writing {}", args.output.display()))?;
        println!(
            "wrote {} share tables ({} records) -> {}",
            tables.len(),
            imputation.records.len(),
            args.output.display()
        );
    } else {
        let table = shares(&imputation.records, &container.labels, mode)?;
        let mut writer = csv::Writer::from_path(&args.output)
            .with_context(|| format!("writing {}", args.output.display()))?;
        writer.write_record(["year", "label", "share", "total_amount", "n_records"])?;
        for (label, share) in &table.shares {
            writer.write_record([
                "all".to_string(),
                label.clone(),
                share.to_string(),
                table.total_amount.to_string(),
                table.n_records.to_string(),
            ])?;
        }
        writer.flush()?;
        println!(
            "wrote share table over {} records (total amount {}) -> {}",
            table.n_records,
            table.total_amount,
            args.output.display()
        );
    }

    let mut manifest = RunManifest::new("aggregate");
    manifest.set("share_mode", json!(match args.share_mode {
        ShareModeArg::Hard => "hard",
        ShareModeArg::Soft => "soft",
    }));
    manifest.set("by_year", json!(args.by_year));
    manifest.set("threads", json!(args.threads));
    manifest.set("n_records", json!(records.len()));
    manifest.set("n_skipped", json!(imputation.skipped));
    manifest.input(&args.model);
    manifest.input(&args.input);
    manifest.output(&args.output);
    manifest.write(&sibling(&args.output, "manifest.json"), started)
}

/// `LABEL=COLUMN` pairs from the command line, defaulting to the standard
/// census surname-file percentage columns.
fn parse_race_cols(specs: &[String]) -> anyhow::Result<Vec<(String, String)>> {
    if specs.is_empty() {
        return Ok([
            ("pctwhite", "white"),
            ("pctblack", "black"),
            ("pctapi", "api"),
            ("pcthispanic", "hispanic"),
        ]
        .into_iter()
        .map(|(col, label)| (col.to_string(), label.to_string()))
        .collect());
    }
    specs
        .iter()
        .map(|spec| match spec.split_once('=') {
            Some((label, column)) if !label.is_empty() && !column.is_empty() => {
                Ok((column.to_string(), label.to_string()))
            }
            _ => bail!("--race-col {spec:?} is not of the form LABEL=COLUMN"),
        })
        .collect()
}

fn encode_split(
    records: &[NameRecord],
    tokens: &[Vec<String>],
    kept: &[usize],
    vocab: &Vocabulary,
    prep: &PrepConfig,
    labels: &LabelSet,
) -> Vec<LabeledSequence> {
    kept.iter()
        .zip(tokens)
        .map(|(&i, toks)| LabeledSequence {
            indices: encode(toks, vocab, prep.window).indices,
            label: labels
                .index_of(&records[i].label)
                .expect("labels were built from these records"),
        })
        .collect()
}

fn read_descriptor(dir: &Path) -> anyhow::Result<DatasetDescriptor> {
    let path = dir.join(DESCRIPTOR_FILE);
    let body = fs::read_to_string(&path)
        .with_context(|| format!("reading dataset descriptor {}", path.display()))?;
    serde_json::from_str(&body)
        .with_context(|| format!("parsing dataset descriptor {}", path.display()))
}

fn write_encoded_csv(
    path: &Path,
    examples: &[LabeledSequence],
    labels: &LabelSet,
) -> anyhow::Result<()> {
    let mut writer =
        csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    writer.write_record(["indices", "label"])?;
    for example in examples {
        let joined = example
            .indices
            .iter()
            .map(|i| i.to_string())
            .collect::<Vec<_>>()
            .join(" ");
        writer.write_record([joined.as_str(), labels.label(example.label)])?;
    }
    writer.flush()?;
    Ok(())
}

fn read_encoded_csv(path: &Path, labels: &LabelSet) -> anyhow::Result<Vec<LabeledSequence>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .with_context(|| format!("reading encoded dataset {}", path.display()))?;
    let mut examples = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.with_context(|| format!("reading {}", path.display()))?;
        let indices = record
            .get(0)
            .unwrap_or("")
            .split_whitespace()
            .map(|field| {
                field.parse::<usize>().map_err(|_| {
                    anyhow::anyhow!(
                        "{} row {}: {field:?} is not a token index",
                        path.display(),
                        row + 2
                    )
                })
            })
            .collect::<anyhow::Result<Vec<usize>>>()?;
        let label = record.get(1).unwrap_or("").to_string();
        let label = labels.index_of(&label).ok_or_else(|| {
            anyhow::anyhow!(
                "{} row {}: label {label:?} is not in the dataset's label set",
                path.display(),
                row + 2
            )
        })?;
        examples.push(LabeledSequence { indices, label });
    }
    Ok(examples)
}

/// Raw names for `predict`: a required last-name column and an optional
/// first-name column; no label column is needed.
fn read_name_csv(
    path: &Path,
    last_col: &str,
    first_col: Option<&str>,
) -> anyhow::Result<Vec<NameRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .with_context(|| format!("reading names {}", path.display()))?;
    let headers = reader.headers()?.clone();
    let position = |name: &str| headers.iter().position(|h| h == name);
    let last_idx = position(last_col).ok_or_else(|| {
        anyhow::anyhow!("{} has no column named {last_col:?}", path.display())
    })?;
    let first_idx = first_col.and_then(position);
    let mut names = Vec::new();
    for record in reader.records() {
        let record = record.with_context(|| format!("reading {}", path.display()))?;
        let first = first_idx
            .and_then(|i| record.get(i))
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::to_string);
        names.push(NameRecord {
            last_name: record.get(last_idx).unwrap_or("").trim().to_string(),
            first_name: first,
            label: String::new(),
        });
    }
    if names.is_empty() {
        bail!("{} contains no records", path.display());
    }
    Ok(names)
}

/// `model.nmc` -> `model.<suffix>` in the same directory.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().unwrap_or_default().to_string_lossy();
    path.with_file_name(format!("{stem}.{suffix}"))
}
