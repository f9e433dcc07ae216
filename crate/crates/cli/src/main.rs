//! Command-line driver: corpus generation, feature extraction, Siamese
//! training, evaluation of the Siamese model and the DTW baseline, and
//! result reports.

mod config;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use sigverify::dataset::{build_pairs, build_random_forgery_trials, build_split, load_corpus, DatasetSplit, Partition};
use sigverify::eval::{det_curve, read_results_csv, result_row, write_det_csv, write_results_csv, ResultRow, ScoreSet};
use sigverify::model_io::{load_model, save_model};
use sigverify::pipeline::{
    dtw_scores, extract_all, protocol_sets, siamese_dev_metrics, siamese_scores, write_training_log, DTW_SYSTEM,
    SIAMESE_SYSTEM,
};
use sigverify::sffs::sffs_select;
use sigverify::siamese::SiameseModel;
use sigverify::synth::{generate_to, SynthConfig};
use sigverify::train::{train, FeatureStore};
use sigverify::{rng_for, signature::SignatureRecord};

use config::RunConfig;

/// Random stream for model initialization; training shuffles use their own.
const INIT_STREAM: u64 = 2;
/// Points kept on each DET curve.
const DET_POINTS: usize = 200;

#[derive(Parser, Debug)]
#[command(name = "sigverify", version, about = "Online signature verification experiments")]
struct Cli {
    /// Worker threads for extraction, scoring and training.
    #[arg(long, global = true, env = "SIGVERIFY_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic corpus in the on-disk layout.
    Generate(GenerateArgs),
    /// Compute feature matrices for every signature and write them as CSV.
    Extract(ExtractArgs),
    /// Train the Siamese verifier on the development users.
    Train(TrainArgs),
    /// Score the evaluation users with a trained model and/or the DTW baseline.
    Evaluate(EvaluateArgs),
    /// Print a results table.
    Report(ReportArgs),
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long)]
    out: PathBuf,
    /// TOML file with generator settings; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    users: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    forgery_noise: Option<f64>,
}

#[derive(Args, Debug)]
struct ExtractArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Keep raw feature scales instead of z-scoring each column.
    #[arg(long)]
    no_normalize: bool,
}

/// Options shared by training and evaluation.
#[derive(Args, Debug)]
struct SplitArgs {
    #[arg(long)]
    data: PathBuf,
    /// TOML run configuration; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Development users (first ids in sorted order). Default: three
    /// quarters of the corpus.
    #[arg(long)]
    dev_users: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    split: SplitArgs,
    /// Where the best checkpoint is written.
    #[arg(long)]
    model: PathBuf,
    /// Training log CSV. Default: next to the model with a .csv extension.
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[command(flatten)]
    split: SplitArgs,
    #[arg(long)]
    model: Option<PathBuf>,
    /// Also evaluate the DTW baseline.
    #[arg(long)]
    baseline: bool,
    /// Select DTW columns on the development users before evaluating.
    #[arg(long, requires = "baseline")]
    sffs: bool,
    /// DTW columns, comma separated, 1-based.
    #[arg(long, value_delimiter = ',', conflicts_with = "sffs")]
    columns: Option<Vec<usize>>,
    /// Also score enrollment signatures against other users' genuine
    /// signatures.
    #[arg(long)]
    random_forgeries: bool,
    #[arg(long, default_value = "results")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// Results CSV files written by `evaluate`.
    #[arg(required = true)]
    results: Vec<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    let result = match cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Extract(a) => cmd_extract(a),
        Command::Train(a) => cmd_train(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Report(a) => cmd_report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn usage_error(msg: &str) -> ! {
    eprintln!("error: {msg}");
    std::process::exit(2);
}

fn cmd_generate(a: GenerateArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => SynthConfig::from_toml_str(&read_text(p)?)?,
        None => SynthConfig::default(),
    };
    if let Some(u) = a.users {
        if u == 0 {
            usage_error("--users must be positive");
        }
        cfg.n_users = u;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(n) = a.forgery_noise {
        cfg.forgery_noise = n;
    }
    let files = generate_to(&cfg, &a.out)?;
    println!("wrote {} users, {files} files to {}", cfg.n_users, a.out.display());
    Ok(())
}

fn cmd_extract(a: ExtractArgs) -> Result<()> {
    let mut run = RunConfig::load(a.config.as_deref())?;
    if a.no_normalize {
        run.features.normalize = false;
    }
    let records = load_records(&a.data)?;
    let store = extract_all(&records, &run.features)?;
    for (key, f) in &store {
        let path = a
            .out
            .join(&key.user)
            .join(format!("{}_{}_{}.csv", key.kind.tag(), key.session, key.index));
        fs::create_dir_all(path.parent().expect("has parent"))?;
        let file = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        f.write_csv(std::io::BufWriter::new(file))?;
    }
    println!("wrote {} feature files to {}", store.len(), a.out.display());
    Ok(())
}

fn load_records(root: &Path) -> Result<Vec<SignatureRecord>> {
    if !root.is_dir() {
        bail!("dataset directory {} does not exist", root.display());
    }
    let records = load_corpus(root)?;
    if records.is_empty() {
        bail!("no signatures found under {}", root.display());
    }
    Ok(records)
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

/// Loads the corpus and splits it, applying flag overrides to `run`.
fn prepare(args: &SplitArgs, run: &mut RunConfig) -> Result<DatasetSplit> {
    if let Some(n) = args.dev_users {
        run.dev_users = Some(n);
    }
    if let Some(s) = args.seed {
        run.seed = s;
    }
    let records = load_records(&args.data)?;
    let n_users = records
        .iter()
        .map(|r| r.key.user.as_str())
        .collect::<std::collections::BTreeSet<_>>()
        .len();
    let n_dev = run.dev_users.unwrap_or(n_users * 3 / 4);
    Ok(build_split(&records, n_dev, run.counts)?)
}

fn features_for(split: &DatasetSplit, partition: Partition, run: &RunConfig) -> Result<FeatureStore> {
    Ok(extract_all(split.records(partition), &run.features)?)
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let mut run = RunConfig::load(a.split.config.as_deref())?;
    if let Some(n) = a.iterations {
        run.train.max_iterations = n;
    }
    if let Some(x) = a.learning_rate {
        run.train.learning_rate = x;
    }
    if let Some(n) = a.batch_size {
        run.train.batch_size = n;
    }
    if let Some(n) = a.patience {
        run.train.patience = n;
    }
    let log_path = a.log.clone().unwrap_or_else(|| a.model.with_extension("csv"));
    let split = prepare(&a.split, &mut run)?;
    run.train.seed = run.seed;
    run.train.validate()?;
    let n_dev = split.development_users.len();
    if n_dev < 2 {
        bail!("training needs at least 2 development users, got {n_dev}");
    }
    let pairs = build_pairs(&split, Partition::Development);
    let store = features_for(&split, Partition::Development, &run)?;
    println!(
        "development: {n_dev} users, {} genuine and {} forgery pairs",
        pairs.genuine_count(),
        pairs.impostor_count()
    );

    let model = SiameseModel::new(run.model, &mut rng_for(run.seed, INIT_STREAM))?;
    let n_enrollment = run.counts.enrollment;
    let outcome = train(model, &pairs, &store, &run.train, |m, it| {
        let d = siamese_dev_metrics(m, &pairs, &store, n_enrollment)?;
        println!("iteration {it}: dev EER 1vs1 {:.2}%, 4vs1 {:.2}%", d.eer_1vs1, d.eer_4vs1);
        Ok(Some(d))
    })?;
    save_model(&outcome.best, &a.model)?;
    let log = fs::File::create(&log_path).with_context(|| format!("creating {}", log_path.display()))?;
    write_training_log(std::io::BufWriter::new(log), &outcome.history)?;

    println!("model written to {}", a.model.display());
    println!("training log written to {}", log_path.display());
    match outcome.history.iter().find(|r| r.iteration == outcome.best_iteration) {
        Some(rec) => {
            let dev = rec.dev.expect("scheduled iterations carry metrics");
            println!(
                "best iteration {}: cost {:.4}, dev EER 1vs1 {:.2}%, 4vs1 {:.2}%",
                rec.iteration, rec.mean_cost, dev.eer_1vs1, dev.eer_4vs1
            );
        }
        None => {
            let d = siamese_dev_metrics(&outcome.best, &pairs, &store, n_enrollment)?;
            println!(
                "no iterations run; initial model dev EER 1vs1 {:.2}%, 4vs1 {:.2}%",
                d.eer_1vs1, d.eer_4vs1
            );
        }
    }
    Ok(())
}

struct Evaluated {
    rows: Vec<ResultRow>,
    sets: Vec<ScoreSet>,
}

impl Evaluated {
    fn push(&mut self, sets: impl IntoIterator<Item = ScoreSet>) -> Result<()> {
        for s in sets {
            self.rows.push(result_row(&s)?);
            self.sets.push(s);
        }
        Ok(())
    }
}

fn cmd_evaluate(a: EvaluateArgs) -> Result<()> {
    if a.model.is_none() && !a.baseline {
        usage_error("evaluate needs --model and/or --baseline");
    }
    let mut run = RunConfig::load(a.split.config.as_deref())?;
    let model = match &a.model {
        Some(p) => Some(load_model(p).with_context(|| format!("loading model {}", p.display()))?),
        None => None,
    };
    let split = prepare(&a.split, &mut run)?;
    let n_eval = split.evaluation_users.len();
    if n_eval == 0 {
        bail!("no evaluation users: all users are in the development partition");
    }
    let pairs = build_pairs(&split, Partition::Evaluation);
    let random = a
        .random_forgeries
        .then(|| build_random_forgery_trials(&split, Partition::Evaluation));
    let store = features_for(&split, Partition::Evaluation, &run)?;
    let n_enrollment = run.counts.enrollment;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;

    println!(
        "evaluation: {n_eval} users, {} genuine and {} forgery pairs ({} x {} x {n_eval} genuine 1vs1 scores)",
        pairs.genuine_count(),
        pairs.impostor_count(),
        n_enrollment,
        run.counts.test_genuine
    );

    let mut out = Evaluated {
        rows: Vec::new(),
        sets: Vec::new(),
    };
    if let Some(model) = &model {
        let scores = siamese_scores(model, &pairs.pairs, &store)?;
        out.push(protocol_sets(SIAMESE_SYSTEM, &scores, n_enrollment)?)?;
        if let Some(r) = &random {
            let scores = siamese_scores(model, &r.pairs, &store)?;
            out.push(protocol_sets(&format!("{SIAMESE_SYSTEM}-random"), &scores, n_enrollment)?)?;
        }
    }
    if a.baseline {
        let mut dtw = run.dtw.clone();
        if let Some(cols) = &a.columns {
            dtw.columns = cols.clone();
        }
        if a.sffs {
            let dev_store = features_for(&split, Partition::Development, &run)?;
            let report = sffs_select(&split, &dev_store, run.sffs_k_max, dtw.band)
                .context("DTW feature selection on the development users")?;
            let path = a.out.join("sffs_report.txt");
            fs::write(&path, report.to_text()).with_context(|| format!("writing {}", path.display()))?;
            println!(
                "selected DTW columns {:?} (dev 4vs1 EER {:.2}%), report in {}",
                report.selected,
                report.eer_percent,
                path.display()
            );
            dtw.columns = report.selected;
        }
        dtw.validate()?;
        let scores = dtw_scores(&pairs.pairs, &store, &dtw)?;
        out.push(protocol_sets(DTW_SYSTEM, &scores, n_enrollment)?)?;
        if let Some(r) = &random {
            let scores = dtw_scores(&r.pairs, &store, &dtw)?;
            out.push(protocol_sets(&format!("{DTW_SYSTEM}-random"), &scores, n_enrollment)?)?;
        }
    }

    let results = a.out.join("results.csv");
    write_results_csv(create(&results)?, &out.rows)?;
    let mut systems: Vec<&str> = out.sets.iter().map(|s| s.system.as_str()).collect();
    systems.dedup();
    for system in systems {
        let curves = out
            .sets
            .iter()
            .filter(|s| s.system == system)
            .map(|s| Ok((s, det_curve(s, DET_POINTS)?)))
            .collect::<Result<Vec<_>>>()?;
        let path = a.out.join(format!("det_{system}.csv"));
        write_det_csv(create(&path)?, &curves)?;
    }
    print_table(&mut std::io::stdout(), &out.rows)?;
    println!("results written to {}", results.display());
    Ok(())
}

fn create(path: &Path) -> Result<std::io::BufWriter<fs::File>> {
    let f = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(std::io::BufWriter::new(f))
}

fn print_table<W: Write>(w: &mut W, rows: &[ResultRow]) -> Result<()> {
    writeln!(
        w,
        "{:<16} {:<8} {:>9} {:>9} {:>9}  {}",
        "system", "protocol", "EER %", "genuine", "impostor", "published EER % (reference only)"
    )?;
    for r in rows {
        let reference = r.reference_eer_percent.map_or("-".to_string(), |e| format!("{e:.2}"));
        writeln!(
            w,
            "{:<16} {:<8} {:>9.2} {:>9} {:>9}  {reference}",
            r.system, r.protocol, r.eer_percent, r.n_genuine, r.n_impostor
        )?;
    }
    Ok(())
}

fn cmd_report(a: ReportArgs) -> Result<()> {
    let mut rows = Vec::new();
    for p in &a.results {
        let f = fs::File::open(p).with_context(|| format!("opening {}", p.display()))?;
        rows.extend(read_results_csv(f).with_context(|| format!("reading {}", p.display()))?);
    }
    print_table(&mut std::io::stdout(), &rows)?;
    println!("Published figures are BiosecurID skilled-forgery results, listed for orientation only.");
    Ok(())
}
