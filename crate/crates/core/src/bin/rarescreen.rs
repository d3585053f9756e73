use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use rarescreen::cohort::{generate_synthetic_cohort, load_cohort, validate_cohort, Cohort, SynthSpec};
use rarescreen::evaluation::SelectionPlacement;
use rarescreen::model::Algorithm;
use rarescreen::pipeline::{
    derive_prescreen_rules, eval_summary_text, eval_table_tsv, load_artifact, prescreen_text, run_pipeline,
    save_artifact, select_on_all, top_features, top_features_text, top_features_tsv, vectorize_cohort, PipelineConfig,
    ReportBundle,
};
use rarescreen::vectorizer::FeatureKind;

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_NOT_CONVERGED: u8 = 3;

#[derive(Parser)]
#[command(name = "rarescreen", version, about = "Rare-disease screening from patient records")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic labeled cohort as JSON lines.
    Generate {
        #[arg(long)]
        out: PathBuf,
        /// TOML generator settings.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        positives: Option<usize>,
        #[arg(long)]
        negatives: Option<usize>,
    },
    /// Check a cohort file and list invalid records.
    Validate {
        #[arg(long)]
        cohort: PathBuf,
    },
    /// Build the feature space and design matrix.
    Vectorize(StageArgs),
    /// Filter and L1-select features; write the ranked feature table.
    Select(StageArgs),
    /// Cross-validated grid search of the enabled algorithms.
    GridSearch(StageArgs),
    /// Grid-search, then fit the best configuration and save it.
    Train {
        #[command(flatten)]
        stage: StageArgs,
        /// Artifact path.
        #[arg(long)]
        artifact: PathBuf,
    },
    /// Full run: every table plus the model artifact.
    Report(StageArgs),
    /// Derive high-recall prescreen rules from the ranked features.
    Prescreen(StageArgs),
    /// Score a cohort with a saved artifact.
    Predict {
        #[arg(long)]
        artifact: PathBuf,
        #[arg(long)]
        cohort: PathBuf,
        /// Output TSV; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SelectionMode {
    Off,
    PerFold,
    Global,
}

#[derive(Args)]
struct StageArgs {
    #[arg(long)]
    cohort: PathBuf,
    /// TOML pipeline config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory for output files; stdout summary only when omitted.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    cv_k: Option<usize>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, value_enum)]
    selection: Option<SelectionMode>,
    /// Enable unigram and bigram note features.
    #[arg(long)]
    notes: bool,
    /// Restrict to these algorithms (repeatable).
    #[arg(long = "algorithm", value_parser = parse_algorithm)]
    algorithms: Vec<Algorithm>,
}

fn parse_algorithm(s: &str) -> Result<Algorithm, String> {
    s.parse()
}

struct Failure {
    code: u8,
    message: String,
}

fn data_err(e: impl std::fmt::Display) -> Failure {
    Failure { code: EXIT_DATA, message: e.to_string() }
}

fn usage_err(e: impl std::fmt::Display) -> Failure {
    Failure { code: EXIT_USAGE, message: e.to_string() }
}

impl StageArgs {
    fn config(&self) -> Result<PipelineConfig, Failure> {
        let mut c = match &self.config {
            Some(p) => PipelineConfig::load(p).map_err(usage_err)?,
            None => PipelineConfig::default(),
        };
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(k) = self.cv_k {
            c.cv_k = k;
        }
        if let Some(t) = self.threads {
            c.threads = t;
        }
        match self.selection {
            Some(SelectionMode::Off) => c.selection.enabled = false,
            Some(SelectionMode::PerFold) => {
                c.selection.enabled = true;
                c.selection.placement = SelectionPlacement::PerFold;
            }
            Some(SelectionMode::Global) => {
                c.selection.enabled = true;
                c.selection.placement = SelectionPlacement::Global;
            }
            None => {}
        }
        if self.notes {
            c.enabled_feature_kinds.extend([FeatureKind::Unigram, FeatureKind::Bigram]);
        }
        if !self.algorithms.is_empty() {
            c.grids.retain(|g| self.algorithms.contains(&g.algorithm));
        }
        c.validate().map_err(usage_err)?;
        Ok(c)
    }

    fn cohort(&self) -> Result<Cohort, Failure> {
        load_cohort(&self.cohort).map_err(data_err)
    }
}

fn write_file(dir: &Path, name: &str, text: &str) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(data_err)?;
    fs::write(dir.join(name), text).map_err(data_err)
}

fn run(cli: Cli) -> Result<u8, Failure> {
    match cli.command {
        Command::Generate { out, spec, seed, positives, negatives } => {
            let mut s = match spec {
                Some(p) => {
                    let text = fs::read_to_string(&p).map_err(usage_err)?;
                    toml::from_str::<SynthSpec>(&text).map_err(usage_err)?
                }
                None => SynthSpec::default(),
            };
            if let Some(v) = seed {
                s.seed = v;
            }
            if let Some(v) = positives {
                s.n_positive = v;
            }
            if let Some(v) = negatives {
                s.n_negative = v;
            }
            let cohort = generate_synthetic_cohort(&s).map_err(usage_err)?;
            cohort.save(&out).map_err(data_err)?;
            let (pos, neg) = cohort.label_counts();
            println!("wrote {} records ({pos} positive, {neg} negative) to {}", cohort.len(), out.display());
            Ok(0)
        }
        Command::Validate { cohort } => {
            let c = load_cohort(&cohort).map_err(data_err)?;
            let violations = validate_cohort(&c);
            for v in &violations {
                println!("record {} ({}): {}", v.record_index, v.patient_id, v.reason);
            }
            let (pos, neg) = c.label_counts();
            println!("{} records, {pos} positive, {neg} negative, {} violations", c.len(), violations.len());
            Ok(if violations.is_empty() { 0 } else { EXIT_DATA })
        }
        Command::Vectorize(args) => {
            let config = args.config()?;
            let (space, matrix) = vectorize_cohort(&args.cohort()?, &config).map_err(data_err)?;
            println!("{} rows x {} features", matrix.n_rows(), space.len());
            for (kind, n) in space.kind_counts() {
                println!("  {kind:<12} {n}");
            }
            if let Some(dir) = &args.out_dir {
                write_file(dir, "features.tsv", &space.to_manifest())?;
                let cohort = args.cohort()?;
                let mut rows = String::from("patient_id\tlabel\tcolumns\n");
                for (r, x) in cohort.records.iter().zip(matrix.rows()) {
                    let cols: Vec<String> = x.active().iter().map(u32::to_string).collect();
                    let label = r.label.map_or_else(|| "-".to_string(), |l| l.to_string());
                    rows.push_str(&format!("{}\t{}\t{}\n", r.patient_id, label, cols.join(",")));
                }
                write_file(dir, "matrix.tsv", &rows)?;
            }
            Ok(0)
        }
        Command::Select(args) => {
            let config = args.config()?;
            let (space, matrix) = vectorize_cohort(&args.cohort()?, &config).map_err(data_err)?;
            let selection = select_on_all(&matrix, &config).map_err(data_err)?;
            let top = top_features(&selection.result, &space, config.top_features);
            println!(
                "{} of {} columns pass the filter, {} kept at lambda {}",
                selection.filtered.len(),
                space.len(),
                selection.result.kept_columns.len(),
                selection.result.lambda
            );
            print!("{}", top_features_text(&top));
            if let Some(dir) = &args.out_dir {
                write_file(dir, "top_features.tsv", &top_features_tsv(&top))?;
                let mask: Vec<String> = selection.mask.iter().map(|c| space.descriptor(*c).to_string()).collect();
                write_file(dir, "selected_features.txt", &(mask.join("\n") + "\n"))?;
            }
            Ok(if selection.result.converged { 0 } else { EXIT_NOT_CONVERGED })
        }
        Command::GridSearch(args) => {
            let config = args.config()?;
            let (_, matrix) = vectorize_cohort(&args.cohort()?, &config).map_err(data_err)?;
            let reports = rarescreen::pipeline::evaluate(&matrix, &config).map_err(data_err)?;
            print!("{}", eval_summary_text(&reports));
            if let Some(dir) = &args.out_dir {
                write_file(dir, "eval.tsv", &eval_table_tsv(&reports))?;
                write_file(dir, "eval.txt", &eval_summary_text(&reports))?;
            }
            Ok(if reports.iter().all(|r| r.converged()) { 0 } else { EXIT_NOT_CONVERGED })
        }
        Command::Train { stage, artifact } => {
            let config = stage.config()?;
            let out = run_pipeline(&stage.cohort()?, &config).map_err(data_err)?;
            save_artifact(&out.artifact, &artifact).map_err(data_err)?;
            let best = &out.reports[out.best_report];
            println!("best: {} ({}) mean F1 {:.3}", best.algorithm, best.best_config.describe(), best.best_mean_f1);
            println!("artifact written to {}", artifact.display());
            Ok(if out.converged() { 0 } else { EXIT_NOT_CONVERGED })
        }
        Command::Report(args) => {
            let config = args.config()?;
            let out = run_pipeline(&args.cohort()?, &config).map_err(data_err)?;
            let bundle = ReportBundle::from_output(&out);
            print!("{}", bundle.get("eval.txt").unwrap_or_default());
            if let Some(dir) = &args.out_dir {
                bundle.write_to(dir).map_err(data_err)?;
                save_artifact(&out.artifact, dir.join("model.json")).map_err(data_err)?;
            }
            Ok(if out.converged() { 0 } else { EXIT_NOT_CONVERGED })
        }
        Command::Prescreen(args) => {
            let config = args.config()?;
            let cohort = args.cohort()?;
            let (space, matrix) = vectorize_cohort(&cohort, &config).map_err(data_err)?;
            let selection = select_on_all(&matrix, &config).map_err(data_err)?;
            let top = top_features(&selection.result, &space, config.top_features);
            let rules = derive_prescreen_rules(&cohort, &top, config.prescreen_target_recall, &config.vectorizer)
                .map_err(data_err)?;
            let text = prescreen_text(&rules);
            print!("{text}");
            if let Some(dir) = &args.out_dir {
                write_file(dir, "prescreen.txt", &text)?;
            }
            Ok(0)
        }
        Command::Predict { artifact, cohort, out } => {
            let a = load_artifact(&artifact).map_err(data_err)?;
            let c = load_cohort(&cohort).map_err(data_err)?;
            let labels = a.predict_records(&c.records).map_err(data_err)?;
            let mut text = String::from("patient_id\tprediction\n");
            for (r, l) in c.records.iter().zip(labels) {
                text.push_str(&format!("{}\t{}\n", r.patient_id, l));
            }
            match out {
                Some(p) => fs::write(p, text).map_err(data_err)?,
                None => print!("{text}"),
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
