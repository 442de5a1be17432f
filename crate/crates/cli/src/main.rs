mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use log::info;
use reinsert_core::gap_detection::build_missing_info;
use reinsert_core::pipeline::{
    aggregate, read_corpus, read_results, write_results, CorpusError, Pipeline, PipelineConfig,
    PipelineError, ReportFormat, Scorer,
};
use reinsert_core::providers::{ProviderError, Providers};
use reinsert_core::strategies::prompts;
use reinsert_core::text_analysis::{Analyzer, Stopwords};
use serde_json::json;
use thiserror::Error;

use config::RunConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Config(_) => "config",
            CliError::Corpus(_) => "corpus",
            CliError::Input(_) => "input",
            CliError::Provider(_) => "provider",
            CliError::Pipeline(_) => "pipeline",
            CliError::Io { .. } => "io",
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "reinsert",
    version,
    about = "Detect and restore information lost in text simplification"
)]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Seed for the random strategies (A4, A5).
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Use mock backends for every capability.
    #[arg(long, global = true)]
    mock_all: bool,
    /// Documents processed concurrently.
    #[arg(long, global = true, value_name = "N")]
    workers: Option<usize>,
    #[arg(long, global = true, value_name = "PATH")]
    cache_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    no_cache: bool,
    /// Override any configuration key, e.g. `--set chat.mode=echo`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Process a corpus and write results and reports.
    Run {
        /// JSONL corpus; overrides `corpus` in the configuration.
        corpus: Option<PathBuf>,
        #[arg(long, value_name = "DIR")]
        output_dir: Option<PathBuf>,
        /// Comma-separated subset of A1..A5.
        #[arg(long, value_delimiter = ',')]
        strategies: Option<Vec<String>>,
    },
    /// Print what a simplification lost, as JSON.
    Detect {
        original: PathBuf,
        simplified: PathBuf,
    },
    /// Print the metrics of a candidate text against a reference, as JSON.
    Score {
        reference: PathBuf,
        candidate: PathBuf,
    },
    /// Re-aggregate a results file.
    Report {
        results: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Csv,
    Json,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Text => ReportFormat::Text,
            Format::Csv => ReportFormat::Csv,
            Format::Json => ReportFormat::Json,
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut table = match &cli.config {
        Some(path) => config::read_table(path)?,
        None => toml::Table::new(),
    };
    for assignment in &cli.overrides {
        config::apply_assignment(&mut table, assignment)?;
    }
    if let Some(workers) = cli.workers {
        config::set_key(&mut table, "workers", toml::Value::Integer(workers as i64))?;
    }
    if let Some(dir) = &cli.cache_dir {
        config::set_key(
            &mut table,
            "cache.dir",
            toml::Value::String(dir.display().to_string()),
        )?;
    }
    if cli.no_cache {
        config::set_key(&mut table, "cache.enabled", toml::Value::Boolean(false))?;
    }
    if let Command::Run {
        corpus,
        output_dir,
        strategies,
    } = &cli.command
    {
        if let Some(corpus) = corpus {
            config::set_key(
                &mut table,
                "corpus",
                toml::Value::String(corpus.display().to_string()),
            )?;
        }
        if let Some(dir) = output_dir {
            config::set_key(
                &mut table,
                "output_dir",
                toml::Value::String(dir.display().to_string()),
            )?;
        }
        if let Some(list) = strategies {
            let list = list
                .iter()
                .map(|s| toml::Value::String(s.trim().to_uppercase()))
                .collect();
            config::set_key(&mut table, "strategies", toml::Value::Array(list))?;
        }
    }
    let mut config = config::from_table(table)?;
    if cli.seed.is_some() {
        config.seed = cli.seed;
    }
    if cli.mock_all {
        config.chat.mock = true;
        config.embed.mock = true;
        config.ner.mock = true;
        config.summarize.mock = true;
    }
    Ok(config)
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn read_document(path: &Path) -> Result<String, CliError> {
    let text = read_text(path)?;
    if text.trim().is_empty() {
        return Err(CliError::Input(format!("{} is empty", path.display())));
    }
    Ok(text.trim().to_string())
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn load_stopwords(config: &RunConfig) -> Result<Stopwords, CliError> {
    match &config.stopwords {
        Some(path) => Stopwords::from_file(path).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        }),
        None => Ok(Stopwords::bundled().clone()),
    }
}

fn build_providers(config: &RunConfig, stopwords: &Stopwords) -> Result<Providers, CliError> {
    let providers = Providers::from_config(&config.providers(), stopwords)?;
    if !config.embed.mock {
        providers.embed.handshake()?;
    }
    Ok(providers)
}

fn cmd_run(config: RunConfig) -> Result<ExitCode, CliError> {
    config.validate()?;
    let corpus = config
        .corpus
        .clone()
        .ok_or_else(|| CliError::Config("no corpus given (pass a path or set `corpus`)".into()))?;
    let docs = read_corpus(&corpus)?;
    let stopwords = load_stopwords(&config)?;
    let providers = build_providers(&config, &stopwords)?;
    let simplify_template = match &config.simplify_prompt {
        Some(path) => read_text(path)?,
        None => prompts::SIMPLIFY_TEMPLATE.to_string(),
    };
    let pipeline = Pipeline::new(
        PipelineConfig {
            strategies: config.strategies.clone(),
            run_seed: config.seed,
            rouge: config.rouge(),
            simplify_template,
            workers: config.workers,
        },
        providers,
        stopwords,
    )?;

    let results = pipeline.run_corpus(&docs);
    fs::create_dir_all(&config.output_dir).map_err(|source| CliError::Io {
        path: config.output_dir.clone(),
        source,
    })?;
    let results_path = config.output_dir.join("results.jsonl");
    write_results(&results_path, &results).map_err(|source| CliError::Io {
        path: results_path.clone(),
        source,
    })?;
    info!("wrote {}", results_path.display());

    let report = match aggregate(&results) {
        Ok(r) => r,
        Err(e) => {
            fail(&e.into());
            return Ok(ExitCode::from(2));
        }
    };
    for format in ReportFormat::ALL {
        let path = config
            .output_dir
            .join(format!("report.{}", format.extension()));
        write_file(&path, &report.render(format))?;
    }
    print!("{}", report.to_text());

    let failed = results.iter().filter(|r| !r.fully_succeeded()).count();
    if failed > 0 {
        eprintln!(
            "warning: {failed} of {} documents had failures; see {}",
            results.len(),
            results_path.display()
        );
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_detect(config: RunConfig, original: &Path, simplified: &Path) -> Result<ExitCode, CliError> {
    let original = read_document(original)?;
    let simplified = read_document(simplified)?;
    let stopwords = load_stopwords(&config)?;
    let providers = Providers::from_config(&config.providers(), &stopwords)?;
    let info = build_missing_info(
        &Analyzer::new(&stopwords),
        &original,
        &simplified,
        &providers.ner,
    )?;
    let out = json!({
        "missing_words": info.missing_words,
        "missing_entities": info.missing_entities,
        "k": info.k,
    });
    println!("{out}");
    Ok(ExitCode::SUCCESS)
}

fn cmd_score(config: RunConfig, reference: &Path, candidate: &Path) -> Result<ExitCode, CliError> {
    let reference = read_document(reference)?;
    let candidate = read_document(candidate)?;
    let stopwords = load_stopwords(&config)?;
    let providers = build_providers(&config, &stopwords)?;
    let scorer = Scorer::new(&providers, Analyzer::new(&stopwords), config.rouge());
    let scores = scorer.score(&scorer.reference(&reference)?, &candidate)?;
    println!(
        "{}",
        serde_json::to_string(&scores).expect("scores serialize")
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_report(results: &Path, format: Format) -> Result<ExitCode, CliError> {
    let results = read_results(results)?;
    print!("{}", aggregate(&results)?.render(format.into()));
    Ok(ExitCode::SUCCESS)
}

fn execute(cli: Cli) -> Result<ExitCode, CliError> {
    let config = load_config(&cli)?;
    match &cli.command {
        Command::Run { .. } => cmd_run(config),
        Command::Detect {
            original,
            simplified,
        } => cmd_detect(config, original, simplified),
        Command::Score {
            reference,
            candidate,
        } => cmd_score(config, reference, candidate),
        Command::Report { results, format } => cmd_report(results, *format),
    }
}

fn fail(err: &CliError) -> ExitCode {
    let message = err.to_string().replace(['\n', '\r'], " ");
    eprintln!("error[{}]: {message}", err.kind());
    ExitCode::from(1)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let first = e
                .to_string()
                .lines()
                .next()
                .unwrap_or_default()
                .trim_start_matches("error: ")
                .to_string();
            return fail(&CliError::Usage(first));
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => fail(&e),
    }
}
