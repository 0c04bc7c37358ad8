//! `kwgen` command-line front end.
//!
//! Exit codes: 0 success, 2 invalid input or configuration, 3 tool failure.

pub mod commands;
pub mod config;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use thiserror::Error;

use kwgen_core::{Error as CoreError, PolicyVariant, ToolError};

use crate::commands::{CampaignOutcomeError, DatasetCheck, MAX_REPORTED_ERRORS};
use crate::config::RunConfig;

pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_TOOL: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Tool(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Tool(_) => EXIT_TOOL,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Tool(_) | CoreError::GenerationFailure(_) => CliError::Tool(e.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<ToolError> for CliError {
    fn from(e: ToolError) -> Self {
        CliError::Tool(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "kwgen", version, about = "Adaptive keyword generation for sponsored search campaigns")]
pub struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Where to write the JSON result (defaults to the config's `output`, then stdout).
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Only print errors.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a campaign with the tools named in the config.
    Run,
    /// Like `run`, but refuses any remote tool.
    Simulate,
    /// Run the same campaign under several allocation policies.
    Ablate {
        /// Comma-separated: full, fixed:0.5, wide, deep.
        #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
        variants: Vec<String>,
    },
    /// Score keyword lists against a dataset and reference text.
    Evaluate {
        /// Keyword list file, optionally as NAME=PATH. Repeatable.
        #[arg(long = "generated", required = true, value_name = "[NAME=]PATH")]
        generated: Vec<String>,
        #[arg(long, value_name = "PATH")]
        dataset: PathBuf,
        /// Reference text (e.g. concatenated search snippets).
        #[arg(long, value_name = "PATH")]
        references: PathBuf,
        /// Only use dataset rows for this product.
        #[arg(long)]
        product: Option<String>,
        /// Hash embedder dimension.
        #[arg(long, default_value_t = kwgen_core::tools::DEFAULT_HASH_DIM)]
        dim: usize,
        /// Print JSON instead of text tables.
        #[arg(long)]
        json: bool,
    },
    /// Dataset utilities.
    Dataset {
        #[command(subcommand)]
        action: DatasetCommand,
    },
}

#[derive(Debug, Subcommand)]
pub enum DatasetCommand {
    /// Check a KPI dataset and list offending lines.
    Validate { path: PathBuf },
}

fn load_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| CliError::Validation("--config is required for this command".into()))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.campaign.seed = seed;
    }
    Ok(cfg)
}

fn write_json(target: Option<&Path>, json: &str, stdout: &mut dyn Write) -> Result<(), CliError> {
    match target {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)
                    .map_err(|e| CliError::Validation(format!("cannot create {}: {e}", dir.display())))?;
            }
            std::fs::write(path, format!("{json}\n"))
                .map_err(|e| CliError::Validation(format!("cannot write {}: {e}", path.display())))
        }
        None => writeln!(stdout, "{json}").map_err(|e| CliError::Validation(format!("stdout: {e}"))),
    }
}

fn say(cli: &Cli, stdout: &mut dyn Write, text: &str) {
    if !cli.quiet {
        let _ = write!(stdout, "{text}");
    }
}

fn run_command(cli: &Cli, hermetic_only: bool, stdout: &mut dyn Write) -> Result<(), CliError> {
    let cfg = load_config(cli)?;
    if hermetic_only && !cfg.is_hermetic() {
        return Err(CliError::Validation(
            "simulate only accepts mock/catalog models, fixture search and the hash embedder".into(),
        ));
    }
    let target = cli.out.clone().or_else(|| cfg.output.clone());
    match commands::run_with_policy(&cfg, cfg.policy) {
        Ok(run) => {
            write_json(target.as_deref(), &run.report.to_json(), stdout)?;
            if target.is_some() {
                let counts: Vec<String> = run.report.category_counts().iter().map(ToString::to_string).collect();
                say(
                    cli,
                    stdout,
                    &format!(
                        "{} steps, categories {}, objective total {}\n",
                        run.report.steps.len(),
                        counts.join(" -> "),
                        run.report.objective_total
                    ),
                );
            }
            Ok(())
        }
        Err(CampaignOutcomeError::Failed(failure)) => {
            if let Some(partial) = &failure.partial {
                write_json(target.as_deref(), &partial.report.to_json(), stdout)?;
            }
            Err(CliError::from(failure.error))
        }
        Err(e) => Err(e.into()),
    }
}

fn ablate_command(cli: &Cli, variants: &[String], stdout: &mut dyn Write) -> Result<(), CliError> {
    let cfg = load_config(cli)?;
    let parsed = variants
        .iter()
        .map(|v| v.parse::<PolicyVariant>())
        .collect::<Result<Vec<_>, _>>()?;
    let report = commands::ablate(&cfg, &parsed)?;
    let json = serde_json::to_string_pretty(&report).expect("ablation report serializes");
    match &cli.out {
        Some(path) => {
            write_json(Some(path), &json, stdout)?;
            say(cli, stdout, &report.table().render_text());
        }
        None => write_json(None, &json, stdout)?,
    }
    Ok(())
}

fn split_named(arg: &str) -> (String, PathBuf) {
    match arg.split_once('=') {
        Some((name, path)) if !name.is_empty() => (name.to_string(), PathBuf::from(path)),
        _ => {
            let path = PathBuf::from(arg);
            let name = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| arg.to_string());
            (name, path)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn evaluate_command(
    cli: &Cli,
    generated: &[String],
    dataset: &Path,
    references: &Path,
    product: Option<&str>,
    dim: usize,
    json: bool,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    if dim < 8 {
        return Err(CliError::Validation("--dim must be >= 8".into()));
    }
    let mut methods = Vec::new();
    for arg in generated {
        let (name, path) = split_named(arg);
        methods.push((name, commands::read_keyword_list(&path)?));
    }
    let rows = commands::load_rows(dataset, product)?;
    let reference_text = std::fs::read_to_string(references)
        .map_err(|e| CliError::Validation(format!("cannot read references {}: {e}", references.display())))?;
    let embedder = std::sync::Arc::new(kwgen_core::HashEmbedder::<f64>::new(dim));
    let report = commands::evaluate(&methods, rows, &reference_text, embedder)?;
    let text = serde_json::to_string_pretty(&report).expect("evaluation report serializes");
    if let Some(path) = &cli.out {
        write_json(Some(path), &text, stdout)?;
    }
    if json {
        write_json(None, &text, stdout)?;
    } else {
        say(
            cli,
            stdout,
            &format!(
                "KPI (normalized)\n{}\nRelevance and similarity\n{}",
                report.kpi.render_text(),
                report.comparison.render_text()
            ),
        );
    }
    Ok(())
}

fn dataset_validate(cli: &Cli, path: &Path, stdout: &mut dyn Write) -> Result<(), CliError> {
    match commands::check_dataset(path)? {
        DatasetCheck::Valid { rows } => {
            say(cli, stdout, &format!("{}: {rows} valid rows\n", path.display()));
            Ok(())
        }
        DatasetCheck::Invalid { errors } => {
            let mut msg = format!("{}: {} problem(s)", path.display(), errors.len());
            for e in errors.iter().take(MAX_REPORTED_ERRORS) {
                msg.push_str(&format!("\n  {e}"));
            }
            if errors.len() > MAX_REPORTED_ERRORS {
                msg.push_str(&format!("\n  ... and {} more", errors.len() - MAX_REPORTED_ERRORS));
            }
            Err(CliError::Validation(msg))
        }
    }
}

/// Runs a parsed command line, writing normal output to `stdout`.
pub fn execute(cli: &Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    match &cli.command {
        Command::Run => run_command(cli, false, stdout),
        Command::Simulate => run_command(cli, true, stdout),
        Command::Ablate { variants } => ablate_command(cli, variants, stdout),
        Command::Evaluate {
            generated,
            dataset,
            references,
            product,
            dim,
            json,
        } => evaluate_command(cli, generated, dataset, references, product.as_deref(), *dim, *json, stdout),
        Command::Dataset {
            action: DatasetCommand::Validate { path },
        } => dataset_validate(cli, path, stdout),
    }
}

/// Parses `args` (including the program name) and runs them, returning the
/// process exit code. Errors go to `stderr`.
pub fn run_cli<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { 0 };
            let rendered = e.render().to_string();
            if code == 0 {
                let _ = write!(stdout, "{rendered}");
            } else {
                let _ = write!(stderr, "{rendered}");
            }
            return code;
        }
    };
    match execute(&cli, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
