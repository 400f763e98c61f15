use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fairscope::cohort::{generate_synthetic, write_csv, Preset, SyntheticConfig};
use fairscope::pipeline::{self, audit_to_dir, render_from_report, AuditConfig, OUTPUT_DIR_ENV};
use log::info;

/// Fairness audit for multi-class neuroimaging classifiers.
#[derive(Parser)]
#[command(name = "fairscope", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic cohort as CSV.
    Generate(GenerateArgs),
    /// Run an audit and write report.json, tables and charts.
    Audit(AuditArgs),
    /// Re-render tables and charts from an existing report.json.
    Report(ReportArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Synthetic cohort config (JSON).
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Named cohort: unbiased, biased, skew_only, proxy_bearing.
    #[arg(long, value_parser = parse_preset)]
    preset: Option<Preset>,
    /// Overrides the generator seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; the cohort is written to `cohort.csv` inside it.
    #[arg(long, env = OUTPUT_DIR_ENV)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AuditArgs {
    /// Audit config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides the config and $FAIRSCOPE_OUT).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Maximum number of worker threads.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    jobs: Option<u64>,
}

#[derive(Args)]
struct ReportArgs {
    /// Existing report.json.
    #[arg(long, alias = "config")]
    report: PathBuf,
    /// Where to write the tables and charts; defaults to the report's directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_preset(s: &str) -> Result<Preset, String> {
    Preset::parse(s).ok_or_else(|| {
        let names: Vec<_> = Preset::ALL.iter().map(|p| p.as_str()).collect();
        format!("unknown preset `{s}` (expected one of {})", names.join(", "))
    })
}

const COHORT_FILE: &str = "cohort.csv";
const DEFAULT_OUT: &str = "fairscope-out";

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => generate(a),
        Command::Audit(a) => audit(a),
        Command::Report(a) => report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

type Outcome = Result<(), Box<dyn std::error::Error>>;

fn generate(args: GenerateArgs) -> Outcome {
    let mut config = match (&args.config, args.preset) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            serde_json::from_str::<SyntheticConfig>(&text).map_err(|e| format!("{}: {e}", path.display()))?
        }
        (None, Some(p)) => p.config(),
        (None, None) => Preset::Unbiased.config(),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    config.validate()?;
    let dir = args.out.unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    std::fs::create_dir_all(&dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    let cohort = generate_synthetic(&config)?;
    let path = dir.join(COHORT_FILE);
    write_csv(&cohort, &path)?;
    info!("wrote {} records to {}", cohort.len(), path.display());
    Ok(())
}

fn audit(args: AuditArgs) -> Outcome {
    let mut config = AuditConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(out) = args.out {
        config.output_dir = Some(out);
    }
    let dir = config.resolved_output_dir();
    let jobs = args.jobs.map(|j| j as usize);
    info!("auditing {} (config hash {}) into {}", args.config.display(), config.hash(), dir.display());
    let (_, written) = audit_to_dir(&config, jobs, &dir)
        .map_err(|e| format!("{e} (see {})", dir.join(pipeline::ERROR_LOG).display()))?;
    for path in written {
        info!("wrote {}", path.display());
    }
    Ok(())
}

fn report(args: ReportArgs) -> Outcome {
    let dir = match args.out {
        Some(d) => d,
        None => args.report.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    let dir = if dir.as_os_str().is_empty() { PathBuf::from(".") } else { dir };
    std::fs::create_dir_all(&dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    for path in render_from_report(&args.report, &dir)? {
        info!("wrote {}", path.display());
    }
    Ok(())
}
