use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use emrbench_core::check::self_test;
use emrbench_core::eval::{load_bundle, render_tables, ReportBundle};
use emrbench_core::experiment::{run_experiment, ExperimentConfig};
use emrbench_core::synth::{generate, load_config, write_cohort};
use emrbench_core::Error;

const EXIT_CONFIG: u8 = 1;
const EXIT_RUNTIME: u8 = 2;

#[derive(Parser)]
#[command(name = "emrbench", version, about = "EMR data-quality benchmark for in-ICU mortality prediction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment grid and write reports
    Run {
        config: PathBuf,
        /// Worker threads for training runs
        #[arg(long)]
        workers: Option<usize>,
        /// Output directory, overriding the config
        #[arg(long)]
        out: Option<PathBuf>,
        /// Added to every training seed
        #[arg(long)]
        seed_offset: Option<u64>,
    },
    /// Generate a synthetic cohort as catalog, event and metadata CSVs
    Synth {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the self-test suite
    Check,
    /// Re-render report tables and plot data from a bundle
    Report {
        bundle: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn fail(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    let mut source = std::error::Error::source(e);
    while let Some(s) = source {
        eprintln!("  caused by: {s}");
        source = s.source();
    }
    ExitCode::from(if e.is_config_error() { EXIT_CONFIG } else { EXIT_RUNTIME })
}

fn print_summary(bundle: &ReportBundle) {
    let mut study = None;
    for r in &bundle.rows {
        if study != Some(r.study) {
            println!("\n[{}]", r.study.file_stem());
            study = Some(r.study);
        }
        let std = r.auroc_std.map(|s| format!(" ± {s:.3}")).unwrap_or_default();
        println!(
            "  {:<16} {:<4} {:<6} {:.3}{std} (n={})",
            r.row_label,
            r.model.label(),
            r.test_set,
            r.auroc_mean,
            r.n_seeds
        );
    }
}

fn run(config: &Path, workers: Option<usize>, out: Option<PathBuf>, seed_offset: Option<u64>) -> Result<(), Error> {
    let mut cfg = ExperimentConfig::load(config)?;
    if workers.is_some() {
        cfg.workers = workers;
    }
    if let Some(out) = out {
        cfg.output_dir = out;
    }
    if let Some(k) = seed_offset {
        cfg.seed_offset = k;
    }
    cfg.validate()?;
    let start = Instant::now();
    let bundle = run_experiment(&cfg)?;
    print_summary(&bundle);
    eprintln!(
        "\n{} runs in {:.1}s; reports in {}",
        bundle.runs.len(),
        start.elapsed().as_secs_f64(),
        cfg.output_dir.display()
    );
    Ok(())
}

fn synth(config: &Path, out: Option<PathBuf>) -> Result<(), Error> {
    let (cfg, configured_out) = load_config(config)?;
    let dir = out.or(configured_out).unwrap_or_else(|| PathBuf::from("synth_out"));
    let cohort = generate(&cfg)?;
    let files = write_cohort(&cohort, &dir)?;
    println!(
        "{} encounters, {} events -> {}, {}, {}",
        cohort.metas.len(),
        cohort.records.len(),
        files.catalog.display(),
        files.events.display(),
        files.meta.display()
    );
    Ok(())
}

fn report(bundle: &Path, out: Option<PathBuf>) -> Result<(), Error> {
    let b = load_bundle(bundle)?;
    let dir = out.unwrap_or_else(|| bundle.parent().unwrap_or(Path::new(".")).to_path_buf());
    render_tables(&b, &dir)?;
    print_summary(&b);
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return if usage { ExitCode::from(EXIT_CONFIG) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Run {
            config,
            workers,
            out,
            seed_offset,
        } => run(&config, workers, out, seed_offset),
        Command::Synth { config, out } => synth(&config, out),
        Command::Report { bundle, out } => report(&bundle, out),
        Command::Check => {
            let outcomes = self_test();
            for c in &outcomes {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            if outcomes.iter().all(|c| c.passed) {
                Ok(())
            } else {
                return ExitCode::from(EXIT_RUNTIME);
            }
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e),
    }
}
