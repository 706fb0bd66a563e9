use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bdpsim_cli::{
    apply_overrides, emit_grid, emit_series, emit_summary, parse_config, report, ConfigError,
};
use bdpsim_core::scenarios::{
    prime, run_contention, run_convergence_grid, run_repetitions, ScenarioConfig,
};
use bdpsim_core::{ResumeMode, TokenMode, TokenStore};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "bdpsim",
    version,
    about = "Deterministic long-delay transport simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fresh transfers over every (rtt, rate, size) grid cell; writes grid.csv.
    Grid(RunArgs),
    /// FRESH vs 0RTT vs BDP download times after a priming transfer;
    /// writes summary.csv and tokens.tsv.
    Resume(RunArgs),
    /// Resumed flow joining a running competitor; writes series.csv.
    Contend(RunArgs),
    /// Prints the tables found in an output directory.
    Report {
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// `key=value`, applied after the config file. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl RunArgs {
    fn load(&self) -> Result<ScenarioConfig, ConfigError> {
        let mut cfg = match &self.config {
            Some(path) => parse_config(path)?,
            None => ScenarioConfig::default(),
        };
        apply_overrides(&mut cfg, &self.overrides)?;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        Ok(cfg)
    }
}

type Runner = fn(&ScenarioConfig, &Path) -> Result<(), String>;

const MODES: [ResumeMode; 3] = [
    ResumeMode::Fresh,
    ResumeMode::Resume0Rtt,
    ResumeMode::ResumeBdp,
];

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let (args, run): (&RunArgs, Runner) = match &cli.command {
        Command::Grid(a) => (a, grid),
        Command::Resume(a) => (a, resume),
        Command::Contend(a) => (a, contend),
        Command::Report { out } => {
            return match report(out) {
                Ok(table) => {
                    print!("{table}");
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("bdpsim: {e}");
                    ExitCode::from(2)
                }
            };
        }
    };
    let cfg = match args.load() {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("bdpsim: config error: {e}");
            return ExitCode::from(1);
        }
    };
    match run(&cfg, &args.out) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("bdpsim: {e}");
            ExitCode::from(2)
        }
    }
}

fn grid(cfg: &ScenarioConfig, out: &Path) -> Result<(), String> {
    let cells = run_convergence_grid(cfg);
    let path = emit_grid(&cells, out).map_err(|e| e.to_string())?;
    println!("wrote {} ({} cells)", path.display(), cells.len());
    Ok(())
}

fn resume(cfg: &ScenarioConfig, out: &Path) -> Result<(), String> {
    let rows = run_repetitions(cfg, &[cfg.file_size_bytes], &MODES);
    let path = emit_summary(&rows, out).map_err(|e| e.to_string())?;
    println!("wrote {} ({} repetitions)", path.display(), cfg.repetitions);

    // The token store from one priming run with the base seed.
    let primed = prime(cfg);
    let source = match cfg.token_mode {
        TokenMode::LocalStorage => &primed.state.server_store,
        _ => &primed.state.client_store,
    };
    let tokens_path = out.join("tokens.tsv");
    let _ = std::fs::remove_file(&tokens_path);
    let mut store = TokenStore::open(&tokens_path).map_err(|e| e.to_string())?;
    for record in source.records() {
        store.put(record.clone()).map_err(|e| e.to_string())?;
    }
    println!("wrote {} ({} tokens)", tokens_path.display(), store.len());
    Ok(())
}

fn contend(cfg: &ScenarioConfig, out: &Path) -> Result<(), String> {
    let result = run_contention(cfg, cfg.mode);
    let path = emit_series(&result, out).map_err(|e| e.to_string())?;
    println!(
        "wrote {} (resumed flow mode {})",
        path.display(),
        result.mode
    );
    Ok(())
}
