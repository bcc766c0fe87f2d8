use clap::Parser;
use std::path::PathBuf;
use std::process::ExitCode;

use stefan_lab::config::{parse_config, ExperimentKind};
use stefan_lab::runner::{dispatch, exit_code, write_error};
use stefan_lab::LabError;

/// Free-boundary predator-prey experiments.
#[derive(Parser, Debug)]
#[command(name = "stefan-lab", version, about)]
struct Cli {
    /// TOML configuration file.
    config: PathBuf,
    /// Experiment kind: simulate, thresholds, phaseplane, wave, sweep-mu, speed or sweep.
    #[arg(long)]
    kind: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<String>,
    /// Seed for randomized sweeps.
    #[arg(long)]
    seed: Option<u64>,
}

fn fail(err: &LabError, out_dir: Option<&str>) -> ExitCode {
    eprintln!("error [{}]: {err}", err.kind());
    if let Some(dir) = out_dir {
        let _ = write_error(dir.as_ref(), err);
    }
    ExitCode::from(exit_code(err) as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return if usage { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let text = match std::fs::read_to_string(&cli.config) {
        Ok(t) => t,
        Err(e) => return fail(&LabError::Io(format!("{}: {e}", cli.config.display())), None),
    };
    let mut parsed = match parse_config(&text) {
        Ok(p) => p,
        Err(e) => return fail(&e, cli.out.as_deref()),
    };
    // flags win over the file
    if let Some(k) = &cli.kind {
        match k.parse::<ExperimentKind>() {
            Ok(kind) => parsed.config.run.kind = kind,
            Err(e) => return fail(&e, cli.out.as_deref()),
        }
        parsed.defaulted.retain(|key| key != "run.kind");
    }
    if let Some(out) = cli.out {
        parsed.config.run.out_dir = out;
        parsed.defaulted.retain(|key| key != "run.out_dir");
    }
    if let Some(seed) = cli.seed {
        parsed.config.run.seed = seed;
        parsed.defaulted.retain(|key| key != "run.seed");
    }
    let out_dir = parsed.config.run.out_dir.clone();
    match dispatch(&parsed) {
        Ok(outcome) => {
            println!("{}", outcome.summary);
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e, Some(&out_dir)),
    }
}
