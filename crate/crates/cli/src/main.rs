mod args;
mod commands;

use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use mtensor::error::ErrorKind;

use args::{Cli, Command};
use commands::{Global, Output};

const EXIT_FLAGS: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_NUMERICAL: u8 = 4;

fn exit_code(e: &mtensor::Error) -> u8 {
    match e.kind() {
        ErrorKind::Parameter => EXIT_FLAGS,
        ErrorKind::Data => EXIT_DATA,
        ErrorKind::Numerical => EXIT_NUMERICAL,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_FLAGS)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn configure_threads(n: usize) -> mtensor::Result<()> {
    #[cfg(feature = "parallel")]
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| mtensor::Error::InvalidParameter(format!("thread pool: {e}")))?;
    }
    #[cfg(not(feature = "parallel"))]
    if n > 1 {
        log::warn!("built without the parallel feature; --threads {n} ignored");
    }
    Ok(())
}

fn run(cli: &Cli) -> mtensor::Result<()> {
    configure_threads(cli.threads)?;
    let start = Instant::now();
    let g = Global {
        seed: cli.seed,
        renditions: cli.renditions as usize,
        argv: std::env::args().collect(),
    };
    let out = match &cli.command {
        Command::Estimate(a) => commands::estimate(a, &g)?,
        Command::Surface(a) => commands::surface(a, &g)?,
        Command::Oracle(c) => commands::oracle(c, &g)?,
        Command::Sample(c) => commands::sample(c, &g)?,
        Command::Heightfield(a) => commands::heightfield(a, &g)?,
    };
    let elapsed = start.elapsed().as_secs_f64();
    let text = match out {
        Output::One(mut doc) => {
            doc.wall_clock_seconds = elapsed;
            doc.to_json()?
        }
        Output::Many(mut docs) => {
            docs.iter_mut().for_each(|d| d.wall_clock_seconds = elapsed);
            serde_json::to_string_pretty(&docs)?
        }
    };
    match &cli.json_out {
        Some(path) => std::fs::write(path, text + "\n")?,
        None => println!("{text}"),
    }
    Ok(())
}
