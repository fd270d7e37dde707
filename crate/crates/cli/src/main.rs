mod args;
mod commands;
mod error;
mod output;
mod study;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use commands::Verdict;
use error::CliError;
use output::Run;

fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var("DMP_THREADS") else { return Ok(()) };
    let n: usize = value.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| CliError::usage(format!("DMP_THREADS={value} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::usage(e.to_string()))
}

fn dispatch(cli: &Cli) -> Result<Verdict, CliError> {
    configure_threads()?;
    let out = match &cli.command {
        Command::MeshGen(a) => &a.out,
        Command::Assemble(a) => &a.out,
        Command::Certify(a) => &a.out,
        Command::Solve(a) => &a.out,
        Command::Green(a) => &a.out,
        Command::DmpTest(a) => &a.out,
        Command::Study(a) => &a.out,
    };
    let mut run = Run::new(&out.out_dir)?;
    let result = match &cli.command {
        Command::MeshGen(a) => commands::mesh_gen(a, &mut run),
        Command::Assemble(a) => commands::assemble(a, &mut run),
        Command::Certify(a) => commands::certify(a, &mut run),
        Command::Solve(a) => commands::solve(a, &mut run),
        Command::Green(a) => commands::green(a, &mut run),
        Command::DmpTest(a) => commands::dmp_test(a, &mut run),
        Command::Study(a) => study::study(&a.study, &mut run),
    };
    // the manifest records the run whatever its outcome
    let code = match &result {
        Ok(Verdict::Ok) => 0,
        Ok(Verdict::NotHeld) => 1,
        Err(e) => e.exit_code(),
    };
    run.finish(cli.command.name(), &cli.command, code)?;
    result
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(Verdict::Ok) => ExitCode::SUCCESS,
        Ok(Verdict::NotHeld) => ExitCode::from(1),
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
