mod args;
mod commands;
mod output;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use commands::{Failure, Outcome};

fn dispatch(cli: &Cli) -> Result<Outcome, Failure> {
    match &cli.command {
        Command::Sample(a) => commands::sample(a, cli.seed),
        Command::Moments(a) => commands::moments(a, cli.seed),
        Command::Lln(a) => commands::lln(a, cli.seed),
        Command::RateI(a) => commands::rate_i_cmd(a, cli.seed),
        Command::RateJ(a) => commands::rate_j_cmd(a, cli.seed),
        Command::Ldp(a) => commands::ldp(a, cli.seed),
    }
}

fn run(cli: &Cli) -> Result<Outcome, Failure> {
    match cli.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n as usize)
            .build()
            .map_err(|e| Failure::Runtime(e.to_string()))?
            .install(|| dispatch(cli)),
        None => dispatch(cli),
    }
}

fn write(cli: &Cli, outcome: &Outcome) -> io::Result<()> {
    let mut sink: Box<dyn Write> = match &cli.out {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    outcome.table.write(cli.format, &mut sink)?;
    sink.flush()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(outcome) => {
            if let Err(e) = write(&cli, &outcome) {
                eprintln!("hdplab: cannot write output: {e}");
                return ExitCode::from(1);
            }
            if outcome.flagged {
                eprintln!("hdplab: discrepancy flagged");
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("hdplab: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("hdplab: {msg}");
            ExitCode::from(1)
        }
    }
}
