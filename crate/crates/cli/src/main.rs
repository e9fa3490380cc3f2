use std::process::ExitCode;

use clap::Parser;
use duplex_cli::args::{Cli, Command};
use duplex_cli::experiment::{run, write_outputs};

fn main() -> ExitCode {
    let Cli { command } = Cli::parse();
    let Command::Run(args) = command;
    let spec = match args.spec() {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let result = run(&spec).and_then(|out| write_outputs(&spec, &out, &args.out).map(|files| (out, files)));
    match result {
        Ok((out, files)) => {
            let failed = out.rows.iter().filter(|r| r.mode.is_none()).count();
            eprintln!(
                "{} rows ({} without a design), wrote {} files to {}",
                out.rows.len(),
                failed,
                files.len(),
                args.out.display()
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
