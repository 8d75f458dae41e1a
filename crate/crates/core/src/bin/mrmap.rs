//! `mrmap <command> [--config FILE] [--out DIR] [--seed N] [--key VALUE]...`

use std::process::ExitCode;

use mrmap::experiments::{run, COMMANDS};
use mrmap::io::Invocation;
use mrmap::Error;

fn usage() -> String {
    format!(
        "usage: mrmap <command> [--config FILE] [--out DIR] [--seed N] [--key VALUE]...\ncommands: {}",
        COMMANDS.join(", ")
    )
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.is_empty() || args[0] == "--help" || args[0] == "-h" {
        eprintln!("{}", usage());
        return if args.is_empty() { ExitCode::from(2) } else { ExitCode::SUCCESS };
    }
    let result = Invocation::parse(args).and_then(|inv| run(&inv));
    match result {
        Ok(summary) => {
            print!("{summary}");
            ExitCode::SUCCESS
        }
        Err(Error::Usage(msg)) => {
            eprintln!("error: {msg}\n{}", usage());
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
