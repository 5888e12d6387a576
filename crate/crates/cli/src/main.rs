use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = switchctrl_cli::Cli::parse();
    let outcome = switchctrl_cli::run(&cli);
    if !outcome.stdout.is_empty() {
        print!("{}", outcome.stdout);
    }
    if !outcome.stderr.is_empty() {
        eprint!("{}", outcome.stderr);
    }
    ExitCode::from(outcome.code)
}
