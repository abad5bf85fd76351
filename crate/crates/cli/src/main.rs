use std::process::ExitCode;

use clap::Parser;
use clap::error::ErrorKind;

use kra_cli::config::{Cli, Resolved};
use kra_cli::{cmd_preprocess, cmd_run, exit_code};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let result = cli.resolve().and_then(|resolved| match resolved {
        Resolved::Preprocess(cfg) => cmd_preprocess(&cfg).map(|s| println!("{s}")),
        Resolved::Run(cfg) => cmd_run(&cfg).map(|runs| runs.iter().for_each(|r| println!("{r}"))),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
