mod args;
mod commands;
mod config;
mod error;

use clap::Parser;
use serde_json::json;

use args::Cli;
use error::CliError;

fn error_line(exit_code: i32, kind: &str, code: Option<u16>, message: &str) {
    eprintln!(
        "{}",
        json!({
            "record": "error",
            "exit_code": exit_code,
            "kind": kind,
            "code": code,
            "message": message,
        })
    );
}

fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            if code != 0 {
                let message = e.kind().as_str().unwrap_or("invalid usage");
                error_line(code, "usage", None, message);
            }
            return code;
        }
    };
    match commands::dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => report(&e),
    }
}

fn report(e: &CliError) -> i32 {
    let code = e.exit_code();
    eprintln!("error: {e}");
    error_line(code, e.kind(), e.code(), &e.to_string());
    code
}

fn main() {
    std::process::exit(run());
}
