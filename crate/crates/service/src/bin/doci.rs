use std::process::ExitCode;

use clap::Parser;
use doci_service::cli::{run, Cli};
use doci_service::ErrorBody;

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_target(false)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let body = ErrorBody {
                code: "Usage".into(),
                message: e.to_string().trim().to_string(),
            };
            eprintln!("{}", serde_json::to_string(&body).unwrap_or_default());
            return ExitCode::from(2);
        }
    };
    match report(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let body = match e.downcast_ref::<doci_service::ServiceError>() {
                Some(s) => s.body(),
                None => ErrorBody {
                    code: "Internal".into(),
                    message: format!("{e:#}"),
                },
            };
            eprintln!("{}", serde_json::to_string(&body).unwrap_or_default());
            ExitCode::FAILURE
        }
    }
}

fn report(cli: &Cli) -> anyhow::Result<()> {
    let outcome = run(cli)?;
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    println!("{}", serde_json::to_string_pretty(&outcome.summary)?);
    Ok(())
}
