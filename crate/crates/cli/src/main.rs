use std::process::ExitCode;
use std::sync::Arc;

use clap::Parser;
use t20_cli::cli::{open_store, run, Cli, Command};
use t20_cli::jobs::Jobs;
use t20_cli::server::{router, AppState};
use tracing_subscriber::EnvFilter;

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Serve(args) => serve(&cli, &args.bind, args.workers),
        _ => run(&cli).map_err(|e| e.to_string()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn serve(cli: &Cli, bind: &str, workers: usize) -> Result<(), String> {
    let store = open_store(cli.store.as_deref()).map_err(|e| e.to_string())?.map(Arc::new);
    if store.is_none() {
        tracing::warn!("no profile store given; GET /profiles/{{player}} will return 404");
    }
    let rt = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(bind).await.map_err(|e| format!("bind {bind}: {e}"))?;
        tracing::info!(%bind, workers, "serving");
        eprintln!("listening on {}", listener.local_addr().map_err(|e| e.to_string())?);
        let app = router(AppState { store, jobs: Jobs::new(workers) });
        axum::serve(listener, app).await.map_err(|e| e.to_string())
    })
}
