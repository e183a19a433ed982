use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use anyhow::Context;
use clap::Parser;
use tracing_subscriber::EnvFilter;

use satops_core::config::Config;
use satops_core::store::Store;
use satops_core::template::TemplateSet;
use satops_server::{router, scheduler_tick, AppState, Clock};

#[derive(Parser)]
#[command(version, about = "Satellite operations API server")]
struct Args {
    /// TOML configuration file.
    #[arg(long, short, env = "SATOPS_CONFIG")]
    config: PathBuf,
    /// Seconds between scheduler cycles.
    #[arg(long, default_value_t = 600)]
    tick_s: u64,
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .init();
    let args = Args::parse();
    let config = Config::load(&args.config)?;
    let templates = match &config.templates_dir {
        Some(dir) => TemplateSet::load_dir(dir).map_err(|(path, e)| anyhow::anyhow!("{path}: {e}"))?,
        None => TemplateSet::shipped(),
    };
    // Holding the write lock makes this the only scheduler for the store.
    let store = Store::open_exclusive(&config.store).with_context(|| format!("opening {}", config.store.display()))?;
    store.transaction(|db| config.bootstrap(db))?;
    let state = AppState {
        store: Arc::new(store),
        forecast: config.forecast_provider()?,
        config: Arc::new(config),
        templates: Arc::new(templates),
        clock: Clock::system(),
    };

    let jobs = state.clone();
    tokio::spawn(async move {
        let mut every = tokio::time::interval(Duration::from_secs(args.tick_s.max(1)));
        loop {
            every.tick().await;
            let s = jobs.clone();
            match tokio::task::spawn_blocking(move || scheduler_tick(&s)).await {
                Ok(Ok(report)) => tracing::info!(?report, "scheduler cycle"),
                Ok(Err(e)) => tracing::warn!("scheduler cycle failed: {e}"),
                Err(e) => tracing::error!("scheduler task panicked: {e}"),
            }
        }
    });

    let listener = tokio::net::TcpListener::bind(&state.config.bind).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
