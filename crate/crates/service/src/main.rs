use std::net::SocketAddr;
use std::time::Duration;

use clap::Parser;

use glioseg_service::{router, AppState, Config};

#[derive(Debug, Parser)]
#[command(name = "glioseg-server", version, about = "HTTP session service for interactive segmentation")]
struct Args {
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: SocketAddr,
    /// Minutes of inactivity after which a session is dropped.
    #[arg(long, default_value_t = 30)]
    idle_minutes: u64,
    #[arg(long, default_value_t = 1024)]
    max_upload_mb: usize,
}

#[tokio::main]
async fn main() -> std::io::Result<()> {
    let args = Args::parse();
    let state = AppState::new(Config {
        idle_timeout: Duration::from_secs(args.idle_minutes * 60),
        max_upload_bytes: args.max_upload_mb << 20,
    });
    let sweeper = state.clone();
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(Duration::from_secs(60));
        loop {
            tick.tick().await;
            sweeper.sweep();
        }
    });
    let listener = tokio::net::TcpListener::bind(args.addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}
