use std::io::Write;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::time::Duration;

use clap::Args;
use foodbench_service::{serve, Service, ServiceOptions};

use crate::{load_dataset, CliError, MatchArgs};

#[derive(Debug, Clone, Args)]
pub struct ServeArgs {
    /// Ground-truth dataset every submission is scored against.
    #[arg(long, env = "FOODBENCH_GT")]
    pub gt: PathBuf,
    /// Append-only submission log; replayed on start.
    #[arg(long, env = "FOODBENCH_LOG")]
    pub log: PathBuf,
    #[arg(long, default_value = "127.0.0.1", env = "FOODBENCH_HOST")]
    pub host: std::net::IpAddr,
    /// 0 picks a free port.
    #[arg(long, default_value_t = 8080, env = "FOODBENCH_PORT")]
    pub port: u16,
    #[arg(long, default_value_t = 2, env = "FOODBENCH_WORKERS")]
    pub workers: usize,
    #[arg(long, default_value_t = 256 << 20, env = "FOODBENCH_MAX_PAYLOAD_BYTES")]
    pub max_payload_bytes: usize,
    #[arg(long, default_value_t = 600, env = "FOODBENCH_TIMEOUT_SECS")]
    pub timeout_secs: u64,
    #[command(flatten)]
    pub matching: MatchArgs,
}

/// Blocks until ctrl-c. The bound address goes to stdout as one JSON line
/// so callers can pass port 0 and discover the port.
pub fn run(args: ServeArgs) -> Result<(), CliError> {
    let cfg = args.matching.config()?;
    if args.workers == 0 {
        return Err(CliError::Usage("--workers must be >= 1".into()));
    }
    if args.timeout_secs == 0 {
        return Err(CliError::Usage("--timeout-secs must be >= 1".into()));
    }
    let gt = load_dataset(&args.gt)?;
    let options = ServiceOptions {
        workers: args.workers,
        max_payload_bytes: args.max_payload_bytes,
        scoring_timeout: Duration::from_secs(args.timeout_secs),
    };
    let runtime = tokio::runtime::Runtime::new()
        .map_err(|e| CliError::Data(format!("runtime: {e}")))?;
    runtime.block_on(async move {
        let svc = Service::open(gt, cfg, &args.log, options)
            .await
            .map_err(|e| CliError::Data(format!("{}: {e}", args.log.display())))?;
        let listener = tokio::net::TcpListener::bind(SocketAddr::new(args.host, args.port))
            .await
            .map_err(|e| CliError::Data(format!("bind: {e}")))?;
        let addr = listener
            .local_addr()
            .map_err(|e| CliError::Data(format!("bind: {e}")))?;
        {
            let mut out = std::io::stdout().lock();
            let _ = writeln!(out, "{}", serde_json::json!({ "listening": addr.to_string() }));
            let _ = out.flush();
        }
        serve(svc, listener, async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| CliError::Data(format!("server: {e}")))
    })
}
