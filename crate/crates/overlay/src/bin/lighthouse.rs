use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use edgefaas_overlay::cert::{unix_seconds, Certificate};
use edgefaas_overlay::Lighthouse;

/// Overlay discovery beacon.
#[derive(Parser, Debug)]
#[command(name = "lighthouse", version)]
struct Args {
    /// UDP address to serve on.
    #[arg(long)]
    listen: SocketAddr,
    /// Self-signed CA certificate whose key signs member certificates.
    #[arg(long)]
    ca: PathBuf,
    #[arg(long, default_value_t = 4)]
    workers: usize,
}

fn main() -> ExitCode {
    tracing_subscriber::fmt().with_writer(std::io::stderr).init();
    let args = Args::parse();
    let ca = match Certificate::read_from(&args.ca) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("cannot read CA certificate {}: {e}", args.ca.display());
            return ExitCode::FAILURE;
        }
    };
    if !ca.verify(&ca.public_key, unix_seconds()) {
        eprintln!("CA certificate is not a valid self-signed root");
        return ExitCode::FAILURE;
    }
    let lh = match Lighthouse::bind(args.listen, ca.public_key) {
        Ok(lh) => lh,
        Err(e) => {
            eprintln!("bind {}: {e}", args.listen);
            return ExitCode::FAILURE;
        }
    };
    match lh.spawn(args.workers) {
        Ok(handle) => {
            let addr = handle.lighthouse().local_addr().unwrap_or(args.listen);
            tracing::info!("lighthouse serving on {addr}");
            handle.join();
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::FAILURE
        }
    }
}
