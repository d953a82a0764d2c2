use std::net::Ipv4Addr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use edgefaas_bench::faas::{self, FaasBenchConfig};
use edgefaas_bench::latency::{run_latency_bench, tunnel_pair};
use edgefaas_bench::{emit_report, load_scenario, percolate, pubsub, BenchReport, ReportFormat, Scenario};
use edgefaas_docstore::PercolateBenchConfig;
use edgefaas_gateway::{FunctionSpec, WorkloadKind};
use edgefaas_orchestrator::{plan, SchedulerPolicy, Site};
use edgefaas_overlay::cert::unix_seconds;
use edgefaas_overlay::latency::derive_seed;
use edgefaas_overlay::{Certificate, CertificateAuthority, DelayMode, LinkEmulator};
use edgefaas_pubsub::BenchConfig;
use rand::rngs::OsRng;

#[derive(Parser)]
#[command(name = "edgefaas", version, about = "Edge serverless testbed: cluster, deployments and benchmarks")]
struct Cli {
    /// Built-in scenario (OP, RS, CD, AS) or path to a TOML scenario file.
    #[arg(long, global = true, default_value = "AS")]
    scenario: String,
    /// Seed for every emulated link and workload generator.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Full request totals and the 15 minute scale-down pause.
    #[arg(long, global = true)]
    paper_scale: bool,
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Bring up or inspect the emulated cluster.
    Cluster {
        #[command(subcommand)]
        action: ClusterAction,
    },
    /// Place a function's replicas and print the placement.
    Deploy {
        /// sentiment-analysis or img-classifier-hub.
        function: String,
        #[arg(long, default_value = "resource-count")]
        policy: SchedulerPolicy,
        #[arg(long, default_value_t = 1)]
        replicas: u32,
    },
    /// Run one benchmark.
    Bench {
        #[command(subcommand)]
        bench: BenchCommand,
    },
    /// Create a certificate authority or issue node certificates.
    Cert {
        #[command(subcommand)]
        action: CertAction,
    },
    /// Run the full benchmark set and write every report.
    Report {
        #[arg(long, default_value = "csv")]
        format: ReportFormat,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum ClusterAction {
    /// Issue certificates and handshake every pair of nodes.
    Up,
    /// Print the node table.
    Status,
}

#[derive(Subcommand)]
enum CertAction {
    /// Generate a CA key and its self-signed certificate (ca.key, ca.crt).
    Ca {
        #[arg(long, default_value = "edge-ca")]
        name: String,
        #[arg(long, default_value_t = 365)]
        days: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Issue a node certificate and key (<name>.crt, <name>.key) signed by the CA in --ca-dir.
    Issue {
        #[arg(long)]
        name: String,
        #[arg(long)]
        ip: Ipv4Addr,
        #[arg(long, value_delimiter = ',')]
        groups: Vec<String>,
        #[arg(long, default_value_t = 365)]
        days: u64,
        #[arg(long)]
        ca_dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct Output {
    /// Also write the reports to this file.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    format: ReportFormat,
}

#[derive(Subcommand)]
enum BenchCommand {
    /// Round trip over an overlay tunnel.
    Latency {
        #[arg(long, default_value = "OP")]
        from: Site,
        #[arg(long, default_value = "test")]
        to: Site,
        #[arg(long, default_value_t = 500)]
        reps: usize,
        #[command(flatten)]
        output: Output,
    },
    /// Concurrent function invocations at increasing thread counts.
    Faas {
        #[arg(long, default_value = "sentiment")]
        function: WorkloadKind,
        /// Comma separated client counts.
        #[arg(long, value_delimiter = ',')]
        threads: Option<Vec<usize>>,
        #[arg(long)]
        requests: Option<usize>,
        #[arg(long, default_value = "resource-count")]
        policy: SchedulerPolicy,
        #[arg(long, default_value_t = faas::DEFAULT_TIMEOUT_MS)]
        timeout_ms: f64,
        #[command(flatten)]
        output: Output,
    },
    /// Publisher and subscriber throughput.
    Pubsub {
        #[arg(long, default_value_t = 1)]
        pubs: usize,
        #[arg(long, default_value_t = 1)]
        subs: usize,
        #[arg(long, default_value_t = 64)]
        size: usize,
        #[arg(long, default_value_t = 10_000)]
        msgs: u64,
        #[arg(long, default_value_t = 5)]
        reps: usize,
        #[command(flatten)]
        output: Output,
    },
    /// Document percolation against stored queries.
    Percolate {
        #[arg(long, default_value_t = 1000)]
        queries: usize,
        #[arg(long, default_value_t = 5000)]
        docs: usize,
        #[arg(long, default_value = "on", value_parser = ["on", "off"])]
        scoring: String,
        #[command(flatten)]
        output: Output,
    },
}

fn scenario(cli: &Cli) -> Result<Scenario> {
    let s = if Path::new(&cli.scenario).is_file() {
        load_scenario(&cli.scenario)?
    } else {
        Scenario::builtin(&cli.scenario, 1)?
    };
    Ok(match cli.seed {
        Some(seed) => s.with_seed(seed),
        None => s,
    })
}

fn faas_config(cli: &Cli, kind: WorkloadKind) -> FaasBenchConfig {
    if cli.paper_scale {
        FaasBenchConfig::full_scale(kind)
    } else {
        FaasBenchConfig::desk(kind)
    }
}

fn print_reports(reports: &[BenchReport]) {
    println!(
        "{:<16} {:<8} {:<12} {:>7} {:>10} {:>10} {:>10} {:>9} {:>10} {:>10} {:>10}",
        "test", "scenario", "param", "n", "mean", "min", "max", "std", "p25", "p50", "p75"
    );
    for r in reports {
        let s = r.stats;
        println!(
            "{:<16} {:<8} {:<12} {:>7} {:>10.3} {:>10.3} {:>10.3} {:>9.3} {:>10.3} {:>10.3} {:>10.3}",
            r.test, r.scenario, r.param, s.n, s.mean, s.min, s.max, s.std, s.p25, s.p50, s.p75
        );
    }
}

fn finish(reports: &[BenchReport], output: &Output) -> Result<()> {
    print_reports(reports);
    if let Some(path) = &output.out {
        emit_report(reports, output.format, path)?;
        eprintln!("wrote {} report(s) to {}", reports.len(), path.display());
    }
    Ok(())
}

fn cluster_up(s: &Scenario) -> Result<()> {
    let nodes: Vec<_> = s.nodes.iter().collect();
    println!("{:<10} {:<10} {:>6} {:>12}", "from", "to", "link", "rtt_ms");
    let mut tunnels = 0;
    for (i, a) in nodes.iter().enumerate() {
        for b in &nodes[i + 1..] {
            let label = format!("{}-{}", a.name, b.name);
            tunnel_pair(s.seed, &label).with_context(|| format!("handshake {label}"))?;
            let profile = s.link(a.site, b.site).with_context(|| format!("no link {}-{}", a.site, b.site))?;
            let link = LinkEmulator::new(profile, derive_seed(s.seed, &label), DelayMode::Virtual);
            println!(
                "{:<10} {:<10} {:>6} {:>12.3}",
                a.name,
                b.name,
                format!("{}-{}", a.site, b.site),
                link.round_trip()
            );
            tunnels += 1;
        }
    }
    println!("scenario {s}: {} nodes, {tunnels} tunnels established", nodes.len());
    Ok(())
}

fn cluster_status(s: &Scenario) -> Result<()> {
    let registry = s.registry()?;
    println!(
        "{:<10} {:<5} {:<12} {:>5} {:>7} {:>7} {:>6} {:<13}",
        "name", "site", "overlay_ip", "cores", "mem_gb", "factor", "slots", "role"
    );
    for n in registry.nodes() {
        let role = if n.schedulable { "worker" } else { "control-plane" };
        println!(
            "{:<10} {:<5} {:<12} {:>5} {:>7.1} {:>7.2} {:>6} {:<13}",
            n.name,
            n.site.as_str(),
            n.overlay_ip.to_string(),
            n.cpu_cores,
            n.memory_gb,
            n.compute_factor,
            n.free_slots(),
            role
        );
    }
    println!(
        "{} nodes, {} schedulable, {} free slots",
        registry.len(),
        registry.schedulable(),
        registry.spare_capacity()
    );
    Ok(())
}

fn deploy(s: &Scenario, function: &str, policy: SchedulerPolicy, replicas: u32) -> Result<()> {
    let kind: WorkloadKind = function.parse().map_err(anyhow::Error::msg)?;
    let spec = match kind {
        WorkloadKind::Sentiment => FunctionSpec::sentiment(),
        WorkloadKind::HeavyClassify => FunctionSpec::heavy_classify(),
    };
    let ctx = s.schedule_context(spec.work_units);
    let placement = plan(&s.nodes, &spec.name, replicas, policy, &ctx)?;
    println!("{} ({} replicas, {})", spec.name, placement.total(), policy.as_str());
    for (node, count) in &placement.assignments {
        println!("  {node:<10} {count}");
    }
    println!("order: {}", placement.order.join(" "));
    Ok(())
}

fn cert(action: &CertAction) -> Result<()> {
    let now = unix_seconds();
    match action {
        CertAction::Ca { name, days, out } => {
            std::fs::create_dir_all(out)?;
            let ca = CertificateAuthority::generate(name.clone(), &mut OsRng);
            ca.root_certificate(now, days * 86_400)?.write_to(out.join("ca.crt"))?;
            std::fs::write(out.join("ca.key"), ca.secret_bytes())?;
            println!("wrote {} and {}", out.join("ca.crt").display(), out.join("ca.key").display());
        }
        CertAction::Issue { name, ip, groups, days, ca_dir, out } => {
            let root = Certificate::read_from(ca_dir.join("ca.crt")).context("reading ca.crt")?;
            let secret: [u8; 32] = std::fs::read(ca_dir.join("ca.key"))
                .context("reading ca.key")?
                .try_into()
                .map_err(|_| anyhow::anyhow!("ca.key must hold 32 bytes"))?;
            let mut ca = CertificateAuthority::from_secret(root.subject_name.clone(), secret);
            if ca.public_key() != root.public_key {
                bail!("ca.key does not match ca.crt");
            }
            std::fs::create_dir_all(out)?;
            let id = ca.issue_identity(name, *ip, groups, days * 86_400, now, &mut OsRng)?;
            let (crt, key) = (out.join(format!("{name}.crt")), out.join(format!("{name}.key")));
            id.save(&crt, &key)?;
            println!("wrote {} and {}", crt.display(), key.display());
        }
    }
    Ok(())
}

fn full_report(cli: &Cli, s: &Scenario) -> Result<Vec<BenchReport>> {
    let mut reports = Vec::new();
    for pair in s.required_links() {
        let (a, b) = pair.sites();
        reports.push(run_latency_bench(s, a, b, 500)?);
    }
    for kind in [WorkloadKind::Sentiment, WorkloadKind::HeavyClassify] {
        let cfg = faas_config(cli, kind);
        reports.extend(faas::reports(s, &cfg, &faas::run_faas_bench(s, &cfg)?)?);
    }
    for (n, m) in pubsub::MATRIX {
        let cfg = BenchConfig::matrix(n, m);
        reports.extend(pubsub::reports(s, &cfg, &pubsub::run(s, &cfg)?)?);
    }
    for scoring in [false, true] {
        let cfg = PercolateBenchConfig { scoring, ..PercolateBenchConfig::default() };
        reports.push(percolate::report(s, &cfg, &percolate::run(s, &cfg)?)?);
    }
    Ok(reports)
}

fn run(cli: &Cli) -> Result<()> {
    if let Command::Cert { action } = &cli.command {
        return cert(action);
    }
    let s = scenario(cli)?;
    match &cli.command {
        Command::Cluster { action: ClusterAction::Up } => cluster_up(&s),
        Command::Cluster { action: ClusterAction::Status } => cluster_status(&s),
        Command::Deploy { function, policy, replicas } => deploy(&s, function, *policy, *replicas),
        Command::Cert { .. } => unreachable!("handled above"),
        Command::Report { format, out } => {
            let reports = full_report(cli, &s)?;
            emit_report(&reports, *format, out)?;
            eprintln!("wrote {} report(s) to {}", reports.len(), out.display());
            Ok(())
        }
        Command::Bench { bench } => match bench {
            BenchCommand::Latency { from, to, reps, output } => {
                finish(&[run_latency_bench(&s, *from, *to, *reps)?], output)
            }
            BenchCommand::Faas { function, threads, requests, policy, timeout_ms, output } => {
                let mut cfg = faas_config(cli, *function).policy(*policy);
                if let Some(t) = threads {
                    cfg = cfg.threads(t.clone());
                }
                if let Some(n) = requests {
                    cfg = cfg.requests(*n);
                }
                cfg.timeout_ms = *timeout_ms;
                let points = faas::run_faas_bench(&s, &cfg)?;
                for p in &points {
                    eprintln!(
                        "threads {:>4}: issued {} ok {} timeout {} error {}, peak replicas {}",
                        p.threads,
                        p.issued,
                        p.ok,
                        p.timeouts,
                        p.errors,
                        p.max_replicas()
                    );
                }
                finish(&faas::reports(&s, &cfg, &points)?, output)
            }
            BenchCommand::Pubsub { pubs, subs, size, msgs, reps, output } => {
                if *pubs == 0 || *subs == 0 {
                    bail!("--pubs and --subs must be at least 1");
                }
                let cfg = BenchConfig {
                    msg_size: *size,
                    total_msgs: *msgs,
                    reps: *reps,
                    ..BenchConfig::matrix(*pubs, *subs)
                };
                let outcome = pubsub::run(&s, &cfg)?;
                eprintln!("lost deliveries: {}", pubsub::lost(&cfg, &outcome));
                finish(&pubsub::reports(&s, &cfg, &outcome)?, output)
            }
            BenchCommand::Percolate { queries, docs, scoring, output } => {
                let cfg = PercolateBenchConfig {
                    queries: *queries,
                    docs: *docs,
                    scoring: scoring == "on",
                    ..PercolateBenchConfig::default()
                };
                let run = percolate::run(&s, &cfg)?;
                finish(&[percolate::report(&s, &cfg, &run)?], output)
            }
        },
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => tracing::Level::WARN,
        1 => tracing::Level::INFO,
        _ => tracing::Level::DEBUG,
    };
    tracing_subscriber::fmt().with_max_level(level).with_writer(std::io::stderr).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
