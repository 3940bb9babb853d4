//! `halfspace`: symbol verification, parameter scans, dynamic boundary solves.
//!
//! Exit codes: 0 pass, 1 numerical claim failed, 2 usage or domain error, 3 I/O error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use halfspace::experiments::NormalNorm;
use halfspace::symbols::KernelKind;

use config::{LemmaConfig, RunConfig, ScanConfig, ScanKind, SolveConfig, VerifyConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Domain(#[from] halfspace::Error),
    #[error("i/o: {0}")]
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Domain(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

#[derive(Parser)]
#[command(name = "halfspace", version, about = "Poisson operators on the half-space: symbol checks, norm scans, dynamic boundary problems")]
struct Cli {
    /// JSON file merged over the flags (unknown keys are rejected).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (default: current directory).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Print the resolved configuration and exit.
    #[arg(long, global = true)]
    print_config: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Seminorm table of a catalog kernel with refinement ratios.
    VerifySymbol(VerifyArgs),
    /// Parameter scan with fitted log-log slope.
    Scan(ScanArgs),
    /// Resolvent solve or implicit Euler evolution of a dynamic boundary problem.
    Solve(SolveArgs),
    /// Closed-form maximum lemma and the road-field multiplier lattice.
    Lemma(LemmaArgs),
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    kernel: Option<String>,
    #[arg(long, value_parser = parse_class)]
    class: Option<KernelKind>,
    /// Largest seminorm index.
    #[arg(long = "N")]
    max_order: Option<usize>,
    #[arg(long)]
    theta: Option<f64>,
}

#[derive(Args)]
struct GridArgs {
    /// Tangential points per axis.
    #[arg(long)]
    points: Option<usize>,
    /// Normal nodes.
    #[arg(long)]
    normal_count: Option<usize>,
    #[arg(long)]
    ratio: Option<f64>,
}

impl GridArgs {
    fn apply(&self, g: &mut halfspace::GridConfig) {
        if let Some(n) = self.points {
            g.points_per_dim = n;
        }
        if let Some(m) = self.normal_count {
            g.normal_count = m;
        }
        if let Some(r) = self.ratio {
            g.ratio = r;
        }
    }
}

#[derive(Args)]
struct ScanArgs {
    #[arg(long, value_parser = parse_scan_kind)]
    kind: Option<ScanKind>,
    #[arg(long)]
    kernel: Option<String>,
    #[arg(long)]
    problem: Option<String>,
    #[arg(long)]
    s: Option<f64>,
    #[arg(long)]
    t: Option<f64>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long, value_parser = parse_normal_norm)]
    normal_norm: Option<NormalNorm>,
    #[arg(long)]
    loss: Option<f64>,
    #[arg(long)]
    mu_min: Option<f64>,
    #[arg(long)]
    mu_max: Option<f64>,
    #[arg(long)]
    count: Option<usize>,
    /// Ray angles in radians, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    rays: Option<Vec<f64>>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    refine: bool,
    #[arg(long, allow_hyphen_values = true)]
    expect_slope: Option<f64>,
    #[arg(long)]
    slope_tolerance: Option<f64>,
    #[command(flatten)]
    grid: GridArgs,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    problem: Option<String>,
    /// Modulus of mu.
    #[arg(long, allow_hyphen_values = true)]
    mu: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    mu_arg: Option<f64>,
    #[arg(long)]
    d: Option<f64>,
    #[arg(long)]
    dprime: Option<f64>,
    #[arg(long)]
    k: Option<f64>,
    /// Boundary datum: const, zero, gauss or mode:<k>.
    #[arg(long)]
    g: Option<String>,
    #[arg(long)]
    evolve: bool,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long = "T")]
    t_end: Option<f64>,
    #[command(flatten)]
    grid: GridArgs,
}

#[derive(Args)]
struct LemmaArgs {
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    t: Option<f64>,
}

fn parse_class(s: &str) -> Result<KernelKind, String> {
    match s {
        "strong" => Ok(KernelKind::Strong),
        "weak" => Ok(KernelKind::Weak),
        _ => Err("expected strong or weak".into()),
    }
}

fn parse_scan_kind(s: &str) -> Result<ScanKind, String> {
    serde_json::from_value(serde_json::Value::String(s.into())).map_err(|_| "expected opnorm, rbound or resolvent".into())
}

fn parse_normal_norm(s: &str) -> Result<NormalNorm, String> {
    serde_json::from_value(serde_json::Value::String(s.into())).map_err(|_| "expected weak or strong".into())
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn from_flags(command: Command) -> RunConfig {
    match command {
        Command::VerifySymbol(a) => {
            let mut c = VerifyConfig::default();
            set(&mut c.kernel, a.kernel);
            c.class = a.class.or(c.class);
            set(&mut c.max_order, a.max_order);
            set(&mut c.theta, a.theta);
            RunConfig::VerifySymbol(c)
        }
        Command::Scan(a) => {
            let mut c = ScanConfig::default();
            set(&mut c.kind, a.kind);
            set(&mut c.kernel, a.kernel);
            set(&mut c.problem, a.problem);
            set(&mut c.s, a.s);
            set(&mut c.t, a.t);
            set(&mut c.p, a.p);
            set(&mut c.normal_norm, a.normal_norm);
            set(&mut c.loss, a.loss);
            set(&mut c.mu.abs_min, a.mu_min);
            set(&mut c.mu.abs_max, a.mu_max);
            set(&mut c.mu.count, a.count);
            set(&mut c.mu.rays, a.rays);
            set(&mut c.seed, a.seed);
            c.refine |= a.refine;
            c.expect_slope = a.expect_slope.or(c.expect_slope);
            set(&mut c.slope_tolerance, a.slope_tolerance);
            a.grid.apply(&mut c.grid);
            RunConfig::Scan(c)
        }
        Command::Solve(a) => {
            let mut c = SolveConfig::default();
            set(&mut c.problem, a.problem);
            set(&mut c.mu, a.mu);
            set(&mut c.mu_arg, a.mu_arg);
            set(&mut c.kpp.d, a.d);
            set(&mut c.kpp.d_prime, a.dprime);
            set(&mut c.kpp.k, a.k);
            set(&mut c.g, a.g);
            c.evolve |= a.evolve;
            set(&mut c.dt, a.dt);
            set(&mut c.t_end, a.t_end);
            a.grid.apply(&mut c.grid);
            RunConfig::Solve(c)
        }
        Command::Lemma(a) => RunConfig::Lemma(LemmaConfig { a: a.a, rho: a.rho, t: a.t, ..LemmaConfig::default() }),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let resolved = config::resolve(from_flags(cli.command), cli.config.as_deref());
    let outcome = resolved.and_then(|cfg| {
        if cli.print_config {
            println!("{}", serde_json::to_string_pretty(&cfg).expect("configs serialize"));
            return Ok(true);
        }
        commands::run(&cfg, cli.out.as_deref())
    });
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
