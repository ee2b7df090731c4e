use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use semigroup_hls::report::{exit_code, summary_csv, CheckReport, Status};
use semigroup_hls::suites::{describe, paths_csv, run_suite, RunConfig, Suite, CATALOG};

#[derive(Parser)]
#[command(name = "semigroup-hls", version, about = "Run numerical verification suites for semigroup fractional integrals")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a suite and write report.json and summary.csv.
    Run(RunArgs),
    /// Print the statement, oracle and tolerance of a check.
    Describe { name: String },
}

#[derive(Args)]
struct RunArgs {
    /// spectral, subordination, continuum, functionals, mc or all.
    #[arg(long)]
    suite: Option<String>,
    /// JSON run configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in chain (`builtin:two-state`, `random-8-3`, ...) or a chain JSON file.
    #[arg(long)]
    chain: Option<String>,
    #[arg(long)]
    grid_n: Option<usize>,
    #[arg(long)]
    grid_extent: Option<f64>,
    /// Comma-separated orders.
    #[arg(long, value_delimiter = ',')]
    alpha: Option<Vec<f64>>,
    /// Comma-separated exponents.
    #[arg(long, value_delimiter = ',')]
    p: Option<Vec<f64>>,
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    /// Comma-separated truncation heights.
    #[arg(long, value_delimiter = ',')]
    s: Option<Vec<f64>>,
    #[arg(long)]
    truncation: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Treat inconclusive checks as failures.
    #[arg(long)]
    strict: bool,
    /// Also write per-path records to paths.csv.
    #[arg(long)]
    write_paths: bool,
}

impl RunArgs {
    fn resolve(&self) -> anyhow::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
                RunConfig::from_json(&text).with_context(|| format!("config {}", path.display()))?
            }
            None => RunConfig::default(),
        };
        if let Some(s) = &self.suite {
            cfg.suite = Suite::parse(s)?;
        }
        macro_rules! take {
            ($($field:ident),*) => {$(
                if let Some(v) = &self.$field {
                    cfg.$field = v.clone();
                }
            )*};
        }
        take!(chain, grid_n, grid_extent, alpha, p, paths, dt, s, truncation, seed);
        cfg.validate()?;
        Ok(cfg)
    }
}

fn configure_threads() -> anyhow::Result<()> {
    if let Ok(raw) = std::env::var("SEMIGROUP_HLS_THREADS") {
        let threads: usize = raw
            .parse()
            .with_context(|| format!("SEMIGROUP_HLS_THREADS must be a positive integer, got `{raw}`"))?;
        if threads == 0 {
            bail!("SEMIGROUP_HLS_THREADS must be a positive integer, got 0");
        }
        rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()?;
    }
    Ok(())
}

fn write_outputs(args: &RunArgs, cfg: &RunConfig, reports: &[CheckReport], error: Option<&str>) -> anyhow::Result<()> {
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let count = |s: Status| reports.iter().filter(|r| r.status == s).count();
    let doc = serde_json::json!({
        "config": cfg,
        "strict": args.strict,
        "summary": {
            "checks": reports.len(),
            "pass": count(Status::Pass),
            "fail": count(Status::Fail),
            "inconclusive": count(Status::Inconclusive),
            "skipped": count(Status::Skipped),
        },
        "error": error,
        "checks": reports,
    });
    fs::write(args.out.join("report.json"), serde_json::to_string_pretty(&doc)? + "\n")?;
    fs::write(args.out.join("summary.csv"), summary_csv(reports))?;
    Ok(())
}

fn run(args: RunArgs) -> anyhow::Result<ExitCode> {
    let cfg = args.resolve()?;
    configure_threads()?;
    let reports = match run_suite(&cfg) {
        Ok(r) => r,
        Err(e) => {
            write_outputs(&args, &cfg, &[], Some(&e.to_string()))?;
            return Err(e.into());
        }
    };
    write_outputs(&args, &cfg, &reports, None)?;
    if args.write_paths {
        fs::write(args.out.join("paths.csv"), paths_csv(&cfg)?)?;
    }
    for r in &reports {
        println!("{:<13} {}", r.status.as_str(), r.name);
    }
    let code = exit_code(&reports, args.strict);
    Ok(ExitCode::from(code as u8))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Describe { name } => match describe(&name) {
            Some(text) => {
                print!("{text}");
                Ok(ExitCode::SUCCESS)
            }
            None => {
                eprintln!("unknown check `{name}`; known checks:");
                for c in CATALOG {
                    eprintln!("  {}", c.name);
                }
                Ok(ExitCode::from(2))
            }
        },
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        ExitCode::from(2)
    })
}
