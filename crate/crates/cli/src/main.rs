//! `negmoment`: experiment sweeps, verification suites, state oracles and budget plans.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use negmoment::estimator::asymptotic_requirements;
use negmoment::parallel::configure_threads;
use negmoment::qstate::{self, DensityMatrix};
use negmoment::sweep::{parse_config, run_sweep, Format, SweepRow, SweepSpec};
use negmoment::verify::{run_suite, SuiteKind, SuiteReport};
use serde_json::json;

#[derive(Parser, Debug)]
#[command(
    name = "negmoment",
    version,
    about = "Randomized-measurement estimators of negativity moments"
)]
struct Cli {
    /// Master seed (falls back to NEG_SEED).
    #[arg(long, global = true, env = "NEG_SEED")]
    seed: Option<u64>,
    /// Worker threads for round-level parallelism (default: available cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output file (default: stdout).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Output format: csv or jsonl.
    #[arg(long, global = true)]
    format: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run an experiment sweep.
    Run(RunArgs),
    /// Run a golden verification suite (twirl, tables, nogo, variance, bell or all).
    Verify { kind: String },
    /// Print exact moments and negativity of a state file.
    Oracle { state: PathBuf },
    /// Print the asymptotic measurement budget for dimension D and accuracy epsilon.
    Plan {
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        epsilon: f64,
    },
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Config file in the key-value/section format.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Extra `key=value` settings, applied after the config file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    family: Option<String>,
    #[arg(long)]
    scheme: Option<String>,
    /// Comma list or geometric range like `32..1024x2`.
    #[arg(long = "n-u")]
    n_u: Option<String>,
    /// Comma list; `inf` selects exact probabilities.
    #[arg(long = "n-m")]
    n_m: Option<String>,
    /// Comma list of `AxB`.
    #[arg(long)]
    dims: Option<String>,
    #[arg(long)]
    p: Option<String>,
    #[arg(long)]
    repetitions: Option<u64>,
    /// Append a wall-time column.
    #[arg(long)]
    timing: bool,
    #[arg(long)]
    sequential: bool,
}

fn sink(out: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(path) => Box::new(BufWriter::new(
            File::create(path).with_context(|| format!("creating {}", path.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn build_spec(cli: &Cli, args: &RunArgs) -> Result<SweepSpec> {
    let mut spec = SweepSpec::default();
    if let Some(path) = &args.config {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        for (k, v) in parse_config(&text)? {
            spec.set(&k, &v)?;
        }
    }
    let flags = [
        ("sweep.family", &args.family),
        ("sweep.scheme", &args.scheme),
        ("sweep.n_u", &args.n_u),
        ("sweep.n_m", &args.n_m),
        ("sweep.dims", &args.dims),
        ("sweep.p", &args.p),
        ("output.format", &cli.format),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            spec.set(key, v)?;
        }
    }
    for kv in &args.set {
        let (k, v) = kv
            .split_once('=')
            .with_context(|| format!("--set expects KEY=VALUE, got '{kv}'"))?;
        spec.set(k.trim(), v.trim())?;
    }
    if let Some(r) = args.repetitions {
        spec.repetitions = r;
    }
    if let Some(seed) = cli.seed {
        spec.seed = seed;
    }
    if let Some(out) = &cli.out {
        spec.out = Some(out.clone());
    }
    if args.timing {
        spec.timing = true;
    }
    if args.sequential {
        spec.execution = negmoment::parallel::Execution::Sequential;
    }
    spec.validate()?;
    Ok(spec)
}

fn write_rows(spec: &SweepSpec, rows: &[SweepRow]) -> Result<()> {
    let mut w = sink(&spec.out)?;
    match spec.format {
        Format::Csv => {
            let mut csv = csv::Writer::from_writer(w);
            csv.write_record(SweepRow::header(spec.timing))?;
            for row in rows {
                csv.write_record(row.record(spec.timing))?;
            }
            csv.flush()?;
        }
        Format::Jsonl => {
            for row in rows {
                writeln!(w, "{}", serde_json::to_string(row)?)?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

fn format_of(cli: &Cli) -> Result<Format> {
    Ok(match &cli.format {
        Some(f) => f.parse()?,
        None => Format::Csv,
    })
}

fn write_reports(cli: &Cli, reports: &[SuiteReport]) -> Result<()> {
    let mut w = sink(&cli.out)?;
    let jsonl = cli.format.is_some() && format_of(cli)? == Format::Jsonl;
    for report in reports {
        for check in &report.checks {
            if jsonl {
                let mut v = serde_json::to_value(check)?;
                v["suite"] = json!(report.kind.name());
                writeln!(w, "{v}")?;
            } else {
                writeln!(w, "[{}] {check}", report.kind.name())?;
            }
        }
        if !jsonl {
            let failed = report.failures().len();
            writeln!(
                w,
                "[{}] {}: {} checks, {} failed",
                report.kind.name(),
                if report.pass() { "PASS" } else { "FAIL" },
                report.checks.len(),
                failed
            )?;
        }
    }
    w.flush()?;
    Ok(())
}

fn oracle_values(rho: &DensityMatrix) -> Result<Vec<(&'static str, f64)>> {
    let mut v = vec![
        ("dim", rho.dim() as f64),
        ("tr_rho2", qstate::moment(rho, 2)),
        ("tr_rho3", qstate::moment(rho, 3)),
    ];
    if let Some((da, db)) = rho.bipartition() {
        v.extend([
            ("d_a", da as f64),
            ("d_b", db as f64),
            ("tr_pt2", qstate::pt_moment(rho, 2)?),
            ("tr_pt3", qstate::negativity_moment(rho)?),
            ("log2_negativity", qstate::log_negativity(rho)?),
            ("tr_rho_ab_rho_a_rho_b", qstate::correlation_numerator(rho)?),
            ("fidelity_f2", qstate::fidelity_f2(rho)?),
        ]);
    }
    Ok(v)
}

fn write_pairs(cli: &Cli, pairs: &[(&str, f64)]) -> Result<()> {
    let mut w = sink(&cli.out)?;
    match format_of(cli)? {
        Format::Csv => {
            let mut csv = csv::Writer::from_writer(w);
            csv.write_record(["quantity", "value"])?;
            for (k, v) in pairs {
                csv.write_record([k.to_string(), v.to_string()])?;
            }
            csv.flush()?;
        }
        Format::Jsonl => {
            let obj: serde_json::Map<String, serde_json::Value> = pairs
                .iter()
                .map(|(k, v)| (k.to_string(), json!(v)))
                .collect();
            writeln!(w, "{}", serde_json::Value::Object(obj))?;
            w.flush()?;
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    if let Some(n) = cli.threads {
        if n == 0 {
            bail!("--threads must be at least 1");
        }
        configure_threads(n);
    }
    match &cli.command {
        Command::Run(args) => {
            let spec = build_spec(&cli, args)?;
            let rows = run_sweep(&spec)?;
            write_rows(&spec, &rows)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { kind } => {
            let kinds: Vec<SuiteKind> = if kind == "all" {
                SuiteKind::ALL.to_vec()
            } else {
                vec![kind.parse()?]
            };
            let seed = cli.seed.unwrap_or(0);
            let reports = kinds
                .into_iter()
                .map(|k| run_suite(k, seed))
                .collect::<Result<Vec<_>, _>>()?;
            write_reports(&cli, &reports)?;
            Ok(if reports.iter().all(SuiteReport::pass) {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
        Command::Oracle { state } => {
            let text = std::fs::read_to_string(state)
                .with_context(|| format!("reading {}", state.display()))?;
            let rho = DensityMatrix::from_json(&text)?;
            write_pairs(&cli, &oracle_values(&rho)?)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Plan { dim, epsilon } => {
            let r = asymptotic_requirements(*dim, *epsilon)?;
            write_pairs(
                &cli,
                &[
                    ("n_m", r.n_m as f64),
                    ("n_u", r.n_u as f64),
                    ("n_total", r.n_total as f64),
                ],
            )?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
