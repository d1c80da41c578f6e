//! `qboot` — command-line driver for the quantum bootstrap simulation suite.
//!
//! Every subcommand starts from an experiment configuration: the file given
//! with `--config`, or the built-in desk-scale default. Subcommand flags
//! override individual fields.

use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qboot_core::bootstrap::{cboot_estimate, ideal_bootstrap_count};
use qboot_core::circuit::{self, build_plan_with};
use qboot_core::harness::{
    check_suite, resource_report, run_experiment, write_outputs, write_summary_csv,
    ExperimentConfig, HarnessError, PathSelector,
};
use qboot_core::numeric::fmt_f64;
use qboot_core::qae::{self, write_outcome_csv, QaePmf};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

#[derive(Parser, Debug)]
#[command(
    name = "qboot",
    version,
    about = "Classical simulation of the quantum bootstrap"
)]
struct Cli {
    /// Experiment configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for commands that write files.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Exact bootstrap CDF by enumeration, for each threshold.
    Ideal(SampleArgs),
    /// Monte Carlo bootstrap estimates.
    Cboot {
        #[command(flatten)]
        sample: SampleArgs,
        /// Resamples per estimate.
        #[arg(long = "B", default_value_t = 1024)]
        b: u64,
        /// Independent estimates to draw.
        #[arg(long, default_value_t = 1)]
        reps: usize,
    },
    /// Exact outcome distribution of amplitude estimation.
    QaePmf {
        /// Target amplitude in [0, 1].
        #[arg(long)]
        h: f64,
        /// Precision qubits.
        #[arg(long = "T")]
        t: u32,
    },
    /// Simulate the full bootstrap circuit and report the outcome marginal.
    QbootCircuit {
        #[command(flatten)]
        sample: SampleArgs,
        #[arg(long = "T")]
        t: Option<u32>,
        #[arg(long)]
        qubit_cap: Option<u32>,
        /// Also draw this many estimates from the marginal.
        #[arg(long)]
        shots: Option<usize>,
    },
    /// Run the cost-matched comparison and write records/summary files.
    Experiment {
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        z: Option<Vec<f64>>,
        #[arg(long = "T", value_delimiter = ',')]
        t: Option<Vec<u32>>,
        #[arg(long = "M", value_delimiter = ',')]
        m: Option<Vec<usize>>,
        #[arg(long)]
        replications: Option<usize>,
        #[arg(long, value_enum)]
        path: Option<PathArg>,
    },
    /// Qubit counts, oracle calls and matched classical budgets.
    Resources {
        #[arg(long = "T", value_delimiter = ',')]
        t: Option<Vec<u32>>,
    },
    /// Run the built-in invariant checks.
    Check,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum PathArg {
    Analytic,
    Circuit,
}

#[derive(Args, Debug)]
struct SampleArgs {
    /// Comma-separated sample values.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    sample: Option<Vec<f64>>,
    /// Comma-separated thresholds.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    z: Option<Vec<f64>>,
    /// mean, sum, median or variance.
    #[arg(long)]
    statistic: Option<String>,
    /// Resample size (defaults to n).
    #[arg(long)]
    resample_size: Option<usize>,
    #[arg(long)]
    enumeration_cap: Option<u64>,
}

impl SampleArgs {
    fn apply(&self, c: &mut ExperimentConfig) {
        if let Some(s) = &self.sample {
            c.sample = s.clone();
            if self.resample_size.is_none() {
                c.resample_size = None;
            }
        }
        if let Some(z) = &self.z {
            c.z = z.clone();
        }
        if let Some(s) = &self.statistic {
            c.statistic = s.clone();
        }
        if let Some(r) = self.resample_size {
            c.resample_size = Some(r);
        }
        if let Some(cap) = self.enumeration_cap {
            c.enumeration_cap = cap;
        }
    }
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Harness(HarnessError),
    Io(io::Error),
    ChecksFailed(usize),
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        CliError::Harness(e)
    }
}

macro_rules! via_harness {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Harness(e.into())
            }
        }
    )*};
}
via_harness!(
    qboot_core::BootstrapError,
    qboot_core::QaeError,
    qboot_core::CircuitError,
    serde_json::Error
);

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Harness(e) if e.is_cap() => 3,
            CliError::Harness(HarnessError::Config(_)) => 2,
            CliError::Harness(HarnessError::Io { .. }) => 2,
            CliError::Harness(HarnessError::Bootstrap(_) | HarnessError::Qae(_)) => 2,
            CliError::Harness(HarnessError::Circuit(_)) => 2,
            _ => 1,
        }
    }

    fn kind(&self) -> &'static str {
        match self.exit_code() {
            2 => "config",
            3 => "cap",
            _ => "runtime",
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Harness(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
            CliError::ChecksFailed(n) => write!(f, "{n} check(s) failed"),
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn base_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut c = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::paper_default(),
    };
    if let Some(s) = cli.seed {
        c.seed = s;
    }
    Ok(c)
}

fn emit_json(v: &serde_json::Value) -> Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, v)?;
    writeln!(out)?;
    Ok(())
}

fn cmd_ideal(cli: &Cli, args: &SampleArgs) -> Result<()> {
    let mut c = base_config(cli)?;
    args.apply(&mut c);
    let (sample, stat) = (c.sample()?, c.stat()?);
    let r = c.resample_size();
    let counts = c
        .z
        .iter()
        .map(|&z| ideal_bootstrap_count(&sample, &stat, z, r, c.enumeration_cap).map(|k| (z, k)))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    match cli.format {
        Format::Csv => {
            let mut out = io::stdout().lock();
            writeln!(out, "z,accepted,total,probability")?;
            for (z, k) in &counts {
                writeln!(out, "{},{},{},{}", fmt_f64(*z), k.accepted, k.total, fmt_f64(k.probability()))?;
            }
        }
        Format::Json => emit_json(&json!(counts
            .iter()
            .map(|(z, k)| json!({"z": z, "accepted": k.accepted, "total": k.total, "probability": k.probability()}))
            .collect::<Vec<_>>()))?,
    }
    Ok(())
}

fn cmd_cboot(cli: &Cli, args: &SampleArgs, b: u64, reps: usize) -> Result<()> {
    let mut c = base_config(cli)?;
    args.apply(&mut c);
    let (sample, stat) = (c.sample()?, c.stat()?);
    let r = c.resample_size();
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    let mut rows = Vec::new();
    for &z in &c.z {
        for rep in 0..reps {
            rows.push((z, rep, cboot_estimate(&sample, &stat, z, b, &mut rng, r)?));
        }
    }
    match cli.format {
        Format::Csv => {
            let mut out = io::stdout().lock();
            writeln!(out, "z,rep,B,estimate")?;
            for (z, rep, e) in &rows {
                writeln!(out, "{},{rep},{b},{}", fmt_f64(*z), fmt_f64(*e))?;
            }
        }
        Format::Json => emit_json(&json!(rows
            .iter()
            .map(|(z, rep, e)| json!({"z": z, "rep": rep, "B": b, "estimate": e}))
            .collect::<Vec<_>>()))?,
    }
    Ok(())
}

fn emit_outcomes(format: Format, probs: &[f64], extra: serde_json::Value) -> Result<()> {
    match format {
        Format::Csv => write_outcome_csv(probs, io::stdout().lock())?,
        Format::Json => {
            let n = probs.len() as u64;
            let estimates = (0..n)
                .map(|l| qae::estimate_from_outcome(l, n.trailing_zeros()))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            let mut v = extra;
            v["probs"] = json!(probs);
            v["estimates"] = json!(estimates);
            emit_json(&v)?;
        }
    }
    Ok(())
}

fn cmd_qae_pmf(cli: &Cli, h: f64, t: u32) -> Result<()> {
    let pmf = QaePmf::new(h, t)?;
    let extra = json!({
        "h": h,
        "T": t,
        "bias": qae::bias_closed_form(h, t)?,
        "mse": qae::mse_closed_form(h, t)?,
        "single_run_success": qae::single_run_success(h, t)?,
    });
    emit_outcomes(cli.format, pmf.probs(), extra)
}

fn cmd_qboot_circuit(
    cli: &Cli,
    args: &SampleArgs,
    t: Option<u32>,
    qubit_cap: Option<u32>,
    shots: Option<usize>,
) -> Result<()> {
    let mut c = base_config(cli)?;
    args.apply(&mut c);
    if let Some(cap) = qubit_cap {
        c.qubit_cap = cap;
    }
    let t = t
        .or_else(|| c.t.first().copied())
        .ok_or_else(|| CliError::Usage("no precision T given".into()))?;
    let &[z] = c.z.as_slice() else {
        return Err(CliError::Usage(
            "qboot-circuit takes exactly one threshold".into(),
        ));
    };
    let plan = build_plan_with(
        &c.sample()?,
        &c.stat()?,
        z,
        t,
        c.resample_size(),
        c.limits(),
    )?;
    let marginal = circuit::run_qae_exact(&plan)?;
    eprintln!(
        "qubits: {}, Grover iterations: {}",
        plan.num_qubits(),
        (1u64 << t) - 1
    );
    if let Some(shots) = shots {
        let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
        let est = circuit::sample_estimates(&marginal, t, &mut rng, shots)?;
        match cli.format {
            Format::Csv => {
                let mut out = io::stdout().lock();
                writeln!(out, "shot,estimate")?;
                for (i, e) in est.iter().enumerate() {
                    writeln!(out, "{i},{}", fmt_f64(*e))?;
                }
            }
            Format::Json => {
                emit_json(&json!({"z": z, "T": t, "qubits": plan.num_qubits(), "estimates": est}))?
            }
        }
        return Ok(());
    }
    emit_outcomes(
        cli.format,
        &marginal,
        json!({"z": z, "T": t, "qubits": plan.num_qubits()}),
    )
}

fn cmd_experiment(
    cli: &Cli,
    z: &Option<Vec<f64>>,
    t: &Option<Vec<u32>>,
    m: &Option<Vec<usize>>,
    replications: Option<usize>,
    path: Option<PathArg>,
) -> Result<()> {
    let mut c = base_config(cli)?;
    if let Some(z) = z {
        c.z = z.clone();
    }
    if let Some(t) = t {
        c.t = t.clone();
    }
    if let Some(m) = m {
        c.m = m.clone();
    }
    if let Some(r) = replications {
        c.replications = r;
    }
    match path {
        Some(PathArg::Analytic) => c.path = PathSelector::Analytic,
        Some(PathArg::Circuit) => c.path = PathSelector::Circuit,
        None => {}
    }
    if let Some(out) = &cli.out {
        c.output_dir = Some(out.clone());
    }
    let output = run_experiment(&c)?;
    if let Some(dir) = &c.output_dir {
        for d in write_outputs(&output, dir)? {
            eprintln!("wrote {}", d.display());
        }
    }
    match cli.format {
        Format::Csv => {
            for run in &output.runs {
                if output.runs.len() > 1 {
                    println!("# z = {}", fmt_f64(run.z));
                }
                write_summary_csv(&run.summary, io::stdout().lock())?;
            }
        }
        Format::Json => emit_json(&json!(output
            .runs
            .iter()
            .map(|run| json!({
                "z": run.z,
                "ground_truth": run.ground_truth.probability(),
                "summary": run.summary.rows,
            }))
            .collect::<Vec<_>>()))?,
    }
    Ok(())
}

fn cmd_resources(cli: &Cli, t: &Option<Vec<u32>>) -> Result<()> {
    let mut c = base_config(cli)?;
    if let Some(t) = t {
        c.t = t.clone();
    }
    let report = resource_report(&c)?;
    match cli.format {
        Format::Json => emit_json(&serde_json::to_value(&report)?),
        Format::Csv => {
            let mut out = io::stdout().lock();
            writeln!(
                out,
                "T,qubits,grover_iterations,oracle_calls,matched_B,qboot_work,cboot_work"
            )?;
            for l in &report.per_t {
                writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    l.t,
                    l.qubits.map_or_else(String::new, |q| q.to_string()),
                    l.work.grover_iterations,
                    l.work.oracle_calls,
                    l.matched_b,
                    fmt_f64(l.work.qboot_work),
                    fmt_f64(l.work.cboot_work_matched_cost),
                )?;
            }
            Ok(())
        }
    }
}

fn cmd_check(cli: &Cli) -> Result<()> {
    let results = check_suite()?;
    match cli.format {
        Format::Json => emit_json(&serde_json::to_value(&results)?)?,
        Format::Csv => {
            for r in &results {
                println!(
                    "{} {}: {}",
                    if r.passed { "PASS" } else { "FAIL" },
                    r.name,
                    r.detail
                );
            }
        }
    }
    match results.iter().filter(|r| !r.passed).count() {
        0 => Ok(()),
        n => Err(CliError::ChecksFailed(n)),
    }
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Ideal(a) => cmd_ideal(cli, a),
        Command::Cboot { sample, b, reps } => cmd_cboot(cli, sample, *b, *reps),
        Command::QaePmf { h, t } => cmd_qae_pmf(cli, *h, *t),
        Command::QbootCircuit {
            sample,
            t,
            qubit_cap,
            shots,
        } => cmd_qboot_circuit(cli, sample, *t, *qubit_cap, *shots),
        Command::Experiment {
            z,
            t,
            m,
            replications,
            path,
        } => cmd_experiment(cli, z, t, m, *replications, *path),
        Command::Resources { t } => cmd_resources(cli, t),
        Command::Check => cmd_check(cli),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Io(e)) if e.kind() == io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.kind());
            ExitCode::from(e.exit_code())
        }
    }
}
