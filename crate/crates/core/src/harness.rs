//! Cost-matched QBOOT vs CBOOT experiments.
//!
//! For each threshold `z`, precision `T` and replication, the harness draws
//! one QBOOT estimate per repeat count `M` (median of `M` single runs) and one
//! CBOOT estimate with `B` resamples set by the configured rule. Every draw
//! owns an RNG stream seeded from `(seed, method, T, M, replication)`, so
//! results do not depend on scheduling.
//!
//! Output files (per threshold):
//!
//! * `records.csv` — `method,T,B,M,rep,estimate,abs_error,seed`
//! * `summary.csv` — `method,T,M,mae,rmse,median_abs_error,n`
//! * `pmf_T<k>.csv` — `l,prob,estimate`
//! * `resources.json`
//!
//! With several thresholds each gets its own `z<k>` subdirectory.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bootstrap::{
    cboot_estimate, ideal_bootstrap_count, BootstrapError, EnumerationCount, Sample, StatisticSpec,
    DEFAULT_ENUMERATION_CAP,
};
use crate::circuit::{self, build_plan_with, qubit_count, CircuitError, WorkReport};
use crate::numeric::fmt_f64;
use crate::qae::{self, OutcomeSampler, QaeError, QaePmf};
use crate::statevector::DEFAULT_QUBIT_CAP;
use crate::Limits;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("no records to summarize")]
    EmptyInput,
    #[error(transparent)]
    Bootstrap(#[from] BootstrapError),
    #[error(transparent)]
    Qae(#[from] QaeError),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl HarnessError {
    /// True when a configured size limit was exceeded.
    pub fn is_cap(&self) -> bool {
        match self {
            HarnessError::Bootstrap(BootstrapError::EnumerationTooLarge { .. }) => true,
            HarnessError::Qae(QaeError::CapExceeded { .. }) => true,
            HarnessError::Circuit(e) => e.is_cap(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Which QBOOT outcome distribution to sample.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathSelector {
    /// The closed-form outcome PMF.
    #[default]
    Analytic,
    /// The simulated circuit's exact outcome marginal.
    Circuit,
}

/// How many CBOOT resamples to use at precision `T`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BRule {
    /// `B = 2^T`: the same number of oracle calls as one QBOOT run.
    #[default]
    Pow2,
    /// `B = 4^T`: matched error rather than matched cost.
    Pow4,
    /// `B = c · 2^T`.
    Scaled(u64),
    /// A constant `B`.
    Fixed(u64),
}

impl BRule {
    pub fn resamples(&self, t: u32) -> Option<u64> {
        let b = match *self {
            BRule::Pow2 => 1u64.checked_shl(t)?,
            BRule::Pow4 => 1u64.checked_shl(2 * t)?,
            BRule::Scaled(c) => c.checked_mul(1u64.checked_shl(t)?)?,
            BRule::Fixed(b) => b,
        };
        (b >= 1).then_some(b)
    }
}

fn default_statistic() -> String {
    "mean".into()
}

fn default_m() -> Vec<usize> {
    vec![1]
}

fn default_enumeration_cap() -> u64 {
    DEFAULT_ENUMERATION_CAP
}

fn default_qubit_cap() -> u32 {
    DEFAULT_QUBIT_CAP
}

fn default_cost() -> f64 {
    1.0
}

/// Experiment configuration, loadable from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub sample: Vec<f64>,
    #[serde(default = "default_statistic")]
    pub statistic: String,
    pub z: Vec<f64>,
    #[serde(rename = "T")]
    pub t: Vec<u32>,
    #[serde(rename = "M", default = "default_m")]
    pub m: Vec<usize>,
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub path: PathSelector,
    #[serde(default)]
    pub b_rule: BRule,
    #[serde(default = "default_enumeration_cap")]
    pub enumeration_cap: u64,
    #[serde(default = "default_qubit_cap")]
    pub qubit_cap: u32,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Resample size `r`; defaults to `n`.
    #[serde(default)]
    pub resample_size: Option<usize>,
    /// Cost of one reversible evaluation of g, for work summaries.
    #[serde(default = "default_cost")]
    pub q_g: f64,
    /// Cost of one classical evaluation of g, for work summaries.
    #[serde(default = "default_cost")]
    pub c_g: f64,
}

impl ExperimentConfig {
    /// The desk-scale reproduction of the paper-style error-scaling study.
    pub fn paper_default() -> Self {
        Self {
            sample: vec![0.0, 1.0, 2.0, 3.0],
            statistic: "mean".into(),
            z: vec![1.25],
            t: (4..=10).collect(),
            m: vec![1],
            replications: 5000,
            seed: 12345,
            path: PathSelector::Analytic,
            b_rule: BRule::Pow2,
            enumeration_cap: DEFAULT_ENUMERATION_CAP,
            qubit_cap: DEFAULT_QUBIT_CAP,
            output_dir: None,
            resample_size: None,
            q_g: 1.0,
            c_g: 1.0,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        Self::from_json(&text)
    }

    pub fn limits(&self) -> Limits {
        Limits {
            enumeration_cap: self.enumeration_cap,
            qubit_cap: self.qubit_cap,
            ..Limits::default()
        }
    }

    pub fn sample(&self) -> Result<Sample> {
        Sample::new(self.sample.clone()).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn stat(&self) -> Result<StatisticSpec> {
        StatisticSpec::from_name(&self.statistic).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn resample_size(&self) -> usize {
        self.resample_size.unwrap_or(self.sample.len())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(HarnessError::Config(msg));
        self.sample()?;
        self.stat()?;
        if self.replications == 0 {
            return bad("replications must be at least 1".into());
        }
        if self.z.is_empty() || self.z.iter().any(|z| !z.is_finite()) {
            return bad("z must be a nonempty list of finite thresholds".into());
        }
        if self.t.is_empty() {
            return bad("T must be a nonempty list".into());
        }
        if let Some(&t) = self.t.iter().find(|&&t| t == 0) {
            return bad(format!("T = {t} is not a valid precision"));
        }
        if self.m.is_empty() {
            return bad("M must be a nonempty list".into());
        }
        if let Some(&m) = self.m.iter().find(|&&m| m % 2 == 0) {
            return bad(format!("M = {m} must be odd"));
        }
        if self.resample_size == Some(0) {
            return bad("resample_size must be positive".into());
        }
        for &t in &self.t {
            if self.b_rule.resamples(t).is_none() {
                return bad(format!(
                    "B rule {:?} gives no valid B at T = {t}",
                    self.b_rule
                ));
            }
        }
        Ok(())
    }
}

/// Estimation method of a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "CBOOT")]
    Cboot,
    #[serde(rename = "QBOOT")]
    Qboot,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Cboot => "CBOOT",
            Method::Qboot => "QBOOT",
        }
    }

    fn id(&self) -> u64 {
        match self {
            Method::Cboot => 1,
            Method::Qboot => 2,
        }
    }
}

impl std::str::FromStr for Method {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "CBOOT" => Ok(Method::Cboot),
            "QBOOT" => Ok(Method::Qboot),
            other => Err(HarnessError::Config(format!("unknown method `{other}`"))),
        }
    }
}

/// One estimate from one replication.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationRecord {
    pub method: Method,
    pub t: u32,
    pub b: u64,
    pub m: usize,
    pub rep: usize,
    pub estimate: f64,
    pub abs_error: f64,
    pub seed: u64,
}

impl ReplicationRecord {
    /// Builds a record, computing the absolute error against `truth` here
    /// rather than trusting the producer.
    pub fn new(
        method: Method,
        t: u32,
        b: u64,
        m: usize,
        rep: usize,
        estimate: f64,
        truth: f64,
        seed: u64,
    ) -> Self {
        Self {
            method,
            t,
            b,
            m,
            rep,
            estimate,
            abs_error: (estimate - truth).abs(),
            seed,
        }
    }

    fn key(&self) -> (Method, u32, usize, usize) {
        (self.method, self.t, self.m, self.rep)
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Per-draw seed from `(seed, method, T, M, replication)`.
pub fn derive_seed(seed: u64, method: Method, t: u32, m: usize, rep: usize) -> u64 {
    [method.id(), u64::from(t), m as u64, rep as u64]
        .iter()
        .fold(splitmix64(seed), |h, &v| splitmix64(h ^ v))
}

/// Aggregate errors for one `(method, T, M)` group.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub method: Method,
    #[serde(rename = "T")]
    pub t: u32,
    #[serde(rename = "M")]
    pub m: usize,
    pub mae: f64,
    pub rmse: f64,
    pub median_abs_error: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryTable {
    pub rows: Vec<SummaryRow>,
}

impl SummaryTable {
    pub fn get(&self, method: Method, t: u32, m: usize) -> Option<&SummaryRow> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.t == t && r.m == m)
    }
}

/// Per-group MAE, √MSE and lower-median absolute error.
///
/// Errors are sorted within each group before summation, so the result does
/// not depend on record order.
pub fn summarize(records: &[ReplicationRecord]) -> Result<SummaryTable> {
    if records.is_empty() {
        return Err(HarnessError::EmptyInput);
    }
    let mut groups: BTreeMap<(Method, u32, usize), Vec<f64>> = BTreeMap::new();
    for r in records {
        groups
            .entry((r.method, r.t, r.m))
            .or_default()
            .push(r.abs_error);
    }
    let rows = groups
        .into_iter()
        .map(|((method, t, m), mut errs)| {
            errs.sort_by(f64::total_cmp);
            let n = errs.len();
            let mae = errs.iter().sum::<f64>() / n as f64;
            let rmse = (errs.iter().map(|e| e * e).sum::<f64>() / n as f64).sqrt();
            SummaryRow {
                method,
                t,
                m,
                mae,
                rmse,
                median_abs_error: errs[(n - 1) / 2],
                n,
            }
        })
        .collect();
    Ok(SummaryTable { rows })
}

/// Outcome distribution used for QBOOT at one precision.
#[derive(Debug, Clone)]
pub struct OutcomeTable {
    pub t: u32,
    pub probs: Vec<f64>,
}

/// Results for one threshold.
#[derive(Debug, Clone)]
pub struct ThresholdRun {
    pub z: f64,
    pub ground_truth: EnumerationCount,
    pub records: Vec<ReplicationRecord>,
    pub summary: SummaryTable,
    pub outcomes: Vec<OutcomeTable>,
}

impl ThresholdRun {
    pub fn truth(&self) -> f64 {
        self.ground_truth.probability()
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub config: ExperimentConfig,
    pub runs: Vec<ThresholdRun>,
}

/// Runs the full protocol for every threshold in the config.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    let runs = config
        .z
        .iter()
        .map(|&z| run_threshold(config, z))
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentOutput {
        config: config.clone(),
        runs,
    })
}

fn qboot_outcomes(config: &ExperimentConfig, z: f64, t: u32, truth: f64) -> Result<Vec<f64>> {
    match config.path {
        PathSelector::Analytic => Ok(QaePmf::new(truth, t)?.probs().to_vec()),
        PathSelector::Circuit => {
            let plan = build_plan_with(
                &config.sample()?,
                &config.stat()?,
                z,
                t,
                config.resample_size(),
                config.limits(),
            )?;
            Ok(circuit::run_qae_exact(&plan)?)
        }
    }
}

fn run_threshold(config: &ExperimentConfig, z: f64) -> Result<ThresholdRun> {
    let sample = config.sample()?;
    let stat = config.stat()?;
    let r = config.resample_size();
    let ground_truth = ideal_bootstrap_count(&sample, &stat, z, r, config.enumeration_cap)?;
    let truth = ground_truth.probability();

    let mut records = Vec::new();
    let mut outcomes = Vec::new();
    for &t in &config.t {
        let b = config.b_rule.resamples(t).expect("validated");
        let probs = qboot_outcomes(config, z, t, truth)?;
        let sampler = OutcomeSampler::from_probs(&probs)?;
        outcomes.push(OutcomeTable { t, probs });

        let batch: Vec<ReplicationRecord> = (0..config.replications)
            .into_par_iter()
            .map(|rep| -> Result<Vec<ReplicationRecord>> {
                let mut out = Vec::with_capacity(config.m.len() + 1);
                for &m in &config.m {
                    let seed = derive_seed(config.seed, Method::Qboot, t, m, rep);
                    let est = sampler.median_estimate(m, &mut ChaCha8Rng::seed_from_u64(seed))?;
                    out.push(ReplicationRecord::new(
                        Method::Qboot,
                        t,
                        b,
                        m,
                        rep,
                        est,
                        truth,
                        seed,
                    ));
                }
                let seed = derive_seed(config.seed, Method::Cboot, t, 1, rep);
                let est = cboot_estimate(
                    &sample,
                    &stat,
                    z,
                    b,
                    &mut ChaCha8Rng::seed_from_u64(seed),
                    r,
                )?;
                out.push(ReplicationRecord::new(
                    Method::Cboot,
                    t,
                    b,
                    1,
                    rep,
                    est,
                    truth,
                    seed,
                ));
                Ok(out)
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .flatten()
            .collect();
        records.extend(batch);
    }
    records.sort_by_key(ReplicationRecord::key);
    let summary = summarize(&records)?;
    Ok(ThresholdRun {
        z,
        ground_truth,
        records,
        summary,
        outcomes,
    })
}

/// Per-precision resource line.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResourceLine {
    #[serde(rename = "T")]
    pub t: u32,
    /// Total qubits, or `None` when the statistic has no circuit form.
    pub qubits: Option<u64>,
    pub matched_b: u64,
    pub work: WorkReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroundTruth {
    pub z: f64,
    pub accepted: u64,
    pub total: u64,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResourceReport {
    pub n: usize,
    pub resample_size: usize,
    pub statistic: String,
    pub balanced_t_smooth: u32,
    pub balanced_t_nonsmooth: u32,
    pub per_t: Vec<ResourceLine>,
    /// Enumerated ideal-bootstrap values, when the enumeration fits the cap.
    pub ground_truth: Vec<GroundTruth>,
}

/// Qubit counts, call counts, matched `B` and balanced-`T` recommendations
/// for every precision in the config.
pub fn resource_report(config: &ExperimentConfig) -> Result<ResourceReport> {
    let sample = config.sample()?;
    let stat = config.stat()?;
    let r = config.resample_size();
    let n = sample.n();
    let mut per_t = Vec::new();
    for &t in &config.t {
        let qubits = qubit_count(&sample, &stat, r, t);
        let work = circuit::work_counts(t, n, qubits.unwrap_or(0) as u32, config.q_g, config.c_g);
        let matched_b = config
            .b_rule
            .resamples(t)
            .ok_or_else(|| HarnessError::Config(format!("no valid B at T = {t}")))?;
        per_t.push(ResourceLine {
            t,
            qubits,
            matched_b,
            work,
        });
    }
    let mut ground_truth = Vec::new();
    for &z in &config.z {
        match ideal_bootstrap_count(&sample, &stat, z, r, config.enumeration_cap) {
            Ok(c) => ground_truth.push(GroundTruth {
                z,
                accepted: c.accepted,
                total: c.total,
                probability: c.probability(),
            }),
            Err(BootstrapError::EnumerationTooLarge { .. }) => {}
            Err(e) => return Err(e.into()),
        }
    }
    let w = circuit::work_counts(0, n, 0, 1.0, 1.0);
    Ok(ResourceReport {
        n,
        resample_size: r,
        statistic: stat.name().to_string(),
        balanced_t_smooth: w.balanced_t_smooth,
        balanced_t_nonsmooth: w.balanced_t_nonsmooth,
        per_t,
        ground_truth,
    })
}

pub const RECORD_COLUMNS: [&str; 8] = [
    "method",
    "T",
    "B",
    "M",
    "rep",
    "estimate",
    "abs_error",
    "seed",
];
pub const SUMMARY_COLUMNS: [&str; 7] = ["method", "T", "M", "mae", "rmse", "median_abs_error", "n"];

pub fn write_records_csv<W: std::io::Write>(records: &[ReplicationRecord], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(RECORD_COLUMNS)?;
    for r in records {
        out.write_record([
            r.method.as_str().to_string(),
            r.t.to_string(),
            r.b.to_string(),
            r.m.to_string(),
            r.rep.to_string(),
            fmt_f64(r.estimate),
            fmt_f64(r.abs_error),
            r.seed.to_string(),
        ])?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_summary_csv<W: std::io::Write>(summary: &SummaryTable, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(SUMMARY_COLUMNS)?;
    for r in &summary.rows {
        out.write_record([
            r.method.as_str().to_string(),
            r.t.to_string(),
            r.m.to_string(),
            fmt_f64(r.mae),
            fmt_f64(r.rmse),
            fmt_f64(r.median_abs_error),
            r.n.to_string(),
        ])?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Parses a `records.csv` stream back into records.
pub fn read_records_csv<R: std::io::Read>(r: R) -> Result<Vec<ReplicationRecord>> {
    let mut reader = csv::Reader::from_reader(r);
    let parse = |s: &str, what: &str| HarnessError::Config(format!("bad {what} field `{s}`"));
    let mut records = Vec::new();
    for row in reader.records() {
        let row = row?;
        let f = |i: usize| row.get(i).unwrap_or("");
        records.push(ReplicationRecord {
            method: f(0).parse()?,
            t: f(1).parse().map_err(|_| parse(f(1), "T"))?,
            b: f(2).parse().map_err(|_| parse(f(2), "B"))?,
            m: f(3).parse().map_err(|_| parse(f(3), "M"))?,
            rep: f(4).parse().map_err(|_| parse(f(4), "rep"))?,
            estimate: f(5).parse().map_err(|_| parse(f(5), "estimate"))?,
            abs_error: f(6).parse().map_err(|_| parse(f(6), "abs_error"))?,
            seed: f(7).parse().map_err(|_| parse(f(7), "seed"))?,
        });
    }
    Ok(records)
}

fn create(path: &Path) -> Result<std::io::BufWriter<fs::File>> {
    Ok(std::io::BufWriter::new(
        fs::File::create(path).map_err(io_err(path))?,
    ))
}

/// Writes all output files under `dir`, one subdirectory per threshold when
/// there are several. Returns the directories written.
pub fn write_outputs(output: &ExperimentOutput, dir: &Path) -> Result<Vec<PathBuf>> {
    let resources = resource_report(&output.config)?;
    let multi = output.runs.len() > 1;
    let mut dirs = Vec::new();
    for (k, run) in output.runs.iter().enumerate() {
        let d = if multi {
            dir.join(format!("z{k}"))
        } else {
            dir.to_path_buf()
        };
        fs::create_dir_all(&d).map_err(io_err(&d))?;
        write_records_csv(&run.records, create(&d.join("records.csv"))?)?;
        write_summary_csv(&run.summary, create(&d.join("summary.csv"))?)?;
        for o in &run.outcomes {
            let path = d.join(format!("pmf_T{}.csv", o.t));
            qae::write_outcome_csv(&o.probs, create(&path)?).map_err(io_err(&path))?;
        }
        let mut report = resources.clone();
        report
            .ground_truth
            .retain(|g| g.z.to_bits() == run.z.to_bits());
        let path = d.join("resources.json");
        let mut w = create(&path)?;
        serde_json::to_writer_pretty(&mut w, &report)?;
        std::io::Write::write_all(&mut w, b"\n").map_err(io_err(&path))?;
        dirs.push(d);
    }
    Ok(dirs)
}

/// Least-squares slope of `log₂ y` against `x`.
pub fn log2_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let ly: Vec<f64> = ys.iter().map(|y| y.log2()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Outcome of one invariant check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &str, passed: bool, detail: String) -> CheckResult {
    CheckResult {
        name: name.to_string(),
        passed,
        detail,
    }
}

/// A quick invariant suite over small instances, for smoke-testing a build.
pub fn check_suite() -> Result<Vec<CheckResult>> {
    let sample = Sample::new(vec![0.0, 1.0, 2.0, 3.0])?;
    let mean = StatisticSpec::mean();
    let mut out = Vec::new();

    let c = ideal_bootstrap_count(&sample, &mean, 1.25, 4, DEFAULT_ENUMERATION_CAP)?;
    out.push(check(
        "ideal bootstrap ground truth",
        c.accepted == 106 && c.total == 256,
        format!("{}/{} = {}", c.accepted, c.total, fmt_f64(c.probability())),
    ));
    let h = c.probability();

    let mut worst_norm = 0.0f64;
    let mut symmetric = true;
    let mut nonneg = true;
    for k in 0..=40 {
        let hk = k as f64 / 40.0;
        for t in 1..=8 {
            let p = QaePmf::new(hk, t)?;
            worst_norm = worst_norm.max((p.total_mass() - 1.0).abs());
            let n = p.len();
            symmetric &= (1..n).all(|l| p.probs()[l] == p.probs()[n - l]);
            nonneg &= p.probs().iter().all(|&x| x >= 0.0);
        }
    }
    out.push(check(
        "outcome PMF normalized, nonnegative, alias-symmetric",
        worst_norm <= 1e-12 && symmetric && nonneg,
        format!("max |mass - 1| = {worst_norm:e}"),
    ));

    let mut worst = 0.0f64;
    for t in [4, 6, 8] {
        worst = worst.max((qae::bias_closed_form(h, t)? - qae::pmf_moment_bias(h, t)?).abs());
        worst = worst.max((qae::mse_closed_form(h, t)? - qae::pmf_moment_mse(h, t)?).abs());
    }
    out.push(check(
        "bias/MSE closed forms match PMF moments",
        worst <= 1e-9,
        format!("max deviation {worst:e}"),
    ));

    let mut min_q = f64::INFINITY;
    let mut worst_ratio = 0.0f64;
    for k in 0..=50 {
        let hk = k as f64 / 50.0;
        for t in [4, 6] {
            min_q = min_q.min(qae::single_run_success(hk, t)?);
            for m in [1, 3, 5, 7] {
                worst_ratio = worst_ratio
                    .max(qae::median_failure_exact(hk, t, m)? / qae::rho().powf(m as f64 / 2.0));
            }
        }
    }
    out.push(check(
        "single-run success at least 8/pi^2",
        min_q >= qae::single_run_floor(),
        format!("min {min_q:.6} vs {:.6}", qae::single_run_floor()),
    ));
    out.push(check(
        "median-of-M failure within rho^(M/2)",
        worst_ratio <= 1.0,
        format!("max failure / bound = {worst_ratio:.4}"),
    ));

    let worst_mae = |t: u32| -> Result<f64> {
        let mut w = 0.0f64;
        for k in 0..=50 {
            let hk = k as f64 / 50.0;
            w = w.max(QaePmf::new(hk, t)?.expect(|e| (e - hk).abs()));
        }
        Ok(w)
    };
    let mut ratios = Vec::new();
    for t in 4..10 {
        ratios.push(worst_mae(t + 1)? / worst_mae(t)?);
    }
    out.push(check(
        "worst-case MAE halves per precision qubit",
        ratios.iter().all(|r| (0.3..=0.7).contains(r)),
        format!(
            "ratios for T = 4..9: {}",
            ratios
                .iter()
                .map(|r| format!("{r:.3}"))
                .collect::<Vec<_>>()
                .join(", ")
        ),
    ));

    let mut worst = 0.0f64;
    for t in 2..=4 {
        let plan = circuit::build_plan(&sample, &mean, 1.25, t, 4)?;
        let marginal = circuit::run_qae_exact(&plan)?;
        let pmf = QaePmf::new(h, t)?;
        for (a, b) in marginal.iter().zip(pmf.probs()) {
            worst = worst.max((a - b).abs());
        }
    }
    out.push(check(
        "circuit marginal equals closed-form PMF (T = 2..4)",
        worst <= 1e-9,
        format!("max deviation {worst:e}"),
    ));

    let plan = circuit::build_plan(&sample, &mean, 1.25, 10, 4)?;
    let w = circuit::work_report(&plan, 1.0, 1.0);
    out.push(check(
        "resource accounting",
        plan.num_qubits() == 23 && w.grover_iterations == 1023,
        format!(
            "{} qubits, {} Grover iterations at T = 10",
            plan.num_qubits(),
            w.grover_iterations
        ),
    ));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(method: Method, t: u32, rep: usize, err: f64) -> ReplicationRecord {
        ReplicationRecord::new(method, t, 1 << t, 1, rep, err, 0.0, 0)
    }

    #[test]
    fn summarize_examples() {
        let s = summarize(&[rec(Method::Qboot, 4, 0, 0.3)]).unwrap();
        let r = &s.rows[0];
        assert_eq!((r.mae, r.rmse, r.median_abs_error, r.n), (0.3, 0.3, 0.3, 1));

        let s = summarize(&[rec(Method::Qboot, 4, 0, 0.0), rec(Method::Qboot, 4, 1, 0.1)]).unwrap();
        let r = &s.rows[0];
        assert!((r.mae - 0.05).abs() < 1e-16);
        assert!((r.rmse - 0.1 / 2f64.sqrt()).abs() < 1e-16);
        assert_eq!(r.median_abs_error, 0.0);

        assert!(matches!(summarize(&[]), Err(HarnessError::EmptyInput)));
    }

    #[test]
    fn summarize_is_permutation_invariant() {
        let mut v: Vec<_> = (0..50)
            .map(|i| rec(Method::Cboot, 5, i, (i as f64 * 0.37).sin().abs()))
            .collect();
        let a = summarize(&v).unwrap();
        v.reverse();
        v.swap(3, 17);
        assert_eq!(a, summarize(&v).unwrap());
    }

    #[test]
    fn record_recomputes_error() {
        let r = ReplicationRecord::new(Method::Qboot, 4, 16, 1, 0, 0.5, 0.4140625, 9);
        assert_eq!(r.abs_error, 0.5 - 0.4140625);
    }

    #[test]
    fn b_rules() {
        assert_eq!(BRule::Pow2.resamples(6), Some(64));
        assert_eq!(BRule::Pow4.resamples(3), Some(64));
        assert_eq!(BRule::Scaled(3).resamples(2), Some(12));
        assert_eq!(BRule::Fixed(0).resamples(2), None);
        let cfg: ExperimentConfig = serde_json::from_str(
            r#"{"sample":[0,1],"z":[0.5],"T":[2],"replications":1,"b_rule":{"fixed":7}}"#,
        )
        .unwrap();
        assert_eq!(cfg.b_rule, BRule::Fixed(7));
        assert_eq!(cfg.m, vec![1]);
    }

    #[test]
    fn config_validation() {
        let mut c = ExperimentConfig::paper_default();
        assert!(c.validate().is_ok());
        c.m = vec![1, 4];
        assert!(c.validate().is_err());
        c = ExperimentConfig::paper_default();
        c.replications = 0;
        assert!(c.validate().is_err());
        c = ExperimentConfig::paper_default();
        c.statistic = "nope".into();
        assert!(c.validate().is_err());
        assert!(ExperimentConfig::from_json(
            r#"{"sample":[1],"z":[1],"T":[1],"replications":1,"bogus":2}"#
        )
        .is_err());
    }

    #[test]
    fn seeds_differ_across_keys() {
        let a = derive_seed(1, Method::Qboot, 4, 1, 0);
        assert_ne!(a, derive_seed(1, Method::Cboot, 4, 1, 0));
        assert_ne!(a, derive_seed(1, Method::Qboot, 5, 1, 0));
        assert_ne!(a, derive_seed(1, Method::Qboot, 4, 3, 0));
        assert_ne!(a, derive_seed(1, Method::Qboot, 4, 1, 1));
        assert_ne!(a, derive_seed(2, Method::Qboot, 4, 1, 0));
    }

    #[test]
    fn small_run_is_deterministic_and_round_trips() {
        let mut c = ExperimentConfig::paper_default();
        c.t = vec![4, 5];
        c.m = vec![1, 3];
        c.replications = 20;
        let a = run_experiment(&c).unwrap();
        let b = run_experiment(&c).unwrap();
        assert_eq!(a.runs[0].records, b.runs[0].records);
        assert_eq!(a.runs[0].ground_truth.accepted, 106);
        assert_eq!(a.runs[0].records.len(), 2 * 20 * 3);

        let mut buf = Vec::new();
        write_records_csv(&a.runs[0].records, &mut buf).unwrap();
        let back = read_records_csv(buf.as_slice()).unwrap();
        assert_eq!(back, a.runs[0].records);
        assert_eq!(summarize(&back).unwrap(), a.runs[0].summary);
    }

    #[test]
    fn slope_of_exact_power() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2f64.powf(-x)).collect();
        assert!((log2_slope(&xs, &ys) + 1.0).abs() < 1e-12);
    }
}
