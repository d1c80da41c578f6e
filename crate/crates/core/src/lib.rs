//! Classical simulation and analysis of the quantum bootstrap.
//!
//! * [`bootstrap`] — exact (enumerated) and Monte Carlo bootstrap CDFs.
//! * [`qae`] — closed-form outcome statistics of canonical amplitude
//!   estimation: exact PMF, bias/MSE, single-run and median-of-M bounds.
//! * [`statevector`] — dense statevector simulator with register layouts.
//! * [`circuit`] — the bootstrap circuit: preparation, indicator oracle,
//!   Grover iterate, phase estimation and resource accounting.
//! * [`harness`] — cost-matched experiments, summaries and output writers.

pub mod bootstrap;
pub mod circuit;
pub mod harness;
pub mod numeric;
pub mod qae;
pub mod statevector;

pub use bootstrap::{
    cboot_estimate, empirical_measure, evaluate_indicator, ideal_bootstrap_cdf,
    ideal_bootstrap_count, ideal_bootstrap_grid, kolmogorov_distance, BootstrapError, CdfGrid,
    EnumerationCount, IndexVector, Sample, ScoreSumForm, StatisticSpec,
};
pub use circuit::{build_plan, run_qae_exact, work_report, CircuitError, QbootPlan, WorkReport};
pub use harness::{
    run_experiment, summarize, ExperimentConfig, HarnessError, ReplicationRecord, SummaryTable,
};
pub use qae::{QaeError, QaePmf};
pub use statevector::{EngineError, Gate, QubitLayout, StateVector};

/// Size limits shared by the analytic and circuit paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    /// Maximum number of index vectors an enumeration may visit.
    pub enumeration_cap: u64,
    /// Maximum number of qubits in a simulated state.
    pub qubit_cap: u32,
    /// Maximum precision for which a full outcome PMF is materialized.
    pub max_precision: u32,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            enumeration_cap: bootstrap::DEFAULT_ENUMERATION_CAP,
            qubit_cap: statevector::DEFAULT_QUBIT_CAP,
            max_precision: qae::DEFAULT_MAX_PRECISION,
        }
    }
}
