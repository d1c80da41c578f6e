//! The bootstrap circuit on the statevector engine.
//!
//! Qubit layout, from qubit 0 upward:
//!
//! | register    | width                 |
//! |-------------|-----------------------|
//! | `bootstrap` | `r·⌈log₂ n⌉`          |
//! | `statistic` | `⌈log₂(V + 1)⌉`        |
//! | `label`     | 1                     |
//! | `ancilla`   | 0                     |
//! | `precision` | `T`                   |
//!
//! `V` is the largest achievable score sum. Index register `j` occupies
//! bootstrap qubits `j·m .. (j+1)·m` and holds `i_j − 1` in binary.
//!
//! The oracle accumulates the score of each index register into the
//! statistic register, flips the label when the sum is within the integer
//! bound, and uncomputes the sum, so it needs no further ancillas.

use std::sync::Arc;

use num_complex::Complex64;
use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::bootstrap::{
    enumeration_size, evaluate_indicator, fold_index_vectors, BootstrapError, EnumerationCount,
    Sample, ScoreSumForm, StatisticSpec,
};
use crate::numeric::ceil_log2;
use crate::qae::{estimate_from_outcome, QaeError};
use crate::statevector::{
    adjoint_sequence, inverse_qft_gates, Control, EngineError, Gate, QubitLayout, StateVector,
    UnitaryMatrix,
};
use crate::Limits;

/// Weight outside the all-zero statistic value tolerated by the clean check.
const CLEAN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CircuitError {
    #[error("statistic `{0}` has no integer score-sum form on this sample")]
    NoCircuitForm(String),
    #[error("circuit needs {qubits} qubits, above the cap of {cap}")]
    CapExceeded { qubits: u32, cap: u32 },
    #[error("register `{register}` is not clean (weight {weight:e} off zero)")]
    RegisterNotClean { register: String, weight: f64 },
    #[error("integer bound disagrees with the statistic on resample {indices:?}")]
    BoundMismatch { indices: Vec<usize> },
    #[error(transparent)]
    Bootstrap(#[from] BootstrapError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Qae(#[from] QaeError),
}

impl CircuitError {
    /// True for the size-limit errors (qubits, enumeration, precision).
    pub fn is_cap(&self) -> bool {
        matches!(
            self,
            CircuitError::CapExceeded { .. }
                | CircuitError::Engine(EngineError::CapExceeded { .. })
                | CircuitError::Bootstrap(BootstrapError::EnumerationTooLarge { .. })
                | CircuitError::Qae(QaeError::CapExceeded { .. })
        )
    }
}

pub type Result<T> = std::result::Result<T, CircuitError>;

/// An immutable, validated circuit instance.
#[derive(Debug, Clone)]
pub struct QbootPlan {
    sample: Sample,
    stat: StatisticSpec,
    z: f64,
    resample_size: usize,
    t: u32,
    form: ScoreSumForm,
    integer_bound: Option<u64>,
    index_width: u32,
    layout: QubitLayout,
    qubit_cap: u32,
    /// Accepted count from the validating enumeration, when it ran.
    enumerated: Option<EnumerationCount>,
    prep: Vec<Gate>,
    oracle: Vec<Gate>,
    grover: Vec<Gate>,
}

impl QbootPlan {
    pub fn sample(&self) -> &Sample {
        &self.sample
    }

    pub fn statistic(&self) -> &StatisticSpec {
        &self.stat
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn t(&self) -> u32 {
        self.t
    }

    pub fn resample_size(&self) -> usize {
        self.resample_size
    }

    /// Largest accepted score sum; `None` when nothing is accepted.
    pub fn integer_bound(&self) -> Option<u64> {
        self.integer_bound
    }

    pub fn score_table(&self) -> &[u64] {
        self.form.scores()
    }

    pub fn max_score_sum(&self) -> u64 {
        self.form.max_score_sum()
    }

    pub fn layout(&self) -> &QubitLayout {
        &self.layout
    }

    pub fn num_qubits(&self) -> u32 {
        self.layout.total()
    }

    pub fn enumerated(&self) -> Option<EnumerationCount> {
        self.enumerated
    }

    /// Qubits of index register `j`.
    pub fn index_register(&self, j: usize) -> Vec<u32> {
        let start = self.register("bootstrap").start + j as u32 * self.index_width;
        (start..start + self.index_width).collect()
    }

    fn register(&self, name: &str) -> &crate::statevector::Register {
        self.layout
            .register(name)
            .expect("plan layouts define every register")
    }

    pub fn statistic_qubits(&self) -> Vec<u32> {
        self.register("statistic").qubits()
    }

    pub fn label_qubit(&self) -> u32 {
        self.register("label").start
    }

    pub fn precision_qubits(&self) -> Vec<u32> {
        self.register("precision").qubits()
    }

    /// Every qubit outside the precision register.
    pub fn work_qubits(&self) -> Vec<u32> {
        (0..self.register("precision").start).collect()
    }

    /// State preparation `P`: uniform superposition on each index register.
    pub fn preparation_gates(&self) -> &[Gate] {
        &self.prep
    }

    /// The indicator oracle `U_g(z)`.
    pub fn oracle_gates(&self) -> &[Gate] {
        &self.oracle
    }

    /// One Grover iterate `Q`.
    pub fn grover_gates(&self) -> &[Gate] {
        &self.grover
    }
}

/// Total qubits `r·⌈log₂ n⌉ + ⌈log₂(V+1)⌉ + 1 + T`, or `None` when the
/// statistic has no circuit form on this sample.
pub fn qubit_count(
    sample: &Sample,
    stat: &StatisticSpec,
    resample_size: usize,
    t: u32,
) -> Option<u64> {
    let form = stat.circuit_form(sample, resample_size)?;
    let index_width = u64::from(ceil_log2(sample.n() as u64));
    Some(
        index_width * resample_size as u64
            + u64::from(ceil_log2(form.max_score_sum() + 1))
            + 1
            + u64::from(t),
    )
}

/// Builds and validates a plan under the default [`Limits`].
pub fn build_plan(
    sample: &Sample,
    stat: &StatisticSpec,
    z: f64,
    t: u32,
    resample_size: usize,
) -> Result<QbootPlan> {
    build_plan_with(sample, stat, z, t, resample_size, Limits::default())
}

pub fn build_plan_with(
    sample: &Sample,
    stat: &StatisticSpec,
    z: f64,
    t: u32,
    resample_size: usize,
    limits: Limits,
) -> Result<QbootPlan> {
    if resample_size == 0 {
        return Err(BootstrapError::ZeroResampleSize.into());
    }
    let form = stat
        .circuit_form(sample, resample_size)
        .ok_or_else(|| CircuitError::NoCircuitForm(stat.name().to_string()))?;
    let n = sample.n();
    let index_width = ceil_log2(n as u64);
    let stat_width = ceil_log2(form.max_score_sum() + 1);
    let bootstrap_width = u64::from(index_width) * resample_size as u64;
    let total = qubit_count(sample, stat, resample_size, t).expect("circuit form exists");
    if total > u64::from(limits.qubit_cap) {
        return Err(CircuitError::CapExceeded {
            qubits: total.min(u64::from(u32::MAX)) as u32,
            cap: limits.qubit_cap,
        });
    }
    let mut layout = QubitLayout::new();
    layout.push("bootstrap", bootstrap_width as u32)?;
    layout.push("statistic", stat_width)?;
    layout.push("label", 1)?;
    layout.push("ancilla", 0)?;
    layout.push("precision", t)?;

    let integer_bound = form.integer_bound(z);
    let enumerated = if enumeration_size(n, resample_size, limits.enumeration_cap).is_ok() {
        Some(validate_bound(
            sample,
            stat,
            &form,
            z,
            integer_bound,
            resample_size,
            limits.enumeration_cap,
        )?)
    } else {
        None
    };

    let mut plan = QbootPlan {
        sample: sample.clone(),
        stat: stat.clone(),
        z,
        resample_size,
        t,
        form,
        integer_bound,
        index_width,
        layout,
        qubit_cap: limits.qubit_cap,
        enumerated,
        prep: Vec::new(),
        oracle: Vec::new(),
        grover: Vec::new(),
    };
    plan.prep = preparation(&plan)?;
    plan.oracle = oracle(&plan);
    plan.grover = grover(&plan);
    Ok(plan)
}

/// Checks `(Σ scores ≤ bound) ⇔ (f(resample) ≤ z)` on every index vector and
/// returns the accepted count.
fn validate_bound(
    sample: &Sample,
    stat: &StatisticSpec,
    form: &ScoreSumForm,
    z: f64,
    bound: Option<u64>,
    resample_size: usize,
    cap: u64,
) -> Result<EnumerationCount> {
    let total = enumeration_size(sample.n(), resample_size, cap)?;
    let scores = form.scores();
    let (accepted, mismatch) = fold_index_vectors(
        sample,
        resample_size,
        cap,
        || (0u64, None::<Vec<usize>>),
        |acc, idx, resample| {
            let sum: u64 = idx.iter().map(|&i| scores[i]).sum();
            let circuit = bound.is_some_and(|b| sum <= b);
            let direct = evaluate_indicator(stat, resample, z);
            acc.0 += direct as u64;
            if circuit != direct && acc.1.is_none() {
                acc.1 = Some(idx.to_vec());
            }
        },
        |a, b| (a.0 + b.0, a.1.or(b.1)),
    )?;
    if let Some(indices) = mismatch {
        return Err(CircuitError::BoundMismatch { indices });
    }
    Ok(EnumerationCount { accepted, total })
}

/// Real orthogonal reflection on `2^m` amplitudes mapping `e₀` to the uniform
/// vector over the first `n` basis states.
pub fn uniform_loader(n: usize, m: u32) -> std::result::Result<UnitaryMatrix, EngineError> {
    let d = 1usize << m;
    let a = 1.0 / (n as f64).sqrt();
    let mut v = vec![0.0; d];
    v[..n].iter_mut().for_each(|x| *x = -a);
    v[0] += 1.0;
    let vv: f64 = v.iter().map(|x| x * x).sum();
    let mut data = vec![0.0; d * d];
    for r in 0..d {
        for c in 0..d {
            let id = if r == c { 1.0 } else { 0.0 };
            data[r * d + c] = if vv > 0.0 {
                id - 2.0 * v[r] * v[c] / vv
            } else {
                id
            };
        }
    }
    UnitaryMatrix::from_real(m as usize, &data)
}

fn preparation(plan: &QbootPlan) -> Result<Vec<Gate>> {
    let n = plan.sample.n();
    let m = plan.index_width;
    if m == 0 {
        return Ok(Vec::new());
    }
    if n.is_power_of_two() {
        return Ok(plan
            .register("bootstrap")
            .qubits()
            .into_iter()
            .map(Gate::H)
            .collect());
    }
    let loader = Arc::new(uniform_loader(n, m)?);
    Ok((0..plan.resample_size)
        .map(|j| Gate::Unitary {
            qubits: plan.index_register(j),
            matrix: loader.clone(),
        })
        .collect())
}

fn padded_table(plan: &QbootPlan) -> Arc<Vec<u64>> {
    let mut table = plan.form.scores().to_vec();
    table.resize(1usize << plan.index_width, 0);
    Arc::new(table)
}

fn oracle(plan: &QbootPlan) -> Vec<Gate> {
    let label = plan.label_qubit();
    let stat = plan.statistic_qubits();
    let Some(bound) = plan.integer_bound else {
        return Vec::new();
    };
    if stat.is_empty() {
        // Every resample has score sum 0, which is within the bound.
        return vec![Gate::X(label)];
    }
    let table = padded_table(plan);
    let accumulate: Vec<Gate> = (0..plan.resample_size)
        .filter(|_| plan.index_width > 0)
        .map(|j| Gate::AddLookup {
            index: plan.index_register(j),
            target: stat.clone(),
            table: table.clone(),
            subtract: false,
        })
        .collect();
    let mut gates = accumulate.clone();
    gates.push(Gate::FlipIfLe {
        register: stat,
        bound,
        target: label,
    });
    gates.extend(adjoint_sequence(&accumulate));
    gates
}

/// `Q = A·S₀·A†·S_φ1` with `A = U_g·P`, applied right to left.
///
/// `S_φ1` is a Z on the label. `S₀` is realized as `2|0⟩⟨0| − I` on the work
/// qubits (a multi-controlled Z with all controls negated, times −1). With
/// this sign the iterate rotates the accept amplitude forward, from `sin τ`
/// to `sin 3τ`, and has eigenvalues `e^{±2iτ}` on the invariant plane, so
/// phase estimation reads out `h` rather than `1 − h`.
fn grover(plan: &QbootPlan) -> Vec<Gate> {
    let mut a = plan.prep.clone();
    a.extend(plan.oracle.iter().cloned());
    let mut gates = vec![Gate::Z(plan.label_qubit())];
    gates.extend(adjoint_sequence(&a));
    gates.push(Gate::Mcz(
        plan.work_qubits().into_iter().map(Control::off).collect(),
    ));
    gates.push(Gate::GlobalPhase(std::f64::consts::PI));
    gates.extend(a);
    gates
}

fn allocate(plan: &QbootPlan) -> Result<StateVector> {
    Ok(StateVector::allocate_with_cap(
        plan.layout.clone(),
        plan.qubit_cap,
    )?)
}

/// `|0⟩ ↦ P|0⟩`: each index register in `n^{-1/2} Σ_i |i − 1⟩`, all other
/// registers zero.
pub fn prepare_bootstrap_state(plan: &QbootPlan) -> Result<StateVector> {
    let mut state = allocate(plan)?;
    state.apply_gates(&plan.prep)?;
    Ok(state)
}

fn ensure_clean(state: &StateVector, plan: &QbootPlan) -> Result<()> {
    let stat = plan.statistic_qubits();
    if stat.is_empty() {
        return Ok(());
    }
    let marginal = state.marginal_probabilities(&stat)?;
    let weight: f64 = marginal[1..].iter().sum();
    if weight > CLEAN_TOL {
        return Err(CircuitError::RegisterNotClean {
            register: "statistic".into(),
            weight,
        });
    }
    Ok(())
}

fn ensure_layout(state: &StateVector, plan: &QbootPlan) -> Result<()> {
    if state.layout() != plan.layout() {
        return Err(EngineError::InvalidGate("state layout does not match the plan".into()).into());
    }
    Ok(())
}

/// Applies `U_g(z)`; the statistic register must be clean.
pub fn apply_oracle(state: &mut StateVector, plan: &QbootPlan) -> Result<()> {
    ensure_layout(state, plan)?;
    ensure_clean(state, plan)?;
    state.apply_gates(&plan.oracle)?;
    Ok(())
}

/// Applies `U_g(z)†`; the statistic register must be clean.
pub fn apply_oracle_adjoint(state: &mut StateVector, plan: &QbootPlan) -> Result<()> {
    ensure_layout(state, plan)?;
    ensure_clean(state, plan)?;
    state.apply_gates(&adjoint_sequence(&plan.oracle))?;
    Ok(())
}

/// `A|0⟩`: prepared bootstrap register with the label computed.
pub fn prepare_and_label(plan: &QbootPlan) -> Result<StateVector> {
    let mut state = prepare_bootstrap_state(plan)?;
    apply_oracle(&mut state, plan)?;
    Ok(state)
}

pub fn grover_iterate(state: &mut StateVector, plan: &QbootPlan) -> Result<()> {
    ensure_layout(state, plan)?;
    state.apply_gates(&plan.grover)?;
    Ok(())
}

/// `Pr(label = 1)` of a state.
pub fn accept_probability(state: &StateVector, plan: &QbootPlan) -> Result<f64> {
    Ok(state.marginal_probabilities(&[plan.label_qubit()])?[1])
}

/// Canonical phase estimation on the iterate; returns the exact marginal of
/// the precision register read as an integer `Y` in natural binary.
pub fn run_qae_exact(plan: &QbootPlan) -> Result<Vec<f64>> {
    let mut state = prepare_and_label(plan)?;
    let precision = plan.precision_qubits();
    state.apply_gates(&precision.iter().map(|&q| Gate::H(q)).collect::<Vec<_>>())?;
    for (k, &control) in precision.iter().enumerate() {
        for _ in 0..1u64 << k {
            state.apply_controlled(control, &plan.grover)?;
        }
    }
    state.apply_gates(&inverse_qft_gates(&precision))?;
    Ok(state.marginal_probabilities(&precision)?)
}

/// Draws `shots` outcomes from an exact precision-register marginal and maps
/// them to estimates `sin²(πY/2^T)`.
pub fn sample_estimates<R: Rng + ?Sized>(
    marginal: &[f64],
    t: u32,
    rng: &mut R,
    shots: usize,
) -> Result<Vec<f64>> {
    let dist = WeightedIndex::new(marginal)
        .map_err(|e| EngineError::InvalidGate(format!("invalid outcome marginal: {e}")))?;
    (0..shots)
        .map(|_| Ok(estimate_from_outcome(dist.sample(rng) as u64, t)?))
        .collect()
}

/// Runs the circuit once and samples `shots` estimates from its marginal.
pub fn sample_qboot<R: Rng + ?Sized>(
    plan: &QbootPlan,
    rng: &mut R,
    shots: usize,
) -> Result<Vec<f64>> {
    let marginal = run_qae_exact(plan)?;
    sample_estimates(&marginal, plan.t, rng, shots)
}

/// Structural operation counts for one canonical phase-estimation run, with
/// asymptotic work summaries for user-supplied per-evaluation costs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WorkReport {
    #[serde(rename = "T")]
    pub t: u32,
    pub n: usize,
    pub qubits: u32,
    pub grover_iterations: u64,
    pub oracle_calls: u64,
    pub oracle_adjoint_calls: u64,
    pub prep_calls: u64,
    pub prep_adjoint_calls: u64,
    /// Cost of one reversible evaluation of g.
    pub q_g: f64,
    /// Cost of one classical evaluation of g.
    pub c_g: f64,
    /// `2^T · max(Q_g, n log₂ n)`.
    pub qboot_work: f64,
    /// Resamples at matched cost, `B = 2^T`.
    pub cboot_matched_cost_b: u64,
    /// `B · max(C_g, n log₂ n)` at `B = 2^T`.
    pub cboot_work_matched_cost: f64,
    /// Resamples for matched error `ε = 2^{-T}`, `B = 4^T`.
    pub cboot_matched_error_b: f64,
    /// `4^T · max(C_g, n log₂ n)`.
    pub cboot_work_matched_error: f64,
    /// `⌈log₂ n⌉`, balancing `2^{-T}` against an `n^{-1}` bootstrap error.
    pub balanced_t_smooth: u32,
    /// `⌈½ log₂ n⌉`, balancing against an `n^{-1/2}` bootstrap error.
    pub balanced_t_nonsmooth: u32,
    pub is_balanced_smooth: bool,
}

/// Counts for precision `t` on a sample of size `n` with `qubits` total.
pub fn work_counts(t: u32, n: usize, qubits: u32, q_g: f64, c_g: f64) -> WorkReport {
    let runs = 1u64 << t;
    let nf = n as f64;
    let resample_cost = nf * nf.log2();
    let balanced_t_smooth = ceil_log2(n as u64);
    let balanced_t_nonsmooth = (0.5 * nf.log2()).ceil() as u32;
    let cboot_matched_error_b = 4f64.powi(t as i32);
    WorkReport {
        t,
        n,
        qubits,
        grover_iterations: runs - 1,
        oracle_calls: runs,
        oracle_adjoint_calls: runs - 1,
        prep_calls: runs,
        prep_adjoint_calls: runs - 1,
        q_g,
        c_g,
        qboot_work: runs as f64 * q_g.max(resample_cost),
        cboot_matched_cost_b: runs,
        cboot_work_matched_cost: runs as f64 * c_g.max(resample_cost),
        cboot_matched_error_b,
        cboot_work_matched_error: cboot_matched_error_b * c_g.max(resample_cost),
        balanced_t_smooth,
        balanced_t_nonsmooth,
        is_balanced_smooth: t == balanced_t_smooth,
    }
}

pub fn work_report(plan: &QbootPlan, q_g: f64, c_g: f64) -> WorkReport {
    work_counts(plan.t, plan.sample.n(), plan.num_qubits(), q_g, c_g)
}

/// `controls`-conditioned addition of the constant `c` modulo `2^w` on
/// `target`, as multi-controlled X gates.
///
/// Adding `2^b` is an increment of bits `b..w`: bit `k` flips when bits
/// `b..k` are all set, applied from the top bit down.
pub fn add_constant_mcx(target: &[u32], c: u64, controls: &[Control]) -> Vec<Gate> {
    let w = target.len();
    let mut gates = Vec::new();
    for b in (0..w).filter(|&b| (c >> b) & 1 == 1) {
        for k in (b..w).rev() {
            let mut cs = controls.to_vec();
            cs.extend(target[b..k].iter().map(|&q| Control::on(q)));
            gates.push(Gate::Mcx {
                controls: cs,
                target: target[k],
            });
        }
    }
    gates
}

/// Decomposition of [`Gate::AddLookup`] into multi-controlled X gates: one
/// controlled constant adder per index value.
pub fn add_lookup_mcx(index: &[u32], target: &[u32], table: &[u64], subtract: bool) -> Vec<Gate> {
    let modulus = 1u128 << target.len();
    let mut gates = Vec::new();
    for (v, &entry) in table.iter().enumerate() {
        let c = (u128::from(entry) % modulus) as u64;
        let c = if subtract {
            ((modulus - u128::from(c)) % modulus) as u64
        } else {
            c
        };
        let controls: Vec<Control> = index
            .iter()
            .enumerate()
            .map(|(j, &q)| Control {
                qubit: q,
                state: (v >> j) & 1 == 1,
            })
            .collect();
        gates.extend(add_constant_mcx(target, c, &controls));
    }
    gates
}

/// Decomposition of [`Gate::FlipIfLe`] into multi-controlled X gates.
///
/// With `u = bound + 1`, `x < u` holds iff for some set bit `j` of `u`,
/// `x_j = 0` and `x` agrees with `u` above `j`. These events are disjoint, so
/// one gate per set bit suffices.
pub fn flip_if_le_mcx(register: &[u32], bound: u64, target: u32) -> Vec<Gate> {
    let w = register.len();
    let u = u128::from(bound) + 1;
    if u >= 1u128 << w {
        return vec![Gate::X(target)];
    }
    (0..w)
        .filter(|&j| (u >> j) & 1 == 1)
        .map(|j| {
            let mut controls = vec![Control::off(register[j])];
            controls.extend((j + 1..w).map(|k| Control {
                qubit: register[k],
                state: (u >> k) & 1 == 1,
            }));
            Gate::Mcx { controls, target }
        })
        .collect()
}

/// Replaces arithmetic primitives with their multi-controlled X expansions.
pub fn decompose_arithmetic(gates: &[Gate]) -> Vec<Gate> {
    gates
        .iter()
        .flat_map(|g| match g {
            Gate::AddLookup {
                index,
                target,
                table,
                subtract,
            } => add_lookup_mcx(index, target, table, *subtract),
            Gate::FlipIfLe {
                register,
                bound,
                target,
            } => flip_if_le_mcx(register, *bound, *target),
            other => vec![other.clone()],
        })
        .collect()
}

/// Dense matrix (row-major, `2^q × 2^q`) of a gate sequence on `q` qubits.
pub fn dense_matrix(gates: &[Gate], qubits: u32) -> Result<Vec<Complex64>> {
    let d = 1usize << qubits;
    let mut out = vec![Complex64::new(0.0, 0.0); d * d];
    for col in 0..d {
        let mut amps = vec![Complex64::new(0.0, 0.0); d];
        amps[col] = Complex64::new(1.0, 0.0);
        let mut s = StateVector::from_amplitudes(QubitLayout::flat(qubits), amps)?;
        s.apply_gates(gates)?;
        for (row, a) in s.amplitudes().iter().enumerate() {
            out[row * d + col] = *a;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bootstrap::ideal_bootstrap_cdf;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn paper_plan(t: u32) -> QbootPlan {
        let s = Sample::new(vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        build_plan(&s, &StatisticSpec::mean(), 1.25, t, 4).unwrap()
    }

    #[test]
    fn qubit_counts() {
        let p = paper_plan(10);
        assert_eq!(p.num_qubits(), 23);
        assert_eq!(p.integer_bound(), Some(5));
        assert_eq!(
            p.enumerated(),
            Some(EnumerationCount {
                accepted: 106,
                total: 256
            })
        );
        let s = Sample::new(vec![0.0, 1.0]).unwrap();
        let p = build_plan(&s, &StatisticSpec::mean(), 0.5, 3, 2).unwrap();
        assert_eq!(p.layout().register("bootstrap").unwrap().width, 2);
        assert_eq!(p.statistic_qubits().len(), 2);
        assert_eq!(p.num_qubits(), 8);
    }

    #[test]
    fn plan_errors() {
        let s = Sample::new(vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        assert!(matches!(
            build_plan(&s, &StatisticSpec::median(), 1.0, 2, 4),
            Err(CircuitError::NoCircuitForm(_))
        ));
        let err = build_plan(&s, &StatisticSpec::mean(), 1.0, 14, 4).unwrap_err();
        assert_eq!(
            err,
            CircuitError::CapExceeded {
                qubits: 27,
                cap: 26
            }
        );
        assert!(err.is_cap());
    }

    #[test]
    fn empty_accept_set_never_flips() {
        let s = Sample::new(vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        let p = build_plan(&s, &StatisticSpec::mean(), -1.0, 1, 4).unwrap();
        assert!(p.oracle_gates().is_empty());
        let state = prepare_and_label(&p).unwrap();
        assert_eq!(accept_probability(&state, &p).unwrap(), 0.0);
    }

    #[test]
    fn label_marginal_matches_enumeration() {
        let p = paper_plan(0);
        let state = prepare_and_label(&p).unwrap();
        assert!((accept_probability(&state, &p).unwrap() - 0.4140625).abs() < 1e-12);
        let s = Sample::new(vec![2.0, 0.0, 5.0]).unwrap();
        for z in [0.0, 1.0, 2.2, 3.0, 5.0] {
            let p = build_plan(&s, &StatisticSpec::mean(), z, 0, 3).unwrap();
            let state = prepare_and_label(&p).unwrap();
            let h = ideal_bootstrap_cdf(&s, &StatisticSpec::mean(), z, 3, 1000).unwrap();
            assert!(
                (accept_probability(&state, &p).unwrap() - h).abs() < 1e-10,
                "z={z}"
            );
        }
    }

    #[test]
    fn non_power_of_two_preparation_is_uniform() {
        let s = Sample::new(vec![1.0, 2.0, 3.0]).unwrap();
        let p = build_plan(&s, &StatisticSpec::sum(), 4.0, 0, 2).unwrap();
        let state = prepare_bootstrap_state(&p).unwrap();
        let m = state.marginal_probabilities(&p.index_register(1)).unwrap();
        for (k, &pk) in m.iter().enumerate() {
            let expect = if k < 3 { 1.0 / 3.0 } else { 0.0 };
            assert!((pk - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn oracle_is_self_inverse_and_checks_cleanliness() {
        let p = paper_plan(0);
        let mut state = prepare_bootstrap_state(&p).unwrap();
        let before = state.amplitudes().to_vec();
        apply_oracle(&mut state, &p).unwrap();
        apply_oracle_adjoint(&mut state, &p).unwrap();
        assert!(state
            .amplitudes()
            .iter()
            .zip(&before)
            .all(|(a, b)| (a - b).norm() < 1e-10));
        state.apply_gate(&Gate::X(p.statistic_qubits()[0])).unwrap();
        assert!(matches!(
            apply_oracle(&mut state, &p),
            Err(CircuitError::RegisterNotClean { .. })
        ));
    }

    #[test]
    fn decompositions_match_primitives() {
        // Exhaustive over basis states of a 3-qubit index, 3-qubit accumulator
        // and one label qubit.
        let index = [0u32, 1, 2];
        let target = [3u32, 4, 5];
        let table = Arc::new(vec![0, 1, 2, 3, 5, 7, 6, 4]);
        let prims = [
            Gate::AddLookup {
                index: index.to_vec(),
                target: target.to_vec(),
                table: table.clone(),
                subtract: false,
            },
            Gate::AddLookup {
                index: index.to_vec(),
                target: target.to_vec(),
                table,
                subtract: true,
            },
            Gate::FlipIfLe {
                register: target.to_vec(),
                bound: 5,
                target: 6,
            },
            Gate::FlipIfLe {
                register: target.to_vec(),
                bound: 0,
                target: 6,
            },
            Gate::FlipIfLe {
                register: target.to_vec(),
                bound: 7,
                target: 6,
            },
        ];
        for g in &prims {
            let a = dense_matrix(std::slice::from_ref(g), 7).unwrap();
            let b = dense_matrix(&decompose_arithmetic(std::slice::from_ref(g)), 7).unwrap();
            assert_eq!(a, b, "{g:?}");
        }
    }

    #[test]
    fn decomposed_oracle_matches_on_paper_instance() {
        let p = paper_plan(0);
        let mut a = prepare_bootstrap_state(&p).unwrap();
        let mut b = a.clone();
        a.apply_gates(p.oracle_gates()).unwrap();
        b.apply_gates(&decompose_arithmetic(p.oracle_gates()))
            .unwrap();
        assert!(a
            .amplitudes()
            .iter()
            .zip(b.amplitudes())
            .all(|(x, y)| (x - y).norm() < 1e-14));
    }

    #[test]
    fn grover_rotation_small_k() {
        let p = paper_plan(0);
        let tau = 0.4140625f64.sqrt().asin();
        let mut state = prepare_and_label(&p).unwrap();
        for k in 0..4 {
            let amp = accept_probability(&state, &p).unwrap().sqrt();
            assert!(
                (amp - ((2 * k + 1) as f64 * tau).sin().abs()).abs() < 1e-9,
                "k={k}"
            );
            grover_iterate(&mut state, &p).unwrap();
        }
    }

    #[test]
    fn qae_matches_pmf_small() {
        let p = paper_plan(3);
        let marginal = run_qae_exact(&p).unwrap();
        let pmf = crate::qae::QaePmf::new(0.4140625, 3).unwrap();
        for (a, b) in marginal.iter().zip(pmf.probs()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn degenerate_and_zero_instances() {
        // h = 0: z below every resample mean.
        let s = Sample::new(vec![0.0, 1.0]).unwrap();
        let p = build_plan(&s, &StatisticSpec::mean(), -0.5, 3, 2).unwrap();
        let m = run_qae_exact(&p).unwrap();
        assert!((m[0] - 1.0).abs() < 1e-12);
        // One draw from {0, 1}: h = 1/2 = sin²(π/4), on the grid for T = 2.
        let p = build_plan(&s, &StatisticSpec::mean(), 0.0, 2, 1).unwrap();
        let m = run_qae_exact(&p).unwrap();
        assert!((m[1] - 0.5).abs() < 1e-12 && (m[3] - 0.5).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let est = sample_estimates(&m, 2, &mut rng, 20).unwrap();
        assert!(est.iter().all(|e| (e - 0.5).abs() < 1e-15));
    }

    #[test]
    fn work_counts_examples() {
        let w = work_counts(3, 4, 16, 10.0, 10.0);
        assert_eq!(
            (w.grover_iterations, w.oracle_calls, w.oracle_adjoint_calls),
            (7, 8, 7)
        );
        let w = work_counts(0, 4, 13, 1.0, 1.0);
        assert_eq!((w.grover_iterations, w.oracle_calls), (0, 1));
        assert_eq!(work_counts(4, 16, 0, 1.0, 1.0).balanced_t_smooth, 4);
        assert!(work_counts(4, 16, 0, 1.0, 1.0).is_balanced_smooth);
        assert_eq!(work_counts(4, 16, 0, 1.0, 1.0).balanced_t_nonsmooth, 2);
        let w = work_report(&paper_plan(10), 8.0, 8.0);
        assert_eq!(w.qubits, 23);
        assert_eq!(w.grover_iterations, 1023);
        assert_eq!(w.qboot_work, 1024.0 * 8.0);
    }
}
