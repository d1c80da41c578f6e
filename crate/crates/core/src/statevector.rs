//! Dense statevector simulator.
//!
//! Amplitudes are stored little-endian: bit `q` of a basis index is the value
//! of qubit `q`. Every kernel walks the array in blocks that contain whole
//! gate orbits, so blocks are independent and may run in parallel; the result
//! is identical to sequential application.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;
use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::numeric::fmt_f64;

pub const DEFAULT_QUBIT_CAP: u32 = 26;
/// Largest register an explicit unitary may act on.
pub const MAX_UNITARY_QUBITS: usize = 12;
/// Largest state whose amplitudes may be dumped as CSV.
pub const MAX_DUMP_QUBITS: u32 = 16;
pub const UNITARITY_TOL: f64 = 1e-10;
pub const NORM_TOL: f64 = 1e-10;

/// Blocks handed to worker threads are at least this many amplitudes.
const MIN_BLOCK: usize = 1 << 12;
/// Below this many amplitudes kernels run on the calling thread.
const PAR_THRESHOLD: usize = 1 << 15;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("{qubits} qubits exceed the cap of {cap}")]
    CapExceeded { qubits: u32, cap: u32 },
    #[error("qubit {qubit} is out of range for a {total}-qubit state")]
    IndexError { qubit: u32, total: u32 },
    #[error("qubit {0} appears more than once in one operation")]
    DuplicateQubit(u32),
    #[error("matrix deviates from unitarity by {deviation:e}")]
    NonUnitary { deviation: f64 },
    #[error("invalid gate: {0}")]
    InvalidGate(String),
    #[error("squared norm drifted to {norm_sqr} after `{operation}`")]
    NormDrift { norm_sqr: f64, operation: String },
    #[error("no register named `{0}`")]
    UnknownRegister(String),
    #[error("register `{0}` is already defined")]
    DuplicateRegister(String),
    #[error("amplitude dumps are limited to {MAX_DUMP_QUBITS} qubits")]
    DumpTooLarge,
    #[error("expected {expected} amplitudes, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, EngineError>;

/// A named, contiguous run of qubits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Register {
    pub name: String,
    pub start: u32,
    pub width: u32,
}

impl Register {
    pub fn qubits(&self) -> Vec<u32> {
        (self.start..self.start + self.width).collect()
    }
}

/// Ordered, disjoint registers covering qubits `0..total`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct QubitLayout {
    registers: Vec<Register>,
    total: u32,
}

impl QubitLayout {
    pub fn new() -> Self {
        Self::default()
    }

    /// A layout with a single register spanning `total` qubits.
    pub fn flat(total: u32) -> Self {
        let mut layout = Self::new();
        layout.push("q", total).expect("fresh layout");
        layout
    }

    /// Appends a register of `width` qubits above the existing ones.
    pub fn push(&mut self, name: impl Into<String>, width: u32) -> Result<&Register> {
        let name = name.into();
        if self.registers.iter().any(|r| r.name == name) {
            return Err(EngineError::DuplicateRegister(name));
        }
        self.registers.push(Register {
            name,
            start: self.total,
            width,
        });
        self.total += width;
        Ok(self.registers.last().expect("just pushed"))
    }

    pub fn register(&self, name: &str) -> Result<&Register> {
        self.registers
            .iter()
            .find(|r| r.name == name)
            .ok_or_else(|| EngineError::UnknownRegister(name.to_string()))
    }

    pub fn registers(&self) -> &[Register] {
        &self.registers
    }

    pub fn total(&self) -> u32 {
        self.total
    }
}

/// A control condition on one qubit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Control {
    pub qubit: u32,
    /// The qubit value that enables the operation.
    pub state: bool,
}

impl Control {
    pub fn on(qubit: u32) -> Self {
        Self { qubit, state: true }
    }

    pub fn off(qubit: u32) -> Self {
        Self {
            qubit,
            state: false,
        }
    }
}

/// Square matrix on `k` qubits, validated unitary at construction.
///
/// Row-major; bit `j` of a row/column index is the value of the `j`-th qubit
/// in the gate's qubit list.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl UnitaryMatrix {
    pub fn new(qubits: usize, data: Vec<Complex64>) -> Result<Self> {
        if qubits == 0 || qubits > MAX_UNITARY_QUBITS {
            return Err(EngineError::InvalidGate(format!(
                "explicit unitaries act on 1..={MAX_UNITARY_QUBITS} qubits, got {qubits}"
            )));
        }
        let dim = 1usize << qubits;
        if data.len() != dim * dim {
            return Err(EngineError::LengthMismatch {
                expected: dim * dim,
                got: data.len(),
            });
        }
        let m = Self { dim, data };
        let deviation = m.unitarity_deviation();
        if deviation > UNITARITY_TOL || deviation.is_nan() {
            return Err(EngineError::NonUnitary { deviation });
        }
        Ok(m)
    }

    /// Real orthogonal matrix convenience constructor.
    pub fn from_real(qubits: usize, data: &[f64]) -> Result<Self> {
        Self::new(
            qubits,
            data.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
        )
    }

    /// `max |(U†U − I)_{ij}|`.
    fn unitarity_deviation(&self) -> f64 {
        let d = self.dim;
        (0..d)
            .into_par_iter()
            .map(|i| {
                let mut worst = 0.0f64;
                for j in 0..d {
                    let mut s = Complex64::new(0.0, 0.0);
                    for k in 0..d {
                        s += self.data[k * d + i].conj() * self.data[k * d + j];
                    }
                    if i == j {
                        s -= 1.0;
                    }
                    worst = worst.max(s.norm());
                }
                worst
            })
            .reduce(|| 0.0, f64::max)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.dim + col]
    }

    pub fn adjoint(&self) -> Self {
        let d = self.dim;
        let mut data = vec![Complex64::new(0.0, 0.0); d * d];
        for r in 0..d {
            for c in 0..d {
                data[c * d + r] = self.data[r * d + c].conj();
            }
        }
        Self { dim: d, data }
    }
}

/// The gate set.
///
/// Besides the standard gates the set contains two reversible arithmetic
/// primitives, [`Gate::AddLookup`] and [`Gate::FlipIfLe`]. Both are basis-state
/// permutations; [`crate::circuit`] provides and tests their decompositions
/// into multi-controlled X gates.
#[derive(Clone, PartialEq)]
pub enum Gate {
    H(u32),
    X(u32),
    Z(u32),
    /// `diag(1, e^{iθ})`.
    Phase(u32, f64),
    Cx {
        control: u32,
        target: u32,
    },
    Cz(u32, u32),
    CPhase {
        control: u32,
        target: u32,
        theta: f64,
    },
    Mcx {
        controls: Vec<Control>,
        target: u32,
    },
    /// Phase −1 on basis states satisfying every control.
    Mcz(Vec<Control>),
    Swap(u32, u32),
    Unitary {
        qubits: Vec<u32>,
        matrix: Arc<UnitaryMatrix>,
    },
    GlobalPhase(f64),
    /// `|i⟩|s⟩ ↦ |i⟩|s ± table[i] mod 2^w⟩` with `i` read from `index` and the
    /// `w`-bit accumulator `s` on `target`.
    AddLookup {
        index: Vec<u32>,
        target: Vec<u32>,
        table: Arc<Vec<u64>>,
        subtract: bool,
    },
    /// Flips `target` when the unsigned value of `register` is `≤ bound`.
    FlipIfLe {
        register: Vec<u32>,
        bound: u64,
        target: u32,
    },
}

impl fmt::Debug for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Gate::H(q) => write!(f, "H({q})"),
            Gate::X(q) => write!(f, "X({q})"),
            Gate::Z(q) => write!(f, "Z({q})"),
            Gate::Phase(q, t) => write!(f, "Phase({q}, {t})"),
            Gate::Cx { control, target } => write!(f, "Cx({control} -> {target})"),
            Gate::Cz(a, b) => write!(f, "Cz({a}, {b})"),
            Gate::CPhase {
                control,
                target,
                theta,
            } => write!(f, "CPhase({control} -> {target}, {theta})"),
            Gate::Mcx { controls, target } => write!(f, "Mcx({controls:?} -> {target})"),
            Gate::Mcz(controls) => write!(f, "Mcz({controls:?})"),
            Gate::Swap(a, b) => write!(f, "Swap({a}, {b})"),
            Gate::Unitary { qubits, .. } => write!(f, "Unitary({qubits:?})"),
            Gate::GlobalPhase(t) => write!(f, "GlobalPhase({t})"),
            Gate::AddLookup {
                index,
                target,
                subtract,
                ..
            } => {
                write!(f, "AddLookup({index:?} -> {target:?}, subtract={subtract})")
            }
            Gate::FlipIfLe {
                register,
                bound,
                target,
            } => write!(f, "FlipIfLe({register:?} <= {bound} -> {target})"),
        }
    }
}

impl Gate {
    /// Builds an explicit-unitary gate, validating the matrix.
    pub fn unitary(qubits: Vec<u32>, matrix: Vec<Complex64>) -> Result<Self> {
        let matrix = UnitaryMatrix::new(qubits.len(), matrix)?;
        Ok(Gate::Unitary {
            qubits,
            matrix: Arc::new(matrix),
        })
    }

    /// Every qubit the gate reads or writes.
    pub fn qubits(&self) -> Vec<u32> {
        match self {
            Gate::H(q) | Gate::X(q) | Gate::Z(q) | Gate::Phase(q, _) => vec![*q],
            Gate::Cx { control, target }
            | Gate::CPhase {
                control, target, ..
            } => vec![*control, *target],
            Gate::Cz(a, b) | Gate::Swap(a, b) => vec![*a, *b],
            Gate::Mcx { controls, target } => controls
                .iter()
                .map(|c| c.qubit)
                .chain(std::iter::once(*target))
                .collect(),
            Gate::Mcz(controls) => controls.iter().map(|c| c.qubit).collect(),
            Gate::Unitary { qubits, .. } => qubits.clone(),
            Gate::GlobalPhase(_) => Vec::new(),
            Gate::AddLookup { index, target, .. } => index.iter().chain(target).copied().collect(),
            Gate::FlipIfLe {
                register, target, ..
            } => register
                .iter()
                .copied()
                .chain(std::iter::once(*target))
                .collect(),
        }
    }

    pub fn adjoint(&self) -> Gate {
        match self {
            Gate::Phase(q, t) => Gate::Phase(*q, -t),
            Gate::CPhase {
                control,
                target,
                theta,
            } => Gate::CPhase {
                control: *control,
                target: *target,
                theta: -theta,
            },
            Gate::Unitary { qubits, matrix } => Gate::Unitary {
                qubits: qubits.clone(),
                matrix: Arc::new(matrix.adjoint()),
            },
            Gate::GlobalPhase(t) => Gate::GlobalPhase(-t),
            Gate::AddLookup {
                index,
                target,
                table,
                subtract,
            } => Gate::AddLookup {
                index: index.clone(),
                target: target.clone(),
                table: table.clone(),
                subtract: !subtract,
            },
            other => other.clone(),
        }
    }

    fn validate(&self, total: u32) -> Result<()> {
        let qubits = self.qubits();
        check_qubits(&qubits, total)?;
        match self {
            Gate::Unitary { qubits, matrix } if matrix.dim() != 1usize << qubits.len() => Err(
                EngineError::InvalidGate("matrix size does not match qubit count".into()),
            ),
            Gate::AddLookup {
                index,
                target,
                table,
                ..
            } => {
                if target.is_empty() || target.len() > 63 || index.len() > 30 {
                    return Err(EngineError::InvalidGate(
                        "unsupported AddLookup register widths".into(),
                    ));
                }
                if table.len() != 1usize << index.len() {
                    return Err(EngineError::InvalidGate(format!(
                        "lookup table has {} entries for a {}-qubit index",
                        table.len(),
                        index.len()
                    )));
                }
                Ok(())
            }
            Gate::FlipIfLe { register, .. } if register.len() > 63 => Err(
                EngineError::InvalidGate("comparator register wider than 63 qubits".into()),
            ),
            _ => Ok(()),
        }
    }
}

/// Returns the adjoint of a gate sequence (reversed, each gate adjointed).
pub fn adjoint_sequence(gates: &[Gate]) -> Vec<Gate> {
    gates.iter().rev().map(Gate::adjoint).collect()
}

fn check_qubits(qubits: &[u32], total: u32) -> Result<()> {
    let mut seen = 0u64;
    for &q in qubits {
        if q >= total {
            return Err(EngineError::IndexError { qubit: q, total });
        }
        if seen & (1 << q) != 0 {
            return Err(EngineError::DuplicateQubit(q));
        }
        seen |= 1 << q;
    }
    Ok(())
}

/// Extra condition `index & mask == value` under which a kernel acts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct ControlMask {
    mask: usize,
    value: usize,
}

impl ControlMask {
    fn with(self, c: Control) -> Self {
        let bit = 1usize << c.qubit;
        Self {
            mask: self.mask | bit,
            value: self.value | if c.state { bit } else { 0 },
        }
    }

    fn with_all(self, controls: &[Control]) -> Self {
        controls.iter().fold(self, |m, &c| m.with(c))
    }

    #[inline]
    fn matches(&self, i: usize) -> bool {
        i & self.mask == self.value
    }
}

/// Value of the given qubits in basis index `i` (first qubit = bit 0).
#[inline]
pub fn gather_bits(i: usize, qubits: &[u32]) -> usize {
    qubits
        .iter()
        .enumerate()
        .fold(0, |acc, (j, &q)| acc | (((i >> q) & 1) << j))
}

/// Inverse of [`gather_bits`]: places bit `j` of `v` at qubit `qubits[j]`.
#[inline]
pub fn deposit_bits(v: usize, qubits: &[u32]) -> usize {
    qubits
        .iter()
        .enumerate()
        .fold(0, |acc, (j, &q)| acc | (((v >> j) & 1) << q))
}

fn mask_of(qubits: &[u32]) -> usize {
    qubits.iter().fold(0, |m, &q| m | (1usize << q))
}

/// Runs `f(offset, block)` over consecutive blocks of `block` amplitudes.
fn for_each_block<F>(amps: &mut [Complex64], block: usize, f: F)
where
    F: Fn(usize, &mut [Complex64]) + Sync + Send,
{
    let block = block.min(amps.len());
    if amps.len() >= PAR_THRESHOLD && amps.len() > block {
        amps.par_chunks_mut(block)
            .enumerate()
            .for_each(|(k, b)| f(k * block, b));
    } else {
        amps.chunks_mut(block)
            .enumerate()
            .for_each(|(k, b)| f(k * block, b));
    }
}

/// Visits every amplitude pair differing only in bit `t`, passing the index
/// of the member with bit `t` clear.
fn for_each_pair<F>(amps: &mut [Complex64], t: u32, f: F)
where
    F: Fn(usize, &mut Complex64, &mut Complex64) + Sync + Send,
{
    let half = 1usize << t;
    let orbit = half << 1;
    for_each_block(amps, orbit.max(MIN_BLOCK), |off, b| {
        for (s, sub) in b.chunks_mut(orbit).enumerate() {
            let base = off + s * orbit;
            let (lo, hi) = sub.split_at_mut(half);
            for (j, (a0, a1)) in lo.iter_mut().zip(hi.iter_mut()).enumerate() {
                f(base + j, a0, a1);
            }
        }
    });
}

fn apply_diagonal(amps: &mut [Complex64], cond: ControlMask, factor: Complex64) {
    for_each_block(amps, MIN_BLOCK, |off, b| {
        for (j, a) in b.iter_mut().enumerate() {
            if cond.matches(off + j) {
                *a *= factor;
            }
        }
    });
}

fn apply_cond_x(amps: &mut [Complex64], target: u32, cond: ControlMask) {
    for_each_pair(amps, target, |i, a0, a1| {
        if cond.matches(i) {
            std::mem::swap(a0, a1);
        }
    });
}

fn apply_single(amps: &mut [Complex64], target: u32, m: [[Complex64; 2]; 2], cond: ControlMask) {
    for_each_pair(amps, target, |i, a0, a1| {
        if cond.matches(i) {
            let (x, y) = (*a0, *a1);
            *a0 = m[0][0] * x + m[0][1] * y;
            *a1 = m[1][0] * x + m[1][1] * y;
        }
    });
}

fn apply_hadamard(amps: &mut [Complex64], target: u32, cond: ControlMask) {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for_each_pair(amps, target, |i, a0, a1| {
        if cond.matches(i) {
            let (x, y) = (*a0, *a1);
            *a0 = (x + y) * s;
            *a1 = (x - y) * s;
        }
    });
}

fn apply_swap(amps: &mut [Complex64], a: u32, b: u32, cond: ControlMask) {
    let (low, high) = (a.min(b), a.max(b));
    let lbit = 1usize << low;
    // Exchanges |high=0, low=1⟩ with |high=1, low=0⟩ inside each orbit.
    let half = 1usize << high;
    let orbit = half << 1;
    for_each_block(amps, orbit.max(MIN_BLOCK), |off, blk| {
        for (s, sub) in blk.chunks_mut(orbit).enumerate() {
            let base = off + s * orbit;
            let (lo, hi) = sub.split_at_mut(half);
            for j in 0..half {
                if j & lbit != 0 && cond.matches(base + j) {
                    std::mem::swap(&mut lo[j], &mut hi[j ^ lbit]);
                }
            }
        }
    });
}

fn apply_unitary(amps: &mut [Complex64], qubits: &[u32], m: &UnitaryMatrix, cond: ControlMask) {
    let d = m.dim();
    let tmask = mask_of(qubits);
    let offsets: Vec<usize> = (0..d).map(|v| deposit_bits(v, qubits)).collect();
    let top = *qubits.iter().max().expect("nonempty");
    for_each_block(amps, (2usize << top).max(MIN_BLOCK), |off, blk| {
        let mut input = vec![Complex64::new(0.0, 0.0); d];
        for j in 0..blk.len() {
            if j & tmask != 0 || !cond.matches(off + j) {
                continue;
            }
            for (v, slot) in input.iter_mut().enumerate() {
                *slot = blk[j + offsets[v]];
            }
            for (r, &o) in offsets.iter().enumerate() {
                let row = &m.data[r * d..(r + 1) * d];
                blk[j + o] = row.iter().zip(&input).map(|(a, b)| a * b).sum();
            }
        }
    });
}

fn apply_add_lookup(
    amps: &mut [Complex64],
    index: &[u32],
    target: &[u32],
    table: &[u64],
    subtract: bool,
    cond: ControlMask,
) {
    let w = target.len() as u32;
    let modulus = 1u64 << w;
    let wmask = (modulus - 1) as usize;
    let tmask = mask_of(target);
    let offsets: Vec<usize> = (0..modulus as usize)
        .map(|v| deposit_bits(v, target))
        .collect();
    let top = *target.iter().max().expect("nonempty");
    for_each_block(amps, (2usize << top).max(MIN_BLOCK), |off, blk| {
        let mut scratch = vec![Complex64::new(0.0, 0.0); offsets.len()];
        for j in 0..blk.len() {
            if j & tmask != 0 || !cond.matches(off + j) {
                continue;
            }
            let c = table[gather_bits(off + j, index)] % modulus;
            let shift = if subtract { (modulus - c) % modulus } else { c } as usize;
            if shift == 0 {
                continue;
            }
            for (v, slot) in scratch.iter_mut().enumerate() {
                *slot = blk[j + offsets[v]];
            }
            for (v, &a) in scratch.iter().enumerate() {
                blk[j + offsets[(v + shift) & wmask]] = a;
            }
        }
    });
}

fn apply_flip_if_le(
    amps: &mut [Complex64],
    register: &[u32],
    bound: u64,
    target: u32,
    cond: ControlMask,
) {
    for_each_pair(amps, target, |i, a0, a1| {
        if cond.matches(i) && gather_bits(i, register) as u64 <= bound {
            std::mem::swap(a0, a1);
        }
    });
}

/// Applies a validated gate to `amps` wherever `cond` holds.
fn apply_raw(amps: &mut [Complex64], gate: &Gate, cond: ControlMask) {
    let one = Complex64::new(1.0, 0.0);
    let bit = |q: u32| ControlMask {
        mask: 1 << q,
        value: 1 << q,
    };
    let and = |a: ControlMask, b: ControlMask| ControlMask {
        mask: a.mask | b.mask,
        value: a.value | b.value,
    };
    match gate {
        Gate::H(q) => apply_hadamard(amps, *q, cond),
        Gate::X(q) => apply_cond_x(amps, *q, cond),
        Gate::Z(q) => apply_diagonal(amps, and(cond, bit(*q)), -one),
        Gate::Phase(q, t) => {
            apply_diagonal(amps, and(cond, bit(*q)), Complex64::from_polar(1.0, *t))
        }
        Gate::Cx { control, target } => {
            apply_cond_x(amps, *target, cond.with(Control::on(*control)))
        }
        Gate::Cz(a, b) => apply_diagonal(amps, and(and(cond, bit(*a)), bit(*b)), -one),
        Gate::CPhase {
            control,
            target,
            theta,
        } => apply_diagonal(
            amps,
            and(and(cond, bit(*control)), bit(*target)),
            Complex64::from_polar(1.0, *theta),
        ),
        Gate::Mcx { controls, target } => apply_cond_x(amps, *target, cond.with_all(controls)),
        Gate::Mcz(controls) => apply_diagonal(amps, cond.with_all(controls), -one),
        Gate::Swap(a, b) => apply_swap(amps, *a, *b, cond),
        Gate::Unitary { qubits, matrix } if qubits.len() == 1 => {
            let m = [
                [matrix.get(0, 0), matrix.get(0, 1)],
                [matrix.get(1, 0), matrix.get(1, 1)],
            ];
            apply_single(amps, qubits[0], m, cond)
        }
        Gate::Unitary { qubits, matrix } => apply_unitary(amps, qubits, matrix, cond),
        Gate::GlobalPhase(t) => apply_diagonal(amps, cond, Complex64::from_polar(1.0, *t)),
        Gate::AddLookup {
            index,
            target,
            table,
            subtract,
        } => apply_add_lookup(amps, index, target, table, *subtract, cond),
        Gate::FlipIfLe {
            register,
            bound,
            target,
        } => apply_flip_if_le(amps, register, *bound, *target, cond),
    }
}

/// Dense amplitudes over a [`QubitLayout`].
#[derive(Clone)]
pub struct StateVector {
    amps: Vec<Complex64>,
    layout: QubitLayout,
    check_norm: bool,
}

impl fmt::Debug for StateVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StateVector")
            .field("qubits", &self.layout.total())
            .field("layout", &self.layout)
            .finish_non_exhaustive()
    }
}

fn zeroed_amplitudes(len: usize) -> Vec<Complex64> {
    // A zeroed allocation lets the OS hand out untouched pages lazily, so a
    // 2^26 state costs nothing until it is written.
    let layout = std::alloc::Layout::array::<Complex64>(len).expect("state size fits in memory");
    // SAFETY: `Complex64` is `repr(C)` over two `f64`s, for which the all-zero
    // bit pattern is `0.0`; the pointer comes from the global allocator with
    // the exact layout `Vec` will use to free it, and all `len` elements are
    // initialized.
    unsafe {
        let ptr = std::alloc::alloc_zeroed(layout) as *mut Complex64;
        if ptr.is_null() {
            std::alloc::handle_alloc_error(layout);
        }
        Vec::from_raw_parts(ptr, len, len)
    }
}

impl StateVector {
    /// `|0…0⟩` on `layout`, under the default qubit cap.
    pub fn allocate(layout: QubitLayout) -> Result<Self> {
        Self::allocate_with_cap(layout, DEFAULT_QUBIT_CAP)
    }

    pub fn allocate_with_cap(layout: QubitLayout, cap: u32) -> Result<Self> {
        let qubits = layout.total();
        if qubits > cap || qubits >= usize::BITS - 5 {
            return Err(EngineError::CapExceeded { qubits, cap });
        }
        let mut amps = zeroed_amplitudes(1usize << qubits);
        amps[0] = Complex64::new(1.0, 0.0);
        Ok(Self {
            amps,
            layout,
            check_norm: cfg!(debug_assertions),
        })
    }

    /// Wraps explicit amplitudes (not renormalized).
    pub fn from_amplitudes(layout: QubitLayout, amps: Vec<Complex64>) -> Result<Self> {
        let expected = 1usize << layout.total();
        if amps.len() != expected {
            return Err(EngineError::LengthMismatch {
                expected,
                got: amps.len(),
            });
        }
        Ok(Self {
            amps,
            layout,
            check_norm: false,
        })
    }

    /// Enables or disables the per-operation norm check.
    pub fn set_norm_check(&mut self, on: bool) {
        self.check_norm = on;
    }

    pub fn layout(&self) -> &QubitLayout {
        &self.layout
    }

    pub fn num_qubits(&self) -> u32 {
        self.layout.total()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amps
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps
            .par_iter()
            .with_min_len(PAR_THRESHOLD)
            .map(|a| a.norm_sqr())
            .sum()
    }

    fn after(&self, operation: impl FnOnce() -> String) -> Result<()> {
        if self.check_norm {
            let norm_sqr = self.norm_sqr();
            if (norm_sqr - 1.0).abs() > NORM_TOL {
                return Err(EngineError::NormDrift {
                    norm_sqr,
                    operation: operation(),
                });
            }
        }
        Ok(())
    }

    pub fn apply_gate(&mut self, gate: &Gate) -> Result<()> {
        gate.validate(self.num_qubits())?;
        apply_raw(&mut self.amps, gate, ControlMask::default());
        self.after(|| format!("{gate:?}"))
    }

    pub fn apply_gates(&mut self, gates: &[Gate]) -> Result<()> {
        for g in gates {
            g.validate(self.num_qubits())?;
        }
        for g in gates {
            apply_raw(&mut self.amps, g, ControlMask::default());
        }
        self.after(|| format!("{} gates", gates.len()))
    }

    /// Applies `gates` only on the branch where `control` is 1.
    ///
    /// When every gate acts below the control qubit, the sequence runs on the
    /// contiguous half-blocks where the control bit is set, as if on a smaller
    /// state; otherwise each gate carries the control as an extra condition.
    pub fn apply_controlled(&mut self, control: u32, gates: &[Gate]) -> Result<()> {
        let total = self.num_qubits();
        check_qubits(&[control], total)?;
        let mut top = None::<u32>;
        for g in gates {
            g.validate(total)?;
            let qs = g.qubits();
            if qs.contains(&control) {
                return Err(EngineError::DuplicateQubit(control));
            }
            top = qs.into_iter().chain(top).max();
        }
        if top.is_none_or(|t| t < control) {
            let half = 1usize << control;
            for chunk in self.amps.chunks_exact_mut(half << 1) {
                let slice = &mut chunk[half..];
                // Every index in the slice has the control set, so gates
                // (including global phases) apply unconditionally there.
                for g in gates {
                    apply_raw(slice, g, ControlMask::default());
                }
            }
        } else {
            let cond = ControlMask::default().with(Control::on(control));
            for g in gates {
                apply_raw(&mut self.amps, g, cond);
            }
        }
        self.after(|| format!("controlled({control}) of {} gates", gates.len()))
    }

    pub fn qft(&mut self, qubits: &[u32]) -> Result<()> {
        check_qubits(qubits, self.num_qubits())?;
        self.apply_gates(&qft_gates(qubits))
    }

    pub fn inverse_qft(&mut self, qubits: &[u32]) -> Result<()> {
        check_qubits(qubits, self.num_qubits())?;
        self.apply_gates(&inverse_qft_gates(qubits))
    }

    /// Born-rule marginal over `qubits`; entry `k` collects basis states whose
    /// designated qubits read `k` (first listed qubit = least significant).
    pub fn marginal_probabilities(&self, qubits: &[u32]) -> Result<Vec<f64>> {
        check_qubits(qubits, self.num_qubits())?;
        let size = 1usize << qubits.len();
        let chunk = MIN_BLOCK.min(self.amps.len());
        let fold = |off: usize, block: &[Complex64]| {
            let mut acc = vec![0.0; size];
            for (j, a) in block.iter().enumerate() {
                acc[gather_bits(off + j, qubits)] += a.norm_sqr();
            }
            acc
        };
        let add = |mut a: Vec<f64>, b: Vec<f64>| {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
            a
        };
        Ok(self
            .amps
            .par_chunks(chunk)
            .enumerate()
            .map(|(k, b)| fold(k * chunk, b))
            .reduce(|| vec![0.0; size], add))
    }

    /// Marginal over a named register.
    pub fn register_marginal(&self, name: &str) -> Result<Vec<f64>> {
        let qubits = self.layout.register(name)?.qubits();
        self.marginal_probabilities(&qubits)
    }

    /// Writes `index,re,im` rows for states of at most 16 qubits.
    pub fn write_amplitudes_csv<W: Write>(&self, mut w: W) -> Result<()> {
        if self.num_qubits() > MAX_DUMP_QUBITS {
            return Err(EngineError::DumpTooLarge);
        }
        let io = |e: std::io::Error| EngineError::Io(e.to_string());
        writeln!(w, "index,re,im").map_err(io)?;
        for (i, a) in self.amps.iter().enumerate() {
            writeln!(w, "{i},{},{}", fmt_f64(a.re), fmt_f64(a.im)).map_err(io)?;
        }
        Ok(())
    }
}

/// QFT with the terminal bit reversal: `|j⟩ ↦ 2^{-r/2} Σ_k e^{2πi jk/2^r} |k⟩`,
/// reading `j` and `k` with `qubits[0]` as the least significant bit.
pub fn qft_gates(qubits: &[u32]) -> Vec<Gate> {
    let r = qubits.len();
    let mut gates = Vec::new();
    for i in (0..r).rev() {
        gates.push(Gate::H(qubits[i]));
        for j in (0..i).rev() {
            let theta = std::f64::consts::PI / (1u64 << (i - j)) as f64;
            gates.push(Gate::CPhase {
                control: qubits[j],
                target: qubits[i],
                theta,
            });
        }
    }
    for i in 0..r / 2 {
        gates.push(Gate::Swap(qubits[i], qubits[r - 1 - i]));
    }
    gates
}

pub fn inverse_qft_gates(qubits: &[u32]) -> Vec<Gate> {
    adjoint_sequence(&qft_gates(qubits))
}

/// Multinomial outcome counts from `shots` independent draws.
pub fn sample_outcome<R: Rng + ?Sized>(probabilities: &[f64], rng: &mut R, shots: u64) -> Vec<u64> {
    let mut counts = vec![0u64; probabilities.len()];
    if shots == 0 {
        return counts;
    }
    let dist =
        WeightedIndex::new(probabilities).expect("probabilities must have positive total mass");
    for _ in 0..shots {
        counts[dist.sample(rng)] += 1;
    }
    counts
}
