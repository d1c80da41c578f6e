//! Outcome statistics of canonical amplitude estimation.
//!
//! With `N = 2^T` precision outcomes and `τ = asin √h`, the measured integer
//! `Y` has
//!
//! ```text
//! Pr(Y = l) = sin²(Nτ) / (2N²) · [csc²(τ − lπ/N) + csc²(τ + lπ/N)]
//! ```
//!
//! and the estimate is `sin²(πY/N)`. Each bracketed term equals half the
//! Fejér kernel `(sin(Nx) / (N sin x))²` at `x = τ ∓ lπ/N`, which is how it is
//! evaluated here: the kernel is π-periodic and has the finite limit 1 at
//! multiples of π, so no shared prefactor has to be cancelled against a huge
//! cosecant.

use std::io::Write;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::numeric::{compensated_sum, fmt_f64};

/// Largest precision for which the full PMF is materialized.
pub const DEFAULT_MAX_PRECISION: u32 = 24;
/// Largest repeat count accepted by [`median_failure_exact`].
pub const DEFAULT_MAX_REPEATS: usize = 99;
/// Arguments within this distance (radians) of a multiple of π are evaluated
/// through their analytic limit.
pub const SINGULAR_TOL: f64 = 1e-12;

/// Relative slack on the `π/N` success window, so estimates that sit on the
/// window edge up to rounding are counted as inside.
const WINDOW_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QaeError {
    #[error("{name} = {value} is outside its domain {domain}")]
    Domain {
        name: &'static str,
        value: f64,
        domain: &'static str,
    },
    #[error("precision T = {t} exceeds the cap of {cap}")]
    CapExceeded { t: u32, cap: u32 },
    #[error("precision T must be at least 1")]
    ZeroPrecision,
    #[error("outcome {y} is out of range for T = {t}")]
    OutcomeOutOfRange { y: u64, t: u32 },
    #[error("median repeat count M = {0} must be odd and positive")]
    EvenRepeats(usize),
    #[error("median repeat count M = {m} exceeds the cap of {cap}")]
    MTooLarge { m: usize, cap: usize },
}

pub type Result<T> = std::result::Result<T, QaeError>;

/// `ρ = 32(π² − 8)/π⁴ ≈ 0.614`, the per-pair failure constant of the median
/// bound.
pub fn rho() -> f64 {
    let pi2 = std::f64::consts::PI * std::f64::consts::PI;
    32.0 * (pi2 - 8.0) / (pi2 * pi2)
}

/// `8/π²`, the uniform lower bound on single-run success.
pub fn single_run_floor() -> f64 {
    8.0 / (std::f64::consts::PI * std::f64::consts::PI)
}

fn check_h(h: f64) -> Result<()> {
    if (0.0..=1.0).contains(&h) {
        Ok(())
    } else {
        Err(QaeError::Domain {
            name: "h",
            value: h,
            domain: "[0, 1]",
        })
    }
}

fn check_t(t: u32) -> Result<()> {
    if t == 0 {
        return Err(QaeError::ZeroPrecision);
    }
    if t > 62 {
        return Err(QaeError::CapExceeded { t, cap: 62 });
    }
    Ok(())
}

/// `asin √h ∈ [0, π/2]`.
pub fn tau_from_h(h: f64) -> Result<f64> {
    check_h(h)?;
    Ok(h.sqrt().asin())
}

/// `sin²(πy/N)`. Aliased outcomes `y` and `N − y` give bit-identical values.
pub fn estimate_from_outcome(y: u64, t: u32) -> Result<f64> {
    check_t(t)?;
    let n = 1u64 << t;
    if y >= n {
        return Err(QaeError::OutcomeOutOfRange { y, t });
    }
    Ok(estimate_unchecked(y, n))
}

#[inline]
fn estimate_unchecked(y: u64, n: u64) -> f64 {
    let y = y.min(n - y);
    (std::f64::consts::PI * y as f64 / n as f64).sin().powi(2)
}

/// Reduces `x` modulo π into `[−π/2, π/2]`.
#[inline]
fn reduce_pi(x: f64) -> f64 {
    x - std::f64::consts::PI * (x / std::f64::consts::PI).round()
}

/// Half the Fejér kernel, `(sin(Nx) / (N sin x))² / 2`, with the limit 1/2 at
/// multiples of π.
#[inline]
fn half_fejer(x: f64, n: f64) -> f64 {
    let x = reduce_pi(x);
    if x.abs() <= SINGULAR_TOL {
        return 0.5;
    }
    let r = (n * x).sin() / (n * x.sin());
    0.5 * r * r
}

/// The grid index `m` nearest to `Nτ/π` if `τ` lies within tolerance of
/// `mπ/N`.
fn degenerate_index(tau: f64, n: u64) -> Option<u64> {
    let m = (n as f64 * tau / std::f64::consts::PI).round();
    let d = tau - m * std::f64::consts::PI / n as f64;
    (d.abs() <= SINGULAR_TOL).then_some(m as u64)
}

/// `Pr(Y = l)` for a single outcome, without materializing the PMF.
pub fn pmf_value(h: f64, t: u32, l: u64) -> Result<f64> {
    check_t(t)?;
    let tau = tau_from_h(h)?;
    let n = 1u64 << t;
    if l >= n {
        return Err(QaeError::OutcomeOutOfRange { y: l, t });
    }
    Ok(pmf_value_unchecked(tau, n, l))
}

fn pmf_value_unchecked(tau: f64, n: u64, l: u64) -> f64 {
    if let Some(m) = degenerate_index(tau, n) {
        let (a, b) = (m % n, (n - m % n) % n);
        return 0.5 * ((l == a) as u8 as f64 + (l == b) as u8 as f64);
    }
    let nf = n as f64;
    let step = std::f64::consts::PI * l as f64 / nf;
    half_fejer(tau - step, nf) + half_fejer(tau + step, nf)
}

/// Exact outcome distribution of `T`-qubit amplitude estimation.
#[derive(Debug, Clone, PartialEq)]
pub struct QaePmf {
    t: u32,
    h: f64,
    tau: f64,
    probs: Vec<f64>,
}

impl QaePmf {
    pub fn new(h: f64, t: u32) -> Result<Self> {
        Self::with_cap(h, t, DEFAULT_MAX_PRECISION)
    }

    pub fn with_cap(h: f64, t: u32, cap: u32) -> Result<Self> {
        check_t(t)?;
        if t > cap {
            return Err(QaeError::CapExceeded { t, cap });
        }
        let tau = tau_from_h(h)?;
        let n = 1u64 << t;
        let half = n / 2;
        // Outcomes l and N − l share a probability; evaluate one half and
        // mirror so the symmetry holds exactly.
        let lower: Vec<f64> = (0..half as usize + 1)
            .into_par_iter()
            .with_min_len(1 << 12)
            .map(|l| pmf_value_unchecked(tau, n, l as u64))
            .collect();
        let mut probs = vec![0.0; n as usize];
        probs[..=half as usize].copy_from_slice(&lower);
        for l in half as usize + 1..n as usize {
            probs[l] = probs[n as usize - l];
        }
        Ok(Self { t, h, tau, probs })
    }

    pub fn t(&self) -> u32 {
        self.t
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// `sin²(πl/N)` for each outcome.
    pub fn estimates(&self) -> Vec<f64> {
        let n = self.probs.len() as u64;
        (0..n).map(|l| estimate_unchecked(l, n)).collect()
    }

    /// `E[φ(estimate)]` with compensated summation.
    pub fn expect(&self, phi: impl Fn(f64) -> f64) -> f64 {
        let n = self.probs.len() as u64;
        compensated_sum(
            self.probs
                .iter()
                .enumerate()
                .map(|(l, p)| p * phi(estimate_unchecked(l as u64, n))),
        )
    }

    pub fn total_mass(&self) -> f64 {
        compensated_sum(self.probs.iter().copied())
    }

    /// Writes `l,prob,estimate` rows with a header.
    pub fn write_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        write_outcome_csv(&self.probs, w)
    }

    pub fn sampler(&self) -> OutcomeSampler {
        OutcomeSampler::new(self)
    }
}

/// Writes `l,prob,estimate` rows for any distribution over `2^T` outcomes.
pub fn write_outcome_csv<W: Write>(probs: &[f64], mut w: W) -> std::io::Result<()> {
    let n = probs.len() as u64;
    writeln!(w, "l,prob,estimate")?;
    for (l, p) in probs.iter().enumerate() {
        writeln!(
            w,
            "{l},{},{}",
            fmt_f64(*p),
            fmt_f64(estimate_unchecked(l as u64, n))
        )?;
    }
    Ok(())
}

/// Reusable inverse-CDF sampler over a PMF's outcomes.
#[derive(Debug, Clone)]
pub struct OutcomeSampler {
    n: u64,
    index: WeightedIndex<f64>,
}

impl OutcomeSampler {
    pub fn new(pmf: &QaePmf) -> Self {
        Self::from_probs(&pmf.probs).expect("a valid PMF has positive total mass")
    }

    /// Sampler over an arbitrary outcome distribution of length `2^T`, such
    /// as a simulated circuit marginal.
    pub fn from_probs(probs: &[f64]) -> Result<Self> {
        let n = probs.len() as u64;
        if !n.is_power_of_two() || n < 2 {
            return Err(QaeError::Domain {
                name: "outcome count",
                value: n as f64,
                domain: "powers of two ≥ 2",
            });
        }
        let index = WeightedIndex::new(probs).map_err(|_| QaeError::Domain {
            name: "outcome mass",
            value: probs.iter().sum(),
            domain: "(0, ∞)",
        })?;
        Ok(Self { n, index })
    }

    pub fn outcome<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        self.index.sample(rng) as u64
    }

    pub fn estimate<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        estimate_unchecked(self.outcome(rng), self.n)
    }

    /// Median of `m` independent single-run estimates (`m` odd).
    pub fn median_estimate<R: Rng + ?Sized>(&self, m: usize, rng: &mut R) -> Result<f64> {
        check_odd(m)?;
        let mut runs: Vec<f64> = (0..m).map(|_| self.estimate(rng)).collect();
        runs.sort_by(f64::total_cmp);
        Ok(runs[m / 2])
    }
}

fn check_odd(m: usize) -> Result<()> {
    if m % 2 == 1 {
        Ok(())
    } else {
        Err(QaeError::EvenRepeats(m))
    }
}

/// `shots` independent estimates drawn from `pmf`.
pub fn qae_sample<R: Rng + ?Sized>(pmf: &QaePmf, rng: &mut R, shots: usize) -> Vec<f64> {
    let sampler = pmf.sampler();
    (0..shots).map(|_| sampler.estimate(rng)).collect()
}

/// `shots` medians of `m` independent estimates each.
pub fn median_of_m_sample<R: Rng + ?Sized>(
    pmf: &QaePmf,
    m: usize,
    rng: &mut R,
    shots: usize,
) -> Result<Vec<f64>> {
    check_odd(m)?;
    let sampler = pmf.sampler();
    (0..shots)
        .map(|_| sampler.median_estimate(m, rng))
        .collect()
}

/// Sampler for precisions beyond the materialization cap.
///
/// Outcomes are restricted to windows of `2·half_width + 1` integers around
/// the two peaks at `Nτ/π` and `N − Nτ/π`, and the windowed masses are
/// renormalized. The neglected tail mass is at most about `1/(π² half_width)`
/// and is reported by [`PeakSampler::captured_mass`].
#[derive(Debug, Clone)]
pub struct PeakSampler {
    t: u32,
    outcomes: Vec<u64>,
    index: WeightedIndex<f64>,
    captured: f64,
}

impl PeakSampler {
    pub fn new(h: f64, t: u32, half_width: u64) -> Result<Self> {
        check_t(t)?;
        let tau = tau_from_h(h)?;
        let n = 1u64 << t;
        let peak = (n as f64 * tau / std::f64::consts::PI).round() as i128;
        let mut outcomes: Vec<u64> = Vec::new();
        for centre in [peak, n as i128 - peak] {
            for d in -(half_width as i128)..=half_width as i128 {
                outcomes.push((centre + d).rem_euclid(n as i128) as u64);
            }
        }
        outcomes.sort_unstable();
        outcomes.dedup();
        let weights: Vec<f64> = outcomes
            .iter()
            .map(|&l| pmf_value_unchecked(tau, n, l))
            .collect();
        let captured = compensated_sum(weights.iter().copied());
        let index = WeightedIndex::new(&weights).expect("peak windows carry positive mass");
        Ok(Self {
            t,
            outcomes,
            index,
            captured,
        })
    }

    /// Total exact probability of the windowed outcomes.
    pub fn captured_mass(&self) -> f64 {
        self.captured
    }

    pub fn estimate<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let y = self.outcomes[self.index.sample(rng)];
        estimate_unchecked(y, 1u64 << self.t)
    }
}

/// `sin²(Nτ)` evaluated through the reduced offset from the nearest grid
/// angle, which keeps relative accuracy when `τ` is close to the grid.
fn grid_prefactor(tau: f64, n: u64) -> f64 {
    let m = (n as f64 * tau / std::f64::consts::PI).round();
    let d = tau - m * std::f64::consts::PI / n as f64;
    (n as f64 * d).sin().powi(2)
}

/// Closed-form bias `E[estimate] − h`.
///
/// Summands whose denominator is within tolerance of zero contribute their
/// limit, which is 0 because the `sin²(Nτ)` prefactor vanishes quadratically.
pub fn bias_closed_form(h: f64, t: u32) -> Result<f64> {
    check_t(t)?;
    let tau = tau_from_h(h)?;
    let n = 1u64 << t;
    if degenerate_index(tau, n).is_some() {
        return Ok(0.0);
    }
    let nf = n as f64;
    let pre = grid_prefactor(tau, n) / (nf * nf);
    let terms = (0..n as usize)
        .into_par_iter()
        .with_min_len(1 << 12)
        .map(|l| {
            let a = std::f64::consts::PI * l as f64 / nf;
            let den = (a - tau).sin();
            if reduce_pi(a - tau).abs() <= SINGULAR_TOL {
                0.0
            } else {
                pre * (a + tau).sin() / den
            }
        });
    Ok(compensated_sum(terms.collect::<Vec<_>>()))
}

/// Closed-form mean squared error `E[(estimate − h)²]`.
pub fn mse_closed_form(h: f64, t: u32) -> Result<f64> {
    check_t(t)?;
    let tau = tau_from_h(h)?;
    let n = 1u64 << t;
    if degenerate_index(tau, n).is_some() {
        return Ok(0.0);
    }
    let nf = n as f64;
    let pre = grid_prefactor(tau, n) / (nf * nf);
    let terms: Vec<f64> = (0..n as usize)
        .into_par_iter()
        .with_min_len(1 << 12)
        .map(|l| (std::f64::consts::PI * l as f64 / nf + tau).sin().powi(2))
        .collect();
    Ok(pre * compensated_sum(terms))
}

/// `E[estimate − h]` by direct summation over the PMF.
pub fn pmf_moment_bias(h: f64, t: u32) -> Result<f64> {
    Ok(QaePmf::new(h, t)?.expect(|e| e - h))
}

/// `E[(estimate − h)²]` by direct summation over the PMF.
pub fn pmf_moment_mse(h: f64, t: u32) -> Result<f64> {
    Ok(QaePmf::new(h, t)?.expect(|e| (e - h) * (e - h)))
}

/// Probability mass strictly below, inside, and strictly above the window
/// `[h − π/N, h + π/N]`.
fn window_masses(pmf: &QaePmf) -> (f64, f64, f64) {
    let eps = std::f64::consts::PI / pmf.probs.len() as f64 * (1.0 + WINDOW_SLACK);
    let n = pmf.probs.len() as u64;
    let (mut below, mut inside, mut above) = (Vec::new(), Vec::new(), Vec::new());
    for (l, &p) in pmf.probs.iter().enumerate() {
        let e = estimate_unchecked(l as u64, n);
        if e < pmf.h - eps {
            below.push(p);
        } else if e > pmf.h + eps {
            above.push(p);
        } else {
            inside.push(p);
        }
    }
    (
        compensated_sum(below),
        compensated_sum(inside),
        compensated_sum(above),
    )
}

/// `Pr(|estimate − h| ≤ π/N)` for one run.
pub fn single_run_success(h: f64, t: u32) -> Result<f64> {
    let pmf = QaePmf::new(h, t)?;
    Ok(window_masses(&pmf).1)
}

/// `Pr(X ≥ k)` for `X ~ Binomial(m, p)`.
fn binomial_upper_tail(m: usize, p: f64, k: usize) -> f64 {
    // dist[j] = Pr(j successes so far).
    let mut dist = vec![0.0; m + 1];
    dist[0] = 1.0;
    for i in 0..m {
        for j in (0..=i + 1).rev() {
            let stay = if j <= i { dist[j] * (1.0 - p) } else { 0.0 };
            let step = if j > 0 { dist[j - 1] * p } else { 0.0 };
            dist[j] = stay + step;
        }
    }
    compensated_sum(dist[k..].iter().copied())
}

/// Exact probability that the median of `m` independent runs falls outside
/// `[h − π/N, h + π/N]`.
///
/// The median lies below the window iff at least `(m+1)/2` runs do, and
/// likewise above; the two events are disjoint.
pub fn median_failure_exact(h: f64, t: u32, m: usize) -> Result<f64> {
    median_failure_exact_with_cap(h, t, m, DEFAULT_MAX_REPEATS)
}

pub fn median_failure_exact_with_cap(h: f64, t: u32, m: usize, cap: usize) -> Result<f64> {
    check_odd(m)?;
    if m > cap {
        return Err(QaeError::MTooLarge { m, cap });
    }
    let pmf = QaePmf::new(h, t)?;
    let (below, _, above) = window_masses(&pmf);
    let k = m.div_ceil(2);
    Ok(binomial_upper_tail(m, below, k) + binomial_upper_tail(m, above, k))
}

/// Smallest odd `M ≥ 2 ln(1/δ) / ln(1/ρ)`.
pub fn m_for_delta(delta: f64) -> Result<usize> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(QaeError::Domain {
            name: "delta",
            value: delta,
            domain: "(0, 1)",
        });
    }
    let x = 2.0 * (1.0 / delta).ln() / (1.0 / rho()).ln();
    // Absorb rounding of the log ratio when δ sits exactly on a boundary.
    let m = ((x - 1e-13).ceil().max(1.0)) as usize;
    Ok(if m % 2 == 0 { m + 1 } else { m })
}

/// Repeat count and guarantee for a target failure probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MedianPlan {
    pub m: usize,
    pub delta: f64,
    pub rho: f64,
    /// Half-width `π/2^T` of the success window.
    pub epsilon_t: f64,
}

impl MedianPlan {
    pub fn new(delta: f64, t: u32) -> Result<Self> {
        check_t(t)?;
        Ok(Self {
            m: m_for_delta(delta)?,
            delta,
            rho: rho(),
            epsilon_t: std::f64::consts::PI / (1u64 << t) as f64,
        })
    }

    /// `ρ^{M/2}`, the failure bound guaranteed for this plan.
    pub fn failure_bound(&self) -> f64 {
        self.rho.powf(self.m as f64 / 2.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    const H_PAPER: f64 = 0.4140625;

    #[test]
    fn tau_examples() {
        assert_eq!(tau_from_h(0.0).unwrap(), 0.0);
        assert_eq!(tau_from_h(1.0).unwrap(), PI / 2.0);
        assert!((tau_from_h(0.5).unwrap() - PI / 4.0).abs() < 1e-15);
        assert!(tau_from_h(1.5).is_err());
        assert!(tau_from_h(-1e-9).is_err());
        assert!(tau_from_h(f64::NAN).is_err());
    }

    #[test]
    fn estimate_examples() {
        assert_eq!(estimate_from_outcome(0, 5).unwrap(), 0.0);
        assert_eq!(estimate_from_outcome(16, 5).unwrap(), 1.0);
        assert!((estimate_from_outcome(8, 5).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(
            estimate_from_outcome(3, 5).unwrap(),
            estimate_from_outcome(29, 5).unwrap()
        );
        assert!(estimate_from_outcome(32, 5).is_err());
    }

    #[test]
    fn pmf_hand_values() {
        let p = QaePmf::new(0.5, 1).unwrap();
        assert!((p.probs()[0] - 0.5).abs() < 1e-15 && (p.probs()[1] - 0.5).abs() < 1e-15);
        let p = QaePmf::new(0.0, 6).unwrap();
        assert_eq!(p.probs()[0], 1.0);
        assert_eq!(p.probs()[1..].iter().sum::<f64>(), 0.0);
    }

    #[test]
    fn degenerate_grid_point_is_exact() {
        let h = (PI * 3.0 / 16.0).sin().powi(2);
        let p = QaePmf::new(h, 4).unwrap();
        let hit = p.expect(|e| ((e - h).abs() < 1e-15) as u8 as f64);
        assert_eq!(hit, 1.0);
        assert_eq!(p.probs()[3], 0.5);
        assert_eq!(p.probs()[13], 0.5);
        let p = QaePmf::new(1.0, 3).unwrap();
        assert_eq!(p.probs()[4], 1.0);
    }

    #[test]
    fn pmf_caps_and_errors() {
        assert_eq!(
            QaePmf::new(0.3, 25),
            Err(QaeError::CapExceeded { t: 25, cap: 24 })
        );
        assert_eq!(QaePmf::new(0.3, 0), Err(QaeError::ZeroPrecision));
        assert!(QaePmf::new(2.0, 3).is_err());
    }

    #[test]
    fn two_outcome_moments() {
        assert!(pmf_moment_bias(0.5, 1).unwrap().abs() < 1e-15);
        assert!((pmf_moment_mse(0.5, 1).unwrap() - 0.25).abs() < 1e-15);
        let (b, m) = (
            pmf_moment_bias(0.5, 2).unwrap(),
            pmf_moment_mse(0.5, 2).unwrap(),
        );
        assert!(b.abs() < 1e-15 && m.abs() < 1e-15);
    }

    #[test]
    fn closed_forms_match_oracle_on_paper_instance() {
        for t in [4, 6, 8] {
            let b = bias_closed_form(H_PAPER, t).unwrap();
            let m = mse_closed_form(H_PAPER, t).unwrap();
            assert!(
                (b - pmf_moment_bias(H_PAPER, t).unwrap()).abs() < 1e-9,
                "T={t}"
            );
            assert!(
                (m - pmf_moment_mse(H_PAPER, t).unwrap()).abs() < 1e-9,
                "T={t}"
            );
        }
        assert_eq!(bias_closed_form(0.0, 5).unwrap(), 0.0);
        assert_eq!(mse_closed_form(0.0, 5).unwrap(), 0.0);
    }

    #[test]
    fn success_and_median_examples() {
        let h = (PI * 5.0 / 32.0).sin().powi(2);
        assert_eq!(single_run_success(h, 5).unwrap(), 1.0);
        assert_eq!(median_failure_exact(h, 5, 3).unwrap(), 0.0);
        let q = single_run_success(H_PAPER, 6).unwrap();
        assert!(q >= single_run_floor());
        assert!((median_failure_exact(H_PAPER, 6, 1).unwrap() - (1.0 - q)).abs() < 1e-12);
        assert_eq!(
            median_failure_exact(H_PAPER, 6, 4),
            Err(QaeError::EvenRepeats(4))
        );
        assert!(matches!(
            median_failure_exact(H_PAPER, 6, 101),
            Err(QaeError::MTooLarge { .. })
        ));
    }

    #[test]
    fn binomial_tail_small_cases() {
        assert!((binomial_upper_tail(3, 0.5, 2) - 0.5).abs() < 1e-15);
        assert!((binomial_upper_tail(1, 0.3, 1) - 0.3).abs() < 1e-15);
        assert_eq!(binomial_upper_tail(5, 0.0, 1), 0.0);
    }

    #[test]
    fn m_for_delta_examples() {
        assert_eq!(m_for_delta(0.05).unwrap(), 13);
        let edge = rho().sqrt();
        assert_eq!(m_for_delta(edge * (1.0 + 1e-9)).unwrap(), 1);
        assert_eq!(m_for_delta(edge * (1.0 - 1e-9)).unwrap(), 3);
        assert_eq!(m_for_delta(1.0 - 1e-15).unwrap(), 1);
        assert!(m_for_delta(0.0).is_err() && m_for_delta(1.0).is_err());
        let plan = MedianPlan::new(0.05, 6).unwrap();
        assert!(plan.failure_bound() <= 0.05);
        assert!(plan.rho > 0.61 && plan.rho < 0.62);
    }

    #[test]
    fn sampling_is_deterministic() {
        let p = QaePmf::new(H_PAPER, 6).unwrap();
        let a = qae_sample(&p, &mut ChaCha8Rng::seed_from_u64(3), 100);
        let b = qae_sample(&p, &mut ChaCha8Rng::seed_from_u64(3), 100);
        assert_eq!(a, b);
        let d = QaePmf::new(0.0, 4).unwrap();
        assert!(qae_sample(&d, &mut ChaCha8Rng::seed_from_u64(3), 50)
            .iter()
            .all(|&e| e == 0.0));
        let med = median_of_m_sample(&d, 5, &mut ChaCha8Rng::seed_from_u64(3), 20).unwrap();
        assert!(med.iter().all(|&e| e == 0.0));
    }

    #[test]
    fn peak_sampler_captures_most_mass() {
        let s = PeakSampler::new(H_PAPER, 30, 1 << 10).unwrap();
        assert!(s.captured_mass() > 0.999 && s.captured_mass() <= 1.0 + 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let eps = PI / (1u64 << 30) as f64;
        let inside = (0..2000)
            .filter(|_| (s.estimate(&mut rng) - H_PAPER).abs() <= 64.0 * eps)
            .count();
        assert!(inside > 1900);
    }

    #[test]
    fn csv_header_and_rows() {
        let mut buf = Vec::new();
        QaePmf::new(0.5, 1).unwrap().write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "l,prob,estimate");
        assert_eq!(lines.len(), 3);
        assert!(lines[2].starts_with("1,0.5"));
    }
}
