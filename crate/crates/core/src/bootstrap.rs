//! Classical bootstrap machinery.
//!
//! The ideal bootstrap CDF `H(z) = n^{-r} Σ_i 1{f(X*(i)) ≤ z}` is computed by
//! enumerating every index vector `i ∈ [n]^r` and counting accepted resamples
//! as an exact integer. The Monte Carlo bootstrap draws `B` index vectors
//! uniformly with replacement.
//!
//! Observations are identified by position: index `i` (zero-based) refers to
//! `values[i]`, so duplicated values remain distinct atoms.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default bound on the number of index vectors an enumeration may visit.
pub const DEFAULT_ENUMERATION_CAP: u64 = 100_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BootstrapError {
    #[error("sample must contain at least one value")]
    EmptySample,
    #[error("sample value at position {position} is not finite")]
    NonFinite { position: usize },
    #[error("resample size must be positive")]
    ZeroResampleSize,
    #[error("number of resamples B must be positive")]
    ZeroResamples,
    #[error("enumerating {n}^{resample_size} index vectors exceeds the cap of {cap}")]
    EnumerationTooLarge {
        n: usize,
        resample_size: usize,
        cap: u64,
    },
    #[error("index {index} out of range for a sample of size {n}")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("CDF grids are defined on different thresholds")]
    GridMismatch,
    #[error("invalid CDF grid: {0}")]
    InvalidGrid(&'static str),
    #[error("unknown statistic `{0}`")]
    UnknownStatistic(String),
}

pub type Result<T> = std::result::Result<T, BootstrapError>;

/// The observed data vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Sample {
    values: Vec<f64>,
}

impl Sample {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(BootstrapError::EmptySample);
        }
        if let Some(position) = values.iter().position(|v| !v.is_finite()) {
            return Err(BootstrapError::NonFinite { position });
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Sample size `n`.
    pub fn n(&self) -> usize {
        self.values.len()
    }

    /// The resample `X*(i) = (X_{i_1}, …, X_{i_r})`.
    pub fn resample(&self, indices: &IndexVector) -> Vec<f64> {
        indices.0.iter().map(|&i| self.values[i]).collect()
    }
}

impl TryFrom<Vec<f64>> for Sample {
    type Error = BootstrapError;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<Sample> for Vec<f64> {
    fn from(s: Sample) -> Self {
        s.values
    }
}

/// Zero-based observation indices defining one resample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexVector(Vec<usize>);

impl IndexVector {
    pub fn new(indices: Vec<usize>, n: usize) -> Result<Self> {
        if let Some(&index) = indices.iter().find(|&&i| i >= n) {
            return Err(BootstrapError::IndexOutOfRange { index, n });
        }
        Ok(Self(indices))
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }
}

type StatisticFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
enum StatisticKind {
    Mean,
    Sum,
    Median,
    Variance,
    Custom(StatisticFn),
}

/// A deterministic statistic `f` together with its threshold indicator
/// `g(z, x) = 1{f(x) ≤ z}`.
#[derive(Clone)]
pub struct StatisticSpec {
    name: String,
    kind: StatisticKind,
}

impl fmt::Debug for StatisticSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StatisticSpec")
            .field("name", &self.name)
            .finish()
    }
}

impl StatisticSpec {
    pub fn mean() -> Self {
        Self {
            name: "mean".into(),
            kind: StatisticKind::Mean,
        }
    }

    pub fn sum() -> Self {
        Self {
            name: "sum".into(),
            kind: StatisticKind::Sum,
        }
    }

    /// Lower median of the resample.
    pub fn median() -> Self {
        Self {
            name: "median".into(),
            kind: StatisticKind::Median,
        }
    }

    /// Plug-in (divide by `r`) variance of the resample.
    pub fn variance() -> Self {
        Self {
            name: "variance".into(),
            kind: StatisticKind::Variance,
        }
    }

    /// Wraps an arbitrary pure function. Custom statistics have no circuit
    /// form and are only usable on the analytic path.
    pub fn custom<F>(name: impl Into<String>, f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            kind: StatisticKind::Custom(Arc::new(f)),
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "mean" => Ok(Self::mean()),
            "sum" => Ok(Self::sum()),
            "median" => Ok(Self::median()),
            "variance" => Ok(Self::variance()),
            other => Err(BootstrapError::UnknownStatistic(other.to_string())),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn evaluate(&self, resample: &[f64]) -> f64 {
        match &self.kind {
            StatisticKind::Mean => resample.iter().sum::<f64>() / resample.len() as f64,
            StatisticKind::Sum => resample.iter().sum(),
            StatisticKind::Median => {
                let mut v = resample.to_vec();
                v.sort_by(f64::total_cmp);
                v[(v.len() - 1) / 2]
            }
            StatisticKind::Variance => {
                let r = resample.len() as f64;
                let mean = resample.iter().sum::<f64>() / r;
                resample
                    .iter()
                    .map(|x| (x - mean) * (x - mean))
                    .sum::<f64>()
                    / r
            }
            StatisticKind::Custom(f) => f(resample),
        }
    }

    /// The "integer score sum against an integer bound" form used by the
    /// reversible oracle, when this statistic admits one on `sample`.
    ///
    /// Mean and sum qualify when every sample value is an integer of moderate
    /// magnitude.
    pub fn circuit_form(&self, sample: &Sample, resample_size: usize) -> Option<ScoreSumForm> {
        let scale = match self.kind {
            StatisticKind::Mean => resample_size as f64,
            StatisticKind::Sum => 1.0,
            _ => return None,
        };
        if resample_size == 0 {
            return None;
        }
        const LIMIT: f64 = (1u64 << 31) as f64;
        if sample
            .values
            .iter()
            .any(|v| v.fract() != 0.0 || v.abs() > LIMIT)
        {
            return None;
        }
        let min = sample.values.iter().copied().fold(f64::INFINITY, f64::min) as i64;
        let scores: Vec<u64> = sample
            .values
            .iter()
            .map(|&v| (v as i64 - min) as u64)
            .collect();
        Some(ScoreSumForm {
            scores,
            offset: min * resample_size as i64,
            scale,
            resample_size,
        })
    }
}

/// Evaluates `g(z, resample) = 1{f(resample) ≤ z}`. Ties count as accepted.
pub fn evaluate_indicator(stat: &StatisticSpec, resample: &[f64], z: f64) -> bool {
    stat.evaluate(resample) <= z
}

/// Circuit-friendly description of a statistic: `f(x*) = (S + offset) / scale`
/// with `S = Σ_j scores[i_j]` a nonnegative integer.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSumForm {
    scores: Vec<u64>,
    offset: i64,
    scale: f64,
    resample_size: usize,
}

impl ScoreSumForm {
    /// Per-observation integer scores, indexed like the sample.
    pub fn scores(&self) -> &[u64] {
        &self.scores
    }

    pub fn resample_size(&self) -> usize {
        self.resample_size
    }

    /// `V`, the largest achievable score sum.
    pub fn max_score_sum(&self) -> u64 {
        self.scores.iter().copied().max().unwrap_or(0) * self.resample_size as u64
    }

    /// The statistic value for a score sum, evaluated with the same floating
    /// point operations the callable statistic performs.
    pub fn statistic_of(&self, score_sum: u64) -> f64 {
        (score_sum as i64 + self.offset) as f64 / self.scale
    }

    /// Largest score sum `S ∈ [0, V]` with `statistic_of(S) ≤ z`, or `None`
    /// when no resample is accepted.
    pub fn integer_bound(&self, z: f64) -> Option<u64> {
        let max = self.max_score_sum() as i64;
        let accepts = |s: i64| self.statistic_of(s as u64) <= z;
        if z.is_nan() {
            return None;
        }
        let guess = (self.scale * z).floor() - self.offset as f64;
        let mut s = if guess.is_nan() {
            -1
        } else {
            guess.clamp(-1.0, max as f64) as i64
        };
        while s >= 0 && !accepts(s) {
            s -= 1;
        }
        while s < max && accepts(s + 1) {
            s += 1;
        }
        (s >= 0).then_some(s as u64)
    }
}

/// Exact count of accepted index vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct EnumerationCount {
    pub accepted: u64,
    pub total: u64,
}

impl EnumerationCount {
    pub fn probability(&self) -> f64 {
        self.accepted as f64 / self.total as f64
    }
}

/// `n^r` if it does not exceed `cap`.
pub fn enumeration_size(n: usize, resample_size: usize, cap: u64) -> Result<u64> {
    if resample_size == 0 {
        return Err(BootstrapError::ZeroResampleSize);
    }
    let too_large = BootstrapError::EnumerationTooLarge {
        n,
        resample_size,
        cap,
    };
    let exp = u32::try_from(resample_size).map_err(|_| too_large.clone())?;
    match (n as u64).checked_pow(exp) {
        Some(total) if total <= cap => Ok(total),
        _ => Err(too_large),
    }
}

/// Visits every index vector in `[n]^r` and folds per-vector contributions.
///
/// Work is split on the leading coordinate; each task owns its scratch
/// buffer. `visit` receives the index vector and a scratch buffer already
/// holding the corresponding resample values.
pub(crate) fn fold_index_vectors<A, V>(
    sample: &Sample,
    resample_size: usize,
    cap: u64,
    identity: impl Fn() -> A + Sync + Send,
    visit: V,
    combine: impl Fn(A, A) -> A + Sync + Send,
) -> Result<A>
where
    A: Send,
    V: Fn(&mut A, &[usize], &[f64]) + Sync,
{
    enumeration_size(sample.n(), resample_size, cap)?;
    let n = sample.n();
    let values = sample.values();
    let result = (0..n)
        .into_par_iter()
        .map(|first| {
            let mut acc = identity();
            let mut idx = vec![0usize; resample_size];
            let mut buf = vec![values[0]; resample_size];
            idx[0] = first;
            buf[0] = values[first];
            loop {
                visit(&mut acc, &idx, &buf);
                // Odometer over coordinates 1..r.
                let mut pos = resample_size;
                loop {
                    pos -= 1;
                    if pos == 0 {
                        return acc;
                    }
                    idx[pos] += 1;
                    if idx[pos] < n {
                        buf[pos] = values[idx[pos]];
                        break;
                    }
                    idx[pos] = 0;
                    buf[pos] = values[0];
                }
            }
        })
        .reduce(&identity, &combine);
    Ok(result)
}

/// Exact accepted count for the ideal bootstrap at threshold `z`.
pub fn ideal_bootstrap_count(
    sample: &Sample,
    stat: &StatisticSpec,
    z: f64,
    resample_size: usize,
    cap: u64,
) -> Result<EnumerationCount> {
    let total = enumeration_size(sample.n(), resample_size, cap)?;
    let accepted = fold_index_vectors(
        sample,
        resample_size,
        cap,
        || 0u64,
        |acc, _, resample| *acc += evaluate_indicator(stat, resample, z) as u64,
        |a, b| a + b,
    )?;
    Ok(EnumerationCount { accepted, total })
}

/// The ideal (non-Monte-Carlo) bootstrap CDF `H(z)`, computed exactly by
/// enumeration. `resample_size < n` gives the m-out-of-n bootstrap.
pub fn ideal_bootstrap_cdf(
    sample: &Sample,
    stat: &StatisticSpec,
    z: f64,
    resample_size: usize,
    cap: u64,
) -> Result<f64> {
    ideal_bootstrap_count(sample, stat, z, resample_size, cap).map(|c| c.probability())
}

/// Exact ideal bootstrap CDF on a grid of thresholds, from one enumeration.
pub fn ideal_bootstrap_grid(
    sample: &Sample,
    stat: &StatisticSpec,
    thresholds: &[f64],
    resample_size: usize,
    cap: u64,
) -> Result<(CdfGrid, Vec<EnumerationCount>)> {
    if thresholds.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(BootstrapError::InvalidGrid(
            "thresholds must be strictly increasing",
        ));
    }
    let total = enumeration_size(sample.n(), resample_size, cap)?;
    let d = thresholds.len();
    // counts[k] = number of resamples whose smallest accepting threshold is z_k.
    let counts = fold_index_vectors(
        sample,
        resample_size,
        cap,
        || vec![0u64; d],
        |acc, _, resample| {
            let f = stat.evaluate(resample);
            let k = thresholds.partition_point(|&z| !(f <= z));
            if k < d {
                acc[k] += 1;
            }
        },
        |mut a, b| {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
            a
        },
    )?;
    let mut running = 0u64;
    let exact: Vec<EnumerationCount> = counts
        .iter()
        .map(|c| {
            running += c;
            EnumerationCount {
                accepted: running,
                total,
            }
        })
        .collect();
    let grid = CdfGrid::new(
        thresholds.to_vec(),
        exact.iter().map(EnumerationCount::probability).collect(),
    )?;
    Ok((grid, exact))
}

/// Monte Carlo bootstrap estimate `B^{-1} Σ_b g(z, X*_b)`.
///
/// Indices are drawn with the integer-uniform primitive on `[0, n)`, so the
/// result is bit-reproducible for a given RNG stream.
pub fn cboot_estimate<R: Rng + ?Sized>(
    sample: &Sample,
    stat: &StatisticSpec,
    z: f64,
    resamples: u64,
    rng: &mut R,
    resample_size: usize,
) -> Result<f64> {
    if resamples == 0 {
        return Err(BootstrapError::ZeroResamples);
    }
    if resample_size == 0 {
        return Err(BootstrapError::ZeroResampleSize);
    }
    let n = sample.n();
    let mut buf = vec![0.0; resample_size];
    let mut accepted = 0u64;
    for _ in 0..resamples {
        for slot in buf.iter_mut() {
            *slot = sample.values[rng.gen_range(0..n)];
        }
        accepted += evaluate_indicator(stat, &buf, z) as u64;
    }
    Ok(accepted as f64 / resamples as f64)
}

/// The empirical measure as positional `(value, 1/n)` atoms.
pub fn empirical_measure(sample: &Sample) -> Vec<(f64, f64)> {
    let w = 1.0 / sample.n() as f64;
    sample.values.iter().map(|&v| (v, w)).collect()
}

/// CDF values on a strictly increasing threshold grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdfGrid {
    thresholds: Vec<f64>,
    probabilities: Vec<f64>,
}

impl CdfGrid {
    pub fn new(thresholds: Vec<f64>, probabilities: Vec<f64>) -> Result<Self> {
        if thresholds.len() != probabilities.len() {
            return Err(BootstrapError::InvalidGrid("length mismatch"));
        }
        if thresholds.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(BootstrapError::InvalidGrid(
                "thresholds must be strictly increasing",
            ));
        }
        if probabilities.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(BootstrapError::InvalidGrid(
                "probabilities must lie in [0, 1]",
            ));
        }
        Ok(Self {
            thresholds,
            probabilities,
        })
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }
}

/// Kolmogorov distance `max_d |F(z_d) − G(z_d)|` on a shared grid.
pub fn kolmogorov_distance(f: &CdfGrid, g: &CdfGrid) -> Result<f64> {
    if f.thresholds != g.thresholds {
        return Err(BootstrapError::GridMismatch);
    }
    Ok(f.probabilities
        .iter()
        .zip(&g.probabilities)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn paper_sample() -> Sample {
        Sample::new(vec![0.0, 1.0, 2.0, 3.0]).unwrap()
    }

    #[test]
    fn indicator_examples() {
        let mean = StatisticSpec::mean();
        assert!(!evaluate_indicator(&mean, &[0.0, 1.0, 2.0, 3.0], 1.25));
        assert!(evaluate_indicator(&mean, &[0.0; 4], 0.0));
        assert!(!evaluate_indicator(&mean, &[3.0; 4], 1.25));
    }

    #[test]
    fn ideal_cdf_paper_value_is_exact() {
        let c = ideal_bootstrap_count(
            &paper_sample(),
            &StatisticSpec::mean(),
            1.25,
            4,
            DEFAULT_ENUMERATION_CAP,
        )
        .unwrap();
        assert_eq!(
            c,
            EnumerationCount {
                accepted: 106,
                total: 256
            }
        );
        assert_eq!(c.probability(), 0.4140625);
    }

    #[test]
    fn single_atom_and_two_point_samples() {
        let s = Sample::new(vec![5.0]).unwrap();
        let mean = StatisticSpec::mean();
        assert_eq!(ideal_bootstrap_cdf(&s, &mean, 5.0, 1, 100).unwrap(), 1.0);
        assert_eq!(ideal_bootstrap_cdf(&s, &mean, 7.5, 1, 100).unwrap(), 1.0);
        assert_eq!(ideal_bootstrap_cdf(&s, &mean, 4.999, 1, 100).unwrap(), 0.0);

        let s = Sample::new(vec![0.0, 1.0]).unwrap();
        assert_eq!(ideal_bootstrap_cdf(&s, &mean, 0.0, 2, 100).unwrap(), 0.25);
    }

    #[test]
    fn enumeration_cap_is_enforced() {
        let s = Sample::new((0..9).map(f64::from).collect()).unwrap();
        let err = ideal_bootstrap_cdf(&s, &StatisticSpec::mean(), 1.0, 9, DEFAULT_ENUMERATION_CAP)
            .unwrap_err();
        assert!(matches!(
            err,
            BootstrapError::EnumerationTooLarge {
                n: 9,
                resample_size: 9,
                ..
            }
        ));
        assert!(enumeration_size(8, 8, DEFAULT_ENUMERATION_CAP).is_ok());
        assert!(enumeration_size(4, 0, 10).is_err());
    }

    #[test]
    fn grid_matches_pointwise_enumeration() {
        let s = Sample::new(vec![0.0, 1.0, 1.0, 3.0]).unwrap();
        let stat = StatisticSpec::mean();
        let zs: Vec<f64> = (0..14).map(|k| -0.1 + 0.25 * k as f64).collect();
        let (grid, counts) = ideal_bootstrap_grid(&s, &stat, &zs, 4, 1000).unwrap();
        for (k, &z) in zs.iter().enumerate() {
            let c = ideal_bootstrap_count(&s, &stat, z, 4, 1000).unwrap();
            assert_eq!(counts[k], c);
            assert_eq!(grid.probabilities()[k], c.probability());
        }
    }

    #[test]
    fn m_out_of_n_with_full_size_is_bit_exact() {
        let s = paper_sample();
        let stat = StatisticSpec::mean();
        let a = ideal_bootstrap_cdf(&s, &stat, 1.25, s.n(), 1000).unwrap();
        assert_eq!(a.to_bits(), 0.4140625f64.to_bits());
        // m = 2: sums ≤ 2.5 among 16 pairs: (0,0),(0,1),(1,0),(0,2),(2,0),(1,1) → 6
        assert_eq!(
            ideal_bootstrap_cdf(&s, &stat, 1.25, 2, 1000).unwrap(),
            6.0 / 16.0
        );
    }

    #[test]
    fn cboot_degenerate_and_deterministic() {
        let s = Sample::new(vec![0.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(
            cboot_estimate(&s, &StatisticSpec::mean(), 1.0, 37, &mut rng, 1).unwrap(),
            1.0
        );

        let s = paper_sample();
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            cboot_estimate(&s, &StatisticSpec::mean(), 1.25, 1 << 12, &mut rng, 4).unwrap()
        };
        assert_eq!(run(9).to_bits(), run(9).to_bits());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(cboot_estimate(&s, &StatisticSpec::mean(), 1.25, 0, &mut rng, 4).is_err());
    }

    #[test]
    fn cboot_within_three_sigma() {
        let p = 0.4140625;
        let b = 1u64 << 16;
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let est = cboot_estimate(
            &paper_sample(),
            &StatisticSpec::mean(),
            1.25,
            b,
            &mut rng,
            4,
        )
        .unwrap();
        assert!(
            (est - p).abs() <= 3.0 * (p * (1.0 - p) / b as f64).sqrt(),
            "{est}"
        );
    }

    #[test]
    fn empirical_measure_is_positional() {
        let m = empirical_measure(&paper_sample());
        assert_eq!(m, vec![(0.0, 0.25), (1.0, 0.25), (2.0, 0.25), (3.0, 0.25)]);
        let m = empirical_measure(&Sample::new(vec![7.0, 7.0]).unwrap());
        assert_eq!(m, vec![(7.0, 0.5), (7.0, 0.5)]);
        let m = empirical_measure(&Sample::new(vec![-2.5]).unwrap());
        assert_eq!(m, vec![(-2.5, 1.0)]);
    }

    #[test]
    fn kolmogorov_examples() {
        let two = |a, b| CdfGrid::new(vec![0.0, 1.0], vec![a, b]).unwrap();
        assert_eq!(
            kolmogorov_distance(&two(0.3, 0.7), &two(0.3, 0.7)).unwrap(),
            0.0
        );
        assert_eq!(
            kolmogorov_distance(&two(0.0, 1.0), &two(1.0, 1.0)).unwrap(),
            1.0
        );
        let f = CdfGrid::new(vec![1.0, 2.0, 3.0], vec![0.2, 0.5, 0.9]).unwrap();
        let g = CdfGrid::new(vec![1.0, 2.0, 3.0], vec![0.25, 0.45, 0.9]).unwrap();
        assert!((kolmogorov_distance(&f, &g).unwrap() - 0.05).abs() < 1e-15);
        let h = CdfGrid::new(vec![1.0, 2.0, 4.0], vec![0.2, 0.5, 0.9]).unwrap();
        assert_eq!(
            kolmogorov_distance(&f, &h),
            Err(BootstrapError::GridMismatch)
        );
    }

    #[test]
    fn sample_and_index_validation() {
        assert_eq!(Sample::new(vec![]), Err(BootstrapError::EmptySample));
        assert!(Sample::new(vec![1.0, f64::NAN]).is_err());
        assert!(IndexVector::new(vec![0, 4], 4).is_err());
        let iv = IndexVector::new(vec![3, 3, 0], 4).unwrap();
        assert_eq!(paper_sample().resample(&iv), vec![3.0, 3.0, 0.0]);
        assert!(StatisticSpec::from_name("trimmed").is_err());
    }

    #[test]
    fn integer_bound_matches_callable() {
        let s = Sample::new(vec![-2.0, 0.0, 1.0, 5.0]).unwrap();
        for stat in [StatisticSpec::mean(), StatisticSpec::sum()] {
            let form = stat.circuit_form(&s, 3).unwrap();
            assert_eq!(form.max_score_sum(), 21);
            for k in -40..60 {
                let z = k as f64 * 0.37;
                let bound = form.integer_bound(z);
                for sum in 0..=form.max_score_sum() {
                    let expect = form.statistic_of(sum) <= z;
                    assert_eq!(bound.is_some_and(|b| sum <= b), expect, "z={z} sum={sum}");
                }
            }
        }
        assert!(StatisticSpec::median().circuit_form(&s, 3).is_none());
        let frac = Sample::new(vec![0.5, 1.0]).unwrap();
        assert!(StatisticSpec::mean().circuit_form(&frac, 2).is_none());
    }

    #[test]
    fn paper_instance_bound_is_five() {
        let form = StatisticSpec::mean()
            .circuit_form(&paper_sample(), 4)
            .unwrap();
        assert_eq!(form.integer_bound(1.25), Some(5));
        assert_eq!(form.integer_bound(-0.1), None);
        assert_eq!(form.integer_bound(100.0), Some(12));
    }
}
