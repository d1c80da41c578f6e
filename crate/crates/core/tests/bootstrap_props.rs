use proptest::prelude::*;
use qboot_core::bootstrap::{
    cboot_estimate, ideal_bootstrap_cdf, ideal_bootstrap_count, ideal_bootstrap_grid, Sample,
    StatisticSpec,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const CAP: u64 = 1_000_000;

/// Independent oracle: walk all n^r index vectors with a plain counter.
fn brute_count(values: &[f64], r: usize, stat: &StatisticSpec, z: f64) -> (u64, u64) {
    let n = values.len();
    let total = (n as u64).pow(r as u32);
    let mut accepted = 0;
    for code in 0..total {
        let mut c = code;
        let resample: Vec<f64> = (0..r)
            .map(|_| {
                let i = (c % n as u64) as usize;
                c /= n as u64;
                values[i]
            })
            .collect();
        if stat.evaluate(&resample) <= z {
            accepted += 1;
        }
    }
    (accepted, total)
}

fn small_sample() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0u8..6, 1..=4).prop_map(|v| v.into_iter().map(f64::from).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn cdf_is_monotone_with_limits(values in small_sample()) {
        let s = Sample::new(values.clone()).unwrap();
        let mean = StatisticSpec::mean();
        let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let zs: Vec<f64> = (0..=40).map(|k| lo - 0.5 + (hi - lo + 1.0) * k as f64 / 40.0).collect();
        let hs: Vec<f64> = zs.iter().map(|&z| ideal_bootstrap_cdf(&s, &mean, z, s.n(), CAP).unwrap()).collect();
        prop_assert!(hs.windows(2).all(|w| w[0] <= w[1]));
        prop_assert_eq!(ideal_bootstrap_cdf(&s, &mean, lo - 1e-9, s.n(), CAP).unwrap(), 0.0);
        prop_assert_eq!(ideal_bootstrap_cdf(&s, &mean, hi, s.n(), CAP).unwrap(), 1.0);
        let (grid, _) = ideal_bootstrap_grid(&s, &mean, &zs, s.n(), CAP).unwrap();
        prop_assert_eq!(grid.probabilities(), &hs[..]);
    }

    #[test]
    fn mean_cdf_is_permutation_invariant(values in small_sample(), z in -0.5f64..6.0, seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let mut shuffled = values.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mean = StatisticSpec::mean();
        let a = ideal_bootstrap_count(&Sample::new(values).unwrap(), &mean, z, shuffled.len(), CAP).unwrap();
        let b = ideal_bootstrap_count(&Sample::new(shuffled.clone()).unwrap(), &mean, z, shuffled.len(), CAP).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn counts_are_exact_integers(values in small_sample(), r in 1usize..=4, z in -0.5f64..6.0) {
        let s = Sample::new(values.clone()).unwrap();
        for stat in [StatisticSpec::mean(), StatisticSpec::median(), StatisticSpec::variance()] {
            let c = ideal_bootstrap_count(&s, &stat, z, r, CAP).unwrap();
            prop_assert_eq!((c.accepted, c.total), brute_count(&values, r, &stat, z));
            prop_assert_eq!(c.probability() * c.total as f64, c.accepted as f64);
        }
    }

    #[test]
    fn full_size_resample_matches_default(values in small_sample(), z in -0.5f64..6.0) {
        let s = Sample::new(values).unwrap();
        let mean = StatisticSpec::mean();
        let via_r = ideal_bootstrap_cdf(&s, &mean, z, s.n(), CAP).unwrap();
        let (grid, _) = ideal_bootstrap_grid(&s, &mean, &[z], s.n(), CAP).unwrap();
        prop_assert_eq!(via_r.to_bits(), grid.probabilities()[0].to_bits());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn cboot_is_unbiased(values in small_sample(), z in 0.0f64..5.0, b in 1u64..=16, seed in any::<u64>()) {
        let s = Sample::new(values).unwrap();
        let mean = StatisticSpec::mean();
        let p = ideal_bootstrap_cdf(&s, &mean, z, s.n(), CAP).unwrap();
        let reps = 2000;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let avg = (0..reps).map(|_| cboot_estimate(&s, &mean, z, b, &mut rng, s.n()).unwrap()).sum::<f64>() / reps as f64;
        let tol = 4.0 * (p * (1.0 - p) / (b as f64 * reps as f64)).sqrt();
        prop_assert!((avg - p).abs() <= tol, "avg {avg} vs p {p}, tol {tol}");
    }
}

#[test]
fn cboot_is_reproducible() {
    let s = Sample::new(vec![0.0, 1.0, 2.0, 3.0]).unwrap();
    let mean = StatisticSpec::mean();
    let run = |seed| {
        cboot_estimate(
            &s,
            &mean,
            1.25,
            1024,
            &mut ChaCha8Rng::seed_from_u64(seed),
            4,
        )
        .unwrap()
    };
    assert_eq!(run(7).to_bits(), run(7).to_bits());
}
