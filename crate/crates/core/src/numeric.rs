//! Small numeric helpers shared across modules.

/// Neumaier-compensated sum.
///
/// The outcome sums over `2^T` terms reach 1.6e7 terms at the precision cap,
/// where naive accumulation drifts past the 1e-12 normalization budget.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut carry = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            carry += (sum - t) + v;
        } else {
            carry += (v - t) + sum;
        }
        sum = t;
    }
    sum + carry
}

/// `⌈log₂ x⌉` for `x ≥ 1`; `ceil_log2(1) == 0`.
pub fn ceil_log2(x: u64) -> u32 {
    assert!(x >= 1, "ceil_log2 of zero");
    if x == 1 {
        0
    } else {
        64 - (x - 1).leading_zeros()
    }
}

/// Shortest text that parses back to the same `f64` (`0.5`, `1.0`, `1e-9`).
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ceil_log2_small_values() {
        let got: Vec<u32> = (1..=9).map(ceil_log2).collect();
        assert_eq!(got, vec![0, 1, 2, 2, 3, 3, 3, 3, 4]);
    }

    #[test]
    fn compensated_sum_beats_naive() {
        let mut v = vec![1.0];
        v.extend(std::iter::repeat(1e-16).take(10_000));
        let s = compensated_sum(v);
        assert!((s - (1.0 + 1e-12)).abs() < 1e-18);
    }

    #[test]
    fn fmt_round_trips() {
        for x in [
            0.4140625,
            1.0,
            1e-9,
            123456.789,
            1.0 / 3.0,
            2.0f64.powi(-40),
            7e22,
            -0.25,
        ] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
        assert_eq!(fmt_f64(0.4140625), "0.4140625");
        assert_eq!(fmt_f64(1.0), "1.0");
    }
}
