// SPDX-License-Identifier: MIT OR Apache-2.0

//! Small summary statistics shared by the Monte Carlo routines.

/// Mean and corrected (n - 1) variance.
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>();
    (mean, ss / (n - 1) as f64)
}

/// Rank (1-based) of the empirical `(1 - alpha)`-quantile: `⌈(1 - alpha) n⌉`.
pub fn upper_quantile_rank(n: usize, alpha: f64) -> usize {
    // The small slack keeps e.g. 0.95 * 10000 from rounding up to 9501.
    let r = ((1.0 - alpha) * n as f64 - 1e-9).ceil() as usize;
    r.clamp(1, n)
}

/// Empirical `(1 - alpha)`-quantile of `xs` as the `⌈(1 - alpha) n⌉`-th
/// order statistic. Sorts `xs` in place.
pub fn upper_quantile(xs: &mut [f64], alpha: f64) -> f64 {
    assert!(!xs.is_empty(), "quantile of an empty sample");
    xs.sort_by(f64::total_cmp);
    xs[upper_quantile_rank(xs.len(), alpha) - 1]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_rank() {
        assert_eq!(upper_quantile_rank(10_000, 0.05), 9500);
        assert_eq!(upper_quantile_rank(1000, 0.05), 950);
        assert_eq!(upper_quantile_rank(300, 0.05), 285);
        assert_eq!(upper_quantile_rank(7, 0.05), 7);
        assert_eq!(upper_quantile_rank(1, 0.5), 1);
        let mut xs: Vec<f64> = (1..=100).rev().map(f64::from).collect();
        assert_eq!(upper_quantile(&mut xs, 0.05), 95.0);
    }

    #[test]
    fn moments() {
        let (m, v) = mean_var(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((v - 5.0 / 3.0).abs() < 1e-15);
    }
}
