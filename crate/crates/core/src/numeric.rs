//! Small numerical helpers: deterministic summation, batch-mean statistics
//! and least-squares line fits.

use rayon::prelude::*;

/// Number of batches used by [`batch_means`].
pub const BATCHES: usize = 32;

/// Fixed chunk length for parallel reductions. The reduction tree only
/// depends on this constant and the input length, never on the pool size.
pub const CHUNK: usize = 4096;

/// Pairwise (cascade) summation in a fixed order.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        n if n <= 16 => values.iter().sum(),
        n => {
            let (lo, hi) = values.split_at(n / 2);
            pairwise_sum(lo) + pairwise_sum(hi)
        }
    }
}

/// Sums `f(i)` for `i in 0..n` in parallel. The result is bit-identical for
/// any number of worker threads.
pub fn par_sum<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    let n_chunks = n.div_ceil(CHUNK);
    let partial: Vec<f64> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(n);
            let vals: Vec<f64> = (lo..hi).map(&f).collect();
            pairwise_sum(&vals)
        })
        .collect();
    pairwise_sum(&partial)
}

/// Mean and standard error from [`BATCHES`] contiguous batches.
///
/// With fewer samples than batches the plain standard error of the mean is
/// returned instead.
pub fn batch_means(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = pairwise_sum(values) / n as f64;
    if n < 2 * BATCHES {
        if n == 1 {
            return (mean, 0.0);
        }
        let var: Vec<f64> = values.iter().map(|v| (v - mean).powi(2)).collect();
        let var = pairwise_sum(&var) / (n - 1) as f64;
        return (mean, (var / n as f64).sqrt());
    }
    let means: Vec<f64> = (0..BATCHES)
        .map(|b| {
            let lo = b * n / BATCHES;
            let hi = (b + 1) * n / BATCHES;
            pairwise_sum(&values[lo..hi]) / (hi - lo) as f64
        })
        .collect();
    let bm = pairwise_sum(&means) / BATCHES as f64;
    let var: Vec<f64> = means.iter().map(|m| (m - bm).powi(2)).collect();
    let var = pairwise_sum(&var) / (BATCHES - 1) as f64;
    (mean, (var / BATCHES as f64).sqrt())
}

/// Ordinary least-squares line `y = intercept + slope * x`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
}

pub fn fit_line(xs: &[f64], ys: &[f64]) -> LineFit {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    LineFit {
        slope,
        intercept: my - slope * mx,
    }
}

/// Linearly interpolated empirical quantile, `q` in `[0, 1]`.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v: Vec<f64> = values.to_vec();
    v.sort_by(f64::total_cmp);
    if v.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_matches_naive_on_integers() {
        let v: Vec<f64> = (1..=1000).map(f64::from).collect();
        assert_eq!(pairwise_sum(&v), 500_500.0);
    }

    #[test]
    fn par_sum_independent_of_pool_size() {
        let f = |i: usize| ((i as f64) * 0.37).sin() / (1.0 + i as f64);
        let one = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| par_sum(50_000, f));
        let four = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap()
            .install(|| par_sum(50_000, f));
        assert_eq!(one.to_bits(), four.to_bits());
    }

    #[test]
    fn batch_means_constant_has_zero_error() {
        let (m, se) = batch_means(&[2.5; 1000]);
        assert_eq!(m, 2.5);
        assert_eq!(se, 0.0);
    }

    #[test]
    fn line_fit_exact() {
        let xs: Vec<f64> = (0..10).map(f64::from).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 - 0.5 * x).collect();
        let fit = fit_line(&xs, &ys);
        assert!((fit.slope + 0.5).abs() < 1e-14);
        assert!((fit.intercept - 3.0).abs() < 1e-14);
    }
}
