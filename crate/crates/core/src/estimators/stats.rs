/// Batches needed before a batch-means error is trusted.
pub const MIN_BATCHES: usize = 30;

/// Batch length in samples: `20 * tcorr / dt`, shortened so that at least
/// [`MIN_BATCHES`] batches fit into `n` samples.
pub fn batch_length(n: usize, tcorr: f64, dt: f64) -> usize {
    let want = if tcorr.is_finite() && tcorr > 0.0 {
        (20.0 * tcorr / dt).ceil() as usize
    } else {
        1
    };
    want.max(1).min((n / MIN_BATCHES).max(1))
}

/// Standard error of the mean of `series` from non-overlapping batch means.
/// Trailing samples that do not fill a batch are dropped.
pub fn batch_means_se(series: &[f64], batch_len: usize) -> f64 {
    let b = batch_len.max(1);
    let nb = series.len() / b;
    if nb < 2 {
        return f64::INFINITY;
    }
    let means: Vec<f64> = series
        .chunks_exact(b)
        .map(|c| c.iter().sum::<f64>() / b as f64)
        .collect();
    let m = means.iter().sum::<f64>() / nb as f64;
    let var = means.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (nb - 1) as f64;
    (var / nb as f64).sqrt()
}
