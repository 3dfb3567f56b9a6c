use crate::error::{Error, Result};

/// log Σ exp(vᵢ), shifted by the maximum for overflow safety.
pub fn log_sum_exp(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Empty("log_sum_exp input"));
    }
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max.is_infinite() {
        return Ok(max);
    }
    let s: f64 = values.iter().map(|v| (v - max).exp()).sum();
    Ok(max + s.ln())
}

pub fn log_mean_exp(values: &[f64]) -> Result<f64> {
    Ok(log_sum_exp(values)? - (values.len() as f64).ln())
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample variance with denominator n - 1.
pub fn variance(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(values);
    values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1) as f64
}

pub fn sd(values: &[f64]) -> f64 {
    variance(values).sqrt()
}

/// Standard error of the mean of a correlated series by non-overlapping
/// batch means. Trailing draws that do not fill a batch are dropped from
/// the batch computation.
pub fn batch_means_se(values: &[f64], n_batches: usize) -> f64 {
    let n_batches = n_batches.max(2);
    let size = values.len() / n_batches;
    if size == 0 {
        return (variance(values) / values.len().max(1) as f64).sqrt();
    }
    let means: Vec<f64> = values
        .chunks_exact(size)
        .take(n_batches)
        .map(mean)
        .collect();
    (variance(&means) / n_batches as f64).sqrt()
}

/// Standard error of `log(mean(exp(v)))` by batch means and the delta
/// method, computed on a shifted scale.
pub fn log_mean_exp_se(values: &[f64], n_batches: usize) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scaled: Vec<f64> = values.iter().map(|v| (v - max).exp()).collect();
    let m = mean(&scaled);
    batch_means_se(&scaled, n_batches) / m
}

/// Empirical quantile by linear interpolation between order statistics.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}
