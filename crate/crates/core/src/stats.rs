//! Small summary-statistics helpers shared by the estimators and studies.

/// Sample quantile with linear interpolation between order statistics
/// (`h = (n - 1) q`). `sorted` must be ascending and nonempty.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty slice");
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn sorted_copy(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Equal-tailed interval holding `level` of the mass.
pub fn central_interval(values: &[f64], level: f64) -> (f64, f64) {
    let s = sorted_copy(values);
    let tail = (1.0 - level) / 2.0;
    (quantile_sorted(&s, tail), quantile_sorted(&s, 1.0 - tail))
}

/// Shortest interval spanning `ceil(level * n)` draws.
pub fn hpd_interval(values: &[f64], level: f64) -> (f64, f64) {
    let s = sorted_copy(values);
    let n = s.len();
    let k = ((level * n as f64).ceil() as usize).clamp(1, n);
    let (mut best, mut lo) = (f64::INFINITY, 0);
    for i in 0..=(n - k) {
        let w = s[i + k - 1] - s[i];
        if w < best {
            best = w;
            lo = i;
        }
    }
    (s[lo], s[lo + k - 1])
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Unbiased sample variance.
pub fn variance(values: &[f64]) -> f64 {
    let m = mean(values);
    values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() as f64 - 1.0)
}

/// Kolmogorov-Smirnov distance between the empirical CDF of `sample` and `cdf`.
pub fn ks_distance(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let s = sorted_copy(sample);
    let n = s.len() as f64;
    s.iter().enumerate().fold(0.0f64, |d, (i, &x)| {
        let f = cdf(x);
        let above = (i + 1) as f64 / n - f;
        let below = f - i as f64 / n;
        d.max(above).max(below)
    })
}

/// Asymptotic one-sample KS critical value at the 99% level.
pub fn ks_critical_99(n: usize) -> f64 {
    1.6276 / (n as f64).sqrt()
}

/// Two-sample KS distance.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let (a, b) = (sorted_copy(a), sorted_copy(b));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Two-sample KS critical value at the 99% level.
pub fn ks_two_sample_critical_99(na: usize, nb: usize) -> f64 {
    let (na, nb) = (na as f64, nb as f64);
    1.6276 * ((na + nb) / (na * nb)).sqrt()
}

/// Monte-Carlo standard error of a chain mean using batch means.
pub fn batch_means_se(values: &[f64], batches: usize) -> f64 {
    let size = values.len() / batches;
    let means: Vec<f64> = (0..batches)
        .map(|b| mean(&values[b * size..(b + 1) * size]))
        .collect();
    (variance(&means) / batches as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolated_quantiles() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        let (lo, hi) = central_interval(&v, 0.95);
        assert!((lo - 3.475).abs() < 1e-12);
        assert!((hi - 97.525).abs() < 1e-12);
        assert_eq!(central_interval(&[2.0; 10], 0.9), (2.0, 2.0));
    }

    #[test]
    fn hpd_picks_shortest() {
        let v = [0.0, 0.1, 0.2, 0.3, 5.0];
        assert_eq!(hpd_interval(&v, 0.8), (0.0, 0.3));
    }

    #[test]
    fn ks_uniform_grid() {
        let v: Vec<f64> = (0..100).map(|i| (i as f64 + 0.5) / 100.0).collect();
        assert!((ks_distance(&v, |x| x) - 0.005).abs() < 1e-12);
        assert_eq!(ks_two_sample(&v, &v), 0.0);
    }
}
