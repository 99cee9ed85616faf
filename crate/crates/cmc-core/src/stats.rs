//! Moment and order statistics over small sample lists.

use alloc::vec;
use alloc::vec::Vec;

/// Median with the even-count convention "mean of the two central values".
/// Returns `None` for an empty list.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Some(median_sorted(&v))
}

pub fn median_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// Population moments of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Moments {
    pub sum: f64,
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    /// Excess kurtosis, `m4 / m2^2 - 3`.
    pub kurtosis: f64,
}

/// Skewness and kurtosis are 0 when the variance is 0 (or the list is empty).
pub fn moments(values: &[f64]) -> Moments {
    if values.is_empty() {
        return Moments::default();
    }
    let n = values.len() as f64;
    let sum: f64 = values.iter().sum();
    let mean = sum / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &v in values {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    // relative cutoff so constant samples do not produce rounding noise
    let scale = mean.abs().max(1.0);
    let (skewness, kurtosis) = if m2 <= 1e-24 * scale * scale {
        (0.0, 0.0)
    } else {
        (m3 / (m2 * libm::sqrt(m2)), m4 / (m2 * m2) - 3.0)
    };
    Moments {
        sum,
        mean,
        variance: m2,
        skewness,
        kurtosis,
    }
}

/// Unnormalized histogram over `[0, 1]` with right-open bins; the last bin is
/// closed so that 1.0 lands in it.
pub fn unit_histogram(values: &[f64], bins: usize) -> Vec<f64> {
    let mut h = vec![0.0; bins];
    for &v in values {
        let b = ((v * bins as f64) as usize).min(bins - 1);
        h[b] += 1.0;
    }
    h
}

/// Quantiles by linear interpolation between order statistics
/// (position `q * (n - 1)`). All zeros for an empty list.
pub fn quantiles(values: &[f64], qs: &[f64]) -> Vec<f64> {
    if values.is_empty() {
        return vec![0.0; qs.len()];
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let last = (v.len() - 1) as f64;
    qs.iter()
        .map(|&q| {
            let pos = q * last;
            let lo = libm::floor(pos) as usize;
            let hi = libm::ceil(pos) as usize;
            let t = pos - lo as f64;
            v[lo] + (v[hi] - v[lo]) * t
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_conventions() {
        assert_eq!(median(&[0.6, 0.2, 0.4]), Some(0.4));
        assert!((median(&[0.3, 0.1]).unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(median(&[]), None);
    }

    #[test]
    fn three_point_moments() {
        let m = moments(&[0.2, 0.4, 0.6]);
        assert!((m.mean - 0.4).abs() < 1e-15);
        // population variance: (0.04 + 0 + 0.04) / 3
        assert!((m.variance - 0.08 / 3.0).abs() < 1e-12);
        assert!(m.skewness.abs() < 1e-9);
    }

    #[test]
    fn constant_sample_has_zero_shape() {
        let m = moments(&[0.7; 5]);
        assert_eq!((m.skewness, m.kurtosis), (0.0, 0.0));
        assert!(m.variance.abs() < 1e-15);
        let one = moments(&[0.3]);
        assert_eq!(one.mean, 0.3);
        assert_eq!(one.variance, 0.0);
    }

    #[test]
    fn histogram_edges() {
        let h = unit_histogram(&[0.0, 0.05, 0.1, 0.99, 1.0], 10);
        assert_eq!(h[0], 2.0);
        assert_eq!(h[1], 1.0);
        assert_eq!(h[9], 2.0);
        assert_eq!(h.iter().sum::<f64>(), 5.0);
    }

    #[test]
    fn interpolated_quantiles() {
        let q = quantiles(&[0.0, 1.0, 2.0, 3.0, 4.0], &[0.0, 0.25, 0.5, 0.9, 1.0]);
        assert_eq!(q, vec![0.0, 1.0, 2.0, 3.6, 4.0]);
    }
}
