//! Descriptive statistics used to check series structure.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

/// Pearson correlation; zero when either side has zero variance.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        0.0
    } else {
        sab / (saa * sbb).sqrt()
    }
}

/// `(period, power)` for Fourier frequencies `k = 1..=n/2` of the
/// mean-removed series, with power `|X_k|^2 / n`.
pub fn periodogram(values: &[f64]) -> Vec<(f64, f64)> {
    let n = values.len();
    if n < 2 {
        return Vec::new();
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<Complex<f64>> = values.iter().map(|v| Complex::new(v - mean, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    (1..=n / 2).map(|k| (n as f64 / k as f64, buf[k].norm_sqr() / n as f64)).collect()
}

/// Periods of the `count` strongest local maxima of the periodogram among
/// periods longer than `min_period`, strongest first.
pub fn spectral_peaks(values: &[f64], min_period: f64, count: usize) -> Vec<f64> {
    let spec = periodogram(values);
    let mut peaks: Vec<(f64, f64)> = (0..spec.len())
        .filter(|&i| spec[i].0 > min_period)
        .filter(|&i| {
            let p = spec[i].1;
            (i == 0 || spec[i - 1].1 < p) && (i + 1 == spec.len() || spec[i + 1].1 <= p)
        })
        .map(|i| spec[i])
        .collect();
    peaks.sort_by(|a, b| b.1.total_cmp(&a.1));
    peaks.into_iter().take(count).map(|(period, _)| period).collect()
}
