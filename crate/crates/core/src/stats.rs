//! Small statistical helpers shared by the checks and the gallery.

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal, StudentsT};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Wilson score interval for a binomial proportion.
pub fn wilson(successes: usize, n: usize, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if successes == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if successes as f64 == n { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

/// Mean and standard error of the mean, summed in the given order.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Two-sided normal p-value of a z statistic.
pub fn normal_two_sided(z: f64) -> f64 {
    let n = Normal::new(0.0, 1.0).expect("standard normal");
    2.0 * n.cdf(-z.abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Kolmogorov distribution tail `P(K > λ)`.
fn kolmogorov_tail(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..=200 {
        let j = j as f64;
        let term = (-2.0 * j * j * lambda * lambda).exp();
        sum += if j as i64 % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Two-sample Kolmogorov–Smirnov test with the asymptotic p-value
/// (Stephens' small-sample correction).
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> KsResult {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len(), b.len());
    if n == 0 || m == 0 {
        return KsResult { statistic: f64::NAN, p_value: f64::NAN };
    }
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < n && j < m {
        let x = a[i].min(b[j]);
        while i < n && a[i] <= x {
            i += 1;
        }
        while j < m && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let en = ((n * m) as f64 / (n + m) as f64).sqrt();
    let p = kolmogorov_tail((en + 0.12 + 0.11 / en) * d);
    KsResult { statistic: d, p_value: p }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub n: usize,
}

impl LinearFit {
    /// Two-sided t-test p-value for `slope = null`.
    pub fn p_value(&self, null: f64) -> f64 {
        if self.n <= 2 || !(self.slope_stderr > 0.0) {
            return f64::NAN;
        }
        let t = (self.slope - null) / self.slope_stderr;
        let dist = StudentsT::new(0.0, 1.0, (self.n - 2) as f64).expect("valid degrees of freedom");
        2.0 * dist.cdf(-t.abs())
    }
}

/// Ordinary least squares of `ys` on `xs`.
pub fn ols(xs: &[f64], ys: &[f64]) -> LinearFit {
    let n = xs.len().min(ys.len());
    let nf = n as f64;
    let mx = xs[..n].iter().sum::<f64>() / nf;
    let my = ys[..n].iter().sum::<f64>() / nf;
    let sxx: f64 = xs[..n].iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs[..n].iter().zip(&ys[..n]).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs[..n].iter().zip(&ys[..n]).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let slope_stderr = if n > 2 { (rss / (nf - 2.0) / sxx).sqrt() } else { f64::NAN };
    LinearFit { slope, intercept, slope_stderr, n }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pearson goodness-of-fit test of counts against expected counts.
pub fn chi_square_gof(observed: &[u64], expected: &[f64]) -> ChiSquareResult {
    let statistic: f64 = observed
        .iter()
        .zip(expected)
        .map(|(&o, &e)| (o as f64 - e).powi(2) / e)
        .sum();
    let dof = observed.len().saturating_sub(1).max(1);
    let dist = ChiSquared::new(dof as f64).expect("positive degrees of freedom");
    ChiSquareResult { statistic, dof, p_value: 1.0 - dist.cdf(statistic) }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_contains_the_estimate() {
        let (lo, hi) = wilson(632, 1000, Z95);
        assert!(lo < 0.632 && 0.632 < hi);
        assert!((lo - 0.6018).abs() < 1e-3 && (hi - 0.6611).abs() < 1e-3);
        assert_eq!(wilson(0, 50, Z95).0, 0.0);
    }

    #[test]
    fn ks_identical_and_shifted() {
        let a: Vec<f64> = (0..500).map(|i| i as f64 / 500.0).collect();
        let r = ks_two_sample(&a, &a);
        assert_eq!(r.statistic, 0.0);
        assert!(r.p_value > 0.99);
        let b: Vec<f64> = a.iter().map(|x| x + 0.3).collect();
        let r = ks_two_sample(&a, &b);
        assert!((r.statistic - 0.3).abs() < 1e-2);
        assert!(r.p_value < 1e-10);
    }

    #[test]
    fn kolmogorov_tail_reference_value() {
        // P(K > 1.36) ≈ 0.0494
        assert!((kolmogorov_tail(1.36) - 0.0494).abs() < 5e-4);
    }

    #[test]
    fn ols_exact_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys = [1.0, 3.0, 5.0, 7.0];
        let f = ols(&xs, &ys);
        assert!((f.slope - 2.0).abs() < 1e-14 && (f.intercept - 1.0).abs() < 1e-14);
        let noisy = [1.0, 3.1, 4.9, 7.0];
        let f = ols(&xs, &noisy);
        assert!(f.p_value(0.0) < 0.01);
        assert!(f.p_value(2.0) > 0.5);
    }

    #[test]
    fn chi_square_uniform() {
        let r = chi_square_gof(&[25, 25, 25, 25], &[25.0; 4]);
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.dof, 3);
        assert!((r.p_value - 1.0).abs() < 1e-12);
        let r = chi_square_gof(&[50, 10, 20, 20], &[25.0; 4]);
        assert!(r.p_value < 1e-4);
    }
}
