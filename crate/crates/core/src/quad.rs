//! One-dimensional quadrature for radial Lévy densities.
//!
//! Finite intervals use adaptive Gauss–Kronrod (7/15). Integrals reaching
//! to `+∞` or down to `0` are split into dyadic shells; a shell series whose
//! terms stop shrinking geometrically is reported as divergent instead of
//! being summed forever.

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Tolerances for [`integrate`] and [`integrate_improper`].
#[derive(Debug, Clone, Copy)]
pub struct QuadConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Any partial sum beyond this magnitude is reported as divergence.
    pub divergence_bound: f64,
    pub max_shells: usize,
    /// Subinterval budget of one adaptive integration.
    pub max_intervals: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-11,
            abs_tol: 1e-14,
            divergence_bound: 1e12,
            max_shells: 2000,
            max_intervals: 200,
        }
    }
}

/// A converged integral with its error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
}

/// The shell series did not converge within the configured bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Divergent;

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let s = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// Adaptive Gauss–Kronrod on a finite interval: the interval with the
/// largest error estimate is bisected until the total error meets the
/// tolerance or `max_intervals` is reached.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, cfg: &QuadConfig) -> Quadrature {
    if b <= a {
        return Quadrature { value: 0.0, error: 0.0 };
    }
    let (v, e) = gk15(&f, a, b);
    let mut parts = vec![(a, b, v, e)];
    let (mut value, mut error) = (v, e);
    while parts.len() < cfg.max_intervals {
        let tol = (cfg.rel_tol * value.abs()).max(cfg.abs_tol);
        if error <= tol {
            break;
        }
        let worst = parts
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .map(|(i, _)| i)
            .expect("nonempty");
        let (l, r, pv, pe) = parts.swap_remove(worst);
        let mid = 0.5 * (l + r);
        if mid <= l || mid >= r {
            parts.push((l, r, pv, pe));
            break;
        }
        let (lv, le) = gk15(&f, l, mid);
        let (rv, re) = gk15(&f, mid, r);
        value += lv + rv - pv;
        error += le + re - pe;
        parts.push((l, mid, lv, le));
        parts.push((mid, r, rv, re));
    }
    // Re-sum to shed the drift of the running updates.
    let value = parts.iter().map(|p| p.2).sum();
    let error = parts.iter().map(|p| p.3).sum();
    Quadrature { value, error }
}

/// Sum a shell series `s_0, s_1, ...` produced lazily by `shell`.
fn shell_series<S: FnMut(usize) -> f64>(mut shell: S, cfg: &QuadConfig) -> Result<Quadrature, Divergent> {
    let mut sum = 0.0;
    let mut prev: Option<f64> = None;
    let mut ratios: Vec<f64> = Vec::new();
    let mut small_run = 0;
    for k in 0..cfg.max_shells {
        let s = shell(k);
        if !s.is_finite() {
            return Err(Divergent);
        }
        sum += s;
        if sum.abs() > cfg.divergence_bound {
            return Err(Divergent);
        }
        if s.abs() <= cfg.rel_tol * sum.abs() + cfg.abs_tol {
            small_run += 1;
            if small_run >= 3 {
                return Ok(Quadrature { value: sum, error: s.abs() * 4.0 });
            }
        } else {
            small_run = 0;
        }
        if let Some(p) = prev {
            if p != 0.0 {
                ratios.push((s / p).abs());
            }
        }
        prev = Some(s);
        // Shells that stop shrinking mean a divergent series, even if they
        // later underflow to zero.
        if ratios.len() >= 32 && ratios[ratios.len() - 32..].iter().all(|r| *r >= 1.0 - 1e-3) {
            return Err(Divergent);
        }
        // Geometric tail extrapolation once the ratio has settled.
        if ratios.len() >= 24 {
            let tail = &ratios[ratios.len() - 8..];
            let rmax = tail.iter().cloned().fold(0.0, f64::max);
            let rmin = tail.iter().cloned().fold(f64::INFINITY, f64::min);
            if rmax < 1.0 - 1e-3 && rmax - rmin < 1e-3 * rmax.max(1e-300) {
                let extra = s * rmax / (1.0 - rmax);
                let value = sum + extra;
                if value.abs() > cfg.divergence_bound {
                    return Err(Divergent);
                }
                return Ok(Quadrature { value, error: extra.abs() * 1e-3 + s.abs() });
            }
        }
    }
    Err(Divergent)
}

/// Integrate over `[lo, hi]` where `lo ≥ 0` may be zero and `hi` may be
/// `+∞`. The integrand may be singular at `0` and slowly decaying at `∞`.
pub fn integrate_improper<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    cfg: &QuadConfig,
) -> Result<Quadrature, Divergent> {
    integrate_segments(|a, b| integrate(&f, a, b, cfg).value, lo, hi, cfg)
}

/// Like [`integrate_improper`], but the caller supplies the integral over
/// each segment `[a, b]` (with `b ≤ 2a` on the shell parts).
pub fn integrate_segments<S: Fn(f64, f64) -> f64>(
    segment: S,
    lo: f64,
    hi: f64,
    cfg: &QuadConfig,
) -> Result<Quadrature, Divergent> {
    assert!(lo >= 0.0, "lower limit must be nonnegative");
    if hi <= lo {
        return Ok(Quadrature { value: 0.0, error: 0.0 });
    }
    let mut total = Quadrature { value: 0.0, error: 0.0 };
    let mut add = |q: Quadrature| {
        total.value += q.value;
        total.error += q.error;
    };
    // Finite core [a, b] with 0 < a, b < ∞.
    let a = if lo > 0.0 { lo } else { hi.min(1.0) };
    let b = if hi.is_finite() { hi } else { a.max(1.0) };
    if lo == 0.0 {
        add(shell_series(
            |k| {
                let upper = a * 0.5f64.powi(k as i32);
                segment(0.5 * upper, upper)
            },
            cfg,
        )?);
    }
    let mut left = a;
    while left < b {
        let right = (2.0 * left).min(b);
        add(Quadrature { value: segment(left, right), error: 0.0 });
        left = right;
    }
    if !hi.is_finite() {
        add(shell_series(
            |k| {
                let lower = b * 2f64.powi(k as i32);
                segment(lower, 2.0 * lower)
            },
            cfg,
        )?);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finite_polynomial_is_exact() {
        let q = integrate(|x| 3.0 * x * x, 0.0, 2.0, &QuadConfig::default());
        assert!((q.value - 8.0).abs() < 1e-12);
    }

    #[test]
    fn power_tails() {
        let cfg = QuadConfig::default();
        // ∫_1^∞ ρ^-2 = 1
        let q = integrate_improper(|r| r.powi(-2), 1.0, f64::INFINITY, &cfg).unwrap();
        assert!((q.value - 1.0).abs() < 1e-8, "{q:?}");
        // ∫_1^∞ ρ^-1.5 = 2
        let q = integrate_improper(|r| r.powf(-1.5), 1.0, f64::INFINITY, &cfg).unwrap();
        assert!((q.value - 2.0).abs() < 1e-6, "{q:?}");
        // ∫_0^1 ρ^-0.5 = 2
        let q = integrate_improper(|r| r.powf(-0.5), 0.0, 1.0, &cfg).unwrap();
        assert!((q.value - 2.0).abs() < 1e-6, "{q:?}");
    }

    #[test]
    fn log_divergence_is_detected() {
        let cfg = QuadConfig::default();
        assert_eq!(integrate_improper(|r| 1.0 / r, 1.0, f64::INFINITY, &cfg), Err(Divergent));
        assert_eq!(integrate_improper(|r| r.powi(-2), 0.0, 1.0, &cfg), Err(Divergent));
    }
}
