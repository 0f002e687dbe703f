//! The counterexamples and the one-dimensional ergodicity scenario, each as
//! a self-checking experiment.

pub mod circle;

use serde::Serialize;

pub use circle::{run_example_5_3, CircleState, Example53Report};

use crate::error::{Error, Result};
use crate::law::{khasminskii_average, tv_distance, Binning, Start};
use crate::model::{self, Model};
use crate::rates::{tv_decay_curve, TvCurve};
use crate::rng::{stream, Purpose};
use crate::sde::{Dynamics, SimParams, Walker};
use crate::stats::{mean_stderr, wilson, Z95};

#[derive(Debug, Clone, Serialize)]
pub struct Example51Report {
    pub c: f64,
    pub x0: f64,
    pub horizon: f64,
    pub n_paths: usize,
    /// Mean increment per unit time accrued while `X ≥ 1`.
    pub slope: f64,
    pub slope_stderr: f64,
    pub expected_slope: f64,
    pub relative_error: f64,
    /// `(X(horizon) − x0)/horizon`, averaged over paths.
    pub overall_slope: f64,
    /// Fraction of paths whose running minimum stayed above 1.
    pub escape_fraction: f64,
    pub escape_wilson: (f64, f64),
}

/// Drift `−c` on `|x| ≥ 1` against jumps `Π = 2δ₁ + δ₋₁`: the paths drift
/// to `+∞` at speed `1 − c` and no invariant law exists.
pub fn run_example_5_1(c: f64, x0: f64, params: &SimParams) -> Result<Example51Report> {
    params.validate()?;
    let model = model::build("example_5_1", &serde_json::json!({ "c": c }), None, None)?;
    let dynamics = Dynamics::with_overflow(&model, params.truncation, params.overflow)?;
    let horizon = params.horizon;
    let mut incr = Vec::with_capacity(params.n_paths);
    let mut times = Vec::with_capacity(params.n_paths);
    let mut overall = Vec::with_capacity(params.n_paths);
    let mut escaped = 0;
    for i in 0..params.n_paths {
        let mut w = Walker::new(&dynamics, &[x0], stream(params.seed, Purpose::Path, i as u64));
        let (mut prev_t, mut prev_x) = (0.0, x0);
        let (mut gain, mut time_above, mut min) = (0.0, 0.0, x0);
        let ex = w.advance_observed(horizon, params.dt, |t, x| {
            if prev_x >= 1.0 {
                gain += x[0] - prev_x;
                time_above += t - prev_t;
            }
            min = min.min(x[0]);
            prev_t = t;
            prev_x = x[0];
        });
        if let Some(e) = ex {
            return Err(Error::Divergent(format!("path {i} exploded at t = {}", e.time)));
        }
        incr.push(gain);
        times.push(time_above);
        overall.push((w.state()[0] - x0) / horizon);
        if min > 1.0 {
            escaped += 1;
        }
    }
    let total_time: f64 = times.iter().sum();
    let slope = incr.iter().sum::<f64>() / total_time;
    // ratio estimator: per-path residuals gain − slope·time
    let resid: Vec<f64> = incr.iter().zip(&times).map(|(g, t)| g - slope * t).collect();
    let n = params.n_paths as f64;
    let (_, se_resid) = mean_stderr(&resid);
    let slope_stderr = se_resid / (total_time / n);
    let expected = 1.0 - c;
    Ok(Example51Report {
        c,
        x0,
        horizon,
        n_paths: params.n_paths,
        slope,
        slope_stderr,
        expected_slope: expected,
        relative_error: (slope - expected).abs() / expected,
        overall_slope: mean_stderr(&overall).0,
        escape_fraction: escaped as f64 / n,
        escape_wilson: wilson(escaped, params.n_paths, Z95),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Example52Report {
    pub horizon: f64,
    pub n_paths: usize,
    /// Paths from 2 that ever left `[1, ∞)`.
    pub exits_plus: usize,
    /// Paths from −2 that ever left `(−∞, −1]`.
    pub exits_minus: usize,
    pub tv_averages: f64,
    pub mean_plus: f64,
    pub mean_minus: f64,
}

fn count_exits(dynamics: &Dynamics, x0: f64, params: &SimParams, tag: u64) -> Result<usize> {
    let mut exits = 0;
    for i in 0..params.n_paths {
        let mut w = Walker::new(dynamics, &[x0], stream(params.seed, Purpose::Check, (tag << 32) | i as u64));
        let mut left = false;
        let ex = w.advance_observed(params.horizon, params.dt, |_, x| {
            if x[0] * x0.signum() < 1.0 {
                left = true;
            }
        });
        if ex.is_some() {
            return Err(Error::Divergent(format!("path {i} exploded")));
        }
        exits += usize::from(left);
    }
    Ok(exits)
}

/// Two invariant half-lines `[1, ∞)` and `(−∞, −1]`.
pub fn run_example_5_2(params: &SimParams, binning: &Binning) -> Result<Example52Report> {
    params.validate()?;
    let model = model::build("example_5_2", &serde_json::json!({}), None, None)?;
    let dynamics = Dynamics::with_overflow(&model, params.truncation, params.overflow)?;
    let exits_plus = count_exits(&dynamics, 2.0, params, 0)?;
    let exits_minus = count_exits(&dynamics, -2.0, params, 1)?;
    let plus = khasminskii_average(&model, &Start::Point(vec![2.0]), params.horizon, 0.0, params, binning)?;
    let minus = khasminskii_average(&model, &Start::Point(vec![-2.0]), params.horizon, 0.0, params, binning)?;
    Ok(Example52Report {
        horizon: params.horizon,
        n_paths: params.n_paths,
        exits_plus,
        exits_minus,
        tv_averages: tv_distance(&plus, &minus)?,
        mean_plus: plus.mean[0],
        mean_minus: minus.mean[0],
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Prop01Config {
    pub q: f64,
    /// `a(x)/x` is checked on `ring_inner ≤ |x| ≤ 2·ring_inner`.
    pub ring_inner: f64,
    pub x: f64,
    pub y: f64,
    pub t_grid: Vec<f64>,
    pub binning: Binning,
    pub khasminskii_horizon: f64,
    pub khasminskii_paths: usize,
}

impl Default for Prop01Config {
    fn default() -> Self {
        Self {
            q: 1.0,
            ring_inner: 10.0,
            x: 0.0,
            y: 5.0,
            t_grid: (1..=10).map(f64::from).collect(),
            binning: Binning::uniform(-2.0, 8.0, 200).expect("valid binning"),
            khasminskii_horizon: 200.0,
            khasminskii_paths: 1000,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Prop01Report {
    pub tail_moment: f64,
    pub moment_condition: bool,
    pub total_rate: Option<f64>,
    pub nonzero_measure: bool,
    /// `max a(x)/x` on the ring.
    pub drift_ratio_max: f64,
    pub dissipative: bool,
    pub violations: Vec<String>,
    pub curve: Option<TvCurve>,
    pub invariant_mean: Option<f64>,
    pub invariant_variance: Option<f64>,
}

/// Checks the two hypotheses on `Π` and the dissipativity of `a`, then
/// measures the TV decay between `x` and `y` and the invariant moments.
pub fn run_prop_0_1(model: &Model, cfg: &Prop01Config, params: &SimParams) -> Result<Prop01Report> {
    if model.dim() != 1 {
        return Err(Error::Precondition("the scenario is one-dimensional".into()));
    }
    params.validate()?;
    let measure = model.measure();
    let tail_moment = measure.tail_moment(cfg.q)?;
    let moment_condition = tail_moment.is_finite();
    let total_rate = measure.total_rate(params.truncation.max(0.0)).ok();
    let nonzero_measure = !measure.is_zero();
    let drift_ratio_max = (0..=200)
        .flat_map(|k| {
            let r = cfg.ring_inner * (1.0 + k as f64 / 200.0);
            [r, -r]
        })
        .map(|x| model.drift(&[x])[0] / x)
        .fold(f64::NEG_INFINITY, f64::max);
    let dissipative = drift_ratio_max < 0.0;
    let mut violations = Vec::new();
    if !moment_condition {
        violations.push(format!("∫_{{|u|>1}} |u|^{} Π(du) diverges", cfg.q));
    }
    if !nonzero_measure {
        violations.push("Π is the zero measure; the equation is an ODE".into());
    }
    if !dissipative {
        violations.push(format!("a(x)/x reaches {drift_ratio_max} on the ring"));
    }
    let mut report = Prop01Report {
        tail_moment,
        moment_condition,
        total_rate,
        nonzero_measure,
        drift_ratio_max,
        dissipative,
        violations,
        curve: None,
        invariant_mean: None,
        invariant_variance: None,
    };
    if !report.violations.is_empty() {
        return Ok(report);
    }
    let curve = tv_decay_curve(model, &Start::Point(vec![cfg.x]), &Start::Point(vec![cfg.y]), &cfg.t_grid, params, &cfg.binning)?;
    let kp = SimParams { n_paths: cfg.khasminskii_paths, ..params.clone() };
    let avg = khasminskii_average(model, &Start::Point(vec![cfg.x]), cfg.khasminskii_horizon, 0.0, &kp, &cfg.binning)?;
    report.invariant_mean = Some(avg.mean[0]);
    report.invariant_variance = Some(avg.variance()[0]);
    report.curve = Some(curve);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy::{Diffuse, DirectionLaw, LevyMeasure, RadialDensity};
    use crate::model::{ou_jump, split_drift, split_jump, DriftForm};

    #[test]
    fn example_5_1_drifts_away() {
        let params = SimParams::new(0.05, 100.0, 200, 1);
        let r = run_example_5_1(0.5, 5.0, &params).unwrap();
        assert!((r.slope - 0.5).abs() < 4.0 * r.slope_stderr + 0.01, "{r:?}");
        assert!(r.escape_wilson.0 > 0.0);
    }

    #[test]
    fn example_5_2_constraints_and_invariance() {
        for k in 0..=4000 {
            let x = -10.0 + k as f64 * 0.005;
            if x.abs() >= 2.0 {
                assert_eq!(split_drift(x), -x);
                assert_eq!(split_jump(x), x.signum());
            }
            if x.abs() <= 1.0 {
                assert_eq!(split_drift(x), 0.0);
            }
            assert!(x * split_jump(x) >= 0.0);
        }
        let params = SimParams::new(0.02, 20.0, 50, 2);
        let b = Binning::uniform(-20.0, 20.0, 400).unwrap();
        let r = run_example_5_2(&params, &b).unwrap();
        assert_eq!((r.exits_plus, r.exits_minus), (0, 0));
        assert_eq!(r.tv_averages, 1.0);
    }

    #[test]
    fn prop_0_1_violations() {
        let params = SimParams::new(0.02, 10.0, 100, 3);
        let m = model::build("ou_jump", &serde_json::json!({}), None, None).unwrap();
        let r = run_prop_0_1(&m, &Prop01Config::default(), &params).unwrap();
        assert!(!r.nonzero_measure && r.curve.is_none());
        let heavy = LevyMeasure::new(
            1,
            vec![],
            Some(Diffuse {
                radial: RadialDensity::Power { scale: 1.0, exponent: 2.0, lower: 1.0, upper: None },
                directions: DirectionLaw::Uniform,
            }),
        )
        .unwrap();
        let m = model::build("ou_jump", &serde_json::json!({}), Some(heavy), None).unwrap();
        let r = run_prop_0_1(&m, &Prop01Config { q: 2.0, ..Prop01Config::default() }, &params).unwrap();
        assert!(!r.moment_condition);
        let cfg = Prop01Config { q: 0.5, t_grid: vec![0.5, 1.0], khasminskii_horizon: 5.0, khasminskii_paths: 20, ..Prop01Config::default() };
        let r = run_prop_0_1(&m, &cfg, &params).unwrap();
        assert!(r.moment_condition && r.violations.is_empty());
    }

    #[test]
    fn prop_0_1_jump_ou() {
        let params = SimParams::new(0.02, 10.0, 4000, 4);
        let cfg = Prop01Config {
            t_grid: (1..=12).map(|k| 0.5 * k as f64).collect(),
            binning: Binning::uniform(-2.0, 8.0, 100).unwrap(),
            khasminskii_horizon: 50.0,
            khasminskii_paths: 100,
            ..Prop01Config::default()
        };
        let r = run_prop_0_1(&ou_jump(1.0, 1.0, DriftForm::Raw), &cfg, &params).unwrap();
        assert!(r.violations.is_empty());
        assert!(r.curve.unwrap().fit.rate().unwrap() > 0.1);
        assert!((r.invariant_mean.unwrap() - 1.0).abs() < 0.1);
    }
}
