//! Empirical total-variation decay curves and the theoretical rate constants.

use serde::Serialize;

use crate::coupling::TailPoint;
use crate::error::{Error, Result};
use crate::law::{bootstrap_masses, sample_at_times, tv_masses, Binning, Start};
use crate::model::Model;
use crate::rng::{child_seed, stream, Purpose};
use crate::sde::SimParams;
use crate::stats::{mean_stderr, ols};

/// Bootstrap resamples used for the stderr and the noise floor.
pub const N_BOOTSTRAP: usize = 200;

/// Points with `tv ≤ FLOOR_FACTOR · floor` are left out of the fit.
pub const FLOOR_FACTOR: f64 = 3.0;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct TvPoint {
    pub t: f64,
    pub tv: f64,
    pub stderr: f64,
    /// Mean TV between two resamples of the same path set.
    pub floor: f64,
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RateFit {
    /// `tv ≈ c1_emp · exp(−c2_emp · t)`.
    Fitted {
        c1_emp: f64,
        c2_emp: f64,
        c2_stderr: f64,
        /// Two-sided p-value of the regression slope against zero.
        slope_p_value: f64,
        n_points: usize,
    },
    FasterThanResolvable,
}

impl RateFit {
    pub fn rate(&self) -> Option<f64> {
        match self {
            RateFit::Fitted { c2_emp, .. } => Some(*c2_emp),
            RateFit::FasterThanResolvable => None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TvCurve {
    pub points: Vec<TvPoint>,
    pub fit: RateFit,
    pub n_paths: usize,
    pub n_bootstrap: usize,
}

/// Least-squares fit of `ln tv` on `t` over points above `FLOOR_FACTOR·floor`.
pub fn fit_decay(points: &[TvPoint]) -> RateFit {
    let (ts, ls): (Vec<f64>, Vec<f64>) = points
        .iter()
        .filter(|p| p.tv > FLOOR_FACTOR * p.floor && p.tv > 0.0)
        .map(|p| (p.t, p.tv.ln()))
        .unzip();
    if ts.len() < 2 {
        return RateFit::FasterThanResolvable;
    }
    let fit = ols(&ts, &ls);
    RateFit::Fitted {
        c1_emp: fit.intercept.exp(),
        c2_emp: -fit.slope,
        c2_stderr: fit.slope_stderr,
        slope_p_value: fit.p_value(0.0),
        n_points: fit.n,
    }
}

/// `d_TV(P_x^t, P_y^t)` on `t_grid` from `params.n_paths` paths per start.
///
/// The two path sets use independent streams. The stderr is the bootstrap
/// spread of the TV estimate; the floor is the bootstrap mean of the TV
/// between two resamples of one set, i.e. the value an estimate takes when
/// the two laws coincide.
pub fn tv_decay_curve(
    model: &Model,
    x: &Start,
    y: &Start,
    t_grid: &[f64],
    params: &SimParams,
    binning: &Binning,
) -> Result<TvCurve> {
    binning.validate()?;
    if t_grid.is_empty() || t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Precondition("t_grid must be nonempty and strictly increasing".into()));
    }
    let px = SimParams { seed: child_seed(params.seed, Purpose::Path, 0), ..params.clone() };
    let py = SimParams { seed: child_seed(params.seed, Purpose::Path, 1), ..params.clone() };
    let sx = sample_at_times(model, x, t_grid, &px)?;
    let sy = sample_at_times(model, y, t_grid, &py)?;
    let n_cells = binning.n_cells();
    let mut points = Vec::with_capacity(t_grid.len());
    for (k, &t) in t_grid.iter().enumerate() {
        let cx: Vec<usize> = sx[k].iter().map(|s| binning.cell_of(s)).collect();
        let cy: Vec<usize> = sy[k].iter().map(|s| binning.cell_of(s)).collect();
        let mx = bootstrap_masses_full(&cx, n_cells);
        let my = bootstrap_masses_full(&cy, n_cells);
        let tv = tv_masses(&mx, &my);
        let mut rng = stream(params.seed, Purpose::Bootstrap, k as u64);
        let mut between = Vec::with_capacity(N_BOOTSTRAP);
        let mut within = Vec::with_capacity(N_BOOTSTRAP);
        for _ in 0..N_BOOTSTRAP {
            let bx = bootstrap_masses(&cx, n_cells, &mut rng);
            let by = bootstrap_masses(&cy, n_cells, &mut rng);
            between.push(tv_masses(&bx, &by));
            let bx2 = bootstrap_masses(&cx, n_cells, &mut rng);
            within.push(tv_masses(&bx, &bx2));
        }
        let (mean_between, _) = mean_stderr(&between);
        let stderr = (between.iter().map(|v| (v - mean_between).powi(2)).sum::<f64>() / (N_BOOTSTRAP - 1) as f64).sqrt();
        let (floor, _) = mean_stderr(&within);
        points.push(TvPoint { t, tv, stderr, floor });
    }
    let fit = fit_decay(&points);
    Ok(TvCurve { points, fit, n_paths: params.n_paths, n_bootstrap: N_BOOTSTRAP })
}

fn bootstrap_masses_full(cells: &[usize], n_cells: usize) -> Vec<f64> {
    let mut m = vec![0.0; n_cells + 1];
    let w = 1.0 / cells.len() as f64;
    for &c in cells {
        m[c] += w;
    }
    m
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct InequalityRow {
    pub t: f64,
    pub tv: f64,
    pub tail: f64,
    pub slack: f64,
    pub holds: bool,
}

/// `d_TV(t) ≤ P̂(Q* > t) + 2(stderr_TV + stderr_tail)` at every common `t`.
pub fn coupling_inequality(curve: &TvCurve, tail: &[TailPoint]) -> Vec<InequalityRow> {
    curve
        .points
        .iter()
        .filter_map(|p| {
            let q = tail.iter().find(|q| q.t == p.t)?;
            let slack = 2.0 * (p.stderr + q.stderr);
            Some(InequalityRow { t: p.t, tv: p.tv, tail: q.tail, slack, holds: p.tv <= q.tail + slack })
        })
        .collect()
}

/// Exponent of `(1−δ)` in the bracket `[1 − (1−δ)^e]⁻¹` of `C̃₁`. Two
/// displays disagree (1/4 vs 1/2); 1/4 gives the larger constant.
pub const BRACKET_EXPONENT: f64 = 0.25;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct RateBound {
    pub d: f64,
    pub p: f64,
    pub c1_tilde: f64,
    pub c1: f64,
    pub c2: f64,
    pub bracket_exponent: f64,
    /// `C̃₁` with the alternative exponent 1/2, for comparison.
    pub c1_tilde_half: f64,
}

impl RateBound {
    /// `C₁ (φ(µ) + 1) e^{−C₂ t}`.
    pub fn tv_bound(&self, phi_mu: f64, t: f64) -> f64 {
        self.c1 * (phi_mu + 1.0) * (-self.c2 * t).exp()
    }
}

/// Rate constants of the coupling argument:
/// `D = (1−c)T/2 + ln(4γ/α + 4 sup φ)`, `p = max(1, −2D/ln(1−δ))`,
/// `C₂ = (1−c)/(4p)`, `C̃₁ = max(γ/α, 1)·2e^{(1−c)T/2}·[1−(1−δ)^{1/4}]⁻¹`,
/// `C₁ = 2C̃₁`.
pub fn theoretical_rate_bound(alpha: f64, gamma: f64, c: f64, t: f64, delta: f64, sup_phi: f64) -> Result<RateBound> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Precondition(format!("δ must lie in (0, 1), got {delta}")));
    }
    if !(c > 0.0 && c < 1.0) {
        return Err(Error::Precondition(format!("c must lie in (0, 1), got {c}")));
    }
    if !(alpha > 0.0 && gamma > 0.0 && t > 0.0 && sup_phi > 0.0) {
        return Err(Error::Precondition("α, γ, T and sup φ must be positive".into()));
    }
    let d = (1.0 - c) / 2.0 * t + (4.0 * gamma / alpha + 4.0 * sup_phi).ln();
    let p = f64::max(1.0, -2.0 * d / (1.0 - delta).ln());
    let c2 = (1.0 - c) / (4.0 * p);
    let lead = f64::max(gamma / alpha, 1.0) * 2.0 * ((1.0 - c) * t / 2.0).exp();
    let c1_tilde = lead / (1.0 - (1.0 - delta).powf(BRACKET_EXPONENT));
    let c1_tilde_half = lead / (1.0 - (1.0 - delta).sqrt());
    Ok(RateBound { d, p, c1_tilde, c1: 2.0 * c1_tilde, c2, bracket_exponent: BRACKET_EXPONENT, c1_tilde_half })
}
