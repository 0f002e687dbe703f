//! Jump response `Δ`, its normalised form `Δ̂`, the stochastic exponent
//! `ℰ_0^t` along a simulated path and the jump influence vectors
//! `ℰ_τ^t Δ(X(τ−), p(τ))`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Case, Model};
use crate::sde::{Dynamics, Trajectory};

/// Condition number above which a matrix is treated as singular.
pub const CONDITION_CUTOFF: f64 = 1e12;

/// Spectral condition number; `+∞` for a singular matrix.
pub fn condition_number(a: &DMatrix<f64>) -> f64 {
    let sv = a.singular_values();
    let max = sv.max();
    let min = sv.min();
    if min <= 0.0 || !min.is_finite() {
        f64::INFINITY
    } else {
        max / min
    }
}

/// `ã(x)`: the drift of the equation written with every jump uncompensated.
pub fn tilde_drift(model: &Model, x: &[f64]) -> Result<Vec<f64>> {
    let dynamics = Dynamics::drift_only(model, 0.0)?;
    let mut out = vec![0.0; model.dim()];
    dynamics.effective_drift_into(x, &mut out);
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::Divergent("compensator of ã does not converge".into()));
    }
    Ok(out)
}

/// `Δ(x,u)`: `a(x+u) − a(x)` in case B; in case A
/// `[ã(x + c(x,u)) − ã(x)] − ∇_x c(x,u)·ã(x)`.
pub fn delta(model: &Model, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
    match model.case() {
        Case::B => {
            let y: Vec<f64> = x.iter().zip(u).map(|(a, b)| a + b).collect();
            let ay = model.drift(&y);
            let ax = model.drift(x);
            Ok(ay.iter().zip(&ax).map(|(p, q)| p - q).collect())
        }
        Case::A => {
            let dynamics = Dynamics::drift_only(model, 0.0)?;
            delta_with(&dynamics, x, u)
        }
    }
}

/// Case-A `Δ` with a prebuilt `ã`.
fn delta_with(dynamics: &Dynamics, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
    let model = dynamics.model();
    let m = model.dim();
    let c = model.jump(x, u);
    let y: Vec<f64> = x.iter().zip(&c).map(|(a, b)| a + b).collect();
    let mut ax = vec![0.0; m];
    let mut ay = vec![0.0; m];
    dynamics.effective_drift_into(x, &mut ax);
    dynamics.effective_drift_into(&y, &mut ay);
    if ax.iter().chain(&ay).any(|v| !v.is_finite()) {
        return Err(Error::Divergent("compensator of ã does not converge".into()));
    }
    let jc = model.jump_jacobian(x, u);
    let correction = jc * DVector::from_column_slice(&ax);
    Ok((0..m).map(|i| ay[i] - ax[i] - correction[i]).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum HatDelta {
    Value { value: Vec<f64> },
    /// `I + ∇_x c(x,u)` is singular or has condition number above the cutoff.
    NotInvertible { condition: f64 },
}

impl HatDelta {
    pub fn value(&self) -> Option<&[f64]> {
        match self {
            HatDelta::Value { value } => Some(value),
            HatDelta::NotInvertible { .. } => None,
        }
    }
}

/// `Δ̂(x,u) = [I + ∇_x c(x,u)]⁻¹ Δ(x,u)`.
pub fn hat_delta(model: &Model, x: &[f64], u: &[f64]) -> Result<HatDelta> {
    let d = delta(model, x, u)?;
    Ok(normalise(&jump_matrix(model, x, u), d))
}

fn normalise(jm: &DMatrix<f64>, d: Vec<f64>) -> HatDelta {
    let condition = condition_number(jm);
    if condition > CONDITION_CUTOFF {
        return HatDelta::NotInvertible { condition };
    }
    match jm.clone().lu().solve(&DVector::from_vec(d)) {
        Some(v) => HatDelta::Value { value: v.as_slice().to_vec() },
        None => HatDelta::NotInvertible { condition: f64::INFINITY },
    }
}

/// `I + ∇_x c(x,u)`.
pub fn jump_matrix(model: &Model, x: &[f64], u: &[f64]) -> DMatrix<f64> {
    let m = model.dim();
    DMatrix::identity(m, m) + model.jump_jacobian(x, u)
}

/// `Δ̂` for a case-A model with the caller's `ã` cache.
pub(crate) fn hat_delta_with(dynamics: &Dynamics, x: &[f64], u: &[f64]) -> Result<HatDelta> {
    let model = dynamics.model();
    let d = match model.case() {
        Case::B => delta(model, x, u)?,
        Case::A => delta_with(dynamics, x, u)?,
    };
    Ok(normalise(&jump_matrix(model, x, u), d))
}

/// `ℰ_0^t` at every skeleton time of a trajectory.
#[derive(Debug, Clone, Serialize)]
pub struct ExponentLog {
    pub times: Vec<f64>,
    #[serde(serialize_with = "ser_matrices")]
    pub values: Vec<DMatrix<f64>>,
    /// `(ℰ_0^{τ−}, ℰ_0^{τ})` for every jump, in order.
    #[serde(serialize_with = "ser_pairs")]
    pub jumps: Vec<(DMatrix<f64>, DMatrix<f64>)>,
    /// Skeleton index at which propagation started (`ℰ` is the identity there).
    pub start: usize,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn ser_matrices<S: serde::Serializer>(v: &[DMatrix<f64>], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(rows))
}

fn ser_pairs<S: serde::Serializer>(
    v: &[(DMatrix<f64>, DMatrix<f64>)],
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(|(a, b)| (rows(a), rows(b))))
}

impl ExponentLog {
    /// `ℰ_0^t` for any `t` in the propagated range, integrating from the
    /// last skeleton point at or before `t`.
    pub fn at(&self, model: &Model, traj: &Trajectory, t: f64) -> Result<DMatrix<f64>> {
        let idx = self.times.partition_point(|&s| s <= t);
        if idx == 0 {
            return Err(Error::Precondition(format!("time {t} precedes the start of the exponent log")));
        }
        let i = idx - 1;
        let s = self.times[i];
        let e = self.values[i].clone();
        if t <= s {
            return Ok(e);
        }
        let dynamics = Dynamics::drift_only(model, traj.truncation)?;
        let x = traj.skeleton[self.start + i].1.clone();
        Ok(coupled_rk4(&dynamics, x, e, t - s).1)
    }
}

/// One RK4 step of `(x, ℰ)' = (b(x), ∇b(x)·ℰ)`.
fn coupled_rk4(dynamics: &Dynamics, x: Vec<f64>, e: DMatrix<f64>, h: f64) -> (Vec<f64>, DMatrix<f64>) {
    let m = x.len();
    let f = |x: &[f64], e: &DMatrix<f64>| {
        let mut b = vec![0.0; m];
        dynamics.effective_drift_into(x, &mut b);
        let j = dynamics.effective_drift_jacobian(x);
        (b, j * e)
    };
    let shift = |x: &[f64], k: &[f64], s: f64| -> Vec<f64> { x.iter().zip(k).map(|(a, b)| a + s * b).collect() };
    let (k1, l1) = f(&x, &e);
    let (k2, l2) = f(&shift(&x, &k1, 0.5 * h), &(&e + &l1 * (0.5 * h)));
    let (k3, l3) = f(&shift(&x, &k2, 0.5 * h), &(&e + &l2 * (0.5 * h)));
    let (k4, l4) = f(&shift(&x, &k3, h), &(&e + &l3 * h));
    let xn = (0..m).map(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect();
    let en = e + (l1 + l2 * 2.0 + l3 * 2.0 + l4) * (h / 6.0);
    (xn, en)
}

/// Propagate `ℰ_0^t` along `traj`.
pub fn propagate_exponent(model: &Model, traj: &Trajectory) -> Result<ExponentLog> {
    propagate_exponent_from(model, traj, 0)
}

/// Propagate `ℰ_s^t` with `s` the time of skeleton point `start`.
pub fn propagate_exponent_from(model: &Model, traj: &Trajectory, start: usize) -> Result<ExponentLog> {
    let m = model.dim();
    if traj.x0.len() != m {
        return Err(Error::Precondition("trajectory and model dimensions differ".into()));
    }
    if start >= traj.skeleton.len() {
        return Err(Error::Precondition(format!("start index {start} beyond the skeleton")));
    }
    let dynamics = Dynamics::drift_only(model, traj.truncation)?;
    let s0 = traj.skeleton[start].0;
    let mut jump_idx = traj.jumps.partition_point(|j| j.time < s0);
    // A jump at exactly s0 whose post state is the starting point is already behind us.
    if start > 0 && traj.skeleton[start - 1].0 == s0 && jump_idx < traj.jumps.len() && traj.jumps[jump_idx].time == s0 {
        jump_idx += 1;
    }
    let mut e = DMatrix::identity(m, m);
    let mut times = vec![s0];
    let mut values = vec![e.clone()];
    let mut jumps = Vec::new();
    for w in traj.skeleton[start..].windows(2) {
        let (t0, ref x0) = w[0];
        let (t1, _) = w[1];
        if t1 == t0 {
            let rec = &traj.jumps[jump_idx];
            debug_assert_eq!(rec.time, t0);
            jump_idx += 1;
            let before = e.clone();
            e = jump_matrix(model, &rec.pre_state, &rec.mark) * &e;
            jumps.push((before, e.clone()));
        } else {
            e = coupled_rk4(&dynamics, x0.clone(), e, t1 - t0).1;
        }
        times.push(t1);
        values.push(e.clone());
    }
    Ok(ExponentLog { times, values, jumps, start })
}

/// Influence vectors `ℰ_0^t (ℰ_0^τ)⁻¹ Δ(X(τ−), p(τ))` for the jumps before `t`.
#[derive(Debug, Clone, Default, Serialize)]
pub struct InfluenceVectors {
    pub vectors: Vec<Vec<f64>>,
    /// Jumps skipped because `ℰ_0^τ` was numerically singular.
    pub excluded: usize,
}

pub fn jump_influence_vectors(
    model: &Model,
    traj: &Trajectory,
    log: &ExponentLog,
    t: f64,
) -> Result<InfluenceVectors> {
    if t > traj.horizon() + 1e-12 {
        return Err(Error::Precondition(format!("time {t} beyond the trajectory horizon {}", traj.horizon())));
    }
    if log.start != 0 {
        return Err(Error::Precondition("influence vectors need a log started at time 0".into()));
    }
    let et = log.at(model, traj, t)?;
    let dynamics = Dynamics::drift_only(model, 0.0)?;
    let mut out = InfluenceVectors::default();
    for (rec, (_, post)) in traj.jumps.iter().zip(&log.jumps) {
        if rec.time >= t {
            break;
        }
        if condition_number(post) > CONDITION_CUTOFF {
            out.excluded += 1;
            continue;
        }
        let d = match model.case() {
            Case::B => delta(model, &rec.pre_state, &rec.mark)?,
            Case::A => delta_with(&dynamics, &rec.pre_state, &rec.mark)?,
        };
        let Some(y) = post.clone().lu().solve(&DVector::from_vec(d)) else {
            out.excluded += 1;
            continue;
        };
        out.vectors.push((&et * y).as_slice().to_vec());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy::{JumpEvent, LevyMeasure, PointMeasureRealization};
    use crate::model::{self, ou_jump, DriftForm};
    use crate::sde::simulate_with_events;
    use serde_json::json;

    fn forced(model: &Model, x0: &[f64], horizon: f64, events: &[(f64, Vec<f64>)]) -> Trajectory {
        let dynamics = Dynamics::drift_only(model, 0.0).unwrap();
        let events = events.iter().map(|(t, u)| JumpEvent { time: *t, mark: u.clone() }).collect();
        let real = PointMeasureRealization::with_events(horizon, events);
        simulate_with_events(&dynamics, x0, 1e-3, &real)
    }

    #[test]
    fn delta_examples() {
        let m = ou_jump(1.0, 1.0, DriftForm::Compensated);
        for x in [-1.0, 0.0, 3.0] {
            assert_eq!(delta(&m, &[x], &[1.0]).unwrap(), vec![-1.0]);
        }
        let a = json!({"matrix": [[1.0, 2.0], [-0.5, 3.0]]});
        let m = model::build("linear_nd", &a, Some(LevyMeasure::empty(2)), None).unwrap();
        let d = delta(&m, &[0.3, -1.0], &[1.0, 2.0]).unwrap();
        assert!((d[0] - 5.0).abs() < 1e-14 && (d[1] - 5.5).abs() < 1e-14);
        // c = x·u, a = −x, no compensator: Δ = 0
        let m = model::build(
            "multiplicative_1d",
            &json!({"drift": [0.0, -1.0], "chi": [0.0, 1.0]}),
            Some(LevyMeasure::empty(1)),
            None,
        )
        .unwrap();
        for (x, u) in [(1.0, 0.5), (-2.0, 3.0)] {
            assert!(delta(&m, &[x], &[u]).unwrap()[0].abs() < 1e-14);
        }
    }

    #[test]
    fn case_a_with_unit_jump_matches_case_b() {
        let measure = LevyMeasure::atomic(&[(vec![1.0], 1.0), (vec![-0.5], 2.0)]).unwrap();
        let a = model::build(
            "multiplicative_1d",
            &json!({"drift": [0.5, -1.0, 0.0, -0.3], "chi": [1.0]}),
            Some(measure.clone()),
            None,
        )
        .unwrap();
        let b = model::build("poly1d", &json!({"coeffs": [0.5, -1.0, 0.0, -0.3]}), Some(measure), None).unwrap();
        for x in [-1.5, 0.0, 0.7] {
            for u in [1.0, -0.5, 0.3] {
                let da = delta(&a, &[x], &[u]).unwrap()[0];
                let db = delta(&b, &[x], &[u]).unwrap()[0];
                assert!((da - db).abs() < 1e-12, "{x} {u}: {da} vs {db}");
            }
        }
    }

    #[test]
    fn hat_delta_examples() {
        let m = ou_jump(1.0, 1.0, DriftForm::Compensated);
        let v = hat_delta(&m, &[0.4], &[1.0]).unwrap().value().unwrap()[0];
        assert!((v + 1.0).abs() < 1e-12);
        // c = x·u: ∇_x c = u
        let m = model::build(
            "multiplicative_1d",
            &json!({"drift": [0.0, -1.0], "chi": [0.0, 1.0]}),
            Some(LevyMeasure::empty(1)),
            None,
        )
        .unwrap();
        assert!(matches!(hat_delta(&m, &[2.0], &[-1.0]).unwrap(), HatDelta::NotInvertible { .. }));
        // a = −x², c = x·u at x = u = 1: ∇_x c = 1 and Δ = −4 + 1 + 1 = −2
        let m = model::build(
            "multiplicative_1d",
            &json!({"drift": [0.0, 0.0, -1.0], "chi": [0.0, 1.0]}),
            Some(LevyMeasure::empty(1)),
            None,
        )
        .unwrap();
        assert_eq!(delta(&m, &[1.0], &[1.0]).unwrap(), vec![-2.0]);
        let v = hat_delta(&m, &[1.0], &[1.0]).unwrap();
        assert!((v.value().unwrap()[0] + 1.0).abs() < 1e-14);
    }

    #[test]
    fn scalar_exponent() {
        let m = model::build("ou_jump", &json!({}), None, None).unwrap();
        let traj = forced(&m, &[1.0], 1.0, &[]);
        let log = propagate_exponent(&m, &traj).unwrap();
        assert_eq!(log.values[0], DMatrix::identity(1, 1));
        assert!((log.values.last().unwrap()[(0, 0)] - (-1.0f64).exp()).abs() < 1e-6);
    }

    #[test]
    fn matrix_exponential() {
        let a = json!({"matrix": [[-1.0, 2.0], [-0.5, 0.3]]});
        let m = model::build("linear_nd", &a, Some(LevyMeasure::empty(2)), None).unwrap();
        let traj = forced(&m, &[1.0, 0.0], 1.0, &[]);
        let log = propagate_exponent(&m, &traj).unwrap();
        let mat = DMatrix::from_row_slice(2, 2, &[-1.0, 2.0, -0.5, 0.3]);
        // Taylor series oracle
        let mut term = DMatrix::<f64>::identity(2, 2);
        let mut exp = term.clone();
        for k in 1..40 {
            term = &term * &mat / k as f64;
            exp += &term;
        }
        let got = log.values.last().unwrap();
        assert!((got - exp).amax() < 1e-6);
    }

    #[test]
    fn jump_update_is_multiplicative() {
        // zero drift, c = x·u with u = 1: ∇_x c = 1, so ℰ doubles
        let m = model::build(
            "multiplicative_1d",
            &json!({"drift": [0.0], "chi": [0.0, 1.0]}),
            Some(LevyMeasure::atomic(&[(vec![1.0], 1.0)]).unwrap()),
            Some(DriftForm::Raw),
        )
        .unwrap();
        let traj = forced(&m, &[1.0], 1.0, &[(0.5, vec![1.0])]);
        let log = propagate_exponent(&m, &traj).unwrap();
        assert_eq!(log.jumps.len(), 1);
        assert_eq!(log.jumps[0].0[(0, 0)], 1.0);
        assert_eq!(log.jumps[0].1[(0, 0)], 2.0);
        assert_eq!(log.values.last().unwrap()[(0, 0)], 2.0);
    }

    #[test]
    fn influence_vectors() {
        let m = ou_jump(1.0, 1.0, DriftForm::Compensated);
        let traj = forced(&m, &[0.0], 1.0, &[(0.5, vec![1.0])]);
        let log = propagate_exponent(&m, &traj).unwrap();
        let iv = jump_influence_vectors(&m, &traj, &log, 1.0).unwrap();
        assert_eq!(iv.vectors.len(), 1);
        assert!((iv.vectors[0][0] + (-0.5f64).exp()).abs() < 1e-6, "{:?}", iv.vectors);
        assert!(jump_influence_vectors(&m, &traj, &log, 0.4).unwrap().vectors.is_empty());
        let traj = forced(&m, &[0.0], 1.0, &[(0.2, vec![1.0]), (0.7, vec![1.0])]);
        let log = propagate_exponent(&m, &traj).unwrap();
        let iv = jump_influence_vectors(&m, &traj, &log, 1.0).unwrap();
        assert_eq!(iv.vectors.len(), 2);
        assert!(iv.vectors.iter().all(|v| v[0] < 0.0));
        // off-grid time
        let e = log.at(&m, &traj, 0.8333).unwrap()[(0, 0)];
        assert!((e - (-0.8333f64).exp()).abs() < 1e-8);
    }

    #[test]
    fn cocycle_on_jump_free_stretch() {
        let m = model::build("poly1d", &json!({"coeffs": [0.2, -1.0, 0.0, -0.5]}), None, None).unwrap();
        let traj = forced(&m, &[1.3], 2.0, &[]);
        let full = propagate_exponent(&m, &traj).unwrap();
        let s = traj.skeleton.len() / 3;
        let tail = propagate_exponent_from(&m, &traj, s).unwrap();
        let composed = tail.values.last().unwrap() * &full.values[s];
        assert!((composed - full.values.last().unwrap()).amax() < 1e-8);
    }
}
