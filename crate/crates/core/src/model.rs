//! Coefficients of the jump SDE and the model registry.
//!
//! A [`Model`] bundles a drift `a`, a jump coefficient `c` (case A) or the
//! additive convention `c(x, u) = u` (case B), a Lévy measure and the drift
//! form. In the compensated form the equation reads
//!
//! ```text
//! dX = a(X) dt + ∫_{‖u‖≤1} c(X−, u) ν̃(dt, du) + ∫_{‖u‖>1} c(X−, u) ν(dt, du)
//! ```
//!
//! In the raw form `a` is the drift between jumps and every jump enters
//! uncompensated, `dX = a(X) dt + ∫ c(X−, u) ν(dt, du)`; this needs
//! `∫_{‖u‖≤1} ‖c(x, u)‖ Π(du) < ∞` and is the same equation with the drift
//! shifted by the small-jump mean.

use std::fmt::Debug;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::levy::{norm, LevyMeasure};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Case {
    /// State-dependent moderate jump coefficient.
    A,
    /// Additive noise, `c(x, u) = u`.
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftForm {
    #[default]
    Compensated,
    Raw,
}

/// Drift and jump coefficients with their state Jacobians.
pub trait Coefficients: Send + Sync + Debug {
    fn state_dim(&self) -> usize;
    fn noise_dim(&self) -> usize;
    fn case(&self) -> Case;
    fn drift(&self, x: &[f64], out: &mut [f64]);
    fn drift_jacobian(&self, x: &[f64]) -> DMatrix<f64>;

    /// `c(x, u)`. Only consulted in case A.
    fn jump(&self, _x: &[f64], u: &[f64], out: &mut [f64]) {
        out.copy_from_slice(u);
    }

    /// `∇_x c(x, u)`; zero in case B.
    fn jump_jacobian(&self, _x: &[f64], _u: &[f64]) -> DMatrix<f64> {
        let m = self.state_dim();
        DMatrix::zeros(m, m)
    }

    /// `ψ*(x)` with `‖c(x, u)‖ ≤ ψ*(x)‖u‖`.
    fn growth_bound(&self, _x: &[f64]) -> f64 {
        1.0
    }
}

/// A fully specified jump SDE.
#[derive(Debug, Clone)]
pub struct Model {
    coeffs: Arc<dyn Coefficients>,
    measure: LevyMeasure,
    form: DriftForm,
    name: String,
    params: serde_json::Value,
}

impl Model {
    pub fn new(coeffs: Arc<dyn Coefficients>, measure: LevyMeasure, form: DriftForm) -> Result<Self> {
        let m = coeffs.state_dim();
        let d = coeffs.noise_dim();
        if m == 0 || d == 0 {
            return Err(Error::InvalidModel("dimensions must be positive".into()));
        }
        if measure.dim() != d {
            return Err(Error::InvalidModel(format!(
                "Lévy measure lives in R^{} but the noise dimension is {d}",
                measure.dim()
            )));
        }
        match coeffs.case() {
            Case::B => {
                if m != d {
                    return Err(Error::InvalidModel("case B requires m = d".into()));
                }
            }
            Case::A => spot_check_growth(coeffs.as_ref(), &measure)?,
        }
        Ok(Self { coeffs, measure, form, name: "custom".into(), params: serde_json::Value::Null })
    }

    pub fn named(mut self, name: impl Into<String>, params: serde_json::Value) -> Self {
        self.name = name.into();
        self.params = params;
        self
    }

    pub fn coefficients(&self) -> &dyn Coefficients {
        self.coeffs.as_ref()
    }

    pub fn measure(&self) -> &LevyMeasure {
        &self.measure
    }

    pub fn form(&self) -> DriftForm {
        self.form
    }

    pub fn case(&self) -> Case {
        self.coeffs.case()
    }

    pub fn dim(&self) -> usize {
        self.coeffs.state_dim()
    }

    pub fn noise_dim(&self) -> usize {
        self.coeffs.noise_dim()
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn params(&self) -> &serde_json::Value {
        &self.params
    }

    /// Same coefficients, different measure.
    pub fn with_measure(&self, measure: LevyMeasure) -> Result<Self> {
        Ok(Self::new(self.coeffs.clone(), measure, self.form)?.named(self.name.clone(), self.params.clone()))
    }

    /// Same coefficients and measure, different drift form.
    pub fn with_form(&self, form: DriftForm) -> Self {
        Self { form, ..self.clone() }
    }

    pub fn drift(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.coeffs.drift(x, &mut out);
        out
    }

    /// `c(x, u)` for either case.
    pub fn jump(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.jump_into(x, u, &mut out);
        out
    }

    pub(crate) fn jump_into(&self, x: &[f64], u: &[f64], out: &mut [f64]) {
        match self.case() {
            Case::B => out.copy_from_slice(u),
            Case::A => self.coeffs.jump(x, u, out),
        }
    }

    pub fn jump_jacobian(&self, x: &[f64], u: &[f64]) -> DMatrix<f64> {
        match self.case() {
            Case::B => DMatrix::zeros(self.dim(), self.dim()),
            Case::A => self.coeffs.jump_jacobian(x, u),
        }
    }
}

fn spot_check_growth(coeffs: &dyn Coefficients, measure: &LevyMeasure) -> Result<()> {
    let m = coeffs.state_dim();
    let d = coeffs.noise_dim();
    let mut rng = crate::rng::stream(0xC0FF_EE, crate::rng::Purpose::Check, 0);
    let mut out = vec![0.0; m];
    let mut marks: Vec<Vec<f64>> = measure.atoms().iter().map(|a| a.mark.clone()).collect();
    for _ in 0..16 {
        marks.push((0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect());
    }
    for _ in 0..32 {
        let x: Vec<f64> = (0..m).map(|_| 3.0 * rng.sample::<f64, _>(StandardNormal)).collect();
        let bound = coeffs.growth_bound(&x);
        for u in &marks {
            coeffs.jump(&x, u, &mut out);
            let lhs = norm(&out);
            let rhs = bound * norm(u);
            if lhs > rhs * (1.0 + 1e-9) + 1e-12 {
                return Err(Error::InvalidModel(format!(
                    "‖c(x,u)‖ = {lhs} exceeds ψ*(x)‖u‖ = {rhs} at x = {x:?}, u = {u:?}"
                )));
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Registered coefficient families.

/// `a(x) = M x`, case B. `ou_jump` is the scalar multiple `M = −θ I`.
#[derive(Debug, Clone)]
pub struct LinearDrift {
    pub matrix: DMatrix<f64>,
}

impl Coefficients for LinearDrift {
    fn state_dim(&self) -> usize {
        self.matrix.nrows()
    }
    fn noise_dim(&self) -> usize {
        self.matrix.nrows()
    }
    fn case(&self) -> Case {
        Case::B
    }
    fn drift(&self, x: &[f64], out: &mut [f64]) {
        let m = self.matrix.nrows();
        for i in 0..m {
            let mut s = 0.0;
            for j in 0..m {
                s += self.matrix[(i, j)] * x[j];
            }
            out[i] = s;
        }
    }
    fn drift_jacobian(&self, _x: &[f64]) -> DMatrix<f64> {
        self.matrix.clone()
    }
}

fn poly_eval(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

fn poly_deriv(coeffs: &[f64], x: f64) -> f64 {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .rev()
        .fold(0.0, |acc, (k, c)| acc * x + k as f64 * c)
}

/// Scalar polynomial drift `a(x) = Σ coeffs[k] x^k`, case B.
#[derive(Debug, Clone)]
pub struct Poly1d {
    pub coeffs: Vec<f64>,
}

impl Coefficients for Poly1d {
    fn state_dim(&self) -> usize {
        1
    }
    fn noise_dim(&self) -> usize {
        1
    }
    fn case(&self) -> Case {
        Case::B
    }
    fn drift(&self, x: &[f64], out: &mut [f64]) {
        out[0] = poly_eval(&self.coeffs, x[0]);
    }
    fn drift_jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, poly_deriv(&self.coeffs, x[0]))
    }
}

/// Case-A scalar model `a(x) = drift(x)`, `c(x, u) = χ(x) u`, both
/// polynomial.
#[derive(Debug, Clone)]
pub struct Multiplicative1d {
    pub drift: Vec<f64>,
    pub chi: Vec<f64>,
}

impl Coefficients for Multiplicative1d {
    fn state_dim(&self) -> usize {
        1
    }
    fn noise_dim(&self) -> usize {
        1
    }
    fn case(&self) -> Case {
        Case::A
    }
    fn drift(&self, x: &[f64], out: &mut [f64]) {
        out[0] = poly_eval(&self.drift, x[0]);
    }
    fn drift_jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, poly_deriv(&self.drift, x[0]))
    }
    fn jump(&self, x: &[f64], u: &[f64], out: &mut [f64]) {
        out[0] = poly_eval(&self.chi, x[0]) * u[0];
    }
    fn jump_jacobian(&self, x: &[f64], u: &[f64]) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, poly_deriv(&self.chi, x[0]) * u[0])
    }
    fn growth_bound(&self, x: &[f64]) -> f64 {
        poly_eval(&self.chi, x[0]).abs()
    }
}

/// `h(x) = x²(3 − 2|x|)` on `|x| ≤ 1`, `1` outside: the C¹ ramp used by
/// the drift-to-the-right counterexample.
pub fn ramp(x: f64) -> f64 {
    let a = x.abs();
    if a >= 1.0 {
        1.0
    } else {
        x * x * (3.0 - 2.0 * a)
    }
}

pub fn ramp_deriv(x: f64) -> f64 {
    let a = x.abs();
    if a >= 1.0 {
        0.0
    } else {
        6.0 * x - 6.0 * x * a
    }
}

/// Scalar case-B model with `a(x) = −c·h(x)`: constant drift `−c` for
/// `|x| ≥ 1`.
#[derive(Debug, Clone)]
pub struct ConstantPull {
    pub c: f64,
}

impl Coefficients for ConstantPull {
    fn state_dim(&self) -> usize {
        1
    }
    fn noise_dim(&self) -> usize {
        1
    }
    fn case(&self) -> Case {
        Case::B
    }
    fn drift(&self, x: &[f64], out: &mut [f64]) {
        out[0] = -self.c * ramp(x[0]);
    }
    fn drift_jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, -self.c * ramp_deriv(x[0]))
    }
}

/// Odd drift: `0` on `|x| ≤ 1`, `−x` on `|x| ≥ 2`, cubic Hermite between.
pub fn split_drift(x: f64) -> f64 {
    let a = x.abs();
    if a <= 1.0 {
        0.0
    } else if a >= 2.0 {
        -x
    } else {
        let t = a - 1.0;
        x.signum() * t * t * (3.0 * t - 5.0)
    }
}

pub fn split_drift_deriv(x: f64) -> f64 {
    let a = x.abs();
    if a <= 1.0 {
        0.0
    } else if a >= 2.0 {
        -1.0
    } else {
        let t = a - 1.0;
        9.0 * t * t - 10.0 * t
    }
}

/// Odd smoothstep jump size: `s(x/2)` with `s(t) = 3t² − 2t³` on
/// `0 ≤ x ≤ 2`, `sign x` beyond.
pub fn split_jump(x: f64) -> f64 {
    let a = x.abs();
    if a >= 2.0 {
        x.signum()
    } else {
        let t = a / 2.0;
        x.signum() * t * t * (3.0 - 2.0 * t)
    }
}

pub fn split_jump_deriv(x: f64) -> f64 {
    let a = x.abs();
    if a >= 2.0 {
        0.0
    } else {
        let t = a / 2.0;
        3.0 * t * (1.0 - t)
    }
}

/// Case-A scalar model whose half-lines `[1, ∞)` and `(−∞, −1]` are both
/// invariant: `a = split_drift`, `c(x, u) = split_jump(x)·u`.
#[derive(Debug, Clone)]
pub struct SplitHalfLines;

impl Coefficients for SplitHalfLines {
    fn state_dim(&self) -> usize {
        1
    }
    fn noise_dim(&self) -> usize {
        1
    }
    fn case(&self) -> Case {
        Case::A
    }
    fn drift(&self, x: &[f64], out: &mut [f64]) {
        out[0] = split_drift(x[0]);
    }
    fn drift_jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, split_drift_deriv(x[0]))
    }
    fn jump(&self, x: &[f64], u: &[f64], out: &mut [f64]) {
        out[0] = split_jump(x[0]) * u[0];
    }
    fn jump_jacobian(&self, x: &[f64], u: &[f64]) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, split_jump_deriv(x[0]) * u[0])
    }
    fn growth_bound(&self, x: &[f64]) -> f64 {
        split_jump(x[0]).abs()
    }
}

// ---------------------------------------------------------------------------
// Registry.

/// Registry names accepted in scenario files.
pub const REGISTRY: &[&str] =
    &["ou_jump", "poly1d", "linear_nd", "example_5_1", "example_5_2", "multiplicative_1d"];

fn param_f64(params: &serde_json::Value, key: &str) -> Result<Option<f64>> {
    match params.get(key) {
        None | Some(serde_json::Value::Null) => Ok(None),
        Some(v) => v
            .as_f64()
            .map(Some)
            .ok_or_else(|| Error::Config(format!("parameter `{key}` must be a number"))),
    }
}

fn param_vec(params: &serde_json::Value, key: &str) -> Result<Option<Vec<f64>>> {
    match params.get(key) {
        None | Some(serde_json::Value::Null) => Ok(None),
        Some(v) => serde_json::from_value(v.clone())
            .map(Some)
            .map_err(|_| Error::Config(format!("parameter `{key}` must be a list of numbers"))),
    }
}

/// The Lévy measure `2δ₁ + δ₋₁` of the drift-to-the-right counterexample.
pub fn two_up_one_down() -> LevyMeasure {
    LevyMeasure::atomic(&[(vec![1.0], 2.0), (vec![-1.0], 1.0)]).expect("valid atoms")
}

/// Build a registered model.
///
/// `measure` is required for the generic families and optional for the two
/// counterexamples, which carry their own Lévy measure. `form` overrides the
/// family's default drift form (compensated, except for the counterexamples
/// which are stated with the drift acting between jumps).
pub fn build(
    name: &str,
    params: &serde_json::Value,
    measure: Option<LevyMeasure>,
    form: Option<DriftForm>,
) -> Result<Model> {
    let need_measure = |m: Option<LevyMeasure>, dim: usize| -> Result<LevyMeasure> {
        Ok(m.unwrap_or_else(|| LevyMeasure::empty(dim)))
    };
    let model = match name {
        "ou_jump" => {
            let theta = param_f64(params, "theta")?.unwrap_or(1.0);
            let dim = measure.as_ref().map(|m| m.dim()).unwrap_or(1);
            let coeffs = LinearDrift { matrix: DMatrix::identity(dim, dim) * (-theta) };
            Model::new(Arc::new(coeffs), need_measure(measure, dim)?, form.unwrap_or_default())?
        }
        "poly1d" => {
            let coeffs = param_vec(params, "coeffs")?
                .ok_or_else(|| Error::Config("poly1d needs `coeffs`".into()))?;
            Model::new(Arc::new(Poly1d { coeffs }), need_measure(measure, 1)?, form.unwrap_or_default())?
        }
        "linear_nd" => {
            let rows: Vec<Vec<f64>> = params
                .get("matrix")
                .cloned()
                .map(serde_json::from_value)
                .transpose()
                .map_err(|_| Error::Config("`matrix` must be a list of rows".into()))?
                .ok_or_else(|| Error::Config("linear_nd needs `matrix`".into()))?;
            let m = rows.len();
            if m == 0 || rows.iter().any(|r| r.len() != m) {
                return Err(Error::Config("`matrix` must be square and nonempty".into()));
            }
            let matrix = DMatrix::from_fn(m, m, |i, j| rows[i][j]);
            Model::new(Arc::new(LinearDrift { matrix }), need_measure(measure, m)?, form.unwrap_or_default())?
        }
        "multiplicative_1d" => {
            let drift = param_vec(params, "drift")?.unwrap_or_else(|| vec![0.0, -1.0]);
            let chi = param_vec(params, "chi")?.unwrap_or_else(|| vec![1.0]);
            Model::new(
                Arc::new(Multiplicative1d { drift, chi }),
                need_measure(measure, 1)?,
                form.unwrap_or_default(),
            )?
        }
        "example_5_1" => {
            let c = param_f64(params, "c")?.unwrap_or(0.5);
            if !(c > 0.0 && c < 1.0) {
                return Err(Error::Precondition(format!("example_5_1 needs c ∈ (0, 1), got {c}")));
            }
            Model::new(
                Arc::new(ConstantPull { c }),
                measure.unwrap_or_else(two_up_one_down),
                form.unwrap_or(DriftForm::Raw),
            )?
        }
        "example_5_2" => Model::new(
            Arc::new(SplitHalfLines),
            measure.unwrap_or_else(|| LevyMeasure::atomic(&[(vec![1.0], 1.0)]).expect("valid atom")),
            form.unwrap_or(DriftForm::Raw),
        )?,
        other => {
            return Err(Error::Config(format!(
                "unknown model `{other}`; known models: {}",
                REGISTRY.join(", ")
            )))
        }
    };
    Ok(model.named(name, params.clone()))
}

/// Convenience: the jump-OU model `a(x) = −θx`, `Π = weight·δ₁`.
pub fn ou_jump(theta: f64, weight: f64, form: DriftForm) -> Model {
    let measure = LevyMeasure::atomic(&[(vec![1.0], weight)]).expect("valid atom");
    build("ou_jump", &serde_json::json!({ "theta": theta }), Some(measure), Some(form)).expect("valid model")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ramp_is_c1_at_the_joints() {
        for s in [-1.0f64, 1.0] {
            let h = 1e-7;
            assert!((ramp(s) - 1.0).abs() < 1e-15);
            let left = (ramp(s) - ramp(s - h)) / h;
            let right = (ramp(s + h) - ramp(s)) / h;
            assert!(left.abs() < 1e-5 && right.abs() < 1e-5, "{left} {right}");
            assert!(ramp_deriv(s - 1e-12).abs() < 1e-9);
        }
        assert_eq!(ramp(3.0), 1.0);
        assert_eq!(ramp(-7.5), 1.0);
    }

    #[test]
    fn split_pieces_meet_their_constraints() {
        let mut x: f64 = -6.0;
        while x <= 6.0 {
            if x.abs() >= 2.0 {
                assert_eq!(split_drift(x), -x);
                assert_eq!(split_jump(x), x.signum());
            }
            if x.abs() <= 1.0 {
                assert_eq!(split_drift(x), 0.0);
            }
            assert!(x * split_jump(x) >= 0.0);
            x += 1e-3;
        }
        // C¹ joints
        for p in [1.0f64, 2.0, -1.0, -2.0] {
            let h = 1e-7;
            let dl = (split_drift(p) - split_drift(p - h)) / h;
            let dr = (split_drift(p + h) - split_drift(p)) / h;
            assert!((dl - dr).abs() < 1e-5, "drift at {p}: {dl} vs {dr}");
            let jl = (split_jump(p) - split_jump(p - h)) / h;
            let jr = (split_jump(p + h) - split_jump(p)) / h;
            assert!((jl - jr).abs() < 1e-5, "jump at {p}: {jl} vs {jr}");
        }
    }

    #[test]
    fn registry_rejects_unknown_and_bad_params() {
        assert!(matches!(build("nope", &serde_json::json!({}), None, None), Err(Error::Config(_))));
        assert!(build("example_5_1", &serde_json::json!({"c": 1.5}), None, None).is_err());
        assert!(build("poly1d", &serde_json::json!({}), None, None).is_err());
    }

    #[test]
    fn case_a_growth_is_spot_checked() {
        #[derive(Debug)]
        struct Liar;
        impl Coefficients for Liar {
            fn state_dim(&self) -> usize {
                1
            }
            fn noise_dim(&self) -> usize {
                1
            }
            fn case(&self) -> Case {
                Case::A
            }
            fn drift(&self, _x: &[f64], out: &mut [f64]) {
                out[0] = 0.0;
            }
            fn drift_jacobian(&self, _x: &[f64]) -> DMatrix<f64> {
                DMatrix::zeros(1, 1)
            }
            fn jump(&self, _x: &[f64], u: &[f64], out: &mut [f64]) {
                out[0] = 2.0 * u[0];
            }
        }
        let err = Model::new(Arc::new(Liar), LevyMeasure::empty(1), DriftForm::Compensated).unwrap_err();
        assert!(matches!(err, Error::InvalidModel(_)));
    }

    #[test]
    fn case_b_needs_matching_dims() {
        let m = LevyMeasure::atomic(&[(vec![1.0, 0.0], 1.0)]).unwrap();
        assert!(build("ou_jump", &serde_json::json!({}), Some(m.clone()), None).is_ok());
        assert!(build("poly1d", &serde_json::json!({"coeffs": [0.0, -1.0]}), Some(m), None).is_err());
    }
}
