//! Extended generator of the jump SDE applied to smooth test functions.
//!
//! For the compensated form this is
//! `(∇f(x), a(x)) + ∫ [f(x + c(x,u)) − f(x) − (∇f(x), c(x,u))·1{‖u‖≤1}] Π(du)`;
//! for the raw form the compensator term is absent from both the drift and
//! the integrand.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::levy::norm;
use crate::model::{DriftForm, Model};
use crate::quad::QuadConfig;

/// A scalar `C²` function with its gradient.
pub trait TestFunction: Send + Sync {
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> Vec<f64>;

    /// Hessian; defaults to central differences of the gradient.
    fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        let m = x.len();
        let mut h = DMatrix::zeros(m, m);
        let mut y = x.to_vec();
        for j in 0..m {
            let step = 1e-5 * (1.0 + x[j].abs());
            y[j] = x[j] + step;
            let gp = self.gradient(&y);
            y[j] = x[j] - step;
            let gm = self.gradient(&y);
            y[j] = x[j];
            for i in 0..m {
                h[(i, j)] = (gp[i] - gm[i]) / (2.0 * step);
            }
        }
        (&h + h.transpose()) * 0.5
    }

    fn name(&self) -> String;
}

/// `φ(x) = ‖x‖²`.
#[derive(Debug, Clone, Copy, Default)]
pub struct SquaredNorm;

impl TestFunction for SquaredNorm {
    fn value(&self, x: &[f64]) -> f64 {
        x.iter().map(|v| v * v).sum()
    }
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        x.iter().map(|v| 2.0 * v).collect()
    }
    fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        DMatrix::identity(x.len(), x.len()) * 2.0
    }
    fn name(&self) -> String {
        "sq_norm".into()
    }
}

/// `φ(x) = (1 + ‖x‖²)^{p/2}`.
#[derive(Debug, Clone, Copy)]
pub struct SoftPower {
    pub p: f64,
}

impl TestFunction for SoftPower {
    fn value(&self, x: &[f64]) -> f64 {
        (1.0 + SquaredNorm.value(x)).powf(self.p / 2.0)
    }
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let s = 1.0 + SquaredNorm.value(x);
        let k = self.p * s.powf(self.p / 2.0 - 1.0);
        x.iter().map(|v| k * v).collect()
    }
    fn name(&self) -> String {
        format!("soft_power:{}", self.p)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Constant(pub f64);

impl TestFunction for Constant {
    fn value(&self, _x: &[f64]) -> f64 {
        self.0
    }
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        vec![0.0; x.len()]
    }
    fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        DMatrix::zeros(x.len(), x.len())
    }
    fn name(&self) -> String {
        format!("constant:{}", self.0)
    }
}

/// Lyapunov candidates selectable by name in scenario files.
pub fn test_function(name: &str, p: Option<f64>) -> Result<Box<dyn TestFunction>> {
    match name {
        "sq_norm" => Ok(Box::new(SquaredNorm)),
        "soft_power" => Ok(Box::new(SoftPower { p: p.unwrap_or(2.0) })),
        "constant" => Ok(Box::new(Constant(p.unwrap_or(1.0)))),
        other => Err(Error::Config(format!(
            "unknown test function `{other}`; known: sq_norm, soft_power, constant"
        ))),
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Relative jump size below which the jump integrand is evaluated by its
/// second-order Taylor expansion.
const TAYLOR_CUTOFF: f64 = 1e-5;

/// `(∇f(x), a(x)) + 𝒜f(x)`.
pub fn generator_apply(model: &Model, f: &dyn TestFunction, x: &[f64]) -> Result<f64> {
    generator_apply_with(model, f, x, &QuadConfig::default())
}

pub fn generator_apply_with(model: &Model, f: &dyn TestFunction, x: &[f64], cfg: &QuadConfig) -> Result<f64> {
    let m = model.dim();
    if x.len() != m {
        return Err(Error::Precondition(format!("state has dimension {} but the model has {m}", x.len())));
    }
    let fx = f.value(x);
    let grad = f.gradient(x);
    let drift = model.drift(x);
    let compensated = model.form() == DriftForm::Compensated;
    let scale = 1.0 + norm(x);
    let hessian = std::cell::OnceCell::new();

    let integrand = |u: &[f64]| -> f64 {
        let c = model.jump(x, u);
        let small = norm(u) <= 1.0;
        if compensated && small && norm(&c) <= TAYLOR_CUTOFF * scale {
            let h: &DMatrix<f64> = hessian.get_or_init(|| f.hessian(x));
            let cv = nalgebra::DVector::from_column_slice(&c);
            return 0.5 * cv.dot(&(h * &cv));
        }
        let y: Vec<f64> = x.iter().zip(&c).map(|(a, b)| a + b).collect();
        let mut v = f.value(&y) - fx;
        if compensated && small {
            v -= dot(&grad, &c);
        }
        v
    };

    let measure = model.measure();
    let mut total = dot(&grad, &drift);
    for atom in measure.atoms() {
        total += atom.weight * integrand(&atom.mark);
    }
    if measure.diffuse().is_some() {
        for (dir, w) in measure.direction_nodes() {
            let radial = |r: f64| {
                let u: Vec<f64> = dir.iter().map(|t| t * r).collect();
                integrand(&u)
            };
            let inner = measure.radial_integral(radial, 0.0, 1.0, cfg);
            let outer = measure.radial_integral(radial, 1.0, f64::INFINITY, cfg);
            match (inner, outer) {
                (Ok(a), Ok(b)) => total += w * (a + b),
                _ => {
                    return Err(Error::Divergent(format!(
                        "jump integral of {} diverges at x = {x:?}",
                        f.name()
                    )))
                }
            }
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy::{Diffuse, DirectionLaw, LevyMeasure, RadialDensity};
    use crate::model::{self, ou_jump};
    use serde_json::json;

    #[test]
    fn jump_ou_square() {
        let m = ou_jump(1.0, 1.0, DriftForm::Compensated);
        for x in [0.0, 1.0, 2.0, -3.5] {
            let g = generator_apply(&m, &SquaredNorm, &[x]).unwrap();
            assert!((g - (-2.0 * x * x + 1.0)).abs() < 1e-12, "{x}: {g}");
        }
        assert!((generator_apply(&m, &SquaredNorm, &[2.0]).unwrap() + 7.0).abs() < 1e-12);
    }

    #[test]
    fn pure_drift_and_constants() {
        let m = model::build("ou_jump", &json!({}), None, None).unwrap();
        assert_eq!(generator_apply(&m, &SquaredNorm, &[1.0]).unwrap(), -2.0);
        let m = ou_jump(1.0, 1.0, DriftForm::Compensated);
        for x in [-2.0, 0.0, 5.0] {
            assert_eq!(generator_apply(&m, &Constant(3.0), &[x]).unwrap(), 0.0);
        }
    }

    #[test]
    fn raw_form_drops_the_compensator() {
        // drift −x, jumps +1 uncompensated: −2x² + 2x + 1
        let m = ou_jump(1.0, 1.0, DriftForm::Raw);
        let g = generator_apply(&m, &SquaredNorm, &[2.0]).unwrap();
        assert!((g - (-8.0 + 4.0 + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn infinite_activity_symmetric_measure() {
        // Π(du) = |u|^{-1-β} du on 0 < |u| ≤ 1 with β = 1.5; for f = x² the
        // compensated jump integral is ∫ u² Π(du) = 2 ∫_0^1 ρ^{1-β} dρ = 2/(2-β) = 4.
        let measure = LevyMeasure::new(
            1,
            vec![],
            Some(Diffuse {
                radial: RadialDensity::Power { scale: 1.0, exponent: 2.5, lower: 0.0, upper: Some(1.0) },
                directions: DirectionLaw::Uniform,
            }),
        )
        .unwrap();
        let m = model::build("poly1d", &json!({"coeffs": [0.0]}), Some(measure), None).unwrap();
        let g = generator_apply(&m, &SquaredNorm, &[0.7]).unwrap();
        assert!((g - 4.0).abs() < 1e-6, "{g}");
    }

    #[test]
    fn divergence_is_reported() {
        // ρ^{-3} near 0: ∫ u² Π(du) = ∫ ρ^{-1} dρ diverges
        let measure = LevyMeasure::new(
            1,
            vec![],
            Some(Diffuse {
                radial: RadialDensity::Power { scale: 1.0, exponent: 3.0, lower: 0.0, upper: Some(1.0) },
                directions: DirectionLaw::Uniform,
            }),
        )
        .unwrap();
        let m = model::build("poly1d", &json!({"coeffs": [0.0]}), Some(measure), None).unwrap();
        assert!(matches!(generator_apply(&m, &SquaredNorm, &[0.0]), Err(Error::Divergent(_))));
    }
}
