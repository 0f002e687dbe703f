//! Scenario files: a registry model, a Lévy measure, simulation parameters
//! and one optional block per command.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::law::{Binning, Start};
use crate::levy::{Atom, LevyMeasure, LevyMeasureSpec};
use crate::model::{self, DriftForm, Model};
use crate::sde::SimParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub name: String,
    #[serde(default = "empty_object")]
    pub params: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub form: Option<DriftForm>,
}

fn empty_object() -> serde_json::Value {
    serde_json::json!({})
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self { name: "ou_jump".into(), params: serde_json::json!({ "theta": 1.0 }), form: Some(DriftForm::Raw) }
    }
}

fn default_sim() -> SimParams {
    SimParams::new(0.01, 10.0, 1000, 0)
}

fn default_binning() -> Binning {
    Binning::uniform(-2.0, 8.0, 200).expect("valid binning")
}

fn unit_grid() -> Vec<f64> {
    (1..=10).map(f64::from).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckRBlock {
    pub phi: String,
    pub p: Option<f64>,
    pub half_width: f64,
    pub per_axis: usize,
    pub alpha_grid: Vec<f64>,
}

impl Default for CheckRBlock {
    fn default() -> Self {
        Self { phi: "sq_norm".into(), p: None, half_width: 5.0, per_axis: 41, alpha_grid: vec![0.25, 0.5, 1.0, 1.5, 2.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckNBlock {
    pub x_star: Option<Vec<f64>>,
    pub t_star: f64,
    pub svd_tol: f64,
    pub epsilons: Vec<f64>,
    pub n_directions: usize,
    pub force_sphere: bool,
    pub fd_step: f64,
}

impl Default for CheckNBlock {
    fn default() -> Self {
        Self {
            x_star: None,
            t_star: 1.0,
            svd_tol: crate::conditions::SVD_TOL,
            epsilons: vec![1.0, 0.5, 0.25, 0.1, 0.05],
            n_directions: 64,
            force_sphere: false,
            fd_step: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckSBlock {
    pub x_star: Option<Vec<f64>>,
    pub radii: Vec<f64>,
    pub t: f64,
    pub epsilon: f64,
    pub n_directions: usize,
}

impl Default for CheckSBlock {
    fn default() -> Self {
        Self { x_star: None, radii: vec![1.0, 2.0, 3.0], t: 2.0, epsilon: 0.5, n_directions: 8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CouplingBlock {
    pub radius: f64,
    pub window: f64,
    pub max_cycles: usize,
    pub n_aux: usize,
    pub max_free_time: f64,
    pub binning: Binning,
    pub mu1: Start,
    pub mu2: Start,
    pub n_runs: usize,
    pub t_grid: Vec<f64>,
    /// Also estimate the TV curve and check `d_TV ≤ P̂(Q* > t)`.
    pub check_inequality: bool,
}

impl Default for CouplingBlock {
    fn default() -> Self {
        Self {
            radius: 3.0,
            window: 1.0,
            max_cycles: 50,
            n_aux: 200,
            max_free_time: 100.0,
            binning: default_binning(),
            mu1: Start::Point(vec![0.0]),
            mu2: Start::Point(vec![5.0]),
            n_runs: 1000,
            t_grid: unit_grid(),
            check_inequality: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TvBlock {
    pub x: Start,
    pub y: Start,
    pub t_grid: Vec<f64>,
    pub binning: Binning,
}

impl Default for TvBlock {
    fn default() -> Self {
        Self { x: Start::Point(vec![0.0]), y: Start::Point(vec![5.0]), t_grid: unit_grid(), binning: default_binning() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InvariantBlock {
    pub mu0: Start,
    pub horizon: f64,
    pub burn_in: f64,
    pub binning: Binning,
}

impl Default for InvariantBlock {
    fn default() -> Self {
        Self { mu0: Start::Point(vec![0.0]), horizon: 200.0, burn_in: 0.0, binning: default_binning() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RateBlock {
    pub alpha: f64,
    pub gamma: f64,
    pub c: f64,
    #[serde(rename = "T")]
    pub window: f64,
    pub delta: f64,
    pub sup_phi: f64,
    /// `φ(µ)` for the bound `C₁(φ(µ)+1)e^{−C₂t}` on `t_grid`.
    pub phi_mu: f64,
    pub t_grid: Vec<f64>,
}

impl Default for RateBlock {
    fn default() -> Self {
        Self { alpha: 1.0, gamma: 1.0, c: 0.5, window: 1.0, delta: 0.5, sup_phi: 4.0, phi_mu: 0.0, t_grid: unit_grid() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GalleryBlock {
    pub p: f64,
    pub circle_steps: usize,
    pub circle_paths: usize,
    pub birth_death_steps: usize,
    pub c: f64,
    pub x0: f64,
    pub horizon_5_1: f64,
    pub paths_5_1: usize,
    pub horizon_5_2: f64,
    pub paths_5_2: usize,
    pub binning_5_2: Binning,
    pub q: f64,
    pub paths_prop01: usize,
    pub binning_prop01: Binning,
    pub t_grid_prop01: Vec<f64>,
    pub khasminskii_horizon: f64,
    pub khasminskii_paths: usize,
}

impl Default for GalleryBlock {
    fn default() -> Self {
        Self {
            p: 0.1,
            circle_steps: 200,
            circle_paths: 1000,
            birth_death_steps: 1_000_000,
            c: 0.5,
            x0: 5.0,
            horizon_5_1: 200.0,
            paths_5_1: 1000,
            horizon_5_2: 100.0,
            paths_5_2: 1000,
            binning_5_2: Binning::uniform(-20.0, 20.0, 400).expect("valid binning"),
            q: 1.0,
            paths_prop01: 100_000,
            binning_prop01: default_binning(),
            t_grid_prop01: unit_grid(),
            khasminskii_horizon: 200.0,
            khasminskii_paths: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub model: ModelSpec,
    /// Lévy measure; models with a built-in measure may omit it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measure: Option<LevyMeasureSpec>,
    #[serde(default = "default_sim")]
    pub sim: SimParams,
    /// Starting point for `simulate`; the origin if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    #[serde(default)]
    pub check_r: CheckRBlock,
    #[serde(default)]
    pub check_n: CheckNBlock,
    #[serde(default)]
    pub check_s: CheckSBlock,
    #[serde(default)]
    pub coupling: CouplingBlock,
    #[serde(default)]
    pub tv: TvBlock,
    #[serde(default)]
    pub invariant: InvariantBlock,
    #[serde(default)]
    pub rate: RateBlock,
    #[serde(default)]
    pub gallery: GalleryBlock,
}

impl Default for Scenario {
    /// The jump-OU benchmark `dX = −X dt + dN`, `N` Poisson of rate 1.
    fn default() -> Self {
        Self {
            model: ModelSpec::default(),
            measure: Some(LevyMeasureSpec { dim: Some(1), atoms: vec![Atom { mark: vec![1.0], weight: 1.0 }], diffuse: None }),
            sim: default_sim(),
            x0: None,
            check_r: CheckRBlock::default(),
            check_n: CheckNBlock::default(),
            check_s: CheckSBlock::default(),
            coupling: CouplingBlock::default(),
            tv: TvBlock::default(),
            invariant: InvariantBlock::default(),
            rate: RateBlock::default(),
            gallery: GalleryBlock::default(),
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::Config(format!("`{name}` must be positive, got {v}")));
    }
    Ok(())
}

fn increasing(name: &str, grid: &[f64]) -> Result<()> {
    if grid.is_empty() || grid.windows(2).any(|w| w[1] <= w[0]) || grid.iter().any(|t| !(*t >= 0.0)) {
        return Err(Error::Config(format!("`{name}` must be a nonempty increasing list of nonnegative times")));
    }
    Ok(())
}

fn dim_matches(name: &str, v: &[f64], m: usize) -> Result<()> {
    if v.len() != m {
        return Err(Error::Config(format!("`{name}` has dimension {} but the model has {m}", v.len())));
    }
    Ok(())
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("malformed scenario: {e}")))
    }

    pub fn build_model(&self) -> Result<Model> {
        let measure = self.measure.clone().map(LevyMeasure::try_from).transpose()?;
        model::build(&self.model.name, &self.model.params, measure, self.model.form)
    }

    /// Dimension-independent checks of every block.
    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        let model = self.build_model()?;
        let m = model.dim();
        if let Some(x0) = &self.x0 {
            dim_matches("x0", x0, m)?;
        }
        positive("check_r.half_width", self.check_r.half_width)?;
        crate::generator::test_function(&self.check_r.phi, self.check_r.p)?;
        if self.check_r.alpha_grid.is_empty() || self.check_r.alpha_grid.iter().any(|a| !(*a > 0.0)) {
            return Err(Error::Config("`check_r.alpha_grid` must be nonempty and positive".into()));
        }
        if let Some(x) = &self.check_n.x_star {
            dim_matches("check_n.x_star", x, m)?;
        }
        positive("check_n.t_star", self.check_n.t_star)?;
        positive("check_n.svd_tol", self.check_n.svd_tol)?;
        positive("check_n.fd_step", self.check_n.fd_step)?;
        if let Some(x) = &self.check_s.x_star {
            dim_matches("check_s.x_star", x, m)?;
        }
        positive("check_s.t", self.check_s.t)?;
        positive("check_s.epsilon", self.check_s.epsilon)?;
        let c = &self.coupling;
        positive("coupling.radius", c.radius)?;
        positive("coupling.window", c.window)?;
        positive("coupling.max_free_time", c.max_free_time)?;
        if c.n_aux == 0 || c.max_cycles == 0 || c.n_runs == 0 {
            return Err(Error::Config("`coupling.n_aux`, `max_cycles` and `n_runs` must be positive".into()));
        }
        increasing("coupling.t_grid", &c.t_grid)?;
        c.binning.validate()?;
        increasing("tv.t_grid", &self.tv.t_grid)?;
        self.tv.binning.validate()?;
        self.invariant.binning.validate()?;
        if !(self.invariant.horizon > self.invariant.burn_in && self.invariant.burn_in >= 0.0) {
            return Err(Error::Config("`invariant.horizon` must exceed `invariant.burn_in` ≥ 0".into()));
        }
        for (name, s) in [("coupling.mu1", &c.mu1), ("coupling.mu2", &c.mu2), ("tv.x", &self.tv.x), ("tv.y", &self.tv.y), ("invariant.mu0", &self.invariant.mu0)] {
            if s.dim() != m {
                return Err(Error::Config(format!("`{name}` has dimension {} but the model has {m}", s.dim())));
            }
        }
        increasing("rate.t_grid", &self.rate.t_grid)?;
        Ok(())
    }
}
