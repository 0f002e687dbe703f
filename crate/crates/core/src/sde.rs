//! Jump-adapted path simulation.
//!
//! Between jumps the state follows the ODE `x' = effective_drift(x)`,
//! integrated with classical RK4 on a grid that is subdivided so every jump
//! time is hit exactly. At a jump the state moves by `c(x−, u)`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::levy::{norm, JumpEvent, JumpSampler, PointMeasureRealization};
use crate::model::{Case, DriftForm, Model};
use crate::quad::QuadConfig;
use crate::rng::StreamRng;

pub const DEFAULT_OVERFLOW: f64 = 1e15;

/// Numerical parameters shared by every Monte Carlo operation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    pub dt: f64,
    pub horizon: f64,
    #[serde(default)]
    pub truncation: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one_path")]
    pub n_paths: usize,
    #[serde(default = "default_overflow")]
    pub overflow: f64,
}

fn one_path() -> usize {
    1
}

fn default_overflow() -> f64 {
    DEFAULT_OVERFLOW
}

impl SimParams {
    pub fn new(dt: f64, horizon: f64, n_paths: usize, seed: u64) -> Self {
        Self { dt, horizon, truncation: 0.0, seed, n_paths, overflow: DEFAULT_OVERFLOW }
    }

    pub fn with_truncation(mut self, truncation: f64) -> Self {
        self.truncation = truncation;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Precondition(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::Precondition(format!("horizon must be positive, got {}", self.horizon)));
        }
        if self.n_paths == 0 {
            return Err(Error::Precondition("n_paths must be at least 1".into()));
        }
        if !(self.truncation >= 0.0) {
            return Err(Error::Precondition("truncation must be nonnegative".into()));
        }
        if !(self.overflow > 0.0) {
            return Err(Error::Precondition("overflow bound must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpRecord {
    pub time: f64,
    pub mark: Vec<f64>,
    pub pre_state: Vec<f64>,
    pub post_state: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Explosion {
    pub time: f64,
    pub norm: f64,
}

/// A simulated path. The skeleton holds the state after every integrator
/// step; at a jump time it holds the pre-jump state followed by the
/// post-jump state at the same time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub x0: Vec<f64>,
    pub skeleton: Vec<(f64, Vec<f64>)>,
    pub jumps: Vec<JumpRecord>,
    pub truncation: f64,
    pub explosion: Option<Explosion>,
}

impl Trajectory {
    /// State at the last skeleton point with time `≤ t` (right-continuous).
    pub fn state_at(&self, t: f64) -> &[f64] {
        let idx = self.skeleton.partition_point(|(s, _)| *s <= t);
        &self.skeleton[idx.saturating_sub(1)].1
    }

    pub fn terminal(&self) -> &[f64] {
        &self.skeleton.last().expect("nonempty skeleton").1
    }

    pub fn horizon(&self) -> f64 {
        self.skeleton.last().expect("nonempty skeleton").0
    }
}

/// Integrator work space.
#[derive(Debug, Clone)]
pub struct Scratch {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
    jump: Vec<f64>,
}

impl Scratch {
    pub fn new(m: usize) -> Self {
        Self {
            k1: vec![0.0; m],
            k2: vec![0.0; m],
            k3: vec![0.0; m],
            k4: vec![0.0; m],
            tmp: vec![0.0; m],
            jump: vec![0.0; m],
        }
    }
}

/// A model bound to a truncation level: the drift actually integrated
/// between simulated jumps and the sampler for the simulated jumps.
#[derive(Debug, Clone)]
pub struct Dynamics<'m> {
    model: &'m Model,
    truncation: f64,
    sampler: Option<JumpSampler<'m>>,
    /// State-independent drift correction (case B).
    shift: Option<Vec<f64>>,
    overflow: f64,
    quad: QuadConfig,
}

/// Region of marks whose jumps are replaced by their mean in the drift.
#[derive(Debug, Clone, Copy)]
enum Correction {
    /// Subtract `∫_{lo ≤ ‖u‖ ≤ 1} c Π(du)`.
    Compensate { lo: f64 },
    /// Add `∫_{‖u‖ < hi} c Π(du)`.
    SmallJumpMean { hi: f64 },
}

impl<'m> Dynamics<'m> {
    pub fn new(model: &'m Model, truncation: f64) -> Result<Self> {
        Self::with_overflow(model, truncation, DEFAULT_OVERFLOW)
    }

    pub fn with_overflow(model: &'m Model, truncation: f64, overflow: f64) -> Result<Self> {
        let sampler = Some(JumpSampler::new(model.measure(), truncation)?);
        Self::build(model, truncation, sampler, overflow)
    }

    /// Drift and its Jacobian only; no jumps can be sampled. Allows a
    /// truncation at which the simulated jump rate is infinite.
    pub fn drift_only(model: &'m Model, truncation: f64) -> Result<Self> {
        Self::build(model, truncation, None, DEFAULT_OVERFLOW)
    }

    fn build(model: &'m Model, truncation: f64, sampler: Option<JumpSampler<'m>>, overflow: f64) -> Result<Self> {
        let mut dynamics =
            Self { model, truncation, sampler, shift: None, overflow, quad: QuadConfig::default() };
        let m = model.dim();
        let zero = vec![0.0; m];
        let probe = dynamics.correction_at(&zero)?;
        if model.case() == Case::B {
            dynamics.shift = Some(probe);
        }
        Ok(dynamics)
    }

    pub fn model(&self) -> &'m Model {
        self.model
    }

    pub fn truncation(&self) -> f64 {
        self.truncation
    }

    pub fn sampler(&self) -> &JumpSampler<'m> {
        self.sampler.as_ref().expect("dynamics was built without a jump sampler")
    }

    pub fn overflow(&self) -> f64 {
        self.overflow
    }

    fn correction(&self) -> Correction {
        match self.model.form() {
            DriftForm::Compensated => Correction::Compensate { lo: self.truncation },
            DriftForm::Raw => Correction::SmallJumpMean { hi: self.truncation },
        }
    }

    /// Integrate `h(u)` (vector valued, length `len`) against `Π` over the
    /// correction region.
    fn integrate_region<H>(&self, len: usize, h: H) -> Result<Vec<f64>>
    where
        H: Fn(&[f64], &mut [f64]),
    {
        let measure = self.model.measure();
        let (lo, hi, sign, closed_hi) = match self.correction() {
            Correction::Compensate { lo } => (lo, 1.0, -1.0, true),
            Correction::SmallJumpMean { hi } => (0.0, hi, 1.0, false),
        };
        let mut acc = vec![0.0; len];
        let mut buf = vec![0.0; len];
        for atom in measure.atoms() {
            let n = norm(&atom.mark);
            let inside = n >= lo && if closed_hi { n <= hi } else { n < hi };
            if inside {
                h(&atom.mark, &mut buf);
                for (a, b) in acc.iter_mut().zip(&buf) {
                    *a += sign * atom.weight * b;
                }
            }
        }
        if measure.diffuse().is_some() && hi > lo {
            let d = measure.dim();
            for (dir, w) in measure.direction_nodes() {
                for k in 0..len {
                    let comp = |r: f64| {
                        let u: Vec<f64> = dir.iter().map(|t| t * r).collect();
                        let mut out = vec![0.0; len];
                        h(&u, &mut out);
                        out[k]
                    };
                    debug_assert_eq!(dir.len(), d);
                    let v = measure.radial_integral(comp, lo, hi, &self.quad).map_err(|_| {
                        Error::Divergent(format!(
                            "drift correction over marks with norm in [{lo}, {hi}] does not converge"
                        ))
                    })?;
                    acc[k] += sign * w * v;
                }
            }
        }
        Ok(acc)
    }

    fn correction_at(&self, x: &[f64]) -> Result<Vec<f64>> {
        let m = self.model.dim();
        self.integrate_region(m, |u, out| self.model.jump_into(x, u, out))
    }

    fn correction_jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let m = self.model.dim();
        if self.model.case() == Case::B {
            return Ok(DMatrix::zeros(m, m));
        }
        let flat = self.integrate_region(m * m, |u, out| {
            let j = self.model.jump_jacobian(x, u);
            out.copy_from_slice(j.as_slice());
        })?;
        Ok(DMatrix::from_column_slice(m, m, &flat))
    }

    /// Drift used between simulated jumps.
    pub fn effective_drift_into(&self, x: &[f64], out: &mut [f64]) {
        self.model.coefficients().drift(x, out);
        match &self.shift {
            Some(shift) => {
                for (o, s) in out.iter_mut().zip(shift) {
                    *o += s;
                }
            }
            None => match self.correction_at(x) {
                Ok(c) => {
                    for (o, s) in out.iter_mut().zip(&c) {
                        *o += s;
                    }
                }
                Err(_) => out.iter_mut().for_each(|o| *o = f64::NAN),
            },
        }
    }

    /// Jacobian of [`Self::effective_drift_into`].
    pub fn effective_drift_jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        let mut j = self.model.coefficients().drift_jacobian(x);
        if self.model.case() == Case::A {
            match self.correction_jacobian(x) {
                Ok(c) => j += c,
                Err(_) => j.fill(f64::NAN),
            }
        }
        j
    }

    fn rk4_step(&self, x: &mut [f64], h: f64, s: &mut Scratch) {
        let m = x.len();
        self.effective_drift_into(x, &mut s.k1);
        for i in 0..m {
            s.tmp[i] = x[i] + 0.5 * h * s.k1[i];
        }
        self.effective_drift_into(&s.tmp, &mut s.k2);
        for i in 0..m {
            s.tmp[i] = x[i] + 0.5 * h * s.k2[i];
        }
        self.effective_drift_into(&s.tmp, &mut s.k3);
        for i in 0..m {
            s.tmp[i] = x[i] + h * s.k3[i];
        }
        self.effective_drift_into(&s.tmp, &mut s.k4);
        for i in 0..m {
            x[i] += h / 6.0 * (s.k1[i] + 2.0 * s.k2[i] + 2.0 * s.k3[i] + s.k4[i]);
        }
    }

    pub(crate) fn check_overflow(&self, x: &[f64], time: f64) -> Option<Explosion> {
        let n = norm(x);
        if !n.is_finite() || n > self.overflow {
            Some(Explosion { time, norm: n })
        } else {
            None
        }
    }

    /// Integrate the between-jump ODE over `duration` in `⌈duration/dt⌉`
    /// equal steps, calling `observe(t, x)` after each.
    pub fn flow<O: FnMut(f64, &[f64])>(
        &self,
        x: &mut [f64],
        t0: f64,
        duration: f64,
        dt: f64,
        scratch: &mut Scratch,
        mut observe: O,
    ) -> Option<Explosion> {
        if duration <= 0.0 {
            return None;
        }
        // Whole multiples of dt step with dt itself, so a jump-free stretch
        // gives the same floats however it is cut into segments.
        let r = duration / dt;
        let whole = r.round();
        let (n, h) = if whole >= 1.0 && (r - whole).abs() < 1e-9 * whole {
            (whole as usize, dt)
        } else {
            let n = (r - 1e-9).ceil().max(1.0) as usize;
            (n, duration / n as f64)
        };
        for k in 1..=n {
            self.rk4_step(x, h, scratch);
            let t = if k == n { t0 + duration } else { t0 + k as f64 * h };
            if let Some(e) = self.check_overflow(x, t) {
                return Some(e);
            }
            observe(t, x);
        }
        None
    }

    /// Apply the jump with mark `u` in place.
    pub fn apply_jump(&self, x: &mut [f64], u: &[f64], scratch: &mut Scratch) {
        self.model.jump_into(x, u, &mut scratch.jump);
        for (xi, ci) in x.iter_mut().zip(&scratch.jump) {
            *xi += ci;
        }
    }
}

/// The drift used between simulated jumps at truncation level `truncation`.
pub fn effective_drift(model: &Model, x: &[f64], truncation: f64) -> Result<Vec<f64>> {
    let dynamics = Dynamics::new(model, truncation)?;
    let mut out = vec![0.0; model.dim()];
    dynamics.effective_drift_into(x, &mut out);
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::Divergent("drift correction does not converge".into()));
    }
    Ok(out)
}

/// Simulate along a given realization of the point measure.
pub fn simulate_with_events(
    dynamics: &Dynamics,
    x0: &[f64],
    dt: f64,
    realization: &PointMeasureRealization,
) -> Trajectory {
    let model = dynamics.model();
    let m = model.dim();
    assert_eq!(x0.len(), m, "initial state has the wrong dimension");
    let mut x = x0.to_vec();
    let mut scratch = Scratch::new(m);
    let mut skeleton = vec![(0.0, x.clone())];
    let mut jumps = Vec::with_capacity(realization.events.len());
    let mut t = 0.0;
    let mut explosion;
    let horizon = realization.horizon;
    let mut events = realization.events.iter().filter(|e| e.time <= horizon).peekable();
    loop {
        let next: Option<&JumpEvent> = events.peek().copied();
        let seg_end = next.map(|e| e.time).unwrap_or(horizon);
        explosion = dynamics.flow(&mut x, t, seg_end - t, dt, &mut scratch, |s, y| skeleton.push((s, y.to_vec())));
        if explosion.is_some() {
            break;
        }
        t = seg_end;
        let Some(event) = next else { break };
        events.next();
        let pre = x.clone();
        let c = model.jump(&pre, &event.mark);
        let post: Vec<f64> = pre.iter().zip(&c).map(|(p, ci)| p + ci).collect();
        x.copy_from_slice(&post);
        if skeleton.last().map(|(s, _)| *s) != Some(t) {
            skeleton.push((t, pre.clone()));
        }
        skeleton.push((t, post.clone()));
        jumps.push(JumpRecord { time: t, mark: event.mark.clone(), pre_state: pre, post_state: post });
        if let Some(e) = dynamics.check_overflow(&x, t) {
            explosion = Some(e);
            break;
        }
        if t >= horizon {
            break;
        }
    }
    Trajectory { x0: x0.to_vec(), skeleton, jumps, truncation: realization.truncation, explosion }
}

/// Simulate one path of the model from `x0` over `params.horizon`.
pub fn simulate_path(model: &Model, x0: &[f64], params: &SimParams, rng: &mut StreamRng) -> Result<Trajectory> {
    params.validate()?;
    if x0.len() != model.dim() {
        return Err(Error::Precondition(format!(
            "initial state has dimension {} but the model has {}",
            x0.len(),
            model.dim()
        )));
    }
    let dynamics = Dynamics::with_overflow(model, params.truncation, params.overflow)?;
    let realization = model.measure().sample_point_measure(params.horizon, params.truncation, rng)?;
    Ok(simulate_with_events(&dynamics, x0, params.dt, &realization))
}

/// Streaming simulation of one path with exponential waiting times; used
/// where the stopping time is not known in advance.
#[derive(Debug, Clone)]
pub struct Walker<'d, 'm> {
    dynamics: &'d Dynamics<'m>,
    state: Vec<f64>,
    time: f64,
    next_jump: f64,
    rng: StreamRng,
    scratch: Scratch,
    explosion: Option<Explosion>,
    jump_count: usize,
}

impl<'d, 'm> Walker<'d, 'm> {
    pub fn new(dynamics: &'d Dynamics<'m>, x0: &[f64], mut rng: StreamRng) -> Self {
        let next_jump = dynamics.sampler().waiting_time(&mut rng);
        Self {
            dynamics,
            state: x0.to_vec(),
            time: 0.0,
            next_jump,
            rng,
            scratch: Scratch::new(x0.len()),
            explosion: None,
            jump_count: 0,
        }
    }

    /// Restart at `(time, state)`, keeping the random stream.
    pub fn reset(&mut self, time: f64, state: &[f64]) {
        self.state.copy_from_slice(state);
        self.time = time;
        self.next_jump = time + self.dynamics.sampler().waiting_time(&mut self.rng);
        self.explosion = None;
    }

    pub fn state(&self) -> &[f64] {
        &self.state
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn explosion(&self) -> Option<Explosion> {
        self.explosion
    }

    pub fn jump_count(&self) -> usize {
        self.jump_count
    }

    pub fn rng(&mut self) -> &mut StreamRng {
        &mut self.rng
    }

    /// Advance to `t_end`, calling `observe(t, x)` after every integrator
    /// step and every jump.
    pub fn advance_observed<O: FnMut(f64, &[f64])>(&mut self, t_end: f64, dt: f64, mut observe: O) -> Option<Explosion> {
        while self.explosion.is_none() && self.time < t_end {
            let jump_due = self.next_jump <= t_end;
            let seg_end = if jump_due { self.next_jump } else { t_end };
            self.explosion = self.dynamics.flow(
                &mut self.state,
                self.time,
                seg_end - self.time,
                dt,
                &mut self.scratch,
                &mut observe,
            );
            if self.explosion.is_some() {
                break;
            }
            self.time = seg_end;
            if jump_due {
                let mark = self.dynamics.sampler().mark(&mut self.rng);
                self.dynamics.apply_jump(&mut self.state, &mark, &mut self.scratch);
                self.jump_count += 1;
                self.next_jump += self.dynamics.sampler().waiting_time(&mut self.rng);
                self.explosion = self.dynamics.check_overflow(&self.state, self.time);
                observe(self.time, &self.state);
            }
        }
        self.explosion
    }

    pub fn advance_to(&mut self, t_end: f64, dt: f64) -> Option<Explosion> {
        self.advance_observed(t_end, dt, |_, _| {})
    }
}
