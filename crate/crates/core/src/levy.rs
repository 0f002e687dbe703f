//! Lévy measures and realizations of their Poisson point measures.
//!
//! A measure is a finite list of atoms plus an optional diffuse part given
//! in polar form: `Π(du) = g(ρ) dρ · σ(dθ)` with `ρ = ‖u‖`, `g` a radial
//! density and `σ` a direction measure on the unit sphere. For the uniform
//! direction law `σ` is the surface measure, so in one dimension it is the
//! counting measure on `{−1, +1}`; a fixed direction list carries explicit
//! weights.
//!
//! Infinite-activity measures are handled by truncation: only marks with
//! `‖u‖ ≥ truncation` are sampled, the rest is compensated in the drift.

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{self, QuadConfig};

/// Radial part `g(ρ)` of a diffuse Lévy density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "radial", rename_all = "snake_case")]
pub enum RadialDensity {
    /// `scale · ρ^(−exponent)` on `(lower, upper]`.
    Power {
        scale: f64,
        exponent: f64,
        #[serde(default)]
        lower: f64,
        #[serde(default)]
        upper: Option<f64>,
    },
    /// Pareto tail `scale · alpha · cutoff^alpha · ρ^(−alpha−1)` for `ρ > cutoff`.
    Pareto {
        alpha: f64,
        cutoff: f64,
        #[serde(default = "one")]
        scale: f64,
    },
    /// `scale · exp(−rate · ρ)` for `ρ > 0`.
    Exponential { scale: f64, rate: f64 },
}

fn one() -> f64 {
    1.0
}

impl RadialDensity {
    /// The equivalent power-law parameters, if any.
    fn as_power(&self) -> Option<(f64, f64, f64, f64)> {
        match *self {
            RadialDensity::Power { scale, exponent, lower, upper } => {
                Some((scale, exponent, lower, upper.unwrap_or(f64::INFINITY)))
            }
            RadialDensity::Pareto { alpha, cutoff, scale } => {
                Some((scale * alpha * cutoff.powf(alpha), alpha + 1.0, cutoff, f64::INFINITY))
            }
            RadialDensity::Exponential { .. } => None,
        }
    }

    pub fn eval(&self, rho: f64) -> f64 {
        match *self {
            RadialDensity::Exponential { scale, rate } => {
                if rho > 0.0 {
                    scale * (-rate * rho).exp()
                } else {
                    0.0
                }
            }
            _ => {
                let (scale, exponent, lower, upper) = self.as_power().unwrap();
                if rho > lower && rho <= upper {
                    scale * rho.powf(-exponent)
                } else {
                    0.0
                }
            }
        }
    }

    /// Support `(lower, upper]` of the density.
    pub fn support(&self) -> (f64, f64) {
        match self {
            RadialDensity::Exponential { .. } => (0.0, f64::INFINITY),
            _ => {
                let (_, _, lower, upper) = self.as_power().unwrap();
                (lower, upper)
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidMeasure(m.to_string()));
        match *self {
            RadialDensity::Power { scale, exponent, lower, upper } => {
                if !(scale > 0.0) || !exponent.is_finite() || !(lower >= 0.0) {
                    return bad("power density needs scale > 0, finite exponent, lower ≥ 0");
                }
                if let Some(u) = upper {
                    if !(u > lower) {
                        return bad("power density needs upper > lower");
                    }
                }
                if upper.is_none() && exponent <= 1.0 {
                    return bad("power density without upper bound needs exponent > 1");
                }
            }
            RadialDensity::Pareto { alpha, cutoff, scale } => {
                if !(alpha > 0.0 && cutoff > 0.0 && scale > 0.0) {
                    return bad("pareto density needs alpha, cutoff, scale > 0");
                }
            }
            RadialDensity::Exponential { scale, rate } => {
                if !(scale > 0.0 && rate > 0.0) {
                    return bad("exponential density needs scale, rate > 0");
                }
            }
        }
        Ok(())
    }

    /// Draw a radius from `g` restricted to `[from, ∞)` normalized, given
    /// the restricted mass `mass` and a uniform variate `w ∈ [0, 1)`.
    fn sample_radius(&self, from: f64, mass: f64, w: f64) -> f64 {
        match *self {
            RadialDensity::Exponential { rate, .. } => from.max(0.0) - (1.0 - w).ln() / rate,
            _ => {
                let (scale, p, lower, _upper) = self.as_power().unwrap();
                let lo = from.max(lower);
                let target = w * mass / scale;
                if (p - 1.0).abs() < 1e-14 {
                    lo * target.exp()
                } else {
                    let e = 1.0 - p;
                    (lo.powf(e) + e * target).powf(1.0 / e)
                }
            }
        }
    }
}

/// Direction part `σ` of a diffuse Lévy density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionLaw {
    /// Surface measure on the unit sphere.
    Uniform,
    /// Weighted list of unit directions.
    Fixed(Vec<WeightedDirection>),
}

impl Default for DirectionLaw {
    fn default() -> Self {
        DirectionLaw::Uniform
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedDirection {
    pub dir: Vec<f64>,
    pub weight: f64,
}

/// Diffuse part of a Lévy measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diffuse {
    #[serde(flatten)]
    pub radial: RadialDensity,
    #[serde(default)]
    pub directions: DirectionLaw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub mark: Vec<f64>,
    pub weight: f64,
}

/// Serialized form of a Lévy measure (the scenario-file schema).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LevyMeasureSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default)]
    pub atoms: Vec<Atom>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diffuse: Option<Diffuse>,
}

/// A validated Lévy measure on `R^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct LevyMeasure {
    dim: usize,
    atoms: Vec<Atom>,
    diffuse: Option<Diffuse>,
    /// Unit directions and their weights, for quadrature and sampling.
    dir_nodes: Vec<(Vec<f64>, f64)>,
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn sphere_area(d: usize) -> f64 {
    // 2 π^{d/2} / Γ(d/2)
    let half = d as f64 / 2.0;
    2.0 * std::f64::consts::PI.powf(half) / statrs::function::gamma::gamma(half)
}

/// Deterministic quadrature nodes for the surface measure of `S^{d−1}`.
fn uniform_nodes(d: usize) -> Vec<(Vec<f64>, f64)> {
    match d {
        1 => vec![(vec![1.0], 1.0), (vec![-1.0], 1.0)],
        2 => {
            let k = 64;
            let w = 2.0 * std::f64::consts::PI / k as f64;
            (0..k)
                .map(|i| {
                    let th = (i as f64 + 0.5) * w;
                    (vec![th.cos(), th.sin()], w)
                })
                .collect()
        }
        _ => {
            // Fibonacci-style covering lifted through a fixed Gaussian stream
            // for d > 3; exact Fibonacci lattice for d = 3.
            let k = 256;
            let w = sphere_area(d) / k as f64;
            if d == 3 {
                let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
                (0..k)
                    .map(|i| {
                        let z = 1.0 - (2.0 * i as f64 + 1.0) / k as f64;
                        let r = (1.0 - z * z).sqrt();
                        let th = golden * i as f64;
                        (vec![r * th.cos(), r * th.sin(), z], w)
                    })
                    .collect()
            } else {
                let mut rng = crate::rng::stream(0x5EED, crate::rng::Purpose::Check, d as u64);
                (0..k)
                    .map(|_| {
                        let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
                        let n = norm(&v);
                        (v.into_iter().map(|x| x / n).collect(), w)
                    })
                    .collect()
            }
        }
    }
}

impl TryFrom<LevyMeasureSpec> for LevyMeasure {
    type Error = Error;
    fn try_from(spec: LevyMeasureSpec) -> Result<Self> {
        let dim = spec
            .dim
            .or_else(|| spec.atoms.first().map(|a| a.mark.len()))
            .or_else(|| match &spec.diffuse {
                Some(Diffuse { directions: DirectionLaw::Fixed(list), .. }) => {
                    list.first().map(|d| d.dir.len())
                }
                _ => None,
            })
            .ok_or_else(|| Error::InvalidMeasure("cannot infer dimension; set `dim`".into()))?;
        LevyMeasure::new(dim, spec.atoms, spec.diffuse)
    }
}

impl From<&LevyMeasure> for LevyMeasureSpec {
    fn from(m: &LevyMeasure) -> Self {
        LevyMeasureSpec { dim: Some(m.dim), atoms: m.atoms.clone(), diffuse: m.diffuse.clone() }
    }
}

/// Outcome of a region-mass estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionMass {
    /// `+∞` when the region contains an infinite-mass neighbourhood of 0.
    pub value: f64,
    /// Bound on the discretization error of the diffuse part.
    pub error: f64,
}

impl LevyMeasure {
    pub fn new(dim: usize, atoms: Vec<Atom>, diffuse: Option<Diffuse>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidMeasure("dimension must be positive".into()));
        }
        for (i, a) in atoms.iter().enumerate() {
            if a.mark.len() != dim {
                return Err(Error::InvalidMeasure(format!("atom {i} has wrong dimension")));
            }
            if !(a.weight > 0.0) || !a.weight.is_finite() {
                return Err(Error::InvalidMeasure(format!("atom {i} weight must be positive")));
            }
            if a.mark.iter().all(|&x| x == 0.0) {
                return Err(Error::InvalidMeasure(format!("atom {i} sits at the origin")));
            }
            if atoms[..i].iter().any(|b| b.mark == a.mark) {
                return Err(Error::InvalidMeasure(format!("atom {i} duplicates an earlier mark")));
            }
        }
        let dir_nodes = match &diffuse {
            None => Vec::new(),
            Some(df) => {
                df.radial.validate()?;
                match &df.directions {
                    DirectionLaw::Uniform => uniform_nodes(dim),
                    DirectionLaw::Fixed(list) => {
                        if list.is_empty() {
                            return Err(Error::InvalidMeasure("empty direction list".into()));
                        }
                        let mut nodes = Vec::with_capacity(list.len());
                        for d in list {
                            let n = norm(&d.dir);
                            if d.dir.len() != dim || !(n > 0.0) || !(d.weight > 0.0) {
                                return Err(Error::InvalidMeasure(
                                    "directions need the measure dimension, nonzero length and positive weight"
                                        .into(),
                                ));
                            }
                            nodes.push((d.dir.iter().map(|x| x / n).collect(), d.weight));
                        }
                        nodes
                    }
                }
            }
        };
        Ok(Self { dim, atoms, diffuse, dir_nodes })
    }

    /// The zero measure.
    pub fn empty(dim: usize) -> Self {
        Self::new(dim, Vec::new(), None).expect("empty measure is valid")
    }

    /// Atoms only, from `(mark, weight)` pairs.
    pub fn atomic(marks: &[(Vec<f64>, f64)]) -> Result<Self> {
        let dim = marks.first().map(|m| m.0.len()).unwrap_or(1);
        let atoms = marks.iter().map(|(m, w)| Atom { mark: m.clone(), weight: *w }).collect();
        Self::new(dim, atoms, None)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn diffuse(&self) -> Option<&Diffuse> {
        self.diffuse.as_ref()
    }

    pub fn is_zero(&self) -> bool {
        self.atoms.is_empty() && self.diffuse.is_none()
    }

    /// Weighted unit directions covering the diffuse direction measure.
    pub fn direction_nodes(&self) -> &[(Vec<f64>, f64)] {
        &self.dir_nodes
    }

    /// Total weight of the direction measure.
    pub fn direction_mass(&self) -> f64 {
        match self.diffuse.as_ref().map(|d| &d.directions) {
            None => 0.0,
            Some(DirectionLaw::Uniform) => sphere_area(self.dim),
            Some(DirectionLaw::Fixed(list)) => list.iter().map(|d| d.weight).sum(),
        }
    }

    /// `∫_{lo}^{hi} w(ρ) g(ρ) dρ` over the intersection with the support.
    pub(crate) fn radial_integral<W: Fn(f64) -> f64>(
        &self,
        weight: W,
        lo: f64,
        hi: f64,
        cfg: &QuadConfig,
    ) -> std::result::Result<f64, quad::Divergent> {
        let Some(df) = &self.diffuse else { return Ok(0.0) };
        let (slo, shi) = df.radial.support();
        let lo = lo.max(slo);
        let hi = hi.min(shi);
        if hi <= lo {
            return Ok(0.0);
        }
        let g = &df.radial;
        quad::integrate_improper(|r| weight(r) * g.eval(r), lo, hi, cfg).map(|q| q.value)
    }

    /// `Π({u : ‖u‖ ≥ truncation})`.
    pub fn total_rate(&self, truncation: f64) -> Result<f64> {
        self.total_rate_with(truncation, &QuadConfig::default())
    }

    pub fn total_rate_with(&self, truncation: f64, cfg: &QuadConfig) -> Result<f64> {
        if !(truncation >= 0.0) {
            return Err(Error::Precondition("truncation must be nonnegative".into()));
        }
        let atoms: f64 = self
            .atoms
            .iter()
            .filter(|a| norm(&a.mark) >= truncation)
            .map(|a| a.weight)
            .sum();
        let radial = self
            .radial_integral(|_| 1.0, truncation, f64::INFINITY, cfg)
            .map_err(|_| Error::InfiniteMass { truncation })?;
        Ok(atoms + self.direction_mass() * radial)
    }

    /// `∫_{‖u‖>1} ‖u‖^q Π(du)`; `+∞` when the integral diverges.
    pub fn tail_moment(&self, q: f64) -> Result<f64> {
        self.tail_moment_with(q, &QuadConfig::default())
    }

    pub fn tail_moment_with(&self, q: f64, cfg: &QuadConfig) -> Result<f64> {
        if !(q > 0.0) {
            return Err(Error::Precondition("tail moment order must be positive".into()));
        }
        let atoms: f64 = self
            .atoms
            .iter()
            .filter_map(|a| {
                let n = norm(&a.mark);
                (n > 1.0).then(|| a.weight * n.powf(q))
            })
            .sum();
        match self.radial_integral(|r| r.powf(q), 1.0, f64::INFINITY, cfg) {
            Ok(v) => Ok(atoms + self.direction_mass() * v),
            Err(_) => Ok(f64::INFINITY),
        }
    }

    /// `Π({u : predicate(u)})`, exact on atoms, stratified on the diffuse
    /// part (64 log-spaced radii per dyadic shell and every direction node).
    pub fn region_mass<P: Fn(&[f64]) -> bool>(&self, predicate: P) -> RegionMass {
        let atoms: f64 = self.atoms.iter().filter(|a| predicate(&a.mark)).map(|a| a.weight).sum();
        let Some(df) = &self.diffuse else {
            return RegionMass { value: atoms, error: 0.0 };
        };
        let (slo, shi) = df.radial.support();
        let cfg = QuadConfig { max_shells: 200, ..QuadConfig::default() };
        const STRATA: usize = 64;
        let mut total = 0.0;
        let mut error = 0.0;
        for (dir, w) in &self.dir_nodes {
            let error_cell = std::cell::Cell::new(0.0);
            let segment = |a: f64, b: f64| {
                let mass = quad::integrate(|r| df.radial.eval(r), a, b, &cfg).value;
                if mass == 0.0 {
                    return 0.0;
                }
                let mut hits = 0usize;
                let mut buf = vec![0.0; dir.len()];
                for i in 0..STRATA {
                    let r = a * (b / a).powf((i as f64 + 0.5) / STRATA as f64);
                    for (bj, dj) in buf.iter_mut().zip(dir) {
                        *bj = r * dj;
                    }
                    if predicate(&buf) {
                        hits += 1;
                    }
                }
                if hits != 0 && hits != STRATA {
                    error_cell.set(error_cell.get() + mass / STRATA as f64);
                }
                mass * hits as f64 / STRATA as f64
            };
            match quad::integrate_segments(segment, slo, shi, &cfg) {
                Ok(q) => total += w * q.value,
                Err(_) => {
                    // The shell series kept growing: the predicate keeps an
                    // infinite-mass neighbourhood of the origin (or infinity).
                    return RegionMass { value: f64::INFINITY, error: 0.0 };
                }
            }
            error += w * error_cell.get();
        }
        RegionMass { value: atoms + total, error }
    }

    /// Draw one mark from `Π` restricted to `‖u‖ ≥ truncation` and
    /// normalized, given the restricted atom mass and diffuse mass.
    fn sample_mark<R: Rng + ?Sized>(&self, rng: &mut R, truncation: f64, atom_mass: f64, diffuse_mass: f64) -> Vec<f64> {
        let pick = rng.random::<f64>() * (atom_mass + diffuse_mass);
        if pick < atom_mass || diffuse_mass == 0.0 {
            let mut acc = 0.0;
            let mut last = None;
            for a in &self.atoms {
                if norm(&a.mark) < truncation {
                    continue;
                }
                acc += a.weight;
                last = Some(a);
                if pick < acc {
                    return a.mark.clone();
                }
            }
            return last.expect("positive atom mass").mark.clone();
        }
        let df = self.diffuse.as_ref().expect("positive diffuse mass");
        let radial_mass = diffuse_mass / self.direction_mass();
        let rho = df.radial.sample_radius(truncation, radial_mass, rng.random::<f64>());
        let dir: Vec<f64> = match &df.directions {
            DirectionLaw::Uniform => loop {
                let v: Vec<f64> = (0..self.dim).map(|_| rng.sample(StandardNormal)).collect();
                let n = norm(&v);
                if n > 0.0 {
                    break v.into_iter().map(|x| x / n).collect();
                }
            },
            DirectionLaw::Fixed(_) => {
                let total: f64 = self.dir_nodes.iter().map(|d| d.1).sum();
                let mut t = rng.random::<f64>() * total;
                let mut chosen = &self.dir_nodes[self.dir_nodes.len() - 1].0;
                for (d, w) in &self.dir_nodes {
                    if t < *w {
                        chosen = d;
                        break;
                    }
                    t -= w;
                }
                chosen.clone()
            }
        };
        dir.into_iter().map(|x| x * rho).collect()
    }

    /// Sample the point measure restricted to `‖u‖ ≥ truncation` on
    /// `(0, horizon]`.
    pub fn sample_point_measure<R: Rng + ?Sized>(
        &self,
        horizon: f64,
        truncation: f64,
        rng: &mut R,
    ) -> Result<PointMeasureRealization> {
        if !(horizon > 0.0) {
            return Err(Error::Precondition("horizon must be positive".into()));
        }
        let sampler = JumpSampler::new(self, truncation)?;
        let rate = sampler.rate();
        let mut events = Vec::new();
        if rate > 0.0 {
            let count = Poisson::new(rate * horizon)
                .map_err(|e| Error::Precondition(e.to_string()))?
                .sample(rng) as usize;
            let mut times: Vec<f64> = (0..count).map(|_| horizon * (1.0 - rng.random::<f64>())).collect();
            times.sort_by(|a, b| a.partial_cmp(b).unwrap());
            times.dedup();
            for t in times {
                events.push(JumpEvent { time: t, mark: sampler.mark(rng) });
            }
        }
        Ok(PointMeasureRealization { horizon, truncation, events })
    }
}

/// Precomputed masses for repeated mark sampling at a fixed truncation.
#[derive(Debug, Clone)]
pub struct JumpSampler<'a> {
    measure: &'a LevyMeasure,
    truncation: f64,
    atom_mass: f64,
    diffuse_mass: f64,
}

impl<'a> JumpSampler<'a> {
    pub fn new(measure: &'a LevyMeasure, truncation: f64) -> Result<Self> {
        let total = measure.total_rate(truncation)?;
        let atom_mass: f64 = measure
            .atoms
            .iter()
            .filter(|a| norm(&a.mark) >= truncation)
            .map(|a| a.weight)
            .sum();
        Ok(Self { measure, truncation, atom_mass, diffuse_mass: (total - atom_mass).max(0.0) })
    }

    pub fn rate(&self) -> f64 {
        self.atom_mass + self.diffuse_mass
    }

    pub fn mark<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.measure.sample_mark(rng, self.truncation, self.atom_mass, self.diffuse_mass)
    }

    /// Waiting time to the next jump (`+∞` for a zero rate).
    pub fn waiting_time<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let rate = self.rate();
        if rate > 0.0 {
            -(1.0 - rng.random::<f64>()).ln() / rate
        } else {
            f64::INFINITY
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpEvent {
    pub time: f64,
    pub mark: Vec<f64>,
}

/// Realization of the truncated Poisson point measure on `(0, horizon]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointMeasureRealization {
    pub horizon: f64,
    pub truncation: f64,
    pub events: Vec<JumpEvent>,
}

impl PointMeasureRealization {
    pub fn empty(horizon: f64) -> Self {
        Self { horizon, truncation: 0.0, events: Vec::new() }
    }

    /// A realization with prescribed events (sorted on construction).
    pub fn with_events(horizon: f64, mut events: Vec<JumpEvent>) -> Self {
        events.sort_by(|a, b| a.time.partial_cmp(&b.time).unwrap());
        Self { horizon, truncation: 0.0, events }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};

    fn two_one() -> LevyMeasure {
        LevyMeasure::atomic(&[(vec![1.0], 2.0), (vec![-1.0], 1.0)]).unwrap()
    }

    fn inv_square_unit() -> LevyMeasure {
        LevyMeasure::new(
            1,
            vec![],
            Some(Diffuse {
                radial: RadialDensity::Power { scale: 1.0, exponent: 2.0, lower: 0.0, upper: Some(1.0) },
                directions: DirectionLaw::Uniform,
            }),
        )
        .unwrap()
    }

    #[test]
    fn total_rate_examples() {
        assert_eq!(two_one().total_rate(0.0).unwrap(), 3.0);
        assert_eq!(LevyMeasure::atomic(&[(vec![1.0], 1.0)]).unwrap().total_rate(2.0).unwrap(), 0.0);
        let r = inv_square_unit().total_rate(0.1).unwrap();
        assert!((r - 18.0).abs() < 1e-8, "{r}");
        assert!(matches!(inv_square_unit().total_rate(0.0), Err(Error::InfiniteMass { .. })));
    }

    #[test]
    fn construction_rejects_bad_atoms() {
        assert!(LevyMeasure::atomic(&[(vec![1.0], 1.0), (vec![1.0], 2.0)]).is_err());
        assert!(LevyMeasure::atomic(&[(vec![0.0], 1.0)]).is_err());
        assert!(LevyMeasure::atomic(&[(vec![1.0], -1.0)]).is_err());
        assert!(LevyMeasure::atomic(&[(vec![1.0], 0.0)]).is_err());
    }

    #[test]
    fn tail_moment_examples() {
        let delta1 = LevyMeasure::atomic(&[(vec![1.0], 1.0)]).unwrap();
        assert_eq!(delta1.tail_moment(2.0).unwrap(), 0.0);
        let m = LevyMeasure::atomic(&[(vec![1.0], 2.0), (vec![-1.0], 1.0), (vec![3.0], 1.0)]).unwrap();
        assert!((m.tail_moment(2.0).unwrap() - 9.0).abs() < 1e-12);
        let cubic = LevyMeasure::new(
            1,
            vec![],
            Some(Diffuse {
                radial: RadialDensity::Power { scale: 1.0, exponent: 3.0, lower: 0.0, upper: None },
                directions: DirectionLaw::Uniform,
            }),
        )
        .unwrap();
        assert_eq!(cubic.tail_moment(2.0).unwrap(), f64::INFINITY);
        // ∫_1^∞ ρ ρ^-3 = 1 per direction
        assert!((cubic.tail_moment(1.0).unwrap() - 2.0).abs() < 1e-7);
    }

    #[test]
    fn region_mass_examples() {
        let delta1 = LevyMeasure::atomic(&[(vec![1.0], 1.0)]).unwrap();
        assert_eq!(delta1.region_mass(|u| norm(u) < 0.5).value, 0.0);
        assert_eq!(two_one().region_mass(|u| u[0] > 0.0).value, 2.0);
        let cone = |u: &[f64]| (u[0] * 1.0).abs() >= 0.5 * norm(u);
        assert_eq!(delta1.region_mass(cone).value, 1.0);
        // diffuse: ρ^-2 on (0,1] both directions; {u > 0.5} has mass ∫_.5^1 ρ^-2 = 1
        let m = inv_square_unit().region_mass(|u| u[0] > 0.5);
        assert!((m.value - 1.0).abs() < 1e-6 + m.error, "{m:?}");
        // any neighbourhood of 0 carries infinite mass
        assert_eq!(inv_square_unit().region_mass(|u| u[0] > 0.0).value, f64::INFINITY);
    }

    #[test]
    fn empty_measure_has_no_events() {
        let mut rng = stream(1, Purpose::Path, 0);
        let r = LevyMeasure::empty(1).sample_point_measure(10.0, 0.0, &mut rng).unwrap();
        assert!(r.events.is_empty());
    }

    #[test]
    fn diffuse_marks_respect_truncation() {
        let m = inv_square_unit();
        let mut rng = stream(3, Purpose::Path, 0);
        let r = m.sample_point_measure(5.0, 0.1, &mut rng).unwrap();
        assert!(!r.events.is_empty());
        for e in &r.events {
            let n = norm(&e.mark);
            assert!((0.1..=1.0 + 1e-12).contains(&n), "{n}");
        }
    }

    #[test]
    fn spec_roundtrip() {
        let json = r#"{"atoms":[{"mark":[1.0],"weight":2.0}],"diffuse":{"radial":"pareto","alpha":1.5,"cutoff":2.0}}"#;
        let spec: LevyMeasureSpec = serde_json::from_str(json).unwrap();
        let m = LevyMeasure::try_from(spec).unwrap();
        // pareto of unit scale has mass 1 per direction
        assert!((m.total_rate(0.0).unwrap() - 4.0).abs() < 1e-8);
        let back = LevyMeasureSpec::from(&m);
        let again = LevyMeasure::try_from(back).unwrap();
        assert_eq!(m, again);
    }
}
