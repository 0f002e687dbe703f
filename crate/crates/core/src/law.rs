//! Binned empirical laws, Monte Carlo transition-law estimates and the
//! total-variation distance between them.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Model;
use crate::rng::{stream, Purpose, StreamRng};
use crate::sde::{Dynamics, SimParams, Walker};

/// A regular grid of cells: `counts[i]` cells of width `width[i]` starting
/// at `origin[i]` along axis `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Binning {
    pub origin: Vec<f64>,
    pub width: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Binning {
    pub fn new(origin: Vec<f64>, width: Vec<f64>, counts: Vec<usize>) -> Result<Self> {
        let b = Self { origin, width, counts };
        b.validate()?;
        Ok(b)
    }

    /// `cells` equal cells on `[lo, hi)` in one dimension.
    pub fn uniform(lo: f64, hi: f64, cells: usize) -> Result<Self> {
        if !(hi > lo) {
            return Err(Error::DegenerateBinning(format!("empty range [{lo}, {hi})")));
        }
        Self::new(vec![lo], vec![(hi - lo) / cells.max(1) as f64], vec![cells])
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.origin.len();
        if d == 0 || self.width.len() != d || self.counts.len() != d {
            return Err(Error::DegenerateBinning("origin, width and counts must share a positive length".into()));
        }
        if self.counts.iter().any(|&c| c == 0) {
            return Err(Error::DegenerateBinning("zero cells along an axis".into()));
        }
        if self.width.iter().any(|w| !(*w > 0.0 && w.is_finite())) || self.origin.iter().any(|o| !o.is_finite()) {
            return Err(Error::DegenerateBinning("cell widths must be positive and finite".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.origin.len()
    }

    /// Number of in-range cells.
    pub fn n_cells(&self) -> usize {
        self.counts.iter().product()
    }

    /// Flat cell index of `x`, or the out-of-range index `n_cells()`.
    pub fn cell_of(&self, x: &[f64]) -> usize {
        let mut idx = 0usize;
        for i in (0..self.dim()).rev() {
            let k = ((x[i] - self.origin[i]) / self.width[i]).floor();
            if !(k >= 0.0 && k < self.counts[i] as f64) {
                return self.n_cells();
            }
            idx = idx * self.counts[i] + k as usize;
        }
        idx
    }

    /// Lower corner of an in-range cell.
    pub fn cell_corner(&self, mut idx: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dim());
        for i in 0..self.dim() {
            let k = idx % self.counts[i];
            idx /= self.counts[i];
            out.push(self.origin[i] + k as f64 * self.width[i]);
        }
        out
    }

    pub fn cell_center(&self, idx: usize) -> Vec<f64> {
        self.cell_corner(idx).iter().zip(&self.width).map(|(c, w)| c + 0.5 * w).collect()
    }

    /// Uniform point in an in-range cell.
    pub fn sample_in_cell<R: Rng + ?Sized>(&self, idx: usize, rng: &mut R) -> Vec<f64> {
        self.cell_corner(idx)
            .iter()
            .zip(&self.width)
            .map(|(c, w)| c + w * rng.random::<f64>())
            .collect()
    }
}

/// A probability law on the cells of a binning plus one out-of-range cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalLaw {
    pub binning: Binning,
    /// `n_cells() + 1` masses; the last is the out-of-range cell.
    pub masses: Vec<f64>,
    pub sample_count: usize,
    /// Exact per-axis mean and second moment of the underlying samples.
    pub mean: Vec<f64>,
    pub second_moment: Vec<f64>,
    /// Samples that fell outside the binning, kept for resampling.
    #[serde(default)]
    pub outside: Vec<Vec<f64>>,
}

impl EmpiricalLaw {
    pub fn from_samples(binning: &Binning, samples: &[Vec<f64>]) -> Result<Self> {
        let weights = vec![1.0; samples.len()];
        Self::from_weighted(binning, samples, &weights)
    }

    pub fn from_weighted(binning: &Binning, samples: &[Vec<f64>], weights: &[f64]) -> Result<Self> {
        binning.validate()?;
        let mut acc = LawAccumulator::new(binning);
        for (x, w) in samples.iter().zip(weights) {
            acc.add(x, *w);
        }
        acc.finish(samples.len())
    }

    /// Point mass at the cell of `x`.
    pub fn dirac(binning: &Binning, x: &[f64]) -> Result<Self> {
        Self::from_samples(binning, &[x.to_vec()])
    }

    pub fn out_of_range_mass(&self) -> f64 {
        *self.masses.last().expect("out-of-range cell")
    }

    pub fn variance(&self) -> Vec<f64> {
        self.mean.iter().zip(&self.second_moment).map(|(m, s)| s - m * m).collect()
    }

    /// Draw a state: a cell by mass, then a uniform point in it (or a stored
    /// out-of-range sample).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let n = self.binning.n_cells();
        let k = pick_index(&self.masses, rng);
        if k < n {
            self.binning.sample_in_cell(k, rng)
        } else if self.outside.is_empty() {
            self.binning.cell_center(n.saturating_sub(1))
        } else {
            self.outside[rng.random_range(0..self.outside.len())].clone()
        }
    }

    /// Same law on another binning, by cell centers.
    pub fn rebin(&self, binning: &Binning) -> Result<Self> {
        binning.validate()?;
        let mut acc = LawAccumulator::new(binning);
        let n = self.binning.n_cells();
        for (k, &w) in self.masses[..n].iter().enumerate() {
            if w > 0.0 {
                acc.add_cell(binning.cell_of(&self.binning.cell_center(k)), w);
            }
        }
        let out_w = self.out_of_range_mass();
        if out_w > 0.0 {
            if self.outside.is_empty() {
                acc.add_cell(binning.n_cells(), out_w);
            } else {
                let each = out_w / self.outside.len() as f64;
                for x in &self.outside {
                    acc.add_cell(binning.cell_of(x), each);
                    if binning.cell_of(x) == binning.n_cells() {
                        acc.outside.push(x.clone());
                    }
                }
            }
        }
        acc.mean_sum = self.mean.iter().map(|m| m * acc.total).collect();
        acc.sq_sum = self.second_moment.iter().map(|m| m * acc.total).collect();
        acc.finish(self.sample_count)
    }
}

/// Index drawn with probability proportional to `weights`.
pub(crate) fn pick_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let mut t = rng.random::<f64>() * total;
    let mut last = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            if t < w {
                return i;
            }
            t -= w;
            last = i;
        }
    }
    last
}

/// Incremental weighted histogram with exact moments.
#[derive(Debug, Clone)]
pub(crate) struct LawAccumulator {
    binning: Binning,
    weights: Vec<f64>,
    total: f64,
    mean_sum: Vec<f64>,
    sq_sum: Vec<f64>,
    outside: Vec<Vec<f64>>,
}

impl LawAccumulator {
    pub(crate) fn new(binning: &Binning) -> Self {
        let d = binning.dim();
        Self {
            binning: binning.clone(),
            weights: vec![0.0; binning.n_cells() + 1],
            total: 0.0,
            mean_sum: vec![0.0; d],
            sq_sum: vec![0.0; d],
            outside: Vec::new(),
        }
    }

    pub(crate) fn add(&mut self, x: &[f64], w: f64) {
        let k = self.binning.cell_of(x);
        if k == self.binning.n_cells() && self.outside.len() < 100_000 {
            self.outside.push(x.to_vec());
        }
        self.add_cell(k, w);
        for i in 0..x.len().min(self.mean_sum.len()) {
            self.mean_sum[i] += w * x[i];
            self.sq_sum[i] += w * x[i] * x[i];
        }
    }

    /// Add weight to a cell without touching the moments.
    pub(crate) fn add_cell(&mut self, k: usize, w: f64) {
        self.weights[k] += w;
        self.total += w;
    }

    /// Add moment contributions without touching the cells.
    pub(crate) fn add_moments(&mut self, first: &[f64], second: &[f64]) {
        for i in 0..self.mean_sum.len() {
            self.mean_sum[i] += first[i];
            self.sq_sum[i] += second[i];
        }
    }

    pub(crate) fn merge(&mut self, other: &LawAccumulator) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            *a += b;
        }
        self.total += other.total;
        for i in 0..self.mean_sum.len() {
            self.mean_sum[i] += other.mean_sum[i];
            self.sq_sum[i] += other.sq_sum[i];
        }
        self.outside.extend(other.outside.iter().cloned());
    }

    pub(crate) fn finish(self, sample_count: usize) -> Result<EmpiricalLaw> {
        if !(self.total > 0.0) {
            return Err(Error::Precondition("no samples to build a law from".into()));
        }
        let masses = self.weights.iter().map(|w| w / self.total).collect();
        Ok(EmpiricalLaw {
            binning: self.binning,
            masses,
            sample_count,
            mean: self.mean_sum.iter().map(|s| s / self.total).collect(),
            second_moment: self.sq_sum.iter().map(|s| s / self.total).collect(),
            outside: self.outside,
        })
    }
}

/// `d_TV(A, B) = ½ Σ |A_k − B_k|`, out-of-range cell included.
///
/// Disjoint supports give exactly 1, where the sum can fall short by
/// rounding.
pub fn tv_distance(a: &EmpiricalLaw, b: &EmpiricalLaw) -> Result<f64> {
    if a.binning != b.binning {
        return Err(Error::BinningMismatch);
    }
    Ok(tv_masses(&a.masses, &b.masses))
}

pub(crate) fn tv_masses(a: &[f64], b: &[f64]) -> f64 {
    if a.iter().zip(b).all(|(x, y)| x.min(*y) == 0.0) {
        // disjoint supports; half-L1 would inherit rounding in the masses
        return 1.0;
    }
    (0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()).min(1.0)
}

/// Initial condition of a Monte Carlo run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Start {
    Point(Vec<f64>),
    Law(Box<EmpiricalLaw>),
}

impl Start {
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match self {
            Start::Point(x) => x.clone(),
            Start::Law(l) => l.sample(rng),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Start::Point(x) => x.len(),
            Start::Law(l) => l.binning.dim(),
        }
    }
}

impl From<Vec<f64>> for Start {
    fn from(x: Vec<f64>) -> Self {
        Start::Point(x)
    }
}

/// Initial state of path `i`.
pub(crate) fn initial_state(start: &Start, seed: u64, i: u64) -> Vec<f64> {
    match start {
        Start::Point(x) => x.clone(),
        Start::Law(l) => l.sample(&mut stream(seed, Purpose::Start, i)),
    }
}

fn check_start(model: &Model, start: &Start) -> Result<()> {
    if start.dim() != model.dim() {
        return Err(Error::Precondition(format!(
            "start has dimension {} but the model has {}",
            start.dim(),
            model.dim()
        )));
    }
    Ok(())
}

/// States of `n_paths` independent paths at each time of `times`
/// (increasing). Exploded paths are reported as `NaN` states.
pub fn sample_at_times(model: &Model, start: &Start, times: &[f64], params: &SimParams) -> Result<Vec<Vec<Vec<f64>>>> {
    params.validate()?;
    check_start(model, start)?;
    if times.windows(2).any(|w| w[1] < w[0]) || times.iter().any(|t| *t < 0.0) {
        return Err(Error::Precondition("times must be nonnegative and increasing".into()));
    }
    let dynamics = Dynamics::with_overflow(model, params.truncation, params.overflow)?;
    let per_path: Vec<Vec<Vec<f64>>> = (0..params.n_paths)
        .into_par_iter()
        .map(|i| {
            let x0 = initial_state(start, params.seed, i as u64);
            let mut walker = Walker::new(&dynamics, &x0, stream(params.seed, Purpose::Path, i as u64));
            times
                .iter()
                .map(|&t| {
                    if walker.advance_to(t, params.dt).is_some() {
                        vec![f64::NAN; model.dim()]
                    } else {
                        walker.state().to_vec()
                    }
                })
                .collect()
        })
        .collect();
    let mut out = vec![Vec::with_capacity(params.n_paths); times.len()];
    for path in per_path {
        for (k, state) in path.into_iter().enumerate() {
            out[k].push(state);
        }
    }
    Ok(out)
}

/// Histogram of `X(t)` over `params.n_paths` independent paths.
pub fn estimate_law(model: &Model, start: &Start, t: f64, params: &SimParams, binning: &Binning) -> Result<EmpiricalLaw> {
    binning.validate()?;
    if !(t >= 0.0) {
        return Err(Error::Precondition("time must be nonnegative".into()));
    }
    if t == 0.0 {
        if let Start::Law(l) = start {
            return l.rebin(binning);
        }
    }
    let samples = sample_at_times(model, start, &[t], params)?.pop().expect("one time");
    EmpiricalLaw::from_samples(binning, &samples)
}

/// Time-averaged occupation law `(1/t)∫_{burn_in}^{t} P_µ^s ds`: every path
/// contributes its sojourn time in each cell.
pub fn khasminskii_average(
    model: &Model,
    mu0: &Start,
    horizon: f64,
    burn_in: f64,
    params: &SimParams,
    binning: &Binning,
) -> Result<EmpiricalLaw> {
    params.validate()?;
    binning.validate()?;
    check_start(model, mu0)?;
    if !(horizon > burn_in && burn_in >= 0.0) {
        return Err(Error::Precondition(format!("horizon {horizon} must exceed the burn-in {burn_in}")));
    }
    let dynamics = Dynamics::with_overflow(model, params.truncation, params.overflow)?;
    let d = model.dim();
    let per_path: Vec<Result<LawAccumulator>> = (0..params.n_paths).into_par_iter().map(|i| {
        let x0 = initial_state(mu0, params.seed, i as u64);
        let mut walker = Walker::new(&dynamics, &x0, stream(params.seed, Purpose::Path, i as u64));
        if burn_in > 0.0 && walker.advance_to(burn_in, params.dt).is_some() {
            return Err(Error::Divergent(format!("path {i} exploded during the burn-in")));
        }
        let mut acc = LawAccumulator::new(binning);
        let mut prev_t = burn_in;
        let mut prev_x = walker.state().to_vec();
        let mut first = vec![0.0; d];
        let mut second = vec![0.0; d];
        let explosion = walker.advance_observed(horizon, params.dt, |t, x| {
            let h = t - prev_t;
            if h > 0.0 {
                // left-point rule for the cells, trapezoid for the moments
                acc.add_cell(binning.cell_of(&prev_x), h);
                for j in 0..d {
                    first[j] += 0.5 * h * (prev_x[j] + x[j]);
                    second[j] += 0.5 * h * (prev_x[j] * prev_x[j] + x[j] * x[j]);
                }
            }
            prev_t = t;
            prev_x.copy_from_slice(x);
        });
        if let Some(e) = explosion {
            return Err(Error::Divergent(format!("path {i} exploded at t = {}", e.time)));
        }
        acc.add_moments(&first, &second);
        Ok(acc)
    }).collect();
    // merged in path order so the sums do not depend on scheduling
    let mut total = LawAccumulator::new(binning);
    for acc in per_path {
        total.merge(&acc?);
    }
    total.finish(params.n_paths)
}

/// Resample cell indices with replacement and return the law's masses.
pub(crate) fn bootstrap_masses(cells: &[usize], n_cells: usize, rng: &mut StreamRng) -> Vec<f64> {
    let mut m = vec![0.0; n_cells + 1];
    let n = cells.len();
    let w = 1.0 / n as f64;
    for _ in 0..n {
        m[cells[rng.random_range(0..n)]] += w;
    }
    m
}
