//! Simple, gluing and switching couplings of two copies of the process.
//!
//! The switching coupling alternates a free phase (independent motion until
//! both coordinates lie in the ball `‖·‖ ≤ R`, at the moment `Q_{2k−1}`)
//! with a gluing attempt over a window of length `T` (ending at `Q_{2k}`).
//! A gluing attempt is a maximal coupling of the two binned transition laws
//! over the window, estimated from auxiliary paths.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::law::{pick_index, Binning, Start};
use crate::levy::norm;
use crate::model::Model;
use crate::rng::{stream, Purpose, StreamRng};
use crate::sde::{Dynamics, Walker};

/// When a simple coupling run stops.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Stopping {
    Horizon { time: f64 },
    /// First time both coordinates lie in the ball of radius `radius`,
    /// checked on the `dt` grid; gives up at `max_time`.
    Ball { radius: f64, max_time: f64 },
}

#[derive(Debug, Clone, Serialize)]
pub struct CoupledRun {
    pub end_time: f64,
    /// Ball-entry time `Q₁`, if the stopping rule is a ball and it was reached.
    pub entry_time: Option<f64>,
    pub first: Vec<f64>,
    pub second: Vec<f64>,
    pub exploded: bool,
    /// `(t, state)` observations of each coordinate, if recorded.
    #[serde(skip)]
    pub skeletons: Option<[Vec<(f64, Vec<f64>)>; 2]>,
}

fn child(rng: &mut StreamRng) -> StreamRng {
    StreamRng::seed_from_u64(rng.random())
}

fn in_ball(x: &[f64], radius: f64) -> bool {
    norm(x) <= radius
}

/// Two copies from `y1`, `y2`: independent driving noise if `y1 ≠ y2`, one
/// shared realization if `y1 = y2`.
pub fn simple_coupling_run(
    dynamics: &Dynamics,
    y1: &[f64],
    y2: &[f64],
    stop: Stopping,
    dt: f64,
    rng: &mut StreamRng,
    record: bool,
) -> Result<CoupledRun> {
    let m = dynamics.model().dim();
    if y1.len() != m || y2.len() != m {
        return Err(Error::Precondition("starting points have the wrong dimension".into()));
    }
    if !(dt > 0.0) {
        return Err(Error::Precondition("dt must be positive".into()));
    }
    let shared = y1 == y2;
    let r1 = child(rng);
    let r2 = if shared { r1.clone() } else { child(rng) };
    let mut w1 = Walker::new(dynamics, y1, r1);
    let mut w2 = Walker::new(dynamics, y2, r2);
    let mut sk1 = vec![(0.0, y1.to_vec())];
    let mut sk2 = vec![(0.0, y2.to_vec())];
    let mut advance = |w1: &mut Walker, w2: &mut Walker, t: f64| -> bool {
        let e1 = if record {
            w1.advance_observed(t, dt, |s, x| sk1.push((s, x.to_vec())))
        } else {
            w1.advance_to(t, dt)
        };
        let e2 = if record {
            w2.advance_observed(t, dt, |s, x| sk2.push((s, x.to_vec())))
        } else {
            w2.advance_to(t, dt)
        };
        e1.is_some() || e2.is_some()
    };
    let (end_time, entry_time, exploded) = match stop {
        Stopping::Horizon { time } => {
            let ex = advance(&mut w1, &mut w2, time);
            (time, None, ex)
        }
        Stopping::Ball { radius, max_time } => {
            if !(radius > 0.0) {
                return Err(Error::Precondition("ball radius must be positive".into()));
            }
            let mut t = 0.0;
            let mut entry = None;
            let mut ex = false;
            let mut k = 0u64;
            loop {
                if in_ball(w1.state(), radius) && in_ball(w2.state(), radius) {
                    entry = Some(t);
                    break;
                }
                if t >= max_time {
                    break;
                }
                k += 1;
                t = (k as f64 * dt).min(max_time);
                if advance(&mut w1, &mut w2, t) {
                    ex = true;
                    break;
                }
            }
            (t, entry, ex)
        }
    };
    Ok(CoupledRun {
        end_time,
        entry_time,
        first: w1.state().to_vec(),
        second: w2.state().to_vec(),
        exploded,
        skeletons: record.then_some([sk1, sk2]),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct GluingOutcome {
    pub glued: bool,
    /// Estimated overlap `∫ P_{y₁}^T ∧ P_{y₂}^T` at bin resolution.
    pub overlap: f64,
    pub first: Vec<f64>,
    pub second: Vec<f64>,
}

/// States at time `window` of `n` auxiliary paths from `y`.
fn auxiliary(dynamics: &Dynamics, y: &[f64], window: f64, n: usize, dt: f64, rng: StreamRng) -> Result<Vec<Vec<f64>>> {
    let mut w = Walker::new(dynamics, y, rng);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        w.reset(0.0, y);
        if w.advance_to(window, dt).is_some() {
            return Err(Error::Divergent("auxiliary path exploded during a gluing window".into()));
        }
        out.push(w.state().to_vec());
    }
    Ok(out)
}

/// Cell of every auxiliary sample. Values carried by two or more samples
/// (atoms of the laws, such as the no-jump endpoint) get a cell of their
/// own; everything else falls in its bin. Returns the cells of both sets and
/// the number of cells, the out-of-range bin being `binning.n_cells()`.
fn joint_cells(binning: &Binning, s1: &[Vec<f64>], s2: &[Vec<f64>]) -> (Vec<usize>, Vec<usize>, usize) {
    let key = |x: &Vec<f64>| x.iter().map(|v| v.to_bits()).collect::<Vec<u64>>();
    let mut seen: HashMap<Vec<u64>, usize> = HashMap::new();
    for x in s1.iter().chain(s2) {
        *seen.entry(key(x)).or_insert(0) += 1;
    }
    let mut atoms: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut next = binning.n_cells() + 1;
    let mut cell = |x: &Vec<f64>| {
        let k = key(x);
        if seen[&k] < 2 {
            return binning.cell_of(x);
        }
        *atoms.entry(k).or_insert_with(|| {
            next += 1;
            next - 1
        })
    };
    let c1: Vec<usize> = s1.iter().map(&mut cell).collect();
    let c2: Vec<usize> = s2.iter().map(&mut cell).collect();
    (c1, c2, next)
}

fn counts_and_members(cells: &[usize], n: usize) -> (Vec<f64>, Vec<Vec<usize>>) {
    let mut counts = vec![0.0; n];
    let mut members = vec![Vec::new(); n];
    for (i, &k) in cells.iter().enumerate() {
        counts[k] += 1.0;
        members[k].push(i);
    }
    (counts, members)
}

/// One gluing attempt over `window` from `(y1, y2)`.
///
/// Both laws are estimated from `n_aux` auxiliary paths and compared cell
/// by cell (bins, plus one cell per atom). A primary coordinate (chosen by
/// a fair coin) takes a uniformly chosen auxiliary sample of its own, so its
/// marginal is exact; the other coordinate copies it with probability
/// `min(n₁_k, n₂_k)/n_k` for its cell `k` and otherwise draws from its own
/// residual cell counts. The out-of-range bin never glues.
pub fn gluing_attempt(
    dynamics: &Dynamics,
    y1: &[f64],
    y2: &[f64],
    window: f64,
    n_aux: usize,
    binning: &Binning,
    dt: f64,
    rng: &mut StreamRng,
) -> Result<GluingOutcome> {
    if !(window > 0.0) {
        return Err(Error::Precondition("gluing window must be positive".into()));
    }
    if n_aux == 0 {
        return Err(Error::Precondition("gluing needs at least one auxiliary sample".into()));
    }
    binning.validate()?;
    if y1 == y2 {
        let mut w = Walker::new(dynamics, y1, child(rng));
        if w.advance_to(window, dt).is_some() {
            return Err(Error::Divergent("path exploded during a gluing window".into()));
        }
        let z = w.state().to_vec();
        return Ok(GluingOutcome { glued: true, overlap: 1.0, first: z.clone(), second: z });
    }
    let s1 = auxiliary(dynamics, y1, window, n_aux, dt, child(rng))?;
    let s2 = auxiliary(dynamics, y2, window, n_aux, dt, child(rng))?;
    let (k1, k2, n_cells) = joint_cells(binning, &s1, &s2);
    let (c1, m1) = counts_and_members(&k1, n_cells);
    let (c2, m2) = counts_and_members(&k2, n_cells);
    let outside = binning.n_cells();
    let min: Vec<f64> = (0..n_cells).map(|k| if k == outside { 0.0 } else { c1[k].min(c2[k]) }).collect();
    let overlap = min.iter().sum::<f64>() / n_aux as f64;

    let swap = rng.random::<bool>();
    let (sp, kp, cp, cs, ms, ss) = if swap { (&s2, &k2, &c2, &c1, &m1, &s1) } else { (&s1, &k1, &c1, &c2, &m2, &s2) };
    let i = rng.random_range(0..n_aux);
    let primary = sp[i].clone();
    let k = kp[i];
    let glue = min[k] > 0.0 && rng.random::<f64>() * cp[k] < min[k];
    let secondary = if glue {
        primary.clone()
    } else {
        let residual: Vec<f64> = (0..n_cells).map(|j| cs[j] - min[j]).collect();
        let j = pick_index(&residual, rng);
        let pool = &ms[j];
        ss[pool[rng.random_range(0..pool.len())]].clone()
    };
    let (first, second) = if swap { (secondary, primary) } else { (primary, secondary) };
    Ok(GluingOutcome { glued: glue, overlap, first, second })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Free,
    Gluing,
    Glued,
}

#[derive(Debug, Clone, Serialize)]
pub struct CouplingRecord {
    /// `Q₁, Q₂, …`: ball entries (odd) and ends of gluing windows (even).
    pub q_times: Vec<f64>,
    pub phases: Vec<Phase>,
    pub glued: bool,
    /// Gluing moment `Q*`; `None` when not glued within `max_cycles`.
    pub q_star: Option<f64>,
    pub cycles: usize,
    /// States at the fixed horizon, when one was requested.
    pub at_horizon: Option<(Vec<f64>, Vec<f64>)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SwitchingConfig {
    pub radius: f64,
    pub window: f64,
    pub max_cycles: usize,
    pub n_aux: usize,
    pub binning: Binning,
    pub dt: f64,
    /// Longest free phase before the run is abandoned.
    pub max_free_time: f64,
    /// Report both coordinates at this time; gluing windows that would
    /// cross it are replaced by free motion.
    pub horizon: Option<f64>,
}

impl SwitchingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0 && self.window > 0.0 && self.dt > 0.0 && self.max_free_time > 0.0) {
            return Err(Error::Precondition("R, T, dt and the free-phase limit must be positive".into()));
        }
        if self.n_aux == 0 || self.max_cycles == 0 {
            return Err(Error::Precondition("n_aux and max_cycles must be positive".into()));
        }
        if let Some(h) = self.horizon {
            if !(h > 0.0) {
                return Err(Error::Precondition("horizon must be positive".into()));
            }
        }
        self.binning.validate()
    }
}

/// One run of the switching coupling from `mu1 ⊗ mu2`.
pub fn switching_coupling(
    dynamics: &Dynamics,
    mu1: &Start,
    mu2: &Start,
    cfg: &SwitchingConfig,
    rng: &mut StreamRng,
) -> Result<CouplingRecord> {
    cfg.validate()?;
    let m = dynamics.model().dim();
    if mu1.dim() != m || mu2.dim() != m {
        return Err(Error::Precondition("initial laws have the wrong dimension".into()));
    }
    let mut y1 = mu1.draw(rng);
    let mut y2 = mu2.draw(rng);
    let mut rec = CouplingRecord { q_times: Vec::new(), phases: Vec::new(), glued: false, q_star: None, cycles: 0, at_horizon: None };
    let horizon = cfg.horizon.unwrap_or(f64::INFINITY);
    let mut t = 0.0;

    if y1 == y2 {
        rec.glued = true;
        rec.q_star = Some(0.0);
        rec.phases.push(Phase::Glued);
    }
    while !rec.glued && rec.cycles < cfg.max_cycles {
        rec.cycles += 1;
        // free phase
        rec.phases.push(Phase::Free);
        let limit = (t + cfg.max_free_time).min(horizon);
        let stop = Stopping::Ball { radius: cfg.radius, max_time: limit - t };
        let run = simple_coupling_run(dynamics, &y1, &y2, stop, cfg.dt, rng, false)?;
        if run.exploded {
            return Err(Error::Divergent("coupled path exploded in a free phase".into()));
        }
        y1 = run.first;
        y2 = run.second;
        let Some(entry) = run.entry_time else {
            t += run.end_time;
            if t >= horizon {
                rec.at_horizon = Some((y1.clone(), y2.clone()));
            }
            break;
        };
        t += entry;
        rec.q_times.push(t);
        if t + cfg.window > horizon {
            let run = simple_coupling_run(dynamics, &y1, &y2, Stopping::Horizon { time: horizon - t }, cfg.dt, rng, false)?;
            rec.at_horizon = Some((run.first, run.second));
            break;
        }
        // gluing phase
        rec.phases.push(Phase::Gluing);
        let g = gluing_attempt(dynamics, &y1, &y2, cfg.window, cfg.n_aux, &cfg.binning, cfg.dt, rng)?;
        t += cfg.window;
        rec.q_times.push(t);
        y1 = g.first;
        y2 = g.second;
        if g.glued {
            rec.glued = true;
            rec.q_star = Some(t);
            rec.phases.push(Phase::Glued);
        }
    }
    if rec.glued && cfg.horizon.is_some() && rec.at_horizon.is_none() {
        // glued coordinates share one path from here on
        let mut w = Walker::new(dynamics, &y1, child(rng));
        if w.advance_to(horizon - t.min(horizon), cfg.dt).is_some() {
            return Err(Error::Divergent("glued path exploded".into()));
        }
        let z = w.state().to_vec();
        rec.at_horizon = Some((z.clone(), z));
    } else if !rec.glued && cfg.horizon.is_some() && rec.at_horizon.is_none() {
        let run = simple_coupling_run(dynamics, &y1, &y2, Stopping::Horizon { time: (horizon - t).max(0.0) }, cfg.dt, rng, false)?;
        rec.at_horizon = Some((run.first, run.second));
    }
    debug_assert!(glue_is_permanent(&rec));
    Ok(rec)
}

/// Phases alternate free/gluing and nothing follows `Glued`.
pub fn glue_is_permanent(rec: &CouplingRecord) -> bool {
    match rec.phases.iter().position(|p| *p == Phase::Glued) {
        Some(i) => i == rec.phases.len() - 1 && rec.glued,
        None => !rec.glued,
    }
}

/// `n_runs` independent switching-coupling runs with per-run streams.
pub fn switching_runs(
    model: &Model,
    mu1: &Start,
    mu2: &Start,
    cfg: &SwitchingConfig,
    truncation: f64,
    seed: u64,
    n_runs: usize,
) -> Result<Vec<CouplingRecord>> {
    let dynamics = Dynamics::new(model, truncation)?;
    (0..n_runs)
        .into_par_iter()
        .map(|i| switching_coupling(&dynamics, mu1, mu2, cfg, &mut stream(seed, Purpose::Coupling, i as u64)))
        .collect()
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct TailPoint {
    pub t: f64,
    pub tail: f64,
    pub n: usize,
    pub stderr: f64,
}

/// Empirical `P̂(Q* > t)`: the coupling bound on the β-mixing coefficient.
pub fn beta_mixing_tail(records: &[CouplingRecord], t_grid: &[f64]) -> Vec<TailPoint> {
    let n = records.len();
    t_grid
        .iter()
        .map(|&t| {
            let late = records.iter().filter(|r| r.q_star.map(|q| q > t).unwrap_or(true)).count();
            let tail = if n == 0 { f64::NAN } else { late as f64 / n as f64 };
            TailPoint { t, tail, n, stderr: (tail * (1.0 - tail) / n.max(1) as f64).sqrt() }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{self, ou_jump, DriftForm};
    use crate::stats::{ks_two_sample, wilson};
    use serde_json::json;

    fn cfg(binning: Binning) -> SwitchingConfig {
        SwitchingConfig {
            radius: 3.0,
            window: 1.0,
            max_cycles: 20,
            n_aux: 200,
            binning,
            dt: 0.02,
            max_free_time: 50.0,
            horizon: None,
        }
    }

    #[test]
    fn equal_starts_share_the_path() {
        let m = ou_jump(1.0, 2.0, DriftForm::Raw);
        let d = Dynamics::new(&m, 0.0).unwrap();
        let mut rng = stream(1, Purpose::Coupling, 0);
        let run = simple_coupling_run(&d, &[0.5], &[0.5], Stopping::Horizon { time: 3.0 }, 0.01, &mut rng, true).unwrap();
        let [a, b] = run.skeletons.unwrap();
        assert_eq!(a, b);
        assert!(a.len() > 300);
    }

    #[test]
    fn both_enter_the_ball() {
        let m = ou_jump(1.0, 1.0, DriftForm::Raw);
        let d = Dynamics::new(&m, 0.0).unwrap();
        let mut total = 0.0;
        for i in 0..100 {
            let mut rng = stream(2, Purpose::Coupling, i);
            let stop = Stopping::Ball { radius: 2.0, max_time: 100.0 };
            let run = simple_coupling_run(&d, &[5.0], &[-5.0], stop, 0.01, &mut rng, false).unwrap();
            let q = run.entry_time.expect("entered");
            assert!(norm(&run.first) <= 2.0 && norm(&run.second) <= 2.0);
            total += q;
        }
        assert!(total / 100.0 < 10.0);
    }

    #[test]
    fn gluing_equal_and_disjoint() {
        let m = ou_jump(1.0, 1.0, DriftForm::Raw);
        let d = Dynamics::new(&m, 0.0).unwrap();
        let b = Binning::uniform(-10.0, 30.0, 400).unwrap();
        let mut rng = stream(3, Purpose::Gluing, 0);
        let g = gluing_attempt(&d, &[1.0], &[1.0], 1.0, 10, &b, 0.02, &mut rng).unwrap();
        assert!(g.glued && g.first == g.second);
        // starts 0 and 20 after one unit of time stay in disjoint bins
        for i in 0..50 {
            let mut rng = stream(3, Purpose::Gluing, i + 1);
            let g = gluing_attempt(&d, &[0.0], &[20.0], 1.0, 50, &b, 0.02, &mut rng).unwrap();
            assert!(!g.glued);
            assert_eq!(g.overlap, 0.0);
        }
    }

    #[test]
    fn gluing_frequency_matches_a_known_overlap() {
        // Pure drift-free jumps: from 0 the state after the window is the
        // Poisson count N; from 1 it is 1 + N'. With bins of width 1 the
        // binned overlap is Σ_k min(P(N=k), P(N=k-1)).
        let measure = crate::levy::LevyMeasure::atomic(&[(vec![1.0], 1.0)]).unwrap();
        let m = model::build("poly1d", &json!({"coeffs": [0.0]}), Some(measure), Some(DriftForm::Raw)).unwrap();
        let d = Dynamics::new(&m, 0.0).unwrap();
        let b = Binning::uniform(-0.5, 20.5, 21).unwrap();
        let lambda: f64 = 1.0;
        let pois = |k: i32| if k < 0 { 0.0 } else { (-lambda).exp() * lambda.powi(k) / (1..=k).map(f64::from).product::<f64>() };
        let overlap: f64 = (0..21).map(|k| pois(k).min(pois(k - 1))).sum();
        let n = 2000;
        let mut hits = 0;
        for i in 0..n {
            let mut rng = stream(4, Purpose::Gluing, i);
            if gluing_attempt(&d, &[0.0], &[1.0], 1.0, 400, &b, 0.5, &mut rng).unwrap().glued {
                hits += 1;
            }
        }
        let p = hits as f64 / n as f64;
        let sd = (overlap * (1.0 - overlap) / n as f64).sqrt();
        // finite n_aux biases the binned minimum slightly downward
        assert!((p - overlap).abs() < 3.0 * sd + 0.02, "{p} vs {overlap}");
        let (lo, hi) = wilson(hits, n as usize, 3.0);
        assert!(lo < overlap + 0.02 && hi > overlap - 0.02);
    }

    #[test]
    fn switching_basics() {
        let m = ou_jump(1.0, 1.0, DriftForm::Raw);
        let b = Binning::uniform(-2.0, 8.0, 100).unwrap();
        let recs = switching_runs(&m, &Start::Point(vec![1.0]), &Start::Point(vec![1.0]), &cfg(b.clone()), 0.0, 5, 5).unwrap();
        assert!(recs.iter().all(|r| r.glued && r.q_star == Some(0.0)));
        let recs = switching_runs(&m, &Start::Point(vec![0.0]), &Start::Point(vec![5.0]), &cfg(b), 0.0, 5, 40).unwrap();
        for r in &recs {
            assert!(glue_is_permanent(r));
            assert!(r.q_times.windows(2).all(|w| w[0] <= w[1]));
        }
        assert!(recs.iter().filter(|r| r.glued).count() > 30);
        let tail = beta_mixing_tail(&recs, &[0.0, 2.0, 5.0, 20.0]);
        assert!(tail.windows(2).all(|w| w[0].tail >= w[1].tail));
        assert_eq!(tail[0].tail, 1.0);
    }

    #[test]
    fn split_half_lines_never_glue() {
        let m = model::build("example_5_2", &json!({}), None, None).unwrap();
        let b = Binning::uniform(-10.0, 10.0, 200).unwrap();
        let recs = switching_runs(&m, &Start::Point(vec![2.0]), &Start::Point(vec![-2.0]), &SwitchingConfig { max_cycles: 5, n_aux: 50, ..cfg(b) }, 0.0, 6, 10).unwrap();
        assert!(recs.iter().all(|r| !r.glued));
        let tail = beta_mixing_tail(&recs, &[1.0, 10.0]);
        assert!(tail.iter().all(|p| p.tail == 1.0));
    }

    #[test]
    fn tail_of_early_glues() {
        let rec = |q| CouplingRecord { q_times: vec![], phases: vec![Phase::Glued], glued: true, q_star: Some(q), cycles: 1, at_horizon: None };
        let recs = vec![rec(0.5), rec(1.0), rec(0.2)];
        let tail = beta_mixing_tail(&recs, &[1.0, 2.0]);
        assert_eq!(tail[0].tail, 0.0);
        assert_eq!(tail[1].tail, 0.0);
    }

    #[test]
    fn simple_coupling_marginal_small() {
        let m = ou_jump(1.0, 1.0, DriftForm::Raw);
        let d = Dynamics::new(&m, 0.0).unwrap();
        let n = 1500;
        let coupled: Vec<f64> = (0..n)
            .map(|i| {
                let mut rng = stream(7, Purpose::Coupling, i);
                simple_coupling_run(&d, &[2.0], &[-1.0], Stopping::Horizon { time: 1.5 }, 0.02, &mut rng, false).unwrap().first[0]
            })
            .collect();
        let direct: Vec<f64> = (0..n)
            .map(|i| {
                let mut w = Walker::new(&d, &[2.0], stream(8, Purpose::Path, i));
                w.advance_to(1.5, 0.02);
                w.state()[0]
            })
            .collect();
        assert!(ks_two_sample(&coupled, &direct).p_value > 0.001);
    }
}
