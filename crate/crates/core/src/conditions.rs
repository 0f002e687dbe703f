//! Numerical checks of the recurrence condition R, the non-degeneracy
//! condition N (Monte Carlo, static and rank routes) and the support
//! condition S.

use nalgebra::DMatrix;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::exponent::{hat_delta_with, jump_influence_vectors, propagate_exponent, HatDelta};
use crate::generator::{generator_apply, TestFunction};
use crate::levy::norm;
use crate::model::{Case, Model};
use crate::rng::{stream, Purpose};
use crate::sde::{simulate_path, Dynamics, SimParams, Walker};
use crate::stats::{wilson, Z95};

/// Threshold for "≠ 0" predicates.
pub const NUMERIC_ZERO: f64 = 1e-12;

/// Default relative singular-value tolerance for numerical rank.
pub const SVD_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn passed(self) -> bool {
        self == Verdict::Pass
    }
}

/// Deterministic covering of the unit sphere in `R^dim` by about `n` points.
pub fn sphere_covering(dim: usize, n: usize) -> Vec<Vec<f64>> {
    let n = n.max(1);
    match dim {
        0 => Vec::new(),
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..n)
            .map(|k| {
                let t = std::f64::consts::TAU * k as f64 / n as f64;
                vec![t.cos(), t.sin()]
            })
            .collect(),
        3 => {
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..n)
                .map(|k| {
                    let z = 1.0 - 2.0 * (k as f64 + 0.5) / n as f64;
                    let r = (1.0 - z * z).sqrt();
                    let phi = golden * k as f64;
                    vec![r * phi.cos(), r * phi.sin(), z]
                })
                .collect()
        }
        _ => {
            // Coordinate axes, then Halton points pushed through the normal
            // quantile and normalised.
            let mut out = Vec::new();
            for i in 0..dim {
                for s in [1.0, -1.0] {
                    let mut v = vec![0.0; dim];
                    v[i] = s;
                    out.push(v);
                }
            }
            let primes = first_primes(dim);
            let normal = Normal::new(0.0, 1.0).expect("standard normal");
            let mut k = 1;
            while out.len() < n {
                let v: Vec<f64> = primes.iter().map(|&p| normal.inverse_cdf(radical_inverse(k, p))).collect();
                let len = norm(&v);
                if len > 0.0 {
                    out.push(v.into_iter().map(|x| x / len).collect());
                }
                k += 1;
            }
            out
        }
    }
}

fn first_primes(n: usize) -> Vec<u64> {
    let mut out = Vec::with_capacity(n);
    let mut c = 2u64;
    while out.len() < n {
        if out.iter().all(|p| c % p != 0) {
            out.push(c);
        }
        c += 1;
    }
    out
}

fn radical_inverse(mut k: u64, base: u64) -> f64 {
    let mut inv = 1.0 / base as f64;
    let mut out = 0.0;
    while k > 0 {
        out += (k % base) as f64 * inv;
        k /= base;
        inv /= base as f64;
    }
    out
}

/// Numerical rank of the matrix with the given columns in `R^m`.
pub fn numerical_rank(columns: &[Vec<f64>], m: usize, rel_tol: f64) -> usize {
    if columns.is_empty() {
        return 0;
    }
    let mat = DMatrix::from_fn(m, columns.len(), |i, j| columns[j][i]);
    rank_of(&mat, rel_tol)
}

fn rank_of(mat: &DMatrix<f64>, rel_tol: f64) -> usize {
    let sv = mat.singular_values();
    let max = sv.max();
    if !(max > 0.0) {
        return 0;
    }
    sv.iter().filter(|&&s| s >= rel_tol * max).count()
}

// ---------------------------------------------------------------- R ----

#[derive(Debug, Clone, Serialize)]
pub struct AlphaRow {
    pub alpha: f64,
    pub gamma: f64,
    pub violations: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct RReport {
    pub phi_name: String,
    pub alpha_hat: f64,
    pub gamma_hat: f64,
    /// `min over the grid of −𝒜φ − α̂φ + γ̂`.
    pub margin: f64,
    pub violations: Vec<Vec<f64>>,
    /// `φ` on the outer ring exceeds its 0.9 quantile over the interior.
    pub growth_confirmed: bool,
    pub per_alpha: Vec<AlphaRow>,
    pub verdict: Verdict,
}

/// Recurrence check `𝒜φ ≤ −αφ + γ`.
///
/// `γ(α)` is the maximum of `𝒜φ + αφ` over the inner half of the grid
/// (points with norm at most half the grid radius); a grid point outside
/// violates the inequality if it exceeds that value. An α passes when it
/// has no violations; the report keeps the largest passing α.
pub fn check_r(model: &Model, phi: &dyn TestFunction, grid: &[Vec<f64>], alpha_grid: &[f64]) -> Result<RReport> {
    if grid.is_empty() || alpha_grid.is_empty() {
        return Err(Error::Precondition("check_R needs a nonempty grid and alpha grid".into()));
    }
    if alpha_grid.iter().any(|a| !(*a > 0.0)) {
        return Err(Error::Precondition("alpha values must be positive".into()));
    }
    let phis: Vec<f64> = grid.iter().map(|x| phi.value(x)).collect();
    if phis.iter().any(|v| *v < 0.0) {
        return Err(Error::Precondition(format!("{} takes negative values on the grid", phi.name())));
    }
    let gens: Vec<f64> = grid.iter().map(|x| generator_apply(model, phi, x)).collect::<Result<_>>()?;
    let norms: Vec<f64> = grid.iter().map(|x| norm(x)).collect();
    let radius = norms.iter().cloned().fold(0.0, f64::max);
    let inner: Vec<usize> = (0..grid.len()).filter(|&i| norms[i] <= 0.5 * radius + 1e-12).collect();

    let evaluate = |alpha: f64| -> (f64, Vec<usize>) {
        let gamma = inner.iter().map(|&i| gens[i] + alpha * phis[i]).fold(f64::NEG_INFINITY, f64::max);
        let tol = 1e-9 * (1.0 + gamma.abs());
        let bad = (0..grid.len()).filter(|&i| gens[i] + alpha * phis[i] > gamma + tol).collect();
        (gamma, bad)
    };

    let mut alphas = alpha_grid.to_vec();
    alphas.sort_by(f64::total_cmp);
    let mut per_alpha = Vec::with_capacity(alphas.len());
    let mut best: Option<(f64, f64)> = None;
    let mut fewest: Option<(f64, f64, Vec<usize>)> = None;
    for &alpha in &alphas {
        let (gamma, bad) = evaluate(alpha);
        per_alpha.push(AlphaRow { alpha, gamma, violations: bad.len() });
        if bad.is_empty() {
            best = Some((alpha, gamma));
        }
        if fewest.as_ref().map(|f| bad.len() < f.2.len()).unwrap_or(true) {
            fewest = Some((alpha, gamma, bad));
        }
    }
    let (alpha_hat, gamma_hat, bad) = match best {
        Some((a, g)) => (a, g, Vec::new()),
        None => fewest.expect("nonempty alpha grid"),
    };
    let margin = (0..grid.len())
        .map(|i| -gens[i] - alpha_hat * phis[i] + gamma_hat)
        .fold(f64::INFINITY, f64::min);

    let ring: Vec<f64> = (0..grid.len()).filter(|&i| norms[i] >= 0.95 * radius).map(|i| phis[i]).collect();
    let mut interior: Vec<f64> = (0..grid.len()).filter(|&i| norms[i] < 0.95 * radius).map(|i| phis[i]).collect();
    interior.sort_by(f64::total_cmp);
    let growth_confirmed = match interior.len() {
        0 => false,
        n => {
            let q90 = interior[((0.9 * (n - 1) as f64).round() as usize).min(n - 1)];
            ring.iter().cloned().fold(f64::INFINITY, f64::min) > q90
        }
    };
    let verdict = Verdict::from_bool(bad.is_empty() && growth_confirmed);
    Ok(RReport {
        phi_name: phi.name(),
        alpha_hat,
        gamma_hat,
        margin,
        violations: bad.iter().map(|&i| grid[i].clone()).collect(),
        growth_confirmed,
        per_alpha,
        verdict,
    })
}

/// Regular grid on `[-half_width, half_width]^dim` with `per_axis` points per axis.
pub fn box_grid(dim: usize, half_width: f64, per_axis: usize) -> Vec<Vec<f64>> {
    let per_axis = per_axis.max(2);
    let axis: Vec<f64> = (0..per_axis)
        .map(|k| -half_width + 2.0 * half_width * k as f64 / (per_axis - 1) as f64)
        .collect();
    let mut out = vec![Vec::new()];
    for _ in 0..dim {
        out = out
            .into_iter()
            .flat_map(|p| {
                axis.iter().map(move |&a| {
                    let mut q = p.clone();
                    q.push(a);
                    q
                })
            })
            .collect();
    }
    out
}

// ------------------------------------------------------------ N (MC) ---

#[derive(Debug, Clone, Serialize)]
pub struct NReport {
    pub x_star: Vec<f64>,
    pub t_star: f64,
    pub p_hat: f64,
    pub wilson_ci: (f64, f64),
    pub n_paths: usize,
    pub full_rank_paths: usize,
    pub svd_tolerance: f64,
    pub excluded_jump_count: usize,
    pub truncation: f64,
    /// Evidence for N: the Wilson lower bound is positive.
    pub evidence: bool,
}

/// Monte Carlo estimate of `P_{x*}(S_{t*} = R^m)`.
pub fn check_n_mc(model: &Model, x_star: &[f64], t_star: f64, params: &SimParams, svd_tol: f64) -> Result<NReport> {
    params.validate()?;
    if !(t_star > 0.0) || t_star > params.horizon {
        return Err(Error::Precondition(format!(
            "t* = {t_star} must lie in (0, horizon = {}]",
            params.horizon
        )));
    }
    let m = model.dim();
    let run = SimParams { horizon: t_star, ..params.clone() };
    let mut full = 0usize;
    let mut excluded = 0usize;
    for i in 0..params.n_paths {
        let mut rng = stream(params.seed, Purpose::Path, i as u64);
        let traj = simulate_path(model, x_star, &run, &mut rng)?;
        if traj.explosion.is_some() || traj.jumps.is_empty() {
            continue;
        }
        let log = propagate_exponent(model, &traj)?;
        let iv = jump_influence_vectors(model, &traj, &log, t_star)?;
        excluded += iv.excluded;
        if iv.vectors.len() >= m && numerical_rank(&iv.vectors, m, svd_tol) == m {
            full += 1;
        }
    }
    let n = params.n_paths;
    let ci = wilson(full, n, Z95);
    Ok(NReport {
        x_star: x_star.to_vec(),
        t_star,
        p_hat: full as f64 / n as f64,
        wilson_ci: ci,
        n_paths: n,
        full_rank_paths: full,
        svd_tolerance: svd_tol,
        excluded_jump_count: excluded,
        truncation: params.truncation,
        evidence: ci.0 > 0.0,
    })
}

// -------------------------------------------------------- N (static) ---

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StaticRoute {
    /// `Π{u ∈ Θ_x : Δ̂(x,u) ≠ 0} > 0` (scalar state).
    OneDim,
    /// `Π{u ∈ Θ_x : (Δ̂(x,u), v) ≠ 0, ‖c(x,u)‖ < ε} > 0` for every covering direction `v`.
    Sphere,
}

#[derive(Debug, Clone, Serialize)]
pub struct EpsilonRow {
    pub epsilon: f64,
    pub min_mass: f64,
    pub worst_direction: Vec<f64>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Serialize)]
pub struct StaticNReport {
    pub x_star: Vec<f64>,
    pub route: StaticRoute,
    /// One-dimensional route: the mass. Sphere route: the minimum over
    /// directions at the smallest ε.
    pub mass: f64,
    pub rows: Vec<EpsilonRow>,
    pub smallest_passing_epsilon: Option<f64>,
    pub n_directions: usize,
    pub verdict: Verdict,
}

/// Static check of N at `x*`. The one-dimensional route is used for `m = 1`
/// unless `force_sphere` is set; the sphere route evaluates every ε in
/// `epsilons`.
pub fn check_n_static(
    model: &Model,
    x_star: &[f64],
    epsilons: &[f64],
    n_directions: usize,
    force_sphere: bool,
) -> Result<StaticNReport> {
    let m = model.dim();
    if x_star.len() != m {
        return Err(Error::Precondition("x* has the wrong dimension".into()));
    }
    let dynamics = Dynamics::drift_only(model, 0.0)?;
    let hat = |u: &[f64]| -> Option<Vec<f64>> {
        match hat_delta_with(&dynamics, x_star, u) {
            Ok(HatDelta::Value { value }) => Some(value),
            _ => None,
        }
    };
    if m == 1 && !force_sphere {
        let mass = model.measure().region_mass(|u| hat(u).map(|v| v[0].abs() > NUMERIC_ZERO).unwrap_or(false)).value;
        return Ok(StaticNReport {
            x_star: x_star.to_vec(),
            route: StaticRoute::OneDim,
            mass,
            rows: Vec::new(),
            smallest_passing_epsilon: None,
            n_directions: 0,
            verdict: Verdict::from_bool(mass > 0.0),
        });
    }
    if epsilons.is_empty() || epsilons.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::Precondition("the sphere route needs positive ε values".into()));
    }
    let dirs = sphere_covering(m, n_directions);
    let mut eps = epsilons.to_vec();
    eps.sort_by(f64::total_cmp);
    let mut rows = Vec::with_capacity(eps.len());
    for &epsilon in &eps {
        let mut min_mass = f64::INFINITY;
        let mut worst = dirs[0].clone();
        for v in &dirs {
            let mass = model
                .measure()
                .region_mass(|u| {
                    if norm(&model.jump(x_star, u)) >= epsilon {
                        return false;
                    }
                    hat(u)
                        .map(|h| h.iter().zip(v).map(|(a, b)| a * b).sum::<f64>().abs() > NUMERIC_ZERO)
                        .unwrap_or(false)
                })
                .value;
            if mass < min_mass {
                min_mass = mass;
                worst = v.clone();
            }
        }
        rows.push(EpsilonRow { epsilon, min_mass, worst_direction: worst, verdict: Verdict::from_bool(min_mass > 0.0) });
    }
    let smallest_passing_epsilon = rows.iter().find(|r| r.verdict.passed()).map(|r| r.epsilon);
    let verdict = Verdict::from_bool(rows.iter().all(|r| r.verdict.passed()));
    Ok(StaticNReport {
        x_star: x_star.to_vec(),
        route: StaticRoute::Sphere,
        mass: rows[0].min_mass,
        rows,
        smallest_passing_epsilon,
        n_directions: dirs.len(),
        verdict,
    })
}

// ---------------------------------------------------------- N (rank) ---

#[derive(Debug, Clone, Serialize)]
pub struct ConeRow {
    pub delta: f64,
    /// Minimum over covering axes `w` of `Π(V(w, ϱ) ∩ {‖u‖ ≤ δ})`.
    pub min_mass: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RankReport {
    pub x_star: Vec<f64>,
    pub case: Case,
    /// Case B only.
    pub determinant: Option<f64>,
    /// Rows of `∇ã χ − (∇χ) ã` (case A) or of `∇a` (case B).
    pub matrix: Vec<Vec<f64>>,
    pub singular_values: Vec<f64>,
    pub rank: usize,
    pub cone_aperture: f64,
    pub cone_probe: Vec<ConeRow>,
    pub cone_condition: bool,
    pub verdict: Verdict,
}

/// `χ(x)`: the Jacobian of `u ↦ c(x,u)` at `u = 0`, by central differences.
pub fn chi_fd(model: &Model, x: &[f64], step: f64) -> DMatrix<f64> {
    let (m, d) = (model.dim(), model.noise_dim());
    let mut out = DMatrix::zeros(m, d);
    let mut u = vec![0.0; d];
    for j in 0..d {
        u[j] = step;
        let p = model.jump(x, &u);
        u[j] = -step;
        let q = model.jump(x, &u);
        u[j] = 0.0;
        for i in 0..m {
            out[(i, j)] = (p[i] - q[i]) / (2.0 * step);
        }
    }
    out
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Rank route of N: `det ∇a(x*) ≠ 0` in case B, full rank of
/// `∇ã(x*)χ(x*) − ∇χ(x*)ã(x*)` in case A, plus the cone-mass probe of
/// the Lévy measure.
pub fn check_n_rank(model: &Model, x_star: &[f64], fd_step: f64) -> Result<RankReport> {
    if !(fd_step > 0.0) {
        return Err(Error::Precondition("finite-difference step must be positive".into()));
    }
    let m = model.dim();
    if x_star.len() != m {
        return Err(Error::Precondition("x* has the wrong dimension".into()));
    }
    let aperture = 0.5;
    let deltas = [1.0, 1e-1, 1e-2, 1e-3, 1e-4];
    let d = model.noise_dim();
    let axes = sphere_covering(d, 32);
    let cone_probe: Vec<ConeRow> = deltas
        .iter()
        .map(|&delta| {
            let min_mass = axes
                .iter()
                .map(|w| {
                    model
                        .measure()
                        .region_mass(|u| {
                            let n = norm(u);
                            n > 0.0
                                && n <= delta
                                && u.iter().zip(w).map(|(a, b)| a * b).sum::<f64>().abs() >= aperture * n
                        })
                        .value
                })
                .fold(f64::INFINITY, f64::min);
            ConeRow { delta, min_mass }
        })
        .collect();
    let cone_condition = cone_probe.iter().all(|r| r.min_mass > 0.0);

    let (matrix, determinant) = match model.case() {
        Case::B => {
            let j = model.coefficients().drift_jacobian(x_star);
            let det = j.determinant();
            (j, Some(det))
        }
        Case::A => {
            let dynamics = Dynamics::drift_only(model, 0.0)?;
            let mut a = vec![0.0; m];
            dynamics.effective_drift_into(x_star, &mut a);
            if a.iter().any(|v| !v.is_finite()) {
                return Err(Error::Divergent("compensator of ã does not converge".into()));
            }
            let grad_a = dynamics.effective_drift_jacobian(x_star);
            let chi = chi_fd(model, x_star, fd_step);
            let an = norm(&a);
            let dchi_a = if an == 0.0 {
                DMatrix::zeros(m, d)
            } else {
                let h = fd_step / an;
                let xp: Vec<f64> = x_star.iter().zip(&a).map(|(x, v)| x + h * v).collect();
                let xm: Vec<f64> = x_star.iter().zip(&a).map(|(x, v)| x - h * v).collect();
                (chi_fd(model, &xp, fd_step) - chi_fd(model, &xm, fd_step)) / (2.0 * h)
            };
            (&grad_a * &chi - dchi_a, None)
        }
    };
    let singular_values: Vec<f64> = matrix.singular_values().iter().copied().collect();
    let (rank, structural) = match determinant {
        Some(det) => {
            let ok = det.abs() > NUMERIC_ZERO;
            (if ok { m } else { rank_of(&matrix, SVD_TOL) }, ok)
        }
        None => {
            let r = rank_of(&matrix, SVD_TOL);
            (r, r == m)
        }
    };
    Ok(RankReport {
        x_star: x_star.to_vec(),
        case: model.case(),
        determinant,
        matrix: matrix_rows(&matrix),
        singular_values,
        rank,
        cone_aperture: aperture,
        cone_probe,
        cone_condition,
        verdict: Verdict::from_bool(structural && cone_condition),
    })
}

// ---------------------------------------------------------------- S ----

#[derive(Debug, Clone, Serialize)]
pub struct SRow {
    pub radius: f64,
    pub start: Vec<f64>,
    pub hits: usize,
    pub n_paths: usize,
    pub frequency: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RadiusVerdict {
    pub radius: f64,
    /// Every starting point at this radius (and the origin) reached the ε-ball.
    pub evidence: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SReport {
    pub x_star: Vec<f64>,
    pub t: f64,
    pub epsilon: f64,
    pub rows: Vec<SRow>,
    pub per_radius: Vec<RadiusVerdict>,
}

/// Starting points of the support check: the origin and a covering of
/// each sphere `‖x‖ = R`.
pub fn s_starts(dim: usize, radius: f64, n_directions: usize) -> Vec<Vec<f64>> {
    sphere_covering(dim, n_directions)
        .into_iter()
        .map(|v| v.into_iter().map(|x| x * radius).collect())
        .collect()
}

/// Frequency with which `X(t)` started on each sphere lands within `ε` of `x*`.
pub fn check_s(
    model: &Model,
    x_star: &[f64],
    radii: &[f64],
    t: f64,
    epsilon: f64,
    params: &SimParams,
    n_directions: usize,
) -> Result<SReport> {
    params.validate()?;
    if !(t > 0.0) || !(epsilon > 0.0) {
        return Err(Error::Precondition("check_S needs t > 0 and ε > 0".into()));
    }
    let m = model.dim();
    if x_star.len() != m {
        return Err(Error::Precondition("x* has the wrong dimension".into()));
    }
    let dynamics = Dynamics::with_overflow(model, params.truncation, params.overflow)?;
    let mut rows = Vec::new();
    let mut per_radius = Vec::new();
    let origin = vec![0.0; m];
    let origin_row = frequency_from(&dynamics, &origin, x_star, t, epsilon, params, 0);
    let mut start_index = 1u64;
    for &radius in radii {
        let mut all = origin_row.hits > 0;
        for start in s_starts(m, radius, n_directions) {
            let mut row = frequency_from(&dynamics, &start, x_star, t, epsilon, params, start_index);
            start_index += 1;
            row.radius = radius;
            all &= row.hits > 0;
            rows.push(row);
        }
        per_radius.push(RadiusVerdict { radius, evidence: all });
    }
    rows.insert(0, origin_row);
    Ok(SReport { x_star: x_star.to_vec(), t, epsilon, rows, per_radius })
}

fn frequency_from(
    dynamics: &Dynamics,
    start: &[f64],
    x_star: &[f64],
    t: f64,
    epsilon: f64,
    params: &SimParams,
    start_index: u64,
) -> SRow {
    let mut hits = 0;
    for i in 0..params.n_paths {
        let rng = stream(params.seed, Purpose::Check, (start_index << 32) | i as u64);
        let mut walker = Walker::new(dynamics, start, rng);
        if walker.advance_to(t, params.dt).is_some() {
            continue;
        }
        let dist = norm(&walker.state().iter().zip(x_star).map(|(a, b)| a - b).collect::<Vec<_>>());
        if dist < epsilon {
            hits += 1;
        }
    }
    SRow {
        radius: norm(start),
        start: start.to_vec(),
        hits,
        n_paths: params.n_paths,
        frequency: hits as f64 / params.n_paths as f64,
    }
}
