//! The circle chain `Q(z,·) = (1−3p)δ_{3z} + p[δ_{z/3} + δ_{(z+1)/3} + δ_{(z+2)/3}]`
//! in exact rational arithmetic, and its birth–death companion.

use std::collections::HashMap;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, Zero};
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::{stream, Purpose};
use crate::stats::{chi_square_gof, wilson, ChiSquareResult, Z95};

/// A point `num/den` of the circle `[0, 1)`, in lowest terms.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CircleState {
    num: BigUint,
    den: BigUint,
}

impl CircleState {
    pub fn new(num: u64, den: u64) -> Result<Self> {
        if den == 0 {
            return Err(Error::Precondition("zero denominator".into()));
        }
        Ok(Self::reduce(BigUint::from(num), BigUint::from(den)))
    }

    pub fn zero() -> Self {
        Self { num: BigUint::zero(), den: BigUint::one() }
    }

    fn reduce(num: BigUint, den: BigUint) -> Self {
        let num = num % &den;
        if num.is_zero() {
            return Self::zero();
        }
        let g = num.gcd(&den);
        Self { num: num / &g, den: den / g }
    }

    pub fn numerator(&self) -> &BigUint {
        &self.num
    }

    pub fn denominator(&self) -> &BigUint {
        &self.den
    }

    /// `3z mod 1`.
    pub fn triple(&self) -> Self {
        Self::reduce(&self.num * 3u32, self.den.clone())
    }

    /// `(z + k)/3`.
    pub fn third(&self, k: u32) -> Self {
        Self::reduce(&self.num + &self.den * k, &self.den * 3u32)
    }

    pub fn to_f64(&self) -> f64 {
        // only for display; the chain never reads it back
        let bits = self.den.bits().saturating_sub(60);
        let n = (&self.num >> bits).to_string().parse::<f64>().unwrap_or(0.0);
        let d = (&self.den >> bits).to_string().parse::<f64>().unwrap_or(1.0);
        n / d
    }
}

impl std::fmt::Display for CircleState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

/// `n` is a power of three (including `3⁰ = 1`).
pub fn is_power_of_three(n: &BigUint) -> bool {
    let three = BigUint::from(3u32);
    let mut n = n.clone();
    if n.is_zero() {
        return false;
    }
    while (&n % &three).is_zero() {
        n /= &three;
    }
    n.is_one()
}

/// Which orbit class a state belongs to by its denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Orbit {
    /// Denominator `3^k`: reachable from 0.
    Triadic,
    /// Denominator `2·3^k`: reachable from ½.
    HalfTriadic,
    Other,
}

pub fn orbit(z: &CircleState) -> Orbit {
    if is_power_of_three(&z.den) {
        Orbit::Triadic
    } else if (&z.den % 2u32).is_zero() && is_power_of_three(&(&z.den / 2u32)) {
        Orbit::HalfTriadic
    } else {
        Orbit::Other
    }
}

fn check_p(p: f64) -> Result<()> {
    if !(p > 0.0 && p < 1.0 / 6.0) {
        return Err(Error::Precondition(format!("p must satisfy 0 < p < 1/6, got {p}")));
    }
    Ok(())
}

/// One step of the circle chain.
pub fn circle_step<R: Rng + ?Sized>(z: &CircleState, p: f64, rng: &mut R) -> CircleState {
    let u = rng.random::<f64>();
    if u < 1.0 - 3.0 * p {
        z.triple()
    } else {
        let k = (((u - (1.0 - 3.0 * p)) / p) as u32).min(2);
        z.third(k)
    }
}

/// Exact one-step law of the chain from `z`; coinciding branches merge.
pub fn circle_kernel(z: &CircleState, p: f64) -> Vec<(CircleState, f64)> {
    let mut out: Vec<(CircleState, f64)> = Vec::new();
    let branches = [(z.triple(), 1.0 - 3.0 * p), (z.third(0), p), (z.third(1), p), (z.third(2), p)];
    for (s, w) in branches {
        match out.iter_mut().find(|(t, _)| *t == s) {
            Some(e) => e.1 += w,
            None => out.push((s, w)),
        }
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct CircleReport {
    pub p: f64,
    pub n_steps: usize,
    pub n_paths: usize,
    pub distinct_states_from_zero: usize,
    pub distinct_states_from_half: usize,
    /// States shared by the two occupation laws.
    pub collisions: usize,
    /// Exact `½ Σ |a_s − b_s| / N` with integer visit counts.
    pub tv: f64,
    pub tv_is_exactly_one: bool,
    pub orbit_violations: usize,
}

/// Occupation counts of `n_paths` chains of `n_steps` steps from `z0`.
fn occupation(z0: &CircleState, expect: Orbit, p: f64, n_steps: usize, n_paths: usize, seed: u64, tag: u64) -> (HashMap<CircleState, u64>, usize) {
    let mut counts = HashMap::new();
    let mut violations = 0;
    for i in 0..n_paths {
        let mut rng = stream(seed, Purpose::Chain, (tag << 32) | i as u64);
        let mut z = z0.clone();
        for _ in 0..n_steps {
            z = circle_step(&z, p, &mut rng);
            if orbit(&z) != expect {
                violations += 1;
            }
            *counts.entry(z.clone()).or_insert(0u64) += 1;
        }
    }
    (counts, violations)
}

pub fn run_circle(p: f64, n_steps: usize, n_paths: usize, seed: u64) -> Result<CircleReport> {
    check_p(p)?;
    let half = CircleState::new(1, 2)?;
    let (a, va) = occupation(&CircleState::zero(), Orbit::Triadic, p, n_steps, n_paths, seed, 0);
    let (b, vb) = occupation(&half, Orbit::HalfTriadic, p, n_steps, n_paths, seed, 1);
    let collisions = a.keys().filter(|k| b.contains_key(*k)).count();
    // both laws have the same total count N, so TV = Σ|a−b| / 2N exactly
    let total = (n_steps * n_paths) as u64;
    let mut diff: u64 = 0;
    for (k, &ca) in &a {
        diff += ca.abs_diff(b.get(k).copied().unwrap_or(0));
    }
    for (k, &cb) in &b {
        if !a.contains_key(k) {
            diff += cb;
        }
    }
    Ok(CircleReport {
        p,
        n_steps,
        n_paths,
        distinct_states_from_zero: a.len(),
        distinct_states_from_half: b.len(),
        collisions,
        tv: diff as f64 / (2 * total) as f64,
        tv_is_exactly_one: diff == 2 * total,
        orbit_violations: va + vb,
    })
}

/// `T_{n+1} = T_n + 1` with probability `b`, `(T_n − 1) ∨ 0` otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct BirthDeathState {
    pub level: u64,
}

impl BirthDeathState {
    pub fn step<R: Rng + ?Sized>(self, b: f64, rng: &mut R) -> (Self, bool) {
        if rng.random::<f64>() < b {
            (Self { level: self.level + 1 }, true)
        } else {
            (Self { level: self.level.saturating_sub(1) }, false)
        }
    }
}

pub const BD_BURN_IN: usize = 1000;
pub const BD_THIN: usize = 50;

#[derive(Debug, Clone, Serialize)]
pub struct BirthDeathReport {
    pub b: f64,
    pub d: f64,
    pub r: f64,
    pub n_steps: usize,
    /// Fraction of all steps spent at each level `0..levels`.
    pub occupancy: Vec<f64>,
    pub geometric: Vec<f64>,
    pub up_fraction: f64,
    pub up_wilson: (f64, f64),
    /// Test on samples thinned to every `BD_THIN`-th step after `BD_BURN_IN`.
    pub chi_square: ChiSquareResult,
    pub thinned_samples: usize,
}

/// Birth–death chain with `b = 3p`, `d = 1 − 3p` against `(1−r)r^k`, `r = b/d`.
pub fn run_birth_death(p: f64, n_steps: usize, seed: u64) -> Result<BirthDeathReport> {
    check_p(p)?;
    if n_steps <= BD_BURN_IN + BD_THIN {
        return Err(Error::Precondition(format!("need more than {} steps", BD_BURN_IN + BD_THIN)));
    }
    let b = 3.0 * p;
    let d = 1.0 - b;
    let r = b / d;
    let mut rng = stream(seed, Purpose::Chain, 1 << 40);
    let mut s = BirthDeathState::default();
    let mut visits: Vec<u64> = Vec::new();
    let mut thinned: Vec<u64> = Vec::new();
    let mut ups = 0usize;
    for n in 0..n_steps {
        let (next, up) = s.step(b, &mut rng);
        s = next;
        ups += usize::from(up);
        let l = s.level as usize;
        if visits.len() <= l {
            visits.resize(l + 1, 0);
        }
        visits[l] += 1;
        if n >= BD_BURN_IN && (n - BD_BURN_IN) % BD_THIN == 0 {
            thinned.push(s.level);
        }
    }
    let m = thinned.len();
    // bins 0..k_max−1 and a lumped tail, each with expected count ≥ 5
    let mut k_max = 1;
    while (m as f64) * (1.0 - r) * r.powi(k_max as i32) >= 5.0 {
        k_max += 1;
    }
    let mut observed = vec![0u64; k_max + 1];
    for &l in &thinned {
        observed[(l as usize).min(k_max)] += 1;
    }
    let mut expected: Vec<f64> = (0..k_max).map(|k| m as f64 * (1.0 - r) * r.powi(k as i32)).collect();
    expected.push(m as f64 * r.powi(k_max as i32));
    let levels = visits.len();
    Ok(BirthDeathReport {
        b,
        d,
        r,
        n_steps,
        occupancy: visits.iter().map(|&v| v as f64 / n_steps as f64).collect(),
        geometric: (0..levels).map(|k| (1.0 - r) * r.powi(k as i32)).collect(),
        up_fraction: ups as f64 / n_steps as f64,
        up_wilson: wilson(ups, n_steps, Z95),
        chi_square: chi_square_gof(&observed, &expected),
        thinned_samples: m,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Example53Report {
    pub circle: CircleReport,
    pub birth_death: BirthDeathReport,
}

pub fn run_example_5_3(p: f64, n_steps: usize, n_paths: usize, bd_steps: usize, seed: u64) -> Result<Example53Report> {
    check_p(p)?;
    Ok(Example53Report { circle: run_circle(p, n_steps, n_paths, seed)?, birth_death: run_birth_death(p, bd_steps, seed)? })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: u64, d: u64) -> CircleState {
        CircleState::new(n, d).unwrap()
    }

    #[test]
    fn kernel_from_zero_merges_atoms() {
        let k = circle_kernel(&CircleState::zero(), 0.1);
        assert_eq!(k.len(), 3);
        assert_eq!(k[0].0, CircleState::zero());
        assert!((k[0].1 - 0.8).abs() < 1e-15);
        assert_eq!(k[1], (q(1, 3), 0.1));
        assert_eq!(k[2], (q(2, 3), 0.1));
    }

    #[test]
    fn kernel_from_half() {
        let k = circle_kernel(&q(1, 2), 0.1);
        let states: Vec<String> = k.iter().map(|(s, _)| s.to_string()).collect();
        assert_eq!(states, ["1/2", "1/6", "5/6"]);
        assert!((k[0].1 - 0.8).abs() < 1e-15);
    }

    #[test]
    fn branches_preserve_the_orbit() {
        // every branch maps 3^k to 3^j and 2·3^k to 2·3^j denominators
        for (n, d) in [(0, 1), (1, 3), (5, 9), (26, 27), (1, 2), (1, 6), (7, 18), (53, 54)] {
            let z = q(n, d);
            let o = orbit(&z);
            assert_ne!(o, Orbit::Other);
            for (s, _) in circle_kernel(&z, 0.1) {
                assert_eq!(orbit(&s), o, "{z} -> {s}");
            }
        }
    }

    #[test]
    fn exact_arithmetic_survives_long_runs() {
        let mut rng = stream(1, Purpose::Chain, 0);
        let mut z = CircleState::zero();
        for _ in 0..400 {
            z = circle_step(&z, 0.15, &mut rng);
            assert!(z.numerator() < z.denominator());
            assert!(is_power_of_three(z.denominator()));
        }
    }

    #[test]
    fn disjoint_occupation() {
        let r = run_circle(0.1, 50, 40, 3).unwrap();
        assert!(r.tv_is_exactly_one && r.tv == 1.0);
        assert_eq!(r.collisions, 0);
        assert_eq!(r.orbit_violations, 0);
    }

    #[test]
    fn p_out_of_range() {
        assert!(matches!(run_example_5_3(0.2, 10, 10, 10_000, 1), Err(Error::Precondition(_))));
        assert!(run_circle(0.0, 10, 10, 1).is_err());
    }

    #[test]
    fn birth_death_geometric() {
        let r = run_birth_death(0.1, 200_000, 4).unwrap();
        assert!((r.r - 3.0 / 7.0).abs() < 1e-15);
        assert!((r.occupancy[0] - 4.0 / 7.0).abs() < 0.02);
        assert!(r.chi_square.p_value > 0.001);
        let (lo, hi) = r.up_wilson;
        let (lo3, hi3) = wilson((r.up_fraction * 200_000.0).round() as usize, 200_000, 3.0);
        assert!(lo3 <= 0.3 && 0.3 <= hi3, "{lo} {hi}");
    }
}
