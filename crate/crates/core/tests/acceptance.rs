//! The acceptance suite: every criterion at its stated scale and tolerance.
//! Prints one PASS/FAIL line per criterion, then fails if any failed.

use std::time::Instant;

use jumplab::conditions::check_n_mc;
use jumplab::coupling::{beta_mixing_tail, simple_coupling_run, switching_runs, Stopping, SwitchingConfig};
use jumplab::exponent::propagate_exponent;
use jumplab::gallery::{circle, run_example_5_1, run_example_5_2};
use jumplab::generator::{generator_apply, SquaredNorm};
use jumplab::law::{khasminskii_average, sample_at_times, Binning, Start};
use jumplab::levy::LevyMeasure;
use jumplab::model::{self, ou_jump, DriftForm};
use jumplab::rates::{coupling_inequality, theoretical_rate_bound, tv_decay_curve, RateFit, TvCurve};
use jumplab::rng::{stream, Purpose};
use jumplab::sde::{simulate_path, Dynamics, SimParams};
use jumplab::stats::ks_two_sample;
use nalgebra::DMatrix;
use serde_json::json;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn benchmark() -> jumplab::model::Model {
    ou_jump(1.0, 1.0, DriftForm::Raw)
}

fn unit_grid() -> Vec<f64> {
    (1..=10).map(f64::from).collect()
}

fn c1_generator() -> Outcome {
    let m = ou_jump(1.0, 1.0, DriftForm::Compensated);
    let mut worst: f64 = 0.0;
    for x in [0.0, 1.0, 2.0] {
        let g = generator_apply(&m, &SquaredNorm, &[x]).unwrap();
        worst = worst.max((g - (-2.0 * x * x + 1.0)).abs());
    }
    outcome(worst < 1e-12, format!("max error {worst:.3e}"))
}

fn c2_exponent() -> Outcome {
    // upper triangular A: exp(A) = [[e^{-1}, e^{-1} − e^{-3}], [0, e^{-3}]]
    let m = model::build("linear_nd", &json!({"matrix": [[-1.0, 2.0], [0.0, -3.0]]}), Some(LevyMeasure::empty(2)), None).unwrap();
    let params = SimParams::new(1e-4, 1.0, 1, 0);
    let traj = simulate_path(&m, &[1.0, 1.0], &params, &mut stream(0, Purpose::Path, 0)).unwrap();
    let log = propagate_exponent(&m, &traj).unwrap();
    let (e1, e3) = ((-1.0f64).exp(), (-3.0f64).exp());
    let oracle = DMatrix::from_row_slice(2, 2, &[e1, e1 - e3, 0.0, e3]);
    let err = (log.values.last().unwrap() - oracle).norm();
    outcome(err < 1e-6, format!("‖ℰ − exp(A)‖ = {err:.3e}"))
}

fn c3_condition_n() -> Outcome {
    let params = SimParams::new(0.01, 1.0, 10_000, 3);
    let r = check_n_mc(&benchmark(), &[0.0], 1.0, &params, jumplab::conditions::SVD_TOL).unwrap();
    let p = 1.0 - (-1.0f64).exp();
    let sigma = (p * (1.0 - p) / 10_000.0).sqrt();
    let dev = (r.p_hat - p).abs();
    outcome(dev <= 3.0 * sigma, format!("p̂ = {:.4}, |p̂ − 0.6321| = {dev:.4} vs 3σ = {:.4}", r.p_hat, 3.0 * sigma))
}

fn tv_benchmark() -> TvCurve {
    let b = Binning::uniform(-2.0, 8.0, 200).unwrap();
    let params = SimParams::new(0.01, 10.0, 100_000, 4);
    tv_decay_curve(&benchmark(), &Start::Point(vec![0.0]), &Start::Point(vec![5.0]), &unit_grid(), &params, &b).unwrap()
}

fn c4_prop01(curve: &TvCurve) -> Outcome {
    let tv10 = curve.points.last().unwrap().tv;
    match &curve.fit {
        RateFit::Fitted { c2_emp, slope_p_value, n_points, .. } => outcome(
            tv10 < 0.05 && *c2_emp > 0.1 && *slope_p_value < 0.01,
            format!("d_TV(10) = {tv10:.4}, C2_emp = {c2_emp:.4}, slope p = {slope_p_value:.2e} over {n_points} points"),
        ),
        RateFit::FasterThanResolvable => outcome(false, format!("d_TV(10) = {tv10:.4}, no point above the noise floor")),
    }
}

fn c5_coupling_inequality(curve: &TvCurve) -> Outcome {
    let cfg = SwitchingConfig {
        radius: 3.0,
        window: 1.0,
        max_cycles: 100,
        n_aux: 200,
        binning: Binning::uniform(-2.0, 8.0, 200).unwrap(),
        dt: 0.01,
        max_free_time: 100.0,
        horizon: None,
    };
    let runs = switching_runs(&benchmark(), &Start::Point(vec![0.0]), &Start::Point(vec![5.0]), &cfg, 0.0, 5, 1000).unwrap();
    let tail = beta_mixing_tail(&runs, &unit_grid());
    let rows = coupling_inequality(curve, &tail);
    let bad: Vec<f64> = rows.iter().filter(|r| !r.holds).map(|r| r.t).collect();
    let glued = runs.iter().filter(|r| r.glued).count();
    outcome(
        bad.is_empty() && rows.len() == 10,
        format!("{} of {} grid points hold; tail(1) = {:.3}, tail(10) = {:.3}; {glued}/1000 glued", rows.len() - bad.len(), rows.len(), tail[0].tail, tail[9].tail),
    )
}

fn c6_rates(curve: &TvCurve) -> Outcome {
    let b = theoretical_rate_bound(1.0, 1.0, 0.5, 1.0, 0.5, 4.0).unwrap();
    // hand evaluation: D = 1/4 + ln 20, p = 2D / ln 2, C₂ = 1/(8p)
    let d = 0.25 + 20f64.ln();
    let p = 2.0 * d / std::f64::consts::LN_2;
    let c2 = 1.0 / (8.0 * p);
    let formulas = (b.d - d).abs() < 1e-6 && (b.c2 - c2).abs() < 1e-6 && (b.d - 3.2457).abs() < 1e-4 && (b.c2 - 0.01335).abs() < 1e-5;
    // φ = x², so φ(δ₀) = 0 and φ(δ₅) = 25; the larger value is used
    let below = curve.points.iter().all(|pt| pt.tv <= b.tv_bound(25.0, pt.t));
    outcome(formulas && below, format!("D = {:.6}, p = {:.4}, C₂ = {:.6}, C₁ = {:.3}; curve below bound: {below}", b.d, b.p, b.c2, b.c1))
}

fn c7_example_5_3() -> Outcome {
    let r = circle::run_example_5_3(0.1, 200, 1000, 1_000_000, 7).unwrap();
    let c = &r.circle;
    let bd = &r.birth_death;
    outcome(
        c.tv_is_exactly_one && c.orbit_violations == 0 && bd.chi_square.p_value > 0.01,
        format!(
            "circle d_TV = {} ({} + {} distinct states, {} collisions); birth–death χ² p = {:.3} (dof {})",
            c.tv, c.distinct_states_from_zero, c.distinct_states_from_half, c.collisions, bd.chi_square.p_value, bd.chi_square.dof
        ),
    )
}

fn c8_example_5_1() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (i, c) in [0.5, 0.9].into_iter().enumerate() {
        let params = SimParams::new(0.05, 200.0, 1000, 80 + i as u64);
        let r = run_example_5_1(c, 5.0, &params).unwrap();
        pass &= r.relative_error < 0.05 && r.escape_wilson.0 > 0.0;
        parts.push(format!(
            "c = {c}: slope {:.4} ± {:.4} (rel. err {:.1}%), escape {:.3} [{:.3}, {:.3}]",
            r.slope,
            r.slope_stderr,
            100.0 * r.relative_error,
            r.escape_fraction,
            r.escape_wilson.0,
            r.escape_wilson.1
        ));
    }
    outcome(pass, parts.join("; "))
}

fn c9_example_5_2() -> Outcome {
    let params = SimParams::new(0.01, 100.0, 1000, 9);
    let b = Binning::uniform(-20.0, 20.0, 400).unwrap();
    let r = run_example_5_2(&params, &b).unwrap();
    outcome(
        r.exits_plus == 0 && r.exits_minus == 0 && r.tv_averages == 1.0,
        format!("exits {} / {}, d_TV of averages = {}", r.exits_plus, r.exits_minus, r.tv_averages),
    )
}

fn c10_invariant() -> Outcome {
    let params = SimParams::new(0.01, 200.0, 1000, 10);
    let b = Binning::uniform(-2.0, 8.0, 200).unwrap();
    let law = khasminskii_average(&benchmark(), &Start::Point(vec![0.0]), 200.0, 0.0, &params, &b).unwrap();
    let (mean, var) = (law.mean[0], law.variance()[0]);
    outcome((mean - 1.0).abs() <= 0.02 && (var - 0.5).abs() <= 0.02, format!("mean {mean:.4}, variance {var:.4}"))
}

fn c11_marginals() -> Outcome {
    let n = 10_000;
    let horizon = 3.0;
    let (y1, y2) = (0.0, 5.0);
    let model = benchmark();
    let dynamics = Dynamics::new(&model, 0.0).unwrap();
    let direct = |y: f64, seed: u64| -> Vec<f64> {
        let p = SimParams::new(0.01, horizon, n, seed);
        sample_at_times(&model, &Start::Point(vec![y]), &[horizon], &p).unwrap().pop().unwrap().into_iter().map(|s| s[0]).collect()
    };
    let d1 = direct(y1, 111);
    let d2 = direct(y2, 112);
    let mut s1 = Vec::with_capacity(n);
    let mut s2 = Vec::with_capacity(n);
    for i in 0..n {
        let mut rng = stream(113, Purpose::Coupling, i as u64);
        let r = simple_coupling_run(&dynamics, &[y1], &[y2], Stopping::Horizon { time: horizon }, 0.01, &mut rng, false).unwrap();
        s1.push(r.first[0]);
        s2.push(r.second[0]);
    }
    let cfg = SwitchingConfig {
        radius: 3.0,
        window: 1.0,
        max_cycles: 100,
        n_aux: 200,
        binning: Binning::uniform(-2.0, 8.0, 200).unwrap(),
        dt: 0.01,
        max_free_time: 100.0,
        horizon: Some(horizon),
    };
    let runs = switching_runs(&model, &Start::Point(vec![y1]), &Start::Point(vec![y2]), &cfg, 0.0, 114, n).unwrap();
    let w1: Vec<f64> = runs.iter().map(|r| r.at_horizon.as_ref().unwrap().0[0]).collect();
    let w2: Vec<f64> = runs.iter().map(|r| r.at_horizon.as_ref().unwrap().1[0]).collect();
    let glued = runs.iter().filter(|r| r.q_star.is_some_and(|q| q <= horizon)).count();
    let ps = [
        ks_two_sample(&s1, &d1).p_value,
        ks_two_sample(&s2, &d2).p_value,
        ks_two_sample(&w1, &d1).p_value,
        ks_two_sample(&w2, &d2).p_value,
    ];
    let min = ps.iter().cloned().fold(1.0, f64::min);
    outcome(
        min > 0.01,
        format!(
            "KS p: simple {:.3}/{:.3}, switching {:.3}/{:.3}; {glued}/{n} switching runs glued by t = {horizon}",
            ps[0], ps[1], ps[2], ps[3]
        ),
    )
}

#[test]
fn acceptance() {
    let mut lines = Vec::new();
    let mut record = |id: usize, name: &str, f: &mut dyn FnMut() -> Outcome| {
        let t0 = Instant::now();
        let o = f();
        let line = format!(
            "[{}] {id:>2}. {name}: {} ({:.1}s)",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            t0.elapsed().as_secs_f64()
        );
        println!("{line}");
        lines.push((o.pass, line));
    };
    record(1, "generator exactness", &mut c1_generator);
    record(2, "exponent vs matrix exponential", &mut c2_exponent);
    record(3, "condition N rate", &mut c3_condition_n);
    let t0 = Instant::now();
    let curve = tv_benchmark();
    println!("       (TV benchmark curve, 2 × 10⁵ paths: {:.1}s)", t0.elapsed().as_secs_f64());
    record(4, "exponential TV decay", &mut || c4_prop01(&curve));
    record(5, "coupling inequality", &mut || c5_coupling_inequality(&curve));
    record(6, "rate constants and bound", &mut || c6_rates(&curve));
    record(7, "Example 5.3", &mut c7_example_5_3);
    record(8, "Example 5.1", &mut c8_example_5_1);
    record(9, "Example 5.2", &mut c9_example_5_2);
    record(10, "invariant-law moments", &mut c10_invariant);
    record(11, "coupling marginal fidelity", &mut c11_marginals);
    let failed: Vec<&String> = lines.iter().filter(|(p, _)| !p).map(|(_, l)| l).collect();
    println!("{} of {} criteria passed", lines.len() - failed.len(), lines.len());
    assert!(failed.is_empty(), "failed criteria:\n{}", failed.iter().map(|s| s.as_str()).collect::<Vec<_>>().join("\n"));
}
