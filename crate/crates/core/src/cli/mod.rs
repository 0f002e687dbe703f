//! The `jumplab` batch driver.
//!
//! Every command reads a scenario (or the built-in jump-OU default), writes
//! `<command>.json` with the scenario echo and the results, and plot-ready
//! CSV files into `--out`. Exit codes: 0 success, 2 configuration or
//! precondition error, 3 numeric divergence.

pub mod output;
pub mod scenario;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::conditions::{box_grid, check_n_mc, check_n_rank, check_n_static, check_r, check_s};
use crate::coupling::{beta_mixing_tail, switching_runs, SwitchingConfig};
use crate::error::{Error, Result};
use crate::gallery::{self, circle, Prop01Config};
use crate::generator::test_function;
use crate::law::khasminskii_average;
use crate::rates::{coupling_inequality, theoretical_rate_bound, tv_decay_curve};
use crate::rng::{stream, Purpose};
use crate::sde::{simulate_path, SimParams};
use output::{write_csv, write_json, Cell};
pub use scenario::Scenario;

#[derive(Debug, Parser)]
#[command(name = "jumplab", version, about = "Ergodicity experiments for SDEs with Poisson jump noise")]
pub struct Cli {
    /// Scenario file (JSON); the jump-OU benchmark if omitted.
    #[arg(long, global = true)]
    pub scenario: Option<PathBuf>,
    /// Overrides `sim.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; 0 uses every core. Never changes results.
    #[arg(long, global = true, default_value_t = 0)]
    pub workers: usize,
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Route {
    Mc,
    Static,
    Rank,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GalleryItem {
    #[value(name = "5.1")]
    Ex51,
    #[value(name = "5.2")]
    Ex52,
    #[value(name = "5.3")]
    Ex53,
    #[value(name = "prop01")]
    Prop01,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate `sim.n_paths` paths from `x0`.
    Simulate,
    /// Lyapunov condition R on a box grid.
    CheckR,
    /// Nondegeneracy condition N.
    CheckN {
        #[arg(long, value_enum, default_value = "mc")]
        route: Route,
    },
    /// Support condition S.
    CheckS,
    /// Switching coupling runs and the β-mixing tail.
    Couple,
    /// TV decay between two starting points.
    TvCurve,
    /// Khasminskii average as an invariant-law proxy.
    Invariant,
    /// Theoretical rate constants.
    RateBound,
    /// Counterexamples and the one-dimensional ergodicity scenario.
    Gallery {
        #[arg(value_enum)]
        item: GalleryItem,
        /// Overrides `gallery.p`.
        #[arg(long)]
        p: Option<f64>,
        /// Overrides `gallery.c`.
        #[arg(long)]
        c: Option<f64>,
    },
    /// Re-validate every report in `--out` and write `summary.json`.
    Report,
}

impl Command {
    pub fn name(&self) -> String {
        match self {
            Command::Simulate => "simulate".into(),
            Command::CheckR => "check_r".into(),
            Command::CheckN { route } => format!("check_n_{}", format!("{route:?}").to_lowercase()),
            Command::CheckS => "check_s".into(),
            Command::Couple => "couple".into(),
            Command::TvCurve => "tv_curve".into(),
            Command::Invariant => "invariant".into(),
            Command::RateBound => "rate_bound".into(),
            Command::Gallery { item, .. } => match item {
                GalleryItem::Ex51 => "gallery_5_1".into(),
                GalleryItem::Ex52 => "gallery_5_2".into(),
                GalleryItem::Ex53 => "gallery_5_3".into(),
                GalleryItem::Prop01 => "gallery_prop01".into(),
            },
            Command::Report => "summary".into(),
        }
    }
}

#[derive(Debug, Serialize)]
struct Envelope<'a, T: Serialize> {
    command: String,
    version: &'static str,
    seed: u64,
    scenario: &'a Scenario,
    result: T,
}

/// Exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_divergence() {
        3
    } else if matches!(e, Error::Io(_)) {
        1
    } else {
        2
    }
}

/// Parse `argv`, run, and return the process exit code.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn load_scenario(cli: &Cli) -> Result<Scenario> {
    let mut s = match &cli.scenario {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            Scenario::from_json(&text)?
        }
        None => Scenario::default(),
    };
    if let Some(seed) = cli.seed {
        s.sim.seed = seed;
    }
    Ok(s)
}

pub fn run(cli: &Cli) -> Result<()> {
    std::fs::create_dir_all(&cli.out)?;
    if matches!(cli.command, Command::Report) {
        return summarize(&cli.out);
    }
    let scenario = load_scenario(cli)?;
    scenario.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {} workers: {e}", cli.workers)))?;
    pool.install(|| dispatch(&cli.command, &scenario, &cli.out))
}

fn emit<T: Serialize>(dir: &Path, command: &Command, scenario: &Scenario, result: T) -> Result<()> {
    let name = command.name();
    let env = Envelope { command: name.clone(), version: env!("CARGO_PKG_VERSION"), seed: scenario.sim.seed, scenario, result };
    write_json(dir, &format!("{name}.json"), &env)
}

fn tv_rows(points: &[crate::rates::TvPoint]) -> Vec<Vec<Cell>> {
    points.iter().map(|p| vec![p.t.into(), p.tv.into(), p.stderr.into()]).collect()
}

fn dispatch(command: &Command, s: &Scenario, out: &Path) -> Result<()> {
    let model = s.build_model()?;
    let m = model.dim();
    let sim = s.sim;
    match command {
        Command::Simulate => {
            let x0 = s.x0.clone().unwrap_or_else(|| vec![0.0; m]);
            let mut rows = Vec::new();
            let mut first = Vec::new();
            let mut exploded = 0;
            let mut jumps = 0;
            let mut sum = vec![0.0; m];
            for i in 0..sim.n_paths {
                let traj = simulate_path(&model, &x0, &sim, &mut stream(sim.seed, Purpose::Path, i as u64))?;
                exploded += usize::from(traj.explosion.is_some());
                jumps += traj.jumps.len();
                let end = traj.terminal();
                let mut row: Vec<Cell> = vec![i.into()];
                for j in 0..m {
                    sum[j] += end[j];
                    row.push(end[j].into());
                }
                row.push(traj.jumps.len().into());
                rows.push(row);
                if i == 0 {
                    first = traj.skeleton.iter().map(|(t, x)| std::iter::once(Cell::F(*t)).chain(x.iter().map(|v| Cell::F(*v))).collect()).collect();
                }
            }
            let xs: Vec<String> = (1..=m).map(|j| format!("x{j}")).collect();
            let mut header = vec!["path"];
            header.extend(xs.iter().map(String::as_str));
            header.push("jumps");
            write_csv(out, "terminal.csv", &header, &rows)?;
            let mut theader = vec!["t"];
            theader.extend(xs.iter().map(String::as_str));
            write_csv(out, "trajectory.csv", &theader, &first)?;
            let n = sim.n_paths as f64;
            emit(out, command, s, serde_json::json!({
                "x0": x0,
                "n_paths": sim.n_paths,
                "exploded": exploded,
                "mean_jumps": jumps as f64 / n,
                "terminal_mean": sum.iter().map(|v| v / n).collect::<Vec<_>>(),
            }))
        }
        Command::CheckR => {
            let b = &s.check_r;
            let phi = test_function(&b.phi, b.p)?;
            let grid = box_grid(m, b.half_width, b.per_axis);
            let r = check_r(&model, phi.as_ref(), &grid, &b.alpha_grid)?;
            let rows: Vec<Vec<Cell>> = r.per_alpha.iter().map(|a| vec![a.alpha.into(), a.gamma.into(), a.violations.into()]).collect();
            write_csv(out, "check_r.csv", &["alpha", "gamma", "violations"], &rows)?;
            emit(out, command, s, r)
        }
        Command::CheckN { route } => {
            let b = &s.check_n;
            let x_star = b.x_star.clone().unwrap_or_else(|| vec![0.0; m]);
            match route {
                Route::Mc => {
                    let params = SimParams { horizon: sim.horizon.max(b.t_star), ..sim };
                    emit(out, command, s, check_n_mc(&model, &x_star, b.t_star, &params, b.svd_tol)?)
                }
                Route::Static => {
                    let r = check_n_static(&model, &x_star, &b.epsilons, b.n_directions, b.force_sphere)?;
                    let rows: Vec<Vec<Cell>> = r.rows.iter().map(|e| vec![e.epsilon.into(), e.min_mass.into()]).collect();
                    write_csv(out, "check_n_static.csv", &["epsilon", "min_mass"], &rows)?;
                    emit(out, command, s, r)
                }
                Route::Rank => emit(out, command, s, check_n_rank(&model, &x_star, b.fd_step)?),
            }
        }
        Command::CheckS => {
            let b = &s.check_s;
            let x_star = b.x_star.clone().unwrap_or_else(|| vec![0.0; m]);
            let r = check_s(&model, &x_star, &b.radii, b.t, b.epsilon, &sim, b.n_directions)?;
            let rows: Vec<Vec<Cell>> = r
                .rows
                .iter()
                .map(|row| {
                    let start: Vec<String> = row.start.iter().map(|v| output::fmt17(*v)).collect();
                    vec![row.radius.into(), Cell::S(start.join(";")), row.hits.into(), row.n_paths.into(), row.frequency.into()]
                })
                .collect();
            write_csv(out, "check_s.csv", &["radius", "start", "hits", "n", "frequency"], &rows)?;
            emit(out, command, s, r)
        }
        Command::Couple => {
            let b = &s.coupling;
            let cfg = SwitchingConfig {
                radius: b.radius,
                window: b.window,
                max_cycles: b.max_cycles,
                n_aux: b.n_aux,
                binning: b.binning.clone(),
                dt: sim.dt,
                max_free_time: b.max_free_time,
                horizon: None,
            };
            let runs = switching_runs(&model, &b.mu1, &b.mu2, &cfg, sim.truncation, sim.seed, b.n_runs)?;
            let tail = beta_mixing_tail(&runs, &b.t_grid);
            let rows: Vec<Vec<Cell>> = tail.iter().map(|p| vec![p.t.into(), p.tail.into(), p.n.into()]).collect();
            write_csv(out, "beta_tail.csv", &["t", "tail", "n"], &rows)?;
            let summary = coupling_summary(&runs);
            let inequality = if b.check_inequality {
                let curve = tv_decay_curve(&model, &b.mu1, &b.mu2, &b.t_grid, &sim, &b.binning)?;
                write_csv(out, "coupling_tv.csv", &["t", "tv", "stderr"], &tv_rows(&curve.points))?;
                Some(coupling_inequality(&curve, &tail))
            } else {
                None
            };
            emit(out, command, s, serde_json::json!({ "summary": summary, "tail": tail, "inequality": inequality }))
        }
        Command::TvCurve => {
            let b = &s.tv;
            let curve = tv_decay_curve(&model, &b.x, &b.y, &b.t_grid, &sim, &b.binning)?;
            write_csv(out, "tv_curve.csv", &["t", "tv", "stderr"], &tv_rows(&curve.points))?;
            emit(out, command, s, curve)
        }
        Command::Invariant => {
            let b = &s.invariant;
            let law = khasminskii_average(&model, &b.mu0, b.horizon, b.burn_in, &sim, &b.binning)?;
            let xs: Vec<String> = (1..=m).map(|j| format!("x{j}")).collect();
            let mut header = vec!["cell"];
            header.extend(xs.iter().map(String::as_str));
            header.push("mass");
            let rows: Vec<Vec<Cell>> = (0..law.binning.n_cells())
                .map(|k| {
                    let mut row: Vec<Cell> = vec![k.into()];
                    row.extend(law.binning.cell_center(k).into_iter().map(Cell::F));
                    row.push(law.masses[k].into());
                    row
                })
                .collect();
            write_csv(out, "invariant.csv", &header, &rows)?;
            emit(out, command, s, serde_json::json!({
                "mean": law.mean,
                "variance": law.variance(),
                "out_of_range_mass": law.out_of_range_mass(),
                "law": law,
            }))
        }
        Command::RateBound => {
            let b = &s.rate;
            let bound = theoretical_rate_bound(b.alpha, b.gamma, b.c, b.window, b.delta, b.sup_phi)?;
            let rows: Vec<Vec<Cell>> = b.t_grid.iter().map(|&t| vec![t.into(), bound.tv_bound(b.phi_mu, t).into()]).collect();
            write_csv(out, "rate_bound.csv", &["t", "bound"], &rows)?;
            emit(out, command, s, bound)
        }
        Command::Gallery { item, p, c } => {
            let g = &s.gallery;
            match item {
                GalleryItem::Ex51 => {
                    let params = SimParams { horizon: g.horizon_5_1, n_paths: g.paths_5_1, ..sim };
                    emit(out, command, s, gallery::run_example_5_1(c.unwrap_or(g.c), g.x0, &params)?)
                }
                GalleryItem::Ex52 => {
                    let params = SimParams { horizon: g.horizon_5_2, n_paths: g.paths_5_2, ..sim };
                    emit(out, command, s, gallery::run_example_5_2(&params, &g.binning_5_2)?)
                }
                GalleryItem::Ex53 => {
                    let r = circle::run_example_5_3(p.unwrap_or(g.p), g.circle_steps, g.circle_paths, g.birth_death_steps, sim.seed)?;
                    let bd = &r.birth_death;
                    let rows: Vec<Vec<Cell>> = bd.occupancy.iter().zip(&bd.geometric).enumerate().map(|(k, (e, q))| vec![k.into(), (*e).into(), (*q).into()]).collect();
                    write_csv(out, "birth_death.csv", &["level", "occupancy", "geometric"], &rows)?;
                    emit(out, command, s, r)
                }
                GalleryItem::Prop01 => {
                    let cfg = Prop01Config {
                        q: g.q,
                        t_grid: g.t_grid_prop01.clone(),
                        binning: g.binning_prop01.clone(),
                        khasminskii_horizon: g.khasminskii_horizon,
                        khasminskii_paths: g.khasminskii_paths,
                        ..Prop01Config::default()
                    };
                    let params = SimParams { n_paths: g.paths_prop01, ..sim };
                    let r = gallery::run_prop_0_1(&model, &cfg, &params)?;
                    if let Some(curve) = &r.curve {
                        write_csv(out, "prop01_tv.csv", &["t", "tv", "stderr"], &tv_rows(&curve.points))?;
                    }
                    emit(out, command, s, r)
                }
            }
        }
        Command::Report => unreachable!("handled before dispatch"),
    }
}

#[derive(Debug, Serialize)]
pub struct CouplingSummary {
    pub n_runs: usize,
    pub glue_fraction: f64,
    /// Quantiles of `Q*` with unglued runs counted as `+∞` (`null`).
    pub q_star_quantiles: Vec<(f64, Option<f64>)>,
    pub mean_cycles: f64,
    pub gluing_attempts: usize,
    /// Fraction of gluing attempts that glued: an estimate of `δ(T, R)`.
    pub delta_hat: f64,
}

pub fn coupling_summary(runs: &[crate::coupling::CouplingRecord]) -> CouplingSummary {
    use crate::coupling::Phase;
    let n = runs.len();
    let mut q: Vec<f64> = runs.iter().map(|r| r.q_star.unwrap_or(f64::INFINITY)).collect();
    q.sort_by(f64::total_cmp);
    let quant = |p: f64| {
        let v = q[((p * n as f64).ceil() as usize).clamp(1, n) - 1];
        v.is_finite().then_some(v)
    };
    let attempts: usize = runs.iter().map(|r| r.phases.iter().filter(|p| **p == Phase::Gluing).count()).sum();
    let successes = runs.iter().filter(|r| r.glued && r.phases.contains(&Phase::Gluing)).count();
    CouplingSummary {
        n_runs: n,
        glue_fraction: runs.iter().filter(|r| r.glued).count() as f64 / n as f64,
        q_star_quantiles: [0.5, 0.9, 0.99].iter().map(|&p| (p, quant(p))).collect(),
        mean_cycles: runs.iter().map(|r| r.cycles as f64).sum::<f64>() / n as f64,
        gluing_attempts: attempts,
        delta_hat: if attempts == 0 { f64::NAN } else { successes as f64 / attempts as f64 },
    }
}

#[derive(Debug, Serialize)]
struct SummaryEntry {
    file: String,
    command: String,
    seed: u64,
    scenario_valid: bool,
    problem: Option<String>,
}

/// Re-parse every report's scenario echo and validate it.
fn summarize(dir: &Path) -> Result<()> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json") && p.file_name().is_some_and(|n| n != "summary.json"))
        .collect();
    files.sort();
    let mut entries = Vec::new();
    for path in &files {
        let text = std::fs::read_to_string(path)?;
        let value: serde_json::Value = serde_json::from_str(&text)?;
        let check = value
            .get("scenario")
            .ok_or_else(|| Error::Config("report has no scenario echo".into()))
            .and_then(|v| serde_json::from_value::<Scenario>(v.clone()).map_err(|e| Error::Config(e.to_string())))
            .and_then(|sc| sc.validate());
        entries.push(SummaryEntry {
            file: path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
            command: value.get("command").and_then(|c| c.as_str()).unwrap_or("").to_string(),
            seed: value.get("seed").and_then(|c| c.as_u64()).unwrap_or(0),
            scenario_valid: check.is_ok(),
            problem: check.err().map(|e| e.to_string()),
        });
    }
    let bad = entries.iter().filter(|e| !e.scenario_valid).count();
    write_json(dir, "summary.json", &serde_json::json!({ "version": env!("CARGO_PKG_VERSION"), "reports": entries }))?;
    if bad > 0 {
        return Err(Error::Config(format!("{bad} report(s) failed re-validation")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_in(dir: &Path, args: &[&str]) -> i32 {
        let mut argv = vec!["jumplab", "--out", dir.to_str().unwrap()];
        argv.extend_from_slice(args);
        run_command(argv)
    }

    #[test]
    fn rate_bound_and_report() {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(run_in(dir.path(), &["rate-bound"]), 0);
        let text = std::fs::read_to_string(dir.path().join("rate_bound.json")).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert!((v["result"]["d"].as_f64().unwrap() - 3.2457).abs() < 1e-4);
        assert_eq!(run_in(dir.path(), &["report"]), 0);
        assert!(dir.path().join("summary.json").exists());
    }

    #[test]
    fn exit_codes() {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(run_in(dir.path(), &["gallery", "5.3", "--p", "0.2"]), 2);
        assert_eq!(run_in(dir.path(), &["no-such-command"]), 2);
        let bad = dir.path().join("bad.json");
        std::fs::write(&bad, r#"{"model": {"name": "nope"}}"#).unwrap();
        assert_eq!(run_in(dir.path(), &["--scenario", bad.to_str().unwrap(), "simulate"]), 2);
        let div = dir.path().join("div.json");
        std::fs::write(
            &div,
            r#"{"model": {"name": "poly1d", "params": {"coeffs": [0, 0, 1]}}, "sim": {"dt": 0.01, "horizon": 5, "n_paths": 1}, "x0": [2.0], "invariant": {"horizon": 5, "mu0": [2.0]}}"#,
        )
        .unwrap();
        assert_eq!(run_in(dir.path(), &["--scenario", div.to_str().unwrap(), "invariant"]), 3);
    }

    #[test]
    fn repeated_seed_is_byte_identical() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let scen = a.path().join("s.json");
        std::fs::write(&scen, r#"{"measure": {"atoms": [{"mark": [1.0], "weight": 1.0}]}, "model": {"name": "ou_jump", "form": "raw"}, "sim": {"dt": 0.02, "horizon": 3, "n_paths": 300, "seed": 9}, "tv": {"t_grid": [0.5, 1, 2]}}"#).unwrap();
        let sc = scen.to_str().unwrap();
        assert_eq!(run_in(a.path(), &["--scenario", sc, "--workers", "1", "tv-curve"]), 0);
        assert_eq!(run_in(b.path(), &["--scenario", sc, "--workers", "3", "tv-curve"]), 0);
        for f in ["tv_curve.csv", "tv_curve.json"] {
            assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
        }
        let csv = std::fs::read_to_string(a.path().join("tv_curve.csv")).unwrap();
        assert!(csv.starts_with("t,tv,stderr\n"));
    }
}
