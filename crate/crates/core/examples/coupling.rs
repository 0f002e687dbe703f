//! Switching coupling of two jump-OU copies started at 0 and 5: gluing
//! statistics and the empirical β-mixing tail `P̂(Q* > t)`.

use jumplab::coupling::{beta_mixing_tail, switching_runs, SwitchingConfig};
use jumplab::law::{Binning, Start};
use jumplab::model::{ou_jump, DriftForm};

fn main() -> jumplab::Result<()> {
    let m = ou_jump(1.0, 1.0, DriftForm::Raw);
    let cfg = SwitchingConfig {
        radius: 3.0,
        window: 1.0,
        max_cycles: 50,
        n_aux: 200,
        binning: Binning::uniform(-2.0, 8.0, 200)?,
        dt: 0.01,
        max_free_time: 100.0,
        horizon: None,
    };
    let runs = switching_runs(&m, &Start::Point(vec![0.0]), &Start::Point(vec![5.0]), &cfg, 0.0, 21, 400)?;
    let glued = runs.iter().filter(|r| r.glued).count();
    println!("{glued}/{} runs glued", runs.len());
    println!("first run: Q = {:?}, phases {:?}", runs[0].q_times, runs[0].phases);
    let grid: Vec<f64> = (0..=10).map(f64::from).collect();
    println!("t,tail,n");
    for p in beta_mixing_tail(&runs, &grid) {
        println!("{},{:.4},{}", p.t, p.tail, p.n);
    }
    Ok(())
}
