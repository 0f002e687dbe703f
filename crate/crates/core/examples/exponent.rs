//! Propagate the stochastic exponent ℰ along a simulated path and read off
//! the jump influence vectors.

use jumplab::exponent::{hat_delta, jump_influence_vectors, propagate_exponent, HatDelta};
use jumplab::levy::LevyMeasure;
use jumplab::model;
use jumplab::rng::{stream, Purpose};
use jumplab::sde::{simulate_path, SimParams};
use serde_json::json;

fn main() -> jumplab::Result<()> {
    // c(x, u) = x·u: multiplicative jumps, so ∇ₓc = u enters the exponent
    let m = model::build(
        "multiplicative_1d",
        &json!({"drift": [0.0, -1.0], "chi": [0.0, 1.0]}),
        Some(LevyMeasure::atomic(&[(vec![0.5], 1.0)])?),
        None,
    )?;
    let params = SimParams::new(1e-3, 3.0, 1, 5);
    let traj = simulate_path(&m, &[1.0], &params, &mut stream(5, Purpose::Path, 0))?;
    let log = propagate_exponent(&m, &traj)?;
    println!("{} jumps; ℰ(0, 3) = {:.6}", traj.jumps.len(), log.values.last().map(|v| v[(0, 0)]).unwrap_or(f64::NAN));
    let infl = jump_influence_vectors(&m, &traj, &log, 3.0)?;
    for (j, v) in traj.jumps.iter().zip(&infl.vectors) {
        println!("  jump at {:.3}: influence {:?}", j.time, v);
    }
    match hat_delta(&m, &[1.0], &[0.5])? {
        HatDelta::Value { value } => println!("Δ̂ at x = 1, u = 0.5: {value:?}"),
        HatDelta::NotInvertible { condition } => println!("Δ̂ undefined at x = 1, u = 0.5 (condition {condition:.3e})"),
    }
    Ok(())
}
