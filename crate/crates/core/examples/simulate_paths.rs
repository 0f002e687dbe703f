//! Simulate the jump-OU process `dX = −X dt + dN` and a 2-d model with a
//! diffuse Lévy measure, and print a few path statistics.

use jumplab::levy::{Diffuse, DirectionLaw, LevyMeasure, RadialDensity};
use jumplab::model::{self, ou_jump, DriftForm};
use jumplab::rng::{stream, Purpose};
use jumplab::sde::{simulate_path, SimParams};
use serde_json::json;

fn main() -> jumplab::Result<()> {
    let m = ou_jump(1.0, 1.0, DriftForm::Raw);
    let params = SimParams::new(0.01, 20.0, 2000, 1);
    let mut jumps = 0;
    let mut total = 0.0;
    for i in 0..params.n_paths {
        let traj = simulate_path(&m, &[0.0], &params, &mut stream(params.seed, Purpose::Path, i as u64))?;
        jumps += traj.jumps.len();
        total += traj.terminal()[0];
    }
    let n = params.n_paths as f64;
    println!("jump-OU: mean X(20) = {:.4} (stationary mean 1), jumps per path = {:.2}", total / n, jumps as f64 / n);

    // Π(du) = ‖u‖^{-3} du on ‖u‖ ≥ 0.5 with uniform directions in the plane
    let measure = LevyMeasure::new(
        2,
        vec![],
        Some(Diffuse {
            radial: RadialDensity::Power { scale: 1.0, exponent: 3.0, lower: 0.5, upper: None },
            directions: DirectionLaw::Uniform,
        }),
    )?;
    println!("2-d measure: total rate {:.4}, ∫_{{‖u‖>1}} ‖u‖^0.5 Π(du) = {:.4}", measure.total_rate(0.0)?, measure.tail_moment(0.5)?);
    let m2 = model::build("linear_nd", &json!({"matrix": [[-1.0, 1.0], [-1.0, -1.0]]}), Some(measure), None)?;
    let p2 = SimParams::new(0.01, 5.0, 1, 2);
    let traj = simulate_path(&m2, &[1.0, 0.0], &p2, &mut stream(p2.seed, Purpose::Path, 0))?;
    println!("2-d path: {} jumps, X(5) = {:?}", traj.jumps.len(), traj.terminal());
    for j in traj.jumps.iter().take(3) {
        println!("  jump at t = {:.3}: {:?} -> {:?}", j.time, j.pre_state, j.post_state);
    }
    Ok(())
}
