//! One-dimensional ergodicity scenario: check the moment and nondegeneracy
//! hypotheses on Π and the dissipativity of a, then measure the decay.

use jumplab::gallery::{run_prop_0_1, Prop01Config};
use jumplab::law::Binning;
use jumplab::model::{self, ou_jump, DriftForm};
use jumplab::sde::SimParams;

fn main() -> jumplab::Result<()> {
    let params = SimParams::new(0.01, 10.0, 20_000, 61);
    let cfg = Prop01Config {
        t_grid: (1..=12).map(|k| 0.5 * k as f64).collect(),
        binning: Binning::uniform(-2.0, 8.0, 200)?,
        khasminskii_horizon: 100.0,
        khasminskii_paths: 200,
        ..Prop01Config::default()
    };
    let r = run_prop_0_1(&ou_jump(1.0, 1.0, DriftForm::Raw), &cfg, &params)?;
    println!("jump-OU: violations {:?}", r.violations);
    if let Some(c) = &r.curve {
        println!("  fit {}", serde_json::to_string(&c.fit)?);
    }
    println!("  invariant mean {:?}, variance {:?}", r.invariant_mean, r.invariant_variance);

    let ode = model::build("ou_jump", &serde_json::json!({}), None, None)?;
    let r = run_prop_0_1(&ode, &cfg, &params)?;
    println!("Π = 0: violations {:?}", r.violations);
    Ok(())
}
