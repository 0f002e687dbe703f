//! Total-variation decay between the jump-OU laws from 0 and 5, the fitted
//! exponential rate, and the theoretical bound it must lie below.

use jumplab::law::{Binning, Start};
use jumplab::model::{ou_jump, DriftForm};
use jumplab::rates::{theoretical_rate_bound, tv_decay_curve};
use jumplab::sde::SimParams;

fn main() -> jumplab::Result<()> {
    let m = ou_jump(1.0, 1.0, DriftForm::Raw);
    let params = SimParams::new(0.01, 6.0, 20_000, 31);
    let grid: Vec<f64> = (1..=12).map(|k| 0.5 * k as f64).collect();
    let curve = tv_decay_curve(&m, &Start::Point(vec![0.0]), &Start::Point(vec![5.0]), &grid, &params, &Binning::uniform(-2.0, 8.0, 200)?)?;
    let bound = theoretical_rate_bound(1.0, 1.0, 0.5, 1.0, 0.5, 4.0)?;
    println!("t,tv,stderr,floor,bound");
    for p in &curve.points {
        println!("{},{:.5},{:.5},{:.5},{:.3}", p.t, p.tv, p.stderr, p.floor, bound.tv_bound(25.0, p.t));
    }
    println!("fit: {}", serde_json::to_string(&curve.fit)?);
    println!("theory: D = {:.4}, p = {:.3}, C₂ = {:.5}, C₁ = {:.3}", bound.d, bound.p, bound.c2, bound.c1);
    Ok(())
}
