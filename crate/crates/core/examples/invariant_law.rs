//! Khasminskii averages as invariant-law estimates: the jump-OU stationary
//! moments, and the two invariant half-lines of the split model.

use jumplab::law::{khasminskii_average, tv_distance, Binning, Start};
use jumplab::model::{self, ou_jump, DriftForm};
use jumplab::sde::SimParams;

fn main() -> jumplab::Result<()> {
    let m = ou_jump(1.0, 1.0, DriftForm::Raw);
    let b = Binning::uniform(-2.0, 8.0, 200)?;
    let params = SimParams::new(0.01, 200.0, 500, 41);
    let law = khasminskii_average(&m, &Start::Point(vec![0.0]), 200.0, 0.0, &params, &b)?;
    println!("jump-OU: mean {:.4} (1), variance {:.4} (0.5)", law.mean[0], law.variance()[0]);

    let split = model::build("example_5_2", &serde_json::json!({}), None, None)?;
    let wide = Binning::uniform(-20.0, 20.0, 400)?;
    let p2 = SimParams::new(0.01, 50.0, 100, 42);
    let plus = khasminskii_average(&split, &Start::Point(vec![2.0]), 50.0, 0.0, &p2, &wide)?;
    let minus = khasminskii_average(&split, &Start::Point(vec![-2.0]), 50.0, 0.0, &p2, &wide)?;
    println!("split model: means {:.3} / {:.3}, d_TV = {}", plus.mean[0], minus.mean[0], tv_distance(&plus, &minus)?);
    Ok(())
}
