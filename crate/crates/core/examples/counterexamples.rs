//! The three counterexamples: drift to infinity, two invariant half-lines,
//! and the circle chain with disjoint orbits.

use jumplab::gallery::{circle, run_example_5_1, run_example_5_2};
use jumplab::law::Binning;
use jumplab::sde::SimParams;

fn main() -> jumplab::Result<()> {
    for c in [0.5, 0.9] {
        let r = run_example_5_1(c, 5.0, &SimParams::new(0.05, 100.0, 300, 51))?;
        println!(
            "5.1, c = {c}: slope {:.4} ± {:.4} (expected {:.4}), escape fraction {:.3}",
            r.slope, r.slope_stderr, r.expected_slope, r.escape_fraction
        );
    }
    let r = run_example_5_2(&SimParams::new(0.01, 50.0, 200, 52), &Binning::uniform(-20.0, 20.0, 400)?)?;
    println!("5.2: exits {} / {}, d_TV of the averages {}", r.exits_plus, r.exits_minus, r.tv_averages);
    let r = circle::run_example_5_3(0.1, 100, 200, 200_000, 53)?;
    println!(
        "5.3: circle d_TV = {} with {} collisions; birth–death π₀ = {:.4} (4/7 = {:.4}), χ² p = {:.3}",
        r.circle.tv,
        r.circle.collisions,
        r.birth_death.occupancy[0],
        4.0 / 7.0,
        r.birth_death.chi_square.p_value
    );
    match circle::run_example_5_3(0.2, 10, 10, 10_000, 1) {
        Err(e) => println!("p = 0.2 rejected: {e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}
