//! Run the three sufficient conditions on the jump-OU model: the Lyapunov
//! condition R, nondegeneracy N (all three routes) and support S.

use jumplab::conditions::{box_grid, check_n_mc, check_n_rank, check_n_static, check_r, check_s, SVD_TOL};
use jumplab::generator::{generator_apply, SquaredNorm};
use jumplab::model::{ou_jump, DriftForm};
use jumplab::sde::SimParams;

fn main() -> jumplab::Result<()> {
    let m = ou_jump(1.0, 1.0, DriftForm::Compensated);
    for x in [0.0, 1.0, 2.0] {
        println!("𝒜φ({x}) = {}", generator_apply(&m, &SquaredNorm, &[x])?);
    }
    let r = check_r(&m, &SquaredNorm, &box_grid(1, 5.0, 41), &[0.5, 1.0, 1.5, 2.0])?;
    println!("R: α̂ = {}, γ̂ = {:.4}, growth confirmed: {}, verdict {:?}", r.alpha_hat, r.gamma_hat, r.growth_confirmed, r.verdict);

    let raw = ou_jump(1.0, 1.0, DriftForm::Raw);
    let n = check_n_mc(&raw, &[0.0], 1.0, &SimParams::new(0.01, 1.0, 5000, 3), SVD_TOL)?;
    println!("N (Monte Carlo): p̂ = {:.4}, Wilson 95% [{:.4}, {:.4}], theory 1 − e⁻¹ = {:.4}", n.p_hat, n.wilson_ci.0, n.wilson_ci.1, 1.0 - (-1.0f64).exp());
    let s = check_n_static(&m, &[0.0], &[1.0, 0.5, 0.1], 64, false)?;
    println!("N (static): verdict {:?}, mass {:.4} ({:?} route)", s.verdict, s.mass, s.route);
    let k = check_n_rank(&m, &[0.0], 1e-6)?;
    println!("N (rank): rank {}, cone condition {}, verdict {:?}", k.rank, k.cone_condition, k.verdict);

    let sr = check_s(&raw, &[1.0], &[1.0, 2.0], 2.0, 0.5, &SimParams::new(0.01, 2.0, 500, 4), 4)?;
    for v in &sr.per_radius {
        println!("S: radius {} evidence {}", v.radius, v.evidence);
    }
    Ok(())
}
