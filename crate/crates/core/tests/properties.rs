use jumplab::cli::output::fmt17;
use jumplab::coupling::{glue_is_permanent, switching_runs, SwitchingConfig};
use jumplab::gallery::circle::{circle_kernel, orbit, CircleState, Orbit};
use jumplab::law::{sample_at_times, tv_distance, Binning, EmpiricalLaw, Start};
use jumplab::model::{ou_jump, DriftForm};
use jumplab::rates::theoretical_rate_bound;
use jumplab::sde::SimParams;
use proptest::prelude::*;

fn law(b: &Binning, xs: &[f64]) -> EmpiricalLaw {
    let samples: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();
    EmpiricalLaw::from_samples(b, &samples).unwrap()
}

fn samples() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-6.0f64..6.0, 1..60)
}

proptest! {
    #[test]
    fn tv_is_a_bounded_symmetric_metric(a in samples(), b in samples(), c in samples()) {
        let bin = Binning::uniform(-5.0, 5.0, 20).unwrap();
        let (la, lb, lc) = (law(&bin, &a), law(&bin, &b), law(&bin, &c));
        let ab = tv_distance(&la, &lb).unwrap();
        prop_assert_eq!(ab, tv_distance(&lb, &la).unwrap());
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert_eq!(tv_distance(&la, &la).unwrap(), 0.0);
        let ac = tv_distance(&la, &lc).unwrap();
        let cb = tv_distance(&lc, &lb).unwrap();
        prop_assert!(ab <= ac + cb + 1e-12);
    }

    #[test]
    fn cells_round_trip(x in -3.0f64..3.0, y in -3.0f64..3.0) {
        let b = Binning::new(vec![-3.0, -3.0], vec![0.25, 0.5], vec![24, 12]).unwrap();
        let k = b.cell_of(&[x, y]);
        prop_assert!(k < b.n_cells());
        let corner = b.cell_corner(k);
        prop_assert!(corner[0] <= x + 1e-12 && x < corner[0] + 0.25 + 1e-12);
        prop_assert!(corner[1] <= y + 1e-12 && y < corner[1] + 0.5 + 1e-12);
        prop_assert_eq!(b.cell_of(&b.cell_center(k)), k);
    }

    #[test]
    fn fmt17_round_trips(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
        let s = fmt17(x);
        prop_assert_eq!(s.parse::<f64>().unwrap(), x);
    }

    #[test]
    fn rate_bound_is_monotone_in_delta(d1 in 0.01f64..0.98, d2 in 0.01f64..0.98) {
        let (lo, hi) = if d1 < d2 { (d1, d2) } else { (d2, d1) };
        let a = theoretical_rate_bound(1.0, 1.0, 0.5, 1.0, lo, 1.0).unwrap();
        let b = theoretical_rate_bound(1.0, 1.0, 0.5, 1.0, hi, 1.0).unwrap();
        // a larger gluing probability never slows the rate
        prop_assert!(b.c2 >= a.c2);
        prop_assert!(b.p <= a.p);
    }

    #[test]
    fn circle_kernel_keeps_orbits(k in 0u32..12, j in 0u64..50, half in any::<bool>(), p in 0.001f64..0.16) {
        let den = 3u64.pow(k) * if half { 2 } else { 1 };
        let z = CircleState::new(j % den, den).unwrap();
        let o = orbit(&z);
        prop_assert_ne!(o, Orbit::Other);
        let next = circle_kernel(&z, p);
        let total: f64 = next.iter().map(|(_, w)| w).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        for (w, _) in &next {
            prop_assert_eq!(orbit(w), o);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn same_seed_same_paths(seed in any::<u64>(), x0 in -3.0f64..3.0) {
        let m = ou_jump(1.0, 1.0, DriftForm::Compensated);
        let params = SimParams { n_paths: 20, ..SimParams::new(0.01, 1.0, 20, seed) };
        let start = Start::Point(vec![x0]);
        let a = sample_at_times(&m, &start, &[0.5, 1.0], &params).unwrap();
        let b = sample_at_times(&m, &start, &[0.5, 1.0], &params).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn glued_runs_stay_glued(seed in any::<u64>(), y in 1.0f64..6.0, radius in 0.5f64..3.0, window in 0.2f64..1.5) {
        let m = ou_jump(1.0, 1.0, DriftForm::Raw);
        let cfg = SwitchingConfig {
            radius,
            window,
            max_cycles: 20,
            n_aux: 60,
            binning: Binning::uniform(-4.0, 10.0, 140).unwrap(),
            dt: 0.02,
            max_free_time: 30.0,
            horizon: None,
        };
        let recs = switching_runs(&m, &Start::Point(vec![0.0]), &Start::Point(vec![y]), &cfg, 0.0, seed, 4).unwrap();
        for r in &recs {
            prop_assert!(glue_is_permanent(r));
            prop_assert!(r.q_times.windows(2).all(|w| w[0] <= w[1]));
            prop_assert_eq!(r.glued, r.q_star.is_some());
        }
    }
}
