use mmconverse::dmc::solve_saddle_dmc;
use mmconverse::gamma::{check_saddle, gamma_eval, max_over_z, optimal_z};
use mmconverse::hypothesis::beta_variational;
use mmconverse::io::{parse_channel, write_channel};
use mmconverse::oracle::{beta_lp_oracle, grid_saddle_check, maxmin_lp};
use mmconverse::{beta_np, product_channel, solve_saddle, Channel, Channel64, ProbVector64, RatePoint64, TolerancePolicy64, ZVector64};
use proptest::prelude::*;

fn dist(n: usize) -> impl Strategy<Value = ProbVector64> {
    prop::collection::vec(prop_oneof![1 => Just(0.0), 6 => 0.001f64..1.0], n).prop_filter_map("all zero", |raw| {
        let s: f64 = raw.iter().sum();
        (s > 0.0).then(|| ProbVector64::from_f64(&raw.iter().map(|v| v / s).collect::<Vec<_>>()).unwrap())
    })
}

fn channel(nx: std::ops::RangeInclusive<usize>, ny: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Channel64> {
    (nx, ny).prop_flat_map(|(nx, ny)| prop::collection::vec(dist(ny), nx)).prop_map(|rows| {
        let rows: Vec<Vec<f64>> = rows.iter().map(|r| r.as_slice().to_vec()).collect();
        Channel64::from_rows(&rows).unwrap()
    })
}

fn pair() -> impl Strategy<Value = (ProbVector64, ProbVector64)> {
    (2usize..=12).prop_flat_map(|n| (dist(n), dist(n)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn beta_agrees_with_references((p, q) in pair(), alpha in 0.0f64..=1.0) {
        let np = beta_np(&p, &q, alpha).unwrap();
        let (var, lam) = beta_variational(&p, &q, alpha).unwrap();
        prop_assert!((np.beta - var).abs() <= 1e-10);
        prop_assert!((np.beta - beta_lp_oracle(&p, &q, alpha).unwrap()).abs() <= 1e-8);
        prop_assert!(lam >= np.lambda_interval.0 - 1e-9 && lam <= np.lambda_interval.1 + 1e-9);
        prop_assert!((0.0..=1.0).contains(&np.beta));
        prop_assert!((np.test.accepted_mass(&p) - alpha).abs() <= 1e-10);
        prop_assert!((np.test.accepted_mass(&q) - np.beta).abs() <= 1e-10);
    }

    #[test]
    fn beta_is_monotone_in_alpha((p, q) in pair(), a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(beta_np(&p, &q, lo).unwrap().beta <= beta_np(&p, &q, hi).unwrap().beta + 1e-12);
        prop_assert!((beta_np(&p, &p, a).unwrap().beta - a).abs() <= 1e-12);
    }

    #[test]
    fn optimal_z_maximizes_gamma(w in channel(2..=5, 2..=5), seed in 0usize..1000, rate in 0.0f64..1.5) {
        let q = ProbVector64::uniform(w.nx());
        let r = RatePoint64::new(rate).unwrap();
        let (best, _) = max_over_z(&q, &w, &r).unwrap();
        let z: Vec<f64> = (0..w.ny()).map(|y| ((seed * 7919 + y * 104_729) % 1000) as f64 / 1000.0).collect();
        prop_assert!(gamma_eval(&q, &ZVector64::from_f64(&z).unwrap(), &w, &r).unwrap() <= best + 1e-12);
        let zs = optimal_z(&q, &w, &r);
        prop_assert!(check_saddle(&q, &zs, &w, &r, 1e-10).unwrap().z_condition_ok);
    }

    #[test]
    fn saddle_matches_max_min_lp(w in channel(2..=6, 2..=6), frac in 0.0f64..=1.0) {
        let r = RatePoint64::new(frac * (w.nx() as f64).ln()).unwrap();
        let (cert, trace) = solve_saddle(&w, &r, &TolerancePolicy64::default(), None).unwrap();
        let (reference, _) = maxmin_lp(&w, &r).unwrap();
        prop_assert!(cert.is_converged());
        prop_assert!((cert.epsilon - reference).abs() <= 1e-8, "{} vs {}", cert.epsilon, reference);
        prop_assert!(check_saddle(&cert.qx_star, &cert.z_star, &w, &r, 1e-8).unwrap().passed(1e-8));
        prop_assert!(trace.is_monotone(0.0));
        prop_assert!((0.0..=1.0).contains(&cert.epsilon));
    }

    #[test]
    fn grid_bounds_the_saddle_from_above(w in channel(2..=3, 2..=4), frac in 0.0f64..=1.0) {
        let r = RatePoint64::new(frac * (w.nx() as f64).ln()).unwrap();
        let (cert, _) = solve_saddle(&w, &r, &TolerancePolicy64::default(), None).unwrap();
        prop_assert!(grid_saddle_check(&w, &r, 12).unwrap() >= cert.epsilon - 1e-10);
    }

    #[test]
    fn bound_grows_with_rate(w in channel(2..=5, 2..=5), a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let tol = TolerancePolicy64::default();
        let scale = (w.nx() as f64).ln();
        let (c1, _) = solve_saddle(&w, &RatePoint64::new(lo * scale).unwrap(), &tol, None).unwrap();
        let (c2, _) = solve_saddle(&w, &RatePoint64::new(hi * scale).unwrap(), &tol, None).unwrap();
        prop_assert!(c1.epsilon <= c2.epsilon + 1e-8);
    }

    #[test]
    fn type_reduction_matches_product(w in channel(2..=2, 2..=3), n in 1usize..=3, frac in 0.0f64..=1.0) {
        let r = RatePoint64::new(frac * n as f64 * 2f64.ln()).unwrap();
        let tol = TolerancePolicy64::default();
        let d = solve_saddle_dmc(&w, n, &r, &tol).unwrap();
        let (e, _) = solve_saddle(&product_channel(&w, n).unwrap(), &r, &tol, None).unwrap();
        prop_assert!((d.certificate.epsilon - e.epsilon).abs() <= 1e-8, "{} vs {}", d.certificate.epsilon, e.epsilon);
    }

    #[test]
    fn channel_files_round_trip(w in channel(1..=4, 1..=4)) {
        // Rows are renormalized on load, which may move the last bit.
        let back: Channel64 = parse_channel(&write_channel(&w)).unwrap();
        prop_assert_eq!((back.nx(), back.ny()), (w.nx(), w.ny()));
        for (a, b) in back.rows().zip(w.rows()) {
            for (x, y) in a.iter().zip(b) {
                prop_assert!((x - y).abs() <= 1e-15);
            }
        }
    }
}

#[test]
fn single_precision_fixed_points() {
    let tol = mmconverse::TolerancePolicy::<f32>::default();
    let r = mmconverse::RatePoint::<f32>::new(std::f32::consts::LN_2).unwrap();
    let (c, _) = solve_saddle(&Channel::<f32>::bsc(0.3), &r, &tol, None).unwrap();
    assert!((c.epsilon - 0.3).abs() < 1e-5);
    let zc = Channel::<f32>::from_rows(&[[1.0, 0.0], [0.5, 0.5]]).unwrap();
    let (c, _) = solve_saddle(&zc, &r, &tol, None).unwrap();
    assert!((c.epsilon - 0.25).abs() < 1e-5);
}
