use proptest::prelude::*;

use rstab::noise::{sample_lift, NoiseSpec};
use rstab::rough::io::{read_binary, read_csv, write_lift_binary, write_lift_csv, PathData};
use rstab::rough::{
    lift_piecewise_linear, pvar_norm, pvar_power, qvar_area_power, rough_norm, GridPath, Window,
};
use rstab::stopping::{bound_nstar, check_nsum, greedy_times};

fn grid_path(dim: usize, max_len: usize) -> impl Strategy<Value = GridPath> {
    (2..=max_len).prop_flat_map(move |n| {
        prop::collection::vec(-3.0f64..3.0, n * dim)
            .prop_map(move |v| GridPath::uniform(0.0, 1.0 / (n - 1) as f64, v, dim).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pvar_power_is_superadditive(x in grid_path(2, 40), cut in 0.0f64..1.0, p in 1.0f64..3.5) {
        let n = x.len() - 1;
        let m = ((cut * n as f64) as usize).min(n);
        let whole = pvar_power(&x, p, x.full_window()).unwrap();
        let left = if m > 0 { pvar_power(&x, p, Window::new(0, m).unwrap()).unwrap() } else { 0.0 };
        let right = if m < n { pvar_power(&x, p, Window::new(m, n).unwrap()).unwrap() } else { 0.0 };
        prop_assert!(left + right <= whole * (1.0 + 1e-12) + 1e-12);
    }

    #[test]
    fn pvar_norm_bounds_increments_and_shrinks_in_p(x in grid_path(3, 30), p in 1.0f64..3.0) {
        let w = x.full_window();
        let norm = pvar_norm(&x, p, w).unwrap();
        let n = x.len() - 1;
        prop_assert!(x.increment_norm(0, n) <= norm * (1.0 + 1e-12) + 1e-12);
        prop_assert!(pvar_norm(&x, p + 0.5, w).unwrap() <= norm * (1.0 + 1e-12) + 1e-12);
    }

    #[test]
    fn pvar_norm_is_homogeneous(x in grid_path(2, 25), c in -4.0f64..4.0, p in 1.5f64..3.0) {
        let scaled: Vec<f64> = x.values().iter().map(|v| c * v).collect();
        let y = GridPath::new(x.times().to_vec(), scaled, x.dim()).unwrap();
        let a = pvar_norm(&x, p, x.full_window()).unwrap();
        let b = pvar_norm(&y, p, y.full_window()).unwrap();
        prop_assert!((b - c.abs() * a).abs() <= 1e-10 * (1.0 + b));
    }

    #[test]
    fn piecewise_linear_lift_satisfies_chen(x in grid_path(3, 30), seed in any::<u64>()) {
        let rp = lift_piecewise_linear(&x);
        prop_assert!(rp.chen_audit(200, seed) <= 1e-12);
    }

    #[test]
    fn area_is_superadditive_too(x in grid_path(2, 30), cut in 0.0f64..1.0) {
        let rp = lift_piecewise_linear(&x);
        let n = x.len() - 1;
        let m = ((cut * n as f64) as usize).clamp(1, n.max(1));
        prop_assume!(m < n);
        let q = 1.25;
        let whole = qvar_area_power(&rp, q, x.full_window()).unwrap();
        let parts = qvar_area_power(&rp, q, Window::new(0, m).unwrap()).unwrap()
            + qvar_area_power(&rp, q, Window::new(m, n).unwrap()).unwrap();
        prop_assert!(parts <= whole * (1.0 + 1e-12) + 1e-12);
    }

    #[test]
    fn lifts_survive_both_file_formats(x in grid_path(2, 20)) {
        let rp = lift_piecewise_linear(&x);
        let mut text = Vec::new();
        write_lift_csv(&mut text, &rp).unwrap();
        let mut bin = Vec::new();
        write_lift_binary(&mut bin, &rp).unwrap();
        for data in [read_csv(&text[..]).unwrap(), read_binary(&bin[..]).unwrap()] {
            match data {
                PathData::Lift(back) => prop_assert_eq!(&back, &rp),
                PathData::Path(_) => prop_assert!(false, "lift read back as a plain path"),
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn greedy_counts_respect_their_bounds(seed in any::<u64>(), hurst in 0.38f64..0.5, gamma in 0.3f64..1.5) {
        let p = 2.8;
        let rp = sample_lift(&NoiseSpec::fbm(hurst, 2, 1.0, 256, seed)).unwrap();
        let w = rp.path().full_window();
        let seq = greedy_times(&rp, p, gamma, w).unwrap();
        let n = seq.count() as f64;
        prop_assert!(n <= bound_nstar(&rp, p, gamma, w).unwrap());
        prop_assert!(gamma * n >= rough_norm(&rp, p, w).unwrap());
        for iv in seq.intervals().take(seq.count().saturating_sub(1)) {
            let norm = rough_norm(&rp, p, iv).unwrap();
            prop_assert!(norm >= gamma * (1.0 - 1e-12));
        }
        let last = w.end;
        prop_assert!(check_nsum(&rp, p, gamma, &[0, last / 4, last / 2, last]).unwrap().holds);
    }
}
