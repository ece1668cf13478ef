use rstab::experiments::{pitchfork_exact_path, pitchfork_model};
use rstab::flow::{doss_sussmann, small_lambda_windows, FlowParams, LAMBDA_MAX};
use rstab::noise::{sample_lift, NoiseSpec};
use rstab::schemes::simulate;

const ALPHA: f64 = 1.0;
const SIGMA: f64 = 0.2;

fn relative_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs() / y.abs().max(1e-12)).fold(0.0, f64::max)
}

#[test]
fn doss_sussmann_matches_the_closed_form() {
    let model = pitchfork_model(ALPHA, SIGMA, 2.0).unwrap();
    let params = FlowParams::new(2.5).unwrap();
    for seed in 0..5 {
        let rp = sample_lift(&NoiseSpec::fbm(0.45, 1, 1.0, 2048, seed)).unwrap();
        let exact = pitchfork_exact_path(ALPHA, SIGMA, rp.path(), 0.5).unwrap();
        // the windows leave gaps, so each one restarts from the exact state
        let (mut worst, mut covered) = (0.0f64, 0);
        for w in small_lambda_windows(&model, &rp, &params, LAMBDA_MAX).unwrap() {
            let ds = doss_sussmann(&model, &rp, w, &[exact[w.start]], &params).unwrap();
            worst = worst.max(relative_gap(ds.y.values(), &exact[w.start..=w.end]));
            covered += w.steps();
        }
        assert!(covered >= 1024, "seed {seed}: windows cover only {covered} steps");
        assert!(worst < 0.01, "seed {seed}: relative gap {worst:.2e}");
    }
}

#[test]
fn euler_scheme_approaches_the_closed_form_under_refinement() {
    let model = pitchfork_model(ALPHA, SIGMA, 2.0).unwrap();
    let fine = sample_lift(&NoiseSpec::fbm(0.45, 1, 1.0, 4096, 11)).unwrap();
    let exact = pitchfork_exact_path(ALPHA, SIGMA, fine.path(), 0.5).unwrap();
    let mut errors = Vec::new();
    for stride in [64, 16, 4] {
        let coarse = fine.coarsen(stride).unwrap();
        let run = simulate(&model, &coarse, &[0.5], None).unwrap();
        let err = (0..run.len())
            .map(|k| (run.state(k)[0] - exact[k * stride]).abs() / exact[k * stride].abs())
            .fold(0.0, f64::max);
        errors.push(err);
    }
    assert!(errors.windows(2).all(|e| e[1] < e[0]), "{errors:?}");
    assert!(errors[2] < 0.01, "{errors:?}");
}
