//! Exponential decay rate of the separation of two trajectories.

use super::report::DecayFit;
use crate::error::{Error, Result};
use crate::linalg::{dist, norm};
use crate::rough::GridPath;

const MIN_POINTS: usize = 10;

/// Least-squares slope of `log ‖y_t − a_t‖` against `t`, negated.
///
/// The fit uses the longest initial stretch on which the separation stays above
/// `100 ε (1 + ‖a_t‖)`; beyond that the difference is rounding noise.
pub fn fit_decay(y: &GridPath, a: &GridPath) -> Result<DecayFit> {
    if y.len() != a.len() || y.dim() != a.dim() {
        return Err(Error::domain("trajectories differ in shape"));
    }
    let same = y
        .times()
        .iter()
        .zip(a.times())
        .all(|(s, t)| (s - t).abs() <= 1e-9 * (1.0 + s.abs()));
    if !same {
        return Err(Error::domain("trajectories live on different grids"));
    }
    if dist(y.value(0), a.value(0)) == 0.0 {
        return Err(Error::domain("initial separation is zero"));
    }
    let mut ts = Vec::new();
    let mut ls = Vec::new();
    for k in 0..y.len() {
        let sep = dist(y.value(k), a.value(k));
        if !(sep > 100.0 * f64::EPSILON * (1.0 + norm(a.value(k)))) || !sep.is_finite() {
            break;
        }
        ts.push(y.time(k));
        ls.push(sep.ln());
    }
    let n = ts.len();
    if n < MIN_POINTS {
        return Ok(DecayFit {
            mu: f64::NAN,
            lo: f64::NAN,
            hi: f64::NAN,
            points: n,
            inconclusive: true,
        });
    }
    let nf = n as f64;
    let tm = ts.iter().sum::<f64>() / nf;
    let lm = ls.iter().sum::<f64>() / nf;
    let sxx: f64 = ts.iter().map(|t| (t - tm).powi(2)).sum();
    let sxy: f64 = ts.iter().zip(&ls).map(|(t, l)| (t - tm) * (l - lm)).sum();
    let slope = sxy / sxx;
    let rss: f64 = ts
        .iter()
        .zip(&ls)
        .map(|(t, l)| (l - lm - slope * (t - tm)).powi(2))
        .sum();
    let se = (rss / (nf - 2.0) / sxx).sqrt();
    let mu = -slope;
    Ok(DecayFit {
        mu,
        lo: mu - 1.96 * se,
        hi: mu + 1.96 * se,
        points: n,
        inconclusive: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform(values: Vec<f64>, step: f64) -> GridPath {
        GridPath::uniform(0.0, step, values, 1).unwrap()
    }

    #[test]
    fn exact_exponential() {
        let y = uniform((0..=200).map(|k| 3.0 * (-0.7 * k as f64 * 0.01).exp()).collect(), 0.01);
        let a = uniform(vec![0.0; 201], 0.01);
        let fit = fit_decay(&y, &a).unwrap();
        assert!((fit.mu - 0.7).abs() < 1e-12);
        assert!(fit.hi - fit.lo < 1e-9);
        assert_eq!(fit.points, 201);
    }

    #[test]
    fn underflow_truncates_the_fit() {
        let vals: Vec<f64> = (0..=100).map(|k| (-(k as f64)).exp()).collect();
        let fit = fit_decay(&uniform(vals, 1.0), &uniform(vec![0.0; 101], 1.0)).unwrap();
        // e^{-k} drops below 100ε ≈ 2.2e-14 after k = 31
        assert_eq!(fit.points, 32);
        assert!((fit.mu - 1.0).abs() < 1e-12);
        let quick: Vec<f64> = (0..=100).map(|k| (-8.0 * k as f64).exp()).collect();
        assert!(fit_decay(&uniform(quick, 1.0), &uniform(vec![0.0; 101], 1.0)).unwrap().inconclusive);
    }

    #[test]
    fn growth_gives_negative_rate_and_errors_are_reported() {
        let y = uniform((0..=50).map(|k| 1e-3 * (0.2 * k as f64).exp()).collect(), 1.0);
        let a = uniform(vec![0.0; 51], 1.0);
        assert!(fit_decay(&y, &a).unwrap().mu < 0.0);
        assert!(fit_decay(&a, &a).is_err());
        assert!(fit_decay(&y, &uniform(vec![0.0; 50], 1.0)).is_err());
    }
}
