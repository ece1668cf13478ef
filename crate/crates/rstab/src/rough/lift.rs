//! Level-2 lifts of grid paths.
//!
//! Both lifts assign an area increment to each fine step and aggregate with Chen's relation
//!
//! ```text
//! A_{k+1} = A_k + x_{0,k} ⊗ x_{k,k+1} + a_k
//! ```
//!
//! with `a_k = ½ x_{k,k+1}⊗x_{k,k+1}` (piecewise linear, geometric) or
//! `a_k = ½ (x_{k,k+1}⊗x_{k,k+1} − Δ·Id)` (Itô).

use super::path::{GridPath, RoughPathGrid};
use crate::linalg::outer_add;

fn step_areas(path: &GridPath, ito_shift: f64) -> Vec<f64> {
    let m = path.dim();
    let n = path.len();
    let mut out = vec![0.0; (n - 1) * m * m];
    let mut dx = vec![0.0; m];
    for k in 0..n - 1 {
        path.increment_into(k, k + 1, &mut dx);
        let a = &mut out[k * m * m..(k + 1) * m * m];
        outer_add(a, &dx, &dx, 0.5);
        if ito_shift != 0.0 {
            for i in 0..m {
                a[i * m + i] -= 0.5 * ito_shift;
            }
        }
    }
    out
}

/// Geometric lift of the piecewise-linear interpolation.
pub fn lift_piecewise_linear(path: &GridPath) -> RoughPathGrid {
    let areas = step_areas(path, 0.0);
    RoughPathGrid::from_step_areas(path.clone(), &areas)
        .expect("step areas are consistent with the path")
}

/// Itô lift: the geometric area compensated by `½ Δ·Id` per step.
pub fn lift_ito(path: &GridPath) -> RoughPathGrid {
    let areas = step_areas(path, path.step());
    RoughPathGrid::from_step_areas(path.clone(), &areas)
        .expect("step areas are consistent with the path")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn straight_line_area() {
        let v = [1.0, -2.0];
        let vals: Vec<f64> = (0..9).flat_map(|k| [v[0] * k as f64 * 0.25, v[1] * k as f64 * 0.25]).collect();
        let p = GridPath::uniform(0.0, 0.25, vals, 2).unwrap();
        let rp = lift_piecewise_linear(&p);
        for (s, t) in [(0, 8), (2, 5), (3, 4)] {
            let x = rp.chen_reconstruct(s, t).unwrap();
            let h = (t - s) as f64 * 0.25;
            for a in 0..2 {
                for b in 0..2 {
                    let want = 0.5 * h * h * v[a] * v[b];
                    assert!((x[(a, b)] - want).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn zero_path_zero_area() {
        let p = GridPath::uniform(0.0, 1.0, vec![0.0; 12], 3).unwrap();
        let rp = lift_piecewise_linear(&p);
        assert!(rp.anchored_areas().iter().all(|&a| a == 0.0));
    }

    #[test]
    fn two_segments_by_hand() {
        let p = GridPath::uniform(0.0, 1.0, vec![0.0, 0.0, 1.0, 0.0, 1.0, 2.0], 2).unwrap();
        let rp = lift_piecewise_linear(&p);
        // a_0 = ½ e1⊗e1, a_1 = ½ (2 e2)⊗(2 e2), cross = e1 ⊗ 2e2
        let want = [0.5, 2.0, 0.0, 2.0];
        assert_eq!(rp.anchored_area(2), &want);
    }

    #[test]
    fn ito_and_geometric_differ_by_half_t() {
        let p = GridPath::uniform(0.0, 0.5, vec![0.0, 0.3, -0.2, 0.9, 1.1], 1).unwrap();
        let g = lift_piecewise_linear(&p);
        let i = lift_ito(&p);
        let d = g.anchored_area(4)[0] - i.anchored_area(4)[0];
        assert!((d - 0.5 * 2.0).abs() < 1e-14);
        // geometric diagonal equals ½ x²
        assert!((g.anchored_area(4)[0] - 0.5 * 1.1 * 1.1).abs() < 1e-14);
    }
}
