//! Small dense helpers on row-major slices; the hot loops avoid allocating matrices.

use nalgebra::DMatrix;

/// Euclidean norm of a vector, or Frobenius norm of a flattened matrix.
#[inline]
pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[inline]
pub(crate) fn norm_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>()
}

/// Euclidean distance between two vectors of equal length.
#[inline]
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// `out += scale * a ⊗ b`, with `out` row-major `a.len() × b.len()`.
#[inline]
pub(crate) fn outer_add(out: &mut [f64], a: &[f64], b: &[f64], scale: f64) {
    let m = b.len();
    for (i, ai) in a.iter().enumerate() {
        let s = scale * ai;
        let row = &mut out[i * m..(i + 1) * m];
        for (o, bj) in row.iter_mut().zip(b) {
            *o += s * bj;
        }
    }
}

/// Spectral norm (largest singular value).
pub fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.singular_values().max()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn outer_product_accumulates() {
        let mut out = vec![1.0; 4];
        outer_add(&mut out, &[1.0, 2.0], &[3.0, 4.0], 0.5);
        assert_eq!(out, vec![2.5, 3.0, 4.0, 5.0]);
    }

    #[test]
    fn norms() {
        assert_eq!(norm(&[3.0, 4.0]), 5.0);
        assert_eq!(dist(&[1.0, 1.0], &[4.0, 5.0]), 5.0);
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, -3.0]);
        assert!((spectral_norm(&a) - 3.0).abs() < 1e-12);
    }
}
