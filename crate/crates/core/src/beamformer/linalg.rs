//! Dense complex helpers for the small `D x D` per-bin systems.

use ndarray::{Array2, ArrayView2};
use num_complex::Complex64;

pub fn trace(m: ArrayView2<'_, Complex64>) -> Complex64 {
    m.diag().iter().fold(Complex64::new(0.0, 0.0), |acc, v| acc + v)
}

pub fn hermitian(m: ArrayView2<'_, Complex64>) -> Array2<Complex64> {
    m.t().mapv(|v| v.conj())
}

/// `(M + M^H) / 2`.
pub fn symmetrize(m: &mut Array2<Complex64>) {
    let h = hermitian(m.view());
    m.zip_mut_with(&h, |a, b| *a = (*a + b) * 0.5);
}

/// Induced 1-norm (max absolute column sum).
pub fn norm1(m: ArrayView2<'_, Complex64>) -> f64 {
    m.columns()
        .into_iter()
        .map(|c| c.iter().map(|v| v.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Gauss-Jordan inverse with partial pivoting. Returns `None` when a pivot
/// falls below `tol` times the largest entry of the input.
pub fn invert(m: ArrayView2<'_, Complex64>, tol: f64) -> Option<Array2<Complex64>> {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "matrix must be square");
    let scale = m.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if !(scale.is_finite() && scale > 0.0) {
        return None;
    }
    let mut a = m.to_owned();
    let mut inv = Array2::<Complex64>::eye(n);
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[[i, col]].norm().total_cmp(&a[[j, col]].norm()))
            .expect("non-empty range");
        if a[[pivot, col]].norm() <= tol * scale {
            return None;
        }
        if pivot != col {
            for k in 0..n {
                a.swap([pivot, k], [col, k]);
                inv.swap([pivot, k], [col, k]);
            }
        }
        let p = a[[col, col]];
        for k in 0..n {
            a[[col, k]] /= p;
            inv[[col, k]] /= p;
        }
        for row in 0..n {
            if row == col {
                continue;
            }
            let f = a[[row, col]];
            if f == Complex64::new(0.0, 0.0) {
                continue;
            }
            for k in 0..n {
                let (ack, ick) = (a[[col, k]], inv[[col, k]]);
                a[[row, k]] -= f * ack;
                inv[[row, k]] -= f * ick;
            }
        }
    }
    inv.iter().all(|v| v.re.is_finite() && v.im.is_finite()).then_some(inv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn inverse_times_matrix_is_identity() {
        let m = array![
            [c(4.0, 0.0), c(1.0, -2.0), c(0.5, 0.5)],
            [c(1.0, 2.0), c(3.0, 0.0), c(0.0, 1.0)],
            [c(0.5, -0.5), c(0.0, -1.0), c(2.0, 0.0)]
        ];
        let inv = invert(m.view(), 1e-14).unwrap();
        let prod = m.dot(&inv);
        for ((i, j), v) in prod.indexed_iter() {
            let expected = if i == j { 1.0 } else { 0.0 };
            assert!((v - c(expected, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn pivoting_handles_zero_leading_entry() {
        let m = array![[c(0.0, 0.0), c(1.0, 0.0)], [c(2.0, 0.0), c(0.0, 0.0)]];
        let inv = invert(m.view(), 1e-14).unwrap();
        assert_eq!(inv, array![[c(0.0, 0.0), c(0.5, 0.0)], [c(1.0, 0.0), c(0.0, 0.0)]]);
    }

    #[test]
    fn singular_detected() {
        let m = array![[c(1.0, 0.0), c(2.0, 0.0)], [c(2.0, 0.0), c(4.0, 0.0)]];
        assert!(invert(m.view(), 1e-12).is_none());
        assert!(invert(Array2::<Complex64>::zeros((2, 2)).view(), 1e-12).is_none());
    }

    #[test]
    fn symmetrize_and_trace() {
        let mut m = array![[c(1.0, 0.2), c(2.0, 1.0)], [c(0.0, 0.0), c(3.0, -0.2)]];
        symmetrize(&mut m);
        assert_eq!(m, hermitian(m.view()));
        assert_eq!(trace(m.view()), c(4.0, 0.0));
    }
}
