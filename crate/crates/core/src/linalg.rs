//! Jacobi-preconditioned conjugate gradients for symmetric positive definite
//! systems given only as a matrix-vector product.

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, Default)]
pub struct CgOutcome<T> {
    pub iterations: usize,
    /// Final `‖b - A x‖₂ / ‖b‖₂`.
    pub relative_residual: T,
}

pub(crate) fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (x, y)| acc + *x * *y)
}

pub(crate) fn norm2<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

/// Solves `A x = b` starting from `x`, overwriting it.
pub fn preconditioned_cg<T: Real>(
    apply: impl Fn(&[T]) -> Vec<T>,
    diagonal: &[T],
    b: &[T],
    x: &mut [T],
    rtol: T,
    max_iters: usize,
) -> Result<CgOutcome<T>> {
    let n = b.len();
    assert!(diagonal.len() == n && x.len() == n, "dimension mismatch");
    let bnorm = norm2(b);
    if bnorm == T::zero() {
        x.iter_mut().for_each(|v| *v = T::zero());
        return Ok(CgOutcome { iterations: 0, relative_residual: T::zero() });
    }
    let ax = apply(x);
    let mut r: Vec<T> = b.iter().zip(&ax).map(|(bi, ai)| *bi - *ai).collect();
    let mut z: Vec<T> = r.iter().zip(diagonal).map(|(ri, di)| *ri / *di).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for it in 0..=max_iters {
        let rel = norm2(&r) / bnorm;
        if rel <= rtol {
            return Ok(CgOutcome { iterations: it, relative_residual: rel });
        }
        if it == max_iters {
            return Err(Error::LinearSolver { iterations: it, residual: rel.as_f64() });
        }
        let ap = apply(&p);
        let pap = dot(&p, &ap);
        if !(pap > T::zero()) {
            return Err(Error::LinearSolver { iterations: it, residual: rel.as_f64() });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] = x[i] + alpha * p[i];
            r[i] = r[i] - alpha * ap[i];
        }
        for i in 0..n {
            z[i] = r[i] / diagonal[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    unreachable!()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_tridiagonal_system() {
        let n = 50;
        let apply = |x: &[f64]| {
            (0..n)
                .map(|i| {
                    let mut v = 3.0 * x[i];
                    if i > 0 {
                        v -= x[i - 1];
                    }
                    if i + 1 < n {
                        v -= x[i + 1];
                    }
                    v
                })
                .collect::<Vec<_>>()
        };
        let truth: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
        let b = apply(&truth);
        let mut x = vec![0.0; n];
        let out = preconditioned_cg(apply, &vec![3.0; n], &b, &mut x, 1e-13, 200).unwrap();
        assert!(out.relative_residual <= 1e-13);
        for (a, t) in x.iter().zip(&truth) {
            assert!((a - t).abs() < 1e-11);
        }
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let mut x = vec![1.0; 4];
        let out = preconditioned_cg(|v: &[f64]| v.to_vec(), &[1.0; 4], &[0.0; 4], &mut x, 1e-12, 10).unwrap();
        assert_eq!(out.iterations, 0);
        assert_eq!(x, vec![0.0; 4]);
    }

    #[test]
    fn reports_failure_when_budget_exhausted() {
        let apply = |x: &[f64]| x.iter().enumerate().map(|(i, v)| (1.0 + i as f64) * v).collect();
        let mut x = vec![0.0; 20];
        let err = preconditioned_cg(apply, &[1.0; 20], &[1.0; 20], &mut x, 1e-14, 2).unwrap_err();
        assert!(matches!(err, Error::LinearSolver { iterations: 2, .. }));
    }
}
