//! Small dense complex-matrix helpers shared by the operator modules.

use ndarray::Array2;
use num_complex::Complex64;

pub type CMat = Array2<Complex64>;

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (m, n) = a.dim();
    let (p, q) = b.dim();
    let mut out: CMat = Array2::zeros((m * p, n * q));
    for i in 0..m {
        for j in 0..n {
            let aij = a[[i, j]];
            if aij == Complex64::new(0.0, 0.0) {
                continue;
            }
            for r in 0..p {
                for c in 0..q {
                    out[[i * p + r, j * q + c]] = aij * b[[r, c]];
                }
            }
        }
    }
    out
}

pub fn identity(n: usize) -> CMat {
    Array2::eye(n)
}

/// Largest entry magnitude; non-finite entries poison the result to
/// infinity so that residual checks fail loudly instead of skipping NaNs.
pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, |acc, x| {
        if x.is_nan() {
            f64::INFINITY
        } else {
            acc.max(x)
        }
    })
}

pub fn fro_norm(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kron_shapes_and_values() {
        let a = ndarray::array![
            [Complex64::new(1.0, 0.0), Complex64::new(2.0, 0.0)],
            [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)]
        ];
        let b = identity(2);
        let k = kron(&a, &b);
        assert_eq!(k.dim(), (4, 4));
        assert_eq!(k[[0, 2]], Complex64::new(2.0, 0.0));
        assert_eq!(k[[1, 3]], Complex64::new(2.0, 0.0));
        assert_eq!(k[[2, 0]], Complex64::new(0.0, 0.0));
    }
}
