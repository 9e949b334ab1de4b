//! Small dense linear-algebra helpers shared by the network and optimization code.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;
pub type RMatrix = DMatrix<f64>;
pub type RVector = DVector<f64>;

pub fn real_part(z: &CMatrix) -> RMatrix {
    z.map(|v| v.re)
}

pub fn imag_part(z: &CMatrix) -> RMatrix {
    z.map(|v| v.im)
}

/// Symmetric part `(A + Aᵀ) / 2` of a real matrix.
pub fn sym(a: &RMatrix) -> RMatrix {
    (a + a.transpose()) * 0.5
}

/// Smallest eigenvalue of a real symmetric matrix (only the lower triangle is read).
pub fn min_symmetric_eigenvalue(a: &RMatrix) -> f64 {
    if a.nrows() == 0 {
        return 0.0;
    }
    a.symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// `max |Z_ij - Z_ji| / max |Z_ij|`, zero for the empty or zero matrix.
pub fn relative_asymmetry(z: &CMatrix) -> f64 {
    let n = z.nrows();
    let mut scale = 0.0_f64;
    let mut diff = 0.0_f64;
    for i in 0..n {
        for j in 0..n {
            scale = scale.max(z[(i, j)].norm());
            if j > i {
                diff = diff.max((z[(i, j)] - z[(j, i)]).norm());
            }
        }
    }
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

/// Exactly symmetric copy: `(Z + Zᵀ)/2`. Leaves an already symmetric matrix bit-identical.
pub fn symmetrize(z: &CMatrix) -> CMatrix {
    let n = z.nrows();
    let mut out = z.clone();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = (z[(i, j)] + z[(j, i)]) * 0.5;
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

/// 2-norm condition number estimate from singular values.
pub fn condition_number(z: &CMatrix) -> f64 {
    if z.nrows() == 0 {
        return 1.0;
    }
    let sv = z.clone().singular_values();
    let max = sv.iter().copied().fold(0.0_f64, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Solves `A x = b` by LU with partial pivoting; `None` if `A` is numerically singular.
pub fn solve_complex(a: CMatrix, b: &CVector) -> Option<CVector> {
    let lu = a.lu();
    let x = lu.solve(b)?;
    if x.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
        Some(x)
    } else {
        None
    }
}

pub fn try_inverse_complex(a: CMatrix) -> Option<CMatrix> {
    let inv = a.try_inverse()?;
    if inv.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
        Some(inv)
    } else {
        None
    }
}

pub fn frobenius(a: &RMatrix) -> f64 {
    libm::sqrt(a.iter().map(|v| v * v).sum())
}

pub fn norm2(v: &[f64]) -> f64 {
    libm::sqrt(v.iter().map(|x| x * x).sum())
}

pub fn cnorm2(v: &[Complex64]) -> f64 {
    libm::sqrt(v.iter().map(|x| x.norm_sqr()).sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetrize_keeps_symmetric_matrix_bit_identical() {
        let z = CMatrix::from_fn(4, 4, |i, j| {
            Complex64::new((i + j) as f64 * 0.1, ((i * j) as f64).sin())
        });
        assert_eq!(symmetrize(&z), z);
        assert_eq!(relative_asymmetry(&z), 0.0);
    }

    #[test]
    fn min_eigenvalue_of_diagonal() {
        let a = RMatrix::from_diagonal(&RVector::from_vec(vec![3.0, -1.5, 2.0]));
        assert!((min_symmetric_eigenvalue(&a) + 1.5).abs() < 1e-14);
    }

    #[test]
    fn singular_system_is_rejected() {
        let a = CMatrix::from_element(2, 2, Complex64::new(1.0, 0.0));
        let b = CVector::from_element(2, Complex64::new(1.0, 0.0));
        assert!(solve_complex(a, &b).is_none());
    }
}
