use num_complex::Complex64;

use super::reduce::inverse_with_condition;
use crate::error::{Error, Result};
use crate::linalg::CMatrix;

fn check_square(m: &CMatrix) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(m.nrows())
}

/// `Z = z_ref (I + S)(I - S)⁻¹` for a common real reference impedance.
pub fn s_to_z(s: &CMatrix, z_ref: f64) -> Result<CMatrix> {
    let n = check_square(s)?;
    let eye = CMatrix::identity(n, n);
    let inv = inverse_with_condition(&(&eye - s)).map_err(|_| Error::PerfectReflection)?;
    Ok((&eye + s) * inv * Complex64::new(z_ref, 0.0))
}

/// `S = (Z - z_ref I)(Z + z_ref I)⁻¹`
pub fn z_to_s(z: &CMatrix, z_ref: f64) -> Result<CMatrix> {
    let n = check_square(z)?;
    let shift = CMatrix::identity(n, n) * Complex64::new(z_ref, 0.0);
    let inv = inverse_with_condition(&(z + &shift)).map_err(|_| Error::Singular("Z + z_ref I"))?;
    Ok((z - shift) * inv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn matched_network_is_reference_impedance() {
        let z = s_to_z(&CMatrix::zeros(3, 3), 50.0).unwrap();
        assert_eq!(z, CMatrix::identity(3, 3) * Complex64::new(50.0, 0.0));
    }

    #[test]
    fn short_and_open_one_ports() {
        let short = CMatrix::from_element(1, 1, Complex64::new(-1.0, 0.0));
        assert_eq!(s_to_z(&short, 50.0).unwrap()[(0, 0)], Complex64::new(0.0, 0.0));
        let open = CMatrix::from_element(1, 1, Complex64::new(1.0, 0.0));
        assert_eq!(s_to_z(&open, 50.0), Err(Error::PerfectReflection));
    }

    #[test]
    fn round_trip_random_passive() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [1, 2, 5, 17] {
            let a = CMatrix::from_fn(n, n, |_, _| {
                Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            });
            let sym = &a + a.transpose();
            let norm = sym.clone().singular_values().max();
            let s = sym / Complex64::new(norm / 0.9, 0.0);
            let back = z_to_s(&s_to_z(&s, 50.0).unwrap(), 50.0).unwrap();
            assert!((back - &s).camax() < 1e-10);
        }
    }
}
