//! Induced-EMF impedances of thin, center-fed dipoles with sinusoidal current.
//!
//! All values are referred to the feed terminals. For two parallel dipoles with half
//! lengths `l1`, `l2`, lateral axis separation `ρ` and axial center offset `h`:
//!
//! ```text
//! Z21 = jη0 / (4π sin kl1 sin kl2) ∫_{-l2}^{l2} sin k(l2-|s|)
//!         [ e^{-jkR1}/R1 + e^{-jkR2}/R2 - 2 cos kl1 · e^{-jkR0}/R0 ] ds
//! ```
//!
//! with `R1, R2, R0` the distances from `(ρ, h+s)` to the top end, bottom end and center of
//! dipole 1. Self impedance is the same integral evaluated at `ρ = a`.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;
use num_complex::Complex64;

use super::ETA0;
use crate::error::{Error, Result};
use crate::quadrature::{integrate, QuadratureOptions};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DipoleElement {
    pub center: [f64; 3],
    pub length: f64,
    pub radius: f64,
    /// Unit vector along the wire.
    pub axis: [f64; 3],
}

impl DipoleElement {
    pub fn new(center: [f64; 3], length: f64, radius: f64, axis: [f64; 3]) -> Self {
        Self {
            center,
            length,
            radius,
            axis,
        }
    }

    pub fn validate(&self, wavelength: f64) -> Result<()> {
        if !(self.length > 0.0 && self.length < wavelength) {
            return Err(Error::InvalidElement(format!(
                "length {} m outside (0, λ = {} m)",
                self.length, wavelength
            )));
        }
        if !(self.radius > 0.0 && self.radius < 0.1 * self.length) {
            return Err(Error::InvalidElement(format!(
                "radius {} m is not thin relative to length {} m",
                self.radius, self.length
            )));
        }
        let n = dot(self.axis, self.axis);
        if !((n - 1.0).abs() < 1e-9) {
            return Err(Error::InvalidElement(format!("axis is not a unit vector (|a|² = {n})")));
        }
        if !self.center.iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidElement("non-finite center".into()));
        }
        Ok(())
    }
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Input impedance of an isolated dipole.
pub fn dipole_self_impedance(element: &DipoleElement, wavelength: f64) -> Result<Complex64> {
    element.validate(wavelength)?;
    parallel_impedance(
        element.radius,
        0.0,
        element.length,
        element.length,
        element.radius,
        element.radius,
        wavelength,
    )
}

/// Mutual impedance between two parallel (or anti-parallel) dipoles.
pub fn dipole_mutual_impedance(
    a: &DipoleElement,
    b: &DipoleElement,
    wavelength: f64,
) -> Result<Complex64> {
    a.validate(wavelength)?;
    b.validate(wavelength)?;
    let c = dot(a.axis, b.axis);
    if (c.abs() - 1.0).abs() > 1e-9 {
        return Err(Error::NonParallelElements);
    }
    let d = [
        b.center[0] - a.center[0],
        b.center[1] - a.center[1],
        b.center[2] - a.center[2],
    ];
    let h = dot(d, a.axis);
    let lateral = [d[0] - h * a.axis[0], d[1] - h * a.axis[1], d[2] - h * a.axis[2]];
    let rho = libm::sqrt(dot(lateral, lateral));
    let z = parallel_impedance(rho, h, a.length, b.length, a.radius, b.radius, wavelength)?;
    // reversing one wire flips the port polarity
    Ok(if c < 0.0 { -z } else { z })
}

/// Core routine on canonical coordinates. Symmetric in the two elements bit for bit:
/// the pair is reordered by (length, radius) and the axial offset enters as `|h|`.
pub(crate) fn parallel_impedance(
    rho: f64,
    h: f64,
    length_1: f64,
    length_2: f64,
    radius_1: f64,
    radius_2: f64,
    wavelength: f64,
) -> Result<Complex64> {
    let ((l1, a1), (l2, a2)) = if (length_1, radius_1) <= (length_2, radius_2) {
        ((length_1, radius_1), (length_2, radius_2))
    } else {
        ((length_2, radius_2), (length_1, radius_1))
    };
    let h = h.abs();
    let same_wire = rho == a1 && h == 0.0 && l1 == l2 && a1 == a2;
    if !same_wire && rho < a1 + a2 && h < 0.5 * (l1 + l2) {
        return Err(Error::OverlappingElements {
            separation: libm::hypot(rho, h),
            radii: a1 + a2,
        });
    }
    // thin-wire reduced kernel: distances measured from the wire surface
    let rho_eff = if same_wire {
        rho
    } else {
        libm::sqrt(rho * rho + a1 * a2)
    };
    induced_emf(rho_eff, h, 0.5 * l1, 0.5 * l2, wavelength)
}

fn induced_emf(rho: f64, h: f64, l1: f64, l2: f64, wavelength: f64) -> Result<Complex64> {
    let k = 2.0 * PI / wavelength;
    let s1 = libm::sin(k * l1);
    let s2 = libm::sin(k * l2);
    let cos1 = libm::cos(k * l1);
    let rho2 = rho * rho;

    let spherical = |z: f64| -> Complex64 {
        let r = libm::sqrt(rho2 + z * z);
        let kr = k * r;
        Complex64::new(libm::cos(kr), -libm::sin(kr)) / r
    };
    let integrand = |s: f64| -> Complex64 {
        let z = h + s;
        let kernel = spherical(z - l1) + spherical(z + l1) - spherical(z) * (2.0 * cos1);
        kernel * libm::sin(k * (l2 - s.abs()))
    };

    let mut points: Vec<f64> = Vec::with_capacity(6);
    points.push(-l2);
    for p in [0.0, -h, l1 - h, -l1 - h] {
        if p > -l2 && p < l2 {
            points.push(p);
        }
    }
    points.push(l2);
    points.sort_by(f64::total_cmp);
    points.dedup();

    let q = integrate(
        integrand,
        &points,
        &QuadratureOptions::default(),
        "induced-EMF integral",
    )?;
    let prefactor = Complex64::new(0.0, ETA0 / (4.0 * PI * s1 * s2));
    let z = q.value * prefactor;
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::NonFiniteIntegrand {
            at: l1,
            context: "sinusoidal current profile vanishes at the feed",
        });
    }
    Ok(z)
}

#[cfg(test)]
mod tests {
    use super::*;

    const LAMBDA: f64 = 1.0;

    fn y_dipole(center: [f64; 3], length: f64, radius: f64) -> DipoleElement {
        DipoleElement::new(center, length, radius, [0.0, 1.0, 0.0])
    }

    fn close(z: Complex64, re: f64, im: f64, rel: f64) -> bool {
        let want = Complex64::new(re, im);
        (z - want).norm() <= rel * want.norm()
    }

    // Reference values below come from scipy `quad` (epsrel 1e-12) of the same integrals.

    #[test]
    fn half_wave_self_impedance() {
        let z = dipole_self_impedance(&y_dipole([0.0; 3], 0.5, 1e-4), LAMBDA).unwrap();
        assert!(close(z, 73.079_004_368_005_57, 42.477_443_558_922_03, 1e-7), "{z}");
        // classical closed form for the same wire agrees on the resistance
        assert!((z.re - 73.079_010_285_671_39).abs() < 1e-4);
    }

    #[test]
    fn doubling_radius_keeps_resistance_moves_reactance() {
        let thin = dipole_self_impedance(&y_dipole([0.0; 3], 0.5, 1e-4), LAMBDA).unwrap();
        let thick = dipole_self_impedance(&y_dipole([0.0; 3], 0.5, 2e-4), LAMBDA).unwrap();
        assert!(close(thick, 73.078_986_615_009_68, 42.439_776_184_293_65, 1e-7), "{thick}");
        assert!((thin.re - thick.re).abs() < 0.1);
        assert!((thin.im - thick.im).abs() > 0.01);
    }

    #[test]
    fn shortened_dipole_self_impedance() {
        let z = dipole_self_impedance(&y_dipole([0.0; 3], 0.45, 1e-4), LAMBDA).unwrap();
        assert!(close(z, 54.291_828_043_834_656, -94.465_841_468_778_73, 1e-7), "{z}");
    }

    #[test]
    fn side_by_side_mutual_impedance() {
        let a = y_dipole([0.0; 3], 0.5, 1e-4);
        let b = y_dipole([0.5, 0.0, 0.0], 0.5, 1e-4);
        let z = dipole_mutual_impedance(&a, &b, LAMBDA).unwrap();
        assert!(close(z, -12.523_407_452_487_98, -29.907_935_934_661_545, 1e-6), "{z}");
        let c = y_dipole([0.25, 0.0, 0.0], 0.5, 1e-4);
        let z = dipole_mutual_impedance(&a, &c, LAMBDA).unwrap();
        assert!(close(z, 40.757_504_047_532_73, -28.329_440_056_277_964, 1e-6), "{z}");
    }

    #[test]
    fn echelon_and_collinear_mutual_impedance() {
        let a = y_dipole([0.0; 3], 0.45, 1e-4);
        let b = y_dipole([0.3, 0.6, 0.0], 0.45, 1e-4);
        let z = dipole_mutual_impedance(&a, &b, LAMBDA).unwrap();
        assert!(close(z, -0.322_398_933_560_169_35, -8.186_042_277_748_022, 1e-6), "{z}");
        // collinear: reduced kernel puts the axis offset at sqrt(a1·a2) = a
        let c = y_dipole([0.0, 0.5, 0.0], 0.45, 1e-4);
        let z = dipole_mutual_impedance(&a, &c, LAMBDA).unwrap();
        assert!(close(z, 18.972_826_957_382_015, 5.585_010_937_034_69, 1e-6), "{z}");
    }

    #[test]
    fn far_separation_approaches_point_source_coupling() {
        let a = y_dipole([0.0; 3], 0.5, 1e-4);
        let k = 2.0 * PI;
        let mut previous = f64::INFINITY;
        for r in [10.0, 50.0, 200.0] {
            let b = y_dipole([r, 0.0, 0.0], 0.5, 1e-4);
            let z = dipole_mutual_impedance(&a, &b, LAMBDA).unwrap();
            let he = 1.0 / PI; // λ/π for a half-wave dipole
            let ff = Complex64::new(0.0, ETA0 * k * he * he / (4.0 * PI * r))
                * Complex64::new(0.0, -k * r).exp();
            // near-field terms fall off as 1/(kr) relative to the radiation term
            assert!((z - ff).norm() < 2.0 / (k * r) * ff.norm(), "r={r}: {z} vs {ff}");
            assert!(z.norm() < previous);
            previous = z.norm();
        }
    }

    #[test]
    fn vanishing_length_gives_vanishing_resistance() {
        let mut previous = f64::INFINITY;
        for (len, want) in [(0.1, 1.998_85), (0.01, 0.019_728_1), (0.001, 1.972_56e-4)] {
            let z = dipole_self_impedance(&y_dipole([0.0; 3], len, len * 1e-3), LAMBDA).unwrap();
            assert!(z.re > 0.0);
            assert!((z.re - want).abs() < 1e-4 * want, "L={len}: {}", z.re);
            assert!(z.re < previous);
            previous = z.re;
        }
    }

    #[test]
    fn swapping_elements_is_bit_identical() {
        let a = y_dipole([0.1, -0.2, 0.0], 0.45, 1e-3);
        let b = y_dipole([0.6, 0.4, 0.0], 0.4, 2e-3);
        let ab = dipole_mutual_impedance(&a, &b, LAMBDA).unwrap();
        let ba = dipole_mutual_impedance(&b, &a, LAMBDA).unwrap();
        assert_eq!(ab, ba);
    }

    #[test]
    fn reversed_wire_flips_sign() {
        let a = y_dipole([0.0; 3], 0.5, 1e-4);
        let b = y_dipole([0.5, 0.0, 0.0], 0.5, 1e-4);
        let mut b_rev = b;
        b_rev.axis = [0.0, -1.0, 0.0];
        let z = dipole_mutual_impedance(&a, &b, LAMBDA).unwrap();
        assert_eq!(dipole_mutual_impedance(&a, &b_rev, LAMBDA).unwrap(), -z);
    }

    #[test]
    fn invalid_configurations_are_rejected() {
        let a = y_dipole([0.0; 3], 0.5, 1e-3);
        let touching = y_dipole([1.5e-3, 0.0, 0.0], 0.5, 1e-3);
        assert!(matches!(
            dipole_mutual_impedance(&a, &touching, LAMBDA),
            Err(Error::OverlappingElements { .. })
        ));
        let crossed = DipoleElement::new([1.0, 0.0, 0.0], 0.5, 1e-3, [1.0, 0.0, 0.0]);
        assert_eq!(
            dipole_mutual_impedance(&a, &crossed, LAMBDA),
            Err(Error::NonParallelElements)
        );
        for len in [1.0, 1.5, 0.0] {
            assert!(matches!(
                dipole_self_impedance(&y_dipole([0.0; 3], len, 1e-4), LAMBDA),
                Err(Error::InvalidElement(_))
            ));
        }
    }
}
