//! Coupling between the far-field endpoints (horns) and the surface.
//!
//! A horn is a polarization-matched point source whose effective length `h_e` is chosen
//! so that its gain over a matched resistance `R` is the configured value:
//! `G = η0 k² h_e² / (4π R)`. Two small radiators at distance `r` then couple as
//! `Z21 = jη0 k h1 h2 e^{-jkr} / (4π r)`.

use alloc::vec::Vec;
use core::f64::consts::PI;
use num_complex::Complex64;

use super::{db_to_linear, LinkGeometry, ETA0};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EndpointRole {
    Tx,
    Rx,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EndpointCoupling {
    /// One entry per surface element, in element order.
    pub surface: Vec<Complex64>,
    pub self_impedance: Complex64,
}

fn distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    libm::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2])
}

fn phasor(k: f64, r: f64) -> Complex64 {
    Complex64::new(libm::cos(k * r), -libm::sin(k * r)) / r
}

/// Effective length of a point source of the given gain and radiation resistance.
pub(crate) fn horn_effective_length(gain_dbi: f64, resistance: f64, k: f64) -> f64 {
    libm::sqrt(4.0 * PI * resistance * db_to_linear(gain_dbi) / (ETA0 * k * k))
}

/// Effective length of a center-fed dipole (half length `l`) toward a direction making
/// angle ψ with the wire, given `cos ψ`.
pub(crate) fn dipole_effective_length(half_length: f64, k: f64, cos_psi: f64) -> f64 {
    let sin_psi = libm::sqrt((1.0 - cos_psi * cos_psi).max(0.0));
    let kl = k * half_length;
    if sin_psi < 1e-12 {
        return 0.0;
    }
    2.0 * (libm::cos(kl * cos_psi) - libm::cos(kl)) / (k * libm::sin(kl) * sin_psi)
}

fn endpoint_angle(geometry: &LinkGeometry, role: EndpointRole) -> Result<f64> {
    let angle = match role {
        EndpointRole::Tx => geometry.beta_deg,
        EndpointRole::Rx => geometry.alpha_deg,
    };
    if !(angle.abs() < 90.0) {
        return Err(Error::EndpointOnSurface { angle_deg: angle });
    }
    Ok(angle)
}

/// Coupling of one endpoint to every surface element, including the element's image in
/// the conducting backing when present.
pub fn endpoint_coupling(geometry: &LinkGeometry, role: EndpointRole) -> Result<EndpointCoupling> {
    geometry.validate()?;
    let angle = endpoint_angle(geometry, role)?;
    let gain = match role {
        EndpointRole::Tx => geometry.gain_tx_dbi,
        EndpointRole::Rx => geometry.gain_rx_dbi,
    };
    let k = geometry.wavenumber();
    let he = horn_effective_length(gain, geometry.endpoint_resistance, k);
    let p = geometry.endpoint_position(angle);
    let half = 0.5 * geometry.element_length;
    let scale = Complex64::new(0.0, ETA0 * k * he / (4.0 * PI));

    let surface = (0..geometry.element_count())
        .map(|n| {
            let c = geometry.element_center(n);
            let r1 = distance(p, c);
            let mut sum = phasor(k, r1) * dipole_effective_length(half, k, (p[1] - c[1]) / r1);
            if let Some(hg) = geometry.ground_plane_offset {
                let img = [c[0], c[1], c[2] - 2.0 * hg];
                let r2 = distance(p, img);
                sum -= phasor(k, r2) * dipole_effective_length(half, k, (p[1] - img[1]) / r2);
            }
            scale * sum
        })
        .collect();

    Ok(EndpointCoupling {
        surface,
        self_impedance: Complex64::new(geometry.endpoint_resistance, 0.0),
    })
}

fn sinc(u: f64) -> f64 {
    if u.abs() < 1e-8 {
        1.0 - u * u / 6.0
    } else {
        libm::sin(u) / u
    }
}

/// Transmitter-to-receiver coupling through specular reflection off the finite conducting
/// backing (physical optics, rectangular plate of the surface's extent). Zero without a
/// backing plane. The direct horn-to-horn path is not modeled.
pub fn plate_coupling(geometry: &LinkGeometry) -> Result<Complex64> {
    geometry.validate()?;
    let beta = endpoint_angle(geometry, EndpointRole::Tx)?;
    let alpha = endpoint_angle(geometry, EndpointRole::Rx)?;
    let Some(hg) = geometry.ground_plane_offset else {
        return Ok(Complex64::new(0.0, 0.0));
    };
    let k = geometry.wavenumber();
    let lambda = geometry.wavelength();
    let ht = horn_effective_length(geometry.gain_tx_dbi, geometry.endpoint_resistance, k);
    let hr = horn_effective_length(geometry.gain_rx_dbi, geometry.endpoint_resistance, k);
    let (a, b) = geometry.surface_extent();
    let origin = [0.0, 0.0, -hg];
    let pt = geometry.endpoint_position(beta);
    let pr = geometry.endpoint_position(alpha);
    let rt = distance(pt, origin);
    let rr = distance(pr, origin);
    let t = [(pt[0] - origin[0]) / rt, (pt[1] - origin[1]) / rt, (pt[2] - origin[2]) / rt];
    let r = [(pr[0] - origin[0]) / rr, (pr[1] - origin[1]) / rr];
    let ux = 0.5 * k * a * (t[0] + r[0]);
    let uy = 0.5 * k * b * (t[1] + r[1]);
    let amplitude = ETA0 * k * ht * hr * a * b * t[2] * sinc(ux) * sinc(uy)
        / (4.0 * PI * lambda * rt * rr);
    Ok(Complex64::new(libm::cos(k * (rt + rr)), -libm::sin(k * (rt + rr))) * amplitude)
}
