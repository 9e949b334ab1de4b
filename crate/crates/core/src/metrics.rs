//! Power transfer efficiency, bistatic radar cross section and link-budget conversions.

use core::f64::consts::PI;

use crate::em::LinkGeometry;
use crate::error::{Error, Result};
use crate::linalg::CVector;
use crate::network::ImpedanceMatrix;

/// `η = |i_r|² Re z_r / (iᴴ Re Z i)` for the receiver port of `z`, with `Re z_r` taken from
/// the receiver termination (identical to the matrix entry unless `z` is a reduced network).
pub fn pte(z: &ImpedanceMatrix, currents: &CVector) -> Result<f64> {
    if currents.len() != z.port_count() {
        return Err(Error::DimensionMismatch {
            expected: z.port_count(),
            found: currents.len(),
        });
    }
    let r = z.receiver();
    let e = z.entries();
    let n = currents.len();
    let mut power = 0.0;
    for a in 0..n {
        let ia = currents[a];
        for b in 0..n {
            let rab = e[(a, b)].re;
            if rab != 0.0 {
                power += rab * (ia.conj() * currents[b]).re;
            }
        }
    }
    if !(power > 0.0) {
        return Err(Error::NonPositivePower(power));
    }
    Ok(currents[r].norm_sqr() * z.receiver_load().re / power)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    /// linear
    pub gain_tx: f64,
    /// linear
    pub gain_rx: f64,
    pub distance: f64,
    pub wavelength: f64,
}

impl LinkBudget {
    pub fn new(gain_tx: f64, gain_rx: f64, distance: f64, wavelength: f64) -> Result<Self> {
        for (name, v) in [
            ("gain_tx", gain_tx),
            ("gain_rx", gain_rx),
            ("distance", distance),
            ("wavelength", wavelength),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidBudget(alloc::format!("{name} = {v} must be positive")));
            }
        }
        Ok(Self {
            gain_tx,
            gain_rx,
            distance,
            wavelength,
        })
    }

    pub fn from_dbi(gain_tx_dbi: f64, gain_rx_dbi: f64, distance: f64, wavelength: f64) -> Result<Self> {
        Self::new(
            libm::pow(10.0, gain_tx_dbi / 10.0),
            libm::pow(10.0, gain_rx_dbi / 10.0),
            distance,
            wavelength,
        )
    }

    pub fn from_geometry(g: &LinkGeometry) -> Result<Self> {
        Self::from_dbi(g.gain_tx_dbi, g.gain_rx_dbi, g.distance, g.wavelength())
    }

    /// Free-space loss `(4πd/λ)²`.
    pub fn l_fs(&self) -> f64 {
        let x = 4.0 * PI * self.distance / self.wavelength;
        x * x
    }

    /// `σ / η = L_FS · 4πd² / (G_tx G_rx)`
    fn sigma_per_eta(&self) -> f64 {
        self.l_fs() * 4.0 * PI * self.distance * self.distance / (self.gain_tx * self.gain_rx)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Brcs {
    pub m2: f64,
    /// `-inf` when `m2 == 0`.
    pub dbsm: f64,
}

pub fn to_db(x: f64) -> f64 {
    if x == 0.0 {
        f64::NEG_INFINITY
    } else {
        10.0 * libm::log10(x)
    }
}

pub fn from_db(db: f64) -> f64 {
    libm::pow(10.0, db / 10.0)
}

/// `σ_B = η (4π)³ d⁴ / (G_tx G_rx λ²)`
pub fn brcs_from_pte(eta: f64, budget: &LinkBudget) -> Result<Brcs> {
    if !(eta.is_finite() && eta >= 0.0) {
        return Err(Error::InvalidEfficiency(eta));
    }
    let m2 = eta * budget.sigma_per_eta();
    Ok(Brcs { m2, dbsm: to_db(m2) })
}

/// Inverse of [`brcs_from_pte`].
pub fn pte_from_brcs(sigma_m2: f64, budget: &LinkBudget) -> f64 {
    sigma_m2 / budget.sigma_per_eta()
}

/// Broadside physical-optics RCS of a square conducting plate, `4πA²/λ²`, in dBsm.
pub fn flat_plate_rcs(side: f64, wavelength: f64) -> f64 {
    let area = side * side;
    to_db(4.0 * PI * area * area / (wavelength * wavelength))
}
