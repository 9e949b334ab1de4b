//! Analytic impedance model of the transmitter–surface–receiver link.
//!
//! The surface is a `grid_nx × grid_ny` array of thin, center-fed dipoles in the plane
//! `z = 0`, all oriented along `y`, optionally backed by a perfectly conducting plane at
//! `z = -ground_plane_offset`. Transmitter and receiver are far-field point sources in the
//! `x–z` plane at angles `beta` and `alpha` off broadside.
//!
//! Port ordering of every synthesized matrix is `[tx, surface 0..N, rx]`; surface element
//! `iy * grid_nx + ix` sits at `x = (ix - (nx-1)/2)·spacing`, `y = (iy - (ny-1)/2)·spacing`.

mod assembly;
mod dipole;
mod endpoint;

use alloc::format;
use alloc::vec::Vec;

pub use assembly::{
    apply_ground_plane, assemble_link, build_impedance_matrix, free_space_impedance,
    surface_impedance,
    SynthesizedLink,
};
pub use dipole::{dipole_mutual_impedance, dipole_self_impedance, DipoleElement};
pub use endpoint::{endpoint_coupling, plate_coupling, EndpointCoupling, EndpointRole};

use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const C0: f64 = 299_792_458.0;
/// Free-space wave impedance, ohm.
pub const ETA0: f64 = 376.730_313_668;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct LinkGeometry {
    /// Hz
    pub frequency: f64,
    pub grid_nx: usize,
    pub grid_ny: usize,
    /// Element pitch, m.
    pub spacing: f64,
    pub element_length: f64,
    pub element_radius: f64,
    /// Distance from the element plane to the conducting backing, m. `None` means free space.
    pub ground_plane_offset: Option<f64>,
    /// Transmitter angle off broadside, degrees.
    pub beta_deg: f64,
    /// Receiver angle off broadside, degrees.
    pub alpha_deg: f64,
    /// Endpoint distance from the surface center, m.
    pub distance: f64,
    pub gain_tx_dbi: f64,
    pub gain_rx_dbi: f64,
    /// Matched endpoint resistance, ohm.
    pub endpoint_resistance: f64,
}

impl Default for LinkGeometry {
    fn default() -> Self {
        Self::standard()
    }
}

impl LinkGeometry {
    /// 10×10 dipoles at half-wavelength pitch, 3.75 GHz, quarter-wave backing, 16 dBi horns
    /// at the far-field distance `2D²/λ`, transmitter at -10°.
    pub fn standard() -> Self {
        let frequency = 3.75e9;
        let wavelength = C0 / frequency;
        let mut g = Self {
            frequency,
            grid_nx: 10,
            grid_ny: 10,
            spacing: 0.5 * wavelength,
            element_length: 0.45 * wavelength,
            element_radius: 0.005 * wavelength,
            ground_plane_offset: Some(0.25 * wavelength),
            beta_deg: -10.0,
            alpha_deg: 10.0,
            distance: 0.0,
            gain_tx_dbi: 16.0,
            gain_rx_dbi: 16.0,
            endpoint_resistance: 50.0,
        };
        g.distance = g.far_field_distance();
        g
    }

    pub fn wavelength(&self) -> f64 {
        C0 / self.frequency
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * core::f64::consts::PI / self.wavelength()
    }

    pub fn element_count(&self) -> usize {
        self.grid_nx * self.grid_ny
    }

    /// Physical extent of the surface, `(nx·spacing, ny·spacing)`.
    pub fn surface_extent(&self) -> (f64, f64) {
        (
            self.grid_nx as f64 * self.spacing,
            self.grid_ny as f64 * self.spacing,
        )
    }

    pub fn diagonal(&self) -> f64 {
        let (a, b) = self.surface_extent();
        libm::hypot(a, b)
    }

    /// `2D²/λ`
    pub fn far_field_distance(&self) -> f64 {
        let d = self.diagonal();
        2.0 * d * d / self.wavelength()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: alloc::string::String| Err(Error::InvalidGeometry(msg));
        if !(self.frequency.is_finite() && self.frequency > 0.0) {
            return bad(format!("frequency must be positive, got {}", self.frequency));
        }
        if self.grid_nx * self.grid_ny == 0 {
            return bad(format!(
                "grid must hold at least one element, got {}x{}",
                self.grid_nx, self.grid_ny
            ));
        }
        if !(self.spacing.is_finite() && self.spacing > 0.0) {
            return bad(format!("spacing must be positive, got {}", self.spacing));
        }
        if !(self.distance.is_finite() && self.distance > 0.0) {
            return bad(format!("distance must be positive, got {}", self.distance));
        }
        if let Some(h) = self.ground_plane_offset {
            if !(h > 0.0) {
                return bad(format!("ground plane offset must be positive, got {h}"));
            }
        }
        if !(self.endpoint_resistance.is_finite() && self.endpoint_resistance > 0.0) {
            return bad(format!(
                "endpoint resistance must be positive, got {}",
                self.endpoint_resistance
            ));
        }
        if !(self.gain_tx_dbi.is_finite() && self.gain_rx_dbi.is_finite()) {
            return bad(format!(
                "gains must be finite, got {} / {}",
                self.gain_tx_dbi, self.gain_rx_dbi
            ));
        }
        if self.grid_ny > 1 && self.element_length >= self.spacing {
            return bad(format!(
                "collinear neighbours overlap: element length {} >= spacing {}",
                self.element_length, self.spacing
            ));
        }
        self.element_prototype().validate(self.wavelength())
    }

    fn element_prototype(&self) -> DipoleElement {
        DipoleElement {
            center: [0.0; 3],
            length: self.element_length,
            radius: self.element_radius,
            axis: [0.0, 1.0, 0.0],
        }
    }

    pub fn element_center(&self, index: usize) -> [f64; 3] {
        let ix = index % self.grid_nx;
        let iy = index / self.grid_nx;
        [
            (ix as f64 - (self.grid_nx as f64 - 1.0) * 0.5) * self.spacing,
            (iy as f64 - (self.grid_ny as f64 - 1.0) * 0.5) * self.spacing,
            0.0,
        ]
    }

    pub fn elements(&self) -> Vec<DipoleElement> {
        (0..self.element_count())
            .map(|i| DipoleElement {
                center: self.element_center(i),
                ..self.element_prototype()
            })
            .collect()
    }

    /// Endpoint location for a given angle off broadside in the `x–z` plane.
    pub fn endpoint_position(&self, angle_deg: f64) -> [f64; 3] {
        let t = angle_deg.to_radians();
        [self.distance * libm::sin(t), 0.0, self.distance * libm::cos(t)]
    }

    pub fn with_alpha(&self, alpha_deg: f64) -> Self {
        Self {
            alpha_deg,
            ..self.clone()
        }
    }
}

pub(crate) fn db_to_linear(db: f64) -> f64 {
    libm::pow(10.0, db / 10.0)
}
