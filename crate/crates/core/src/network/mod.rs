//! Multiport impedance model, surface configurations and network reductions.

mod config;
mod reduce;
mod solve;
mod sparams;

use alloc::format;
use alloc::vec::Vec;
use num_complex::Complex64;

pub use config::{Dof, ElementState, SurfaceConfig};
pub use reduce::{merge_parallel, reduce_open, reduce_short};
pub use solve::{efficiency_gradient, loaded_solve, LoadedSolveResult};
pub use sparams::{s_to_z, z_to_s};

use crate::error::{Error, Result};
use crate::linalg::{min_symmetric_eigenvalue, real_part, relative_asymmetry, symmetrize, CMatrix, CVector};

/// Relative asymmetry accepted (and then removed) when constructing an [`ImpedanceMatrix`].
pub const SYMMETRY_TOLERANCE: f64 = 1e-6;
/// Passivity tolerance, relative to the spectral norm of `Re Z`.
pub const PASSIVITY_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum PortRole {
    Transmitter,
    /// Surface element index in the originating geometry / configuration.
    Surface(usize),
    Receiver,
}

/// Square, symmetric, passive complex port impedance matrix with role labels.
///
/// The receiver termination is fixed at construction as the conjugate of the receiver's
/// self impedance and carried unchanged through network reductions, so a reduced network
/// is still loaded by the same physical receiver.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpedanceMatrix {
    entries: CMatrix,
    roles: Vec<PortRole>,
    frequency: f64,
    receiver_load: Complex64,
}

impl ImpedanceMatrix {
    /// Validates shape, roles, symmetry and passivity. Residual asymmetry below
    /// [`SYMMETRY_TOLERANCE`] is averaged out; exactly symmetric input is kept bit for bit.
    pub fn new(entries: CMatrix, roles: Vec<PortRole>, frequency: f64) -> Result<Self> {
        let z = Self::structural(entries, roles, frequency)?;
        z.check_passive()?;
        Ok(z)
    }

    /// Like [`new`](Self::new) but skips the passivity gate.
    pub fn new_unchecked_passivity(
        entries: CMatrix,
        roles: Vec<PortRole>,
        frequency: f64,
    ) -> Result<Self> {
        Self::structural(entries, roles, frequency)
    }

    fn structural(entries: CMatrix, roles: Vec<PortRole>, frequency: f64) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::NotSquare {
                rows: entries.nrows(),
                cols: entries.ncols(),
            });
        }
        if roles.len() != entries.nrows() {
            return Err(Error::DimensionMismatch {
                expected: entries.nrows(),
                found: roles.len(),
            });
        }
        validate_roles(&roles)?;
        if !entries.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
            return Err(Error::InvalidRoles("matrix has non-finite entries".into()));
        }
        let asymmetry = relative_asymmetry(&entries);
        if asymmetry > SYMMETRY_TOLERANCE {
            return Err(Error::NotSymmetric { asymmetry });
        }
        let r = roles.iter().position(|r| *r == PortRole::Receiver).unwrap();
        let receiver_load = entries[(r, r)].conj();
        Ok(Self {
            entries: symmetrize(&entries),
            roles,
            frequency,
            receiver_load,
        })
    }

    /// Smallest eigenvalue of `Re Z` must be ≥ `-1e-8 · ‖Re Z‖₂`.
    pub fn check_passive(&self) -> Result<()> {
        let (min, tolerance) = self.passivity_margin();
        if min < -tolerance {
            return Err(Error::NotPassive {
                min_eigenvalue: min,
                tolerance,
            });
        }
        Ok(())
    }

    /// `(min eig Re Z, tolerance)`.
    pub fn passivity_margin(&self) -> (f64, f64) {
        let r = real_part(&self.entries);
        if r.nrows() == 0 {
            return (0.0, 0.0);
        }
        let eig = r.symmetric_eigenvalues();
        let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
        let norm = eig.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        (min, PASSIVITY_TOLERANCE * norm)
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn into_entries(self) -> CMatrix {
        self.entries
    }

    pub fn roles(&self) -> &[PortRole] {
        &self.roles
    }

    pub fn frequency(&self) -> f64 {
        self.frequency
    }

    /// Conjugate-matched receiver termination of the originating (unreduced) network.
    pub fn receiver_load(&self) -> Complex64 {
        self.receiver_load
    }

    /// Same matrix with an explicit receiver termination.
    pub fn with_receiver_load(mut self, load: Complex64) -> Self {
        self.receiver_load = load;
        self
    }

    pub fn port_count(&self) -> usize {
        self.roles.len()
    }

    pub fn transmitter(&self) -> usize {
        self.roles
            .iter()
            .position(|r| *r == PortRole::Transmitter)
            .expect("validated roles")
    }

    pub fn receiver(&self) -> usize {
        self.roles
            .iter()
            .position(|r| *r == PortRole::Receiver)
            .expect("validated roles")
    }

    /// Matrix port carrying surface element `element`, if it is present.
    pub fn port_of_element(&self, element: usize) -> Option<usize> {
        self.roles.iter().position(|r| *r == PortRole::Surface(element))
    }

    /// Matrix ports of all surface elements, in port order.
    pub fn surface_ports(&self) -> Vec<usize> {
        (0..self.roles.len())
            .filter(|&p| matches!(self.roles[p], PortRole::Surface(_)))
            .collect()
    }

    /// Same network with every entry multiplied by `factor` (used for base-impedance scaling).
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            entries: self.entries.map(|v| v * factor),
            roles: self.roles.clone(),
            frequency: self.frequency,
            receiver_load: self.receiver_load * factor,
        }
    }

    pub fn min_resistance_eigenvalue(&self) -> f64 {
        min_symmetric_eigenvalue(&real_part(&self.entries))
    }
}

fn validate_roles(roles: &[PortRole]) -> Result<()> {
    let tx = roles.iter().filter(|r| **r == PortRole::Transmitter).count();
    let rx = roles.iter().filter(|r| **r == PortRole::Receiver).count();
    if tx != 1 || rx != 1 {
        return Err(Error::InvalidRoles(format!(
            "need exactly one transmitter and one receiver, found {tx} and {rx}"
        )));
    }
    let mut surface: Vec<usize> = roles
        .iter()
        .filter_map(|r| match r {
            PortRole::Surface(i) => Some(*i),
            _ => None,
        })
        .collect();
    surface.sort_unstable();
    if let Some(w) = surface.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::InvalidRoles(format!("surface element {} appears twice", w[0])));
    }
    Ok(())
}

/// Blocks of a port matrix: transmitter, surface (in matrix port order) and receiver.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionedZ {
    pub z_t: Complex64,
    pub z_ts: CVector,
    pub z_tr: Complex64,
    pub z_s: CMatrix,
    pub z_sr: CVector,
    pub z_r: Complex64,
    /// Element index of each surface row/column of `z_s`.
    pub surface_elements: Vec<usize>,
    pub frequency: f64,
}

pub fn partition(z: &ImpedanceMatrix) -> PartitionedZ {
    let t = z.transmitter();
    let r = z.receiver();
    let ports = z.surface_ports();
    let e = z.entries();
    let n = ports.len();
    PartitionedZ {
        z_t: e[(t, t)],
        z_ts: CVector::from_fn(n, |i, _| e[(t, ports[i])]),
        z_tr: e[(t, r)],
        z_s: CMatrix::from_fn(n, n, |i, j| e[(ports[i], ports[j])]),
        z_sr: CVector::from_fn(n, |i, _| e[(ports[i], r)]),
        z_r: e[(r, r)],
        surface_elements: ports
            .iter()
            .map(|&p| match z.roles()[p] {
                PortRole::Surface(i) => i,
                _ => unreachable!(),
            })
            .collect(),
        frequency: z.frequency(),
    }
}

impl PartitionedZ {
    pub fn surface_count(&self) -> usize {
        self.z_s.nrows()
    }

    /// Reassembles the full matrix in `[tx, surface…, rx]` order.
    pub fn assemble(&self) -> Result<ImpedanceMatrix> {
        let n = self.surface_count();
        let mut e = CMatrix::zeros(n + 2, n + 2);
        e[(0, 0)] = self.z_t;
        e[(0, n + 1)] = self.z_tr;
        e[(n + 1, 0)] = self.z_tr;
        e[(n + 1, n + 1)] = self.z_r;
        for i in 0..n {
            e[(0, i + 1)] = self.z_ts[i];
            e[(i + 1, 0)] = self.z_ts[i];
            e[(i + 1, n + 1)] = self.z_sr[i];
            e[(n + 1, i + 1)] = self.z_sr[i];
            for j in 0..n {
                e[(i + 1, j + 1)] = self.z_s[(i, j)];
            }
        }
        let mut roles = Vec::with_capacity(n + 2);
        roles.push(PortRole::Transmitter);
        roles.extend(self.surface_elements.iter().map(|&i| PortRole::Surface(i)));
        roles.push(PortRole::Receiver);
        ImpedanceMatrix::new_unchecked_passivity(e, roles, self.frequency)
    }
}

/// Roles `[tx, surface 0..n, rx]`.
pub fn standard_roles(surface_count: usize) -> Vec<PortRole> {
    let mut roles = Vec::with_capacity(surface_count + 2);
    roles.push(PortRole::Transmitter);
    roles.extend((0..surface_count).map(PortRole::Surface));
    roles.push(PortRole::Receiver);
    roles
}
