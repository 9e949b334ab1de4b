use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use num_complex::Complex64;

use super::dipole::parallel_impedance;
use super::{
    dipole_mutual_impedance, dipole_self_impedance, endpoint_coupling, plate_coupling,
    DipoleElement, EndpointRole, LinkGeometry,
};
use crate::error::{Error, Result};
use crate::linalg::{min_symmetric_eigenvalue, real_part, CMatrix};
use crate::network::{standard_roles, ImpedanceMatrix};

/// Assembled link matrix plus the passivity regularization that was applied.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthesizedLink {
    pub impedance: ImpedanceMatrix,
    /// Real shift added to every diagonal entry (0 when `Re Z` was already PSD).
    pub passivity_shift: f64,
    /// Smallest eigenvalue of `Re Z` before regularization.
    pub min_resistance_eigenvalue: f64,
}

/// Free-space impedance matrix of an arbitrary set of parallel dipoles.
pub fn free_space_impedance(elements: &[DipoleElement], wavelength: f64) -> Result<CMatrix> {
    let n = elements.len();
    let mut z = CMatrix::zeros(n, n);
    for i in 0..n {
        z[(i, i)] = dipole_self_impedance(&elements[i], wavelength)?;
        for j in (i + 1)..n {
            let v = dipole_mutual_impedance(&elements[i], &elements[j], wavelength)?;
            z[(i, j)] = v;
            z[(j, i)] = v;
        }
    }
    Ok(z)
}

/// Image-theory correction for a conducting plane `offset` behind the element plane
/// (`z = -offset`): every entry loses the coupling to the negative image of its column
/// element. `None` leaves the matrix unchanged.
pub fn apply_ground_plane(
    z_free: &CMatrix,
    elements: &[DipoleElement],
    wavelength: f64,
    offset: Option<f64>,
) -> Result<CMatrix> {
    let Some(offset) = offset else {
        return Ok(z_free.clone());
    };
    if !(offset > 0.0) {
        return Err(Error::InvalidGeometry(alloc::format!(
            "ground plane offset must be positive, got {offset}"
        )));
    }
    let n = elements.len();
    if z_free.nrows() != n || z_free.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: z_free.nrows(),
        });
    }
    if elements.iter().any(|e| e.axis[2].abs() > 1e-12) {
        return Err(Error::InvalidGeometry(
            "image correction needs elements parallel to the ground plane".into(),
        ));
    }
    let mut z = z_free.clone();
    for i in 0..n {
        for j in i..n {
            let mut image = elements[j];
            image.center[2] -= 2.0 * offset;
            let v = dipole_mutual_impedance(&elements[i], &image, wavelength)?;
            z[(i, j)] -= v;
            if j != i {
                z[(j, i)] -= v;
            }
        }
    }
    Ok(z)
}

/// Surface block `Z_s` of a regular grid, ground plane included. Entries depend only on the
/// integer grid offset, so they are computed once per offset and the block is exactly
/// symmetric and mirror invariant.
pub fn surface_impedance(geometry: &LinkGeometry) -> Result<CMatrix> {
    geometry.validate()?;
    let lambda = geometry.wavelength();
    let (len, a, s) = (geometry.element_length, geometry.element_radius, geometry.spacing);
    let mut cache: BTreeMap<(usize, usize), Complex64> = BTreeMap::new();
    let mut entry = |dx: usize, dy: usize| -> Result<Complex64> {
        if let Some(v) = cache.get(&(dx, dy)) {
            return Ok(*v);
        }
        let lateral = dx as f64 * s;
        let axial = dy as f64 * s;
        let mut v = if dx == 0 && dy == 0 {
            parallel_impedance(a, 0.0, len, len, a, a, lambda)?
        } else {
            parallel_impedance(lateral, axial, len, len, a, a, lambda)?
        };
        if let Some(hg) = geometry.ground_plane_offset {
            v -= parallel_impedance(libm::hypot(lateral, 2.0 * hg), axial, len, len, a, a, lambda)?;
        }
        cache.insert((dx, dy), v);
        Ok(v)
    };
    let n = geometry.element_count();
    let nx = geometry.grid_nx;
    let mut z = CMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let dx = (i % nx).abs_diff(j % nx);
            let dy = (i / nx).abs_diff(j / nx);
            let v = entry(dx, dy)?;
            z[(i, j)] = v;
            z[(j, i)] = v;
        }
    }
    Ok(z)
}

/// Adds the endpoint rows/columns to a precomputed surface block and regularizes `Re Z`.
/// Ports are ordered `[tx, surface…, rx]`.
pub fn assemble_link(geometry: &LinkGeometry, z_s: &CMatrix) -> Result<SynthesizedLink> {
    let n = geometry.element_count();
    if z_s.nrows() != n || z_s.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: z_s.nrows(),
        });
    }
    let tx = endpoint_coupling(geometry, EndpointRole::Tx)?;
    let rx = endpoint_coupling(geometry, EndpointRole::Rx)?;
    let z_tr = plate_coupling(geometry)?;

    let mut z = CMatrix::zeros(n + 2, n + 2);
    z[(0, 0)] = tx.self_impedance;
    z[(n + 1, n + 1)] = rx.self_impedance;
    z[(0, n + 1)] = z_tr;
    z[(n + 1, 0)] = z_tr;
    for i in 0..n {
        z[(0, i + 1)] = tx.surface[i];
        z[(i + 1, 0)] = tx.surface[i];
        z[(n + 1, i + 1)] = rx.surface[i];
        z[(i + 1, n + 1)] = rx.surface[i];
        for j in 0..n {
            z[(i + 1, j + 1)] = z_s[(i, j)];
        }
    }

    let min_eig = min_symmetric_eigenvalue(&real_part(&z));
    let mut shift = 0.0;
    if min_eig < 0.0 {
        let diag: Vec<f64> = (0..n + 2).map(|i| z[(i, i)].re).collect();
        let max_diag = diag.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min_diag = diag.iter().copied().fold(f64::INFINITY, f64::min);
        shift = 1e-9 * max_diag - min_eig;
        if shift > 0.01 * min_diag {
            return Err(Error::PassivityShiftTooLarge {
                shift,
                min_resistance: min_diag,
            });
        }
        for i in 0..n + 2 {
            z[(i, i)].re += shift;
        }
    }
    let impedance = ImpedanceMatrix::new(z, standard_roles(n), geometry.frequency)?;
    Ok(SynthesizedLink {
        impedance,
        passivity_shift: shift,
        min_resistance_eigenvalue: min_eig,
    })
}

/// Full `(N+2)×(N+2)` link matrix for a geometry.
pub fn build_impedance_matrix(geometry: &LinkGeometry) -> Result<SynthesizedLink> {
    let z_s = surface_impedance(geometry)?;
    assemble_link(geometry, &z_s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::PortRole;

    fn small(nx: usize, ny: usize) -> LinkGeometry {
        let mut g = LinkGeometry {
            grid_nx: nx,
            grid_ny: ny,
            ..LinkGeometry::standard()
        };
        g.distance = 8.0;
        g
    }

    #[test]
    fn default_matrix_shape_and_symmetry() {
        let g = LinkGeometry::standard();
        let link = build_impedance_matrix(&g).unwrap();
        let z = link.impedance.entries();
        assert_eq!((z.nrows(), z.ncols()), (102, 102));
        assert_eq!(z, &z.transpose());
        assert!(link.impedance.min_resistance_eigenvalue() >= 0.0);
        assert_eq!(link.impedance.roles()[0], PortRole::Transmitter);
        assert_eq!(link.impedance.roles()[101], PortRole::Receiver);
        assert_eq!(link.passivity_shift, 0.0, "min eig {}", link.min_resistance_eigenvalue);
    }

    #[test]
    fn grid_path_matches_generic_path() {
        let g = small(3, 2);
        let lambda = g.wavelength();
        let elements = g.elements();
        let free = free_space_impedance(&elements, lambda).unwrap();
        let generic = apply_ground_plane(&free, &elements, lambda, g.ground_plane_offset).unwrap();
        let grid = surface_impedance(&g).unwrap();
        let err = (&generic - &grid).iter().map(|v| v.norm()).fold(0.0, f64::max);
        assert!(err < 1e-9 * grid[(0, 0)].norm(), "{err}");
        let no_plane = surface_impedance(&LinkGeometry { ground_plane_offset: None, ..g }).unwrap();
        assert!((&free - &no_plane).iter().all(|v| v.norm() < 1e-9 * free[(0, 0)].norm()));
    }

    #[test]
    fn quarter_wave_backing_raises_self_resistance() {
        // half-wave dipole of radius 1e-4 λ: 73.079 Ω alone, 85.602 Ω with the image
        let lambda = 1.0;
        let e = DipoleElement::new([0.0; 3], 0.5, 1e-4, [0.0, 1.0, 0.0]);
        let free = CMatrix::from_element(1, 1, dipole_self_impedance(&e, lambda).unwrap());
        let backed = apply_ground_plane(&free, &[e], lambda, Some(0.25)).unwrap();
        assert!(backed[(0, 0)].re > free[(0, 0)].re);
        let want = Complex64::new(85.602_411_820_493_56, 72.385_379_493_583_57);
        assert!((backed[(0, 0)] - want).norm() < 1e-6 * want.norm(), "{}", backed[(0, 0)]);
    }

    #[test]
    fn distant_ground_plane_vanishes() {
        let lambda = 1.0;
        let e = DipoleElement::new([0.0; 3], 0.5, 1e-4, [0.0, 1.0, 0.0]);
        let free = CMatrix::from_element(1, 1, dipole_self_impedance(&e, lambda).unwrap());
        assert_eq!(apply_ground_plane(&free, &[e], lambda, None).unwrap(), free);
        let mut previous = f64::INFINITY;
        for offset in [10.0, 100.0, 1000.0] {
            let d = (apply_ground_plane(&free, &[e], lambda, Some(offset)).unwrap() - &free)[(0, 0)].norm();
            assert!(d < previous);
            previous = d;
        }
        assert!(previous < 0.05);
    }

    #[test]
    fn widely_spaced_grid_decouples() {
        let mut g = LinkGeometry::standard();
        g.spacing = 100.0 * g.wavelength();
        g.distance = g.far_field_distance();
        let z = build_impedance_matrix(&g).unwrap().impedance.into_entries();
        for i in 0..z.nrows() {
            for j in 0..z.ncols() {
                if i != j {
                    let bound = 1e-3 * z[(i, i)].norm().min(z[(j, j)].norm());
                    assert!(z[(i, j)].norm() < bound, "({i},{j}): {}", z[(i, j)].norm());
                }
            }
        }
    }

    #[test]
    fn mirror_symmetric_geometry_gives_permutation_invariant_matrix() {
        let g = LinkGeometry::standard();
        let z = build_impedance_matrix(&g).unwrap().impedance.into_entries();
        let (nx, ny) = (g.grid_nx, g.grid_ny);
        let n = nx * ny;
        // mirror y: elements swap rows, endpoints stay
        let perm_y = |p: usize| -> usize {
            if p == 0 || p == n + 1 {
                p
            } else {
                let e = p - 1;
                1 + (ny - 1 - e / nx) * nx + e % nx
            }
        };
        // mirror x with β = -α: elements swap columns, tx ↔ rx
        let perm_x = |p: usize| -> usize {
            if p == 0 {
                n + 1
            } else if p == n + 1 {
                0
            } else {
                let e = p - 1;
                1 + (e / nx) * nx + (nx - 1 - e % nx)
            }
        };
        for i in 0..n + 2 {
            for j in 0..n + 2 {
                assert_eq!(z[(i, j)], z[(perm_y(i), perm_y(j))]);
                assert_eq!(z[(i, j)], z[(perm_x(i), perm_x(j))]);
            }
        }
    }
}
