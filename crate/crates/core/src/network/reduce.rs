use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;

use super::{ImpedanceMatrix, PortRole};
use crate::error::{Error, Result};
use crate::linalg::{symmetrize, try_inverse_complex, CMatrix};

/// Largest 1-norm condition estimate treated as invertible.
const MAX_CONDITION: f64 = 1e13;

fn check_surface_ports(z: &ImpedanceMatrix, ports: &[usize]) -> Result<Vec<bool>> {
    let mut mask = vec![false; z.port_count()];
    for &p in ports {
        match z.roles().get(p) {
            Some(PortRole::Surface(_)) => {}
            _ => return Err(Error::NotSurfacePort(p)),
        }
        if mask[p] {
            return Err(Error::InvalidRoles(format!("port {p} listed twice")));
        }
        mask[p] = true;
    }
    Ok(mask)
}

fn submatrix(e: &CMatrix, rows: &[usize], cols: &[usize]) -> CMatrix {
    CMatrix::from_fn(rows.len(), cols.len(), |i, j| e[(rows[i], cols[j])])
}

fn norm1(m: &CMatrix) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|v| v.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Inverse with a `‖A‖₁‖A⁻¹‖₁` condition estimate; `Err(condition)` if not invertible.
pub(crate) fn inverse_with_condition(a: &CMatrix) -> core::result::Result<CMatrix, f64> {
    let inv = try_inverse_complex(a.clone()).ok_or(f64::INFINITY)?;
    let cond = norm1(a) * norm1(&inv);
    if cond.is_finite() && cond < MAX_CONDITION {
        Ok(inv)
    } else {
        Err(cond)
    }
}

/// Removes open-circuited surface ports (zero current ⇒ row and column drop out).
pub fn reduce_open(z: &ImpedanceMatrix, ports: &[usize]) -> Result<ImpedanceMatrix> {
    let mask = check_surface_ports(z, ports)?;
    let keep: Vec<usize> = (0..z.port_count()).filter(|&p| !mask[p]).collect();
    let roles = keep.iter().map(|&p| z.roles()[p]).collect();
    Ok(ImpedanceMatrix::new(submatrix(z.entries(), &keep, &keep), roles, z.frequency())?
        .with_receiver_load(z.receiver_load()))
}

/// Eliminates short-circuited surface ports by Schur complement:
/// `Z' = Z_kk - Z_ks Z_ss⁻¹ Z_sk`.
pub fn reduce_short(z: &ImpedanceMatrix, ports: &[usize]) -> Result<ImpedanceMatrix> {
    let mask = check_surface_ports(z, ports)?;
    if ports.is_empty() {
        return Ok(z.clone());
    }
    let keep: Vec<usize> = (0..z.port_count()).filter(|&p| !mask[p]).collect();
    let short: Vec<usize> = (0..z.port_count()).filter(|&p| mask[p]).collect();
    let e = z.entries();
    let z_ss = submatrix(e, &short, &short);
    let inv = inverse_with_condition(&z_ss).map_err(|condition| Error::SingularShortBlock { condition })?;
    let z_ks = submatrix(e, &keep, &short);
    let z_sk = submatrix(e, &short, &keep);
    let reduced = submatrix(e, &keep, &keep) - z_ks * inv * z_sk;
    let roles = keep.iter().map(|&p| z.roles()[p]).collect();
    Ok(ImpedanceMatrix::new(symmetrize(&reduced), roles, z.frequency())?
        .with_receiver_load(z.receiver_load()))
}

/// Connects each cluster of surface ports in parallel: `Y' = Bᵀ Z⁻¹ B`, `Z' = Y'⁻¹`.
/// The merged port sits at the position of its lowest-numbered member and carries that
/// member's element index.
pub fn merge_parallel(z: &ImpedanceMatrix, clusters: &[Vec<usize>]) -> Result<ImpedanceMatrix> {
    let all: Vec<usize> = clusters.iter().flatten().copied().collect();
    check_surface_ports(z, &all)?;
    if clusters.iter().any(|c| c.is_empty()) {
        return Err(Error::InvalidRoles("empty cluster".into()));
    }
    let n = z.port_count();
    // target column of every original port
    let mut target: Vec<Option<usize>> = vec![None; n];
    let mut leader = vec![usize::MAX; n];
    for c in clusters {
        let lead = *c.iter().min().unwrap();
        for &p in c {
            leader[p] = lead;
        }
    }
    let mut roles = Vec::new();
    let mut m = 0;
    for p in 0..n {
        if leader[p] == usize::MAX || leader[p] == p {
            target[p] = Some(m);
            roles.push(match z.roles()[p] {
                PortRole::Surface(_) if leader[p] == p => {
                    let cluster = clusters.iter().find(|c| c.contains(&p)).unwrap();
                    let element = cluster
                        .iter()
                        .map(|&q| match z.roles()[q] {
                            PortRole::Surface(i) => i,
                            _ => unreachable!(),
                        })
                        .min()
                        .unwrap();
                    PortRole::Surface(element)
                }
                r => r,
            });
            m += 1;
        }
    }
    for p in 0..n {
        if target[p].is_none() {
            target[p] = target[leader[p]];
        }
    }

    let y = inverse_with_condition(z.entries()).map_err(|_| Error::Singular("impedance matrix"))?;
    let mut y_merged = CMatrix::from_element(m, m, Complex64::new(0.0, 0.0));
    for i in 0..n {
        let ti = target[i].unwrap();
        for j in 0..n {
            y_merged[(ti, target[j].unwrap())] += y[(i, j)];
        }
    }
    let merged = inverse_with_condition(&y_merged).map_err(|_| Error::Singular("merged admittance matrix"))?;
    Ok(ImpedanceMatrix::new(symmetrize(&merged), roles, z.frequency())?
        .with_receiver_load(z.receiver_load()))
}

#[cfg(test)]
mod tests {
    use super::super::tests::{c, random_passive};
    use super::super::standard_roles;
    use super::*;

    fn diag(values: &[f64]) -> ImpedanceMatrix {
        let n = values.len();
        let e = CMatrix::from_fn(n, n, |i, j| if i == j { c(values[i], 0.0) } else { c(0.0, 0.0) });
        ImpedanceMatrix::new(e, standard_roles(n - 2), 1.0).unwrap()
    }

    #[test]
    fn open_none_is_identity() {
        let z = random_passive(5, 1);
        assert_eq!(reduce_open(&z, &[]).unwrap(), z);
        assert_eq!(reduce_short(&z, &[]).unwrap(), z);
    }

    #[test]
    fn open_on_diagonal_keeps_remaining_diagonal() {
        let z = diag(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        let r = reduce_open(&z, &[2]).unwrap();
        let d: Vec<f64> = (0..4).map(|i| r.entries()[(i, i)].re).collect();
        assert_eq!(d, vec![1.0, 2.0, 4.0, 5.0]);
        assert_eq!(r.roles()[2], PortRole::Surface(2));
    }

    #[test]
    fn endpoints_cannot_be_reduced() {
        let z = random_passive(3, 2);
        assert_eq!(reduce_open(&z, &[0]), Err(Error::NotSurfacePort(0)));
        assert_eq!(reduce_short(&z, &[4]), Err(Error::NotSurfacePort(4)));
        assert_eq!(reduce_short(&z, &[9]), Err(Error::NotSurfacePort(9)));
    }

    #[test]
    fn hand_computed_schur_complement() {
        // [[2,1],[1,2]] with the second port shorted: 2 - 1·½·1 = 1.5
        let e = CMatrix::from_row_slice(
            3,
            3,
            &[c(2., 0.), c(1., 0.), c(0., 0.), c(1., 0.), c(2., 0.), c(0., 0.), c(0., 0.), c(0., 0.), c(1., 0.)],
        );
        let z = ImpedanceMatrix::new(e, standard_roles(1), 1.0).unwrap();
        let r = reduce_short(&z, &[1]).unwrap();
        assert_eq!(r.port_count(), 2);
        assert!((r.entries()[(0, 0)] - c(1.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn singular_short_block_reports_condition() {
        let mut e = CMatrix::identity(4, 4);
        e[(1, 1)] = c(0.0, 0.0);
        let z = ImpedanceMatrix::new(e, standard_roles(2), 1.0).unwrap();
        assert!(matches!(
            reduce_short(&z, &[1]),
            Err(Error::SingularShortBlock { condition }) if condition.is_infinite() || condition > 1e13
        ));
    }

    #[test]
    fn shorting_decoupled_port_leaves_rest_unchanged() {
        let z = diag(&[1.0, 2.0, 3.0, 4.0]);
        let r = reduce_short(&z, &[1]).unwrap();
        assert_eq!(r.entries()[(1, 1)], c(3.0, 0.0));
    }

    #[test]
    fn decoupled_parallel_ports_add_admittance() {
        let z = diag(&[1.0, 4.0, 4.0, 1.0]);
        let r = merge_parallel(&z, &[vec![1, 2]]).unwrap();
        assert_eq!(r.port_count(), 3);
        assert!((r.entries()[(1, 1)] - c(2.0, 0.0)).norm() < 1e-14);
        assert_eq!(r.roles()[1], PortRole::Surface(0));
    }

    #[test]
    fn singleton_clusters_are_identity() {
        let z = random_passive(4, 5);
        let r = merge_parallel(&z, &[vec![1], vec![3]]).unwrap();
        assert_eq!(r.roles(), z.roles());
        assert!((r.entries() - z.entries()).norm() < 1e-10 * z.entries().norm());
    }

    #[test]
    fn reductions_preserve_symmetry_and_passivity() {
        for seed in 0..10 {
            let z = random_passive(6, seed);
            for r in [
                reduce_open(&z, &[1, 4]).unwrap(),
                reduce_short(&z, &[2, 3]).unwrap(),
                merge_parallel(&z, &[vec![1, 2], vec![5, 6, 4]]).unwrap(),
            ] {
                assert_eq!(r.entries(), &r.entries().transpose());
                r.check_passive().unwrap();
            }
        }
    }
}
