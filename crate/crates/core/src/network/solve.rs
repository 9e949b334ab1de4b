use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;
use num_complex::Complex64;

use super::{Dof, ElementState, ImpedanceMatrix, PortRole, SurfaceConfig};
use crate::error::{Error, Result};
use crate::linalg::{cnorm2, solve_complex, CMatrix, CVector};
use crate::metrics::pte;

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedSolveResult {
    /// Port currents in matrix port order; the transmitter carries 1 A.
    pub currents: CVector,
    /// Port voltages implied by the terminations (not by `Z·i`).
    pub port_voltages: CVector,
    pub eta: f64,
}

impl LoadedSolveResult {
    /// `‖v - Z i‖ / ‖v‖`
    pub fn kvl_residual(&self, z: &ImpedanceMatrix) -> f64 {
        let r = &self.port_voltages - z.entries() * &self.currents;
        let scale = cnorm2(self.port_voltages.as_slice());
        if scale == 0.0 {
            cnorm2(r.as_slice())
        } else {
            cnorm2(r.as_slice()) / scale
        }
    }
}

enum Termination {
    Drive,
    ConjugateMatch(Complex64),
    Reactance(f64),
    Open,
    Short,
    ClusterLeader { ports: Vec<usize>, reactance: f64 },
    ClusterMember { leader: usize },
}

/// Solves the terminated network: the transmitter is driven with 1 A, the receiver is
/// loaded with `conj(z_r)`, tunable elements and clusters with `j·x`. Ports still present
/// in `z` whose element is Open/Shorted get explicit zero-current/zero-voltage equations;
/// elements already reduced away are simply absent. `reactances` follows
/// [`SurfaceConfig::dofs`]; an infinite reactance is an open circuit.
pub fn loaded_solve(
    z: &ImpedanceMatrix,
    config: &SurfaceConfig,
    reactances: &[f64],
) -> Result<LoadedSolveResult> {
    let (terms, m, rhs) = terminated_system(z, config, reactances)?;
    let i = solve_complex(m, &rhs).ok_or(Error::Singular("terminated network"))?;
    let port_voltages = termination_voltages(z, &terms, &i);
    let eta = pte(z, &i)?;
    Ok(LoadedSolveResult {
        currents: i,
        port_voltages,
        eta,
    })
}

/// Efficiency of [`loaded_solve`] and its derivative with respect to each finite reactance
/// (zero for open-circuited degrees of freedom), by the adjoint of the terminated system.
pub fn efficiency_gradient(
    z: &ImpedanceMatrix,
    config: &SurfaceConfig,
    reactances: &[f64],
) -> Result<(f64, Vec<f64>)> {
    let (terms, m, rhs) = terminated_system(z, config, reactances)?;
    let mh = m.adjoint();
    let i = solve_complex(m, &rhs).ok_or(Error::Singular("terminated network"))?;
    let eta = pte(z, &i)?;

    // w = ∂η/∂conj(i) for η = a / b, a = |i_r|² Re z_r, b = iᴴ Re(Z) i
    let e = z.entries();
    let n = i.len();
    let r = z.receiver();
    let mut re_zi = CVector::from_element(n, Complex64::new(0.0, 0.0));
    for a in 0..n {
        for b in 0..n {
            re_zi[a] += i[b] * e[(a, b)].re;
        }
    }
    let power: f64 = (0..n).map(|a| (i[a].conj() * re_zi[a]).re).sum();
    let received = i[r].norm_sqr() * z.receiver_load().re;
    let mut w = re_zi * Complex64::new(-received / (power * power), 0.0);
    w[r] += i[r] * (z.receiver_load().re / power);
    let lambda = solve_complex(mh, &w).ok_or(Error::Singular("adjoint of terminated network"))?;

    let mut grad = alloc::vec![0.0; reactances.len()];
    let dofs = config.dofs();
    let dof_index = |j: usize| dofs.iter().position(|d| d.members().contains(&j));
    for (p, t) in terms.iter().enumerate() {
        let (current, element) = match (t, z.roles()[p]) {
            (Termination::Reactance(x), PortRole::Surface(j)) if x.is_finite() => (i[p], j),
            (Termination::ClusterLeader { ports, reactance }, PortRole::Surface(j)) if reactance.is_finite() => {
                (ports.iter().map(|&q| i[q]).sum(), j)
            }
            _ => continue,
        };
        if let Some(d) = dof_index(element) {
            // ∂M/∂x_d · i is j·current in row p
            grad[d] = -2.0 * (lambda[p].conj() * Complex64::new(0.0, 1.0) * current).re;
        }
    }
    Ok((eta, grad))
}

fn terminated_system(
    z: &ImpedanceMatrix,
    config: &SurfaceConfig,
    reactances: &[f64],
) -> Result<(Vec<Termination>, CMatrix, CVector)> {
    let dofs = config.dofs();
    if reactances.len() != dofs.len() {
        return Err(Error::DimensionMismatch {
            expected: dofs.len(),
            found: reactances.len(),
        });
    }
    let mut dof_of_element: BTreeMap<usize, usize> = BTreeMap::new();
    for (d, dof) in dofs.iter().enumerate() {
        for &m in dof.members() {
            dof_of_element.insert(m, d);
        }
    }
    // ports of each present cluster, in port order
    let mut cluster_ports: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    let n = z.port_count();
    let e = z.entries();
    let mut terms = Vec::with_capacity(n);
    for p in 0..n {
        let t = match z.roles()[p] {
            PortRole::Transmitter => Termination::Drive,
            PortRole::Receiver => Termination::ConjugateMatch(z.receiver_load()),
            PortRole::Surface(j) => match config.states.get(j) {
                None => {
                    return Err(Error::InvalidRoles(format!(
                        "port {p} refers to element {j} outside the configuration"
                    )))
                }
                Some(ElementState::Tunable) => Termination::Reactance(reactances[dof_of_element[&j]]),
                Some(ElementState::Open) => Termination::Open,
                Some(ElementState::Shorted) => Termination::Short,
                Some(ElementState::Cluster(_)) => {
                    let d = dof_of_element[&j];
                    let ports = cluster_ports.entry(d).or_default();
                    ports.push(p);
                    if ports.len() == 1 {
                        Termination::ClusterLeader {
                            ports: Vec::new(),
                            reactance: reactances[d],
                        }
                    } else {
                        Termination::ClusterMember { leader: ports[0] }
                    }
                }
            },
        };
        terms.push(t);
    }
    for ports in cluster_ports.values() {
        if let Termination::ClusterLeader { ports: slot, .. } = &mut terms[ports[0]] {
            *slot = ports.clone();
        }
    }
    for dof in &dofs {
        if let Dof::Element(j) = dof {
            if z.port_of_element(*j).is_none() {
                return Err(Error::InvalidRoles(format!(
                    "tunable element {j} is missing from the impedance matrix"
                )));
            }
        }
    }

    let zero = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let mut m = CMatrix::from_element(n, n, zero);
    let mut rhs = CVector::from_element(n, zero);
    for (p, t) in terms.iter().enumerate() {
        let kvl = |m: &mut CMatrix| {
            for q in 0..n {
                m[(p, q)] = e[(p, q)];
            }
        };
        match t {
            Termination::Drive => {
                m[(p, p)] = one;
                rhs[p] = one;
            }
            Termination::ConjugateMatch(load) => {
                kvl(&mut m);
                m[(p, p)] += *load;
            }
            Termination::Reactance(x) if x.is_infinite() => m[(p, p)] = one,
            Termination::Reactance(x) => {
                kvl(&mut m);
                m[(p, p)] += Complex64::new(0.0, *x);
            }
            Termination::Open => m[(p, p)] = one,
            Termination::Short => kvl(&mut m),
            Termination::ClusterLeader { ports, reactance } => {
                if reactance.is_infinite() {
                    for &q in ports {
                        m[(p, q)] = one;
                    }
                } else {
                    kvl(&mut m);
                    for &q in ports {
                        m[(p, q)] += Complex64::new(0.0, *reactance);
                    }
                }
            }
            Termination::ClusterMember { leader } => {
                for q in 0..n {
                    m[(p, q)] = e[(p, q)] - e[(*leader, q)];
                }
            }
        }
    }
    Ok((terms, m, rhs))
}

fn termination_voltages(z: &ImpedanceMatrix, terms: &[Termination], i: &CVector) -> CVector {
    let n = i.len();
    let zero = Complex64::new(0.0, 0.0);
    let zi = z.entries() * i;
    let mut v = CVector::from_element(n, zero);
    for (p, t) in terms.iter().enumerate() {
        v[p] = match t {
            Termination::Drive | Termination::Open => zi[p],
            Termination::ConjugateMatch(load) => -*load * i[p],
            Termination::Reactance(x) if x.is_infinite() => zi[p],
            Termination::Reactance(x) => -Complex64::new(0.0, *x) * i[p],
            Termination::Short => zero,
            Termination::ClusterLeader { ports, reactance } => {
                if reactance.is_infinite() {
                    zi[p]
                } else {
                    let total: Complex64 = ports.iter().map(|&q| i[q]).sum();
                    -Complex64::new(0.0, *reactance) * total
                }
            }
            Termination::ClusterMember { .. } => zero,
        };
    }
    for (p, t) in terms.iter().enumerate() {
        if let Termination::ClusterMember { leader } = t {
            v[p] = v[*leader];
        }
    }
    v
}

#[cfg(test)]
mod tests {
    use super::super::tests::{c, random_passive};
    use super::super::{merge_parallel, reduce_open, reduce_short, standard_roles};
    use super::*;
    use alloc::vec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use ElementState::*;

    #[test]
    fn no_path_gives_zero_efficiency() {
        let mut e = CMatrix::identity(4, 4);
        e[(1, 2)] = c(0.3, 0.2);
        e[(2, 1)] = c(0.3, 0.2);
        e[(2, 3)] = c(0.1, 0.0);
        e[(3, 2)] = c(0.1, 0.0);
        let z = ImpedanceMatrix::new(e, standard_roles(2), 1.0).unwrap();
        let cfg = SurfaceConfig::all(Tunable, 2, "full");
        let r = loaded_solve(&z, &cfg, &[1.0, -2.0]).unwrap();
        assert_eq!(r.eta, 0.0);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for seed in 0..10 {
            let z = random_passive(6, 40 + seed);
            let cfg = SurfaceConfig::new(vec![Tunable, Open, Shorted, Cluster(2), Cluster(2), Tunable], 0, "mix").unwrap();
            let mut x: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            if seed == 9 {
                x[2] = f64::INFINITY;
            }
            let (eta, grad) = efficiency_gradient(&z, &cfg, &x).unwrap();
            assert_eq!(eta, loaded_solve(&z, &cfg, &x).unwrap().eta);
            for d in 0..3 {
                if x[d].is_infinite() {
                    assert_eq!(grad[d], 0.0);
                    continue;
                }
                let h = 1e-6;
                let (mut xp, mut xm) = (x.clone(), x.clone());
                xp[d] += h;
                xm[d] -= h;
                let fd = (loaded_solve(&z, &cfg, &xp).unwrap().eta - loaded_solve(&z, &cfg, &xm).unwrap().eta) / (2.0 * h);
                assert!((fd - grad[d]).abs() <= 1e-6 * (1.0 + fd.abs()), "seed {seed} dof {d}: {fd} vs {}", grad[d]);
            }
        }
    }

    #[test]
    fn kvl_residual_is_small() {
        let z = random_passive(5, 11);
        let cfg = SurfaceConfig::new(vec![Tunable, Open, Shorted, Cluster(0), Cluster(0)], 0, "mix").unwrap();
        let r = loaded_solve(&z, &cfg, &[0.7, -1.3]).unwrap();
        assert!(r.kvl_residual(&z) < 1e-12, "{}", r.kvl_residual(&z));
        assert!((r.currents[0] - c(1.0, 0.0)).norm() < 1e-14);
        assert!(r.currents[2].norm() < 1e-15);
        assert!(r.port_voltages[3].norm() == 0.0);
    }

    #[test]
    fn reduced_networks_match_explicit_terminations() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for seed in 0..20 {
            let z = random_passive(6, seed);
            let cfg = SurfaceConfig::new(
                vec![Tunable, Open, Shorted, Cluster(1), Cluster(1), Cluster(1)],
                0,
                "mix",
            )
            .unwrap();
            let x: Vec<f64> = (0..2).map(|_| rng.random_range(-3.0..3.0)).collect();
            let full = loaded_solve(&z, &cfg, &x).unwrap();

            let opened = reduce_open(&z, &[z.port_of_element(1).unwrap()]).unwrap();
            let port = opened.port_of_element(2).unwrap();
            let shorted = reduce_short(&opened, &[port]).unwrap();
            let members: Vec<usize> = [3, 4, 5].iter().map(|&j| shorted.port_of_element(j).unwrap()).collect();
            let merged = merge_parallel(&shorted, &[members]).unwrap();
            assert_eq!(merged.port_count(), 4);
            let reduced = loaded_solve(&merged, &cfg, &x).unwrap();
            assert!(
                (reduced.eta - full.eta).abs() <= 1e-9 * full.eta,
                "seed {seed}: {} vs {}",
                reduced.eta,
                full.eta
            );
        }
    }

    #[test]
    fn each_reduction_matches_alone() {
        let z = random_passive(4, 0);
        let open_cfg = SurfaceConfig::new(vec![Tunable, Open, Tunable, Tunable], 0, "o").unwrap();
        let x3 = [0.4, -0.9, 1.1];
        let a = loaded_solve(&z, &open_cfg, &x3).unwrap().eta;
        let b = loaded_solve(&reduce_open(&z, &[2]).unwrap(), &open_cfg, &x3).unwrap().eta;
        assert!((a - b).abs() < 1e-12 * a, "open {a} {b}");
        let short_cfg = SurfaceConfig::new(vec![Tunable, Shorted, Tunable, Tunable], 0, "s").unwrap();
        let a = loaded_solve(&z, &short_cfg, &x3).unwrap().eta;
        let b = loaded_solve(&reduce_short(&z, &[2]).unwrap(), &short_cfg, &x3).unwrap().eta;
        assert!((a - b).abs() < 1e-12 * a, "short {a} {b}");
        let cl_cfg = SurfaceConfig::new(vec![Tunable, Cluster(0), Cluster(0), Tunable], 0, "c").unwrap();
        let a = loaded_solve(&z, &cl_cfg, &x3).unwrap().eta;
        let b = loaded_solve(&merge_parallel(&z, &[vec![2, 3]]).unwrap(), &cl_cfg, &x3).unwrap().eta;
        assert!((a - b).abs() < 1e-12 * a, "cluster {a} {b}");
    }

    #[test]
    fn infinite_reactance_is_open() {
        let z = random_passive(3, 4);
        let cfg = SurfaceConfig::new(vec![Tunable, Tunable, Tunable], 0, "full").unwrap();
        let inf = loaded_solve(&z, &cfg, &[0.5, f64::INFINITY, -0.5]).unwrap();
        let open_cfg = SurfaceConfig::new(vec![Tunable, Open, Tunable], 0, "open").unwrap();
        let open = loaded_solve(&z, &open_cfg, &[0.5, -0.5]).unwrap();
        assert!((inf.eta - open.eta).abs() < 1e-14 * open.eta);
    }

    #[test]
    fn reactance_count_is_checked() {
        let z = random_passive(2, 4);
        let cfg = SurfaceConfig::all(Tunable, 2, "full");
        assert_eq!(
            loaded_solve(&z, &cfg, &[1.0]),
            Err(Error::DimensionMismatch { expected: 2, found: 1 })
        );
    }
}
