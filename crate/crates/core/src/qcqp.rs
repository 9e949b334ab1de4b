//! Real-valued quadratically constrained formulation of the minimum-transmit-power problem.
//!
//! Currents are lifted to `c = [Re i; Im i]` in matrix port order. The power delivered into
//! port `n` is `P_n = ½ cᵀQ_n c = ½ Re(v_n conj(i_n))` with `v = Z i`, so `Σ_n Q_n` is the
//! block-diagonal lift of `Re Z`. A lossless reactive load absorbs no power, so every tunable
//! port (or cluster) contributes the constraint `P = 0`; open and shorted elements and the
//! receiver termination contribute affine rows `a·c = b`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{real_part, CVector, RMatrix, RVector};
use crate::network::{Dof, ElementState, ImpedanceMatrix, SurfaceConfig};

/// Impedance base applied before lifting.
pub const BASE_IMPEDANCE: f64 = 50.0;

/// Relative row-residual below which an affine row counts as dependent.
const RANK_TOLERANCE: f64 = 1e-10;

pub fn real_lift(v: &CVector) -> RVector {
    let n = v.len();
    RVector::from_fn(2 * n, |k, _| if k < n { v[k].re } else { v[k - n].im })
}

pub fn unlift(c: &RVector) -> Result<CVector> {
    if c.len() % 2 != 0 {
        return Err(Error::OddLength(c.len()));
    }
    let n = c.len() / 2;
    Ok(CVector::from_fn(n, |k, _| Complex64::new(c[k], c[k + n])))
}

/// `blockdiag(M, M)`
pub fn lift_block_diagonal(m: &RMatrix) -> RMatrix {
    let n = m.nrows();
    let mut out = RMatrix::zeros(2 * n, 2 * n);
    out.view_mut((0, 0), (n, n)).copy_from(m);
    out.view_mut((n, n), (n, n)).copy_from(m);
    out
}

/// `Q = Σ ½(e_k wᵀ + w e_kᵀ)` over `terms = [(k, w)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerForm {
    /// Matrix ports whose power this form sums.
    pub ports: Vec<usize>,
    pub terms: Vec<(usize, RVector)>,
}

impl PowerForm {
    pub fn dim(&self) -> usize {
        self.terms.first().map_or(0, |(_, w)| w.len())
    }

    pub fn matrix(&self) -> RMatrix {
        let n = self.dim();
        let mut q = RMatrix::zeros(n, n);
        for (k, w) in &self.terms {
            for j in 0..n {
                q[(*k, j)] += 0.5 * w[j];
                q[(j, *k)] += 0.5 * w[j];
            }
        }
        q
    }

    /// `cᵀQc`
    pub fn quadratic(&self, c: &RVector) -> f64 {
        self.terms.iter().map(|(k, w)| c[*k] * w.dot(c)).sum()
    }

    /// `½ cᵀQc`
    pub fn power(&self, c: &RVector) -> f64 {
        0.5 * self.quadratic(c)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AffineRow {
    pub coeffs: RVector,
    pub rhs: f64,
    pub label: String,
}

impl AffineRow {
    pub fn residual(&self, c: &RVector) -> f64 {
        self.coeffs.dot(c) - self.rhs
    }
}

/// Real rows `[Re g, -Im g]` and `[Im g, Re g]` of the complex equation `g·i = 0`.
fn complex_rows(g: &[Complex64], label: &str) -> [AffineRow; 2] {
    let m = g.len();
    let re = RVector::from_fn(2 * m, |k, _| if k < m { g[k].re } else { -g[k - m].im });
    let im = RVector::from_fn(2 * m, |k, _| if k < m { g[k].im } else { g[k - m].re });
    [
        AffineRow {
            coeffs: re,
            rhs: 0.0,
            label: format!("{label}.re"),
        },
        AffineRow {
            coeffs: im,
            rhs: 0.0,
            label: format!("{label}.im"),
        },
    ]
}

fn unit_row(dim: usize, k: usize, rhs: f64, label: String) -> AffineRow {
    let mut coeffs = RVector::zeros(dim);
    coeffs[k] = 1.0;
    AffineRow { coeffs, rhs, label }
}

/// Power form of one matrix port: terms `(n, [R_n·, -X_n·])` and `(n+M, [X_n·, R_n·])`.
pub fn build_port_power_form(z: &ImpedanceMatrix, port: usize) -> Result<PowerForm> {
    let m = z.port_count();
    if port >= m {
        return Err(Error::DimensionMismatch {
            expected: m,
            found: port + 1,
        });
    }
    let row = z.entries().row(port);
    let r1 = RVector::from_fn(2 * m, |k, _| if k < m { row[k].re } else { -row[k - m].im });
    let r2 = RVector::from_fn(2 * m, |k, _| if k < m { row[k].im } else { row[k - m].re });
    Ok(PowerForm {
        ports: alloc::vec![port],
        terms: alloc::vec![(port, r1), (port + m, r2)],
    })
}

fn cluster_power_form(z: &ImpedanceMatrix, ports: &[usize]) -> Result<PowerForm> {
    let mut out = PowerForm {
        ports: Vec::new(),
        terms: Vec::new(),
    };
    for &p in ports {
        let f = build_port_power_form(z, p)?;
        out.ports.extend(f.ports);
        out.terms.extend(f.terms);
    }
    Ok(out)
}

/// Receiver termination rows: KVL at the receiver with its load, `Im i_r = 0`, and
/// `Re i_r = √(2 / Re z_L)` so that the receiver absorbs unit power.
pub fn build_receiver_constraints(z: &ImpedanceMatrix) -> Result<Vec<AffineRow>> {
    let load = z.receiver_load();
    if !(load.re > 0.0) {
        return Err(Error::NonPhysicalReceiver(load.re));
    }
    let m = z.port_count();
    let r = z.receiver();
    let mut g: Vec<Complex64> = z.entries().row(r).iter().copied().collect();
    g[r] += load;
    let [a, b] = complex_rows(&g, "receiver_kvl");
    Ok(alloc::vec![
        a,
        b,
        unit_row(2 * m, r + m, 0.0, "receiver_current.im".into()),
        unit_row(2 * m, r, libm::sqrt(2.0 / load.re), "receiver_current.re".into()),
    ])
}

fn element_port(z: &ImpedanceMatrix, element: usize) -> Result<usize> {
    z.port_of_element(element)
        .ok_or_else(|| Error::InvalidConfig(format!("element {element} has no port in the impedance matrix")))
}

/// Zero-power forms (one per degree of freedom, in [`SurfaceConfig::dofs`] order) and the
/// affine rows of open, shorted and clustered elements.
pub fn build_config_constraints(z: &ImpedanceMatrix, config: &SurfaceConfig) -> Result<(Vec<PowerForm>, Vec<AffineRow>)> {
    config.validate()?;
    let surface = z.surface_ports().len();
    if config.len() != surface {
        return Err(Error::DimensionMismatch {
            expected: surface,
            found: config.len(),
        });
    }
    let m = z.port_count();
    let mut forms = Vec::new();
    let mut rows = Vec::new();
    for dof in config.dofs() {
        let ports = dof
            .members()
            .iter()
            .map(|&e| element_port(z, e))
            .collect::<Result<Vec<_>>>()?;
        forms.push(cluster_power_form(z, &ports)?);
        if let Dof::Cluster { id, members } = &dof {
            let lead = z.entries().row(ports[0]);
            for (k, &p) in ports.iter().enumerate().skip(1) {
                let g: Vec<Complex64> = z.entries().row(p).iter().zip(lead.iter()).map(|(a, b)| a - b).collect();
                rows.extend(complex_rows(&g, &format!("cluster{id}.v{}", members[k])));
            }
        }
    }
    for (e, state) in config.states.iter().enumerate() {
        match state {
            ElementState::Open => {
                let p = element_port(z, e)?;
                rows.push(unit_row(2 * m, p, 0.0, format!("open{e}.re")));
                rows.push(unit_row(2 * m, p + m, 0.0, format!("open{e}.im")));
            }
            ElementState::Shorted => {
                let p = element_port(z, e)?;
                let g: Vec<Complex64> = z.entries().row(p).iter().copied().collect();
                rows.extend(complex_rows(&g, &format!("short{e}")));
            }
            ElementState::Tunable | ElementState::Cluster(_) => {}
        }
    }
    Ok((forms, rows))
}

/// Indices of rows that are linearly dependent on earlier rows (Gram-Schmidt with
/// re-orthogonalization).
pub fn dependent_rows(rows: &[AffineRow]) -> Vec<usize> {
    let mut basis: Vec<RVector> = Vec::new();
    let mut dependent = Vec::new();
    for (k, row) in rows.iter().enumerate() {
        let norm = row.coeffs.norm();
        if norm == 0.0 {
            dependent.push(k);
            continue;
        }
        let mut v = &row.coeffs / norm;
        for _ in 0..2 {
            for q in &basis {
                let d = q.dot(&v);
                v.axpy(-d, q, 1.0);
            }
        }
        let r = v.norm();
        if r <= RANK_TOLERANCE {
            dependent.push(k);
        } else {
            basis.push(v / r);
        }
    }
    dependent
}

#[derive(Debug, Clone, PartialEq)]
pub struct QcqpProblem {
    /// `2M` for `M` matrix ports.
    pub dim: usize,
    /// `Σ_n Q_n = blockdiag(Re Z̃, Re Z̃)`; the transmitted power is `½ cᵀ(objective)c`.
    pub objective: RMatrix,
    /// `½ cᵀQc = 0`, one per degree of freedom.
    pub power_constraints: Vec<PowerForm>,
    pub affine: Vec<AffineRow>,
    pub dofs: Vec<Dof>,
    pub base_impedance: f64,
    /// `Z / base_impedance`; currents `c` live in this normalization.
    pub scaled: ImpedanceMatrix,
}

impl QcqpProblem {
    pub fn objective_value(&self, c: &RVector) -> f64 {
        0.5 * c.dot(&(&self.objective * c))
    }

    pub fn max_power_violation(&self, c: &RVector) -> f64 {
        self.power_constraints
            .iter()
            .map(|f| f.power(c).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_affine_violation(&self, c: &RVector) -> f64 {
        self.affine.iter().map(|r| r.residual(c).abs()).fold(0.0, f64::max)
    }

    /// Physical currents (amperes, 1 W received) for lifted scaled currents.
    pub fn physical_currents(&self, c: &RVector) -> Result<CVector> {
        Ok(unlift(c)? / Complex64::new(libm::sqrt(self.base_impedance), 0.0))
    }
}

/// Builds the lifted problem for `config` on the unreduced network `z`.
pub fn assemble_qcqp(z: &ImpedanceMatrix, config: &SurfaceConfig) -> Result<QcqpProblem> {
    let scaled = z.scaled(1.0 / BASE_IMPEDANCE);
    let mut affine = build_receiver_constraints(&scaled)?;
    let (power_constraints, rows) = build_config_constraints(&scaled, config)?;
    affine.extend(rows);
    let dependent = dependent_rows(&affine);
    if !dependent.is_empty() {
        return Err(Error::RankDeficient(dependent));
    }
    let objective = lift_block_diagonal(&crate::linalg::sym(&real_part(scaled.entries())));
    Ok(QcqpProblem {
        dim: 2 * scaled.port_count(),
        objective,
        power_constraints,
        affine,
        dofs: config.dofs(),
        base_impedance: BASE_IMPEDANCE,
        scaled,
    })
}
