//! Semidefinite relaxation of the lifted power-flow problem and recovery of the load
//! reactances from its solution.
//!
//! The bordered variable is `X = [[C, c], [cᵀ, 1]]` of size `2M + 1`; `C` stands in for `ccᵀ`.
//! Power constraints become `tr(Q C) = 0`, affine rows act on the border column.

use alloc::vec::Vec;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{cnorm2, CVector, RMatrix, RVector};
use crate::network::{efficiency_gradient, loaded_solve, Dof, ImpedanceMatrix, SurfaceConfig};
use crate::qcqp::{assemble_qcqp, real_lift, QcqpProblem};
use crate::sdp::{solve_sdp, SdpOptions, SdpProblem, SdpStatus, SdpVector, SymMatrix};

/// Largest tightness measure accepted as a rank-one solution.
pub const TIGHTNESS_THRESHOLD: f64 = 1e-5;

/// Relative current magnitude below which a port is reported as open (infinite reactance).
pub const OPEN_CURRENT_RATIO: f64 = 1e-12;

fn pad(v: &RVector, len: usize) -> RVector {
    let mut out = RVector::zeros(len);
    out.rows_mut(0, v.len()).copy_from(v);
    out
}

/// Relaxation of `q`. Constraint order: the corner `X_DD = 1`, then one trace constraint per
/// power form, then one border constraint per affine row.
pub fn lift(q: &QcqpProblem) -> SdpProblem {
    let d = q.dim + 1;
    let corner = d - 1;
    let mut cost = RMatrix::zeros(d, d);
    cost.view_mut((0, 0), (q.dim, q.dim)).copy_from(&(&q.objective * 0.5));

    let mut constraints = Vec::with_capacity(1 + q.power_constraints.len() + q.affine.len());
    let mut rhs = Vec::with_capacity(constraints.capacity());
    constraints.push(SymMatrix::entry(d, corner, corner));
    rhs.push(1.0);
    for f in &q.power_constraints {
        let mut a = SymMatrix::zeros(d);
        for (k, w) in &f.terms {
            a.push(SdpVector::Unit(*k), SdpVector::Dense(pad(w, d)), 1.0);
        }
        constraints.push(a);
        rhs.push(0.0);
    }
    for row in &q.affine {
        constraints.push(SymMatrix::rank_two(
            d,
            SdpVector::Unit(corner),
            SdpVector::Dense(pad(&row.coeffs, d)),
        ));
        rhs.push(row.rhs);
    }
    SdpProblem {
        cost,
        rhs: RVector::from_vec(rhs),
        constraints,
    }
}

/// Relaxation restricted to the affine solution set `c = c0 + N t` (`N` an orthonormal
/// null-space basis of the affine rows). The bordered variable of the full lift is
/// `X = P Y Pᵀ` with `P = [[N, c0], [0, 1]]`, so the affine rows hold exactly and `C - ccᵀ`
/// has no component along them. Constraints: the corner of `Y`, then one per power form.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedLift {
    pub sdp: SdpProblem,
    /// `P`, of size `(2M + 1) × (k + 1)`.
    pub basis: RMatrix,
    /// The SDP cost is the lifted objective divided by this factor.
    pub objective_scale: f64,
}

impl ReducedLift {
    /// Full bordered matrix `P Y Pᵀ`.
    pub fn expand(&self, y: &RMatrix) -> RMatrix {
        &self.basis * y * self.basis.transpose()
    }
}

/// Orthonormal basis of the null space of the affine rows and the least-norm solution.
fn affine_parametrization(q: &QcqpProblem) -> Result<(RMatrix, RVector)> {
    let n = q.dim;
    let r = q.affine.len();
    if r == 0 {
        return Ok((RMatrix::identity(n, n), RVector::zeros(n)));
    }
    let a = RMatrix::from_fn(r, n, |i, j| q.affine[i].coeffs[j]);
    let b = RVector::from_iterator(r, q.affine.iter().map(|row| row.rhs));
    let svd = a.svd(true, true);
    let v_t = svd.v_t.as_ref().ok_or(Error::Singular("affine rows"))?;
    let smax = svd.singular_values.max();
    let tol = 1e-10 * smax.max(1.0);
    let rank = svd.singular_values.iter().filter(|s| **s > tol).count();
    if rank < r {
        return Err(Error::RankDeficient(crate::qcqp::dependent_rows(&q.affine)));
    }
    let c0 = svd.solve(&b, tol).map_err(|_| Error::Singular("affine rows"))?;
    // complement of the row space
    let row_space = v_t.rows(0, rank).transpose();
    let projector = RMatrix::identity(n, n) - &row_space * row_space.transpose();
    let eig = crate::linalg::sym(&projector).symmetric_eigen();
    let mut cols: Vec<usize> = (0..n).filter(|&k| eig.eigenvalues[k] > 0.5).collect();
    cols.sort_unstable();
    if cols.len() != n - rank {
        return Err(Error::Singular("affine null space"));
    }
    let basis = RMatrix::from_fn(n, cols.len(), |i, j| eig.eigenvectors[(i, cols[j])]);
    Ok((basis, c0))
}

/// A feasible point of `q` built from the network solved with all reactances zero, used
/// only to scale the reduced problem. `None` when no such point satisfies the rows.
pub fn feasible_point(z: &ImpedanceMatrix, config: &SurfaceConfig, q: &QcqpProblem) -> Option<RVector> {
    let zeros = alloc::vec![0.0; config.dofs().len()];
    let sol = loaded_solve(z, config, &zeros).ok()?;
    let c1 = real_lift(&sol.currents);
    let c2 = real_lift(&sol.currents.map(|v| v * Complex64::i()));
    if c1.len() != q.dim {
        return None;
    }
    let r = q.affine.len();
    let m = RMatrix::from_fn(r, 2, |i, j| q.affine[i].coeffs.dot(if j == 0 { &c1 } else { &c2 }));
    let b = RVector::from_iterator(r, q.affine.iter().map(|row| row.rhs));
    let ab = m.clone().svd(true, true).solve(&b, 1e-14).ok()?;
    let c = c1 * ab[0] + c2 * ab[1];
    let resid = (&m * &ab - &b).amax();
    (resid <= 1e-8 * (1.0 + b.amax()) && c.iter().all(|v| v.is_finite())).then_some(c)
}

/// Reduced relaxation of `q`. When `z` and `config` yield a feasible point `c_f`, the
/// null-space coordinates are scaled so that `c_f` has unit norm in them and the cost so
/// that `c_f` has unit objective; far-field links otherwise need transmit currents
/// orders of magnitude above the unit corner.
pub fn lift_reduced(q: &QcqpProblem) -> Result<ReducedLift> {
    lift_reduced_scaled(q, None)
}

pub fn lift_reduced_scaled(q: &QcqpProblem, feasible: Option<&RVector>) -> Result<ReducedLift> {
    let (mut null, c0) = affine_parametrization(q)?;
    let n = q.dim;
    let k = null.ncols();
    let mut objective_scale = 1.0;
    if let Some(cf) = feasible {
        let sigma = (null.transpose() * (cf - &c0)).norm();
        if sigma.is_finite() && sigma > 1.0 {
            null *= sigma;
        }
        let f = 0.5 * cf.dot(&(&q.objective * cf));
        if f.is_finite() && f > 0.0 {
            objective_scale = f;
        }
    }
    let mut p = RMatrix::zeros(n + 1, k + 1);
    p.view_mut((0, 0), (n, k)).copy_from(&null);
    p.view_mut((0, k), (n, 1)).copy_from(&c0);
    p[(n, k)] = 1.0;
    let d = k + 1;
    let top = p.rows(0, n);
    let cost = top.transpose() * (&q.objective * (0.5 / objective_scale)) * top;

    let mut constraints = Vec::with_capacity(1 + q.power_constraints.len());
    let mut rhs = Vec::with_capacity(constraints.capacity());
    constraints.push(SymMatrix::entry(d, k, k));
    rhs.push(1.0);
    for f in &q.power_constraints {
        let mut a = SymMatrix::zeros(d);
        for (row, w) in &f.terms {
            let u = top.row(*row).transpose();
            a.push(SdpVector::Dense(u), SdpVector::Dense(top.transpose() * w), 1.0);
        }
        constraints.push(a);
        rhs.push(0.0);
    }
    Ok(ReducedLift {
        sdp: SdpProblem {
            cost: crate::linalg::sym(&cost),
            rhs: RVector::from_vec(rhs),
            constraints,
        },
        basis: p,
        objective_scale,
    })
}

/// Relative eigenvalue below which a direction of an SDP solution counts as absent.
const RANK_TOLERANCE: f64 = 1e-8;
/// Relative singular value below which a face direction counts as exact.
const FACE_TOLERANCE: f64 = 1e-5;

/// Moves an optimal `y` along its optimal face towards lower rank. Interior-point methods
/// return the relative interior of the face, so a face holding several rank-one optima
/// (mirror-symmetric surfaces, for one) comes back as their mixture. A symmetric `W` on
/// the range of `y` with `⟨A_k, V W Vᵀ⟩ = 0` for every constraint and the cost keeps the
/// point feasible and optimal; stepping to the PSD boundary drops the rank by at least one.
/// Returns the reduced matrix and the number of steps taken.
pub fn reduce_rank(sdp: &SdpProblem, y: &RMatrix) -> (RMatrix, usize) {
    let mut y = crate::linalg::sym(y);
    let mut steps = 0;
    let norms = crate::sdp::row_norms(sdp);
    let infeas = |y: &RMatrix| crate::sdp::primal_measure(&(&sdp.rhs - sdp.apply(y)), &sdp.rhs, &norms);
    let limit = (10.0 * infeas(&y)).max(1e-9);
    let objective = sdp.cost.dot(&y);
    loop {
        let eig = y.clone().symmetric_eigen();
        let lmax = eig.eigenvalues.max();
        if !(lmax > 0.0) {
            return (y, steps);
        }
        let keep: Vec<usize> = (0..y.nrows()).filter(|&k| eig.eigenvalues[k] > RANK_TOLERANCE * lmax).collect();
        let r = keep.len();
        let v = RMatrix::from_fn(y.nrows(), r, |i, j| eig.eigenvectors[(i, keep[j])]);
        let lambda = RVector::from_iterator(r, keep.iter().map(|&k| eig.eigenvalues[k]));
        // drop the numerically absent part
        y = &v * RMatrix::from_diagonal(&lambda) * v.transpose();
        if r <= 1 {
            return (y, steps);
        }
        let pairs: Vec<(usize, usize)> = (0..r).flat_map(|a| (a..r).map(move |b| (a, b))).collect();
        let mut m = RMatrix::zeros(sdp.constraints.len() + 1, pairs.len());
        for (j, &(a, b)) in pairs.iter().enumerate() {
            let mut w = RMatrix::zeros(r, r);
            w[(a, b)] = 1.0;
            w[(b, a)] = 1.0;
            let d = &v * w * v.transpose();
            for (k, c) in sdp.constraints.iter().enumerate() {
                m[(k, j)] = c.inner(&d);
            }
            m[(sdp.constraints.len(), j)] = sdp.cost.dot(&d);
        }
        // smallest right singular vector of M (rows may be fewer than columns)
        let gram = m.transpose() * &m;
        let ge = gram.symmetric_eigen();
        let kmin = ge.eigenvalues.imin();
        let smin = libm::sqrt(ge.eigenvalues[kmin].max(0.0));
        let smax = libm::sqrt(ge.eigenvalues.max().max(0.0));
        if !(smin <= FACE_TOLERANCE * smax) {
            return (y, steps);
        }
        let mut w = RMatrix::zeros(r, r);
        for (j, &(a, b)) in pairs.iter().enumerate() {
            w[(a, b)] += ge.eigenvectors[(j, kmin)];
            if a != b {
                w[(b, a)] += ge.eigenvectors[(j, kmin)];
            }
        }
        // largest t with Λ + tW ⪰ 0, via the eigenvalues of Λ^{-1/2} W Λ^{-1/2}
        let inv_sqrt = lambda.map(|l| 1.0 / libm::sqrt(l));
        let scaled = RMatrix::from_fn(r, r, |i, j| inv_sqrt[i] * w[(i, j)] * inv_sqrt[j]);
        let mu = scaled.symmetric_eigen().eigenvalues;
        let (lo, hi) = (mu.min(), mu.max());
        // either sign of W stays on the face; take the shorter move
        let t = if -lo >= hi { -1.0 / lo } else { -1.0 / hi };
        if !t.is_finite() {
            return (y, steps);
        }
        let inner = RMatrix::from_diagonal(&lambda) + w * t;
        let next = crate::linalg::sym(&(&v * inner * v.transpose()));
        // a direction that is only approximately on the face must not cost accuracy
        if infeas(&next) > limit || (sdp.cost.dot(&next) - objective).abs() > 1e-9 * (1.0 + objective.abs()) {
            return (y, steps);
        }
        y = next;
        steps += 1;
        if steps > y.nrows() {
            return (y, steps);
        }
    }
}

fn split(x: &RMatrix) -> (RMatrix, RVector) {
    let n = x.nrows() - 1;
    (x.view((0, 0), (n, n)).into_owned(), x.view((0, n), (n, 1)).column(0).into_owned())
}

/// `‖C - ccᵀ‖_F / cᵀc` for the bordered matrix `x`.
pub fn tightness(x: &RMatrix) -> Result<f64> {
    let (c_mat, c) = split(x);
    let cc = c.dot(&c);
    if cc == 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok(crate::linalg::frobenius(&(c_mat - &c * c.transpose())) / cc)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Extracted {
    pub c: RVector,
    pub tightness: f64,
    pub tight: bool,
}

/// Border column when the relaxation is tight; otherwise the leading eigenvector of `X`,
/// scaled to satisfy the receiver normalization row.
pub fn extract(q: &QcqpProblem, x: &RMatrix) -> Result<Extracted> {
    let eps = tightness(x)?;
    if eps <= TIGHTNESS_THRESHOLD {
        return Ok(Extracted {
            c: split(x).1,
            tightness: eps,
            tight: true,
        });
    }
    let eig = x.clone().symmetric_eigen();
    let k = eig.eigenvalues.imax();
    let v = eig.eigenvectors.column(k).into_owned();
    let v = v.rows(0, q.dim).into_owned();
    let norm_row = q
        .affine
        .iter()
        .find(|r| r.rhs != 0.0)
        .ok_or(Error::ZeroNorm)?;
    let denom = norm_row.coeffs.dot(&v);
    if denom == 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok(Extracted {
        c: v * (norm_row.rhs / denom),
        tightness: eps,
        tight: false,
    })
}

/// Reactances `x = -Im(v / i)` per degree of freedom of `q`, evaluated on the original
/// network `z`. Clusters use the shared voltage over the summed member current.
pub fn recover(z: &ImpedanceMatrix, q: &QcqpProblem, c: &RVector) -> Result<Vec<f64>> {
    let i = q.physical_currents(c)?;
    if i.len() != z.port_count() {
        return Err(Error::DimensionMismatch {
            expected: z.port_count(),
            found: i.len(),
        });
    }
    let v = z.entries() * &i;
    let scale = cnorm2(i.as_slice());
    q.dofs
        .iter()
        .map(|dof| {
            let ports = dof
                .members()
                .iter()
                .map(|&e| {
                    z.port_of_element(e)
                        .ok_or_else(|| Error::InvalidConfig(alloc::format!("element {e} missing")))
                })
                .collect::<Result<Vec<_>>>()?;
            let current: Complex64 = ports.iter().map(|&p| i[p]).sum();
            if current.norm() < OPEN_CURRENT_RATIO * scale {
                return Ok(f64::INFINITY);
            }
            Ok(-(v[ports[0]] / current).im)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdrOutcome {
    /// Efficiency achieved by the recovered reactances (rank-one optimum when tight).
    pub eta: f64,
    /// Relaxation optimum: minimum transmit power in watts per watt received.
    pub p_t_min: f64,
    pub reactances: Vec<f64>,
    pub tightness: f64,
    pub tight: bool,
    pub iterations: usize,
    pub status: SdpStatus,
    /// Physical port currents of the extracted solution (1 W received).
    pub currents: CVector,
    /// Efficiency of the recovered reactances re-solved as a loaded network.
    pub eta_round_trip: f64,
    /// The relaxation was not tight and the extracted reactances were improved by
    /// [`local_ascent_reactances`].
    pub local_ascent: bool,
}

/// Builds, relaxes and solves the problem for `config`, then recovers the reactances.
pub fn solve_sdr(z: &ImpedanceMatrix, config: &SurfaceConfig, options: &SdpOptions) -> Result<SdrOutcome> {
    if config.is_reference() {
        return Err(Error::InvalidConfig("configuration has no tunable reactances".into()));
    }
    let q = assemble_qcqp(z, config)?;
    let reduced = lift_reduced_scaled(&q, feasible_point(z, config, &q).as_ref())?;
    let sol = solve_sdp(&reduced.sdp, options)?;
    if sol.status == SdpStatus::NumericalFailure {
        return Err(Error::SolverFailed(alloc::format!(
            "{} after {} iterations (gap {:e})",
            sol.status.as_str(),
            sol.iterations,
            sol.gap
        )));
    }
    let (y, _) = reduce_rank(&reduced.sdp, &sol.x);
    let ext = extract(&q, &reduced.expand(&y))?;
    let mut reactances = recover(z, &q, &ext.c)?;
    let mut local_ascent = false;
    if !ext.tight {
        let mut candidates = Vec::new();
        for c in randomized_candidates(&reduced, &y, RANDOMIZATION_SAMPLES) {
            if let Ok(x) = recover(z, &q, &c) {
                candidates.push(x);
            }
        }
        let mut scored: Vec<(f64, Vec<f64>)> = candidates
            .into_iter()
            .filter_map(|x| loaded_solve(z, config, &x).ok().map(|r| (r.eta, x)))
            .filter(|(eta, _)| eta.is_finite())
            .collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0));
        // the leading-eigenvector extraction is always refined
        let starts = core::iter::once(reactances.clone()).chain(scored.into_iter().map(|s| s.1).take(ASCENT_STARTS - 1));
        let mut best = (f64::NEG_INFINITY, reactances.clone());
        for x in starts {
            let refined = local_ascent_reactances(z, config, &x, LOCAL_ASCENT_ITERS)?;
            if refined.0 > best.0 {
                best = refined;
            }
        }
        local_ascent = best.1 != reactances;
        reactances = best.1;
    }
    let round_trip = loaded_solve(z, config, &reactances)?;
    // the dual objective bounds the minimum from below, so 1 / p_t_min never undershoots
    // the best achievable efficiency
    let p_t_min = sol.dual_obj * reduced.objective_scale;
    let eta = if ext.tight { 1.0 / p_t_min } else { round_trip.eta };
    Ok(SdrOutcome {
        eta,
        p_t_min,
        reactances,
        tightness: ext.tightness,
        tight: ext.tight,
        iterations: sol.iterations,
        status: sol.status,
        currents: q.physical_currents(&ext.c)?,
        eta_round_trip: round_trip.eta,
        local_ascent,
    })
}

/// Iteration cap of the local ascent applied to non-tight extractions.
pub const LOCAL_ASCENT_ITERS: usize = 300;
/// Gaussian samples drawn from a non-tight relaxation.
pub const RANDOMIZATION_SAMPLES: usize = 64;
/// Starts refined by local ascent: the eigenvector extraction plus the best samples.
pub const ASCENT_STARTS: usize = 3;

/// Affine-feasible points `c` drawn from `N(0, Y)` in the reduced coordinates and scaled
/// onto the unit border. The stream is seeded by a constant, so results are reproducible.
pub fn randomized_candidates(reduced: &ReducedLift, y: &RMatrix, count: usize) -> Vec<RVector> {
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};
    let eig = crate::linalg::sym(y).symmetric_eigen();
    let k = y.nrows();
    let top = eig.eigenvalues.amax();
    let factor = RMatrix::from_fn(k, k, |i, j| {
        let l = eig.eigenvalues[j];
        if l > 1e-12 * top { eig.eigenvectors[(i, j)] * libm::sqrt(l) } else { 0.0 }
    });
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed);
    let dim = reduced.basis.nrows() - 1;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let g = RVector::from_iterator(k, (0..k).map(|_| StandardNormal.sample(&mut rng)));
        let full = &reduced.basis * (&factor * g);
        let border = full[dim];
        if border.abs() > 1e-12 * full.amax() {
            out.push(full.rows(0, dim) / border);
        }
    }
    out
}

fn reactance_scale(z: &ImpedanceMatrix) -> f64 {
    let ports = z.surface_ports();
    let mean = ports.iter().map(|&p| z.entries()[(p, p)].norm()).sum::<f64>() / ports.len().max(1) as f64;
    if mean > 0.0 { mean } else { crate::qcqp::BASE_IMPEDANCE }
}

/// Quasi-Newton ascent of η from the reactances `x0`, in `θ = atan(x / s)` so that the
/// search stays bounded. Open-circuited (infinite) entries are held fixed. Returns the
/// best efficiency and reactances found; η never falls below its value at `x0`.
pub fn local_ascent_reactances(
    z: &ImpedanceMatrix,
    config: &SurfaceConfig,
    x0: &[f64],
    max_iter: usize,
) -> Result<(f64, Vec<f64>)> {
    let s = reactance_scale(z);
    let free: Vec<usize> = (0..x0.len()).filter(|&d| x0[d].is_finite()).collect();
    let k = free.len();
    let to_x = |theta: &RVector| -> Vec<f64> {
        let mut x = x0.to_vec();
        for (a, &d) in free.iter().enumerate() {
            x[d] = s * libm::tan(theta[a]);
        }
        x
    };
    // objective -ln η and its gradient in θ
    let eval = |theta: &RVector| -> Option<(f64, RVector)> {
        let (eta, g) = efficiency_gradient(z, config, &to_x(theta)).ok()?;
        if !(eta > 0.0) {
            return None;
        }
        let grad = RVector::from_iterator(
            k,
            free.iter().enumerate().map(|(a, &d)| {
                let t = libm::tan(theta[a]);
                -g[d] / eta * s * (1.0 + t * t)
            }),
        );
        Some((-libm::log(eta), grad))
    };
    let mut theta = RVector::from_iterator(k, free.iter().map(|&d| libm::atan(x0[d] / s)));
    let Some((mut f, mut g)) = eval(&theta) else {
        let eta = loaded_solve(z, config, x0)?.eta;
        return Ok((eta, x0.to_vec()));
    };
    if k == 0 {
        return Ok((-f, x0.to_vec()));
    }
    let mut h = RMatrix::identity(k, k);
    let mut first = true;
    for _ in 0..max_iter {
        let mut dir = -(&h * &g);
        let mut slope = g.dot(&dir);
        if !(slope < 0.0) {
            h = RMatrix::identity(k, k);
            first = true;
            dir = -g.clone();
            slope = g.dot(&dir);
        }
        // keep a single step below a quarter turn of θ
        let max_step = dir.amax();
        let mut t = if max_step > 0.25 { 0.25 / max_step } else { 1.0 };
        let mut accepted = None;
        for _ in 0..40 {
            let cand = &theta + &dir * t;
            if let Some((fc, gc)) = eval(&cand) {
                if fc <= f + 1e-4 * t * slope {
                    accepted = Some((cand, fc, gc));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((next, fn_, gn)) = accepted else { break };
        let step = &next - &theta;
        let dg = &gn - &g;
        let sy = step.dot(&dg);
        if sy > 1e-12 * step.norm() * dg.norm() {
            if first {
                h *= sy / dg.norm_squared();
                first = false;
            }
            // BFGS update of the inverse Hessian
            let rho = 1.0 / sy;
            let hy = &h * &dg;
            let yhy = dg.dot(&hy);
            h += (&step * step.transpose()) * (rho * (1.0 + rho * yhy))
                - (&hy * step.transpose() + &step * hy.transpose()) * rho;
        }
        let improvement = f - fn_;
        theta = next;
        f = fn_;
        g = gn;
        if improvement <= 1e-15 || g.amax() <= 1e-12 {
            break;
        }
    }
    let x = to_x(&theta);
    Ok((loaded_solve(z, config, &x)?.eta, x))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    /// Grid points per degree of freedom over `θ ∈ (-π/2, π/2)`, `x = x_scale·tan θ`.
    pub grid: usize,
    pub refine_iters: usize,
    /// Number of best grid points refined independently.
    pub starts: usize,
    /// Reactance at `θ = π/4`; `None` uses the mean surface self-impedance magnitude.
    pub x_scale: Option<f64>,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            grid: 32,
            refine_iters: 400,
            starts: 8,
            x_scale: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub eta: f64,
    pub reactances: Vec<f64>,
    pub evaluations: usize,
}

/// Brute-force maximization of η over the reactances: a uniform grid in `θ` followed by
/// Nelder-Mead from each of the best grid points.
pub fn oracle_search(z: &ImpedanceMatrix, config: &SurfaceConfig, options: &OracleOptions) -> Result<OracleResult> {
    let n = config.dofs().len();
    if n == 0 {
        return Err(Error::InvalidConfig("configuration has no tunable reactances".into()));
    }
    if options.grid == 0 {
        return Err(Error::InvalidConfig("oracle grid must be non-empty".into()));
    }
    let x_scale = options.x_scale.unwrap_or_else(|| reactance_scale(z));
    let half = core::f64::consts::FRAC_PI_2;
    let to_x = |theta: &[f64]| -> Vec<f64> {
        theta
            .iter()
            .map(|t| x_scale * libm::tan(t.clamp(-half + 1e-9, half - 1e-9)))
            .collect()
    };
    let mut evaluations = 0usize;
    let mut eval = |theta: &[f64]| -> f64 {
        evaluations += 1;
        loaded_solve(z, config, &to_x(theta)).map_or(f64::NEG_INFINITY, |r| r.eta)
    };

    let g = options.grid;
    let step = core::f64::consts::PI / g as f64;
    let total = g.checked_pow(n as u32).ok_or_else(|| Error::InvalidConfig("oracle grid too large".into()))?;
    let mut scored: Vec<(f64, Vec<f64>)> = Vec::with_capacity(total);
    for idx in 0..total {
        let mut rem = idx;
        let theta: Vec<f64> = (0..n)
            .map(|_| {
                let k = rem % g;
                rem /= g;
                -half + (k as f64 + 0.5) * step
            })
            .collect();
        scored.push((eval(&theta), theta));
    }
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    scored.truncate(options.starts.max(1));

    let mut best = scored[0].clone();
    for (e0, start) in scored {
        let (f, theta) = nelder_mead(|t| -eval(t), &start, 0.5 * step, options.refine_iters);
        let candidate = if -f >= e0 { (-f, theta) } else { (e0, start) };
        if candidate.0 > best.0 {
            best = candidate;
        }
    }
    let (eta, theta) = best;
    Ok(OracleResult {
        eta,
        reactances: to_x(&theta),
        evaluations,
    })
}

/// Minimizes `f` from `start` with an initial simplex of edge `scale`. Returns the best
/// value and point; the best value never increases with `iters`.
fn nelder_mead(mut f: impl FnMut(&[f64]) -> f64, start: &[f64], scale: f64, iters: usize) -> (f64, Vec<f64>) {
    let n = start.len();
    let mut simplex: Vec<(f64, Vec<f64>)> = Vec::with_capacity(n + 1);
    simplex.push((f(start), start.to_vec()));
    for k in 0..n {
        let mut p = start.to_vec();
        p[k] += scale;
        simplex.push((f(&p), p));
    }
    let order = |s: &mut Vec<(f64, Vec<f64>)>| s.sort_by(|a, b| a.0.total_cmp(&b.0));
    order(&mut simplex);
    let comb = |a: &[f64], b: &[f64], t: f64| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect() };
    for _ in 0..iters {
        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|p| p.1[j]).sum::<f64>() / n as f64)
            .collect();
        let worst = simplex[n].clone();
        let reflected = comb(&centroid, &worst.1, -1.0);
        let fr = f(&reflected);
        if fr < simplex[0].0 {
            let expanded = comb(&centroid, &worst.1, -2.0);
            let fe = f(&expanded);
            simplex[n] = if fe < fr { (fe, expanded) } else { (fr, reflected) };
        } else if fr < simplex[n - 1].0 {
            simplex[n] = (fr, reflected);
        } else {
            let contracted = if fr < worst.0 {
                comb(&centroid, &reflected, 0.5)
            } else {
                comb(&centroid, &worst.1, 0.5)
            };
            let fc = f(&contracted);
            if fc < worst.0.min(fr) {
                simplex[n] = (fc, contracted);
            } else {
                let best = simplex[0].1.clone();
                for p in simplex.iter_mut().skip(1) {
                    let q = comb(&best, &p.1, 0.5);
                    *p = (f(&q), q);
                }
            }
        }
        order(&mut simplex);
    }
    simplex.swap_remove(0)
}

/// Degrees of freedom of `config` with their matrix ports in `z`.
pub fn dof_ports(z: &ImpedanceMatrix, config: &SurfaceConfig) -> Result<Vec<(Dof, Vec<usize>)>> {
    config
        .dofs()
        .into_iter()
        .map(|d| {
            let ports = d
                .members()
                .iter()
                .map(|&e| z.port_of_element(e).ok_or(Error::NotSurfacePort(e)))
                .collect::<Result<Vec<_>>>()?;
            Ok((d, ports))
        })
        .collect()
}
