//! Infeasible-start primal-dual path following with the HKM search direction and a
//! Mehrotra predictor-corrector step.

use alloc::vec::Vec;
use nalgebra::Cholesky;

use super::{
    add_scaled, primal_measure, row_norms, IterationLog, SdpOptions, SdpProblem, SdpSolution, SdpStatus, SdpVector,
};
use crate::error::{Error, Result};
use crate::linalg::{frobenius, sym, RMatrix, RVector};

/// Flattened constraint data. Column ids below `dim` are unit vectors; the rest index
/// the columns of `dense`.
struct Operator {
    dim: usize,
    dense: RMatrix,
    /// (u, w, coef) per term
    terms: Vec<(usize, usize, f64)>,
    /// term ranges per constraint
    ranges: Vec<(usize, usize)>,
}

/// `VᵀMV` for `V = [I, dense]`, stored in blocks.
struct Gram {
    dim: usize,
    m: RMatrix,
    md: RMatrix,
    dmd: RMatrix,
}

impl Gram {
    fn new(op: &Operator, m: &RMatrix) -> Self {
        let md = m * &op.dense;
        let dmd = op.dense.transpose() * &md;
        Self {
            dim: op.dim,
            m: m.clone(),
            md,
            dmd,
        }
    }

    #[inline]
    fn get(&self, a: usize, b: usize) -> f64 {
        let n = self.dim;
        match (a < n, b < n) {
            (true, true) => self.m[(a, b)],
            (true, false) => self.md[(a, b - n)],
            (false, true) => self.md[(b, a - n)],
            (false, false) => self.dmd[(a - n, b - n)],
        }
    }
}

fn resolve<'a>(v: &'a SdpVector, dim: usize, columns: &mut Vec<&'a RVector>) -> Result<usize> {
    match v {
        SdpVector::Unit(i) if *i < dim => Ok(*i),
        SdpVector::Unit(i) => Err(Error::DimensionMismatch {
            expected: dim,
            found: *i + 1,
        }),
        SdpVector::Dense(d) if d.len() == dim => {
            columns.push(d);
            Ok(dim + columns.len() - 1)
        }
        SdpVector::Dense(d) => Err(Error::DimensionMismatch {
            expected: dim,
            found: d.len(),
        }),
    }
}

impl Operator {
    fn new(problem: &SdpProblem) -> Result<Self> {
        let dim = problem.block_dim();
        let mut columns: Vec<&RVector> = Vec::new();
        let mut terms = Vec::new();
        let mut ranges = Vec::new();
        for a in &problem.constraints {
            if a.dim != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: a.dim,
                });
            }
            let start = terms.len();
            for t in &a.terms {
                let u = resolve(&t.u, dim, &mut columns)?;
                let w = resolve(&t.w, dim, &mut columns)?;
                terms.push((u, w, t.coef));
            }
            ranges.push((start, terms.len()));
        }
        let mut dense = RMatrix::zeros(dim, columns.len());
        for (j, c) in columns.iter().enumerate() {
            dense.set_column(j, c);
        }
        Ok(Self {
            dim,
            dense,
            terms,
            ranges,
        })
    }

    /// `(⟨A_k, M⟩)_k` for symmetric `M`.
    fn apply(&self, m: &RMatrix) -> RVector {
        let g = Gram::new(self, m);
        RVector::from_iterator(
            self.ranges.len(),
            self.ranges.iter().map(|&(s, e)| {
                self.terms[s..e]
                    .iter()
                    .map(|&(u, w, c)| c * g.get(u, w))
                    .sum::<f64>()
            }),
        )
    }

    /// Schur complement `M_kl = tr(A_k X A_l Z)`.
    fn schur(&self, x: &RMatrix, z: &RMatrix) -> RMatrix {
        let gx = Gram::new(self, x);
        let gz = Gram::new(self, z);
        let m = self.ranges.len();
        let mut out = RMatrix::zeros(m, m);
        for k in 0..m {
            let (ks, ke) = self.ranges[k];
            for l in k..m {
                let (ls, le) = self.ranges[l];
                let mut acc = 0.0;
                for &(us, ws, cs) in &self.terms[ks..ke] {
                    for &(ut, wt, ct) in &self.terms[ls..le] {
                        acc += cs
                            * ct
                            * (gx.get(ws, ut) * gz.get(wt, us)
                                + gx.get(ws, wt) * gz.get(ut, us)
                                + gx.get(us, ut) * gz.get(wt, ws)
                                + gx.get(us, wt) * gz.get(ut, ws));
                    }
                }
                out[(k, l)] = 0.25 * acc;
                out[(l, k)] = 0.25 * acc;
            }
        }
        out
    }
}

enum Factor {
    Cholesky(Cholesky<f64, nalgebra::Dyn>),
    Lu(nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
}

impl Factor {
    fn new(m: RMatrix) -> Option<Self> {
        match m.clone().cholesky() {
            Some(c) => Some(Factor::Cholesky(c)),
            None => {
                let lu = m.lu();
                if lu.is_invertible() {
                    Some(Factor::Lu(lu))
                } else {
                    None
                }
            }
        }
    }

    fn solve(&self, m: &RMatrix, rhs: &RVector) -> Option<RVector> {
        let once = |r: &RVector| match self {
            Factor::Cholesky(c) => Some(c.solve(r)),
            Factor::Lu(l) => l.solve(r),
        };
        // one step of iterative refinement
        let mut x = once(rhs)?;
        let r = rhs - m * &x;
        x += once(&r)?;
        if x.iter().all(|v| v.is_finite()) {
            Some(x)
        } else {
            None
        }
    }
}

/// Largest `α` with `M + α D ⪰ 0`, given the Cholesky factor of `M ≻ 0`.
fn max_step(chol: &Cholesky<f64, nalgebra::Dyn>, d: &RMatrix) -> f64 {
    let l = chol.l_dirty();
    let Some(a) = l.solve_lower_triangular(d) else {
        return 0.0;
    };
    let Some(b) = l.solve_lower_triangular(&a.transpose()) else {
        return 0.0;
    };
    let lambda = crate::linalg::min_symmetric_eigenvalue(&sym(&b));
    if !lambda.is_finite() {
        0.0
    } else if lambda >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / lambda
    }
}

struct Direction {
    dx: RMatrix,
    dy: RVector,
    ds: RMatrix,
}

struct State<'a> {
    problem: &'a SdpProblem,
    op: Operator,
    x: RMatrix,
    y: RVector,
    s: RMatrix,
    row_norms: RVector,
    f_scale: f64,
}

#[derive(Clone, Copy)]
struct Measures {
    pobj: f64,
    dobj: f64,
    pinf: f64,
    dinf: f64,
    gap: f64,
    merit: f64,
}

impl State<'_> {
    fn primal_residual(&self, x: &RMatrix) -> RVector {
        &self.problem.rhs - self.op.apply(x)
    }

    fn dual_residual(&self, y: &RVector, s: &RMatrix) -> RMatrix {
        let mut r = &self.problem.cost - s;
        for (a, yk) in self.problem.constraints.iter().zip(y.iter()) {
            add_scaled(&mut r, a, -yk);
        }
        r
    }

    fn measures(&self, x: &RMatrix, y: &RVector, s: &RMatrix) -> Measures {
        let rp = self.primal_residual(x);
        let rd = self.dual_residual(y, s);
        let pobj = self.problem.cost.dot(x);
        let dobj = self.problem.rhs.dot(y);
        let comp = x.dot(s);
        let denom = 1.0 + pobj.abs() + dobj.abs();
        Measures {
            pobj,
            dobj,

            pinf: primal_measure(&rp, &self.problem.rhs, &self.row_norms),
            dinf: frobenius(&rd) / self.f_scale,
            gap: (pobj - dobj).abs().max(comp) / denom,
            merit: comp + rp.component_div(&self.row_norms).norm() + frobenius(&rd),
        }
    }

    /// Largest fraction-to-boundary step along `dir` that does not increase the merit,
    /// halving up to 30 times.
    fn backtrack(
        &self,
        dir: &Direction,
        chol_x: &Cholesky<f64, nalgebra::Dyn>,
        chol_s: &Cholesky<f64, nalgebra::Dyn>,
        gamma: f64,
        merit: f64,
    ) -> Option<(RMatrix, RVector, RMatrix, Measures, f64, f64)> {
        let mut alpha_p = (gamma * max_step(chol_x, &dir.dx)).min(1.0);
        let mut alpha_d = (gamma * max_step(chol_s, &dir.ds)).min(1.0);
        let try_step = |ap: f64, ad: f64| {
            let x = &self.x + &dir.dx * ap;
            let y = &self.y + &dir.dy * ad;
            let s = &self.s + &dir.ds * ad;
            let m = self.measures(&x, &y, &s);
            (m.merit <= merit && x.clone().cholesky().is_some() && s.clone().cholesky().is_some())
                .then_some((x, y, s, m, ap, ad))
        };
        if let Some(step) = try_step(alpha_p, alpha_d) {
            return Some(step);
        }
        // unequal primal and dual steps break the first-order descent of ⟨X,S⟩
        alpha_p = alpha_p.min(alpha_d);
        alpha_d = alpha_p;
        for _ in 0..30 {
            if let Some(step) = try_step(alpha_p, alpha_d) {
                return Some(step);
            }
            alpha_p *= 0.5;
            alpha_d *= 0.5;
        }
        None
    }

    /// Solves the HKM system for a given `G = (R_c - X R_d) Z`.
    fn direction(&self, factor: &Factor, schur: &RMatrix, g: &RMatrix, rp: &RVector, rd: &RMatrix, z: &RMatrix) -> Option<Direction> {
        let rhs = rp - self.op.apply(&sym(g));
        let dy = factor.solve(schur, &rhs)?;
        let mut t = RMatrix::zeros(self.op.dim, self.op.dim);
        for (a, v) in self.problem.constraints.iter().zip(dy.iter()) {
            add_scaled(&mut t, a, *v);
        }
        let ds = rd - &t;
        let dx = sym(&(g + &self.x * &t * z));
        Some(Direction { dx, dy, ds })
    }
}

fn initial_scales(problem: &SdpProblem) -> (f64, f64) {
    let n = problem.block_dim() as f64;
    let norms: Vec<f64> = problem.constraints.iter().map(|a| frobenius(&a.to_dense())).collect();
    let xi = norms
        .iter()
        .zip(problem.rhs.iter())
        .map(|(na, b)| n * (1.0 + b.abs()) / (1.0 + na))
        .fold(10f64.max(libm::sqrt(n)), f64::max);
    let zeta = norms
        .iter()
        .copied()
        .fold(10f64.max(libm::sqrt(n)).max(frobenius(&problem.cost)), f64::max);
    (xi, zeta)
}

/// Solves the primal-dual pair. Structural errors (inconsistent dimensions) are returned
/// as `Err`; numerical outcomes are reported through [`SdpSolution::status`].
pub fn solve_sdp(problem: &SdpProblem, options: &SdpOptions) -> Result<SdpSolution> {
    let n = problem.block_dim();
    if problem.cost.ncols() != n {
        return Err(Error::NotSquare {
            rows: n,
            cols: problem.cost.ncols(),
        });
    }
    if problem.rhs.len() != problem.constraints.len() {
        return Err(Error::DimensionMismatch {
            expected: problem.constraints.len(),
            found: problem.rhs.len(),
        });
    }
    let op = Operator::new(problem)?;
    let (xi, zeta) = initial_scales(problem);
    let mut st = State {
        problem,
        op,
        x: RMatrix::identity(n, n) * xi,
        y: RVector::zeros(problem.constraints.len()),
        s: RMatrix::identity(n, n) * zeta,
        row_norms: row_norms(problem),
        f_scale: 1.0 + frobenius(&problem.cost),
    };
    let cost = sym(&problem.cost);
    let mut history = Vec::new();
    let mut status = SdpStatus::MaxIter;
    let mut iterations = 0;
    let mut current = st.measures(&st.x, &st.y, &st.s);
    let (mut step_p, mut step_d) = (0.0, 0.0);

    loop {
        if options.record_history {
            history.push(IterationLog {
                iteration: iterations,
                primal_obj: current.pobj,
                dual_obj: current.dobj,
                gap: current.gap,
                primal_infeas: current.pinf,
                dual_infeas: current.dinf,
                merit: current.merit,
                step_primal: step_p,
                step_dual: step_d,
            });
        }
        if current.pinf <= options.tol_feas && current.dinf <= options.tol_feas && current.gap <= options.tol_gap {
            status = SdpStatus::Optimal;
            break;
        }
        if !(current.merit.is_finite()) {
            status = SdpStatus::NumericalFailure;
            break;
        }
        if iterations >= options.max_iter {
            break;
        }
        iterations += 1;

        let Some(chol_x) = st.x.clone().cholesky() else {
            status = SdpStatus::NumericalFailure;
            break;
        };
        let Some(chol_s) = st.s.clone().cholesky() else {
            status = SdpStatus::NumericalFailure;
            break;
        };
        let z = sym(&chol_s.inverse());
        let schur = st.op.schur(&st.x, &z);
        let Some(factor) = Factor::new(schur.clone()) else {
            status = SdpStatus::NumericalFailure;
            break;
        };
        let rp = st.primal_residual(&st.x);
        let mut rd = &cost - &st.s;
        for (a, yk) in problem.constraints.iter().zip(st.y.iter()) {
            add_scaled(&mut rd, a, -yk);
        }
        let mu = st.x.dot(&st.s) / n as f64;
        let x_rd_z = &st.x * &rd * &z;

        // predictor: R_c = -XS, so R_c Z = -X
        let g = -&st.x - &x_rd_z;
        let Some(pred) = st.direction(&factor, &schur, &g, &rp, &rd, &z) else {
            status = SdpStatus::NumericalFailure;
            break;
        };
        let ap = max_step(&chol_x, &pred.dx).min(1.0);
        let ad = max_step(&chol_s, &pred.ds).min(1.0);
        let mu_aff = (&st.x + &pred.dx * ap).dot(&(&st.s + &pred.ds * ad)) / n as f64;
        let sigma = if mu > 0.0 { libm::pow((mu_aff / mu).max(0.0), 3.0).min(1.0) } else { 0.0 };

        // corrector: R_c Z = σμZ - X - dX dS Z
        let g = &z * (sigma * mu) - &st.x - &pred.dx * &pred.ds * &z - &x_rd_z;
        let Some(dir) = st.direction(&factor, &schur, &g, &rp, &rd, &z) else {
            status = SdpStatus::NumericalFailure;
            break;
        };
        let gamma = 0.9 + 0.09 * ap.min(ad);
        let mut accepted = st.backtrack(&dir, &chol_x, &chol_s, gamma, current.merit);
        if accepted.is_none() {
            // the second-order term can make the corrector ascend the merit; the plain
            // centered direction descends it for small enough steps
            let g = &z * (sigma.max(0.1) * mu) - &st.x - &x_rd_z;
            if let Some(dir) = st.direction(&factor, &schur, &g, &rp, &rd, &z) {
                accepted = st.backtrack(&dir, &chol_x, &chol_s, gamma, current.merit);
            }
        }
        let Some((x, y, s, m, alpha_p, alpha_d)) = accepted else {
            status = SdpStatus::NumericalFailure;
            break;
        };
        st.x = x;
        st.y = y;
        st.s = s;
        current = m;
        step_p = alpha_p;
        step_d = alpha_d;
    }

    Ok(SdpSolution {
        x: st.x,
        y: st.y,
        s: st.s,
        primal_obj: current.pobj,
        dual_obj: current.dobj,
        gap: current.gap,
        primal_infeas: current.pinf,
        dual_infeas: current.dinf,
        iterations,
        status,
        history,
    })
}
