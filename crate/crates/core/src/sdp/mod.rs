//! Single-block semidefinite programs in standard form
//!
//! ```text
//! primal:  min ⟨F, X⟩   s.t. ⟨A_k, X⟩ = b_k,  X ⪰ 0
//! dual:    max bᵀy      s.t. S = F - Σ y_k A_k ⪰ 0
//! ```
//!
//! Constraint matrices are stored as sums of symmetric rank-two terms
//! `coef · ½(u wᵀ + w uᵀ)`, where each vector is either a unit vector or dense. The
//! lifted power-flow problems have exactly this shape, which keeps the Schur complement
//! assembly cheap; arbitrary dense matrices are accepted through [`SymMatrix::from_dense`].

mod solver;

use alloc::vec::Vec;

pub use solver::solve_sdp;

use crate::linalg::{RMatrix, RVector};

#[derive(Debug, Clone, PartialEq)]
pub enum SdpVector {
    Unit(usize),
    Dense(RVector),
}

impl SdpVector {
    pub fn to_dense(&self, dim: usize) -> RVector {
        match self {
            SdpVector::Unit(i) => {
                let mut v = RVector::zeros(dim);
                v[*i] = 1.0;
                v
            }
            SdpVector::Dense(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymTerm {
    pub u: SdpVector,
    pub w: SdpVector,
    pub coef: f64,
}

/// `Σ coef · ½(u wᵀ + w uᵀ)`
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    pub dim: usize,
    pub terms: Vec<SymTerm>,
}

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            terms: Vec::new(),
        }
    }

    pub fn push(&mut self, u: SdpVector, w: SdpVector, coef: f64) {
        self.terms.push(SymTerm { u, w, coef });
    }

    /// Selects the symmetric entry `X_ij`: `⟨A, X⟩ = X_ij`.
    pub fn entry(dim: usize, i: usize, j: usize) -> Self {
        let mut m = Self::zeros(dim);
        m.push(SdpVector::Unit(i), SdpVector::Unit(j), 1.0);
        m
    }

    pub fn rank_two(dim: usize, u: SdpVector, w: SdpVector) -> Self {
        let mut m = Self::zeros(dim);
        m.push(u, w, 1.0);
        m
    }

    /// Row decomposition `A = Σ_i ½(e_i a_iᵀ + a_i e_iᵀ)`, exact for symmetric `A`.
    pub fn from_dense(a: &RMatrix) -> Self {
        let dim = a.nrows();
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            let row = a.row(i).transpose();
            if row.iter().any(|v| *v != 0.0) {
                m.push(SdpVector::Unit(i), SdpVector::Dense(row), 1.0);
            }
        }
        m
    }

    pub fn to_dense(&self) -> RMatrix {
        let mut out = RMatrix::zeros(self.dim, self.dim);
        for t in &self.terms {
            let u = t.u.to_dense(self.dim);
            let w = t.w.to_dense(self.dim);
            let h = 0.5 * t.coef;
            out.ger(h, &u, &w, 1.0);
            out.ger(h, &w, &u, 1.0);
        }
        out
    }

    /// `⟨A, X⟩` for symmetric `X`.
    pub fn inner(&self, x: &RMatrix) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let v = match (&t.u, &t.w) {
                    (SdpVector::Unit(i), SdpVector::Unit(j)) => x[(*i, *j)],
                    (SdpVector::Unit(i), SdpVector::Dense(w)) | (SdpVector::Dense(w), SdpVector::Unit(i)) => {
                        x.row(*i).iter().zip(w.iter()).map(|(a, b)| a * b).sum()
                    }
                    (SdpVector::Dense(u), SdpVector::Dense(w)) => u.dot(&(x * w)),
                };
                t.coef * v
            })
            .sum()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            dim: self.dim,
            terms: self
                .terms
                .iter()
                .map(|t| SymTerm {
                    coef: t.coef * s,
                    ..t.clone()
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpProblem {
    pub cost: RMatrix,
    pub constraints: Vec<SymMatrix>,
    pub rhs: RVector,
}

impl SdpProblem {
    pub fn block_dim(&self) -> usize {
        self.cost.nrows()
    }

    pub fn constraint_count(&self) -> usize {
        self.constraints.len()
    }

    /// `A(X) = (⟨A_k, X⟩)_k`
    pub fn apply(&self, x: &RMatrix) -> RVector {
        RVector::from_iterator(self.constraints.len(), self.constraints.iter().map(|a| a.inner(x)))
    }

    /// `Aᵀ(y) = Σ y_k A_k`
    pub fn adjoint(&self, y: &RVector) -> RMatrix {
        let mut out = RMatrix::zeros(self.block_dim(), self.block_dim());
        for (a, yk) in self.constraints.iter().zip(y.iter()) {
            add_scaled(&mut out, a, *yk);
        }
        out
    }

    /// Every coefficient of the problem multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        Self {
            cost: &self.cost * s,
            constraints: self.constraints.iter().map(|a| a.scaled(s)).collect(),
            rhs: &self.rhs * s,
        }
    }
}

pub(crate) fn add_scaled(out: &mut RMatrix, a: &SymMatrix, scale: f64) {
    let n = out.nrows();
    for t in &a.terms {
        let h = 0.5 * scale * t.coef;
        if h == 0.0 {
            continue;
        }
        match (&t.u, &t.w) {
            (SdpVector::Unit(i), SdpVector::Unit(j)) => {
                out[(*i, *j)] += h;
                out[(*j, *i)] += h;
            }
            (SdpVector::Unit(i), SdpVector::Dense(w)) | (SdpVector::Dense(w), SdpVector::Unit(i)) => {
                for k in 0..n {
                    out[(*i, k)] += h * w[k];
                    out[(k, *i)] += h * w[k];
                }
            }
            (SdpVector::Dense(u), SdpVector::Dense(w)) => {
                out.ger(h, u, w, 1.0);
                out.ger(h, w, u, 1.0);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdpOptions {
    pub tol_gap: f64,
    pub tol_feas: f64,
    pub max_iter: usize,
    /// Keep one [`IterationLog`] per iteration.
    pub record_history: bool,
}

impl Default for SdpOptions {
    fn default() -> Self {
        Self {
            tol_gap: 1e-9,
            tol_feas: 1e-9,
            max_iter: 200,
            record_history: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SdpStatus {
    Optimal,
    MaxIter,
    NumericalFailure,
}

impl SdpStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SdpStatus::Optimal => "optimal",
            SdpStatus::MaxIter => "max_iter",
            SdpStatus::NumericalFailure => "numerical_failure",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationLog {
    pub iteration: usize,
    pub primal_obj: f64,
    pub dual_obj: f64,
    pub gap: f64,
    pub primal_infeas: f64,
    pub dual_infeas: f64,
    /// `⟨X, S⟩ + ‖D⁻¹(b - A(X))‖ + ‖F - Aᵀy - S‖`, `D` the constraint norms
    pub merit: f64,
    pub step_primal: f64,
    pub step_dual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpSolution {
    pub x: RMatrix,
    pub y: RVector,
    pub s: RMatrix,
    pub primal_obj: f64,
    pub dual_obj: f64,
    pub gap: f64,
    pub primal_infeas: f64,
    pub dual_infeas: f64,
    pub iterations: usize,
    pub status: SdpStatus,
    pub history: Vec<IterationLog>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residuals {
    /// `max_k |⟨A_k, X⟩ - b_k| / ‖A_k‖` over `1 + max_k |b_k| / ‖A_k‖`
    pub primal_infeas: f64,
    /// Most negative eigenvalue of `F - Aᵀy`, relative to `1 + ‖F‖_F` (0 if PSD).
    pub dual_infeas: f64,
    /// `|⟨F,X⟩ - bᵀy| / (1 + |⟨F,X⟩| + |bᵀy|)`
    pub gap: f64,
}

pub(crate) fn max_abs(v: &RVector) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Independent residual evaluation of a candidate primal/dual pair.
/// Frobenius norm of every constraint matrix (1 for an all-zero row).
pub fn row_norms(problem: &SdpProblem) -> RVector {
    RVector::from_iterator(
        problem.constraints.len(),
        problem.constraints.iter().map(|a| {
            let n = crate::linalg::frobenius(&a.to_dense());
            if n > 0.0 { n } else { 1.0 }
        }),
    )
}

/// `max_k |r_k|/‖A_k‖ / (1 + max_k |b_k|/‖A_k‖)`: the primal residual of the row-normalized
/// system, so rows of very different magnitude are judged alike.
pub fn primal_measure(rp: &RVector, rhs: &RVector, norms: &RVector) -> f64 {
    max_abs(&rp.component_div(norms)) / (1.0 + max_abs(&rhs.component_div(norms)))
}

pub fn residuals(problem: &SdpProblem, x: &RMatrix, y: &RVector) -> Residuals {
    let rp = &problem.rhs - problem.apply(x);
    let primal_infeas = primal_measure(&rp, &problem.rhs, &row_norms(problem));
    let s = &problem.cost - problem.adjoint(y);
    let min_eig = crate::linalg::min_symmetric_eigenvalue(&crate::linalg::sym(&s));
    let dual_infeas = (-min_eig).max(0.0) / (1.0 + crate::linalg::frobenius(&problem.cost));
    let pobj = problem.cost.dot(x);
    let dobj = problem.rhs.dot(y);
    Residuals {
        primal_infeas,
        dual_infeas,
        gap: (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_round_trip_and_inner_product() {
        let a = RMatrix::from_row_slice(3, 3, &[1.0, 2.0, 0.0, 2.0, -1.0, 3.0, 0.0, 3.0, 4.0]);
        let s = SymMatrix::from_dense(&a);
        assert_eq!(s.to_dense(), a);
        let x = RMatrix::from_row_slice(3, 3, &[2.0, 0.5, 1.0, 0.5, 1.0, -1.0, 1.0, -1.0, 3.0]);
        assert!((s.inner(&x) - a.dot(&x)).abs() < 1e-14);
        let e = SymMatrix::entry(3, 0, 2);
        assert_eq!(e.inner(&x), 1.0);
    }

    #[test]
    fn adjoint_matches_dense_sum() {
        let a1 = RMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 0.0]);
        let a2 = RMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 5.0]);
        let p = SdpProblem {
            cost: RMatrix::identity(2, 2),
            constraints: alloc::vec![SymMatrix::from_dense(&a1), SymMatrix::from_dense(&a2)],
            rhs: RVector::from_vec(alloc::vec![1.0, 1.0]),
        };
        let y = RVector::from_vec(alloc::vec![2.0, -3.0]);
        assert!((p.adjoint(&y) - (a1 * 2.0 - a2 * 3.0)).norm() < 1e-14);
    }

    #[test]
    fn residuals_at_analytic_optimum_vanish() {
        // min X11 + X22 s.t. X12 = 1: X* = [[1,1],[1,1]], y* = 2, S* = [[1,-1],[-1,1]]
        let p = SdpProblem {
            cost: RMatrix::identity(2, 2),
            constraints: alloc::vec![SymMatrix::entry(2, 0, 1)],
            rhs: RVector::from_vec(alloc::vec![1.0]),
        };
        let x = RMatrix::from_element(2, 2, 1.0);
        let y = RVector::from_vec(alloc::vec![2.0]);
        let r = residuals(&p, &x, &y);
        assert!(r.primal_infeas <= 1e-12 && r.dual_infeas <= 1e-12 && r.gap <= 1e-12, "{r:?}");

        // perturbing X12 by δ raises the primal residual linearly
        let mut last = 0.0;
        for k in 1..=4 {
            let delta = 1e-3 * k as f64;
            let mut xp = x.clone();
            xp[(0, 1)] += delta;
            xp[(1, 0)] += delta;
            let r = residuals(&p, &xp, &y);
            let a = crate::linalg::frobenius(&p.constraints[0].to_dense());
            assert!((r.primal_infeas - delta / (a + 1.0)).abs() < 1e-15);
            assert!(r.primal_infeas > last);
            last = r.primal_infeas;
        }
    }
}
