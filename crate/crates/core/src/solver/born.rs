//! Born-series solve: the matrix inverse as a sum of multi-bounce paths.
//!
//! With `A = diag(alpha)` and `G` the off-diagonal Green's block,
//! `M^-1 e = sum_k (A G)^k A e`; the k-th term collects scattering paths
//! that bounce k times between the dipoles. Using `M s_K - e = -(G A)^{K+1} e`
//! one matrix-vector product per order yields both the next term and the
//! exact relative residual of the current partial sum.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::{DipoleSolution, InteractionSystem};
use crate::error::{Error, Result};

/// Residual growth over this many consecutive orders flags divergence
/// (spectral radius of A G at or above one).
const DIVERGENCE_WINDOW: usize = 10;

#[derive(Debug, Clone)]
pub struct BornResult {
    /// Partial sum at the last computed order.
    pub solution: DipoleSolution,
    /// Relative residual after each order, starting at order 0.
    pub residual_history: Vec<f64>,
    /// Reached `tol` within `k_max` orders.
    pub converged: bool,
    /// Residual grew over `DIVERGENCE_WINDOW` consecutive orders.
    pub diverged: bool,
}

impl BornResult {
    /// Orders actually summed (length of the residual history).
    pub fn orders_used(&self) -> usize {
        self.residual_history.len()
    }
}

/// Sum the Born series to `tol` relative residual or `k_max` orders.
/// Non-convergence is reported in the flags, never as an error.
pub fn born_series(system: &InteractionSystem, k_max: usize, tol: f64) -> Result<BornResult> {
    if k_max < 1 {
        return Err(Error::InvalidArgument("born_series requires k_max >= 1".into()));
    }
    let n = system.dim();
    let alphas: Vec<Complex64> = (0..n).map(|j| system.alpha(j)).collect();

    // G = diag(M) - M: zero diagonal, +greens off the diagonal.
    let mut coupling = DMatrix::<Complex64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                coupling[(i, j)] = -system.matrix[(i, j)];
            }
        }
    }

    let e_norm = system.source.norm();
    let scale = |v: &DVector<Complex64>| -> DVector<Complex64> {
        DVector::from_iterator(n, v.iter().zip(&alphas).map(|(x, a)| x * a))
    };

    // term_k = (A G)^k A e; after adding term_k the residual is |G term_k| / |e|.
    let mut term = scale(&system.source);
    let mut sum = term.clone();
    let mut history = Vec::new();
    let mut converged = false;
    let mut diverged = false;
    let mut growth_streak = 0usize;

    for order in 0..=k_max {
        let bounced = &coupling * &term;
        let residual = bounced.norm() / e_norm;
        if let Some(&prev) = history.last() {
            if residual > prev {
                growth_streak += 1;
            } else {
                growth_streak = 0;
            }
        }
        history.push(residual);
        if residual <= tol {
            converged = true;
            break;
        }
        if growth_streak >= DIVERGENCE_WINDOW {
            diverged = true;
            break;
        }
        if order == k_max {
            break;
        }
        term = scale(&bounced);
        sum += &term;
    }

    let solution = DipoleSolution {
        moments: sum,
        n_meta: system.n_meta,
        residual: *history.last().expect("at least one order"),
        system_fingerprint: system.fingerprint.clone(),
        topology_fingerprint: system.topology_fingerprint.clone(),
    };
    Ok(BornResult {
        solution,
        residual_history: history,
        converged,
        diverged,
    })
}
