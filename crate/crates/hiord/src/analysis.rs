//! Executable proof machinery: stochastic-matrix checks, the ergodicity
//! coefficient, disagreement contraction, and transition-matrix products
//! over switching signals.
//!
//! Matrix exponentials of negative Laplacians carry ~1e-12 of numerical
//! dirt, so [`StochasticMatrix::try_new`] clips small negative entries and
//! renormalizes rows inside the tolerance; anything worse is a hard error.

use crate::error::{Error, Result};
use crate::graph::laplacian;
use crate::lti::mat_exp;
use crate::switching::{DiscreteSwitchingSignal, SwitchingSignal};
use crate::tol;
use nalgebra::{DMatrix, DVector};

/// Row-stochastic matrix: entries non-negative, rows summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticMatrix(DMatrix<f64>);

impl StochasticMatrix {
    /// Validates within `tol`, clipping negative dirt to zero and
    /// renormalizing each row.
    pub fn try_new(mut m: DMatrix<f64>, tolerance: f64) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::NotSquare {
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
        if !is_stochastic(&m, tolerance) {
            let reason = describe_stochastic_failure(&m, tolerance);
            return Err(Error::NotStochastic {
                tol: tolerance,
                reason,
            });
        }
        for v in m.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        for i in 0..m.nrows() {
            let sum: f64 = m.row(i).sum();
            for j in 0..m.ncols() {
                m[(i, j)] /= sum;
            }
        }
        Ok(Self(m))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    /// Ordered product `self * rhs` (stays stochastic exactly up to
    /// rounding, revalidated loosely).
    pub fn compose(&self, rhs: &StochasticMatrix) -> Result<StochasticMatrix> {
        StochasticMatrix::try_new(&self.0 * &rhs.0, tol::STOCHASTIC)
    }
}

fn describe_stochastic_failure(m: &DMatrix<f64>, tolerance: f64) -> String {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if m[(i, j)] < -tolerance {
                return format!("entry ({i}, {j}) = {} is negative", m[(i, j)]);
            }
        }
        let sum: f64 = m.row(i).sum();
        if (sum - 1.0).abs() > tolerance {
            return format!("row {i} sums to {sum}");
        }
    }
    "unknown".into()
}

/// Entrywise `>= -tol` and row sums within `tol` of one.
pub fn is_stochastic(m: &DMatrix<f64>, tolerance: f64) -> bool {
    if m.nrows() != m.ncols() {
        return false;
    }
    (0..m.nrows()).all(|i| {
        m.row(i).iter().all(|&v| v >= -tolerance) && (m.row(i).sum() - 1.0).abs() <= tolerance
    })
}

/// Coefficient of ergodicity
/// `tau(P) = 0.5 max_{i,j} sum_s |P_is - P_js|`, in `[0, 1]`; it bounds the
/// contraction of the disagreement under `p -> P p`.
pub fn ergodicity_coefficient(p: &StochasticMatrix) -> f64 {
    let m = p.matrix();
    let n = p.n();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let dist: f64 = (0..n).map(|s| (m[(i, s)] - m[(j, s)]).abs()).sum();
            worst = worst.max(dist);
        }
    }
    0.5 * worst
}

/// `max_i p_i - min_i p_i`.
pub fn disagreement(p: &DVector<f64>) -> f64 {
    p.max() - p.min()
}

/// Ordered product `(I - S[j-1]) (I - S[j-2]) ... (I - S[i])` of the
/// discrete reduced system; the leftmost factor is the latest step.
/// `Phi_d(i, i) = I`.
pub fn discrete_transition(
    sig: &DiscreteSwitchingSignal,
    i: usize,
    j: usize,
) -> Result<StochasticMatrix> {
    if i > j {
        return Err(Error::ReversedInterval {
            from: i as f64,
            to: j as f64,
        });
    }
    let n = sig.n_nodes();
    let mut product = DMatrix::<f64>::identity(n, n);
    for k in i..j {
        let step = DMatrix::identity(n, n) - crate::protocols::s_matrix(sig.graph_at(k));
        product = step * product;
    }
    StochasticMatrix::try_new(product, tol::STOCHASTIC)
}

/// Ordered product of `exp(-L_k * segment)` over the switch segments
/// between `s` and `t`; the leftmost factor is the latest segment.
pub fn continuous_transition(
    sig: &SwitchingSignal,
    s: f64,
    t: f64,
) -> Result<StochasticMatrix> {
    if s > t {
        return Err(Error::ReversedInterval { from: s, to: t });
    }
    let n = sig.n_nodes();
    let mut product = DMatrix::<f64>::identity(n, n);
    if t > s {
        let mut cuts = vec![s];
        cuts.extend(sig.switch_times_in(s, t));
        cuts.push(t);
        for seg in cuts.windows(2) {
            let len = seg[1] - seg[0];
            if len <= 0.0 {
                continue;
            }
            let g = sig.graph_at(0.5 * (seg[0] + seg[1]))?;
            let l = laplacian(g).into_matrix();
            let factor = mat_exp(&(-l), len)?;
            product = factor * product;
        }
    }
    StochasticMatrix::try_new(product, tol::STOCHASTIC)
}
