//! Protocol gain vectors built from coefficient choices, the polynomial
//! stability tests backing the convergence conditions, and default
//! pole-choice helpers.
//!
//! For coefficients `a = (a_1, ..., a_{m-1})` the continuous gains are
//! `K1 = (0, -a_1, ..., -a_{m-1})` and `K2 = (a_1, ..., a_{m-1}, 1)`; they
//! satisfy `K2 (A + B K1) = 0` and `K2 B = 1`, which collapses the
//! m-th-order network to first-order Laplacian dynamics in `K2 x`. The
//! discrete counterparts use `K4 = (b_1, b_2 - b_1, ..., 1 - b_{m-1})` and
//! `K5 = (b_1, ..., b_{m-1}, 1)` with `K5 (A + B K4) = K5`.

use crate::error::{Error, Result};
use crate::lti::{integrator_chain, Polynomial};
use nalgebra::{DVector, RowDVector};

/// Gains of the continuous-time protocols. `k3` is the optional observer
/// injection gain (output-feedback and general-LTI variants).
#[derive(Debug, Clone)]
pub struct ContinuousGainSet {
    a: Vec<f64>,
    k1: RowDVector<f64>,
    k2: RowDVector<f64>,
    k3: Option<DVector<f64>>,
}

/// Gains of the discrete-time protocol. `k6` is the optional observer gain.
#[derive(Debug, Clone)]
pub struct DiscreteGainSet {
    b: Vec<f64>,
    k4: RowDVector<f64>,
    k5: RowDVector<f64>,
    k6: Option<DVector<f64>>,
}

/// Builds the continuous gain set from `(a_1, ..., a_{m-1})`.
pub fn make_continuous_gains(a: &[f64]) -> Result<ContinuousGainSet> {
    if a.is_empty() {
        return Err(Error::EmptyCoefficients);
    }
    let m = a.len() + 1;
    let mut k1 = RowDVector::zeros(m);
    let mut k2 = RowDVector::zeros(m);
    for (i, &ai) in a.iter().enumerate() {
        k1[i + 1] = -ai;
        k2[i] = ai;
    }
    k2[m - 1] = 1.0;
    Ok(ContinuousGainSet {
        a: a.to_vec(),
        k1,
        k2,
        k3: None,
    })
}

/// Builds the discrete gain set from `(b_1, ..., b_{m-1})`.
pub fn make_discrete_gains(b: &[f64]) -> Result<DiscreteGainSet> {
    if b.is_empty() {
        return Err(Error::EmptyCoefficients);
    }
    let m = b.len() + 1;
    let mut k4 = RowDVector::zeros(m);
    let mut k5 = RowDVector::zeros(m);
    k4[0] = b[0];
    for i in 1..m - 1 {
        k4[i] = b[i] - b[i - 1];
    }
    k4[m - 1] = 1.0 - b[m - 2];
    for (i, &bi) in b.iter().enumerate() {
        k5[i] = bi;
    }
    k5[m - 1] = 1.0;
    Ok(DiscreteGainSet {
        b: b.to_vec(),
        k4,
        k5,
        k6: None,
    })
}

impl ContinuousGainSet {
    pub fn order(&self) -> usize {
        self.a.len() + 1
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn k1(&self) -> &RowDVector<f64> {
        &self.k1
    }

    pub fn k2(&self) -> &RowDVector<f64> {
        &self.k2
    }

    pub fn k3(&self) -> Option<&DVector<f64>> {
        self.k3.as_ref()
    }

    pub fn with_observer_gain(mut self, k3: DVector<f64>) -> Self {
        self.k3 = Some(k3);
        self
    }

    /// `s^{m-1} + a_{m-1} s^{m-2} + ... + a_1`, whose roots must lie in the
    /// open left half-plane for full-state convergence.
    pub fn characteristic_polynomial(&self) -> Polynomial {
        Polynomial::from_monic_coeffs(self.a.clone())
    }

    pub fn is_stable(&self) -> bool {
        is_hurwitz(&self.characteristic_polynomial())
    }

    /// Max abs entry of `K2 (A + B K1)` and of `K2 B - 1` over the
    /// integrator-chain matrices; zero up to float rounding by design.
    pub fn identity_residual(&self) -> f64 {
        let m = self.order();
        let (a, b) = integrator_chain(m);
        let closed = a + &b * &self.k1;
        let row = &self.k2 * closed;
        let kb = (&self.k2 * &b)[(0, 0)];
        row.amax().max((kb - 1.0).abs())
    }
}

impl DiscreteGainSet {
    pub fn order(&self) -> usize {
        self.b.len() + 1
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn k4(&self) -> &RowDVector<f64> {
        &self.k4
    }

    pub fn k5(&self) -> &RowDVector<f64> {
        &self.k5
    }

    pub fn k6(&self) -> Option<&DVector<f64>> {
        self.k6.as_ref()
    }

    pub fn with_observer_gain(mut self, k6: DVector<f64>) -> Self {
        self.k6 = Some(k6);
        self
    }

    /// `s^{m-1} + b_{m-1} s^{m-2} + ... + b_1`, whose roots must lie inside
    /// the unit circle.
    pub fn characteristic_polynomial(&self) -> Polynomial {
        Polynomial::from_monic_coeffs(self.b.clone())
    }

    pub fn is_stable(&self) -> bool {
        is_schur(&self.characteristic_polynomial())
    }

    /// Max abs entry of `K5 (A + B K4) - K5` and of `K5 B - 1`.
    pub fn identity_residual(&self) -> f64 {
        let m = self.order();
        let (a, b) = integrator_chain(m);
        let closed = a + &b * &self.k4;
        let row = &self.k5 * closed - &self.k5;
        let kb = (&self.k5 * &b)[(0, 0)];
        row.amax().max((kb - 1.0).abs())
    }
}

/// Routh–Hurwitz tabulation. Exact zero pivots mean roots on the imaginary
/// axis (or a degenerate row), which the strict open-left-half-plane
/// condition rejects.
pub fn is_hurwitz(p: &Polynomial) -> bool {
    let n = p.degree();
    if n == 0 {
        return false;
    }
    // high -> low: [1, c_{n-1}, ..., c_0]
    let full: Vec<f64> = std::iter::once(1.0)
        .chain(p.coeffs().iter().rev().copied())
        .collect();
    let width = n / 2 + 2;
    let mut upper = vec![0.0; width];
    let mut lower = vec![0.0; width];
    for (i, &c) in full.iter().enumerate() {
        if i % 2 == 0 {
            upper[i / 2] = c;
        } else {
            lower[i / 2] = c;
        }
    }
    for _ in 0..n {
        if lower[0] <= 0.0 {
            return false;
        }
        let mut next = vec![0.0; width];
        for j in 0..width - 1 {
            next[j] = (lower[0] * upper[j + 1] - upper[0] * lower[j + 1]) / lower[0];
        }
        upper = lower;
        lower = next;
    }
    true
}

/// Jury-type Schur–Cohn reduction. Each stage requires the constant
/// coefficient to be strictly smaller in magnitude than the leading one;
/// boundary cases (roots on the unit circle) are rejected.
pub fn is_schur(p: &Polynomial) -> bool {
    if p.degree() == 0 {
        return false;
    }
    // low -> high including the leading 1
    let mut v: Vec<f64> = p.coeffs().to_vec();
    v.push(1.0);
    while v.len() > 1 {
        let d = v.len() - 1;
        let lead = v[d];
        let tail = v[0];
        if tail.abs() >= lead.abs() {
            return false;
        }
        let mut next = vec![0.0; d];
        for (j, slot) in next.iter_mut().enumerate() {
            *slot = lead * v[j + 1] - tail * v[d - 1 - j];
        }
        v = next;
    }
    true
}

/// `(s+1)^{m-1}` coefficients: the continuous example gains.
pub fn default_continuous_coefficients(m: usize) -> Vec<f64> {
    Polynomial::from_real_roots(&vec![-1.0; m - 1])
        .coeffs()
        .to_vec()
}

/// `(s+1/2)^{m-1}` coefficients: the discrete example gains.
pub fn default_discrete_coefficients(m: usize) -> Vec<f64> {
    Polynomial::from_real_roots(&vec![-0.5; m - 1])
        .coeffs()
        .to_vec()
}

/// Default observer characteristic polynomial `(s+2)^m` for continuous
/// designs.
pub fn default_observer_poly_continuous(m: usize) -> Polynomial {
    Polynomial::from_real_roots(&vec![-2.0; m])
}

/// Default observer characteristic polynomial `(s+1/4)^m` for discrete
/// designs (all eigenvalue magnitudes 0.25).
pub fn default_observer_poly_discrete(m: usize) -> Polynomial {
    Polynomial::from_real_roots(&vec![-0.25; m])
}
