//! Dense linear-systems toolkit: matrix exponential, characteristic
//! polynomials, polynomial roots, controllability/observability tests and
//! the controllable canonical transformation.
//!
//! Everything here targets the small systems of the consensus protocols
//! (agent order m <= 10, networks of at most a few dozen agents); no sparse
//! or large-scale paths exist.

use crate::error::{Error, Result};
use crate::tol;
use nalgebra::{Complex, DMatrix, DVector, RowDVector};

/// Monic real polynomial `s^d + c_{d-1} s^{d-1} + ... + c_1 s + c_0`.
/// The leading coefficient 1 is implicit; `coeffs[k]` multiplies `s^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    /// Builds from the non-leading coefficients, lowest power first.
    pub fn from_monic_coeffs(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }

    /// Monic polynomial with the given real roots.
    pub fn from_real_roots(roots: &[f64]) -> Self {
        let mut c = vec![1.0];
        for &r in roots {
            // multiply by (s - r)
            let mut next = vec![0.0; c.len() + 1];
            for (k, &ck) in c.iter().enumerate() {
                next[k + 1] += ck;
                next[k] -= r * ck;
            }
            c = next;
        }
        c.pop();
        Self { coeffs: c }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len()
    }

    /// Non-leading coefficients, lowest power first.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn eval(&self, s: f64) -> f64 {
        let mut acc = 1.0;
        for &c in self.coeffs.iter().rev() {
            acc = acc * s + c;
        }
        acc
    }

    pub fn eval_complex(&self, s: Complex<f64>) -> Complex<f64> {
        let mut acc = Complex::new(1.0, 0.0);
        for &c in self.coeffs.iter().rev() {
            acc = acc * s + c;
        }
        acc
    }

    pub fn max_coeff_diff(&self, other: &Polynomial) -> f64 {
        assert_eq!(self.degree(), other.degree());
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Single-input, single-output LTI plant `xdot = A x + B u`, `y = C x`.
#[derive(Debug, Clone)]
pub struct LtiSystem {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: RowDVector<f64>,
}

impl LtiSystem {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>, c: RowDVector<f64>) -> Result<Self> {
        let m = a.nrows();
        if a.ncols() != m {
            return Err(Error::NotSquare {
                rows: a.nrows(),
                cols: a.ncols(),
            });
        }
        if b.len() != m || c.len() != m {
            return Err(Error::Dimension(format!(
                "B has {} rows and C has {} columns for a {m}x{m} A",
                b.len(),
                c.len()
            )));
        }
        Ok(Self { a, b, c })
    }

    pub fn order(&self) -> usize {
        self.a.nrows()
    }
}

/// Similarity transform to controllable canonical form: `T A T^-1` has ones
/// on the superdiagonal and `a_row` (un-negated) as its last row, and
/// `T B = (0, ..., 0, 1)^T`.
#[derive(Debug, Clone)]
pub struct CanonicalForm {
    pub t: DMatrix<f64>,
    pub t_inv: DMatrix<f64>,
    /// Last row of the transformed A; the characteristic polynomial is
    /// `s^m - a_row[m-1] s^{m-1} - ... - a_row[0]`.
    pub a_row: DVector<f64>,
}

/// The integrator-chain pair: `A` with ones on the superdiagonal and
/// `B = (0, ..., 0, 1)^T`.
pub fn integrator_chain(m: usize) -> (DMatrix<f64>, DVector<f64>) {
    let mut a = DMatrix::zeros(m, m);
    for i in 0..m.saturating_sub(1) {
        a[(i, i + 1)] = 1.0;
    }
    let mut b = DVector::zeros(m);
    b[m - 1] = 1.0;
    (a, b)
}

// ---------------------------------------------------------------------------
// matrix exponential: scaling and squaring with diagonal Padé approximants
// (Higham 2005 order selection)
// ---------------------------------------------------------------------------

const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const PADE9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

const THETA3: f64 = 1.495585217958292e-2;
const THETA5: f64 = 2.539398330063230e-1;
const THETA7: f64 = 9.504178996162932e-1;
const THETA9: f64 = 2.097847961257068;
const THETA13: f64 = 5.371920351148152;

fn l1_norm(a: &DMatrix<f64>) -> f64 {
    (0..a.ncols())
        .map(|j| a.column(j).iter().map(|v| v.abs()).sum())
        .fold(0.0, f64::max)
}

/// U and V of a low-order diagonal Padé approximant: even powers go to V,
/// odd powers (with one factor of A pulled out) to U.
fn pade_uv(a: &DMatrix<f64>, b: &[f64]) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let a2 = a * a;
    let mut even = DMatrix::<f64>::identity(n, n) * b[0];
    let mut odd = DMatrix::<f64>::identity(n, n) * b[1];
    let mut pow = DMatrix::<f64>::identity(n, n);
    for k in (2..b.len()).step_by(2) {
        pow = &pow * &a2;
        even += &pow * b[k];
        if k + 1 < b.len() {
            odd += &pow * b[k + 1];
        }
    }
    (a * odd, even)
}

fn pade13_uv(a: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let b = &PADE13;
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u_inner = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9])
        + &a6 * b[7]
        + &a4 * b[5]
        + &a2 * b[3]
        + DMatrix::identity(a.nrows(), a.nrows()) * b[1];
    let v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8])
        + &a6 * b[6]
        + &a4 * b[4]
        + &a2 * b[2]
        + DMatrix::identity(a.nrows(), a.nrows()) * b[0];
    (a * u_inner, v)
}

fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let norm = l1_norm(a);
    let (u, v, squarings) = if norm < THETA3 {
        let (u, v) = pade_uv(a, &PADE3);
        (u, v, 0u32)
    } else if norm < THETA5 {
        let (u, v) = pade_uv(a, &PADE5);
        (u, v, 0)
    } else if norm < THETA7 {
        let (u, v) = pade_uv(a, &PADE7);
        (u, v, 0)
    } else if norm < THETA9 {
        let (u, v) = pade_uv(a, &PADE9);
        (u, v, 0)
    } else {
        let s = ((norm / THETA13).log2().ceil() as i32).max(0) as u32;
        let scaled = a * 2f64.powi(-(s as i32));
        let (u, v) = pade13_uv(&scaled);
        (u, v, s)
    };
    let numer = &v + &u;
    let denom = &v - &u;
    let mut result = denom
        .lu()
        .solve(&numer)
        .expect("Padé denominator is nonsingular for admissible norms");
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

/// `exp(M t)`.
pub fn mat_exp(m: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(expm(&(m * t)))
}

/// Monic characteristic polynomial `det(sI - M)` by the
/// Faddeev–LeVerrier recursion.
pub fn char_poly(m: &DMatrix<f64>) -> Result<Polynomial> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    // c[n] = 1 implicit; fill c[n-1] .. c[0]
    let mut coeffs = vec![0.0; n];
    let mut work = m.clone();
    for k in 1..=n {
        let c = -work.trace() / k as f64;
        coeffs[n - k] = c;
        if k < n {
            for i in 0..n {
                work[(i, i)] += c;
            }
            work = m * work;
        }
    }
    Ok(Polynomial::from_monic_coeffs(coeffs))
}

/// All roots of a monic polynomial via the eigenvalues of its companion
/// matrix.
pub fn poly_roots(p: &Polynomial) -> Result<Vec<Complex<f64>>> {
    let d = p.degree();
    if d == 0 {
        return Err(Error::DegenerateDegree);
    }
    if d == 1 {
        return Ok(vec![Complex::new(-p.coeffs()[0], 0.0)]);
    }
    let mut companion = DMatrix::<f64>::zeros(d, d);
    for i in 1..d {
        companion[(i, i - 1)] = 1.0;
    }
    for (k, &c) in p.coeffs().iter().enumerate() {
        companion[(k, d - 1)] = -c;
    }
    Ok(companion.complex_eigenvalues().iter().copied().collect())
}

/// `[B, AB, ..., A^{m-1} B]`.
pub fn controllability_matrix(sys: &LtiSystem) -> DMatrix<f64> {
    let m = sys.order();
    let mut cols = DMatrix::zeros(m, m);
    let mut v = sys.b.clone();
    for k in 0..m {
        cols.set_column(k, &v);
        if k + 1 < m {
            v = &sys.a * v;
        }
    }
    cols
}

/// `[C; CA; ...; C A^{m-1}]`.
pub fn observability_matrix(a: &DMatrix<f64>, c: &RowDVector<f64>) -> DMatrix<f64> {
    let m = a.nrows();
    let mut rows = DMatrix::zeros(m, m);
    let mut v = c.clone();
    for k in 0..m {
        rows.set_row(k, &v);
        if k + 1 < m {
            v = &v * a;
        }
    }
    rows
}

fn rank_eps(m: &DMatrix<f64>) -> f64 {
    tol::RANK * (1.0 + m.amax())
}

pub fn is_controllable(sys: &LtiSystem) -> bool {
    let cm = controllability_matrix(sys);
    let eps = rank_eps(&cm);
    cm.rank(eps) == sys.order()
}

/// PBH rank test at the eigenvalues of `A` selected by `which`.
fn pbh_observable_at(a: &DMatrix<f64>, c: &RowDVector<f64>, which: impl Fn(f64) -> bool) -> bool {
    let m = a.nrows();
    let eigen = a.complex_eigenvalues();
    for lambda in eigen.iter() {
        if !which(lambda.re) {
            continue;
        }
        let mut pencil = DMatrix::<Complex<f64>>::zeros(m + 1, m);
        for i in 0..m {
            for j in 0..m {
                pencil[(i, j)] = -Complex::new(a[(i, j)], 0.0);
            }
            pencil[(i, i)] += lambda;
            pencil[(m, i)] = Complex::new(c[i], 0.0);
        }
        let eps = tol::RANK * (1.0 + a.amax().max(c.amax()) + lambda.norm());
        if pencil.rank(eps) < m {
            return false;
        }
    }
    true
}

/// True when every eigenvalue of `A` is observable through `C`.
pub fn is_observable_pair(a: &DMatrix<f64>, c: &RowDVector<f64>) -> bool {
    a.nrows() == a.ncols() && c.len() == a.nrows() && pbh_observable_at(a, c, |_| true)
}

/// True when every eigenvalue of `A` with non-negative real part is
/// observable through `C`.
pub fn is_detectable_pair(a: &DMatrix<f64>, c: &RowDVector<f64>) -> bool {
    a.nrows() == a.ncols() && c.len() == a.nrows() && pbh_observable_at(a, c, |re| re >= -tol::RANK)
}

/// Controllable canonical transform of a controllable single-input system:
/// take the last row `q` of the inverse controllability matrix and stack
/// `(q, qA, ..., q A^{m-1})`.
pub fn to_controllable_canonical(sys: &LtiSystem) -> Result<CanonicalForm> {
    if !is_controllable(sys) {
        return Err(Error::NotControllable);
    }
    let m = sys.order();
    let cm = controllability_matrix(sys);
    // q solves q * CM = e_m^T
    let mut e = DVector::zeros(m);
    e[m - 1] = 1.0;
    let q_t = cm
        .transpose()
        .lu()
        .solve(&e)
        .ok_or(Error::NotControllable)?;
    let q = RowDVector::from_iterator(m, q_t.iter().copied());
    let mut t = DMatrix::zeros(m, m);
    let mut row = q;
    for k in 0..m {
        t.set_row(k, &row);
        if k + 1 < m {
            row = &row * &sys.a;
        }
    }
    let t_inv = t
        .clone()
        .try_inverse()
        .ok_or(Error::NotControllable)?;
    let transformed = &t * &sys.a * &t_inv;
    let a_row = transformed.row(m - 1).transpose();
    Ok(CanonicalForm { t, t_inv, a_row })
}

impl CanonicalForm {
    /// Largest deviation of `T A T^-1` and `T B` from the canonical shape.
    pub fn shape_residual(&self, sys: &LtiSystem) -> f64 {
        let m = sys.order();
        let abar = &self.t * &sys.a * &self.t_inv;
        let bbar = &self.t * &sys.b;
        let mut worst: f64 = 0.0;
        for i in 0..m {
            for j in 0..m {
                let expect = if i == m - 1 {
                    self.a_row[j]
                } else if j == i + 1 {
                    1.0
                } else {
                    0.0
                };
                worst = worst.max((abar[(i, j)] - expect).abs());
            }
            let expect_b = if i == m - 1 { 1.0 } else { 0.0 };
            worst = worst.max((bbar[i] - expect_b).abs());
        }
        worst
    }
}

/// Result of observer pole placement.
#[derive(Debug, Clone)]
pub struct ObserverPlacement {
    /// Column gain `K` with `char_poly(A + K C) = desired`.
    pub gain: DVector<f64>,
    /// Max coefficientwise deviation of the achieved characteristic
    /// polynomial from the requested one.
    pub residual: f64,
    /// Set when the observability matrix is badly conditioned and the
    /// residual should be inspected.
    pub ill_conditioned: bool,
}

/// Places `char_poly(A + K C)` at `desired` by Ackermann's formula on the
/// dual system. Requires `(A, C)` observable.
pub fn place_observer_gain(
    a: &DMatrix<f64>,
    c: &RowDVector<f64>,
    desired: &Polynomial,
) -> Result<ObserverPlacement> {
    let m = a.nrows();
    if a.ncols() != m {
        return Err(Error::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    if desired.degree() != m {
        return Err(Error::Dimension(format!(
            "desired polynomial degree {} does not match order {m}",
            desired.degree()
        )));
    }
    if !is_observable_pair(a, c) {
        return Err(Error::NotObservable);
    }
    let obs = observability_matrix(a, c);
    let svd = obs.clone().svd(false, false);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let ill_conditioned = smin <= 0.0 || smax / smin > 1e12;
    // x solves O x = e_m
    let mut e = DVector::zeros(m);
    e[m - 1] = 1.0;
    let x = obs.lu().solve(&e).ok_or(Error::NotObservable)?;
    // Horner evaluation of the monic desired polynomial at A
    let mut p = a.clone();
    for i in 0..m {
        p[(i, i)] += desired.coeffs()[m - 1];
    }
    for k in (0..m - 1).rev() {
        p = &p * a;
        for i in 0..m {
            p[(i, i)] += desired.coeffs()[k];
        }
    }
    // A - L C has the desired spectrum; the protocols use A + K C
    let gain = -(&p * x);
    let achieved = char_poly(&(a + &gain * c))?;
    let residual = achieved.max_coeff_diff(desired);
    Ok(ObserverPlacement {
        gain,
        residual,
        ill_conditioned,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn aircraft_sys() -> LtiSystem {
        let a = DMatrix::from_row_slice(
            4,
            4,
            &[
                0.0, 1.0, 0.0, 0.0, //
                -4.0, -4.0, 0.0, 0.0, //
                0.0, 0.0, 0.0, 1.0, //
                6.0, 0.0, 0.0, 0.0,
            ],
        );
        let b = DVector::from_column_slice(&[0.0, 3.0, 0.0, -1.0]);
        let c = RowDVector::from_row_slice(&[0.0, 0.0, 1.0, 0.0]);
        LtiSystem::new(a, b, c).unwrap()
    }

    #[test]
    fn mat_exp_zero_is_identity() {
        let z = DMatrix::<f64>::zeros(4, 4);
        let e = mat_exp(&z, 1.0).unwrap();
        assert!((e - DMatrix::<f64>::identity(4, 4)).amax() < 1e-15);
    }

    #[test]
    fn mat_exp_diagonal() {
        let d = DMatrix::from_diagonal(&DVector::from_column_slice(&[-1.0, -2.0]));
        let e = mat_exp(&d, 1.0).unwrap();
        assert_abs_diff_eq!(e[(0, 0)], (-1.0f64).exp(), epsilon = 1e-14);
        assert_abs_diff_eq!(e[(1, 1)], (-2.0f64).exp(), epsilon = 1e-14);
        assert!(e[(0, 1)].abs() < 1e-15 && e[(1, 0)].abs() < 1e-15);
    }

    #[test]
    fn mat_exp_of_negative_laplacian_is_stochastic() {
        // Example-1 first graph
        let g = crate::graph::DirectedGraph::new(5, &[(1, 0, 1.0), (3, 0, 1.0), (4, 2, 1.0)])
            .unwrap();
        let l = crate::graph::laplacian(&g).into_matrix();
        let e = mat_exp(&(-l), 0.1).unwrap();
        for i in 0..5 {
            assert_abs_diff_eq!(e.row(i).sum(), 1.0, epsilon = 1e-12);
            assert!(e.row(i).iter().all(|&x| x >= -1e-12));
        }
    }

    #[test]
    fn mat_exp_semigroup_property() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let n = rng.random_range(2..=6);
            let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-2.0..2.0));
            let (t, s) = (rng.random_range(0.0..1.5), rng.random_range(0.0..1.5));
            let lhs = mat_exp(&m, t + s).unwrap();
            let rhs = mat_exp(&m, t).unwrap() * mat_exp(&m, s).unwrap();
            assert!((lhs - rhs).amax() < 1e-8);
        }
    }

    #[test]
    fn mat_exp_rejects_non_square() {
        let m = DMatrix::<f64>::zeros(2, 3);
        assert!(mat_exp(&m, 1.0).is_err());
    }

    #[test]
    fn char_poly_identity() {
        let p = char_poly(&DMatrix::<f64>::identity(2, 2)).unwrap();
        assert_eq!(p.coeffs(), &[1.0, -2.0]); // s^2 - 2s + 1
    }

    #[test]
    fn char_poly_companion_round_trip() {
        // companion matrix of s^3 + 3s^2 + 3s + 1
        let c = DMatrix::from_row_slice(
            3,
            3,
            &[0.0, 0.0, -1.0, 1.0, 0.0, -3.0, 0.0, 1.0, -3.0],
        );
        let p = char_poly(&c).unwrap();
        for (got, want) in p.coeffs().iter().zip(&[1.0, 3.0, 3.0]) {
            assert_abs_diff_eq!(got, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn char_poly_aircraft_vs_determinant_oracle() {
        let sys = aircraft_sys();
        let p = char_poly(&sys.a).unwrap();
        // independent oracle: det(sI - A) at sample points via LU
        for s in [0.5, 1.0, 1.5, 2.0, -1.0] {
            let m = DMatrix::<f64>::identity(4, 4) * s - &sys.a;
            let det = m.lu().determinant();
            assert_abs_diff_eq!(p.eval(s), det, epsilon = 1e-9 * det.abs().max(1.0));
        }
        // hand expansion: s^4 + 4 s^3 + 4 s^2
        for (got, want) in p.coeffs().iter().zip(&[0.0, 0.0, 4.0, 4.0]) {
            assert_abs_diff_eq!(got, want, epsilon = tol::CHAR_POLY);
        }
    }

    #[test]
    fn poly_roots_triple_root() {
        let p = Polynomial::from_monic_coeffs(vec![1.0, 3.0, 3.0]);
        let roots = poly_roots(&p).unwrap();
        assert_eq!(roots.len(), 3);
        for r in roots {
            assert!((r - Complex::new(-1.0, 0.0)).norm() < 1e-4);
            assert!(p.eval_complex(r).norm() < tol::ROOT_RESIDUAL);
        }
    }

    #[test]
    fn poly_roots_pure_imaginary() {
        let p = Polynomial::from_monic_coeffs(vec![1.0, 0.0]);
        let mut roots = poly_roots(&p).unwrap();
        roots.sort_by(|a, b| a.im.total_cmp(&b.im));
        assert!((roots[0] - Complex::new(0.0, -1.0)).norm() < 1e-10);
        assert!((roots[1] - Complex::new(0.0, 1.0)).norm() < 1e-10);
    }

    #[test]
    fn poly_roots_discrete_example_gains() {
        let p = Polynomial::from_monic_coeffs(vec![0.125, 0.75, 1.5]);
        for r in poly_roots(&p).unwrap() {
            assert!((r - Complex::new(-0.5, 0.0)).norm() < 1e-4);
        }
    }

    #[test]
    fn poly_roots_match_quadratic_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let (b, c) = (rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
            let p = Polynomial::from_monic_coeffs(vec![c, b]);
            let mut roots = poly_roots(&p).unwrap();
            roots.sort_by(|x, y| (x.re, x.im).partial_cmp(&(y.re, y.im)).unwrap());
            let disc = Complex::new(b * b - 4.0 * c, 0.0).sqrt();
            let mut expect = [
                (Complex::new(-b, 0.0) - disc) / 2.0,
                (Complex::new(-b, 0.0) + disc) / 2.0,
            ];
            expect.sort_by(|x, y| (x.re, x.im).partial_cmp(&(y.re, y.im)).unwrap());
            for (r, e) in roots.iter().zip(&expect) {
                assert!((r - e).norm() < 1e-8, "{r} vs {e}");
            }
        }
    }

    #[test]
    fn integrator_chain_controllable() {
        for m in 1..=8 {
            let (a, b) = integrator_chain(m);
            let sys = LtiSystem::new(a, b, RowDVector::zeros(m)).unwrap();
            assert!(is_controllable(&sys));
        }
    }

    #[test]
    fn aircraft_controllable_and_observable() {
        let sys = aircraft_sys();
        assert!(is_controllable(&sys));
        assert!(is_observable_pair(&sys.a, &sys.c));
        assert!(is_detectable_pair(&sys.a, &sys.c));
    }

    #[test]
    fn zero_system_not_controllable() {
        let sys = LtiSystem::new(
            DMatrix::zeros(3, 3),
            DVector::zeros(3),
            RowDVector::zeros(3),
        )
        .unwrap();
        assert!(!is_controllable(&sys));
    }

    #[test]
    fn chain_with_position_output_is_observable() {
        let (a, _) = integrator_chain(4);
        let mut c = RowDVector::zeros(4);
        c[0] = 1.0;
        assert!(is_observable_pair(&a, &c));
        assert!(is_detectable_pair(&a, &c));
    }

    #[test]
    fn zero_output_with_integrator_not_detectable() {
        let (a, _) = integrator_chain(2);
        let c = RowDVector::zeros(2);
        assert!(!is_detectable_pair(&a, &c));
    }

    #[test]
    fn canonical_of_chain_is_identity() {
        let (a, b) = integrator_chain(4);
        let sys = LtiSystem::new(a, b, RowDVector::zeros(4)).unwrap();
        let canon = to_controllable_canonical(&sys).unwrap();
        assert!((&canon.t - DMatrix::<f64>::identity(4, 4)).amax() < 1e-12);
        assert!(canon.a_row.amax() < 1e-12);
        assert!(canon.shape_residual(&sys) < tol::CANONICAL);
    }

    #[test]
    fn canonical_of_aircraft_matches_published_inverse() {
        let sys = aircraft_sys();
        let canon = to_controllable_canonical(&sys).unwrap();
        assert!(canon.shape_residual(&sys) < tol::CANONICAL);
        let expect_t_inv = DMatrix::from_row_slice(
            4,
            4,
            &[
                0.0, 0.0, 3.0, 0.0, //
                0.0, 0.0, 0.0, 3.0, //
                14.0, -4.0, -1.0, 0.0, //
                0.0, 14.0, -4.0, -1.0,
            ],
        );
        assert!(
            (&canon.t_inv - &expect_t_inv).amax() < 1e-9,
            "T^-1 deviates from the published matrix:\n{}",
            canon.t_inv
        );
        // last row of transformed A: char poly s^4 + 4 s^3 + 4 s^2
        let expect_a_row = [0.0, 0.0, -4.0, -4.0];
        for (got, want) in canon.a_row.iter().zip(&expect_a_row) {
            assert_abs_diff_eq!(got, want, epsilon = 1e-9);
        }
    }

    #[test]
    fn canonical_random_systems_satisfy_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut done = 0;
        while done < 100 {
            let m = rng.random_range(2..=5);
            let a = DMatrix::from_fn(m, m, |_, _| rng.random_range(-1.5..1.5));
            let b = DVector::from_fn(m, |_, _| rng.random_range(-1.5..1.5));
            let sys = LtiSystem::new(a, b, RowDVector::zeros(m)).unwrap();
            if !is_controllable(&sys) {
                continue;
            }
            let canon = to_controllable_canonical(&sys).unwrap();
            assert!(
                canon.shape_residual(&sys) < tol::CANONICAL,
                "residual {}",
                canon.shape_residual(&sys)
            );
            done += 1;
        }
    }

    #[test]
    fn canonical_rejects_uncontrollable() {
        let sys = LtiSystem::new(
            DMatrix::zeros(2, 2),
            DVector::zeros(2),
            RowDVector::zeros(2),
        )
        .unwrap();
        assert!(matches!(
            to_controllable_canonical(&sys),
            Err(Error::NotControllable)
        ));
    }

    #[test]
    fn place_observer_chain_m2() {
        let (a, _) = integrator_chain(2);
        let mut c = RowDVector::zeros(2);
        c[0] = 1.0;
        let desired = Polynomial::from_real_roots(&[-1.0, -1.0]); // (s+1)^2
        let placed = place_observer_gain(&a, &c, &desired).unwrap();
        assert_abs_diff_eq!(placed.gain[0], -2.0, epsilon = 1e-10);
        assert_abs_diff_eq!(placed.gain[1], -1.0, epsilon = 1e-10);
        assert!(placed.residual < tol::PLACEMENT);
    }

    #[test]
    fn place_observer_consistency_case() {
        // stable A, desired = its own characteristic polynomial
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 0.0, -2.0]);
        let mut c = RowDVector::zeros(2);
        c[0] = 1.0;
        let desired = char_poly(&a).unwrap();
        let placed = place_observer_gain(&a, &c, &desired).unwrap();
        let achieved = char_poly(&(&a + &placed.gain * &c)).unwrap();
        assert!(achieved.max_coeff_diff(&desired) < tol::PLACEMENT);
    }

    #[test]
    fn place_observer_rejects_unobservable() {
        let (a, _) = integrator_chain(2);
        let c = RowDVector::zeros(2);
        let desired = Polynomial::from_real_roots(&[-1.0, -1.0]);
        assert!(matches!(
            place_observer_gain(&a, &c, &desired),
            Err(Error::NotObservable)
        ));
    }

    #[test]
    fn char_poly_consistent_with_roots() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..100 {
            let n = rng.random_range(2..=6);
            let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-2.0..2.0));
            let p = char_poly(&m).unwrap();
            for r in poly_roots(&p).unwrap() {
                let scale = 1.0 + r.norm().powi(n as i32);
                assert!(p.eval_complex(r).norm() < tol::ROOT_RESIDUAL * scale);
            }
        }
    }

    #[test]
    fn from_real_roots_expands_binomials() {
        let p = Polynomial::from_real_roots(&[-1.0, -1.0, -1.0]);
        assert_eq!(p.coeffs(), &[1.0, 3.0, 3.0]);
        let q = Polynomial::from_real_roots(&[-0.5, -0.5, -0.5]);
        for (got, want) in q.coeffs().iter().zip(&[0.125, 0.75, 1.5]) {
            assert_abs_diff_eq!(got, want, epsilon = 1e-15);
        }
    }
}
