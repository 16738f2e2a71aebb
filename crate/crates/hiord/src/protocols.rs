//! The four consensus control laws, their closed-loop assemblies, and the
//! order-reduction map.
//!
//! Neighbor sums iterate the receiver adjacency lists of the active graph;
//! the dense Kronecker closed loop exists only for cross-validation and the
//! reduction-identity checks.

use crate::gains::{ContinuousGainSet, DiscreteGainSet};
use crate::graph::{laplacian, DirectedGraph};
use crate::lti::CanonicalForm;
use nalgebra::{DMatrix, DVector, RowDVector};

fn row_dot(row: &RowDVector<f64>, v: &DVector<f64>) -> f64 {
    row.iter().zip(v.iter()).map(|(a, b)| a * b).sum()
}

/// State-feedback law: `u_i = K1 x_i - sum_j alpha_ij K2 (x_i - x_j)`.
pub fn u_state_feedback(
    i: usize,
    states: &[DVector<f64>],
    g: &DirectedGraph,
    gains: &ContinuousGainSet,
) -> f64 {
    coupled_law(i, states, g, gains.k1(), gains.k2())
}

/// Output-feedback law: the state-feedback law evaluated on the observer
/// states.
pub fn u_output_feedback(
    i: usize,
    observers: &[DVector<f64>],
    g: &DirectedGraph,
    gains: &ContinuousGainSet,
) -> f64 {
    coupled_law(i, observers, g, gains.k1(), gains.k2())
}

fn coupled_law(
    i: usize,
    states: &[DVector<f64>],
    g: &DirectedGraph,
    k1: &RowDVector<f64>,
    k2: &RowDVector<f64>,
) -> f64 {
    let own = row_dot(k1, &states[i]);
    let mut coupling = 0.0;
    for &(j, w) in g.neighbors_in(i) {
        let diff = &states[i] - &states[j];
        coupling += w * row_dot(k2, &diff);
    }
    own - coupling
}

/// Observer update `sdot_i = (A + K3 C) s_i + B u_i - K3 y_i`.
pub fn observer_rhs(
    s_i: &DVector<f64>,
    u_i: f64,
    y_i: f64,
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    c: &RowDVector<f64>,
    k3: &DVector<f64>,
) -> DVector<f64> {
    let innovation = row_dot(c, s_i) - y_i;
    a * s_i + k3 * innovation + b * u_i
}

/// General-LTI law: the chain-coordinate protocol applied to `T_g s_i`,
/// with the plant's intrinsic last-row dynamics cancelled first:
/// `u_i = -a_g^T (T_g s_i) + K1 (T_g s_i) - sum_j alpha_ij K2 T_g (s_i - s_j)`.
pub fn u_general_lti(
    i: usize,
    observers: &[DVector<f64>],
    g: &DirectedGraph,
    gains: &ContinuousGainSet,
    canon: &CanonicalForm,
) -> f64 {
    let chain_i = &canon.t * &observers[i];
    let own = -canon.a_row.dot(&chain_i) + row_dot(gains.k1(), &chain_i);
    let mut coupling = 0.0;
    for &(j, w) in g.neighbors_in(i) {
        let diff = &canon.t * (&observers[i] - &observers[j]);
        coupling += w * row_dot(gains.k2(), &diff);
    }
    own - coupling
}

/// Discrete law:
/// `u_i = K4 z_i - (1 / (1 + d_i)) sum_j alpha_ij K5 (z_i - z_j)`
/// with `d_i` the in-weight sum of agent `i`.
pub fn u_discrete(
    i: usize,
    observers: &[DVector<f64>],
    g: &DirectedGraph,
    gains: &DiscreteGainSet,
) -> f64 {
    let own = row_dot(gains.k4(), &observers[i]);
    let d = g.in_weight(i);
    let mut coupling = 0.0;
    for &(j, w) in g.neighbors_in(i) {
        let diff = &observers[i] - &observers[j];
        coupling += w * row_dot(gains.k5(), &diff);
    }
    own - coupling / (1.0 + d)
}

/// Discrete observer step `z_i[k+1] = (A + K6 C) z_i + B u_i - K6 y_i`.
pub fn discrete_observer_step(
    z_i: &DVector<f64>,
    u_i: f64,
    y_i: f64,
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    c: &RowDVector<f64>,
    k6: &DVector<f64>,
) -> DVector<f64> {
    let innovation = row_dot(c, z_i) - y_i;
    a * z_i + k6 * innovation + b * u_i
}

/// Kronecker-assembled closed loop of the state-feedback protocol:
/// `I_N (x) (A + B K1) - L (x) (B K2)`.
pub fn closed_loop_matrix(g: &DirectedGraph, gains: &ContinuousGainSet) -> DMatrix<f64> {
    let n = g.n_nodes();
    let m = gains.order();
    let (a, b) = crate::lti::integrator_chain(m);
    let local = a + &b * gains.k1();
    let coupling = &b * gains.k2();
    let l = laplacian(g).into_matrix();
    DMatrix::identity(n, n).kronecker(&local) - l.kronecker(&coupling)
}

/// Coupling matrix `S[k]` of the discrete reduced system: diagonal
/// `d_i / (1 + d_i)`, off-diagonal `-alpha_ij / (1 + d_i)`. `I - S` is
/// row-stochastic with strictly positive diagonal.
pub fn s_matrix(g: &DirectedGraph) -> DMatrix<f64> {
    let n = g.n_nodes();
    let mut s = DMatrix::zeros(n, n);
    for i in 0..n {
        let d = g.in_weight(i);
        s[(i, i)] = d / (1.0 + d);
        for &(j, w) in g.neighbors_in(i) {
            s[(i, j)] = -w / (1.0 + d);
        }
    }
    s
}

/// Per-agent reduction `xbar_i = K x_i`.
pub fn reduce(states: &[DVector<f64>], k: &RowDVector<f64>) -> DVector<f64> {
    DVector::from_iterator(states.len(), states.iter().map(|x| row_dot(k, x)))
}

/// Reduction of a stacked `N*m` vector.
pub fn reduce_stacked(stacked: &DVector<f64>, k: &RowDVector<f64>, n: usize) -> DVector<f64> {
    let m = k.len();
    DVector::from_fn(n, |i, _| (0..m).map(|c| k[c] * stacked[i * m + c]).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gains::{make_continuous_gains, make_discrete_gains};
    use approx::assert_abs_diff_eq;
    use nalgebra::Complex;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn vecs(data: &[&[f64]]) -> Vec<DVector<f64>> {
        data.iter().map(|x| DVector::from_column_slice(x)).collect()
    }

    #[test]
    fn state_feedback_no_neighbors() {
        let gains = make_continuous_gains(&[1.0, 3.0, 3.0]).unwrap();
        let g = DirectedGraph::empty(2);
        let states = vecs(&[&[1.0, 2.0, -1.0, 0.5], &[0.0, 0.0, 0.0, 0.0]]);
        let u = u_state_feedback(0, &states, &g, &gains);
        let expect = row_dot(gains.k1(), &states[0]);
        assert_eq!(u, expect);
    }

    #[test]
    fn state_feedback_identical_states_drops_coupling() {
        let gains = make_continuous_gains(&[1.0, 3.0, 3.0]).unwrap();
        let g = DirectedGraph::new(2, &[(0, 1, 2.0), (1, 0, 1.0)]).unwrap();
        let x = DVector::from_column_slice(&[0.4, -0.2, 1.0, 0.0]);
        let states = vec![x.clone(), x.clone()];
        let u = u_state_feedback(0, &states, &g, &gains);
        assert_abs_diff_eq!(u, row_dot(gains.k1(), &x), epsilon = 1e-15);
    }

    #[test]
    fn state_feedback_hand_case() {
        // 2 agents, m = 2, a = (1), alpha_21 = 1, x1 = (1,0), x2 = (0,0):
        // u_2 = K1 x_2 - K2 (x_2 - x_1) = 0 + (1,1)(1,0)^T = 1
        let gains = make_continuous_gains(&[1.0]).unwrap();
        let g = DirectedGraph::new(2, &[(1, 0, 1.0)]).unwrap();
        let states = vecs(&[&[1.0, 0.0], &[0.0, 0.0]]);
        assert_abs_diff_eq!(
            u_state_feedback(1, &states, &g, &gains),
            1.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn closed_loop_empty_graph_block_diagonal() {
        let gains = make_continuous_gains(&[1.0]).unwrap();
        let g = DirectedGraph::empty(2);
        let cl = closed_loop_matrix(&g, &gains);
        let expect = DMatrix::from_row_slice(
            4,
            4,
            &[
                0.0, 1.0, 0.0, 0.0, //
                0.0, -1.0, 0.0, 0.0, //
                0.0, 0.0, 0.0, 1.0, //
                0.0, 0.0, 0.0, -1.0,
            ],
        );
        assert_eq!(cl, expect);
    }

    #[test]
    fn closed_loop_path_graph_hand_kronecker() {
        // N = 2, agent 1 receives from agent 0 with weight 1, m = 2, a = (1)
        let gains = make_continuous_gains(&[1.0]).unwrap();
        let g = DirectedGraph::new(2, &[(1, 0, 1.0)]).unwrap();
        let cl = closed_loop_matrix(&g, &gains);
        // L = [[0,0],[-1,1]]; A+BK1 = [[0,1],[0,-1]]; BK2 = [[0,0],[1,1]]
        let expect = DMatrix::from_row_slice(
            4,
            4,
            &[
                0.0, 1.0, 0.0, 0.0, //
                0.0, -1.0, 0.0, 0.0, //
                0.0, 0.0, 0.0, 1.0, //
                1.0, 1.0, -1.0, -2.0,
            ],
        );
        assert_eq!(cl, expect);
    }

    #[test]
    fn closed_loop_matches_per_agent_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        for _ in 0..50 {
            let n = rng.random_range(2..=5);
            let m = rng.random_range(2..=4);
            let a: Vec<f64> = (0..m - 1).map(|_| rng.random_range(0.2..2.0)).collect();
            let gains = make_continuous_gains(&a).unwrap();
            let mut edges = Vec::new();
            for i in 0..n {
                for j in 0..n {
                    if i != j && rng.random::<f64>() < 0.4 {
                        edges.push((i, j, rng.random_range(0.2..1.5)));
                    }
                }
            }
            let g = DirectedGraph::new(n, &edges).unwrap();
            let states: Vec<DVector<f64>> = (0..n)
                .map(|_| DVector::from_fn(m, |_, _| rng.random_range(-2.0..2.0)))
                .collect();
            let stacked =
                DVector::from_iterator(n * m, states.iter().flat_map(|x| x.iter().copied()));
            let dense = closed_loop_matrix(&g, &gains) * &stacked;
            let (am, bm) = crate::lti::integrator_chain(m);
            for i in 0..n {
                let u = u_state_feedback(i, &states, &g, &gains);
                let agent = &am * &states[i] + &bm * u;
                for c in 0..m {
                    assert_abs_diff_eq!(dense[i * m + c], agent[c], epsilon = 1e-10);
                }
            }
        }
    }

    #[test]
    fn reduction_identity_exact() {
        // (I (x) K2) * closed_loop = -L (x) K2
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        for _ in 0..30 {
            let n = rng.random_range(2..=5);
            let m = rng.random_range(2..=4);
            let a: Vec<f64> = (0..m - 1).map(|_| rng.random_range(0.2..2.0)).collect();
            let gains = make_continuous_gains(&a).unwrap();
            let mut edges = Vec::new();
            for i in 0..n {
                for j in 0..n {
                    if i != j && rng.random::<f64>() < 0.5 {
                        edges.push((i, j, rng.random_range(0.2..1.5)));
                    }
                }
            }
            let g = DirectedGraph::new(n, &edges).unwrap();
            let k2 = DMatrix::from_fn(1, m, |_, j| gains.k2()[j]);
            let reducer = DMatrix::identity(n, n).kronecker(&k2);
            let lhs = &reducer * closed_loop_matrix(&g, &gains);
            let l = laplacian(&g).into_matrix();
            let rhs = -&l * reducer;
            assert!((lhs - rhs).amax() <= 1e-12);
        }
    }

    #[test]
    fn observer_rhs_cancels_at_zero_error() {
        // s_i = x_i: K3 (C s - y) = 0, so the rhs reduces to A s + B u
        let (a, b) = crate::lti::integrator_chain(3);
        let c = RowDVector::from_row_slice(&[1.0, 0.0, 0.0]);
        let k3 = DVector::from_column_slice(&[-3.0, -3.0, -1.0]);
        let x = DVector::from_column_slice(&[0.7, -0.4, 0.2]);
        let u = 0.9;
        let y = row_dot(&c, &x);
        let rhs = observer_rhs(&x, u, y, &a, &b, &c, &k3);
        let expect = &a * &x + &b * u;
        assert!((rhs - expect).amax() < 1e-15);
    }

    #[test]
    fn observer_error_matches_matrix_exponential() {
        // closed-form error solution e(t) = exp((A + K3 C) t) e(0)
        let (a, b) = crate::lti::integrator_chain(2);
        let c = RowDVector::from_row_slice(&[1.0, 0.0]);
        let desired = crate::lti::Polynomial::from_real_roots(&[-1.0, -1.0]);
        let k3 = crate::lti::place_observer_gain(&a, &c, &desired)
            .unwrap()
            .gain;
        let x0 = DVector::from_column_slice(&[1.0, 0.0]);
        let s0 = DVector::from_column_slice(&[-0.5, 0.3]);
        // integrate the coupled plant+observer with u = 0 via RK4
        let dt = 1e-3;
        let mut x = x0.clone();
        let mut s = s0.clone();
        let rhs = |x: &DVector<f64>, s: &DVector<f64>| {
            let y = row_dot(&c, x);
            (&a * x, observer_rhs(s, 0.0, y, &a, &b, &c, &k3))
        };
        for _ in 0..2000 {
            let (kx1, ks1) = rhs(&x, &s);
            let (kx2, ks2) = rhs(&(&x + &kx1 * (dt / 2.0)), &(&s + &ks1 * (dt / 2.0)));
            let (kx3, ks3) = rhs(&(&x + &kx2 * (dt / 2.0)), &(&s + &ks2 * (dt / 2.0)));
            let (kx4, ks4) = rhs(&(&x + &kx3 * dt), &(&s + &ks3 * dt));
            x += (kx1 + kx2 * 2.0 + kx3 * 2.0 + kx4) * (dt / 6.0);
            s += (ks1 + ks2 * 2.0 + ks3 * 2.0 + ks4) * (dt / 6.0);
        }
        let t_end = 2.0;
        let closed = &a + &k3 * &c;
        let predicted = crate::lti::mat_exp(&closed, t_end).unwrap() * (x0 - s0);
        let err = &x - &s;
        assert!((err - predicted).amax() < 1e-9);
    }

    #[test]
    fn general_lti_reduces_to_output_feedback_for_chain() {
        let (a, b) = crate::lti::integrator_chain(3);
        let c = RowDVector::from_row_slice(&[1.0, 0.0, 0.0]);
        let sys = crate::lti::LtiSystem::new(a, b, c).unwrap();
        let canon = crate::lti::to_controllable_canonical(&sys).unwrap();
        let gains = make_continuous_gains(&[1.0, 2.0]).unwrap();
        let g = DirectedGraph::new(2, &[(1, 0, 1.0)]).unwrap();
        let observers = vecs(&[&[0.3, -0.5, 0.8], &[1.0, 0.2, -0.1]]);
        for i in 0..2 {
            let u_lti = u_general_lti(i, &observers, &g, &gains, &canon);
            let u_of = u_output_feedback(i, &observers, &g, &gains);
            assert_abs_diff_eq!(u_lti, u_of, epsilon = 1e-12);
        }
    }

    #[test]
    fn general_lti_zero_in_kernel() {
        // all observers equal and in the kernel of (-a_g^T + K1) T_g -> u = 0
        let sys = {
            let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -2.0, -3.0]);
            let b = DVector::from_column_slice(&[0.0, 1.0]);
            let c = RowDVector::from_row_slice(&[1.0, 0.0]);
            crate::lti::LtiSystem::new(a, b, c).unwrap()
        };
        let canon = crate::lti::to_controllable_canonical(&sys).unwrap();
        let gains = make_continuous_gains(&[1.0]).unwrap();
        let row = (-canon.a_row.transpose() + gains.k1()) * &canon.t;
        let kernel = DVector::from_column_slice(&[row[1], -row[0]]);
        let g = DirectedGraph::new(2, &[(1, 0, 1.0)]).unwrap();
        let observers = vec![kernel.clone(), kernel];
        for i in 0..2 {
            let u = u_general_lti(i, &observers, &g, &gains, &canon);
            assert_abs_diff_eq!(u, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn s_matrix_complement_is_row_stochastic() {
        let mut rng = ChaCha8Rng::seed_from_u64(59);
        for _ in 0..100 {
            let n = rng.random_range(2..=6);
            let mut edges = Vec::new();
            for i in 0..n {
                for j in 0..n {
                    if i != j && rng.random::<f64>() < 0.4 {
                        edges.push((i, j, rng.random_range(0.2..2.0)));
                    }
                }
            }
            let g = DirectedGraph::new(n, &edges).unwrap();
            let p = DMatrix::identity(n, n) - s_matrix(&g);
            for i in 0..n {
                assert!(p[(i, i)] > 0.0, "diagonal must stay positive");
                assert!(p.row(i).iter().all(|&x| x >= 0.0));
                assert_abs_diff_eq!(p.row(i).sum(), 1.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn s_matrix_two_agent_hand_case() {
        let g = DirectedGraph::new(2, &[(0, 1, 1.0), (1, 0, 1.0)]).unwrap();
        let p = DMatrix::identity(2, 2) - s_matrix(&g);
        let expect = DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.5, 0.5]);
        assert!((p - expect).amax() < 1e-15);
    }

    #[test]
    fn u_discrete_isolated_agent() {
        let gains = make_discrete_gains(&[0.125, 0.75, 1.5]).unwrap();
        let g = DirectedGraph::empty(2);
        let observers = vecs(&[&[1.0, -0.5, 0.25, 2.0], &[0.0, 0.0, 0.0, 0.0]]);
        let u = u_discrete(0, &observers, &g, &gains);
        assert_abs_diff_eq!(u, row_dot(gains.k4(), &observers[0]), epsilon = 1e-15);
    }

    #[test]
    fn reduce_consensus_configuration() {
        // x_i = (c / a_1, 0, ..., 0) reduces to c for every agent
        let gains = make_continuous_gains(&[2.0, 3.0]).unwrap();
        let c = 1.7;
        let x = DVector::from_column_slice(&[c / 2.0, 0.0, 0.0]);
        let states = vec![x.clone(), x.clone(), x];
        let red = reduce(&states, gains.k2());
        for i in 0..3 {
            assert_abs_diff_eq!(red[i], c, epsilon = 1e-14);
        }
    }

    #[test]
    fn reduce_m2_values() {
        let gains = make_continuous_gains(&[1.0]).unwrap();
        let states = vecs(&[&[3.0, -1.0]]);
        let red = reduce(&states, gains.k2());
        assert_abs_diff_eq!(red[0], 2.0, epsilon = 1e-15);
    }

    #[test]
    fn reduce_stacked_matches_per_agent() {
        let gains = make_continuous_gains(&[1.0, 3.0, 3.0]).unwrap();
        let states = vecs(&[&[1.0, 2.0, 3.0, 4.0], &[-1.0, 0.5, 0.0, 2.0]]);
        let stacked = DVector::from_iterator(8, states.iter().flat_map(|x| x.iter().copied()));
        let a = reduce(&states, gains.k2());
        let b = reduce_stacked(&stacked, gains.k2(), 2);
        assert!((a - b).amax() < 1e-15);
    }

    #[test]
    fn divergent_mode_is_in_reduction_kernel() {
        // K2 (1, r, r^2, ..., r^{m-1})^T = p(r) = 0 at characteristic roots
        let a = vec![-1.0, 3.0, 3.0];
        let gains = make_continuous_gains(&a).unwrap();
        let p = gains.characteristic_polynomial();
        for root in crate::lti::poly_roots(&p).unwrap() {
            let v: Vec<Complex<f64>> = (0..4).map(|k| root.powu(k as u32)).collect();
            let dot: Complex<f64> = gains.k2().iter().zip(&v).map(|(&k, &vi)| vi * k).sum();
            assert!(dot.norm() < 1e-6);
        }
    }
}
