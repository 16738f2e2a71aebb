//! Built-in scenarios: a network of single-link flexible-joint robots under
//! feedback linearization, aircraft vertical-motion agents under the
//! general-LTI output-feedback protocol, and discrete-time integrator
//! agents.
//!
//! All angles are radians. The robot parameters, gains, switching rules and
//! initial conditions follow the published example setups; the aircraft and
//! discrete examples ship a reconstructed default topology (a directed
//! 4-ring split into single-edge graphs, one per slot) because the original
//! figure's edge sets are not given in the text — override it via a config
//! file when a different topology is wanted.

use crate::engine::{ContinuousLaw, Scenario, ScenarioKind, Trajectory};
use crate::error::Result;
use crate::gains::{make_continuous_gains, make_discrete_gains};
use crate::graph::DirectedGraph;
use crate::lti::{to_controllable_canonical, LtiSystem};
use crate::protocols::u_state_feedback;
use crate::switching::{DiscreteSwitchingSignal, Schedule, StepRule, SwitchingSignal};
use crate::tol;
use nalgebra::{DMatrix, DVector, RowDVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

/// Physical parameters of the single-link flexible-joint robot.
#[derive(Debug, Clone, Copy)]
pub struct FlexibleJointParams {
    /// Link-side inertia.
    pub link_inertia: f64,
    /// Actuator inertia.
    pub actuator_inertia: f64,
    /// Link mass.
    pub mass: f64,
    /// Gravity.
    pub gravity: f64,
    /// Distance from the joint to the link's center of mass.
    pub com_distance: f64,
    /// Spring torsion coefficient.
    pub spring: f64,
}

impl Default for FlexibleJointParams {
    fn default() -> Self {
        Self {
            link_inertia: 1.0,
            actuator_inertia: 3.2,
            mass: 1.5,
            gravity: 9.8,
            com_distance: 0.8,
            spring: 2.5,
        }
    }
}

impl FlexibleJointParams {
    /// Gravity torque coefficient `M g L`.
    pub fn mgl(&self) -> f64 {
        self.mass * self.gravity * self.com_distance
    }
}

/// Physical parameters of the aircraft vertical-motion model.
#[derive(Debug, Clone, Copy)]
pub struct AircraftParams {
    pub inertia: f64,
    pub mass: f64,
    pub friction: f64,
    pub c_ze: f64,
    pub c_zw: f64,
    pub elevator_arm: f64,
    pub wing_arm: f64,
}

impl Default for AircraftParams {
    fn default() -> Self {
        Self {
            inertia: 1.0,
            mass: 1.0,
            friction: 4.0,
            c_ze: 1.0,
            c_zw: 5.0,
            elevator_arm: 3.0,
            wing_arm: 0.2,
        }
    }
}

impl AircraftParams {
    /// State `(alpha, alphadot, h, hdot)`, input `E`, output `h`.
    pub fn system(&self) -> LtiSystem {
        let j = self.inertia;
        let m = self.mass;
        let a = DMatrix::from_row_slice(
            4,
            4,
            &[
                0.0,
                1.0,
                0.0,
                0.0,
                -(self.c_ze * self.elevator_arm + self.c_zw * self.wing_arm) / j,
                -self.friction / j,
                0.0,
                0.0,
                0.0,
                0.0,
                0.0,
                1.0,
                (self.c_ze + self.c_zw) / m,
                0.0,
                0.0,
                0.0,
            ],
        );
        let b = DVector::from_column_slice(&[
            0.0,
            self.c_ze * self.elevator_arm / j,
            0.0,
            -self.c_ze / m,
        ]);
        let c = RowDVector::from_row_slice(&[0.0, 0.0, 1.0, 0.0]);
        LtiSystem::new(a, b, c).expect("consistent dimensions")
    }
}

/// Joint accelerations of the flexible-joint robot under torque `tau`.
pub fn robot_rhs(
    q1: f64,
    q2: f64,
    _dq1: f64,
    _dq2: f64,
    tau: f64,
    p: &FlexibleJointParams,
) -> (f64, f64) {
    let spring_torque = p.spring * (q1 - q2);
    let ddq1 = (-p.mgl() * q1.sin() - spring_torque) / p.link_inertia;
    let ddq2 = (tau + spring_torque) / p.actuator_inertia;
    (ddq1, ddq2)
}

/// Feedback-linearization state map: `(q1, dq1, q2, dq2)` to the chain
/// state `x = (q1, q1dot, q1ddot, q1dddot)`.
pub fn fl_state(q1: f64, dq1: f64, q2: f64, dq2: f64, p: &FlexibleJointParams) -> DVector<f64> {
    let i = p.link_inertia;
    let x3 = -p.mgl() * q1.sin() / i - p.spring * (q1 - q2) / i;
    let x4 = -p.mgl() * dq1 * q1.cos() / i - p.spring * (dq1 - dq2) / i;
    DVector::from_column_slice(&[q1, dq1, x3, x4])
}

/// Inverse of [`fl_state`]: recovers the joint configuration from the
/// chain state (the map is a diffeomorphism).
pub fn robot_config_from_state(x: &DVector<f64>, p: &FlexibleJointParams) -> (f64, f64, f64, f64) {
    let i = p.link_inertia;
    let k = p.spring;
    let q1 = x[0];
    let dq1 = x[1];
    let q2 = q1 + (i * x[2] + p.mgl() * q1.sin()) / k;
    let dq2 = dq1 + (i * x[3] + p.mgl() * dq1 * q1.cos()) / k;
    (q1, dq1, q2, dq2)
}

/// Linearizing torque: with this input the chain state satisfies
/// `x4dot = u` exactly.
pub fn fl_control(
    u: f64,
    q1: f64,
    dq1: f64,
    q2: f64,
    _dq2: f64,
    p: &FlexibleJointParams,
) -> f64 {
    let i = p.link_inertia;
    let j = p.actuator_inertia;
    let k = p.spring;
    let mgl_i = p.mgl() / i;
    let gravity_term = mgl_i * q1.sin() * (dq1 * dq1 + mgl_i * q1.cos() + k / i);
    let spring_term = (k / i) * (q1 - q2) * (mgl_i * q1.cos() + k / i + k / j);
    i * j / k * (u - gravity_term - spring_term)
}

/// At a consensus equilibrium the actuator angle satisfies
/// `q2* = q1* + (MgL/k) sin(q1*)`; returns the residual of that relation.
pub fn equilibrium_residual(q1: f64, q2: f64, p: &FlexibleJointParams) -> f64 {
    (q2 - q1 - p.mgl() / p.spring * q1.sin()).abs()
}

/// The three switching graphs of the robot example (5 nodes, unit weights).
pub fn example1_graphs() -> Vec<DirectedGraph> {
    vec![
        DirectedGraph::new(5, &[(1, 0, 1.0), (3, 0, 1.0), (4, 2, 1.0)]).expect("valid"),
        DirectedGraph::new(5, &[(0, 4, 1.0), (1, 2, 1.0), (1, 3, 1.0)]).expect("valid"),
        DirectedGraph::new(5, &[(2, 1, 1.0), (2, 3, 1.0), (3, 4, 1.0)]).expect("valid"),
    ]
}

/// Initial joint configuration of the robot example:
/// `(q1, q2)` pairs, all rates zero, radians.
pub fn example1_initial_joints() -> [(f64, f64); 5] {
    [
        (2.5, 1.5),
        (1.9, 3.14),
        (-2.4, -2.6),
        (1.57, -1.5),
        (-3.14, 0.0),
    ]
}

/// Robot network: five flexible-joint robots under the state-feedback
/// protocol through feedback linearization. 0.1 s slots cycling the three
/// graphs; `a = (1, 3, 3)` so `K1 = (0,-1,-3,-3)`, `K2 = (1,3,3,1)`.
pub fn example1_scenario() -> Scenario {
    let p = FlexibleJointParams::default();
    let gains = make_continuous_gains(&[1.0, 3.0, 3.0]).expect("non-empty");
    let duration = 60.0;
    let signal = SwitchingSignal::new(
        example1_graphs(),
        Schedule::Periodic {
            slot: 0.1,
            cycle: vec![0, 1, 2],
        },
        duration,
    )
    .expect("valid signal");
    let initial_states = example1_initial_joints()
        .iter()
        .map(|&(q1, q2)| fl_state(q1, 0.0, q2, 0.0, &p))
        .collect();
    Scenario {
        name: "example1".into(),
        kind: ScenarioKind::Continuous {
            law: ContinuousLaw::StateFeedback { gains },
            signal,
            duration,
            dt: 1e-3,
        },
        initial_states,
        initial_observers: None,
        store_every: 1,
        divergence_guard: tol::DIVERGENCE_GUARD,
        consensus_tol: tol::CONSENSUS,
    }
}

/// Reconstructed default topology for the aircraft and discrete examples:
/// a directed n-ring split into one single-edge graph per slot. The union
/// over any n consecutive slots is the full ring (strongly connected).
pub fn ring_split_graphs(n: usize) -> Vec<DirectedGraph> {
    (0..n)
        .map(|j| DirectedGraph::new(n, &[((j + 1) % n, j, 1.0)]).expect("valid"))
        .collect()
}

/// Published observer gain of the aircraft example; places the observer
/// spectrum at {-1, -2, -3, -4}.
pub fn example2_observer_gain() -> DVector<f64> {
    DVector::from_column_slice(&[1.0 / 3.0, -2.0 / 3.0, -6.0, -7.0])
}

/// Aircraft attitude consensus: four general-LTI agents, output-feedback
/// protocol in the controllable canonical coordinates. Only the altitude
/// is measured.
pub fn example2_scenario() -> Scenario {
    let plant = AircraftParams::default().system();
    let canon = to_controllable_canonical(&plant).expect("controllable");
    let gains = make_continuous_gains(&[1.0, 3.0, 3.0])
        .expect("non-empty")
        .with_observer_gain(example2_observer_gain());
    let duration = 500.0;
    let signal = SwitchingSignal::new(
        ring_split_graphs(4),
        Schedule::Periodic {
            slot: 0.1,
            cycle: vec![0, 1, 2, 3],
        },
        duration,
    )
    .expect("valid signal");
    let altitudes = [8000.0, 6500.0, 7000.0, 5000.0];
    let estimates = [10000.0, 7000.0, 6000.0, 4000.0];
    let initial_states = altitudes
        .iter()
        .map(|&h| DVector::from_column_slice(&[0.0, 0.0, h, 0.0]))
        .collect();
    let initial_observers = estimates
        .iter()
        .map(|&h| DVector::from_column_slice(&[0.0, 0.0, h, 0.0]))
        .collect();
    Scenario {
        name: "example2".into(),
        kind: ScenarioKind::Continuous {
            law: ContinuousLaw::GeneralLti {
                plant,
                gains,
                canon,
            },
            signal,
            duration,
            dt: 1e-3,
        },
        initial_states,
        initial_observers: Some(initial_observers),
        store_every: 10,
        divergence_guard: tol::DIVERGENCE_GUARD,
        consensus_tol: tol::CONSENSUS,
    }
}

/// Published observer gain of the discrete example; places the observer
/// spectrum at a quadruple eigenvalue -1/2.
pub fn example3_observer_gain() -> DVector<f64> {
    DVector::from_column_slice(&[-2.0, -1.5, -0.5, -1.0 / 16.0])
}

/// Discrete-time consensus: four 4th-order integrator agents with output
/// `x_1`, gains from `b = (1/8, 3/4, 3/2)`, observers started at zero,
/// initial states uniform on `[-5, 5]^4` from the given seed.
pub fn example3_scenario(seed: u64) -> Scenario {
    let gains = make_discrete_gains(&[0.125, 0.75, 1.5])
        .expect("non-empty")
        .with_observer_gain(example3_observer_gain());
    let signal = DiscreteSwitchingSignal::new(
        ring_split_graphs(4),
        StepRule::Periodic {
            cycle: vec![0, 1, 2, 3],
        },
    )
    .expect("valid signal");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let initial_states = (0..4)
        .map(|_| DVector::from_fn(4, |_, _| rng.random_range(-5.0..5.0)))
        .collect();
    let initial_observers = (0..4).map(|_| DVector::zeros(4)).collect();
    Scenario {
        name: "example3".into(),
        kind: ScenarioKind::Discrete {
            gains,
            output: RowDVector::from_row_slice(&[1.0, 0.0, 0.0, 0.0]),
            signal,
            steps: 400,
        },
        initial_states,
        initial_observers: Some(initial_observers),
        store_every: 1,
        divergence_guard: tol::DIVERGENCE_GUARD,
        consensus_tol: tol::CONSENSUS,
    }
}

/// Resolves a built-in scenario name. `seed` only affects `example3`.
pub fn builtin(name: &str, seed: u64) -> Option<Scenario> {
    match name {
        "example1" => Some(example1_scenario()),
        "example2" => Some(example2_scenario()),
        "example3" => Some(example3_scenario(seed)),
        _ => None,
    }
}

/// Joint trajectories `(q1, q2)` per agent recovered from a chain-state
/// trajectory of the robot network.
pub fn robot_joint_series(tr: &Trajectory, p: &FlexibleJointParams) -> Vec<Vec<(f64, f64)>> {
    (0..tr.n_agents)
        .map(|i| {
            (0..tr.n_samples())
                .map(|k| {
                    let x = tr.agent_state(k, i);
                    let (q1, _, q2, _) = robot_config_from_state(&x, p);
                    (q1, q2)
                })
                .collect()
        })
        .collect()
}

/// Integrates the nonlinear robot network directly: each robot follows the
/// plant equations with the linearizing torque wrapped around the
/// state-feedback protocol. Returns per-sample `(q1, dq1, q2, dq2)` rows
/// per agent. Used to validate that the linearization is exact.
pub fn simulate_robot_network(
    p: &FlexibleJointParams,
    a_coeffs: &[f64],
    signal: &SwitchingSignal,
    initial_joints: &[(f64, f64)],
    duration: f64,
    dt: f64,
) -> Result<(Vec<f64>, Vec<Vec<[f64; 4]>>)> {
    let gains = make_continuous_gains(a_coeffs)?;
    let n = initial_joints.len();
    let mut q: Vec<[f64; 4]> = initial_joints
        .iter()
        .map(|&(q1, q2)| [q1, 0.0, q2, 0.0])
        .collect();
    let rhs = |q: &[[f64; 4]], g: &DirectedGraph| -> Vec<[f64; 4]> {
        let xs: Vec<DVector<f64>> = q
            .iter()
            .map(|&[q1, dq1, q2, dq2]| fl_state(q1, dq1, q2, dq2, p))
            .collect();
        (0..n)
            .map(|i| {
                let [q1, dq1, q2, dq2] = q[i];
                let u = u_state_feedback(i, &xs, g, &gains);
                let tau = fl_control(u, q1, dq1, q2, dq2, p);
                let (ddq1, ddq2) = robot_rhs(q1, q2, dq1, dq2, tau, p);
                [dq1, ddq1, dq2, ddq2]
            })
            .collect()
    };
    let n_steps = (duration / dt).round().max(1.0) as usize;
    let mut times = vec![0.0];
    let mut samples = vec![q.clone()];
    for step in 0..n_steps {
        let t0 = step as f64 * dt;
        let t1 = (step + 1) as f64 * dt;
        let mut cuts = vec![t0];
        cuts.extend(signal.switch_times_in(t0, t1));
        cuts.push(t1);
        for seg in cuts.windows(2) {
            let h = seg[1] - seg[0];
            if h <= 0.0 {
                continue;
            }
            let g = signal.graph_at(0.5 * (seg[0] + seg[1]))?;
            let k1 = rhs(&q, g);
            let q2v: Vec<[f64; 4]> = add_scaled(&q, &k1, 0.5 * h);
            let k2 = rhs(&q2v, g);
            let q3v = add_scaled(&q, &k2, 0.5 * h);
            let k3 = rhs(&q3v, g);
            let q4v = add_scaled(&q, &k3, h);
            let k4 = rhs(&q4v, g);
            for i in 0..n {
                for c in 0..4 {
                    q[i][c] += h / 6.0 * (k1[i][c] + 2.0 * k2[i][c] + 2.0 * k3[i][c] + k4[i][c]);
                }
            }
        }
        times.push(t1);
        samples.push(q.clone());
    }
    // transpose to per-agent series
    let per_agent = (0..n)
        .map(|i| samples.iter().map(|s| s[i]).collect())
        .collect();
    Ok((times, per_agent))
}

fn add_scaled(base: &[[f64; 4]], delta: &[[f64; 4]], h: f64) -> Vec<[f64; 4]> {
    base.iter()
        .zip(delta)
        .map(|(b, d)| {
            let mut out = [0.0; 4];
            for c in 0..4 {
                out[c] = b[c] + h * d[c];
            }
            out
        })
        .collect()
}
