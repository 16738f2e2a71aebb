//! Consensus of high-order integral multi-agent systems under switching
//! directed communication topology.
//!
//! The crate provides:
//!
//! * weighted digraphs, Laplacians and joint-connectivity checks ([`graph`],
//!   [`switching`]),
//! * a small dense LTI toolkit: matrix exponential, characteristic
//!   polynomials, root finding, controllable canonical forms and observer
//!   pole placement ([`lti`]),
//! * the consensus gain constructions and Hurwitz/Schur stability tests
//!   ([`gains`]),
//! * the state-feedback, output-feedback, general-LTI and discrete-time
//!   consensus protocols together with the order-reduction map
//!   ([`protocols`]),
//! * a deterministic fixed-step simulation engine with consensus detection
//!   and convergence oracles ([`engine`]),
//! * stochastic-matrix machinery: ergodicity coefficients, disagreement
//!   contraction and transition-matrix products ([`analysis`]),
//! * ready-made scenarios: a network of flexible-joint robots under feedback
//!   linearization, aircraft vertical-motion agents, and discrete-time
//!   integrator agents ([`scenarios`]),
//! * randomized self-check suites ([`checks`]) and batch runners
//!   ([`batch`]).
//!
//! Batch operations use rayon when the default `parallel` feature is
//! enabled; build with `--no-default-features` for a fully sequential
//! library.

pub use nalgebra;

pub mod analysis;
pub mod batch;
pub mod checks;
pub mod engine;
pub mod error;
pub mod gains;
pub mod graph;
pub mod lti;
pub mod protocols;
pub mod scenarios;
pub mod switching;
pub mod tol;

pub use engine::{Scenario, Trajectory};
pub use error::{Error, Result};
pub use graph::DirectedGraph;
pub use switching::{DiscreteSwitchingSignal, SwitchingSignal};
