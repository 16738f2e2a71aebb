//! Randomized self-check suites runnable from the CLI (`hiord check`) and
//! reused by the acceptance tests.
//!
//! Each suite pits an implementation against an independent oracle (brute
//! force, root finding, direct formula evaluation) on seeded random cases.
//! Case inputs are generated sequentially from the seed, then evaluated
//! through [`crate::batch::map_cases`], so verdicts do not depend on the
//! `parallel` feature.

use crate::analysis::{disagreement, ergodicity_coefficient, StochasticMatrix};
use crate::batch::map_cases;
use crate::gains::{is_hurwitz, is_schur, make_continuous_gains, make_discrete_gains};
use crate::graph::{is_quasi_strongly_connected, laplacian, DirectedGraph};
use crate::lti::{mat_exp, poly_roots, Polynomial};
use crate::tol;
use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

/// Verdict of one check suite.
#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub cases: usize,
    pub failures: usize,
    pub detail: String,
}

impl CheckOutcome {
    fn from_failures(name: &str, cases: usize, failures: usize, detail: String) -> Self {
        Self {
            name: name.into(),
            passed: failures == 0,
            cases,
            failures,
            detail,
        }
    }
}

fn random_graph(rng: &mut impl Rng, n: usize, density: f64) -> DirectedGraph {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j && rng.random::<f64>() < density {
                edges.push((i, j, rng.random_range(0.1..2.0)));
            }
        }
    }
    DirectedGraph::new(n, &edges).expect("valid random graph")
}

fn random_stochastic(rng: &mut impl Rng, n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::from_fn(n, n, |_, _| rng.random_range(0.0..1.0));
    for i in 0..n {
        let sum: f64 = m.row(i).sum();
        for j in 0..n {
            m[(i, j)] /= sum;
        }
    }
    m
}

/// Brute-force transitive closure (repeated relaxation), independent of the
/// BFS used by the graph module.
fn closure_centers(g: &DirectedGraph) -> Vec<usize> {
    let n = g.n_nodes();
    let mut reach = vec![vec![false; n]; n];
    for v in 0..n {
        reach[v][v] = true;
    }
    for (recv, send, _) in g.edges() {
        reach[send][recv] = true;
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if reach[i][k] && reach[k][j] {
                    reach[i][j] = true;
                }
            }
        }
    }
    (0..n)
        .filter(|&v| (0..n).all(|w| reach[v][w]))
        .collect()
}

/// Gain identities `K2(A+BK1) = 0`, `K2 B = 1`, `K5(A+BK4) = K5`,
/// `K5 B = 1` on 100 random coefficient vectors, orders 2..=8,
/// residual below 1e-12.
pub fn check_gain_identities(seed: u64) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cases: Vec<(Vec<f64>, Vec<f64>)> = (0..100)
        .map(|_| {
            let m = rng.random_range(2..=8);
            let a = (0..m - 1).map(|_| rng.random_range(-3.0..3.0)).collect();
            let b = (0..m - 1).map(|_| rng.random_range(-2.0..2.0)).collect();
            (a, b)
        })
        .collect();
    let residuals = map_cases(&cases, |(a, b)| {
        let ra = make_continuous_gains(a).expect("non-empty").identity_residual();
        let rb = make_discrete_gains(b).expect("non-empty").identity_residual();
        ra.max(rb)
    });
    let failures = residuals.iter().filter(|&&r| r > 1e-12).count();
    let worst = residuals.iter().copied().fold(0.0, f64::max);
    CheckOutcome::from_failures(
        "gain-identities",
        cases.len(),
        failures,
        format!("worst residual {worst:.3e} (bound 1e-12)"),
    )
}

/// `exp(-L d)` is row-stochastic (tolerance 1e-9) for 50 random digraphs,
/// N <= 6, and d in {0.01, 0.1, 1}.
pub fn check_exp_laplacian_stochastic(seed: u64) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let graphs: Vec<DirectedGraph> = (0..50)
        .map(|_| {
            let n = rng.random_range(2..=6);
            random_graph(&mut rng, n, 0.5)
        })
        .collect();
    let verdicts = map_cases(&graphs, |g| {
        let l = laplacian(g).into_matrix();
        [0.01, 0.1, 1.0].iter().all(|&d| {
            let e = mat_exp(&(-&l), d).expect("square");
            crate::analysis::is_stochastic(&e, tol::STOCHASTIC)
        })
    });
    let failures = verdicts.iter().filter(|&&ok| !ok).count();
    CheckOutcome::from_failures(
        "exp-laplacian-stochastic",
        graphs.len() * 3,
        failures,
        "row sums within 1e-9 of 1, entries >= -1e-9".into(),
    )
}

/// Contraction `Delta(P r) <= tau(P) Delta(r)` on 10^4 random pairs; no
/// violation beyond 1e-12 allowed.
pub fn check_contraction(seed: u64) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cases: Vec<(DMatrix<f64>, DVector<f64>)> = (0..10_000)
        .map(|_| {
            let n = rng.random_range(2..=6);
            let p = random_stochastic(&mut rng, n);
            let r = DVector::from_fn(n, |_, _| rng.random_range(-5.0..5.0));
            (p, r)
        })
        .collect();
    let slacks = map_cases(&cases, |(p, r)| {
        let sm = StochasticMatrix::try_new(p.clone(), tol::STOCHASTIC).expect("stochastic");
        let lhs = disagreement(&(p * r));
        let rhs = ergodicity_coefficient(&sm) * disagreement(r);
        lhs - rhs
    });
    let failures = slacks.iter().filter(|&&s| s > 1e-12).count();
    let worst = slacks.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    CheckOutcome::from_failures(
        "disagreement-contraction",
        cases.len(),
        failures,
        format!("worst slack {worst:.3e} (must stay <= 1e-12)"),
    )
}

/// Routh–Hurwitz and Jury/Schur–Cohn verdicts against the root-finding
/// oracle on 1000 random monic polynomials each, degree <= 6.
pub fn check_stability_oracles(seed: u64) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hurwitz_cases: Vec<Polynomial> = (0..1000)
        .map(|_| {
            let d = rng.random_range(1..=6);
            Polynomial::from_monic_coeffs((0..d).map(|_| rng.random_range(-3.0..3.0)).collect())
        })
        .collect();
    let schur_cases: Vec<Polynomial> = (0..1000)
        .map(|_| {
            let d = rng.random_range(1..=6);
            Polynomial::from_monic_coeffs((0..d).map(|_| rng.random_range(-1.5..1.5)).collect())
        })
        .collect();
    let hurwitz_ok = map_cases(&hurwitz_cases, |p| {
        let oracle = poly_roots(p)
            .expect("degree >= 1")
            .iter()
            .all(|r| r.re < 0.0);
        is_hurwitz(p) == oracle
    });
    let schur_ok = map_cases(&schur_cases, |p| {
        let oracle = poly_roots(p)
            .expect("degree >= 1")
            .iter()
            .all(|r| r.norm() < 1.0);
        is_schur(p) == oracle
    });
    let failures = hurwitz_ok.iter().chain(&schur_ok).filter(|&&ok| !ok).count();
    CheckOutcome::from_failures(
        "stability-oracles",
        hurwitz_cases.len() + schur_cases.len(),
        failures,
        "tabulation verdicts vs companion-matrix roots, zero disagreements".into(),
    )
}

/// Quasi-strong connectivity against the brute-force transitive closure on
/// 10^4 random graphs, N <= 5, density <= 0.4.
pub fn check_qsc_oracle(seed: u64) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let graphs: Vec<DirectedGraph> = (0..10_000)
        .map(|_| {
            let n = rng.random_range(1..=5);
            let density = rng.random_range(0.0..0.4);
            random_graph(&mut rng, n, density)
        })
        .collect();
    let agree = map_cases(&graphs, |g| {
        let oracle = closure_centers(g);
        let (qsc, centers) = is_quasi_strongly_connected(g);
        qsc == !oracle.is_empty() && centers == oracle
    });
    let failures = agree.iter().filter(|&&ok| !ok).count();
    CheckOutcome::from_failures(
        "qsc-closure-oracle",
        graphs.len(),
        failures,
        "BFS centers vs transitive-closure centers".into(),
    )
}

/// Submultiplicativity `tau(PQ) <= tau(P) tau(Q)` on 2000 random pairs.
pub fn check_tau_submultiplicative(seed: u64) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cases: Vec<(DMatrix<f64>, DMatrix<f64>)> = (0..2000)
        .map(|_| {
            let n = rng.random_range(2..=6);
            (random_stochastic(&mut rng, n), random_stochastic(&mut rng, n))
        })
        .collect();
    let slacks = map_cases(&cases, |(p, q)| {
        let sp = StochasticMatrix::try_new(p.clone(), tol::STOCHASTIC).expect("stochastic");
        let sq = StochasticMatrix::try_new(q.clone(), tol::STOCHASTIC).expect("stochastic");
        let spq = StochasticMatrix::try_new(p * q, tol::STOCHASTIC).expect("product");
        ergodicity_coefficient(&spq)
            - ergodicity_coefficient(&sp) * ergodicity_coefficient(&sq)
    });
    let failures = slacks.iter().filter(|&&s| s > 1e-12).count();
    CheckOutcome::from_failures(
        "tau-submultiplicative",
        cases.len(),
        failures,
        "tau(PQ) <= tau(P) tau(Q)".into(),
    )
}

/// All suites in a named group. Known names: `graph`, `gains`, `stability`,
/// `stochastic`, `contraction`, `all`.
pub fn suite(name: &str, seed: u64) -> Option<Vec<CheckOutcome>> {
    match name {
        "graph" => Some(vec![check_qsc_oracle(seed)]),
        "gains" => Some(vec![check_gain_identities(seed)]),
        "stability" => Some(vec![check_stability_oracles(seed)]),
        "stochastic" => Some(vec![
            check_exp_laplacian_stochastic(seed),
            check_tau_submultiplicative(seed),
        ]),
        "contraction" => Some(vec![check_contraction(seed)]),
        "all" => Some(run_all(seed)),
        _ => None,
    }
}

pub fn run_all(seed: u64) -> Vec<CheckOutcome> {
    vec![
        check_qsc_oracle(seed),
        check_gain_identities(seed),
        check_stability_oracles(seed),
        check_exp_laplacian_stochastic(seed),
        check_tau_submultiplicative(seed),
        check_contraction(seed),
    ]
}
