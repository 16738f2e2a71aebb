//! Weighted directed graphs over a fixed node set, their Laplacians and
//! connectivity predicates.
//!
//! Edge direction follows the information flow of the protocols: the edge
//! `(receiver i, sender j)` exists when agent `i` receives the state of
//! agent `j`. Storage is receiver-indexed so the per-agent neighbor sums in
//! the control laws are O(in-degree). Node indices are 0-based throughout
//! the API; configuration files use the 1-based convention and are shifted
//! by the parser.

use crate::error::{Error, Result};
use crate::tol;
use nalgebra::DMatrix;

/// Immutable weighted digraph on `n` nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectedGraph {
    n: usize,
    /// `in_edges[i]` lists `(sender j, weight)` pairs, sorted by sender.
    in_edges: Vec<Vec<(usize, f64)>>,
}

/// Laplacian of a [`DirectedGraph`]: diagonal holds in-degree weight sums,
/// off-diagonal `(i, j)` holds minus the weight of edge `(i, j)`. Rows sum
/// to zero by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianMatrix(DMatrix<f64>);

impl LaplacianMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }
}

impl DirectedGraph {
    /// Builds a graph from `(receiver, sender, weight)` triples.
    ///
    /// Rejects self-edges, non-positive weights, out-of-range indices and
    /// repeated ordered pairs.
    pub fn new(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidGraph("node count must be positive".into()));
        }
        let mut in_edges = vec![Vec::new(); n];
        for &(recv, send, w) in edges {
            if recv >= n || send >= n {
                return Err(Error::InvalidGraph(format!(
                    "edge ({recv}, {send}) out of range for {n} nodes"
                )));
            }
            if recv == send {
                return Err(Error::InvalidGraph(format!("self-edge at node {recv}")));
            }
            if !(w > 0.0) {
                return Err(Error::InvalidGraph(format!(
                    "edge ({recv}, {send}) has non-positive weight {w}"
                )));
            }
            if in_edges[recv].iter().any(|&(j, _)| j == send) {
                return Err(Error::InvalidGraph(format!(
                    "duplicate edge ({recv}, {send})"
                )));
            }
            in_edges[recv].push((send, w));
        }
        for list in &mut in_edges {
            list.sort_by_key(|&(j, _)| j);
        }
        Ok(Self { n, in_edges })
    }

    /// Graph with no edges.
    pub fn empty(n: usize) -> Self {
        Self::new(n, &[]).expect("positive node count")
    }

    /// Unit-weight directed cycle `0 -> 1 -> ... -> n-1 -> 0`
    /// (arrows denote information flow sender -> receiver).
    pub fn directed_cycle(n: usize) -> Self {
        let edges: Vec<_> = (0..n).map(|j| ((j + 1) % n, j, 1.0)).collect();
        Self::new(n, &edges).expect("valid cycle")
    }

    pub fn n_nodes(&self) -> usize {
        self.n
    }

    pub fn n_edges(&self) -> usize {
        self.in_edges.iter().map(Vec::len).sum()
    }

    /// `(sender, weight)` pairs feeding node `i`.
    pub fn neighbors_in(&self, i: usize) -> &[(usize, f64)] {
        &self.in_edges[i]
    }

    /// Sum of incoming edge weights of node `i` (the Laplacian diagonal).
    pub fn in_weight(&self, i: usize) -> f64 {
        self.in_edges[i].iter().map(|&(_, w)| w).sum()
    }

    /// All edges as `(receiver, sender, weight)` triples.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.in_edges
            .iter()
            .enumerate()
            .flat_map(|(i, list)| list.iter().map(move |&(j, w)| (i, j, w)))
    }

    pub fn weight(&self, receiver: usize, sender: usize) -> Option<f64> {
        self.in_edges[receiver]
            .iter()
            .find(|&&(j, _)| j == sender)
            .map(|&(_, w)| w)
    }

    /// Structural equality with weights compared to [`tol::EXACT`].
    pub fn structurally_eq(&self, other: &Self) -> bool {
        self.n == other.n
            && self
                .edges()
                .zip(other.edges())
                .all(|((i, j, w), (i2, j2, w2))| i == i2 && j == j2 && (w - w2).abs() <= tol::EXACT)
            && self.n_edges() == other.n_edges()
    }

    /// Out-neighbor lists: `out[j]` holds every receiver of node `j`.
    fn out_adjacency(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n];
        for (recv, send, _) in self.edges() {
            out[send].push(recv);
        }
        out
    }

    /// Nodes reachable from `start` along information flow, including `start`.
    fn reach_count(out: &[Vec<usize>], start: usize) -> usize {
        let n = out.len();
        let mut seen = vec![false; n];
        let mut stack = vec![start];
        seen[start] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for &w in &out[v] {
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    stack.push(w);
                }
            }
        }
        count
    }
}

/// Laplacian of `g`: `entry(i, j) = -w(i, j)` for senders `j` of `i`,
/// `entry(i, i)` the in-weight sum.
pub fn laplacian(g: &DirectedGraph) -> LaplacianMatrix {
    let n = g.n_nodes();
    let mut m = DMatrix::zeros(n, n);
    for (recv, send, w) in g.edges() {
        m[(recv, send)] = -w;
        m[(recv, recv)] += w;
    }
    LaplacianMatrix(m)
}

/// Edge-set union of the given graphs. When an ordered pair occurs in
/// several graphs the maximum weight is kept, which preserves positivity
/// and makes the union idempotent.
pub fn union(graphs: &[DirectedGraph]) -> Result<DirectedGraph> {
    let Some(first) = graphs.first() else {
        return Err(Error::InvalidGraph("union of zero graphs".into()));
    };
    let n = first.n_nodes();
    let mut merged: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for g in graphs {
        if g.n_nodes() != n {
            return Err(Error::NodeCountMismatch(n, g.n_nodes()));
        }
        for (recv, send, w) in g.edges() {
            match merged[recv].iter_mut().find(|(j, _)| *j == send) {
                Some((_, existing)) => *existing = existing.max(w),
                None => merged[recv].push((send, w)),
            }
        }
    }
    let edges: Vec<_> = merged
        .into_iter()
        .enumerate()
        .flat_map(|(i, list)| list.into_iter().map(move |(j, w)| (i, j, w)))
        .collect();
    DirectedGraph::new(n, &edges)
}

/// A node is a center when it has directed paths (sender to receiver) to
/// every other node. Returns whether at least one center exists together
/// with all centers.
pub fn is_quasi_strongly_connected(g: &DirectedGraph) -> (bool, Vec<usize>) {
    let out = g.out_adjacency();
    let centers: Vec<usize> = (0..g.n_nodes())
        .filter(|&v| DirectedGraph::reach_count(&out, v) == g.n_nodes())
        .collect();
    (!centers.is_empty(), centers)
}

/// True when every ordered node pair is joined by a directed path.
/// Checked as: node 0 reaches everyone and everyone reaches node 0.
pub fn is_strongly_connected(g: &DirectedGraph) -> bool {
    let n = g.n_nodes();
    if n == 1 {
        return true;
    }
    let out = g.out_adjacency();
    if DirectedGraph::reach_count(&out, 0) != n {
        return false;
    }
    let mut rev = vec![Vec::new(); n];
    for (v, ws) in out.iter().enumerate() {
        for &w in ws {
            rev[w].push(v);
        }
    }
    DirectedGraph::reach_count(&rev, 0) == n
}

/// True when every column of the Laplacian sums to zero (in-weights equal
/// out-weights at each node).
pub fn is_balanced(g: &DirectedGraph) -> bool {
    let l = laplacian(g);
    let m = l.matrix();
    (0..g.n_nodes()).all(|j| m.column(j).sum().abs() <= tol::EXACT)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    /// Example-1 graph family (5 robots): edges as `(receiver, sender)`
    /// with unit weights, 0-based.
    pub(crate) fn example1_graphs() -> [DirectedGraph; 3] {
        let g1 = DirectedGraph::new(5, &[(1, 0, 1.0), (3, 0, 1.0), (4, 2, 1.0)]).unwrap();
        let g2 = DirectedGraph::new(5, &[(0, 4, 1.0), (1, 2, 1.0), (1, 3, 1.0)]).unwrap();
        let g3 = DirectedGraph::new(5, &[(2, 1, 1.0), (2, 3, 1.0), (3, 4, 1.0)]).unwrap();
        [g1, g2, g3]
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
        DirectedGraph::new(n, &edges).unwrap()
    }

    /// Brute-force reachability closure by repeated squaring of the boolean
    /// adjacency relation; independent of the BFS used by the library.
    fn closure_oracle(g: &DirectedGraph) -> Vec<Vec<bool>> {
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
        reach
    }

    #[test]
    fn laplacian_example1_g1() {
        let [g1, _, _] = example1_graphs();
        let l = laplacian(&g1);
        let m = l.matrix();
        // rows 2 and 4 (1-based) have -1 in column 1 and +1 on the diagonal
        assert_eq!(m[(1, 0)], -1.0);
        assert_eq!(m[(1, 1)], 1.0);
        assert_eq!(m[(3, 0)], -1.0);
        assert_eq!(m[(3, 3)], 1.0);
        assert_eq!(m[(4, 2)], -1.0);
        assert_eq!(m[(4, 4)], 1.0);
        assert!(m.row(0).iter().all(|&x| x == 0.0));
        assert!(m.row(2).iter().all(|&x| x == 0.0));
        assert_eq!(m.iter().filter(|&&x| x != 0.0).count(), 6);
    }

    #[test]
    fn laplacian_empty_graph_is_zero() {
        let l = laplacian(&DirectedGraph::empty(3));
        assert!(l.matrix().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn laplacian_row_sums_zero_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let g = random_graph(&mut rng, 6, 0.35);
            let l = laplacian(&g);
            for i in 0..6 {
                assert!(l.matrix().row(i).sum().abs() <= tol::EXACT);
            }
        }
    }

    #[test]
    fn union_example1_has_nine_edges() {
        let gs = example1_graphs();
        let u = union(&gs).unwrap();
        assert_eq!(u.n_edges(), 9);
        // sender -> receiver arrows: 1->2,1->4,3->5,5->1,3->2,4->2,2->3,4->3,5->4
        let expect = [
            (1, 0),
            (3, 0),
            (4, 2),
            (0, 4),
            (1, 2),
            (1, 3),
            (2, 1),
            (2, 3),
            (3, 4),
        ];
        for (recv, send) in expect {
            assert!(u.weight(recv, send).is_some(), "missing edge {recv}<-{send}");
        }
    }

    #[test]
    fn union_idempotent() {
        let [g1, _, _] = example1_graphs();
        let u = union(&[g1.clone(), g1.clone()]).unwrap();
        assert!(u.structurally_eq(&g1));
    }

    #[test]
    fn union_disjoint_counts_add() {
        let a = DirectedGraph::new(4, &[(0, 1, 1.0), (2, 3, 0.5)]).unwrap();
        let b = DirectedGraph::new(4, &[(1, 2, 2.0)]).unwrap();
        assert_eq!(union(&[a, b]).unwrap().n_edges(), 3);
    }

    #[test]
    fn union_rejects_mismatched_node_counts() {
        let a = DirectedGraph::empty(3);
        let b = DirectedGraph::empty(4);
        assert!(matches!(
            union(&[a, b]),
            Err(Error::NodeCountMismatch(3, 4))
        ));
    }

    #[test]
    fn qsc_example1_g1_alone_false() {
        let [g1, _, _] = example1_graphs();
        let (qsc, centers) = is_quasi_strongly_connected(&g1);
        assert!(!qsc);
        assert!(centers.is_empty());
    }

    #[test]
    fn qsc_example1_union_true() {
        let u = union(&example1_graphs()).unwrap();
        let (qsc, centers) = is_quasi_strongly_connected(&u);
        assert!(qsc);
        assert!(!centers.is_empty());
    }

    #[test]
    fn qsc_single_node() {
        let (qsc, centers) = is_quasi_strongly_connected(&DirectedGraph::empty(1));
        assert!(qsc);
        assert_eq!(centers, vec![0]);
    }

    #[test]
    fn qsc_matches_closure_oracle_randomized() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for case in 0..10_000 {
            let n = rng.random_range(1..=5);
            let g = random_graph(&mut rng, n, 0.4);
            let reach = closure_oracle(&g);
            let oracle_centers: Vec<usize> = (0..n)
                .filter(|&v| (0..n).all(|w| reach[v][w]))
                .collect();
            let (qsc, centers) = is_quasi_strongly_connected(&g);
            assert_eq!(qsc, !oracle_centers.is_empty(), "case {case}");
            assert_eq!(centers, oracle_centers, "case {case}");
        }
    }

    #[test]
    fn strongly_connected_cycle() {
        assert!(is_strongly_connected(&DirectedGraph::directed_cycle(3)));
    }

    #[test]
    fn strongly_connected_example1_union_fixture() {
        // Regression fixture computed with the closure oracle.
        let u = union(&example1_graphs()).unwrap();
        let reach = closure_oracle(&u);
        let oracle = (0..5).all(|i| (0..5).all(|j| reach[i][j]));
        assert_eq!(is_strongly_connected(&u), oracle);
        assert!(oracle, "Example-1 union graph is strongly connected");
    }

    #[test]
    fn strongly_connected_isolated_false() {
        assert!(!is_strongly_connected(&DirectedGraph::empty(2)));
    }

    #[test]
    fn strong_implies_quasi_strong_randomized() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..2_000 {
            let n = rng.random_range(1..=5);
            let g = random_graph(&mut rng, n, 0.4);
            if is_strongly_connected(&g) {
                assert!(is_quasi_strongly_connected(&g).0);
            }
        }
    }

    #[test]
    fn balanced_cycle_true() {
        assert!(is_balanced(&DirectedGraph::directed_cycle(4)));
    }

    #[test]
    fn balanced_example1_g1_false() {
        let [g1, _, _] = example1_graphs();
        // Column sums of its Laplacian: node 0 sends twice, receives nothing.
        assert!(!is_balanced(&g1));
    }

    #[test]
    fn balanced_empty_true() {
        assert!(is_balanced(&DirectedGraph::empty(4)));
    }

    #[test]
    fn rejects_invalid_graphs() {
        assert!(DirectedGraph::new(3, &[(0, 0, 1.0)]).is_err());
        assert!(DirectedGraph::new(3, &[(0, 1, 0.0)]).is_err());
        assert!(DirectedGraph::new(3, &[(0, 1, -1.0)]).is_err());
        assert!(DirectedGraph::new(3, &[(0, 1, 1.0), (0, 1, 2.0)]).is_err());
        assert!(DirectedGraph::new(3, &[(0, 3, 1.0)]).is_err());
        assert!(DirectedGraph::new(0, &[]).is_err());
    }

    proptest! {
        #[test]
        fn laplacian_annihilates_ones(seed in 0u64..500) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.random_range(2..=6);
            let g = random_graph(&mut rng, n, 0.4);
            let ones = nalgebra::DVector::from_element(n, 1.0);
            let prod = laplacian(&g).matrix() * ones;
            prop_assert!(prod.amax() <= tol::EXACT);
        }

        #[test]
        fn union_commutative(seed in 0u64..200) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.random_range(2..=5);
            let a = random_graph(&mut rng, n, 0.3);
            let b = random_graph(&mut rng, n, 0.3);
            let ab = union(&[a.clone(), b.clone()]).unwrap();
            let ba = union(&[b, a]).unwrap();
            prop_assert!(ab.structurally_eq(&ba));
        }

        #[test]
        fn union_associative(seed in 0u64..200) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.random_range(2..=5);
            let a = random_graph(&mut rng, n, 0.3);
            let b = random_graph(&mut rng, n, 0.3);
            let c = random_graph(&mut rng, n, 0.3);
            let left = union(&[union(&[a.clone(), b.clone()]).unwrap(), c.clone()]).unwrap();
            let right = union(&[a, union(&[b, c]).unwrap()]).unwrap();
            prop_assert!(left.structurally_eq(&right));
        }
    }
}
