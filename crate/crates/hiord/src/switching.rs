//! Piecewise-constant topology signals over continuous time or discrete
//! steps, with dwell-time validation and joint-connectivity verification.

use crate::error::{Error, Result};
use crate::graph::{is_quasi_strongly_connected, union, DirectedGraph};

/// Schedule of a continuous-time switching signal.
#[derive(Debug, Clone)]
pub enum Schedule {
    /// Cycle through `cycle` (0-based graph indices), dwelling `slot`
    /// seconds in each entry.
    Periodic { slot: f64, cycle: Vec<usize> },
    /// Explicit switch instants; `times[0]` must be 0 and times strictly
    /// increase. `indices[k]` is active on `[times[k], times[k+1])`.
    Explicit { times: Vec<f64>, indices: Vec<usize> },
}

/// Piecewise-constant map from time to an index into a family of graphs,
/// right-continuous with a positive minimum dwell time.
#[derive(Debug, Clone)]
pub struct SwitchingSignal {
    graphs: Vec<DirectedGraph>,
    schedule: Schedule,
    horizon: f64,
}

impl SwitchingSignal {
    pub fn new(graphs: Vec<DirectedGraph>, schedule: Schedule, horizon: f64) -> Result<Self> {
        if graphs.is_empty() {
            return Err(Error::InvalidSignal("no graphs".into()));
        }
        let n = graphs[0].n_nodes();
        if graphs.iter().any(|g| g.n_nodes() != n) {
            return Err(Error::InvalidSignal(
                "graphs have differing node counts".into(),
            ));
        }
        if !(horizon > 0.0) {
            return Err(Error::InvalidSignal("horizon must be positive".into()));
        }
        match &schedule {
            Schedule::Periodic { slot, cycle } => {
                if !(*slot > 0.0) {
                    return Err(Error::InvalidSignal("slot must be positive".into()));
                }
                if cycle.is_empty() {
                    return Err(Error::InvalidSignal("empty cycle".into()));
                }
                if cycle.iter().any(|&k| k >= graphs.len()) {
                    return Err(Error::InvalidSignal("cycle index out of range".into()));
                }
            }
            Schedule::Explicit { times, indices } => {
                if times.is_empty() || times.len() != indices.len() {
                    return Err(Error::InvalidSignal(
                        "times and indices must be non-empty and equal length".into(),
                    ));
                }
                if times[0] != 0.0 {
                    return Err(Error::InvalidSignal("first switch time must be 0".into()));
                }
                if times.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::InvalidSignal(
                        "switch times must strictly increase".into(),
                    ));
                }
                if indices.iter().any(|&k| k >= graphs.len()) {
                    return Err(Error::InvalidSignal("graph index out of range".into()));
                }
            }
        }
        Ok(Self {
            graphs,
            schedule,
            horizon,
        })
    }

    /// Constant signal holding one graph over the whole horizon.
    pub fn constant(graph: DirectedGraph, horizon: f64) -> Result<Self> {
        Self::new(
            vec![graph],
            Schedule::Periodic {
                slot: horizon,
                cycle: vec![0],
            },
            horizon,
        )
    }

    pub fn n_nodes(&self) -> usize {
        self.graphs[0].n_nodes()
    }

    pub fn graphs(&self) -> &[DirectedGraph] {
        &self.graphs
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Grows the horizon (never shrinks it). Periodic schedules extend
    /// naturally; explicit schedules hold their last graph.
    pub fn extend_horizon(&mut self, horizon: f64) {
        if horizon > self.horizon {
            self.horizon = horizon;
        }
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    /// Smallest gap between consecutive switch instants.
    pub fn min_dwell(&self) -> f64 {
        match &self.schedule {
            Schedule::Periodic { slot, .. } => *slot,
            Schedule::Explicit { times, .. } => {
                let mut dwell = f64::INFINITY;
                for w in times.windows(2) {
                    dwell = dwell.min(w[1] - w[0]);
                }
                dwell.min(self.horizon - times[times.len() - 1])
            }
        }
    }

    /// Index of the graph active on the interval containing `t`
    /// (half-open `[t_k, t_{k+1})`, right-continuous).
    pub fn index_at(&self, t: f64) -> Result<usize> {
        if !(0.0..=self.horizon).contains(&t) {
            return Err(Error::OutOfHorizon {
                t,
                horizon: self.horizon,
            });
        }
        Ok(match &self.schedule {
            Schedule::Periodic { slot, cycle } => {
                // snap queries that sit a rounding error below k*slot onto
                // the boundary so right-continuity survives float dirt
                let ratio = t / slot;
                let nearest = ratio.round();
                let k = if (ratio - nearest).abs() <= 1e-9 * nearest.abs().max(1.0) {
                    nearest as usize
                } else {
                    ratio.floor() as usize
                };
                cycle[k % cycle.len()]
            }
            Schedule::Explicit { times, indices } => {
                let pos = times.partition_point(|&s| s <= t);
                indices[pos - 1]
            }
        })
    }

    /// Graph active at time `t`.
    pub fn graph_at(&self, t: f64) -> Result<&DirectedGraph> {
        Ok(&self.graphs[self.index_at(t)?])
    }

    /// Switch instants strictly inside `(t0, t1)`, sorted.
    pub fn switch_times_in(&self, t0: f64, t1: f64) -> Vec<f64> {
        let lo = t0.max(0.0);
        let hi = t1.min(self.horizon);
        match &self.schedule {
            Schedule::Periodic { slot, .. } => {
                let mut k = (lo / slot).floor() as usize + 1;
                // back up in case lo sits exactly on a boundary
                while k > 1 && (k - 1) as f64 * slot > lo {
                    k -= 1;
                }
                let mut out = Vec::new();
                loop {
                    let t = k as f64 * slot;
                    if t >= hi {
                        break;
                    }
                    if t > lo {
                        out.push(t);
                    }
                    k += 1;
                }
                out
            }
            Schedule::Explicit { times, .. } => times
                .iter()
                .copied()
                .filter(|&s| s > lo && s < hi)
                .collect(),
        }
    }

    /// All switch instants in `[0, horizon)`, including 0.
    fn boundaries(&self) -> Vec<f64> {
        let mut b = vec![0.0];
        b.extend(self.switch_times_in(0.0, self.horizon));
        b
    }

    /// Union of the graphs active over `[t0, t1)`.
    pub fn window_union(&self, t0: f64, t1: f64) -> Result<DirectedGraph> {
        if !(t1 > t0) {
            return Err(Error::InvalidSignal(format!(
                "empty window [{t0}, {t1})"
            )));
        }
        let mut cuts = vec![t0];
        cuts.extend(self.switch_times_in(t0, t1));
        cuts.push(t1);
        let mut active = Vec::new();
        for pair in cuts.windows(2) {
            // sample at the midpoint so boundary rounding cannot flip a segment
            let idx = self.index_at(0.5 * (pair[0] + pair[1]))?;
            if !active.contains(&idx) {
                active.push(idx);
            }
        }
        let graphs: Vec<_> = active.iter().map(|&k| self.graphs[k].clone()).collect();
        union(&graphs)
    }

    /// Checks uniform joint quasi-strong connectivity over the finite
    /// horizon: every length-`window` union graph must be quasi-strongly
    /// connected.
    ///
    /// Window starts are enumerated from the finite critical set
    /// `{0} U {t_k} U {t_k - window}`: between those points the multiset of
    /// active graphs in `[t, t + window)` is constant, so the reduction is
    /// exact for piecewise-constant signals. Returns `false` when the
    /// horizon admits no full window.
    pub fn verify_ujqsc(&self, window: f64) -> Result<bool> {
        Ok(self
            .ujqsc_windows(window)?
            .iter()
            .all(|report| report.quasi_strongly_connected))
    }

    /// Per-window detail behind [`SwitchingSignal::verify_ujqsc`].
    pub fn ujqsc_windows(&self, window: f64) -> Result<Vec<WindowReport>> {
        if !(window > 0.0) {
            return Err(Error::NonPositiveWindow(window));
        }
        let mut starts = self.boundaries();
        let switch_times = self.switch_times_in(0.0, self.horizon);
        starts.extend(switch_times.iter().map(|&t| t - window).filter(|&t| t > 0.0));
        starts.sort_by(f64::total_cmp);
        starts.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        let mut out = Vec::new();
        for &t in &starts {
            if t + window > self.horizon {
                continue;
            }
            let u = self.window_union(t, t + window)?;
            let (qsc, centers) = is_quasi_strongly_connected(&u);
            out.push(WindowReport {
                start: t,
                end: t + window,
                union_edges: u.n_edges(),
                quasi_strongly_connected: qsc,
                centers,
            });
        }
        if out.is_empty() {
            return Err(Error::InvalidSignal(format!(
                "window {window} exceeds horizon {}",
                self.horizon
            )));
        }
        Ok(out)
    }
}

/// Connectivity verdict for one window of a switching signal.
#[derive(Debug, Clone)]
pub struct WindowReport {
    pub start: f64,
    pub end: f64,
    pub union_edges: usize,
    pub quasi_strongly_connected: bool,
    pub centers: Vec<usize>,
}

/// Rule mapping a step counter to a graph index.
#[derive(Debug, Clone)]
pub enum StepRule {
    /// `sigma[k] = cycle[k mod cycle.len()]`.
    Periodic { cycle: Vec<usize> },
    /// Explicit per-step indices; steps beyond the list hold the last entry.
    Explicit { indices: Vec<usize> },
}

/// Discrete-time switching signal.
#[derive(Debug, Clone)]
pub struct DiscreteSwitchingSignal {
    graphs: Vec<DirectedGraph>,
    rule: StepRule,
}

impl DiscreteSwitchingSignal {
    pub fn new(graphs: Vec<DirectedGraph>, rule: StepRule) -> Result<Self> {
        if graphs.is_empty() {
            return Err(Error::InvalidSignal("no graphs".into()));
        }
        let n = graphs[0].n_nodes();
        if graphs.iter().any(|g| g.n_nodes() != n) {
            return Err(Error::InvalidSignal(
                "graphs have differing node counts".into(),
            ));
        }
        let ok = match &rule {
            StepRule::Periodic { cycle } => {
                !cycle.is_empty() && cycle.iter().all(|&k| k < graphs.len())
            }
            StepRule::Explicit { indices } => {
                !indices.is_empty() && indices.iter().all(|&k| k < graphs.len())
            }
        };
        if !ok {
            return Err(Error::InvalidSignal("invalid step rule".into()));
        }
        Ok(Self { graphs, rule })
    }

    pub fn n_nodes(&self) -> usize {
        self.graphs[0].n_nodes()
    }

    pub fn graphs(&self) -> &[DirectedGraph] {
        &self.graphs
    }

    pub fn index_at(&self, step: usize) -> usize {
        match &self.rule {
            StepRule::Periodic { cycle } => cycle[step % cycle.len()],
            StepRule::Explicit { indices } => indices[step.min(indices.len() - 1)],
        }
    }

    pub fn graph_at(&self, step: usize) -> &DirectedGraph {
        &self.graphs[self.index_at(step)]
    }

    /// Discrete-time UJQSC: every window `{k, ..., k + m}` (length `m + 1`)
    /// wholly inside `[0, horizon)` must have a quasi-strongly connected
    /// union graph.
    pub fn verify_ujqsc(&self, m: usize, horizon: usize) -> bool {
        if horizon == 0 || m + 1 > horizon {
            return false;
        }
        for k in 0..=(horizon - m - 1) {
            let graphs: Vec<_> = (k..=k + m).map(|s| self.graph_at(s).clone()).collect();
            let u = union(&graphs).expect("same node count");
            if !is_quasi_strongly_connected(&u).0 {
                return false;
            }
        }
        true
    }
}
