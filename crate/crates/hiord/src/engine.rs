//! Deterministic simulation of the continuous and discrete consensus
//! scenarios, consensus detection, and numerical oracles for the
//! convergence lemmas.
//!
//! Continuous scenarios use classical fixed-step 4th-order integration.
//! Steps never straddle a topology switch: each grid step is subdivided at
//! the switch instants inside it, and the active graph is sampled at
//! segment midpoints so boundary rounding cannot leak the wrong topology
//! into a segment. Identical scenarios produce bitwise-identical
//! trajectories.

use crate::error::{Error, Result};
use crate::gains::{ContinuousGainSet, DiscreteGainSet};
use crate::graph::{is_balanced, laplacian, DirectedGraph};
use crate::lti::{integrator_chain, CanonicalForm, LtiSystem};
use crate::switching::{DiscreteSwitchingSignal, SwitchingSignal};
use crate::tol;
use nalgebra::{DVector, RowDVector};
use std::io::{BufRead, Write};

/// First time (or step) at which the max-abs state exceeded the guard.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Divergence {
    pub time: f64,
    pub max_abs: f64,
}

/// The continuous control law driving a scenario.
#[derive(Debug, Clone)]
pub enum ContinuousLaw {
    StateFeedback {
        gains: ContinuousGainSet,
    },
    OutputFeedback {
        gains: ContinuousGainSet,
        output: RowDVector<f64>,
    },
    GeneralLti {
        plant: LtiSystem,
        gains: ContinuousGainSet,
        canon: CanonicalForm,
    },
}

#[derive(Debug, Clone)]
pub enum ScenarioKind {
    Continuous {
        law: ContinuousLaw,
        signal: SwitchingSignal,
        duration: f64,
        dt: f64,
    },
    Discrete {
        gains: DiscreteGainSet,
        output: RowDVector<f64>,
        signal: DiscreteSwitchingSignal,
        steps: usize,
    },
}

/// A fully specified experiment: dynamics kind, protocol gains, topology
/// signal, initial conditions and integration settings.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub kind: ScenarioKind,
    pub initial_states: Vec<DVector<f64>>,
    pub initial_observers: Option<Vec<DVector<f64>>>,
    /// Record every `store_every`-th step (the initial and final samples are
    /// always recorded).
    pub store_every: usize,
    pub divergence_guard: f64,
    pub consensus_tol: f64,
}

impl Scenario {
    pub fn n_agents(&self) -> usize {
        self.initial_states.len()
    }

    pub fn order(&self) -> usize {
        match &self.kind {
            ScenarioKind::Continuous { law, .. } => match law {
                ContinuousLaw::StateFeedback { gains }
                | ContinuousLaw::OutputFeedback { gains, .. } => gains.order(),
                ContinuousLaw::GeneralLti { plant, .. } => plant.order(),
            },
            ScenarioKind::Discrete { gains, .. } => gains.order(),
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self.kind, ScenarioKind::Discrete { .. })
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_agents();
        let m = self.order();
        if n == 0 {
            return Err(Error::InvalidScenario("no agents".into()));
        }
        if self.store_every == 0 {
            return Err(Error::InvalidScenario("store_every must be >= 1".into()));
        }
        if self.initial_states.iter().any(|x| x.len() != m) {
            return Err(Error::InvalidScenario(format!(
                "initial states must have length {m}"
            )));
        }
        if let Some(obs) = &self.initial_observers {
            if obs.len() != n || obs.iter().any(|s| s.len() != m) {
                return Err(Error::InvalidScenario(
                    "initial observers must match agent count and order".into(),
                ));
            }
        }
        match &self.kind {
            ScenarioKind::Continuous {
                law,
                signal,
                duration,
                dt,
            } => {
                if signal.n_nodes() != n {
                    return Err(Error::InvalidScenario(format!(
                        "signal is over {} nodes but {n} agents are configured",
                        signal.n_nodes()
                    )));
                }
                if !(*dt > 0.0) {
                    return Err(Error::InvalidScenario("dt must be positive".into()));
                }
                if *dt > signal.min_dwell() + tol::EXACT {
                    return Err(Error::InvalidScenario(format!(
                        "dt {dt} exceeds the minimum dwell time {}",
                        signal.min_dwell()
                    )));
                }
                if !(*duration > 0.0) || *duration > signal.horizon() + tol::EXACT {
                    return Err(Error::InvalidScenario(format!(
                        "duration {duration} outside signal horizon {}",
                        signal.horizon()
                    )));
                }
                match law {
                    ContinuousLaw::StateFeedback { .. } => {}
                    ContinuousLaw::OutputFeedback { gains, output } => {
                        if output.len() != m {
                            return Err(Error::InvalidScenario("output row length".into()));
                        }
                        if gains.k3().is_none() {
                            return Err(Error::InvalidScenario(
                                "output feedback requires the observer gain K3".into(),
                            ));
                        }
                        if self.initial_observers.is_none() {
                            return Err(Error::InvalidScenario(
                                "output feedback requires initial observer states".into(),
                            ));
                        }
                    }
                    ContinuousLaw::GeneralLti { plant, gains, .. } => {
                        if gains.order() != plant.order() {
                            return Err(Error::InvalidScenario(
                                "gain order must match plant order".into(),
                            ));
                        }
                        if gains.k3().is_none() || self.initial_observers.is_none() {
                            return Err(Error::InvalidScenario(
                                "general LTI law requires K3 and initial observers".into(),
                            ));
                        }
                    }
                }
            }
            ScenarioKind::Discrete {
                gains,
                output,
                signal,
                steps,
            } => {
                if signal.n_nodes() != n {
                    return Err(Error::InvalidScenario("signal node count".into()));
                }
                if *steps == 0 {
                    return Err(Error::InvalidScenario("steps must be >= 1".into()));
                }
                if output.len() != m {
                    return Err(Error::InvalidScenario("output row length".into()));
                }
                if gains.k6().is_none() || self.initial_observers.is_none() {
                    return Err(Error::InvalidScenario(
                        "discrete protocol requires K6 and initial observers".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Time-indexed record of one simulation: stacked agent states (and
/// observers) per sample, controls, and the active graph index.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub n_agents: usize,
    pub order: usize,
    pub discrete: bool,
    /// Seconds for continuous runs, the step counter for discrete runs.
    pub times: Vec<f64>,
    /// Stacked `N * m` state per sample.
    pub states: Vec<DVector<f64>>,
    /// Stacked observer states per sample, when the protocol has observers.
    pub observers: Option<Vec<DVector<f64>>>,
    /// Control input applied to each agent at each sample.
    pub controls: Vec<Vec<f64>>,
    pub graph_index: Vec<usize>,
    pub divergence: Option<Divergence>,
}

impl Trajectory {
    pub fn n_samples(&self) -> usize {
        self.times.len()
    }

    pub fn agent_state(&self, sample: usize, agent: usize) -> DVector<f64> {
        let m = self.order;
        DVector::from_fn(m, |c, _| self.states[sample][agent * m + c])
    }

    pub fn agent_observer(&self, sample: usize, agent: usize) -> Option<DVector<f64>> {
        let m = self.order;
        self.observers
            .as_ref()
            .map(|obs| DVector::from_fn(m, |c, _| obs[sample][agent * m + c]))
    }

    pub fn component(&self, sample: usize, agent: usize, comp: usize) -> f64 {
        self.states[sample][agent * self.order + comp]
    }

    /// One component of one agent across all samples.
    pub fn component_series(&self, agent: usize, comp: usize) -> Vec<f64> {
        (0..self.n_samples())
            .map(|k| self.component(k, agent, comp))
            .collect()
    }

    /// Reduced states `K x_i` of one sample.
    pub fn reduce_sample(&self, sample: usize, k: &RowDVector<f64>) -> DVector<f64> {
        crate::protocols::reduce_stacked(&self.states[sample], k, self.n_agents)
    }

    /// Largest pairwise inf-norm distance between agent states at a sample.
    pub fn pairwise_disagreement(&self, sample: usize) -> f64 {
        let m = self.order;
        let mut worst: f64 = 0.0;
        for c in 0..m {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for i in 0..self.n_agents {
                let v = self.states[sample][i * m + c];
                lo = lo.min(v);
                hi = hi.max(v);
            }
            worst = worst.max(hi - lo);
        }
        worst
    }

    /// CSV export: `time, graph, x_1_1..x_N_m[, s_1_1..]`, one row per
    /// sample, 17 significant digits so values round-trip exactly.
    pub fn to_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        let m = self.order;
        let obs_tag = if self.discrete { "z" } else { "s" };
        let time_tag = if self.discrete { "step" } else { "time" };
        write!(w, "{time_tag},graph")?;
        for i in 1..=self.n_agents {
            for c in 1..=m {
                write!(w, ",x_{i}_{c}")?;
            }
        }
        if self.observers.is_some() {
            for i in 1..=self.n_agents {
                for c in 1..=m {
                    write!(w, ",{obs_tag}_{i}_{c}")?;
                }
            }
        }
        writeln!(w)?;
        for k in 0..self.n_samples() {
            write!(w, "{:.16e},{}", self.times[k], self.graph_index[k])?;
            for v in self.states[k].iter() {
                write!(w, ",{v:.16e}")?;
            }
            if let Some(obs) = &self.observers {
                for v in obs[k].iter() {
                    write!(w, ",{v:.16e}")?;
                }
            }
            writeln!(w)?;
        }
        Ok(())
    }

    /// Reads a trajectory written by [`Trajectory::to_csv`]. Controls and
    /// the divergence flag are not part of the format.
    pub fn from_csv<R: BufRead>(r: R) -> Result<Trajectory> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::InvalidScenario("empty CSV".into()))?
            .map_err(|e| Error::InvalidScenario(e.to_string()))?;
        let cols: Vec<&str> = header.trim().split(',').collect();
        if cols.len() < 3 {
            return Err(Error::InvalidScenario("CSV header too short".into()));
        }
        let discrete = cols[0] == "step";
        let has_obs = cols.iter().any(|c| c.starts_with("s_") || c.starts_with("z_"));
        let state_cols = cols.iter().filter(|c| c.starts_with("x_")).count();
        let order = cols
            .iter()
            .filter(|c| c.starts_with("x_1_"))
            .count()
            .max(1);
        let n_agents = state_cols / order;
        let mut times = Vec::new();
        let mut states = Vec::new();
        let mut observers = if has_obs { Some(Vec::new()) } else { None };
        let mut graph_index = Vec::new();
        for line in lines {
            let line = line.map_err(|e| Error::InvalidScenario(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let mut it = line.split(',');
            let parse = |s: Option<&str>| -> Result<f64> {
                s.ok_or_else(|| Error::InvalidScenario("short CSV row".into()))?
                    .trim()
                    .parse()
                    .map_err(|e| Error::InvalidScenario(format!("bad float: {e}")))
            };
            times.push(parse(it.next())?);
            let gi: f64 = parse(it.next())?;
            graph_index.push(gi as usize);
            let mut x = DVector::zeros(state_cols);
            for slot in x.iter_mut() {
                *slot = parse(it.next())?;
            }
            states.push(x);
            if let Some(obs) = observers.as_mut() {
                let mut s = DVector::zeros(state_cols);
                for slot in s.iter_mut() {
                    *slot = parse(it.next())?;
                }
                obs.push(s);
            }
        }
        let controls = vec![Vec::new(); times.len()];
        Ok(Trajectory {
            n_agents,
            order,
            discrete,
            times,
            states,
            observers,
            controls,
            graph_index,
            divergence: None,
        })
    }
}

// ---------------------------------------------------------------------------
// continuous integration
// ---------------------------------------------------------------------------

/// Flattened model shared by the three continuous laws: the per-agent plant
/// `(A_p, B_p)`, an optional observer, and the control law reduced to two
/// row vectors applied to the feedback source (plant state or observer):
/// `u_i = r_own . src_i - sum_j w_ij r_cpl . (src_i - src_j)`.
struct ContModel {
    n: usize,
    m: usize,
    a_p: Vec<f64>, // row-major m x m
    b_p: Vec<f64>,
    r_own: Vec<f64>,
    r_cpl: Vec<f64>,
    obs: Option<ContObserver>,
}

struct ContObserver {
    c: Vec<f64>,
    k3: Vec<f64>,
}

impl ContModel {
    fn from_law(law: &ContinuousLaw, n: usize) -> Self {
        match law {
            ContinuousLaw::StateFeedback { gains } => {
                let m = gains.order();
                let (a, b) = integrator_chain(m);
                ContModel {
                    n,
                    m,
                    a_p: a.transpose().as_slice().to_vec(),
                    b_p: b.as_slice().to_vec(),
                    r_own: gains.k1().iter().copied().collect(),
                    r_cpl: gains.k2().iter().copied().collect(),
                    obs: None,
                }
            }
            ContinuousLaw::OutputFeedback { gains, output } => {
                let m = gains.order();
                let (a, b) = integrator_chain(m);
                ContModel {
                    n,
                    m,
                    a_p: a.transpose().as_slice().to_vec(),
                    b_p: b.as_slice().to_vec(),
                    r_own: gains.k1().iter().copied().collect(),
                    r_cpl: gains.k2().iter().copied().collect(),
                    obs: Some(ContObserver {
                        c: output.iter().copied().collect(),
                        k3: gains.k3().expect("validated").iter().copied().collect(),
                    }),
                }
            }
            ContinuousLaw::GeneralLti {
                plant,
                gains,
                canon,
            } => {
                let m = plant.order();
                // fold the chain-coordinate law through T_g once
                let own_row = (-canon.a_row.transpose() + gains.k1()) * &canon.t;
                let cpl_row = gains.k2() * &canon.t;
                ContModel {
                    n,
                    m,
                    a_p: plant.a.transpose().as_slice().to_vec(),
                    b_p: plant.b.as_slice().to_vec(),
                    r_own: own_row.iter().copied().collect(),
                    r_cpl: cpl_row.iter().copied().collect(),
                    obs: Some(ContObserver {
                        c: plant.c.iter().copied().collect(),
                        k3: gains.k3().expect("validated").iter().copied().collect(),
                    }),
                }
            }
        }
    }

    fn state_len(&self) -> usize {
        self.n * self.m * if self.obs.is_some() { 2 } else { 1 }
    }

    #[inline]
    fn matvec(&self, x: &[f64], out: &mut [f64]) {
        let m = self.m;
        for (r, slot) in out.iter_mut().enumerate() {
            let row = &self.a_p[r * m..(r + 1) * m];
            *slot = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }

    /// Writes the closed-loop derivative of `state` into `out` and the
    /// per-agent controls into `us`.
    fn rhs(&self, g: &DirectedGraph, state: &[f64], out: &mut [f64], us: &mut [f64]) {
        let nm = self.n * self.m;
        let m = self.m;
        let (xs, ss) = state.split_at(if self.obs.is_some() { nm } else { state.len() });
        let src = if self.obs.is_some() { ss } else { xs };
        for i in 0..self.n {
            let si = &src[i * m..(i + 1) * m];
            let mut u: f64 = si.iter().zip(&self.r_own).map(|(a, b)| a * b).sum();
            for &(j, w) in g.neighbors_in(i) {
                let sj = &src[j * m..(j + 1) * m];
                let mut c = 0.0;
                for k in 0..m {
                    c += self.r_cpl[k] * (si[k] - sj[k]);
                }
                u -= w * c;
            }
            us[i] = u;
        }
        let (out_x, out_s) = out.split_at_mut(if self.obs.is_some() { nm } else { out.len() });
        for i in 0..self.n {
            let xi = &xs[i * m..(i + 1) * m];
            self.matvec(xi, &mut out_x[i * m..(i + 1) * m]);
            for k in 0..m {
                out_x[i * m + k] += self.b_p[k] * us[i];
            }
        }
        if let Some(obs) = &self.obs {
            for i in 0..self.n {
                let xi = &xs[i * m..(i + 1) * m];
                let si = &ss[i * m..(i + 1) * m];
                let slot = &mut out_s[i * m..(i + 1) * m];
                let m_ = m;
                for (r, s) in slot.iter_mut().enumerate() {
                    let row = &self.a_p[r * m_..(r + 1) * m_];
                    *s = row.iter().zip(si).map(|(a, b)| a * b).sum();
                }
                let innovation: f64 = obs
                    .c
                    .iter()
                    .zip(si.iter().zip(xi))
                    .map(|(c, (s, x))| c * (s - x))
                    .sum();
                for k in 0..m {
                    slot[k] += obs.k3[k] * innovation + self.b_p[k] * us[i];
                }
            }
        }
    }
}

fn max_abs(xs: &[f64]) -> f64 {
    xs.iter().fold(0.0f64, |acc, &v| acc.max(v.abs()))
}

fn simulate_continuous_inner(sc: &Scenario) -> Result<Trajectory> {
    let ScenarioKind::Continuous {
        law,
        signal,
        duration,
        dt,
    } = &sc.kind
    else {
        return Err(Error::InvalidScenario("not a continuous scenario".into()));
    };
    let n = sc.n_agents();
    let model = ContModel::from_law(law, n);
    let m = model.m;
    let nm = n * m;

    let mut state = vec![0.0; model.state_len()];
    for (i, x0) in sc.initial_states.iter().enumerate() {
        state[i * m..(i + 1) * m].copy_from_slice(x0.as_slice());
    }
    if model.obs.is_some() {
        let obs0 = sc.initial_observers.as_ref().expect("validated");
        for (i, s0) in obs0.iter().enumerate() {
            state[nm + i * m..nm + (i + 1) * m].copy_from_slice(s0.as_slice());
        }
    }

    let n_steps = (duration / dt).round().max(1.0) as usize;
    let len = state.len();
    let mut k1 = vec![0.0; len];
    let mut k2 = vec![0.0; len];
    let mut k3 = vec![0.0; len];
    let mut k4 = vec![0.0; len];
    let mut tmp = vec![0.0; len];
    let mut us = vec![0.0; n];

    let mut tr = Trajectory {
        n_agents: n,
        order: m,
        discrete: false,
        times: Vec::new(),
        states: Vec::new(),
        observers: model.obs.as_ref().map(|_| Vec::new()),
        controls: Vec::new(),
        graph_index: Vec::new(),
        divergence: None,
    };

    let mut rec_scratch = vec![0.0; len];
    let mut rec_us = vec![0.0; n];
    let mut record = |t: f64, state: &[f64], tr: &mut Trajectory| -> Result<()> {
        let tq = t.min(signal.horizon());
        let gi = signal.index_at(tq)?;
        // control at the sample instant, for the record
        model.rhs(signal.graph_at(tq)?, state, &mut rec_scratch, &mut rec_us);
        tr.times.push(t);
        tr.states.push(DVector::from_column_slice(&state[0..nm]));
        if let Some(obs) = tr.observers.as_mut() {
            obs.push(DVector::from_column_slice(&state[nm..2 * nm]));
        }
        tr.controls.push(rec_us.clone());
        tr.graph_index.push(gi);
        Ok(())
    };

    record(0.0, &state, &mut tr)?;

    'steps: for step in 0..n_steps {
        let t0 = step as f64 * dt;
        let t1 = if step + 1 == n_steps {
            *duration
        } else {
            (step + 1) as f64 * dt
        };
        let mut cuts = vec![t0];
        cuts.extend(signal.switch_times_in(t0, t1));
        cuts.push(t1);
        for seg in cuts.windows(2) {
            let h = seg[1] - seg[0];
            if h <= 0.0 {
                continue;
            }
            let g = signal.graph_at(0.5 * (seg[0] + seg[1]))?;
            // classical RK4 on the autonomous closed loop
            model.rhs(g, &state, &mut k1, &mut us);
            for i in 0..len {
                tmp[i] = state[i] + 0.5 * h * k1[i];
            }
            model.rhs(g, &tmp, &mut k2, &mut us);
            for i in 0..len {
                tmp[i] = state[i] + 0.5 * h * k2[i];
            }
            model.rhs(g, &tmp, &mut k3, &mut us);
            for i in 0..len {
                tmp[i] = state[i] + h * k3[i];
            }
            model.rhs(g, &tmp, &mut k4, &mut us);
            for i in 0..len {
                state[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        let worst = max_abs(&state);
        if worst > sc.divergence_guard {
            tr.divergence = Some(Divergence {
                time: t1,
                max_abs: worst,
            });
            record(t1, &state, &mut tr)?;
            break 'steps;
        }
        if (step + 1) % sc.store_every == 0 || step + 1 == n_steps {
            record(t1, &state, &mut tr)?;
        }
    }
    Ok(tr)
}

// ---------------------------------------------------------------------------
// discrete recursion
// ---------------------------------------------------------------------------

fn simulate_discrete_inner(sc: &Scenario) -> Result<Trajectory> {
    let ScenarioKind::Discrete {
        gains,
        output,
        signal,
        steps,
    } = &sc.kind
    else {
        return Err(Error::InvalidScenario("not a discrete scenario".into()));
    };
    let n = sc.n_agents();
    let m = gains.order();
    let (a, b) = integrator_chain(m);
    let a_flat: Vec<f64> = a.transpose().as_slice().to_vec();
    let b_flat: Vec<f64> = b.as_slice().to_vec();
    let c: Vec<f64> = output.iter().copied().collect();
    let k6: Vec<f64> = gains.k6().expect("validated").iter().copied().collect();
    let k4: Vec<f64> = gains.k4().iter().copied().collect();
    let k5: Vec<f64> = gains.k5().iter().copied().collect();

    let mut xs = vec![0.0; n * m];
    let mut zs = vec![0.0; n * m];
    for (i, x0) in sc.initial_states.iter().enumerate() {
        xs[i * m..(i + 1) * m].copy_from_slice(x0.as_slice());
    }
    for (i, z0) in sc.initial_observers.as_ref().expect("validated").iter().enumerate() {
        zs[i * m..(i + 1) * m].copy_from_slice(z0.as_slice());
    }

    let mut tr = Trajectory {
        n_agents: n,
        order: m,
        discrete: true,
        times: Vec::new(),
        states: Vec::new(),
        observers: Some(Vec::new()),
        controls: Vec::new(),
        graph_index: Vec::new(),
        divergence: None,
    };

    let mut us = vec![0.0; n];
    let mut next_x = vec![0.0; n * m];
    let mut next_z = vec![0.0; n * m];

    let controls_at = |g: &DirectedGraph, zs: &[f64], us: &mut [f64]| {
        for i in 0..n {
            let zi = &zs[i * m..(i + 1) * m];
            let own: f64 = zi.iter().zip(&k4).map(|(a, b)| a * b).sum();
            let d = g.in_weight(i);
            let mut coupling = 0.0;
            for &(j, w) in g.neighbors_in(i) {
                let zj = &zs[j * m..(j + 1) * m];
                let mut cterm = 0.0;
                for k in 0..m {
                    cterm += k5[k] * (zi[k] - zj[k]);
                }
                coupling += w * cterm;
            }
            us[i] = own - coupling / (1.0 + d);
        }
    };

    let record = |k: usize, xs: &[f64], zs: &[f64], us: &[f64], tr: &mut Trajectory| {
        tr.times.push(k as f64);
        tr.states.push(DVector::from_column_slice(xs));
        tr.observers
            .as_mut()
            .expect("present")
            .push(DVector::from_column_slice(zs));
        tr.controls.push(us.to_vec());
        tr.graph_index.push(signal.index_at(k));
    };

    let g0 = signal.graph_at(0);
    controls_at(g0, &zs, &mut us);
    record(0, &xs, &zs, &us, &mut tr);

    for k in 0..*steps {
        let g = signal.graph_at(k);
        controls_at(g, &zs, &mut us);
        for i in 0..n {
            let xi = &xs[i * m..(i + 1) * m];
            let zi = &zs[i * m..(i + 1) * m];
            let y: f64 = c.iter().zip(xi).map(|(a, b)| a * b).sum();
            let innovation: f64 = c.iter().zip(zi).map(|(a, b)| a * b).sum::<f64>() - y;
            for r in 0..m {
                let row = &a_flat[r * m..(r + 1) * m];
                next_x[i * m + r] =
                    row.iter().zip(xi).map(|(a, b)| a * b).sum::<f64>() + b_flat[r] * us[i];
                next_z[i * m + r] = row.iter().zip(zi).map(|(a, b)| a * b).sum::<f64>()
                    + k6[r] * innovation
                    + b_flat[r] * us[i];
            }
        }
        std::mem::swap(&mut xs, &mut next_x);
        std::mem::swap(&mut zs, &mut next_z);
        let worst = max_abs(&xs).max(max_abs(&zs));
        if worst > sc.divergence_guard {
            tr.divergence = Some(Divergence {
                time: (k + 1) as f64,
                max_abs: worst,
            });
            controls_at(signal.graph_at(k + 1), &zs, &mut us);
            record(k + 1, &xs, &zs, &us, &mut tr);
            break;
        }
        if (k + 1) % sc.store_every == 0 || k + 1 == *steps {
            controls_at(signal.graph_at(k + 1), &zs, &mut us);
            record(k + 1, &xs, &zs, &us, &mut tr);
        }
    }
    Ok(tr)
}

/// Runs a continuous scenario.
pub fn simulate_continuous(sc: &Scenario) -> Result<Trajectory> {
    sc.validate()?;
    simulate_continuous_inner(sc)
}

/// Runs a discrete scenario (exact recursion, no integration error).
pub fn simulate_discrete(sc: &Scenario) -> Result<Trajectory> {
    sc.validate()?;
    simulate_discrete_inner(sc)
}

/// Dispatches on the scenario kind.
pub fn simulate(sc: &Scenario) -> Result<Trajectory> {
    sc.validate()?;
    if sc.is_discrete() {
        simulate_discrete_inner(sc)
    } else {
        simulate_continuous_inner(sc)
    }
}

// ---------------------------------------------------------------------------
// trajectory analysis
// ---------------------------------------------------------------------------

/// Spread of the reduced states and the per-component spread of the full
/// states along a trajectory.
#[derive(Debug, Clone)]
pub struct DisagreementSeries {
    /// `max_i - min_i` of the reduced states per sample.
    pub reduced: Vec<f64>,
    /// `per_component[sample][c]`: spread of component `c` across agents.
    pub per_component: Vec<Vec<f64>>,
}

pub fn disagreement_series(tr: &Trajectory, reducer: &RowDVector<f64>) -> DisagreementSeries {
    let m = tr.order;
    let reduced = (0..tr.n_samples())
        .map(|k| {
            let r = tr.reduce_sample(k, reducer);
            r.max() - r.min()
        })
        .collect();
    let per_component = (0..tr.n_samples())
        .map(|k| {
            (0..m)
                .map(|c| {
                    let mut lo = f64::INFINITY;
                    let mut hi = f64::NEG_INFINITY;
                    for i in 0..tr.n_agents {
                        let v = tr.states[k][i * m + c];
                        lo = lo.min(v);
                        hi = hi.max(v);
                    }
                    hi - lo
                })
                .collect()
        })
        .collect();
    DisagreementSeries {
        reduced,
        per_component,
    }
}

/// Consensus verdict: the common limit and the earliest settle time.
#[derive(Debug, Clone)]
pub struct ConsensusReport {
    pub x_star: DVector<f64>,
    pub settle_time: f64,
}

/// Finds the earliest time after which, for the whole trailing window, the
/// pairwise disagreement and the movement relative to the final state both
/// stay below `tol`. `x_star` is the mean final agent state.
pub fn detect_consensus(tr: &Trajectory, tol: f64, window: f64) -> Option<ConsensusReport> {
    if tr.divergence.is_some() || tol <= 0.0 || tr.n_samples() < 2 {
        return None;
    }
    let last = tr.n_samples() - 1;
    let t_end = tr.times[last];
    let final_state = &tr.states[last];
    let ok = |k: usize| -> bool {
        tr.pairwise_disagreement(k) < tol
            && (&tr.states[k] - final_state).amax() < tol
    };
    let mut first_ok = usize::MAX;
    for k in (0..=last).rev() {
        if ok(k) {
            first_ok = k;
        } else {
            break;
        }
    }
    if first_ok == usize::MAX {
        return None;
    }
    let settle_time = tr.times[first_ok];
    if t_end - settle_time < window {
        return None;
    }
    let m = tr.order;
    let mut x_star = DVector::zeros(m);
    for i in 0..tr.n_agents {
        for c in 0..m {
            x_star[c] += final_state[i * m + c];
        }
    }
    x_star /= tr.n_agents as f64;
    Some(ConsensusReport {
        x_star,
        settle_time,
    })
}

/// Consensus value predicted for balanced topologies:
/// `x* = ( sum_i K2 x_i(0) / (a_1 N), 0, ..., 0 )`.
pub fn predict_balanced_consensus(
    signal: &SwitchingSignal,
    initials: &[DVector<f64>],
    gains: &ContinuousGainSet,
) -> Result<DVector<f64>> {
    for (idx, g) in signal.graphs().iter().enumerate() {
        if !is_balanced(g) {
            return Err(Error::NotBalanced(idx));
        }
    }
    if initials.len() != signal.n_nodes() {
        return Err(Error::Dimension("initial state count".into()));
    }
    let m = gains.order();
    let sum: f64 = initials
        .iter()
        .map(|x| gains.k2().iter().zip(x.iter()).map(|(a, b)| a * b).sum::<f64>())
        .sum();
    let mut out = DVector::zeros(m);
    out[0] = sum / (gains.a()[0] * initials.len() as f64);
    Ok(out)
}

/// Residual of the reduced dynamics `d/dt (K2 X) = -L X_bar` along a
/// state-feedback trajectory, measured with a five-point central stencil;
/// samples within two steps of a switch instant are excluded. Returns the
/// per-sample series as `(time, residual)`.
pub fn reduction_residual_series(
    tr: &Trajectory,
    k2: &RowDVector<f64>,
    signal: &SwitchingSignal,
) -> Result<Vec<(f64, f64)>> {
    if tr.n_samples() < 5 {
        return Err(Error::InvalidScenario(
            "too few samples for the residual stencil".into(),
        ));
    }
    let h = tr.times[1] - tr.times[0];
    let reduced: Vec<DVector<f64>> = (0..tr.n_samples())
        .map(|k| tr.reduce_sample(k, k2))
        .collect();
    let switches = signal.switch_times_in(0.0, *tr.times.last().unwrap());
    let mut out = Vec::new();
    for k in 2..tr.n_samples() - 2 {
        let t = tr.times[k];
        // skip the stencil footprint around switches
        let near_switch = switches
            .iter()
            .any(|&s| (s - t).abs() <= 2.0 * h + 1e-12);
        if near_switch {
            continue;
        }
        let deriv = (-&reduced[k + 2] + &reduced[k + 1] * 8.0 - &reduced[k - 1] * 8.0
            + &reduced[k - 2])
            / (12.0 * h);
        let l = laplacian(signal.graph_at(t)?).into_matrix();
        let residual = (&deriv + &l * &reduced[k]).amax();
        out.push((t, residual));
    }
    Ok(out)
}

/// Max of [`reduction_residual_series`].
pub fn reduction_residual(
    tr: &Trajectory,
    k2: &RowDVector<f64>,
    signal: &SwitchingSignal,
) -> Result<f64> {
    Ok(reduction_residual_series(tr, k2, signal)?
        .iter()
        .map(|&(_, r)| r)
        .fold(0.0, f64::max))
}

/// Worst violation of the monotone envelopes of the reduced states:
/// max over samples of the increase of `max_i xbar_i` and the decrease of
/// `min_i xbar_i`.
pub fn monotone_envelope_violation(tr: &Trajectory, k2: &RowDVector<f64>) -> f64 {
    let mut worst: f64 = 0.0;
    let mut prev_max = f64::NEG_INFINITY;
    let mut prev_min = f64::INFINITY;
    for k in 0..tr.n_samples() {
        let r = tr.reduce_sample(k, k2);
        let (mx, mn) = (r.max(), r.min());
        if k > 0 {
            worst = worst.max(mx - prev_max).max(prev_min - mn);
        }
        prev_max = mx;
        prev_min = mn;
    }
    worst
}

/// Least-squares slope of `ln(values)` against `times`, using only strictly
/// positive values above `floor`. Returns `None` with fewer than two usable
/// points.
pub fn fit_decay_rate(times: &[f64], values: &[f64], floor: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter(|&(_, &v)| v > floor)
        .map(|(&t, &v)| (t, v.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-300 {
        return None;
    }
    Some((n * sxy - sx * sy) / denom)
}

// ---------------------------------------------------------------------------
// convergence oracles
// ---------------------------------------------------------------------------

/// Outcome of a lemma oracle: the state at the stop time, plus the first
/// divergence time when the guard tripped.
#[derive(Debug, Clone)]
pub struct OracleResult {
    pub final_state: DVector<f64>,
    pub diverged_at: Option<f64>,
}

/// Integrates the companion form of
/// `r^{(m-1)} + a_{m-1} r^{(m-2)} + ... + a_1 r = f(t)`
/// and returns `(r, r', ..., r^{(m-2)})` at `t_end`. When every root of the
/// characteristic polynomial is in the open left half-plane the limit is
/// `(f*/a_1, 0, ..., 0)`.
pub fn lemma1_oracle(
    a: &[f64],
    f: impl Fn(f64) -> f64,
    r0: &[f64],
    t_end: f64,
    dt: f64,
) -> Result<OracleResult> {
    if a.is_empty() {
        return Err(Error::EmptyCoefficients);
    }
    let d = a.len();
    if r0.len() != d {
        return Err(Error::Dimension(format!(
            "need {d} initial values, got {}",
            r0.len()
        )));
    }
    let mut y = r0.to_vec();
    let rhs = |t: f64, y: &[f64], out: &mut [f64]| {
        for k in 0..d - 1 {
            out[k] = y[k + 1];
        }
        let mut acc = f(t);
        for k in 0..d {
            acc -= a[k] * y[k];
        }
        out[d - 1] = acc;
    };
    let steps = (t_end / dt).round().max(1.0) as usize;
    let mut k1 = vec![0.0; d];
    let mut k2 = vec![0.0; d];
    let mut k3 = vec![0.0; d];
    let mut k4 = vec![0.0; d];
    let mut tmp = vec![0.0; d];
    for step in 0..steps {
        let t = step as f64 * dt;
        rhs(t, &y, &mut k1);
        for i in 0..d {
            tmp[i] = y[i] + 0.5 * dt * k1[i];
        }
        rhs(t + 0.5 * dt, &tmp, &mut k2);
        for i in 0..d {
            tmp[i] = y[i] + 0.5 * dt * k2[i];
        }
        rhs(t + 0.5 * dt, &tmp, &mut k3);
        for i in 0..d {
            tmp[i] = y[i] + dt * k3[i];
        }
        rhs(t + dt, &tmp, &mut k4);
        for i in 0..d {
            y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if max_abs(&y) > tol::DIVERGENCE_GUARD {
            return Ok(OracleResult {
                final_state: DVector::from_column_slice(&y),
                diverged_at: Some((step + 1) as f64 * dt),
            });
        }
    }
    Ok(OracleResult {
        final_state: DVector::from_column_slice(&y),
        diverged_at: None,
    })
}

/// Iterates `r[k+m-1] + b_{m-1} r[k+m-2] + ... + b_1 r[k] = f[k]` from the
/// initial values `r[0..m-2]` and returns `r[k_end]`. When every root of
/// the characteristic polynomial is inside the unit circle the limit is
/// `f* / (1 + b_1 + ... + b_{m-1})`.
pub fn lemma3_oracle(
    b: &[f64],
    f: impl Fn(usize) -> f64,
    r0: &[f64],
    k_end: usize,
) -> Result<OracleResult> {
    if b.is_empty() {
        return Err(Error::EmptyCoefficients);
    }
    let d = b.len();
    if r0.len() != d {
        return Err(Error::Dimension(format!(
            "need {d} initial values, got {}",
            r0.len()
        )));
    }
    let mut window = r0.to_vec();
    if k_end < d {
        return Ok(OracleResult {
            final_state: DVector::from_column_slice(&window[k_end..=k_end]),
            diverged_at: None,
        });
    }
    // window holds r[k], ..., r[k+d-1]
    for k in 0..=(k_end - d) {
        let mut next = f(k);
        for i in 0..d {
            next -= b[i] * window[i];
        }
        window.rotate_left(1);
        window[d - 1] = next;
        if next.abs() > tol::DIVERGENCE_GUARD {
            return Ok(OracleResult {
                final_state: DVector::from_column_slice(&[next]),
                diverged_at: Some((k + d) as f64),
            });
        }
    }
    Ok(OracleResult {
        final_state: DVector::from_column_slice(&[window[d - 1]]),
        diverged_at: None,
    })
}
