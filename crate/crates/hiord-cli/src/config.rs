//! Scenario configuration files.
//!
//! TOML with 1-based node and graph indices (matching the usual
//! presentation of the protocols); everything is shifted to 0-based
//! internally. Graph literals are `"receiver <- sender : weight"` strings.
//!
//! ```toml
//! [scenario]
//! kind = "continuous-state-feedback"
//! duration = 60.0
//! dt = 0.001
//!
//! [gains]
//! a = [1.0, 3.0, 3.0]
//!
//! [topology]
//! n = 5
//! graphs = [
//!   { edges = ["2 <- 1 : 1", "4 <- 1 : 1", "5 <- 3 : 1"] },
//! ]
//! [topology.schedule]
//! periodic = { slot = 0.1, cycle = [1, 2, 3] }
//!
//! [initial]
//! states = [[2.5, 0.0, -9.5, 0.0]]
//! ```

use anyhow::{anyhow, bail, Context, Result};
use hiord::engine::{ContinuousLaw, Scenario, ScenarioKind};
use hiord::gains::{
    default_observer_poly_continuous, default_observer_poly_discrete, make_continuous_gains,
    make_discrete_gains,
};
use hiord::graph::DirectedGraph;
use hiord::lti::{place_observer_gain, LtiSystem, Polynomial};
use hiord::switching::{DiscreteSwitchingSignal, Schedule, StepRule, SwitchingSignal};
use hiord::nalgebra::{DMatrix, DVector, RowDVector};
use serde::Deserialize;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub scenario: ScenarioSection,
    pub gains: GainsSection,
    pub plant: Option<PlantSection>,
    pub output: Option<OutputSection>,
    pub topology: TopologySection,
    pub initial: InitialSection,
    pub settings: Option<SettingsSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub kind: String,
    pub name: Option<String>,
    pub duration: Option<f64>,
    pub steps: Option<usize>,
    pub dt: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainsSection {
    pub a: Option<Vec<f64>>,
    pub b: Option<Vec<f64>>,
    pub k3: Option<Vec<f64>>,
    pub k6: Option<Vec<f64>>,
    /// Real observer poles; used when k3/k6 are absent.
    pub observer_poles: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantSection {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub c: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySection {
    pub n: usize,
    pub graphs: Vec<GraphSection>,
    pub schedule: ScheduleSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSection {
    pub edges: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    pub periodic: Option<PeriodicRule>,
    pub explicit: Option<ExplicitRule>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeriodicRule {
    pub slot: Option<f64>,
    /// 1-based graph indices.
    pub cycle: Vec<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitRule {
    pub times: Vec<f64>,
    /// 1-based graph indices.
    pub indices: Vec<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SettingsSection {
    pub store_every: Option<usize>,
    pub consensus_tol: Option<f64>,
    pub divergence_guard: Option<f64>,
}

/// Parses one `"i <- j : weight"` edge literal (1-based) into the 0-based
/// `(receiver, sender, weight)` triple.
pub fn parse_edge(text: &str) -> Result<(usize, usize, f64)> {
    let (recv_part, rest) = text
        .split_once("<-")
        .ok_or_else(|| anyhow!("edge '{text}': expected 'i <- j : weight'"))?;
    let (send_part, weight_part) = rest
        .split_once(':')
        .map(|(s, w)| (s, Some(w)))
        .unwrap_or((rest, None));
    let recv: usize = recv_part
        .trim()
        .parse()
        .with_context(|| format!("edge '{text}': bad receiver"))?;
    let send: usize = send_part
        .trim()
        .parse()
        .with_context(|| format!("edge '{text}': bad sender"))?;
    let weight: f64 = match weight_part {
        Some(w) => w
            .trim()
            .parse()
            .with_context(|| format!("edge '{text}': bad weight"))?,
        None => 1.0,
    };
    if recv == 0 || send == 0 {
        bail!("edge '{text}': node indices are 1-based");
    }
    Ok((recv - 1, send - 1, weight))
}

fn build_graphs(topo: &TopologySection) -> Result<Vec<DirectedGraph>> {
    topo.graphs
        .iter()
        .enumerate()
        .map(|(gi, gs)| {
            let edges = gs
                .edges
                .iter()
                .map(|e| parse_edge(e))
                .collect::<Result<Vec<_>>>()
                .with_context(|| format!("graph {}", gi + 1))?;
            DirectedGraph::new(topo.n, &edges)
                .map_err(|e| anyhow!("graph {}: {e}", gi + 1))
        })
        .collect()
}

fn shift_indices(raw: &[usize], n_graphs: usize) -> Result<Vec<usize>> {
    raw.iter()
        .map(|&k| {
            if k == 0 || k > n_graphs {
                bail!("graph index {k} out of range 1..={n_graphs}")
            } else {
                Ok(k - 1)
            }
        })
        .collect()
}

/// Builds the continuous switching signal of a config (`horizon` covers at
/// least the scenario duration).
pub fn build_signal(topo: &TopologySection, horizon: f64) -> Result<SwitchingSignal> {
    let graphs = build_graphs(topo)?;
    let schedule = match (&topo.schedule.periodic, &topo.schedule.explicit) {
        (Some(p), None) => Schedule::Periodic {
            slot: p.slot.ok_or_else(|| anyhow!("periodic rule needs slot"))?,
            cycle: shift_indices(&p.cycle, graphs.len())?,
        },
        (None, Some(e)) => Schedule::Explicit {
            times: e.times.clone(),
            indices: shift_indices(&e.indices, graphs.len())?,
        },
        _ => bail!("schedule must have exactly one of 'periodic' or 'explicit'"),
    };
    Ok(SwitchingSignal::new(graphs, schedule, horizon)?)
}

/// Builds the discrete switching signal of a config.
pub fn build_discrete_signal(topo: &TopologySection) -> Result<DiscreteSwitchingSignal> {
    let graphs = build_graphs(topo)?;
    let rule = match (&topo.schedule.periodic, &topo.schedule.explicit) {
        (Some(p), None) => StepRule::Periodic {
            cycle: shift_indices(&p.cycle, graphs.len())?,
        },
        (None, Some(e)) => StepRule::Explicit {
            indices: shift_indices(&e.indices, graphs.len())?,
        },
        _ => bail!("schedule must have exactly one of 'periodic' or 'explicit'"),
    };
    Ok(DiscreteSwitchingSignal::new(graphs, rule)?)
}

fn initial_vectors(raw: &[Vec<f64>], n: usize, m: usize, what: &str) -> Result<Vec<DVector<f64>>> {
    if raw.len() != n {
        bail!("{what}: expected {n} vectors, got {}", raw.len());
    }
    raw.iter()
        .map(|v| {
            if v.len() != m {
                bail!("{what}: expected length {m}, got {}", v.len())
            } else {
                Ok(DVector::from_column_slice(v))
            }
        })
        .collect()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    pub states: Vec<Vec<f64>>,
    pub observers: Option<Vec<Vec<f64>>>,
}

/// Parses a TOML string into a [`Scenario`].
pub fn scenario_from_toml(text: &str, fallback_name: &str) -> Result<Scenario> {
    let cfg: ConfigFile = toml::from_str(text).context("config parse error")?;
    scenario_from_config(&cfg, fallback_name)
}

pub fn scenario_from_config(cfg: &ConfigFile, fallback_name: &str) -> Result<Scenario> {
    let name = cfg
        .scenario
        .name
        .clone()
        .unwrap_or_else(|| fallback_name.to_string());
    let n = cfg.topology.n;
    let settings = cfg.settings.as_ref();
    let store_every = settings.and_then(|s| s.store_every).unwrap_or(1);
    let consensus_tol = settings
        .and_then(|s| s.consensus_tol)
        .unwrap_or(hiord::tol::CONSENSUS);
    let divergence_guard = settings
        .and_then(|s| s.divergence_guard)
        .unwrap_or(hiord::tol::DIVERGENCE_GUARD);

    let kind_name = cfg.scenario.kind.as_str();
    let (kind, m) = match kind_name {
        "continuous-state-feedback" | "continuous-output-feedback" | "general-lti" => {
            let a = cfg
                .gains
                .a
                .as_ref()
                .ok_or_else(|| anyhow!("{kind_name} requires gains.a"))?;
            let mut gains = make_continuous_gains(a)?;
            let duration = cfg
                .scenario
                .duration
                .ok_or_else(|| anyhow!("continuous scenario requires duration"))?;
            let dt = cfg.scenario.dt.unwrap_or(1e-3);
            let signal = build_signal(&cfg.topology, duration)?;
            let law = match kind_name {
                "continuous-state-feedback" => {
                    let m = gains.order();
                    (ContinuousLaw::StateFeedback { gains }, m)
                }
                "continuous-output-feedback" => {
                    let m = gains.order();
                    let c_row = cfg
                        .output
                        .as_ref()
                        .ok_or_else(|| anyhow!("output feedback requires [output] c"))?;
                    let output = RowDVector::from_row_slice(&c_row.c);
                    let (a_chain, _) = hiord::lti::integrator_chain(m);
                    gains = attach_continuous_observer(gains, &a_chain, &output, &cfg.gains)?;
                    (ContinuousLaw::OutputFeedback { gains, output }, m)
                }
                _ => {
                    let ps = cfg
                        .plant
                        .as_ref()
                        .ok_or_else(|| anyhow!("general-lti requires [plant]"))?;
                    let m = ps.b.len();
                    let flat: Vec<f64> = ps.a.iter().flatten().copied().collect();
                    if flat.len() != m * m || ps.c.len() != m {
                        bail!("[plant] dimensions are inconsistent");
                    }
                    let plant = LtiSystem::new(
                        DMatrix::from_row_slice(m, m, &flat),
                        DVector::from_column_slice(&ps.b),
                        RowDVector::from_row_slice(&ps.c),
                    )?;
                    let c = plant.c.clone();
                    gains = attach_continuous_observer(gains, &plant.a, &c, &cfg.gains)?;
                    let canon = hiord::lti::to_controllable_canonical(&plant)?;
                    (
                        ContinuousLaw::GeneralLti {
                            plant,
                            gains,
                            canon,
                        },
                        m,
                    )
                }
            };
            let (law, m) = law;
            (
                ScenarioKind::Continuous {
                    law,
                    signal,
                    duration,
                    dt,
                },
                m,
            )
        }
        "discrete" => {
            let b = cfg
                .gains
                .b
                .as_ref()
                .ok_or_else(|| anyhow!("discrete requires gains.b"))?;
            let mut gains = make_discrete_gains(b)?;
            let m = gains.order();
            let c_row = cfg
                .output
                .as_ref()
                .ok_or_else(|| anyhow!("discrete requires [output] c"))?;
            let output = RowDVector::from_row_slice(&c_row.c);
            let k6 = match &cfg.gains.k6 {
                Some(v) => DVector::from_column_slice(v),
                None => {
                    let (a_chain, _) = hiord::lti::integrator_chain(m);
                    let poly = match &cfg.gains.observer_poles {
                        Some(p) => Polynomial::from_real_roots(p),
                        None => default_observer_poly_discrete(m),
                    };
                    place_observer_gain(&a_chain, &output, &poly)?.gain
                }
            };
            gains = gains.with_observer_gain(k6);
            let steps = cfg
                .scenario
                .steps
                .ok_or_else(|| anyhow!("discrete scenario requires steps"))?;
            let signal = build_discrete_signal(&cfg.topology)?;
            (
                ScenarioKind::Discrete {
                    gains,
                    output,
                    signal,
                    steps,
                },
                m,
            )
        }
        other => bail!("unknown scenario kind '{other}'"),
    };

    let initial_states = initial_vectors(&cfg.initial.states, n, m, "initial.states")?;
    let needs_observers = !matches!(
        kind,
        ScenarioKind::Continuous {
            law: ContinuousLaw::StateFeedback { .. },
            ..
        }
    );
    let initial_observers = match (&cfg.initial.observers, needs_observers) {
        (Some(raw), _) => Some(initial_vectors(raw, n, m, "initial.observers")?),
        (None, true) => Some(vec![DVector::zeros(m); n]),
        (None, false) => None,
    };

    let sc = Scenario {
        name,
        kind,
        initial_states,
        initial_observers,
        store_every,
        divergence_guard,
        consensus_tol,
    };
    sc.validate()?;
    Ok(sc)
}

fn attach_continuous_observer(
    gains: hiord::gains::ContinuousGainSet,
    a: &DMatrix<f64>,
    c: &RowDVector<f64>,
    section: &GainsSection,
) -> Result<hiord::gains::ContinuousGainSet> {
    let k3 = match &section.k3 {
        Some(v) => DVector::from_column_slice(v),
        None => {
            let poly = match &section.observer_poles {
                Some(p) => Polynomial::from_real_roots(p),
                None => default_observer_poly_continuous(a.nrows()),
            };
            place_observer_gain(a, c, &poly)?.gain
        }
    };
    Ok(gains.with_observer_gain(k3))
}
