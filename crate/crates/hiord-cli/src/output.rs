//! Run artifacts: trajectory CSV, machine-readable summary, and
//! plot-ready data files with a generated gnuplot script.

use anyhow::{Context, Result};
use hiord::engine::{
    detect_consensus, monotone_envelope_violation, reduction_residual, ConsensusReport,
    ContinuousLaw, Scenario, ScenarioKind, Trajectory,
};
use hiord::scenarios::{equilibrium_residual, robot_config_from_state, FlexibleJointParams};
use serde::Serialize;
use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

#[derive(Debug, Serialize)]
pub struct Summary {
    pub scenario: String,
    pub kind: String,
    pub n_agents: usize,
    pub order: usize,
    pub samples: usize,
    pub diverged: bool,
    pub divergence: Option<DivergenceSummary>,
    pub consensus: bool,
    pub settle_time: Option<f64>,
    pub x_star: Option<Vec<f64>>,
    pub final_pairwise_disagreement: f64,
    pub checks: BTreeMap<String, f64>,
    pub derived: BTreeMap<String, f64>,
}

#[derive(Debug, Serialize)]
pub struct DivergenceSummary {
    pub time: f64,
    pub max_abs: f64,
}

pub fn kind_name(sc: &Scenario) -> &'static str {
    match &sc.kind {
        ScenarioKind::Continuous { law, .. } => match law {
            ContinuousLaw::StateFeedback { .. } => "continuous-state-feedback",
            ContinuousLaw::OutputFeedback { .. } => "continuous-output-feedback",
            ContinuousLaw::GeneralLti { .. } => "general-lti",
        },
        ScenarioKind::Discrete { .. } => "discrete",
    }
}

/// Builds the run summary, including the per-kind invariant checks when
/// `run_checks` is set.
pub fn summarize(sc: &Scenario, tr: &Trajectory, window: f64, run_checks: bool) -> Summary {
    let report: Option<ConsensusReport> = detect_consensus(tr, sc.consensus_tol, window);
    let mut checks = BTreeMap::new();
    let mut derived = BTreeMap::new();
    if run_checks {
        if let ScenarioKind::Continuous {
            law: ContinuousLaw::StateFeedback { gains },
            signal,
            ..
        } = &sc.kind
        {
            checks.insert(
                "monotone_envelope_violation".into(),
                monotone_envelope_violation(tr, gains.k2()),
            );
            if sc.store_every == 1 && tr.divergence.is_none() {
                if let Ok(res) = reduction_residual(tr, gains.k2(), signal) {
                    checks.insert("reduction_residual_max".into(), res);
                }
            }
        }
        if let (Some(obs), true) = (&tr.observers, tr.divergence.is_none()) {
            let last = tr.n_samples() - 1;
            let err = (&tr.states[last] - &obs[last]).amax();
            checks.insert("observer_error_final".into(), err);
        }
    }
    if sc.name == "example1" {
        let p = FlexibleJointParams::default();
        if let Some(rep) = &report {
            let (q1, _, q2, _) = robot_config_from_state(&rep.x_star, &p);
            derived.insert("q1_star".into(), q1);
            derived.insert("q2_star".into(), q2);
            derived.insert(
                "equilibrium_residual".into(),
                equilibrium_residual(q1, q2, &p),
            );
        }
    }
    let last = tr.n_samples() - 1;
    Summary {
        scenario: sc.name.clone(),
        kind: kind_name(sc).into(),
        n_agents: tr.n_agents,
        order: tr.order,
        samples: tr.n_samples(),
        diverged: tr.divergence.is_some(),
        divergence: tr.divergence.map(|d| DivergenceSummary {
            time: d.time,
            max_abs: d.max_abs,
        }),
        consensus: report.is_some(),
        settle_time: report.as_ref().map(|r| r.settle_time),
        x_star: report.as_ref().map(|r| r.x_star.iter().copied().collect()),
        final_pairwise_disagreement: tr.pairwise_disagreement(last),
        checks,
        derived,
    }
}

/// Writes trajectory.csv, summary.json and the plot directory under
/// `out_dir`; returns the paths written.
pub fn write_artifacts(
    out_dir: &Path,
    sc: &Scenario,
    tr: &Trajectory,
    summary: &Summary,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)
        .with_context(|| format!("creating output directory {}", out_dir.display()))?;
    let mut written = Vec::new();

    let csv_path = out_dir.join("trajectory.csv");
    let mut csv = BufWriter::new(fs::File::create(&csv_path)?);
    tr.to_csv(&mut csv)?;
    csv.flush()?;
    written.push(csv_path);

    let summary_path = out_dir.join("summary.json");
    fs::write(&summary_path, serde_json::to_string_pretty(summary)?)?;
    written.push(summary_path);

    let plot_dir = out_dir.join("plot");
    fs::create_dir_all(&plot_dir)?;
    let time_label = if tr.discrete { "step" } else { "time" };
    for agent in 0..tr.n_agents {
        for comp in 0..tr.order {
            let path = plot_dir.join(format!("x_{}_{}.dat", agent + 1, comp + 1));
            let mut f = BufWriter::new(fs::File::create(&path)?);
            writeln!(f, "# {time_label} x_{}_{}", agent + 1, comp + 1)?;
            for k in 0..tr.n_samples() {
                writeln!(f, "{:.10e} {:.10e}", tr.times[k], tr.component(k, agent, comp))?;
            }
            written.push(path);
        }
    }
    if tr.observers.is_some() {
        let tag = if tr.discrete { "z" } else { "s" };
        for agent in 0..tr.n_agents {
            for comp in 0..tr.order {
                let path = plot_dir.join(format!("{tag}_{}_{}.dat", agent + 1, comp + 1));
                let mut f = BufWriter::new(fs::File::create(&path)?);
                writeln!(f, "# {time_label} {tag}_{}_{}", agent + 1, comp + 1)?;
                for k in 0..tr.n_samples() {
                    let v = tr.agent_observer(k, agent).expect("observers present")[comp];
                    writeln!(f, "{:.10e} {v:.10e}", tr.times[k])?;
                }
                written.push(path);
            }
        }
    }

    let gp_path = plot_dir.join("plot.gp");
    let mut gp = fs::File::create(&gp_path)?;
    writeln!(gp, "# gnuplot script: one figure per state component")?;
    writeln!(gp, "set terminal pngcairo size 1000,700")?;
    writeln!(gp, "set xlabel '{time_label}'")?;
    for comp in 0..tr.order {
        writeln!(gp, "set output 'component_{}.png'", comp + 1)?;
        writeln!(gp, "set ylabel 'x_{{i,{}}}'", comp + 1)?;
        let series: Vec<String> = (0..tr.n_agents)
            .map(|agent| {
                format!(
                    "'x_{}_{}.dat' with lines title 'agent {}'",
                    agent + 1,
                    comp + 1,
                    agent + 1
                )
            })
            .collect();
        writeln!(gp, "plot {}", series.join(", \\\n     "))?;
    }
    written.push(gp_path);
    let _ = sc;
    Ok(written)
}
