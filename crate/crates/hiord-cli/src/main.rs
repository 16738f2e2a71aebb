//! Command-line front end: run built-in or configured scenarios, run the
//! randomized self-check suites, and verify joint connectivity of
//! switching topologies.

mod config;
mod output;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};
use hiord::engine::{simulate, ContinuousLaw, Scenario, ScenarioKind};
use hiord::gains::{make_continuous_gains, make_discrete_gains};
use hiord::scenarios::builtin;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "hiord",
    about = "Consensus of high-order integral multi-agent systems under switching directed topology",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a built-in scenario (example1, example2, example3) or a TOML
    /// config file; writes trajectory.csv, summary.json and plot data.
    Run {
        /// Built-in name or path to a config file.
        source: String,
        /// Integration step override (continuous scenarios).
        #[arg(long)]
        dt: Option<f64>,
        /// Duration override: seconds (continuous) or steps (discrete).
        #[arg(long)]
        duration: Option<f64>,
        /// Output root; defaults to $HIORD_OUT or ./out.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Random seed (example3 initial states).
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Consensus detection tolerance override.
        #[arg(long)]
        tol: Option<f64>,
        /// Override a gain coefficient vector, e.g. --override a=-1,3,3
        /// or --override b=0.125,0.75,1.5 (repeatable).
        #[arg(long = "override", value_name = "KEY=VALUES")]
        overrides: Vec<String>,
        /// Skip the per-run invariant checks in the summary.
        #[arg(long)]
        skip_checks: bool,
    },
    /// Run a randomized self-check suite: graph | gains | stability |
    /// stochastic | contraction | all.
    Check {
        suite: String,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
    },
    /// Verify uniform joint quasi-strong connectivity of a scenario's
    /// switching signal over a given window.
    VerifyTopology {
        /// Built-in name or path to a config file.
        source: String,
        /// Window length: seconds (continuous) or steps M (discrete,
        /// window = M+1 consecutive graphs).
        #[arg(long)]
        window: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run {
            source,
            dt,
            duration,
            out,
            seed,
            tol,
            overrides,
            skip_checks,
        } => run_command(
            &source,
            dt,
            duration,
            out,
            seed,
            tol,
            &overrides,
            skip_checks,
        ),
        Command::Check { suite, seed } => check_command(&suite, seed),
        Command::VerifyTopology {
            source,
            window,
            seed,
        } => verify_topology_command(&source, window, seed),
    }
}

fn load_scenario(source: &str, seed: u64) -> Result<Scenario> {
    if let Some(sc) = builtin(source, seed) {
        return Ok(sc);
    }
    let path = Path::new(source);
    if !path.exists() {
        bail!(
            "'{source}' is neither a built-in scenario (example1, example2, example3) \
             nor an existing config file"
        );
    }
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("scenario");
    config::scenario_from_toml(&text, stem)
}

fn parse_coeff_override(value: &str) -> Result<(String, Vec<f64>)> {
    let (key, list) = value
        .split_once('=')
        .ok_or_else(|| anyhow!("override '{value}' must look like key=v1,v2,..."))?;
    let coeffs = list
        .split(',')
        .map(|v| v.trim().parse::<f64>())
        .collect::<std::result::Result<Vec<f64>, _>>()
        .with_context(|| format!("override '{value}': bad number"))?;
    Ok((key.trim().to_string(), coeffs))
}

fn apply_overrides(
    sc: &mut Scenario,
    dt: Option<f64>,
    duration: Option<f64>,
    tol: Option<f64>,
    overrides: &[String],
) -> Result<()> {
    if let Some(t) = tol {
        sc.consensus_tol = t;
    }
    match &mut sc.kind {
        ScenarioKind::Continuous {
            law,
            signal,
            duration: dur,
            dt: step,
        } => {
            if let Some(d) = dt {
                *step = d;
            }
            if let Some(d) = duration {
                *dur = d;
                signal.extend_horizon(d);
            }
            for ov in overrides {
                let (key, coeffs) = parse_coeff_override(ov)?;
                match key.as_str() {
                    "a" => {
                        let rebuilt = make_continuous_gains(&coeffs)?;
                        match law {
                            ContinuousLaw::StateFeedback { gains } => *gains = rebuilt,
                            ContinuousLaw::OutputFeedback { gains, .. }
                            | ContinuousLaw::GeneralLti { gains, .. } => {
                                let k3 = gains
                                    .k3()
                                    .cloned()
                                    .ok_or_else(|| anyhow!("observer gain missing"))?;
                                *gains = rebuilt.with_observer_gain(k3);
                            }
                        }
                    }
                    other => bail!("override '{other}' not applicable to a continuous scenario"),
                }
            }
        }
        ScenarioKind::Discrete { gains, steps, .. } => {
            if dt.is_some() {
                bail!("--dt does not apply to discrete scenarios");
            }
            if let Some(d) = duration {
                *steps = d.round() as usize;
            }
            for ov in overrides {
                let (key, coeffs) = parse_coeff_override(ov)?;
                match key.as_str() {
                    "b" => {
                        let k6 = gains
                            .k6()
                            .cloned()
                            .ok_or_else(|| anyhow!("observer gain missing"))?;
                        *gains = make_discrete_gains(&coeffs)?.with_observer_gain(k6);
                    }
                    other => bail!("override '{other}' not applicable to a discrete scenario"),
                }
            }
        }
    }
    Ok(())
}

fn output_root(cli_out: Option<PathBuf>) -> PathBuf {
    cli_out
        .or_else(|| std::env::var_os("HIORD_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

#[allow(clippy::too_many_arguments)]
fn run_command(
    source: &str,
    dt: Option<f64>,
    duration: Option<f64>,
    out: Option<PathBuf>,
    seed: u64,
    tol: Option<f64>,
    overrides: &[String],
    skip_checks: bool,
) -> Result<ExitCode> {
    let mut sc = load_scenario(source, seed)?;
    apply_overrides(&mut sc, dt, duration, tol, overrides)?;
    sc.validate().map_err(|e| anyhow!("invalid scenario: {e}"))?;

    let tr = simulate(&sc)?;
    let window = default_window(&sc);
    let summary = output::summarize(&sc, &tr, window, !skip_checks);
    let out_dir = output_root(out).join(&sc.name);
    output::write_artifacts(&out_dir, &sc, &tr, &summary)?;

    println!("scenario: {} ({})", summary.scenario, summary.kind);
    println!(
        "agents: {}  order: {}  samples: {}",
        summary.n_agents, summary.order, summary.samples
    );
    if let Some(d) = &summary.divergence {
        println!("DIVERGED at t = {} (max |x| = {:.3e})", d.time, d.max_abs);
    }
    match (&summary.consensus, &summary.x_star) {
        (true, Some(x)) => {
            println!(
                "consensus: yes (settle time {:.3})",
                summary.settle_time.unwrap_or(f64::NAN)
            );
            let rendered: Vec<String> = x.iter().map(|v| format!("{v:.6}")).collect();
            println!("x* = [{}]", rendered.join(", "));
        }
        _ => println!("consensus: no"),
    }
    for (k, v) in &summary.derived {
        println!("{k} = {v:.6}");
    }
    for (k, v) in &summary.checks {
        println!("check {k} = {v:.3e}");
    }
    println!("artifacts in {}", out_dir.display());

    if summary.diverged {
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}

fn default_window(sc: &Scenario) -> f64 {
    match &sc.kind {
        ScenarioKind::Continuous { duration, .. } => duration * 0.1,
        ScenarioKind::Discrete { steps, .. } => (*steps as f64) * 0.1,
    }
}

fn check_command(suite: &str, seed: u64) -> Result<ExitCode> {
    let outcomes = hiord::checks::suite(suite, seed).ok_or_else(|| {
        anyhow!("unknown suite '{suite}' (graph, gains, stability, stochastic, contraction, all)")
    })?;
    let mut all_ok = true;
    for o in &outcomes {
        let verdict = if o.passed { "PASS" } else { "FAIL" };
        println!(
            "{verdict} {} [{} cases, {} failures] {}",
            o.name, o.cases, o.failures, o.detail
        );
        all_ok &= o.passed;
    }
    Ok(if all_ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn verify_topology_command(source: &str, window: f64, seed: u64) -> Result<ExitCode> {
    let sc = load_scenario(source, seed)?;
    match &sc.kind {
        ScenarioKind::Continuous { signal, .. } => {
            let reports = signal.ujqsc_windows(window)?;
            println!(
                "{:>10} {:>10} {:>8} {:>6}  centers",
                "start", "end", "edges", "qsc"
            );
            for r in &reports {
                let centers: Vec<String> =
                    r.centers.iter().map(|c| (c + 1).to_string()).collect();
                println!(
                    "{:>10.4} {:>10.4} {:>8} {:>6}  [{}]",
                    r.start,
                    r.end,
                    r.union_edges,
                    if r.quasi_strongly_connected {
                        "yes"
                    } else {
                        "NO"
                    },
                    centers.join(",")
                );
            }
            let verdict = reports.iter().all(|r| r.quasi_strongly_connected);
            println!(
                "uniformly jointly quasi-strongly connected over window {window}: {}",
                if verdict { "yes" } else { "no" }
            );
            Ok(if verdict {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        ScenarioKind::Discrete { signal, steps, .. } => {
            let m = window.round() as usize;
            let verdict = signal.verify_ujqsc(m, *steps);
            println!(
                "discrete UJQSC with windows of {} consecutive steps over horizon {}: {}",
                m + 1,
                steps,
                if verdict { "yes" } else { "no" }
            );
            Ok(if verdict {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
    }
}
