//! Command-line front end.

pub mod output;
pub mod sweep;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::analytic::{compose_trajectory, Arc};
use crate::controller::Law;
use crate::error::{Error, Result};
use crate::lyapunov::{self, LyapunovParams};
use crate::model::{DisturbanceSpec, Provenance, ScenarioFile, SimConfig, State, Trajectory};
use crate::simulator::{compare_with_analytic, compare_with_reference, simulate};

use output::{num, sidecar_path, write_json, write_trajectory_csv};
use sweep::{run_sweep, SweepFile};

#[derive(Debug, Parser)]
#[command(
    name = "qcsm",
    version,
    about = "Quasi-continuous sliding-mode controller toolkit"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Scenario (or sweep) JSON file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file; sidecars are written next to it.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, default_value = "modified")]
    pub law: Law,
    /// Overrides the seed of random disturbances (or of a sweep).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides the integration step.
    #[arg(long, global = true)]
    pub dt: Option<f64>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one scenario.
    Simulate,
    /// Closed-form trajectory from a point in U or C_a.
    Analytic {
        #[arg(long, allow_hyphen_values = true)]
        x1: f64,
        #[arg(long, allow_hyphen_values = true)]
        x2: f64,
        #[arg(long)]
        gamma: f64,
        #[arg(long, default_value_t = 1e-4)]
        sample_dt: f64,
    },
    /// Deviation of a simulation from the closed form (or a fine-step reference).
    Compare {
        /// Compare against a simulation at this step instead of the closed form.
        #[arg(long)]
        ref_dt: Option<f64>,
    },
    /// Gain thresholds and the epsilon interval for a disturbance bound.
    Gain {
        #[arg(long = "D")]
        d: f64,
        #[arg(long)]
        eta: Option<f64>,
    },
    /// Grid of the Lyapunov candidate.
    LyapunovMap {
        #[arg(long)]
        gamma: f64,
        #[arg(long = "D", default_value_t = 0.0)]
        d: f64,
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long, num_args = 2, allow_hyphen_values = true, default_values_t = [-2.0, 2.0])]
        x1_range: Vec<f64>,
        #[arg(long, num_args = 2, allow_hyphen_values = true, default_values_t = [-20.0, 20.0])]
        x2_range: Vec<f64>,
        #[arg(long, default_value_t = 201)]
        resolution: usize,
    },
    /// Seeded Monte Carlo sweep.
    Sweep,
}

/// Parses `args`, runs the command and returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let c = &cli.common;
    match &cli.command {
        Command::Simulate => cmd_simulate(c),
        Command::Analytic {
            x1,
            x2,
            gamma,
            sample_dt,
        } => cmd_analytic(c, State::new(*x1, *x2), *gamma, *sample_dt),
        Command::Compare { ref_dt } => cmd_compare(c, *ref_dt),
        Command::Gain { d, eta } => cmd_gain(c, *d, *eta),
        Command::LyapunovMap {
            gamma,
            d,
            eta,
            epsilon,
            x1_range,
            x2_range,
            resolution,
        } => cmd_lyapunov_map(
            c,
            MapArgs {
                gamma: *gamma,
                d: *d,
                eta: *eta,
                epsilon: *epsilon,
                x1_range: (x1_range[0], x1_range[1]),
                x2_range: (x2_range[0], x2_range[1]),
                resolution: *resolution,
            },
        ),
        Command::Sweep => cmd_sweep(c),
    }
}

fn required<'a>(v: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    v.as_deref()
        .ok_or_else(|| Error::InvalidConfig(format!("--{flag} is required")))
}

/// Loads the scenario and applies `--dt` / `--seed` before defaulting.
pub fn load_scenario(c: &Common) -> Result<SimConfig> {
    let mut file = ScenarioFile::load(required(&c.config, "config")?)?;
    if let Some(dt) = c.dt {
        file.dt = Some(dt);
    }
    if let (Some(s), DisturbanceSpec::UniformRandom { seed, .. }) = (c.seed, &mut file.disturbance)
    {
        *seed = s;
    }
    file.resolve()
}

/// Prints to stdout, or writes to `--out` when given.
fn emit_json<T: Serialize>(c: &Common, value: &T) -> Result<()> {
    match &c.out {
        Some(path) => write_json(path, value),
        None => {
            let mut stdout = std::io::stdout().lock();
            serde_json::to_writer_pretty(&mut stdout, value)?;
            writeln!(stdout)?;
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct RunMeta<'a> {
    config: ScenarioFile,
    provenance: &'a BTreeMap<String, Provenance>,
    law: Law,
    captured_at: Option<f64>,
    events: &'a [crate::model::Event],
    samples: usize,
    diverged: bool,
}

fn write_run(
    c: &Common,
    out: &Path,
    cfg: &SimConfig,
    traj: &Trajectory,
    diverged: bool,
) -> Result<()> {
    let meta = RunMeta {
        config: cfg.to_scenario_file(),
        provenance: &cfg.provenance,
        law: c.law,
        captured_at: traj.captured_at,
        events: &traj.events,
        samples: traj.samples.len(),
        diverged,
    };
    match c.format {
        Format::Csv => {
            write_trajectory_csv(out, traj)?;
            write_json(&sidecar_path(out), &meta)
        }
        Format::Json => write_json(out, &json!({ "meta": meta, "trajectory": traj })),
    }
}

fn cmd_simulate(c: &Common) -> Result<()> {
    let cfg = load_scenario(c)?;
    let out = required(&c.out, "out")?;
    match simulate(&cfg, c.law) {
        Ok(traj) => {
            write_run(c, out, &cfg, &traj, false)?;
            match traj.captured_at {
                Some(t) => eprintln!("captured at t = {t}"),
                None => eprintln!("not captured before t_end = {}", cfg.t_end),
            }
            Ok(())
        }
        Err(Error::NonFiniteState { t, partial }) => {
            write_run(c, out, &cfg, &partial, true)?;
            Err(Error::NonFiniteState { t, partial })
        }
        Err(e) => Err(e),
    }
}

fn cmd_analytic(c: &Common, x0: State, gamma: f64, sample_dt: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidConfig(format!("gamma = {gamma} must be > 0")));
    }
    let sol = compose_trajectory(x0, gamma, sample_dt)?;
    let arcs: Vec<serde_json::Value> = sol
        .arcs
        .iter()
        .map(|a| match a {
            Arc::Parabolic { start, arc } => json!({
                "kind": "parabolic",
                "start": start,
                "x0": arc.x0,
                "sign_branch": arc.sign_branch,
                "t_exit": arc.t_exit,
            }),
            Arc::Harmonic { start, arc } => json!({
                "kind": "harmonic",
                "start": start,
                "x0": arc.x0,
                "B": arc.b,
                "omega": arc.omega,
                "phi": arc.phi,
                "t_reach": arc.t_reach,
                "mirrored": arc.mirrored,
            }),
        })
        .collect();
    let meta = json!({
        "x0": x0,
        "gamma": gamma,
        "sample_dt": sample_dt,
        "arcs": arcs,
        "total_time": sol.total_time,
    });
    match (&c.out, c.format) {
        (Some(out), Format::Csv) => {
            write_trajectory_csv(out, &sol.trajectory)?;
            write_json(&sidecar_path(out), &meta)
        }
        _ => emit_json(c, &meta),
    }
}

fn cmd_compare(c: &Common, ref_dt: Option<f64>) -> Result<()> {
    let cfg = load_scenario(c)?;
    let report = match ref_dt {
        Some(r) => compare_with_reference(&cfg, c.law, r)?,
        None => compare_with_analytic(&cfg)?,
    };
    emit_json(
        c,
        &json!({
            "config": cfg.to_scenario_file(),
            "provenance": cfg.provenance,
            "reference": match ref_dt {
                Some(r) => json!({ "simulation_dt": r }),
                None => json!("analytic"),
            },
            "report": report,
        }),
    )
}

/// Gain report for a disturbance bound, as printed by `qcsm gain`.
pub fn gain_report(d: f64, eta: Option<f64>) -> Result<serde_json::Value> {
    if !(d >= 0.0 && d.is_finite()) {
        return Err(Error::InvalidConfig(format!("D = {d} must be >= 0")));
    }
    let (eta, eta_prov) = match eta {
        Some(e) => (e, Provenance::Specified),
        None => (lyapunov::default_eta(d), Provenance::Default),
    };
    let gamma_new = lyapunov::gamma_min_new(d);
    let at = gamma_new * 1.001;
    let interval = lyapunov::epsilon_interval(at, d, eta)?;
    Ok(json!({
        "D": d,
        "gamma_min_old": lyapunov::gamma_min_old(d),
        "gamma_min_new": gamma_new,
        "epsilon_interval_at": {
            "gamma": at,
            "eta": eta,
            "interval": interval,
        },
        "provenance": { "eta": eta_prov },
    }))
}

fn cmd_gain(c: &Common, d: f64, eta: Option<f64>) -> Result<()> {
    emit_json(c, &gain_report(d, eta)?)
}

struct MapArgs {
    gamma: f64,
    d: f64,
    eta: Option<f64>,
    epsilon: Option<f64>,
    x1_range: (f64, f64),
    x2_range: (f64, f64),
    resolution: usize,
}

fn cmd_lyapunov_map(c: &Common, a: MapArgs) -> Result<()> {
    let out = required(&c.out, "out")?;
    let mut prov = BTreeMap::new();
    let eta = match a.eta {
        Some(e) => {
            prov.insert("eta", Provenance::Specified);
            e
        }
        None => {
            let rule = lyapunov::default_eta(a.d);
            if a.gamma - a.d > 0.0 && rule >= a.gamma - a.d {
                prov.insert("eta", Provenance::Fallback);
                0.5 * (a.gamma - a.d)
            } else {
                prov.insert("eta", Provenance::Default);
                rule
            }
        }
    };
    let epsilon = match a.epsilon {
        Some(e) => {
            prov.insert("epsilon", Provenance::Specified);
            e
        }
        None => {
            let (e, fallback) = lyapunov::default_epsilon(a.gamma, a.d, eta);
            let p = if fallback {
                Provenance::Fallback
            } else {
                Provenance::Default
            };
            prov.insert("epsilon", p);
            e
        }
    };
    let params = LyapunovParams::new(a.gamma, a.d, eta, epsilon)?;
    let map = lyapunov::grid_map(&params, a.x1_range, a.x2_range, a.resolution)?;

    let mut w = output::create(out)?;
    writeln!(w, "x1,x2,v_new")?;
    for (x1, x2, v) in map.rows() {
        writeln!(w, "{},{},{}", num(x1), num(x2), num(v))?;
    }
    w.flush()?;
    write_json(
        &sidecar_path(out),
        &json!({
            "params": params,
            "x1_range": a.x1_range,
            "x2_range": a.x2_range,
            "resolution": a.resolution,
            "epsilon_interval": lyapunov::epsilon_interval(a.gamma, a.d, eta)?,
            "provenance": prov,
        }),
    )
}

fn cmd_sweep(c: &Common) -> Result<()> {
    let mut spec = SweepFile::load(required(&c.config, "config")?)?;
    if let Some(s) = c.seed {
        spec.seed = s;
    }
    if let Some(dt) = c.dt {
        spec.base.dt = Some(dt);
    }
    let report = run_sweep(&spec, c.law)?;
    emit_json(c, &report)?;
    let a = &report.aggregate;
    eprintln!(
        "runs {} captured {} bracket_ok {} overshoot_free {}/{} v_monotone {} diverged {}",
        a.runs,
        a.captured,
        a.bracket_ok,
        a.overshoot_free,
        a.overshoot_checked,
        a.v_monotone,
        a.diverged
    );
    if a.diverged > 0 {
        return Err(Error::SweepDiverged { count: a.diverged });
    }
    Ok(())
}
