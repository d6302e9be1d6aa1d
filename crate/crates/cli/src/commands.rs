//! The four subcommands: `path`, `synth`, `simulate`, `compare`.

use std::path::{Path, PathBuf};

use log::info;
use nalgebra::Matrix3;
use wmr_core::it2::{interval_bounds, model_from_interval_bounds, IntervalBounds};
use wmr_core::lmi::{build_pdc_lmi, closed_loop_poles, solve_feasibility, verify_lyapunov};
use wmr_core::path::{arc_length, polygon_from_spec, reference_trajectory, velocity_extrema};
use wmr_core::sim::{compute_metrics, run_closed_loop, Controller, Metrics, SimTrace};
use wmr_core::ts::{build_rules, compute_bounds, linguistic_values, TsModel};
use wmr_core::{ReferenceTrajectory, WmrError};

use crate::artifacts::{
    metrics_csv, num, poles_csv, trace_csv, trajectory_csv, verification_report, write_atomic,
    SynthesisFile,
};
use crate::config::{ConfigError, ControllerKind, RunConfig};

/// Anything a subcommand can fail with; each variant maps to a documented
/// exit code in `main`.
#[derive(Debug)]
pub enum CliError {
    /// Configuration or synthesis-file problem (exit 2).
    Config(String),
    /// Error from the core toolkit; zoning/feasibility/divergence get
    /// dedicated codes.
    Core(WmrError),
    /// Filesystem problem (exit 1).
    Io(std::io::Error),
    /// `fuzzy.clamp = false` and a premise variable left its zoning
    /// interval during simulation (exit 1).
    ModelValidity(String),
    /// One or more comparison runs failed (exit 1).
    CompareFailed(usize),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
            CliError::ModelValidity(m) => write!(f, "model validity violated: {m}"),
            CliError::CompareFailed(n) => write!(f, "{n} comparison run(s) failed"),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.0)
    }
}

impl From<WmrError> for CliError {
    fn from(e: WmrError) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

/// Exit-code contract: 0 success, 2 configuration error, 3 degenerate
/// zoning, 4 infeasible LMI, 5 divergence, 6 uncertainty range too wide,
/// 1 anything else.
pub fn exit_code(e: &CliError) -> u8 {
    match e {
        CliError::Config(_) => 2,
        CliError::Core(WmrError::DegenerateZoning { .. }) => 3,
        CliError::Core(WmrError::Infeasible { .. }) => 4,
        CliError::Core(WmrError::Divergence { .. }) => 5,
        CliError::Core(WmrError::UncertaintyTooWide { .. }) => 6,
        _ => 1,
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn build_reference(config: &RunConfig) -> Result<ReferenceTrajectory> {
    let spec = config.path.spec()?;
    spec.validate().map_err(CliError::Core)?;
    let cp = polygon_from_spec(&spec)?;
    Ok(reference_trajectory(&cp, spec.total_time, config.path.samples)?)
}

// ---------------------------------------------------------------------------
// path

pub fn cmd_path(config: &RunConfig, out_dir: &Path) -> Result<()> {
    let spec = config.path.spec()?;
    spec.validate().map_err(CliError::Core)?;
    let cp = polygon_from_spec(&spec)?;
    let traj = reference_trajectory(&cp, spec.total_time, config.path.samples)?;

    let file = out_dir.join("trajectory.csv");
    write_atomic(&file, &trajectory_csv(&traj))?;

    let (v_min, v_max, w_min, w_max) = velocity_extrema(&traj);
    println!("trajectory written to {}", file.display());
    println!("arc length: {} m", num(arc_length(&cp)));
    println!("total time: {} s", num(spec.total_time));
    println!("v extrema: [{}, {}] m/s", num(v_min), num(v_max));
    println!("omega extrema: [{}, {}] rad/s", num(w_min), num(w_max));
    Ok(())
}

// ---------------------------------------------------------------------------
// synth

/// Model plus (for Type II) the envelope bounds used by the controller.
pub struct FuzzySetup {
    pub model: TsModel<f64>,
    pub interval: Option<IntervalBounds<f64>>,
}

pub fn build_fuzzy_setup(config: &RunConfig, kind: ControllerKind) -> Result<FuzzySetup> {
    let error_box = config.fuzzy.error_box()?;
    match kind {
        ControllerKind::Classic => Err(CliError::Config(
            "fuzzy model requested for the classic controller".into(),
        )),
        ControllerKind::Type1 => {
            let reference = build_reference(config)?;
            let bounds = compute_bounds(&reference, &error_box)?;
            Ok(FuzzySetup {
                model: build_rules(bounds, error_box)?,
                interval: None,
            })
        }
        ControllerKind::Type2 => {
            let spec = config.path.spec()?;
            let ib = interval_bounds(
                &config.type2.grid(),
                &spec,
                &error_box,
                config.path.samples,
            )?;
            Ok(FuzzySetup {
                model: model_from_interval_bounds(&ib, error_box)?,
                interval: Some(ib),
            })
        }
    }
}

fn synthesis_path(out_dir: &Path, kind: ControllerKind) -> PathBuf {
    out_dir.join(format!("synthesis_{}.json", kind.name()))
}

/// Run the full synthesis pipeline for `kind` and write all artifacts.
pub fn run_synthesis(
    config: &RunConfig,
    kind: ControllerKind,
    out_dir: &Path,
) -> Result<(FuzzySetup, SynthesisFile)> {
    let setup = build_fuzzy_setup(config, kind)?;
    let problem = build_pdc_lmi(&setup.model);
    let synth = solve_feasibility(&problem, &config.solver.settings())?;
    info!(
        "synthesis for {}: margin {}, {} constraints",
        kind.name(),
        num(synth.margin),
        problem.constraints.len()
    );

    let report = verify_lyapunov(&synth.p, &problem.rules, &synth.gains, 200);
    let poles = closed_loop_poles(&problem.rules, &synth.gains);

    let file = SynthesisFile::from_synthesis(kind.name(), &synth);
    let json = serde_json::to_string_pretty(&file)
        .map_err(|e| CliError::Config(e.to_string()))?;
    write_atomic(&synthesis_path(out_dir, kind), &json)?;
    write_atomic(
        &out_dir.join(format!("poles_{}.csv", kind.name())),
        &poles_csv(&poles),
    )?;
    write_atomic(
        &out_dir.join(format!("verification_{}.txt", kind.name())),
        &verification_report(&report, &poles),
    )?;
    Ok((setup, file))
}

pub fn cmd_synth(config: &RunConfig, out_dir: &Path) -> Result<()> {
    let kind = config.controller();
    if kind == ControllerKind::Classic {
        return Err(CliError::Config(
            "synth requires controller = \"type1\" or \"type2\"".into(),
        ));
    }
    let (_, file) = run_synthesis(config, kind, out_dir)?;
    println!(
        "synthesis feasible for {}: margin {}",
        kind.name(),
        num(file.margin)
    );
    println!(
        "artifacts written to {}",
        synthesis_path(out_dir, kind).display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// simulate

/// Load an existing synthesis file or synthesize now ("auto-invoked if
/// absent"). Returns the model setup plus gains and Lyapunov matrix.
fn obtain_synthesis(
    config: &RunConfig,
    kind: ControllerKind,
    out_dir: &Path,
) -> Result<(FuzzySetup, SynthesisFile)> {
    let path = synthesis_path(out_dir, kind);
    if path.exists() {
        let text = std::fs::read_to_string(&path)?;
        let file: SynthesisFile =
            serde_json::from_str(&text).map_err(|e| {
                CliError::Config(format!("unreadable synthesis file {}: {e}", path.display()))
            })?;
        if file.controller != kind.name() {
            return Err(CliError::Config(format!(
                "synthesis file {} is for controller {}, expected {}",
                path.display(),
                file.controller,
                kind.name()
            )));
        }
        info!("reusing synthesis file {}", path.display());
        let setup = build_fuzzy_setup(config, kind)?;
        Ok((setup, file))
    } else {
        run_synthesis(config, kind, out_dir)
    }
}

fn build_controller(
    config: &RunConfig,
    kind: ControllerKind,
    out_dir: &Path,
) -> Result<(Controller<f64>, Option<Matrix3<f64>>, Option<TsModel<f64>>)> {
    match kind {
        ControllerKind::Classic => Ok((
            Controller::Classic(config.classic.params()?),
            None,
            None,
        )),
        ControllerKind::Type1 => {
            let (setup, file) = obtain_synthesis(config, kind, out_dir)?;
            let gains = file.gain_matrices().map_err(CliError::Config)?;
            let p = file.p_matrix().map_err(CliError::Config)?;
            let model = setup.model.clone();
            Ok((
                Controller::Type1 {
                    model: setup.model,
                    gains,
                },
                Some(p),
                Some(model),
            ))
        }
        ControllerKind::Type2 => {
            let (setup, file) = obtain_synthesis(config, kind, out_dir)?;
            let gains = file.gain_matrices().map_err(CliError::Config)?;
            let p = file.p_matrix().map_err(CliError::Config)?;
            let bounds = setup.interval.expect("type2 setup carries the envelope");
            let model = setup.model;
            Ok((
                Controller::Type2 { bounds, gains },
                Some(p),
                Some(model),
            ))
        }
    }
}

/// With clamping disabled, any premise variable leaving its zoning interval
/// invalidates the run.
fn check_model_validity(trace: &SimTrace<f64>, model: &TsModel<f64>) -> Result<()> {
    const NAMES: [&str; 4] = ["z1", "z2", "z3", "z4"];
    const TOL: f64 = 1e-9;
    let vars = model.bounds.vars();
    for s in &trace.steps {
        let z = linguistic_values(&s.error, s.reference_cmd.v, s.reference_cmd.omega);
        for k in 0..4 {
            if z[k] < vars[k].lower - TOL || z[k] > vars[k].upper + TOL {
                return Err(CliError::ModelValidity(format!(
                    "{} = {} left [{}, {}] at t = {}",
                    NAMES[k],
                    num(z[k]),
                    num(vars[k].lower),
                    num(vars[k].upper),
                    num(s.t)
                )));
            }
        }
    }
    Ok(())
}

struct RunOutput {
    trace: SimTrace<f64>,
    metrics: Metrics<f64>,
}

fn run_one(config: &RunConfig, kind: ControllerKind, out_dir: &Path) -> Result<RunOutput> {
    let (controller, p, model) = build_controller(config, kind, out_dir)?;
    let sim = config.sim_config()?;
    let reference = build_reference(config)?;
    let trace = run_closed_loop(&sim, &controller, &reference, p.as_ref())?;

    // Artifacts are written even for diverged runs (partial trace).
    write_atomic(
        &out_dir.join(format!("trace_{}.csv", kind.name())),
        &trace_csv(&trace),
    )?;
    if trace.diverged {
        let step = trace.steps.len();
        let t = trace.steps.last().map(|s| s.t).unwrap_or(0.0);
        return Err(CliError::Core(WmrError::Divergence { step, t }));
    }
    if !config.fuzzy.clamp {
        if let Some(model) = &model {
            check_model_validity(&trace, model)?;
        }
    }
    let metrics = compute_metrics(&trace);
    write_atomic(
        &out_dir.join(format!("metrics_{}.csv", kind.name())),
        &metrics_csv(&[(kind.name().to_string(), metrics)]),
    )?;
    Ok(RunOutput { trace, metrics })
}

pub fn cmd_simulate(config: &RunConfig, out_dir: &Path) -> Result<()> {
    let kind = config.controller();
    let out = run_one(config, kind, out_dir)?;
    println!(
        "simulated {} for {} s ({} steps)",
        kind.name(),
        num(out.trace.steps.last().map(|s| s.t).unwrap_or(0.0)),
        out.trace.steps.len()
    );
    println!("ise total: {}", num(out.metrics.ise_total));
    match out.metrics.settling_time {
        Some(t) => println!("settling time: {} s", num(t)),
        None => println!("settling time: not reached"),
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// compare

pub fn cmd_compare(config: &RunConfig, out_dir: &Path) -> Result<()> {
    let kinds = [
        ControllerKind::Classic,
        ControllerKind::Type1,
        ControllerKind::Type2,
    ];
    let mut rows = String::from(
        "controller,status,ise_x,ise_y,ise_theta,ise_total,max_error,settling_time,max_cmd_rate\n",
    );
    let mut failures = 0usize;
    for kind in kinds {
        match run_one(config, kind, out_dir) {
            Ok(out) => {
                let m = out.metrics;
                rows.push_str(&format!(
                    "{},ok,{},{},{},{},{},{},{}\n",
                    kind.name(),
                    num(m.ise_x),
                    num(m.ise_y),
                    num(m.ise_theta),
                    num(m.ise_total),
                    num(m.max_error),
                    m.settling_time.map(num).unwrap_or_default(),
                    num(m.max_cmd_rate),
                ));
                println!(
                    "{}: ise {} settling {} cmd-rate {}",
                    kind.name(),
                    num(m.ise_total),
                    m.settling_time
                        .map(num)
                        .unwrap_or_else(|| "-".to_string()),
                    num(m.max_cmd_rate),
                );
            }
            Err(e) => {
                failures += 1;
                let msg = e.to_string().replace([',', '\n'], ";");
                rows.push_str(&format!("{},{},,,,,,,\n", kind.name(), msg));
                eprintln!("{}: {e}", kind.name());
            }
        }
    }
    write_atomic(&out_dir.join("comparison.csv"), &rows)?;
    println!(
        "comparison written to {}",
        out_dir.join("comparison.csv").display()
    );
    if failures > 0 {
        return Err(CliError::CompareFailed(failures));
    }
    Ok(())
}
