//! Command-line front end: run preset or config-file scenarios, batch
//! sweeps, and export trajectories, energy audits, and stability reports
//! as CSV/JSON plus static SVG plots.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};

use hystab::config::ScenarioConfig;
use hystab::energy::{verify_dissipation, write_ledger_csv};
use hystab::error::Error;
use hystab::lti::OmegaGrid;
use hystab::scenarios::{
    build_double_integrator, build_oscillator, build_second_order, CouplingSign,
    DampingSign, OscillatorFeedback, PresetId, DEFAULT_STOP_SLOPE,
};
use hystab::simulate::{converged_to_set, run, FeedbackSpec, Scenario, TargetSet, Trajectory};
use hystab::stability::{equilibrium, transformed_loop_check};
use hystab::svg::Plot;

const EXIT_CONFIG: u8 = 2;
const EXIT_MODEL: u8 = 3;
const EXIT_USAGE: u8 = 4;

#[derive(Parser)]
#[command(name = "hystab", version, about = "LTI dynamics with hysteresis feedback: simulation, energy audits, and circle-criterion analysis")]
struct Cli {
    /// Output directory for all generated files.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Base RNG seed for randomized batches.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Override the scenario integration step.
    #[arg(long, global = true)]
    dt: Option<f64>,
    /// Override the scenario end time.
    #[arg(long, global = true)]
    t_end: Option<f64>,
    /// Trajectory export format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Cmd {
    /// Integrate the closed loop and export trajectory + diagnostics.
    Simulate {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Run a batch of randomized initial states instead of a single run.
        #[arg(long)]
        seeds: Option<usize>,
        /// Skip SVG plot generation.
        #[arg(long)]
        no_svg: bool,
    },
    /// Pole/equilibrium/circle-criterion report for the scenario's system.
    Analyze {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Skip SVG plot generation.
        #[arg(long)]
        no_svg: bool,
    },
    /// Sweep one parameter; one CSV row per value.
    Sweep {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, value_enum)]
        param: SweepParam,
        #[arg(long)]
        from: f64,
        #[arg(long)]
        to: f64,
        /// Number of sweep points (>= 1).
        #[arg(long)]
        steps: usize,
    },
    /// Run the scenario and audit the hysteresis energy bookkeeping.
    EnergyAudit {
        #[command(flatten)]
        scenario: ScenarioArgs,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SweepParam {
    K,
    H,
    Gamma,
}

#[derive(Args, Clone)]
struct ScenarioArgs {
    /// Scenario JSON file (mutually exclusive with --preset).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in preset: double_integrator | second_order | oscillator.
    #[arg(long)]
    preset: Option<String>,
    /// Oscillator feedback gain.
    #[arg(long = "K")]
    k: Option<f64>,
    /// Feedback kind override: none | sign | stop | static.
    #[arg(long)]
    feedback: Option<String>,
    /// Linear slope of the sign-hysteresis / static map.
    #[arg(long)]
    gamma: Option<f64>,
    /// Hysteresis half-height / stop saturation level.
    #[arg(long)]
    h: Option<f64>,
    /// Stop-element reversal slope.
    #[arg(long)]
    c: Option<f64>,
    /// Initial hysteresis output.
    #[arg(long)]
    xi0: Option<f64>,
    /// Oscillator damping entry sign: as_printed | dissipative.
    #[arg(long)]
    damping_sign: Option<String>,
    /// Oscillator hysteresis channel sign: as_printed | stabilizing.
    #[arg(long)]
    coupling: Option<String>,
    /// Initial state as a comma-separated list.
    #[arg(long)]
    x0: Option<String>,
}

#[derive(Serialize)]
struct RunManifest {
    /// SHA-256 of the canonical scenario JSON.
    scenario_sha256: String,
    seed: u64,
    solver: String,
    dt: f64,
    t_end: f64,
    version: String,
    outputs: Vec<String>,
    wall_ms: u128,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Json(_) | Error::Io(_) | Error::Scenario(_) => EXIT_CONFIG,
        _ => EXIT_MODEL,
    }
}

fn dispatch(cli: &Cli) -> Result<(), Error> {
    fs::create_dir_all(&cli.out)?;
    match &cli.cmd {
        Cmd::Simulate { scenario, seeds, no_svg } => {
            let sc = build_scenario(cli, scenario)?;
            match seeds {
                None => cmd_simulate(cli, &sc, !no_svg),
                Some(n) => cmd_simulate_batch(cli, &sc, *n),
            }
        }
        Cmd::Analyze { scenario, no_svg } => {
            let sc = build_scenario(cli, scenario)?;
            cmd_analyze(cli, &sc, !no_svg)
        }
        Cmd::Sweep { scenario, param, from, to, steps } => {
            let sc = build_scenario(cli, scenario)?;
            cmd_sweep(cli, scenario, &sc, *param, *from, *to, *steps)
        }
        Cmd::EnergyAudit { scenario } => {
            let sc = build_scenario(cli, scenario)?;
            cmd_energy_audit(cli, &sc)
        }
    }
}

fn build_scenario(cli: &Cli, args: &ScenarioArgs) -> Result<Scenario, Error> {
    let mut sc = match (&args.config, &args.preset) {
        (Some(path), None) => {
            let text = fs::read_to_string(path)?;
            if text.trim().is_empty() {
                return Err(Error::Config(format!("empty config file {}", path.display())));
            }
            ScenarioConfig::from_json(&text)?.to_scenario()?
        }
        (None, Some(name)) => build_from_preset(name.parse()?, args)?,
        (Some(_), Some(_)) => {
            return Err(Error::Config("--config and --preset are mutually exclusive".into()))
        }
        (None, None) => return Err(Error::Config("one of --config or --preset is required".into())),
    };
    if let Some(dt) = cli.dt {
        sc.dt = dt;
    }
    if let Some(t_end) = cli.t_end {
        sc.t_end = t_end;
    }
    if let Some(list) = &args.x0 {
        let x0: Result<Vec<f64>, _> = list.split(',').map(|s| s.trim().parse::<f64>()).collect();
        let x0 = x0.map_err(|e| Error::Config(format!("bad --x0: {e}")))?;
        sc.set_x0_consistent(DVector::from_vec(x0));
    }
    if let Some(xi0) = args.xi0 {
        set_xi0(&mut sc.feedback, xi0);
    }
    sc.validate()?;
    Ok(sc)
}

fn set_xi0(fb: &mut FeedbackSpec, value: f64) {
    match fb {
        FeedbackSpec::None => {}
        FeedbackSpec::Sign { xi0, .. }
        | FeedbackSpec::Stop { xi0, .. }
        | FeedbackSpec::Static { xi0, .. } => *xi0 = value,
    }
}

fn build_from_preset(id: PresetId, args: &ScenarioArgs) -> Result<Scenario, Error> {
    let mut sc = match id {
        PresetId::DoubleIntegrator => {
            build_double_integrator(args.gamma.unwrap_or(1.0), args.h.unwrap_or(1.0))
        }
        PresetId::SecondOrder => {
            build_second_order(args.gamma.unwrap_or(1.0), args.h.unwrap_or(1.0))
        }
        PresetId::Oscillator => {
            let feedback = match args.feedback.as_deref() {
                None | Some("sign") => OscillatorFeedback::Sign { h: args.h.unwrap_or(50.0) },
                Some("none") => OscillatorFeedback::None,
                Some("stop") => OscillatorFeedback::Stop {
                    c: args.c.unwrap_or(DEFAULT_STOP_SLOPE),
                    h: args.h.unwrap_or(50.0),
                },
                Some(other) => {
                    return Err(Error::Config(format!(
                        "unsupported oscillator feedback '{other}'"
                    )))
                }
            };
            let damping = match args.damping_sign.as_deref() {
                None | Some("dissipative") => DampingSign::Dissipative,
                Some("as_printed") => DampingSign::AsPrinted,
                Some(other) => return Err(Error::Config(format!("unknown damping sign '{other}'"))),
            };
            let coupling = match args.coupling.as_deref() {
                None | Some("stabilizing") => CouplingSign::Stabilizing,
                Some("as_printed") => CouplingSign::AsPrinted,
                Some(other) => return Err(Error::Config(format!("unknown coupling sign '{other}'"))),
            };
            build_oscillator(args.k.unwrap_or(101.0), feedback, damping, coupling)
        }
    };
    // feedback kind overrides for the two-state presets
    if id != PresetId::Oscillator {
        match args.feedback.as_deref() {
            None | Some("sign") => {}
            Some("none") => sc.feedback = FeedbackSpec::None,
            Some("static") => {
                sc.feedback = FeedbackSpec::Static { gamma: args.gamma.unwrap_or(1.0), xi0: 0.0 }
            }
            Some("stop") => {
                sc.feedback = FeedbackSpec::Stop {
                    c: args.c.unwrap_or(DEFAULT_STOP_SLOPE),
                    h: args.h.unwrap_or(1.0),
                    xi0: 0.0,
                }
            }
            Some(other) => {
                return Err(Error::Config(format!("unknown feedback kind '{other}'")))
            }
        }
        let x0 = sc.x0.clone();
        sc.set_x0_consistent(x0);
    }
    Ok(sc)
}

fn scenario_hash(sc: &Scenario) -> String {
    let canonical = ScenarioConfig::from_scenario(sc).to_json_pretty();
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

fn write_manifest(
    cli: &Cli,
    sc: &Scenario,
    outputs: &[PathBuf],
    started: Instant,
) -> Result<(), Error> {
    let manifest = RunManifest {
        scenario_sha256: scenario_hash(sc),
        seed: cli.seed,
        solver: format!("{:?}", sc.solver),
        dt: sc.dt,
        t_end: sc.t_end,
        version: env!("CARGO_PKG_VERSION").into(),
        outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
        wall_ms: started.elapsed().as_millis(),
    };
    let path = cli.out.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&manifest).expect("serializable"))?;
    Ok(())
}

fn write_trajectory(cli: &Cli, name: &str, traj: &Trajectory) -> Result<PathBuf, Error> {
    match cli.format {
        Format::Csv => {
            let path = cli.out.join(format!("{name}.csv"));
            let mut file = std::io::BufWriter::new(fs::File::create(&path)?);
            traj.write_csv(&mut file)?;
            Ok(path)
        }
        Format::Json => {
            #[derive(Serialize)]
            struct TrajJson<'a> {
                t: &'a [f64],
                x: Vec<&'a [f64]>,
                y: &'a [f64],
                xi: &'a [f64],
                u: &'a [f64],
            }
            let doc = TrajJson {
                t: &traj.t,
                x: traj.x.iter().map(|v| v.as_slice()).collect(),
                y: &traj.y,
                xi: &traj.xi,
                u: &traj.u,
            };
            let path = cli.out.join(format!("{name}.json"));
            fs::write(&path, serde_json::to_string(&doc).expect("serializable"))?;
            Ok(path)
        }
    }
}

fn phase_portrait(traj: &Trajectory) -> Plot {
    let pts: Vec<(f64, f64)> = traj
        .x
        .iter()
        .map(|x| (x[0], if x.len() > 1 { x[1] } else { 0.0 }))
        .collect();
    Plot::new("Phase portrait", "x1", "x2").line("trajectory", pts)
}

fn hysteresis_loop(traj: &Trajectory) -> Plot {
    let pts: Vec<(f64, f64)> = traj.y.iter().copied().zip(traj.xi.iter().copied()).collect();
    Plot::new("Hysteresis loop", "y", "xi").line("operator path", pts)
}

fn cmd_simulate(cli: &Cli, sc: &Scenario, svg: bool) -> Result<(), Error> {
    let started = Instant::now();
    let (traj, diag) = run(sc)?;
    let mut outputs = vec![write_trajectory(cli, "trajectory", &traj)?];

    let diag_path = cli.out.join("diagnostics.json");
    fs::write(&diag_path, serde_json::to_string_pretty(&diag).expect("serializable"))?;
    outputs.push(diag_path);

    if svg {
        let phase = cli.out.join("phase.svg");
        fs::write(&phase, phase_portrait(&traj).render())?;
        outputs.push(phase);
        if sc.feedback != FeedbackSpec::None {
            let hyst = cli.out.join("loop.svg");
            fs::write(&hyst, hysteresis_loop(&traj).render())?;
            outputs.push(hyst);
        }
    }
    write_manifest(cli, sc, &outputs, started)?;
    println!(
        "bounded={} limit_cycle={} growth_rate={:.6e}",
        diag.bounded,
        diag.limit_cycle
            .as_ref()
            .map(|c| format!("period={:.6},amplitude={:.6}", c.period, c.amplitude))
            .unwrap_or_else(|| "none".into()),
        diag.growth_rate
    );
    Ok(())
}

#[derive(Serialize)]
struct BatchSummary {
    runs: usize,
    bounded: usize,
    in_set: usize,
    set_membership_rate: f64,
    target: Option<TargetSet>,
}

fn cmd_simulate_batch(cli: &Cli, base: &Scenario, n: usize) -> Result<(), Error> {
    let started = Instant::now();
    let target = equilibrium(&base.sys, &base.feedback)
        .ok()
        .and_then(|rep| rep.invariant_interval)
        .map(|(lo, hi)| TargetSet { x1_lo: lo, x1_hi: hi });

    let dim = base.x0.len();
    let results: Vec<(usize, Trajectory, bool)> = std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for i in 0..n {
            let base = base.clone();
            let seed = cli.seed.wrapping_add(i as u64);
            handles.push(scope.spawn(move || {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut sc = base;
                sc.set_x0_consistent(DVector::from_fn(dim, |_, _| rng.gen_range(-3.0..3.0)));
                let (traj, diag) = run(&sc)?;
                Ok::<_, Error>((i, traj, diag.bounded))
            }));
        }
        handles
            .into_iter()
            .map(|h| h.join().expect("worker panicked"))
            .collect::<Result<Vec<_>, _>>()
    })?;

    let mut outputs = Vec::new();
    let mut bounded = 0;
    let mut in_set = 0;
    for (i, traj, is_bounded) in &results {
        outputs.push(write_trajectory(cli, &format!("trajectory_seed{i:03}"), traj)?);
        bounded += usize::from(*is_bounded);
        if let Some(t) = target {
            in_set += usize::from(converged_to_set(traj, t, 2e-2));
        }
    }
    let summary = BatchSummary {
        runs: n,
        bounded,
        in_set,
        set_membership_rate: if n > 0 { in_set as f64 / n as f64 } else { 0.0 },
        target,
    };
    let path = cli.out.join("summary.json");
    fs::write(&path, serde_json::to_string_pretty(&summary).expect("serializable"))?;
    outputs.push(path);
    write_manifest(cli, base, &outputs, started)?;
    println!(
        "runs={} bounded={} set_membership_rate={:.3}",
        n, bounded, summary.set_membership_rate
    );
    Ok(())
}

#[derive(Serialize)]
struct AnalysisReport {
    poles: Vec<(f64, f64)>,
    classification: String,
    max_real_part: f64,
    equilibrium: Option<hystab::stability::EquilibriumReport>,
    phi_g: Option<hystab::stability::CriterionVerdict>,
    phi_h: Option<hystab::stability::CriterionVerdict>,
    overall: Option<hystab::stability::OverallStatus>,
}

fn cmd_analyze(cli: &Cli, sc: &Scenario, svg: bool) -> Result<(), Error> {
    let started = Instant::now();
    let pole_report = sc.sys.poles()?;
    let grid = OmegaGrid::default();

    let (equilibrium_report, two_loop) = match &sc.feedback {
        FeedbackSpec::None => (None, None),
        fb => {
            let (gamma, h) = match *fb {
                FeedbackSpec::Sign { gamma, h, .. } => (gamma, h),
                FeedbackSpec::Stop { c, h, .. } => (c, h),
                FeedbackSpec::Static { gamma, .. } => (gamma, 0.0),
                FeedbackSpec::None => unreachable!(),
            };
            let eq = equilibrium(&sc.sys, fb)?;
            let loops = transformed_loop_check(&sc.sys, gamma, h, &grid)?;
            (Some(eq), Some(loops))
        }
    };

    let report = AnalysisReport {
        poles: pole_report.poles.iter().map(|p| (p.re, p.im)).collect(),
        classification: format!("{:?}", pole_report.classification),
        max_real_part: pole_report.max_real_part(),
        equilibrium: equilibrium_report,
        phi_g: two_loop.as_ref().map(|t| t.phi_g.clone()),
        phi_h: two_loop.as_ref().and_then(|t| t.phi_h.clone()),
        overall: two_loop.as_ref().map(|t| t.overall),
    };
    let mut outputs = Vec::new();
    let path = cli.out.join("analysis.json");
    fs::write(&path, serde_json::to_string_pretty(&report).expect("serializable"))?;
    outputs.push(path);

    if svg {
        let pole_plot = Plot::new("Pole map", "Re", "Im").markers(
            "poles",
            pole_report.poles.iter().map(|p| (p.re, p.im)).collect(),
        );
        let path = cli.out.join("poles.svg");
        fs::write(&path, pole_plot.render())?;
        outputs.push(path);

        if pole_report.unstable == 0 {
            let locus = sc
                .sys
                .frequency_response(&grid.log_spaced(), hystab::lti::LocusKind::Plain)?;
            let pts: Vec<(f64, f64)> = locus
                .samples
                .iter()
                .filter(|s| !s.near_pole)
                .map(|s| (s.value.re, s.value.im))
                .collect();
            let mirrored: Vec<(f64, f64)> = pts.iter().map(|&(re, im)| (re, -im)).collect();
            let nyquist = Plot::new("Nyquist locus", "Re G(jw)", "Im G(jw)")
                .line("w > 0", pts)
                .line("w < 0", mirrored)
                .markers("origin", vec![(0.0, 0.0)]);
            let path = cli.out.join("nyquist.svg");
            fs::write(&path, nyquist.render())?;
            outputs.push(path);
        }
    }
    write_manifest(cli, sc, &outputs, started)?;
    println!(
        "classification={} max_re={:.6e} overall={}",
        report.classification,
        report.max_real_part,
        report
            .overall
            .map(|o| format!("{o:?}"))
            .unwrap_or_else(|| "n/a".into())
    );
    Ok(())
}

fn cmd_sweep(
    cli: &Cli,
    args: &ScenarioArgs,
    base: &Scenario,
    param: SweepParam,
    from: f64,
    to: f64,
    steps: usize,
) -> Result<(), Error> {
    let started = Instant::now();
    if steps == 0 || !(from <= to) {
        eprintln!("error: empty sweep range");
        std::process::exit(EXIT_USAGE.into());
    }
    let values: Vec<f64> = (0..steps)
        .map(|i| {
            if steps == 1 {
                from
            } else {
                from + (to - from) * i as f64 / (steps - 1) as f64
            }
        })
        .collect();

    let rows: Vec<(f64, f64, bool, Option<f64>)> = std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for &v in &values {
            let args = args.clone();
            let base = base.clone();
            handles.push(scope.spawn(move || {
                let sc = sweep_scenario(&args, &base, param, v)?;
                let max_re = sc.sys.poles()?.max_real_part();
                let (_, diag) = run(&sc)?;
                Ok::<_, Error>((v, max_re, diag.bounded, diag.limit_cycle.map(|c| c.amplitude)))
            }));
        }
        handles
            .into_iter()
            .map(|h| h.join().expect("worker panicked"))
            .collect::<Result<Vec<_>, _>>()
    })?;

    let path = cli.out.join("sweep.csv");
    let mut text = String::from("value,max_real_part,bounded,amplitude\n");
    for (v, max_re, bounded, amplitude) in &rows {
        text.push_str(&format!(
            "{},{},{},{}\n",
            v,
            max_re,
            bounded,
            amplitude.map(|a| a.to_string()).unwrap_or_default()
        ));
    }
    fs::write(&path, text)?;
    write_manifest(cli, base, std::slice::from_ref(&path), started)?;
    println!("sweep rows={} -> {}", rows.len(), path.display());
    Ok(())
}

/// Rebuilds the scenario with one swept parameter replaced.
fn sweep_scenario(
    args: &ScenarioArgs,
    base: &Scenario,
    param: SweepParam,
    value: f64,
) -> Result<Scenario, Error> {
    match param {
        SweepParam::K => {
            let mut args = args.clone();
            args.k = Some(value);
            if args.preset.is_none() {
                return Err(Error::Config("--param k requires --preset oscillator".into()));
            }
            build_from_preset(args.preset.as_ref().unwrap().parse()?, &args)
        }
        SweepParam::H => {
            let mut sc = base.clone();
            match &mut sc.feedback {
                FeedbackSpec::Sign { h, .. } | FeedbackSpec::Stop { h, .. } => *h = value,
                _ => return Err(Error::Config("--param h requires sign or stop feedback".into())),
            }
            let x0 = sc.x0.clone();
            sc.set_x0_consistent(x0);
            Ok(sc)
        }
        SweepParam::Gamma => {
            let mut sc = base.clone();
            match &mut sc.feedback {
                FeedbackSpec::Sign { gamma, .. } | FeedbackSpec::Static { gamma, .. } => {
                    *gamma = value
                }
                _ => {
                    return Err(Error::Config(
                        "--param gamma requires sign or static feedback".into(),
                    ))
                }
            }
            let x0 = sc.x0.clone();
            sc.set_x0_consistent(x0);
            Ok(sc)
        }
    }
}

fn cmd_energy_audit(cli: &Cli, sc: &Scenario) -> Result<(), Error> {
    let started = Instant::now();
    let y0 = sc.sys.output(&sc.x0);
    let op_state = sc
        .feedback
        .make_operator(y0)?
        .ok_or_else(|| Error::Config("energy audit requires a feedback operator".into()))?;
    let op = op_state.operator().clone();
    let (traj, _) = run(sc)?;

    let report = verify_dissipation(&op, &traj.t, &traj.y, &traj.xi);
    let mut outputs = Vec::new();

    let path = cli.out.join("energy.csv");
    let mut file = std::io::BufWriter::new(fs::File::create(&path)?);
    write_ledger_csv(&mut file, &traj.t, &traj.y, &traj.xi, &traj.ledger)?;
    drop(file);
    outputs.push(path);

    let path = cli.out.join("audit.json");
    fs::write(&path, serde_json::to_string_pretty(&report).expect("serializable"))?;
    outputs.push(path);

    write_manifest(cli, sc, &outputs, started)?;
    println!(
        "dissipated={:.6e} max_violation={:.3e} dissipative={}",
        report.dissipated, report.max_violation, report.dissipative
    );
    Ok(())
}
