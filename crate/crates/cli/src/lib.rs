//! Command implementations behind the `uaris` binary.
//!
//! Every command returns a [`RunReport`] that `main` prints as JSON. Files are
//! written atomically (temporary file in the target directory, then rename).

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use uaris::beampattern::{self, BeamPattern, FarField};
use uaris::codesynth::{self, SteeringTask, SuppressionTask};
use uaris::linksim::{self, Scenario};
use uaris::{Complex64, Direction, PhaseCode};

/// Bundled scenario presets.
pub const TANK_PRESET: &str = include_str!("../presets/tank.json");
pub const LAKE_PRESET: &str = include_str!("../presets/lake.json");

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Contract(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Contract(_) => 3,
        }
    }
}

impl From<uaris::Error> for CliError {
    fn from(e: uaris::Error) -> Self {
        match e {
            uaris::Error::DimensionMismatch { .. } => CliError::Contract(e.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "uaris", version, about = "1-bit acoustic reflecting surface simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sweep the reflected beam pattern of a code to CSV, plus a lobe report.
    Pattern(PatternArgs),
    /// Synthesize a quantized steering code.
    Steer(SteerArgs),
    /// Exhaustively search the best steering code (at most 20 units).
    Bruteforce(SteerArgs),
    /// Steer toward a target while suppressing an eavesdropper.
    Suppress(SuppressArgs),
    /// Simulate the receiver envelope while toggling between two codes.
    Simulate(SimulateArgs),
    /// Fit the scatter scale to a measured pair of amplitudes.
    Calibrate(CalibrateArgs),
    /// Rebuild a lobe report from a pattern CSV.
    Lobes(LobesArgs),
    /// Write one of the bundled scenario presets.
    Preset(PresetArgs),
}

/// How polar angles on the command line are measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AngleConvention {
    /// Off the array normal (0 = boresight).
    #[default]
    OffNormal,
    /// From the array plane (90 = boresight).
    FromPlane,
}

impl AngleConvention {
    pub fn direction(self, theta: f64, phi: f64) -> CliResult<Direction> {
        let d = match self {
            AngleConvention::OffNormal => Direction::new(theta, phi),
            AngleConvention::FromPlane => Direction::from_plane(theta, phi),
        };
        d.map_err(|e| CliError::Input(format!("invalid angle ({theta}, {phi}): {e}")))
    }
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Scenario JSON file.
    #[arg(long)]
    pub scenario: PathBuf,
    /// Output file.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = AngleConvention::OffNormal)]
    pub angles: AngleConvention,
}

#[derive(Debug, Clone, Args)]
pub struct IncidentArgs {
    /// Incident polar angle; defaults to the specular image of the
    /// scenario's transmitter bearing.
    #[arg(long, requires = "incident_phi")]
    pub incident_theta: Option<f64>,
    #[arg(long, requires = "incident_theta")]
    pub incident_phi: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct PatternArgs {
    #[command(flatten)]
    pub common: Common,
    /// Phase code JSON file.
    #[arg(long)]
    pub code: PathBuf,
    #[command(flatten)]
    pub incident: IncidentArgs,
    #[arg(long, default_value_t = 1.0)]
    pub theta_step: f64,
    #[arg(long, default_value_t = 1.0)]
    pub phi_step: f64,
    /// Evaluate grid points on all cores (output is identical).
    #[arg(long)]
    pub parallel: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SteerArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub target_theta: f64,
    #[arg(long)]
    pub target_phi: f64,
    #[command(flatten)]
    pub incident: IncidentArgs,
    #[arg(long, default_value_t = codesynth::DEFAULT_OFFSET_STEPS)]
    pub offset_steps: usize,
}

#[derive(Debug, Clone, Args)]
pub struct SuppressArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub target_theta: f64,
    #[arg(long)]
    pub target_phi: f64,
    #[arg(long)]
    pub eve_theta: f64,
    #[arg(long)]
    pub eve_phi: f64,
    /// Weight on the eavesdropper power.
    #[arg(long)]
    pub mu: f64,
    #[arg(long, default_value_t = codesynth::DEFAULT_MAX_PASSES)]
    pub max_passes: usize,
    #[command(flatten)]
    pub incident: IncidentArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Code active from t = 0.
    #[arg(long)]
    pub code_a: PathBuf,
    /// Alternate code; defaults to the complement of `code_a`.
    #[arg(long)]
    pub code_b: Option<PathBuf>,
    #[arg(long, default_value_t = 20.0)]
    pub toggle_ms: f64,
    #[arg(long, default_value_t = 0.2)]
    pub duration_s: f64,
    #[arg(long, default_value_t = 10_000.0)]
    pub sample_rate: f64,
}

#[derive(Debug, Clone, Args)]
pub struct CalibrateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Larger measured amplitude (reflection adds to the direct wave).
    #[arg(long)]
    pub a_plus: f64,
    /// Smaller measured amplitude (complemented code).
    #[arg(long)]
    pub a_minus: f64,
    /// Code that produced `a_plus`; all zeros when omitted.
    #[arg(long)]
    pub code: Option<PathBuf>,
    /// Use the model's actual reflected/direct phase instead of assuming
    /// the two are aligned.
    #[arg(long)]
    pub general_phase: bool,
}

#[derive(Debug, Clone, Args)]
pub struct LobesArgs {
    /// Pattern CSV written by `pattern`.
    #[arg(long)]
    pub pattern: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PresetName {
    /// 12 units, 27.13 kHz, toggled every 60 ms.
    Tank,
    /// 6x4 units, 27.76 kHz, tx 0.8 m in front, rx 21 m away, toggled every 20 ms.
    Lake,
}

#[derive(Debug, Clone, Args)]
pub struct PresetArgs {
    #[arg(value_enum)]
    pub name: PresetName,
    #[arg(long)]
    pub out: PathBuf,
}

/// Machine-readable summary of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    pub inputs: BTreeMap<String, serde_json::Value>,
    pub outputs: Vec<String>,
    pub metrics: BTreeMap<String, f64>,
}

impl RunReport {
    fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
            metrics: BTreeMap::new(),
        }
    }

    fn input(&mut self, key: &str, value: impl Serialize) -> &mut Self {
        let v = serde_json::to_value(value).expect("inputs serialize");
        self.inputs.insert(key.to_string(), v);
        self
    }

    fn metric(&mut self, key: &str, value: f64) -> &mut Self {
        self.metrics.insert(key.to_string(), value);
        self
    }

    fn output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    pub fn metric_value(&self, key: &str) -> Option<f64> {
        self.metrics.get(key).copied()
    }
}

/// Synthesis report written next to generated codes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisReport {
    pub gain_linear: f64,
    pub gain_db: f64,
    pub offset_used_rad: f64,
    pub passes: usize,
}

impl SynthesisReport {
    fn new(gain: f64, offset: f64, passes: usize) -> Self {
        Self {
            gain_linear: gain,
            gain_db: 20.0 * gain.log10(),
            offset_used_rad: offset,
            passes,
        }
    }
}

pub fn run(cli: Cli) -> CliResult<RunReport> {
    match cli.command {
        Command::Pattern(a) => cmd_pattern(&a),
        Command::Steer(a) => cmd_steer(&a),
        Command::Bruteforce(a) => cmd_bruteforce(&a),
        Command::Suppress(a) => cmd_suppress(&a),
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Calibrate(a) => cmd_calibrate(&a),
        Command::Lobes(a) => cmd_lobes(&a),
        Command::Preset(a) => cmd_preset(&a),
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> CliResult<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {what} {}: {e}", path.display())))?;
    parse_json(&text, path, what)
}

fn parse_json<T: serde::de::DeserializeOwned>(text: &str, path: &Path, what: &str) -> CliResult<T> {
    serde_json::from_str(text).map_err(|e| {
        CliError::Input(format!(
            "{}:{}:{}: invalid {what}: {e}",
            path.display(),
            e.line(),
            e.column()
        ))
    })
}

pub fn load_scenario(path: &Path) -> CliResult<Scenario> {
    let sc: Scenario = read_json(path, "scenario")?;
    sc.validate()
        .map_err(|e| CliError::Input(format!("{}: invalid scenario: {e}", path.display())))?;
    Ok(sc)
}

pub fn load_code(path: &Path) -> CliResult<PhaseCode> {
    read_json(path, "phase code")
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let io_err = |e: std::io::Error| CliError::Input(format!("cannot write {}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(io_err)?;
    tmp.write_all(bytes).map_err(io_err)?;
    tmp.as_file().sync_all().map_err(io_err)?;
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}

fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).expect("values serialize");
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// `<out without extension>.<suffix>` next to `out`.
fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.{suffix}"))
}

fn incident_direction(
    args: &IncidentArgs,
    angles: AngleConvention,
    scenario: &Scenario,
) -> CliResult<Direction> {
    match (args.incident_theta, args.incident_phi) {
        (Some(t), Some(p)) => angles.direction(t, p),
        _ => Direction::from_vector(scenario.tx)
            .map(Direction::as_incident)
            .ok_or_else(|| CliError::Input("transmitter bearing is undefined".into())),
    }
}

fn record_direction(report: &mut RunReport, key: &str, d: Direction) {
    report.input(key, [d.theta(), d.phi()]);
}

pub fn cmd_pattern(args: &PatternArgs) -> CliResult<RunReport> {
    let sc = load_scenario(&args.common.scenario)?;
    let code = load_code(&args.code)?;
    let incident = incident_direction(&args.incident, args.common.angles, &sc)?;
    let field = FarField::new(&sc.geometry, incident, sc.frequency, sc.medium.sound_speed)?;
    let pattern = if args.parallel {
        beampattern::sweep_parallel(&field, &code, args.theta_step, args.phi_step)?
    } else {
        beampattern::sweep(&field, &code, args.theta_step, args.phi_step)?
    };
    let lobes = beampattern::find_lobes(&pattern)?;

    let mut csv = Vec::new();
    pattern
        .write_csv(&mut csv)
        .map_err(|e| CliError::Input(e.to_string()))?;
    write_atomic(&args.common.out, &csv)?;
    let lobe_path = sibling(&args.common.out, "lobes.json");
    write_json(&lobe_path, &lobes)?;

    let mut report = RunReport::new("pattern");
    report
        .input("scenario", &args.common.scenario)
        .input("code", &args.code)
        .input("theta_step_deg", args.theta_step)
        .input("phi_step_deg", args.phi_step)
        .input("parallel", args.parallel);
    record_direction(&mut report, "incident_deg", incident);
    report.output(&args.common.out);
    report.output(&lobe_path);
    let main = lobes.main_lobes[0];
    report
        .metric("grid_points", pattern.len() as f64)
        .metric("peak_af", pattern.peak)
        .metric("main_lobe_count", lobes.main_lobes.len() as f64)
        .metric("main_lobe_theta_deg", main.direction.theta())
        .metric("main_lobe_phi_deg", main.direction.phi())
        .metric("grating_lobe_flag", if lobes.grating_lobe_flag { 1.0 } else { 0.0 });
    if let Some(sll) = lobes.peak_sidelobe_db {
        report.metric("peak_sidelobe_db", sll);
    }
    Ok(report)
}

fn synthesis_outputs(
    report: &mut RunReport,
    out: &Path,
    code: &PhaseCode,
    synth: &SynthesisReport,
) -> CliResult<()> {
    write_json(out, code)?;
    let rep_path = sibling(out, "report.json");
    write_json(&rep_path, synth)?;
    report.output(out);
    report.output(&rep_path);
    report
        .metric("gain_linear", synth.gain_linear)
        .metric("gain_db", synth.gain_db)
        .metric("offset_used_rad", synth.offset_used_rad)
        .metric("passes", synth.passes as f64);
    Ok(())
}

pub fn cmd_steer(args: &SteerArgs) -> CliResult<RunReport> {
    let sc = load_scenario(&args.common.scenario)?;
    let target = args.common.angles.direction(args.target_theta, args.target_phi)?;
    let incident = incident_direction(&args.incident, args.common.angles, &sc)?;
    let task = SteeringTask {
        offset_steps: args.offset_steps,
        ..SteeringTask::new(incident, target, sc.frequency)
    };
    let steered = codesynth::steer_code(&sc.geometry, &task, sc.medium.sound_speed)?;
    let mut report = RunReport::new("steer");
    report
        .input("scenario", &args.common.scenario)
        .input("offset_steps", args.offset_steps);
    record_direction(&mut report, "target_deg", target);
    record_direction(&mut report, "incident_deg", incident);
    let synth = SynthesisReport::new(steered.gain, steered.offset_rad, 0);
    synthesis_outputs(&mut report, &args.common.out, &steered.code, &synth)?;
    Ok(report)
}

pub fn cmd_bruteforce(args: &SteerArgs) -> CliResult<RunReport> {
    let sc = load_scenario(&args.common.scenario)?;
    let target = args.common.angles.direction(args.target_theta, args.target_phi)?;
    let incident = incident_direction(&args.incident, args.common.angles, &sc)?;
    let (code, gain) = codesynth::brute_force_code(
        &sc.geometry,
        incident,
        target,
        sc.frequency,
        sc.medium.sound_speed,
    )?;
    let task = SteeringTask {
        offset_steps: args.offset_steps,
        ..SteeringTask::new(incident, target, sc.frequency)
    };
    let steered = codesynth::steer_code(&sc.geometry, &task, sc.medium.sound_speed)?;
    let mut report = RunReport::new("bruteforce");
    report.input("scenario", &args.common.scenario);
    record_direction(&mut report, "target_deg", target);
    record_direction(&mut report, "incident_deg", incident);
    let synth = SynthesisReport::new(gain, 0.0, 0);
    synthesis_outputs(&mut report, &args.common.out, &code, &synth)?;
    report
        .metric("steer_gain_linear", steered.gain)
        .metric("steer_power_ratio", if gain > 0.0 { (steered.gain / gain).powi(2) } else { 1.0 });
    Ok(report)
}

pub fn cmd_suppress(args: &SuppressArgs) -> CliResult<RunReport> {
    let sc = load_scenario(&args.common.scenario)?;
    let target = args.common.angles.direction(args.target_theta, args.target_phi)?;
    let eve = args.common.angles.direction(args.eve_theta, args.eve_phi)?;
    let incident = incident_direction(&args.incident, args.common.angles, &sc)?;
    let task = SuppressionTask {
        max_passes: args.max_passes,
        ..SuppressionTask::new(incident, target, eve, sc.frequency, args.mu)
    };
    let out = codesynth::suppress_code(&sc.geometry, &task, sc.medium.sound_speed)?;
    let mut report = RunReport::new("suppress");
    report
        .input("scenario", &args.common.scenario)
        .input("mu", args.mu)
        .input("max_passes", args.max_passes);
    record_direction(&mut report, "target_deg", target);
    record_direction(&mut report, "eavesdropper_deg", eve);
    record_direction(&mut report, "incident_deg", incident);
    let synth = SynthesisReport::new(out.target_gain, out.start.offset_rad, out.passes);
    synthesis_outputs(&mut report, &args.common.out, &out.code, &synth)?;
    let start_eve = FarField::new(&sc.geometry, incident, sc.frequency, sc.medium.sound_speed)?
        .evaluate(&out.start.code, eve)?
        .norm();
    report
        .metric("objective", out.objective)
        .metric("target_gain", out.target_gain)
        .metric("eavesdropper_gain", out.eavesdropper_gain)
        .metric("steer_target_gain", out.start.gain)
        .metric("steer_eavesdropper_gain", start_eve);
    Ok(report)
}

pub fn cmd_simulate(args: &SimulateArgs) -> CliResult<RunReport> {
    let sc = load_scenario(&args.common.scenario)?;
    let code_a = load_code(&args.code_a)?;
    let code_b = match &args.code_b {
        Some(p) => load_code(p)?,
        None => code_a.complement(),
    };
    let env = linksim::toggle_envelope(
        &sc,
        &code_a,
        &code_b,
        args.toggle_ms / 1000.0,
        args.duration_s,
        args.sample_rate,
    )?;
    let mut csv = Vec::new();
    env.write_csv(&mut csv)
        .map_err(|e| CliError::Input(e.to_string()))?;
    write_atomic(&args.common.out, &csv)?;

    let direct = sc.direct()?.norm();
    let mut report = RunReport::new("simulate");
    report
        .input("scenario", &args.common.scenario)
        .input("code_a", &args.code_a)
        .input("code_b", &args.code_b)
        .input("toggle_ms", args.toggle_ms)
        .input("duration_s", args.duration_s)
        .input("sample_rate_hz", args.sample_rate);
    report.output(&args.common.out);
    report
        .metric("level_a", env.level_a)
        .metric("level_b", env.level_b)
        .metric("direct_level", direct)
        .metric("amplitude_difference", env.amplitude_difference())
        .metric("ratio_min_max", env.ratio())
        .metric("snr_gain_db_a", 20.0 * (env.level_a / direct).log10())
        .metric("snr_gain_db_b", 20.0 * (env.level_b / direct).log10())
        .metric("samples", env.values.len() as f64);
    if let Some(snr) = sc.snr_db(&code_a)? {
        report.metric("snr_db_a", snr);
    }
    Ok(report)
}

pub fn cmd_calibrate(args: &CalibrateArgs) -> CliResult<RunReport> {
    let sc = load_scenario(&args.common.scenario)?;
    if args.a_plus < args.a_minus {
        return Err(CliError::Input(format!(
            "a_plus ({}) must be at least a_minus ({})",
            args.a_plus, args.a_minus
        )));
    }
    let code = match &args.code {
        Some(p) => load_code(p)?,
        None => PhaseCode::zeros(sc.geometry.rows, sc.geometry.cols),
    };
    let s = sc.calibrate_scatter(&code, args.a_plus, args.a_minus, !args.general_phase)?;
    let fitted = sc.with_scatter_scale(s);
    write_json(&args.common.out, &fitted)?;
    let f = fitted.received_field(&code)?;
    let plus = (f.direct + f.reflected).norm();
    let minus = (f.direct - f.reflected).norm();
    let mut report = RunReport::new("calibrate");
    report
        .input("scenario", &args.common.scenario)
        .input("a_plus", args.a_plus)
        .input("a_minus", args.a_minus)
        .input("code", &args.code)
        .input("assume_in_phase", !args.general_phase);
    report.output(&args.common.out);
    report
        .metric("scatter_scale", s)
        .metric("reflected_to_direct", f.reflected.norm() / f.direct.norm())
        .metric("model_ratio_min_max", plus.min(minus) / plus.max(minus));
    Ok(report)
}

/// Parses a pattern CSV back into a grid.
pub fn read_pattern_csv(text: &str) -> CliResult<BeamPattern> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    if header.trim() != "theta_deg,phi_deg,af_real,af_imag,af_db_norm" {
        return Err(CliError::Input(format!("unexpected pattern header {header:?}")));
    }
    let mut thetas: Vec<f64> = Vec::new();
    let mut phis: Vec<f64> = Vec::new();
    let mut values = Vec::new();
    for (n, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        let num = |i: usize| -> CliResult<f64> {
            fields
                .get(i)
                .and_then(|f| f.trim().parse().ok())
                .ok_or_else(|| CliError::Input(format!("line {}: bad field {}", n + 2, i + 1)))
        };
        let (t, p) = (num(0)?, num(1)?);
        if thetas.last() != Some(&t) {
            thetas.push(t);
        }
        if thetas.len() == 1 {
            phis.push(p);
        }
        values.push(Complex64::new(num(2)?, num(3)?));
    }
    if values.is_empty() || values.len() != thetas.len() * phis.len() {
        return Err(CliError::Input("pattern CSV is not a complete theta-major grid".into()));
    }
    let peak = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    Ok(BeamPattern {
        thetas,
        phis,
        values,
        peak,
    })
}

pub fn cmd_lobes(args: &LobesArgs) -> CliResult<RunReport> {
    let text = fs::read_to_string(&args.pattern)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", args.pattern.display())))?;
    let pattern = read_pattern_csv(&text)?;
    let lobes = beampattern::find_lobes(&pattern)?;
    write_json(&args.out, &lobes)?;
    let mut report = RunReport::new("lobes");
    report.input("pattern", &args.pattern);
    report.output(&args.out);
    report
        .metric("main_lobe_count", lobes.main_lobes.len() as f64)
        .metric("grating_lobe_flag", if lobes.grating_lobe_flag { 1.0 } else { 0.0 });
    if let Some(sll) = lobes.peak_sidelobe_db {
        report.metric("peak_sidelobe_db", sll);
    }
    Ok(report)
}

pub fn cmd_preset(args: &PresetArgs) -> CliResult<RunReport> {
    let (text, name, toggle_ms) = match args.name {
        PresetName::Tank => (TANK_PRESET, "tank", 60.0),
        PresetName::Lake => (LAKE_PRESET, "lake", 20.0),
    };
    write_atomic(&args.out, text.as_bytes())?;
    let mut report = RunReport::new("preset");
    report.input("name", name);
    report.output(&args.out);
    report.metric("toggle_ms", toggle_ms);
    Ok(report)
}
