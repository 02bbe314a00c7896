//! Command-line front-end.
//!
//! Every command produces a [`Report`] that renders either as text or as
//! pretty-printed JSON. Random draws use ChaCha20 seeded from a 64-bit seed;
//! sample `k` of a run uses `split_seed(seed, k)`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::algorithms::{self, BackdateCheck, CorrespondenceReport, RunReport, METRIC_TOLERANCE};
use crate::boolsys::{self, BoolSysError, ParseOptions};
use crate::machine::{self, MachineError, SampleMode};
use crate::qsim::{self, trajectory_populations, Gate, GateSequence, PopulationTrajectory, Projector, QsimError};

pub const SCHEMA_VERSION: &str = "1";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
/// Published JSON schema every report validates against.
pub const REPORT_SCHEMA: &str = include_str!("../schema/report.schema.json");

const INFORMATIONAL: &str = "N≠4: informational";

#[derive(Debug, Parser)]
#[command(name = "simulcomp", version, about = "NAND constraint machine and extended quantum oracle algorithms")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve a NAND system with the hydraulic constraint machine.
    Machine(MachineArgs),
    /// Extended Grover search with the marked location in superposition.
    Grover(GroverArgs),
    /// Extended Deutsch algorithm with the function in superposition.
    Deutsch(DeutschArgs),
    /// Forward and backward register populations around a measurement.
    Trajectory(TrajectoryArgs),
    /// Map a measured two-qubit pair onto the machine and back.
    Correspondence(CorrespondenceArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Exact,
    Fast,
}

impl From<Mode> for SampleMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Exact => SampleMode::Exact,
            Mode::Fast => SampleMode::Fast,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// The anticorrelated pair followed by an identity gate.
    Bell,
    /// An extended Grover run.
    Grover,
    /// The anticorrelated pair with no measurement.
    Trivial,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    #[arg(long = "tol", default_value_t = machine::DEFAULT_TOLERANCE)]
    pub tolerance: f64,
}

#[derive(Debug, Clone, Args)]
pub struct MachineArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Number of rest-to-motion cycles to sample.
    #[arg(long, default_value_t = 0)]
    pub samples: usize,
    #[arg(long, value_enum, default_value_t = Mode::Exact)]
    pub mode: Mode,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct GroverArgs {
    /// Qubits per register; N = 2^n.
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long, requires = "backdate_value")]
    pub backdate_bit: Option<usize>,
    #[arg(long, requires = "backdate_bit", value_parser = clap::value_parser!(u8).range(0..=1))]
    pub backdate_value: Option<u8>,
    /// Extra sampled `(k, x)` outcomes.
    #[arg(long, default_value_t = 0)]
    pub samples: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct DeutschArgs {
    #[arg(long, default_value_t = 0)]
    pub samples: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct TrajectoryArgs {
    #[arg(long, value_enum, default_value_t = Preset::Bell)]
    pub preset: Preset,
    /// Measured bits: `X` for `bell`, `K` then `X` for `grover`.
    #[arg(long)]
    pub outcome: Option<String>,
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct CorrespondenceArgs {
    /// Independent measurement trials.
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub expected: Value,
    pub actual: Value,
    pub pass: bool,
    /// Reported but not counted toward the exit status.
    #[serde(skip)]
    pub informational: bool,
}

impl Check {
    fn new(name: &str, expected: Value, actual: Value, pass: bool) -> Self {
        Self { name: name.into(), expected, actual, pass, informational: false }
    }

    fn close(name: &str, expected: f64, actual: f64, tol: f64) -> Self {
        Self::new(name, json!(expected), json!(actual), (expected - actual).abs() <= tol)
    }

    fn at_most(name: &str, bound: f64, actual: f64) -> Self {
        Self::new(name, json!(format!("<= {bound:e}")), json!(actual), actual <= bound)
    }

    /// Keeps the verdict but excludes it from the exit status.
    fn informational(mut self) -> Self {
        self.expected = json!(INFORMATIONAL);
        self.informational = true;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Config {
    pub seed: u64,
    pub tool_version: &'static str,
    pub tolerance: f64,
    pub generator: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<SampleMode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(rename = "N", skip_serializing_if = "Option::is_none")]
    pub big_n: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outcome: Option<String>,
}

impl Config {
    fn new(common: &Common) -> Self {
        Self {
            seed: common.seed,
            tool_version: TOOL_VERSION,
            tolerance: common.tolerance,
            generator: "ChaCha20 (rand_chacha), per-sample seeds via SplitMix64",
            input: None,
            mode: None,
            samples: None,
            big_n: None,
            iterations: None,
            preset: None,
            outcome: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Results {
    Machine(MachineResults),
    Grover(Box<GroverResults>),
    Deutsch(Box<DeutschResults>),
    Trajectory(TrajectoryResults),
    Correspondence(CorrespondenceResults),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub schema_version: &'static str,
    pub command: &'static str,
    pub config: Config,
    pub results: Results,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().filter(|c| !c.informational).all(|c| c.pass)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupResidual {
    pub group: usize,
    pub kind: machine::GroupKind,
    pub linear: f64,
    pub nonlinear: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MachineSample {
    pub index: usize,
    pub seed: u64,
    pub assignment: String,
    pub max_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossCheck {
    pub performed: bool,
    pub oracle_solutions: usize,
    pub machine_solutions: usize,
    pub mismatches: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MachineResults {
    pub variables: Vec<String>,
    pub equations: usize,
    /// Branch labels per group, `name=bit` joined by commas.
    pub groups: Vec<Vec<String>>,
    pub linkage_constraints: usize,
    pub satisfiable: bool,
    /// Bit strings in variable order, when the sweep was within its caps.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solutions: Option<Vec<String>>,
    pub cross_check: CrossCheck,
    /// Distribution the samples were drawn from, when any were drawn.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sampling_law: Option<&'static str>,
    pub samples: Vec<MachineSample>,
    pub sample_counts: BTreeMap<String, usize>,
    /// Largest residual per group over all samples.
    pub residuals: Vec<GroupResidual>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampledOutcome {
    pub index: usize,
    pub seed: u64,
    pub k: String,
    pub x: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroverResults {
    pub run: RunReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference_state_deviation: Option<f64>,
    pub full_backdating: Vec<BackdateCheck>,
    pub partial_backdating: Vec<BackdateCheck>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub measurement_order_deviation: Option<f64>,
    pub samples: Vec<SampledOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeutschResults {
    pub run: RunReport,
    /// Largest gap between amplitude moduli and the all-positive reference.
    pub reference_modulus_deviation: f64,
    pub measurement_order_deviation: f64,
    pub samples: Vec<SampledOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryResults {
    pub trajectory: PopulationTrajectory,
    pub max_switch: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrespondenceResults {
    pub first_trial: CorrespondenceReport,
    pub trials: usize,
    /// Counts of outcome 0 and outcome 1.
    pub outcome_counts: [usize; 2],
    pub frequencies: [f64; 2],
    pub all_post_valid: bool,
}

/// Process result: exit status and captured streams.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Outcome {
    fn error(message: impl std::fmt::Display) -> Self {
        Self { code: 2, stdout: String::new(), stderr: format!("error: {message}\n") }
    }
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{path}: {source}")]
    Parse { path: String, source: BoolSysError },
    #[error("{0}: {1}")]
    Io(String, std::io::Error),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Machine(#[from] MachineError),
    #[error(transparent)]
    Algorithm(#[from] algorithms::AlgorithmError),
    #[error(transparent)]
    Qsim(#[from] QsimError),
    #[error(transparent)]
    BoolSys(#[from] BoolSysError),
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => execute(&cli),
        Err(e) => {
            let text = e.render().to_string();
            match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    Outcome { code: 0, stdout: text, stderr: String::new() }
                }
                _ => Outcome { code: 2, stdout: String::new(), stderr: text },
            }
        }
    }
}

pub fn execute(cli: &Cli) -> Outcome {
    let (common, report) = match &cli.command {
        Command::Machine(a) => (&a.common, cmd_machine(a)),
        Command::Grover(a) => (&a.common, cmd_grover(a)),
        Command::Deutsch(a) => (&a.common, cmd_deutsch(a)),
        Command::Trajectory(a) => (&a.common, cmd_trajectory(a)),
        Command::Correspondence(a) => (&a.common, cmd_correspondence(a)),
    };
    let report = match report {
        Ok(r) => r,
        Err(e) => return Outcome::error(e),
    };
    let stdout = match common.format {
        Format::Json => report.to_json(),
        Format::Text => render_text(&report),
    };
    let mut stderr = String::new();
    let code = match &report.results {
        Results::Machine(m) if !m.satisfiable => {
            stderr.push_str(&format!("{}\n", MachineError::NoMotion));
            1
        }
        Results::Machine(_) if !report.all_pass() => 2,
        _ if report.all_pass() => 0,
        _ => 1,
    };
    Outcome { code, stdout, stderr }
}

fn cmd_machine(a: &MachineArgs) -> Result<Report, CliError> {
    let path = a.input.display().to_string();
    let text = std::fs::read_to_string(&a.input).map_err(|e| CliError::Io(path.clone(), e))?;
    let sys = boolsys::parse_system_with(&text, ParseOptions { allow_no_equations: true })
        .map_err(|source| CliError::Parse { path: path.clone(), source })?;
    let circuit = machine::build_circuit(&sys);
    let tol = a.common.tolerance;

    let groups = circuit
        .quadruples()
        .iter()
        .map(|q| {
            q.branches
                .iter()
                .map(|b| {
                    b.label.iter().map(|&(v, bit)| format!("{}={}", sys.name(v), bit as u8)).collect::<Vec<_>>().join(",")
                })
                .collect()
        })
        .collect();

    // brute-force sweep of the Boolean system against the machine's valid configurations
    let oracle = boolsys::enumerate_solutions(&sys);
    let configs = machine::enumerate_configurations(&circuit, 1.0);
    let (solutions, cross_check, satisfiable) = match (oracle, configs) {
        (Ok(oracle), Ok(configs)) => {
            let oracle: Vec<String> = oracle.iter().map(|s| s.bit_string(&sys)).collect::<Result<_, _>>()?;
            let mut decoded = configs
                .iter()
                .map(|c| Ok(machine::configuration_to_assignment(&circuit, c)?.bit_string(&sys)?))
                .collect::<Result<Vec<String>, CliError>>()?;
            decoded.sort();
            let mut sorted_oracle = oracle.clone();
            sorted_oracle.sort();
            let mismatches = sorted_oracle.iter().filter(|s| decoded.binary_search(s).is_err()).count()
                + decoded.iter().filter(|s| sorted_oracle.binary_search(s).is_err()).count()
                + decoded.windows(2).filter(|w| w[0] == w[1]).count();
            let cc = CrossCheck {
                performed: true,
                oracle_solutions: oracle.len(),
                machine_solutions: configs.len(),
                mismatches,
            };
            let sat = !oracle.is_empty();
            (Some(oracle), cc, sat)
        }
        (Err(BoolSysError::CapExceeded { .. }), _) | (_, Err(MachineError::CapExceeded { .. })) => {
            let mut rng = machine::seeded_rng(a.common.seed);
            let sat = match machine::sample_transition(&circuit, 1.0, SampleMode::Fast, &mut rng) {
                Ok(_) => true,
                Err(MachineError::NoMotion) => false,
                Err(e) => return Err(e.into()),
            };
            (None, CrossCheck { performed: false, oracle_solutions: 0, machine_solutions: 0, mismatches: 0 }, sat)
        }
        (Err(e), _) => return Err(e.into()),
        (_, Err(e)) => return Err(e.into()),
    };

    let mut samples = Vec::new();
    let mut sample_counts = BTreeMap::new();
    let mut residuals: Vec<GroupResidual> = circuit
        .quadruples()
        .iter()
        .enumerate()
        .map(|(group, q)| GroupResidual { group, kind: q.kind, linear: 0.0, nonlinear: 0.0 })
        .collect();
    let mut samples_valid = true;
    let mut samples_satisfy = true;
    if satisfiable && a.samples > 0 {
        let exact = match a.mode {
            Mode::Exact => Some(machine::ExactSampler::new(&circuit)?),
            Mode::Fast => None,
        };
        for k in 0..a.samples {
            let seed = machine::split_seed(a.common.seed, k as u64);
            let mut rng = machine::seeded_rng(seed);
            let cfg = match &exact {
                Some(s) => s.sample(1.0, &mut rng),
                None => machine::sample_transition(&circuit, 1.0, SampleMode::Fast, &mut rng)?,
            };
            let v = machine::validate_configuration(&circuit, &cfg, tol)?;
            samples_valid &= v.valid;
            for (r, (l, n)) in residuals.iter_mut().zip(v.linear.iter().zip(&v.nonlinear)) {
                r.linear = r.linear.max(*l);
                r.nonlinear = r.nonlinear.max(*n);
            }
            let asg = machine::configuration_to_assignment(&circuit, &cfg)?;
            samples_satisfy &= boolsys::validate_assignment(&sys, &asg)?;
            let bits = asg.bit_string(&sys)?;
            *sample_counts.entry(bits.clone()).or_insert(0) += 1;
            samples.push(MachineSample { index: k, seed, assignment: bits, max_residual: v.max_residual });
        }
    }

    let mut checks = Vec::new();
    if cross_check.performed {
        checks.push(Check::new(
            "machine_matches_brute_force",
            json!(0),
            json!(cross_check.mismatches),
            cross_check.mismatches == 0,
        ));
    }
    if !samples.is_empty() {
        checks.push(Check::new("samples_valid", json!(true), json!(samples_valid), samples_valid));
        checks.push(Check::new("samples_satisfy_system", json!(true), json!(samples_satisfy), samples_satisfy));
    }

    let mut config = Config::new(&a.common);
    config.input = Some(path);
    config.mode = Some(a.mode.into());
    config.samples = Some(a.samples);
    Ok(Report {
        schema_version: SCHEMA_VERSION,
        command: "machine",
        config,
        results: Results::Machine(MachineResults {
            variables: sys.variables().to_vec(),
            equations: sys.equations().len(),
            groups,
            linkage_constraints: circuit.linkage().len(),
            satisfiable,
            solutions,
            cross_check,
            sampling_law: (!samples.is_empty()).then_some(match a.mode {
                Mode::Exact => "uniform over valid configurations (implementation choice)",
                Mode::Fast => "randomized backtracking with propagation, not uniform",
            }),
            samples,
            sample_counts,
            residuals,
        }),
        checks,
    })
}

fn sampled_outcomes(run: &algorithms::ExtendedRun, seed: u64, count: usize) -> Result<Vec<SampledOutcome>, CliError> {
    let xw = run.x_qubits().len();
    let kw = run.k_qubits().len();
    let bits = |v: u64, w: usize| qsim::Projector::new((0..w).collect(), v).label();
    (0..count)
        .map(|k| {
            let s = machine::split_seed(seed, k as u64);
            let m = run.final_state.measure(&run.measured, &mut machine::seeded_rng(s))?;
            Ok(SampledOutcome { index: k, seed: s, k: bits(m.outcome >> xw, kw), x: bits(m.outcome & ((1 << xw) - 1), xw) })
        })
        .collect()
}

fn metric_checks(report: &RunReport, exact: bool) -> Vec<Check> {
    let mark = |c: Check| if exact { c } else { c.informational() };
    vec![
        mark(Check::close("delta_s", 1.0, report.delta_s_nominal, METRIC_TOLERANCE)),
        mark(Check::close("delta_r", 2.0, report.delta_r, METRIC_TOLERANCE)),
        mark(Check::new("half_ratio", json!(true), json!(report.half_ratio_ok), report.half_ratio_ok)),
        mark(Check::new("delta_s_bounded_by_delta_r", json!(true), json!(report.inequality_ok), report.inequality_ok)),
        Check::new(
            "operational_delta_s_bounded_by_delta_r",
            json!(true),
            json!(report.inequality_operational_ok),
            report.inequality_operational_ok,
        ),
    ]
}

fn cmd_grover(a: &GroverArgs) -> Result<Report, CliError> {
    let tol = a.common.tolerance;
    let run = algorithms::run_extended_grover(a.n, a.common.seed, a.iterations)?;
    let big_n = run.report.big_n;
    let at_four = big_n == 4;

    let reference_state_deviation = if at_four {
        Some(run.final_state.max_deviation_up_to_phase(&algorithms::grover_reference_state()?))
    } else {
        None
    };
    let full_keys: Vec<u64> = if at_four {
        (0..4).collect()
    } else {
        vec![u64::from_str_radix(&run.report.sampled_k, 2).expect("bit string")]
    };
    let full_backdating =
        full_keys.iter().map(|&k| algorithms::backdate_full(&run, k)).collect::<Result<Vec<_>, _>>()?;
    let partial_backdating = match (a.backdate_bit, a.backdate_value) {
        (Some(bit), Some(value)) => vec![algorithms::backdate_partial(&run, bit, value)?],
        _ if at_four => {
            let mut v = Vec::new();
            for bit in 0..2 {
                for value in 0..2 {
                    v.push(algorithms::backdate_partial(&run, bit, value)?);
                }
            }
            v
        }
        _ => Vec::new(),
    };
    let measurement_order_deviation =
        if a.n <= 4 { Some(algorithms::measurement_order_deviation(&run)?) } else { None };
    let samples = sampled_outcomes(&run, a.common.seed, a.samples)?;

    let r = &run.report;
    let mut checks = vec![Check::new("oracle_calls", json!(r.iterations), json!(r.oracle_calls), r.oracle_calls == r.iterations)];
    if let Some(d) = reference_state_deviation {
        checks.push(Check::at_most("reference_state_deviation", tol, d));
    }
    let success = Check::close("success_probability", 1.0, r.success_probability, tol);
    checks.push(if at_four { success } else { success.informational() });
    checks.extend(metric_checks(r, at_four));
    let full_ok = full_backdating.iter().all(|c| c.pass);
    checks.push(Check::new("full_backdating", json!(true), json!(full_ok), full_ok));
    if !partial_backdating.is_empty() {
        let ok = partial_backdating.iter().all(|c| c.pass);
        checks.push(Check::new("partial_backdating", json!(true), json!(ok), ok));
    }
    if let Some(d) = measurement_order_deviation {
        checks.push(Check::at_most("measurement_order_deviation", tol, d));
    }

    let mut config = Config::new(&a.common);
    config.big_n = Some(big_n);
    config.iterations = Some(r.iterations);
    config.samples = Some(a.samples);
    Ok(Report {
        schema_version: SCHEMA_VERSION,
        command: "grover",
        config,
        results: Results::Grover(Box::new(GroverResults {
            run: run.report.clone(),
            reference_state_deviation,
            full_backdating,
            partial_backdating,
            measurement_order_deviation,
            samples,
        })),
        checks,
    })
}

fn cmd_deutsch(a: &DeutschArgs) -> Result<Report, CliError> {
    let tol = a.common.tolerance;
    let run = algorithms::run_extended_deutsch(a.common.seed)?;
    let reference = algorithms::deutsch_reference_state()?;
    let reference_modulus_deviation = run
        .final_state
        .amplitudes()
        .iter()
        .zip(reference.amplitudes())
        .map(|(x, y)| (x.norm() - y.norm()).abs())
        .fold(0.0, f64::max);
    let measurement_order_deviation = algorithms::measurement_order_deviation(&run)?;
    let samples = sampled_outcomes(&run, a.common.seed, a.samples)?;

    let r = &run.report;
    let on_support = r.distribution.len() == 4
        && r.distribution.iter().all(|o| {
            let k = usize::from_str_radix(&o.k, 2).expect("bit string");
            o.x == algorithms::balanced(k).to_string() && (o.probability - 0.25).abs() <= tol
        });
    let mut checks = vec![
        Check::new("oracle_calls", json!(1), json!(r.oracle_calls), r.oracle_calls == 1),
        Check::new("quarter_on_balanced_pairs", json!(true), json!(on_support), on_support),
        Check::at_most("reference_modulus_deviation", tol, reference_modulus_deviation),
        Check::close("success_probability", 1.0, r.success_probability, tol),
    ];
    checks.extend(metric_checks(r, true));
    checks.push(Check::at_most("measurement_order_deviation", tol, measurement_order_deviation));

    let mut config = Config::new(&a.common);
    config.big_n = Some(4);
    config.samples = Some(a.samples);
    Ok(Report {
        schema_version: SCHEMA_VERSION,
        command: "deutsch",
        config,
        results: Results::Deutsch(Box::new(DeutschResults {
            run: run.report.clone(),
            reference_modulus_deviation,
            measurement_order_deviation,
            samples,
        })),
        checks,
    })
}

fn parse_outcome(bits: &str, width: usize) -> Result<u64, CliError> {
    if bits.len() != width || !bits.chars().all(|c| c == '0' || c == '1') {
        return Err(CliError::Usage(format!("outcome must be {width} binary digits, got `{bits}`")));
    }
    Ok(u64::from_str_radix(bits, 2).expect("binary digits"))
}

fn one_hot_at(p: &[f64], index: usize, tol: f64) -> bool {
    p.iter().enumerate().all(|(i, &v)| if i == index { (v - 1.0).abs() <= tol } else { v.abs() <= tol })
}

fn populations_close(a: &[Vec<f64>], b: &[Vec<f64>], tol: f64) -> bool {
    a.iter().flatten().zip(b.iter().flatten()).all(|(x, y)| (x - y).abs() <= tol)
}

fn cmd_trajectory(a: &TrajectoryArgs) -> Result<Report, CliError> {
    let tol = a.common.tolerance;
    let mut checks = Vec::new();
    let mut config = Config::new(&a.common);
    let trajectory = match a.preset {
        Preset::Bell | Preset::Trivial => {
            let (pair, _) = algorithms::anticorrelated_pair()?;
            let ident = GateSequence::new(vec![Gate::I(0)], pair.layout())?;
            let projector = if a.preset == Preset::Bell {
                Projector::new(vec![0], parse_outcome(a.outcome.as_deref().unwrap_or("0"), 1)?)
            } else {
                if a.outcome.is_some() {
                    return Err(CliError::Usage("the trivial preset measures nothing".into()));
                }
                Projector::identity()
            };
            let t = trajectory_populations(&ident, &pair, &projector)?;
            if a.preset == Preset::Bell {
                let forward_half = t.steps.iter().flat_map(|s| s.forward.iter().flatten()).all(|p| (p - 0.5).abs() <= tol);
                let backward_one_hot = t
                    .steps
                    .iter()
                    .flat_map(|s| &s.backward)
                    .all(|reg| reg.iter().all(|&p| p.abs() <= tol || (p - 1.0).abs() <= tol));
                checks.push(Check::new("forward_populations_half", json!(true), json!(forward_half), forward_half));
                checks.push(Check::new("backward_populations_one_hot", json!(true), json!(backward_one_hot), backward_one_hot));
            } else {
                checks.push(Check::at_most("max_switch", tol, t.max_switch()));
            }
            t
        }
        Preset::Grover => {
            let run = algorithms::run_extended_grover(a.n, a.common.seed, a.iterations)?;
            let width = run.measured.len();
            let default = "0".repeat(width);
            let value = parse_outcome(a.outcome.as_deref().unwrap_or(&default), width)?;
            let t = trajectory_populations(&run.gates, &run.prep, &Projector::new(run.measured.clone(), value))
                .map_err(|e| match e {
                    QsimError::ZeroProbability => CliError::Usage(format!(
                        "outcome {} has zero probability",
                        a.outcome.as_deref().unwrap_or(&default)
                    )),
                    other => other.into(),
                })?;
            let k = (value >> a.n) as usize;
            let ok = one_hot_at(&t.steps[0].backward[0], k, tol);
            checks.push(Check::new("initial_backward_k_one_hot", json!(k), json!(ok), ok));
            config.big_n = Some(run.report.big_n);
            config.iterations = Some(run.report.iterations);
            t
        }
    };
    let last = &trajectory.steps.last().expect("step 0 exists").backward;
    let ok = populations_close(last, &trajectory.post_measurement, tol);
    checks.push(Check::new("final_backward_matches_post_measurement", json!(true), json!(ok), ok));

    config.preset = Some(format!("{:?}", a.preset).to_lowercase());
    config.outcome = Some(trajectory.outcome.clone());
    let max_switch = trajectory.max_switch();
    Ok(Report {
        schema_version: SCHEMA_VERSION,
        command: "trajectory",
        config,
        results: Results::Trajectory(TrajectoryResults { trajectory, max_switch }),
        checks,
    })
}

fn cmd_correspondence(a: &CorrespondenceArgs) -> Result<Report, CliError> {
    let first_trial = algorithms::correspondence_check(a.common.seed)?;
    let mut outcome_counts = [0usize; 2];
    let mut all_post_valid = true;
    for k in 0..a.samples {
        let r = algorithms::correspondence_check(machine::split_seed(a.common.seed, k as u64))?;
        outcome_counts[r.outcome as usize] += 1;
        all_post_valid &= r.post_valid;
    }
    let total = a.samples.max(1) as f64;
    let frequencies = [outcome_counts[0] as f64 / total, outcome_counts[1] as f64 / total];

    let mut checks = vec![
        Check::new("pre_measurement_invalid", json!(false), json!(first_trial.pre_valid), !first_trial.pre_valid),
        Check::close("pre_measurement_residual", 0.5, first_trial.pre_nonlinear_residual, a.common.tolerance),
        Check::new("post_measurement_valid", json!(true), json!(first_trial.post_valid), first_trial.post_valid),
    ];
    if a.samples > 0 {
        checks.push(Check::new("all_trials_valid", json!(true), json!(all_post_valid), all_post_valid));
        for (i, f) in frequencies.iter().enumerate() {
            checks.push(Check::new(
                &format!("outcome_{i}_frequency"),
                json!("[0.45, 0.55]"),
                json!(f),
                (0.45..=0.55).contains(f),
            ));
        }
    }
    let mut config = Config::new(&a.common);
    config.samples = Some(a.samples);
    Ok(Report {
        schema_version: SCHEMA_VERSION,
        command: "correspondence",
        config,
        results: Results::Correspondence(CorrespondenceResults {
            first_trial,
            trials: a.samples,
            outcome_counts,
            frequencies,
            all_post_valid,
        }),
        checks,
    })
}

fn fmt_pops(p: &[Vec<f64>]) -> String {
    p.iter()
        .map(|r| format!("[{}]", r.iter().map(|v| format!("{v:.6}")).collect::<Vec<_>>().join(" ")))
        .collect::<Vec<_>>()
        .join(" ")
}

fn fmt_run(out: &mut String, r: &RunReport) {
    let _ = writeln!(out, "{} N={} n={} iterations={} oracle_calls={}", r.algorithm.name(), r.big_n, r.n, r.iterations, r.oracle_calls);
    let _ = writeln!(out, "state sha256 {}", r.final_state.sha256);
    let _ = writeln!(out, "distribution (k x p):");
    for o in r.distribution.iter().take(64) {
        let _ = writeln!(out, "  {} {} {:.12}", o.k, o.x, o.probability);
    }
    if r.distribution.len() > 64 {
        let _ = writeln!(out, "  ... {} more", r.distribution.len() - 64);
    }
    let _ = writeln!(out, "success probability {:.12}", r.success_probability);
    let _ = writeln!(out, "sampled k={} x={}", r.sampled_k, r.sampled_x);
    let _ = writeln!(
        out,
        "delta_s {} (operational {}{})  delta_r {} (von Neumann {:.12})",
        r.delta_s_nominal,
        r.delta_s_operational,
        if r.delta_s_operational_extrapolated { ", extrapolated" } else { "" },
        r.delta_r,
        r.delta_r_von_neumann
    );
    for s in &r.sign_discrepancies {
        let _ = writeln!(out, "sign discrepancy: k={} relative sign {}", s.k, s.relative_sign);
    }
}

fn fmt_backdate(out: &mut String, c: &BackdateCheck) {
    let _ = writeln!(
        out,
        "  {} {}: deviation {:.3e}, forward {:.3e}, K entropy {:.3} -> {:.3}, {}",
        c.kind,
        c.outcome,
        c.max_deviation,
        c.forward_deviation,
        c.k_entropy_before,
        c.k_entropy_after,
        if c.pass { "ok" } else { "FAILED" }
    );
    if let Some(j) = c.joint_x_uniform_deviation {
        let _ = writeln!(out, "    joint (K, X) outcome: X marginal off uniform by {j:.3e}");
    }
}

pub fn render_text(report: &Report) -> String {
    let mut out = String::new();
    let c = &report.config;
    let _ = writeln!(out, "simulcomp {} {} (seed {}, tol {:e})", c.tool_version, report.command, c.seed, c.tolerance);
    match &report.results {
        Results::Machine(m) => {
            let _ = writeln!(out, "variables: {}", m.variables.join(" "));
            let _ = writeln!(out, "equations: {}, groups: {}, linkage constraints: {}", m.equations, m.groups.len(), m.linkage_constraints);
            for (i, g) in m.groups.iter().enumerate() {
                let _ = writeln!(out, "group {i}:");
                for b in g {
                    let _ = writeln!(out, "  {b}");
                }
            }
            if !m.satisfiable {
                let _ = writeln!(out, "{}", MachineError::NoMotion);
            }
            if let Some(sols) = &m.solutions {
                let _ = writeln!(out, "solutions ({}):", sols.len());
                for s in sols {
                    let _ = writeln!(out, "  {s}");
                }
            }
            if m.cross_check.performed {
                let _ = writeln!(
                    out,
                    "cross-check: {} oracle solutions, {} machine configurations, {} mismatches",
                    m.cross_check.oracle_solutions, m.cross_check.machine_solutions, m.cross_check.mismatches
                );
            } else {
                let _ = writeln!(out, "cross-check: skipped (system beyond enumeration caps)");
            }
            if !m.samples.is_empty() {
                let _ = writeln!(out, "samples: {} ({})", m.samples.len(), m.sampling_law.unwrap_or(""));
                for (bits, n) in &m.sample_counts {
                    let _ = writeln!(out, "  {bits} x{n}");
                }
                let _ = writeln!(out, "max residuals per group (linear, nonlinear):");
                for r in &m.residuals {
                    let _ = writeln!(out, "  {}: {:.3e} {:.3e}", r.group, r.linear, r.nonlinear);
                }
            }
        }
        Results::Grover(g) => {
            fmt_run(&mut out, &g.run);
            if let Some(d) = g.reference_state_deviation {
                let _ = writeln!(out, "reference state deviation {d:.3e}");
            }
            let _ = writeln!(out, "backdating:");
            for b in g.full_backdating.iter().chain(&g.partial_backdating) {
                fmt_backdate(&mut out, b);
            }
            if let Some(d) = g.measurement_order_deviation {
                let _ = writeln!(out, "measurement order deviation {d:.3e}");
            }
            for s in &g.samples {
                let _ = writeln!(out, "sample {}: k={} x={}", s.index, s.k, s.x);
            }
        }
        Results::Deutsch(d) => {
            fmt_run(&mut out, &d.run);
            let _ = writeln!(out, "reference modulus deviation {:.3e}", d.reference_modulus_deviation);
            let _ = writeln!(out, "measurement order deviation {:.3e}", d.measurement_order_deviation);
            for s in &d.samples {
                let _ = writeln!(out, "sample {}: k={} x={}", s.index, s.k, s.x);
            }
        }
        Results::Trajectory(t) => {
            let tr = &t.trajectory;
            let _ = writeln!(out, "registers {} measured {:?} outcome {}", tr.registers.join(","), tr.measured_qubits, tr.outcome);
            let _ = writeln!(out, "step gate | forward | backward");
            for s in &tr.steps {
                let _ = writeln!(out, "{:>4} {} | {} | {}", s.step, s.gate, fmt_pops(&s.forward), fmt_pops(&s.backward));
            }
            let _ = writeln!(out, "post-measurement {}", fmt_pops(&tr.post_measurement));
        }
        Results::Correspondence(r) => {
            let f = &r.first_trial;
            let p = &f.pre_measurement;
            let _ = writeln!(out, "before: x11={} x22={} y11={} y22={} valid={}", p.x11, p.x22, p.y11, p.y22, f.pre_valid);
            let p = &f.post_measurement;
            let _ = writeln!(out, "after X={}: x11={} x22={} y11={} y22={} valid={}", f.outcome, p.x11, p.x22, p.y11, p.y22, f.post_valid);
            let _ = writeln!(out, "trials {}: outcome counts {:?}", r.trials, r.outcome_counts);
        }
    }
    let _ = writeln!(out, "checks:");
    for ch in &report.checks {
        let verdict = match (ch.pass, ch.informational) {
            (_, true) => "info",
            (true, false) => "pass",
            (false, false) => "FAIL",
        };
        let _ = writeln!(out, "  [{verdict}] {}: expected {}, actual {}", ch.name, ch.expected, ch.actual);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_ok(args: &[&str]) -> Outcome {
        run(std::iter::once("simulcomp").chain(args.iter().copied()))
    }

    #[test]
    fn grover_n4_passes() {
        let o = run_ok(&["grover", "--n", "2", "--seed", "1", "--format", "json"]);
        assert_eq!(o.code, 0, "{}", o.stdout);
        let v: Value = serde_json::from_str(&o.stdout).unwrap();
        let run = &v["results"]["run"];
        assert_eq!(run["delta_s_nominal"], json!(1.0));
        assert_eq!(run["delta_r"], json!(2.0));
        assert_eq!(run["oracle_calls"], json!(1));
        assert_eq!(v["config"]["seed"], json!(1));
    }

    #[test]
    fn grover_n8_marks_informational() {
        let o = run_ok(&["grover", "--n", "3", "--format", "json"]);
        assert_eq!(o.code, 0, "{}", o.stdout);
        let v: Value = serde_json::from_str(&o.stdout).unwrap();
        let p = v["results"]["run"]["success_probability"].as_f64().unwrap();
        assert!((p - 0.9453).abs() < 1e-4);
        let info = v["checks"].as_array().unwrap().iter().filter(|c| c["expected"] == json!(INFORMATIONAL)).count();
        assert!(info >= 4);
    }

    #[test]
    fn degenerate_iteration_count_fails_checks() {
        let o = run_ok(&["grover", "--iterations", "0"]);
        assert_eq!(o.code, 1);
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(run_ok(&["grover", "--n", "11"]).code, 2);
        assert_eq!(run_ok(&["grover", "--n", "3", "--backdate-bit", "0", "--backdate-value", "1"]).code, 2);
        assert_eq!(run_ok(&["grover", "--backdate-bit", "0"]).code, 2);
        assert_eq!(run_ok(&["grover", "--backdate-bit", "0", "--backdate-value", "2"]).code, 2);
        assert_eq!(run_ok(&["machine", "--input", "/nonexistent/file"]).code, 2);
        assert_eq!(run_ok(&["trajectory", "--outcome", "01"]).code, 2);
        assert_eq!(run_ok(&["bogus"]).code, 2);
        assert_eq!(run_ok(&["--help"]).code, 0);
    }

    #[test]
    fn trajectory_presets() {
        assert_eq!(run_ok(&["trajectory"]).code, 0);
        assert_eq!(run_ok(&["trajectory", "--preset", "trivial"]).code, 0);
        assert_eq!(run_ok(&["trajectory", "--preset", "grover", "--outcome", "1010"]).code, 0);
        let zero = run_ok(&["trajectory", "--preset", "grover", "--outcome", "1001"]);
        assert_eq!(zero.code, 2);
        assert!(zero.stderr.contains("zero probability"));
    }

    #[test]
    fn schema_is_valid_json() {
        let v: Value = serde_json::from_str(REPORT_SCHEMA).unwrap();
        assert_eq!(v["properties"]["schema_version"]["const"], json!(SCHEMA_VERSION));
    }
}
