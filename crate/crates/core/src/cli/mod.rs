//! Command-line front end: `synthesize`, `simulate`, `optimize-graphs`,
//! `check-attack-class`.
//!
//! Every command writes its outputs plus a `manifest.json` listing each file
//! with its SHA-256. Exit codes: 0 ok, 2 infeasible, 3 invalid input,
//! 4 numerical divergence.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::analysis::{detector_plot, error_plot, performance_report, DetectionOptions};
use crate::attackclass::{check_admissible_filter, realize_bias_model};
use crate::error::{Error, Result};
use crate::model::{load_scenario, Scenario, TransferFunction};
use crate::simcore::{assemble_closed_loop, run_simulation, Mode};
use crate::synthesis::{optimize_over_graphs, synthesize, CandidateGraph, SynthesisOptions, SynthesizedGains};

/// Environment variable capping the worker-thread count.
pub const THREADS_ENV: &str = "ROL_THREADS";

#[derive(Debug, Parser)]
#[command(name = "rol", version, about = "Resilient distributed observers: synthesis, simulation and graph selection")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Design observer, detector and controller gains for a scenario.
    Synthesize(SynthesizeArgs),
    /// Simulate the closed loop with previously synthesised gains.
    Simulate(SimulateArgs),
    /// Bisect both layers over candidate graphs and pick the best one.
    OptimizeGraphs(OptimizeArgs),
    /// Certify an attack class G(s) = N(s)/D(s) and report its realisation.
    CheckAttackClass(AttackClassArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Record wall-clock timing in the manifest (makes it run-dependent).
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Args)]
pub struct SynthesizeArgs {
    pub scenario: PathBuf,
    /// Fixed detector level γ²; bisected when absent.
    #[arg(long)]
    pub gamma2: Option<f64>,
    /// Fixed observer level γ̄²; bisected when absent.
    #[arg(long = "bar-gamma2")]
    pub bar_gamma2: Option<f64>,
    /// Certification horizon for time-varying scenarios.
    #[arg(long = "ltv-horizon")]
    pub ltv_horizon: Option<f64>,
    /// Skip the non-resilient comparison design.
    #[arg(long = "no-baseline")]
    pub no_baseline: bool,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    pub scenario: PathBuf,
    /// Gain file; `<out>/gains.json` when absent.
    #[arg(long)]
    pub gains: Option<PathBuf>,
    /// Integration step (overrides the scenario).
    #[arg(long)]
    pub step: Option<f64>,
    /// Seed for the disturbance and masking generators (overrides the scenario).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Keep every k-th sample (overrides the scenario).
    #[arg(long = "record-every")]
    pub record_every: Option<usize>,
    /// Simulate the non-resilient observers instead.
    #[arg(long)]
    pub baseline: bool,
    /// Also write SVG plots under `<out>/plots`.
    #[arg(long)]
    pub plots: bool,
    #[arg(long = "detect-window", default_value_t = DetectionOptions::default().window)]
    pub detect_window: f64,
    #[arg(long = "detect-ratio", default_value_t = DetectionOptions::default().ratio)]
    pub detect_ratio: f64,
    #[arg(long = "detect-floor", default_value_t = DetectionOptions::default().floor)]
    pub detect_floor: f64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    pub scenario: PathBuf,
    /// JSON list of `{ "id": ..., "graph": {...} }` candidates.
    pub candidates: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct AttackClassArgs {
    /// Numerator coefficients, highest power first (e.g. "410").
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub num: Vec<f64>,
    /// Denominator coefficients, highest power first (e.g. "1,40").
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub den: Vec<f64>,
    /// Number of attacked channels.
    #[arg(long = "nf", default_value_t = 1)]
    pub n_f: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OutputFile {
    pub path: String,
    pub sha256: String,
}

/// Record of one command invocation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub scenario: Option<String>,
    pub seed: Option<u64>,
    pub output_dir: String,
    pub version: String,
    pub outputs: Vec<OutputFile>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timing_ms: Option<u128>,
}

struct Outputs {
    dir: PathBuf,
    files: Vec<OutputFile>,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|source| Error::Io {
                path: parent.to_path_buf(),
                source,
            })?;
        }
        fs::write(&path, bytes).map_err(|source| Error::Io { path, source })?;
        self.files.push(OutputFile {
            path: rel.to_string(),
            sha256: hex::encode(Sha256::digest(bytes)),
        });
        Ok(())
    }

    fn finish(mut self, command: &str, scenario: Option<&Path>, seed: Option<u64>, started: Option<Instant>) -> Result<RunManifest> {
        let manifest = RunManifest {
            command: command.to_string(),
            scenario: scenario.map(|p| p.display().to_string()),
            seed,
            output_dir: self.dir.display().to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            outputs: std::mem::take(&mut self.files),
            timing_ms: started.map(|t| t.elapsed().as_millis()),
        };
        let json = to_json(&manifest);
        self.write("manifest.json", json.as_bytes())?;
        Ok(manifest)
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    crate::json::to_pretty(v)
}

fn started(common: &Common) -> Option<Instant> {
    common.timing.then(Instant::now)
}

pub fn cmd_synthesize(args: &SynthesizeArgs) -> Result<RunManifest> {
    let t0 = started(&args.common);
    let s = load_scenario(&args.scenario)?;
    let mut opts = SynthesisOptions::from_scenario(&s);
    opts.gamma2 = args.gamma2.or(opts.gamma2);
    opts.bar_gamma2 = args.bar_gamma2.or(opts.bar_gamma2);
    opts.ltv_horizon = args.ltv_horizon.or(opts.ltv_horizon);
    opts.baseline = !args.no_baseline;
    let syn = synthesize(&s, &opts)?;
    for w in &syn.report.warnings {
        eprintln!("warning: {w}");
    }
    let mut out = Outputs::new(&args.common.out)?;
    out.write("gains.json", syn.gains.to_json().as_bytes())?;
    out.write("synthesis_report.json", to_json(&syn.report).as_bytes())?;
    out.finish("synthesize", Some(&args.scenario), None, t0)
}

fn simulation_scenario(args: &SimulateArgs) -> Result<Scenario> {
    let mut s = load_scenario(&args.scenario)?;
    if let Some(h) = args.step {
        s.simulation.step = h;
    }
    if let Some(seed) = args.seed {
        s.simulation.seed = seed;
    }
    if let Some(k) = args.record_every {
        s.simulation.record_every = k;
    }
    Ok(s)
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<RunManifest> {
    let t0 = started(&args.common);
    let s = simulation_scenario(args)?;
    let gains_path = args.gains.clone().unwrap_or_else(|| args.common.out.join("gains.json"));
    let gains = SynthesizedGains::load(&gains_path)?;
    gains.ensure_matches(&s)?;
    let mode = if args.baseline { Mode::Baseline } else { Mode::Resilient };
    if mode == Mode::Baseline && gains.baseline.is_none() {
        return Err(Error::Invalid(format!("{} holds no baseline gains", gains_path.display())));
    }
    let sys = assemble_closed_loop(&s, &gains, mode)?;
    // printed up front so it survives a divergent run
    let step_warning = sys.step_warning(s.simulation.step);
    if let Some(w) = &step_warning {
        eprintln!("warning: {w}");
    }
    let traj = run_simulation(&sys, &s.simulation)?;
    for w in traj.warnings.iter().filter(|w| Some(*w) != step_warning.as_ref()) {
        eprintln!("warning: {w}");
    }
    let detection = DetectionOptions {
        window: args.detect_window,
        ratio: args.detect_ratio,
        floor: args.detect_floor,
    };
    let report = performance_report(&traj, &s, &gains, &detection)?;

    let mut out = Outputs::new(&args.common.out)?;
    let mut csv = Vec::new();
    traj.write_csv(&mut csv).expect("writing to memory");
    out.write("trajectory.csv", &csv)?;
    out.write("report.json", report.to_json().as_bytes())?;
    if args.plots {
        out.write("plots/errors.svg", error_plot(&traj).to_svg().as_bytes())?;
        if mode == Mode::Resilient {
            out.write("plots/detectors.svg", detector_plot(&traj).to_svg().as_bytes())?;
        }
    }
    out.finish("simulate", Some(&args.scenario), Some(s.simulation.seed), t0)
}

/// Parses a candidate list; JSON errors carry line and column.
pub fn parse_candidates(text: &str, what: &str) -> Result<Vec<CandidateGraph>> {
    serde_json::from_str(text).map_err(|source| Error::Parse {
        what: what.to_string(),
        source,
    })
}

pub fn cmd_optimize_graphs(args: &OptimizeArgs) -> Result<RunManifest> {
    let t0 = started(&args.common);
    let s = load_scenario(&args.scenario)?;
    let text = fs::read_to_string(&args.candidates).map_err(|source| Error::Io {
        path: args.candidates.clone(),
        source,
    })?;
    let candidates = parse_candidates(&text, &args.candidates.display().to_string())?;
    let opts = SynthesisOptions::from_scenario(&s);
    let result = optimize_over_graphs(&s, &candidates, &opts, None)?;
    let mut out = Outputs::new(&args.common.out)?;
    out.write("graph_optimization.json", to_json(&result).as_bytes())?;
    let manifest = out.finish("optimize-graphs", Some(&args.scenario), None, t0)?;
    let winner = result.winner()?;
    println!("winner: {}", winner.id);
    Ok(manifest)
}

#[derive(Clone, Debug, Serialize)]
pub struct AttackClassSummary {
    pub certificate: crate::attackclass::AdmissibilityCertificate,
    pub channel_order: usize,
    pub order: usize,
    pub n_f: usize,
}

pub fn cmd_check_attack_class(args: &AttackClassArgs) -> Result<AttackClassSummary> {
    let g = TransferFunction::new(&args.num, &args.den);
    let cert = check_admissible_filter(&g)?;
    if !cert.stable {
        let r = cert.offending_root.unwrap_or([f64::NAN, f64::NAN]);
        return Err(Error::DegenerateBias(format!(
            "sD(s) + N(s) has the root {} + {}j outside the open left half plane",
            r[0], r[1]
        )));
    }
    let model = realize_bias_model(&g, args.n_f)?;
    Ok(AttackClassSummary {
        certificate: cert,
        channel_order: model.channel_order,
        order: model.order(),
        n_f: model.n_f,
    })
}

fn configure_threads() {
    if let Some(n) = std::env::var(THREADS_ENV).ok().and_then(|v| v.parse::<usize>().ok()) {
        // a second call (e.g. in tests) keeps the existing pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

/// Runs the parsed command; returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    configure_threads();
    let result = match &cli.command {
        Command::Synthesize(a) => cmd_synthesize(a).map(|_| ()),
        Command::Simulate(a) => cmd_simulate(a).map(|_| ()),
        Command::OptimizeGraphs(a) => cmd_optimize_graphs(a).map(|_| ()),
        Command::CheckAttackClass(a) => cmd_check_attack_class(a).map(|s| print!("{}", to_json(&s))),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Parses `args` (program name first) and runs; usage errors exit with 3.
pub fn main_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(cli),
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn usage_error_maps_to_invalid_input() {
        assert_eq!(main_from_args(["rol", "frobnicate"]), 3);
        assert_eq!(main_from_args(["rol", "--help"]), 0);
    }

    #[test]
    fn attack_class_command() {
        let ok = cmd_check_attack_class(&AttackClassArgs {
            num: vec![410.0],
            den: vec![1.0, 40.0],
            n_f: 1,
        })
        .unwrap();
        assert!(ok.certificate.stable);
        assert_eq!(ok.order, 2);
        let bad = cmd_check_attack_class(&AttackClassArgs {
            num: vec![-1.0],
            den: vec![1.0, 1.0],
            n_f: 1,
        })
        .unwrap_err();
        assert!(bad.to_string().contains("root"), "{bad}");
        let improper = cmd_check_attack_class(&AttackClassArgs {
            num: vec![1.0, 0.0, 1.0],
            den: vec![1.0, 1.0],
            n_f: 1,
        })
        .unwrap_err();
        assert!(matches!(improper, Error::ImproperTransfer { .. }));
    }

    #[test]
    fn malformed_candidates_name_the_line() {
        let err = parse_candidates("[\n  {\"id\": \"ring\",\n  \"graph\": 3 }\n]", "cands.json").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }
}
