//! Command-line surface: asymptotic formulas, capacity solves,
//! Gaussian-approximation checks, and decoding simulations as
//! subcommands emitting tables, CSV, or JSON.
//!
//! Machine outputs are built for reproducibility. Every JSON document
//! carries `schema: 1`, a manifest (tool version, subcommand, fully
//! resolved parameters, timestamps), and a `payload`; feeding the
//! document back through `--manifest` re-runs the same parameters and
//! reproduces the payload byte for byte. Table and CSV outputs written
//! to a file get a sibling `<file>.manifest.json`. The `--threads` flag
//! changes wall time only, never a digit of output.

use crate::asymptotics::{omega_max, small_n_warning, AsymptoticInputs, GeometrySpec};
use crate::capacity::{blahut_arimoto, kkt_verify, KktReport, SolverConfig};
use crate::error::{Error, Result};
use crate::geometry::{
    angle_to_state, angles_to_cartesian, cartesian_to_state, uniform_angle_grid,
    uniform_angle_grid_angles, uniform_domain_grid, AngleInterval, DiscreteEnsemble,
    SphericalDomain,
};
use crate::information::{asymptotic_marginal, output_marginal, MeasurementChannel};
use crate::prob_kernel::binomial_gaussian_tv;
use crate::simulator::{
    error_vs_load_sweep, run_experiment, wilson_interval, Codebook, SimulationConfig,
    SimulationReport,
};
use chrono::{SecondsFormat, Utc};
use clap::error::ErrorKind;
use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

/// Environment variable naming the default directory for `--output`
/// files given as relative paths.
pub const OUTPUT_DIR_ENV: &str = "NSHOT_OUTPUT_DIR";

const EXIT_OK: i32 = 0;
const EXIT_USAGE: i32 = 2;
const EXIT_NO_CONVERGENCE: i32 = 3;

const SCHEMA_VERSION: u32 = 1;
const LN_2: f64 = std::f64::consts::LN_2;

// --- argument declarations --------------------------------------------------

#[derive(Debug, Parser)]
#[command(
    name = "nshot",
    version,
    about = "Statistics of repeated quantum measurements: how many states \
             n-copy readouts can distinguish",
    after_help = "Machine formats (csv, json) carry nats; tables add bits. \
                  Angles are radians unless --degrees is given."
)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,

    /// Re-run the manifest embedded in a previous JSON output; flags
    /// other than --threads/--output are taken from the manifest.
    #[arg(long, global = true, value_name = "FILE")]
    manifest: Option<PathBuf>,

    /// Worker threads for parallel sections (default: all cores).
    /// Affects wall time only; outputs are bit-identical regardless.
    #[arg(long, global = true, value_name = "COUNT")]
    threads: Option<usize>,

    /// Interpret interval endpoints as degrees instead of radians.
    #[arg(long, global = true)]
    degrees: bool,

    /// Write the report body to this file instead of stdout. Relative
    /// paths resolve inside $NSHOT_OUTPUT_DIR when that is set. Table
    /// and CSV files get a sibling <FILE>.manifest.json.
    #[arg(long, global = true, value_name = "FILE")]
    output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Closed-form asymptotics: information suprema and
    /// distinguishable-state counts.
    #[command(group(
        ArgGroup::new("geometry").required(true).args(["interval", "omega", "orthant"])
    ))]
    Asymptotics {
        /// Copies per measurement; repeat for several rows.
        #[arg(long = "n", value_name = "COPIES", required = true)]
        n_values: Vec<u64>,
        /// State-space dimension N.
        #[arg(long, default_value_t = 2, value_name = "N")]
        dim: usize,
        /// Qubit angle interval "lo,hi" (requires --dim 2).
        #[arg(long, value_name = "LO,HI", value_parser = parse_pair)]
        interval: Option<(f64, f64)>,
        /// Domain area in steradians, up to the full orthant's.
        #[arg(long, value_name = "AREA")]
        omega: Option<f64>,
        /// Use the full non-negative orthant of the unit sphere.
        #[arg(long)]
        orthant: bool,
        #[arg(long, value_enum, default_value_t = OutputFormat::Table)]
        format: OutputFormat,
    },
    /// Grid capacity of the n-copy channel by alternating maximization.
    #[command(group(
        ArgGroup::new("geometry").required(true).args(["interval", "orthant"])
    ))]
    Capacity {
        /// Copies per measurement.
        #[arg(long, value_name = "COPIES")]
        n: u64,
        /// Qubit angle interval "lo,hi".
        #[arg(long, value_name = "LO,HI", value_parser = parse_pair)]
        interval: Option<(f64, f64)>,
        /// Use the full orthant in dimension --dim.
        #[arg(long)]
        orthant: bool,
        /// State-space dimension N (with --orthant).
        #[arg(long, default_value_t = 2, value_name = "N")]
        dim: usize,
        /// Grid points (per angular axis for --orthant with N > 2).
        #[arg(long, default_value_t = 256, value_name = "POINTS")]
        grid: usize,
        /// Duality-gap stopping tolerance, nats.
        #[arg(long, default_value_t = 1e-6, value_name = "NATS", allow_hyphen_values = true)]
        tol: f64,
        /// Iteration budget. The tight default tolerance needs a few
        /// hundred thousand iterations on fine grids.
        #[arg(long = "max-iter", default_value_t = 600_000, value_name = "COUNT")]
        max_iter: u64,
        /// Also verify the capacity optimality conditions at grid
        /// midpoint probes.
        #[arg(long)]
        kkt: bool,
        /// Slack for the optimality verdict, nats.
        #[arg(long = "kkt-tol", default_value_t = 0.05, value_name = "NATS")]
        kkt_tol: f64,
        #[arg(long, value_enum, default_value_t = OutputFormat::Table)]
        format: OutputFormat,
    },
    /// Monte Carlo identification experiments over spaced codebooks.
    #[command(group(
        ArgGroup::new("size").required(true).args(["codebook", "load"])
    ))]
    Simulate {
        /// Copies per trial; repeat to sweep.
        #[arg(long = "n", value_name = "COPIES", required = true)]
        n_values: Vec<u64>,
        /// Codeword angle interval "lo,hi" (default: full quarter
        /// circle).
        #[arg(long, value_name = "LO,HI", value_parser = parse_pair)]
        interval: Option<(f64, f64)>,
        /// Fixed codebook size.
        #[arg(long, value_name = "M")]
        codebook: Option<usize>,
        /// Codebook size as a multiple of the distinguishable-state
        /// count: M = floor(load * W(n)). Repeat to sweep.
        #[arg(long = "load", value_name = "FACTOR")]
        load: Vec<f64>,
        /// Monte Carlo trials per experiment.
        #[arg(long, default_value_t = 10_000, value_name = "COUNT")]
        trials: u64,
        /// Base RNG seed.
        #[arg(long, default_value_t = 0, value_name = "SEED")]
        seed: u64,
        #[arg(long, value_enum, default_value_t = OutputFormat::Table)]
        format: OutputFormat,
    },
    /// Quality of the Gaussian approximation to the exact law.
    #[command(name = "approx-check", group(
        ArgGroup::new("target").required(true).args(["p", "interval"])
    ))]
    ApproxCheck {
        /// Copies per measurement; repeat for several rows.
        #[arg(long = "n", value_name = "COPIES", required = true)]
        n_values: Vec<u64>,
        /// First-outcome probability in (0, 1); repeat for several rows.
        #[arg(long = "p", value_name = "PROB")]
        p: Vec<f64>,
        /// Compare an interval ensemble's exact output marginal against
        /// the closed-form asymptotic over the interior band.
        #[arg(long, value_name = "LO,HI", value_parser = parse_pair)]
        interval: Option<(f64, f64)>,
        /// Ensemble size for the --interval comparison.
        #[arg(long, default_value_t = 64, value_name = "POINTS")]
        grid: usize,
        #[arg(long, value_enum, default_value_t = OutputFormat::Table)]
        format: OutputFormat,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum OutputFormat {
    /// Human-readable table (nats and bits).
    Table,
    /// Header row, comma separator, `.` decimal point, LF line ends.
    Csv,
    /// schema/manifest/payload document.
    Json,
}

impl OutputFormat {
    fn name(self) -> &'static str {
        match self {
            OutputFormat::Table => "table",
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }
}

fn parse_pair(s: &str) -> std::result::Result<(f64, f64), String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err(format!("expected \"lo,hi\", got \"{s}\""));
    }
    let lo: f64 = parts[0]
        .trim()
        .parse()
        .map_err(|e| format!("bad interval endpoint \"{}\": {e}", parts[0]))?;
    let hi: f64 = parts[1]
        .trim()
        .parse()
        .map_err(|e| format!("bad interval endpoint \"{}\": {e}", parts[1]))?;
    Ok((lo, hi))
}

// --- resolved parameters (manifest contents) --------------------------------

/// Geometry after flag resolution; angles in radians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum GeometryParam {
    Interval { lo: f64, hi: f64 },
    Omega { dim: usize, omega: f64 },
    Orthant { dim: usize },
}

impl GeometryParam {
    fn dim(&self) -> usize {
        match self {
            GeometryParam::Interval { .. } => 2,
            GeometryParam::Omega { dim, .. } | GeometryParam::Orthant { dim } => *dim,
        }
    }

    fn descriptor(&self) -> String {
        match self {
            GeometryParam::Interval { lo, hi } => format!("interval[{lo:.6},{hi:.6}]"),
            GeometryParam::Omega { dim, omega } => format!("omega(N={dim},{omega:.6})"),
            GeometryParam::Orthant { dim } => format!("orthant(N={dim})"),
        }
    }

    fn angle_interval(&self) -> Result<AngleInterval> {
        match self {
            GeometryParam::Interval { lo, hi } => AngleInterval::new(*lo, *hi),
            _ => Err(Error::InvalidArgument {
                name: "geometry",
                reason: "this operation needs an angle interval".into(),
            }),
        }
    }

    fn asymptotic_inputs(&self, n: u64) -> Result<AsymptoticInputs> {
        let spec = match self {
            GeometryParam::Interval { .. } => GeometrySpec::Interval(self.angle_interval()?),
            GeometryParam::Omega { omega, .. } => GeometrySpec::Omega(*omega),
            GeometryParam::Orthant { dim } => GeometrySpec::Omega(omega_max(*dim)),
        };
        AsymptoticInputs::new(self.dim(), n, spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct AsymptoticsParams {
    n_values: Vec<u64>,
    geometry: GeometryParam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CapacityParams {
    n: u64,
    geometry: GeometryParam,
    grid: usize,
    tolerance: f64,
    max_iterations: u64,
    kkt: bool,
    kkt_tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
enum SimSize {
    Codebook { m: usize },
    Load { loads: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SimulateParams {
    n_values: Vec<u64>,
    interval_lo: f64,
    interval_hi: f64,
    size: SimSize,
    trials: u64,
    seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "target", rename_all = "snake_case")]
enum ApproxTarget {
    Probs { ps: Vec<f64> },
    Interval { lo: f64, hi: f64, grid: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ApproxParams {
    n_values: Vec<u64>,
    #[serde(flatten)]
    target: ApproxTarget,
}

// --- manifest ---------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Manifest {
    tool: String,
    version: String,
    subcommand: String,
    params: serde_json::Value,
    seed: Option<u64>,
    format: OutputFormat,
    started_at: String,
    finished_at: String,
}

#[derive(Debug, Serialize)]
struct Document<'a, P: Serialize> {
    schema: u32,
    manifest: &'a Manifest,
    payload: &'a P,
}

#[derive(Debug, Deserialize)]
struct ReplayDocument {
    schema: u32,
    manifest: ReplayManifest,
}

#[derive(Debug, Deserialize)]
struct ReplayManifest {
    subcommand: String,
    params: serde_json::Value,
    format: OutputFormat,
}

// --- entry point ------------------------------------------------------------

/// Parses `args` (argv-style, program name first), runs the requested
/// subcommand, and returns the process exit code: 0 success, 2 usage
/// error, 3 solver non-convergence (report still emitted).
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return EXIT_OK;
        }
        Err(e) => {
            eprint!("{e}");
            return EXIT_USAGE;
        }
    };
    if let Some(threads) = cli.threads {
        if threads == 0 {
            eprintln!("error: --threads must be at least 1");
            return EXIT_USAGE;
        }
        // First configuration wins; later in-process calls (tests) keep
        // the existing pool, which is fine because outputs are
        // thread-count independent.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    let output = match resolve_output_path(cli.output.as_deref()) {
        Ok(o) => o,
        Err(msg) => {
            eprintln!("error: {msg}");
            return EXIT_USAGE;
        }
    };

    if let Some(manifest_path) = &cli.manifest {
        return run_replay(manifest_path, cli.command.as_ref(), output.as_deref());
    }
    let Some(command) = cli.command else {
        eprintln!("error: a subcommand (or --manifest) is required; see --help");
        return EXIT_USAGE;
    };
    match resolve_and_execute(command, cli.degrees, output.as_deref()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}

fn resolve_output_path(output: Option<&Path>) -> std::result::Result<Option<PathBuf>, String> {
    let Some(path) = output else {
        return Ok(None);
    };
    if path.is_absolute() {
        return Ok(Some(path.to_path_buf()));
    }
    match std::env::var_os(OUTPUT_DIR_ENV) {
        Some(dir) if !dir.is_empty() => Ok(Some(PathBuf::from(dir).join(path))),
        _ => Ok(Some(path.to_path_buf())),
    }
}

fn scale_pair(pair: (f64, f64), degrees: bool) -> (f64, f64) {
    if degrees {
        (pair.0.to_radians(), pair.1.to_radians())
    } else {
        pair
    }
}

fn resolve_and_execute(
    command: Command,
    degrees: bool,
    output: Option<&Path>,
) -> Result<i32> {
    match command {
        Command::Asymptotics {
            n_values,
            dim,
            interval,
            omega,
            orthant,
            format,
        } => {
            let geometry = match (interval, omega, orthant) {
                (Some(pair), None, false) => {
                    let (lo, hi) = scale_pair(pair, degrees);
                    if dim != 2 {
                        return Err(Error::InvalidArgument {
                            name: "dim",
                            reason: "--interval describes a qubit; use --omega or \
                                     --orthant for higher dimensions"
                                .into(),
                        });
                    }
                    GeometryParam::Interval { lo, hi }
                }
                (None, Some(omega), false) => GeometryParam::Omega { dim, omega },
                (None, None, true) => GeometryParam::Orthant { dim },
                _ => unreachable!("clap enforces the geometry group"),
            };
            let params = AsymptoticsParams { n_values, geometry };
            finish("asymptotics", &params, None, format, output, |started| {
                let payload = execute_asymptotics(&params)?;
                Ok((payload, started, EXIT_OK))
            })
        }
        Command::Capacity {
            n,
            interval,
            orthant,
            dim,
            grid,
            tol,
            max_iter,
            kkt,
            kkt_tol,
            format,
        } => {
            let geometry = match (interval, orthant) {
                (Some(pair), false) => {
                    let (lo, hi) = scale_pair(pair, degrees);
                    if dim != 2 {
                        return Err(Error::InvalidArgument {
                            name: "dim",
                            reason: "--interval describes a qubit; use --orthant \
                                     --dim N for higher dimensions"
                                .into(),
                        });
                    }
                    GeometryParam::Interval { lo, hi }
                }
                (None, true) => GeometryParam::Orthant { dim },
                _ => unreachable!("clap enforces the geometry group"),
            };
            let params = CapacityParams {
                n,
                geometry,
                grid,
                tolerance: tol,
                max_iterations: max_iter,
                kkt,
                kkt_tolerance: kkt_tol,
            };
            finish("capacity", &params, None, format, output, |started| {
                let payload = execute_capacity(&params)?;
                let code = if payload.converged {
                    EXIT_OK
                } else {
                    EXIT_NO_CONVERGENCE
                };
                Ok((payload, started, code))
            })
        }
        Command::Simulate {
            n_values,
            interval,
            codebook,
            load,
            trials,
            seed,
            format,
        } => {
            let (lo, hi) = match interval {
                Some(pair) => scale_pair(pair, degrees),
                None => (0.0, std::f64::consts::FRAC_PI_2),
            };
            let size = match (codebook, load.is_empty()) {
                (Some(m), true) => SimSize::Codebook { m },
                (None, false) => SimSize::Load { loads: load },
                _ => unreachable!("clap enforces the size group"),
            };
            let params = SimulateParams {
                n_values,
                interval_lo: lo,
                interval_hi: hi,
                size,
                trials,
                seed,
            };
            finish("simulate", &params, Some(seed), format, output, |started| {
                let payload = execute_simulate(&params)?;
                Ok((payload, started, EXIT_OK))
            })
        }
        Command::ApproxCheck {
            n_values,
            p,
            interval,
            grid,
            format,
        } => {
            let target = match (p.is_empty(), interval) {
                (false, None) => ApproxTarget::Probs { ps: p },
                (true, Some(pair)) => {
                    let (lo, hi) = scale_pair(pair, degrees);
                    ApproxTarget::Interval { lo, hi, grid }
                }
                _ => unreachable!("clap enforces the target group"),
            };
            let params = ApproxParams { n_values, target };
            finish("approx-check", &params, None, format, output, |started| {
                let payload = execute_approx(&params)?;
                Ok((payload, started, EXIT_OK))
            })
        }
    }
}

/// Runs `body`, stamps the manifest, and emits the report.
fn finish<P, F>(
    subcommand: &str,
    params: &impl Serialize,
    seed: Option<u64>,
    format: OutputFormat,
    output: Option<&Path>,
    body: F,
) -> Result<i32>
where
    P: Serialize + Render,
    F: FnOnce(String) -> Result<(P, String, i32)>,
{
    let started = now_rfc3339();
    let (payload, started, code) = body(started)?;
    let manifest = Manifest {
        tool: "nshot".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        subcommand: subcommand.into(),
        params: serde_json::to_value(params).expect("params serialize"),
        seed,
        format,
        started_at: started,
        finished_at: now_rfc3339(),
    };
    emit(&payload, &manifest, format, output)?;
    Ok(code)
}

fn now_rfc3339() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

fn run_replay(path: &Path, command: Option<&Command>, output: Option<&Path>) -> i32 {
    let doc: ReplayDocument = match fs::read_to_string(path)
        .map_err(|e| format!("cannot read manifest {}: {e}", path.display()))
        .and_then(|text| {
            serde_json::from_str(&text)
                .map_err(|e| format!("cannot parse manifest {}: {e}", path.display()))
        }) {
        Ok(doc) => doc,
        Err(msg) => {
            eprintln!("error: {msg}");
            return EXIT_USAGE;
        }
    };
    if doc.schema != SCHEMA_VERSION {
        eprintln!(
            "error: manifest schema {} unsupported (expected {SCHEMA_VERSION})",
            doc.schema
        );
        return EXIT_USAGE;
    }
    if let Some(cmd) = command {
        let given = match cmd {
            Command::Asymptotics { .. } => "asymptotics",
            Command::Capacity { .. } => "capacity",
            Command::Simulate { .. } => "simulate",
            Command::ApproxCheck { .. } => "approx-check",
        };
        if given != doc.manifest.subcommand {
            eprintln!(
                "error: manifest is for `{}`, not `{given}`; drop the subcommand \
                 or use the matching one",
                doc.manifest.subcommand
            );
            return EXIT_USAGE;
        }
    }
    let format = doc.manifest.format;
    let result = match doc.manifest.subcommand.as_str() {
        "asymptotics" => replay_as::<AsymptoticsParams, _, _>(
            doc.manifest.params,
            "asymptotics",
            None,
            format,
            output,
            execute_asymptotics,
        ),
        "capacity" => replay_as::<CapacityParams, _, _>(
            doc.manifest.params,
            "capacity",
            None,
            format,
            output,
            execute_capacity,
        ),
        "simulate" => {
            let seed = doc.manifest.params.get("seed").and_then(|v| v.as_u64());
            replay_as::<SimulateParams, _, _>(
                doc.manifest.params,
                "simulate",
                seed,
                format,
                output,
                execute_simulate,
            )
        }
        "approx-check" => replay_as::<ApproxParams, _, _>(
            doc.manifest.params,
            "approx-check",
            None,
            format,
            output,
            execute_approx,
        ),
        other => {
            eprintln!("error: manifest names unknown subcommand `{other}`");
            return EXIT_USAGE;
        }
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}

fn replay_as<Params, P, F>(
    raw: serde_json::Value,
    subcommand: &str,
    seed: Option<u64>,
    format: OutputFormat,
    output: Option<&Path>,
    execute: F,
) -> Result<i32>
where
    Params: serde::de::DeserializeOwned + Serialize,
    P: Serialize + Render + HasExitCode,
    F: FnOnce(&Params) -> Result<P>,
{
    let params: Params = serde_json::from_value(raw).map_err(|e| Error::InvalidArgument {
        name: "manifest",
        reason: format!("params do not match `{subcommand}`: {e}"),
    })?;
    finish(subcommand, &params, seed, format, output, |started| {
        let payload = execute(&params)?;
        let code = payload.exit_code();
        Ok((payload, started, code))
    })
}

/// Lets replay recover the non-convergence exit code from the payload.
trait HasExitCode {
    fn exit_code(&self) -> i32 {
        EXIT_OK
    }
}

impl HasExitCode for AsymptoticsPayload {}
impl HasExitCode for SimulatePayload {}
impl HasExitCode for ApproxPayload {}
impl HasExitCode for CapacityPayload {
    fn exit_code(&self) -> i32 {
        if self.converged {
            EXIT_OK
        } else {
            EXIT_NO_CONVERGENCE
        }
    }
}

// --- asymptotics ------------------------------------------------------------

#[derive(Debug, Serialize)]
struct AsymRow {
    n: u64,
    dim: usize,
    geometry: String,
    omega: f64,
    i_sup_nats: f64,
    w: f64,
    small_n_warning: bool,
}

#[derive(Debug, Serialize)]
struct AsymptoticsPayload {
    units: &'static str,
    rows: Vec<AsymRow>,
}

fn execute_asymptotics(params: &AsymptoticsParams) -> Result<AsymptoticsPayload> {
    let mut rows = Vec::with_capacity(params.n_values.len());
    for &n in &params.n_values {
        let inputs = params.geometry.asymptotic_inputs(n)?;
        rows.push(AsymRow {
            n,
            dim: inputs.dim(),
            geometry: params.geometry.descriptor(),
            omega: inputs.omega(),
            i_sup_nats: inputs.i_sup(),
            w: inputs.w(),
            small_n_warning: inputs.small_n_warning(),
        });
    }
    Ok(AsymptoticsPayload {
        units: "nats",
        rows,
    })
}

// --- capacity ---------------------------------------------------------------

#[derive(Debug, Serialize)]
struct KktPayload {
    pass: bool,
    tolerance: f64,
    capacity_estimate_nats: f64,
    support_flatness_nats: f64,
    kkt_gap_nats: f64,
    support_violations: usize,
    off_support_violations: usize,
    probe_violations: usize,
    probes: usize,
}

impl KktPayload {
    fn from_report(report: &KktReport, tolerance: f64) -> Self {
        Self {
            pass: report.pass,
            tolerance,
            capacity_estimate_nats: report.capacity_estimate,
            support_flatness_nats: report.support_flatness,
            kkt_gap_nats: report.kkt_gap,
            support_violations: report.support_violations.len(),
            off_support_violations: report.off_support_violations.len(),
            probe_violations: report.probe_violations.len(),
            probes: report.probe_information.len(),
        }
    }
}

#[derive(Debug, Serialize)]
struct CapacityPayload {
    units: &'static str,
    n: u64,
    dim: usize,
    geometry: String,
    grid_points: usize,
    tolerance: f64,
    max_iterations: u64,
    capacity_nats: f64,
    w_effective: f64,
    predicted_nats: f64,
    gap_nats: f64,
    iterations: u64,
    converged: bool,
    kkt_gap_nats: f64,
    support_flatness_nats: f64,
    optimal_weights: Vec<f64>,
    kkt: Option<KktPayload>,
}

fn capacity_grid(geometry: &GeometryParam, grid: usize) -> Result<DiscreteEnsemble> {
    if grid == 0 {
        return Err(Error::InvalidArgument {
            name: "grid",
            reason: "grid needs at least one point".into(),
        });
    }
    match geometry {
        GeometryParam::Interval { .. } => {
            Ok(uniform_angle_grid(&geometry.angle_interval()?, grid))
        }
        GeometryParam::Orthant { dim } => {
            Ok(uniform_domain_grid(&SphericalDomain::full_orthant(*dim)?, grid))
        }
        GeometryParam::Omega { .. } => Err(Error::InvalidArgument {
            name: "geometry",
            reason: "capacity needs a concrete interval or orthant, not a bare area"
                .into(),
        }),
    }
}

/// Probe states for optimality checks: the interior cell boundaries of
/// the solve grid (exactly between neighboring grid points).
fn capacity_probes(geometry: &GeometryParam, grid: usize) -> Result<DiscreteEnsemble> {
    if grid < 2 {
        return Err(Error::InvalidArgument {
            name: "grid",
            reason: "optimality probes need a grid of at least 2 points per axis".into(),
        });
    }
    let states = match geometry {
        GeometryParam::Interval { .. } => {
            let iv = geometry.angle_interval()?;
            let step = iv.width() / grid as f64;
            (1..grid)
                .map(|j| angle_to_state(iv.lo() + j as f64 * step))
                .collect::<Result<Vec<_>>>()?
        }
        GeometryParam::Orthant { dim } => {
            let axes = dim - 1;
            let step = std::f64::consts::FRAC_PI_2 / grid as f64;
            let boundaries: Vec<f64> = (1..grid).map(|j| j as f64 * step).collect();
            let mut states = Vec::new();
            let mut index = vec![0usize; axes];
            loop {
                let angles: Vec<f64> = index.iter().map(|&i| boundaries[i]).collect();
                states.push(cartesian_to_state(&angles_to_cartesian(&angles))?);
                // odometer over the boundary grid
                let mut axis = axes;
                loop {
                    if axis == 0 {
                        break;
                    }
                    axis -= 1;
                    index[axis] += 1;
                    if index[axis] < boundaries.len() {
                        break;
                    }
                    index[axis] = 0;
                }
                if index.iter().all(|&i| i == 0) {
                    break;
                }
            }
            states
        }
        GeometryParam::Omega { .. } => unreachable!("rejected by capacity_grid"),
    };
    let count = states.len();
    DiscreteEnsemble::new(states, vec![1.0 / count as f64; count])
}

fn execute_capacity(params: &CapacityParams) -> Result<CapacityPayload> {
    let grid = capacity_grid(&params.geometry, params.grid)?;
    let channel = MeasurementChannel::new(params.geometry.dim(), params.n)?;
    let config = SolverConfig {
        tolerance: params.tolerance,
        max_iterations: params.max_iterations,
        ..Default::default()
    };
    let result = blahut_arimoto(&grid, &channel, &config)?;
    let kkt = if params.kkt {
        let probes = capacity_probes(&params.geometry, params.grid)?;
        let report = kkt_verify(
            &result.optimal_weights,
            &grid,
            &channel,
            &probes,
            params.kkt_tolerance,
        )?;
        Some(KktPayload::from_report(&report, params.kkt_tolerance))
    } else {
        None
    };
    let predicted = params.geometry.asymptotic_inputs(params.n)?.i_sup();
    Ok(CapacityPayload {
        units: "nats",
        n: params.n,
        dim: params.geometry.dim(),
        geometry: params.geometry.descriptor(),
        grid_points: grid.len(),
        tolerance: params.tolerance,
        max_iterations: params.max_iterations,
        capacity_nats: result.capacity,
        w_effective: result.capacity.exp(),
        predicted_nats: predicted,
        gap_nats: result.capacity - predicted,
        iterations: result.iterations,
        converged: result.converged,
        kkt_gap_nats: result.kkt_gap,
        support_flatness_nats: result.support_flatness,
        optimal_weights: result.optimal_weights,
        kkt,
    })
}

// --- simulate ---------------------------------------------------------------

#[derive(Debug, Serialize)]
struct SimSweepRow {
    n: u64,
    load: f64,
    m: usize,
    error_rate: f64,
    ci_lo: f64,
    ci_hi: f64,
}

#[derive(Debug, Serialize)]
struct SimSkipped {
    n: u64,
    load: f64,
    reason: String,
}

#[derive(Debug, Serialize)]
#[serde(untagged)]
enum SimulateBody {
    Single(Box<SimulationReport>),
    Sweep {
        rows: Vec<SimSweepRow>,
        skipped: Vec<SimSkipped>,
    },
}

#[derive(Debug, Serialize)]
struct SimulatePayload {
    interval_lo: f64,
    interval_hi: f64,
    trials: u64,
    seed: u64,
    #[serde(flatten)]
    body: SimulateBody,
}

fn execute_simulate(params: &SimulateParams) -> Result<SimulatePayload> {
    let interval = AngleInterval::new(params.interval_lo, params.interval_hi)?;
    let single_load = match &params.size {
        SimSize::Codebook { .. } => params.n_values.len() == 1,
        SimSize::Load { loads } => params.n_values.len() == 1 && loads.len() == 1,
    };
    let body = if single_load {
        let n = params.n_values[0];
        let m = match &params.size {
            SimSize::Codebook { m } => *m,
            SimSize::Load { loads } => {
                let w = Codebook::equal_angles(&interval, 1)?.w_predicted(n);
                let m = (loads[0] * w).floor();
                if m < 1.0 {
                    return Err(Error::InvalidArgument {
                        name: "load",
                        reason: format!(
                            "codebook size floor({} * {w:.3}) < 1; raise --load or --n",
                            loads[0]
                        ),
                    });
                }
                m as usize
            }
        };
        let book = Codebook::equal_angles(&interval, m)?;
        let config = SimulationConfig::new(book, n, params.trials, params.seed)?;
        SimulateBody::Single(Box::new(run_experiment(&config)))
    } else {
        match &params.size {
            SimSize::Load { loads } => {
                let sweep = error_vs_load_sweep(
                    &interval,
                    &params.n_values,
                    loads,
                    params.trials,
                    params.seed,
                )?;
                SimulateBody::Sweep {
                    rows: sweep
                        .rows
                        .iter()
                        .map(|r| SimSweepRow {
                            n: r.n,
                            load: r.load,
                            m: r.m,
                            error_rate: r.error_rate,
                            ci_lo: r.ci.0,
                            ci_hi: r.ci.1,
                        })
                        .collect(),
                    skipped: sweep
                        .skipped
                        .iter()
                        .map(|s| SimSkipped {
                            n: s.n,
                            load: s.load,
                            reason: s.reason.clone(),
                        })
                        .collect(),
                }
            }
            SimSize::Codebook { m } => {
                // fixed codebook size across an n sweep
                let mut rows = Vec::with_capacity(params.n_values.len());
                for (row, &n) in params.n_values.iter().enumerate() {
                    let book = Codebook::equal_angles(&interval, *m)?;
                    let w = book.w_predicted(n);
                    let seed = derive_row_seed(params.seed, row as u64);
                    let config = SimulationConfig::new(book, n, params.trials, seed)?;
                    let report = run_experiment(&config);
                    rows.push(SimSweepRow {
                        n,
                        load: *m as f64 / w,
                        m: *m,
                        error_rate: report.error_rate,
                        ci_lo: report.wilson_ci_95.0,
                        ci_hi: report.wilson_ci_95.1,
                    });
                }
                SimulateBody::Sweep {
                    rows,
                    skipped: Vec::new(),
                }
            }
        }
    };
    Ok(SimulatePayload {
        interval_lo: params.interval_lo,
        interval_hi: params.interval_hi,
        trials: params.trials,
        seed: params.seed,
        body,
    })
}

/// Same construction the load sweep uses for its per-row seeds.
fn derive_row_seed(seed: u64, row: u64) -> u64 {
    let mut z = seed
        ^ row
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(0x632B_E593_86D1_931E);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

// --- approx-check -----------------------------------------------------------

#[derive(Debug, Serialize)]
struct TvRow {
    n: u64,
    p: f64,
    total_variation: f64,
}

#[derive(Debug, Serialize)]
struct MarginalRow {
    n: u64,
    k: u64,
    exact: f64,
    asymptotic: f64,
    rel_error: f64,
}

#[derive(Debug, Serialize)]
#[serde(untagged)]
enum ApproxBody {
    Tv { rows: Vec<TvRow> },
    Marginal { grid: usize, rows: Vec<MarginalRow> },
}

#[derive(Debug, Serialize)]
struct ApproxPayload {
    #[serde(flatten)]
    body: ApproxBody,
}

fn execute_approx(params: &ApproxParams) -> Result<ApproxPayload> {
    let body = match &params.target {
        ApproxTarget::Probs { ps } => {
            let mut rows = Vec::with_capacity(params.n_values.len() * ps.len());
            for &n in &params.n_values {
                for &p in ps {
                    rows.push(TvRow {
                        n,
                        p,
                        total_variation: binomial_gaussian_tv(n, p)?,
                    });
                }
            }
            ApproxBody::Tv { rows }
        }
        ApproxTarget::Interval { lo, hi, grid } => {
            let interval = AngleInterval::new(*lo, *hi)?;
            let ensemble = uniform_angle_grid(&interval, *grid);
            let mut rows = Vec::new();
            for &n in &params.n_values {
                let channel = MeasurementChannel::new(2, n)?;
                let marginal = output_marginal(&ensemble, &channel)?;
                let (p1, p2) = interval.prob_bounds();
                // interior band: central 80% of [n p1, n p2]
                let band = n as f64 * (p2 - p1);
                let k_lo = (n as f64 * p1 + 0.1 * band).ceil() as u64;
                let k_hi = (n as f64 * p1 + 0.9 * band).floor() as u64;
                for k in k_lo..=k_hi.min(n) {
                    let asym = asymptotic_marginal(k, n, &interval)?;
                    if !asym.in_band || asym.endpoint_degenerate {
                        continue;
                    }
                    let exact = marginal.prob_of_k(k);
                    rows.push(MarginalRow {
                        n,
                        k,
                        exact,
                        asymptotic: asym.value,
                        rel_error: (exact - asym.value).abs() / asym.value,
                    });
                }
            }
            ApproxBody::Marginal {
                grid: *grid,
                rows,
            }
        }
    };
    Ok(ApproxPayload { body })
}

// --- rendering --------------------------------------------------------------

/// Renders the payload body as a table or CSV (JSON comes from Serialize).
trait Render {
    fn table(&self) -> String;
    fn csv(&self) -> String;
}

fn fmt_f(v: f64) -> String {
    // shortest roundtrip representation; '.' decimal point guaranteed
    format!("{v}")
}

fn bits(nats: f64) -> f64 {
    nats / LN_2
}

impl Render for AsymptoticsPayload {
    fn table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:>10} {:>4} {:<28} {:>12} {:>12} {:>12} {:>12}  {}\n",
            "n", "N", "geometry", "omega", "I_sup nats", "I_sup bits", "W", "note"
        ));
        for r in &self.rows {
            out.push_str(&format!(
                "{:>10} {:>4} {:<28} {:>12.6} {:>12.4} {:>12.4} {:>12.4}  {}\n",
                r.n,
                r.dim,
                r.geometry,
                r.omega,
                r.i_sup_nats,
                bits(r.i_sup_nats),
                r.w,
                if r.small_n_warning {
                    "warning: n < 50 N, asymptotics unreliable"
                } else {
                    ""
                }
            ));
        }
        out
    }

    fn csv(&self) -> String {
        let mut out = String::from("n,dim,geometry,omega,i_sup_nats,w,small_n_warning\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.n,
                r.dim,
                r.geometry,
                fmt_f(r.omega),
                fmt_f(r.i_sup_nats),
                fmt_f(r.w),
                r.small_n_warning
            ));
        }
        out
    }
}

impl Render for CapacityPayload {
    fn table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "capacity of {} at n = {} ({} grid points)\n",
            self.geometry, self.n, self.grid_points
        ));
        out.push_str(&format!(
            "  capacity    {:>14.6} nats  {:>14.6} bits\n",
            self.capacity_nats,
            bits(self.capacity_nats)
        ));
        out.push_str(&format!("  exp(capacity) {:>12.4} states\n", self.w_effective));
        out.push_str(&format!(
            "  predicted   {:>14.6} nats  (gap {:+.6})\n",
            self.predicted_nats, self.gap_nats
        ));
        out.push_str(&format!(
            "  iterations  {:>14}       (tolerance {:.1e}, {})\n",
            self.iterations,
            self.tolerance,
            if self.converged {
                "converged"
            } else {
                "NOT CONVERGED"
            }
        ));
        out.push_str(&format!(
            "  duality gap {:>14.3e} nats\n",
            self.kkt_gap_nats
        ));
        out.push_str(&format!(
            "  support flatness {:>9.3e} nats\n",
            self.support_flatness_nats
        ));
        if let Some(kkt) = &self.kkt {
            out.push_str(&format!(
                "  optimality  {} at tol {} ({} probes; violations: {} support, \
                 {} off-support, {} probe)\n",
                if kkt.pass { "PASS" } else { "FAIL" },
                kkt.tolerance,
                kkt.probes,
                kkt.support_violations,
                kkt.off_support_violations,
                kkt.probe_violations
            ));
        }
        out
    }

    fn csv(&self) -> String {
        let mut out = String::from(
            "n,dim,geometry,grid_points,tolerance,capacity_nats,w_effective,\
             predicted_nats,gap_nats,iterations,converged,kkt_pass\n",
        );
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}\n",
            self.n,
            self.dim,
            self.geometry,
            self.grid_points,
            fmt_f(self.tolerance),
            fmt_f(self.capacity_nats),
            fmt_f(self.w_effective),
            fmt_f(self.predicted_nats),
            fmt_f(self.gap_nats),
            self.iterations,
            self.converged,
            self.kkt
                .as_ref()
                .map(|k| k.pass.to_string())
                .unwrap_or_default()
        ));
        out
    }
}

impl Render for SimulatePayload {
    fn table(&self) -> String {
        let mut out = String::new();
        match &self.body {
            SimulateBody::Single(r) => {
                out.push_str(&format!(
                    "identification over [{:.6}, {:.6}]: M = {} codewords, n = {}, \
                     {} trials (seed {})\n",
                    self.interval_lo,
                    self.interval_hi,
                    r.codebook_size,
                    r.n,
                    r.trials,
                    self.seed
                ));
                out.push_str(&format!(
                    "  W predicted {:>10.4} states  (load factor {:.4})\n",
                    r.w_predicted, r.load_factor
                ));
                out.push_str(&format!(
                    "  error rate  {:>10.4}  [{:.4}, {:.4}] 95% CI  ({} errors)\n",
                    r.error_rate, r.wilson_ci_95.0, r.wilson_ci_95.1, r.errors
                ));
            }
            SimulateBody::Sweep { rows, skipped } => {
                out.push_str(&format!(
                    "{:>10} {:>8} {:>6} {:>12} {:>10} {:>10}\n",
                    "n", "load", "M", "error_rate", "ci_lo", "ci_hi"
                ));
                for r in rows {
                    out.push_str(&format!(
                        "{:>10} {:>8.3} {:>6} {:>12.4} {:>10.4} {:>10.4}\n",
                        r.n, r.load, r.m, r.error_rate, r.ci_lo, r.ci_hi
                    ));
                }
                for s in skipped {
                    out.push_str(&format!(
                        "skipped n = {}, load = {}: {}\n",
                        s.n, s.load, s.reason
                    ));
                }
            }
        }
        out
    }

    fn csv(&self) -> String {
        match &self.body {
            SimulateBody::Single(r) => {
                let mut out = String::from(
                    "n,codebook_size,trials,seed,errors,error_rate,ci_lo,ci_hi,\
                     w_predicted,load_factor\n",
                );
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{},{}\n",
                    r.n,
                    r.codebook_size,
                    r.trials,
                    self.seed,
                    r.errors,
                    fmt_f(r.error_rate),
                    fmt_f(r.wilson_ci_95.0),
                    fmt_f(r.wilson_ci_95.1),
                    fmt_f(r.w_predicted),
                    fmt_f(r.load_factor)
                ));
                out
            }
            SimulateBody::Sweep { rows, .. } => {
                let mut out = String::from("n,load,m,error_rate,ci_lo,ci_hi\n");
                for r in rows {
                    out.push_str(&format!(
                        "{},{},{},{},{},{}\n",
                        r.n,
                        fmt_f(r.load),
                        r.m,
                        fmt_f(r.error_rate),
                        fmt_f(r.ci_lo),
                        fmt_f(r.ci_hi)
                    ));
                }
                out
            }
        }
    }
}

impl Render for ApproxPayload {
    fn table(&self) -> String {
        let mut out = String::new();
        match &self.body {
            ApproxBody::Tv { rows } => {
                out.push_str(&format!(
                    "{:>10} {:>8} {:>16}\n",
                    "n", "p", "total_variation"
                ));
                for r in rows {
                    out.push_str(&format!(
                        "{:>10} {:>8.4} {:>16.6e}\n",
                        r.n, r.p, r.total_variation
                    ));
                }
            }
            ApproxBody::Marginal { grid, rows } => {
                out.push_str(&format!(
                    "exact vs asymptotic output marginal ({grid}-state ensemble), \
                     interior band\n"
                ));
                out.push_str(&format!(
                    "{:>10} {:>8} {:>14} {:>14} {:>12}\n",
                    "n", "k", "exact", "asymptotic", "rel_error"
                ));
                for r in rows {
                    out.push_str(&format!(
                        "{:>10} {:>8} {:>14.6e} {:>14.6e} {:>12.4e}\n",
                        r.n, r.k, r.exact, r.asymptotic, r.rel_error
                    ));
                }
            }
        }
        out
    }

    fn csv(&self) -> String {
        match &self.body {
            ApproxBody::Tv { rows } => {
                let mut out = String::from("n,p,total_variation\n");
                for r in rows {
                    out.push_str(&format!(
                        "{},{},{}\n",
                        r.n,
                        fmt_f(r.p),
                        fmt_f(r.total_variation)
                    ));
                }
                out
            }
            ApproxBody::Marginal { rows, .. } => {
                let mut out = String::from("n,k,exact,asymptotic,rel_error\n");
                for r in rows {
                    out.push_str(&format!(
                        "{},{},{},{},{}\n",
                        r.n,
                        r.k,
                        fmt_f(r.exact),
                        fmt_f(r.asymptotic),
                        fmt_f(r.rel_error)
                    ));
                }
                out
            }
        }
    }
}

// --- output plumbing --------------------------------------------------------

fn emit<P: Serialize + Render>(
    payload: &P,
    manifest: &Manifest,
    format: OutputFormat,
    output: Option<&Path>,
) -> Result<()> {
    let body = match format {
        OutputFormat::Table => payload.table(),
        OutputFormat::Csv => payload.csv(),
        OutputFormat::Json => {
            let doc = Document {
                schema: SCHEMA_VERSION,
                manifest,
                payload,
            };
            let mut text =
                serde_json::to_string_pretty(&doc).expect("payload serializes");
            text.push('\n');
            text
        }
    };
    match output {
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(body.as_bytes()).map_err(io_error)?;
        }
        Some(path) => {
            fs::write(path, body.as_bytes()).map_err(io_error)?;
            if format != OutputFormat::Json {
                // table/CSV files carry their manifest alongside
                let sidecar = sidecar_path(path);
                let doc = serde_json::json!({
                    "schema": SCHEMA_VERSION,
                    "manifest": manifest,
                });
                let mut text =
                    serde_json::to_string_pretty(&doc).expect("manifest serializes");
                text.push('\n');
                fs::write(&sidecar, text).map_err(io_error)?;
            }
        }
    }
    Ok(())
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    path.with_file_name(name)
}

fn io_error(e: std::io::Error) -> Error {
    Error::InvalidArgument {
        name: "output",
        reason: format!("cannot write output: {e}"),
    }
}

// --- tests -----------------------------------------------------------------
