//! The `funnel` command: run scenarios, re-verify stored trajectories and
//! sweep design parameters.
//!
//! Exit codes: 0 all checks pass, 1 a check failed, 2 unreadable or
//! malformed input, 3 invalid scenario, 4 integration failure.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use funnel_core::bounds;
use funnel_core::report::{self, ReportError, RunReport, Source};
use funnel_core::scenario::{self, Scenario, ScenarioError};
use funnel_core::sim::{Metrics, SimError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECKS: i32 = 1;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_INVALID: i32 = 3;
pub const EXIT_INTEGRATION: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "funnel", version, about = "Input-constrained funnel control simulations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a scenario and check the closed-loop guarantees.
    Run {
        /// Scenario file, or the name of a built-in scenario.
        scenario: String,
        #[command(flatten)]
        common: Common,
        /// Resampling step in milliseconds; overrides the scenario.
        #[arg(long)]
        resample: Option<f64>,
    },
    /// Check a stored trajectory against a scenario without simulating.
    Verify {
        trajectory: PathBuf,
        scenario: String,
        #[command(flatten)]
        common: Common,
    },
    /// Run a scenario over a parameter grid, one directory per point.
    Sweep {
        scenario: String,
        /// Axes separated by `;`, values by `,`, e.g. `M=4,8,16;psi0=2,3.1`.
        /// Keys: alpha, beta, psi0, gains (entries joined by `/`), M.
        #[arg(long, default_value = "")]
        grid: String,
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        resample: Option<f64>,
    },
    /// List the built-in scenarios, or print one as TOML.
    Builtin { name: Option<String> },
}

#[derive(Debug, Args)]
pub struct Common {
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Print nothing but errors.
    #[arg(long)]
    pub quiet: bool,
}

/// An error together with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        let code = match e {
            ScenarioError::Parse(_) => EXIT_PARSE,
            ScenarioError::Invalid(_) => EXIT_INVALID,
        };
        Failure::new(code, e.to_string())
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        let code = match e {
            SimError::Integration { .. } | SimError::Plant(_) | SimError::Interpolation { .. } => EXIT_INTEGRATION,
            _ => EXIT_INVALID,
        };
        Failure::new(code, e.to_string())
    }
}

impl From<ReportError> for Failure {
    fn from(e: ReportError) -> Self {
        Failure::new(EXIT_PARSE, e.to_string())
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::new(EXIT_PARSE, format!("{}: {e}", path.display()))
}

/// Reads a scenario file; falls back to a built-in of that name.
pub fn load_scenario(arg: &str) -> Result<Scenario, Failure> {
    let path = Path::new(arg);
    if path.exists() {
        let text = fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
        return Ok(Scenario::from_toml(&text)?);
    }
    scenario::builtin(arg).ok_or_else(|| {
        Failure::new(
            EXIT_PARSE,
            format!("{arg}: no such file or built-in scenario (built-ins: {})", scenario::BUILTINS.join(", ")),
        )
    })
}

/// Simulates `sc` and writes `trajectory.csv`, `metrics.json`,
/// `report.txt` and `scenario.toml` into `out` when given.
pub fn run_scenario(sc: &Scenario, out: Option<&Path>) -> Result<RunReport, Failure> {
    let built = sc.build()?;
    let params = sc.params()?;
    let result = built.run()?;
    let report = RunReport::new(
        &sc.name,
        &sc.hash(),
        Source::Simulation,
        result.metrics,
        &result.report,
        Some(result.stats),
    );
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))?;
        let csv_path = dir.join("trajectory.csv");
        let file = fs::File::create(&csv_path).map_err(|e| io_failure(&csv_path, e))?;
        report::write_csv(BufWriter::new(file), &result.trajectory, &params)?;
        write(&dir.join("metrics.json"), &report.metrics_json())?;
        write(&dir.join("report.txt"), &report.render())?;
        write(&dir.join("scenario.toml"), &sc.to_toml())?;
    }
    Ok(report)
}

/// Re-checks a stored trajectory against the design in `sc`.
pub fn verify_stored(csv_path: &Path, sc: &Scenario) -> Result<RunReport, Failure> {
    let built = sc.build()?;
    let params = sc.params()?;
    let file = fs::File::open(csv_path).map_err(|e| io_failure(csv_path, e))?;
    let traj = report::read_csv(file, built.plant.order(), built.plant.outputs())?;
    let verification = bounds::verify(&traj, &params, built.controller.saturation(), &built.options.verify);
    let metrics = Metrics::compute(&traj, &params);
    Ok(RunReport::new(
        &sc.name,
        &sc.hash(),
        Source::StoredTrajectory,
        metrics,
        &verification,
        None,
    ))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| io_failure(path, e))
}

fn verdict_code(report: &RunReport) -> i32 {
    if report.passed() {
        EXIT_OK
    } else {
        EXIT_CHECKS
    }
}

/// One grid axis, e.g. `M=4,8,16`.
#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub key: String,
    pub values: Vec<String>,
}

const GRID_KEYS: [&str; 5] = ["alpha", "beta", "psi0", "gains", "M"];

/// Parses `key=v1,v2;key=…`. A blank spec is an empty grid.
pub fn parse_grid(spec: &str) -> Result<Vec<Axis>, Failure> {
    let mut axes = Vec::new();
    for part in spec.split(';').map(str::trim).filter(|p| !p.is_empty()) {
        let (key, vals) = part
            .split_once('=')
            .ok_or_else(|| Failure::new(EXIT_PARSE, format!("grid axis {part:?} lacks '='")))?;
        let key = key.trim();
        if !GRID_KEYS.contains(&key) {
            return Err(Failure::new(
                EXIT_PARSE,
                format!("unknown grid key {key:?} (known: {})", GRID_KEYS.join(", ")),
            ));
        }
        let values: Vec<String> = vals.split(',').map(|v| v.trim().to_string()).filter(|v| !v.is_empty()).collect();
        for v in &values {
            parse_value(key, v)?;
        }
        axes.push(Axis {
            key: key.to_string(),
            values,
        });
    }
    Ok(axes)
}

fn parse_value(key: &str, v: &str) -> Result<Vec<f64>, Failure> {
    let bad = |_| Failure::new(EXIT_PARSE, format!("grid value {v:?} for {key} is not a number"));
    if key == "gains" {
        v.split('/').map(|g| g.trim().parse::<f64>().map_err(bad)).collect()
    } else {
        Ok(vec![v.parse::<f64>().map_err(bad)?])
    }
}

/// Cartesian product of the axes; empty when there are no axes or any axis is empty.
pub fn grid_points(axes: &[Axis]) -> Vec<Vec<(String, String)>> {
    if axes.is_empty() {
        return Vec::new();
    }
    let mut points: Vec<Vec<(String, String)>> = vec![Vec::new()];
    for axis in axes {
        points = points
            .into_iter()
            .flat_map(|p| {
                axis.values.iter().map(move |v| {
                    let mut q = p.clone();
                    q.push((axis.key.clone(), v.clone()));
                    q
                })
            })
            .collect();
    }
    points
}

/// `sc` with the grid point's values substituted.
pub fn apply_point(sc: &Scenario, point: &[(String, String)]) -> Result<Scenario, Failure> {
    let mut s = sc.clone();
    for (key, v) in point {
        let vals = parse_value(key, v)?;
        match key.as_str() {
            "alpha" => s.controller.alpha = vals[0],
            "beta" => s.controller.beta = vals[0],
            "psi0" => s.controller.psi0 = vals[0],
            "gains" => s.controller.gains = vals,
            "M" => s.saturation.level = vals[0],
            _ => unreachable!("keys are checked while parsing"),
        }
    }
    Ok(s)
}

/// Outcome of one sweep point.
#[derive(Debug)]
pub struct PointResult {
    pub label: String,
    pub code: i32,
    pub metrics: Option<Metrics>,
    pub message: Option<String>,
}

/// Runs every grid point in parallel. Returns the results in grid order.
pub fn sweep(sc: &Scenario, axes: &[Axis], out: Option<&Path>) -> Vec<PointResult> {
    grid_points(axes)
        .par_iter()
        .enumerate()
        .map(|(n, point)| {
            let label = point.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(" ");
            let dir = out.map(|o| o.join(format!("point-{n:03}")));
            let res = apply_point(sc, point).and_then(|s| run_scenario(&s, dir.as_deref()));
            match res {
                Ok(rep) => PointResult {
                    label,
                    code: verdict_code(&rep),
                    metrics: Some(rep.metrics),
                    message: None,
                },
                Err(f) => PointResult {
                    label,
                    code: f.code,
                    metrics: None,
                    message: Some(f.message),
                },
            }
        })
        .collect()
}

/// Tab-separated summary of a sweep.
pub fn sweep_table(results: &[PointResult]) -> String {
    let mut s = String::from("point\tparameters\texit\teps_hat\tsat_duty\tlast_sat_time\tmax_abs_u\n");
    for (n, r) in results.iter().enumerate() {
        match &r.metrics {
            Some(m) => s.push_str(&format!(
                "{n}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                r.label,
                r.code,
                m.eps_hat,
                m.sat_duty,
                m.last_sat_time.map_or_else(|| "none".into(), |t| t.to_string()),
                m.max_abs_u
            )),
            None => s.push_str(&format!(
                "{n}\t{}\t{}\t-\t-\t-\t-\t# {}\n",
                r.label,
                r.code,
                r.message.as_deref().unwrap_or("")
            )),
        }
    }
    s
}

fn with_resample(mut sc: Scenario, resample: Option<f64>) -> Scenario {
    if let Some(ms) = resample {
        sc.output.resample_ms = ms;
    }
    sc
}

/// Executes a parsed command and returns the process exit code.
pub fn execute(cli: Cli) -> i32 {
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

fn dispatch(cmd: Command) -> Result<i32, Failure> {
    match cmd {
        Command::Run {
            scenario,
            common,
            resample,
        } => {
            let sc = with_resample(load_scenario(&scenario)?, resample);
            let rep = run_scenario(&sc, common.out.as_deref())?;
            if !common.quiet {
                print!("{}", rep.render());
            }
            Ok(verdict_code(&rep))
        }
        Command::Verify {
            trajectory,
            scenario,
            common,
        } => {
            let sc = load_scenario(&scenario)?;
            let rep = verify_stored(&trajectory, &sc)?;
            if let Some(dir) = &common.out {
                fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))?;
                write(&dir.join("report.txt"), &rep.render())?;
            }
            if !common.quiet {
                print!("{}", rep.render());
            }
            Ok(verdict_code(&rep))
        }
        Command::Sweep {
            scenario,
            grid,
            common,
            resample,
        } => {
            let sc = with_resample(load_scenario(&scenario)?, resample);
            let axes = parse_grid(&grid)?;
            let results = sweep(&sc, &axes, common.out.as_deref());
            let table = sweep_table(&results);
            if let Some(dir) = &common.out {
                fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))?;
                write(&dir.join("summary.tsv"), &table)?;
            }
            if !common.quiet && !results.is_empty() {
                print!("{table}");
            }
            Ok(results.iter().map(|r| r.code).max().unwrap_or(EXIT_OK))
        }
        Command::Builtin { name: None } => {
            for n in scenario::BUILTINS {
                println!("{n}");
            }
            Ok(EXIT_OK)
        }
        Command::Builtin { name: Some(n) } => {
            let text = scenario::builtin_text(&n)
                .ok_or_else(|| Failure::new(EXIT_PARSE, format!("no built-in scenario {n:?}")))?;
            print!("{text}");
            Ok(EXIT_OK)
        }
    }
}
