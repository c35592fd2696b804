use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use locc_core::asymptotics::{
    build_series, build_two_stage_series, compare_extrapolation, extrapolate,
    richardson_extrapolate_in, Scheme,
};
use locc_core::estimator::{evaluate_fixed, evaluate_tree, expand_two_stage};
use locc_core::montecarlo::{
    simulate_fidelity, simulate_with_trace, trace_to_csv, McConfig, Strategy,
};
use locc_core::optimizer::{
    greedy_pilot, known_optimal_tree, n4_ansatz_tree, optimize_one_step_adaptive, optimize_tree,
    Gauge, OptimizationConfig, DEFAULT_COPY_BUDGET, DEFAULT_SEED, MAX_OPTIMIZE_COPIES,
};
use locc_core::strategy::{make_fixed_axes, make_two_stage, round_robin_pilot};
use locc_core::{FidelityReport, Geometry, GuessRule, StrategyTree};

use crate::config::{output_path, resolve, Common, Format};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Builtin {
    FixedAxes,
    OptimalN2,
    OptimalN3,
    N4Ansatz,
    TwoStage,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum GuessArg {
    #[default]
    Og,
    Cl,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum PilotKind {
    /// One-step adaptive tree.
    #[default]
    Greedy,
    /// Canonical axes in turn.
    RoundRobin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Coordinate-wise optimization of the whole tree.
    #[default]
    Full,
    /// Greedy: each axis optimal as if it were the last.
    OneStep,
}

/// Flags shared by every subcommand; unset ones are left to the config file.
#[derive(Debug, Args, Serialize)]
pub struct CommonArgs {
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    format: Option<Format>,
    /// Output file; relative paths resolve under $LOCC_OUTPUT_DIR when set.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    output: Option<PathBuf>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    threads: Option<usize>,
}

/// How to obtain a strategy: a JSON file or a built-in.
#[derive(Debug, Args, Serialize)]
pub struct StrategyArgs {
    /// Strategy tree JSON file.
    #[arg(long, conflicts_with = "builtin")]
    #[serde(skip_serializing_if = "Option::is_none")]
    strategy: Option<PathBuf>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    builtin: Option<Builtin>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    geometry: Option<Geometry>,
    /// Repetitions per axis (fixed-axes).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    per_axis: Option<usize>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    guess: Option<GuessArg>,
    /// Ansatz angles (n4-ansatz).
    #[arg(long, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    beta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    gamma: Option<f64>,
    /// Total copies (two-stage).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
    /// Pilot copies (two-stage).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    n0: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    lambda: Option<f64>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pilot: Option<PilotKind>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StrategySpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    strategy: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    builtin: Option<Builtin>,
    geometry: Geometry,
    per_axis: usize,
    guess: GuessArg,
    alpha: f64,
    beta: f64,
    gamma: f64,
    n: usize,
    n0: usize,
    lambda: f64,
    pilot: PilotKind,
}

impl Default for StrategySpec {
    fn default() -> Self {
        StrategySpec {
            strategy: None,
            builtin: None,
            geometry: Geometry::Full,
            per_axis: 1,
            guess: GuessArg::Og,
            alpha: 0.502,
            beta: 0.584,
            gamma: 0.538,
            n: 144,
            n0: 12,
            lambda: 1.0,
            pilot: PilotKind::Greedy,
        }
    }
}

impl StrategySpec {
    fn guess_rule(&self) -> GuessRule {
        match self.guess {
            GuessArg::Og => GuessRule::OptimalGuess,
            GuessArg::Cl => GuessRule::CentralLimit,
        }
    }

    fn build(&self) -> Result<Strategy, CliError> {
        if let Some(path) = &self.strategy {
            return Ok(Strategy::Tree(read_strategy(path)?));
        }
        let builtin = self
            .builtin
            .ok_or_else(|| CliError::Input("give --strategy <file> or --builtin <name>".into()))?;
        let full_only = |name: &str| {
            if self.geometry == Geometry::Full {
                Ok(())
            } else {
                Err(CliError::Input(format!("{name} is a full-sphere strategy")))
            }
        };
        Ok(match builtin {
            Builtin::FixedAxes => Strategy::Fixed(make_fixed_axes(self.geometry, self.per_axis)?),
            Builtin::OptimalN2 => {
                full_only("optimal-n2")?;
                Strategy::Tree(known_optimal_tree(2)?)
            }
            Builtin::OptimalN3 => {
                full_only("optimal-n3")?;
                Strategy::Tree(known_optimal_tree(3)?)
            }
            Builtin::N4Ansatz => {
                full_only("n4-ansatz")?;
                Strategy::Tree(n4_ansatz_tree(self.alpha, self.beta, self.gamma)?)
            }
            Builtin::TwoStage => {
                let pilot = match self.pilot {
                    PilotKind::Greedy => greedy_pilot(self.geometry, self.n0)?,
                    PilotKind::RoundRobin => round_robin_pilot(self.geometry, self.n0)?,
                };
                Strategy::TwoStage(make_two_stage(self.geometry, self.n, self.lambda, pilot)?)
            }
        })
    }
}

fn read_strategy(path: &Path) -> Result<StrategyTree, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    StrategyTree::from_json(&text).map_err(|e| match CliError::from(e) {
        CliError::Input(m) => CliError::Input(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn init_threads(common: &Common) -> Result<(), CliError> {
    if let Some(t) = common.threads {
        if t == 0 {
            return Err(CliError::Input("--threads must be at least 1".into()));
        }
        // Fails only if a pool already exists, which is harmless.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global();
    }
    Ok(())
}

/// The resolved configuration as one JSON object.
fn echo(first: &impl Serialize, second: &impl Serialize) -> Value {
    let mut map = Map::new();
    for part in [serde_json::to_value(first), serde_json::to_value(second)] {
        if let Ok(Value::Object(m)) = part {
            map.extend(m);
        }
    }
    Value::Object(map)
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    let path = output_path(path);
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
    }
    fs::write(&path, text)
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

/// Writes the payload for the selected format to `--output` or stdout.
fn emit(
    common: &Common,
    json: Value,
    csv: impl FnOnce() -> String,
    human: impl FnOnce() -> String,
) -> Result<(), CliError> {
    let text = match common.format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&json).expect("serializable payload");
            s.push('\n');
            s
        }
        Format::Csv => csv(),
        Format::Human => human(),
    };
    match &common.output {
        Some(path) => write_text(path, &text),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Io(e.to_string())),
    }
}

fn csv_config_line(config: &Value) -> String {
    format!("# config: {config}\n")
}

fn human_report(report: &FidelityReport) -> String {
    format!(
        "F = {}\nN = {}\ngeometry = {}\nmethod = {}\nguess = {}\nquadrature degree = {}\nbranches = {}\ntotal probability = {}\n",
        report.fidelity,
        report.copies,
        report.geometry,
        report.method,
        report.guess,
        report.quadrature_degree,
        report.branches.len(),
        report.total_probability()
    )
}

// ---------------------------------------------------------------- evaluate

#[derive(Debug, Args, Serialize)]
pub struct EvaluateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    #[serde(flatten)]
    strategy: StrategyArgs,
}

pub fn evaluate(file: Map<String, Value>, args: EvaluateArgs) -> Result<(), CliError> {
    let (common, spec): (Common, StrategySpec) = resolve(file, &args)?;
    init_threads(&common)?;
    let guess = spec.guess_rule();
    let report = match spec.build()? {
        Strategy::Tree(tree) => evaluate_tree(&tree, &guess)?,
        Strategy::Fixed(fixed) => evaluate_fixed(&fixed, &guess)?,
        Strategy::TwoStage(s) => {
            if spec.guess != GuessArg::Og {
                return Err(CliError::Input(
                    "the two-stage scheme forms its own guess".into(),
                ));
            }
            let (tree, map) = expand_two_stage(&s)?;
            let mut report = evaluate_tree(&tree, &GuessRule::Fixed(map))?;
            report.guess = "two-stage".into();
            report
        }
    };
    let config = echo(&common, &spec);
    emit(
        &common,
        json!({ "config": config, "report": report }),
        || csv_config_line(&config) + &report.to_csv(),
        || human_report(&report),
    )
}

// ---------------------------------------------------------------- optimize

#[derive(Debug, Args, Serialize)]
pub struct OptimizeArgs {
    #[command(flatten)]
    #[serde(flatten)]
    common: CommonArgs,
    /// Number of copies.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    geometry: Option<Geometry>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    mode: Option<Mode>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    restarts: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    /// Maximum sweeps per restart.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    max_iterations: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    f_tolerance: Option<f64>,
    #[arg(long, value_parser = parse_gauge)]
    #[serde(skip_serializing_if = "Option::is_none")]
    gauge: Option<Gauge>,
    /// Acknowledge runs beyond the default budget of 6 copies (up to 8).
    #[arg(long)]
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    allow_large: bool,
    /// Fidelity table the result is appended to.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    table: Option<PathBuf>,
    /// Also write the optimized tree as a strategy JSON file.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    save_strategy: Option<PathBuf>,
}

fn parse_gauge(s: &str) -> Result<Gauge, String> {
    match s {
        "fix-root" | "fix_root" => Ok(Gauge::FixRoot),
        "free" => Ok(Gauge::Free),
        _ => Err(format!("unknown gauge `{s}` (expected fix-root or free)")),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizeSettings {
    n: Option<usize>,
    geometry: Geometry,
    mode: Mode,
    restarts: usize,
    seed: u64,
    max_iterations: usize,
    f_tolerance: f64,
    gauge: Gauge,
    allow_large: bool,
    table: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    save_strategy: Option<PathBuf>,
}

impl Default for OptimizeSettings {
    fn default() -> Self {
        let cfg = OptimizationConfig::default();
        OptimizeSettings {
            n: None,
            geometry: Geometry::Full,
            mode: Mode::Full,
            restarts: cfg.restarts,
            seed: cfg.seed,
            max_iterations: cfg.max_iterations,
            f_tolerance: cfg.f_tolerance,
            gauge: cfg.gauge,
            allow_large: false,
            table: PathBuf::from("fidelity_table.csv"),
            save_strategy: None,
        }
    }
}

const TABLE_HEADER: &str = "geometry,N,mode,fidelity,converged,restarts,seed,iterations\n";

pub fn optimize(file: Map<String, Value>, args: OptimizeArgs) -> Result<(), CliError> {
    let (common, s): (Common, OptimizeSettings) = resolve(file, &args)?;
    init_threads(&common)?;
    let n =
        s.n.ok_or_else(|| CliError::Input("--n is required".into()))?;
    let cfg = OptimizationConfig {
        max_iterations: s.max_iterations,
        f_tolerance: s.f_tolerance,
        restarts: s.restarts,
        seed: s.seed,
        gauge: s.gauge,
        copy_budget: if s.allow_large {
            MAX_OPTIMIZE_COPIES
        } else {
            DEFAULT_COPY_BUDGET
        },
    };
    let result = match s.mode {
        Mode::Full => optimize_tree(s.geometry, n, &GuessRule::OptimalGuess, &cfg)?,
        Mode::OneStep => optimize_one_step_adaptive(s.geometry, n, &cfg)?,
    };
    let doc = result.to_document();

    let table = output_path(&s.table);
    let fresh = !table.exists();
    let mut handle = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&table)
        .map_err(|e| CliError::Io(format!("cannot open {}: {e}", table.display())))?;
    let mode = match s.mode {
        Mode::Full => "full",
        Mode::OneStep => "one-step",
    };
    let row = format!(
        "{}{},{},{},{},{},{},{},{}\n",
        if fresh { TABLE_HEADER } else { "" },
        s.geometry,
        n,
        mode,
        doc.fidelity,
        doc.converged,
        s.restarts,
        s.seed,
        doc.iterations
    );
    handle
        .write_all(row.as_bytes())
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", table.display())))?;
    if let Some(path) = &s.save_strategy {
        write_text(path, &result.strategy.to_json()?)?;
    }

    let config = echo(&common, &s);
    emit(
        &common,
        json!({ "config": config, "result": doc }),
        || {
            let mut out = csv_config_line(&config);
            out.push_str(&format!(
                "# F={},N={},converged={}\nhistory,x,y,z,polar,azimuth\n",
                doc.fidelity, doc.copies, doc.converged
            ));
            for node in &doc.nodes {
                let [x, y, z] = node.direction;
                out.push_str(&format!(
                    "{},{x},{y},{z},{},{}\n",
                    node.history, node.polar, node.azimuth
                ));
            }
            out
        },
        || {
            format!(
                "F = {}\nN = {}\nmode = {mode}\nconverged = {}\nsweeps = {}\nbest restart = {} of {}\n",
                doc.fidelity,
                doc.copies,
                doc.converged,
                doc.iterations,
                doc.best_restart,
                doc.restart_fidelities.len()
            )
        },
    )
}

// ---------------------------------------------------------------- simulate

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    #[serde(flatten)]
    strategy: StrategyArgs,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    samples: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    batch_size: Option<usize>,
    /// Write one CSV row per sample to this file (small runs only).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    trace: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleSettings {
    samples: usize,
    seed: u64,
    batch_size: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    trace: Option<PathBuf>,
}

impl Default for SampleSettings {
    fn default() -> Self {
        let mc = McConfig::default();
        SampleSettings {
            samples: mc.samples,
            seed: mc.seed,
            batch_size: mc.batch_size,
            trace: None,
        }
    }
}

const SAMPLE_KEYS: [&str; 4] = ["samples", "seed", "batch_size", "trace"];

/// Splits `map` into the keys in `keys` and the rest.
fn split_keys(map: &mut Map<String, Value>, keys: &[&str]) -> Map<String, Value> {
    keys.iter()
        .filter_map(|k| map.remove(*k).map(|v| (k.to_string(), v)))
        .collect()
}

pub fn simulate(file: Map<String, Value>, args: SimulateArgs) -> Result<(), CliError> {
    let mut merged = file;
    if let Ok(Value::Object(m)) = serde_json::to_value(&args) {
        merged.extend(m);
    }
    let sample_part = split_keys(&mut merged, &SAMPLE_KEYS);
    let (common, spec): (Common, StrategySpec) = resolve(merged, &json!({}))?;
    let sampling: SampleSettings = serde_json::from_value(Value::Object(sample_part))
        .map_err(|e| CliError::Input(format!("config: {e}")))?;
    init_threads(&common)?;

    let strategy = spec.build()?;
    let cfg = McConfig {
        samples: sampling.samples,
        seed: sampling.seed,
        batch_size: sampling.batch_size,
    };
    let guess = spec.guess_rule();
    let result = match &sampling.trace {
        Some(path) => {
            let (r, rows) = simulate_with_trace(&strategy, &guess, &cfg)?;
            write_text(path, &trace_to_csv(&rows))?;
            r
        }
        None => simulate_fidelity(&strategy, &guess, &cfg)?,
    };
    let n = strategy.copies() as f64;
    let config = echo(&common, &echo(&spec, &sampling));
    emit(
        &common,
        json!({ "config": config, "N": strategy.copies(), "result": result }),
        || {
            csv_config_line(&config)
                + "N,mean,stderr,batch_stderr,samples,seed\n"
                + &format!(
                    "{},{},{},{},{},{}\n",
                    strategy.copies(),
                    result.mean,
                    result.stderr,
                    result.batch_stderr,
                    result.samples,
                    result.seed
                )
        },
        || {
            format!(
                "F = {} ± {}\nN = {}\nN(1 - F) = {} ± {}\nsamples = {}\nseed = {}\n",
                result.mean,
                result.stderr,
                strategy.copies(),
                n * (1.0 - result.mean),
                n * result.stderr,
                result.samples,
                result.seed
            )
        },
    )
}

// ------------------------------------------------------------- asymptotics

#[derive(Debug, Args, Serialize)]
pub struct AsymptoticsArgs {
    #[command(flatten)]
    #[serde(flatten)]
    common: CommonArgs,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    scheme: Option<Scheme>,
    /// Comma-separated N values; defaults to the scheme's grid.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    grid: Option<Vec<usize>>,
    /// Richardson order; defaults to 2.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    order: Option<usize>,
    /// Monte Carlo samples per point (two-stage).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    samples: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    n0: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    lambda: Option<f64>,
    /// Also write the JSON summary to this file.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    summary: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AsymptoticsSettings {
    scheme: Option<Scheme>,
    #[serde(skip_serializing_if = "Option::is_none")]
    grid: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    order: Option<usize>,
    samples: usize,
    seed: u64,
    n0: usize,
    lambda: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    summary: Option<PathBuf>,
}

impl Default for AsymptoticsSettings {
    fn default() -> Self {
        AsymptoticsSettings {
            scheme: None,
            grid: None,
            order: None,
            samples: 200_000,
            seed: DEFAULT_SEED,
            n0: 12,
            lambda: 1.0,
            summary: None,
        }
    }
}

pub fn asymptotics(file: Map<String, Value>, args: AsymptoticsArgs) -> Result<(), CliError> {
    let (common, mut s): (Common, AsymptoticsSettings) = resolve(file, &args)?;
    init_threads(&common)?;
    let scheme = s
        .scheme
        .ok_or_else(|| CliError::Input("--scheme is required".into()))?;
    let grid = s.grid.clone().unwrap_or_else(|| scheme.default_grid());
    s.grid = Some(grid.clone());
    let series = match scheme {
        Scheme::TwoStage => {
            let pilot = greedy_pilot(Geometry::Full, s.n0)?;
            let mc = McConfig {
                samples: s.samples,
                seed: s.seed,
                ..McConfig::default()
            };
            build_two_stage_series(&grid, &pilot, s.lambda, &mc)?
        }
        _ => build_series(scheme, &grid)?,
    };
    let ex = match s.order {
        Some(order) => richardson_extrapolate_in(&series, order, scheme.expansion())?,
        None => extrapolate(&series)?,
    };
    let summary = compare_extrapolation(scheme, &ex);
    if let Some(path) = &s.summary {
        let text = serde_json::to_string_pretty(&summary).expect("serializable summary") + "\n";
        write_text(path, &text)?;
    }
    let config = echo(&common, &s);
    let increasing = series.is_increasing();
    emit(
        &common,
        json!({
            "config": config,
            "series": series.entries,
            "increasing": increasing,
            "extrapolation": ex,
            "summary": summary,
        }),
        || {
            let summary_json = serde_json::to_string(&summary).expect("serializable summary");
            csv_config_line(&config) + &format!("# summary: {summary_json}\n") + &series.to_csv()
        },
        || {
            let mut out = format!("scheme = {scheme}\n{:>5}  {:<20} {}\n", "N", "F", "N(1-F)");
            for e in &series.entries {
                out.push_str(&format!(
                    "{:>5}  {:<20} {}\n",
                    e.copies, e.fidelity, e.coefficient
                ));
            }
            out.push_str(&format!(
                "c = {} (order {}, {:?})\nexpected = {}\nCM coefficient = {}, ratio = {}\nsaturates CM = {}\npass = {}\n",
                summary.c_extrapolated,
                summary.order,
                summary.expansion,
                summary.expected,
                summary.cm_coefficient,
                summary.ratio,
                summary.saturates,
                summary.pass
            ));
            out
        },
    )
}
