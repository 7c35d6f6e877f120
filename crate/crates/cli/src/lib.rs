//! The `nsdde` command line: simulate paths, run convergence studies and
//! audit model assumptions. Output is CSV only.
//!
//! Exit codes: 0 on success, 1 on a validation error (nothing is written),
//! 2 on a runtime failure (partial output is suffixed `.failed`).

mod registry;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use nsdde_core::{
    audit_assumption, sample_brownian_steps, sample_jumps, simulate, simulate_jump,
    simulate_jump_untruncated, simulate_untruncated, strong_error_study, AssumptionId,
    AssumptionParams, CoefficientSet, CompensatorOracle, Driver, ErrorMode, GaugeForm, GaugeMode,
    InitialSegment, MarkDistribution, MarkMeasure, PathRecord, SampleBox, StudyConfig, TimeGrid,
    TruncationRule,
};

pub use registry::MODELS;

/// Environment variable capping the worker pool; `0` or unset means auto.
pub const THREADS_VAR: &str = "NSDDE_THREADS";

#[derive(Debug)]
enum Failure {
    Validation(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Validation(_) => 1,
            Failure::Runtime(_) => 2,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Validation(m) => write!(f, "validation error: {m}"),
            Failure::Runtime(m) => write!(f, "runtime failure: {m}"),
        }
    }
}

impl From<nsdde_core::Error> for Failure {
    fn from(e: nsdde_core::Error) -> Self {
        if e.is_validation() {
            Failure::Validation(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure::Validation(msg.into())
}

fn io_failure(path: &Path, e: impl fmt::Display) -> Failure {
    Failure::Runtime(format!("{}: {e}", path.display()))
}

type CliResult<T> = Result<T, Failure>;

#[derive(Parser, Debug)]
#[command(
    name = "nsdde",
    version,
    about = "Truncated Euler-Maruyama schemes for neutral stochastic delay equations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate sample paths and write them to `simulate.csv`.
    Simulate(SimulateArgs),
    /// Run a coupled strong-error study; writes `converge.csv` and `rate.csv`.
    Converge(ConvergeArgs),
    /// Audit assumption inequalities on a box; writes `assumptions.csv`.
    CheckAssumptions(CheckArgs),
    /// Print the model registry.
    ListModels,
}

#[derive(Args, Debug)]
struct ModelArgs {
    /// Model id, see `list-models`.
    #[arg(long)]
    model: String,
    /// Parameter of example-a.
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    a: f64,
}

#[derive(Args, Debug)]
struct NoiseArgs {
    /// `brownian` or `jump`; defaults to what the model needs.
    #[arg(long)]
    driver: Option<String>,
    /// Jump intensity λ̄.
    #[arg(long, default_value_t = 1.0)]
    intensity: f64,
    /// Mark law: `gauss:s`, `uniform:a,b` or `point:c`.
    #[arg(
        long = "mark-dist",
        default_value = "gauss:1",
        allow_hyphen_values = true
    )]
    mark_dist: String,
    /// Moment exponent of the jump gauge constraint `Δ^{1/4}·g(Δ)^p ≤ 1`.
    #[arg(long, default_value_t = 3.0)]
    p: f64,
    /// Quadrature nodes for the compensator.
    #[arg(long, default_value_t = 32)]
    nodes: usize,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    noise: NoiseArgs,
    /// Delay τ.
    #[arg(long, default_value_t = 1.0)]
    tau: f64,
    /// Horizon T.
    #[arg(long = "T", default_value_t = 2.0)]
    horizon: f64,
    /// Steps per delay.
    #[arg(long)]
    m: usize,
    /// Gauge exponent, `g(Δ) = Δ^{−ε}`.
    #[arg(long, default_value_t = 0.05)]
    epsilon: f64,
    /// Run the plain scheme without truncation.
    #[arg(long)]
    untruncated: bool,
    /// Constant initial value on `[−τ, 0]`.
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    xi: f64,
    #[arg(long, default_value_t = 1)]
    paths: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ConvergeArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    noise: NoiseArgs,
    #[arg(long, default_value_t = 1.0)]
    tau: f64,
    #[arg(long = "T", default_value_t = 2.0)]
    horizon: f64,
    /// Comma-separated steps per delay, e.g. `8,16,32`.
    #[arg(long, value_delimiter = ',', required = true)]
    levels: Vec<usize>,
    /// Steps per delay of the reference solution.
    #[arg(long = "ref")]
    m_ref: usize,
    #[arg(long)]
    epsilon: f64,
    /// `standard` (`Δ^{−ε}`) or `improved` (`Δ^{−ε/2}`).
    #[arg(long, default_value = "standard")]
    gauge: String,
    /// Error exponent.
    #[arg(long, default_value_t = 2.0)]
    q: f64,
    /// `at-t` or `uniform`.
    #[arg(long, default_value = "at-t")]
    mode: String,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    xi: f64,
    #[arg(long, default_value_t = 100)]
    paths: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Bootstrap replicates for the slope interval.
    #[arg(long, default_value_t = 1000)]
    bootstrap: usize,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct CheckArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Comma-separated ids (`A1`, `A4'`, `B2`, ...) or `all`.
    #[arg(long, value_delimiter = ',', default_value = "all")]
    assumptions: Vec<String>,
    /// Half-width of the sampling box `[−w, w]^n × [−w, w]^n`.
    #[arg(long = "box", default_value_t = 50.0)]
    half_width: f64,
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Step of the truncation rule audited by A4, A4' and B2.
    #[arg(long, default_value_t = 1.0 / 64.0)]
    delta: f64,
    #[arg(long, default_value_t = 0.05)]
    epsilon: f64,
    #[arg(long, default_value_t = 3.0)]
    p: f64,
    #[arg(long, default_value_t = 2.0)]
    q: f64,
    #[arg(long, default_value_t = 1.0)]
    l: f64,
    #[arg(long, default_value_t = 1.0)]
    l1: f64,
    #[arg(long = "l1-bar", default_value_t = 1.0)]
    l1_bar: f64,
    #[arg(long, default_value_t = 1.0)]
    l2: f64,
    #[arg(long, default_value_t = 1.0)]
    l3: f64,
    #[arg(long, default_value_t = 1.0)]
    l4: f64,
    #[arg(long = "l-global", default_value_t = 1.0)]
    l_global: f64,
    #[arg(long, default_value_t = 1.0)]
    k1: f64,
    #[arg(long, default_value_t = 1.0)]
    k2: f64,
    #[arg(long, default_value_t = 1.0)]
    intensity: f64,
    #[arg(
        long = "mark-dist",
        default_value = "gauss:1",
        allow_hyphen_values = true
    )]
    mark_dist: String,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

/// Runs the CLI on `argv` (program name first) and returns the exit code.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    let result = configure_threads().and_then(|()| match cli.command {
        Command::Simulate(a) => run_simulate(&a),
        Command::Converge(a) => run_converge(&a),
        Command::CheckAssumptions(a) => run_check(&a),
        Command::ListModels => {
            for (id, summary) in MODELS {
                println!("{id}\t{summary}");
            }
            Ok(())
        }
    });
    match result {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("nsdde: {f}");
            f.code()
        }
    }
}

fn configure_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| invalid(format!("{THREADS_VAR} = `{raw}` is not a thread count")))?;
    if n > 0 {
        // A second call in the same process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    Ok(())
}

fn fmt_f(v: f64) -> String {
    format!("{v:.16e}")
}

fn load_model(args: &ModelArgs) -> CliResult<Arc<CoefficientSet>> {
    registry::build(&args.model, args.a)
        .map(Arc::new)
        .map_err(invalid)
}

fn check_positive(name: &str, v: f64) -> CliResult<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("--{name} = {v} must be finite and > 0")))
    }
}

fn initial_segment(tau: f64, xi: f64, dim: usize) -> CliResult<InitialSegment> {
    if !xi.is_finite() {
        return Err(invalid(format!("--xi = {xi} must be finite")));
    }
    Ok(InitialSegment::constant(tau, vec![xi; dim])?)
}

fn mark_measure(intensity: f64, dist: &str) -> CliResult<MarkMeasure> {
    let law: MarkDistribution = dist.parse()?;
    Ok(MarkMeasure::new(intensity, law)?)
}

/// Resolves `--driver` against the model.
fn driver(set: &CoefficientSet, noise: &NoiseArgs) -> CliResult<Driver> {
    let jump = match noise.driver.as_deref() {
        None => set.is_jump(),
        Some("brownian") => false,
        Some("jump") => true,
        Some(other) => {
            return Err(invalid(format!(
                "unknown driver `{other}` (brownian or jump)"
            )))
        }
    };
    if jump != set.is_jump() {
        return Err(invalid(format!(
            "model `{}` is {}-driven but --driver {} was given",
            set.name(),
            if set.is_jump() { "jump" } else { "brownian" },
            if jump { "jump" } else { "brownian" }
        )));
    }
    if !jump {
        return Ok(Driver::Brownian);
    }
    if !(noise.p >= 2.0) || !noise.p.is_finite() {
        return Err(invalid(format!("--p = {} must be ≥ 2", noise.p)));
    }
    if noise.nodes == 0 {
        return Err(invalid("--nodes must be ≥ 1"));
    }
    Ok(Driver::Jump {
        measure: mark_measure(noise.intensity, &noise.mark_dist)?,
        p: noise.p,
        quadrature_nodes: noise.nodes,
    })
}

fn gauge_mode(driver: &Driver) -> GaugeMode {
    match driver {
        Driver::Brownian => GaugeMode::Brownian,
        Driver::Jump { p, .. } => GaugeMode::Jump { p: *p },
    }
}

/// Creates the output directory; only called once validation has passed.
fn prepare_out(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))
}

fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_failure(path, e))?;
    w.write_record(header).map_err(|e| io_failure(path, e))?;
    for row in rows {
        w.write_record(row).map_err(|e| io_failure(path, e))?;
    }
    w.flush().map_err(|e| io_failure(path, e))
}

fn failed_name(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".failed");
    PathBuf::from(name)
}

fn run_simulate(args: &SimulateArgs) -> CliResult<()> {
    let set = load_model(&args.model)?;
    check_positive("tau", args.tau)?;
    if args.m == 0 {
        return Err(invalid("--m must be ≥ 1"));
    }
    if args.paths == 0 {
        return Err(invalid("--paths must be ≥ 1"));
    }
    let grid = TimeGrid::new(args.tau, args.horizon, args.m)?;
    let drv = driver(&set, &args.noise)?;
    let xi = initial_segment(args.tau, args.xi, set.state_dim())?;
    let rule = if args.untruncated {
        None
    } else {
        Some(TruncationRule::power(
            &set,
            grid.delta(),
            args.epsilon,
            gauge_mode(&drv),
        )?)
    };
    let oracle = match &drv {
        Driver::Jump {
            measure,
            quadrature_nodes,
            ..
        } => Some(CompensatorOracle::quadrature(measure, *quadrature_nodes)?),
        Driver::Brownian => None,
    };

    let results: Vec<nsdde_core::Result<PathRecord>> = (0..args.paths as u64)
        .into_par_iter()
        .map(|path| match &drv {
            Driver::Brownian => {
                let w = sample_brownian_steps(
                    args.seed,
                    path,
                    args.horizon,
                    grid.steps(),
                    set.noise_dim(),
                )?;
                match &rule {
                    Some(rule) => simulate(&set, rule, &grid, &xi, &w),
                    None => simulate_untruncated(&set, &grid, &xi, &w),
                }
            }
            Driver::Jump { measure, .. } => {
                let jumps = sample_jumps(args.seed, path, args.horizon, measure)?;
                let oracle = oracle.as_ref().expect("jump oracle");
                match &rule {
                    Some(rule) => {
                        simulate_jump(&set, rule, &grid, &xi, &jumps, oracle, args.seed, path)
                    }
                    None => {
                        simulate_jump_untruncated(&set, &grid, &xi, &jumps, oracle, args.seed, path)
                    }
                }
            }
        })
        .collect();

    let (g, radius) = match &rule {
        Some(r) => (r.g(), r.radius()),
        None => (f64::INFINITY, f64::INFINITY),
    };
    let jump = set.is_jump();
    let mut header: Vec<String> = ["path", "k", "t"].iter().map(|s| s.to_string()).collect();
    header.extend((0..set.state_dim()).map(|i| format!("y{i}")));
    if jump {
        header.push("jumps_in_interval".into());
    }
    header.extend(
        ["delta", "g_delta", "radius", "seed"]
            .iter()
            .map(|s| s.to_string()),
    );

    let mut rows = Vec::new();
    let mut failure = None;
    for (path, rec) in results.into_iter().enumerate() {
        let rec = match rec {
            Ok(rec) => rec,
            Err(nsdde_core::Error::NumericalBlowup { step, .. }) => {
                failure = Some(Failure::Runtime(format!(
                    "numerical blow-up at step k = {step} (path {path})"
                )));
                break;
            }
            Err(e) => {
                failure = Some(e.into());
                break;
            }
        };
        let counts = rec.jumps_per_interval();
        for k in -(args.m as i64)..=grid.steps() as i64 {
            let mut row = vec![path.to_string(), k.to_string(), fmt_f(grid.time(k))];
            row.extend(rec.value(k).iter().map(|v| fmt_f(*v)));
            if jump {
                let n = match counts {
                    Some(c) if k >= 1 => c[k as usize - 1],
                    _ => 0,
                };
                row.push(n.to_string());
            }
            row.extend([
                fmt_f(grid.delta()),
                fmt_f(g),
                fmt_f(radius),
                args.seed.to_string(),
            ]);
            rows.push(row);
        }
    }

    if let Some(Failure::Validation(m)) = &failure {
        return Err(invalid(m.clone()));
    }
    prepare_out(&args.out)?;
    let target = args.out.join("simulate.csv");
    if let Some(Failure::Runtime(m)) = failure {
        let partial = failed_name(&target);
        write_csv(&partial, &header, &rows)?;
        return Err(Failure::Runtime(format!(
            "{m}; partial output in {}",
            partial.display()
        )));
    }
    write_csv(&target, &header, &rows)?;
    println!(
        "simulate: {} paths of `{}` with Δ = {}, r = {} -> {}",
        args.paths,
        set.name(),
        grid.delta(),
        radius,
        target.display()
    );
    Ok(())
}

fn run_converge(args: &ConvergeArgs) -> CliResult<()> {
    let set = load_model(&args.model)?;
    check_positive("tau", args.tau)?;
    let mode: ErrorMode = args.mode.parse()?;
    let gauge: GaugeForm = args.gauge.parse()?;
    let drv = driver(&set, &args.noise)?;
    let xi = initial_segment(args.tau, args.xi, set.state_dim())?;
    if args.bootstrap == 0 {
        return Err(invalid("--bootstrap must be ≥ 1"));
    }
    let mut cfg = StudyConfig::new(
        set.clone(),
        xi,
        args.tau,
        args.horizon,
        args.levels.clone(),
        args.m_ref,
        args.epsilon,
        args.paths,
        args.seed,
    );
    cfg.gauge = gauge;
    cfg.q = args.q;
    cfg.mode = mode;
    cfg.driver = drv;
    cfg.bootstrap = args.bootstrap;

    // Every rule is built up front so an inadmissible gauge fails before any
    // path is simulated.
    let (sorted, warnings) = cfg.validate()?;
    for &m in sorted.iter().chain(std::iter::once(&args.m_ref)) {
        cfg.rule(m)?;
    }
    for w in &warnings {
        eprintln!("nsdde: warning: {w}");
    }

    let report = strong_error_study(&cfg)?;

    let header: Vec<String> = [
        "level",
        "m",
        "delta",
        "g_delta",
        "radius",
        "n_samples",
        "mode",
        "q",
        "error_moment",
        "root_error",
        "std_err",
        "seed",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let row = |level: String, s: &nsdde_core::LevelSummary| {
        vec![
            level,
            s.m.to_string(),
            fmt_f(s.delta),
            fmt_f(s.g),
            fmt_f(s.radius),
            s.n_samples.to_string(),
            report.mode.name().to_string(),
            fmt_f(report.q),
            fmt_f(s.error_moment),
            fmt_f(s.root_error),
            fmt_f(s.std_err),
            report.seed.to_string(),
        ]
    };
    let mut rows: Vec<Vec<String>> = report
        .levels
        .iter()
        .enumerate()
        .map(|(i, s)| row(i.to_string(), s))
        .collect();
    rows.push(row("ref".into(), &report.reference));

    prepare_out(&args.out)?;
    let levels_path = args.out.join("converge.csv");
    let rate_path = args.out.join("rate.csv");
    let Some(rate) = report.rate else {
        let partial = failed_name(&levels_path);
        write_csv(&partial, &header, &rows)?;
        let why = report.not_fittable.unwrap_or_default();
        return Err(Failure::Runtime(format!(
            "rate not fittable: {why}; level errors in {}",
            partial.display()
        )));
    };
    write_csv(&levels_path, &header, &rows)?;
    write_csv(
        &rate_path,
        &["slope", "ci_lo", "ci_hi", "r2"].map(String::from),
        &[vec![
            fmt_f(rate.fit.slope),
            fmt_f(rate.ci_lo),
            fmt_f(rate.ci_hi),
            fmt_f(rate.fit.r2),
        ]],
    )?;
    println!(
        "converge: `{}` {} levels, {} paths, slope {:.4} (95% CI {:.4} to {:.4}, r2 {:.4}) -> {}",
        set.name(),
        report.levels.len(),
        args.paths,
        rate.fit.slope,
        rate.ci_lo,
        rate.ci_hi,
        rate.fit.r2,
        args.out.display()
    );
    Ok(())
}

fn run_check(args: &CheckArgs) -> CliResult<()> {
    let set = load_model(&args.model)?;
    check_positive("box", args.half_width)?;
    if args.samples == 0 {
        return Err(invalid("--samples must be ≥ 1"));
    }
    let explicit =
        !(args.assumptions.len() == 1 && args.assumptions[0].eq_ignore_ascii_case("all"));
    let ids: Vec<AssumptionId> = if explicit {
        args.assumptions
            .iter()
            .map(|s| s.parse())
            .collect::<Result<_, _>>()?
    } else {
        AssumptionId::ALL.to_vec()
    };
    let mode = if set.is_jump() {
        GaugeMode::Jump { p: args.p }
    } else {
        GaugeMode::Brownian
    };
    let rule = TruncationRule::power(&set, args.delta, args.epsilon, mode)?;
    let params = AssumptionParams {
        p: args.p,
        q: args.q,
        l: args.l,
        l1: args.l1,
        l1_bar: args.l1_bar,
        l2: args.l2,
        l3: args.l3,
        l4: args.l4,
        l_global: args.l_global,
        k1: args.k1,
        k2: args.k2,
        local_lipschitz: None,
        rule: Some(rule.clone()),
        mark_measure: if set.is_jump() {
            Some(mark_measure(args.intensity, &args.mark_dist)?)
        } else {
            None
        },
    };
    let bx = SampleBox::symmetric(set.state_dim(), args.half_width)?;

    let mut rows = Vec::new();
    let mut failed = Vec::new();
    let mut skipped = Vec::new();
    for id in ids {
        let rep = match audit_assumption(id, &set, &params, &bx, args.samples, args.seed) {
            Ok(rep) => rep,
            Err(e @ nsdde_core::Error::Inapplicable { .. }) if !explicit => {
                skipped.push(id.name());
                let mut row = vec![id.name().to_string(), "inapplicable".into(), e.to_string()];
                row.extend(std::iter::repeat_n(String::new(), 7));
                row.extend([
                    fmt_f(args.delta),
                    fmt_f(rule.g()),
                    fmt_f(rule.radius()),
                    args.seed.to_string(),
                ]);
                rows.push(row);
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        if !rep.pass {
            failed.push(id.name());
        }
        let witness: Vec<String> = rep
            .witness
            .iter()
            .map(|v| v.iter().map(|x| fmt_f(*x)).collect::<Vec<_>>().join(" "))
            .collect();
        let cases: Vec<String> = match rep.case_worst {
            Some(c) => c.iter().map(|v| fmt_f(*v)).collect(),
            None => vec![String::new(); 4],
        };
        let mut row = vec![
            id.name().to_string(),
            if rep.pass { "pass" } else { "fail" }.into(),
            String::new(),
            rep.n_samples.to_string(),
            fmt_f(rep.worst_ratio),
        ];
        row.extend(cases);
        row.push(witness.join(";"));
        row.extend([
            fmt_f(args.delta),
            fmt_f(rule.g()),
            fmt_f(rule.radius()),
            args.seed.to_string(),
        ]);
        rows.push(row);
    }

    let header: Vec<String> = [
        "assumption",
        "status",
        "note",
        "n_samples",
        "worst_ratio",
        "case_inside",
        "case_outside",
        "case_x_outside",
        "case_y_outside",
        "witness",
        "delta",
        "g_delta",
        "radius",
        "seed",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    prepare_out(&args.out)?;
    let target = args.out.join("assumptions.csv");
    write_csv(&target, &header, &rows)?;
    let audited = rows.len() - skipped.len();
    let fails = if failed.is_empty() {
        "none".to_string()
    } else {
        failed.join(", ")
    };
    println!(
        "check-assumptions: `{}` {audited} audited, failing: {fails}, inapplicable: {} -> {}",
        set.name(),
        skipped.len(),
        target.display()
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noise(driver: Option<&str>) -> NoiseArgs {
        NoiseArgs {
            driver: driver.map(String::from),
            intensity: 2.0,
            mark_dist: "gauss:1".into(),
            p: 3.0,
            nodes: 16,
        }
    }

    #[test]
    fn driver_follows_the_model() {
        let b = registry::build("example-b", 0.5).unwrap();
        let j = registry::build("jump-neutral", 0.5).unwrap();
        assert_eq!(driver(&b, &noise(None)).unwrap(), Driver::Brownian);
        assert!(matches!(driver(&j, &noise(None)).unwrap(), Driver::Jump { p, .. } if p == 3.0));
        assert!(matches!(
            driver(&b, &noise(Some("jump"))),
            Err(Failure::Validation(_))
        ));
        assert!(matches!(
            driver(&j, &noise(Some("brownian"))),
            Err(Failure::Validation(_))
        ));
        assert!(matches!(
            driver(&b, &noise(Some("levy"))),
            Err(Failure::Validation(_))
        ));
    }

    #[test]
    fn failed_suffix_keeps_the_name() {
        assert_eq!(
            failed_name(Path::new("out/rate.csv")),
            PathBuf::from("out/rate.csv.failed")
        );
    }

    #[test]
    fn floats_keep_seventeen_digits() {
        assert_eq!(fmt_f(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f(0.1).parse::<f64>().unwrap(), 0.1);
    }

    #[test]
    fn core_errors_map_to_exit_codes() {
        let blowup = nsdde_core::Error::NumericalBlowup {
            step: 3,
            level: None,
            path: None,
        };
        assert_eq!(Failure::from(blowup).code(), 2);
        assert_eq!(
            Failure::from(nsdde_core::Error::InvalidRadius(0.0)).code(),
            1
        );
    }

    #[test]
    fn parse_errors_are_classified() {
        let kind = |args: &[&str]| Cli::try_parse_from(args).unwrap_err().kind();
        assert_eq!(kind(&["nsdde", "--help"]), ErrorKind::DisplayHelp);
        assert_eq!(kind(&["nsdde", "frobnicate"]), ErrorKind::InvalidSubcommand);
        assert!(Cli::try_parse_from(["nsdde", "list-models"]).is_ok());
    }
}
