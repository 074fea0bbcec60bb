use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use elliptic_bsde::rng::derive_seed;
use elliptic_bsde::{simulate_paths, ExitRule, SimulationOptions};
use elliptic_bsde_cli::config::{parse_raw, resolve, RawConfig, ScheduleKind};
use elliptic_bsde_cli::{emit_config, run_jobs, write_outputs, PointSpec, RunConfig};

/// Pointwise deep BSDE solutions of semilinear elliptic PDEs.
///
/// Settings come from the problem defaults, then the `--config` file, then
/// the flags below.
#[derive(Debug, Parser)]
#[command(name = "elliptic-bsde", version)]
struct Cli {
    /// TOML run configuration.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// poisson, quadratic or dividend.
    #[arg(long, value_name = "NAME")]
    problem: Option<String>,
    #[arg(long, value_name = "D")]
    dim: Option<usize>,
    /// `diagonal:COUNT[:FROM:TO]`, `sweep:AXIS:COUNT:FROM:TO` or `x1,x2;y1,y2`.
    #[arg(long, value_name = "SPEC", allow_hyphen_values = true)]
    points: Option<String>,
    /// Master seed.
    #[arg(long, value_name = "S")]
    seed: Option<u64>,
    /// Omit wall-clock columns so reruns are byte-identical.
    #[arg(long)]
    deterministic: bool,
    /// Train on one fixed batch of paths instead of resampling every epoch.
    #[arg(long)]
    fixed_paths: bool,
    /// Output directory (default `output`).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Points solved at the same time.
    #[arg(long)]
    concurrency: Option<usize>,

    /// Cutoff time T.
    #[arg(long)]
    horizon: Option<f64>,
    /// Time steps N.
    #[arg(long)]
    steps: Option<usize>,
    /// Grid exponent: t_i = T (i/N)^gamma.
    #[arg(long)]
    gamma: Option<f64>,
    /// bridge or discrete.
    #[arg(long)]
    exit_rule: Option<ExitRule>,
    /// Epochs E.
    #[arg(long)]
    epochs: Option<usize>,
    /// Training paths per epoch M.
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    validation_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    beta1: Option<f64>,
    #[arg(long)]
    beta2: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Learning-rate multiplier for u0.
    #[arg(long)]
    value_lr_scale: Option<f64>,
    /// constant or geometric.
    #[arg(long, value_parser = parse_schedule)]
    schedule: Option<ScheduleKind>,
    #[arg(long)]
    decay_factor: Option<f64>,
    /// First epoch (0-based) of the geometric decay.
    #[arg(long)]
    decay_start: Option<usize>,
    /// Independent runs R averaged per point.
    #[arg(long)]
    runs: Option<usize>,
    /// Final u0 snapshots K averaged per run.
    #[arg(long)]
    tail: Option<usize>,
    /// Hidden layer widths, e.g. `12,12`.
    #[arg(long, value_delimiter = ',')]
    hidden: Option<Vec<usize>>,
    /// One subnetwork for all time steps (`--shared-subnet false` for one per step).
    #[arg(long, value_name = "BOOL", num_args = 0..=1, default_missing_value = "true")]
    shared_subnet: Option<bool>,
    /// Train only u0 with zero gradient model.
    #[arg(long)]
    freeze_gradient_model: bool,
    /// Simulation threads inside one job.
    #[arg(long)]
    threads: Option<usize>,

    /// Print the resolved configuration and exit.
    #[arg(long)]
    print_config: bool,
    /// Also write `paths.csv` with this many simulated paths from the first point.
    #[arg(long, value_name = "M")]
    dump_paths: Option<usize>,
}

fn parse_schedule(s: &str) -> Result<ScheduleKind, String> {
    match s {
        "constant" => Ok(ScheduleKind::Constant),
        "geometric" => Ok(ScheduleKind::Geometric),
        other => Err(format!("unknown schedule {other:?} (expected constant or geometric)")),
    }
}

fn apply_flags(raw: &mut RawConfig, cli: &Cli) {
    fn set<T: Clone>(slot: &mut Option<T>, value: &Option<T>) {
        if value.is_some() {
            slot.clone_from(value);
        }
    }
    set(&mut raw.problem, &cli.problem);
    set(&mut raw.dim, &cli.dim);
    set(&mut raw.seed, &cli.seed);
    set(&mut raw.concurrency, &cli.concurrency);
    if cli.deterministic {
        raw.deterministic = Some(true);
    }
    let g = &mut raw.grid;
    set(&mut g.horizon, &cli.horizon);
    set(&mut g.steps, &cli.steps);
    set(&mut g.gamma, &cli.gamma);
    set(&mut g.exit_rule, &cli.exit_rule);
    let t = &mut raw.training;
    set(&mut t.epochs, &cli.epochs);
    set(&mut t.batch_size, &cli.batch_size);
    set(&mut t.validation_size, &cli.validation_size);
    set(&mut t.learning_rate, &cli.learning_rate);
    set(&mut t.beta1, &cli.beta1);
    set(&mut t.beta2, &cli.beta2);
    set(&mut t.epsilon, &cli.epsilon);
    set(&mut t.value_lr_scale, &cli.value_lr_scale);
    set(&mut t.schedule, &cli.schedule);
    set(&mut t.decay_factor, &cli.decay_factor);
    set(&mut t.decay_start, &cli.decay_start);
    set(&mut t.runs, &cli.runs);
    set(&mut t.tail, &cli.tail);
    set(&mut t.hidden, &cli.hidden);
    set(&mut t.threads, &cli.threads);
    set(&mut t.shared_subnet, &cli.shared_subnet);
    if cli.fixed_paths {
        t.fixed_paths = Some(true);
    }
    if cli.freeze_gradient_model {
        t.freeze_gradient_model = Some(true);
    }
}

fn load(cli: &Cli) -> Result<RunConfig, String> {
    let mut raw = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            parse_raw(&text).map_err(|e| format!("{}: {e}", path.display()))?
        }
        None => RawConfig::default(),
    };
    apply_flags(&mut raw, cli);
    let file_points = raw.points.take();
    let mut config = resolve(raw).map_err(|e| e.to_string())?;
    let defaults = config.points.clone();
    if let Some(points) = file_points {
        config.points = points;
    }
    if let Some(spec) = &cli.points {
        config.points = PointSpec::parse_cli(spec, &defaults).map_err(|e| e.to_string())?;
        if let PointSpec::Sweep { base, .. } = &mut config.points {
            if base.is_empty() {
                *base = vec![0.0; config.problem.dim()];
            }
        }
    }
    if let Some(out) = &cli.out {
        config.output = Some(out.clone());
    }
    config.validate().map_err(|e| e.to_string())?;
    Ok(config)
}

fn dump_paths(config: &RunConfig, dir: &std::path::Path, paths: usize) -> Result<(), String> {
    let problem = config.problem.build().map_err(|e| e.to_string())?;
    let points = config.points.points(config.problem.dim()).map_err(|e| e.to_string())?;
    let grid = config.training.grid().map_err(|e| e.to_string())?;
    let options = SimulationOptions { exit_rule: config.training.exit_rule, threads: config.training.threads };
    let batch = simulate_paths(&*problem, &points[0].x, &grid, paths, derive_seed(config.seed, &[u64::MAX]), options)
        .map_err(|e| e.to_string())?;
    let file = std::fs::File::create(dir.join("paths.csv")).map_err(|e| e.to_string())?;
    batch.write_csv(&grid, std::io::BufWriter::new(file)).map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match load(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if cli.print_config {
        print!("{}", emit_config(&config));
        return ExitCode::SUCCESS;
    }
    let out = config.output.clone().unwrap_or_else(|| PathBuf::from("output"));
    let points = config.points.points(config.problem.dim()).map(|p| p.len()).unwrap_or(0);
    eprintln!(
        "{} d={} points={points} runs={} epochs={} concurrency={}",
        config.problem.kind().name(),
        config.problem.dim(),
        config.training.runs,
        config.training.epochs,
        config.concurrency
    );
    let summary = run_jobs(&config, |row| match (&row.outcome, row.reference) {
        (Ok(r), Some(reference)) => eprintln!(
            "point {:3}  x={:<10.5} u={:<12.6} ref={:<12.6} err={:.2e}  {:.1}s",
            row.index,
            row.point.coordinate,
            r.estimate,
            reference,
            (r.estimate - reference).abs(),
            r.seconds
        ),
        (Ok(r), None) => {
            eprintln!("point {:3}  x={:<10.5} u={:<12.6} {:.1}s", row.index, row.point.coordinate, r.estimate, r.seconds)
        }
        (Err(e), _) => eprintln!("point {:3}  failed: {e}", row.index),
    });
    let summary = match summary {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Err(e) = write_outputs(&config, &summary, &out) {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    if let Some(paths) = cli.dump_paths {
        if let Err(e) = dump_paths(&config, &out, paths) {
            eprintln!("error: path dump: {e}");
            return ExitCode::from(2);
        }
    }
    eprintln!(
        "{:.1}s total, {:.1}s per eight points; results in {}",
        summary.total_seconds,
        summary.seconds_per_eight_points(),
        out.display()
    );
    if let Some(max) = summary.max_abs_error() {
        eprintln!("max abs error {max:.3e}");
    }
    if summary.all_ok() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

