//! Command implementations behind the `mapf-lns` binary.

pub mod config;

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use mapf_lns::bench::{
    compare_tables, mean_curve, run_matrix, summarize_rows, GroupKey, MatrixOptions,
};
use mapf_lns::init::{initial_solution, InitKind};
use mapf_lns::model::validate_solution;
use mapf_lns::movingai::{parse_map, parse_scen, parse_scen_file, reference_length_mismatches};
use mapf_lns::output::{
    emit_svg_plot, read_paths_json, read_results_csv, read_trajectory_json, write_paths_json,
    write_results_csv, write_trajectory_json, PlotSeries, RunResultRow,
};
use mapf_lns::replan::ReplanKind;
use mapf_lns::strategies::StrategyKind;
use mapf_lns::{lns_run, Budget, LnsConfig, RunRecord};
use thiserror::Error;

use crate::config::BenchConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    /// Infeasible instance, failed solve, invalid solution or regression.
    #[error("{0}")]
    Failure(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Failure(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<fs::File>, CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    }
    fs::File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn io(path: &Path) -> impl FnOnce(mapf_lns::output::OutputError) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}

#[derive(Debug, Parser)]
#[command(
    name = "mapf-lns",
    version,
    about = "Anytime MAPF by large neighborhood search"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one instance and record the delay trajectory.
    Solve(SolveArgs),
    /// Run an experiment matrix described by a TOML file.
    Bench(BenchArgs),
    /// Check a paths file against an instance.
    Validate(ValidateArgs),
    /// Plot trajectory files as an SVG step chart.
    Plot(PlotArgs),
    /// Compare two results tables cell by cell.
    Compare(CompareArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub map: PathBuf,
    #[arg(long)]
    pub scen: PathBuf,
    #[arg(long)]
    pub agents: usize,
    #[arg(long, default_value = "adaptive")]
    pub strategy: StrategyKind,
    /// Neighborhood size; ignored by bandit and unibandit.
    #[arg(long, default_value_t = 8)]
    pub nb_size: usize,
    /// `pp`, `pbs` or `pbs:<node budget>`.
    #[arg(long, default_value = "pp")]
    pub replan: ReplanKind,
    #[arg(long, default_value = "lns2lite")]
    pub init: InitKind,
    /// Core-time budget in seconds.
    #[arg(long, conflicts_with = "max_iters")]
    pub time_limit: Option<f64>,
    /// Iteration budget; makes the run reproducible.
    #[arg(long)]
    pub max_iters: Option<u64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Budget of the initial solver in seconds.
    #[arg(long, default_value_t = 10.0)]
    pub init_budget: f64,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    pub config: PathBuf,
    #[arg(long, default_value = "bench-out")]
    pub out_dir: PathBuf,
    /// Keep successful rows of an existing results.csv and run only the rest.
    #[arg(long)]
    pub resume: bool,
    /// Parallel runs; overrides the config file. Defaults to one per core;
    /// use 1 for faithful timing.
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub map: PathBuf,
    #[arg(long)]
    pub scen: PathBuf,
    #[arg(long)]
    pub paths: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct PlotArgs {
    /// Trajectory JSON files; one curve per file.
    #[arg(required = true)]
    pub trajectories: Vec<PathBuf>,
    #[arg(long, short)]
    pub output: PathBuf,
    #[arg(long, default_value = "sum of delays over time")]
    pub title: String,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    pub baseline: PathBuf,
    pub candidate: PathBuf,
    /// Relative growth of final delay or AUC tolerated per cell.
    #[arg(long, default_value_t = 0.05)]
    pub tolerance: f64,
}

/// What `solve` produced.
#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub record: RunRecord,
    pub row: RunResultRow,
    pub trajectory_file: PathBuf,
    pub results_file: PathBuf,
    pub paths_file: PathBuf,
}

/// Scene index from a `<map>-random-<k>.scen` file name, else 0.
pub fn scene_index(scen: &Path) -> u32 {
    scen.file_stem()
        .and_then(|s| s.to_str())
        .and_then(|s| s.rsplit('-').next())
        .and_then(|k| k.parse().ok())
        .unwrap_or(0)
}

fn map_name(map: &Path) -> String {
    map.file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("map")
        .to_string()
}

pub fn cmd_solve(args: &SolveArgs) -> Result<SolveOutcome, CliError> {
    let budget = match (args.time_limit, args.max_iters) {
        (_, Some(0)) => return Err(CliError::Usage("--max-iters must be positive".into())),
        (_, Some(n)) => Budget::Iterations(n),
        (Some(s), None) if !(s > 0.0 && s.is_finite()) => {
            return Err(CliError::Usage("--time-limit must be positive".into()))
        }
        (Some(s), None) => Budget::CoreSeconds(s),
        (None, None) => Budget::CoreSeconds(60.0),
    };
    if args.nb_size == 0 && !args.strategy.picks_size() {
        return Err(CliError::Usage("--nb-size must be positive".into()));
    }
    if !(args.init_budget > 0.0 && args.init_budget.is_finite()) {
        return Err(CliError::Usage("--init-budget must be positive".into()));
    }
    let name = map_name(&args.map);
    let map = parse_map(&name, &read_text(&args.map)?)
        .map_err(|e| CliError::Io(format!("{}: {e}", args.map.display())))?;
    let scen_text = read_text(&args.scen)?;
    let instance = parse_scen(&scen_text, &map, args.agents).map_err(|e| match e {
        mapf_lns::movingai::ParseError::Syntax { .. } => {
            CliError::Io(format!("{}: {e}", args.scen.display()))
        }
        other => CliError::Failure(format!("{}: {other}", args.scen.display())),
    })?;
    if let Ok(scen) = parse_scen_file(&scen_text) {
        let mismatches = reference_length_mismatches(&instance, &scen);
        if !mismatches.is_empty() {
            eprintln!("note: {} scenario entries have a reference length different from the 4-connected distance", mismatches.len());
        }
    }

    let config = LnsConfig {
        strategy: args.strategy,
        nb_size: if args.strategy.picks_size() {
            0
        } else {
            args.nb_size
        },
        replan: args.replan,
        init: args.init,
        budget,
        seed: args.seed,
        ..LnsConfig::default()
    };
    let (initial, _) = initial_solution(
        args.init,
        &instance,
        Duration::from_secs_f64(args.init_budget),
        args.seed,
    )
    .map_err(|e| CliError::Failure(format!("initial solution: {e}")))?;
    let (record, solution) =
        lns_run(&instance, initial, &config).map_err(|e| CliError::Failure(e.to_string()))?;

    let scene = scene_index(&args.scen);
    let row = RunResultRow::from_record(&name, scene, args.agents, &record);
    let stem = format!(
        "{name}-{scene}-{}-{}-{}-{}-{}-{}",
        args.agents,
        config.strategy,
        config.nb_size,
        config.replan.label().replace(':', ""),
        config.init.label(),
        config.seed
    );
    let trajectory_file = args.out_dir.join(format!("{stem}.json"));
    let results_file = args.out_dir.join(format!("{stem}.csv"));
    let paths_file = args.out_dir.join(format!("{stem}.paths"));
    write_trajectory_json(&record, create(&trajectory_file)?).map_err(io(&trajectory_file))?;
    write_results_csv(std::slice::from_ref(&row), create(&results_file)?)
        .map_err(io(&results_file))?;
    write_paths_json(instance.map(), &solution.paths, create(&paths_file)?)
        .map_err(io(&paths_file))?;
    Ok(SolveOutcome {
        record,
        row,
        trajectory_file,
        results_file,
        paths_file,
    })
}

/// What `bench` produced.
#[derive(Debug, Clone)]
pub struct BenchOutcome {
    pub rows: Vec<RunResultRow>,
    pub reused: usize,
    pub failed: usize,
    pub results_file: PathBuf,
    pub plots: Vec<PathBuf>,
}

pub fn cmd_bench(args: &BenchArgs) -> Result<BenchOutcome, CliError> {
    let text = read_text(&args.config)?;
    let config = BenchConfig::from_toml(&text)
        .map_err(|e| CliError::Usage(format!("{}: {e}", args.config.display())))?;
    let base = args.config.parent().unwrap_or(Path::new("."));
    let spec = config
        .to_spec(base)
        .map_err(|e| CliError::Usage(format!("{}: {e}", args.config.display())))?;

    let results_file = args.out_dir.join("results.csv");
    let mut options = MatrixOptions::new(&args.out_dir);
    let cores = std::thread::available_parallelism().map_or(1, usize::from);
    options.jobs = args.jobs.or(config.jobs).unwrap_or(cores).max(1);
    if args.resume && results_file.exists() {
        let file = fs::File::open(&results_file)
            .map_err(|e| CliError::Io(format!("{}: {e}", results_file.display())))?;
        options.previous = read_results_csv(file).map_err(io(&results_file))?;
    }
    let output = run_matrix(&spec, &options).map_err(|e| CliError::Io(e.to_string()))?;
    for (key, message) in &output.failures {
        eprintln!(
            "cell {} scene {} {} agents {} seed {} failed: {message}",
            key.map, key.scene, key.strategy, key.agents, key.seed
        );
    }
    write_results_csv(&output.rows, create(&results_file)?).map_err(io(&results_file))?;

    let summary = summarize_rows(&output.rows);
    let summary_file = args.out_dir.join("summary.csv");
    let mut w = create(&summary_file)?;
    let write = |w: &mut BufWriter<fs::File>, line: String| {
        writeln!(w, "{line}").map_err(|e| CliError::Io(format!("{}: {e}", summary_file.display())))
    };
    write(&mut w, "map,agents,strategy,nb_size,replan,init,runs,failed,mean_final_delay,var_final_delay,std_final_delay,mean_auc".into())?;
    for (k, agg, failed) in &summary {
        let stats = agg.as_ref().map_or(format!("0,{failed},,,,"), |a| {
            format!(
                "{},{failed},{},{},{},{}",
                a.runs,
                a.mean_final_delay,
                a.variance_final_delay,
                a.std_dev_final_delay,
                a.mean_auc
            )
        });
        write(
            &mut w,
            format!(
                "{},{},{},{},{},{},{stats}",
                k.map, k.agents, k.strategy, k.nb_size, k.replan, k.init
            ),
        )?;
    }
    w.flush()
        .map_err(|e| CliError::Io(format!("{}: {e}", summary_file.display())))?;

    let mut plots = Vec::new();
    if config.plots {
        plots = bench_plots(&spec, &output.rows, &args.out_dir)?;
    }
    let failed = output.failures.len();
    Ok(BenchOutcome {
        rows: output.rows,
        reused: output.reused,
        failed,
        results_file,
        plots,
    })
}

/// One SVG per (map, agents): the mean curve of every configuration over
/// its scenes and seeds.
type CurvesByConfig = std::collections::BTreeMap<GroupKey, Vec<Vec<(f64, u64)>>>;

fn bench_plots(
    spec: &mapf_lns::bench::MatrixSpec,
    rows: &[RunResultRow],
    out_dir: &Path,
) -> Result<Vec<PathBuf>, CliError> {
    let limit = spec.budget.limit();
    let mut groups: std::collections::BTreeMap<(String, usize), CurvesByConfig> =
        Default::default();
    for row in rows.iter().filter(|r| r.succeeded()) {
        let file = out_dir.join("trajectories").join(&row.map).join(format!(
            "{}-{}-{}-{}-{}-{}-{}.json",
            row.scene,
            row.agents,
            row.strategy,
            row.nb_size,
            row.replan.replace(':', ""),
            row.init,
            row.seed
        ));
        let Ok(handle) = fs::File::open(&file) else {
            continue;
        };
        let Ok(traj) = read_trajectory_json(handle) else {
            continue;
        };
        groups
            .entry((row.map.clone(), row.agents))
            .or_default()
            .entry(GroupKey::of(row))
            .or_default()
            .push(traj.trajectory);
    }
    let mut written = Vec::new();
    for ((map, agents), configs) in groups {
        let series: Vec<PlotSeries> = configs
            .into_iter()
            .map(|(key, trajs)| {
                let refs: Vec<&[(f64, u64)]> = trajs.iter().map(Vec::as_slice).collect();
                PlotSeries {
                    label: key.label(),
                    trajectory: mean_curve(&refs, limit),
                    time_limit: limit,
                }
            })
            .collect();
        let file = out_dir.join("plots").join(format!("{map}-{agents}.svg"));
        emit_svg_plot(&series, &format!("{map}, {agents} agents"), create(&file)?)
            .map_err(io(&file))?;
        written.push(file);
    }
    Ok(written)
}

/// Outcome of `validate`: conflicts as printable lines.
pub fn cmd_validate(args: &ValidateArgs) -> Result<Vec<String>, CliError> {
    let name = map_name(&args.map);
    let map = parse_map(&name, &read_text(&args.map)?)
        .map_err(|e| CliError::Io(format!("{}: {e}", args.map.display())))?;
    let paths_text = read_text(&args.paths)?;
    let paths = read_paths_json(&map, paths_text.as_bytes()).map_err(|e| match e {
        mapf_lns::output::OutputError::Model(m) => CliError::Failure(m.to_string()),
        other => CliError::Io(format!("{}: {other}", args.paths.display())),
    })?;
    let instance = parse_scen(&read_text(&args.scen)?, &map, paths.len())
        .map_err(|e| CliError::Failure(format!("{}: {e}", args.scen.display())))?;
    let conflicts =
        validate_solution(&instance, &paths).map_err(|e| CliError::Failure(e.to_string()))?;
    Ok(conflicts.iter().map(ToString::to_string).collect())
}

pub fn cmd_plot(args: &PlotArgs) -> Result<(), CliError> {
    let mut series = Vec::new();
    for path in &args.trajectories {
        let handle =
            fs::File::open(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let file = read_trajectory_json(handle).map_err(io(path))?;
        let label = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("run")
            .to_string();
        let limit = file.config.budget.limit();
        let trajectory = file
            .trajectory
            .iter()
            .map(|&(t, d)| (t, d as f64))
            .collect();
        series.push(PlotSeries {
            label,
            trajectory,
            time_limit: limit,
        });
    }
    emit_svg_plot(&series, &args.title, create(&args.output)?).map_err(io(&args.output))
}

pub fn cmd_compare(args: &CompareArgs) -> Result<Vec<String>, CliError> {
    let load = |p: &Path| -> Result<Vec<RunResultRow>, CliError> {
        let handle =
            fs::File::open(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
        read_results_csv(handle).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))
    };
    let report = compare_tables(
        &load(&args.baseline)?,
        &load(&args.candidate)?,
        args.tolerance,
    );
    let mut lines = Vec::new();
    for d in &report.deltas {
        let k = &d.key;
        lines.push(format!(
            "{} {}:{} scene {} agents {} {} M={} {} seed {}: {} -> {} ({:+.2}%)",
            if d.regression { "REGRESSION" } else { "delta" },
            d.metric,
            k.map,
            k.scene,
            k.agents,
            k.strategy,
            k.nb_size,
            k.replan,
            k.seed,
            d.baseline,
            d.candidate,
            d.relative * 100.0
        ));
    }
    for k in &report.newly_failed {
        lines.push(format!(
            "REGRESSION {} scene {} {} seed {}: cell failed",
            k.map, k.scene, k.strategy, k.seed
        ));
    }
    for k in &report.only_in_baseline {
        lines.push(format!(
            "missing {} scene {} {} seed {}",
            k.map, k.scene, k.strategy, k.seed
        ));
    }
    if report.is_clean() {
        Ok(lines)
    } else {
        for line in &lines {
            println!("{line}");
        }
        Err(CliError::Failure(format!(
            "{} regressions, {} missing cells",
            report.regressions(),
            report.only_in_baseline.len()
        )))
    }
}

/// Runs a parsed command line, prints a short report and returns the exit
/// status.
pub fn run(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Solve(args) => cmd_solve(&args).map(|o| {
            println!("initial delay {}", o.record.initial_delay);
            println!("final delay {}", o.record.final_delay);
            println!("auc {}", o.record.auc);
            println!("iterations {} accepted {}", o.record.iterations, o.record.accepted);
            println!("trajectory {}", o.trajectory_file.display());
        }),
        Command::Bench(args) => cmd_bench(&args).map(|o| {
            println!("{} rows ({} reused, {} failed) -> {}", o.rows.len(), o.reused, o.failed, o.results_file.display());
            for (k, agg, failed) in summarize_rows(&o.rows) {
                match agg {
                    Some(a) => println!(
                        "{} {} agents {}: final {:.1} (sd {:.1}) auc {:.1} over {} runs, {failed} failed",
                        k.map,
                        k.agents,
                        k.label(),
                        a.mean_final_delay,
                        a.std_dev_final_delay,
                        a.mean_auc,
                        a.runs
                    ),
                    None => println!("{} {} agents {}: all {failed} runs failed", k.map, k.agents, k.label()),
                }
            }
        }),
        Command::Validate(args) => cmd_validate(&args).and_then(|conflicts| {
            if conflicts.is_empty() {
                println!("valid");
                Ok(())
            } else {
                for c in &conflicts {
                    println!("{c}");
                }
                Err(CliError::Failure(format!("{} conflicts", conflicts.len())))
            }
        }),
        Command::Plot(args) => cmd_plot(&args),
        Command::Compare(args) => cmd_compare(&args).map(|lines| {
            for line in &lines {
                println!("{line}");
            }
            println!("no regressions");
        }),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
