//! Metrics and the experiment-matrix runner.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::{Path as FsPath, PathBuf};
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{lns_run, Budget, LnsConfig, RunRecord};
use crate::init::{initial_solution, InitKind};
use crate::model::{validate_solution, MapfInstance, Solution};
use crate::movingai::{parse_map, parse_scen, ParseError};
use crate::output::{
    read_paths_json, write_paths_json, write_trajectory_json, OutputError, RunResultRow,
};
use crate::replan::ReplanKind;
use crate::strategies::{StrategyKind, StrategyParams};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("{0}")]
    Argument(String),
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: ParseError },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Output(#[from] OutputError),
}

fn io_err(path: &FsPath) -> impl FnOnce(std::io::Error) -> BenchError + '_ {
    move |source| BenchError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Area under the best-so-far step curve from 0 to `time_limit`.
///
/// Each point holds until the next one; the last holds until the limit.
/// Points at or beyond the limit do not contribute.
pub fn auc(trajectory: &[(f64, u64)], time_limit: f64) -> Result<f64, BenchError> {
    let Some(&(t0, _)) = trajectory.first() else {
        return Err(BenchError::Argument("empty trajectory".into()));
    };
    if t0 != 0.0 {
        return Err(BenchError::Argument(format!(
            "trajectory starts at {t0}, not 0"
        )));
    }
    if !(time_limit >= 0.0 && time_limit.is_finite()) {
        return Err(BenchError::Argument(format!("bad time limit {time_limit}")));
    }
    if let Some(w) = trajectory
        .windows(2)
        .find(|w| w[1].0.partial_cmp(&w[0].0) != Some(std::cmp::Ordering::Greater))
    {
        return Err(BenchError::Argument(format!(
            "times not increasing: {} then {}",
            w[0].0, w[1].0
        )));
    }
    let mut area = 0.0;
    for (i, &(t, d)) in trajectory.iter().enumerate() {
        if t >= time_limit {
            break;
        }
        let end = trajectory
            .get(i + 1)
            .map_or(time_limit, |n| n.0.min(time_limit));
        area += d as f64 * (end - t);
    }
    Ok(area)
}

/// Pointwise mean of several best-so-far step curves. Breakpoints are the
/// union of the inputs' breakpoints below `time_limit`.
pub fn mean_curve(trajectories: &[&[(f64, u64)]], time_limit: f64) -> Vec<(f64, f64)> {
    let mut times: Vec<f64> = trajectories
        .iter()
        .flat_map(|t| t.iter().map(|p| p.0))
        .filter(|&t| t < time_limit)
        .collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let value_at = |traj: &[(f64, u64)], t: f64| {
        let i = traj.partition_point(|p| p.0 <= t);
        traj[i.saturating_sub(1)].1 as f64
    };
    times
        .into_iter()
        .map(|t| {
            (
                t,
                trajectories.iter().map(|tr| value_at(tr, t)).sum::<f64>()
                    / trajectories.len() as f64,
            )
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SceneAggregate {
    pub runs: usize,
    pub mean_final_delay: f64,
    pub mean_auc: f64,
    /// Sample variance (n - 1 denominator); 0 for a single run.
    pub variance_final_delay: f64,
    pub std_dev_final_delay: f64,
}

/// Means over runs that share one configuration on different scenes.
pub fn aggregate_over_scenes(records: &[RunRecord]) -> Result<SceneAggregate, BenchError> {
    let Some(first) = records.first() else {
        return Err(BenchError::Argument("no records to aggregate".into()));
    };
    if records.iter().any(|r| r.config != first.config) {
        return Err(BenchError::Argument(
            "records have different configurations".into(),
        ));
    }
    let finals: Vec<f64> = records.iter().map(|r| r.final_delay as f64).collect();
    let aucs: Vec<f64> = records.iter().map(|r| r.auc).collect();
    Ok(aggregate(&finals, &aucs))
}

fn aggregate(finals: &[f64], aucs: &[f64]) -> SceneAggregate {
    let n = finals.len() as f64;
    let mean = finals.iter().sum::<f64>() / n;
    let variance = if finals.len() > 1 {
        finals.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    SceneAggregate {
        runs: finals.len(),
        mean_final_delay: mean,
        mean_auc: aucs.iter().sum::<f64>() / aucs.len() as f64,
        variance_final_delay: variance,
        std_dev_final_delay: variance.sqrt(),
    }
}

/// Identifies a configuration across scenes and seeds.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct GroupKey {
    pub map: String,
    pub agents: usize,
    pub strategy: String,
    pub nb_size: usize,
    pub replan: String,
    pub init: String,
}

impl GroupKey {
    pub fn of(row: &RunResultRow) -> Self {
        Self {
            map: row.map.clone(),
            agents: row.agents,
            strategy: row.strategy.clone(),
            nb_size: row.nb_size,
            replan: row.replan.clone(),
            init: row.init.clone(),
        }
    }

    pub fn label(&self) -> String {
        if self.nb_size == 0 {
            format!("{} {}", self.strategy, self.replan)
        } else {
            format!("{} M={} {}", self.strategy, self.nb_size, self.replan)
        }
    }
}

/// Aggregates successful rows per configuration; also counts failures.
pub fn summarize_rows(rows: &[RunResultRow]) -> Vec<(GroupKey, Option<SceneAggregate>, usize)> {
    let mut groups: BTreeMap<GroupKey, (Vec<f64>, Vec<f64>, usize)> = BTreeMap::new();
    for row in rows {
        let entry = groups.entry(GroupKey::of(row)).or_default();
        match (row.final_delay, row.auc) {
            (Some(f), Some(a)) => {
                entry.0.push(f as f64);
                entry.1.push(a);
            }
            _ => entry.2 += 1,
        }
    }
    groups
        .into_iter()
        .map(|(k, (f, a, failed))| {
            let agg = (!f.is_empty()).then(|| aggregate(&f, &a));
            (k, agg, failed)
        })
        .collect()
}

/// One map of a matrix. Scenario files are looked up as
/// `<scen_dir>/<name>-random-<scene>.scen`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapSpec {
    pub name: String,
    pub map_file: PathBuf,
    pub scen_dir: PathBuf,
}

impl MapSpec {
    pub fn scen_file(&self, scene: u32) -> PathBuf {
        self.scen_dir
            .join(format!("{}-random-{scene}.scen", self.name))
    }
}

/// The axes of an experiment. Every combination is one cell; strategies
/// that choose their own size ignore `nb_sizes`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixSpec {
    pub maps: Vec<MapSpec>,
    pub scenes: Vec<u32>,
    pub agents: Vec<usize>,
    pub strategies: Vec<StrategyKind>,
    pub nb_sizes: Vec<usize>,
    pub replans: Vec<ReplanKind>,
    pub inits: Vec<InitKind>,
    pub seeds: Vec<u64>,
    pub budget: Budget,
    pub init_budget_s: f64,
    pub params: StrategyParams,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellKey {
    pub map: String,
    pub scene: u32,
    pub agents: usize,
    pub strategy: String,
    pub nb_size: usize,
    pub replan: String,
    pub init: String,
    pub seed: u64,
}

impl CellKey {
    pub fn of(row: &RunResultRow) -> Self {
        Self {
            map: row.map.clone(),
            scene: row.scene,
            agents: row.agents,
            strategy: row.strategy.clone(),
            nb_size: row.nb_size,
            replan: row.replan.clone(),
            init: row.init.clone(),
            seed: row.seed,
        }
    }

    fn file_stem(&self) -> String {
        format!(
            "{}-{}-{}-{}-{}-{}-{}",
            self.scene,
            self.agents,
            self.strategy,
            self.nb_size,
            self.replan.replace(':', ""),
            self.init,
            self.seed
        )
    }
}

#[derive(Debug, Clone)]
pub struct MatrixCell {
    pub map: usize,
    pub scene: u32,
    pub agents: usize,
    pub config: LnsConfig,
}

impl MatrixCell {
    pub fn key(&self, spec: &MatrixSpec) -> CellKey {
        CellKey::of(&RunResultRow::failed(
            &spec.maps[self.map].name,
            self.scene,
            self.agents,
            &self.config,
        ))
    }
}

impl MatrixSpec {
    pub fn check(&self) -> Result<(), BenchError> {
        let empty = [
            ("maps", self.maps.is_empty()),
            ("scenes", self.scenes.is_empty()),
            ("agents", self.agents.is_empty()),
            ("strategies", self.strategies.is_empty()),
            ("replans", self.replans.is_empty()),
            ("inits", self.inits.is_empty()),
            ("seeds", self.seeds.is_empty()),
        ];
        if let Some((axis, _)) = empty.iter().find(|e| e.1) {
            return Err(BenchError::Argument(format!(
                "matrix axis `{axis}` is empty"
            )));
        }
        if self.nb_sizes.is_empty() && self.strategies.iter().any(|s| !s.picks_size()) {
            return Err(BenchError::Argument(
                "matrix axis `nb_sizes` is empty".into(),
            ));
        }
        if self.init_budget_s.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
            return Err(BenchError::Argument(
                "initial solver budget must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Cells in a fixed order: map, scene, agents, init, seed, strategy,
    /// size, replan.
    pub fn cells(&self) -> Vec<MatrixCell> {
        let mut cells = Vec::new();
        for (m, _) in self.maps.iter().enumerate() {
            for &scene in &self.scenes {
                for &agents in &self.agents {
                    for &init in &self.inits {
                        for &seed in &self.seeds {
                            for &strategy in &self.strategies {
                                let sizes = if strategy.picks_size() {
                                    vec![0]
                                } else {
                                    self.nb_sizes.clone()
                                };
                                for nb_size in sizes {
                                    for &replan in &self.replans {
                                        let config = LnsConfig {
                                            strategy,
                                            nb_size,
                                            replan,
                                            init,
                                            budget: self.budget,
                                            seed,
                                            params: self.params,
                                            validate_every: None,
                                        };
                                        cells.push(MatrixCell {
                                            map: m,
                                            scene,
                                            agents,
                                            config,
                                        });
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        cells
    }
}

#[derive(Debug, Clone)]
pub struct MatrixOptions {
    /// Worker threads; 1 gives the most faithful core-time measurements.
    pub jobs: usize,
    /// Trajectory files go to `<out_dir>/trajectories/<map>/`.
    pub out_dir: PathBuf,
    /// Root of the initial-solution cache.
    pub cache_dir: PathBuf,
    /// Cells already present (and successful) in `previous` are not rerun.
    pub previous: Vec<RunResultRow>,
}

impl MatrixOptions {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        let out_dir = out_dir.into();
        let cache_dir =
            std::env::var_os("MAPF_CACHE_DIR").map_or_else(|| out_dir.join("cache"), PathBuf::from);
        Self {
            jobs: 1,
            out_dir,
            cache_dir,
            previous: Vec::new(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MatrixOutput {
    /// One row per cell, in [`MatrixSpec::cells`] order.
    pub rows: Vec<RunResultRow>,
    /// Cells skipped because `previous` already had them.
    pub reused: usize,
    /// Failure messages per failed cell.
    pub failures: Vec<(CellKey, String)>,
}

/// Location of a cached initial solution.
pub fn cache_path(
    cache_dir: &FsPath,
    map: &str,
    scene: u32,
    agents: usize,
    init: InitKind,
    seed: u64,
) -> PathBuf {
    cache_dir
        .join(map)
        .join(format!("{scene}-{agents}-{}-{seed}.paths", init.label()))
}

/// Loads a cached initial solution, or computes and stores one.
pub fn cached_initial(
    instance: &MapfInstance,
    cache_file: &FsPath,
    init: InitKind,
    budget: Duration,
    seed: u64,
) -> Result<Solution, String> {
    if let Ok(text) = fs::read(cache_file) {
        if let Ok(paths) = read_paths_json(instance.map(), &text[..]) {
            if validate_solution(instance, &paths).is_ok_and(|c| c.is_empty()) {
                return Solution::new(instance, paths).map_err(|e| e.to_string());
            }
        }
    }
    let (solution, _) =
        initial_solution(init, instance, budget, seed).map_err(|e| e.to_string())?;
    if let Some(dir) = cache_file.parent() {
        let _ = fs::create_dir_all(dir);
    }
    let mut buf = Vec::new();
    write_paths_json(instance.map(), &solution.paths, &mut buf).map_err(|e| e.to_string())?;
    let tmp = cache_file.with_extension(format!("tmp{}", std::process::id()));
    if fs::write(&tmp, &buf).is_ok() {
        let _ = fs::rename(&tmp, cache_file);
    }
    Ok(solution)
}

type InstanceKey = (usize, u32, usize);
type InitialKey = (usize, u32, usize, InitKind, u64);

/// Runs every cell of the matrix. All strategy cells that share
/// (map, scene, agents, init, seed) start from the same initial solution.
/// Cell failures become rows without measurements.
pub fn run_matrix(spec: &MatrixSpec, options: &MatrixOptions) -> Result<MatrixOutput, BenchError> {
    spec.check()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.jobs.max(1))
        .build()
        .map_err(|e| BenchError::Argument(e.to_string()))?;

    let cells = spec.cells();
    let previous: HashMap<CellKey, &RunResultRow> = options
        .previous
        .iter()
        .filter(|r| r.succeeded())
        .map(|r| (CellKey::of(r), r))
        .collect();
    let todo: Vec<usize> = (0..cells.len())
        .filter(|&i| !previous.contains_key(&cells[i].key(spec)))
        .collect();

    let maps = spec
        .maps
        .iter()
        .map(|m| {
            let text = fs::read_to_string(&m.map_file).map_err(io_err(&m.map_file))?;
            parse_map(&m.name, &text).map_err(|source| BenchError::Parse {
                path: m.map_file.clone(),
                source,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;

    let instance_keys: Vec<InstanceKey> = {
        let set: HashSet<InstanceKey> = todo
            .iter()
            .map(|&i| (cells[i].map, cells[i].scene, cells[i].agents))
            .collect();
        let mut v: Vec<_> = set.into_iter().collect();
        v.sort_unstable();
        v
    };
    let instances: HashMap<InstanceKey, Result<MapfInstance, String>> = pool.install(|| {
        instance_keys
            .par_iter()
            .map(|&(m, scene, agents)| {
                let file = spec.maps[m].scen_file(scene);
                let loaded = fs::read_to_string(&file)
                    .map_err(|e| format!("{}: {e}", file.display()))
                    .and_then(|text| {
                        parse_scen(&text, &maps[m], agents)
                            .map_err(|e| format!("{}: {e}", file.display()))
                    });
                ((m, scene, agents), loaded)
            })
            .collect()
    });

    let initial_keys: Vec<InitialKey> = {
        let set: HashSet<InitialKey> = todo
            .iter()
            .map(|&i| {
                let c = &cells[i];
                (c.map, c.scene, c.agents, c.config.init, c.config.seed)
            })
            .collect();
        let mut v: Vec<_> = set.into_iter().collect();
        v.sort_unstable_by_key(|k| (k.0, k.1, k.2, k.3.label(), k.4));
        v
    };
    let init_budget = Duration::from_secs_f64(spec.init_budget_s);
    let initials: HashMap<InitialKey, Result<Solution, String>> = pool.install(|| {
        initial_keys
            .par_iter()
            .map(|&(m, scene, agents, init, seed)| {
                let result = match &instances[&(m, scene, agents)] {
                    Ok(instance) => {
                        let file = cache_path(
                            &options.cache_dir,
                            &spec.maps[m].name,
                            scene,
                            agents,
                            init,
                            seed,
                        );
                        cached_initial(instance, &file, init, init_budget, seed)
                    }
                    Err(e) => Err(e.clone()),
                };
                ((m, scene, agents, init, seed), result)
            })
            .collect()
    });

    let fresh: Vec<(usize, Result<RunResultRow, String>)> = pool.install(|| {
        todo.par_iter()
            .map(|&i| {
                let cell = &cells[i];
                let name = &spec.maps[cell.map].name;
                let instance = instances[&(cell.map, cell.scene, cell.agents)]
                    .as_ref()
                    .map_err(Clone::clone);
                let initial = initials[&(
                    cell.map,
                    cell.scene,
                    cell.agents,
                    cell.config.init,
                    cell.config.seed,
                )]
                    .as_ref()
                    .map_err(Clone::clone);
                let outcome = instance.and_then(|instance| {
                    let initial = initial?.clone();
                    let (record, _) =
                        lns_run(instance, initial, &cell.config).map_err(|e| e.to_string())?;
                    let dir = options.out_dir.join("trajectories").join(name);
                    fs::create_dir_all(&dir).map_err(|e| format!("{}: {e}", dir.display()))?;
                    let file = dir.join(format!("{}.json", cell.key(spec).file_stem()));
                    let handle =
                        fs::File::create(&file).map_err(|e| format!("{}: {e}", file.display()))?;
                    write_trajectory_json(&record, std::io::BufWriter::new(handle))
                        .map_err(|e| e.to_string())?;
                    Ok(RunResultRow::from_record(
                        name,
                        cell.scene,
                        cell.agents,
                        &record,
                    ))
                });
                (i, outcome)
            })
            .collect()
    });

    let mut rows: Vec<Option<RunResultRow>> = vec![None; cells.len()];
    let mut failures = Vec::new();
    for (i, outcome) in fresh {
        let cell = &cells[i];
        rows[i] = Some(match outcome {
            Ok(row) => row,
            Err(message) => {
                failures.push((cell.key(spec), message));
                RunResultRow::failed(
                    &spec.maps[cell.map].name,
                    cell.scene,
                    cell.agents,
                    &cell.config,
                )
            }
        });
    }
    let mut reused = 0;
    for (i, slot) in rows.iter_mut().enumerate() {
        if slot.is_none() {
            *slot = Some(previous[&cells[i].key(spec)].clone());
            reused += 1;
        }
    }
    Ok(MatrixOutput {
        rows: rows.into_iter().map(Option::unwrap).collect(),
        reused,
        failures,
    })
}

/// Change of one metric in one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellDelta {
    pub key: CellKey,
    pub metric: &'static str,
    pub baseline: f64,
    pub candidate: f64,
    /// `(candidate - baseline) / baseline`; infinite when the baseline is 0.
    pub relative: f64,
    pub regression: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CompareReport {
    /// Cells whose final delay or AUC moved at all.
    pub deltas: Vec<CellDelta>,
    pub only_in_baseline: Vec<CellKey>,
    pub only_in_candidate: Vec<CellKey>,
    /// Cells that succeeded in the baseline but failed in the candidate.
    pub newly_failed: Vec<CellKey>,
}

impl CompareReport {
    pub fn regressions(&self) -> usize {
        self.deltas.iter().filter(|d| d.regression).count() + self.newly_failed.len()
    }

    pub fn is_clean(&self) -> bool {
        self.regressions() == 0 && self.only_in_baseline.is_empty()
    }
}

/// Compares final delay and AUC cell by cell. Lower is better; a cell
/// regresses when a metric grows by more than `rel_tol` of its baseline.
pub fn compare_tables(
    baseline: &[RunResultRow],
    candidate: &[RunResultRow],
    rel_tol: f64,
) -> CompareReport {
    let cand: BTreeMap<CellKey, &RunResultRow> =
        candidate.iter().map(|r| (CellKey::of(r), r)).collect();
    let base: BTreeMap<CellKey, &RunResultRow> =
        baseline.iter().map(|r| (CellKey::of(r), r)).collect();
    let mut report = CompareReport::default();
    for (key, b) in &base {
        let Some(c) = cand.get(key) else {
            report.only_in_baseline.push(key.clone());
            continue;
        };
        if b.succeeded() && !c.succeeded() {
            report.newly_failed.push(key.clone());
            continue;
        }
        let metrics = [
            (
                "final_delay",
                b.final_delay.map(|v| v as f64),
                c.final_delay.map(|v| v as f64),
            ),
            ("auc", b.auc, c.auc),
        ];
        for (metric, bv, cv) in metrics {
            let (Some(bv), Some(cv)) = (bv, cv) else {
                continue;
            };
            if bv == cv {
                continue;
            }
            let relative = if bv == 0.0 {
                f64::INFINITY.copysign(cv - bv)
            } else {
                (cv - bv) / bv
            };
            report.deltas.push(CellDelta {
                key: key.clone(),
                metric,
                baseline: bv,
                candidate: cv,
                relative,
                regression: relative > rel_tol,
            });
        }
    }
    report.only_in_candidate = cand
        .keys()
        .filter(|k| !base.contains_key(k))
        .cloned()
        .collect();
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_curve() {
        assert_eq!(auc(&[(0.0, 7)], 3.0).unwrap(), 21.0);
    }

    #[test]
    fn piecewise_curve() {
        assert_eq!(auc(&[(0.0, 10), (5.0, 0)], 10.0).unwrap(), 50.0);
    }

    #[test]
    fn points_past_the_limit_are_clamped() {
        assert_eq!(
            auc(&[(0.0, 10), (4.0, 6), (12.0, 1)], 10.0).unwrap(),
            40.0 + 36.0
        );
    }

    #[test]
    fn rejects_bad_trajectories() {
        assert!(auc(&[], 1.0).is_err());
        assert!(auc(&[(0.0, 3), (2.0, 2), (2.0, 1)], 5.0).is_err());
        assert!(auc(&[(1.0, 3)], 5.0).is_err());
        assert!(auc(&[(0.0, 3)], f64::NAN).is_err());
    }

    #[test]
    fn mean_of_two_step_curves() {
        let a = [(0.0, 10), (2.0, 4)];
        let b = [(0.0, 6), (1.0, 2), (9.0, 0)];
        let mean = mean_curve(&[&a, &b], 5.0);
        assert_eq!(mean, vec![(0.0, 8.0), (1.0, 6.0), (2.0, 3.0)]);
    }

    fn record(final_delay: u64, auc: f64) -> RunRecord {
        RunRecord {
            config: LnsConfig::default(),
            initial_delay: final_delay,
            trajectory: vec![(0.0, final_delay)],
            iterations: 0,
            accepted: 0,
            failed_replans: 0,
            strategy_usage: BTreeMap::new(),
            final_delay,
            auc,
            core_seconds: 0.0,
            converged: false,
        }
    }

    #[test]
    fn aggregate_single_and_pair() {
        let one = aggregate_over_scenes(&[record(120, 7.0)]).unwrap();
        assert_eq!(
            (one.mean_final_delay, one.mean_auc, one.variance_final_delay),
            (120.0, 7.0, 0.0)
        );
        let two = aggregate_over_scenes(&[record(100, 1.0), record(300, 3.0)]).unwrap();
        assert_eq!(two.mean_final_delay, 200.0);
        assert_eq!(two.variance_final_delay, 20000.0);
        assert_eq!(two.mean_auc, 2.0);
    }

    #[test]
    fn aggregate_rejects_mixed_or_empty() {
        assert!(aggregate_over_scenes(&[]).is_err());
        let mut other = record(1, 1.0);
        other.config.seed = 99;
        assert!(aggregate_over_scenes(&[record(1, 1.0), other]).is_err());
    }

    fn row(seed: u64, final_delay: Option<u64>, auc: Option<f64>) -> RunResultRow {
        RunResultRow {
            init_delay: final_delay.map(|d| d + 5),
            final_delay,
            auc,
            iters: final_delay.map(|_| 10),
            accepted_iters: final_delay.map(|_| 2),
            core_time_s: final_delay.map(|_| 1.0),
            ..RunResultRow::failed(
                "m",
                1,
                10,
                &LnsConfig {
                    seed,
                    ..LnsConfig::default()
                },
            )
        }
    }

    #[test]
    fn compare_identical_small_and_large_changes() {
        let base = vec![
            row(1, Some(100), Some(1000.0)),
            row(2, Some(50), Some(400.0)),
        ];
        assert!(compare_tables(&base, &base, 0.05).deltas.is_empty());

        let small = vec![
            row(1, Some(101), Some(1000.0)),
            row(2, Some(50), Some(400.0)),
        ];
        let report = compare_tables(&base, &small, 0.05);
        assert_eq!(report.deltas.len(), 1);
        assert!((report.deltas[0].relative - 0.01).abs() < 1e-12);
        assert!(report.is_clean());

        let bad = vec![row(1, Some(200), Some(2000.0)), row(2, None, None)];
        let report = compare_tables(&base, &bad, 0.05);
        assert_eq!(report.regressions(), 3);
        assert_eq!(report.newly_failed.len(), 1);
    }

    #[test]
    fn compare_reports_missing_cells() {
        let base = vec![row(1, Some(1), Some(1.0))];
        let cand = vec![row(2, Some(1), Some(1.0))];
        let report = compare_tables(&base, &cand, 0.05);
        assert_eq!(report.only_in_baseline.len(), 1);
        assert_eq!(report.only_in_candidate.len(), 1);
        assert!(!report.is_clean());
    }

    #[test]
    fn summarize_groups_over_scenes_and_seeds() {
        let rows = vec![
            row(1, Some(100), Some(1.0)),
            row(2, Some(300), Some(3.0)),
            row(3, None, None),
        ];
        let summary = summarize_rows(&rows);
        assert_eq!(summary.len(), 1);
        let (_, agg, failed) = &summary[0];
        assert_eq!(agg.as_ref().unwrap().mean_final_delay, 200.0);
        assert_eq!(*failed, 1);
    }

    #[test]
    fn size_choosing_strategies_get_one_cell() {
        let spec = MatrixSpec {
            maps: vec![MapSpec {
                name: "m".into(),
                map_file: "m.map".into(),
                scen_dir: ".".into(),
            }],
            scenes: vec![1],
            agents: vec![5],
            strategies: vec![StrategyKind::Random, StrategyKind::Bandit],
            nb_sizes: vec![4, 8],
            replans: vec![ReplanKind::Pp],
            inits: vec![InitKind::PpRestart],
            seeds: vec![0, 1],
            budget: Budget::Iterations(10),
            init_budget_s: 1.0,
            params: StrategyParams::default(),
        };
        let cells = spec.cells();
        assert_eq!(cells.len(), 2 * (2 + 1));
        assert!(cells
            .iter()
            .filter(|c| c.config.strategy == StrategyKind::Bandit)
            .all(|c| c.config.nb_size == 0));
    }
}
