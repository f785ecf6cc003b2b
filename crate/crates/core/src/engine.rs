//! The anytime destroy-and-repair loop.
//!
//! Only neighborhood selection and replanning run inside the core timer;
//! acceptance, bookkeeping and hooks do not count towards the budget.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bench::auc;
use crate::init::InitKind;
use crate::model::{
    find_conflicts, validate_solution, AgentId, MapfInstance, ModelError, Path, Solution,
};
use crate::replan::{ReplanKind, ReplanRequest, Replanner};
use crate::sssp::{build_reservation, ReservationTable};
use crate::strategies::{Selection, SelectionContext, StrategyKind, StrategyParams, StrategyState};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("initial solution is invalid: {0}")]
    InvalidInitial(#[from] ModelError),
    #[error("initial solution has {0} conflicts")]
    ConflictingInitial(usize),
    #[error("solution invalid after iteration {iteration}: {conflicts} conflicts")]
    CorruptedState { iteration: u64, conflicts: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
}

/// Per-thread CPU clock. Only the running thread's work is counted, so
/// sibling runs on an oversubscribed host do not inflate a run's budget.
#[derive(Debug, Clone)]
pub struct CoreTimer {
    accumulated: f64,
    span_start: Option<f64>,
}

fn thread_cpu_seconds() -> f64 {
    let mut ts = libc::timespec {
        tv_sec: 0,
        tv_nsec: 0,
    };
    // SAFETY: `ts` is a valid, writable timespec.
    let rc = unsafe { libc::clock_gettime(libc::CLOCK_THREAD_CPUTIME_ID, &mut ts) };
    assert_eq!(rc, 0, "thread CPU clock unavailable");
    ts.tv_sec as f64 + ts.tv_nsec as f64 * 1e-9
}

impl CoreTimer {
    pub fn new() -> Self {
        Self {
            accumulated: 0.0,
            span_start: None,
        }
    }

    /// A timer with one span already open.
    pub fn started() -> Self {
        let mut t = Self::new();
        t.start();
        t
    }

    pub fn start(&mut self) {
        debug_assert!(self.span_start.is_none(), "span already open");
        self.span_start = Some(thread_cpu_seconds());
    }

    pub fn stop(&mut self) {
        if let Some(s) = self.span_start.take() {
            self.accumulated += thread_cpu_seconds() - s;
        }
    }

    /// Accumulated seconds, including the open span if any.
    pub fn elapsed_seconds(&self) -> f64 {
        self.accumulated + self.span_start.map_or(0.0, |s| thread_cpu_seconds() - s)
    }
}

impl Default for CoreTimer {
    fn default() -> Self {
        Self::new()
    }
}

/// When to stop improving.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Budget {
    /// Core seconds; the running iteration is completed.
    CoreSeconds(f64),
    /// Iteration count. The trajectory's time axis is then the iteration
    /// index, which makes runs reproducible bit for bit.
    Iterations(u64),
}

impl Budget {
    pub fn limit(&self) -> f64 {
        match *self {
            Budget::CoreSeconds(s) => s,
            Budget::Iterations(n) => n as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LnsConfig {
    pub strategy: StrategyKind,
    pub nb_size: usize,
    pub replan: ReplanKind,
    pub init: InitKind,
    pub budget: Budget,
    pub seed: u64,
    pub params: StrategyParams,
    /// Re-validate the whole solution every k iterations.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validate_every: Option<u64>,
}

impl Default for LnsConfig {
    fn default() -> Self {
        Self {
            strategy: StrategyKind::Adaptive,
            nb_size: 8,
            replan: ReplanKind::Pp,
            init: InitKind::Lns2lite,
            budget: Budget::CoreSeconds(60.0),
            seed: 0,
            params: StrategyParams::default(),
            validate_every: None,
        }
    }
}

impl LnsConfig {
    pub fn check(&self) -> Result<(), EngineError> {
        if self.nb_size == 0 && !self.strategy.picks_size() {
            return Err(EngineError::Config(
                "neighborhood size must be positive".into(),
            ));
        }
        match self.budget {
            Budget::CoreSeconds(s) if !(s > 0.0 && s.is_finite()) => Err(EngineError::Config(
                format!("time limit must be positive, got {s}"),
            )),
            Budget::Iterations(0) => Err(EngineError::Config(
                "iteration limit must be positive".into(),
            )),
            _ => Ok(()),
        }
    }
}

/// Outcome of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: LnsConfig,
    pub initial_delay: u64,
    /// `(time, best sum of delays)`: starts at `(0, initial)`, then one point
    /// per accepted iteration. Time is core seconds or the iteration index.
    pub trajectory: Vec<(f64, u64)>,
    pub iterations: u64,
    pub accepted: u64,
    /// Repairs that gave up, including those cut because no strict
    /// improvement was still reachable.
    pub failed_replans: u64,
    pub strategy_usage: BTreeMap<String, u64>,
    pub final_delay: u64,
    pub auc: f64,
    /// Measured core seconds, in both budget modes.
    pub core_seconds: f64,
    pub converged: bool,
}

impl RunRecord {
    /// Upper end of the AUC integral, in trajectory time units.
    pub fn time_limit(&self) -> f64 {
        self.config.budget.limit()
    }
}

/// Strict improvement: equal sums are rejected.
#[inline]
pub fn accept_candidate(current: u64, candidate: u64) -> bool {
    candidate < current
}

/// What a hook sees after each iteration, outside the timed spans.
#[derive(Debug, Clone)]
pub struct IterationEvent<'a> {
    pub iteration: u64,
    pub selection: &'a Selection,
    pub accepted: bool,
    pub sum_of_delays: u64,
    pub core_seconds: f64,
}

pub fn lns_run(
    instance: &MapfInstance,
    initial: Solution,
    config: &LnsConfig,
) -> Result<(RunRecord, Solution), EngineError> {
    let mut replanner = config.replan.build();
    lns_run_with(instance, initial, config, replanner.as_mut(), None)
}

/// [`lns_run`] with an explicit repair operator and an optional
/// per-iteration hook.
pub fn lns_run_with(
    instance: &MapfInstance,
    initial: Solution,
    config: &LnsConfig,
    replanner: &mut dyn Replanner,
    mut hook: Option<&mut dyn FnMut(&IterationEvent<'_>)>,
) -> Result<(RunRecord, Solution), EngineError> {
    config.check()?;
    let conflicts = validate_solution(instance, &initial.paths)?;
    if !conflicts.is_empty() {
        return Err(EngineError::ConflictingInitial(conflicts.len()));
    }

    let mut paths = initial.paths;
    let mut delays: Vec<u32> = paths
        .iter()
        .enumerate()
        .map(|(i, p)| p.len_steps() - instance.shortest(i))
        .collect();
    let mut sum: u64 = delays.iter().map(|&d| u64::from(d)).sum();
    let initial_delay = sum;
    let mut table = build_reservation(instance.map(), &paths);
    let mut state = StrategyState::new(instance, config.seed, config.params);
    let mut replan_rng = ChaCha8Rng::seed_from_u64(config.seed);
    replan_rng.set_stream(1);

    let mut timer = CoreTimer::new();
    let mut trajectory = vec![(0.0, sum)];
    let mut usage = BTreeMap::new();
    let (mut iterations, mut accepted, mut failed) = (0u64, 0u64, 0u64);
    let mut converged = sum == 0;

    while !converged {
        let exhausted = match config.budget {
            Budget::CoreSeconds(limit) => timer.elapsed_seconds() >= limit,
            Budget::Iterations(limit) => iterations >= limit,
        };
        if exhausted {
            break;
        }

        timer.start();
        let selection = {
            let ctx = SelectionContext {
                instance,
                paths: &paths,
                delays: &delays,
                table: &table,
            };
            state.select(config.strategy, &ctx, config.nb_size)
        };
        let neighborhood: &[AgentId] = &selection.neighborhood.agents;
        for &a in neighborhood {
            table.remove_path(a, &paths[a]);
        }
        let bound = neighborhood
            .iter()
            .map(|&a| u64::from(paths[a].len_steps()))
            .sum();
        let replanned = replanner.replan(ReplanRequest {
            instance,
            neighborhood,
            table: &mut table,
            rng: &mut replan_rng,
            bound: Some(bound),
        });
        timer.stop();

        iterations += 1;
        if selection.converged {
            converged = true;
            restore(&mut table, neighborhood, &paths);
            break;
        }
        *usage
            .entry(selection.neighborhood.tag.label().to_string())
            .or_insert(0) += 1;

        let mut improvement = 0;
        let mut was_accepted = false;
        match replanned {
            Some(new_paths) => {
                let old: u64 = neighborhood.iter().map(|&a| u64::from(delays[a])).sum();
                let new: u64 = neighborhood
                    .iter()
                    .zip(&new_paths)
                    .map(|(&a, p)| u64::from(p.len_steps() - instance.shortest(a)))
                    .sum();
                let candidate = sum - old + new;
                if accept_candidate(sum, candidate) {
                    for (&a, p) in neighborhood.iter().zip(new_paths) {
                        delays[a] = p.len_steps() - instance.shortest(a);
                        table.add_path(a, &p);
                        paths[a] = p;
                    }
                    improvement = sum - candidate;
                    sum = candidate;
                    accepted += 1;
                    was_accepted = true;
                    let time = match config.budget {
                        Budget::CoreSeconds(_) => timer.elapsed_seconds(),
                        Budget::Iterations(_) => iterations as f64,
                    };
                    trajectory.push((time, sum));
                } else {
                    restore(&mut table, neighborhood, &paths);
                }
            }
            None => {
                failed += 1;
                restore(&mut table, neighborhood, &paths);
            }
        }
        state.feedback(&selection, improvement);
        converged = sum == 0;

        if let Some(k) = config.validate_every {
            if k > 0 && iterations % k == 0 {
                let conflicts = find_conflicts(instance.map(), &paths);
                if !conflicts.is_empty() {
                    return Err(EngineError::CorruptedState {
                        iteration: iterations,
                        conflicts: conflicts.len(),
                    });
                }
            }
        }
        if let Some(h) = hook.as_mut() {
            h(&IterationEvent {
                iteration: iterations,
                selection: &selection,
                accepted: was_accepted,
                sum_of_delays: sum,
                core_seconds: timer.elapsed_seconds(),
            });
        }
    }

    let limit = config.budget.limit();
    let area = auc(&trajectory, limit).expect("engine trajectory is ordered");
    let record = RunRecord {
        config: config.clone(),
        initial_delay,
        trajectory,
        iterations,
        accepted,
        failed_replans: failed,
        strategy_usage: usage,
        final_delay: sum,
        auc: area,
        core_seconds: timer.elapsed_seconds(),
        converged,
    };
    let solution = Solution {
        paths,
        sum_of_delays: sum,
    };
    Ok((record, solution))
}

fn restore(table: &mut ReservationTable, neighborhood: &[AgentId], paths: &[Path]) {
    for &a in neighborhood {
        table.add_path(a, &paths[a]);
    }
}
