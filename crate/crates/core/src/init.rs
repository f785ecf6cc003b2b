//! Initial solutions: prioritized planning with restarts, and a
//! collision-repair initializer that starts from collision-tolerant paths and
//! shrinks the collision count with small neighborhoods.

use std::time::Duration;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::CoreTimer;
use crate::model::{find_conflicts, AgentId, MapfInstance, Path, Solution};
use crate::replan::plan_in_order;
use crate::sssp::{default_horizon, mixed_spacetime_astar, soft_spacetime_astar, ReservationTable};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InitError {
    #[error("no collision-free solution within {seconds:.1}s ({attempts} attempts)")]
    BudgetExhausted { seconds: f64, attempts: u64 },
    #[error("{remaining} collisions left after {seconds:.1}s of repair")]
    CollisionsRemain { seconds: f64, remaining: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitKind {
    /// Collision repair, falling back to PP restarts on the leftover budget.
    Lns2lite,
    PpRestart,
}

impl InitKind {
    pub fn label(&self) -> &'static str {
        match self {
            InitKind::Lns2lite => "lns2lite",
            InitKind::PpRestart => "pp-restart",
        }
    }
}

impl std::str::FromStr for InitKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lns2lite" => Ok(InitKind::Lns2lite),
            "pp-restart" => Ok(InitKind::PpRestart),
            other => Err(format!(
                "unknown initial solver `{other}` (expected lns2lite or pp-restart)"
            )),
        }
    }
}

/// Tuning for the collision-repair initializer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepairParams {
    /// Size of the collision neighborhood.
    pub neighborhood: usize,
    /// Cost of one collision, in timesteps.
    pub penalty: u32,
}

impl RepairParams {
    /// Default collision cost: a collision outweighs any plausible detour.
    pub const DEFAULT_PENALTY: u32 = 1000;
}

impl Default for RepairParams {
    fn default() -> Self {
        Self {
            neighborhood: 8,
            penalty: Self::DEFAULT_PENALTY,
        }
    }
}

/// Statistics of a successful initialization.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct InitReport {
    pub attempts: u64,
    pub repair_iterations: u64,
    pub accepted_repairs: u64,
    pub initial_collisions: usize,
    pub seconds: f64,
}

pub fn initial_solution(
    kind: InitKind,
    instance: &MapfInstance,
    budget: Duration,
    seed: u64,
) -> Result<(Solution, InitReport), InitError> {
    match kind {
        InitKind::PpRestart => pp_restart_initial(instance, budget, seed),
        InitKind::Lns2lite => {
            let timer = CoreTimer::started();
            match lns2lite_initial(instance, budget, seed, RepairParams::default()) {
                Ok(found) => Ok(found),
                Err(e) => {
                    let left =
                        budget.saturating_sub(Duration::from_secs_f64(timer.elapsed_seconds()));
                    if left.is_zero() {
                        return Err(e);
                    }
                    pp_restart_initial(instance, left, seed)
                }
            }
        }
    }
}

/// Full-instance PP with a fresh random order per attempt until one
/// succeeds or the budget runs out. Always makes at least one attempt.
pub fn pp_restart_initial(
    instance: &MapfInstance,
    budget: Duration,
    seed: u64,
) -> Result<(Solution, InitReport), InitError> {
    let timer = CoreTimer::started();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut table = ReservationTable::new(instance.map().num_cells());
    let mut order: Vec<AgentId> = (0..instance.num_agents()).collect();
    let mut attempts = 0;
    loop {
        attempts += 1;
        order.shuffle(&mut rng);
        if let Some(planned) = plan_in_order(instance, &order, &mut table) {
            let mut paths = vec![Path::default(); instance.num_agents()];
            for (agent, path) in planned {
                paths[agent] = path;
            }
            let solution = Solution::new(instance, paths).expect("planner output is well formed");
            let report = InitReport {
                attempts,
                seconds: timer.elapsed_seconds(),
                ..InitReport::default()
            };
            return Ok((solution, report));
        }
        if timer.elapsed_seconds() >= budget.as_secs_f64() {
            return Err(InitError::BudgetExhausted {
                seconds: timer.elapsed_seconds(),
                attempts,
            });
        }
    }
}

fn soft_plan(
    instance: &MapfInstance,
    agent: AgentId,
    table: &ReservationTable,
    penalty: u32,
) -> Path {
    let start = instance.start(agent);
    let heuristic = instance.heuristic(agent);
    let horizon = default_horizon(instance.map(), table, heuristic.raw(start));
    soft_spacetime_astar(
        instance.map(),
        start,
        instance.goal(agent),
        table,
        heuristic,
        horizon,
        penalty,
    )
    .expect("goal reachable; soft search never blocks")
    .path
}

fn repair_plan(
    instance: &MapfInstance,
    agent: AgentId,
    others: &ReservationTable,
    replanned: &ReservationTable,
    penalty: u32,
) -> Option<Path> {
    let start = instance.start(agent);
    let heuristic = instance.heuristic(agent);
    let horizon = default_horizon(instance.map(), others, heuristic.raw(start)).max(
        default_horizon(instance.map(), replanned, heuristic.raw(start)),
    );
    mixed_spacetime_astar(
        instance.map(),
        start,
        instance.goal(agent),
        others,
        replanned,
        heuristic,
        horizon,
        penalty,
    )
    .map(|s| s.path)
}

/// Collision-repair initializer.
///
/// Phase 1 plans every agent with collision-tolerant A* against the agents
/// planned before it. Phase 2 picks a random collision, forms a neighborhood
/// from the two colliding agents plus agents colliding with them, and replans
/// it in random order. Within the neighborhood agents avoid each other
/// strictly; paths outside it only cost a penalty per collision. The result
/// is kept only if the total collision count strictly drops.
pub fn lns2lite_initial(
    instance: &MapfInstance,
    budget: Duration,
    seed: u64,
    params: RepairParams,
) -> Result<(Solution, InitReport), InitError> {
    let timer = CoreTimer::started();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6c6e_7332);
    let n = instance.num_agents();
    let map = instance.map();
    let mut table = ReservationTable::new(map.num_cells());
    let mut paths = vec![Path::default(); n];
    let mut order: Vec<AgentId> = (0..n).collect();
    order.shuffle(&mut rng);
    for &agent in &order {
        let path = soft_plan(instance, agent, &table, params.penalty);
        table.add_path(agent, &path);
        paths[agent] = path;
    }

    let mut conflicts = find_conflicts(map, &paths);
    let mut report = InitReport {
        initial_collisions: conflicts.len(),
        ..InitReport::default()
    };
    while !conflicts.is_empty() {
        if timer.elapsed_seconds() >= budget.as_secs_f64() {
            return Err(InitError::CollisionsRemain {
                seconds: timer.elapsed_seconds(),
                remaining: conflicts.len(),
            });
        }
        report.repair_iterations += 1;
        let neighborhood = collision_neighborhood(
            instance,
            &conflicts,
            &paths,
            &table,
            params.neighborhood,
            &mut rng,
        );

        for &agent in &neighborhood {
            table.remove_path(agent, &paths[agent]);
        }
        let mut replanned = Vec::with_capacity(neighborhood.len());
        let mut shuffled = neighborhood.clone();
        shuffled.shuffle(&mut rng);
        let mut inner = ReservationTable::new(map.num_cells());
        for &agent in &shuffled {
            match repair_plan(instance, agent, &table, &inner, params.penalty) {
                Some(path) => {
                    inner.add_path(agent, &path);
                    replanned.push((agent, path));
                }
                None => break,
            }
        }
        if replanned.len() < shuffled.len() {
            for &agent in &neighborhood {
                table.add_path(agent, &paths[agent]);
            }
            continue;
        }
        for (agent, path) in &replanned {
            table.add_path(*agent, path);
        }
        let old: Vec<(AgentId, Path)> = replanned
            .iter()
            .map(|(a, p)| (*a, std::mem::replace(&mut paths[*a], p.clone())))
            .collect();
        let candidate = find_conflicts(map, &paths);
        if candidate.len() < conflicts.len() {
            conflicts = candidate;
            report.accepted_repairs += 1;
        } else {
            for ((agent, new), (_, previous)) in replanned.iter().zip(old) {
                table.remove_path(*agent, new);
                table.add_path(*agent, &previous);
                paths[*agent] = previous;
            }
        }
    }
    report.seconds = timer.elapsed_seconds();
    let solution = Solution::new(instance, paths).expect("planner output is well formed");
    Ok((solution, report))
}

/// Two agents of a random collision, then agents colliding with either of
/// them, then agents in their way: those parked for good on one of their
/// paths or passing near the collision. Later groups only fill slots left
/// by earlier ones, each drawn at random, up to `size` agents in total.
fn collision_neighborhood(
    instance: &MapfInstance,
    conflicts: &[crate::model::Conflict],
    paths: &[Path],
    table: &ReservationTable,
    size: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<AgentId> {
    let map = instance.map();
    let picked = conflicts[rng.random_range(0..conflicts.len())];
    let (a, b) = picked.agents;
    let mut neighborhood = vec![a, b];
    let fill = |group: Vec<AgentId>, neighborhood: &mut Vec<AgentId>, rng: &mut ChaCha8Rng| {
        let mut group: Vec<AgentId> = group
            .into_iter()
            .filter(|x| !neighborhood.contains(x))
            .collect();
        group.sort_unstable();
        group.dedup();
        let extra = size.saturating_sub(neighborhood.len()).min(group.len());
        neighborhood.extend(group.choose_multiple(rng, extra).copied());
    };

    let colliding: Vec<AgentId> = conflicts
        .iter()
        .filter_map(|c| match c.agents {
            (x, y) if x == a || x == b => Some(y),
            (x, y) if y == a || y == b => Some(x),
            _ => None,
        })
        .collect();
    fill(colliding, &mut neighborhood, rng);

    let mut in_way = Vec::new();
    for &agent in &[a, b] {
        for &cell in &paths[agent].cells {
            if let Some((_, parked)) = table.permanent_at(cell) {
                in_way.push(parked);
            }
        }
    }
    let center = map.cell(picked.location).expect("conflict on the map");
    let window = picked.time.saturating_sub(NEAR_STEPS)..=picked.time + NEAR_STEPS;
    for cell in std::iter::once(center).chain(map.neighbors(center)) {
        for t in window.clone() {
            table.for_each_occupant(cell, t, |x| in_way.push(x));
        }
    }
    fill(in_way, &mut neighborhood, rng);
    neighborhood
}

/// Time window, in steps either side of a collision, for nearby agents.
const NEAR_STEPS: u32 = 2;
