//! Grid maps, agent tasks, paths and the sum-of-delays objective.
//!
//! Agents follow stay-at-target semantics: once a path ends, the agent keeps
//! occupying its goal cell for every later timestep.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sssp::{bfs_distance_field, DistanceField};

pub type AgentId = usize;

/// Row/column position, origin at the top-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Coord {
    pub row: u32,
    pub col: u32,
}

impl Coord {
    pub const fn new(row: u32, col: u32) -> Self {
        Self { row, col }
    }

    pub fn manhattan(self, other: Coord) -> u32 {
        self.row.abs_diff(other.row) + self.col.abs_diff(other.col)
    }
}

impl fmt::Display for Coord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.row, self.col)
    }
}

/// Dense row-major cell index into a [`GridMap`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellId(pub u32);

impl CellId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("map must be at least 1x1, got {width}x{height}")]
    EmptyMap { width: u32, height: u32 },
    #[error("map has {got} cells, expected {expected}")]
    CellCount { expected: usize, got: usize },
    #[error("agent {agent}: {which} {at} is outside the map or blocked")]
    BlockedEndpoint {
        agent: AgentId,
        which: &'static str,
        at: Coord,
    },
    #[error("agent {agent}: goal {goal} is unreachable from start {start}")]
    Unreachable {
        agent: AgentId,
        start: Coord,
        goal: Coord,
    },
    #[error("agents {first} and {second} share the {which} {at}")]
    DuplicateEndpoint {
        first: AgentId,
        second: AgentId,
        which: &'static str,
        at: Coord,
    },
    #[error("malformed path for agent {agent}: {reason}")]
    MalformedPath { agent: AgentId, reason: String },
    #[error("path of length {length} is shorter than the shortest distance {shortest}")]
    ShorterThanShortest { length: u32, shortest: u32 },
    #[error("expected {expected} paths, got {got}")]
    PathCount { expected: usize, got: usize },
}

/// A 4-connected grid of passable and blocked cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridMap {
    name: String,
    width: u32,
    height: u32,
    passable: Vec<bool>,
    // up to four passable neighbors per cell, `NO_CELL` padded
    adjacency: Vec<[u32; 4]>,
    degree: Vec<u8>,
}

const NO_CELL: u32 = u32::MAX;

impl GridMap {
    pub fn new(
        name: impl Into<String>,
        width: u32,
        height: u32,
        passable: Vec<bool>,
    ) -> Result<Self, ModelError> {
        if width == 0 || height == 0 {
            return Err(ModelError::EmptyMap { width, height });
        }
        let expected = width as usize * height as usize;
        if passable.len() != expected {
            return Err(ModelError::CellCount {
                expected,
                got: passable.len(),
            });
        }
        let mut adjacency = vec![[NO_CELL; 4]; expected];
        let mut degree = vec![0u8; expected];
        for row in 0..height {
            for col in 0..width {
                let idx = (row * width + col) as usize;
                if !passable[idx] {
                    continue;
                }
                // fixed order: up, left, right, down
                let candidates = [
                    (row > 0).then(|| idx - width as usize),
                    (col > 0).then(|| idx - 1),
                    (col + 1 < width).then(|| idx + 1),
                    (row + 1 < height).then(|| idx + width as usize),
                ];
                for n in candidates.into_iter().flatten() {
                    if passable[n] {
                        adjacency[idx][degree[idx] as usize] = n as u32;
                        degree[idx] += 1;
                    }
                }
            }
        }
        Ok(Self {
            name: name.into(),
            width,
            height,
            passable,
            adjacency,
            degree,
        })
    }

    /// An obstacle-free `width`×`height` grid.
    pub fn open(name: impl Into<String>, width: u32, height: u32) -> Result<Self, ModelError> {
        Self::new(
            name,
            width,
            height,
            vec![true; width as usize * height as usize],
        )
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn num_cells(&self) -> usize {
        self.passable.len()
    }

    pub fn num_passable(&self) -> usize {
        self.passable.iter().filter(|&&p| p).count()
    }

    pub fn contains(&self, c: Coord) -> bool {
        c.row < self.height && c.col < self.width
    }

    pub fn cell(&self, c: Coord) -> Option<CellId> {
        self.contains(c).then(|| CellId(c.row * self.width + c.col))
    }

    pub fn coord(&self, cell: CellId) -> Coord {
        Coord::new(cell.0 / self.width, cell.0 % self.width)
    }

    pub fn is_passable(&self, cell: CellId) -> bool {
        self.passable.get(cell.index()).copied().unwrap_or(false)
    }

    pub fn is_passable_at(&self, c: Coord) -> bool {
        self.cell(c).is_some_and(|cell| self.is_passable(cell))
    }

    pub fn passable_cells(&self) -> impl Iterator<Item = CellId> + '_ {
        self.passable
            .iter()
            .enumerate()
            .filter(|(_, &p)| p)
            .map(|(i, _)| CellId(i as u32))
    }

    /// Passable 4-neighbors of `cell`, in up/left/right/down order.
    #[inline]
    pub fn neighbors(&self, cell: CellId) -> impl Iterator<Item = CellId> + '_ {
        let i = cell.index();
        self.adjacency[i][..self.degree[i] as usize]
            .iter()
            .map(|&n| CellId(n))
    }

    #[inline]
    pub fn degree(&self, cell: CellId) -> usize {
        self.degree[cell.index()] as usize
    }

    pub fn are_adjacent(&self, a: CellId, b: CellId) -> bool {
        self.neighbors(a).any(|n| n == b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentTask {
    pub agent_id: AgentId,
    pub start: Coord,
    pub goal: Coord,
}

/// Immutable problem statement: a map, one task per agent and the per-agent
/// BFS distance fields used as heuristics and as the delay baseline.
#[derive(Debug, Clone)]
pub struct MapfInstance {
    map: GridMap,
    tasks: Vec<AgentTask>,
    starts: Vec<CellId>,
    goals: Vec<CellId>,
    heuristics: Vec<DistanceField>,
    shortest: Vec<u32>,
}

impl MapfInstance {
    /// Validates endpoints and computes shortest distances. Agent ids are
    /// reassigned to task order.
    pub fn new(map: GridMap, tasks: Vec<(Coord, Coord)>) -> Result<Self, ModelError> {
        let mut starts = Vec::with_capacity(tasks.len());
        let mut goals = Vec::with_capacity(tasks.len());
        let mut start_owner = vec![usize::MAX; map.num_cells()];
        let mut goal_owner = vec![usize::MAX; map.num_cells()];
        for (agent, &(start, goal)) in tasks.iter().enumerate() {
            let s = map.cell(start).filter(|&c| map.is_passable(c)).ok_or(
                ModelError::BlockedEndpoint {
                    agent,
                    which: "start",
                    at: start,
                },
            )?;
            let g = map.cell(goal).filter(|&c| map.is_passable(c)).ok_or(
                ModelError::BlockedEndpoint {
                    agent,
                    which: "goal",
                    at: goal,
                },
            )?;
            if start_owner[s.index()] != usize::MAX {
                return Err(ModelError::DuplicateEndpoint {
                    first: start_owner[s.index()],
                    second: agent,
                    which: "start",
                    at: start,
                });
            }
            if goal_owner[g.index()] != usize::MAX {
                return Err(ModelError::DuplicateEndpoint {
                    first: goal_owner[g.index()],
                    second: agent,
                    which: "goal",
                    at: goal,
                });
            }
            start_owner[s.index()] = agent;
            goal_owner[g.index()] = agent;
            starts.push(s);
            goals.push(g);
        }

        let mut heuristics = Vec::with_capacity(tasks.len());
        let mut shortest = Vec::with_capacity(tasks.len());
        for (agent, (&s, &g)) in starts.iter().zip(&goals).enumerate() {
            let field = bfs_distance_field(&map, g).expect("goal checked passable");
            let d = field.get(s).ok_or(ModelError::Unreachable {
                agent,
                start: map.coord(s),
                goal: map.coord(g),
            })?;
            shortest.push(d);
            heuristics.push(field);
        }

        let tasks = tasks
            .into_iter()
            .enumerate()
            .map(|(agent_id, (start, goal))| AgentTask {
                agent_id,
                start,
                goal,
            })
            .collect();
        Ok(Self {
            map,
            tasks,
            starts,
            goals,
            heuristics,
            shortest,
        })
    }

    pub fn map(&self) -> &GridMap {
        &self.map
    }

    pub fn tasks(&self) -> &[AgentTask] {
        &self.tasks
    }

    pub fn num_agents(&self) -> usize {
        self.tasks.len()
    }

    pub fn start(&self, agent: AgentId) -> CellId {
        self.starts[agent]
    }

    pub fn goal(&self, agent: AgentId) -> CellId {
        self.goals[agent]
    }

    /// BFS distance field towards the agent's goal.
    pub fn heuristic(&self, agent: AgentId) -> &DistanceField {
        &self.heuristics[agent]
    }

    pub fn shortest(&self, agent: AgentId) -> u32 {
        self.shortest[agent]
    }

    pub fn shortest_distances(&self) -> &[u32] {
        &self.shortest
    }

    /// A copy restricted to the first `n` agents.
    pub fn prefix(&self, n: usize) -> Self {
        let n = n.min(self.num_agents());
        Self {
            map: self.map.clone(),
            tasks: self.tasks[..n].to_vec(),
            starts: self.starts[..n].to_vec(),
            goals: self.goals[..n].to_vec(),
            heuristics: self.heuristics[..n].to_vec(),
            shortest: self.shortest[..n].to_vec(),
        }
    }
}

/// One cell per timestep, `t = 0..=length`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Path {
    pub cells: Vec<CellId>,
}

impl Path {
    pub fn new(cells: Vec<CellId>) -> Self {
        Self { cells }
    }

    /// Number of edges traversed, waits included. Zero for an empty path.
    #[inline]
    pub fn len_steps(&self) -> u32 {
        self.cells.len().saturating_sub(1) as u32
    }

    /// Position at `t`, holding the final cell forever after the path ends.
    #[inline]
    pub fn at(&self, t: u32) -> CellId {
        let i = (t as usize).min(self.cells.len() - 1);
        self.cells[i]
    }

    pub fn first(&self) -> Option<CellId> {
        self.cells.first().copied()
    }

    pub fn last(&self) -> Option<CellId> {
        self.cells.last().copied()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

/// Edges traversed by `path`, counting waits.
pub fn path_length(path: &Path) -> Result<u32, ModelError> {
    if path.is_empty() {
        return Err(ModelError::MalformedPath {
            agent: usize::MAX,
            reason: "empty path".into(),
        });
    }
    Ok(path.len_steps())
}

/// `path_length - shortest`; a shorter path means a planner bug.
pub fn compute_delay(path: &Path, shortest: u32) -> Result<u32, ModelError> {
    let length = path_length(path)?;
    length
        .checked_sub(shortest)
        .ok_or(ModelError::ShorterThanShortest { length, shortest })
}

pub fn sum_of_delays(instance: &MapfInstance, paths: &[Path]) -> Result<u64, ModelError> {
    if paths.len() != instance.num_agents() {
        return Err(ModelError::PathCount {
            expected: instance.num_agents(),
            got: paths.len(),
        });
    }
    paths
        .iter()
        .zip(instance.shortest_distances())
        .try_fold(0u64, |acc, (p, &d)| {
            Ok(acc + u64::from(compute_delay(p, d)?))
        })
}

/// A full path assignment with its cached objective value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Solution {
    pub paths: Vec<Path>,
    pub sum_of_delays: u64,
}

impl Solution {
    /// Checks endpoints and delays but not conflicts; see [`validate_solution`].
    pub fn new(instance: &MapfInstance, paths: Vec<Path>) -> Result<Self, ModelError> {
        check_paths(instance, &paths)?;
        let sum_of_delays = sum_of_delays(instance, &paths)?;
        Ok(Self {
            paths,
            sum_of_delays,
        })
    }

    pub fn delays(&self, instance: &MapfInstance) -> Vec<u32> {
        self.paths
            .iter()
            .enumerate()
            .map(|(i, p)| p.len_steps() - instance.shortest(i))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConflictKind {
    Vertex,
    Swap,
}

/// A collision between two agents. For swaps, `location` is where the first
/// agent was at `time - 1` and `other` where it is at `time`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Conflict {
    pub time: u32,
    pub agents: (AgentId, AgentId),
    pub kind: ConflictKind,
    pub location: Coord,
    pub other: Option<Coord>,
}

impl fmt::Display for Conflict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            ConflictKind::Vertex => write!(
                f,
                "vertex conflict: agents {} and {} at {} at time {}",
                self.agents.0, self.agents.1, self.location, self.time
            ),
            ConflictKind::Swap => write!(
                f,
                "swap conflict: agents {} and {} on edge {}-{} at time {}",
                self.agents.0,
                self.agents.1,
                self.location,
                self.other.unwrap_or(self.location),
                self.time
            ),
        }
    }
}

/// Checks the shape of every path: right count, correct endpoints, passable
/// cells and unit steps.
pub fn check_paths(instance: &MapfInstance, paths: &[Path]) -> Result<(), ModelError> {
    if paths.len() != instance.num_agents() {
        return Err(ModelError::PathCount {
            expected: instance.num_agents(),
            got: paths.len(),
        });
    }
    let map = instance.map();
    for (agent, path) in paths.iter().enumerate() {
        let malformed = |reason: String| ModelError::MalformedPath { agent, reason };
        let (Some(first), Some(last)) = (path.first(), path.last()) else {
            return Err(malformed("empty path".into()));
        };
        if first != instance.start(agent) {
            return Err(malformed(format!(
                "starts at {} instead of {}",
                map.coord(first),
                map.coord(instance.start(agent))
            )));
        }
        if last != instance.goal(agent) {
            return Err(malformed(format!(
                "ends at {} instead of {}",
                map.coord(last),
                map.coord(instance.goal(agent))
            )));
        }
        for (t, w) in path.cells.windows(2).enumerate() {
            if !map.is_passable(w[1]) {
                return Err(malformed(format!("blocked cell at time {}", t + 1)));
            }
            if w[0] != w[1] && !map.are_adjacent(w[0], w[1]) {
                return Err(malformed(format!(
                    "jump from {} to {} at time {}",
                    map.coord(w[0]),
                    map.coord(w[1]),
                    t + 1
                )));
            }
        }
    }
    Ok(())
}

/// Enumerates every vertex and swap conflict, sorted by time then agent pair.
/// Malformed paths are reported as errors, never as conflicts.
pub fn validate_solution(
    instance: &MapfInstance,
    paths: &[Path],
) -> Result<Vec<Conflict>, ModelError> {
    check_paths(instance, paths)?;
    Ok(find_conflicts(instance.map(), paths))
}

/// Conflict enumeration without shape checks; paths must be non-empty.
pub fn find_conflicts(map: &GridMap, paths: &[Path]) -> Vec<Conflict> {
    let horizon = paths.iter().map(Path::len_steps).max().unwrap_or(0);
    let mut conflicts = Vec::new();
    let mut now: Vec<(CellId, AgentId)> = Vec::with_capacity(paths.len());
    let mut next: Vec<(CellId, AgentId)> = Vec::with_capacity(paths.len());
    let snapshot = |t: u32, out: &mut Vec<(CellId, AgentId)>| {
        out.clear();
        out.extend(paths.iter().enumerate().map(|(a, p)| (p.at(t), a)));
        out.sort_unstable();
    };
    snapshot(0, &mut now);
    for t in 0..=horizon {
        for group in now.chunk_by(|a, b| a.0 == b.0) {
            for (i, &(cell, a)) in group.iter().enumerate() {
                for &(_, b) in &group[i + 1..] {
                    conflicts.push(Conflict {
                        time: t,
                        agents: (a, b),
                        kind: ConflictKind::Vertex,
                        location: map.coord(cell),
                        other: None,
                    });
                }
            }
        }
        if t == horizon {
            break;
        }
        snapshot(t + 1, &mut next);
        for (a, path) in paths.iter().enumerate() {
            let (from, to) = (path.at(t), path.at(t + 1));
            if from == to {
                continue;
            }
            let lo = now.partition_point(|&(c, _)| c < to);
            for &(c, b) in &now[lo..] {
                if c != to {
                    break;
                }
                if b > a && paths[b].at(t + 1) == from {
                    conflicts.push(Conflict {
                        time: t + 1,
                        agents: (a, b),
                        kind: ConflictKind::Swap,
                        location: map.coord(from),
                        other: Some(map.coord(to)),
                    });
                }
            }
        }
        std::mem::swap(&mut now, &mut next);
    }
    conflicts.sort_unstable();
    conflicts
}

/// Earliest timestep at which two paths collide, if any.
pub fn first_collision(a: &Path, b: &Path) -> Option<u32> {
    let horizon = a.len_steps().max(b.len_steps());
    for t in 0..=horizon {
        if a.at(t) == b.at(t) {
            return Some(t);
        }
        if t < horizon && a.at(t) == b.at(t + 1) && a.at(t + 1) == b.at(t) && a.at(t) != a.at(t + 1)
        {
            return Some(t + 1);
        }
    }
    None
}
