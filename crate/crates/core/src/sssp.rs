//! Single-agent search: BFS distance fields and space-time A* against a
//! reservation table of fixed paths.

use std::cell::RefCell;
use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, VecDeque};

use rustc_hash::FxHashMap;
use thiserror::Error;

use crate::model::{AgentId, CellId, Coord, GridMap, Path};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SearchError {
    #[error("goal {0} is blocked or outside the map")]
    BlockedGoal(Coord),
}

/// Exact 4-connected distances from every cell to one goal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistanceField {
    goal: CellId,
    dist: Vec<u32>,
}

impl DistanceField {
    pub const UNREACHABLE: u32 = u32::MAX;

    pub fn goal(&self) -> CellId {
        self.goal
    }

    /// Distance to the goal, or `None` when unreachable.
    #[inline]
    pub fn get(&self, cell: CellId) -> Option<u32> {
        let d = self.dist[cell.index()];
        (d != Self::UNREACHABLE).then_some(d)
    }

    /// Raw distance, `UNREACHABLE` for disconnected and blocked cells.
    #[inline]
    pub fn raw(&self, cell: CellId) -> u32 {
        self.dist[cell.index()]
    }
}

pub fn bfs_distance_field(map: &GridMap, goal: CellId) -> Result<DistanceField, SearchError> {
    if !map.is_passable(goal) {
        let at = if goal.index() < map.num_cells() {
            map.coord(goal)
        } else {
            Coord::new(u32::MAX, u32::MAX)
        };
        return Err(SearchError::BlockedGoal(at));
    }
    let mut dist = vec![DistanceField::UNREACHABLE; map.num_cells()];
    let mut queue = VecDeque::new();
    dist[goal.index()] = 0;
    queue.push_back(goal);
    while let Some(cell) = queue.pop_front() {
        let d = dist[cell.index()] + 1;
        for n in map.neighbors(cell) {
            if dist[n.index()] == DistanceField::UNREACHABLE {
                dist[n.index()] = d;
                queue.push_back(n);
            }
        }
    }
    Ok(DistanceField { goal, dist })
}

const FREE: u32 = u32::MAX;
const SHARED: u32 = u32::MAX - 1;

/// Time-indexed occupancy of fixed paths.
///
/// Each stored path reserves its cell at every `t < arrival`, and its goal
/// permanently from `arrival` on. Edge reservations are implied by
/// consecutive vertex reservations of the same agent, so an opposing
/// traversal is detected by looking up who occupies the two endpoints.
/// Overlapping paths are allowed (soft planning, partial PBS nodes); the
/// overlap is kept in a side table.
#[derive(Debug, Clone, Default)]
pub struct ReservationTable {
    vertex: Vec<Vec<u32>>,
    shared: FxHashMap<(u32, u32), Vec<AgentId>>,
    permanent: Vec<Option<(u32, AgentId)>>,
    arrivals: BTreeMap<u32, usize>,
    stored_steps: usize,
    stored_paths: usize,
}

impl ReservationTable {
    pub fn new(num_cells: usize) -> Self {
        Self {
            vertex: vec![Vec::new(); num_cells],
            permanent: vec![None; num_cells],
            ..Self::default()
        }
    }

    pub fn num_paths(&self) -> usize {
        self.stored_paths
    }

    /// Number of timed vertex reservations (all cells before arrival).
    pub fn vertex_reservation_count(&self) -> usize {
        self.stored_steps
    }

    /// One implied edge reservation per step of each stored path.
    pub fn edge_reservation_count(&self) -> usize {
        self.stored_steps
    }

    pub fn permanent_reservation_count(&self) -> usize {
        self.permanent.iter().filter(|p| p.is_some()).count()
    }

    /// Latest arrival time of any stored path; after it nothing moves.
    pub fn max_time(&self) -> u32 {
        self.arrivals.keys().next_back().copied().unwrap_or(0)
    }

    pub fn add_path(&mut self, agent: AgentId, path: &Path) {
        let Some(goal) = path.last() else { return };
        let arrival = path.len_steps();
        for (t, &cell) in path.cells[..arrival as usize].iter().enumerate() {
            self.reserve(cell, t as u32, agent);
        }
        let slot = &mut self.permanent[goal.index()];
        debug_assert!(slot.is_none(), "two agents share a goal");
        *slot = Some((arrival, agent));
        *self.arrivals.entry(arrival).or_default() += 1;
        self.stored_steps += arrival as usize;
        self.stored_paths += 1;
    }

    pub fn remove_path(&mut self, agent: AgentId, path: &Path) {
        let Some(goal) = path.last() else { return };
        let arrival = path.len_steps();
        for (t, &cell) in path.cells[..arrival as usize].iter().enumerate() {
            self.release(cell, t as u32, agent);
        }
        if self.permanent[goal.index()].is_some_and(|(_, a)| a == agent) {
            self.permanent[goal.index()] = None;
        }
        if let Some(count) = self.arrivals.get_mut(&arrival) {
            *count -= 1;
            if *count == 0 {
                self.arrivals.remove(&arrival);
            }
        }
        self.stored_steps -= arrival as usize;
        self.stored_paths -= 1;
    }

    fn reserve(&mut self, cell: CellId, t: u32, agent: AgentId) {
        let slots = &mut self.vertex[cell.index()];
        if slots.len() <= t as usize {
            slots.resize(t as usize + 1, FREE);
        }
        let slot = &mut slots[t as usize];
        match *slot {
            FREE => *slot = agent as u32,
            SHARED => self
                .shared
                .get_mut(&(cell.0, t))
                .expect("shared slot")
                .push(agent),
            other => {
                *slot = SHARED;
                self.shared
                    .insert((cell.0, t), vec![other as AgentId, agent]);
            }
        }
    }

    fn release(&mut self, cell: CellId, t: u32, agent: AgentId) {
        let slots = &mut self.vertex[cell.index()];
        let Some(slot) = slots.get_mut(t as usize) else {
            return;
        };
        match *slot {
            FREE => {}
            SHARED => {
                let key = (cell.0, t);
                let list = self.shared.get_mut(&key).expect("shared slot");
                if let Some(i) = list.iter().position(|&a| a == agent) {
                    list.swap_remove(i);
                }
                if list.len() == 1 {
                    *slot = list[0] as u32;
                    self.shared.remove(&key);
                }
            }
            a if a as AgentId == agent => *slot = FREE,
            _ => {}
        }
        while slots.last() == Some(&FREE) {
            slots.pop();
        }
    }

    /// Calls `f` for every agent occupying `cell` at `t`, permanent included.
    #[inline]
    pub fn for_each_occupant(&self, cell: CellId, t: u32, mut f: impl FnMut(AgentId)) {
        if let Some(&slot) = self.vertex[cell.index()].get(t as usize) {
            match slot {
                FREE => {}
                SHARED => self.shared[&(cell.0, t)].iter().for_each(|&a| f(a)),
                a => f(a as AgentId),
            }
        }
        if let Some((arrival, a)) = self.permanent[cell.index()] {
            if t >= arrival {
                f(a);
            }
        }
    }

    #[inline]
    pub fn occupant_count(&self, cell: CellId, t: u32) -> u32 {
        let mut n = 0;
        self.for_each_occupant(cell, t, |_| n += 1);
        n
    }

    #[inline]
    pub fn is_occupied(&self, cell: CellId, t: u32) -> bool {
        if let Some(&slot) = self.vertex[cell.index()].get(t as usize) {
            if slot != FREE {
                return true;
            }
        }
        self.permanent[cell.index()].is_some_and(|(arrival, _)| t >= arrival)
    }

    /// Agents that traverse `to -> from` between `t` and `t + 1`.
    #[inline]
    pub fn for_each_swap(&self, from: CellId, to: CellId, t: u32, mut f: impl FnMut(AgentId)) {
        if from == to {
            return;
        }
        self.for_each_occupant(to, t, |a| {
            let mut back = false;
            self.for_each_occupant(from, t + 1, |b| back |= a == b);
            if back {
                f(a);
            }
        });
    }

    #[inline]
    pub fn is_swap_blocked(&self, from: CellId, to: CellId, t: u32) -> bool {
        let mut blocked = false;
        self.for_each_swap(from, to, t, |_| blocked = true);
        blocked
    }

    /// Who is parked on `cell` for good, and since when.
    pub fn permanent_at(&self, cell: CellId) -> Option<(u32, AgentId)> {
        self.permanent[cell.index()]
    }

    /// Last timestep with a timed (non-permanent) reservation on `cell`.
    pub fn last_timed_reservation(&self, cell: CellId) -> Option<u32> {
        self.vertex[cell.index()]
            .len()
            .checked_sub(1)
            .map(|t| t as u32)
    }

    /// Number of timed reservations on `cell` strictly after `t`.
    pub fn timed_reservations_after(&self, cell: CellId, t: u32) -> u32 {
        let slots = &self.vertex[cell.index()];
        let mut n = 0;
        for (time, &slot) in slots.iter().enumerate().skip(t as usize + 1) {
            n += match slot {
                FREE => 0,
                SHARED => self.shared[&(cell.0, time as u32)].len() as u32,
                _ => 1,
            };
        }
        n
    }
}

/// Reserves every step of every fixed path; agent ids are slice positions.
pub fn build_reservation(map: &GridMap, paths: &[Path]) -> ReservationTable {
    let mut table = ReservationTable::new(map.num_cells());
    for (agent, path) in paths.iter().enumerate() {
        table.add_path(agent, path);
    }
    table
}

/// Search horizon for one replanned agent: enough slack for any detour once
/// every fixed agent has settled.
pub fn default_horizon(map: &GridMap, table: &ReservationTable, dist_from_start: u32) -> u32 {
    table
        .max_time()
        .max(dist_from_start)
        .saturating_add(map.num_cells() as u32)
}

#[derive(Debug, Clone, Copy)]
struct OpenEntry {
    f: u32,
    g: u32,
    t: u32,
    cell: u32,
    node: u32,
}

impl PartialEq for OpenEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for OpenEntry {}

impl PartialOrd for OpenEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OpenEntry {
    // max-heap: smallest f, then largest g, then smallest (t, cell)
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .cmp(&self.f)
            .then(self.g.cmp(&other.g))
            .then(other.t.cmp(&self.t))
            .then(other.cell.cmp(&self.cell))
            .then(other.node.cmp(&self.node))
    }
}

#[derive(Debug, Clone, Copy)]
struct Node {
    cell: CellId,
    t: u32,
    g: u32,
    collisions: u32,
    parent: u32,
}

const ROOT: u32 = u32::MAX;

/// A path plus the number of soft collisions it incurs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SoftPath {
    pub path: Path,
    pub collisions: u32,
}

#[derive(Clone, Copy)]
enum Mode<'a> {
    Hard,
    Soft {
        penalty: u32,
        hard: Option<&'a ReservationTable>,
    },
}

/// Shortest path from `start` to `goal` that avoids every reservation in
/// `table` and can park at `goal` forever. `None` when no such path exists
/// within `horizon` timesteps.
pub fn spacetime_astar(
    map: &GridMap,
    start: CellId,
    goal: CellId,
    table: &ReservationTable,
    heuristic: &DistanceField,
    horizon: u32,
) -> Option<Path> {
    search(map, start, goal, table, heuristic, horizon, Mode::Hard).map(|s| s.path)
}

/// Collision-tolerant variant: reservations cost `penalty` each instead of
/// blocking, and the search minimizes `length + penalty * collisions`.
/// Visits to `goal` by other agents after arrival count as collisions.
pub fn soft_spacetime_astar(
    map: &GridMap,
    start: CellId,
    goal: CellId,
    table: &ReservationTable,
    heuristic: &DistanceField,
    horizon: u32,
    penalty: u32,
) -> Option<SoftPath> {
    search(
        map,
        start,
        goal,
        table,
        heuristic,
        horizon,
        Mode::Soft {
            penalty,
            hard: None,
        },
    )
}

/// Like [`soft_spacetime_astar`], but the reservations in `hard` block as in
/// [`spacetime_astar`]. `horizon` should cover both tables.
#[allow(clippy::too_many_arguments)]
pub fn mixed_spacetime_astar(
    map: &GridMap,
    start: CellId,
    goal: CellId,
    soft: &ReservationTable,
    hard: &ReservationTable,
    heuristic: &DistanceField,
    horizon: u32,
    penalty: u32,
) -> Option<SoftPath> {
    search(
        map,
        start,
        goal,
        soft,
        heuristic,
        horizon,
        Mode::Soft {
            penalty,
            hard: Some(hard),
        },
    )
}

/// Flat tables above this many states fall back to hashing.
const FLAT_LIMIT: usize = 1 << 24;

/// Best known `g` per collapsed (time, cell) state. The flat variant is
/// reset in O(1) by bumping a stamp.
#[derive(Default)]
struct BestTable {
    stamp: u32,
    flat: Vec<(u32, u32)>,
    hashed: FxHashMap<u64, u32>,
    use_flat: bool,
}

impl BestTable {
    fn reset(&mut self, states: usize) {
        self.use_flat = states <= FLAT_LIMIT;
        if self.use_flat {
            if self.flat.len() < states {
                self.flat.resize(states, (0, 0));
            }
            self.stamp = self.stamp.wrapping_add(1);
            if self.stamp == 0 {
                self.flat.iter_mut().for_each(|e| *e = (0, 0));
                self.stamp = 1;
            }
        } else {
            self.hashed.clear();
        }
    }

    #[inline]
    fn get(&self, key: usize) -> Option<u32> {
        if self.use_flat {
            let (stamp, g) = self.flat[key];
            (stamp == self.stamp).then_some(g)
        } else {
            self.hashed.get(&(key as u64)).copied()
        }
    }

    #[inline]
    fn insert(&mut self, key: usize, g: u32) {
        if self.use_flat {
            self.flat[key] = (self.stamp, g);
        } else {
            self.hashed.insert(key as u64, g);
        }
    }
}

#[derive(Default)]
struct Scratch {
    nodes: Vec<Node>,
    open: BinaryHeap<OpenEntry>,
    best: BestTable,
    latest: Vec<u32>,
}

/// Fills `out[c]` with one past the latest time an agent may stand on `c`
/// and still reach `goal`, given that parked agents block their cells from
/// arrival onward (`0`: never, `u32::MAX`: unbounded). Timed reservations
/// are ignored, so this only ever prunes dead states.
fn latest_departure(map: &GridMap, goal: CellId, blocking: &ReservationTable, out: &mut Vec<u32>) {
    out.clear();
    out.resize(map.num_cells(), 0);
    let cap = |c: CellId| {
        blocking
            .permanent_at(c)
            .map_or(u32::MAX, |(arrival, _)| arrival)
    };
    let mut heap = BinaryHeap::new();
    out[goal.index()] = cap(goal);
    heap.push((out[goal.index()], goal.0));
    while let Some((value, cell)) = heap.pop() {
        let cell = CellId(cell);
        if value < out[cell.index()] {
            continue;
        }
        let step = if value == u32::MAX {
            u32::MAX
        } else {
            value.saturating_sub(1)
        };
        for next in map.neighbors(cell) {
            let v = step.min(cap(next));
            if v > out[next.index()] {
                out[next.index()] = v;
                heap.push((v, next.0));
            }
        }
    }
}

thread_local! {
    static SCRATCH: RefCell<Scratch> = RefCell::new(Scratch::default());
}

fn search(
    map: &GridMap,
    start: CellId,
    goal: CellId,
    table: &ReservationTable,
    heuristic: &DistanceField,
    horizon: u32,
    mode: Mode<'_>,
) -> Option<SoftPath> {
    debug_assert_eq!(heuristic.goal(), goal);
    let h0 = heuristic.get(start)?;
    // Beyond `settled` every fixed agent is parked, so states only differ by cell.
    let blocking = match mode {
        Mode::Hard => Some(table),
        Mode::Soft { hard, .. } => hard,
    };
    let settled = table.max_time().max(blocking.map_or(0, |b| b.max_time())) + 1;
    let mut earliest_arrival = 0;
    if let Some(b) = blocking {
        if b.permanent_at(goal).is_some() || b.is_occupied(start, 0) {
            return None;
        }
        earliest_arrival = b.last_timed_reservation(goal).map_or(0, |t| t + 1);
    }

    SCRATCH.with(|scratch| {
        let scratch = &mut *scratch.borrow_mut();
        let cells = map.num_cells();
        scratch.best.reset((settled as usize + 1) * cells);
        scratch.nodes.clear();
        scratch.open.clear();
        match blocking {
            Some(b) => {
                latest_departure(map, goal, b, &mut scratch.latest);
                if scratch.latest[start.index()] == 0 {
                    return None;
                }
            }
            None => scratch.latest.clear(),
        }
        let Scratch {
            nodes,
            open,
            best,
            latest,
        } = scratch;
        let key = |cell: CellId, t: u32| t.min(settled) as usize * cells + cell.index();
        let alive = |cell: CellId, t: u32| latest.get(cell.index()).is_none_or(|&l| t < l);
        let ctx = Ctx {
            map,
            goal,
            table,
            heuristic,
            horizon,
            mode,
            earliest_arrival,
        };
        run(&ctx, start, h0, nodes, open, best, key, alive)
    })
}

struct Ctx<'a> {
    map: &'a GridMap,
    goal: CellId,
    table: &'a ReservationTable,
    heuristic: &'a DistanceField,
    horizon: u32,
    mode: Mode<'a>,
    earliest_arrival: u32,
}

#[allow(clippy::too_many_arguments)]
fn run(
    ctx: &Ctx<'_>,
    start: CellId,
    h0: u32,
    nodes: &mut Vec<Node>,
    open: &mut BinaryHeap<OpenEntry>,
    best: &mut BestTable,
    key: impl Fn(CellId, u32) -> usize,
    alive: impl Fn(CellId, u32) -> bool,
) -> Option<SoftPath> {
    let &Ctx {
        map,
        goal,
        table,
        heuristic,
        horizon,
        mode,
        earliest_arrival,
    } = ctx;

    let start_collisions = match mode {
        Mode::Hard => 0,
        Mode::Soft { .. } => table.occupant_count(start, 0),
    };
    let start_g = match mode {
        Mode::Hard => 0,
        Mode::Soft { penalty, .. } => penalty * start_collisions,
    };
    nodes.push(Node {
        cell: start,
        t: 0,
        g: start_g,
        collisions: start_collisions,
        parent: ROOT,
    });
    best.insert(key(start, 0), start_g);
    open.push(OpenEntry {
        f: start_g + h0,
        g: start_g,
        t: 0,
        cell: start.0,
        node: 0,
    });

    // Soft mode parks at the goal via a terminal entry whose cost includes
    // future visits; it is tagged with `cell == u32::MAX`.
    while let Some(entry) = open.pop() {
        if entry.cell == u32::MAX {
            return Some(reconstruct(nodes, entry.node, entry.g));
        }
        let node = nodes[entry.node as usize];
        if best.get(key(node.cell, node.t)).is_some_and(|g| g < node.g) {
            continue;
        }
        if node.cell == goal {
            match mode {
                Mode::Hard if node.t >= earliest_arrival => {
                    return Some(reconstruct(nodes, entry.node, node.collisions));
                }
                Mode::Soft { penalty, .. } if node.t >= earliest_arrival => {
                    let later = table.timed_reservations_after(goal, node.t);
                    if later == 0 {
                        return Some(reconstruct(nodes, entry.node, node.collisions));
                    }
                    open.push(OpenEntry {
                        f: node.g + penalty * later,
                        g: node.collisions + later,
                        t: node.t,
                        cell: u32::MAX,
                        node: entry.node,
                    });
                }
                _ => {}
            }
        }
        if node.t >= horizon {
            continue;
        }
        let t1 = node.t + 1;
        let moves = std::iter::once(node.cell).chain(map.neighbors(node.cell));
        for next in moves {
            let Some(h) = heuristic.get(next) else {
                continue;
            };
            if !alive(next, t1) {
                continue;
            }
            let (g, collisions) = match mode {
                Mode::Hard => {
                    if table.is_occupied(next, t1) || table.is_swap_blocked(node.cell, next, node.t)
                    {
                        continue;
                    }
                    (t1, 0)
                }
                Mode::Soft { penalty, hard } => {
                    if hard.is_some_and(|b| {
                        b.is_occupied(next, t1) || b.is_swap_blocked(node.cell, next, node.t)
                    }) {
                        continue;
                    }
                    let mut c = table.occupant_count(next, t1);
                    table.for_each_swap(node.cell, next, node.t, |_| c += 1);
                    (node.g + 1 + penalty * c, node.collisions + c)
                }
            };
            let k = key(next, t1);
            if best.get(k).is_some_and(|b| b <= g) {
                continue;
            }
            best.insert(k, g);
            let id = nodes.len() as u32;
            nodes.push(Node {
                cell: next,
                t: t1,
                g,
                collisions,
                parent: entry.node,
            });
            open.push(OpenEntry {
                f: g + h,
                g,
                t: t1,
                cell: next.0,
                node: id,
            });
        }
    }
    None
}

fn reconstruct(nodes: &[Node], mut idx: u32, collisions: u32) -> SoftPath {
    let mut cells = Vec::with_capacity(nodes[idx as usize].t as usize + 1);
    while idx != ROOT {
        let n = nodes[idx as usize];
        cells.push(n.cell);
        idx = n.parent;
    }
    cells.reverse();
    SoftPath {
        path: Path::new(cells),
        collisions,
    }
}
