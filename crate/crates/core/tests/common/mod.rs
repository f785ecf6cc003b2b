//! Independent brute-force oracles and random instance generators shared by
//! the integration tests and the acceptance suite.

#![allow(dead_code)]

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, VecDeque};

use mapf_lns::model::{CellId, Conflict, ConflictKind, Coord, GridMap, MapfInstance, Path};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

/// Cell of `path` at `t`, parked at its last cell afterwards.
fn at(path: &Path, t: usize) -> CellId {
    path.cells[t.min(path.cells.len() - 1)]
}

/// Every vertex and swap conflict, by checking every pair at every timestep
/// of the time-expanded occupancy table.
pub fn brute_force_conflicts(map: &GridMap, paths: &[Path]) -> Vec<Conflict> {
    let horizon = paths.iter().map(|p| p.cells.len() - 1).max().unwrap_or(0);
    let mut out = Vec::new();
    for i in 0..paths.len() {
        for j in i + 1..paths.len() {
            for t in 0..=horizon {
                if at(&paths[i], t) == at(&paths[j], t) {
                    out.push(Conflict {
                        time: t as u32,
                        agents: (i, j),
                        kind: ConflictKind::Vertex,
                        location: map.coord(at(&paths[i], t)),
                        other: None,
                    });
                }
                if t < horizon {
                    let (a0, a1) = (at(&paths[i], t), at(&paths[i], t + 1));
                    let (b0, b1) = (at(&paths[j], t), at(&paths[j], t + 1));
                    if a0 != a1 && a0 == b1 && a1 == b0 {
                        out.push(Conflict {
                            time: t as u32 + 1,
                            agents: (i, j),
                            kind: ConflictKind::Swap,
                            location: map.coord(a0),
                            other: Some(map.coord(a1)),
                        });
                    }
                }
            }
        }
    }
    out.sort_unstable();
    out
}

/// Shortest distances to `goal` by repeated relaxation over the edge list.
pub fn relaxation_distances(map: &GridMap, goal: CellId) -> Vec<Option<u32>> {
    let mut dist: Vec<Option<u32>> = vec![None; map.num_cells()];
    if !map.is_passable(goal) {
        return dist;
    }
    dist[goal.index()] = Some(0);
    loop {
        let mut changed = false;
        for cell in map.passable_cells() {
            for next in map.neighbors(cell) {
                if let Some(d) = dist[next.index()] {
                    if dist[cell.index()].is_none_or(|c| d + 1 < c) {
                        dist[cell.index()] = Some(d + 1);
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            return dist;
        }
    }
}

/// Length of the shortest single-agent path that avoids every `fixed` path
/// (vertex and swap, fixed agents parking at their last cell forever) and
/// can stay at `goal` afterwards, found by layered BFS over (cell, time)
/// up to `horizon`.
pub fn time_expanded_shortest(
    map: &GridMap,
    start: CellId,
    goal: CellId,
    fixed: &[Path],
    horizon: u32,
) -> Option<u32> {
    let settle = fixed.iter().map(|p| p.cells.len()).max().unwrap_or(1);
    let occupied = |c: CellId, t: usize| fixed.iter().any(|p| at(p, t) == c);
    let swapped = |from: CellId, to: CellId, t: usize| {
        from != to && fixed.iter().any(|p| at(p, t) == to && at(p, t + 1) == from)
    };
    let safe_to_stay = |t: usize| (t..=settle).all(|u| !occupied(goal, u));
    if occupied(start, 0) {
        return None;
    }
    let mut layer = vec![false; map.num_cells()];
    layer[start.index()] = true;
    for t in 0..=horizon as usize {
        if layer[goal.index()] && safe_to_stay(t) {
            return Some(t as u32);
        }
        if t == horizon as usize {
            break;
        }
        let mut next = vec![false; map.num_cells()];
        for cell in map.passable_cells().filter(|c| layer[c.index()]) {
            for to in std::iter::once(cell).chain(map.neighbors(cell)) {
                if !occupied(to, t + 1) && !swapped(cell, to, t) {
                    next[to.index()] = true;
                }
            }
        }
        layer = next;
    }
    None
}

/// Minimum sum of delays over all conflict-free joint plans, by Dijkstra
/// over (positions, finished set). A finished agent stays at its goal
/// forever; every unfinished agent pays one per timestep. `None` when no
/// joint plan exists.
pub fn joint_optimal_delay(instance: &MapfInstance) -> Option<u64> {
    let n = instance.num_agents();
    let map = instance.map();
    let starts: Vec<u32> = (0..n).map(|a| instance.start(a).0).collect();
    let all_done = (1u32 << n) - 1;
    type State = (Vec<u32>, u32);
    let mut best: HashMap<State, u64> = HashMap::new();
    let mut heap = BinaryHeap::new();
    best.insert((starts.clone(), 0), 0);
    heap.push(Reverse((0u64, starts, 0u32)));
    while let Some(Reverse((cost, pos, done))) = heap.pop() {
        if best.get(&(pos.clone(), done)).is_some_and(|&b| b < cost) {
            continue;
        }
        if done == all_done {
            let shortest: u64 = instance
                .shortest_distances()
                .iter()
                .map(|&d| u64::from(d))
                .sum();
            return Some(cost - shortest);
        }
        let mut relax =
            |pos: Vec<u32>,
             done: u32,
             cost: u64,
             heap: &mut BinaryHeap<Reverse<(u64, Vec<u32>, u32)>>| {
                let key = (pos, done);
                if best.get(&key).is_none_or(|&b| cost < b) {
                    best.insert(key.clone(), cost);
                    heap.push(Reverse((cost, key.0, key.1)));
                }
            };
        // finishing is free and only allowed on the goal
        for a in 0..n {
            if done & (1 << a) == 0 && pos[a] == instance.goal(a).0 {
                relax(pos.clone(), done | (1 << a), cost, &mut heap);
            }
        }
        let moving: Vec<usize> = (0..n).filter(|&a| done & (1 << a) == 0).collect();
        let options: Vec<Vec<u32>> = moving
            .iter()
            .map(|&a| {
                let c = CellId(pos[a]);
                std::iter::once(c)
                    .chain(map.neighbors(c))
                    .map(|x| x.0)
                    .collect()
            })
            .collect();
        let mut choice = vec![0usize; moving.len()];
        'joint: loop {
            let mut next = pos.clone();
            for (k, &a) in moving.iter().enumerate() {
                next[a] = options[k][choice[k]];
            }
            let ok = (0..n).all(|a| {
                (a + 1..n).all(|b| {
                    next[a] != next[b]
                        && !(pos[a] != next[a] && pos[a] == next[b] && next[a] == pos[b])
                })
            });
            if ok {
                relax(next, done, cost + moving.len() as u64, &mut heap);
            }
            for k in 0..choice.len() {
                choice[k] += 1;
                if choice[k] < options[k].len() {
                    continue 'joint;
                }
                choice[k] = 0;
            }
            break;
        }
    }
    None
}

/// Random map with roughly `obstacle_ratio` blocked cells, keeping only
/// the largest connected component passable.
pub fn random_map(rng: &mut impl Rng, width: u32, height: u32, obstacle_ratio: f64) -> GridMap {
    let mut passable: Vec<bool> = (0..width * height)
        .map(|_| !rng.random_bool(obstacle_ratio))
        .collect();
    let raw = GridMap::new("rand", width, height, passable.clone()).expect("valid size");
    let mut component = vec![usize::MAX; raw.num_cells()];
    let mut sizes = Vec::new();
    for cell in raw.passable_cells() {
        if component[cell.index()] != usize::MAX {
            continue;
        }
        let id = sizes.len();
        let mut size = 0;
        let mut queue = VecDeque::from([cell]);
        component[cell.index()] = id;
        while let Some(c) = queue.pop_front() {
            size += 1;
            for n in raw.neighbors(c) {
                if component[n.index()] == usize::MAX {
                    component[n.index()] = id;
                    queue.push_back(n);
                }
            }
        }
        sizes.push(size);
    }
    let Some(largest) = (0..sizes.len()).max_by_key(|&i| (sizes[i], Reverse(i))) else {
        return GridMap::open("rand", width, height).expect("valid size");
    };
    for (i, p) in passable.iter_mut().enumerate() {
        *p = component[i] == largest;
    }
    GridMap::new("rand", width, height, passable).expect("valid size")
}

/// Random instance with distinct starts and distinct goals, or `None` when
/// the map has too few passable cells.
pub fn random_instance(rng: &mut impl Rng, map: GridMap, agents: usize) -> Option<MapfInstance> {
    let mut cells: Vec<CellId> = map.passable_cells().collect();
    if cells.len() < agents {
        return None;
    }
    cells.shuffle(rng);
    let starts = cells[..agents].to_vec();
    cells.shuffle(rng);
    let goals = cells[..agents].to_vec();
    let tasks: Vec<(Coord, Coord)> = starts
        .iter()
        .zip(&goals)
        .map(|(&s, &g)| (map.coord(s), map.coord(g)))
        .collect();
    MapfInstance::new(map, tasks).ok()
}

/// Random walk of `steps` moves (waits included) from `start`.
pub fn random_walk_path(rng: &mut impl Rng, map: &GridMap, start: CellId, steps: usize) -> Path {
    let mut cells = vec![start];
    for _ in 0..steps {
        let here = *cells.last().expect("non-empty");
        let options: Vec<CellId> = std::iter::once(here).chain(map.neighbors(here)).collect();
        cells.push(*options.choose(rng).expect("wait is always possible"));
    }
    Path::new(cells)
}

/// Left Riemann sum of a step curve on a 1 ms grid. Times are given in
/// whole milliseconds so the grid hits every breakpoint exactly.
pub fn riemann_auc_ms(trajectory_ms: &[(u64, u64)], limit_ms: u64) -> f64 {
    let mut area = 0.0;
    let mut level = 0;
    for k in 0..limit_ms {
        while level + 1 < trajectory_ms.len() && trajectory_ms[level + 1].0 <= k {
            level += 1;
        }
        area += trajectory_ms[level].1 as f64 * 1e-3;
    }
    area
}

/// Random best-so-far curve in whole milliseconds: starts at 0, strictly
/// increasing times, strictly decreasing delays.
pub fn random_trajectory_ms(
    rng: &mut impl Rng,
    max_points: usize,
    max_time_ms: u64,
) -> Vec<(u64, u64)> {
    let points = rng.random_range(1..=max_points);
    let mut times: Vec<u64> = (0..points)
        .map(|_| rng.random_range(1..max_time_ms))
        .collect();
    times.push(0);
    times.sort_unstable();
    times.dedup();
    let n = times.len() as u64;
    let mut delay = rng.random_range(n..=n + 500);
    times
        .into_iter()
        .enumerate()
        .map(|(i, t)| {
            let point = (t, delay);
            // leave at least one unit for every later point
            let spare = delay - (n - 1 - i as u64);
            delay -= rng.random_range(1..=(spare / 4).max(1)).min(delay);
            point
        })
        .collect()
}
