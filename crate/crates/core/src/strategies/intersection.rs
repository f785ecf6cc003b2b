use std::collections::VecDeque;

use rand::seq::{index, IndexedRandom};

use super::{select_random, AgentSet, Neighborhood, SelectionContext, StrategyState, StrategyTag};
use crate::model::{AgentId, CellId, GridMap};

/// Cells with more than two passable neighbors.
#[derive(Debug, Clone)]
pub struct IntersectionIndex {
    is_intersection: Vec<bool>,
    count: usize,
}

impl IntersectionIndex {
    pub fn new(map: &GridMap) -> Self {
        let is_intersection: Vec<bool> = (0..map.num_cells() as u32)
            .map(|c| map.is_passable(CellId(c)) && map.degree(CellId(c)) > 2)
            .collect();
        let count = is_intersection.iter().filter(|&&b| b).count();
        Self {
            is_intersection,
            count,
        }
    }

    pub fn contains(&self, cell: CellId) -> bool {
        self.is_intersection[cell.index()]
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }
}

/// Intersection-centred neighborhood.
///
/// Picks a random intersection visited by some path and adds its visitors
/// by first-visit time. If that is not enough, intersections within the
/// configured BFS radius contribute their visitors in BFS order, and
/// uniformly drawn agents fill whatever is still missing. Maps without
/// intersections fall back to uniform sampling.
pub fn select_intersection(
    state: &mut StrategyState,
    ctx: &SelectionContext<'_>,
    size: usize,
) -> Neighborhood {
    let map = ctx.instance.map();
    let n = ctx.num_agents();
    let m = size.min(n).max(1);
    let index = &state.intersections;
    if index.is_empty() {
        return Neighborhood {
            tag: StrategyTag::Intersection,
            ..select_random(&mut state.rng, ctx, size)
        };
    }

    let mut seen = vec![false; map.num_cells()];
    let mut visited = Vec::new();
    for path in ctx.paths {
        for &cell in &path.cells {
            if index.contains(cell) && !seen[cell.index()] {
                seen[cell.index()] = true;
                visited.push(cell);
            }
        }
    }
    visited.sort_unstable();
    let Some(&centre) = visited.choose(&mut state.rng) else {
        return Neighborhood {
            tag: StrategyTag::Intersection,
            ..select_random(&mut state.rng, ctx, size)
        };
    };

    let region = intersections_near(map, index, centre, state.params.intersection_radius);
    let mut rank = vec![u32::MAX; map.num_cells()];
    for (i, &cell) in region.iter().enumerate() {
        rank[cell.index()] = i as u32;
    }
    // (region rank, first visit time, agent)
    let mut visits: Vec<(u32, u32, AgentId)> = Vec::new();
    let mut last_seen = vec![usize::MAX; region.len()];
    for (agent, path) in ctx.paths.iter().enumerate() {
        for (t, &cell) in path.cells.iter().enumerate() {
            let r = rank[cell.index()];
            if r != u32::MAX && last_seen[r as usize] != agent {
                last_seen[r as usize] = agent;
                visits.push((r, t as u32, agent));
            }
        }
    }
    visits.sort_unstable();

    let mut nb = AgentSet::new(n);
    for &(_, _, agent) in &visits {
        if nb.len() >= m {
            break;
        }
        nb.insert(agent);
    }
    if nb.len() < m {
        let missing = m - nb.len();
        let free: Vec<AgentId> = (0..n).filter(|&a| !nb.contains(a)).collect();
        for i in index::sample(&mut state.rng, free.len(), missing.min(free.len())) {
            nb.insert(free[i]);
        }
    }
    Neighborhood {
        agents: nb.into_vec(),
        tag: StrategyTag::Intersection,
        size_used: size,
    }
}

/// Intersections within `radius` steps of `centre`, centre first, in BFS order.
fn intersections_near(
    map: &GridMap,
    index: &IntersectionIndex,
    centre: CellId,
    radius: u32,
) -> Vec<CellId> {
    let mut dist = rustc_hash::FxHashMap::default();
    let mut queue = VecDeque::from([centre]);
    dist.insert(centre, 0u32);
    let mut out = Vec::new();
    while let Some(cell) = queue.pop_front() {
        let d = dist[&cell];
        if index.contains(cell) {
            out.push(cell);
        }
        if d == radius {
            continue;
        }
        for next in map.neighbors(cell) {
            if let std::collections::hash_map::Entry::Vacant(e) = dist.entry(next) {
                e.insert(d + 1);
                queue.push_back(next);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::super::test_support::Fixture;
    use super::super::{StrategyParams, StrategyState};
    use super::*;
    use crate::model::{Coord, MapfInstance, Path};

    #[test]
    fn corridor_has_no_intersections_and_falls_back() {
        let map = GridMap::open("corridor", 6, 1).unwrap();
        let c = |col: u32| map.cell(Coord::new(0, col)).unwrap();
        let instance = MapfInstance::new(
            map.clone(),
            vec![
                (Coord::new(0, 0), Coord::new(0, 1)),
                (Coord::new(0, 3), Coord::new(0, 5)),
            ],
        )
        .unwrap();
        let fx = Fixture::new(
            instance,
            vec![
                Path::new(vec![c(0), c(1)]),
                Path::new(vec![c(3), c(4), c(5)]),
            ],
        );
        let mut state = StrategyState::new(&fx.instance, 0, StrategyParams::default());
        assert!(state.intersections.is_empty());
        let nb = select_intersection(&mut state, &fx.ctx(), 2);
        assert_eq!(nb.agents.len(), 2);
        assert_eq!(nb.tag, StrategyTag::Intersection);
    }

    #[test]
    fn visitors_of_single_crossing_come_first_by_time() {
        // plus-shaped map: only the centre has degree 4
        let mut passable = vec![false; 25];
        for i in 0..5 {
            passable[2 * 5 + i] = true;
            passable[i * 5 + 2] = true;
        }
        let map = GridMap::new("plus", 5, 5, passable).unwrap();
        let c = |r: u32, col: u32| map.cell(Coord::new(r, col)).unwrap();
        let instance = MapfInstance::new(
            map.clone(),
            vec![
                (Coord::new(2, 0), Coord::new(2, 4)),
                (Coord::new(0, 2), Coord::new(4, 2)),
                (Coord::new(4, 2), Coord::new(3, 2)),
            ],
        )
        .unwrap();
        let p0 = Path::new(vec![c(2, 0), c(2, 1), c(2, 2), c(2, 3), c(2, 4)]);
        let p1 = Path::new(vec![
            c(0, 2),
            c(0, 2),
            c(0, 2),
            c(1, 2),
            c(2, 2),
            c(3, 2),
            c(3, 2),
            c(4, 2),
        ]);
        let p2 = Path::new(vec![c(4, 2), c(3, 2)]);
        let fx = Fixture::new(instance, vec![p0, p1, p2]);
        let mut state = StrategyState::new(&fx.instance, 0, StrategyParams::default());
        assert_eq!(state.intersections.len(), 1);
        let nb = select_intersection(&mut state, &fx.ctx(), 2);
        assert_eq!(nb.agents, vec![0, 1]);
    }
}
