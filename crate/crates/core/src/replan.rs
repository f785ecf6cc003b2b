//! Repair operators: prioritized planning with a random total order and
//! priority-based search over partial orders.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{first_collision, AgentId, MapfInstance, Path};
use crate::sssp::{default_horizon, spacetime_astar, ReservationTable};

/// One repair call. `table` holds exactly the fixed paths (agents outside
/// the neighborhood) and is handed back in that state.
pub struct ReplanRequest<'a> {
    pub instance: &'a MapfInstance,
    pub neighborhood: &'a [AgentId],
    pub table: &'a mut ReservationTable,
    pub rng: &'a mut ChaCha8Rng,
    /// When set, only results whose total path length is strictly below it
    /// are wanted; the solver may give up as soon as none can be.
    pub bound: Option<u64>,
}

/// A repair operator. Returns one path per neighborhood agent, in
/// neighborhood order, or `None` when it gives up.
pub trait Replanner {
    fn replan(&mut self, request: ReplanRequest<'_>) -> Option<Vec<Path>>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum ReplanKind {
    Pp,
    Pbs { node_budget: usize },
}

impl ReplanKind {
    pub const DEFAULT_PBS_BUDGET: usize = 64;

    pub fn label(&self) -> String {
        match self {
            ReplanKind::Pp => "pp".into(),
            ReplanKind::Pbs { node_budget } => format!("pbs:{node_budget}"),
        }
    }

    pub fn build(&self) -> Box<dyn Replanner + Send> {
        match *self {
            ReplanKind::Pp => Box::new(PrioritizedPlanning),
            ReplanKind::Pbs { node_budget } => Box::new(PriorityBasedSearch { node_budget }),
        }
    }
}

impl std::str::FromStr for ReplanKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pp" => Ok(ReplanKind::Pp),
            "pbs" => Ok(ReplanKind::Pbs {
                node_budget: Self::DEFAULT_PBS_BUDGET,
            }),
            other => match other.strip_prefix("pbs:").map(str::parse) {
                Some(Ok(node_budget)) if node_budget > 0 => Ok(ReplanKind::Pbs { node_budget }),
                _ => Err(format!(
                    "unknown replan solver `{other}` (expected pp, pbs or pbs:<budget>)"
                )),
            },
        }
    }
}

/// Shortest constrained path of at most `max_len` steps.
fn plan_one(
    instance: &MapfInstance,
    agent: AgentId,
    table: &ReservationTable,
    max_len: Option<u64>,
) -> Option<Path> {
    let start = instance.start(agent);
    let heuristic = instance.heuristic(agent);
    let mut horizon = default_horizon(instance.map(), table, heuristic.raw(start));
    if let Some(cap) = max_len {
        if cap < u64::from(instance.shortest(agent)) {
            return None;
        }
        horizon = horizon.min(u32::try_from(cap).unwrap_or(u32::MAX));
    }
    spacetime_astar(
        instance.map(),
        start,
        instance.goal(agent),
        table,
        heuristic,
        horizon,
    )
}

/// Longest path that keeps `fixed + path + others_lb` strictly below `bound`.
fn length_cap(bound: Option<u64>, fixed: u64, others_lb: u64) -> Result<Option<u64>, ()> {
    match bound {
        None => Ok(None),
        Some(b) => b.checked_sub(1 + fixed + others_lb).map(Some).ok_or(()),
    }
}

/// Prioritized planning in the given order. Leaves `table` unchanged.
pub fn plan_in_order(
    instance: &MapfInstance,
    order: &[AgentId],
    table: &mut ReservationTable,
) -> Option<Vec<(AgentId, Path)>> {
    plan_in_order_bounded(instance, order, table, None)
}

/// [`plan_in_order`] that stops once the total length cannot end below
/// `bound`, counting unplanned agents at their shortest length.
pub fn plan_in_order_bounded(
    instance: &MapfInstance,
    order: &[AgentId],
    table: &mut ReservationTable,
    bound: Option<u64>,
) -> Option<Vec<(AgentId, Path)>> {
    let mut planned: Vec<(AgentId, Path)> = Vec::with_capacity(order.len());
    let mut ok = true;
    let mut fixed = 0u64;
    let mut rest: u64 = order.iter().map(|&a| u64::from(instance.shortest(a))).sum();
    for &agent in order {
        rest -= u64::from(instance.shortest(agent));
        let Ok(cap) = length_cap(bound, fixed, rest) else {
            ok = false;
            break;
        };
        match plan_one(instance, agent, table, cap) {
            Some(path) => {
                fixed += u64::from(path.len_steps());
                table.add_path(agent, &path);
                planned.push((agent, path));
            }
            None => {
                ok = false;
                break;
            }
        }
    }
    for (agent, path) in &planned {
        table.remove_path(*agent, path);
    }
    ok.then_some(planned)
}

/// Shuffles the neighborhood once and plans each agent against the fixed
/// paths plus everything planned before it. No internal restarts.
pub fn pp_replan(request: ReplanRequest<'_>) -> Option<Vec<Path>> {
    let ReplanRequest {
        instance,
        neighborhood,
        table,
        rng,
        bound,
    } = request;
    let mut order = neighborhood.to_vec();
    order.shuffle(rng);
    let planned = plan_in_order_bounded(instance, &order, table, bound)?;
    Some(reorder(neighborhood, planned))
}

fn reorder(neighborhood: &[AgentId], planned: Vec<(AgentId, Path)>) -> Vec<Path> {
    let mut slots: Vec<Option<Path>> = vec![None; neighborhood.len()];
    for (agent, path) in planned {
        let i = neighborhood
            .iter()
            .position(|&a| a == agent)
            .expect("planned agent in neighborhood");
        slots[i] = Some(path);
    }
    slots
        .into_iter()
        .map(|p| p.expect("every agent planned"))
        .collect()
}

#[derive(Debug, Clone, Copy, Default)]
pub struct PrioritizedPlanning;

impl Replanner for PrioritizedPlanning {
    fn replan(&mut self, request: ReplanRequest<'_>) -> Option<Vec<Path>> {
        pp_replan(request)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PriorityBasedSearch {
    pub node_budget: usize,
}

impl Default for PriorityBasedSearch {
    fn default() -> Self {
        Self {
            node_budget: ReplanKind::DEFAULT_PBS_BUDGET,
        }
    }
}

impl Replanner for PriorityBasedSearch {
    fn replan(&mut self, request: ReplanRequest<'_>) -> Option<Vec<Path>> {
        pbs_replan(request, self.node_budget)
    }
}

/// A node of the priority tree, indexed by neighborhood position.
#[derive(Debug, Clone)]
pub struct PbsNode {
    /// `higher[i][j]`: i has priority over j (transitively closed).
    pub higher: Vec<Vec<bool>>,
    pub paths: Vec<Path>,
    pub cost: u64,
}

impl PbsNode {
    fn ancestors(&self, j: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.paths.len()).filter(move |&i| self.higher[i][j])
    }

    /// First colliding pair by (time, i, j).
    pub fn first_collision(&self) -> Option<(usize, usize)> {
        let n = self.paths.len();
        let mut best: Option<(u32, usize, usize)> = None;
        for i in 0..n {
            for j in i + 1..n {
                if let Some(t) = first_collision(&self.paths[i], &self.paths[j]) {
                    if best.is_none_or(|(bt, _, _)| t < bt) {
                        best = Some((t, i, j));
                    }
                }
            }
        }
        best.map(|(_, i, j)| (i, j))
    }

    /// Adds `hi ≺ lo` and closes transitively. `false` if it would cycle.
    fn add_priority(&mut self, hi: usize, lo: usize) -> bool {
        if hi == lo || self.higher[lo][hi] {
            return false;
        }
        let n = self.paths.len();
        let uppers: Vec<usize> = (0..n).filter(|&a| a == hi || self.higher[a][hi]).collect();
        let lowers: Vec<usize> = (0..n).filter(|&b| b == lo || self.higher[lo][b]).collect();
        for &a in &uppers {
            for &b in &lowers {
                self.higher[a][b] = true;
            }
        }
        true
    }
}

/// Plans `local` against the fixed table plus the current paths of all its
/// priority ancestors.
fn plan_under_priorities(
    instance: &MapfInstance,
    neighborhood: &[AgentId],
    node: &PbsNode,
    local: usize,
    table: &mut ReservationTable,
    max_len: Option<u64>,
) -> Option<Path> {
    let ancestors: Vec<usize> = node.ancestors(local).collect();
    for &a in &ancestors {
        table.add_path(neighborhood[a], &node.paths[a]);
    }
    let path = plan_one(instance, neighborhood[local], table, max_len);
    for &a in &ancestors {
        table.remove_path(neighborhood[a], &node.paths[a]);
    }
    path
}

/// Child of `parent` with `hi ≺ lo`: replans `lo` and every lower agent that
/// collides with one of its ancestors, in topological order. Replanning
/// never shortens a path, so a child reaching `bound` is dropped.
fn branch(
    instance: &MapfInstance,
    neighborhood: &[AgentId],
    parent: &PbsNode,
    hi: usize,
    lo: usize,
    table: &mut ReservationTable,
    bound: Option<u64>,
) -> Option<PbsNode> {
    let mut child = parent.clone();
    if !child.add_priority(hi, lo) {
        return None;
    }
    let n = child.paths.len();
    let mut affected: Vec<usize> = (0..n).filter(|&b| b == lo || child.higher[lo][b]).collect();
    // ancestor counts strictly grow along priority edges
    affected.sort_by_key(|&b| (child.ancestors(b).count(), b));
    for b in affected {
        let must_replan = b == lo
            || child
                .ancestors(b)
                .any(|a| first_collision(&child.paths[a], &child.paths[b]).is_some());
        if !must_replan {
            continue;
        }
        let others = child.cost - u64::from(child.paths[b].len_steps());
        let cap = length_cap(bound, others, 0).ok()?;
        let path = plan_under_priorities(instance, neighborhood, &child, b, table, cap)?;
        child.cost =
            child.cost - u64::from(child.paths[b].len_steps()) + u64::from(path.len_steps());
        child.paths[b] = path;
    }
    Some(child)
}

/// Depth-first priority-based search, better child first, capped at
/// `node_budget` node expansions.
pub fn pbs_replan(request: ReplanRequest<'_>, node_budget: usize) -> Option<Vec<Path>> {
    let ReplanRequest {
        instance,
        neighborhood,
        table,
        bound,
        ..
    } = request;
    let n = neighborhood.len();
    let mut paths = Vec::with_capacity(n);
    for &agent in neighborhood {
        paths.push(plan_one(instance, agent, table, None)?);
    }
    let cost = paths.iter().map(|p| u64::from(p.len_steps())).sum();
    if bound.is_some_and(|b| cost >= b) {
        return None;
    }
    let root = PbsNode {
        higher: vec![vec![false; n]; n],
        paths,
        cost,
    };

    let mut stack = vec![root];
    let mut expanded = 0;
    while let Some(node) = stack.pop() {
        let Some((i, j)) = node.first_collision() else {
            return Some(node.paths);
        };
        expanded += 1;
        if expanded > node_budget {
            return None;
        }
        let mut children: Vec<(u64, AgentId, PbsNode)> = [(i, j), (j, i)]
            .into_iter()
            .filter_map(|(hi, lo)| {
                branch(instance, neighborhood, &node, hi, lo, table, bound)
                    .map(|c| (c.cost, neighborhood[lo], c))
            })
            .collect();
        // the stack pops the cheaper child first; ties go to the lower agent id
        children.sort_by(|a, b| b.0.cmp(&a.0).then(b.1.cmp(&a.1)));
        stack.extend(children.into_iter().map(|(_, _, c)| c));
    }
    None
}
