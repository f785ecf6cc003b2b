//! Delay-driven neighborhoods: a high-delay agent walks towards a shorter
//! path and collects every agent its moves would collide with.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{AgentSet, Neighborhood, SelectionContext, StrategyState, StrategyTag};
use crate::model::AgentId;

/// RandomWalk with a tabu list of recent start agents.
///
/// The start agent is the highest-delay agent not in the tabu list (lowest
/// id on ties). The list is cleared once it holds every delayed agent. After
/// each walk a random member of the neighborhood starts the next one. Returns
/// `converged = true` with a random singleton when no agent is delayed.
pub fn select_randomwalk(
    state: &mut StrategyState,
    ctx: &SelectionContext<'_>,
    size: usize,
) -> (Neighborhood, bool) {
    let n = ctx.num_agents();
    let m = size.min(n).max(1);
    state.n_delay = ctx.delayed_count();
    if state.n_delay == 0 {
        return (converged(state, n, StrategyTag::RandomWalk, size), true);
    }
    state.tabu.retain(|a| ctx.delays[a] > 0);
    if state.tabu.len() >= state.n_delay {
        state.tabu.clear();
    }
    let mut start = None;
    for (agent, &d) in ctx.delays.iter().enumerate() {
        if d > 0 && !state.tabu.contains(agent) && start.is_none_or(|s: AgentId| d > ctx.delays[s])
        {
            start = Some(agent);
        }
    }
    let mut start = start.expect("tabu list is cleared before it covers every delayed agent");
    state.tabu.insert(start);
    if state.tabu.len() >= state.n_delay {
        state.tabu.clear();
    }

    let mut nb = AgentSet::new(n);
    nb.insert(start);
    let cap = state.params.walk_cap_factor * m;
    let mut walks = 0;
    while nb.len() < m && walks < cap {
        random_walk_inner(ctx, start, &mut nb, m, &mut state.rng);
        walks += 1;
        start = *nb.as_slice().choose(&mut state.rng).expect("non-empty");
    }
    (
        Neighborhood {
            agents: nb.into_vec(),
            tag: StrategyTag::RandomWalk,
            size_used: size,
        },
        false,
    )
}

/// RandomWalkProb: start agents, including the restarts after each walk,
/// are sampled with probability proportional to their delay. No tabu list.
pub fn select_randomwalkprob(
    state: &mut StrategyState,
    ctx: &SelectionContext<'_>,
    size: usize,
) -> (Neighborhood, bool) {
    let n = ctx.num_agents();
    let m = size.min(n).max(1);
    let Ok(by_delay) = WeightedIndex::new(ctx.delays.iter().copied()) else {
        return (converged(state, n, StrategyTag::RandomWalkProb, size), true);
    };
    let mut start = by_delay.sample(&mut state.rng);
    let mut nb = AgentSet::new(n);
    nb.insert(start);
    let cap = state.params.walk_cap_factor * m;
    let mut walks = 0;
    while nb.len() < m && walks < cap {
        random_walk_inner(ctx, start, &mut nb, m, &mut state.rng);
        walks += 1;
        start = by_delay.sample(&mut state.rng);
        // the sampled agent joins the neighborhood it walks for
        if nb.len() < m {
            nb.insert(start);
        }
    }
    (
        Neighborhood {
            agents: nb.into_vec(),
            tag: StrategyTag::RandomWalkProb,
            size_used: size,
        },
        false,
    )
}

/// First start agent RandomWalkProb would draw; exposed for sampling tests.
pub fn sample_start_by_delay(delays: &[u32], rng: &mut ChaCha8Rng) -> Option<AgentId> {
    WeightedIndex::new(delays.iter().copied())
        .ok()
        .map(|d| d.sample(rng))
}

fn converged(state: &mut StrategyState, n: usize, tag: StrategyTag, size: usize) -> Neighborhood {
    let agent = state.rng.random_range(0..n);
    Neighborhood {
        agents: vec![agent],
        tag,
        size_used: size,
    }
}

/// One walk of `agent` from a random timestep of its path. Each step moves
/// to a random cell (or waits) from which a strictly shorter path is still
/// possible, i.e. `t + 1 + d(v, goal) < l(path)`, and adds every agent the
/// move collides with. Stops when no such cell exists or the set is full.
pub fn random_walk_inner(
    ctx: &SelectionContext<'_>,
    agent: AgentId,
    nb: &mut AgentSet,
    size: usize,
    rng: &mut ChaCha8Rng,
) {
    let map = ctx.instance.map();
    let heuristic = ctx.instance.heuristic(agent);
    let path = &ctx.paths[agent];
    let length = path.len_steps();
    let mut t = rng.random_range(0..=length);
    let mut x = path.at(t);
    let mut frontier = Vec::with_capacity(5);
    while nb.len() < size {
        frontier.clear();
        frontier.extend(
            std::iter::once(x)
                .chain(map.neighbors(x))
                .filter(|&v| heuristic.get(v).is_some_and(|d| t + 1 + d < length)),
        );
        let Some(&y) = frontier.choose(rng) else {
            break;
        };
        let mut hit = |other: AgentId| {
            if other != agent && nb.len() < size {
                nb.insert(other);
            }
        };
        ctx.table.for_each_occupant(y, t + 1, &mut hit);
        ctx.table.for_each_swap(x, y, t, &mut hit);
        x = y;
        t += 1;
    }
}
