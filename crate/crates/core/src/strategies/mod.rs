//! Destroy operators: choosing which agents to replan.
//!
//! Rule-based selectors live in [`walk`] and [`intersection`] (plus uniform
//! sampling here); [`adaptive`] and [`bandit`] mix them online.

pub mod adaptive;
pub mod bandit;
pub mod intersection;
pub mod walk;

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{AgentId, MapfInstance, Path};
use crate::sssp::ReservationTable;

pub use adaptive::{adaptive_select, adaptive_update, AdaptiveParams, AdaptiveWeights};
pub use bandit::{
    bandit_select, bandit_update, unibandit_size, BanditParams, BanditState, NEIGHBORHOOD_SIZES,
};
pub use intersection::{select_intersection, IntersectionIndex};
pub use walk::{random_walk_inner, select_randomwalk, select_randomwalkprob};

/// The three rule-based selectors that Adaptive and Bandit mix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaseStrategy {
    RandomWalk,
    Intersection,
    Random,
}

impl BaseStrategy {
    pub const ALL: [BaseStrategy; 3] = [
        BaseStrategy::RandomWalk,
        BaseStrategy::Intersection,
        BaseStrategy::Random,
    ];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Strategy selected on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyKind {
    RandomWalk,
    RandomWalkProb,
    Intersection,
    Random,
    Adaptive,
    Bandit,
    UniBandit,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 7] = [
        StrategyKind::RandomWalk,
        StrategyKind::RandomWalkProb,
        StrategyKind::Intersection,
        StrategyKind::Random,
        StrategyKind::Adaptive,
        StrategyKind::Bandit,
        StrategyKind::UniBandit,
    ];

    pub fn label(self) -> &'static str {
        match self {
            StrategyKind::RandomWalk => "randomwalk",
            StrategyKind::RandomWalkProb => "randomwalkprob",
            StrategyKind::Intersection => "intersection",
            StrategyKind::Random => "random",
            StrategyKind::Adaptive => "adaptive",
            StrategyKind::Bandit => "bandit",
            StrategyKind::UniBandit => "unibandit",
        }
    }

    /// Whether the neighborhood size comes from a bandit arm rather than config.
    pub fn picks_size(self) -> bool {
        matches!(self, StrategyKind::Bandit | StrategyKind::UniBandit)
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for StrategyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        StrategyKind::ALL
            .into_iter()
            .find(|k| k.label() == s)
            .ok_or_else(|| format!("unknown strategy `{s}`"))
    }
}

/// Which selector produced a neighborhood.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyTag {
    RandomWalk,
    RandomWalkProb,
    Intersection,
    Random,
}

impl StrategyTag {
    pub fn label(self) -> &'static str {
        match self {
            StrategyTag::RandomWalk => "randomwalk",
            StrategyTag::RandomWalkProb => "randomwalkprob",
            StrategyTag::Intersection => "intersection",
            StrategyTag::Random => "random",
        }
    }
}

/// Agents chosen for one repair, without duplicates, in insertion order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Neighborhood {
    pub agents: Vec<AgentId>,
    pub tag: StrategyTag,
    pub size_used: usize,
}

/// Insertion-ordered agent set with O(1) membership.
#[derive(Debug, Clone)]
pub struct AgentSet {
    members: Vec<AgentId>,
    present: Vec<bool>,
}

impl AgentSet {
    pub fn new(num_agents: usize) -> Self {
        Self {
            members: Vec::new(),
            present: vec![false; num_agents],
        }
    }

    pub fn insert(&mut self, agent: AgentId) -> bool {
        if self.present[agent] {
            return false;
        }
        self.present[agent] = true;
        self.members.push(agent);
        true
    }

    pub fn contains(&self, agent: AgentId) -> bool {
        self.present[agent]
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn as_slice(&self) -> &[AgentId] {
        &self.members
    }

    pub fn clear(&mut self) {
        for &a in &self.members {
            self.present[a] = false;
        }
        self.members.clear();
    }

    pub fn retain(&mut self, mut keep: impl FnMut(AgentId) -> bool) {
        let present = &mut self.present;
        self.members.retain(|&a| {
            let k = keep(a);
            if !k {
                present[a] = false;
            }
            k
        });
    }

    pub fn into_vec(self) -> Vec<AgentId> {
        self.members
    }
}

/// Read-only view of the current solution handed to selectors. `table`
/// must contain every path of `paths`.
#[derive(Clone, Copy)]
pub struct SelectionContext<'a> {
    pub instance: &'a MapfInstance,
    pub paths: &'a [Path],
    pub delays: &'a [u32],
    pub table: &'a ReservationTable,
}

impl SelectionContext<'_> {
    pub fn num_agents(&self) -> usize {
        self.paths.len()
    }

    pub fn delayed_count(&self) -> usize {
        self.delays.iter().filter(|&&d| d > 0).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrategyParams {
    /// RandomWalk gives up after `walk_cap_factor * M` walks per call.
    pub walk_cap_factor: usize,
    /// BFS radius for collecting nearby intersections.
    pub intersection_radius: u32,
    pub adaptive: AdaptiveParams,
    pub bandit: BanditParams,
}

impl Default for StrategyParams {
    fn default() -> Self {
        Self {
            walk_cap_factor: 2,
            intersection_radius: 5,
            adaptive: AdaptiveParams::default(),
            bandit: BanditParams::default(),
        }
    }
}

/// The arm pulled by a mixing strategy, remembered until feedback arrives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArmChoice {
    Adaptive(BaseStrategy),
    Bandit {
        strategy: BaseStrategy,
        size_arm: usize,
    },
    UniBandit {
        strategy: BaseStrategy,
    },
}

/// Result of one selection call.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Selection {
    pub neighborhood: Neighborhood,
    /// Every agent is already on a shortest path.
    pub converged: bool,
    pub arm: Option<ArmChoice>,
}

/// Mutable selector memory for one LNS run.
#[derive(Debug, Clone)]
pub struct StrategyState {
    pub rng: ChaCha8Rng,
    pub params: StrategyParams,
    pub tabu: AgentSet,
    pub n_delay: usize,
    pub adaptive: AdaptiveWeights,
    pub bandit: BanditState,
    pub intersections: IntersectionIndex,
}

impl StrategyState {
    pub fn new(instance: &MapfInstance, seed: u64, params: StrategyParams) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            tabu: AgentSet::new(instance.num_agents()),
            n_delay: 0,
            adaptive: AdaptiveWeights::new(params.adaptive),
            bandit: BanditState::new(params.bandit),
            intersections: IntersectionIndex::new(instance.map()),
            params,
        }
    }

    /// Runs one selection for `kind`. `size` is the configured neighborhood
    /// size; Bandit and Uni-Bandit override it with their size arm.
    pub fn select(
        &mut self,
        kind: StrategyKind,
        ctx: &SelectionContext<'_>,
        size: usize,
    ) -> Selection {
        let (base, size, arm) = match kind {
            StrategyKind::RandomWalkProb => {
                let (nb, converged) = select_randomwalkprob(self, ctx, size);
                return Selection {
                    neighborhood: nb,
                    converged,
                    arm: None,
                };
            }
            StrategyKind::RandomWalk => (BaseStrategy::RandomWalk, size, None),
            StrategyKind::Intersection => (BaseStrategy::Intersection, size, None),
            StrategyKind::Random => (BaseStrategy::Random, size, None),
            StrategyKind::Adaptive => {
                let base = adaptive_select(&mut self.adaptive, &mut self.rng);
                (base, size, Some(ArmChoice::Adaptive(base)))
            }
            StrategyKind::Bandit => {
                let (strategy, size_arm) = bandit_select(&mut self.bandit, &mut self.rng);
                (
                    strategy,
                    NEIGHBORHOOD_SIZES[size_arm],
                    Some(ArmChoice::Bandit { strategy, size_arm }),
                )
            }
            StrategyKind::UniBandit => {
                let strategy = self.bandit.sample_strategy(&mut self.rng);
                let size = unibandit_size(&mut self.rng);
                (strategy, size, Some(ArmChoice::UniBandit { strategy }))
            }
        };
        let (neighborhood, converged) = match base {
            BaseStrategy::RandomWalk => select_randomwalk(self, ctx, size),
            BaseStrategy::Intersection => (select_intersection(self, ctx, size), false),
            BaseStrategy::Random => (select_random(&mut self.rng, ctx, size), false),
        };
        Selection {
            neighborhood,
            converged,
            arm,
        }
    }

    /// Feeds the delay improvement of the last iteration (0 when rejected)
    /// back to the mixing strategy that produced `selection`.
    pub fn feedback(&mut self, selection: &Selection, improvement: u64) {
        match selection.arm {
            Some(ArmChoice::Adaptive(base)) => {
                adaptive_update(&mut self.adaptive, base, improvement as f64)
            }
            Some(ArmChoice::Bandit { strategy, size_arm }) => bandit_update(
                &mut self.bandit,
                strategy,
                Some(size_arm),
                improvement as f64,
            ),
            Some(ArmChoice::UniBandit { strategy }) => {
                bandit_update(&mut self.bandit, strategy, None, improvement as f64)
            }
            None => {}
        }
    }
}

/// Uniform sample without replacement of `min(size, N)` agents.
pub fn select_random(
    rng: &mut ChaCha8Rng,
    ctx: &SelectionContext<'_>,
    size: usize,
) -> Neighborhood {
    let n = ctx.num_agents();
    let m = size.min(n);
    let agents = index::sample(rng, n, m).into_vec();
    Neighborhood {
        agents,
        tag: StrategyTag::Random,
        size_used: size,
    }
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;
    use crate::model::{Coord, GridMap};
    use crate::sssp::build_reservation;

    pub struct Fixture {
        pub instance: MapfInstance,
        pub paths: Vec<Path>,
        pub delays: Vec<u32>,
        pub table: ReservationTable,
    }

    impl Fixture {
        pub fn new(instance: MapfInstance, paths: Vec<Path>) -> Self {
            let delays = paths
                .iter()
                .enumerate()
                .map(|(i, p)| p.len_steps() - instance.shortest(i))
                .collect();
            let table = build_reservation(instance.map(), &paths);
            Self {
                instance,
                paths,
                delays,
                table,
            }
        }

        pub fn ctx(&self) -> SelectionContext<'_> {
            SelectionContext {
                instance: &self.instance,
                paths: &self.paths,
                delays: &self.delays,
                table: &self.table,
            }
        }
    }

    /// Agents on separate rows of an open grid, agent `i` padded with
    /// `delays[i]` waits at its start.
    pub fn row_fixture(width: u32, delays: &[u32]) -> Fixture {
        let map = GridMap::open("rows", width, delays.len() as u32).unwrap();
        let tasks = (0..delays.len() as u32)
            .map(|r| (Coord::new(r, 0), Coord::new(r, width - 1)))
            .collect();
        let instance = MapfInstance::new(map.clone(), tasks).unwrap();
        let paths = delays
            .iter()
            .enumerate()
            .map(|(r, &d)| {
                let mut cells = vec![map.cell(Coord::new(r as u32, 0)).unwrap(); d as usize];
                cells.extend((0..width).map(|c| map.cell(Coord::new(r as u32, c)).unwrap()));
                Path::new(cells)
            })
            .collect();
        Fixture::new(instance, paths)
    }
}
