mod common;

use std::time::Duration;

use common::{joint_optimal_delay, random_instance, random_map};
use mapf_lns::engine::accept_candidate;
use mapf_lns::init::{initial_solution, InitKind};
use mapf_lns::model::{
    find_conflicts, first_collision, sum_of_delays, validate_solution, AgentId, Coord, GridMap,
};
use mapf_lns::movingai::parse_map;
use mapf_lns::replan::{pbs_replan, plan_in_order, ReplanKind, ReplanRequest};
use mapf_lns::sssp::ReservationTable;
use mapf_lns::strategies::StrategyKind;
use mapf_lns::{lns_run, Budget, LnsConfig, MapfInstance, Path};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn tiny_instance(seed: u64, max_agents: usize) -> Option<MapfInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side = rng.random_range(3..=6);
    let ratio = rng.random_range(0.0..0.3);
    let map = random_map(&mut rng, side, side, ratio);
    let agents = rng.random_range(2..=max_agents);
    random_instance(&mut rng, map, agents)
}

fn strictly_decreasing(trajectory: &[(f64, u64)]) -> bool {
    trajectory
        .windows(2)
        .all(|w| w[1].0 > w[0].0 && w[1].1 < w[0].1)
}

/// Replans `neighborhood` of a feasible solution against everybody else.
fn replan_part(
    instance: &MapfInstance,
    paths: &[Path],
    neighborhood: &[AgentId],
    kind: ReplanKind,
    seed: u64,
) -> Option<Vec<Path>> {
    replan_part_bounded(instance, paths, neighborhood, kind, seed, None)
}

fn replan_part_bounded(
    instance: &MapfInstance,
    paths: &[Path],
    neighborhood: &[AgentId],
    kind: ReplanKind,
    seed: u64,
    bound: Option<u64>,
) -> Option<Vec<Path>> {
    let mut table = ReservationTable::new(instance.map().num_cells());
    for (agent, path) in paths
        .iter()
        .enumerate()
        .filter(|(a, _)| !neighborhood.contains(a))
    {
        table.add_path(agent, path);
    }
    let before = (table.num_paths(), table.vertex_reservation_count());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let out = kind.build().replan(ReplanRequest {
        instance,
        neighborhood,
        table: &mut table,
        rng: &mut rng,
        bound,
    });
    assert_eq!(
        (table.num_paths(), table.vertex_reservation_count()),
        before,
        "table handed back changed"
    );
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn replanned_neighborhoods_stay_conflict_free(seed in any::<u64>(), pbs in any::<bool>()) {
        let Some(instance) = tiny_instance(seed, 6) else { return Ok(()) };
        let Ok((initial, _)) = initial_solution(InitKind::PpRestart, &instance, Duration::from_millis(200), seed) else {
            return Ok(());
        };
        let n = instance.num_agents();
        let neighborhood: Vec<AgentId> = (0..n).filter(|a| (seed >> a) & 1 == 1).collect();
        prop_assume!(!neighborhood.is_empty());
        let kind = if pbs { ReplanKind::Pbs { node_budget: 64 } } else { ReplanKind::Pp };
        if let Some(new) = replan_part(&instance, &initial.paths, &neighborhood, kind, seed) {
            let mut paths = initial.paths.clone();
            for (&a, p) in neighborhood.iter().zip(new) {
                paths[a] = p;
            }
            prop_assert_eq!(validate_solution(&instance, &paths).unwrap(), vec![]);
        }
    }

    #[test]
    fn bounded_repair_only_drops_results_at_or_above_the_bound(seed in any::<u64>(), slack in 0u64..6) {
        let Some(instance) = tiny_instance(seed, 6) else { return Ok(()) };
        let Ok((initial, _)) = initial_solution(InitKind::PpRestart, &instance, Duration::from_millis(200), seed) else {
            return Ok(());
        };
        let n = instance.num_agents();
        let neighborhood: Vec<AgentId> = (0..n).filter(|a| (seed >> (a + 8)) & 1 == 1).collect();
        prop_assume!(!neighborhood.is_empty());
        let total = |ps: &[Path]| ps.iter().map(|p| u64::from(p.len_steps())).sum::<u64>();
        let lower: u64 = neighborhood.iter().map(|&a| u64::from(instance.shortest(a))).sum();
        let bound = lower + slack;

        let free = replan_part(&instance, &initial.paths, &neighborhood, ReplanKind::Pp, seed);
        let capped = replan_part_bounded(&instance, &initial.paths, &neighborhood, ReplanKind::Pp, seed, Some(bound));
        match free {
            Some(ps) if total(&ps) < bound => prop_assert_eq!(capped, Some(ps)),
            _ => prop_assert_eq!(capped, None),
        }

        let pbs = ReplanKind::Pbs { node_budget: 64 };
        if let Some(ps) = replan_part_bounded(&instance, &initial.paths, &neighborhood, pbs, seed, Some(bound)) {
            prop_assert!(total(&ps) < bound);
            prop_assert!(find_conflicts(instance.map(), &ps).is_empty());
        }
    }

    #[test]
    fn lns_output_is_valid_and_monotone(seed in any::<u64>(), which in 0usize..7, pbs in any::<bool>()) {
        let Some(instance) = tiny_instance(seed, 6) else { return Ok(()) };
        let Ok((initial, _)) = initial_solution(InitKind::Lns2lite, &instance, Duration::from_millis(200), seed) else {
            return Ok(());
        };
        let config = LnsConfig {
            strategy: StrategyKind::ALL[which],
            nb_size: 3,
            replan: if pbs { ReplanKind::Pbs { node_budget: 16 } } else { ReplanKind::Pp },
            budget: Budget::Iterations(40),
            seed,
            ..LnsConfig::default()
        };
        let (record, solution) = lns_run(&instance, initial, &config).unwrap();
        prop_assert_eq!(validate_solution(&instance, &solution.paths).unwrap(), vec![]);
        prop_assert_eq!(sum_of_delays(&instance, &solution.paths).unwrap(), record.final_delay);
        prop_assert!(strictly_decreasing(&record.trajectory));
        prop_assert_eq!(record.trajectory.last().unwrap().1, record.final_delay);
        prop_assert_eq!(record.trajectory.len() as u64, record.accepted + 1);
        if instance.num_agents() <= 3 {
            prop_assert!(record.final_delay >= joint_optimal_delay(&instance).unwrap());
        }
    }
}

#[test]
fn equal_candidates_are_rejected() {
    assert!(!accept_candidate(7, 7));
    assert!(!accept_candidate(7, 8));
    assert!(accept_candidate(7, 6));
}

#[test]
fn pbs_matches_best_priority_order_in_pocket_corridor() {
    // a 1-wide corridor with a side pocket next to one end; the agents swap
    // ends and the optimum parks agent 0 in the pocket (delay 5)
    let map = parse_map(
        "pocket",
        "type octile\nheight 2\nwidth 7\nmap\n@.@@@@@\n.......\n",
    )
    .unwrap();
    let instance = MapfInstance::new(
        map,
        vec![
            (Coord::new(1, 0), Coord::new(1, 6)),
            (Coord::new(1, 6), Coord::new(1, 0)),
        ],
    )
    .unwrap();
    let mut table = ReservationTable::new(instance.map().num_cells());
    let best_order = [[0, 1], [1, 0]]
        .iter()
        .filter_map(|order| plan_in_order(&instance, order, &mut table))
        .map(|planned| {
            planned
                .iter()
                .map(|(a, p)| u64::from(p.len_steps() - instance.shortest(*a)))
                .sum::<u64>()
        })
        .min()
        .expect("one order succeeds");
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let paths = pbs_replan(
        ReplanRequest {
            instance: &instance,
            neighborhood: &[0, 1],
            table: &mut table,
            rng: &mut rng,
            bound: None,
        },
        64,
    )
    .expect("pbs solves the pocket corridor");
    assert!(find_conflicts(instance.map(), &paths).is_empty());
    assert_eq!(first_collision(&paths[0], &paths[1]), None);
    assert_eq!(sum_of_delays(&instance, &paths).unwrap(), best_order);
    assert_eq!(best_order, 5);
    assert_eq!(joint_optimal_delay(&instance), Some(5));
}

#[test]
fn lns_reaches_brute_force_optimum_on_tiny_instances() {
    let mut hits = 0;
    let mut total = 0;
    for seed in 0..30 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let side = rng.random_range(4..=5);
        let map = random_map(&mut rng, side, side, 0.15);
        let agents = rng.random_range(2..=3);
        let Some(instance) = random_instance(&mut rng, map, agents) else {
            continue;
        };
        let optimum = joint_optimal_delay(&instance).expect("tiny instances are solvable");
        let Ok((initial, _)) = initial_solution(
            InitKind::PpRestart,
            &instance,
            Duration::from_millis(200),
            seed,
        ) else {
            continue;
        };
        let n = instance.num_agents();
        let config = LnsConfig {
            strategy: StrategyKind::Random,
            nb_size: n,
            budget: Budget::Iterations(2000),
            seed,
            ..LnsConfig::default()
        };
        let (record, _) = lns_run(&instance, initial, &config).unwrap();
        assert!(record.final_delay >= optimum);
        total += 1;
        hits += usize::from(record.final_delay == optimum);
    }
    assert!(total >= 20, "only {total} usable instances");
    assert!(hits * 100 >= total * 90, "{hits}/{total} optimal");
}

#[test]
fn open_grid_pair_optimum_is_zero_when_paths_do_not_cross() {
    let map = GridMap::open("open", 4, 4).unwrap();
    let instance = MapfInstance::new(
        map,
        vec![
            (Coord::new(0, 0), Coord::new(0, 3)),
            (Coord::new(3, 0), Coord::new(3, 3)),
        ],
    )
    .unwrap();
    assert_eq!(joint_optimal_delay(&instance), Some(0));
}
