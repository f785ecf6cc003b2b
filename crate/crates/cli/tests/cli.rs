use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use mapf_lns::output::{read_results_csv, read_trajectory_json};
use mapf_lns_cli::{
    cmd_bench, cmd_solve, cmd_validate, BenchArgs, CliError, SolveArgs, ValidateArgs,
};

fn data(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(rel)
}

fn solve_args(map: &str, agents: usize, out: &Path) -> SolveArgs {
    SolveArgs {
        map: data(&format!("maps/{map}.map")),
        scen: data(&format!("scen/{map}-random-1.scen")),
        agents,
        strategy: "randomwalk".parse().unwrap(),
        nb_size: 8,
        replan: "pp".parse().unwrap(),
        init: "lns2lite".parse().unwrap(),
        time_limit: None,
        max_iters: Some(200),
        seed: 7,
        init_budget: 10.0,
        out_dir: out.to_path_buf(),
    }
}

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mapf-lns"))
}

#[test]
fn single_agent_has_zero_delay() {
    let dir = tempfile::tempdir().unwrap();
    let outcome = cmd_solve(&solve_args("empty-32-32", 1, dir.path())).unwrap();
    assert_eq!(outcome.record.initial_delay, 0);
    assert_eq!(outcome.record.final_delay, 0);
    assert_eq!(outcome.record.auc, 0.0);
}

#[test]
fn iteration_budget_is_deterministic_and_matches_golden_values() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let first = cmd_solve(&solve_args("random-32-32-20", 60, a.path())).unwrap();
    let second = cmd_solve(&solve_args("random-32-32-20", 60, b.path())).unwrap();
    for (x, y) in [
        (&first.trajectory_file, &second.trajectory_file),
        (&first.paths_file, &second.paths_file),
    ] {
        assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap());
    }
    let r = &first.record;
    assert_eq!(
        (
            r.initial_delay,
            r.final_delay,
            r.auc,
            r.iterations,
            r.accepted
        ),
        (172, 60, 16916.0, 200, 32)
    );

    let rows = read_results_csv(fs::File::open(&first.results_file).unwrap()).unwrap();
    assert_eq!(rows, vec![first.row.clone()]);
    let traj = read_trajectory_json(fs::File::open(&first.trajectory_file).unwrap()).unwrap();
    assert_eq!(traj.trajectory, r.trajectory);

    let report = cmd_validate(&ValidateArgs {
        map: data("maps/random-32-32-20.map"),
        scen: data("scen/random-32-32-20-random-1.scen"),
        paths: first.paths_file.clone(),
    })
    .unwrap();
    assert!(report.is_empty(), "{report:?}");
}

#[test]
fn documented_flag_values_match_golden_runs() {
    type Golden = (
        &'static str,
        &'static str,
        &'static str,
        (u64, u64, f64, u64),
    );
    // (strategy, replan, init) -> (initial delay, final delay, auc, accepted)
    let golden: [Golden; 7] = [
        ("randomwalk", "pp", "lns2lite", (172, 60, 16916.0, 32)),
        ("randomwalkprob", "pbs", "lns2lite", (172, 56, 12607.0, 26)),
        ("intersection", "pp", "pp-restart", (149, 80, 20151.0, 19)),
        ("random", "pbs:8", "pp-restart", (149, 81, 20547.0, 28)),
        ("adaptive", "pp", "lns2lite", (172, 64, 17969.0, 23)),
        ("bandit", "pp", "lns2lite", (172, 62, 19198.0, 22)),
        ("unibandit", "pbs", "lns2lite", (172, 52, 12248.0, 20)),
    ];
    for (strategy, replan, init, expected) in golden {
        let dir = tempfile::tempdir().unwrap();
        let args = SolveArgs {
            strategy: strategy.parse().unwrap(),
            replan: replan.parse().unwrap(),
            init: init.parse().unwrap(),
            ..solve_args("random-32-32-20", 60, dir.path())
        };
        let r = cmd_solve(&args).unwrap().record;
        assert_eq!(
            (r.initial_delay, r.final_delay, r.auc, r.accepted),
            expected,
            "{strategy} {replan} {init}"
        );
        assert_eq!(r.iterations, 200);
    }
}

#[test]
fn exit_codes() {
    let missing_map = binary()
        .args(["solve", "--scen", "x.scen", "--agents", "1"])
        .output()
        .unwrap();
    assert_eq!(missing_map.status.code(), Some(2));

    let zero_iters = binary()
        .args([
            "solve",
            "--map",
            "a.map",
            "--scen",
            "a.scen",
            "--agents",
            "1",
            "--max-iters",
            "0",
        ])
        .output()
        .unwrap();
    assert_eq!(zero_iters.status.code(), Some(2));

    let no_file = binary()
        .args([
            "solve",
            "--map",
            "/nonexistent/a.map",
            "--scen",
            "a.scen",
            "--agents",
            "1",
            "--max-iters",
            "5",
        ])
        .output()
        .unwrap();
    assert_eq!(no_file.status.code(), Some(4));

    let dir = tempfile::tempdir().unwrap();
    let too_many = binary()
        .args(["solve", "--map"])
        .arg(data("maps/empty-32-32.map"))
        .arg("--scen")
        .arg(data("scen/empty-32-32-random-1.scen"))
        .args(["--agents", "100000", "--max-iters", "5", "--out-dir"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(too_many.status.code(), Some(3));
}

/// Two-lane map, two agents, and a paths file under test.
fn validate_case(paths_json: &str) -> Result<Vec<String>, CliError> {
    let dir = tempfile::tempdir().unwrap();
    let map = dir.path().join("line.map");
    let scen = dir.path().join("line.scen");
    let paths = dir.path().join("p.json");
    fs::write(&map, "type octile\nheight 2\nwidth 4\nmap\n....\n....\n").unwrap();
    // x is the column and y the row
    fs::write(
        &scen,
        "version 1\n0\tline.map\t4\t2\t0\t0\t3\t0\t3\n0\tline.map\t4\t2\t3\t0\t0\t0\t3\n",
    )
    .unwrap();
    fs::write(&paths, paths_json).unwrap();
    cmd_validate(&ValidateArgs { map, scen, paths })
}

#[test]
fn validate_reports_swaps_and_malformed_paths() {
    let lanes = r#"{"paths":[[[0,0],[0,1],[0,2],[0,3]],[[0,3],[1,3],[1,2],[1,1],[1,0],[0,0]]]}"#;
    assert_eq!(validate_case(lanes).unwrap(), Vec::<String>::new());

    let swap = r#"{"paths":[[[0,0],[0,1],[0,2],[0,3]],[[0,3],[0,2],[0,1],[0,0]]]}"#;
    let conflicts = validate_case(swap).unwrap();
    assert!(
        conflicts.iter().any(|c| c.contains("swap conflict")),
        "{conflicts:?}"
    );

    let truncated = r#"{"paths":[[[0,0],[0,1]],[[0,3],[0,2],[0,1],[0,0]]]}"#;
    assert!(matches!(
        validate_case(truncated),
        Err(CliError::Failure(_))
    ));

    let teleport = r#"{"paths":[[[0,0],[0,2],[0,3]],[[0,3],[1,3],[1,3],[0,3]]]}"#;
    assert!(matches!(validate_case(teleport), Err(CliError::Failure(_))));

    assert!(matches!(validate_case("not json"), Err(CliError::Io(_))));
}

#[test]
fn bench_runs_matrix_and_resumes() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("mini.toml");
    fs::write(
        &config,
        format!(
            r#"
            scenes = [1]
            agents = [20]
            strategies = ["random", "randomwalk"]
            nb_sizes = [4]
            seeds = [3]
            max_iters = 30
            plots = true

            [[maps]]
            name = "empty-32-32"
            map_file = "{}"
            scen_dir = "{}"
            "#,
            data("maps/empty-32-32.map").display(),
            data("scen").display()
        ),
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let args = BenchArgs {
        config,
        out_dir: out_dir.clone(),
        resume: false,
        jobs: Some(2),
    };
    let first = cmd_bench(&args).unwrap();
    assert_eq!(first.rows.len(), 2);
    assert_eq!((first.reused, first.failed), (0, 0));
    // both strategies start from the same initial solution
    assert_eq!(first.rows[0].init_delay, first.rows[1].init_delay);
    assert!(first.rows.iter().all(|r| r.final_delay <= r.init_delay));
    assert_eq!(first.plots.len(), 1);
    assert!(fs::read_to_string(&first.plots[0])
        .unwrap()
        .starts_with("<svg"));
    assert!(out_dir.join("summary.csv").exists());

    let resumed = cmd_bench(&BenchArgs {
        resume: true,
        ..args
    })
    .unwrap();
    assert_eq!(resumed.reused, 2);
    assert_eq!(resumed.rows, first.rows);
}

#[test]
fn shipped_preset_describes_twelve_runs() {
    let file = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/paper-mini.toml");
    let config =
        mapf_lns_cli::config::BenchConfig::from_toml(&fs::read_to_string(&file).unwrap()).unwrap();
    let spec = config.to_spec(file.parent().unwrap()).unwrap();
    assert_eq!(spec.cells().len(), 12);
    assert!(spec
        .maps
        .iter()
        .all(|m| m.map_file.exists() && m.scen_file(1).exists()));
}
