//! Benchmark configuration files.
//!
//! ```toml
//! scenes = [1, 2, 3]
//! agents = [150]
//! strategies = ["randomwalk", "bandit"]
//! nb_sizes = [8]
//! replans = ["pp"]            # "pp", "pbs" or "pbs:<node budget>"
//! inits = ["lns2lite"]        # or "pp-restart"
//! seeds = [0, 1, 2]
//! time_limit_s = 60.0         # or: max_iters = 500
//! init_budget_s = 10.0
//! jobs = 1
//! plots = true
//!
//! [[maps]]
//! name = "random-32-32-20"
//! map_file = "../data/maps/random-32-32-20.map"   # relative to this file
//! scen_dir = "../data/scen"
//! ```

use std::path::{Path, PathBuf};

use mapf_lns::bench::{MapSpec, MatrixSpec};
use mapf_lns::init::InitKind;
use mapf_lns::replan::ReplanKind;
use mapf_lns::strategies::{StrategyKind, StrategyParams};
use mapf_lns::Budget;
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub maps: Vec<MapSpec>,
    pub scenes: Vec<u32>,
    pub agents: Vec<usize>,
    pub strategies: Vec<String>,
    #[serde(default)]
    pub nb_sizes: Vec<usize>,
    #[serde(default = "default_replans")]
    pub replans: Vec<String>,
    #[serde(default = "default_inits")]
    pub inits: Vec<String>,
    pub seeds: Vec<u64>,
    pub time_limit_s: Option<f64>,
    pub max_iters: Option<u64>,
    #[serde(default = "default_init_budget")]
    pub init_budget_s: f64,
    pub jobs: Option<usize>,
    #[serde(default)]
    pub plots: bool,
    #[serde(default)]
    pub params: Option<StrategyParams>,
}

fn default_replans() -> Vec<String> {
    vec!["pp".into()]
}

fn default_inits() -> Vec<String> {
    vec!["lns2lite".into()]
}

fn default_init_budget() -> f64 {
    10.0
}

fn parse_all<T: std::str::FromStr<Err = String>>(
    field: &str,
    values: &[String],
) -> Result<Vec<T>, String> {
    values
        .iter()
        .map(|v| v.parse().map_err(|e| format!("`{field}`: {e}")))
        .collect()
}

impl BenchConfig {
    pub fn from_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    /// Resolves names and relative paths; `base` is the config file's directory.
    pub fn to_spec(&self, base: &Path) -> Result<MatrixSpec, String> {
        let budget = match (self.time_limit_s, self.max_iters) {
            (Some(s), None) => Budget::CoreSeconds(s),
            (None, Some(n)) => Budget::Iterations(n),
            (None, None) => Budget::CoreSeconds(60.0),
            (Some(_), Some(_)) => {
                return Err("set either `time_limit_s` or `max_iters`, not both".into())
            }
        };
        let resolve = |p: &PathBuf| {
            if p.is_absolute() {
                p.clone()
            } else {
                base.join(p)
            }
        };
        let spec = MatrixSpec {
            maps: self
                .maps
                .iter()
                .map(|m| MapSpec {
                    name: m.name.clone(),
                    map_file: resolve(&m.map_file),
                    scen_dir: resolve(&m.scen_dir),
                })
                .collect(),
            scenes: self.scenes.clone(),
            agents: self.agents.clone(),
            strategies: parse_all::<StrategyKind>("strategies", &self.strategies)?,
            nb_sizes: self.nb_sizes.clone(),
            replans: parse_all::<ReplanKind>("replans", &self.replans)?,
            inits: parse_all::<InitKind>("inits", &self.inits)?,
            seeds: self.seeds.clone(),
            budget,
            init_budget_s: self.init_budget_s,
            params: self.params.unwrap_or_default(),
        };
        spec.check().map_err(|e| e.to_string())?;
        if spec.nb_sizes.contains(&0) {
            return Err("`nb_sizes` entries must be positive".into());
        }
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        scenes = [1]
        agents = [10]
        strategies = ["random"]
        nb_sizes = [4]
        seeds = [0]
        max_iters = 20

        [[maps]]
        name = "empty-32-32"
        map_file = "maps/empty-32-32.map"
        scen_dir = "scen"
    "#;

    #[test]
    fn minimal_config_resolves_paths() {
        let spec = BenchConfig::from_toml(MINIMAL)
            .unwrap()
            .to_spec(Path::new("/data"))
            .unwrap();
        assert_eq!(
            spec.maps[0].map_file,
            PathBuf::from("/data/maps/empty-32-32.map")
        );
        assert_eq!(
            spec.maps[0].scen_file(3),
            PathBuf::from("/data/scen/empty-32-32-random-3.scen")
        );
        assert_eq!(spec.budget, Budget::Iterations(20));
        assert_eq!(spec.replans, vec![ReplanKind::Pp]);
        assert_eq!(spec.inits, vec![InitKind::Lns2lite]);
        assert_eq!(spec.cells().len(), 1);
    }

    #[test]
    fn bad_names_and_fields_are_reported() {
        let bad = MINIMAL.replace("\"random\"", "\"sideways\"");
        let err = BenchConfig::from_toml(&bad)
            .unwrap()
            .to_spec(Path::new("."))
            .unwrap_err();
        assert!(
            err.contains("strategies") && err.contains("sideways"),
            "{err}"
        );
        let unknown = format!("colour = 1\n{MINIMAL}");
        assert!(BenchConfig::from_toml(&unknown)
            .unwrap_err()
            .contains("colour"));
        let both = format!("time_limit_s = 1.0\n{MINIMAL}");
        assert!(BenchConfig::from_toml(&both)
            .unwrap()
            .to_spec(Path::new("."))
            .is_err());
    }
}
