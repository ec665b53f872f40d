use std::path::PathBuf;

use cocoplan::scenario::{load_scenario, ConfigError, ScenarioConfig};

fn scenario(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("examples/scenarios")
        .join(name)
}

#[test]
fn bundled_scenarios_load() {
    for name in ["desk.toml", "subt.toml"] {
        let cfg = load_scenario(scenario(name)).unwrap_or_else(|e| panic!("{name}: {e}"));
        let map = cfg.load_map().unwrap();
        for a in &cfg.agents {
            assert!(map.is_free(a.start));
        }
        for seed in cfg.seed..cfg.seed + 5 {
            let setup = cfg.to_setup(seed).unwrap();
            assert_eq!(setup.agents.len(), cfg.agents.len());
            setup.validate().unwrap_or_else(|e| panic!("{name} seed {seed}: {e}"));
        }
    }
    let subt = load_scenario(scenario("subt.toml")).unwrap();
    assert_eq!(subt.agents.len(), 10);
    assert_eq!(subt.planner.budget, Some(15.0));
}

#[test]
fn round_trip_preserves_the_config() {
    let cfg = load_scenario(scenario("desk.toml")).unwrap();
    let mut back = ScenarioConfig::from_toml(&cfg.to_toml()).unwrap();
    back.base_dir = cfg.base_dir.clone();
    assert_eq!(back, cfg);
    back.validate().unwrap();
}

#[test]
fn same_seed_same_task_stream() {
    let cfg = load_scenario(scenario("desk.toml")).unwrap();
    let map = cfg.load_map().unwrap();
    let a = cfg.task_stream(&map, 7).unwrap();
    assert_eq!(a, cfg.task_stream(&map, 7).unwrap());
    assert!(!a.0.is_empty());
}

#[test]
fn missing_file_is_an_io_error() {
    let err = load_scenario(scenario("nope.toml")).unwrap_err();
    assert!(matches!(err, ConfigError::Io { .. }), "{err}");
    assert!(err.to_string().contains("nope.toml"));
}

const BASE: &str = r#"
seed = 1
horizon = 10.0

[map]
text = """
4 3 1.0
....
.#..
....
"""

[strategy]
kind = "COCOPLAN"

[[agents]]
start = { x = 0.5, y = 0.5 }
v_max = 1.0
sensor_range = 3.0
capabilities = [0]

[[tasks]]
id = 0
center = { x = 3.5, y = 2.5 }
duration = 2.0
requirements = [{ count = 1, action = 0 }]
"#;

#[test]
fn unknown_field_reports_its_line() {
    let text = BASE.replace("horizon = 10.0", "horizon = 10.0\nhorizn = 5.0");
    let err = ScenarioConfig::from_toml(&text).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("horizn") && msg.contains("line 4"), "{msg}");
}

#[test]
fn dangling_relation_is_named() {
    let text = format!("{BASE}\n[[relations]]\nkind = \"precedence\"\nfirst = 0\nsecond = 9\n");
    let err = ScenarioConfig::from_toml(&text).unwrap().validate().unwrap_err();
    let ConfigError::Invalid(problems) = err else {
        panic!("{err}")
    };
    assert!(problems.iter().any(|p| p.starts_with("relations[0]")), "{problems:?}");
}

#[test]
fn every_problem_is_listed() {
    let text = BASE
        .replace("v_max = 1.0", "v_max = -1.0")
        .replace("duration = 2.0", "duration = 0.0")
        .replace("x = 3.5, y = 2.5", "x = 1.5, y = 1.5");
    let err = ScenarioConfig::from_toml(&text).unwrap().validate().unwrap_err();
    let ConfigError::Invalid(problems) = err else {
        panic!("{err}")
    };
    assert!(problems.len() >= 3, "{problems:?}");
}
