//! Scenario files: TOML describing the map, team, radio, task stream and
//! strategy of a run.
//!
//! ```toml
//! env = "desk"
//! seed = 7
//! horizon = 600.0
//!
//! [map]
//! file = "desk.map"          # or `text = """..."""`
//!
//! [strategy]
//! kind = "COCOPLAN"
//!
//! [[agents]]
//! start = { x = 1.25, y = 1.25 }
//! v_max = 1.0
//! sensor_range = 6.0
//! capabilities = [0]
//!
//! [[tasks]]
//! id = 0
//! center = { x = 5.25, y = 8.75 }
//! duration = 4.0
//! requirements = [{ count = 1, action = 0 }]
//! ```

use std::collections::{BTreeSet, HashSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::comm::CommParams;
use crate::generator::{generate_tasks, GeneratorSpec};
use crate::map::{GridMap, Position, TravelOracle};
use crate::sim::{AgentSpec, PlannerSettings, SimSetup};
use crate::strategy::StrategyConfig;
use crate::task::{ActionId, Requirement, Task, TaskId, TemporalRelation};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid scenario:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSource {
    /// Path to a map file, relative to the scenario file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    /// Inline map in the same text format.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlannerConfig {
    /// Wall-clock budget per planning call, in seconds.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub budget: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_expansions: Option<usize>,
    pub gap: f64,
    pub explore_time: f64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        let s = PlannerSettings::default();
        Self {
            budget: None,
            max_expansions: s.max_expansions,
            gap: s.gap,
            explore_time: s.explore_time,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentConfig {
    pub start: Position,
    pub v_max: f64,
    pub sensor_range: f64,
    pub capabilities: Vec<ActionId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskConfig {
    pub id: TaskId,
    pub center: Position,
    #[serde(default = "default_radius")]
    pub radius: f64,
    pub duration: f64,
    pub requirements: Vec<Requirement>,
    #[serde(default)]
    pub release: f64,
}

fn default_radius() -> f64 {
    0.5
}

fn default_dt() -> f64 {
    0.1
}

fn default_env() -> String {
    "default".into()
}

impl From<&Task> for TaskConfig {
    fn from(t: &Task) -> Self {
        Self {
            id: t.id,
            center: t.region_center,
            radius: t.region_radius,
            duration: t.duration,
            requirements: t.requirements.clone(),
            release: t.release_time,
        }
    }
}

impl TaskConfig {
    pub fn to_task(&self) -> Task {
        let mut t = Task::new(self.id, self.center, self.duration, self.requirements.clone()).released_at(self.release);
        t.region_radius = self.radius;
        t
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "default_env")]
    pub env: String,
    pub seed: u64,
    pub horizon: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    pub map: MapSource,
    #[serde(default)]
    pub comm: CommParams,
    #[serde(default)]
    pub planner: PlannerConfig,
    pub strategy: StrategyConfig,
    pub agents: Vec<AgentConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tasks: Vec<TaskConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub relations: Vec<TemporalRelation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorSpec>,
    /// Directory that relative paths resolve against; not serialized.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// Reads, parses and validates a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<ScenarioConfig, ConfigError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut cfg = ScenarioConfig::from_toml(&text)?;
    cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    cfg.validate()?;
    Ok(cfg)
}

impl ScenarioConfig {
    /// Parses without validating; relative paths resolve against the
    /// current directory until `base_dir` is set.
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn load_map(&self) -> Result<GridMap, String> {
        match (&self.map.file, &self.map.text) {
            (Some(file), None) => {
                let path = self.base_dir.join(file);
                let text =
                    fs::read_to_string(&path).map_err(|e| format!("map.file: cannot read {}: {e}", path.display()))?;
                GridMap::parse(&text).map_err(|e| format!("map.file: {e}"))
            }
            (None, Some(text)) => GridMap::parse(text).map_err(|e| format!("map.text: {e}")),
            _ => Err("map: give exactly one of `file` or `text`".into()),
        }
    }

    /// Collects every problem instead of stopping at the first.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut errors = Vec::new();
        if !(self.horizon >= 0.0) {
            errors.push(format!("horizon: must be non-negative, got {}", self.horizon));
        }
        if !(self.dt > 0.0) {
            errors.push(format!("dt: must be positive, got {}", self.dt));
        }
        if let Err(e) = self.comm.validate() {
            errors.push(format!("comm: {e}"));
        }
        if self.planner.budget.is_some_and(|b| !(b >= 0.0)) {
            errors.push("planner.budget: must be non-negative".into());
        }
        if !(self.planner.gap > 0.0) {
            errors.push("planner.gap: must be positive".into());
        }
        if !(self.planner.explore_time >= 0.0) {
            errors.push("planner.explore_time: must be non-negative".into());
        }
        if self.agents.is_empty() {
            errors.push("agents: at least one agent is required".into());
        }
        let map = match self.load_map() {
            Ok(m) => Some(m),
            Err(e) => {
                errors.push(e);
                None
            }
        };
        let offered: BTreeSet<ActionId> = self
            .agents
            .iter()
            .flat_map(|a| a.capabilities.iter().copied())
            .collect();
        for (i, a) in self.agents.iter().enumerate() {
            if let Some(map) = &map {
                if !map.is_free(a.start) {
                    errors.push(format!("agents[{i}].start: {} is not a free cell", a.start));
                }
            }
            if !(a.v_max > 0.0) {
                errors.push(format!("agents[{i}].v_max: must be positive"));
            }
            if !(a.sensor_range >= 0.0) {
                errors.push(format!("agents[{i}].sensor_range: must be non-negative"));
            }
        }
        let mut ids = HashSet::new();
        for (i, t) in self.tasks.iter().enumerate() {
            if !ids.insert(t.id) {
                errors.push(format!("tasks[{i}].id: duplicate id {}", t.id));
            }
            if let Some(map) = &map {
                if !map.is_free(t.center) {
                    errors.push(format!("tasks[{i}].center: {} is not a free cell", t.center));
                }
            }
            if let Err(e) = t.to_task().validate() {
                errors.push(format!("tasks[{i}]: {e}"));
            }
            for r in &t.requirements {
                if !offered.contains(&r.action) {
                    errors.push(format!("tasks[{i}].requirements: no agent offers action {}", r.action));
                }
            }
        }
        if let (Some(g), Some(map)) = (&self.generator, &map) {
            if let Err(e) = g.validate(map) {
                errors.push(format!("generator: {e}"));
            }
            if let Some(a) = g.actions.iter().find(|a| !offered.contains(a)) {
                errors.push(format!("generator.actions: no agent offers action {a}"));
            }
            if !self.tasks.is_empty() && self.tasks.iter().any(|t| t.id >= g.first_id) {
                errors.push("generator.first_id: must exceed every explicit task id".into());
            }
        }
        let generated = self.generator.is_some();
        for (i, r) in self.relations.iter().enumerate() {
            for (field, id) in [("first", r.first), ("second", r.second)] {
                if !ids.contains(&id) && !generated {
                    errors.push(format!("relations[{i}].{field}: unknown task {id}"));
                }
            }
            if r.first == r.second {
                errors.push(format!("relations[{i}]: a task cannot relate to itself"));
            }
        }
        if let Some(map) = &map {
            if let Err(e) = self.strategy.validate(self.agents.len(), map) {
                errors.push(e);
            }
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(errors))
        }
    }

    /// Explicit tasks followed by generated ones, with all relations.
    pub fn task_stream(&self, map: &GridMap, seed: u64) -> Result<(Vec<Task>, Vec<TemporalRelation>), ConfigError> {
        let mut tasks: Vec<Task> = self.tasks.iter().map(TaskConfig::to_task).collect();
        let mut relations = self.relations.clone();
        if let Some(g) = &self.generator {
            let stream =
                generate_tasks(g, map, seed).map_err(|e| ConfigError::Invalid(vec![format!("generator: {e}")]))?;
            tasks.extend(stream.tasks);
            relations.extend(stream.relations);
        }
        let ids: BTreeSet<TaskId> = tasks.iter().map(|t| t.id).collect();
        if let Some(r) = relations
            .iter()
            .find(|r| !ids.contains(&r.first) || !ids.contains(&r.second))
        {
            return Err(ConfigError::Invalid(vec![format!(
                "relations: {}-{} names a task that is neither listed nor generated",
                r.first, r.second
            )]));
        }
        Ok((tasks, relations))
    }

    /// Resolves the scenario into a runnable setup using `seed`.
    pub fn to_setup(&self, seed: u64) -> Result<SimSetup, ConfigError> {
        self.validate()?;
        let map = self.load_map().map_err(|e| ConfigError::Invalid(vec![e]))?;
        let (tasks, relations) = self.task_stream(&map, seed)?;
        let setup = SimSetup {
            oracle: TravelOracle::new(Arc::new(map)),
            agents: self
                .agents
                .iter()
                .map(|a| AgentSpec {
                    start: a.start,
                    v_max: a.v_max,
                    sensor_range: a.sensor_range,
                    capabilities: a.capabilities.iter().copied().collect(),
                })
                .collect(),
            comm: self.comm,
            tasks,
            relations,
            strategy: self.strategy.clone(),
            horizon: self.horizon,
            seed,
            dt: self.dt,
            planner: PlannerSettings {
                time_budget: self.planner.budget.map(Duration::from_secs_f64),
                max_expansions: self.planner.max_expansions,
                gap: self.planner.gap,
                explore_time: self.planner.explore_time,
            },
        };
        setup.snapped().map_err(|e| ConfigError::Invalid(vec![e.to_string()]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
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
"#;

    #[test]
    fn minimal_config_loads() {
        let cfg = ScenarioConfig::from_toml(MINIMAL).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.dt, 0.1);
        assert!(cfg.tasks.is_empty());
    }

    #[test]
    fn agent_on_obstacle_is_named() {
        let text = MINIMAL.replace("x = 0.5, y = 0.5", "x = 1.5, y = 1.5");
        let err = ScenarioConfig::from_toml(&text).unwrap().validate().unwrap_err();
        assert!(err.to_string().contains("agents[0].start"), "{err}");
    }

    #[test]
    fn unknown_field_reports_its_line() {
        let text = MINIMAL.replace("horizon = 10.0", "horizon = 10.0\nhorizn = 3");
        let err = ScenarioConfig::from_toml(&text).unwrap_err().to_string();
        assert!(err.contains("horizn") && err.contains("line"), "{err}");
    }

    #[test]
    fn serialization_round_trips() {
        let mut cfg = ScenarioConfig::from_toml(MINIMAL).unwrap();
        cfg.tasks.push(TaskConfig {
            id: 0,
            center: Position::new(2.5, 2.5),
            radius: 0.5,
            duration: 3.0,
            requirements: vec![Requirement { count: 1, action: 0 }],
            release: 1.5,
        });
        cfg.relations.push(TemporalRelation::precedence(0, 0));
        let back = ScenarioConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
    }
}
