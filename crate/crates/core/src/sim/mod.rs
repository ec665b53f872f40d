//! Discrete-event execution of the execute / communicate / replan loop.
//!
//! Motion, task execution and meetings are timed exactly; detection is
//! sampled on a fixed tick. Planning calls take no simulated time.

mod engine;
mod greedy;
mod knowledge;
mod ring;
mod team;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::time::Duration;

use thiserror::Error;

use crate::comm::CommParams;
use crate::map::{MapError, Position, TravelOracle};
use crate::planner::PlanError;
use crate::strategy::{StrategyConfig, StrategyKind};
use crate::task::{
    check_schedule, predecessors, ActionId, ExecutionInterval, RelationKind, Task, TaskId, TemporalRelation,
};

#[derive(Debug, Clone, PartialEq)]
pub struct AgentSpec {
    pub start: Position,
    pub v_max: f64,
    pub sensor_range: f64,
    pub capabilities: BTreeSet<ActionId>,
}

/// Search limits and exploration behaviour for every planning call.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlannerSettings {
    pub time_budget: Option<Duration>,
    /// Node budget; keeps runs reproducible where a wall-clock budget
    /// would not.
    pub max_expansions: Option<usize>,
    /// Convergence gap of the meeting optimizer, in seconds.
    pub gap: f64,
    /// How long agents roam when there is nothing to do, in seconds.
    pub explore_time: f64,
}

impl Default for PlannerSettings {
    fn default() -> Self {
        Self {
            time_budget: None,
            max_expansions: Some(50),
            gap: 0.5,
            explore_time: 20.0,
        }
    }
}

/// A fully resolved simulation input.
#[derive(Debug, Clone)]
pub struct SimSetup {
    pub oracle: TravelOracle,
    pub agents: Vec<AgentSpec>,
    pub comm: CommParams,
    /// Every task that will ever appear, with release times.
    pub tasks: Vec<Task>,
    pub relations: Vec<TemporalRelation>,
    pub strategy: StrategyConfig,
    pub horizon: f64,
    pub seed: u64,
    pub dt: f64,
    pub planner: PlannerSettings,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EventKind {
    Arrival,
    ExecutionStart,
    ExecutionEnd,
    Detection,
    CommEvent,
    Replanned,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Arrival => "arrival",
            EventKind::ExecutionStart => "execution_start",
            EventKind::ExecutionEnd => "execution_end",
            EventKind::Detection => "detection",
            EventKind::CommEvent => "comm_event",
            EventKind::Replanned => "replanned",
        }
    }
}

/// One log line. Payloads:
/// * `arrival`: agent, then the task id when arriving at a task
/// * `execution_start`: task, then the executing agents
/// * `execution_end`, `replanned`: task ids
/// * `detection`: agent, task
/// * `comm_event`: participating agents
#[derive(Debug, Clone, PartialEq)]
pub struct SimEvent {
    pub time: f64,
    pub kind: EventKind,
    pub payload: Vec<u64>,
}

impl fmt::Display for SimEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.6} {}", self.time, self.kind.as_str())?;
        for p in &self.payload {
            write!(f, " {p}")?;
        }
        Ok(())
    }
}

/// Renders the log as line-delimited records.
pub fn format_log(log: &[SimEvent]) -> String {
    let mut out = String::new();
    for e in log {
        out.push_str(&e.to_string());
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsRecord {
    pub finished_tasks: usize,
    pub comm_count: usize,
    /// Gaps between consecutive meetings. Empty when the strategy has no
    /// scheduled meetings.
    pub comm_intervals: Vec<f64>,
    /// Meeting time minus last task finish, one entry per cycle with work.
    pub idle_gaps: Vec<f64>,
    pub completion_times: BTreeMap<TaskId, f64>,
}

/// A broken runtime guarantee.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// Meeting positions did not form a connected graph.
    Disconnected { time: f64 },
    /// A task planned for a cycle finished after the cycle's meeting.
    LateTask { task: TaskId, finish: f64, event: f64 },
    /// An agent reached the meeting after the planned time.
    LateArrival { time: f64, planned: f64 },
    /// Completed intervals break a temporal relation.
    Relation(TemporalRelation),
}

/// Summary of one team-wide planning cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleRecord {
    pub start: f64,
    pub event_time: f64,
    pub tasks: Vec<TaskId>,
}

#[derive(Debug, Clone)]
pub struct SimOutcome {
    pub strategy: StrategyKind,
    pub log: Vec<SimEvent>,
    pub metrics: MetricsRecord,
    pub intervals: Vec<ExecutionInterval>,
    pub cycles: Vec<CycleRecord>,
    pub violations: Vec<Violation>,
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid setup: {0}")]
    Setup(String),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error("planning failed: {0}")]
    Plan(#[from] PlanError),
    /// Some task can never be completed by this team.
    #[error("infeasible: {0}")]
    Infeasible(String),
}

impl SimSetup {
    pub fn validate(&self) -> Result<(), SimError> {
        let map = self.oracle.map();
        if self.agents.is_empty() {
            return Err(SimError::Setup("no agents".into()));
        }
        if !(self.dt > 0.0) || !(self.horizon >= 0.0) {
            return Err(SimError::Setup("dt must be positive and horizon non-negative".into()));
        }
        for (i, a) in self.agents.iter().enumerate() {
            if !map.is_free(a.start) {
                return Err(SimError::Setup(format!("agent {i} starts off the free space")));
            }
            if !(a.v_max > 0.0) {
                return Err(SimError::Setup(format!("agent {i} has non-positive speed")));
            }
        }
        let ids: BTreeSet<TaskId> = self.tasks.iter().map(|t| t.id).collect();
        if ids.len() != self.tasks.len() {
            return Err(SimError::Setup("duplicate task ids".into()));
        }
        for t in &self.tasks {
            if !map.is_free(t.region_center) {
                return Err(SimError::Setup(format!("task {} lies off the free space", t.id)));
            }
        }
        for r in &self.relations {
            if !ids.contains(&r.first) || !ids.contains(&r.second) {
                return Err(SimError::Setup(format!(
                    "relation {}-{} names an unknown task",
                    r.first, r.second
                )));
            }
        }
        self.strategy
            .validate(self.agents.len(), map)
            .map_err(SimError::Setup)?;
        self.check_feasible()
    }

    /// Every task must be reachable by enough capable agents, and
    /// precedence must be acyclic.
    pub fn check_feasible(&self) -> Result<(), SimError> {
        let map = self.oracle.map();
        let mut fields: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        let mut reach = Vec::with_capacity(self.agents.len());
        for a in &self.agents {
            let cell = map.free_cell(a.start)?;
            reach.push(map.index(cell));
            fields
                .entry(map.index(cell))
                .or_insert_with(|| map.distance_field(cell));
        }
        for t in &self.tasks {
            let target = map.index(map.free_cell(t.region_center)?);
            let reachable: Vec<usize> = (0..self.agents.len())
                .filter(|&i| fields[&reach[i]][target].is_finite())
                .collect();
            for r in &t.requirements {
                let able = reachable
                    .iter()
                    .filter(|&&i| self.agents[i].capabilities.contains(&r.action))
                    .count();
                if able < r.count {
                    return Err(SimError::Infeasible(format!(
                        "task {} needs {} agent(s) with action {} but only {able} can reach it",
                        t.id, r.count, r.action
                    )));
                }
            }
            let total: usize = t.requirements.iter().map(|r| r.count).sum();
            if total > reachable.len() {
                return Err(SimError::Infeasible(format!(
                    "task {} needs {total} agents but only {} can reach it",
                    t.id,
                    reachable.len()
                )));
            }
        }
        let mut preds = predecessors(&self.relations);
        let mut ready: Vec<TaskId> = self
            .tasks
            .iter()
            .map(|t| t.id)
            .filter(|id| !preds.contains_key(id))
            .collect();
        while let Some(done) = ready.pop() {
            preds.retain(|&id, before| {
                before.remove(&done);
                if before.is_empty() {
                    ready.push(id);
                    false
                } else {
                    true
                }
            });
        }
        match preds.keys().next() {
            Some(id) => Err(SimError::Infeasible(format!("task {id} sits on a precedence cycle"))),
            None => Ok(()),
        }
    }

    /// Copy with every agent start, task center and fixed point moved to
    /// its cell center.
    pub fn snapped(mut self) -> Result<Self, MapError> {
        let map = self.oracle.shared_map();
        for a in &mut self.agents {
            a.start = map.snap(a.start)?;
        }
        for t in &mut self.tasks {
            t.region_center = map.snap(t.region_center)?;
        }
        if let Some(p) = self.strategy.fixed_point.as_mut() {
            *p = map.snap(*p)?;
        }
        Ok(self)
    }
}

/// Simulates the scenario up to its horizon.
pub fn run(setup: &SimSetup) -> Result<SimOutcome, SimError> {
    setup.validate()?;
    let mut outcome = match setup.strategy.kind {
        StrategyKind::Ring => ring::run(setup)?,
        StrategyKind::Greedy => greedy::run(setup)?,
        _ => team::run(setup)?,
    };
    for rel in relation_violations(&outcome.intervals, &setup.relations) {
        outcome.violations.push(Violation::Relation(rel));
    }
    Ok(outcome)
}

/// Relations broken by the completed intervals. Relations whose tasks never
/// ran are not judged, except that a finished successor needs a finished
/// predecessor and a finished concurrent task needs its partner.
pub fn relation_violations(intervals: &[ExecutionInterval], relations: &[TemporalRelation]) -> Vec<TemporalRelation> {
    let done: BTreeSet<TaskId> = intervals.iter().map(|iv| iv.task).collect();
    let relevant: Vec<TemporalRelation> = relations
        .iter()
        .filter(|r| {
            let (a, b) = (done.contains(&r.first), done.contains(&r.second));
            match r.kind {
                RelationKind::Precedence => b,
                RelationKind::Mutex => a && b,
                RelationKind::Concurrency => a || b,
            }
        })
        .copied()
        .collect();
    let mut violated = check_schedule(intervals, &relevant)
        .map(|c| c.violated)
        .unwrap_or_default();
    // a successor that ran without its predecessor is flagged too
    for r in &relevant {
        if r.kind == RelationKind::Precedence && !done.contains(&r.first) && !violated.contains(r) {
            violated.push(*r);
        }
    }
    violated
}

/// Farthest waypoint of `path` within `reach` meters, and the distance
/// walked to get there.
pub(crate) fn excursion(path: &[Position], reach: f64) -> (Position, f64) {
    let mut end = path[0];
    let mut walked = 0.0;
    for w in path.windows(2) {
        let step = w[0].distance(&w[1]);
        if walked + step > reach + 1e-9 {
            break;
        }
        walked += step;
        end = w[1];
    }
    (end, walked)
}

/// Shared bookkeeping to turn the engine state into a result.
pub(crate) fn finish_outcome(
    strategy: StrategyKind,
    log: Vec<SimEvent>,
    finished: &BTreeMap<TaskId, ExecutionInterval>,
    mut metrics: MetricsRecord,
    cycles: Vec<CycleRecord>,
    violations: Vec<Violation>,
) -> SimOutcome {
    metrics.finished_tasks = finished.len();
    metrics.completion_times = finished.iter().map(|(t, iv)| (*t, iv.finish)).collect();
    SimOutcome {
        strategy,
        log,
        metrics,
        intervals: finished.values().copied().collect(),
        cycles,
        violations,
    }
}
