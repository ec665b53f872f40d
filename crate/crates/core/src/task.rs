//! Tasks, temporal relations between them, detection and schedule checking.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::map::{GridMap, Position};

pub type TaskId = u32;
pub type ActionId = u32;
pub type AgentId = usize;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TaskError {
    #[error("task {0} appears in more than one execution interval")]
    DuplicateInterval(TaskId),
    #[error("interval of task {0} is malformed (finish before start or non-finite)")]
    MalformedInterval(TaskId),
    #[error("unknown task id {0}")]
    UnknownTask(TaskId),
}

/// `count` agents must perform `action` for the task's whole duration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Requirement {
    pub count: usize,
    pub action: ActionId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub id: TaskId,
    pub region_center: Position,
    pub region_radius: f64,
    pub duration: f64,
    pub requirements: Vec<Requirement>,
    pub release_time: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detected_at: Option<f64>,
}

impl Task {
    pub fn new(id: TaskId, center: Position, duration: f64, requirements: Vec<Requirement>) -> Self {
        Self {
            id,
            region_center: center,
            region_radius: 0.5,
            duration,
            requirements,
            release_time: 0.0,
            detected_at: None,
        }
    }

    pub fn released_at(mut self, t: f64) -> Self {
        self.release_time = t;
        self
    }

    /// Total number of agents the task occupies.
    pub fn agents_required(&self) -> usize {
        self.requirements.iter().map(|r| r.count).sum()
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(format!("task {}: duration must be > 0", self.id));
        }
        if self.requirements.is_empty() {
            return Err(format!("task {}: needs at least one requirement", self.id));
        }
        if self.requirements.iter().any(|r| r.count == 0) {
            return Err(format!("task {}: requirement counts must be >= 1", self.id));
        }
        if !(self.release_time.is_finite() && self.release_time >= 0.0) {
            return Err(format!("task {}: release_time must be >= 0", self.id));
        }
        if !(self.region_radius.is_finite() && self.region_radius >= 0.0) {
            return Err(format!("task {}: region_radius must be >= 0", self.id));
        }
        Ok(())
    }

    pub fn contains(&self, p: Position) -> bool {
        p.distance(&self.region_center) <= self.region_radius + 1e-9
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RelationKind {
    /// `first` finishes no later than `second` starts.
    Precedence,
    /// Closed execution intervals are disjoint.
    Mutex,
    /// Closed execution intervals intersect.
    Concurrency,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TemporalRelation {
    pub first: TaskId,
    pub second: TaskId,
    pub kind: RelationKind,
}

impl TemporalRelation {
    pub fn precedence(first: TaskId, second: TaskId) -> Self {
        Self {
            first,
            second,
            kind: RelationKind::Precedence,
        }
    }

    pub fn mutex(first: TaskId, second: TaskId) -> Self {
        Self {
            first,
            second,
            kind: RelationKind::Mutex,
        }
    }

    pub fn concurrency(first: TaskId, second: TaskId) -> Self {
        Self {
            first,
            second,
            kind: RelationKind::Concurrency,
        }
    }

    pub fn involves(&self, id: TaskId) -> bool {
        self.first == id || self.second == id
    }

    pub fn other(&self, id: TaskId) -> Option<TaskId> {
        if self.first == id {
            Some(self.second)
        } else if self.second == id {
            Some(self.first)
        } else {
            None
        }
    }

    /// Evaluates the relation on closed intervals `(start, finish)`.
    pub fn holds(&self, first: (f64, f64), second: (f64, f64)) -> bool {
        let overlap = first.0 <= second.1 && second.0 <= first.1;
        match self.kind {
            RelationKind::Precedence => first.1 <= second.0,
            RelationKind::Mutex => !overlap,
            RelationKind::Concurrency => overlap,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExecutionInterval {
    pub task: TaskId,
    pub start: f64,
    pub finish: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScheduleCheck {
    pub violated: Vec<TemporalRelation>,
}

impl ScheduleCheck {
    pub fn is_valid(&self) -> bool {
        self.violated.is_empty()
    }
}

/// Checks every relation against the executed intervals.
///
/// A relation that mentions an unscheduled task holds vacuously for
/// precedence and mutex and fails for concurrency. Violations are reported in
/// sorted order, so the result does not depend on input order.
pub fn check_schedule(
    intervals: &[ExecutionInterval],
    relations: &[TemporalRelation],
) -> Result<ScheduleCheck, TaskError> {
    let mut by_task = BTreeMap::new();
    for iv in intervals {
        if !(iv.start.is_finite() && iv.finish.is_finite()) || iv.finish < iv.start {
            return Err(TaskError::MalformedInterval(iv.task));
        }
        if by_task.insert(iv.task, (iv.start, iv.finish)).is_some() {
            return Err(TaskError::DuplicateInterval(iv.task));
        }
    }
    let mut violated: Vec<TemporalRelation> = relations
        .iter()
        .filter(|rel| match (by_task.get(&rel.first), by_task.get(&rel.second)) {
            (Some(a), Some(b)) => !rel.holds(*a, *b),
            _ => rel.kind == RelationKind::Concurrency,
        })
        .copied()
        .collect();
    violated.sort_unstable();
    violated.dedup();
    Ok(ScheduleCheck { violated })
}

/// Ids of undetected tasks that an agent at `agent_pos` can see at `now`,
/// in ascending id order. Seen tasks get `detected_at = now`.
pub fn detect_tasks(
    agent_pos: Position,
    sensor_range: f64,
    undetected: &mut [Task],
    now: f64,
    map: &GridMap,
) -> Vec<TaskId> {
    let mut found: Vec<TaskId> = Vec::new();
    for task in undetected.iter_mut() {
        if task.detected_at.is_some() || task.release_time > now {
            continue;
        }
        if agent_pos.distance(&task.region_center) > sensor_range {
            continue;
        }
        let clear = map
            .los_obstacle_length(agent_pos, task.region_center)
            .map(|d| d == 0.0)
            .unwrap_or(false);
        if clear {
            task.detected_at = Some(now);
            found.push(task.id);
        }
    }
    found.sort_unstable();
    found
}

/// Precedence predecessors of each task.
pub fn predecessors(relations: &[TemporalRelation]) -> BTreeMap<TaskId, BTreeSet<TaskId>> {
    let mut out: BTreeMap<TaskId, BTreeSet<TaskId>> = BTreeMap::new();
    for r in relations.iter().filter(|r| r.kind == RelationKind::Precedence) {
        out.entry(r.second).or_default().insert(r.first);
    }
    out
}
