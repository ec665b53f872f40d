//! Plan evaluation and the lower/upper bounds used by the search.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use super::event::EventPlanner;
use crate::comm::CommParams;
use crate::comopt::{CommContext, CommEvent, LastTaskState};
use crate::map::TravelOracle;
use crate::scheduler::{schedule_min_makespan, AssignedPlan, Timetable};
use crate::task::{AgentId, RelationKind, Task, TaskId, TemporalRelation};
use crate::team::{eligible_groups, AgentSnapshot, TravelModel, ZeroTravel};

/// Improvement below this does not count when extending a plan greedily.
pub const IMPROVEMENT_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("event time {event} is not after cycle start {start}")]
    EventNotAfterStart { event: f64, start: f64 },
    #[error("agent ids must be 0..n in order")]
    AgentIds,
    #[error("team is empty")]
    EmptyTeam,
    #[error("no communication event can close even the empty plan")]
    NoEvent,
}

/// Everything one planning call sees.
pub struct PlanningProblem<'a> {
    /// Agent `i` must have id `i`.
    pub agents: &'a [AgentSnapshot],
    /// Detected, not yet completed tasks.
    pub tasks: &'a BTreeMap<TaskId, Task>,
    pub relations: &'a [TemporalRelation],
    /// Tasks finished in earlier cycles.
    pub completed: &'a BTreeSet<TaskId>,
    pub cycle_start: f64,
    pub oracle: &'a TravelOracle,
    pub comm: &'a CommParams,
    pub events: &'a dyn EventPlanner,
    speeds: Vec<f64>,
    groups: BTreeMap<TaskId, Vec<Vec<AgentId>>>,
    predecessors: BTreeMap<TaskId, Vec<TaskId>>,
    concurrent: BTreeMap<TaskId, Vec<TaskId>>,
}

impl<'a> PlanningProblem<'a> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        agents: &'a [AgentSnapshot],
        tasks: &'a BTreeMap<TaskId, Task>,
        relations: &'a [TemporalRelation],
        completed: &'a BTreeSet<TaskId>,
        cycle_start: f64,
        oracle: &'a TravelOracle,
        comm: &'a CommParams,
        events: &'a dyn EventPlanner,
    ) -> Result<Self, PlanError> {
        if agents.is_empty() {
            return Err(PlanError::EmptyTeam);
        }
        if agents.iter().enumerate().any(|(i, a)| a.id != i) {
            return Err(PlanError::AgentIds);
        }
        let groups = tasks.values().map(|t| (t.id, eligible_groups(t, agents))).collect();
        let mut predecessors: BTreeMap<TaskId, Vec<TaskId>> = BTreeMap::new();
        let mut concurrent: BTreeMap<TaskId, Vec<TaskId>> = BTreeMap::new();
        for r in relations {
            match r.kind {
                RelationKind::Precedence => predecessors.entry(r.second).or_default().push(r.first),
                RelationKind::Concurrency => {
                    concurrent.entry(r.first).or_default().push(r.second);
                    concurrent.entry(r.second).or_default().push(r.first);
                }
                RelationKind::Mutex => {}
            }
        }
        Ok(Self {
            agents,
            tasks,
            relations,
            completed,
            cycle_start,
            oracle,
            comm,
            events,
            speeds: agents.iter().map(|a| a.v_max).collect(),
            groups,
            predecessors,
            concurrent,
        })
    }

    pub fn comm_context(&self) -> CommContext<'_> {
        CommContext {
            oracle: self.oracle,
            params: self.comm,
            speeds: &self.speeds,
        }
    }

    pub fn groups_for(&self, task: TaskId) -> &[Vec<AgentId>] {
        self.groups.get(&task).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Could `task` ever join a plan this cycle?
    fn addable_eventually(&self, task: TaskId) -> bool {
        if self.groups_for(task).is_empty() {
            return false;
        }
        let preds_ok = self.predecessors.get(&task).is_none_or(|ps| {
            ps.iter()
                .all(|p| self.completed.contains(p) || self.tasks.contains_key(p))
        });
        let partners_ok = self
            .concurrent
            .get(&task)
            .is_none_or(|ps| ps.iter().all(|p| !self.completed.contains(p)));
        preds_ok && partners_ok
    }
}

/// A fully timed cycle: assignment, timetable and closing event.
#[derive(Debug, Clone, PartialEq)]
pub struct CollectivePlan {
    pub assignment: AssignedPlan,
    pub timetable: Timetable,
    pub event: CommEvent,
    pub cycle_start: f64,
    /// Tasks completed per second over the cycle.
    pub objective: f64,
}

impl CollectivePlan {
    pub fn task_count(&self) -> usize {
        self.assignment.len()
    }
}

/// Completed tasks per second between `cycle_start` and the event.
pub fn objective_rate(plan: &CollectivePlan, cycle_start: f64) -> Result<f64, PlanError> {
    let done = plan
        .timetable
        .intervals
        .values()
        .filter(|iv| iv.finish <= plan.event.time + 1e-9)
        .count();
    if done == 0 {
        return Ok(0.0);
    }
    let span = plan.event.time - cycle_start;
    if span <= 0.0 {
        return Err(PlanError::EventNotAfterStart {
            event: plan.event.time,
            start: cycle_start,
        });
    }
    Ok(done as f64 / span)
}

/// Where and when every agent is free after its last task in `timetable`.
pub fn last_task_state(problem: &PlanningProblem<'_>, plan: &AssignedPlan, timetable: &Timetable) -> LastTaskState {
    let mut finish_times = Vec::with_capacity(problem.agents.len());
    let mut positions = Vec::with_capacity(problem.agents.len());
    for (i, agent) in problem.agents.iter().enumerate() {
        match plan.sequence(i).last() {
            Some(t) => {
                finish_times.push(timetable.intervals[t].finish);
                positions.push(problem.tasks[t].region_center);
            }
            None => {
                finish_times.push(agent.available_at.max(problem.cycle_start));
                positions.push(agent.position);
            }
        }
    }
    LastTaskState {
        finish_times,
        positions,
    }
}

/// Schedules the plan, places the event and scores it. `None` if any step is
/// infeasible.
pub fn evaluate(problem: &PlanningProblem<'_>, plan: &AssignedPlan) -> Option<CollectivePlan> {
    for t in plan.groups().keys() {
        if let Some(partners) = problem.concurrent.get(t) {
            if partners.iter().any(|p| !plan.contains(*p)) {
                return None;
            }
        }
        if let Some(ps) = problem.predecessors.get(t) {
            if ps.iter().any(|p| !problem.completed.contains(p) && !plan.contains(*p)) {
                return None;
            }
        }
    }
    let timetable =
        schedule_min_makespan(plan, problem.tasks, problem.relations, problem.agents, problem.oracle).ok()?;
    let last = last_task_state(problem, plan, &timetable);
    let event = problem
        .events
        .plan_event(&last, problem.cycle_start, &problem.comm_context())?;
    if timetable.intervals.values().any(|iv| iv.finish > event.time + 1e-9) {
        return None;
    }
    let mut out = CollectivePlan {
        assignment: plan.clone(),
        timetable,
        event,
        cycle_start: problem.cycle_start,
        objective: 0.0,
    };
    out.objective = objective_rate(&out, problem.cycle_start).ok()?;
    Some(out)
}

/// Unassigned tasks that may be appended now: every precedence predecessor
/// is done or already in the plan, and some agent group can cover it.
pub fn get_feasible_tasks(problem: &PlanningProblem<'_>, plan: &AssignedPlan) -> Vec<TaskId> {
    problem
        .tasks
        .keys()
        .copied()
        .filter(|t| !plan.contains(*t) && problem.addable_eventually(*t))
        .filter(|t| {
            problem
                .predecessors
                .get(t)
                .is_none_or(|ps| ps.iter().all(|p| problem.completed.contains(p) || plan.contains(*p)))
        })
        .collect()
}

/// One child per eligible group, with `task` appended to each member's tail.
pub fn expand_node(problem: &PlanningProblem<'_>, plan: &AssignedPlan, task: TaskId) -> Vec<AssignedPlan> {
    problem
        .groups_for(task)
        .iter()
        .map(|group| plan.with(task, group))
        .collect()
}

/// Greedy completion: repeatedly append the feasible task and group with the
/// smallest worst-case travel, keep going while the rate improves, and return
/// the best rate seen with its plan.
pub fn low_bound(problem: &PlanningProblem<'_>, plan: &AssignedPlan) -> (f64, Option<CollectivePlan>) {
    let mut best = evaluate(problem, plan);
    let mut best_rate = best.as_ref().map_or(f64::NEG_INFINITY, |p| p.objective);
    let mut current = plan.clone();
    let mut last_rate = best_rate;
    while let Some((task, group)) = cheapest_extension(problem, &current) {
        current.push(task, &group);
        let Some(candidate) = evaluate(problem, &current) else {
            break;
        };
        let rate = candidate.objective;
        if rate > best_rate {
            best_rate = rate;
            best = Some(candidate);
        }
        if rate <= last_rate + IMPROVEMENT_TOL {
            break;
        }
        last_rate = rate;
    }
    (best_rate, best)
}

fn cheapest_extension(problem: &PlanningProblem<'_>, plan: &AssignedPlan) -> Option<(TaskId, Vec<AgentId>)> {
    let mut best: Option<(f64, TaskId, &Vec<AgentId>)> = None;
    for task in get_feasible_tasks(problem, plan) {
        let center = problem.tasks[&task].region_center;
        for group in problem.groups_for(task) {
            let mut cost = 0.0f64;
            for &a in group {
                let agent = &problem.agents[a];
                let from = plan
                    .sequence(a)
                    .last()
                    .map_or(agent.position, |t| problem.tasks[t].region_center);
                let tt = problem
                    .oracle
                    .travel_time(from, center, agent.v_max)
                    .unwrap_or(f64::INFINITY);
                cost = cost.max(tt);
            }
            if best.is_none_or(|(c, _, _)| cost < c) {
                best = Some((cost, task, group));
            }
        }
    }
    best.filter(|(c, _, _)| c.is_finite()).map(|(_, t, g)| (t, g.clone()))
}

/// Optimistic rate for every plan that extends `plan`.
///
/// With travel set to zero and mutex ignored, no extension can finish its
/// cycle before the relaxed makespan of `plan`, before the team's total work
/// spread over all agents, or before its longest task ends. Adding `s` more
/// tasks is scored with the `s` cheapest remaining tasks in each of those
/// terms, which bounds every descendant from above.
pub fn up_bound(problem: &PlanningProblem<'_>, plan: &AssignedPlan) -> f64 {
    let precedence: Vec<TemporalRelation> = problem
        .relations
        .iter()
        .filter(|r| r.kind == RelationKind::Precedence)
        .copied()
        .collect();
    let relaxed = match schedule_min_makespan(
        plan,
        problem.tasks,
        &precedence,
        problem.agents,
        &ZeroTravel as &dyn TravelModel,
    ) {
        Ok(t) => t,
        Err(_) => return 0.0,
    };
    let start = problem.cycle_start;
    let assigned = plan.len();
    let span = relaxed.makespan().map_or(0.0, |m| m - start);
    let n_agents = problem.agents.len() as f64;
    let mut work: f64 = problem.agents.iter().map(|a| (a.available_at - start).max(0.0)).sum();
    for t in plan.groups().keys() {
        work += problem.tasks[t].duration * problem.tasks[t].agents_required() as f64;
    }
    let mut extra_work = Vec::new();
    let mut extra_dur = Vec::new();
    for (id, task) in problem.tasks {
        if !plan.contains(*id) && problem.addable_eventually(*id) {
            extra_work.push(task.duration * task.agents_required() as f64);
            extra_dur.push(task.duration);
        }
    }
    extra_work.sort_by(f64::total_cmp);
    extra_dur.sort_by(f64::total_cmp);
    let mut best = 0.0f64;
    let mut cumulative = work;
    for s in 0..=extra_work.len() {
        if s > 0 {
            cumulative += extra_work[s - 1];
        }
        let count = (assigned + s) as f64;
        if count == 0.0 {
            continue;
        }
        let mut horizon = span.max(cumulative / n_agents);
        if s > 0 {
            horizon = horizon.max(extra_dur[s - 1]);
        }
        if horizon > 0.0 {
            best = best.max(count / horizon);
        }
    }
    // absorb rounding so the bound never falls below an equal lower bound
    best * (1.0 + 1e-12)
}
