//! Minimum-makespan timing of a fixed assignment.
//!
//! Start times are the variables of a difference-constraint system: agent
//! chains with travel, one synchronized start per task, precedence and
//! oriented mutex pairs. For a fixed orientation, earliest-start propagation
//! over the constraint DAG is the minimum-makespan solution.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use thiserror::Error;

use crate::map::Position;
use crate::task::{AgentId, ExecutionInterval, RelationKind, Task, TaskId, TemporalRelation};
use crate::team::{cover_roles, AgentSnapshot, TravelModel};

/// Gap enforced between two mutually exclusive tasks, in seconds. Closed
/// intervals that merely touch would intersect.
pub const MUTEX_SEPARATION: f64 = 1e-3;

/// Free mutex pairs up to this count are oriented exhaustively; beyond it a
/// greedy earliest-first orientation is used.
pub const MAX_EXHAUSTIVE_MUTEX: usize = 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScheduleError {
    #[error("unknown task {0}")]
    UnknownTask(TaskId),
    #[error("task {0} is assigned inconsistently across agent sequences")]
    InconsistentAssignment(TaskId),
    #[error("agents assigned to task {0} cannot cover its requirements")]
    CapabilityViolation(TaskId),
    #[error("no path for agent {agent} to task {task}")]
    Unreachable { agent: AgentId, task: TaskId },
    #[error("constraints are cyclic")]
    Cyclic,
    #[error("concurrency relation {0:?} cannot be met")]
    Concurrency(TemporalRelation),
}

impl ScheduleError {
    /// Errors that only mean "this plan cannot be timed", as opposed to
    /// malformed input.
    pub fn is_infeasible(&self) -> bool {
        matches!(
            self,
            ScheduleError::Cyclic | ScheduleError::Concurrency(_) | ScheduleError::Unreachable { .. }
        )
    }
}

/// Per-agent task sequences plus the agent group of every task.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct AssignedPlan {
    sequences: Vec<Vec<TaskId>>,
    groups: BTreeMap<TaskId, Vec<AgentId>>,
}

impl AssignedPlan {
    pub fn empty(agents: usize) -> Self {
        Self {
            sequences: vec![Vec::new(); agents],
            groups: BTreeMap::new(),
        }
    }

    /// Builds a plan from explicit sequences; groups are derived.
    pub fn from_sequences(sequences: Vec<Vec<TaskId>>) -> Self {
        let mut groups: BTreeMap<TaskId, Vec<AgentId>> = BTreeMap::new();
        for (agent, seq) in sequences.iter().enumerate() {
            for &t in seq {
                groups.entry(t).or_default().push(agent);
            }
        }
        Self { sequences, groups }
    }

    /// Appends `task` to the tail of every group member's sequence.
    pub fn push(&mut self, task: TaskId, group: &[AgentId]) {
        assert!(!self.groups.contains_key(&task), "task {task} already assigned");
        let mut g = group.to_vec();
        g.sort_unstable();
        g.dedup();
        for &a in &g {
            self.sequences[a].push(task);
        }
        self.groups.insert(task, g);
    }

    pub fn with(&self, task: TaskId, group: &[AgentId]) -> Self {
        let mut next = self.clone();
        next.push(task, group);
        next
    }

    pub fn agent_count(&self) -> usize {
        self.sequences.len()
    }

    pub fn sequences(&self) -> &[Vec<TaskId>] {
        &self.sequences
    }

    pub fn sequence(&self, agent: AgentId) -> &[TaskId] {
        &self.sequences[agent]
    }

    pub fn groups(&self) -> &BTreeMap<TaskId, Vec<AgentId>> {
        &self.groups
    }

    pub fn group(&self, task: TaskId) -> Option<&[AgentId]> {
        self.groups.get(&task).map(Vec::as_slice)
    }

    pub fn contains(&self, task: TaskId) -> bool {
        self.groups.contains_key(&task)
    }

    pub fn task_ids(&self) -> BTreeSet<TaskId> {
        self.groups.keys().copied().collect()
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }
}

/// Timed execution of an [`AssignedPlan`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Timetable {
    pub intervals: BTreeMap<TaskId, ExecutionInterval>,
    /// Arrival time of each agent at each task in its sequence.
    pub arrivals: Vec<Vec<(TaskId, f64)>>,
    /// `gates[v]` lists `(u, offset)`: `v` may start once `u` finished `offset` ago.
    pub gates: BTreeMap<TaskId, Vec<(TaskId, f64)>>,
}

impl Timetable {
    pub fn makespan(&self) -> Option<f64> {
        self.intervals.values().map(|iv| iv.finish).reduce(f64::max)
    }

    pub fn interval(&self, task: TaskId) -> Option<&ExecutionInterval> {
        self.intervals.get(&task)
    }

    pub fn execution_intervals(&self) -> Vec<ExecutionInterval> {
        self.intervals.values().copied().collect()
    }
}

#[derive(Debug, Clone, Copy)]
struct Edge {
    from: usize,
    to: usize,
    weight: f64,
}

/// Earliest starts over the DAG; `None` on a cycle.
fn longest_path(n: usize, lower: &[f64], edges: &[Edge]) -> Option<Vec<f64>> {
    let mut indegree = vec![0usize; n];
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (k, e) in edges.iter().enumerate() {
        indegree[e.to] += 1;
        out[e.from].push(k);
    }
    let mut start = lower.to_vec();
    let mut ready: VecDeque<usize> = (0..n).filter(|&v| indegree[v] == 0).collect();
    let mut seen = 0;
    while let Some(u) = ready.pop_front() {
        seen += 1;
        for &k in &out[u] {
            let e = edges[k];
            start[e.to] = start[e.to].max(start[u] + e.weight);
            indegree[e.to] -= 1;
            if indegree[e.to] == 0 {
                ready.push_back(e.to);
            }
        }
    }
    (seen == n).then_some(start)
}

fn reachability(n: usize, edges: &[Edge]) -> Vec<Vec<bool>> {
    let mut adj = vec![Vec::new(); n];
    for e in edges {
        adj[e.from].push(e.to);
    }
    (0..n)
        .map(|s| {
            let mut seen = vec![false; n];
            let mut stack = adj[s].clone();
            while let Some(v) = stack.pop() {
                if !seen[v] {
                    seen[v] = true;
                    stack.extend(adj[v].iter().copied());
                }
            }
            seen
        })
        .collect()
}

fn makespan_of(start: &[f64], durations: &[f64]) -> f64 {
    start
        .iter()
        .zip(durations)
        .map(|(s, d)| s + d)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Times `plan` so that the latest finish is as early as possible.
///
/// Each task starts once all of its agents have arrived (one synchronized
/// start per task). Precedence relations between planned tasks are
/// enforced, mutex pairs are oriented, and concurrency pairs are checked on
/// the result. Relations mentioning tasks outside the plan are ignored.
pub fn schedule_min_makespan(
    plan: &AssignedPlan,
    tasks: &BTreeMap<TaskId, Task>,
    relations: &[TemporalRelation],
    agents: &[AgentSnapshot],
    travel: &dyn TravelModel,
) -> Result<Timetable, ScheduleError> {
    let ids: Vec<TaskId> = plan.groups().keys().copied().collect();
    let index: BTreeMap<TaskId, usize> = ids.iter().enumerate().map(|(i, &t)| (t, i)).collect();
    let n = ids.len();
    let mut durations = Vec::with_capacity(n);
    let mut centers: Vec<Position> = Vec::with_capacity(n);
    for &t in &ids {
        let task = tasks.get(&t).ok_or(ScheduleError::UnknownTask(t))?;
        let group: Vec<&AgentSnapshot> = plan.groups()[&t].iter().map(|&a| &agents[a]).collect();
        if cover_roles(task, &group).is_none() {
            return Err(ScheduleError::CapabilityViolation(t));
        }
        durations.push(task.duration);
        centers.push(task.region_center);
    }
    for (agent, seq) in plan.sequences().iter().enumerate() {
        let unique: BTreeSet<_> = seq.iter().collect();
        if unique.len() != seq.len() {
            return Err(ScheduleError::InconsistentAssignment(seq[0]));
        }
        for t in seq {
            let in_group = plan.group(*t).is_some_and(|g| g.contains(&agent));
            if !in_group {
                return Err(ScheduleError::InconsistentAssignment(*t));
            }
        }
    }
    for (t, g) in plan.groups() {
        if g.iter().any(|&a| !plan.sequence(a).contains(t)) {
            return Err(ScheduleError::InconsistentAssignment(*t));
        }
    }

    let mut lower = vec![f64::NEG_INFINITY; n];
    let mut edges = Vec::new();
    for (agent, seq) in plan.sequences().iter().enumerate() {
        let a = &agents[agent];
        let mut prev: Option<usize> = None;
        for &t in seq {
            let v = index[&t];
            match prev {
                None => {
                    let tt = travel
                        .travel_time(a.position, centers[v], a.v_max)
                        .ok_or(ScheduleError::Unreachable { agent, task: t })?;
                    lower[v] = lower[v].max(a.available_at + tt);
                }
                Some(u) => {
                    let tt = travel
                        .travel_time(centers[u], centers[v], a.v_max)
                        .ok_or(ScheduleError::Unreachable { agent, task: t })?;
                    edges.push(Edge {
                        from: u,
                        to: v,
                        weight: durations[u] + tt,
                    });
                }
            }
            prev = Some(v);
        }
    }
    let mut gates: BTreeMap<TaskId, Vec<(TaskId, f64)>> = BTreeMap::new();
    let mut mutex_pairs = Vec::new();
    let mut concurrency = Vec::new();
    for rel in relations {
        let (Some(&u), Some(&v)) = (index.get(&rel.first), index.get(&rel.second)) else {
            continue;
        };
        match rel.kind {
            RelationKind::Precedence => {
                edges.push(Edge {
                    from: u,
                    to: v,
                    weight: durations[u],
                });
                gates.entry(ids[v]).or_default().push((ids[u], 0.0));
            }
            RelationKind::Mutex => mutex_pairs.push((u.min(v), u.max(v))),
            RelationKind::Concurrency => concurrency.push(*rel),
        }
    }
    mutex_pairs.sort_unstable();
    mutex_pairs.dedup();

    if longest_path(n, &lower, &edges).is_none() {
        return Err(ScheduleError::Cyclic);
    }
    let reach = reachability(n, &edges);
    let mutex_edge = |from: usize, to: usize| Edge {
        from,
        to,
        weight: durations[from] + MUTEX_SEPARATION,
    };
    let mut free = Vec::new();
    for &(u, v) in &mutex_pairs {
        if reach[u][v] {
            edges.push(mutex_edge(u, v));
        } else if reach[v][u] {
            edges.push(mutex_edge(v, u));
        } else {
            free.push((u, v));
        }
    }

    let oriented: Vec<Edge> = if free.len() <= MAX_EXHAUSTIVE_MUTEX {
        let mut best: Option<(f64, Vec<Edge>)> = None;
        for mask in 0u32..(1u32 << free.len()) {
            let extra: Vec<Edge> = free
                .iter()
                .enumerate()
                .map(|(k, &(u, v))| {
                    if mask & (1 << k) == 0 {
                        mutex_edge(u, v)
                    } else {
                        mutex_edge(v, u)
                    }
                })
                .collect();
            let all: Vec<Edge> = edges.iter().chain(&extra).copied().collect();
            if let Some(start) = longest_path(n, &lower, &all) {
                let m = makespan_of(&start, &durations);
                if best.as_ref().is_none_or(|(bm, _)| m < *bm) {
                    best = Some((m, extra));
                }
            }
        }
        best.ok_or(ScheduleError::Cyclic)?.1
    } else {
        orient_greedily(n, &lower, &edges, &free, &mutex_edge)?
    };
    for e in &oriented {
        gates
            .entry(ids[e.to])
            .or_default()
            .push((ids[e.from], MUTEX_SEPARATION));
    }
    for &(u, v) in &mutex_pairs {
        if reach[u][v] {
            gates.entry(ids[v]).or_default().push((ids[u], MUTEX_SEPARATION));
        } else if reach[v][u] {
            gates.entry(ids[u]).or_default().push((ids[v], MUTEX_SEPARATION));
        }
    }
    edges.extend(oriented);
    let start = longest_path(n, &lower, &edges).ok_or(ScheduleError::Cyclic)?;

    let intervals: BTreeMap<TaskId, ExecutionInterval> = ids
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            (
                t,
                ExecutionInterval {
                    task: t,
                    start: start[i],
                    finish: start[i] + durations[i],
                },
            )
        })
        .collect();
    for rel in concurrency {
        let a = &intervals[&rel.first];
        let b = &intervals[&rel.second];
        if !rel.holds((a.start, a.finish), (b.start, b.finish)) {
            return Err(ScheduleError::Concurrency(rel));
        }
    }
    let mut arrivals = Vec::with_capacity(plan.agent_count());
    for (agent, seq) in plan.sequences().iter().enumerate() {
        let a = &agents[agent];
        let mut here = a.position;
        let mut free_at = a.available_at;
        let mut list = Vec::with_capacity(seq.len());
        for &t in seq {
            let v = index[&t];
            let tt = travel
                .travel_time(here, centers[v], a.v_max)
                .ok_or(ScheduleError::Unreachable { agent, task: t })?;
            list.push((t, free_at + tt));
            free_at = intervals[&t].finish;
            here = centers[v];
        }
        arrivals.push(list);
    }
    for g in gates.values_mut() {
        // keep the largest offset per predecessor
        g.sort_by(|a, b| a.0.cmp(&b.0).then(b.1.total_cmp(&a.1)));
        g.dedup_by(|a, b| a.0 == b.0);
    }
    Ok(Timetable {
        intervals,
        arrivals,
        gates,
    })
}

fn orient_greedily(
    n: usize,
    lower: &[f64],
    edges: &[Edge],
    free: &[(usize, usize)],
    mutex_edge: &dyn Fn(usize, usize) -> Edge,
) -> Result<Vec<Edge>, ScheduleError> {
    let mut chosen: Vec<Edge> = Vec::new();
    let mut pending: Vec<(usize, usize)> = free.to_vec();
    while !pending.is_empty() {
        let all: Vec<Edge> = edges.iter().chain(&chosen).copied().collect();
        let start = longest_path(n, lower, &all).ok_or(ScheduleError::Cyclic)?;
        // earliest-feasible pair first; ties by lower index
        let (k, &(u, v)) = pending
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| {
                let ka = start[a.0].min(start[a.1]);
                let kb = start[b.0].min(start[b.1]);
                ka.total_cmp(&kb).then(a.cmp(b))
            })
            .expect("non-empty");
        pending.remove(k);
        let (first, second) = if start[u] <= start[v] { (u, v) } else { (v, u) };
        let mut attempt = all.clone();
        attempt.push(mutex_edge(first, second));
        if longest_path(n, lower, &attempt).is_some() {
            chosen.push(mutex_edge(first, second));
        } else {
            chosen.push(mutex_edge(second, first));
        }
    }
    Ok(chosen)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::task::Requirement;
    use crate::team::EuclideanTravel;

    fn task(id: TaskId, x: f64, duration: f64) -> Task {
        Task::new(
            id,
            Position::new(x, 0.0),
            duration,
            vec![Requirement { count: 1, action: 0 }],
        )
    }

    fn agent(id: AgentId, x: f64) -> AgentSnapshot {
        AgentSnapshot::new(id, Position::new(x, 0.0), 1.0, [0])
    }

    fn table(ts: &[Task]) -> BTreeMap<TaskId, Task> {
        ts.iter().map(|t| (t.id, t.clone())).collect()
    }

    #[test]
    fn single_chain() {
        let tasks = table(&[task(1, 2.0, 10.0)]);
        let plan = AssignedPlan::from_sequences(vec![vec![1]]);
        let tt = schedule_min_makespan(&plan, &tasks, &[], &[agent(0, 0.0)], &EuclideanTravel).unwrap();
        assert_eq!(tt.interval(1).unwrap().start, 2.0);
        assert_eq!(tt.interval(1).unwrap().finish, 12.0);
    }

    #[test]
    fn two_tasks_in_sequence() {
        let tasks = table(&[task(1, 2.0, 10.0), task(2, 5.0, 5.0)]);
        let plan = AssignedPlan::from_sequences(vec![vec![1, 2]]);
        let tt = schedule_min_makespan(&plan, &tasks, &[], &[agent(0, 0.0)], &EuclideanTravel).unwrap();
        assert_eq!(tt.interval(1).unwrap().finish, 12.0);
        assert_eq!(tt.interval(2).unwrap().finish, 20.0);
        assert_eq!(tt.makespan(), Some(20.0));
    }

    #[test]
    fn synchronized_start_waits_for_last_agent() {
        let mut t = task(1, 0.0, 3.0);
        t.requirements = vec![Requirement { count: 2, action: 0 }];
        let tasks = table(&[t]);
        let plan = AssignedPlan::from_sequences(vec![vec![1], vec![1]]);
        let team = [agent(0, 4.0), agent(1, 9.0)];
        let tt = schedule_min_makespan(&plan, &tasks, &[], &team, &EuclideanTravel).unwrap();
        assert_eq!(tt.interval(1).unwrap().start, 9.0);
        assert_eq!(tt.arrivals[0], vec![(1, 4.0)]);
    }

    #[test]
    fn cyclic_precedence_is_infeasible() {
        let tasks = table(&[task(1, 1.0, 1.0), task(2, 2.0, 1.0)]);
        let plan = AssignedPlan::from_sequences(vec![vec![1], vec![2]]);
        let rels = [TemporalRelation::precedence(1, 2), TemporalRelation::precedence(2, 1)];
        let err =
            schedule_min_makespan(&plan, &tasks, &rels, &[agent(0, 0.0), agent(1, 0.0)], &EuclideanTravel).unwrap_err();
        assert_eq!(err, ScheduleError::Cyclic);
        assert!(err.is_infeasible());
    }

    #[test]
    fn capability_violation_is_a_domain_error() {
        let mut t = task(1, 1.0, 1.0);
        t.requirements = vec![Requirement { count: 1, action: 5 }];
        let plan = AssignedPlan::from_sequences(vec![vec![1]]);
        let err = schedule_min_makespan(&plan, &table(&[t]), &[], &[agent(0, 0.0)], &EuclideanTravel).unwrap_err();
        assert_eq!(err, ScheduleError::CapabilityViolation(1));
        assert!(!err.is_infeasible());
    }

    #[test]
    fn mutex_on_one_spot_is_separated() {
        let tasks = table(&[task(1, 0.0, 2.0), task(2, 0.0, 2.0)]);
        let plan = AssignedPlan::from_sequences(vec![vec![1, 2]]);
        let rels = [TemporalRelation::mutex(1, 2)];
        let tt = schedule_min_makespan(&plan, &tasks, &rels, &[agent(0, 0.0)], &EuclideanTravel).unwrap();
        assert!(tt.interval(2).unwrap().start > tt.interval(1).unwrap().finish);
        assert_eq!(tt.gates[&2], vec![(1, MUTEX_SEPARATION)]);
    }

    #[test]
    fn mutex_across_agents_picks_the_cheaper_orientation() {
        // agent 0 reaches task 1 at t=1, agent 1 reaches task 2 at t=6
        let tasks = table(&[task(1, 1.0, 4.0), task(2, 6.0, 1.0)]);
        let plan = AssignedPlan::from_sequences(vec![vec![1], vec![2]]);
        let rels = [TemporalRelation::mutex(2, 1)];
        let tt =
            schedule_min_makespan(&plan, &tasks, &rels, &[agent(0, 0.0), agent(1, 0.0)], &EuclideanTravel).unwrap();
        assert_eq!(tt.interval(1).unwrap().start, 1.0);
        assert_eq!(tt.interval(2).unwrap().start, 6.0);
    }

    #[test]
    fn unmet_concurrency_rejects_the_schedule() {
        let tasks = table(&[task(1, 1.0, 1.0), task(2, 3.0, 1.0)]);
        let plan = AssignedPlan::from_sequences(vec![vec![1, 2]]);
        let rels = [TemporalRelation::concurrency(1, 2)];
        assert!(matches!(
            schedule_min_makespan(&plan, &tasks, &rels, &[agent(0, 0.0)], &EuclideanTravel),
            Err(ScheduleError::Concurrency(_))
        ));
    }
}
