//! Ring baseline: agents only ever meet their two ring neighbours, each pair
//! at a fixed point, and plan jointly for the tasks they can do together.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::engine::{Engine, Signal, Step};
use super::knowledge::Knowledge;
use super::{excursion, finish_outcome, EventKind, MetricsRecord, SimError, SimOutcome, SimSetup};
use crate::map::Position;
use crate::planner::{cocoplan, PlanningProblem, PresetTargets, SearchConfig};
use crate::task::{AgentId, Task, TaskId, TemporalRelation};
use crate::team::{team_can_cover, AgentSnapshot};

struct Edge {
    members: Vec<AgentId>,
    point: Position,
}

struct RingController<'s> {
    setup: &'s SimSetup,
    rng: ChaCha8Rng,
    free_cells: Vec<Position>,
    edges: Vec<Edge>,
    /// Edge visit order of each agent, cycled forever.
    schedule: Vec<Vec<usize>>,
    visits: Vec<usize>,
    waiting: BTreeMap<usize, BTreeSet<AgentId>>,
    knowledge: Vec<Knowledge>,
    /// Finish time of each agent's latest task since its last meeting.
    last_finish: Vec<Option<f64>>,
    meetings: Vec<Vec<f64>>,
    metrics: MetricsRecord,
}

/// Meeting point of two agents: the middle waypoint of the path between
/// their starts.
fn midpoint(setup: &SimSetup, a: Position, b: Position) -> Position {
    let path = setup.oracle.path(a, b).unwrap_or_else(|| vec![a]);
    let total: f64 = path.windows(2).map(|w| w[0].distance(&w[1])).sum();
    excursion(&path, total / 2.0).0
}

pub(super) fn run(setup: &SimSetup) -> Result<SimOutcome, SimError> {
    let n = setup.agents.len();
    let order = setup.strategy.ring_order_or_default(n);
    let pairs: Vec<(AgentId, AgentId)> = match n {
        1 => vec![(order[0], order[0])],
        2 => vec![(order[0], order[1])],
        _ => (0..n).map(|k| (order[k], order[(k + 1) % n])).collect(),
    };
    let edges: Vec<Edge> = pairs
        .iter()
        .map(|&(a, b)| {
            let mut members = vec![a, b];
            members.sort_unstable();
            members.dedup();
            Edge {
                members,
                point: midpoint(setup, setup.agents[a].start, setup.agents[b].start),
            }
        })
        .collect();
    let mut schedule = vec![Vec::new(); n];
    for (k, &agent) in order.iter().enumerate() {
        let right = if n <= 2 { 0 } else { k };
        let left = if n <= 2 { 0 } else { (k + n - 1) % n };
        // alternate sides, odd ring positions starting left, so that
        // neighbours always head for the same edge
        schedule[agent] = if k % 2 == 0 {
            vec![right, left]
        } else {
            vec![left, right]
        };
    }
    let map = setup.oracle.map();
    let mut ctl = RingController {
        setup,
        rng: ChaCha8Rng::seed_from_u64(setup.seed),
        free_cells: map.free_cells().map(|c| map.center(c)).collect(),
        edges,
        schedule,
        visits: vec![0; n],
        waiting: BTreeMap::new(),
        knowledge: vec![Knowledge::default(); n],
        last_finish: vec![None; n],
        meetings: vec![Vec::new(); n],
        metrics: MetricsRecord::default(),
    };
    let mut eng = Engine::new(setup);
    let first = eng.next_signal();
    debug_assert!(matches!(first, Signal::Tick { .. }));
    ctl.absorb_detections(&mut eng);
    for agent in 0..n {
        let to = ctl.next_point(agent);
        eng.assign(agent, [Step::Goto { to, task: None }]);
    }
    loop {
        match eng.next_signal() {
            Signal::Horizon => break,
            Signal::Tick { .. } => ctl.absorb_detections(&mut eng),
            Signal::TaskDone { task, time } => {
                for &a in &eng.finished_by[&task] {
                    ctl.knowledge[a].completed.insert(task);
                    ctl.last_finish[a] = Some(time);
                }
            }
            Signal::Idle { agent, .. } => ctl.arrived(&mut eng, agent)?,
            Signal::Timer { .. } => {}
        }
    }
    let mut metrics = ctl.metrics;
    metrics.comm_intervals = ctl
        .meetings
        .iter()
        .flat_map(|times| times.windows(2).map(|w| w[1] - w[0]).collect::<Vec<_>>())
        .collect();
    Ok(finish_outcome(
        setup.strategy.kind,
        eng.log,
        &eng.finished,
        metrics,
        Vec::new(),
        Vec::new(),
    ))
}

impl RingController<'_> {
    fn current_edge(&self, agent: AgentId) -> usize {
        let s = &self.schedule[agent];
        s[self.visits[agent] % s.len()]
    }

    fn next_point(&self, agent: AgentId) -> Position {
        self.edges[self.current_edge(agent)].point
    }

    fn absorb_detections(&mut self, eng: &mut Engine<'_>) {
        for (agent, task) in eng.fresh.drain(..) {
            self.knowledge[agent].known.insert(task, agent);
        }
    }

    fn arrived(&mut self, eng: &mut Engine<'_>, agent: AgentId) -> Result<(), SimError> {
        let edge = self.current_edge(agent);
        let here = self.waiting.entry(edge).or_default();
        here.insert(agent);
        if self.edges[edge].members.iter().any(|m| !here.contains(m)) {
            return Ok(());
        }
        self.waiting.remove(&edge);
        self.meet(eng, edge)
    }

    fn meet(&mut self, eng: &mut Engine<'_>, edge: usize) -> Result<(), SimError> {
        let now = eng.now;
        let members = self.edges[edge].members.clone();
        eng.record(now, EventKind::CommEvent, members.iter().map(|&a| a as u64).collect());
        self.metrics.comm_count += 1;
        for &m in &members {
            self.meetings[m].push(now);
            if let Some(f) = self.last_finish[m].take() {
                self.metrics.idle_gaps.push(now - f);
            }
        }
        if let [a, b] = members[..] {
            Knowledge::exchange(&mut self.knowledge, a, b);
        }
        for &m in &members {
            self.visits[m] += 1;
        }
        self.plan_pair(eng, &members)
    }

    /// Tasks the pair may take on: known to them, owned by one of them,
    /// coverable by them, and with every relation satisfiable inside the pair.
    fn candidates(
        &self,
        members: &[AgentId],
        team: &[AgentSnapshot],
        tasks: &BTreeMap<TaskId, Task>,
    ) -> BTreeSet<TaskId> {
        let k = &self.knowledge[members[0]];
        let mut set: BTreeSet<TaskId> = k
            .open_tasks(members)
            .filter(|t| team_can_cover(&tasks[t], team))
            .collect();
        loop {
            let keep: BTreeSet<TaskId> = set
                .iter()
                .copied()
                .filter(|t| k.allowed_with(*t, &self.setup.relations, &set))
                .collect();
            if keep.len() == set.len() {
                return set;
            }
            set = keep;
        }
    }

    fn plan_pair(&mut self, eng: &mut Engine<'_>, members: &[AgentId]) -> Result<(), SimError> {
        let now = eng.now;
        let team: Vec<AgentSnapshot> = members
            .iter()
            .enumerate()
            .map(|(local, &g)| {
                let spec = &self.setup.agents[g];
                let mut s = AgentSnapshot::new(
                    local,
                    eng.position(g, now),
                    spec.v_max,
                    spec.capabilities.iter().copied(),
                );
                s.available_at = now;
                s
            })
            .collect();
        let candidates = self.candidates(members, &team, &eng.tasks);
        let tasks: BTreeMap<TaskId, Task> = candidates.iter().map(|t| (*t, eng.tasks[t].clone())).collect();
        let relations: Vec<TemporalRelation> = self
            .setup
            .relations
            .iter()
            .filter(|r| candidates.contains(&r.first) && candidates.contains(&r.second))
            .copied()
            .collect();
        let completed = self.knowledge[members[0]].completed.clone();
        let targets: Vec<Position> = members.iter().map(|&m| self.next_point(m)).collect();
        let mut plan = None;
        if !tasks.is_empty() {
            let events = PresetTargets {
                targets: targets.clone(),
            };
            let problem = PlanningProblem::new(
                &team,
                &tasks,
                &relations,
                &completed,
                now,
                &self.setup.oracle,
                &self.setup.comm,
                &events,
            )?;
            let config = SearchConfig {
                time_budget: self.setup.planner.time_budget,
                max_expansions: self.setup.planner.max_expansions,
                record_nodes: false,
            };
            let out = cocoplan(&problem, &config)?;
            if out.plan.task_count() > 0 {
                plan = Some(out.plan);
            }
        }
        let Some(plan) = plan else {
            self.roam(eng, members, &targets);
            return Ok(());
        };
        let ids: Vec<TaskId> = plan.assignment.groups().keys().copied().collect();
        eng.record(now, EventKind::Replanned, ids.iter().map(|&t| t as u64).collect());
        for &m in members {
            self.knowledge[m].claimed.extend(ids.iter().copied());
        }
        for (t, group) in plan.assignment.groups() {
            let group: Vec<AgentId> = group.iter().map(|&l| members[l]).collect();
            let gates = plan.timetable.gates.get(t).cloned().unwrap_or_default();
            eng.register_task(*t, group, gates);
        }
        for (local, &m) in members.iter().enumerate() {
            let mut steps = Vec::new();
            for &t in plan.assignment.sequence(local) {
                steps.push(Step::Goto {
                    to: tasks[&t].region_center,
                    task: Some(t),
                });
                steps.push(Step::Work(t));
            }
            steps.push(Step::Goto {
                to: targets[local],
                task: None,
            });
            eng.assign(m, steps);
        }
        Ok(())
    }

    /// Nothing to do together: wander for a while, then head on.
    fn roam(&mut self, eng: &mut Engine<'_>, members: &[AgentId], targets: &[Position]) {
        let now = eng.now;
        for (local, &m) in members.iter().enumerate() {
            let here = eng.position(m, now);
            let goal = self.free_cells[self.rng.random_range(0..self.free_cells.len())];
            let path = self.setup.oracle.path(here, goal).unwrap_or_else(|| vec![here]);
            let v = self.setup.agents[m].v_max;
            let (end, walked) = excursion(&path, self.setup.planner.explore_time * v / 2.0);
            let mut steps = vec![Step::Goto { to: end, task: None }];
            if walked == 0.0 && targets[local] == here {
                steps.push(Step::HoldUntil(now + self.setup.planner.explore_time));
            }
            steps.push(Step::Goto {
                to: targets[local],
                task: None,
            });
            eng.assign(m, steps);
        }
    }
}
