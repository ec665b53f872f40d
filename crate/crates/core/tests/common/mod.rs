#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::sync::Arc;

use cocoplan::planner::{evaluate, EventPlanner, OptimizedEvent, PlanningProblem};
use cocoplan::{
    AgentSnapshot, AssignedPlan, CommParams, GridMap, Position, Requirement, Task, TaskId, TemporalRelation,
    TravelOracle,
};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A small self-contained planning instance.
pub struct Instance {
    pub oracle: TravelOracle,
    pub agents: Vec<AgentSnapshot>,
    pub tasks: BTreeMap<TaskId, Task>,
    pub relations: Vec<TemporalRelation>,
    pub completed: BTreeSet<TaskId>,
    pub comm: CommParams,
    pub events: OptimizedEvent,
}

impl Instance {
    pub fn problem(&self) -> PlanningProblem<'_> {
        self.problem_with(&self.events)
    }

    pub fn problem_with<'a>(&'a self, events: &'a dyn EventPlanner) -> PlanningProblem<'a> {
        PlanningProblem::new(
            &self.agents,
            &self.tasks,
            &self.relations,
            &self.completed,
            0.0,
            &self.oracle,
            &self.comm,
            events,
        )
        .unwrap()
    }
}

/// 10 m x 10 m map with a few wall segments; every sampled point is a free
/// cell center in the main connected region.
pub fn random_instance(seed: u64, agents: usize, tasks: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut map = GridMap::new(20, 20, 0.5).unwrap();
    for _ in 0..rng.random_range(0..3) {
        let x = rng.random_range(1.0..9.0);
        let y = rng.random_range(1.0..9.0);
        if rng.random_bool(0.5) {
            map.fill_rect(Position::new(x, y), Position::new((x + 3.0).min(9.9), y + 0.4));
        } else {
            map.fill_rect(Position::new(x, y), Position::new(x + 0.4, (y + 3.0).min(9.9)));
        }
    }
    let oracle = TravelOracle::new(Arc::new(map));
    let free: Vec<Position> = {
        let map = oracle.map();
        let anchor = map.free_cells().next().map(|c| map.center(c)).unwrap();
        map.free_cells()
            .map(|c| map.center(c))
            .filter(|p| oracle.distance(anchor, *p).is_some())
            .collect()
    };
    let mut team = Vec::new();
    for id in 0..agents {
        let mut caps = vec![0];
        if rng.random_bool(0.5) {
            caps.push(1);
        }
        team.push(AgentSnapshot::new(id, *free.choose(&mut rng).unwrap(), 1.0, caps));
    }
    let mut task_map = BTreeMap::new();
    for id in 0..tasks as TaskId {
        let action = if rng.random_bool(0.3) { 1 } else { 0 };
        let count = if agents > 1 && rng.random_bool(0.25) { 2 } else { 1 };
        let duration = rng.random_range(1.0..5.0f64).round();
        task_map.insert(
            id,
            Task::new(
                id,
                *free.choose(&mut rng).unwrap(),
                duration,
                vec![Requirement { count, action }],
            ),
        );
    }
    let mut relations = Vec::new();
    for _ in 0..rng.random_range(0..=2) {
        if tasks < 2 {
            break;
        }
        let a = rng.random_range(0..tasks as TaskId);
        let b = rng.random_range(0..tasks as TaskId);
        if a == b
            || relations
                .iter()
                .any(|r: &TemporalRelation| r.involves(a) && r.involves(b))
        {
            continue;
        }
        let (a, b) = (a.min(b), a.max(b));
        relations.push(match rng.random_range(0..3) {
            0 => TemporalRelation::precedence(a, b),
            1 => TemporalRelation::mutex(a, b),
            _ => TemporalRelation::concurrency(a, b),
        });
    }
    let range = if rng.random_bool(0.5) { 4.0 } else { 10.0 };
    Instance {
        oracle,
        agents: team,
        tasks: task_map,
        relations,
        completed: BTreeSet::new(),
        comm: CommParams::with_range(range),
        events: OptimizedEvent::default(),
    }
}

/// Agent groups able to serve `task`, found by trying every subset.
pub fn brute_groups(task: &Task, agents: &[AgentSnapshot]) -> Vec<Vec<usize>> {
    let need = task.requirements[0];
    let mut out = Vec::new();
    for mask in 1u32..(1 << agents.len()) {
        let members: Vec<usize> = (0..agents.len()).filter(|i| mask & (1 << i) != 0).collect();
        if members.len() == need.count && members.iter().all(|&i| agents[i].capabilities.contains(&need.action)) {
            out.push(members);
        }
    }
    out
}

/// Every assignment reachable by appending tasks to agents' tails, in any
/// order, with every valid group.
pub fn all_plans(instance: &Instance) -> Vec<AssignedPlan> {
    let groups: BTreeMap<TaskId, Vec<Vec<usize>>> = instance
        .tasks
        .values()
        .map(|t| (t.id, brute_groups(t, &instance.agents)))
        .collect();
    let mut seen = HashSet::new();
    let mut stack = vec![AssignedPlan::empty(instance.agents.len())];
    let mut out = Vec::new();
    while let Some(plan) = stack.pop() {
        if !seen.insert(plan.clone()) {
            continue;
        }
        for (task, gs) in &groups {
            if plan.contains(*task) {
                continue;
            }
            for g in gs {
                stack.push(plan.with(*task, g));
            }
        }
        out.push(plan);
    }
    out
}

/// Plans paired with their objective; infeasible plans are dropped.
pub fn scored_plans(instance: &Instance) -> Vec<(AssignedPlan, f64)> {
    let problem = instance.problem();
    all_plans(instance)
        .into_iter()
        .filter_map(|p| evaluate(&problem, &p).map(|c| (p, c.objective)))
        .collect()
}

/// Does `child` extend `prefix` (same groups, each sequence starts with the
/// prefix's)?
pub fn extends(child: &AssignedPlan, prefix: &AssignedPlan) -> bool {
    prefix
        .sequences()
        .iter()
        .zip(child.sequences())
        .all(|(p, c)| c.starts_with(p))
        && prefix
            .groups()
            .iter()
            .all(|(t, g)| child.group(*t) == Some(g.as_slice()))
}
