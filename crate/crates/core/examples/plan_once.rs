//! One planning cycle: three robots, five tasks with a precedence and a
//! mutex relation, solved by branch and bound.
//!
//! `cargo run --example plan_once`

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use cocoplan::planner::OptimizedEvent;
use cocoplan::{
    cocoplan, AgentSnapshot, CommParams, GridMap, PlanningProblem, Position, Requirement, SearchConfig, Task,
    TemporalRelation, TravelOracle,
};

const ROOM: &str = "\
24 16 0.5
........................
........................
........................
........................
........................
...........#............
...........#............
...........#............
...........#............
...........#............
...........#............
........................
........................
........................
........................
........................
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let oracle = TravelOracle::new(Arc::new(GridMap::parse(ROOM)?));
    let comm = CommParams::with_range(8.0);

    let agents = vec![
        AgentSnapshot::new(0, Position::new(0.75, 0.75), 1.0, [0]),
        AgentSnapshot::new(1, Position::new(1.25, 7.25), 1.0, [0, 1]),
        AgentSnapshot::new(2, Position::new(11.25, 0.75), 1.5, [1]),
    ];
    let need = |count, action| vec![Requirement { count, action }];
    let tasks: BTreeMap<_, _> = [
        Task::new(0, Position::new(3.25, 3.25), 4.0, need(1, 0)),
        Task::new(1, Position::new(8.25, 6.75), 3.0, need(2, 1)),
        Task::new(2, Position::new(9.75, 1.25), 2.0, need(1, 1)),
        Task::new(3, Position::new(2.25, 6.25), 5.0, need(1, 0)),
        Task::new(4, Position::new(7.75, 3.75), 2.0, need(1, 0)),
    ]
    .into_iter()
    .map(|t| (t.id, t))
    .collect();
    let relations = vec![TemporalRelation::precedence(0, 4), TemporalRelation::mutex(1, 2)];

    let completed = BTreeSet::new();
    let events = OptimizedEvent::default();
    let problem = PlanningProblem::new(&agents, &tasks, &relations, &completed, 0.0, &oracle, &comm, &events)?;
    let out = cocoplan(&problem, &SearchConfig::unlimited())?;

    let plan = &out.plan;
    println!("objective: {:.4} tasks/s", plan.objective);
    for (agent, seq) in plan.assignment.sequences().iter().enumerate() {
        println!("agent {agent}: {seq:?}");
    }
    for iv in plan.timetable.intervals.values() {
        println!("  task {} runs [{:.2}, {:.2}]", iv.task, iv.start, iv.finish);
    }
    println!("meeting at t = {:.2}:", plan.event.time);
    for (agent, p) in plan.event.positions.iter().enumerate() {
        println!("  agent {agent} at {p}");
    }
    let s = &out.stats;
    println!(
        "search: {} generated, {} expanded, {} pruned in {:?}",
        s.generated, s.expanded, s.pruned, s.elapsed
    );
    Ok(())
}
