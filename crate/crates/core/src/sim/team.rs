//! Controller for strategies that meet as a whole team: the proposed
//! planner and the FIX, FPMR, FRDT and FIMR baselines.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::engine::{Engine, Signal, Step};
use super::{
    excursion, finish_outcome, CycleRecord, EventKind, MetricsRecord, SimError, SimOutcome, SimSetup, Violation,
};
use crate::comm::positions_connected;
use crate::comopt::{ComOptConfig, CommContext, CommEvent, LastTaskState};
use crate::map::{polyline_length, Position};
use crate::planner::{
    cocoplan, CollectivePlan, EventPlanner, FixedPointEvent, FixedTimeEvent, LeaderEvent, OptimizedEvent,
    PlanningProblem, SearchConfig,
};
use crate::strategy::StrategyKind;
use crate::task::{RelationKind, Task, TaskId, TemporalRelation};
use crate::team::AgentSnapshot;

const TIME_EPS: f64 = 1e-6;

struct ActiveCycle {
    start: f64,
    event: CommEvent,
    tasks: Vec<TaskId>,
    timer_fired: bool,
}

struct TeamController<'s> {
    setup: &'s SimSetup,
    rng: ChaCha8Rng,
    free_cells: Vec<Position>,
    /// Tasks shared at a meeting so far.
    merged: BTreeSet<TaskId>,
    cycle: Option<ActiveCycle>,
    event_times: Vec<f64>,
    metrics: MetricsRecord,
    cycles: Vec<CycleRecord>,
    violations: Vec<Violation>,
}

pub(super) fn run(setup: &SimSetup) -> Result<SimOutcome, SimError> {
    let mut eng = Engine::new(setup);
    let map = setup.oracle.map();
    let mut ctl = TeamController {
        setup,
        rng: ChaCha8Rng::seed_from_u64(setup.seed),
        free_cells: map.free_cells().map(|c| map.center(c)).collect(),
        merged: BTreeSet::new(),
        cycle: None,
        event_times: Vec::new(),
        metrics: MetricsRecord::default(),
        cycles: Vec::new(),
        violations: Vec::new(),
    };
    // the first tick detects from the start positions
    let first = eng.next_signal();
    debug_assert!(matches!(first, Signal::Tick { .. }));
    let starts: Vec<Position> = setup.agents.iter().map(|a| a.start).collect();
    ctl.plan(&mut eng, &starts)?;
    loop {
        match eng.next_signal() {
            Signal::Horizon => break,
            Signal::Timer { .. } => {
                if let Some(c) = ctl.cycle.as_mut() {
                    c.timer_fired = true;
                }
                ctl.maybe_close(&mut eng)?;
            }
            Signal::Idle { .. } => ctl.maybe_close(&mut eng)?,
            Signal::Tick { .. } | Signal::TaskDone { .. } => {}
        }
    }
    ctl.metrics.comm_count = ctl.event_times.len();
    ctl.metrics.comm_intervals = ctl.event_times.windows(2).map(|w| w[1] - w[0]).collect();
    Ok(finish_outcome(
        setup.strategy.kind,
        eng.log,
        &eng.finished,
        ctl.metrics,
        ctl.cycles,
        ctl.violations,
    ))
}

impl TeamController<'_> {
    fn event_planner(&self) -> Box<dyn EventPlanner> {
        let s = &self.setup.strategy;
        let config = ComOptConfig {
            gap: self.setup.planner.gap,
            ..ComOptConfig::default()
        };
        match s.kind {
            StrategyKind::Fpmr => Box::new(FixedPointEvent {
                point: s.fixed_point.expect("validated"),
            }),
            StrategyKind::Frdt => Box::new(LeaderEvent {
                leader: s.leader.expect("validated"),
            }),
            StrategyKind::Fimr => {
                let interval = s.interval.expect("validated");
                Box::new(FixedTimeEvent {
                    time: (self.event_times.len() + 1) as f64 * interval,
                    config,
                })
            }
            _ => Box::new(OptimizedEvent { config }),
        }
    }

    /// Tasks the team may plan now: shared, unfinished, and not waiting on
    /// an unseen predecessor or concurrency partner.
    fn plannable(&self, eng: &Engine<'_>) -> BTreeMap<TaskId, Task> {
        let done = &eng.finished;
        self.merged
            .iter()
            .filter(|t| !done.contains_key(t))
            .filter(|t| {
                self.setup.relations.iter().filter(|r| r.involves(**t)).all(|r| {
                    let other = r.other(**t).expect("relation involves task");
                    match r.kind {
                        RelationKind::Precedence if r.second == **t => self.merged.contains(&other),
                        RelationKind::Concurrency => self.merged.contains(&other),
                        _ => true,
                    }
                })
            })
            .map(|t| (*t, eng.tasks[t].clone()))
            .collect()
    }

    fn plan(&mut self, eng: &mut Engine<'_>, positions: &[Position]) -> Result<(), SimError> {
        let now = eng.now;
        for (_, t) in eng.fresh.drain(..) {
            self.merged.insert(t);
        }
        let tasks = self.plannable(eng);
        let completed: BTreeSet<TaskId> = eng.finished.keys().copied().collect();
        let relations: Vec<TemporalRelation> = self
            .setup
            .relations
            .iter()
            .filter(|r| self.merged.contains(&r.first) && self.merged.contains(&r.second))
            .copied()
            .collect();
        let agents: Vec<AgentSnapshot> = self
            .setup
            .agents
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let mut s = AgentSnapshot::new(i, positions[i], a.v_max, a.capabilities.iter().copied());
                s.available_at = now;
                s
            })
            .collect();
        let events = self.event_planner();
        let wants_plan = match self.setup.strategy.kind {
            StrategyKind::Fix => tasks.len() >= self.setup.strategy.threshold_n.unwrap_or(1),
            _ => !tasks.is_empty(),
        };
        let mut chosen: Option<CollectivePlan> = None;
        let mut empty_plan: Option<CollectivePlan> = None;
        {
            let problem = PlanningProblem::new(
                &agents,
                &tasks,
                &relations,
                &completed,
                now,
                &self.setup.oracle,
                &self.setup.comm,
                events.as_ref(),
            )?;
            let config = SearchConfig {
                time_budget: self.setup.planner.time_budget,
                max_expansions: self.setup.planner.max_expansions,
                record_nodes: false,
            };
            if wants_plan {
                let out = cocoplan(&problem, &config)?;
                if out.plan.task_count() > 0 {
                    chosen = Some(out.plan);
                }
            }
            if chosen.is_none() {
                let empty = crate::scheduler::AssignedPlan::empty(agents.len());
                empty_plan = crate::planner::evaluate(&problem, &empty);
            }
        }
        if let Some(plan) = chosen {
            self.adopt(eng, positions, &plan.assignment, &plan.timetable, plan.event);
            return Ok(());
        }
        let nothing_left = eng.tasks.values().all(|t| t.detected_at.is_some());
        if !nothing_left && self.explore(eng, positions, events.as_ref()) {
            return Ok(());
        }
        if self.cycles.is_empty() {
            // a single rendezvous even when there is nothing to do
            let plan = empty_plan.ok_or(crate::planner::PlanError::NoEvent)?;
            self.adopt(eng, positions, &plan.assignment, &plan.timetable, plan.event);
        }
        Ok(())
    }

    fn travel(&self, agent: usize, from: Position, to: Position) -> f64 {
        let path = self.setup.oracle.path(from, to).unwrap_or_else(|| vec![from, to]);
        polyline_length(&path) / self.setup.agents[agent].v_max
    }

    fn adopt(
        &mut self,
        eng: &mut Engine<'_>,
        positions: &[Position],
        assignment: &crate::scheduler::AssignedPlan,
        timetable: &crate::scheduler::Timetable,
        event: CommEvent,
    ) {
        let now = eng.now;
        let tasks: Vec<TaskId> = assignment.groups().keys().copied().collect();
        eng.record(now, EventKind::Replanned, tasks.iter().map(|&t| t as u64).collect());
        for (t, group) in assignment.groups() {
            let gates = timetable.gates.get(t).cloned().unwrap_or_default();
            eng.register_task(*t, group.clone(), gates);
        }
        for (i, here) in positions.iter().enumerate() {
            let mut steps = Vec::new();
            let mut last = *here;
            for &t in assignment.sequence(i) {
                let center = eng.tasks[&t].region_center;
                steps.push(Step::Goto {
                    to: center,
                    task: Some(t),
                });
                steps.push(Step::Work(t));
                last = center;
            }
            let meet = event.positions[i];
            steps.push(Step::HoldUntil(event.time - self.travel(i, last, meet)));
            steps.push(Step::Goto { to: meet, task: None });
            eng.assign(i, steps);
        }
        eng.set_timer(event.time, self.cycles.len() as u64);
        self.cycle = Some(ActiveCycle {
            start: now,
            event,
            tasks,
            timer_fired: false,
        });
    }

    /// Sends everyone toward random cells, then meets. Shorter excursions
    /// are tried when the meeting cannot be placed.
    fn explore(&mut self, eng: &mut Engine<'_>, positions: &[Position], events: &dyn EventPlanner) -> bool {
        let now = eng.now;
        let n = positions.len();
        let mut paths = Vec::with_capacity(n);
        for here in positions {
            let target = self.free_cells[self.rng.random_range(0..self.free_cells.len())];
            paths.push(self.setup.oracle.path(*here, target).unwrap_or_else(|| vec![*here]));
        }
        let speeds: Vec<f64> = self.setup.agents.iter().map(|a| a.v_max).collect();
        let ctx = CommContext {
            oracle: &self.setup.oracle,
            params: &self.setup.comm,
            speeds: &speeds,
        };
        for fraction in [1.0, 0.5, 0.25, 0.125, 0.0] {
            let budget = self.setup.planner.explore_time * fraction;
            let mut last = LastTaskState {
                finish_times: Vec::with_capacity(n),
                positions: Vec::with_capacity(n),
            };
            for (i, path) in paths.iter().enumerate() {
                let (end, walked) = excursion(path, budget * speeds[i]);
                last.positions.push(end);
                last.finish_times.push(now + walked / speeds[i]);
            }
            let Some(event) = events.plan_event(&last, now, &ctx) else {
                continue;
            };
            if event.time <= now + TIME_EPS {
                continue;
            }
            eng.record(now, EventKind::Replanned, Vec::new());
            for i in 0..n {
                let dep = event.time - self.travel(i, last.positions[i], event.positions[i]);
                eng.assign(
                    i,
                    [
                        Step::Goto {
                            to: last.positions[i],
                            task: None,
                        },
                        Step::HoldUntil(dep),
                        Step::Goto {
                            to: event.positions[i],
                            task: None,
                        },
                    ],
                );
            }
            eng.set_timer(event.time, self.cycles.len() as u64);
            self.cycle = Some(ActiveCycle {
                start: now,
                event,
                tasks: Vec::new(),
                timer_fired: false,
            });
            return true;
        }
        false
    }

    fn maybe_close(&mut self, eng: &mut Engine<'_>) -> Result<(), SimError> {
        let ready = self
            .cycle
            .as_ref()
            .is_some_and(|c| c.timer_fired && eng.agents.iter().all(|a| a.idle));
        if !ready {
            return Ok(());
        }
        let cycle = self.cycle.take().expect("checked");
        let now = eng.now;
        let planned = cycle.event.time;
        if now > planned + TIME_EPS {
            self.violations.push(Violation::LateArrival { time: now, planned });
        }
        let positions = cycle.event.positions.clone();
        if !positions_connected(&eng.positions(now), self.setup.oracle.map(), &self.setup.comm)? {
            self.violations.push(Violation::Disconnected { time: now });
        }
        let mut last_finish = f64::NEG_INFINITY;
        for &t in &cycle.tasks {
            let finish = eng.finished.get(&t).map_or(f64::INFINITY, |iv| iv.finish);
            if finish > planned + TIME_EPS {
                self.violations.push(Violation::LateTask {
                    task: t,
                    finish,
                    event: planned,
                });
            }
            last_finish = last_finish.max(finish);
        }
        eng.record(now, EventKind::CommEvent, (0..positions.len() as u64).collect());
        self.event_times.push(planned);
        if !cycle.tasks.is_empty() {
            self.metrics.idle_gaps.push(planned - last_finish);
        }
        self.cycles.push(CycleRecord {
            start: cycle.start,
            event_time: planned,
            tasks: cycle.tasks,
        });
        self.plan(eng, &positions)
    }
}
