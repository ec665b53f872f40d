//! Event queue, agent motion and synchronized task execution shared by all
//! strategy controllers.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, VecDeque};

use super::{AgentSpec, EventKind, SimEvent, SimSetup};
use crate::map::Position;
use crate::task::{detect_tasks, AgentId, ExecutionInterval, Task, TaskId};

/// A piecewise-linear trajectory starting at `depart`.
#[derive(Debug, Clone)]
pub(crate) struct Leg {
    depart: f64,
    speed: f64,
    points: Vec<Position>,
    cumulative: Vec<f64>,
}

impl Leg {
    pub fn stay(at: Position, now: f64) -> Self {
        Self {
            depart: now,
            speed: 1.0,
            points: vec![at],
            cumulative: vec![0.0],
        }
    }

    pub fn along(points: Vec<Position>, now: f64, speed: f64) -> Self {
        let mut cumulative = Vec::with_capacity(points.len());
        let mut acc = 0.0;
        cumulative.push(0.0);
        for w in points.windows(2) {
            acc += w[0].distance(&w[1]);
            cumulative.push(acc);
        }
        Self {
            depart: now,
            speed,
            points,
            cumulative,
        }
    }

    pub fn duration(&self) -> f64 {
        self.length() / self.speed
    }

    pub fn length(&self) -> f64 {
        *self.cumulative.last().unwrap_or(&0.0)
    }

    pub fn end(&self) -> Position {
        *self.points.last().expect("leg has at least one point")
    }

    pub fn position_at(&self, t: f64) -> Position {
        let s = ((t - self.depart) * self.speed).clamp(0.0, self.length());
        let i = self.cumulative.partition_point(|&c| c <= s);
        if i >= self.points.len() {
            return self.end();
        }
        let (a, b) = (self.points[i - 1], self.points[i]);
        let seg = self.cumulative[i] - self.cumulative[i - 1];
        if seg <= 0.0 {
            return b;
        }
        a.lerp(&b, (s - self.cumulative[i - 1]) / seg)
    }
}

/// What an agent does next.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Step {
    /// Travel; `task` marks arrival at a task region.
    Goto { to: Position, task: Option<TaskId> },
    /// Join the execution of a registered task.
    Work(TaskId),
    /// Stay put until the given time.
    HoldUntil(f64),
}

pub(crate) struct AgentRt {
    pub spec: AgentSpec,
    pub leg: Leg,
    pub steps: VecDeque<Step>,
    /// Bumped whenever the step queue is replaced; stale queue entries are
    /// ignored.
    epoch: u64,
    pub working: Option<TaskId>,
    pub idle: bool,
    in_transit: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum EntryKind {
    AgentDone {
        epoch: u64,
    },
    TaskEnd,
    /// Re-check a task whose gate opens later.
    Gate,
    Timer(u64),
}

#[derive(Debug, Clone, Copy)]
struct Entry {
    time: f64,
    agent: usize,
    task: TaskId,
    seq: u64,
    kind: EntryKind,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.agent.cmp(&other.agent))
            .then(self.task.cmp(&other.task))
            .then(self.seq.cmp(&other.seq))
    }
}

struct Execution {
    group: Vec<AgentId>,
    arrived: BTreeSet<AgentId>,
    gates: Vec<(TaskId, f64)>,
    started: Option<f64>,
}

/// What the controller has to react to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Signal {
    /// The agent ran out of steps.
    Idle {
        agent: AgentId,
        time: f64,
    },
    /// Detection ran for this tick.
    Tick {
        time: f64,
    },
    Timer {
        token: u64,
        time: f64,
    },
    /// A task finished.
    TaskDone {
        task: TaskId,
        time: f64,
    },
    /// Nothing left before the horizon.
    Horizon,
}

pub(crate) struct Engine<'s> {
    pub setup: &'s SimSetup,
    /// Ground truth, including detection stamps.
    pub tasks: BTreeMap<TaskId, Task>,
    pub agents: Vec<AgentRt>,
    queue: BinaryHeap<Reverse<Entry>>,
    seq: u64,
    next_tick: u64,
    pub now: f64,
    pub log: Vec<SimEvent>,
    executions: BTreeMap<TaskId, Execution>,
    pub finished: BTreeMap<TaskId, ExecutionInterval>,
    pub finished_by: BTreeMap<TaskId, Vec<AgentId>>,
    /// First detector of each task.
    pub owner: BTreeMap<TaskId, AgentId>,
    /// Detections since the controller last drained them.
    pub fresh: Vec<(AgentId, TaskId)>,
    pending: VecDeque<Signal>,
}

impl<'s> Engine<'s> {
    pub fn new(setup: &'s SimSetup) -> Self {
        let agents = setup
            .agents
            .iter()
            .map(|spec| AgentRt {
                spec: spec.clone(),
                leg: Leg::stay(spec.start, 0.0),
                steps: VecDeque::new(),
                epoch: 0,
                working: None,
                idle: true,
                in_transit: false,
            })
            .collect();
        Self {
            setup,
            tasks: setup.tasks.iter().map(|t| (t.id, t.clone())).collect(),
            agents,
            queue: BinaryHeap::new(),
            seq: 0,
            next_tick: 0,
            now: 0.0,
            log: Vec::new(),
            executions: BTreeMap::new(),
            finished: BTreeMap::new(),
            finished_by: BTreeMap::new(),
            owner: BTreeMap::new(),
            fresh: Vec::new(),
            pending: VecDeque::new(),
        }
    }

    pub fn record(&mut self, time: f64, kind: EventKind, payload: Vec<u64>) {
        self.log.push(SimEvent { time, kind, payload });
    }

    pub fn position(&self, agent: AgentId, t: f64) -> Position {
        self.agents[agent].leg.position_at(t)
    }

    pub fn positions(&self, t: f64) -> Vec<Position> {
        (0..self.agents.len()).map(|i| self.position(i, t)).collect()
    }

    fn push(&mut self, time: f64, agent: usize, task: TaskId, kind: EntryKind) {
        self.seq += 1;
        self.queue.push(Reverse(Entry {
            time,
            agent,
            task,
            seq: self.seq,
            kind,
        }));
    }

    pub fn set_timer(&mut self, time: f64, token: u64) {
        self.push(time, usize::MAX, TaskId::MAX, EntryKind::Timer(token));
    }

    /// Registers a task so that it starts once the whole group is in place
    /// and every gate `(u, offset)` has passed.
    pub fn register_task(&mut self, task: TaskId, group: Vec<AgentId>, gates: Vec<(TaskId, f64)>) {
        debug_assert!(
            !self.finished.contains_key(&task) && self.executions.get(&task).is_none_or(|e| e.started.is_none()),
            "task {task} registered twice"
        );
        self.executions.insert(
            task,
            Execution {
                group,
                arrived: BTreeSet::new(),
                gates,
                started: None,
            },
        );
    }

    /// Replaces the agent's steps and starts the first one now. Any step in
    /// progress is abandoned where the agent stands.
    pub fn assign(&mut self, agent: AgentId, steps: impl IntoIterator<Item = Step>) {
        let here = self.position(agent, self.now);
        let a = &mut self.agents[agent];
        a.epoch += 1;
        a.steps = steps.into_iter().collect();
        a.leg = Leg::stay(here, self.now);
        a.idle = false;
        a.in_transit = false;
        self.advance(agent);
    }

    fn advance(&mut self, agent: AgentId) {
        let now = self.now;
        let Some(step) = self.agents[agent].steps.pop_front() else {
            let a = &mut self.agents[agent];
            a.idle = true;
            a.leg = Leg::stay(a.leg.end(), now);
            self.pending.push_back(Signal::Idle { agent, time: now });
            return;
        };
        let epoch = self.agents[agent].epoch;
        match step {
            Step::Goto { to, task } => {
                let from = self.agents[agent].leg.end();
                let points = self.setup.oracle.path(from, to).unwrap_or_else(|| vec![from, to]);
                let leg = Leg::along(points, now, self.agents[agent].spec.v_max);
                let arrive = now + leg.duration();
                self.agents[agent].leg = leg;
                self.agents[agent].in_transit = true;
                self.push(
                    arrive,
                    agent,
                    task.unwrap_or(TaskId::MAX),
                    EntryKind::AgentDone { epoch },
                );
            }
            Step::HoldUntil(t) => {
                let here = self.agents[agent].leg.end();
                self.agents[agent].leg = Leg::stay(here, now);
                self.push(t.max(now), agent, TaskId::MAX, EntryKind::AgentDone { epoch });
            }
            Step::Work(task) => {
                let here = self.agents[agent].leg.end();
                self.agents[agent].leg = Leg::stay(here, now);
                self.agents[agent].working = Some(task);
                if let Some(ex) = self.executions.get_mut(&task) {
                    ex.arrived.insert(agent);
                }
                self.try_start(task);
            }
        }
    }

    fn gates_open(&self, task: TaskId) -> Option<f64> {
        let ex = &self.executions[&task];
        let mut t = self.now;
        for (u, offset) in &ex.gates {
            t = t.max(self.finished.get(u)?.finish + offset);
        }
        Some(t)
    }

    fn try_start(&mut self, task: TaskId) {
        let Some(ex) = self.executions.get(&task) else {
            return;
        };
        if ex.started.is_some() || ex.group.iter().any(|a| !ex.arrived.contains(a)) {
            return;
        }
        let Some(ready) = self.gates_open(task) else {
            return;
        };
        if ready > self.now + 1e-12 {
            // a gate with a positive offset; wake up again when it opens
            self.push(ready, usize::MAX, task, EntryKind::Gate);
            return;
        }
        let group = ex.group.clone();
        self.executions.get_mut(&task).expect("registered").started = Some(self.now);
        let mut payload = vec![task as u64];
        payload.extend(group.iter().map(|&a| a as u64));
        self.record(self.now, EventKind::ExecutionStart, payload);
        let duration = self.tasks[&task].duration;
        self.push(self.now + duration, usize::MAX, task, EntryKind::TaskEnd);
    }

    fn finish_task(&mut self, task: TaskId) {
        let ex = self.executions.remove(&task).expect("running task is registered");
        let start = ex.started.expect("finished task was started");
        self.finished.insert(
            task,
            ExecutionInterval {
                task,
                start,
                finish: self.now,
            },
        );
        self.record(self.now, EventKind::ExecutionEnd, vec![task as u64]);
        self.finished_by.insert(task, ex.group.clone());
        self.pending.push_back(Signal::TaskDone { task, time: self.now });
        for a in ex.group {
            self.agents[a].working = None;
            self.advance(a);
        }
        let waiting: Vec<TaskId> = self
            .executions
            .iter()
            .filter(|(_, e)| e.started.is_none() && e.gates.iter().any(|(u, _)| *u == task))
            .map(|(t, _)| *t)
            .collect();
        for t in waiting {
            self.try_start(t);
        }
    }

    fn detect(&mut self, t: f64) {
        for i in 0..self.agents.len() {
            let pos = self.position(i, t);
            let range = self.agents[i].spec.sensor_range;
            let mut candidates: Vec<Task> = self
                .tasks
                .values()
                .filter(|task| task.detected_at.is_none() && task.release_time <= t)
                .filter(|task| task.region_center.distance(&pos) <= range)
                .cloned()
                .collect();
            if candidates.is_empty() {
                continue;
            }
            for id in detect_tasks(pos, range, &mut candidates, t, self.setup.oracle.map()) {
                self.tasks.get_mut(&id).expect("known id").detected_at = Some(t);
                self.owner.insert(id, i);
                self.fresh.push((i, id));
                self.record(t, EventKind::Detection, vec![i as u64, id as u64]);
            }
        }
    }

    fn tick_time(&self) -> f64 {
        self.next_tick as f64 * self.setup.dt
    }

    /// Runs until the controller has something to react to.
    pub fn next_signal(&mut self) -> Signal {
        loop {
            if let Some(s) = self.pending.pop_front() {
                return s;
            }
            let tick = self.tick_time();
            let entry_due = self.queue.peek().map(|Reverse(e)| e.time);
            let take_entry = entry_due.is_some_and(|t| t <= tick);
            let next_time = if take_entry { entry_due.unwrap_or(tick) } else { tick };
            if next_time > self.setup.horizon {
                self.now = self.setup.horizon;
                return Signal::Horizon;
            }
            if !take_entry {
                self.now = tick;
                self.next_tick += 1;
                self.detect(tick);
                return Signal::Tick { time: tick };
            }
            let Reverse(e) = self.queue.pop().expect("peeked");
            self.now = e.time;
            match e.kind {
                EntryKind::AgentDone { epoch } => {
                    if self.agents[e.agent].epoch != epoch {
                        continue;
                    }
                    if std::mem::take(&mut self.agents[e.agent].in_transit) {
                        let mut payload = vec![e.agent as u64];
                        if e.task != TaskId::MAX {
                            payload.push(e.task as u64);
                        }
                        self.record(self.now, EventKind::Arrival, payload);
                    }
                    self.advance(e.agent);
                }
                EntryKind::TaskEnd => self.finish_task(e.task),
                EntryKind::Gate => self.try_start(e.task),
                EntryKind::Timer(token) => return Signal::Timer { token, time: self.now },
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn leg_interpolates_by_arc_length() {
        let leg = Leg::along(
            vec![
                Position::new(0.0, 0.0),
                Position::new(2.0, 0.0),
                Position::new(2.0, 2.0),
            ],
            1.0,
            2.0,
        );
        assert_eq!(leg.duration(), 2.0);
        assert_eq!(leg.position_at(0.0), Position::new(0.0, 0.0));
        assert_eq!(leg.position_at(1.5), Position::new(1.0, 0.0));
        assert_eq!(leg.position_at(2.5), Position::new(2.0, 1.0));
        assert_eq!(leg.position_at(9.0), Position::new(2.0, 2.0));
    }
}
