//! Greedy baseline: no planned meetings. Agents patrol, swap knowledge
//! whenever a link comes up, and grab the first task they can do.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::engine::{Engine, Signal, Step};
use super::knowledge::Knowledge;
use super::{finish_outcome, EventKind, MetricsRecord, SimError, SimOutcome, SimSetup};
use crate::comm::linked;
use crate::map::Position;
use crate::task::{AgentId, TaskId};
use crate::team::{cover_roles, AgentSnapshot};

struct GreedyController<'s> {
    setup: &'s SimSetup,
    rng: ChaCha8Rng,
    free_cells: Vec<Position>,
    knowledge: Vec<Knowledge>,
    claim: Vec<Option<TaskId>>,
    links: Vec<Vec<bool>>,
    metrics: MetricsRecord,
}

pub(super) fn run(setup: &SimSetup) -> Result<SimOutcome, SimError> {
    let n = setup.agents.len();
    let map = setup.oracle.map();
    let mut ctl = GreedyController {
        setup,
        rng: ChaCha8Rng::seed_from_u64(setup.seed),
        free_cells: map.free_cells().map(|c| map.center(c)).collect(),
        knowledge: vec![Knowledge::default(); n],
        claim: vec![None; n],
        links: vec![vec![false; n]; n],
        metrics: MetricsRecord::default(),
    };
    let mut eng = Engine::new(setup);
    let first = eng.next_signal();
    debug_assert!(matches!(first, Signal::Tick { .. }));
    ctl.on_tick(&mut eng)?;
    for a in 0..n {
        if ctl.claim[a].is_none() {
            ctl.patrol(&mut eng, a);
        }
    }
    loop {
        match eng.next_signal() {
            Signal::Horizon => break,
            Signal::Tick { .. } => ctl.on_tick(&mut eng)?,
            Signal::TaskDone { task, .. } => {
                for &a in &eng.finished_by[&task] {
                    ctl.knowledge[a].completed.insert(task);
                    ctl.claim[a] = None;
                }
            }
            Signal::Idle { agent, .. } => {
                if ctl.claim[agent].is_none() && !ctl.claim_alone(&mut eng, agent) {
                    ctl.patrol(&mut eng, agent);
                }
            }
            Signal::Timer { .. } => {}
        }
    }
    Ok(finish_outcome(
        setup.strategy.kind,
        eng.log,
        &eng.finished,
        ctl.metrics,
        Vec::new(),
        Vec::new(),
    ))
}

impl GreedyController<'_> {
    fn patrol(&mut self, eng: &mut Engine<'_>, agent: AgentId) {
        let goal = self.free_cells[self.rng.random_range(0..self.free_cells.len())];
        eng.assign(agent, [Step::Goto { to: goal, task: None }]);
    }

    fn snapshot(&self, agent: AgentId) -> AgentSnapshot {
        let spec = &self.setup.agents[agent];
        AgentSnapshot::new(agent, spec.start, spec.v_max, spec.capabilities.iter().copied())
    }

    /// Commits `group` to `task`; everyone in `informed` learns of the claim.
    fn take(&mut self, eng: &mut Engine<'_>, task: TaskId, group: &[AgentId], informed: &[AgentId]) {
        for &a in informed.iter().chain(group) {
            self.knowledge[a].claimed.insert(task);
        }
        for &a in group {
            self.claim[a] = Some(task);
        }
        eng.register_task(task, group.to_vec(), Vec::new());
        let center = eng.tasks[&task].region_center;
        for &a in group {
            eng.assign(
                a,
                [
                    Step::Goto {
                        to: center,
                        task: Some(task),
                    },
                    Step::Work(task),
                ],
            );
        }
    }

    /// The first task `agent` can do on its own; returns whether it took one.
    fn claim_alone(&mut self, eng: &mut Engine<'_>, agent: AgentId) -> bool {
        let me = self.snapshot(agent);
        let k = &self.knowledge[agent];
        let pick = k
            .open_tasks(&[agent])
            .filter(|t| k.claimable_alone(*t, &self.setup.relations))
            .find(|t| cover_roles(&eng.tasks[t], &[&me]).is_some());
        match pick {
            Some(t) => {
                self.take(eng, t, &[agent], &[]);
                true
            }
            None => false,
        }
    }

    /// First-fit claims for two agents that just linked up.
    fn claim_pair(&mut self, eng: &mut Engine<'_>, a: AgentId, b: AgentId) {
        let pair = [a, b];
        let open: Vec<TaskId> = {
            let k = &self.knowledge[a];
            k.open_tasks(&pair)
                .filter(|t| k.claimable_alone(*t, &self.setup.relations))
                .collect()
        };
        for t in open {
            let free: Vec<AgentId> = pair.into_iter().filter(|x| self.claim[*x].is_none()).collect();
            if free.is_empty() {
                break;
            }
            let snaps: Vec<AgentSnapshot> = free.iter().map(|&x| self.snapshot(x)).collect();
            let task = &eng.tasks[&t];
            let group: Option<Vec<AgentId>> = if task.agents_required() == 2 && free.len() == 2 {
                cover_roles(task, &[&snaps[0], &snaps[1]]).map(|_| free.clone())
            } else if task.agents_required() == 1 {
                snaps
                    .iter()
                    .find(|s| cover_roles(task, &[*s]).is_some())
                    .map(|s| vec![s.id])
            } else {
                None
            };
            if let Some(g) = group {
                self.take(eng, t, &g, &pair);
            }
        }
    }

    fn on_tick(&mut self, eng: &mut Engine<'_>) -> Result<(), SimError> {
        let now = eng.now;
        for (agent, task) in eng.fresh.drain(..) {
            self.knowledge[agent].known.insert(task, agent);
        }
        let n = self.setup.agents.len();
        let positions = eng.positions(now);
        let map = self.setup.oracle.map();
        for a in 0..n {
            for b in a + 1..n {
                let up = linked(positions[a], positions[b], map, &self.setup.comm)?;
                let was = self.links[a][b];
                self.links[a][b] = up;
                if up && !was {
                    self.metrics.comm_count += 1;
                    eng.record(now, EventKind::CommEvent, vec![a as u64, b as u64]);
                    Knowledge::exchange(&mut self.knowledge, a, b);
                    self.claim_pair(eng, a, b);
                }
            }
        }
        for a in 0..n {
            if self.claim[a].is_none() {
                self.claim_alone(eng, a);
            }
        }
        Ok(())
    }
}
