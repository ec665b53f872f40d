//! Ways of placing the communication event that closes a planning cycle.

use crate::comopt::{com_opt, sel_com, ComOptConfig, CommContext, CommEvent, LastTaskState};
use crate::map::Position;
use crate::task::AgentId;

/// Closes a cycle: given each agent's last task, decide the meeting.
/// `None` means no valid event exists for this plan.
pub trait EventPlanner: Sync {
    fn plan_event(&self, last: &LastTaskState, cycle_start: f64, ctx: &CommContext<'_>) -> Option<CommEvent>;

    fn name(&self) -> &'static str;
}

/// Optimized event placement (the proposed method).
#[derive(Debug, Clone, Default)]
pub struct OptimizedEvent {
    pub config: ComOptConfig,
}

impl EventPlanner for OptimizedEvent {
    fn plan_event(&self, last: &LastTaskState, _: f64, ctx: &CommContext<'_>) -> Option<CommEvent> {
        com_opt(last, ctx, &self.config).ok()
    }

    fn name(&self) -> &'static str {
        "comopt"
    }
}

/// Everyone meets at one configured point.
#[derive(Debug, Clone)]
pub struct FixedPointEvent {
    pub point: Position,
}

impl EventPlanner for FixedPointEvent {
    fn plan_event(&self, last: &LastTaskState, _: f64, ctx: &CommContext<'_>) -> Option<CommEvent> {
        let positions = vec![self.point; last.len()];
        let time = ctx.arrival_time(last, &positions).ok()?;
        Some(CommEvent { time, positions })
    }

    fn name(&self) -> &'static str {
        "fixed-point"
    }
}

/// The leader stays where it finished; the others cluster around it.
#[derive(Debug, Clone)]
pub struct LeaderEvent {
    pub leader: AgentId,
}

impl EventPlanner for LeaderEvent {
    fn plan_event(&self, last: &LastTaskState, _: f64, ctx: &CommContext<'_>) -> Option<CommEvent> {
        leader_cluster(last, self.leader, ctx)
    }

    fn name(&self) -> &'static str {
        "leader"
    }
}

/// Places agents one by one, each at the first point on its path toward the
/// nearest already placed agent that links to it, starting from the leader.
pub fn leader_cluster(last: &LastTaskState, leader: AgentId, ctx: &CommContext<'_>) -> Option<CommEvent> {
    let n = last.len();
    if leader >= n {
        return None;
    }
    let anchor = last.positions[leader];
    let mut positions = last.positions.clone();
    let mut order: Vec<(f64, AgentId)> = Vec::with_capacity(n);
    for i in (0..n).filter(|&i| i != leader) {
        order.push((last.finish_times[i] + ctx.travel(i, last.positions[i], anchor).ok()?, i));
    }
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut placed = vec![leader];
    for (_, agent) in order {
        let from = last.positions[agent];
        let mut nearest = leader;
        let mut nearest_d = f64::INFINITY;
        for &j in &placed {
            let d = ctx.oracle.distance(from, positions[j])?;
            if d < nearest_d {
                nearest_d = d;
                nearest = j;
            }
        }
        positions[agent] = sel_com(from, positions[nearest], ctx).ok()?;
        placed.push(agent);
    }
    let time = ctx.arrival_time(last, &positions).ok()?;
    Some(CommEvent { time, positions })
}

/// Meeting at a fixed clock time; positions come from the optimizer and
/// must be reachable by then.
#[derive(Debug, Clone)]
pub struct FixedTimeEvent {
    pub time: f64,
    pub config: ComOptConfig,
}

impl EventPlanner for FixedTimeEvent {
    fn plan_event(&self, last: &LastTaskState, _: f64, ctx: &CommContext<'_>) -> Option<CommEvent> {
        let ev = com_opt(last, ctx, &self.config).ok()?;
        (ev.time <= self.time + 1e-9).then_some(CommEvent {
            time: self.time,
            positions: ev.positions,
        })
    }

    fn name(&self) -> &'static str {
        "fixed-time"
    }
}

/// Each agent ends at its own preset point; no joint connectivity is implied.
#[derive(Debug, Clone)]
pub struct PresetTargets {
    pub targets: Vec<Position>,
}

impl EventPlanner for PresetTargets {
    fn plan_event(&self, last: &LastTaskState, _: f64, ctx: &CommContext<'_>) -> Option<CommEvent> {
        let time = ctx.arrival_time(last, &self.targets).ok()?;
        Some(CommEvent {
            time,
            positions: self.targets.clone(),
        })
    }

    fn name(&self) -> &'static str {
        "preset"
    }
}
