//! Placement of the next communication event.
//!
//! Given when and where each agent finishes its last task, choose one
//! meeting time and a meeting point per agent such that the communication
//! graph at the meeting points is connected and the worst idle delay
//! `max_i (t_c - t_f_i)` is small.
//!
//! The procedure starts from an all-gather at the position of the latest
//! finisher. Agents are then visited in order of their arrival at that
//! anchor; each one is moved to the first point along its path toward the
//! nearest already-placed agent that still links to it. A candidate is kept
//! only when it strictly lowers the meeting time. Every accepted move attaches
//! a node to an already connected set, so connectivity holds throughout. A
//! final refinement pulls the bottleneck agent back along its path and lets
//! one partner move toward it, again accepting only connected, strictly
//! better placements.

use std::time::{Duration, Instant};

use thiserror::Error;

use crate::comm::{linked, positions_connected, CommParams};
use crate::map::{MapError, Position, TravelOracle};
use crate::task::AgentId;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ComOptError {
    #[error("agent {0} cannot reach the meeting area")]
    Unreachable(AgentId),
    #[error("no agents")]
    Empty,
    #[error(transparent)]
    Map(#[from] MapError),
}

/// Where and when each agent becomes free after its last task.
#[derive(Debug, Clone, PartialEq)]
pub struct LastTaskState {
    pub finish_times: Vec<f64>,
    pub positions: Vec<Position>,
}

impl LastTaskState {
    pub fn len(&self) -> usize {
        self.finish_times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.finish_times.is_empty()
    }

    pub fn latest(&self) -> f64 {
        self.finish_times.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// A synchronized meeting: one time, one position per agent.
#[derive(Debug, Clone, PartialEq)]
pub struct CommEvent {
    pub time: f64,
    pub positions: Vec<Position>,
}

impl CommEvent {
    /// Worst idle delay `max_i (t_c - t_f_i)`.
    pub fn max_delay(&self, last: &LastTaskState) -> f64 {
        last.finish_times
            .iter()
            .map(|t| self.time - t)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComOptConfig {
    /// Wall-clock budget; `None` runs to completion.
    pub budget: Option<Duration>,
    /// Convergence gap on the meeting time, in seconds.
    pub gap: f64,
    /// Upper bound on refinement moves.
    pub max_refine_steps: usize,
}

impl Default for ComOptConfig {
    fn default() -> Self {
        Self {
            budget: None,
            gap: 0.5,
            max_refine_steps: 400,
        }
    }
}

/// Shared inputs of the event optimizers.
#[derive(Clone, Copy)]
pub struct CommContext<'a> {
    pub oracle: &'a TravelOracle,
    pub params: &'a CommParams,
    /// Per-agent maximum speed.
    pub speeds: &'a [f64],
}

impl CommContext<'_> {
    pub fn travel(&self, agent: AgentId, a: Position, b: Position) -> Result<f64, ComOptError> {
        self.oracle
            .distance(a, b)
            .map(|d| d / self.speeds[agent])
            .ok_or(ComOptError::Unreachable(agent))
    }

    pub fn linked(&self, a: Position, b: Position) -> Result<bool, ComOptError> {
        if a == b {
            return Ok(true);
        }
        Ok(linked(a, b, self.oracle.map(), self.params)?)
    }

    pub fn connected(&self, positions: &[Position]) -> Result<bool, ComOptError> {
        Ok(positions_connected(positions, self.oracle.map(), self.params)?)
    }

    /// Meeting time when every agent goes straight to its position.
    pub fn arrival_time(&self, last: &LastTaskState, positions: &[Position]) -> Result<f64, ComOptError> {
        let mut t = f64::NEG_INFINITY;
        for (i, p) in positions.iter().enumerate() {
            t = t.max(last.finish_times[i] + self.travel(i, last.positions[i], *p)?);
        }
        Ok(t)
    }
}

/// Outcome of [`com_opt_traced`]: the event plus the accepted meeting times.
#[derive(Debug, Clone, PartialEq)]
pub struct ComOptTrace {
    pub event: CommEvent,
    /// Meeting time of the initial all-gather.
    pub gather_time: f64,
    /// Meeting time after each accepted move, starting with `gather_time`.
    pub accepted: Vec<f64>,
}

/// The first point on the path from `from` toward `to` that links to `to`.
pub fn sel_com(from: Position, to: Position, ctx: &CommContext<'_>) -> Result<Position, ComOptError> {
    let path = ctx
        .oracle
        .path(from, to)
        .ok_or(MapError::Unreachable(from.x, from.y, to.x, to.y))?;
    for p in path {
        if ctx.linked(p, to)? {
            return Ok(p);
        }
    }
    Ok(to)
}

/// Latest finisher, lowest id on ties.
fn latest_agent(last: &LastTaskState) -> AgentId {
    let mut best = 0;
    for i in 1..last.len() {
        if last.finish_times[i] > last.finish_times[best] {
            best = i;
        }
    }
    best
}

/// Everyone meets at the latest finisher's position.
pub fn all_gather(last: &LastTaskState, ctx: &CommContext<'_>) -> Result<CommEvent, ComOptError> {
    if last.is_empty() {
        return Err(ComOptError::Empty);
    }
    let anchor = last.positions[latest_agent(last)];
    let positions = vec![anchor; last.len()];
    let time = ctx.arrival_time(last, &positions)?;
    Ok(CommEvent { time, positions })
}

pub fn com_opt(last: &LastTaskState, ctx: &CommContext<'_>, config: &ComOptConfig) -> Result<CommEvent, ComOptError> {
    com_opt_traced(last, ctx, config).map(|t| t.event)
}

fn score(last: &LastTaskState, ctx: &CommContext<'_>, positions: &[Position]) -> Result<(f64, f64), ComOptError> {
    let mut worst = f64::NEG_INFINITY;
    let mut total = 0.0;
    for (i, p) in positions.iter().enumerate() {
        let a = last.finish_times[i] + ctx.travel(i, last.positions[i], *p)?;
        worst = worst.max(a);
        total += a;
    }
    Ok((worst, total))
}

fn better(a: (f64, f64), b: (f64, f64)) -> bool {
    const EPS: f64 = 1e-9;
    a.0 < b.0 - EPS || (a.0 <= b.0 + EPS && a.1 < b.1 - EPS)
}

pub fn com_opt_traced(
    last: &LastTaskState,
    ctx: &CommContext<'_>,
    config: &ComOptConfig,
) -> Result<ComOptTrace, ComOptError> {
    let n = last.len();
    if n == 0 {
        return Err(ComOptError::Empty);
    }
    let started = Instant::now();
    let out_of_time = || config.budget.is_some_and(|b| started.elapsed() >= b);

    let gather = all_gather(last, ctx)?;
    let gather_time = gather.time;
    // Already connected where they stand: nobody needs to move, and no
    // event can happen before the latest finisher is done.
    if ctx.connected(&last.positions)? {
        let event = CommEvent {
            time: last.latest(),
            positions: last.positions.clone(),
        };
        return Ok(ComOptTrace {
            accepted: vec![gather_time, event.time],
            event,
            gather_time,
        });
    }

    let latest = latest_agent(last);
    let anchor = last.positions[latest];
    let mut positions = gather.positions.clone();
    let mut arrivals = Vec::with_capacity(n);
    for i in 0..n {
        arrivals.push(last.finish_times[i] + ctx.travel(i, last.positions[i], anchor)?);
    }
    let mut best = gather_time;
    let mut accepted = vec![best];

    let mut order: Vec<AgentId> = (0..n).filter(|&i| i != latest).collect();
    order.sort_by(|&a, &b| arrivals[a].total_cmp(&arrivals[b]).then(a.cmp(&b)));
    let mut placed = vec![latest];
    for agent in order {
        if out_of_time() {
            break;
        }
        let from = last.positions[agent];
        let mut neighbor = placed[0];
        let mut neighbor_dist = f64::INFINITY;
        for &j in &placed {
            let d = ctx
                .oracle
                .distance(from, positions[j])
                .ok_or(ComOptError::Unreachable(agent))?;
            if d < neighbor_dist {
                neighbor_dist = d;
                neighbor = j;
            }
        }
        let target = positions[neighbor];
        let candidate = sel_com(from, target, ctx)?;
        let arrive = last.finish_times[agent] + ctx.travel(agent, from, candidate)?;
        let others = (0..n)
            .filter(|&k| k != agent)
            .map(|k| arrivals[k])
            .fold(f64::NEG_INFINITY, f64::max);
        let meet = arrive.max(others);
        placed.push(agent);
        if ctx.linked(candidate, target)? && meet < best {
            positions[agent] = candidate;
            arrivals[agent] = arrive;
            let converged = best - meet < config.gap;
            best = meet;
            accepted.push(best);
            if converged {
                break;
            }
        }
    }

    let mut current = score(last, ctx, &positions)?;
    for _ in 0..config.max_refine_steps {
        if out_of_time() {
            break;
        }
        match refine_step(last, ctx, &positions, current)? {
            Some((next, s)) => {
                positions = next;
                current = s;
                accepted.push(current.0);
            }
            None => break,
        }
    }

    let time = ctx.arrival_time(last, &positions)?;
    debug_assert!(ctx.connected(&positions)?);
    Ok(ComOptTrace {
        event: CommEvent { time, positions },
        gather_time,
        accepted,
    })
}

/// New positions with their `(arrival, connected)` score.
type Refined = (Vec<Position>, (f64, f64));

/// Pulls the bottleneck agent one waypoint back toward where it finished,
/// optionally moving one partner toward it to keep the graph connected.
fn refine_step(
    last: &LastTaskState,
    ctx: &CommContext<'_>,
    positions: &[Position],
    current: (f64, f64),
) -> Result<Option<Refined>, ComOptError> {
    let mut bottleneck = 0;
    let mut worst = f64::NEG_INFINITY;
    for (i, &p) in positions.iter().enumerate() {
        let a = last.finish_times[i] + ctx.travel(i, last.positions[i], p)?;
        if a > worst {
            worst = a;
            bottleneck = i;
        }
    }
    let from = last.positions[bottleneck];
    if positions[bottleneck] == from {
        return Ok(None);
    }
    let path = ctx
        .oracle
        .path(from, positions[bottleneck])
        .ok_or(ComOptError::Unreachable(bottleneck))?;
    let back = path[path.len() - 2];
    let mut trial = positions.to_vec();
    trial[bottleneck] = back;

    let mut best: Option<(Vec<Position>, (f64, f64))> = None;
    if ctx.connected(&trial)? {
        let s = score(last, ctx, &trial)?;
        if better(s, current) {
            best = Some((trial.clone(), s));
        }
    }
    for partner in (0..positions.len()).filter(|&j| j != bottleneck) {
        let moved = sel_com(last.positions[partner], back, ctx)?;
        if moved == trial[partner] {
            continue;
        }
        let mut cand = trial.clone();
        cand[partner] = moved;
        let s = score(last, ctx, &cand)?;
        let improves = better(s, current) && best.as_ref().is_none_or(|(_, b)| better(s, *b));
        if improves && ctx.connected(&cand)? {
            best = Some((cand, s));
        }
    }
    Ok(best)
}
