//! Agent snapshots handed to the planners, travel models and capability
//! matching.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::map::{Position, TravelOracle};
use crate::task::{ActionId, AgentId, Task};

/// What a planner needs to know about one agent at the start of a cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSnapshot {
    pub id: AgentId,
    pub position: Position,
    pub v_max: f64,
    pub capabilities: BTreeSet<ActionId>,
    /// Earliest time the agent can leave `position`.
    pub available_at: f64,
}

impl AgentSnapshot {
    pub fn new(id: AgentId, position: Position, v_max: f64, capabilities: impl IntoIterator<Item = ActionId>) -> Self {
        Self {
            id,
            position,
            v_max,
            capabilities: capabilities.into_iter().collect(),
            available_at: 0.0,
        }
    }

    pub fn can(&self, action: ActionId) -> bool {
        self.capabilities.contains(&action)
    }
}

/// Travel-time model used by the scheduler and the bound computations.
pub trait TravelModel: Sync {
    /// Seconds to go from `a` to `b` at `v_max`, or `None` if unreachable.
    fn travel_time(&self, a: Position, b: Position, v_max: f64) -> Option<f64>;
}

impl TravelModel for TravelOracle {
    fn travel_time(&self, a: Position, b: Position, v_max: f64) -> Option<f64> {
        TravelOracle::travel_time(self, a, b, v_max)
    }
}

/// Instantaneous movement.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroTravel;

impl TravelModel for ZeroTravel {
    fn travel_time(&self, _: Position, _: Position, _: f64) -> Option<f64> {
        Some(0.0)
    }
}

/// Straight-line travel, ignoring obstacles.
#[derive(Debug, Clone, Copy, Default)]
pub struct EuclideanTravel;

impl TravelModel for EuclideanTravel {
    fn travel_time(&self, a: Position, b: Position, v_max: f64) -> Option<f64> {
        Some(a.distance(&b) / v_max)
    }
}

/// Assigns one action to each agent of `group` so that every requirement of
/// `task` is met. Returns `(agent, action)` pairs, or `None` if the group
/// cannot cover the task.
pub fn cover_roles(task: &Task, group: &[&AgentSnapshot]) -> Option<Vec<(AgentId, ActionId)>> {
    let mut slots: Vec<ActionId> = Vec::new();
    for r in &task.requirements {
        slots.extend(std::iter::repeat_n(r.action, r.count));
    }
    if slots.len() != group.len() {
        return None;
    }
    let mut used = vec![false; group.len()];
    let mut roles = Vec::with_capacity(slots.len());
    fn assign(
        slot: usize,
        slots: &[ActionId],
        group: &[&AgentSnapshot],
        used: &mut [bool],
        roles: &mut Vec<(AgentId, ActionId)>,
    ) -> bool {
        if slot == slots.len() {
            return true;
        }
        for (k, agent) in group.iter().enumerate() {
            if !used[k] && agent.can(slots[slot]) {
                used[k] = true;
                roles.push((agent.id, slots[slot]));
                if assign(slot + 1, slots, group, used, roles) {
                    return true;
                }
                roles.pop();
                used[k] = false;
            }
        }
        false
    }
    assign(0, &slots, group, &mut used, &mut roles).then(|| {
        roles.sort_unstable();
        roles
    })
}

/// Every agent set (ascending ids, lexicographic order) able to perform `task`.
pub fn eligible_groups(task: &Task, agents: &[AgentSnapshot]) -> Vec<Vec<AgentId>> {
    let k = task.agents_required();
    let candidates: Vec<&AgentSnapshot> = agents
        .iter()
        .filter(|a| task.requirements.iter().any(|r| a.can(r.action)))
        .collect();
    let mut out = Vec::new();
    if k == 0 || k > candidates.len() {
        return out;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        let group: Vec<&AgentSnapshot> = idx.iter().map(|&i| candidates[i]).collect();
        if cover_roles(task, &group).is_some() {
            let mut ids: Vec<AgentId> = group.iter().map(|a| a.id).collect();
            ids.sort_unstable();
            out.push(ids);
        }
        // next combination
        let mut i = k;
        loop {
            if i == 0 {
                out.sort();
                return out;
            }
            i -= 1;
            if idx[i] < candidates.len() - k + i {
                idx[i] += 1;
                for j in i + 1..k {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Whether the whole team could ever cover the task.
pub fn team_can_cover(task: &Task, agents: &[AgentSnapshot]) -> bool {
    !eligible_groups(task, agents).is_empty()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::task::Requirement;

    fn agent(id: AgentId, caps: &[ActionId]) -> AgentSnapshot {
        AgentSnapshot::new(id, Position::new(0.5, 0.5), 1.0, caps.iter().copied())
    }

    fn task(reqs: &[(usize, ActionId)]) -> Task {
        Task::new(
            1,
            Position::new(1.5, 1.5),
            1.0,
            reqs.iter()
                .map(|&(count, action)| Requirement { count, action })
                .collect(),
        )
    }

    #[test]
    fn two_of_three_capable() {
        let team = [agent(0, &[7]), agent(1, &[7]), agent(2, &[7])];
        assert_eq!(
            eligible_groups(&task(&[(2, 7)]), &team),
            vec![vec![0, 1], vec![0, 2], vec![1, 2]]
        );
    }

    #[test]
    fn capability_count_shortfall() {
        let team = [agent(0, &[1]), agent(1, &[1]), agent(2, &[2])];
        assert!(eligible_groups(&task(&[(3, 1)]), &team).is_empty());
        assert!(!team_can_cover(&task(&[(3, 1)]), &team));
    }

    #[test]
    fn mixed_roles_need_matching() {
        // agent 0 can do both, agent 1 only action 1: {0,1} covers (1 of a1, 1 of a2)
        let team = [agent(0, &[1, 2]), agent(1, &[1]), agent(2, &[1])];
        let groups = eligible_groups(&task(&[(1, 1), (1, 2)]), &team);
        assert_eq!(groups, vec![vec![0, 1], vec![0, 2]]);
        let g: Vec<&AgentSnapshot> = vec![&team[1], &team[0]];
        assert_eq!(cover_roles(&task(&[(1, 1), (1, 2)]), &g), Some(vec![(0, 2), (1, 1)]));
    }
}
