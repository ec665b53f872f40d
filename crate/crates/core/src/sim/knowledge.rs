//! Per-agent knowledge for strategies without team-wide meetings.

use std::collections::{BTreeMap, BTreeSet};

use crate::task::{AgentId, RelationKind, TaskId, TemporalRelation};

/// What one agent believes about the task set.
#[derive(Debug, Clone, Default, PartialEq)]
pub(crate) struct Knowledge {
    /// Known tasks and the agent that first saw each.
    pub known: BTreeMap<TaskId, AgentId>,
    pub completed: BTreeSet<TaskId>,
    pub claimed: BTreeSet<TaskId>,
}

impl Knowledge {
    pub fn merge(&mut self, other: &Knowledge) {
        for (t, o) in &other.known {
            self.known.entry(*t).or_insert(*o);
        }
        self.completed.extend(other.completed.iter().copied());
        self.claimed.extend(other.claimed.iter().copied());
    }

    /// Exchanges everything between two agents.
    pub fn exchange(all: &mut [Knowledge], a: AgentId, b: AgentId) {
        let snapshot = all[a].clone();
        all[a].merge(&all[b].clone());
        all[b].merge(&snapshot);
    }

    /// Known, unclaimed, unfinished tasks whose owner is among `owners`.
    pub fn open_tasks<'a>(&'a self, owners: &'a [AgentId]) -> impl Iterator<Item = TaskId> + 'a {
        self.known
            .iter()
            .filter(move |(t, o)| owners.contains(o) && !self.completed.contains(t) && !self.claimed.contains(t))
            .map(|(t, _)| *t)
    }

    /// Can `task` be taken on alone, without coordinating with whoever does
    /// related tasks? Predecessors and lower-id mutex partners must be known
    /// done; tasks with a concurrency partner are never taken alone.
    pub fn claimable_alone(&self, task: TaskId, relations: &[TemporalRelation]) -> bool {
        self.allowed_with(task, relations, &BTreeSet::new())
    }

    /// Like [`Knowledge::claimable_alone`], but predecessors and concurrency
    /// partners may also be among `together` (planned jointly).
    pub fn allowed_with(&self, task: TaskId, relations: &[TemporalRelation], together: &BTreeSet<TaskId>) -> bool {
        relations.iter().filter(|r| r.involves(task)).all(|r| {
            let other = r.other(task).expect("relation involves task");
            let done = self.completed.contains(&other);
            match r.kind {
                RelationKind::Precedence if r.second == task => done || together.contains(&other),
                RelationKind::Precedence => true,
                RelationKind::Mutex => other > task || done,
                RelationKind::Concurrency => together.contains(&other),
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mutex_lets_the_lower_id_go_first() {
        let rels = [TemporalRelation::mutex(1, 2)];
        let mut k = Knowledge::default();
        assert!(k.claimable_alone(1, &rels));
        assert!(!k.claimable_alone(2, &rels));
        k.completed.insert(1);
        assert!(k.claimable_alone(2, &rels));
    }

    #[test]
    fn exchange_is_symmetric() {
        let mut all = vec![Knowledge::default(), Knowledge::default()];
        all[0].known.insert(3, 0);
        all[1].completed.insert(5);
        Knowledge::exchange(&mut all, 0, 1);
        assert_eq!(all[0], all[1]);
    }
}
