//! Best-first branch-and-bound over joint task assignments and the event
//! that closes the cycle.
//!
//! Every node holds a partial assignment. Its lower bound is the rate of the
//! best plan found by greedy completion (always a feasible plan), its upper
//! bound an optimistic rate valid for every extension. Nodes are expanded in
//! order of decreasing upper bound and pruned once the upper bound cannot
//! beat the incumbent. The search is anytime: the root bound already yields a
//! feasible plan.

mod bounds;
pub mod event;

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};
use std::time::{Duration, Instant};

pub use bounds::{
    evaluate, expand_node, get_feasible_tasks, last_task_state, low_bound, objective_rate, up_bound, CollectivePlan,
    PlanError, PlanningProblem, IMPROVEMENT_TOL,
};
pub use event::{EventPlanner, FixedPointEvent, FixedTimeEvent, LeaderEvent, OptimizedEvent, PresetTargets};

use crate::scheduler::AssignedPlan;
use crate::task::TaskId;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SearchConfig {
    /// Wall-clock budget; `None` searches until the heap is empty.
    pub time_budget: Option<Duration>,
    /// Cap on node expansions. Unlike the wall-clock budget this keeps
    /// results reproducible.
    pub max_expansions: Option<usize>,
    /// Keep a record of every generated node.
    pub record_nodes: bool,
}

impl SearchConfig {
    pub fn unlimited() -> Self {
        Self::default()
    }

    pub fn with_budget(budget: Duration) -> Self {
        Self {
            time_budget: Some(budget),
            ..Self::default()
        }
    }
}

/// A generated node, as recorded for inspection.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeRecord {
    pub id: usize,
    pub parent: Option<usize>,
    pub depth: usize,
    pub plan: AssignedPlan,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SearchStats {
    pub generated: usize,
    pub expanded: usize,
    pub pruned: usize,
    pub duplicates: usize,
    pub elapsed: Duration,
    pub budget_exhausted: bool,
    /// Incumbent rate after the root and after every improvement.
    pub incumbent_history: Vec<f64>,
    /// Extractions whose bound was below some node still in the heap.
    pub heap_order_violations: usize,
}

#[derive(Debug, Clone)]
pub struct PlanOutcome {
    pub plan: CollectivePlan,
    pub stats: SearchStats,
    pub nodes: Vec<NodeRecord>,
}

struct Node {
    plan: AssignedPlan,
    lower: f64,
    upper: f64,
    depth: usize,
}

#[derive(Debug, Clone, Copy)]
struct HeapKey {
    upper: f64,
    depth: usize,
    id: usize,
}

impl PartialEq for HeapKey {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for HeapKey {}

impl PartialOrd for HeapKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapKey {
    // largest bound first; ties go to the deeper node, then the older one
    fn cmp(&self, other: &Self) -> Ordering {
        self.upper
            .total_cmp(&other.upper)
            .then(self.depth.cmp(&other.depth))
            .then(other.id.cmp(&self.id))
    }
}

/// Runs the search and returns the best plan found.
pub fn cocoplan(problem: &PlanningProblem<'_>, config: &SearchConfig) -> Result<PlanOutcome, PlanError> {
    let started = Instant::now();
    let out_of_budget = |stats: &SearchStats| {
        config.time_budget.is_some_and(|b| started.elapsed() >= b)
            || config.max_expansions.is_some_and(|m| stats.expanded >= m)
    };
    let mut stats = SearchStats::default();
    let mut records = Vec::new();
    let mut nodes: Vec<Node> = Vec::new();
    let mut seen: HashSet<Vec<Vec<TaskId>>> = HashSet::new();
    let mut heap = BinaryHeap::new();

    let root_plan = AssignedPlan::empty(problem.agents.len());
    let (root_lower, root_best) = low_bound(problem, &root_plan);
    let mut incumbent = root_best.ok_or(PlanError::NoEvent)?;
    let mut best_lower = root_lower;
    let root_upper = up_bound(problem, &root_plan);
    seen.insert(root_plan.sequences().to_vec());
    if config.record_nodes {
        records.push(NodeRecord {
            id: 0,
            parent: None,
            depth: 0,
            plan: root_plan.clone(),
            lower: root_lower,
            upper: root_upper,
        });
    }
    nodes.push(Node {
        plan: root_plan,
        lower: root_lower,
        upper: root_upper,
        depth: 0,
    });
    stats.generated = 1;
    stats.incumbent_history.push(best_lower);
    heap.push(HeapKey {
        upper: root_upper,
        depth: 0,
        id: 0,
    });

    'search: while let Some(key) = heap.pop() {
        if out_of_budget(&stats) {
            stats.budget_exhausted = true;
            break;
        }
        if heap.peek().is_some_and(|next| next.upper > key.upper) {
            stats.heap_order_violations += 1;
        }
        let (upper, lower, depth) = {
            let n = &nodes[key.id];
            (n.upper, n.lower, n.depth)
        };
        if upper <= best_lower {
            stats.pruned += 1;
            continue;
        }
        // the node's own lower bound was already folded into the incumbent
        // when it was generated
        debug_assert!(lower <= best_lower);
        stats.expanded += 1;
        let parent_plan = nodes[key.id].plan.clone();
        for task in get_feasible_tasks(problem, &parent_plan) {
            for child in expand_node(problem, &parent_plan, task) {
                if config.time_budget.is_some_and(|b| started.elapsed() >= b) {
                    stats.budget_exhausted = true;
                    break 'search;
                }
                if !seen.insert(child.sequences().to_vec()) {
                    stats.duplicates += 1;
                    continue;
                }
                let (child_lower, child_best) = low_bound(problem, &child);
                let child_upper = up_bound(problem, &child);
                let id = nodes.len();
                stats.generated += 1;
                if config.record_nodes {
                    records.push(NodeRecord {
                        id,
                        parent: Some(key.id),
                        depth: depth + 1,
                        plan: child.clone(),
                        lower: child_lower,
                        upper: child_upper,
                    });
                }
                if child_lower > best_lower {
                    if let Some(best) = child_best {
                        best_lower = child_lower;
                        incumbent = best;
                        stats.incumbent_history.push(best_lower);
                    }
                }
                nodes.push(Node {
                    plan: child,
                    lower: child_lower,
                    upper: child_upper,
                    depth: depth + 1,
                });
                if child_upper > best_lower {
                    heap.push(HeapKey {
                        upper: child_upper,
                        depth: depth + 1,
                        id,
                    });
                } else {
                    stats.pruned += 1;
                }
            }
        }
    }
    stats.elapsed = started.elapsed();
    Ok(PlanOutcome {
        plan: incumbent,
        stats,
        nodes: records,
    })
}
