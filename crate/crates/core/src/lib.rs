//! Joint multi-robot task planning and team-wise intermittent communication.
//!
//! The crate is organized bottom-up:
//!
//! * [`map`]: occupancy grid, line-of-sight obstacle length, grid travel.
//! * [`comm`]: path-loss link quality and the communication graph.
//! * [`task`]: tasks, temporal relations, detection and schedule checks.
//! * [`scheduler`]: minimum-makespan timing of a fixed assignment.
//! * [`comopt`]: placement of the next communication event.
//! * [`planner`]: branch-and-bound search over assignments and events.
//! * [`strategy`]: the proposed planner and the baseline coordination schemes.
//! * [`sim`]: discrete-event execution of the execute/communicate/replan loop.
//! * [`scenario`], [`generator`], [`experiment`]: configuration, task streams,
//!   trials and CSV export.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod comm;
pub mod comopt;
pub mod experiment;
pub mod generator;
pub mod map;
pub mod planner;
pub mod scenario;
pub mod scheduler;
pub mod sim;
pub mod strategy;
pub mod task;
pub mod team;

pub use comm::{comm_graph, is_connected, quality, CommGraph, CommParams};
pub use map::{astar_travel_time, los_obstacle_length, GridMap, MapError, Position, TravelOracle};
pub use planner::{cocoplan, CollectivePlan, PlanOutcome, PlanningProblem, SearchConfig};
pub use scheduler::{schedule_min_makespan, AssignedPlan, ScheduleError, Timetable};
pub use task::{
    check_schedule, detect_tasks, ActionId, AgentId, ExecutionInterval, RelationKind, Requirement, Task, TaskId,
    TemporalRelation,
};
pub use team::{AgentSnapshot, TravelModel};
