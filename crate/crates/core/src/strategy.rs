//! Coordination strategies: the proposed planner and the baselines it is
//! compared against.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::map::{GridMap, Position};
use crate::task::AgentId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum StrategyKind {
    /// Replan only once enough new tasks have piled up.
    Fix,
    /// Everyone meets at one fixed point.
    Fpmr,
    /// Everyone clusters around a fixed leader.
    Frdt,
    /// Meetings at a fixed period.
    Fimr,
    /// Pairwise meetings with fixed ring neighbours.
    Ring,
    /// No planned meetings; opportunistic exchange on contact.
    Greedy,
    Cocoplan,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 7] = [
        StrategyKind::Cocoplan,
        StrategyKind::Fix,
        StrategyKind::Fpmr,
        StrategyKind::Frdt,
        StrategyKind::Fimr,
        StrategyKind::Ring,
        StrategyKind::Greedy,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StrategyKind::Fix => "FIX",
            StrategyKind::Fpmr => "FPMR",
            StrategyKind::Frdt => "FRDT",
            StrategyKind::Fimr => "FIMR",
            StrategyKind::Ring => "RING",
            StrategyKind::Greedy => "GREEDY",
            StrategyKind::Cocoplan => "COCOPLAN",
        }
    }

    /// Does the strategy hold team-wide meetings?
    pub fn uses_team_events(self) -> bool {
        !matches!(self, StrategyKind::Ring | StrategyKind::Greedy)
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for StrategyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        StrategyKind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown strategy `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategyConfig {
    pub kind: StrategyKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold_n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interval: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_point: Option<Position>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leader: Option<AgentId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ring_order: Option<Vec<AgentId>>,
}

impl StrategyConfig {
    pub fn new(kind: StrategyKind) -> Self {
        Self {
            kind,
            threshold_n: None,
            interval: None,
            fixed_point: None,
            leader: None,
            ring_order: None,
        }
    }

    pub fn cocoplan() -> Self {
        Self::new(StrategyKind::Cocoplan)
    }

    pub fn fix(threshold: usize) -> Self {
        Self {
            threshold_n: Some(threshold),
            ..Self::new(StrategyKind::Fix)
        }
    }

    pub fn fpmr(point: Position) -> Self {
        Self {
            fixed_point: Some(point),
            ..Self::new(StrategyKind::Fpmr)
        }
    }

    pub fn frdt(leader: AgentId) -> Self {
        Self {
            leader: Some(leader),
            ..Self::new(StrategyKind::Frdt)
        }
    }

    pub fn fimr(interval: f64) -> Self {
        Self {
            interval: Some(interval),
            ..Self::new(StrategyKind::Fimr)
        }
    }

    pub fn ring(order: Vec<AgentId>) -> Self {
        Self {
            ring_order: Some(order),
            ..Self::new(StrategyKind::Ring)
        }
    }

    pub fn greedy() -> Self {
        Self::new(StrategyKind::Greedy)
    }

    /// Ring order, defaulting to ascending ids.
    pub fn ring_order_or_default(&self, agents: usize) -> Vec<AgentId> {
        self.ring_order.clone().unwrap_or_else(|| (0..agents).collect())
    }

    /// Checks that the fields the kind needs are present and sensible.
    /// Errors name the offending field.
    pub fn validate(&self, agents: usize, map: &GridMap) -> Result<(), String> {
        match self.kind {
            StrategyKind::Fix => match self.threshold_n {
                Some(n) if n >= 1 => {}
                Some(_) => return Err("strategy.threshold_n: must be at least 1".into()),
                None => return Err("strategy.threshold_n: required for FIX".into()),
            },
            StrategyKind::Fimr => match self.interval {
                Some(i) if i.is_finite() && i > 0.0 => {}
                Some(i) => return Err(format!("strategy.interval: must be positive, got {i}")),
                None => return Err("strategy.interval: required for FIMR".into()),
            },
            StrategyKind::Fpmr => {
                let p = self.fixed_point.ok_or("strategy.fixed_point: required for FPMR")?;
                if !map.is_free(p) {
                    return Err(format!("strategy.fixed_point: {p} is not a free cell"));
                }
            }
            StrategyKind::Frdt => {
                let l = self.leader.ok_or("strategy.leader: required for FRDT")?;
                if l >= agents {
                    return Err(format!("strategy.leader: no agent {l}"));
                }
            }
            StrategyKind::Ring => {
                if let Some(order) = &self.ring_order {
                    let mut sorted = order.clone();
                    sorted.sort_unstable();
                    if sorted != (0..agents).collect::<Vec<_>>() {
                        return Err("strategy.ring_order: must be a permutation of all agent ids".into());
                    }
                }
            }
            StrategyKind::Greedy | StrategyKind::Cocoplan => {}
        }
        Ok(())
    }
}
