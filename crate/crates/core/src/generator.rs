//! Seeded task streams with phase-wise spatial and temporal patterns.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::map::{GridMap, Position};
use crate::task::{ActionId, Requirement, Task, TaskId, TemporalRelation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpatialPattern {
    /// Around a few cluster centers.
    Clustered,
    /// Uniform over free cells.
    Uniform,
    /// Uniform, but kept apart from earlier tasks of the phase.
    Sparse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TemporalPattern {
    /// Poisson-timed bursts of several tasks.
    Spiky,
    /// Homogeneous Poisson arrivals.
    Uniform,
    /// Poisson arrivals at a reduced rate.
    LowFrequency,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Phase {
    pub start: f64,
    pub end: f64,
    pub spatial: SpatialPattern,
    pub temporal: TemporalPattern,
    /// Overrides the spec-wide arrival rate for this phase.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeneratorSpec {
    pub phases: Vec<Phase>,
    /// Mean arrivals per second.
    pub rate: f64,
    /// Rate multiplier of the low-frequency pattern.
    pub low_frequency_factor: f64,
    /// Mean tasks per burst; bursts arrive at `rate / burst_size`.
    pub burst_size: f64,
    /// Spread of a burst, in seconds.
    pub burst_spread: f64,
    pub clusters: usize,
    pub cluster_radius: f64,
    /// Fixed cluster centers; drawn at random when empty.
    pub cluster_centers: Vec<Position>,
    pub min_separation: f64,
    pub duration_min: f64,
    pub duration_max: f64,
    /// Actions a task may require, drawn uniformly.
    pub actions: Vec<ActionId>,
    /// Chance that a task needs two agents.
    pub multi_agent_prob: f64,
    /// Chance that a task must follow the previously generated one.
    pub precedence_prob: f64,
    pub first_id: TaskId,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        Self {
            phases: Vec::new(),
            rate: 0.05,
            low_frequency_factor: 0.3,
            burst_size: 5.0,
            burst_spread: 2.0,
            clusters: 3,
            cluster_radius: 2.0,
            cluster_centers: Vec::new(),
            min_separation: 3.0,
            duration_min: 2.0,
            duration_max: 8.0,
            actions: vec![0],
            multi_agent_prob: 0.0,
            precedence_prob: 0.0,
            first_id: 0,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeneratorError {
    #[error("phase {0}: end must not precede start")]
    PhaseBounds(usize),
    #[error("phase {0} overlaps or precedes phase {1}")]
    PhaseOrder(usize, usize),
    #[error("cluster center {0} is not in free space")]
    BlockedCenter(Position),
    #[error("map has no free cell")]
    NoFreeSpace,
    #[error("{0}")]
    Invalid(String),
}

/// A generated stream: tasks sorted by release time, plus relations.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TaskStream {
    pub tasks: Vec<Task>,
    pub relations: Vec<TemporalRelation>,
}

impl GeneratorSpec {
    pub fn validate(&self, map: &GridMap) -> Result<(), GeneratorError> {
        for (i, p) in self.phases.iter().enumerate() {
            if !(p.end >= p.start) || p.start < 0.0 {
                return Err(GeneratorError::PhaseBounds(i));
            }
            if i > 0 && p.start < self.phases[i - 1].end {
                return Err(GeneratorError::PhaseOrder(i, i - 1));
            }
        }
        if let Some(c) = self.cluster_centers.iter().find(|c| !map.is_free(**c)) {
            return Err(GeneratorError::BlockedCenter(*c));
        }
        let probs = [self.multi_agent_prob, self.precedence_prob];
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(GeneratorError::Invalid("probabilities must lie in [0, 1]".into()));
        }
        if !(self.duration_min > 0.0 && self.duration_max >= self.duration_min) {
            return Err(GeneratorError::Invalid("need 0 < duration_min <= duration_max".into()));
        }
        if self.actions.is_empty() {
            return Err(GeneratorError::Invalid("actions must not be empty".into()));
        }
        if self.rate < 0.0 || self.phases.iter().any(|p| p.rate.is_some_and(|r| r < 0.0)) {
            return Err(GeneratorError::Invalid("rates must be non-negative".into()));
        }
        if self.burst_size <= 0.0 {
            return Err(GeneratorError::Invalid("burst_size must be positive".into()));
        }
        Ok(())
    }
}

/// Arrival times in `[start, end)`.
fn arrivals(phase: &Phase, spec: &GeneratorSpec, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let base = phase.rate.unwrap_or(spec.rate);
    let poisson_times = |rate: f64, rng: &mut ChaCha8Rng| {
        let mut out = Vec::new();
        if rate <= 0.0 {
            return out;
        }
        let gap = Exp::new(rate).expect("positive rate");
        let mut t = phase.start;
        loop {
            t += gap.sample(rng);
            if t >= phase.end {
                return out;
            }
            out.push(t);
        }
    };
    match phase.temporal {
        TemporalPattern::Uniform => poisson_times(base, rng),
        TemporalPattern::LowFrequency => poisson_times(base * spec.low_frequency_factor, rng),
        TemporalPattern::Spiky => {
            let mut out = Vec::new();
            for burst in poisson_times(base / spec.burst_size, rng) {
                let count = Poisson::new(spec.burst_size).expect("positive mean").sample(rng) as usize;
                for _ in 0..count.max(1) {
                    let t = burst + rng.random::<f64>() * spec.burst_spread;
                    if t < phase.end {
                        out.push(t);
                    }
                }
            }
            out.sort_by(f64::total_cmp);
            out
        }
    }
}

/// A uniformly random free cell center.
pub fn uniform_free_position(free: &[Position], rng: &mut impl Rng) -> Position {
    free[rng.random_range(0..free.len())]
}

/// Draws a seeded task stream on `map`.
pub fn generate_tasks(spec: &GeneratorSpec, map: &GridMap, seed: u64) -> Result<TaskStream, GeneratorError> {
    spec.validate(map)?;
    let free: Vec<Position> = map.free_cells().map(|c| map.center(c)).collect();
    if free.is_empty() {
        return Err(GeneratorError::NoFreeSpace);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stream = TaskStream::default();
    let mut next_id = spec.first_id;
    for phase in &spec.phases {
        let times = arrivals(phase, spec, &mut rng);
        let centers: Vec<Position> = if !spec.cluster_centers.is_empty() {
            spec.cluster_centers
                .iter()
                .map(|c| map.snap(*c).expect("validated"))
                .collect()
        } else {
            (0..spec.clusters.max(1))
                .map(|_| uniform_free_position(&free, &mut rng))
                .collect()
        };
        let spread = Normal::new(0.0, spec.cluster_radius.max(1e-9)).expect("finite spread");
        let mut placed: Vec<Position> = Vec::new();
        for release in times {
            let center = match phase.spatial {
                SpatialPattern::Uniform => uniform_free_position(&free, &mut rng),
                SpatialPattern::Clustered => {
                    let c = centers[rng.random_range(0..centers.len())];
                    let mut pick = c;
                    for _ in 0..50 {
                        let p = Position::new(c.x + spread.sample(&mut rng), c.y + spread.sample(&mut rng));
                        if map.is_free(p) {
                            pick = map.snap(p).expect("free point is on the map");
                            break;
                        }
                    }
                    pick
                }
                SpatialPattern::Sparse => {
                    let mut pick = uniform_free_position(&free, &mut rng);
                    for _ in 0..100 {
                        if placed.iter().all(|q| q.distance(&pick) >= spec.min_separation) {
                            break;
                        }
                        pick = uniform_free_position(&free, &mut rng);
                    }
                    pick
                }
            };
            placed.push(center);
            let duration = rng.random_range(spec.duration_min..=spec.duration_max);
            let action = spec.actions[rng.random_range(0..spec.actions.len())];
            let count = if rng.random_bool(spec.multi_agent_prob) { 2 } else { 1 };
            let id = next_id;
            next_id += 1;
            if id > spec.first_id && rng.random_bool(spec.precedence_prob) {
                stream.relations.push(TemporalRelation::precedence(id - 1, id));
            }
            stream
                .tasks
                .push(Task::new(id, center, duration, vec![Requirement { count, action }]).released_at(release));
        }
    }
    Ok(stream)
}
