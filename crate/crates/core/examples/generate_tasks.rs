//! Builds a three-phase task stream and shows how the spatial and temporal
//! patterns differ between phases.
//!
//! `cargo run --example generate_tasks`

use cocoplan::generator::{generate_tasks, GeneratorSpec, Phase, SpatialPattern, TemporalPattern};
use cocoplan::{GridMap, Position};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut map = GridMap::new(60, 40, 0.5)?;
    map.fill_rect(Position::new(14.0, 4.0), Position::new(14.4, 19.9));

    let phase = |start, end, spatial, temporal| Phase {
        start,
        end,
        spatial,
        temporal,
        rate: None,
    };
    let spec = GeneratorSpec {
        rate: 0.1,
        actions: vec![0, 1],
        multi_agent_prob: 0.2,
        precedence_prob: 0.1,
        phases: vec![
            phase(0.0, 200.0, SpatialPattern::Sparse, TemporalPattern::LowFrequency),
            phase(200.0, 400.0, SpatialPattern::Clustered, TemporalPattern::Spiky),
            phase(400.0, 600.0, SpatialPattern::Uniform, TemporalPattern::Uniform),
        ],
        ..GeneratorSpec::default()
    };
    let stream = generate_tasks(&spec, &map, 42)?;

    for p in &spec.phases {
        let tasks: Vec<_> = stream
            .tasks
            .iter()
            .filter(|t| t.release_time >= p.start && t.release_time < p.end)
            .collect();
        let gaps: Vec<f64> = tasks
            .windows(2)
            .map(|w| w[1].release_time - w[0].release_time)
            .collect();
        let shortest = gaps.iter().copied().fold(f64::INFINITY, f64::min);
        let mut spread = 0.0;
        for (i, a) in tasks.iter().enumerate() {
            for b in &tasks[i + 1..] {
                spread += a.region_center.distance(&b.region_center);
            }
        }
        let pairs = (tasks.len() * tasks.len().saturating_sub(1) / 2).max(1);
        println!(
            "{:>3}-{:<3} s {:?}/{:?}: {} tasks, shortest gap {:.2} s, mean pair distance {:.1} m",
            p.start,
            p.end,
            p.spatial,
            p.temporal,
            tasks.len(),
            shortest,
            spread / pairs as f64
        );
    }
    let multi = stream
        .tasks
        .iter()
        .filter(|t| t.requirements.iter().any(|r| r.count > 1))
        .count();
    println!(
        "{multi} tasks need two robots; {} precedence links",
        stream.relations.len()
    );
    Ok(())
}
