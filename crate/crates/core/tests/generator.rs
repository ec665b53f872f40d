use std::collections::HashMap;

use cocoplan::generator::{generate_tasks, GeneratorSpec, Phase, SpatialPattern, TemporalPattern};
use cocoplan::map::{GridMap, Position};
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn phase(end: f64, spatial: SpatialPattern, temporal: TemporalPattern) -> Phase {
    Phase {
        start: 0.0,
        end,
        spatial,
        temporal,
        rate: None,
    }
}

fn holey_map() -> GridMap {
    let mut map = GridMap::new(10, 10, 1.0).unwrap();
    map.fill_rect(Position::new(2.0, 2.0), Position::new(3.9, 6.9));
    map.fill_rect(Position::new(6.0, 7.0), Position::new(8.9, 7.9));
    map
}

#[test]
fn uniform_placement_passes_chi_square() {
    let map = holey_map();
    let spec = GeneratorSpec {
        rate: 1.0,
        phases: vec![phase(12_000.0, SpatialPattern::Uniform, TemporalPattern::Uniform)],
        ..GeneratorSpec::default()
    };
    let stream = generate_tasks(&spec, &map, 4).unwrap();
    assert!(stream.tasks.len() >= 10_000);
    let mut counts: HashMap<(i64, i64), f64> = HashMap::new();
    for t in stream.tasks.iter().take(10_000) {
        assert!(map.is_free(t.region_center));
        let key = (t.region_center.x.floor() as i64, t.region_center.y.floor() as i64);
        *counts.entry(key).or_default() += 1.0;
    }
    let free = map.free_cells().count();
    let expected = 10_000.0 / free as f64;
    let stat: f64 = map
        .free_cells()
        .map(|c| {
            let o = counts.get(&(c.col as i64, c.row as i64)).copied().unwrap_or(0.0);
            (o - expected).powi(2) / expected
        })
        .sum();
    let critical = ChiSquared::new((free - 1) as f64).unwrap().inverse_cdf(0.99);
    assert!(stat < critical, "chi-square {stat:.1} >= {critical:.1}");
}

#[test]
fn same_seed_same_stream() {
    let map = holey_map();
    let spec = GeneratorSpec {
        rate: 0.2,
        multi_agent_prob: 0.3,
        precedence_prob: 0.2,
        actions: vec![0, 1],
        phases: vec![
            phase(100.0, SpatialPattern::Sparse, TemporalPattern::LowFrequency),
            Phase {
                start: 100.0,
                end: 200.0,
                ..phase(0.0, SpatialPattern::Clustered, TemporalPattern::Spiky)
            },
        ],
        ..GeneratorSpec::default()
    };
    let a = generate_tasks(&spec, &map, 8).unwrap();
    assert_eq!(a, generate_tasks(&spec, &map, 8).unwrap());
    assert_ne!(a, generate_tasks(&spec, &map, 9).unwrap());
    assert!(a.tasks.windows(2).all(|w| w[0].release_time <= w[1].release_time));
    assert!(a.relations.iter().all(|r| r.second == r.first + 1));
}

#[test]
fn clustered_tasks_stay_near_fixed_centers() {
    let map = GridMap::new(40, 40, 0.5).unwrap();
    let centers = vec![Position::new(4.25, 4.25), Position::new(15.25, 15.25)];
    let spec = GeneratorSpec {
        rate: 1.0,
        cluster_centers: centers.clone(),
        cluster_radius: 1.0,
        phases: vec![phase(500.0, SpatialPattern::Clustered, TemporalPattern::Uniform)],
        ..GeneratorSpec::default()
    };
    let stream = generate_tasks(&spec, &map, 2).unwrap();
    let near = stream
        .tasks
        .iter()
        .filter(|t| centers.iter().any(|c| c.distance(&t.region_center) <= 3.5))
        .count();
    // within 3.5 sigma (plus snapping) for all but a handful
    assert!(
        near as f64 >= 0.99 * stream.tasks.len() as f64,
        "{near}/{}",
        stream.tasks.len()
    );
}

#[test]
fn sparse_tasks_keep_their_distance() {
    let map = GridMap::new(60, 60, 0.5).unwrap();
    let spec = GeneratorSpec {
        rate: 0.06,
        min_separation: 4.0,
        phases: vec![phase(200.0, SpatialPattern::Sparse, TemporalPattern::Uniform)],
        ..GeneratorSpec::default()
    };
    let tasks = generate_tasks(&spec, &map, 5).unwrap().tasks;
    assert!(tasks.len() > 5);
    for (i, a) in tasks.iter().enumerate() {
        for b in &tasks[i + 1..] {
            assert!(a.region_center.distance(&b.region_center) >= 4.0);
        }
    }
}

#[test]
fn spiky_arrivals_come_in_bursts() {
    let map = GridMap::new(10, 10, 1.0).unwrap();
    let spec = GeneratorSpec {
        rate: 0.5,
        burst_size: 8.0,
        burst_spread: 1.0,
        phases: vec![phase(1000.0, SpatialPattern::Uniform, TemporalPattern::Spiky)],
        ..GeneratorSpec::default()
    };
    let times: Vec<f64> = generate_tasks(&spec, &map, 3)
        .unwrap()
        .tasks
        .iter()
        .map(|t| t.release_time)
        .collect();
    let gaps: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
    let short = gaps.iter().filter(|g| **g <= 1.0).count();
    // a homogeneous process at the same rate would give about 39% short gaps
    assert!(short as f64 > 0.7 * gaps.len() as f64, "{short}/{}", gaps.len());
}
