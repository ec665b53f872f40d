use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};
use std::sync::Arc;

use cocoplan::map::{astar_travel_time, los_obstacle_length, Cell, GridMap, MapError, Position, TravelOracle};
use proptest::prelude::*;

fn walled(seed: u64) -> GridMap {
    let mut map = GridMap::new(24, 16, 0.5).unwrap();
    let mut s = seed;
    let mut next = || {
        s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (s >> 33) as f64 / (1u64 << 31) as f64
    };
    for _ in 0..4 {
        let x = 1.0 + next() * 9.0;
        let y = 1.0 + next() * 5.0;
        if next() < 0.5 {
            map.fill_rect(Position::new(x, y), Position::new(x + 3.0, y + 0.3));
        } else {
            map.fill_rect(Position::new(x, y), Position::new(x + 0.3, y + 3.0));
        }
    }
    map
}

/// Plain Dijkstra over cells, 8-connected, no corner cutting; integer keys
/// in micro-meters keep the heap simple.
fn dijkstra(map: &GridMap, from: Cell, to: Cell) -> Option<f64> {
    let res = map.resolution();
    let free = |c: i64, r: i64| {
        c >= 0
            && r >= 0
            && (c as usize) < map.width()
            && (r as usize) < map.height()
            && !map.is_occupied(Cell {
                col: c as usize,
                row: r as usize,
            })
    };
    let mut best: HashMap<(i64, i64), u64> = HashMap::new();
    let mut heap = BinaryHeap::new();
    let start = (from.col as i64, from.row as i64);
    best.insert(start, 0);
    heap.push(Reverse((0u64, start)));
    while let Some(Reverse((d, (c, r)))) = heap.pop() {
        if (c as usize, r as usize) == (to.col, to.row) {
            return Some(d as f64 * 1e-6);
        }
        if best.get(&(c, r)).is_some_and(|b| *b < d) {
            continue;
        }
        for dc in -1..=1i64 {
            for dr in -1..=1i64 {
                if (dc, dr) == (0, 0) || !free(c + dc, r + dr) {
                    continue;
                }
                if dc != 0 && dr != 0 && !(free(c + dc, r) && free(c, r + dr)) {
                    continue;
                }
                let step = if dc != 0 && dr != 0 { res * 2f64.sqrt() } else { res };
                let nd = d + (step * 1e6).round() as u64;
                if best.get(&(c + dc, r + dr)).is_none_or(|b| nd < *b) {
                    best.insert((c + dc, r + dr), nd);
                    heap.push(Reverse((nd, (c + dc, r + dr))));
                }
            }
        }
    }
    None
}

#[test]
fn travel_time_matches_dijkstra() {
    for seed in 0..6 {
        let map = walled(seed);
        let free: Vec<Cell> = map.free_cells().collect();
        for k in 0..40 {
            let a = free[(k * 37 + seed as usize * 11) % free.len()];
            let b = free[(k * 91 + 5) % free.len()];
            let (pa, pb) = (map.center(a), map.center(b));
            let expected = dijkstra(&map, a, b).map(|g| g.max(pa.distance(&pb)));
            match astar_travel_time(pa, pb, &map, 1.0) {
                Ok(t) => assert!((t - expected.unwrap()).abs() < 1e-5, "seed {seed}: {t} vs {expected:?}"),
                Err(MapError::Unreachable(..)) => assert!(expected.is_none()),
                Err(e) => panic!("{e}"),
            }
        }
    }
}

#[test]
fn oracle_agrees_with_search_and_path_length() {
    let map = walled(3);
    let oracle = TravelOracle::new(Arc::new(map.clone()));
    let free: Vec<Position> = map.free_cells().map(|c| map.center(c)).collect();
    for k in 0..50 {
        let a = free[(k * 13) % free.len()];
        let b = free[(k * 29 + 7) % free.len()];
        let Some(d) = oracle.distance(a, b) else {
            assert!(astar_travel_time(a, b, &map, 1.0).is_err());
            continue;
        };
        assert!((d - astar_travel_time(a, b, &map, 1.0).unwrap()).abs() < 1e-9);
        let path = oracle.path(a, b).unwrap();
        let length: f64 = path.windows(2).map(|w| w[0].distance(&w[1])).sum();
        assert!((length - d).abs() < 1e-9, "path {length} vs distance {d}");
        assert!(path.iter().all(|p| map.is_free(*p)));
    }
}

#[test]
fn wall_blocks_line_of_sight_by_its_thickness() {
    let mut map = GridMap::new(20, 10, 0.5).unwrap();
    map.fill_rect(Position::new(4.0, 0.0), Position::new(4.99, 5.0));
    let through = los_obstacle_length(Position::new(1.25, 2.25), Position::new(8.25, 2.25), &map).unwrap();
    assert!((through - 1.0).abs() < 1e-9, "{through}");
    let clear = los_obstacle_length(Position::new(1.25, 0.25), Position::new(3.25, 4.75), &map).unwrap();
    assert_eq!(clear, 0.0);
}

/// Blocked length estimated by sampling the segment densely.
fn sampled_los(map: &GridMap, a: Position, b: Position, samples: usize) -> f64 {
    let len = a.distance(&b);
    let blocked = (0..samples)
        .filter(|i| {
            let p = a.lerp(&b, (*i as f64 + 0.5) / samples as f64);
            !map.is_free(p)
        })
        .count();
    len * blocked as f64 / samples as f64
}

proptest! {
    #[test]
    fn los_is_symmetric_and_bounded(ax in 0.0..12.0f64, ay in 0.0..8.0f64, bx in 0.0..12.0f64, by in 0.0..8.0f64, seed in 0u64..20) {
        let map = walled(seed);
        let (a, b) = (Position::new(ax, ay), Position::new(bx, by));
        let ab = los_obstacle_length(a, b, &map).unwrap();
        let ba = los_obstacle_length(b, a, &map).unwrap();
        prop_assert!((ab - ba).abs() < 1e-9);
        prop_assert!(ab >= 0.0 && ab <= a.distance(&b) + 1e-9);
    }

    #[test]
    fn los_matches_dense_sampling(ax in 0.0..12.0f64, ay in 0.0..8.0f64, bx in 0.0..12.0f64, by in 0.0..8.0f64, seed in 0u64..20) {
        let map = walled(seed);
        let (a, b) = (Position::new(ax, ay), Position::new(bx, by));
        let exact = los_obstacle_length(a, b, &map).unwrap();
        let samples = 20_000;
        // each cell boundary can misplace at most one sample
        let crossings = (a.distance(&b) / map.resolution()).ceil() * 2.0 + 2.0;
        let tol = crossings * a.distance(&b) / samples as f64;
        prop_assert!((exact - sampled_los(&map, a, b, samples)).abs() <= tol + 1e-9);
    }

    #[test]
    fn travel_is_admissible(ax in 0usize..24, ay in 0usize..16, bx in 0usize..24, by in 0usize..16, v in 0.1..5.0f64) {
        let map = walled(1);
        let (a, b) = (Cell { col: ax, row: ay }, Cell { col: bx, row: by });
        prop_assume!(!map.is_occupied(a) && !map.is_occupied(b));
        let (pa, pb) = (map.center(a), map.center(b));
        if let Ok(t) = astar_travel_time(pa, pb, &map, v) {
            prop_assert!(t >= pa.distance(&pb) / v - 1e-12);
        }
    }
}
