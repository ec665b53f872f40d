use cocoplan::comm::{comm_graph, linked, quality, CommGraph, CommParams};
use cocoplan::map::{los_obstacle_length, GridMap, Position};
use proptest::prelude::*;

fn find(parent: &mut [usize], x: usize) -> usize {
    let mut r = x;
    while parent[r] != r {
        r = parent[r];
    }
    parent[x] = r;
    r
}

/// Connectivity from the link formula directly, merged with union-find.
fn union_find_connected(points: &[Position], map: &GridMap, p: &CommParams) -> bool {
    let mut parent: Vec<usize> = (0..points.len()).collect();
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let d = points[i].distance(&points[j]).max(p.ref_dist / 10.0);
            let q = p.tx_power
                - (p.pl_ref + 10.0 * p.path_exponent * (d / p.ref_dist).log10())
                - p.attenuation * los_obstacle_length(points[i], points[j], map).unwrap();
            if q > p.threshold {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a] = b;
            }
        }
    }
    let root = find(&mut parent, 0);
    (0..points.len()).all(|i| find(&mut parent, i) == root)
}

fn office() -> GridMap {
    let mut map = GridMap::new(60, 40, 0.5).unwrap();
    map.fill_rect(Position::new(10.0, 0.0), Position::new(10.4, 14.0));
    map.fill_rect(Position::new(18.0, 6.0), Position::new(18.4, 20.0));
    map
}

#[test]
fn range_is_strict_at_the_threshold() {
    let p = CommParams::with_range(10.0);
    assert!((p.free_space_range() - 10.0).abs() < 1e-9);
    let map = GridMap::new(60, 10, 0.5).unwrap();
    let a = Position::new(1.0, 1.0);
    assert!(linked(a, Position::new(10.9, 1.0), &map, &p).unwrap());
    assert!(!linked(a, Position::new(11.0, 1.0), &map, &p).unwrap());
}

#[test]
fn wall_loss_is_linear_in_thickness() {
    let p = CommParams::default();
    let open = GridMap::new(40, 10, 0.5).unwrap();
    let mut walled = open.clone();
    walled.fill_rect(Position::new(5.0, 0.0), Position::new(6.49, 5.0));
    let (a, b) = (Position::new(1.25, 2.25), Position::new(9.25, 2.25));
    let drop = quality(a, b, &open, &p).unwrap() - quality(a, b, &walled, &p).unwrap();
    assert!((drop - 1.5 * p.attenuation).abs() < 1e-9, "{drop}");
}

#[test]
fn components_label_by_smallest_member() {
    let g = CommGraph::new(5, [(3, 4), (1, 0), (2, 2)]);
    assert_eq!(g.components(), vec![0, 0, 2, 3, 3]);
    assert!(!g.is_connected());
    assert!(CommGraph::new(0, []).is_connected());
}

proptest! {
    #[test]
    fn graph_connectivity_matches_union_find(
        pts in prop::collection::vec((0.0..29.9f64, 0.0..19.9f64), 1..8),
        range in 2.0..15.0f64,
    ) {
        let map = office();
        let points: Vec<Position> = pts.iter().map(|(x, y)| Position::new(*x, *y)).collect();
        let p = CommParams::with_range(range);
        let g = comm_graph(&points, &map, &p).unwrap();
        prop_assert_eq!(g.is_connected(), union_find_connected(&points, &map, &p));
        for &(i, j) in g.edges() {
            prop_assert!(quality(points[i], points[j], &map, &p).unwrap() > p.threshold);
        }
    }

    #[test]
    fn quality_never_rises_with_distance(x0 in 0.5..5.0f64, dx in 0.01..20.0f64) {
        let p = CommParams::default();
        let map = GridMap::new(60, 4, 0.5).unwrap();
        let a = Position::new(0.25, 1.0);
        let near = quality(a, Position::new(x0, 1.0), &map, &p).unwrap();
        let far = quality(a, Position::new((x0 + dx).min(29.9), 1.0), &map, &p).unwrap();
        prop_assert!(far <= near);
    }
}
