mod common;

use std::time::Duration;

use cocoplan::planner::{cocoplan, low_bound, up_bound, SearchConfig};
use common::{extends, random_instance, scored_plans};

fn record_all() -> SearchConfig {
    SearchConfig {
        record_nodes: true,
        ..SearchConfig::unlimited()
    }
}

#[test]
fn search_matches_enumeration() {
    for seed in 0..30 {
        let inst = random_instance(seed, 2 + (seed % 2) as usize, 2 + (seed % 3) as usize);
        let best = scored_plans(&inst).iter().map(|(_, r)| *r).fold(0.0, f64::max);
        let out = cocoplan(&inst.problem(), &SearchConfig::unlimited()).unwrap();
        assert!(
            (out.plan.objective - best).abs() <= 1e-9,
            "seed {seed}: search {} enumeration {best}",
            out.plan.objective
        );
    }
}

#[test]
fn bounds_bracket_every_subtree() {
    for seed in 100..110 {
        let inst = random_instance(seed, 2, 4);
        let scored = scored_plans(&inst);
        let out = cocoplan(&inst.problem(), &record_all()).unwrap();
        assert!(!out.nodes.is_empty());
        for node in &out.nodes {
            assert!(node.upper >= node.lower, "seed {seed} node {}", node.id);
            let subtree = scored
                .iter()
                .filter(|(p, _)| extends(p, &node.plan))
                .map(|(_, r)| *r)
                .fold(0.0, f64::max);
            assert!(
                node.upper >= subtree,
                "seed {seed} node {}: ub {} < {subtree}",
                node.id,
                node.upper
            );
        }
    }
}

#[test]
fn lower_bound_is_achieved_by_its_plan() {
    let inst = random_instance(7, 3, 5);
    let problem = inst.problem();
    let root = cocoplan::AssignedPlan::empty(3);
    let (lb, plan) = low_bound(&problem, &root);
    let plan = plan.unwrap();
    assert_eq!(lb, plan.objective);
    assert!(up_bound(&problem, &root) >= lb);
}

#[test]
fn zero_budget_still_returns_a_feasible_plan() {
    let inst = random_instance(3, 3, 5);
    let config = SearchConfig::with_budget(Duration::ZERO);
    let out = cocoplan(&inst.problem(), &config).unwrap();
    assert!(out.stats.budget_exhausted);
    assert_eq!(out.stats.expanded, 0);
    for iv in out.plan.timetable.intervals.values() {
        assert!(iv.finish <= out.plan.event.time + 1e-9);
    }
}

#[test]
fn incumbent_never_gets_worse() {
    let inst = random_instance(11, 3, 5);
    let out = cocoplan(&inst.problem(), &SearchConfig::unlimited()).unwrap();
    assert!(out.stats.incumbent_history.windows(2).all(|w| w[1] > w[0]));
    assert_eq!(out.stats.heap_order_violations, 0);
}

#[test]
fn node_budget_is_deterministic() {
    let inst = random_instance(21, 3, 5);
    let config = SearchConfig {
        max_expansions: Some(5),
        ..SearchConfig::unlimited()
    };
    let a = cocoplan(&inst.problem(), &config).unwrap();
    let b = cocoplan(&inst.problem(), &config).unwrap();
    assert!(a.stats.expanded <= 5);
    assert_eq!(a.plan, b.plan);
}
