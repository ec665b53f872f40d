//! Runs every coordination strategy on the same scenario and seeds and
//! prints a mean ± std table.
//!
//! `cargo run --release --example compare_strategies -- [TRIALS]`

use std::env;

use cocoplan::experiment::run_experiment;
use cocoplan::scenario::load_scenario;
use cocoplan::strategy::StrategyConfig;
use cocoplan::Position;

const DESK: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/examples/scenarios/desk.toml");

fn fmt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |v| format!("{v:.1}"))
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let trials = env::args().nth(1).map_or(Ok(3), |s| s.parse())?;
    let base = load_scenario(DESK)?;
    let strategies = [
        ("CoCoPlan", StrategyConfig::cocoplan()),
        ("FIX(N=3)", StrategyConfig::fix(3)),
        ("FPMR", StrategyConfig::fpmr(Position::new(10.25, 15.25))),
        ("FRDT", StrategyConfig::frdt(0)),
        ("FIMR(35)", StrategyConfig::fimr(35.0)),
        ("Greedy", StrategyConfig::greedy()),
    ];

    println!(
        "{:<10} {:>13} {:>13} {:>10} {:>10}",
        "strategy", "finished", "comm num", "comm int", "idle gap"
    );
    for (name, strategy) in strategies {
        let mut cfg = base.clone();
        cfg.strategy = strategy;
        let s = run_experiment(&cfg, trials)?.summary();
        println!(
            "{name:<10} {:>6.1} ± {:<4.1} {:>6.1} ± {:<4.1} {:>10} {:>10}",
            s.finished_mean,
            s.finished_std,
            s.comm_num_mean,
            s.comm_num_std,
            fmt(s.comm_int_mean),
            fmt(s.idle_gap_mean)
        );
    }
    Ok(())
}
