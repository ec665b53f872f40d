//! Completed tasks over time for the planner and a fixed-interval baseline,
//! with the across-trial variance and the local completion rate.
//!
//! `cargo run --release --example robustness -- [TRIALS]`

use std::env;

use cocoplan::experiment::{run_experiment, RobustnessParams};
use cocoplan::scenario::load_scenario;
use cocoplan::strategy::StrategyConfig;

const DESK: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/examples/scenarios/desk.toml");

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let trials = env::args().nth(1).map_or(Ok(3), |s| s.parse())?;
    let base = load_scenario(DESK)?;
    let params = RobustnessParams {
        step: 60.0,
        ..RobustnessParams::default()
    };
    for strategy in [StrategyConfig::cocoplan(), StrategyConfig::fimr(35.0)] {
        let mut cfg = base.clone();
        cfg.strategy = strategy;
        let exp = run_experiment(&cfg, trials)?;
        println!("{}:", exp.strategy.as_str());
        println!("  {:>6} {:>10} {:>10} {:>10}", "t", "completed", "variance", "rate/min");
        for row in exp.robustness(&params) {
            println!(
                "  {:>6.0} {:>10.1} {:>10.2} {:>10.2}",
                row.time,
                row.completed_mean,
                row.completed_variance,
                row.slope * 60.0
            );
        }
    }
    Ok(())
}
