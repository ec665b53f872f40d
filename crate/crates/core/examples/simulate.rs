//! Runs one trial of a scenario file and prints its metrics and the start of
//! its event log.
//!
//! `cargo run --example simulate -- [SCENARIO] [SEED]`

use std::env;

use cocoplan::scenario::load_scenario;
use cocoplan::sim::{format_log, run};

const DESK: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/examples/scenarios/desk.toml");

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = env::args().skip(1);
    let path = args.next().unwrap_or_else(|| DESK.to_string());
    let cfg = load_scenario(&path)?;
    let seed = match args.next() {
        Some(s) => s.parse()?,
        None => cfg.seed,
    };

    let setup = cfg.to_setup(seed)?;
    let outcome = run(&setup)?;
    let m = &outcome.metrics;
    println!(
        "{} on {} (seed {seed}, horizon {} s)",
        outcome.strategy.as_str(),
        cfg.env,
        cfg.horizon
    );
    println!("  tasks released   {}", setup.tasks.len());
    println!("  tasks finished   {}", m.finished_tasks);
    println!("  meetings         {}", m.comm_count);
    println!("  planning cycles  {}", outcome.cycles.len());
    if let Some(worst) = m.idle_gaps.iter().copied().reduce(f64::max) {
        println!("  worst idle gap   {worst:.2} s");
    }
    println!("  violations       {}", outcome.violations.len());

    println!("\nfirst log lines:");
    for line in format_log(&outcome.log).lines().take(15) {
        println!("  {line}");
    }
    Ok(())
}
