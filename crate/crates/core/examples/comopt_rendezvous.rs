//! Where should a scattered team meet? Compares the optimized rendezvous
//! with gathering everyone at the last robot to finish.
//!
//! `cargo run --example comopt_rendezvous`

use std::sync::Arc;

use cocoplan::comopt::{all_gather, com_opt, ComOptConfig, CommContext, LastTaskState};
use cocoplan::{comm_graph, CommParams, GridMap, Position, TravelOracle};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut map = GridMap::new(80, 40, 0.5)?;
    map.fill_rect(Position::new(12.0, 0.0), Position::new(12.4, 14.0));
    map.fill_rect(Position::new(26.0, 6.0), Position::new(26.4, 19.9));
    let oracle = TravelOracle::new(Arc::new(map));
    let params = CommParams::with_range(8.0);
    let speeds = [1.0, 1.5, 1.0, 2.0];
    let ctx = CommContext {
        oracle: &oracle,
        params: &params,
        speeds: &speeds,
    };

    let last = LastTaskState {
        finish_times: vec![12.0, 4.0, 9.0, 15.0],
        positions: vec![
            Position::new(2.25, 2.25),
            Position::new(8.25, 17.25),
            Position::new(20.25, 3.25),
            Position::new(37.25, 18.25),
        ],
    };

    let gather = all_gather(&last, &ctx)?;
    let best = com_opt(&last, &ctx, &ComOptConfig::default())?;
    for (name, ev) in [("all-gather", &gather), ("optimized", &best)] {
        println!(
            "{name}: meet at t = {:.2}, worst idle {:.2} s",
            ev.time,
            ev.max_delay(&last)
        );
        for (i, p) in ev.positions.iter().enumerate() {
            println!("  agent {i} -> {p}");
        }
        let graph = comm_graph(&ev.positions, oracle.map(), &params)?;
        println!("  links: {:?}", graph.edges());
    }
    Ok(())
}
