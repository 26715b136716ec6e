//! Layer-varying attention: per-layer stationary distributions and whether
//! the deep trajectory settles.
//!
//! cargo run --example attention_schedules

use std::sync::Arc;

use gnn_markov::graph::{Graph, GraphKind};
use gnn_markov::homogeneous::Distribution;
use gnn_markov::inhomogeneous::{dim_check, necessary_condition_check, ChainSchedule};
use gnn_markov::operators::simple_rw;

fn main() -> gnn_markov::Result<()> {
    let g = Arc::new(Graph::generate(GraphKind::Complete, 3, None, None)?);
    let schedules = [
        ("constant", ChainSchedule::constant(&simple_rw(&g)?, 50)?),
        ("decaying", ChainSchedule::decaying(&g, 50, 3.0, 0.5)?),
        ("oscillating", ChainSchedule::oscillating(&g, 50, 2.0)?),
    ];
    for (name, schedule) in &schedules {
        let report = dim_check(schedule, 1e-6, 10)?;
        let last_gap = report.gaps.last().copied().unwrap_or(0.0);
        println!(
            "{name:<12} {:?}  last gap {last_gap:.2e}  drift summable {}",
            report.classification, report.verdicts.drift_summable
        );
    }

    let (_, oscillating) = &schedules[2];
    let check = necessary_condition_check(oscillating, &Distribution::uniform(3), 10, 1e-6)?;
    println!(
        "oscillating: min stationary drift {:.3}, gaps stay above (1−C)·drift: {}",
        check.min_stationary_drift, check.contrapositive_holds
    );
    Ok(())
}
