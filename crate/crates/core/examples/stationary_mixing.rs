//! Stationary distribution and mixing time of the simple random walk on a
//! random graph.
//!
//! cargo run --example stationary_mixing

use std::sync::Arc;

use gnn_markov::graph::{Graph, GraphKind};
use gnn_markov::homogeneous::{d_curve, mixing_time, stationary_analytic, stationary_power, PowerOptions};
use gnn_markov::operators::simple_rw;

fn main() -> gnn_markov::Result<()> {
    let g = Arc::new(Graph::generate(GraphKind::ErdosRenyi, 20, Some(0.3), Some(11))?.with_self_loops()?);
    let p = simple_rw(&g)?;

    let pi = stationary_power(&p, PowerOptions::default())?;
    let exact = stationary_analytic(&g)?;
    let err: f64 = pi.values().iter().zip(exact.values()).map(|(a, b)| (a - b).abs()).sum();
    println!("power iteration vs deg/Σdeg: L1 = {err:.2e}");

    let curve = d_curve(&p, &exact, 30)?;
    for (t, d) in curve.iter().enumerate().step_by(5) {
        println!("d({:>2}) = {d:.3e}", t + 1);
    }
    for eps in [0.25, 1e-3, 1e-6] {
        println!("t_mix({eps:e}) = {}", mixing_time(&p, &exact, eps, 10_000)?);
    }
    Ok(())
}
