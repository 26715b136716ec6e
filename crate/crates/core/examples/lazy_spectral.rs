//! Laziness slows mixing: worst-row total variation of lazy and plain walks,
//! and the spectral rate that governs both.
//!
//! cargo run --example lazy_spectral

use std::sync::Arc;

use gnn_markov::graph::{Graph, GraphKind};
use gnn_markov::homogeneous::{convergence_rate, d_curve, fit_tail_log_slope, stationary_analytic, verify_lazy_slower};
use gnn_markov::operators::{lazy_walk, simple_rw};

fn main() -> gnn_markov::Result<()> {
    let g = Arc::new(Graph::generate(GraphKind::Cycle, 9, None, None)?.with_self_loops()?);

    let cmp = verify_lazy_slower(&g, 0.5, 40)?;
    println!("same stationary distribution: {}", cmp.same_stationary);
    for step in cmp.steps.iter().step_by(8) {
        println!("l={:>2}  lazy {:.4e}  rw {:.4e}", step.l, step.lazy, step.rw);
    }
    println!("lazy never faster: {}", cmp.all_hold());

    let pi = stationary_analytic(&g)?;
    for gamma in [0.0, 0.25, 0.5, 0.75] {
        let rate = convergence_rate(&g, gamma)?;
        let p = if gamma == 0.0 {
            simple_rw(&g)?
        } else {
            lazy_walk(&g, gamma)?
        };
        let curve = d_curve(&p, &pi, 150)?;
        let slope = fit_tail_log_slope(&curve).unwrap_or(f64::NAN);
        println!(
            "γ={gamma:<4}  spectral rate {rate:.5}  fitted exp(slope) {:.5}",
            slope.exp()
        );
    }
    Ok(())
}
