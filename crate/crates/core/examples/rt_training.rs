//! Training per-layer attention on a two-community graph with and without
//! the layer-gap regularizer.
//!
//! cargo run --release --example rt_training

use gnn_markov::trainer::{train, TwoCommunityFixture};

fn main() -> gnn_markov::Result<()> {
    let seed = 2;
    let fixture = TwoCommunityFixture::new(seed)?;
    for lambda in [0.0, 1.0] {
        let report = train(&fixture.graph, &fixture.h0, &fixture.config(lambda, seed))?.report;
        println!(
            "λ={lambda}: task {:.3e}  RT {:.3e}  min layer gap {:.4}  node std {:.4}",
            report.task_loss_final, report.rt_final, report.min_layer_gap, report.node_std_final
        );
    }
    Ok(())
}
