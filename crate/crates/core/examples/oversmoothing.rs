//! Feature propagation collapses node representations; laziness delays it.
//!
//! cargo run --example oversmoothing

use std::sync::Arc;

use gnn_markov::graph::{Graph, GraphKind};
use gnn_markov::operators::{lazy_walk, simple_rw};
use gnn_markov::oversmoothing::{layer_metrics, propagate_features, FeatureMatrix};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> gnn_markov::Result<()> {
    let g = Arc::new(Graph::generate(GraphKind::ErdosRenyi, 30, Some(0.15), Some(3))?.with_self_loops()?);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let h0 = FeatureMatrix::new(DMatrix::from_fn(30, 8, |_, _| rng.random_range(-1.0..1.0)), 0)?;

    let rw = layer_metrics(&propagate_features(&simple_rw(&g)?, &h0, 40)?)?;
    let lazy = layer_metrics(&propagate_features(&lazy_walk(&g, 0.5)?, &h0, 40)?)?;
    println!("layer  node-std (rw)  node-std (lazy 0.5)");
    for (a, b) in rw.iter().zip(&lazy).step_by(5) {
        println!("{:>5}  {:.4e}     {:.4e}", a.l, a.node_std, b.node_std);
    }
    Ok(())
}
