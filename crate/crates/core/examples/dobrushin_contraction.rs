//! Dobrushin coefficients of the standard message-passing operators and of
//! their powers, with the contraction they guarantee.
//!
//! cargo run --example dobrushin_contraction

use std::sync::Arc;

use gnn_markov::graph::{Graph, GraphKind};
use gnn_markov::homogeneous::{l1_distance, Distribution};
use gnn_markov::operators::{
    attention_operator, dobrushin_coefficient, dropedge_expected, lazy_walk, simple_rw, EdgeLogits,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> gnn_markov::Result<()> {
    let g = Arc::new(Graph::generate(GraphKind::Cycle, 6, None, None)?.with_self_loops()?);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let operators = [
        ("random walk", simple_rw(&g)?),
        ("lazy γ=0.5", lazy_walk(&g, 0.5)?),
        ("DropEdge mean", dropedge_expected(&g)?),
        (
            "attention",
            attention_operator(&g, &EdgeLogits::random_symmetric(&g, 2.0, &mut rng))?,
        ),
    ];

    // Opposite nodes of the cycle start at maximal distance; "gap" is
    // ‖μP^t − νP^t‖₁, which never exceeds 2·C(P^t).
    let mu = Distribution::point_mass(6, 0);
    let nu = Distribution::point_mass(6, 3);
    for (name, p) in &operators {
        print!("{name:<14}");
        let mut power = p.entries().clone();
        for t in 1..=8u32 {
            if t > 1 {
                power = &power * p.entries();
            }
            if t.is_power_of_two() {
                let c = dobrushin_coefficient(&power);
                let gap = l1_distance(mu.step(&power).values(), nu.step(&power).values());
                assert!(gap <= c * l1_distance(mu.values(), nu.values()) + 1e-12);
                print!("  t={t}: C {c:.4}, gap {gap:.4}");
            }
        }
        println!();
    }
    Ok(())
}
