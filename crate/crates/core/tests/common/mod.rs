//! Independent oracles and graph fixtures shared by the integration tests.
//! Everything here recomputes from the edge list with plain loops and never
//! calls the library's numerical routines.

#![allow(dead_code)]

use std::sync::Arc;

use gnn_markov::graph::{Graph, GraphKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Dense = Vec<Vec<f64>>;

pub fn named(kind: GraphKind, n: usize, loops: bool) -> (String, Arc<Graph>) {
    let g = Graph::generate(kind, n, None, None).unwrap();
    let g = if loops { g.with_self_loops().unwrap() } else { g };
    let name = format!("{kind:?}{n}{}", if loops { "+loops" } else { "" });
    (name, Arc::new(g))
}

/// Connected Erdős–Rényi graph, redrawn with the next seed until connected
/// (and non-bipartite unless loops are added).
pub fn connected_er(n: usize, p: f64, mut seed: u64, loops: bool) -> (String, Arc<Graph>) {
    loop {
        let g = Graph::generate(GraphKind::ErdosRenyi, n, Some(p), Some(seed)).unwrap();
        if g.is_connected() && (loops || !g.is_bipartite()) {
            let g = if loops { g.with_self_loops().unwrap() } else { g };
            let name = format!("ER{n}(p={p},seed={seed}){}", if loops { "+loops" } else { "" });
            return (name, Arc::new(g));
        }
        seed += 1000;
    }
}

/// Twenty looped graphs: cliques, cycles, paths, stars and random graphs.
pub fn looped_fixtures() -> Vec<(String, Arc<Graph>)> {
    let mut out = Vec::new();
    for n in [3, 4, 5, 6] {
        out.push(named(GraphKind::Complete, n, true));
    }
    for n in [3, 4, 5, 6, 7, 8] {
        out.push(named(GraphKind::Cycle, n, true));
    }
    for n in [2, 3, 4, 5] {
        out.push(named(GraphKind::Path, n, true));
    }
    for n in [4, 6] {
        out.push(named(GraphKind::Star, n, true));
    }
    for (n, p, seed) in [(8, 0.4, 1), (10, 0.3, 2), (12, 0.25, 3), (9, 0.5, 4)] {
        out.push(connected_er(n, p, seed, true));
    }
    assert_eq!(out.len(), 20);
    out
}

/// Connected non-bipartite graphs without self-loops.
pub fn plain_ergodic_fixtures() -> Vec<(String, Arc<Graph>)> {
    let mut out = vec![
        named(GraphKind::Complete, 3, false),
        named(GraphKind::Complete, 5, false),
        named(GraphKind::Cycle, 5, false),
        named(GraphKind::Cycle, 7, false),
    ];
    for (n, p, seed) in [(8, 0.4, 5), (12, 0.3, 6)] {
        out.push(connected_er(n, p, seed, false));
    }
    out
}

pub fn degrees(g: &Graph) -> Vec<f64> {
    let mut d = vec![0.0; g.node_count()];
    for &(u, v) in g.edges() {
        d[u] += 1.0;
        if u != v {
            d[v] += 1.0;
        }
    }
    d
}

pub fn degree_distribution(g: &Graph) -> Vec<f64> {
    let d = degrees(g);
    let total: f64 = d.iter().sum();
    d.iter().map(|x| x / total).collect()
}

pub fn adjacency(g: &Graph) -> Dense {
    let n = g.node_count();
    let mut a = vec![vec![0.0; n]; n];
    for &(u, v) in g.edges() {
        a[u][v] = 1.0;
        a[v][u] = 1.0;
    }
    a
}

pub fn random_walk(g: &Graph) -> Dense {
    let d = degrees(g);
    adjacency(g)
        .into_iter()
        .enumerate()
        .map(|(u, row)| row.into_iter().map(|x| x / d[u]).collect())
        .collect()
}

pub fn lazy(p: &Dense, gamma: f64) -> Dense {
    p.iter()
        .enumerate()
        .map(|(u, row)| {
            row.iter()
                .enumerate()
                .map(|(v, x)| (1.0 - gamma) * x + if u == v { gamma } else { 0.0 })
                .collect()
        })
        .collect()
}

pub fn matmul(a: &Dense, b: &Dense) -> Dense {
    let n = a.len();
    let m = b[0].len();
    let mut c = vec![vec![0.0; m]; n];
    for i in 0..n {
        for k in 0..b.len() {
            let aik = a[i][k];
            if aik != 0.0 {
                for j in 0..m {
                    c[i][j] += aik * b[k][j];
                }
            }
        }
    }
    c
}

pub fn vecmat(mu: &[f64], p: &Dense) -> Vec<f64> {
    let mut out = vec![0.0; p[0].len()];
    for (i, &m) in mu.iter().enumerate() {
        for (j, &x) in p[i].iter().enumerate() {
            out[j] += m * x;
        }
    }
    out
}

pub fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

pub fn worst_row_tv(power: &Dense, pi: &[f64]) -> f64 {
    power.iter().map(|row| 0.5 * l1(row, pi)).fold(0.0, f64::max)
}

pub fn dobrushin(p: &Dense) -> f64 {
    let mut c: f64 = 0.0;
    for a in p {
        for b in p {
            c = c.max(0.5 * l1(a, b));
        }
    }
    c
}

pub fn to_dense(m: &nalgebra::DMatrix<f64>) -> Dense {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Expected DropEdge transition matrix by enumerating, for every node, all
/// keep/drop patterns of its incident edges. A node's row depends only on
/// its own edges: uniform over kept neighbours, or stay put if none remain.
pub fn exhaustive_dropedge(g: &Graph, drop: f64) -> Dense {
    let n = g.node_count();
    let a = adjacency(g);
    let mut out = vec![vec![0.0; n]; n];
    for u in 0..n {
        let nbrs: Vec<usize> = (0..n).filter(|&v| a[u][v] != 0.0).collect();
        let d = nbrs.len();
        assert!(d <= 20, "enumeration would be too large");
        for mask in 0u32..(1 << d) {
            let kept: Vec<usize> = (0..d).filter(|&i| mask & (1 << i) != 0).map(|i| nbrs[i]).collect();
            let prob = (1.0 - drop).powi(kept.len() as i32) * drop.powi((d - kept.len()) as i32);
            if kept.is_empty() {
                out[u][u] += prob;
            } else {
                for &v in &kept {
                    out[u][v] += prob / kept.len() as f64;
                }
            }
        }
    }
    out
}

pub fn random_distribution<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / s).collect()
}

/// Random row-stochastic matrix supported on the edges of `g`.
pub fn random_stochastic_on<R: Rng>(g: &Graph, rng: &mut R) -> Dense {
    let a = adjacency(g);
    a.iter()
        .map(|row| {
            let w: Vec<f64> = row
                .iter()
                .map(|&x| if x != 0.0 { rng.random_range(0.01..1.0) } else { 0.0 })
                .collect();
            let s: f64 = w.iter().sum();
            w.into_iter().map(|x| x / s).collect()
        })
        .collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
