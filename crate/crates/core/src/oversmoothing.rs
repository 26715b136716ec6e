//! Linear feature propagation and over-smoothing metrics.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::homogeneous::Distribution;
use crate::inhomogeneous::ChainSchedule;
use crate::operators::{StochasticMatrix, SymmetricOperator};

/// Node features `H^(l)`, one row per node.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    values: DMatrix<f64>,
    layer_index: usize,
}

impl FeatureMatrix {
    pub fn new(values: DMatrix<f64>, layer_index: usize) -> Result<Self> {
        if values.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("feature entries must be finite".into()));
        }
        Ok(FeatureMatrix { values, layer_index })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let f = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != f) {
            return Err(Error::DimensionMismatch {
                expected: f,
                found: bad.len(),
            });
        }
        Self::new(DMatrix::from_fn(n, f, |i, j| rows[i][j]), 0)
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn layer_index(&self) -> usize {
        self.layer_index
    }

    pub fn node_count(&self) -> usize {
        self.values.nrows()
    }

    pub fn feature_count(&self) -> usize {
        self.values.ncols()
    }

    pub fn row(&self, u: usize) -> Vec<f64> {
        self.values.row(u).iter().copied().collect()
    }
}

/// `H^(0), …, H^(L)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    layers: Vec<FeatureMatrix>,
}

impl Trajectory {
    pub fn new(layers: Vec<FeatureMatrix>) -> Result<Self> {
        let first = layers.first().ok_or(Error::TooShort { min: 1, got: 0 })?;
        let shape = first.values.shape();
        for h in &layers[1..] {
            if h.values.shape() != shape {
                return Err(Error::DimensionMismatch {
                    expected: shape.0 * shape.1,
                    found: h.values.len(),
                });
            }
        }
        Ok(Trajectory { layers })
    }

    pub fn layers(&self) -> &[FeatureMatrix] {
        &self.layers
    }

    /// Number of propagation steps `L`.
    pub fn depth(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn last(&self) -> &FeatureMatrix {
        self.layers.last().unwrap()
    }

    fn require_steps(&self) -> Result<()> {
        if self.layers.len() < 2 {
            return Err(Error::TooShort {
                min: 2,
                got: self.layers.len(),
            });
        }
        Ok(())
    }
}

/// Something that supplies the `N×N` matrix applied at layer `l` (1-based).
pub trait MessagePassing {
    fn dim(&self) -> usize;
    /// `None` when layer `l` does not exist.
    fn layer_matrix(&self, l: usize) -> Option<&DMatrix<f64>>;
}

impl MessagePassing for StochasticMatrix {
    fn dim(&self) -> usize {
        StochasticMatrix::dim(self)
    }

    fn layer_matrix(&self, _: usize) -> Option<&DMatrix<f64>> {
        Some(self.entries())
    }
}

impl MessagePassing for SymmetricOperator {
    fn dim(&self) -> usize {
        SymmetricOperator::dim(self)
    }

    fn layer_matrix(&self, _: usize) -> Option<&DMatrix<f64>> {
        Some(self.entries())
    }
}

impl MessagePassing for ChainSchedule {
    fn dim(&self) -> usize {
        ChainSchedule::dim(self)
    }

    fn layer_matrix(&self, l: usize) -> Option<&DMatrix<f64>> {
        (1..=self.len()).contains(&l).then(|| self.layer(l).entries())
    }
}

/// `H^(l) = P^(l) H^(l−1)` for `l = 1..=depth`, no nonlinearity.
pub fn propagate_features(op: &impl MessagePassing, h0: &FeatureMatrix, depth: usize) -> Result<Trajectory> {
    if h0.node_count() != op.dim() {
        return Err(Error::DimensionMismatch {
            expected: op.dim(),
            found: h0.node_count(),
        });
    }
    let mut layers = Vec::with_capacity(depth + 1);
    layers.push(FeatureMatrix {
        values: h0.values.clone(),
        layer_index: 0,
    });
    for l in 1..=depth {
        let p = op.layer_matrix(l).ok_or(Error::TooShort { min: depth, got: l - 1 })?;
        let values = p * &layers[l - 1].values;
        layers.push(FeatureMatrix { values, layer_index: l });
    }
    Trajectory::new(layers)
}

fn sqrt_degrees(g: &Graph, h: &FeatureMatrix) -> Result<Vec<f64>> {
    if !g.has_self_loops() {
        return Err(Error::MissingSelfLoops);
    }
    if h.node_count() != g.node_count() {
        return Err(Error::DimensionMismatch {
            expected: g.node_count(),
            found: h.node_count(),
        });
    }
    Ok(g.degrees().iter().map(|&d| (d as f64).sqrt()).collect())
}

/// `X = (D̃^{1/2} H)ᵀ`, an `F×N` matrix whose rows evolve under the simple
/// random walk when `H` evolves under the GCN operator.
pub fn feature_view_transform(g: &Graph, h: &FeatureMatrix) -> Result<FeatureMatrix> {
    let s = sqrt_degrees(g, h)?;
    let values = DMatrix::from_fn(h.feature_count(), h.node_count(), |f, u| s[u] * h.values[(u, f)]);
    Ok(FeatureMatrix {
        values,
        layer_index: h.layer_index,
    })
}

/// Inverse of [`feature_view_transform`]: `H = D̃^{-1/2} Xᵀ`.
pub fn feature_view_inverse(g: &Graph, x: &FeatureMatrix) -> Result<FeatureMatrix> {
    let transposed = FeatureMatrix {
        values: x.values.transpose(),
        layer_index: x.layer_index,
    };
    let s = sqrt_degrees(g, &transposed)?;
    let mut values = transposed.values;
    for (u, mut row) in values.row_iter_mut().enumerate() {
        row /= s[u];
    }
    Ok(FeatureMatrix {
        values,
        layer_index: x.layer_index,
    })
}

/// Each row of an `X`-view matrix rescaled to sum to one.
pub fn x_view_distributions(x: &FeatureMatrix) -> Result<Vec<Distribution>> {
    x.values
        .row_iter()
        .map(|row| Distribution::normalized(row.iter().copied().collect()))
        .collect()
}

/// Population standard deviation across nodes, per feature, averaged over
/// features. Zero exactly when all node rows coincide.
pub fn node_std_metric(h: &FeatureMatrix) -> Result<f64> {
    let n = h.node_count();
    if n < 2 {
        return Err(Error::TooFewNodes);
    }
    let f = h.feature_count();
    if f == 0 {
        return Ok(0.0);
    }
    let total: f64 = h
        .values
        .column_iter()
        .map(|col| {
            let mean = col.sum() / n as f64;
            (col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64).sqrt()
        })
        .sum();
    Ok(total / f as f64)
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Per-layer mean over nodes of `‖σ(h_u^(l−1)) − σ(h_u^(l))‖₁`, `l = 1..=L`.
pub fn sigmoid_gaps(traj: &Trajectory) -> Result<Vec<f64>> {
    traj.require_steps()?;
    let n = traj.layers[0].node_count().max(1) as f64;
    Ok(traj
        .layers
        .windows(2)
        .map(|w| {
            w[0].values
                .iter()
                .zip(w[1].values.iter())
                .map(|(a, b)| (sigmoid(*a) - sigmoid(*b)).abs())
                .sum::<f64>()
                / n
        })
        .collect())
}

/// `(mean_l sigmoid_gap_l − T)²`.
pub fn rt_penalty(traj: &Trajectory, threshold: f64) -> Result<f64> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::ThresholdOutOfRange(threshold));
    }
    let gaps = sigmoid_gaps(traj)?;
    let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
    Ok((mean - threshold).powi(2))
}

/// Per-layer minimum over nodes of `‖h_u^(l−1) − h_u^(l)‖₁`.
pub fn layer_gaps(traj: &Trajectory) -> Result<Vec<f64>> {
    traj.require_steps()?;
    Ok(traj
        .layers
        .windows(2)
        .map(|w| {
            let diff = &w[1].values - &w[0].values;
            diff.row_iter()
                .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
                .fold(f64::INFINITY, f64::min)
        })
        .collect())
}

/// Smallest node displacement over all layers, the empirical `δ`.
pub fn min_layer_gap(traj: &Trajectory) -> Result<f64> {
    Ok(layer_gaps(traj)?.into_iter().fold(f64::INFINITY, f64::min))
}

#[derive(Debug, Clone, Serialize)]
pub struct LayerMetrics {
    pub l: usize,
    pub node_std: f64,
    pub min_gap: Option<f64>,
    pub rt_running_mean: Option<f64>,
}

/// One row per layer; layer 0 has no gap.
pub fn layer_metrics(traj: &Trajectory) -> Result<Vec<LayerMetrics>> {
    let (gaps, sig) = if traj.depth() == 0 {
        (Vec::new(), Vec::new())
    } else {
        (layer_gaps(traj)?, sigmoid_gaps(traj)?)
    };
    let mut running = 0.0;
    traj.layers
        .iter()
        .enumerate()
        .map(|(l, h)| {
            let (min_gap, rt_running_mean) = if l == 0 {
                (None, None)
            } else {
                running += sig[l - 1];
                (Some(gaps[l - 1]), Some(running / l as f64))
            };
            Ok(LayerMetrics {
                l,
                node_std: node_std_metric(h)?,
                min_gap,
                rt_running_mean,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::graph::GraphKind;
    use crate::homogeneous::{l1_distance, mixing_time, stationary_analytic};
    use crate::inhomogeneous::propagate_inhomogeneous;
    use crate::operators::{gcn_operator, lazy_walk, simple_rw, EdgeLogits};

    fn random_features(n: usize, f: usize, seed: u64) -> FeatureMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        FeatureMatrix::new(DMatrix::from_fn(n, f, |_, _| rng.random_range(-1.0..1.0)), 0).unwrap()
    }

    fn looped(kind: GraphKind, n: usize) -> Arc<Graph> {
        Arc::new(Graph::generate(kind, n, None, None).unwrap().with_self_loops().unwrap())
    }

    #[test]
    fn identity_propagation_is_constant() {
        let h0 = random_features(4, 3, 1);
        let traj = propagate_features(&StochasticMatrix::identity(4), &h0, 1).unwrap();
        assert_eq!(traj.layers()[1].values(), h0.values());
        assert_eq!(min_layer_gap(&traj).unwrap(), 0.0);
        assert!((rt_penalty(&traj, 0.3).unwrap() - 0.09).abs() < 1e-15);
    }

    #[test]
    fn random_walk_smooths_looped_triangle() {
        let g = looped(GraphKind::Complete, 3);
        let p = simple_rw(&g).unwrap();
        let traj = propagate_features(&p, &random_features(3, 4, 2), 200).unwrap();
        assert!(node_std_metric(traj.last()).unwrap() < 1e-8);
        let stds: Vec<f64> = traj.layers().iter().map(|h| node_std_metric(h).unwrap()).collect();
        assert!(stds.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }

    #[test]
    fn std_decreases_on_looped_cycle() {
        let g = looped(GraphKind::Cycle, 7);
        let p = simple_rw(&g).unwrap();
        let traj = propagate_features(&p, &random_features(7, 3, 5), 60).unwrap();
        let metrics = layer_metrics(&traj).unwrap();
        assert!(metrics.windows(2).all(|w| w[1].node_std <= w[0].node_std + 1e-12));
        assert!(metrics[0].min_gap.is_none());
        assert!(metrics[60].min_gap.unwrap() < metrics[1].min_gap.unwrap());
    }

    #[test]
    fn schedule_matches_distribution_propagation() {
        let g = Arc::new(Graph::generate(GraphKind::Complete, 4, None, None).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let logits: Vec<EdgeLogits> = (0..5).map(|_| EdgeLogits::random_directed(&g, 1.5, &mut rng)).collect();
        let schedule = ChainSchedule::attention(&g, logits.clone()).unwrap();
        let reversed = ChainSchedule::attention(&g, logits.into_iter().rev().collect()).unwrap();
        // Identity features through the reversed layers give P^(1)···P^(L),
        // whose row u is the chain started at u.
        let eye = FeatureMatrix::new(DMatrix::identity(4, 4), 0).unwrap();
        let traj = propagate_features(&reversed, &eye, 5).unwrap();
        for u in 0..4 {
            let chain = propagate_inhomogeneous(&Distribution::point_mass(4, u), &schedule).unwrap();
            assert!(l1_distance(&traj.last().row(u), chain[5].values()) < 1e-14);
        }
        assert!(matches!(
            propagate_features(&schedule, &eye, 6),
            Err(Error::TooShort { .. })
        ));
    }

    #[test]
    fn feature_view_round_trip() {
        let g = looped(GraphKind::Complete, 3);
        let h = random_features(3, 2, 9);
        let x = feature_view_transform(&g, &h).unwrap();
        assert_eq!(x.values().shape(), (2, 3));
        for u in 0..3 {
            for f in 0..2 {
                assert!((x.values()[(f, u)] - 3f64.sqrt() * h.values()[(u, f)]).abs() < 1e-15);
            }
        }
        let back = feature_view_inverse(&g, &x).unwrap();
        assert!((back.values() - h.values()).abs().max() < 1e-12);

        let plain = Graph::generate(GraphKind::Complete, 3, None, None).unwrap();
        assert!(matches!(
            feature_view_transform(&plain, &h),
            Err(Error::MissingSelfLoops)
        ));
        assert!(matches!(
            feature_view_transform(&g, &random_features(4, 2, 1)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn x_view_rows_reach_stationary() {
        let g = looped(GraphKind::Path, 4);
        let op = gcn_operator(&g).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let h0 = FeatureMatrix::new(DMatrix::from_fn(4, 3, |_, _| rng.random_range(0.1..1.0)), 0).unwrap();
        let traj = propagate_features(&op, &h0, 300).unwrap();
        let x = feature_view_transform(&g, traj.last()).unwrap();
        let pi = stationary_analytic(&g).unwrap();
        for row in x_view_distributions(&x).unwrap() {
            assert!(l1_distance(row.values(), pi.values()) < 1e-6);
        }
    }

    #[test]
    fn node_std_examples() {
        let eye = FeatureMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert!((node_std_metric(&eye).unwrap() - 0.5).abs() < 1e-15);
        let flat = FeatureMatrix::from_rows(&vec![vec![2.0, -1.0]; 3]).unwrap();
        assert_eq!(node_std_metric(&flat).unwrap(), 0.0);
        let single = FeatureMatrix::from_rows(&[vec![1.0]]).unwrap();
        assert!(matches!(node_std_metric(&single), Err(Error::TooFewNodes)));
    }

    #[test]
    fn rt_penalty_examples() {
        // K3, one step: node rows (0, 0, 0) → (1, 1, 1) and others fixed.
        let h0 = FeatureMatrix::from_rows(&[vec![0.0], vec![0.0], vec![0.0]]).unwrap();
        let h1 = FeatureMatrix::from_rows(&[vec![1.0], vec![0.0], vec![-1.0]]).unwrap();
        let traj = Trajectory::new(vec![h0, h1]).unwrap();
        let s1 = 1.0 / (1.0 + (-1.0f64).exp());
        let gap = ((s1 - 0.5) + (0.5 - (1.0 - s1))) / 3.0;
        let want = (gap - 0.3).powi(2);
        assert!((rt_penalty(&traj, 0.3).unwrap() - want).abs() < 1e-15);
        assert!(rt_penalty(&traj, gap).unwrap() < 1e-30);
        assert!(matches!(rt_penalty(&traj, 1.0), Err(Error::ThresholdOutOfRange(_))));
        assert!(matches!(rt_penalty(&traj, 0.0), Err(Error::ThresholdOutOfRange(_))));
        let short = Trajectory::new(vec![traj.layers()[0].clone()]).unwrap();
        assert!(matches!(rt_penalty(&short, 0.3), Err(Error::TooShort { .. })));
    }

    #[test]
    fn drifting_trajectory_gap() {
        let c = [0.5, -0.25];
        let layers = (0..6)
            .map(|l| {
                let rows: Vec<Vec<f64>> = (0..3)
                    .map(|u| vec![u as f64 + l as f64 * c[0], l as f64 * c[1]])
                    .collect();
                FeatureMatrix::from_rows(&rows).unwrap()
            })
            .collect();
        let traj = Trajectory::new(layers).unwrap();
        assert!((min_layer_gap(&traj).unwrap() - 0.75).abs() < 1e-14);
    }

    #[test]
    fn lazy_smooths_slower_on_fixtures() {
        for (kind, n, seed) in [
            (GraphKind::Complete, 4, 11),
            (GraphKind::Cycle, 6, 12),
            (GraphKind::Star, 5, 13),
        ] {
            let g = looped(kind, n);
            let h0 = random_features(n, 3, seed);
            let rw = propagate_features(&simple_rw(&g).unwrap(), &h0, 100).unwrap();
            let lazy = propagate_features(&lazy_walk(&g, 0.5).unwrap(), &h0, 100).unwrap();
            for (a, b) in lazy.layers().iter().zip(rw.layers()) {
                assert!(node_std_metric(a).unwrap() >= node_std_metric(b).unwrap() - 1e-12);
            }
        }
    }

    #[test]
    fn oversmoothing_within_ten_mixing_times() {
        let g = looped(GraphKind::Cycle, 5);
        let p = simple_rw(&g).unwrap();
        let pi = stationary_analytic(&g).unwrap();
        let t = mixing_time(&p, &pi, 1e-6, 10_000).unwrap();
        let traj = propagate_features(&p, &random_features(5, 3, 6), 10 * t).unwrap();
        assert!(node_std_metric(traj.last()).unwrap() <= 1e-6);
    }
}
