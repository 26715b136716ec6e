//! Gradient descent on raw attention logits with an optional RT penalty
//! that keeps consecutive layers apart.
//!
//! Gradients come from central finite differences, one pair of forward
//! passes per logit, evaluated in parallel.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::homogeneous::l1_distance;
use crate::inhomogeneous::ChainSchedule;
use crate::operators::EdgeLogits;
use crate::oversmoothing::{min_layer_gap, node_std_metric, propagate_features, rt_penalty, FeatureMatrix, Trajectory};

/// Central-difference step.
pub const FD_STEP: f64 = 1e-5;
/// Logits beyond this magnitude saturate the softmax in double precision;
/// training stops with `Diverged` once any logit leaves this range.
pub const MAX_LOGIT: f64 = 1e3;

/// One logit per directed edge (loops included) per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams {
    layers: Vec<EdgeLogits>,
}

impl AttentionParams {
    pub fn new(g: &Graph, layers: Vec<EdgeLogits>) -> Result<Self> {
        for logits in &layers {
            for (u, v) in g.directed_edges() {
                let x = logits.require(u, v)?;
                if !x.is_finite() {
                    return Err(Error::InvalidArgument(format!("logit ({u},{v}) is not finite")));
                }
            }
        }
        Ok(AttentionParams { layers })
    }

    pub fn zeros(g: &Graph, depth: usize) -> Self {
        AttentionParams {
            layers: vec![EdgeLogits::constant(g, 0.0); depth],
        }
    }

    pub fn random<R: Rng>(g: &Graph, depth: usize, scale: f64, rng: &mut R) -> Self {
        AttentionParams {
            layers: (0..depth).map(|_| EdgeLogits::random_directed(g, scale, rng)).collect(),
        }
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn layers(&self) -> &[EdgeLogits] {
        &self.layers
    }

    pub fn schedule(&self, g: &Arc<Graph>) -> Result<ChainSchedule> {
        ChainSchedule::attention(g, self.layers.clone())
    }

    fn flatten(&self) -> Vec<f64> {
        self.layers.iter().flat_map(|l| l.iter().map(|(_, x)| x)).collect()
    }

    fn with_flat(&self, flat: &[f64]) -> Self {
        let mut out = self.clone();
        let mut it = flat.iter();
        for logits in &mut out.layers {
            for x in logits.values_mut() {
                *x = *it.next().unwrap();
            }
        }
        out
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub rt_weight: f64,
    pub threshold: f64,
    pub seed: u64,
    pub depth: usize,
    /// Scale of the uniform initial logits.
    pub init_scale: f64,
    /// `(node, one-hot target)`.
    pub labels: Vec<(usize, Vec<f64>)>,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::ThresholdOutOfRange(self.threshold));
        }
        if !(self.rt_weight >= 0.0 && self.rt_weight.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "rt weight must be nonnegative, got {}",
                self.rt_weight
            )));
        }
        if self.labels.is_empty() {
            return Err(Error::NoLabels);
        }
        Ok(())
    }
}

/// Attention propagation `H^(l) = P_att^(l) H^(l−1)`.
pub fn forward(params: &AttentionParams, g: &Arc<Graph>, h0: &FeatureMatrix) -> Result<Trajectory> {
    if params.depth() == 0 {
        if h0.node_count() != g.node_count() {
            return Err(Error::DimensionMismatch {
                expected: g.node_count(),
                found: h0.node_count(),
            });
        }
        return Trajectory::new(vec![h0.clone()]);
    }
    propagate_features(&params.schedule(g)?, h0, params.depth())
}

/// Mean squared error of the labeled final-layer rows against their targets.
pub fn task_loss(traj: &Trajectory, labels: &[(usize, Vec<f64>)]) -> Result<f64> {
    if labels.is_empty() {
        return Err(Error::NoLabels);
    }
    let h = traj.last();
    let mut total = 0.0;
    let mut count = 0usize;
    for (u, target) in labels {
        if *u >= h.node_count() {
            return Err(Error::IndexOutOfRange {
                index: *u,
                n: h.node_count(),
            });
        }
        if target.len() != h.feature_count() {
            return Err(Error::DimensionMismatch {
                expected: h.feature_count(),
                found: target.len(),
            });
        }
        for (x, y) in h.row(*u).iter().zip(target) {
            total += (x - y).powi(2);
        }
        count += target.len();
    }
    Ok(total / count.max(1) as f64)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct LossTerms {
    pub task: f64,
    pub rt: f64,
    pub total: f64,
}

pub fn loss_terms(
    params: &AttentionParams,
    g: &Arc<Graph>,
    h0: &FeatureMatrix,
    config: &TrainConfig,
) -> Result<LossTerms> {
    let traj = forward(params, g, h0)?;
    let task = task_loss(&traj, &config.labels)?;
    let rt = if config.rt_weight == 0.0 {
        0.0
    } else {
        rt_penalty(&traj, config.threshold)?
    };
    Ok(LossTerms {
        task,
        rt,
        total: task + config.rt_weight * rt,
    })
}

/// `task + λ·RT`.
pub fn loss(params: &AttentionParams, g: &Arc<Graph>, h0: &FeatureMatrix, config: &TrainConfig) -> Result<f64> {
    Ok(loss_terms(params, g, h0, config)?.total)
}

/// Central-difference gradient with respect to every logit.
pub fn gradient(
    params: &AttentionParams,
    g: &Arc<Graph>,
    h0: &FeatureMatrix,
    config: &TrainConfig,
    step: f64,
) -> Result<Vec<f64>> {
    let flat = params.flatten();
    (0..flat.len())
        .into_par_iter()
        .map(|i| {
            let mut probe = flat.clone();
            probe[i] = flat[i] + step;
            let up = loss(&params.with_flat(&probe), g, h0, config)?;
            probe[i] = flat[i] - step;
            let down = loss(&params.with_flat(&probe), g, h0, config)?;
            Ok((up - down) / (2.0 * step))
        })
        .collect()
}

/// Central-difference derivative of the loss along `direction`.
pub fn directional_derivative(
    params: &AttentionParams,
    direction: &[f64],
    g: &Arc<Graph>,
    h0: &FeatureMatrix,
    config: &TrainConfig,
    step: f64,
) -> Result<f64> {
    let flat = params.flatten();
    if direction.len() != flat.len() {
        return Err(Error::DimensionMismatch {
            expected: flat.len(),
            found: direction.len(),
        });
    }
    let shifted = |s: f64| -> Vec<f64> { flat.iter().zip(direction).map(|(x, d)| x + s * d).collect() };
    let up = loss(&params.with_flat(&shifted(step)), g, h0, config)?;
    let down = loss(&params.with_flat(&shifted(-step)), g, h0, config)?;
    Ok((up - down) / (2.0 * step))
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainReport {
    pub loss_curve: Vec<f64>,
    pub task_loss_final: f64,
    pub rt_final: f64,
    pub min_layer_gap: f64,
    pub node_std_final: f64,
    /// `‖π^(l) − π^(l+1)‖₁` of the trained schedule.
    pub pi_drift: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: AttentionParams,
    pub report: TrainReport,
}

/// Plain gradient descent from seeded random logits.
pub fn train(g: &Arc<Graph>, h0: &FeatureMatrix, config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = AttentionParams::random(g, config.depth, config.init_scale, &mut rng);
    let mut loss_curve = Vec::with_capacity(config.epochs + 1);
    for epoch in 0..config.epochs {
        let current = loss(&params, g, h0, config)?;
        if !current.is_finite() {
            return Err(Error::Diverged(epoch));
        }
        loss_curve.push(current);
        let grad = gradient(&params, g, h0, config, FD_STEP)?;
        let flat: Vec<f64> = params
            .flatten()
            .iter()
            .zip(&grad)
            .map(|(x, d)| x - config.learning_rate * d)
            .collect();
        if flat.iter().any(|x| !x.is_finite() || x.abs() > MAX_LOGIT) {
            return Err(Error::Diverged(epoch + 1));
        }
        params = params.with_flat(&flat);
    }
    let terms = loss_terms(&params, g, h0, config)?;
    if !terms.total.is_finite() {
        return Err(Error::Diverged(config.epochs));
    }
    loss_curve.push(terms.total);

    let traj = forward(&params, g, h0)?;
    let pi_drift = if config.depth == 0 {
        Vec::new()
    } else {
        params
            .schedule(g)?
            .per_layer_stationary()?
            .windows(2)
            .map(|w| l1_distance(w[0].values(), w[1].values()))
            .collect()
    };
    let report = TrainReport {
        loss_curve,
        task_loss_final: terms.task,
        rt_final: rt_penalty(&traj, config.threshold).unwrap_or(f64::NAN),
        min_layer_gap: if config.depth == 0 { 0.0 } else { min_layer_gap(&traj)? },
        node_std_final: node_std_metric(traj.last())?,
        pi_drift,
    };
    Ok(TrainOutcome { params, report })
}

/// Two looped triangles joined by a bridge, with noisy community features
/// and two labeled nodes per community.
#[derive(Debug, Clone)]
pub struct TwoCommunityFixture {
    pub graph: Arc<Graph>,
    pub h0: FeatureMatrix,
    pub labels: Vec<(usize, Vec<f64>)>,
}

impl TwoCommunityFixture {
    pub fn new(seed: u64) -> Result<Self> {
        Self::build(seed, 3, 1.0, 1.0)
    }

    /// Two looped cliques of `size` nodes joined by one bridge; features
    /// `signal·onehot(community) + U(−noise, noise)`; the first two and the
    /// last two nodes are labeled.
    pub fn build(seed: u64, size: usize, signal: f64, noise: f64) -> Result<Self> {
        let n = 2 * size;
        let mut edges = Vec::new();
        for offset in [0, size] {
            for u in 0..size {
                for v in u + 1..size {
                    edges.push((offset + u, offset + v));
                }
            }
        }
        edges.push((size - 1, size));
        let graph = Arc::new(Graph::new(n, &edges)?.with_self_loops()?);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h0 = FeatureMatrix::new(
            DMatrix::from_fn(n, 2, |u, f| {
                let community = usize::from(u >= size);
                let base = if community == f { signal } else { 0.0 };
                base + rng.random_range(-noise..=noise)
            }),
            0,
        )?;
        let labels = vec![
            (0, vec![1.0, 0.0]),
            (1, vec![1.0, 0.0]),
            (n - 2, vec![0.0, 1.0]),
            (n - 1, vec![0.0, 1.0]),
        ];
        Ok(TwoCommunityFixture { graph, h0, labels })
    }

    /// Training settings used by the RT demonstration.
    pub fn config(&self, rt_weight: f64, seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: 50.0,
            epochs: 600,
            rt_weight,
            threshold: 0.3,
            seed,
            depth: 8,
            init_scale: 0.1,
            labels: self.labels.clone(),
        }
    }
}
