//! Time-inhomogeneous chains `μ_n = μ_{n−1} P^(n)`: per-layer stationary
//! distributions, the Dobrushin–Isaacson–Madsen conditions and the
//! necessary condition for a limiting distribution.

use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::homogeneous::{
    l1_distance, power_iterate, stationarity_residual, stationary_direct, Distribution, PowerOptions,
};
use crate::operators::{attention_operator, dobrushin_coefficient, EdgeLogits, StochasticMatrix};

/// Gap below which a trajectory tail counts as converged.
pub const CONVERGED_GAP: f64 = 1e-9;
/// Proven lower bound above which a trajectory counts as non-convergent.
pub const NON_CONVERGED_BOUND: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct ChainSchedule {
    layers: Vec<StochasticMatrix>,
    logits: Vec<Option<EdgeLogits>>,
}

impl ChainSchedule {
    pub fn new(layers: Vec<StochasticMatrix>) -> Result<Self> {
        let first = layers.first().ok_or(Error::TooShort { min: 1, got: 0 })?;
        for layer in &layers[1..] {
            if layer.dim() != first.dim() {
                return Err(Error::DimensionMismatch {
                    expected: first.dim(),
                    found: layer.dim(),
                });
            }
            if layer.support() != first.support() {
                return Err(Error::InvalidArgument("all layers must share one support graph".into()));
            }
        }
        let logits = vec![None; layers.len()];
        Ok(ChainSchedule { layers, logits })
    }

    /// One attention layer per logit assignment.
    pub fn attention(g: &Arc<Graph>, logits: Vec<EdgeLogits>) -> Result<Self> {
        let layers = logits
            .iter()
            .map(|l| attention_operator(g, l))
            .collect::<Result<Vec<_>>>()?;
        let mut schedule = Self::new(layers)?;
        schedule.logits = logits.into_iter().map(Some).collect();
        Ok(schedule)
    }

    /// The same operator at every layer.
    pub fn constant(p: &StochasticMatrix, depth: usize) -> Result<Self> {
        Self::new(vec![p.clone(); depth])
    }

    /// Attention layers alternating between boosting the first and the last
    /// edge of `g` by `strength` (symmetric logits, zero elsewhere), so
    /// consecutive stationary distributions stay apart.
    pub fn oscillating(g: &Arc<Graph>, depth: usize, strength: f64) -> Result<Self> {
        let plain: Vec<_> = g.edges().iter().copied().filter(|(u, v)| u != v).collect();
        let (a, b) = match (plain.first(), plain.last()) {
            (Some(&a), Some(&b)) if a != b => (a, b),
            _ => return Err(Error::InvalidArgument("need two distinct edges".into())),
        };
        let logits = (1..=depth)
            .map(|l| {
                let (x, y) = if l % 2 == 1 { a } else { b };
                EdgeLogits::from_fn(g, |u, v| {
                    if (u, v) == (x, y) || (v, u) == (x, y) {
                        strength
                    } else {
                        0.0
                    }
                })
            })
            .collect();
        Self::attention(g, logits)
    }

    /// Attention layers whose boost on the first edge decays geometrically,
    /// `strength · ratio^l`, toward uniform attention.
    pub fn decaying(g: &Arc<Graph>, depth: usize, strength: f64, ratio: f64) -> Result<Self> {
        let (x, y) = *g
            .edges()
            .iter()
            .find(|(u, v)| u != v)
            .ok_or_else(|| Error::InvalidArgument("graph has no edges".into()))?;
        let logits = (1..=depth)
            .map(|l| {
                let s = strength * ratio.powi(l as i32);
                EdgeLogits::from_fn(g, |u, v| if (u, v) == (x, y) || (v, u) == (x, y) { s } else { 0.0 })
            })
            .collect();
        Self::attention(g, logits)
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.layers[0].dim()
    }

    pub fn support(&self) -> &Arc<Graph> {
        self.layers[0].support()
    }

    /// Layer `l`, 1-based.
    pub fn layer(&self, l: usize) -> &StochasticMatrix {
        &self.layers[l - 1]
    }

    pub fn layers(&self) -> &[StochasticMatrix] {
        &self.layers
    }

    pub fn logits(&self, l: usize) -> Option<&EdgeLogits> {
        self.logits[l - 1].as_ref()
    }

    /// Stationary distribution of layer `l` (1-based) treated as a
    /// homogeneous chain. Attention layers use the weighted-degree closed
    /// form when their logits are symmetric and a direct linear solve
    /// otherwise; other layers use power iteration.
    pub fn layer_stationary(&self, l: usize) -> Result<Distribution> {
        let p = self.layer(l);
        match self.logits(l) {
            Some(logits) if logits.is_symmetric() => attention_stationary(p, logits),
            Some(_) => {
                p.support().require_ergodic()?;
                stationary_direct(p.entries())
            }
            None => {
                p.support().require_ergodic()?;
                power_iterate(p.entries(), PowerOptions::default())
            }
        }
    }

    pub fn per_layer_stationary(&self) -> Result<Vec<Distribution>> {
        (1..=self.len())
            .into_par_iter()
            .map(|l| self.layer_stationary(l))
            .collect()
    }
}

/// Weighted-degree distribution `π(u) ∝ Σ_{z∈N(u)} exp φ(u, z)`.
///
/// It is a fixed point of the attention matrix exactly when the logits are
/// symmetric, `φ(u, v) = φ(v, u)`; see [`fixed_point_residual`].
pub fn attention_stationary(p_att: &StochasticMatrix, logits: &EdgeLogits) -> Result<Distribution> {
    let g = p_att.support();
    g.require_ergodic()?;
    let mut scores = Vec::new();
    for (u, v) in g.directed_edges() {
        scores.push((u, logits.require(u, v)?));
    }
    let top = scores.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
    let mut weighted = vec![0.0; g.node_count()];
    for (u, s) in scores {
        weighted[u] += (s - top).exp();
    }
    Distribution::normalized(weighted)
}

/// `‖πP − π‖₁`.
pub fn fixed_point_residual(p: &StochasticMatrix, pi: &Distribution) -> f64 {
    stationarity_residual(p.entries(), pi)
}

/// `μ_0, μ_1 = μ_0P^(1), …, μ_L`.
pub fn propagate_inhomogeneous(mu0: &Distribution, schedule: &ChainSchedule) -> Result<Vec<Distribution>> {
    propagate_through(mu0, schedule.layers())
}

/// Same as [`propagate_inhomogeneous`] over a bare layer slice, which may be
/// empty.
pub fn propagate_through(mu0: &Distribution, layers: &[StochasticMatrix]) -> Result<Vec<Distribution>> {
    let mut out = Vec::with_capacity(layers.len() + 1);
    out.push(mu0.clone());
    for p in layers {
        if p.dim() != mu0.len() {
            return Err(Error::DimensionMismatch {
                expected: p.dim(),
                found: mu0.len(),
            });
        }
        let next = out.last().unwrap().step(p.entries());
        out.push(next);
    }
    Ok(out)
}

/// L1 gaps `‖μ_n − μ_{n−1}‖₁`, `n = 1..`.
pub fn cauchy_gap_series(trajectory: &[Distribution]) -> Result<Vec<f64>> {
    if trajectory.len() < 2 {
        return Err(Error::TooShort {
            min: 2,
            got: trajectory.len(),
        });
    }
    Ok(trajectory
        .windows(2)
        .map(|w| l1_distance(w[1].values(), w[0].values()))
        .collect())
}

/// True when the last `tail` gaps all fall below `tol`.
pub fn gaps_converged(gaps: &[f64], tail: usize, tol: f64) -> bool {
    let start = gaps.len().saturating_sub(tail.max(1));
    gaps[start..].iter().all(|&g| g < tol)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Converged,
    NonConverged,
    Undetermined,
}

#[derive(Debug, Clone, Serialize)]
pub struct DobrushinSample {
    pub k: usize,
    pub n: usize,
    pub coefficient: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DimVerdicts {
    pub stationary_exists: bool,
    pub drift_summable: bool,
    pub dobrushin_vanishes: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct DimReport {
    pub per_layer_pi: Vec<Distribution>,
    /// `‖π^(l) − π^(l+1)‖₁` for `l = 1..L−1`.
    pub drifts: Vec<f64>,
    pub drift_partial_sums: Vec<f64>,
    pub dobrushin_products: Vec<DobrushinSample>,
    /// Trajectory gaps from a point mass at node 0.
    pub gaps: Vec<f64>,
    /// `(1 − C(P^(n)))·‖π^(n) − μ_{n−1}‖₁`, a proven lower bound on gap `n`.
    pub gap_lower_bounds: Vec<f64>,
    pub verdicts: DimVerdicts,
    pub classification: Classification,
    /// Final trajectory state when the classification is converged.
    pub limit_estimate: Option<Distribution>,
}

/// Evaluates the DIM conditions on a finite schedule and classifies the
/// trajectory started from a point mass at node 0.
///
/// The drift series counts as summable when its last `window` terms add up
/// to at most `drift_tol`; the Dobrushin condition holds when
/// `C(P^(k)···P^(L)) ≤ drift_tol` for `k ∈ {1, L/2}`. Classification uses
/// the last `window` gaps: converged below `1e-9`, non-converged when the
/// proven lower bound stays above `1e-6`, undetermined otherwise.
pub fn dim_check(schedule: &ChainSchedule, drift_tol: f64, window: usize) -> Result<DimReport> {
    let depth = schedule.len();
    let window = window.max(1);
    let per_layer_pi = schedule.per_layer_stationary()?;
    let stationary_exists = per_layer_pi
        .iter()
        .zip(schedule.layers())
        .all(|(pi, p)| fixed_point_residual(p, pi) <= 1e-10);

    let drifts: Vec<f64> = per_layer_pi
        .windows(2)
        .map(|w| l1_distance(w[0].values(), w[1].values()))
        .collect();
    let drift_partial_sums: Vec<f64> = drifts
        .iter()
        .scan(0.0, |acc, d| {
            *acc += d;
            Some(*acc)
        })
        .collect();
    let tail_drift: f64 = drifts.iter().rev().take(window).sum();
    let drift_summable = tail_drift <= drift_tol;

    let mut starts = vec![1, (depth / 2).max(1)];
    starts.dedup();
    let dobrushin_products: Vec<DobrushinSample> = starts
        .par_iter()
        .flat_map_iter(|&k| product_coefficients(schedule, k))
        .collect();
    let dobrushin_vanishes = starts.iter().all(|&k| {
        dobrushin_products
            .iter()
            .rfind(|s| s.k == k)
            .is_some_and(|s| s.coefficient <= drift_tol)
    });

    let trajectory = propagate_inhomogeneous(&Distribution::point_mass(schedule.dim(), 0), schedule)?;
    let gaps = cauchy_gap_series(&trajectory)?;
    let gap_lower_bounds = proven_gap_bounds(schedule, &per_layer_pi, &trajectory);
    let tail_start = depth.saturating_sub(window);
    let classification = if gaps_converged(&gaps, window, CONVERGED_GAP) {
        Classification::Converged
    } else if gap_lower_bounds[tail_start..].iter().all(|&b| b > NON_CONVERGED_BOUND) {
        Classification::NonConverged
    } else {
        Classification::Undetermined
    };
    let limit_estimate = (classification == Classification::Converged).then(|| trajectory.last().unwrap().clone());

    Ok(DimReport {
        per_layer_pi,
        drifts,
        drift_partial_sums,
        dobrushin_products,
        gaps,
        gap_lower_bounds,
        verdicts: DimVerdicts {
            stationary_exists,
            drift_summable,
            dobrushin_vanishes,
        },
        classification,
        limit_estimate,
    })
}

/// `C(P^(k)···P^(n))` for `n = k..=L`.
pub fn product_coefficients(schedule: &ChainSchedule, k: usize) -> Vec<DobrushinSample> {
    let mut product: Option<DMatrix<f64>> = None;
    (k..=schedule.len())
        .map(|n| {
            let p = schedule.layer(n).entries();
            let next = match product.take() {
                None => p.clone(),
                Some(acc) => acc * p,
            };
            let coefficient = dobrushin_coefficient(&next);
            product = Some(next);
            DobrushinSample { k, n, coefficient }
        })
        .collect()
}

fn proven_gap_bounds(schedule: &ChainSchedule, per_layer_pi: &[Distribution], trajectory: &[Distribution]) -> Vec<f64> {
    (1..=schedule.len())
        .map(|n| {
            let c = schedule.layer(n).dobrushin();
            (1.0 - c) * l1_distance(per_layer_pi[n - 1].values(), trajectory[n - 1].values())
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct NecessaryConditionReport {
    /// `C(P^(n))` per layer; all below 1.
    pub dobrushin: Vec<f64>,
    pub pi_hat: Distribution,
    pub trajectory_tail_norm: f64,
    pub stationary_tail_norm: f64,
    pub trajectory_converges: bool,
    pub stationaries_converge: bool,
    /// Trajectory convergence implies convergence of the per-layer
    /// stationary distributions.
    pub consistent: bool,
    pub gaps: Vec<f64>,
    /// `min_l ‖π^(l) − π^(l+1)‖₁`.
    pub min_stationary_drift: f64,
    /// `(1 − C(P^(n)))·min_stationary_drift` per layer.
    pub drift_bounds: Vec<f64>,
    /// `(1 − C(P^(n)))·‖π^(n) − μ_{n−1}‖₁` per layer, always a valid lower
    /// bound on gap `n`.
    pub proven_bounds: Vec<f64>,
    /// Stationary drift stays above `tol` over the whole schedule.
    pub contrapositive_applies: bool,
    /// When it applies: every gap exceeds its drift bound and the
    /// trajectory is not convergent.
    pub contrapositive_holds: bool,
}

/// Checks the necessary condition for a limiting distribution on a finite
/// schedule: if `μ_n` settles, the per-layer `π^(n)` settle to the same
/// limit. `π̂` is the mean of `μ_n` over the last `tail_window` steps.
pub fn necessary_condition_check(
    schedule: &ChainSchedule,
    mu0: &Distribution,
    tail_window: usize,
    tol: f64,
) -> Result<NecessaryConditionReport> {
    let dobrushin: Vec<f64> = schedule.layers().iter().map(StochasticMatrix::dobrushin).collect();
    if let Some((i, &c)) = dobrushin.iter().enumerate().find(|(_, &c)| c >= 1.0) {
        return Err(Error::HypothesisViolated {
            layer: i + 1,
            coefficient: c,
        });
    }
    let per_layer_pi = schedule.per_layer_stationary()?;
    let trajectory = propagate_inhomogeneous(mu0, schedule)?;
    let gaps = cauchy_gap_series(&trajectory)?;

    let depth = schedule.len();
    let window = tail_window.clamp(1, depth);
    let tail = &trajectory[depth + 1 - window..];
    let mut mean = vec![0.0; schedule.dim()];
    for mu in tail {
        for (m, x) in mean.iter_mut().zip(mu.values()) {
            *m += x / window as f64;
        }
    }
    let pi_hat = Distribution::normalized(mean)?;
    let trajectory_tail_norm = tail
        .iter()
        .map(|mu| l1_distance(mu.values(), pi_hat.values()))
        .fold(0.0, f64::max);
    let stationary_tail_norm = per_layer_pi[depth - window..]
        .iter()
        .map(|pi| l1_distance(pi.values(), pi_hat.values()))
        .fold(0.0, f64::max);
    let trajectory_converges = trajectory_tail_norm < tol;
    let stationaries_converge = stationary_tail_norm < tol;

    let min_stationary_drift = per_layer_pi
        .windows(2)
        .map(|w| l1_distance(w[0].values(), w[1].values()))
        .fold(f64::INFINITY, f64::min);
    let min_stationary_drift = if min_stationary_drift.is_finite() {
        min_stationary_drift
    } else {
        0.0
    };
    let drift_bounds: Vec<f64> = dobrushin.iter().map(|c| (1.0 - c) * min_stationary_drift).collect();
    let proven_bounds = proven_gap_bounds(schedule, &per_layer_pi, &trajectory);
    let contrapositive_applies = min_stationary_drift > tol;
    let contrapositive_holds = !contrapositive_applies
        || (!trajectory_converges && gaps.iter().zip(&drift_bounds).all(|(g, b)| *g > b - 1e-12));

    Ok(NecessaryConditionReport {
        dobrushin,
        pi_hat,
        trajectory_tail_norm,
        stationary_tail_norm,
        trajectory_converges,
        stationaries_converge,
        consistent: !trajectory_converges || stationaries_converge,
        gaps,
        min_stationary_drift,
        drift_bounds,
        proven_bounds,
        contrapositive_applies,
        contrapositive_holds,
    })
}
