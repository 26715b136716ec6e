//! DropEdge as a Markov chain in a random environment.
//!
//! Each layer draws an environment: every edge of `Ẽ` (loops included) is
//! kept independently with probability `1 − p`, `p = 1/|Ẽ|` by default. The
//! walker moves uniformly over kept incident edges and stays put when all
//! of them were dropped. Averaging the random transition over environments
//! recovers `(I−Γ)D̃⁻¹Ã + Γ`.
//!
//! Sample `i` is drawn from its own ChaCha stream selected by `i` under the
//! base seed, so estimates do not depend on worker count or call order.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{Binomial, ChiSquared, ContinuousCDF, Discrete};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::operators::{dropedge_expected_with_probability, require_droppable, StochasticMatrix};

const CHUNK: usize = 2048;

#[derive(Debug, Clone)]
pub struct EnvironmentSpec {
    base_graph: Arc<Graph>,
    drop_probability: f64,
    base_seed: u64,
}

impl EnvironmentSpec {
    /// Environment over a loop-augmented graph with drop probability `1/|Ẽ|`.
    pub fn new(base_graph: Arc<Graph>, base_seed: u64) -> Result<Self> {
        require_droppable(&base_graph)?;
        let drop_probability = 1.0 / base_graph.edge_count() as f64;
        Ok(EnvironmentSpec {
            base_graph,
            drop_probability,
            base_seed,
        })
    }

    pub fn with_drop_probability(mut self, p: f64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::ProbabilityOutOfRange(p));
        }
        self.drop_probability = p;
        Ok(self)
    }

    pub fn graph(&self) -> &Arc<Graph> {
        &self.base_graph
    }

    pub fn drop_probability(&self) -> f64 {
        self.drop_probability
    }

    pub fn base_seed(&self) -> u64 {
        self.base_seed
    }

    /// Closed-form expectation of [`random_transition`] under this environment.
    pub fn analytic_expectation(&self) -> Result<StochasticMatrix> {
        dropedge_expected_with_probability(&self.base_graph, self.drop_probability)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnvironmentSample {
    /// Indexed like [`Graph::edges`].
    pub kept_mask: Vec<bool>,
    /// `ζ_u`, the number of kept edges incident to `u` (a kept loop counts once).
    pub realized_degrees: Vec<usize>,
}

impl EnvironmentSample {
    pub fn from_mask(g: &Graph, kept_mask: Vec<bool>) -> Self {
        let mut realized_degrees = vec![0; g.node_count()];
        for (&(u, v), &kept) in g.edges().iter().zip(&kept_mask) {
            if kept {
                realized_degrees[u] += 1;
                if u != v {
                    realized_degrees[v] += 1;
                }
            }
        }
        EnvironmentSample {
            kept_mask,
            realized_degrees,
        }
    }
}

fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Draws environment number `sample_index`.
pub fn sample_environment(spec: &EnvironmentSpec, sample_index: u64) -> EnvironmentSample {
    let mut rng = sample_rng(spec.base_seed, sample_index);
    let keep = 1.0 - spec.drop_probability;
    let mask = (0..spec.base_graph.edge_count())
        .map(|_| rng.random_bool(keep))
        .collect();
    EnvironmentSample::from_mask(&spec.base_graph, mask)
}

fn for_each_transition(g: &Graph, sample: &EnvironmentSample, mut f: impl FnMut(usize, usize, f64)) {
    for (&(u, v), &kept) in g.edges().iter().zip(&sample.kept_mask) {
        if kept {
            f(u, v, 1.0 / sample.realized_degrees[u] as f64);
            if u != v {
                f(v, u, 1.0 / sample.realized_degrees[v] as f64);
            }
        }
    }
    for (u, &z) in sample.realized_degrees.iter().enumerate() {
        if z == 0 {
            f(u, u, 1.0);
        }
    }
}

/// `P(Θ) = D_Θ⁻¹Θ` with the stay rule for nodes whose edges were all dropped.
pub fn random_transition(g: &Arc<Graph>, sample: &EnvironmentSample) -> StochasticMatrix {
    let n = g.node_count();
    let mut m = DMatrix::zeros(n, n);
    for_each_transition(g, sample, |u, v, w| m[(u, v)] += w);
    StochasticMatrix::new(m, Arc::clone(g)).expect("random transition is row-stochastic on Ẽ")
}

#[derive(Debug, Clone)]
pub struct MonteCarloEstimate {
    pub mean: DMatrix<f64>,
    pub std_error: DMatrix<f64>,
    pub samples: usize,
}

#[derive(Clone)]
struct Moments {
    sum: DMatrix<f64>,
    sum_sq: DMatrix<f64>,
}

impl Moments {
    fn zeros(n: usize) -> Self {
        Moments {
            sum: DMatrix::zeros(n, n),
            sum_sq: DMatrix::zeros(n, n),
        }
    }

    fn merge(mut self, other: &Moments) -> Self {
        self.sum += &other.sum;
        self.sum_sq += &other.sum_sq;
        self
    }
}

fn accumulate(spec: &EnvironmentSpec, range: std::ops::Range<u64>) -> Moments {
    let g = &spec.base_graph;
    let mut acc = Moments::zeros(g.node_count());
    for index in range {
        let sample = sample_environment(spec, index);
        for_each_transition(g, &sample, |u, v, w| {
            acc.sum[(u, v)] += w;
            acc.sum_sq[(u, v)] += w * w;
        });
    }
    acc
}

fn pairwise(parts: &[Moments]) -> Moments {
    match parts.len() {
        0 => unreachable!("at least one chunk"),
        1 => parts[0].clone(),
        len => {
            let (left, right) = parts.split_at(len / 2);
            pairwise(left).merge(&pairwise(right))
        }
    }
}

fn estimate_from(spec: &EnvironmentSpec, num_samples: usize) -> MonteCarloEstimate {
    let m = num_samples as u64;
    let chunks: Vec<Moments> = (0..m.div_ceil(CHUNK as u64))
        .into_par_iter()
        .map(|c| {
            let start = c * CHUNK as u64;
            accumulate(spec, start..(start + CHUNK as u64).min(m))
        })
        .collect();
    let total = pairwise(&chunks);
    let count = num_samples as f64;
    let mean = &total.sum / count;
    let std_error = DMatrix::from_fn(mean.nrows(), mean.ncols(), |i, j| {
        if num_samples < 2 {
            return 0.0;
        }
        let mu = mean[(i, j)];
        let var = ((total.sum_sq[(i, j)] / count - mu * mu) * count / (count - 1.0)).max(0.0);
        (var / count).sqrt()
    });
    MonteCarloEstimate {
        mean,
        std_error,
        samples: num_samples,
    }
}

/// Entrywise sample mean and standard error of [`random_transition`] over
/// samples `0..num_samples`.
pub fn monte_carlo_expected(spec: &EnvironmentSpec, num_samples: usize) -> Result<MonteCarloEstimate> {
    if num_samples < 100 {
        return Err(Error::TooFewSamples {
            min: 100,
            got: num_samples,
        });
    }
    Ok(estimate_from(spec, num_samples))
}

#[derive(Debug, Clone, Serialize)]
pub struct Discrepancy {
    pub max_abs_error: f64,
    /// Largest `|estimate − analytic| / SE` over entries with positive SE.
    /// Entries with zero SE must agree exactly or the ratio is infinite.
    pub max_se_ratio: f64,
}

pub fn compare(estimate: &MonteCarloEstimate, analytic: &DMatrix<f64>) -> Discrepancy {
    let mut max_abs_error: f64 = 0.0;
    let mut max_se_ratio: f64 = 0.0;
    for ((&e, &a), &se) in estimate.mean.iter().zip(analytic.iter()).zip(estimate.std_error.iter()) {
        let diff = (e - a).abs();
        max_abs_error = max_abs_error.max(diff);
        let ratio = if se > 0.0 {
            diff / se
        } else if diff <= 1e-12 {
            0.0
        } else {
            f64::INFINITY
        };
        max_se_ratio = max_se_ratio.max(ratio);
    }
    Discrepancy {
        max_abs_error,
        max_se_ratio,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct NodeChiSquare {
    pub node: usize,
    pub degree: usize,
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    pub passed: bool,
}

/// Chi-square goodness of fit of each `ζ_u` against
/// `Binomial(deg̃(u), 1 − p)`. Low-expectation bins are pooled so that every
/// bin expects at least 5 counts.
pub fn degree_law_check(spec: &EnvironmentSpec, num_samples: usize, significance: f64) -> Result<Vec<NodeChiSquare>> {
    degree_law_check_with(spec, num_samples, significance, |i| sample_environment(spec, i))
}

/// As [`degree_law_check`] with an arbitrary environment sampler.
pub fn degree_law_check_with<F>(
    spec: &EnvironmentSpec,
    num_samples: usize,
    significance: f64,
    sampler: F,
) -> Result<Vec<NodeChiSquare>>
where
    F: Fn(u64) -> EnvironmentSample + Sync,
{
    if num_samples < 1000 {
        return Err(Error::TooFewSamples {
            min: 1000,
            got: num_samples,
        });
    }
    let g = &spec.base_graph;
    let n = g.node_count();
    let counts: Vec<Vec<u64>> = (0..num_samples as u64)
        .into_par_iter()
        .fold(
            || (0..n).map(|u| vec![0u64; g.degree(u) + 1]).collect::<Vec<_>>(),
            |mut acc, i| {
                let sample = sampler(i);
                for (u, &z) in sample.realized_degrees.iter().enumerate() {
                    acc[u][z] += 1;
                }
                acc
            },
        )
        .reduce(
            || (0..n).map(|u| vec![0u64; g.degree(u) + 1]).collect::<Vec<_>>(),
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    for (p, q) in x.iter_mut().zip(y) {
                        *p += q;
                    }
                }
                a
            },
        );
    let keep = 1.0 - spec.drop_probability;
    let total = num_samples as f64;
    (0..n)
        .map(|u| {
            let degree = g.degree(u);
            let law = Binomial::new(keep, degree as u64).map_err(|e| Error::InvalidArgument(e.to_string()))?;
            let expected: Vec<f64> = (0..=degree as u64).map(|k| total * law.pmf(k)).collect();
            let observed: Vec<f64> = counts[u].iter().map(|&c| c as f64).collect();
            let (statistic, dof) = pooled_chi_square(&observed, &expected);
            let p_value = if dof == 0 {
                1.0
            } else {
                let chi = ChiSquared::new(dof as f64).map_err(|e| Error::InvalidArgument(e.to_string()))?;
                1.0 - chi.cdf(statistic)
            };
            Ok(NodeChiSquare {
                node: u,
                degree,
                statistic,
                dof,
                p_value,
                passed: p_value >= significance,
            })
        })
        .collect()
}

fn pooled_chi_square(observed: &[f64], expected: &[f64]) -> (f64, usize) {
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let (mut o_acc, mut e_acc) = (0.0, 0.0);
    for (&o, &e) in observed.iter().zip(expected) {
        o_acc += o;
        e_acc += e;
        if e_acc >= 5.0 {
            bins.push((o_acc, e_acc));
            o_acc = 0.0;
            e_acc = 0.0;
        }
    }
    if e_acc > 0.0 || o_acc > 0.0 {
        match bins.last_mut() {
            Some(last) => {
                last.0 += o_acc;
                last.1 += e_acc;
            }
            None => bins.push((o_acc, e_acc)),
        }
    }
    let statistic = bins.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    (statistic, bins.len().saturating_sub(1))
}
