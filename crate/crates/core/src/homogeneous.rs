//! Time-homogeneous chains: stationary distributions, total variation,
//! mixing times and the normalized-Laplacian closed forms.
//!
//! Norm conventions: `‖·‖₁` is the plain L1 sum and `‖·‖_TV = ½‖·‖₁`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::operators::StochasticMatrix;

const SUM_TOL: f64 = 1e-12;
/// Residual allowed for a distribution handed to the mixing-time machinery.
pub const STATIONARY_TOL: f64 = 1e-10;

/// Probability vector over the node set.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Distribution {
    values: Vec<f64>,
}

impl Distribution {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidDistribution("empty vector".into()));
        }
        if let Some(x) = values.iter().find(|x| x.is_nan() || **x < 0.0) {
            return Err(Error::InvalidDistribution(format!("entry {x} is negative")));
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > SUM_TOL {
            return Err(Error::InvalidDistribution(format!("entries sum to {sum}")));
        }
        Ok(Distribution { values })
    }

    /// Rescales a nonnegative vector with positive mass to sum to one.
    pub fn normalized(values: Vec<f64>) -> Result<Self> {
        let sum: f64 = values.iter().sum();
        if sum.is_nan() || sum <= 0.0 || values.iter().any(|x| x.is_nan() || *x < 0.0) {
            return Err(Error::InvalidDistribution(
                "cannot normalize a vector without positive mass".into(),
            ));
        }
        Ok(Distribution {
            values: values.into_iter().map(|x| x / sum).collect(),
        })
    }

    pub fn uniform(n: usize) -> Self {
        Distribution {
            values: vec![1.0 / n as f64; n],
        }
    }

    pub fn point_mass(n: usize, at: usize) -> Self {
        let mut values = vec![0.0; n];
        values[at] = 1.0;
        Distribution { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// One step of the chain: `μP`.
    pub fn step(&self, p: &DMatrix<f64>) -> Distribution {
        Distribution {
            values: left_multiply(&self.values, p),
        }
    }
}

pub(crate) fn left_multiply(mu: &[f64], p: &DMatrix<f64>) -> Vec<f64> {
    (0..p.ncols())
        .map(|v| mu.iter().enumerate().map(|(u, m)| m * p[(u, v)]).sum())
        .collect()
}

pub fn l1_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// `½ Σ|μᵢ − νᵢ|`.
pub fn tv_distance(mu: &Distribution, nu: &Distribution) -> Result<f64> {
    if mu.len() != nu.len() {
        return Err(Error::DimensionMismatch {
            expected: mu.len(),
            found: nu.len(),
        });
    }
    Ok(0.5 * l1_distance(&mu.values, &nu.values))
}

/// `π(u) = deg(u) / Σ_v deg(v)` for a connected graph.
pub fn stationary_analytic(g: &Graph) -> Result<Distribution> {
    if !g.is_connected() {
        return Err(Error::Disconnected);
    }
    let total = g.degree_sum() as f64;
    if total == 0.0 {
        return Err(Error::IsolatedNode(0));
    }
    Ok(Distribution {
        values: g.degrees().iter().map(|&d| d as f64 / total).collect(),
    })
}

#[derive(Debug, Clone, Copy)]
pub struct PowerOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PowerOptions {
    fn default() -> Self {
        PowerOptions {
            tol: 1e-12,
            max_iter: 100_000,
        }
    }
}

/// Left fixed point of `p` by power iteration from the uniform distribution.
/// The support must be connected and non-bipartite.
pub fn stationary_power(p: &StochasticMatrix, opts: PowerOptions) -> Result<Distribution> {
    p.support().require_ergodic()?;
    power_iterate(p.entries(), opts)
}

pub(crate) fn power_iterate(p: &DMatrix<f64>, opts: PowerOptions) -> Result<Distribution> {
    let n = p.nrows();
    let mut mu = vec![1.0 / n as f64; n];
    for _ in 0..opts.max_iter {
        let next = left_multiply(&mu, p);
        if l1_distance(&next, &mu) <= opts.tol {
            let sum: f64 = mu.iter().sum();
            return Ok(Distribution {
                values: mu.into_iter().map(|x| x / sum).collect(),
            });
        }
        mu = next;
    }
    Err(Error::NotConverged(opts.max_iter))
}

/// Left fixed point of an irreducible `p` from the linear system
/// `π(P − I) = 0`, `Σπ = 1`. Unlike power iteration it does not slow down
/// when `p` is close to periodic.
pub fn stationary_direct(p: &DMatrix<f64>) -> Result<Distribution> {
    let n = p.nrows();
    let mut a = p.transpose() - DMatrix::identity(n, n);
    a.row_mut(n - 1).fill(1.0);
    let mut b = DVector::zeros(n);
    b[n - 1] = 1.0;
    let x = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::PreconditionViolated("chain is not irreducible".into()))?;
    Distribution::normalized(x.iter().map(|v| v.max(0.0)).collect())
}

/// `‖πP − π‖₁`.
pub fn stationarity_residual(p: &DMatrix<f64>, pi: &Distribution) -> f64 {
    l1_distance(&left_multiply(&pi.values, p), &pi.values)
}

/// Worst-row total variation `max_i ‖P(i,·) − π‖_TV`.
pub fn worst_row_tv(power: &DMatrix<f64>, pi: &Distribution) -> f64 {
    power
        .row_iter()
        .map(|row| 0.5 * row.iter().zip(&pi.values).map(|(a, b)| (a - b).abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `d(t) = max_i ‖Pᵗ(i,·) − π‖_TV` for `t = 1..=t_max`.
pub fn d_curve(p: &StochasticMatrix, pi: &Distribution, t_max: usize) -> Result<Vec<f64>> {
    d_curve_dense(p.entries(), pi, t_max)
}

pub(crate) fn d_curve_dense(p: &DMatrix<f64>, pi: &Distribution, t_max: usize) -> Result<Vec<f64>> {
    if pi.len() != p.nrows() {
        return Err(Error::DimensionMismatch {
            expected: p.nrows(),
            found: pi.len(),
        });
    }
    let residual = stationarity_residual(p, pi);
    if residual > STATIONARY_TOL {
        return Err(Error::NotStationary(residual));
    }
    let mut power = p.clone();
    let mut curve = Vec::with_capacity(t_max);
    for t in 1..=t_max {
        if t > 1 {
            power = &power * p;
        }
        curve.push(worst_row_tv(&power, pi));
    }
    Ok(curve)
}

/// `t_mix(ε) = min{t ≥ 1 : d(t) ≤ ε}`.
pub fn mixing_time(p: &StochasticMatrix, pi: &Distribution, eps: f64, t_max: usize) -> Result<usize> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::EpsOutOfRange(eps));
    }
    let curve = d_curve(p, pi, t_max)?;
    first_below(&curve, eps).ok_or(Error::NotMixedBy(t_max))
}

/// First 1-based step at which a d-curve drops to `eps` or below.
pub fn first_below(curve: &[f64], eps: f64) -> Option<usize> {
    curve.iter().position(|&d| d <= eps).map(|i| i + 1)
}

/// Eigen-structure of `L = I − D^{-1/2} A D^{-1/2}`, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    eigenvalues: Vec<f64>,
    /// Column `k` is `φ_k`.
    eigenvectors: DMatrix<f64>,
    sqrt_degrees: Vec<f64>,
}

impl SpectralDecomposition {
    pub fn new(g: &Graph) -> Result<Self> {
        if !g.is_connected() {
            return Err(Error::Disconnected);
        }
        if let Some(u) = g.first_isolated() {
            return Err(Error::IsolatedNode(u));
        }
        let laplacian = normalized_laplacian(g);
        let eig = SymmetricEigen::new(laplacian);
        let mut order: Vec<usize> = (0..g.node_count()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let eigenvalues = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let mut eigenvectors = eig.eigenvectors.select_columns(&order);
        // φ₁ ∝ D^{1/2}𝟙 is taken with positive orientation.
        if eigenvectors.column(0).sum() < 0.0 {
            eigenvectors.column_mut(0).neg_mut();
        }
        let sqrt_degrees = g.degrees().iter().map(|&d| (d as f64).sqrt()).collect();
        Ok(SpectralDecomposition {
            eigenvalues,
            eigenvectors,
            sqrt_degrees,
        })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    /// Coordinates `a_k` of `μD^{-1/2}` in the eigenbasis.
    pub fn coefficients(&self, mu: &[f64]) -> Vec<f64> {
        let scaled = DVector::from_iterator(mu.len(), mu.iter().zip(&self.sqrt_degrees).map(|(m, s)| m / s));
        (self.eigenvectors.transpose() * scaled).iter().copied().collect()
    }

    /// `Σ_k (1 − (1−γ)λ_k)ˡ a_k φ_k D^{1/2}`; the `k = 1` term is `π`.
    pub fn propagate(&self, mu: &[f64], l: usize, gamma: f64) -> Vec<f64> {
        let a = self.coefficients(mu);
        let n = mu.len();
        let mut out = vec![0.0; n];
        for (k, (&lambda, ak)) in self.eigenvalues.iter().zip(&a).enumerate() {
            let factor = (1.0 - (1.0 - gamma) * lambda).powi(l as i32) * ak;
            for (u, o) in out.iter_mut().enumerate() {
                *o += factor * self.eigenvectors[(u, k)] * self.sqrt_degrees[u];
            }
        }
        out
    }
}

/// `I − D^{-1/2} A D^{-1/2}`, loops contributing a diagonal 1 to `A`.
pub fn normalized_laplacian(g: &Graph) -> DMatrix<f64> {
    let n = g.node_count();
    let inv_sqrt: Vec<f64> = g.degrees().iter().map(|&d| 1.0 / (d as f64).sqrt()).collect();
    let mut m = DMatrix::identity(n, n);
    for (u, v) in g.directed_edges() {
        m[(u, v)] -= inv_sqrt[u] * inv_sqrt[v];
    }
    m
}

/// Closed-form `μPˡ` for `P_rw` (`γ = 0`) or `P_lazy` (`0 < γ < 1`).
pub fn spectral_propagate(g: &Graph, mu: &Distribution, l: usize, gamma: f64) -> Result<Vec<f64>> {
    check_gamma(gamma)?;
    if mu.len() != g.node_count() {
        return Err(Error::DimensionMismatch {
            expected: g.node_count(),
            found: mu.len(),
        });
    }
    let spectral = SpectralDecomposition::new(g)?;
    if l == 0 {
        return Ok(mu.values.clone());
    }
    Ok(spectral.propagate(&mu.values, l, gamma))
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::GammaOutOfRange(gamma));
    }
    Ok(())
}

/// Asymptotic decay rate `α = max_{k≥2} |1 − (1−γ)λ_k|` of `d(t)`.
pub fn convergence_rate(g: &Graph, gamma: f64) -> Result<f64> {
    check_gamma(gamma)?;
    let spectral = SpectralDecomposition::new(g)?;
    Ok(rate_from_spectrum(spectral.eigenvalues(), gamma))
}

pub(crate) fn rate_from_spectrum(eigenvalues: &[f64], gamma: f64) -> f64 {
    eigenvalues
        .iter()
        .skip(1)
        .map(|&l| (1.0 - (1.0 - gamma) * l).abs())
        .fold(0.0, f64::max)
}

/// Second-largest eigenvalue modulus of an arbitrary stochastic matrix.
pub fn spectral_rate(p: &StochasticMatrix) -> f64 {
    let mut moduli: Vec<f64> = p
        .entries()
        .clone()
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .collect();
    moduli.sort_by(|a, b| b.total_cmp(a));
    moduli.get(1).copied().unwrap_or(0.0)
}

/// Least-squares slope of `ln d(t)` over the last half of the curve,
/// ignoring values below `1e-13`. `exp(slope)` estimates the decay rate.
pub fn fit_tail_log_slope(curve: &[f64]) -> Option<f64> {
    let start = curve.len() / 2;
    let points: Vec<(f64, f64)> = curve
        .iter()
        .enumerate()
        .skip(start)
        .filter(|(_, &d)| d >= 1e-13)
        .map(|(i, &d)| ((i + 1) as f64, d.ln()))
        .collect();
    if points.len() < 2 {
        return None;
    }
    let m = points.len() as f64;
    let tx = points.iter().map(|p| p.0).sum::<f64>() / m;
    let ty = points.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = points.iter().map(|(x, y)| (x - tx) * (y - ty)).sum();
    let sxx: f64 = points.iter().map(|(x, _)| (x - tx).powi(2)).sum();
    Some(sxy / sxx)
}

#[derive(Debug, Clone, Serialize)]
pub struct LazyStep {
    pub l: usize,
    pub lazy: f64,
    pub rw: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct LazyComparison {
    pub gamma: f64,
    /// Both operators fix `deg/Σdeg` within `1e-10`.
    pub same_stationary: bool,
    pub steps: Vec<LazyStep>,
}

impl LazyComparison {
    pub fn all_hold(&self) -> bool {
        self.steps.iter().all(|s| s.holds)
    }

    pub fn first_violation(&self) -> Option<usize> {
        self.steps.iter().find(|s| !s.holds).map(|s| s.l)
    }
}

/// Compares worst-row TV of `P_lazyˡ` against `P_rwˡ` for `l = 1..=l_max`,
/// with tolerance `1e-12` on the inequality `lazy ≥ rw`.
pub fn verify_lazy_slower(g: &std::sync::Arc<Graph>, gamma: f64, l_max: usize) -> Result<LazyComparison> {
    let pi = stationary_analytic(g)?;
    let rw = crate::operators::simple_rw(g)?;
    let lazy = crate::operators::lazy_walk(g, gamma)?;
    let same_stationary = stationarity_residual(rw.entries(), &pi) <= STATIONARY_TOL
        && stationarity_residual(lazy.entries(), &pi) <= STATIONARY_TOL;
    let rw_curve = d_curve(&rw, &pi, l_max)?;
    let lazy_curve = d_curve(&lazy, &pi, l_max)?;
    let steps = rw_curve
        .iter()
        .zip(&lazy_curve)
        .enumerate()
        .map(|(i, (&r, &z))| LazyStep {
            l: i + 1,
            lazy: z,
            rw: r,
            holds: z >= r - 1e-12,
        })
        .collect();
    Ok(LazyComparison {
        gamma,
        same_stationary,
        steps,
    })
}
