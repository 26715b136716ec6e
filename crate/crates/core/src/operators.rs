//! One-step operators of message passing viewed as random walks.
//!
//! Every row-stochastic constructor here returns a [`StochasticMatrix`] whose
//! support is bounded by a graph. The residual-connection operator
//! `½P_GCN + ½I` is studied through its lazy-walk form, i.e.
//! `lazy_walk(g, 0.5)`.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::Graph;

/// Row-sum tolerance for [`StochasticMatrix`].
pub const ROW_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct StochasticMatrix {
    entries: DMatrix<f64>,
    support: Arc<Graph>,
}

impl StochasticMatrix {
    /// Validates nonnegativity, unit row sums and that every positive entry
    /// sits on an edge (or loop) of `support`.
    pub fn new(entries: DMatrix<f64>, support: Arc<Graph>) -> Result<Self> {
        let n = support.node_count();
        if entries.nrows() != n || entries.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: entries.nrows().max(entries.ncols()),
            });
        }
        for u in 0..n {
            let mut sum = 0.0;
            for v in 0..n {
                let x = entries[(u, v)];
                if x.is_nan() || x < 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "entry ({u}, {v}) = {x} is negative or not a number"
                    )));
                }
                if x > 0.0 && !support.has_edge(u, v) {
                    return Err(Error::InvalidArgument(format!(
                        "entry ({u}, {v}) is positive but ({u}, {v}) is not an edge"
                    )));
                }
                sum += x;
            }
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::InvalidArgument(format!("row {u} sums to {sum}")));
            }
        }
        Ok(StochasticMatrix { entries, support })
    }

    /// The identity chain on `n` states; its support is `n` isolated loops.
    pub fn identity(n: usize) -> Self {
        let loops: Vec<_> = (0..n).map(|u| (u, u)).collect();
        let support = Graph::new(n, &loops).expect("loops are valid edges");
        StochasticMatrix {
            entries: DMatrix::identity(n, n),
            support: Arc::new(support),
        }
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<f64> {
        self.entries
    }

    pub fn support(&self) -> &Arc<Graph> {
        &self.support
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.entries[(u, v)]
    }

    /// `C(P)`, see [`dobrushin_coefficient`].
    pub fn dobrushin(&self) -> f64 {
        dobrushin_coefficient(&self.entries)
    }
}

/// Dense symmetric (not row-stochastic) operator such as `P_GCN`.
#[derive(Debug, Clone)]
pub struct SymmetricOperator {
    entries: DMatrix<f64>,
}

impl SymmetricOperator {
    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }
}

fn require_no_isolated(g: &Graph) -> Result<()> {
    match g.first_isolated() {
        Some(u) => Err(Error::IsolatedNode(u)),
        None => Ok(()),
    }
}

fn rw_entries(g: &Graph) -> DMatrix<f64> {
    let n = g.node_count();
    let mut m = DMatrix::zeros(n, n);
    for (u, v) in g.directed_edges() {
        m[(u, v)] = 1.0 / g.degree(u) as f64;
    }
    m
}

/// Simple random walk `D⁻¹A`. On a loop-augmented graph this is `D̃⁻¹Ã`.
pub fn simple_rw(g: &Arc<Graph>) -> Result<StochasticMatrix> {
    require_no_isolated(g)?;
    Ok(StochasticMatrix {
        entries: rw_entries(g),
        support: Arc::clone(g),
    })
}

/// `P_GCN = D̃^{-1/2} Ã D̃^{-1/2}` on a graph that already carries self-loops.
pub fn gcn_operator(g: &Graph) -> Result<SymmetricOperator> {
    if !g.has_self_loops() {
        return Err(Error::MissingSelfLoops);
    }
    let n = g.node_count();
    let inv_sqrt: Vec<f64> = g.degrees().iter().map(|&d| 1.0 / (d as f64).sqrt()).collect();
    let mut m = DMatrix::zeros(n, n);
    for (u, v) in g.directed_edges() {
        m[(u, v)] = inv_sqrt[u] * inv_sqrt[v];
    }
    Ok(SymmetricOperator { entries: m })
}

/// Lazy walk `(1−γ)D⁻¹A + γI` for `γ ∈ (0, 1)`. The support gains loops
/// when the input graph has none.
pub fn lazy_walk(g: &Arc<Graph>, gamma: f64) -> Result<StochasticMatrix> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::GammaOutOfRange(gamma));
    }
    require_no_isolated(g)?;
    let n = g.node_count();
    let entries = rw_entries(g) * (1.0 - gamma) + DMatrix::identity(n, n) * gamma;
    Ok(StochasticMatrix {
        entries,
        support: with_loops_support(g),
    })
}

fn with_loops_support(g: &Arc<Graph>) -> Arc<Graph> {
    if g.has_self_loops() {
        return Arc::clone(g);
    }
    let mut edges: Vec<_> = g.edges().iter().copied().filter(|(u, v)| u != v).collect();
    edges.extend((0..g.node_count()).map(|u| (u, u)));
    Arc::new(Graph::new(g.node_count(), &edges).expect("adding missing loops keeps edges unique"))
}

/// Expected DropEdge transition `(I−Γ)D̃⁻¹Ã + Γ` with `Γ_uu = (1/|Ẽ|)^{deg̃(u)}`.
pub fn dropedge_expected(g: &Arc<Graph>) -> Result<StochasticMatrix> {
    require_droppable(g)?;
    dropedge_expected_with_probability(g, 1.0 / g.edge_count() as f64)
}

/// As [`dropedge_expected`] for a general per-edge drop probability, giving
/// `Γ_uu = p^{deg̃(u)}`.
pub fn dropedge_expected_with_probability(g: &Arc<Graph>, p: f64) -> Result<StochasticMatrix> {
    require_droppable(g)?;
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::ProbabilityOutOfRange(p));
    }
    let n = g.node_count();
    let mut m = rw_entries(g);
    for u in 0..n {
        let stay = p.powi(g.degree(u) as i32);
        for v in 0..n {
            m[(u, v)] *= 1.0 - stay;
        }
        m[(u, u)] += stay;
    }
    Ok(StochasticMatrix {
        entries: m,
        support: Arc::clone(g),
    })
}

pub(crate) fn require_droppable(g: &Graph) -> Result<()> {
    if !g.has_self_loops() {
        return Err(Error::MissingSelfLoops);
    }
    if g.edge_count() < 2 {
        return Err(Error::TooFewEdges(g.edge_count()));
    }
    Ok(())
}

/// Raw attention scores `φ(u, v)` keyed by directed edge.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EdgeLogits {
    values: BTreeMap<(usize, usize), f64>,
}

impl EdgeLogits {
    pub fn new() -> Self {
        Self::default()
    }

    /// The same score on every directed edge of `g`.
    pub fn constant(g: &Graph, value: f64) -> Self {
        Self::from_fn(g, |_, _| value)
    }

    pub fn from_fn(g: &Graph, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let values = g.directed_edges().map(|(u, v)| ((u, v), f(u, v))).collect();
        EdgeLogits { values }
    }

    /// One score per undirected edge, drawn uniformly from `[-scale, scale]`
    /// and shared by both directions.
    pub fn random_symmetric<R: Rng>(g: &Graph, scale: f64, rng: &mut R) -> Self {
        let mut logits = EdgeLogits::new();
        for &(u, v) in g.edges() {
            let x = rng.random_range(-scale..=scale);
            logits.set(u, v, x);
            logits.set(v, u, x);
        }
        logits
    }

    /// Independent scores per directed edge drawn from `[-scale, scale]`.
    pub fn random_directed<R: Rng>(g: &Graph, scale: f64, rng: &mut R) -> Self {
        Self::from_fn(g, |_, _| rng.random_range(-scale..=scale))
    }

    pub fn set(&mut self, u: usize, v: usize, value: f64) {
        self.values.insert((u, v), value);
    }

    pub fn get(&self, u: usize, v: usize) -> Option<f64> {
        self.values.get(&(u, v)).copied()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), f64)> + '_ {
        self.values.iter().map(|(&k, &v)| (k, v))
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.values.values_mut()
    }

    /// True when `φ(u, v) = φ(v, u)` for every stored pair.
    pub fn is_symmetric(&self) -> bool {
        self.values
            .iter()
            .all(|(&(u, v), &x)| self.get(v, u).is_some_and(|y| y == x))
    }

    /// Score for `(u, v)` or an error naming the missing pair.
    pub fn require(&self, u: usize, v: usize) -> Result<f64> {
        self.get(u, v).ok_or(Error::MissingLogit(u, v))
    }
}

fn softmax_rows(g: &Arc<Graph>, mut score: impl FnMut(usize, usize) -> Result<f64>) -> Result<StochasticMatrix> {
    require_no_isolated(g)?;
    let n = g.node_count();
    let mut m = DMatrix::zeros(n, n);
    for u in 0..n {
        let nbrs = g.neighbors(u);
        let scores = nbrs.iter().map(|&v| score(u, v)).collect::<Result<Vec<f64>>>()?;
        let top = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = scores.iter().map(|s| (s - top).exp()).collect();
        let total: f64 = weights.iter().sum();
        for (&v, w) in nbrs.iter().zip(weights) {
            m[(u, v)] = w / total;
        }
    }
    Ok(StochasticMatrix {
        entries: m,
        support: Arc::clone(g),
    })
}

/// Attention matrix: row `u` is the softmax of `φ(u, ·)` over `N(u)`.
pub fn attention_operator(g: &Arc<Graph>, logits: &EdgeLogits) -> Result<StochasticMatrix> {
    softmax_rows(g, |u, v| logits.require(u, v))
}

/// GEN-SoftMax aggregation weights `softmax_v(β·m_{u,v})` with the message
/// `m_{u,v} = ReLU(h̄_v) + ε`, where `h̄_v` is the mean of node `v`'s feature
/// row. Edge features are not modeled.
pub fn gen_softmax_operator(g: &Arc<Graph>, features: &DMatrix<f64>, beta: f64, eps: f64) -> Result<StochasticMatrix> {
    if beta.is_nan() || beta <= 0.0 {
        return Err(Error::BetaNotPositive(beta));
    }
    if features.nrows() != g.node_count() {
        return Err(Error::DimensionMismatch {
            expected: g.node_count(),
            found: features.nrows(),
        });
    }
    if features.ncols() == 0 {
        return Err(Error::DimensionMismatch { expected: 1, found: 0 });
    }
    let messages: Vec<f64> = features.row_iter().map(|row| row.mean().max(0.0) + eps).collect();
    softmax_rows(g, |_, v| Ok(beta * messages[v]))
}

/// Dobrushin contraction coefficient `½ max_{i,j} Σ_k |p(i,k) − p(j,k)|`.
pub fn dobrushin_coefficient(p: &DMatrix<f64>) -> f64 {
    let n = p.nrows();
    let mut best: f64 = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let d: f64 = (0..p.ncols()).map(|k| (p[(i, k)] - p[(j, k)]).abs()).sum();
            best = best.max(d);
        }
    }
    0.5 * best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::GraphKind;

    fn k3() -> Arc<Graph> {
        Arc::new(Graph::generate(GraphKind::Complete, 3, None, None).unwrap())
    }

    fn looped(g: &Graph) -> Arc<Graph> {
        Arc::new(g.with_self_loops().unwrap())
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn simple_rw_values() {
        let p = simple_rw(&k3()).unwrap();
        for u in 0..3 {
            for v in 0..3 {
                let want = if u == v { 0.0 } else { 0.5 };
                assert_eq!(p.get(u, v), want);
            }
        }
        let pl = simple_rw(&looped(&k3())).unwrap();
        assert!(pl.entries().iter().all(|&x| close(x, 1.0 / 3.0, 1e-15)));

        let star_with_isolated = Arc::new(Graph::new(5, &[(0, 1), (0, 2), (0, 3)]).unwrap());
        assert!(matches!(simple_rw(&star_with_isolated), Err(Error::IsolatedNode(4))));
    }

    #[test]
    fn gcn_values_and_similarity() {
        let k3l = looped(&k3());
        let gcn = gcn_operator(&k3l).unwrap();
        assert!(gcn.entries().iter().all(|&x| close(x, 1.0 / 3.0, 1e-15)));

        let p3l = looped(&Graph::generate(GraphKind::Path, 3, None, None).unwrap());
        let gcn = gcn_operator(&p3l).unwrap();
        assert!(close(gcn.entries()[(0, 1)], 1.0 / 6f64.sqrt(), 1e-15));
        assert!(close(gcn.entries()[(0, 1)], 0.408_248_290_463_863, 1e-12));

        // D̃^{1/2} P_GCN D̃^{-1/2} = P̃_rwᵀ
        let rw = simple_rw(&p3l).unwrap();
        let d: Vec<f64> = p3l.degrees().iter().map(|&x| x as f64).collect();
        for u in 0..3 {
            for v in 0..3 {
                let lhs = d[u].sqrt() * gcn.entries()[(u, v)] / d[v].sqrt();
                assert!(close(lhs, rw.get(v, u), 1e-12));
            }
        }
        assert!(matches!(gcn_operator(&k3()), Err(Error::MissingSelfLoops)));
    }

    #[test]
    fn lazy_walk_values() {
        let p = lazy_walk(&k3(), 0.5).unwrap();
        for u in 0..3 {
            for v in 0..3 {
                let want = if u == v { 0.5 } else { 0.25 };
                assert!(close(p.get(u, v), want, 1e-15));
            }
        }
        assert!(matches!(lazy_walk(&k3(), 0.0), Err(Error::GammaOutOfRange(_))));
        assert!(matches!(lazy_walk(&k3(), 1.0), Err(Error::GammaOutOfRange(_))));

        let c4 = Arc::new(Graph::generate(GraphKind::Cycle, 4, None, None).unwrap());
        let p = lazy_walk(&c4, 0.25).unwrap();
        assert!(close(p.get(0, 0), 0.25, 1e-15));
        assert!(close(p.get(0, 1), 0.375, 1e-15));
        assert!(close(p.get(0, 3), 0.375, 1e-15));
        assert_eq!(p.get(0, 2), 0.0);
        assert!(p.support().has_edge(0, 0));
    }

    #[test]
    fn dropedge_values() {
        let k3l = looped(&k3());
        let p = dropedge_expected(&k3l).unwrap();
        let gamma = (1.0f64 / 6.0).powi(3);
        assert!(close(gamma, 1.0 / 216.0, 1e-18));
        assert!(close(p.get(0, 1), (215.0 / 216.0) / 3.0, 1e-15));
        assert!(close(p.get(0, 0), (215.0 / 216.0) / 3.0 + 1.0 / 216.0, 1e-15));
        for row in p.entries().row_iter() {
            assert!((row.sum() - 1.0).abs() <= 1e-14);
        }

        let p3l = looped(&Graph::generate(GraphKind::Path, 3, None, None).unwrap());
        assert_eq!(p3l.edge_count(), 5);
        let p = dropedge_expected(&p3l).unwrap();
        let g0 = 0.2f64.powi(2);
        let g1 = 0.2f64.powi(3);
        assert!(close(p.get(0, 0), (1.0 - g0) / 2.0 + g0, 1e-15));
        assert!(close(p.get(1, 1), (1.0 - g1) / 3.0 + g1, 1e-15));
        assert!(close(p.get(1, 2), (1.0 - g1) / 3.0, 1e-15));

        let lone = Arc::new(Graph::new(1, &[]).unwrap().with_self_loops().unwrap());
        assert!(matches!(dropedge_expected(&lone), Err(Error::TooFewEdges(1))));
        assert!(matches!(dropedge_expected(&k3()), Err(Error::MissingSelfLoops)));
    }

    #[test]
    fn attention_values() {
        let g = k3();
        let uniform = attention_operator(&g, &EdgeLogits::constant(&g, 0.0)).unwrap();
        assert_eq!(uniform.entries(), simple_rw(&g).unwrap().entries());

        let mut logits = EdgeLogits::constant(&g, 0.0);
        logits.set(0, 1, 2f64.ln());
        let p = attention_operator(&g, &logits).unwrap();
        assert_eq!(p.get(0, 0), 0.0);
        assert!(close(p.get(0, 1), 2.0 / 3.0, 1e-15));
        assert!(close(p.get(0, 2), 1.0 / 3.0, 1e-15));

        let mut partial = EdgeLogits::constant(&g, 0.0);
        partial.values.remove(&(1, 2));
        assert!(matches!(
            attention_operator(&g, &partial),
            Err(Error::MissingLogit(1, 2))
        ));
    }

    #[test]
    fn gen_softmax_values() {
        let g = k3();
        let flat = DMatrix::from_element(3, 2, 0.7);
        let p = gen_softmax_operator(&g, &flat, 1.0, 1e-7).unwrap();
        let rw = simple_rw(&g).unwrap();
        assert!((p.entries() - rw.entries()).amax() <= 1e-15);

        let h = DMatrix::from_column_slice(3, 1, &[0.0, 1.0, 2.0]);
        let p = gen_softmax_operator(&g, &h, 1.0, 1e-7).unwrap();
        let e = std::f64::consts::E;
        assert!(close(p.get(0, 1), 1.0 / (1.0 + e), 1e-12));
        assert!(close(p.get(0, 2), e / (1.0 + e), 1e-12));

        assert!(matches!(
            gen_softmax_operator(&g, &h, 0.0, 1e-7),
            Err(Error::BetaNotPositive(_))
        ));
        let short = DMatrix::zeros(2, 1);
        assert!(matches!(
            gen_softmax_operator(&g, &short, 1.0, 1e-7),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn dobrushin_values() {
        assert_eq!(dobrushin_coefficient(&DMatrix::identity(3, 3)), 1.0);
        let same = DMatrix::from_fn(3, 3, |_, k| [0.2, 0.3, 0.5][k]);
        assert_eq!(dobrushin_coefficient(&same), 0.0);
        assert_eq!(simple_rw(&k3()).unwrap().dobrushin(), 0.5);
    }

    #[test]
    fn lazy_is_affine_in_rw() {
        let g = Arc::new(Graph::generate(GraphKind::ErdosRenyi, 12, Some(0.4), Some(3)).unwrap());
        if g.first_isolated().is_some() {
            return;
        }
        let rw = simple_rw(&g).unwrap();
        for gamma in [0.1, 0.5, 0.9] {
            let lazy = lazy_walk(&g, gamma).unwrap();
            let want = rw.entries() * (1.0 - gamma) + DMatrix::identity(12, 12) * gamma;
            assert!((lazy.entries() - want).amax() <= 1e-15);
        }
    }

    #[test]
    fn validation_rejects_off_support_mass() {
        let g = k3();
        let mut m = DMatrix::from_element(3, 3, 0.0);
        m[(0, 0)] = 1.0;
        m[(1, 0)] = 1.0;
        m[(2, 0)] = 1.0;
        assert!(StochasticMatrix::new(m, g).is_err());
    }
}
