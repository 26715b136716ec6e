//! Undirected simple graphs with optional self-loops.
//!
//! A self-loop contributes exactly 1 to the degree of its node, so the
//! loop-augmented degree matrix is `D + I` and `D̃⁻¹Ã` stays row-stochastic.

use std::collections::{BTreeSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    /// Canonical `(u, v)` pairs with `u <= v`, sorted.
    edges: Vec<(usize, usize)>,
    /// Sorted neighbor lists; a loop puts `u` into its own list once.
    neighbors: Vec<Vec<usize>>,
    degrees: Vec<usize>,
    has_self_loops: bool,
}

impl Graph {
    /// Builds a graph from an edge list. Pairs are canonicalized, so `(1, 0)`
    /// after `(0, 1)` is a duplicate.
    pub fn new(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut set = BTreeSet::new();
        for &(a, b) in edges {
            for index in [a, b] {
                if index >= n {
                    return Err(Error::IndexOutOfRange { index, n });
                }
            }
            let pair = (a.min(b), a.max(b));
            if !set.insert(pair) {
                return Err(Error::DuplicateEdge(pair.0, pair.1));
            }
        }
        Ok(Self::from_canonical(n, set.into_iter().collect()))
    }

    fn from_canonical(n: usize, edges: Vec<(usize, usize)>) -> Self {
        let mut neighbors = vec![Vec::new(); n];
        for &(u, v) in &edges {
            neighbors[u].push(v);
            if u != v {
                neighbors[v].push(u);
            }
        }
        for list in &mut neighbors {
            list.sort_unstable();
        }
        let degrees: Vec<usize> = neighbors.iter().map(Vec::len).collect();
        let loops = edges.iter().filter(|(u, v)| u == v).count();
        let has_self_loops = n > 0 && loops == n;
        Graph {
            n,
            edges,
            neighbors,
            degrees,
            has_self_loops,
        }
    }

    /// Returns `Ã = A + I`: every node gains a loop and its degree grows by one.
    pub fn with_self_loops(&self) -> Result<Self> {
        if self.edges.iter().any(|(u, v)| u == v) {
            return Err(Error::AlreadyAugmented);
        }
        let mut edges = self.edges.clone();
        edges.extend((0..self.n).map(|u| (u, u)));
        edges.sort_unstable();
        Ok(Self::from_canonical(self.n, edges))
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    /// Number of edges, each loop counted once.
    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn loop_count(&self) -> usize {
        self.edges.iter().filter(|(u, v)| u == v).count()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, u: usize) -> &[usize] {
        &self.neighbors[u]
    }

    pub fn degree(&self, u: usize) -> usize {
        self.degrees[u]
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    pub fn degree_sum(&self) -> usize {
        self.degrees.iter().sum()
    }

    pub fn has_self_loops(&self) -> bool {
        self.has_self_loops
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.n && self.neighbors[u].binary_search(&v).is_ok()
    }

    /// Iterates every directed pair `(u, v)` with `v ∈ N(u)`, loops included.
    pub fn directed_edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |u| self.neighbors[u].iter().map(move |&v| (u, v)))
    }

    /// Indices of edges (into [`Graph::edges`]) incident to each node.
    pub fn incident_edges(&self) -> Vec<Vec<usize>> {
        let mut incident = vec![Vec::new(); self.n];
        for (i, &(u, v)) in self.edges.iter().enumerate() {
            incident[u].push(i);
            if u != v {
                incident[v].push(i);
            }
        }
        incident
    }

    pub fn first_isolated(&self) -> Option<usize> {
        self.degrees.iter().position(|&d| d == 0)
    }

    pub fn is_connected(&self) -> bool {
        if self.n == 0 {
            return true;
        }
        let mut seen = vec![false; self.n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        let mut reached = 1;
        while let Some(u) = queue.pop_front() {
            for &v in &self.neighbors[u] {
                if !seen[v] {
                    seen[v] = true;
                    reached += 1;
                    queue.push_back(v);
                }
            }
        }
        reached == self.n
    }

    /// Two-coloring test over every component. Any self-loop makes the
    /// graph non-bipartite.
    pub fn is_bipartite(&self) -> bool {
        if self.edges.iter().any(|(u, v)| u == v) {
            return false;
        }
        let mut color: Vec<Option<bool>> = vec![None; self.n];
        for start in 0..self.n {
            if color[start].is_some() {
                continue;
            }
            color[start] = Some(false);
            let mut queue = VecDeque::from([start]);
            while let Some(u) = queue.pop_front() {
                let cu = color[u].unwrap();
                for &v in &self.neighbors[u] {
                    match color[v] {
                        None => {
                            color[v] = Some(!cu);
                            queue.push_back(v);
                        }
                        Some(cv) if cv == cu => return false,
                        Some(_) => {}
                    }
                }
            }
        }
        true
    }

    /// Errors unless the graph is connected and non-bipartite, the standing
    /// hypothesis for irreducible aperiodic walks.
    pub fn require_ergodic(&self) -> Result<()> {
        if !self.is_connected() {
            return Err(Error::Disconnected);
        }
        if self.is_bipartite() {
            return Err(Error::PreconditionViolated(
                "graph is bipartite, so the walk is periodic (requires non-bipartite support)".into(),
            ));
        }
        Ok(())
    }

    pub fn generate(kind: GraphKind, n: usize, p: Option<f64>, seed: Option<u64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("graph needs at least one node".into()));
        }
        let edges: Vec<(usize, usize)> = match kind {
            GraphKind::Path => (1..n).map(|v| (v - 1, v)).collect(),
            GraphKind::Cycle => {
                let mut e: Vec<_> = (1..n).map(|v| (v - 1, v)).collect();
                if n >= 3 {
                    e.push((0, n - 1));
                }
                e
            }
            GraphKind::Complete => (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect(),
            GraphKind::Star => (1..n).map(|v| (0, v)).collect(),
            GraphKind::ErdosRenyi => {
                let p = p.ok_or(Error::MissingParameter("edge probability p"))?;
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::ProbabilityOutOfRange(p));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed.unwrap_or(0));
                let mut e = Vec::new();
                for u in 0..n {
                    for v in u + 1..n {
                        if rng.random_bool(p) {
                            e.push((u, v));
                        }
                    }
                }
                e
            }
        };
        Self::new(n, &edges)
    }

    /// Parses the whitespace-separated edge-list format: one `u v` pair per
    /// line, `#` comments, and an optional leading `n <count>` header.
    pub fn from_edge_list(text: &str) -> Result<Self> {
        let mut declared: Option<usize> = None;
        let mut edges = Vec::new();
        let mut seen_content = false;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let parse_err = |message: String| Error::Parse { line: line_no, message };
            if fields.first() == Some(&"n") {
                if seen_content {
                    return Err(parse_err("node-count header must precede edges".into()));
                }
                if fields.len() != 2 {
                    return Err(parse_err("expected `n <count>`".into()));
                }
                let count = fields[1]
                    .parse::<usize>()
                    .map_err(|e| parse_err(format!("bad node count `{}`: {e}", fields[1])))?;
                declared = Some(count);
                seen_content = true;
                continue;
            }
            seen_content = true;
            if fields.len() != 2 {
                return Err(parse_err(format!("expected two node indices, found {}", fields.len())));
            }
            let mut pair = [0usize; 2];
            for (slot, field) in pair.iter_mut().zip(&fields) {
                *slot = field
                    .parse()
                    .map_err(|e| parse_err(format!("bad node index `{field}`: {e}")))?;
            }
            edges.push((pair[0], pair[1]));
        }
        let inferred = edges.iter().map(|&(u, v)| u.max(v) + 1).max().unwrap_or(0);
        let n = declared.unwrap_or(inferred);
        if n == 0 {
            return Err(Error::Parse {
                line: 0,
                message: "edge list declares no nodes".into(),
            });
        }
        Self::new(n, &edges)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphKind {
    Cycle,
    Path,
    Complete,
    Star,
    ErdosRenyi,
}

impl std::str::FromStr for GraphKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cycle" => Ok(GraphKind::Cycle),
            "path" => Ok(GraphKind::Path),
            "complete" => Ok(GraphKind::Complete),
            "star" => Ok(GraphKind::Star),
            "erdos_renyi" | "er" => Ok(GraphKind::ErdosRenyi),
            other => Err(Error::InvalidArgument(format!("unknown graph kind `{other}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn builds_triangle_and_path() {
        let k3 = Graph::new(3, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        assert_eq!(k3.degrees(), &[2, 2, 2]);
        let p3 = Graph::new(3, &[(0, 1), (1, 2)]).unwrap();
        assert_eq!(p3.degrees(), &[1, 2, 1]);
    }

    #[test]
    fn rejects_duplicates_and_out_of_range() {
        assert!(matches!(
            Graph::new(2, &[(0, 1), (1, 0)]),
            Err(Error::DuplicateEdge(0, 1))
        ));
        assert!(matches!(
            Graph::new(2, &[(0, 2)]),
            Err(Error::IndexOutOfRange { index: 2, n: 2 })
        ));
    }

    #[test]
    fn self_loops_add_one_to_degree() {
        let k3 = Graph::generate(GraphKind::Complete, 3, None, None).unwrap();
        let k3l = k3.with_self_loops().unwrap();
        assert_eq!(k3l.degrees(), &[3, 3, 3]);
        assert_eq!(k3l.edge_count(), 6);
        assert!(k3l.has_self_loops());

        let single = Graph::new(1, &[]).unwrap().with_self_loops().unwrap();
        assert_eq!(single.degrees(), &[1]);

        assert!(matches!(k3l.with_self_loops(), Err(Error::AlreadyAugmented)));
    }

    #[test]
    fn connectivity_and_bipartiteness() {
        let k3 = Graph::generate(GraphKind::Complete, 3, None, None).unwrap();
        assert!(k3.is_connected());
        assert!(!k3.is_bipartite());
        let p3 = Graph::generate(GraphKind::Path, 3, None, None).unwrap();
        assert!(p3.is_connected());
        assert!(p3.is_bipartite());
        let split = Graph::new(4, &[(0, 1), (2, 3)]).unwrap();
        assert!(!split.is_connected());
    }

    #[test]
    fn generators() {
        let c5 = Graph::generate(GraphKind::Cycle, 5, None, None).unwrap();
        assert!(c5.degrees().iter().all(|&d| d == 2));
        assert_eq!(
            Graph::generate(GraphKind::Complete, 3, None, None).unwrap(),
            Graph::new(3, &[(0, 1), (0, 2), (1, 2)]).unwrap()
        );
        let a = Graph::generate(GraphKind::ErdosRenyi, 20, Some(0.3), Some(7)).unwrap();
        let b = Graph::generate(GraphKind::ErdosRenyi, 20, Some(0.3), Some(7)).unwrap();
        assert_eq!(a.edges(), b.edges());
        assert!(matches!(
            Graph::generate(GraphKind::ErdosRenyi, 20, None, Some(7)),
            Err(Error::MissingParameter(_))
        ));
    }

    #[test]
    fn edge_list_parsing() {
        let k3 = Graph::from_edge_list("0 1\n1 2\n0 2").unwrap();
        assert_eq!(k3.degrees(), &[2, 2, 2]);
        let g = Graph::from_edge_list("# comment\nn 4\n0 1").unwrap();
        assert_eq!(g.node_count(), 4);
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.degree(3), 0);
        let crlf = Graph::from_edge_list("0 1\r\n1 2\r\n").unwrap();
        assert_eq!(crlf.edge_count(), 2);
        assert!(matches!(
            Graph::from_edge_list("0 x"),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    fn degree_identity(g: &Graph) {
        let loops = g.loop_count();
        let plain = g.edge_count() - loops;
        assert_eq!(g.degree_sum(), 2 * plain + loops);
    }

    proptest! {
        #[test]
        fn degree_sum_identity(n in 1usize..30, p in 0.0f64..1.0, seed in any::<u64>(), loops in any::<bool>()) {
            let mut g = Graph::generate(GraphKind::ErdosRenyi, n, Some(p), Some(seed)).unwrap();
            if loops {
                g = g.with_self_loops().unwrap();
            }
            degree_identity(&g);
            if loops {
                prop_assert!(!g.is_bipartite());
            }
        }
    }
}
