//! Sparse undirected graphs, random graph samplers, Galton-Watson trees,
//! rooted balls and boundary growth diagnostics.
//!
//! Vertex identities are dense integers assigned at sampling time. Every
//! sub-extraction (balls, induced subgraphs) keeps an explicit map back to
//! the parent identities, because downstream noise coupling is keyed on the
//! global identity of a vertex.

use crate::rng;
use crate::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

/// Default cap on sampled tree sizes; Galton-Watson populations with
/// supercritical offspring can explode.
pub const DEFAULT_VERTEX_CAP: usize = 10_000_000;

/// Sorted-adjacency undirected graph with dense vertex ids `0..n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    adjacency: Vec<Vec<usize>>,
    allows_loops: bool,
}

impl Graph {
    /// Build from an edge list. Neighbor lists are sorted and deduplicated;
    /// the result is always symmetric.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Graph> {
        let mut adjacency = vec![Vec::new(); n];
        let mut allows_loops = false;
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::InvalidParameter(format!(
                    "edge ({u}, {v}) out of range for n = {n}"
                )));
            }
            if u == v {
                allows_loops = true;
                adjacency[u].push(u);
            } else {
                adjacency[u].push(v);
                adjacency[v].push(u);
            }
        }
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup();
        }
        Ok(Graph {
            adjacency,
            allows_loops,
        })
    }

    pub fn empty(n: usize) -> Graph {
        Graph {
            adjacency: vec![Vec::new(); n],
            allows_loops: false,
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn allows_loops(&self) -> bool {
        self.allows_loops
    }

    pub fn contains_edge(&self, u: usize, v: usize) -> bool {
        self.adjacency[u].binary_search(&v).is_ok()
    }

    /// Number of undirected edges.
    pub fn edge_count(&self) -> usize {
        let twice: usize = self.adjacency.iter().map(Vec::len).sum();
        twice / 2
    }

    /// Edges as `(u, v)` with `u <= v`, in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.edge_count());
        for (u, list) in self.adjacency.iter().enumerate() {
            for &v in list {
                if u <= v {
                    out.push((u, v));
                }
            }
        }
        out
    }

    /// BFS distances from `root`; `usize::MAX` marks unreachable vertices.
    pub fn bfs_distances(&self, root: usize) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.vertex_count()];
        let mut queue = std::collections::VecDeque::new();
        dist[root] = 0;
        queue.push_back(root);
        while let Some(v) = queue.pop_front() {
            for &u in &self.adjacency[v] {
                if dist[u] == usize::MAX {
                    dist[u] = dist[v] + 1;
                    queue.push_back(u);
                }
            }
        }
        dist
    }

    /// Exhaustive symmetry check (test support; O(sum of degrees)).
    pub fn is_symmetric(&self) -> bool {
        for (v, list) in self.adjacency.iter().enumerate() {
            for &u in list {
                if u != v && !self.contains_edge(u, v) {
                    return false;
                }
            }
        }
        true
    }

    pub fn to_json(&self) -> GraphJson {
        GraphJson {
            n: self.vertex_count(),
            edges: self.edges(),
            root: None,
            depth: None,
        }
    }
}

/// Serialization schema: `{"n": int, "edges": [[u,v],...], "root": int?, "depth": [int]?}`.
/// The edge list is lexicographically sorted for byte reproducibility.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct GraphJson {
    pub n: usize,
    pub edges: Vec<(usize, usize)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub root: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depth: Option<Vec<usize>>,
}

impl GraphJson {
    pub fn into_graph(self) -> Result<Graph> {
        Graph::from_edges(self.n, &self.edges)
    }
}

/// Offspring distribution for branching-process samplers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum OffspringLaw {
    Poisson { mean: f64 },
    Binomial { n: u64, p: f64 },
    Deterministic { children: usize },
    Empirical { pmf: Vec<f64> },
}

impl OffspringLaw {
    pub fn validate(&self) -> Result<()> {
        match self {
            OffspringLaw::Poisson { mean } => {
                if !(mean.is_finite() && *mean > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "Poisson mean must be positive, got {mean}"
                    )));
                }
            }
            OffspringLaw::Binomial { n, p } => {
                if *n == 0 {
                    return Err(Error::InvalidParameter("Binomial n must be positive".into()));
                }
                if !(0.0..=1.0).contains(p) {
                    return Err(Error::InvalidParameter(format!(
                        "Binomial p must lie in [0,1], got {p}"
                    )));
                }
            }
            OffspringLaw::Deterministic { .. } => {}
            OffspringLaw::Empirical { pmf } => {
                if pmf.is_empty() {
                    return Err(Error::InvalidParameter("empty pmf".into()));
                }
                if pmf.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                    return Err(Error::InvalidParameter("pmf entries outside [0,1]".into()));
                }
                let total: f64 = pmf.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidParameter(format!(
                        "pmf sums to {total}, expected 1 within 1e-12"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        match self {
            OffspringLaw::Poisson { mean } => *mean,
            OffspringLaw::Binomial { n, p } => *n as f64 * p,
            OffspringLaw::Deterministic { children } => *children as f64,
            OffspringLaw::Empirical { pmf } => {
                pmf.iter().enumerate().map(|(k, &p)| k as f64 * p).sum()
            }
        }
    }

    /// Probability mass vector, truncated so the discarded tail has mass at
    /// most `tail` and renormalized to sum exactly to 1.
    pub fn pmf(&self, tail: f64) -> Vec<f64> {
        let mut pmf = match self {
            OffspringLaw::Poisson { mean } => {
                let mut out = Vec::new();
                let mut term = (-mean).exp();
                let mut cum = 0.0;
                let mut k = 0usize;
                while cum < 1.0 - tail && k < 10_000 {
                    out.push(term);
                    cum += term;
                    k += 1;
                    term *= mean / k as f64;
                }
                out
            }
            OffspringLaw::Binomial { n, p } => {
                let n = *n as usize;
                let mut out = vec![0.0; n + 1];
                // recurrence: P(k+1) = P(k) * (n-k)/(k+1) * p/(1-p)
                if *p == 1.0 {
                    out[n] = 1.0;
                } else {
                    out[0] = (1.0 - p).powi(n as i32);
                    for k in 0..n {
                        out[k + 1] = out[k] * (n - k) as f64 / (k + 1) as f64 * p / (1.0 - p);
                    }
                }
                out
            }
            OffspringLaw::Deterministic { children } => {
                let mut out = vec![0.0; children + 1];
                out[*children] = 1.0;
                out
            }
            OffspringLaw::Empirical { pmf } => pmf.clone(),
        };
        let total: f64 = pmf.iter().sum();
        for p in &mut pmf {
            *p /= total;
        }
        pmf
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> usize {
        match self {
            OffspringLaw::Poisson { mean } => {
                let dist = rand_distr::Poisson::new(*mean).expect("validated");
                dist.sample(rng) as usize
            }
            OffspringLaw::Binomial { n, p } => {
                let dist = rand_distr::Binomial::new(*n, *p).expect("validated");
                dist.sample(rng) as usize
            }
            OffspringLaw::Deterministic { children } => *children,
            OffspringLaw::Empirical { pmf } => {
                let u: f64 = rng.random();
                let mut cum = 0.0;
                for (k, &p) in pmf.iter().enumerate() {
                    cum += p;
                    if u < cum {
                        return k;
                    }
                }
                pmf.len() - 1
            }
        }
    }
}

/// A sampled rooted tree with per-vertex generation numbers.
#[derive(Clone, Debug)]
pub struct RootedTree {
    pub graph: Graph,
    pub root: usize,
    pub depth_of: Vec<usize>,
    pub truncated_at: usize,
}

impl RootedTree {
    /// Vertices at exact distance `h` from the root, ascending.
    pub fn level(&self, h: usize) -> Vec<usize> {
        (0..self.graph.vertex_count())
            .filter(|&v| self.depth_of[v] == h)
            .collect()
    }

    /// Number of generations actually present (max depth).
    pub fn survival_depth(&self) -> usize {
        self.depth_of.iter().copied().max().unwrap_or(0)
    }

    pub fn to_json(&self) -> GraphJson {
        GraphJson {
            n: self.graph.vertex_count(),
            edges: self.graph.edges(),
            root: Some(self.root),
            depth: Some(self.depth_of.clone()),
        }
    }
}

/// Erdos-Renyi graph `G(n, p)`: each unordered pair is an edge independently
/// with probability `p`. Uses geometric skips over the lexicographic pair
/// order, so sampling is O(n + |E|).
pub fn sample_erdos_renyi(n: usize, p: f64, seed: u64) -> Result<Graph> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!(
            "edge probability must lie in [0,1], got {p}"
        )));
    }
    if p == 0.0 {
        return Ok(Graph::empty(n));
    }
    let mut edges = Vec::new();
    if p == 1.0 {
        for u in 0..n {
            for v in (u + 1)..n {
                edges.push((u, v));
            }
        }
        return Graph::from_edges(n, &edges);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let log_q = (1.0 - p).ln();
    let (mut u, mut v) = (0usize, 0usize);
    loop {
        let draw: f64 = rng.random();
        let skip = ((1.0 - draw).ln() / log_q).floor() as usize;
        // advance skip + 1 positions in the row-major upper triangle
        let mut step = skip + 1;
        while step > 0 {
            let row_left = n - 1 - v;
            if step <= row_left {
                v += step;
                step = 0;
            } else {
                step -= row_left;
                u += 1;
                v = u;
                if u >= n - 1 {
                    return Graph::from_edges(n, &edges);
                }
            }
        }
        edges.push((u, v));
    }
}

/// Random `d`-regular simple graph via the configuration model, restarting
/// whenever the pairing produces a loop or multi-edge.
pub fn sample_random_regular(n: usize, d: usize, seed: u64) -> Result<Graph> {
    if d < 3 {
        return Err(Error::InvalidParameter(format!(
            "degree must be at least 3, got {d}"
        )));
    }
    if d >= n {
        return Err(Error::InvalidParameter(format!(
            "degree {d} must be smaller than n = {n}"
        )));
    }
    if (n * d) % 2 != 0 {
        return Err(Error::InvalidParity { n, d });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stubs: Vec<usize> = Vec::with_capacity(n * d);
    'attempt: for _ in 0..100_000 {
        stubs.clear();
        for v in 0..n {
            stubs.extend(std::iter::repeat(v).take(d));
        }
        // Fisher-Yates
        for i in (1..stubs.len()).rev() {
            let j = rng.random_range(0..=i);
            stubs.swap(i, j);
        }
        let mut adjacency = vec![Vec::with_capacity(d); n];
        for pair in stubs.chunks_exact(2) {
            let (a, b) = (pair[0], pair[1]);
            if a == b {
                continue 'attempt;
            }
            if adjacency[a].contains(&b) {
                continue 'attempt;
            }
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        return Ok(Graph {
            adjacency,
            allows_loops: false,
        });
    }
    Err(Error::InvalidParameter(format!(
        "configuration model failed to produce a simple {d}-regular graph on {n} vertices"
    )))
}

/// Cycle graph `C_n`.
pub fn sample_cycle(n: usize) -> Result<Graph> {
    if n < 3 {
        return Err(Error::InvalidParameter(format!(
            "cycle needs at least 3 vertices, got {n}"
        )));
    }
    let edges: Vec<(usize, usize)> = (0..n).map(|v| (v, (v + 1) % n)).collect();
    Graph::from_edges(n, &edges)
}

/// Galton-Watson tree truncated at `max_depth` generations. The root draws
/// its offspring count from `root_law`, every other vertex from `law`.
pub fn sample_gw_tree(
    root_law: &OffspringLaw,
    law: &OffspringLaw,
    max_depth: usize,
    seed: u64,
) -> Result<RootedTree> {
    sample_gw_tree_with_cap(root_law, law, max_depth, seed, DEFAULT_VERTEX_CAP)
}

/// As [`sample_gw_tree`] with an explicit vertex cap.
pub fn sample_gw_tree_with_cap(
    root_law: &OffspringLaw,
    law: &OffspringLaw,
    max_depth: usize,
    seed: u64,
    cap: usize,
) -> Result<RootedTree> {
    root_law.validate()?;
    law.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut parents: Vec<usize> = vec![0]; // parent of root is itself
    let mut depth_of: Vec<usize> = vec![0];
    let mut frontier: Vec<usize> = vec![0];
    for depth in 0..max_depth {
        let mut next = Vec::new();
        for &v in &frontier {
            let children = if depth == 0 && v == 0 {
                root_law.sample(&mut rng)
            } else {
                law.sample(&mut rng)
            };
            for _ in 0..children {
                let id = depth_of.len();
                if id >= cap {
                    return Err(Error::VertexCapExceeded { cap });
                }
                parents.push(v);
                depth_of.push(depth + 1);
                next.push(id);
            }
        }
        if next.is_empty() {
            break;
        }
        frontier = next;
    }
    let edges: Vec<(usize, usize)> = (1..parents.len()).map(|v| (parents[v], v)).collect();
    let graph = Graph::from_edges(depth_of.len(), &edges)?;
    Ok(RootedTree {
        graph,
        root: 0,
        depth_of,
        truncated_at: max_depth,
    })
}

/// Size-biased shift of an offspring law:
/// `P_hat(k) = (k+1) P(k+1) / sum_i i P(i)`.
///
/// This is the non-root offspring law of the unimodular Galton-Watson tree
/// associated with degree distribution `P`.
pub fn size_biased_shift(law: &OffspringLaw) -> Result<OffspringLaw> {
    law.validate()?;
    if let OffspringLaw::Deterministic { children } = law {
        if *children == 0 {
            return Err(Error::ZeroMeanOffspring);
        }
        return Ok(OffspringLaw::Deterministic {
            children: children - 1,
        });
    }
    let pmf = law.pmf(1e-12);
    let mean: f64 = pmf.iter().enumerate().map(|(k, &p)| k as f64 * p).sum();
    if mean <= 0.0 {
        return Err(Error::ZeroMeanOffspring);
    }
    let mut shifted: Vec<f64> = (0..pmf.len().saturating_sub(1))
        .map(|k| (k + 1) as f64 * pmf[k + 1] / mean)
        .collect();
    if shifted.is_empty() {
        return Err(Error::ZeroMeanOffspring);
    }
    let total: f64 = shifted.iter().sum();
    for p in &mut shifted {
        *p /= total;
    }
    Ok(OffspringLaw::Empirical { pmf: shifted })
}

/// An induced rooted ball with its identity map back to the parent graph.
///
/// Local ids are assigned in increasing parent-id order, so sorted local
/// adjacency corresponds to sorted parent adjacency. The boundary is
/// computed against the parent graph: vertices of the ball adjacent to at
/// least one vertex outside it.
#[derive(Clone, Debug)]
pub struct RootedBall {
    pub graph: Graph,
    pub root: usize,
    pub boundary: Vec<usize>,
    pub to_parent: Vec<usize>,
    pub radius: usize,
}

/// Ball of radius `r` around `root`: the subgraph induced by vertices within
/// graph distance `r`.
pub fn ball(g: &Graph, root: usize, r: usize) -> RootedBall {
    let n = g.vertex_count();
    let mut dist = vec![usize::MAX; n];
    let mut members = Vec::new();
    let mut queue = std::collections::VecDeque::new();
    dist[root] = 0;
    queue.push_back(root);
    members.push(root);
    while let Some(v) = queue.pop_front() {
        if dist[v] == r {
            continue;
        }
        for &u in g.neighbors(v) {
            if dist[u] == usize::MAX {
                dist[u] = dist[v] + 1;
                members.push(u);
                queue.push_back(u);
            }
        }
    }
    members.sort_unstable();
    let mut local_of = vec![usize::MAX; n];
    for (local, &parent) in members.iter().enumerate() {
        local_of[parent] = local;
    }
    let mut adjacency = vec![Vec::new(); members.len()];
    let mut boundary = Vec::new();
    for (local, &parent) in members.iter().enumerate() {
        let mut outside = false;
        for &u in g.neighbors(parent) {
            if local_of[u] != usize::MAX {
                adjacency[local].push(local_of[u]);
            } else {
                outside = true;
            }
        }
        if outside {
            boundary.push(local);
        }
    }
    // parent adjacency is already sorted and the id map is monotone
    RootedBall {
        graph: Graph {
            adjacency,
            allows_loops: g.allows_loops,
        },
        root: local_of[root],
        boundary,
        to_parent: members,
        radius: r,
    }
}

/// Boundary sizes `|d(G,o)_r|` for `r = 1..=r_max`, plus the smallest rate
/// `a` with `|d(G,o)_r| <= a * exp(a r)` for all measured `r`, found by
/// bisection.
#[derive(Clone, Debug)]
pub struct BoundaryGrowthProfile {
    pub boundary_sizes: Vec<usize>,
    pub envelope_rate: f64,
}

pub fn boundary_growth_profile(g: &Graph, root: usize, r_max: usize) -> BoundaryGrowthProfile {
    assert!(r_max >= 1, "r_max must be at least 1");
    let dist = g.bfs_distances(root);
    let mut boundary_sizes = Vec::with_capacity(r_max);
    for r in 1..=r_max {
        let count = (0..g.vertex_count())
            .filter(|&v| {
                dist[v] != usize::MAX
                    && dist[v] <= r
                    && g.neighbors(v)
                        .iter()
                        .any(|&u| dist[u] == usize::MAX || dist[u] > r)
            })
            .count();
        boundary_sizes.push(count);
    }
    let feasible = |a: f64| -> bool {
        boundary_sizes
            .iter()
            .enumerate()
            .all(|(i, &b)| (b as f64) <= a * (a * (i + 1) as f64).exp())
    };
    let (mut lo, mut hi) = (1e-6f64, 64.0f64);
    let rate = if feasible(lo) {
        lo
    } else if !feasible(hi) {
        hi
    } else {
        while hi - lo > 1e-9 {
            let mid = 0.5 * (lo + hi);
            if feasible(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    };
    BoundaryGrowthProfile {
        boundary_sizes,
        envelope_rate: rate,
    }
}

/// One seeded uniform vertex choice (used for root sampling in experiments).
pub fn uniform_vertex(n: usize, key: u64) -> usize {
    (rng::unit(rng::mix64(key)) * n as f64) as usize % n
}
