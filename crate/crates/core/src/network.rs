//! Marked networks: a graph with positive edge weights, per-vertex media
//! variables and initial conditions; i.i.d. mark attachment; rooted balls
//! with inherited marks; the local metric on rooted networks; and empirical
//! neighborhood measures.

use crate::graph::{ball, Graph, RootedBall};
use crate::iso;
use crate::measure::EmpiricalMeasure;
use crate::rng;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Default ball-size cap for isomorphism-based operations.
pub const DEFAULT_BALL_CAP: usize = 200;

/// A graph with edge weights `mu_e > 0`, media variables `omega_v` and
/// initial conditions `theta0_v`. Weights are stored aligned with the sorted
/// adjacency lists, so lookups and symmetric iteration are cheap.
#[derive(Clone, Debug, PartialEq)]
pub struct MarkedNetwork {
    pub graph: Graph,
    weights: Vec<Vec<f64>>,
    pub media: Vec<f64>,
    pub initial: Vec<f64>,
}

impl MarkedNetwork {
    /// Assemble from an explicit symmetric edge-weight list.
    pub fn from_parts(
        graph: Graph,
        edge_weights: &[(usize, usize, f64)],
        media: Vec<f64>,
        initial: Vec<f64>,
    ) -> Result<MarkedNetwork> {
        let n = graph.vertex_count();
        if media.len() != n || initial.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "marks for {} vertices on a graph with {n}",
                media.len()
            )));
        }
        let mut weights: Vec<Vec<f64>> = (0..n)
            .map(|v| vec![f64::NAN; graph.degree(v)])
            .collect();
        for &(u, v, w) in edge_weights {
            if !graph.contains_edge(u, v) {
                return Err(Error::InvalidParameter(format!(
                    "weight given for non-edge ({u}, {v})"
                )));
            }
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "edge weight must be positive and finite, got {w} on ({u}, {v})"
                )));
            }
            let iu = graph.neighbors(u).binary_search(&v).unwrap();
            let iv = graph.neighbors(v).binary_search(&u).unwrap();
            weights[u][iu] = w;
            weights[v][iv] = w;
        }
        if weights.iter().flatten().any(|w| w.is_nan()) {
            return Err(Error::InvalidParameter(
                "every edge needs a weight".into(),
            ));
        }
        Ok(MarkedNetwork {
            graph,
            weights,
            media,
            initial,
        })
    }

    /// Unit-weight network with the given vertex marks.
    pub fn unit_weights(graph: Graph, media: Vec<f64>, initial: Vec<f64>) -> Result<MarkedNetwork> {
        let edges: Vec<(usize, usize, f64)> =
            graph.edges().into_iter().map(|(u, v)| (u, v, 1.0)).collect();
        MarkedNetwork::from_parts(graph, &edges, media, initial)
    }

    pub fn vertex_count(&self) -> usize {
        self.graph.vertex_count()
    }

    /// Weight of the edge `{u, v}`; 0 when not an edge.
    pub fn weight(&self, u: usize, v: usize) -> f64 {
        match self.graph.neighbors(u).binary_search(&v) {
            Ok(i) => self.weights[u][i],
            Err(_) => 0.0,
        }
    }

    /// Neighbors of `v` with their edge weights, ascending by neighbor id.
    pub fn weighted_neighbors(&self, v: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.graph
            .neighbors(v)
            .iter()
            .copied()
            .zip(self.weights[v].iter().copied())
    }

    /// Total weight `mu_v = sum_u mu_uv`.
    pub fn strength(&self, v: usize) -> f64 {
        self.weights[v].iter().sum()
    }

    /// Weighted edges `(u, v, w)` with `u <= v`, lexicographic.
    pub fn weighted_edges(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.graph.edge_count());
        for v in 0..self.vertex_count() {
            for (u, w) in self.weighted_neighbors(v) {
                if v <= u {
                    out.push((v, u, w));
                }
            }
        }
        out
    }

    /// Minimum and maximum edge weight, or `None` on edgeless graphs.
    pub fn weight_bounds(&self) -> Option<(f64, f64)> {
        let mut bounds: Option<(f64, f64)> = None;
        for row in &self.weights {
            for &w in row {
                bounds = Some(match bounds {
                    None => (w, w),
                    Some((lo, hi)) => (lo.min(w), hi.max(w)),
                });
            }
        }
        bounds
    }

    /// Stable content hash over structure and marks (provenance records).
    pub fn content_hash(&self) -> u64 {
        let mut h = rng::mix64(self.vertex_count() as u64 ^ 0xace1_c0de_0000_0001);
        for (u, v, w) in self.weighted_edges() {
            h = rng::mix64(h ^ (u as u64).rotate_left(32) ^ v as u64);
            h = rng::mix64(h ^ w.to_bits());
        }
        for &x in &self.media {
            h = rng::mix64(h ^ x.to_bits());
        }
        for &x in &self.initial {
            h = rng::mix64(h ^ x.to_bits());
        }
        h
    }

    pub fn to_json(&self, root: Option<usize>) -> NetworkJson {
        NetworkJson {
            n: self.vertex_count(),
            edges: self.graph.edges(),
            root,
            mu: self.weighted_edges(),
            omega: self.media.clone(),
            theta0: self.initial.clone(),
        }
    }
}

/// Serialization schema extending the graph schema with marks:
/// `{"n", "edges", "root"?, "mu": [[u,v,w],...], "omega": [...], "theta0": [...]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NetworkJson {
    pub n: usize,
    pub edges: Vec<(usize, usize)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub root: Option<usize>,
    pub mu: Vec<(usize, usize, f64)>,
    pub omega: Vec<f64>,
    pub theta0: Vec<f64>,
}

impl NetworkJson {
    pub fn into_network(self) -> Result<MarkedNetwork> {
        let graph = Graph::from_edges(self.n, &self.edges)?;
        MarkedNetwork::from_parts(graph, &self.mu, self.omega, self.theta0)
    }
}

/// A scalar mark distribution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum MarkDistribution {
    Deterministic { value: f64 },
    Uniform { lo: f64, hi: f64 },
    Normal { mean: f64, sd: f64 },
}

impl MarkDistribution {
    pub fn validate(&self) -> Result<()> {
        match self {
            MarkDistribution::Deterministic { value } => {
                if !value.is_finite() {
                    return Err(Error::InvalidParameter("non-finite mark value".into()));
                }
            }
            MarkDistribution::Uniform { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                    return Err(Error::InvalidParameter(format!(
                        "bad uniform range [{lo}, {hi}]"
                    )));
                }
            }
            MarkDistribution::Normal { mean, sd } => {
                if !(mean.is_finite() && sd.is_finite() && *sd >= 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "bad normal parameters ({mean}, {sd})"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Draw from a key (pure).
    pub fn sample_keyed(&self, key: u64) -> f64 {
        match self {
            MarkDistribution::Deterministic { value } => *value,
            MarkDistribution::Uniform { lo, hi } => lo + (hi - lo) * rng::unit(rng::mix64(key)),
            MarkDistribution::Normal { mean, sd } => mean + sd * rng::normal(key),
        }
    }

    /// Support bounds when the law is compactly supported.
    fn support(&self) -> Option<(f64, f64)> {
        match self {
            MarkDistribution::Deterministic { value } => Some((*value, *value)),
            MarkDistribution::Uniform { lo, hi } => Some((*lo, *hi)),
            MarkDistribution::Normal { .. } => None,
        }
    }
}

/// Mark laws for i.i.d. attachment: weights (mu), media (pi), initial (lambda).
///
/// The weight law must be supported in a band `[mu_lo, mu_hi]` with
/// `0 < mu_lo <= mu_hi < inf` (niceness requires weights bounded away from 0
/// and infinity), so `Normal` weight laws are rejected.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkLaws {
    pub weight: MarkDistribution,
    pub media: MarkDistribution,
    pub initial: MarkDistribution,
}

impl MarkLaws {
    pub fn validate(&self) -> Result<()> {
        self.weight.validate()?;
        self.media.validate()?;
        self.initial.validate()?;
        match self.weight.support() {
            Some((lo, _)) if lo > 0.0 => Ok(()),
            Some((lo, _)) => Err(Error::InvalidParameter(format!(
                "weight law support must be bounded away from 0, lower bound {lo}"
            ))),
            None => Err(Error::InvalidParameter(
                "weight law must have compact support in (0, inf)".into(),
            )),
        }
    }

    /// Weight-law support bounds `[mu_lo, mu_hi]`.
    pub fn weight_bounds(&self) -> (f64, f64) {
        self.weight.support().expect("validated weight law")
    }

    /// Unit weights, unit media, zero initial conditions.
    pub fn unit() -> MarkLaws {
        MarkLaws {
            weight: MarkDistribution::Deterministic { value: 1.0 },
            media: MarkDistribution::Deterministic { value: 1.0 },
            initial: MarkDistribution::Deterministic { value: 0.0 },
        }
    }
}

const TAG_WEIGHT: &str = "mark/weight";
const TAG_MEDIA: &str = "mark/media";
const TAG_INITIAL: &str = "mark/initial";

/// Attach independent marks to a graph. Each mark is keyed by
/// `(seed, kind, vertex-or-edge identity)`, so the same vertex or edge
/// receives the same mark in any sub-extraction and across reruns.
pub fn attach_iid_marks(g: &Graph, laws: &MarkLaws, seed: u64) -> Result<MarkedNetwork> {
    laws.validate()?;
    let n = g.vertex_count();
    let (wt, mt, it) = (rng::tag(TAG_WEIGHT), rng::tag(TAG_MEDIA), rng::tag(TAG_INITIAL));
    let media: Vec<f64> = (0..n)
        .map(|v| laws.media.sample_keyed(rng::derive(seed, &[mt, v as u64])))
        .collect();
    let initial: Vec<f64> = (0..n)
        .map(|v| laws.initial.sample_keyed(rng::derive(seed, &[it, v as u64])))
        .collect();
    let edge_weights: Vec<(usize, usize, f64)> = g
        .edges()
        .into_iter()
        .map(|(u, v)| {
            let w = laws
                .weight
                .sample_keyed(rng::derive(seed, &[wt, u as u64, v as u64]));
            (u, v, w)
        })
        .collect();
    MarkedNetwork::from_parts(g.clone(), &edge_weights, media, initial)
}

/// An induced rooted ball of a marked network, with marks inherited through
/// the identity map and the boundary computed against the parent graph.
#[derive(Clone, Debug)]
pub struct RootedBallNetwork {
    pub network: MarkedNetwork,
    pub root: usize,
    pub boundary: Vec<usize>,
    pub to_parent: Vec<usize>,
    pub radius: usize,
}

/// Extract the radius-`r` ball around `root` with restricted marks.
pub fn rooted_ball_network(net: &MarkedNetwork, root: usize, r: usize) -> RootedBallNetwork {
    let RootedBall {
        graph,
        root: local_root,
        boundary,
        to_parent,
        radius,
    } = ball(&net.graph, root, r);
    let media: Vec<f64> = to_parent.iter().map(|&p| net.media[p]).collect();
    let initial: Vec<f64> = to_parent.iter().map(|&p| net.initial[p]).collect();
    let edge_weights: Vec<(usize, usize, f64)> = graph
        .edges()
        .into_iter()
        .map(|(u, v)| (u, v, net.weight(to_parent[u], to_parent[v])))
        .collect();
    let network = MarkedNetwork::from_parts(graph, &edge_weights, media, initial)
        .expect("induced marks are consistent");
    RootedBallNetwork {
        network,
        root: local_root,
        boundary,
        to_parent,
        radius,
    }
}

/// Relative weights for the three mark families when aggregating
/// discrepancies inside the local metric.
#[derive(Clone, Copy, Debug)]
pub struct MarkScale {
    pub edge: f64,
    pub media: f64,
    pub initial: f64,
}

impl Default for MarkScale {
    fn default() -> Self {
        MarkScale {
            edge: 1.0,
            media: 1.0,
            initial: 1.0,
        }
    }
}

/// Local distance between two rooted ball networks:
/// `min over rho of 1/(1+rho) + delta*(rho)` where `delta*(rho)` is the
/// smallest worst-case mark discrepancy over root-preserving isomorphisms of
/// the radius-`rho` sub-balls, and `rho` ranges over `0..=min(radius_a,
/// radius_b)`. `rho = 0` is always feasible, so the value is at most
/// `1 + delta*(0)`.
///
/// On truncated inputs the value cannot drop below the truncation floor
/// `1/(1 + min(radius))`; callers must treat values at the floor as
/// "indistinguishable at this radius".
pub fn local_distance(a: &RootedBallNetwork, b: &RootedBallNetwork, scale: &MarkScale) -> Result<f64> {
    local_distance_with_cap(a, b, scale, DEFAULT_BALL_CAP)
}

pub fn local_distance_with_cap(
    a: &RootedBallNetwork,
    b: &RootedBallNetwork,
    scale: &MarkScale,
    cap: usize,
) -> Result<f64> {
    for side in [a, b] {
        let size = side.network.vertex_count();
        if size > cap {
            return Err(Error::BallSizeCap { size, cap });
        }
    }
    let max_rho = a.radius.min(b.radius);
    let dist_a = a.network.graph.bfs_distances(a.root);
    let dist_b = b.network.graph.bfs_distances(b.root);
    let mut best = f64::INFINITY;
    for rho in 0..=max_rho {
        if let Some(delta) = min_discrepancy_iso(a, &dist_a, b, &dist_b, rho, scale) {
            let value = 1.0 / (1.0 + rho as f64) + delta;
            if value < best {
                best = value;
            }
        } else if rho == 0 {
            unreachable!("rho = 0 is always feasible");
        } else {
            break; // larger rho cannot be feasible if rho isn't
        }
    }
    Ok(best)
}

/// Minimum over root-preserving isomorphisms of the radius-`rho` sub-balls
/// of the maximum mark discrepancy; `None` when no isomorphism exists.
fn min_discrepancy_iso(
    a: &RootedBallNetwork,
    dist_a: &[usize],
    b: &RootedBallNetwork,
    dist_b: &[usize],
    rho: usize,
    scale: &MarkScale,
) -> Option<f64> {
    // vertices of each sub-ball
    let verts_a: Vec<usize> = (0..a.network.vertex_count())
        .filter(|&v| dist_a[v] <= rho)
        .collect();
    let verts_b: Vec<usize> = (0..b.network.vertex_count())
        .filter(|&v| dist_b[v] <= rho)
        .collect();
    if verts_a.len() != verts_b.len() {
        return None;
    }
    // induced sub-ball graphs with local ids in parent-sorted order
    let sub_a = induce(&a.network.graph, &verts_a);
    let sub_b = induce(&b.network.graph, &verts_b);
    if sub_a.edge_count() != sub_b.edge_count() {
        return None;
    }
    let sdist_a: Vec<usize> = verts_a.iter().map(|&v| dist_a[v]).collect();
    let sdist_b: Vec<usize> = verts_b.iter().map(|&v| dist_b[v]).collect();
    let colors_a = iso::wl_refine(&sub_a, &depth_init(&sdist_a));
    let colors_b = iso::wl_refine(&sub_b, &depth_init(&sdist_b));
    {
        let mut ca = colors_a.clone();
        let mut cb = colors_b.clone();
        ca.sort_unstable();
        cb.sort_unstable();
        if ca != cb {
            return None;
        }
    }

    let mut order: Vec<usize> = (0..sub_a.vertex_count()).collect();
    order.sort_unstable_by_key(|&v| (sdist_a[v], colors_a[v], v));

    let vertex_gap = |va: usize, vb: usize| -> f64 {
        let (pa, pb) = (verts_a[va], verts_b[vb]);
        let media = scale.media * (a.network.media[pa] - b.network.media[pb]).abs();
        let init = scale.initial * (a.network.initial[pa] - b.network.initial[pb]).abs();
        media.max(init)
    };
    let edge_gap = |ea: (usize, usize), eb: (usize, usize)| -> f64 {
        let wa = a.network.weight(verts_a[ea.0], verts_a[ea.1]);
        let wb = b.network.weight(verts_b[eb.0], verts_b[eb.1]);
        scale.edge * (wa - wb).abs()
    };

    struct Search<'s> {
        sub_a: &'s Graph,
        sub_b: &'s Graph,
        order: &'s [usize],
        colors_a: &'s [u64],
        colors_b: &'s [u64],
        sdist_a: &'s [usize],
        sdist_b: &'s [usize],
        image: Vec<usize>,
        used: Vec<bool>,
        best: f64,
    }

    impl Search<'_> {
        fn run(
            &mut self,
            idx: usize,
            current: f64,
            vertex_gap: &impl Fn(usize, usize) -> f64,
            edge_gap: &impl Fn((usize, usize), (usize, usize)) -> f64,
        ) {
            if current >= self.best {
                return; // cannot improve the incumbent
            }
            if idx == self.order.len() {
                self.best = current;
                return;
            }
            let v = self.order[idx];
            for cand in 0..self.sub_b.vertex_count() {
                if self.used[cand]
                    || self.colors_b[cand] != self.colors_a[v]
                    || self.sdist_b[cand] != self.sdist_a[v]
                    || self.sub_b.degree(cand) != self.sub_a.degree(v)
                {
                    continue;
                }
                if !iso::adjacency_consistent(self.sub_a, self.sub_b, v, cand, &self.image) {
                    continue;
                }
                let mut next = current.max(vertex_gap(v, cand));
                for &u in self.sub_a.neighbors(v) {
                    if self.image[u] != usize::MAX {
                        next = next.max(edge_gap((v, u), (cand, self.image[u])));
                    }
                }
                if next >= self.best {
                    continue;
                }
                self.image[v] = cand;
                self.used[cand] = true;
                self.run(idx + 1, next, vertex_gap, edge_gap);
                self.image[v] = usize::MAX;
                self.used[cand] = false;
            }
        }
    }

    let nb = sub_b.vertex_count();
    let mut search = Search {
        sub_a: &sub_a,
        sub_b: &sub_b,
        order: &order,
        colors_a: &colors_a,
        colors_b: &colors_b,
        sdist_a: &sdist_a,
        sdist_b: &sdist_b,
        image: vec![usize::MAX; order.len()],
        used: vec![false; nb],
        best: f64::INFINITY,
    };
    search.run(0, 0.0, &vertex_gap, &edge_gap);
    if search.best.is_finite() {
        Some(search.best)
    } else {
        None
    }
}

fn depth_init(dist: &[usize]) -> Vec<u64> {
    dist.iter()
        .map(|&d| rng::mix64(d as u64 ^ 0x5851_f42d_4c95_7f2d))
        .collect()
}

/// Induced subgraph on `verts` (sorted parent ids), local ids in that order.
fn induce(g: &Graph, verts: &[usize]) -> Graph {
    let mut local_of = std::collections::HashMap::new();
    for (i, &v) in verts.iter().enumerate() {
        local_of.insert(v, i);
    }
    let mut edges = Vec::new();
    for (i, &v) in verts.iter().enumerate() {
        for &u in g.neighbors(v) {
            if let Some(&j) = local_of.get(&u) {
                if i <= j {
                    edges.push((i, j));
                }
            }
        }
    }
    Graph::from_edges(verts.len(), &edges).expect("induced edges in range")
}

/// Shape-only empirical neighborhood measure: one atom per canonical
/// rooted-ball signature, weighted by the fraction of vertices whose
/// radius-`r` ball realizes it. Signature collisions are resolved with the
/// exact isomorphism check for balls of at most 50 vertices.
pub fn empirical_neighborhood_shapes(
    net: &MarkedNetwork,
    r: usize,
) -> Result<EmpiricalMeasure<u64>> {
    empirical_neighborhood_shapes_of(&net.graph, r)
}

/// Graph-level variant of [`empirical_neighborhood_shapes`].
pub fn empirical_neighborhood_shapes_of(g: &Graph, r: usize) -> Result<EmpiricalMeasure<u64>> {
    let n = g.vertex_count();
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    // class representatives: (signature, ball) per distinct class
    struct Class {
        signature: u64,
        ball: RootedBall,
        count: usize,
        splinter: u64,
    }
    let mut classes: Vec<Class> = Vec::new();
    for v in 0..n {
        let b = ball(g, v, r);
        if b.graph.vertex_count() > DEFAULT_BALL_CAP {
            return Err(Error::BallSizeCap {
                size: b.graph.vertex_count(),
                cap: DEFAULT_BALL_CAP,
            });
        }
        let signature = iso::rooted_signature(&b.graph, b.root);
        let mut found = false;
        for class in classes.iter_mut().filter(|c| c.signature == signature) {
            let matches = if b.graph.vertex_count() <= 50 {
                iso::rooted_isomorphic(&b.graph, b.root, &class.ball.graph, class.ball.root)
            } else {
                true // trust the signature above the exact-check cap
            };
            if matches {
                class.count += 1;
                found = true;
                break;
            }
        }
        if !found {
            // a splinter id keeps collided non-isomorphic classes distinct
            let splinter = classes
                .iter()
                .filter(|c| c.signature == signature)
                .count() as u64;
            classes.push(Class {
                signature,
                ball: b,
                count: 1,
                splinter,
            });
        }
    }
    classes.sort_by_key(|c| (c.signature, c.splinter));
    // a class that needed no splitting keeps its plain signature as label,
    // so externally computed signatures can be matched against the measure
    let atoms: Vec<u64> = classes
        .iter()
        .map(|c| {
            if c.splinter == 0 {
                c.signature
            } else {
                rng::mix64(c.signature ^ c.splinter)
            }
        })
        .collect();
    let weights: Vec<f64> = classes.iter().map(|c| c.count as f64 / n as f64).collect();
    let total: f64 = weights.iter().sum();
    let mut weights = weights;
    let last = weights.len() - 1;
    weights[last] += 1.0 - total;
    EmpiricalMeasure::new(atoms, weights)
}

/// Canonical signature of the radius-`r` ball around one vertex (the atom
/// label used by the shape-only neighborhood measure).
pub fn ball_shape_signature(g: &Graph, v: usize, r: usize) -> u64 {
    let b = ball(g, v, r);
    iso::rooted_signature(&b.graph, b.root)
}

/// Number of degree-histogram buckets in the feature vector.
const DEGREE_BUCKETS: usize = 16;

/// Marked-statistics empirical neighborhood measure: one feature vector per
/// vertex with uniform weights. Features: ball vertex count, boundary size,
/// a clipped degree histogram, and mark moment summaries (mean/sd of media,
/// initial conditions, and edge weights inside the ball).
pub fn empirical_neighborhood_features(
    net: &MarkedNetwork,
    r: usize,
) -> Result<EmpiricalMeasure<Vec<f64>>> {
    let n = net.vertex_count();
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    let mut atoms = Vec::with_capacity(n);
    for v in 0..n {
        let b = rooted_ball_network(net, v, r);
        if b.network.vertex_count() > DEFAULT_BALL_CAP {
            return Err(Error::BallSizeCap {
                size: b.network.vertex_count(),
                cap: DEFAULT_BALL_CAP,
            });
        }
        atoms.push(ball_features(&b));
    }
    EmpiricalMeasure::uniform(atoms)
}

fn ball_features(b: &RootedBallNetwork) -> Vec<f64> {
    let g = &b.network.graph;
    let m = g.vertex_count();
    let mut features = Vec::with_capacity(2 + DEGREE_BUCKETS + 6);
    features.push(m as f64);
    features.push(b.boundary.len() as f64);
    let mut hist = [0.0f64; DEGREE_BUCKETS];
    for v in 0..m {
        let bucket = g.degree(v).min(DEGREE_BUCKETS - 1);
        hist[bucket] += 1.0;
    }
    features.extend_from_slice(&hist);
    let (media_mean, media_sd) = mean_sd(&b.network.media);
    let (init_mean, init_sd) = mean_sd(&b.network.initial);
    let weights: Vec<f64> = b
        .network
        .weighted_edges()
        .into_iter()
        .map(|(_, _, w)| w)
        .collect();
    let (w_mean, w_sd) = if weights.is_empty() {
        (0.0, 0.0)
    } else {
        mean_sd(&weights)
    };
    features.extend_from_slice(&[media_mean, media_sd, init_mean, init_sd, w_mean, w_sd]);
    features
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{sample_cycle, sample_erdos_renyi, sample_gw_tree, OffspringLaw};
    use std::f64::consts::PI;

    fn uniform_laws() -> MarkLaws {
        MarkLaws {
            weight: MarkDistribution::Uniform { lo: 0.5, hi: 1.5 },
            media: MarkDistribution::Normal { mean: 1.0, sd: 1.0 },
            initial: MarkDistribution::Uniform { lo: 0.0, hi: 2.0 * PI },
        }
    }

    #[test]
    fn point_mass_laws_give_constant_marks() {
        let g = sample_cycle(8).unwrap();
        let net = attach_iid_marks(&g, &MarkLaws::unit(), 3).unwrap();
        for (_, _, w) in net.weighted_edges() {
            assert_eq!(w, 1.0);
        }
        assert!(net.media.iter().all(|&x| x == 1.0));
        assert!(net.initial.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn uniform_initial_marks_have_expected_mean() {
        // Monte Carlo oracle: Uniform[0, 2pi] has mean pi
        let g = sample_cycle(100).unwrap();
        let laws = MarkLaws {
            weight: MarkDistribution::Deterministic { value: 1.0 },
            media: MarkDistribution::Deterministic { value: 0.0 },
            initial: MarkDistribution::Uniform { lo: 0.0, hi: 2.0 * PI },
        };
        let net = attach_iid_marks(&g, &laws, 11).unwrap();
        let mean = net.initial.iter().sum::<f64>() / 100.0;
        assert!((mean - PI).abs() < 0.4, "mean {mean}");
    }

    #[test]
    fn marks_are_deterministic_given_seed() {
        let g = sample_erdos_renyi(60, 0.1, 2).unwrap();
        let a = attach_iid_marks(&g, &uniform_laws(), 5).unwrap();
        let b = attach_iid_marks(&g, &uniform_laws(), 5).unwrap();
        assert_eq!(a, b);
        let c = attach_iid_marks(&g, &uniform_laws(), 6).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn normal_weight_law_is_rejected() {
        let laws = MarkLaws {
            weight: MarkDistribution::Normal { mean: 1.0, sd: 0.1 },
            media: MarkDistribution::Deterministic { value: 0.0 },
            initial: MarkDistribution::Deterministic { value: 0.0 },
        };
        assert!(laws.validate().is_err());
    }

    #[test]
    fn ball_marks_match_parent_through_identity_map() {
        for seed in 0..100u64 {
            let n = 30 + (seed as usize % 40);
            let g = sample_erdos_renyi(n, 3.0 / n as f64, seed).unwrap();
            let net = attach_iid_marks(&g, &uniform_laws(), seed ^ 0xabcd).unwrap();
            let root = (seed as usize * 7) % n;
            let b = rooted_ball_network(&net, root, 2);
            for (local, &parent) in b.to_parent.iter().enumerate() {
                assert_eq!(b.network.media[local], net.media[parent]);
                assert_eq!(b.network.initial[local], net.initial[parent]);
            }
            for (u, v, w) in b.network.weighted_edges() {
                assert_eq!(w, net.weight(b.to_parent[u], b.to_parent[v]));
            }
        }
    }

    #[test]
    fn ball_covering_component_has_empty_boundary() {
        let g = sample_cycle(9).unwrap();
        let net = attach_iid_marks(&g, &MarkLaws::unit(), 0).unwrap();
        let b = rooted_ball_network(&net, 0, 5);
        assert!(b.boundary.is_empty());
        assert_eq!(b.network.vertex_count(), 9);
    }

    #[test]
    fn zero_radius_ball_is_single_marked_vertex() {
        let g = sample_cycle(5).unwrap();
        let net = attach_iid_marks(&g, &uniform_laws(), 9).unwrap();
        let b = rooted_ball_network(&net, 3, 0);
        assert_eq!(b.network.vertex_count(), 1);
        assert_eq!(b.network.graph.edge_count(), 0);
        assert_eq!(b.network.media[0], net.media[3]);
        assert_eq!(b.network.initial[0], net.initial[3]);
    }

    #[test]
    fn identical_inputs_hit_truncation_floor() {
        let g = sample_cycle(12).unwrap();
        let net = attach_iid_marks(&g, &uniform_laws(), 1).unwrap();
        for r in 0..4usize {
            let b = rooted_ball_network(&net, 2, r);
            let d = local_distance(&b, &b, &MarkScale::default()).unwrap();
            assert!(
                (d - 1.0 / (1.0 + r as f64)).abs() < 1e-15,
                "radius {r}: distance {d}"
            );
        }
    }

    #[test]
    fn distance_reflects_first_structural_difference() {
        // isomorphic to radius 2, different at radius 3, identical marks
        let path = Graph::from_edges(4, &[(0, 1), (1, 2), (2, 3)]).unwrap();
        let net_a = MarkedNetwork::unit_weights(path, vec![0.0; 4], vec![0.0; 4]).unwrap();
        // an extra vertex at distance 3 makes the radius-3 balls differ
        let branched = Graph::from_edges(5, &[(0, 1), (1, 2), (2, 3), (2, 4)]).unwrap();
        let net_b = MarkedNetwork::unit_weights(branched, vec![0.0; 5], vec![0.0; 5]).unwrap();
        let a = rooted_ball_network(&net_a, 0, 3);
        let b = rooted_ball_network(&net_b, 0, 3);
        let d = local_distance(&a, &b, &MarkScale::default()).unwrap();
        assert!((d - 1.0 / 3.0).abs() < 1e-15, "distance {d}");
    }

    #[test]
    fn single_vertex_mark_discrepancy() {
        let one = Graph::empty(1);
        let make = |omega: f64| {
            MarkedNetwork::unit_weights(one.clone(), vec![omega], vec![0.0]).unwrap()
        };
        let a = rooted_ball_network(&make(0.3), 0, 0);
        let b = rooted_ball_network(&make(0.4), 0, 0);
        let d = local_distance(&a, &b, &MarkScale::default()).unwrap();
        assert!((d - 1.1).abs() < 1e-15, "distance {d}");
        let same = local_distance(&a, &a, &MarkScale::default()).unwrap();
        assert!((same - 1.0).abs() < 1e-15);
    }

    #[test]
    fn distance_is_symmetric() {
        for seed in 0..20u64 {
            let g = sample_erdos_renyi(25, 0.12, seed).unwrap();
            let net = attach_iid_marks(&g, &uniform_laws(), seed).unwrap();
            let h = sample_erdos_renyi(25, 0.12, seed + 100).unwrap();
            let net2 = attach_iid_marks(&h, &uniform_laws(), seed + 100).unwrap();
            let a = rooted_ball_network(&net, 0, 2);
            let b = rooted_ball_network(&net2, 0, 2);
            let dab = local_distance(&a, &b, &MarkScale::default()).unwrap();
            let dba = local_distance(&b, &a, &MarkScale::default()).unwrap();
            assert!((dab - dba).abs() < 1e-12, "seed {seed}: {dab} vs {dba}");
            assert!(dab <= 1.0 + delta_zero(&a, &b) + 1e-12);
        }
    }

    fn delta_zero(a: &RootedBallNetwork, b: &RootedBallNetwork) -> f64 {
        let m = (a.network.media[a.root] - b.network.media[b.root]).abs();
        let i = (a.network.initial[a.root] - b.network.initial[b.root]).abs();
        m.max(i)
    }

    #[test]
    fn mark_perturbation_moves_distance_by_at_most_epsilon() {
        for (case, &eps) in [1e-3f64, 1e-2].iter().enumerate() {
            for seed in 0..50u64 {
                let n = 20 + (seed as usize % 20);
                let g = sample_erdos_renyi(n, 3.0 / n as f64, seed).unwrap();
                let net = attach_iid_marks(&g, &uniform_laws(), seed).unwrap();
                let root = (seed as usize) % n;
                let a = rooted_ball_network(&net, root, 2);
                let mut perturbed = net.clone();
                for v in 0..n {
                    let k1 = rng::derive(seed, &[1, case as u64, v as u64]);
                    let k2 = rng::derive(seed, &[2, case as u64, v as u64]);
                    perturbed.media[v] += eps * rng::unit_symmetric(k1);
                    perturbed.initial[v] += eps * rng::unit_symmetric(k2);
                }
                let reweighted: Vec<(usize, usize, f64)> = perturbed
                    .weighted_edges()
                    .into_iter()
                    .map(|(u, v, w)| {
                        let k = rng::derive(seed, &[3, case as u64, u as u64, v as u64]);
                        (u, v, w + eps * rng::unit_symmetric(k))
                    })
                    .collect();
                let perturbed = MarkedNetwork::from_parts(
                    perturbed.graph.clone(),
                    &reweighted,
                    perturbed.media.clone(),
                    perturbed.initial.clone(),
                )
                .unwrap();
                let b = rooted_ball_network(&perturbed, root, 2);
                let d = local_distance(&a, &b, &MarkScale::default()).unwrap();
                let floor = local_distance(&a, &a, &MarkScale::default()).unwrap();
                assert!(
                    d <= floor + eps + 1e-12,
                    "seed {seed}, eps {eps}: {d} vs floor {floor}"
                );
            }
        }
    }

    #[test]
    fn cycle_neighborhood_is_point_mass() {
        let g = sample_cycle(20).unwrap();
        let net = attach_iid_marks(&g, &MarkLaws::unit(), 0).unwrap();
        let m = empirical_neighborhood_shapes(&net, 2).unwrap();
        assert_eq!(m.len(), 1);
        assert!((m.weights()[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn vertex_transitive_graphs_give_point_masses() {
        // complete graph
        let k5 = sample_erdos_renyi(5, 1.0, 0).unwrap();
        assert_eq!(empirical_neighborhood_shapes_of(&k5, 1).unwrap().len(), 1);
        // 4 x 4 torus built by hand
        let mut edges = Vec::new();
        let idx = |i: usize, j: usize| (i % 4) * 4 + (j % 4);
        for i in 0..4 {
            for j in 0..4 {
                edges.push((idx(i, j), idx(i + 1, j)));
                edges.push((idx(i, j), idx(i, j + 1)));
            }
        }
        let torus = Graph::from_edges(16, &edges).unwrap();
        assert_eq!(
            empirical_neighborhood_shapes_of(&torus, 2).unwrap().len(),
            1
        );
    }

    #[test]
    fn edgeless_graph_is_single_atom() {
        let g = Graph::empty(7);
        let m = empirical_neighborhood_shapes_of(&g, 3).unwrap();
        assert_eq!(m.len(), 1);
    }

    #[test]
    fn er_root_degrees_approach_poisson() {
        // depth-1 ball count - 1 = root degree; limit law Poisson(2)
        let mut tv_total = 0.0;
        let trials = 20;
        for seed in 0..trials {
            let g = sample_erdos_renyi(1000, 2.0 / 1000.0, seed).unwrap();
            let net = attach_iid_marks(&g, &MarkLaws::unit(), seed).unwrap();
            let m = empirical_neighborhood_features(&net, 1).unwrap();
            let mut counts = vec![0.0f64; 21];
            for atom in m.atoms() {
                let deg = (atom[0] - 1.0) as usize;
                if deg < counts.len() {
                    counts[deg] += 1.0;
                }
            }
            let n: f64 = counts.iter().sum();
            let poisson = OffspringLaw::Poisson { mean: 2.0 }.pmf(1e-9);
            let mut tv = 0.0;
            for k in 0..counts.len() {
                let p = poisson.get(k).copied().unwrap_or(0.0);
                tv += (counts[k] / n - p).abs();
            }
            tv_total += 0.5 * tv;
        }
        let tv = tv_total / trials as f64;
        assert!(tv < 0.05, "average TV {tv}");
    }

    #[test]
    fn network_json_round_trip() {
        let law = OffspringLaw::Poisson { mean: 2.0 };
        let t = sample_gw_tree(&law, &law, 4, 2).unwrap();
        let net = attach_iid_marks(&t.graph, &uniform_laws(), 7).unwrap();
        let json = serde_json::to_string(&net.to_json(Some(0))).unwrap();
        let parsed: NetworkJson = serde_json::from_str(&json).unwrap();
        let back = parsed.into_network().unwrap();
        assert_eq!(back, net);
    }
}

