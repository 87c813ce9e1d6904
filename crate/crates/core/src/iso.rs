//! Rooted-graph canonical signatures (iterated color refinement) and exact
//! backtracking isomorphism search.
//!
//! Color refinement (1-WL) is sound but incomplete: equal signatures do not
//! guarantee isomorphism. Callers that need certainty resolve signature
//! collisions with [`rooted_isomorphic`], which is exact but worst-case
//! exponential; balls at desk scale stay small.

use crate::graph::Graph;
use crate::rng::mix64;

/// Stable hash of a color multiset combined with the vertex's own color.
fn refine_color(own: u64, mut neighbor_colors: Vec<u64>) -> u64 {
    neighbor_colors.sort_unstable();
    let mut h = mix64(own ^ 0x9e37_79b9_7f4a_7c15);
    for c in neighbor_colors {
        h = mix64(h ^ c.wrapping_mul(0xff51_afd7_ed55_8ccd));
    }
    h
}

/// Iterated color refinement from initial colors, run until the partition is
/// stable (or `n` rounds, whichever comes first). Returns final colors.
pub fn wl_refine(g: &Graph, init: &[u64]) -> Vec<u64> {
    let n = g.vertex_count();
    let mut colors = init.to_vec();
    let mut partition_size = count_distinct(&colors);
    for _ in 0..n {
        let next: Vec<u64> = (0..n)
            .map(|v| {
                refine_color(
                    colors[v],
                    g.neighbors(v).iter().map(|&u| colors[u]).collect(),
                )
            })
            .collect();
        let next_size = count_distinct(&next);
        colors = next;
        if next_size == partition_size {
            break;
        }
        partition_size = next_size;
    }
    colors
}

fn count_distinct(colors: &[u64]) -> usize {
    let mut sorted = colors.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    sorted.len()
}

/// Canonical signature of a rooted graph: colors are initialized by BFS
/// depth from the root, refined to stability, then folded together with the
/// root's final color and the edge count.
///
/// Equal signatures for rooted-isomorphic inputs is guaranteed; the converse
/// is not (use [`rooted_isomorphic`] to confirm).
pub fn rooted_signature(g: &Graph, root: usize) -> u64 {
    let dist = g.bfs_distances(root);
    let init: Vec<u64> = dist
        .iter()
        .map(|&d| {
            if d == usize::MAX {
                u64::MAX
            } else {
                mix64(d as u64 ^ 0x5851_f42d_4c95_7f2d)
            }
        })
        .collect();
    let colors = wl_refine(g, &init);
    let mut sorted = colors.clone();
    sorted.sort_unstable();
    let mut h = mix64(g.vertex_count() as u64 ^ (g.edge_count() as u64).rotate_left(32));
    for c in sorted {
        h = mix64(h ^ c.wrapping_mul(0xc2b2_ae3d_27d4_eb4f));
    }
    mix64(h ^ colors[root])
}

/// Exact rooted-isomorphism test by backtracking, with WL colors as the
/// candidate filter. Vertices are matched in BFS-layer order; a candidate
/// must have the same depth, degree and refined color, and its adjacency to
/// already-matched vertices must mirror the source's exactly.
pub fn rooted_isomorphic(ga: &Graph, ra: usize, gb: &Graph, rb: usize) -> bool {
    if ga.vertex_count() != gb.vertex_count() || ga.edge_count() != gb.edge_count() {
        return false;
    }
    let n = ga.vertex_count();
    let dist_a = ga.bfs_distances(ra);
    let dist_b = gb.bfs_distances(rb);
    let init_a: Vec<u64> = dist_a.iter().map(|&d| depth_color(d)).collect();
    let init_b: Vec<u64> = dist_b.iter().map(|&d| depth_color(d)).collect();
    let colors_a = wl_refine(ga, &init_a);
    let colors_b = wl_refine(gb, &init_b);
    let mut sa = colors_a.clone();
    let mut sb = colors_b.clone();
    sa.sort_unstable();
    sb.sort_unstable();
    if sa != sb {
        return false;
    }

    // match in BFS order from the root, ties broken by color then id
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_unstable_by_key(|&v| (dist_a[v], colors_a[v], v));

    let mut image = vec![usize::MAX; n];
    let mut used = vec![false; n];
    search_iso(
        ga, gb, &order, 0, &colors_a, &colors_b, &dist_a, &dist_b, &mut image, &mut used,
    )
}

fn depth_color(d: usize) -> u64 {
    if d == usize::MAX {
        u64::MAX
    } else {
        mix64(d as u64 ^ 0x5851_f42d_4c95_7f2d)
    }
}

#[allow(clippy::too_many_arguments)]
fn search_iso(
    ga: &Graph,
    gb: &Graph,
    order: &[usize],
    idx: usize,
    colors_a: &[u64],
    colors_b: &[u64],
    dist_a: &[usize],
    dist_b: &[usize],
    image: &mut [usize],
    used: &mut [bool],
) -> bool {
    if idx == order.len() {
        return true;
    }
    let v = order[idx];
    for cand in 0..gb.vertex_count() {
        if used[cand]
            || colors_b[cand] != colors_a[v]
            || dist_b[cand] != dist_a[v]
            || gb.degree(cand) != ga.degree(v)
        {
            continue;
        }
        if !adjacency_consistent(ga, gb, v, cand, image) {
            continue;
        }
        image[v] = cand;
        used[cand] = true;
        if search_iso(
            ga, gb, order, idx + 1, colors_a, colors_b, dist_a, dist_b, image, used,
        ) {
            return true;
        }
        image[v] = usize::MAX;
        used[cand] = false;
    }
    false
}

/// Every already-matched neighbor of `v` must map to a neighbor of `cand`,
/// and `cand` must not be adjacent to the image of a matched non-neighbor.
pub(crate) fn adjacency_consistent(
    ga: &Graph,
    gb: &Graph,
    v: usize,
    cand: usize,
    image: &[usize],
) -> bool {
    let mut mapped_neighbors = 0usize;
    for &u in ga.neighbors(v) {
        if image[u] != usize::MAX {
            if !gb.contains_edge(cand, image[u]) {
                return false;
            }
            mapped_neighbors += 1;
        }
    }
    // count edges from cand into the image of the matched set
    let matched_edges = gb
        .neighbors(cand)
        .iter()
        .filter(|&&w| image.iter().any(|&im| im == w))
        .count();
    matched_edges == mapped_neighbors
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{ball, sample_cycle, sample_erdos_renyi, sample_gw_tree, OffspringLaw};

    #[test]
    fn cycle_vertices_share_signatures() {
        let g = sample_cycle(8).unwrap();
        let s0 = rooted_signature(&g, 0);
        for v in 1..8 {
            assert_eq!(rooted_signature(&g, v), s0);
        }
    }

    #[test]
    fn signature_distinguishes_path_endpoints() {
        let g = Graph::from_edges(4, &[(0, 1), (1, 2), (2, 3)]).unwrap();
        assert_ne!(rooted_signature(&g, 0), rooted_signature(&g, 1));
        assert_eq!(rooted_signature(&g, 0), rooted_signature(&g, 3));
        assert_eq!(rooted_signature(&g, 1), rooted_signature(&g, 2));
    }

    #[test]
    fn exact_iso_matches_on_relabeled_graph() {
        let g = sample_erdos_renyi(12, 0.3, 4).unwrap();
        // relabel v -> (v * 5) % 12 (5 coprime to 12)
        let edges: Vec<(usize, usize)> = g
            .edges()
            .iter()
            .map(|&(u, v)| ((u * 5) % 12, (v * 5) % 12))
            .collect();
        let h = Graph::from_edges(12, &edges).unwrap();
        assert!(rooted_isomorphic(&g, 3, &h, (3 * 5) % 12));
    }

    #[test]
    fn exact_iso_rejects_different_trees() {
        // path of 4 vs star of 4, both rooted at a degree-1 vertex
        let path = Graph::from_edges(4, &[(0, 1), (1, 2), (2, 3)]).unwrap();
        let star = Graph::from_edges(4, &[(0, 1), (0, 2), (0, 3)]).unwrap();
        assert!(!rooted_isomorphic(&path, 0, &star, 1));
    }

    #[test]
    fn exact_iso_respects_root_position() {
        let path = Graph::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        assert!(rooted_isomorphic(&path, 0, &path, 2));
        assert!(!rooted_isomorphic(&path, 0, &path, 1));
    }

    #[test]
    fn signatures_agree_with_exact_check_on_corpus() {
        // equal signature iff exact isomorphism on a mixed corpus of small balls
        let mut balls = Vec::new();
        for seed in 0..12u64 {
            let g = sample_erdos_renyi(30, 0.1, seed).unwrap();
            balls.push(ball(&g, (seed as usize) % 30, 2));
        }
        for seed in 0..6u64 {
            let law = OffspringLaw::Poisson { mean: 1.6 };
            let t = sample_gw_tree(&law, &law, 3, seed).unwrap();
            balls.push(ball(&t.graph, 0, 3));
        }
        for i in 0..balls.len() {
            for j in (i + 1)..balls.len() {
                let (a, b) = (&balls[i], &balls[j]);
                if a.graph.vertex_count() > 50 || b.graph.vertex_count() > 50 {
                    continue;
                }
                let sig_eq = rooted_signature(&a.graph, a.root) == rooted_signature(&b.graph, b.root);
                let iso = rooted_isomorphic(&a.graph, a.root, &b.graph, b.root);
                assert_eq!(sig_eq, iso, "pair ({i}, {j})");
            }
        }
    }
}
