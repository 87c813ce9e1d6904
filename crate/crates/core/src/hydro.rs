//! Empirical trajectory measures and the statistical studies built on them:
//! finite-size versus limit-ensemble convergence, noise-only concentration
//! of truncated neighborhood statistics, and chaos-factorization estimates.
//!
//! Distances between path laws are approximated from below through a fixed
//! dictionary of bounded-Lipschitz functionals; scalar marginals use the
//! exact one-dimensional Wasserstein distance.

use crate::diffusion::{
    simulate, simulate_with_ids, DriftSpec, NoiseSource, TrajectoryEnsemble,
};
use crate::graph::{sample_cycle, sample_erdos_renyi, sample_gw_tree, sample_random_regular, uniform_vertex, Graph, OffspringLaw};
use crate::measure::EmpiricalMeasure;
use crate::network::{attach_iid_marks, rooted_ball_network, MarkLaws, MarkedNetwork};
use crate::rng;
use crate::{Error, Result};
use rayon::prelude::*;
use std::io::Write;

/// A bounded-Lipschitz functional of a discretized path, normalized so its
/// declared BL norm (sup norm plus Lipschitz norm in the sup metric on
/// paths) is at most 1.
#[derive(Clone, Debug)]
pub struct PathFunctional {
    pub kind: PathFunctionalKind,
    norm: f64,
}

#[derive(Clone, Debug)]
pub enum PathFunctionalKind {
    /// `tanh(scale (x[t] - shift))`.
    Sigmoid { time_idx: usize, scale: f64, shift: f64 },
    /// Product of two sigmoids at (possibly different) time points.
    Product {
        a: (usize, f64, f64),
        b: (usize, f64, f64),
    },
    /// A constant in [-1, 1] (its BL norm is its magnitude).
    Constant { value: f64 },
}

impl PathFunctional {
    pub fn sigmoid(time_idx: usize, scale: f64, shift: f64) -> PathFunctional {
        PathFunctional {
            kind: PathFunctionalKind::Sigmoid { time_idx, scale, shift },
            norm: 1.0 + scale,
        }
    }

    pub fn product(a: (usize, f64, f64), b: (usize, f64, f64)) -> PathFunctional {
        PathFunctional {
            kind: PathFunctionalKind::Product { a, b },
            norm: 1.0 + a.1 + b.1,
        }
    }

    pub fn constant(value: f64) -> PathFunctional {
        assert!(value.abs() <= 1.0);
        PathFunctional {
            kind: PathFunctionalKind::Constant { value },
            norm: 1.0,
        }
    }

    /// Normalizing constant (an upper bound on the raw BL norm).
    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn eval(&self, path: &[f64]) -> f64 {
        match &self.kind {
            PathFunctionalKind::Sigmoid { time_idx, scale, shift } => {
                (scale * (path[*time_idx] - shift)).tanh() / self.norm
            }
            PathFunctionalKind::Product { a, b } => {
                let fa = (a.1 * (path[a.0] - a.2)).tanh();
                let fb = (b.1 * (path[b.0] - b.2)).tanh();
                fa * fb / self.norm
            }
            PathFunctionalKind::Constant { value } => *value,
        }
    }

    pub fn max_time_idx(&self) -> usize {
        match &self.kind {
            PathFunctionalKind::Sigmoid { time_idx, .. } => *time_idx,
            PathFunctionalKind::Product { a, b } => a.0.max(b.0),
            PathFunctionalKind::Constant { .. } => 0,
        }
    }
}

/// The default 32-entry dictionary over paths with `time_count` sample
/// points: sigmoids at four time fractions with two scales and two shifts,
/// plus cross-time and same-time products.
pub fn default_dictionary(time_count: usize) -> Vec<PathFunctional> {
    assert!(time_count >= 1);
    let last = time_count - 1;
    let times: Vec<usize> = [0.25f64, 0.5, 0.75, 1.0]
        .iter()
        .map(|f| ((last as f64) * f).round() as usize)
        .collect();
    let scales = [0.7, 1.3];
    let shifts = [0.0, 1.0];
    let mut dict = Vec::with_capacity(32);
    for &t in &times {
        for &s in &scales {
            for &b in &shifts {
                dict.push(PathFunctional::sigmoid(t, s, b));
            }
        }
    }
    // cross-time products (6 pairs x 2 parameter combos)
    for i in 0..times.len() {
        for j in (i + 1)..times.len() {
            dict.push(PathFunctional::product(
                (times[i], 0.7, 0.0),
                (times[j], 0.7, 0.0),
            ));
            dict.push(PathFunctional::product(
                (times[i], 1.3, 1.0),
                (times[j], 1.3, 1.0),
            ));
        }
    }
    // same-time products with mixed scales
    for &t in &times {
        dict.push(PathFunctional::product((t, 0.7, 0.0), (t, 1.3, 1.0)));
    }
    debug_assert_eq!(dict.len(), 32);
    dict
}

/// Evenly spaced grid indices (always including both endpoints).
pub fn subsample_indices(grid_len: usize, points: usize) -> Vec<usize> {
    assert!(points >= 1 && grid_len >= 1);
    if points == 1 || grid_len == 1 {
        return vec![grid_len - 1];
    }
    (0..points)
        .map(|i| (i as f64 * (grid_len - 1) as f64 / (points - 1) as f64).round() as usize)
        .collect()
}

/// Empirical measure over per-vertex subsampled paths, uniform weights.
/// Atom values are bitwise copies of the solver output.
pub fn trajectory_measure(
    ens: &TrajectoryEnsemble,
    time_subsample: &[usize],
) -> Result<EmpiricalMeasure<Vec<f64>>> {
    let grid_len = ens.grid_len();
    if time_subsample.iter().any(|&k| k >= grid_len) {
        return Err(Error::InvalidParameter(format!(
            "subsample index out of range (grid length {grid_len})"
        )));
    }
    let atoms: Vec<Vec<f64>> = ens
        .paths
        .iter()
        .map(|row| time_subsample.iter().map(|&k| row[k]).collect())
        .collect();
    EmpiricalMeasure::uniform(atoms)
}

/// Lower bound on the bounded-Lipschitz distance between two path measures:
/// the largest discrepancy over the dictionary. Because every entry has BL
/// norm at most 1, this never exceeds the true distance (and never 2).
pub fn bl_lower_bound(
    mu: &EmpiricalMeasure<Vec<f64>>,
    nu: &EmpiricalMeasure<Vec<f64>>,
    dict: &[PathFunctional],
) -> Result<f64> {
    let len_mu = mu.atoms().first().map_or(0, Vec::len);
    let len_nu = nu.atoms().first().map_or(0, Vec::len);
    if len_mu != len_nu {
        return Err(Error::ShapeMismatch(format!(
            "atom lengths {len_mu} vs {len_nu}"
        )));
    }
    if mu.atoms().iter().any(|a| a.len() != len_mu) || nu.atoms().iter().any(|a| a.len() != len_nu)
    {
        return Err(Error::ShapeMismatch("ragged atoms".into()));
    }
    if dict.iter().any(|h| h.max_time_idx() >= len_mu) {
        return Err(Error::ShapeMismatch(
            "dictionary indexes beyond atom length".into(),
        ));
    }
    let mut best = 0.0f64;
    for h in dict {
        let a = mu.expect(|p| h.eval(p));
        let b = nu.expect(|p| h.eval(p));
        best = best.max((a - b).abs());
    }
    Ok(best)
}

/// Exact 1-D Wasserstein distance between empirical samples. Equal-size
/// inputs use the order-statistics formula directly; unequal sizes are
/// equalized by linear interpolation of the quantile functions at the
/// midpoint grid of the larger size.
pub fn wasserstein1_1d(samples_a: &[f64], samples_b: &[f64]) -> Result<f64> {
    if samples_a.is_empty() || samples_b.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut a = samples_a.to_vec();
    let mut b = samples_b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    if a.len() == b.len() {
        let total: f64 = a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).sum();
        return Ok(total / a.len() as f64);
    }
    let m = a.len().max(b.len());
    let quantile = |s: &[f64], p: f64| -> f64 {
        let h = p * s.len() as f64 - 0.5;
        if h <= 0.0 {
            return s[0];
        }
        let last = s.len() - 1;
        if h >= last as f64 {
            return s[last];
        }
        let i = h.floor() as usize;
        let frac = h - i as f64;
        s[i] * (1.0 - frac) + s[i + 1] * frac
    };
    let total: f64 = (0..m)
        .map(|i| {
            let p = (i as f64 + 0.5) / m as f64;
            (quantile(&a, p) - quantile(&b, p)).abs()
        })
        .sum();
    Ok(total / m as f64)
}

/// Bootstrap standard error of a two-sample statistic (resampling both
/// sides with replacement), keyed for reproducibility.
pub fn bootstrap_stderr<T: Clone + Sync>(
    a: &[T],
    b: &[T],
    stat: impl Fn(&[T], &[T]) -> f64 + Sync,
    iters: usize,
    seed: u64,
) -> f64 {
    let values: Vec<f64> = (0..iters)
        .into_par_iter()
        .map(|i| {
            let ra: Vec<T> = (0..a.len())
                .map(|j| {
                    let k = rng::derive(seed, &[1, i as u64, j as u64]);
                    a[(rng::unit(rng::mix64(k)) * a.len() as f64) as usize % a.len()].clone()
                })
                .collect();
            let rb: Vec<T> = (0..b.len())
                .map(|j| {
                    let k = rng::derive(seed, &[2, i as u64, j as u64]);
                    b[(rng::unit(rng::mix64(k)) * b.len() as f64) as usize % b.len()].clone()
                })
                .collect();
            stat(&ra, &rb)
        })
        .collect();
    let mean: f64 = values.iter().sum::<f64>() / values.len() as f64;
    let var: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
        / (values.len() - 1) as f64;
    var.sqrt()
}

/// Finite-model family for the studies.
#[derive(Clone, Debug)]
pub enum FiniteModel {
    /// `G(n, c/n)` with mean degree `c`.
    ErdosRenyi { mean_degree: f64 },
    Cycle,
    RandomRegular { degree: usize },
    /// A Galton-Watson tree; `n` is ignored and statistics are collected at
    /// the tree root (used for limit-equals-model self tests).
    GwTree {
        root_law: OffspringLaw,
        law: OffspringLaw,
        depth: usize,
    },
}

impl FiniteModel {
    /// Sample a graph; a forced root is returned for models whose natural
    /// observation point is fixed.
    pub fn sample(&self, n: usize, seed: u64) -> Result<(Graph, Option<usize>)> {
        match self {
            FiniteModel::ErdosRenyi { mean_degree } => {
                let p = (mean_degree / n as f64).min(1.0);
                Ok((sample_erdos_renyi(n, p, seed)?, None))
            }
            FiniteModel::Cycle => Ok((sample_cycle(n)?, None)),
            FiniteModel::RandomRegular { degree } => {
                Ok((sample_random_regular(n, *degree, seed)?, None))
            }
            FiniteModel::GwTree { root_law, law, depth } => {
                let t = sample_gw_tree(root_law, law, *depth, seed)?;
                Ok((t.graph, Some(t.root)))
            }
        }
    }
}

/// Sampler for the limit ensemble.
#[derive(Clone, Debug)]
pub enum LimitSampler {
    /// Independent Galton-Watson trees truncated at `depth`.
    GwTree {
        root_law: OffspringLaw,
        law: OffspringLaw,
        depth: usize,
    },
    /// The deterministic line ball of the given radius, rooted at its
    /// center (the local limit of cycles).
    LineSegment { radius: usize },
}

impl LimitSampler {
    fn sample(&self, seed: u64) -> Result<(Graph, usize)> {
        match self {
            LimitSampler::GwTree { root_law, law, depth } => {
                let t = sample_gw_tree(root_law, law, *depth, seed)?;
                Ok((t.graph, t.root))
            }
            LimitSampler::LineSegment { radius } => {
                let n = 2 * radius + 1;
                let edges: Vec<(usize, usize)> = (0..n - 1).map(|v| (v, v + 1)).collect();
                Ok((Graph::from_edges(n, &edges)?, *radius))
            }
        }
    }
}

/// Configuration for [`convergence_study`].
#[derive(Clone, Debug)]
pub struct ConvergenceConfig {
    pub model: FiniteModel,
    pub sizes: Vec<usize>,
    pub marks: MarkLaws,
    pub drift: DriftSpec,
    pub t: f64,
    pub dt: f64,
    pub limit: LimitSampler,
    /// Independent limit-ensemble trees.
    pub limit_replications: usize,
    /// Independent finite graphs per size.
    pub graphs_per_size: usize,
    /// Uniformly random observation roots per finite graph.
    pub roots_per_graph: usize,
    /// Path subsample points for the BL dictionary.
    pub path_points: usize,
    pub bootstrap: usize,
}

/// Per-size comparison row.
#[derive(Clone, Debug)]
pub struct StudyRow {
    pub n: usize,
    pub w1_marginal: f64,
    pub w1_stderr: f64,
    pub bl_paths: f64,
    pub bl_stderr: f64,
    pub finite_samples: usize,
    pub limit_samples: usize,
}

const TAG_LIMIT: &str = "study/limit";
const TAG_FINITE: &str = "study/finite";

/// Seed of the i-th limit-ensemble replication (recorded in manifests).
pub fn limit_seed(master_seed: u64, i: usize) -> u64 {
    rng::derive(master_seed, &[rng::tag(TAG_LIMIT), i as u64])
}

/// Seed of the i-th finite-model replication at size `n`.
pub fn finite_seed(master_seed: u64, n: usize, i: usize) -> u64 {
    rng::derive(master_seed, &[rng::tag(TAG_FINITE), n as u64, i as u64])
}

/// Seed fixing the graph and marks of a concentration scan at size `n`.
pub fn concentration_seed(master_seed: u64, n: usize) -> u64 {
    rng::derive(master_seed, &[rng::tag(TAG_CONC), n as u64])
}

/// Seed of the i-th chaos-factorization replication.
pub fn chaos_seed(master_seed: u64, rep: usize) -> u64 {
    rng::derive(master_seed, &[rng::tag(TAG_CHAOS), rep as u64])
}

/// Root-vertex statistics of one simulated system.
#[derive(Clone)]
struct RootSample {
    path: Vec<f64>,
    terminal: f64,
}

fn collect_roots(
    ens: &TrajectoryEnsemble,
    roots: &[usize],
    idx: &[usize],
) -> Vec<RootSample> {
    roots
        .iter()
        .map(|&v| {
            let row = ens
                .vertex_ids
                .iter()
                .position(|&id| id == v)
                .expect("root inside ensemble");
            let path: Vec<f64> = idx.iter().map(|&k| ens.paths[row][k]).collect();
            RootSample {
                path,
                terminal: *ens.paths[row].last().unwrap(),
            }
        })
        .collect()
}

/// Simulate the limit ensemble and return root samples.
fn limit_ensemble(cfg: &ConvergenceConfig, master_seed: u64, idx: &[usize]) -> Result<Vec<RootSample>> {
    (0..cfg.limit_replications)
        .into_par_iter()
        .map(|i| {
            let seed = limit_seed(master_seed, i);
            let (graph, root) = cfg.limit.sample(seed)?;
            let net = attach_iid_marks(&graph, &cfg.marks, rng::derive(seed, &[1]))?;
            let ens = simulate(&net, &cfg.drift, cfg.t, cfg.dt, &NoiseSource::new(rng::derive(seed, &[2])))?;
            Ok(collect_roots(&ens, &[root], idx).remove(0))
        })
        .collect()
}

/// Compare finite-size root statistics against the limit ensemble, one row
/// per requested size. Graphs, marks and noise are resampled per
/// replication; every seed derives from `master_seed`.
pub fn convergence_study(cfg: &ConvergenceConfig, master_seed: u64) -> Result<Vec<StudyRow>> {
    let grid_len = (cfg.t / cfg.dt).round() as usize + 1;
    let idx = subsample_indices(grid_len, cfg.path_points);
    let dict = default_dictionary(cfg.path_points);
    let limit_samples = limit_ensemble(cfg, master_seed, &idx)?;

    let mut rows = Vec::with_capacity(cfg.sizes.len());
    for &n in &cfg.sizes {
        let finite: Vec<RootSample> = (0..cfg.graphs_per_size)
            .into_par_iter()
            .map(|i| {
                let seed = finite_seed(master_seed, n, i);
                let (graph, forced_root) = cfg.model.sample(n, seed)?;
                let net = attach_iid_marks(&graph, &cfg.marks, rng::derive(seed, &[1]))?;
                let ens = simulate(
                    &net,
                    &cfg.drift,
                    cfg.t,
                    cfg.dt,
                    &NoiseSource::new(rng::derive(seed, &[2])),
                )?;
                let roots: Vec<usize> = match forced_root {
                    Some(r) => vec![r],
                    None => (0..cfg.roots_per_graph)
                        .map(|j| uniform_vertex(net.vertex_count(), rng::derive(seed, &[3, j as u64])))
                        .collect(),
                };
                Ok(collect_roots(&ens, &roots, &idx))
            })
            .collect::<Result<Vec<Vec<RootSample>>>>()?
            .into_iter()
            .flatten()
            .collect();

        let fin_marginals: Vec<f64> = finite.iter().map(|s| s.terminal).collect();
        let lim_marginals: Vec<f64> = limit_samples.iter().map(|s| s.terminal).collect();
        let w1 = wasserstein1_1d(&fin_marginals, &lim_marginals)?;
        let w1_stderr = bootstrap_stderr(
            &fin_marginals,
            &lim_marginals,
            |a, b| wasserstein1_1d(a, b).unwrap(),
            cfg.bootstrap,
            rng::derive(master_seed, &[4, n as u64]),
        );

        let fin_paths: Vec<Vec<f64>> = finite.iter().map(|s| s.path.clone()).collect();
        let lim_paths: Vec<Vec<f64>> = limit_samples.iter().map(|s| s.path.clone()).collect();
        let bl = bl_lower_bound(
            &EmpiricalMeasure::uniform(fin_paths.clone())?,
            &EmpiricalMeasure::uniform(lim_paths.clone())?,
            &dict,
        )?;
        let dict_ref = &dict;
        let bl_stderr = bootstrap_stderr(
            &fin_paths,
            &lim_paths,
            |a, b| {
                bl_lower_bound(
                    &EmpiricalMeasure::uniform(a.to_vec()).unwrap(),
                    &EmpiricalMeasure::uniform(b.to_vec()).unwrap(),
                    dict_ref,
                )
                .unwrap()
            },
            cfg.bootstrap,
            rng::derive(master_seed, &[5, n as u64]),
        );

        rows.push(StudyRow {
            n,
            w1_marginal: w1,
            w1_stderr,
            bl_paths: bl,
            bl_stderr,
            finite_samples: fin_marginals.len(),
            limit_samples: lim_marginals.len(),
        });
    }
    Ok(rows)
}

/// CSV export: `n,statistic,estimate,stderr,config_hash`.
pub fn write_study_csv(
    rows: &[StudyRow],
    config_hash: &str,
    out: &mut dyn Write,
) -> std::io::Result<()> {
    writeln!(out, "n,statistic,estimate,stderr,config_hash")?;
    for row in rows {
        writeln!(
            out,
            "{},w1_marginal,{},{},{}",
            row.n,
            crate::fmt_f64(row.w1_marginal),
            crate::fmt_f64(row.w1_stderr),
            config_hash
        )?;
        writeln!(
            out,
            "{},bl_paths,{},{},{}",
            row.n,
            crate::fmt_f64(row.bl_paths),
            crate::fmt_f64(row.bl_stderr),
            config_hash
        )?;
    }
    Ok(())
}

/// Value of the radius-`r` truncated neighborhood measure applied to a path
/// functional: the average over vertices of `h` evaluated on the root path
/// of the system solved on that vertex's ball (the truncated system, not
/// the restriction of the full one). Noise is keyed by `noise_ids`.
pub fn truncated_empirical_value_with_ids(
    net: &MarkedNetwork,
    noise_ids: &[usize],
    radius: usize,
    h: &PathFunctional,
    time_subsample: &[usize],
    t: f64,
    dt: f64,
    drift: &DriftSpec,
    noise: &NoiseSource,
) -> Result<f64> {
    let n = net.vertex_count();
    let mut total = 0.0;
    for v in 0..n {
        let ball = rooted_ball_network(net, v, radius);
        let ids: Vec<usize> = ball.to_parent.iter().map(|&p| noise_ids[p]).collect();
        let ens = simulate_with_ids(&ball.network, &ids, drift, t, dt, noise)?;
        let row = ball.root;
        let path: Vec<f64> = time_subsample.iter().map(|&k| ens.paths[row][k]).collect();
        total += h.eval(&path);
    }
    Ok(total / n as f64)
}

/// Convenience wrapper with identity noise keys.
#[allow(clippy::too_many_arguments)]
pub fn truncated_empirical_value(
    net: &MarkedNetwork,
    radius: usize,
    h: &PathFunctional,
    time_subsample: &[usize],
    t: f64,
    dt: f64,
    drift: &DriftSpec,
    noise: &NoiseSource,
) -> Result<f64> {
    let ids: Vec<usize> = (0..net.vertex_count()).collect();
    truncated_empirical_value_with_ids(net, &ids, radius, h, time_subsample, t, dt, drift, noise)
}

/// Configuration for [`concentration_scan`].
#[derive(Clone, Debug)]
pub struct ConcentrationConfig {
    pub model: FiniteModel,
    pub sizes: Vec<usize>,
    pub marks: MarkLaws,
    pub drift: DriftSpec,
    pub t: f64,
    pub dt: f64,
    pub radius: usize,
    /// Noise replications per size (at least 30).
    pub replications: usize,
    pub path_points: usize,
    pub bootstrap: usize,
}

#[derive(Clone, Debug)]
pub struct ConcentrationRow {
    pub n: usize,
    pub mean: f64,
    pub std: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

const TAG_CONC: &str = "study/concentration";

/// Standard deviation of the truncated neighborhood statistic under
/// noise-only resampling: the graph and its marks are fixed per size, only
/// the Brownian increments are redrawn.
pub fn concentration_scan(
    cfg: &ConcentrationConfig,
    h: &PathFunctional,
    master_seed: u64,
) -> Result<Vec<ConcentrationRow>> {
    if cfg.replications < 30 {
        return Err(Error::InvalidParameter(format!(
            "need at least 30 replications, got {}",
            cfg.replications
        )));
    }
    let grid_len = (cfg.t / cfg.dt).round() as usize + 1;
    let idx = subsample_indices(grid_len, cfg.path_points);
    let mut rows = Vec::with_capacity(cfg.sizes.len());
    for &n in &cfg.sizes {
        let seed = concentration_seed(master_seed, n);
        let (graph, _) = cfg.model.sample(n, seed)?;
        let net = attach_iid_marks(&graph, &cfg.marks, rng::derive(seed, &[1]))?;
        let values: Vec<f64> = (0..cfg.replications)
            .into_par_iter()
            .map(|rep| {
                let noise = NoiseSource::new(rng::derive(seed, &[2, rep as u64]));
                truncated_empirical_value(
                    &net, cfg.radius, h, &idx, cfg.t, cfg.dt, &cfg.drift, &noise,
                )
            })
            .collect::<Result<Vec<f64>>>()?;
        let mean: f64 = values.iter().sum::<f64>() / values.len() as f64;
        let std = sample_std(&values);
        // bootstrap CI for the standard deviation
        let mut boot: Vec<f64> = (0..cfg.bootstrap)
            .into_par_iter()
            .map(|i| {
                let resampled: Vec<f64> = (0..values.len())
                    .map(|j| {
                        let k = rng::derive(seed, &[3, i as u64, j as u64]);
                        values[(rng::unit(rng::mix64(k)) * values.len() as f64) as usize
                            % values.len()]
                    })
                    .collect();
                sample_std(&resampled)
            })
            .collect();
        boot.sort_by(f64::total_cmp);
        let lo = boot[(0.025 * boot.len() as f64) as usize];
        let hi = boot[((0.975 * boot.len() as f64) as usize).min(boot.len() - 1)];
        rows.push(ConcentrationRow {
            n,
            mean,
            std,
            ci_lo: lo,
            ci_hi: hi,
        });
    }
    Ok(rows)
}

fn sample_std(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean: f64 = values.iter().sum::<f64>() / n;
    let var: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    var.sqrt()
}

/// CSV export: `n,mean,std,ci_lo,ci_hi`.
pub fn write_concentration_csv(
    rows: &[ConcentrationRow],
    out: &mut dyn Write,
) -> std::io::Result<()> {
    writeln!(out, "n,mean,std,ci_lo,ci_hi")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.n,
            crate::fmt_f64(r.mean),
            crate::fmt_f64(r.std),
            crate::fmt_f64(r.ci_lo),
            crate::fmt_f64(r.ci_hi)
        )?;
    }
    Ok(())
}

/// How observation roots enter the chaos-factorization estimator.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RootMode {
    /// Integrate the two independent uniform roots exactly: per replication
    /// use the full vertex averages `U(f)`, `U(g)`.
    ExactAverage,
    /// Draw this many independent root pairs per replication.
    SampledPairs { pairs: usize },
    /// Evaluate both functionals at the same root (the dependent case; a
    /// power check, not a chaos estimate).
    SameRoot,
}

/// Configuration for [`chaos_factorization`].
#[derive(Clone, Debug)]
pub struct ChaosConfig {
    pub model: FiniteModel,
    pub n: usize,
    pub marks: MarkLaws,
    pub drift: DriftSpec,
    pub t: f64,
    pub dt: f64,
    pub replications: usize,
    pub path_points: usize,
    pub bootstrap: usize,
    pub root_mode: RootMode,
}

#[derive(Clone, Debug)]
pub struct ChaosEstimate {
    /// `|E[f g] - E[f] E[g]|` estimate.
    pub covariance: f64,
    pub stderr: f64,
    pub mean_f: f64,
    pub mean_g: f64,
}

const TAG_CHAOS: &str = "study/chaos";

/// Monte Carlo estimate of `|E[f g] - E[f] E[g]|` over independent draws of
/// (graph, marks, noise, roots).
pub fn chaos_factorization(
    cfg: &ChaosConfig,
    f: &PathFunctional,
    g: &PathFunctional,
    master_seed: u64,
) -> Result<ChaosEstimate> {
    let grid_len = (cfg.t / cfg.dt).round() as usize + 1;
    let idx = subsample_indices(grid_len, cfg.path_points);
    // per replication: (X, Y, Z) with E[Z] estimating E[fg] and X, Y
    // estimating the marginal means
    let triples: Vec<(f64, f64, f64)> = (0..cfg.replications)
        .into_par_iter()
        .map(|rep| {
            let seed = chaos_seed(master_seed, rep);
            let (graph, _) = cfg.model.sample(cfg.n, seed)?;
            let net = attach_iid_marks(&graph, &cfg.marks, rng::derive(seed, &[1]))?;
            let ens = simulate(
                &net,
                &cfg.drift,
                cfg.t,
                cfg.dt,
                &NoiseSource::new(rng::derive(seed, &[2])),
            )?;
            let n = net.vertex_count();
            let eval = |v: usize, h: &PathFunctional| -> f64 {
                let path: Vec<f64> = idx.iter().map(|&k| ens.paths[v][k]).collect();
                h.eval(&path)
            };
            Ok(match cfg.root_mode {
                RootMode::ExactAverage => {
                    let uf: f64 = (0..n).map(|v| eval(v, f)).sum::<f64>() / n as f64;
                    let ug: f64 = (0..n).map(|v| eval(v, g)).sum::<f64>() / n as f64;
                    (uf, ug, uf * ug)
                }
                RootMode::SameRoot => {
                    let uf: f64 = (0..n).map(|v| eval(v, f)).sum::<f64>() / n as f64;
                    let ug: f64 = (0..n).map(|v| eval(v, g)).sum::<f64>() / n as f64;
                    let ufg: f64 =
                        (0..n).map(|v| eval(v, f) * eval(v, g)).sum::<f64>() / n as f64;
                    (uf, ug, ufg)
                }
                RootMode::SampledPairs { pairs } => {
                    let mut sf = 0.0;
                    let mut sg = 0.0;
                    let mut sfg = 0.0;
                    for j in 0..pairs {
                        let u = uniform_vertex(n, rng::derive(seed, &[3, j as u64]));
                        let w = uniform_vertex(n, rng::derive(seed, &[4, j as u64]));
                        let fv = eval(u, f);
                        let gv = eval(w, g);
                        sf += fv;
                        sg += gv;
                        sfg += fv * gv;
                    }
                    (sf / pairs as f64, sg / pairs as f64, sfg / pairs as f64)
                }
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let estimate = |t: &[(f64, f64, f64)]| -> f64 {
        let m = t.len() as f64;
        let mx: f64 = t.iter().map(|&(x, _, _)| x).sum::<f64>() / m;
        let my: f64 = t.iter().map(|&(_, y, _)| y).sum::<f64>() / m;
        let mz: f64 = t.iter().map(|&(_, _, z)| z).sum::<f64>() / m;
        mz - mx * my
    };
    let point = estimate(&triples);
    let mean_f: f64 = triples.iter().map(|&(x, _, _)| x).sum::<f64>() / triples.len() as f64;
    let mean_g: f64 = triples.iter().map(|&(_, y, _)| y).sum::<f64>() / triples.len() as f64;

    let boot_seed = rng::derive(master_seed, &[rng::tag(TAG_CHAOS), u64::MAX]);
    let boots: Vec<f64> = (0..cfg.bootstrap)
        .into_par_iter()
        .map(|i| {
            let resampled: Vec<(f64, f64, f64)> = (0..triples.len())
                .map(|j| {
                    let k = rng::derive(boot_seed, &[i as u64, j as u64]);
                    triples[(rng::unit(rng::mix64(k)) * triples.len() as f64) as usize
                        % triples.len()]
                })
                .collect();
            estimate(&resampled)
        })
        .collect();
    let bmean: f64 = boots.iter().sum::<f64>() / boots.len() as f64;
    let bvar: f64 =
        boots.iter().map(|v| (v - bmean) * (v - bmean)).sum::<f64>() / (boots.len() - 1) as f64;

    Ok(ChaosEstimate {
        covariance: point.abs(),
        stderr: bvar.sqrt(),
        mean_f,
        mean_g,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::MarkDistribution;
    use std::f64::consts::TAU;

    fn kuramoto_marks() -> MarkLaws {
        MarkLaws {
            weight: MarkDistribution::Deterministic { value: 1.0 },
            media: MarkDistribution::Normal { mean: 1.0, sd: 1.0 },
            initial: MarkDistribution::Uniform { lo: 0.0, hi: TAU },
        }
    }

    #[test]
    fn dictionary_entries_have_unit_bl_norm() {
        // finite-difference verification of the declared norms
        let dict = default_dictionary(5);
        assert_eq!(dict.len(), 32);
        for (i, h) in dict.iter().enumerate() {
            let mut sup: f64 = 0.0;
            let mut lip: f64 = 0.0;
            for s in 0..200u64 {
                let path_a: Vec<f64> = (0..5)
                    .map(|j| 6.0 * rng::unit(rng::derive(s, &[i as u64, j])) - 3.0)
                    .collect();
                let path_b: Vec<f64> = (0..5)
                    .map(|j| 6.0 * rng::unit(rng::derive(s, &[99, i as u64, j])) - 3.0)
                    .collect();
                let (fa, fb) = (h.eval(&path_a), h.eval(&path_b));
                sup = sup.max(fa.abs()).max(fb.abs());
                let d = path_a
                    .iter()
                    .zip(path_b.iter())
                    .map(|(x, y)| (x - y).abs())
                    .fold(0.0f64, f64::max);
                if d > 1e-9 {
                    lip = lip.max((fa - fb).abs() / d);
                }
            }
            assert!(sup + lip <= 1.0 + 1e-9, "entry {i}: sup {sup} + lip {lip}");
        }
    }

    #[test]
    fn trajectory_measure_single_vertex() {
        let ens = constant_ensemble(vec![vec![1.0, 2.0, 3.0]]);
        let m = trajectory_measure(&ens, &[0, 2]).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m.weights(), &[1.0]);
        assert_eq!(m.atoms()[0], vec![1.0, 3.0]);
    }

    fn constant_ensemble(paths: Vec<Vec<f64>>) -> TrajectoryEnsemble {
        let n = paths.len();
        TrajectoryEnsemble {
            dt: 0.5,
            paths,
            vertex_ids: (0..n).collect(),
            provenance: crate::diffusion::Provenance {
                network_hash: 0,
                master_seed: 0,
                horizon: 1.0,
                dt: 0.5,
                noise_scale: 0.0,
            },
        }
    }

    #[test]
    fn trajectory_measure_weights_and_bitwise_atoms() {
        let paths: Vec<Vec<f64>> = (0..57)
            .map(|v| (0..11).map(|k| (v * k) as f64 * 0.1 + 1.0 / (v + 1) as f64).collect())
            .collect();
        let ens = constant_ensemble(paths.clone());
        let m = trajectory_measure(&ens, &[0, 5, 10]).unwrap();
        let total: f64 = m.weights().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        for (v, atom) in m.atoms().iter().enumerate() {
            assert_eq!(atom[0].to_bits(), paths[v][0].to_bits());
            assert_eq!(atom[1].to_bits(), paths[v][5].to_bits());
            assert_eq!(atom[2].to_bits(), paths[v][10].to_bits());
        }
    }

    #[test]
    fn bl_lower_bound_vanishes_on_equal_measures() {
        let atoms: Vec<Vec<f64>> = (0..10).map(|v| vec![v as f64 * 0.3; 4]).collect();
        let mu = EmpiricalMeasure::uniform(atoms.clone()).unwrap();
        let nu = EmpiricalMeasure::uniform(atoms).unwrap();
        let dict = default_dictionary(4);
        assert_eq!(bl_lower_bound(&mu, &nu, &dict).unwrap(), 0.0);
    }

    #[test]
    fn bl_lower_bound_point_masses_direct_evaluation() {
        let mu = EmpiricalMeasure::uniform(vec![vec![0.0, 0.0]]).unwrap();
        let nu = EmpiricalMeasure::uniform(vec![vec![1.0, 1.0]]).unwrap();
        let h = PathFunctional::sigmoid(1, 1.0, 0.0);
        let norm = h.norm();
        let value = bl_lower_bound(&mu, &nu, &[h]).unwrap();
        let expect = (1.0f64.tanh() - 0.0f64.tanh()).abs() / norm;
        assert!((value - expect).abs() < 1e-15);
    }

    #[test]
    fn bl_lower_bound_never_exceeds_two() {
        for seed in 0..30u64 {
            let atoms_a: Vec<Vec<f64>> = (0..8)
                .map(|v| {
                    (0..4)
                        .map(|k| 100.0 * rng::unit(rng::derive(seed, &[v, k])) - 50.0)
                        .collect()
                })
                .collect();
            let atoms_b: Vec<Vec<f64>> = (0..8)
                .map(|v| {
                    (0..4)
                        .map(|k| 100.0 * rng::unit(rng::derive(seed + 1000, &[v, k])) - 50.0)
                        .collect()
                })
                .collect();
            let mu = EmpiricalMeasure::uniform(atoms_a).unwrap();
            let nu = EmpiricalMeasure::uniform(atoms_b).unwrap();
            let d = bl_lower_bound(&mu, &nu, &default_dictionary(4)).unwrap();
            assert!((0.0..=2.0).contains(&d));
        }
    }

    #[test]
    fn bl_lower_bound_rejects_shape_mismatch() {
        let mu = EmpiricalMeasure::uniform(vec![vec![0.0, 0.0]]).unwrap();
        let nu = EmpiricalMeasure::uniform(vec![vec![1.0]]).unwrap();
        assert!(bl_lower_bound(&mu, &nu, &default_dictionary(2)).is_err());
    }

    /// Exact d_BL between two measures supported on the same two reals, by
    /// brute force over the two function values (a fine grid with the
    /// feasibility constraint sup + lip <= 1).
    fn exact_dbl_two_points(x: (f64, f64), p: f64, q: f64) -> f64 {
        let d = (x.0 - x.1).abs();
        let grid = 1200;
        let mut best: f64 = 0.0;
        for i in 0..=grid {
            for j in 0..=grid {
                let h0 = -1.0 + 2.0 * i as f64 / grid as f64;
                let h1 = -1.0 + 2.0 * j as f64 / grid as f64;
                let sup = h0.abs().max(h1.abs());
                let lip = if d > 0.0 { (h0 - h1).abs() / d } else { 0.0 };
                if sup + lip <= 1.0 {
                    best = best.max((p - q) * h0 + ((1.0 - p) - (1.0 - q)) * h1);
                }
            }
        }
        best
    }

    #[test]
    fn bl_lower_bound_below_exact_dbl_on_two_atom_measures() {
        // measures on shared support {x0, x1}, compared at one coordinate
        for seed in 0..10u64 {
            let x0 = 2.0 * rng::unit(rng::derive(seed, &[1])) - 1.0;
            let x1 = x0 + 0.3 + rng::unit(rng::derive(seed, &[2]));
            let p = rng::unit(rng::derive(seed, &[3]));
            let q = rng::unit(rng::derive(seed, &[4]));
            let exact = exact_dbl_two_points((x0, x1), p, q);
            // single-coordinate paths
            let mu = EmpiricalMeasure::new(
                vec![vec![x0], vec![x1]],
                vec![p, 1.0 - p],
            )
            .unwrap();
            let nu = EmpiricalMeasure::new(
                vec![vec![x0], vec![x1]],
                vec![q, 1.0 - q],
            )
            .unwrap();
            let dict = default_dictionary(1);
            let lower = bl_lower_bound(&mu, &nu, &dict).unwrap();
            assert!(
                lower <= exact + 2e-3,
                "seed {seed}: lower {lower} vs exact {exact}"
            );
        }
    }

    #[test]
    fn point_mass_dbl_closed_form_dominates_dictionary() {
        // d_BL(delta_x, delta_y) = 2|x-y| / (2 + |x-y|)
        for seed in 0..10u64 {
            let x = 3.0 * rng::unit(rng::derive(seed, &[7])) - 1.5;
            let y = x + 0.1 + 2.0 * rng::unit(rng::derive(seed, &[8]));
            let exact = 2.0 * (x - y).abs() / (2.0 + (x - y).abs());
            let mu = EmpiricalMeasure::uniform(vec![vec![x]]).unwrap();
            let nu = EmpiricalMeasure::uniform(vec![vec![y]]).unwrap();
            let lower = bl_lower_bound(&mu, &nu, &default_dictionary(1)).unwrap();
            assert!(lower <= exact + 1e-12, "lower {lower} vs exact {exact}");
        }
    }

    #[test]
    fn wasserstein_basics() {
        let xs = [0.4, -1.0, 2.0];
        assert_eq!(wasserstein1_1d(&xs, &xs).unwrap(), 0.0);
        assert_eq!(wasserstein1_1d(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 1.0);
        assert!((wasserstein1_1d(&[0.3], &[-0.9]).unwrap() - 1.2).abs() < 1e-15);
        assert!(wasserstein1_1d(&[], &[1.0]).is_err());
    }

    #[test]
    fn wasserstein_translation_oracle() {
        let n = 10_000;
        let a: Vec<f64> = (0..n).map(|i| rng::unit(rng::derive(1, &[i]))).collect();
        let b: Vec<f64> = (0..n)
            .map(|i| rng::unit(rng::derive(2, &[i])) + 0.3)
            .collect();
        let d = wasserstein1_1d(&a, &b).unwrap();
        assert!((d - 0.3).abs() < 0.02, "distance {d}");
    }

    #[test]
    fn wasserstein_is_a_metric_on_sampled_triples() {
        for seed in 0..100u64 {
            let len = 5 + (seed as usize % 4);
            let make = |tag: u64| -> Vec<f64> {
                (0..len)
                    .map(|i| 4.0 * rng::unit(rng::derive(seed, &[tag, i as u64])) - 2.0)
                    .collect()
            };
            let (a, b, c) = (make(1), make(2), make(3));
            let dab = wasserstein1_1d(&a, &b).unwrap();
            let dba = wasserstein1_1d(&b, &a).unwrap();
            assert!((dab - dba).abs() < 1e-12);
            let dac = wasserstein1_1d(&a, &c).unwrap();
            let dcb = wasserstein1_1d(&c, &b).unwrap();
            assert!(dab <= dac + dcb + 1e-12, "triangle violated at seed {seed}");
        }
    }

    #[test]
    fn wasserstein_unequal_sizes_translation() {
        let a: Vec<f64> = (0..500).map(|i| rng::unit(rng::derive(5, &[i]))).collect();
        let b: Vec<f64> = (0..800)
            .map(|i| rng::unit(rng::derive(6, &[i])) + 0.25)
            .collect();
        let d = wasserstein1_1d(&a, &b).unwrap();
        assert!((d - 0.25).abs() < 0.05, "distance {d}");
    }

    fn tiny_drift() -> DriftSpec {
        DriftSpec::kuramoto(0.1)
    }

    #[test]
    fn convergence_self_test_sits_at_noise_floor() {
        // model = limit: distances should be statistically indistinguishable
        let law = OffspringLaw::Poisson { mean: 2.0 };
        let cfg = ConvergenceConfig {
            model: FiniteModel::GwTree {
                root_law: law.clone(),
                law: law.clone(),
                depth: 4,
            },
            sizes: vec![0],
            marks: kuramoto_marks(),
            drift: tiny_drift(),
            t: 0.5,
            dt: 0.01,
            limit: LimitSampler::GwTree {
                root_law: law.clone(),
                law,
                depth: 4,
            },
            limit_replications: 150,
            graphs_per_size: 150,
            roots_per_graph: 1,
            path_points: 4,
            bootstrap: 200,
        };
        let rows = convergence_study(&cfg, 99).unwrap();
        let row = &rows[0];
        assert!(
            row.w1_marginal <= 4.0 * row.w1_stderr.max(1e-3),
            "w1 {} vs stderr {}",
            row.w1_marginal,
            row.w1_stderr
        );
        assert!(
            row.bl_paths <= 4.0 * row.bl_stderr.max(1e-3),
            "bl {} vs stderr {}",
            row.bl_paths,
            row.bl_stderr
        );
    }

    #[test]
    fn cycles_match_line_segment_limit() {
        let cfg = ConvergenceConfig {
            model: FiniteModel::Cycle,
            sizes: vec![50, 120],
            marks: kuramoto_marks(),
            drift: tiny_drift(),
            t: 0.5,
            dt: 0.01,
            limit: LimitSampler::LineSegment { radius: 10 },
            limit_replications: 150,
            graphs_per_size: 10,
            roots_per_graph: 15,
            path_points: 4,
            bootstrap: 200,
        };
        let rows = convergence_study(&cfg, 7).unwrap();
        for row in &rows {
            assert!(
                row.w1_marginal <= 5.0 * row.w1_stderr.max(1e-3),
                "n {}: w1 {} vs stderr {}",
                row.n,
                row.w1_marginal,
                row.w1_stderr
            );
        }
    }

    #[test]
    fn concentration_single_vertex_equals_raw_std() {
        // n = 1: no averaging, the scan reproduces the per-draw spread of h
        let cfg = ConcentrationConfig {
            model: FiniteModel::GwTree {
                root_law: OffspringLaw::Deterministic { children: 0 },
                law: OffspringLaw::Deterministic { children: 0 },
                depth: 0,
            },
            sizes: vec![1],
            marks: kuramoto_marks(),
            drift: tiny_drift(),
            t: 0.5,
            dt: 0.01,
            radius: 1,
            replications: 60,
            path_points: 3,
            bootstrap: 100,
        };
        let h = PathFunctional::sigmoid(2, 1.0, 0.0);
        let rows = concentration_scan(&cfg, &h, 3).unwrap();
        assert_eq!(rows.len(), 1);
        // reproduce by hand with the same seed chain
        let seed = concentration_seed(3, 1);
        let (graph, _) = cfg.model.sample(1, seed).unwrap();
        let net = attach_iid_marks(&graph, &cfg.marks, rng::derive(seed, &[1])).unwrap();
        let idx = subsample_indices(51, 3);
        let values: Vec<f64> = (0..60)
            .map(|rep| {
                let noise = NoiseSource::new(rng::derive(seed, &[2, rep as u64]));
                truncated_empirical_value(&net, 1, &h, &idx, 0.5, 0.01, &cfg.drift, &noise)
                    .unwrap()
            })
            .collect();
        assert!((rows[0].std - sample_std(&values)).abs() < 1e-15);
    }

    #[test]
    fn concentration_constant_function_has_zero_std() {
        let cfg = ConcentrationConfig {
            model: FiniteModel::ErdosRenyi { mean_degree: 2.0 },
            sizes: vec![40],
            marks: kuramoto_marks(),
            drift: tiny_drift(),
            t: 0.5,
            dt: 0.01,
            radius: 1,
            replications: 30,
            path_points: 3,
            bootstrap: 50,
        };
        let h = PathFunctional::constant(0.4);
        let rows = concentration_scan(&cfg, &h, 5).unwrap();
        assert!(rows[0].std < 1e-13, "std {}", rows[0].std);
    }

    #[test]
    fn concentration_rejects_few_replications() {
        let cfg = ConcentrationConfig {
            model: FiniteModel::Cycle,
            sizes: vec![10],
            marks: kuramoto_marks(),
            drift: tiny_drift(),
            t: 0.5,
            dt: 0.01,
            radius: 1,
            replications: 10,
            path_points: 3,
            bootstrap: 50,
        };
        assert!(concentration_scan(&cfg, &PathFunctional::constant(0.0), 1).is_err());
    }

    #[test]
    fn concentration_value_is_relabeling_equivariant() {
        // permuting vertices while carrying noise identities along leaves
        // the statistic unchanged up to summation order
        let g = sample_erdos_renyi(24, 0.12, 3).unwrap();
        let net = attach_iid_marks(&g, &kuramoto_marks(), 8).unwrap();
        let h = PathFunctional::sigmoid(2, 1.0, 0.0);
        let idx = [0usize, 25, 50];
        let drift = tiny_drift();
        let noise = NoiseSource::new(21);
        let ids: Vec<usize> = (0..24).collect();
        let base =
            truncated_empirical_value_with_ids(&net, &ids, 1, &h, &idx, 0.5, 0.01, &drift, &noise)
                .unwrap();
        for round in 0..5u64 {
            let n = 24;
            let mut perm: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                let j = (rng::derive(round, &[41, i as u64]) % (i as u64 + 1)) as usize;
                perm.swap(i, j);
            }
            let edges: Vec<(usize, usize, f64)> = net
                .weighted_edges()
                .into_iter()
                .map(|(u, v, w)| (perm[u], perm[v], w))
                .collect();
            let mut media = vec![0.0; n];
            let mut initial = vec![0.0; n];
            let mut inv_ids = vec![0usize; n];
            for v in 0..n {
                media[perm[v]] = net.media[v];
                initial[perm[v]] = net.initial[v];
                inv_ids[perm[v]] = v;
            }
            let mut plain: Vec<(usize, usize)> = edges.iter().map(|&(u, v, _)| (u, v)).collect();
            plain.sort_unstable();
            let pg = Graph::from_edges(n, &plain).unwrap();
            let pnet = crate::network::MarkedNetwork::from_parts(pg, &edges, media, initial)
                .unwrap();
            let value = truncated_empirical_value_with_ids(
                &pnet, &inv_ids, 1, &h, &idx, 0.5, 0.01, &drift, &noise,
            )
            .unwrap();
            assert!(
                (value - base).abs() < 1e-12,
                "round {round}: {value} vs {base}"
            );
        }
    }

    #[test]
    fn chaos_constant_function_gives_exact_zero() {
        let cfg = ChaosConfig {
            model: FiniteModel::ErdosRenyi { mean_degree: 2.0 },
            n: 30,
            marks: kuramoto_marks(),
            drift: tiny_drift(),
            t: 0.5,
            dt: 0.01,
            replications: 20,
            path_points: 3,
            bootstrap: 50,
            root_mode: RootMode::ExactAverage,
        };
        let f = PathFunctional::constant(0.7);
        let g = PathFunctional::sigmoid(2, 1.0, 0.0);
        let est = chaos_factorization(&cfg, &f, &g, 11).unwrap();
        assert!(est.covariance < 1e-15, "covariance {}", est.covariance);
    }

    #[test]
    fn chaos_same_root_detects_dependence() {
        // strongly coupled small graph, identical functionals: the same-root
        // second moment exceeds the product of means
        let cfg = ChaosConfig {
            model: FiniteModel::ErdosRenyi { mean_degree: 3.0 },
            n: 12,
            marks: kuramoto_marks(),
            drift: tiny_drift(),
            t: 0.5,
            dt: 0.01,
            replications: 120,
            path_points: 3,
            bootstrap: 200,
            root_mode: RootMode::SameRoot,
        };
        let f = PathFunctional::sigmoid(2, 1.3, 1.0);
        let est = chaos_factorization(&cfg, &f, &f, 13).unwrap();
        assert!(
            est.covariance > 3.0 * est.stderr,
            "covariance {} vs stderr {}",
            est.covariance,
            est.stderr
        );
    }
}
