//! Stochastic Kuramoto synchronization on Galton-Watson trees: the order
//! parameter between the root and fixed-distance levels, sync levels over
//! the tail window, and full phase-diagram surfaces.
//!
//! The coupling follows the unnormalized convention: the neighbor sum is
//! multiplied by the coupling strength `K` and not divided by the degree.

use crate::diffusion::{simulate_observed, DriftSpec, NoiseSource, TrajectoryEnsemble};
use crate::graph::{sample_gw_tree, OffspringLaw, RootedTree};
use crate::network::MarkedNetwork;
use crate::rng;
use crate::{Error, Result};
use rayon::prelude::*;
use std::io::Write;

/// Tree models of the synchronization study.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GwModel {
    /// Every vertex (root included) draws Binomial(n, p) children.
    Binomial { n: u64, p: f64 },
    /// The root has `c` children, everyone else `c - 1`.
    DRegular { c: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Theta0Mode {
    AllZero,
    /// Uniform on `[0, 2 pi)`.
    Uniform,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OmegaMode {
    AllOne,
    /// Normal with mean 1 and variance 1.
    Normal,
    /// Uniform on `[0, 2 pi)`.
    Uniform,
}

/// Full study configuration. `Default` reproduces the reference protocol:
/// Binomial(3, 2/3) trees with 13 generations, T = 100, dt = 0.01,
/// noise 0.05, K from 0 to 10 in steps of 0.2, 100 replications, zero
/// initial phases and unit natural frequencies.
#[derive(Clone, Debug, PartialEq)]
pub struct SyncConfig {
    pub model: GwModel,
    pub generations: usize,
    pub t: f64,
    pub dt: f64,
    pub epsilon: f64,
    pub k_values: Vec<f64>,
    pub replications: usize,
    pub theta0: Theta0Mode,
    pub omega: OmegaMode,
}

impl Default for SyncConfig {
    fn default() -> Self {
        SyncConfig {
            model: GwModel::Binomial { n: 3, p: 2.0 / 3.0 },
            generations: 13,
            t: 100.0,
            dt: 0.01,
            epsilon: 0.05,
            k_values: (0..=50).map(|i| i as f64 / 5.0).collect(),
            replications: 100,
            theta0: Theta0Mode::AllZero,
            omega: OmegaMode::AllOne,
        }
    }
}

impl SyncConfig {
    /// Laptop-scale preset: 25 replications and a unit K step; everything
    /// else as the full protocol.
    pub fn reduced() -> Self {
        SyncConfig {
            k_values: (0..=10).map(|i| i as f64).collect(),
            replications: 25,
            ..SyncConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.generations == 0 {
            return Err(Error::InvalidParameter("need at least one generation".into()));
        }
        if self.k_values.is_empty() {
            return Err(Error::InvalidParameter("empty K grid".into()));
        }
        if self.replications == 0 {
            return Err(Error::InvalidParameter("need at least one replication".into()));
        }
        if !(self.dt > 0.0 && self.t >= self.dt) {
            return Err(Error::InvalidParameter(format!(
                "bad grid: T = {}, dt = {}",
                self.t, self.dt
            )));
        }
        if self.epsilon < 0.0 {
            return Err(Error::InvalidParameter("negative noise intensity".into()));
        }
        if let GwModel::Binomial { n, p } = self.model {
            OffspringLaw::Binomial { n, p }.validate()?;
        }
        if let GwModel::DRegular { c } = self.model {
            if c == 0 {
                return Err(Error::InvalidParameter("root must have children".into()));
            }
        }
        Ok(())
    }

    /// Stable hash over all configuration fields.
    pub fn content_hash(&self) -> u64 {
        let mut h = rng::mix64(0x53ca1e_u64);
        let mut word = |w: u64| h = rng::mix64(h ^ w.wrapping_mul(0x9e37_79b9_7f4a_7c15));
        match self.model {
            GwModel::Binomial { n, p } => {
                word(1);
                word(n);
                word(p.to_bits());
            }
            GwModel::DRegular { c } => {
                word(2);
                word(c as u64);
            }
        }
        word(self.generations as u64);
        word(self.t.to_bits());
        word(self.dt.to_bits());
        word(self.epsilon.to_bits());
        for &k in &self.k_values {
            word(k.to_bits());
        }
        word(self.replications as u64);
        word(match self.theta0 {
            Theta0Mode::AllZero => 3,
            Theta0Mode::Uniform => 4,
        });
        word(match self.omega {
            OmegaMode::AllOne => 5,
            OmegaMode::Normal => 6,
            OmegaMode::Uniform => 7,
        });
        h
    }

    fn offspring_laws(&self) -> (OffspringLaw, OffspringLaw) {
        match self.model {
            GwModel::Binomial { n, p } => (
                OffspringLaw::Binomial { n, p },
                OffspringLaw::Binomial { n, p },
            ),
            GwModel::DRegular { c } => (
                OffspringLaw::Deterministic { children: c },
                OffspringLaw::Deterministic { children: c - 1 },
            ),
        }
    }
}

/// Mean synchronization surface with per-cell uncertainty and survival
/// counts. Cells whose level died out in every replication are NaN.
#[derive(Clone, Debug)]
pub struct SyncSurface {
    pub k_values: Vec<f64>,
    pub generations: usize,
    /// `mean[h-1][k_idx]`.
    pub mean: Vec<Vec<f64>>,
    pub stderr: Vec<Vec<f64>>,
    /// Number of replications whose tree reached level `h`.
    pub survivors: Vec<Vec<usize>>,
    pub config_hash: u64,
    pub master_seed: u64,
}

impl SyncSurface {
    fn write_matrix(
        &self,
        data: &[Vec<f64>],
        out: &mut dyn Write,
    ) -> std::io::Result<()> {
        write!(out, "h")?;
        for &k in &self.k_values {
            write!(out, ",{k}")?;
        }
        writeln!(out)?;
        for (row, values) in data.iter().enumerate() {
            write!(out, "{}", row + 1)?;
            for &v in values {
                if v.is_nan() {
                    write!(out, ",nan")?;
                } else {
                    write!(out, ",{}", crate::fmt_f64(v))?;
                }
            }
            writeln!(out)?;
        }
        Ok(())
    }

    /// Mean-surface CSV: rows are distances `h`, columns the K grid.
    pub fn write_mean_csv(&self, out: &mut dyn Write) -> std::io::Result<()> {
        self.write_matrix(&self.mean, out)
    }

    /// Standard-error sidecar with the same layout.
    pub fn write_stderr_csv(&self, out: &mut dyn Write) -> std::io::Result<()> {
        self.write_matrix(&self.stderr, out)
    }
}

/// The modulus of the average unit phase vector over the root plus one
/// level. Shared by the ensemble and streaming paths so both produce
/// bitwise-identical values.
fn level_modulus(theta: &dyn Fn(usize) -> f64, root: usize, level: &[usize]) -> f64 {
    let root_theta = theta(root);
    let mut re = root_theta.cos();
    let mut im = root_theta.sin();
    for &j in level {
        let th = theta(j);
        re += th.cos();
        im += th.sin();
    }
    let denom = (1 + level.len()) as f64;
    (re * re + im * im).sqrt() / denom
}

/// Order parameter `r_h(t)` between the root and the vertices at distance
/// `h`, per grid point. Errors when the tree has no vertex at distance `h`.
pub fn order_parameter(
    ens: &TrajectoryEnsemble,
    tree: &RootedTree,
    h: usize,
) -> Result<Vec<f64>> {
    let level = tree.level(h);
    if level.is_empty() {
        return Err(Error::EmptyLevel { h });
    }
    let mut row_of = vec![usize::MAX; tree.graph.vertex_count()];
    for (row, &id) in ens.vertex_ids.iter().enumerate() {
        row_of[id] = row;
    }
    let grid_len = ens.grid_len();
    let mut out = Vec::with_capacity(grid_len);
    for k in 0..grid_len {
        let theta = |v: usize| ens.paths[row_of[v]][k];
        out.push(level_modulus(&theta, tree.root, &level));
    }
    Ok(out)
}

/// Start of the tail window: `floor(0.95 (len - 1))`, so the window is the
/// final 5% of grid indices, endpoint included.
pub fn sync_window_start(len: usize) -> usize {
    (0.95 * (len - 1) as f64).floor() as usize
}

fn windowed_mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Synchronization level: the time average of the last 5% of `r_h(t)`.
pub fn sync_level(r_path: &[f64]) -> f64 {
    assert!(!r_path.is_empty());
    let start = sync_window_start(r_path.len());
    windowed_mean(&r_path[start..])
}

const TAG_TREE: &str = "sync/tree";
const TAG_OMEGA: &str = "sync/omega";
const TAG_THETA0: &str = "sync/theta0";
const TAG_NOISE: &str = "sync/noise";

/// Derived seeds of one (replication, K index) cell, for manifests and
/// exact reruns.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CellSeeds {
    pub tree: u64,
    pub omega: u64,
    pub theta0: u64,
    pub noise: u64,
}

/// The seed chain used by [`phase_diagram`]: trees and marks are keyed by
/// replication, noise by (replication, K index). The D-Regular tree is
/// deterministic, so its seed is fixed at 0.
pub fn cell_seeds(cfg: &SyncConfig, master_seed: u64, rep: usize, k_idx: usize) -> CellSeeds {
    let tree = match cfg.model {
        GwModel::Binomial { .. } => rng::derive(master_seed, &[rng::tag(TAG_TREE), rep as u64]),
        GwModel::DRegular { .. } => 0,
    };
    CellSeeds {
        tree,
        omega: rng::derive(master_seed, &[rng::tag(TAG_OMEGA), rep as u64]),
        theta0: rng::derive(master_seed, &[rng::tag(TAG_THETA0), rep as u64]),
        noise: rng::derive(master_seed, &[rng::tag(TAG_NOISE), rep as u64, k_idx as u64]),
    }
}

fn sample_omega(mode: OmegaMode, seed: u64, n: usize) -> Vec<f64> {
    let tag = rng::tag(TAG_OMEGA);
    (0..n)
        .map(|v| match mode {
            OmegaMode::AllOne => 1.0,
            OmegaMode::Normal => 1.0 + rng::normal(rng::derive(seed, &[tag, v as u64])),
            OmegaMode::Uniform => {
                std::f64::consts::TAU * rng::unit(rng::mix64(rng::derive(seed, &[tag, v as u64])))
            }
        })
        .collect()
}

fn sample_theta0(mode: Theta0Mode, seed: u64, n: usize) -> Vec<f64> {
    let tag = rng::tag(TAG_THETA0);
    (0..n)
        .map(|v| match mode {
            Theta0Mode::AllZero => 0.0,
            Theta0Mode::Uniform => {
                std::f64::consts::TAU * rng::unit(rng::mix64(rng::derive(seed, &[tag, v as u64])))
            }
        })
        .collect()
}

/// The tree used by replication `rep`: resampled per replication in the
/// Binomial model, fixed (deterministic) in the D-Regular model, truncated
/// at `generations` either way (leaves at the last generation are childless).
fn replication_tree(cfg: &SyncConfig, master_seed: u64, rep: usize) -> Result<RootedTree> {
    let (root_law, law) = cfg.offspring_laws();
    let seed = cell_seeds(cfg, master_seed, rep, 0).tree;
    sample_gw_tree(&root_law, &law, cfg.generations, seed)
}

/// Sync levels for one (replication, K) cell: `result[h-1]` is `None` when
/// the tree died before level `h`. Marks are keyed by replication, noise by
/// (replication, K index).
fn run_sync_cell(
    cfg: &SyncConfig,
    master_seed: u64,
    rep: usize,
    k_idx: usize,
) -> Result<Vec<Option<f64>>> {
    let seeds = cell_seeds(cfg, master_seed, rep, k_idx);
    let tree = replication_tree(cfg, master_seed, rep)?;
    let n = tree.graph.vertex_count();
    let omega = sample_omega(cfg.omega, seeds.omega, n);
    let theta0 = sample_theta0(cfg.theta0, seeds.theta0, n);
    let net = MarkedNetwork::unit_weights(tree.graph.clone(), omega, theta0)?;
    let drift = DriftSpec::kuramoto_unnormalized(cfg.k_values[k_idx], cfg.epsilon);
    let noise = NoiseSource::new(seeds.noise);

    let levels: Vec<Vec<usize>> = (1..=cfg.generations).map(|h| tree.level(h)).collect();
    let n_steps = (cfg.t / cfg.dt).round() as usize;
    let window_start = sync_window_start(n_steps + 1);
    let mut recorded: Vec<Vec<f64>> = levels
        .iter()
        .map(|level| {
            if level.is_empty() {
                Vec::new()
            } else {
                Vec::with_capacity(n_steps + 1 - window_start)
            }
        })
        .collect();
    let ids: Vec<usize> = (0..n).collect();
    simulate_observed(&net, &ids, &drift, cfg.t, cfg.dt, &noise, |k, theta| {
        if k >= window_start {
            for (bucket, level) in recorded.iter_mut().zip(levels.iter()) {
                if !level.is_empty() {
                    let get = |v: usize| theta[v];
                    bucket.push(level_modulus(&get, tree.root, level));
                }
            }
        }
    })?;
    Ok(recorded
        .into_iter()
        .map(|bucket| {
            if bucket.is_empty() {
                None
            } else {
                Some(windowed_mean(&bucket))
            }
        })
        .collect())
}

/// Compute the full `(h, K)` synchronization surface. Cells are independent
/// tasks with seeds derived from `(master_seed, replication, K index)`, so
/// results do not depend on scheduling.
pub fn phase_diagram(cfg: &SyncConfig, master_seed: u64) -> Result<SyncSurface> {
    cfg.validate()?;
    let cells: Vec<(usize, usize)> = (0..cfg.replications)
        .flat_map(|rep| (0..cfg.k_values.len()).map(move |k| (rep, k)))
        .collect();
    let results: Vec<Vec<Option<f64>>> = cells
        .par_iter()
        .map(|&(rep, k_idx)| run_sync_cell(cfg, master_seed, rep, k_idx))
        .collect::<Result<Vec<_>>>()?;

    let hs = cfg.generations;
    let ks = cfg.k_values.len();
    let mut mean = vec![vec![f64::NAN; ks]; hs];
    let mut stderr = vec![vec![f64::NAN; ks]; hs];
    let mut survivors = vec![vec![0usize; ks]; hs];
    for h in 0..hs {
        for k in 0..ks {
            let mut values = Vec::new();
            for (cell, &(rep, k_idx)) in results.iter().zip(cells.iter()) {
                let _ = rep;
                if k_idx == k {
                    if let Some(v) = cell[h] {
                        values.push(v);
                    }
                }
            }
            survivors[h][k] = values.len();
            if !values.is_empty() {
                let m: f64 = values.iter().sum::<f64>() / values.len() as f64;
                mean[h][k] = m;
                if values.len() > 1 {
                    let var: f64 = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>()
                        / (values.len() - 1) as f64;
                    stderr[h][k] = (var / values.len() as f64).sqrt();
                } else {
                    stderr[h][k] = 0.0;
                }
            }
        }
    }
    Ok(SyncSurface {
        k_values: cfg.k_values.clone(),
        generations: hs,
        mean,
        stderr,
        survivors,
        config_hash: cfg.content_hash(),
        master_seed,
    })
}
