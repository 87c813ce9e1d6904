//! Coupled SDE integration on marked networks.
//!
//! The system integrated is, per vertex `v`,
//!
//! ```text
//! d theta_v = coupling_v(theta) dt + psi(theta_v; omega_v) dt + eps dB_v
//! ```
//!
//! where the coupling is either the weight-normalized pairwise sum
//! `(1/mu_v) sum_u mu_uv phi(theta_u, theta_v; omega_v, omega_u)` (zero when
//! `mu_v = 0`) or the unnormalized adjacency sum `K sum_{u ~ v} phi(...)`.
//!
//! Noise increments come from a counter-based generator keyed by
//! `(master_seed, vertex identity, step index)`. A vertex therefore sees the
//! same Brownian increments in every simulation that contains it — the
//! coupling that truncation experiments rely on — at O(1) memory.

use crate::graph::uniform_vertex;
use crate::network::{rooted_ball_network, MarkedNetwork, RootedBallNetwork};
use crate::rng;
use crate::{Error, Result};
use std::io::Write;

/// Hard bound on |theta| before the integrator reports instability. The
/// bounded drifts used here cannot blow up, so exceeding this means a
/// misconfigured custom drift.
pub const DEFAULT_OVERFLOW_GUARD: f64 = 1e9;

/// Column-normalized interaction weights `P_uv = mu_uv / mu_v` (zero column
/// for vertices with `mu_v = 0`).
#[derive(Clone, Debug)]
pub struct InteractionMatrix {
    /// `columns[v]` lists `(u, P_uv)` for the neighbors `u` of `v`, ascending.
    pub columns: Vec<Vec<(usize, f64)>>,
    /// Vertices with zero total weight.
    pub isolated: Vec<bool>,
}

pub fn build_interaction(net: &MarkedNetwork) -> InteractionMatrix {
    let n = net.vertex_count();
    let mut columns = Vec::with_capacity(n);
    let mut isolated = vec![false; n];
    for v in 0..n {
        let mu_v = net.strength(v);
        if mu_v > 0.0 {
            columns.push(
                net.weighted_neighbors(v)
                    .map(|(u, w)| (u, w / mu_v))
                    .collect(),
            );
        } else {
            isolated[v] = true;
            columns.push(Vec::new());
        }
    }
    InteractionMatrix { columns, isolated }
}

/// Pairwise interaction term `phi(theta_u, theta_v; omega_v, omega_u)`.
#[derive(Clone, Copy, Debug)]
pub enum PairPhi {
    /// `sin(theta_u - theta_v)`; the Kuramoto interaction.
    KuramotoSin,
    /// No pairwise interaction.
    Zero,
    /// User-supplied interaction with declared per-argument Lipschitz
    /// constant and sup bound (asserted, not verified symbolically).
    Custom {
        f: fn(f64, f64, f64, f64) -> f64,
        lip: f64,
        sup: f64,
    },
}

impl PairPhi {
    pub fn sup(&self) -> f64 {
        match self {
            PairPhi::KuramotoSin => 1.0,
            PairPhi::Zero => 0.0,
            PairPhi::Custom { sup, .. } => *sup,
        }
    }

    pub fn lip(&self) -> f64 {
        match self {
            PairPhi::KuramotoSin => 1.0,
            PairPhi::Zero => 0.0,
            PairPhi::Custom { lip, .. } => *lip,
        }
    }

    #[inline]
    pub fn eval(&self, theta_u: f64, theta_v: f64, omega_v: f64, omega_u: f64) -> f64 {
        match self {
            PairPhi::KuramotoSin => (theta_u - theta_v).sin(),
            PairPhi::Zero => 0.0,
            PairPhi::Custom { f, .. } => f(theta_u, theta_v, omega_v, omega_u),
        }
    }
}

/// Per-vertex drift term `psi(theta_v; omega_v)`.
#[derive(Clone, Copy, Debug)]
pub enum SelfPsi {
    /// `psi = omega_v`: the media variable acts as a natural frequency.
    MediaFrequency,
    Zero,
    /// Declared Lipschitz constant is in the theta argument.
    Custom { f: fn(f64, f64) -> f64, lip: f64 },
}

impl SelfPsi {
    pub fn lip(&self) -> f64 {
        match self {
            SelfPsi::MediaFrequency | SelfPsi::Zero => 0.0,
            SelfPsi::Custom { lip, .. } => *lip,
        }
    }

    #[inline]
    pub fn eval(&self, theta: f64, omega: f64) -> f64 {
        match self {
            SelfPsi::MediaFrequency => omega,
            SelfPsi::Zero => 0.0,
            SelfPsi::Custom { f, .. } => f(theta, omega),
        }
    }
}

/// How pairwise terms are aggregated.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CouplingMode {
    /// Divide by the total weight `mu_v` (the normalized system).
    Normalized,
    /// Multiply the plain adjacency sum by `k`, ignoring edge weights.
    Unnormalized { k: f64 },
}

/// Drift specification: pairwise term, self term, aggregation and noise.
#[derive(Clone, Copy, Debug)]
pub struct DriftSpec {
    pub phi: PairPhi,
    pub psi: SelfPsi,
    pub coupling: CouplingMode,
    pub noise_scale: f64,
}

impl DriftSpec {
    /// Normalized Kuramoto preset: `phi = sin(theta_u - theta_v)`, `psi = omega`.
    pub fn kuramoto(noise_scale: f64) -> DriftSpec {
        DriftSpec {
            phi: PairPhi::KuramotoSin,
            psi: SelfPsi::MediaFrequency,
            coupling: CouplingMode::Normalized,
            noise_scale,
        }
    }

    /// Unnormalized Kuramoto: `K * sum_{u~v} sin(theta_u - theta_v) + omega`,
    /// adjacency treated as 0/1 regardless of edge weights.
    pub fn kuramoto_unnormalized(k: f64, noise_scale: f64) -> DriftSpec {
        DriftSpec {
            phi: PairPhi::KuramotoSin,
            psi: SelfPsi::MediaFrequency,
            coupling: CouplingMode::Unnormalized { k },
            noise_scale,
        }
    }

    /// No pairwise interaction; useful as a null model.
    pub fn uncoupled(noise_scale: f64) -> DriftSpec {
        DriftSpec {
            phi: PairPhi::Zero,
            psi: SelfPsi::MediaFrequency,
            coupling: CouplingMode::Normalized,
            noise_scale,
        }
    }

    /// Single constant dominating the drift Lipschitz data, used to build
    /// Gronwall envelopes: `max(|phi|_inf, Lip(phi)) + Lip(psi)`.
    pub fn gronwall_constant(&self) -> f64 {
        self.phi.sup().max(self.phi.lip()) + self.psi.lip()
    }
}

/// Source of standard normal increments keyed by (vertex, step).
pub trait NoiseStream: Sync {
    /// Standard normal draw for the given vertex identity and step index.
    /// The same key must return the same value in every context.
    fn std_increment(&self, vertex: usize, step: usize) -> f64;

    /// Both increments of the consecutive step pair `(2 pair, 2 pair + 1)`.
    /// Must agree with `std_increment`; override when the generator
    /// produces the two draws jointly.
    fn std_increment_pair(&self, vertex: usize, pair: usize) -> (f64, f64) {
        (
            self.std_increment(vertex, 2 * pair),
            self.std_increment(vertex, 2 * pair + 1),
        )
    }
}

const NOISE_TAG: &str = "diffusion/brownian";

/// Counter-based Gaussian noise: increments are a pure function of
/// `(master_seed, vertex, step)`.
#[derive(Clone, Copy, Debug)]
pub struct NoiseSource {
    pub master_seed: u64,
    /// Domain tag, fixed at construction so the hot path never rehashes it.
    tag: u64,
}

impl NoiseSource {
    pub fn new(master_seed: u64) -> Self {
        NoiseSource {
            master_seed,
            tag: rng::tag(NOISE_TAG),
        }
    }
}

impl NoiseStream for NoiseSource {
    #[inline]
    fn std_increment(&self, vertex: usize, step: usize) -> f64 {
        // one Box-Muller evaluation serves two consecutive steps
        let (z0, z1) = self.std_increment_pair(vertex, step / 2);
        if step % 2 == 0 {
            z0
        } else {
            z1
        }
    }

    #[inline]
    fn std_increment_pair(&self, vertex: usize, pair: usize) -> (f64, f64) {
        let key = rng::derive(self.master_seed, &[self.tag, vertex as u64, pair as u64]);
        rng::normal_pair(key)
    }
}

/// View of a noise stream at a coarser time step: each coarse increment is
/// the normalized sum of `factor` consecutive fine increments. Refining dt
/// while keeping the same underlying stream preserves the Brownian coupling.
pub struct CoarsenedNoise<'a, N: NoiseStream> {
    pub inner: &'a N,
    pub factor: usize,
}

impl<N: NoiseStream> NoiseStream for CoarsenedNoise<'_, N> {
    fn std_increment(&self, vertex: usize, step: usize) -> f64 {
        let mut sum = 0.0;
        for j in 0..self.factor {
            sum += self.inner.std_increment(vertex, step * self.factor + j);
        }
        sum / (self.factor as f64).sqrt()
    }
}

/// Solver configuration and input fingerprints, carried with every ensemble.
#[derive(Clone, Debug, PartialEq)]
pub struct Provenance {
    pub network_hash: u64,
    pub master_seed: u64,
    pub horizon: f64,
    pub dt: f64,
    pub noise_scale: f64,
}

/// Discretized vertex trajectories on the uniform grid `t_k = k dt`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryEnsemble {
    pub dt: f64,
    /// `paths[row][k]`; row order matches `vertex_ids`.
    pub paths: Vec<Vec<f64>>,
    /// Global identity of each path row.
    pub vertex_ids: Vec<usize>,
    pub provenance: Provenance,
}

impl TrajectoryEnsemble {
    pub fn grid_len(&self) -> usize {
        self.paths.first().map_or(0, Vec::len)
    }

    pub fn grid(&self) -> Vec<f64> {
        (0..self.grid_len()).map(|k| k as f64 * self.dt).collect()
    }

    /// Path row for a global vertex id.
    pub fn path_of(&self, vertex: usize) -> Option<&[f64]> {
        self.vertex_ids
            .iter()
            .position(|&id| id == vertex)
            .map(|row| self.paths[row].as_slice())
    }

    /// CSV export: header `t,v<id>,...`, one row per grid point, 17
    /// significant digits.
    pub fn write_csv(&self, out: &mut dyn Write) -> std::io::Result<()> {
        write!(out, "t")?;
        for &id in &self.vertex_ids {
            write!(out, ",v{id}")?;
        }
        writeln!(out)?;
        for k in 0..self.grid_len() {
            write!(out, "{}", crate::fmt_f64(k as f64 * self.dt))?;
            for row in &self.paths {
                write!(out, ",{}", crate::fmt_f64(row[k]))?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    /// Binary export: row-major little-endian f64 (`vertex_ids.len()` rows of
    /// `grid_len()` values). Pair with a JSON sidecar for grid and ids.
    pub fn write_binary(&self, out: &mut dyn Write) -> std::io::Result<()> {
        for row in &self.paths {
            for &x in row {
                out.write_all(&x.to_le_bytes())?;
            }
        }
        Ok(())
    }
}

/// Precompiled per-edge coupling coefficients: `phi(theta_u, theta_v, ...)`
/// enters v's drift with weight `cv`, the mirrored term enters u's with `cu`.
struct EdgeTerm {
    u: u32,
    v: u32,
    cu: f64,
    cv: f64,
}

fn build_edge_terms(net: &MarkedNetwork, coupling: CouplingMode) -> Vec<EdgeTerm> {
    let mut terms = Vec::with_capacity(net.graph.edge_count());
    let strengths: Vec<f64> = (0..net.vertex_count()).map(|v| net.strength(v)).collect();
    for (u, v, w) in net.weighted_edges() {
        let (cu, cv) = match coupling {
            CouplingMode::Normalized => (
                if strengths[u] > 0.0 { w / strengths[u] } else { 0.0 },
                if strengths[v] > 0.0 { w / strengths[v] } else { 0.0 },
            ),
            CouplingMode::Unnormalized { k } => (k, k),
        };
        terms.push(EdgeTerm {
            u: u as u32,
            v: v as u32,
            cu,
            cv,
        });
    }
    terms
}

/// Inner Euler-Maruyama loop. `observe(k, theta)` is called with the state
/// at every grid index, including 0 and the final step. Edge terms are
/// accumulated in lexicographic edge order, which makes per-vertex summation
/// order identical between a network and any induced sub-network, so
/// coupled runs agree bitwise wherever they coincide.
#[allow(clippy::too_many_arguments)]
fn run_euler(
    net: &MarkedNetwork,
    noise_ids: &[usize],
    drift: &DriftSpec,
    n_steps: usize,
    dt: f64,
    noise: &dyn NoiseStream,
    guard: f64,
    mut observe: impl FnMut(usize, &[f64]),
) -> Result<()> {
    let n = net.vertex_count();
    debug_assert_eq!(noise_ids.len(), n);
    let edges = build_edge_terms(net, drift.coupling);
    let mut theta: Vec<f64> = net.initial.clone();
    let mut acc = vec![0.0f64; n];
    // increments for the even/odd step pair, generated jointly at even steps
    let mut zbuf = vec![0.0f64; 2 * n];
    let sqrt_dt = dt.sqrt();
    let eps = drift.noise_scale;

    #[cfg(debug_assertions)]
    let interaction_bound: Vec<f64> = (0..n)
        .map(|v| match drift.coupling {
            CouplingMode::Normalized => drift.phi.sup(),
            CouplingMode::Unnormalized { k } => {
                k.abs() * net.graph.degree(v) as f64 * drift.phi.sup()
            }
        })
        .collect();

    for k in 0..n_steps {
        observe(k, &theta);
        for a in acc.iter_mut() {
            *a = 0.0;
        }
        match drift.phi {
            PairPhi::KuramotoSin => {
                for e in &edges {
                    let (u, v) = (e.u as usize, e.v as usize);
                    let s = (theta[u] - theta[v]).sin();
                    acc[v] += e.cv * s;
                    acc[u] -= e.cu * s;
                }
            }
            PairPhi::Zero => {}
            PairPhi::Custom { f, .. } => {
                for e in &edges {
                    let (u, v) = (e.u as usize, e.v as usize);
                    acc[v] += e.cv * f(theta[u], theta[v], net.media[v], net.media[u]);
                    acc[u] += e.cu * f(theta[v], theta[u], net.media[u], net.media[v]);
                }
            }
        }
        if eps != 0.0 && k % 2 == 0 {
            for v in 0..n {
                let (z0, z1) = noise.std_increment_pair(noise_ids[v], k / 2);
                zbuf[v] = z0;
                zbuf[n + v] = z1;
            }
        }
        let z_off = (k % 2) * n;
        for v in 0..n {
            #[cfg(debug_assertions)]
            debug_assert!(
                acc[v].abs() <= interaction_bound[v] * (1.0 + 1e-9) + 1e-12,
                "interaction term {} above declared bound {} at vertex {v}",
                acc[v],
                interaction_bound[v]
            );
            let drift_v = acc[v] + drift.psi.eval(theta[v], net.media[v]);
            let mut next = theta[v] + dt * drift_v;
            if eps != 0.0 {
                next += eps * sqrt_dt * zbuf[z_off + v];
            }
            if next.abs() > guard {
                return Err(Error::Instability {
                    vertex: noise_ids[v],
                    step: k + 1,
                    value: next,
                    guard,
                });
            }
            theta[v] = next;
        }
    }
    observe(n_steps, &theta);
    Ok(())
}

fn step_count(t: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
    }
    if !(t >= dt) {
        return Err(Error::InvalidParameter(format!(
            "horizon T = {t} must be at least dt = {dt}"
        )));
    }
    Ok((t / dt).round() as usize)
}

/// Integrate the full system and record every vertex path.
pub fn simulate(
    net: &MarkedNetwork,
    drift: &DriftSpec,
    t: f64,
    dt: f64,
    noise: &NoiseSource,
) -> Result<TrajectoryEnsemble> {
    let ids: Vec<usize> = (0..net.vertex_count()).collect();
    simulate_with_ids(net, &ids, drift, t, dt, noise)
}

/// Integrate with explicit global identities for the vertices (rows of the
/// result follow `noise_ids`). This is the entry point truncated runs use.
pub fn simulate_with_ids(
    net: &MarkedNetwork,
    noise_ids: &[usize],
    drift: &DriftSpec,
    t: f64,
    dt: f64,
    noise: &NoiseSource,
) -> Result<TrajectoryEnsemble> {
    let n_steps = step_count(t, dt)?;
    let n = net.vertex_count();
    let mut paths = vec![Vec::with_capacity(n_steps + 1); n];
    run_euler(
        net,
        noise_ids,
        drift,
        n_steps,
        dt,
        noise,
        DEFAULT_OVERFLOW_GUARD,
        |_, theta| {
            for (row, &x) in paths.iter_mut().zip(theta.iter()) {
                row.push(x);
            }
        },
    )?;
    Ok(TrajectoryEnsemble {
        dt,
        paths,
        vertex_ids: noise_ids.to_vec(),
        provenance: Provenance {
            network_hash: net.content_hash(),
            master_seed: noise.master_seed,
            horizon: t,
            dt,
            noise_scale: drift.noise_scale,
        },
    })
}

/// Integrate the system induced on an already-extracted rooted ball, keying
/// noise by parent identities.
pub fn simulate_on_ball(
    ball: &RootedBallNetwork,
    drift: &DriftSpec,
    t: f64,
    dt: f64,
    noise: &NoiseSource,
) -> Result<TrajectoryEnsemble> {
    simulate_with_ids(&ball.network, &ball.to_parent, drift, t, dt, noise)
}

/// Truncated solution: extract the radius-`r` ball around `root` (total
/// weights `mu_v` are recomputed inside the ball, so boundary columns differ
/// from the full system) and integrate it with the shared noise streams.
pub fn simulate_truncated(
    net: &MarkedNetwork,
    root: usize,
    r: usize,
    drift: &DriftSpec,
    t: f64,
    dt: f64,
    noise: &NoiseSource,
) -> Result<TrajectoryEnsemble> {
    let ball = rooted_ball_network(net, root, r);
    simulate_on_ball(&ball, drift, t, dt, noise)
}

/// Run the integrator without storing paths, feeding each observed state to
/// `observe(k, theta)` for `k = 0..=n_steps`. Used by experiments that
/// reduce trajectories on the fly (order parameters, sup gaps).
pub fn simulate_observed(
    net: &MarkedNetwork,
    noise_ids: &[usize],
    drift: &DriftSpec,
    t: f64,
    dt: f64,
    noise: &dyn NoiseStream,
    observe: impl FnMut(usize, &[f64]),
) -> Result<()> {
    let n_steps = step_count(t, dt)?;
    run_euler(
        net,
        noise_ids,
        drift,
        n_steps,
        dt,
        noise,
        DEFAULT_OVERFLOW_GUARD,
        observe,
    )
}

/// Largest pointwise gap between two ensembles over matching rows and grid.
pub fn path_sup_gap(a: &TrajectoryEnsemble, b: &TrajectoryEnsemble) -> f64 {
    assert_eq!(a.vertex_ids, b.vertex_ids, "ensembles cover different vertices");
    assert_eq!(a.grid_len(), b.grid_len());
    let mut gap = 0.0f64;
    for (ra, rb) in a.paths.iter().zip(b.paths.iter()) {
        for (&x, &y) in ra.iter().zip(rb.iter()) {
            gap = gap.max((x - y).abs());
        }
    }
    gap
}

const PERTURB_TAG: &str = "perturb/mark";

/// Perturb every mark by `eps` times a symmetric uniform draw keyed by the
/// mark identity; weights are clamped below at `mu_floor`. The same
/// `perturb_seed` produces perturbations that scale linearly in `eps`, so
/// gaps at different `eps` are directly comparable.
pub fn perturb_marks(
    net: &MarkedNetwork,
    eps: f64,
    mu_floor: f64,
    perturb_seed: u64,
) -> Result<MarkedNetwork> {
    let tag = rng::tag(PERTURB_TAG);
    let n = net.vertex_count();
    let media: Vec<f64> = (0..n)
        .map(|v| net.media[v] + eps * rng::unit_symmetric(rng::derive(perturb_seed, &[tag, 0, v as u64])))
        .collect();
    let initial: Vec<f64> = (0..n)
        .map(|v| net.initial[v] + eps * rng::unit_symmetric(rng::derive(perturb_seed, &[tag, 1, v as u64])))
        .collect();
    let weights: Vec<(usize, usize, f64)> = net
        .weighted_edges()
        .into_iter()
        .map(|(u, v, w)| {
            let d = eps * rng::unit_symmetric(rng::derive(perturb_seed, &[tag, 2, u as u64, v as u64]));
            (u, v, (w + d).max(mu_floor))
        })
        .collect();
    MarkedNetwork::from_parts(net.graph.clone(), &weights, media, initial)
}

/// Mark-perturbation stability statistic: perturb all marks by at most
/// `eps`, re-simulate with identical noise, and return the largest sup-norm
/// path gap over vertices.
#[allow(clippy::too_many_arguments)]
pub fn perturb_marks_gap(
    net: &MarkedNetwork,
    eps: f64,
    mu_floor: f64,
    drift: &DriftSpec,
    t: f64,
    dt: f64,
    noise: &NoiseSource,
    perturb_seed: u64,
) -> Result<f64> {
    let perturbed = perturb_marks(net, eps, mu_floor, perturb_seed)?;
    let base = simulate(net, drift, t, dt, noise)?;
    let moved = simulate(&perturbed, drift, t, dt, noise)?;
    Ok(path_sup_gap(&base, &moved))
}

/// Uniformly seeded root choice shared by experiment drivers.
pub fn pick_root(net: &MarkedNetwork, key: u64) -> usize {
    uniform_vertex(net.vertex_count(), key)
}
