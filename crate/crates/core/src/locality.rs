//! Numerical audits of the locality estimate and its two analytic
//! ingredients: the linear Gronwall envelope and the Carne-Varopoulos
//! heat-kernel bound, both backed by a dense matrix exponential.

use crate::diffusion::{simulate, simulate_on_ball, DriftSpec, NoiseSource, TrajectoryEnsemble};
use crate::graph::ball;
use crate::network::{rooted_ball_network, MarkedNetwork};
use crate::{Error, Result};
use ndarray::{Array1, Array2};
use std::io::Write;

/// Dense-algebra dimension cap.
pub const MATRIX_DIM_CAP: usize = 2000;

/// Entrywise slack for Gronwall checks.
pub const GRONWALL_SLACK: f64 = 1e-8;

/// Matrix exponential `exp(t M)` by scaling and squaring with a Taylor core.
///
/// The argument is scaled down until its 1-norm is at most 1/2, the series
/// is summed to machine precision, and the result squared back up. Relative
/// accuracy on the audit sizes used here is far below the 1e-10 the tests
/// demand.
pub fn matrix_exponential(m: &Array2<f64>, t: f64) -> Result<Array2<f64>> {
    let dim = m.nrows();
    if m.ncols() != dim {
        return Err(Error::ShapeMismatch(format!(
            "matrix is {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if dim > MATRIX_DIM_CAP {
        return Err(Error::MatrixDimCap {
            dim,
            cap: MATRIX_DIM_CAP,
        });
    }
    let scaled = m * t;
    let norm = one_norm(&scaled);
    let squarings = if norm <= 0.5 {
        0
    } else {
        (norm / 0.5).log2().ceil() as i32
    };
    let core = &scaled / 2f64.powi(squarings);

    // Taylor series at norm <= 1/2: 24 terms reach machine precision
    let mut result = Array2::<f64>::eye(dim);
    let mut term = Array2::<f64>::eye(dim);
    for k in 1..=24 {
        term = term.dot(&core) / k as f64;
        result += &term;
    }
    for _ in 0..squarings {
        result = result.dot(&result);
    }
    Ok(result)
}

fn one_norm(m: &Array2<f64>) -> f64 {
    let mut best = 0.0f64;
    for col in m.columns() {
        let s: f64 = col.iter().map(|x| x.abs()).sum();
        best = best.max(s);
    }
    best
}

/// Result of a Gronwall envelope check.
#[derive(Clone, Debug)]
pub struct GronwallReport {
    /// True when `u(t) <= exp(tM) a(t)` entrywise at every grid point,
    /// within [`GRONWALL_SLACK`].
    pub satisfied: bool,
    /// Largest entrywise excess of `u` over the envelope (negative when the
    /// envelope dominates strictly).
    pub max_violation: f64,
    /// Largest excess of `u` over the integral-inequality right-hand side
    /// (diagnostic; the check errors out when this is above tolerance).
    pub max_hypothesis_residual: f64,
}

/// Verify the linear Gronwall conclusion `u(t) <= exp(tM) a(t)` for sampled
/// paths on a uniform grid.
///
/// `u` and `a` are `(steps+1) x dim` with `u[k]` the state at `t_k = k dt`;
/// `a` must be entrywise nonnegative and nondecreasing in time, `m`
/// entrywise nonnegative. The integral-inequality hypothesis
/// `u(t) <= a(t) + integral_0^t M u` is first verified by trapezoid
/// quadrature; failure beyond [`GRONWALL_SLACK`] signals a malformed test
/// case and returns an error.
pub fn gronwall_check(
    u: &Array2<f64>,
    a: &Array2<f64>,
    m: &Array2<f64>,
    dt: f64,
) -> Result<GronwallReport> {
    let steps = u.nrows();
    let dim = u.ncols();
    if a.nrows() != steps || a.ncols() != dim || m.nrows() != dim || m.ncols() != dim {
        return Err(Error::ShapeMismatch(format!(
            "u {}x{}, a {}x{}, M {}x{}",
            u.nrows(),
            u.ncols(),
            a.nrows(),
            a.ncols(),
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|&x| x < 0.0) {
        return Err(Error::InvalidParameter("M must be entrywise nonnegative".into()));
    }
    if a.iter().any(|&x| x < 0.0) {
        return Err(Error::InvalidParameter("a must be entrywise nonnegative".into()));
    }
    for k in 1..steps {
        for j in 0..dim {
            if a[[k, j]] < a[[k - 1, j]] - 1e-12 {
                return Err(Error::InvalidParameter(
                    "a must be entrywise nondecreasing in time".into(),
                ));
            }
        }
    }

    // hypothesis: u(t_k) <= a(t_k) + trapezoid integral of M u up to t_k
    let mut hypothesis_residual = f64::NEG_INFINITY;
    let mut integral = Array1::<f64>::zeros(dim);
    let mut prev_mu = m.dot(&u.row(0).to_owned());
    for k in 0..steps {
        if k > 0 {
            let mu = m.dot(&u.row(k).to_owned());
            integral += &((&mu + &prev_mu) * (0.5 * dt));
            prev_mu = mu;
        }
        for j in 0..dim {
            let residual = u[[k, j]] - a[[k, j]] - integral[j];
            hypothesis_residual = hypothesis_residual.max(residual);
        }
    }
    if hypothesis_residual > GRONWALL_SLACK {
        return Err(Error::HypothesisViolation {
            residual: hypothesis_residual,
            tolerance: GRONWALL_SLACK,
        });
    }

    // conclusion: u(t_k) <= exp(t_k M) a(t_k)
    let step_exp = matrix_exponential(m, dt)?;
    let mut exp_tm = Array2::<f64>::eye(dim);
    let mut max_violation = f64::NEG_INFINITY;
    for k in 0..steps {
        if k > 0 {
            exp_tm = exp_tm.dot(&step_exp);
        }
        let envelope = exp_tm.dot(&a.row(k).to_owned());
        for j in 0..dim {
            max_violation = max_violation.max(u[[k, j]] - envelope[j]);
        }
    }
    Ok(GronwallReport {
        satisfied: max_violation <= GRONWALL_SLACK,
        max_violation,
        max_hypothesis_residual: hypothesis_residual,
    })
}

/// Heat kernel of the continuous-time random walk on the weighted graph:
/// `q_s(v, u) = e^{-s} exp(s P)_{vu} / mu_u` with `P` the jump matrix
/// `P_{vu} = mu_vu / mu_v`. The kernel is the transition density with
/// respect to the weight measure, and is symmetric by reversibility.
pub fn heat_kernel(net: &MarkedNetwork, s: f64) -> Result<Array2<f64>> {
    let n = net.vertex_count();
    if n > MATRIX_DIM_CAP {
        return Err(Error::MatrixDimCap {
            dim: n,
            cap: MATRIX_DIM_CAP,
        });
    }
    let strengths: Vec<f64> = (0..n).map(|v| net.strength(v)).collect();
    if let Some(v) = strengths.iter().position(|&mu| mu <= 0.0) {
        return Err(Error::ZeroWeightVertex { vertex: v });
    }
    let mut p = Array2::<f64>::zeros((n, n));
    for v in 0..n {
        for (u, w) in net.weighted_neighbors(v) {
            p[[v, u]] = w / strengths[v];
        }
    }
    let exp_sp = matrix_exponential(&p, s)?;
    let damp = (-s).exp();
    let mut q = exp_sp;
    for v in 0..n {
        for u in 0..n {
            q[[v, u]] *= damp / strengths[u];
        }
    }
    Ok(q)
}

/// One audited heat-kernel bound instance.
#[derive(Clone, Debug)]
pub struct AuditRow {
    pub v: usize,
    pub u: usize,
    /// Graph distance between the pair.
    pub dist: usize,
    pub s: f64,
    pub exact: f64,
    pub bound: f64,
    /// `bound - exact`; the theorem demands this never drops below -1e-9.
    pub slack: f64,
}

/// Audit the off-diagonal heat-kernel bound
/// `q_s(v,u) <= exp(-s - R log(R/(e s))) / (mu_v v mu_u)` for the listed
/// pairs. Every pair must satisfy `R = dist(v,u) >= e s`.
pub fn carne_varopoulos_audit(
    net: &MarkedNetwork,
    s: f64,
    pairs: &[(usize, usize)],
) -> Result<Vec<AuditRow>> {
    if !(s > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "heat-kernel time must be positive, got {s}"
        )));
    }
    let q = heat_kernel(net, s)?;
    let n = net.vertex_count();
    let mut dist_cache: Vec<Option<Vec<usize>>> = vec![None; n];
    let mut rows = Vec::with_capacity(pairs.len());
    for &(v, u) in pairs {
        let dist_v = dist_cache[v]
            .get_or_insert_with(|| net.graph.bfs_distances(v))
            .clone();
        let r = dist_v[u];
        if r == usize::MAX {
            return Err(Error::InvalidParameter(format!(
                "pair ({v}, {u}) is disconnected"
            )));
        }
        let es = std::f64::consts::E * s;
        if (r as f64) < es {
            return Err(Error::BoundPrecondition { v, u, dist: r, es });
        }
        let mu_max = net.strength(v).max(net.strength(u));
        let rf = r as f64;
        let log_term = if r == 0 { 0.0 } else { rf * (rf / es).ln() };
        let bound = (-s - log_term).exp() / mu_max;
        let exact = q[[v, u]];
        rows.push(AuditRow {
            v,
            u,
            dist: r,
            s,
            exact,
            bound,
            slack: bound - exact,
        });
    }
    Ok(rows)
}

/// CSV export for audit rows: `v,u,R,s,exact,bound,slack`.
pub fn write_audit_csv(rows: &[AuditRow], out: &mut dyn Write) -> std::io::Result<()> {
    writeln!(out, "v,u,R,s,exact,bound,slack")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.v,
            r.u,
            r.dist,
            crate::fmt_f64(r.s),
            crate::fmt_f64(r.exact),
            crate::fmt_f64(r.bound),
            crate::fmt_f64(r.slack)
        )?;
    }
    Ok(())
}

/// Measured truncation gaps against the fitted decay envelope.
#[derive(Clone, Debug)]
pub struct LocalityReport {
    /// Radius of the observation set H0 around the root.
    pub h0_radius: usize,
    /// Radius of the reference (largest) truncation, standing in for the
    /// full system.
    pub reference_radius: usize,
    /// Truncation radii compared against the reference (all requested radii
    /// below the reference).
    pub radii: Vec<usize>,
    /// Graph distance from H0 to the boundary of each truncation ball.
    pub separations: Vec<usize>,
    /// Boundary sizes of each truncation ball.
    pub boundary_sizes: Vec<usize>,
    /// `max_{v in H0} sup_t |theta^(r)_v - theta^(ref)_v|` per radius.
    pub gaps: Vec<f64>,
    /// `C |dH| exp(-d log d)` per radius with the fitted `C`.
    pub envelope: Vec<f64>,
    /// Smallest constant making the envelope dominate every measured gap.
    pub fitted_c: f64,
    /// Whether the gaps decrease strictly along increasing radii.
    pub strictly_decreasing: bool,
    pub horizon: f64,
    pub dt: f64,
    pub master_seed: u64,
    pub gronwall_constant: f64,
}

impl LocalityReport {
    /// CSV export: `r,boundary_size,gap,envelope,fitted_C`.
    pub fn write_csv(&self, out: &mut dyn Write) -> std::io::Result<()> {
        writeln!(out, "r,boundary_size,gap,envelope,fitted_C")?;
        for (i, &r) in self.radii.iter().enumerate() {
            writeln!(
                out,
                "{},{},{},{},{}",
                r,
                self.boundary_sizes[i],
                crate::fmt_f64(self.gaps[i]),
                crate::fmt_f64(self.envelope[i]),
                crate::fmt_f64(self.fitted_c)
            )?;
        }
        Ok(())
    }
}

/// Compare truncated solutions against the largest-radius truncation. All
/// runs share Brownian increments, so the measured gaps isolate the effect
/// of cutting the network at radius `r`.
///
/// `h_radii` must contain at least two radii; the largest is the reference.
#[allow(clippy::too_many_arguments)]
pub fn locality_experiment(
    net: &MarkedNetwork,
    root: usize,
    h0_radius: usize,
    h_radii: &[usize],
    drift: &DriftSpec,
    t: f64,
    dt: f64,
    master_seed: u64,
) -> Result<LocalityReport> {
    if h_radii.len() < 2 {
        return Err(Error::InvalidParameter(
            "need at least two radii (the largest is the reference)".into(),
        ));
    }
    let reference_radius = *h_radii.iter().max().unwrap();
    let mut radii: Vec<usize> = h_radii
        .iter()
        .copied()
        .filter(|&r| r < reference_radius)
        .collect();
    radii.sort_unstable();
    if radii.iter().any(|&r| r < h0_radius) {
        return Err(Error::InvalidParameter(
            "every truncation radius must be at least the H0 radius".into(),
        ));
    }
    let noise = NoiseSource::new(master_seed);
    let h0: Vec<usize> = ball(&net.graph, root, h0_radius).to_parent;
    let reference_ball = rooted_ball_network(net, root, reference_radius);
    let reference = simulate_on_ball(&reference_ball, drift, t, dt, &noise)?;

    let dist_from_root = net.graph.bfs_distances(root);
    let mut gaps = Vec::with_capacity(radii.len());
    let mut separations = Vec::with_capacity(radii.len());
    let mut boundary_sizes = Vec::with_capacity(radii.len());
    for &r in &radii {
        let ball_r = rooted_ball_network(net, root, r);
        let truncated = simulate_on_ball(&ball_r, drift, t, dt, &noise)?;
        gaps.push(h0_sup_gap(&truncated, &reference, &h0));
        boundary_sizes.push(ball_r.boundary.len());
        // separation: min distance from any boundary vertex to the H0 set;
        // boundary vertices of the r-ball sit at distance r from the root
        let sep = ball_r
            .boundary
            .iter()
            .map(|&b| dist_from_root[ball_r.to_parent[b]].saturating_sub(h0_radius))
            .min()
            .unwrap_or(usize::MAX);
        separations.push(sep);
    }

    let envelope_shape = |sep: usize, boundary: usize| -> f64 {
        let d = sep.max(1) as f64;
        boundary as f64 * (-d * d.ln()).exp()
    };
    let mut fitted_c = 0.0f64;
    for i in 0..radii.len() {
        if boundary_sizes[i] > 0 && separations[i] != usize::MAX {
            let shape = envelope_shape(separations[i], boundary_sizes[i]);
            if shape > 0.0 {
                fitted_c = fitted_c.max(gaps[i] / shape);
            }
        }
    }
    let envelope: Vec<f64> = (0..radii.len())
        .map(|i| {
            if separations[i] == usize::MAX {
                0.0
            } else {
                fitted_c * envelope_shape(separations[i], boundary_sizes[i])
            }
        })
        .collect();
    let strictly_decreasing = gaps.windows(2).all(|w| w[1] < w[0]);
    Ok(LocalityReport {
        h0_radius,
        reference_radius,
        radii,
        separations,
        boundary_sizes,
        gaps,
        envelope,
        fitted_c,
        strictly_decreasing,
        horizon: t,
        dt,
        master_seed,
        gronwall_constant: drift.gronwall_constant(),
    })
}

fn h0_sup_gap(truncated: &TrajectoryEnsemble, reference: &TrajectoryEnsemble, h0: &[usize]) -> f64 {
    let mut gap = 0.0f64;
    for &v in h0 {
        let a = truncated.path_of(v).expect("H0 inside truncation ball");
        let b = reference.path_of(v).expect("H0 inside reference ball");
        for (&x, &y) in a.iter().zip(b.iter()) {
            gap = gap.max((x - y).abs());
        }
    }
    gap
}

/// Harvested data for a Gronwall check over a truncation experiment: the
/// per-vertex gap paths `u`, the boundary-driven offset `a`, and the matrix
/// `M = C (P_ball + I)` over the (r+1)-ball.
pub struct GronwallCase {
    pub u: Array2<f64>,
    pub a: Array2<f64>,
    pub m: Array2<f64>,
    pub dt: f64,
}

/// Run the full system against the system truncated at radius `r` (shared
/// noise) and package the gap paths over the (r+1)-ball H-tilde together
/// with the Gronwall data. The offset vector `a` carries `2 C T` on the
/// boundary of the r-ball and on the extra layer H-tilde minus H, where the
/// truncated system loses interaction terms; interior vertices get 0.
#[allow(clippy::too_many_arguments)]
pub fn harvest_gronwall_case(
    net: &MarkedNetwork,
    root: usize,
    r: usize,
    drift: &DriftSpec,
    t: f64,
    dt: f64,
    master_seed: u64,
) -> Result<GronwallCase> {
    let noise = NoiseSource::new(master_seed);
    let n = net.vertex_count();
    let full = simulate(net, drift, t, dt, &noise)?;

    // the truncated system, extended outside H by pure self-drift dynamics:
    // interactions outside the ball are removed entirely
    let ball_r = rooted_ball_network(net, root, r);
    let inside: Vec<bool> = {
        let mut mask = vec![false; n];
        for &p in &ball_r.to_parent {
            mask[p] = true;
        }
        mask
    };
    let kept_edges: Vec<(usize, usize, f64)> = net
        .weighted_edges()
        .into_iter()
        .filter(|&(u, v, _)| inside[u] && inside[v])
        .collect();
    let reduced_edges: Vec<(usize, usize)> = kept_edges.iter().map(|&(u, v, _)| (u, v)).collect();
    let reduced = crate::graph::Graph::from_edges(n, &reduced_edges)?;
    let truncated_net =
        MarkedNetwork::from_parts(reduced, &kept_edges, net.media.clone(), net.initial.clone())?;
    let bar = simulate(&truncated_net, drift, t, dt, &noise)?;

    // H-tilde: vertices within distance 1 of the r-ball
    let tilde: Vec<usize> = ball(&net.graph, root, r + 1).to_parent;
    let steps = full.grid_len();
    let dim = tilde.len();
    let c = drift.gronwall_constant();
    let mut u = Array2::<f64>::zeros((steps, dim));
    let mut a = Array2::<f64>::zeros((steps, dim));
    let boundary_parents: Vec<usize> = ball_r
        .boundary
        .iter()
        .map(|&b| ball_r.to_parent[b])
        .collect();
    for (j, &p) in tilde.iter().enumerate() {
        let offset = if boundary_parents.contains(&p) || !inside[p] {
            2.0 * c * t
        } else {
            0.0
        };
        for k in 0..steps {
            u[[k, j]] = (full.paths[p][k] - bar.paths[p][k]).abs();
            a[[k, j]] = offset;
        }
    }

    // M = C (P_ball + I) over H-tilde, with P the truncated interaction;
    // row p carries the weights P_{qp} = mu_qp / mu_p feeding p's drift, so
    // the hypothesis reads u <= a + integral of M u with plain row matvec
    let mut m = Array2::<f64>::zeros((dim, dim));
    let index_of = |p: usize| tilde.iter().position(|&q| q == p);
    for (j, &p) in tilde.iter().enumerate() {
        m[[j, j]] = c;
        let mu_p: f64 = truncated_net.strength(p);
        if mu_p > 0.0 {
            for (q, w) in truncated_net.weighted_neighbors(p) {
                if let Some(i) = index_of(q) {
                    m[[j, i]] = c * w / mu_p;
                }
            }
        }
    }
    Ok(GronwallCase { u, a, m, dt })
}
