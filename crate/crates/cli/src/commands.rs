//! Subcommand drivers: build core configurations, run, persist outputs and
//! a manifest per run.

use crate::config::*;
use crate::manifest::RunManifest;
use diffnet_core::diffusion::{simulate, NoiseSource};
use diffnet_core::graph::{
    sample_cycle, sample_erdos_renyi, sample_gw_tree, sample_random_regular, Graph, GraphJson,
};
use diffnet_core::hydro::{
    chaos_factorization, chaos_seed, concentration_scan, concentration_seed, convergence_study,
    finite_seed, limit_seed, write_concentration_csv, write_study_csv,
};
use diffnet_core::kuramoto::{cell_seeds, phase_diagram};
use diffnet_core::locality::locality_experiment;
use diffnet_core::network::{attach_iid_marks, MarkedNetwork, NetworkJson};
use diffnet_core::{fmt_f64, rng};
use serde_json::json;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Errors are split by exit code: configuration problems exit 2, runtime
/// and numeric problems exit 3.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "configuration error: {msg}"),
            CliError::Runtime(msg) => write!(f, "runtime error: {msg}"),
        }
    }
}

impl From<diffnet_core::Error> for CliError {
    fn from(e: diffnet_core::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

pub struct RunContext {
    pub config: RunConfig,
    pub config_bytes: Vec<u8>,
    pub master_seed: u64,
    pub seed_source: String,
    pub out_dir: PathBuf,
    pub workers: usize,
    pub format: OutputFormat,
}

impl RunContext {
    fn manifest(&self, subcommand: &str) -> RunManifest {
        let mut m = RunManifest::new(subcommand, &self.config_bytes, self.master_seed, &self.seed_source);
        m.workers = self.workers;
        m
    }

    fn out_path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    fn write_output(&self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.out_path(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, bytes)?;
        Ok(path)
    }
}

fn section<'a, T>(opt: &'a Option<T>, name: &str) -> Result<&'a T, CliError> {
    opt.as_ref().ok_or_else(|| {
        CliError::Config(format!("config file is missing the [{name}] section"))
    })
}

fn sample_model(model: &GraphModelConfig, seed: u64) -> Result<(Graph, GraphJson), CliError> {
    match model {
        GraphModelConfig::ErdosRenyi { n, p } => {
            let g = sample_erdos_renyi(*n, *p, seed)?;
            let json = g.to_json();
            Ok((g, json))
        }
        GraphModelConfig::Cycle { n } => {
            let g = sample_cycle(*n)?;
            let json = g.to_json();
            Ok((g, json))
        }
        GraphModelConfig::RandomRegular { n, d } => {
            let g = sample_random_regular(*n, *d, seed)?;
            let json = g.to_json();
            Ok((g, json))
        }
        GraphModelConfig::GwTree {
            root_law,
            law,
            generations,
        } => {
            let t = sample_gw_tree(&root_law.to_law(), &law.to_law(), *generations, seed)?;
            let json = t.to_json();
            Ok((t.graph, json))
        }
    }
}

pub fn run_sample_graph(ctx: &RunContext) -> Result<(), CliError> {
    let start = Instant::now();
    let cfg = section(&ctx.config.sample_graph, "sample_graph")?;
    let (graph, graph_json) = sample_model(&cfg.model, ctx.master_seed)?;
    let mut manifest = ctx.manifest("sample-graph");
    manifest.task_seeds.insert("sample".into(), ctx.master_seed);

    let bytes = match &cfg.marks {
        None => serde_json::to_vec_pretty(&graph_json).expect("schema serializes"),
        Some(marks) => {
            let laws = marks.to_laws();
            laws.validate().map_err(|e| CliError::Config(e.to_string()))?;
            let net = attach_iid_marks(&graph, &laws, rng::derive(ctx.master_seed, &[1]))?;
            manifest
                .task_seeds
                .insert("marks".into(), rng::derive(ctx.master_seed, &[1]));
            let mut json = net.to_json(graph_json.root);
            json.root = graph_json.root;
            serde_json::to_vec_pretty(&json).expect("schema serializes")
        }
    };
    let path = ctx.write_output(&cfg.output, &bytes)?;
    manifest.outputs.push(path.display().to_string());
    let survival = graph_json
        .depth
        .as_ref()
        .map(|d| d.iter().copied().max().unwrap_or(0));
    manifest.extra = json!({
        "vertex_count": graph.vertex_count(),
        "edge_count": graph.edge_count(),
        "survival_depth": survival,
    });
    manifest.wall_clock_seconds = start.elapsed().as_secs_f64();
    manifest.write(&ctx.out_path(&format!("{}.manifest.json", cfg.output)))?;
    Ok(())
}

fn load_network(
    path: &Path,
    marks: &Option<MarksConfig>,
    attach_seed: u64,
    manifest: &mut RunManifest,
) -> Result<MarkedNetwork, CliError> {
    let bytes = fs::read(path)
        .map_err(|e| CliError::Runtime(format!("cannot read network file {}: {e}", path.display())))?;
    manifest.record_input(path, &bytes);
    // try the marked-network schema first, then the plain graph schema
    if let Ok(json) = serde_json::from_slice::<NetworkJson>(&bytes) {
        return Ok(json.into_network()?);
    }
    let graph_json: GraphJson = serde_json::from_slice(&bytes).map_err(|e| {
        CliError::Runtime(format!(
            "{} is neither a marked-network nor a graph JSON file: {e}",
            path.display()
        ))
    })?;
    let marks = marks.as_ref().ok_or_else(|| {
        CliError::Config(format!(
            "{} carries no marks; supply [simulate.marks] to attach them",
            path.display()
        ))
    })?;
    let laws = marks.to_laws();
    laws.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let graph = graph_json.into_graph()?;
    Ok(attach_iid_marks(&graph, &laws, attach_seed)?)
}

pub fn run_simulate(ctx: &RunContext) -> Result<(), CliError> {
    let start = Instant::now();
    let cfg = section(&ctx.config.simulate, "simulate")?;
    if !(cfg.dt > 0.0 && cfg.t >= cfg.dt) {
        return Err(CliError::Config(format!(
            "horizon T = {} must be at least dt = {} and dt must be positive",
            cfg.t, cfg.dt
        )));
    }
    let mut manifest = ctx.manifest("simulate");
    let marks_seed = rng::derive(ctx.master_seed, &[1]);
    let net = load_network(&cfg.network, &cfg.marks, marks_seed, &mut manifest)?;
    let drift = cfg.drift.to_drift();
    let noise = NoiseSource::new(ctx.master_seed);
    manifest.task_seeds.insert("noise".into(), ctx.master_seed);
    let ens = simulate(&net, &drift, cfg.t, cfg.dt, &noise)?;

    let mut csv = Vec::new();
    ens.write_csv(&mut csv)?;
    let path = ctx.write_output(&cfg.output, &csv)?;
    manifest.outputs.push(path.display().to_string());
    if cfg.binary {
        let mut bin = Vec::new();
        ens.write_binary(&mut bin)?;
        let bin_name = format!("{}.f64le", cfg.output);
        let bin_path = ctx.write_output(&bin_name, &bin)?;
        let sidecar = json!({
            "layout": "row-major vertex x grid, little-endian f64",
            "vertex_ids": ens.vertex_ids,
            "grid_len": ens.grid_len(),
            "dt": ens.dt,
            "master_seed": ctx.master_seed,
            "network_hash": format!("{:016x}", ens.provenance.network_hash),
        });
        let sidecar_path = ctx.write_output(
            &format!("{bin_name}.json"),
            &serde_json::to_vec_pretty(&sidecar).unwrap(),
        )?;
        manifest.outputs.push(bin_path.display().to_string());
        manifest.outputs.push(sidecar_path.display().to_string());
    }
    manifest.extra = json!({
        "network_hash": format!("{:016x}", ens.provenance.network_hash),
        "grid_len": ens.grid_len(),
    });
    manifest.wall_clock_seconds = start.elapsed().as_secs_f64();
    manifest.write(&ctx.out_path(&format!("{}.manifest.json", cfg.output)))?;
    Ok(())
}

pub fn run_locality(ctx: &RunContext) -> Result<(), CliError> {
    let start = Instant::now();
    let cfg = section(&ctx.config.locality, "locality")?;
    let laws = cfg.marks.to_laws();
    laws.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let (graph, _) = sample_model(&cfg.model, rng::derive(ctx.master_seed, &[1]))?;
    let net = attach_iid_marks(&graph, &laws, rng::derive(ctx.master_seed, &[2]))?;
    let report = locality_experiment(
        &net,
        cfg.root,
        cfg.h0_radius,
        &cfg.radii,
        &cfg.drift.to_drift(),
        cfg.t,
        cfg.dt,
        rng::derive(ctx.master_seed, &[3]),
    )?;

    let mut manifest = ctx.manifest("locality");
    manifest
        .task_seeds
        .insert("graph".into(), rng::derive(ctx.master_seed, &[1]));
    manifest
        .task_seeds
        .insert("marks".into(), rng::derive(ctx.master_seed, &[2]));
    manifest
        .task_seeds
        .insert("noise".into(), rng::derive(ctx.master_seed, &[3]));

    let bytes = match ctx.format {
        OutputFormat::Csv => {
            let mut csv = Vec::new();
            report.write_csv(&mut csv)?;
            csv
        }
        OutputFormat::Json => serde_json::to_vec_pretty(&json!({
            "h0_radius": report.h0_radius,
            "reference_radius": report.reference_radius,
            "radii": report.radii,
            "separations": report.separations,
            "boundary_sizes": report.boundary_sizes,
            "gaps": report.gaps,
            "envelope": report.envelope,
            "fitted_c": report.fitted_c,
            "strictly_decreasing": report.strictly_decreasing,
        }))
        .unwrap(),
    };
    let path = ctx.write_output(&cfg.output, &bytes)?;
    manifest.outputs.push(path.display().to_string());
    manifest.extra = json!({
        "reference_radius": report.reference_radius,
        "reference_is_proxy_for_full_system": true,
        "fitted_c": fmt_f64(report.fitted_c),
        "strictly_decreasing": report.strictly_decreasing,
        "gronwall_constant": fmt_f64(report.gronwall_constant),
    });
    manifest.wall_clock_seconds = start.elapsed().as_secs_f64();
    manifest.write(&ctx.out_path(&format!("{}.manifest.json", cfg.output)))?;
    Ok(())
}

pub fn run_converge(ctx: &RunContext) -> Result<(), CliError> {
    let start = Instant::now();
    let cfg = section(&ctx.config.converge, "converge")?;
    let core = cfg.to_core();
    core.marks
        .validate()
        .map_err(|e| CliError::Config(e.to_string()))?;
    let rows = convergence_study(&core, ctx.master_seed)?;
    let mut manifest = ctx.manifest("converge");
    for i in 0..core.limit_replications {
        manifest
            .task_seeds
            .insert(format!("limit/{i}"), limit_seed(ctx.master_seed, i));
    }
    for &n in &core.sizes {
        for i in 0..core.graphs_per_size {
            manifest
                .task_seeds
                .insert(format!("finite/{n}/{i}"), finite_seed(ctx.master_seed, n, i));
        }
    }
    let config_hash = manifest.config_hash.clone();
    let bytes = match ctx.format {
        OutputFormat::Csv => {
            let mut csv = Vec::new();
            write_study_csv(&rows, &config_hash, &mut csv)?;
            csv
        }
        OutputFormat::Json => {
            let rows_json: Vec<_> = rows
                .iter()
                .map(|r| {
                    json!({
                        "n": r.n,
                        "w1_marginal": r.w1_marginal,
                        "w1_stderr": r.w1_stderr,
                        "bl_paths": r.bl_paths,
                        "bl_stderr": r.bl_stderr,
                        "finite_samples": r.finite_samples,
                        "limit_samples": r.limit_samples,
                    })
                })
                .collect();
            serde_json::to_vec_pretty(&rows_json).unwrap()
        }
    };
    let path = ctx.write_output(&cfg.output, &bytes)?;
    manifest.outputs.push(path.display().to_string());
    manifest.extra = json!({
        "resampling_mode": "graphs, marks and noise resampled per replication",
    });
    manifest.wall_clock_seconds = start.elapsed().as_secs_f64();
    manifest.write(&ctx.out_path(&format!("{}.manifest.json", cfg.output)))?;
    Ok(())
}

pub fn run_concentration(ctx: &RunContext) -> Result<(), CliError> {
    let start = Instant::now();
    let cfg = section(&ctx.config.concentration, "concentration")?;
    let core = cfg.to_core();
    let h = cfg.statistic.to_functional(core.path_points);
    let rows = concentration_scan(&core, &h, ctx.master_seed)?;
    let mut manifest = ctx.manifest("concentration");
    for &n in &core.sizes {
        manifest.task_seeds.insert(
            format!("graph-and-marks/{n}"),
            concentration_seed(ctx.master_seed, n),
        );
    }
    let bytes = match ctx.format {
        OutputFormat::Csv => {
            let mut csv = Vec::new();
            write_concentration_csv(&rows, &mut csv)?;
            csv
        }
        OutputFormat::Json => {
            let rows_json: Vec<_> = rows
                .iter()
                .map(|r| {
                    json!({"n": r.n, "mean": r.mean, "std": r.std,
                           "ci_lo": r.ci_lo, "ci_hi": r.ci_hi})
                })
                .collect();
            serde_json::to_vec_pretty(&rows_json).unwrap()
        }
    };
    let path = ctx.write_output(&cfg.output, &bytes)?;
    manifest.outputs.push(path.display().to_string());
    manifest.extra = json!({
        "resampling_mode": "noise only; graph and marks fixed per size",
        "radius": core.radius,
    });
    manifest.wall_clock_seconds = start.elapsed().as_secs_f64();
    manifest.write(&ctx.out_path(&format!("{}.manifest.json", cfg.output)))?;
    Ok(())
}

pub fn run_chaos(ctx: &RunContext) -> Result<(), CliError> {
    let start = Instant::now();
    let cfg = section(&ctx.config.chaos, "chaos")?;
    let f = cfg.f.to_functional(cfg.path_points);
    let g = cfg.g.to_functional(cfg.path_points);
    let mut manifest = ctx.manifest("chaos");
    for rep in 0..cfg.replications {
        manifest
            .task_seeds
            .insert(format!("replication/{rep}"), chaos_seed(ctx.master_seed, rep));
    }
    let mut lines = vec!["n,covariance,stderr,mean_f,mean_g".to_string()];
    let mut rows_json = Vec::new();
    for &n in &cfg.sizes {
        let core = cfg.to_core(n);
        let est = chaos_factorization(&core, &f, &g, rng::derive(ctx.master_seed, &[n as u64]))?;
        lines.push(format!(
            "{n},{},{},{},{}",
            fmt_f64(est.covariance),
            fmt_f64(est.stderr),
            fmt_f64(est.mean_f),
            fmt_f64(est.mean_g)
        ));
        rows_json.push(json!({
            "n": n, "covariance": est.covariance, "stderr": est.stderr,
            "mean_f": est.mean_f, "mean_g": est.mean_g,
        }));
    }
    let bytes = match ctx.format {
        OutputFormat::Csv => (lines.join("\n") + "\n").into_bytes(),
        OutputFormat::Json => serde_json::to_vec_pretty(&rows_json).unwrap(),
    };
    let path = ctx.write_output(&cfg.output, &bytes)?;
    manifest.outputs.push(path.display().to_string());
    manifest.wall_clock_seconds = start.elapsed().as_secs_f64();
    manifest.write(&ctx.out_path(&format!("{}.manifest.json", cfg.output)))?;
    Ok(())
}

pub fn run_phase_diagram(ctx: &RunContext) -> Result<(), CliError> {
    let start = Instant::now();
    let cfg = section(&ctx.config.phase_diagram, "phase_diagram")?;
    let core = cfg.to_core();
    core.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let surface = phase_diagram(&core, ctx.master_seed)?;

    let mut manifest = ctx.manifest("phase-diagram");
    if core.replications * core.k_values.len() <= 20_000 {
        for rep in 0..core.replications {
            for k_idx in 0..core.k_values.len() {
                let seeds = cell_seeds(&core, ctx.master_seed, rep, k_idx);
                manifest
                    .task_seeds
                    .insert(format!("rep{rep}/k{k_idx}/noise"), seeds.noise);
            }
            let seeds = cell_seeds(&core, ctx.master_seed, rep, 0);
            manifest
                .task_seeds
                .insert(format!("rep{rep}/tree"), seeds.tree);
            manifest
                .task_seeds
                .insert(format!("rep{rep}/omega"), seeds.omega);
            manifest
                .task_seeds
                .insert(format!("rep{rep}/theta0"), seeds.theta0);
        }
    }

    let mut mean_csv = Vec::new();
    surface.write_mean_csv(&mut mean_csv)?;
    let mean_path = ctx.write_output(&format!("{}_mean.csv", cfg.output_prefix), &mean_csv)?;
    let mut stderr_csv = Vec::new();
    surface.write_stderr_csv(&mut stderr_csv)?;
    let stderr_path =
        ctx.write_output(&format!("{}_stderr.csv", cfg.output_prefix), &stderr_csv)?;
    manifest.outputs.push(mean_path.display().to_string());
    manifest.outputs.push(stderr_path.display().to_string());

    if ctx.format == OutputFormat::Json {
        let body = serde_json::to_vec_pretty(&json!({
            "k_values": surface.k_values,
            "generations": surface.generations,
            "mean": surface.mean,
            "stderr": surface.stderr,
            "survivors": surface.survivors,
        }))
        .unwrap();
        let jpath = ctx.write_output(&format!("{}_surface.json", cfg.output_prefix), &body)?;
        manifest.outputs.push(jpath.display().to_string());
    }

    manifest.extra = json!({
        "config": cfg,
        "survivors": surface.survivors,
        "sync_config_hash": format!("{:016x}", surface.config_hash),
        "tree_truncation": "leaves at the last generation are childless",
    });
    manifest.wall_clock_seconds = start.elapsed().as_secs_f64();
    manifest.write(&ctx.out_path(&format!("{}_manifest.json", cfg.output_prefix)))?;
    Ok(())
}
