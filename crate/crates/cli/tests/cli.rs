//! End-to-end subcommand tests: schema outputs, determinism, worker-count
//! invariance and error classification.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_diffnet")
}

fn run(args: &[&str], dir: &Path) -> Output {
    Command::new(bin())
        .args(args)
        .current_dir(dir)
        .env_remove("DIFFNET_SEED")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

fn assert_success(out: &Output) {
    assert!(
        out.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn sample_graph_empty_edge_list() {
    let dir = tempfile::tempdir().unwrap();
    write_config(
        dir.path(),
        "cfg.toml",
        r#"
master_seed = 7
[sample_graph]
output = "g.json"
[sample_graph.model]
family = "erdos-renyi"
n = 10
p = 0.0
"#,
    );
    let out = run(&["sample-graph", "--config", "cfg.toml"], dir.path());
    assert_success(&out);
    let body: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("g.json")).unwrap()).unwrap();
    assert_eq!(body["n"], 10);
    assert_eq!(body["edges"].as_array().unwrap().len(), 0);
}

#[test]
fn sample_graph_identical_bytes_across_reruns() {
    let dir = tempfile::tempdir().unwrap();
    write_config(
        dir.path(),
        "cfg.toml",
        r#"
master_seed = 40
[sample_graph]
output = "g.json"
[sample_graph.model]
family = "erdos-renyi"
n = 200
p = 0.02
"#,
    );
    assert_success(&run(&["sample-graph", "--config", "cfg.toml"], dir.path()));
    let first = fs::read(dir.path().join("g.json")).unwrap();
    assert_success(&run(&["sample-graph", "--config", "cfg.toml"], dir.path()));
    let second = fs::read(dir.path().join("g.json")).unwrap();
    assert_eq!(first, second);
    // a different seed changes the output
    assert_success(&run(
        &["sample-graph", "--config", "cfg.toml", "--seed", "41"],
        dir.path(),
    ));
    let third = fs::read(dir.path().join("g.json")).unwrap();
    assert_ne!(first, third);
}

#[test]
fn sample_graph_gw_manifest_records_survival_depth() {
    let dir = tempfile::tempdir().unwrap();
    write_config(
        dir.path(),
        "cfg.toml",
        r#"
master_seed = 4242
[sample_graph]
output = "tree.json"
[sample_graph.model]
family = "gw-tree"
generations = 13
[sample_graph.model.root_law]
kind = "binomial"
n = 3
p = 0.6666666666666666
[sample_graph.model.law]
kind = "binomial"
n = 3
p = 0.6666666666666666
"#,
    );
    assert_success(&run(&["sample-graph", "--config", "cfg.toml"], dir.path()));
    let manifest: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(dir.path().join("tree.json.manifest.json")).unwrap(),
    )
    .unwrap();
    let survival = manifest["extra"]["survival_depth"].as_u64().unwrap();
    assert!(survival <= 13);
    let tree: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("tree.json")).unwrap()).unwrap();
    let depths: Vec<u64> = tree["depth"]
        .as_array()
        .unwrap()
        .iter()
        .map(|d| d.as_u64().unwrap())
        .collect();
    assert_eq!(survival, depths.into_iter().max().unwrap());
}

#[test]
fn simulate_matches_library_bytes() {
    use diffnet_core::diffusion::{simulate, DriftSpec, NoiseSource};
    use diffnet_core::network::NetworkJson;

    let dir = tempfile::tempdir().unwrap();
    // sample a marked network through the CLI
    write_config(
        dir.path(),
        "sample.toml",
        r#"
master_seed = 11
[sample_graph]
output = "net.json"
[sample_graph.model]
family = "cycle"
n = 30
[sample_graph.marks]
weight = { kind = "uniform", lo = 0.5, hi = 1.5 }
media = { kind = "normal", mean = 1.0, sd = 1.0 }
initial = { kind = "uniform", lo = 0.0, hi = 6.283185307179586 }
"#,
    );
    assert_success(&run(&["sample-graph", "--config", "sample.toml"], dir.path()));
    write_config(
        dir.path(),
        "sim.toml",
        r#"
master_seed = 99
[simulate]
network = "net.json"
t = 1.0
dt = 0.01
output = "paths.csv"
[simulate.drift]
preset = "kuramoto"
epsilon = 0.2
"#,
    );
    assert_success(&run(&["simulate", "--config", "sim.toml"], dir.path()));
    let cli_csv = fs::read(dir.path().join("paths.csv")).unwrap();

    // the same run through the library
    let json: NetworkJson =
        serde_json::from_str(&fs::read_to_string(dir.path().join("net.json")).unwrap()).unwrap();
    let net = json.into_network().unwrap();
    let ens = simulate(&net, &DriftSpec::kuramoto(0.2), 1.0, 0.01, &NoiseSource::new(99)).unwrap();
    let mut lib_csv = Vec::new();
    ens.write_csv(&mut lib_csv).unwrap();
    assert_eq!(cli_csv, lib_csv);
}

#[test]
fn simulate_rejects_zero_horizon() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("net.json"), "{}").unwrap();
    write_config(
        dir.path(),
        "cfg.toml",
        r#"
master_seed = 1
[simulate]
network = "net.json"
t = 0.0
dt = 0.01
output = "paths.csv"
[simulate.drift]
preset = "kuramoto"
epsilon = 0.0
"#,
    );
    let out = run(&["simulate", "--config", "cfg.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn simulate_missing_network_file_names_path() {
    let dir = tempfile::tempdir().unwrap();
    write_config(
        dir.path(),
        "cfg.toml",
        r#"
master_seed = 1
[simulate]
network = "nowhere/missing.json"
t = 1.0
dt = 0.01
output = "paths.csv"
[simulate.drift]
preset = "kuramoto"
epsilon = 0.0
"#,
    );
    let out = run(&["simulate", "--config", "cfg.toml"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("nowhere/missing.json"), "stderr: {stderr}");
}

#[test]
fn config_rejects_unknown_keys() {
    let dir = tempfile::tempdir().unwrap();
    write_config(
        dir.path(),
        "cfg.toml",
        r#"
master_seed = 1
surprise = true
"#,
    );
    let out = run(&["sample-graph", "--config", "cfg.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn locality_without_coupling_has_zero_gaps() {
    let dir = tempfile::tempdir().unwrap();
    write_config(
        dir.path(),
        "cfg.toml",
        r#"
master_seed = 5
[locality]
h0_radius = 1
radii = [2, 3, 4]
t = 0.5
dt = 0.01
output = "loc.csv"
[locality.model]
family = "gw-tree"
generations = 5
root_law = { kind = "deterministic", children = 3 }
law = { kind = "deterministic", children = 2 }
[locality.marks]
weight = { kind = "deterministic", value = 1.0 }
media = { kind = "normal", mean = 1.0, sd = 1.0 }
initial = { kind = "uniform", lo = 0.0, hi = 6.283185307179586 }
[locality.drift]
preset = "uncoupled"
epsilon = 0.05
"#,
    );
    assert_success(&run(&["locality", "--config", "cfg.toml"], dir.path()));
    let text = fs::read_to_string(dir.path().join("loc.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "r,boundary_size,gap,envelope,fitted_C");
    for line in lines {
        let gap: f64 = line.split(',').nth(2).unwrap().parse().unwrap();
        assert_eq!(gap, 0.0, "line: {line}");
    }
}

#[test]
fn phase_diagram_smoke_is_fast_and_well_formed() {
    let dir = tempfile::tempdir().unwrap();
    write_config(
        dir.path(),
        "cfg.toml",
        r#"
master_seed = 3
[phase_diagram]
generations = 3
t = 2.0
dt = 0.01
epsilon = 0.05
k_max = 1.0
k_step = 1.0
replications = 1
theta0 = "all-zero"
omega = "all-one"
output_prefix = "pd"
[phase_diagram.model]
family = "binomial"
n = 3
p = 0.6666666666666666
"#,
    );
    let started = std::time::Instant::now();
    assert_success(&run(&["phase-diagram", "--config", "cfg.toml"], dir.path()));
    assert!(started.elapsed().as_secs() < 10, "took {:?}", started.elapsed());
    let mean = fs::read_to_string(dir.path().join("pd_mean.csv")).unwrap();
    let mut lines = mean.lines();
    assert_eq!(lines.next().unwrap(), "h,0,1");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 3);
    for (i, row) in rows.iter().enumerate() {
        let cells: Vec<&str> = row.split(',').collect();
        assert_eq!(cells[0], (i + 1).to_string());
        assert_eq!(cells.len(), 3);
        for cell in &cells[1..] {
            if *cell != "nan" {
                let v: f64 = cell.parse().unwrap();
                assert!((0.0..=1.0 + 1e-12).contains(&v));
            }
        }
    }
    let manifest: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(dir.path().join("pd_manifest.json")).unwrap(),
    )
    .unwrap();
    assert!(manifest["extra"]["survivors"].is_array());
    assert!(manifest["task_seeds"]["rep0/k0/noise"].is_u64());
}

#[test]
fn worker_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    write_config(
        dir.path(),
        "cfg.toml",
        r#"
master_seed = 17
[phase_diagram]
generations = 3
t = 1.0
dt = 0.01
epsilon = 0.05
k_max = 2.0
k_step = 1.0
replications = 3
theta0 = "uniform"
omega = "normal"
output_prefix = "pd"
[phase_diagram.model]
family = "d-regular"
c = 3
"#,
    );
    assert_success(&run(
        &["phase-diagram", "--config", "cfg.toml", "--workers", "1"],
        dir.path(),
    ));
    let one = fs::read(dir.path().join("pd_mean.csv")).unwrap();
    let one_err = fs::read(dir.path().join("pd_stderr.csv")).unwrap();
    assert_success(&run(
        &["phase-diagram", "--config", "cfg.toml", "--workers", "4"],
        dir.path(),
    ));
    let four = fs::read(dir.path().join("pd_mean.csv")).unwrap();
    let four_err = fs::read(dir.path().join("pd_stderr.csv")).unwrap();
    assert_eq!(one, four);
    assert_eq!(one_err, four_err);
}

#[test]
fn converge_self_test_reaches_noise_floor() {
    let dir = tempfile::tempdir().unwrap();
    write_config(
        dir.path(),
        "cfg.toml",
        r#"
master_seed = 23
[converge]
sizes = [0]
t = 0.5
dt = 0.01
limit_replications = 80
graphs_per_size = 80
roots_per_graph = 1
path_points = 3
bootstrap = 100
output = "study.csv"
[converge.model]
family = "gw-tree"
depth = 3
root_law = { kind = "poisson", mean = 2.0 }
law = { kind = "poisson", mean = 2.0 }
[converge.limit]
family = "gw-tree"
depth = 3
root_law = { kind = "poisson", mean = 2.0 }
law = { kind = "poisson", mean = 2.0 }
[converge.marks]
weight = { kind = "deterministic", value = 1.0 }
media = { kind = "normal", mean = 1.0, sd = 1.0 }
initial = { kind = "uniform", lo = 0.0, hi = 6.283185307179586 }
[converge.drift]
preset = "kuramoto"
epsilon = 0.1
"#,
    );
    assert_success(&run(&["converge", "--config", "cfg.toml"], dir.path()));
    let text = fs::read_to_string(dir.path().join("study.csv")).unwrap();
    assert!(text.starts_with("n,statistic,estimate,stderr,config_hash"));
    for line in text.lines().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        let estimate: f64 = cells[2].parse().unwrap();
        let stderr: f64 = cells[3].parse().unwrap();
        assert!(
            estimate <= 4.0 * stderr.max(1e-3),
            "{}: estimate {estimate} vs stderr {stderr}",
            cells[1]
        );
    }
}

#[test]
fn env_seed_override_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    write_config(
        dir.path(),
        "cfg.toml",
        r#"
master_seed = 1
[sample_graph]
output = "g.json"
[sample_graph.model]
family = "cycle"
n = 12
"#,
    );
    let out = Command::new(bin())
        .args(["sample-graph", "--config", "cfg.toml"])
        .current_dir(dir.path())
        .env("DIFFNET_SEED", "777")
        .output()
        .unwrap();
    assert_success(&out);
    let manifest: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(dir.path().join("g.json.manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(manifest["master_seed"], 777);
    assert_eq!(manifest["seed_source"], "env");
}

#[test]
fn csv_outputs_round_trip_through_parse() {
    let dir = tempfile::tempdir().unwrap();
    write_config(
        dir.path(),
        "cfg.toml",
        r#"
master_seed = 31
[concentration]
sizes = [20]
t = 0.5
dt = 0.01
radius = 1
replications = 30
path_points = 3
bootstrap = 60
output = "conc.csv"
statistic = { kind = "sigmoid", time_frac = 1.0, scale = 1.0, shift = 0.0 }
[concentration.model]
family = "erdos-renyi"
mean_degree = 2.0
[concentration.marks]
weight = { kind = "deterministic", value = 1.0 }
media = { kind = "normal", mean = 1.0, sd = 1.0 }
initial = { kind = "uniform", lo = 0.0, hi = 6.283185307179586 }
[concentration.drift]
preset = "kuramoto"
epsilon = 0.1
"#,
    );
    assert_success(&run(&["concentration", "--config", "cfg.toml"], dir.path()));
    let text = fs::read_to_string(dir.path().join("conc.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "n,mean,std,ci_lo,ci_hi");
    let row = lines.next().unwrap();
    let cells: Vec<&str> = row.split(',').collect();
    assert_eq!(cells[0], "20");
    for cell in &cells[1..] {
        let _: f64 = cell.parse().unwrap();
    }
}
