//! Declarative run configuration. One TOML file carries a global block
//! (seed, output directory, workers) and exactly one subcommand section;
//! unknown keys are rejected everywhere.

use diffnet_core::diffusion::DriftSpec;
use diffnet_core::graph::OffspringLaw;
use diffnet_core::hydro::{
    ChaosConfig, ConcentrationConfig, ConvergenceConfig, FiniteModel, LimitSampler,
    PathFunctional, RootMode,
};
use diffnet_core::kuramoto::{GwModel, OmegaMode, SyncConfig, Theta0Mode};
use diffnet_core::network::{MarkDistribution, MarkLaws};
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub master_seed: u64,
    pub output_dir: Option<PathBuf>,
    pub workers: Option<usize>,
    pub format: Option<OutputFormat>,
    pub sample_graph: Option<SampleGraphConfig>,
    pub simulate: Option<SimulateConfig>,
    pub locality: Option<LocalityCliConfig>,
    pub converge: Option<ConvergeCliConfig>,
    pub concentration: Option<ConcentrationCliConfig>,
    pub chaos: Option<ChaosCliConfig>,
    pub phase_diagram: Option<PhaseDiagramCliConfig>,
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize, PartialEq, Eq, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LawConfig {
    Poisson { mean: f64 },
    Binomial { n: u64, p: f64 },
    Deterministic { children: usize },
    Empirical { pmf: Vec<f64> },
}

impl LawConfig {
    pub fn to_law(&self) -> OffspringLaw {
        match self {
            LawConfig::Poisson { mean } => OffspringLaw::Poisson { mean: *mean },
            LawConfig::Binomial { n, p } => OffspringLaw::Binomial { n: *n, p: *p },
            LawConfig::Deterministic { children } => OffspringLaw::Deterministic {
                children: *children,
            },
            LawConfig::Empirical { pmf } => OffspringLaw::Empirical { pmf: pmf.clone() },
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GraphModelConfig {
    ErdosRenyi { n: usize, p: f64 },
    Cycle { n: usize },
    RandomRegular { n: usize, d: usize },
    GwTree {
        root_law: LawConfig,
        law: LawConfig,
        generations: usize,
    },
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MarkLawConfig {
    Deterministic { value: f64 },
    Uniform { lo: f64, hi: f64 },
    Normal { mean: f64, sd: f64 },
}

impl MarkLawConfig {
    fn to_distribution(&self) -> MarkDistribution {
        match self {
            MarkLawConfig::Deterministic { value } => {
                MarkDistribution::Deterministic { value: *value }
            }
            MarkLawConfig::Uniform { lo, hi } => MarkDistribution::Uniform { lo: *lo, hi: *hi },
            MarkLawConfig::Normal { mean, sd } => MarkDistribution::Normal {
                mean: *mean,
                sd: *sd,
            },
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct MarksConfig {
    pub weight: MarkLawConfig,
    pub media: MarkLawConfig,
    pub initial: MarkLawConfig,
}

impl MarksConfig {
    pub fn to_laws(&self) -> MarkLaws {
        MarkLaws {
            weight: self.weight.to_distribution(),
            media: self.media.to_distribution(),
            initial: self.initial.to_distribution(),
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(tag = "preset", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DriftConfig {
    /// Weight-normalized Kuramoto coupling.
    Kuramoto { epsilon: f64 },
    /// Adjacency coupling scaled by `k`, no degree normalization.
    KuramotoUnnormalized { k: f64, epsilon: f64 },
    /// No pairwise interaction.
    Uncoupled { epsilon: f64 },
}

impl DriftConfig {
    pub fn to_drift(&self) -> DriftSpec {
        match self {
            DriftConfig::Kuramoto { epsilon } => DriftSpec::kuramoto(*epsilon),
            DriftConfig::KuramotoUnnormalized { k, epsilon } => {
                DriftSpec::kuramoto_unnormalized(*k, *epsilon)
            }
            DriftConfig::Uncoupled { epsilon } => DriftSpec::uncoupled(*epsilon),
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SampleGraphConfig {
    pub model: GraphModelConfig,
    /// Output file name (inside the output directory).
    pub output: String,
    /// When present, marks are attached and the marked-network schema is
    /// written instead of the plain graph schema.
    pub marks: Option<MarksConfig>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    /// Path to a network JSON file (marked-network schema, or plain graph
    /// schema when `marks` supplies the laws).
    pub network: PathBuf,
    pub marks: Option<MarksConfig>,
    pub drift: DriftConfig,
    pub t: f64,
    pub dt: f64,
    pub output: String,
    /// Also write a little-endian binary dump with a JSON sidecar.
    #[serde(default)]
    pub binary: bool,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct LocalityCliConfig {
    pub model: GraphModelConfig,
    pub marks: MarksConfig,
    pub drift: DriftConfig,
    #[serde(default)]
    pub root: usize,
    pub h0_radius: usize,
    /// Truncation radii; the largest is the reference solution.
    pub radii: Vec<usize>,
    pub t: f64,
    pub dt: f64,
    pub output: String,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum StudyModelConfig {
    ErdosRenyi { mean_degree: f64 },
    Cycle,
    RandomRegular { degree: usize },
    GwTree {
        root_law: LawConfig,
        law: LawConfig,
        depth: usize,
    },
}

impl StudyModelConfig {
    pub fn to_model(&self) -> FiniteModel {
        match self {
            StudyModelConfig::ErdosRenyi { mean_degree } => FiniteModel::ErdosRenyi {
                mean_degree: *mean_degree,
            },
            StudyModelConfig::Cycle => FiniteModel::Cycle,
            StudyModelConfig::RandomRegular { degree } => {
                FiniteModel::RandomRegular { degree: *degree }
            }
            StudyModelConfig::GwTree { root_law, law, depth } => FiniteModel::GwTree {
                root_law: root_law.to_law(),
                law: law.to_law(),
                depth: *depth,
            },
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LimitSamplerConfig {
    GwTree {
        root_law: LawConfig,
        law: LawConfig,
        depth: usize,
    },
    LineSegment { radius: usize },
}

impl LimitSamplerConfig {
    pub fn to_sampler(&self) -> LimitSampler {
        match self {
            LimitSamplerConfig::GwTree { root_law, law, depth } => LimitSampler::GwTree {
                root_law: root_law.to_law(),
                law: law.to_law(),
                depth: *depth,
            },
            LimitSamplerConfig::LineSegment { radius } => {
                LimitSampler::LineSegment { radius: *radius }
            }
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergeCliConfig {
    pub model: StudyModelConfig,
    pub sizes: Vec<usize>,
    pub marks: MarksConfig,
    pub drift: DriftConfig,
    pub t: f64,
    pub dt: f64,
    pub limit: LimitSamplerConfig,
    pub limit_replications: usize,
    pub graphs_per_size: usize,
    pub roots_per_graph: usize,
    pub path_points: usize,
    #[serde(default = "default_bootstrap")]
    pub bootstrap: usize,
    pub output: String,
}

fn default_bootstrap() -> usize {
    500
}

impl ConvergeCliConfig {
    pub fn to_core(&self) -> ConvergenceConfig {
        ConvergenceConfig {
            model: self.model.to_model(),
            sizes: self.sizes.clone(),
            marks: self.marks.to_laws(),
            drift: self.drift.to_drift(),
            t: self.t,
            dt: self.dt,
            limit: self.limit.to_sampler(),
            limit_replications: self.limit_replications,
            graphs_per_size: self.graphs_per_size,
            roots_per_graph: self.roots_per_graph,
            path_points: self.path_points,
            bootstrap: self.bootstrap,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FunctionalConfig {
    /// `tanh(scale (theta(t) - shift))` at the subsample point closest to
    /// `time_frac` of the horizon, BL-normalized.
    Sigmoid { time_frac: f64, scale: f64, shift: f64 },
    Constant { value: f64 },
}

impl FunctionalConfig {
    pub fn to_functional(&self, path_points: usize) -> PathFunctional {
        match self {
            FunctionalConfig::Sigmoid { time_frac, scale, shift } => {
                let idx = ((path_points - 1) as f64 * time_frac).round() as usize;
                PathFunctional::sigmoid(idx.min(path_points - 1), *scale, *shift)
            }
            FunctionalConfig::Constant { value } => PathFunctional::constant(*value),
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ConcentrationCliConfig {
    pub model: StudyModelConfig,
    pub sizes: Vec<usize>,
    pub marks: MarksConfig,
    pub drift: DriftConfig,
    pub t: f64,
    pub dt: f64,
    pub radius: usize,
    pub replications: usize,
    pub path_points: usize,
    #[serde(default = "default_bootstrap")]
    pub bootstrap: usize,
    pub statistic: FunctionalConfig,
    pub output: String,
}

impl ConcentrationCliConfig {
    pub fn to_core(&self) -> ConcentrationConfig {
        ConcentrationConfig {
            model: self.model.to_model(),
            sizes: self.sizes.clone(),
            marks: self.marks.to_laws(),
            drift: self.drift.to_drift(),
            t: self.t,
            dt: self.dt,
            radius: self.radius,
            replications: self.replications,
            path_points: self.path_points,
            bootstrap: self.bootstrap,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RootModeConfig {
    ExactAverage,
    SampledPairs { pairs: usize },
    SameRoot,
}

impl RootModeConfig {
    pub fn to_mode(&self) -> RootMode {
        match self {
            RootModeConfig::ExactAverage => RootMode::ExactAverage,
            RootModeConfig::SampledPairs { pairs } => RootMode::SampledPairs { pairs: *pairs },
            RootModeConfig::SameRoot => RootMode::SameRoot,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ChaosCliConfig {
    pub model: StudyModelConfig,
    pub sizes: Vec<usize>,
    pub marks: MarksConfig,
    pub drift: DriftConfig,
    pub t: f64,
    pub dt: f64,
    pub replications: usize,
    pub path_points: usize,
    #[serde(default = "default_bootstrap")]
    pub bootstrap: usize,
    pub root_mode: RootModeConfig,
    pub f: FunctionalConfig,
    pub g: FunctionalConfig,
    pub output: String,
}

impl ChaosCliConfig {
    pub fn to_core(&self, n: usize) -> ChaosConfig {
        ChaosConfig {
            model: self.model.to_model(),
            n,
            marks: self.marks.to_laws(),
            drift: self.drift.to_drift(),
            t: self.t,
            dt: self.dt,
            replications: self.replications,
            path_points: self.path_points,
            bootstrap: self.bootstrap,
            root_mode: self.root_mode.to_mode(),
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SyncModelConfig {
    Binomial { n: u64, p: f64 },
    DRegular { c: usize },
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Theta0Config {
    AllZero,
    Uniform,
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OmegaConfig {
    AllOne,
    Normal,
    Uniform,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseDiagramCliConfig {
    pub model: SyncModelConfig,
    #[serde(default = "default_generations")]
    pub generations: usize,
    #[serde(default = "default_horizon")]
    pub t: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_k_max")]
    pub k_max: f64,
    #[serde(default = "default_k_step")]
    pub k_step: f64,
    #[serde(default = "default_replications")]
    pub replications: usize,
    pub theta0: Theta0Config,
    pub omega: OmegaConfig,
    /// Output file prefix: `<prefix>_mean.csv` and `<prefix>_stderr.csv`.
    pub output_prefix: String,
}

fn default_generations() -> usize {
    13
}
fn default_horizon() -> f64 {
    100.0
}
fn default_dt() -> f64 {
    0.01
}
fn default_epsilon() -> f64 {
    0.05
}
fn default_k_max() -> f64 {
    10.0
}
fn default_k_step() -> f64 {
    0.2
}
fn default_replications() -> usize {
    100
}

impl PhaseDiagramCliConfig {
    pub fn to_core(&self) -> SyncConfig {
        let model = match &self.model {
            SyncModelConfig::Binomial { n, p } => GwModel::Binomial { n: *n, p: *p },
            SyncModelConfig::DRegular { c } => GwModel::DRegular { c: *c },
        };
        // an integer-ratio grid avoids accumulated rounding in the K header
        let steps = (self.k_max / self.k_step).round() as usize;
        let k_values: Vec<f64> = (0..=steps)
            .map(|i| i as f64 * self.k_max / steps as f64)
            .collect();
        SyncConfig {
            model,
            generations: self.generations,
            t: self.t,
            dt: self.dt,
            epsilon: self.epsilon,
            k_values,
            replications: self.replications,
            theta0: match self.theta0 {
                Theta0Config::AllZero => Theta0Mode::AllZero,
                Theta0Config::Uniform => Theta0Mode::Uniform,
            },
            omega: match self.omega {
                OmegaConfig::AllOne => OmegaMode::AllOne,
                OmegaConfig::Normal => OmegaMode::Normal,
                OmegaConfig::Uniform => OmegaMode::Uniform,
            },
        }
    }
}
