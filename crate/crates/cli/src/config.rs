//! Run configuration, read from TOML.

use std::path::{Path, PathBuf};

use lms_core::geometry::{Fallback, GraphMode};
use lms_core::knn::CurveOptions;
use lms_core::sim::SimConfig;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// One file may carry sections for several subcommands; each run reads the
/// section named after its subcommand.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub embed: Option<EmbedSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub select_dim: Option<SelectDimSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tda: Option<TdaSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub geodesic: Option<GeodesicSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub predict: Option<PredictSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reproduce: Option<ReproduceSection>,
}

/// Either a CSV file of rows or a simulation.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSource {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sim: Option<SimConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbedSection {
    pub data: DataSource,
    pub r: usize,
    #[serde(default)]
    pub centered: bool,
    /// Align the scores to the exact features (simulated finite-rank data).
    #[serde(default)]
    pub align: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectMethod {
    #[default]
    Wasserstein,
    Elbow,
    Both,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectDimSection {
    pub data: DataSource,
    #[serde(default)]
    pub method: SelectMethod,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_max: Option<usize>,
    #[serde(default)]
    pub shuffle: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointSet {
    /// Rows of the data matrix.
    #[default]
    Rows,
    /// Simulated latent coordinates.
    Latent,
    /// Leading `r` normalised PC scores.
    Scores,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TdaSection {
    pub data: DataSource,
    #[serde(default)]
    pub points: PointSet,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<usize>,
    #[serde(default = "default_max_scale")]
    pub max_scale: f64,
    #[serde(default = "default_max_dim")]
    pub max_dim: u8,
    #[serde(default = "default_cutoff")]
    pub cutoff: f64,
    #[serde(default = "default_cap")]
    pub cap: usize,
    /// Subsample down to `cap` points instead of failing.
    #[serde(default)]
    pub subsample: bool,
}

fn default_max_scale() -> f64 {
    1.5
}

fn default_max_dim() -> u8 {
    1
}

fn default_cutoff() -> f64 {
    0.2
}

fn default_cap() -> usize {
    lms_core::tda::DEFAULT_H1_CAP
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeodesicSection {
    pub data: DataSource,
    /// Latent coordinates for file data; simulated data supplies its own.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub latent_path: Option<PathBuf>,
    pub r: usize,
    #[serde(default)]
    pub graph: GraphMode,
    #[serde(default)]
    pub fallback: Fallback,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Regression,
    Classification,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "from", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetSpec {
    /// A CSV of responses, or one column of integer labels.
    File { path: PathBuf, task: Task },
    /// Mixture component of each simulated row.
    Atoms,
    /// Azimuth and elevation of each simulated torus point.
    TorusAngles,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictSection {
    pub data: DataSource,
    pub targets: TargetSpec,
    #[serde(default, flatten)]
    pub curve: CurveSettings,
}

/// The error-curve options other than the seed, which comes from the run.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct CurveSettings {
    pub r_grid: Vec<usize>,
    pub n_splits: usize,
    pub split_frac: f64,
    pub k: usize,
    pub centered: bool,
    pub train_only_embedding: bool,
}

impl Default for CurveSettings {
    fn default() -> Self {
        let d = CurveOptions::default();
        CurveSettings {
            r_grid: d.r_grid,
            n_splits: d.n_splits,
            split_frac: d.split_frac,
            k: d.k,
            centered: d.centered,
            train_only_embedding: d.train_only_embedding,
        }
    }
}

impl CurveSettings {
    pub fn options(&self, seed: u64) -> CurveOptions {
        CurveOptions {
            r_grid: self.r_grid.clone(),
            n_splits: self.n_splits,
            split_frac: self.split_frac,
            k: self.k,
            seed,
            centered: self.centered,
            train_only_embedding: self.train_only_embedding,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Figure {
    Fig4,
    Fig5,
    Fig7,
    Fig8,
    Fig9,
    Fig10,
    Fig11,
    Fig12,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReproduceSection {
    pub target: Figure,
    /// Seeds per cell for replicate grids.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replicates: Option<usize>,
    /// Train/test splits for the error curves.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_splits: Option<usize>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Config, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Config, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Config::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    /// Makes relative input paths relative to the config file.
    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        let sources = [
            self.embed.as_mut().map(|s| &mut s.data),
            self.select_dim.as_mut().map(|s| &mut s.data),
            self.tda.as_mut().map(|s| &mut s.data),
            self.geodesic.as_mut().map(|s| &mut s.data),
            self.predict.as_mut().map(|s| &mut s.data),
        ];
        for src in sources.into_iter().flatten() {
            if let Some(p) = src.path.as_mut() {
                fix(p);
            }
        }
        if let Some(g) = self.geodesic.as_mut() {
            if let Some(p) = g.latent_path.as_mut() {
                fix(p);
            }
        }
        if let Some(TargetSpec::File { path, .. }) = self.predict.as_mut().map(|p| &mut p.targets) {
            fix(path);
        }
    }

    /// Writes `seed` into every simulation block.
    pub fn apply_seed(&mut self, seed: u64) {
        self.seed = Some(seed);
        if let Some(s) = self.simulate.as_mut() {
            s.seed = seed;
        }
        let sources = [
            self.embed.as_mut().map(|s| &mut s.data),
            self.select_dim.as_mut().map(|s| &mut s.data),
            self.tda.as_mut().map(|s| &mut s.data),
            self.geodesic.as_mut().map(|s| &mut s.data),
            self.predict.as_mut().map(|s| &mut s.data),
        ];
        for src in sources.into_iter().flatten() {
            if let Some(sim) = src.sim.as_mut() {
                sim.seed = seed;
            }
        }
    }

    /// The seed recorded in the file: top-level first, then the first
    /// simulation block that sets one.
    pub fn file_seed(&self) -> Option<u64> {
        self.seed.or_else(|| {
            let sims = [
                self.simulate.as_ref(),
                self.embed.as_ref().and_then(|s| s.data.sim.as_ref()),
                self.select_dim.as_ref().and_then(|s| s.data.sim.as_ref()),
                self.tda.as_ref().and_then(|s| s.data.sim.as_ref()),
                self.geodesic.as_ref().and_then(|s| s.data.sim.as_ref()),
                self.predict.as_ref().and_then(|s| s.data.sim.as_ref()),
            ];
            sims.into_iter().flatten().map(|s| s.seed).find(|&s| s != 0)
        })
    }
}
