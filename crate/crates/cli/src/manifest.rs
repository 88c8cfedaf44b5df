//! Run manifests: a JSON description from which a concealment run is
//! fully reproducible — input, mask source, method, configuration, seed,
//! and output paths. Command-line flags override manifest fields.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use freqfill::grid::{ExtrapolationConfig, Method};
use serde::{Deserialize, Serialize};

use crate::usage_error;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    /// Input image path, or `synthetic:NAME[@WxH]`.
    pub input: String,
    /// Uncorrupted image for PSNR reporting.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
    pub mask: MaskSource,
    /// "fse" or "muse".
    pub method: String,
    #[serde(default)]
    pub config: ManifestConfig,
    /// Weight multiplier for previously concealed samples reused as
    /// support in mask-image runs.
    #[serde(default = "default_concealed_weight")]
    pub concealed_weight: f64,
    /// Base seed for synthetic inputs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "is_false")]
    pub allow_contiguous: bool,
    pub output: OutputPaths,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum MaskSource {
    /// Regular isolated-block pattern, concealed block-by-block.
    Pattern {
        block_size: usize,
        spacing: usize,
        offset: (usize, usize),
    },
    /// Arbitrary mask image (dark = lost), concealed tile-by-tile.
    Image {
        path: String,
        #[serde(default = "default_tile")]
        tile: usize,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestConfig {
    pub iterations: u32,
    pub gamma: f64,
    pub rho_hat: f64,
    pub tau: f64,
    pub n_bf: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputPaths {
    pub image: String,
    /// Defaults to the image path with a `.trace.csv` extension.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<String>,
    /// Defaults to the image path with a `.report.txt` extension.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<String>,
}

fn default_concealed_weight() -> f64 {
    1.0
}

fn default_tile() -> usize {
    16
}

fn is_false(v: &bool) -> bool {
    !v
}

impl Default for ManifestConfig {
    fn default() -> Self {
        ExtrapolationConfig::default().into()
    }
}

impl From<ExtrapolationConfig> for ManifestConfig {
    fn from(c: ExtrapolationConfig) -> Self {
        ManifestConfig {
            iterations: c.iterations,
            gamma: c.gamma,
            rho_hat: c.rho_hat,
            tau: c.tau,
            n_bf: c.n_bf,
        }
    }
}

impl From<ManifestConfig> for ExtrapolationConfig {
    fn from(c: ManifestConfig) -> Self {
        ExtrapolationConfig {
            iterations: c.iterations,
            gamma: c.gamma,
            rho_hat: c.rho_hat,
            tau: c.tau,
            n_bf: c.n_bf,
        }
    }
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading manifest {}", path.display()))?;
        serde_json::from_str(&text)
            .with_context(|| format!("parsing manifest {}", path.display()))
            .map_err(|e| usage_error(format!("{e:#}")))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text).with_context(|| format!("writing manifest {}", path.display()))
    }

    pub fn parsed_method(&self) -> Result<Method> {
        self.method.parse().map_err(|e: String| usage_error(e))
    }

    pub fn trace_path(&self) -> std::path::PathBuf {
        match &self.output.trace {
            Some(p) => p.into(),
            None => Path::new(&self.output.image).with_extension("trace.csv"),
        }
    }

    pub fn report_path(&self) -> std::path::PathBuf {
        match &self.output.report {
            Some(p) => p.into(),
            None => Path::new(&self.output.image).with_extension("report.txt"),
        }
    }
}

// ===== Tests =====
