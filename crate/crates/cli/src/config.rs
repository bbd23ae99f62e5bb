//! Run configuration: a TOML file with the sections `[input]`, `[model]`, `[noise]`,
//! `[solver]`, `[method]`, `[output]` and `[evaluate]`.
//!
//! Every key is optional at parse time; each command checks for the keys it needs
//! and reports missing ones by their dotted name (`solver.lambda`). Relative paths
//! are resolved against the directory holding the config file.

use std::path::{Path, PathBuf};

use corosa::admm::PrecondKind;
use corosa::{MaskKind, SchattenOrder};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub input: InputSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub method: MethodSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub evaluate: EvaluateSection,
    /// Run record written into manifests; ignored when a manifest is used as config.
    #[serde(default, skip_serializing)]
    pub run: Option<toml::Table>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSection {
    pub ground_truth: Option<PathBuf>,
    pub measurement: Option<PathBuf>,
    pub mask: Option<PathBuf>,
    /// Label for the `image` column of score reports.
    pub name: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Convolution,
    Fourier,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaskName {
    Random,
    Spiral,
}

impl From<MaskName> for MaskKind {
    fn from(m: MaskName) -> Self {
        match m {
            MaskName::Random => MaskKind::VariableDensityRandom,
            MaskName::Spiral => MaskKind::SpiralWithCenterFill,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub kind: Option<ModelKind>,
    pub psf_sigma: Option<f64>,
    pub psf_radius: Option<usize>,
    pub mask_kind: Option<MaskName>,
    pub density: Option<f64>,
    /// Seed of the random mask; defaults to `noise.seed`.
    pub mask_seed: Option<u64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub gamma_p: Option<f64>,
    pub sigma_eta: Option<f64>,
    pub psnr_db: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PrecondName {
    None,
    Unweighted,
    Matched,
}

impl From<PrecondName> for PrecondKind {
    fn from(p: PrecondName) -> Self {
        match p {
            PrecondName::None => PrecondKind::None,
            PrecondName::Unweighted => PrecondKind::Unweighted,
            PrecondName::Matched => PrecondKind::Matched,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub lambda: Option<f64>,
    pub gamma: Option<f64>,
    pub p: Option<u32>,
    /// Upper bound of the box constraint, in restored-image units.
    pub u: Option<f64>,
    pub levels: Option<usize>,
    pub cycles: Option<usize>,
    pub rel_tol: Option<f64>,
    pub max_iters: Option<usize>,
    pub cg_max_iters: Option<usize>,
    pub cg_rel_tol: Option<f64>,
    pub primal_tol: Option<f64>,
    pub precond: Option<PrecondName>,
    /// Factor applied to the measurement before solving.
    pub intensity_scale: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    Tv1,
    Tv2,
    Hs,
    Cotv,
    Cohs,
    CorosaI,
    Corosa,
}

impl Preset {
    pub const ALL: [Preset; 7] =
        [Self::Tv1, Self::Tv2, Self::Hs, Self::Cotv, Self::Cohs, Self::CorosaI, Self::Corosa];

    pub fn name(self) -> &'static str {
        match self {
            Self::Tv1 => "tv1",
            Self::Tv2 => "tv2",
            Self::Hs => "hs",
            Self::Cotv => "cotv",
            Self::Cohs => "cohs",
            Self::CorosaI => "corosa-i",
            Self::Corosa => "corosa",
        }
    }

    /// Schatten order the preset imposes, if any.
    pub fn forced_order(self) -> Option<SchattenOrder> {
        match self {
            Self::Tv2 | Self::Cotv => Some(SchattenOrder::Two),
            Self::Hs | Self::Cohs => Some(SchattenOrder::One),
            Self::Tv1 | Self::CorosaI | Self::Corosa => None,
        }
    }

    pub fn is_adaptive(self) -> bool {
        matches!(self, Self::CorosaI | Self::Corosa)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodSection {
    pub preset: Option<Preset>,
    /// Constant weight for `cotv`/`cohs`; searched on the baseline when absent.
    pub beta: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateSection {
    /// Output directories of `restore` runs to score.
    #[serde(default)]
    pub runs: Vec<PathBuf>,
    pub csv: Option<PathBuf>,
}

pub fn require<T: Clone>(value: &Option<T>, key: &str) -> CliResult<T> {
    value.clone().ok_or_else(|| CliError::Config(format!("missing key `{key}`")))
}

impl RunConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Reads a config and makes its relative paths absolute.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        let abs = std::path::absolute(path).map_err(|e| CliError::Config(e.to_string()))?;
        let base = abs.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.resolve_paths(&base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(path) = p {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        };
        fix(&mut self.input.ground_truth);
        fix(&mut self.input.measurement);
        fix(&mut self.input.mask);
        fix(&mut self.output.dir);
        fix(&mut self.evaluate.csv);
        for r in &mut self.evaluate.runs {
            if r.is_relative() {
                *r = base.join(&*r);
            }
        }
    }

    pub fn output_dir(&self) -> CliResult<PathBuf> {
        require(&self.output.dir, "output.dir")
    }

    pub fn seed(&self) -> CliResult<u64> {
        require(&self.noise.seed, "noise.seed")
    }

    pub fn image_name(&self) -> String {
        if let Some(n) = &self.input.name {
            return n.clone();
        }
        self.input
            .ground_truth
            .as_ref()
            .and_then(|p| p.file_stem())
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "image".into())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
