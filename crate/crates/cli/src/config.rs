//! Pipeline configuration: one JSON or TOML file, paths relative to it.

use std::path::{Path, PathBuf};

use emiprior_core::synth::SynthSpec;
use serde::{Deserialize, Serialize};

use crate::CliError;

fn default_snow_threshold() -> f64 {
    emiprior_core::ancillary::DEFAULT_SNOW_THRESHOLD
}

fn default_fov_radius() -> f64 {
    emiprior_core::landcover::DEFAULT_FOV_RADIUS_KM
}

fn default_channel_threshold() -> f64 {
    0.9
}

fn default_tolerance() -> f64 {
    emiprior_core::evaluation::DEFAULT_TOLERANCE_DEG
}

/// Uniform wavenumber sampling for spectra.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralGrid {
    pub start: f64,
    pub step: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub profiles: Option<PathBuf>,
    #[serde(default)]
    pub landcover: Option<PathBuf>,
    /// Built-in matrix when absent.
    #[serde(default)]
    pub correspondence: Option<PathBuf>,
    /// Built-in table when absent.
    #[serde(default)]
    pub constraints: Option<PathBuf>,
    /// Hinge-point records; also the sample set for their covariance.
    #[serde(default)]
    pub camel: Option<PathBuf>,
    /// Ancillary records; their locations define the grid.
    #[serde(default)]
    pub ancillary: Option<PathBuf>,
    #[serde(default)]
    pub references: Option<PathBuf>,
    #[serde(default)]
    pub column: Option<PathBuf>,
    /// Number, or `path[#label]` relative to the config file.
    #[serde(default)]
    pub emissivity: Option<String>,
    #[serde(default)]
    pub wavenumbers: Option<SpectralGrid>,

    #[serde(default = "default_snow_threshold")]
    pub snow_threshold: f64,
    #[serde(default = "default_fov_radius")]
    pub fov_radius_km: f64,
    #[serde(default = "default_channel_threshold")]
    pub channel_threshold: f64,
    #[serde(default = "default_tolerance")]
    pub coincidence_tol_deg: f64,

    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub synth: Option<SynthSpec>,

    /// Directory the relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            profiles: None,
            landcover: None,
            correspondence: None,
            constraints: None,
            camel: None,
            ancillary: None,
            references: None,
            column: None,
            emissivity: None,
            wavenumbers: None,
            snow_threshold: default_snow_threshold(),
            fov_radius_km: default_fov_radius(),
            channel_threshold: default_channel_threshold(),
            coincidence_tol_deg: default_tolerance(),
            out: None,
            seed: None,
            workers: None,
            synth: None,
            base_dir: PathBuf::from("."),
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: Self = match path.extension().and_then(|e| e.to_str()) {
            Some("toml") => toml::from_str(&text)
                .map_err(|e| CliError::Config(format!("{}: {}", path.display(), e.message())))?,
            _ => serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?,
        };
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        if cfg.base_dir.as_os_str().is_empty() {
            cfg.base_dir = PathBuf::from(".");
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |what: &str, v: f64, range: &str| {
            Err(CliError::Config(format!("{what} = {v} outside {range}")))
        };
        if !(0.0..=1.0).contains(&self.snow_threshold) {
            return bad("snow_threshold", self.snow_threshold, "[0, 1]");
        }
        if !(self.fov_radius_km > 0.0) {
            return bad("fov_radius_km", self.fov_radius_km, "(0, inf)");
        }
        if !(self.channel_threshold > 0.0 && self.channel_threshold < 1.0) {
            return bad("channel_threshold", self.channel_threshold, "(0, 1)");
        }
        if !(self.coincidence_tol_deg > 0.0) {
            return bad("coincidence_tol_deg", self.coincidence_tol_deg, "(0, inf)");
        }
        if self.workers == Some(0) {
            return Err(CliError::Config("workers must be at least 1".into()));
        }
        Ok(())
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<(), CliError> {
        if let Some(out) = &o.out {
            // flag paths are relative to the working directory
            let cwd = std::env::current_dir()
                .map_err(|e| CliError::Config(format!("no working directory: {e}")))?;
            self.out = Some(cwd.join(out));
        }
        if o.seed.is_some() {
            self.seed = o.seed;
        }
        if o.workers.is_some() {
            self.workers = o.workers;
        }
        self.validate()
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// The resolved path of a required input, which must exist.
    pub fn input(&self, field: &'static str, value: &Option<PathBuf>) -> Result<PathBuf, CliError> {
        let p = value
            .as_ref()
            .ok_or_else(|| CliError::Config(format!("`{field}` is required for this command")))?;
        let p = self.resolve(p);
        if !p.exists() {
            return Err(CliError::Config(format!(
                "`{field}` file {} does not exist",
                p.display()
            )));
        }
        Ok(p)
    }

    /// Like [`Self::input`], `None` when the field is absent.
    pub fn optional_input(
        &self,
        field: &'static str,
        value: &Option<PathBuf>,
    ) -> Result<Option<PathBuf>, CliError> {
        match value {
            None => Ok(None),
            Some(_) => self.input(field, value).map(Some),
        }
    }

    /// Output directory: flag, then file, then the working directory.
    pub fn out_dir(&self) -> PathBuf {
        match &self.out {
            Some(p) => self.resolve(p),
            None => PathBuf::from("."),
        }
    }
}
