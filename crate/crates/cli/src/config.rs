//! JSON run configuration and the command-line overrides layered on top.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use wrs_core::{
    parse_scanpath, synth_scanpath, DisplayGeometry, Method, PipelineConfig, Scanpath, SceneSpec,
    SynthParams,
};

use crate::CliError;

/// Where gaze comes from: a recorded CSV or synthesized fixations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanpathSource {
    Path(PathBuf),
    Synth(SynthParams),
}

impl Default for ScanpathSource {
    fn default() -> Self {
        ScanpathSource::Synth(SynthParams::default())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Procedural scene; exclusive with `input`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene: Option<SceneSpec>,
    /// Directory of numbered PNG frames with optional sidecars.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[serde(default)]
    pub scanpath: ScanpathSource,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default)]
    pub pipeline: PipelineConfig,
    #[serde(default = "default_geometry")]
    pub geometry: DisplayGeometry,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default = "default_frames")]
    pub frames: u64,
    /// Write 16-bit PNGs instead of 8-bit.
    #[serde(default)]
    pub png16: bool,
    #[serde(default = "default_true")]
    pub write_frames: bool,
}

fn default_methods() -> Vec<Method> {
    vec![Method::Fov, Method::Wrs]
}

/// 1280x720 at 48 px/deg.
pub fn default_geometry() -> DisplayGeometry {
    DisplayGeometry::new(1280, 720, 1280.0 / 48.0).unwrap()
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn default_frames() -> u64 {
    150
}

fn default_true() -> bool {
    true
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scene: None,
            input: None,
            scanpath: ScanpathSource::default(),
            methods: default_methods(),
            pipeline: PipelineConfig::default(),
            geometry: default_geometry(),
            seed: 0,
            out: default_out(),
            frames: default_frames(),
            png16: false,
            write_frames: true,
        }
    }
}

/// Which methods a `--method` flag selects.
#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum MethodChoice {
    Fov,
    Wrs,
    Both,
}

impl MethodChoice {
    pub fn methods(self) -> Vec<Method> {
        match self {
            MethodChoice::Fov => vec![Method::Fov],
            MethodChoice::Wrs => vec![Method::Wrs],
            MethodChoice::Both => default_methods(),
        }
    }
}

/// Command-line flags that mirror config keys and win over them.
#[derive(Clone, Debug, Default, clap::Args)]
pub struct Overrides {
    /// JSON run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub method: Option<MethodChoice>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub frames: Option<u64>,
    /// Foveal region diameter in degrees; the fovea radius is half of it.
    #[arg(long)]
    pub fovea_deg: Option<f64>,
}

impl Overrides {
    /// Loads `--config` (or the defaults) and applies every flag.
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(m) = self.method {
            cfg.methods = m.methods();
        }
        if let Some(out) = &self.out {
            cfg.out = out.clone();
        }
        if let Some(frames) = self.frames {
            cfg.frames = frames;
        }
        if let Some(d) = self.fovea_deg {
            if !(d.is_finite() && d > 0.0) {
                return Err(CliError::config(
                    "fovea_deg",
                    format!("must be positive, got {d}"),
                ));
            }
            cfg.pipeline = cfg.pipeline.with_fovea_radius(d / 2.0);
        }
        Ok(cfg)
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::config("config", format!("cannot read {}: {e}", path.display()))
        })?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::config("config", format!("{}: {e}", path.display())))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Checks everything that can be checked before any frame is produced.
    pub fn validate(&self) -> Result<(), CliError> {
        match (&self.scene, &self.input) {
            (Some(_), Some(_)) => {
                return Err(CliError::config(
                    "scene",
                    "give either scene or input, not both",
                ))
            }
            (None, None) => {
                return Err(CliError::config(
                    "scene",
                    "one of scene or input is required",
                ))
            }
            (Some(s), None) => s.validate().map_err(|e| CliError::config("scene", e))?,
            (None, Some(dir)) => {
                if !dir.is_dir() {
                    return Err(CliError::config(
                        "input",
                        format!("{} is not a directory", dir.display()),
                    ));
                }
            }
        }
        if self.methods.is_empty() {
            return Err(CliError::config(
                "methods",
                "at least one method is required",
            ));
        }
        let mut sorted = self.methods.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != self.methods.len() {
            return Err(CliError::config("methods", "methods must be unique"));
        }
        if self.frames == 0 {
            return Err(CliError::config("frames", "must be positive"));
        }
        self.geometry
            .validate()
            .map_err(|e| CliError::config("geometry", e))?;
        self.pipeline
            .validate()
            .map_err(|e| CliError::config("pipeline", e))?;
        match &self.scanpath {
            ScanpathSource::Path(p) if !p.is_file() => Err(CliError::config(
                "scanpath",
                format!("{} does not exist", p.display()),
            )),
            ScanpathSource::Synth(s) => s.validate().map_err(|e| CliError::config("scanpath", e)),
            ScanpathSource::Path(_) => Ok(()),
        }
    }

    pub fn load_scanpath(&self) -> Result<Scanpath, CliError> {
        match &self.scanpath {
            ScanpathSource::Path(p) => {
                parse_scanpath(p, Some(&self.geometry)).map_err(|e| CliError::config("scanpath", e))
            }
            ScanpathSource::Synth(s) => {
                synth_scanpath(s, &self.geometry).map_err(|e| CliError::config("scanpath", e))
            }
        }
    }
}
