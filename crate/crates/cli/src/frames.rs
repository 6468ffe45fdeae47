//! Frame supply for a run: a procedural scene or a loaded sequence.

use std::borrow::Cow;

use wrs_core::{load_sequence, render_procedural, DisplayGeometry, FrameBundle, SceneSpec};

use crate::{CliError, RunConfig};

pub enum Frames {
    /// Static scenes render once and the bundle is reused for every frame.
    Procedural {
        spec: SceneSpec,
        geometry: DisplayGeometry,
        still: Option<FrameBundle>,
    },
    Loaded(Vec<FrameBundle>),
}

impl Frames {
    pub fn open(cfg: &RunConfig) -> Result<Self, CliError> {
        if let Some(dir) = &cfg.input {
            let frames = load_sequence(dir).map_err(CliError::runtime)?;
            let dims = frames[0].dims();
            if dims != (cfg.geometry.width_px, cfg.geometry.height_px) {
                return Err(CliError::config(
                    "geometry",
                    format!(
                        "input frames are {}x{}, geometry says {}x{}",
                        dims.0, dims.1, cfg.geometry.width_px, cfg.geometry.height_px
                    ),
                ));
            }
            if cfg.frames > frames.len() as u64 {
                return Err(CliError::config(
                    "frames",
                    format!(
                        "{} requested but {} holds {}",
                        cfg.frames,
                        dir.display(),
                        frames.len()
                    ),
                ));
            }
            return Ok(Frames::Loaded(frames));
        }
        let spec = cfg
            .scene
            .ok_or_else(|| CliError::config("scene", "missing"))?;
        let still = if spec.is_static() {
            Some(
                render_procedural(&spec, 0, &cfg.geometry)
                    .map_err(|e| CliError::runtime(format!("frame 0: {e}")))?,
            )
        } else {
            None
        };
        Ok(Frames::Procedural {
            spec,
            geometry: cfg.geometry,
            still,
        })
    }

    /// Every frame is the same bundle.
    pub fn is_static(&self) -> bool {
        matches!(self, Frames::Procedural { still: Some(_), .. })
    }

    /// Number of available frames, `None` when unbounded.
    pub fn available(&self) -> Option<u64> {
        match self {
            Frames::Procedural { .. } => None,
            Frames::Loaded(v) => Some(v.len() as u64),
        }
    }

    pub fn get(&self, index: u64) -> wrs_core::Result<Cow<'_, FrameBundle>> {
        match self {
            Frames::Procedural { still: Some(b), .. } => Ok(Cow::Borrowed(b)),
            Frames::Procedural { spec, geometry, .. } => {
                render_procedural(spec, index, geometry).map(Cow::Owned)
            }
            Frames::Loaded(v) => Ok(Cow::Borrowed(&v[index as usize])),
        }
    }

    pub fn iter(
        &self,
        count: u64,
    ) -> impl Iterator<Item = wrs_core::Result<Cow<'_, FrameBundle>>> + '_ {
        (0..count).map(move |i| self.get(i))
    }
}
