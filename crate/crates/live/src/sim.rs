//! The single-owner simulation advanced once per tick.

use serde::{Deserialize, Serialize};
use wrs_core::foveation::foveate_into;
use wrs_core::image::to_u8;
use wrs_core::{
    render_procedural, DisplayGeometry, FrameBundle, Image, PipelineConfig, PipelineState,
    SceneSpec,
};

use crate::packet::{FramePacket, PacketMethod};
use crate::protocol::{ClientMessage, LiveMethod};
use crate::LiveError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LiveConfig {
    pub scene: SceneSpec,
    pub geometry: DisplayGeometry,
    #[serde(default)]
    pub pipeline: PipelineConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub method: LiveMethod,
    #[serde(default = "default_tick_hz")]
    pub tick_hz: f64,
}

fn default_tick_hz() -> f64 {
    30.0
}

impl LiveConfig {
    pub fn new(scene: SceneSpec, geometry: DisplayGeometry) -> Self {
        Self {
            scene,
            geometry,
            pipeline: PipelineConfig::default(),
            seed: 0,
            method: LiveMethod::default(),
            tick_hz: default_tick_hz(),
        }
    }

    pub fn validate(&self) -> Result<(), LiveError> {
        self.scene.validate()?;
        self.geometry.validate()?;
        self.pipeline.validate()?;
        if self.geometry.width_px > u16::MAX as usize || self.geometry.height_px > u16::MAX as usize
        {
            return Err(LiveError::Config(
                "frame dimensions must fit in 16 bits".into(),
            ));
        }
        if !(self.tick_hz > 0.0 && self.tick_hz <= 1000.0) {
            return Err(LiveError::Config(format!(
                "tick_hz must be in (0, 1000], got {}",
                self.tick_hz
            )));
        }
        Ok(())
    }
}

/// One entry of a recorded session: a client text message and the tick
/// before which it was applied.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogEntry {
    pub tick: u32,
    pub text: String,
}

pub struct Simulation {
    cfg: LiveConfig,
    state: PipelineState,
    gaze: Option<(f64, f64)>,
    tick: u32,
    fov: Image,
    cached: Option<FrameBundle>,
}

impl Simulation {
    pub fn new(cfg: LiveConfig) -> Result<Self, LiveError> {
        cfg.validate()?;
        let state = PipelineState::new(cfg.pipeline, cfg.geometry, cfg.seed)?;
        let fov = Image::filled(cfg.geometry.width_px, cfg.geometry.height_px, [0.0; 3]);
        Ok(Self {
            cfg,
            state,
            gaze: None,
            tick: 0,
            fov,
            cached: None,
        })
    }

    pub fn config(&self) -> &LiveConfig {
        &self.cfg
    }

    /// Latest gaze, or the frame centre before any gaze arrives.
    pub fn gaze(&self) -> (f64, f64) {
        self.gaze.unwrap_or_else(|| self.cfg.geometry.center())
    }

    pub fn tick(&self) -> u32 {
        self.tick
    }

    /// Applies a client message. State only changes when it returns `Ok`.
    pub fn apply(&mut self, msg: &ClientMessage) -> Result<(), String> {
        match *msg {
            ClientMessage::Gaze { x, y, .. } => {
                self.gaze = Some(self.cfg.geometry.clamp_point((x, y)));
                Ok(())
            }
            ClientMessage::Config {
                method,
                fovea_deg,
                width,
                height,
            } => {
                let mut next = self.cfg.clone();
                if let Some(m) = method {
                    next.method = m;
                }
                if let Some(d) = fovea_deg {
                    if !(d.is_finite() && d > 0.0) {
                        return Err(format!("fovea_deg must be positive, got {d}"));
                    }
                    next.pipeline = next.pipeline.with_fovea_radius(d / 2.0);
                }
                if width.is_some() || height.is_some() {
                    let ppd = next.geometry.pixels_per_degree();
                    let w = width.map_or(next.geometry.width_px, usize::from);
                    let h = height.map_or(next.geometry.height_px, usize::from);
                    if w == 0 || h == 0 {
                        return Err("width and height must be positive".into());
                    }
                    // keep the angular pixel density fixed
                    next.geometry = DisplayGeometry {
                        width_px: w,
                        height_px: h,
                        horizontal_fov_deg: w as f64 / ppd,
                        ..next.geometry
                    };
                }
                next.validate().map_err(|e| e.to_string())?;
                let rebuild =
                    next.pipeline != self.cfg.pipeline || next.geometry != self.cfg.geometry;
                if rebuild {
                    self.state = PipelineState::new(next.pipeline, next.geometry, next.seed)
                        .map_err(|e| e.to_string())?;
                    self.fov =
                        Image::filled(next.geometry.width_px, next.geometry.height_px, [0.0; 3]);
                    self.cached = None;
                    self.gaze = self.gaze.map(|g| next.geometry.clamp_point(g));
                }
                self.cfg = next;
                Ok(())
            }
        }
    }

    /// Advances one pipeline step with the latest gaze and returns its packet.
    pub fn step(&mut self) -> Result<FramePacket, LiveError> {
        let geom = self.cfg.geometry;
        let gaze = self.gaze();
        let fresh;
        let bundle = if self.cfg.scene.is_static() {
            if self.cached.is_none() {
                self.cached = Some(render_procedural(&self.cfg.scene, 0, &geom)?);
            }
            self.cached.as_ref().unwrap()
        } else {
            fresh = render_procedural(&self.cfg.scene, self.tick as u64, &geom)?;
            &fresh
        };
        let method = self.cfg.method;
        if method != LiveMethod::Wrs {
            foveate_into(
                &bundle.color,
                gaze,
                &self.cfg.pipeline.foveation,
                &geom,
                &mut self.fov,
            )?;
        }
        // the reservoirs advance every tick so toggling methods keeps history
        let out = self.state.step(bundle, gaze)?;
        let (w, h) = (geom.width_px, geom.height_px);
        let mut rgb = Vec::with_capacity(3 * w * h);
        for y in 0..h {
            for x in 0..w {
                let p = match method {
                    LiveMethod::Fov => self.fov.get(x, y),
                    LiveMethod::Wrs => out.image.get(x, y),
                    LiveMethod::SideBySide if x < w / 2 => self.fov.get(x, y),
                    LiveMethod::SideBySide => out.image.get(x, y),
                };
                rgb.extend(p.map(to_u8));
            }
        }
        let packet_method = match method {
            LiveMethod::Fov => PacketMethod::Fov,
            LiveMethod::Wrs => PacketMethod::Wrs,
            LiveMethod::SideBySide => PacketMethod::SideBySide,
        };
        let packet = FramePacket::new(packet_method, self.tick, w as u16, h as u16, rgb)?;
        self.tick += 1;
        Ok(packet)
    }
}

/// Re-runs a recorded session for `ticks` ticks and returns every encoded packet.
pub fn replay(cfg: LiveConfig, log: &[LogEntry], ticks: u32) -> Result<Vec<Vec<u8>>, LiveError> {
    let mut sim = Simulation::new(cfg)?;
    let mut pending = log.iter().peekable();
    let mut packets = Vec::with_capacity(ticks as usize);
    for t in 0..ticks {
        while let Some(entry) = pending.next_if(|e| e.tick <= t) {
            if let Ok(msg) = ClientMessage::parse(&entry.text) {
                let _ = sim.apply(&msg);
            }
        }
        packets.push(sim.step()?.encode());
    }
    Ok(packets)
}
