//! Shared fixtures for the criterion benches.

use wrs_core::geometry::DisplayGeometry;
use wrs_core::scene::{render_procedural, FrameBundle, SceneKind, SceneSpec};

/// Resolutions exercised by the per-frame benches.
pub const RESOLUTIONS: [(usize, usize); 2] = [(640, 360), (1280, 720)];

/// Display at 48 px/deg, the density used for the quality runs.
pub fn geometry(w: usize, h: usize) -> DisplayGeometry {
    DisplayGeometry::new(w, h, w as f64 / 48.0).expect("valid geometry")
}

/// First frame of a panning perlin scene.
pub fn frame(geom: &DisplayGeometry) -> FrameBundle {
    let spec = SceneSpec::new(SceneKind::PerlinTexture)
        .with_scale(32.0)
        .with_velocity(1.0);
    render_procedural(&spec, 0, geom).expect("procedural frame")
}
