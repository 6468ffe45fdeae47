//! Text messages exchanged over the stream socket.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LiveMethod {
    Fov,
    #[default]
    Wrs,
    SideBySide,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    /// Gaze position in pixels; clamped to the frame when applied.
    Gaze {
        x: f64,
        y: f64,
        #[serde(default, alias = "timestamp_ms")]
        t_ms: Option<f64>,
    },
    /// Partial reconfiguration; absent fields are left unchanged.
    Config {
        #[serde(default)]
        method: Option<LiveMethod>,
        #[serde(default)]
        fovea_deg: Option<f64>,
        #[serde(default)]
        width: Option<u16>,
        #[serde(default)]
        height: Option<u16>,
    },
}

impl ClientMessage {
    pub fn parse(text: &str) -> Result<Self, String> {
        let msg: Self = serde_json::from_str(text).map_err(|e| e.to_string())?;
        if let ClientMessage::Gaze { x, y, .. } = msg {
            if !x.is_finite() || !y.is_finite() {
                return Err("gaze coordinates must be finite".into());
            }
        }
        Ok(msg)
    }
}

/// `{"type":"error","detail":...}` sent back to the offending client only.
pub fn error_json(detail: &str) -> String {
    serde_json::json!({ "type": "error", "detail": detail }).to_string()
}
