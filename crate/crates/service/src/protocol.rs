//! Wire messages. One JSON object per text frame, tagged by `type`.

use base64::Engine;
use pantrack_core::{BBox, ControlMode, Frame};
use serde::{Deserialize, Serialize};

pub const PROTO_VERSION: u32 = 1;
pub const FRAME_ENCODING: &str = "gray8_b64";

/// Operator command. Coordinates are display (post-flip) pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClientCommand {
    SelectRoi { x: i64, y: i64, w: i64, h: i64 },
    /// World meters per step for operator-driven targets.
    Steer { vx: f64, vy: f64 },
    Pause,
    Resume,
    Reset,
    SetMode { mode: ControlMode },
    Stop,
}

impl ClientCommand {
    pub fn parse(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    BadMessage,
    RoiRejected,
    SteerRejected,
    Busy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireBox {
    pub x: i64,
    pub y: i64,
    pub w: i64,
    pub h: i64,
}

impl From<BBox> for WireBox {
    fn from(b: BBox) -> Self {
        Self { x: b.x, y: b.y, w: b.w, h: b.h }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Hello {
        proto_version: u32,
        frame_width: usize,
        frame_height: usize,
    },
    Frame {
        seq: u64,
        width: usize,
        height: usize,
        encoding: String,
        data: String,
    },
    Telemetry {
        seq: u64,
        pan: f64,
        tilt: f64,
        /// Absent (null) unless the tracker produced a box this step.
        errorx: Option<f64>,
        errory: Option<f64>,
        fps: f64,
        track: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bbox: Option<WireBox>,
    },
    Error {
        code: ErrorCode,
        message: String,
    },
}

impl ServerMessage {
    pub fn hello(frame_width: usize, frame_height: usize) -> Self {
        Self::Hello { proto_version: PROTO_VERSION, frame_width, frame_height }
    }

    pub fn frame(seq: u64, frame: &Frame) -> Self {
        Self::Frame {
            seq,
            width: frame.width,
            height: frame.height,
            encoding: FRAME_ENCODING.to_string(),
            data: base64::engine::general_purpose::STANDARD.encode(&frame.pixels),
        }
    }

    pub fn error(code: ErrorCode, message: impl Into<String>) -> Self {
        Self::Error { code, message: message.into() }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("server messages always serialize")
    }
}

/// Decodes a frame message's pixel payload.
pub fn decode_pixels(data: &str) -> Result<Vec<u8>, base64::DecodeError> {
    base64::engine::general_purpose::STANDARD.decode(data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn commands_parse() {
        let cases = [
            (json!({"type": "select_roi", "x": 1, "y": 2, "w": 30, "h": 40}), ClientCommand::SelectRoi { x: 1, y: 2, w: 30, h: 40 }),
            (json!({"type": "steer", "vx": 0.01, "vy": -0.5}), ClientCommand::Steer { vx: 0.01, vy: -0.5 }),
            (json!({"type": "pause"}), ClientCommand::Pause),
            (json!({"type": "resume"}), ClientCommand::Resume),
            (json!({"type": "reset"}), ClientCommand::Reset),
            (json!({"type": "set_mode", "mode": "faithful"}), ClientCommand::SetMode { mode: ControlMode::Faithful }),
            (json!({"type": "set_mode", "mode": "corrected"}), ClientCommand::SetMode { mode: ControlMode::Corrected }),
            (json!({"type": "stop"}), ClientCommand::Stop),
        ];
        for (text, want) in cases {
            assert_eq!(ClientCommand::parse(&text.to_string()).unwrap(), want);
        }
    }

    #[test]
    fn malformed_commands_rejected() {
        for text in [
            "",
            "not json",
            "[]",
            r#"{"x": 1}"#,
            r#"{"type": "jump"}"#,
            r#"{"type": "select_roi", "x": 1, "y": 2, "w": 3}"#,
            r#"{"type": "select_roi", "x": 1.5, "y": 2, "w": 3, "h": 4}"#,
            r#"{"type": "set_mode", "mode": "fast"}"#,
            r#"{"type": "select_roi", "x": 1, "y": 2, "w": 3, "h": 4, "z": 5}"#,
            r#"{"type": "steer", "vx": "1", "vy": 0}"#,
        ] {
            assert!(ClientCommand::parse(text).is_err(), "{text}");
        }
    }

    #[test]
    fn hello_shape() {
        let v: serde_json::Value = serde_json::from_str(&ServerMessage::hello(1000, 800).to_json()).unwrap();
        assert_eq!(v, json!({"type": "hello", "proto_version": 1, "frame_width": 1000, "frame_height": 800}));
    }

    #[test]
    fn frame_round_trip() {
        let mut f = Frame::filled(3, 2, 7, 0);
        f.pixels[4] = 250;
        let msg = ServerMessage::frame(9, &f);
        let v: serde_json::Value = serde_json::from_str(&msg.to_json()).unwrap();
        assert_eq!(v["type"], "frame");
        assert_eq!(v["seq"], 9);
        assert_eq!(v["encoding"], "gray8_b64");
        assert_eq!(decode_pixels(v["data"].as_str().unwrap()).unwrap(), f.pixels);
    }

    #[test]
    fn telemetry_shape() {
        let msg = ServerMessage::Telemetry {
            seq: 3,
            pan: -1.0,
            tilt: -20.0,
            errorx: None,
            errory: None,
            fps: 14.5,
            track: "idle".into(),
            bbox: None,
        };
        let v: serde_json::Value = serde_json::from_str(&msg.to_json()).unwrap();
        assert_eq!(
            v,
            json!({"type": "telemetry", "seq": 3, "pan": -1.0, "tilt": -20.0, "errorx": null, "errory": null, "fps": 14.5, "track": "idle"})
        );
        let err: serde_json::Value =
            serde_json::from_str(&ServerMessage::error(ErrorCode::RoiRejected, "flat").to_json()).unwrap();
        assert_eq!(err, json!({"type": "error", "code": "roi_rejected", "message": "flat"}));
    }
}
