//! One operator session: a [`Rig`] plus the run-control state the commands
//! act on. Synchronous and transport-free; the server drives it.

use pantrack_core::{BBox, Rig, ScenarioError, ScenarioSpec, Steer, StepOutput};

use crate::protocol::{ClientCommand, ErrorCode, ServerMessage};

/// Something the network reader took off the wire.
#[derive(Debug, Clone, PartialEq)]
pub enum Inbound {
    Command(ClientCommand),
    /// Could not be parsed; carries the reason.
    Malformed(String),
}

#[derive(Debug)]
pub struct Session {
    rig: Rig,
    last: StepOutput,
    pending_roi: Option<BBox>,
    paused: bool,
    stopped: bool,
    seq: u64,
}

impl Session {
    /// Starts at step 0 with no tracker; the operator picks the region.
    pub fn new(spec: ScenarioSpec) -> Result<Self, ScenarioError> {
        let mut rig = Rig::new(spec)?;
        let last = rig.start_idle();
        Ok(Self { rig, last, pending_roi: None, paused: false, stopped: false, seq: 0 })
    }

    pub fn rig(&self) -> &Rig {
        &self.rig
    }

    pub fn is_paused(&self) -> bool {
        self.paused
    }

    pub fn is_stopped(&self) -> bool {
        self.stopped
    }

    pub fn hello(&self) -> ServerMessage {
        let cam = &self.rig.spec().camera;
        ServerMessage::hello(cam.frame_width, cam.frame_height)
    }

    /// Frame and telemetry for the latest step under a fresh sequence number.
    /// Used for the first broadcast, after a reset, and as the paused keepalive.
    pub fn snapshot(&mut self) -> Vec<ServerMessage> {
        self.seq += 1;
        let out = &self.last;
        let r = &out.record;
        vec![
            ServerMessage::frame(self.seq, &out.frame),
            ServerMessage::Telemetry {
                seq: self.seq,
                pan: r.pan,
                tilt: r.tilt,
                errorx: r.errorx,
                errory: r.errory,
                fps: r.fps,
                track: r.status.as_str().to_string(),
                bbox: out.bbox.map(Into::into),
            },
        ]
    }

    /// Applies one command. Returns any immediate replies.
    pub fn handle(&mut self, inbound: Inbound) -> Vec<ServerMessage> {
        let cmd = match inbound {
            Inbound::Command(cmd) => cmd,
            Inbound::Malformed(reason) => return vec![ServerMessage::error(ErrorCode::BadMessage, reason)],
        };
        match cmd {
            ClientCommand::SelectRoi { x, y, w, h } => {
                // Checked against the frame it is applied to, at the next step.
                self.pending_roi = Some(BBox::new(x, y, w, h));
            }
            ClientCommand::Steer { vx, vy } => {
                if !(vx.is_finite() && vy.is_finite()) {
                    return vec![ServerMessage::error(ErrorCode::SteerRejected, "steer velocity must be finite")];
                }
                if let Err(e) = self.rig.set_steer(Steer { vx, vy }) {
                    return vec![ServerMessage::error(ErrorCode::SteerRejected, e.to_string())];
                }
            }
            ClientCommand::Pause => self.paused = true,
            ClientCommand::Resume => self.paused = false,
            ClientCommand::Reset => {
                self.rig.reset();
                self.last = self.rig.start_idle();
                self.pending_roi = None;
                return self.snapshot();
            }
            ClientCommand::SetMode { mode } => self.rig.set_mode(mode),
            ClientCommand::Stop => self.stopped = true,
        }
        Vec::new()
    }

    /// Advances one loop step and returns its frame and telemetry, followed
    /// by a rejection notice if a requested roi could not be used.
    pub fn step(&mut self, looptime: f64) -> Vec<ServerMessage> {
        let roi = self.pending_roi.take();
        self.last = self.rig.advance(looptime, roi);
        let rejected = self.last.roi_rejected.take();
        let mut messages = self.snapshot();
        if let Some(e) = rejected {
            messages.push(ServerMessage::error(ErrorCode::RoiRejected, e.to_string()));
        }
        messages
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use pantrack_core::{ControlMode, TrajectorySpec};

    type Seen = (u64, String, Option<(i64, i64, i64, i64)>);

    fn telemetry(msgs: &[ServerMessage]) -> Seen {
        msgs.iter()
            .find_map(|m| match m {
                ServerMessage::Telemetry { seq, track, bbox, .. } => {
                    Some((*seq, track.clone(), bbox.map(|b| (b.x, b.y, b.w, b.h))))
                }
                _ => None,
            })
            .expect("telemetry present")
    }

    fn error_code(msgs: &[ServerMessage]) -> Option<ErrorCode> {
        msgs.iter().find_map(|m| match m {
            ServerMessage::Error { code, .. } => Some(*code),
            _ => None,
        })
    }

    #[test]
    fn frame_and_telemetry_share_seq() {
        let mut s = Session::new(ScenarioSpec::default()).unwrap();
        let first = s.snapshot();
        assert!(matches!(first[0], ServerMessage::Frame { seq: 1, .. }));
        assert_eq!(telemetry(&first).0, 1);
        for want in 2..6 {
            let msgs = s.step(1.0 / 15.0);
            assert!(matches!(msgs[0], ServerMessage::Frame { seq, .. } if seq == want));
            assert_eq!(telemetry(&msgs).0, want);
        }
    }

    #[test]
    fn roi_selection_on_target_and_background() {
        let mut s = Session::new(ScenarioSpec::default()).unwrap();
        s.handle(Inbound::Command(ClientCommand::SelectRoi { x: 5, y: 5, w: 40, h: 40 }));
        let msgs = s.step(1.0 / 15.0);
        assert_eq!(error_code(&msgs), Some(ErrorCode::RoiRejected));
        assert_eq!(telemetry(&msgs).1, "idle");

        let b = s.rig().ground_truth_roi().unwrap();
        s.handle(Inbound::Command(ClientCommand::SelectRoi { x: b.x, y: b.y, w: b.w, h: b.h }));
        let msgs = s.step(1.0 / 15.0);
        assert_eq!(error_code(&msgs), None);
        assert_eq!(telemetry(&msgs), (2, "ok".to_string(), Some((b.x, b.y, b.w, b.h))));
    }

    #[test]
    fn out_of_frame_roi_is_rejected() {
        let mut s = Session::new(ScenarioSpec::default()).unwrap();
        for (x, y, w, h) in [(990, 0, 20, 20), (-1, 0, 5, 5), (0, 0, 0, 5), (i64::MAX, 0, 10, 10)] {
            s.handle(Inbound::Command(ClientCommand::SelectRoi { x, y, w, h }));
            assert_eq!(error_code(&s.step(1.0 / 15.0)), Some(ErrorCode::RoiRejected));
        }
    }

    #[test]
    fn steer_needs_operator_trajectory() {
        let mut s = Session::new(ScenarioSpec::default()).unwrap();
        let reply = s.handle(Inbound::Command(ClientCommand::Steer { vx: 0.01, vy: 0.0 }));
        assert_eq!(error_code(&reply), Some(ErrorCode::SteerRejected));

        let spec = ScenarioSpec { trajectory: TrajectorySpec::OperatorDriven, ..Default::default() };
        let mut s = Session::new(spec).unwrap();
        assert!(s.handle(Inbound::Command(ClientCommand::Steer { vx: 0.01, vy: 0.0 })).is_empty());
        let x0 = s.rig().target().position[0];
        s.step(1.0 / 15.0);
        assert!((s.rig().target().position[0] - x0 - 0.01).abs() < 1e-12);
        let reply = s.handle(Inbound::Command(ClientCommand::Steer { vx: f64::NAN, vy: 0.0 }));
        assert_eq!(error_code(&reply), Some(ErrorCode::SteerRejected));
    }

    #[test]
    fn reset_returns_to_idle_start() {
        let mut s = Session::new(ScenarioSpec::default()).unwrap();
        let b = s.rig().ground_truth_roi().unwrap();
        s.handle(Inbound::Command(ClientCommand::SelectRoi { x: b.x, y: b.y, w: b.w, h: b.h }));
        assert_eq!(telemetry(&s.step(1.0 / 15.0)).1, "ok");
        let msgs = s.handle(Inbound::Command(ClientCommand::Reset));
        let (seq, track, bbox) = telemetry(&msgs);
        assert_eq!((seq, track.as_str(), bbox), (2, "idle", None));
        assert!(s.rig().tracker().is_none());
    }

    #[test]
    fn control_flags() {
        let mut s = Session::new(ScenarioSpec::default()).unwrap();
        s.handle(Inbound::Command(ClientCommand::Pause));
        assert!(s.is_paused());
        s.handle(Inbound::Command(ClientCommand::Resume));
        assert!(!s.is_paused());
        s.handle(Inbound::Command(ClientCommand::SetMode { mode: ControlMode::Faithful }));
        assert_eq!(s.rig().mode(), ControlMode::Faithful);
        let reply = s.handle(Inbound::Malformed("nope".into()));
        assert_eq!(error_code(&reply), Some(ErrorCode::BadMessage));
        s.handle(Inbound::Command(ClientCommand::Stop));
        assert!(s.is_stopped());
    }
}
