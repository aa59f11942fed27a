//! Live operator service for the pan-tilt rig.
//!
//! A client connects over WebSocket, receives `hello`, then a frame and a
//! telemetry message per loop step (same `seq`), and steers the run with
//! JSON commands. See [`protocol`] for the message shapes.

pub mod protocol;
pub mod server;
pub mod session;

pub use protocol::{ClientCommand, ErrorCode, ServerMessage, PROTO_VERSION};
pub use server::{serve, ServiceError};
pub use session::{Inbound, Session};
