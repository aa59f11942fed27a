//! WebSocket transport. Each connection gets a fresh [`Session`] advanced by
//! a dedicated owner thread; the connection task only moves messages.
//!
//! ```text
//! socket reader --Inbound--> owner thread (paced loop) --ServerMessage--> socket writer
//! ```
//!
//! The inbound queue is the only hand-off into the loop, and the owner drains
//! it between steps, so commands take effect in order and never mid-step.

use std::net::SocketAddr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{mpsc, Arc};
use std::time::{Duration, Instant};

use futures_util::{SinkExt, StreamExt};
use pantrack_core::{ScenarioError, ScenarioSpec};
use thiserror::Error;
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::{mpsc as tmpsc, watch};
use tokio_tungstenite::tungstenite::Message;
use tracing::{info, warn};

use crate::protocol::{ClientCommand, ErrorCode, ServerMessage};
use crate::session::{Inbound, Session};

/// Frames go out at this rate while paused.
pub const KEEPALIVE_PERIOD: Duration = Duration::from_secs(1);

/// Outbound messages buffered ahead of a slow client before the loop waits.
const OUTBOUND_DEPTH: usize = 8;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("network error: {0}")]
    Io(#[from] std::io::Error),
}

/// Accepts clients on `listener` one at a time until a client sends `stop`.
/// A second client while one is connected is told `busy` and dropped.
pub async fn serve(listener: TcpListener, spec: ScenarioSpec) -> Result<(), ServiceError> {
    // Fail before accepting anyone if the scenario cannot run.
    Session::new(spec.clone())?;
    let busy = Arc::new(AtomicBool::new(false));
    let (stop_tx, mut stop_rx) = watch::channel(false);
    loop {
        tokio::select! {
            accepted = listener.accept() => {
                let (stream, peer) = match accepted {
                    Ok(conn) => conn,
                    Err(e) => {
                        warn!("accept failed: {e}");
                        continue;
                    }
                };
                if busy.swap(true, Ordering::SeqCst) {
                    tokio::spawn(refuse(stream, peer));
                    continue;
                }
                let (spec, busy, stop_tx) = (spec.clone(), busy.clone(), stop_tx.clone());
                tokio::spawn(async move {
                    let stopped = run_client(stream, peer, spec).await;
                    busy.store(false, Ordering::SeqCst);
                    if stopped {
                        let _ = stop_tx.send(true);
                    }
                });
            }
            _ = stop_rx.changed() => return Ok(()),
        }
    }
}

async fn refuse(stream: TcpStream, peer: SocketAddr) {
    info!(%peer, "refused connection: session busy");
    if let Ok(mut ws) = tokio_tungstenite::accept_async(stream).await {
        let msg = ServerMessage::error(ErrorCode::Busy, "another client is connected");
        let _ = ws.send(Message::text(msg.to_json())).await;
        let _ = ws.close(None).await;
    }
}

/// Serves one client. Returns whether the client asked to stop the server.
async fn run_client(stream: TcpStream, peer: SocketAddr, spec: ScenarioSpec) -> bool {
    let ws = match tokio_tungstenite::accept_async(stream).await {
        Ok(ws) => ws,
        Err(e) => {
            warn!(%peer, "handshake failed: {e}");
            return false;
        }
    };
    info!(%peer, "client connected");
    let session = Session::new(spec).expect("scenario validated before serving");
    let (mut sink, mut source) = ws.split();
    let (in_tx, in_rx) = mpsc::channel();
    let (out_tx, mut out_rx) = tmpsc::channel(OUTBOUND_DEPTH);
    let owner = std::thread::spawn(move || run_owner(session, in_rx, out_tx));

    let reader = async move {
        while let Some(msg) = source.next().await {
            let inbound = match msg {
                Ok(Message::Text(text)) => match ClientCommand::parse(text.as_str()) {
                    Ok(cmd) => Inbound::Command(cmd),
                    Err(e) => Inbound::Malformed(format!("cannot parse command: {e}")),
                },
                Ok(Message::Binary(_)) => Inbound::Malformed("commands are JSON text messages".into()),
                Ok(Message::Close(_)) | Err(_) => break,
                Ok(_) => continue,
            };
            if in_tx.send(inbound).is_err() {
                break;
            }
        }
        // Dropping the sender tells the owner the client has gone.
    };
    let writer = async {
        while let Some(msg) = out_rx.recv().await {
            if sink.send(Message::text(msg.to_json())).await.is_err() {
                return;
            }
        }
        // Owner finished (stop): close politely.
        let _ = sink.close().await;
    };
    tokio::select! {
        _ = reader => {}
        _ = writer => {}
    }
    drop(out_rx);
    let stopped = tokio::task::spawn_blocking(move || owner.join().unwrap_or(false)).await.unwrap_or(false);
    info!(%peer, stopped, "client disconnected");
    stopped
}

/// The paced loop. Returns true if it ended on a `stop` command, false if
/// the client went away.
fn run_owner(mut session: Session, inbox: mpsc::Receiver<Inbound>, out: tmpsc::Sender<ServerMessage>) -> bool {
    let send_all = |msgs: Vec<ServerMessage>| msgs.into_iter().all(|m| out.blocking_send(m).is_ok());
    let period = Duration::from_secs_f64(1.0 / session.rig().spec().loop_hz);

    let hello = session.hello();
    if !send_all(vec![hello]) || !send_all(session.snapshot()) {
        return false;
    }
    let mut last = Instant::now();
    let mut next = last + period;
    let mut keepalive = last + KEEPALIVE_PERIOD;
    loop {
        if session.is_paused() {
            match inbox.recv_timeout(keepalive.saturating_duration_since(Instant::now())) {
                Ok(inbound) => {
                    if !send_all(session.handle(inbound)) {
                        return false;
                    }
                }
                Err(mpsc::RecvTimeoutError::Timeout) => {
                    keepalive += KEEPALIVE_PERIOD;
                    if !send_all(session.snapshot()) {
                        return false;
                    }
                }
                Err(mpsc::RecvTimeoutError::Disconnected) => return false,
            }
            if session.is_stopped() {
                return true;
            }
            if !session.is_paused() {
                // Do not count the pause as loop time.
                last = Instant::now();
                next = last + period;
            }
            continue;
        }

        let now = Instant::now();
        if next > now {
            std::thread::sleep(next - now);
        }

        // Step boundary: apply everything queued since the last step.
        loop {
            match inbox.try_recv() {
                Ok(inbound) => {
                    if !send_all(session.handle(inbound)) {
                        return false;
                    }
                }
                Err(mpsc::TryRecvError::Empty) => break,
                Err(mpsc::TryRecvError::Disconnected) => return false,
            }
        }
        if session.is_stopped() {
            return true;
        }
        if session.is_paused() {
            keepalive = Instant::now() + KEEPALIVE_PERIOD;
            continue;
        }

        let now = Instant::now();
        let looptime = now.duration_since(last).as_secs_f64();
        last = now;
        if !send_all(session.step(looptime)) {
            return false;
        }
        next += period;
        let now = Instant::now();
        if next < now {
            // Running behind: do not try to catch up with a burst.
            next = now;
        }
    }
}
