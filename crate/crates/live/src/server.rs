//! HTTP and websocket endpoints around the tick loop.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{mpsc, Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use axum::body::Bytes;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::{Html, IntoResponse, Response};
use axum::routing::get;
use axum::Router;
use futures_util::{SinkExt, StreamExt};
use tokio::net::TcpListener;
use tokio::sync::broadcast;
use tokio::sync::mpsc as tokio_mpsc;

use crate::protocol::{error_json, ClientMessage};
use crate::sim::{LiveConfig, LogEntry, Simulation};
use crate::LiveError;

const VIEWER: &str = include_str!("viewer.html");

/// A client message on its way to the tick loop, with a channel for errors.
struct Inbound {
    text: String,
    reply: tokio_mpsc::UnboundedSender<String>,
}

#[derive(Clone)]
struct App {
    inbound: mpsc::Sender<Inbound>,
    packets: broadcast::Sender<Bytes>,
    assets: Option<PathBuf>,
}

/// A bound but not yet running server.
pub struct Server {
    listener: TcpListener,
    sim: Simulation,
    tick: Duration,
    assets: Option<PathBuf>,
}

/// Handle to a server running on the current tokio runtime.
pub struct ServerHandle {
    pub addr: SocketAddr,
    log: Arc<Mutex<Vec<LogEntry>>>,
    stop: Arc<AtomicBool>,
    task: tokio::task::JoinHandle<()>,
}

impl ServerHandle {
    /// Every client message received so far, tagged with the tick it was applied before.
    pub fn message_log(&self) -> Vec<LogEntry> {
        self.log.lock().unwrap().clone()
    }

    pub fn shutdown(self) {
        self.stop.store(true, Ordering::Relaxed);
        self.task.abort();
    }
}

/// Binds the listener, failing early when the port is taken.
pub async fn bind(cfg: LiveConfig, addr: SocketAddr) -> Result<Server, LiveError> {
    let sim = Simulation::new(cfg)?;
    let tick = Duration::from_secs_f64(1.0 / sim.config().tick_hz);
    let listener = TcpListener::bind(addr)
        .await
        .map_err(|source| LiveError::Bind { addr, source })?;
    Ok(Server {
        listener,
        sim,
        tick,
        assets: None,
    })
}

/// Binds and serves until the process is stopped.
pub async fn serve(
    cfg: LiveConfig,
    addr: SocketAddr,
    assets: Option<PathBuf>,
) -> Result<(), LiveError> {
    bind(cfg, addr).await?.with_assets(assets).run().await
}

impl Server {
    /// Directory holding a built viewer; `GET /` serves its `index.html`.
    pub fn with_assets(self, assets: Option<PathBuf>) -> Self {
        Self { assets, ..self }
    }

    pub fn local_addr(&self) -> Result<SocketAddr, LiveError> {
        Ok(self.listener.local_addr()?)
    }

    pub async fn run(self) -> Result<(), LiveError> {
        let stop = Arc::new(AtomicBool::new(false));
        let log = Arc::new(Mutex::new(Vec::new()));
        let ((app, listener), _) = self.start(stop, log);
        Ok(axum::serve(listener, app).await?)
    }

    /// Runs in the background; used by tests and embedders.
    pub fn spawn(self) -> Result<ServerHandle, LiveError> {
        let addr = self.local_addr()?;
        let stop = Arc::new(AtomicBool::new(false));
        let log = Arc::new(Mutex::new(Vec::new()));
        let ((app, listener), _) = self.start(stop.clone(), log.clone());
        let task = tokio::spawn(async move {
            if let Err(e) = axum::serve(listener, app).await {
                log::error!("server stopped: {e}");
            }
        });
        Ok(ServerHandle {
            addr,
            log,
            stop,
            task,
        })
    }

    fn start(
        self,
        stop: Arc<AtomicBool>,
        log: Arc<Mutex<Vec<LogEntry>>>,
    ) -> ((Router, TcpListener), thread::JoinHandle<()>) {
        let (packets, _) = broadcast::channel(64);
        let (inbound, rx) = mpsc::channel();
        let loop_packets = packets.clone();
        let (sim, tick) = (self.sim, self.tick);
        let worker = thread::spawn(move || tick_loop(sim, tick, rx, loop_packets, stop, log));
        let app = App {
            inbound,
            packets,
            assets: self.assets,
        };
        let router = Router::new()
            .route("/", get(index))
            .route("/healthz", get(|| async { "ok" }))
            .route("/stream", get(stream))
            .with_state(app);
        ((router, self.listener), worker)
    }
}

/// Owns the simulation. Messages are applied in arrival order right before
/// the tick they precede; nothing else mutates pipeline state.
fn tick_loop(
    mut sim: Simulation,
    period: Duration,
    rx: mpsc::Receiver<Inbound>,
    packets: broadcast::Sender<Bytes>,
    stop: Arc<AtomicBool>,
    log: Arc<Mutex<Vec<LogEntry>>>,
) {
    let mut deadline = Instant::now();
    while !stop.load(Ordering::Relaxed) {
        let now = Instant::now();
        if deadline > now {
            thread::sleep(deadline - now);
        }
        deadline = deadline.max(now) + period;
        loop {
            match rx.try_recv() {
                Ok(msg) => {
                    log.lock().unwrap().push(LogEntry {
                        tick: sim.tick(),
                        text: msg.text.clone(),
                    });
                    let applied = ClientMessage::parse(&msg.text).and_then(|m| sim.apply(&m));
                    if let Err(detail) = applied {
                        let _ = msg.reply.send(error_json(&detail));
                    }
                }
                Err(mpsc::TryRecvError::Empty) => break,
                Err(mpsc::TryRecvError::Disconnected) => return,
            }
        }
        match sim.step() {
            // no receivers is fine; packets are simply dropped
            Ok(packet) => {
                let _ = packets.send(Bytes::from(packet.encode()));
            }
            Err(e) => {
                log::error!("tick {} failed: {e}", sim.tick());
                return;
            }
        }
    }
}

async fn index(State(app): State<App>) -> Response {
    if let Some(dir) = &app.assets {
        match tokio::fs::read_to_string(dir.join("index.html")).await {
            Ok(page) => return Html(page).into_response(),
            Err(e) => log::warn!("viewer assets unavailable, serving built-in page: {e}"),
        }
    }
    Html(VIEWER).into_response()
}

async fn stream(ws: WebSocketUpgrade, State(app): State<App>) -> Response {
    ws.on_upgrade(move |socket| client(socket, app))
}

async fn client(socket: WebSocket, app: App) {
    let (mut sink, mut incoming) = socket.split();
    let mut packets = app.packets.subscribe();
    let (reply, mut errors) = tokio_mpsc::unbounded_channel::<String>();
    loop {
        let outgoing = tokio::select! {
            p = packets.recv() => match p {
                Ok(bytes) => Message::Binary(bytes),
                Err(broadcast::error::RecvError::Lagged(n)) => {
                    log::warn!("client lagged by {n} packets");
                    continue;
                }
                Err(broadcast::error::RecvError::Closed) => break,
            },
            Some(detail) = errors.recv() => Message::Text(detail.into()),
            m = incoming.next() => match m {
                Some(Ok(Message::Text(text))) => {
                    // reject malformed messages here so the tick loop only sees JSON
                    match ClientMessage::parse(text.as_str()) {
                        Ok(_) => {
                            let msg = Inbound { text: text.to_string(), reply: reply.clone() };
                            if app.inbound.send(msg).is_err() {
                                break;
                            }
                            continue;
                        }
                        Err(detail) => Message::Text(error_json(&detail).into()),
                    }
                }
                Some(Ok(Message::Binary(_))) => Message::Text(error_json("expected a text message").into()),
                Some(Ok(Message::Close(_))) | Some(Err(_)) | None => break,
                Some(Ok(_)) => continue,
            },
        };
        if sink.send(outgoing).await.is_err() {
            break;
        }
    }
}
