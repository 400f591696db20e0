//! TCP ingest plus the HTTP/WebSocket client API.
//!
//! Per connection: a reader decodes frames into a bounded queue, a processor
//! classifies and persists them in order and queues acks, and a writer sends
//! the hello and the acks. A frame that finds the queue full is answered with
//! an overflow ack instead of being processed.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::{broadcast, mpsc, oneshot, watch};
use tokio::task::JoinSet;

use super::debounce::DEFAULT_DEBOUNCE_K;
use super::pipeline::{SessionPipeline, DEFAULT_PPG_FS_HZ};
use super::session::{LabelMark, SessionRecord, Window};
use super::store::{IndexEntry, SessionStore};
use super::wire::{decode_frame, encode_hello, Ack, AckStatus, WireError, WireFrame};
use crate::classify::TrainedModel;
use crate::error::{Error, Result};
use crate::export::ModelArtifact;
use crate::posture::{PostureLabel, N_SENSORS};
use crate::sensemodel::CushionLayout;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub ingest_addr: String,
    pub http_addr: String,
    pub model_path: PathBuf,
    pub storage_dir: PathBuf,
    pub debounce_k: usize,
    pub ppg_fs_hz: f64,
    /// Decoded frames waiting for the processor, per connection.
    pub queue_capacity: usize,
    /// Sensor layout table served on `/layout`; the default layout if unset.
    pub layout_path: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            ingest_addr: "127.0.0.1:7878".into(),
            http_addr: "127.0.0.1:8080".into(),
            model_path: PathBuf::from("model.scm"),
            storage_dir: PathBuf::from("sessions"),
            debounce_k: DEFAULT_DEBOUNCE_K,
            ppg_fs_hz: DEFAULT_PPG_FS_HZ,
            queue_capacity: 1024,
            layout_path: None,
        }
    }
}

impl ServiceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.debounce_k == 0 {
            return Err(Error::InvalidConfig("debounce_k must be at least 1".into()));
        }
        if self.queue_capacity == 0 {
            return Err(Error::InvalidConfig("queue_capacity must be at least 1".into()));
        }
        if !(self.ppg_fs_hz.is_finite() && self.ppg_fs_hz > 0.0) {
            return Err(Error::InvalidConfig(format!("ppg_fs_hz {} must be positive", self.ppg_fs_hz)));
        }
        Ok(())
    }
}

/// Latest state of one session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiveSnapshot {
    pub t: u64,
    pub posture: PostureLabel,
    pub conf: f64,
    pub bpm: Option<f64>,
    pub counts: [u16; N_SENSORS],
    pub manual: Option<PostureLabel>,
    pub n_frames: usize,
}

/// One message on `/live`, sent for every processed frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiveEvent {
    pub t: u64,
    pub posture: PostureLabel,
    pub conf: f64,
    pub bpm: Option<f64>,
    pub session: String,
    pub counts: [u16; N_SENSORS],
    /// True when the debounced posture changed on this frame.
    pub change: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub id: String,
    pub open: bool,
    pub start_ms: Option<u64>,
    pub end_ms: Option<u64>,
    pub n_frames: usize,
    pub last: Option<LiveSnapshot>,
    pub labels: Vec<LabelMark>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub model_kind: String,
    pub model_checksum: String,
    pub open_sessions: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelRequest {
    pub label: Option<PostureLabel>,
    /// Client-side timestamp; defaults to the session's latest frame time.
    #[serde(default)]
    pub t: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelConfirmation {
    pub session: String,
    pub t: u64,
    pub label: Option<PostureLabel>,
}

/// Work for the processor, in arrival order.
enum Item {
    Frame(WireFrame),
    /// A frame the reader refused; acked in sequence with the others.
    Reject(Ack),
}

struct LabelCommand {
    req: LabelRequest,
    reply: oneshot::Sender<Result<LabelMark>>,
}

struct LiveSession {
    open: bool,
    last: Option<LiveSnapshot>,
    labels: Vec<LabelMark>,
    commands: mpsc::UnboundedSender<LabelCommand>,
}

struct AppState {
    config: ServiceConfig,
    model: Arc<TrainedModel>,
    checksum: String,
    layout: CushionLayout,
    store: SessionStore,
    live: Mutex<BTreeMap<String, LiveSession>>,
    events: broadcast::Sender<Arc<str>>,
    closed: watch::Sender<usize>,
}

pub struct ServiceHandle {
    pub ingest_addr: SocketAddr,
    pub http_addr: SocketAddr,
    pub model_checksum: String,
    state: Arc<AppState>,
    shutdown: watch::Sender<bool>,
    ingest: tokio::task::JoinHandle<()>,
    http: tokio::task::JoinHandle<std::io::Result<()>>,
}

impl ServiceHandle {
    pub fn live(&self, session: &str) -> Option<LiveSnapshot> {
        self.state.live.lock().unwrap().get(session).and_then(|s| s.last.clone())
    }

    /// Number of sessions closed and persisted so far.
    pub fn closed_sessions(&self) -> watch::Receiver<usize> {
        self.state.closed.subscribe()
    }

    pub fn store(&self) -> &SessionStore {
        &self.state.store
    }

    /// Stops accepting, lets every connection finish the frames it has
    /// already queued, persists the sessions and stops the HTTP server.
    pub async fn shutdown(self) -> Result<()> {
        let _ = self.shutdown.send(true);
        self.ingest.await.map_err(|e| Error::Io(std::io::Error::other(e)))?;
        self.http.await.map_err(|e| Error::Io(std::io::Error::other(e)))??;
        Ok(())
    }
}

pub async fn serve(config: ServiceConfig) -> Result<ServiceHandle> {
    config.validate()?;
    let artifact = ModelArtifact::read_binary(&config.model_path)?;
    let model = Arc::new(crate::export::load_model(&artifact)?);
    super::debounce::check_model(&model)?;
    let layout = match &config.layout_path {
        Some(p) => CushionLayout::parse(&std::fs::read_to_string(p)?)?,
        None => CushionLayout::default(),
    };
    let store = SessionStore::open(&config.storage_dir)?;
    let ingest_listener = TcpListener::bind(&config.ingest_addr).await?;
    let http_listener = TcpListener::bind(&config.http_addr).await?;
    let ingest_addr = ingest_listener.local_addr()?;
    let http_addr = http_listener.local_addr()?;

    let (events, _) = broadcast::channel(4096);
    let state = Arc::new(AppState {
        config,
        model,
        checksum: artifact.checksum_hex(),
        layout,
        store,
        live: Mutex::new(BTreeMap::new()),
        events,
        closed: watch::channel(0).0,
    });
    let (shutdown, shutdown_rx) = watch::channel(false);

    let ingest = tokio::spawn(accept_loop(ingest_listener, state.clone(), shutdown_rx.clone()));
    let app = Router::new()
        .route("/health", get(health))
        .route("/sessions", get(sessions))
        .route("/sessions/{id}/stats", get(stats))
        .route("/sessions/{id}/label", post(label))
        .route("/layout", get(layout_handler))
        .route("/live", get(live_ws))
        .with_state(LiveCtx { state: state.clone(), shutdown: shutdown_rx.clone() });
    let mut rx = shutdown_rx;
    let http = tokio::spawn(async move {
        axum::serve(http_listener, app)
            .with_graceful_shutdown(async move {
                stopped(&mut rx).await;
            })
            .await
    });
    log::info!("ingest on {ingest_addr}, api on {http_addr}");
    Ok(ServiceHandle { ingest_addr, http_addr, model_checksum: state.checksum.clone(), state, shutdown, ingest, http })
}

async fn stopped(rx: &mut watch::Receiver<bool>) {
    loop {
        if *rx.borrow_and_update() {
            return;
        }
        if rx.changed().await.is_err() {
            return;
        }
    }
}

async fn accept_loop(listener: TcpListener, state: Arc<AppState>, shutdown: watch::Receiver<bool>) {
    let mut conns = JoinSet::new();
    let mut stop = shutdown.clone();
    loop {
        tokio::select! {
            _ = stopped(&mut stop) => break,
            accepted = listener.accept() => match accepted {
                Ok((sock, peer)) => {
                    let state = state.clone();
                    let shutdown = shutdown.clone();
                    conns.spawn(async move {
                        if let Err(e) = handle_connection(sock, state, shutdown).await {
                            log::warn!("ingest connection {peer}: {e}");
                        }
                    });
                }
                Err(e) => log::warn!("accept failed: {e}"),
            },
            Some(_) = conns.join_next(), if !conns.is_empty() => {}
        }
    }
    drop(listener);
    while conns.join_next().await.is_some() {}
}

async fn handle_connection(sock: TcpStream, state: Arc<AppState>, shutdown: watch::Receiver<bool>) -> Result<()> {
    sock.set_nodelay(true)?;
    let writer = state.store.create()?;
    let id = writer.id().to_string();
    let pipeline = SessionPipeline::new(state.model.clone(), state.config.debounce_k, state.config.ppg_fs_hz)?;
    let (cmd_tx, cmd_rx) = mpsc::unbounded_channel();
    state.live.lock().unwrap().insert(
        id.clone(),
        LiveSession { open: true, last: None, labels: Vec::new(), commands: cmd_tx },
    );
    log::info!("session {id} opened");

    let (mut rd, mut wr) = sock.into_split();
    let (ack_tx, mut ack_rx) = mpsc::unbounded_channel::<Ack>();
    let (frame_tx, frame_rx) = mpsc::channel::<Item>(state.config.queue_capacity);

    let hello = encode_hello(&id);
    let write_task = tokio::spawn(async move {
        wr.write_all(&hello).await?;
        while let Some(a) = ack_rx.recv().await {
            wr.write_all(&a.encode()).await?;
        }
        wr.shutdown().await
    });
    let process_task = tokio::spawn(process_session(state.clone(), id.clone(), writer, pipeline, frame_rx, cmd_rx, ack_tx.clone()));

    let read_result = read_frames(&mut rd, frame_tx, &ack_tx, shutdown).await;
    drop(ack_tx);
    let process_result = process_task.await.map_err(|e| Error::Io(std::io::Error::other(e)))?;
    if let Err(e) = write_task.await.map_err(|e| Error::Io(std::io::Error::other(e)))? {
        log::debug!("session {id}: ack writer: {e}");
    }
    read_result.and(process_result)
}

async fn read_frames(
    rd: &mut tokio::net::tcp::OwnedReadHalf,
    frames: mpsc::Sender<Item>,
    acks: &mpsc::UnboundedSender<Ack>,
    mut shutdown: watch::Receiver<bool>,
) -> Result<()> {
    let mut buf: Vec<u8> = Vec::with_capacity(64 * 1024);
    let mut chunk = vec![0u8; 16 * 1024];
    loop {
        let n = tokio::select! {
            _ = stopped(&mut shutdown) => return Ok(()),
            n = rd.read(&mut chunk) => n?,
        };
        if n == 0 {
            return Ok(());
        }
        buf.extend_from_slice(&chunk[..n]);
        let mut at = 0;
        loop {
            match decode_frame(&buf[at..]) {
                Ok((f, used)) => {
                    at += used;
                    let ts = f.timestamp_ms;
                    match frames.try_send(Item::Frame(f)) {
                        Ok(()) => {}
                        Err(mpsc::error::TrySendError::Full(_)) => {
                            log::warn!("queue full, frame {ts} rejected");
                            let _ = acks.send(Ack { status: AckStatus::Overflow, label: None, timestamp_ms: ts });
                        }
                        Err(mpsc::error::TrySendError::Closed(_)) => return Ok(()),
                    }
                }
                Err(WireError::Incomplete { .. }) => break,
                Err(WireError::Range { timestamp_ms, frame_len, .. }) => {
                    at += frame_len;
                    let ack = Ack { status: AckStatus::Range, label: None, timestamp_ms };
                    if frames.send(Item::Reject(ack)).await.is_err() {
                        return Ok(());
                    }
                }
                Err(e @ WireError::Framing { .. }) => {
                    let _ = frames.send(Item::Reject(Ack { status: AckStatus::Framing, label: None, timestamp_ms: 0 })).await;
                    return Err(Error::InvalidInput(e.to_string()));
                }
            }
        }
        buf.drain(..at);
    }
}

async fn process_session(
    state: Arc<AppState>,
    id: String,
    mut writer: super::store::SessionWriter,
    mut pipeline: SessionPipeline,
    mut frames: mpsc::Receiver<Item>,
    mut commands: mpsc::UnboundedReceiver<LabelCommand>,
    acks: mpsc::UnboundedSender<Ack>,
) -> Result<()> {
    let mut record = SessionRecord::new(id.clone());
    let result: Result<()> = async {
        loop {
            tokio::select! {
                biased;
                Some(cmd) = commands.recv() => {
                    let t = cmd.req.t.or(record.frames.last().map(|f| f.t)).unwrap_or(0);
                    let mark = LabelMark { t, label: cmd.req.label };
                    let r = writer.append_label(&mark).map(|_| mark);
                    if r.is_ok() {
                        pipeline.set_manual_label(mark.label);
                        record.labels.push(mark);
                        if let Some(s) = state.live.lock().unwrap().get_mut(&id) {
                            s.labels.push(mark);
                        }
                    }
                    let _ = cmd.reply.send(r);
                }
                f = frames.recv() => {
                    let f = match f {
                        None => break,
                        Some(Item::Reject(ack)) => {
                            let _ = acks.send(ack);
                            continue;
                        }
                        Some(Item::Frame(f)) => f,
                    };
                    let (frame, change) = match pipeline.process(&f) {
                        Ok(x) => x,
                        Err(_) => {
                            let _ = acks.send(Ack { status: AckStatus::Range, label: None, timestamp_ms: f.timestamp_ms });
                            continue;
                        }
                    };
                    writer.append_frame(&frame)?;
                    let ev = LiveEvent {
                        t: frame.t,
                        posture: frame.posture,
                        conf: frame.conf,
                        bpm: frame.bpm,
                        session: id.clone(),
                        counts: frame.counts,
                        change,
                    };
                    let snap = LiveSnapshot {
                        t: frame.t,
                        posture: frame.posture,
                        conf: frame.conf,
                        bpm: frame.bpm,
                        counts: frame.counts,
                        manual: frame.manual,
                        n_frames: record.frames.len() + 1,
                    };
                    let label = frame.posture;
                    record.push_frame(frame)?;
                    if let Some(s) = state.live.lock().unwrap().get_mut(&id) {
                        s.last = Some(snap);
                    }
                    if let Ok(text) = serde_json::to_string(&ev) {
                        let _ = state.events.send(text.into());
                    }
                    let _ = acks.send(Ack { status: AckStatus::Ok, label: Some(label), timestamp_ms: f.timestamp_ms });
                }
            }
        }
        Ok(())
    }
    .await;

    record.closed = true;
    let persisted = state.store.persist_session(&record);
    if let Some(s) = state.live.lock().unwrap().get_mut(&id) {
        s.open = false;
    }
    state.closed.send_modify(|n| *n += 1);
    log::info!("session {id} closed with {} frames", record.frames.len());
    result.and(persisted.map(|_| ()))
}

#[derive(Clone)]
struct LiveCtx {
    state: Arc<AppState>,
    shutdown: watch::Receiver<bool>,
}

struct ApiError(Error);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match &self.0 {
            Error::NotFound(_) => StatusCode::NOT_FOUND,
            Error::InvalidInput(_) => StatusCode::CONFLICT,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (status, Json(serde_json::json!({ "error": self.0.to_string() }))).into_response()
    }
}

async fn health(State(ctx): State<LiveCtx>) -> Json<Health> {
    let open_sessions = ctx.state.live.lock().unwrap().values().filter(|s| s.open).count();
    Json(Health {
        status: "ok".into(),
        model_kind: ctx.state.model.kind().name().into(),
        model_checksum: ctx.state.checksum.clone(),
        open_sessions,
    })
}

async fn sessions(State(ctx): State<LiveCtx>) -> Json<Vec<SessionSummary>> {
    let index: Vec<IndexEntry> = ctx.state.store.list();
    let live = ctx.state.live.lock().unwrap();
    let out = index
        .into_iter()
        .map(|e| {
            let l = live.get(&e.id);
            let open = l.is_some_and(|l| l.open);
            let last = l.and_then(|l| l.last.clone());
            let (start_ms, n_frames) = match (&last, open) {
                (Some(s), true) => (e.start_ms.or(Some(s.t)), s.n_frames),
                _ => (e.start_ms, e.n_frames),
            };
            SessionSummary {
                id: e.id,
                open,
                start_ms,
                end_ms: if open { None } else { e.end_ms },
                n_frames,
                last,
                labels: l.map(|l| l.labels.clone()).unwrap_or_default(),
            }
        })
        .collect();
    Json(out)
}

#[derive(Debug, Deserialize)]
struct StatsQuery {
    from: Option<u64>,
    to: Option<u64>,
}

async fn stats(
    State(ctx): State<LiveCtx>,
    Path(id): Path<String>,
    Query(q): Query<StatsQuery>,
) -> Result<Json<super::session::PostureStats>, ApiError> {
    let rec = ctx.state.store.load_session(&id).map_err(ApiError)?;
    Ok(Json(rec.stats(Window { from: q.from, to: q.to })))
}

async fn label(
    State(ctx): State<LiveCtx>,
    Path(id): Path<String>,
    Json(req): Json<LabelRequest>,
) -> Result<Json<LabelConfirmation>, ApiError> {
    let (tx, rx) = oneshot::channel();
    {
        let live = ctx.state.live.lock().unwrap();
        let s = live.get(&id).ok_or_else(|| ApiError(Error::NotFound(id.clone())))?;
        if !s.open || s.commands.send(LabelCommand { req, reply: tx }).is_err() {
            return Err(ApiError(Error::InvalidInput(format!("session {id} is closed"))));
        }
    }
    let mark = rx
        .await
        .map_err(|_| ApiError(Error::InvalidInput(format!("session {id} closed before the label was stored"))))?
        .map_err(ApiError)?;
    Ok(Json(LabelConfirmation { session: id, t: mark.t, label: mark.label }))
}

async fn layout_handler(State(ctx): State<LiveCtx>) -> Json<CushionLayout> {
    Json(ctx.state.layout.clone())
}

async fn live_ws(State(ctx): State<LiveCtx>, ws: WebSocketUpgrade) -> Response {
    let rx = ctx.state.events.subscribe();
    ws.on_upgrade(move |socket| stream_events(socket, rx, ctx.shutdown))
}

async fn stream_events(mut socket: WebSocket, mut rx: broadcast::Receiver<Arc<str>>, mut shutdown: watch::Receiver<bool>) {
    loop {
        tokio::select! {
            _ = stopped(&mut shutdown) => break,
            msg = socket.recv() => match msg {
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => return,
                Some(Ok(_)) => {}
            },
            ev = rx.recv() => match ev {
                Ok(text) => {
                    if socket.send(Message::Text(text.as_ref().into())).await.is_err() {
                        return;
                    }
                }
                Err(broadcast::error::RecvError::Lagged(n)) => log::warn!("live client lagged by {n} events"),
                Err(broadcast::error::RecvError::Closed) => break,
            },
        }
    }
    let _ = socket.send(Message::Close(None)).await;
}
