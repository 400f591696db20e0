//! Live monitoring: the ingest wire format, per-session classification with
//! debouncing and heart-rate tracking, session storage and statistics, and
//! the network service.

mod debounce;
mod pipeline;
mod replay;
mod service;
mod session;
mod store;
mod wire;

pub use debounce::{check_model, classify_stream, Debounced, Debouncer, PostureEvent, DEFAULT_DEBOUNCE_K};
pub use pipeline::{PpgTracker, SessionPipeline, DEFAULT_PPG_FS_HZ};
pub use replay::{
    decode_stream, encode_stream, http_request, read_stream_file, replay, wire_frames, write_stream_file,
    ReplayReport,
};
pub use service::{
    serve, Health, LabelConfirmation, LabelRequest, LiveEvent, LiveSnapshot, ServiceConfig, ServiceHandle, SessionSummary,
};
pub use session::{
    posture_stats, ClassifiedFrame, LabelMark, PostureStat, PostureStats, SessionRecord, Window, DEFAULT_FRAME_PERIOD_MS,
};
pub use store::{write_atomic, IndexEntry, SessionStore, SessionWriter};
pub use wire::{
    decode_frame, encode_frame, encode_frame_into, encode_hello, frame_len, ppg_from_wire, ppg_to_wire, Ack, AckStatus,
    WireError, WireFrame, ACK_LEN, FRAME_HEADER_LEN, FRAME_MAGIC, HELLO_MAGIC, MAX_COUNT, PPG_LSB_V, WIRE_VERSION,
};
