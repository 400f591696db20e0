//! Physical sensing path of the cushion: sensor geometry, per-posture force
//! signatures, the FSR voltage divider and ADC, and synthetic labeled streams.

mod fsr;
mod layout;
mod session;
mod signature;

pub use fsr::{counts_to_force, fsr_adc, FsrDividerConfig};
pub use layout::{CushionLayout, PELVIC_SENSORS, REAR_SENSORS};
pub use session::{collection_schedule, synth_session, synth_session_with, SensorFrame, SessionOptions};
pub use signature::{gen_posture_pressure, PostureSignature, SignatureTable};

/// Lightest subject the force model accepts.
pub const MIN_SUBJECT_MASS_KG: f64 = 30.0;
/// Heaviest subject: ten sensors at their 10 kg range.
pub const MAX_SUBJECT_MASS_KG: f64 = 100.0;
