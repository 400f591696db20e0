//! Digital counterpart of the wrist PPG front end (TIA, DC removal and gain,
//! band-pass, 15 Hz low-pass and programmable gain), a pulse synthesizer,
//! beat detection, heart-rate estimation and method-agreement statistics.

mod agreement;
mod chain;
mod filter;
mod peaks;
mod rate;
mod synth;
mod trace;
mod validate;

pub use agreement::{bland_altman, pearson, AgreementReport};
pub use chain::{process_chain, select_pga, Bands, ChainConfig, ChainStages, Gains, PgaGain, StageSample, StreamingChain};
pub use filter::{tone_amplitude, Biquad, BiquadState};
pub use peaks::{detect_peaks, detect_peaks_with, DetectorConfig};
pub use rate::{heart_rate, hold_at, HrPoint};
pub use synth::{pulse_variance, synth_ppg, HrProfile, NoiseSpec, PULSE_AMPLITUDE};
pub use trace::PpgTrace;
pub use validate::{run_validation, PipelineParams, ValidationConfig, ValidationOutcome};
