//! Smart-chair sensing and monitoring: a ten-sensor pressure cushion with
//! posture classification, a wrist PPG heart-rate pipeline, and a live
//! monitoring service.

pub mod classify;
pub mod dataset;
pub mod embed;
pub mod error;
pub mod export;
pub mod monitor;
pub mod posture;
pub mod ppg;
pub mod sensemodel;

pub use error::{Error, Result};
pub use posture::{PostureLabel, N_CLASSES, N_SENSORS};
pub use sensemodel::SensorFrame;
