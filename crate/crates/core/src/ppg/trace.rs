use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A uniformly sampled waveform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PpgTrace {
    pub fs_hz: f64,
    pub samples: Vec<f64>,
    /// Sample indices of the true systolic peaks, when known.
    pub ground_truth_peaks: Option<Vec<usize>>,
}

impl PpgTrace {
    pub fn new(fs_hz: f64, samples: Vec<f64>) -> Result<Self> {
        let trace = Self { fs_hz, samples, ground_truth_peaks: None };
        trace.validate()?;
        Ok(trace)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fs_hz.is_finite() && self.fs_hz > 0.0) {
            return Err(Error::InvalidInput(format!("sample rate {} must be positive", self.fs_hz)));
        }
        if self.samples.is_empty() {
            return Err(Error::InvalidInput("trace has no samples".into()));
        }
        if let Some(peaks) = &self.ground_truth_peaks {
            let increasing = peaks.windows(2).all(|w| w[0] < w[1]);
            if !increasing || peaks.last().is_some_and(|&p| p >= self.samples.len()) {
                return Err(Error::InvalidInput("peak indices must increase and stay in range".into()));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.fs_hz
    }

    /// Writes `t_s,value` rows.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["t_s", "value"])?;
        for (i, v) in self.samples.iter().enumerate() {
            w.write_record([(i as f64 / self.fs_hz).to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads `t_s,value` rows; the sample rate comes from the first time step.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let mut times = Vec::new();
        let mut samples = Vec::new();
        for record in r.records() {
            let record = record?;
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            let field = |i: usize| -> Result<f64> {
                record
                    .get(i)
                    .and_then(|s| s.trim().parse::<f64>().ok())
                    .ok_or_else(|| Error::Parse { line, message: format!("column {} is not a number", i + 1) })
            };
            times.push(field(0)?);
            samples.push(field(1)?);
        }
        if times.len() < 2 {
            return Err(Error::InsufficientData("trace file needs at least two samples".into()));
        }
        let dt = times[1] - times[0];
        if !(dt > 0.0) {
            return Err(Error::InvalidInput("trace timestamps must increase".into()));
        }
        let fs_hz = (1.0 / dt * 1e6).round() / 1e6;
        Self::new(fs_hz, samples)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let trace = PpgTrace::new(100.0, vec![0.0, 0.5, -1.25, 3.0e-5]).unwrap();
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        assert!(buf.starts_with(b"t_s,value\n0,0\n0.01,0.5\n"));
        assert_eq!(PpgTrace::read_csv(buf.as_slice()).unwrap(), trace);
    }

    #[test]
    fn invariants() {
        assert!(PpgTrace::new(0.0, vec![1.0]).is_err());
        assert!(PpgTrace::new(100.0, vec![]).is_err());
        let mut t = PpgTrace::new(100.0, vec![0.0; 10]).unwrap();
        t.ground_truth_peaks = Some(vec![3, 3]);
        assert!(t.validate().is_err());
        t.ground_truth_peaks = Some(vec![3, 10]);
        assert!(t.validate().is_err());
    }
}
