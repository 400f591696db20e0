use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::posture::N_SENSORS;

/// Zero-based indices of S4, S5, S6, S7.
pub const PELVIC_SENSORS: [usize; 4] = [3, 4, 5, 6];
/// Zero-based indices of S3, S4, S7, S8: the sensors that unload when the
/// pelvis slides forward.
pub const REAR_SENSORS: [usize; 4] = [2, 3, 6, 7];

const MIRROR_TOLERANCE_CM: f64 = 1e-9;

/// Sensor positions on the cushion. `x` runs across the width (left edge at
/// 0), `y` runs front to back along the long axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CushionLayout {
    pub width_cm: f64,
    pub depth_cm: f64,
    pub sensor_positions: [(f64, f64); N_SENSORS],
}

impl Default for CushionLayout {
    /// S1..S5 run front to back on the left half, S6..S10 mirror them on the
    /// right so that S(11-i) sits opposite Si.
    fn default() -> Self {
        let left = [(7.0, 8.0), (8.0, 17.0), (6.5, 26.0), (10.5, 32.0), (14.5, 37.0)];
        let width = 35.0;
        let mut sensor_positions = [(0.0, 0.0); N_SENSORS];
        for (i, &(x, y)) in left.iter().enumerate() {
            sensor_positions[i] = (x, y);
            sensor_positions[N_SENSORS - 1 - i] = (width - x, y);
        }
        Self { width_cm: width, depth_cm: 45.0, sensor_positions }
    }
}

impl CushionLayout {
    pub fn validate(&self) -> Result<()> {
        if !(self.width_cm > 0.0 && self.depth_cm > 0.0) {
            return Err(Error::InvalidConfig("cushion dimensions must be positive".into()));
        }
        for (i, &(x, y)) in self.sensor_positions.iter().enumerate() {
            if !(0.0..=self.width_cm).contains(&x) || !(0.0..=self.depth_cm).contains(&y) {
                return Err(Error::InvalidConfig(format!(
                    "S{} at ({x}, {y}) lies outside the {}x{} cm cushion",
                    i + 1,
                    self.depth_cm,
                    self.width_cm
                )));
            }
        }
        let axis = self.width_cm / 2.0;
        for i in 0..N_SENSORS / 2 {
            let (xl, yl) = self.sensor_positions[i];
            let (xr, yr) = self.sensor_positions[N_SENSORS - 1 - i];
            if ((axis - xl) - (xr - axis)).abs() > MIRROR_TOLERANCE_CM
                || (yl - yr).abs() > MIRROR_TOLERANCE_CM
            {
                return Err(Error::InvalidConfig(format!(
                    "S{} and S{} are not mirror images about the long axis",
                    i + 1,
                    N_SENSORS - i
                )));
            }
        }
        Ok(())
    }

    /// Parses a `sensor_id,x_cm,y_cm` table. Sensor ids may be written `S3`
    /// or `3`. Width and depth keep their default values.
    pub fn parse(text: &str) -> Result<Self> {
        let mut layout = CushionLayout::default();
        let mut seen = [false; N_SENSORS];
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with("sensor_id") {
                continue;
            }
            let parse_err = |message: String| Error::Parse { line: lineno as u64 + 1, message };
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(parse_err(format!("expected 3 columns, found {}", fields.len())));
            }
            let id: usize = fields[0]
                .trim_start_matches(['S', 's'])
                .parse()
                .map_err(|_| parse_err(format!("bad sensor id {:?}", fields[0])))?;
            if !(1..=N_SENSORS).contains(&id) {
                return Err(parse_err(format!("sensor id {id} out of range 1..=10")));
            }
            let coord = |s: &str| s.parse::<f64>().map_err(|_| parse_err(format!("bad coordinate {s:?}")));
            layout.sensor_positions[id - 1] = (coord(fields[1])?, coord(fields[2])?);
            seen[id - 1] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidConfig(format!("layout is missing S{}", missing + 1)));
        }
        layout.validate()?;
        Ok(layout)
    }

    pub fn to_table(&self) -> String {
        let mut out = String::from("sensor_id,x_cm,y_cm\n");
        for (i, (x, y)) in self.sensor_positions.iter().enumerate() {
            let _ = writeln!(out, "S{},{x},{y}", i + 1);
        }
        out
    }
}
