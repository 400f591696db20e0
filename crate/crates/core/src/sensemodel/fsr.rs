use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// FSR in series with a fixed resistor, read across the fixed resistor by an
/// ADC referenced to the supply. The FSR is modelled with conductance
/// proportional to force: `R_fsr = fsr_scale_ohm_kg / force_kg`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FsrDividerConfig {
    pub supply_v: f64,
    pub fixed_resistor_ohm: f64,
    pub fsr_scale_ohm_kg: f64,
    pub adc_bits: u32,
    pub max_force_kg: f64,
}

impl Default for FsrDividerConfig {
    fn default() -> Self {
        Self {
            supply_v: 3.3,
            fixed_resistor_ohm: 10_000.0,
            fsr_scale_ohm_kg: 30_000.0,
            adc_bits: 12,
            max_force_kg: 10.0,
        }
    }
}

impl FsrDividerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.supply_v > 0.0) {
            return Err(Error::InvalidConfig("supply_v must be positive".into()));
        }
        if !(self.fixed_resistor_ohm > 0.0) || !(self.fsr_scale_ohm_kg > 0.0) {
            return Err(Error::InvalidConfig("resistances must be positive".into()));
        }
        if !(8..=16).contains(&self.adc_bits) {
            return Err(Error::InvalidConfig(format!("adc_bits {} outside 8..=16", self.adc_bits)));
        }
        if self.max_force_kg != 10.0 {
            return Err(Error::InvalidConfig("max_force_kg is fixed at the 10 kg sensor range".into()));
        }
        Ok(())
    }

    pub fn full_scale(&self) -> u16 {
        ((1u32 << self.adc_bits) - 1) as u16
    }

    /// Divider output in volts.
    pub fn divider_voltage(&self, force_kg: f64) -> f64 {
        if force_kg <= 0.0 {
            return 0.0;
        }
        let r_fsr = self.fsr_scale_ohm_kg / force_kg;
        self.supply_v * self.fixed_resistor_ohm / (r_fsr + self.fixed_resistor_ohm)
    }
}

/// Quantizes the divider output for `force_kg`, rounding half up.
pub fn fsr_adc(force_kg: f64, cfg: &FsrDividerConfig) -> Result<u16> {
    if !force_kg.is_finite() || force_kg < 0.0 {
        return Err(Error::InvalidInput(format!("force {force_kg} kg must be non-negative")));
    }
    if force_kg > cfg.max_force_kg {
        return Err(Error::InvalidInput(format!(
            "force {force_kg} kg exceeds the {} kg sensor range",
            cfg.max_force_kg
        )));
    }
    let ratio = cfg.divider_voltage(force_kg) / cfg.supply_v;
    let full = f64::from(cfg.full_scale());
    Ok((ratio * full + 0.5).floor() as u16)
}

/// Inverts the divider for a count, clamped to the sensor range.
pub fn counts_to_force(counts: u16, cfg: &FsrDividerConfig) -> f64 {
    let ratio = f64::from(counts) / f64::from(cfg.full_scale());
    if ratio <= 0.0 {
        return 0.0;
    }
    if ratio >= 1.0 {
        return cfg.max_force_kg;
    }
    let force = cfg.fsr_scale_ohm_kg * ratio / (cfg.fixed_resistor_ohm * (1.0 - ratio));
    force.min(cfg.max_force_kg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_points() {
        let cfg = FsrDividerConfig::default();
        assert_eq!(fsr_adc(0.0, &cfg).unwrap(), 0);
        // 3 kg: R_fsr equals the fixed resistor, half of 4095 rounds up.
        assert_eq!(fsr_adc(3.0, &cfg).unwrap(), 2048);
        // 10 kg: 10k / 13k of full scale.
        assert_eq!(fsr_adc(10.0, &cfg).unwrap(), 3150);
    }

    #[test]
    fn rejects_out_of_range_force() {
        let cfg = FsrDividerConfig::default();
        assert!(matches!(fsr_adc(-0.1, &cfg), Err(Error::InvalidInput(_))));
        assert!(matches!(fsr_adc(10.5, &cfg), Err(Error::InvalidInput(_))));
        assert!(fsr_adc(f64::NAN, &cfg).is_err());
    }

    #[test]
    fn monotone_over_grid() {
        let cfg = FsrDividerConfig::default();
        let mut prev = 0;
        for i in 0..1000 {
            let force = 10.0 * i as f64 / 999.0;
            let counts = fsr_adc(force, &cfg).unwrap();
            assert!(counts >= prev, "non-monotone at {force}");
            prev = counts;
        }
    }

    #[test]
    fn inverse_recovers_force_within_one_count() {
        let cfg = FsrDividerConfig::default();
        for force in [0.5, 1.0, 3.0, 7.5, 10.0] {
            let counts = fsr_adc(force, &cfg).unwrap();
            let back = counts_to_force(counts, &cfg);
            assert_eq!(fsr_adc(back, &cfg).unwrap(), counts);
        }
        assert_eq!(counts_to_force(0, &cfg), 0.0);
        assert_eq!(counts_to_force(4095, &cfg), 10.0);
    }

    #[test]
    fn config_validation() {
        let mut cfg = FsrDividerConfig::default();
        cfg.validate().unwrap();
        cfg.adc_bits = 7;
        assert!(cfg.validate().is_err());
        cfg.adc_bits = 16;
        cfg.validate().unwrap();
        assert_eq!(cfg.full_scale(), u16::MAX);
        cfg.supply_v = 0.0;
        assert!(cfg.validate().is_err());
    }
}
