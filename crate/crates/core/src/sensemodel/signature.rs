use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::layout::{PELVIC_SENSORS, REAR_SENSORS};
use super::{MAX_SUBJECT_MASS_KG, MIN_SUBJECT_MASS_KG};
use crate::error::{Error, Result};
use crate::posture::{PostureLabel, N_CLASSES, N_SENSORS};

/// Per-sensor noise is a Gaussian truncated at this many standard deviations.
const NOISE_TRUNCATION_SD: f64 = 2.5;
const SENSOR_MAX_KG: f64 = 10.0;

/// Reference subject for the built-in table (kg).
pub const REFERENCE_MASS_KG: f64 = 65.0;

// Means and spreads for a 65 kg subject. Columns: posture, S1..S10 means,
// S1..S10 standard deviations, lateral tilt jitter.
const DEFAULT_TABLE: &str = "\
posture,s1_mean_kg,s2_mean_kg,s3_mean_kg,s4_mean_kg,s5_mean_kg,s6_mean_kg,s7_mean_kg,s8_mean_kg,s9_mean_kg,s10_mean_kg,s1_sd_kg,s2_sd_kg,s3_sd_kg,s4_sd_kg,s5_sd_kg,s6_sd_kg,s7_sd_kg,s8_sd_kg,s9_sd_kg,s10_sd_kg,tilt_jitter
Empty,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0
Upright,1.5,2.5,3.0,5.8,6.0,6.0,5.8,3.0,2.5,1.5,0.10,0.12,0.12,0.10,0.10,0.10,0.10,0.12,0.12,0.10,0.04
Slouching,2.0,3.0,2.2,4.4,6.8,6.8,4.4,2.2,3.0,2.0,0.15,0.20,0.16,0.27,0.39,0.39,0.27,0.16,0.20,0.15,0.08
LeanLeft,2.8,4.0,4.5,7.0,6.8,4.2,3.6,1.6,1.2,0.8,0.19,0.25,0.28,0.40,0.39,0.26,0.23,0.13,0.11,0.09,0.08
LeanRight,0.8,1.2,1.6,3.6,4.2,6.8,7.0,4.5,4.0,2.8,0.09,0.11,0.13,0.23,0.26,0.39,0.40,0.28,0.25,0.19,0.08
LeftLegCrossed,0.0,1.0,2.6,5.0,5.6,6.4,6.6,3.8,3.6,2.4,0.00,0.10,0.18,0.30,0.33,0.37,0.38,0.24,0.23,0.17,0.08
RightLegCrossed,2.4,3.6,3.8,6.6,6.4,5.6,5.0,2.6,1.0,0.3,0.17,0.23,0.24,0.38,0.37,0.33,0.30,0.18,0.10,0.06,0.08
LeanBack,3.4,4.4,1.6,3.2,5.2,5.2,3.2,1.6,4.4,3.4,0.22,0.27,0.13,0.21,0.31,0.31,0.21,0.13,0.27,0.22,0.08
";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostureSignature {
    pub posture: PostureLabel,
    pub mean_force_kg: [f64; N_SENSORS],
    pub spread_kg: [f64; N_SENSORS],
    /// Half-width of the uniform lateral tilt applied per sitting: left
    /// sensors scale by `1 + t`, right sensors by `1 - t`.
    pub tilt_jitter: f64,
}

impl PostureSignature {
    /// Lists every invariant the signature breaks. Means are calibrated for a
    /// subject of `reference_mass_kg`.
    pub fn violations(
        &self,
        upright: &PostureSignature,
        reference_mass_kg: f64,
    ) -> Vec<String> {
        let mut out = Vec::new();
        let m = &self.mean_force_kg;
        if m.iter().chain(&self.spread_kg).any(|v| !v.is_finite() || *v < 0.0) {
            out.push("means and spreads must be finite and non-negative".to_string());
        }
        if !(0.0..1.0).contains(&self.tilt_jitter) {
            out.push("tilt_jitter must lie in [0, 1)".to_string());
        }
        if m.iter().sum::<f64>() > reference_mass_kg {
            out.push("mean forces exceed the subject mass".to_string());
        }
        match self.posture {
            PostureLabel::Empty => {
                if m.iter().any(|&v| v != 0.0) {
                    out.push("empty seat must have zero mean force".to_string());
                }
            }
            PostureLabel::LeftLegCrossed => {
                if m[0] != 0.0 {
                    out.push("left leg crossed must unload S1".to_string());
                }
                if m[1] >= upright.mean_force_kg[1] {
                    out.push("left leg crossed must reduce S2 below upright".to_string());
                }
            }
            PostureLabel::Upright => {
                let pelvic: Vec<f64> = PELVIC_SENSORS.iter().map(|&i| m[i]).collect();
                let max = pelvic.iter().cloned().fold(f64::MIN, f64::max);
                let min = pelvic.iter().cloned().fold(f64::MAX, f64::min);
                if !(min > 0.0 && max / min <= 1.3) {
                    out.push("upright pelvic sensors must agree within a 1.3 ratio".to_string());
                }
                let outer_max = (0..N_SENSORS)
                    .filter(|i| !PELVIC_SENSORS.contains(i))
                    .map(|i| m[i])
                    .fold(f64::MIN, f64::max);
                if min <= outer_max {
                    out.push("upright pelvic sensors must exceed every outer sensor".to_string());
                }
            }
            PostureLabel::LeanBack => {
                if REAR_SENSORS.iter().any(|&i| m[i] >= upright.mean_force_kg[i]) {
                    out.push("leaning back must unload every rear sensor".to_string());
                }
            }
            _ => {}
        }
        out
    }

    /// Draws one force vector for a subject of `mass_kg` with the given
    /// lateral tilt. Means and spreads scale linearly with mass.
    pub fn sample_with_tilt<R: Rng + ?Sized>(
        &self,
        mass_kg: f64,
        reference_mass_kg: f64,
        tilt: f64,
        rng: &mut R,
    ) -> [f64; N_SENSORS] {
        let scale = mass_kg / reference_mass_kg;
        let mut forces = [0.0; N_SENSORS];
        for (i, force) in forces.iter_mut().enumerate() {
            let side = if i < N_SENSORS / 2 { 1.0 + tilt } else { 1.0 - tilt };
            let mean = self.mean_force_kg[i] * scale * side;
            let sd = self.spread_kg[i] * scale;
            let noise = if sd > 0.0 { sd * truncated_normal(rng) } else { 0.0 };
            *force = (mean + noise).clamp(0.0, SENSOR_MAX_KG);
        }
        forces
    }

    pub fn draw_tilt<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.tilt_jitter > 0.0 {
            rng.random_range(-self.tilt_jitter..=self.tilt_jitter)
        } else {
            0.0
        }
    }
}

fn truncated_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let z: f64 = StandardNormal.sample(rng);
        if z.abs() <= NOISE_TRUNCATION_SD {
            return z;
        }
    }
}

/// One signature per posture class, indexed by class index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignatureTable {
    pub reference_mass_kg: f64,
    pub signatures: Vec<PostureSignature>,
}

impl Default for SignatureTable {
    fn default() -> Self {
        Self::parse(DEFAULT_TABLE).expect("built-in signature table is valid")
    }
}

impl SignatureTable {
    pub fn get(&self, posture: PostureLabel) -> &PostureSignature {
        &self.signatures[posture.index()]
    }

    pub fn validate(&self) -> Result<()> {
        let upright = self.get(PostureLabel::Upright);
        let problems: Vec<String> = self
            .signatures
            .iter()
            .flat_map(|sig| {
                sig.violations(upright, self.reference_mass_kg)
                    .into_iter()
                    .map(move |v| format!("{}: {v}", sig.posture))
            })
            .collect();
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(problems.join("; ")))
        }
    }

    /// Parses `posture,s1..s10_mean_kg,s1..s10_sd_kg` rows with an optional
    /// trailing `tilt_jitter` column (default 0.08). Every posture must
    /// appear exactly once.
    pub fn parse(text: &str) -> Result<Self> {
        let mut slots: Vec<Option<PostureSignature>> = vec![None; N_CLASSES];
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with("posture") {
                continue;
            }
            let parse_err = |message: String| Error::Parse { line: lineno as u64 + 1, message };
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 21 && fields.len() != 22 {
                return Err(parse_err(format!("expected 21 or 22 columns, found {}", fields.len())));
            }
            let posture: PostureLabel = fields[0].parse()?;
            let values = fields[1..]
                .iter()
                .map(|s| s.parse::<f64>().map_err(|_| parse_err(format!("bad number {s:?}"))))
                .collect::<Result<Vec<f64>>>()?;
            let mut mean_force_kg = [0.0; N_SENSORS];
            let mut spread_kg = [0.0; N_SENSORS];
            mean_force_kg.copy_from_slice(&values[..N_SENSORS]);
            spread_kg.copy_from_slice(&values[N_SENSORS..2 * N_SENSORS]);
            let tilt_jitter = values.get(2 * N_SENSORS).copied().unwrap_or(0.08);
            if slots[posture.index()].is_some() {
                return Err(parse_err(format!("duplicate row for {posture}")));
            }
            slots[posture.index()] =
                Some(PostureSignature { posture, mean_force_kg, spread_kg, tilt_jitter });
        }
        let signatures = slots
            .into_iter()
            .enumerate()
            .map(|(i, slot)| {
                slot.ok_or_else(|| {
                    Error::InvalidConfig(format!(
                        "signature table has no row for {}",
                        PostureLabel::ALL[i]
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let table = Self { reference_mass_kg: REFERENCE_MASS_KG, signatures };
        table.validate()?;
        Ok(table)
    }

    pub fn to_table(&self) -> String {
        let mut out = DEFAULT_TABLE.lines().next().unwrap_or_default().to_string();
        out.push('\n');
        for sig in &self.signatures {
            let _ = write!(out, "{}", sig.posture);
            for v in sig.mean_force_kg.iter().chain(&sig.spread_kg) {
                let _ = write!(out, ",{v}");
            }
            let _ = writeln!(out, ",{}", sig.tilt_jitter);
        }
        out
    }

    /// Draws a tilt and one noisy force vector for `posture`.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        posture: PostureLabel,
        mass_kg: f64,
        rng: &mut R,
    ) -> [f64; N_SENSORS] {
        let sig = self.get(posture);
        let tilt = sig.draw_tilt(rng);
        sig.sample_with_tilt(mass_kg, self.reference_mass_kg, tilt, rng)
    }
}

pub(crate) fn check_mass(mass_kg: f64) -> Result<()> {
    if !(MIN_SUBJECT_MASS_KG..=MAX_SUBJECT_MASS_KG).contains(&mass_kg) {
        return Err(Error::InvalidInput(format!(
            "subject mass {mass_kg} kg outside {MIN_SUBJECT_MASS_KG}..={MAX_SUBJECT_MASS_KG}"
        )));
    }
    Ok(())
}

/// Force vector (kg, S1..S10) for one sitting in `posture`, drawn from the
/// built-in signature table.
pub fn gen_posture_pressure(
    posture: PostureLabel,
    subject_mass_kg: f64,
    seed: u64,
) -> Result<[f64; N_SENSORS]> {
    check_mass(subject_mass_kg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(SignatureTable::default().sample(posture, subject_mass_kg, &mut rng))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pelvic_ratio_and_dominance(forces: &[f64; N_SENSORS]) -> (f64, bool) {
        let pelvic: Vec<f64> = PELVIC_SENSORS.iter().map(|&i| forces[i]).collect();
        let max = pelvic.iter().cloned().fold(f64::MIN, f64::max);
        let min = pelvic.iter().cloned().fold(f64::MAX, f64::min);
        let outer_max = (0..N_SENSORS)
            .filter(|i| !PELVIC_SENSORS.contains(i))
            .map(|i| forces[i])
            .fold(f64::MIN, f64::max);
        (max / min, min > outer_max)
    }

    #[test]
    fn default_table_satisfies_invariants() {
        SignatureTable::default().validate().unwrap();
    }

    #[test]
    fn empty_seat_is_zero() {
        for seed in [0, 1, 99] {
            assert_eq!(gen_posture_pressure(PostureLabel::Empty, 65.0, seed).unwrap(), [0.0; 10]);
        }
    }

    #[test]
    fn left_leg_crossed_unloads_s1_and_s2() {
        let crossed = gen_posture_pressure(PostureLabel::LeftLegCrossed, 65.0, 42).unwrap();
        let upright = gen_posture_pressure(PostureLabel::Upright, 65.0, 42).unwrap();
        assert_eq!(crossed[0], 0.0);
        assert!(crossed[1] < upright[1]);
    }

    #[test]
    fn upright_pelvic_group_dominates() {
        let forces = gen_posture_pressure(PostureLabel::Upright, 65.0, 7).unwrap();
        let (ratio, dominant) = pelvic_ratio_and_dominance(&forces);
        assert!(ratio <= 1.3, "ratio {ratio}");
        assert!(dominant);
    }

    #[test]
    fn upright_invariants_hold_for_many_seeds_and_masses() {
        for seed in 0..500 {
            for mass in [30.0, 50.0, 65.0, 100.0] {
                let forces = gen_posture_pressure(PostureLabel::Upright, mass, seed).unwrap();
                let (ratio, dominant) = pelvic_ratio_and_dominance(&forces);
                assert!(ratio <= 1.3 && dominant, "seed {seed} mass {mass}: {forces:?}");
                assert!(forces.iter().sum::<f64>() <= mass);
            }
        }
    }

    #[test]
    fn lean_back_unloads_rear_sensors_in_expectation() {
        let table = SignatureTable::default();
        let upright = table.get(PostureLabel::Upright);
        let back = table.get(PostureLabel::LeanBack);
        for &i in &REAR_SENSORS {
            assert!(back.mean_force_kg[i] < upright.mean_force_kg[i]);
        }
    }

    #[test]
    fn mass_out_of_range() {
        assert!(matches!(
            gen_posture_pressure(PostureLabel::Upright, 29.9, 0),
            Err(Error::InvalidInput(_))
        ));
        assert!(gen_posture_pressure(PostureLabel::Upright, 100.1, 0).is_err());
    }

    #[test]
    fn deterministic_per_seed() {
        let a = gen_posture_pressure(PostureLabel::LeanLeft, 70.0, 5).unwrap();
        let b = gen_posture_pressure(PostureLabel::LeanLeft, 70.0, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn noise_free_upright_is_mirror_symmetric() {
        let table = SignatureTable::default();
        let mut sig = table.get(PostureLabel::Upright).clone();
        sig.tilt_jitter = 0.0;
        sig.spread_kg = [0.0; N_SENSORS];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for mass in [40.0, 65.0, 90.0] {
            let tilt = sig.draw_tilt(&mut rng);
            let forces = sig.sample_with_tilt(mass, REFERENCE_MASS_KG, tilt, &mut rng);
            for i in 0..5 {
                assert!((forces[i] - forces[9 - i]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn occupied_centroids_are_separated() {
        let table = SignatureTable::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let centroids: Vec<[f64; N_SENSORS]> = PostureLabel::OCCUPIED
            .iter()
            .map(|&p| {
                let mut acc = [0.0; N_SENSORS];
                for _ in 0..200 {
                    let f = table.sample(p, 65.0, &mut rng);
                    acc.iter_mut().zip(f).for_each(|(a, v)| *a += v / 200.0);
                }
                acc
            })
            .collect();
        for i in 0..centroids.len() {
            for j in i + 1..centroids.len() {
                let d: f64 = centroids[i]
                    .iter()
                    .zip(&centroids[j])
                    .map(|(a, b)| (a - b).powi(2))
                    .sum::<f64>()
                    .sqrt();
                assert!(d >= 1.0, "{:?} vs {:?}: {d}", PostureLabel::OCCUPIED[i], PostureLabel::OCCUPIED[j]);
            }
        }
    }

    #[test]
    fn table_text_round_trip_and_errors() {
        let table = SignatureTable::default();
        assert_eq!(SignatureTable::parse(&table.to_table()).unwrap(), table);

        let missing = table.to_table().lines().filter(|l| !l.starts_with("LeanBack")).collect::<Vec<_>>().join("\n");
        assert!(SignatureTable::parse(&missing).is_err());

        let broken = table.to_table().replace("LeftLegCrossed,0,", "LeftLegCrossed,1,");
        assert!(matches!(SignatureTable::parse(&broken), Err(Error::InvalidConfig(_))));
    }
}
