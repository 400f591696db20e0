use std::f64::consts::PI;

use proptest::prelude::*;
use smartchair_core::ppg::{
    detect_peaks, heart_rate, process_chain, synth_ppg, tone_amplitude, Bands, Gains, NoiseSpec, PpgTrace,
};

const FS: f64 = 100.0;

fn sine(freq: f64, seconds: f64) -> PpgTrace {
    let n = (FS * seconds) as usize;
    PpgTrace::new(FS, (0..n).map(|i| (2.0 * PI * freq * i as f64 / FS).sin()).collect()).unwrap()
}

fn db(x: f64) -> f64 {
    20.0 * x.log10()
}

/// Gain of `out` relative to `inp` for a tone, measured after the first half
/// of the record has settled.
fn stage_gain(freq: f64, pick: impl Fn(&smartchair_core::ppg::ChainStages) -> (Vec<f64>, Vec<f64>)) -> f64 {
    let seconds = (40.0 / freq).max(20.0);
    let stages = process_chain(&sine(freq, seconds), Gains::default(), Bands::default()).unwrap();
    let (inp, out) = pick(&stages);
    let start = inp.len() / 2;
    tone_amplitude(&out[start..], freq, FS) / tone_amplitude(&inp[start..], freq, FS)
}

#[test]
fn cutoffs_sit_three_db_below_mid_band() {
    let bands = Bands::default();
    let raw_to_b = |s: &smartchair_core::ppg::ChainStages| (s.stage_a.samples.clone(), s.stage_b.samples.clone());
    let b_to_c = |s: &smartchair_core::ppg::ChainStages| (s.stage_b.samples.clone(), s.stage_c.samples.clone());
    let c_to_d = |s: &smartchair_core::ppg::ChainStages| (s.stage_c.samples.clone(), s.stage_d.samples.clone());

    let bp_mid = (bands.bp_low_hz * bands.bp_high_hz).sqrt();
    let cases = [
        ("hp", bands.hp_hz, 10.0, stage_gain(bands.hp_hz, raw_to_b) / stage_gain(10.0, raw_to_b)),
        ("bp_low", bands.bp_low_hz, bp_mid, stage_gain(bands.bp_low_hz, b_to_c) / stage_gain(bp_mid, b_to_c)),
        ("bp_high", bands.bp_high_hz, bp_mid, stage_gain(bands.bp_high_hz, b_to_c) / stage_gain(bp_mid, b_to_c)),
        ("lp", bands.lp_hz, 2.0, stage_gain(bands.lp_hz, c_to_d) / stage_gain(2.0, c_to_d)),
    ];
    for (name, f, mid, rel) in cases {
        let d = db(rel);
        assert!((d + 3.0).abs() <= 0.5, "{name} at {f} Hz vs {mid} Hz: {d:.3} dB");
    }
}

#[test]
fn stage_d_is_not_smaller_than_stage_c_in_band() {
    let stages = process_chain(&sine(2.0, 20.0), Gains::default(), Bands::default()).unwrap();
    let c = tone_amplitude(&stages.stage_c.samples[1000..], 2.0, FS);
    let d = tone_amplitude(&stages.stage_d.samples[1000..], 2.0, FS);
    assert!(d >= c);
}

#[test]
fn stage_b_mean_is_removed() {
    let noise = NoiseSpec::default();
    let raw = synth_ppg(&|_| 72.0, 30.0, FS, &noise, 3).unwrap();
    let stages = process_chain(&raw, Gains::default(), Bands::default()).unwrap();
    let raw_mean = raw.samples.iter().sum::<f64>() / raw.len() as f64;
    let tail = &stages.stage_b.samples[200..];
    let b_mean = tail.iter().sum::<f64>() / tail.len() as f64;
    assert!(b_mean.abs() < 0.01 * raw_mean.abs(), "{b_mean} vs {raw_mean}");
}

#[test]
fn constant_rates_are_recovered_within_two_bpm() {
    for bpm in [50.0, 60.0, 80.0, 100.0, 120.0] {
        for seed in 0..3 {
            let raw = synth_ppg(&move |_| bpm, 60.0, FS, &NoiseSpec::default().with_snr(10.0), seed).unwrap();
            let stages = process_chain(&raw, Gains::default(), Bands::default()).unwrap();
            let peaks = detect_peaks(&stages.stage_d, 0.3).unwrap();
            let hr = heart_rate(&peaks, FS, 10.0).unwrap();
            // Skip beats whose window still includes the filter start-up.
            for p in hr.iter().filter(|p| p.t_s >= 12.0) {
                assert!((p.bpm - bpm).abs() <= 2.0, "{bpm} bpm seed {seed}: {} at {} s", p.bpm, p.t_s);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn chain_is_linear(seed in any::<u64>(), bpm in 40.0f64..180.0) {
        let raw = synth_ppg(&move |_| bpm, 5.0, FS, &NoiseSpec::default().with_snr(15.0), seed).unwrap();
        let base = process_chain(&raw, Gains::default(), Bands::default()).unwrap();
        for alpha in [0.5, 2.0] {
            let scaled = PpgTrace::new(FS, raw.samples.iter().map(|v| alpha * v).collect()).unwrap();
            let out = process_chain(&scaled, Gains::default(), Bands::default()).unwrap();
            for (x, y) in [
                (&base.stage_b, &out.stage_b),
                (&base.stage_c, &out.stage_c),
                (&base.stage_d, &out.stage_d),
            ] {
                let scale = x.samples.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                for (u, v) in x.samples.iter().zip(&y.samples) {
                    prop_assert!((alpha * u - v).abs() <= 1e-6 * scale);
                }
            }
        }
    }
}
