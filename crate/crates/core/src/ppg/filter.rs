use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// Normalized second-order section, `a0 = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    /// Second-order Butterworth low-pass via the prewarped bilinear
    /// transform; exactly -3.01 dB at `cutoff_hz`.
    pub fn butterworth_lowpass(cutoff_hz: f64, fs_hz: f64) -> Self {
        let (cos_w, alpha) = Self::prototype(cutoff_hz, fs_hz);
        let a0 = 1.0 + alpha;
        let b1 = (1.0 - cos_w) / a0;
        Self { b: [b1 / 2.0, b1, b1 / 2.0], a: [-2.0 * cos_w / a0, (1.0 - alpha) / a0] }
    }

    pub fn butterworth_highpass(cutoff_hz: f64, fs_hz: f64) -> Self {
        let (cos_w, alpha) = Self::prototype(cutoff_hz, fs_hz);
        let a0 = 1.0 + alpha;
        let b1 = -(1.0 + cos_w) / a0;
        Self { b: [-b1 / 2.0, b1, -b1 / 2.0], a: [-2.0 * cos_w / a0, (1.0 - alpha) / a0] }
    }

    fn prototype(cutoff_hz: f64, fs_hz: f64) -> (f64, f64) {
        let w0 = 2.0 * PI * cutoff_hz / fs_hz;
        (w0.cos(), w0.sin() / (2.0 * FRAC_1_SQRT_2))
    }

    /// Gain at DC.
    pub fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (1.0 + self.a[0] + self.a[1])
    }

    /// |H(e^{jw})| at `freq_hz`.
    pub fn magnitude_at(&self, freq_hz: f64, fs_hz: f64) -> f64 {
        let w = 2.0 * PI * freq_hz / fs_hz;
        let (c1, s1, c2, s2) = (w.cos(), w.sin(), (2.0 * w).cos(), (2.0 * w).sin());
        let num_re = self.b[0] + self.b[1] * c1 + self.b[2] * c2;
        let num_im = -(self.b[1] * s1 + self.b[2] * s2);
        let den_re = 1.0 + self.a[0] * c1 + self.a[1] * c2;
        let den_im = -(self.a[0] * s1 + self.a[1] * s2);
        (num_re.hypot(num_im)) / (den_re.hypot(den_im))
    }
}

/// Transposed direct-form II state. The first sample primes the state to the
/// steady response for a constant input of that value, so a DC level present
/// from the start produces no transient.
#[derive(Debug, Clone, PartialEq)]
pub struct BiquadState {
    coef: Biquad,
    s1: f64,
    s2: f64,
    primed: bool,
}

impl BiquadState {
    pub fn new(coef: Biquad) -> Self {
        Self { coef, s1: 0.0, s2: 0.0, primed: false }
    }

    pub fn coefficients(&self) -> &Biquad {
        &self.coef
    }

    pub fn reset(&mut self) {
        self.s1 = 0.0;
        self.s2 = 0.0;
        self.primed = false;
    }

    pub fn process(&mut self, x: f64) -> f64 {
        let Biquad { b, a } = self.coef;
        if !self.primed {
            let y = self.coef.dc_gain() * x;
            self.s2 = b[2] * x - a[1] * y;
            self.s1 = b[1] * x - a[0] * y + self.s2;
            self.primed = true;
        }
        let y = b[0] * x + self.s1;
        self.s1 = b[1] * x - a[0] * y + self.s2;
        self.s2 = b[2] * x - a[1] * y;
        y
    }
}

/// Amplitude of the `freq_hz` component of `signal`, by correlating against
/// quadrature references over the largest whole number of periods.
pub fn tone_amplitude(signal: &[f64], freq_hz: f64, fs_hz: f64) -> f64 {
    let period = fs_hz / freq_hz;
    let periods = (signal.len() as f64 / period).floor();
    let n = ((periods * period).round() as usize).min(signal.len()).max(1);
    let (mut si, mut co) = (0.0, 0.0);
    for (i, &y) in signal[..n].iter().enumerate() {
        let ph = 2.0 * PI * freq_hz * i as f64 / fs_hz;
        si += y * ph.sin();
        co += y * ph.cos();
    }
    2.0 * si.hypot(co) / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn db(x: f64) -> f64 {
        20.0 * x.log10()
    }

    #[test]
    fn cutoffs_are_minus_three_db() {
        let fs = 100.0;
        let lp = Biquad::butterworth_lowpass(15.0, fs);
        let hp = Biquad::butterworth_highpass(0.5, fs);
        assert!((db(lp.magnitude_at(15.0, fs)) + 3.0103).abs() < 1e-6);
        assert!((db(hp.magnitude_at(0.5, fs)) + 3.0103).abs() < 1e-6);
        assert!((lp.dc_gain() - 1.0).abs() < 1e-12);
        assert!(hp.dc_gain().abs() < 1e-12);
    }

    #[test]
    fn primed_state_has_no_dc_transient() {
        let mut lp = BiquadState::new(Biquad::butterworth_lowpass(5.0, 100.0));
        let mut hp = BiquadState::new(Biquad::butterworth_highpass(0.5, 100.0));
        for _ in 0..50 {
            assert!((lp.process(2.5) - 2.5).abs() < 1e-12);
            assert!(hp.process(2.5).abs() < 1e-12);
        }
    }

    #[test]
    fn measured_gain_matches_analytic_response() {
        let fs = 100.0;
        let coef = Biquad::butterworth_lowpass(15.0, fs);
        for freq in [2.0, 10.0, 15.0, 30.0] {
            let mut st = BiquadState::new(coef);
            let n = 4000;
            let out: Vec<f64> = (0..n)
                .map(|i| st.process((2.0 * PI * freq * i as f64 / fs).sin()))
                .collect();
            let amp = tone_amplitude(&out[n - 1000..], freq, fs);
            let expected = coef.magnitude_at(freq, fs);
            assert!((amp - expected).abs() / expected < 1e-3, "{freq} Hz: {amp} vs {expected}");
        }
    }
}
