//! Butterworth IIR design and second-order-section filtering.
//!
//! Filters are designed in the analog domain (prototype poles on the unit
//! circle), frequency-transformed (low-pass / band-pass), mapped to z with the
//! bilinear transform and realized as cascaded biquads. Cascading keeps the
//! narrow low-frequency band edges used on EEG (0.4 Hz at 512 Hz sampling)
//! numerically stable where a single high-order polynomial would not be.
//!
//! Gain handling: each section is normalized so the cascade has exactly unit
//! gain at the filter's reference frequency (DC for low-pass, the warped
//! geometric band center for band-pass), which is where an ideal Butterworth
//! response is exactly 1.

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};

/// One direct-form-II-transposed second-order section, `a0` normalized to 1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Biquad {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

impl Biquad {
    /// Complex response at angle `theta` (rad/sample).
    fn response(&self, theta: f64) -> Complex64 {
        let z1 = Complex64::from_polar(1.0, -theta);
        let z2 = Complex64::from_polar(1.0, -2.0 * theta);
        (self.b0 + self.b1 * z1 + self.b2 * z2) / (Complex64::new(1.0, 0.0) + self.a1 * z1 + self.a2 * z2)
    }
}

/// A cascade of biquads representing one designed filter.
#[derive(Clone, Debug)]
pub struct Sos {
    sections: Vec<Biquad>,
}

/// Running state for one `Sos` over one signal channel (direct form II
/// transposed: two state words per section).
#[derive(Clone, Debug)]
pub struct SosState {
    s: Vec<[f64; 2]>,
}

impl SosState {
    pub fn new(sos: &Sos) -> SosState {
        SosState { s: vec![[0.0; 2]; sos.sections.len()] }
    }

    pub fn reset(&mut self) {
        for s in &mut self.s {
            *s = [0.0; 2];
        }
    }
}

impl Sos {
    /// Butterworth low-pass. `order` is the prototype (pole) order.
    pub fn lowpass(order: usize, cutoff_hz: f64, fs: f64) -> Result<Sos> {
        check_freq("cutoff", cutoff_hz, fs)?;
        if order == 0 {
            return Err(Error::domain("filter order must be >= 1"));
        }
        let fs2 = 2.0 * fs;
        let wc = fs2 * (std::f64::consts::PI * cutoff_hz / fs).tan();
        // Analog poles, then bilinear map; low-pass zeros land at z = -1.
        let z_poles: Vec<Complex64> =
            prototype_poles(order).into_iter().map(|p| bilinear(p * wc, fs2)).collect();
        // Low-pass zeros all sit at z = -1: a double zero per pole pair, a
        // single zero for a lone real pole (odd orders).
        let mut sections = pair_into_sections(&z_poles, (1.0, 2.0, 1.0), (1.0, 1.0, 0.0));
        // Unit gain at DC, section by section.
        for sec in &mut sections {
            let g = sec.response(0.0).norm();
            debug_assert!(g > 0.0);
            sec.b0 /= g;
            sec.b1 /= g;
            sec.b2 /= g;
        }
        Ok(Sos { sections })
    }

    /// Butterworth band-pass. `order` is the prototype order; the realized
    /// filter has `2 * order` poles (`order` biquads).
    pub fn bandpass(order: usize, lo_hz: f64, hi_hz: f64, fs: f64) -> Result<Sos> {
        check_freq("low edge", lo_hz, fs)?;
        check_freq("high edge", hi_hz, fs)?;
        if lo_hz >= hi_hz {
            return Err(Error::domain(format!(
                "band edges out of order: {lo_hz} Hz >= {hi_hz} Hz"
            )));
        }
        if order == 0 {
            return Err(Error::domain("filter order must be >= 1"));
        }
        let fs2 = 2.0 * fs;
        let w_lo = fs2 * (std::f64::consts::PI * lo_hz / fs).tan();
        let w_hi = fs2 * (std::f64::consts::PI * hi_hz / fs).tan();
        let bw = w_hi - w_lo;
        let w0sq = w_lo * w_hi;

        // Low-pass -> band-pass: each prototype pole p becomes the pair
        // q ± sqrt(q² − w0²) with q = p·bw/2.
        let mut z_poles = Vec::with_capacity(2 * order);
        for p in prototype_poles(order) {
            let q = p * (bw / 2.0);
            let root = (q * q - Complex64::new(w0sq, 0.0)).sqrt();
            z_poles.push(bilinear(q + root, fs2));
            z_poles.push(bilinear(q - root, fs2));
        }
        // Each section takes one zero at z = +1 and one at z = -1 (band-pass
        // numerator 1 - z⁻²), so every biquad is itself a band-pass. The
        // transform always yields an even pole count, so no single-pole
        // section occurs here.
        let mut sections = pair_into_sections(&z_poles, (1.0, 0.0, -1.0), (1.0, 0.0, -1.0));
        // Unit gain at the warped band center.
        let f_center = (fs / std::f64::consts::PI) * (w0sq.sqrt() / fs2).atan();
        let theta = 2.0 * std::f64::consts::PI * f_center / fs;
        for sec in &mut sections {
            let g = sec.response(theta).norm();
            debug_assert!(g > 0.0);
            sec.b0 /= g;
            sec.b1 /= g;
            sec.b2 /= g;
        }
        Ok(Sos { sections })
    }

    pub fn sections(&self) -> &[Biquad] {
        &self.sections
    }

    /// Magnitude response at `f_hz`.
    pub fn magnitude(&self, f_hz: f64, fs: f64) -> f64 {
        let theta = 2.0 * std::f64::consts::PI * f_hz / fs;
        self.sections.iter().map(|s| s.response(theta).norm()).product()
    }

    /// Advance one sample through the cascade, updating `state`.
    #[inline]
    pub fn step(&self, state: &mut SosState, x: f64) -> f64 {
        let mut v = x;
        for (sec, s) in self.sections.iter().zip(state.s.iter_mut()) {
            let y = sec.b0 * v + s[0];
            s[0] = sec.b1 * v - sec.a1 * y + s[1];
            s[1] = sec.b2 * v - sec.a2 * y;
            v = y;
        }
        v
    }

    /// Causal (single-pass) filtering from zero initial state.
    pub fn filter(&self, x: &[f64]) -> Vec<f64> {
        let mut state = SosState::new(self);
        x.iter().map(|&v| self.step(&mut state, v)).collect()
    }

    /// Zero-phase filtering: forward pass, then a second pass over the
    /// reversed signal. Magnitude response is squared; phase cancels. No edge
    /// padding is applied, so the first and last moments carry the usual
    /// start-up transients.
    pub fn filtfilt(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.filter(x);
        y.reverse();
        let mut z = self.filter(&y);
        z.reverse();
        z
    }
}

fn check_freq(what: &str, f: f64, fs: f64) -> Result<()> {
    if !(f.is_finite() && fs.is_finite()) || fs <= 0.0 || f <= 0.0 || f >= fs / 2.0 {
        return Err(Error::domain(format!(
            "{what} {f} Hz must lie in (0, fs/2) for fs = {fs} Hz"
        )));
    }
    Ok(())
}

/// Left-half-plane poles of the unit-cutoff analog Butterworth prototype.
fn prototype_poles(order: usize) -> Vec<Complex64> {
    (0..order)
        .map(|k| {
            let theta = std::f64::consts::PI * (2 * k + order + 1) as f64 / (2 * order) as f64;
            Complex64::from_polar(1.0, theta)
        })
        .collect()
}

/// Bilinear transform of an analog pole/zero, `fs2 = 2 * fs`.
fn bilinear(s: Complex64, fs2: f64) -> Complex64 {
    (Complex64::new(fs2, 0.0) + s) / (Complex64::new(fs2, 0.0) - s)
}

/// Group complex-conjugate pole pairs (plus real poles, paired when possible)
/// into denominator coefficients, attaching `pair_zeros` as the numerator of
/// two-pole sections and `single_zeros` (b2 ignored) for a lone real pole.
fn pair_into_sections(
    z_poles: &[Complex64],
    pair_zeros: (f64, f64, f64),
    single_zeros: (f64, f64, f64),
) -> Vec<Biquad> {
    // Keep one representative per conjugate pair (upper half plane); real
    // poles are collected separately. Sorted for a deterministic cascade.
    let mut upper: Vec<Complex64> = z_poles.iter().copied().filter(|p| p.im > 1e-12).collect();
    let mut real: Vec<f64> = z_poles.iter().filter(|p| p.im.abs() <= 1e-12).map(|p| p.re).collect();
    upper.sort_by(|a, b| (a.re, a.im).partial_cmp(&(b.re, b.im)).unwrap());
    real.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mut sections = Vec::new();
    let (b0, b1, b2) = pair_zeros;
    for p in upper {
        sections.push(Biquad { b0, b1, b2, a1: -2.0 * p.re, a2: p.norm_sqr() });
    }
    let mut real_iter = real.into_iter();
    while let Some(r1) = real_iter.next() {
        if let Some(r2) = real_iter.next() {
            sections.push(Biquad { b0, b1, b2, a1: -(r1 + r2), a2: r1 * r2 });
        } else {
            let (s0, s1, _) = single_zeros;
            sections.push(Biquad { b0: s0, b1: s1, b2: 0.0, a1: -r1, a2: 0.0 });
        }
    }
    sections
}
