//! The known waveform and multi-pulse scenes built from it.

use alloc::sync::Arc;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;

use crate::{CVector, Error, Result};

/// Sample offsets closer than this to an integer are treated as on-grid so
/// that grid delays reproduce exact circular shifts.
const GRID_SNAP: f64 = 1e-9;

/// Retry cap for rejection sampling of pulse delays.
pub const MAX_DRAW_ATTEMPTS: usize = 1_000_000;

/// A pulse shape that can be sampled at an arbitrary continuous delay.
pub trait Waveform: Send + Sync {
    /// Record length in Nyquist samples.
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
    fn sample_rate(&self) -> f64;
    /// Pulse duration in seconds.
    fn duration(&self) -> f64;
    /// `[g(k/fs - delay)]_{k=0..len}`; samples falling outside the record are dropped.
    fn template(&self, delay: f64) -> CVector;

    fn delta(&self) -> f64 {
        1.0 / self.sample_rate()
    }

    /// Largest delay that keeps the whole pulse inside the record.
    fn max_delay(&self) -> f64 {
        (self.len() as f64 - 1.0) / self.sample_rate() - self.duration()
    }
}

/// Linear chirp under a raised-cosine window.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct ChirpSpec {
    /// Center frequency (Hz).
    pub f0: f64,
    /// Swept bandwidth (Hz).
    pub delta_f: f64,
    /// Pulse duration (s).
    pub duration: f64,
    /// Nyquist sampling rate (Hz).
    pub sample_rate: f64,
    /// Record length (samples).
    pub len: usize,
}

impl Default for ChirpSpec {
    fn default() -> Self {
        ChirpSpec {
            f0: 1e6,
            delta_f: 40e6,
            duration: 1e-6,
            sample_rate: 50e6,
            len: 500,
        }
    }
}

impl ChirpSpec {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("f0", self.f0),
            ("delta_f", self.delta_f),
            ("duration", self.duration),
            ("sample_rate", self.sample_rate),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Parameter(alloc::format!(
                    "{name} must be finite and positive, got {v}"
                )));
            }
        }
        if self.len < 2 {
            return Err(Error::param("record length must be at least 2"));
        }
        if self.support() > self.len as f64 {
            return Err(Error::param("pulse duration exceeds the record"));
        }
        Ok(())
    }

    /// Grid spacing Δ = 1/fs.
    pub fn delta(&self) -> f64 {
        1.0 / self.sample_rate
    }

    /// Pulse length in samples, `T·fs`.
    pub fn support(&self) -> f64 {
        self.duration * self.sample_rate
    }

    /// Largest delay that keeps the whole pulse inside the record.
    pub fn max_delay(&self) -> f64 {
        (self.len as f64 - 1.0) / self.sample_rate - self.duration
    }

    /// Unnormalised pulse at `x` samples after its start.
    fn raw_sample(&self, x: f64) -> Complex64 {
        let u = x / self.support();
        if !(u > 0.0 && u < 1.0) {
            return Complex64::new(0.0, 0.0);
        }
        let t = x / self.sample_rate - 0.5 * self.duration;
        let phase = 2.0 * PI * (self.f0 + self.delta_f / (2.0 * self.duration) * t) * t;
        let window = 0.5 * self.duration * (1.0 + (2.0 * PI * t / self.duration).cos());
        Complex64::from_polar(window, phase)
    }

    fn raw_template(&self, shift: f64) -> CVector {
        CVector::from_fn(self.len, |k, _| self.raw_sample(k as f64 - shift))
    }
}

/// A validated chirp with its unit-energy scale precomputed.
///
/// The scale is fixed by the discrete norm of the zero-delay template, so
/// every integer-sample delay has norm exactly one and fractional delays
/// stay within a fraction of a percent of it.
#[derive(Debug, Clone, PartialEq)]
pub struct Chirp {
    spec: ChirpSpec,
    scale: f64,
}

impl Chirp {
    pub fn new(spec: ChirpSpec) -> Result<Self> {
        spec.validate()?;
        let energy: f64 = spec.raw_template(0.0).iter().map(|c| c.norm_sqr()).sum();
        if !(energy > 0.0) {
            return Err(Error::param("zero-energy template"));
        }
        Ok(Chirp {
            spec,
            scale: 1.0 / energy.sqrt(),
        })
    }

    pub fn spec(&self) -> &ChirpSpec {
        &self.spec
    }

    pub fn into_shared(self) -> Arc<dyn Waveform> {
        Arc::new(self)
    }
}

impl Waveform for Chirp {
    fn len(&self) -> usize {
        self.spec.len
    }

    fn sample_rate(&self) -> f64 {
        self.spec.sample_rate
    }

    fn duration(&self) -> f64 {
        self.spec.duration
    }

    fn template(&self, delay: f64) -> CVector {
        let mut shift = delay * self.spec.sample_rate;
        let nearest = shift.round();
        if (shift - nearest).abs() < GRID_SNAP {
            shift = nearest;
        }
        let mut v = self.spec.raw_template(shift);
        v *= Complex64::new(self.scale, 0.0);
        v
    }
}

/// Sampled chirp delayed by `tau` seconds, unit energy at zero delay.
pub fn chirp_template(spec: &ChirpSpec, tau: f64) -> Result<CVector> {
    if !tau.is_finite() {
        return Err(Error::param("delay must be finite"));
    }
    Ok(Chirp::new(*spec)?.template(tau))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pulse {
    pub amplitude: Complex64,
    /// Delay in seconds.
    pub delay: f64,
}

/// Ground truth: `K` pulses with continuous delays.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseScene {
    pub pulses: Vec<Pulse>,
}

impl SparseScene {
    pub fn new(pulses: Vec<Pulse>) -> Self {
        SparseScene { pulses }
    }

    pub fn len(&self) -> usize {
        self.pulses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pulses.is_empty()
    }

    pub fn delays(&self) -> Vec<f64> {
        self.pulses.iter().map(|p| p.delay).collect()
    }

    /// Delays must keep every pulse inside the record and pulses may not overlap.
    pub fn validate(&self, waveform: &dyn Waveform) -> Result<()> {
        let slack = 1e-9 * waveform.delta();
        let hi = waveform.max_delay();
        for p in &self.pulses {
            if !(p.delay >= -slack && p.delay <= hi + slack)
                || !p.amplitude.re.is_finite()
                || !p.amplitude.im.is_finite()
            {
                return Err(Error::Parameter(alloc::format!(
                    "pulse delay {} outside [0, {hi}]",
                    p.delay
                )));
            }
        }
        let mut delays = self.delays();
        delays.sort_by(f64::total_cmp);
        if delays.windows(2).any(|w| w[1] - w[0] < waveform.duration() - slack) {
            return Err(Error::param("pulses closer than one pulse duration"));
        }
        Ok(())
    }
}

/// `Σ α_i g(t - τ_i)` on the Nyquist grid, noise free.
pub fn synthesize(waveform: &dyn Waveform, scene: &SparseScene) -> Result<CVector> {
    scene.validate(waveform)?;
    Ok(superpose(waveform, scene))
}

/// [`synthesize`] without the range and spacing checks.
pub fn superpose(waveform: &dyn Waveform, scene: &SparseScene) -> CVector {
    let mut f = CVector::zeros(waveform.len());
    for p in &scene.pulses {
        f += waveform.template(p.delay) * p.amplitude;
    }
    f
}

/// Distribution of random scenes for the Monte Carlo experiments.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct SceneDrawSpec {
    pub pulses: usize,
    /// Real and imaginary parts are uniform on `[-amp_max, amp_max]`.
    pub amp_max: f64,
    /// Each part is redrawn until its magnitude reaches this floor.
    pub amp_min_abs: f64,
    pub delay_min: f64,
    pub delay_max: f64,
    /// Minimum pairwise delay separation (one pulse duration).
    pub min_spacing: f64,
}

impl SceneDrawSpec {
    /// Three pulses spread over the whole admissible delay range of `spec`.
    pub fn for_chirp(spec: &ChirpSpec, pulses: usize) -> Self {
        SceneDrawSpec {
            pulses,
            amp_max: 10.0,
            amp_min_abs: 1.0,
            delay_min: 0.0,
            delay_max: spec.max_delay(),
            min_spacing: spec.duration,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.amp_min_abs >= 0.0 && self.amp_min_abs < self.amp_max) {
            return Err(Error::param("amp_min_abs must lie in [0, amp_max)"));
        }
        if !(self.delay_max > self.delay_min) || !self.delay_min.is_finite() || !self.delay_max.is_finite() {
            return Err(Error::param("empty delay range"));
        }
        if self.pulses as f64 * self.min_spacing >= self.delay_max - self.delay_min {
            return Err(Error::param("pulse spacing infeasible for the delay range"));
        }
        Ok(())
    }
}

impl Default for SceneDrawSpec {
    fn default() -> Self {
        SceneDrawSpec::for_chirp(&ChirpSpec::default(), 3)
    }
}

fn draw_part<R: Rng + ?Sized>(draw: &SceneDrawSpec, rng: &mut R) -> f64 {
    loop {
        let v = rng.random_range(-draw.amp_max..=draw.amp_max);
        if v.abs() >= draw.amp_min_abs {
            return v;
        }
    }
}

/// Random scene: amplitudes part-wise uniform with a magnitude floor, delays
/// uniform and redrawn as a whole set until every pair is at least
/// `min_spacing` apart. Pulses come back sorted by delay.
pub fn draw_scene<R: Rng + ?Sized>(draw: &SceneDrawSpec, rng: &mut R) -> Result<SparseScene> {
    draw.validate()?;
    if draw.pulses == 0 {
        return Ok(SparseScene::default());
    }
    let amplitudes: Vec<Complex64> = (0..draw.pulses)
        .map(|_| {
            let re = draw_part(draw, rng);
            let im = draw_part(draw, rng);
            Complex64::new(re, im)
        })
        .collect();

    let mut delays = alloc::vec![0.0; draw.pulses];
    for _ in 0..MAX_DRAW_ATTEMPTS {
        for d in delays.iter_mut() {
            *d = rng.random_range(draw.delay_min..=draw.delay_max);
        }
        delays.sort_by(f64::total_cmp);
        if delays.windows(2).all(|w| w[1] - w[0] >= draw.min_spacing) {
            let pulses = amplitudes
                .into_iter()
                .zip(delays.iter())
                .map(|(amplitude, &delay)| Pulse { amplitude, delay })
                .collect();
            return Ok(SparseScene { pulses });
        }
    }
    Err(Error::Infeasible {
        attempts: MAX_DRAW_ATTEMPTS,
    })
}
