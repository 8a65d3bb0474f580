//! MUSIC delay estimation from a tap vector.
//!
//! The inverse DFT of a tap vector `h = Σ α_k e_{n_k}` is a sum of complex
//! exponentials at normalised frequencies `n_k/N`, so delays become spectral
//! lines.

use alloc::vec::Vec;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::linalg::{hermitian_eigen, idft, twiddles};
use crate::{CMatrix, CVector, Error, Result};

/// Circular window `start..start+len` of inverse-DFT bins used as snapshots.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SpectralBand {
    pub start: usize,
    pub len: usize,
}

impl SpectralBand {
    pub fn full(n: usize) -> Self {
        SpectralBand { start: 0, len: n }
    }

    /// Shortest circular window holding `fraction` of the energy of `idft(template)`.
    ///
    /// Bins where the pulse has almost no energy carry nothing but
    /// amplified reconstruction error, so MUSIC is restricted to this band.
    pub fn energy_band(template: &CVector, fraction: f64) -> Result<Self> {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(Error::param("energy fraction must lie in (0, 1]"));
        }
        let n = template.len();
        let e: Vec<f64> = idft(template).iter().map(|c| c.norm_sqr()).collect();
        let total: f64 = e.iter().sum();
        if !(total > 0.0) {
            return Err(Error::param("template has no energy"));
        }
        let mut prefix = alloc::vec![0.0; 2 * n + 1];
        for i in 0..2 * n {
            prefix[i + 1] = prefix[i] + e[i % n];
        }
        for len in 1..=n {
            let best = (0..n)
                .map(|s| (s, prefix[s + len] - prefix[s]))
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .expect("non-empty");
            if best.1 >= fraction * total * (1.0 - 1e-12) {
                return Ok(SpectralBand { start: best.0, len });
            }
        }
        Ok(Self::full(n))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct MusicConfig {
    /// Model order `K`.
    pub pulses: usize,
    /// Snapshot length `L`; `None` means half the band.
    pub subarray_length: Option<usize>,
    /// Pseudospectrum points per Nyquist cell.
    pub grid_oversampling: usize,
    /// Bins used as data; `None` means all of them.
    pub band: Option<SpectralBand>,
    /// Peaks closer than this many Nyquist cells are merged.
    pub min_separation: f64,
    /// Peaks within this many cells below `N` are read as small negative delays.
    pub wrap_margin: f64,
    /// Latest admissible delay in cells; later peaks outside the wrap margin are ignored.
    pub delay_limit: Option<f64>,
}

impl Default for MusicConfig {
    fn default() -> Self {
        MusicConfig {
            pulses: 3,
            subarray_length: None,
            grid_oversampling: 20,
            band: None,
            min_separation: 1.0,
            wrap_margin: 0.0,
            delay_limit: None,
        }
    }
}

impl MusicConfig {
    pub fn new(pulses: usize) -> Self {
        MusicConfig {
            pulses,
            ..Self::default()
        }
    }

    fn snapshot_length(&self, band_len: usize) -> usize {
        self.subarray_length.unwrap_or(band_len / 2)
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let band = self.band.unwrap_or(SpectralBand::full(n));
        if band.len == 0 || band.len > n || band.start >= n.max(1) {
            return Err(Error::param("spectral band outside the record"));
        }
        let l = self.snapshot_length(band.len);
        if !(self.pulses >= 1 && self.pulses < l && l < band.len) {
            return Err(Error::Parameter(alloc::format!(
                "need 1 ≤ K < L < band length, got K = {}, L = {l}, band = {}",
                self.pulses,
                band.len
            )));
        }
        if self.grid_oversampling == 0 {
            return Err(Error::param("grid_oversampling must be at least 1"));
        }
        if !(self.min_separation >= 0.0 && self.wrap_margin >= 0.0) {
            return Err(Error::param("separation and wrap margin must be non-negative"));
        }
        if self.delay_limit.is_some_and(|d| !(d >= 0.0)) {
            return Err(Error::param("delay limit must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MusicEstimate {
    /// Seconds, ascending.
    pub delays: Vec<f64>,
    /// Fewer than `K` separated peaks existed; the strongest was repeated.
    pub padded: bool,
}

/// Forward-backward averaged sample covariance of the length-`l` windows of `z`.
fn covariance(z: &[Complex64], l: usize) -> CMatrix {
    let snapshots = z.len() - l + 1;
    let mut r = CMatrix::zeros(l, l);
    for s in 0..snapshots {
        let x = &z[s..s + l];
        for i in 0..l {
            let xi = x[i];
            for j in 0..=i {
                r[(i, j)] += xi * x[j].conj();
            }
        }
    }
    for i in 0..l {
        for j in 0..i {
            r[(j, i)] = r[(i, j)].conj();
        }
    }
    r /= Complex64::new(snapshots as f64, 0.0);
    let mut fb = r.clone();
    for i in 0..l {
        for j in 0..l {
            fb[(i, j)] = 0.5 * (r[(i, j)] + r[(l - 1 - i, l - 1 - j)].conj());
        }
    }
    fb
}

/// `1 / ‖E_nᴴ a(f)‖²` on `g` uniform frequencies, via the signal subspace.
pub fn pseudospectrum(signal: &CMatrix, g: usize) -> Vec<f64> {
    let l = signal.nrows();
    let tw = twiddles(g);
    (0..g)
        .map(|i| {
            let captured: f64 = signal
                .column_iter()
                .map(|e| {
                    e.iter()
                        .enumerate()
                        .map(|(k, v)| v.conj() * tw[(i * k) % g])
                        .sum::<Complex64>()
                        .norm_sqr()
                })
                .sum();
            1.0 / (l as f64 - captured).max(1e-15)
        })
        .collect()
}

/// Delays of the `K` strongest spectral lines of `idft(h)`.
pub fn music_delays(h: &CVector, cfg: &MusicConfig, delta: f64) -> Result<MusicEstimate> {
    let n = h.len();
    cfg.validate(n)?;
    let band = cfg.band.unwrap_or(SpectralBand::full(n));
    let z_full = idft(h);
    let z: Vec<Complex64> = (0..band.len).map(|i| z_full[(band.start + i) % n]).collect();
    let l = cfg.snapshot_length(band.len);

    let (_, vectors) = hermitian_eigen(covariance(&z, l));
    let signal = vectors.columns(0, cfg.pulses).into_owned();
    let g = n * cfg.grid_oversampling;
    let p = pseudospectrum(&signal, g);

    let over = cfg.grid_oversampling as f64;
    let admissible = |i: usize| {
        let cells = i as f64 / over;
        cfg.delay_limit
            .is_none_or(|d| cells <= d + 0.5 || cells > n as f64 - cfg.wrap_margin)
    };
    let mut peaks: Vec<usize> = (0..g)
        .filter(|&i| admissible(i) && p[i] >= p[(i + g - 1) % g] && p[i] >= p[(i + 1) % g])
        .collect();
    peaks.sort_by(|&a, &b| p[b].total_cmp(&p[a]).then(a.cmp(&b)));
    let sep = cfg.min_separation * cfg.grid_oversampling as f64;
    let mut chosen: Vec<usize> = Vec::with_capacity(cfg.pulses);
    for i in peaks {
        let clear = chosen.iter().all(|&j| {
            let d = (i + g - j) % g;
            d.min(g - d) as f64 > sep
        });
        if clear {
            chosen.push(i);
            if chosen.len() == cfg.pulses {
                break;
            }
        }
    }
    let padded = chosen.len() < cfg.pulses;
    if chosen.is_empty() {
        chosen.push(0);
    }
    while chosen.len() < cfg.pulses {
        chosen.push(chosen[0]);
    }

    let mut delays: Vec<f64> = chosen
        .iter()
        .map(|&i| {
            let (a, b, c) = (p[(i + g - 1) % g].ln(), p[i].ln(), p[(i + 1) % g].ln());
            let den = a - 2.0 * b + c;
            let offset = if den.abs() > 1e-15 {
                (0.5 * (a - c) / den).clamp(-0.5, 0.5)
            } else {
                0.0
            };
            let mut cells = (i as f64 + offset) / cfg.grid_oversampling as f64;
            if cells > n as f64 - cfg.wrap_margin {
                cells -= n as f64;
            }
            cells * delta
        })
        .collect();
    delays.sort_by(f64::total_cmp);
    Ok(MusicEstimate { delays, padded })
}
