//! Reconstruct-then-MUSIC estimators: TDE MUSIC on compressed measurements
//! and the uncompressed downsample + MUSIC control.

use alloc::vec::Vec;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::dictionary::{CompressedDictionary, Dictionary};
use crate::l1::{l1_reconstruct, L1SolverConfig};
use crate::linalg::{hermitian_eigen, lstsq, RANK_TOL};
use crate::music::{music_delays, MusicConfig, MusicEstimate, SpectralBand};
use crate::recovery::EstimationResult;
use crate::sensing::{downsample_indices, MeasurementMatrix};
use crate::{CMatrix, CVector, Error, Result};

/// Fraction of pulse energy kept by [`music_config`].
pub const MUSIC_BAND_ENERGY: f64 = 0.99;

/// Tikhonov weight relative to the largest singular value.
pub const DOWNSAMPLE_REGULARIZATION: f64 = 1e-6;

/// MUSIC settings matched to a dictionary: the pulse's 99 % energy band,
/// peak separation equal to the coherence band, a half-pulse wrap margin and
/// the latest delay a pulse can have.
pub fn music_config(dict: &Dictionary, pulses: usize) -> Result<MusicConfig> {
    let g = dict.atom(0)?;
    let support = g
        .iter()
        .rposition(|c| *c != Complex64::new(0.0, 0.0))
        .map_or(0, |i| i + 1);
    Ok(MusicConfig {
        pulses,
        band: Some(SpectralBand::energy_band(&g, MUSIC_BAND_ENERGY)?),
        min_separation: dict.band_reach(0.0) as f64,
        wrap_margin: 0.5 * support as f64,
        delay_limit: Some(dict.waveform().max_delay() / dict.delta()),
        ..MusicConfig::default()
    })
}

/// Least-squares amplitudes of `templates` (already mapped to the data domain) against `data`.
fn fit_amplitudes(
    data: &CVector,
    estimate: MusicEstimate,
    templates: Vec<CVector>,
    observed: impl Fn(&CVector) -> Result<CVector>,
) -> Result<EstimationResult> {
    let m = data.len();
    let k = templates.len();
    let seen: Vec<CVector> = templates.iter().map(&observed).collect::<Result<_>>()?;
    let b = CMatrix::from_fn(m, k, |r, c| seen[c][r]);
    let ls = lstsq(&b, data, RANK_TOL);
    let n = templates.first().map_or(0, |t| t.len());
    Ok(EstimationResult::from_atoms(
        estimate.delays,
        ls.solution.iter().copied().collect(),
        &templates,
        ls.residual.norm(),
        n,
        estimate.padded,
    ))
}

/// ℓ1 tap recovery, MUSIC on its inverse DFT, then amplitudes by least squares.
pub fn tde_music(
    y: &CVector,
    phi: &MeasurementMatrix,
    dict: &Dictionary,
    compressed: &CompressedDictionary,
    l1: &L1SolverConfig,
    music: &MusicConfig,
) -> Result<EstimationResult> {
    if compressed.rows() != phi.rows() || compressed.len() != dict.len() {
        return Err(Error::param(
            "compressed dictionary does not match the measurement matrix",
        ));
    }
    let h = l1_reconstruct(y, compressed.atoms(), l1)?;
    let estimate = music_delays(&h, music, dict.delta())?;
    let templates = estimate.delays.iter().map(|&t| dict.template(t)).collect();
    fit_amplitudes(y, estimate, templates, |t| phi.apply(t))
}

/// Row-decimated dictionary and its regularised pseudo-inverse.
#[derive(Debug, Clone)]
pub struct DownsampledDictionary {
    indices: Vec<usize>,
    /// `Dᴴ(DDᴴ + λ²I)⁻¹`, `N × M`.
    pinv: CMatrix,
    dict: Dictionary,
}

impl DownsampledDictionary {
    pub fn new(dict: &Dictionary, m: usize) -> Result<Self> {
        let indices = downsample_indices(dict.len(), m)?;
        let rows = dict.atoms().select_rows(indices.iter());
        let (lambda, u) = hermitian_eigen(&rows * rows.adjoint());
        let top = lambda.first().copied().unwrap_or(0.0).max(0.0);
        let reg = DOWNSAMPLE_REGULARIZATION * DOWNSAMPLE_REGULARIZATION * top;
        let mut scaled = u.clone();
        for (i, mut col) in scaled.column_iter_mut().enumerate() {
            col /= Complex64::new(lambda[i].max(0.0) + reg, 0.0);
        }
        let pinv = rows.adjoint() * scaled * u.adjoint();
        Ok(DownsampledDictionary {
            indices,
            pinv,
            dict: dict.clone(),
        })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn rows(&self) -> usize {
        self.indices.len()
    }

    /// Regularised tap estimate from decimated samples.
    pub fn taps(&self, f_low: &CVector) -> Result<CVector> {
        if f_low.len() != self.rows() {
            return Err(Error::Dimension {
                expected: self.rows(),
                actual: f_low.len(),
            });
        }
        Ok(&self.pinv * f_low)
    }

    fn decimate(&self, f: &CVector) -> CVector {
        CVector::from_iterator(self.rows(), self.indices.iter().map(|&k| f[k]))
    }
}

/// MUSIC on taps recovered from plainly decimated samples.
pub fn downsample_music(f_low: &CVector, ds: &DownsampledDictionary, music: &MusicConfig) -> Result<EstimationResult> {
    let h = ds.taps(f_low)?;
    let estimate = music_delays(&h, music, ds.dict.delta())?;
    let templates = estimate.delays.iter().map(|&t| ds.dict.template(t)).collect();
    fit_amplitudes(f_low, estimate, templates, |t| Ok(ds.decimate(t)))
}
