//! Random Demodulator acquisition, measurement noise and plain decimation.

use alloc::vec::Vec;
use core::ops::Range;

use nalgebra::DMatrix;
use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::{CMatrix, CVector, Error, Result};

/// Signed integrate-and-dump: row `m` adds the samples of block
/// `[⌊mN/M⌋, ⌊(m+1)N/M⌋)` after flipping each by a random sign.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MeasurementMatrix {
    signs: Vec<i8>,
    bounds: Vec<usize>,
}

/// `round(κN)`, the measurement count for a subsampling ratio.
pub fn measurement_count(n: usize, kappa: f64) -> Result<usize> {
    if !(kappa > 0.0 && kappa <= 1.0) {
        return Err(Error::Parameter(alloc::format!(
            "kappa must lie in (0, 1], got {kappa}"
        )));
    }
    let m = (kappa * n as f64).round() as usize;
    if m == 0 || m > n {
        return Err(Error::Parameter(alloc::format!(
            "kappa {kappa} gives {m} measurements for N = {n}"
        )));
    }
    Ok(m)
}

fn block_bounds(n: usize, m: usize) -> Vec<usize> {
    (0..=m).map(|i| i * n / m).collect()
}

impl MeasurementMatrix {
    /// Build from explicit chipping signs (`±1`, one per Nyquist sample).
    pub fn from_signs(signs: Vec<i8>, m: usize) -> Result<Self> {
        let n = signs.len();
        if m == 0 || m > n {
            return Err(Error::Parameter(alloc::format!("{m} measurements for N = {n}")));
        }
        if signs.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::param("chipping signs must be ±1"));
        }
        Ok(MeasurementMatrix {
            signs,
            bounds: block_bounds(n, m),
        })
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::from_signs(alloc::vec![1; n], n)
    }

    pub fn rows(&self) -> usize {
        self.bounds.len() - 1
    }

    pub fn cols(&self) -> usize {
        self.signs.len()
    }

    pub fn kappa(&self) -> f64 {
        self.rows() as f64 / self.cols() as f64
    }

    pub fn signs(&self) -> &[i8] {
        &self.signs
    }

    /// Columns summed by row `m`.
    pub fn row_support(&self, m: usize) -> Range<usize> {
        self.bounds[m]..self.bounds[m + 1]
    }

    pub fn entry(&self, m: usize, k: usize) -> i8 {
        if self.row_support(m).contains(&k) {
            self.signs[k]
        } else {
            0
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows(), self.cols(), |m, k| f64::from(self.entry(m, k)))
    }

    /// `Φf` in `O(N)`.
    pub fn apply(&self, f: &CVector) -> Result<CVector> {
        if f.len() != self.cols() {
            return Err(Error::Dimension {
                expected: self.cols(),
                actual: f.len(),
            });
        }
        Ok(CVector::from_fn(self.rows(), |m, _| self.row_dot(m, |k| f[k])))
    }

    /// `ΦX` column by column.
    pub fn apply_matrix(&self, x: &CMatrix) -> Result<CMatrix> {
        if x.nrows() != self.cols() {
            return Err(Error::Dimension {
                expected: self.cols(),
                actual: x.nrows(),
            });
        }
        Ok(CMatrix::from_fn(self.rows(), x.ncols(), |m, c| {
            self.row_dot(m, |k| x[(k, c)])
        }))
    }

    fn row_dot(&self, m: usize, f: impl Fn(usize) -> Complex64) -> Complex64 {
        self.row_support(m)
            .map(|k| if self.signs[k] > 0 { f(k) } else { -f(k) })
            .sum()
    }
}

/// Random Demodulator with `M = round(κN)` rows and equiprobable signs.
pub fn random_demodulator<R: Rng + ?Sized>(n: usize, kappa: f64, rng: &mut R) -> Result<MeasurementMatrix> {
    let m = measurement_count(n, kappa)?;
    let signs = (0..n).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
    MeasurementMatrix::from_signs(signs, m)
}

/// `y = Φf`.
pub fn measure(phi: &MeasurementMatrix, f: &CVector) -> Result<CVector> {
    phi.apply(f)
}

/// Additive white Gaussian measurement noise at a target SNR.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NoiseSpec {
    pub snr_db: f64,
    pub enabled: bool,
}

impl NoiseSpec {
    pub fn disabled() -> Self {
        NoiseSpec {
            snr_db: f64::INFINITY,
            enabled: false,
        }
    }

    pub fn snr(snr_db: f64) -> Self {
        NoiseSpec { snr_db, enabled: true }
    }

    /// Per-sample complex noise variance `σ²` for the signal `y`; zero when disabled.
    pub fn variance(&self, y: &CVector) -> Result<f64> {
        if !self.enabled {
            return Ok(0.0);
        }
        if !self.snr_db.is_finite() {
            return Err(Error::param("SNR must be finite when noise is enabled"));
        }
        let power = y.norm_squared() / y.len() as f64;
        if !(power > 0.0) {
            return Err(Error::param("cannot set an SNR for a zero signal"));
        }
        Ok(power / 10f64.powf(self.snr_db / 10.0))
    }
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self::disabled()
    }
}

/// `y + n` with `n ~ CN(0, σ²I)` and `σ² = (‖y‖²/M) / 10^(snr/10)`.
pub fn add_noise<R: Rng + ?Sized>(y: &CVector, spec: &NoiseSpec, rng: &mut R) -> Result<CVector> {
    let variance = spec.variance(y)?;
    if !spec.enabled {
        return Ok(y.clone());
    }
    let sd = (0.5 * variance).sqrt();
    Ok(y.map(|v| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        v + Complex64::new(sd * re, sd * im)
    }))
}

/// Kept sample positions `⌊kN/M⌋`.
pub fn downsample_indices(n: usize, m: usize) -> Result<Vec<usize>> {
    if m == 0 || m > n {
        return Err(Error::Parameter(alloc::format!("cannot keep {m} of {n} samples")));
    }
    Ok((0..m).map(|k| k * n / m).collect())
}

pub fn downsample(f: &CVector, m: usize) -> Result<CVector> {
    let idx = downsample_indices(f.len(), m)?;
    Ok(CVector::from_iterator(m, idx.iter().map(|&k| f[k])))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn random_signal(n: usize, r: &mut ChaCha8Rng) -> CVector {
        CVector::from_fn(n, |_, _| {
            Complex64::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0))
        })
    }

    #[test]
    fn full_rate_is_signed_identity() {
        let phi = random_demodulator(500, 1.0, &mut rng(1)).unwrap();
        let d = phi.to_dense();
        for m in 0..500 {
            for k in 0..500 {
                if m == k {
                    assert_eq!(d[(m, k)].abs(), 1.0);
                } else {
                    assert_eq!(d[(m, k)], 0.0);
                }
            }
        }
        let f = random_signal(500, &mut rng(2));
        let y = phi.apply(&f).unwrap();
        assert!((y.norm() - f.norm()).abs() < 1e-12);
        for k in 0..500 {
            assert_eq!(y[k], f[k] * f64::from(phi.signs()[k]));
        }
    }

    #[test]
    fn half_rate_structure() {
        let phi = random_demodulator(500, 0.5, &mut rng(3)).unwrap();
        assert_eq!(phi.rows(), 250);
        let d = phi.to_dense();
        for m in 0..250 {
            assert_eq!(d.row(m).iter().filter(|v| **v != 0.0).count(), 2);
        }
        for k in 0..500 {
            assert_eq!(d.column(k).iter().map(|v| v.abs()).sum::<f64>(), 1.0);
        }
    }

    #[test]
    fn floor_rule_blocks() {
        let phi = MeasurementMatrix::from_signs(alloc::vec![1; 10], 3).unwrap();
        assert_eq!(phi.row_support(0), 0..3);
        assert_eq!(phi.row_support(1), 3..6);
        assert_eq!(phi.row_support(2), 6..10);
    }

    #[test]
    fn floor_rule_matches_hand_evaluation() {
        // ⌊10/3⌋ = 3, ⌊20/3⌋ = 6: rows {0,1,2}, {3,4,5}, {6..9}
        let b = block_bounds(10, 3);
        assert_eq!(b, alloc::vec![0, 3, 6, 10]);
    }

    #[test]
    fn invalid_sizes() {
        assert!(random_demodulator(500, 0.0, &mut rng(1)).is_err());
        assert!(random_demodulator(500, 1.2, &mut rng(1)).is_err());
        assert!(random_demodulator(10, 0.01, &mut rng(1)).is_err());
        assert!(MeasurementMatrix::from_signs(alloc::vec![1, 0, 1], 1).is_err());
        let phi = MeasurementMatrix::identity(4).unwrap();
        assert!(phi.apply(&CVector::zeros(5)).is_err());
    }

    #[test]
    fn measure_matches_loop_oracle() {
        let mut r = rng(4);
        let phi = random_demodulator(8, 0.25, &mut r).unwrap();
        assert_eq!(phi.rows(), 2);
        let f = random_signal(8, &mut r);
        let mut expect = [Complex64::new(0.0, 0.0); 2];
        for (m, e) in expect.iter_mut().enumerate() {
            for k in (m * 4)..(m * 4 + 4) {
                *e += f[k] * f64::from(phi.signs()[k]);
            }
        }
        let y = phi.apply(&f).unwrap();
        assert!((y[0] - expect[0]).norm() < 1e-14 && (y[1] - expect[1]).norm() < 1e-14);
        assert_eq!(phi.apply(&CVector::zeros(8)).unwrap(), CVector::zeros(2));
        let dense = phi.to_dense().map(|v| Complex64::new(v, 0.0)) * &f;
        assert!((dense - y).norm() < 1e-14);
    }

    #[test]
    fn noise_disabled_and_vanishing() {
        let mut r = rng(5);
        let y = random_signal(250, &mut r);
        assert_eq!(add_noise(&y, &NoiseSpec::disabled(), &mut r).unwrap(), y);
        let quiet = add_noise(&y, &NoiseSpec::snr(300.0), &mut r).unwrap();
        assert!((&quiet - &y).norm() <= 1e-10 * y.norm());
        assert!(add_noise(&CVector::zeros(4), &NoiseSpec::snr(10.0), &mut r).is_err());
        assert!(add_noise(&y, &NoiseSpec::snr(f64::NAN), &mut r).is_err());
    }

    #[test]
    fn noise_power_at_zero_db() {
        let mut r = rng(6);
        let y = random_signal(250, &mut r);
        let draws = 10_000;
        let mut total = 0.0;
        let mut split = [0.0; 2];
        for _ in 0..draws {
            let n = add_noise(&y, &NoiseSpec::snr(0.0), &mut r).unwrap() - &y;
            total += n.norm_squared();
            split[0] += n.iter().map(|c| c.re * c.re).sum::<f64>();
            split[1] += n.iter().map(|c| c.im * c.im).sum::<f64>();
        }
        let mean = total / draws as f64;
        assert!((mean / y.norm_squared() - 1.0).abs() < 0.05);
        assert!((split[0] / split[1] - 1.0).abs() < 0.05);
    }

    #[test]
    fn downsample_cases() {
        let f = CVector::from_fn(8, |k, _| Complex64::new(k as f64, 0.0));
        assert_eq!(downsample(&f, 8).unwrap(), f);
        let d = downsample(&f, 4).unwrap();
        assert_eq!(
            d.iter().map(|c| c.re).collect::<Vec<_>>(),
            alloc::vec![0.0, 2.0, 4.0, 6.0]
        );
        assert_eq!(
            downsample_indices(500, 250).unwrap(),
            (0..250).map(|k| 2 * k).collect::<Vec<_>>()
        );
        assert!(downsample(&f, 0).is_err());
        assert!(downsample(&f, 9).is_err());
    }
}
