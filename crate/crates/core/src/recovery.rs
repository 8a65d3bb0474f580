//! Band-excluded OMP with off-grid delay interpolation.

use alloc::vec::Vec;
use core::fmt;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::dictionary::{correlation_proxy, ArcModel, CompressedDictionary, Dictionary, PolarGeometry};
use crate::linalg::{lstsq, RANK_TOL};
use crate::sensing::MeasurementMatrix;
use crate::{CMatrix, CVector, Error, Result};

/// Off-grid refinement applied to each selected grid index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum InterpolationKind {
    /// Plain BOMP: the delay is the grid point.
    None,
    Parabolic,
    Polar,
}

impl fmt::Display for InterpolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InterpolationKind::None => "none",
            InterpolationKind::Parabolic => "parabolic",
            InterpolationKind::Polar => "polar",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct IbompConfig {
    /// Number of pulses `K`; also the number of iterations.
    pub pulses: usize,
    pub eta: f64,
    pub kind: InterpolationKind,
    pub arc_model: ArcModel,
    /// Stop early once `‖y_res‖ ≤ threshold·‖y‖`.
    pub residual_threshold: Option<f64>,
    /// Fall back to the grid atom whenever it leaves a smaller residual.
    pub keep_better_grid_atom: bool,
}

impl Default for IbompConfig {
    fn default() -> Self {
        IbompConfig {
            pulses: 3,
            eta: 0.0,
            kind: InterpolationKind::Polar,
            arc_model: ArcModel::default(),
            residual_threshold: None,
            keep_better_grid_atom: true,
        }
    }
}

impl IbompConfig {
    pub fn new(pulses: usize, kind: InterpolationKind) -> Self {
        IbompConfig {
            pulses,
            kind,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.pulses == 0 {
            return Err(Error::param("at least one pulse is required"));
        }
        if !(self.eta >= 0.0) {
            return Err(Error::param("eta must be non-negative"));
        }
        if let Some(t) = self.residual_threshold {
            if !(t >= 0.0) {
                return Err(Error::param("residual threshold must be non-negative"));
            }
        }
        Ok(())
    }
}

/// Output of any delay estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimationResult {
    /// Seconds, ascending.
    pub delays: Vec<f64>,
    pub amplitudes: Vec<Complex64>,
    /// `‖y − Φx̃‖` in the measurement domain.
    pub residual_norm: f64,
    /// Nyquist-rate reconstruction `x̃ = B a`.
    pub reconstructed: CVector,
    /// Set when fewer than `K` distinct delays were found and the list was padded.
    pub padded: bool,
}

impl EstimationResult {
    pub(crate) fn from_atoms(
        mut delays: Vec<f64>,
        amplitudes: Vec<Complex64>,
        atoms: &[CVector],
        residual_norm: f64,
        n: usize,
        padded: bool,
    ) -> Self {
        let mut reconstructed = CVector::zeros(n);
        for (b, a) in atoms.iter().zip(&amplitudes) {
            reconstructed += b * *a;
        }
        let mut order: Vec<usize> = (0..delays.len()).collect();
        order.sort_by(|&i, &j| delays[i].total_cmp(&delays[j]));
        let amplitudes = order.iter().map(|&i| amplitudes[i]).collect();
        delays.sort_by(f64::total_cmp);
        EstimationResult {
            delays,
            amplitudes,
            residual_norm,
            reconstructed,
            padded,
        }
    }
}

/// Vertex of the parabola through `R[n-1], R[n], R[n+1]` (indices mod `N`), in seconds.
pub fn parabolic_interpolate(proxy: &[f64], n: usize, delta: f64) -> f64 {
    let len = proxy.len();
    let (a, b, c) = (proxy[(n + len - 1) % len], proxy[n], proxy[(n + 1) % len]);
    let den = c - 2.0 * b + a;
    let grid = n as f64 * delta;
    if den.abs() < 1e-12 * b.abs() || den == 0.0 {
        return grid;
    }
    grid - 0.5 * delta * (c - a) / den
}

/// Fit `y_res ≈ α·(circle point at angle φ)` through the compressed atoms
/// `Φψ_{p-1}, Φψ_p, Φψ_{p+1}` and map `φ ∈ [−θ, θ]` to a delay in `[(p−1)Δ, (p+1)Δ]`.
pub fn polar_interpolate(
    y_res: &CVector,
    triple: [&CVector; 3],
    geom: &PolarGeometry,
    p: usize,
    delta: f64,
) -> Result<(f64, Complex64)> {
    let m = y_res.len();
    if let Some(bad) = triple.iter().find(|t| t.len() != m) {
        return Err(Error::Dimension {
            expected: m,
            actual: bad.len(),
        });
    }
    let basis = CMatrix::from_fn(m, 3, |row, col| {
        (0..3).map(|j| triple[j][row] * geom.a[(col, j)]).sum::<Complex64>()
    });
    let grid = p as f64 * delta;
    let ls = lstsq(&basis, y_res, RANK_TOL);
    if ls.rank < 3 {
        let single = CMatrix::from_column_slice(m, 1, triple[1].as_slice());
        let alpha = lstsq(&single, y_res, RANK_TOL).solution[0];
        return Ok((grid, alpha));
    }
    let c = &ls.solution;
    let phi = (c[2] * c[1].conj()).re.atan2(c[1].norm_sqr());
    let phi = phi.clamp(-geom.theta, geom.theta);
    Ok((grid + delta * phi / geom.theta, c[0]))
}

/// Iterate-level view of a pursuit in progress.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryState {
    pub residual: CVector,
    pub selected: Vec<usize>,
    pub delays: Vec<f64>,
    /// Nyquist-rate atoms at the estimated delays.
    pub basis: Vec<CVector>,
    pub compressed_basis: Vec<CVector>,
    pub coefficients: CVector,
}

/// Algorithm state for stepping through IBOMP one selection at a time.
pub struct Ibomp<'a> {
    y: &'a CVector,
    phi: &'a MeasurementMatrix,
    dict: &'a Dictionary,
    compressed: &'a CompressedDictionary,
    cfg: IbompConfig,
    geometry: Option<PolarGeometry>,
    state: RecoveryState,
}

struct Candidate {
    delay: f64,
    atom: CVector,
    compressed: CVector,
    coefficients: CVector,
    residual: CVector,
}

impl<'a> Ibomp<'a> {
    pub fn new(
        y: &'a CVector,
        phi: &'a MeasurementMatrix,
        dict: &'a Dictionary,
        compressed: &'a CompressedDictionary,
        cfg: IbompConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        if phi.cols() != dict.len() {
            return Err(Error::Dimension {
                expected: dict.len(),
                actual: phi.cols(),
            });
        }
        if y.len() != phi.rows() {
            return Err(Error::Dimension {
                expected: phi.rows(),
                actual: y.len(),
            });
        }
        if compressed.rows() != phi.rows() || compressed.len() != dict.len() {
            return Err(Error::param(
                "compressed dictionary does not match the measurement matrix",
            ));
        }
        let geometry = match cfg.kind {
            InterpolationKind::Polar => Some(dict.polar_geometry(cfg.arc_model)?),
            _ => None,
        };
        Ok(Ibomp {
            y,
            phi,
            dict,
            compressed,
            cfg,
            geometry,
            state: RecoveryState {
                residual: y.clone(),
                selected: Vec::new(),
                delays: Vec::new(),
                basis: Vec::new(),
                compressed_basis: Vec::new(),
                coefficients: CVector::zeros(0),
            },
        })
    }

    pub fn state(&self) -> &RecoveryState {
        &self.state
    }

    pub fn is_done(&self) -> bool {
        if self.state.selected.len() >= self.cfg.pulses {
            return true;
        }
        match self.cfg.residual_threshold {
            Some(t) => self.state.residual.norm() <= t * self.y.norm(),
            None => false,
        }
    }

    /// One selection, refinement and projection. Returns the chosen grid index.
    pub fn step(&mut self) -> Result<usize> {
        let proxy = correlation_proxy(&self.state.residual, self.compressed)?;
        let reach = self.dict.band_reach(self.cfg.eta);
        let n = self.dict.len();
        let excluded = |i: usize| {
            self.state.selected.iter().any(|&k| {
                let d = (i + n - k) % n;
                d.min(n - d) <= reach
            })
        };
        let index = proxy
            .iter()
            .enumerate()
            .filter(|(i, _)| !excluded(*i))
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .ok_or(Error::SelectionExhausted {
                selected: self.state.selected.len(),
            })?;

        let delta = self.dict.delta();
        let grid = index as f64 * delta;
        let delay = match self.cfg.kind {
            InterpolationKind::None => grid,
            InterpolationKind::Parabolic => parabolic_interpolate(&proxy, index, delta),
            InterpolationKind::Polar => {
                let p = index as isize;
                let cols = [
                    self.compressed.column(p - 1),
                    self.compressed.column(p),
                    self.compressed.column(p + 1),
                ];
                let geom = self.geometry.as_ref().expect("polar geometry");
                polar_interpolate(&self.state.residual, [&cols[0], &cols[1], &cols[2]], geom, index, delta)?.0
            }
        };

        let refined = self.candidate(delay);
        let chosen = if self.cfg.kind != InterpolationKind::None && self.cfg.keep_better_grid_atom {
            let on_grid = self.candidate(grid);
            match (refined, on_grid) {
                (Ok(r), Ok(g)) => {
                    if g.residual.norm() < r.residual.norm() {
                        g
                    } else {
                        r
                    }
                }
                (Ok(r), Err(_)) => r,
                (Err(_), Ok(g)) => g,
                (Err(e), Err(_)) => return Err(e),
            }
        } else {
            refined?
        };

        let s = &mut self.state;
        s.selected.push(index);
        s.delays.push(chosen.delay);
        s.basis.push(chosen.atom);
        s.compressed_basis.push(chosen.compressed);
        s.coefficients = chosen.coefficients;
        s.residual = chosen.residual;
        Ok(index)
    }

    fn candidate(&self, delay: f64) -> Result<Candidate> {
        let atom = self.dict.template(delay);
        let compressed = self.phi.apply(&atom)?;
        let m = self.y.len();
        let k = self.state.compressed_basis.len() + 1;
        let b = CMatrix::from_fn(m, k, |row, col| {
            if col + 1 == k {
                compressed[row]
            } else {
                self.state.compressed_basis[col][row]
            }
        });
        let ls = lstsq(&b, self.y, RANK_TOL);
        if ls.rank < k {
            return Err(Error::RankDeficient {
                rank: ls.rank,
                atoms: k,
            });
        }
        Ok(Candidate {
            delay,
            atom,
            compressed,
            coefficients: ls.solution,
            residual: ls.residual,
        })
    }

    pub fn run(mut self) -> Result<EstimationResult> {
        while !self.is_done() {
            self.step()?;
        }
        Ok(self.finish())
    }

    pub fn finish(self) -> EstimationResult {
        let s = self.state;
        let amplitudes = s.coefficients.iter().copied().collect();
        EstimationResult::from_atoms(
            s.delays,
            amplitudes,
            &s.basis,
            s.residual.norm(),
            self.dict.len(),
            false,
        )
    }
}

/// IBOMP with a precomputed `ΦΨ`.
pub fn ibomp_compressed(
    y: &CVector,
    phi: &MeasurementMatrix,
    dict: &Dictionary,
    compressed: &CompressedDictionary,
    cfg: IbompConfig,
) -> Result<EstimationResult> {
    Ibomp::new(y, phi, dict, compressed, cfg)?.run()
}

/// Runs exactly `cfg.pulses` iterations unless a residual threshold is set.
pub fn ibomp(y: &CVector, phi: &MeasurementMatrix, dict: &Dictionary, cfg: IbompConfig) -> Result<EstimationResult> {
    let compressed = dict.compress(phi)?;
    ibomp_compressed(y, phi, dict, &compressed, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::tau_mse;
    use crate::sensing::random_demodulator;
    use crate::signal::{draw_scene, superpose, ChirpSpec, Pulse, SceneDrawSpec, SparseScene};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn standard() -> Dictionary {
        Dictionary::build(&ChirpSpec::default()).unwrap()
    }

    const DELTA: f64 = 0.02e-6;

    #[test]
    fn parabolic_examples() {
        assert_eq!(
            parabolic_interpolate(&[0.0, 0.0, 1.0, 2.0, 1.0, 0.0][..], 3, DELTA),
            3.0 * DELTA
        );
        let v = parabolic_interpolate(&[0.0, 0.0, 0.0, 1.0, 1.0], 3, DELTA);
        assert!((v - 3.5 * DELTA).abs() < 1e-20);
        assert_eq!(parabolic_interpolate(&[1.0, 1.0, 1.0, 1.0, 1.0], 2, DELTA), 2.0 * DELTA);
        // neighbours wrap around: vertex of (−1, 1), (0, 2), (1, 0)
        let v = parabolic_interpolate(&[2.0, 0.0, 0.0, 0.0, 1.0], 0, DELTA);
        assert!((v + DELTA / 6.0).abs() < 1e-20);
    }

    fn triple(c: &CompressedDictionary, p: usize) -> [CVector; 3] {
        let p = p as isize;
        [c.column(p - 1), c.column(p), c.column(p + 1)]
    }

    fn refs(t: &[CVector; 3]) -> [&CVector; 3] {
        [&t[0], &t[1], &t[2]]
    }

    #[test]
    fn polar_on_grid_and_scaled() {
        let d = standard();
        let eye = MeasurementMatrix::identity(500).unwrap();
        let c = d.compress(&eye).unwrap();
        for model in [ArcModel::Hypersphere, ArcModel::Circumscribed] {
            let g = d.polar_geometry(model).unwrap();
            let t = triple(&c, 200);
            let (tau, alpha) = polar_interpolate(&t[1], refs(&t), &g, 200, DELTA).unwrap();
            assert!((tau - 200.0 * DELTA).abs() < 1e-8 * DELTA);
            assert!((alpha - Complex64::new(1.0, 0.0)).norm() < 1e-8);
            let (tau, alpha) =
                polar_interpolate(&(&t[1] * Complex64::new(2.5, 0.0)), refs(&t), &g, 200, DELTA).unwrap();
            assert!((tau - 200.0 * DELTA).abs() < 1e-8 * DELTA);
            assert!((alpha - Complex64::new(2.5, 0.0)).norm() < 1e-8);
        }
    }

    #[test]
    fn polar_half_cell_offset() {
        let d = standard();
        let eye = MeasurementMatrix::identity(500).unwrap();
        let c = d.compress(&eye).unwrap();
        let g = d.polar_geometry(ArcModel::default()).unwrap();
        let p = 200;
        for frac in [-0.5, -0.3, -0.1, 0.1, 0.3, 0.5] {
            let truth = (p as f64 + frac) * DELTA;
            let y = d.template(truth);
            for q in [p - 1, p, p + 1] {
                let t = triple(&c, q);
                let (tau, _) = polar_interpolate(&y, refs(&t), &g, q, DELTA).unwrap();
                if (q as f64 - p as f64 - frac).abs() <= 0.5 {
                    assert!(
                        (tau - truth).abs() < 0.1 * DELTA,
                        "{frac} at {q}: {}",
                        (tau - truth) / DELTA
                    );
                }
            }
        }
    }

    #[test]
    fn polar_rank_deficient_falls_back_to_grid() {
        let d = standard();
        let eye = MeasurementMatrix::identity(500).unwrap();
        let c = d.compress(&eye).unwrap();
        let g = d.polar_geometry(ArcModel::default()).unwrap();
        let a = c.column(10);
        let (tau, alpha) = polar_interpolate(&(&a * Complex64::new(0.0, 3.0)), [&a, &a, &a], &g, 10, DELTA).unwrap();
        assert_eq!(tau, 10.0 * DELTA);
        assert!((alpha - Complex64::new(0.0, 3.0)).norm() < 1e-10);
    }

    #[test]
    fn polar_is_scale_equivariant() {
        let d = standard();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let phi = random_demodulator(500, 0.5, &mut rng).unwrap();
        let c = d.compress(&phi).unwrap();
        let g = d.polar_geometry(ArcModel::default()).unwrap();
        let y = phi.apply(&d.template(123.37 * DELTA)).unwrap();
        let t = triple(&c, 123);
        let (tau, alpha) = polar_interpolate(&y, refs(&t), &g, 123, DELTA).unwrap();
        let gamma = Complex64::new(-1.7, 0.4);
        let (tau2, alpha2) = polar_interpolate(&(&y * gamma), refs(&t), &g, 123, DELTA).unwrap();
        assert!((tau - tau2).abs() < 1e-9 * DELTA);
        assert!((alpha * gamma - alpha2).norm() < 1e-9 * alpha2.norm());
    }

    #[test]
    fn single_on_grid_pulse() {
        let d = standard();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let phi = random_demodulator(500, 0.5, &mut rng).unwrap();
        let y = phi.apply(&d.atom(140).unwrap()).unwrap();
        let r = ibomp(&y, &phi, &d, IbompConfig::new(1, InterpolationKind::None)).unwrap();
        assert_eq!(r.delays, alloc::vec![140.0 * DELTA]);
        assert!((r.amplitudes[0] - Complex64::new(1.0, 0.0)).norm() < 1e-8);
    }

    #[test]
    fn exact_recovery_of_on_grid_scene() {
        let d = standard();
        let phi = MeasurementMatrix::identity(500).unwrap();
        let scene = SparseScene::new(alloc::vec![
            Pulse {
                amplitude: Complex64::new(3.0, -1.0),
                delay: 20.0 * DELTA
            },
            Pulse {
                amplitude: Complex64::new(-2.0, 5.0),
                delay: 150.0 * DELTA
            },
            Pulse {
                amplitude: Complex64::new(1.0, 1.0),
                delay: 320.0 * DELTA
            },
        ]);
        let f = superpose(d.waveform().as_ref(), &scene);
        let y = phi.apply(&f).unwrap();
        let r = ibomp(&y, &phi, &d, IbompConfig::new(3, InterpolationKind::None)).unwrap();
        assert_eq!(r.delays, scene.delays());
        assert!(r.residual_norm < 1e-8 * y.norm());
        assert!((r.reconstructed - f).norm() < 1e-8 * y.norm());
    }

    #[test]
    fn interpolation_ordering_at_full_rate() {
        let d = standard();
        let spec = ChirpSpec::default();
        let draw = SceneDrawSpec::for_chirp(&spec, 3);
        let phi = MeasurementMatrix::identity(500).unwrap();
        let c = d.compress(&phi).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut mse = [0.0; 3];
        let kinds = [
            InterpolationKind::Polar,
            InterpolationKind::Parabolic,
            InterpolationKind::None,
        ];
        let trials = 100;
        for _ in 0..trials {
            let scene = draw_scene(&draw, &mut rng).unwrap();
            let y = phi.apply(&superpose(d.waveform().as_ref(), &scene)).unwrap();
            for (acc, kind) in mse.iter_mut().zip(kinds) {
                let r = ibomp_compressed(&y, &phi, &d, &c, IbompConfig::new(3, kind)).unwrap();
                *acc += tau_mse(&scene.delays(), &r.delays).unwrap() / trials as f64;
            }
        }
        assert!(mse[0] < mse[1] && mse[1] < mse[2], "{mse:?}");
    }

    #[test]
    fn bomp_quantization_floor_single_pulse() {
        let d = standard();
        let phi = MeasurementMatrix::identity(500).unwrap();
        let c = d.compress(&phi).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let trials = 400;
        let mut total = 0.0;
        for _ in 0..trials {
            let delay = rng.random_range(0.0..8.98e-6);
            let scene = SparseScene::new(alloc::vec![Pulse {
                amplitude: Complex64::new(2.0, 1.0),
                delay
            }]);
            let y = phi.apply(&superpose(d.waveform().as_ref(), &scene)).unwrap();
            let r = ibomp_compressed(&y, &phi, &d, &c, IbompConfig::new(1, InterpolationKind::None)).unwrap();
            total += tau_mse(&scene.delays(), &r.delays).unwrap();
        }
        let mean = total / trials as f64;
        assert!((2.5e-5..=4e-5).contains(&mean), "{mean}");
    }

    #[test]
    fn stepwise_invariants() {
        let d = standard();
        let spec = ChirpSpec::default();
        let draw = SceneDrawSpec::for_chirp(&spec, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for kind in [
            InterpolationKind::None,
            InterpolationKind::Parabolic,
            InterpolationKind::Polar,
        ] {
            for _ in 0..5 {
                let phi = random_demodulator(500, 0.4, &mut rng).unwrap();
                let c = d.compress(&phi).unwrap();
                let scene = draw_scene(&draw, &mut rng).unwrap();
                let y = phi.apply(&superpose(d.waveform().as_ref(), &scene)).unwrap();
                let mut alg = Ibomp::new(&y, &phi, &d, &c, IbompConfig::new(3, kind)).unwrap();
                let mut last = y.norm();
                while !alg.is_done() {
                    alg.step().unwrap();
                    let s = alg.state();
                    let k = s.selected.len();
                    assert_eq!((s.delays.len(), s.basis.len(), s.coefficients.len()), (k, k, k));
                    let mut fit = CVector::zeros(y.len());
                    for (b, a) in s.compressed_basis.iter().zip(s.coefficients.iter()) {
                        fit += b * *a;
                    }
                    assert!((&y - fit - &s.residual).norm() <= 1e-9 * y.norm());
                    for b in &s.compressed_basis {
                        assert!(s.residual.dotc(b).norm() <= 1e-8 * y.norm() * b.norm());
                    }
                    let now = s.residual.norm();
                    assert!(now <= last + 1e-12 * y.norm());
                    last = now;
                    for (i, &a) in s.selected.iter().enumerate() {
                        for &b in &s.selected[i + 1..] {
                            assert!(!d.in_band(0.0, &[a], b));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn config_and_dimension_errors() {
        let d = standard();
        let phi = MeasurementMatrix::identity(500).unwrap();
        let y = CVector::zeros(500);
        assert!(ibomp(&y, &phi, &d, IbompConfig::new(0, InterpolationKind::None)).is_err());
        assert!(ibomp(&CVector::zeros(10), &phi, &d, IbompConfig::default()).is_err());
        // selections are pairwise more than 48 cells apart, so at most 10 fit
        let many = IbompConfig::new(11, InterpolationKind::None);
        let y = phi.apply(&d.atom(3).unwrap()).unwrap();
        assert!(matches!(
            ibomp(&y, &phi, &d, many),
            Err(Error::SelectionExhausted { .. })
        ));
    }

    #[test]
    fn residual_threshold_stops_early() {
        let d = standard();
        let phi = MeasurementMatrix::identity(500).unwrap();
        let y = phi.apply(&d.atom(60).unwrap()).unwrap();
        let cfg = IbompConfig {
            residual_threshold: Some(1e-6),
            ..IbompConfig::new(3, InterpolationKind::None)
        };
        let r = ibomp(&y, &phi, &d, cfg).unwrap();
        assert_eq!(r.delays.len(), 1);
    }
}
