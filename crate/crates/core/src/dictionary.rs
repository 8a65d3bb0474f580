//! Circulant dictionary of delayed pulses, coherence bands and the arc
//! geometry used by polar interpolation.

use alloc::sync::Arc;
use alloc::vec::Vec;

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::sensing::MeasurementMatrix;
use crate::signal::{Chirp, ChirpSpec, Waveform};
use crate::{CMatrix, CVector, Error, Result};

/// Relative slack on coherence comparisons, in units of `‖ψ_0‖²`.
pub const COHERENCE_TOL: f64 = 1e-9;

/// `N` circular shifts of the sampled pulse, one per grid delay `nΔ`.
#[derive(Clone)]
pub struct Dictionary {
    waveform: Arc<dyn Waveform>,
    atoms: CMatrix,
    /// `⟨ψ_0, ψ_l⟩` for every lag `l`.
    lag: Vec<Complex64>,
}

impl core::fmt::Debug for Dictionary {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("Dictionary")
            .field("len", &self.len())
            .field("delta", &self.delta())
            .finish_non_exhaustive()
    }
}

impl Dictionary {
    pub fn build(spec: &ChirpSpec) -> Result<Self> {
        Ok(Self::from_waveform(Chirp::new(*spec)?.into_shared()))
    }

    pub fn from_waveform(waveform: Arc<dyn Waveform>) -> Self {
        let n = waveform.len();
        let g = waveform.template(0.0);
        let atoms = CMatrix::from_fn(n, n, |k, col| g[(k + n - col) % n]);
        let lag = (0..n).map(|l| g.dotc(&atoms.column(l))).collect();
        Dictionary { waveform, atoms, lag }
    }

    pub fn len(&self) -> usize {
        self.atoms.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Grid spacing in seconds.
    pub fn delta(&self) -> f64 {
        self.waveform.delta()
    }

    pub fn waveform(&self) -> &Arc<dyn Waveform> {
        &self.waveform
    }

    pub fn atoms(&self) -> &CMatrix {
        &self.atoms
    }

    pub fn atom(&self, n: usize) -> Result<CVector> {
        self.check(n)?;
        Ok(self.atoms.column(n).into_owned())
    }

    /// Pulse at a continuous delay; unlike the atoms it does not wrap around.
    pub fn template(&self, delay: f64) -> CVector {
        self.waveform.template(delay)
    }

    /// `‖ψ_0‖²`.
    pub fn energy(&self) -> f64 {
        self.lag[0].re
    }

    /// `⟨ψ_i, ψ_k⟩`.
    pub fn inner(&self, i: usize, k: usize) -> Result<Complex64> {
        self.check(i)?;
        self.check(k)?;
        let n = self.len();
        Ok(self.lag[(k + n - i) % n])
    }

    /// `μ(i, k) = |⟨ψ_i, ψ_k⟩|`.
    pub fn coherence(&self, i: usize, k: usize) -> Result<f64> {
        Ok(self.inner(i, k)?.norm())
    }

    /// Largest lag `l ≤ N/2` with `μ(0, l) > eta`; the band is the window of
    /// this half-width. Coherence can vanish at isolated lags inside the
    /// overlap region (the chirp's autocorrelation is exactly zero at half the
    /// pulse length), so the window is filled rather than left with holes.
    pub fn band_reach(&self, eta: f64) -> usize {
        let threshold = eta + COHERENCE_TOL * self.energy();
        (1..=self.len() / 2)
            .rev()
            .find(|&l| self.lag[l].norm() > threshold)
            .unwrap_or(0)
    }

    /// `B_η(S)`: every index within [`band_reach`](Self::band_reach) of some
    /// member of `selected`, which always includes `selected`. Sorted ascending.
    pub fn band(&self, eta: f64, selected: &[usize]) -> Result<Vec<usize>> {
        if !(eta >= 0.0) {
            return Err(Error::param("eta must be non-negative"));
        }
        for &k in selected {
            self.check(k)?;
        }
        let reach = self.band_reach(eta);
        Ok((0..self.len()).filter(|&i| self.within(reach, selected, i)).collect())
    }

    /// Membership test equivalent to `band(eta, selected).contains(&i)`.
    pub fn in_band(&self, eta: f64, selected: &[usize], i: usize) -> bool {
        self.within(self.band_reach(eta), selected, i)
    }

    fn within(&self, reach: usize, selected: &[usize], i: usize) -> bool {
        let n = self.len();
        selected.iter().any(|&k| {
            let d = (i + n - k) % n;
            d.min(n - d) <= reach
        })
    }

    /// `ΦΨ`, computed once per measurement matrix and shared by all estimators.
    pub fn compress(&self, phi: &MeasurementMatrix) -> Result<CompressedDictionary> {
        Ok(CompressedDictionary {
            atoms: phi.apply_matrix(&self.atoms)?,
        })
    }

    /// Circle-arc model through the atoms adjacent to any grid index.
    pub fn polar_geometry(&self, model: ArcModel) -> Result<PolarGeometry> {
        if self.len() < 3 {
            return Err(Error::Geometry("need at least three atoms".into()));
        }
        let r0 = self.energy().sqrt();
        let rho1 = self.lag[1].re;
        let (radius, theta) = match model {
            ArcModel::Hypersphere => {
                let c = rho1 / (r0 * r0);
                (r0, c.clamp(-1.0, 1.0).acos())
            }
            ArcModel::Circumscribed => {
                let rho2 = self.lag[2].re;
                let d1 = (2.0 * r0 * r0 - 2.0 * rho1).max(0.0).sqrt();
                let d2 = (2.0 * r0 * r0 - 2.0 * rho2).max(0.0).sqrt();
                let ratio = d2 / (2.0 * d1);
                if !(ratio > 0.0 && ratio < 1.0) {
                    return Err(Error::Geometry(alloc::format!(
                        "adjacent atoms are not on an arc (chord ratio {ratio})"
                    )));
                }
                let theta = 2.0 * ratio.acos();
                (d1 / (2.0 * (0.5 * theta).sin()), theta)
            }
        };
        PolarGeometry::new(radius, theta, model)
    }

    fn check(&self, i: usize) -> Result<()> {
        if i < self.len() {
            Ok(())
        } else {
            Err(Error::Index {
                index: i,
                len: self.len(),
            })
        }
    }
}

/// The atoms seen through a measurement matrix, `M × N`.
#[derive(Debug, Clone, PartialEq)]
pub struct CompressedDictionary {
    atoms: CMatrix,
}

impl CompressedDictionary {
    pub fn from_matrix(atoms: CMatrix) -> Self {
        CompressedDictionary { atoms }
    }

    pub fn atoms(&self) -> &CMatrix {
        &self.atoms
    }

    pub fn rows(&self) -> usize {
        self.atoms.nrows()
    }

    pub fn len(&self) -> usize {
        self.atoms.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `Φψ_n` with `n` taken modulo `N`.
    pub fn column(&self, n: isize) -> CVector {
        let len = self.len() as isize;
        self.atoms.column(n.rem_euclid(len) as usize).into_owned()
    }
}

/// `R̂[n] = |⟨y_res, Φψ_n⟩|` for every grid index.
pub fn correlation_proxy(y_res: &CVector, compressed: &CompressedDictionary) -> Result<Vec<f64>> {
    if y_res.len() != compressed.rows() {
        return Err(Error::Dimension {
            expected: compressed.rows(),
            actual: y_res.len(),
        });
    }
    Ok(compressed.atoms().ad_mul(y_res).iter().map(|c| c.norm()).collect())
}

/// How three consecutive atoms are placed on a circle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum ArcModel {
    /// Radius `‖ψ‖` about the origin, angle `arccos(Re⟨ψ_p, ψ_{p+1}⟩ / r²)`.
    Hypersphere,
    /// The unique circle through `ψ_{p-1}`, `ψ_p`, `ψ_{p+1}`, fitted from the
    /// chord lengths at lags one and two. Far less biased for strongly
    /// curved manifolds such as the chirp's.
    #[default]
    Circumscribed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarGeometry {
    pub r: f64,
    pub theta: f64,
    /// Maps `[ψ_{p-1}, ψ_p, ψ_{p+1}]` to (center, radial, tangential) directions.
    pub a: Matrix3<f64>,
    pub model: ArcModel,
}

impl PolarGeometry {
    pub fn new(r: f64, theta: f64, model: ArcModel) -> Result<Self> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::Geometry(alloc::format!("radius {r}")));
        }
        let eps = 1e-12;
        if !(theta > eps && theta < core::f64::consts::PI - eps) {
            return Err(Error::Geometry(alloc::format!("arc angle {theta} is degenerate")));
        }
        let a = Self::arc_points(r, theta)
            .try_inverse()
            .ok_or_else(|| Error::Geometry("singular arc matrix".into()))?;
        Ok(PolarGeometry { r, theta, a, model })
    }

    /// Rows: the three atoms in (center, radial, tangential) coordinates.
    pub fn arc_points(r: f64, theta: f64) -> Matrix3<f64> {
        let (s, c) = theta.sin_cos();
        Matrix3::from_rows(&[
            Vector3::new(1.0, r * c, -r * s).transpose(),
            Vector3::new(1.0, r, 0.0).transpose(),
            Vector3::new(1.0, r * c, r * s).transpose(),
        ])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensing::random_demodulator;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn standard() -> Dictionary {
        Dictionary::build(&ChirpSpec::default()).unwrap()
    }

    #[test]
    fn circulant_columns() {
        let d = standard();
        let g = crate::chirp_template(&ChirpSpec::default(), 0.0).unwrap();
        assert_eq!(d.atom(0).unwrap(), g);
        for n in [1usize, 7, 49, 250, 451, 499] {
            let col = d.atom(n).unwrap();
            for k in 0..500 {
                assert_eq!(col[k], g[(k + 500 - n) % 500]);
            }
        }
        assert!(d.atom(500).is_err());
    }

    #[test]
    fn gram_diagonal_constant() {
        let d = standard();
        let e0 = d.atoms().column(0).norm_squared();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let n = rand::Rng::random_range(&mut rng, 0..500);
            let col = d.atoms().column(n);
            assert!((col.dotc(&col).re - e0).abs() < 1e-13);
        }
    }

    #[test]
    fn coherence_examples() {
        let d = standard();
        assert!((d.coherence(17, 17).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(d.coherence(3, 90).unwrap(), d.coherence(90, 3).unwrap());
        for k in 50..=450 {
            assert!(d.coherence(0, k).unwrap() < 1e-12, "lag {k}");
        }
        // direct inner products agree with the lag table
        let direct = d.atoms().column(5).dotc(&d.atoms().column(40)).norm();
        assert!((direct - d.coherence(5, 40).unwrap()).abs() < 1e-13);
        assert!(matches!(d.coherence(0, 500), Err(Error::Index { .. })));
    }

    /// Indices whose circular support overlaps that of `k`.
    fn support_overlap(d: &Dictionary, k: usize) -> Vec<usize> {
        let g = d.atom(0).unwrap();
        let support: Vec<usize> = (0..500).filter(|&i| g[i] != Complex64::new(0.0, 0.0)).collect();
        let occupied = |shift: usize| -> Vec<usize> { support.iter().map(|s| (s + shift) % 500).collect() };
        let mine = occupied(k);
        (0..500)
            .filter(|&i| occupied(i).iter().any(|x| mine.contains(x)))
            .collect()
    }

    #[test]
    fn zero_band_is_support_overlap_window() {
        let d = standard();
        assert!(d.band(0.0, &[]).unwrap().is_empty());
        for k in [0usize, 120, 480] {
            let b = d.band(0.0, &[k]).unwrap();
            assert_eq!(b, support_overlap(&d, k));
            // the open window leaves 49 nonzero samples: width 2·49 − 1
            assert_eq!(b.len(), 97);
            // contiguous circular window centred on k
            for i in &b {
                let d = (i + 500 - k) % 500;
                assert!(d.min(500 - d) <= 48);
            }
            for i in 0..500 {
                assert_eq!(d.in_band(0.0, &[k], i), b.contains(&i));
            }
        }
        assert_eq!(d.band(1.0, &[33]).unwrap(), alloc::vec![33]);
        // an isolated coherence zero inside the overlap does not punch a hole
        assert!(d.coherence(0, 25).unwrap() < 1e-12);
        assert!(d.in_band(0.0, &[0], 25));
        assert!(d.band(-1.0, &[1]).is_err());
    }

    #[test]
    fn geometry_examples() {
        let d = standard();
        let hyper = d.polar_geometry(ArcModel::Hypersphere).unwrap();
        assert!((hyper.r - 1.0).abs() < 1e-12);
        let cos = d.atoms().column(0).dotc(&d.atoms().column(1)).re;
        assert!((hyper.theta - cos.acos()).abs() < 1e-12);

        // every adjacent pair subtends the same angle
        let angles: Vec<f64> = (0..500)
            .map(|p| {
                let a = d.atoms().column(p);
                let b = d.atoms().column((p + 1) % 500);
                (a.dotc(&b).re / (a.norm() * b.norm())).acos()
            })
            .collect();
        let spread = angles.iter().cloned().fold(f64::MIN, f64::max) - angles.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread < 1e-10);

        for model in [ArcModel::Hypersphere, ArcModel::Circumscribed] {
            let g = d.polar_geometry(model).unwrap();
            let prod = g.a * PolarGeometry::arc_points(g.r, g.theta);
            assert!((prod - Matrix3::identity()).abs().max() < 1e-12);
        }
    }

    #[test]
    fn circumscribed_circle_passes_through_three_atoms() {
        // Chord lengths between the atoms equal those of the arc points.
        let d = standard();
        let g = d.polar_geometry(ArcModel::Circumscribed).unwrap();
        let p = PolarGeometry::arc_points(g.r, g.theta);
        let chord = |i: usize, j: usize| (p.row(i) - p.row(j)).norm();
        let real_dist = |l: usize| (2.0 - 2.0 * d.atoms().column(0).dotc(&d.atoms().column(l)).re).sqrt();
        assert!((chord(0, 1) - real_dist(1)).abs() < 1e-12);
        assert!((chord(1, 2) - real_dist(1)).abs() < 1e-12);
        assert!((chord(0, 2) - real_dist(2)).abs() < 1e-12);
    }

    #[test]
    fn degenerate_geometry_rejected() {
        assert!(matches!(
            PolarGeometry::new(1.0, 0.0, ArcModel::Hypersphere),
            Err(Error::Geometry(_))
        ));
        assert!(PolarGeometry::new(1.0, core::f64::consts::PI, ArcModel::Hypersphere).is_err());
        assert!(PolarGeometry::new(0.0, 0.5, ArcModel::Hypersphere).is_err());
    }

    #[test]
    fn proxy_examples() {
        let d = standard();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let eye = random_demodulator(500, 1.0, &mut rng).unwrap();
        let c = d.compress(&eye).unwrap();
        assert!(correlation_proxy(&CVector::zeros(500), &c)
            .unwrap()
            .iter()
            .all(|&v| v == 0.0));
        assert!(correlation_proxy(&CVector::zeros(3), &c).is_err());
        let r = correlation_proxy(&c.column(77), &c).unwrap();
        assert_eq!(argmax(&r), 77);
    }

    #[test]
    fn proxy_peak_survives_half_rate_compression() {
        let d = standard();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut hits = 0;
        for _ in 0..100 {
            let phi = random_demodulator(500, 0.5, &mut rng).unwrap();
            let c = d.compress(&phi).unwrap();
            let p = rand::Rng::random_range(&mut rng, 0..500);
            let y = phi.apply(&d.atom(p).unwrap()).unwrap();
            if argmax(&correlation_proxy(&y, &c).unwrap()) == p {
                hits += 1;
            }
        }
        assert!(hits >= 99, "{hits}");
    }

    fn argmax(v: &[f64]) -> usize {
        v.iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap()
    }
}
