//! Basis pursuit and basis pursuit denoising by ADMM with exact projection
//! onto the data-consistency set.

use alloc::boxed::Box;
use alloc::vec::Vec;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::linalg::{hermitian_eigen, RANK_TOL};
use crate::{CMatrix, CVector, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum L1Mode {
    /// `min ‖x‖₁` s.t. `Ax = y`.
    Equality,
    /// `min ‖x‖₁` s.t. `‖Ax − y‖₂ ≤ ε`.
    Denoising,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct L1SolverConfig {
    pub mode: L1Mode,
    /// Residual budget, denoising only.
    pub epsilon: f64,
    pub max_iterations: usize,
    /// Stop when both the iterate change and the splitting gap fall below
    /// this fraction of `‖x‖`.
    pub tolerance: f64,
    /// Soft threshold as a fraction of the largest least-norm coefficient.
    pub threshold_ratio: f64,
}

impl Default for L1SolverConfig {
    fn default() -> Self {
        L1SolverConfig {
            mode: L1Mode::Equality,
            epsilon: 0.0,
            max_iterations: 5000,
            tolerance: 1e-4,
            threshold_ratio: 3e-3,
        }
    }
}

impl L1SolverConfig {
    pub fn denoising(epsilon: f64) -> Self {
        L1SolverConfig {
            mode: L1Mode::Denoising,
            epsilon,
            ..Self::default()
        }
    }

    /// `√(Mσ²)·(1 + 2√(2/M))`: the noise norm plus two standard deviations.
    pub fn discrepancy_epsilon(m: usize, noise_variance: f64) -> f64 {
        let m = m as f64;
        (m * noise_variance).sqrt() * (1.0 + 2.0 * (2.0 / m).sqrt())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0) {
            return Err(Error::param("epsilon must be non-negative"));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::param("tolerance must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(Error::param("max_iterations must be positive"));
        }
        if !(self.threshold_ratio > 0.0) {
            return Err(Error::param("threshold_ratio must be positive"));
        }
        Ok(())
    }
}

/// `A = U S Vᴴ` restricted to the numerical range of `A`.
struct RangeFactor {
    s: Vec<f64>,
    /// `S⁻¹UᴴA`, `r × N`.
    vh: CMatrix,
    /// `Uᴴy`.
    uy: CVector,
    /// Squared norm of the part of `y` outside the range.
    y_perp_sq: f64,
}

impl RangeFactor {
    fn new(a: &CMatrix, y: &CVector) -> Self {
        let gram = a * a.adjoint();
        let (lambda, u) = hermitian_eigen(gram);
        let top = lambda.first().copied().unwrap_or(0.0).max(0.0);
        // eigenvalues are squared singular values
        let rank = lambda
            .iter()
            .take_while(|&&l| l > RANK_TOL * RANK_TOL * top && l > 0.0)
            .count();
        let u = u.columns(0, rank).into_owned();
        let s: Vec<f64> = lambda[..rank].iter().map(|l| l.sqrt()).collect();
        let mut vh = u.adjoint() * a;
        for (i, mut row) in vh.row_iter_mut().enumerate() {
            row /= Complex64::new(s[i], 0.0);
        }
        let uy = u.adjoint() * y;
        let y_perp_sq = (y.norm_squared() - uy.norm_squared()).max(0.0);
        RangeFactor { s, vh, uy, y_perp_sq }
    }

    fn lift(&self, w: &CVector) -> CVector {
        self.vh.ad_mul(w)
    }

    /// Closest point to `v` in `{x : ‖Ax − y‖ ≤ ε}`, or in the least-squares
    /// solution set when the ball is out of reach.
    fn project(&self, v: &CVector, epsilon: f64) -> CVector {
        let vv = &self.vh * v;
        let r = CVector::from_fn(self.s.len(), |i, _| vv[i] * self.s[i] - self.uy[i]);
        let budget_sq = epsilon * epsilon - self.y_perp_sq;
        if budget_sq <= 0.0 {
            let w = CVector::from_fn(self.s.len(), |i, _| self.uy[i] / self.s[i] - vv[i]);
            return v + self.lift(&w);
        }
        let budget = budget_sq.sqrt();
        if r.norm() <= budget {
            return v.clone();
        }
        let shrunk = |mu: f64| -> f64 {
            r.iter()
                .zip(&self.s)
                .map(|(ri, si)| ri.norm_sqr() / (1.0 + mu * si * si).powi(2))
                .sum::<f64>()
                .sqrt()
        };
        let (mut lo, mut hi) = (0.0, 1.0);
        while shrunk(hi) > budget {
            hi *= 2.0;
            if hi > 1e300 {
                break;
            }
        }
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if shrunk(mid) > budget {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * hi {
                break;
            }
        }
        let mu = hi;
        let w = CVector::from_fn(self.s.len(), |i, _| {
            let si = self.s[i];
            -r[i] * (mu * si / (1.0 + mu * si * si))
        });
        v + self.lift(&w)
    }
}

fn soft_threshold(w: &CVector, tau: f64) -> CVector {
    w.map(|c| {
        let mag = c.norm();
        if mag <= tau {
            Complex64::new(0.0, 0.0)
        } else {
            c * ((mag - tau) / mag)
        }
    })
}

/// Sparse tap vector `ĥ` with `ΦΨĥ ≈ y`.
///
/// Returns the data-consistent iterate. When the iteration cap is hit the
/// error carries that iterate so callers may still use it.
pub fn l1_reconstruct(y: &CVector, a: &CMatrix, cfg: &L1SolverConfig) -> Result<CVector> {
    cfg.validate()?;
    if y.len() != a.nrows() {
        return Err(Error::Dimension {
            expected: a.nrows(),
            actual: y.len(),
        });
    }
    let n = a.ncols();
    if y.iter().all(|c| *c == Complex64::new(0.0, 0.0)) {
        return Ok(CVector::zeros(n));
    }
    let epsilon = match cfg.mode {
        L1Mode::Equality => 0.0,
        L1Mode::Denoising => cfg.epsilon,
    };
    let f = RangeFactor::new(a, y);
    if f.s.is_empty() {
        return Err(Error::param("measurement operator is zero"));
    }
    let least_norm = f.lift(&CVector::from_fn(f.s.len(), |i, _| f.uy[i] / f.s[i]));
    let tau = cfg.threshold_ratio * least_norm.iter().map(|c| c.norm()).fold(0.0, f64::max);

    let mut z = CVector::zeros(n);
    let mut u = CVector::zeros(n);
    let mut x = f.project(&z, epsilon);
    let mut change = f64::INFINITY;
    for _ in 0..cfg.max_iterations {
        x = f.project(&(&z - &u), epsilon);
        let z_next = soft_threshold(&(&x + &u), tau);
        u += &x - &z_next;
        let scale = z_next.norm().max(f64::MIN_POSITIVE);
        change = (&z_next - &z).norm().max((&x - &z_next).norm()) / scale;
        z = z_next;
        if change < cfg.tolerance {
            return Ok(x);
        }
    }
    Err(Error::NotConverged {
        iterations: cfg.max_iterations,
        change,
        best: Box::new(x),
    })
}
