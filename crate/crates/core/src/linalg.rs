//! Dense complex helpers shared by the estimators.

use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::linalg::{SymmetricEigen, SVD};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CVector = DVector<Complex64>;
pub type CMatrix = DMatrix<Complex64>;

/// Relative singular value cutoff used by every least-squares solve.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct LeastSquares {
    pub solution: CVector,
    pub rank: usize,
    pub residual: CVector,
}

/// Minimum-norm least squares through the SVD, discarding singular values
/// below `rel_tol * s_max`.
pub fn lstsq(a: &CMatrix, b: &CVector, rel_tol: f64) -> LeastSquares {
    let cols = a.ncols();
    if cols == 0 || a.nrows() == 0 {
        return LeastSquares {
            solution: CVector::zeros(cols),
            rank: 0,
            residual: b.clone(),
        };
    }
    let svd = SVD::new(a.clone(), true, true);
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let s = &svd.singular_values;
    let s_max = s.iter().cloned().fold(0.0, f64::max);
    let cutoff = rel_tol * s_max;

    let mut solution = CVector::zeros(cols);
    let mut rank = 0;
    for (i, &si) in s.iter().enumerate() {
        if si <= cutoff || si == 0.0 {
            continue;
        }
        rank += 1;
        let coeff = u.column(i).dotc(b) / si;
        // v_t row i, conjugated, is the i-th right singular vector.
        for j in 0..cols {
            solution[j] += v_t[(i, j)].conj() * coeff;
        }
    }
    let residual = b - a * &solution;
    LeastSquares {
        solution,
        rank,
        residual,
    }
}

/// Eigen-decomposition of a Hermitian matrix with eigenvalues sorted in
/// descending order; column `i` of the returned matrix pairs with value `i`.
pub fn hermitian_eigen(m: CMatrix) -> (Vec<f64>, CMatrix) {
    let n = m.nrows();
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// `e^{j 2π k / n}` for `k = 0..n`.
pub fn twiddles(n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|k| Complex64::from_polar(1.0, 2.0 * PI * k as f64 / n as f64))
        .collect()
}

/// Inverse DFT, `z[k] = (1/n) Σ h[m] e^{j2π mk/n}`.
///
/// Quadratic cost; the tap vectors here are a few hundred samples long.
pub fn idft(h: &CVector) -> CVector {
    let n = h.len();
    if n == 0 {
        return CVector::zeros(0);
    }
    let w = twiddles(n);
    let scale = 1.0 / n as f64;
    CVector::from_fn(n, |k, _| {
        let mut acc = Complex64::new(0.0, 0.0);
        for (m, &hm) in h.iter().enumerate() {
            acc += hm * w[(m * k) % n];
        }
        acc * scale
    })
}

pub fn norm_sq(v: &CVector) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum()
}
