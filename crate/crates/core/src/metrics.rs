//! Delay error metrics.

use alloc::vec::Vec;

use crate::{Error, Result};

/// Largest `K` for which the matching is exhaustive; larger sets are paired in sorted order.
pub const EXHAUSTIVE_MATCH_MAX: usize = 6;

/// Mean squared delay error in μs² under the best matching of estimates to truth.
///
/// Inputs are in seconds.
pub fn tau_mse(truth: &[f64], estimate: &[f64]) -> Result<f64> {
    if truth.len() != estimate.len() {
        return Err(Error::Dimension {
            expected: truth.len(),
            actual: estimate.len(),
        });
    }
    let k = truth.len();
    if k == 0 {
        return Ok(0.0);
    }
    let us = |v: &[f64]| v.iter().map(|t| t * 1e6).collect::<Vec<_>>();
    let t = us(truth);
    let mut e = us(estimate);
    let cost = |e: &[f64]| t.iter().zip(e).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / k as f64;

    if k > EXHAUSTIVE_MATCH_MAX {
        let mut ts = t.clone();
        ts.sort_by(f64::total_cmp);
        e.sort_by(f64::total_cmp);
        return Ok(ts.iter().zip(&e).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / k as f64);
    }

    // Heap's algorithm
    let mut best = cost(&e);
    let mut c = alloc::vec![0usize; k];
    let mut i = 1;
    while i < k {
        if c[i] < i {
            let j = if i % 2 == 0 { 0 } else { c[i] };
            e.swap(j, i);
            best = best.min(cost(&e));
            c[i] += 1;
            i = 1;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    Ok(best)
}
