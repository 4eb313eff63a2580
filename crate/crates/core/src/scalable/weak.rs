//! Weak independence: linear dependence of the rows of `[p_{U|V}(u|v)]`.
//!
//! Rows are indexed by the channel input `v` (the `_by_output` variants test
//! the transposed matrix). Undefined rows are left out.

use nalgebra::DMatrix;
use num_traits::Zero;

use crate::prob::{Channel, Rational};

fn rows_by_input<T: crate::prob::num::Prob>(ch: &Channel<T>) -> Vec<Vec<T>> {
    ch.defined_rows().map(|(_, r)| r.to_vec()).collect()
}

fn transpose<T: Clone>(m: &[Vec<T>]) -> Vec<Vec<T>> {
    if m.is_empty() {
        return vec![];
    }
    (0..m[0].len()).map(|j| m.iter().map(|r| r[j].clone()).collect()).collect()
}

/// Numerical rank: singular values above `1e-10 · σ_max`.
pub fn float_rank(m: &[Vec<f64>]) -> usize {
    if m.is_empty() || m[0].is_empty() {
        return 0;
    }
    let a = DMatrix::from_fn(m.len(), m[0].len(), |i, j| m[i][j]);
    let sv = a.singular_values();
    let top = sv.iter().copied().fold(0.0, f64::max);
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > 1e-10 * top).count()
}

/// Exact rank by Gaussian elimination over the rationals.
pub fn exact_rank(m: &[Vec<Rational>]) -> usize {
    let mut a: Vec<Vec<Rational>> = m.to_vec();
    let rows = a.len();
    let cols = if rows == 0 { 0 } else { a[0].len() };
    let mut rank = 0;
    for c in 0..cols {
        let Some(piv) = (rank..rows).find(|&r| !a[r][c].is_zero()) else {
            continue;
        };
        a.swap(rank, piv);
        let p = a[rank][c].clone();
        for r in 0..rows {
            if r != rank && !a[r][c].is_zero() {
                let k = &a[r][c] / &p;
                for j in c..cols {
                    let t = &k * &a[rank][j];
                    a[r][j] -= t;
                }
            }
        }
        rank += 1;
    }
    rank
}

/// Whether the output of `ch` is weakly independent of its input.
pub fn weak_independence(ch: &Channel<f64>) -> bool {
    let m = rows_by_input(ch);
    float_rank(&m) < m.len()
}

pub fn weak_independence_exact(ch: &Channel<Rational>) -> bool {
    let m = rows_by_input(ch);
    exact_rank(&m) < m.len()
}

/// Transposed reading: rows indexed by the output symbol.
pub fn weak_independence_by_output(ch: &Channel<f64>) -> bool {
    let m = transpose(&rows_by_input(ch));
    float_rank(&m) < m.len()
}

pub fn weak_independence_by_output_exact(ch: &Channel<Rational>) -> bool {
    let m = transpose(&rows_by_input(ch));
    exact_rank(&m) < m.len()
}
