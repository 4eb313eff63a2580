//! Entropies and (conditional) mutual informations in bits.

use std::collections::HashMap;

use super::pmf::{projection_map, JointPmf};
use crate::error::{Error, Result};

/// Default tolerance (bits) for independence and Markov predicates.
pub const DEFAULT_INFO_TOL: f64 = 1e-9;

/// `-Σ p log2 p` with `0 log 0 = 0`.
pub fn entropy_of(values: &[f64]) -> f64 {
    -values.iter().filter(|&&v| v > 0.0).map(|&v| v * v.log2()).sum::<f64>()
}

pub fn binary_entropy(p: f64) -> f64 {
    entropy_of(&[p, 1.0 - p])
}

fn axis_mask<S: AsRef<str>>(p: &JointPmf<f64>, axes: &[S]) -> Result<u64> {
    let mut mask = 0u64;
    for a in axes {
        let pos = p.position(a.as_ref())?;
        let bit = 1u64 << pos;
        if mask & bit != 0 {
            return Err(Error::DuplicateAxis(a.as_ref().to_string()));
        }
        mask |= bit;
    }
    Ok(mask)
}

fn disjoint(masks: &[u64], p: &JointPmf<f64>) -> Result<()> {
    for i in 0..masks.len() {
        for j in i + 1..masks.len() {
            let overlap = masks[i] & masks[j];
            if overlap != 0 {
                let pos = overlap.trailing_zeros() as usize;
                return Err(Error::OverlappingAxes(p.axes()[pos].name.clone()));
            }
        }
    }
    Ok(())
}

/// Memoizing entropy evaluator over one joint pmf; axis sets are bitmasks of
/// axis positions.
pub struct InfoCalc<'a> {
    pmf: &'a JointPmf<f64>,
    shape: Vec<usize>,
    memo: HashMap<u64, f64>,
}

impl<'a> InfoCalc<'a> {
    pub fn new(pmf: &'a JointPmf<f64>) -> Self {
        assert!(pmf.axes().len() <= 64, "at most 64 axes");
        Self { pmf, shape: pmf.shape(), memo: HashMap::new() }
    }

    pub fn pmf(&self) -> &JointPmf<f64> {
        self.pmf
    }

    pub fn mask<S: AsRef<str>>(&self, axes: &[S]) -> Result<u64> {
        axis_mask(self.pmf, axes)
    }

    pub fn h(&mut self, mask: u64) -> f64 {
        if mask == 0 {
            return 0.0;
        }
        if let Some(&v) = self.memo.get(&mask) {
            return v;
        }
        let keep: Vec<usize> = (0..self.shape.len()).filter(|i| mask >> i & 1 == 1).collect();
        let all = keep.len() == self.shape.len();
        let v = if all {
            entropy_of(self.pmf.values())
        } else {
            let (map, size) = projection_map(&self.shape, &keep);
            let mut m = vec![0.0; size];
            for (v, &i) in self.pmf.values().iter().zip(&map) {
                m[i] += v;
            }
            entropy_of(&m)
        };
        self.memo.insert(mask, v);
        v
    }

    /// H(a | given).
    pub fn h_cond(&mut self, a: u64, given: u64) -> f64 {
        self.h(a | given) - self.h(given)
    }

    /// I(a; b | given), clamped at zero. Overlapping sets are the caller's concern.
    pub fn mi(&mut self, a: u64, b: u64, given: u64) -> f64 {
        let v = self.h(a | given) + self.h(b | given) - self.h(a | b | given) - self.h(given);
        v.max(0.0)
    }
}

pub fn entropy<S: AsRef<str>>(p: &JointPmf<f64>, axes: &[S]) -> Result<f64> {
    let m = axis_mask(p, axes)?;
    Ok(InfoCalc::new(p).h(m))
}

pub fn conditional_entropy<S: AsRef<str>>(p: &JointPmf<f64>, a: &[S], given: &[S]) -> Result<f64> {
    let ma = axis_mask(p, a)?;
    let mg = axis_mask(p, given)?;
    disjoint(&[ma, mg], p)?;
    Ok(InfoCalc::new(p).h_cond(ma, mg).max(0.0))
}

/// I(a; b | given) in bits.
pub fn mutual_information<S: AsRef<str>>(
    p: &JointPmf<f64>,
    a: &[S],
    b: &[S],
    given: &[S],
) -> Result<f64> {
    let ma = axis_mask(p, a)?;
    let mb = axis_mask(p, b)?;
    let mg = axis_mask(p, given)?;
    disjoint(&[ma, mb, mg], p)?;
    Ok(InfoCalc::new(p).mi(ma, mb, mg))
}

pub fn is_independent<S: AsRef<str>>(
    p: &JointPmf<f64>,
    a: &[S],
    b: &[S],
    given: &[S],
    tol: f64,
) -> Result<bool> {
    Ok(mutual_information(p, a, b, given)? <= tol)
}

/// Whether `a - b - c` is a Markov chain, i.e. I(a; c | b) <= tol.
pub fn is_markov<S: AsRef<str>>(
    p: &JointPmf<f64>,
    a: &[S],
    b: &[S],
    c: &[S],
    tol: f64,
) -> Result<bool> {
    Ok(mutual_information(p, a, c, b)? <= tol)
}
