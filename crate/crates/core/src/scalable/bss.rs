//! Binary symmetric source: closed form and a brute-force check over the
//! four-symbol refinement family.

use rayon::prelude::*;

use crate::error::{Error, Result};

fn check_unit(name: &str, v: f64) -> Result<()> {
    if !v.is_finite() {
        return Err(Error::Domain(format!("{name} = {v} is not finite")));
    }
    Ok(())
}

/// `½ + D12 − D1` for `0 ≤ D12 ≤ D1 ≤ ½`.
pub fn bss_d2_star_closed_form(d1: f64, d12: f64) -> Result<f64> {
    check_unit("D1", d1)?;
    check_unit("D12", d12)?;
    if !(0.0 <= d12 && d12 <= d1 && d1 <= 0.5) {
        return Err(Error::Domain(format!("need 0 ≤ D12 ≤ D1 ≤ 1/2, got D1 = {d1}, D12 = {d12}")));
    }
    Ok(0.5 + d12 - d1)
}

/// Result of the grid search.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuredBss {
    pub value: f64,
    /// Cascade crossover `(D1 − D12)/(1 − 2 D12)`.
    pub p: f64,
    /// Minimizing masses `α1 = α4`.
    pub alpha1: f64,
    pub alpha4: f64,
    /// Largest gap between the Bayes-decoded table and the affine formula.
    pub formula_gap: f64,
    pub grid_points: usize,
}

/// Joint `P(x, x1, x12, x2)` of the family, indexed `[x][x1][x12][x2]`.
///
/// Masses are parametrized by `a_i = α_i + β_i`, so `α_i = ½ D12 a_i` and
/// `β_i = ½ (1 − D12) a_i`; the constraints become `a1 + a2 = a4 + a2 = p`
/// and `a1 + a3 = 1 − p`. Symbol `x2 = i` selects the map `x1 -> x12`:
/// constant 0, flip, identity, constant 1.
fn family_table(d12: f64, p: f64, a1: f64) -> [[[[f64; 4]; 2]; 2]; 2] {
    let a = [a1, p - a1, 1.0 - p - a1, a1];
    let mut t = [[[[0.0; 4]; 2]; 2]; 2];
    // x12 is the BSC(D12) output of x; x1 is x12 through BSC(p).
    let maps: [[usize; 2]; 4] = [[0, 0], [1, 0], [0, 1], [1, 1]];
    for x in 0..2 {
        for x12 in 0..2 {
            let pxx12 = 0.5 * if x == x12 { 1.0 - d12 } else { d12 };
            for x1 in 0..2 {
                let w = if x1 == x12 { 1.0 - p } else { p };
                // P(x2 = i | x1, x12) ∝ a_i 1{map_i(x1) = x12}
                let total: f64 = (0..4).filter(|&i| maps[i][x1] == x12).map(|i| a[i]).sum();
                for i in 0..4 {
                    if maps[i][x1] == x12 && total > 0.0 {
                        t[x][x1][x12][i] = pxx12 * w * a[i] / total;
                    }
                }
            }
        }
    }
    t
}

fn bayes_d2(t: &[[[[f64; 4]; 2]; 2]; 2]) -> f64 {
    let mut d2 = 0.0;
    for i in 0..4 {
        let mass = |x: usize| -> f64 { (0..2).map(|a| (0..2).map(|b| t[x][a][b][i]).sum::<f64>()).sum() };
        d2 += mass(0).min(mass(1));
    }
    d2
}

/// Brute force over `α1 = ½ D12 a1` on `a1 = k · grid · p`, `k = 0..=1/grid`.
/// Evaluates the affine expression and the Bayes decoder on the full table.
pub fn bss_d2_star_structured(d1: f64, d12: f64, grid: f64) -> Result<StructuredBss> {
    check_unit("D1", d1)?;
    check_unit("D12", d12)?;
    if !(0.0 <= d12 && d12 <= d1 && d1 < 0.5) {
        return Err(Error::Domain(format!("need 0 ≤ D12 ≤ D1 < 1/2, got D1 = {d1}, D12 = {d12}")));
    }
    if !(grid > 0.0 && grid <= 1.0) {
        return Err(Error::Domain(format!("grid step {grid} must lie in (0, 1]")));
    }
    let p = (d1 - d12) / (1.0 - 2.0 * d12);
    let steps = (1.0 / grid).round().max(1.0) as usize;
    let evals: Vec<(f64, f64, f64)> = (0..=steps)
        .into_par_iter()
        .map(|k| {
            let a1 = p * k as f64 / steps as f64;
            let formula = 0.5 - (1.0 - 2.0 * d12) * a1;
            let table = bayes_d2(&family_table(d12, p, a1));
            (a1, formula, (table - formula).abs())
        })
        .collect();
    let mut best = evals[0];
    let mut gap: f64 = 0.0;
    for &e in &evals {
        gap = gap.max(e.2);
        if e.1 < best.1 {
            best = e;
        }
    }
    let alpha = 0.5 * d12 * best.0;
    Ok(StructuredBss { value: best.1, p, alpha1: alpha, alpha4: alpha, formula_gap: gap, grid_points: steps + 1 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_points() {
        assert!((bss_d2_star_closed_form(0.3, 0.1).unwrap() - 0.3).abs() < 1e-15);
        assert!((bss_d2_star_closed_form(0.5, 0.2).unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(bss_d2_star_closed_form(0.25, 0.25).unwrap(), 0.5);
        assert!(bss_d2_star_closed_form(0.1, 0.3).is_err());
        assert!(bss_d2_star_closed_form(0.6, 0.1).is_err());
    }

    #[test]
    fn structured_matches_closed_form() {
        let s = bss_d2_star_structured(0.3, 0.1, 1e-4).unwrap();
        assert!((s.value - 0.3).abs() < 1e-6);
        assert!((s.alpha1 - 0.5 * s.p * 0.1).abs() < 1e-12);
        assert!(s.formula_gap < 1e-12);
        let e = bss_d2_star_structured(0.25, 0.25, 1e-2).unwrap();
        assert_eq!(e.p, 0.0);
        assert!((e.value - 0.5).abs() < 1e-15);
        for &(d1, d12) in &[(0.1, 0.0), (0.2, 0.05), (0.4, 0.3), (0.49, 0.01)] {
            let s = bss_d2_star_structured(d1, d12, 1e-3).unwrap();
            assert!((s.value - bss_d2_star_closed_form(d1, d12).unwrap()).abs() < 1e-6);
        }
        assert!(bss_d2_star_structured(0.5, 0.1, 1e-3).is_err());
    }

    #[test]
    fn family_table_is_a_valid_scheme() {
        let (d1, d12) = (0.3, 0.1);
        let p = (d1 - d12) / (1.0 - 2.0 * d12);
        let t = family_table(d12, p, 0.5 * p);
        let total: f64 = t.iter().flatten().flatten().flatten().sum();
        assert!((total - 1.0).abs() < 1e-12);
        // X1 independent of X2.
        for x1 in 0..2 {
            for i in 0..4 {
                let joint: f64 = (0..2).map(|x| (0..2).map(|b| t[x][x1][b][i]).sum::<f64>()).sum();
                let m1: f64 = (0..2).map(|x| (0..2).map(|b| (0..4).map(|j| t[x][x1][b][j]).sum::<f64>()).sum::<f64>()).sum();
                let m2: f64 = (0..2).map(|x| (0..2).map(|a| (0..2).map(|b| t[x][a][b][i]).sum::<f64>()).sum::<f64>()).sum();
                assert!((joint - m1 * m2).abs() < 1e-12);
            }
        }
        // Coarse layer is a BSC(D1) of X.
        let err: f64 = (0..2).map(|x| (0..2).filter(|&a| a != x).map(|a| (0..2).map(|b| (0..4).map(|j| t[x][a][b][j]).sum::<f64>()).sum::<f64>()).sum::<f64>()).sum();
        assert!((err - d1).abs() < 1e-12);
    }
}
