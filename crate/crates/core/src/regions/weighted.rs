//! Weighted sum rates of layered schemes over `X{}` and the single-description
//! auxiliaries (plus hierarchical or central refinements).

use crate::error::{Error, Result};
use crate::polymatroid::{aux_name, weight_order, SOURCE};
use crate::prob::{InfoCalc, JointPmf};

fn check_weights(weights: &[f64], l: usize) -> Result<()> {
    if weights.len() != l {
        return Err(Error::InvalidWeights(format!("{} weights for L = {l}", weights.len())));
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::InvalidWeights("weights must be finite and nonnegative".into()));
    }
    Ok(())
}

fn check_sorted(weights: &[f64]) -> Result<()> {
    if weights.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::InvalidWeights(format!("weights {weights:?} must be nonincreasing")));
    }
    Ok(())
}

/// Mask of `X_A` in `c`, or 0 when the axis is absent (a constant).
fn aux(c: &InfoCalc, j: &JointPmf<f64>, a: u32) -> Result<u64> {
    let name = aux_name(a);
    if j.has_axis(&name) { c.mask(&[name]) } else { Ok(0) }
}

/// `Σ_k α_k [I(X;X{}) + I(X, X{1..k−1}; X{k} | X{})]` for `α_1 ≥ … ≥ α_L ≥ 0`.
pub fn ih_weighted_sum_rate(joint: &JointPmf<f64>, weights: &[f64]) -> Result<f64> {
    let l = weights.len();
    check_weights(weights, l)?;
    check_sorted(weights)?;
    let order: Vec<usize> = (1..=l).collect();
    ordered_sum(joint, weights, &order)
}

fn ordered_sum(joint: &JointPmf<f64>, weights: &[f64], order: &[usize]) -> Result<f64> {
    let mut c = InfoCalc::new(joint);
    let x = c.mask(&[SOURCE])?;
    let e = aux(&c, joint, 0)?;
    let common = c.mi(x, e, 0);
    let mut prefix = x;
    let mut total = 0.0;
    for &k in order {
        let xk = aux(&c, joint, 1 << (k - 1))?;
        total += weights[k - 1] * (common + c.mi(prefix, xk, e));
        prefix |= xk;
    }
    Ok(total)
}

/// Hierarchical form over `X{}`, `X{k}` and `X_{I_k} = X{1..k}`:
/// `Σ_k α_k [I(X;X{}) + I(X_(H_{k−1}); X{k} | X{}) + I(X; X{k}, X_{I_k} | X{}, X_(H_{k−1}))]`.
pub fn ih_hierarchical_sum_rate(joint: &JointPmf<f64>, weights: &[f64]) -> Result<f64> {
    let l = weights.len();
    check_weights(weights, l)?;
    check_sorted(weights)?;
    let mut c = InfoCalc::new(joint);
    let x = c.mask(&[SOURCE])?;
    let e = aux(&c, joint, 0)?;
    let common = c.mi(x, e, 0);
    let mut h = 0u64;
    let mut total = 0.0;
    for k in 1..=l {
        let xk = aux(&c, joint, 1 << (k - 1))?;
        let ik = if k >= 2 { aux(&c, joint, (1u32 << k) - 1)? } else { 0 };
        total += weights[k - 1] * (common + c.mi(h, xk, e) + c.mi(x, xk | ik, e | h));
        h |= xk | ik;
    }
    Ok(total)
}

/// Individual-and-central form: descriptions taken in descending weight
/// order (ties by index). With `central`, adds
/// `α_π(L) I(X; X_{I_L} | X{}, X{1..L})`.
pub fn ic_weighted_sum_rate(joint: &JointPmf<f64>, weights: &[f64], central: bool) -> Result<f64> {
    let l = weights.len();
    check_weights(weights, l)?;
    let order = weight_order(weights);
    let mut total = ordered_sum(joint, weights, &order)?;
    if central {
        let mut c = InfoCalc::new(joint);
        let x = c.mask(&[SOURCE])?;
        let mut given = aux(&c, joint, 0)?;
        for k in 1..=l {
            given |= aux(&c, joint, 1 << (k - 1))?;
        }
        let top = aux(&c, joint, (1u32 << l) - 1)?;
        let extra = if l >= 2 { c.mi(x, top, given) } else { 0.0 };
        total += weights[order[l - 1] - 1] * extra;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optim::restart_rng;
    use crate::polymatroid::{greedy_vertex, PsiCalc, SubsetFn};
    use crate::prob::Alphabet;
    use crate::regions::search::random_joint;

    fn singletons(l: usize) -> Vec<(u32, usize)> {
        let mut v = vec![(0u32, 2usize)];
        v.extend((0..l).map(|k| (1u32 << k, 2)));
        v
    }

    #[test]
    fn trivial_cases() {
        let x = JointPmf::uniform(vec![Alphabet::new("X", 2).unwrap()]).unwrap();
        assert_eq!(ih_weighted_sum_rate(&x, &[1.0, 0.5]).unwrap(), 0.0);
        let mut rng = restart_rng(1, 0);
        let j = random_joint(&mut rng, 3, &singletons(1));
        let v = ih_weighted_sum_rate(&j, &[1.0]).unwrap();
        let direct = crate::prob::mutual_information(&j, &["X"], &["X{}", "X{1}"], &[] as &[&str]).unwrap();
        assert!((v - direct).abs() < 1e-12);
        assert!(ih_weighted_sum_rate(&j, &[0.5]).is_ok());
        let j2 = random_joint(&mut rng, 2, &singletons(2));
        assert!(matches!(ih_weighted_sum_rate(&j2, &[0.5, 1.0]), Err(Error::InvalidWeights(_))));
        assert!(ic_weighted_sum_rate(&j2, &[-1.0, 1.0], false).is_err());
    }

    #[test]
    fn matches_greedy_vertex_of_padded_scheme() {
        for l in 1..=3 {
            for t in 0..30u64 {
                let mut rng = restart_rng(5, t);
                let mut j = random_joint(&mut rng, 2, &singletons(l));
                for m in 1..1u32 << l {
                    if m.count_ones() >= 2 {
                        j = j.with_constant_axis(&aux_name(m)).unwrap();
                    }
                }
                let mut calc = PsiCalc::new(&j, l).unwrap();
                let psi = SubsetFn::from_fn(l, |k| calc.psi(k));
                let id: Vec<usize> = (1..=l).collect();
                let v = greedy_vertex(&psi, &id).unwrap();
                let w: Vec<f64> = (0..l).map(|k| 1.0 + (l - k) as f64 * 0.7).collect();
                let a = ih_weighted_sum_rate(&j, &w).unwrap();
                assert!((a - v.weighted_sum(&w)).abs() < 1e-9, "L={l}: {a} vs {}", v.weighted_sum(&w));
            }
        }
    }

    #[test]
    fn symmetric_weights_ignore_order() {
        let mut rng = restart_rng(9, 1);
        let j = random_joint(&mut rng, 2, &singletons(3));
        let a = ic_weighted_sum_rate(&j, &[1.0, 1.0, 1.0], false).unwrap();
        let b = ordered_sum(&j, &[1.0; 3], &[3, 1, 2]).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn central_term_vanishes_for_functions() {
        let mut rng = restart_rng(4, 2);
        let j = random_joint(&mut rng, 2, &singletons(2));
        let j = j
            .with_function_axis(Alphabet::new("X{1,2}", 2).unwrap(), &["X{1}", "X{2}"], |i| i[0] ^ i[1])
            .unwrap();
        let w = [0.3, 0.9];
        let plain = ic_weighted_sum_rate(&j, &w, false).unwrap();
        let with = ic_weighted_sum_rate(&j, &w, true).unwrap();
        assert!((plain - with).abs() < 1e-12);
        let k = random_joint(&mut rng, 2, &[(0, 2), (1, 2), (2, 2), (3, 2)]);
        assert!(ic_weighted_sum_rate(&k, &w, true).unwrap() >= ic_weighted_sum_rate(&k, &w, false).unwrap());
    }

    #[test]
    fn hierarchical_form_dominates_when_refinements_are_decoded_values() {
        // With X_{I_k} constant the hierarchical form reduces to the layered one.
        let mut rng = restart_rng(8, 0);
        let j = random_joint(&mut rng, 2, &singletons(3));
        let w = [1.0, 0.6, 0.2];
        let a = ih_weighted_sum_rate(&j, &w).unwrap();
        let b = ih_hierarchical_sum_rate(&j, &w).unwrap();
        assert!((a - b).abs() < 1e-9, "{a} vs {b}");
    }
}
