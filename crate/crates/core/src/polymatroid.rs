//! The VKG rate set function, contra-polymatroid checks and greedy vertices.
//!
//! Subsets of the description set `{1..L}` are bitmasks: description `k` is
//! bit `k - 1`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::{InfoCalc, JointPmf};

/// Largest `L` for exhaustive property checks (and for schemes, which carry
/// `2^L + 1` axes).
pub const MAX_L_EXHAUSTIVE: usize = 5;
/// Largest `L` for vertex enumeration.
pub const MAX_L_VERTICES: usize = 8;

/// Name of the source axis.
pub const SOURCE: &str = "X";

/// Axis name of auxiliary `X_A`: `X{}`, `X{1}`, `X{1,2}`, ...
pub fn aux_name(mask: u32) -> String {
    let members: Vec<String> = members(mask).iter().map(|k| k.to_string()).collect();
    format!("X{{{}}}", members.join(","))
}

/// 1-based members of a subset, ascending.
pub fn members(mask: u32) -> Vec<usize> {
    (0..32).filter(|b| mask >> b & 1 == 1).map(|b| b as usize + 1).collect()
}

pub fn mask_of(members: &[usize]) -> u32 {
    members.iter().fold(0, |m, &k| m | 1 << (k - 1))
}

/// Parses `"1,3"` (or `"13"`, or `"{}"`/`""` for the empty set) into a mask.
pub fn parse_subset(s: &str, l: usize) -> Result<u32> {
    let t = s.trim().trim_start_matches('{').trim_end_matches('}');
    if t.is_empty() {
        return Ok(0);
    }
    let parts: Vec<&str> = if t.contains(',') {
        t.split(',').collect()
    } else {
        t.split("").filter(|c| !c.is_empty()).collect()
    };
    let mut mask = 0;
    for p in parts {
        let k: usize = p
            .trim()
            .parse()
            .map_err(|_| Error::Domain(format!("bad description index `{p}` in `{s}`")))?;
        if k == 0 || k > l {
            return Err(Error::Domain(format!("description {k} outside 1..={l}")));
        }
        mask |= 1 << (k - 1);
    }
    Ok(mask)
}

/// A set function on the subsets of `{1..L}`, indexed by mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetFn {
    pub l: usize,
    pub values: Vec<f64>,
}

impl SubsetFn {
    pub fn new(l: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != 1 << l {
            return Err(Error::ShapeMismatch(format!(
                "set function on L = {l} needs {} values",
                1usize << l
            )));
        }
        Ok(Self { l, values })
    }

    pub fn from_fn(l: usize, f: impl FnMut(u32) -> f64) -> Self {
        Self { l, values: (0..1u32 << l).map(f).collect() }
    }

    pub fn get(&self, mask: u32) -> f64 {
        self.values[mask as usize]
    }

    pub fn full(&self) -> u32 {
        (1u32 << self.l) - 1
    }
}

/// Joint law of `X` and `X_A` for every `A ⊆ {1..L}`.
#[derive(Debug, Clone, PartialEq)]
pub struct VkgScheme {
    pub l: usize,
    pub joint: JointPmf<f64>,
}

impl VkgScheme {
    pub fn new(l: usize, joint: JointPmf<f64>) -> Result<Self> {
        if l == 0 || l > MAX_L_EXHAUSTIVE {
            return Err(Error::TooManyDescriptions { got: l, limit: MAX_L_EXHAUSTIVE });
        }
        joint.position(SOURCE)?;
        for m in 0..1u32 << l {
            joint.position(&aux_name(m))?;
        }
        if joint.axes().len() != (1 << l) + 1 {
            return Err(Error::Scheme(format!(
                "expected {} axes, found {}",
                (1 << l) + 1,
                joint.axes().len()
            )));
        }
        Ok(Self { l, joint })
    }

    pub fn psi(&self, k: u32) -> Result<f64> {
        if k >> self.l != 0 {
            return Err(Error::Domain(format!("subset mask {k:#b} outside L = {}", self.l)));
        }
        let mut calc = PsiCalc::new(&self.joint, self.l)?;
        Ok(calc.psi(k))
    }

    /// ψ on every subset.
    pub fn psi_fn(&self) -> Result<SubsetFn> {
        let mut calc = PsiCalc::new(&self.joint, self.l)?;
        Ok(SubsetFn::from_fn(self.l, |k| calc.psi(k)))
    }
}

/// ψ evaluator that shares entropies across subsets.
pub struct PsiCalc<'a> {
    calc: InfoCalc<'a>,
    l: usize,
    x: u64,
    /// Axis bit of each auxiliary, by subset mask.
    aux: Vec<u64>,
}

impl<'a> PsiCalc<'a> {
    pub fn new(joint: &'a JointPmf<f64>, l: usize) -> Result<Self> {
        if joint.axes().len() > 64 {
            return Err(Error::TooManyDescriptions { got: l, limit: MAX_L_EXHAUSTIVE });
        }
        let calc = InfoCalc::new(joint);
        let x = calc.mask(&[SOURCE])?;
        let aux = (0..1u32 << l)
            .map(|m| calc.mask(&[aux_name(m)]))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { calc, l, x, aux })
    }

    /// Axis mask of `X_{(B)}` for `B` = all subsets of `k` (strict subsets when
    /// `proper`).
    fn family(&self, k: u32, proper: bool) -> u64 {
        let mut m = 0;
        let mut a = k;
        loop {
            if !(proper && a == k) {
                m |= self.aux[a as usize];
            }
            if a == 0 {
                break;
            }
            a = (a - 1) & k;
        }
        m
    }

    /// `(|K|−1) I(X;X_∅) − H(X_(2^K)|X) + Σ_{A⊆K} H(X_A | X_(2^A−{A}))`,
    /// evaluated literally.
    pub fn psi_unnormalized(&mut self, k: u32) -> f64 {
        debug_assert!(k >> self.l == 0);
        let i0 = self.calc.mi(self.x, self.aux[0], 0);
        let mut v = (k.count_ones() as f64 - 1.0) * i0;
        let fam = self.family(k, false);
        v -= self.calc.h_cond(fam, self.x);
        let mut a = k;
        loop {
            let below = self.family(a, true);
            v += self.calc.h_cond(self.aux[a as usize], below);
            if a == 0 {
                break;
            }
            a = (a - 1) & k;
        }
        v
    }

    /// ψ with `ψ(∅) = 0` exactly.
    pub fn psi(&mut self, k: u32) -> f64 {
        if k == 0 {
            0.0
        } else {
            self.psi_unnormalized(k)
        }
    }
}

/// Outcome of the exhaustive contra-polymatroid check. Violations are signed:
/// positive means the property fails by that many bits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolymatroidReport {
    pub normalized: bool,
    pub nondecreasing: bool,
    pub supermodular: bool,
    pub normalization_violation: f64,
    pub monotonicity_violation: f64,
    pub supermodularity_violation: f64,
}

impl PolymatroidReport {
    pub fn passes(&self) -> bool {
        self.normalized && self.nondecreasing && self.supermodular
    }

    pub fn worst(&self) -> f64 {
        self.normalization_violation
            .abs()
            .max(self.monotonicity_violation)
            .max(self.supermodularity_violation)
    }
}

pub fn check_contra_polymatroid(f: &SubsetFn, tol: f64) -> Result<PolymatroidReport> {
    if f.l > MAX_L_EXHAUSTIVE {
        return Err(Error::TooManyDescriptions { got: f.l, limit: MAX_L_EXHAUSTIVE });
    }
    let n = 1u32 << f.l;
    let mut mono = f64::NEG_INFINITY;
    let mut sup = f64::NEG_INFINITY;
    for s in 0..n {
        for t in 0..n {
            if s & t == s {
                mono = mono.max(f.get(s) - f.get(t));
            }
            sup = sup.max(f.get(s) + f.get(t) - f.get(s | t) - f.get(s & t));
        }
    }
    let norm = f.get(0);
    Ok(PolymatroidReport {
        normalized: norm.abs() <= tol,
        nondecreasing: mono <= tol,
        supermodular: sup <= tol,
        normalization_violation: norm,
        monotonicity_violation: mono,
        supermodularity_violation: sup,
    })
}

/// A greedy vertex; `permutation` is 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateVertex {
    pub rates: Vec<f64>,
    pub permutation: Vec<usize>,
}

impl RateVertex {
    pub fn weighted_sum(&self, weights: &[f64]) -> f64 {
        self.rates.iter().zip(weights).map(|(r, a)| r * a).sum()
    }
}

fn check_permutation(pi: &[usize], l: usize) -> Result<()> {
    let mut seen = vec![false; l];
    if pi.len() != l {
        return Err(Error::InvalidPermutation(format!("length {} for L = {l}", pi.len())));
    }
    for &k in pi {
        if k == 0 || k > l || seen[k - 1] {
            return Err(Error::InvalidPermutation(format!("{pi:?} is not a permutation of 1..={l}")));
        }
        seen[k - 1] = true;
    }
    Ok(())
}

/// `R_π(k) = f(π(1..k)) − f(π(1..k−1))`.
pub fn greedy_vertex(f: &SubsetFn, pi: &[usize]) -> Result<RateVertex> {
    check_permutation(pi, f.l)?;
    let mut rates = vec![0.0; f.l];
    let mut prefix = 0u32;
    for &k in pi {
        let next = prefix | 1 << (k - 1);
        rates[k - 1] = f.get(next) - f.get(prefix);
        prefix = next;
    }
    Ok(RateVertex { rates, permutation: pi.to_vec() })
}

/// All permutations of `1..=l` in lexicographic order.
pub fn permutations(l: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (1..=l).collect();
    loop {
        out.push(cur.clone());
        // Next lexicographic permutation.
        let Some(i) = (1..cur.len()).rev().find(|&i| cur[i - 1] < cur[i]) else {
            break;
        };
        let j = (i..cur.len()).rev().find(|&j| cur[j] > cur[i - 1]).unwrap();
        cur.swap(i - 1, j);
        cur[i..].reverse();
    }
    out
}

/// Every greedy vertex, one per permutation in lexicographic order.
pub fn all_vertices(f: &SubsetFn) -> Result<Vec<RateVertex>> {
    if f.l > MAX_L_VERTICES {
        return Err(Error::TooManyDescriptions { got: f.l, limit: MAX_L_VERTICES });
    }
    permutations(f.l).par_iter().map(|pi| greedy_vertex(f, pi)).collect()
}

/// Largest violation of `R_K ≥ f(K)` over nonempty `K`.
pub fn constraint_violation(f: &SubsetFn, rates: &[f64]) -> f64 {
    (1..1u32 << f.l)
        .map(|k| {
            let rk: f64 = members(k).iter().map(|&i| rates[i - 1]).sum();
            f.get(k) - rk
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Descending weight order, ties by ascending index (1-based).
pub fn weight_order(weights: &[f64]) -> Vec<usize> {
    let mut pi: Vec<usize> = (1..=weights.len()).collect();
    pi.sort_by(|&a, &b| weights[b - 1].total_cmp(&weights[a - 1]).then(a.cmp(&b)));
    pi
}

/// Minimum of `Σ α_k R_k` over `{R : R_K ≥ f(K)}` via the greedy vertex.
pub fn min_weighted_sum(f: &SubsetFn, weights: &[f64]) -> Result<(f64, Vec<usize>)> {
    if weights.len() != f.l {
        return Err(Error::InvalidWeights(format!("{} weights for L = {}", weights.len(), f.l)));
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::InvalidWeights("weights must be finite and nonnegative".into()));
    }
    let pi = weight_order(weights);
    let v = greedy_vertex(f, &pi)?;
    Ok((v.weighted_sum(weights), pi))
}

/// Brute-force minimum over all `L!` vertices (ties by lexicographic order).
pub fn min_weighted_sum_exhaustive(f: &SubsetFn, weights: &[f64]) -> Result<(f64, Vec<usize>)> {
    let vs = all_vertices(f)?;
    let mut best = (f64::INFINITY, vec![]);
    for v in vs {
        let s = v.weighted_sum(weights);
        if s < best.0 {
            best = (s, v.permutation);
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::Alphabet;

    /// L = 2 scheme over (X, X{}, X{1}, X{2}, X{1,2}) with X1 = X2 = X uniform.
    fn copy_scheme() -> VkgScheme {
        let x = JointPmf::<f64>::uniform(vec![Alphabet::new(SOURCE, 2).unwrap()]).unwrap();
        let j = x
            .with_constant_axis(&aux_name(0))
            .unwrap()
            .with_function_axis(Alphabet::new(aux_name(1), 2).unwrap(), &[SOURCE], |v| v[0])
            .unwrap()
            .with_function_axis(Alphabet::new(aux_name(2), 2).unwrap(), &[SOURCE], |v| v[0])
            .unwrap()
            .with_constant_axis(&aux_name(3))
            .unwrap();
        VkgScheme::new(2, j).unwrap()
    }

    #[test]
    fn names_and_subsets() {
        assert_eq!(aux_name(0), "X{}");
        assert_eq!(aux_name(0b101), "X{1,3}");
        assert_eq!(parse_subset("1,3", 3).unwrap(), 0b101);
        assert_eq!(parse_subset("13", 3).unwrap(), 0b101);
        assert_eq!(parse_subset("{}", 3).unwrap(), 0);
        assert!(parse_subset("4", 3).is_err());
    }

    #[test]
    fn psi_on_copy_scheme() {
        let s = copy_scheme();
        assert_eq!(s.psi(0).unwrap(), 0.0);
        let f = s.psi_fn().unwrap();
        assert!((f.get(1) - 1.0).abs() < 1e-12);
        assert!((f.get(3) - 2.0).abs() < 1e-12);
        let v = greedy_vertex(&f, &[1, 2]).unwrap();
        assert!((v.rates[0] - 1.0).abs() < 1e-12 && (v.rates[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_scheme_has_zero_psi() {
        let x = JointPmf::<f64>::uniform(vec![Alphabet::new(SOURCE, 3).unwrap()]).unwrap();
        let mut j = x;
        for m in 0..8 {
            j = j.with_constant_axis(&aux_name(m)).unwrap();
        }
        let f = VkgScheme::new(3, j).unwrap().psi_fn().unwrap();
        assert!(f.values.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn cardinality_functions() {
        let sq = SubsetFn::from_fn(3, |k| (k.count_ones() as f64).powi(2));
        let rep = check_contra_polymatroid(&sq, 1e-12).unwrap();
        assert!(rep.supermodular && rep.nondecreasing && rep.normalized);
        let root = SubsetFn::from_fn(3, |k| (k.count_ones() as f64).sqrt());
        let rep = check_contra_polymatroid(&root, 1e-12).unwrap();
        assert!(!rep.supermodular);
        assert!(rep.supermodularity_violation > 0.0);
    }

    #[test]
    fn vertices_of_simple_functions() {
        let zero = SubsetFn::from_fn(3, |_| 0.0);
        assert_eq!(greedy_vertex(&zero, &[2, 3, 1]).unwrap().rates, vec![0.0; 3]);
        let c = [0.5, 1.25, 2.0];
        let modular = SubsetFn::from_fn(3, |k| members(k).iter().map(|&i| c[i - 1]).sum());
        let a = greedy_vertex(&modular, &[1, 2, 3]).unwrap();
        let b = greedy_vertex(&modular, &[3, 1, 2]).unwrap();
        assert_eq!(a.rates, b.rates);
        assert!(greedy_vertex(&zero, &[1, 1, 2]).is_err());
    }

    #[test]
    fn weighted_sums() {
        let sq = SubsetFn::from_fn(2, |k| (k.count_ones() as f64).powi(2));
        let (v, _) = min_weighted_sum(&sq, &[2.0, 2.0]).unwrap();
        assert!((v - sq.get(3) * 2.0).abs() < 1e-12);
        let (v, pi) = min_weighted_sum(&sq, &[1.0, 0.0]).unwrap();
        assert_eq!(pi, vec![1, 2]);
        assert_eq!(v, sq.get(1));
        assert!(min_weighted_sum(&sq, &[1.0, -1.0]).is_err());
    }

    #[test]
    fn permutation_order() {
        assert_eq!(permutations(3), vec![
            vec![1, 2, 3],
            vec![1, 3, 2],
            vec![2, 1, 3],
            vec![2, 3, 1],
            vec![3, 1, 2],
            vec![3, 2, 1]
        ]);
        assert_eq!(weight_order(&[1.0, 3.0, 1.0]), vec![2, 1, 3]);
    }
}
