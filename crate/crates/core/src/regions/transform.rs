//! Removing refinement layers with the functional representation lemma:
//! `X_A = f(V, Z)` with `Z` independent of `V`, after which `Z` rides on a
//! host description and `X_A` becomes constant.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frl::{absorb_noise, compose_joint, frl_decompose, FrlDecomposition};
use crate::polymatroid::{aux_name, members, SOURCE};
use crate::prob::pmf::{flat_index, for_each_index};
use crate::prob::{Decoder, InfoCalc, JointPmf, Rational};

use super::{expect_family, AuxScheme, Family};

const Z_AXIS: &str = "Z";

/// Result of absorbing one layer.
#[derive(Debug, Clone)]
pub struct Absorbed {
    pub scheme: AuxScheme<Rational>,
    pub layer: u32,
    /// Description (1-based) whose alphabet became `(X_host, Z)`.
    pub host: usize,
    pub z_size: usize,
    /// `I(V; X_A | X_(2^A − A))` on the input scheme, the amount by which the
    /// host's corner rate drops. Zero when `A` is the top layer.
    pub dropped: f64,
    /// Decoders that could not read the new inputs and were removed.
    pub removed_decoders: Vec<u32>,
}

/// Corner of the EGC rate polyhedron to preserve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EgcVertex {
    /// `R_1 = f(1)`, `R_2 = f(12) − f(1)`.
    V1,
    V2,
}

impl EgcVertex {
    fn order(self) -> [usize; 2] {
        match self {
            EgcVertex::V1 => [1, 2],
            EgcVertex::V2 => [2, 1],
        }
    }
}

fn check_pi(pi: &[usize], l: usize) -> Result<()> {
    let mut seen = vec![false; l + 1];
    if pi.len() != l || pi.iter().any(|&k| k == 0 || k > l || std::mem::replace(&mut seen[k], true)) {
        return Err(Error::InvalidPermutation(format!("{pi:?} is not a permutation of 1..={l}")));
    }
    Ok(())
}

/// Replaces `X_A` (|A| ≥ 2) by `f(V, Z)`, where the host is the member of
/// `A` placed last by `pi`, and `V` collects the non-constant auxiliaries
/// `X_B` with `B` inside the `pi`-prefix ending at the host, `B ≠ A`.
/// The host alphabet becomes the product `(X_host, Z)` (symbol `x·|Z| + z`).
/// Decoders reading `X_A` or the host are rewritten; those whose subset may
/// not read every new input are removed and listed.
pub fn absorb_layer(s: &AuxScheme<Rational>, a: u32, pi: &[usize]) -> Result<Absorbed> {
    expect_family(s, &[Family::Vkg, Family::VkgStar])?;
    check_pi(pi, s.l)?;
    if a.count_ones() < 2 || a & !s.full() != 0 {
        return Err(Error::Scheme(format!("{} is not a refinement layer", aux_name(a))));
    }
    let pos = |k: usize| pi.iter().position(|&p| p == k).unwrap();
    let host = *members(a).iter().max_by_key(|&&k| pos(k)).unwrap();
    let prefix: u32 = pi[..=pos(host)].iter().map(|&k| 1u32 << (k - 1)).sum();
    let joint = &s.joint;
    let a_name = aux_name(a);
    let host_name = aux_name(1 << (host - 1));
    let v_names: Vec<String> = (0..=prefix)
        .filter(|&b| b & !prefix == 0 && b != a)
        .map(aux_name)
        .filter(|n| joint.has_axis(n) && joint.axis(n).is_ok_and(|x| x.size > 1))
        .collect();

    let dropped = {
        let fl = joint.to_float();
        let mut c = InfoCalc::new(&fl);
        let below: Vec<String> = (0..a).filter(|&b| b & !a == 0).map(aux_name).filter(|n| fl.has_axis(n)).collect();
        let extra: Vec<&String> = v_names.iter().filter(|n| !below.contains(n)).collect();
        if extra.is_empty() { 0.0 } else { c.mi(c.mask(&extra)?, c.mask(&[&a_name])?, c.mask(&below)?).max(0.0) }
    };

    let dec = frl_decompose(joint, &v_names, std::slice::from_ref(&a_name), Z_AXIS)?;
    let nz = dec.z_size();
    let composed = compose_joint(joint, &dec)?;
    let merged = absorb_noise(&composed, &host_name, Z_AXIS)?;
    let keep: Vec<&str> = merged.axis_names().into_iter().filter(|n| *n != a_name).collect();
    let order: Vec<String> = joint.axis_names().into_iter().map(String::from).collect();
    let new_joint = merged.marginalize(&keep)?.with_constant_axis(&a_name)?.reorder(&order)?;

    let old_sizes: BTreeMap<String, usize> =
        joint.axes().iter().map(|x| (x.name.clone(), x.size)).collect();
    let mut decoders = BTreeMap::new();
    let mut removed = Vec::new();
    for (&k, d) in &s.decoders {
        let reads_a = d.inputs.contains(&a_name);
        if !reads_a && !d.inputs.contains(&host_name) {
            decoders.insert(k, d.clone());
            continue;
        }
        let allowed = s.family.decoder_inputs(s.l, k);
        let mut inputs: Vec<String> = d.inputs.iter().filter(|n| **n != a_name).cloned().collect();
        if reads_a {
            for n in v_names.iter().chain([&host_name]) {
                if !inputs.contains(n) {
                    inputs.push(n.clone());
                }
            }
        }
        if !inputs.iter().all(|n| allowed.iter().any(|&m| aux_name(m) == *n)) {
            removed.push(k);
            continue;
        }
        let rewritten = rewrite_decoder(d, &inputs, &new_joint, &old_sizes, &dec, &v_names, &a_name, &host_name, nz)?;
        decoders.insert(k, rewritten);
    }
    let scheme = AuxScheme::new(s.family, s.l, new_joint, decoders)?;
    Ok(Absorbed { scheme, layer: a, host, z_size: nz, dropped, removed_decoders: removed })
}

#[allow(clippy::too_many_arguments)]
fn rewrite_decoder(
    d: &Decoder,
    inputs: &[String],
    joint: &JointPmf<Rational>,
    old_sizes: &BTreeMap<String, usize>,
    dec: &FrlDecomposition,
    v_names: &[String],
    a_name: &str,
    host_name: &str,
    nz: usize,
) -> Result<Decoder> {
    let shape: Vec<usize> = inputs.iter().map(|n| joint.axis(n).map(|x| x.size)).collect::<Result<_>>()?;
    let v_shape: Vec<usize> = v_names.iter().map(|n| old_sizes[n]).collect();
    let mut table = vec![0usize; shape.iter().product()];
    let mut old_idx = vec![0usize; d.inputs.len()];
    for_each_index(&shape, |idx, flat| {
        let val = |name: &str| {
            let j = inputs.iter().position(|n| n == name).unwrap();
            if name == host_name { idx[j] / nz } else { idx[j] }
        };
        let z = inputs.iter().position(|n| n == host_name).map(|j| idx[j] % nz);
        for (j, name) in d.inputs.iter().enumerate() {
            old_idx[j] = if name == a_name {
                let v: Vec<usize> = v_names.iter().map(|n| val(n)).collect();
                dec.eval(flat_index(&v_shape, &v), z.unwrap_or(0))
            } else {
                val(name)
            };
        }
        table[flat] = d.eval(&old_idx);
    });
    Decoder::new(inputs.to_vec(), shape, table)
}

/// Reduction of an EGC scheme to EGC*: decompose `X{1,2}`
/// over `(X{1}, X{2})`, set `X{2}' = (X{2}, Z)` for `V1` (or `X{1}' = (X{1}, Z)`
/// for `V2`), and drop `X{1,2}`. The chosen corner and all three
/// distortions are unchanged.
pub fn egc_vertex_to_egc_star(s: &AuxScheme<Rational>, which: EgcVertex) -> Result<AuxScheme<Rational>> {
    expect_family(s, &[Family::Egc])?;
    let vkg = s.as_family(Family::Vkg)?;
    let out = absorb_layer(&vkg, 3, &which.order())?;
    debug_assert!(out.removed_decoders.is_empty());
    out.scheme.as_family(Family::EgcStar)
}

/// Removes `X_{I_L}` by absorbing it into the description `pi` places last.
/// The greedy corner for `pi` and all decoder distortions are unchanged.
pub fn vkg_eliminate_top_layer(s: &AuxScheme<Rational>, pi: &[usize]) -> Result<AuxScheme<Rational>> {
    expect_family(s, &[Family::Vkg])?;
    absorb_layer(s, s.full(), pi)?.scheme.as_family(Family::VkgStar)
}

/// Chained elimination down to `X{}` and the singletons.
#[derive(Debug, Clone)]
pub struct Elimination {
    /// VKG scheme whose refinement layers are all constant.
    pub scheme: AuxScheme<Rational>,
    pub steps: Vec<Absorbed>,
    pub removed_decoders: Vec<u32>,
}

impl Elimination {
    /// Drop of each description's corner rate (identity order), summed over steps.
    pub fn rate_drops(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.scheme.l];
        for st in &self.steps {
            out[st.host - 1] += st.dropped;
        }
        out
    }
}

/// Layers in elimination order: hosts descending, then larger layers first,
/// then reverse lexicographic.
pub(crate) fn chain_order(l: usize) -> Vec<u32> {
    let mut masks: Vec<u32> = (1..1u32 << l).filter(|m| m.count_ones() >= 2).collect();
    masks.sort_by_key(|&m| {
        let host = 32 - m.leading_zeros();
        let mut key = members(m);
        key.reverse();
        std::cmp::Reverse((host, m.count_ones(), key))
    });
    masks
}

/// Successively absorbs every layer `A` with `|A| ≥ 2` (identity order), so
/// only `X{}` and `X{1}, …, X{L}` stay random. Decoders for subsets outside
/// `{1}, …, {L}, {1,2}, …, {1..L}` are removed where they cannot be
/// rewritten. The top layer costs nothing; each later step lowers its host's
/// corner rate by the step's `dropped` term.
pub fn eliminate_to_singletons(s: &AuxScheme<Rational>) -> Result<Elimination> {
    expect_family(s, &[Family::Vkg])?;
    let id: Vec<usize> = (1..=s.l).collect();
    let mut cur = s.clone();
    let mut steps = Vec::new();
    let mut removed = Vec::new();
    for a in chain_order(s.l) {
        let st = absorb_layer(&cur, a, &id)?;
        removed.extend(&st.removed_decoders);
        cur = st.scheme.clone();
        steps.push(st);
    }
    removed.sort_unstable();
    Ok(Elimination { scheme: cur, steps, removed_decoders: removed })
}

/// Whether `X_A` has become a constant for every `|A| ≥ 2`.
pub fn only_singletons<T: crate::prob::Prob>(s: &AuxScheme<T>) -> bool {
    s.joint.axes().iter().all(|x| {
        x.name == SOURCE || x.size == 1 || (0..=s.full()).any(|m: u32| m.count_ones() <= 1 && aux_name(m) == x.name)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optim::restart_rng;
    use crate::polymatroid::{greedy_vertex, PsiCalc, SubsetFn};
    use crate::prob::{expected_distortion, Alphabet, DistortionMeasure};
    use crate::regions::eval::{on_source, rate_bounds};
    use crate::regions::search::random_joint;

    fn ham() -> DistortionMeasure {
        DistortionMeasure::hamming(Alphabet::new("X", 2).unwrap(), Alphabet::new("Xhat", 2).unwrap())
    }

    fn random_scheme(family: Family, l: usize, seed: u64, t: u64) -> AuxScheme<Rational> {
        let mut rng = restart_rng(seed, t);
        // At L = 3 two constant layers keep the exact arithmetic small.
        let size = |m: u32| if l == 3 && (m == 0 || m == 5) { 1 } else { 2 };
        let aux: Vec<(u32, usize)> = family.aux_masks(l).into_iter().map(|m| (m, size(m))).collect();
        let j = random_joint(&mut rng, 2, &aux);
        let s = AuxScheme::new(family, l, j, BTreeMap::new()).unwrap().with_bayes_decoders(&ham()).unwrap();
        s.snap().unwrap().0
    }

    fn exact_distortions(s: &AuxScheme<Rational>) -> BTreeMap<u32, Rational> {
        let d = on_source(&ham()).unwrap();
        s.decoders.iter().map(|(&k, dec)| (k, expected_distortion(&s.joint, &d, dec).unwrap())).collect()
    }

    fn vertex(s: &AuxScheme<Rational>, pi: &[usize]) -> Vec<f64> {
        greedy_vertex(&rate_bounds(&s.to_float()).unwrap(), pi).unwrap().rates
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn constant_top_layer_is_identity() {
        let s = random_scheme(Family::EgcStar, 2, 1, 0).as_family(Family::Egc).unwrap();
        let out = absorb_layer(&s.as_family(Family::Vkg).unwrap(), 3, &[1, 2]).unwrap();
        assert_eq!(out.z_size, 1);
        let t = egc_vertex_to_egc_star(&s, EgcVertex::V1).unwrap();
        assert_eq!(t.joint.to_float().values(), s.as_family(Family::EgcStar).unwrap().joint.to_float().values());
    }

    #[test]
    fn refinement_equal_to_source() {
        let x = Alphabet::new("X", 2).unwrap();
        let j = JointPmf::uniform(vec![x])
            .unwrap()
            .with_constant_axis("X{1}")
            .unwrap()
            .with_constant_axis("X{2}")
            .unwrap()
            .with_function_axis(Alphabet::new("X{1,2}", 2).unwrap(), &["X"], |i| i[0])
            .unwrap();
        let (j, _) = j.snap(1000).unwrap();
        let mut decs = BTreeMap::new();
        decs.insert(3, Decoder::new(vec!["X{1,2}".into()], vec![2], vec![0, 1]).unwrap());
        let s = AuxScheme::new(Family::Egc, 2, j, decs).unwrap();
        assert!(close(&vertex(&s, &[1, 2]), &[0.0, 1.0], 1e-12));
        let t = egc_vertex_to_egc_star(&s, EgcVertex::V1).unwrap();
        assert!(close(&vertex(&t, &[1, 2]), &[0.0, 1.0], 1e-12));
        assert_eq!(t.joint.axis("X{2}").unwrap().size, 2);
        assert_eq!(exact_distortions(&t)[&3], Rational::from_integer(0.into()));
    }

    #[test]
    fn egc_corners_survive() {
        for t in 0..100 {
            let s = random_scheme(Family::Egc, 2, 11, t);
            let before = exact_distortions(&s);
            for (which, pi) in [(EgcVertex::V1, [1, 2]), (EgcVertex::V2, [2, 1])] {
                let out = egc_vertex_to_egc_star(&s, which).unwrap();
                assert_eq!(out.family, Family::EgcStar);
                let (a, b) = (vertex(&s, &pi), vertex(&out, &pi));
                assert!(close(&a, &b, 1e-9), "scheme {t} {which:?}: {a:?} vs {b:?}");
                assert_eq!(exact_distortions(&out), before, "scheme {t}");
            }
        }
    }

    #[test]
    fn top_layer_elimination_keeps_the_corner() {
        for l in [2usize, 3] {
            let pis = crate::polymatroid::permutations(l);
            for t in 0..if l == 2 { 30 } else { 6 } {
                let s = random_scheme(Family::Vkg, l, 21 + l as u64, t);
                let pi = &pis[t as usize % pis.len()];
                let out = vkg_eliminate_top_layer(&s, pi).unwrap();
                assert_eq!(out.family, Family::VkgStar);
                let (a, b) = (vertex(&s, pi), vertex(&out, pi));
                assert!(close(&a, &b, 1e-9), "L={l} {pi:?}: {a:?} vs {b:?}");
                assert_eq!(exact_distortions(&out), exact_distortions(&s));
                if l == 2 {
                    let zb = out.as_family(Family::Zb).unwrap();
                    assert!(close(&vertex(&zb, pi), &a, 1e-9));
                }
            }
        }
    }

    #[test]
    fn chained_elimination_accounts_for_every_drop() {
        for t in 0..4 {
            let mut rng = restart_rng(31, t);
            let base = random_joint(&mut rng, 2, &[(0, 2), (1, 2), (2, 2), (3, 2), (4, 2), (7, 2)]);
            let j = base
                .with_function_axis(Alphabet::new("X{1,3}", 2).unwrap(), &["X{1}", "X{3}"], |i| i[0] & i[1])
                .unwrap()
                .with_function_axis(Alphabet::new("X{2,3}", 2).unwrap(), &["X{2}", "X{3}"], |i| i[0] ^ i[1])
                .unwrap();
            let s = AuxScheme::new(Family::Vkg, 3, j, BTreeMap::new()).unwrap().with_bayes_decoders(&ham()).unwrap();
            let (s, _) = s.snap().unwrap();
            let e = eliminate_to_singletons(&s).unwrap();
            assert!(only_singletons(&e.scheme));
            let layers: Vec<u32> = e.steps.iter().map(|st| st.layer).collect();
            assert_eq!(layers, vec![7, 6, 5, 3]);
            assert_eq!(e.steps[0].dropped, 0.0);
            assert!(!e.removed_decoders.contains(&1) && !e.removed_decoders.contains(&3) && !e.removed_decoders.contains(&7));
            let id = [1, 2, 3];
            let before = vertex(&s, &id);
            let after = vertex(&e.scheme, &id);
            let drops = e.rate_drops();
            let w = [1.0, 0.7, 0.4];
            let lhs: f64 = after.iter().zip(&w).map(|(r, a)| r * a).sum::<f64>()
                + drops.iter().zip(&w).map(|(r, a)| r * a).sum::<f64>();
            let rhs: f64 = before.iter().zip(&w).map(|(r, a)| r * a).sum();
            assert!((lhs - rhs).abs() < 1e-9, "{lhs} vs {rhs}");
            let d0 = exact_distortions(&s);
            for (k, v) in exact_distortions(&e.scheme) {
                assert_eq!(v, d0[&k], "decoder {k}");
            }
            let fl = e.scheme.to_float().joint;
            let ih = crate::regions::ih_weighted_sum_rate(&fl, &w).unwrap();
            let mut calc = PsiCalc::new(&fl, 3).unwrap();
            let psi = SubsetFn::from_fn(3, |k| calc.psi(k));
            assert!((ih - greedy_vertex(&psi, &id).unwrap().weighted_sum(&w)).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_bad_layers() {
        let s = random_scheme(Family::Vkg, 2, 3, 0);
        assert!(absorb_layer(&s, 1, &[1, 2]).is_err());
        assert!(absorb_layer(&s, 3, &[1, 1]).is_err());
        assert!(vkg_eliminate_top_layer(&random_scheme(Family::Egc, 2, 3, 1), &[1, 2]).is_err());
    }
}
