//! Seeded property suites over random instances, shared by the command line
//! and the acceptance tests. Reports carry worst-case metrics so reruns with
//! the same seed serialize identically.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::frl::{frl_decompose, frl_verify};
use crate::optim::{random_simplex, restart_rng};
use crate::polymatroid::{
    aux_name, check_contra_polymatroid, greedy_vertex, min_weighted_sum, min_weighted_sum_exhaustive,
    permutations, PsiCalc, SubsetFn,
};
use crate::prob::{expected_distortion, Alphabet, Channel, DistortionMeasure, JointPmf, Rational};
use crate::regions::eval::{on_source, rate_bounds};
use crate::regions::{
    egc_vertex_to_egc_star, ih_weighted_sum_rate, vkg_eliminate_top_layer, AuxScheme, EgcVertex, Family,
};
use crate::scalable::{
    bss_d2_star_closed_form, bss_d2_star_structured, d2_star, D2Options, ScalableInstance,
};
use crate::strategy::{capacity_direct, capacity_strategy, strategy_from_frl, StateChannel};

/// Pass/fail counts and worst observed metrics of one suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub seed: u64,
    pub cases: usize,
    pub passed: usize,
    pub failed: usize,
    pub metrics: BTreeMap<String, f64>,
    /// Up to ten failing case descriptions.
    pub failures: Vec<String>,
}

impl SuiteReport {
    pub fn passes(&self) -> bool {
        self.failed == 0 && self.cases > 0
    }
}

/// One case: per-metric values plus an optional failure message.
struct Case {
    metrics: Vec<(&'static str, f64)>,
    failure: Option<String>,
}

fn collect(suite: &str, seed: u64, cases: Vec<Result<Case>>) -> SuiteReport {
    let mut metrics: BTreeMap<String, f64> = BTreeMap::new();
    let mut failures = Vec::new();
    let mut failed = 0;
    let n = cases.len();
    for (i, c) in cases.into_iter().enumerate() {
        let msg = match c {
            Ok(c) => {
                for (k, v) in c.metrics {
                    let e = metrics.entry(k.to_string()).or_insert(f64::NEG_INFINITY);
                    *e = e.max(v);
                }
                c.failure
            }
            Err(e) => Some(e.to_string()),
        };
        if let Some(m) = msg {
            failed += 1;
            if failures.len() < 10 {
                failures.push(format!("case {i}: {m}"));
            }
        }
    }
    SuiteReport { suite: suite.into(), seed, cases: n, passed: n - failed, failed, metrics, failures }
}

fn check(fails: &mut Vec<String>, ok: bool, what: impl FnOnce() -> String) {
    if !ok {
        fails.push(what());
    }
}

fn finish(metrics: Vec<(&'static str, f64)>, fails: Vec<String>) -> Case {
    Case { metrics, failure: (!fails.is_empty()).then(|| fails.join("; ")) }
}

/// Random exact joint over `(name, size)` axes with integer weights in `1..=max_weight`.
pub fn random_rational_joint<R: Rng>(rng: &mut R, axes: &[(&str, usize)], max_weight: u32) -> Result<JointPmf<Rational>> {
    let alph: Vec<Alphabet> = axes.iter().map(|&(n, s)| Alphabet::new(n, s)).collect::<Result<_>>()?;
    let n: usize = axes.iter().map(|a| a.1).product();
    let w = (0..n).map(|_| Rational::from_integer(BigInt::from(rng.random_range(1..=max_weight)))).collect();
    JointPmf::from_weights(alph, w)
}

/// Exact reconstruction, `I(V;Z)`, `I(U;Z|V,W)` and the cardinality bounds
/// on random joints with `|U|, |V|, |W| ≤ 4`.
pub fn frl_suite(seed: u64, cases: usize) -> SuiteReport {
    let runs = (0..cases)
        .into_par_iter()
        .map(|t| {
            let mut rng = restart_rng(seed, t as u64);
            let (nu, nv, nw) = (rng.random_range(1..=4), rng.random_range(1..=4), rng.random_range(1..=4));
            // Some zero cells exercise undefined rows.
            let mut p = random_rational_joint(&mut rng, &[("U", nu), ("V", nv), ("W", nw)], 6)?;
            if rng.random_bool(0.3) {
                let w: Vec<Rational> = p
                    .values()
                    .iter()
                    .map(|v| if rng.random_bool(0.2) { Rational::from_integer(0.into()) } else { v.clone() })
                    .collect();
                if let Ok(q) = JointPmf::from_weights(p.axes().to_vec(), w) {
                    p = q;
                }
            }
            let dec = frl_decompose(&p, &["V"], &["W"], "Z")?;
            let r = frl_verify(&p, &dec)?;
            let nz = dec.z_size();
            let mut fails = Vec::new();
            check(&mut fails, r.reconstruction_error == 0.0, || format!("reconstruction error {}", r.reconstruction_error));
            check(&mut fails, r.independence_gap <= 1e-10, || format!("I(V;Z) = {}", r.independence_gap));
            check(&mut fails, r.markov_gap <= 1e-10, || format!("I(U;Z|V,W) = {}", r.markov_gap));
            check(&mut fails, nz <= nv * (nw - 1) + 1, || format!("|Z| = {nz} > |V|(|W|-1)+1"));
            if nv >= 2 {
                check(&mut fails, nz < nv * nw, || format!("|Z| = {nz} > |V||W|-1"));
            }
            Ok(finish(
                vec![
                    ("reconstruction_error", r.reconstruction_error),
                    ("independence_gap", r.independence_gap),
                    ("markov_gap", r.markov_gap),
                ],
                fails,
            ))
        })
        .collect();
    collect("frl", seed, runs)
}

fn vkg_aux(l: usize) -> Vec<(u32, usize)> {
    (0..1u32 << l).map(|m| (m, 2)).collect()
}

/// `ψ(∅) = 0`, monotonicity and supermodularity on random binary `L = 3` schemes.
pub fn polymatroid_suite(seed: u64, cases: usize) -> SuiteReport {
    let runs = (0..cases)
        .into_par_iter()
        .map(|t| {
            let mut rng = restart_rng(seed, t as u64);
            let j = crate::regions::search::random_joint(&mut rng, 2, &vkg_aux(3));
            let mut calc = PsiCalc::new(&j, 3)?;
            let psi = SubsetFn::from_fn(3, |k| calc.psi(k));
            let r = check_contra_polymatroid(&psi, 1e-9)?;
            let mut fails = Vec::new();
            check(&mut fails, psi.get(0) == 0.0, || format!("psi(empty) = {}", psi.get(0)));
            check(&mut fails, r.monotonicity_violation <= 1e-9, || format!("monotonicity {}", r.monotonicity_violation));
            check(&mut fails, r.supermodularity_violation <= 1e-9, || format!("supermodularity {}", r.supermodularity_violation));
            Ok(finish(
                vec![
                    ("psi_empty", psi.get(0).abs()),
                    ("monotonicity_violation", r.monotonicity_violation),
                    ("supermodularity_violation", r.supermodularity_violation),
                ],
                fails,
            ))
        })
        .collect();
    collect("polymatroid", seed, runs)
}

fn hamming() -> DistortionMeasure {
    DistortionMeasure::hamming(Alphabet::new("X", 2).expect("size 2"), Alphabet::new("Xhat", 2).expect("size 2"))
}

/// Random binary scheme with exact small-denominator entries and Bayes decoders.
fn random_exact_scheme(seed: u64, t: u64, family: Family, l: usize) -> Result<AuxScheme<Rational>> {
    let mut rng = restart_rng(seed, t);
    let names: Vec<String> = family.aux_masks(l).into_iter().map(aux_name).collect();
    let mut axes: Vec<(&str, usize)> = vec![("X", 2)];
    axes.extend(names.iter().map(|n| (n.as_str(), 2)));
    let j = random_rational_joint(&mut rng, &axes, 8)?;
    let fl = AuxScheme::new(family, l, j.to_float(), BTreeMap::new())?.with_bayes_decoders(&hamming())?;
    AuxScheme::new(family, l, j, fl.decoders)
}

fn exact_distortions(s: &AuxScheme<Rational>) -> Result<BTreeMap<u32, Rational>> {
    let d = on_source(&hamming())?;
    s.decoders.iter().map(|(&k, dec)| Ok((k, expected_distortion(&s.joint, &d, dec)?))).collect()
}

fn vertex(s: &AuxScheme<Rational>, pi: &[usize]) -> Result<Vec<f64>> {
    Ok(greedy_vertex(&rate_bounds(&s.to_float())?, pi)?.rates)
}

fn max_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Both EGC corners survive the reduction to EGC*: rates within 1e-9 bits,
/// distortions exactly.
pub fn egc_suite(seed: u64, cases: usize) -> SuiteReport {
    let runs = (0..cases)
        .into_par_iter()
        .map(|t| {
            let s = random_exact_scheme(seed, t as u64, Family::Egc, 2)?;
            let before = exact_distortions(&s)?;
            let mut fails = Vec::new();
            let mut worst = 0.0f64;
            for (which, pi) in [(EgcVertex::V1, [1, 2]), (EgcVertex::V2, [2, 1])] {
                let out = egc_vertex_to_egc_star(&s, which)?;
                let gap = max_gap(&vertex(&s, &pi)?, &vertex(&out, &pi)?);
                worst = worst.max(gap);
                check(&mut fails, gap <= 1e-9, || format!("{which:?} rate gap {gap}"));
                check(&mut fails, exact_distortions(&out)? == before, || format!("{which:?} distortions changed"));
            }
            Ok(finish(vec![("rate_gap", worst)], fails))
        })
        .collect();
    collect("egc", seed, runs)
}

/// Top-layer elimination keeps greedy corners: `L = 2` (VKG to ZB, identity
/// and swapped orders) and `L = 3` for all six orders.
pub fn elimination_suite(seed: u64, l2_cases: usize, l3_cases: usize) -> SuiteReport {
    let jobs: Vec<(usize, usize)> = (0..l2_cases).map(|t| (2, t)).chain((0..l3_cases).map(|t| (3, t))).collect();
    let runs = jobs
        .into_par_iter()
        .map(|(l, t)| {
            let s = random_exact_scheme(seed.wrapping_add(l as u64), t as u64, Family::Vkg, l)?;
            let mut fails = Vec::new();
            let mut worst = 0.0f64;
            for pi in permutations(l) {
                let out = vkg_eliminate_top_layer(&s, &pi)?;
                let target = if l == 2 { out.as_family(Family::Zb)? } else { out };
                let gap = max_gap(&vertex(&s, &pi)?, &vertex(&target, &pi)?);
                worst = worst.max(gap);
                check(&mut fails, gap <= 1e-9, || format!("L={l} order {pi:?}: gap {gap}"));
            }
            Ok(finish(vec![(if l == 2 { "rate_gap_l2" } else { "rate_gap_l3" }, worst)], fails))
        })
        .collect();
    collect("elimination", seed, runs)
}

/// `ih_weighted_sum_rate` against `Σ α_k R*_k` on the padded scheme, and the
/// greedy optimum against all six vertices, for weights (3, 2, 1).
pub fn identity_suite(seed: u64, cases: usize) -> SuiteReport {
    let w = [3.0, 2.0, 1.0];
    let runs = (0..cases)
        .into_par_iter()
        .map(|t| {
            let mut rng = restart_rng(seed, t as u64);
            let mut j = crate::regions::search::random_joint(&mut rng, 2, &[(0, 2), (1, 2), (2, 2), (4, 2)]);
            for m in [3u32, 5, 6, 7] {
                j = j.with_constant_axis(&aux_name(m))?;
            }
            let ih = ih_weighted_sum_rate(&j, &w)?;
            let mut calc = PsiCalc::new(&j, 3)?;
            let psi = SubsetFn::from_fn(3, |k| calc.psi(k));
            let corner = greedy_vertex(&psi, &[1, 2, 3])?.weighted_sum(&w);
            let greedy = min_weighted_sum(&psi, &w)?.0;
            let exhaustive = min_weighted_sum_exhaustive(&psi, &w)?.0;
            let gap = (ih - corner).abs();
            let mut fails = Vec::new();
            check(&mut fails, gap <= 1e-9, || format!("identity gap {gap}"));
            check(&mut fails, greedy == exhaustive, || format!("greedy {greedy} vs exhaustive {exhaustive}"));
            Ok(finish(vec![("identity_gap", gap), ("greedy_minus_exhaustive", (greedy - exhaustive).abs())], fails))
        })
        .collect();
    collect("identity", seed, runs)
}

/// The three region-equivalence checks merged into one report.
pub fn equivalence_suite(seed: u64) -> SuiteReport {
    let parts = [egc_suite(seed, 100), elimination_suite(seed, 100, 20), identity_suite(seed, 100)];
    let mut out = SuiteReport {
        suite: "equivalence".into(),
        seed,
        cases: 0,
        passed: 0,
        failed: 0,
        metrics: BTreeMap::new(),
        failures: Vec::new(),
    };
    for p in parts {
        out.cases += p.cases;
        out.passed += p.passed;
        out.failed += p.failed;
        for (k, v) in p.metrics {
            out.metrics.insert(format!("{}.{k}", p.suite), v);
        }
        out.failures.extend(p.failures.into_iter().map(|f| format!("{}: {f}", p.suite)).take(10));
    }
    out
}

/// Grid of `D12 = grid, 2 grid, …, ≤ 0.45` and `D12 < D1 < 0.5` in steps of `grid`.
pub fn bss_grid(grid: f64) -> Vec<(f64, f64)> {
    let n = (0.5 / grid).round() as usize;
    let mut out = Vec::new();
    for i in 1..n {
        let d12 = i as f64 * grid;
        if d12 > 0.45 + 1e-12 {
            break;
        }
        for j in i + 1..n {
            out.push((j as f64 * grid, d12));
        }
    }
    out
}

/// Structured brute force against the closed form on the grid; with
/// `general_restarts`, also the general optimizer on three spot cases.
pub fn bss_suite(seed: u64, grid: f64, general_restarts: Option<usize>) -> SuiteReport {
    let pts = bss_grid(grid);
    let mut runs: Vec<Result<Case>> = pts
        .par_iter()
        .map(|&(d1, d12)| {
            let closed = bss_d2_star_closed_form(d1, d12)?;
            let s = bss_d2_star_structured(d1, d12, 1e-4)?;
            let gap = (s.value - closed).abs();
            let mut fails = Vec::new();
            check(&mut fails, gap <= 1e-6, || format!("({d1}, {d12}): structured {} vs {closed}", s.value));
            Ok(finish(vec![("structured_gap", gap)], fails))
        })
        .collect();
    if let Some(restarts) = general_restarts {
        for (d1, d12, want) in [(0.3, 0.1, 0.3), (0.4, 0.2, 0.3), (0.45, 0.05, 0.1)] {
            let case = (|| {
                let inst = ScalableInstance::bss(0.0, d1, d12)?;
                let r = d2_star(&inst, &D2Options::new(14, restarts, seed))?;
                let gap = (r.value - want).abs();
                let mut fails = Vec::new();
                check(&mut fails, gap <= 5e-3, || format!("general ({d1}, {d12}): {} vs {want}", r.value));
                check(&mut fails, r.value >= want - 1e-6, || format!("general ({d1}, {d12}) below the closed form"));
                check(&mut fails, r.rigorous, || format!("general ({d1}, {d12}) not rigorous"));
                Ok(finish(vec![("general_gap", gap)], fails))
            })();
            runs.push(case);
        }
    }
    collect("bss", seed, runs)
}

fn random_state_channel<R: Rng>(rng: &mut R) -> Result<StateChannel> {
    let mut flat = Vec::new();
    for _x in 0..2 {
        for _s in 0..2 {
            flat.extend(random_simplex(rng, 2));
        }
    }
    let law = Channel::new(
        vec![Alphabet::new("X", 2)?, Alphabet::new("S", 2)?],
        vec![Alphabet::new("Y", 2)?],
        flat,
    )?;
    StateChannel::new(random_simplex(rng, 2), law)
}

/// Strategy capacity against direct capacity, and rate preservation of the
/// decomposition-derived strategies, on random 2-state binary channels.
pub fn strategy_suite(seed: u64, cases: usize) -> SuiteReport {
    let runs = (0..cases)
        .into_par_iter()
        .map(|t| {
            let mut rng = restart_rng(seed, t as u64);
            let ch = random_state_channel(&mut rng)?;
            let d = capacity_direct(&ch);
            let s = capacity_strategy(&ch)?;
            let cap_gap = (d.value - s.value).abs();
            let input: Vec<f64> = (0..2).flat_map(|_| random_simplex(&mut rng, 2)).collect();
            let px = Channel::new(vec![Alphabet::new("S", 2)?], vec![Alphabet::new("X", 2)?], input)?;
            let f = strategy_from_frl(&px, &ch)?;
            let frl_gap = (f.value - f.direct).abs();
            let mut fails = Vec::new();
            check(&mut fails, cap_gap <= 1e-6, || format!("capacity gap {cap_gap}"));
            check(&mut fails, frl_gap <= 1e-9, || format!("strategy rate gap {frl_gap}"));
            check(&mut fails, f.independence_gap <= 1e-10, || format!("I(S;Z) = {}", f.independence_gap));
            Ok(finish(
                vec![("capacity_gap", cap_gap), ("frl_rate_gap", frl_gap), ("independence_gap", f.independence_gap)],
                fails,
            ))
        })
        .collect();
    collect("strategy", seed, runs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_suites_pass_and_repeat() {
        let a = frl_suite(3, 40);
        assert!(a.passes(), "{:?}", a.failures);
        assert_eq!(a, frl_suite(3, 40));
        assert!(polymatroid_suite(3, 20).passes());
        assert!(egc_suite(3, 10).passes());
        let e = elimination_suite(3, 10, 1);
        assert!(e.passes(), "{:?}", e.failures);
        assert!(identity_suite(3, 10).passes());
        assert!(strategy_suite(3, 5).passes());
    }

    #[test]
    fn bss_grid_shape() {
        let g = bss_grid(0.05);
        assert!(g.iter().any(|p| (p.0 - 0.3).abs() < 1e-12 && (p.1 - 0.1).abs() < 1e-12));
        assert!(g.iter().all(|&(d1, d12)| d12 < d1 && d1 < 0.5 && d12 <= 0.45 + 1e-12));
        assert_eq!(g.len(), 36);
        assert!(bss_suite(0, 0.1, None).passes());
    }
}
