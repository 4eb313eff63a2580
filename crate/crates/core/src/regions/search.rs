//! Multi-start random search for the least weighted sum rate reachable by a
//! family under distortion targets.

use std::collections::BTreeMap;
use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::{random_simplex, restart_rng};
use crate::polymatroid::{aux_name, min_weighted_sum, SOURCE};
use crate::prob::{bayes_decoder, expected_distortion, Alphabet, Decoder, DistortionMeasure, JointPmf};

use super::eval::{on_source, rate_bounds};
use super::{AuxScheme, Family, RegionBounds};

/// Distortion slack under which a scheme counts as feasible.
pub const FEASIBILITY_TOL: f64 = 1e-7;

/// Random joint of `X` (size `nx`) and the listed auxiliaries `(mask, size)`,
/// in that axis order.
pub fn random_joint<R: Rng>(rng: &mut R, nx: usize, aux: &[(u32, usize)]) -> JointPmf<f64> {
    let px = random_simplex(rng, nx);
    let n_out: usize = aux.iter().map(|a| a.1).product();
    let mut values = Vec::with_capacity(nx * n_out);
    for p in &px {
        values.extend(random_simplex(rng, n_out).into_iter().map(|q| p * q));
    }
    let mut axes = vec![Alphabet::new(SOURCE, nx).expect("nonempty source")];
    axes.extend(aux.iter().map(|&(m, n)| Alphabet::new(aux_name(m), n).expect("nonempty alphabet")));
    JointPmf::new(axes, values).expect("valid random pmf")
}

/// What to minimize.
#[derive(Debug, Clone)]
pub struct SearchProblem {
    pub source: JointPmf<f64>,
    pub d: DistortionMeasure,
    pub family: Family,
    pub l: usize,
    /// `D_K` for the constrained decoder subsets.
    pub targets: BTreeMap<u32, f64>,
    pub weights: Vec<f64>,
    /// Alphabet sizes per auxiliary mask; missing entries use the defaults
    /// (`|X{}| = 4`, otherwise the reconstruction alphabet). Size 1 pins a constant.
    pub cardinalities: BTreeMap<u32, usize>,
}

impl SearchProblem {
    pub fn new(
        source: JointPmf<f64>,
        d: DistortionMeasure,
        family: Family,
        weights: Vec<f64>,
        targets: BTreeMap<u32, f64>,
    ) -> Self {
        let l = family.fixed_l().unwrap_or(weights.len());
        Self { source, d, family, l, targets, weights, cardinalities: BTreeMap::new() }
    }

    pub fn with_cardinality(mut self, mask: u32, size: usize) -> Self {
        self.cardinalities.insert(mask, size);
        self
    }

    fn aux_sizes(&self) -> Vec<(u32, usize)> {
        self.family
            .aux_masks(self.l)
            .into_iter()
            .map(|m| {
                let default = if m == 0 { 4 } else { self.d.recon().size };
                (m, self.cardinalities.get(&m).copied().unwrap_or(default))
            })
            .collect()
    }

    fn validate(&self) -> Result<()> {
        self.family.check_l(self.l)?;
        if self.source.axes().len() != 1 {
            return Err(Error::Scheme("the source must be a single-axis pmf".into()));
        }
        if self.weights.len() != self.l || self.weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidWeights(format!("need {} nonnegative weights", self.l)));
        }
        let full = (1u32 << self.l) - 1;
        for (&k, &t) in &self.targets {
            if k == 0 || k & !full != 0 {
                return Err(Error::Decoder(format!("target index {k:#b} is not a nonempty subset of 1..={}", self.l)));
            }
            if !t.is_finite() || t < 0.0 {
                return Err(Error::Domain(format!("distortion target {t} for {}", aux_name(k))));
            }
        }
        if let Some((m, _)) = self.cardinalities.iter().find(|(_, &n)| n == 0) {
            return Err(Error::InvalidAlphabet(format!("cardinality 0 for {}", aux_name(*m))));
        }
        if self.source.axes()[0].size != self.d.source().size {
            return Err(Error::ShapeMismatch("source and distortion measure disagree on |X|".into()));
        }
        Ok(())
    }
}

/// Restarts and perturbation steps per restart; the seed fixes everything.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchBudget {
    pub restarts: usize,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for SearchBudget {
    fn default() -> Self {
        Self { restarts: 16, iterations: 4000, seed: 0 }
    }
}

/// One line of the optimization trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub restart: usize,
    pub iteration: usize,
    pub lambda: f64,
    pub penalized: f64,
    pub value: f64,
    pub violation: f64,
}

/// Writes trace rows as CSV with a header.
pub fn write_trace_csv<W: Write>(rows: &[TraceRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(|e| Error::Scheme(format!("trace: {e}")))?;
    }
    w.flush().map_err(|e| Error::Scheme(format!("trace: {e}")))?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    /// Weighted sum rate of `scheme`, re-evaluated; an upper bound on the optimum.
    pub value: f64,
    pub scheme: AuxScheme<f64>,
    pub bounds: RegionBounds,
    pub restart: usize,
    pub trace: Vec<TraceRow>,
}

struct Ctx<'a> {
    p: &'a SearchProblem,
    d: DistortionMeasure,
    px: Vec<f64>,
    axes: Vec<Alphabet>,
    n_out: usize,
    inputs: BTreeMap<u32, Vec<String>>,
}

#[derive(Clone)]
struct State {
    q: Vec<Vec<f64>>,
    value: f64,
    violation: f64,
}

impl<'a> Ctx<'a> {
    fn new(p: &'a SearchProblem) -> Result<Self> {
        let d = on_source(&p.d)?;
        let mut axes = vec![p.source.axes()[0].renamed(SOURCE)];
        let sizes = p.aux_sizes();
        axes.extend(sizes.iter().map(|&(m, n)| Alphabet::new(aux_name(m), n)).collect::<Result<Vec<_>>>()?);
        let inputs = (1..=(1u32 << p.l) - 1)
            .map(|k| (k, p.family.decoder_inputs(p.l, k).into_iter().map(aux_name).collect()))
            .collect();
        Ok(Self {
            p,
            d,
            px: p.source.values().to_vec(),
            axes,
            n_out: sizes.iter().map(|s| s.1).product(),
            inputs,
        })
    }

    fn joint(&self, q: &[Vec<f64>]) -> Result<JointPmf<f64>> {
        let values = self.px.iter().zip(q).flat_map(|(p, row)| row.iter().map(move |v| p * v)).collect();
        JointPmf::new(self.axes.clone(), values)
    }

    fn scheme(&self, q: &[Vec<f64>], all: bool) -> Result<AuxScheme<f64>> {
        let joint = self.joint(q)?;
        let mut decoders = BTreeMap::new();
        for (&k, ins) in &self.inputs {
            if all || self.p.targets.contains_key(&k) {
                decoders.insert(k, bayes_decoder(&joint, &self.d, ins)?);
            }
        }
        AuxScheme::new(self.p.family, self.p.l, joint, decoders)
    }

    fn evaluate(&self, q: Vec<Vec<f64>>) -> Result<State> {
        let s = self.scheme(&q, false)?;
        let value = min_weighted_sum(&rate_bounds(&s)?, &self.p.weights)?.0;
        let violation = self.violation(&s)?;
        Ok(State { q, value, violation })
    }

    fn violation(&self, s: &AuxScheme<f64>) -> Result<f64> {
        let mut v = 0.0;
        for (k, t) in &self.p.targets {
            let dec: &Decoder = &s.decoders[k];
            v += (expected_distortion(&s.joint, &self.d, dec)? - t).max(0.0);
        }
        Ok(v)
    }
}

fn lambda(restart: usize) -> f64 {
    10.0 * 2f64.powi(restart.min(20) as i32)
}

fn step_size(it: usize, iters: usize) -> f64 {
    0.5 * (1e-3f64 / 0.5).powf(it as f64 / iters.max(1) as f64)
}

struct RunResult {
    best: Option<State>,
    trace: Vec<TraceRow>,
}

fn run(ctx: &Ctx, budget: &SearchBudget, r: usize) -> Result<RunResult> {
    let mut rng = restart_rng(budget.seed, r as u64);
    let lam = lambda(r);
    let nx = ctx.px.len();
    let q: Vec<Vec<f64>> = (0..nx).map(|_| random_simplex(&mut rng, ctx.n_out)).collect();
    let mut cur = ctx.evaluate(q)?;
    let pen = |s: &State| s.value + lam * s.violation;
    let mut best = (cur.violation <= FEASIBILITY_TOL).then(|| cur.clone());
    let every = (budget.iterations / 50).max(1);
    let mut trace = Vec::new();
    let row = |it: usize, s: &State| TraceRow {
        restart: r,
        iteration: it,
        lambda: lam,
        penalized: pen(s),
        value: s.value,
        violation: s.violation,
    };
    trace.push(row(0, &cur));
    for it in 1..=budget.iterations {
        let t = step_size(it, budget.iterations);
        let x = rng.random_range(0..nx);
        let target: Vec<f64> = if rng.random_bool(0.5) {
            random_simplex(&mut rng, ctx.n_out)
        } else {
            let j = rng.random_range(0..ctx.n_out);
            (0..ctx.n_out).map(|i| if i == j { 1.0 } else { 0.0 }).collect()
        };
        let mut q = cur.q.clone();
        for (v, g) in q[x].iter_mut().zip(&target) {
            *v = (1.0 - t) * *v + t * g;
        }
        let cand = ctx.evaluate(q)?;
        if pen(&cand) < pen(&cur) {
            cur = cand;
            if cur.violation <= FEASIBILITY_TOL && best.as_ref().is_none_or(|b| cur.value < b.value) {
                best = Some(cur.clone());
            }
        }
        if it % every == 0 || it == budget.iterations {
            trace.push(row(it, &cur));
        }
    }
    Ok(RunResult { best, trace })
}

/// Best feasible scheme over `budget.restarts` independent restarts (ties
/// go to the lower restart index). Restart `r` penalizes distortion excess
/// with `λ = 10·2^r`. Each step mixes one row of `p(aux | x)` toward a
/// random simplex point or vertex and keeps the move when the penalized
/// objective falls; decoders are re-fit pointwise after every move.
pub fn optimize_weighted_sum(problem: &SearchProblem, budget: &SearchBudget) -> Result<SearchOutcome> {
    problem.validate()?;
    if budget.restarts == 0 {
        return Err(Error::Domain("at least one restart is needed".into()));
    }
    let ctx = Ctx::new(problem)?;
    let runs: Vec<Result<RunResult>> = (0..budget.restarts).into_par_iter().map(|r| run(&ctx, budget, r)).collect();
    let mut trace = Vec::new();
    let mut best: Option<(usize, State)> = None;
    for (r, res) in runs.into_iter().enumerate() {
        let res = res?;
        trace.extend(res.trace);
        if let Some(s) = res.best {
            if best.as_ref().is_none_or(|(_, b)| s.value < b.value) {
                best = Some((r, s));
            }
        }
    }
    let (restart, state) = best.ok_or_else(|| Error::Infeasible("no feasible scheme found".into()))?;
    let scheme = ctx.scheme(&state.q, true)?;
    let bounds = RegionBounds {
        family: scheme.family,
        bounds: rate_bounds(&scheme)?,
        distortions: super::eval::distortions(&scheme, &ctx.d, None)?,
    };
    let value = bounds.min_weighted_sum(&problem.weights)?;
    Ok(SearchOutcome { value, scheme, bounds, restart, trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::binary_entropy;

    fn bss() -> (JointPmf<f64>, DistortionMeasure) {
        let x = Alphabet::new("X", 2).unwrap();
        let p = JointPmf::uniform(vec![x.clone()]).unwrap();
        let d = DistortionMeasure::hamming(x, Alphabet::new("Xhat", 2).unwrap());
        (p, d)
    }

    #[test]
    fn loose_targets_give_zero() {
        let (p, d) = bss();
        let targets = BTreeMap::from([(1, 0.5), (2, 0.5), (3, 0.5)]);
        let prob = SearchProblem::new(p, d, Family::EgcStar, vec![1.0, 1.0], targets);
        let out = optimize_weighted_sum(&prob, &SearchBudget { restarts: 2, iterations: 300, seed: 1 }).unwrap();
        assert!(out.value < 1e-3, "{}", out.value);
    }

    #[test]
    fn scalable_instance_reaches_refined_rate() {
        let (p, d) = bss();
        let targets = BTreeMap::from([(1, 0.3), (3, 0.1)]);
        let prob = SearchProblem::new(p, d, Family::Egc, vec![1.0, 1.0], targets).with_cardinality(2, 1);
        let out = optimize_weighted_sum(&prob, &SearchBudget { restarts: 8, iterations: 4000, seed: 7 }).unwrap();
        let want = 1.0 - binary_entropy(0.1);
        assert!((out.value - want).abs() < 5e-3, "{} vs {want}", out.value);
        assert!(out.value >= want - 1e-9);
        assert!(out.bounds.distortions[&1] <= 0.3 + FEASIBILITY_TOL);
        assert!(out.bounds.distortions[&3] <= 0.1 + FEASIBILITY_TOL);
        let again = optimize_weighted_sum(&prob, &SearchBudget { restarts: 8, iterations: 4000, seed: 7 }).unwrap();
        assert_eq!(out.value, again.value);
    }

    #[test]
    fn impossible_targets_are_reported() {
        let (p, d) = bss();
        let d = DistortionMeasure::new(d.source().clone(), d.recon().clone(), vec![vec![0.2, 1.0], vec![1.0, 0.2]]).unwrap();
        let prob = SearchProblem::new(p, d, Family::EgcStar, vec![1.0, 1.0], BTreeMap::from([(3, 0.1)]));
        let err = optimize_weighted_sum(&prob, &SearchBudget { restarts: 2, iterations: 100, seed: 0 }).unwrap_err();
        assert!(matches!(err, Error::Infeasible(_)));
    }

    #[test]
    fn trace_is_csv() {
        let rows = vec![TraceRow { restart: 0, iteration: 1, lambda: 10.0, penalized: 1.5, value: 1.0, violation: 0.05 }];
        let mut buf = Vec::new();
        write_trace_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("restart,iteration,lambda,penalized,value,violation\n0,1,10.0,1.5,1.0,0.05"));
    }
}
