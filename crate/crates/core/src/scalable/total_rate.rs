//! Minimum scalably achievable total rate.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::optim::{alm_solve, logits_of, random_logits, restart_rng, AlmOptions, Constraint, Expr, Space};
use crate::prob::{mutual_information, Alphabet, DistortionMeasure, JointPmf};

use super::rd::{conditional_rd, rd_function, source_pmf, RdOptions, SideInfo};

/// Axis names of the coarse layer, the refinement layer and the combined reconstruction.
pub const COARSE: &str = "X1";
pub const REFINE: &str = "X2";
pub const COMBINED: &str = "X12";

/// Source, distortion and layer targets.
#[derive(Debug, Clone)]
pub struct ScalableInstance {
    pub source: JointPmf<f64>,
    pub d: DistortionMeasure,
    pub r1: f64,
    pub d1: f64,
    pub d12: f64,
}

impl ScalableInstance {
    pub fn new(source: JointPmf<f64>, d: DistortionMeasure, r1: f64, d1: f64, d12: f64) -> Result<Self> {
        for (name, v) in [("R1", r1), ("D1", d1), ("D12", d12)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Domain(format!("{name} = {v} must be finite and ≥ 0")));
            }
        }
        source_pmf(&source, &d)?;
        Ok(Self { source, d, r1, d1, d12 })
    }

    /// Uniform binary source with Hamming distortion.
    pub fn bss(r1: f64, d1: f64, d12: f64) -> Result<Self> {
        let (source, d) = bss_source();
        Self::new(source, d, r1, d1, d12)
    }

    pub fn source_name(&self) -> &str {
        &self.d.source().name
    }
}

pub fn bss_source() -> (JointPmf<f64>, DistortionMeasure) {
    let x = Alphabet::new("X", 2).expect("valid alphabet");
    let p = JointPmf::uniform(vec![x.clone()]).expect("valid pmf");
    (p, DistortionMeasure::hamming(x, Alphabet::new("Xhat", 2).expect("valid alphabet")))
}

#[derive(Debug, Clone)]
pub struct SearchOptions {
    pub restarts: usize,
    pub seed: u64,
    pub alm: AlmOptions,
    /// Slack allowed on inequality constraints when accepting a restart.
    pub feasibility_tol: f64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self { restarts: 8, seed: 0, alm: AlmOptions::default(), feasibility_tol: 1e-5 }
    }
}

#[derive(Debug, Clone)]
pub struct TotalRate {
    /// `I(X; X1, X12)` at the returned point.
    pub rate: f64,
    /// Joint over `(X, X1, X12)`.
    pub joint: JointPmf<f64>,
    /// `I(X;X1) − R1`, `E d(X,X1) − D1`, `E d(X,X12) − D12`.
    pub residuals: [f64; 3],
    pub restart: usize,
}

impl TotalRate {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }
}

pub(crate) fn distortion_table(px_len: usize, d: &DistortionMeasure, layer: usize) -> Vec<f64> {
    let n = d.recon().size;
    let mut t = vec![0.0; px_len * n * n];
    for x in 0..px_len {
        for a in 0..n {
            for b in 0..n {
                t[(x * n + a) * n + b] = d.d(x, if layer == 0 { a } else { b });
            }
        }
    }
    t
}

/// Objective and constraints of the total-rate program on `Space(px, [n, n])`.
pub(crate) fn total_rate_program(inst: &ScalableInstance, px: &[f64]) -> (Space, Expr, Vec<Constraint>) {
    let n = inst.d.recon().size;
    let space = Space::new(px.to_vec(), vec![n, n]);
    let (x, a, b) = (space.source_mask(), space.out_mask(0), space.out_mask(1));
    let objective = Expr::mi(x, a | b, 0);
    let constraints = vec![
        Constraint::Le(Expr::mi(x, a, 0).minus_const(inst.r1)),
        Constraint::Le(Expr::linear(distortion_table(px.len(), &inst.d, 0)).minus_const(inst.d1)),
        Constraint::Le(Expr::linear(distortion_table(px.len(), &inst.d, 1)).minus_const(inst.d12)),
    ];
    (space, objective, constraints)
}

pub(crate) fn layer_axes(inst: &ScalableInstance) -> Vec<Alphabet> {
    let r = inst.d.recon();
    vec![inst.d.source().clone(), r.renamed(COARSE), r.renamed(COMBINED)]
}

/// Warm start: the two single-description test channels side by side.
pub(crate) fn warm_start(inst: &ScalableInstance) -> Result<Vec<f64>> {
    let c1 = rd_function(&inst.source, &inst.d, inst.d1)?.test_channel;
    let c2 = rd_function(&inst.source, &inst.d, inst.d12)?.test_channel;
    let n = inst.d.recon().size;
    let nx = inst.d.source().size;
    let mut q = vec![0.0; nx * n * n];
    for x in 0..nx {
        for a in 0..n {
            for b in 0..n {
                q[(x * n + a) * n + b] = c1.row(x)[a] * c2.row(x)[b];
            }
        }
    }
    Ok(q)
}

/// Minimum of `I(X; X1, X12)` subject to `I(X;X1) ≤ R1`, `E d(X,X1) ≤ D1` and
/// `E d(X,X12) ≤ D12`, over reconstruction-sized alphabets.
pub fn min_total_rate(inst: &ScalableInstance, opts: &SearchOptions) -> Result<TotalRate> {
    let rd1 = rd_function(&inst.source, &inst.d, inst.d1)?;
    if inst.r1 < rd1.rate - 1e-6 {
        return Err(Error::Infeasible(format!(
            "R1 = {} is below R(D1) = {}",
            inst.r1, rd1.rate
        )));
    }
    let rd12 = rd_function(&inst.source, &inst.d, inst.d12)?;
    if rd1.clamped || rd12.clamped {
        return Err(Error::Infeasible("a distortion target is below the smallest reachable distortion".into()));
    }
    let runs = total_rate_runs(inst, opts)?;
    runs.into_iter()
        .min_by(|a, b| {
            let fa = a.max_residual() <= opts.feasibility_tol;
            let fb = b.max_residual() <= opts.feasibility_tol;
            fb.cmp(&fa)
                .then(a.rate.total_cmp(&b.rate))
                .then(a.restart.cmp(&b.restart))
        })
        .filter(|r| r.max_residual() <= opts.feasibility_tol)
        .ok_or_else(|| Error::Infeasible("no restart met the constraints".into()))
}

/// Every restart's end point, in restart order. Restart 0 is the cascade
/// point from uniform output laws; the rest run the augmented Lagrangian.
pub fn total_rate_runs(inst: &ScalableInstance, opts: &SearchOptions) -> Result<Vec<TotalRate>> {
    let px = source_pmf(&inst.source, &inst.d)?;
    let (space, objective, constraints) = total_rate_program(inst, &px);
    let warm = logits_of(&warm_start(inst)?);
    (0..opts.restarts.max(1))
        .into_par_iter()
        .map(|restart| {
            if restart == 0 {
                let joint = cascade_point(inst, &px, None)?;
                return evaluate_point(inst, joint, restart);
            }
            let theta = if restart == 1 {
                warm.clone()
            } else {
                random_logits(&mut restart_rng(opts.seed, restart as u64), &space)
            };
            let res = alm_solve(&space, &objective, &constraints, theta, &opts.alm);
            let joint = JointPmf::new(layer_axes(inst), space.joint(&res.q))?;
            let rate = res.objective;
            let residuals = [res.violations[0], res.violations[1], res.violations[2]];
            Ok(TotalRate { rate, joint, residuals, restart })
        })
        .collect()
}

fn evaluate_point(inst: &ScalableInstance, joint: JointPmf<f64>, restart: usize) -> Result<TotalRate> {
    let c = check_total_rate(inst, &joint)?;
    Ok(TotalRate { rate: c[0], joint, residuals: [c[1], c[2], c[3]], restart })
}

/// Coarse layer at an `R(D1)` fixed point, refinement from the conditional
/// rate-distortion problem given `X1`. `init` holds the initial output laws
/// `r(x1)` and `r(x12 | x1)`; `None` starts both uniform.
pub fn cascade_point(
    inst: &ScalableInstance,
    px: &[f64],
    init: Option<(&[f64], &[f64])>,
) -> Result<JointPmf<f64>> {
    let n = inst.d.recon().size;
    let nx = px.len();
    let uniform = vec![1.0 / n as f64; n * n];
    let (r1, r12) = init.unwrap_or((&uniform[..n], &uniform));
    let opts = RdOptions::default();
    let coarse = conditional_rd(&SideInfo::none(px), &inst.d, inst.d1, r1, &opts)?;
    let mut pxs = vec![0.0; nx * n];
    for x in 0..nx {
        for a in 0..n {
            pxs[x * n + a] = px[x] * coarse.q[x * n + a];
        }
    }
    let si = SideInfo { nx, ns: n, pxs };
    let fine = conditional_rd(&si, &inst.d, inst.d12, r12, &opts)?;
    let mut values = vec![0.0; nx * n * n];
    for (i, v) in values.iter_mut().enumerate() {
        *v = si.pxs[i / n] * fine.q[i];
    }
    JointPmf::from_weights(layer_axes(inst), values)
}

/// Re-evaluates a total-rate point with the probability layer.
pub fn check_total_rate(inst: &ScalableInstance, joint: &JointPmf<f64>) -> Result<[f64; 4]> {
    let x = inst.source_name();
    let rate = mutual_information(joint, &[x], &[COARSE, COMBINED], &[] as &[&str])?;
    let r1 = mutual_information(joint, &[x], &[COARSE], &[] as &[&str])?;
    let idx = |name: &str| joint.position(name);
    let (px, p1, p12) = (idx(x)?, idx(COARSE)?, idx(COMBINED)?);
    let mut d1 = 0.0;
    let mut d12 = 0.0;
    crate::prob::pmf::for_each_index(&joint.shape(), |i, flat| {
        let v = joint.values()[flat];
        d1 += v * inst.d.d(i[px], i[p1]);
        d12 += v * inst.d.d(i[px], i[p12]);
    });
    Ok([rate, r1 - inst.r1, d1 - inst.d1, d12 - inst.d12])
}
