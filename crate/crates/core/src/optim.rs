//! Smooth optimization over conditional pmfs `q(y | x)` for a fixed source
//! law: entropy expressions with analytic gradients and an augmented
//! Lagrangian solver on softmax logits.

use std::collections::HashMap;
use std::f64::consts::LN_2;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rand_distr::{Distribution, Exp1};

use crate::prob::pmf::projection_map;

/// Deterministic per-restart generator.
pub fn restart_rng(seed: u64, restart: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart);
    rng
}

/// Uniform point on the probability simplex of dimension `n`.
pub fn random_simplex<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
    v
}

/// Joint layout: source axis first (size `px.len()`), then the output axes.
#[derive(Debug, Clone)]
pub struct Space {
    pub px: Vec<f64>,
    pub out_shape: Vec<usize>,
}

impl Space {
    pub fn new(px: Vec<f64>, out_shape: Vec<usize>) -> Self {
        Self { px, out_shape }
    }

    pub fn nx(&self) -> usize {
        self.px.len()
    }

    pub fn ny(&self) -> usize {
        self.out_shape.iter().product()
    }

    pub fn shape(&self) -> Vec<usize> {
        let mut s = vec![self.nx()];
        s.extend(&self.out_shape);
        s
    }

    /// Bitmask of joint positions; position 0 is the source.
    pub fn source_mask(&self) -> u64 {
        1
    }

    pub fn out_mask(&self, output: usize) -> u64 {
        1 << (output + 1)
    }

    pub fn joint(&self, q: &[f64]) -> Vec<f64> {
        let ny = self.ny();
        let mut p = vec![0.0; q.len()];
        for x in 0..self.nx() {
            for y in 0..ny {
                p[x * ny + y] = self.px[x] * q[x * ny + y];
            }
        }
        p
    }
}

/// `Σ coef · H(mask) + Σ_cell P(cell) linear(cell) + constant`, entropies in bits.
#[derive(Debug, Clone, Default)]
pub struct Expr {
    pub entropy: Vec<(f64, u64)>,
    pub linear: Option<Vec<f64>>,
    pub constant: f64,
}

impl Expr {
    pub fn h(mask: u64) -> Self {
        Self { entropy: vec![(1.0, mask)], ..Self::default() }
    }

    /// `I(a; b | given)`.
    pub fn mi(a: u64, b: u64, given: u64) -> Self {
        Self {
            entropy: vec![(1.0, a | given), (1.0, b | given), (-1.0, a | b | given), (-1.0, given)],
            ..Self::default()
        }
    }

    pub fn linear(table: Vec<f64>) -> Self {
        Self { linear: Some(table), ..Self::default() }
    }

    pub fn plus(mut self, other: Expr) -> Self {
        self.entropy.extend(other.entropy);
        self.constant += other.constant;
        self.linear = match (self.linear, other.linear) {
            (Some(a), Some(b)) => Some(a.iter().zip(&b).map(|(x, y)| x + y).collect()),
            (a, b) => a.or(b),
        };
        self
    }

    pub fn scaled(mut self, k: f64) -> Self {
        self.entropy.iter_mut().for_each(|t| t.0 *= k);
        if let Some(l) = self.linear.as_mut() {
            l.iter_mut().for_each(|v| *v *= k);
        }
        self.constant *= k;
        self
    }

    pub fn minus_const(mut self, c: f64) -> Self {
        self.constant -= c;
        self
    }
}

/// Caches projection maps for one joint shape.
pub struct Evaluator {
    shape: Vec<usize>,
    maps: HashMap<u64, (Vec<usize>, usize)>,
}

impl Evaluator {
    pub fn new(shape: Vec<usize>) -> Self {
        Self { shape, maps: HashMap::new() }
    }

    fn map(&mut self, mask: u64) -> &(Vec<usize>, usize) {
        let shape = &self.shape;
        self.maps.entry(mask).or_insert_with(|| {
            let keep: Vec<usize> = (0..shape.len()).filter(|i| mask >> i & 1 == 1).collect();
            projection_map(shape, &keep)
        })
    }

    /// Value of `e` at joint `p`; adds `weight · ∂e/∂p` into `grad` when given.
    pub fn eval(&mut self, e: &Expr, p: &[f64], mut grad: Option<(&mut [f64], f64)>) -> f64 {
        let mut value = e.constant;
        if let Some(lin) = &e.linear {
            value += p.iter().zip(lin).map(|(a, b)| a * b).sum::<f64>();
            if let Some((g, w)) = grad.as_mut() {
                g.iter_mut().zip(lin).for_each(|(gi, l)| *gi += *w * l);
            }
        }
        for &(coef, mask) in &e.entropy {
            if mask == 0 {
                continue;
            }
            let (map, size) = self.map(mask).clone();
            let mut m = vec![0.0; size];
            for (v, &i) in p.iter().zip(&map) {
                m[i] += v;
            }
            let logs: Vec<f64> = m.iter().map(|&v| if v > 0.0 { v.log2() } else { 0.0 }).collect();
            value -= coef * m.iter().zip(&logs).map(|(v, l)| v * l).sum::<f64>();
            if let Some((g, w)) = grad.as_mut() {
                for (gi, &i) in g.iter_mut().zip(&map) {
                    let l = if m[i] > 0.0 { logs[i] } else { -1100.0 };
                    *gi -= *w * coef * (l + 1.0 / LN_2);
                }
            }
        }
        value
    }
}

#[derive(Debug, Clone)]
pub enum Constraint {
    /// `expr ≤ 0`.
    Le(Expr),
    /// `|expr| ≤ tol`.
    Band(Expr, f64),
}

#[derive(Debug, Clone)]
pub struct AlmOptions {
    pub outer: usize,
    pub inner: usize,
    pub lr: f64,
    pub rho0: f64,
    pub rho_growth: f64,
    pub rho_max: f64,
}

impl Default for AlmOptions {
    fn default() -> Self {
        Self { outer: 30, inner: 400, lr: 0.05, rho0: 10.0, rho_growth: 2.0, rho_max: 1e6 }
    }
}

#[derive(Debug, Clone)]
pub struct AlmResult {
    /// Conditional `q(y|x)`, row-major `x` then flat `y`.
    pub q: Vec<f64>,
    pub objective: f64,
    /// Signed constraint values: `expr` for `Le`, `|expr| − tol` for `Band`.
    pub violations: Vec<f64>,
}

impl AlmResult {
    pub fn max_violation(&self) -> f64 {
        self.violations.iter().copied().fold(0.0, f64::max)
    }
}

/// Inequality list `g_i ≤ 0` derived from the constraints.
fn inequalities(cs: &[Constraint]) -> Vec<Expr> {
    let mut out = Vec::new();
    for c in cs {
        match c {
            Constraint::Le(e) => out.push(e.clone()),
            Constraint::Band(e, tol) => {
                out.push(e.clone().minus_const(*tol));
                out.push(e.clone().scaled(-1.0).minus_const(*tol));
            }
        }
    }
    out
}

fn softmax_rows(theta: &[f64], ny: usize) -> Vec<f64> {
    let mut q = vec![0.0; theta.len()];
    for (row, out) in theta.chunks(ny).zip(q.chunks_mut(ny)) {
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut s = 0.0;
        for (o, t) in out.iter_mut().zip(row) {
            *o = (t - m).exp();
            s += *o;
        }
        out.iter_mut().for_each(|o| *o /= s);
    }
    q
}

/// Logits whose softmax is `q` (entries floored at 1e-12).
pub fn logits_of(q: &[f64]) -> Vec<f64> {
    q.iter().map(|v| v.max(1e-12).ln()).collect()
}

/// Minimizes `objective` subject to `constraints` over `q(y|x)`, from logits `theta`.
pub fn alm_solve(
    space: &Space,
    objective: &Expr,
    constraints: &[Constraint],
    mut theta: Vec<f64>,
    opts: &AlmOptions,
) -> AlmResult {
    let ny = space.ny();
    let ineq = inequalities(constraints);
    let mut ev = Evaluator::new(space.shape());
    let mut mu = vec![0.0; ineq.len()];
    let mut rho = opts.rho0;
    let n = theta.len();
    let (mut m1, mut m2) = (vec![0.0; n], vec![0.0; n]);
    let (b1, b2) = (0.9, 0.999);
    let mut t = 0i32;
    let mut gp = vec![0.0; n];
    for outer in 0..opts.outer {
        let lr = opts.lr / (1.0 + outer as f64 * 0.5);
        for _ in 0..opts.inner {
            let q = softmax_rows(&theta, ny);
            let p = space.joint(&q);
            gp.iter_mut().for_each(|g| *g = 0.0);
            ev.eval(objective, &p, Some((&mut gp, 1.0)));
            for (g, &m) in ineq.iter().zip(&mu) {
                let c = ev.eval(g, &p, None);
                let s = m + rho * c;
                if s > 0.0 {
                    ev.eval(g, &p, Some((&mut gp, s)));
                }
            }
            // Chain rule through P = p(x) softmax(theta).
            let mut gt = vec![0.0; n];
            for x in 0..space.nx() {
                let r = x * ny..(x + 1) * ny;
                let mean: f64 = q[r.clone()].iter().zip(&gp[r.clone()]).map(|(a, b)| a * b).sum();
                for i in r {
                    gt[i] = space.px[x] * q[i] * (gp[i] - mean);
                }
            }
            t += 1;
            for i in 0..n {
                m1[i] = b1 * m1[i] + (1.0 - b1) * gt[i];
                m2[i] = b2 * m2[i] + (1.0 - b2) * gt[i] * gt[i];
                let mh = m1[i] / (1.0 - b1.powi(t));
                let vh = m2[i] / (1.0 - b2.powi(t));
                theta[i] -= lr * mh / (vh.sqrt() + 1e-12);
            }
        }
        let q = softmax_rows(&theta, ny);
        let p = space.joint(&q);
        let mut worst: f64 = 0.0;
        for (g, m) in ineq.iter().zip(mu.iter_mut()) {
            let c = ev.eval(g, &p, None);
            *m = (*m + rho * c).max(0.0);
            worst = worst.max(c);
        }
        if worst > 1e-7 {
            rho = (rho * opts.rho_growth).min(opts.rho_max);
        }
    }
    let q = softmax_rows(&theta, ny);
    let p = space.joint(&q);
    let objective_value = ev.eval(objective, &p, None);
    let violations = constraints
        .iter()
        .map(|c| match c {
            Constraint::Le(e) => ev.eval(e, &p, None),
            Constraint::Band(e, tol) => ev.eval(e, &p, None).abs() - tol,
        })
        .collect();
    AlmResult { q, objective: objective_value, violations }
}

/// Random logits for a fresh restart.
pub fn random_logits<R: Rng>(rng: &mut R, space: &Space) -> Vec<f64> {
    let ny = space.ny();
    (0..space.nx()).flat_map(|_| logits_of(&random_simplex(rng, ny))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entropy_gradient_matches_finite_differences() {
        let space = Space::new(vec![0.3, 0.7], vec![2, 3]);
        let q = vec![0.2, 0.1, 0.1, 0.3, 0.2, 0.1, 0.05, 0.15, 0.3, 0.1, 0.2, 0.2];
        let p = space.joint(&q);
        let e = Expr::mi(1, 2, 4).plus(Expr::h(6).scaled(0.5));
        let mut ev = Evaluator::new(space.shape());
        let mut g = vec![0.0; p.len()];
        let f0 = ev.eval(&e, &p, Some((&mut g, 1.0)));
        for i in 0..p.len() {
            let mut pp = p.clone();
            pp[i] += 1e-7;
            let f1 = ev.eval(&e, &pp, None);
            assert!(((f1 - f0) / 1e-7 - g[i]).abs() < 1e-4, "cell {i}");
        }
    }

    #[test]
    fn capacity_like_problem() {
        // max H(Y) over q(y|x) with a single x is log2 |Y|; minimize -H(Y).
        let space = Space::new(vec![1.0], vec![4]);
        let obj = Expr::h(2).scaled(-1.0);
        let r = alm_solve(&space, &obj, &[], vec![0.0, 1.0, -2.0, 0.5], &AlmOptions::default());
        assert!((r.objective + 2.0).abs() < 1e-6);
    }
}
