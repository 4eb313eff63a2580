//! Capacity of a finite-state channel with the state known at both ends,
//! directly and through Shannon strategies `Z ↦ (s ↦ x)`.

use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frl::decompose_rows;
use crate::prob::{snap_to_rational, Alphabet, Channel, InfoCalc, JointPmf, Prob, Rational, SNAP_MAX_DENOMINATOR};

/// Largest strategy alphabet `|X|^|S|` accepted.
pub const MAX_STRATEGIES: usize = 4096;

/// State pmf and a law `p(y | x, s)` whose inputs are `[X, S]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateChannel {
    pub p_s: Vec<f64>,
    pub law: Channel<f64>,
}

impl StateChannel {
    pub fn new(p_s: Vec<f64>, law: Channel<f64>) -> Result<Self> {
        if law.inputs().len() != 2 || law.outputs().len() != 1 {
            return Err(Error::InvalidChannel("the law must read [X, S] and emit one output axis".into()));
        }
        if p_s.len() != law.inputs()[1].size {
            return Err(Error::ShapeMismatch(format!(
                "{} state probabilities for |S| = {}",
                p_s.len(),
                law.inputs()[1].size
            )));
        }
        JointPmf::new(vec![law.inputs()[1].clone()], p_s.clone())?;
        Ok(Self { p_s, law })
    }

    pub fn x_alphabet(&self) -> &Alphabet {
        &self.law.inputs()[0]
    }

    pub fn s_alphabet(&self) -> &Alphabet {
        &self.law.inputs()[1]
    }

    pub fn y_alphabet(&self) -> &Alphabet {
        &self.law.outputs()[0]
    }

    pub fn nx(&self) -> usize {
        self.x_alphabet().size
    }

    pub fn ns(&self) -> usize {
        self.s_alphabet().size
    }

    pub fn ny(&self) -> usize {
        self.y_alphabet().size
    }

    /// `p(· | x, s)`.
    pub fn row(&self, x: usize, s: usize) -> &[f64] {
        self.law.row(x * self.ns() + s)
    }

    /// Transition matrix of state `s`, one row per input.
    pub fn state_rows(&self, s: usize) -> Vec<Vec<f64>> {
        (0..self.nx()).map(|x| self.row(x, s).to_vec()).collect()
    }
}

/// Blahut–Arimoto stopping rule: the gap between `max_x D(W_x‖q)` and the
/// current mutual information.
const GAP_TOL: f64 = 1e-11;
const MAX_ITER: usize = 200_000;

fn kl_rows(rows: &[Vec<f64>], q: &[f64]) -> Vec<f64> {
    rows.iter()
        .map(|w| {
            w.iter()
                .zip(q)
                .filter(|(a, _)| **a > 0.0)
                .map(|(a, b)| a * (a / b).log2())
                .sum()
        })
        .collect()
}

fn output_law(rows: &[Vec<f64>], p: &[f64]) -> Vec<f64> {
    let mut q = vec![0.0; rows[0].len()];
    for (w, &px) in rows.iter().zip(p) {
        for (qy, wy) in q.iter_mut().zip(w) {
            *qy += px * wy;
        }
    }
    q
}

/// Capacity (bits) and a capacity-achieving input law of a discrete
/// memoryless channel given by its rows.
pub fn channel_capacity(rows: &[Vec<f64>]) -> (f64, Vec<f64>) {
    let n = rows.len();
    let mut p = vec![1.0 / n as f64; n];
    let mut lower = 0.0;
    for _ in 0..MAX_ITER {
        let q = output_law(rows, &p);
        let d = kl_rows(rows, &q);
        lower = p.iter().zip(&d).map(|(a, b)| a * b).sum::<f64>();
        let upper = d.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if upper - lower <= GAP_TOL {
            break;
        }
        let mut total = 0.0;
        for (px, dx) in p.iter_mut().zip(&d) {
            *px *= dx.exp2();
            total += *px;
        }
        p.iter_mut().for_each(|v| *v /= total);
    }
    (lower.max(0.0), p)
}

/// `C = Σ_s p(s) C_s` with the per-state input laws `p(x | s)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectCapacity {
    pub value: f64,
    pub per_state: Vec<f64>,
    pub input: Vec<Vec<f64>>,
}

impl DirectCapacity {
    /// The optimal `p(x | s)` as a channel from `S` to `X`.
    pub fn input_channel(&self, ch: &StateChannel) -> Result<Channel<f64>> {
        Channel::new(vec![ch.s_alphabet().clone()], vec![ch.x_alphabet().clone()], self.input.concat())
    }
}

/// `max_{p(x|s)} I(X;Y|S)`; the objective separates over states.
pub fn capacity_direct(ch: &StateChannel) -> DirectCapacity {
    let per: Vec<(f64, Vec<f64>)> = (0..ch.ns()).into_par_iter().map(|s| channel_capacity(&ch.state_rows(s))).collect();
    let value = per.iter().zip(&ch.p_s).map(|((c, _), p)| p * c).sum();
    DirectCapacity {
        value,
        per_state: per.iter().map(|(c, _)| *c).collect(),
        input: per.into_iter().map(|(_, p)| p).collect(),
    }
}

/// Strategy `t` as the table `(t(s_1), …, t(s_|S|))`; the index enumerates
/// tables lexicographically with `s_1` most significant.
pub fn strategy_table(index: usize, nx: usize, ns: usize) -> Vec<usize> {
    let mut out = vec![0; ns];
    let mut r = index;
    for s in (0..ns).rev() {
        out[s] = r % nx;
        r /= nx;
    }
    out
}

pub fn strategy_index(table: &[usize], nx: usize) -> usize {
    table.iter().fold(0, |acc, &x| acc * nx + x)
}

fn strategy_count(nx: usize, ns: usize) -> Option<usize> {
    (0..ns).try_fold(1usize, |acc, _| acc.checked_mul(nx)).filter(|&n| n <= MAX_STRATEGIES)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyCapacity {
    pub value: f64,
    /// `p_Z` over all strategies, in enumeration order.
    pub p_z: Vec<f64>,
    /// Strategies carrying mass above 1e-9, as `(index, table, mass)`.
    pub support: Vec<(usize, Vec<usize>, f64)>,
}

/// `max_{p_Z} I(Z;Y|S)` over the strategy alphabet. With `Z` independent of
/// `S` this is the capacity of `z ↦ (Y, S)` with law `p(s) p(y | t_z(s), s)`.
pub fn capacity_strategy(ch: &StateChannel) -> Result<StrategyCapacity> {
    let (nx, ns, ny) = (ch.nx(), ch.ns(), ch.ny());
    let nz = strategy_count(nx, ns).ok_or_else(|| {
        Error::Domain(format!("strategy alphabet {nx}^{ns} exceeds {MAX_STRATEGIES}"))
    })?;
    let rows: Vec<Vec<f64>> = (0..nz)
        .into_par_iter()
        .map(|z| {
            let t = strategy_table(z, nx, ns);
            let mut row = Vec::with_capacity(ns * ny);
            for s in 0..ns {
                row.extend(ch.row(t[s], s).iter().map(|w| ch.p_s[s] * w));
            }
            row
        })
        .collect();
    let (value, p_z) = channel_capacity(&rows);
    let support = p_z
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > 1e-9)
        .map(|(z, &p)| (z, strategy_table(z, nx, ns), p))
        .collect();
    Ok(StrategyCapacity { value, p_z, support })
}

/// Strategies extracted from an input law by the functional representation
/// lemma: `X = f(S, Z)` with `Z` independent of `S`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrlStrategy {
    pub p_z: Vec<f64>,
    /// `f[z]` is the strategy table used when `Z = z`.
    pub tables: Vec<Vec<usize>>,
    /// `I(Z;Y|S)` of the composed law.
    pub value: f64,
    /// `I(X;Y|S)` of the input law.
    pub direct: f64,
    pub independence_gap: f64,
    pub snap_error: f64,
}

fn conditional_mi(ch: &StateChannel, p_z: &[f64], table: impl Fn(usize, usize) -> usize) -> Result<f64> {
    let z = Alphabet::new("Z", p_z.len())?;
    let axes = vec![ch.s_alphabet().renamed("S"), z, ch.y_alphabet().renamed("Y")];
    let j = JointPmf::from_fn(axes, |i| ch.p_s[i[0]] * p_z[i[1]] * ch.row(table(i[0], i[1]), i[0])[i[2]])?;
    let mut c = InfoCalc::new(&j);
    let (s, zm, y) = (c.mask(&["S"])?, c.mask(&["Z"])?, c.mask(&["Y"])?);
    Ok(c.mi(zm, y, s))
}

/// Runs the decomposition with `V = S`, `W = X` on `p(s) p(x | s)` and
/// evaluates the strategy code it induces.
pub fn strategy_from_frl(p_x_given_s: &Channel<f64>, ch: &StateChannel) -> Result<FrlStrategy> {
    let (nx, ns) = (ch.nx(), ch.ns());
    if p_x_given_s.input_size() != ns || p_x_given_s.output_size() != nx {
        return Err(Error::ShapeMismatch(format!("input law must map |S| = {ns} to |X| = {nx}")));
    }
    // Rows are snapped one at a time with the last entry closing the sum, so
    // the rationals stay within ~1e-18 of the float law.
    let mut snap_error = 0.0f64;
    let mut rows = Vec::with_capacity(ns);
    for s in 0..ns {
        let row = p_x_given_s.row(s);
        let mut r: Vec<Rational> = row[..nx - 1].iter().map(|&p| snap_to_rational(p, SNAP_MAX_DENOMINATOR)).collect();
        let rest = Rational::one() - r.iter().sum::<Rational>();
        if rest < Rational::zero() {
            return Err(Error::InvalidChannel(format!("row {s} of the input law sums past one")));
        }
        r.push(rest);
        for (a, b) in r.iter().zip(row) {
            snap_error = snap_error.max((a.to_f64() - b).abs());
        }
        rows.push(Some(r));
    }
    let (z_rat, f) = decompose_rows(&rows, nx)?;
    let p_z: Vec<f64> = z_rat.iter().map(Prob::to_f64).collect();
    let nz = p_z.len();
    let tables: Vec<Vec<usize>> = (0..nz).map(|z| (0..ns).map(|s| f[s * nz + z]).collect()).collect();
    let value = conditional_mi(ch, &p_z, |s, z| tables[z][s])?;

    let sz = JointPmf::from_fn(
        vec![Alphabet::new("S", ns)?, Alphabet::new("Z", p_z.len())?],
        |i| ch.p_s[i[0]] * p_z[i[1]],
    )?;
    let mut c = InfoCalc::new(&sz);
    let independence_gap = c.mi(c.mask(&["S"])?, c.mask(&["Z"])?, 0);

    let direct = {
        let axes = vec![ch.s_alphabet().renamed("S"), ch.x_alphabet().renamed("X"), ch.y_alphabet().renamed("Y")];
        let j = JointPmf::from_fn(axes, |i| ch.p_s[i[0]] * p_x_given_s.row(i[0])[i[1]] * ch.row(i[1], i[0])[i[2]])?;
        let mut c = InfoCalc::new(&j);
        let (s, x, y) = (c.mask(&["S"])?, c.mask(&["X"])?, c.mask(&["Y"])?);
        c.mi(x, y, s)
    };
    Ok(FrlStrategy { p_z, tables, value, direct, independence_gap, snap_error })
}
