//! Functional representation: `W = f(V, Z)` with `Z` independent of `V`, built
//! by quantile coupling of the rows of `p_{W|V}`.

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::{Alphabet, Channel, InfoCalc, JointPmf, Prob, Rational, SNAP_MAX_DENOMINATOR};

/// Noise pmf plus the deterministic table `f: V × Z → W`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrlDecomposition {
    /// Axes of `V` (flattened row-major when composite).
    pub v_axes: Vec<Alphabet>,
    /// Axes of `W` (flattened row-major when composite).
    pub w_axes: Vec<Alphabet>,
    pub z_alphabet: Alphabet,
    /// Strictly positive, sums to one.
    pub z_pmf: Vec<Rational>,
    /// `f[v * |Z| + z]`, a flat `W` index.
    pub f: Vec<usize>,
}

impl FrlDecomposition {
    pub fn v_size(&self) -> usize {
        self.v_axes.iter().map(|a| a.size).product()
    }

    pub fn w_size(&self) -> usize {
        self.w_axes.iter().map(|a| a.size).product()
    }

    pub fn z_size(&self) -> usize {
        self.z_pmf.len()
    }

    pub fn eval(&self, v: usize, z: usize) -> usize {
        self.f[v * self.z_size() + z]
    }

    pub fn z_pmf_f64(&self) -> Vec<f64> {
        self.z_pmf.iter().map(Prob::to_f64).collect()
    }

    /// `|V|(|W|−1)+1`, which every decomposition meets.
    pub fn universal_bound(&self) -> usize {
        self.v_size() * (self.w_size() - 1) + 1
    }

    /// `f` as rows indexed by `v`.
    pub fn f_rows(&self) -> Vec<Vec<usize>> {
        self.f.chunks(self.z_size()).map(|r| r.to_vec()).collect()
    }
}

/// Gaps measured on the composed `(U, V, W, Z)` joint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrlReport {
    /// `I(V;Z)` in bits.
    pub independence_gap: f64,
    /// `I(U;Z|V,W)` in bits.
    pub markov_gap: f64,
    /// Max absolute deviation of the `(U,V,W)` marginal from the input.
    pub reconstruction_error: f64,
    pub cardinality: usize,
}

impl FrlReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.independence_gap <= tol && self.markov_gap <= tol && self.reconstruction_error <= tol
    }
}

/// Decomposes rows `p_{W|V}(·|v)` given as flat `W` pmfs; `None` marks a
/// zero-probability `v`, which is laid out as a point mass on `w = 0`.
pub fn decompose_rows(rows: &[Option<Vec<Rational>>], w_size: usize) -> Result<(Vec<Rational>, Vec<usize>)> {
    if w_size == 0 {
        return Err(Error::InvalidAlphabet("W has size 0".into()));
    }
    let point = {
        let mut r = vec![Rational::zero(); w_size];
        r[0] = Rational::one();
        r
    };
    // Cumulative breakpoints per row, ascending w.
    let cums: Vec<Vec<Rational>> = rows
        .iter()
        .map(|row| {
            let row = row.as_ref().unwrap_or(&point);
            let mut c = Vec::with_capacity(w_size + 1);
            let mut acc = Rational::zero();
            c.push(acc.clone());
            for p in row {
                acc += p;
                c.push(acc.clone());
            }
            c
        })
        .collect();
    for (v, c) in cums.iter().enumerate() {
        if !c[w_size].is_one() {
            return Err(Error::InvalidChannel(format!("row {v} does not sum to one")));
        }
    }
    let mut breaks: Vec<Rational> = cums.iter().flat_map(|c| c.iter().cloned()).collect();
    breaks.sort();
    breaks.dedup();

    let mut z_pmf: Vec<Rational> = Vec::new();
    let mut columns: Vec<Vec<usize>> = Vec::new();
    for win in breaks.windows(2) {
        let (a, b) = (&win[0], &win[1]);
        let len = b - a;
        if len.is_zero() {
            continue;
        }
        let col: Vec<usize> = cums
            .iter()
            .map(|c| {
                // The w whose subinterval [c_w, c_{w+1}) contains a.
                (0..w_size).find(|&w| &c[w] <= a && a < &c[w + 1]).expect("breakpoints cover [0,1)")
            })
            .collect();
        match columns.iter().position(|c| *c == col) {
            Some(k) => z_pmf[k] += len,
            None => {
                columns.push(col);
                z_pmf.push(len);
            }
        }
    }
    let nz = z_pmf.len();
    let nv = rows.len();
    let mut f = vec![0; nv * nz];
    for (z, col) in columns.iter().enumerate() {
        for v in 0..nv {
            f[v * nz + z] = col[v];
        }
    }
    Ok((z_pmf, f))
}

/// Decomposes `p_{W|V}` from a joint in exact arithmetic. Axes outside `V ∪ W`
/// play the role of `U`.
pub fn frl_decompose<S: AsRef<str>>(
    p: &JointPmf<Rational>,
    v: &[S],
    w: &[S],
    z_name: &str,
) -> Result<FrlDecomposition> {
    if w.is_empty() {
        return Err(Error::InvalidAlphabet("W needs at least one axis".into()));
    }
    let ch = p.condition(v, w)?;
    let w_size = ch.output_size();
    let rows: Vec<Option<Vec<Rational>>> = (0..ch.input_size())
        .map(|r| ch.is_defined(r).then(|| ch.row(r).to_vec()))
        .collect();
    let (z_pmf, f) = decompose_rows(&rows, w_size)?;
    let z_alphabet = Alphabet::new(z_name, z_pmf.len())?;
    Ok(FrlDecomposition {
        v_axes: ch.inputs().to_vec(),
        w_axes: ch.outputs().to_vec(),
        z_alphabet,
        z_pmf,
        f,
    })
}

/// Float front end: snaps `p` to rationals (denominator ≤ 1e9) first and
/// returns the snap error alongside.
pub fn frl_decompose_float<S: AsRef<str>>(
    p: &JointPmf<f64>,
    v: &[S],
    w: &[S],
    z_name: &str,
) -> Result<(FrlDecomposition, f64)> {
    let (exact, err) = p.snap(SNAP_MAX_DENOMINATOR)?;
    Ok((frl_decompose(&exact, v, w, z_name)?, err))
}

/// `p(u,v,w,z) = p_V(v) p_Z(z) 1{w = f(v,z)} p_{U|VW}(u|v,w)`, with axes in the
/// order `U, V, W, Z`. Undefined rows of `attach` are taken as uniform.
pub fn frl_compose<T: Prob>(
    p_v: &JointPmf<T>,
    dec: &FrlDecomposition,
    attach: Option<&Channel<T>>,
) -> Result<JointPmf<T>> {
    let v_names: Vec<&str> = dec.v_axes.iter().map(|a| a.name.as_str()).collect();
    let pv = p_v.marginal_ordered(&v_names)?;
    if pv.len() != dec.v_size() {
        return Err(Error::ShapeMismatch("p_V does not match the decomposition".into()));
    }
    let (nw, nz) = (dec.w_size(), dec.z_size());
    let (u_axes, nu) = match attach {
        Some(ch) => {
            let expect: Vec<&str> =
                dec.v_axes.iter().chain(&dec.w_axes).map(|a| a.name.as_str()).collect();
            let got: Vec<&str> = ch.inputs().iter().map(|a| a.name.as_str()).collect();
            if expect != got || ch.input_size() != dec.v_size() * nw {
                return Err(Error::ShapeMismatch(format!(
                    "attach channel must read {expect:?}, reads {got:?}"
                )));
            }
            (ch.outputs().to_vec(), ch.output_size())
        }
        None => (vec![], 1),
    };
    let zs: Vec<T> = dec.z_pmf.iter().map(T::from_rational).collect();
    let uniform = T::one() / T::from_ratio(nu as i64, 1);
    let mut values = vec![T::zero(); nu * dec.v_size() * nw * nz];
    for (v, p) in pv.values().iter().enumerate() {
        if p.is_zero() {
            continue;
        }
        for z in 0..nz {
            let w = dec.eval(v, z);
            let mass = p.clone() * zs[z].clone();
            for u in 0..nu {
                let cond = match attach {
                    Some(ch) if ch.is_defined(v * nw + w) => ch.row(v * nw + w)[u].clone(),
                    Some(_) => uniform.clone(),
                    None => T::one(),
                };
                let flat = ((u * dec.v_size() + v) * nw + w) * nz + z;
                values[flat] = mass.clone() * cond;
            }
        }
    }
    let mut axes = u_axes;
    axes.extend(dec.v_axes.iter().cloned());
    axes.extend(dec.w_axes.iter().cloned());
    axes.push(dec.z_alphabet.clone());
    JointPmf::new(axes, values)
}

/// Axis names of `p` not in `V ∪ W`.
fn u_names(p_names: &[&str], dec: &FrlDecomposition) -> Vec<String> {
    p_names
        .iter()
        .filter(|n| !dec.v_axes.iter().chain(&dec.w_axes).any(|a| a.name == **n))
        .map(|n| n.to_string())
        .collect()
}

/// Attaches `Z` to the full joint `p`; axes keep the order of `p` with `Z` last.
pub fn compose_joint<T: Prob>(p: &JointPmf<T>, dec: &FrlDecomposition) -> Result<JointPmf<T>> {
    let names = p.axis_names();
    let u = u_names(&names, dec);
    let given: Vec<String> =
        dec.v_axes.iter().chain(&dec.w_axes).map(|a| a.name.clone()).collect();
    let attach = if u.is_empty() { None } else { Some(p.condition(&given, &u)?) };
    let joint = frl_compose(p, dec, attach.as_ref())?;
    let mut order: Vec<String> = names.iter().map(|s| s.to_string()).collect();
    order.push(dec.z_alphabet.name.clone());
    joint.reorder(&order)
}

/// Composes and measures `I(V;Z)`, `I(U;Z|V,W)` and the reconstruction error.
pub fn frl_verify<T: Prob>(p: &JointPmf<T>, dec: &FrlDecomposition) -> Result<FrlReport> {
    if dec.f.len() != dec.v_size() * dec.z_size() {
        return Err(Error::ShapeMismatch("f table is incomplete".into()));
    }
    if let Some(&bad) = dec.f.iter().find(|&&w| w >= dec.w_size()) {
        return Err(Error::ShapeMismatch(format!("f value {bad} outside W")));
    }
    let joint = compose_joint(p, dec)?;
    let names = p.axis_names();
    let back = joint.marginalize(&names)?;
    let reconstruction_error = back.max_abs_diff(p)?;
    let fl = joint.to_float();
    let mut calc = InfoCalc::new(&fl);
    let v: Vec<&str> = dec.v_axes.iter().map(|a| a.name.as_str()).collect();
    let w: Vec<&str> = dec.w_axes.iter().map(|a| a.name.as_str()).collect();
    let u = u_names(&names, dec);
    let z = [dec.z_alphabet.name.as_str()];
    let (mv, mw, mu, mz) = (calc.mask(&v)?, calc.mask(&w)?, calc.mask(&u)?, calc.mask(&z)?);
    let independence_gap = calc.mi(mv, mz, 0);
    let markov_gap = if mu == 0 { 0.0 } else { calc.mi(mu, mz, mv | mw) };
    Ok(FrlReport {
        independence_gap,
        markov_gap,
        reconstruction_error,
        cardinality: dec.z_size(),
    })
}

/// Reads `W = f(V, Z)` back as a pmf over `(V, W)` from `p_V`.
pub fn induced_vw<T: Prob>(p_v: &JointPmf<T>, dec: &FrlDecomposition) -> Result<JointPmf<T>> {
    let j = frl_compose(p_v, dec, None)?;
    let keep: Vec<&str> = dec.v_axes.iter().chain(&dec.w_axes).map(|a| a.name.as_str()).collect();
    j.marginalize(&keep)
}

/// Replaces axis `host` by the product `(host, Z)` of a composed joint; the
/// product symbol is `host_index * |Z| + z`.
pub fn absorb_noise<T: Prob>(joint: &JointPmf<T>, host: &str, z: &str) -> Result<JointPmf<T>> {
    joint.merge_axes(&[host, z], host)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> Rational {
        Rational::from_ratio(n, d)
    }

    fn bit(name: &str) -> Alphabet {
        Alphabet::new(name, 2).unwrap()
    }

    /// Brute-force oracle: every (v, w) mass rebuilt from p_V, p_Z and f.
    fn rebuilt_equals(p: &JointPmf<Rational>, dec: &FrlDecomposition) -> bool {
        let vw = induced_vw(p, dec).unwrap();
        let names: Vec<&str> = vw.axis_names();
        let orig = p.marginal_ordered(&names).unwrap();
        let mut ok = true;
        for (i, val) in orig.values().iter().enumerate() {
            let v = i / dec.w_size();
            let w = i % dec.w_size();
            let pv: Rational = (0..dec.w_size())
                .map(|k| orig.values()[v * dec.w_size() + k].clone())
                .fold(Rational::zero(), |a, b| a + b);
            let sum = (0..dec.z_size())
                .filter(|&z| dec.eval(v, z) == w)
                .fold(Rational::zero(), |a, z| a + dec.z_pmf[z].clone());
            ok &= pv * sum == *val;
        }
        ok
    }

    fn two_by_two() -> JointPmf<Rational> {
        JointPmf::new(vec![bit("V"), bit("W")], vec![r(3, 8), r(1, 8), r(1, 4), r(1, 4)]).unwrap()
    }

    #[test]
    fn quantile_example_has_three_atoms() {
        let p = two_by_two();
        let dec = frl_decompose(&p, &["V"], &["W"], "Z").unwrap();
        assert_eq!(dec.z_pmf, vec![r(1, 2), r(1, 4), r(1, 4)]);
        assert_eq!(dec.f_rows(), vec![vec![0, 0, 1], vec![0, 1, 1]]);
        assert_eq!(dec.z_size(), 3);
        assert!(rebuilt_equals(&p, &dec));
        let rep = frl_verify(&p, &dec).unwrap();
        assert_eq!(rep.reconstruction_error, 0.0);
        assert!(rep.independence_gap < 1e-12 && rep.markov_gap < 1e-12);
    }

    #[test]
    fn corrupted_table_is_detected() {
        let p = two_by_two();
        let mut dec = frl_decompose(&p, &["V"], &["W"], "Z").unwrap();
        dec.f.swap(0, 2);
        assert!(frl_verify(&p, &dec).unwrap().reconstruction_error > 0.0);
    }

    #[test]
    fn independent_rows_give_identity_map() {
        let p = JointPmf::new(vec![bit("V"), bit("W")], vec![r(1, 6), r(1, 3), r(1, 6), r(1, 3)])
            .unwrap();
        let dec = frl_decompose(&p, &["V"], &["W"], "Z").unwrap();
        assert_eq!(dec.z_pmf, vec![r(1, 3), r(2, 3)]);
        assert_eq!(dec.f_rows(), vec![vec![0, 1], vec![0, 1]]);
    }

    #[test]
    fn copy_gives_single_atom() {
        let third = Alphabet::new("V", 3).unwrap();
        let p = JointPmf::<Rational>::uniform(vec![third])
            .unwrap()
            .with_function_axis(Alphabet::new("W", 3).unwrap(), &["V"], |v| v[0])
            .unwrap();
        let dec = frl_decompose(&p, &["V"], &["W"], "Z").unwrap();
        assert_eq!(dec.z_size(), 1);
        assert_eq!(dec.f, vec![0, 1, 2]);
    }

    #[test]
    fn single_v_needs_full_support() {
        let p = JointPmf::new(vec![Alphabet::constant("V"), Alphabet::new("W", 3).unwrap()], vec![
            r(1, 3),
            r(1, 3),
            r(1, 3),
        ])
        .unwrap();
        let dec = frl_decompose(&p, &["V"], &["W"], "Z").unwrap();
        // |V||W| - 1 = 2 cannot be met; the universal bound is.
        assert_eq!(dec.z_size(), 3);
        assert_eq!(dec.universal_bound(), 3);
    }

    #[test]
    fn reversing_w_labels_keeps_atom_masses() {
        let p = JointPmf::new(
            vec![bit("V"), Alphabet::new("W", 3).unwrap()],
            vec![r(3, 10), r(1, 10), r(1, 10), r(1, 10), r(1, 10), r(3, 10)],
        )
        .unwrap();
        let flipped = JointPmf::from_fn(p.axes().to_vec(), |i| p.get(&[i[0], 2 - i[1]]).clone()).unwrap();
        let mut a = frl_decompose(&p, &["V"], &["W"], "Z").unwrap().z_pmf;
        let mut b = frl_decompose(&flipped, &["V"], &["W"], "Z").unwrap().z_pmf;
        a.sort();
        b.sort();
        assert_eq!(a, b);
    }

    #[test]
    fn atom_masses_depend_on_order_for_three_symbols() {
        // Swapping labels 0 and 1 merges two atoms: (.2 x5) versus (.2, .2, .4, .2).
        let p = JointPmf::new(
            vec![bit("V"), Alphabet::new("W", 3).unwrap()],
            vec![r(3, 10), r(1, 10), r(1, 10), r(1, 10), r(1, 10), r(3, 10)],
        )
        .unwrap();
        let swapped = JointPmf::from_fn(p.axes().to_vec(), |i| {
            let w = [1, 0, 2][i[1]];
            p.get(&[i[0], w]).clone()
        })
        .unwrap();
        let a = frl_decompose(&p, &["V"], &["W"], "Z").unwrap();
        let b = frl_decompose(&swapped, &["V"], &["W"], "Z").unwrap();
        assert_eq!(a.z_size(), 5);
        assert_eq!(b.z_size(), 4);
        assert!(frl_verify(&swapped, &b).unwrap().reconstruction_error == 0.0);
    }

    #[test]
    fn zero_probability_v_rows() {
        let p = JointPmf::new(vec![Alphabet::new("V", 3).unwrap(), bit("W")], vec![
            r(1, 4),
            r(1, 4),
            r(0, 1),
            r(0, 1),
            r(1, 2),
            r(0, 1),
        ])
        .unwrap();
        let dec = frl_decompose(&p, &["V"], &["W"], "Z").unwrap();
        assert!(dec.z_pmf.iter().all(|z| !z.is_zero()));
        assert_eq!(frl_verify(&p, &dec).unwrap().reconstruction_error, 0.0);
    }

    #[test]
    fn constant_u_is_independent_of_the_rest() {
        let p = two_by_two().with_constant_axis("U").unwrap();
        let dec = frl_decompose(&p, &["V"], &["W"], "Z").unwrap();
        let j = compose_joint(&p, &dec).unwrap().to_float();
        let mi = crate::prob::mutual_information(&j, &["U"], &["V", "W", "Z"], &[] as &[&str]).unwrap();
        assert_eq!(mi, 0.0);
    }

    #[test]
    fn float_input_is_snapped() {
        let p = JointPmf::new(vec![bit("V"), bit("W")], vec![0.375, 0.125, 0.25, 0.25]).unwrap();
        let (dec, err) = frl_decompose_float(&p, &["V"], &["W"], "Z").unwrap();
        assert_eq!(err, 0.0);
        assert_eq!(dec.z_size(), 3);
    }
}
