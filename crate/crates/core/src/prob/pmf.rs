use std::collections::HashSet;
use num_bigint::BigInt;
use num_traits::{One, Zero};


use super::alphabet::Alphabet;
use super::channel::Channel;
use super::num::{snap_to_rational, Prob, Rational};
use crate::error::{Error, Result};

/// Row-major strides (last axis fastest).
pub fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * shape[i + 1];
    }
    s
}

/// Calls `f(index_tuple, flat_index)` for every cell of `shape` in row-major order.
pub fn for_each_index(shape: &[usize], mut f: impl FnMut(&[usize], usize)) {
    let total: usize = shape.iter().product();
    let mut idx = vec![0usize; shape.len()];
    for flat in 0..total {
        f(&idx, flat);
        for ax in (0..shape.len()).rev() {
            idx[ax] += 1;
            if idx[ax] < shape[ax] {
                break;
            }
            idx[ax] = 0;
        }
    }
}

/// For each flat cell of `shape`, the flat index of its projection onto `keep`
/// (positions, in the given order).
pub fn projection_map(shape: &[usize], keep: &[usize]) -> (Vec<usize>, usize) {
    let sub_shape: Vec<usize> = keep.iter().map(|&k| shape[k]).collect();
    let sub_strides = strides(&sub_shape);
    let size: usize = sub_shape.iter().product();
    let mut map = Vec::with_capacity(shape.iter().product());
    for_each_index(shape, |idx, _| {
        let mut m = 0;
        for (j, &k) in keep.iter().enumerate() {
            m += idx[k] * sub_strides[j];
        }
        map.push(m);
    });
    (map, size)
}

/// Flat index of `idx` in `shape`.
pub fn flat_index(shape: &[usize], idx: &[usize]) -> usize {
    idx.iter().zip(shape).fold(0, |acc, (&i, &n)| acc * n + i)
}

/// Inverse of [`flat_index`].
pub fn unflatten(shape: &[usize], mut flat: usize) -> Vec<usize> {
    let mut idx = vec![0; shape.len()];
    for ax in (0..shape.len()).rev() {
        idx[ax] = flat % shape[ax];
        flat /= shape[ax];
    }
    idx
}

/// Dense joint pmf over named finite alphabets.
#[derive(Debug, Clone, PartialEq)]
pub struct JointPmf<T = f64> {
    axes: Vec<Alphabet>,
    values: Vec<T>,
}

/// Exact-rational joint pmf.
pub type ExactPmf = JointPmf<Rational>;

fn check_axes(axes: &[Alphabet]) -> Result<()> {
    let mut seen = HashSet::new();
    for a in axes {
        a.validate()?;
        if !seen.insert(a.name.as_str()) {
            return Err(Error::DuplicateAxis(a.name.clone()));
        }
    }
    Ok(())
}

impl<T: Prob> JointPmf<T> {
    pub fn new(axes: Vec<Alphabet>, values: Vec<T>) -> Result<Self> {
        check_axes(&axes)?;
        let n: usize = axes.iter().map(|a| a.size).product();
        if values.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "expected {n} entries, found {}",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| v.is_neg()) {
            return Err(Error::InvalidPmf(format!("negative entry at flat index {pos}")));
        }
        let total = values.iter().fold(T::zero(), |acc, v| acc + v.clone());
        if !total.is_unit_total() {
            return Err(Error::InvalidPmf(format!("entries sum to {}", total.to_f64())));
        }
        Ok(Self { axes, values })
    }

    /// Builds a pmf, normalizing the nonnegative weights to sum to one.
    pub fn from_weights(axes: Vec<Alphabet>, weights: Vec<T>) -> Result<Self> {
        let total = weights.iter().fold(T::zero(), |acc, v| acc + v.clone());
        if total.is_zero() || total.is_neg() {
            return Err(Error::InvalidPmf("weights sum to zero".into()));
        }
        let values: Vec<T> = weights.into_iter().map(|w| w / total.clone()).collect();
        if T::EXACT {
            return Self::new(axes, values);
        }
        // Normalized by construction; skip the float sum test.
        check_axes(&axes)?;
        let n: usize = axes.iter().map(|a| a.size).product();
        if values.len() != n {
            return Err(Error::ShapeMismatch(format!("expected {n} entries, found {}", values.len())));
        }
        if let Some(pos) = values.iter().position(|v| v.is_neg()) {
            return Err(Error::InvalidPmf(format!("negative entry at flat index {pos}")));
        }
        Ok(Self { axes, values })
    }

    pub fn from_fn(axes: Vec<Alphabet>, mut f: impl FnMut(&[usize]) -> T) -> Result<Self> {
        let shape: Vec<usize> = axes.iter().map(|a| a.size).collect();
        let mut values = Vec::with_capacity(shape.iter().product());
        for_each_index(&shape, |idx, _| values.push(f(idx)));
        Self::new(axes, values)
    }

    pub(crate) fn new_unchecked(axes: Vec<Alphabet>, values: Vec<T>) -> Self {
        debug_assert_eq!(values.len(), axes.iter().map(|a| a.size).product::<usize>());
        Self { axes, values }
    }

    pub fn uniform(axes: Vec<Alphabet>) -> Result<Self> {
        let n: usize = axes.iter().map(|a| a.size).product();
        let v = T::one() / T::from_ratio(n as i64, 1);
        Self::new(axes, vec![v; n])
    }

    pub fn point_mass(axes: Vec<Alphabet>, at: &[usize]) -> Result<Self> {
        let shape: Vec<usize> = axes.iter().map(|a| a.size).collect();
        if at.len() != shape.len() || at.iter().zip(&shape).any(|(i, n)| i >= n) {
            return Err(Error::ShapeMismatch("point outside alphabet".into()));
        }
        let mut values = vec![T::zero(); shape.iter().product()];
        values[flat_index(&shape, at)] = T::one();
        Self::new(axes, values)
    }

    pub fn axes(&self) -> &[Alphabet] {
        &self.axes
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.size).collect()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn axis_names(&self) -> Vec<&str> {
        self.axes.iter().map(|a| a.name.as_str()).collect()
    }

    pub fn has_axis(&self, name: &str) -> bool {
        self.axes.iter().any(|a| a.name == name)
    }

    pub fn position(&self, name: &str) -> Result<usize> {
        self.axes
            .iter()
            .position(|a| a.name == name)
            .ok_or_else(|| Error::UnknownAxis(name.to_string()))
    }

    pub fn positions<S: AsRef<str>>(&self, names: &[S]) -> Result<Vec<usize>> {
        let mut seen = HashSet::new();
        names
            .iter()
            .map(|n| {
                let n = n.as_ref();
                if !seen.insert(n.to_string()) {
                    return Err(Error::DuplicateAxis(n.to_string()));
                }
                self.position(n)
            })
            .collect()
    }

    pub fn axis(&self, name: &str) -> Result<&Alphabet> {
        Ok(&self.axes[self.position(name)?])
    }

    pub fn get(&self, idx: &[usize]) -> &T {
        &self.values[flat_index(&self.shape(), idx)]
    }

    /// Sums out every axis not in `keep`; axis order of `self` is preserved.
    pub fn marginalize<S: AsRef<str>>(&self, keep: &[S]) -> Result<Self> {
        let mut pos = self.positions(keep)?;
        pos.sort_unstable();
        self.marginalize_positions(&pos)
    }

    pub(crate) fn marginalize_positions(&self, pos: &[usize]) -> Result<Self> {
        let (map, size) = projection_map(&self.shape(), pos);
        let mut values = vec![T::zero(); size];
        for (v, &m) in self.values.iter().zip(&map) {
            if !v.is_zero() {
                values[m] = values[m].clone() + v.clone();
            }
        }
        let axes = pos.iter().map(|&i| self.axes[i].clone()).collect();
        Ok(Self { axes, values })
    }

    /// Marginal over `names` in the order given.
    pub fn marginal_ordered<S: AsRef<str>>(&self, names: &[S]) -> Result<Self> {
        let m = self.marginalize(names)?;
        m.reorder(names)
    }

    /// Permutes axes into the order given (must name every axis).
    pub fn reorder<S: AsRef<str>>(&self, names: &[S]) -> Result<Self> {
        if names.len() != self.axes.len() {
            return Err(Error::ShapeMismatch(format!(
                "reorder needs all {} axes, got {}",
                self.axes.len(),
                names.len()
            )));
        }
        let pos = self.positions(names)?;
        if pos.iter().enumerate().all(|(i, &p)| i == p) {
            return Ok(self.clone());
        }
        let shape = self.shape();
        let st = strides(&shape);
        let new_shape: Vec<usize> = pos.iter().map(|&p| shape[p]).collect();
        let mut values = Vec::with_capacity(self.values.len());
        for_each_index(&new_shape, |idx, _| {
            let mut flat = 0;
            for (j, &p) in pos.iter().enumerate() {
                flat += idx[j] * st[p];
            }
            values.push(self.values[flat].clone());
        });
        let axes = pos.iter().map(|&p| self.axes[p].clone()).collect();
        Ok(Self { axes, values })
    }

    /// Conditional law of `of` given `given`.
    pub fn condition<S: AsRef<str>>(&self, given: &[S], of: &[S]) -> Result<Channel<T>> {
        for g in given {
            if of.iter().any(|o| o.as_ref() == g.as_ref()) {
                return Err(Error::OverlappingAxes(g.as_ref().to_string()));
            }
        }
        let mut names: Vec<&str> = given.iter().map(|s| s.as_ref()).collect();
        names.extend(of.iter().map(|s| s.as_ref()));
        let joint = self.marginal_ordered(&names)?;
        let inputs: Vec<Alphabet> = joint.axes[..given.len()].to_vec();
        let outputs: Vec<Alphabet> = joint.axes[given.len()..].to_vec();
        let n_out: usize = outputs.iter().map(|a| a.size).product();
        let n_in: usize = inputs.iter().map(|a| a.size).product();
        let mut rows = Vec::with_capacity(n_in * n_out);
        let mut defined = Vec::with_capacity(n_in);
        for r in 0..n_in {
            let row = &joint.values[r * n_out..(r + 1) * n_out];
            let total = row.iter().fold(T::zero(), |acc, v| acc + v.clone());
            if total.is_zero() {
                defined.push(false);
                rows.extend(std::iter::repeat_n(T::zero(), n_out));
            } else {
                defined.push(true);
                rows.extend(row.iter().map(|v| v.clone() / total.clone()));
            }
        }
        Ok(Channel::from_parts(inputs, outputs, rows, defined))
    }

    /// Appends the channel's output axes: p(..., out) = p(...) ch(out | inputs).
    pub fn extend(&self, ch: &Channel<T>) -> Result<Self> {
        let in_names: Vec<&str> = ch.inputs().iter().map(|a| a.name.as_str()).collect();
        let in_pos = self.positions(&in_names)?;
        for (a, &p) in ch.inputs().iter().zip(&in_pos) {
            if self.axes[p].size != a.size {
                return Err(Error::ShapeMismatch(format!(
                    "channel input `{}` has size {}, pmf axis has {}",
                    a.name, a.size, self.axes[p].size
                )));
            }
        }
        for o in ch.outputs() {
            if self.has_axis(&o.name) {
                return Err(Error::DuplicateAxis(o.name.clone()));
            }
        }
        let (map, _) = projection_map(&self.shape(), &in_pos);
        let n_out = ch.output_size();
        let mut values = Vec::with_capacity(self.values.len() * n_out);
        for (v, &row) in self.values.iter().zip(&map) {
            if v.is_zero() {
                values.extend(std::iter::repeat_n(T::zero(), n_out));
                continue;
            }
            if !ch.is_defined(row) {
                return Err(Error::InvalidChannel(format!(
                    "row {row} is undefined but has positive probability"
                )));
            }
            values.extend(ch.row(row).iter().map(|c| v.clone() * c.clone()));
        }
        let mut axes = self.axes.clone();
        axes.extend(ch.outputs().iter().cloned());
        Ok(Self { axes, values })
    }

    /// Appends a deterministic axis `alphabet = f(inputs)`.
    pub fn with_function_axis<S: AsRef<str>>(
        &self,
        alphabet: Alphabet,
        inputs: &[S],
        f: impl Fn(&[usize]) -> usize,
    ) -> Result<Self> {
        alphabet.validate()?;
        if self.has_axis(&alphabet.name) {
            return Err(Error::DuplicateAxis(alphabet.name));
        }
        let pos = self.positions(inputs)?;
        let n = alphabet.size;
        let mut values = Vec::with_capacity(self.values.len() * n);
        let mut sub = vec![0usize; pos.len()];
        let mut err = None;
        for_each_index(&self.shape(), |idx, flat| {
            for (j, &p) in pos.iter().enumerate() {
                sub[j] = idx[p];
            }
            let out = f(&sub);
            if out >= n && err.is_none() {
                err = Some(out);
            }
            for k in 0..n {
                values.push(if k == out { self.values[flat].clone() } else { T::zero() });
            }
        });
        if let Some(out) = err {
            return Err(Error::ShapeMismatch(format!(
                "function value {out} outside alphabet `{}` of size {n}",
                alphabet.name
            )));
        }
        let mut axes = self.axes.clone();
        axes.push(alphabet);
        Ok(Self { axes, values })
    }

    /// Appends a size-one axis.
    pub fn with_constant_axis(&self, name: &str) -> Result<Self> {
        if self.has_axis(name) {
            return Err(Error::DuplicateAxis(name.to_string()));
        }
        let mut axes = self.axes.clone();
        axes.push(Alphabet::constant(name));
        Ok(Self { axes, values: self.values.clone() })
    }

    pub fn rename_axis(&self, old: &str, new: &str) -> Result<Self> {
        let p = self.position(old)?;
        if old != new && self.has_axis(new) {
            return Err(Error::DuplicateAxis(new.to_string()));
        }
        let mut out = self.clone();
        out.axes[p].name = new.to_string();
        Ok(out)
    }

    /// Replaces `names` by a single product axis placed where the first of them was.
    /// The product symbol is the row-major index over `names` in the given order.
    pub fn merge_axes<S: AsRef<str>>(&self, names: &[S], merged: &str) -> Result<Self> {
        if names.is_empty() {
            return Err(Error::ShapeMismatch("merge needs at least one axis".into()));
        }
        let pos = self.positions(names)?;
        let first = *pos.iter().min().unwrap();
        let mut order: Vec<usize> = Vec::new();
        for i in 0..self.axes.len() {
            if i == first {
                order.extend(pos.iter().copied());
            } else if !pos.contains(&i) {
                order.push(i);
            }
        }
        let order_names: Vec<&str> = order.iter().map(|&i| self.axes[i].name.as_str()).collect();
        let r = self.reorder(&order_names)?;
        let size: usize = pos.iter().map(|&p| self.axes[p].size).product();
        let mut axes = Vec::new();
        let mut i = 0;
        while i < r.axes.len() {
            if i == first {
                axes.push(Alphabet { name: merged.to_string(), size, labels: None });
                i += pos.len();
            } else {
                axes.push(r.axes[i].clone());
                i += 1;
            }
        }
        check_axes(&axes)?;
        Ok(Self { axes, values: r.values })
    }

    /// Independent product `self ⊗ other`.
    pub fn product(&self, other: &Self) -> Result<Self> {
        let mut axes = self.axes.clone();
        axes.extend(other.axes.iter().cloned());
        check_axes(&axes)?;
        let mut values = Vec::with_capacity(self.values.len() * other.values.len());
        for a in &self.values {
            for b in &other.values {
                values.push(a.clone() * b.clone());
            }
        }
        Ok(Self { axes, values })
    }

    pub fn to_float(&self) -> JointPmf<f64> {
        JointPmf { axes: self.axes.clone(), values: self.values.iter().map(|v| v.to_f64()).collect() }
    }

    /// Largest absolute entrywise difference after aligning `other`'s axes by name.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        let names = self.axis_names();
        let o = other.reorder(&names)?;
        if o.shape() != self.shape() {
            return Err(Error::ShapeMismatch("pmfs have different alphabets".into()));
        }
        Ok(self
            .values
            .iter()
            .zip(&o.values)
            .map(|(a, b)| {
                let d = a.clone() - b.clone();
                d.to_f64().abs()
            })
            .fold(0.0, f64::max))
    }

    /// Exact equality after aligning axes by name.
    pub fn same_law(&self, other: &Self) -> Result<bool> {
        let names = self.axis_names();
        let o = other.reorder(&names)?;
        Ok(o.shape() == self.shape() && o.values == self.values)
    }
}

impl JointPmf<f64> {
    /// Snaps every entry to a rational with denominator at most `max_den`, then
    /// renormalizes exactly. Returns the pmf and the largest entrywise change.
    /// Exact copy with denominators ≤ `max_den`. Entries keep their own best
    /// approximations when those already sum to one; otherwise all entries
    /// share the denominator `max_den` (largest-remainder rounding), which
    /// keeps exact arithmetic on the result cheap. Returns the max entry error.
    pub fn snap(&self, max_den: u64) -> Result<(ExactPmf, f64)> {
        let own: Vec<Rational> = self.values.iter().map(|&v| snap_to_rational(v.max(0.0), max_den)).collect();
        let total = own.iter().fold(Rational::zero(), |a, b| a + b);
        let p = if total.is_one() {
            JointPmf::new(self.axes.clone(), own)?
        } else {
            JointPmf::new(self.axes.clone(), apportion(&self.values, max_den)?)?
        };
        let err = p
            .values
            .iter()
            .zip(&self.values)
            .map(|(a, &b)| (a.to_f64() - b).abs())
            .fold(0.0, f64::max);
        Ok((p, err))
    }
}

/// `k_i / n` with `Σ k_i = n`, `k_i` the floor of `n·v_i/Σv` plus one unit
/// for the largest fractional parts (ties to the lower index).
fn apportion(values: &[f64], n: u64) -> Result<Vec<Rational>> {
    let sum: f64 = values.iter().map(|v| v.max(0.0)).sum();
    if sum <= 0.0 || !sum.is_finite() {
        return Err(Error::InvalidPmf("weights sum to zero".into()));
    }
    let scaled: Vec<f64> = values.iter().map(|v| v.max(0.0) / sum * n as f64).collect();
    let mut k: Vec<u64> = scaled.iter().map(|s| s.floor() as u64).collect();
    let used: u64 = k.iter().sum();
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| (scaled[b] - scaled[b].floor()).total_cmp(&(scaled[a] - scaled[a].floor())).then(a.cmp(&b)));
    let missing = n.saturating_sub(used) as usize;
    for &i in order.iter().cycle().take(missing) {
        k[i] += 1;
    }
    let den = BigInt::from(n);
    Ok(k.into_iter().map(|ki| Rational::new(BigInt::from(ki), den.clone())).collect())
}

impl ExactPmf {
    /// Converts a float pmf whose entries are already exact binary fractions.
    pub fn from_float_exact(p: &JointPmf<f64>) -> Result<Self> {
        Self::from_weights(p.axes.clone(), p.values.iter().map(|&v| Rational::from_f64(v)).collect())
    }
}

/// Default denominator cap when snapping floats to rationals.
pub const SNAP_MAX_DENOMINATOR: u64 = 1_000_000_000;

#[cfg(test)]
mod tests {
    use super::*;

    fn bit(name: &str) -> Alphabet {
        Alphabet::new(name, 2).unwrap()
    }

    #[test]
    fn uniform_marginal_is_uniform() {
        let p = JointPmf::<f64>::uniform(vec![bit("A"), bit("B")]).unwrap();
        let m = p.marginalize(&["A"]).unwrap();
        assert_eq!(m.values(), &[0.5, 0.5]);
    }

    #[test]
    fn copy_marginal_equals_source() {
        let p = JointPmf::new(vec![bit("X"), bit("Y")], vec![0.3, 0.0, 0.0, 0.7]).unwrap();
        assert_eq!(p.marginalize(&["Y"]).unwrap().values(), &[0.3, 0.7]);
        assert_eq!(p.marginalize(&["X"]).unwrap().values(), &[0.3, 0.7]);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(
            JointPmf::new(vec![bit("X")], vec![0.5, 0.6]),
            Err(Error::InvalidPmf(_))
        ));
        assert!(matches!(
            JointPmf::new(vec![bit("X")], vec![1.5, -0.5]),
            Err(Error::InvalidPmf(_))
        ));
        assert!(matches!(
            JointPmf::new(vec![bit("X"), bit("X")], vec![0.25; 4]),
            Err(Error::DuplicateAxis(_))
        ));
        let p = JointPmf::<f64>::uniform(vec![bit("X")]).unwrap();
        assert!(matches!(p.marginalize(&["Q"]), Err(Error::UnknownAxis(_))));
    }

    #[test]
    fn condition_identity_and_zero_rows() {
        let p = JointPmf::new(vec![bit("X"), bit("Y")], vec![0.5, 0.0, 0.0, 0.5]).unwrap();
        let ch = p.condition(&["X"], &["Y"]).unwrap();
        assert_eq!(ch.row(0), &[1.0, 0.0]);
        assert_eq!(ch.row(1), &[0.0, 1.0]);

        let q = JointPmf::new(vec![bit("X"), bit("Y")], vec![0.0, 0.0, 0.4, 0.6]).unwrap();
        let ch = q.condition(&["X"], &["Y"]).unwrap();
        assert!(!ch.is_defined(0));
        assert!(ch.is_defined(1));
        assert!(matches!(p.condition(&["X"], &["X"]), Err(Error::OverlappingAxes(_))));
    }

    #[test]
    fn reorder_and_merge() {
        let axes = vec![bit("A"), Alphabet::new("B", 3).unwrap()];
        let p = JointPmf::from_weights(axes, (1..=6).map(|v| v as f64).collect()).unwrap();
        let r = p.reorder(&["B", "A"]).unwrap();
        // p(a=1, b=2) sits at flat 5 originally, at (2,1) -> 5 after reorder.
        assert_eq!(r.get(&[2, 1]), p.get(&[1, 2]));
        assert_eq!(r.get(&[1, 0]), p.get(&[0, 1]));
        let m = p.merge_axes(&["B", "A"], "BA").unwrap();
        assert_eq!(m.axes().len(), 1);
        assert_eq!(m.values(), r.values());
    }

    #[test]
    fn function_axis_and_extend() {
        let p = JointPmf::<f64>::uniform(vec![bit("X")]).unwrap();
        let q = p.with_function_axis(bit("Y"), &["X"], |x| 1 - x[0]).unwrap();
        assert_eq!(q.values(), &[0.0, 0.5, 0.5, 0.0]);
        let ch = Channel::new(vec![bit("X")], vec![bit("Z")], vec![0.9, 0.1, 0.2, 0.8]).unwrap();
        let r = p.extend(&ch).unwrap();
        assert_eq!(r.values(), &[0.45, 0.05, 0.1, 0.4]);
    }

    #[test]
    fn snap_is_exact_normalized() {
        let p = JointPmf::new(vec![bit("X")], vec![0.1, 0.9]).unwrap();
        let (e, err) = p.snap(SNAP_MAX_DENOMINATOR).unwrap();
        assert_eq!(e.values()[0], Rational::from_ratio(1, 10));
        assert!(err < 1e-16);
    }

    #[test]
    fn snap_falls_back_to_a_shared_denominator() {
        let w = [0.123456789123, 0.2000000001234, 0.31415926535, 0.36238482337];
        let t: f64 = w.iter().sum();
        let p = JointPmf::new(vec![Alphabet::new("X", 4).unwrap()], w.iter().map(|v| v / t).collect()).unwrap();
        let (e, err) = p.snap(SNAP_MAX_DENOMINATOR).unwrap();
        assert!(err <= 1e-9);
        assert!(e.values().iter().all(|v| (SNAP_MAX_DENOMINATOR as i64 % v.denom().to_string().parse::<i64>().unwrap()) == 0));
    }
}
