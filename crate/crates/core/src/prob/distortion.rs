use serde::{Deserialize, Serialize};

use super::alphabet::Alphabet;
use super::num::Prob;
use super::pmf::{flat_index, for_each_index, JointPmf};
use crate::error::{Error, Result};

/// Per-letter distortion `d(x, x̂)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistortionMeasure {
    source: Alphabet,
    recon: Alphabet,
    table: Vec<f64>,
}

impl DistortionMeasure {
    pub fn new(source: Alphabet, recon: Alphabet, table: Vec<Vec<f64>>) -> Result<Self> {
        if table.len() != source.size || table.iter().any(|r| r.len() != recon.size) {
            return Err(Error::InvalidDistortion(format!(
                "table must be {}x{}",
                source.size, recon.size
            )));
        }
        let table: Vec<f64> = table.into_iter().flatten().collect();
        if table.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidDistortion("entries must be finite and nonnegative".into()));
        }
        Ok(Self { source, recon, table })
    }

    /// `d(x, x̂) = 1{x != x̂}` on symbol indices.
    pub fn hamming(source: Alphabet, recon: Alphabet) -> Self {
        let table = (0..source.size)
            .flat_map(|x| (0..recon.size).map(move |y| if x == y { 0.0 } else { 1.0 }))
            .collect();
        Self { source, recon, table }
    }

    pub fn source(&self) -> &Alphabet {
        &self.source
    }

    pub fn recon(&self) -> &Alphabet {
        &self.recon
    }

    pub fn d(&self, x: usize, xhat: usize) -> f64 {
        self.table[x * self.recon.size + xhat]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.table.chunks(self.recon.size).map(|r| r.to_vec()).collect()
    }

    /// Smallest distortion reachable at any rate: `Σ_x p(x) min_x̂ d(x, x̂)`.
    pub fn min_distortion(&self, source_pmf: &[f64]) -> f64 {
        source_pmf
            .iter()
            .enumerate()
            .map(|(x, p)| p * (0..self.recon.size).map(|y| self.d(x, y)).fold(f64::INFINITY, f64::min))
            .sum()
    }

    /// Best constant reconstruction `(x̂, distortion)`; ties by lowest index.
    pub fn best_constant(&self, source_pmf: &[f64]) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for y in 0..self.recon.size {
            let v: f64 = source_pmf.iter().enumerate().map(|(x, p)| p * self.d(x, y)).sum();
            if v < best.1 {
                best = (y, v);
            }
        }
        best
    }

    pub fn to_spec(&self) -> DistortionSpec {
        DistortionSpec::Table {
            source: self.source.name.clone(),
            recon: self.recon.name.clone(),
            table: self.rows(),
        }
    }
}

/// JSON form: `"hamming"` or `{ "source": name, "recon": name, "table": [[...]] }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DistortionSpec {
    Named(String),
    Table { source: String, recon: String, table: Vec<Vec<f64>> },
}

impl DistortionSpec {
    /// Resolves against the source alphabet found in a pmf; `recon_size` is used by
    /// named measures.
    pub fn resolve(&self, source: &Alphabet, recon_size: usize) -> Result<DistortionMeasure> {
        match self {
            DistortionSpec::Named(n) if n == "hamming" => Ok(DistortionMeasure::hamming(
                source.clone(),
                Alphabet::new(format!("{}hat", source.name), recon_size)?,
            )),
            DistortionSpec::Named(n) => {
                Err(Error::InvalidDistortion(format!("unknown built-in measure `{n}`")))
            }
            DistortionSpec::Table { source: s, recon, table } => {
                if s != &source.name && table.len() != source.size {
                    return Err(Error::InvalidDistortion(format!("source `{s}` does not match")));
                }
                let width = table.first().map_or(0, |r| r.len());
                DistortionMeasure::new(
                    source.renamed(s.clone()),
                    Alphabet::new(recon.clone(), width)?,
                    table.clone(),
                )
            }
        }
    }
}

/// Deterministic reconstruction table over named input axes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decoder {
    pub inputs: Vec<String>,
    pub shape: Vec<usize>,
    pub table: Vec<usize>,
}

impl Decoder {
    pub fn new(inputs: Vec<String>, shape: Vec<usize>, table: Vec<usize>) -> Result<Self> {
        if inputs.len() != shape.len() {
            return Err(Error::Decoder("inputs and shape differ in length".into()));
        }
        let n: usize = shape.iter().product();
        if table.len() != n {
            return Err(Error::Decoder(format!(
                "table has {} entries, {} input tuples",
                table.len(),
                n
            )));
        }
        Ok(Self { inputs, shape, table })
    }

    pub fn constant(symbol: usize) -> Self {
        Self { inputs: vec![], shape: vec![], table: vec![symbol] }
    }

    /// Reads one axis and outputs its symbol index.
    pub fn identity(axis: &str, size: usize) -> Self {
        Self { inputs: vec![axis.to_string()], shape: vec![size], table: (0..size).collect() }
    }

    pub fn eval(&self, idx: &[usize]) -> usize {
        self.table[flat_index(&self.shape, idx)]
    }

    fn check<T: Prob>(&self, p: &JointPmf<T>, recon: usize) -> Result<Vec<usize>> {
        let pos = p.positions(&self.inputs).map_err(|e| Error::Decoder(e.to_string()))?;
        for (j, &q) in pos.iter().enumerate() {
            if p.axes()[q].size != self.shape[j] {
                return Err(Error::Decoder(format!(
                    "input `{}` has size {} in the pmf, {} in the decoder",
                    self.inputs[j],
                    p.axes()[q].size,
                    self.shape[j]
                )));
            }
        }
        if let Some(&bad) = self.table.iter().find(|&&v| v >= recon) {
            return Err(Error::Decoder(format!("output {bad} outside reconstruction alphabet")));
        }
        Ok(pos)
    }

    /// Joint law of (source, reconstruction).
    pub fn reconstruction_law<T: Prob>(
        &self,
        p: &JointPmf<T>,
        d: &DistortionMeasure,
    ) -> Result<JointPmf<T>> {
        let src = p.position(&d.source.name)?;
        let recon = d.recon.size;
        let pos = self.check(p, recon)?;
        let ns = p.axes()[src].size;
        let mut out = vec![T::zero(); ns * recon];
        let mut sub = vec![0; pos.len()];
        for_each_index(&p.shape(), |idx, flat| {
            let v = &p.values()[flat];
            if v.is_zero() {
                return;
            }
            for (j, &q) in pos.iter().enumerate() {
                sub[j] = idx[q];
            }
            let y = self.eval(&sub);
            let cell = &mut out[idx[src] * recon + y];
            *cell = cell.clone() + v.clone();
        });
        Ok(JointPmf::new_unchecked(
            vec![p.axes()[src].clone(), d.recon.renamed(format!("{}_hat", d.source.name))],
            out,
        ))
    }
}

/// `Σ p(x, aux) d(x, decoder(aux))`.
pub fn expected_distortion<T: Prob>(
    p: &JointPmf<T>,
    d: &DistortionMeasure,
    decoder: &Decoder,
) -> Result<T> {
    let law = decoder.reconstruction_law(p, d)?;
    let recon = d.recon.size;
    Ok(law
        .values()
        .iter()
        .enumerate()
        .filter(|(_, v)| !v.is_zero())
        .fold(T::zero(), |acc, (i, v)| acc + v.clone() * T::from_f64(d.d(i / recon, i % recon))))
}

/// Pointwise-optimal decoder reading `inputs`: each input tuple maps to the
/// reconstruction minimizing its conditional expected distortion (ties by
/// lowest index).
pub fn bayes_decoder<S: AsRef<str>>(
    p: &JointPmf<f64>,
    d: &DistortionMeasure,
    inputs: &[S],
) -> Result<Decoder> {
    let src = p.position(&d.source.name)?;
    let pos = p.positions(inputs)?;
    if pos.contains(&src) {
        return Err(Error::Decoder("decoder may not read the source".into()));
    }
    let shape: Vec<usize> = pos.iter().map(|&q| p.axes()[q].size).collect();
    let n_in: usize = shape.iter().product();
    let recon = d.recon.size;
    let mut cost = vec![0.0; n_in * recon];
    let pshape = p.shape();
    let mut sub = vec![0; pos.len()];
    for_each_index(&pshape, |idx, flat| {
        let v = p.values()[flat];
        if v == 0.0 {
            return;
        }
        for (j, &q) in pos.iter().enumerate() {
            sub[j] = idx[q];
        }
        let r = flat_index(&shape, &sub);
        for y in 0..recon {
            cost[r * recon + y] += v * d.d(idx[src], y);
        }
    });
    let table = cost
        .chunks(recon)
        .map(|c| {
            let mut best = 0;
            for y in 1..recon {
                if c[y] < c[best] {
                    best = y;
                }
            }
            best
        })
        .collect();
    Decoder::new(inputs.iter().map(|s| s.as_ref().to_string()).collect(), shape, table)
}
