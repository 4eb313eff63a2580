use super::alphabet::Alphabet;
use super::num::Prob;
use crate::error::{Error, Result};

/// Conditional pmf table `p(outputs | inputs)`, one row per input tuple.
///
/// Rows of a channel obtained by conditioning on a zero-probability input tuple
/// are marked undefined; they hold zeros and must not be used.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel<T = f64> {
    inputs: Vec<Alphabet>,
    outputs: Vec<Alphabet>,
    rows: Vec<T>,
    defined: Vec<bool>,
}

impl<T: Prob> Channel<T> {
    pub fn new(inputs: Vec<Alphabet>, outputs: Vec<Alphabet>, rows: Vec<T>) -> Result<Self> {
        let n_in: usize = inputs.iter().map(|a| a.size).product();
        let n_out: usize = outputs.iter().map(|a| a.size).product();
        if outputs.is_empty() {
            return Err(Error::InvalidChannel("channel needs an output axis".into()));
        }
        if rows.len() != n_in * n_out {
            return Err(Error::InvalidChannel(format!(
                "expected {} rows of length {n_out}, got {} entries",
                n_in,
                rows.len()
            )));
        }
        for (r, row) in rows.chunks(n_out).enumerate() {
            if row.iter().any(|v| v.is_neg()) {
                return Err(Error::InvalidChannel(format!("row {r} has a negative entry")));
            }
            let total = row.iter().fold(T::zero(), |acc, v| acc + v.clone());
            if !total.is_unit_total() {
                return Err(Error::InvalidChannel(format!("row {r} sums to {}", total.to_f64())));
            }
        }
        Ok(Self { inputs, outputs, rows, defined: vec![true; n_in] })
    }

    pub(crate) fn from_parts(
        inputs: Vec<Alphabet>,
        outputs: Vec<Alphabet>,
        rows: Vec<T>,
        defined: Vec<bool>,
    ) -> Self {
        Self { inputs, outputs, rows, defined }
    }

    pub fn inputs(&self) -> &[Alphabet] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[Alphabet] {
        &self.outputs
    }

    pub fn input_size(&self) -> usize {
        self.defined.len()
    }

    pub fn output_size(&self) -> usize {
        self.outputs.iter().map(|a| a.size).product()
    }

    pub fn row(&self, r: usize) -> &[T] {
        let n = self.output_size();
        &self.rows[r * n..(r + 1) * n]
    }

    pub fn is_defined(&self, r: usize) -> bool {
        self.defined[r]
    }

    pub fn defined_rows(&self) -> impl Iterator<Item = (usize, &[T])> {
        (0..self.input_size()).filter(|&r| self.defined[r]).map(move |r| (r, self.row(r)))
    }

    pub fn to_float(&self) -> Channel<f64> {
        Channel {
            inputs: self.inputs.clone(),
            outputs: self.outputs.clone(),
            rows: self.rows.iter().map(|v| v.to_f64()).collect(),
            defined: self.defined.clone(),
        }
    }
}
