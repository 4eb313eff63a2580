use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A named finite alphabet.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alphabet {
    pub name: String,
    pub size: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
}

impl Alphabet {
    pub fn new(name: impl Into<String>, size: usize) -> Result<Self> {
        let a = Self { name: name.into(), size, labels: None };
        a.validate()?;
        Ok(a)
    }

    /// Size-one alphabet, i.e. a constant random variable.
    pub fn constant(name: impl Into<String>) -> Self {
        Self { name: name.into(), size: 1, labels: None }
    }

    pub fn with_labels(name: impl Into<String>, labels: Vec<String>) -> Result<Self> {
        let a = Self { name: name.into(), size: labels.len(), labels: Some(labels) };
        a.validate()?;
        Ok(a)
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::InvalidAlphabet("empty name".into()));
        }
        if self.size == 0 {
            return Err(Error::InvalidAlphabet(format!("`{}` has size 0", self.name)));
        }
        if let Some(labels) = &self.labels {
            if labels.len() != self.size {
                return Err(Error::InvalidAlphabet(format!(
                    "`{}` has {} labels for size {}",
                    self.name,
                    labels.len(),
                    self.size
                )));
            }
            let mut sorted = labels.clone();
            sorted.sort();
            sorted.dedup();
            if sorted.len() != labels.len() {
                return Err(Error::InvalidAlphabet(format!("`{}` has repeated labels", self.name)));
            }
        }
        Ok(())
    }

    pub fn renamed(&self, name: impl Into<String>) -> Self {
        Self { name: name.into(), ..self.clone() }
    }

    pub fn is_constant(&self) -> bool {
        self.size == 1
    }
}
