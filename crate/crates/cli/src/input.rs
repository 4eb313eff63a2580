//! JSON input documents.

use std::collections::BTreeMap;

use mdrd_core::polymatroid::parse_subset;
use mdrd_core::prob::json::flatten_nested;
use mdrd_core::prob::{DistortionSpec, PmfJson, Prob};
use mdrd_core::regions::{AuxScheme, Family};
use mdrd_core::strategy::StateChannel;
use mdrd_core::{Alphabet, Channel, Decoder, DistortionMeasure, Error, JointPmf, Rational, Result};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::Value;

/// Deserializes `text`, naming the JSON path of the first problem.
pub fn parse<T: DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::Parse { path: if path == "." { "$".into() } else { format!("$.{path}") }, message: e.inner().to_string() }
    })
}

/// Re-roots a pmf-relative parse error under `field`.
pub fn under(field: &str, e: Error) -> Error {
    match e {
        Error::Parse { path, message } => Error::Parse { path: path.replacen('$', &format!("$.{field}"), 1), message },
        Error::InvalidPmf(m) => Error::Parse { path: format!("$.{field}"), message: m },
        other => other,
    }
}

pub fn exact_pmf(p: &PmfJson, field: &str) -> Result<JointPmf<Rational>> {
    p.to_exact().map_err(|e| under(field, e))
}

pub fn float_pmf(p: &PmfJson, field: &str) -> Result<JointPmf<f64>> {
    p.to_float().map_err(|e| under(field, e))
}

/// `{ "pmf": …, "v": [...], "w": [...], "z": "Z" }`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrlInput {
    pub pmf: PmfJson,
    #[serde(default)]
    pub v: Option<Vec<String>>,
    #[serde(default)]
    pub w: Option<Vec<String>>,
    #[serde(default = "default_z")]
    pub z: String,
}

fn default_z() -> String {
    "Z".into()
}

/// `{ "l": 3, "pmf": … }` with axes `X`, `X{}`, `X{1}`, ….
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PsiInput {
    pub l: usize,
    pub pmf: PmfJson,
}

/// An auxiliary scheme with an optional distortion measure and decoders.
/// Missing decoders are filled in pointwise-optimally.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeInput {
    #[serde(default)]
    pub family: Option<Family>,
    #[serde(default)]
    pub l: Option<usize>,
    pub pmf: PmfJson,
    #[serde(default)]
    pub distortion: Option<DistortionSpec>,
    #[serde(default)]
    pub recon_size: Option<usize>,
    #[serde(default)]
    pub decoders: BTreeMap<String, Decoder>,
}

impl SchemeInput {
    pub fn family(&self, flag: Option<Family>) -> Result<Family> {
        match (flag, self.family) {
            (Some(f), Some(g)) if f != g => Err(Error::Parse {
                path: "$.family".into(),
                message: format!("file declares {g}, command asks for {f}"),
            }),
            (Some(f), _) | (None, Some(f)) => Ok(f),
            (None, None) => Err(Error::Parse { path: "$.family".into(), message: "no family given".into() }),
        }
    }

    fn l(&self, family: Family) -> Result<usize> {
        match (family.fixed_l(), self.l) {
            (Some(f), Some(l)) if f != l => {
                Err(Error::Parse { path: "$.l".into(), message: format!("{family} needs l = {f}") })
            }
            (Some(f), _) => Ok(f),
            (None, Some(l)) => Ok(l),
            (None, None) => Err(Error::Parse { path: "$.l".into(), message: "missing field `l`".into() }),
        }
    }

    pub fn measure(&self, source: &Alphabet) -> Result<DistortionMeasure> {
        let spec = self.distortion.clone().unwrap_or(DistortionSpec::Named("hamming".into()));
        spec.resolve(source, self.recon_size.unwrap_or(source.size))
            .map_err(|e| Error::Parse { path: "$.distortion".into(), message: e.to_string() })
    }

    fn decoders(&self, l: usize) -> Result<BTreeMap<u32, Decoder>> {
        self.decoders
            .iter()
            .map(|(k, d)| {
                let m = parse_subset(k, l)
                    .map_err(|e| Error::Parse { path: format!("$.decoders.{k}"), message: e.to_string() })?;
                Ok((m, d.clone()))
            })
            .collect()
    }

    /// Scheme without decoder filling.
    pub fn bare_float(&self, family: Family) -> Result<AuxScheme<f64>> {
        self.build(family, float_pmf(&self.pmf, "pmf")?)
    }

    fn build<T: Prob>(&self, family: Family, joint: JointPmf<T>) -> Result<AuxScheme<T>> {
        let l = self.l(family)?;
        AuxScheme::padded(family, l, joint, self.decoders(l)?).map_err(|e| match e {
            Error::Decoder(m) => Error::Parse { path: "$.decoders".into(), message: m },
            Error::UnknownAxis(a) | Error::Scheme(a) => Error::Parse { path: "$.pmf.axes".into(), message: a },
            other => other,
        })
    }

    /// Float scheme with every missing decoder filled in.
    pub fn float_scheme(&self, family: Family) -> Result<(AuxScheme<f64>, DistortionMeasure)> {
        let joint = float_pmf(&self.pmf, "pmf")?;
        let s = self.build(family, joint)?;
        let d = self.measure(s.joint.axis("X").map_err(|e| under("pmf.axes", e))?)?;
        let mut full = s.clone().with_bayes_decoders(&d)?;
        for (k, dec) in &s.decoders {
            full.decoders.insert(*k, dec.clone());
        }
        Ok((full, d))
    }

    /// Exact scheme (entries must sum to one exactly in rational mode);
    /// decoders as in [`Self::float_scheme`].
    pub fn exact_scheme(&self, family: Family, rational: bool) -> Result<(AuxScheme<Rational>, DistortionMeasure, f64)> {
        let (fl, d) = self.float_scheme(family)?;
        if rational {
            let joint = exact_pmf(&self.pmf, "pmf")?;
            let s = self.build(family, joint)?;
            Ok((AuxScheme { decoders: fl.decoders, ..s }, d, 0.0))
        } else {
            let (s, err) = fl.snap()?;
            Ok((s, d, err))
        }
    }
}

/// `{ "inputs": [...], "outputs": [...], "rows": [[...], ...] }`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelInput {
    pub inputs: Vec<Alphabet>,
    pub outputs: Vec<Alphabet>,
    pub rows: Value,
}

impl ChannelInput {
    fn entries(&self, field: &str) -> Result<Vec<Rational>> {
        let n_in: usize = self.inputs.iter().map(|a| a.size).product();
        let n_out: usize = self.outputs.iter().map(|a| a.size).product();
        flatten_nested(&self.rows, &[n_in, n_out], &format!("$.{field}rows"))
    }

    pub fn exact(&self, field: &str) -> Result<Channel<Rational>> {
        Channel::new(self.inputs.clone(), self.outputs.clone(), self.entries(field)?)
            .map_err(|e| Error::Parse { path: format!("$.{field}rows"), message: e.to_string() })
    }

    pub fn float(&self, field: &str) -> Result<Channel<f64>> {
        let v = self.entries(field)?.iter().map(Prob::to_f64).collect();
        Channel::new(self.inputs.clone(), self.outputs.clone(), v)
            .map_err(|e| Error::Parse { path: format!("$.{field}rows"), message: e.to_string() })
    }
}

/// `{ "p_s": [...], "law": channel over inputs [X, S], "input": optional p(x|s) }`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateChannelInput {
    pub p_s: Vec<Value>,
    pub law: ChannelInput,
    #[serde(default)]
    pub input: Option<ChannelInput>,
}

impl StateChannelInput {
    pub fn channel(&self) -> Result<StateChannel> {
        let p_s = self
            .p_s
            .iter()
            .enumerate()
            .map(|(i, v)| mdrd_core::prob::json::entry_to_rational(v, &format!("$.p_s[{i}]")).map(|r| r.to_f64()))
            .collect::<Result<Vec<f64>>>()?;
        let law = self.law.float("law.")?;
        StateChannel::new(p_s, law).map_err(|e| Error::Parse { path: "$.law".into(), message: e.to_string() })
    }

    pub fn input_law(&self) -> Result<Option<Channel<f64>>> {
        self.input.as_ref().map(|c| c.float("input.")).transpose()
    }
}

/// `{ "pmf": single-axis source, "distortion": …, "recon_size": n }`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceInput {
    pub pmf: PmfJson,
    #[serde(default)]
    pub distortion: Option<DistortionSpec>,
    #[serde(default)]
    pub recon_size: Option<usize>,
}

impl SourceInput {
    pub fn resolve(&self) -> Result<(JointPmf<f64>, DistortionMeasure)> {
        let p = float_pmf(&self.pmf, "pmf")?;
        if p.axes().len() != 1 {
            return Err(Error::Parse { path: "$.pmf.axes".into(), message: "the source needs exactly one axis".into() });
        }
        let src = p.axes()[0].clone();
        let spec = self.distortion.clone().unwrap_or(DistortionSpec::Named("hamming".into()));
        let d = spec
            .resolve(&src, self.recon_size.unwrap_or(src.size))
            .map_err(|e| Error::Parse { path: "$.distortion".into(), message: e.to_string() })?;
        Ok((p, d))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_errors_name_the_path() {
        let e = parse::<FrlInput>(r#"{"pmf": {"axes": [{"name": "V", "size": "two"}], "values": []}, "v": [], "w": []}"#)
            .unwrap_err();
        match e {
            Error::Parse { path, .. } => assert_eq!(path, "$.pmf.axes[0].size"),
            other => panic!("{other:?}"),
        }
        let e = parse::<FrlInput>(r#"{"pmf": {"axes": [], "values": []}, "v": [], "w": [], "extra": 1}"#).unwrap_err();
        assert!(matches!(e, Error::Parse { .. }));
    }

    #[test]
    fn nested_pmf_paths_are_rerooted() {
        let f: FrlInput = parse(
            r#"{"pmf": {"axes": [{"name": "V", "size": 2}], "values": [0.5, "x"]}, "v": ["V"], "w": ["V"]}"#,
        )
        .unwrap();
        match exact_pmf(&f.pmf, "pmf").unwrap_err() {
            Error::Parse { path, .. } => assert_eq!(path, "$.pmf.values[1]"),
            other => panic!("{other:?}"),
        }
    }
}
