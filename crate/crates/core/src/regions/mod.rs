//! Inner-bound regions described by auxiliary schemes, the transforms that
//! remove refinement layers, weighted-sum-rate evaluators and a random search.

pub mod eval;
pub mod search;
pub mod transform;
pub mod weighted;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polymatroid::{aux_name, greedy_vertex, members, min_weighted_sum, permutations, SubsetFn, SOURCE};
use crate::prob::{bayes_decoder, Decoder, DistortionMeasure, JointPmf, Prob, Rational, SNAP_MAX_DENOMINATOR};

pub use eval::{
    distortions, egc_point, egc_star_point, rate_bounds, region_bounds, vkg_constraints, zb_point,
};
pub use search::{optimize_weighted_sum, SearchBudget, SearchOutcome, SearchProblem, TraceRow};
pub use transform::{
    absorb_layer, egc_vertex_to_egc_star, eliminate_to_singletons, vkg_eliminate_top_layer, Absorbed,
    Elimination, EgcVertex,
};
pub use weighted::{ic_weighted_sum_rate, ih_hierarchical_sum_rate, ih_weighted_sum_rate};

/// Auxiliary structure of an inner bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    #[serde(rename = "egc-star")]
    EgcStar,
    #[serde(rename = "egc")]
    Egc,
    #[serde(rename = "zb")]
    Zb,
    #[serde(rename = "vkg")]
    Vkg,
    #[serde(rename = "vkg-star")]
    VkgStar,
}

impl Family {
    pub const ALL: [Family; 5] = [Family::EgcStar, Family::Egc, Family::Zb, Family::Vkg, Family::VkgStar];

    pub fn name(self) -> &'static str {
        match self {
            Family::EgcStar => "egc-star",
            Family::Egc => "egc",
            Family::Zb => "zb",
            Family::Vkg => "vkg",
            Family::VkgStar => "vkg-star",
        }
    }

    /// Two-description families fix `L`.
    pub fn fixed_l(self) -> Option<usize> {
        match self {
            Family::EgcStar | Family::Egc | Family::Zb => Some(2),
            Family::Vkg | Family::VkgStar => None,
        }
    }

    pub fn check_l(self, l: usize) -> Result<()> {
        match self.fixed_l() {
            Some(f) if f != l => Err(Error::Scheme(format!("{} needs L = {f}, got {l}", self.name()))),
            _ if l == 0 || l > crate::polymatroid::MAX_L_EXHAUSTIVE => Err(Error::TooManyDescriptions {
                got: l,
                limit: crate::polymatroid::MAX_L_EXHAUSTIVE,
            }),
            _ => Ok(()),
        }
    }

    /// Masks of the auxiliaries the family carries.
    pub fn aux_masks(self, l: usize) -> Vec<u32> {
        let full = (1u32 << l) - 1;
        match self {
            Family::EgcStar => vec![1, 2],
            Family::Egc => vec![1, 2, 3],
            Family::Zb => vec![0, 1, 2],
            Family::Vkg => (0..=full).collect(),
            Family::VkgStar => (0..full).collect(),
        }
    }

    /// Auxiliaries decoder `φ_K` may read.
    pub fn decoder_inputs(self, l: usize, k: u32) -> Vec<u32> {
        let carried = self.aux_masks(l);
        match self {
            Family::EgcStar => if k == 3 { vec![1, 2] } else { vec![k] },
            Family::Egc => if k == 3 { vec![1, 2, 3] } else { vec![k] },
            Family::Zb => if k == 3 { vec![0, 1, 2] } else { vec![0, k] },
            Family::Vkg | Family::VkgStar => carried.into_iter().filter(|a| a & !k == 0).collect(),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "egc-star" | "egc*" | "egc_star" | "egcstar" => Family::EgcStar,
            "egc" => Family::Egc,
            "zb" => Family::Zb,
            "vkg" => Family::Vkg,
            "vkg-star" | "vkg*" | "vkg_star" | "vkgstar" => Family::VkgStar,
            _ => return Err(Error::Scheme(format!("unknown family `{s}`"))),
        })
    }
}

/// Joint law of `X` and a family's auxiliaries, with decoders `φ_K`.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxScheme<T = f64> {
    pub family: Family,
    pub l: usize,
    pub joint: JointPmf<T>,
    pub decoders: BTreeMap<u32, Decoder>,
}

impl<T: Prob> AuxScheme<T> {
    /// Axes must be `X` plus exactly the family's auxiliaries.
    pub fn new(family: Family, l: usize, joint: JointPmf<T>, decoders: BTreeMap<u32, Decoder>) -> Result<Self> {
        family.check_l(l)?;
        joint.position(SOURCE)?;
        let masks = family.aux_masks(l);
        for &m in &masks {
            joint.position(&aux_name(m))?;
        }
        if joint.axes().len() != masks.len() + 1 {
            let extra: Vec<&str> = joint
                .axis_names()
                .into_iter()
                .filter(|n| *n != SOURCE && !masks.iter().any(|&m| aux_name(m) == *n))
                .collect();
            return Err(Error::Scheme(format!("axes {extra:?} do not belong to the {family} family")));
        }
        let s = Self { family, l, joint, decoders };
        for (&k, dec) in &s.decoders {
            s.check_decoder(k, dec)?;
        }
        Ok(s)
    }

    /// Adds constant axes for any of the family's auxiliaries missing from `joint`.
    pub fn padded(family: Family, l: usize, joint: JointPmf<T>, decoders: BTreeMap<u32, Decoder>) -> Result<Self> {
        let mut j = joint;
        for m in family.aux_masks(l) {
            let name = aux_name(m);
            if !j.has_axis(&name) {
                j = j.with_constant_axis(&name)?;
            }
        }
        Self::new(family, l, j, decoders)
    }

    fn check_decoder(&self, k: u32, dec: &Decoder) -> Result<()> {
        let full = (1u32 << self.l) - 1;
        if k == 0 || k & !full != 0 {
            return Err(Error::Decoder(format!("decoder index {k:#b} is not a nonempty subset of 1..={}", self.l)));
        }
        let allowed: Vec<String> = self.family.decoder_inputs(self.l, k).into_iter().map(aux_name).collect();
        for input in &dec.inputs {
            if !allowed.contains(input) {
                return Err(Error::Decoder(format!(
                    "decoder {} of the {} family may not read `{input}` (allowed: {allowed:?})",
                    aux_name(k),
                    self.family
                )));
            }
        }
        Ok(())
    }

    pub fn set_decoder(&mut self, k: u32, dec: Decoder) -> Result<()> {
        self.check_decoder(k, &dec)?;
        self.decoders.insert(k, dec);
        Ok(())
    }

    pub fn full(&self) -> u32 {
        (1u32 << self.l) - 1
    }

    pub fn to_float(&self) -> AuxScheme<f64> {
        AuxScheme { family: self.family, l: self.l, joint: self.joint.to_float(), decoders: self.decoders.clone() }
    }

    /// Same scheme read as another family whose auxiliaries are present or
    /// constant (for example EGC* as EGC with a constant `X{1,2}`).
    pub fn as_family(&self, family: Family) -> Result<AuxScheme<T>> {
        let mut j = self.joint.clone();
        let target = family.aux_masks(self.l);
        for name in self.joint.axis_names() {
            if name == SOURCE || target.iter().any(|&m| aux_name(m) == name) {
                continue;
            }
            if self.joint.axis(name)?.size != 1 {
                return Err(Error::WrongFamily { expected: family.name().into(), found: self.family.name().into() });
            }
            j = j.marginalize(&j.axis_names().into_iter().filter(|n| *n != name).collect::<Vec<_>>())?;
        }
        AuxScheme::padded(family, self.l, j, self.decoders.clone())
    }
}

impl AuxScheme<f64> {
    /// Pointwise-optimal decoders for every nonempty `K`.
    pub fn with_bayes_decoders(mut self, d: &DistortionMeasure) -> Result<Self> {
        for k in 1..=self.full() {
            let inputs: Vec<String> = self.family.decoder_inputs(self.l, k).into_iter().map(aux_name).collect();
            self.decoders.insert(k, bayes_decoder(&self.joint, d, &inputs)?);
        }
        Ok(self)
    }

    /// Exact copy with entries snapped to denominators ≤ 1e9; returns the snap error.
    pub fn snap(&self) -> Result<(AuxScheme<Rational>, f64)> {
        let (joint, err) = self.joint.snap(SNAP_MAX_DENOMINATOR)?;
        Ok((AuxScheme { family: self.family, l: self.l, joint, decoders: self.decoders.clone() }, err))
    }
}

/// Expects the family of `s` to be one of `allowed`.
pub(crate) fn expect_family<T>(s: &AuxScheme<T>, allowed: &[Family]) -> Result<()> {
    if allowed.contains(&s.family) {
        Ok(())
    } else {
        let expected: Vec<&str> = allowed.iter().map(|f| f.name()).collect();
        Err(Error::WrongFamily { expected: expected.join(" or "), found: s.family.name().into() })
    }
}

/// Rates per description and distortions per decoder subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RdPoint {
    pub rates: Vec<f64>,
    pub distortions: BTreeMap<u32, f64>,
}

/// `θ a + (1 − θ) b`.
pub fn timeshare(a: &RdPoint, b: &RdPoint, theta: f64) -> Result<RdPoint> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::Domain(format!("mixing weight {theta} outside [0, 1]")));
    }
    if a.rates.len() != b.rates.len() || a.distortions.keys().ne(b.distortions.keys()) {
        return Err(Error::ShapeMismatch("points describe different descriptions or decoders".into()));
    }
    Ok(RdPoint {
        rates: a.rates.iter().zip(&b.rates).map(|(x, y)| theta * x + (1.0 - theta) * y).collect(),
        distortions: a
            .distortions
            .iter()
            .map(|(k, x)| (*k, theta * x + (1.0 - theta) * b.distortions[k]))
            .collect(),
    })
}

/// Right-hand sides of the rate constraints `R_K ≥ bounds(K)` and the decoder
/// distortions of one scheme; a certificate for the polyhedron it spans.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionBounds {
    pub family: Family,
    pub bounds: SubsetFn,
    pub distortions: BTreeMap<u32, f64>,
}

impl RegionBounds {
    pub fn l(&self) -> usize {
        self.bounds.l
    }

    /// Corner of the rate polyhedron for the 1-based order `pi`.
    pub fn vertex(&self, pi: &[usize]) -> Result<RdPoint> {
        let v = greedy_vertex(&self.bounds, pi)?;
        Ok(RdPoint { rates: v.rates, distortions: self.distortions.clone() })
    }

    pub fn vertices(&self) -> Result<Vec<RdPoint>> {
        permutations(self.l()).iter().map(|pi| self.vertex(pi)).collect()
    }

    pub fn min_weighted_sum(&self, weights: &[f64]) -> Result<f64> {
        Ok(min_weighted_sum(&self.bounds, weights)?.0)
    }

    /// Whether `p` meets every rate and distortion constraint within `tol`.
    pub fn contains(&self, p: &RdPoint, tol: f64) -> bool {
        p.rates.len() == self.l()
            && (1..=self.bounds.full()).all(|k| {
                let r: f64 = members(k).iter().map(|&i| p.rates[i - 1]).sum();
                r >= self.bounds.get(k) - tol
            })
            && self.distortions.iter().all(|(k, d)| p.distortions.get(k).is_some_and(|t| *t >= d - tol))
    }

    /// Certificate of the time-shared scheme: bounds and distortions mix linearly.
    pub fn timeshare(&self, other: &RegionBounds, theta: f64) -> Result<RegionBounds> {
        if !(0.0..=1.0).contains(&theta) {
            return Err(Error::Domain(format!("mixing weight {theta} outside [0, 1]")));
        }
        if self.l() != other.l() || self.distortions.keys().ne(other.distortions.keys()) {
            return Err(Error::ShapeMismatch("certificates describe different problems".into()));
        }
        let values = self.bounds.values.iter().zip(&other.bounds.values).map(|(a, b)| theta * a + (1.0 - theta) * b);
        Ok(RegionBounds {
            family: self.family,
            bounds: SubsetFn::new(self.l(), values.collect())?,
            distortions: self
                .distortions
                .iter()
                .map(|(k, a)| (*k, theta * a + (1.0 - theta) * other.distortions[k]))
                .collect(),
        })
    }
}
