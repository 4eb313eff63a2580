//! Rate-constraint right-hand sides and decoder distortions per family.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::polymatroid::{aux_name, PsiCalc, SubsetFn, SOURCE};
use crate::prob::{expected_distortion, DistortionMeasure, InfoCalc, JointPmf};

use super::{expect_family, AuxScheme, Family, RegionBounds};

/// The distortion measure with its source axis renamed to `X`.
pub(crate) fn on_source(d: &DistortionMeasure) -> Result<DistortionMeasure> {
    if d.source().name == SOURCE {
        return Ok(d.clone());
    }
    DistortionMeasure::new(d.source().renamed(SOURCE), d.recon().clone(), d.rows())
}

/// `R_K ≥ f(K)` for every nonempty `K`.
pub fn rate_bounds(s: &AuxScheme<f64>) -> Result<SubsetFn> {
    let j = &s.joint;
    let mut c = InfoCalc::new(j);
    let x = c.mask(&[SOURCE])?;
    let m = |c: &InfoCalc, a: u32| c.mask(&[aux_name(a)]);
    match s.family {
        Family::EgcStar | Family::Egc => {
            let (a, b) = (m(&c, 1)?, m(&c, 2)?);
            let top = if s.family == Family::Egc { m(&c, 3)? } else { 0 };
            let f1 = c.mi(x, a, 0);
            let f2 = c.mi(x, b, 0);
            let f12 = c.mi(x, a | b | top, 0) + c.mi(a, b, 0);
            SubsetFn::new(2, vec![0.0, f1, f2, f12])
        }
        Family::Zb => {
            let (e, a, b) = (m(&c, 0)?, m(&c, 1)?, m(&c, 2)?);
            let common = c.mi(x, e, 0);
            let f1 = c.mi(x, e | a, 0);
            let f2 = c.mi(x, e | b, 0);
            let f12 = 2.0 * common + c.mi(x, a | b, e) + c.mi(a, b, e);
            SubsetFn::new(2, vec![0.0, f1, f2, f12])
        }
        Family::Vkg => PsiCalc::new(j, s.l).map(|mut p| SubsetFn::from_fn(s.l, |k| p.psi(k))),
        Family::VkgStar => {
            let padded = j.with_constant_axis(&aux_name(s.full()))?;
            PsiCalc::new(&padded, s.l).map(|mut p| SubsetFn::from_fn(s.l, |k| p.psi(k)))
        }
    }
}

/// Distortion of every decoder present, or of each `K` in `required`
/// (missing decoders are then an error).
pub fn distortions(s: &AuxScheme<f64>, d: &DistortionMeasure, required: Option<&[u32]>) -> Result<BTreeMap<u32, f64>> {
    let d = on_source(d)?;
    let keys: Vec<u32> = match required {
        Some(ks) => ks.to_vec(),
        None => s.decoders.keys().copied().collect(),
    };
    keys.into_iter()
        .map(|k| {
            let dec = s
                .decoders
                .get(&k)
                .ok_or_else(|| Error::Decoder(format!("missing decoder for {}", aux_name(k))))?;
            Ok((k, expected_distortion(&s.joint, &d, dec)?))
        })
        .collect()
}

fn all_subsets(l: usize) -> Vec<u32> {
    (1..1u32 << l).collect()
}

fn point(s: &AuxScheme<f64>, d: &DistortionMeasure, allowed: &[Family]) -> Result<RegionBounds> {
    expect_family(s, allowed)?;
    Ok(RegionBounds {
        family: s.family,
        bounds: rate_bounds(s)?,
        distortions: distortions(s, d, Some(&all_subsets(s.l)))?,
    })
}

/// `R_k ≥ I(X;X{k})`, `R_1 + R_2 ≥ I(X;X{1},X{2}) + I(X{1};X{2})` and the three decoder distortions.
pub fn egc_star_point(s: &AuxScheme<f64>, d: &DistortionMeasure) -> Result<RegionBounds> {
    point(s, d, &[Family::EgcStar])
}

/// As the EGC* point with `X{1,2}` joining the sum-rate term (alternative form decoders).
pub fn egc_point(s: &AuxScheme<f64>, d: &DistortionMeasure) -> Result<RegionBounds> {
    point(s, d, &[Family::Egc])
}

/// `R_k ≥ I(X;X{},X{k})`, `R_1 + R_2 ≥ 2I(X;X{}) + I(X;X{1},X{2}|X{}) + I(X{1};X{2}|X{})`.
pub fn zb_point(s: &AuxScheme<f64>, d: &DistortionMeasure) -> Result<RegionBounds> {
    point(s, d, &[Family::Zb])
}

/// ψ on every subset plus `E d(X, φ_K(X_(2^K)))` for every `K`.
pub fn vkg_constraints(s: &AuxScheme<f64>, d: &DistortionMeasure) -> Result<RegionBounds> {
    point(s, d, &[Family::Vkg, Family::VkgStar])
}

/// Bounds for any family; distortions for the decoders present.
pub fn region_bounds(s: &AuxScheme<f64>, d: &DistortionMeasure) -> Result<RegionBounds> {
    Ok(RegionBounds { family: s.family, bounds: rate_bounds(s)?, distortions: distortions(s, d, None)? })
}

/// Full VKG joint for `L = 2` built from a family scheme, with constant axes
/// for the auxiliaries the family lacks.
pub fn as_vkg(s: &AuxScheme<f64>) -> Result<JointPmf<f64>> {
    let mut j = s.joint.clone();
    for m in 0..=s.full() {
        if !j.has_axis(&aux_name(m)) {
            j = j.with_constant_axis(&aux_name(m))?;
        }
    }
    Ok(j)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::{Alphabet, Decoder};
    use crate::regions::search::random_joint;
    use crate::optim::restart_rng;

    fn bit(n: &str) -> Alphabet {
        Alphabet::new(n, 2).unwrap()
    }

    fn ham() -> DistortionMeasure {
        DistortionMeasure::hamming(bit("X"), bit("Xhat"))
    }

    #[test]
    fn constant_auxiliaries() {
        let x = JointPmf::uniform(vec![bit("X")]).unwrap();
        let s = AuxScheme::padded(Family::EgcStar, 2, x.clone(), Default::default())
            .unwrap()
            .with_bayes_decoders(&ham())
            .unwrap();
        let p = egc_star_point(&s, &ham()).unwrap();
        assert!(p.bounds.values.iter().all(|v| v.abs() < 1e-12));
        assert!(p.distortions.values().all(|v| (v - 0.5).abs() < 1e-12));
        for f in [Family::Egc, Family::Zb, Family::Vkg, Family::VkgStar] {
            let s = AuxScheme::padded(f, 2, x.clone(), Default::default()).unwrap();
            assert!(rate_bounds(&s).unwrap().values.iter().all(|v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn lossless_first_description() {
        let j = JointPmf::from_fn(vec![bit("X"), bit("X{1}")], |i| if i[0] == i[1] { 0.5 } else { 0.0 }).unwrap();
        let mut s = AuxScheme::padded(Family::EgcStar, 2, j, Default::default()).unwrap();
        s.set_decoder(1, Decoder::identity("X{1}", 2)).unwrap();
        s = s.with_bayes_decoders(&ham()).unwrap();
        let p = egc_star_point(&s, &ham()).unwrap();
        assert!((p.bounds.get(1) - 1.0).abs() < 1e-12);
        assert!((p.bounds.get(3) - 1.0).abs() < 1e-12);
        assert_eq!(p.distortions[&1], 0.0);
    }

    #[test]
    fn decoder_inputs_are_checked() {
        let x = JointPmf::uniform(vec![bit("X")]).unwrap();
        let mut s = AuxScheme::padded(Family::EgcStar, 2, x, Default::default()).unwrap();
        assert!(s.set_decoder(1, Decoder::identity("X{2}", 1)).is_err());
        let mut z = s.as_family(Family::Zb).unwrap();
        assert!(z.set_decoder(1, Decoder::new(vec!["X{}".into(), "X{1}".into()], vec![1, 1], vec![0]).unwrap()).is_ok());
        assert!(matches!(egc_point(&s, &ham()), Err(Error::WrongFamily { .. })));
    }

    #[test]
    fn reductions_match_definitions() {
        for t in 0..100u64 {
            let mut rng = restart_rng(11, t);
            let j = random_joint(&mut rng, 2, &[(0, 2), (1, 2), (2, 2), (3, 2)]);
            let vkg = AuxScheme::new(Family::Vkg, 2, j.clone(), Default::default()).unwrap();
            let psi = rate_bounds(&vkg).unwrap();
            // X{} constant: EGC; X{1,2} constant: ZB; both: EGC*.
            let drop = |names: &[&str]| {
                let keep: Vec<&str> = j.axis_names().into_iter().filter(|n| !names.contains(n)).collect();
                let mut m = j.marginalize(&keep).unwrap();
                for n in names {
                    m = m.with_constant_axis(n).unwrap();
                }
                m
            };
            let cases = [
                (&["X{}"][..], Family::Egc),
                (&["X{1,2}"][..], Family::Zb),
                (&["X{}", "X{1,2}"][..], Family::EgcStar),
            ];
            for (names, fam) in cases {
                let m = drop(names);
                let v = rate_bounds(&AuxScheme::new(Family::Vkg, 2, m.clone(), Default::default()).unwrap()).unwrap();
                let reduced = AuxScheme::new(Family::Vkg, 2, m, Default::default()).unwrap().as_family(fam).unwrap();
                let f = rate_bounds(&reduced).unwrap();
                for k in 1..4 {
                    assert!((v.get(k) - f.get(k)).abs() < 1e-10, "{fam} K={k}: {} vs {}", v.get(k), f.get(k));
                }
            }
            assert!(psi.get(3) >= psi.get(1) - 1e-12);
        }
    }

    #[test]
    fn zb_with_constant_common_layer_is_egc_star() {
        for t in 0..20u64 {
            let mut rng = restart_rng(3, t);
            let j = random_joint(&mut rng, 2, &[(1, 2), (2, 3)]);
            let e = AuxScheme::padded(Family::EgcStar, 2, j.clone(), Default::default())
                .unwrap()
                .with_bayes_decoders(&ham())
                .unwrap();
            let z = e.as_family(Family::Zb).unwrap();
            let pe = egc_star_point(&e, &ham()).unwrap();
            let pz = zb_point(&z, &ham()).unwrap();
            assert_eq!(pe.distortions, pz.distortions);
            for k in 1..4 {
                assert!((pe.bounds.get(k) - pz.bounds.get(k)).abs() < 1e-12);
            }
            let g = e.as_family(Family::Egc).unwrap();
            let pg = egc_point(&g, &ham()).unwrap();
            assert_eq!(pe.bounds.values.len(), pg.bounds.values.len());
            for k in 1..4 {
                assert!((pe.bounds.get(k) - pg.bounds.get(k)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn timesharing_mixes_certificates() {
        let x = JointPmf::uniform(vec![bit("X")]).unwrap();
        let zero = AuxScheme::padded(Family::EgcStar, 2, x, Default::default())
            .unwrap()
            .with_bayes_decoders(&ham())
            .unwrap();
        let j = JointPmf::from_fn(vec![bit("X"), bit("X{1}"), bit("X{2}")], |i| {
            if i[0] == i[1] && i[1] == i[2] { 0.5 } else { 0.0 }
        })
        .unwrap();
        let full = AuxScheme::new(Family::EgcStar, 2, j, Default::default()).unwrap().with_bayes_decoders(&ham()).unwrap();
        let a = egc_star_point(&zero, &ham()).unwrap();
        let b = egc_star_point(&full, &ham()).unwrap();
        let m = a.timeshare(&b, 0.25).unwrap();
        assert!((m.bounds.get(1) - 0.75).abs() < 1e-12);
        assert!((m.distortions[&3] - 0.125).abs() < 1e-12);
        let va = a.vertex(&[1, 2]).unwrap();
        let vb = b.vertex(&[1, 2]).unwrap();
        let p = crate::regions::timeshare(&va, &vb, 0.25).unwrap();
        assert!(m.contains(&p, 1e-12));
        assert!(!a.contains(&p, 1e-12));
    }
}
