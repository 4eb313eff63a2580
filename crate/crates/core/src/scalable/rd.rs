//! Rate-distortion function by alternating minimization with a slope search.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::{Alphabet, Channel, DistortionMeasure, JointPmf};

/// One point of `R(D)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RdCurvePoint {
    /// Requested distortion.
    pub target: f64,
    /// Distortion of the returned test channel.
    pub distortion: f64,
    /// Bits per sample.
    pub rate: f64,
    pub test_channel: Channel<f64>,
    /// Set when the target was below the smallest reachable distortion and the
    /// lossless point was returned instead.
    pub clamped: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RdOptions {
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for RdOptions {
    fn default() -> Self {
        Self { max_iter: 200_000, tol: 1e-15 }
    }
}

/// Source pmf over the distortion measure's source axis.
pub fn source_pmf(source: &JointPmf<f64>, d: &DistortionMeasure) -> Result<Vec<f64>> {
    let m = source.marginalize(&[d.source().name.as_str()])?;
    if m.len() != d.source().size {
        return Err(Error::ShapeMismatch(format!(
            "source `{}` has {} symbols, distortion expects {}",
            d.source().name,
            m.len(),
            d.source().size
        )));
    }
    Ok(m.into_values())
}

struct Ba {
    q: Vec<f64>,
    rate: f64,
    distortion: f64,
}

/// Joint `p(x, s)` of the source with side information `s` known to both
/// ends, stored row-major in `x`. Plain coding uses `|S| = 1`.
#[derive(Debug, Clone)]
pub struct SideInfo {
    pub nx: usize,
    pub ns: usize,
    pub pxs: Vec<f64>,
}

impl SideInfo {
    pub fn none(px: &[f64]) -> Self {
        Self { nx: px.len(), ns: 1, pxs: px.to_vec() }
    }

    fn ps(&self) -> Vec<f64> {
        (0..self.ns).map(|s| (0..self.nx).map(|x| self.pxs[x * self.ns + s]).sum()).collect()
    }

    /// `Σ_s p(s) min_y E[d(X, y) | s]`: distortion at zero conditional rate, with its decoder.
    fn best_constants(&self, d: &DistortionMeasure) -> (Vec<usize>, f64) {
        let ny = d.recon().size;
        let mut total = 0.0;
        let best = (0..self.ns)
            .map(|s| {
                let (y, v) = (0..ny)
                    .map(|y| (y, (0..self.nx).map(|x| self.pxs[x * self.ns + s] * d.d(x, y)).sum::<f64>()))
                    .fold((0, f64::INFINITY), |b, c| if c.1 < b.1 { c } else { b });
                total += v;
                y
            })
            .collect();
        (best, total)
    }

    fn min_distortion(&self, d: &DistortionMeasure) -> f64 {
        let px: Vec<f64> = (0..self.nx).map(|x| self.pxs[x * self.ns..(x + 1) * self.ns].iter().sum()).collect();
        d.min_distortion(&px)
    }
}

/// Alternating minimization at slope `beta` from output law `r0` (`|S| × |Y|`);
/// `beta = ∞` restricts each row to its distortion-minimizing reconstructions.
/// Returns `q(y | x, s)` row-major in `(x, s)`.
fn blahut_arimoto(si: &SideInfo, d: &DistortionMeasure, beta: f64, r0: &[f64], opts: &RdOptions) -> Ba {
    let (nx, ns, ny) = (si.nx, si.ns, d.recon().size);
    let dmin: Vec<f64> = (0..nx)
        .map(|x| (0..ny).map(|y| d.d(x, y)).fold(f64::INFINITY, f64::min))
        .collect();
    let w: Vec<f64> = (0..nx * ny)
        .map(|i| {
            let (x, y) = (i / ny, i % ny);
            let excess = d.d(x, y) - dmin[x];
            if beta.is_infinite() {
                if excess <= 0.0 { 1.0 } else { 0.0 }
            } else {
                (-beta * excess).exp()
            }
        })
        .collect();
    let ps = si.ps();
    let mut r = r0.to_vec();
    let mut q = vec![0.0; nx * ns * ny];
    for _ in 0..opts.max_iter {
        for x in 0..nx {
            for s in 0..ns {
                let row = &mut q[(x * ns + s) * ny..(x * ns + s + 1) * ny];
                let mut z = 0.0;
                for y in 0..ny {
                    row[y] = r[s * ny + y] * w[x * ny + y];
                    z += row[y];
                }
                if z > 0.0 {
                    row.iter_mut().for_each(|v| *v /= z);
                } else {
                    // Output law misses every admissible symbol: restart the row.
                    let k: f64 = (0..ny).map(|y| w[x * ny + y]).sum();
                    (0..ny).for_each(|y| row[y] = w[x * ny + y] / k);
                }
            }
        }
        let mut next = vec![0.0; ns * ny];
        for x in 0..nx {
            for s in 0..ns {
                let pxs = si.pxs[x * ns + s];
                for y in 0..ny {
                    next[s * ny + y] += pxs * q[(x * ns + s) * ny + y];
                }
            }
        }
        for s in 0..ns {
            for y in 0..ny {
                next[s * ny + y] = if ps[s] > 0.0 { next[s * ny + y] / ps[s] } else { r0[s * ny + y] };
            }
        }
        let delta = r.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        r = next;
        if delta <= opts.tol {
            break;
        }
    }
    let mut rate = 0.0;
    let mut distortion = 0.0;
    for x in 0..nx {
        for s in 0..ns {
            for y in 0..ny {
                let qv = q[(x * ns + s) * ny + y];
                let v = si.pxs[x * ns + s] * qv;
                if v > 0.0 {
                    rate += v * (qv / r[s * ny + y]).log2();
                    distortion += v * d.d(x, y);
                }
            }
        }
    }
    Ba { q, rate: rate.max(0.0), distortion }
}

/// Point of the (conditional) rate-distortion curve reached by the slope search.
#[derive(Debug, Clone)]
pub struct SlopePoint {
    /// `q(y | x, s)`, row-major in `(x, s)`.
    pub q: Vec<f64>,
    pub rate: f64,
    pub distortion: f64,
    /// Slope parameter; `0` at zero rate and infinite at the lossless point.
    pub beta: f64,
    /// Target below the smallest reachable distortion.
    pub clamped: bool,
}

/// `min I(X; Y | S)` subject to `E d(X, Y) ≤ target`, starting every
/// alternating minimization from output law `r0`.
pub fn conditional_rd(
    si: &SideInfo,
    d: &DistortionMeasure,
    target: f64,
    r0: &[f64],
    opts: &RdOptions,
) -> Result<SlopePoint> {
    if !(target >= 0.0) || !target.is_finite() {
        return Err(Error::Domain(format!("distortion target {target} must be finite and ≥ 0")));
    }
    let (nx, ns, ny) = (si.nx, si.ns, d.recon().size);
    if r0.len() != ns * ny {
        return Err(Error::ShapeMismatch(format!("initial output law has {} entries, expected {}", r0.len(), ns * ny)));
    }
    let (best, dmax) = si.best_constants(d);
    if target >= dmax {
        let mut q = vec![0.0; nx * ns * ny];
        for x in 0..nx {
            for s in 0..ns {
                q[(x * ns + s) * ny + best[s]] = 1.0;
            }
        }
        return Ok(SlopePoint { q, rate: 0.0, distortion: dmax, beta: 0.0, clamped: false });
    }
    let dmin = si.min_distortion(d);
    let lossless = |clamped| {
        let ba = blahut_arimoto(si, d, f64::INFINITY, r0, opts);
        SlopePoint { q: ba.q, rate: ba.rate, distortion: ba.distortion, beta: f64::INFINITY, clamped }
    };
    if target < dmin - 1e-15 {
        return Ok(lossless(true));
    }
    if target <= dmin + 1e-13 {
        return Ok(lossless(false));
    }
    // D(beta) is nonincreasing; bracket the target.
    let mut lo = 0.0;
    let mut hi = 1.0;
    loop {
        if blahut_arimoto(si, d, hi, r0, opts).distortion <= target {
            break;
        }
        lo = hi;
        hi *= 2.0;
        if hi > 1e6 {
            return Ok(lossless(false));
        }
    }
    let mut ba = blahut_arimoto(si, d, hi, r0, opts);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let m = blahut_arimoto(si, d, mid, r0, opts);
        if m.distortion <= target {
            hi = mid;
            ba = m;
        } else {
            lo = mid;
        }
        if (ba.distortion - target).abs() < 1e-13 || hi - lo < 1e-13 * hi.max(1.0) {
            break;
        }
    }
    Ok(SlopePoint { q: ba.q, rate: ba.rate, distortion: ba.distortion, beta: hi, clamped: false })
}

fn channel(d: &DistortionMeasure, q: Vec<f64>) -> Result<Channel<f64>> {
    Channel::new(
        vec![d.source().clone()],
        vec![Alphabet { name: format!("{}_hat", d.source().name), ..d.recon().clone() }],
        q,
    )
}

/// `R(D)` for a finite source. Returns `R = 0` at or above the best constant
/// distortion and clamps to the lossless point below the smallest reachable one.
pub fn rd_function(source: &JointPmf<f64>, d: &DistortionMeasure, target: f64) -> Result<RdCurvePoint> {
    rd_function_with(source, d, target, &RdOptions::default())
}

pub fn rd_function_with(
    source: &JointPmf<f64>,
    d: &DistortionMeasure,
    target: f64,
    opts: &RdOptions,
) -> Result<RdCurvePoint> {
    let px = source_pmf(source, d)?;
    let ny = d.recon().size;
    let pt = conditional_rd(&SideInfo::none(&px), d, target, &vec![1.0 / ny as f64; ny], opts)?;
    Ok(RdCurvePoint {
        target,
        distortion: pt.distortion,
        rate: pt.rate,
        test_channel: channel(d, pt.q)?,
        clamped: pt.clamped,
    })
}
