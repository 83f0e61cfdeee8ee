//! Procrustes matching of latent positions across posterior samples.
//!
//! The projection likelihood depends on `Z` only through `Z Zᵀ`, so it is
//! invariant to rotations and reflections of the latent space but not to
//! translations. Alignment therefore uses orthogonal transforms only, with no
//! centring or scaling.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hmc::Chain;
use crate::posterior::BlockKind;

pub type Orthogonal = [[f64; 2]; 2];

pub const IDENTITY: Orthogonal = [[1.0, 0.0], [0.0, 1.0]];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Procrustes {
    /// `O` minimising `Σ_i ‖y_i − Oᵀ x_i‖²`.
    pub rotation: Orthogonal,
    /// The minimised sum of squares.
    pub r2: f64,
    /// `XᵀY` vanished, so every `O` is optimal; the identity is returned.
    pub degenerate: bool,
}

/// Rows of `x` mapped by `O`: `x_i ↦ Oᵀ x_i`, i.e. the matrix product `X O`.
pub fn apply(x: &[[f64; 2]], o: &Orthogonal) -> Vec<[f64; 2]> {
    x.iter()
        .map(|r| {
            [
                r[0] * o[0][0] + r[1] * o[1][0],
                r[0] * o[0][1] + r[1] * o[1][1],
            ]
        })
        .collect()
}

fn sum_sq_diff(a: &[[f64; 2]], b: &[[f64; 2]]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(p, q)| (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2))
        .sum()
}

/// Orthogonal Procrustes fit of `x` onto `y` (rotations and reflections).
///
/// Maximises `tr(Oᵀ M)` with `M = XᵀY` in closed form: over rotations the
/// optimum is `M`'s rotation part, over reflections its reflection part, and
/// the larger of the two attainable traces wins.
pub fn procrustes_rotation(x: &[[f64; 2]], y: &[[f64; 2]]) -> Result<Procrustes> {
    if x.len() != y.len() {
        return Err(Error::shape(format!(
            "configurations have {} and {} rows",
            x.len(),
            y.len()
        )));
    }
    let mut m = [[0.0; 2]; 2];
    for (a, b) in x.iter().zip(y) {
        for r in 0..2 {
            for c in 0..2 {
                m[r][c] += a[r] * b[c];
            }
        }
    }
    let (rc, rs) = (m[0][0] + m[1][1], m[1][0] - m[0][1]);
    let (fc, fs) = (m[0][0] - m[1][1], m[0][1] + m[1][0]);
    let rot_norm = rc.hypot(rs);
    let ref_norm = fc.hypot(fs);
    let (rotation, degenerate) = if rot_norm == 0.0 && ref_norm == 0.0 {
        (IDENTITY, true)
    } else if rot_norm >= ref_norm {
        let (c, s) = (rc / rot_norm, rs / rot_norm);
        ([[c, -s], [s, c]], false)
    } else {
        let (c, s) = (fc / ref_norm, fs / ref_norm);
        ([[c, s], [s, -c]], false)
    };
    let r2 = sum_sq_diff(&apply(x, &rotation), y);
    Ok(Procrustes {
        rotation,
        r2,
        degenerate,
    })
}

/// Target configuration for [`align_chain`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlignReference {
    /// Latent positions of the chain's own sample at this index.
    Sample(usize),
    /// External positions, e.g. a MAP fit or the true configuration.
    Positions(Vec<[f64; 2]>),
}

fn latent_of(theta: &[f64], range: &std::ops::Range<usize>) -> Vec<[f64; 2]> {
    theta[range.clone()]
        .chunks_exact(2)
        .map(|c| [c[0], c[1]])
        .collect()
}

/// Rotates every sample's latent block onto the reference by its own optimal
/// orthogonal transform. Other blocks and the log-posteriors are untouched,
/// since the posterior is invariant under the transform.
pub fn align_chain(chain: &Chain, reference: &AlignReference) -> Result<Chain> {
    if chain.is_empty() {
        return Err(Error::Precondition("cannot align an empty chain".into()));
    }
    let range = chain.layout.range(BlockKind::Latent);
    if range.is_empty() {
        return Err(Error::Precondition(
            "chain has no latent positions to align (full-matrix model)".into(),
        ));
    }
    let target = match reference {
        AlignReference::Sample(idx) => {
            let s = chain.samples.get(*idx).ok_or_else(|| {
                Error::Index(format!("reference sample {idx} of {}", chain.len()))
            })?;
            latent_of(s, &range)
        }
        AlignReference::Positions(z) => {
            if z.len() * 2 != range.len() {
                return Err(Error::shape(format!(
                    "reference has {} positions, chain has {} nodes",
                    z.len(),
                    range.len() / 2
                )));
            }
            z.clone()
        }
    };
    let samples = chain
        .samples
        .par_iter()
        .map(|theta| {
            let z = latent_of(theta, &range);
            let fit = procrustes_rotation(&z, &target)?;
            let rotated = apply(&z, &fit.rotation);
            let mut out = theta.clone();
            for (k, p) in rotated.iter().enumerate() {
                out[range.start + 2 * k] = p[0];
                out[range.start + 2 * k + 1] = p[1];
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Chain {
        samples,
        aligned: true,
        ..chain.clone()
    })
}

/// Posterior summary of latent positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentSummary {
    pub mean: Vec<[f64; 2]>,
    pub sd: Vec<[f64; 2]>,
    /// Central credible interval bounds per coordinate.
    pub lower: Vec<[f64; 2]>,
    pub upper: Vec<[f64; 2]>,
    pub level: f64,
}

/// Means, standard deviations and central credible intervals of the latent
/// coordinates. Refuses unaligned chains: their samples live in arbitrary
/// rotations of the latent space, so coordinate-wise averages are meaningless.
pub fn latent_summary(chain: &Chain, level: f64) -> Result<LatentSummary> {
    if !chain.aligned {
        return Err(Error::Refused(
            "latent positions are only identified up to rotation and reflection; \
             align the chain before summarising them"
                .into(),
        ));
    }
    if chain.is_empty() {
        return Err(Error::Precondition("chain has no samples".into()));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Precondition(format!("level must lie in (0, 1), got {level}")));
    }
    let range = chain.layout.range(BlockKind::Latent);
    let n = range.len() / 2;
    let k = chain.len() as f64;
    let mut summary = LatentSummary {
        mean: vec![[0.0; 2]; n],
        sd: vec![[0.0; 2]; n],
        lower: vec![[0.0; 2]; n],
        upper: vec![[0.0; 2]; n],
        level,
    };
    let tail = (1.0 - level) / 2.0;
    for node in 0..n {
        for d in 0..2 {
            let idx = range.start + 2 * node + d;
            let mut v: Vec<f64> = chain.samples.iter().map(|s| s[idx]).collect();
            let mean = v.iter().sum::<f64>() / k;
            let var = if v.len() > 1 {
                v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0)
            } else {
                0.0
            };
            v.sort_by(f64::total_cmp);
            summary.mean[node][d] = mean;
            summary.sd[node][d] = var.sqrt();
            summary.lower[node][d] = empirical_quantile(&v, tail);
            summary.upper[node][d] = empirical_quantile(&v, 1.0 - tail);
        }
    }
    Ok(summary)
}

/// Inverse empirical CDF of sorted data: the smallest value whose empirical
/// CDF reaches `p`.
pub fn empirical_quantile<T: Copy>(sorted: &[T], p: f64) -> T {
    let n = sorted.len();
    let k = ((p * n as f64).ceil() as usize).clamp(1, n);
    sorted[k - 1]
}
