//! Stationarity diagnostics for an interaction matrix: ℓ1 norm, Gershgorin
//! discs and the spectral radius.
//!
//! Eigenvalues of a general real matrix come from Householder reduction to
//! upper Hessenberg form followed by Francis double-shift QR iteration (the
//! EISPACK `orthes`/`hqr` pair, eigenvalues only).

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Disc {
    pub center: f64,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GershgorinBounds {
    /// `min_i (b_ii - r_i)`
    pub lower: f64,
    /// `max_i (b_ii + r_i)`
    pub upper: f64,
    pub discs: Vec<Disc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    /// Maximum absolute column sum.
    pub l1_norm: f64,
    pub gershgorin_lower: f64,
    pub gershgorin_upper: f64,
    pub discs: Vec<Disc>,
    pub spectral_radius: f64,
    pub satisfies_l1: bool,
    pub satisfies_spectral: bool,
    /// Both Gershgorin bounds strictly inside (-1, 1).
    pub satisfies_gershgorin_bound: bool,
}

fn check_square(b: &Array2<f64>) -> Result<usize> {
    let (r, c) = b.dim();
    if r != c {
        return Err(Error::shape(format!("matrix is {r}x{c}, expected square")));
    }
    if b.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric("matrix has non-finite entries"));
    }
    Ok(r)
}

/// Gershgorin discs `D(b_ii, Σ_{j≠i} |b_ij|)` (row sums) and the resulting
/// eigenvalue bounds.
pub fn gershgorin_bounds(b: &Array2<f64>) -> Result<GershgorinBounds> {
    let n = check_square(b)?;
    let discs: Vec<Disc> = (0..n)
        .map(|i| Disc {
            center: b[[i, i]],
            radius: (0..n).filter(|&j| j != i).map(|j| b[[i, j]].abs()).sum(),
        })
        .collect();
    let lower = discs
        .iter()
        .map(|d| d.center - d.radius)
        .fold(f64::INFINITY, f64::min);
    let upper = discs
        .iter()
        .map(|d| d.center + d.radius)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(GershgorinBounds {
        lower,
        upper,
        discs,
    })
}

/// Maximum absolute column sum.
pub fn l1_norm(b: &Array2<f64>) -> Result<f64> {
    check_square(b)?;
    Ok(b.columns()
        .into_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max))
}

/// All eigenvalues of `b` as `(re, im)` pairs, in no particular order.
pub fn eigenvalues(b: &Array2<f64>) -> Result<Vec<(f64, f64)>> {
    let n = check_square(b)?;
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut h: Vec<Vec<f64>> = b.rows().into_iter().map(|r| r.to_vec()).collect();
    reduce_to_hessenberg(&mut h);
    hessenberg_qr(h)
}

/// Largest eigenvalue modulus.
pub fn spectral_radius(b: &Array2<f64>) -> Result<f64> {
    Ok(eigenvalues(b)?
        .into_iter()
        .map(|(re, im)| re.hypot(im))
        .fold(0.0, f64::max))
}

pub fn check_stationarity(b: &Array2<f64>) -> Result<StabilityReport> {
    let g = gershgorin_bounds(b)?;
    let l1 = l1_norm(b)?;
    let rho = spectral_radius(b)?;
    Ok(StabilityReport {
        l1_norm: l1,
        gershgorin_lower: g.lower,
        gershgorin_upper: g.upper,
        satisfies_l1: l1 < 1.0,
        satisfies_spectral: rho < 1.0,
        satisfies_gershgorin_bound: -1.0 < g.lower && g.upper < 1.0,
        discs: g.discs,
        spectral_radius: rho,
    })
}

/// Householder reduction to upper Hessenberg form, in place.
fn reduce_to_hessenberg(h: &mut [Vec<f64>]) {
    let n = h.len();
    if n < 3 {
        return;
    }
    let high = n - 1;
    let mut ort = vec![0.0; n];
    for m in 1..high {
        let scale: f64 = (m..=high).map(|i| h[i][m - 1].abs()).sum();
        if scale == 0.0 {
            continue;
        }
        let mut hh = 0.0;
        for i in (m..=high).rev() {
            ort[i] = h[i][m - 1] / scale;
            hh += ort[i] * ort[i];
        }
        let mut g = hh.sqrt();
        if ort[m] > 0.0 {
            g = -g;
        }
        hh -= ort[m] * g;
        ort[m] -= g;
        // H = (I - u u'/h) H (I - u u'/h)
        for j in m..n {
            let f = (m..=high).rev().map(|i| ort[i] * h[i][j]).sum::<f64>() / hh;
            for i in m..=high {
                h[i][j] -= f * ort[i];
            }
        }
        for row in h.iter_mut().take(high + 1) {
            let f = (m..=high).rev().map(|j| ort[j] * row[j]).sum::<f64>() / hh;
            for j in m..=high {
                row[j] -= f * ort[j];
            }
        }
        ort[m] *= scale;
        h[m][m - 1] = scale * g;
    }
}

/// Eigenvalues of an upper Hessenberg matrix by double-shift QR.
fn hessenberg_qr(mut h: Vec<Vec<f64>>) -> Result<Vec<(f64, f64)>> {
    let nn = h.len();
    let mut wr = vec![0.0; nn];
    let mut wi = vec![0.0; nn];
    let eps = f64::EPSILON;
    let max_total_iters = 100 * nn.max(1);
    let mut total_iters = 0usize;
    let mut exshift = 0.0;
    let (mut p, mut q, mut r) = (0.0f64, 0.0f64, 0.0f64);
    let (mut s, mut z, mut w, mut x, mut y);

    let mut norm = 0.0;
    for i in 0..nn {
        for j in i.saturating_sub(1)..nn {
            norm += h[i][j].abs();
        }
    }

    let mut n = nn as isize - 1;
    let low = 0isize;
    let mut iter = 0usize;
    while n >= low {
        let nu = n as usize;
        // Look for a single small sub-diagonal element.
        let mut l = n;
        while l > low {
            let lu = l as usize;
            s = h[lu - 1][lu - 1].abs() + h[lu][lu].abs();
            if s == 0.0 {
                s = norm;
            }
            if h[lu][lu - 1].abs() <= eps * s {
                break;
            }
            l -= 1;
        }

        if l == n {
            // One root found.
            wr[nu] = h[nu][nu] + exshift;
            wi[nu] = 0.0;
            n -= 1;
            iter = 0;
        } else if l == n - 1 {
            // Two roots found.
            w = h[nu][nu - 1] * h[nu - 1][nu];
            p = (h[nu - 1][nu - 1] - h[nu][nu]) / 2.0;
            q = p * p + w;
            z = q.abs().sqrt();
            x = h[nu][nu] + exshift;
            if q >= 0.0 {
                z = if p >= 0.0 { p + z } else { p - z };
                wr[nu - 1] = x + z;
                wr[nu] = if z != 0.0 { x - w / z } else { x + z };
                wi[nu - 1] = 0.0;
                wi[nu] = 0.0;
            } else {
                wr[nu - 1] = x + p;
                wr[nu] = x + p;
                wi[nu - 1] = z;
                wi[nu] = -z;
            }
            n -= 2;
            iter = 0;
        } else {
            x = h[nu][nu];
            y = 0.0;
            w = 0.0;
            if l < n {
                y = h[nu - 1][nu - 1];
                w = h[nu][nu - 1] * h[nu - 1][nu];
            }
            // Exceptional shifts.
            if iter == 10 {
                exshift += x;
                for (i, row) in h.iter_mut().enumerate().take(nu + 1) {
                    row[i] -= x;
                }
                s = h[nu][nu - 1].abs() + h[nu - 1][nu - 2].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            if iter == 30 {
                s = (y - x) / 2.0;
                s = s * s + w;
                if s > 0.0 {
                    s = s.sqrt();
                    if y < x {
                        s = -s;
                    }
                    s = x - w / ((y - x) / 2.0 + s);
                    for (i, row) in h.iter_mut().enumerate().take(nu + 1) {
                        row[i] -= s;
                    }
                    exshift += s;
                    x = 0.964;
                    y = x;
                    w = x;
                }
            }
            iter += 1;
            total_iters += 1;
            if total_iters > max_total_iters {
                return Err(Error::numeric(format!(
                    "QR eigenvalue iteration did not converge after {total_iters} iterations"
                )));
            }

            // Look for two consecutive small sub-diagonal elements.
            let mut m = n - 2;
            while m >= l {
                let mu = m as usize;
                z = h[mu][mu];
                r = x - z;
                s = y - z;
                p = (r * s - w) / h[mu + 1][mu] + h[mu][mu + 1];
                q = h[mu + 1][mu + 1] - z - r - s;
                r = h[mu + 2][mu + 1];
                s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                if h[mu][mu - 1].abs() * (q.abs() + r.abs())
                    < eps * (p.abs() * (h[mu - 1][mu - 1].abs() + z.abs() + h[mu + 1][mu + 1].abs()))
                {
                    break;
                }
                m -= 1;
            }
            let mu = m as usize;
            for i in mu + 2..=nu {
                h[i][i - 2] = 0.0;
                if i > mu + 2 {
                    h[i][i - 3] = 0.0;
                }
            }

            // Double QR step on rows l..=n and columns m..=n.
            let lu = l as usize;
            for k in mu..nu {
                let notlast = k != nu - 1;
                if k != mu {
                    p = h[k][k - 1];
                    q = h[k + 1][k - 1];
                    r = if notlast { h[k + 2][k - 1] } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x == 0.0 {
                        continue;
                    }
                    p /= x;
                    q /= x;
                    r /= x;
                }
                s = (p * p + q * q + r * r).sqrt();
                if p < 0.0 {
                    s = -s;
                }
                if s != 0.0 {
                    if k != mu {
                        h[k][k - 1] = -s * x;
                    } else if lu != mu {
                        h[k][k - 1] = -h[k][k - 1];
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    z = r / s;
                    q /= p;
                    r /= p;

                    for j in k..nn {
                        p = h[k][j] + q * h[k + 1][j];
                        if notlast {
                            p += r * h[k + 2][j];
                            h[k + 2][j] -= p * z;
                        }
                        h[k][j] -= p * x;
                        h[k + 1][j] -= p * y;
                    }
                    for row in h.iter_mut().take(nu.min(k + 3) + 1) {
                        p = x * row[k] + y * row[k + 1];
                        if notlast {
                            p += z * row[k + 2];
                            row[k + 2] -= p * r;
                        }
                        row[k] -= p;
                        row[k + 1] -= p * q;
                    }
                }
            }
        }
    }
    Ok(wr.into_iter().zip(wi).collect())
}
