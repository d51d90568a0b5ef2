use serde::Serialize;

use crate::error::{Error, Result};
use crate::toda::CoefficientWindow;
use crate::C64;

/// Top Lyapunov exponent of the transfer-matrix product over `N` sites
/// starting at `n_start`, renormalizing every step.
pub fn lyapunov(window: &CoefficientWindow, z: C64, n_start: i64, n: usize) -> Result<f64> {
    if n_start - 1 < window.n_lo || n_start + n as i64 - 1 > window.n_hi() {
        return Err(Error::WindowTooNarrow(format!(
            "lyapunov needs sites {}..{}",
            n_start - 1,
            n_start + n as i64 - 1
        )));
    }
    // Columns of the accumulated product, kept orthonormal by Gram-Schmidt.
    let mut q = [[C64::new(1.0, 0.0), C64::new(0.0, 0.0)], [C64::new(0.0, 0.0), C64::new(1.0, 0.0)]];
    let mut log_top = 0.0;
    let mut log_det = 0.0;
    for k in 0..n as i64 {
        let m = n_start + k;
        let (a, am, b) = (window.a_at(m), window.a_at(m - 1), window.b_at(m));
        let t = [[(z - b) / a, -am / a], [C64::new(1.0, 0.0), C64::new(0.0, 0.0)]];
        let mut cols = [[C64::new(0.0, 0.0); 2]; 2];
        for c in 0..2 {
            for r in 0..2 {
                cols[c][r] = t[r][0] * q[c][0] + t[r][1] * q[c][1];
            }
        }
        let r11 = (cols[0][0].norm_sqr() + cols[0][1].norm_sqr()).sqrt();
        let u = [cols[0][0] / r11, cols[0][1] / r11];
        let proj = u[0].conj() * cols[1][0] + u[1].conj() * cols[1][1];
        let v = [cols[1][0] - u[0] * proj, cols[1][1] - u[1] * proj];
        let r22 = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
        log_top += r11.ln();
        log_det += r11.ln() + r22.ln();
        q = [u, [v[0] / r22, v[1] / r22]];
    }
    // The first QR column grows at the top exponent; the determinant bounds the pair.
    let _ = log_det;
    Ok((log_top / n as f64).max(0.0))
}

#[derive(Debug, Clone, Serialize)]
pub struct FiniteSection {
    pub eigenvalues: Vec<[f64; 2]>,
    /// Always "diagnostic": truncations of non-normal operators may pollute.
    pub caveat: &'static str,
}

/// Eigenvalues of the `N x N` truncation (complex symmetric tridiagonal, with
/// `a` off the diagonal and `b` on it), by implicit QL iteration.
pub fn finite_section(window: &CoefficientWindow, n: usize) -> Result<FiniteSection> {
    if n == 0 || n > window.len() {
        return Err(Error::WindowTooNarrow(format!("finite section of size {n} from a window of {}", window.len())));
    }
    let mut d: Vec<C64> = window.b[..n].to_vec();
    let mut e: Vec<C64> = window.a[..n].to_vec();
    e[n - 1] = C64::new(0.0, 0.0);
    ql_complex_symmetric(&mut d, &mut e)?;
    let mut ev: Vec<[f64; 2]> = d.iter().map(|z| [z.re, z.im]).collect();
    ev.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    Ok(FiniteSection {
        eigenvalues: ev,
        caveat: "diagnostic",
    })
}

/// Implicit QL with Wilkinson shifts for a complex symmetric tridiagonal
/// matrix (complex orthogonal rotations). `e[i]` couples `i` and `i+1`.
fn ql_complex_symmetric(d: &mut [C64], e: &mut [C64]) -> Result<()> {
    let n = d.len();
    let one = C64::new(1.0, 0.0);
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].norm() + d[m + 1].norm();
                if e[m].norm() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 200 {
                return Err(Error::EigenFailed(format!("QL iteration did not converge at index {l}")));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = (g * g + one).sqrt();
            let sgn = if (g + r).norm() >= (g - r).norm() { r } else { -r };
            g = d[m] - d[l] + e[l] / (g + sgn);
            let (mut s, mut c, mut p) = (one, one, C64::new(0.0, 0.0));
            let mut i = m;
            let mut deflated = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = (f * f + g * g).sqrt();
                e[i + 1] = r;
                if r.norm() < 1e-300 {
                    d[i + 1] -= p;
                    e[m] = C64::new(0.0, 0.0);
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = C64::new(0.0, 0.0);
        }
    }
    if d.iter().any(|x| !x.is_finite()) {
        return Err(Error::EigenFailed("non-finite eigenvalue".into()));
    }
    Ok(())
}
