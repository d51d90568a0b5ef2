//! Quadrature on straight segments and closed parametrized loops.
//!
//! Segments that start or end at a branch point carry an inverse square-root
//! singularity. The substitution `z = a + (b - a) s^2` removes it, after which
//! Gauss-Legendre in `s` converges spectrally.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};
use crate::C64;

#[derive(Debug)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Gauss-Legendre rule on [-1, 1] with `n` nodes in increasing order (cached).
pub fn gauss_legendre(n: usize) -> Arc<GaussLegendre> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussLegendre>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(r) = cache.lock().expect("quadrature cache poisoned").get(&n) {
        return r.clone();
    }
    let rule = Arc::new(compute_gauss_legendre(n));
    cache.lock().expect("quadrature cache poisoned").insert(n, rule.clone());
    rule
}

fn compute_gauss_legendre(n: usize) -> GaussLegendre {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 {
                1.0
            } else if n == 1 {
                x
            } else {
                p1
            };
            let pn1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pn1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    GaussLegendre { nodes, weights }
}

const GL_LEVELS: [usize; 4] = [24, 48, 96, 192];
const MAX_SPLIT_DEPTH: u32 = 30;

/// Integrate the vector-valued integrand `f(z, out)` (values with respect to
/// `dz`) along the straight segment from `a` to `b`.
///
/// `sing_a` / `sing_b` flag an inverse square-root singularity at the
/// respective endpoint.
pub fn segment<F>(a: C64, b: C64, sing_a: bool, sing_b: bool, dim: usize, tol: f64, f: &mut F) -> Result<Vec<C64>>
where
    F: FnMut(C64, &mut [C64]),
{
    let mut acc = vec![C64::new(0.0, 0.0); dim];
    segment_into(a, b, sing_a, sing_b, tol, f, &mut acc, 0)?;
    Ok(acc)
}

fn segment_into<F>(a: C64, b: C64, sing_a: bool, sing_b: bool, tol: f64, f: &mut F, acc: &mut [C64], depth: u32) -> Result<()>
where
    F: FnMut(C64, &mut [C64]),
{
    if a == b {
        return Ok(());
    }
    if sing_a && sing_b {
        let m = (a + b) * 0.5;
        segment_into(a, m, true, false, tol, f, acc, depth)?;
        return segment_into(m, b, false, true, tol, f, acc, depth);
    }
    if sing_b {
        let mut tmp = vec![C64::new(0.0, 0.0); acc.len()];
        segment_into(b, a, true, false, tol, f, &mut tmp, depth)?;
        for (x, t) in acc.iter_mut().zip(tmp) {
            *x -= t;
        }
        return Ok(());
    }
    let dim = acc.len();
    let mut buf = vec![C64::new(0.0, 0.0); dim];
    let mut prev: Option<Vec<C64>> = None;
    for &n in GL_LEVELS.iter() {
        let rule = gauss_legendre(n);
        let mut sum = vec![C64::new(0.0, 0.0); dim];
        let mut abs_sum = 0.0f64;
        let mut cancel = 0.0f64;
        for (x, w) in rule.nodes.iter().zip(rule.weights.iter()) {
            let s = 0.5 * (x + 1.0);
            let (z, jac) = if sing_a {
                (a + (b - a) * (s * s), (b - a) * (2.0 * s))
            } else {
                (a + (b - a) * s, b - a)
            };
            f(z, &mut buf);
            let wj = jac * (0.5 * w);
            // Near a singular endpoint `z - a` is known only to about eps |a|,
            // which amplifies rounding by |a| / |z - a|.
            let amp = if sing_a { a.norm() / (z - a).norm().max(f64::MIN_POSITIVE) } else { 0.0 };
            for (acc_k, v) in sum.iter_mut().zip(buf.iter()) {
                *acc_k += v * wj;
                abs_sum = abs_sum.max((v * wj).norm());
                cancel += (v * wj).norm() * amp;
            }
        }
        if sum.iter().any(|x| !(x.re.is_finite() && x.im.is_finite())) {
            return Err(Error::QuadratureFailed(format!("non-finite integrand on segment {a} -> {b}")));
        }
        if let Some(p) = prev.as_ref() {
            let diff = sum.iter().zip(p).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
            let mag = sum.iter().map(|x| x.norm()).fold(0.0, f64::max);
            // Rounding in the integrand sets a floor below which refinement is futile.
            // The cancellation allowance only applies once a segment has
            // failed at full size, so well-behaved segments keep the strict test.
            let cancel_weight = if depth > 0 { 1e2 } else { 0.0 };
            let floor = f64::EPSILON * (1e3 * abs_sum * n as f64 + cancel_weight * cancel);
            if diff <= (tol * mag.max(1.0)).max(floor) {
                for (x, s) in acc.iter_mut().zip(sum) {
                    *x += s;
                }
                return Ok(());
            }
        }
        prev = Some(sum);
    }
    if depth >= MAX_SPLIT_DEPTH {
        return Err(Error::QuadratureFailed(format!("segment {a} -> {b} did not converge")));
    }
    // The singular substitution stays on the half touching the branch point.
    let m = (a + b) * 0.5;
    segment_into(a, m, sing_a, false, tol, f, acc, depth + 1)?;
    segment_into(m, b, false, false, tol, f, acc, depth + 1)
}

/// Integrate along a polyline. The first node may be a branch point
/// (`sing_start`), and likewise the last node (`sing_end`).
pub fn polyline<F>(nodes: &[C64], sing_start: bool, sing_end: bool, dim: usize, tol: f64, f: &mut F) -> Result<Vec<C64>>
where
    F: FnMut(C64, &mut [C64]),
{
    let mut acc = vec![C64::new(0.0, 0.0); dim];
    let last = nodes.len().saturating_sub(1);
    for k in 0..last {
        segment_into(nodes[k], nodes[k + 1], sing_start && k == 0, sing_end && k + 1 == last, tol, f, &mut acc, 0)?;
    }
    Ok(acc)
}

/// Trapezoidal rule on a closed loop `theta -> (z, dz/dtheta)` over [0, 2 pi),
/// doubling the node count until successive results agree to `tol`.
pub fn closed_loop<P, F>(param: P, dim: usize, tol: f64, f: &mut F) -> Result<Vec<C64>>
where
    P: Fn(f64) -> (C64, C64),
    F: FnMut(C64, &mut [C64]),
{
    let mut buf = vec![C64::new(0.0, 0.0); dim];
    let mut sums = vec![C64::new(0.0, 0.0); dim];
    let mut add_nodes = |sums: &mut [C64], n: usize, stride: usize, offset: usize| {
        let mut k = offset;
        while k < n {
            let t = 2.0 * PI * k as f64 / n as f64;
            let (z, dz) = param(t);
            f(z, &mut buf);
            for (s, v) in sums.iter_mut().zip(buf.iter()) {
                *s += v * dz;
            }
            k += stride;
        }
    };
    let mut n = 64usize;
    add_nodes(&mut sums, n, 1, 0);
    let mut prev: Vec<C64> = sums.iter().map(|s| s * (2.0 * PI / n as f64)).collect();
    while n < (1 << 18) {
        n *= 2;
        add_nodes(&mut sums, n, 2, 1);
        let cur: Vec<C64> = sums.iter().map(|s| s * (2.0 * PI / n as f64)).collect();
        let diff = cur.iter().zip(&prev).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        let mag = cur.iter().map(|x| x.norm()).fold(0.0, f64::max);
        if diff <= tol * mag.max(1.0) {
            return Ok(cur);
        }
        prev = cur;
    }
    Err(Error::QuadratureFailed("closed loop trapezoid did not converge".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_rule_integrates_polynomials_exactly() {
        let rule = gauss_legendre(10);
        for k in 0..20 {
            let q: f64 = rule.nodes.iter().zip(&rule.weights).map(|(x, w)| w * x.powi(k)).sum();
            let exact = if k % 2 == 1 { 0.0 } else { 2.0 / (k as f64 + 1.0) };
            assert!((q - exact).abs() < 1e-14, "k={k}: {q} vs {exact}");
        }
        assert!(rule.nodes.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn inverse_sqrt_endpoint_singularities() {
        // Integral of 1/sqrt(1 - x^2) over [-1, 1] equals pi.
        let mut f = |z: C64, out: &mut [C64]| out[0] = ((1.0 - z) * (1.0 + z)).sqrt().inv();
        let v = segment(C64::new(-1.0, 0.0), C64::new(1.0, 0.0), true, true, 1, 1e-14, &mut f).unwrap();
        assert!((v[0] - PI).norm() < 1e-13, "{}", v[0]);
    }

    #[test]
    fn loop_residue() {
        let mut f = |z: C64, out: &mut [C64]| out[0] = (z - C64::new(0.1, 0.2)).inv();
        let v = closed_loop(|t| (C64::from_polar(1.0, t), C64::from_polar(1.0, t) * C64::new(0.0, 1.0)), 1, 1e-14, &mut f).unwrap();
        assert!((v[0] - C64::new(0.0, 2.0 * PI)).norm() < 1e-12);
    }

    #[test]
    fn polyline_of_exponential() {
        let nodes = [C64::new(0.0, 0.0), C64::new(1.0, 1.0), C64::new(2.0, -0.5)];
        let mut f = |z: C64, out: &mut [C64]| out[0] = z.exp();
        let v = polyline(&nodes, false, false, 1, 1e-14, &mut f).unwrap();
        assert!((v[0] - (nodes[2].exp() - 1.0)).norm() < 1e-12);
    }
}
