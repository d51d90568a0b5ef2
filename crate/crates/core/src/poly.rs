//! Dense complex polynomials stored with ascending coefficients.

use crate::error::{Error, Result};
use crate::C64;

/// Horner evaluation of `c[0] + c[1] z + ...`.
pub fn eval(c: &[C64], z: C64) -> C64 {
    c.iter().rev().fold(C64::new(0.0, 0.0), |acc, &k| acc * z + k)
}

/// Value and first derivative together.
pub fn eval_with_derivative(c: &[C64], z: C64) -> (C64, C64) {
    let mut p = C64::new(0.0, 0.0);
    let mut dp = C64::new(0.0, 0.0);
    for &k in c.iter().rev() {
        dp = dp * z + p;
        p = p * z + k;
    }
    (p, dp)
}

pub fn mul(a: &[C64], b: &[C64]) -> Vec<C64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![C64::new(0.0, 0.0); a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

pub fn add(a: &[C64], b: &[C64]) -> Vec<C64> {
    let n = a.len().max(b.len());
    (0..n)
        .map(|i| a.get(i).copied().unwrap_or_default() + b.get(i).copied().unwrap_or_default())
        .collect()
}

pub fn scale(a: &[C64], s: C64) -> Vec<C64> {
    a.iter().map(|&x| x * s).collect()
}

/// Monic polynomial with the given roots.
pub fn from_roots(roots: &[C64]) -> Vec<C64> {
    roots.iter().fold(vec![C64::new(1.0, 0.0)], |acc, &r| mul(&acc, &[-r, C64::new(1.0, 0.0)]))
}

/// All roots of a polynomial by the Aberth-Ehrlich simultaneous iteration,
/// followed by a few Newton polishing steps on the undeflated polynomial.
pub fn roots(c: &[C64]) -> Result<Vec<C64>> {
    let mut deg = c.len();
    while deg > 0 && c[deg - 1] == C64::new(0.0, 0.0) {
        deg -= 1;
    }
    if deg == 0 {
        return Err(Error::RootFindFailed("zero polynomial".into()));
    }
    let n = deg - 1;
    if n == 0 {
        return Ok(Vec::new());
    }
    let lead = c[n];
    let p: Vec<C64> = c[..=n].iter().map(|&x| x / lead).collect();
    if n == 1 {
        return Ok(vec![-p[0]]);
    }
    // Cauchy bound gives the radius of the initial circle.
    let radius = 1.0 + p[..n].iter().map(|x| x.norm()).fold(0.0, f64::max);
    let init_r = radius.min(p[..n].iter().enumerate().map(|(k, x)| x.norm().powf(1.0 / (n - k) as f64)).fold(0.0, f64::max) * 2.0 + 1e-3);
    let mut z: Vec<C64> = (0..n)
        .map(|k| C64::from_polar(init_r, 2.0 * std::f64::consts::PI * (k as f64 + 0.25) / n as f64 + 0.4))
        .collect();
    let scale_c: f64 = p.iter().map(|x| x.norm()).sum();
    let mut converged = false;
    for _ in 0..500 {
        let mut max_step = 0.0f64;
        for i in 0..n {
            let (f, df) = eval_with_derivative(&p, z[i]);
            if f.norm() == 0.0 {
                continue;
            }
            let ratio = f / df;
            let mut s = C64::new(0.0, 0.0);
            for j in 0..n {
                if j != i {
                    s += C64::new(1.0, 0.0) / (z[i] - z[j]);
                }
            }
            let step = ratio / (C64::new(1.0, 0.0) - ratio * s);
            if step.is_finite() {
                z[i] -= step;
                max_step = max_step.max(step.norm() / (1.0 + z[i].norm()));
            }
        }
        if max_step < 1e-15 {
            converged = true;
            break;
        }
    }
    for zi in z.iter_mut() {
        for _ in 0..3 {
            let (f, df) = eval_with_derivative(&p, *zi);
            if df.norm() == 0.0 {
                break;
            }
            let step = f / df;
            if !step.is_finite() || step.norm() > 1e-6 * (1.0 + zi.norm()) {
                break;
            }
            *zi -= step;
        }
    }
    let worst = z
        .iter()
        .map(|&r| eval(&p, r).norm() / (scale_c * (1.0 + r.norm()).powi(n as i32)))
        .fold(0.0, f64::max);
    if !converged && worst > 1e-10 {
        return Err(Error::RootFindFailed(format!("Aberth iteration stalled, residual {worst:e}")));
    }
    z.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    Ok(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn horner_matches_direct_sum() {
        let c = [C64::new(1.0, 0.5), C64::new(-2.0, 0.0), C64::new(0.0, 3.0)];
        let z = C64::new(0.3, -0.7);
        let direct = c[0] + c[1] * z + c[2] * z * z;
        assert!((eval(&c, z) - direct).norm() < 1e-14);
        let (_, d) = eval_with_derivative(&c, z);
        assert!((d - (c[1] + 2.0 * c[2] * z)).norm() < 1e-14);
    }

    #[test]
    fn roots_of_quadratic() {
        let r = roots(&[C64::new(-1.0, 0.0), C64::new(0.0, 0.0), C64::new(1.0, 0.0)]).unwrap();
        assert!((r[0] + 1.0).norm() < 1e-14 && (r[1] - 1.0).norm() < 1e-14);
    }

    #[test]
    fn double_root_is_found_approximately() {
        let c = from_roots(&[C64::new(0.5, 0.5), C64::new(0.5, 0.5), C64::new(-1.0, 0.0)]);
        let r = roots(&c).unwrap();
        assert!((r[0] + 1.0).norm() < 1e-12);
        assert!((r[1] - C64::new(0.5, 0.5)).norm() < 1e-6);
    }

    proptest! {
        #[test]
        fn roundtrip_from_roots(v in proptest::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 1..7)) {
            let rs: Vec<C64> = v.iter().map(|&(a, b)| C64::new(a, b)).collect();
            let mut sep = f64::INFINITY;
            for i in 0..rs.len() { for j in 0..i { sep = sep.min((rs[i]-rs[j]).norm()); } }
            prop_assume!(sep > 1e-2);
            let found = roots(&from_roots(&rs)).unwrap();
            for r in &rs {
                let d = found.iter().map(|f| (f - r).norm()).fold(f64::INFINITY, f64::min);
                prop_assert!(d < 1e-9, "missing root {r} (closest {d:e})");
            }
        }
    }
}
