//! Stationary Toda hierarchy: the f/g recursion, the polynomials `F_p` and
//! `G_{p+1}`, curve recovery, Dirichlet data and trace formulas.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly;
use crate::C64;

/// Coefficients `a(n), b(n)` for `n = n_lo ..= n_hi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientWindow {
    pub n_lo: i64,
    pub a: Vec<C64>,
    pub b: Vec<C64>,
}

impl CoefficientWindow {
    pub fn new(n_lo: i64, a: Vec<C64>, b: Vec<C64>) -> Result<Self> {
        if a.len() != b.len() || a.is_empty() {
            return Err(Error::InvalidConfig("a and b must be nonempty and of equal length".into()));
        }
        if let Some(k) = a.iter().position(|x| x.norm() == 0.0 || !x.is_finite()) {
            return Err(Error::ZeroA { site: n_lo + k as i64 });
        }
        if let Some(k) = b.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidConfig(format!("b({}) is not finite", n_lo + k as i64)));
        }
        Ok(Self { n_lo, a, b })
    }

    /// Constant coefficients on `len` sites.
    pub fn constant(n_lo: i64, len: usize, a: C64, b: C64) -> Result<Self> {
        Self::new(n_lo, vec![a; len], vec![b; len])
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    pub fn n_hi(&self) -> i64 {
        self.n_lo + self.a.len() as i64 - 1
    }

    pub fn contains(&self, n: i64) -> bool {
        n >= self.n_lo && n <= self.n_hi()
    }

    pub fn a_at(&self, n: i64) -> C64 {
        self.a[(n - self.n_lo) as usize]
    }

    pub fn b_at(&self, n: i64) -> C64 {
        self.b[(n - self.n_lo) as usize]
    }

    /// `(L^j)_{row, n}` from the window, treating sites outside as absent.
    pub fn l_power_entry(&self, j: usize, row: i64, n: i64) -> C64 {
        let (lo, hi) = (self.n_lo, self.n_hi());
        let mut v = vec![C64::new(0.0, 0.0); self.len()];
        if !self.contains(n) {
            return C64::new(0.0, 0.0);
        }
        v[(n - lo) as usize] = C64::new(1.0, 0.0);
        for _ in 0..j {
            let mut w = vec![C64::new(0.0, 0.0); self.len()];
            for m in lo..=hi {
                let i = (m - lo) as usize;
                let mut s = self.b_at(m) * v[i];
                if m < hi {
                    s += self.a_at(m) * v[i + 1];
                }
                if m > lo {
                    s += self.a_at(m - 1) * v[i - 1];
                }
                w[i] = s;
            }
            v = w;
        }
        if self.contains(row) {
            v[(row - lo) as usize]
        } else {
            C64::new(0.0, 0.0)
        }
    }
}

/// `c_k`, `k = 1..=p`, as the coefficients of `z^{-k}` in
/// `prod_m (1 - E_m / z)^{1/2}`.
pub fn ck_from_e(branch_points: &[C64]) -> Vec<C64> {
    let p = branch_points.len() / 2 - 1;
    let mut acc = vec![C64::new(0.0, 0.0); p + 1];
    acc[0] = C64::new(1.0, 0.0);
    for &e in branch_points {
        // (1 - x)^{1/2} = -sum_j (2j)! / (4^j (j!)^2 (2j - 1)) x^j.
        let mut factor = vec![C64::new(0.0, 0.0); p + 1];
        let mut binom = 1.0f64;
        let mut ej = C64::new(1.0, 0.0);
        for (j, slot) in factor.iter_mut().enumerate() {
            *slot = -ej * (binom / (2.0 * j as f64 - 1.0));
            binom *= (2 * j + 1) as f64 / (2 * j + 2) as f64;
            ej *= e;
        }
        let mut next = vec![C64::new(0.0, 0.0); p + 1];
        for i in 0..=p {
            for k in 0..=p - i {
                next[i + k] += acc[i] * factor[k];
            }
        }
        acc = next;
    }
    acc[1..].to_vec()
}

/// Tables `f_j(n), g_j(n)` for `j = 0..=p+1` (and their homogeneous parts).
#[derive(Debug, Clone, Serialize)]
pub struct HierarchyTable {
    pub p: usize,
    pub n_lo: i64,
    /// Inclusive site range on which level `j` is defined.
    pub range: Vec<(i64, i64)>,
    pub f: Vec<Vec<C64>>,
    pub g: Vec<Vec<C64>>,
    pub f_hat: Vec<Vec<C64>>,
    pub g_hat: Vec<Vec<C64>>,
    pub c: Vec<C64>,
}

impl HierarchyTable {
    fn idx(&self, n: i64) -> usize {
        (n - self.n_lo) as usize
    }

    pub fn f_at(&self, j: usize, n: i64) -> C64 {
        debug_assert!(n >= self.range[j].0 && n <= self.range[j].1);
        self.f[j][self.idx(n)]
    }

    pub fn g_at(&self, j: usize, n: i64) -> C64 {
        debug_assert!(n >= self.range[j].0 && n <= self.range[j].1);
        self.g[j][self.idx(n)]
    }
}

/// Run the recursion. Each `g_hat_{j+1}` is obtained by telescoping its first
/// differences from the left end of its range, with the starting value taken
/// from `g_hat_{j+1}(n) = -2 a(n) (L^{j+1})_{n+1,n}`; `f_hat_j = (L^j)_{n,n}`
/// then follows from the recursion.
pub fn hierarchy(window: &CoefficientWindow, c: &[C64], p: usize) -> Result<HierarchyTable> {
    let len = window.len();
    if len < 2 * (p + 1) + 3 {
        return Err(Error::WindowTooNarrow(format!(
            "need at least {} sites for p = {p}, got {len}",
            2 * (p + 1) + 3
        )));
    }
    let levels = p + 2;
    let (lo0, hi0) = (window.n_lo, window.n_hi());
    let zero = C64::new(0.0, 0.0);
    let mut f_hat = vec![vec![zero; len]; levels];
    let mut g_hat = vec![vec![zero; len]; levels];
    let mut range = vec![(lo0, hi0); levels];
    let ix = |n: i64| (n - lo0) as usize;
    f_hat[0].iter_mut().for_each(|x| *x = C64::new(1.0, 0.0));
    for j in 0..levels - 1 {
        let (lo, hi) = range[j];
        let (nlo, nhi) = (lo + 1, hi - 1);
        range[j + 1] = (nlo, nhi);
        for n in nlo..=nhi {
            f_hat[j + 1][ix(n)] = window.b_at(n) * f_hat[j][ix(n)] - (g_hat[j][ix(n)] + g_hat[j][ix(n - 1)]) * 0.5;
        }
        g_hat[j + 1][ix(nlo)] = -2.0 * window.a_at(nlo) * window.l_power_entry(j + 1, nlo + 1, nlo);
        for n in nlo + 1..=nhi {
            let a2 = window.a_at(n).powi(2);
            let am2 = window.a_at(n - 1).powi(2);
            let d = -2.0 * (a2 * f_hat[j][ix(n + 1)] - am2 * f_hat[j][ix(n - 1)]) + window.b_at(n) * (g_hat[j][ix(n)] - g_hat[j][ix(n - 1)]);
            g_hat[j + 1][ix(n)] = g_hat[j + 1][ix(n - 1)] + d;
        }
    }
    let ck = |k: usize| -> C64 {
        if k == 0 {
            C64::new(1.0, 0.0)
        } else if k <= c.len() {
            c[k - 1]
        } else {
            zero
        }
    };
    let mut f = vec![vec![zero; len]; levels];
    let mut g = vec![vec![zero; len]; levels];
    for j in 0..levels {
        let (lo, hi) = range[j];
        for n in lo..=hi {
            let i = ix(n);
            f[j][i] = (0..=j).map(|k| ck(j - k) * f_hat[k][i]).sum();
            g[j][i] = (1..=j).map(|k| ck(j - k) * g_hat[k][i]).sum::<C64>() - ck(j + 1);
        }
    }
    Ok(HierarchyTable {
        p,
        n_lo: lo0,
        range,
        f,
        g,
        f_hat,
        g_hat,
        c: c.to_vec(),
    })
}

/// `(sup |f_{p+1}^+ - f_{p+1}|, sup |g_{p+1} - g_{p+1}^-|)` over interior sites.
pub fn stationary_residual(window: &CoefficientWindow, c: &[C64], p: usize) -> Result<(f64, f64)> {
    let t = hierarchy(window, c, p)?;
    let (lo, hi) = t.range[p + 1];
    let mut rf = 0.0f64;
    let mut rg = 0.0f64;
    for n in lo..hi {
        rf = rf.max((t.f_at(p + 1, n + 1) - t.f_at(p + 1, n)).norm());
        rg = rg.max((t.g_at(p + 1, n + 1) - t.g_at(p + 1, n)).norm());
    }
    Ok((rf, rg))
}

/// Per-site coefficients of `F_p` (monic, degree p) and `G_{p+1}` (leading -1).
#[derive(Debug, Clone, Serialize)]
pub struct SpectralPolys {
    pub p: usize,
    /// First site; site `k` of the lists is `n_first + k`.
    pub n_first: i64,
    pub f: Vec<Vec<C64>>,
    pub g: Vec<Vec<C64>>,
    pub a: Vec<C64>,
    pub b: Vec<C64>,
    /// Shift applied to the constant term of `G_{p+1}` by the anchoring fit.
    pub anchor_shift: C64,
    pub anchor_residual: f64,
}

impl SpectralPolys {
    pub fn n_last(&self) -> i64 {
        self.n_first + self.f.len() as i64 - 1
    }

    pub fn contains(&self, n: i64) -> bool {
        n >= self.n_first && n <= self.n_last()
    }

    fn k(&self, n: i64) -> usize {
        assert!(self.contains(n), "site {n} outside polynomial range");
        (n - self.n_first) as usize
    }

    pub fn f_poly(&self, n: i64) -> &[C64] {
        &self.f[self.k(n)]
    }

    pub fn g_poly(&self, n: i64) -> &[C64] {
        &self.g[self.k(n)]
    }

    pub fn a_at(&self, n: i64) -> C64 {
        self.a[self.k(n)]
    }

    pub fn b_at(&self, n: i64) -> C64 {
        self.b[self.k(n)]
    }

    pub fn eval_f(&self, z: C64, n: i64) -> C64 {
        poly::eval(self.f_poly(n), z)
    }

    pub fn eval_g(&self, z: C64, n: i64) -> C64 {
        poly::eval(self.g_poly(n), z)
    }

    /// `G_{p+1}(z,n)^2 - 4 a(n)^2 F_p(z,n) F_p(z,n+1)` as a polynomial.
    pub fn r_at(&self, n: i64) -> Vec<C64> {
        let g2 = poly::mul(self.g_poly(n), self.g_poly(n));
        let ff = poly::mul(self.f_poly(n), self.f_poly(n + 1));
        poly::add(&g2, &poly::scale(&ff, -4.0 * self.a_at(n).powi(2)))
    }
}

fn raw_polys(window: &CoefficientWindow, t: &HierarchyTable) -> SpectralPolys {
    let p = t.p;
    let (lo, hi) = t.range[p + 1];
    let mut f = Vec::new();
    let mut g = Vec::new();
    for n in lo..=hi {
        let fp: Vec<C64> = (0..=p).map(|k| t.f_at(p - k, n)).collect();
        let mut gp = vec![C64::new(0.0, 0.0); p + 2];
        gp[p + 1] = C64::new(-1.0, 0.0);
        for k in 1..=p {
            gp[k] = t.g_at(p - k, n);
        }
        gp[0] = t.g_at(p, n) + t.f_at(p + 1, n);
        f.push(fp);
        g.push(gp);
    }
    SpectralPolys {
        p,
        n_first: lo,
        f,
        g,
        a: (lo..=hi).map(|n| window.a_at(n)).collect(),
        b: (lo..=hi).map(|n| window.b_at(n)).collect(),
        anchor_shift: C64::new(0.0, 0.0),
        anchor_residual: 0.0,
    }
}

/// Assemble `F_p`, `G_{p+1}` and fit the free constant of `G_{p+1}` so that
/// `G^2 - 4a^2 F F^+` agrees at the two leftmost sites on `2p+2` sample points.
pub fn build_polys(window: &CoefficientWindow, table: &HierarchyTable, tol_alg: f64) -> Result<SpectralPolys> {
    let mut polys = raw_polys(window, table);
    let p = polys.p;
    if polys.f.len() < 3 {
        return Err(Error::WindowTooNarrow("fewer than three sites carry level p+1".into()));
    }
    let (n0, n1) = (polys.n_first, polys.n_first + 1);
    let scale = 1.0 + window.a.iter().chain(&window.b).map(|x| x.norm()).fold(0.0, f64::max);
    let samples: Vec<C64> = (0..2 * p + 2)
        .map(|k| C64::from_polar(scale * 1.3, 0.4 + 2.0 * std::f64::consts::PI * k as f64 / (2 * p + 2) as f64))
        .collect();
    // (G0 + d)^2 - (G1 + d)^2 - 4 a0^2 F0 F1 + 4 a1^2 F1 F2 = 0 is linear in d.
    let mut num = C64::new(0.0, 0.0);
    let mut den = 0.0f64;
    let mut rows = Vec::new();
    for &z in &samples {
        let (g0, g1) = (polys.eval_g(z, n0), polys.eval_g(z, n1));
        let r0 = g0 * g0 - 4.0 * polys.a_at(n0).powi(2) * polys.eval_f(z, n0) * polys.eval_f(z, n1);
        let r1 = g1 * g1 - 4.0 * polys.a_at(n1).powi(2) * polys.eval_f(z, n1) * polys.eval_f(z, n1 + 1);
        let coef = 2.0 * (g0 - g1);
        let rhs = r0 - r1;
        num += coef.conj() * (-rhs);
        den += coef.norm_sqr();
        rows.push((coef, rhs, r0.norm()));
    }
    let delta = if den > 1e-24 * scale.powi(2 * (p as i32 + 1)) {
        num / den
    } else {
        C64::new(0.0, 0.0)
    };
    let residual = rows.iter().map(|(c, r, mag)| (c * delta + r).norm() / (1.0 + mag)).fold(0.0, f64::max);
    if residual > tol_alg {
        return Err(Error::AnchorInconsistent { residual });
    }
    for g in polys.g.iter_mut() {
        g[0] += delta;
    }
    polys.anchor_shift = delta;
    polys.anchor_residual = residual;
    Ok(polys)
}

#[derive(Debug, Clone, Serialize)]
pub struct RecoveredCurve {
    /// Ascending coefficients of `R`, degree `2p+2`.
    pub coeffs: Vec<C64>,
    pub roots: Vec<C64>,
    /// Max relative coefficient deviation across sites.
    pub deviation: f64,
}

pub fn recover_curve(polys: &SpectralPolys, tol_alg: f64) -> Result<RecoveredCurve> {
    let n0 = polys.n_first;
    let reference = polys.r_at(n0);
    let mag = reference.iter().map(|x| x.norm()).fold(1.0, f64::max);
    let mut deviation = 0.0f64;
    for n in n0 + 1..polys.n_last() {
        let r = polys.r_at(n);
        for (x, y) in r.iter().zip(&reference) {
            deviation = deviation.max((x - y).norm() / mag);
        }
    }
    if deviation > tol_alg {
        return Err(Error::NotStationary { deviation });
    }
    let roots = poly::roots(&reference)?;
    Ok(RecoveredCurve {
        coeffs: reference,
        roots,
        deviation,
    })
}

/// Relative variation of `R(z)` across sites at the given sample points.
pub fn lattice_constancy(polys: &SpectralPolys, zs: &[C64], sites: std::ops::RangeInclusive<i64>) -> f64 {
    let mut worst = 0.0f64;
    for &z in zs {
        let vals: Vec<C64> = sites.clone().map(|n| poly::eval(&polys.r_at(n), z)).collect();
        let mag = vals.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for v in &vals {
            worst = worst.max((v - vals[0]).norm() / mag.max(f64::MIN_POSITIVE));
        }
    }
    worst
}

/// Dirichlet data at one site.
#[derive(Debug, Clone, Serialize)]
pub struct DivisorAtSite {
    pub n: i64,
    pub mu: Vec<C64>,
    /// `-G_{p+1}(mu_j, n)`.
    pub y_hat: Vec<C64>,
    /// Max of `|R(mu) - G(mu)^2| / (1 + |R(mu)|)` with `R` from the same site.
    pub residual: f64,
}

pub fn dirichlet(polys: &SpectralPolys, n: i64) -> Result<DivisorAtSite> {
    if !polys.contains(n) || !polys.contains(n + 1) {
        return Err(Error::WindowTooNarrow(format!("site {n} lacks neighbours for Dirichlet data")));
    }
    let f = polys.f_poly(n);
    let mu = if polys.p == 0 { vec![] } else { poly::roots(f)? };
    let r = polys.r_at(n);
    let tol_root = 1e-10 * (1.0 + f.iter().map(|x| x.norm()).fold(0.0, f64::max));
    let mut residual = 0.0f64;
    let mut y_hat = Vec::with_capacity(mu.len());
    for &m in &mu {
        if poly::eval(f, m).norm() > tol_root * (1.0 + m.norm().powi(polys.p as i32)) {
            return Err(Error::RootFindFailed(format!("F_p root at site {n} not converged")));
        }
        let g = polys.eval_g(m, n);
        let rm = poly::eval(&r, m);
        residual = residual.max((rm - g * g).norm() / (1.0 + rm.norm()));
        y_hat.push(-g);
    }
    Ok(DivisorAtSite { n, mu, y_hat, residual })
}

/// `b(n) - ((1/2) sum E - sum mu_j(n))`.
pub fn trace_b_residual(branch_points: &[C64], b: C64, mu: &[C64]) -> C64 {
    let half: C64 = branch_points.iter().sum::<C64>() * 0.5;
    b - (half - mu.iter().sum::<C64>())
}

/// Right-hand side of the trace formula for `a(n)^2` with lifted points
/// `(mu_j, y_j)`; `None` when two `mu_j` coincide to relative `1e-6`.
pub fn trace_a2(branch_points: &[C64], b: C64, mu: &[C64], y: &[C64]) -> Option<C64> {
    let scale = 1.0 + branch_points.iter().map(|e| e.norm()).fold(0.0, f64::max);
    for j in 0..mu.len() {
        for k in 0..j {
            if (mu[j] - mu[k]).norm() < 1e-6 * scale {
                return None;
            }
        }
    }
    let mut s = C64::new(0.0, 0.0);
    for j in 0..mu.len() {
        let mut prod = C64::new(1.0, 0.0);
        for k in 0..mu.len() {
            if k != j {
                prod *= mu[j] - mu[k];
            }
        }
        s += y[j] / prod;
    }
    let b2: C64 = branch_points.iter().map(|e| e * e).sum::<C64>() * 0.5 - mu.iter().map(|m| m * m).sum::<C64>();
    Some(s * 0.5 + (b2 - b * b) * 0.25)
}
