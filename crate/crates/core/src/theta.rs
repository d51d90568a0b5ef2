//! Riemann theta function `theta(z) = sum_n exp(2 pi i n.z + pi i n.tau n)`.
//!
//! Arguments are first reduced into the fundamental cell. The factor that
//! compensates the reduction is returned in logarithmic form so that callers
//! forming ratios never exponentiate large numbers.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::{C64, I};

#[derive(Debug, Clone)]
pub struct ThetaContext {
    p: usize,
    tau: DMatrix<C64>,
    im_tau: DMatrix<f64>,
    im_tau_inv: DMatrix<f64>,
    /// Truncation radius in the `Im tau` metric.
    pub truncation_radius: f64,
    pub tol_theta: f64,
    lattice: Vec<Vec<i64>>,
}

/// Theta value in split form: `theta(z) = exp(log_factor) * sum`.
#[derive(Debug, Clone)]
pub struct ThetaValue {
    pub log_factor: C64,
    pub sum: C64,
    /// Gradient of the reduced sum.
    pub grad_sum: Vec<C64>,
    /// Sum of moduli of the series terms, the natural scale of `sum`.
    pub scale: f64,
    /// Lattice shift `k` removed along `tau` during reduction.
    pub shift: Vec<i64>,
}

impl ThetaValue {
    pub fn ln(&self) -> C64 {
        self.log_factor + self.sum.ln()
    }

    pub fn value(&self) -> Result<C64> {
        let l = self.ln();
        if l.re > 700.0 {
            return Err(Error::Overflow { log_modulus: l.re });
        }
        Ok(l.exp())
    }

    /// `d/dz_j ln theta(z)`.
    pub fn dlog(&self, j: usize) -> C64 {
        -2.0 * PI * I * self.shift[j] as f64 + self.grad_sum[j] / self.sum
    }

    /// Gradient of `theta` itself.
    pub fn grad(&self) -> Result<Vec<C64>> {
        let v = self.value()?;
        Ok((0..self.grad_sum.len()).map(|j| v * self.dlog(j)).collect())
    }

    /// Relative distance from the theta divisor.
    pub fn divisor_ratio(&self) -> f64 {
        self.sum.norm() / self.scale
    }
}

fn bilinear(u: &[C64], m: &DMatrix<C64>, v: &[C64]) -> C64 {
    let mut s = C64::new(0.0, 0.0);
    for i in 0..u.len() {
        for j in 0..v.len() {
            s += u[i] * m[(i, j)] * v[j];
        }
    }
    s
}

impl ThetaContext {
    pub fn new(tau: &DMatrix<C64>, tol_theta: f64) -> Result<Self> {
        let p = tau.nrows();
        let im_tau = tau.map(|x| x.im);
        let im_sym = (&im_tau + im_tau.transpose()) * 0.5;
        if p > 0 {
            let eig = nalgebra::SymmetricEigen::new(im_sym.clone());
            if eig.eigenvalues.iter().any(|&l| l <= 0.0) {
                return Err(Error::InvalidConfig("Im tau is not positive definite".into()));
            }
        }
        let im_tau_inv = if p > 0 {
            im_sym.clone().try_inverse().ok_or_else(|| Error::InvalidConfig("Im tau singular".into()))?
        } else {
            im_sym.clone()
        };
        // Reduced offsets c lie in [-1/2, 1/2]^p, so ||c||_Y <= r0.
        let r0 = 0.5 * im_sym.iter().map(|x| x.abs()).sum::<f64>().sqrt();
        let r = (r0 * r0 + ((1.0 / tol_theta).ln() + 12.0 + 2.0 * p as f64) / PI).sqrt();
        let lattice = enumerate_ellipsoid(&im_sym, &im_tau_inv, r + r0);
        Ok(Self {
            p,
            tau: tau.clone(),
            im_tau: im_sym,
            im_tau_inv,
            truncation_radius: r,
            tol_theta,
            lattice,
        })
    }

    pub fn genus(&self) -> usize {
        self.p
    }

    pub fn tau(&self) -> &DMatrix<C64> {
        &self.tau
    }

    pub fn lattice_size(&self) -> usize {
        self.lattice.len()
    }

    /// Same context with the truncation radius enlarged by `extra`.
    pub fn with_extra_radius(&self, extra: f64) -> Self {
        let r0 = 0.5 * self.im_tau.iter().map(|x| x.abs()).sum::<f64>().sqrt();
        let mut out = self.clone();
        out.truncation_radius += extra;
        out.lattice = enumerate_ellipsoid(&self.im_tau, &self.im_tau_inv, out.truncation_radius + r0);
        out
    }

    /// Split `z = z_red + m + tau k` with `Im z_red` in the fundamental cell.
    fn reduce(&self, z: &[C64]) -> (Vec<C64>, Vec<i64>, C64) {
        let p = self.p;
        let im = DVector::from_iterator(p, z.iter().map(|x| x.im));
        let kf = &self.im_tau_inv * im;
        let k: Vec<i64> = kf.iter().map(|x| x.round() as i64).collect();
        let kc: Vec<C64> = k.iter().map(|&x| C64::new(x as f64, 0.0)).collect();
        let mut zp: Vec<C64> = z.to_vec();
        for i in 0..p {
            for j in 0..p {
                zp[i] -= self.tau[(i, j)] * kc[j];
            }
        }
        // theta(z' + tau k) = exp(-2 pi i k.z' - pi i k.tau k) theta(z').
        let kz: C64 = kc.iter().zip(&zp).map(|(a, b)| a * b).sum();
        let log_factor = -2.0 * PI * I * kz - PI * I * bilinear(&kc, &self.tau, &kc);
        let red: Vec<C64> = zp.iter().map(|x| C64::new(x.re - x.re.round(), x.im)).collect();
        (red, k, log_factor)
    }

    pub fn eval(&self, z: &[C64]) -> Result<ThetaValue> {
        assert_eq!(z.len(), self.p, "theta argument has wrong dimension");
        if self.p == 0 {
            return Ok(ThetaValue {
                log_factor: C64::new(0.0, 0.0),
                sum: C64::new(1.0, 0.0),
                grad_sum: vec![],
                scale: 1.0,
                shift: vec![],
            });
        }
        let (zr, shift, log_factor) = self.reduce(z);
        if !log_factor.is_finite() || log_factor.re.abs() > 1e300 {
            return Err(Error::Overflow { log_modulus: log_factor.re });
        }
        let p = self.p;
        let mut sum = C64::new(0.0, 0.0);
        let mut grad = vec![C64::new(0.0, 0.0); p];
        let mut scale = 0.0;
        let mut nz = vec![C64::new(0.0, 0.0); p];
        for n in &self.lattice {
            for (slot, &ni) in nz.iter_mut().zip(n) {
                *slot = C64::new(ni as f64, 0.0);
            }
            let lin: C64 = nz.iter().zip(&zr).map(|(a, b)| a * b).sum();
            let quad = bilinear(&nz, &self.tau, &nz);
            let term = (2.0 * PI * I * lin + PI * I * quad).exp();
            scale += term.norm();
            sum += term;
            for j in 0..p {
                grad[j] += 2.0 * PI * I * nz[j] * term;
            }
        }
        Ok(ThetaValue {
            log_factor,
            sum,
            grad_sum: grad,
            scale,
            shift,
        })
    }

    /// `sum_j c_j (d_j theta(z1)/theta(z1) - d_j theta(z2)/theta(z2))`.
    pub fn dirlog(&self, c: &[C64], z1: &[C64], z2: &[C64]) -> Result<C64> {
        let t1 = self.eval(z1)?;
        let t2 = self.eval(z2)?;
        self.check_off_divisor(&t1)?;
        self.check_off_divisor(&t2)?;
        Ok((0..self.p).map(|j| c[j] * (t1.dlog(j) - t2.dlog(j))).sum())
    }

    pub fn check_off_divisor(&self, t: &ThetaValue) -> Result<()> {
        let ratio = t.divisor_ratio();
        if ratio < self.tol_theta.sqrt() {
            Err(Error::OnThetaDivisor { ratio })
        } else {
            Ok(())
        }
    }
}

/// Integer vectors with `n^T Y n <= radius^2`, enumerated in a fixed order.
fn enumerate_ellipsoid(y: &DMatrix<f64>, y_inv: &DMatrix<f64>, radius: f64) -> Vec<Vec<i64>> {
    let p = y.nrows();
    if p == 0 {
        return vec![vec![]];
    }
    let bounds: Vec<i64> = (0..p).map(|i| (radius * y_inv[(i, i)].sqrt()).floor() as i64).collect();
    let mut out = Vec::new();
    let mut cur = vec![0i64; p];
    fn rec(i: usize, cur: &mut Vec<i64>, bounds: &[i64], y: &DMatrix<f64>, r2: f64, out: &mut Vec<Vec<i64>>) {
        if i == cur.len() {
            let mut q = 0.0;
            for a in 0..cur.len() {
                for b in 0..cur.len() {
                    q += cur[a] as f64 * y[(a, b)] * cur[b] as f64;
                }
            }
            if q <= r2 {
                out.push(cur.clone());
            }
            return;
        }
        for v in -bounds[i]..=bounds[i] {
            cur[i] = v;
            rec(i + 1, cur, bounds, y, r2, out);
        }
    }
    rec(0, &mut cur, &bounds, y, radius * radius, &mut out);
    out
}
