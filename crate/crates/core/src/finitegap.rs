//! Theta-function synthesis of finite-gap coefficients `a(n), b(n)` from a
//! curve and an initial Dirichlet divisor, plus the Baker-Akhiezer function
//! and `phi` used to check the algebraic identities.

use serde::{Deserialize, Serialize};

use crate::config::Tolerances;
use crate::curve::{Curve, SurfacePoint};
use crate::error::{Error, Result};
use crate::periods::{AbelValue, PeriodData};
use crate::theta::{ThetaContext, ThetaValue};
use crate::toda::{ck_from_e, trace_a2, CoefficientWindow, SpectralPolys};
use crate::{poly, C64};

/// Sign in front of the theta term in the `b(n)` formula, fixed by the trace
/// formula (regression-tested below).
const B_THETA_SIGN: f64 = -1.0;

/// Initial divisor: points `(mu_j, sheet_j * sqrt_r(mu_j))` at site `n0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivisorInput {
    pub mu: Vec<C64>,
    pub sheet_signs: Vec<f64>,
    pub n0: i64,
}

impl DivisorInput {
    pub fn validate(&self, curve: &Curve) -> Result<()> {
        let p = curve.genus();
        if self.mu.len() != p || self.sheet_signs.len() != p {
            return Err(Error::InvalidDivisor(format!(
                "expected {p} points and {p} sheet signs, got {} and {}",
                self.mu.len(),
                self.sheet_signs.len()
            )));
        }
        for (j, (m, s)) in self.mu.iter().zip(&self.sheet_signs).enumerate() {
            if !m.is_finite() {
                return Err(Error::InvalidDivisor(format!("mu[{j}] is not finite")));
            }
            if *s != 1.0 && *s != -1.0 {
                return Err(Error::InvalidDivisor(format!("sheet_signs[{j}] must be +1 or -1")));
            }
        }
        Ok(())
    }

    pub fn points(&self, curve: &Curve) -> Vec<SurfacePoint> {
        self.mu.iter().zip(&self.sheet_signs).map(|(&m, &s)| curve.point(m, s)).collect()
    }

    /// Default divisor: one point at the midpoint between consecutive cuts, plus sheet.
    pub fn default_for(curve: &Curve) -> Self {
        let p = curve.genus();
        let mu = (0..p)
            .map(|j| {
                let (a, b) = curve.cut_endpoints(j);
                let (c, d) = curve.cut_endpoints(j + 1);
                let mut best = (f64::INFINITY, (a + c) * 0.5);
                for x in [a, b] {
                    for y in [c, d] {
                        if (x - y).norm() < best.0 {
                            best = ((x - y).norm(), (x + y) * 0.5);
                        }
                    }
                }
                best.1
            })
            .collect();
        Self {
            mu,
            sheet_signs: vec![1.0; p],
            n0: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ThetaFlowVectors {
    pub a_vec: Vec<C64>,
    pub b_vec: Vec<C64>,
    pub c_vec: Vec<C64>,
    pub lambda0: C64,
}

/// `A = Xi - A(P_inf+) + U n0 + sum_j A(mu_j)`, `B = U`, `C = A + B`,
/// `Lambda0 = (1/2) sum E - sum lambda`.
pub fn flow_vectors(curve: &Curve, data: &PeriodData, divisor: &DivisorInput) -> Result<(ThetaFlowVectors, Vec<AbelValue>)> {
    divisor.validate(curve)?;
    let p = data.genus;
    let pts = divisor.points(curve);
    let abel: Vec<AbelValue> = pts.iter().map(|q| data.abel(curve, q.z, q.y)).collect::<Result<_>>()?;
    let mut a_vec: Vec<C64> = (0..p).map(|j| data.xi[j] - data.a_inf_plus[j] + data.u0_3[j] * divisor.n0 as f64).collect();
    for av in &abel {
        for j in 0..p {
            a_vec[j] += av.omega[j];
        }
    }
    let b_vec = data.u0_3.clone();
    let c_vec: Vec<C64> = (0..p).map(|j| a_vec[j] + b_vec[j]).collect();
    let lambda0 = curve.spec.half_power_sum(1) - data.lambda.iter().sum::<C64>();
    Ok((ThetaFlowVectors { a_vec, b_vec, c_vec, lambda0 }, abel))
}

/// Integer `b`-part of the lattice vector separating `2 A(P_inf+)` from `U`.
pub fn inf_lattice_offset(data: &PeriodData) -> Result<Vec<i64>> {
    let p = data.genus;
    if p == 0 {
        return Ok(vec![]);
    }
    let diff: Vec<C64> = (0..p).map(|j| 2.0 * data.a_inf_plus[j] - data.u0_3[j]).collect();
    let im_tau = data.tau.map(|t| t.im);
    let rhs = nalgebra::DVector::from_iterator(p, diff.iter().map(|d| d.im));
    let k = im_tau
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::BasisConstructionFailed("Im tau is singular".into()))?;
    let k: Vec<i64> = k.iter().map(|x| x.round() as i64).collect();
    let mut rest = diff.clone();
    for j in 0..p {
        for (l, kl) in k.iter().enumerate() {
            rest[j] -= data.tau[(j, l)] * *kl as f64;
        }
    }
    if rest.iter().any(|r| r.im.abs() > 1e-6 || (r.re - r.re.round()).abs() > 1e-6) {
        return Err(Error::BasisConstructionFailed(
            "2 A(P_inf+) and U are not congruent mod the period lattice".into(),
        ));
    }
    Ok(k)
}

/// A calibrated finite-gap solution.
#[derive(Debug, Clone)]
pub struct FiniteGap {
    pub curve: Curve,
    pub data: PeriodData,
    pub theta: ThetaContext,
    pub divisor: DivisorInput,
    pub flow: ThetaFlowVectors,
    pub divisor_abel: Vec<AbelValue>,
    /// `a(n0)` from the trace formula (positive real part).
    pub a0: C64,
    /// The constant with `a(n)^2 = a_tilde^2 theta(n-1) theta(n+1) / theta(n)^2`.
    pub a_tilde2: C64,
    /// Sign in the telescoped normalization of the Baker-Akhiezer function.
    pub kappa: f64,
    /// Integer vector `k` with `2 A(P_inf+) - U = m + tau k`.
    pub inf_lattice_k: Vec<i64>,
}

impl FiniteGap {
    pub fn new(curve: &Curve, data: &PeriodData, divisor: &DivisorInput, tol: &Tolerances) -> Result<Self> {
        let (flow, divisor_abel) = flow_vectors(curve, data, divisor)?;
        let theta = data.theta_context(tol.tol_theta)?;
        let mut fg = Self {
            curve: curve.clone(),
            data: data.clone(),
            theta,
            divisor: divisor.clone(),
            flow,
            divisor_abel,
            a0: C64::new(0.0, 0.0),
            a_tilde2: C64::new(0.0, 0.0),
            kappa: 1.0,
            inf_lattice_k: inf_lattice_offset(data)?,
        };
        fg.check_nonspecial()?;
        fg.calibrate()?;
        fg.fix_kappa()?;
        Ok(fg)
    }

    fn check_nonspecial(&self) -> Result<()> {
        let pts = self.divisor.points(&self.curve);
        let scale = 1.0 + self.curve.spec.max_modulus();
        for j in 0..pts.len() {
            for k in 0..j {
                let same_z = (pts[j].z - pts[k].z).norm() < 1e-8 * scale;
                if same_z && (pts[j].y + pts[k].y).norm() <= 1e-8 * (1.0 + pts[j].y.norm()) {
                    return Err(Error::SpecialDivisor { ratio: 0.0 });
                }
            }
        }
        let t = self.theta_inf(self.divisor.n0)?;
        let ratio = t.divisor_ratio();
        if ratio < self.theta.tol_theta.sqrt() {
            return Err(Error::SpecialDivisor { ratio });
        }
        Ok(())
    }

    /// `z(P_inf+, mu(n)) = A - B n`.
    pub fn z_inf(&self, n: i64) -> Vec<C64> {
        self.flow.a_vec.iter().zip(&self.flow.b_vec).map(|(a, b)| a - b * n as f64).collect()
    }

    pub fn theta_inf(&self, n: i64) -> Result<ThetaValue> {
        let t = self.theta.eval(&self.z_inf(n))?;
        self.theta.check_off_divisor(&t)?;
        Ok(t)
    }

    pub fn b_at(&self, n: i64) -> Result<C64> {
        let p = self.data.genus;
        if p == 0 {
            return Ok(self.flow.lambda0);
        }
        let w = self.data.c_weights();
        let d = self.theta.dirlog(&w, &self.z_inf(n), &self.z_inf(n - 1))?;
        Ok(self.flow.lambda0 + B_THETA_SIGN * d)
    }

    /// `ln theta(n-1) + ln theta(n+1) - 2 ln theta(n)`.
    fn log_theta_ratio(&self, n: i64) -> Result<C64> {
        if self.data.genus == 0 {
            return Ok(C64::new(0.0, 0.0));
        }
        Ok(self.theta_inf(n - 1)?.ln() + self.theta_inf(n + 1)?.ln() - 2.0 * self.theta_inf(n)?.ln())
    }

    pub fn a2_at(&self, n: i64) -> Result<C64> {
        Ok(self.a_tilde2 * self.log_theta_ratio(n)?.exp())
    }

    fn calibrate(&mut self) -> Result<()> {
        let n0 = self.divisor.n0;
        let pts = self.divisor.points(&self.curve);
        let mu: Vec<C64> = pts.iter().map(|q| q.z).collect();
        let y: Vec<C64> = pts.iter().map(|q| q.y).collect();
        let b0 = self.b_at(n0)?;
        let a02 = trace_a2(self.curve.branch_points(), b0, &mu, &y).ok_or(Error::CalibrationDegenerate)?;
        if a02.norm() < 1e-14 * (1.0 + self.curve.spec.max_modulus()).powi(2) {
            return Err(Error::CalibrationDegenerate);
        }
        let mut a0 = a02.sqrt();
        if a0.re < 0.0 || (a0.re == 0.0 && a0.im < 0.0) {
            a0 = -a0;
        }
        self.a0 = a0;
        self.a_tilde2 = a02 * (-self.log_theta_ratio(n0)?).exp();
        Ok(())
    }

    /// Coefficients on `n_lo ..= n_hi`, failing with the first site whose
    /// theta argument lies on the theta divisor; `a(n0)` has positive real part and
    /// each further sign is the root nearest its neighbour towards `n0`.
    pub fn generate(&self, n_lo: i64, n_hi: i64) -> Result<CoefficientWindow> {
        if n_hi < n_lo {
            return Err(Error::InvalidConfig("empty site range".into()));
        }
        for n in (n_lo.min(self.divisor.n0) - 1)..=(n_hi.max(self.divisor.n0) + 1) {
            match self.theta_inf(n) {
                Err(Error::OnThetaDivisor { ratio }) => return Err(Error::OnThetaDivisorAtSite { site: n, ratio }),
                Err(e) => return Err(e),
                Ok(_) => {}
            }
        }
        let n0 = self.divisor.n0;
        let len = (n_hi - n_lo + 1) as usize;
        let mut a = vec![C64::new(0.0, 0.0); len];
        let mut b = vec![C64::new(0.0, 0.0); len];
        let ix = |n: i64| (n - n_lo) as usize;
        let pick = |a2: C64, prev: C64| {
            let r = a2.sqrt();
            if (r - prev).norm() <= (r + prev).norm() {
                r
            } else {
                -r
            }
        };
        let mut prev = self.a0;
        for n in n0..=n_hi.max(n0) {
            let v = if n == n0 { self.a0 } else { pick(self.a2_at(n)?, prev) };
            prev = v;
            if n >= n_lo && n <= n_hi {
                a[ix(n)] = v;
            }
        }
        prev = self.a0;
        for n in (n_lo.min(n0)..n0).rev() {
            let v = pick(self.a2_at(n)?, prev);
            prev = v;
            if n >= n_lo && n <= n_hi {
                a[ix(n)] = v;
            }
        }
        for n in n_lo..=n_hi {
            b[ix(n)] = self.b_at(n)?;
        }
        CoefficientWindow::new(n_lo, a, b)
    }

    /// `G_{p+1}(., n0)` from the divisor: leading `-z^{p+1} - c_1 z^p` and the
    /// remaining coefficients interpolating `G(mu_j) = -y_j`.
    pub fn g_at_n0(&self) -> Result<Vec<C64>> {
        let p = self.data.genus;
        let pts = self.divisor.points(&self.curve);
        if p == 0 {
            return Ok(vec![self.b_at(self.divisor.n0)?, C64::new(-1.0, 0.0)]);
        }
        let c1 = ck_from_e(self.curve.branch_points())[0];
        let mut head = vec![C64::new(0.0, 0.0); p + 2];
        head[p + 1] = C64::new(-1.0, 0.0);
        head[p] = -c1;
        // Lagrange interpolation for the degree < p remainder.
        let mut rem = vec![C64::new(0.0, 0.0); p];
        for j in 0..p {
            let target = -pts[j].y - poly::eval(&head, pts[j].z);
            let others: Vec<C64> = (0..p).filter(|&k| k != j).map(|k| pts[k].z).collect();
            let basis = poly::from_roots(&others);
            let denom = poly::eval(&basis, pts[j].z);
            if denom.norm() == 0.0 {
                return Err(Error::CalibrationDegenerate);
            }
            for (k, c) in basis.iter().enumerate() {
                rem[k] += c * target / denom;
            }
        }
        Ok(poly::add(&head, &rem))
    }

    fn fix_kappa(&mut self) -> Result<()> {
        let p = self.data.genus;
        let n0 = self.divisor.n0;
        let r = 0.5 * (1.0 + self.curve.spec.max_modulus());
        let mut z = C64::new(0.31 * r, 0.83 * r);
        if self.curve.cut_clearance(z) < 0.05 * r {
            z += C64::new(0.0, 0.2 * r);
        }
        let pt = self.curve.point(z, 1.0);
        let f0 = poly::from_roots(&self.divisor.mu);
        let g0 = self.g_at_n0()?;
        let phi = (pt.y - poly::eval(&g0, z)) / (2.0 * self.a0 * poly::eval(&f0, z));
        let win = CoefficientWindow::new(n0, vec![self.a0], vec![self.b_at(n0)?])?;
        self.kappa = 1.0;
        let bak = BakerAkhiezer::new(self, &win, pt)?;
        let psi1 = bak.psi(n0 + 1)?;
        let _ = p;
        self.kappa = if (psi1 - phi).norm() <= (psi1 + phi).norm() { 1.0 } else { -1.0 };
        Ok(())
    }

    /// `phi(P, n)` from the polynomials of the toda module, switching to the
    /// second form when `|y + G| > |y - G|`.
    pub fn phi(polys: &SpectralPolys, pt: SurfacePoint, n: i64) -> Result<C64> {
        let z = pt.z;
        let g = polys.eval_g(z, n);
        let a = polys.a_at(n);
        let scale = 1e-13 * (1.0 + g.norm() + pt.y.norm());
        if (pt.y + g).norm() > (pt.y - g).norm() {
            let d = pt.y + g;
            if d.norm() <= scale {
                return Err(Error::PoleAtDivisor);
            }
            Ok(-2.0 * a * polys.eval_f(z, n + 1) / d)
        } else {
            let f = polys.eval_f(z, n);
            if (a * f).norm() <= scale {
                return Err(Error::PoleAtDivisor);
            }
            Ok((pt.y - g) / (2.0 * a * f))
        }
    }

    /// First form of `phi` only.
    pub fn phi_first_form(polys: &SpectralPolys, pt: SurfacePoint, n: i64) -> C64 {
        (pt.y - polys.eval_g(pt.z, n)) / (2.0 * polys.a_at(n) * polys.eval_f(pt.z, n))
    }

    /// Second form of `phi` only.
    pub fn phi_second_form(polys: &SpectralPolys, pt: SurfacePoint, n: i64) -> C64 {
        -2.0 * polys.a_at(n) * polys.eval_f(pt.z, n + 1) / (pt.y + polys.eval_g(pt.z, n))
    }
}

/// Baker-Akhiezer function at a fixed point `P`, evaluated against a window
/// of coefficients produced by [`FiniteGap::generate`].
pub struct BakerAkhiezer<'a> {
    fg: &'a FiniteGap,
    window: &'a CoefficientWindow,
    pub point: SurfacePoint,
    pub abel: AbelValue,
    /// `A(P_inf+) - A(P)`.
    shift: Vec<C64>,
    ln_theta_n0: C64,
}

impl<'a> BakerAkhiezer<'a> {
    pub fn new(fg: &'a FiniteGap, window: &'a CoefficientWindow, point: SurfacePoint) -> Result<Self> {
        if fg
            .divisor
            .points(&fg.curve)
            .iter()
            .any(|q| (q.z - point.z).norm() < 1e-10 && (q.y - point.y).norm() < 1e-8 * (1.0 + q.y.norm()))
        {
            return Err(Error::PoleAtDivisor);
        }
        let abel = fg.data.abel(&fg.curve, point.z, point.y)?;
        let p = fg.data.genus;
        let shift: Vec<C64> = (0..p).map(|j| fg.data.a_inf_plus[j] - abel.omega[j]).collect();
        let mut me = Self {
            fg,
            window,
            point,
            abel,
            shift,
            ln_theta_n0: C64::new(0.0, 0.0),
        };
        me.ln_theta_n0 = me.ln_theta_p(fg.divisor.n0)?;
        Ok(me)
    }

    /// `ln theta(z(P, mu(n)))`.
    fn ln_theta_p(&self, n: i64) -> Result<C64> {
        if self.fg.data.genus == 0 {
            return Ok(C64::new(0.0, 0.0));
        }
        let z: Vec<C64> = self.fg.z_inf(n).iter().zip(&self.shift).map(|(a, b)| a + b).collect();
        let t = self.fg.theta.eval(&z)?;
        self.fg.theta.check_off_divisor(&t)?;
        Ok(t.ln())
    }

    fn ln_theta_inf(&self, n: i64) -> Result<C64> {
        if self.fg.data.genus == 0 {
            return Ok(C64::new(0.0, 0.0));
        }
        Ok(self.fg.theta_inf(n)?.ln())
    }

    /// `ln C(n+1) - ln C(n) = ln(kappa a(n) / a_tilde) + ln theta(n) - ln theta(n+1) - i pi k.U`.
    fn ln_c_step(&self, n: i64) -> Result<C64> {
        let a_tilde = self.fg.a_tilde2.sqrt();
        let a = self.window.a_at(n);
        let ku: C64 = self.fg.inf_lattice_k.iter().zip(&self.fg.data.u0_3).map(|(k, u)| u * *k as f64).sum();
        let twist = C64::new(0.0, -std::f64::consts::PI) * ku;
        Ok((a * self.fg.kappa / a_tilde).ln() + self.ln_theta_inf(n)? - self.ln_theta_inf(n + 1)? + twist)
    }

    pub fn ln_psi(&self, n: i64) -> Result<C64> {
        let n0 = self.fg.divisor.n0;
        let mut ln_c = C64::new(0.0, 0.0);
        if n > n0 {
            for m in n0..n {
                ln_c += self.ln_c_step(m)?;
            }
        } else {
            for m in n..n0 {
                ln_c -= self.ln_c_step(m)?;
            }
        }
        Ok(ln_c + self.ln_theta_p(n)? - self.ln_theta_n0 + self.abel.omega3 * (n - n0) as f64)
    }

    pub fn psi(&self, n: i64) -> Result<C64> {
        if n == self.fg.divisor.n0 {
            return Ok(C64::new(1.0, 0.0));
        }
        Ok(self.ln_psi(n)?.exp())
    }
}
