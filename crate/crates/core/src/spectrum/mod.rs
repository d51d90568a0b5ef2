//! Mean values of the hierarchy coefficients, the harmonic spectral function
//! `h`, arc tracing of its zero set, and brute-force oracles.

mod arcs;
mod oracle;

pub use arcs::{branch_fan, trace_arcs, Arc, ArcEnd, Crossing, SpectrumResult, TraceConfig};
pub use oracle::{finite_section, lyapunov, FiniteSection};

use serde::Serialize;

use crate::config::Tolerances;
use crate::curve::Curve;
use crate::error::{Error, Result};
use crate::periods::Ellipse;
use crate::toda::{ck_from_e, hierarchy, CoefficientWindow};
use crate::{poly, quad, C64};

/// Mean values `<f_0>, ..., <f_p>` and the roots of the mean polynomial.
#[derive(Debug, Clone, Serialize)]
pub struct MeanData {
    pub p: usize,
    pub means: Vec<C64>,
    pub lambda_tilde: Vec<C64>,
    pub window_len: usize,
    pub error: f64,
}

impl MeanData {
    /// Mean data from explicit means (`means[0]` is forced to 1).
    pub fn from_means(means: Vec<C64>, window_len: usize, error: f64) -> Result<Self> {
        let p = means.len().saturating_sub(1);
        let mut means = means;
        if means.is_empty() {
            means.push(C64::new(1.0, 0.0));
        }
        means[0] = C64::new(1.0, 0.0);
        let mut md = Self {
            p,
            means,
            lambda_tilde: vec![],
            window_len,
            error,
        };
        md.lambda_tilde = if p == 0 { vec![] } else { poly::roots(&md.poly())? };
        Ok(md)
    }

    /// `<F_p>(z) = sum_l <f_{p-l}> z^l`, ascending coefficients.
    pub fn poly(&self) -> Vec<C64> {
        (0..=self.p).map(|l| self.means[self.p - l]).collect()
    }
}

/// Triangular (Fejer) weights on `len` consecutive sites, summing to one.
fn fejer_weights(len: usize) -> Vec<f64> {
    let m = (len as f64 + 1.0) / 2.0;
    let w: Vec<f64> = (0..len).map(|k| m - ((k as f64) - (len as f64 - 1.0) / 2.0).abs()).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}

fn fejer_mean(values: &[C64]) -> C64 {
    fejer_weights(values.len()).iter().zip(values).map(|(w, v)| v * *w).sum()
}

/// Fejer-weighted means of `f_0 .. f_p` over the window, with the error
/// estimated from the central half window.
pub fn mean_values(window: &CoefficientWindow, c: &[C64], p: usize, tol_mean: f64) -> Result<MeanData> {
    if p == 0 {
        return MeanData::from_means(vec![C64::new(1.0, 0.0)], window.len(), 0.0);
    }
    let table = hierarchy(window, c, p)?;
    let (lo, hi) = (0..=p)
        .map(|j| table.range[j])
        .fold((i64::MIN, i64::MAX), |(a, b), (l, h)| (a.max(l), b.min(h)));
    let len = (hi - lo + 1) as usize;
    if len < 16 {
        return Err(Error::WindowTooNarrow(format!("mean window has only {len} usable sites")));
    }
    let q = len / 4;
    let mut means = Vec::with_capacity(p + 1);
    let mut err = 0.0f64;
    for j in 0..=p {
        let vals: Vec<C64> = (lo..=hi).map(|n| table.f_at(j, n)).collect();
        let full = fejer_mean(&vals);
        let half = fejer_mean(&vals[q..len - q]);
        err = err.max((full - half).norm());
        means.push(full);
    }
    if err > tol_mean {
        return Err(Error::MeanNotConverged { discrepancy: err });
    }
    MeanData::from_means(means, len, err)
}

/// The bounding box `[M1, M2] x [M3, M4]` of the spectrum computed from the window.
pub fn bounding_box(window: &CoefficientWindow) -> [f64; 4] {
    let sup = |f: &dyn Fn(usize) -> f64| (0..window.len()).map(f).fold(f64::NEG_INFINITY, f64::max);
    let inf = |f: &dyn Fn(usize) -> f64| (0..window.len()).map(f).fold(f64::INFINITY, f64::min);
    let ra = sup(&|k| window.a[k].re.abs());
    let ia = sup(&|k| window.a[k].im.abs());
    [
        -2.0 * ra + inf(&|k| window.b[k].re),
        2.0 * ra + sup(&|k| window.b[k].re),
        -2.0 * ia + inf(&|k| window.b[k].im),
        2.0 * ia + sup(&|k| window.b[k].im),
    ]
}

/// `h(z) = Re H(z)`, `H(z) = 2 int_{E_m0}^z <F_p>(z') / R(z')^{1/2} dz'` on
/// the plus sheet of the cut plane.
#[derive(Debug, Clone)]
pub struct SpectralFunction {
    pub curve: Curve,
    pub mean: MeanData,
    pub mean_poly: Vec<C64>,
    pub base: usize,
    pub tol_quad: f64,
}

impl SpectralFunction {
    pub fn new(curve: &Curve, mean: &MeanData, tol_quad: f64) -> Result<Self> {
        if mean.p != curve.genus() {
            return Err(Error::InvalidConfig(format!(
                "mean data has genus {} but the curve has genus {}",
                mean.p,
                curve.genus()
            )));
        }
        let base = curve
            .branch_points()
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
            .map(|(m, _)| m)
            .unwrap_or(0);
        Ok(Self {
            curve: curve.clone(),
            mean: mean.clone(),
            mean_poly: mean.poly(),
            base,
            tol_quad,
        })
    }

    pub fn base_point(&self) -> C64 {
        self.curve.branch_points()[self.base]
    }

    /// `H'(z) = 2 <F_p>(z) / y` for the given branch value `y`.
    pub fn derivative(&self, z: C64, y: C64) -> C64 {
        2.0 * poly::eval(&self.mean_poly, z) / y
    }

    /// Complex `H` on the plus sheet, integrated along a planned cut-plane path.
    pub fn h_complex(&self, z: C64) -> Result<C64> {
        let e0 = self.base_point();
        if (z - e0).norm() == 0.0 {
            return Ok(C64::new(0.0, 0.0));
        }
        let path = self.curve.plan_path(e0, z)?;
        let at_branch = self.curve.branch_index(z).is_some();
        let mut f = |w: C64, out: &mut [C64]| out[0] = self.derivative(w, self.curve.sqrt_r(w));
        Ok(quad::polyline(&path, true, at_branch, 1, self.tol_quad, &mut f)?[0])
    }

    /// Side limit of `H` at `z` approached along the direction `side`, for
    /// points on (or extremely close to) a cut.
    pub fn h_complex_side(&self, z: C64, side: C64) -> Result<C64> {
        let side = side / side.norm();
        let delta = 0.25 * self.curve.branch_clearance(z);
        if delta == 0.0 {
            return self.h_complex(z);
        }
        let w = z + side * delta;
        let e0 = self.base_point();
        let mut path = self.curve.plan_path(e0, w)?;
        path.push(z);
        let at_branch = self.curve.branch_index(z).is_some();
        let mut f = |u: C64, out: &mut [C64]| out[0] = self.derivative(u, self.curve.sqrt_r(u));
        Ok(quad::polyline(&path, true, at_branch, 1, self.tol_quad, &mut f)?[0])
    }

    pub fn h_side(&self, z: C64, side: C64) -> Result<f64> {
        Ok(self.h_complex_side(z, side)?.re)
    }

    pub fn h(&self, z: C64) -> Result<f64> {
        Ok(self.h_complex(z)?.re)
    }

    /// `h` at every branch point (zero in exact arithmetic).
    pub fn branch_values(&self) -> Result<Vec<f64>> {
        self.curve.branch_points().iter().map(|&e| self.h(e)).collect()
    }

    /// `oint <F_p>/y dz` over an ellipse enclosing one cut, on the plus sheet.
    pub fn cycle_integral(&self, ellipse: &Ellipse) -> Result<C64> {
        let mut f = |w: C64, out: &mut [C64]| out[0] = poly::eval(&self.mean_poly, w) / self.curve.sqrt_r(w);
        Ok(quad::closed_loop(|t| ellipse.param(t), 1, self.tol_quad, &mut f)?[0])
    }

    /// Cycle integrals around each cut divided by `i pi`.
    pub fn cut_periods_over_i_pi(&self) -> Result<Vec<C64>> {
        let mut out = Vec::new();
        for j in 0..self.curve.cut_count() {
            let (a, b) = self.curve.cut_endpoints(j);
            let center = (a + b) * 0.5;
            let half_axis = (b - a) * 0.5;
            let mut rho = 1.2f64.acosh();
            for k in 0..self.curve.cut_count() {
                if k == j {
                    continue;
                }
                let (c, d) = self.curve.cut_endpoints(k);
                for w in [c, d, (c + d) * 0.5] {
                    let u = (w - center) / half_axis;
                    let r = (u + (u * u - 1.0).sqrt()).norm().ln().abs().min((u - (u * u - 1.0).sqrt()).norm().ln().abs());
                    rho = rho.min(0.5 * r);
                }
            }
            let e = Ellipse { center, half_axis, rho };
            out.push(self.cycle_integral(&e)? / C64::new(0.0, std::f64::consts::PI));
        }
        Ok(out)
    }
}

/// Everything the spectrum stage produces from a coefficient window.
#[derive(Debug, Clone)]
pub struct SpectrumAnalysis {
    pub mean: MeanData,
    pub function: SpectralFunction,
    pub result: SpectrumResult,
}

/// Means, spectral function and traced arcs for a stationary window.
pub fn analyze(curve: &Curve, window: &CoefficientWindow, tol: &Tolerances, cfg: &TraceConfig) -> Result<SpectrumAnalysis> {
    let c = ck_from_e(curve.branch_points());
    let mean = mean_values(window, &c, curve.genus(), tol.tol_mean)?;
    let function = SpectralFunction::new(curve, &mean, tol.tol_quad)?;
    let result = trace_arcs(&function, bounding_box(window), cfg)?;
    Ok(SpectrumAnalysis { mean, function, result })
}
