//! Test curves and independent oracles shared by the integration tests.
#![allow(dead_code)]

use toda_spectrum::curve::Curve;
use toda_spectrum::finitegap::{DivisorInput, FiniteGap};
use toda_spectrum::periods::PeriodData;
use toda_spectrum::toda::CoefficientWindow;
use toda_spectrum::{c64, config::Tolerances, poly, C64};

pub fn genus1_generic() -> Vec<C64> {
    vec![c64(-2.0, 0.1), c64(-0.8, -0.3), c64(0.5, 0.4), c64(1.9, -0.2)]
}

pub fn genus2_generic() -> Vec<C64> {
    vec![c64(-2.0, 0.1), c64(-1.1, -0.3), c64(-0.2, 0.4), c64(0.7, -0.2), c64(1.5, 0.3), c64(2.4, -0.1)]
}

pub fn self_adjoint_genus1() -> Vec<C64> {
    [-2.0, -1.0, 1.0, 2.0].iter().map(|&x| c64(x, 0.0)).collect()
}

/// One period of a complex period-3 Jacobi matrix.
pub fn period3_coefficients() -> (Vec<C64>, Vec<C64>) {
    (
        vec![c64(0.9, 0.2), c64(0.6, -0.3), c64(1.1, 0.1)],
        vec![c64(0.3, 0.5), c64(-0.6, -0.2), c64(0.8, 0.1)],
    )
}

/// Numerator polynomial of the Floquet discriminant and the product of `a`
/// over one period: `Delta(z) = P(z) / prod a`.
pub fn floquet_numerator(a: &[C64], b: &[C64]) -> (Vec<C64>, C64) {
    let n = a.len();
    let one = vec![c64(1.0, 0.0)];
    let zero: Vec<C64> = vec![];
    // Rows of the accumulated 2x2 polynomial matrix.
    let mut m = [[one.clone(), zero.clone()], [zero.clone(), one.clone()]];
    for k in 0..n {
        let am = a[(k + n - 1) % n];
        let t = [[vec![-b[k], c64(1.0, 0.0)], vec![-am]], [vec![a[k]], vec![]]];
        let mut out = [[zero.clone(), zero.clone()], [zero.clone(), zero.clone()]];
        for r in 0..2 {
            for c in 0..2 {
                let mut acc = vec![];
                for j in 0..2 {
                    acc = poly::add(&acc, &poly::mul(&t[r][j], &m[j][c]));
                }
                out[r][c] = acc;
            }
        }
        m = out;
    }
    (poly::add(&m[0][0], &m[1][1]), a.iter().product())
}

pub fn floquet_discriminant(a: &[C64], b: &[C64], z: C64) -> C64 {
    let (p, pa) = floquet_numerator(a, b);
    poly::eval(&p, z) / pa
}

/// Branch points of the periodic operator: roots of `P^2 - 4 (prod a)^2`.
pub fn periodic_branch_points(a: &[C64], b: &[C64]) -> Vec<C64> {
    let (p, pa) = floquet_numerator(a, b);
    let q = poly::add(&poly::mul(&p, &p), &[-4.0 * pa * pa]);
    poly::roots(&q).unwrap()
}

/// Lyapunov exponent of the periodic operator from the discriminant.
pub fn periodic_gamma(a: &[C64], b: &[C64], z: C64) -> f64 {
    let d = floquet_discriminant(a, b, z) / 2.0;
    let r = (d * d - 1.0).sqrt();
    (d + r).norm().max((d - r).norm()).ln() / a.len() as f64
}

pub fn periodic_window(a: &[C64], b: &[C64], n_lo: i64, len: usize) -> CoefficientWindow {
    let n = a.len() as i64;
    let aa = (0..len).map(|k| a[(n_lo + k as i64).rem_euclid(n) as usize]).collect();
    let bb = (0..len).map(|k| b[(n_lo + k as i64).rem_euclid(n) as usize]).collect();
    CoefficientWindow::new(n_lo, aa, bb).unwrap()
}

pub fn finite_gap(points: &[C64]) -> (Curve, PeriodData, FiniteGap) {
    let curve = Curve::from_points(points).unwrap();
    let data = PeriodData::compute(&curve, 1e-12).unwrap();
    let div = DivisorInput::default_for(&curve);
    let fg = FiniteGap::new(&curve, &data, &div, &Tolerances::default()).unwrap();
    (curve, data, fg)
}
