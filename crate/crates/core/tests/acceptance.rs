//! Acceptance suite: one PASS/FAIL line per criterion.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use toda_spectrum::config::Tolerances;
use toda_spectrum::curve::Curve;
use toda_spectrum::finitegap::{BakerAkhiezer, DivisorInput, FiniteGap};
use toda_spectrum::periods::PeriodData;
use toda_spectrum::spectrum::{analyze, branch_fan, lyapunov, ArcEnd, SpectrumAnalysis, TraceConfig};
use toda_spectrum::theta::ThetaContext;
use toda_spectrum::toda::{
    build_polys, ck_from_e, dirichlet, hierarchy, lattice_constancy, recover_curve, stationary_residual, trace_b_residual, CoefficientWindow, SpectralPolys,
};
use toda_spectrum::{c64, C64};

type Outcome = Result<String, String>;

fn check(cond: bool, msg: String) -> Outcome {
    if cond {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn e(x: toda_spectrum::error::Error) -> String {
    x.to_string()
}

fn polys_for(curve: &Curve, w: &CoefficientWindow) -> Result<SpectralPolys, String> {
    let t = hierarchy(w, &ck_from_e(curve.branch_points()), curve.genus()).map_err(e)?;
    build_polys(w, &t, 1e-8).map_err(e)
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let e0 = c64(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
        let e1 = c64(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
        let curve = Curve::from_points(&[e0, e1]).map_err(e)?;
        let data = PeriodData::compute(&curve, 1e-12).map_err(e)?;
        let fg = FiniteGap::new(&curve, &data, &DivisorInput::default_for(&curve), &Tolerances::default()).map_err(e)?;
        let w = fg.generate(-20, 20).map_err(e)?;
        for n in -20..=20 {
            worst = worst.max((w.a_at(n).powi(2) - (e1 - e0).powi(2) / 16.0).norm());
            worst = worst.max((w.b_at(n) - (e0 + e1) / 2.0).norm());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(worst < 1e-12 && secs < 1.0, format!("max deviation {worst:.2e}, {secs:.3}s"))
}

fn hausdorff_to_bands(an: &SpectrumAnalysis, bands: &[(f64, f64)]) -> f64 {
    let to_bands = |z: C64| {
        bands
            .iter()
            .map(|&(l, r)| toda_spectrum::curve::point_segment_distance(z, c64(l, 0.0), c64(r, 0.0)))
            .fold(f64::INFINITY, f64::min)
    };
    let mut d = 0.0f64;
    for arc in &an.result.arcs {
        for p in &arc.points {
            d = d.max(to_bands(*p));
        }
    }
    for &(l, r) in bands {
        for k in 0..=4000 {
            let x = l + (r - l) * k as f64 / 4000.0;
            d = d.max(an.result.distance(c64(x, 0.0)));
        }
    }
    d
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let (curve, _, fg) = finite_gap(&self_adjoint_genus1());
    let w = fg.generate(-2000, 2000).map_err(e)?;
    let an = analyze(&curve, &w, &Tolerances::default(), &TraceConfig::default()).map_err(e)?;
    let hd = hausdorff_to_bands(&an, &[(-2.0, -1.0), (1.0, 2.0)]);
    let ends = an.result.endpoint_counts(4);
    let secs = start.elapsed().as_secs_f64();
    check(
        an.result.arcs.len() == 2 && ends == vec![1; 4] && hd < 1e-6 * 4.0 && secs < 60.0,
        format!("{} arcs, endpoint counts {:?}, Hausdorff {hd:.2e}, {secs:.2}s", an.result.arcs.len(), ends),
    )
}

struct Generated {
    curve: Curve,
    fg: FiniteGap,
    window: CoefficientWindow,
    polys: SpectralPolys,
}

fn generated(points: &[C64]) -> Result<Generated, String> {
    let (curve, _, fg) = finite_gap(points);
    let window = fg.generate(-40, 39).map_err(e)?;
    let polys = polys_for(&curve, &window)?;
    Ok(Generated { curve, fg, window, polys })
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let mut msgs = vec![];
    let mut ok = true;
    for pts in [genus1_generic(), genus2_generic()] {
        let g = generated(&pts)?;
        let p = g.curve.genus();
        let (rf, rg) = stationary_residual(&g.window, &ck_from_e(&pts), p).map_err(e)?;
        let rc = recover_curve(&g.polys, 1e-8).map_err(e)?;
        let err = pts
            .iter()
            .map(|x| rc.roots.iter().map(|r| (r - x).norm()).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max);
        ok &= rf.max(rg) < 1e-8 && err < 1e-6;
        msgs.push(format!("genus {p}: residual {:.2e}, branch-point error {err:.2e}", rf.max(rg)));
    }
    let secs = start.elapsed().as_secs_f64();
    check(ok && secs < 300.0, format!("{}; {secs:.2}s", msgs.join("; ")))
}

fn criterion_4() -> Outcome {
    let mut worst = 0.0f64;
    for pts in [genus1_generic(), genus2_generic()] {
        let g = generated(&pts)?;
        let zs = [c64(0.3, 1.1), c64(-1.7, -0.4), c64(2.2, 0.9), c64(0.0, -2.5), c64(-0.9, 0.2)];
        let lo = g.polys.n_first;
        worst = worst.max(lattice_constancy(&g.polys, &zs, lo..=lo + 49));
    }
    check(worst < 1e-8, format!("max relative variation of R(z) over 50 sites {worst:.2e}"))
}

fn test_curves() -> Vec<Vec<C64>> {
    let (a, b) = period3_coefficients();
    vec![genus1_generic(), genus2_generic(), self_adjoint_genus1(), periodic_branch_points(&a, &b)]
}

fn criterion_5() -> Outcome {
    let (mut sym, mut eig, mut third, mut u2a) = (0.0f64, f64::INFINITY, 0.0f64, 0.0f64);
    for pts in test_curves() {
        let curve = Curve::from_points(&pts).map_err(e)?;
        let d = PeriodData::compute(&curve, 1e-12).map_err(e)?;
        let c = &d.certificate;
        sym = sym.max(c.symmetry);
        eig = eig.min(c.min_eig_im_tau);
        third = third.max(c.third_kind_a_periods);
        u2a = u2a.max(c.u_minus_2a);
    }
    check(
        sym < 1e-10 && eig > 0.0 && third < 1e-10 && u2a < 1e-8,
        format!("|tau - tau^T| {sym:.2e}, min eig Im tau {eig:.3}, third-kind a-periods {third:.2e}, |U - 2A(P_inf+)| mod lattice {u2a:.2e}"),
    )
}

fn criterion_6() -> Outcome {
    let tau = nalgebra::DMatrix::from_element(1, 1, c64(0.0, 1.0));
    let ctx = ThetaContext::new(&tau, 1e-14).map_err(e)?;
    let v = ctx.eval(&[c64(0.0, 0.0)]).map_err(e)?.value().map_err(e)?;
    let oracle: f64 = (-60i32..=60).map(|n| (-std::f64::consts::PI * (n * n) as f64).exp()).sum();
    let value_err = (v - oracle).norm().max((v.re - 1.0864348112).abs());

    let tau2 = nalgebra::DMatrix::from_row_slice(2, 2, &[c64(0.3, 1.2), c64(0.1, 0.4), c64(0.1, 0.4), c64(-0.2, 0.9)]);
    let ctx2 = ThetaContext::new(&tau2, 1e-14).map_err(e)?;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut parity, mut quasi, mut grad) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..20 {
        let z: Vec<C64> = (0..2).map(|_| c64(rng.gen_range(-1.0..1.0), rng.gen_range(-0.5..0.5))).collect();
        let mz: Vec<C64> = z.iter().map(|x| -x).collect();
        let t = ctx2.eval(&z).map_err(e)?.value().map_err(e)?;
        let tm = ctx2.eval(&mz).map_err(e)?.value().map_err(e)?;
        parity = parity.max((t - tm).norm() / t.norm().max(1e-300));
        for k in 0..2 {
            let zs: Vec<C64> = (0..2).map(|j| z[j] + tau2[(j, k)]).collect();
            let ts = ctx2.eval(&zs).map_err(e)?.value().map_err(e)?;
            let factor = (c64(0.0, -2.0 * std::f64::consts::PI) * z[k] - c64(0.0, std::f64::consts::PI) * tau2[(k, k)]).exp();
            quasi = quasi.max((ts - factor * t).norm() / t.norm());
            let zu: Vec<C64> = (0..2).map(|j| z[j] + if j == k { 1.0 } else { 0.0 }).collect();
            let tu = ctx2.eval(&zu).map_err(e)?.value().map_err(e)?;
            quasi = quasi.max((tu - t).norm() / t.norm());
        }
        let g = ctx2.eval(&z).map_err(e)?.grad().map_err(e)?;
        for k in 0..2 {
            let h = 1e-5;
            let zp: Vec<C64> = (0..2).map(|j| z[j] + if j == k { h } else { 0.0 }).collect();
            let zm: Vec<C64> = (0..2).map(|j| z[j] - if j == k { h } else { 0.0 }).collect();
            let fd = (ctx2.eval(&zp).map_err(e)?.value().map_err(e)? - ctx2.eval(&zm).map_err(e)?.value().map_err(e)?) / (2.0 * h);
            grad = grad.max((fd - g[k]).norm() / g[k].norm().max(t.norm()));
        }
    }
    check(
        value_err < 1e-9 && parity < 1e-14 && quasi < 1e-10 && grad < 1e-6,
        format!("theta(0|i) error {value_err:.2e}, parity {parity:.2e}, quasi-periodicity {quasi:.2e}, gradient {grad:.2e}"),
    )
}

fn rel(x: C64, scale: f64) -> f64 {
    x.norm() / scale.max(f64::MIN_POSITIVE)
}

fn criterion_7() -> Outcome {
    let (curve, _, fg) = finite_gap(&genus2_generic());
    let n0 = fg.divisor.n0;
    let window = fg.generate(n0 - 30, n0 + 30).map_err(e)?;
    let polys = polys_for(&curve, &window)?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut schr, mut ident, mut one) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..10 {
        let z = c64(rng.gen_range(-2.5..2.5), rng.gen_range(-1.5..1.5));
        let sheet = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let p = curve.point(z, sheet);
        let q = p.star();
        let bp = BakerAkhiezer::new(&fg, &window, p).map_err(e)?;
        let bq = BakerAkhiezer::new(&fg, &window, q).map_err(e)?;
        let psi = |b: &BakerAkhiezer, n: i64| b.psi(n).map_err(e);
        one = one.max((psi(&bp, n0)? - 1.0).norm());
        let f0 = polys.eval_f(z, n0);
        for n in n0 - 20..n0 + 20 {
            let (a, am, b) = (window.a_at(n), window.a_at(n - 1), window.b_at(n));
            let (pm, p0, pp) = (psi(&bp, n - 1)?, psi(&bp, n)?, psi(&bp, n + 1)?);
            let lpsi = a * pp + am * pm + (b - z) * p0;
            schr = schr.max(rel(lpsi, (a * pp).norm() + (am * pm).norm() + ((b - z) * p0).norm()));
            let phi = FiniteGap::phi(&polys, p, n).map_err(e)?;
            let phim = FiniteGap::phi(&polys, p, n - 1).map_err(e)?;
            let phis = FiniteGap::phi(&polys, q, n).map_err(e)?;
            let (f, fp, g) = (polys.eval_f(z, n), polys.eval_f(z, n + 1), polys.eval_g(z, n));
            ident = ident.max(rel(a * phi + am / phim - (z - b), (a * phi).norm() + (am / phim).norm()));
            ident = ident.max(rel(phi * phis - fp / f, (fp / f).norm()));
            ident = ident.max(rel(phi - phis - p.y / (a * f), phi.norm() + phis.norm()));
            ident = ident.max(rel(pp / p0 - phi, phi.norm()));
            let (qs, qs1) = (psi(&bq, n)?, psi(&bq, n + 1)?);
            ident = ident.max(rel(p0 * qs - f / f0, (f / f0).norm()));
            let sum = a * (p0 * qs1 + qs * pp);
            ident = ident.max(rel(sum + g / f0, (a * p0 * qs1).norm() + (a * qs * pp).norm()));
            let wr = a * (p0 * qs1 - pp * qs);
            ident = ident.max(rel(wr + p.y / f0, (a * p0 * qs1).norm() + (a * qs * pp).norm()));
        }
    }
    check(
        schr < 1e-8 && ident < 1e-8 && one == 0.0,
        format!("relative (L - z) psi residual {schr:.2e}, identity residuals {ident:.2e}, |psi(n0) - 1| = {one:.1e}"),
    )
}

fn criterion_8() -> Outcome {
    let mut worst = 0.0f64;
    for pts in [genus1_generic(), genus2_generic()] {
        let g = generated(&pts)?;
        for n in g.polys.n_first..g.polys.n_last() {
            let d = dirichlet(&g.polys, n).map_err(e)?;
            worst = worst.max(trace_b_residual(&pts, g.window.b_at(n), &d.mu).norm());
        }
        let _ = &g.fg;
    }
    check(worst < 1e-8, format!("max trace-formula residual {worst:.2e}"))
}

fn spectral_inputs() -> Vec<(String, Curve, CoefficientWindow)> {
    let mut out = vec![];
    for (name, pts) in [
        ("self-adjoint genus 1", self_adjoint_genus1()),
        ("genus 1", genus1_generic()),
        ("genus 2", genus2_generic()),
    ] {
        let (curve, _, fg) = finite_gap(&pts);
        let w = fg.generate(-50_000, 50_000).unwrap();
        out.push((name.to_string(), curve, w));
    }
    out
}

fn criterion_9() -> Outcome {
    let mut ok = true;
    let mut msgs = vec![];
    for (name, curve, w) in spectral_inputs() {
        let an = analyze(&curve, &w, &Tolerances::default(), &TraceConfig::default()).map_err(e)?;
        let sf = &an.function;
        let hmax = sf.branch_values().map_err(e)?.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let periods = sf.cut_periods_over_i_pi().map_err(e)?;
        let quant = periods.iter().map(|v| (v - c64(v.re.round(), 0.0)).norm()).fold(0.0, f64::max);
        let mut fd_err = 0.0f64;
        for z in [c64(0.4, 1.6), c64(-2.3, -1.1), c64(2.6, 0.7)] {
            let d = 1e-4;
            let fd = (sf.h_complex(z + d).map_err(e)? - sf.h_complex(z - d).map_err(e)?) / (2.0 * d);
            let exact = sf.derivative(z, curve.sqrt_r(z));
            fd_err = fd_err.max((fd - exact).norm() / exact.norm());
        }
        ok &= hmax < 1e-6 && quant < 1e-6 && fd_err < 1e-6;
        let shown: Vec<String> = periods.iter().map(|v| format!("{:.6}{:+.6}i", v.re, v.im)).collect();
        msgs.push(format!(
            "{name}: max|h(E_m)| {hmax:.1e}, cut periods / (i pi) [{}] (distance to Z {quant:.1e}), h' error {fd_err:.1e}",
            shown.join(", ")
        ));
    }
    check(ok, msgs.join("; "))
}

fn angle_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * std::f64::consts::PI);
    d.min(2.0 * std::f64::consts::PI - d)
}

fn genus2_analysis(len: i64) -> Result<(Curve, CoefficientWindow, SpectrumAnalysis), String> {
    let (curve, _, fg) = finite_gap(&genus2_generic());
    let w = fg.generate(-len, len).map_err(e)?;
    let an = analyze(&curve, &w, &Tolerances::default(), &TraceConfig::default()).map_err(e)?;
    Ok((curve, w, an))
}

fn criterion_10() -> Outcome {
    let (curve, _, an) = genus2_analysis(50_000)?;
    let res = &an.result;
    let ends = res.endpoint_counts(6);
    let diam = curve.spec.diameter();
    let mut worst_angle = 0.0f64;
    for (m, em) in curve.branch_points().iter().enumerate() {
        let (_, fan) = branch_fan(&an.function, m, 1e-6 * diam);
        for arc in &res.arcs {
            let r = 0.01 * diam;
            let t = if arc.start == ArcEnd::BranchPoint(m) {
                arc.start_tangent(r)
            } else if arc.end == ArcEnd::BranchPoint(m) {
                arc.end_tangent(r)
            } else {
                None
            };
            if let Some(t) = t {
                let gap = fan.iter().map(|f| angle_gap(*f, t)).fold(f64::INFINITY, f64::min);
                worst_angle = worst_angle.max(gap.to_degrees());
            }
        }
        let _ = em;
    }
    let b = res.bbox;
    let inside = res
        .arcs
        .iter()
        .all(|a| a.points.iter().all(|p| p.re >= b[0] && p.re <= b[1] && p.im >= b[2] && p.im <= b[3]));
    let terminated = res.arcs.iter().all(|a| a.end != ArcEnd::Unterminated && a.start != a.end);
    check(
        ends == vec![1; 6] && worst_angle < 5.0 && inside && terminated,
        format!(
            "{} arcs, endpoint counts {:?}, worst tangent deviation {worst_angle:.2} deg, inside box {inside}, all arcs end at distinct endpoints {terminated}",
            res.arcs.len(),
            ends
        ),
    )
}

fn criterion_11() -> Outcome {
    let start = Instant::now();
    let n = 100_000usize;
    let (_, w, an) = genus2_analysis(n as i64 / 2 + 10)?;
    let res = &an.result;
    let on = res.sample_points(20);
    let mut rng = ChaCha8Rng::seed_from_u64(111);
    let b = res.bbox;
    let mut off = vec![];
    while off.len() < 20 {
        let z = c64(rng.gen_range(b[0] - 0.5..b[1] + 0.5), rng.gen_range(b[2] - 0.5..b[3] + 0.5));
        if res.distance(z) > 0.2 {
            off.push(z);
        }
    }
    let gamma_star = 0.01;
    // Arc samples interpolate between corrected nodes, so |h| there is O(step^2).
    let h_tol = 1e-4f64;
    let mut agree = 0;
    for z in on.iter().chain(off.iter()) {
        let g = lyapunov(&w, *z, w.n_lo + 1, n).map_err(e)?;
        let h = an.function.h(*z).map_err(e).or_else(|_| an.function.h_side(*z, c64(0.0, 1.0)).map_err(e))?;
        if (g < gamma_star) == (h.abs() < h_tol) {
            agree += 1;
        }
    }
    let frac = agree as f64 / 40.0;
    let secs = start.elapsed().as_secs_f64();
    check(frac >= 0.95 && secs < 300.0, format!("{agree}/40 points classified consistently, {secs:.1}s"))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: Vec<Criterion> = vec![
        ("genus-0 closed form", criterion_1),
        ("self-adjoint genus-1 bands", criterion_2),
        ("end-to-end stationarity", criterion_3),
        ("lattice-constant invariance", criterion_4),
        ("period certificates", criterion_5),
        ("theta correctness", criterion_6),
        ("Baker-Akhiezer suite", criterion_7),
        ("trace formula", criterion_8),
        ("spectral-function structure", criterion_9),
        ("arc geometry", criterion_10),
        ("oracle agreement", criterion_11),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.into_iter().enumerate() {
        let out = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match out {
            Ok(msg) => println!("PASS criterion {} ({name}): {msg}", k + 1),
            Err(msg) => {
                failed += 1;
                println!("FAIL criterion {} ({name}): {msg}", k + 1)
            }
        }
    }
    println!("{failed} of 11 criteria failed");
}
