//! The invariant suite run by `verify`.

use serde::Serialize;

use toda_spectrum::c64;
use toda_spectrum::config::Tolerances;
use toda_spectrum::curve::Curve;
use toda_spectrum::error::{Error, Result};
use toda_spectrum::periods::PeriodData;
use toda_spectrum::toda::{
    build_polys, ck_from_e, dirichlet, hierarchy, lattice_constancy, recover_curve, stationary_residual, trace_b_residual, CoefficientWindow,
};

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub residual: f64,
    pub threshold: f64,
    /// `"below"` when the residual must stay under the threshold, `"above"` when it must exceed it.
    pub bound: &'static str,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub genus: usize,
    pub sites: [i64; 2],
    pub checks: Vec<Check>,
    pub pass: bool,
}

fn check(name: &str, residual: f64, threshold: f64) -> Check {
    Check {
        name: name.to_string(),
        residual,
        threshold,
        bound: "below",
        pass: residual.is_finite() && residual < threshold,
    }
}

fn check_above(name: &str, value: f64, threshold: f64) -> Check {
    Check {
        name: name.to_string(),
        residual: value,
        threshold,
        bound: "above",
        pass: value.is_finite() && value > threshold,
    }
}

/// Run every check on a window generated from `curve`.
pub fn run(curve: &Curve, data: &PeriodData, window: &CoefficientWindow, tol: &Tolerances) -> Result<Report> {
    let e = curve.branch_points();
    let p = curve.genus();
    let mut checks = Vec::new();

    if p > 0 {
        let cert = &data.certificate;
        checks.push(check("tau symmetry", cert.symmetry, 1e-10));
        checks.push(check_above("smallest eigenvalue of Im tau", cert.min_eig_im_tau, 0.0));
        checks.push(check("third-kind a-periods", cert.third_kind_a_periods, 1e-10));
        checks.push(check("U - 2A(P_inf+) modulo the lattice", cert.u_minus_2a, 1e-8));
    }

    if p == 0 {
        let a2 = (e[1] - e[0]).powi(2) / 16.0;
        let b = (e[0] + e[1]) / 2.0;
        let mut worst_a = 0.0f64;
        let mut worst_b = 0.0f64;
        for k in 0..window.len() {
            worst_a = worst_a.max((window.a[k].powi(2) - a2).norm());
            worst_b = worst_b.max((window.b[k] - b).norm());
        }
        checks.push(check("genus-0 a(n)^2 = (E1 - E0)^2 / 16", worst_a, 1e-12));
        checks.push(check("genus-0 b(n) = (E0 + E1) / 2", worst_b, 1e-12));
    }

    let c = ck_from_e(e);
    let (rf, rg) = stationary_residual(window, &c, p)?;
    checks.push(check("stationary hierarchy residual", rf.max(rg), tol.tol_alg));

    let table = hierarchy(window, &c, p)?;
    let polys = match build_polys(window, &table, tol.tol_alg) {
        Ok(polys) => polys,
        // The remaining checks need the polynomials; record why they are missing.
        Err(Error::NotStationary { deviation }) => return Ok(finish(p, window, checks, check("cross-site polynomial agreement", deviation, tol.tol_alg))),
        Err(Error::AnchorInconsistent { residual }) => return Ok(finish(p, window, checks, check("polynomial anchor consistency", residual, tol.tol_alg))),
        Err(other) => return Err(other),
    };
    let recovered = match recover_curve(&polys, tol.tol_alg) {
        Ok(r) => r,
        Err(Error::NotStationary { deviation }) => return Ok(finish(p, window, checks, check("curve agreement across sites", deviation, tol.tol_alg))),
        Err(other) => return Err(other),
    };
    let err = e
        .iter()
        .map(|x| recovered.roots.iter().map(|r| (r - x).norm()).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max);
    checks.push(check("recovered branch points", err, 1e2 * tol.tol_alg));

    let zs = [c64(0.3, 1.1), c64(-1.7, -0.4), c64(2.2, 0.9), c64(0.0, -2.5), c64(-0.9, 0.2)];
    let last = polys.n_last().min(polys.n_first + 49);
    checks.push(check(
        "lattice constancy of R(z)",
        lattice_constancy(&polys, &zs, polys.n_first..=last),
        tol.tol_alg,
    ));

    if p > 0 {
        let mut worst = 0.0f64;
        for n in polys.n_first..polys.n_last() {
            let d = dirichlet(&polys, n)?;
            worst = worst.max(trace_b_residual(e, window.b_at(n), &d.mu).norm());
        }
        checks.push(check("trace formula for b(n)", worst, tol.tol_alg));
    }

    Ok(report(p, window, checks))
}

fn report(genus: usize, window: &CoefficientWindow, checks: Vec<Check>) -> Report {
    let pass = checks.iter().all(|c| c.pass);
    Report {
        genus,
        sites: [window.n_lo, window.n_hi()],
        checks,
        pass,
    }
}

fn finish(genus: usize, window: &CoefficientWindow, mut checks: Vec<Check>, last: Check) -> Report {
    checks.push(last);
    report(genus, window, checks)
}
