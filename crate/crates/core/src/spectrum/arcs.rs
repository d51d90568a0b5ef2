use std::f64::consts::PI;

use serde::{Serialize, Serializer};

use super::SpectralFunction;
use crate::error::{Error, Result};
use crate::quad::gauss_legendre;
use crate::{poly, C64};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ArcEnd {
    BranchPoint(usize),
    CrossingLambda(usize),
    Unterminated,
}

impl Serialize for ArcEnd {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut m = s.serialize_map(None)?;
        match self {
            ArcEnd::BranchPoint(i) => {
                m.serialize_entry("type", "E")?;
                m.serialize_entry("index", i)?;
            }
            ArcEnd::CrossingLambda(j) => {
                m.serialize_entry("type", "lambda")?;
                m.serialize_entry("index", j)?;
            }
            ArcEnd::Unterminated => m.serialize_entry("type", "none")?,
        }
        m.end()
    }
}

fn ser_points<S: Serializer>(pts: &[C64], s: S) -> std::result::Result<S::Ok, S::Error> {
    let v: Vec<[f64; 2]> = pts.iter().map(|z| [z.re, z.im]).collect();
    v.serialize(s)
}

#[derive(Debug, Clone, Serialize)]
pub struct Arc {
    #[serde(serialize_with = "ser_points")]
    pub points: Vec<C64>,
    pub start: ArcEnd,
    pub end: ArcEnd,
    pub arclength: f64,
    /// Launch direction (radians) at the start point.
    pub seed_angle: f64,
}

impl Arc {
    /// Distance from `z` to the polyline.
    pub fn distance(&self, z: C64) -> f64 {
        if self.points.len() == 1 {
            return (z - self.points[0]).norm();
        }
        self.points
            .windows(2)
            .map(|w| crate::curve::point_segment_distance(z, w[0], w[1]))
            .fold(f64::INFINITY, f64::min)
    }

    /// Direction (radians) of the arc leaving its start point, measured at
    /// the first node at least `r` away.
    pub fn start_tangent(&self, r: f64) -> Option<f64> {
        let s = self.points[0];
        self.points.iter().find(|p| (*p - s).norm() >= r).map(|p| (p - s).arg())
    }

    /// Direction of the arc leaving its end point (towards the interior).
    pub fn end_tangent(&self, r: f64) -> Option<f64> {
        let e = *self.points.last()?;
        self.points.iter().rev().find(|p| (*p - e).norm() >= r).map(|p| (p - e).arg())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Crossing {
    pub index: usize,
    #[serde(serialize_with = "ser_point")]
    pub z: C64,
    pub h: f64,
    /// True when `h(lambda_tilde_j)` vanishes, so arcs cross there.
    pub flagged: bool,
    pub multiplicity: usize,
    /// Separation from the nearest branch point lies in the ambiguous band.
    pub ambiguous: bool,
}

fn ser_point<S: Serializer>(z: &C64, s: S) -> std::result::Result<S::Ok, S::Error> {
    [z.re, z.im].serialize(s)
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumResult {
    pub arcs: Vec<Arc>,
    #[serde(serialize_with = "ser_points")]
    pub lambda_tilde: Vec<C64>,
    pub crossings: Vec<Crossing>,
    pub bbox: [f64; 4],
    /// `h` at each branch point.
    pub branch_h: Vec<f64>,
}

impl SpectrumResult {
    pub fn endpoint_counts(&self, n_branch: usize) -> Vec<usize> {
        let mut c = vec![0; n_branch];
        for a in &self.arcs {
            for e in [a.start, a.end] {
                if let ArcEnd::BranchPoint(m) = e {
                    c[m] += 1;
                }
            }
        }
        c
    }

    pub fn distance(&self, z: C64) -> f64 {
        self.arcs.iter().map(|a| a.distance(z)).fold(f64::INFINITY, f64::min)
    }

    /// Points evenly spread along the arcs (by arclength), excluding the
    /// immediate vicinity of endpoints.
    pub fn sample_points(&self, count: usize) -> Vec<C64> {
        let total: f64 = self.arcs.iter().map(|a| a.arclength).sum();
        if total == 0.0 || count == 0 {
            return vec![];
        }
        let mut out = Vec::with_capacity(count);
        for k in 0..count {
            let mut target = total * (k as f64 + 0.5) / count as f64;
            for a in &self.arcs {
                if target > a.arclength {
                    target -= a.arclength;
                    continue;
                }
                let mut acc = 0.0;
                for w in a.points.windows(2) {
                    let l = (w[1] - w[0]).norm();
                    if acc + l >= target {
                        out.push(w[0] + (w[1] - w[0]) * ((target - acc) / l.max(1e-300)));
                        break;
                    }
                    acc += l;
                }
                break;
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TraceConfig {
    /// Nominal step as a fraction of the branch-point diameter.
    pub step: f64,
    pub tol_arc: f64,
    pub max_steps: usize,
}

impl Default for TraceConfig {
    fn default() -> Self {
        Self {
            step: 2e-3,
            tol_arc: 1e-8,
            max_steps: 200_000,
        }
    }
}

/// Tracing state: position, continued branch of `y`, continued `H`.
#[derive(Debug, Clone, Copy)]
struct State {
    z: C64,
    y: C64,
    h: C64,
}

struct Tracer<'a> {
    sf: &'a SpectralFunction,
    step: f64,
    tol_arc: f64,
    max_steps: usize,
    capture: f64,
    branch_capture: f64,
    bbox: [f64; 4],
    margin: f64,
    crossing_points: Vec<(usize, C64)>,
}

impl<'a> Tracer<'a> {
    fn nearest_branch(&self, z: C64) -> (usize, f64) {
        self.sf
            .curve
            .branch_points()
            .iter()
            .enumerate()
            .map(|(m, e)| (m, (z - e).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap()
    }

    fn y_near(&self, z: C64, prev: C64) -> C64 {
        let s = self.sf.curve.sqrt_r(z);
        if (s - prev).norm() <= (s + prev).norm() {
            s
        } else {
            -s
        }
    }

    /// Continue `(y, H)` along the straight segment from `st.z` to `z1`.
    fn advance(&self, st: State, z1: C64) -> State {
        let rule = gauss_legendre(16);
        let d = z1 - st.z;
        let mut nodes: Vec<(f64, f64)> = rule.nodes.iter().zip(rule.weights.iter()).map(|(x, w)| (0.5 * (x + 1.0), 0.5 * w)).collect();
        nodes.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut y = st.y;
        let mut acc = C64::new(0.0, 0.0);
        for (s, w) in nodes {
            let z = st.z + d * s;
            y = self.y_near(z, y);
            acc += self.sf.derivative(z, y) * w;
        }
        let y1 = self.y_near(z1, y);
        State {
            z: z1,
            y: y1,
            h: st.h + acc * d,
        }
    }

    /// Newton along the gradient of `h` until `|h| < tol_arc`.
    fn correct(&self, mut st: State) -> Option<State> {
        for _ in 0..30 {
            if st.h.re.abs() < self.tol_arc {
                return Some(st);
            }
            let hp = self.sf.derivative(st.z, st.y);
            if !hp.is_finite() || hp.norm() == 0.0 {
                return None;
            }
            let delta = -st.h.re * hp.conj() / hp.norm_sqr();
            if delta.norm() > 0.5 * self.step.max(1e-300) {
                return None;
            }
            st = self.advance(st, st.z + delta);
        }
        None
    }

    fn inside_box(&self, z: C64) -> bool {
        z.re >= self.bbox[0] - self.margin && z.re <= self.bbox[1] + self.margin && z.im >= self.bbox[2] - self.margin && z.im <= self.bbox[3] + self.margin
    }

    /// Trace from `start` leaving in direction `dir` (unit complex number).
    fn trace(&self, start_pt: C64, start: ArcEnd, mut st: State, dir: C64, existing: &[Arc]) -> Result<Arc> {
        let diam = self.sf.curve.spec.diameter().max(1e-300);
        let mut points = vec![start_pt, st.z];
        let mut tangent = dir;
        let mut h_step = self.step;
        let mut length = (st.z - start_pt).norm();
        for _ in 0..self.max_steps {
            let (m, dist) = self.nearest_branch(st.z);
            let left_start = match start {
                ArcEnd::BranchPoint(s) => s != m || length > 4.0 * self.capture,
                _ => true,
            };
            if dist < self.branch_capture && left_start {
                let e = self.sf.curve.branch_points()[m];
                length += (e - st.z).norm();
                points.push(e);
                return Ok(Arc {
                    points,
                    start,
                    end: ArcEnd::BranchPoint(m),
                    arclength: length,
                    seed_angle: dir.arg(),
                });
            }
            for &(j, lam) in &self.crossing_points {
                let leaving = matches!(start, ArcEnd::CrossingLambda(s) if s == j) && length < 4.0 * self.capture;
                if (st.z - lam).norm() < self.capture && !leaving {
                    length += (lam - st.z).norm();
                    points.push(lam);
                    return Ok(Arc {
                        points,
                        start,
                        end: ArcEnd::CrossingLambda(j),
                        arclength: length,
                        seed_angle: dir.arg(),
                    });
                }
            }
            if length > 4.0 * self.capture && existing.iter().any(|a| a.distance(st.z) < 0.5 * self.step) {
                return Ok(Arc {
                    points,
                    start,
                    end: ArcEnd::Unterminated,
                    arclength: length,
                    seed_angle: dir.arg(),
                });
            }
            if !self.inside_box(st.z) {
                return Err(Error::ArcEscapedBox { re: st.z.re, im: st.z.im });
            }
            // Level-set tangent, oriented along the previous direction.
            let hp = self.sf.derivative(st.z, st.y);
            let mut t = C64::new(0.0, 1.0) * hp.conj();
            t /= t.norm();
            if (t * tangent.conj()).re < 0.0 {
                t = -t;
            }
            let local = h_step.min(0.2 * dist).max(1e-12 * diam);
            let pred = self.advance(st, st.z + t * local);
            match self.correct(pred) {
                Some(next) => {
                    let turn = ((next.z - st.z) * tangent.conj()).arg().abs();
                    if turn > 0.15 && h_step > 1e-9 * diam {
                        h_step *= 0.5;
                        continue;
                    }
                    length += (next.z - st.z).norm();
                    tangent = (next.z - st.z) / (next.z - st.z).norm();
                    st = next;
                    points.push(st.z);
                    if turn < 0.03 {
                        h_step = (h_step * 1.5).min(self.step);
                    }
                }
                None => {
                    h_step *= 0.5;
                    if h_step < 1e-10 * diam {
                        return Err(Error::SeedStalled { re: st.z.re, im: st.z.im });
                    }
                }
            }
        }
        Err(Error::SeedStalled { re: st.z.re, im: st.z.im })
    }
}

/// Directions solving `cos(k phi + phi0) = 0` for `phi` in `[0, 2 pi)`.
fn fan(k: f64, phi0: f64, count: usize) -> Vec<f64> {
    (0..count).map(|j| ((PI / 2.0 + j as f64 * PI - phi0) / k).rem_euclid(2.0 * PI)).collect()
}

fn angle_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

/// Predicted launch directions at branch point `m`, with the multiplicity `N0`.
pub fn branch_fan(sf: &SpectralFunction, m: usize, tol_coincide: f64) -> (usize, Vec<f64>) {
    let e = sf.curve.branch_points();
    let em = e[m];
    let (close, far): (Vec<C64>, Vec<C64>) = sf.mean.lambda_tilde.iter().partition(|l| (*l - em).norm() < tol_coincide);
    let n0 = close.len();
    let num: C64 = far.iter().map(|l| em - l).product();
    let den: C64 = e.iter().enumerate().filter(|(k, _)| *k != m).map(|(_, ek)| em - ek).product();
    let c = num / den.sqrt();
    let k = n0 as f64 + 0.5;
    (n0, fan(k, c.arg(), 2 * n0 + 1))
}

/// Trace the zero set of `h` from every branch point and every flagged
/// `lambda_tilde` crossing.
pub fn trace_arcs(sf: &SpectralFunction, bbox: [f64; 4], cfg: &TraceConfig) -> Result<SpectrumResult> {
    let curve = &sf.curve;
    let e = curve.branch_points().to_vec();
    let diam = curve.spec.diameter();
    let step = cfg.step * diam;
    let tol_coincide = 1e-6 * diam;
    let branch_h = sf.branch_values()?;
    let h_tol = (10.0 * sf.mean.error).max(1e-6);

    let mut crossings = Vec::new();
    let lt = sf.mean.lambda_tilde.clone();
    for (j, &l) in lt.iter().enumerate() {
        let sep = e.iter().map(|x| (x - l).norm()).fold(f64::INFINITY, f64::min);
        let multiplicity = lt.iter().filter(|o| (*o - l).norm() < tol_coincide).count();
        let ambiguous = sep >= tol_coincide && sep < 1e3 * tol_coincide;
        let h = if sep < tol_coincide {
            0.0
        } else if curve.cut_clearance(l) < 1e-9 * diam {
            sf.h_side(l, C64::new(0.0, 1.0))?
        } else {
            sf.h(l)?
        };
        let flagged = sep >= 1e3 * tol_coincide && h.abs() < h_tol;
        crossings.push(Crossing {
            index: j,
            z: l,
            h,
            flagged,
            multiplicity,
            ambiguous,
        });
    }
    let crossing_points: Vec<(usize, C64)> = crossings
        .iter()
        .filter(|c| c.flagged)
        .filter(|c| lt[..c.index].iter().all(|o| (*o - c.z).norm() >= tol_coincide))
        .map(|c| (c.index, c.z))
        .collect();

    // Arcs leave and reach branch points along straight rays; keeping the
    // chord short holds its deviation from the level set small.
    let near_branch = (1e-4 * diam).min(step);
    let tracer = Tracer {
        sf,
        step,
        tol_arc: cfg.tol_arc,
        max_steps: cfg.max_steps,
        capture: 3.0 * step,
        branch_capture: near_branch,
        bbox,
        margin: 1e-6 * diam.max(1.0),
        crossing_points: crossing_points.clone(),
    };
    let mut arcs: Vec<Arc> = Vec::new();
    let seed_r = 2.0 * near_branch;

    let arrivals = |arcs: &[Arc], at: ArcEnd| -> Vec<f64> {
        let mut v = Vec::new();
        for a in arcs {
            if a.start == at {
                if let Some(t) = a.start_tangent(0.9 * seed_r) {
                    v.push(t);
                }
            }
            if a.end == at {
                if let Some(t) = a.end_tangent(0.9 * seed_r) {
                    v.push(t);
                }
            }
        }
        v
    };

    for m in 0..e.len() {
        let (_, dirs) = branch_fan(sf, m, tol_coincide);
        for phi in dirs {
            let taken = arrivals(&arcs, ArcEnd::BranchPoint(m));
            if taken.iter().any(|t| angle_gap(*t, phi) < 0.35) {
                continue;
            }
            let dir = C64::from_polar(1.0, phi);
            let st = seed_state(&tracer, e[m], dir, seed_r)?;
            let st = tracer.correct(st).ok_or(Error::SeedStalled { re: st.z.re, im: st.z.im })?;
            let arc = tracer.trace(e[m], ArcEnd::BranchPoint(m), st, dir, &arcs)?;
            arcs.push(arc);
        }
    }

    for &(j, l) in &crossing_points {
        let m0 = crossings[j].multiplicity;
        let y0 = curve.sqrt_r(l);
        let h0 = if curve.cut_clearance(l) < 1e-9 * diam {
            sf.h_complex_side(l, C64::new(0.0, 1.0))?
        } else {
            sf.h_complex(l)?
        };
        // Near the crossing H - H(l) ~ C (z - l)^{M0 + 1}.
        let others: C64 = lt.iter().filter(|o| (*o - l).norm() >= tol_coincide).map(|o| l - o).product();
        let c = others / y0;
        for phi in fan(m0 as f64 + 1.0, c.arg(), 2 * m0 + 2) {
            let taken = arrivals(&arcs, ArcEnd::CrossingLambda(j));
            if taken.iter().any(|t| angle_gap(*t, phi) < 0.35) {
                continue;
            }
            let dir = C64::from_polar(1.0, phi);
            let st0 = State { z: l, y: y0, h: h0 };
            let st = tracer.advance(st0, l + dir * seed_r);
            let st = tracer.correct(st).ok_or(Error::SeedStalled { re: st.z.re, im: st.z.im })?;
            let arc = tracer.trace(l, ArcEnd::CrossingLambda(j), st, dir, &arcs)?;
            arcs.push(arc);
        }
    }

    Ok(SpectrumResult {
        arcs,
        lambda_tilde: lt,
        crossings,
        bbox,
        branch_h,
    })
}

/// State at `E_m + r dir` with `H(E_m) = 0`, integrating along the ray with the
/// local factorization `y = (z - E_m)^{1/2} q(z)^{1/2}`.
fn seed_state(tracer: &Tracer, em: C64, dir: C64, r: f64) -> Result<State> {
    let sf = tracer.sf;
    let others: Vec<C64> = sf.curve.branch_points().iter().copied().filter(|x| *x != em).collect();
    let q = |z: C64| others.iter().map(|x| z - x).product::<C64>();
    let d = dir * r;
    let sd = d.sqrt();
    let rule = gauss_legendre(32);
    let mut nodes: Vec<(f64, f64)> = rule.nodes.iter().zip(rule.weights.iter()).map(|(x, w)| (0.5 * (x + 1.0), 0.5 * w)).collect();
    nodes.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut sq = q(em).sqrt();
    let mut acc = C64::new(0.0, 0.0);
    // z = E_m + d s^2, dz = 2 d s ds, y = s sqrt(d) sqrt(q).
    for (s, w) in nodes {
        let z = em + d * (s * s);
        let cand = q(z).sqrt();
        sq = if (cand - sq).norm() <= (cand + sq).norm() { cand } else { -cand };
        acc += 2.0 * poly::eval(&sf.mean_poly, z) / (sd * sq) * (2.0 * d) * w;
    }
    let z1 = em + d;
    let cand = q(z1).sqrt();
    sq = if (cand - sq).norm() <= (cand + sq).norm() { cand } else { -cand };
    Ok(State { z: z1, y: sd * sq, h: acc })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::c64;
    use crate::curve::Curve;
    use crate::spectrum::MeanData;

    #[test]
    fn genus_zero_arc_is_the_segment() {
        let (e0, e1) = (c64(-0.4, 0.9), c64(1.7, -0.3));
        let curve = Curve::from_points(&[e0, e1]).unwrap();
        let md = MeanData::from_means(vec![c64(1.0, 0.0)], 0, 0.0).unwrap();
        let sf = SpectralFunction::new(&curve, &md, 1e-12).unwrap();
        let (a, b) = ((e1 - e0) / 4.0, (e0 + e1) / 2.0);
        let bbox = crate::spectrum::bounding_box(&crate::toda::CoefficientWindow::constant(0, 4, a, b).unwrap());
        let res = trace_arcs(&sf, bbox, &TraceConfig::default()).unwrap();
        assert_eq!(res.arcs.len(), 1);
        let arc = &res.arcs[0];
        assert_eq!((arc.start, arc.end), (ArcEnd::BranchPoint(0), ArcEnd::BranchPoint(1)));
        for p in &arc.points {
            assert!(crate::curve::point_segment_distance(*p, e0, e1) < 1e-9);
        }
    }

    #[test]
    fn fan_directions_solve_the_cosine_condition() {
        for (k, phi0) in [(0.5, 0.3), (1.5, -2.0), (2.0, 1.0)] {
            for phi in fan(k, phi0, (2.0 * k) as usize + 1) {
                assert!((k * phi + phi0).cos().abs() < 1e-12);
            }
        }
    }
}
