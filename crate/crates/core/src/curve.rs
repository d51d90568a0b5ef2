//! The hyperelliptic curve `y^2 = R(z) = prod (z - E_m)`, its straight-segment
//! cut system, and branch-consistent evaluation of `y`.
//!
//! Sheet convention: the branch of `y` that behaves like `+z^{p+1}` at infinity
//! in the cut plane is called the plus sheet. The point at infinity on the
//! plus sheet is `P_{inf-}`; `P_{inf+}` lies on the minus sheet, where
//! `y ~ -z^{p+1}`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::C64;

/// Relative minimum separation of branch points (times the diameter of the set).
pub const SEPARATION_FACTOR: f64 = 1e-6;

/// Validated branch points of a nonsingular hyperelliptic curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSpec {
    branch_points: Vec<C64>,
    genus: usize,
}

impl CurveSpec {
    pub fn new(branch_points: Vec<C64>) -> Result<Self> {
        let n = branch_points.len();
        if n < 2 || !n.is_multiple_of(2) {
            return Err(Error::InvalidCurve(format!("need an even number >= 2 of branch points, got {n}")));
        }
        if let Some(index) = branch_points.iter().position(|e| !e.is_finite()) {
            return Err(Error::NonFiniteBranchPoint { index });
        }
        let diam = diameter(&branch_points);
        let eps = SEPARATION_FACTOR * diam;
        for j in 0..n {
            for i in 0..j {
                if (branch_points[i] - branch_points[j]).norm() <= eps {
                    return Err(Error::BranchPointsTooClose { i, j, eps });
                }
            }
        }
        Ok(Self {
            genus: n / 2 - 1,
            branch_points,
        })
    }

    pub fn branch_points(&self) -> &[C64] {
        &self.branch_points
    }

    pub fn genus(&self) -> usize {
        self.genus
    }

    pub fn diameter(&self) -> f64 {
        diameter(&self.branch_points)
    }

    pub fn max_modulus(&self) -> f64 {
        self.branch_points.iter().map(|e| e.norm()).fold(0.0, f64::max)
    }

    /// `R(z) = prod_m (z - E_m)`.
    pub fn eval_r(&self, z: C64) -> C64 {
        self.branch_points.iter().fold(C64::new(1.0, 0.0), |acc, &e| acc * (z - e))
    }

    /// Ascending coefficients of `R`.
    pub fn r_coefficients(&self) -> Vec<C64> {
        crate::poly::from_roots(&self.branch_points)
    }

    /// Power sums `(1/2) sum_m E_m^k`, used by the trace formulas.
    pub fn half_power_sum(&self, k: i32) -> C64 {
        self.branch_points.iter().map(|e| e.powi(k)).sum::<C64>() * 0.5
    }
}

fn diameter(points: &[C64]) -> f64 {
    let mut d = 0.0f64;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            d = d.max((a - b).norm());
        }
    }
    d
}

/// Pairs of branch-point indices, one pair per cut.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CutSystem {
    pub pairs: Vec<[usize; 2]>,
}

/// Orientation of the triple (a, b, c): positive when counterclockwise.
fn orient(a: C64, b: C64, c: C64) -> f64 {
    let u = b - a;
    let v = c - a;
    u.re * v.im - u.im * v.re
}

fn on_segment(a: C64, b: C64, c: C64, eps: f64) -> bool {
    c.re >= a.re.min(b.re) - eps && c.re <= a.re.max(b.re) + eps && c.im >= a.im.min(b.im) - eps && c.im <= a.im.max(b.im) + eps
}

/// Closed-segment intersection test (touching counts).
pub fn segments_intersect(p1: C64, p2: C64, q1: C64, q2: C64) -> bool {
    let scale = [p1, p2, q1, q2].iter().map(|z| z.norm()).fold(1.0, f64::max);
    let eps = 1e-14 * scale * scale;
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    if ((d1 > eps && d2 < -eps) || (d1 < -eps && d2 > eps)) && ((d3 > eps && d4 < -eps) || (d3 < -eps && d4 > eps)) {
        return true;
    }
    let tol = 1e-14 * scale;
    (d1.abs() <= eps && on_segment(q1, q2, p1, tol))
        || (d2.abs() <= eps && on_segment(q1, q2, p2, tol))
        || (d3.abs() <= eps && on_segment(p1, p2, q1, tol))
        || (d4.abs() <= eps && on_segment(p1, p2, q2, tol))
}

/// Distance from `z` to the closed segment `[a, b]`.
pub fn point_segment_distance(z: C64, a: C64, b: C64) -> f64 {
    let d = b - a;
    let len2 = d.norm_sqr();
    if len2 == 0.0 {
        return (z - a).norm();
    }
    let t = (((z - a) * d.conj()).re / len2).clamp(0.0, 1.0);
    (z - (a + d * t)).norm()
}

fn matching_crosses(points: &[C64], pairs: &[[usize; 2]]) -> bool {
    for (i, a) in pairs.iter().enumerate() {
        for b in &pairs[i + 1..] {
            if segments_intersect(points[a[0]], points[a[1]], points[b[0]], points[b[1]]) {
                return true;
            }
        }
    }
    false
}

fn matching_length(points: &[C64], pairs: &[[usize; 2]]) -> f64 {
    pairs.iter().map(|c| (points[c[0]] - points[c[1]]).norm()).sum()
}

fn enumerate_matchings(rest: &mut Vec<usize>, current: &mut Vec<[usize; 2]>, visit: &mut dyn FnMut(&[[usize; 2]])) {
    if rest.is_empty() {
        visit(current);
        return;
    }
    let first = rest.remove(0);
    for k in 0..rest.len() {
        let partner = rest.remove(k);
        current.push([first, partner]);
        enumerate_matchings(rest, current, visit);
        current.pop();
        rest.insert(k, partner);
    }
    rest.insert(0, first);
}

impl CutSystem {
    /// Lexicographic pairing, with a minimum-length non-crossing fallback.
    pub fn default_for(spec: &CurveSpec) -> Result<Self> {
        let pts = spec.branch_points();
        let mut order: Vec<usize> = (0..pts.len()).collect();
        order.sort_by(|&i, &j| pts[i].re.total_cmp(&pts[j].re).then(pts[i].im.total_cmp(&pts[j].im)));
        let pairs: Vec<[usize; 2]> = order.chunks(2).map(|c| [c[0], c[1]]).collect();
        if !matching_crosses(pts, &pairs) {
            return Ok(Self { pairs });
        }
        let p = spec.genus();
        if p <= 4 {
            let mut best: Option<(f64, Vec<[usize; 2]>)> = None;
            let mut rest: Vec<usize> = order.clone();
            enumerate_matchings(&mut rest, &mut Vec::new(), &mut |m| {
                if !matching_crosses(pts, m) {
                    let len = matching_length(pts, m);
                    if best.as_ref().is_none_or(|(l, _)| len < *l) {
                        best = Some((len, m.to_vec()));
                    }
                }
            });
            return best.map(|(_, pairs)| Self { pairs }).ok_or(Error::CutConstructionFailed);
        }
        Self::greedy_repair(pts, pairs)
    }

    fn greedy_repair(pts: &[C64], mut pairs: Vec<[usize; 2]>) -> Result<Self> {
        for _ in 0..(pairs.len() * pairs.len() * 20) {
            let mut found = None;
            'outer: for i in 0..pairs.len() {
                for j in i + 1..pairs.len() {
                    let (a, b) = (pairs[i], pairs[j]);
                    if segments_intersect(pts[a[0]], pts[a[1]], pts[b[0]], pts[b[1]]) {
                        found = Some((i, j));
                        break 'outer;
                    }
                }
            }
            let Some((i, j)) = found else { return Ok(Self { pairs }) };
            let (a, b) = (pairs[i], pairs[j]);
            // Of the two alternative re-pairings, take the shorter one.
            let alt1 = ([a[0], b[0]], [a[1], b[1]]);
            let alt2 = ([a[0], b[1]], [a[1], b[0]]);
            let len = |x: ([usize; 2], [usize; 2])| (pts[x.0[0]] - pts[x.0[1]]).norm() + (pts[x.1[0]] - pts[x.1[1]]).norm();
            let pick = if len(alt1) <= len(alt2) { alt1 } else { alt2 };
            pairs[i] = pick.0;
            pairs[j] = pick.1;
        }
        Err(Error::CutConstructionFailed)
    }

    /// Validate an explicitly supplied cut system.
    pub fn explicit(spec: &CurveSpec, pairs: Vec<[usize; 2]>) -> Result<Self> {
        let n = spec.branch_points().len();
        if pairs.len() != n / 2 {
            return Err(Error::InvalidCuts(format!("expected {} cuts, got {}", n / 2, pairs.len())));
        }
        let mut seen = vec![false; n];
        for (k, c) in pairs.iter().enumerate() {
            for &i in c {
                if i >= n {
                    return Err(Error::InvalidCuts(format!("cut {k} references branch point {i} out of range")));
                }
                if seen[i] {
                    return Err(Error::InvalidCuts(format!("branch point {i} appears in more than one cut (cut {k})")));
                }
                seen[i] = true;
            }
        }
        let pts = spec.branch_points();
        for (i, a) in pairs.iter().enumerate() {
            for (j, b) in pairs.iter().enumerate().skip(i + 1) {
                if segments_intersect(pts[a[0]], pts[a[1]], pts[b[0]], pts[b[1]]) {
                    return Err(Error::InvalidCuts(format!("cuts {i} and {j} intersect")));
                }
            }
        }
        Ok(Self { pairs })
    }
}

/// A point on the curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfacePoint {
    pub z: C64,
    pub y: C64,
}

impl SurfacePoint {
    /// The image under the sheet exchange `(z, y) -> (z, -y)`.
    pub fn star(self) -> Self {
        Self { z: self.z, y: -self.y }
    }
}

/// Polyline in the z-plane together with the point anchoring the branch of `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfacePath {
    pub nodes: Vec<C64>,
    pub start: SurfacePoint,
}

#[derive(Debug, Clone, Copy)]
struct Cut {
    a: C64,
    b: C64,
    mid: C64,
}

/// Curve together with its cut system; all branch-sensitive evaluation lives here.
#[derive(Debug, Clone)]
pub struct Curve {
    pub spec: CurveSpec,
    pub cuts: CutSystem,
    cut_geom: Vec<Cut>,
    separation: Vec<f64>,
    tol_curve: f64,
}

impl Curve {
    pub fn new(spec: CurveSpec, cuts: CutSystem) -> Self {
        let pts = spec.branch_points();
        let cut_geom = cuts
            .pairs
            .iter()
            .map(|c| Cut {
                a: pts[c[0]],
                b: pts[c[1]],
                mid: (pts[c[0]] + pts[c[1]]) * 0.5,
            })
            .collect();
        let separation = (0..pts.len())
            .map(|m| {
                (0..pts.len())
                    .filter(|&k| k != m)
                    .map(|k| (pts[k] - pts[m]).norm())
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        Self {
            spec,
            cuts,
            cut_geom,
            separation,
            tol_curve: 1e-10,
        }
    }

    /// Curve with the default cut system.
    pub fn with_default_cuts(spec: CurveSpec) -> Result<Self> {
        let cuts = CutSystem::default_for(&spec)?;
        Ok(Self::new(spec, cuts))
    }

    pub fn from_points(points: &[C64]) -> Result<Self> {
        Self::with_default_cuts(CurveSpec::new(points.to_vec())?)
    }

    pub fn genus(&self) -> usize {
        self.spec.genus()
    }

    pub fn branch_points(&self) -> &[C64] {
        self.spec.branch_points()
    }

    pub fn eval_r(&self, z: C64) -> C64 {
        self.spec.eval_r(z)
    }

    /// Endpoints of cut `j` (cuts are numbered from 0; cut `p` is the last one).
    pub fn cut_endpoints(&self, j: usize) -> (C64, C64) {
        (self.cut_geom[j].a, self.cut_geom[j].b)
    }

    pub fn cut_count(&self) -> usize {
        self.cut_geom.len()
    }

    /// Index of the cut containing branch point `m`.
    pub fn cut_of(&self, m: usize) -> usize {
        self.cuts.pairs.iter().position(|c| c.contains(&m)).expect("every branch point lies in one cut")
    }

    /// Distance from `z` to the nearest branch point.
    pub fn branch_clearance(&self, z: C64) -> f64 {
        self.branch_points().iter().map(|e| (z - e).norm()).fold(f64::INFINITY, f64::min)
    }

    /// Distance from branch point `m` to its nearest neighbour.
    pub fn separation(&self, m: usize) -> f64 {
        self.separation[m]
    }

    /// Distance from `z` to the nearest cut segment.
    pub fn cut_clearance(&self, z: C64) -> f64 {
        self.cut_geom.iter().map(|c| point_segment_distance(z, c.a, c.b)).fold(f64::INFINITY, f64::min)
    }

    /// `R^{1/2}` on the plus sheet: holomorphic off the cuts and `~ +z^{p+1}`.
    ///
    /// Each cut contributes `w sqrt(q / w^2)` with `w = z - mid`, `q = (z-a)(z-b)`;
    /// the principal root has its branch cut exactly on the segment `[a, b]`.
    pub fn sqrt_r(&self, z: C64) -> C64 {
        let mut acc = C64::new(1.0, 0.0);
        for c in &self.cut_geom {
            let w = z - c.mid;
            let q = (z - c.a) * (z - c.b);
            if w.norm() == 0.0 {
                acc *= (-((c.b - c.a) * 0.5).powi(2)).sqrt();
            } else {
                acc *= w * (q / (w * w)).sqrt();
            }
        }
        acc
    }

    /// Sheet sign of `(z, y)` relative to the plus sheet.
    pub fn sheet_of(&self, z: C64, y: C64) -> f64 {
        let s = self.sqrt_r(z);
        if (y - s).norm() <= (y + s).norm() {
            1.0
        } else {
            -1.0
        }
    }

    /// Surface point on the given sheet (+1 or -1).
    pub fn point(&self, z: C64, sheet: f64) -> SurfacePoint {
        SurfacePoint { z, y: self.sqrt_r(z) * sheet }
    }

    pub fn check_point(&self, p: SurfacePoint) -> bool {
        let r = self.eval_r(p.z);
        (p.y * p.y - r).norm() <= self.tol_curve * (1.0 + r.norm())
    }

    /// Reference anchor on the plus sheet used to fix the global branch.
    pub fn anchor(&self) -> SurfacePoint {
        let z = C64::new(2.0 * (1.0 + self.spec.max_modulus()), 0.0);
        let p = self.spec.genus() as i32 + 1;
        let r = self.eval_r(z).sqrt();
        let y = if (r - z.powi(p)).norm() <= (r + z.powi(p)).norm() { r } else { -r };
        SurfacePoint { z, y }
    }

    /// Analytic continuation of `y` along a polyline: at each node the square
    /// root of `R` closer to the previous value is taken; segments are bisected
    /// until each step is shorter than half the distance to the nearest branch
    /// point.
    pub fn continue_y(&self, path: &SurfacePath) -> Result<SurfacePoint> {
        if !self.check_point(path.start) || path.nodes.first().is_none_or(|z| (z - path.start.z).norm() > 1e-12 * (1.0 + z.norm())) {
            return Err(Error::PathInvalid("path does not start at its anchor point".into()));
        }
        let mut z = path.start.z;
        let mut y = path.start.y;
        let scale = 1.0 + self.spec.max_modulus();
        for &target in &path.nodes[1..] {
            while (target - z).norm() > 0.0 {
                let clearance = self.branch_clearance(z);
                let remaining = target - z;
                let step_len = remaining.norm().min(0.5 * clearance);
                if step_len < 1e-14 * scale {
                    return Err(Error::StepTooLarge { re: z.re, im: z.im });
                }
                let next = if step_len >= remaining.norm() {
                    target
                } else {
                    z + remaining * (step_len / remaining.norm())
                };
                let r = self.eval_r(next).sqrt();
                let (d_plus, d_minus) = ((y - r).norm(), (y + r).norm());
                if (d_plus - d_minus).abs() <= 1e-12 * (d_plus + d_minus) {
                    return Err(Error::StepTooLarge { re: next.re, im: next.im });
                }
                y = if d_plus < d_minus { r } else { -r };
                z = next;
            }
        }
        Ok(SurfacePoint { z, y })
    }

    /// True when the open segment (p, q) avoids every cut (touching a cut only
    /// at a shared branch-point endpoint is allowed when leaving transversally).
    pub fn segment_clear(&self, p: C64, q: C64) -> bool {
        let d = q - p;
        let p1 = p + d * 1e-9;
        let q1 = q - d * 1e-9;
        self.cut_geom.iter().all(|c| !segments_intersect(p1, q1, c.a, c.b))
    }

    fn segment_keeps_clearance(&self, p: C64, q: C64) -> bool {
        self.branch_points().iter().enumerate().all(|(m, e)| {
            let guard = 0.2 * self.separation[m];
            if (p - e).norm() < 2.0 * guard || (q - e).norm() < 2.0 * guard {
                return true;
            }
            point_segment_distance(*e, p, q) >= guard
        })
    }

    /// A polyline from `from` to `to` inside the cut plane (no cut crossings),
    /// keeping a margin from branch points that are not path endpoints.
    pub fn plan_path(&self, from: C64, to: C64) -> Result<Vec<C64>> {
        if self.segment_clear(from, to) && self.segment_keeps_clearance(from, to) {
            return Ok(vec![from, to]);
        }
        let pts = self.branch_points();
        let min_sep = self.separation.iter().copied().fold(f64::INFINITY, f64::min);
        let mut nodes = vec![from, to];
        for (m, e) in pts.iter().enumerate() {
            let r = 0.5 * self.separation[m];
            for k in 0..8 {
                let w = e + C64::from_polar(r, std::f64::consts::PI * (k as f64 + 0.5) / 4.0);
                if self.cut_clearance(w) > 0.05 * min_sep && self.branch_clearance(w) > 0.3 * min_sep.min(r) {
                    nodes.push(w);
                }
            }
        }
        let n = nodes.len();
        let mut dist = vec![f64::INFINITY; n];
        let mut prev = vec![usize::MAX; n];
        let mut done = vec![false; n];
        dist[0] = 0.0;
        let mut heap = BinaryHeap::new();
        heap.push(HeapItem(0.0, 0));
        while let Some(HeapItem(d, u)) = heap.pop() {
            if done[u] {
                continue;
            }
            done[u] = true;
            if u == 1 {
                break;
            }
            for v in 0..n {
                if done[v] || v == u {
                    continue;
                }
                let len = (nodes[u] - nodes[v]).norm();
                if d + len >= dist[v] {
                    continue;
                }
                if self.segment_clear(nodes[u], nodes[v]) && self.segment_keeps_clearance(nodes[u], nodes[v]) {
                    dist[v] = d + len;
                    prev[v] = u;
                    heap.push(HeapItem(d + len, v));
                }
            }
        }
        if !dist[1].is_finite() {
            return Err(Error::PathBlocked);
        }
        let mut out = vec![to];
        let mut cur = 1;
        while prev[cur] != usize::MAX {
            cur = prev[cur];
            out.push(nodes[cur]);
        }
        out.reverse();
        Ok(out)
    }

    /// Index of the branch point at `z`, if `z` coincides with one.
    pub fn branch_index(&self, z: C64) -> Option<usize> {
        let tol = 1e-13 * (1.0 + self.spec.max_modulus());
        self.branch_points().iter().position(|e| (z - e).norm() <= tol)
    }
}

#[derive(PartialEq)]
struct HeapItem(f64, usize);
impl Eq for HeapItem {}
impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::c64;
    use proptest::prelude::*;

    fn real(v: &[f64]) -> Vec<C64> {
        v.iter().map(|&x| c64(x, 0.0)).collect()
    }

    #[test]
    fn eval_r_examples() {
        let s = CurveSpec::new(real(&[-1.0, 1.0])).unwrap();
        assert_eq!(s.eval_r(c64(0.0, 0.0)), c64(-1.0, 0.0));
        assert_eq!(s.eval_r(c64(1.0, 0.0)), c64(0.0, 0.0));
        let s = CurveSpec::new(real(&[-2.0, -1.0, 1.0, 2.0])).unwrap();
        assert_eq!(s.eval_r(c64(0.0, 0.0)), c64(4.0, 0.0));
        assert_eq!(s.genus(), 1);
    }

    #[test]
    fn duplicate_branch_points_name_the_index() {
        let err = CurveSpec::new(real(&[0.0, 1.0, 2.0, 1.0])).unwrap_err();
        assert_eq!(err, Error::BranchPointsTooClose { i: 1, j: 3, eps: 2e-6 });
        assert!(matches!(CurveSpec::new(real(&[0.0, 1.0, 2.0])), Err(Error::InvalidCurve(_))));
    }

    #[test]
    fn default_cuts_examples() {
        let s = CurveSpec::new(real(&[-1.0, 1.0])).unwrap();
        assert_eq!(CutSystem::default_for(&s).unwrap().pairs, vec![[0, 1]]);
        let s = CurveSpec::new(real(&[-2.0, -1.0, 1.0, 2.0])).unwrap();
        assert_eq!(CutSystem::default_for(&s).unwrap().pairs, vec![[0, 1], [2, 3]]);
        // Lexicographic pairing gives (0, i) and (1, 1+i): vertical and disjoint.
        let s = CurveSpec::new(vec![c64(0.0, 0.0), c64(1.0, 0.0), c64(0.0, 1.0), c64(1.0, 1.0)]).unwrap();
        let mut pairs = CutSystem::default_for(&s).unwrap().pairs;
        for p in pairs.iter_mut() {
            p.sort();
        }
        pairs.sort();
        assert_eq!(pairs, vec![[0, 2], [1, 3]]);
    }

    #[test]
    fn crossing_pairing_falls_back_to_shortest_disjoint_matching() {
        // Sorted order pairs (0,2) and (1,3), which cross at the origin.
        let s = CurveSpec::new(vec![c64(-1.0, -0.1), c64(-0.9, 1.0), c64(1.0, 0.1), c64(0.9, -1.0)]).unwrap();
        let cs = CutSystem::default_for(&s).unwrap();
        assert!(!matching_crosses(s.branch_points(), &cs.pairs));
    }

    #[test]
    fn explicit_cuts_validation() {
        let s = CurveSpec::new(real(&[-2.0, -1.0, 1.0, 2.0])).unwrap();
        assert!(CutSystem::explicit(&s, vec![[0, 2], [1, 3]]).is_err());
        assert!(CutSystem::explicit(&s, vec![[0, 1], [1, 3]]).is_err());
        assert!(CutSystem::explicit(&s, vec![[0, 3], [1, 2]]).is_err());
        assert!(CutSystem::explicit(&s, vec![[0, 1], [2, 3]]).is_ok());
    }

    #[test]
    fn sqrt_r_branch_and_anchor() {
        let c = Curve::from_points(&real(&[-1.0, 1.0])).unwrap();
        assert!((c.sqrt_r(c64(10.0, 0.0)) - 99f64.sqrt()).norm() < 1e-12);
        let path = SurfacePath {
            nodes: vec![c64(10.0, 0.0), c64(10.0, 0.0)],
            start: c.point(c64(10.0, 0.0), 1.0),
        };
        let end = c.continue_y(&path).unwrap();
        assert!((end.y - 99f64.sqrt()).norm() < 1e-12);
        let a = c.anchor();
        assert!((a.y - c.sqrt_r(a.z)).norm() < 1e-12);
    }

    #[test]
    fn loop_monodromy() {
        let c = Curve::from_points(&[c64(-1.0, 0.2), c64(0.5, -0.3), c64(1.5, 0.1), c64(2.5, 0.4)]).unwrap();
        let circle = |center: C64, r: f64| -> Vec<C64> { (0..=64).map(|k| center + C64::from_polar(r, k as f64 * std::f64::consts::TAU / 64.0)).collect() };
        let e = c.branch_points()[0];
        let nodes = circle(e, 0.3);
        let start = c.point(nodes[0], 1.0);
        let end = c.continue_y(&SurfacePath { nodes: nodes.clone(), start }).unwrap();
        assert!((end.y + start.y).norm() < 1e-9 * start.y.norm());
        let (a, b) = c.cut_endpoints(0);
        let nodes = circle((a + b) * 0.5, 1.2 * (a - b).norm() * 0.5 + 0.05);
        let start = c.point(nodes[0], 1.0);
        let end = c.continue_y(&SurfacePath { nodes, start }).unwrap();
        assert!((end.y - start.y).norm() < 1e-9 * start.y.norm());
    }

    #[test]
    fn sqrt_r_agrees_with_continuation_off_cuts() {
        let c = Curve::from_points(&[c64(-2.0, 0.0), c64(-1.0, 0.3), c64(0.5, -0.2), c64(1.0, 1.0), c64(2.0, 0.0), c64(3.0, -0.5)]).unwrap();
        let anchor = c.anchor();
        for &target in &[c64(0.1, 2.0), c64(-3.0, -1.0), c64(0.0, 0.0)] {
            let nodes = c.plan_path(anchor.z, target).unwrap();
            let end = c.continue_y(&SurfacePath { nodes, start: anchor }).unwrap();
            assert!((end.y - c.sqrt_r(target)).norm() < 1e-9 * (1.0 + end.y.norm()), "{target}");
        }
    }

    #[test]
    fn planned_paths_avoid_cuts() {
        let c = Curve::from_points(&real(&[-2.0, -1.0, 1.0, 2.0])).unwrap();
        // Straight segment from -1.5+0.5i to -1.5-0.5i crosses the cut [-2,-1].
        let path = c.plan_path(c64(-1.5, 0.5), c64(-1.5, -0.5)).unwrap();
        assert!(path.len() > 2);
        for w in path.windows(2) {
            assert!(c.segment_clear(w[0], w[1]));
        }
        // Leaving a branch point along its own cut is not allowed.
        assert!(!c.segment_clear(c64(-2.0, 0.0), c64(-1.5, 0.0)));
        assert!(c.segment_clear(c64(-2.0, 0.0), c64(-2.0, 1.0)));
    }

    proptest! {
        #[test]
        fn curve_points_satisfy_equation_and_involution(x in -4.0f64..4.0, y in -4.0f64..4.0) {
            let c = Curve::from_points(&[c64(-1.5, 0.2), c64(-0.5, -0.4), c64(0.7, 0.3), c64(1.9, -0.1)]).unwrap();
            let z = c64(x, y);
            let p = c.point(z, 1.0);
            prop_assert!(c.check_point(p));
            prop_assert!(c.check_point(p.star()));
        }

        #[test]
        fn small_loops_flip_sign_by_winding_parity(cx in -3.0f64..3.0, cy in -3.0f64..3.0, r in 0.05f64..1.5) {
            let c = Curve::from_points(&[c64(-1.0, 0.0), c64(0.0, 0.5), c64(1.0, -0.5), c64(2.0, 0.3)]).unwrap();
            let center = c64(cx, cy);
            let d = c.branch_points().iter().map(|e| ((e - center).norm() - r).abs()).fold(f64::INFINITY, f64::min);
            prop_assume!(d > 0.02);
            let nodes: Vec<C64> = (0..=128).map(|k| center + C64::from_polar(r, k as f64 * std::f64::consts::TAU / 128.0)).collect();
            let start = c.point(nodes[0], 1.0);
            let end = c.continue_y(&SurfacePath { nodes, start }).unwrap();
            let enclosed = c.branch_points().iter().filter(|e| (*e - center).norm() < r).count();
            let expected = if enclosed % 2 == 0 { start.y } else { -start.y };
            prop_assert!((end.y - expected).norm() < 1e-8 * (1.0 + start.y.norm()));
        }
    }
}
