//! File formats: curve and divisor documents (JSON), coefficient windows
//! (CSV), period data and spectra (JSON, with a CSV flattening of arcs).
//!
//! Complex numbers are written as `[re, im]` pairs throughout. CSV readers
//! skip lines starting with `#`, which writers use for a provenance line.

use std::io::{Read, Write};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::curve::{Curve, CurveSpec, CutSystem};
use crate::error::{Error, Result};
use crate::finitegap::DivisorInput;
use crate::periods::{PeriodCertificate, PeriodData};
use crate::spectrum::{ArcEnd, SpectrumResult};
use crate::toda::CoefficientWindow;
use crate::C64;

fn io_err(e: impl std::fmt::Display) -> Error {
    Error::Io(e.to_string())
}

fn pair(z: C64) -> [f64; 2] {
    [z.re, z.im]
}

fn from_pair(p: [f64; 2]) -> C64 {
    C64::new(p[0], p[1])
}

/// The curve input document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveDocument {
    pub branch_points: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cuts: Option<Vec<[usize; 2]>>,
}

impl CurveDocument {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidCurve(format!("malformed curve document: {e}")))
    }

    /// Validate and build the curve. Explicit cuts are checked against the
    /// non-crossing rule; otherwise the default cut system is constructed.
    pub fn to_curve(&self) -> Result<Curve> {
        let spec = CurveSpec::new(self.branch_points.iter().copied().map(from_pair).collect())?;
        let cuts = match &self.cuts {
            Some(pairs) => CutSystem::explicit(&spec, pairs.clone())?,
            None => CutSystem::default_for(&spec)?,
        };
        Ok(Curve::new(spec, cuts))
    }

    /// Normalized document for a constructed curve, with its cuts spelled out.
    pub fn from_curve(curve: &Curve) -> Self {
        Self {
            branch_points: curve.branch_points().iter().copied().map(pair).collect(),
            cuts: Some(curve.cuts.pairs.clone()),
        }
    }
}

pub fn read_curve(text: &str) -> Result<Curve> {
    CurveDocument::from_json(text)?.to_curve()
}

/// The divisor input document: `{"mu": [[re,im],...], "sheet_signs": [...], "n0": int}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DivisorDocument {
    pub mu: Vec<[f64; 2]>,
    pub sheet_signs: Vec<i32>,
    pub n0: i64,
}

impl DivisorDocument {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidDivisor(format!("malformed divisor document: {e}")))
    }

    pub fn to_input(&self) -> Result<DivisorInput> {
        if let Some(k) = self.sheet_signs.iter().position(|s| s.abs() != 1) {
            return Err(Error::InvalidDivisor(format!("sheet sign {k} must be +1 or -1")));
        }
        Ok(DivisorInput {
            mu: self.mu.iter().copied().map(from_pair).collect(),
            sheet_signs: self.sheet_signs.iter().map(|&s| s as f64).collect(),
            n0: self.n0,
        })
    }

    pub fn from_input(d: &DivisorInput) -> Self {
        Self {
            mu: d.mu.iter().copied().map(pair).collect(),
            sheet_signs: d.sheet_signs.iter().map(|&s| if s < 0.0 { -1 } else { 1 }).collect(),
            n0: d.n0,
        }
    }
}

pub fn read_divisor(text: &str) -> Result<DivisorInput> {
    DivisorDocument::from_json(text)?.to_input()
}

#[derive(Debug, Serialize, Deserialize)]
struct CoefficientRow {
    n: i64,
    re_a: f64,
    im_a: f64,
    re_b: f64,
    im_b: f64,
}

/// Write `n,re_a,im_a,re_b,im_b`, optionally preceded by a `# comment` line.
pub fn write_coefficients<W: Write>(mut out: W, window: &CoefficientWindow, comment: Option<&str>) -> Result<()> {
    if let Some(c) = comment {
        writeln!(out, "# {c}").map_err(io_err)?;
    }
    let mut w = csv::Writer::from_writer(out);
    for k in 0..window.len() {
        let n = window.n_lo + k as i64;
        let (a, b) = (window.a[k], window.b[k]);
        w.serialize(CoefficientRow {
            n,
            re_a: a.re,
            im_a: a.im,
            re_b: b.re,
            im_b: b.im,
        })
        .map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

/// Read a coefficient CSV. Sites must be consecutive.
pub fn read_coefficients<R: Read>(input: R) -> Result<CoefficientWindow> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(input);
    let (mut a, mut b) = (Vec::new(), Vec::new());
    let mut n_lo = None;
    for (k, row) in r.deserialize::<CoefficientRow>().enumerate() {
        let row = row.map_err(|e| Error::InvalidConfig(format!("coefficient row {k}: {e}")))?;
        let first = *n_lo.get_or_insert(row.n);
        if row.n != first + k as i64 {
            return Err(Error::InvalidConfig(format!(
                "coefficient row {k}: site {} breaks the consecutive sequence",
                row.n
            )));
        }
        a.push(C64::new(row.re_a, row.im_a));
        b.push(C64::new(row.re_b, row.im_b));
    }
    let n_lo = n_lo.ok_or_else(|| Error::InvalidConfig("coefficient file has no rows".into()))?;
    CoefficientWindow::new(n_lo, a, b)
}

fn matrix_rows(m: &DMatrix<C64>) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| pair(m[(i, j)])).collect()).collect()
}

fn vec_pairs(v: &[C64]) -> Vec<[f64; 2]> {
    v.iter().copied().map(pair).collect()
}

/// Serializable summary of the period data.
#[derive(Debug, Clone, Serialize)]
pub struct PeriodsDocument {
    pub genus: usize,
    pub base_index: usize,
    pub cuts: Vec<[usize; 2]>,
    #[serde(rename = "C")]
    pub c: Vec<Vec<[f64; 2]>>,
    pub tau: Vec<Vec<[f64; 2]>>,
    pub lambda: Vec<[f64; 2]>,
    #[serde(rename = "U0_3")]
    pub u0_3: Vec<[f64; 2]>,
    #[serde(rename = "Xi")]
    pub xi: Vec<[f64; 2]>,
    pub a_inf_plus: Vec<[f64; 2]>,
    pub certificate: PeriodCertificate,
}

impl PeriodsDocument {
    pub fn new(curve: &Curve, data: &PeriodData) -> Self {
        Self {
            genus: data.genus,
            base_index: data.basis.base_index,
            cuts: curve.cuts.pairs.clone(),
            c: matrix_rows(&data.c_matrix),
            tau: matrix_rows(&data.tau),
            lambda: vec_pairs(&data.lambda),
            u0_3: vec_pairs(&data.u0_3),
            xi: vec_pairs(&data.xi),
            a_inf_plus: vec_pairs(&data.a_inf_plus),
            certificate: data.certificate.clone(),
        }
    }
}

/// Flatten arcs to `arc,k,re,im,start,end` rows, one per polyline vertex.
pub fn write_arcs_csv<W: Write>(mut out: W, result: &SpectrumResult, comment: Option<&str>) -> Result<()> {
    fn tag(e: &ArcEnd) -> String {
        match e {
            ArcEnd::BranchPoint(m) => format!("E{m}"),
            ArcEnd::CrossingLambda(j) => format!("lambda{j}"),
            ArcEnd::Unterminated => "none".into(),
        }
    }
    if let Some(c) = comment {
        writeln!(out, "# {c}").map_err(io_err)?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["arc", "k", "re", "im", "start", "end"]).map_err(io_err)?;
    for (i, arc) in result.arcs.iter().enumerate() {
        let (s, e) = (tag(&arc.start), tag(&arc.end));
        for (k, p) in arc.points.iter().enumerate() {
            w.write_record([i.to_string(), k.to_string(), p.re.to_string(), p.im.to_string(), s.clone(), e.clone()])
                .map_err(io_err)?;
        }
    }
    w.flush().map_err(io_err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::c64;

    #[test]
    fn curve_document_round_trip() {
        let doc = CurveDocument::from_json(r#"{"branch_points": [[-2,0],[-1,0],[1,0],[2,0]]}"#).unwrap();
        let curve = doc.to_curve().unwrap();
        assert_eq!(curve.genus(), 1);
        let back = CurveDocument::from_curve(&curve);
        assert_eq!(back.branch_points, doc.branch_points);
        let again = back.to_curve().unwrap();
        assert_eq!(again.cuts, curve.cuts);
    }

    #[test]
    fn duplicate_branch_point_names_both_indices() {
        let err = read_curve(r#"{"branch_points": [[0,0],[1,0],[0,0],[2,0]]}"#).unwrap_err();
        assert!(matches!(err, Error::BranchPointsTooClose { i: 0, j: 2, .. }), "{err:?}");
        assert!(err.is_validation());
    }

    #[test]
    fn unknown_fields_and_odd_counts_are_rejected() {
        assert!(read_curve(r#"{"branch_points": [[0,0],[1,0]], "extra": 1}"#).is_err());
        assert!(read_curve(r#"{"branch_points": [[0,0],[1,0],[2,0]]}"#).is_err());
    }

    #[test]
    fn divisor_signs_are_checked() {
        let d = read_divisor(r#"{"mu": [[0.1, 0.2]], "sheet_signs": [-1], "n0": 3}"#).unwrap();
        assert_eq!((d.mu[0], d.sheet_signs[0], d.n0), (c64(0.1, 0.2), -1.0, 3));
        let err = read_divisor(r#"{"mu": [[0.1, 0.2]], "sheet_signs": [2], "n0": 0}"#).unwrap_err();
        assert!(err.is_validation());
        assert_eq!(DivisorDocument::from_input(&d).sheet_signs, vec![-1]);
    }

    #[test]
    fn coefficient_csv_round_trip_is_exact() {
        let a = vec![c64(0.1, -1e-17), c64(std::f64::consts::PI, 2.5)];
        let b = vec![c64(-3.0, 1.0 / 3.0), c64(1e300, -0.0)];
        let w = CoefficientWindow::new(-7, a, b).unwrap();
        let mut buf = Vec::new();
        write_coefficients(&mut buf, &w, Some("manifest: m.json")).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# manifest: m.json\nn,re_a,im_a,re_b,im_b\n-7,"));
        let back = read_coefficients(buf.as_slice()).unwrap();
        assert_eq!(back, w);
    }

    #[test]
    fn coefficient_gaps_are_rejected() {
        let text = "n,re_a,im_a,re_b,im_b\n0,1,0,0,0\n2,1,0,0,0\n";
        assert!(read_coefficients(text.as_bytes()).is_err());
    }
}
