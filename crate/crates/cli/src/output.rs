//! Number formatting, atomic file writes, branch CSV tables, JSON with
//! round-trip floats and SVG diagrams.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::CliError;

/// 17 significant digits, exact for every finite double.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt17(x: Option<f64>) -> String {
    match x {
        Some(v) if v.is_finite() => fmt17(v),
        _ => String::new(),
    }
}

/// Writes `contents` to `path` through a temporary file in the same
/// directory, renamed into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(contents).map_err(io)?;
    tmp.flush().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

/// Writes to `path`, or to standard output when there is none.
pub fn emit(path: Option<&Path>, contents: &[u8]) -> Result<(), CliError> {
    match path {
        Some(p) => write_atomic(p, contents),
        None => std::io::stdout().write_all(contents).map_err(|e| CliError::Io(format!("stdout: {e}"))),
    }
}

struct Round17;

impl serde_json::ser::Formatter for Round17 {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        writer.write_all(fmt17(value).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> std::io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

/// JSON with every float printed to 17 significant digits; non-finite
/// floats become `null`.
pub fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, Round17);
    value.serialize(&mut ser).expect("report serializes");
    out.push(b'\n');
    out
}

pub const BRANCH_HEADER: [&str; 10] =
    ["index", "lambda", "gamma", "sigma", "arclength", "sup_u", "sup_v", "eta1", "newton_iters", "residual"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BranchRow {
    pub index: usize,
    pub lambda: f64,
    pub gamma: Option<f64>,
    pub sigma: Option<f64>,
    pub arclength: f64,
    pub sup_u: f64,
    pub sup_v: Option<f64>,
    pub eta1: Option<f64>,
    pub newton_iters: usize,
    pub residual: f64,
}

/// A branch table: `#` metadata lines, the header, one row per point.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchTable {
    pub meta: Vec<String>,
    pub rows: Vec<BranchRow>,
}

impl BranchTable {
    pub fn to_csv(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for m in &self.meta {
            out.extend_from_slice(format!("# {m}\n").as_bytes());
        }
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(&mut out);
        w.write_record(BRANCH_HEADER).expect("in-memory write");
        for r in &self.rows {
            w.write_record([
                r.index.to_string(),
                fmt17(r.lambda),
                opt17(r.gamma),
                opt17(r.sigma),
                fmt17(r.arclength),
                fmt17(r.sup_u),
                opt17(r.sup_v),
                opt17(r.eta1),
                r.newton_iters.to_string(),
                fmt17(r.residual),
            ])
            .expect("in-memory write");
        }
        w.flush().expect("in-memory write");
        drop(w);
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, CliError> {
        let bad = |why: String| CliError::Config(format!("branch CSV: {why}"));
        let meta: Vec<String> = text
            .lines()
            .take_while(|l| l.starts_with('#'))
            .map(|l| l.trim_start_matches('#').trim_start().to_string())
            .collect();
        let mut rd = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
        let header = rd.headers().map_err(|e| bad(e.to_string()))?;
        if header.iter().ne(BRANCH_HEADER) {
            return Err(bad(format!("unexpected header {header:?}")));
        }
        let num = |s: &str| -> Result<f64, CliError> { s.parse().map_err(|e| bad(format!("`{s}`: {e}"))) };
        let opt = |s: &str| -> Result<Option<f64>, CliError> { if s.is_empty() { Ok(None) } else { num(s).map(Some) } };
        let int = |s: &str| -> Result<usize, CliError> { s.parse().map_err(|e| bad(format!("`{s}`: {e}"))) };
        let mut rows = Vec::new();
        for rec in rd.records() {
            let r = rec.map_err(|e| bad(e.to_string()))?;
            rows.push(BranchRow {
                index: int(&r[0])?,
                lambda: num(&r[1])?,
                gamma: opt(&r[2])?,
                sigma: opt(&r[3])?,
                arclength: num(&r[4])?,
                sup_u: num(&r[5])?,
                sup_v: opt(&r[6])?,
                eta1: opt(&r[7])?,
                newton_iters: int(&r[8])?,
                residual: num(&r[9])?,
            });
        }
        Ok(Self { meta, rows })
    }
}

/// A line diagram: one polyline, optional marked point, axis labels.
pub struct Diagram<'a> {
    pub title: &'a str,
    pub x_label: &'a str,
    pub y_label: &'a str,
    pub points: Vec<(f64, f64)>,
    pub marker: Option<(f64, f64)>,
}

impl Diagram<'_> {
    pub fn to_svg(&self) -> String {
        let (w, h, pad) = (640.0, 480.0, 60.0);
        let finite: Vec<(f64, f64)> = self.points.iter().copied().filter(|p| p.0.is_finite() && p.1.is_finite()).collect();
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for &(x, y) in finite.iter().chain(self.marker.iter()) {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        if !x0.is_finite() {
            (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
        }
        if x1 - x0 <= 0.0 {
            x1 = x0 + 1.0;
        }
        if y1 - y0 <= 0.0 {
            y1 = y0 + 1.0;
        }
        let sx = |x: f64| pad + (x - x0) / (x1 - x0) * (w - 2.0 * pad);
        let sy = |y: f64| h - pad - (y - y0) / (y1 - y0) * (h - 2.0 * pad);
        let mut s = String::new();
        s += &format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n"
        );
        s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
        s += &format!(
            "<path d=\"M{pad} {pad} V{} H{}\" fill=\"none\" stroke=\"black\"/>\n",
            h - pad,
            w - pad
        );
        s += &format!("<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">{}</text>\n", w / 2.0, self.title);
        s += &format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
            w / 2.0,
            h - 15.0,
            self.x_label
        );
        s += &format!(
            "<text x=\"18\" y=\"{}\" text-anchor=\"middle\" font-size=\"14\" transform=\"rotate(-90 18 {})\">{}</text>\n",
            h / 2.0,
            h / 2.0,
            self.y_label
        );
        for (v, anchor, x, y) in [
            (x0, "start", pad, h - pad + 18.0),
            (x1, "end", w - pad, h - pad + 18.0),
        ] {
            s += &format!("<text x=\"{x}\" y=\"{y}\" text-anchor=\"{anchor}\" font-size=\"11\">{v:.4}</text>\n");
        }
        for (v, y) in [(y0, h - pad), (y1, pad)] {
            s += &format!("<text x=\"{}\" y=\"{y}\" text-anchor=\"end\" font-size=\"11\">{v:.4}</text>\n", pad - 4.0);
        }
        if !finite.is_empty() {
            let pts: Vec<String> = finite.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
            s += &format!("<polyline points=\"{}\" fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.5\"/>\n", pts.join(" "));
        }
        if let Some((x, y)) = self.marker {
            s += &format!("<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"5\" fill=\"crimson\"/>\n", sx(x), sy(y));
        }
        s += "</svg>\n";
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, 1.0 / 3.0, 2.0f64.sqrt() * 1e-300, -123456.789e10, f64::MIN_POSITIVE] {
            let s = fmt17(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
            let mantissa = s.split('e').next().unwrap().replace(['-', '.'], "");
            assert_eq!(mantissa.len(), 17);
        }
    }

    #[test]
    fn csv_round_trip() {
        let t = BranchTable {
            meta: vec!["config {}".into()],
            rows: vec![BranchRow {
                index: 0,
                lambda: 0.1,
                gamma: None,
                sigma: None,
                arclength: 0.0,
                sup_u: 1.0 / 3.0,
                sup_v: None,
                eta1: Some(5.78),
                newton_iters: 3,
                residual: 1e-12,
            }],
        };
        let bytes = t.to_csv();
        let back = BranchTable::from_csv(std::str::from_utf8(&bytes).unwrap()).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.to_csv(), bytes);
    }

    #[test]
    fn json_floats() {
        let s = String::from_utf8(to_json(&serde_json::json!({"a": 0.1, "b": f64::NAN, "c": 3}))).unwrap();
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v["a"].as_f64(), Some(0.1));
        assert!(v["b"].is_null());
        assert!(s.contains("1.0000000000000001e-1"));
    }

    #[test]
    fn svg_has_marker() {
        let d = Diagram { title: "t", x_label: "x", y_label: "y", points: vec![(0.0, 0.0), (1.0, 2.0)], marker: Some((1.0, 2.0)) };
        let s = d.to_svg();
        assert!(s.starts_with("<svg") && s.contains("<circle") && s.contains("<polyline"));
    }
}
