//! Deterministic JSON and CSV emission.
//!
//! Object keys keep struct declaration order (maps are `BTreeMap`s, hence
//! sorted); floats are written with 17 significant digits. Non-finite
//! floats become `null`.

use std::collections::BTreeMap;
use std::io;

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::error::{Error, Result};
use crate::rng::RNG_NAME;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Module name and version pairs embedded in every report.
pub fn module_versions() -> BTreeMap<&'static str, &'static str> {
    [
        "distributions",
        "lcd",
        "estimators",
        "bounds",
        "logconcave",
        "sodin",
        "stress",
        "verify",
    ]
    .into_iter()
    .map(|m| (m, VERSION))
    .collect()
}

/// Header shared by every emitted document.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub rng: &'static str,
    pub modules: BTreeMap<&'static str, &'static str>,
}

impl Default for Provenance {
    fn default() -> Self {
        Provenance {
            tool: "anticonc",
            version: VERSION,
            rng: RNG_NAME,
            modules: module_versions(),
        }
    }
}

/// `{provenance, command, statement, config, result, rows}` in that order.
///
/// `config` is the effective configuration with every default resolved;
/// `rows` are the checked inequalities, the input of `report`.
#[derive(Debug, Clone, Serialize)]
pub struct Envelope<'a, C: Serialize, R: Serialize> {
    pub provenance: Provenance,
    pub command: &'a str,
    pub statement: &'a str,
    pub config: &'a C,
    pub result: &'a R,
    pub rows: Vec<ReportRow>,
}

impl ReportRow {
    pub fn from_check(prefix: &str, c: &crate::sodin::StepCheck) -> ReportRow {
        ReportRow {
            scenario: format!("{prefix}/{}", c.step),
            lhs: c.lhs,
            rhs: c.rhs,
            ratio: crate::stress::divide(c.lhs, c.rhs),
            pass: c.pass,
        }
    }
}

struct Fixed17<'a>(PrettyFormatter<'a>);

impl Formatter for Fixed17<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Pretty JSON with 17 significant digits per float and a trailing newline.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Fixed17(PrettyFormatter::with_indent(b"  ")));
    value
        .serialize(&mut ser)
        .map_err(|e| Error::Numeric(format!("serialization failed: {e}")))?;
    buf.push(b'\n');
    String::from_utf8(buf).map_err(|e| Error::Numeric(e.to_string()))
}

/// One row of the aggregated CSV report.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct ReportRow {
    pub scenario: String,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub pass: bool,
}

pub fn csv(rows: &[ReportRow]) -> String {
    let mut out = String::from("scenario,lhs,rhs,ratio,pass\n");
    for r in rows {
        out.push_str(&format!(
            "{},{:.16e},{:.16e},{:.16e},{}\n",
            csv_field(&r.scenario),
            r.lhs,
            r.rhs,
            r.ratio,
            r.pass
        ));
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Sample {
        z: f64,
        a: u64,
        m: BTreeMap<String, f64>,
        inf: f64,
    }

    #[test]
    fn floats_have_17_digits_and_keys_keep_order() {
        let mut m = BTreeMap::new();
        m.insert("b".into(), 0.1);
        m.insert("a".into(), -2.5e-300);
        let s = to_json(&Sample {
            z: 1.0 / 3.0,
            a: 7,
            m,
            inf: f64::INFINITY,
        })
        .unwrap();
        assert!(s.contains("\"z\": 3.3333333333333331e-1"), "{s}");
        assert!(s.contains("\"a\": 7"));
        assert!(s.find("\"z\"").unwrap() < s.find("\"a\"").unwrap());
        assert!(s.find("\"a\": -2.5").unwrap() < s.find("\"b\"").unwrap());
        assert!(s.contains("\"inf\": null"));
        let back: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["z"].as_f64().unwrap(), 1.0 / 3.0);
        assert_eq!(back["m"]["a"].as_f64().unwrap(), -2.5e-300);
    }

    #[test]
    fn csv_has_header_and_quotes() {
        let rows = [ReportRow {
            scenario: "a,b".into(),
            lhs: 0.5,
            rhs: 1.0,
            ratio: 0.5,
            pass: true,
        }];
        let s = csv(&rows);
        assert!(s.starts_with("scenario,lhs,rhs,ratio,pass\n\"a,b\",5.0000000000000000e-1,"));
    }
}
