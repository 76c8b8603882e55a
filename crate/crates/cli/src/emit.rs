//! JSON and CSV emission with fixed float precision.

use std::io::{self, Write};

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

/// Version of the CSV column layouts; bumped whenever a column changes.
pub const CSV_VERSION: u32 = 1;

/// Pretty JSON whose floats carry 17 significant digits.
struct Precise<'a>(PrettyFormatter<'a>);

impl Formatter for Precise<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{}", float(value))
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// `value` with 17 significant digits; non-finite values spelled out.
pub fn float(value: f64) -> String {
    if value.is_nan() {
        "nan".into()
    } else if value.is_infinite() {
        if value > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{value:.16e}")
    }
}

pub fn json<T: Serialize>(value: &T) -> String {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, Precise(PrettyFormatter::new()));
    value.serialize(&mut ser).expect("in-memory JSON serialisation");
    out.push(b'\n');
    String::from_utf8(out).expect("JSON is UTF-8")
}

/// A CSV cell.
pub enum Cell {
    Float(f64),
    Opt(Option<f64>),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Float(v) => float(*v),
            Cell::Opt(v) => v.map(float).unwrap_or_default(),
            Cell::Text(s) => s.clone(),
        }
    }
}

/// Rows of named cells; the header is taken from the first row and prefixed
/// with a `format_version` column.
pub fn csv(rows: &[Vec<(&'static str, Cell)>]) -> String {
    let mut w = ::csv::Writer::from_writer(Vec::new());
    if let Some(first) = rows.first() {
        let header = std::iter::once("format_version").chain(first.iter().map(|(k, _)| *k));
        w.write_record(header).expect("in-memory CSV");
    }
    for row in rows {
        let cells = std::iter::once(CSV_VERSION.to_string()).chain(row.iter().map(|(_, c)| c.render()));
        w.write_record(cells).expect("in-memory CSV");
    }
    String::from_utf8(w.into_inner().expect("in-memory CSV")).expect("CSV is UTF-8")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits() {
        assert_eq!(float(0.1), "1.0000000000000001e-1");
        assert_eq!(float(f64::INFINITY), "inf");
        let v: f64 = float(std::f64::consts::PI).parse().unwrap();
        assert_eq!(v, std::f64::consts::PI);
    }

    #[test]
    fn json_round_trip() {
        #[derive(Serialize)]
        struct S {
            b: f64,
            a: Vec<f64>,
            missing: Option<f64>,
            bad: f64,
        }
        let text = json(&S { b: 1.5, a: vec![2.0, 1e-300], missing: None, bad: f64::NAN });
        let back: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(back["b"], 1.5);
        assert_eq!(back["a"][1], 1e-300);
        assert!(back["missing"].is_null() && back["bad"].is_null());
        assert!(text.find("\"b\"").unwrap() < text.find("\"a\"").unwrap());
        assert_eq!(text, json(&S { b: 1.5, a: vec![2.0, 1e-300], missing: None, bad: f64::NAN }));
    }

    #[test]
    fn csv_layout() {
        let rows = vec![
            vec![("x", Cell::Float(1.0)), ("tag", Cell::Text("a".into())), ("y", Cell::Opt(None))],
            vec![("x", Cell::Float(2.0)), ("tag", Cell::Text("b".into())), ("y", Cell::Opt(Some(3.0)))],
        ];
        let text = csv(&rows);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "format_version,x,tag,y");
        assert_eq!(lines.len(), 3);
        assert!(lines[1].ends_with(",a,"));
    }
}
