//! Serialization of result documents.

use std::io::{self, Write};

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use super::load::format_real;
use super::pipeline::ResultDocument;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum EmitFormat {
    Json,
    Csv,
}

pub const CSV_COLUMNS: [&str; 11] = [
    "label", "p", "q", "lagA", "lagC", "lagB", "statistic", "df1", "df2", "p_value", "degenerate",
];

pub fn emit_results(doc: &ResultDocument, format: EmitFormat) -> Result<String> {
    match format {
        EmitFormat::Json => to_json(doc),
        EmitFormat::Csv => to_csv(doc),
    }
}

/// Pretty JSON in struct field order, every float written with 17
/// significant digits.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FullPrecision(PrettyFormatter::new()));
    value
        .serialize(&mut ser)
        .map_err(|e| Error::Internal(format!("json serialization failed: {e}")))?;
    buf.push(b'\n');
    String::from_utf8(buf).map_err(|e| Error::Internal(e.to_string()))
}

struct FullPrecision<'a>(PrettyFormatter<'a>);

macro_rules! delegate {
    ($($name:ident($($arg:ident: $ty:ty),*);)*) => {
        $(
            fn $name<W: ?Sized + Write>(&mut self, w: &mut W $(, $arg: $ty)*) -> io::Result<()> {
                self.0.$name(w $(, $arg)*)
            }
        )*
    };
}

impl Formatter for FullPrecision<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            w.write_all(format_real(value).as_bytes())
        } else {
            w.write_all(b"null")
        }
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }

    delegate! {
        begin_array();
        end_array();
        begin_array_value(first: bool);
        end_array_value();
        begin_object();
        end_object();
        begin_object_key(first: bool);
        end_object_key();
        begin_object_value();
        end_object_value();
    }
}

/// One row per (label, test); a label without tests gets one row with the
/// test columns empty.
pub fn to_csv(doc: &ResultDocument) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Internal(format!("csv serialization failed: {e}"));
    w.write_record(CSV_COLUMNS).map_err(csv_err)?;
    let opt = |v: Option<f64>| v.map(format_real).unwrap_or_default();
    let (p, q) = (doc.metadata.p.to_string(), doc.metadata.q.to_string());
    for r in &doc.results {
        let head = [r.label.clone(), p.clone(), q.clone(), opt(r.lag_a), opt(r.lag_c), opt(r.lag_b)];
        let degenerate = r.degenerate.to_string();
        if r.tests.is_empty() {
            let row = head.iter().cloned().chain(["".into(), "".into(), "".into(), "".into(), degenerate.clone()]);
            w.write_record(row.collect::<Vec<String>>()).map_err(csv_err)?;
        }
        for t in &r.tests {
            let tail = [
                format_real(t.statistic),
                t.df1.to_string(),
                t.df2.map(|d| d.to_string()).unwrap_or_default(),
                format_real(t.p_value),
                degenerate.clone(),
            ];
            w.write_record(head.iter().chain(tail.iter())).map_err(csv_err)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Internal(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Internal(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cli_io::config::{AnalysisConfig, ChannelRef};
    use crate::cli_io::pipeline::{Metadata, ResultEntry};
    use crate::inference::lrt_chi_square;

    fn doc(results: Vec<ResultEntry>) -> ResultDocument {
        let meta = Metadata {
            n_epochs: 10,
            n_samples: 8,
            p: 1,
            q: 1,
            x_channels: vec!["x".into()],
            y_channels: vec!["y".into()],
            sampling_rate: None,
            phase_zero_count: 0,
            degenerate: Vec::new(),
        };
        let cfg = AnalysisConfig::new(vec![ChannelRef::Index(0)], vec![ChannelRef::Index(1)]);
        let mut d = ResultDocument::empty(meta, cfg);
        d.results = results;
        d
    }

    fn entry(lag_c: f64) -> ResultEntry {
        let lag_a = -(-lag_c).ln_1p();
        ResultEntry {
            label: "f1".into(),
            kind: "frequency".into(),
            frequencies: vec![1],
            hz: None,
            lag_a: Some(lag_a),
            lag_c: Some(lag_c),
            lag_b: None,
            degenerate: false,
            tests: vec![lrt_chi_square(lag_a, 10, 1, 1).unwrap()],
        }
    }

    #[test]
    fn empty_document_is_valid_json() {
        let text = to_json(&doc(Vec::new())).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["results"], serde_json::json!([]));
        let back: ResultDocument = serde_json::from_str(&text).unwrap();
        assert_eq!(back, doc(Vec::new()));
    }

    #[test]
    fn third_round_trips_exactly() {
        let d = doc(vec![entry(1.0 / 3.0)]);
        let text = to_json(&d).unwrap();
        assert!(text.contains("3.3333333333333331e-1"), "{text}");
        let back: ResultDocument = serde_json::from_str(&text).unwrap();
        assert_eq!(back.results[0].lag_c.unwrap().to_bits(), (1.0f64 / 3.0).to_bits());
        assert_eq!(back, d);
    }

    #[test]
    fn key_order_is_stable() {
        let text = to_json(&doc(vec![entry(0.2)])).unwrap();
        let pos = |k: &str| text.find(&format!("\"{k}\"")).unwrap();
        assert!(pos("tool") < pos("version") && pos("version") < pos("metadata") && pos("config") < pos("results"));
        assert!(pos("lagA") < pos("lagC") && pos("lagC") < pos("lagB"));
    }

    #[test]
    fn csv_rows() {
        let mut e = entry(0.25);
        let text = to_csv(&doc(vec![e.clone()])).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], CSV_COLUMNS.join(","));
        assert_eq!(lines.len(), 2);
        let cells: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(cells.len(), 11);
        assert_eq!(cells[4].parse::<f64>().unwrap(), 0.25);
        assert_eq!((cells[5], cells[7], cells[8], cells[10]), ("", "1", "", "false"));

        e.tests.clear();
        let text = to_csv(&doc(vec![e])).unwrap();
        let cells: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
        assert_eq!(cells[6..10], ["", "", "", ""]);
    }
}
