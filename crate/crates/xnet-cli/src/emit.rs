//! Record rendering: CSV with a header row, or flat key=value blocks.
//!
//! Rendering is pure and allocation-backed so identical records always
//! produce identical bytes; the caller owns where they go.

use crate::config::Format;

/// One emitted record as ordered (column, value) pairs.
#[derive(Debug, Clone)]
pub struct Record {
    fields: Vec<(&'static str, String)>,
}

impl Record {
    pub fn new() -> Record {
        Record { fields: Vec::new() }
    }

    pub fn field(mut self, key: &'static str, value: impl ToString) -> Record {
        self.fields.push((key, value.to_string()));
        self
    }

    pub fn keys(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.fields.iter().map(|(k, _)| *k)
    }

    pub fn values(&self) -> impl Iterator<Item = &str> + '_ {
        self.fields.iter().map(|(_, v)| v.as_str())
    }
}

/// Render records in the requested encoding.
///
/// All records of a run share one schema; the first record fixes the
/// CSV header.
pub fn render(records: &[Record], format: Format) -> Vec<u8> {
    match format {
        Format::Csv => to_csv(records),
        Format::StructuredRecord => to_kv(records),
    }
}

fn to_csv(records: &[Record]) -> Vec<u8> {
    let Some(first) = records.first() else {
        return Vec::new();
    };
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(first.keys()).expect("in-memory write");
    for r in records {
        debug_assert!(r.keys().eq(first.keys()), "mixed schemas in one run");
        w.write_record(r.values()).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

fn to_kv(records: &[Record]) -> Vec<u8> {
    let mut out = String::new();
    for (i, r) in records.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        for (k, v) in &r.fields {
            out.push_str(k);
            out.push('=');
            out.push_str(v);
            out.push('\n');
        }
    }
    out.into_bytes()
}
