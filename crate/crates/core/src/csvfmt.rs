//! RFC-4180 CSV output shared by reports, ensembles and convergence tables.

use csv::{Terminator, Writer, WriterBuilder};

pub(crate) fn writer() -> Writer<Vec<u8>> {
    WriterBuilder::new()
        .terminator(Terminator::CRLF)
        .from_writer(Vec::new())
}

pub(crate) fn finish(w: Writer<Vec<u8>>) -> String {
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

pub(crate) fn opt(v: Option<f64>) -> String {
    v.map(float).unwrap_or_default()
}
