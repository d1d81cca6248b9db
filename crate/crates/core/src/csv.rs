//! Fixed CSV layout: header row, comma separated, floats with 17 significant
//! digits so that values round-trip bit for bit.

pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Renders a table; `rows` must match the header width.
pub fn table(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = ::csv::Writer::from_writer(Vec::new());
    // writing into memory cannot fail; the writer checks row widths
    w.write_record(header).expect("in-memory csv");
    for row in rows {
        w.write_record(&row).expect("row width matches the header");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("csv fields are utf-8")
}
