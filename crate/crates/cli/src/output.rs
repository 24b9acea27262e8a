use serde_json::{json, Value};
use stieltjes_core::numeric::{Dyadic, Round};
use stieltjes_core::{Error, Scalar};

/// How a finished command should be reflected in the exit code.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Ok,
    Failed,
    Undecided,
}

/// Rows for CSV output. Every cell is already a string.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Table { header: header.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    fn to_csv(&self) -> Result<String, String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).map_err(|e| e.to_string())?;
        for row in &self.rows {
            w.write_record(row).map_err(|e| e.to_string())?;
        }
        let bytes = w.into_inner().map_err(|e| e.to_string())?;
        String::from_utf8(bytes).map_err(|e| e.to_string())
    }
}

#[derive(Clone, Debug)]
pub struct Report {
    pub json: Value,
    pub table: Table,
    pub status: Status,
}

impl Report {
    pub fn render(&self, csv: bool) -> Result<String, String> {
        if csv {
            self.table.to_csv()
        } else {
            let mut text = serde_json::to_string_pretty(&self.json).map_err(|e| e.to_string())?;
            text.push('\n');
            Ok(text)
        }
    }
}

pub fn error_text(e: &Error, csv: bool) -> String {
    if csv {
        let mut t = Table::new(["error", "message"]);
        t.push(vec![e.code().to_string(), e.to_string()]);
        t.to_csv().unwrap_or_default()
    } else {
        let v = json!({ "error": { "code": e.code(), "message": e.to_string() } });
        format!("{}\n", serde_json::to_string_pretty(&v).expect("plain json"))
    }
}

/// Decimal rendering and a bound covering both the enclosure radius and the
/// decimal rounding.
pub fn decimal(s: &Scalar, digits: usize) -> (String, Dyadic) {
    s.to_decimal_enclosure(digits)
}

pub fn bound(d: &Dyadic) -> String {
    d.to_sci_string(3, Round::Ceil)
}
