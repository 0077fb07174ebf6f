//! Tabular output in CSV, JSON or an aligned text table.

use std::io::{self, Write};

use clap::ValueEnum;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
    Table,
}

/// Rows of preformatted cells. Cell text is fixed-precision so repeated runs
/// produce byte-identical CSV.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(headers: impl IntoIterator<Item = S>) -> Self {
        Self {
            headers: headers.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    pub fn write_csv<W: Write>(&self, out: W) -> io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.headers)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()
    }

    pub fn write_text<W: Write>(&self, mut out: W) -> io::Result<()> {
        let mut widths: Vec<usize> = self.headers.iter().map(|h| h.len()).collect();
        for r in &self.rows {
            for (w, c) in widths.iter_mut().zip(r) {
                *w = (*w).max(c.len());
            }
        }
        let line = |cells: &[String]| {
            cells
                .iter()
                .zip(&widths)
                .map(|(c, w)| format!("{c:>w$}"))
                .collect::<Vec<_>>()
                .join("  ")
        };
        writeln!(out, "{}", line(&self.headers))?;
        let rule: usize = widths.iter().sum::<usize>() + 2 * widths.len().saturating_sub(1);
        writeln!(out, "{}", "-".repeat(rule))?;
        for r in &self.rows {
            writeln!(out, "{}", line(r))?;
        }
        Ok(())
    }
}

/// A command result, renderable in every format.
pub struct Rendered {
    pub table: Table,
    pub json: serde_json::Value,
    /// Replaces the aligned table in `table` format when set.
    pub text: Option<String>,
}

impl Rendered {
    pub fn new<T: Serialize>(table: Table, json: &T) -> Self {
        Self {
            table,
            json: serde_json::to_value(json).expect("output serializes"),
            text: None,
        }
    }

    pub fn with_text(mut self, text: String) -> Self {
        self.text = Some(text);
        self
    }

    pub fn write<W: Write>(&self, format: Format, mut out: W) -> io::Result<()> {
        match format {
            Format::Csv => self.table.write_csv(out),
            Format::Json => {
                serde_json::to_writer_pretty(&mut out, &self.json)?;
                writeln!(out)
            }
            Format::Table => match &self.text {
                Some(t) => writeln!(out, "{t}"),
                None => self.table.write_text(out),
            },
        }
    }
}

pub fn fixed(v: f64, dp: usize) -> String {
    // avoid "-0.000"
    let s = format!("{v:.dp$}");
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_string()
    } else {
        s
    }
}

pub fn opt_fixed(v: Option<f64>, dp: usize) -> String {
    v.map(|v| fixed(v, dp)).unwrap_or_default()
}
