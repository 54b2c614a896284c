//! CSV tables with a fixed column order and 12 significant digits.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use crate::error::Result;

/// `x` with 12 significant digits.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.11e}")
    } else {
        x.to_string()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn header(&self) -> &[String] {
        &self.header
    }

    pub fn rows(&self) -> &[Vec<String>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| crate::Error::Io(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Writes the table and returns its data row count.
    pub fn write(&self, path: &Path) -> Result<usize> {
        let mut f = File::create(path)?;
        f.write_all(self.to_csv()?.as_bytes())?;
        Ok(self.rows.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(num(1.0), "1.00000000000e0");
        assert_eq!(num(-0.000123456789012345), "-1.23456789012e-4");
        assert_eq!(num(f64::NAN), "NaN");
    }

    #[test]
    fn csv_layout() {
        let mut t = Table::new(&["k", "value"]);
        t.push(vec!["1".into(), num(0.5)]);
        assert_eq!(t.to_csv().unwrap(), "k,value\n1,5.00000000000e-1\n");
        assert_eq!(t.len(), 1);
    }
}
