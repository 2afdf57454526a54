//! Deterministic result tables.
//!
//! Each analysis produces one CSV file: `#`-prefixed metadata lines (config
//! hash, grid parameters, tool version), one column-name line, then rows in
//! ascending time. Floats are printed with 17 significant digits
//! (`{:.16e}`), the shortest width that round-trips every f64, so identical
//! configs and versions produce byte-identical files.

use std::fmt::Write as _;

/// One rectangular table with its metadata header.
#[derive(Debug, Clone)]
pub struct ResultTable {
    /// Analysis label; becomes the file-name suffix.
    pub analysis: String,
    /// `(key, value)` metadata pairs, emitted as `# key = value` lines.
    pub metadata: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl ResultTable {
    pub fn new(analysis: &str, columns: &[&str]) -> Self {
        ResultTable {
            analysis: analysis.to_string(),
            metadata: Vec::new(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn with_metadata(mut self, pairs: &[(&str, String)]) -> Self {
        for (k, v) in pairs {
            self.metadata.push((k.to_string(), v.clone()));
        }
        self
    }

    /// Append a row; panics if the width disagrees with the schema.
    pub fn push_row(&mut self, row: Vec<f64>) {
        assert_eq!(
            row.len(),
            self.columns.len(),
            "row width must match the column schema"
        );
        self.rows.push(row);
    }

    /// Validate schema/row-length consistency and time monotonicity (the
    /// first column, when named `t`, must ascend).
    pub fn validate(&self) -> Result<(), String> {
        for (i, row) in self.rows.iter().enumerate() {
            if row.len() != self.columns.len() {
                return Err(format!("row {i}: width {} != {}", row.len(), self.columns.len()));
            }
        }
        if self.columns.first().map(String::as_str) == Some("t") {
            for w in self.rows.windows(2) {
                if w[1][0] <= w[0][0] {
                    return Err(format!("t must ascend: {} then {}", w[0][0], w[1][0]));
                }
            }
        }
        Ok(())
    }

    /// Render to CSV bytes. Deterministic: fixed metadata order, fixed
    /// column order, fixed float formatting.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.metadata {
            writeln!(out, "# {k} = {v}").unwrap();
        }
        writeln!(out, "{}", self.columns.join(",")).unwrap();
        for row in &self.rows {
            let mut first = true;
            for v in row {
                if !first {
                    out.push(',');
                }
                write!(out, "{}", format_float(*v)).unwrap();
                first = false;
            }
            out.push('\n');
        }
        out
    }
}

/// 17-significant-digit scientific form; round-trip exact for every f64.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout_is_header_columns_rows() {
        let mut table = ResultTable::new("rate", &["t", "g"])
            .with_metadata(&[("config_hash", "abc123".to_string())]);
        table.push_row(vec![0.0, 0.5]);
        table.push_row(vec![0.1, 0.25]);
        table.validate().unwrap();
        let csv = table.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "# config_hash = abc123");
        assert_eq!(lines[1], "t,g");
        assert!(lines[2].starts_with("0.0000000000000000e0,"));
        assert_eq!(lines.len(), 4);
    }

    #[test]
    fn floats_round_trip_exactly() {
        for &v in &[
            0.15787097,
            std::f64::consts::PI,
            -1.0 / 3.0,
            6.02e23,
            1e-300,
            -0.0,
        ] {
            let s = format_float(v);
            let back: f64 = s.parse().unwrap();
            assert_eq!(v.to_bits(), back.to_bits(), "{v} -> {s} -> {back}");
        }
    }

    #[test]
    fn non_ascending_time_is_rejected() {
        let mut table = ResultTable::new("rate", &["t", "g"]);
        table.push_row(vec![0.1, 0.0]);
        table.push_row(vec![0.1, 0.0]);
        assert!(table.validate().is_err());
    }
}
