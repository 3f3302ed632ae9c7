//! Kernel serialization: plain-grid CSV and a small JSON schema.
//!
//! Floats are written with 17 significant digits so every f64 round-trips
//! exactly through either format.

use super::Kernel;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// 17 significant digits: enough to reproduce any f64 bit pattern on parse.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Serde adapter serializing a [`Kernel`] as bare nested rows `[[…]]`,
/// for report fields where the dimension is implied.
pub mod rows_serde {
    use super::Kernel;
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(k: &Kernel, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = (1..=k.n())
            .map(|i| (1..=k.n()).map(|j| k.entry(i, j)).collect())
            .collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Kernel, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        Kernel::from_rows(&rows).map_err(D::Error::custom)
    }
}

/// JSON wire shape for [`Kernel`]: `{"n":…,"entries":[[…]],"labels":[…]|null}`.
#[derive(Serialize, Deserialize)]
pub(crate) struct KernelJson {
    pub n: usize,
    pub entries: Vec<Vec<f64>>,
    pub labels: Option<Vec<f64>>,
}

impl TryFrom<KernelJson> for Kernel {
    type Error = Error;

    fn try_from(j: KernelJson) -> Result<Kernel> {
        if j.entries.len() != j.n {
            return Err(Error::DimensionMismatch {
                expected: j.n,
                got: j.entries.len(),
            });
        }
        let k = Kernel::from_rows(&j.entries)?;
        match j.labels {
            Some(labels) => k.with_labels(labels),
            None => Ok(k),
        }
    }
}

impl From<Kernel> for KernelJson {
    fn from(k: Kernel) -> KernelJson {
        let rows = (1..=k.n())
            .map(|i| (1..=k.n()).map(|j| k.entry(i, j)).collect())
            .collect();
        KernelJson {
            n: k.n(),
            entries: rows,
            labels: k.labels().map(|l| l.to_vec()),
        }
    }
}

impl Kernel {
    /// CSV: one row per line, comma separated, no header, labels not included.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        for r in 1..=self.n() {
            for c in 1..=self.n() {
                if c > 1 {
                    out.push(',');
                }
                out.push_str(&fmt_f64(self.entry(r, c)));
            }
            out.push('\n');
        }
        out
    }

    /// Parse a plain n-by-n CSV grid. The input must be square.
    pub fn from_csv_str(s: &str) -> Result<Kernel> {
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (lineno, line) in s.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() {
                // Tolerate blank trailing lines only.
                if s.lines().skip(lineno + 1).any(|l| !l.trim().is_empty()) {
                    return Err(Error::Parse(format!(
                        "blank line {} inside grid",
                        lineno + 1
                    )));
                }
                break;
            }
            let mut row = Vec::new();
            for (field_no, field) in line.split(',').enumerate() {
                let v: f64 = field.trim().parse().map_err(|e| {
                    Error::Parse(format!("line {}, field {}: {e}", lineno + 1, field_no + 1))
                })?;
                row.push(v);
            }
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::Parse("empty CSV input".into()));
        }
        let n = rows.len();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Parse(format!(
                    "row {} has {} fields, expected {n} (grid must be square)",
                    i + 1,
                    row.len()
                )));
            }
        }
        Kernel::from_rows(&rows)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string(self).expect("kernel serialization cannot fail")
    }

    pub fn from_json_str(s: &str) -> Result<Kernel> {
        serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Read from a path, dispatching on the `.csv` / `.json` extension.
    pub fn read_path(path: &std::path::Path) -> Result<Kernel> {
        let text = std::fs::read_to_string(path)?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => Kernel::from_csv_str(&text),
            Some("json") => Kernel::from_json_str(&text),
            _ => {
                // Fall back on sniffing: JSON starts with '{'.
                if text.trim_start().starts_with('{') {
                    Kernel::from_json_str(&text)
                } else {
                    Kernel::from_csv_str(&text)
                }
            }
        }
    }

    pub fn write_path(&self, path: &std::path::Path) -> Result<()> {
        let text = match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => self.to_csv_string(),
            _ => self.to_json_string(),
        };
        std::fs::write(path, text)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn awkward_kernel() -> Kernel {
        Kernel::from_rows(&[
            vec![1.0 / 3.0, 2.0f64.sqrt()],
            vec![-1.234567890123456e-7, 9.87654321e12],
        ])
        .unwrap()
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let k = awkward_kernel();
        let back = Kernel::from_csv_str(&k.to_csv_string()).unwrap();
        assert_eq!(k.flat(), back.flat());
    }

    #[test]
    fn json_round_trip_is_exact() {
        let k = awkward_kernel().with_labels(vec![0.1, 0.7]).unwrap();
        let back = Kernel::from_json_str(&k.to_json_string()).unwrap();
        assert_eq!(k, back);
    }

    #[test]
    fn json_shape_matches_schema() {
        let k = Kernel::identity(2);
        let v: serde_json::Value = serde_json::from_str(&k.to_json_string()).unwrap();
        assert_eq!(v["n"], 2);
        assert_eq!(v["entries"][0][0], 1.0);
        assert!(v["labels"].is_null());
    }

    #[test]
    fn csv_rejects_ragged_grid() {
        assert!(Kernel::from_csv_str("1.0,2.0\n3.0\n").is_err());
    }

    #[test]
    fn csv_rejects_non_numeric() {
        assert!(Kernel::from_csv_str("1.0,x\n3.0,4.0\n").is_err());
    }

    #[test]
    fn json_rejects_mismatched_n() {
        let s = r#"{"n": 3, "entries": [[1.0,0.0],[0.0,1.0]], "labels": null}"#;
        assert!(Kernel::from_json_str(s).is_err());
    }
}
