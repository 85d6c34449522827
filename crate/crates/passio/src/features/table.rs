//! Persisted feature matrices.
//!
//! Tab-separated text, one row per window. Line 1 is a version marker, line 2
//! the header: feature names, then `window_start_s`, `trial_id`, `subject_id`,
//! `valence`, `arousal`, `dominance`. The three rating columns are empty on
//! unlabeled rows. Floats are written in shortest round-trip form, so
//! write -> read -> write is byte-stable.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::emotion::VadRating;
use crate::error::{Error, Result};
use crate::features::FeatureVector;

pub const TABLE_MAGIC: &str = "# passio-features v1";

/// One labeled (or unlabeled) window row.
#[derive(Clone, Debug, PartialEq)]
pub struct TableRow {
    pub subject_id: String,
    pub trial_id: String,
    pub window_start_s: f64,
    pub values: Vec<f64>,
    pub rating: Option<VadRating>,
}

/// An in-memory feature matrix with row provenance.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FeatureTable {
    pub names: Vec<String>,
    pub rows: Vec<TableRow>,
}

impl FeatureTable {
    pub fn new(names: Vec<String>) -> FeatureTable {
        FeatureTable { names, rows: Vec::new() }
    }

    /// Append one trial's feature vectors under a common label.
    pub fn push_trial(
        &mut self,
        subject_id: &str,
        trial_id: &str,
        features: &[FeatureVector],
        rating: Option<VadRating>,
    ) -> Result<()> {
        for fv in features {
            if fv.schema.names() != &self.names[..] {
                return Err(Error::contract("feature vector schema does not match table"));
            }
            self.rows.push(TableRow {
                subject_id: subject_id.to_string(),
                trial_id: trial_id.to_string(),
                window_start_s: fv.window_start_s,
                values: fv.values.clone(),
                rating,
            });
        }
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.names.iter().position(|n| n == name)?;
        Some(self.rows.iter().map(|r| r.values[i]).collect())
    }

    pub fn write_tsv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        (|| -> std::io::Result<()> {
            writeln!(w, "{TABLE_MAGIC}")?;
            write!(w, "{}", self.names.join("\t"))?;
            writeln!(w, "\twindow_start_s\ttrial_id\tsubject_id\tvalence\tarousal\tdominance")?;
            for row in &self.rows {
                for v in &row.values {
                    write!(w, "{v}\t")?;
                }
                write!(w, "{}\t{}\t{}", row.window_start_s, row.trial_id, row.subject_id)?;
                match row.rating {
                    Some(r) => writeln!(w, "\t{}\t{}\t{}", r.valence, r.arousal, r.dominance)?,
                    None => writeln!(w, "\t\t\t")?,
                }
            }
            w.flush()
        })()
        .map_err(|e| Error::io(path, e))
    }

    pub fn read_tsv(path: &Path) -> Result<FeatureTable> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let reader = BufReader::new(file);
        let mut offset = 0u64;
        let mut lines = reader.lines();

        let mut next_line = |offset: &mut u64| -> Result<Option<String>> {
            match lines.next() {
                None => Ok(None),
                Some(Err(e)) => Err(Error::parse(*offset, format!("unreadable line: {e}"))),
                Some(Ok(l)) => {
                    *offset += l.len() as u64 + 1;
                    Ok(Some(l))
                }
            }
        };

        let magic = next_line(&mut offset)?
            .ok_or_else(|| Error::parse(0, "empty file; expected feature-table marker"))?;
        if magic != TABLE_MAGIC {
            return Err(Error::parse(0, format!("bad marker line `{magic}`")));
        }
        let header_start = offset;
        let header = next_line(&mut offset)?
            .ok_or_else(|| Error::parse(header_start, "missing header line"))?;
        let cols: Vec<&str> = header.split('\t').collect();
        const META: [&str; 6] =
            ["window_start_s", "trial_id", "subject_id", "valence", "arousal", "dominance"];
        if cols.len() < META.len() + 1 || cols[cols.len() - META.len()..] != META {
            return Err(Error::schema(
                "header",
                "expected feature names followed by window_start_s, trial_id, subject_id, \
                 valence, arousal, dominance",
            ));
        }
        let names: Vec<String> =
            cols[..cols.len() - META.len()].iter().map(|s| s.to_string()).collect();
        let n_features = names.len();

        let mut rows = Vec::new();
        let mut line_start;
        loop {
            line_start = offset;
            let Some(line) = next_line(&mut offset)? else { break };
            if line.is_empty() {
                continue;
            }
            let cells: Vec<&str> = line.split('\t').collect();
            if cells.len() != n_features + META.len() {
                return Err(Error::parse(
                    line_start,
                    format!("row has {} cells, expected {}", cells.len(), n_features + META.len()),
                ));
            }
            let parse_f64 = |s: &str, what: &str| -> Result<f64> {
                s.parse::<f64>()
                    .map_err(|_| Error::parse(line_start, format!("bad {what} value `{s}`")))
            };
            let values: Vec<f64> = cells[..n_features]
                .iter()
                .map(|s| parse_f64(s, "feature"))
                .collect::<Result<_>>()?;
            let window_start_s = parse_f64(cells[n_features], "window_start_s")?;
            let trial_id = cells[n_features + 1].to_string();
            let subject_id = cells[n_features + 2].to_string();
            if trial_id.is_empty() || subject_id.is_empty() {
                return Err(Error::schema("trial_id/subject_id", "must be non-empty"));
            }
            let label_cells = &cells[n_features + 3..];
            let rating = if label_cells.iter().all(|c| c.is_empty()) {
                None
            } else if label_cells.iter().all(|c| !c.is_empty()) {
                Some(
                    VadRating::new(
                        parse_f64(label_cells[0], "valence")?,
                        parse_f64(label_cells[1], "arousal")?,
                        parse_f64(label_cells[2], "dominance")?,
                    )
                    .map_err(|e| Error::parse(line_start, e.to_string()))?,
                )
            } else {
                return Err(Error::schema(
                    "rating",
                    "valence/arousal/dominance must be all present or all empty",
                ));
            };
            rows.push(TableRow { subject_id, trial_id, window_start_s, values, rating });
        }
        Ok(FeatureTable { names, rows })
    }
}
