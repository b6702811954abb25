use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use serde_json::{json, Map, Value};
use starnc::netsim::Z_THRESHOLD;
use starnc::throughput::{SERIES_TAIL_TOLERANCE, SERIES_TERM_TOLERANCE};

use crate::settings::{Format, Resolved};

/// A result table: metadata plus rows whose keys give the column order.
pub struct Table {
    pub command: &'static str,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Map<String, Value>>,
    pub extra: Map<String, Value>,
}

impl Table {
    pub fn new(command: &'static str, columns: &[&'static str]) -> Self {
        Table { command, columns: columns.to_vec(), rows: Vec::new(), extra: Map::new() }
    }

    pub fn push(&mut self, row: Value) {
        let Value::Object(mut row) = row else { unreachable!("rows are objects") };
        let ordered = self.columns.iter().map(|c| (c.to_string(), row.remove(*c).unwrap_or(Value::Null))).collect();
        debug_assert!(row.is_empty(), "unexpected columns {:?}", row.keys().collect::<Vec<_>>());
        self.rows.push(ordered);
    }

    fn meta(&self, s: &Resolved) -> Map<String, Value> {
        let mut meta = Map::new();
        meta.insert("tool".into(), json!(format!("starnc {}", env!("CARGO_PKG_VERSION"))));
        meta.insert("command".into(), json!(self.command));
        meta.insert("model".into(), json!(s.model));
        meta.insert("seed".into(), json!(s.seed));
        meta.insert("trials".into(), json!(s.trials));
        meta.insert(
            "tolerances".into(),
            json!({
                "rate_tol": s.search.rate_tol,
                "rate_grid_points": s.search.grid_points,
                "series_term": SERIES_TERM_TOLERANCE,
                "series_tail": SERIES_TAIL_TOLERANCE,
                "z_threshold": Z_THRESHOLD,
            }),
        );
        meta.insert("settings".into(), serde_json::to_value(s).expect("settings serialise"));
        meta.extend(self.extra.clone());
        meta
    }

    pub fn write(&self, s: &Resolved) -> Result<()> {
        match &s.out {
            Some(path) => {
                let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
                let mut w = BufWriter::new(file);
                self.write_to(&mut w, s)?;
                w.flush()?;
            }
            None => {
                let stdout = io::stdout();
                let mut w = stdout.lock();
                self.write_to(&mut w, s)?;
                w.flush()?;
            }
        }
        Ok(())
    }

    pub fn write_to<W: Write>(&self, w: &mut W, s: &Resolved) -> Result<()> {
        let meta = self.meta(s);
        match s.format {
            Format::Json => {
                serde_json::to_writer_pretty(&mut *w, &json!({ "meta": meta, "rows": self.rows }))?;
                writeln!(w)?;
            }
            Format::Csv => {
                for (k, v) in &meta {
                    match v {
                        Value::String(text) => writeln!(w, "# {k}: {text}")?,
                        other => writeln!(w, "# {k}: {other}")?,
                    }
                }
                let mut csv = csv::Writer::from_writer(&mut *w);
                csv.write_record(&self.columns)?;
                for row in &self.rows {
                    csv.write_record(row.values().map(cell))?;
                }
                csv.flush()?;
            }
        }
        Ok(())
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

pub fn write_json(path: &Path, value: &Value) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}
