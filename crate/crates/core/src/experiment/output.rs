//! CSV/JSON emission. Numbers are printed in Rust's shortest round-trip
//! form (exponent notation outside `1e-5..1e16`), so identical runs produce
//! identical bytes.

use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use super::{Command, RunConfig};
use crate::{Error, Result};

/// What a finished run wrote.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub command: Command,
    pub dir: PathBuf,
    /// `config.json`, `results.csv`, `summary.json` in that order.
    pub files: Vec<PathBuf>,
    /// Contents of `summary.json`.
    pub summary: Value,
}

pub(crate) struct Table {
    pub columns: &'static [&'static str],
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &'static [&'static str]) -> Self {
        Self { columns, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

pub(crate) fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:?}")
    }
}

pub(crate) fn render_csv(config: &RunConfig, table: &Table) -> Result<String> {
    let mut buf = format!(
        "# fairopt {} master_seed={} config={}\n",
        config.command(),
        config.master_seed,
        config.to_json_compact()
    )
    .into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(table.columns)?;
        for row in &table.rows {
            w.write_record(row)?;
        }
        w.flush().map_err(|e| Error::io("results.csv", e))?;
    }
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_run(config: &RunConfig, dir: &Path, table: &Table, results: Value) -> Result<RunOutput> {
    let csv = render_csv(config, table)?;
    let summary = json!({
        "command": config.command().name(),
        "preset": config.preset,
        "master_seed": config.master_seed,
        "config": config,
        "results": results,
    });
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let files = vec![dir.join("config.json"), dir.join("results.csv"), dir.join("summary.json")];
    write(&files[0], &(config.to_json_pretty() + "\n"))?;
    write(&files[1], &csv)?;
    let text = serde_json::to_string_pretty(&summary)? + "\n";
    write(&files[2], &text)?;
    Ok(RunOutput {
        command: config.command(),
        dir: dir.to_path_buf(),
        files,
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for x in [0.1, 1.0 / 3.0, 1e-300, -2.5e17, 2.2618947525293886e-11] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(num(2.2618947525293886e-11), "2.2618947525293886e-11");
        assert_eq!(num(1.0), "1.0");
        assert_eq!(num(f64::NAN), "nan");
        assert_eq!(num(f64::NEG_INFINITY), "-inf");
    }

    #[test]
    fn csv_starts_with_a_comment_header() {
        let cfg = RunConfig::default_for(Command::Density);
        let mut t = Table::new(&["a", "b"]);
        t.push(vec!["1".into(), "x,y".into()]);
        let s = render_csv(&cfg, &t).unwrap();
        let mut lines = s.lines();
        let head = lines.next().unwrap();
        assert!(head.starts_with("# fairopt density master_seed=0 config={"));
        assert_eq!(lines.next(), Some("a,b"));
        assert_eq!(lines.next(), Some("1,\"x,y\""));
    }
}
