use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::RunConfig;

/// Collects the files a run writes under its output directory.
pub struct Output {
    dir: PathBuf,
    written: Vec<String>,
}

impl Output {
    pub fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))?;
        Ok(Output {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, contents).with_context(|| format!("cannot write {}", path.display()))?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, &text)
    }

    pub fn files(&self) -> &[String] {
        &self.written
    }
}

pub fn manifest(config: &RunConfig, files: &[String], exit_code: i32, error: Option<String>) -> Value {
    let created = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    json!({
        "tool": "gpsh",
        "version": env!("CARGO_PKG_VERSION"),
        "command": config.command,
        "config": config,
        "outputs": files,
        "exit_code": exit_code,
        "error": error,
        "created_unix": created,
    })
}

/// Rows of comma-separated numbers; blank lines, '#' comments and a
/// non-numeric header row are skipped.
pub fn read_numeric_csv(path: &str) -> Result<Vec<Vec<f64>>> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {path}"))?;
    parse_numeric_csv(&text).with_context(|| format!("malformed CSV in {path}"))
}

pub fn parse_numeric_csv(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(|f| f.parse::<f64>()).collect();
        match parsed {
            Ok(r) => rows.push(r),
            Err(_) if k == 0 && rec.iter().any(|f| f.chars().any(char::is_alphabetic)) => continue,
            Err(e) => anyhow::bail!("row {}: {e} in {:?}", k + 1, rec.iter().collect::<Vec<_>>()),
        }
    }
    Ok(rows)
}

/// Gnuplot script for a field CSV "x..,value".
pub fn field_plot(csv: &str, dim: usize, title: &str) -> String {
    let body = match dim {
        1 => format!("plot '{csv}' using 1:2 with linespoints title '{title}'"),
        2 => format!("set view map\nsplot '{csv}' using 1:2:3 with points pointtype 5 palette title '{title}'"),
        _ => format!("splot '{csv}' using 1:2:3:4 with points palette title '{title}'"),
    };
    format!("set datafile separator ','\nset key autotitle columnhead\n{body}\npause -1\n")
}

pub fn history_plot(csv: &str) -> String {
    format!(
        "set datafile separator ','\nset logscale y\nset xlabel 'sweep'\nset ylabel 'max change'\n\
         plot '{csv}' using 1:2 with lines title 'residual history'\npause -1\n"
    )
}
