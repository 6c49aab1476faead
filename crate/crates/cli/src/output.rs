//! CSV result tables and their reproducibility metadata.

use std::io::Write;
use std::path::{Path, PathBuf};

/// A rectangular result table with the metadata needed to reproduce it.
///
/// Files start with `# key = value` comment lines (full config echo, seed,
/// build id, timestamp), then a mandatory header row, then the data. Values
/// always use the dot decimal separator and LF line endings.
pub struct ResultTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub metadata: Vec<(String, String)>,
}

impl ResultTable {
    pub fn new(columns: &[&str], metadata: Vec<(String, String)>) -> Self {
        let mut meta = vec![
            ("build".into(), format!("cellnet {}", env!("CARGO_PKG_VERSION"))),
            (
                "timestamp_unix".into(),
                std::time::SystemTime::now()
                    .duration_since(std::time::UNIX_EPOCH)
                    .map(|d| d.as_secs().to_string())
                    .unwrap_or_else(|_| "0".into()),
            ),
        ];
        meta.extend(metadata);
        ResultTable {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            metadata: meta,
        }
    }

    pub fn push_row(&mut self, values: &[f64]) {
        assert_eq!(values.len(), self.columns.len(), "row width mismatch");
        self.rows.push(values.iter().map(|v| format!("{v}")).collect());
    }

    pub fn push_mixed_row(&mut self, values: Vec<String>) {
        assert_eq!(values.len(), self.columns.len(), "row width mismatch");
        self.rows.push(values);
    }

    pub fn write_csv(&self, path: &Path) -> std::io::Result<()> {
        let mut file = std::fs::File::create(path)?;
        for (key, value) in &self.metadata {
            writeln!(file, "# {key} = {value}")?;
        }
        writeln!(file, "{}", self.columns.join(","))?;
        for row in &self.rows {
            writeln!(file, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Write a table and its chart next to each other, returning the paths.
pub fn write_outputs(
    out_dir: &Path,
    stem: &str,
    table: &ResultTable,
    svg: Option<String>,
) -> std::io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    let csv_path = out_dir.join(format!("{stem}.csv"));
    table.write_csv(&csv_path)?;
    written.push(csv_path);
    if let Some(svg) = svg {
        let svg_path = out_dir.join(format!("{stem}.svg"));
        std::fs::write(&svg_path, svg)?;
        written.push(svg_path);
    }
    Ok(written)
}
