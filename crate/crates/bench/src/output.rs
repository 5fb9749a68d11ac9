//! File output with path-carrying errors.

use std::path::{Path, PathBuf};

use crate::BenchError;

pub fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> BenchError + '_ {
    move |source| BenchError::Io { path: path.to_path_buf(), source }
}

pub fn ensure_dir(dir: &Path) -> Result<(), BenchError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), BenchError> {
    std::fs::write(path, contents).map_err(io_err(path))
}

/// Float in shortest round-trip form, or empty for a missing value.
pub fn num(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:?}"),
        None => String::new(),
    }
}

/// An in-memory CSV table written in one go.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.header.len(), "row width");
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<String, csv::Error> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv of utf-8 fields"))
    }

    pub fn write(&self, path: &Path) -> Result<(), BenchError> {
        let text = self.to_csv().map_err(|source| BenchError::Csv { path: path.to_path_buf(), source })?;
        write_file(path, &text)
    }
}

/// Writes several named files into `dir`, returning their paths.
pub fn write_all(dir: &Path, files: &[(String, String)]) -> Result<Vec<PathBuf>, BenchError> {
    ensure_dir(dir)?;
    files
        .iter()
        .map(|(name, text)| {
            let p = dir.join(name);
            write_file(&p, text).map(|_| p)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let mut t = Table::new(&["a", "b"]);
        t.push(vec![num(Some(0.1)), num(None)]);
        t.push(vec!["x,y".into(), "1".into()]);
        let text = t.to_csv().unwrap();
        assert_eq!(text, "a,b\n0.1,\n\"x,y\",1\n");
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let recs: Vec<csv::StringRecord> = r.records().map(|r| r.unwrap()).collect();
        assert_eq!(recs[0][0].parse::<f64>().unwrap(), 0.1);
        assert_eq!(&recs[1][0], "x,y");
    }
}
