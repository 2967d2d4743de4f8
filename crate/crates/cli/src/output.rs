use std::fs;
use std::path::{Path, PathBuf};

use svlab::config::{Format, RunConfig};
use svlab::verify::CheckReport;
use svlab::{Error, GridFunction};

pub struct Sink {
    dir: PathBuf,
    csv: bool,
    json: bool,
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Config(format!("cannot write {}: {e}", path.display()))
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";")
}

impl Sink {
    /// Output directory: config value, then the environment default, then `.`.
    pub fn new(cfg: &RunConfig) -> Result<Self, Error> {
        let dir = cfg
            .output
            .dir
            .clone()
            .or_else(|| std::env::var(crate::OUT_DIR_ENV).ok().filter(|s| !s.is_empty()))
            .unwrap_or_else(|| ".".into());
        let dir = PathBuf::from(dir);
        fs::create_dir_all(&dir).map_err(|e| io_error(&dir, e))?;
        Ok(Sink {
            dir,
            csv: cfg.output.formats.contains(&Format::Csv),
            json: cfg.output.formats.contains(&Format::Json),
        })
    }

    fn write_csv(&self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Option<PathBuf>, Error> {
        if !self.csv {
            return Ok(None);
        }
        let path = self.dir.join(name);
        let mut w = csv::Writer::from_path(&path).map_err(|e| io_error(&path, e))?;
        w.write_record(header).map_err(|e| io_error(&path, e))?;
        for row in rows {
            w.write_record(&row).map_err(|e| io_error(&path, e))?;
        }
        w.flush().map_err(|e| io_error(&path, e))?;
        Ok(Some(path))
    }

    /// `r,u,du,residual`; `du` by centred differences, one-sided at the ends.
    pub fn profile(&self, name: &str, u: &GridFunction, residual: &[f64]) -> Result<Option<PathBuf>, Error> {
        let du = u.derivative();
        let rows = (0..u.len()).map(|i| {
            vec![
                u.nodes()[i].to_string(),
                u.values()[i].to_string(),
                du[i].to_string(),
                residual[i].to_string(),
            ]
        });
        self.write_csv(name, &["r", "u", "du", "residual"], rows)
    }

    pub fn eigen(&self, lambda1: f64, iterations: usize, residual: f64) -> Result<Option<PathBuf>, Error> {
        let row = vec![lambda1.to_string(), iterations.to_string(), residual.to_string()];
        self.write_csv("eigen.csv", &["lambda1", "iterations", "residual"], [row])
    }

    /// `check,passed,measured,expected,tolerance`; vector entries are `;`-joined.
    pub fn checks(&self, reports: &[CheckReport]) -> Result<Option<PathBuf>, Error> {
        let rows = reports.iter().map(|r| {
            vec![
                r.check_name.clone(),
                r.passed.to_string(),
                join(&r.measured),
                join(&r.expected),
                r.tolerance.to_string(),
            ]
        });
        self.write_csv("checks.csv", &["check", "passed", "measured", "expected", "tolerance"], rows)
    }

    pub fn table(&self, name: &str, header: &[&str], rows: &[Vec<f64>]) -> Result<Option<PathBuf>, Error> {
        self.write_csv(name, header, rows.iter().map(|r| r.iter().map(|v| v.to_string()).collect()))
    }

    pub fn summary(&self, value: &serde_json::Value) -> Result<Option<PathBuf>, Error> {
        if !self.json {
            return Ok(None);
        }
        let path = self.dir.join("summary.json");
        let mut text = serde_json::to_string_pretty(value).map_err(|e| io_error(&path, e))?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| io_error(&path, e))?;
        Ok(Some(path))
    }
}
