//! Machine-readable output: CSV with full-precision floats and the JSON
//! report documents. Outputs are pure functions of the config, so repeated
//! runs are byte-identical.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use kingman::measure::Measure;

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// 17 significant digits: enough to round-trip any f64 exactly.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// CSV writer with the provenance comment header all outputs carry.
pub struct CsvDoc {
    buf: String,
}

impl CsvDoc {
    pub fn new(config_sha256: &str, columns: &[&str]) -> Self {
        let mut buf = String::new();
        let _ = writeln!(buf, "# kingman v{ARTIFACT_VERSION} config_sha256={config_sha256}");
        let _ = writeln!(buf, "{}", columns.join(","));
        CsvDoc { buf }
    }

    pub fn row(&mut self, fields: &[String]) {
        let _ = writeln!(self.buf, "{}", fields.join(","));
    }

    pub fn write_to(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.buf.as_bytes())
    }
}

#[derive(Serialize)]
pub struct MeasureDto {
    pub atoms: Vec<[f64; 2]>,
}

impl From<&Measure> for MeasureDto {
    fn from(m: &Measure) -> Self {
        MeasureDto {
            atoms: m.atoms().iter().map(|a| [a.location, a.mass]).collect(),
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> std::io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("report serialization");
    text.push('\n');
    std::fs::write(path, text)
}
