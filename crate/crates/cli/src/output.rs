use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Serialize;
use ttess::approximation::Landscape;
use ttess::geometry::Polygon;
use ttess::tessellation::TessFile;
use ttess::{ApproxError, GibbsModel, TTess, TessError};

pub const EXIT_PARSE: u8 = 2;
pub const EXIT_INVALID: u8 = 3;
pub const EXIT_REPAIR: u8 = 4;
pub const EXIT_NOT_CONVERGED: u8 = 5;
const EXIT_IO: u8 = 1;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Failure { code, message: message.into() }
    }

    pub fn parse(message: impl Into<String>) -> Self {
        Failure::new(EXIT_PARSE, message)
    }

    pub fn invalid(message: impl Into<String>) -> Self {
        Failure::new(EXIT_INVALID, message)
    }

    pub fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        Failure::new(EXIT_IO, format!("{}: {e}", path.display()))
    }
}

impl From<ApproxError> for Failure {
    fn from(e: ApproxError) -> Self {
        let code = match &e {
            ApproxError::Parse(_) => EXIT_PARSE,
            ApproxError::Config(_) | ApproxError::Landscape(_) | ApproxError::Geometry(_) | ApproxError::NoSides => {
                EXIT_INVALID
            }
            ApproxError::Tess(_) | ApproxError::RepairLimit(_) | ApproxError::Unrepaired(_) => EXIT_REPAIR,
        };
        Failure::new(code, e.to_string())
    }
}

pub fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::parse(format!("cannot read {}: {e}", path.display())))
}

fn tess_failure(path: &Path, e: TessError) -> Failure {
    let code = if matches!(e, TessError::Format(_)) { EXIT_PARSE } else { EXIT_INVALID };
    Failure::new(code, format!("{}: {e}", path.display()))
}

pub fn read_tessellation(path: &Path) -> Result<TTess, Failure> {
    let text = read_text(path)?;
    let file = TessFile::from_json(&text).map_err(|e| tess_failure(path, e))?;
    file.to_tess().map_err(|e| tess_failure(path, e))
}

/// Window of a tessellation file; its segments are ignored.
pub fn read_window(path: Option<&Path>) -> Result<Polygon, Failure> {
    let Some(path) = path else {
        return Ok(Polygon::unit_square());
    };
    let text = read_text(path)?;
    let file = TessFile::from_json(&text).map_err(|e| tess_failure(path, e))?;
    file.window_polygon().map_err(|e| tess_failure(path, e))
}

pub fn read_model(path: &Path) -> Result<GibbsModel, Failure> {
    let text = read_text(path)?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Failure::parse(format!("{}: {e}", path.display())))?;
    serde_json::from_value(value).map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))
}

pub fn read_landscape(path: &Path) -> Result<Landscape, Failure> {
    Ok(Landscape::from_geojson(&read_text(path)?)?)
}

/// Collects output files in one directory; each file is written to a
/// temporary sibling and renamed into place.
pub struct OutDir {
    pub root: PathBuf,
    written: Vec<PathBuf>,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self, Failure> {
        fs::create_dir_all(root).map_err(|e| Failure::io(root, e))?;
        Ok(OutDir { root: root.to_path_buf(), written: Vec::new() })
    }

    pub fn subdir(&self, name: &str) -> Result<PathBuf, Failure> {
        let p = self.root.join(name);
        fs::create_dir_all(&p).map_err(|e| Failure::io(&p, e))?;
        Ok(p)
    }

    pub fn write(&mut self, rel: impl AsRef<Path>, bytes: &[u8]) -> Result<(), Failure> {
        let path = self.root.join(rel.as_ref());
        write_atomic(&path, bytes)?;
        self.written.push(path);
        Ok(())
    }

    pub fn write_json(&mut self, rel: impl AsRef<Path>, value: &impl Serialize) -> Result<(), Failure> {
        let mut text = serde_json::to_string_pretty(value).expect("outputs serialize");
        text.push('\n');
        self.write(rel, text.as_bytes())
    }

    /// Writes `rows` under `header` as RFC 4180 CSV.
    pub fn write_csv<R: IntoIterator<Item = String>>(
        &mut self,
        rel: impl AsRef<Path>,
        header: &[String],
        rows: impl IntoIterator<Item = R>,
    ) -> Result<(), Failure> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let path = self.root.join(rel.as_ref());
        w.write_record(header).map_err(|e| Failure::io(&path, e))?;
        for r in rows {
            w.write_record(r).map_err(|e| Failure::io(&path, e))?;
        }
        let bytes = w.into_inner().map_err(|e| Failure::io(&path, e))?;
        self.write(rel, &bytes)
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Failure::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Failure::io(path, e))?;
    tmp.persist(path).map_err(|e| Failure::io(path, e.error))?;
    Ok(())
}

/// Everything needed to re-run a command.
#[derive(Debug, Serialize)]
pub struct RunManifest<'a> {
    pub command: &'a str,
    pub arguments: Vec<String>,
    pub seed: u64,
    pub threads: Option<usize>,
    pub config_file: Option<PathBuf>,
    pub config: serde_json::Value,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub version: &'static str,
    pub duration_seconds: f64,
    pub exit_code: u8,
}

impl RunManifest<'_> {
    pub fn new<'a>(command: &'a str, global: &crate::Global, config: serde_json::Value) -> RunManifest<'a> {
        RunManifest {
            command,
            arguments: std::env::args().collect(),
            seed: global.seed,
            threads: global.threads,
            config_file: global.config.clone(),
            config,
            inputs: Vec::new(),
            outputs: Vec::new(),
            version: env!("CARGO_PKG_VERSION"),
            duration_seconds: 0.0,
            exit_code: 0,
        }
    }

    pub fn finish(mut self, out: &OutDir, elapsed: Duration) -> Result<(), Failure> {
        self.outputs = out.written().to_vec();
        self.duration_seconds = elapsed.as_secs_f64();
        let mut text = serde_json::to_string_pretty(&self).expect("manifest serializes");
        text.push('\n');
        write_atomic(&out.root.join("manifest.json"), text.as_bytes())
    }
}
