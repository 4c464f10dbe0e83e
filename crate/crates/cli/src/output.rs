//! Output directory handling and run manifests.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use crate::error::{CliError, Result};

pub const OUT_ENV: &str = "FRACSTEP_OUT_DIR";

pub struct Output {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Output {
    pub fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    /// Writes one file through `body`.
    pub fn write<F>(&mut self, name: &str, body: F) -> Result<PathBuf>
    where
        F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
    {
        let path = self.dir.join(name);
        let io = |source| CliError::Io {
            path: path.clone(),
            source,
        };
        let file = File::create(&path).map_err(io)?;
        let mut w = BufWriter::new(file);
        body(&mut w).map_err(io)?;
        w.flush().map_err(io)?;
        println!("wrote {}", path.display());
        self.written.push(path.clone());
        Ok(path)
    }

    /// Writes `<command>.manifest.json` with the resolved configuration.
    pub fn manifest<C: Serialize>(&mut self, command: &str, config: &C) -> Result<()> {
        let outputs: Vec<String> = self
            .written
            .iter()
            .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
            .collect();
        let doc = json!({
            "command": command,
            "config": config,
            "seed": 0,
            "versions": {
                "fracstep": fracstep::VERSION,
                "fracstep-cli": env!("CARGO_PKG_VERSION"),
            },
            "threads": rayon::current_num_threads(),
            "outputs": outputs,
        });
        let text = serde_json::to_string_pretty(&doc).expect("manifest is plain data");
        self.write(&format!("{command}.manifest.json"), |w| writeln!(w, "{text}"))?;
        Ok(())
    }
}

/// `inf` for unbounded values, full precision otherwise.
pub fn fmt_value(x: f64) -> String {
    if x.is_infinite() {
        "inf".into()
    } else {
        format!("{x:.10e}")
    }
}
