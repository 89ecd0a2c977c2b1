//! Result emission: JSON envelopes with version and timestamp, RFC-4180 CSV
//! with a mandatory header row, and optional gnuplot-ready plain columns.

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::config::RunConfig;
use crate::CliError;

pub struct Emitter {
    dir: PathBuf,
    plot: bool,
}

impl Emitter {
    pub fn new(config: &RunConfig, out: Option<&Path>, emit_plot_data: bool) -> Result<Self, CliError> {
        let dir = out
            .map(Path::to_path_buf)
            .unwrap_or_else(|| config.output.dir.clone());
        std::fs::create_dir_all(&dir)
            .map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Emitter {
            dir,
            plot: emit_plot_data || config.output.emit_plot_data,
        })
    }

    /// Wraps a JSON body with the provenance fields every output carries:
    /// tool version, RFC 3339 timestamp, and the full parsed config.
    pub fn envelope(config: &RunConfig, body: Value) -> Value {
        let mut map = Map::new();
        map.insert(
            "version".into(),
            json!(env!("CARGO_PKG_VERSION")),
        );
        map.insert(
            "timestamp".into(),
            json!(chrono::Utc::now().to_rfc3339()),
        );
        map.insert(
            "config_echo".into(),
            serde_json::to_value(config).expect("config serializes"),
        );
        if let Value::Object(fields) = body {
            map.extend(fields);
        }
        Value::Object(map)
    }

    pub fn write_json(&self, name: &str, payload: &impl Serialize) -> Result<PathBuf, CliError> {
        let path = self.dir.join(name);
        let text = serde_json::to_string_pretty(payload)
            .map_err(|e| CliError::Io(format!("cannot serialize {name}: {e}")))?;
        std::fs::write(&path, text + "\n")
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
        Ok(path)
    }

    pub fn write_csv(
        &self,
        name: &str,
        header: &[&str],
        rows: &[Vec<String>],
    ) -> Result<PathBuf, CliError> {
        let path = self.dir.join(name);
        let mut writer = csv::Writer::from_path(&path)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
        let io_err = |e: csv::Error| CliError::Io(format!("cannot write {}: {e}", path.display()));
        writer.write_record(header).map_err(io_err)?;
        for row in rows {
            writer.write_record(row).map_err(io_err)?;
        }
        writer.flush()
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
        Ok(path)
    }

    /// Space-separated columns with a `#` comment header, written only when
    /// plot output is enabled.
    pub fn write_plot(
        &self,
        name: &str,
        columns: &[&str],
        rows: &[Vec<String>],
    ) -> Result<Option<PathBuf>, CliError> {
        if !self.plot {
            return Ok(None);
        }
        let path = self.dir.join(name);
        let mut text = format!("# {}\n", columns.join(" "));
        for row in rows {
            text.push_str(&row.join(" "));
            text.push('\n');
        }
        std::fs::write(&path, text)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
        Ok(Some(path))
    }
}
