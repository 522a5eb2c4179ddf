use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use serde_json::Value;

use crate::error::CliResult;

/// One JSON line per command run.
#[derive(Debug, Serialize)]
pub struct RunReport {
    pub command: String,
    pub tool_version: &'static str,
    pub seed: Option<u64>,
    pub threads: usize,
    pub config: Value,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub wall_ms: f64,
    pub metrics: BTreeMap<String, Value>,
    #[serde(skip)]
    started: Option<Instant>,
}

impl RunReport {
    pub fn start(command: &str) -> Self {
        RunReport {
            command: command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION"),
            seed: None,
            threads: rayon::current_num_threads(),
            config: Value::Null,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            wall_ms: 0.0,
            metrics: BTreeMap::new(),
            started: Some(Instant::now()),
        }
    }

    pub fn input(&mut self, path: &Path) -> CliResult<Vec<u8>> {
        let bytes = fs::read(path).map_err(|e| crate::error::CliError::input_io(path, e))?;
        self.inputs
            .insert(path.display().to_string(), lgimap_core::io::sha256_hex(&bytes));
        Ok(bytes)
    }

    pub fn output(&mut self, path: &Path, bytes: &[u8]) -> CliResult<()> {
        fs::write(path, bytes).map_err(|e| crate::error::CliError::output_io(path, e))?;
        self.outputs
            .insert(path.display().to_string(), lgimap_core::io::sha256_hex(bytes));
        Ok(())
    }

    pub fn metric(&mut self, key: &str, value: impl Serialize) {
        self.metrics
            .insert(key.to_string(), serde_json::to_value(value).unwrap_or(Value::Null));
    }

    /// Records a metric that may be undefined (degenerate denominator).
    pub fn metric_or_undefined(&mut self, key: &str, value: lgimap_core::Result<f64>) {
        match value {
            Ok(v) => self.metric(key, v),
            Err(_) => self.metric(key, "undefined"),
        }
    }

    pub fn finish(mut self, write_to: Option<&Path>) -> CliResult<()> {
        if let Some(t) = self.started.take() {
            self.wall_ms = t.elapsed().as_secs_f64() * 1e3;
        }
        let line = serde_json::to_string(&self).expect("report serializes");
        // A closed stdout (e.g. piped into `head`) is not an error for the run itself.
        let _ = writeln!(std::io::stdout().lock(), "{line}");
        if let Some(path) = write_to {
            fs::write(path, format!("{line}\n")).map_err(|e| crate::error::CliError::output_io(path, e))?;
        }
        Ok(())
    }
}
