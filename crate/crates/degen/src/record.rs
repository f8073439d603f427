use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

pub const CSV_HEADER: [&str; 9] = [
    "command", "n", "log_t2", "c_log2", "key", "value", "std_error", "seed", "samples",
];

#[derive(Debug, thiserror::Error)]
pub enum RecordError {
    #[error("output {key} is not finite ({value})")]
    NonFinite { key: String, value: f64 },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Model parameters as given on the command line. Single-fiber commands
/// carry one `log_t2`; sweeps carry the whole list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordConfig {
    pub n: usize,
    pub log_t2: Vec<f64>,
    pub c_log2: f64,
}

/// One experiment run. Every output has a standard error (0 when exact), and
/// `metadata` spells out units and conventions so the file stands alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub schema: u32,
    pub command: String,
    pub config: RecordConfig,
    pub seed: u64,
    pub samples: u64,
    pub outputs: BTreeMap<String, f64>,
    pub std_errors: BTreeMap<String, f64>,
    /// Only filled with `--timing`, so default records are reproducible byte for byte.
    pub wall_time_ms: Option<u64>,
    pub metadata: BTreeMap<String, String>,
}

impl RunRecord {
    pub fn new(command: &str, config: RecordConfig, seed: u64, samples: u64) -> Self {
        let mut metadata = BTreeMap::new();
        metadata.insert("log_t2".into(), "natural log of |t|^2; |t| itself is never formed".into());
        metadata.insert("c_log2".into(), "natural log of c^2 for the polydisk radius c".into());
        metadata.insert("generator".into(), format!("degen {}", env!("CARGO_PKG_VERSION")));
        RunRecord {
            schema: SCHEMA_VERSION,
            command: command.into(),
            config,
            seed,
            samples,
            outputs: BTreeMap::new(),
            std_errors: BTreeMap::new(),
            wall_time_ms: None,
            metadata,
        }
    }

    pub fn push(&mut self, key: impl Into<String>, value: f64, std_error: f64) {
        let key = key.into();
        self.outputs.insert(key.clone(), value);
        self.std_errors.insert(key, std_error);
    }

    pub fn exact(&mut self, key: impl Into<String>, value: f64) {
        self.push(key, value, 0.0);
    }

    pub fn note(&mut self, key: impl Into<String>, text: impl Into<String>) {
        self.metadata.insert(key.into(), text.into());
    }

    fn check_finite(&self) -> Result<(), RecordError> {
        for (key, &value) in self.outputs.iter().chain(&self.std_errors) {
            if !value.is_finite() {
                return Err(RecordError::NonFinite { key: key.clone(), value });
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String, RecordError> {
        self.check_finite()?;
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(s: &str) -> Result<Self, RecordError> {
        Ok(serde_json::from_str(s)?)
    }

    /// `log_t2` for one CSV row: the row's own fiber for `row.{i}.*` keys of a
    /// sweep, the single fiber otherwise, blank for sweep-wide keys.
    fn row_log_t2(&self, key: &str) -> Option<f64> {
        if let [lt] = self.config.log_t2[..] {
            return Some(lt);
        }
        let index = key.strip_prefix("row.")?.split('.').next()?.parse::<usize>().ok()?;
        self.config.log_t2.get(index).copied()
    }

    /// Long-format CSV, one line per output key.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), RecordError> {
        self.check_finite()?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_HEADER)?;
        for (key, value) in &self.outputs {
            let lt = self.row_log_t2(key).map(number).unwrap_or_default();
            w.write_record([
                self.command.as_str(),
                &self.config.n.to_string(),
                &lt,
                &number(self.config.c_log2),
                key,
                &number(*value),
                &number(self.std_errors[key]),
                &self.seed.to_string(),
                &self.samples.to_string(),
            ])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

/// Shortest round-trip spelling, identical to the JSON one.
fn number(x: f64) -> String {
    serde_json::to_string(&x).expect("finite floats serialize")
}
