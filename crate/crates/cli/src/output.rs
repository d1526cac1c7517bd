//! Run manifests and deterministic number formatting.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::Value;

/// Significant digits kept in every emitted number.
pub const SIG_DIGITS: usize = 12;

/// Provenance embedded in every output.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub config: Value,
    pub seed: u64,
    pub version: &'static str,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
}

impl RunManifest {
    pub fn new(subcommand: &str, config: impl Serialize, seed: u64) -> Self {
        Self {
            subcommand: subcommand.to_owned(),
            config: rounded(serde_json::to_value(config).unwrap_or(Value::Null)),
            seed,
            version: env!("CARGO_PKG_VERSION"),
            timestamp: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
        }
    }
}

/// `x` rounded to [`SIG_DIGITS`] significant digits.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", SIG_DIGITS - 1, x).parse().unwrap_or(x)
}

/// Number as text for CSV cells; `inf` for infinities.
pub fn fmt_num(x: f64) -> String {
    if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_owned()
    } else {
        format!("{}", round_sig(x))
    }
}

/// Rounds every float in a JSON tree.
pub fn rounded(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => n
            .as_f64()
            .and_then(|x| serde_json::Number::from_f64(round_sig(x)))
            .map_or(Value::Null, Value::Number),
        Value::Array(a) => Value::Array(a.into_iter().map(rounded).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, rounded(v))).collect()),
        other => other,
    }
}

/// Pretty JSON with the manifest under `"manifest"`, numbers rounded.
pub fn to_json(manifest: &RunManifest, body: impl Serialize) -> serde_json::Result<String> {
    let mut v = rounded(serde_json::to_value(body)?);
    if let Value::Object(map) = &mut v {
        map.insert("manifest".into(), serde_json::to_value(manifest)?);
    }
    serde_json::to_string_pretty(&v)
}

pub fn emit_json(manifest: &RunManifest, body: impl Serialize, out: Option<&Path>) -> io::Result<()> {
    let text = to_json(manifest, body).map_err(io::Error::other)?;
    match out {
        Some(path) => std::fs::write(path, text + "\n"),
        None => {
            let mut stdout = io::stdout().lock();
            writeln!(stdout, "{text}")
        }
    }
}

/// CSV writer whose first line is `# <manifest JSON>`.
pub fn csv_with_manifest(path: &Path, manifest: &RunManifest) -> io::Result<csv::Writer<BufWriter<File>>> {
    let mut file = BufWriter::new(File::create(path)?);
    let line = serde_json::to_string(manifest).map_err(io::Error::other)?;
    writeln!(file, "# {line}")?;
    Ok(csv::Writer::from_writer(file))
}
