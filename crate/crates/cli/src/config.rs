//! Run configuration files: TOML, or JSON when the file ends in `.json` or
//! starts with `{`. Relative paths resolve against the file's directory.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use wei_norman::{IntegrationConfig, RowOrder, SignalSpec};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum TrajectoryFormat {
    #[default]
    Json,
    Csv,
}

impl TrajectoryFormat {
    /// CSV for a `.csv` extension, JSON otherwise.
    pub fn infer(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => TrajectoryFormat::Csv,
            _ => TrajectoryFormat::Json,
        }
    }
}

/// Signal given inline, or as `{ file = "..." }` naming a JSON or TOML
/// signal description.
#[derive(Clone, Debug, PartialEq)]
pub enum SignalSource {
    File(PathBuf),
    Inline(SignalSpec),
}

impl<'de> Deserialize<'de> for SignalSource {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error as _;
        let value = serde_json::Value::deserialize(d)?;
        match value.as_object() {
            Some(obj) if obj.contains_key("file") => {
                if obj.len() != 1 {
                    return Err(D::Error::custom("a signal file reference takes no other keys"));
                }
                let file = obj["file"].as_str().ok_or_else(|| D::Error::custom("signal file must be a string"))?;
                Ok(SignalSource::File(file.into()))
            }
            _ => serde_json::from_value(value).map(SignalSource::Inline).map_err(D::Error::custom),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub path: Option<PathBuf>,
    pub format: Option<TrajectoryFormat>,
    pub oracle_path: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub n: usize,
    #[serde(default)]
    pub ordering: RowOrder,
    #[serde(default)]
    pub seed: Option<u64>,
    pub signal: SignalSource,
    #[serde(default)]
    pub integration: IntegrationConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn is_json(path: &Path, text: &str) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) || text.trim_start().starts_with('{')
}

/// Both formats go through a JSON value, so TOML integers are accepted
/// where floats are expected.
fn parse<T: for<'de> Deserialize<'de>>(path: &Path, text: &str) -> Result<T, String> {
    let err = |e: &dyn std::fmt::Display| format!("{}: {e}", path.display());
    let value: serde_json::Value = if is_json(path, text) {
        serde_json::from_str(text).map_err(|e| err(&e))?
    } else {
        let table: toml::Table = toml::from_str(text).map_err(|e| err(&e))?;
        serde_json::to_value(table).map_err(|e| err(&e))?
    };
    serde_json::from_value(value).map_err(|e| err(&e))
}

fn read(path: &Path) -> Result<String, String> {
    fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let mut config: RunConfig = parse(path, &read(path)?)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let SignalSource::File(file) = &mut config.signal {
            resolve(file);
        }
        if let Some(p) = &mut config.output.path {
            resolve(p);
        }
        if let Some(p) = &mut config.output.oracle_path {
            resolve(p);
        }
        Ok(config)
    }

    pub fn signal_spec(&self) -> Result<SignalSpec, String> {
        match &self.signal {
            SignalSource::Inline(spec) => Ok(spec.clone()),
            SignalSource::File(file) => parse(file, &read(file)?),
        }
    }
}
