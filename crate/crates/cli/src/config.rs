//! Experiment configuration: JSON files, flag overrides, output paths, and
//! the machine-readable run report.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::CliError;

/// Seed used when neither the config file nor the flags provide one.
pub const DEFAULT_SEED: u64 = 0x00C0_FFEE;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "HARQ_MODELS_OUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedSource {
    Flag,
    Config,
    Default,
}

/// Loads a JSON config file into the experiment's config type.
pub fn load_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T, CliError> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", p.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("config {}: {e}", p.display())))
        }
    }
}

/// Resolves the output CSV path: explicit value, else the experiment default
/// name, both joined to `HARQ_MODELS_OUT_DIR` when relative.
pub fn resolve_out(out: Option<PathBuf>, default_name: &str) -> PathBuf {
    let path = out.unwrap_or_else(|| PathBuf::from(default_name));
    if path.is_absolute() {
        return path;
    }
    match std::env::var_os(OUT_DIR_ENV) {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir).join(path),
        _ => path,
    }
}

/// Sidecar report written next to each CSV artifact.
#[derive(Debug, Serialize)]
pub struct Report<C: Serialize, S: Serialize> {
    pub experiment: &'static str,
    pub version: &'static str,
    pub seed: u64,
    pub seed_source: SeedSource,
    pub config: C,
    pub output_csv: String,
    pub summary: S,
}

pub fn write_artifacts<C: Serialize, S: Serialize>(
    csv_path: &Path,
    csv_body: &str,
    report: &Report<C, S>,
) -> Result<(), CliError> {
    if let Some(dir) = csv_path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)
                .map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
        }
    }
    fs::write(csv_path, csv_body)
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", csv_path.display())))?;
    let report_path = csv_path.with_extension("report.json");
    let mut text = serde_json::to_string_pretty(report)
        .map_err(|e| CliError::Io(format!("cannot encode report: {e}")))?;
    text.push('\n');
    fs::write(&report_path, text)
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", report_path.display())))?;
    Ok(())
}

/// Validates a positive, finite numeric config value, naming the key.
pub fn require_positive(key: &str, value: f64) -> Result<f64, CliError> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(CliError::Config(format!(
            "invalid config key `{key}`: must be positive and finite, got {value}"
        )))
    }
}

/// Parses a generator polynomial given in octal digits (e.g. "15").
pub fn parse_octal(key: &str, digits: &str) -> Result<u32, CliError> {
    u32::from_str_radix(digits, 8)
        .map_err(|_| CliError::Config(format!("invalid config key `{key}`: `{digits}` is not octal")))
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct CodeConfig {
    /// Message length in bits.
    #[serde(default = "default_nb")]
    pub nb: usize,
    /// Feedforward generator, octal digits.
    #[serde(default = "default_ff")]
    pub gen_ff: String,
    /// Feedback generator, octal digits.
    #[serde(default = "default_fb")]
    pub gen_fb: String,
    #[serde(default = "default_memory")]
    pub memory: usize,
}

fn default_nb() -> usize {
    128
}
fn default_ff() -> String {
    "15".into()
}
fn default_fb() -> String {
    "13".into()
}
fn default_memory() -> usize {
    3
}

impl Default for CodeConfig {
    fn default() -> Self {
        CodeConfig {
            nb: default_nb(),
            gen_ff: default_ff(),
            gen_fb: default_fb(),
            memory: default_memory(),
        }
    }
}

impl CodeConfig {
    pub fn build(&self) -> Result<harq_models::CodeSpec, CliError> {
        let ff = parse_octal("gen_ff", &self.gen_ff)?;
        let fb = parse_octal("gen_fb", &self.gen_fb)?;
        harq_models::CodeSpec::new(ff, fb, self.memory, self.nb)
            .map_err(|e| CliError::Config(format!("invalid code config: {e}")))
    }
}
