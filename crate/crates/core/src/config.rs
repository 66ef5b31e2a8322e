//! TOML schemas for channel files and experiment configs. Unknown keys are
//! rejected everywhere.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::channel::{BuiltinChannel, CqChannel};
use crate::error::{Error, Result};
use crate::linalg::HermitianMatrix;

/// One output state as real and (optional) imaginary parts, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixSpec {
    pub re: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im: Option<Vec<Vec<f64>>>,
}

/// Channel file: either `builtin = "pure_pair:0.5"` or explicit
/// `letter_dim`, `priors` and `[[outputs]]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub letter_dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub priors: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub outputs: Vec<MatrixSpec>,
}

impl ChannelFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(format!("channel file: {e}")))
    }

    pub fn into_channel(self) -> Result<CqChannel> {
        let ch = match (self.builtin, self.outputs.is_empty()) {
            (Some(spec), true) => {
                if self.letter_dim.is_some() || !self.priors.is_empty() {
                    return Err(Error::config(
                        "builtin channel files take no letter_dim or priors",
                    ));
                }
                CqChannel::builtin(&BuiltinChannel::parse(&spec)?)?
            }
            (None, false) => {
                let outputs = self
                    .outputs
                    .iter()
                    .map(|m| HermitianMatrix::from_parts(&m.re, m.im.as_deref()))
                    .collect::<Result<Vec<_>>>()?;
                if let Some(d) = self.letter_dim {
                    if outputs.iter().any(|o| o.dim() != d) {
                        return Err(Error::validation(format!(
                            "outputs do not all have letter_dim = {d}"
                        )));
                    }
                }
                CqChannel::new(self.priors, outputs)?
            }
            (Some(_), false) => {
                return Err(Error::config("channel file has both builtin and outputs"))
            }
            (None, true) => return Err(Error::config("channel file needs builtin or outputs")),
        };
        Ok(match self.name {
            Some(name) => ch.with_name(name),
            None => ch,
        })
    }
}

pub fn load_channel_file(path: &Path) -> Result<CqChannel> {
    let text =
        fs::read_to_string(path).map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
    let file = ChannelFile::parse(&text)?;
    let fallback = path.file_stem().map(|s| s.to_string_lossy().into_owned());
    let named = file.name.is_some();
    let ch = file.into_channel()?;
    Ok(match (named, fallback) {
        (false, Some(stem)) => ch.with_name(stem),
        _ => ch,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    RankOne,
    Subspace,
    Pgm,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::RankOne => "rank_one",
            Method::Subspace => "subspace",
            Method::Pgm => "pgm",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderingMode {
    #[default]
    Lexicographic,
    /// Each sent codeword's tests go last.
    WorstCase,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExactMode {
    /// Exact oracles run when their estimated cost is small.
    #[default]
    Auto,
    Always,
    Never,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Report,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub format: OutputFormat,
}

fn default_n() -> Vec<usize> {
    vec![4, 6]
}
fn default_rates() -> Vec<f64> {
    vec![0.25]
}
fn default_deltas() -> Vec<f64> {
    vec![0.2]
}
fn default_epsilon() -> f64 {
    0.1
}
fn default_trials() -> u64 {
    10_000
}
fn default_methods() -> Vec<Method> {
    vec![Method::RankOne, Method::Subspace, Method::Pgm]
}
fn default_m_max() -> u64 {
    32
}
fn default_j_max() -> u32 {
    6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Builtin shorthands such as `"pure_pair:0.5"`.
    #[serde(default)]
    pub channels: Vec<String>,
    /// Channel files, relative to the config file.
    #[serde(default)]
    pub channel_files: Vec<PathBuf>,
    #[serde(default = "default_n")]
    pub n: Vec<usize>,
    #[serde(default = "default_rates")]
    pub rates: Vec<f64>,
    #[serde(default = "default_deltas")]
    pub deltas: Vec<f64>,
    #[serde(default = "default_epsilon")]
    pub epsilon_target: f64,
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default)]
    pub ordering: OrderingMode,
    #[serde(default)]
    pub distinct_codewords: bool,
    #[serde(default)]
    pub exact: ExactMode,
    /// Largest `m` in the amplitude lower-bound grid.
    #[serde(default = "default_m_max")]
    pub m_max: u64,
    #[serde(default = "default_j_max")]
    pub j_max: u32,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        toml::from_str("").expect("all fields have defaults")
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::config(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::config(msg));
        if self.n.contains(&0) {
            return bad("n values must be at least 1".into());
        }
        if let Some(r) = self.rates.iter().find(|r| !(r.is_finite() && **r >= 0.0)) {
            return bad(format!("rate {r} must be finite and >= 0"));
        }
        if let Some(d) = self.deltas.iter().find(|d| !(d.is_finite() && **d >= 0.0)) {
            return bad(format!("delta {d} must be finite and >= 0"));
        }
        if !(self.epsilon_target > 0.0 && self.epsilon_target < 1.0) {
            return bad(format!(
                "epsilon_target {} must lie in (0, 1)",
                self.epsilon_target
            ));
        }
        if self.j_max < 1 {
            return bad("j_max must be at least 1".into());
        }
        for c in &self.channels {
            BuiltinChannel::parse(c).map_err(|e| Error::config(e.to_string()))?;
        }
        Ok(())
    }

    /// Channels in config order: shorthands first, then files. Defaults to
    /// the fixture suite when none are given.
    pub fn load_channels(&self) -> Result<Vec<CqChannel>> {
        let mut out = Vec::new();
        for c in &self.channels {
            out.push(CqChannel::builtin(&BuiltinChannel::parse(c)?)?);
        }
        for f in &self.channel_files {
            out.push(load_channel_file(&self.base_dir.join(f))?);
        }
        if out.is_empty() {
            for b in BuiltinChannel::default_fixtures() {
                out.push(CqChannel::builtin(&b)?);
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_every_field() {
        let cfg = ExperimentConfig::default();
        assert_eq!(cfg.n, vec![4, 6]);
        assert_eq!(cfg.methods.len(), 3);
        assert_eq!(cfg.load_channels().unwrap().len(), 5);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ExperimentConfig::parse("trails = 10").is_err());
        assert!(ExperimentConfig::parse("[output]\nfromat = \"csv\"").is_err());
        assert!(ChannelFile::parse("builtin = \"trine\"\nextra = 1").is_err());
    }

    #[test]
    fn validation_errors_are_config_errors() {
        for text in [
            "n = [0]",
            "rates = [-0.1]",
            "epsilon_target = 1.5",
            "channels = [\"nope\"]",
        ] {
            let err = ExperimentConfig::parse(text).unwrap_err();
            assert_eq!(err.exit_code(), 1, "{text}");
        }
    }

    #[test]
    fn explicit_channel_file() {
        let text = r#"
            name = "flip"
            letter_dim = 2
            priors = [0.5, 0.5]
            [[outputs]]
            re = [[1.0, 0.0], [0.0, 0.0]]
            [[outputs]]
            re = [[0.5, 0.0], [0.0, 0.5]]
            im = [[0.0, 0.5], [-0.5, 0.0]]
        "#;
        let ch = ChannelFile::parse(text).unwrap().into_channel().unwrap();
        assert_eq!(ch.name(), "flip");
        assert_eq!(ch.alphabet_size(), 2);
    }

    #[test]
    fn builtin_channel_file() {
        let ch = ChannelFile::parse("builtin = \"pure_pair:0.5\"")
            .unwrap()
            .into_channel()
            .unwrap();
        assert_eq!(ch.letter_dim(), 2);
        let both = "builtin = \"trine\"\npriors = [1.0]";
        assert!(ChannelFile::parse(both).unwrap().into_channel().is_err());
    }
}
