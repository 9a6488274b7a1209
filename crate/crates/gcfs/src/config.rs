//! Experiment configuration files (TOML).

use std::path::{Path, PathBuf};

use gcfs_core::sim::{default_warmup, Policy};
use gcfs_core::{Channel, Rayleigh, Scenario, SystemParams, Tabulated, TrafficModel, Uniform};
use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: SystemSection,
    pub channel: ChannelSection,
    pub traffic: TrafficSection,
    #[serde(default)]
    pub run: RunSection,
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub output: OutputSection,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    pub users: usize,
    pub bandwidth: f64,
    pub slot_duration: f64,
    pub power: f64,
    pub noise: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "lowercase")]
pub enum ChannelSection {
    Rayleigh,
    Uniform { h_max: f64 },
    /// Two CSV columns `h,density`, with an optional header row.
    Table { path: PathBuf },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrafficSection {
    pub theta: Option<Vec<f64>>,
    pub theta1: Option<f64>,
    #[serde(default = "one")]
    pub packet_bits: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    Gcfs,
    Threshold,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default = "default_policy")]
    pub policy: PolicyKind,
    /// Gain threshold for the threshold policy; the mean-field `h_th` if absent.
    pub threshold: Option<f64>,
    #[serde(default = "default_horizon")]
    pub horizon: u64,
    pub warmup: Option<u64>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "yes")]
    pub trace: bool,
    /// Parallel simulations; the CLI flag and `GCFS_WORKERS` take precedence.
    pub workers: Option<usize>,
}

fn default_policy() -> PolicyKind {
    PolicyKind::Gcfs
}
fn default_horizon() -> u64 {
    20_000
}
fn default_seeds() -> Vec<u64> {
    vec![1]
}
fn yes() -> bool {
    true
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            policy: default_policy(),
            threshold: None,
            horizon: default_horizon(),
            warmup: None,
            seeds: default_seeds(),
            trace: true,
            workers: None,
        }
    }
}

impl RunSection {
    pub fn warmup(&self) -> u64 {
        self.warmup.unwrap_or_else(|| default_warmup(self.horizon))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    Power,
    Theta1,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    /// Bernoulli rates crossed with a power sweep.
    pub theta1: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
}

fn invalid(field: &str, message: impl Into<String>) -> CliError {
    CliError::Config {
        field: field.to_string(),
        message: message.into(),
    }
}

fn positive(field: &str, x: f64) -> Result<(), CliError> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(invalid(field, format!("must be positive and finite, got {x}")))
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let mut cfg = Self::parse(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| {
            let field = e
                .span()
                .and_then(|s| key_at(text, s.start))
                .unwrap_or_else(|| "config".to_string());
            invalid(&field, e.message().to_string())
        })
    }

    /// Checks every field against the model invariants; the error names the
    /// first offending field.
    pub fn validate(&self) -> Result<(), CliError> {
        let s = &self.system;
        if s.users == 0 {
            return Err(invalid("system.users", "must be at least 1"));
        }
        positive("system.bandwidth", s.bandwidth)?;
        positive("system.slot_duration", s.slot_duration)?;
        positive("system.power", s.power)?;
        positive("system.noise", s.noise)?;
        if let ChannelSection::Uniform { h_max } = self.channel {
            positive("channel.h_max", h_max)?;
        }
        self.channel()?;
        self.traffic(None)?;
        self.system(None)?;
        let r = &self.run;
        if r.horizon == 0 {
            return Err(invalid("run.horizon", "must be at least 1"));
        }
        if r.warmup() >= r.horizon {
            return Err(invalid("run.warmup", "must be smaller than run.horizon"));
        }
        if r.workers == Some(0) {
            return Err(invalid("run.workers", "must be at least 1"));
        }
        if r.seeds.is_empty() {
            return Err(invalid("run.seeds", "must list at least one seed"));
        }
        if let Some(h) = r.threshold {
            if !(h >= 0.0 && h.is_finite()) {
                return Err(invalid("run.threshold", "must be finite and nonnegative"));
            }
            if r.policy != PolicyKind::Threshold {
                return Err(invalid("run.threshold", "only applies to policy = \"threshold\""));
            }
        }
        if let Some(sw) = &self.sweep {
            if sw.values.len() < 2 {
                return Err(invalid("sweep.values", "a sweep needs at least two values"));
            }
            match sw.axis {
                SweepAxis::Power => {
                    for &v in &sw.values {
                        positive("sweep.values", v)?;
                    }
                }
                SweepAxis::Theta1 => {
                    if sw.theta1.is_some() {
                        return Err(invalid("sweep.theta1", "not allowed when sweeping theta1"));
                    }
                    for &v in &sw.values {
                        self.bernoulli(v, "sweep.values")?;
                    }
                }
            }
            if let Some(list) = &sw.theta1 {
                for &v in list {
                    self.bernoulli(v, "sweep.theta1")?;
                }
            }
        }
        Ok(())
    }

    fn bernoulli(&self, theta1: f64, field: &str) -> Result<TrafficModel, CliError> {
        if !(theta1 > 0.0 && theta1 <= 1.0) {
            return Err(invalid(field, format!("theta1 must lie in (0, 1], got {theta1}")));
        }
        TrafficModel::bernoulli(theta1, self.traffic.packet_bits)
            .map_err(|e| invalid(field, e.to_string()))
    }

    pub fn channel(&self) -> Result<Channel, CliError> {
        Ok(match &self.channel {
            ChannelSection::Rayleigh => Channel::Rayleigh(Rayleigh),
            ChannelSection::Uniform { h_max } => Channel::Uniform(
                Uniform::new(*h_max).map_err(|e| invalid("channel.h_max", e.to_string()))?,
            ),
            ChannelSection::Table { path } => {
                let full = self.base_dir.join(path);
                let (knots, density) = read_table(&full)?;
                Channel::Tabulated(
                    Tabulated::new(knots, density)
                        .map_err(|e| invalid("channel.path", e.to_string()))?,
                )
            }
        })
    }

    /// Traffic model, with the Bernoulli rate replaced when `theta1` is given.
    pub fn traffic(&self, theta1: Option<f64>) -> Result<TrafficModel, CliError> {
        let t = &self.traffic;
        positive("traffic.packet_bits", t.packet_bits)?;
        if let Some(v) = theta1 {
            return self.bernoulli(v, "traffic.theta1");
        }
        match (&t.theta, t.theta1) {
            (Some(_), Some(_)) => Err(invalid("traffic", "give either theta or theta1, not both")),
            (None, None) => Err(invalid("traffic", "one of theta or theta1 is required")),
            (None, Some(v)) => self.bernoulli(v, "traffic.theta1"),
            (Some(theta), None) => TrafficModel::new(theta.clone(), t.packet_bits)
                .map_err(|e| invalid("traffic.theta", e.to_string())),
        }
    }

    pub fn system(&self, power: Option<f64>) -> Result<SystemParams, CliError> {
        let s = &self.system;
        let power = power.unwrap_or(s.power);
        SystemParams::new(s.users, s.bandwidth, s.slot_duration, power, s.noise)
            .map_err(|e| invalid("system", e.to_string()))
    }

    pub fn scenario(&self, power: Option<f64>, theta1: Option<f64>) -> Result<Scenario, CliError> {
        Ok(Scenario {
            channel: self.channel()?,
            traffic: self.traffic(theta1)?,
            system: self.system(power)?,
        })
    }

    /// Policy for simulation, given the mean-field threshold.
    pub fn policy(&self, mean_field_threshold: f64) -> Policy {
        match self.run.policy {
            PolicyKind::Gcfs => Policy::Gcfs,
            PolicyKind::Threshold => {
                Policy::Threshold(self.run.threshold.unwrap_or(mean_field_threshold))
            }
        }
    }

    /// Output directory from the config, relative to the config file.
    pub fn output_dir(&self) -> Option<PathBuf> {
        self.output.dir.as_ref().map(|d| self.base_dir.join(d))
    }
}

/// Dotted key of the line holding byte `pos`, qualified by the enclosing
/// `[table]` header.
fn key_at(text: &str, pos: usize) -> Option<String> {
    let pos = pos.min(text.len());
    let start = text[..pos].rfind('\n').map_or(0, |i| i + 1);
    let line = text[start..].lines().next().unwrap_or("");
    let key = line.split('=').next()?.trim();
    if key.is_empty() || key.starts_with('[') {
        return None;
    }
    let table = text[..start]
        .lines()
        .rev()
        .map(str::trim)
        .find(|l| l.starts_with('[') && !l.starts_with("[["))
        .map(|l| l.trim_matches(|c| c == '[' || c == ']').trim());
    Some(match table {
        Some(t) => format!("{t}.{key}"),
        None => key.to_string(),
    })
}

fn read_table(path: &Path) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(source) => CliError::Io {
                path: path.to_path_buf(),
                source,
            },
            other => invalid("channel.path", format!("{other:?}")),
        })?;
    let mut knots = Vec::new();
    let mut density = Vec::new();
    for (row, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| invalid("channel.path", e.to_string()))?;
        if rec.len() != 2 {
            return Err(invalid(
                "channel.path",
                format!("row {} must have two columns (h, density)", row + 1),
            ));
        }
        let parsed: Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(v) => {
                knots.push(v[0]);
                density.push(v[1]);
            }
            // a header row
            Err(_) if row == 0 => continue,
            Err(e) => {
                return Err(invalid("channel.path", format!("row {}: {e}", row + 1)));
            }
        }
    }
    Ok((knots, density))
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
[system]
users = 100
bandwidth = 1.0
slot_duration = 10.0
power = 1.0
noise = 1e-3

[channel]
kind = "rayleigh"

[traffic]
theta1 = 0.5
"#;

    fn field_of(text: &str) -> String {
        let cfg = ExperimentConfig::parse(text).and_then(|c| c.validate().map(|_| c));
        match cfg {
            Err(CliError::Config { field, .. }) => field,
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn base_config_is_valid() {
        let cfg = ExperimentConfig::parse(BASE).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.run.warmup(), 2000);
        assert_eq!(cfg.run.seeds, vec![1]);
        assert_eq!(cfg.policy(0.7), Policy::Gcfs);
        assert_eq!(cfg.traffic(None).unwrap().mean_arrival_bits(), 0.5);
    }

    #[test]
    fn errors_name_the_field() {
        assert_eq!(field_of(&BASE.replace("users = 100", "users = 0")), "system.users");
        assert_eq!(field_of(&BASE.replace("noise = 1e-3", "noise = -1.0")), "system.noise");
        assert_eq!(field_of(&BASE.replace("theta1 = 0.5", "theta1 = 1.5")), "traffic.theta1");
        assert_eq!(
            field_of(&BASE.replace("theta1 = 0.5", "theta = [0.5, 0.6]")),
            "traffic.theta"
        );
        assert_eq!(
            field_of(&BASE.replace("kind = \"rayleigh\"", "kind = \"uniform\"\nh_max = 0.0")),
            "channel.h_max"
        );
        let run = format!("{BASE}\n[run]\nhorizon = 100\nwarmup = 100\n");
        assert_eq!(field_of(&run), "run.warmup");
        let run = format!("{BASE}\n[run]\nseeds = []\n");
        assert_eq!(field_of(&run), "run.seeds");
        let run = format!("{BASE}\n[run]\nthreshold = 1.0\n");
        assert_eq!(field_of(&run), "run.threshold");
        let sweep = format!("{BASE}\n[sweep]\naxis = \"power\"\nvalues = [1.0]\n");
        assert_eq!(field_of(&sweep), "sweep.values");
        let sweep = format!("{BASE}\n[sweep]\naxis = \"theta1\"\nvalues = [0.2, 2.0]\n");
        assert_eq!(field_of(&sweep), "sweep.values");
    }

    #[test]
    fn parse_errors_point_at_the_key() {
        assert_eq!(field_of(&BASE.replace("users = 100", "users = \"many\"")), "system.users");
        assert_eq!(field_of(&BASE.replace("users = 100", "users = 100\nspeed = 3")), "system.speed");
    }

    #[test]
    fn threshold_policy_uses_override() {
        let text = format!("{BASE}\n[run]\npolicy = \"threshold\"\nthreshold = 1.25\n");
        let cfg = ExperimentConfig::parse(&text).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.policy(0.7), Policy::Threshold(1.25));
        let text = format!("{BASE}\n[run]\npolicy = \"threshold\"\n");
        let cfg = ExperimentConfig::parse(&text).unwrap();
        assert_eq!(cfg.policy(0.7), Policy::Threshold(0.7));
    }

    #[test]
    fn table_channel_reads_csv() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("g.csv"), "h,density\n0,0\n1,1\n2,0\n").unwrap();
        let text = BASE.replace("kind = \"rayleigh\"", "kind = \"table\"\npath = \"g.csv\"");
        let path = dir.path().join("c.toml");
        std::fs::write(&path, text).unwrap();
        let cfg = ExperimentConfig::load(&path).unwrap();
        match cfg.channel().unwrap() {
            Channel::Tabulated(t) => assert_eq!(t.knots(), &[0.0, 1.0, 2.0]),
            other => panic!("{other:?}"),
        }
        std::fs::write(dir.path().join("g.csv"), "0,1\n1,x\n").unwrap();
        assert!(matches!(
            ExperimentConfig::load(&path),
            Err(CliError::Config { field, .. }) if field == "channel.path"
        ));
    }
}
