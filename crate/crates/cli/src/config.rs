//! `key = value` scenario files.
//!
//! Keys are dotted (`forward.rate`), `#` starts a comment, blank lines are
//! ignored. Rates, durations and sizes need a unit; counts and ratios are
//! plain numbers.

use std::fmt;
use std::path::Path;

use bdpsim_core::resumption::TokenMode;
use bdpsim_core::scenarios::ScenarioConfig;
use bdpsim_core::{CongestionAlgorithm, ResumeMode};
use thiserror::Error;

/// Where a setting came from, for error messages.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Origin {
    Line(usize),
    Override(usize),
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Line(n) => write!(f, "line {n}"),
            Origin::Override(n) => write!(f, "--set #{n}"),
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{origin}: MISSING_FIELD {what}")]
    MissingField { origin: Origin, what: String },
    #[error("{origin}: BAD_UNIT {key} = {value:?} (expected {expected})")]
    BadUnit {
        origin: Origin,
        key: String,
        value: String,
        expected: &'static str,
    },
    #[error("{origin}: UNKNOWN_KEY {key}")]
    UnknownKey { origin: Origin, key: String },
    #[error("{origin}: BAD_VALUE {key} = {value:?}: {reason}")]
    BadValue {
        origin: Origin,
        key: String,
        value: String,
        reason: String,
    },
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl ConfigError {
    pub fn code(&self) -> &'static str {
        match self {
            ConfigError::MissingField { .. } => "MISSING_FIELD",
            ConfigError::BadUnit { .. } => "BAD_UNIT",
            ConfigError::UnknownKey { .. } => "UNKNOWN_KEY",
            ConfigError::BadValue { .. } => "BAD_VALUE",
            ConfigError::Io { .. } => "IO",
        }
    }
}

/// Reads and validates a scenario file. Missing keys keep their defaults.
pub fn parse_config(path: impl AsRef<Path>) -> Result<ScenarioConfig, ConfigError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let mut cfg = ScenarioConfig::default();
    for (i, line) in text.lines().enumerate() {
        apply_line(&mut cfg, line, Origin::Line(i + 1))?;
    }
    Ok(cfg)
}

/// Applies `--set key=value` overrides in order.
pub fn apply_overrides(cfg: &mut ScenarioConfig, overrides: &[String]) -> Result<(), ConfigError> {
    for (i, o) in overrides.iter().enumerate() {
        apply_line(cfg, o, Origin::Override(i + 1))?;
    }
    Ok(())
}

fn apply_line(cfg: &mut ScenarioConfig, line: &str, origin: Origin) -> Result<(), ConfigError> {
    let line = line.split('#').next().unwrap_or("").trim();
    if line.is_empty() {
        return Ok(());
    }
    let Some((key, value)) = line.split_once('=') else {
        return Err(ConfigError::MissingField {
            origin,
            what: format!("'=' and value after {line:?}"),
        });
    };
    let key = key.trim();
    let value = value.trim();
    if key.is_empty() {
        return Err(ConfigError::MissingField {
            origin,
            what: "key".to_string(),
        });
    }
    if value.is_empty() {
        return Err(ConfigError::MissingField {
            origin,
            what: format!("value for {key}"),
        });
    }
    let v = Value {
        key,
        raw: value,
        origin: &origin,
    };
    match key {
        "forward.rate" => cfg.forward_rate_bps = v.rate()?,
        "forward.queue" => cfg.forward_queue_pkts = v.queue()?,
        "return.rate" => cfg.return_rate_bps = v.rate()?,
        "return.queue" => cfg.return_queue_pkts = v.queue()?,
        "rtt" => cfg.rtt_us = v.positive_duration()?,
        "seed" => cfg.seed = v.count()?,
        "transfer.size" => cfg.file_size_bytes = v.size()?,
        "transfer.mode" => cfg.mode = v.parsed::<ResumeMode>()?,
        "transfer.controller" => cfg.controller = v.parsed::<CongestionAlgorithm>()?,
        "transfer.handshake_rtts" => cfg.handshake_rtts = v.count_in(1, 16)? as u32,
        "sim.horizon" => cfg.horizon_s = v.positive_duration()?.div_ceil(1_000_000),
        "token.mode" => cfg.token_mode = v.parsed::<TokenMode>()?,
        "token.lifetime" => cfg.token_lifetime_s = v.duration()? / 1_000_000,
        "policy.require_ip_match" => cfg.policy.require_ip_match = v.boolean()?,
        "policy.rtt_tolerance" => cfg.policy.rtt_tolerance_factor = v.ratio(1.0, f64::MAX)?,
        "policy.capacity_cap" => {
            cfg.policy.capacity_cap_fraction = v.ratio(f64::MIN_POSITIVE, 1.0)?
        }
        "policy.min_lifetime_remaining" => {
            cfg.policy.min_lifetime_remaining_s = v.duration()? / 1_000_000
        }
        "policy.pacing_required" => cfg.policy.pacing_required = v.boolean()?,
        "resume.prime_size" => cfg.prime_size_bytes = v.size()?,
        "resume.gap" => cfg.resume_gap_s = v.duration()? / 1_000_000,
        "resume.repetitions" => cfg.repetitions = v.count_in(1, 100_000)? as u32,
        "resume.jitter_load" => cfg.jitter_load = v.ratio(0.0, 0.95)?,
        "contention.competitor_start" => {
            cfg.contention_competitor_start_s = v.duration()? / 1_000_000
        }
        "contention.resume_start" => cfg.contention_resume_start_s = v.duration()? / 1_000_000,
        "contention.horizon" => {
            cfg.contention_horizon_s = v.positive_duration()?.div_ceil(1_000_000)
        }
        "grid.rtts" => cfg.grid.rtts_us = v.list(|v| v.positive_duration())?,
        "grid.rates" => cfg.grid.rate_pairs = v.list(|v| v.rate_pair())?,
        "grid.sizes" => cfg.grid.sizes_bytes = v.list(|v| v.size())?,
        _ => {
            return Err(ConfigError::UnknownKey {
                origin,
                key: key.to_string(),
            })
        }
    }
    Ok(())
}

struct Value<'a> {
    key: &'a str,
    raw: &'a str,
    origin: &'a Origin,
}

impl<'a> Value<'a> {
    fn with(&self, raw: &'a str) -> Value<'a> {
        Value {
            key: self.key,
            raw,
            origin: self.origin,
        }
    }

    fn bad_unit(&self, expected: &'static str) -> ConfigError {
        ConfigError::BadUnit {
            origin: self.origin.clone(),
            key: self.key.to_string(),
            value: self.raw.to_string(),
            expected,
        }
    }

    fn bad_value(&self, reason: impl Into<String>) -> ConfigError {
        ConfigError::BadValue {
            origin: self.origin.clone(),
            key: self.key.to_string(),
            value: self.raw.to_string(),
            reason: reason.into(),
        }
    }

    /// Splits `12.5Mbps` into a non-negative number and its unit.
    fn quantity(&self, expected: &'static str) -> Result<(f64, String), ConfigError> {
        let s = self.raw.trim();
        let split = s
            .find(|c: char| !(c.is_ascii_digit() || c == '.'))
            .unwrap_or(s.len());
        let (num, unit) = s.split_at(split);
        let n: f64 = num.parse().map_err(|_| self.bad_unit(expected))?;
        if !n.is_finite() {
            return Err(self.bad_unit(expected));
        }
        Ok((n, unit.trim().to_string()))
    }

    fn scaled(&self, expected: &'static str, units: &[(&str, f64)]) -> Result<u64, ConfigError> {
        let (n, unit) = self.quantity(expected)?;
        let scale = units
            .iter()
            .find(|(u, _)| *u == unit)
            .map(|&(_, s)| s)
            .ok_or_else(|| self.bad_unit(expected))?;
        Ok((n * scale).round() as u64)
    }

    fn rate(&self) -> Result<u64, ConfigError> {
        let bps = self.scaled(
            "a rate such as 50Mbps",
            &[
                ("bps", 1.0),
                ("kbps", 1e3),
                ("Kbps", 1e3),
                ("Mbps", 1e6),
                ("Gbps", 1e9),
            ],
        )?;
        if bps == 0 {
            return Err(self.bad_value("rate must be positive"));
        }
        Ok(bps)
    }

    fn duration(&self) -> Result<u64, ConfigError> {
        self.scaled(
            "a duration such as 500ms",
            &[
                ("us", 1.0),
                ("ms", 1e3),
                ("s", 1e6),
                ("min", 60e6),
                ("h", 3600e6),
            ],
        )
    }

    fn positive_duration(&self) -> Result<u64, ConfigError> {
        let us = self.duration()?;
        if us == 0 {
            return Err(self.bad_value("duration must be positive"));
        }
        Ok(us)
    }

    fn size(&self) -> Result<u64, ConfigError> {
        let bytes = self.scaled(
            "a size such as 500KB",
            &[
                ("B", 1.0),
                ("KB", 1e3),
                ("kB", 1e3),
                ("MB", 1e6),
                ("GB", 1e9),
                ("KiB", 1024.0),
                ("MiB", 1_048_576.0),
                ("GiB", 1_073_741_824.0),
            ],
        )?;
        if bytes == 0 {
            return Err(self.bad_value("size must be positive"));
        }
        Ok(bytes)
    }

    fn count(&self) -> Result<u64, ConfigError> {
        self.raw
            .parse()
            .map_err(|_| self.bad_value("expected a non-negative integer"))
    }

    fn count_in(&self, lo: u64, hi: u64) -> Result<u64, ConfigError> {
        let n = self.count()?;
        if n < lo || n > hi {
            return Err(self.bad_value(format!("expected {lo}..={hi}")));
        }
        Ok(n)
    }

    fn queue(&self) -> Result<Option<usize>, ConfigError> {
        if self.raw == "bdp" {
            return Ok(None);
        }
        Ok(Some(self.count_in(1, 10_000_000)? as usize))
    }

    fn ratio(&self, lo: f64, hi: f64) -> Result<f64, ConfigError> {
        let x: f64 = self
            .raw
            .parse()
            .map_err(|_| self.bad_value("expected a number"))?;
        if !(lo..=hi).contains(&x) {
            return Err(self.bad_value(format!("expected a value in [{lo}, {hi}]")));
        }
        Ok(x)
    }

    fn boolean(&self) -> Result<bool, ConfigError> {
        match self.raw {
            "true" | "yes" | "on" => Ok(true),
            "false" | "no" | "off" => Ok(false),
            _ => Err(self.bad_value("expected true or false")),
        }
    }

    fn parsed<T: std::str::FromStr>(&self) -> Result<T, ConfigError>
    where
        T::Err: fmt::Display,
    {
        self.raw
            .parse()
            .map_err(|e: T::Err| self.bad_value(e.to_string()))
    }

    /// `forward/return`, e.g. `50Mbps/10Mbps`.
    fn rate_pair(&self) -> Result<(u64, u64), ConfigError> {
        let Some((f, r)) = self.raw.split_once('/') else {
            return Err(ConfigError::MissingField {
                origin: self.origin.clone(),
                what: format!("return rate in {}: {:?}", self.key, self.raw),
            });
        };
        Ok((self.with(f.trim()).rate()?, self.with(r.trim()).rate()?))
    }

    fn list<T>(
        &self,
        item: impl Fn(&Value<'a>) -> Result<T, ConfigError>,
    ) -> Result<Vec<T>, ConfigError> {
        let raw = self.raw;
        raw.split(',')
            .map(|part| {
                let part = part.trim();
                if part.is_empty() {
                    return Err(ConfigError::MissingField {
                        origin: self.origin.clone(),
                        what: format!("list item in {}", self.key),
                    });
                }
                item(&self.with(part))
            })
            .collect()
    }
}
