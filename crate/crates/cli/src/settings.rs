//! Optional `key = value` config files and the value parsers shared with
//! command-line flags.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use helpfusion_core::Algorithm;

use crate::CliError;

/// Parsed config file. Keys use the long flag names without dashes.
#[derive(Debug, Default)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
    source: String,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config file {}: {e}", path.display())))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, source: &str) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::usage(format!("{source}:{}: expected `key = value`", n + 1)))?;
            let key = key.trim().replace('_', "-");
            if key.is_empty() {
                return Err(CliError::usage(format!("{source}:{}: empty key", n + 1)));
            }
            values.insert(key, value.trim().to_owned());
        }
        Ok(Self {
            values,
            source: source.to_owned(),
        })
    }

    /// Flag value if given, otherwise the config-file value, parsed with `parse`.
    pub fn resolve<T>(
        &self,
        flag: Option<T>,
        key: &str,
        parse: impl Fn(&str) -> Result<T, String>,
    ) -> Result<Option<T>, CliError> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.values.get(key) {
            Some(v) => parse(v)
                .map(Some)
                .map_err(|e| CliError::usage(format!("{}: `{key}`: {e}", self.source))),
            None => Ok(None),
        }
    }

    /// Rejects keys that no option of the current command reads.
    pub fn check_keys(&self, known: &[&str]) -> Result<(), CliError> {
        match self.values.keys().find(|k| !known.contains(&k.as_str())) {
            Some(k) => Err(CliError::usage(format!("{}: unknown key `{k}`", self.source))),
            None => Ok(()),
        }
    }
}

pub fn parse_value<T: FromStr>(s: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    s.trim().parse::<T>().map_err(|e| format!("invalid value `{s}`: {e}"))
}

pub fn parse_bool(s: &str) -> Result<bool, String> {
    match s.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        other => Err(format!("expected a boolean, got `{other}`")),
    }
}

/// Window sizes: `a..b` (inclusive), `a..b:step`, or a comma list of either.
pub fn parse_windows(s: &str) -> Result<Vec<usize>, String> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if let Some((range, step)) = part.split_once("..").map(|(a, rest)| {
            let (b, step) = rest.split_once(':').unwrap_or((rest, "1"));
            ((a, b), step)
        }) {
            let lo: usize = parse_value(range.0)?;
            let hi: usize = parse_value(range.1)?;
            let step: usize = parse_value(step)?;
            if step == 0 || lo > hi {
                return Err(format!("invalid window range `{part}`"));
            }
            out.extend((lo..=hi).step_by(step));
        } else {
            out.push(parse_value(part)?);
        }
    }
    if out.is_empty() {
        return Err("empty window list".to_owned());
    }
    if out.contains(&0) {
        return Err("window sizes must be positive".to_owned());
    }
    Ok(out)
}

/// `all` (five learners and the random baseline), `learners`, or a comma
/// list of algorithm tags.
pub fn parse_algorithms(s: &str) -> Result<Vec<Algorithm>, String> {
    match s.trim() {
        "all" => Ok(Algorithm::ALL.to_vec()),
        "learners" => Ok(Algorithm::LEARNERS.to_vec()),
        list => list
            .split(',')
            .map(|a| a.parse::<Algorithm>().map_err(|e| e.to_string()))
            .collect(),
    }
}

/// `NAME=P,R` detector target.
pub fn parse_target(s: &str) -> Result<(usize, f64, f64), String> {
    let (name, pr) = s
        .split_once('=')
        .ok_or_else(|| format!("expected NAME=PRECISION,RECALL, got `{s}`"))?;
    let d = helpfusion_core::detectors::DETECTOR_NAMES
        .iter()
        .position(|n| *n == name.trim())
        .ok_or_else(|| format!("unknown detector `{}`", name.trim()))?;
    let (p, r) = pr
        .split_once(',')
        .ok_or_else(|| format!("expected PRECISION,RECALL, got `{pr}`"))?;
    Ok((d, parse_value(p)?, parse_value(r)?))
}
