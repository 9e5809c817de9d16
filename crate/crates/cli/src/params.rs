//! Flat key=value parameter sets.
//!
//! Every command starts from its own defaults, then applies the config file,
//! then command-line flags. The resolved map is written verbatim as the run
//! manifest, and a manifest can be passed back with `--config`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::CliError;

/// Keys that may appear in a manifest but never change a run.
const INFORMATIONAL: [&str; 2] = ["command", "version"];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Params {
    values: BTreeMap<String, String>,
}

fn normalize(key: &str) -> String {
    key.trim().replace('_', "-").to_ascii_lowercase()
}

/// Parses `key = value` lines. `#` and `;` start comments; `[section]` headers are ignored.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty()
            || line.starts_with('#')
            || line.starts_with(';')
            || line.starts_with('[')
        {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("config line {}: expected key=value", n + 1)))?;
        out.insert(normalize(k), v.trim().to_string());
    }
    Ok(out)
}

pub fn read_config(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    parse_config(&text)
}

impl Params {
    pub fn with_defaults(defaults: &[(&str, &str)]) -> Self {
        Params {
            values: defaults
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
        }
    }

    /// Applies overrides; keys the command does not know are rejected.
    pub fn overlay(
        &mut self,
        source: &str,
        over: &BTreeMap<String, String>,
    ) -> Result<(), CliError> {
        for (k, v) in over {
            if INFORMATIONAL.contains(&k.as_str()) {
                continue;
            }
            match self.values.get_mut(k) {
                Some(slot) => *slot = v.clone(),
                None => {
                    return Err(CliError::Usage(format!(
                        "{source} sets `{k}`, which this command does not use"
                    )))
                }
            }
        }
        Ok(())
    }

    pub fn contains(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.values.insert(key.to_string(), value.into());
    }

    pub fn raw(&self, key: &str) -> Result<&str, CliError> {
        self.values
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| CliError::Usage(format!("missing parameter `{key}`")))
    }

    pub fn f64(&self, key: &str) -> Result<f64, CliError> {
        let s = self.raw(key)?;
        s.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| CliError::Usage(format!("`{key}` must be a number, got `{s}`")))
    }

    pub fn u64(&self, key: &str) -> Result<u64, CliError> {
        let s = self.raw(key)?;
        s.parse().map_err(|_| {
            CliError::Usage(format!("`{key}` must be a non-negative integer, got `{s}`"))
        })
    }

    pub fn usize(&self, key: &str) -> Result<usize, CliError> {
        Ok(self.u64(key)? as usize)
    }

    pub fn bool(&self, key: &str) -> Result<bool, CliError> {
        match self.raw(key)? {
            "true" | "1" | "yes" => Ok(true),
            "false" | "0" | "no" => Ok(false),
            s => Err(CliError::Usage(format!(
                "`{key}` must be true or false, got `{s}`"
            ))),
        }
    }

    /// A comma list `a,b,c` or an inclusive range `start:stop:step`.
    pub fn list(&self, key: &str) -> Result<Vec<f64>, CliError> {
        parse_list(self.raw(key)?).map_err(|m| CliError::Usage(format!("`{key}`: {m}")))
    }

    /// `key=value` lines sorted by key, with the command and crate version.
    pub fn manifest(&self, command: &str) -> String {
        let mut all = self.values.clone();
        all.insert("command".into(), command.into());
        all.insert("version".into(), env!("CARGO_PKG_VERSION").into());
        all.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }
}

pub fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    let num = |t: &str| {
        t.trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| format!("bad number `{t}`"))
    };
    if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err("range must be start:stop:step".into());
        }
        let (a, b, h) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
        if !h.is_finite() || h <= 0.0 || b < a {
            return Err("range needs step > 0 and stop >= start".into());
        }
        let n = ((b - a) / h).round() as usize;
        if n > 1_000_000 {
            return Err("range has too many points".into());
        }
        Ok((0..=n).map(|i| a + h * i as f64).collect())
    } else {
        let v = s.split(',').map(num).collect::<Result<Vec<_>, _>>()?;
        if v.is_empty() {
            return Err("empty list".into());
        }
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_parsing() {
        let m = parse_config("# c\n[run]\nsample_rate = 1000\n; x\nSIGMA=0.1\n").unwrap();
        assert_eq!(m["sample-rate"], "1000");
        assert_eq!(m["sigma"], "0.1");
        assert!(parse_config("oops").is_err());
    }

    #[test]
    fn ranges_and_lists() {
        let g = parse_list("0.01:0.2:0.005").unwrap();
        assert_eq!(g.len(), 39);
        assert_eq!(g, srlab::experiments::default_sigma_grid());
        assert_eq!(parse_list("1,2.5").unwrap(), vec![1.0, 2.5]);
        assert!(parse_list("1:0:1").is_err());
        assert!(parse_list("a,b").is_err());
    }

    #[test]
    fn overlay_rejects_unknown_keys() {
        let mut p = Params::with_defaults(&[("seed", "0")]);
        let mut over = BTreeMap::new();
        over.insert("version".to_string(), "9".to_string());
        over.insert("seed".to_string(), "4".to_string());
        p.overlay("config", &over).unwrap();
        assert_eq!(p.u64("seed").unwrap(), 4);
        over.insert("ratio".to_string(), "0.1".to_string());
        assert!(p.overlay("config", &over).is_err());
    }

    #[test]
    fn manifest_is_sorted() {
        let p = Params::with_defaults(&[("sigma", "0.1"), ("amplitude", "1")]);
        let m = p.manifest("snr-sweep");
        let keys: Vec<&str> = m.lines().map(|l| l.split('=').next().unwrap()).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        assert!(m.contains("command=snr-sweep\n"));
    }
}
