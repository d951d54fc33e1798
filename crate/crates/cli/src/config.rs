//! Loading experiment configs and applying `--set key=value` overrides.

use std::fs;
use std::path::Path;

use autobid_core::ExperimentConfig;

use crate::Failure;

/// Keys that may be set even though they are absent from the materialized
/// defaults (their default is "derive from T").
const OPTIONAL_KEYS: [&str; 3] = ["bandit.k", "bandit.m", "bandit.epsilon"];

pub fn load(path: &Path) -> Result<ExperimentConfig, Failure> {
    if !path.is_file() {
        return Err(Failure::usage(format!(
            "config file `{}` does not exist",
            path.display()
        )));
    }
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::usage(format!("cannot read `{}`: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

/// Every field, defaults included, as a TOML document.
pub fn materialize(config: &ExperimentConfig) -> Result<toml::Table, Failure> {
    toml::Table::try_from(config)
        .map_err(|e| Failure::runtime(format!("cannot serialize config: {e}")))
}

pub fn to_toml_string(config: &ExperimentConfig) -> Result<String, Failure> {
    toml::to_string(config).map_err(|e| Failure::runtime(format!("cannot serialize config: {e}")))
}

fn parse_value(raw: &str) -> toml::Value {
    // Bare words such as `bandit` or `uniform(0, 1)` are strings.
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// Applies overrides in order. Only keys present in the materialized config
/// (or listed in [`OPTIONAL_KEYS`]) are accepted.
pub fn apply_overrides(
    config: ExperimentConfig,
    overrides: &[String],
) -> Result<ExperimentConfig, Failure> {
    if overrides.is_empty() {
        return Ok(config);
    }
    let mut doc = materialize(&config)?;
    for item in overrides {
        let (key, raw) = item
            .split_once('=')
            .ok_or_else(|| Failure::usage(format!("--set `{item}`: expected key=value")))?;
        let key = key.trim();
        let path: Vec<&str> = key.split('.').collect();
        let (last, parents) = path.split_last().expect("split yields one item");
        let mut table = &mut doc;
        for part in parents {
            table = match table.get_mut(*part) {
                Some(toml::Value::Table(t)) => t,
                _ => return Err(unknown_key(key)),
            };
        }
        if !table.contains_key(*last) && !OPTIONAL_KEYS.contains(&key) {
            return Err(unknown_key(key));
        }
        if matches!(table.get(*last), Some(toml::Value::Table(_))) {
            return Err(Failure::usage(format!(
                "--set {key}: `{key}` is a table; set one of its fields instead"
            )));
        }
        table.insert(last.to_string(), parse_value(raw.trim()));
    }
    toml::Value::Table(doc)
        .try_into()
        .map_err(|e| Failure::usage(format!("after --set overrides: {e}")))
}

fn unknown_key(key: &str) -> Failure {
    Failure::usage(format!("--set {key}: not a config key"))
}

/// `1..20` (inclusive) or a comma-separated list.
pub fn parse_seeds(raw: &str) -> Result<Vec<u64>, Failure> {
    let bad = |why: &str| Failure::usage(format!("--seeds `{raw}`: {why}"));
    let seeds: Vec<u64> = if let Some((a, b)) = raw.split_once("..") {
        let lo: u64 = a.trim().parse().map_err(|_| bad("bad range start"))?;
        let hi: u64 = b
            .trim()
            .trim_start_matches('=')
            .parse()
            .map_err(|_| bad("bad range end"))?;
        if lo > hi {
            return Err(bad("empty range"));
        }
        (lo..=hi).collect()
    } else {
        raw.split(',')
            .map(|s| s.trim().parse().map_err(|_| bad("expected integers")))
            .collect::<Result<_, _>>()?
    };
    if seeds.is_empty() {
        return Err(bad("no seeds"));
    }
    Ok(seeds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use autobid_core::{Algorithm, DistLiteral};

    fn base() -> ExperimentConfig {
        ExperimentConfig::new(Algorithm::KnownF, 10, DistLiteral::Grid(11))
    }

    #[test]
    fn overrides_replace_declared_keys() {
        let c = apply_overrides(
            base(),
            &[
                "horizon=4096".into(),
                "algorithm=bandit".into(),
                "environment.values=pointmass(0.5)".into(),
                "bandit.k=5".into(),
                "sweep.horizons=[100, 200, 400]".into(),
            ],
        )
        .unwrap();
        assert_eq!(c.horizon, 4096);
        assert_eq!(c.algorithm, Algorithm::Bandit);
        assert_eq!(c.environment.values, DistLiteral::PointMass(0.5));
        assert_eq!(c.bandit.k, Some(5));
        assert_eq!(c.sweep.horizons, vec![100, 200, 400]);
    }

    #[test]
    fn overrides_reject_unknown_keys() {
        for bad in ["horizn=3", "bandit.q=1", "environment=1", "horizon"] {
            assert!(apply_overrides(base(), &[bad.into()]).is_err(), "{bad}");
        }
        let err = apply_overrides(base(), &["horizon=abc".into()]).unwrap_err();
        assert!(err.to_string().contains("horizon"), "{err}");
    }

    #[test]
    fn seed_syntax() {
        assert_eq!(parse_seeds("1..3").unwrap(), vec![1, 2, 3]);
        assert_eq!(parse_seeds("4, 9").unwrap(), vec![4, 9]);
        assert!(parse_seeds("3..1").is_err());
        assert!(parse_seeds("x").is_err());
    }

    #[test]
    fn materialized_defaults_round_trip() {
        let text = to_toml_string(&base()).unwrap();
        let back: ExperimentConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, base());
    }
}
