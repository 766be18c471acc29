//! Study config loading: JSON file, dotted-path overrides, grid expansion.

use std::path::Path;

use serde_json::Value;

use imlci_core::experiment::{ExperimentConfig, StudySetting};

use crate::CliError;

/// Parse `key=value`; the value is interpreted as JSON when possible,
/// otherwise as a string.
fn split_override(raw: &str) -> Result<(&str, Value), CliError> {
    let (key, value) = raw
        .split_once('=')
        .ok_or_else(|| CliError::config(format!("override '{raw}' is not KEY=VALUE")))?;
    let parsed = serde_json::from_str(value).unwrap_or_else(|_| Value::String(value.to_owned()));
    Ok((key, parsed))
}

/// Apply one dotted-path override. Intermediate objects must already exist
/// in the config; the leaf may be created.
fn apply_override(root: &mut Value, key: &str, value: Value) -> Result<(), CliError> {
    let mut cursor = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let object = cursor.as_object_mut().ok_or_else(|| {
            CliError::config(format!(
                "override '{key}': '{}' is not an object",
                parts[..i].join(".")
            ))
        })?;
        if i + 1 == parts.len() {
            object.insert((*part).to_owned(), value);
            return Ok(());
        }
        cursor = object.get_mut(*part).ok_or_else(|| {
            CliError::config(format!(
                "override '{key}': key '{}' not present in config",
                parts[..=i].join(".")
            ))
        })?;
    }
    unreachable!("override paths are nonempty")
}

fn parse_config(value: Value) -> Result<ExperimentConfig, CliError> {
    let config: ExperimentConfig =
        serde_json::from_value(value).map_err(|e| CliError::config(e.to_string()))?;
    config.validate().map_err(CliError::from)?;
    Ok(config)
}

fn setting_id(index: usize, config: &ExperimentConfig) -> String {
    let imputer = config.imputer.as_ref().map_or("complete", |i| i.label());
    let miss = match &config.miss {
        Some(m) => format!("_{}{}", m.mechanism.label(), m.proportion),
        None => String::new(),
    };
    let adjusted = if config.variance.adjusted {
        "adj"
    } else {
        "raw"
    };
    format!(
        "s{index:02}_{}_{}_{imputer}{miss}_{}_{adjusted}",
        config.dgp.kind.label(),
        config.learner.label(),
        config.resample.strategy.label()
    )
}

/// Load a config file into a list of study settings.
///
/// The file is a single JSON object mirroring the experiment config. An
/// optional top-level `"grid"` array of `{dotted.path: value}` objects
/// expands into one setting per entry, applied on top of the base document.
/// Command-line `--set` overrides apply to the base before expansion;
/// `--seed` wins over everything.
pub fn load_settings(
    path: &Path,
    overrides: &[String],
    seed: Option<u64>,
) -> Result<Vec<StudySetting>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
    let mut base: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::config(format!("config is not valid JSON: {e}")))?;
    if !base.is_object() {
        return Err(CliError::config("config root must be a JSON object"));
    }

    let grid = match base.as_object_mut().unwrap().remove("grid") {
        None => Vec::new(),
        Some(Value::Array(entries)) => entries,
        Some(_) => return Err(CliError::config("'grid' must be an array of objects")),
    };

    for raw in overrides {
        let (key, value) = split_override(raw)?;
        apply_override(&mut base, key, value)?;
    }
    if let Some(seed) = seed {
        apply_override(&mut base, "seed", Value::from(seed))?;
    }

    if grid.is_empty() {
        let config = parse_config(base)?;
        let id = setting_id(0, &config);
        return Ok(vec![StudySetting { id, config }]);
    }

    let mut settings = Vec::with_capacity(grid.len());
    for (index, entry) in grid.into_iter().enumerate() {
        let map = entry
            .as_object()
            .ok_or_else(|| CliError::config("grid entries must be objects"))?
            .clone();
        let mut doc = base.clone();
        for (key, value) in map {
            apply_override(&mut doc, &key, value)?;
        }
        let config = parse_config(doc)?;
        settings.push(StudySetting {
            id: setting_id(index, &config),
            config,
        });
    }
    Ok(settings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn base_json() -> serde_json::Value {
        serde_json::json!({
            "dgp": {"kind": "linear", "p": 4},
            "n": 100,
            "learner": {"kind": "ols"},
            "explainers": ["pfi"],
            "resample": {"strategy": "bootstrap", "k": 4, "refits_used": 4},
            "variance": {"adjusted": true},
            "replications": 2,
            "ground_truth_replications": 2,
            "seed": 1
        })
    }

    fn write_config(value: &serde_json::Value) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(serde_json::to_string_pretty(value).unwrap().as_bytes())
            .unwrap();
        f.flush().unwrap();
        f
    }

    #[test]
    fn single_setting_with_overrides() {
        let f = write_config(&base_json());
        let settings = load_settings(
            f.path(),
            &["n=200".to_owned(), "dgp.rho=0.3".to_owned()],
            Some(9),
        )
        .unwrap();
        assert_eq!(settings.len(), 1);
        assert_eq!(settings[0].config.n, 200);
        assert_eq!(settings[0].config.dgp.rho, 0.3);
        assert_eq!(settings[0].config.seed, 9);
    }

    #[test]
    fn unknown_field_is_a_config_error() {
        let mut doc = base_json();
        doc["alpa"] = serde_json::json!(0.1);
        let f = write_config(&doc);
        let err = load_settings(f.path(), &[], None).unwrap_err();
        assert_eq!(err.code, crate::EXIT_CONFIG);
        assert!(err.message.contains("alpa"), "message: {}", err.message);
    }

    #[test]
    fn unknown_imputer_kind_is_a_config_error() {
        let mut doc = base_json();
        doc["miss"] = serde_json::json!({"mechanism": "mcar", "proportion": 0.1});
        doc["imputer"] = serde_json::json!({"kind": "meann"});
        let f = write_config(&doc);
        let err = load_settings(f.path(), &[], None).unwrap_err();
        assert_eq!(err.code, crate::EXIT_CONFIG);
        assert!(err.message.contains("meann"), "message: {}", err.message);
    }

    #[test]
    fn override_of_missing_intermediate_key_fails() {
        let f = write_config(&base_json());
        let err = load_settings(f.path(), &["imputer.kind=mean".to_owned()], None).unwrap_err();
        assert_eq!(err.code, crate::EXIT_CONFIG);
    }

    #[test]
    fn grid_expands_into_settings() {
        let mut doc = base_json();
        doc["miss"] = serde_json::json!({"mechanism": "mar", "proportion": 0.1});
        doc["imputer"] = serde_json::json!({"kind": "mean"});
        doc["grid"] = serde_json::json!([
            {"miss.proportion": 0.1},
            {"miss.proportion": 0.2, "imputer": {"kind": "mice_pmm", "m": 4}},
        ]);
        let f = write_config(&doc);
        let settings = load_settings(f.path(), &[], None).unwrap();
        assert_eq!(settings.len(), 2);
        assert_eq!(settings[0].config.miss.unwrap().proportion, 0.1);
        assert_eq!(settings[1].config.miss.unwrap().proportion, 0.2);
        assert_eq!(settings[1].config.imputer.unwrap().m(), 4);
        assert_ne!(settings[0].id, settings[1].id);
    }
}
