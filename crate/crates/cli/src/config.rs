use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toml::{Table, Value};
use vam::eval::{EvalMode, EvalSpec, MetricKind, Variant};
use vam::synth::DatasetConfig;
use vam::train::TrainConfig;
use vam::{Error, Result};

/// Base values the config file is layered over.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// Full-size budgets and learning rates.
    Full,
    /// Budgets sized for a single CPU.
    #[default]
    Desk,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    /// Seed of the source/target pairing.
    pub seed: u64,
    pub variant: String,
    pub metrics: Vec<String>,
    /// Evaluate only the first N pairs.
    pub limit: Option<usize>,
    /// Write every prediction and target to `<run_dir>/eval/wavs`.
    pub dump_wavs: bool,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            seed: 0,
            variant: Variant::Visual.name().into(),
            metrics: MetricKind::ALL.iter().map(|m| m.name().to_string()).collect(),
            limit: None,
            dump_wavs: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub profile: Profile,
    /// Dataset root holding `manifest.csv`.
    pub data_dir: PathBuf,
    /// Checkpoints, training log and evaluation CSVs.
    pub run_dir: PathBuf,
    pub dataset: DatasetConfig,
    pub train: TrainConfig,
    pub eval: EvalSection,
}

impl Default for Config {
    fn default() -> Self {
        Self::for_profile(Profile::default())
    }
}

impl Config {
    pub fn for_profile(profile: Profile) -> Self {
        Self {
            profile,
            data_dir: "data".into(),
            run_dir: "run".into(),
            dataset: DatasetConfig::default(),
            train: match profile {
                Profile::Full => TrainConfig::default(),
                Profile::Desk => TrainConfig::desk(),
            },
            eval: EvalSection::default(),
        }
    }

    /// Profile defaults, then the file, then `key=value` overrides in order.
    pub fn load(file: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut layer = match file {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::Io {
                    path: p.to_path_buf(),
                    source: e,
                })?;
                text.parse::<Table>()
                    .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
            }
            None => Table::new(),
        };
        for o in overrides {
            let (key, raw) = o
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override `{o}` is not key=value")))?;
            set_path(&mut layer, key.trim(), parse_scalar(raw.trim()))?;
        }
        let profile: Profile = match layer.get("profile") {
            Some(v) => v.clone().try_into().map_err(|e| Error::Config(format!("profile: {e}")))?,
            None => Profile::default(),
        };
        let mut merged = Table::try_from(Self::for_profile(profile)).map_err(|e| Error::Config(e.to_string()))?;
        merge(&mut merged, layer);
        let cfg: Config = Value::Table(merged)
            .try_into()
            .map_err(|e| Error::Config(e.to_string()))?;
        cfg.train.validate()?;
        cfg.eval_spec(EvalMode::Unseen)?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn eval_spec(&self, mode: EvalMode) -> Result<EvalSpec> {
        let mut spec = EvalSpec::new(mode).with_variant(self.eval.variant.parse()?);
        spec.metrics = self.eval.metrics.iter().map(|m| m.parse()).collect::<Result<_>>()?;
        spec.limit = self.eval.limit;
        spec.seed = self.eval.seed;
        if self.eval.dump_wavs {
            spec.dump_dir = Some(self.run_dir.join("eval").join("wavs").join(mode.name()));
        }
        Ok(spec)
    }
}

/// TOML literal if it parses as one, otherwise a bare string.
fn parse_scalar(raw: &str) -> Value {
    format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

fn set_path(table: &mut Table, key: &str, value: Value) -> Result<()> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().filter(|k| !k.is_empty()).ok_or_else(|| Error::Config(format!("empty key in `{key}`")))?;
    let mut t = table;
    for p in parts {
        t = t
            .entry(p)
            .or_insert_with(|| Value::Table(Table::new()))
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("`{p}` in `{key}` is not a table")))?;
    }
    t.insert(last.to_string(), value);
    Ok(())
}

fn merge(base: &mut Table, over: Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        for p in [Profile::Full, Profile::Desk] {
            let c = Config::for_profile(p);
            let text = c.to_toml().unwrap();
            let dir = std::env::temp_dir().join(format!("vam-cfg-{p:?}-{}", std::process::id()));
            std::fs::write(&dir, &text).unwrap();
            assert_eq!(Config::load(Some(&dir), &[]).unwrap(), c);
            std::fs::remove_file(dir).unwrap();
        }
    }

    #[test]
    fn overrides_apply_after_the_profile() {
        let c = Config::load(
            None,
            &[
                "profile=full".into(),
                "train.stage1.epochs=3".into(),
                "data_dir=/tmp/x".into(),
                "train.stage3.metric.alpha=0.5".into(),
            ],
        )
        .unwrap();
        assert_eq!(c.train.stage1.epochs, 3);
        assert_eq!(c.train.stage1.batch_size, TrainConfig::default().stage1.batch_size);
        assert_eq!(c.data_dir, PathBuf::from("/tmp/x"));
        assert_eq!(c.train.stage3.metric.alpha, 0.5);
    }

    #[test]
    fn bad_values_are_config_errors() {
        for o in ["nonsense=1", "train.stage1.lr_g=-1.0", "eval.variant=loud", "profile=huge", "stage1"] {
            assert!(matches!(Config::load(None, &[o.into()]), Err(Error::Config(_))), "{o}");
        }
    }
}
