//! Training configuration resolution: built-in defaults, then a named preset,
//! then a flat `key = value` file, then command-line flags.
//!
//! File grammar: one `key = value` per line; blank lines and lines starting
//! with `#` are ignored; a trailing `# comment` after a value is stripped.
//! Keys are listed in [`KEYS`]; anything else is rejected.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use svdd_core::optimizer::{Objective, TrainConfig};

pub const KEYS: &[&str] = &[
    "objective",
    "lambda",
    "lr",
    "epochs",
    "batch_size",
    "hidden_size",
    "latent_size",
    "hidden_layers",
    "seed",
    "pretrain_epochs",
    "pretrain_lr",
    "use_bias",
    "slope",
];

/// `(name, objective, hidden, latent, batch, lambda)`; learning rate 0.001 and 3 epochs throughout.
type Preset = (&'static str, Objective, usize, usize, usize, Option<f64>);

const PRESETS: &[Preset] = &[
    ("topic-change", Objective::AiSvdd, 2048, 256, 128, None),
    ("topic-change-oc", Objective::OcFixedCenter, 256, 128, 64, Some(1e-4)),
    ("ag", Objective::AiSvdd, 1024, 128, 256, None),
    ("ag-oc", Objective::OcFixedCenter, 512, 64, 256, Some(1e-4)),
    ("yelp", Objective::AiSvdd, 512, 64, 64, None),
    ("yelp-oc", Objective::OcFixedCenter, 512, 64, 32, Some(1e-4)),
    ("rct", Objective::AiSvdd, 512, 256, 128, None),
    ("rct-oc", Objective::OcFixedCenter, 512, 64, 32, Some(1e-4)),
    ("medical", Objective::AiSvdd, 2048, 64, 64, None),
    ("medical-oc", Objective::OcFixedCenter, 512, 128, 64, Some(1e-4)),
];

pub fn preset_names() -> Vec<&'static str> {
    PRESETS.iter().map(|p| p.0).collect()
}

pub fn apply_preset(cfg: &mut TrainConfig, name: &str) -> Result<()> {
    let &(_, objective, hs, ls, bs, lambda) = PRESETS
        .iter()
        .find(|p| p.0 == name)
        .ok_or_else(|| anyhow!("unknown preset '{name}' (available: {})", preset_names().join(", ")))?;
    cfg.objective = objective;
    cfg.hidden_size = hs;
    cfg.latent_size = ls;
    cfg.batch_size = bs;
    cfg.learning_rate = 0.001;
    cfg.epochs = 3;
    if let Some(l) = lambda {
        cfg.lambda = l;
    }
    Ok(())
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse::<T>()
        .map_err(|e| anyhow!("invalid value '{value}' for {key}: {e}"))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => bail!("invalid value '{value}' for {key}: expected true or false"),
    }
}

pub fn set_key(cfg: &mut TrainConfig, key: &str, value: &str) -> Result<()> {
    match key {
        "objective" => cfg.objective = value.parse().map_err(|e| anyhow!("{e}"))?,
        "lambda" => cfg.lambda = parse_value(key, value)?,
        "lr" => cfg.learning_rate = parse_value(key, value)?,
        "epochs" => cfg.epochs = parse_value(key, value)?,
        "batch_size" => cfg.batch_size = parse_value(key, value)?,
        "hidden_size" => cfg.hidden_size = parse_value(key, value)?,
        "latent_size" => cfg.latent_size = parse_value(key, value)?,
        "hidden_layers" => cfg.hidden_layers = parse_value(key, value)?,
        "seed" => cfg.seed = parse_value(key, value)?,
        "pretrain_epochs" => cfg.pretrain_epochs = parse_value(key, value)?,
        "pretrain_lr" => cfg.pretrain_lr = parse_value(key, value)?,
        "use_bias" => cfg.use_bias = parse_bool(key, value)?,
        "slope" => cfg.slope = parse_value(key, value)?,
        _ => bail!("unknown config key '{key}' (known keys: {})", KEYS.join(", ")),
    }
    Ok(())
}

/// Parses the flat file format into `(line, key, value)` entries.
pub fn parse_config_text(text: &str) -> Result<Vec<(usize, String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split_once('#').map_or(raw, |(a, _)| a).trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("line {}: expected 'key = value'", i + 1))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() || v.is_empty() {
            bail!("line {}: empty key or value", i + 1);
        }
        out.push((i + 1, k.to_string(), v.to_string()));
    }
    Ok(out)
}

pub fn apply_config_text(cfg: &mut TrainConfig, text: &str) -> Result<()> {
    for (line, k, v) in parse_config_text(text)? {
        set_key(cfg, &k, &v).with_context(|| format!("config line {line}"))?;
    }
    Ok(())
}

/// Flag values; `None` leaves the lower-precedence value in place.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub objective: Option<Objective>,
    pub lambda: Option<f64>,
    pub lr: Option<f64>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub hidden_size: Option<usize>,
    pub latent_size: Option<usize>,
    pub hidden_layers: Option<usize>,
    pub seed: Option<u64>,
    pub pretrain_epochs: Option<usize>,
    pub pretrain_lr: Option<f64>,
    pub use_bias: bool,
    pub slope: Option<f64>,
}

impl Overrides {
    fn apply(&self, cfg: &mut TrainConfig) {
        macro_rules! take {
            ($field:ident => $target:ident) => {
                if let Some(v) = self.$field {
                    cfg.$target = v;
                }
            };
        }
        take!(objective => objective);
        take!(lambda => lambda);
        take!(lr => learning_rate);
        take!(epochs => epochs);
        take!(batch_size => batch_size);
        take!(hidden_size => hidden_size);
        take!(latent_size => latent_size);
        take!(hidden_layers => hidden_layers);
        take!(seed => seed);
        take!(pretrain_epochs => pretrain_epochs);
        take!(pretrain_lr => pretrain_lr);
        take!(slope => slope);
        if self.use_bias {
            cfg.use_bias = true;
        }
    }
}

pub fn resolve(preset: Option<&str>, file_text: Option<&str>, flags: &Overrides) -> Result<TrainConfig> {
    let mut cfg = TrainConfig::default();
    if let Some(p) = preset {
        apply_preset(&mut cfg, p)?;
    }
    if let Some(text) = file_text {
        apply_config_text(&mut cfg, text)?;
    }
    flags.apply(&mut cfg);
    cfg.validate().map_err(|e| anyhow!("{e}"))?;
    Ok(cfg)
}

pub fn resolve_from_path(preset: Option<&str>, file: Option<&Path>, flags: &Overrides) -> Result<TrainConfig> {
    let text = match file {
        Some(p) => Some(std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?),
        None => None,
    };
    resolve(preset, text.as_deref(), flags)
}
