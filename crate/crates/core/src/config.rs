//! Scenario configuration: one TOML document with a section per model.
//!
//! Every value is in SI base units. Sections that are left out take the
//! built-in defaults, except `interface`, which has no defaults and is only
//! validated when present. Command-line overrides use dotted key paths
//! (`dcdc.inductance=100e-6`) and are applied to the parsed document before
//! it is typed, so they go through the same validation as file values.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dcdc::{ConverterConfig, PowerMode};
use crate::error::{Error, Result};
use crate::interface::{AntennaPort, BoostNetwork, DEFAULT_Q_THRESHOLD};
use crate::lcadc::LcAdcConfig;
use crate::link::LinkStudy;
use crate::lna::{linspace, LnaParams, SweepSettings};
use crate::mppt::MpptConfig;
use crate::rectifier::RectifierModel;
use crate::uwb::UwbConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    /// Seed for every randomized check, so reruns are reproducible.
    pub seed: u64,
    pub output: OutputSection,
    pub interface: Option<InterfaceSection>,
    pub rectifier: RectifierSection,
    pub dcdc: ConverterConfig,
    pub mppt: MpptSection,
    pub lna: LnaSection,
    pub uwb: UwbConfig,
    pub link: LinkStudy,
    pub lcadc: LcAdcConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            seed: 1,
            output: OutputSection::default(),
            interface: None,
            rectifier: RectifierSection::default(),
            dcdc: ConverterConfig::default(),
            mppt: MpptSection::default(),
            lna: LnaSection::default(),
            uwb: UwbConfig::default(),
            link: LinkStudy::default(),
            lcadc: LcAdcConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterfaceSection {
    pub boost: BoostNetwork,
    pub antenna: AntennaPort,
    #[serde(default = "default_q_threshold")]
    pub q_threshold: f64,
}

fn default_q_threshold() -> f64 {
    DEFAULT_Q_THRESHOLD
}

/// Logarithmic grid from `min` to `max` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogGrid {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl LogGrid {
    pub fn validate(&self) -> Result<()> {
        if !(self.min > 0.0 && self.max >= self.min && self.max.is_finite()) {
            return Err(Error::config("min", "need 0 < min <= max"));
        }
        if self.points == 0 || (self.points == 1 && self.max != self.min) {
            return Err(Error::config(
                "points",
                "need at least 2 points for a range",
            ));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        linspace(self.min.log10(), self.max.log10(), self.points)
            .into_iter()
            .map(|x| 10f64.powf(x))
            .collect()
    }
}

/// Linear grid from `min` to `max` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinGrid {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl LinGrid {
    pub fn validate(&self) -> Result<()> {
        if !(self.min.is_finite() && self.max.is_finite() && self.max >= self.min) {
            return Err(Error::config("max", "need finite min <= max"));
        }
        if self.points == 0 || (self.points == 1 && self.max != self.min) {
            return Err(Error::config(
                "points",
                "need at least 2 points for a range",
            ));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        linspace(self.min, self.max, self.points)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RectifierSection {
    pub model: RectifierModel,
    /// Input power grid, W.
    pub power: LogGrid,
    /// Load resistances, ohms.
    pub loads: Vec<f64>,
}

impl Default for RectifierSection {
    fn default() -> Self {
        RectifierSection {
            model: RectifierModel::default(),
            power: LogGrid {
                min: 10e-6,
                max: 398.107_170_553_497_3e-6,
                points: 17,
            },
            loads: vec![110e3, 220e3, 470e3, 820e3],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MpptSection {
    pub controller: MpptConfig,
    pub p_available: f64,
    pub t_on: f64,
    pub v_store: f64,
    pub mode: PowerMode,
    pub initial_code: u32,
    pub direction_up: bool,
    pub epochs: usize,
}

impl Default for MpptSection {
    fn default() -> Self {
        MpptSection {
            controller: MpptConfig::default(),
            p_available: 10e-6,
            t_on: 40e-9,
            v_store: 1.4,
            mode: PowerMode::LowPower,
            initial_code: 5,
            direction_up: true,
            epochs: 100,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LnaSection {
    pub params: LnaParams,
    pub sweep: SweepSettings,
    pub r_a: LinGrid,
    pub x_a: LinGrid,
}

impl Default for LnaSection {
    fn default() -> Self {
        LnaSection {
            params: LnaParams::default(),
            sweep: SweepSettings::default(),
            r_a: LinGrid {
                min: 1.0,
                max: 50.0,
                points: 50,
            },
            x_a: LinGrid {
                min: 50.0,
                max: 400.0,
                points: 50,
            },
        }
    }
}

fn check_positive(path: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(path, format!("must be > 0, got {v}")))
    }
}

impl ScenarioConfig {
    /// Checks every section; the error names the offending key path.
    pub fn validate(&self) -> Result<()> {
        if let Some(i) = &self.interface {
            i.boost
                .validate()
                .map_err(|e| e.within("interface.boost"))?;
            check_positive("interface.antenna.r_a", i.antenna.r_a)?;
            if !(i.antenna.p_av >= 0.0) {
                return Err(Error::config("interface.antenna.p_av", "must be >= 0"));
            }
            check_positive("interface.q_threshold", i.q_threshold)?;
        }
        self.rectifier
            .model
            .validate()
            .map_err(|e| e.within("rectifier.model"))?;
        self.rectifier
            .power
            .validate()
            .map_err(|e| e.within("rectifier.power"))?;
        for (k, &r) in self.rectifier.loads.iter().enumerate() {
            check_positive(&format!("rectifier.loads[{k}]"), r)?;
        }
        self.dcdc.validate().map_err(|e| e.within("dcdc"))?;
        let m = &self.mppt;
        m.controller
            .validate()
            .map_err(|e| e.within("mppt.controller"))?;
        check_positive("mppt.p_available", m.p_available)?;
        check_positive("mppt.t_on", m.t_on)?;
        check_positive("mppt.v_store", m.v_store)?;
        let plan = &m.controller.plan;
        if m.initial_code < plan.code_min || m.initial_code > plan.code_max {
            return Err(Error::config(
                "mppt.initial_code",
                format!("must lie in [{}, {}]", plan.code_min, plan.code_max),
            ));
        }
        self.lna
            .params
            .validate()
            .map_err(|e| e.within("lna.params"))?;
        check_positive("lna.sweep.frequency", self.lna.sweep.frequency)?;
        self.lna.r_a.validate().map_err(|e| e.within("lna.r_a"))?;
        self.lna.x_a.validate().map_err(|e| e.within("lna.x_a"))?;
        if self.lna.r_a.min <= 0.0 {
            return Err(Error::config("lna.r_a.min", "must be > 0"));
        }
        self.uwb.validate().map_err(|e| e.within("uwb"))?;
        self.link.validate().map_err(|e| e.within("link"))?;
        self.lcadc.validate().map_err(|e| e.within("lcadc"))?;
        Ok(())
    }

    /// Parses and validates a config document with overrides applied.
    /// Relative paths inside the document are resolved against `base`.
    pub fn from_toml(
        text: &str,
        overrides: &[(String, String)],
        base: Option<&Path>,
    ) -> Result<Self> {
        let mut doc: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::config("<document>", e.message().to_string()))?;
        for (key, value) in overrides {
            apply_override(&mut doc, key, value)?;
        }
        let mut cfg: ScenarioConfig = serde_path_to_error::deserialize(toml::Value::Table(doc))
            .map_err(|e| {
                let path = e.path().to_string();
                Error::config(
                    if path == "." {
                        "<document>".into()
                    } else {
                        path
                    },
                    e.into_inner().message().to_string(),
                )
            })?;
        if let (Some(base), Some(mask)) = (base, cfg.uwb.mask.as_mut()) {
            if mask.is_relative() {
                *mask = base.join(&*mask);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[(String, String)]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        Self::from_toml(&text, overrides, path.parent())
    }

    /// Built-in defaults with overrides applied.
    pub fn defaults_with(overrides: &[(String, String)]) -> Result<Self> {
        Self::from_toml("", overrides, None)
    }
}

/// Sets `key` (dotted path) to `raw`, read as a TOML value when it parses as
/// one and as a string otherwise. Intermediate tables are created on demand.
pub fn apply_override(doc: &mut toml::Table, key: &str, raw: &str) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::config(key, "malformed key path"));
    }
    let value = parse_value(raw);
    let (last, parents) = parts.split_last().expect("split yields at least one part");
    let mut table = doc;
    for (i, part) in parents.iter().enumerate() {
        let entry = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| Error::config(parts[..=i].join("."), "is a value, not a section"))?;
    }
    let value = match (table.get(*last), value) {
        (Some(toml::Value::Float(_)), toml::Value::Integer(i)) => toml::Value::Float(i as f64),
        (_, v) => v,
    };
    table.insert(last.to_string(), value);
    Ok(())
}

fn parse_value(raw: &str) -> toml::Value {
    let probe = format!("v = {raw}");
    match probe.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("probe key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Splits `a.b.c=value` into its key and value.
pub fn parse_override(arg: &str) -> Result<(String, String)> {
    match arg.split_once('=') {
        Some((k, v)) if !k.is_empty() => Ok((k.trim().to_string(), v.trim().to_string())),
        _ => Err(Error::config(
            arg,
            "override must look like section.key=value",
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ov(k: &str, v: &str) -> (String, String) {
        (k.to_string(), v.to_string())
    }

    #[test]
    fn empty_document_is_defaults() {
        assert_eq!(
            ScenarioConfig::from_toml("", &[], None).unwrap(),
            ScenarioConfig::default()
        );
    }

    #[test]
    fn shipped_config_loads() {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../config/default.toml");
        let cfg = ScenarioConfig::load(&path, &[]).unwrap();
        assert!(cfg.interface.is_some());
        assert!(cfg.uwb.mask.as_ref().unwrap().exists());
    }

    #[test]
    fn override_reaches_field() {
        let cfg = ScenarioConfig::defaults_with(&[
            ov("dcdc.inductance", "100e-6"),
            ov("mppt.epochs", "7"),
        ])
        .unwrap();
        assert_eq!(cfg.dcdc.inductance, 100e-6);
        assert_eq!(cfg.mppt.epochs, 7);
        let cfg = ScenarioConfig::defaults_with(&[ov("uwb.prf", "5")]).unwrap();
        assert_eq!(cfg.uwb.prf, 5.0);
    }

    #[test]
    fn errors_name_key_path() {
        let e = ScenarioConfig::defaults_with(&[ov("dcdc.inductance", "-1")]).unwrap_err();
        assert!(
            matches!(e, Error::Config { ref path, .. } if path == "dcdc.inductance"),
            "{e}"
        );
        let e = ScenarioConfig::from_toml("[uwb.network]\nc_f = \"big\"\n", &[], None).unwrap_err();
        assert!(
            matches!(e, Error::Config { ref path, .. } if path == "uwb.network.c_f"),
            "{e}"
        );
        let e = ScenarioConfig::from_toml("[lcadc.pdm]\nwidth = 1\n", &[], None).unwrap_err();
        assert!(
            matches!(e, Error::Config { ref path, .. } if path.starts_with("lcadc.pdm")),
            "{e}"
        );
        let e =
            ScenarioConfig::defaults_with(&[ov("lcadc.sampler.hysteresis", "0.5")]).unwrap_err();
        assert!(
            matches!(e, Error::Config { ref path, .. } if path == "lcadc.sampler.hysteresis"),
            "{e}"
        );
        let e = ScenarioConfig::defaults_with(&[ov("link.distances", "[1.0, -2.0]")]).unwrap_err();
        assert!(
            matches!(e, Error::Config { ref path, .. } if path == "link.distances[1]"),
            "{e}"
        );
    }

    #[test]
    fn override_syntax() {
        assert_eq!(parse_override("a.b=3").unwrap(), ov("a.b", "3"));
        assert!(parse_override("=3").is_err());
        assert!(parse_override("a.b").is_err());
        let mut t = toml::Table::new();
        apply_override(&mut t, "a.b", "x").unwrap();
        assert!(apply_override(&mut t, "a.b.c", "1").is_err());
        assert!(apply_override(&mut t, "a..c", "1").is_err());
    }
}
