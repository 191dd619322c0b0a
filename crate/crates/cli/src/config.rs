//! TOML scenario files.
//!
//! Every section is optional. Values start from `scenario.preset` (or the
//! single-link defaults without an observer) and each present key overrides
//! the corresponding field. Per-joint quantities accept a scalar, which is
//! broadcast to every joint, or an array.

use std::path::Path;

use fjr_core::control::Reference;
use fjr_core::friction::FrictionModel;
use fjr_core::observer::ObserverKind;
use fjr_core::plant::{LinkModel, Planar2RParams};
use fjr_core::sim::{
    presets, AnalysisConfig, BristleUpdate, InitialConditions, ScenarioConfig, TorquePulse,
};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Values {
    One(f64),
    Many(Vec<f64>),
}

impl Values {
    fn expand(&self, n: usize) -> Vec<f64> {
        match self {
            Values::One(x) => vec![*x; n],
            Values::Many(v) => v.clone(),
        }
    }
}

/// Override a per-joint vector, or stretch the base to `n` joints.
fn fit(v: &Option<Values>, base: &[f64], n: usize) -> Vec<f64> {
    match v {
        Some(v) => v.expand(n),
        None if base.len() == n => base.to_vec(),
        None => vec![base.first().copied().unwrap_or(0.0); n],
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantSection {
    /// `point_mass` or `planar2r`.
    pub link: Option<String>,
    /// Point-mass link inertia [kg].
    pub mass: Option<f64>,
    pub planar2r: Option<Planar2RParams>,
    /// Motor inertia `B` [kg or kg m^2].
    pub motor_inertia: Option<Values>,
    /// Joint stiffness `K_j` [N/m or N m/rad].
    pub joint_stiffness: Option<Values>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrictionSection {
    /// `lugre` or `none`; applies to every motor.
    pub model: Option<String>,
    pub sigma0: Option<f64>,
    pub sigma1: Option<f64>,
    pub sigma2: Option<f64>,
    pub f_c: Option<f64>,
    pub f_s: Option<f64>,
    pub v_s: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerSection {
    pub kp: Option<Values>,
    pub kd: Option<Values>,
    /// `step`, `hold` or `sinusoid`.
    pub reference: Option<String>,
    /// Desired link position for `step` and `hold`.
    pub target: Option<Values>,
    /// Step time [s].
    pub t_on: Option<f64>,
    pub amplitude: Option<Values>,
    /// [Hz]
    pub frequency: Option<f64>,
    pub offset: Option<Values>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObserverSection {
    pub kind: Option<ObserverKind>,
    #[serde(rename = "L")]
    pub l: Option<f64>,
    #[serde(rename = "L_p")]
    pub l_p: Option<f64>,
    #[serde(rename = "L_i")]
    pub l_i: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub preset: Option<String>,
    pub name: Option<String>,
    /// [s]
    pub duration: Option<f64>,
    /// [s]
    pub dt: Option<f64>,
    pub stride: Option<usize>,
    pub seed: Option<u64>,
    pub bristle_update: Option<BristleUpdate>,
    pub ideal_reference: Option<bool>,
    pub external: Option<Vec<TorquePulse>>,
    pub initial: Option<InitialConditions>,
    pub analysis: Option<AnalysisConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputsSection {
    /// Write the CSV trace.
    pub trace: bool,
    /// Write the JSON metadata sidecar.
    pub metadata: bool,
}

impl Default for OutputsSection {
    fn default() -> Self {
        Self {
            trace: true,
            metadata: true,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub plant: PlantSection,
    #[serde(default)]
    pub friction: FrictionSection,
    #[serde(default)]
    pub controller: ControllerSection,
    #[serde(default)]
    pub observer: ObserverSection,
    #[serde(default)]
    pub scenario: ScenarioSection,
    #[serde(default)]
    pub outputs: OutputsSection,
}

/// A fully resolved run request.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub scenario: ScenarioConfig,
    pub outputs: OutputsSection,
}

fn invalid(key: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::InvalidConfig {
        key: key.to_string(),
        message: msg.to_string(),
    }
}

impl ConfigFile {
    pub fn from_table(table: toml::Table) -> Result<Self, CliError> {
        let key = |msg: &str| locate_key(&table, msg);
        ConfigFile::deserialize(toml::Value::Table(table.clone()))
            .map_err(|e| invalid(&key(e.message()), e.message()))
    }

    pub fn resolve(&self) -> Result<Resolved, CliError> {
        let sc = &self.scenario;
        let mut cfg = match &sc.preset {
            Some(p) => presets::preset(p)
                .ok_or_else(|| invalid("scenario.preset", format!("unknown preset {p:?}")))?,
            None => {
                let mut c = presets::preset("motivating-none").expect("built-in preset");
                c.name = "custom".into();
                c
            }
        };

        // plant
        let pl = &self.plant;
        match pl.link.as_deref() {
            None => {}
            Some("point_mass") => {
                let mass = match cfg.plant.link {
                    LinkModel::PointMass { mass } => mass,
                    _ => 1.0,
                };
                cfg.plant.link = LinkModel::PointMass { mass };
            }
            Some("planar2r") => {
                cfg.plant.link = LinkModel::Planar2R(match cfg.plant.link {
                    LinkModel::Planar2R(p) => p,
                    _ => Planar2RParams::default(),
                })
            }
            Some(other) => return Err(invalid("plant.link", format!("unknown link {other:?}"))),
        }
        if let Some(m) = pl.mass {
            match &mut cfg.plant.link {
                LinkModel::PointMass { mass } => *mass = m,
                _ => return Err(invalid("plant.mass", "only valid for point_mass links")),
            }
        }
        if let Some(p) = pl.planar2r {
            match &mut cfg.plant.link {
                LinkModel::Planar2R(q) => *q = p,
                _ => return Err(invalid("plant.planar2r", "only valid for planar2r links")),
            }
        }
        let n = cfg.plant.link.dof();
        cfg.plant.motor_inertia = fit(&pl.motor_inertia, &cfg.plant.motor_inertia, n);
        cfg.plant.joint_stiffness = fit(&pl.joint_stiffness, &cfg.plant.joint_stiffness, n);

        // friction
        let fr = &self.friction;
        let base_model = cfg.plant.friction.first().copied().unwrap_or_default();
        let model = match fr.model.as_deref() {
            None => base_model,
            Some("lugre") => FrictionModel::LuGre(base_model.lugre().copied().unwrap_or_default()),
            Some("none") => FrictionModel::FrictionFree,
            Some(other) => {
                return Err(invalid(
                    "friction.model",
                    format!("unknown model {other:?}"),
                ))
            }
        };
        let lugre_keys = [fr.sigma0, fr.sigma1, fr.sigma2, fr.f_c, fr.f_s, fr.v_s];
        let model = match model {
            FrictionModel::LuGre(mut p) => {
                let set = |dst: &mut f64, v: Option<f64>| {
                    if let Some(v) = v {
                        *dst = v;
                    }
                };
                set(&mut p.sigma0, fr.sigma0);
                set(&mut p.sigma1, fr.sigma1);
                set(&mut p.sigma2, fr.sigma2);
                set(&mut p.f_c, fr.f_c);
                set(&mut p.f_s, fr.f_s);
                set(&mut p.v_s, fr.v_s);
                FrictionModel::LuGre(p)
            }
            FrictionModel::FrictionFree if lugre_keys.iter().any(Option::is_some) => {
                return Err(invalid(
                    "friction",
                    "LuGre coefficients given with model = \"none\"",
                ))
            }
            m => m,
        };
        cfg.plant.friction = vec![model; n];

        // controller
        let ct = &self.controller;
        cfg.controller.gains.kp = fit(&ct.kp, &cfg.controller.gains.kp, n);
        cfg.controller.gains.kd = fit(&ct.kd, &cfg.controller.gains.kd, n);
        let base_ref = cfg.controller.reference.clone();
        let kind = ct.reference.clone().unwrap_or_else(|| {
            match base_ref {
                Reference::Step { .. } => "step",
                Reference::Hold { .. } => "hold",
                Reference::Sinusoid { .. } => "sinusoid",
            }
            .to_string()
        });
        let (base_target, base_t_on) = match &base_ref {
            Reference::Step { target, t_on } => (target.clone(), *t_on),
            Reference::Hold { target } => (target.clone(), 0.0),
            Reference::Sinusoid { offset, .. } => (offset.clone(), 0.0),
        };
        let (base_amp, base_freq, base_off) = match &base_ref {
            Reference::Sinusoid {
                amplitude,
                frequency,
                offset,
            } => (amplitude.clone(), *frequency, offset.clone()),
            _ => (vec![presets::STEP_TARGET], 0.5, vec![0.0]),
        };
        cfg.controller.reference = match kind.as_str() {
            "step" => Reference::Step {
                target: fit(&ct.target, &base_target, n),
                t_on: ct.t_on.unwrap_or(base_t_on),
            },
            "hold" => Reference::Hold {
                target: fit(&ct.target, &base_target, n),
            },
            "sinusoid" => Reference::Sinusoid {
                amplitude: fit(&ct.amplitude, &base_amp, n),
                frequency: ct.frequency.unwrap_or(base_freq),
                offset: fit(&ct.offset, &base_off, n),
            },
            other => {
                return Err(invalid(
                    "controller.reference",
                    format!("unknown reference {other:?}"),
                ))
            }
        };

        // observer
        let ob = &self.observer;
        if let Some(kind) = ob.kind {
            if kind != cfg.observer.kind {
                match kind {
                    ObserverKind::Pd => cfg.observer.gains.l_i = 0.0,
                    ObserverKind::Baseline => {
                        cfg.observer.gains.l_p = 0.0;
                        cfg.observer.gains.l_i = 0.0;
                    }
                    _ => {}
                }
            }
            cfg.observer.kind = kind;
        }
        if let Some(l) = ob.l {
            cfg.observer.gains.l = l;
        }
        if let Some(l) = ob.l_p {
            cfg.observer.gains.l_p = l;
        }
        if let Some(l) = ob.l_i {
            cfg.observer.gains.l_i = l;
        }

        // scenario
        if let Some(name) = &sc.name {
            cfg.name = name.clone();
        }
        if let Some(d) = sc.duration {
            cfg.duration = d;
        }
        if let Some(dt) = sc.dt {
            cfg = cfg.with_dt(dt);
        }
        if let Some(s) = sc.stride {
            cfg.stride = s;
        }
        if let Some(s) = sc.seed {
            cfg.seed = s;
        }
        if let Some(b) = sc.bristle_update {
            cfg.bristle_update = b;
        }
        if let Some(b) = sc.ideal_reference {
            cfg.ideal_reference = b;
        }
        if let Some(e) = &sc.external {
            cfg.external = e.clone();
        }
        if let Some(i) = &sc.initial {
            cfg.initial = i.clone();
        }
        if let Some(a) = sc.analysis {
            cfg.analysis = a;
        }

        cfg.validate()
            .map_err(|e| invalid(config_key(&e.to_string()), e))?;
        Ok(Resolved {
            scenario: cfg,
            outputs: self.outputs,
        })
    }
}

/// Best-effort section name for a validation message.
fn config_key(msg: &str) -> &'static str {
    let m = msg.to_ascii_lowercase();
    if m.contains("observer") {
        "observer"
    } else if m.contains("controller") {
        "controller"
    } else if m.contains("friction") || m.contains("lugre") || m.contains("sigma") {
        "friction"
    } else if m.contains("plant") {
        "plant"
    } else {
        "scenario"
    }
}

/// Dotted path of the key named in a deserialization message, searched
/// for in the offending table.
fn locate_key(table: &toml::Table, msg: &str) -> String {
    let name = msg.split('`').nth(1).filter(|_| {
        msg.contains("unknown field")
            || msg.contains("missing field")
            || msg.contains("unknown variant")
    });
    fn find(t: &toml::Table, name: &str, prefix: &str) -> Option<String> {
        for (k, v) in t {
            let path = if prefix.is_empty() {
                k.clone()
            } else {
                format!("{prefix}.{k}")
            };
            if k == name {
                return Some(path);
            }
            if let Some(sub) = v.as_table() {
                if let Some(p) = find(sub, name, &path) {
                    return Some(p);
                }
            }
        }
        None
    }
    name.and_then(|n| find(table, n, "").or_else(|| Some(n.to_string())))
        .unwrap_or_default()
}

/// Parse a TOML document into a table, reporting syntax errors as config errors.
pub fn parse_table(text: &str) -> Result<toml::Table, CliError> {
    text.parse::<toml::Table>()
        .map_err(|e| invalid("", e.message()))
}

/// Load a scenario from a preset name, a TOML file, or a metadata sidecar
/// (`.json`) written by an earlier run.
pub fn load(source: &str) -> Result<Resolved, CliError> {
    if let Some(cfg) = presets::preset(source) {
        return Ok(Resolved {
            scenario: cfg,
            outputs: OutputsSection::default(),
        });
    }
    let path = Path::new(source);
    let text = std::fs::read_to_string(path).map_err(|e| CliError::MissingInput {
        path: source.to_string(),
        message: e.to_string(),
    })?;
    if path.extension().is_some_and(|e| e == "json") {
        #[derive(Deserialize)]
        struct Sidecar {
            config: ScenarioConfig,
        }
        let s: Sidecar = serde_json::from_str(&text).map_err(|e| invalid("config", e))?;
        s.config.validate().map_err(|e| invalid("config", e))?;
        return Ok(Resolved {
            scenario: s.config,
            outputs: OutputsSection::default(),
        });
    }
    ConfigFile::from_table(parse_table(&text)?)?.resolve()
}

/// Table for a source that may be a preset name rather than a file.
pub fn load_table(source: &str) -> Result<toml::Table, CliError> {
    if presets::preset(source).is_some() {
        let mut scenario = toml::Table::new();
        scenario.insert("preset".into(), toml::Value::String(source.into()));
        let mut t = toml::Table::new();
        t.insert("scenario".into(), toml::Value::Table(scenario));
        return Ok(t);
    }
    let text = std::fs::read_to_string(source).map_err(|e| CliError::MissingInput {
        path: source.to_string(),
        message: e.to_string(),
    })?;
    parse_table(&text)
}

/// Set a dotted `section.key` to a number in a config table.
pub fn set_number(table: &mut toml::Table, key: &str, value: f64) -> Result<(), CliError> {
    let (section, field) = key
        .split_once('.')
        .ok_or_else(|| invalid(key, "sweep parameter must be written as section.key"))?;
    let entry = table
        .entry(section.to_string())
        .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    let sec = entry
        .as_table_mut()
        .ok_or_else(|| invalid(section, "not a table"))?;
    let v = if field == "stride" || field == "seed" {
        toml::Value::Integer(value as i64)
    } else {
        toml::Value::Float(value)
    };
    sec.insert(field.to_string(), v);
    Ok(())
}
