use serde::{Deserialize, Serialize};
use serde_json::Value;

use qpwave::model::{lambda_from_g, GaugeGroup};
use qpwave::scattering::WavePacketSpec;
use qpwave::tensor::{DmrgOptions, EvolutionConfig, Truncation};
use qpwave::wannier::WannierOptions;

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// `"Z3"` or `"SU3"` (also `"SU3_1"`).
    pub group: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<f64>,
    /// Periodic chain used for spectrum, Wannier and extraction stages.
    pub l_intermediate: usize,
    /// Open chain used for the tensor-network stages.
    #[serde(rename = "L_large")]
    pub l_large: usize,
    /// Boundary of the large chain; only `"open"` is supported.
    #[serde(default = "default_boundary")]
    pub boundary: String,
}

fn default_boundary() -> String {
    "open".into()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BandConfig {
    pub name: String,
}

impl Default for BandConfig {
    fn default() -> Self {
        BandConfig { name: "0_1^++".into() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WannierConfig {
    pub restarts: usize,
    pub max_iter: usize,
    pub grad_tol: f64,
}

impl Default for WannierConfig {
    fn default() -> Self {
        let w = WannierOptions::default();
        WannierConfig { restarts: w.restarts, max_iter: w.max_iter, grad_tol: w.grad_tol }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CreationConfig {
    /// Support length of the operator used downstream.
    pub support: usize,
    /// Support lengths reported in the infidelity table.
    pub scan: Vec<usize>,
}

impl Default for CreationConfig {
    fn default() -> Self {
        CreationConfig { support: 5, scan: vec![1, 3, 5] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolutionSettings {
    /// Defaults to `t_max / 100`.
    pub dt: Option<f64>,
    /// Defaults to `L / (2 v_max)`.
    pub t_max: Option<f64>,
    pub cutoff: f64,
    pub max_chi: usize,
    pub krylov_tol: f64,
    pub krylov_dim: usize,
}

impl Default for EvolutionSettings {
    fn default() -> Self {
        EvolutionSettings { dt: None, t_max: None, cutoff: 1e-10, max_chi: 100, krylov_tol: 1e-12, krylov_dim: 40 }
    }
}

impl EvolutionSettings {
    pub fn resolve(&self, length: usize, v_max: f64) -> Result<EvolutionConfig, CliError> {
        let t_max = match self.t_max {
            Some(t) => t,
            None if v_max > 0.0 => length as f64 / (2.0 * v_max),
            None => return Err(CliError::Config("flat band: set evolution.t_max explicitly".into())),
        };
        let dt = self.dt.unwrap_or(t_max / 100.0);
        let mut cfg = EvolutionConfig::new(dt, t_max);
        cfg.trunc = Truncation { cutoff: self.cutoff, max_chi: self.max_chi };
        cfg.krylov_tol = self.krylov_tol;
        cfg.krylov_dim = self.krylov_dim;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LightconeConfig {
    /// Quench site; defaults to `L / 2`.
    pub center: Option<usize>,
    /// Edge threshold relative to the largest excess.
    pub threshold: f64,
}

impl Default for LightconeConfig {
    fn default() -> Self {
        LightconeConfig { center: None, threshold: 0.01 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropagatorConfig {
    pub center: Option<usize>,
    pub pad: usize,
}

impl Default for PropagatorConfig {
    fn default() -> Self {
        PropagatorConfig { center: None, pad: 4 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScatterConfig {
    /// Explicit packets; defaults to two packets at `L/3` and `2L/3` moving
    /// toward each other at the momentum of maximal group velocity.
    pub packets: Option<Vec<WavePacketSpec>>,
    /// Packet width; defaults to `L / 30`.
    pub sigma: Option<f64>,
    /// Optional cut of the Gaussian at this many widths.
    pub radius_sigmas: Option<f64>,
    /// States are written every this many steps (and at the last step).
    pub checkpoint_every: usize,
}

impl Default for ScatterConfig {
    fn default() -> Self {
        ScatterConfig { packets: None, sigma: None, radius_sigmas: None, checkpoint_every: 10 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectionConfig {
    /// Detector window length (odd).
    pub width: usize,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        DetectionConfig { width: 3 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    #[serde(default)]
    pub band: BandConfig,
    #[serde(default)]
    pub wannier: WannierConfig,
    #[serde(default)]
    pub creation: CreationConfig,
    #[serde(default)]
    pub dmrg: DmrgOptions,
    #[serde(default)]
    pub evolution: EvolutionSettings,
    #[serde(default)]
    pub lightcone: LightconeConfig,
    #[serde(default)]
    pub propagator: PropagatorConfig,
    #[serde(default)]
    pub scatter: ScatterConfig,
    #[serde(default)]
    pub detection: DetectionConfig,
    #[serde(default)]
    pub seed: u64,
}

impl RunConfig {
    /// Parse JSON, apply `KEY=VAL` overrides (dotted paths, values parsed as
    /// JSON when possible) and an optional seed, then validate.
    pub fn load(text: &str, overrides: &[String], seed: Option<u64>) -> Result<Self, CliError> {
        let mut v: Value = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        for o in overrides {
            apply_override(&mut v, o)?;
        }
        if let Some(s) = seed {
            v["seed"] = Value::from(s);
        }
        let cfg: RunConfig = serde_json::from_value(v).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.group()?;
        self.lambda()?;
        let m = &self.model;
        if m.boundary != "open" {
            return Err(CliError::Config(format!("large-chain boundary {:?} unsupported (only \"open\")", m.boundary)));
        }
        if m.l_intermediate < 3 || m.l_large < 3 {
            return Err(CliError::Config("chains need at least 3 sites".into()));
        }
        if self.creation.support % 2 == 0 || self.detection.width % 2 == 0 {
            return Err(CliError::Config("support and detector widths must be odd".into()));
        }
        if self.scatter.checkpoint_every == 0 || self.propagator.pad == 0 {
            return Err(CliError::Config("checkpoint_every and pad must be positive".into()));
        }
        Ok(())
    }

    pub fn group(&self) -> Result<GaugeGroup, CliError> {
        match self.model.group.to_ascii_uppercase().as_str() {
            "Z3" => Ok(GaugeGroup::Z3),
            "SU3" | "SU3_1" => Ok(GaugeGroup::Su3),
            g => Err(CliError::Config(format!("unknown group {g:?}"))),
        }
    }

    /// `lambda`, or `g^4 / (1 + g^4)` when `g` is given; exactly one must be set.
    pub fn lambda(&self) -> Result<f64, CliError> {
        let l = match (self.model.lambda, self.model.g) {
            (Some(l), None) => l,
            (None, Some(g)) => lambda_from_g(g),
            _ => return Err(CliError::Config("give exactly one of model.lambda and model.g".into())),
        };
        if !(0.0..=1.0).contains(&l) {
            return Err(CliError::Config(format!("lambda = {l} outside [0, 1]")));
        }
        Ok(l)
    }

    pub fn wannier_options(&self) -> WannierOptions {
        WannierOptions {
            restarts: self.wannier.restarts,
            seed: self.seed,
            max_iter: self.wannier.max_iter,
            grad_tol: self.wannier.grad_tol,
            ..Default::default()
        }
    }

    pub fn dmrg_options(&self) -> DmrgOptions {
        DmrgOptions { seed: self.seed, ..self.dmrg.clone() }
    }
}

fn apply_override(v: &mut Value, spec: &str) -> Result<(), CliError> {
    let (key, val) = spec.split_once('=').ok_or_else(|| CliError::Config(format!("override {spec:?} is not KEY=VAL")))?;
    let parsed: Value = serde_json::from_str(val).unwrap_or_else(|_| Value::String(val.into()));
    let mut cur = v;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, p) in parts.iter().enumerate() {
        if !cur.is_object() {
            return Err(CliError::Config(format!("override path {key:?} crosses a non-object")));
        }
        let obj = cur.as_object_mut().unwrap();
        if i + 1 == parts.len() {
            // setting one of lambda / g replaces the other
            if *p == "lambda" {
                obj.remove("g");
            } else if *p == "g" {
                obj.remove("lambda");
            }
            obj.insert((*p).into(), parsed);
            return Ok(());
        }
        cur = obj.entry(*p).or_insert_with(|| Value::Object(Default::default()));
    }
    Ok(())
}
