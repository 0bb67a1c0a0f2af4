//! Scenario files: device, noise and protocol parameters plus the sweep grids
//! and per-command overrides used to regenerate every artifact.
//!
//! A scenario is a TOML tree. A file may start from a built-in scenario with
//! `extends = "<name>"`, in which case only the keys it sets are replaced.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::dynamics::NoiseModel;
use crate::error::{Error, Result};
use crate::hilbert::{find_zz_null, ZzNull};
use crate::params::{Element, SystemParams};
use crate::pulse::GateProtocolParams;
use crate::xeb::XebConfig;

const DEVICE_2Q: &str = include_str!("../scenarios/device-2q.toml");

/// Built-in scenarios by name.
pub const BUILTIN: &[(&str, &str)] = &[("device-2q", DEVICE_2Q)];

/// Path that is not a scenario field but a coordinate a command sweeps itself.
pub const TIME_AXIS: &str = "time";

/// Where the coupler parks outside the gate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum IdlePolicy {
    /// The static ZZ null inside `range`.
    ZzNull { range: [f64; 2] },
    /// `system.omega_c` as given.
    Fixed,
}

impl Default for IdlePolicy {
    fn default() -> Self {
        IdlePolicy::ZzNull { range: [10.0, 12.0] }
    }
}

/// One swept parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    /// Dotted path into the scenario, e.g. `system.omega_c`.
    pub path: String,
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
}

impl SweepAxis {
    pub fn new(path: &str, start: f64, stop: f64, steps: usize) -> Self {
        SweepAxis { path: path.to_string(), start, stop, steps }
    }

    /// Evenly spaced values, endpoints included.
    pub fn values(&self) -> Vec<f64> {
        match self.steps {
            0 => Vec::new(),
            1 => vec![self.start],
            n => (0..n).map(|i| self.start + (self.stop - self.start) * i as f64 / (n - 1) as f64).collect(),
        }
    }
}

fn default_target() -> f64 {
    std::f64::consts::PI
}
fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    /// Conditional phase the calibrated gate should reach (rad).
    #[serde(default = "default_target")]
    pub target_phi: f64,
    pub system: SystemParams,
    pub noise: NoiseModel,
    pub gate: GateProtocolParams,
    #[serde(default)]
    pub idle: IdlePolicy,
    pub xeb: XebConfig,
    /// Parameter values replaced for one command only, keyed by command name.
    #[serde(default)]
    pub overrides: BTreeMap<String, BTreeMap<String, f64>>,
    /// Sweep axes keyed by command name; the first axis varies slowest.
    #[serde(default)]
    pub sweeps: BTreeMap<String, Vec<SweepAxis>>,
}

fn scenario_err(msg: impl Into<String>) -> Error {
    Error::Scenario(msg.into())
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn builtin_table(name: &str) -> Result<toml::Table> {
    let text = BUILTIN
        .iter()
        .find(|b| b.0 == name)
        .map(|b| b.1)
        .ok_or_else(|| scenario_err(format!("unknown built-in scenario `{name}`")))?;
    text.parse::<toml::Table>().map_err(|e| scenario_err(format!("{name}: {e}")))
}

impl Scenario {
    pub fn builtin(name: &str) -> Result<Self> {
        Self::from_table(builtin_table(name)?)
    }

    pub fn device_2q() -> Self {
        Self::builtin("device-2q").expect("embedded scenario is valid")
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let mut table: toml::Table = text.parse().map_err(|e| scenario_err(format!("{e}")))?;
        if let Some(base) = table.remove("extends") {
            let name = base.as_str().ok_or_else(|| scenario_err("`extends` must name a built-in scenario"))?;
            let mut merged = builtin_table(name)?;
            merge(&mut merged, table);
            table = merged;
        }
        Self::from_table(table)
    }

    fn from_table(table: toml::Table) -> Result<Self> {
        let s: Scenario = toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| scenario_err(e.message()))?;
        s.validate()?;
        Ok(s)
    }

    /// A scenario file, or a built-in scenario when no such file exists.
    pub fn load(spec: &str) -> Result<Self> {
        let path = Path::new(spec);
        if path.is_file() {
            let text = std::fs::read_to_string(path)?;
            return Self::from_toml_str(&text).map_err(|e| match e {
                Error::Scenario(m) => scenario_err(format!("{}: {m}", path.display())),
                other => other,
            });
        }
        if BUILTIN.iter().any(|b| b.0 == spec) {
            return Self::builtin(spec);
        }
        Err(scenario_err(format!("`{spec}` is neither a file nor a built-in scenario")))
    }

    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        self.noise.validate()?;
        self.gate.validate()?;
        self.xeb.validate()?;
        if !self.target_phi.is_finite() {
            return Err(Error::invalid("target_phi", "must be finite"));
        }
        if let IdlePolicy::ZzNull { range: [lo, hi] } = self.idle {
            if !(lo < hi) || lo <= 0.0 {
                return Err(scenario_err(format!("idle range [{lo}, {hi}] is empty")));
            }
        }
        let tree = self.tree();
        for (cmd, paths) in &self.overrides {
            for (path, v) in paths {
                resolve(&tree, path).map_err(|e| scenario_err(format!("overrides.{cmd}: {e}")))?;
                if !v.is_finite() {
                    return Err(scenario_err(format!("overrides.{cmd}: `{path}` is not finite")));
                }
            }
        }
        for (cmd, axes) in &self.sweeps {
            for a in axes {
                if a.path != TIME_AXIS {
                    resolve(&tree, &a.path).map_err(|e| scenario_err(format!("sweeps.{cmd}: {e}")))?;
                }
                if a.steps == 0 {
                    return Err(scenario_err(format!("sweeps.{cmd}: `{}` has no steps", a.path)));
                }
                if !a.start.is_finite() || !a.stop.is_finite() {
                    return Err(scenario_err(format!("sweeps.{cmd}: `{}` range is not finite", a.path)));
                }
                if a.steps > 1 && a.start == a.stop {
                    return Err(scenario_err(format!("sweeps.{cmd}: `{}` range is empty", a.path)));
                }
            }
        }
        Ok(())
    }

    fn tree(&self) -> Value {
        serde_json::to_value(self).expect("scenario serializes")
    }

    /// Sets the number at a dotted path, e.g. `gate.t_p` or `noise.q1.t1`.
    pub fn set_path(&mut self, path: &str, value: f64) -> Result<()> {
        let mut tree = self.tree();
        *resolve_mut(&mut tree, path)? = serde_json::json!(value);
        *self = serde_json::from_value(tree).map_err(|e| scenario_err(format!("`{path}` = {value}: {e}")))?;
        Ok(())
    }

    /// Number at a dotted path; `None` for an unset optional field.
    pub fn get_path(&self, path: &str) -> Result<Option<f64>> {
        let tree = self.tree();
        let v = resolve(&tree, path)?;
        match v {
            Value::Null => Ok(None),
            Value::Number(n) => Ok(n.as_f64()),
            _ => Err(scenario_err(format!("`{path}` is not a number"))),
        }
    }

    /// Copy with the overrides of `command` applied.
    pub fn for_command(&self, command: &str) -> Result<Scenario> {
        let mut s = self.clone();
        if let Some(o) = self.overrides.get(command) {
            for (path, &v) in o {
                s.set_path(path, v)?;
            }
        }
        Ok(s)
    }

    pub fn axes(&self, command: &str) -> &[SweepAxis] {
        self.sweeps.get(command).map_or(&[], Vec::as_slice)
    }

    /// Coupler idle point under the idle policy, with the null when one is searched.
    pub fn idle_point(&self) -> Result<(SystemParams, Option<ZzNull>)> {
        match self.idle {
            IdlePolicy::Fixed => Ok((self.system.clone(), None)),
            IdlePolicy::ZzNull { range: [lo, hi] } => {
                let null = find_zz_null(&self.system, lo, hi)?;
                Ok((self.system.with_frequency(Element::Coupler, null.omega_c), Some(null)))
            }
        }
    }

    /// The system with the coupler at its idle point.
    pub fn idle_system(&self) -> Result<SystemParams> {
        self.idle_point().map(|x| x.0)
    }
}

fn resolve<'a>(tree: &'a Value, path: &str) -> Result<&'a Value> {
    let mut v = tree;
    for key in path.split('.') {
        v = match v {
            Value::Object(m) => m.get(key),
            Value::Array(a) => key.parse::<usize>().ok().and_then(|i| a.get(i)),
            _ => None,
        }
        .ok_or_else(|| scenario_err(format!("unknown parameter path `{path}`")))?;
    }
    match v {
        Value::Number(_) | Value::Null => Ok(v),
        _ => Err(scenario_err(format!("`{path}` is not a numeric parameter"))),
    }
}

fn resolve_mut<'a>(tree: &'a mut Value, path: &str) -> Result<&'a mut Value> {
    let mut v = tree;
    for key in path.split('.') {
        v = match v {
            Value::Object(m) => m.get_mut(key),
            Value::Array(a) => key.parse::<usize>().ok().and_then(|i| a.get_mut(i)),
            _ => None,
        }
        .ok_or_else(|| scenario_err(format!("unknown parameter path `{path}`")))?;
    }
    match v {
        Value::Number(_) | Value::Null => Ok(v),
        _ => Err(scenario_err(format!("`{path}` is not a numeric parameter"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_matches_constructors() {
        let s = Scenario::device_2q();
        assert_eq!(s.system, SystemParams::device_2q());
        assert_eq!(s.noise, NoiseModel::gate_point());
        assert_eq!(s.gate, GateProtocolParams::standard());
        assert_eq!(s.xeb, XebConfig::standard(s.seed));
        assert_eq!(s.target_phi, std::f64::consts::PI);
    }

    #[test]
    fn set_and_get_paths() {
        let mut s = Scenario::device_2q();
        s.set_path("system.g_12", 0.02).unwrap();
        s.set_path("gate.sigma", 1.0).unwrap();
        s.set_path("noise.q1.t1", 5e4).unwrap();
        assert_eq!(s.system.g_12, 0.02);
        assert_eq!(s.gate.sigma, Some(1.0));
        assert_eq!(s.get_path("noise.q1.t1").unwrap(), Some(5e4));
        assert_eq!(s.get_path("gate.t_weak").unwrap(), None);
        assert!(s.set_path("system.nope", 1.0).is_err());
        assert!(s.set_path("system", 1.0).is_err());
        assert!(s.set_path("name", 1.0).is_err());
    }

    #[test]
    fn overrides_apply_per_command() {
        let s = Scenario::device_2q();
        let z = s.for_command("zz-map").unwrap();
        assert_eq!((z.system.omega_q1, z.system.omega_q2), (5.0, 5.0));
        assert_eq!(s.for_command("spectrum").unwrap().system, s.system);
    }

    #[test]
    fn extends_merges_tables() {
        let s = Scenario::from_toml_str("extends = \"device-2q\"\nname = \"x\"\n[system]\ng_12 = 0.0\n").unwrap();
        assert_eq!(s.name, "x");
        assert_eq!(s.system.g_12, 0.0);
        assert_eq!(s.system.g_1c, 0.262);
        assert_eq!(s.axes("zz-map").len(), 2);
    }

    #[test]
    fn bad_paths_and_ranges_rejected() {
        let bad = [
            "extends = \"device-2q\"\n[[sweeps.spectrum]]\npath = \"system.omega_x\"\nstart = 1.0\nstop = 2.0\nsteps = 3\n",
            "extends = \"device-2q\"\n[[sweeps.spectrum]]\npath = \"system.omega_c\"\nstart = 1.0\nstop = 2.0\nsteps = 0\n",
            "extends = \"device-2q\"\n[[sweeps.spectrum]]\npath = \"system.omega_c\"\nstart = 1.0\nstop = 1.0\nsteps = 4\n",
            "extends = \"device-2q\"\n[overrides.spectrum]\n\"gate.nothing\" = 1.0\n",
            "extends = \"device-2q\"\nbogus = 1\n",
            "extends = \"device-3q\"\n",
        ];
        for text in bad {
            assert!(matches!(Scenario::from_toml_str(text), Err(Error::Scenario(_))), "{text}");
        }
    }

    #[test]
    fn axis_values_include_endpoints() {
        let a = SweepAxis::new("x", 10.0, 40.0, 7);
        assert_eq!(a.values(), vec![10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0]);
        assert_eq!(SweepAxis::new("x", 3.0, 9.0, 1).values(), vec![3.0]);
    }

    #[test]
    fn idle_policy_moves_coupler() {
        let s = Scenario::device_2q();
        let (sys, null) = s.idle_point().unwrap();
        let null = null.unwrap();
        assert_eq!(sys.omega_c, null.omega_c);
        assert!(null.zeta.abs() < 1e-7);
        let fixed = Scenario { idle: IdlePolicy::Fixed, ..s.clone() };
        assert_eq!(fixed.idle_system().unwrap().omega_c, 10.234);
    }
}
