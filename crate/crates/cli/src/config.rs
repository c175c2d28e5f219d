//! Run configuration: sectioned key-value files (INI or JSON) with
//! command-line overrides layered on top.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

pub const KEYS_HELP: &str = "\
Config keys (INI sections or JSON objects; flags override the file):
  [model]     kind (nls|coupled), p, d, alpha, gamma, delta, beta, k
  [grid]      kind (line|periodic), extent, n
  [solver]    tol, fd_step, ker_tol, n_eigs, angle_tol, gap_ratio_tol, refine, slope (fd|closed)
  [profile]   omega, velocity, zeta1, zeta2, from
  [planewave] nmax
  [evolve]    eps, dt, tend, stride, perturbation (random|mode|kernel), mode, modes
  [so3]       rho, alpha, omega_pot, eps, dt, tend, stride
  [run]       seed

Exit codes: 0 ok or certified, 2 input or solver error, 3 certification failed,
4 indeterminate. VKSTAB_THREADS caps the worker threads.";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub kind: Option<String>,
    pub extent: Option<f64>,
    pub n: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub tol: Option<f64>,
    pub fd_step: Option<f64>,
    pub ker_tol: Option<f64>,
    pub n_eigs: Option<usize>,
    pub angle_tol: Option<f64>,
    pub gap_ratio_tol: Option<f64>,
    pub refine: Option<bool>,
    pub slope: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfileSection {
    pub omega: Option<f64>,
    pub velocity: Option<f64>,
    pub zeta1: Option<f64>,
    pub zeta2: Option<f64>,
    pub from: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlaneWaveSection {
    pub nmax: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolveSection {
    pub eps: Option<f64>,
    pub dt: Option<f64>,
    pub tend: Option<f64>,
    pub stride: Option<usize>,
    pub perturbation: Option<String>,
    pub mode: Option<usize>,
    pub modes: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct So3Section {
    pub rho: Option<f64>,
    pub alpha: Option<f64>,
    pub omega_pot: Option<f64>,
    pub eps: Option<f64>,
    pub dt: Option<f64>,
    pub tend: Option<f64>,
    pub stride: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    pub grid: GridSection,
    pub solver: SolverSection,
    pub profile: ProfileSection,
    pub planewave: PlaneWaveSection,
    pub evolve: EvolveSection,
    pub so3: So3Section,
    pub run: RunSection,
}

impl RunConfig {
    pub fn seed(&self) -> u64 {
        self.run.seed.unwrap_or(0)
    }

    fn validate(&self) -> Result<()> {
        let s = &self.solver;
        let e = &self.evolve;
        let o = &self.so3;
        let checks = [
            ("solver.tol", s.tol),
            ("solver.fd_step", s.fd_step),
            ("solver.ker_tol", s.ker_tol),
            ("solver.angle_tol", s.angle_tol),
            ("solver.gap_ratio_tol", s.gap_ratio_tol),
            ("evolve.eps", e.eps),
            ("evolve.dt", e.dt),
            ("so3.eps", o.eps),
            ("so3.dt", o.dt),
        ];
        for (name, v) in checks {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    bail!("{name} must be positive, got {v}");
                }
            }
        }
        Ok(())
    }
}

/// Flag values to lay over the file contents, keyed by section and key.
#[derive(Debug, Default)]
pub struct Overrides(Vec<(&'static str, &'static str, Value)>);

impl Overrides {
    pub fn set<V: Serialize>(&mut self, section: &'static str, key: &'static str, v: Option<V>) {
        if let Some(v) = v {
            let v = serde_json::to_value(v).expect("flag values serialize");
            self.0.push((section, key, v));
        }
    }
}

fn scalar(raw: &str) -> Value {
    let t = raw.trim();
    if let Ok(i) = t.parse::<i64>() {
        return Value::from(i);
    }
    if let Ok(x) = t.parse::<f64>() {
        if let Some(n) = serde_json::Number::from_f64(x) {
            return Value::Number(n);
        }
    }
    match t {
        "true" => Value::Bool(true),
        "false" => Value::Bool(false),
        _ => Value::String(t.to_string()),
    }
}

/// Parse INI text into nested JSON objects with typed scalars.
pub fn parse_ini(text: &str) -> Result<Value> {
    let ini = ini::Ini::load_from_str(text).context("malformed config")?;
    let mut root = Map::new();
    for (sec, props) in ini.iter() {
        let entries: Vec<_> = props.iter().collect();
        let Some(sec) = sec else {
            if let Some((k, _)) = entries.first() {
                bail!("key `{k}` appears outside any section");
            }
            continue;
        };
        let obj = root
            .entry(sec.to_string())
            .or_insert_with(|| Value::Object(Map::new()));
        let obj = obj.as_object_mut().expect("sections are objects");
        for (k, v) in entries {
            if obj.insert(k.to_string(), scalar(v)).is_some() {
                bail!("duplicate key `{sec}.{k}`");
            }
        }
    }
    Ok(Value::Object(root))
}

pub fn parse_text(text: &str, json: bool) -> Result<Value> {
    if json {
        serde_json::from_str(text).context("malformed JSON config")
    } else {
        parse_ini(text)
    }
}

pub fn load(path: Option<&Path>, ov: Overrides) -> Result<RunConfig> {
    let mut root = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("cannot read config {}", p.display()))?;
            let json =
                p.extension().is_some_and(|e| e == "json") || text.trim_start().starts_with('{');
            parse_text(&text, json)?
        }
        None => Value::Object(Map::new()),
    };
    let Some(obj) = root.as_object_mut() else {
        bail!("config must be a table of sections");
    };
    for (sec, key, v) in ov.0 {
        let s = obj
            .entry(sec.to_string())
            .or_insert_with(|| Value::Object(Map::new()));
        let Some(s) = s.as_object_mut() else {
            bail!("config section `{sec}` must be a table");
        };
        s.insert(key.to_string(), v);
    }
    let cfg: RunConfig = serde_json::from_value(root).context("invalid config")?;
    cfg.validate()?;
    Ok(cfg)
}
