use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    StationaryGroundState,
    SmallDataScattering,
    TrappedRandom,
    AboveThresholdDemo,
    StabilityPerturbation,
    LinearDispersion,
    VirialAudit,
    LpSuite,
}

impl Scenario {
    pub const ALL: [Scenario; 8] = [
        Scenario::StationaryGroundState,
        Scenario::SmallDataScattering,
        Scenario::TrappedRandom,
        Scenario::AboveThresholdDemo,
        Scenario::StabilityPerturbation,
        Scenario::LinearDispersion,
        Scenario::VirialAudit,
        Scenario::LpSuite,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Scenario::StationaryGroundState => "stationary_ground_state",
            Scenario::SmallDataScattering => "small_data_scattering",
            Scenario::TrappedRandom => "trapped_random",
            Scenario::AboveThresholdDemo => "above_threshold_demo",
            Scenario::StabilityPerturbation => "stability_perturbation",
            Scenario::LinearDispersion => "linear_dispersion",
            Scenario::VirialAudit => "virial_audit",
            Scenario::LpSuite => "lp_suite",
        }
    }

    /// Demonstrations report guard trips without failing the run.
    pub fn is_demo(&self) -> bool {
        matches!(self, Scenario::AboveThresholdDemo | Scenario::LinearDispersion | Scenario::StabilityPerturbation)
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .iter()
            .copied()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown scenario '{s}'")))
    }
}

/// Every tunable of a run. Unset keys take the scenario defaults from [`ExperimentConfig::defaults`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub seed: u64,
    pub d: usize,
    pub r_max: f64,
    pub n: usize,
    pub dt: f64,
    pub t_final: f64,
    pub snapshot_every: usize,
    pub nonlinear: bool,

    pub guard_energy_drift: f64,
    pub guard_boundary_tail: f64,
    pub guard_overflow: f64,
    pub guard_concentration: f64,

    pub radii: Vec<f64>,
    pub eta: f64,
    pub delta0: f64,

    /// Scale, amplitude and window radius (fraction of `r_max`, zero for none) of ground-state data.
    pub w_lambda: f64,
    pub w_amplitude: f64,
    pub w_window: f64,

    pub gauss_width: f64,
    pub amplitudes: Vec<f64>,

    /// Number of seeded runs; run `k` uses seed `seed + k`.
    pub runs: usize,
    /// A priori bound on the kinetic energy of trapped data, as a fraction of that of `W`.
    pub kinetic_ceiling: f64,
    pub kinetic_fraction_min: f64,
    pub kinetic_fraction_max: f64,
    pub mixture_terms: usize,
    pub width_min: f64,
    pub width_max: f64,
    pub chirp: f64,

    /// Run the internal convergence and cross-checks tied to acceptance.
    pub acceptance_checks: bool,
    pub coarse_n: usize,
    pub identity_dims: Vec<usize>,
    pub identity_r_max: f64,
    pub identity_n: usize,

    pub tail_threshold: f64,
    pub virial_fraction: f64,
    pub coercivity_fraction: f64,
    pub coercivity_factor: f64,
    pub z_envelope_factor: f64,
    pub mass_rate_tolerance: f64,
    pub mass_rate_floor: f64,
    pub calibration_seed_offset: u64,

    pub perturbation: f64,
    pub ladder_steps: usize,
    pub corpus_size: usize,
    pub wide_r_max: f64,
    pub wide_n: usize,
}

impl ExperimentConfig {
    pub fn defaults(scenario: Scenario) -> Self {
        let mut c = ExperimentConfig {
            scenario,
            seed: 0,
            d: 5,
            r_max: 64.0,
            n: 799,
            dt: 5e-4,
            t_final: 0.5,
            snapshot_every: 0,
            nonlinear: true,
            guard_energy_drift: 1e-2,
            guard_boundary_tail: 1e-3,
            guard_overflow: 1e8,
            guard_concentration: 1.0,
            radii: vec![4.0, 6.0, 8.0, 10.0, 12.0, 14.0, 16.0, 20.0, 24.0, 28.0, 32.0],
            eta: 0.5,
            delta0: 0.1,
            w_lambda: 0.3,
            w_amplitude: 1.0,
            w_window: 0.5,
            gauss_width: 2.0,
            amplitudes: vec![0.02, 0.04, 0.08],
            runs: 1,
            kinetic_ceiling: 0.8,
            kinetic_fraction_min: 0.4,
            kinetic_fraction_max: 0.7,
            mixture_terms: 4,
            width_min: 1.5,
            width_max: 3.0,
            chirp: 0.05,
            acceptance_checks: true,
            coarse_n: 300,
            identity_dims: vec![5, 8],
            identity_r_max: 60.0,
            identity_n: 3000,
            tail_threshold: 1e-3,
            virial_fraction: 0.99,
            coercivity_fraction: 0.95,
            coercivity_factor: 0.1,
            z_envelope_factor: 3.0,
            mass_rate_tolerance: 0.05,
            mass_rate_floor: 1e-2,
            calibration_seed_offset: 1000,
            perturbation: -0.05,
            ladder_steps: 6,
            corpus_size: 30,
            wide_r_max: 240.0,
            wide_n: 4799,
        };
        match scenario {
            Scenario::StationaryGroundState | Scenario::AboveThresholdDemo | Scenario::StabilityPerturbation => {
                c.d = 8;
                c.r_max = 60.0;
                c.n = 600;
                c.dt = 1e-3;
                c.t_final = 1.0;
                c.radii = vec![5.0, 10.0, 20.0];
                if scenario == Scenario::AboveThresholdDemo {
                    c.w_amplitude = 1.2;
                }
            }
            Scenario::SmallDataScattering => {
                c.dt = 1e-2;
                c.t_final = 1.0;
                c.radii = vec![4.0, 8.0, 16.0];
            }
            Scenario::LinearDispersion => {
                c.dt = 1e-2;
                c.t_final = 2.0;
                c.nonlinear = false;
                c.amplitudes = vec![1.0];
                c.radii = vec![4.0, 8.0, 16.0];
            }
            Scenario::TrappedRandom => {
                c.runs = 20;
                c.radii = vec![8.0, 16.0, 24.0];
            }
            Scenario::VirialAudit => {
                c.runs = 10;
            }
            Scenario::LpSuite => {
                c.r_max = 32.0;
                c.n = 1279;
            }
        }
        c
    }

    /// Applies `key = value` pairs given as TOML values.
    pub fn with_overrides<'a, I>(self, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, toml::Value)>,
    {
        let mut obj = match serde_json::to_value(&self).map_err(|e| Error::Config(e.to_string()))? {
            serde_json::Value::Object(m) => m,
            _ => unreachable!("config serializes to an object"),
        };
        for (k, v) in pairs {
            if !obj.contains_key(k) {
                return Err(Error::Config(format!("unknown key '{k}'")));
            }
            let jv = serde_json::to_value(v).map_err(|e| Error::Config(e.to_string()))?;
            let jv = coerce(&obj[k], jv);
            obj.insert(k.to_string(), jv);
        }
        let cfg: ExperimentConfig = serde_json::from_value(serde_json::Value::Object(obj))
            .map_err(|e| Error::Config(format!("invalid value: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Defaults for `scenario`, then the file, then the command-line overrides.
    pub fn load(scenario: Scenario, file: Option<&Path>, sets: &[String], seed: Option<u64>) -> Result<Self> {
        let mut pairs: Vec<(String, toml::Value)> = Vec::new();
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            pairs.extend(parse_flat(&text)?);
        }
        for s in sets {
            pairs.push(parse_assignment(s)?);
        }
        if let Some(seed) = seed {
            pairs.push(("seed".into(), toml::Value::Integer(seed as i64)));
        }
        if let Some((_, v)) = pairs.iter().find(|(k, _)| k == "scenario") {
            let named = v.as_str().ok_or_else(|| Error::Config("scenario must be a string".into()))?;
            if named.parse::<Scenario>()? != scenario {
                return Err(Error::Config(format!("config names scenario '{named}' but '{scenario}' was requested")));
            }
        }
        ExperimentConfig::defaults(scenario).with_overrides(pairs.iter().map(|(k, v)| (k.as_str(), v.clone())))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.d < 5 {
            return bad(format!("d = {} must be at least 5", self.d));
        }
        if !(self.r_max > 0.0) || self.n < 16 {
            return bad("grid needs r_max > 0 and n >= 16".into());
        }
        if !(self.dt > 0.0 && self.t_final > 0.0) {
            return bad("dt and t_final must be positive".into());
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return bad("eta must lie in (0, 1)".into());
        }
        if !(self.delta0 > 0.0 && self.delta0 <= 1.0) {
            return bad("delta0 must lie in (0, 1]".into());
        }
        if self.radii.iter().any(|r| !(*r > 0.0)) {
            return bad("radii must be positive".into());
        }
        if !(self.kinetic_fraction_min > 0.0 && self.kinetic_fraction_min <= self.kinetic_fraction_max) {
            return bad("kinetic fractions must satisfy 0 < min <= max".into());
        }
        if !(self.width_min > 0.0 && self.width_min <= self.width_max) {
            return bad("mixture widths must satisfy 0 < min <= max".into());
        }
        if self.runs == 0 {
            return bad("runs must be at least 1".into());
        }
        Ok(())
    }

    pub fn grid_h(&self) -> f64 {
        self.r_max / (self.n + 1) as f64
    }
}

// integers given for float keys and the like
fn coerce(current: &serde_json::Value, new: serde_json::Value) -> serde_json::Value {
    use serde_json::Value;
    match (current, &new) {
        (Value::Number(c), Value::Number(n)) if c.is_f64() && !n.is_f64() => {
            Value::from(n.as_f64().unwrap_or_default())
        }
        (Value::Array(c), Value::Array(items)) => {
            let proto = c.first().cloned().unwrap_or(Value::Null);
            Value::Array(items.iter().map(|x| coerce(&proto, x.clone())).collect())
        }
        (Value::Array(_), _) => Value::Array(vec![coerce(current.get(0).unwrap_or(&Value::Null), new)]),
        _ => new,
    }
}

/// Parses a flat `key = value` file (TOML syntax without tables).
pub fn parse_flat(text: &str) -> Result<Vec<(String, toml::Value)>> {
    let table: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let mut out = Vec::new();
    for (k, v) in table {
        if v.is_table() {
            return Err(Error::Config(format!("key '{k}' is a table; config files are flat")));
        }
        out.push((k, v));
    }
    Ok(out)
}

/// Parses `key=value`; the value is read as TOML and falls back to a bare string.
pub fn parse_assignment(s: &str) -> Result<(String, toml::Value)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override '{s}' is not key=value")))?;
    let k = k.trim();
    if k.is_empty() {
        return Err(Error::Config(format!("override '{s}' has an empty key")));
    }
    let v = v.trim();
    let value = match toml::from_str::<toml::Table>(&format!("x = {v}")) {
        Ok(mut t) => t.remove("x").expect("parsed key"),
        Err(_) => toml::Value::String(v.to_string()),
    };
    Ok((k.to_string(), value))
}
