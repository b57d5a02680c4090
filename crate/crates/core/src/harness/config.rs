//! Run configuration and its TOML file format.

use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::controller::{ControlGains, SpacingPolicy};
use crate::detectors::Detector2Reference;
use crate::error::{Error, Result};
use crate::platoon::{PlatoonParams, Vec2, VehicleId, VehicleState};
use crate::sensing::{AttackKind, AttackModel, NoiseBounds};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Saturated observer with both detectors.
    #[default]
    Secure,
    /// Same controller, all observer gains one, no detection.
    Conventional,
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "secure" => Ok(Mode::Secure),
            "conventional" => Ok(Mode::Conventional),
            other => Err(format!("unknown mode {other:?}, expected secure or conventional")),
        }
    }
}

/// How sampled noise relates to the declared 2-norm bounds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoisePolicy {
    /// Each component uniform on `[-b, b]`; the vector norm can reach `b√2`.
    #[default]
    Componentwise,
    /// Each component uniform on `[-b/√2, b/√2]`, so the norm never exceeds `b`.
    Consistent,
}

impl NoisePolicy {
    /// Per-component half width for a declared norm bound.
    pub fn half_width(self, bound: f64) -> f64 {
        match self {
            NoisePolicy::Componentwise => bound,
            NoisePolicy::Consistent => bound * std::f64::consts::FRAC_1_SQRT_2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub platoon: PlatoonParams,
    pub bounds: NoiseBounds,
    pub noise_policy: NoisePolicy,
    pub beta: f64,
    pub detector2: Detector2Reference,
    pub gains: ControlGains,
    pub spacing: SpacingPolicy,
    pub attack: AttackModel,
    pub horizon: u64,
    pub seed: u64,
    pub mode: Mode,
    pub initial_states: Vec<VehicleState>,
    pub initial_estimates: Vec<Vec2>,
    pub runs: u64,
}

impl RunConfig {
    /// Five vehicles, vehicle 3's GPS scaled by an extra factor of two,
    /// 100 runs of 1000 steps.
    pub fn reference() -> Self {
        let n = 5;
        RunConfig {
            platoon: PlatoonParams::new(n, 1.0).expect("valid platoon"),
            bounds: NoiseBounds::new(100.5, 0.1, 0.1).expect("valid bounds"),
            noise_policy: NoisePolicy::Componentwise,
            beta: 1.0,
            detector2: Detector2Reference::Literal,
            gains: ControlGains::new(0.5, 0.5).expect("valid gains").with_uniform_start(n, 50),
            spacing: SpacingPolicy::uniform(n, 20.0).expect("valid spacing"),
            attack: AttackModel::single(VehicleId(3), AttackKind::MultiplicativeGain { kappa: 2.0 }),
            horizon: 1000,
            seed: 0,
            mode: Mode::Secure,
            initial_states: [(100.0, 10.0), (60.0, 8.0), (40.0, 6.0), (20.0, 4.0), (0.0, 2.0)]
                .into_iter()
                .map(|(s, v)| VehicleState::new(s, v))
                .collect(),
            initial_estimates: vec![Vec2::zeros(); n],
            runs: 100,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.platoon.vehicles();
        self.bounds.validate()?;
        self.gains.validate()?;
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(Error::Config(format!("beta must be finite and >= 0, got {}", self.beta)));
        }
        if self.horizon < 1 || self.runs < 1 {
            return Err(Error::Config("horizon and runs must both be at least 1".into()));
        }
        if self.spacing.vehicles() != n {
            return Err(Error::Config(format!("spacing describes {} vehicles, platoon has {n}", self.spacing.vehicles())));
        }
        if self.initial_states.len() != n || self.initial_estimates.len() != n {
            return Err(Error::Config(format!(
                "expected {n} initial states and estimates, got {} and {}",
                self.initial_states.len(),
                self.initial_estimates.len()
            )));
        }
        if self.initial_states.iter().any(|x| !x.is_finite())
            || self.initial_estimates.iter().any(|x| !x.iter().all(|c| c.is_finite()))
        {
            return Err(Error::Config("initial states and estimates must be finite".into()));
        }
        if let Some(bad) = self.attack.targets.iter().find(|v| v.0 == 0 || v.0 > n) {
            return Err(Error::Config(format!("attack target {bad} outside 1..={n}")));
        }
        if let Some(bad) = self.gains.t_star.keys().find(|v| v.0 < 2 || v.0 > n) {
            return Err(Error::Config(format!("control start step given for non-follower {bad}")));
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        file.into_config()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(&ConfigFile::from_config(self)).map_err(|e| Error::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    schema_version: u32,
    #[serde(default)]
    mode: Mode,
    horizon: u64,
    seed: u64,
    runs: u64,
    platoon: PlatoonSection,
    noise: NoiseSection,
    observer: ObserverSection,
    control: ControlSection,
    attack: AttackSection,
    initial: InitialSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlatoonSection {
    vehicles: usize,
    sampling_time: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NoiseSection {
    q: f64,
    epsilon: f64,
    mu: f64,
    #[serde(default)]
    policy: NoisePolicy,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObserverSection {
    beta: f64,
    #[serde(default)]
    detector2: Detector2Reference,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ControlSection {
    g_s: f64,
    g_v: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    t_star: Option<u64>,
    /// Start steps of vehicles 2..=N.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    t_star_per_vehicle: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gap: Option<f64>,
    /// Gaps between vehicles (1,2), (2,3), ...
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gaps: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AttackSection {
    #[serde(default)]
    targets: Vec<VehicleId>,
    signal: AttackKind,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InitialSection {
    states: Vec<[f64; 2]>,
    estimates: Vec<[f64; 2]>,
}

impl ConfigFile {
    fn into_config(self) -> Result<RunConfig> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported schema_version {}, this build reads {SCHEMA_VERSION}",
                self.schema_version
            )));
        }
        let n = self.platoon.vehicles;
        let platoon = PlatoonParams::new(n, self.platoon.sampling_time)?;
        let c = self.control;
        let mut gains = ControlGains::new(c.g_s, c.g_v)?;
        gains = match (c.t_star, c.t_star_per_vehicle) {
            (Some(_), Some(_)) => return Err(Error::Config("give either control.t_star or control.t_star_per_vehicle".into())),
            (Some(t), None) => gains.with_uniform_start(n, t),
            (None, Some(list)) => {
                if list.len() + 1 != n {
                    return Err(Error::Config(format!("t_star_per_vehicle needs {} entries", n - 1)));
                }
                gains.t_star = list.into_iter().enumerate().map(|(k, t)| (VehicleId(k + 2), t)).collect();
                gains
            }
            (None, None) => gains,
        };
        let spacing = match (c.gap, c.gaps) {
            (Some(g), None) => SpacingPolicy::uniform(n, g)?,
            (None, Some(list)) => SpacingPolicy::from_gaps(list)?,
            _ => return Err(Error::Config("give exactly one of control.gap or control.gaps".into())),
        };
        let cfg = RunConfig {
            platoon,
            bounds: NoiseBounds::new(self.noise.q, self.noise.epsilon, self.noise.mu)?,
            noise_policy: self.noise.policy,
            beta: self.observer.beta,
            detector2: self.observer.detector2,
            gains,
            spacing,
            attack: AttackModel {
                targets: self.attack.targets.into_iter().collect(),
                kind: self.attack.signal,
            },
            horizon: self.horizon,
            seed: self.seed,
            mode: self.mode,
            initial_states: self.initial.states.iter().map(|x| VehicleState::new(x[0], x[1])).collect(),
            initial_estimates: self.initial.estimates.iter().map(|x| Vec2::new(x[0], x[1])).collect(),
            runs: self.runs,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn from_config(cfg: &RunConfig) -> Self {
        let n = cfg.platoon.vehicles();
        let starts: Vec<u64> = (2..=n).map(|i| cfg.gains.start_step(VehicleId(i))).collect();
        let uniform_start = starts.windows(2).all(|w| w[0] == w[1]);
        let gaps = cfg.spacing.gaps();
        let uniform_gap = gaps.windows(2).all(|w| w[0] == w[1]);
        ConfigFile {
            schema_version: SCHEMA_VERSION,
            mode: cfg.mode,
            horizon: cfg.horizon,
            seed: cfg.seed,
            runs: cfg.runs,
            platoon: PlatoonSection {
                vehicles: n,
                sampling_time: cfg.platoon.sampling_time(),
            },
            noise: NoiseSection {
                q: cfg.bounds.q,
                epsilon: cfg.bounds.epsilon,
                mu: cfg.bounds.mu,
                policy: cfg.noise_policy,
            },
            observer: ObserverSection {
                beta: cfg.beta,
                detector2: cfg.detector2,
            },
            control: ControlSection {
                g_s: cfg.gains.g_s,
                g_v: cfg.gains.g_v,
                t_star: uniform_start.then(|| starts[0]),
                t_star_per_vehicle: (!uniform_start).then_some(starts),
                gap: uniform_gap.then(|| gaps[0]),
                gaps: (!uniform_gap).then(|| gaps.to_vec()),
            },
            attack: AttackSection {
                targets: cfg.attack.targets.iter().copied().collect(),
                signal: cfg.attack.kind.clone(),
            },
            initial: InitialSection {
                states: cfg.initial_states.iter().map(|x| [x.s, x.v]).collect(),
                estimates: cfg.initial_estimates.iter().map(|x| [x[0], x[1]]).collect(),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_config_round_trips_through_toml() {
        let cfg = RunConfig::reference();
        cfg.validate().unwrap();
        let text = cfg.to_toml_string().unwrap();
        assert_eq!(RunConfig::from_toml_str(&text).unwrap(), cfg);
    }

    #[test]
    fn shipped_config_matches_constructor() {
        let text = include_str!("../../../../configs/reference.toml");
        assert_eq!(RunConfig::from_toml_str(text).unwrap(), RunConfig::reference());
    }

    #[test]
    fn per_vehicle_lists_round_trip() {
        let mut cfg = RunConfig::reference();
        cfg.spacing = SpacingPolicy::from_gaps(vec![20.0, 25.0, 20.0, 30.0]).unwrap();
        cfg.gains.t_star.insert(VehicleId(4), 10);
        cfg.noise_policy = NoisePolicy::Consistent;
        cfg.mode = Mode::Conventional;
        let text = cfg.to_toml_string().unwrap();
        assert!(text.contains("t_star_per_vehicle"));
        assert_eq!(RunConfig::from_toml_str(&text).unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = RunConfig::reference().to_toml_string().unwrap();
        let bad = text.replacen("horizon", "horizn", 1);
        assert!(matches!(RunConfig::from_toml_str(&bad), Err(Error::Config(_))));
        let bad = text.replace("[observer]\n", "[observer]\nbogus = 1\n");
        assert!(RunConfig::from_toml_str(&bad).is_err());
        let bad = text.replace("schema_version = 1", "schema_version = 2");
        assert!(RunConfig::from_toml_str(&bad).unwrap_err().to_string().contains("schema_version"));
    }

    #[test]
    fn invalid_values_rejected() {
        let mut cfg = RunConfig::reference();
        cfg.initial_states.pop();
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::reference();
        cfg.attack.targets.insert(VehicleId(9));
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::reference();
        cfg.horizon = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn noise_policy_half_widths() {
        assert_eq!(NoisePolicy::Componentwise.half_width(0.1), 0.1);
        let h = NoisePolicy::Consistent.half_width(0.1);
        assert!((NoiseBounds::norm_bound_of_uniform(h) - 0.1).abs() < 1e-15);
        assert_eq!("conventional".parse::<Mode>().unwrap(), Mode::Conventional);
        assert!("fast".parse::<Mode>().is_err());
    }
}
