//! Per-round rate rules. Each law is a pure function of the previous
//! round's observation; XCP's dependence on its own last rate is carried in
//! [`Observation::rate_prev`].

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};

/// Feedback available to the sender at the start of round `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    /// `mu(t-1)`, bits/s.
    pub mu_prev: f64,
    /// `Q(t-1)`, bits.
    pub q_len_prev: f64,
    /// `s(t-1)`, bits/s.
    pub rate_prev: f64,
    /// `Pred(t-1)`, bits/s.
    pub pred: Option<f64>,
    /// `S(t-1)`.
    pub state_prev: Option<usize>,
    pub round_duration: f64,
}

impl Observation {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu_prev > 0.0 && self.mu_prev.is_finite()) {
            return Err(param(format!("mu_prev must be positive, got {}", self.mu_prev)));
        }
        if !(self.q_len_prev >= 0.0 && self.q_len_prev.is_finite()) {
            return Err(param(format!("queue length must be >= 0, got {}", self.q_len_prev)));
        }
        if !(self.rate_prev >= 0.0 && self.rate_prev.is_finite()) {
            return Err(param(format!("previous rate must be >= 0, got {}", self.rate_prev)));
        }
        if let Some(p) = self.pred {
            if !(p > 0.0 && p.is_finite()) {
                return Err(param(format!("prediction must be positive, got {p}")));
            }
        }
        if !(self.round_duration > 0.0 && self.round_duration.is_finite()) {
            return Err(param(format!("round duration must be positive, got {}", self.round_duration)));
        }
        Ok(())
    }

    /// `Q(t-1)/T`, the backlog expressed as a rate.
    fn backlog_rate(&self) -> f64 {
        self.q_len_prev / self.round_duration
    }
}

/// Law selection. JSON mirrors the field names, e.g.
/// `{"law":"abc","eta":1.0,"beta":2.0}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LawConfig {
    OptimalMif {
        #[serde(rename = "C")]
        c: f64,
    },
    OptimalPmif {
        #[serde(rename = "Cp")]
        cp: f64,
    },
    OptimalSmf {
        #[serde(rename = "C_map", deserialize_with = "state_keyed")]
        c_map: BTreeMap<usize, f64>,
    },
    Xcp {
        alpha: f64,
        beta: f64,
    },
    Abc {
        eta: f64,
        beta: f64,
    },
}

/// Map keys arrive as strings inside the tagged enum; parse them as state
/// ids.
fn state_keyed<'de, D>(de: D) -> std::result::Result<BTreeMap<usize, f64>, D::Error>
where
    D: serde::Deserializer<'de>,
{
    let raw = BTreeMap::<String, f64>::deserialize(de)?;
    raw.into_iter()
        .map(|(k, v)| {
            k.trim()
                .parse::<usize>()
                .map(|k| (k, v))
                .map_err(|_| serde::de::Error::custom(format!("invalid state id {k:?}")))
        })
        .collect()
}

impl LawConfig {
    pub fn name(&self) -> &'static str {
        match self {
            LawConfig::OptimalMif { .. } => "optimal-mif",
            LawConfig::OptimalPmif { .. } => "optimal-pmif",
            LawConfig::OptimalSmf { .. } => "optimal-smf",
            LawConfig::Xcp { .. } => "xcp",
            LawConfig::Abc { .. } => "abc",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(param(format!("{name} must be > 0, got {v}")))
            }
        };
        let nonneg = |name: &str, v: f64| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(param(format!("{name} must be >= 0, got {v}")))
            }
        };
        match self {
            LawConfig::OptimalMif { c } => pos("C", *c),
            LawConfig::OptimalPmif { cp } => pos("Cp", *cp),
            LawConfig::OptimalSmf { c_map } => {
                if c_map.is_empty() {
                    return Err(param("C_map must not be empty"));
                }
                c_map.values().try_for_each(|&c| pos("C_map entry", c))
            }
            LawConfig::Xcp { alpha, beta } => {
                if !(*alpha > 0.0 && *alpha <= 1.0) {
                    return Err(param(format!("alpha must be in (0, 1], got {alpha}")));
                }
                nonneg("beta", *beta)
            }
            LawConfig::Abc { eta, beta } => {
                pos("eta", *eta)?;
                nonneg("beta", *beta)
            }
        }
    }

    pub fn needs_prediction(&self) -> bool {
        matches!(self, LawConfig::OptimalPmif { .. })
    }

    pub fn needs_state(&self) -> bool {
        matches!(self, LawConfig::OptimalSmf { .. })
    }

    /// Short `name(k=v,...)` label for tables.
    pub fn label(&self) -> String {
        match self {
            LawConfig::OptimalMif { c } => format!("optimal-mif(C={c})"),
            LawConfig::OptimalPmif { cp } => format!("optimal-pmif(Cp={cp})"),
            LawConfig::OptimalSmf { c_map } => {
                let parts: Vec<String> = c_map.iter().map(|(k, v)| format!("{k}:{v}")).collect();
                format!("optimal-smf(C_map={})", parts.join(";"))
            }
            LawConfig::Xcp { alpha, beta } => format!("xcp(alpha={alpha},beta={beta})"),
            LawConfig::Abc { eta, beta } => format!("abc(eta={eta},beta={beta})"),
        }
    }
}

/// Constant for `state`; states missing from the map use the nearest key
/// (lower key on ties).
fn smf_constant(c_map: &BTreeMap<usize, f64>, state: usize) -> Option<f64> {
    if let Some(c) = c_map.get(&state) {
        return Some(*c);
    }
    let below = c_map.range(..state).next_back();
    let above = c_map.range(state..).next();
    match (below, above) {
        (Some((kb, cb)), Some((ka, ca))) => {
            Some(if state - kb <= ka - state { *cb } else { *ca })
        }
        (Some((_, c)), None) | (None, Some((_, c))) => Some(*c),
        (None, None) => None,
    }
}

/// Rate before the clamp at zero. A negative value means the law asked for
/// a negative rate.
pub fn raw_rate(cfg: &LawConfig, obs: &Observation) -> Result<f64> {
    let backlog = obs.backlog_rate();
    Ok(match cfg {
        LawConfig::OptimalMif { c } => c * obs.mu_prev - backlog,
        LawConfig::OptimalPmif { cp } => {
            let pred = obs
                .pred
                .ok_or_else(|| Error::Config("optimal-pmif needs a prediction for every round".into()))?;
            cp * pred - backlog
        }
        LawConfig::OptimalSmf { c_map } => {
            let state = obs
                .state_prev
                .ok_or_else(|| Error::Config("optimal-smf needs the link state of every round".into()))?;
            let c = smf_constant(c_map, state)
                .ok_or_else(|| Error::Config("C_map must not be empty".into()))?;
            c * obs.mu_prev - backlog
        }
        LawConfig::Xcp { alpha, beta } => {
            obs.rate_prev + alpha * (obs.mu_prev - obs.rate_prev) - beta * backlog
        }
        LawConfig::Abc { eta, beta } => eta * obs.mu_prev - beta * backlog,
    })
}

pub fn positive_part(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

pub fn next_rate(cfg: &LawConfig, obs: &Observation) -> Result<f64> {
    raw_rate(cfg, obs).map(positive_part)
}

/// Relative load `(Q(t-1)/T + s) / mu(t-1)`.
pub fn rho_of(obs: &Observation, rate: f64) -> f64 {
    (obs.backlog_rate() + rate) / obs.mu_prev
}

/// Load relative to the prediction, `(Q(t-1)/T + s) / Pred(t-1)`.
pub fn rho_pred(obs: &Observation, rate: f64) -> Option<f64> {
    obs.pred.map(|p| (obs.backlog_rate() + rate) / p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(mu: f64, q: f64, s: f64) -> Observation {
        Observation {
            mu_prev: mu,
            q_len_prev: q,
            rate_prev: s,
            pred: None,
            state_prev: None,
            round_duration: 0.1,
        }
    }

    #[test]
    fn law_examples() {
        let o = obs(100.0, 2.0, 0.0);
        let mif = LawConfig::OptimalMif { c: 0.95 };
        let s = next_rate(&mif, &o).unwrap();
        assert_eq!(s, 75.0);
        assert_eq!(rho_of(&o, s), 0.95);

        assert_eq!(next_rate(&LawConfig::OptimalMif { c: 0.5 }, &obs(100.0, 10.0, 0.0)).unwrap(), 0.0);
        let xcp = LawConfig::Xcp { alpha: 0.5, beta: 1.0 };
        assert_eq!(next_rate(&xcp, &obs(100.0, 1.0, 50.0)).unwrap(), 65.0);
        let abc = LawConfig::Abc { eta: 1.0, beta: 2.0 };
        assert_eq!(next_rate(&abc, &obs(100.0, 1.0, 0.0)).unwrap(), 80.0);
        let mut p = obs(100.0, 0.0, 0.0);
        p.pred = Some(120.0);
        assert_eq!(next_rate(&LawConfig::OptimalPmif { cp: 1.0 }, &p).unwrap(), 120.0);
    }

    #[test]
    fn load_examples() {
        assert_eq!(rho_of(&obs(100.0, 0.0, 0.0), 0.0), 0.0);
        assert_eq!(rho_of(&obs(100.0, 20.0, 0.0), 0.0), 2.0);
    }

    #[test]
    fn missing_inputs_are_config_errors() {
        let o = obs(100.0, 0.0, 0.0);
        assert!(matches!(next_rate(&LawConfig::OptimalPmif { cp: 1.0 }, &o), Err(Error::Config(_))));
        let smf = LawConfig::OptimalSmf { c_map: BTreeMap::from([(0, 1.0)]) };
        assert!(matches!(next_rate(&smf, &o), Err(Error::Config(_))));
    }

    #[test]
    fn smf_nearest_state() {
        let m = BTreeMap::from([(0, 0.5), (2, 0.9), (5, 1.1)]);
        assert_eq!(smf_constant(&m, 2), Some(0.9));
        assert_eq!(smf_constant(&m, 1), Some(0.5));
        assert_eq!(smf_constant(&m, 4), Some(1.1));
        assert_eq!(smf_constant(&m, 9), Some(1.1));
    }

    #[test]
    fn json_shape() {
        let abc: LawConfig = serde_json::from_str(r#"{"law":"abc","eta":1.0,"beta":2.0}"#).unwrap();
        assert_eq!(abc, LawConfig::Abc { eta: 1.0, beta: 2.0 });
        let smf: LawConfig =
            serde_json::from_str(r#"{"law":"optimal-smf","C_map":{"0":0.8,"1":1.1}}"#).unwrap();
        assert_eq!(serde_json::to_string(&smf).unwrap(), r#"{"law":"optimal-smf","C_map":{"0":0.8,"1":1.1}}"#);
        let mif = LawConfig::OptimalMif { c: 0.95 };
        assert_eq!(serde_json::to_string(&mif).unwrap(), r#"{"law":"optimal-mif","C":0.95}"#);
    }

    #[test]
    fn validation() {
        assert!(LawConfig::Xcp { alpha: 0.0, beta: 1.0 }.validate().is_err());
        assert!(LawConfig::Xcp { alpha: 1.0, beta: 0.0 }.validate().is_ok());
        assert!(LawConfig::Abc { eta: 1.0, beta: -1.0 }.validate().is_err());
        assert!(LawConfig::OptimalMif { c: 0.0 }.validate().is_err());
    }
}
