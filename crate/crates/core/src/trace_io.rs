//! Mahimahi delivery traces and per-round capacity series.
//!
//! A Mahimahi trace lists one millisecond timestamp per MTU-sized delivery
//! opportunity. Rounds are left-closed windows `[i*T, (i+1)*T)` of trace
//! time; the window count is `floor(last_timestamp / T)`, i.e. the trace
//! period, so a trailing partial window is dropped.

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};

pub const DEFAULT_MTU_BYTES: u32 = 1500;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeliverySchedule {
    timestamps_ms: Vec<u64>,
    mtu_bytes: u32,
}

impl DeliverySchedule {
    pub fn new(timestamps_ms: Vec<u64>, mtu_bytes: u32) -> Result<Self> {
        if mtu_bytes == 0 {
            return Err(param("mtu_bytes must be positive"));
        }
        if timestamps_ms.is_empty() {
            return Err(Error::EmptyTrace);
        }
        if let Some(i) = timestamps_ms.windows(2).position(|w| w[1] < w[0]) {
            return Err(Error::Ordering {
                line: i + 2,
                value: timestamps_ms[i + 1],
                prev: timestamps_ms[i],
            });
        }
        Ok(Self {
            timestamps_ms,
            mtu_bytes,
        })
    }

    pub fn timestamps_ms(&self) -> &[u64] {
        &self.timestamps_ms
    }

    pub fn mtu_bytes(&self) -> u32 {
        self.mtu_bytes
    }

    pub fn len(&self) -> usize {
        self.timestamps_ms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps_ms.is_empty()
    }
}

/// How a capacity trace came to be.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Origin {
    Parsed,
    SyntheticMif,
    SyntheticSmf,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Origin::Parsed => "parsed",
            Origin::SyntheticMif => "synthetic-mif",
            Origin::SyntheticSmf => "synthetic-smf",
        })
    }
}

impl FromStr for Origin {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "parsed" => Ok(Origin::Parsed),
            "synthetic-mif" => Ok(Origin::SyntheticMif),
            "synthetic-smf" => Ok(Origin::SyntheticSmf),
            other => Err(param(format!("unknown trace origin '{other}'"))),
        }
    }
}

/// Per-round link capacities in bits/s.
#[derive(Debug, Clone, PartialEq)]
pub struct CapacityTrace {
    mu: Vec<f64>,
    round_duration: f64,
    mtu_bytes: u32,
    origin: Origin,
}

impl CapacityTrace {
    pub fn new(mu: Vec<f64>, round_duration: f64, origin: Origin) -> Result<Self> {
        Self::with_mtu(mu, round_duration, DEFAULT_MTU_BYTES, origin)
    }

    pub fn with_mtu(
        mu: Vec<f64>,
        round_duration: f64,
        mtu_bytes: u32,
        origin: Origin,
    ) -> Result<Self> {
        if !(round_duration > 0.0 && round_duration.is_finite()) {
            return Err(param(format!(
                "round duration must be positive, got {round_duration}"
            )));
        }
        if mtu_bytes == 0 {
            return Err(param("mtu_bytes must be positive"));
        }
        if mu.len() < 2 {
            return Err(param(format!(
                "a capacity trace needs at least 2 rounds, got {}",
                mu.len()
            )));
        }
        if let Some(i) = mu.iter().position(|m| !(*m > 0.0 && m.is_finite())) {
            return Err(param(format!(
                "round {i}: capacity must be positive and finite, got {}",
                mu[i]
            )));
        }
        Ok(Self {
            mu,
            round_duration,
            mtu_bytes,
            origin,
        })
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn round_duration(&self) -> f64 {
        self.round_duration
    }

    pub fn mtu_bytes(&self) -> u32 {
        self.mtu_bytes
    }

    pub fn origin(&self) -> Origin {
        self.origin
    }

    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }

    /// Consecutive capacity ratios `mu[t] / mu[t-1]` for `t >= 1`.
    pub fn ratios(&self) -> Vec<f64> {
        self.mu.windows(2).map(|w| w[1] / w[0]).collect()
    }

    /// Same trace with every capacity multiplied by `k`.
    pub fn scaled(&self, k: f64) -> Result<Self> {
        Self::with_mtu(
            self.mu.iter().map(|m| m * k).collect(),
            self.round_duration,
            self.mtu_bytes,
            self.origin,
        )
    }
}

/// Parse a Mahimahi trace. Blank lines are skipped; CRLF is accepted.
pub fn parse_mahimahi(text: &str, mtu_bytes: u32) -> Result<DeliverySchedule> {
    if mtu_bytes == 0 {
        return Err(param("mtu_bytes must be positive"));
    }
    let mut out = Vec::new();
    let mut prev: Option<u64> = None;
    for (idx, raw) in text.split('\n').enumerate() {
        let line = idx + 1;
        let s = raw.strip_suffix('\r').unwrap_or(raw);
        if s.is_empty() {
            continue;
        }
        if !s.bytes().all(|c| c.is_ascii_digit()) {
            return Err(Error::Parse {
                line,
                msg: format!("expected a non-negative integer, got {s:?}"),
            });
        }
        let v: u64 = s.parse().map_err(|e| Error::Parse {
            line,
            msg: format!("{e}"),
        })?;
        if let Some(p) = prev {
            if v < p {
                return Err(Error::Ordering {
                    line,
                    value: v,
                    prev: p,
                });
            }
        }
        prev = Some(v);
        out.push(v);
    }
    if out.is_empty() {
        return Err(Error::EmptyTrace);
    }
    DeliverySchedule::new(out, mtu_bytes)
}

/// Result of windowing a schedule into rounds.
#[derive(Debug, Clone, PartialEq)]
pub struct IngestReport {
    /// Per-round capacities after flooring, bits/s.
    pub mu: Vec<f64>,
    /// Opportunities per full window, before flooring.
    pub counts: Vec<u64>,
    /// Rounds whose capacity was raised to the floor.
    pub floored_rounds: usize,
    pub round_duration: f64,
    pub mtu_bytes: u32,
}

impl IngestReport {
    /// Validated capacity trace; fails when fewer than two full rounds exist.
    pub fn trace(&self) -> Result<CapacityTrace> {
        CapacityTrace::with_mtu(
            self.mu.clone(),
            self.round_duration,
            self.mtu_bytes,
            Origin::Parsed,
        )
    }
}

/// Default capacity floor: one MTU per round.
pub fn default_floor_bps(mtu_bytes: u32, round_duration: f64) -> f64 {
    mtu_bytes as f64 * 8.0 / round_duration
}

/// Window a delivery schedule into rounds of `round_duration` seconds.
///
/// `floor_bps` defaults to [`default_floor_bps`] when `None`.
pub fn to_capacity_trace(
    sched: &DeliverySchedule,
    round_duration: f64,
    floor_bps: Option<f64>,
) -> Result<IngestReport> {
    if !(round_duration > 0.0 && round_duration.is_finite()) {
        return Err(param(format!(
            "round duration T must be positive, got {round_duration}"
        )));
    }
    let floor = floor_bps.unwrap_or_else(|| default_floor_bps(sched.mtu_bytes, round_duration));
    if !(floor > 0.0 && floor.is_finite()) {
        return Err(param(format!("capacity floor must be positive, got {floor}")));
    }
    let window_ms = round_duration * 1000.0;
    let last = *sched.timestamps_ms.last().ok_or(Error::EmptyTrace)?;
    let n_windows = (last as f64 / window_ms).floor() as usize;
    let mut counts = vec![0u64; n_windows];
    for &ts in &sched.timestamps_ms {
        let w = (ts as f64 / window_ms).floor() as usize;
        if w >= n_windows {
            break;
        }
        counts[w] += 1;
    }
    let bits_per_opp = sched.mtu_bytes as f64 * 8.0;
    let mut floored = 0;
    let mu: Vec<f64> = counts
        .iter()
        .map(|&c| {
            let m = c as f64 * bits_per_opp / round_duration;
            if m < floor {
                floored += 1;
                floor
            } else {
                m
            }
        })
        .collect();
    Ok(IngestReport {
        mu,
        counts,
        floored_rounds: floored,
        round_duration,
        mtu_bytes: sched.mtu_bytes,
    })
}

/// Serialize a capacity trace. Values use the shortest decimal form that
/// reads back to the identical double.
pub fn write_capacity_csv(trace: &CapacityTrace) -> String {
    let mut s = String::with_capacity(16 * trace.len() + 64);
    let _ = writeln!(
        s,
        "# T={} mtu={} origin={}",
        trace.round_duration, trace.mtu_bytes, trace.origin
    );
    s.push_str("round,mu_bps\n");
    for (i, m) in trace.mu.iter().enumerate() {
        let _ = writeln!(s, "{i},{m}");
    }
    s
}

pub fn read_capacity_csv(text: &str) -> Result<CapacityTrace> {
    let mut lines = text.lines().map(|l| l.strip_suffix('\r').unwrap_or(l));
    let meta = lines.next().ok_or(Error::Format {
        row: 0,
        msg: "missing metadata line".into(),
    })?;
    let (t, mtu, origin) = parse_meta(meta)?;
    match lines.next() {
        Some("round,mu_bps") => {}
        other => {
            return Err(Error::Format {
                row: 1,
                msg: format!("expected header 'round,mu_bps', got {:?}", other.unwrap_or("")),
            })
        }
    }
    let mut mu = Vec::new();
    for (i, line) in lines.enumerate() {
        let row = i + 2;
        if line.trim().is_empty() {
            continue;
        }
        let mut cells = line.split(',');
        let (r, m) = match (cells.next(), cells.next(), cells.next()) {
            (Some(r), Some(m), None) => (r, m),
            _ => {
                return Err(Error::Format {
                    row,
                    msg: format!("expected 2 cells, got {line:?}"),
                })
            }
        };
        let idx: usize = r.trim().parse().map_err(|_| Error::Format {
            row,
            msg: format!("non-numeric round index {r:?}"),
        })?;
        if idx != mu.len() {
            return Err(Error::Format {
                row,
                msg: format!("round index {idx} out of sequence, expected {}", mu.len()),
            });
        }
        let v: f64 = m.trim().parse().map_err(|_| Error::Format {
            row,
            msg: format!("non-numeric capacity {m:?}"),
        })?;
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::Format {
                row,
                msg: format!("capacity must be positive, got {v}"),
            });
        }
        mu.push(v);
    }
    CapacityTrace::with_mtu(mu, t, mtu, origin)
}

fn parse_meta(line: &str) -> Result<(f64, u32, Origin)> {
    let bad = |msg: String| Error::Format { row: 0, msg };
    let body = line
        .strip_prefix('#')
        .ok_or_else(|| bad(format!("expected '# T=... mtu=... origin=...', got {line:?}")))?;
    let (mut t, mut mtu, mut origin) = (None, None, None);
    for tok in body.split_whitespace() {
        let (k, v) = tok
            .split_once('=')
            .ok_or_else(|| bad(format!("malformed metadata token {tok:?}")))?;
        match k {
            "T" => t = Some(v.parse::<f64>().map_err(|_| bad(format!("bad T {v:?}")))?),
            "mtu" => mtu = Some(v.parse::<u32>().map_err(|_| bad(format!("bad mtu {v:?}")))?),
            "origin" => origin = Some(v.parse::<Origin>().map_err(|e| bad(e.to_string()))?),
            _ => return Err(bad(format!("unknown metadata key {k:?}"))),
        }
    }
    match (t, mtu, origin) {
        (Some(t), Some(m), Some(o)) => Ok((t, m, o)),
        _ => Err(bad("metadata must define T, mtu and origin".into())),
    }
}
