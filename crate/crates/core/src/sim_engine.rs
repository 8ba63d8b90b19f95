//! Trace replay, parameter sweeps and Monte Carlo estimates.
//!
//! Round 0 only seeds the first observation; records and aggregates cover
//! rounds `1..len`.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::control_laws::{positive_part, raw_rate, rho_of, LawConfig, Observation};
use crate::error::{param, Error, Result};
use crate::link_models::{lookup_bin, MifModel, PredictionSeries, SmfModel};
use crate::rng::SplitMix64;
use crate::trace_io::CapacityTrace;

pub const RUN_CSV_HEADER: &str = "t,s_bps,mu_bps,q_bits,q_delay_s,underutil,lost_bps,rho";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimRecord {
    pub t: usize,
    pub s: f64,
    pub mu: f64,
    pub q_len: f64,
    pub q_delay: f64,
    pub underutil: f64,
    pub lost: f64,
    pub rho: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimSummary {
    pub mean_q: f64,
    pub mean_u: f64,
    pub mean_lost: f64,
    pub rounds: usize,
    pub clamp_count: usize,
    pub max_q_delay: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOptions {
    /// Required by `optimal-pmif`; entry `t-1` is used in round `t`.
    pub preds: Option<PredictionSeries>,
    /// SMF bin edges used to label `S(t-1)`; required by `optimal-smf`.
    pub smf_bins: Option<Vec<f64>>,
    /// Initial backlog `Q(0)` in bits.
    pub q0: f64,
    /// XCP's `s(0)`; `None` means `mu(0)`.
    pub xcp_initial_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimRun {
    pub records: Vec<SimRecord>,
    pub summary: SimSummary,
}

impl SimRun {
    pub fn to_csv(&self) -> String {
        records_to_csv(&self.records)
    }
}

pub fn records_to_csv(records: &[SimRecord]) -> String {
    let mut s = String::with_capacity(64 * (records.len() + 1));
    s.push_str(RUN_CSV_HEADER);
    s.push('\n');
    for r in records {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            r.t, r.s, r.mu, r.q_len, r.q_delay, r.underutil, r.lost, r.rho
        );
    }
    s
}

pub fn run(trace: &CapacityTrace, law: &LawConfig, opts: &RunOptions) -> Result<SimRun> {
    law.validate()?;
    let mu = trace.mu();
    let t_len = trace.round_duration();
    if !(opts.q0 >= 0.0 && opts.q0.is_finite()) {
        return Err(param(format!("q0 must be >= 0, got {}", opts.q0)));
    }
    if law.needs_prediction() {
        match &opts.preds {
            None => return Err(Error::Config("optimal-pmif requires a prediction series".into())),
            Some(p) if p.len() < mu.len() - 1 => {
                return Err(Error::Config(format!(
                    "prediction series has {} entries, trace needs {}",
                    p.len(),
                    mu.len() - 1
                )))
            }
            _ => {}
        }
    }
    if law.needs_state() && opts.smf_bins.is_none() {
        return Err(Error::Config("optimal-smf requires SMF bin edges".into()));
    }

    let mut stepper = Stepper::new(law, t_len, opts.q0, opts.xcp_initial_rate.unwrap_or(mu[0]));
    let mut records = Vec::with_capacity(mu.len() - 1);
    for t in 1..mu.len() {
        let pred = opts.preds.as_ref().filter(|_| law.needs_prediction()).map(|p| p.for_round(t));
        let state = opts.smf_bins.as_ref().map(|e| lookup_bin(e, mu[t - 1]).state);
        let rec = stepper.advance(mu[t - 1], mu[t], pred, state, t, 1.0)?;
        records.push(rec);
    }
    Ok(SimRun {
        records,
        summary: stepper.summary(),
    })
}

/// Law plus queue state carried from round to round.
struct Stepper<'a> {
    law: &'a LawConfig,
    round_duration: f64,
    q_prev: f64,
    s_prev: f64,
    rounds: usize,
    clamp_count: usize,
    sum_q: f64,
    sum_u: f64,
    sum_lost: f64,
    max_q: f64,
}

impl<'a> Stepper<'a> {
    fn new(law: &'a LawConfig, round_duration: f64, q0: f64, s0: f64) -> Self {
        Self {
            law,
            round_duration,
            q_prev: q0,
            s_prev: s0,
            rounds: 0,
            clamp_count: 0,
            sum_q: 0.0,
            sum_u: 0.0,
            sum_lost: 0.0,
            max_q: 0.0,
        }
    }

    /// One round. `unit` converts the lost rate to bits/s when capacities
    /// are held in a rescaled unit.
    fn advance(
        &mut self,
        mu_prev: f64,
        mu: f64,
        pred: Option<f64>,
        state_prev: Option<usize>,
        t: usize,
        unit: f64,
    ) -> Result<SimRecord> {
        let obs = Observation {
            mu_prev,
            q_len_prev: self.q_prev,
            rate_prev: self.s_prev,
            pred,
            state_prev,
            round_duration: self.round_duration,
        };
        let raw = raw_rate(self.law, &obs)?;
        if raw < 0.0 {
            self.clamp_count += 1;
        }
        let s = positive_part(raw);
        let rec = step(&obs, s, mu, t);
        self.rounds += 1;
        self.sum_q += rec.q_delay;
        self.sum_u += rec.underutil;
        self.sum_lost += rec.lost * unit;
        self.max_q = self.max_q.max(rec.q_delay);
        self.q_prev = rec.q_len;
        self.s_prev = s;
        Ok(rec)
    }

    /// Multiply the carried bit quantities by `k`.
    fn rescale(&mut self, k: f64) {
        self.q_prev *= k;
        self.s_prev *= k;
    }

    fn summary(&self) -> SimSummary {
        let n = self.rounds as f64;
        SimSummary {
            mean_q: self.sum_q / n,
            mean_u: self.sum_u / n,
            mean_lost: self.sum_lost / n,
            rounds: self.rounds,
            clamp_count: self.clamp_count,
            max_q_delay: self.max_q,
        }
    }
}

/// Advance the queue one round with rate `s` and capacity `mu`.
///
/// The signed excess is computed once so that backlog and spare capacity
/// are never both positive.
fn step(obs: &Observation, s: f64, mu: f64, t: usize) -> SimRecord {
    let tl = obs.round_duration;
    let excess = obs.q_len_prev + s * tl - mu * tl;
    let q_len = positive_part(excess);
    let spare = positive_part(-excess);
    SimRecord {
        t,
        s,
        mu,
        q_len,
        q_delay: q_len / mu,
        underutil: spare / (mu * tl),
        lost: spare / tl,
        rho: rho_of(obs, s),
    }
}

/// Sweep results. `entries` is ordered by `mean_q` (stable with respect to
/// input order); failed configs are listed in `errors` with their input
/// index.
#[derive(Debug, Clone, PartialEq)]
pub struct PerfCurve {
    pub entries: Vec<(LawConfig, SimSummary)>,
    pub errors: Vec<(usize, LawConfig, Error)>,
}

impl PerfCurve {
    /// `law,config,mean_q,mean_u,mean_lost,rounds,clamp_count,max_q_delay`;
    /// `config` is the law's JSON.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("law,config,mean_q,mean_u,mean_lost,rounds,clamp_count,max_q_delay\n");
        for (law, m) in &self.entries {
            let cfg = serde_json::to_string(law).expect("law serializes").replace('"', "\"\"");
            let _ = writeln!(
                s,
                "{},\"{}\",{},{},{},{},{},{}",
                law.name(),
                cfg,
                m.mean_q,
                m.mean_u,
                m.mean_lost,
                m.rounds,
                m.clamp_count,
                m.max_q_delay
            );
        }
        s
    }
}

/// Run every config on the same trace. Runs in parallel on the current
/// rayon pool; results do not depend on the pool size.
pub fn sweep(trace: &CapacityTrace, family: &[LawConfig], opts: &RunOptions) -> Result<PerfCurve> {
    if family.is_empty() {
        return Err(param("sweep needs at least one law config"));
    }
    let results: Vec<Result<SimSummary>> = family
        .par_iter()
        .map(|law| run(trace, law, opts).map(|r| r.summary))
        .collect();
    let mut entries = Vec::new();
    let mut errors = Vec::new();
    for (i, (law, res)) in family.iter().zip(results).enumerate() {
        match res {
            Ok(s) => entries.push((law.clone(), s)),
            Err(e) => errors.push((i, law.clone(), e)),
        }
    }
    entries.sort_by(|a, b| a.1.mean_q.total_cmp(&b.1.mean_q));
    Ok(PerfCurve { entries, errors })
}

#[derive(Debug, Clone, PartialEq)]
pub enum LinkModel {
    Mif(MifModel),
    Smf(SmfModel),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McSettings {
    pub n_rounds: usize,
    pub n_seeds: usize,
    pub mu0: f64,
    pub round_duration: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McResult {
    pub mean_q: f64,
    pub mean_u: f64,
    pub mean_lost: f64,
    pub stderr_q: f64,
    pub stderr_u: f64,
    pub stderr_lost: f64,
    pub per_seed: Vec<SimSummary>,
}

/// Capacities are kept within `[2^-RESCALE_EXP, 2^RESCALE_EXP]` of the
/// working unit.
const RESCALE_EXP: i32 = 256;

/// Draw a capacity path from `model` and replay `law` on it in one pass,
/// without storing the trace.
///
/// Multiplicative paths drift geometrically, so long runs leave the `f64`
/// range. Whenever the working capacity leaves `[2^-256, 2^256]`, capacity,
/// backlog and last rate are all divided by the same power of two. Every
/// law is homogeneous of degree one in those quantities and the division
/// is exact, so per-round delays, underutilization, loads and clamp
/// decisions are bit-identical to an unscaled replay of the same draws.
/// `on_record` receives records in the working unit together with its
/// binary exponent (`bits = value * 2^exp`). SMF state lookups use the true
/// capacity.
///
/// Draws are consumed exactly as by `gen_mif_with` / `gen_smf_with`.
pub fn run_model<F: FnMut(&SimRecord, i32)>(
    model: &LinkModel,
    law: &LawConfig,
    n_rounds: usize,
    mu0: f64,
    round_duration: f64,
    rng: &mut SplitMix64,
    mut on_record: F,
) -> Result<SimSummary> {
    law.validate()?;
    if law.needs_prediction() {
        return Err(Error::Config(
            "model runs do not generate predictions; replay a trace with a prediction series".into(),
        ));
    }
    if !(mu0 > 0.0 && mu0.is_finite()) {
        return Err(param(format!("mu0 must be positive, got {mu0}")));
    }
    if n_rounds < 2 {
        return Err(param(format!("need at least 2 rounds, got {n_rounds}")));
    }
    if !(round_duration > 0.0 && round_duration.is_finite()) {
        return Err(param(format!("round duration must be positive, got {round_duration}")));
    }
    let smf = match model {
        LinkModel::Smf(m) => Some(m),
        LinkModel::Mif(_) => None,
    };
    if law.needs_state() && smf.is_none() {
        return Err(Error::Config("optimal-smf requires an SMF model".into()));
    }
    let mut stepper = Stepper::new(law, round_duration, 0.0, mu0);
    let mut exp = 0i32;
    let mut mu_prev = mu0;
    for t in 1..n_rounds {
        let unit = pow2(exp);
        let (x, state) = match model {
            LinkModel::Mif(m) => (m.ratio.sample(rng), None),
            LinkModel::Smf(m) => {
                let k = m.lookup(mu_prev * unit).state;
                (m.states()[k].ratio.sample(rng), Some(k))
            }
        };
        let mu = mu_prev * x;
        let rec = stepper.advance(mu_prev, mu, None, state, t, unit)?;
        on_record(&rec, exp);
        mu_prev = mu;
        let e = mu.log2().floor() as i32;
        if e.abs() > RESCALE_EXP {
            let k = pow2(-e);
            mu_prev *= k;
            stepper.rescale(k);
            exp += e;
        }
    }
    Ok(stepper.summary())
}

/// `2^e`, saturating to `0` / `inf` outside the normal range.
fn pow2(e: i32) -> f64 {
    2f64.powi(e)
}

/// One simulated path per seed (stream `i` of `settings.seed`), averaged.
pub fn monte_carlo(model: &LinkModel, law: &LawConfig, settings: &McSettings) -> Result<McResult> {
    if settings.n_seeds < 2 {
        return Err(param(format!("need at least 2 seeds, got {}", settings.n_seeds)));
    }
    let per_seed: Vec<SimSummary> = (0..settings.n_seeds as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = SplitMix64::from_stream(settings.seed, i);
            run_model(
                model,
                law,
                settings.n_rounds,
                settings.mu0,
                settings.round_duration,
                &mut rng,
                |_, _| {},
            )
        })
        .collect::<Result<_>>()?;
    let (mean_q, stderr_q) = mean_stderr(per_seed.iter().map(|s| s.mean_q));
    let (mean_u, stderr_u) = mean_stderr(per_seed.iter().map(|s| s.mean_u));
    let (mean_lost, stderr_lost) = mean_stderr(per_seed.iter().map(|s| s.mean_lost));
    Ok(McResult {
        mean_q,
        mean_u,
        mean_lost,
        stderr_q,
        stderr_u,
        stderr_lost,
        per_seed,
    })
}

/// Sample mean and standard error of the mean (n - 1 denominator).
pub fn mean_stderr(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = xs.clone().count() as f64;
    // shifted by the first value so identical inputs give zero spread exactly
    let x0 = xs.clone().next().unwrap_or(0.0);
    let mean = x0 + xs.clone().map(|x| x - x0).sum::<f64>() / n;
    if n < 2.0 {
        return (mean, 0.0);
    }
    let var = xs.map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QueueBound {
    pub holds: bool,
    /// Round index `t` of the first record with `Q(t) > T * C * mu(t)`.
    pub first_violation: Option<usize>,
}

pub fn check_queue_bound(records: &[SimRecord], c: f64, round_duration: f64) -> QueueBound {
    let first = records
        .iter()
        .find(|r| r.q_len > round_duration * c * r.mu)
        .map(|r| r.t);
    QueueBound {
        holds: first.is_none(),
        first_violation: first,
    }
}
