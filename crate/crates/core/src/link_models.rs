//! Link models: multiplicative i.i.d. factors (MIF), MIF with a capacity
//! prediction (PMIF), and state-dependent factors (SMF) whose state is the
//! binned previous-round capacity.

use serde::{Deserialize, Serialize};

use crate::distributions::{Atoms, RatioDist, JSON_WEIGHT_TOL};
use crate::error::{param, Error, Result};
use crate::rng::SplitMix64;
use crate::trace_io::{CapacityTrace, Origin};

pub const DEFAULT_SMF_BINS: usize = 8;
pub const DEFAULT_MIN_SAMPLES_PER_BIN: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct MifModel {
    pub ratio: RatioDist,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PmifModel {
    /// `X^p = mu(t) / Pred(t-1)`.
    pub pred_error: RatioDist,
    /// `X^pred = Pred(t) / Pred(t-1)`.
    pub pred_drift: RatioDist,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmfState {
    pub lambda: f64,
    pub ratio: RatioDist,
    /// Mean of the source capacities that fell into this bin (bits/s);
    /// present only for models fitted from a trace.
    pub mean_mu: Option<f64>,
}

/// Capacity-binned link model.
///
/// `bin_edges` has `K + 1` non-decreasing entries. Bin `k < K - 1` covers
/// `[e_k, e_{k+1})`, the last bin is closed on both ends.
#[derive(Debug, Clone, PartialEq)]
pub struct SmfModel {
    bin_edges: Vec<f64>,
    states: Vec<SmfState>,
}

/// Bin lookup result.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateLookup {
    pub state: usize,
    /// The capacity fell outside `[e_0, e_K]` and was clamped to an edge bin.
    pub clamped: bool,
}

impl SmfModel {
    pub fn new(bin_edges: Vec<f64>, states: Vec<SmfState>) -> Result<Self> {
        if states.is_empty() {
            return Err(param("an SMF model needs at least one state"));
        }
        if bin_edges.len() != states.len() + 1 {
            return Err(param(format!(
                "{} states need {} bin edges, got {}",
                states.len(),
                states.len() + 1,
                bin_edges.len()
            )));
        }
        if bin_edges.iter().any(|e| e.is_nan()) || bin_edges.windows(2).any(|w| w[1] < w[0]) {
            return Err(param("bin edges must be non-decreasing"));
        }
        let total: f64 = states.iter().map(|s| s.lambda).sum();
        if states.iter().any(|s| !(s.lambda >= 0.0)) || (total - 1.0).abs() > 1e-12 {
            return Err(param(format!("state weights must sum to 1, got {total}")));
        }
        if states.iter().any(|s| s.mean_mu.is_some_and(|m| !(m > 0.0))) {
            return Err(param("bin mean capacities must be positive"));
        }
        Ok(Self { bin_edges, states })
    }

    /// A one-state model that reproduces a MIF link.
    pub fn single(ratio: RatioDist) -> Self {
        Self {
            bin_edges: vec![0.0, f64::MAX],
            states: vec![SmfState {
                lambda: 1.0,
                ratio,
                mean_mu: None,
            }],
        }
    }

    pub fn bin_edges(&self) -> &[f64] {
        &self.bin_edges
    }

    pub fn states(&self) -> &[SmfState] {
        &self.states
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn lookup(&self, mu: f64) -> StateLookup {
        lookup_bin(&self.bin_edges, mu)
    }

    /// Per-state mean capacities, if every state has one.
    pub fn mean_mu(&self) -> Option<Vec<f64>> {
        self.states.iter().map(|s| s.mean_mu).collect()
    }

    pub fn to_json(&self) -> String {
        let doc = SmfJson {
            bin_edges: self.bin_edges.clone(),
            states: self
                .states
                .iter()
                .map(|s| SmfStateJson {
                    lambda: s.lambda,
                    atoms: match &s.ratio {
                        RatioDist::Empirical(a) => a.iter().collect(),
                        other => other.discretize(512).iter().collect(),
                    },
                    mean_mu: s.mean_mu,
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: SmfJson =
            serde_json::from_str(text).map_err(|e| param(format!("SMF model JSON: {e}")))?;
        let states = doc
            .states
            .into_iter()
            .map(|s| {
                Ok(SmfState {
                    lambda: s.lambda,
                    ratio: RatioDist::Empirical(Atoms::with_tolerance(s.atoms, JSON_WEIGHT_TOL)?),
                    mean_mu: s.mean_mu,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        // JSON weights are printed, so allow the looser tolerance and renormalize
        let total: f64 = states.iter().map(|s| s.lambda).sum();
        if (total - 1.0).abs() > JSON_WEIGHT_TOL {
            return Err(param(format!("state weights sum to {total}, expected 1")));
        }
        let states = states
            .into_iter()
            .map(|s| SmfState {
                lambda: s.lambda / total,
                ..s
            })
            .collect();
        Self::new(doc.bin_edges, states)
    }
}

#[derive(Serialize, Deserialize)]
struct SmfJson {
    bin_edges: Vec<f64>,
    states: Vec<SmfStateJson>,
}

#[derive(Serialize, Deserialize)]
struct SmfStateJson {
    lambda: f64,
    atoms: Vec<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mean_mu: Option<f64>,
}

pub(crate) fn lookup_bin(edges: &[f64], mu: f64) -> StateLookup {
    let k = edges.len() - 1;
    let clamped = mu < edges[0] || mu > edges[k];
    let interior = &edges[1..k];
    StateLookup {
        state: interior.partition_point(|&e| e <= mu),
        clamped,
    }
}

/// Capacity predictions aligned so that `for_round(t)` is `Pred(t-1)`, the
/// value available before round `t` starts (`t >= 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSeries {
    pred: Vec<f64>,
}

impl PredictionSeries {
    /// `pred[i]` is the prediction used in round `i + 1`.
    pub fn new(pred: Vec<f64>) -> Result<Self> {
        if let Some(v) = pred.iter().find(|p| !(**p > 0.0 && p.is_finite())) {
            return Err(param(format!("predictions must be positive, got {v}")));
        }
        Ok(Self { pred })
    }

    pub fn for_round(&self, t: usize) -> f64 {
        self.pred[t - 1]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.pred
    }

    pub fn len(&self) -> usize {
        self.pred.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pred.is_empty()
    }

    pub fn scaled(&self, k: f64) -> Result<Self> {
        Self::new(self.pred.iter().map(|p| p * k).collect())
    }
}

pub fn fit_mif(trace: &CapacityTrace) -> Result<MifModel> {
    if trace.len() < 2 {
        return Err(param("fitting needs at least 2 rounds"));
    }
    Ok(MifModel {
        ratio: RatioDist::fit_from_samples(&trace.ratios())?,
    })
}

/// Fit an SMF model whose state is the quantile bin of `mu(t-1)`.
pub fn fit_smf(
    trace: &CapacityTrace,
    num_bins: usize,
    min_samples_per_bin: usize,
) -> Result<SmfModel> {
    if num_bins == 0 {
        return Err(param("num_bins must be at least 1"));
    }
    let mu = trace.mu();
    let sources = &mu[..mu.len() - 1];
    let n = sources.len();
    if n < min_samples_per_bin.max(1) {
        return Err(Error::Fit(format!(
            "{n} transitions cannot fill a bin of {min_samples_per_bin} samples"
        )));
    }
    let mut sorted = sources.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut edges = Vec::with_capacity(num_bins + 1);
    edges.push(sorted[0]);
    for j in 1..num_bins {
        let idx = (j * n).div_ceil(num_bins).min(n - 1);
        edges.push(sorted[idx]);
    }
    edges.push(sorted[n - 1]);

    let count_bins = |edges: &[f64]| {
        let mut c = vec![0usize; edges.len() - 1];
        for &m in sources {
            c[lookup_bin(edges, m).state] += 1;
        }
        c
    };
    loop {
        let counts = count_bins(&edges);
        let (k, &smallest) = counts
            .iter()
            .enumerate()
            .min_by_key(|&(_, c)| *c)
            .expect("at least one bin");
        if smallest >= min_samples_per_bin || counts.len() == 1 {
            break;
        }
        // merge into the smaller neighbour; the removed edge is the shared one
        let left = (k > 0).then(|| counts[k - 1]);
        let right = (k + 1 < counts.len()).then(|| counts[k + 1]);
        let merge_left = match (left, right) {
            (Some(l), Some(r)) => l <= r,
            (Some(_), None) => true,
            _ => false,
        };
        edges.remove(if merge_left { k } else { k + 1 });
    }

    let k = edges.len() - 1;
    let mut ratios = vec![Vec::new(); k];
    let mut sum_mu = vec![0.0; k];
    for (t, &m) in sources.iter().enumerate() {
        let s = lookup_bin(&edges, m).state;
        ratios[s].push(mu[t + 1] / m);
        sum_mu[s] += m;
    }
    let states = ratios
        .into_iter()
        .zip(sum_mu)
        .map(|(r, s)| {
            Ok(SmfState {
                lambda: r.len() as f64 / n as f64,
                mean_mu: Some(s / r.len() as f64),
                ratio: RatioDist::fit_from_samples(&r)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    // lambdas are count / n; renormalize away the rounding
    let total: f64 = states.iter().map(|s| s.lambda).sum();
    let states = states
        .into_iter()
        .map(|s| SmfState {
            lambda: s.lambda / total,
            ..s
        })
        .collect();
    SmfModel::new(edges, states)
}

pub fn gen_mif(
    model: &MifModel,
    mu0: f64,
    n_rounds: usize,
    round_duration: f64,
    seed: u64,
) -> Result<CapacityTrace> {
    gen_mif_with(model, mu0, n_rounds, round_duration, &mut SplitMix64::new(seed))
}

/// MIF generation drawing one ratio per round from `rng`.
pub fn gen_mif_with(
    model: &MifModel,
    mu0: f64,
    n_rounds: usize,
    round_duration: f64,
    rng: &mut SplitMix64,
) -> Result<CapacityTrace> {
    check_gen(mu0, n_rounds)?;
    let mut mu = Vec::with_capacity(n_rounds);
    mu.push(mu0);
    for t in 1..n_rounds {
        let next = mu[t - 1] * model.ratio.sample(rng);
        check_range(next, t)?;
        mu.push(next);
    }
    CapacityTrace::new(mu, round_duration, Origin::SyntheticMif)
}

/// Generated SMF trace plus the number of rounds whose state lookup had to
/// be clamped to an edge bin.
#[derive(Debug, Clone, PartialEq)]
pub struct SmfTrace {
    pub trace: CapacityTrace,
    pub clamped_lookups: usize,
}

pub fn gen_smf(
    model: &SmfModel,
    mu0: f64,
    n_rounds: usize,
    round_duration: f64,
    seed: u64,
) -> Result<SmfTrace> {
    gen_smf_with(model, mu0, n_rounds, round_duration, &mut SplitMix64::new(seed))
}

pub fn gen_smf_with(
    model: &SmfModel,
    mu0: f64,
    n_rounds: usize,
    round_duration: f64,
    rng: &mut SplitMix64,
) -> Result<SmfTrace> {
    check_gen(mu0, n_rounds)?;
    let mut mu = Vec::with_capacity(n_rounds);
    mu.push(mu0);
    let mut clamped = 0;
    for t in 1..n_rounds {
        let look = model.lookup(mu[t - 1]);
        clamped += look.clamped as usize;
        let next = mu[t - 1] * model.states[look.state].ratio.sample(rng);
        check_range(next, t)?;
        mu.push(next);
    }
    Ok(SmfTrace {
        trace: CapacityTrace::new(mu, round_duration, Origin::SyntheticSmf)?,
        clamped_lookups: clamped,
    })
}

/// Multiplicative paths drift geometrically; long ones can leave the `f64`
/// range. `sim_engine::run_model` handles such lengths without a trace.
fn check_range(mu: f64, t: usize) -> Result<()> {
    if mu.is_finite() && mu > 0.0 {
        Ok(())
    } else {
        Err(param(format!(
            "generated capacity left the floating-point range at round {t}; \
             use fewer rounds or a streaming model run"
        )))
    }
}

fn check_gen(mu0: f64, n_rounds: usize) -> Result<()> {
    if !(mu0 > 0.0 && mu0.is_finite()) {
        return Err(param(format!("mu0 must be positive, got {mu0}")));
    }
    if n_rounds < 2 {
        return Err(param(format!("need at least 2 rounds, got {n_rounds}")));
    }
    Ok(())
}

/// Synthetic predictions `Pred(t-1) = mu(t) / X^p` for every round `t >= 1`.
pub fn gen_predictions(
    trace: &CapacityTrace,
    pred_error: &RatioDist,
    seed: u64,
) -> Result<PredictionSeries> {
    let mut rng = SplitMix64::new(seed);
    let pred = trace.mu()[1..]
        .iter()
        .map(|m| m / pred_error.sample(&mut rng))
        .collect();
    PredictionSeries::new(pred)
}

impl PmifModel {
    /// Pair a known prediction error with the drift implied by a prediction
    /// series, `Pred(t) / Pred(t-1)`.
    pub fn with_fitted_drift(pred_error: RatioDist, preds: &PredictionSeries) -> Result<Self> {
        let p = preds.as_slice();
        if p.len() < 2 {
            return Err(Error::Fit("drift needs at least 2 predictions".into()));
        }
        let drift: Vec<f64> = p.windows(2).map(|w| w[1] / w[0]).collect();
        Ok(Self {
            pred_error,
            pred_drift: RatioDist::fit_from_samples(&drift)?,
        })
    }
}
