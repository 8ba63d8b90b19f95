//! The capacity-ratio random variable `X = mu(t) / mu(t-1)` and the
//! expectation functionals evaluated against it.
//!
//! Empirical atom sets are the canonical representation (they come out of
//! trace fitting). Uniform, log-uniform and point-mass laws exist for
//! synthetic links and tests; their functionals use closed-form
//! antiderivatives.
//!
//! Conventions used by every functional at load `b`:
//!
//! * queue factor `E[(b/X - 1)^+]`, underutilization `E[(1 - b/X)^+]` and
//!   unused capacity `E[(X - b)^+]` all vanish for an atom at exactly `b`, so
//!   inclusive and exclusive sums agree.
//! * the frontier slope is the left derivative in `b`: atoms strictly below
//!   `b` feed the denominator, atoms at or above `b` feed the numerator.

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::rng::SplitMix64;

/// Weights of a constructed distribution must sum to one within this.
pub const WEIGHT_TOL: f64 = 1e-12;
/// Looser tolerance accepted from JSON input.
pub const JSON_WEIGHT_TOL: f64 = 1e-9;

/// Finite set of positive atoms with probabilities.
///
/// Prefix/suffix sums are cached so every functional is a binary search
/// plus O(1) arithmetic.
#[derive(Debug, Clone, PartialEq)]
pub struct Atoms {
    values: Vec<f64>,
    weights: Vec<f64>,
    // length n + 1, index i covers atoms [0, i)
    cum_p: Vec<f64>,
    cum_inv: Vec<f64>,
    // length n + 1, index i covers atoms [i, n)
    tail_p: Vec<f64>,
    tail_inv: Vec<f64>,
    tail_mean: Vec<f64>,
}

impl Atoms {
    /// Build from `(value, weight)` pairs sorted strictly ascending by value.
    /// Zero-weight atoms are dropped; weights are renormalized after the sum
    /// check.
    pub fn new(pairs: Vec<(f64, f64)>) -> Result<Self> {
        Self::with_tolerance(pairs, WEIGHT_TOL)
    }

    pub fn with_tolerance(pairs: Vec<(f64, f64)>, tol: f64) -> Result<Self> {
        if pairs.is_empty() {
            return Err(param("a distribution needs at least one atom"));
        }
        let mut sum = 0.0;
        for (i, &(a, p)) in pairs.iter().enumerate() {
            if !(a > 0.0 && a.is_finite()) {
                return Err(param(format!("atom {i}: value must be positive, got {a}")));
            }
            if !(p >= 0.0 && p.is_finite()) {
                return Err(param(format!("atom {i}: weight must be non-negative, got {p}")));
            }
            if i > 0 && a <= pairs[i - 1].0 {
                return Err(param(format!("atoms must be strictly ascending at index {i}")));
            }
            sum += p;
        }
        if (sum - 1.0).abs() > tol {
            return Err(param(format!("weights sum to {sum}, expected 1")));
        }
        let (values, weights): (Vec<f64>, Vec<f64>) = pairs
            .into_iter()
            .filter(|&(_, p)| p > 0.0)
            .map(|(a, p)| (a, p / sum))
            .unzip();
        Ok(Self::from_parts(values, weights))
    }

    fn from_parts(values: Vec<f64>, weights: Vec<f64>) -> Self {
        let n = values.len();
        let mut cum_p = vec![0.0; n + 1];
        let mut cum_inv = vec![0.0; n + 1];
        for i in 0..n {
            cum_p[i + 1] = cum_p[i] + weights[i];
            cum_inv[i + 1] = cum_inv[i] + weights[i] / values[i];
        }
        let mut tail_p = vec![0.0; n + 1];
        let mut tail_inv = vec![0.0; n + 1];
        let mut tail_mean = vec![0.0; n + 1];
        for i in (0..n).rev() {
            tail_p[i] = tail_p[i + 1] + weights[i];
            tail_inv[i] = tail_inv[i + 1] + weights[i] / values[i];
            tail_mean[i] = tail_mean[i + 1] + weights[i] * values[i];
        }
        Self {
            values,
            weights,
            cum_p,
            cum_inv,
            tail_p,
            tail_inv,
            tail_mean,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.values.iter().copied().zip(self.weights.iter().copied())
    }

    /// Number of atoms strictly below `b`.
    fn below(&self, b: f64) -> usize {
        self.values.partition_point(|&a| a < b)
    }

    /// Number of atoms at or below `b`.
    fn at_or_below(&self, b: f64) -> usize {
        self.values.partition_point(|&a| a <= b)
    }

    fn quantile(&self, p: f64) -> f64 {
        let i = self.cum_p[1..].partition_point(|&c| c <= p);
        self.values[i.min(self.len() - 1)]
    }
}

/// Distribution of the multiplicative capacity factor.
#[derive(Debug, Clone, PartialEq)]
pub enum RatioDist {
    Empirical(Atoms),
    /// `X ~ U(lo, hi)`.
    Uniform { lo: f64, hi: f64 },
    /// `X = exp(E)`, `E ~ U(e_lo, e_hi)`.
    LogUniform { e_lo: f64, e_hi: f64 },
    PointMass(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistSummary {
    pub x_min: f64,
    pub x_max: f64,
    pub mean_log: f64,
}

#[derive(Serialize, Deserialize)]
struct AtomsJson {
    atoms: Vec<(f64, f64)>,
}

impl RatioDist {
    pub fn empirical(pairs: Vec<(f64, f64)>) -> Result<Self> {
        Atoms::new(pairs).map(RatioDist::Empirical)
    }

    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        if !(lo > 0.0 && lo < hi && hi.is_finite()) {
            return Err(param(format!("uniform needs 0 < lo < hi, got ({lo}, {hi})")));
        }
        Ok(RatioDist::Uniform { lo, hi })
    }

    pub fn log_uniform(e_lo: f64, e_hi: f64) -> Result<Self> {
        if !(e_lo < e_hi && e_lo.is_finite() && e_hi.is_finite()) {
            return Err(param(format!(
                "log-uniform needs e_lo < e_hi, got ({e_lo}, {e_hi})"
            )));
        }
        Ok(RatioDist::LogUniform { e_lo, e_hi })
    }

    pub fn point_mass(v: f64) -> Result<Self> {
        if !(v > 0.0 && v.is_finite()) {
            return Err(param(format!("point mass must be positive, got {v}")));
        }
        Ok(RatioDist::PointMass(v))
    }

    /// Empirical distribution with one atom per distinct sample value.
    pub fn fit_from_samples(samples: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Fit("no samples".into()));
        }
        if let Some(bad) = samples.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
            return Err(Error::Fit(format!("samples must be positive, got {bad}")));
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len() as f64;
        let mut values = Vec::new();
        let mut weights = Vec::new();
        let mut i = 0;
        while i < sorted.len() {
            let v = sorted[i];
            let j = i + sorted[i..].partition_point(|&x| x == v);
            values.push(v);
            weights.push((j - i) as f64 / n);
            i = j;
        }
        Ok(RatioDist::Empirical(Atoms::from_parts(values, weights)))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let parsed: AtomsJson = serde_json::from_str(text)
            .map_err(|e| param(format!("distribution JSON: {e}")))?;
        Atoms::with_tolerance(parsed.atoms, JSON_WEIGHT_TOL).map(RatioDist::Empirical)
    }

    /// `{"atoms": [[a, p], ...]}`; analytic laws are written as their
    /// 512-atom equal-probability discretization.
    pub fn to_json(&self) -> String {
        let atoms = match self {
            RatioDist::Empirical(a) => a.iter().collect(),
            other => other.discretize(512).iter().collect(),
        };
        serde_json::to_string(&AtomsJson { atoms }).expect("atoms serialize")
    }

    pub fn atoms(&self) -> Option<&Atoms> {
        match self {
            RatioDist::Empirical(a) => Some(a),
            _ => None,
        }
    }

    pub fn x_min(&self) -> f64 {
        match self {
            RatioDist::Empirical(a) => a.values[0],
            RatioDist::Uniform { lo, .. } => *lo,
            RatioDist::LogUniform { e_lo, .. } => e_lo.exp(),
            RatioDist::PointMass(v) => *v,
        }
    }

    pub fn x_max(&self) -> f64 {
        match self {
            RatioDist::Empirical(a) => a.values[a.len() - 1],
            RatioDist::Uniform { hi, .. } => *hi,
            RatioDist::LogUniform { e_hi, .. } => e_hi.exp(),
            RatioDist::PointMass(v) => *v,
        }
    }

    pub fn summary(&self) -> DistSummary {
        let mean_log = match self {
            RatioDist::Empirical(a) => a.iter().map(|(v, p)| p * v.ln()).sum(),
            RatioDist::Uniform { lo, hi } => {
                let f = |a: f64| a * a.ln() - a;
                (f(*hi) - f(*lo)) / (hi - lo)
            }
            RatioDist::LogUniform { e_lo, e_hi } => 0.5 * (e_lo + e_hi),
            RatioDist::PointMass(v) => v.ln(),
        };
        DistSummary {
            x_min: self.x_min(),
            x_max: self.x_max(),
            mean_log,
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            RatioDist::Empirical(a) => a.tail_mean[0],
            RatioDist::Uniform { lo, hi } => 0.5 * (lo + hi),
            RatioDist::LogUniform { e_lo, e_hi } => (e_hi.exp() - e_lo.exp()) / (e_hi - e_lo),
            RatioDist::PointMass(v) => *v,
        }
    }

    /// `E[1/X]`.
    pub fn mean_inv(&self) -> f64 {
        match self {
            RatioDist::Empirical(a) => a.tail_inv[0],
            RatioDist::Uniform { lo, hi } => (hi / lo).ln() / (hi - lo),
            RatioDist::LogUniform { e_lo, e_hi } => ((-e_lo).exp() - (-e_hi).exp()) / (e_hi - e_lo),
            RatioDist::PointMass(v) => 1.0 / v,
        }
    }

    /// Inverse CDF at `p` in `[0, 1)`.
    pub fn quantile(&self, p: f64) -> f64 {
        match self {
            RatioDist::Empirical(a) => a.quantile(p),
            RatioDist::Uniform { lo, hi } => lo + p * (hi - lo),
            RatioDist::LogUniform { e_lo, e_hi } => (e_lo + p * (e_hi - e_lo)).exp(),
            RatioDist::PointMass(v) => *v,
        }
    }

    /// One draw by inverse CDF; consumes exactly one generator output.
    pub fn sample(&self, rng: &mut SplitMix64) -> f64 {
        let u = rng.next_f64();
        self.quantile(u)
    }

    /// `n` draws, one per probability stratum `[i/n, (i+1)/n)`, jittered
    /// uniformly within the stratum.
    pub fn stratified_samples(&self, n: usize, rng: &mut SplitMix64) -> Vec<f64> {
        let inv = 1.0 / n as f64;
        (0..n)
            .map(|i| self.quantile((i as f64 + rng.next_f64()) * inv))
            .collect()
    }

    /// Equal-probability discretization into at most `n` atoms.
    ///
    /// Analytic laws use the stratum-midpoint quantiles. Empirical sets with
    /// more than `n` atoms are grouped by cumulative probability and each
    /// group is replaced by its conditional mean; smaller sets are returned
    /// unchanged.
    pub fn discretize(&self, n: usize) -> Atoms {
        assert!(n > 0);
        match self {
            RatioDist::Empirical(a) if a.len() <= n => a.clone(),
            RatioDist::Empirical(a) => {
                let mut values = Vec::with_capacity(n);
                let mut weights = Vec::with_capacity(n);
                let mut group = usize::MAX;
                for (i, (v, p)) in a.iter().enumerate() {
                    let mid = a.cum_p[i] + 0.5 * p;
                    let g = ((mid * n as f64) as usize).min(n - 1);
                    if g != group {
                        values.push(0.0);
                        weights.push(0.0);
                        group = g;
                    }
                    let k = values.len() - 1;
                    values[k] += p * v;
                    weights[k] += p;
                }
                for (v, w) in values.iter_mut().zip(&weights) {
                    *v /= w;
                }
                Atoms::from_parts(values, weights)
            }
            RatioDist::PointMass(v) => Atoms::from_parts(vec![*v], vec![1.0]),
            _ => {
                let w = 1.0 / n as f64;
                let values = (0..n).map(|i| self.quantile((i as f64 + 0.5) * w)).collect();
                Atoms::from_parts(values, vec![w; n])
            }
        }
    }

    // ---- raw functionals (no argument checks) ----

    /// `E[(b/X - 1)^+]`.
    pub(crate) fn queue_factor(&self, b: f64) -> f64 {
        let v = match self {
            RatioDist::Empirical(a) => {
                let i = a.below(b);
                b * a.cum_inv[i] - a.cum_p[i]
            }
            RatioDist::Uniform { lo, hi } => {
                if b <= *lo {
                    return 0.0;
                }
                let u = b.min(*hi);
                (b * (u / lo).ln() - (u - lo)) / (hi - lo)
            }
            RatioDist::LogUniform { e_lo, e_hi } => {
                let lb = b.ln();
                if lb <= *e_lo {
                    return 0.0;
                }
                let u = lb.min(*e_hi);
                (b * ((-e_lo).exp() - (-u).exp()) - (u - e_lo)) / (e_hi - e_lo)
            }
            RatioDist::PointMass(v) => b / v - 1.0,
        };
        v.max(0.0)
    }

    /// `E[(1 - b/X)^+]`.
    pub(crate) fn underutil_factor(&self, b: f64) -> f64 {
        if b == 0.0 {
            return 1.0;
        }
        let v = match self {
            RatioDist::Empirical(a) => {
                let i = a.at_or_below(b);
                a.tail_p[i] - b * a.tail_inv[i]
            }
            RatioDist::Uniform { lo, hi } => {
                if b >= *hi {
                    return 0.0;
                }
                let l = b.max(*lo);
                ((hi - l) - b * (hi / l).ln()) / (hi - lo)
            }
            RatioDist::LogUniform { e_lo, e_hi } => {
                let lb = b.ln();
                if lb >= *e_hi {
                    return 0.0;
                }
                let l = lb.max(*e_lo);
                ((e_hi - l) - b * ((-l).exp() - (-e_hi).exp())) / (e_hi - e_lo)
            }
            RatioDist::PointMass(v) => 1.0 - b / v,
        };
        v.clamp(0.0, 1.0)
    }

    /// `E[(X - b)^+]`.
    pub(crate) fn lost_factor(&self, b: f64) -> f64 {
        let v = match self {
            RatioDist::Empirical(a) => {
                let i = a.at_or_below(b);
                a.tail_mean[i] - b * a.tail_p[i]
            }
            RatioDist::Uniform { lo, hi } => {
                if b >= *hi {
                    return 0.0;
                }
                let l = b.max(*lo);
                ((hi - b).powi(2) - (l - b).powi(2)) / (2.0 * (hi - lo))
            }
            RatioDist::LogUniform { e_lo, e_hi } => {
                let lb = if b > 0.0 { b.ln() } else { f64::NEG_INFINITY };
                if lb >= *e_hi {
                    return 0.0;
                }
                let l = lb.max(*e_lo);
                (e_hi.exp() - l.exp() - b * (e_hi - l)) / (e_hi - e_lo)
            }
            RatioDist::PointMass(v) => v - b,
        };
        v.max(0.0)
    }

    /// `E[1/X ; X < b]`.
    pub(crate) fn inv_mass_below(&self, b: f64) -> f64 {
        match self {
            RatioDist::Empirical(a) => a.cum_inv[a.below(b)],
            RatioDist::Uniform { lo, hi } => {
                if b <= *lo {
                    0.0
                } else {
                    (b.min(*hi) / lo).ln() / (hi - lo)
                }
            }
            RatioDist::LogUniform { e_lo, e_hi } => {
                let lb = b.ln();
                if lb <= *e_lo {
                    0.0
                } else {
                    ((-e_lo).exp() - (-lb.min(*e_hi)).exp()) / (e_hi - e_lo)
                }
            }
            RatioDist::PointMass(v) => {
                if b > *v {
                    1.0 / v
                } else {
                    0.0
                }
            }
        }
    }

    /// `E[1/X ; X >= b]`.
    pub(crate) fn inv_mass_at_or_above(&self, b: f64) -> f64 {
        match self {
            RatioDist::Empirical(a) => a.tail_inv[a.below(b)],
            _ => self.mean_inv() - self.inv_mass_below(b),
        }
    }

    /// `P(X >= b)`.
    pub(crate) fn tail_prob(&self, b: f64) -> f64 {
        match self {
            RatioDist::Empirical(a) => a.tail_p[a.below(b)],
            RatioDist::Uniform { lo, hi } => ((hi - b.max(*lo)) / (hi - lo)).clamp(0.0, 1.0),
            RatioDist::LogUniform { e_lo, e_hi } => {
                let lb = if b > 0.0 { b.ln() } else { f64::NEG_INFINITY };
                ((e_hi - lb.max(*e_lo)) / (e_hi - e_lo)).clamp(0.0, 1.0)
            }
            RatioDist::PointMass(v) => {
                if b <= *v {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    // ---- checked public functionals ----

    /// Expected queuing delay given load `b`: `T * E[(b/X - 1)^+]`.
    pub fn e_queue_given_load(&self, b: f64, round_duration: f64) -> Result<f64> {
        check_load(b)?;
        check_round(round_duration)?;
        Ok(round_duration * self.queue_factor(b))
    }

    /// Expected underutilization given load `b`: `E[(1 - b/X)^+]`.
    pub fn e_underutil_given_load(&self, b: f64) -> Result<f64> {
        check_load(b)?;
        Ok(self.underutil_factor(b))
    }

    /// The capacity-independent factor of expected unused capacity,
    /// `E[(X - b)^+]`.
    pub fn e_lost_given_load(&self, b: f64) -> Result<f64> {
        check_load(b)?;
        Ok(self.lost_factor(b))
    }

    /// Slope `d eu / d eq` of the frontier at load `b` (left derivative).
    ///
    /// Returns `-inf` when `b <= x_min` (the slope is undefined at the left
    /// edge) and `0` when `b >= x_max`.
    pub fn frontier_slope(&self, b: f64, round_duration: f64) -> f64 {
        if b <= self.x_min() {
            return f64::NEG_INFINITY;
        }
        if b >= self.x_max() {
            return 0.0;
        }
        let den = round_duration * self.inv_mass_below(b);
        if den <= 0.0 {
            return f64::NEG_INFINITY;
        }
        -self.inv_mass_at_or_above(b) / den
    }
}

fn check_load(b: f64) -> Result<()> {
    if b >= 0.0 && b.is_finite() {
        Ok(())
    } else {
        Err(param(format!("load b must be non-negative, got {b}")))
    }
}

fn check_round(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(param(format!("round duration must be positive, got {t}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_atom() -> RatioDist {
        RatioDist::empirical(vec![(0.5, 0.5), (2.0, 0.5)]).unwrap()
    }

    #[test]
    fn fit_counts_multiplicity() {
        let d = RatioDist::fit_from_samples(&[2.0, 0.5, 2.0]).unwrap();
        let a = d.atoms().unwrap();
        assert_eq!(a.values(), &[0.5, 2.0]);
        assert!((a.weights()[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((a.weights()[1] - 2.0 / 3.0).abs() < 1e-15);

        let d = RatioDist::fit_from_samples(&[1.0]).unwrap();
        assert_eq!(d.atoms().unwrap().iter().collect::<Vec<_>>(), vec![(1.0, 1.0)]);
    }

    #[test]
    fn fit_rejects_bad_samples() {
        assert!(matches!(RatioDist::fit_from_samples(&[]), Err(Error::Fit(_))));
        assert!(matches!(RatioDist::fit_from_samples(&[0.0, 1.0]), Err(Error::Fit(_))));
        assert!(matches!(RatioDist::fit_from_samples(&[-1.0]), Err(Error::Fit(_))));
    }

    #[test]
    fn atoms_validation() {
        assert!(RatioDist::empirical(vec![(1.0, 0.5), (1.0, 0.5)]).is_err());
        assert!(RatioDist::empirical(vec![(2.0, 0.5), (1.0, 0.5)]).is_err());
        assert!(RatioDist::empirical(vec![(1.0, 0.5), (2.0, 0.4)]).is_err());
        assert!(RatioDist::empirical(vec![(-1.0, 0.5), (2.0, 0.5)]).is_err());
        assert!(RatioDist::uniform(2.0, 1.0).is_err());
        assert!(RatioDist::uniform(0.0, 1.0).is_err());
        assert!(RatioDist::point_mass(0.0).is_err());
    }

    #[test]
    fn queue_examples() {
        let pm = RatioDist::point_mass(1.0).unwrap();
        assert_eq!(pm.e_queue_given_load(1.0, 0.1).unwrap(), 0.0);
        assert_eq!(two_atom().e_queue_given_load(1.0, 1.0).unwrap(), 0.5);
        assert!(two_atom().e_queue_given_load(-0.1, 1.0).is_err());
        // zero at or below x_min
        let u = RatioDist::uniform(0.27, 2.0).unwrap();
        assert_eq!(u.e_queue_given_load(0.27, 0.1).unwrap(), 0.0);
        assert_eq!(u.e_queue_given_load(0.1, 0.1).unwrap(), 0.0);
    }

    #[test]
    fn underutil_examples() {
        for d in [two_atom(), RatioDist::uniform(0.27, 2.0).unwrap(), RatioDist::log_uniform(-1.0, 1.0).unwrap()] {
            assert_eq!(d.e_underutil_given_load(0.0).unwrap(), 1.0);
            assert_eq!(d.e_underutil_given_load(d.x_max()).unwrap(), 0.0);
        }
        let pm = RatioDist::point_mass(1.0).unwrap();
        assert_eq!(pm.e_underutil_given_load(1.0).unwrap(), 0.0);
        assert!(pm.e_underutil_given_load(-1.0).is_err());
        assert_eq!(two_atom().e_underutil_given_load(1.0).unwrap(), 0.25);
    }

    #[test]
    fn lost_examples() {
        assert_eq!(two_atom().e_lost_given_load(1.0).unwrap(), 0.5);
        let pm = RatioDist::point_mass(1.0).unwrap();
        assert_eq!(pm.e_lost_given_load(2.0).unwrap(), 0.0);
        let u = RatioDist::uniform(0.27, 2.0).unwrap();
        assert!((u.e_lost_given_load(0.0).unwrap() - 1.135).abs() < 1e-15);
        // mean minus b below the support
        assert!((u.e_lost_given_load(0.2).unwrap() - (1.135 - 0.2)).abs() < 1e-14);
        assert!(u.e_lost_given_load(-1.0).is_err());
    }

    #[test]
    fn slope_examples() {
        assert_eq!(two_atom().frontier_slope(1.0, 1.0), -0.25);
        let u = RatioDist::uniform(0.27, 2.0).unwrap();
        assert_eq!(u.frontier_slope(0.27, 0.1), f64::NEG_INFINITY);
        assert_eq!(u.frontier_slope(2.0, 0.1), 0.0);
        let mut prev = f64::NEG_INFINITY;
        for i in 1..100 {
            let b = 0.27 + 1.73 * i as f64 / 100.0;
            let s = u.frontier_slope(b, 0.1);
            assert!(s < 0.0 && s > prev, "slope must increase toward 0");
            prev = s;
        }
    }

    #[test]
    fn sample_degenerate() {
        let mut g = SplitMix64::new(3);
        let pm = RatioDist::point_mass(1.0).unwrap();
        let one = RatioDist::empirical(vec![(0.5, 1.0)]).unwrap();
        for _ in 0..100 {
            assert_eq!(pm.sample(&mut g), 1.0);
            assert_eq!(one.sample(&mut g), 0.5);
        }
    }

    #[test]
    fn sample_uniform_mean() {
        let u = RatioDist::uniform(0.27, 2.0).unwrap();
        let mut g = SplitMix64::new(2024);
        let n = 1_000_000;
        let mean: f64 = (0..n).map(|_| u.sample(&mut g)).sum::<f64>() / n as f64;
        let sigma = 1.73 / (12.0 * n as f64).sqrt();
        assert!((mean - 1.135).abs() < 4.0 * sigma, "mean {mean}");
    }

    #[test]
    fn empirical_sampling_frequencies() {
        let d = RatioDist::empirical(vec![(0.5, 0.2), (1.0, 0.3), (3.0, 0.5)]).unwrap();
        let mut g = SplitMix64::new(11);
        let n = 100_000;
        let mut counts = [0usize; 3];
        for _ in 0..n {
            let x = d.sample(&mut g);
            let k = [0.5, 1.0, 3.0].iter().position(|&v| v == x).unwrap();
            counts[k] += 1;
        }
        for (c, p) in counts.iter().zip([0.2, 0.3, 0.5]) {
            let sd = (n as f64 * p * (1.0 - p)).sqrt();
            assert!((*c as f64 - n as f64 * p).abs() < 4.0 * sd);
        }
    }

    #[test]
    fn summaries() {
        let u = RatioDist::uniform(0.27, 2.0).unwrap().summary();
        assert_eq!((u.x_min, u.x_max), (0.27, 2.0));
        let l = RatioDist::log_uniform(-1.0, 1.0).unwrap().summary();
        assert_eq!(l.x_min, (-1.0f64).exp());
        assert_eq!(l.x_max, 1.0f64.exp());
        assert_eq!(l.mean_log, 0.0);
        assert_eq!(two_atom().summary().mean_log, 0.0);
    }

    #[test]
    fn json_round_trip_and_tolerance() {
        let d = RatioDist::from_json(r#"{"atoms": [[0.5, 0.5], [2, 0.5]]}"#).unwrap();
        assert_eq!(d, two_atom());
        assert_eq!(RatioDist::from_json(&d.to_json()).unwrap(), d);
        assert!(RatioDist::from_json(r#"{"atoms": [[0.5, 0.5], [2, 0.49]]}"#).is_err());
        assert!(RatioDist::from_json(r#"{"atoms": [[2, 0.5], [0.5, 0.5]]}"#).is_err());
        // within 1e-9 is accepted and renormalized
        let d = RatioDist::from_json(r#"{"atoms": [[0.5, 0.5], [2, 0.5000000001]]}"#).unwrap();
        let s: f64 = d.atoms().unwrap().weights().iter().sum();
        assert!((s - 1.0).abs() < 1e-15);
    }

    #[test]
    fn discretize_preserves_mass() {
        let u = RatioDist::uniform(0.27, 2.0).unwrap();
        let a = u.discretize(512);
        assert_eq!(a.len(), 512);
        assert!((a.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let fitted = RatioDist::fit_from_samples(
            &u.stratified_samples(10_000, &mut SplitMix64::new(1)),
        )
        .unwrap();
        let c = fitted.discretize(100);
        assert_eq!(c.len(), 100);
        let mean: f64 = c.iter().map(|(v, p)| v * p).sum();
        assert!((mean - fitted.mean()).abs() < 1e-12);
    }
}
