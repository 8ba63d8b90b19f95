//! Value iteration for the optimal constant-load controllers.
//!
//! The state is the normalized backlog `q` (seconds) on a uniform grid
//! `[0, q_max]`; the action is the load `rho`, restricted to `rho >= q/T`.
//! Transitions are fixed, so every load's expected next value is a fixed
//! linear functional of the grid values `V`. Those functionals are built
//! once as a dense `n_rho x n_q` matrix and each iteration is a
//! matrix-vector product followed by a suffix minimum over loads.
//!
//! Candidate loads for a state `q` are every grid load and every state's
//! own load `q_k/T` that is `>= q/T`, so admissible sets are nested in `q`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::distributions::{Atoms, RatioDist};
use crate::error::{param, Error, Result};
use crate::frontier::{load_grid, EdgeClamp, Penalty, StateCurve};
use crate::link_models::SmfModel;

pub const DEFAULT_N_Q: usize = 400;
pub const DEFAULT_N_RHO: usize = 800;
pub const DEFAULT_RHO_MIN: f64 = 0.01;
pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITERS: usize = 20_000;
/// Atom budget for the MIF expectation; analytic laws are discretized to it.
pub const MAX_ATOMS: usize = 512;
/// Per-factor atom budget for the PMIF double sum.
pub const MAX_PMIF_ATOMS: usize = 64;
pub const UNRELIABLE_CLAMP_MASS: f64 = 0.05;
const DIVERGENCE_RUN: usize = 50;

/// Value assigned to a next state beyond `q_max`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailRule {
    /// `V(q_max)`.
    #[default]
    Clamp,
    /// Linear extrapolation through the last two nodes. Keeps `V`
    /// convex, and the iteration diverges when the untruncated value
    /// function is infinite.
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MdpConfig {
    pub w: f64,
    pub gamma: f64,
    pub round_duration: f64,
    /// Seconds; `None` means `20 * T`.
    pub q_max: Option<f64>,
    pub n_q: usize,
    pub rho_min: f64,
    /// `None` means `min(10, 2 * x_max)`.
    pub rho_max: Option<f64>,
    pub n_rho: usize,
    pub tol: f64,
    pub max_iters: usize,
    pub tail: TailRule,
}

impl MdpConfig {
    pub fn new(w: f64, gamma: f64, round_duration: f64) -> Self {
        Self {
            w,
            gamma,
            round_duration,
            q_max: None,
            n_q: DEFAULT_N_Q,
            rho_min: DEFAULT_RHO_MIN,
            rho_max: None,
            n_rho: DEFAULT_N_RHO,
            tol: DEFAULT_TOL,
            max_iters: DEFAULT_MAX_ITERS,
            tail: TailRule::Clamp,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.w > 0.0 && self.w.is_finite()) {
            return Err(param(format!("w must be > 0, got {}", self.w)));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(param(format!("gamma must be in (0, 1), got {}", self.gamma)));
        }
        if !(self.round_duration > 0.0 && self.round_duration.is_finite()) {
            return Err(param(format!("round duration must be positive, got {}", self.round_duration)));
        }
        if let Some(q) = self.q_max {
            if !(q > 0.0 && q.is_finite()) {
                return Err(param(format!("q_max must be positive, got {q}")));
            }
        }
        if self.n_q < 3 || self.n_rho < 3 {
            return Err(param("grids need at least 3 points"));
        }
        if !(self.rho_min > 0.0 && self.rho_min.is_finite()) {
            return Err(param(format!("rho_min must be positive, got {}", self.rho_min)));
        }
        if let Some(r) = self.rho_max {
            if !(r > self.rho_min && r.is_finite()) {
                return Err(param(format!("rho_max must exceed rho_min, got {r}")));
            }
        }
        if !(self.tol > 0.0) {
            return Err(param(format!("tol must be > 0, got {}", self.tol)));
        }
        if self.max_iters == 0 {
            return Err(param("max_iters must be >= 1"));
        }
        Ok(())
    }

    fn resolve(&self, x_max: f64) -> Result<Grids> {
        self.validate()?;
        let q_max = self.q_max.unwrap_or(20.0 * self.round_duration);
        let rho_max = self.rho_max.unwrap_or_else(|| (2.0 * x_max).min(10.0));
        if rho_max <= self.rho_min {
            return Err(param(format!(
                "rho_max ({rho_max}) must exceed rho_min ({})",
                self.rho_min
            )));
        }
        Ok(Grids {
            tail: self.tail,
            q_max,
            n_q: self.n_q,
            rho_min: self.rho_min,
            rho_max,
            n_rho: self.n_rho,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grids {
    pub tail: TailRule,
    pub q_max: f64,
    pub n_q: usize,
    pub rho_min: f64,
    pub rho_max: f64,
    pub n_rho: usize,
}

impl Grids {
    pub fn q_nodes(&self) -> Vec<f64> {
        let h = self.q_max / (self.n_q - 1) as f64;
        (0..self.n_q).map(|i| i as f64 * h).collect()
    }

    pub fn rho_nodes(&self) -> Vec<f64> {
        load_grid(self.rho_min, self.rho_max, self.n_rho)
    }

    /// Multiplicative spacing of the log-spaced load grid.
    pub fn rho_step_ratio(&self) -> f64 {
        (self.rho_max / self.rho_min).powf(1.0 / (self.n_rho - 1) as f64)
    }

    /// True when `a` and `b` are within `k` load-grid steps of each other.
    pub fn within_steps(&self, a: f64, b: f64, k: f64) -> bool {
        (a / b).ln().abs() <= k * self.rho_step_ratio().ln() * (1.0 + 1e-9)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Diagnostics {
    pub v_monotone: bool,
    /// Second differences `>= -10 * tol` over the whole grid.
    pub v_convex: bool,
    pub w_convex: bool,
    /// Policy equals `max(c_star, q/T)` within one load-grid step everywhere.
    pub policy_shape: bool,
    /// Residuals non-increasing (with 5% slack) after iteration 10.
    pub residuals_contract: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MdpSolution {
    pub c_star: f64,
    pub converged: bool,
    pub iters: usize,
    /// `P(next backlog > q_max)` when playing `c_star` from an empty queue.
    pub clamp_mass: f64,
    pub unreliable: bool,
    pub grids: Grids,
    pub w: f64,
    pub gamma: f64,
    pub round_duration: f64,
    pub diagnostics: Diagnostics,
    #[serde(skip)]
    pub v_on_grid: Vec<f64>,
    #[serde(skip)]
    pub w_on_grid: Vec<f64>,
    #[serde(skip)]
    pub policy_on_grid: Vec<f64>,
    #[serde(skip)]
    pub residuals: Vec<f64>,
}

impl MdpSolution {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("solution serializes")
    }

    /// `q_seconds,v,policy_rho`
    pub fn v_csv(&self) -> String {
        let mut s = String::from("q_seconds,v,policy_rho\n");
        for ((q, v), p) in self.grids.q_nodes().iter().zip(&self.v_on_grid).zip(&self.policy_on_grid) {
            let _ = writeln!(s, "{q},{v},{p}");
        }
        s
    }

    /// `rho,w`
    pub fn w_csv(&self) -> String {
        let mut s = String::from("rho,w\n");
        for (r, w) in self.grids.rho_nodes().iter().zip(&self.w_on_grid) {
            let _ = writeln!(s, "{r},{w}");
        }
        s
    }
}

/// One outcome of a round: probability, realized ratio `a` (cost side) and
/// the divisor `b` that maps `T * (rho - a)^+` to the next state.
#[derive(Debug, Clone, Copy)]
struct Outcome {
    p: f64,
    a: f64,
    b: f64,
}

fn solver_atoms(d: &RatioDist, budget: usize) -> Atoms {
    match d.atoms() {
        Some(a) if a.len() <= budget => a.clone(),
        _ => d.discretize(budget),
    }
}

pub fn solve_mif(d: &RatioDist, cfg: &MdpConfig) -> Result<MdpSolution> {
    let grids = cfg.resolve(d.x_max())?;
    let atoms = solver_atoms(d, MAX_ATOMS);
    let costs: Vec<(f64, f64)> = atoms.iter().collect();
    let outcomes: Vec<Outcome> = atoms.iter().map(|(a, p)| Outcome { p, a, b: a }).collect();
    solve(cfg, grids, &costs, &outcomes)
}

/// `pred_error` is the law of `mu(t) / Pred(t-1)`, `pred_drift` the law of
/// `Pred(t) / Pred(t-1)`; the two are treated as independent.
pub fn solve_pmif(pred_error: &RatioDist, pred_drift: &RatioDist, cfg: &MdpConfig) -> Result<MdpSolution> {
    let grids = cfg.resolve(pred_error.x_max())?;
    let err = solver_atoms(pred_error, MAX_PMIF_ATOMS);
    let drift = solver_atoms(pred_drift, MAX_PMIF_ATOMS);
    let costs: Vec<(f64, f64)> = err.iter().collect();
    let mut outcomes = Vec::with_capacity(err.len() * drift.len());
    for (a, pa) in err.iter() {
        for (b, pb) in drift.iter() {
            outcomes.push(Outcome { p: pa * pb, a, b });
        }
    }
    solve(cfg, grids, &costs, &outcomes)
}

/// Expected one-round cost `w * E[q] + E[U]` at load `rho`.
fn round_cost(costs: &[(f64, f64)], w: f64, t: f64, rho: f64) -> f64 {
    costs
        .iter()
        .map(|&(a, p)| {
            let r = rho / a;
            p * (w * t * (r - 1.0).max(0.0) + (1.0 - r).max(0.0))
        })
        .sum()
}

/// Row of interpolation weights such that `row . V` is `E[V(next)]`.
/// Returns the probability that landed beyond `q_max`.
fn transition_row(
    row: &mut [f64],
    outcomes: &[Outcome],
    grids: &Grids,
    t: f64,
    rho: f64,
) -> f64 {
    let h = grids.q_max / (grids.n_q - 1) as f64;
    let last = grids.n_q - 1;
    let mut clamped = 0.0;
    row.iter_mut().for_each(|x| *x = 0.0);
    for o in outcomes {
        let next = t * (rho - o.a).max(0.0) / o.b;
        if next >= grids.q_max {
            if next > grids.q_max {
                clamped += o.p;
            }
            match grids.tail {
                TailRule::Clamp => row[last] += o.p,
                TailRule::Linear => {
                    let th = (next - grids.q_max) / h;
                    row[last] += o.p * (1.0 + th);
                    row[last - 1] -= o.p * th;
                }
            }
            continue;
        }
        let x = next / h;
        let k = (x.floor() as usize).min(last - 1);
        let theta = (x - k as f64).clamp(0.0, 1.0);
        row[k] += o.p * (1.0 - theta);
        row[k + 1] += o.p * theta;
    }
    clamped
}

fn dot(row: &[f64], v: &[f64]) -> f64 {
    row.iter().zip(v).map(|(a, b)| a * b).sum()
}

fn solve(
    cfg: &MdpConfig,
    grids: Grids,
    costs: &[(f64, f64)],
    outcomes: &[Outcome],
) -> Result<MdpSolution> {
    let t = cfg.round_duration;
    let (n_q, n_rho) = (grids.n_q, grids.n_rho);
    let rho = grids.rho_nodes();
    let q = grids.q_nodes();

    let mut m_rho = vec![0.0; n_rho * n_q];
    let mut c_rho = vec![0.0; n_rho];
    for j in 0..n_rho {
        transition_row(&mut m_rho[j * n_q..(j + 1) * n_q], outcomes, &grids, t, rho[j]);
        c_rho[j] = round_cost(costs, cfg.w, t, rho[j]);
    }
    // the load q/T, always admissible at state q
    let mut m_forced = vec![0.0; n_q * n_q];
    let mut c_forced = vec![0.0; n_q];
    for i in 0..n_q {
        let r = q[i] / t;
        transition_row(&mut m_forced[i * n_q..(i + 1) * n_q], outcomes, &grids, t, r);
        c_forced[i] = round_cost(costs, cfg.w, t, r);
    }
    // all candidate loads, forced and grid, in ascending order (forced first
    // on ties); state i may use any candidate from the position of q_i/T on
    let mut order: Vec<Candidate> = (0..n_q)
        .map(Candidate::Forced)
        .chain((0..n_rho).map(Candidate::Grid))
        .collect();
    let load_of = |c: &Candidate| match *c {
        Candidate::Forced(i) => q[i] / t,
        Candidate::Grid(j) => rho[j],
    };
    order.sort_by(|a, b| load_of(a).total_cmp(&load_of(b)));
    let mut start = vec![0usize; n_q];
    for (pos, c) in order.iter().enumerate() {
        if let Candidate::Forced(i) = *c {
            start[i] = pos;
        }
    }
    let loads: Vec<f64> = order.iter().map(load_of).collect();

    let mut v = vec![0.0; n_q];
    let mut w_vals = vec![0.0; n_rho];
    let mut w_forced = vec![0.0; n_q];
    let mut policy = vec![0.0; n_q];
    let mut suffix = vec![(f64::INFINITY, 0usize); order.len() + 1];
    let mut residuals = Vec::new();
    let mut converged = false;
    let mut growing = 0usize;
    let mut iters = 0;

    let eval_w = |v: &[f64], w_vals: &mut [f64]| {
        for j in 0..n_rho {
            w_vals[j] = c_rho[j] + cfg.gamma * dot(&m_rho[j * n_q..(j + 1) * n_q], v);
        }
    };

    while iters < cfg.max_iters {
        iters += 1;
        eval_w(&v, &mut w_vals);
        for i in 0..n_q {
            w_forced[i] = c_forced[i] + cfg.gamma * dot(&m_forced[i * n_q..(i + 1) * n_q], &v);
        }
        for pos in (0..order.len()).rev() {
            let val = match order[pos] {
                Candidate::Forced(i) => w_forced[i],
                Candidate::Grid(j) => w_vals[j],
            };
            let next = suffix[pos + 1];
            // `<=` keeps the smaller load on ties
            suffix[pos] = if val <= next.0 { (val, pos) } else { next };
        }
        let mut res = 0.0f64;
        for i in 0..n_q {
            let (val, pos) = suffix[start[i]];
            policy[i] = loads[pos];
            res = res.max((val - v[i]).abs());
            v[i] = val;
        }
        if let Some(&prev) = residuals.last() {
            growing = if res > prev { growing + 1 } else { 0 };
        }
        residuals.push(res);
        if !res.is_finite() || growing >= DIVERGENCE_RUN {
            return Err(Error::Numerical("value function appears unbounded".into()));
        }
        if res < cfg.tol {
            converged = true;
            break;
        }
    }
    eval_w(&v, &mut w_vals);
    let j_star = argmin(&w_vals);
    let c_star = rho[j_star];

    let mut scratch = vec![0.0; n_q];
    let clamp_mass = transition_row(&mut scratch, outcomes, &grids, t, c_star);

    let diagnostics = Diagnostics {
        v_monotone: v.windows(2).all(|p| p[1] >= p[0] - cfg.tol),
        v_convex: second_differences_ok(&v, 10.0 * cfg.tol),
        w_convex: chord_slopes_ok(&rho, &w_vals, 10.0 * cfg.tol),
        policy_shape: q.iter().zip(&policy).all(|(qi, p)| {
            let target = c_star.max(qi / t);
            grids.within_steps(*p, target, 1.0)
        }),
        residuals_contract: residuals
            .windows(2)
            .skip(10)
            .all(|r| r[1] <= 1.05 * r[0]),
    };

    Ok(MdpSolution {
        c_star,
        converged,
        iters,
        clamp_mass,
        unreliable: clamp_mass > UNRELIABLE_CLAMP_MASS,
        grids,
        w: cfg.w,
        gamma: cfg.gamma,
        round_duration: t,
        diagnostics,
        v_on_grid: v,
        w_on_grid: w_vals,
        policy_on_grid: policy,
        residuals,
    })
}

#[derive(Debug, Clone, Copy)]
enum Candidate {
    /// The load `q_i / T` of state `i`.
    Forced(usize),
    Grid(usize),
}

/// First index of the minimum.
fn argmin(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in xs.iter().enumerate() {
        if *x < xs[best] {
            best = i;
        }
    }
    best
}

/// Second differences on a uniform grid must be `>= -tol`.
fn second_differences_ok(ys: &[f64], tol: f64) -> bool {
    ys.windows(3).all(|w| w[2] - 2.0 * w[1] + w[0] >= -tol)
}

/// Convexity on a non-uniform grid: consecutive chord slopes must not drop
/// by more than `tol` per unit of spacing.
fn chord_slopes_ok(xs: &[f64], ys: &[f64], tol: f64) -> bool {
    let slopes: Vec<f64> = xs
        .windows(2)
        .zip(ys.windows(2))
        .map(|(x, y)| (y[1] - y[0]) / (x[1] - x[0]))
        .collect();
    slopes
        .windows(2)
        .zip(xs.windows(3))
        .all(|(s, x)| (s[1] - s[0]) * (x[2] - x[0]) >= -tol)
}

/// Tangency constant for one SMF state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SmfConstant {
    pub c: f64,
    pub clamp: EdgeClamp,
}

/// Per-state constant where the state's frontier slope equals `-w`.
pub fn approx_c_smf(m: &SmfModel, w: f64, round_duration: f64) -> Result<Vec<SmfConstant>> {
    if !(w > 0.0 && w.is_finite()) {
        return Err(param(format!("w must be > 0, got {w}")));
    }
    if !(round_duration > 0.0 && round_duration.is_finite()) {
        return Err(param(format!("round duration must be positive, got {round_duration}")));
    }
    Ok(m.states()
        .iter()
        .map(|s| {
            let (c, clamp) = StateCurve::new(&s.ratio, Penalty::Underutil, round_duration).solve(-w);
            SmfConstant { c, clamp }
        })
        .collect())
}
