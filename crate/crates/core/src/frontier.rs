//! Performance-bound curves in the (expected queuing delay, expected
//! underutilization) plane.
//!
//! * MIF / PMIF: the curve is traced by the load `b` over a log-spaced grid
//!   on `[x_min, x_max]`.
//! * SMF: every point is a `lambda`-weighted average of per-state points
//!   that share one tangent slope `m`. The slopes used are those of every
//!   state at its own load grid. The per-state tangent point is found
//!   by bisection on the (monotone) slope; for atom distributions the slope
//!   is a step function and the tangent point is the vertex whose adjacent
//!   segment slopes bracket `m`. When `m` lies outside a state's attainable
//!   finite slopes the state sits at its edge vertex and the point records
//!   the clamp.
//! * Lost throughput: same construction with the y-functional replaced by
//!   `mean_mu(k) * E[(X - b)^+]`. Its slope in `b` is
//!   `d/db E[(X-b)^+] = -P(X >= b)` over `dx/db = T * E[1/X ; X < b]`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::distributions::RatioDist;
use crate::error::{param, Error, Result};
use crate::link_models::SmfModel;

pub const DEFAULT_FRONTIER_POINTS: usize = 512;

const CONVEXITY_TOL: f64 = 1e-9;
const MONOTONE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CurveKind {
    Mif,
    Pmif,
    Smf,
    LostThroughput,
}

/// One curve point. `param` is the load `b` for b-parametrized curves and
/// the common slope for equal-slope curves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint {
    pub param: f64,
    pub eq: f64,
    pub eu: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeClamp {
    None,
    /// Requested slope steeper than any attainable one: state sits at `x_min`.
    Left,
    /// Requested slope shallower than any attainable one: state sits at `x_max`.
    Right,
}

/// Per-state contribution to an equal-slope point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateDetail {
    pub b: f64,
    pub x: f64,
    pub y: f64,
    pub clamp: EdgeClamp,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrontierCurve {
    kind: CurveKind,
    points: Vec<FrontierPoint>,
    /// Empty for MIF/PMIF curves, otherwise one entry per point.
    detail: Vec<Vec<StateDetail>>,
}

impl FrontierCurve {
    /// Sort by `eq`, drop repeated `eq` values (keeping the lower `eu`) and
    /// validate monotonicity and discrete convexity.
    pub fn from_points(
        kind: CurveKind,
        points: Vec<FrontierPoint>,
        detail: Vec<Vec<StateDetail>>,
    ) -> Result<Self> {
        if !detail.is_empty() && detail.len() != points.len() {
            return Err(param("per-state detail must align with points"));
        }
        let has_detail = !detail.is_empty();
        let mut rows: Vec<(FrontierPoint, Vec<StateDetail>)> = if has_detail {
            points.into_iter().zip(detail).collect()
        } else {
            points.into_iter().map(|p| (p, Vec::new())).collect()
        };
        if rows.is_empty() {
            return Err(param("a frontier needs at least one point"));
        }
        rows.sort_by(|a, b| a.0.eq.total_cmp(&b.0.eq).then(a.0.eu.total_cmp(&b.0.eu)));
        rows.dedup_by(|later, kept| later.0.eq == kept.0.eq);
        let (points, detail): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
        let curve = Self {
            kind,
            points,
            detail: if has_detail { detail } else { Vec::new() },
        };
        curve.validate()?;
        Ok(curve)
    }

    pub fn kind(&self) -> CurveKind {
        self.kind
    }

    pub fn points(&self) -> &[FrontierPoint] {
        &self.points
    }

    pub fn detail(&self) -> &[Vec<StateDetail>] {
        &self.detail
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn validate(&self) -> Result<()> {
        let bounded = self.kind != CurveKind::LostThroughput;
        for (i, p) in self.points.iter().enumerate() {
            if !(p.eq >= 0.0 && p.eq.is_finite() && p.eu >= 0.0 && p.eu.is_finite()) {
                return Err(Error::Numerical(format!("point {i} out of range: {p:?}")));
            }
            if bounded && p.eu > 1.0 {
                return Err(Error::Numerical(format!("point {i}: eu > 1 ({})", p.eu)));
            }
        }
        let scale = self.points.iter().map(|p| p.eu).fold(1.0, f64::max);
        for (i, w) in self.points.windows(2).enumerate() {
            if w[1].eu > w[0].eu + MONOTONE_TOL * scale {
                return Err(Error::Numerical(format!(
                    "eu increases between points {i} and {}",
                    i + 1
                )));
            }
        }
        if let Some(i) = convexity_violation(&self.points) {
            return Err(Error::Numerical(format!("curve is not convex at point {i}")));
        }
        Ok(())
    }

    /// Piecewise-linear lower bound on `eu` at queuing delay `eq`.
    ///
    /// Left of the first point the first segment is extended; right of the
    /// last point the bound is 0.
    pub fn bound_at(&self, eq: f64) -> f64 {
        let p = &self.points;
        let first = p[0];
        if eq < first.eq {
            if p.len() == 1 {
                return first.eu;
            }
            let s = (p[1].eu - first.eu) / (p[1].eq - first.eq);
            return first.eu + s * (eq - first.eq);
        }
        if eq > p[p.len() - 1].eq {
            return 0.0;
        }
        let i = p.partition_point(|q| q.eq <= eq);
        if i == 0 || i == p.len() {
            return p[i.saturating_sub(1)].eu;
        }
        let (a, b) = (p[i - 1], p[i]);
        a.eu + (b.eu - a.eu) * (eq - a.eq) / (b.eq - a.eq)
    }

    /// `param,eq_seconds,eu`, plus `b_k<i>,x_k<i>,y_k<i>` per state when the
    /// curve carries per-state detail.
    pub fn to_csv(&self) -> String {
        let k = self.detail.first().map_or(0, Vec::len);
        let mut s = String::from("param,eq_seconds,eu");
        for i in 0..k {
            let _ = write!(s, ",b_k{i},x_k{i},y_k{i}");
        }
        s.push('\n');
        for (idx, p) in self.points.iter().enumerate() {
            let _ = write!(s, "{},{},{}", p.param, p.eq, p.eu);
            if let Some(row) = self.detail.get(idx) {
                for d in row {
                    let _ = write!(s, ",{},{},{}", d.b, d.x, d.y);
                }
            }
            s.push('\n');
        }
        s
    }

    /// Number of points where at least one state was clamped to an edge.
    pub fn clamped_points(&self) -> usize {
        self.detail
            .iter()
            .filter(|row| row.iter().any(|d| d.clamp != EdgeClamp::None))
            .count()
    }
}

/// Index of the middle point of the first non-convex triple, if any.
///
/// Consecutive segment slopes must not decrease by more than
/// `1e-9 * max(1, |slope|)`.
pub fn convexity_violation(points: &[FrontierPoint]) -> Option<usize> {
    let slope = |a: &FrontierPoint, b: &FrontierPoint| (b.eu - a.eu) / (b.eq - a.eq);
    points.windows(3).position(|w| {
        let s1 = slope(&w[0], &w[1]);
        let s2 = slope(&w[1], &w[2]);
        s2 - s1 < -CONVEXITY_TOL * s1.abs().max(s2.abs()).max(1.0)
    }).map(|i| i + 1)
}

/// `(E[q | rho = b], E[U | rho = b])`.
pub fn mif_point(d: &RatioDist, b: f64, round_duration: f64) -> Result<FrontierPoint> {
    Ok(FrontierPoint {
        param: b,
        eq: d.e_queue_given_load(b, round_duration)?,
        eu: d.e_underutil_given_load(b)?,
    })
}

/// `n` load values log-spaced on `[x_min, x_max]` with exact endpoints.
pub fn load_grid(x_min: f64, x_max: f64, n: usize) -> Vec<f64> {
    if n <= 1 || x_min == x_max {
        return vec![x_min];
    }
    let ratio = (x_max / x_min).ln();
    let mut g: Vec<f64> = (0..n)
        .map(|i| x_min * (ratio * i as f64 / (n - 1) as f64).exp())
        .collect();
    g[0] = x_min;
    g[n - 1] = x_max;
    g
}

/// Loads at which a b-parametrized curve is evaluated: the log grid, plus
/// every atom when the law has at most `n` atoms (the curve is linear
/// between atoms, so this makes the polyline exact).
pub fn curve_loads(d: &RatioDist, n: usize) -> Vec<f64> {
    let mut g = load_grid(d.x_min(), d.x_max(), n);
    if let Some(a) = d.atoms() {
        if a.len() <= n {
            g.extend_from_slice(a.values());
            g.sort_by(f64::total_cmp);
            g.dedup();
        }
    }
    g
}

pub fn mif_frontier(d: &RatioDist, round_duration: f64, num_points: usize) -> Result<FrontierCurve> {
    b_grid_curve(CurveKind::Mif, d, Penalty::Underutil, round_duration, num_points, false)
}

/// PMIF bound: the MIF construction applied to the prediction-error law.
pub fn pmif_frontier(
    pred_error: &RatioDist,
    round_duration: f64,
    num_points: usize,
) -> Result<FrontierCurve> {
    b_grid_curve(
        CurveKind::Pmif,
        pred_error,
        Penalty::Underutil,
        round_duration,
        num_points,
        false,
    )
}

fn b_grid_curve(
    kind: CurveKind,
    d: &RatioDist,
    penalty: Penalty,
    round_duration: f64,
    num_points: usize,
    with_detail: bool,
) -> Result<FrontierCurve> {
    if num_points < 2 {
        return Err(param("num_points must be at least 2"));
    }
    check_round(round_duration)?;
    let sc = StateCurve::new(d, penalty, round_duration);
    let grid = curve_loads(d, num_points);
    let mut points = Vec::with_capacity(grid.len());
    let mut detail = Vec::new();
    for b in grid {
        let (x, y) = (sc.x(b), sc.y(b));
        points.push(FrontierPoint { param: b, eq: x, eu: y });
        if with_detail {
            detail.push(vec![StateDetail { b, x, y, clamp: EdgeClamp::None }]);
        }
    }
    FrontierCurve::from_points(kind, points, detail)
}

/// Largest constant `C` for which the constant-load law never needs a
/// negative rate: `X_min / (1 - X_min)`; `None` (unbounded) when
/// `X_min >= 1`.
pub fn feasibility_max_c(d: &RatioDist) -> Option<f64> {
    let x = d.x_min();
    (x < 1.0).then(|| x / (1.0 - x))
}

pub fn smf_frontier(m: &SmfModel, round_duration: f64, num_points: usize) -> Result<FrontierCurve> {
    let penalties = vec![Penalty::Underutil; m.num_states()];
    equal_slope_curve(CurveKind::Smf, m, &penalties, round_duration, num_points)
}

/// Queuing delay vs. expected unused capacity (bits/s).
pub fn lost_throughput_frontier(
    m: &SmfModel,
    round_duration: f64,
    num_points: usize,
) -> Result<FrontierCurve> {
    let means = m.mean_mu().ok_or_else(|| {
        param("lost-throughput bound requires bin mean capacities")
    })?;
    let penalties: Vec<Penalty> = means.into_iter().map(|scale| Penalty::Lost { scale }).collect();
    equal_slope_curve(CurveKind::LostThroughput, m, &penalties, round_duration, num_points)
}

/// Point on the single-state lost-throughput curve at load `b`.
pub fn lost_point(d: &RatioDist, mean_mu: f64, b: f64, round_duration: f64) -> Result<FrontierPoint> {
    Ok(FrontierPoint {
        param: b,
        eq: d.e_queue_given_load(b, round_duration)?,
        eu: mean_mu * d.e_lost_given_load(b)?,
    })
}

fn equal_slope_curve(
    kind: CurveKind,
    m: &SmfModel,
    penalties: &[Penalty],
    round_duration: f64,
    num_points: usize,
) -> Result<FrontierCurve> {
    if num_points < 2 {
        return Err(param("num_points must be at least 2"));
    }
    check_round(round_duration)?;
    let states = m.states();
    if states.len() == 1 {
        return b_grid_curve(kind, &states[0].ratio, penalties[0], round_duration, num_points, true);
    }
    let curves: Vec<StateCurve> = states
        .iter()
        .zip(penalties)
        .map(|(s, p)| StateCurve::new(&s.ratio, *p, round_duration))
        .collect();

    // every state's slopes at its own curve loads, so each state's vertices
    // appear on the combined curve
    let mut slopes = vec![f64::NEG_INFINITY];
    for c in &curves {
        slopes.extend(
            curve_loads(c.dist, num_points)
                .into_iter()
                .map(|b| c.slope(b))
                .filter(|m| m.is_finite() && *m < 0.0),
        );
    }
    slopes.push(0.0);
    slopes.sort_by(f64::total_cmp);
    slopes.dedup();

    let mut points = Vec::with_capacity(slopes.len());
    let mut detail = Vec::with_capacity(slopes.len());
    for &slope in &slopes {
        let row: Vec<StateDetail> = curves
            .iter()
            .map(|c| {
                let (b, clamp) = if slope == f64::NEG_INFINITY {
                    (c.dist.x_min(), EdgeClamp::Left)
                } else if slope == 0.0 {
                    (c.dist.x_max(), EdgeClamp::Right)
                } else {
                    c.solve(slope)
                };
                StateDetail { b, x: c.x(b), y: c.y(b), clamp }
            })
            .collect();
        let (x, y) = row
            .iter()
            .zip(states)
            .fold((0.0, 0.0), |(x, y), (d, s)| (x + s.lambda * d.x, y + s.lambda * d.y));
        points.push(FrontierPoint { param: slope, eq: x, eu: y });
        detail.push(row);
    }
    FrontierCurve::from_points(kind, points, detail)
}

/// True when `(eq, eu)` is on or above the curve, allowing `margin`.
pub fn point_dominated(curve: &FrontierCurve, eq: f64, eu: f64, margin: f64) -> Result<bool> {
    if !(eq >= 0.0) {
        return Err(param(format!("queuing delay must be non-negative, got {eq}")));
    }
    Ok(eu >= curve.bound_at(eq) - margin)
}

fn check_round(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(param(format!("round duration must be positive, got {t}")))
    }
}

/// Which per-round penalty forms the y-axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Penalty {
    Underutil,
    /// Unused capacity scaled by the state's representative capacity.
    Lost { scale: f64 },
}

/// One state's trade-off curve `b -> (x(b), y(b))`.
#[derive(Debug, Clone, Copy)]
pub struct StateCurve<'a> {
    pub dist: &'a RatioDist,
    pub penalty: Penalty,
    pub round_duration: f64,
}

impl<'a> StateCurve<'a> {
    pub fn new(dist: &'a RatioDist, penalty: Penalty, round_duration: f64) -> Self {
        Self { dist, penalty, round_duration }
    }

    pub fn x(&self, b: f64) -> f64 {
        self.round_duration * self.dist.queue_factor(b)
    }

    pub fn y(&self, b: f64) -> f64 {
        match self.penalty {
            Penalty::Underutil => self.dist.underutil_factor(b),
            Penalty::Lost { scale } => scale * self.dist.lost_factor(b),
        }
    }

    /// Left derivative `dy/dx` at `b`; `-inf` at or below `x_min`, `0` at or
    /// above `x_max`.
    pub fn slope(&self, b: f64) -> f64 {
        match self.penalty {
            Penalty::Underutil => self.dist.frontier_slope(b, self.round_duration),
            Penalty::Lost { scale } => {
                if b <= self.dist.x_min() {
                    return f64::NEG_INFINITY;
                }
                if b >= self.dist.x_max() {
                    return 0.0;
                }
                let den = self.round_duration * self.dist.inv_mass_below(b);
                if den <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                -scale * self.dist.tail_prob(b) / den
            }
        }
    }

    /// Slopes of the segments between consecutive atoms (atom laws only).
    fn segment_slopes(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        let values: Vec<f64> = match self.dist {
            RatioDist::Empirical(a) => a.values().to_vec(),
            RatioDist::PointMass(v) => vec![*v],
            _ => return None,
        };
        let slopes = values
            .windows(2)
            .map(|w| self.slope(0.5 * (w[0] + w[1])))
            .collect();
        Some((values, slopes))
    }

    /// Tangent point for slope `m < 0`: the largest `b` whose left slope is
    /// at most `m`.
    pub fn solve(&self, m: f64) -> (f64, EdgeClamp) {
        if let Some((values, slopes)) = self.segment_slopes() {
            let j = slopes.partition_point(|&s| s <= m);
            let clamp = if slopes.is_empty() || j == 0 {
                EdgeClamp::Left
            } else if j == slopes.len() && m > slopes[j - 1] {
                EdgeClamp::Right
            } else {
                EdgeClamp::None
            };
            return (values[j], clamp);
        }
        let (mut lo, mut hi) = (self.dist.x_min(), self.dist.x_max());
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.slope(mid) <= m {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (lo, EdgeClamp::None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::link_models::SmfState;

    fn two_atom() -> RatioDist {
        RatioDist::empirical(vec![(0.5, 0.5), (2.0, 0.5)]).unwrap()
    }

    #[test]
    fn point_mass_collapses_to_origin() {
        let c = mif_frontier(&RatioDist::point_mass(1.0).unwrap(), 0.1, 512).unwrap();
        assert_eq!(c.points(), &[FrontierPoint { param: 1.0, eq: 0.0, eu: 0.0 }]);
    }

    #[test]
    fn two_atom_point() {
        let p = mif_point(&two_atom(), 1.0, 1.0).unwrap();
        assert_eq!((p.eq, p.eu), (0.5, 0.25));
    }

    #[test]
    fn endpoints_are_exact() {
        for d in [
            two_atom(),
            RatioDist::uniform(0.27, 2.0).unwrap(),
            RatioDist::log_uniform(-1.0, 1.0).unwrap(),
        ] {
            let c = mif_frontier(&d, 0.1, 64).unwrap();
            let p = c.points();
            assert_eq!(p[0].eq, 0.0);
            assert_eq!(p[p.len() - 1].eu, 0.0);
        }
    }

    #[test]
    fn feasibility_bound() {
        let half = RatioDist::empirical(vec![(0.5, 0.5), (2.0, 0.5)]).unwrap();
        assert_eq!(feasibility_max_c(&half), Some(1.0));
        let u = RatioDist::uniform(0.27, 2.0).unwrap();
        assert!((feasibility_max_c(&u).unwrap() - 0.27 / 0.73).abs() < 1e-15);
        assert_eq!(feasibility_max_c(&RatioDist::point_mass(1.0).unwrap()), None);
    }

    #[test]
    fn dominance_queries() {
        let c = mif_frontier(&RatioDist::uniform(0.27, 2.0).unwrap(), 0.1, 128).unwrap();
        let v = c.points()[40];
        assert!(point_dominated(&c, v.eq, v.eu, 0.0).unwrap());
        assert!(!point_dominated(&c, v.eq, v.eu - 0.01, 0.0).unwrap());
        assert!(point_dominated(&c, v.eq, v.eu - 0.01, 0.02).unwrap());
        assert!(point_dominated(&c, 1e9, 0.0, 0.0).unwrap());
        assert!(point_dominated(&c, -1.0, 0.5, 0.0).is_err());
    }

    #[test]
    fn solve_two_atom_slopes() {
        let d = two_atom();
        let c = StateCurve::new(&d, Penalty::Underutil, 1.0);
        assert_eq!(c.solve(-0.25), (2.0, EdgeClamp::None));
        assert_eq!(c.solve(-10.0), (0.5, EdgeClamp::Left));
        assert_eq!(c.solve(-0.1), (2.0, EdgeClamp::Right));
    }

    #[test]
    fn lost_single_state_points() {
        let p = lost_point(&RatioDist::point_mass(1.0).unwrap(), 100.0, 1.0, 1.0).unwrap();
        assert_eq!((p.eq, p.eu), (0.0, 0.0));
        let p = lost_point(&two_atom(), 100.0, 1.0, 1.0).unwrap();
        assert_eq!((p.eq, p.eu), (0.5, 50.0));
    }

    #[test]
    fn lost_requires_bin_means() {
        let m = SmfModel::single(two_atom());
        let e = lost_throughput_frontier(&m, 0.1, 32).unwrap_err();
        assert!(e.to_string().contains("lost-throughput bound requires bin mean capacities"));
    }

    #[test]
    fn lost_two_identical_states_match_single() {
        let d = RatioDist::empirical(vec![(0.4, 0.2), (0.9, 0.3), (1.3, 0.3), (2.2, 0.2)]).unwrap();
        let st = |lambda| SmfState { lambda, ratio: d.clone(), mean_mu: Some(100.0) };
        let two = SmfModel::new(vec![0.0, 1.0, 2.0], vec![st(0.5), st(0.5)]).unwrap();
        let one = SmfModel::new(vec![0.0, 2.0], vec![st(1.0)]).unwrap();
        let c2 = lost_throughput_frontier(&two, 0.1, 64).unwrap();
        let c1 = lost_throughput_frontier(&one, 0.1, 64).unwrap();
        for p in c2.points() {
            assert!((c1.bound_at(p.eq) - p.eu).abs() < 1e-6 * 100.0);
        }
    }

    #[test]
    fn rejects_non_convex_input() {
        let pts = vec![
            FrontierPoint { param: 0.0, eq: 0.0, eu: 1.0 },
            FrontierPoint { param: 0.0, eq: 1.0, eu: 0.9 },
            FrontierPoint { param: 0.0, eq: 2.0, eu: 0.0 },
        ];
        assert!(matches!(
            FrontierCurve::from_points(CurveKind::Mif, pts, vec![]),
            Err(Error::Numerical(_))
        ));
    }
}
