//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use ccfrontier_core::SplitMix64;

/// Adaptive Simpson quadrature of `f` on `[a, b]`.
pub fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// `(E[q | rho = b], E[U | rho = b])` for `X ~ U(lo, hi)` by quadrature of
/// the density, splitting at the kink `x = b`.
pub fn uniform_point_by_quadrature(lo: f64, hi: f64, b: f64, t: f64) -> (f64, f64) {
    let dens = 1.0 / (hi - lo);
    let kink = b.clamp(lo, hi);
    let q = |x: f64| t * (b / x - 1.0).max(0.0) * dens;
    let u = |x: f64| (1.0 - b / x).max(0.0) * dens;
    let eq = simpson(&q, lo, kink, 1e-13) + simpson(&q, kink, hi, 1e-13);
    let eu = simpson(&u, lo, kink, 1e-13) + simpson(&u, kink, hi, 1e-13);
    (eq, eu)
}

/// Finite-horizon backward induction for the normalized-backlog MDP.
///
/// `outcomes` lists `(probability, a, b)`: the round costs
/// `w * T * (rho/a - 1)^+ + (1 - rho/a)^+` and moves to
/// `T * (rho - a)^+ / b`. Loads are restricted to grid points `>= q/T`
/// (falling back to `q/T` when none is). Returns the minimizing load at
/// `q = 0` after `horizon` stages.
pub struct BruteDp {
    pub w: f64,
    pub gamma: f64,
    pub t: f64,
    pub q_max: f64,
    pub n_q: usize,
    pub rho_min: f64,
    pub rho_max: f64,
    pub n_rho: usize,
    pub horizon: usize,
}

impl BruteDp {
    pub fn c_star(&self, outcomes: &[(f64, f64, f64)]) -> f64 {
        let rho: Vec<f64> = (0..self.n_rho)
            .map(|j| self.rho_min * (self.rho_max / self.rho_min).powf(j as f64 / (self.n_rho - 1) as f64))
            .collect();
        let h = self.q_max / (self.n_q - 1) as f64;
        let interp = |v: &[f64], x: f64| -> f64 {
            if x >= self.q_max {
                return v[self.n_q - 1];
            }
            let pos = x / h;
            let k = (pos as usize).min(self.n_q - 2);
            let th = pos - k as f64;
            v[k] * (1.0 - th) + v[k + 1] * th
        };
        let stage = |v: &[f64], r: f64| -> f64 {
            let mut total = 0.0;
            for &(p, a, b) in outcomes {
                let cost = self.w * self.t * (r / a - 1.0).max(0.0) + (1.0 - r / a).max(0.0);
                let next = self.t * (r - a).max(0.0) / b;
                total += p * (cost + self.gamma * interp(v, next));
            }
            total
        };
        let mut v = vec![0.0; self.n_q];
        let mut w_last = vec![0.0; self.n_rho];
        for _ in 0..self.horizon {
            for (j, r) in rho.iter().enumerate() {
                w_last[j] = stage(&v, *r);
            }
            let mut nv = vec![0.0; self.n_q];
            for (i, slot) in nv.iter_mut().enumerate() {
                let floor = i as f64 * h / self.t;
                let mut best = f64::INFINITY;
                for (j, r) in rho.iter().enumerate() {
                    if *r >= floor && w_last[j] < best {
                        best = w_last[j];
                    }
                }
                if !best.is_finite() {
                    best = stage(&v, floor);
                }
                *slot = best;
            }
            v = nv;
        }
        for (j, r) in rho.iter().enumerate() {
            w_last[j] = stage(&v, *r);
        }
        let mut jb = 0;
        for j in 0..self.n_rho {
            if w_last[j] < w_last[jb] {
                jb = j;
            }
        }
        rho[jb]
    }
}

/// Random atom law with 2..=12 atoms on `[0.2, 3]`.
pub fn random_atoms(rng: &mut SplitMix64) -> Vec<(f64, f64)> {
    let n = 2 + (rng.next_u64() % 11) as usize;
    let mut vals: Vec<f64> = (0..n).map(|_| 0.2 + 2.8 * rng.next_f64()).collect();
    vals.sort_by(f64::total_cmp);
    vals.dedup();
    let raw: Vec<f64> = vals.iter().map(|_| 0.05 + rng.next_f64()).collect();
    let total: f64 = raw.iter().sum();
    vals.into_iter().zip(raw.into_iter().map(|p| p / total)).collect()
}

/// Values produced by the oracles above, frozen before the library code
/// they check was run against them.
pub mod frozen {
    /// `U(0.27, 2)`, `T = 0.1`, `b = 1`: adaptive Simpson.
    pub const U027_EQ_AT_1: f64 = 0.033487475143570075;
    pub const U027_EU_AT_1: f64 = 0.17737157193066744;
    /// Two atoms `{(0.5,.5),(2,.5)}`, `w = 5`, `gamma = 0.95`, `T = 0.1`.
    pub const TWO_ATOM_DP_C: f64 = 0.50025136740697;
    /// Error `{(0.9,.5),(1.1,.5)}`, drift `{(0.8,.5),(1.25,.5)}`, `w = 5`,
    /// `gamma = 0.95`, `T = 0.1`.
    pub const PMIF_DP_C: f64 = 1.1002052707810501;
    /// Four equal atoms `{0.5, 0.8, 1.2, 1.6}`, `gamma = 0.9`, `T = 0.1`.
    pub const FOUR_ATOM_DP_C_W5: f64 = 0.8011725086506383;
    pub const FOUR_ATOM_DP_C_W40: f64 = 0.5004213976243947;

    pub const PMIF_ERROR: [(f64, f64); 2] = [(0.9, 0.5), (1.1, 0.5)];
    pub const PMIF_DRIFT: [(f64, f64); 2] = [(0.8, 0.5), (1.25, 0.5)];
    pub const FOUR_ATOMS: [(f64, f64); 4] = [(0.5, 0.25), (0.8, 0.25), (1.2, 0.25), (1.6, 0.25)];
}
