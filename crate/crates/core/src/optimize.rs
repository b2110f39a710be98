//! Numerical upper bounds on `(k/n) A(n,k)`.
//!
//! The objective `F(y) = (k/n) S(n,k; e^y)` is minimized over `y = ln x`.
//! Because `S` is homogeneous of degree zero its gradient in `y` sums to zero
//! (Euler), so iterates stay on the gauge `sum y_i = 0` up to rounding, which
//! is removed by recentring after every step. The descent is L-BFGS with a
//! backtracking Armijo line search, run from several starts in parallel.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;

use crate::funcs::{block_lower_bound, FamilyIndex};
use crate::io::json_num;
use crate::summation::compensated_sum;
use crate::sums::CyclicVector;
use crate::tangent::{default_tol, solve_tangent};
use crate::{Error, Result, Scalar};

const LBFGS_MEMORY: usize = 10;
const ARMIJO_C1: f64 = 1e-4;
/// Largest change of any log-coordinate in one step.
const MAX_LOG_STEP: f64 = 4.0;
/// Random starts are uniform on `[-RANDOM_SPREAD, RANDOM_SPREAD]` in `y`.
pub const RANDOM_SPREAD: f64 = 3.0;
const STALL_LIMIT: usize = 30;
/// Two restarts whose values differ by less than this are tied.
const TIE_TOL: f64 = 1e-12;

/// Gradient of `S(n,k; x)` in `x`:
/// `dS/dx_m = 1/t_{m+1,k} - sum_{i=m-k}^{m-1} x_i / t_{i+1,k}^2`.
pub fn gradient<T: Scalar>(x: &CyclicVector<T>, k: usize) -> Result<Vec<T>> {
    let n = x.len();
    if k == 0 || k > n {
        return Err(Error::InvalidWindow { k, n });
    }
    let xs = x.as_slice();
    if let Some(i) = xs.iter().position(|&v| v <= T::zero()) {
        return Err(Error::NonPositiveEntry { index: i + 1 });
    }
    let w = x.window_sums(k)?;
    // weight of term i in the denominators it touches
    let pull: Vec<T> = (0..n)
        .map(|i| {
            let t = w[(i + 1) % n];
            xs[i] / (t * t)
        })
        .collect();
    Ok((0..n)
        .map(|m| {
            let own = T::one() / w[(m + 1) % n];
            let others = compensated_sum((1..=k).map(|d| pull[(m + n * k - d) % n]));
            own - others
        })
        .collect())
}

/// `sum_m x_m dS/dx_m`, zero for every `x` by degree-0 homogeneity.
pub fn euler_residual<T: Scalar>(x: &CyclicVector<T>, grad: &[T]) -> T {
    compensated_sum(x.as_slice().iter().zip(grad).map(|(&a, &b)| a * b))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinimizeConfig {
    /// Random starts, in addition to the structured ones.
    pub restarts: usize,
    pub seed: u64,
    pub max_iters: usize,
    /// Convergence threshold on the max-norm of the gradient in `y`.
    pub grad_tol: f64,
}

impl Default for MinimizeConfig {
    fn default() -> Self {
        Self { restarts: 20, seed: 0, max_iters: 3000, grad_tol: 1e-10 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinimizationResult<T> {
    pub n: usize,
    pub k: usize,
    /// Smallest `(k/n) S(n,k)` found; an upper bound on `(k/n) A(n,k)`.
    pub value: T,
    pub x_best: CyclicVector<T>,
    /// `k(2^{1/k} - 1)`, valid for every `x`.
    pub certified_floor: T,
    /// Number of starts actually descended.
    pub restarts_used: usize,
    /// Index of the winning start (0 is the uniform vector).
    pub best_start: usize,
    pub converged: bool,
    /// Max-norm of the `y`-gradient at `x_best`.
    pub gradient_norm: T,
}

impl<T: Scalar> MinimizationResult<T> {
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "n": self.n,
            "k": self.k,
            "value": json_num(self.value.as_f64()),
            "certified_floor": json_num(self.certified_floor.as_f64()),
            "converged": self.converged,
            "restarts_used": self.restarts_used,
            "gradient_norm": json_num(self.gradient_norm.as_f64()),
            "x_best": self.x_best.as_slice().iter().map(|v| json_num(v.as_f64())).collect::<Vec<_>>(),
        })
    }
}

/// Outcome of one descent.
#[derive(Debug, Clone)]
pub struct Descent<T> {
    pub y: Vec<T>,
    pub value: T,
    pub gradient_norm: T,
    pub converged: bool,
    pub iterations: usize,
}

struct Objective {
    n: usize,
    k: usize,
}

impl Objective {
    fn scale<T: Scalar>(&self) -> T {
        T::from_usize_lossy(self.k) / T::from_usize_lossy(self.n)
    }

    fn point<T: Scalar>(y: &[T]) -> Option<CyclicVector<T>> {
        let xs: Vec<T> = y.iter().map(|v| v.exp()).collect();
        if xs.iter().any(|&v| !(v > T::zero()) || !v.is_finite()) {
            return None;
        }
        CyclicVector::new(xs).ok()
    }

    fn value<T: Scalar>(&self, y: &[T]) -> T {
        Self::point(y).and_then(|x| x.diananda_sum(self.k).ok()).map_or(T::infinity(), |s| s * self.scale())
    }

    fn value_and_grad<T: Scalar>(&self, y: &[T]) -> Option<(T, Vec<T>)> {
        let x = Self::point(y)?;
        let s = x.diananda_sum(self.k).ok()?;
        let g = gradient(&x, self.k).ok()?;
        let c = self.scale::<T>();
        let gy = x.as_slice().iter().zip(&g).map(|(&xi, &gi)| c * xi * gi).collect();
        Some((s * c, gy))
    }
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    compensated_sum(a.iter().zip(b).map(|(&u, &v)| u * v))
}

fn max_abs<T: Scalar>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, &e| m.max(e.abs()))
}

fn recenter<T: Scalar>(y: &mut [T]) {
    let mean = compensated_sum(y.iter().copied()) / T::from_usize_lossy(y.len());
    y.iter_mut().for_each(|v| *v = *v - mean);
}

/// L-BFGS descent of `(k/n) S(n,k; e^y)` from `y0`.
pub fn descend<T: Scalar>(n: usize, k: usize, y0: Vec<T>, max_iters: usize, grad_tol: T) -> Descent<T> {
    let obj = Objective { n, k };
    let mut y = y0;
    recenter(&mut y);
    let Some((mut f, mut g)) = obj.value_and_grad(&y) else {
        return Descent { value: T::infinity(), gradient_norm: T::infinity(), converged: false, iterations: 0, y };
    };
    let mut memory: Vec<(Vec<T>, Vec<T>, T)> = Vec::with_capacity(LBFGS_MEMORY);
    let mut sd_step = T::one();
    let mut stall = 0;
    let mut converged = max_abs(&g) <= grad_tol;
    let mut iterations = 0;

    while !converged && iterations < max_iters {
        iterations += 1;
        // two-loop recursion
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(memory.len());
        for (s, yv, rho) in memory.iter().rev() {
            let a = *rho * dot(s, &q);
            q.iter_mut().zip(yv).for_each(|(qi, &yi)| *qi = *qi - a * yi);
            alphas.push(a);
        }
        if let Some((s, yv, _)) = memory.last() {
            let gamma0 = dot(s, yv) / dot(yv, yv);
            q.iter_mut().for_each(|qi| *qi = *qi * gamma0);
        }
        for ((s, yv, rho), &a) in memory.iter().zip(alphas.iter().rev()) {
            let b = *rho * dot(yv, &q);
            q.iter_mut().zip(s).for_each(|(qi, &si)| *qi = *qi + (a - b) * si);
        }
        let mut d: Vec<T> = q.iter().map(|&v| -v).collect();
        let mut slope = dot(&g, &d);
        let quasi_newton = !memory.is_empty() && slope < T::zero();
        if !quasi_newton {
            memory.clear();
            d = g.iter().map(|&v| -v).collect();
            slope = dot(&g, &d);
        }
        let cap = T::lit(MAX_LOG_STEP) / max_abs(&d).max(T::min_positive_value());
        let mut step = if quasi_newton { T::one() } else { (sd_step * T::lit(2.0)).min(T::lit(1e6)) };
        step = step.min(cap);

        let c1 = T::lit(ARMIJO_C1);
        let mut accepted = None;
        while step > T::lit(1e-20) {
            let mut trial: Vec<T> = y.iter().zip(&d).map(|(&yi, &di)| yi + step * di).collect();
            recenter(&mut trial);
            let ft = obj.value(&trial);
            if ft.is_finite() && ft <= f + c1 * step * slope {
                accepted = Some((trial, ft));
                break;
            }
            step = step * T::lit(0.5);
        }
        let Some((y_new, f_new)) = accepted else {
            if quasi_newton {
                memory.clear();
                continue;
            }
            break;
        };
        let Some((_, g_new)) = obj.value_and_grad(&y_new) else { break };
        if !quasi_newton {
            sd_step = step;
        }
        let s: Vec<T> = y_new.iter().zip(&y).map(|(&a, &b)| a - b).collect();
        let yv: Vec<T> = g_new.iter().zip(&g).map(|(&a, &b)| a - b).collect();
        let sy = dot(&s, &yv);
        if sy > T::epsilon() * dot(&s, &s).sqrt() * dot(&yv, &yv).sqrt() {
            if memory.len() == LBFGS_MEMORY {
                memory.remove(0);
            }
            memory.push((s, yv, T::one() / sy));
        }
        if f - f_new <= T::lit(4.0) * T::epsilon() * f.abs() {
            stall += 1;
        } else {
            stall = 0;
        }
        y = y_new;
        f = f_new;
        g = g_new;
        converged = max_abs(&g) <= grad_tol;
        if stall >= STALL_LIMIT {
            break;
        }
    }
    Descent { gradient_norm: max_abs(&g), value: f, converged, iterations, y }
}

/// Log-coordinates of a witness-shaped start for `n = k nu`, zeros replaced by
/// entries `e^-8` below the smallest nonzero one.
fn witness_shaped_start<T: Scalar>(n: usize, k: usize) -> Option<Vec<T>> {
    if k < 2 || !n.is_multiple_of(k) || n / k < 2 {
        return None;
    }
    let nu = n / k;
    let sol = solve_tangent(FamilyIndex::<T>::Finite(T::from_usize_lossy(k)), default_tol::<T>()).ok()?;
    let blocks = (sol.mu.as_f64() * nu as f64).round().clamp(1.0, (nu - 1) as f64) as usize;
    let m = k * blocks;
    let mp = n - m;
    let mu = T::from_usize_lossy(m) / T::from_usize_lossy(n);
    let b = -mu * sol.a / (T::one() - mu);
    let kk = T::from_usize_lossy(k);
    let mut y: Vec<T> = (1..=n)
        .map(|i| {
            if i < mp {
                if i % k == 0 {
                    T::from_usize_lossy(i / k) * b
                } else {
                    T::nan()
                }
            } else {
                -sol.a * T::from_usize_lossy(n - i) / kk
            }
        })
        .collect();
    let low = y.iter().filter(|v| !v.is_nan()).fold(T::infinity(), |m, &v| m.min(v)) - T::lit(8.0);
    y.iter_mut().filter(|v| v.is_nan()).for_each(|v| *v = low);
    Some(y)
}

/// All starting points, in tie-breaking order: uniform, single spike,
/// witness-shaped (when `k | n`), then `restarts` seeded random starts.
pub fn starting_points<T: Scalar>(n: usize, k: usize, restarts: usize, seed: u64) -> Vec<Vec<T>> {
    let mut starts = vec![vec![T::zero(); n]];
    if n > 1 {
        let mut spike = vec![T::zero(); n];
        spike[0] = T::lit(RANDOM_SPREAD);
        starts.push(spike);
    }
    if let Some(w) = witness_shaped_start(n, k) {
        starts.push(w);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..restarts {
        starts.push((0..n).map(|_| T::lit(rng.gen_range(-RANDOM_SPREAD..RANDOM_SPREAD))).collect());
    }
    starts
}

fn check_shape(n: usize, k: usize) -> Result<()> {
    if k == 0 || n < k {
        return Err(Error::InvalidWindow { k, n });
    }
    Ok(())
}

/// Best of all starts; see [`starting_points`].
pub fn minimize<T: Scalar>(n: usize, k: usize, config: &MinimizeConfig) -> Result<MinimizationResult<T>> {
    check_shape(n, k)?;
    let starts = starting_points::<T>(n, k, config.restarts, config.seed);
    let tol = T::lit(config.grad_tol);
    let runs: Vec<Descent<T>> = starts.into_par_iter().map(|y0| descend(n, k, y0, config.max_iters, tol)).collect();
    finish(n, k, runs)
}

/// A single descent from a given positive vector.
pub fn minimize_from<T: Scalar>(
    start: &CyclicVector<T>,
    k: usize,
    config: &MinimizeConfig,
) -> Result<MinimizationResult<T>> {
    let n = start.len();
    check_shape(n, k)?;
    if let Some(i) = start.as_slice().iter().position(|&v| v <= T::zero()) {
        return Err(Error::NonPositiveEntry { index: i + 1 });
    }
    let y0 = start.as_slice().iter().map(|v| v.ln()).collect();
    finish(n, k, vec![descend(n, k, y0, config.max_iters, T::lit(config.grad_tol))])
}

fn finish<T: Scalar>(n: usize, k: usize, runs: Vec<Descent<T>>) -> Result<MinimizationResult<T>> {
    let mut best = 0;
    for (i, r) in runs.iter().enumerate() {
        if r.value < runs[best].value - T::lit(TIE_TOL) {
            best = i;
        }
    }
    let restarts_used = runs.len();
    let run = runs.into_iter().nth(best).expect("at least one start");
    if !run.value.is_finite() {
        return Err(Error::InvalidArgument("no start produced a finite value".into()));
    }
    let x_best = CyclicVector::new(run.y.iter().map(|v| v.exp()).collect())?;
    Ok(MinimizationResult {
        n,
        k,
        value: run.value,
        x_best,
        certified_floor: block_lower_bound(k as u32),
        restarts_used,
        best_start: best,
        converged: run.converged,
        gradient_norm: run.gradient_norm,
    })
}

/// Geometric grid of `count` levels spanning `[lo, hi]`.
pub fn geometric_levels<T: Scalar>(count: usize, lo: f64, hi: f64) -> Vec<T> {
    if count == 1 {
        return vec![T::lit(lo)];
    }
    let r = (hi / lo).ln() / (count - 1) as f64;
    (0..count).map(|i| T::lit(lo * (r * i as f64).exp())).collect()
}

/// The default oracle grid: 40 geometric levels on `[1e-3, 1e3]`.
pub fn default_levels<T: Scalar>() -> Vec<T> {
    geometric_levels(40, 1e-3, 1e3)
}

pub const GRID_MAX_N: usize = 5;
pub const GRID_BUDGET: u64 = 100_000_000;

/// Exhaustive minimum of `(k/n) S(n,k)` over `levels^(n-1)` grid points.
///
/// By homogeneity `x_1` is pinned to the middle level, so uniform vectors
/// stay on the grid. Independent of [`minimize`]: no gradients, no shared
/// evaluation code beyond the arithmetic.
pub fn grid_oracle<T: Scalar>(n: usize, k: usize, levels: &[T]) -> Result<T> {
    check_shape(n, k)?;
    if n > GRID_MAX_N {
        return Err(Error::InvalidArgument(format!("grid oracle supports n <= {GRID_MAX_N}, got {n}")));
    }
    if levels.is_empty() || levels.iter().any(|&v| !(v > T::zero()) || !v.is_finite()) {
        return Err(Error::InvalidArgument("grid levels must be positive and finite".into()));
    }
    let count = (levels.len() as u64).checked_pow((n - 1) as u32).unwrap_or(u64::MAX);
    if count > GRID_BUDGET {
        return Err(Error::Capacity { needed: count, cap: GRID_BUDGET });
    }
    let mut idx = vec![0usize; n - 1];
    let mut x = vec![levels[(levels.len() - 1) / 2]; n];
    let scale = T::from_usize_lossy(k) / T::from_usize_lossy(n);
    let mut best = T::infinity();
    loop {
        for (slot, &j) in idx.iter().enumerate() {
            x[slot + 1] = levels[j];
        }
        let mut s = T::zero();
        for i in 0..n {
            let mut t = T::zero();
            for j in 1..=k {
                t = t + x[(i + j) % n];
            }
            s = s + x[i] / t;
        }
        best = best.min(s * scale);
        // odometer increment
        let mut pos = 0;
        loop {
            if pos == idx.len() {
                return Ok(best);
            }
            idx[pos] += 1;
            if idx[pos] < levels.len() {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}
