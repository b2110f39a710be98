//! Sparse-geometric witness vectors pushing `(k/n) S(n,k)` below `gamma_k + eps`.
//!
//! With tangency data `(a, b, mu)` and a rational `mu* = m/n` close to `mu`
//! (both `m` and `n` multiples of `k`, `m' = n - m`), the vector is
//!
//! ```text
//! x_{jk} = e^{j b*}              1 <= j < m'/k
//! x_i    = 0                     i < m', k does not divide i
//! x_i    = e^{-a* (n - i)/k}     m' <= i <= n
//! ```
//!
//! and its normalized sum is at most `(1-mu*) e^{-b*} + mu* g_k(a*) + delta/n`
//! with `delta = k^2 e^{-a*/k} - k g_k(a*)`.

use serde_json::json;

use crate::funcs::{eval_g, FamilyIndex};
use crate::io::json_num;
use crate::sums::{CyclicVector, LogCyclicVector};
use crate::tangent::TangentSolution;
use crate::{Error, Result, Scalar};

pub const DEFAULT_N_CAP: u64 = 10_000_000;
const MAX_CONVERGENTS: usize = 64;

/// Continued-fraction convergents `p/q` of `x in (0, 1)`, in order.
pub fn convergents(x: f64, max_terms: usize) -> Vec<(u64, u64)> {
    let mut out = Vec::new();
    let (mut p0, mut q0, mut p1, mut q1) = (0u128, 1u128, 1u128, 0u128);
    let mut rest = x;
    for _ in 0..max_terms {
        let a = rest.floor();
        if !(0.0..=1e15).contains(&a) {
            break;
        }
        let a = a as u128;
        let (p2, q2) = (a * p1 + p0, a * q1 + q0);
        if p2 > u64::MAX as u128 || q2 > u64::MAX as u128 {
            break;
        }
        out.push((p2 as u64, q2 as u64));
        (p0, q0, p1, q1) = (p1, q1, p2, q2);
        let frac = rest - rest.floor();
        if frac < 1e-15 {
            break;
        }
        rest = 1.0 / frac;
    }
    out
}

/// Discrete plan for one witness vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WitnessSpec<T> {
    pub k: usize,
    pub n: usize,
    pub m: usize,
    pub m_prime: usize,
    pub a_star: T,
    pub b_star: T,
    pub mu_star: T,
    pub eps: T,
    pub delta: T,
    /// `gamma_k` of the tangent solution the plan was derived from.
    pub gamma: T,
    /// Convergent `p/q = mu*` in lowest terms.
    pub convergent: (u64, u64),
}

impl<T: Scalar> WitnessSpec<T> {
    fn g(&self, x: T) -> T {
        eval_g(FamilyIndex::Finite(T::from_usize_lossy(self.k)), x)
    }

    /// `mu* g_k(a*) + (1-mu*) e^{-b*}`; must stay below `gamma + eps/2`.
    pub fn mixed_value(&self) -> T {
        self.mu_star * self.g(self.a_star) + (T::one() - self.mu_star) * (-self.b_star).exp()
    }

    pub fn analytic_bound(&self) -> T {
        self.mixed_value() + self.delta / T::from_usize_lossy(self.n)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpec(msg));
        let (k, n, m) = (self.k, self.n, self.m);
        if k < 2 {
            return bad(format!("k={k} must be at least 2"));
        }
        if n % k != 0 || m % k != 0 {
            return bad(format!("k={k} must divide n={n} and m={m}"));
        }
        if m == 0 || m >= n || self.m_prime != n - m {
            return bad(format!("need 0 < m < n and m' = n - m (m={m}, n={n}, m'={})", self.m_prime));
        }
        if !(self.a_star < T::zero() && self.b_star > T::zero()) {
            return bad("need a* < 0 < b*".into());
        }
        let ratio = T::from_usize_lossy(m) / T::from_usize_lossy(n);
        if (self.mu_star - ratio).abs() > T::lit(4.0) * T::epsilon() {
            return bad("mu* differs from m/n".into());
        }
        let lin = self.mu_star * self.a_star + (T::one() - self.mu_star) * self.b_star;
        if lin.abs() > T::lit(1e-12).max(T::lit(16.0) * T::epsilon()) {
            return bad(format!("mu* a* + (1-mu*) b* = {lin:e}, expected 0"));
        }
        let half = self.eps / T::lit(2.0);
        if !(self.mixed_value() < self.gamma + half) {
            return bad("mixed value is not below gamma + eps/2".into());
        }
        if !(self.delta / T::from_usize_lossy(n) < half) {
            return bad("delta/n is not below eps/2".into());
        }
        Ok(())
    }

    /// Fields `k, n, m, a_star, b_star, eps, delta`.
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "k": self.k,
            "n": self.n,
            "m": self.m,
            "a_star": json_num(self.a_star.as_f64()),
            "b_star": json_num(self.b_star.as_f64()),
            "eps": json_num(self.eps.as_f64()),
            "delta": json_num(self.delta.as_f64()),
        })
    }
}

/// Choose `mu*`, `a*`, `b*` and `n` for target slack `eps`.
///
/// `a* = a_k` is kept and `b* = -mu* a*/(1-mu*)`, so the linear constraint
/// holds by construction. Convergents of `mu_k` are tried in order until the
/// mixed value drops below `gamma_k + eps/2`; then `n = k q s` and `m = k p s`
/// with the smallest integer `s` making `delta/n < eps/2`.
pub fn plan_witness<T: Scalar>(k: usize, eps: T, sol: &TangentSolution<T>, n_cap: u64) -> Result<WitnessSpec<T>> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("witness needs k >= 2, got {k}")));
    }
    if !(eps > T::zero() && eps.is_finite()) {
        return Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")));
    }
    let kk = T::from_usize_lossy(k);
    if sol.idx != FamilyIndex::Finite(kk) {
        return Err(Error::InvalidArgument(format!("tangent solution is for k={}, not {k}", sol.idx)));
    }
    let a = sol.a;
    let g_a = eval_g(sol.idx, a);
    let delta = kk * kk * (-a / kk).exp() - kk * g_a;
    let half = eps / T::lit(2.0);

    for (p, q) in convergents(sol.mu.as_f64(), MAX_CONVERGENTS) {
        if p == 0 || p >= q {
            continue;
        }
        let mu_star = T::lit(p as f64) / T::lit(q as f64);
        let b = -mu_star * a / (T::one() - mu_star);
        let mixed = mu_star * g_a + (T::one() - mu_star) * (-b).exp();
        if !(mixed < sol.gamma + half) {
            continue;
        }
        let block = (k as u128) * (q as u128);
        let s_min = (T::lit(2.0) * delta / (eps * T::lit(block as f64))).floor().as_f64();
        let mut s = if s_min.is_finite() && s_min >= 0.0 { s_min as u128 + 1 } else { u128::MAX / block };
        // guard against rounding in the division above
        while s < u128::MAX / block && !(delta / T::lit((block * s) as f64) < half) {
            s += 1;
        }
        let n = block.saturating_mul(s);
        if n > n_cap as u128 {
            return Err(Error::Capacity { needed: n.min(u64::MAX as u128) as u64, cap: n_cap });
        }
        let n = n as usize;
        let m = k * p as usize * s as usize;
        let spec = WitnessSpec {
            k,
            n,
            m,
            m_prime: n - m,
            a_star: a,
            b_star: b,
            mu_star: T::from_usize_lossy(m) / T::from_usize_lossy(n),
            eps,
            delta,
            gamma: sol.gamma,
            convergent: (p, q),
        };
        spec.validate()?;
        return Ok(spec);
    }
    Err(Error::InvalidSpec(format!("no convergent of mu={} brings the mixed value below gamma + eps/2", sol.mu)))
}

/// The witness as natural logs (`-inf` for the zero entries).
pub fn build_witness_log<T: Scalar>(spec: &WitnessSpec<T>) -> Result<LogCyclicVector<T>> {
    spec.validate()?;
    let (k, n, mp) = (spec.k, spec.n, spec.m_prime);
    let kk = T::from_usize_lossy(k);
    let logs = (1..=n)
        .map(|i| {
            if i < mp {
                if i % k == 0 {
                    T::from_usize_lossy(i / k) * spec.b_star
                } else {
                    T::neg_infinity()
                }
            } else {
                -spec.a_star * T::from_usize_lossy(n - i) / kk
            }
        })
        .collect();
    LogCyclicVector::new(logs)
}

/// The witness vector itself, rescaled by a constant so its entries fit the
/// floating-point range. Fails with [`Error::Range`] when they cannot.
pub fn build_witness<T: Scalar>(spec: &WitnessSpec<T>) -> Result<CyclicVector<T>> {
    build_witness_log(spec)?.to_linear()
}

/// Which evaluation produced [`WitnessReport::value`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalRoute {
    /// Plain cyclic sum of the exponentiated vector.
    Linear,
    /// Log-domain sum; the vector exceeds the floating-point range.
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WitnessReport<T> {
    /// `(k/n) S(n,k; x)` of the built witness.
    pub value: T,
    pub analytic_bound: T,
    pub gamma_plus_eps: T,
    pub route: EvalRoute,
}

impl<T: Scalar> WitnessReport<T> {
    /// `value <= analytic_bound < gamma + eps`.
    pub fn certified(&self) -> bool {
        self.value <= self.analytic_bound && self.analytic_bound < self.gamma_plus_eps
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "value": json_num(self.value.as_f64()),
            "analytic_bound": json_num(self.analytic_bound.as_f64()),
            "gamma_plus_eps": json_num(self.gamma_plus_eps.as_f64()),
            "route": match self.route { EvalRoute::Linear => "linear", EvalRoute::Log => "log" },
        })
    }
}

pub fn witness_value_and_bound<T: Scalar>(spec: &WitnessSpec<T>) -> Result<WitnessReport<T>> {
    let logs = build_witness_log(spec)?;
    let scale = T::from_usize_lossy(spec.k) / T::from_usize_lossy(spec.n);
    let (value, route) = match logs.to_linear() {
        Ok(x) => (x.diananda_sum(spec.k)? * scale, EvalRoute::Linear),
        Err(Error::Range { .. }) => (logs.diananda_sum(spec.k)? * scale, EvalRoute::Log),
        Err(e) => return Err(e),
    };
    Ok(WitnessReport { value, analytic_bound: spec.analytic_bound(), gamma_plus_eps: spec.gamma + spec.eps, route })
}

/// Per-term comparison of a built witness against the closed forms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TermAudit<T> {
    /// Sparse terms `i = jk < m'` with a nonzero numerator.
    pub sparse_terms: usize,
    /// Max relative deviation of those terms from `e^{-b*}`.
    pub sparse_max_rel_err: T,
    /// Dense terms `m' <= i <= n-k-1`.
    pub dense_terms: usize,
    /// Max relative deviation of those terms from `g_k(a*)/k`.
    pub dense_max_rel_err: T,
    /// Largest of the `k` tail terms `i = n-k..n-1` divided by `e^{-a*/k}`
    /// (must be `< 1`).
    pub tail_max_ratio: T,
    /// Relative mismatch at `i = m'` between `e^{(m'/k) b*}` and `e^{-a* m/k}`.
    pub boundary_rel_err: T,
}

/// Audit the terms of `x = build_witness(spec)`.
pub fn audit_terms<T: Scalar>(spec: &WitnessSpec<T>, x: &CyclicVector<T>) -> Result<TermAudit<T>> {
    let (k, n, mp) = (spec.k, spec.n, spec.m_prime);
    if x.len() != n {
        return Err(Error::InvalidArgument(format!("vector length {} != n = {n}", x.len())));
    }
    let w = x.window_sums(k)?;
    let xs = x.as_slice();
    // 1-based term i: x_i / t_{i+1,k}
    let term = |i: usize| xs[i - 1] / w[i % n];
    let rel = |v: T, want: T| ((v - want) / want).abs();
    let kk = T::from_usize_lossy(k);

    let sparse_want = (-spec.b_star).exp();
    let (mut sparse_terms, mut sparse_err) = (0, T::zero());
    for i in (k..mp).step_by(k) {
        sparse_terms += 1;
        sparse_err = sparse_err.max(rel(term(i), sparse_want));
    }
    let dense_want = spec.g(spec.a_star) / kk;
    let (mut dense_terms, mut dense_err) = (0, T::zero());
    for i in mp..n.saturating_sub(k) {
        dense_terms += 1;
        dense_err = dense_err.max(rel(term(i), dense_want));
    }
    let tail_cap = (-spec.a_star / kk).exp();
    let tail_max = (n - k..n).map(|i| term(i) / tail_cap).fold(T::zero(), T::max);

    let sparse_side = T::from_usize_lossy(mp / k) * spec.b_star;
    let dense_side = -spec.a_star * T::from_usize_lossy(spec.m) / kk;
    Ok(TermAudit {
        sparse_terms,
        sparse_max_rel_err: sparse_err,
        dense_terms,
        dense_max_rel_err: dense_err,
        tail_max_ratio: tail_max,
        boundary_rel_err: (sparse_side - dense_side).exp_m1().abs(),
    })
}
