//! The function families behind both bounds.
//!
//! * `g_k(x) = k (1 - e^{-x/k}) / (e^x - 1)` with `g_k(0) = 1`, and its limit
//!   `g_inf(x) = x / (e^x - 1)`; note `g_1(x) = e^{-x}`.
//! * `p(x) = (1 - e^{-x}) / x`, so that `g_k(x) = g_inf(x/k) p(x)`.
//! * `f_k(t) = k ((1 + e^t)^{1/k} - 1)`, whose value at 0 is the lower bound.
//!
//! Every removable singularity at `x = 0` is handled with `exp_m1`, which is
//! accurate to an ulp for small arguments. The logarithmic derivative
//! `g'/g = phi(x/k)/k + phi(-x)` uses `phi(y) = 1/(e^y - 1) - 1/y`, which is
//! evaluated by its Bernoulli series below [`PHI_SERIES_CUTOFF`].

use std::fmt;
use std::str::FromStr;

use crate::{Error, Result, Scalar};

/// Below this `|y|` the series for `phi` is used; above it the direct
/// formula loses at most a factor `~2/|y|` to cancellation.
pub const PHI_SERIES_CUTOFF: f64 = 0.1;

/// Parameter of the `g` family: a positive real `k`, or the `k -> inf` limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FamilyIndex<T> {
    Finite(T),
    Infinity,
}

impl<T: Scalar> FamilyIndex<T> {
    pub fn finite(k: T) -> Result<Self> {
        if k > T::zero() && k.is_finite() {
            Ok(Self::Finite(k))
        } else if k == T::infinity() {
            Ok(Self::Infinity)
        } else {
            Err(Error::InvalidArgument(format!("family index must be positive, got {k}")))
        }
    }

    pub fn from_int(k: u32) -> Self {
        Self::Finite(T::lit(k as f64))
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Self::Infinity)
    }

    pub fn as_f64(&self) -> f64 {
        match self {
            Self::Finite(k) => k.as_f64(),
            Self::Infinity => f64::INFINITY,
        }
    }
}

impl<T: Scalar> fmt::Display for FamilyIndex<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Finite(k) => write!(f, "{k}"),
            Self::Infinity => f.write_str("inf"),
        }
    }
}

impl<T: Scalar> FromStr for FamilyIndex<T> {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("inf") || s.eq_ignore_ascii_case("infinity") {
            return Ok(Self::Infinity);
        }
        let v: f64 = s.parse().map_err(|_| Error::Parse(format!("bad family index {s:?}")))?;
        Self::finite(T::lit(v))
    }
}

/// `phi(y) = 1/(e^y - 1) - 1/y`, smooth with `phi(0) = -1/2`, valued in `(-1, 0)`.
pub fn phi<T: Scalar>(y: T) -> T {
    if y.abs() < T::lit(PHI_SERIES_CUTOFF) {
        // Bernoulli series: -1/2 + y/12 - y^3/720 + y^5/30240 - y^7/1209600 + y^9/47900160
        let y2 = y * y;
        let odd = T::lit(1.0 / 47_900_160.0);
        let odd = odd * y2 - T::lit(1.0 / 1_209_600.0);
        let odd = odd * y2 + T::lit(1.0 / 30_240.0);
        let odd = odd * y2 - T::lit(1.0 / 720.0);
        let odd = odd * y2 + T::lit(1.0 / 12.0);
        -T::lit(0.5) + y * odd
    } else {
        T::one() / y.exp_m1() - T::one() / y
    }
}

/// `g_k(x)`, or `g_inf(x)` for [`FamilyIndex::Infinity`].
pub fn eval_g<T: Scalar>(idx: FamilyIndex<T>, x: T) -> T {
    if x == T::zero() {
        return T::one();
    }
    let big = x > T::exp_overflow_threshold();
    match idx {
        FamilyIndex::Infinity => {
            if big {
                // x e^{-x} / (1 - e^{-x}) in log space
                (x.ln() - x - (-(-x).exp()).ln_1p()).exp()
            } else {
                x / x.exp_m1()
            }
        }
        FamilyIndex::Finite(k) => {
            let num = -(-x / k).exp_m1();
            if big {
                (k.ln() + num.ln() - x - (-(-x).exp()).ln_1p()).exp()
            } else {
                k * num / x.exp_m1()
            }
        }
    }
}

/// `d/dx g_k(x) = g_k(x) (phi(x/k)/k + phi(-x))`; `g_inf' = g_inf phi(-x)`.
pub fn eval_g_derivative<T: Scalar>(idx: FamilyIndex<T>, x: T) -> T {
    eval_g(idx, x) * log_derivative_g(idx, x)
}

/// `g'/g`, strictly negative. Kept separate because the tangent equation
/// needs `g/g'` and `ln(-g')` without forming `g'` first.
pub fn log_derivative_g<T: Scalar>(idx: FamilyIndex<T>, x: T) -> T {
    match idx {
        FamilyIndex::Infinity => phi(-x),
        FamilyIndex::Finite(k) => phi(x / k) / k + phi(-x),
    }
}

/// `p(x) = (1 - e^{-x}) / x`, `p(0) = 1`.
pub fn eval_p<T: Scalar>(x: T) -> T {
    if x == T::zero() {
        T::one()
    } else {
        -(-x).exp_m1() / x
    }
}

/// `ln(1 + e^t)` without overflow.
fn softplus<T: Scalar>(t: T) -> T {
    t.max(T::zero()) + (-t.abs()).exp().ln_1p()
}

/// `f_k(t) = k ((1 + e^t)^{1/k} - 1)`.
pub fn eval_f<T: Scalar>(k: u32, t: T) -> T {
    let kk = T::lit(k as f64);
    kk * (softplus(t) / kk).exp_m1()
}

/// `f_k'(t) = (1 + e^t)^{1/k} / (1 + e^{-t})`.
pub fn eval_f_derivative<T: Scalar>(k: u32, t: T) -> T {
    let kk = T::lit(k as f64);
    let growth = (softplus(t) / kk).exp();
    // 1/(1 + e^{-t}), evaluated on the side that cannot overflow
    let sigmoid = if t >= T::zero() {
        T::one() / (T::one() + (-t).exp())
    } else {
        let e = t.exp();
        e / (T::one() + e)
    };
    growth * sigmoid
}

/// The two factors of `f_k'`: `((1 + e^t)^{1/k}, 1 + e^{-t})`.
pub fn f_derivative_factors<T: Scalar>(k: u32, t: T) -> (T, T) {
    let kk = T::lit(k as f64);
    ((softplus(t) / kk).exp(), T::one() + (-t).exp())
}

/// `k (2^{1/k} - 1)`, the floor for `(k/n) S(n,k)` at every `n`.
pub fn block_lower_bound<T: Scalar>(k: u32) -> T {
    eval_f(k, T::zero())
}

/// Known floors for `(k/n) A(n,k)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceFloors<T> {
    /// `k (2^{1/k} - 1)`
    pub block: T,
    /// `2(k+1)/n`, only valid when `n > 2(k+1)`
    pub ratio_floor: Option<T>,
    /// `1/k`
    pub reciprocal_floor: T,
}

impl<T: Scalar> ReferenceFloors<T> {
    pub fn best(&self) -> T {
        let m = self.block.max(self.reciprocal_floor);
        self.ratio_floor.map_or(m, |d| m.max(d))
    }
}

pub fn reference_lower_bounds<T: Scalar>(n: u32, k: u32) -> Result<ReferenceFloors<T>> {
    if k == 0 || n < k {
        return Err(Error::InvalidWindow { k: k as usize, n: n as usize });
    }
    let nn = T::lit(n as f64);
    let kk = T::lit(k as f64);
    let ratio_floor = (n > 2 * (k + 1)).then(|| T::lit(2.0) * (kk + T::one()) / nn);
    Ok(ReferenceFloors { block: block_lower_bound(k), ratio_floor, reciprocal_floor: T::one() / kk })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const INF: FamilyIndex<f64> = FamilyIndex::Infinity;

    fn fk(k: f64) -> FamilyIndex<f64> {
        FamilyIndex::Finite(k)
    }

    /// Fourth-order central difference.
    fn fd<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
        (-f(x + 2.0 * h) + 8.0 * f(x + h) - 8.0 * f(x - h) + f(x - 2.0 * h)) / (12.0 * h)
    }

    #[test]
    fn g_examples() {
        assert_relative_eq!(eval_g(fk(1.0), 2.0), (-2f64).exp(), max_relative = 1e-15);
        for idx in [fk(1.0), fk(2.0), fk(3.5), fk(1e6), INF] {
            assert_eq!(eval_g(idx, 0.0), 1.0);
        }
        let l2 = 2f64.ln();
        assert_relative_eq!(eval_g(INF, l2), l2, max_relative = 1e-15);
    }

    #[test]
    fn g_one_is_exp_everywhere() {
        for i in -500..=500 {
            let x = i as f64 * 0.1;
            assert_relative_eq!(eval_g(fk(1.0), x), (-x).exp(), max_relative = 1e-14);
        }
    }

    #[test]
    fn g_continuous_through_zero() {
        for idx in [fk(2.0), fk(7.0), INF] {
            let d0 = eval_g_derivative(idx, 0.0);
            for e in [1e-300, 1e-200, 1e-16, 1e-12, 1e-8] {
                for x in [e, -e] {
                    let g = eval_g(idx, x);
                    assert!((g - (1.0 + d0 * x)).abs() <= 1e-15 + x * x);
                }
            }
        }
    }

    #[test]
    fn g_no_overflow_for_large_x() {
        for idx in [fk(3.0), INF] {
            let g = eval_g(idx, 720.0);
            assert!(g.is_finite() && g >= 0.0);
            assert!(eval_g(idx, 1e4) == 0.0);
            assert!(eval_g_derivative(idx, 720.0).is_finite());
        }
        // k (1 - e^{-x/k}) e^{-x} at x = 705, k = 3 (no cancellation there)
        let want = 3.0 * (1.0 - (-235f64).exp()) * (-705f64).exp();
        assert_relative_eq!(eval_g(fk(3.0), 705.0), want, max_relative = 1e-13);
    }

    #[test]
    fn derivative_examples() {
        assert_relative_eq!(eval_g_derivative(fk(1.0), 0.0), -1.0, max_relative = 1e-15);
        assert_relative_eq!(eval_g_derivative(INF, 0.0), -0.5, max_relative = 1e-15);
        let oracle = fd(|x| eval_g(INF, x), 0.0, 1e-3);
        assert_relative_eq!(oracle, -0.5, max_relative = 1e-9);
        let d = eval_g_derivative(fk(3.0), 1.0);
        assert!(d < 0.0);
        assert_relative_eq!(d, fd(|x| eval_g(fk(3.0), x), 1.0, 1e-3), max_relative = 1e-7);
    }

    #[test]
    fn derivative_matches_finite_differences_on_grid() {
        for idx in [fk(1.0), fk(2.0), fk(3.0), fk(10.0), fk(1000.0), INF] {
            for i in -200..=200 {
                let x = i as f64 * 0.1 + 0.013;
                let d = eval_g_derivative(idx, x);
                let o = fd(|t| eval_g(idx, t), x, 1e-3 * (1.0 + x.abs() * 0.1));
                assert!(d < 0.0);
                assert!((d - o).abs() <= 1e-7 * d.abs(), "{idx} {x} {d} {o}");
            }
        }
    }

    #[test]
    fn phi_series_meets_direct_formula() {
        for y in [0.0999999, -0.0999999, 0.1, -0.1, 0.05] {
            let direct = 1.0 / f64::exp_m1(y) - 1.0 / y;
            assert!((phi(y) - direct).abs() < 1e-14);
        }
        assert_eq!(phi(0.0), -0.5);
    }

    #[test]
    fn p_examples() {
        assert_eq!(eval_p(0.0), 1.0);
        assert_relative_eq!(eval_g(fk(4.0), 2.0), eval_g(INF, 2.0) * eval_p(0.5), max_relative = 1e-13);
        // the other ordering of the arguments is not an identity
        assert!((eval_g(fk(4.0), 2.0) - eval_g(INF, 0.5) * eval_p(2.0)).abs() > 0.05);
        assert!(eval_p(10.0) < eval_p(5.0) && eval_p(10.0) > 0.0);
        assert_relative_eq!(eval_p(1e-10), 1.0 - 0.5e-10, max_relative = 1e-15);
    }

    #[test]
    fn f_examples() {
        assert_eq!(eval_f(1, 0.0), 1.0);
        assert_relative_eq!(eval_f(2, 0.0), 2.0 * (2f64.sqrt() - 1.0), max_relative = 1e-15);
        assert!((eval_f::<f64>(2, 0.0) - 0.82843).abs() < 5e-6);
        assert_relative_eq!(eval_f(2, 3f64.ln()), 2.0, max_relative = 1e-15);
        assert_relative_eq!(eval_f_derivative(1, 0.0), 1.0, max_relative = 1e-15);
        assert_relative_eq!(eval_f_derivative(2, 0.0), 2f64.sqrt() / 2.0, max_relative = 1e-15);
        let (n0, d0) = f_derivative_factors(3, 0.0f64);
        let (n1, d1) = f_derivative_factors(3, 1.0f64);
        assert!(n1 > n0 && d1 < d0);
        for t in [-30.0, -3.0, -0.2, 0.0, 0.7, 4.0, 30.0] {
            for k in [1, 2, 5, 40] {
                let d = eval_f_derivative(k, t);
                let o = fd(|s| eval_f(k, s), t, 1e-3);
                assert!(d > 0.0 && (d - o).abs() <= 1e-7 * d, "{k} {t}");
                let (num, den) = f_derivative_factors(k, t);
                assert_relative_eq!(d, num / den, max_relative = 1e-14);
            }
        }
    }

    #[test]
    fn lower_bound_table() {
        let want = [0.82843, 0.77976, 0.75683, 0.74349, 0.73477, 0.72863];
        assert_eq!(block_lower_bound::<f64>(1), 1.0);
        for (k, w) in (2..=7).zip(want) {
            assert!((block_lower_bound::<f64>(k) - w).abs() < 5e-6);
        }
        for k in [1, 10, 1000, 1_000_000] {
            assert!(block_lower_bound::<f64>(k) > 2f64.ln());
        }
    }

    #[test]
    fn reference_floors() {
        let r = reference_lower_bounds::<f64>(9, 3).unwrap();
        assert_relative_eq!(r.ratio_floor.unwrap(), 8.0 / 9.0);
        assert_relative_eq!(r.best(), 8.0 / 9.0);
        let r = reference_lower_bounds::<f64>(100, 3).unwrap();
        assert_relative_eq!(r.ratio_floor.unwrap(), 0.08);
        assert_relative_eq!(r.best(), r.block);
        let r = reference_lower_bounds::<f64>(8, 3).unwrap();
        assert!(r.ratio_floor.is_none());
        assert_relative_eq!(r.reciprocal_floor, 1.0 / 3.0);
        assert!(reference_lower_bounds::<f64>(2, 3).is_err());
    }

    #[test]
    fn family_index_parsing() {
        assert_eq!("inf".parse::<FamilyIndex<f64>>().unwrap(), INF);
        assert_eq!("3".parse::<FamilyIndex<f64>>().unwrap(), fk(3.0));
        assert!("-1".parse::<FamilyIndex<f64>>().is_err());
        assert!("x".parse::<FamilyIndex<f64>>().is_err());
    }

    #[test]
    fn f32_evaluation() {
        let g = eval_g(FamilyIndex::Finite(3.0f32), 1.0);
        assert!((g as f64 - eval_g(fk(3.0), 1.0)).abs() < 1e-6);
        assert!(eval_g(FamilyIndex::Finite(3.0f32), 100.0).is_finite());
    }

    fn idx_strategy() -> impl Strategy<Value = FamilyIndex<f64>> {
        prop_oneof![(1.0f64..50.0).prop_map(FamilyIndex::Finite), Just(INF)]
    }

    proptest! {
        #[test]
        fn g_positive_decreasing_convex(idx in idx_strategy(), a in -30.0f64..30.0, b in -30.0f64..30.0) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assume!(hi - lo > 1e-9);
            let mid = 0.5 * (lo + hi);
            let funcs: [&dyn Fn(f64) -> f64; 2] = [&|x| eval_g(idx, x), &eval_p];
            for f in funcs {
                prop_assert!(f(lo) > 0.0 && f(hi) > 0.0);
                prop_assert!(f(lo) > f(hi));
                prop_assert!(f(mid) <= 0.5 * (f(lo) + f(hi)) * (1.0 + 1e-12));
            }
        }

        #[test]
        fn factorization(k in 0.5f64..1e4, x in -40.0f64..40.0) {
            let lhs = eval_g(fk(k), x);
            let rhs = eval_g(INF, x) * eval_p(x / k);
            prop_assert!((lhs - rhs).abs() <= 1e-13 * lhs);
        }

        #[test]
        fn k_monotonicity(k1 in 1.0f64..100.0, dk in 0.01f64..100.0, x in -20.0f64..20.0) {
            prop_assume!(x.abs() > 1e-3);
            let k2 = k1 + dk;
            // k (1 - e^{-x/k}) = g_k(x) (e^x - 1) increases with k
            let h = |k: f64| eval_g(fk(k), x) * x.exp_m1();
            prop_assert!(h(k1) < h(k2));
            if x > 0.0 {
                prop_assert!(eval_g(fk(k2), x) > eval_g(fk(k1), x));
            } else {
                prop_assert!(eval_g(fk(k2), x) < eval_g(fk(k1), x));
            }
        }

        #[test]
        fn large_k_limit(x in -10.0f64..10.0) {
            let ginf = eval_g(INF, x);
            prop_assert!((eval_g(fk(1e6), x) - ginf).abs() <= 1e-5 * ginf);
        }
    }
}
