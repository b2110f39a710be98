//! Common tangent of `y = g_k(x)` and `y = e^{-x}`.
//!
//! The tangent touches `g_k` at `a < 0` and `e^{-x}` at `b > 0`. Matching
//! slopes and intercepts and eliminating `b` leaves one equation in `a`:
//!
//! ```text
//! g(a)/g'(a) - a + 1 = ln(-g'(a))
//! ```
//!
//! after which `lambda = g'(a)`, `b = -ln(-lambda)`, `gamma = -lambda (1 + b)`
//! and the weight `mu = b / (b - a)` expresses `(0, gamma)` as a convex
//! combination of the two tangency points.

use serde::Serialize;

use crate::funcs::{eval_g, eval_g_derivative, log_derivative_g, FamilyIndex};
use crate::io::{fmt17, json_num};
use crate::{Error, Result, Scalar};

/// Default scan window for the left tangency abscissa.
pub const SCAN_LO: f64 = -30.0;
pub const SCAN_HI: f64 = -1e-6;
const SCAN_POINTS: usize = 400;

/// Residual target appropriate for `T`: `1e-12` in double precision.
pub fn default_tol<T: Scalar>() -> T {
    T::lit(1e-12).max(T::lit(64.0) * T::epsilon())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TangentSolution<T: Scalar> {
    #[serde(serialize_with = "ser_idx")]
    pub idx: FamilyIndex<T>,
    #[serde(serialize_with = "crate::io::ser_sig17")]
    pub a: T,
    #[serde(serialize_with = "crate::io::ser_sig17")]
    pub b: T,
    #[serde(serialize_with = "crate::io::ser_sig17")]
    pub gamma: T,
    #[serde(serialize_with = "crate::io::ser_sig17")]
    pub lambda: T,
    #[serde(serialize_with = "crate::io::ser_sig17")]
    pub mu: T,
    /// `|g(a) - (gamma + lambda a)|`, `|g'(a) - lambda|`,
    /// `|e^{-b} - (gamma + lambda b)|`, `|-e^{-b} - lambda|`.
    #[serde(serialize_with = "crate::io::ser_seq_sig17")]
    pub residuals: [T; 4],
    /// `|R(a)|` for the single-unknown equation.
    #[serde(serialize_with = "crate::io::ser_sig17")]
    pub equation_residual: T,
}

fn ser_idx<T: Scalar, S: serde::Serializer>(idx: &FamilyIndex<T>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match idx {
        FamilyIndex::Infinity => s.serialize_str("inf"),
        FamilyIndex::Finite(k) => crate::io::ser_sig17(k, s),
    }
}

impl<T: Scalar> TangentSolution<T> {
    pub fn max_residual(&self) -> T {
        self.residuals.iter().copied().fold(self.equation_residual, T::max)
    }

    pub fn mu_prime(&self) -> T {
        T::one() - self.mu
    }

    /// The convex minorant of `min(e^{-x}, g_k(x))`: `g_k` left of `a`, the
    /// tangent line on `(a, b)`, `e^{-x}` right of `b`.
    pub fn eval_minorant(&self, x: T) -> T {
        if x <= self.a {
            eval_g(self.idx, x)
        } else if x < self.b {
            self.gamma + self.lambda * x
        } else {
            (-x).exp()
        }
    }
}

/// `R(a) = g(a)/g'(a) - a + 1 - ln(-g'(a))`, written through `L = g'/g`.
pub fn tangency_equation<T: Scalar>(idx: FamilyIndex<T>, a: T) -> T {
    let l = log_derivative_g(idx, a);
    T::one() / l - a + T::one() - (eval_g(idx, a).ln() + (-l).ln())
}

fn check_family<T: Scalar>(idx: FamilyIndex<T>) -> Result<()> {
    match idx {
        FamilyIndex::Finite(k) if !(k > T::one()) => Err(Error::DegenerateFamily(k.as_f64())),
        _ => Ok(()),
    }
}

/// Locate the unique sign change of `f` on `[lo, hi]` (both negative) with
/// a geometrically spaced scan, then bisect to the last representable
/// bracket and finish with one secant step if it improves the residual.
fn bracketed_root<T: Scalar, F: Fn(T) -> T>(f: F, lo: T, hi: T) -> Result<T> {
    let ratio = (hi / lo).ln() / T::from_usize_lossy(SCAN_POINTS);
    let grid: Vec<T> = (0..=SCAN_POINTS).map(|i| lo * (ratio * T::from_usize_lossy(i)).exp()).collect();
    let vals: Vec<T> = grid.iter().map(|&a| f(a)).collect();
    let mut brackets = Vec::new();
    for i in 0..SCAN_POINTS {
        if vals[i] == T::zero() {
            return Ok(grid[i]);
        }
        if (vals[i] < T::zero()) != (vals[i + 1] < T::zero()) {
            brackets.push(i);
        }
    }
    let (lo64, hi64) = (lo.as_f64(), hi.as_f64());
    match brackets.len() {
        0 => return Err(Error::NoBracket { lo: lo64, hi: hi64 }),
        1 => {}
        count => return Err(Error::MultipleRoots { count, lo: lo64, hi: hi64 }),
    }
    let i = brackets[0];
    let (mut x0, mut x1, mut f0, mut f1) = (grid[i], grid[i + 1], vals[i], vals[i + 1]);
    for _ in 0..200 {
        let mid = (x0 + x1) / T::lit(2.0);
        if mid <= x0 || mid >= x1 {
            break;
        }
        let fm = f(mid);
        if fm == T::zero() {
            return Ok(mid);
        }
        if (fm < T::zero()) == (f0 < T::zero()) {
            x0 = mid;
            f0 = fm;
        } else {
            x1 = mid;
            f1 = fm;
        }
    }
    let (best, fbest) = if f0.abs() <= f1.abs() { (x0, f0) } else { (x1, f1) };
    if f1 != f0 {
        let secant = x1 - f1 * (x1 - x0) / (f1 - f0);
        if secant >= x0 && secant <= x1 && f(secant).abs() < fbest.abs() {
            return Ok(secant);
        }
    }
    Ok(best)
}

/// Solve for the common tangent, requiring every residual `<= tol`.
pub fn solve_tangent<T: Scalar>(idx: FamilyIndex<T>, tol: T) -> Result<TangentSolution<T>> {
    solve_tangent_in(idx, tol, T::lit(SCAN_LO), T::lit(SCAN_HI))
}

/// [`solve_tangent`] with an explicit scan window `[lo, hi]`, `lo < hi < 0`.
pub fn solve_tangent_in<T: Scalar>(idx: FamilyIndex<T>, tol: T, lo: T, hi: T) -> Result<TangentSolution<T>> {
    check_family(idx)?;
    if !(tol > T::zero()) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    if !(lo < hi && hi < T::zero()) {
        return Err(Error::InvalidArgument("scan window must satisfy lo < hi < 0".into()));
    }
    let a = bracketed_root(|a| tangency_equation(idx, a), lo, hi)?;
    let ga = eval_g(idx, a);
    let lambda = eval_g_derivative(idx, a);
    let b = -(-lambda).ln();
    let gamma = -lambda * (T::one() + b);
    let mu = b / (b - a);
    let eb = (-b).exp();
    let residuals = [
        (ga - (gamma + lambda * a)).abs(),
        (eval_g_derivative(idx, a) - lambda).abs(),
        (eb - (gamma + lambda * b)).abs(),
        (-eb - lambda).abs(),
    ];
    let sol =
        TangentSolution { idx, a, b, gamma, lambda, mu, residuals, equation_residual: tangency_equation(idx, a).abs() };
    let worst = sol.max_residual();
    if !(worst <= tol) {
        return Err(Error::Tolerance { residual: worst.as_f64(), tol: tol.as_f64() });
    }
    Ok(sol)
}

/// One solution per requested index, in input order.
pub fn gamma_table<T: Scalar>(k_values: &[FamilyIndex<T>], tol: T) -> Result<Vec<TangentSolution<T>>> {
    k_values.iter().map(|&idx| solve_tangent(idx, tol)).collect()
}

fn idx_label<T: Scalar>(idx: FamilyIndex<T>) -> String {
    match idx {
        FamilyIndex::Infinity => "inf".into(),
        FamilyIndex::Finite(k) => {
            let v = k.as_f64();
            if v.fract() == 0.0 && v.abs() < 1e15 {
                format!("{}", v as i64)
            } else {
                fmt17(v)
            }
        }
    }
}

/// CSV with header `k,a,b,gamma,lambda,mu`, LF line endings.
pub fn gamma_table_csv<T: Scalar>(rows: &[TangentSolution<T>]) -> String {
    let mut out = String::from("k,a,b,gamma,lambda,mu\n");
    for r in rows {
        let cols = [r.a, r.b, r.gamma, r.lambda, r.mu].map(|v| fmt17(v.as_f64()));
        out.push_str(&format!("{},{}\n", idx_label(r.idx), cols.join(",")));
    }
    out
}

pub fn gamma_table_json<T: Scalar>(rows: &[TangentSolution<T>]) -> serde_json::Value {
    serde_json::Value::Array(
        rows.iter()
            .map(|r| {
                let k = match r.idx {
                    FamilyIndex::Infinity => serde_json::Value::String("inf".into()),
                    FamilyIndex::Finite(k) => json_num(k.as_f64()),
                };
                serde_json::json!({
                    "k": k,
                    "a": json_num(r.a.as_f64()),
                    "b": json_num(r.b.as_f64()),
                    "gamma": json_num(r.gamma.as_f64()),
                    "lambda": json_num(r.lambda.as_f64()),
                    "mu": json_num(r.mu.as_f64()),
                })
            })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcs::block_lower_bound;
    use proptest::prelude::*;

    fn solve(k: f64) -> TangentSolution<f64> {
        solve_tangent(FamilyIndex::Finite(k), 1e-12).unwrap()
    }

    #[test]
    fn gamma_two() {
        let s = solve(2.0);
        assert!((s.gamma - 0.98913).abs() < 5e-6);
        assert!((s.gamma - 0.989133).abs() < 1e-6);
    }

    #[test]
    fn infinite_family() {
        let s = solve_tangent(FamilyIndex::<f64>::Infinity, 1e-12).unwrap();
        assert!((s.gamma - 0.930498).abs() < 1e-6);
    }

    #[test]
    fn solution_invariants() {
        for idx in [2.0, 2.5, 3.0, 4.0, 10.0, 100.0, 1000.0, 1e5]
            .map(FamilyIndex::Finite)
            .into_iter()
            .chain([FamilyIndex::Infinity])
        {
            let s = solve_tangent(idx, 1e-12).unwrap();
            assert!(s.a < 0.0 && 0.0 < s.b);
            assert!(s.gamma < 1.0 && s.gamma > 2f64.ln());
            assert!(s.lambda < 0.0);
            assert!(s.mu > 0.0 && s.mu < 1.0);
            assert!((s.mu * s.a + s.mu_prime() * s.b).abs() <= 1e-12);
            let mix = s.mu * eval_g(idx, s.a) + s.mu_prime() * (-s.b).exp();
            assert!((mix - s.gamma).abs() <= 1e-10);
            assert!(s.residuals.iter().all(|&r| r <= 1e-11));
            assert!(tangency_equation(idx, s.a).abs() <= 1e-12);
        }
    }

    #[test]
    fn degenerate_and_missing_bracket() {
        assert_eq!(solve_tangent(FamilyIndex::Finite(1.0), 1e-12), Err(Error::DegenerateFamily(1.0)));
        assert_eq!(solve_tangent(FamilyIndex::Finite(0.5), 1e-12), Err(Error::DegenerateFamily(0.5)));
        // a_2 is about -0.2008, outside this window
        let r = solve_tangent_in(FamilyIndex::Finite(2.0), 1e-12, -30.0, -1.0);
        assert!(matches!(r, Err(Error::NoBracket { .. })));
        assert!(solve_tangent_in(FamilyIndex::Finite(2.0), 1e-12, -1.0, 1.0).is_err());
        assert!(solve_tangent(FamilyIndex::Finite(2.0), 0.0).is_err());
    }

    #[test]
    fn multiple_sign_changes_rejected() {
        let r = bracketed_root(|x: f64| (x * 3.0).sin(), -10.0, -0.5);
        assert!(matches!(r, Err(Error::MultipleRoots { .. })));
    }

    #[test]
    fn table_matches_published_rows() {
        let ks: Vec<_> = [2.0f64, 3.0, 4.0, 10.0, 100.0, 1000.0].map(FamilyIndex::Finite).to_vec();
        let mut ks_inf = ks.clone();
        ks_inf.push(FamilyIndex::Infinity);
        let rows = gamma_table(&ks_inf, 1e-12).unwrap();
        let want = [0.98913, 0.97793, 0.96994, 0.94983, 0.93272, 0.93072];
        for (r, w) in rows.iter().zip(want) {
            assert!((r.gamma - w).abs() < 5e-6, "{} {}", r.gamma, w);
        }
        for w in rows.windows(2) {
            assert!(w[1].gamma < w[0].gamma);
            assert!(w[1].lambda.abs() < w[0].lambda.abs());
        }
        let csv = gamma_table_csv(&rows);
        assert!(csv.starts_with("k,a,b,gamma,lambda,mu\n2,"));
        assert!(csv.lines().last().unwrap().starts_with("inf,"));
        assert_eq!(csv.lines().count(), 8);
        let json = gamma_table_json(&rows);
        assert_eq!(json[6]["k"], "inf");
        assert!((json[0]["gamma"].as_f64().unwrap() - rows[0].gamma).abs() < 1e-16);
    }

    #[test]
    fn minorant_branches() {
        let s = solve(3.0);
        assert_eq!(s.eval_minorant(0.0), s.gamma);
        assert_eq!(s.eval_minorant(s.b + 5.0), (-(s.b + 5.0)).exp());
        let left = eval_g(s.idx, s.a);
        assert!((left - (s.gamma + s.lambda * s.a)).abs() <= 1e-10);
        for knot in [s.a, s.b] {
            let h = 1e-7;
            let (l, r) = (s.eval_minorant(knot - h), s.eval_minorant(knot + h));
            assert!((l - r).abs() <= 1e-9 + 2.0 * h);
            let dl = (s.eval_minorant(knot) - s.eval_minorant(knot - h)) / h;
            let dr = (s.eval_minorant(knot + h) - s.eval_minorant(knot)) / h;
            assert!((dl - dr).abs() <= 1e-6);
        }
    }

    #[test]
    fn bounds_are_consistent() {
        for k in 2..=12u32 {
            assert!(block_lower_bound::<f64>(k) < solve(k as f64).gamma);
        }
    }

    #[test]
    fn f32_solution() {
        let s = solve_tangent(FamilyIndex::Finite(2.0f32), default_tol::<f32>()).unwrap();
        assert!((s.gamma as f64 - 0.989133).abs() < 1e-5);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn minorant_convex_and_below(k in 2.0f64..60.0, x in -6.0f64..6.0, y in -6.0f64..6.0) {
            let s = solve(k);
            let h = |t| s.eval_minorant(t);
            prop_assert!(h(0.5 * (x + y)) <= 0.5 * (h(x) + h(y)) + 1e-10);
            for t in [x, y] {
                prop_assert!(h(t) <= (-t).exp().min(eval_g(s.idx, t)) + 1e-12);
            }
        }
    }
}
