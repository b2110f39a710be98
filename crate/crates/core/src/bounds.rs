//! Bracketing tables for `B(k)` and the headline consistency checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::funcs::{block_lower_bound, FamilyIndex};
use crate::io::{fmt17, json_num};
use crate::optimize::{minimize, MinimizeConfig};
use crate::sums::CyclicVector;
use crate::tangent::solve_tangent;
use crate::{Result, Scalar};

/// `k(2^{1/k}-1) <= B(k) <= gamma_k`. `k = None` is the `k -> inf` row,
/// whose lower entry is `ln 2` (the limit of the lower column).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundsRow<T> {
    pub k: Option<u32>,
    pub lower: T,
    pub upper: T,
    pub gap: T,
}

impl<T: Scalar> BoundsRow<T> {
    fn new(k: Option<u32>, lower: T, upper: T) -> Self {
        Self { k, lower, upper, gap: upper - lower }
    }

    pub fn label(&self) -> String {
        self.k.map_or_else(|| "inf".to_string(), |k| k.to_string())
    }
}

/// Rows `k = 2..=k_max` followed by the limit row.
pub fn bounds_table<T: Scalar>(k_max: u32, tol: T) -> Result<Vec<BoundsRow<T>>> {
    if k_max < 2 {
        return Err(crate::Error::InvalidArgument(format!("k_max must be at least 2, got {k_max}")));
    }
    let mut rows = Vec::with_capacity(k_max as usize);
    for k in 2..=k_max {
        let sol = solve_tangent(FamilyIndex::from_int(k), tol)?;
        rows.push(BoundsRow::new(Some(k), block_lower_bound(k), sol.gamma));
    }
    let limit = solve_tangent(FamilyIndex::Infinity, tol)?;
    rows.push(BoundsRow::new(None, T::LN_2(), limit.gamma));
    Ok(rows)
}

/// Row-wise `ln 2 < lower < upper < 1` (finite rows), `lower < upper` for the
/// limit row, and both columns strictly decreasing down the table.
pub fn table_is_consistent<T: Scalar>(rows: &[BoundsRow<T>]) -> bool {
    let rows_ok = rows.iter().all(|r| match r.k {
        Some(_) => T::LN_2() < r.lower && r.lower < r.upper && r.upper < T::one() && r.gap > T::zero(),
        None => r.lower < r.upper && r.gap > T::zero(),
    });
    let monotone = rows.windows(2).all(|w| w[1].lower < w[0].lower && w[1].upper < w[0].upper);
    rows_ok && monotone
}

pub fn bounds_csv<T: Scalar>(rows: &[BoundsRow<T>]) -> String {
    let mut out = String::from("k,lower,upper,gap\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.label(),
            fmt17(r.lower.as_f64()),
            fmt17(r.upper.as_f64()),
            fmt17(r.gap.as_f64())
        ));
    }
    out
}

pub fn bounds_json<T: Scalar>(rows: &[BoundsRow<T>]) -> serde_json::Value {
    serde_json::Value::Array(
        rows.iter()
            .map(|r| {
                let k = r.k.map_or_else(|| json!("inf"), |k| json!(k));
                json!({
                    "k": k,
                    "lower": json_num(r.lower.as_f64()),
                    "upper": json_num(r.upper.as_f64()),
                    "gap": json_num(r.gap.as_f64()),
                })
            })
            .collect(),
    )
}

/// The published `k = 3` comparison: `gamma_3 / 3` against `0.32598 - 0.5e-5`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gamma3RatioReport {
    pub gamma3: f64,
    pub gamma3_over_3: f64,
    pub threshold: f64,
    pub holds: bool,
}

pub const GAMMA3_RATIO_REFERENCE: f64 = 0.32598;

pub fn gamma3_ratio_check(tol: f64) -> Result<Gamma3RatioReport> {
    let sol = solve_tangent(FamilyIndex::Finite(3.0f64), tol)?;
    let threshold = GAMMA3_RATIO_REFERENCE - 0.5e-5;
    let ratio = sol.gamma / 3.0;
    Ok(Gamma3RatioReport { gamma3: sol.gamma, gamma3_over_3: ratio, threshold, holds: ratio > threshold })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimitIdentityRow {
    pub k: usize,
    pub nu: usize,
    /// `S((k+1)nu, k+1)` of the zero-inserted vector.
    pub inserted_sum: f64,
    /// `S(k nu, k)` of the original.
    pub original_sum: f64,
    pub insert_rel_err: f64,
    /// Relative change of `S/n` under 3-fold replication.
    pub replicate_rel_err: f64,
    /// `(k/n) A` upper bounds from the optimizer at `(k nu, k)` and `((k+1)nu, k+1)`.
    pub minimize_k: f64,
    pub minimize_k1: f64,
}

impl LimitIdentityRow {
    /// Identities to `1e-12` and the optimizer values ordered as
    /// `A((k+1)nu, k+1)/nu <= A(k nu, k)/nu` within `opt_tol`.
    pub fn holds(&self, opt_tol: f64) -> bool {
        self.insert_rel_err <= 1e-12 && self.replicate_rel_err <= 1e-12 && self.minimize_k1 <= self.minimize_k + opt_tol
    }
}

/// Zero-insertion and replication identities on random vectors, plus the
/// optimizer comparison behind `B(k+1) <= B(k)`.
pub fn limit_identity_demo(k: usize, nu_list: &[usize], config: &MinimizeConfig) -> Result<Vec<LimitIdentityRow>> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    nu_list
        .iter()
        .map(|&nu| {
            let n = k * nu;
            let x = CyclicVector::new((0..n).map(|_| rng.gen_range(-3.0f64..3.0).exp()).collect())?;
            let original = x.diananda_sum(k)?;
            let inserted = x.zero_insert(k)?.diananda_sum(k + 1)?;
            let per = original / n as f64;
            let r = x.replicate(3)?;
            let per_r = r.diananda_sum(k)? / r.len() as f64;
            let a = minimize::<f64>(n, k, config)?;
            let b = minimize::<f64>((k + 1) * nu, k + 1, config)?;
            // (k/n) A(kn,k) = A/nu, and likewise for k+1: compare on the same scale.
            Ok(LimitIdentityRow {
                k,
                nu,
                inserted_sum: inserted,
                original_sum: original,
                insert_rel_err: ((inserted - original) / original).abs(),
                replicate_rel_err: ((per_r - per) / per).abs(),
                minimize_k: a.value,
                minimize_k1: b.value,
            })
        })
        .collect()
}
