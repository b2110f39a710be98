//! Cyclic vectors, interval sums and the cyclic sums built on them.
//!
//! The public API is 1-based: `interval_sum(i, k)` is `x_i + ... + x_{i+k-1}`
//! with indices taken modulo `n`, and errors report 1-based positions.

use serde::Serialize;

use crate::summation::{compensated_sum, CompensatedSum};
use crate::{Error, Result, Scalar};

/// Nonnegative cyclic sequence `x_1..x_n`.
///
/// Zero entries are allowed. Whether a vector is admissible depends on the
/// window length `k` (every length-`k` window must have a positive sum), so
/// that condition is checked by each operation, not here.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent, bound(serialize = "T: Scalar"))]
pub struct CyclicVector<T> {
    #[serde(serialize_with = "crate::io::ser_seq_sig17")]
    entries: Vec<T>,
}

impl<T: Scalar> CyclicVector<T> {
    pub fn new(entries: Vec<T>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Empty);
        }
        for (i, &v) in entries.iter().enumerate() {
            if !v.is_finite() || v < T::zero() {
                return Err(Error::InvalidEntry { index: i + 1, value: v.as_f64() });
            }
        }
        Ok(Self { entries })
    }

    /// `n` copies of `value`.
    pub fn uniform(n: usize, value: T) -> Result<Self> {
        Self::new(vec![value; n])
    }

    pub fn from_f64_slice(xs: &[f64]) -> Result<Self> {
        Self::new(xs.iter().map(|&v| T::lit(v)).collect())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.entries
    }

    pub fn into_inner(self) -> Vec<T> {
        self.entries
    }

    /// Entry `x_i` for any integer `i`, reduced cyclically (1-based).
    pub fn get(&self, i: i64) -> T {
        self.entries[self.wrap(i)]
    }

    fn wrap(&self, i: i64) -> usize {
        (i - 1).rem_euclid(self.len() as i64) as usize
    }

    fn check_window(&self, k: usize) -> Result<()> {
        if k == 0 || k > self.len() {
            return Err(Error::InvalidWindow { k, n: self.len() });
        }
        Ok(())
    }

    /// `t_{i,k} = x_i + ... + x_{i+k-1}` with cyclic wraparound.
    pub fn interval_sum(&self, i: i64, k: usize) -> Result<T> {
        self.check_window(k)?;
        let start = self.wrap(i);
        let n = self.len();
        Ok(compensated_sum((0..k).map(|j| self.entries[(start + j) % n])))
    }

    /// All window sums: element `i` (0-based) is `t_{i+1,k}`.
    ///
    /// Sliding update with a compensated accumulator, restarted from scratch
    /// every `k` positions so error cannot build up across large dynamic
    /// ranges. Total cost is about `2n` additions.
    pub fn window_sums(&self, k: usize) -> Result<Vec<T>> {
        self.check_window(k)?;
        let n = self.len();
        let x = &self.entries;
        let mut out = Vec::with_capacity(n);
        let mut acc = CompensatedSum::new();
        for i in 0..n {
            if i % k == 0 {
                acc = CompensatedSum::new();
                for j in 0..k {
                    acc.add(x[(i + j) % n]);
                }
            } else {
                acc.add(x[(i + k - 1) % n]);
                acc.add(-x[i - 1]);
            }
            // Sums of nonnegative terms: clamp the tiny negatives that
            // cancellation can leave behind.
            out.push(acc.value().max(T::zero()));
        }
        Ok(out)
    }

    /// Window sums `t_{i+1,k}` for `i = 1..n`, failing on any zero window.
    fn denominators(&self, k: usize) -> Result<Vec<T>> {
        let w = self.window_sums(k)?;
        let n = self.len();
        for (start0, &t) in w.iter().enumerate() {
            if t <= T::zero() {
                // t_{start,k} is the denominator of term start-1.
                let term = if start0 == 0 { n } else { start0 };
                return Err(Error::ZeroWindow { start: start0 + 1, k, term });
            }
        }
        Ok(w)
    }

    /// `S(n,k; x) = sum_i x_i / t_{i+1,k}`.
    pub fn diananda_sum(&self, k: usize) -> Result<T> {
        let w = self.denominators(k)?;
        let n = self.len();
        Ok(compensated_sum(self.entries.iter().enumerate().map(|(i, &xi)| xi / w[(i + 1) % n])))
    }

    /// `(k/n) S(n,k; x)`, the quantity bounded below by `k(2^{1/k}-1)`.
    pub fn normalized_diananda_sum(&self, k: usize) -> Result<T> {
        Ok(self.diananda_sum(k)? * T::from_usize_lossy(k) / T::from_usize_lossy(self.len()))
    }

    /// `sum_i x_i / t_{i,k}`: each numerator sits inside its own window.
    pub fn baston_sum(&self, k: usize) -> Result<T> {
        let w = self.window_sums(k)?;
        let mut acc = CompensatedSum::new();
        for (i, (&xi, &t)) in self.entries.iter().zip(&w).enumerate() {
            if t <= T::zero() {
                return Err(Error::ZeroWindow { start: i + 1, k, term: i + 1 });
            }
            acc.add(xi / t);
        }
        Ok(acc.value())
    }

    /// Concatenation of `copies` copies of `x`.
    pub fn replicate(&self, copies: usize) -> Result<Self> {
        if copies == 0 {
            return Err(Error::InvalidArgument("copies must be at least 1".into()));
        }
        let mut entries = Vec::with_capacity(self.len() * copies);
        for _ in 0..copies {
            entries.extend_from_slice(&self.entries);
        }
        Ok(Self { entries })
    }

    /// For `n = k nu`, append a zero after each consecutive block of `k`
    /// entries. The result has length `(k+1) nu` and
    /// `S((k+1)nu, k+1; x') = S(k nu, k; x)`.
    pub fn zero_insert(&self, k: usize) -> Result<Self> {
        self.check_window(k)?;
        if !self.len().is_multiple_of(k) {
            return Err(Error::Shape { n: self.len(), k });
        }
        let nu = self.len() / k;
        let mut entries = Vec::with_capacity((k + 1) * nu);
        for block in self.entries.chunks(k) {
            entries.extend_from_slice(block);
            entries.push(T::zero());
        }
        Ok(Self { entries })
    }

    /// Cyclic left rotation by `shift` positions.
    pub fn rotate(&self, shift: usize) -> Self {
        let mut entries = self.entries.clone();
        let n = entries.len();
        entries.rotate_left(shift % n);
        Self { entries }
    }

    pub fn scale(&self, c: T) -> Result<Self> {
        Self::new(self.entries.iter().map(|&v| v * c).collect())
    }

    /// Block ratios `r_j = t_{kj+1,k} / t_{k(j+1)+1,k}` and block partial sums
    /// `s_j = sum_{i=1..k} x_{jk+i} / t_{jk+i+1,k}` for `n = k nu`.
    pub fn block_diagnostics(&self, k: usize) -> Result<BlockDiagnostics<T>> {
        self.check_window(k)?;
        let n = self.len();
        if !n.is_multiple_of(k) {
            return Err(Error::Shape { n, k });
        }
        if let Some(i) = self.entries.iter().position(|&v| v <= T::zero()) {
            return Err(Error::NonPositiveEntry { index: i + 1 });
        }
        let w = self.window_sums(k)?;
        let nu = n / k;
        let ratios = (0..nu).map(|j| w[j * k] / w[((j + 1) * k) % n]).collect();
        let partials = (0..nu)
            .map(|j| {
                compensated_sum((0..k).map(|i| {
                    let idx = j * k + i;
                    self.entries[idx] / w[(idx + 1) % n]
                }))
            })
            .collect();
        Ok(BlockDiagnostics { k, nu, ratios, partials })
    }
}

/// Per-block quantities from the divisibility argument behind the
/// `k(2^{1/k}-1)` floor.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound(serialize = "T: Scalar"))]
pub struct BlockDiagnostics<T> {
    pub k: usize,
    pub nu: usize,
    #[serde(serialize_with = "crate::io::ser_seq_sig17")]
    pub ratios: Vec<T>,
    #[serde(serialize_with = "crate::io::ser_seq_sig17")]
    pub partials: Vec<T>,
}

impl<T: Scalar> BlockDiagnostics<T> {
    pub fn ratio_product(&self) -> T {
        // Through logs: the product of many ratios can leave the float range
        // even though it telescopes to 1.
        compensated_sum(self.ratios.iter().map(|r| r.ln())).exp()
    }

    pub fn partial_total(&self) -> T {
        compensated_sum(self.partials.iter().copied())
    }

    /// AM-GM floor `k((1+r_j)^{1/k} - 1)` for each block.
    pub fn block_floors(&self) -> Vec<T> {
        let k = T::from_usize_lossy(self.k);
        self.ratios.iter().map(|&r| k * (r.ln_1p() / k).exp_m1()).collect()
    }

    /// Largest violation of `s_j >= k((1+r_j)^{1/k} - 1)`; `<= 0` when all hold.
    pub fn worst_block_violation(&self) -> T {
        self.block_floors().iter().zip(&self.partials).map(|(&f, &s)| f - s).fold(T::neg_infinity(), T::max)
    }

    /// Both invariants: `prod r_j = 1` to `rel_tol` and every block floor
    /// holds up to `slack`.
    pub fn invariants_hold(&self, rel_tol: T, slack: T) -> bool {
        (self.ratio_product() - T::one()).abs() <= rel_tol && self.worst_block_violation() <= slack
    }
}

/// Cyclic vector stored as natural logarithms, `-inf` marking a zero entry.
///
/// Used for witness vectors whose entries span more orders of magnitude than
/// the floating-point range: every term of the cyclic sum depends only on
/// ratios, so the sum can be evaluated without ever forming the entries.
#[derive(Debug, Clone, PartialEq)]
pub struct LogCyclicVector<T> {
    logs: Vec<T>,
}

impl<T: Scalar> LogCyclicVector<T> {
    pub fn new(logs: Vec<T>) -> Result<Self> {
        if logs.is_empty() {
            return Err(Error::Empty);
        }
        for (i, &v) in logs.iter().enumerate() {
            if v.is_nan() || v == T::infinity() {
                return Err(Error::InvalidEntry { index: i + 1, value: v.as_f64() });
            }
        }
        Ok(Self { logs })
    }

    pub fn len(&self) -> usize {
        self.logs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.logs.is_empty()
    }

    pub fn logs(&self) -> &[T] {
        &self.logs
    }

    /// `(min, max)` over the finite log-entries.
    pub fn finite_log_range(&self) -> (T, T) {
        self.logs
            .iter()
            .filter(|v| v.is_finite())
            .fold((T::infinity(), T::neg_infinity()), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    /// Exponentiate once, centering the finite logs around zero. Fails with
    /// [`Error::Range`] if the centered entries would leave the normal range.
    pub fn to_linear(&self) -> Result<CyclicVector<T>> {
        let (lo, hi) = self.finite_log_range();
        let shift = (lo + hi) / T::lit(2.0);
        let half = (hi - lo) / T::lit(2.0);
        let limit = T::min_positive_value().ln().abs().min(T::exp_overflow_threshold());
        // headroom for window sums of up to n entries
        let headroom = T::from_usize_lossy(self.len()).ln();
        if half + headroom >= limit {
            return Err(Error::Range { span: (hi - lo).as_f64() });
        }
        CyclicVector::new(self.logs.iter().map(|&v| (v - shift).exp()).collect())
    }

    /// `S(n,k)` evaluated term by term as `exp(l_i - logsumexp(l_{i+1..i+k}))`.
    pub fn diananda_sum(&self, k: usize) -> Result<T> {
        let n = self.len();
        if k == 0 || k > n {
            return Err(Error::InvalidWindow { k, n });
        }
        let mut acc = CompensatedSum::new();
        for i in 0..n {
            let li = self.logs[i];
            let window = (1..=k).map(|j| self.logs[(i + j) % n]);
            let top = window.clone().fold(T::neg_infinity(), T::max);
            if top == T::neg_infinity() {
                let start = (i + 1) % n + 1;
                return Err(Error::ZeroWindow { start, k, term: i + 1 });
            }
            if li == T::neg_infinity() {
                continue;
            }
            let lse = top + compensated_sum(window.map(|l| (l - top).exp())).ln();
            acc.add((li - lse).exp());
        }
        Ok(acc.value())
    }
}
