//! Randomized invariant suites, grouped by property.
//!
//! Every group draws its cases from one seeded stream, so a run is fully
//! determined by `(suite, seed, cases)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::funcs::{
    block_lower_bound, eval_f, eval_f_derivative, eval_g, eval_g_derivative, eval_p, f_derivative_factors, FamilyIndex,
};
use crate::io::json_num;
use crate::optimize::{euler_residual, gradient};
use crate::sums::CyclicVector;
use crate::tangent::solve_tangent;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    /// Special-function properties only.
    Fast,
    /// Everything, including cyclic-sum identities and gradients.
    All,
}

impl std::str::FromStr for Suite {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "fast" => Ok(Self::Fast),
            "all" => Ok(Self::All),
            other => Err(crate::Error::Parse(format!("unknown suite {other:?} (expected fast|all)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupResult {
    pub name: &'static str,
    pub cases: usize,
    pub failures: usize,
    /// Largest violation seen, relative to the group's tolerance (`<= 1` passes).
    pub worst: f64,
}

impl GroupResult {
    fn new(name: &'static str) -> Self {
        Self { name, cases: 0, failures: 0, worst: 0.0 }
    }

    /// Record one case whose violation is `excess / tol` (nonpositive excess passes).
    fn record(&mut self, excess: f64, tol: f64) {
        self.cases += 1;
        let ratio = if excess <= 0.0 {
            0.0
        } else if tol > 0.0 {
            excess / tol
        } else {
            f64::INFINITY
        };
        let ratio = if excess.is_nan() { f64::INFINITY } else { ratio };
        self.worst = self.worst.max(ratio);
        if ratio > 1.0 {
            self.failures += 1;
        }
    }

    fn require(&mut self, ok: bool) {
        self.record(if ok { 0.0 } else { 1.0 }, 0.0);
    }

    pub fn passed(&self) -> bool {
        self.failures == 0 && self.cases > 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub suite: Suite,
    pub seed: u64,
    pub groups: Vec<GroupResult>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.groups.iter().all(GroupResult::passed)
    }

    pub fn total_cases(&self) -> usize {
        self.groups.iter().map(|g| g.cases).sum()
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "suite": match self.suite { Suite::Fast => "fast", Suite::All => "all" },
            "seed": self.seed,
            "passed": self.passed(),
            "total_cases": self.total_cases(),
            "groups": self.groups.iter().map(|g| json!({
                "name": g.name,
                "cases": g.cases,
                "failures": g.failures,
                "worst": json_num(g.worst),
                "passed": g.passed(),
            })).collect::<Vec<_>>(),
        })
    }
}

fn random_index(rng: &mut ChaCha8Rng) -> FamilyIndex<f64> {
    if rng.gen_bool(0.15) {
        FamilyIndex::Infinity
    } else {
        FamilyIndex::Finite(rng.gen_range(1.0..50.0))
    }
}

fn sorted_triple(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> (f64, f64) {
    let a: f64 = rng.gen_range(lo..hi);
    let b: f64 = rng.gen_range(lo..hi);
    (a.min(b), a.max(b))
}

fn g_shape(rng: &mut ChaCha8Rng, cases: usize) -> GroupResult {
    let mut g = GroupResult::new("g_positive_decreasing_convex");
    for _ in 0..cases {
        let idx = random_index(rng);
        let (lo, hi) = sorted_triple(rng, -30.0, 30.0);
        if hi - lo < 1e-6 {
            continue;
        }
        let mid = 0.5 * (lo + hi);
        let funcs: [&dyn Fn(f64) -> f64; 3] = [&|x| eval_g(idx, x), &|x| eval_g(FamilyIndex::Infinity, x), &eval_p];
        for f in funcs {
            let (fl, fm, fh) = (f(lo), f(mid), f(hi));
            g.require(fl > 0.0 && fh > 0.0 && fm > 0.0 && fl > fh);
            let chord = 0.5 * (fl + fh);
            g.record(fm - chord, 1e-12 * chord);
        }
        if let FamilyIndex::Finite(k) = idx {
            let x = mid;
            let lhs = eval_g(idx, x);
            g.record((lhs - eval_g(FamilyIndex::Infinity, x) * eval_p(x / k)).abs(), 1e-13 * lhs);
        }
    }
    g
}

fn numerator_in_k(rng: &mut ChaCha8Rng, cases: usize) -> GroupResult {
    let mut g = GroupResult::new("numerator_monotone_in_k");
    for _ in 0..cases {
        let x: f64 = rng.gen_range(-20.0..20.0);
        if x.abs() < 1e-3 {
            continue;
        }
        let (k1, k2) = sorted_triple(rng, 0.5, 200.0);
        if k2 - k1 < 1e-3 {
            continue;
        }
        let h = |k: f64| eval_g(FamilyIndex::Finite(k), x) * x.exp_m1();
        g.require(h(k1) < h(k2));
    }
    g
}

fn g_in_k(rng: &mut ChaCha8Rng, cases: usize) -> GroupResult {
    let mut g = GroupResult::new("g_monotone_in_k");
    for _ in 0..cases {
        let x: f64 = rng.gen_range(-20.0..20.0);
        if x.abs() < 1e-3 {
            continue;
        }
        let (k1, k2) = sorted_triple(rng, 1.0, 200.0);
        if k2 - k1 < 1e-3 || k1 <= 1.0 {
            continue;
        }
        let (g1, g2) = (eval_g(FamilyIndex::Finite(k1), x), eval_g(FamilyIndex::Finite(k2), x));
        let e = (-x).exp();
        let ginf = eval_g(FamilyIndex::Infinity, x);
        if x > 0.0 {
            g.require(ginf >= g2 && g2 > g1 && g1 > e);
        } else {
            g.require(ginf <= g2 && g2 < g1 && g1 < e);
        }
        if x.abs() <= 10.0 {
            g.record((eval_g(FamilyIndex::Finite(1e6), x) - ginf).abs() - 1e-5 * ginf, 1e-5 * ginf);
        }
    }
    g
}

fn g_derivative(rng: &mut ChaCha8Rng, cases: usize) -> GroupResult {
    let mut g = GroupResult::new("g_derivative_vs_finite_difference");
    for _ in 0..cases {
        let idx = random_index(rng);
        let x: f64 = rng.gen_range(-20.0..20.0);
        let d = eval_g_derivative(idx, x);
        let h = 1e-3;
        let f = |t: f64| eval_g(idx, t);
        let fd = (-f(x + 2.0 * h) + 8.0 * f(x + h) - 8.0 * f(x - h) + f(x - 2.0 * h)) / (12.0 * h);
        g.require(d < 0.0);
        g.record((d - fd).abs(), 1e-6 * d.abs());
    }
    g
}

fn f_family(rng: &mut ChaCha8Rng, cases: usize) -> GroupResult {
    let mut g = GroupResult::new("f_convex_and_derivative_factorization");
    for _ in 0..cases {
        let k = rng.gen_range(1..=64u32);
        let (lo, hi) = sorted_triple(rng, -20.0, 20.0);
        let mid = 0.5 * (lo + hi);
        let chord = 0.5 * (eval_f(k, lo) + eval_f(k, hi));
        g.record(eval_f(k, mid) - chord, 1e-12 * chord);

        let t = mid;
        let d = eval_f_derivative(k, t);
        let (num, den) = f_derivative_factors(k, t);
        g.record((d - num / den).abs(), 1e-13 * d);
        let h = 1e-3;
        let f = |s: f64| eval_f(k, s);
        let fd = (-f(t + 2.0 * h) + 8.0 * f(t + h) - 8.0 * f(t - h) + f(t - 2.0 * h)) / (12.0 * h);
        g.record((d - fd).abs(), 1e-6 * d);
        let (num2, den2) = f_derivative_factors(k, t + 0.5);
        g.require(num2 > num && den2 < den);
    }
    g
}

fn bracket_consistency() -> GroupResult {
    let mut g = GroupResult::new("lower_below_gamma");
    let ks = (2..=16u32).chain([32, 100, 1000]);
    for k in ks {
        match solve_tangent(FamilyIndex::Finite(k as f64), 1e-12) {
            Ok(sol) => {
                let lower = block_lower_bound::<f64>(k);
                g.require(std::f64::consts::LN_2 < lower && lower < sol.gamma);
                g.record(sol.max_residual() - 1e-11, 1e-11);
            }
            Err(_) => g.require(false),
        }
    }
    for k in [1u32, 10, 1000, 100_000, 1_000_000] {
        g.require(block_lower_bound::<f64>(k) > std::f64::consts::LN_2);
    }
    g
}

fn random_positive(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-3.0f64..3.0).exp()).collect()
}

/// The block lower bound is checked on every vector these groups evaluate.
struct Floor(GroupResult);

impl Floor {
    fn check(&mut self, x: &CyclicVector<f64>, k: usize) {
        let v = x.normalized_diananda_sum(k).unwrap_or(f64::NAN);
        let floor = block_lower_bound::<f64>(k as u32);
        self.0.record(floor - 1e-9 - v, 1e-9);
    }
}

fn block_diagnostics(rng: &mut ChaCha8Rng, cases: usize, floor: &mut Floor) -> GroupResult {
    let mut g = GroupResult::new("block_diagnostics");
    for _ in 0..cases {
        let k = rng.gen_range(1..=8usize);
        let nu = rng.gen_range(1..=16usize);
        let x = CyclicVector::new(random_positive(rng, k * nu)).expect("positive entries");
        floor.check(&x, k);
        let Ok(d) = x.block_diagnostics(k) else {
            g.require(false);
            continue;
        };
        g.record((d.ratio_product() - 1.0).abs(), 1e-12);
        g.record(d.worst_block_violation(), 1e-12);
        let s = x.diananda_sum(k).unwrap_or(f64::NAN);
        g.record((d.partial_total() - s).abs(), 1e-12 * s);
    }
    g
}

fn transforms(rng: &mut ChaCha8Rng, cases: usize, floor: &mut Floor) -> GroupResult {
    let mut g = GroupResult::new("zero_insert_and_replicate_identities");
    for _ in 0..cases {
        let k = rng.gen_range(1..=8usize);
        let nu = rng.gen_range(1..=12usize);
        let copies = rng.gen_range(1..=4usize);
        let x = CyclicVector::new(random_positive(rng, k * nu)).expect("positive entries");
        floor.check(&x, k);
        let s = x.diananda_sum(k).unwrap_or(f64::NAN);
        let z = x.zero_insert(k).and_then(|z| z.diananda_sum(k + 1)).unwrap_or(f64::NAN);
        g.record((z - s).abs(), 1e-12 * s);
        let r = x.replicate(copies).expect("copies >= 1");
        floor.check(&r, k);
        let per = r.diananda_sum(k).unwrap_or(f64::NAN) / r.len() as f64;
        let want = s / x.len() as f64;
        g.record((per - want).abs(), 1e-12 * want);
        let c = rng.gen_range(-10.0f64..10.0).exp();
        let scaled = x.scale(c).and_then(|y| y.diananda_sum(k)).unwrap_or(f64::NAN);
        g.record((scaled - s).abs(), 1e-10 * s);
        let rot = x.rotate(rng.gen_range(0..x.len())).diananda_sum(k).unwrap_or(f64::NAN);
        g.record((rot - s).abs(), 1e-12 * s);
    }
    g
}

fn gradients(rng: &mut ChaCha8Rng, cases: usize, floor: &mut Floor) -> (GroupResult, GroupResult) {
    let mut fd_group = GroupResult::new("gradient_vs_finite_difference");
    let mut euler = GroupResult::new("euler_identity");
    for _ in 0..cases {
        let n = rng.gen_range(1..=16usize);
        let k = rng.gen_range(1..=n);
        let xs = random_positive(rng, n);
        let x = CyclicVector::new(xs.clone()).expect("positive entries");
        floor.check(&x, k);
        let Ok(grad) = gradient(&x, k) else {
            fd_group.require(false);
            continue;
        };
        let s = |v: &[f64]| CyclicVector::new(v.to_vec()).and_then(|c| c.diananda_sum(k)).unwrap_or(f64::NAN);
        // compare x_m dS/dx_m against a central difference in log coordinates
        let scale = xs.iter().zip(&grad).map(|(a, b)| (a * b).abs()).fold(0.0, f64::max).max(1e-3);
        let m = rng.gen_range(0..n);
        let h: f64 = 1e-5;
        let mut p = xs.clone();
        let mut q = xs.clone();
        p[m] *= h.exp();
        q[m] *= (-h).exp();
        let fd = (s(&p) - s(&q)) / (2.0 * h);
        fd_group.record((xs[m] * grad[m] - fd).abs(), 1e-6 * scale);
        let mag: f64 = xs.iter().zip(&grad).map(|(a, b)| (a * b).abs()).sum();
        euler.record(euler_residual(&x, &grad).abs(), 1e-10 * mag.max(1.0));
    }
    (fd_group, euler)
}

/// Run `suite` with `cases` random cases per randomized group.
pub fn run_suite(suite: Suite, seed: u64, cases: usize) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut groups = vec![
        g_shape(&mut rng, cases),
        numerator_in_k(&mut rng, cases),
        g_in_k(&mut rng, cases),
        g_derivative(&mut rng, cases),
        f_family(&mut rng, cases),
        bracket_consistency(),
    ];
    if suite == Suite::All {
        let mut floor = Floor(GroupResult::new("block_floor"));
        groups.push(block_diagnostics(&mut rng, cases, &mut floor));
        groups.push(transforms(&mut rng, cases, &mut floor));
        let (fd, euler) = gradients(&mut rng, cases, &mut floor);
        groups.push(fd);
        groups.push(euler);
        groups.push(floor.0);
    }
    SuiteReport { suite, seed, groups }
}
