use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use cyclic_bounds::bounds::{bounds_csv, bounds_json, bounds_table, table_is_consistent};
use cyclic_bounds::checks::{run_suite, Suite};
use cyclic_bounds::io::{fmt17, fmt6, fmt_sig, json_num, write_lines};
use cyclic_bounds::optimize::{minimize, MinimizeConfig};
use cyclic_bounds::tangent::{solve_tangent, TangentSolution};
use cyclic_bounds::witness::{build_witness_log, plan_witness, witness_value_and_bound, EvalRoute, DEFAULT_N_CAP};
use cyclic_bounds::{Error, FamilyIndex};

const THREADS_ENV: &str = "CYCLIC_BOUNDS_THREADS";

#[derive(Parser)]
#[command(name = "cyclic-bounds", version, about = "Bounds, tangents, witnesses and minimizers for cyclic sums")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Table of k(2^{1/k}-1) <= B(k) <= gamma_k for k = 2..k_max and the limit row.
    Bounds {
        #[arg(long)]
        k_max: u32,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
    },
    /// Common tangent of e^{-x} and g_k.
    Tangent {
        /// Window length, or `inf`.
        #[arg(long)]
        k: String,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Build a vector with (k/n) S below gamma_k + eps.
    Witness {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        eps: f64,
        /// Destination for the vector, one entry per line.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Largest admissible n.
        #[arg(long, default_value_t = DEFAULT_N_CAP)]
        cap: u64,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Multistart minimization of (k/n) S(n,k).
    Minimize {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 20)]
        restarts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 3000)]
        max_iters: usize,
        #[arg(long, default_value_t = 1e-10)]
        grad_tol: f64,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Randomized invariant suites.
    Verify {
        #[arg(long, default_value = "fast")]
        suite: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Random cases per group.
        #[arg(long, default_value_t = 2000)]
        cases: usize,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
}

enum Failure {
    Usage(String),
    Compute(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Self::Compute(e)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidArgument(_) | Error::Parse(_) | Error::Shape { .. } | Error::InvalidWindow { .. } => {
                Self::Usage(e.to_string())
            }
            other => Self::Compute(other.into()),
        }
    }
}

type CmdResult = Result<(), Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn check_tol(tol: f64) -> CmdResult {
    if tol > 0.0 && tol <= 1e-3 {
        Ok(())
    } else {
        Err(usage(format!("--tol must lie in (0, 1e-3], got {tol}")))
    }
}

fn emit(text: &str) -> CmdResult {
    let mut out = std::io::stdout().lock();
    out.write_all(text.as_bytes()).context("writing stdout")?;
    out.flush().context("writing stdout")?;
    Ok(())
}

fn emit_json(v: &serde_json::Value) -> CmdResult {
    emit(&format!("{}\n", serde_json::to_string_pretty(v).context("serializing")?))
}

fn cmd_bounds(k_max: u32, format: Format, tol: f64) -> CmdResult {
    if k_max < 2 {
        return Err(usage(format!("--k-max must be at least 2, got {k_max}")));
    }
    check_tol(tol)?;
    let rows = bounds_table::<f64>(k_max, tol)?;
    if !table_is_consistent(&rows) {
        return Err(Failure::Compute(anyhow::anyhow!("bounds table failed its consistency check")));
    }
    match format {
        Format::Csv => emit(&bounds_csv(&rows)),
        Format::Json => emit_json(&bounds_json(&rows)),
        Format::Text => {
            let mut s = format!("{:>5}  {:>10}  {:>10}  {:>10}\n", "k", "lower", "upper", "gap");
            for r in &rows {
                s.push_str(&format!(
                    "{:>5}  {:>10}  {:>10}  {:>10}\n",
                    r.label(),
                    fmt6(r.lower),
                    fmt6(r.upper),
                    fmt6(r.gap)
                ));
            }
            emit(&s)
        }
    }
}

fn tangent_text(sol: &TangentSolution<f64>) -> String {
    let r = &sol.residuals;
    format!(
        "k         {}\na         {}\nb         {}\ngamma     {}\nlambda    {}\nmu        {}\nresiduals {} {} {} {}\nequation  {}\n",
        sol.idx,
        fmt6(sol.a),
        fmt6(sol.b),
        // gamma is the headline constant; show enough digits to compare with published values
        fmt_sig(sol.gamma, 12),
        fmt6(sol.lambda),
        fmt6(sol.mu),
        fmt6(r[0]),
        fmt6(r[1]),
        fmt6(r[2]),
        fmt6(r[3]),
        fmt6(sol.equation_residual),
    )
}

fn cmd_tangent(k: &str, tol: f64, format: Format) -> CmdResult {
    check_tol(tol)?;
    let idx: FamilyIndex<f64> = k.parse().map_err(|e: Error| usage(e.to_string()))?;
    if let FamilyIndex::Finite(v) = idx {
        if v < 2.0 {
            return Err(usage(format!("--k must be at least 2 or `inf`, got {k}")));
        }
    }
    let sol = solve_tangent(idx, tol)?;
    match format {
        Format::Text => emit(&tangent_text(&sol)),
        Format::Json => emit_json(&serde_json::to_value(sol).context("serializing")?),
        Format::Csv => emit(&cyclic_bounds::tangent::gamma_table_csv(&[sol])),
    }
}

fn cmd_witness(k: usize, eps: f64, out: Option<PathBuf>, cap: u64, tol: f64, format: Format) -> CmdResult {
    if k < 2 {
        return Err(usage(format!("--k must be at least 2, got {k}")));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(usage(format!("--eps must lie in (0, 1), got {eps}")));
    }
    check_tol(tol)?;
    let sol = solve_tangent(FamilyIndex::Finite(k as f64), tol)?;
    let spec = plan_witness(k, eps, &sol, cap)?;
    let report = witness_value_and_bound(&spec)?;

    let mut encoding = None;
    if let Some(path) = &out {
        let logs = build_witness_log(&spec)?;
        let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        let writer = BufWriter::new(file);
        match logs.to_linear() {
            Ok(x) => {
                write_lines(x.as_slice(), writer).with_context(|| format!("writing {}", path.display()))?;
                encoding = Some("linear");
            }
            Err(Error::Range { .. }) => {
                // entries span more than the float range; store natural logs instead
                write_lines(logs.logs(), writer).with_context(|| format!("writing {}", path.display()))?;
                encoding = Some("log");
            }
            Err(e) => return Err(e.into()),
        }
    }

    match format {
        Format::Json | Format::Csv => {
            let mut v = spec.to_json();
            let obj = v.as_object_mut().expect("spec serializes to an object");
            obj.insert("gamma".into(), json_num(spec.gamma));
            for (key, val) in report.to_json().as_object().expect("report serializes to an object") {
                obj.insert(key.clone(), val.clone());
            }
            obj.insert("certified".into(), json!(report.certified()));
            if let Some(enc) = encoding {
                obj.insert("out_encoding".into(), json!(enc));
            }
            emit_json(&v)?;
        }
        Format::Text => {
            let route = match report.route {
                EvalRoute::Linear => "linear",
                EvalRoute::Log => "log",
            };
            let mut s = format!(
                "k               {}\nn               {}\nm               {}\na_star          {}\nb_star          {}\ndelta           {}\nanalytic_bound  {}\nvalue           {}\ngamma_plus_eps  {}\nroute           {route}\n",
                spec.k,
                spec.n,
                spec.m,
                fmt6(spec.a_star),
                fmt6(spec.b_star),
                fmt6(spec.delta),
                fmt6(report.analytic_bound),
                fmt6(report.value),
                fmt6(report.gamma_plus_eps),
            );
            if let Some(enc) = encoding {
                s.push_str(&format!("out_encoding    {enc}\n"));
            }
            emit(&s)?;
        }
    }
    if !report.certified() {
        return Err(Failure::Compute(anyhow::anyhow!(
            "witness value {} is not certified below gamma + eps = {}",
            fmt17(report.value),
            fmt17(report.gamma_plus_eps)
        )));
    }
    Ok(())
}

fn cmd_minimize(n: usize, k: usize, cfg: MinimizeConfig, format: Format) -> CmdResult {
    if k == 0 || n < k {
        return Err(usage(format!("need n >= k >= 1, got n={n}, k={k}")));
    }
    if cfg.grad_tol.is_nan() || cfg.grad_tol <= 0.0 {
        return Err(usage("--grad-tol must be positive"));
    }
    let res = minimize::<f64>(n, k, &cfg)?;
    match format {
        Format::Json => emit_json(&res.to_json()),
        Format::Csv => emit(&format!(
            "n,k,value,certified_floor,converged\n{n},{k},{},{},{}\n",
            fmt17(res.value),
            fmt17(res.certified_floor),
            res.converged
        )),
        Format::Text => emit(&format!(
            "n               {n}\nk               {k}\nvalue           {}\ncertified_floor {}\nconverged       {}\ngradient_norm   {}\n",
            fmt6(res.value),
            fmt6(res.certified_floor),
            res.converged,
            fmt6(res.gradient_norm)
        )),
    }
}

fn cmd_verify(suite: &str, seed: u64, cases: usize, format: Format) -> CmdResult {
    let suite: Suite = suite.parse().map_err(|e: Error| usage(e.to_string()))?;
    if cases == 0 {
        return Err(usage("--cases must be positive"));
    }
    let report = run_suite(suite, seed, cases);
    match format {
        Format::Json => emit_json(&report.to_json())?,
        Format::Csv => {
            let mut s = String::from("group,cases,failures,worst,passed\n");
            for g in &report.groups {
                s.push_str(&format!("{},{},{},{},{}\n", g.name, g.cases, g.failures, fmt17(g.worst), g.passed()));
            }
            emit(&s)?;
        }
        Format::Text => {
            let mut s = String::new();
            for g in &report.groups {
                let mark = if g.passed() { "PASS" } else { "FAIL" };
                s.push_str(&format!("{mark}  {:<40} {:>7} cases {:>5} failures\n", g.name, g.cases, g.failures));
            }
            s.push_str(&format!("total cases {}\n", report.total_cases()));
            emit(&s)?;
        }
    }
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Compute(anyhow::anyhow!("invariant suite reported failures")))
    }
}

fn configure_threads() -> CmdResult {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| usage(format!("{THREADS_ENV} must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new().num_threads(threads).build_global().context("configuring thread pool")?;
    Ok(())
}

fn run(cli: Cli) -> CmdResult {
    configure_threads()?;
    match cli.command {
        Command::Bounds { k_max, format, tol } => cmd_bounds(k_max, format, tol),
        Command::Tangent { k, tol, format } => cmd_tangent(&k, tol, format),
        Command::Witness { k, eps, out, cap, tol, format } => cmd_witness(k, eps, out, cap, tol, format),
        Command::Minimize { n, k, restarts, seed, max_iters, grad_tol, format } => {
            cmd_minimize(n, k, MinimizeConfig { restarts, seed, max_iters, grad_tol }, format)
        }
        Command::Verify { suite, seed, cases, format } => cmd_verify(&suite, seed, cases, format),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Compute(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
