//! Command-line front end: argument parsing, command execution and report output.

use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::finite_dpp::{truncate, KernelMatrix, Sampler, Window};
use crate::gamma_kernel::{
    basis_g_run, kernel_series, make_params, modified_kernel_entry, xi_kernel, AdmissibleParams, GammaKernel,
    LatticePoint,
};
use crate::palm::{palm_idempotency, verify_hierarchy_mc_weightings, verify_range_inclusion_with, PalmContext, Weighting};
use crate::specfun::Complex;
use crate::verify::{run_battery, unknown_checks, BatteryConfig};

pub const SCHEMA: u32 = 1;

#[derive(Debug, Parser)]
#[command(name = "gamma-dpp", version, about = "Gamma-kernel determinantal point processes and their Palm measures")]
pub struct Cli {
    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tabulate kernel entries, the density or basis functions on a window.
    Eval(EvalArgs),
    /// Draw configurations from a truncated kernel.
    Sample(SampleArgs),
    /// Palm-measure reports: range inclusion, idempotency and Monte Carlo reweighting.
    Palm(PalmArgs),
    /// Run the identity battery.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    /// Output file (default: standard output).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ParamArgs {
    /// Parameter z, written `re`, `re+imi` or `re-imi`.
    #[arg(long, allow_hyphen_values = true)]
    pub z: String,
    /// Parameter z' (default: conjugate of z when z is not real).
    #[arg(long, allow_hyphen_values = true)]
    pub zp: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Table {
    Kernel,
    Modified,
    Series,
    Rho1,
    Basis,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long, default_value_t = 10)]
    pub radius: usize,
    #[arg(long, value_enum, default_value = "kernel")]
    pub table: Table,
    /// Number of basis functions for `--table basis`.
    #[arg(long, default_value_t = 3)]
    pub m: usize,
    /// Use the z-measure kernel at this ξ ∈ (0,1) instead of the gamma kernel.
    #[arg(long)]
    pub xi: Option<f64>,
    /// Tolerance for series and Fourier evaluation.
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KernelKind {
    Gamma,
    Sine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SampleTable {
    Samples,
    Density,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long, value_enum, default_value = "gamma")]
    pub kernel: KernelKind,
    #[arg(long, allow_hyphen_values = true)]
    pub z: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub zp: Option<String>,
    /// Bandwidth of the discrete sine kernel, in (0, π).
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 30)]
    pub radius: usize,
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// CSV layout: one row per occupied site, or per-site empirical density.
    #[arg(long, value_enum, default_value = "samples")]
    pub table: SampleTable,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct PalmArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    /// Conditioning site, as a half-integer coordinate.
    #[arg(long, default_value_t = 0.5, allow_hyphen_values = true)]
    pub p: f64,
    /// Window radius for range inclusion and idempotency.
    #[arg(long, default_value_t = 200)]
    pub radius: usize,
    #[arg(long, default_value_t = 3)]
    pub m: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub tol: f64,
    /// Monte Carlo draws (0 skips the reweighting check).
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 30)]
    pub mc_radius: usize,
    /// Pattern sites for the Monte Carlo check, comma separated coordinates.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "-1.5,-0.5,1.5,2.5")]
    pub sites: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Restrict to these checks (repeatable or comma separated).
    #[arg(long, value_delimiter = ',')]
    pub only: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Sample count for the Monte Carlo checks.
    #[arg(long)]
    pub samples: Option<usize>,
    #[command(flatten)]
    pub output: OutputArgs,
}

/// Parses `re`, `imi`, `re+imi` or `re-imi` (also `j` for the imaginary unit).
pub fn parse_complex(s: &str) -> std::result::Result<Complex, String> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let bad = || format!("cannot parse complex number '{s}'");
    if t.is_empty() {
        return Err(bad());
    }
    let Some(body) = t.strip_suffix('i').or_else(|| t.strip_suffix('j')) else {
        return t.parse::<f64>().map(|re| Complex::new(re, 0.0)).map_err(|_| bad());
    };
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    let imag = |x: &str| -> std::result::Result<f64, String> {
        match x {
            "" | "+" => Ok(1.0),
            "-" => Ok(-1.0),
            _ => x.parse::<f64>().map_err(|_| bad()),
        }
    };
    match split {
        Some(k) => Ok(Complex::new(body[..k].parse::<f64>().map_err(|_| bad())?, imag(&body[k..])?)),
        None => Ok(Complex::new(0.0, imag(body)?)),
    }
}

/// Builds admissible parameters; complementary pairs are put in increasing order.
pub fn params_from(z: &str, zp: Option<&str>) -> Result<AdmissibleParams> {
    let z = parse_complex(z).map_err(Error::NotAdmissible)?;
    let zp = match zp {
        Some(s) => parse_complex(s).map_err(Error::NotAdmissible)?,
        None if z.im != 0.0 => z.conj(),
        None => return Err(Error::NotAdmissible("--zp is required for real z".into())),
    };
    Ok(make_params(z, zp)?.ordered())
}

fn params_json(p: &AdmissibleParams) -> Value {
    json!({ "z": [p.z().re, p.z().im], "zp": [p.zp().re, p.zp().im], "series": format!("{:?}", p.series()) })
}

/// Output of a command: a JSON document, its CSV rendering and whether all checks passed.
pub struct Report {
    pub json: Value,
    pub csv: String,
    pub passed: bool,
}

fn emit(report: &Report, output: &OutputArgs) -> std::io::Result<()> {
    let text = match output.format {
        Format::Json => serde_json::to_string_pretty(&report.json).expect("reports serialize") + "\n",
        Format::Csv => report.csv.clone(),
    };
    match &output.out {
        Some(path) => std::fs::write(path, text),
        None => std::io::stdout().lock().write_all(text.as_bytes()),
    }
}

fn complex_cells(w: Complex) -> String {
    format!("{:?},{:?}", w.re, w.im)
}

pub fn cmd_eval(a: &EvalArgs) -> Result<Report> {
    let p = params_from(&a.params.z, a.params.zp.as_deref())?;
    let window = Window::symmetric(a.radius);
    let sites = window.sites();
    let mut csv = String::new();
    let table: Value;
    if let Some(xi) = a.xi {
        let k = xi_kernel(&p, xi, sites, a.tol)?;
        csv.push_str("x,y,re,im\n");
        for (i, x) in sites.iter().enumerate() {
            for (j, y) in sites.iter().enumerate() {
                let _ = writeln!(csv, "{},{},{}", x, y, complex_cells(k[(i, j)]));
            }
        }
        table = json!((0..sites.len()).map(|i| (0..sites.len()).map(|j| [k[(i, j)].re, k[(i, j)].im]).collect::<Vec<_>>()).collect::<Vec<_>>());
    } else {
        match a.table {
            Table::Kernel => {
                let k = GammaKernel::new(p).truncate(&window)?;
                csv.push_str("x,y,k\n");
                for x in sites {
                    for y in sites {
                        let _ = writeln!(csv, "{},{},{:?}", x, y, k.get(*x, *y).unwrap());
                    }
                }
                let m = k.matrix();
                table = json!((0..m.nrows()).map(|i| m.row(i).iter().copied().collect::<Vec<f64>>()).collect::<Vec<_>>());
            }
            Table::Modified | Table::Series => {
                csv.push_str("x,y,re,im,bound\n");
                let mut rows = Vec::new();
                for &x in sites {
                    let mut row = Vec::new();
                    for &y in sites {
                        let (v, bound) = if a.table == Table::Series {
                            let s = kernel_series(&p, x, y, a.tol)?;
                            (s.value, s.bound)
                        } else {
                            (modified_kernel_entry(&p, x, y)?, 0.0)
                        };
                        let _ = writeln!(csv, "{},{},{},{:?}", x, y, complex_cells(v), bound);
                        row.push(json!([v.re, v.im]));
                    }
                    rows.push(row);
                }
                table = json!(rows);
            }
            Table::Rho1 => {
                let k = GammaKernel::new(p);
                csv.push_str("x,rho1\n");
                let mut vals = Vec::new();
                for &x in sites {
                    let r = k.rho1(x)?;
                    let _ = writeln!(csv, "{},{:?}", x, r);
                    vals.push(r);
                }
                table = json!(vals);
            }
            Table::Basis => {
                csv.push_str("x,m,re,im\n");
                let mut rows = Vec::new();
                for &x in sites {
                    let g = basis_g_run(&p, a.m, x)?;
                    for (m, v) in g.iter().enumerate() {
                        let _ = writeln!(csv, "{},{},{}", x, m, complex_cells(*v));
                    }
                    rows.push(g.iter().map(|v| [v.re, v.im]).collect::<Vec<_>>());
                }
                table = json!(rows);
            }
        }
    }
    let json = json!({
        "schema": SCHEMA,
        "command": "eval",
        "params": params_json(&p),
        "radius": a.radius,
        "xi": a.xi,
        "table": format!("{:?}", a.table).to_lowercase(),
        "sites": sites.iter().map(|x| x.x()).collect::<Vec<_>>(),
        "values": table,
    });
    Ok(Report { json, csv, passed: true })
}

/// `sin(α(x−y))/(π(x−y))`, with `α/π` on the diagonal.
pub fn sine_kernel(alpha: f64, window: &Window) -> Result<KernelMatrix> {
    if !(0.0 < alpha && alpha < std::f64::consts::PI) {
        return Err(Error::NotAdmissible(format!("alpha = {alpha} outside (0, π)")));
    }
    truncate(
        |x: LatticePoint, y: LatticePoint| {
            let d = (x.0 - y.0) as f64;
            Ok(if d == 0.0 { alpha / std::f64::consts::PI } else { (alpha * d).sin() / (std::f64::consts::PI * d) })
        },
        window,
    )
}

pub fn cmd_sample(a: &SampleArgs) -> Result<Report> {
    let window = Window::symmetric(a.radius);
    let (kernel, params) = match a.kernel {
        KernelKind::Gamma => {
            let z = a.z.as_deref().ok_or_else(|| Error::NotAdmissible("--z is required for the gamma kernel".into()))?;
            let p = params_from(z, a.zp.as_deref())?;
            (GammaKernel::new(p).truncate(&window)?, params_json(&p))
        }
        KernelKind::Sine => (sine_kernel(a.alpha, &window)?, json!({ "alpha": a.alpha })),
    };
    let sampler = Sampler::new(&kernel)?;
    let draws = sampler.sample_many(a.seed, a.samples);
    let n = a.samples.max(1) as f64;
    let mut counts = vec![0usize; window.len()];
    for omega in &draws {
        for x in omega.occupied() {
            counts[window.index_of(*x).expect("sample inside window")] += 1;
        }
    }
    let density: Vec<Value> = window
        .sites()
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let exact = kernel.matrix()[(i, i)];
            let empirical = counts[i] as f64 / n;
            let sigma = (exact * (1.0 - exact) / n).sqrt();
            json!({ "x": x.x(), "empirical": empirical, "exact": exact, "sigma": sigma })
        })
        .collect();
    let mut csv = String::new();
    match a.table {
        SampleTable::Samples => {
            csv.push_str("sample,x\n");
            for (i, omega) in draws.iter().enumerate() {
                for x in omega.occupied() {
                    let _ = writeln!(csv, "{i},{x}");
                }
            }
        }
        SampleTable::Density => {
            csv.push_str("x,empirical,exact,sigma\n");
            for d in &density {
                let _ = writeln!(csv, "{},{:?},{:?},{:?}", d["x"], d["empirical"].as_f64().unwrap(), d["exact"].as_f64().unwrap(), d["sigma"].as_f64().unwrap());
            }
        }
    }
    let json = json!({
        "schema": SCHEMA,
        "command": "sample",
        "kernel": format!("{:?}", a.kernel).to_lowercase(),
        "params": params,
        "radius": a.radius,
        "seed": a.seed,
        "samples": draws.iter().map(|o| o.occupied().iter().map(|x| x.x()).collect::<Vec<_>>()).collect::<Vec<_>>(),
        "density": density,
    });
    Ok(Report { json, csv, passed: true })
}

pub fn cmd_palm(a: &PalmArgs) -> Result<Report> {
    let p = params_from(&a.params.z, a.params.zp.as_deref())?;
    let site = LatticePoint::from_coordinate(a.p)
        .ok_or_else(|| Error::NotAdmissible(format!("p = {} is not a half-integer", a.p)))?;
    let ctx = PalmContext::new(p, site)?;
    let range = verify_range_inclusion_with(&ctx, a.m, a.radius, 200_000, a.tol)?;
    let idem = palm_idempotency(&ctx, a.radius, a.tol)?;
    let mut passed = range.passed && idem.passed;
    let mut csv = String::from("check,m,value,tolerance,passed\n");
    for r in &range.rows {
        let _ = writeln!(csv, "range_inclusion,{},{:?},{:?},{}", r.m, r.residual, a.tol, r.passed);
    }
    let _ = writeln!(csv, "negative_control,,{:?},,", range.negative_control);
    let _ = writeln!(csv, "idempotency,,{:?},{:?},{}", idem.residual, a.tol, idem.passed);
    let mut hierarchy = Value::Null;
    if a.samples > 0 {
        let t: Vec<LatticePoint> = a
            .sites
            .iter()
            .map(|&x| LatticePoint::from_coordinate(x).ok_or_else(|| Error::NotAdmissible(format!("site {x} is not a half-integer"))))
            .collect::<Result<_>>()?;
        let reports = verify_hierarchy_mc_weightings(&ctx, a.mc_radius, &t, a.samples, a.seed, &[Weighting::PsiCheck, Weighting::Unit])?;
        let ablation_fails = !reports[1].passed;
        passed &= reports[0].passed && ablation_fails;
        let _ = writeln!(csv, "hierarchy_max_abs_z,,{:?},4.0,{}", reports[0].max_abs_z, reports[0].passed);
        let _ = writeln!(csv, "hierarchy_total_variation,,{:?},,", reports[0].total_variation);
        let _ = writeln!(csv, "ablation_max_abs_z,,{:?},4.0,{}", reports[1].max_abs_z, ablation_fails);
        hierarchy = json!({ "reweighted": reports[0], "ablation": reports[1], "ablation_rejected": ablation_fails });
    }
    let json = json!({
        "schema": SCHEMA,
        "command": "palm",
        "params": params_json(&p),
        "p": a.p,
        "rho1_at_p": ctx.rho_p,
        "range_inclusion": range,
        "idempotency": idem,
        "hierarchy": hierarchy,
        "passed": passed,
    });
    Ok(Report { json, csv, passed })
}

pub fn cmd_verify(a: &VerifyArgs) -> Result<Report> {
    let unknown = unknown_checks(&a.only);
    if !unknown.is_empty() {
        return Err(Error::NotAdmissible(format!("unknown checks: {}", unknown.join(", "))));
    }
    let mut config = BatteryConfig::default();
    if !a.only.is_empty() {
        config.only = Some(a.only.clone());
    }
    if let Some(seed) = a.seed {
        config.seed = seed;
    }
    config.samples = a.samples;
    let results = run_battery(&config);
    let passed = results.iter().all(|r| r.passed);
    let mut csv = String::from("name,params,observed_error,tolerance,passed,runtime_ms\n");
    for r in &results {
        let params = r.params.to_string().replace('"', "\"\"");
        let _ = writeln!(csv, "{},\"{}\",{:?},{:?},{},{}", r.name, params, r.observed_error, r.tolerance, r.passed, r.runtime_ms);
    }
    let json = json!({
        "schema": SCHEMA,
        "command": "verify",
        "seed": config.seed,
        "passed": passed,
        "checks": results,
    });
    Ok(Report { json, csv, passed })
}

/// Runs the CLI and returns the process exit code: 0 pass, 1 check failure,
/// 2 usage or parameter error.
pub fn run(cli: Cli) -> i32 {
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return 2;
        }
    }
    let (result, output) = match &cli.command {
        Command::Eval(a) => (cmd_eval(a), &a.output),
        Command::Sample(a) => (cmd_sample(a), &a.output),
        Command::Palm(a) => (cmd_palm(a), &a.output),
        Command::Verify(a) => (cmd_verify(a), &a.output),
    };
    match result {
        Ok(report) => {
            if let Err(e) = emit(&report, output) {
                eprintln!("error: {e}");
                return 2;
            }
            if report.passed {
                0
            } else {
                1
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_parsing() {
        let c = |re, im| Complex::new(re, im);
        assert_eq!(parse_complex("0.4+0.7i"), Ok(c(0.4, 0.7)));
        assert_eq!(parse_complex("0.4-0.7i"), Ok(c(0.4, -0.7)));
        assert_eq!(parse_complex("-1.3+0.4i"), Ok(c(-1.3, 0.4)));
        assert_eq!(parse_complex("0.3"), Ok(c(0.3, 0.0)));
        assert_eq!(parse_complex("-2i"), Ok(c(0.0, -2.0)));
        assert_eq!(parse_complex("1e-3+2e-1i"), Ok(c(1e-3, 0.2)));
        assert_eq!(parse_complex("1-i"), Ok(c(1.0, -1.0)));
        assert!(parse_complex("abc").is_err());
        assert!(parse_complex("").is_err());
    }

    #[test]
    fn params_normalization() {
        let p = params_from("0.6", Some("0.2")).unwrap();
        assert_eq!((p.z().re, p.zp().re), (0.2, 0.6));
        let q = params_from("0.4+0.7i", None).unwrap();
        assert_eq!(q.zp(), Complex::new(0.4, -0.7));
        assert!(params_from("0.2", Some("1.6")).is_err());
        assert!(params_from("0.2", None).is_err());
    }

    #[test]
    fn sine_kernel_is_a_projection_symbol() {
        let k = sine_kernel(1.0, &Window::symmetric(5)).unwrap();
        assert!((k.matrix()[(0, 0)] - 1.0 / std::f64::consts::PI).abs() < 1e-15);
        assert!(k.eigenvalues().iter().all(|&e| (-1e-12..=1.0 + 1e-12).contains(&e)));
        assert!(sine_kernel(4.0, &Window::symmetric(5)).is_err());
    }
}
