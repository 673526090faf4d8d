//! Case registry and refinement sweeps behind the `phifem` binary.
//!
//! `phifem run --case NAME --N 16,32,64` solves the case on each background
//! mesh, measures the relative errors against the manufactured solution and
//! writes `NAME.csv` / `NAME.json` (rows plus fitted orders) to `--out`.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::elasticity::SchemeParams;
use crate::error::{Error, Result};
use crate::levelset::interpolate_on_background;
use crate::manufactured::{
    case_crack, case_dirichlet, case_heat, case_interface, case_mixed, compute_errors, heat_step_errors, ConvergenceReport,
    ElasticCase, ReportRow, TimeErrors, FD_TOL,
};
use crate::mesh::BackgroundMesh;
use crate::schemes::crack::solve_crack;
use crate::schemes::dirichlet::{solve_dirichlet_direct, solve_dirichlet_dual};
use crate::schemes::heat::{solve_heat_with, HeatProblem};
use crate::schemes::interface::{solve_interface, InterfaceProblem};
use crate::schemes::mixed::solve_mixed;
use crate::schemes::{Diagnostics, ElasticProblem};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    DirichletDirect,
    DirichletDual,
    Mixed,
    Interface,
    Crack,
    Heat { dt_h2: bool },
}

#[derive(Debug, Clone, Copy)]
pub struct CaseInfo {
    pub name: &'static str,
    pub description: &'static str,
    pub scheme: Scheme,
    pub degree: usize,
    pub default_n: &'static [usize],
}

pub const CASES: [CaseInfo; 9] = [
    CaseInfo {
        name: "dirichlet-direct",
        description: "circle, u = u_g + phi w, pointwise u_g",
        scheme: Scheme::DirichletDirect,
        degree: 2,
        default_n: &[16, 32, 64, 128],
    },
    CaseInfo {
        name: "dirichlet-dual",
        description: "circle, multiplier p on the strip",
        scheme: Scheme::DirichletDual,
        degree: 2,
        default_n: &[16, 32, 64, 128],
    },
    CaseInfo {
        name: "mixed",
        description: "circle, Dirichlet for x > 0.5, Neumann for x < 0.5, junctions on grid lines",
        scheme: Scheme::Mixed,
        degree: 2,
        default_n: &[16, 32, 64, 128],
    },
    CaseInfo {
        name: "mixed-unresolved",
        description: "as mixed on odd N, junctions inside cells",
        scheme: Scheme::Mixed,
        degree: 2,
        default_n: &[17, 33, 65, 129],
    },
    CaseInfo {
        name: "interface",
        description: "radial inclusion R = 0.3, E = 7 inside, 2.28 outside",
        scheme: Scheme::Interface,
        degree: 2,
        default_n: &[10, 20, 40, 80],
    },
    CaseInfo {
        name: "crack",
        description: "sine crack, tip on a grid line",
        scheme: Scheme::Crack,
        degree: 2,
        default_n: &[10, 20, 40, 80],
    },
    CaseInfo {
        name: "crack-unresolved",
        description: "sine crack on odd N, tip inside cells",
        scheme: Scheme::Crack,
        degree: 2,
        default_n: &[11, 21, 41, 81],
    },
    CaseInfo {
        name: "heat-dt-h",
        description: "heat on the circle, implicit Euler with dt = h (errors: Linf(L2), L2(H1))",
        scheme: Scheme::Heat { dt_h2: false },
        degree: 1,
        default_n: &[10, 20, 40, 80],
    },
    CaseInfo {
        name: "heat-dt-h2",
        description: "heat on the circle, implicit Euler with dt = 10 h^2 (errors: Linf(L2), L2(H1))",
        scheme: Scheme::Heat { dt_h2: true },
        degree: 1,
        default_n: &[10, 20, 40, 80],
    },
];

pub fn find_case(name: &str) -> Result<&'static CaseInfo> {
    CASES.iter().find(|c| c.name == name).ok_or_else(|| Error::UnknownCase(name.to_string()))
}

/// Weights of the heat scheme and the final time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HeatParams {
    pub sigma_d: f64,
    pub sigma: f64,
    pub t_final: f64,
}

impl Default for HeatParams {
    fn default() -> Self {
        Self { sigma_d: 20.0, sigma: 20.0, t_final: 1.0 }
    }
}

impl HeatParams {
    pub fn set(&mut self, key: &str, value: f64) -> Result<()> {
        if !(value > 0.0) || !value.is_finite() {
            return Err(Error::InvalidParameter(format!("{key} must be a positive number, got {value}")));
        }
        let slot = match key {
            "sigma_d" => &mut self.sigma_d,
            "sigma" => &mut self.sigma,
            "t_final" => &mut self.t_final,
            _ => return Err(Error::InvalidParameter(format!("unknown heat parameter {key}"))),
        };
        *slot = value;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(untagged)]
pub enum CaseParams {
    Elastic(SchemeParams),
    Heat(HeatParams),
}

impl CaseParams {
    pub fn defaults(case: &CaseInfo) -> Self {
        match case.scheme {
            Scheme::Heat { .. } => CaseParams::Heat(HeatParams::default()),
            _ => CaseParams::Elastic(SchemeParams::default()),
        }
    }

    pub fn set(&mut self, key: &str, value: f64) -> Result<()> {
        match self {
            CaseParams::Elastic(p) => p.set(key, value),
            CaseParams::Heat(p) => p.set(key, value),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "phifem", version, about = "Level-set based unfitted finite elements: convergence sweeps")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a refinement sweep and write the reports.
    Run(RunArgs),
    /// Print the registered cases with their defaults.
    ListCases,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub case: String,
    /// Background mesh sizes (cells per side), comma separated.
    #[arg(long = "N", value_delimiter = ',')]
    pub n: Vec<usize>,
    #[arg(long)]
    pub degree: Option<usize>,
    /// Parameter override `key=value`, repeatable.
    #[arg(long = "param")]
    pub params: Vec<String>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Write the JSON summary (both formats are written when neither flag is given).
    #[arg(long)]
    pub json: bool,
    #[arg(long)]
    pub csv: bool,
    /// Seed of the finite-difference oracle points.
    #[arg(long, default_value_t = 0x5eed)]
    pub seed: u64,
    /// Sweep levels solved concurrently.
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub case: &'static CaseInfo,
    pub ns: Vec<usize>,
    pub degree: usize,
    pub params: CaseParams,
    pub seed: u64,
    pub threads: usize,
}

impl RunConfig {
    pub fn new(case: &str) -> Result<Self> {
        let case = find_case(case)?;
        Ok(Self { case, ns: case.default_n.to_vec(), degree: case.degree, params: CaseParams::defaults(case), seed: 0x5eed, threads: 1 })
    }

    pub fn from_args(args: &RunArgs) -> Result<Self> {
        let mut cfg = Self::new(&args.case)?;
        if !args.n.is_empty() {
            cfg.ns = args.n.clone();
        }
        if let Some(k) = args.degree {
            cfg.degree = k;
        }
        for kv in &args.params {
            let (k, v) = kv.split_once('=').ok_or_else(|| Error::InvalidParameter(format!("expected key=value, got `{kv}`")))?;
            let v: f64 = v.trim().parse().map_err(|_| Error::InvalidParameter(format!("`{v}` is not a number")))?;
            cfg.params.set(k.trim(), v)?;
        }
        cfg.seed = args.seed;
        cfg.threads = args.threads;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(&n) = self.ns.iter().find(|&&n| n < 2) {
            return Err(Error::InvalidParameter(format!("N must be >= 2, got {n}")));
        }
        if self.ns.is_empty() {
            return Err(Error::InvalidParameter("empty N list".into()));
        }
        if self.degree == 0 || self.degree > 2 {
            return Err(Error::InvalidParameter(format!("degree must be 1 or 2, got {}", self.degree)));
        }
        if self.threads == 0 {
            return Err(Error::InvalidParameter("threads must be >= 1".into()));
        }
        Ok(())
    }

    /// Effective parameters, defaults included.
    pub fn echo(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self.params).expect("parameters serialize");
        v["degree"] = self.degree.into();
        v["seed"] = self.seed.into();
        if let Scheme::Heat { dt_h2 } = self.case.scheme {
            v["dt"] = (if dt_h2 { "10 h^2" } else { "h" }).into();
        }
        v
    }
}

fn elastic_case(scheme: Scheme) -> ElasticCase {
    match scheme {
        Scheme::DirichletDirect | Scheme::DirichletDual => case_dirichlet(),
        Scheme::Mixed => case_mixed(),
        Scheme::Interface => case_interface(),
        Scheme::Crack => case_crack(),
        Scheme::Heat { .. } => unreachable!("heat has its own case"),
    }
}

/// Worst finite-difference residual of the case's body force; the sweep refuses
/// to start above [`FD_TOL`].
pub fn oracle_gate(cfg: &RunConfig) -> Result<f64> {
    let r = match cfg.case.scheme {
        Scheme::Heat { .. } => case_heat().fd_residual_seeded(cfg.seed),
        s => elastic_case(s).fd_residual_seeded(cfg.seed),
    };
    if !(r <= FD_TOL) {
        return Err(Error::InvalidParameter(format!("body force of {} fails the finite-difference check: {r:.2e}", cfg.case.name)));
    }
    Ok(r)
}

fn row(n: usize, errs: (f64, f64), d: &Diagnostics) -> ReportRow {
    ReportRow { n, h: BackgroundMesh::h_of(n), ndofs: d.ndofs, rel_l2: errs.0, rel_h1: errs.1, assemble_s: d.assemble_s, solve_s: d.solve_s }
}

/// Solves one refinement level and measures its errors.
pub fn run_level(cfg: &RunConfig, n: usize) -> Result<ReportRow> {
    let k = cfg.degree;
    match (cfg.case.scheme, cfg.params) {
        (Scheme::Heat { dt_h2 }, CaseParams::Heat(hp)) => {
            let c = case_heat();
            let h = BackgroundMesh::h_of(n);
            let dt = if dt_h2 { 10.0 * h * h } else { h };
            let pb = HeatProblem {
                n,
                degree: k,
                sigma_d: hp.sigma_d,
                sigma: hp.sigma,
                phi: c.phi.as_ref(),
                f: c.f.clone(),
                ug: c.ug.clone(),
                ug_jet: Some(c.ug_jet.clone()),
                u0: c.u0.clone(),
            };
            let phi_h = interpolate_on_background(c.phi.as_ref(), Arc::new(BackgroundMesh::new(n)?), k)?;
            let mut acc = TimeErrors::default();
            let (_, d) = solve_heat_with(&pb, dt, hp.t_final, |s| {
                if s.t > 0.0 {
                    acc.push(&heat_step_errors(s, &c, &phi_h)?);
                }
                Ok(())
            })?;
            Ok(row(n, acc.finish()?, &d))
        }
        (scheme, CaseParams::Elastic(params)) => {
            let c = elastic_case(scheme);
            let sol = match scheme {
                Scheme::Interface => solve_interface(&InterfaceProblem {
                    n,
                    degree: k,
                    lame: c.lame,
                    params,
                    phi: c.phi.as_ref(),
                    f: c.f.clone(),
                    ug: c.ug.clone(),
                })?,
                _ => {
                    let pb = ElasticProblem {
                        n,
                        degree: k,
                        lame: c.lame[0],
                        params,
                        phi: c.phi.as_ref(),
                        psi: c.psi.as_deref(),
                        f: c.f.clone(),
                        ug: c.ug.clone(),
                        ug_jet: c.ug_jet.clone(),
                        g: c.g.clone(),
                    };
                    match scheme {
                        Scheme::DirichletDirect => solve_dirichlet_direct(&pb)?,
                        Scheme::DirichletDual => solve_dirichlet_dual(&pb)?,
                        Scheme::Mixed => solve_mixed(&pb)?,
                        _ => solve_crack(&pb)?,
                    }
                }
            };
            let phi_h = interpolate_on_background(c.phi.as_ref(), sol.u.mesh().clone(), k)?;
            // Interface and crack problems live on the whole box.
            let mask = !matches!(scheme, Scheme::Interface | Scheme::Crack);
            Ok(row(n, compute_errors(&sol.u, &c, &phi_h, mask)?, &sol.diagnostics))
        }
        _ => Err(Error::InvalidParameter("parameters do not match the case".into())),
    }
}

/// Runs every level (concurrently when `threads > 1`), rows ordered by N
/// regardless of completion order, then fits the orders.
pub fn run_sweep(cfg: &RunConfig) -> Result<ConvergenceReport> {
    cfg.validate()?;
    oracle_gate(cfg)?;
    let mut ns = cfg.ns.clone();
    ns.sort_unstable();
    ns.dedup();
    let mut results: Vec<Option<Result<ReportRow>>> = (0..ns.len()).map(|_| None).collect();
    for chunk in ns.iter().zip(results.iter_mut()).collect::<Vec<_>>().chunks_mut(cfg.threads) {
        std::thread::scope(|s| {
            for (n, slot) in chunk.iter_mut() {
                let n = **n;
                s.spawn(move || {
                    let r = run_level(cfg, n);
                    if let Ok(row) = &r {
                        log::info!("{} N={n}: rel_l2={:.4e} rel_h1={:.4e} ndofs={}", cfg.case.name, row.rel_l2, row.rel_h1, row.ndofs);
                    }
                    **slot = Some(r);
                });
            }
        });
    }
    let mut report = ConvergenceReport::new(cfg.case.name, cfg.echo());
    for r in results {
        report.rows.push(r.expect("every level ran")?);
    }
    if report.rows.len() >= 2 {
        report.fit()?;
    }
    Ok(report)
}

/// Writes `<case>.csv` and/or `<case>.json` under `out`; both when neither flag is set.
pub fn write_reports(report: &ConvergenceReport, out: &Path, csv: bool, json: bool) -> Result<Vec<PathBuf>> {
    let (csv, json) = if csv || json { (csv, json) } else { (true, true) };
    fs::create_dir_all(out)?;
    let mut written = Vec::new();
    if csv {
        let p = out.join(format!("{}.csv", report.case));
        let mut buf = Vec::new();
        report.write_csv(&mut buf)?;
        fs::write(&p, buf)?;
        written.push(p);
    }
    if json {
        let p = out.join(format!("{}.json", report.case));
        fs::write(&p, report.to_json()? + "\n")?;
        written.push(p);
    }
    Ok(written)
}

pub fn list_cases() -> String {
    let mut s = String::new();
    for c in &CASES {
        let params = serde_json::to_string(&CaseParams::defaults(c)).expect("parameters serialize");
        let ns: Vec<String> = c.default_n.iter().map(|n| n.to_string()).collect();
        s += &format!("{:<17} k={} N={:<14} {}\n{:<17} defaults {params}\n", c.name, c.degree, ns.join(","), c.description, "");
    }
    s
}

#[derive(Serialize)]
struct Failure<'a> {
    case: &'a str,
    params: serde_json::Value,
    error: String,
}

/// Parses `args` (program name first), runs the command and returns the exit
/// code: 0 on success, 1 on a solver or validation failure during the sweep,
/// 2 on usage errors (nothing is written then).
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match cli.command {
        Command::ListCases => {
            print!("{}", list_cases());
            0
        }
        Command::Run(args) => {
            let cfg = match RunConfig::from_args(&args) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return 2;
                }
            };
            match run_sweep(&cfg).and_then(|r| write_reports(&r, &args.out, args.csv, args.json).map(|w| (r, w))) {
                Ok((report, written)) => {
                    if let Some(o) = report.orders {
                        println!("{}: fitted orders L2 {:.2}, H1 {:.2}", report.case, o.l2, o.h1);
                    }
                    for p in written {
                        println!("wrote {}", p.display());
                    }
                    0
                }
                Err(e) => {
                    let f = Failure { case: cfg.case.name, params: cfg.echo(), error: e.to_string() };
                    println!("{}", serde_json::to_string_pretty(&f).expect("failure serializes"));
                    1
                }
            }
        }
    }
}
