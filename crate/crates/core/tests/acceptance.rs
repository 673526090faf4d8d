use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use phifem::cli::{run_sweep, RunConfig};
use phifem::manufactured::ConvergenceReport;

mod common;

struct Outcome {
    pass: bool,
    line: String,
}

fn sweep(case: &str) -> ConvergenceReport {
    let t = Instant::now();
    let report = run_sweep(&RunConfig::new(case).unwrap()).unwrap();
    for r in &report.rows {
        eprintln!("  {case} N={:<4} ndofs={:<7} rel_l2={:.4e} rel_h1={:.4e}", r.n, r.ndofs, r.rel_l2, r.rel_h1);
    }
    eprintln!("  {case}: {:.1} s", t.elapsed().as_secs_f64());
    report
}

/// Within a factor 5 of the reference, either way.
fn within5(value: f64, reference: f64) -> bool {
    let r = value / reference;
    (0.2..=5.0).contains(&r)
}

fn value_at(report: &ConvergenceReport, n: usize) -> f64 {
    report.rows.iter().find(|r| r.n == n).map(|r| r.rel_l2).unwrap()
}

fn convergence(name: &str, case: &str, value: Option<(usize, f64)>, min_l2: f64, min_h1: Option<f64>) -> Outcome {
    let report = sweep(case);
    let o = report.orders.unwrap();
    let mut pass = o.l2 >= min_l2 && min_h1.is_none_or(|m| o.h1 >= m);
    let mut line = format!("{name}: orders L2 {:.2} (>= {min_l2})", o.l2);
    if let Some(m) = min_h1 {
        line += &format!(", H1 {:.2} (>= {m})", o.h1);
    }
    if let Some((n, reference)) = value {
        let v = value_at(&report, n);
        pass &= within5(v, reference);
        line += &format!("; rel L2 at N={n} {v:.4e} vs {reference:.4e} (x{:.2})", v / reference);
    }
    Outcome { pass, line }
}

fn heat() -> Outcome {
    let coarse = sweep("heat-dt-h");
    let fine = sweep("heat-dt-h2");
    let (a, b) = (coarse.orders.unwrap(), fine.orders.unwrap());
    let pass = a.l2 >= 0.9 && a.h1 >= 0.9 && b.l2 >= 1.7;
    let (v1, v2) = (value_at(&coarse, 10), value_at(&fine, 10));
    let advisory = if within5(v1, 1.461e-2) && within5(v2, 1.454e-2) { "inside" } else { "outside" };
    Outcome {
        pass,
        line: format!(
            "heat: dt=h orders Linf(L2) {:.2} (>= 0.9), L2(H1) {:.2} (>= 0.9); dt=10h^2 order Linf(L2) {:.2} (>= 1.7); \
             advisory values at N=10 {v1:.3e} / {v2:.3e} vs 1.461e-2 / 1.454e-2, {advisory} the x5 band (T = 1)",
            a.l2, a.h1, b.l2
        ),
    }
}

fn properties() -> Outcome {
    let checks: [(&str, fn()); 9] = [
        ("zero data", common::zero_data_gives_zero_solution_for_every_solver),
        ("affine reproduction", common::direct_scheme_reproduces_affine_fields),
        ("stabilization PSD", common::stabilization_blocks_are_symmetric_psd),
        ("finite-difference oracle", common::manufactured_forces_pass_the_finite_difference_oracle),
        ("classification", common::classification::random_level_sets),
        ("mixed vs dual", common::mixed_with_dirichlet_everywhere_matches_dual),
        ("domain area", common::masked_domain_area_converges_to_the_disc),
        ("determinism", common::repeated_solves_are_bit_identical),
        ("interface flux", common::interface_flux_mismatch_decreases_under_refinement),
    ];
    let failed: Vec<&str> = checks.iter().filter(|(_, f)| catch_unwind(AssertUnwindSafe(f)).is_err()).map(|(n, _)| *n).collect();
    let line = if failed.is_empty() {
        format!("property suite: {} checks, solver residuals <= 1e-9 enforced on every solve", checks.len())
    } else {
        format!("property suite: failed {}", failed.join(", "))
    };
    Outcome { pass: failed.is_empty(), line }
}

#[test]
fn acceptance() {
    let start = Instant::now();
    let outcomes = [
        convergence("direct Dirichlet", "dirichlet-direct", Some((16, 1.5588e-6)), 2.8, Some(1.9)),
        convergence("dual Dirichlet", "dirichlet-dual", Some((16, 1.7928e-4)), 2.8, Some(1.9)),
        convergence("mixed, junctions resolved", "mixed", Some((16, 1.9163e-4)), 2.7, Some(1.9)),
        convergence("mixed, junctions unresolved", "mixed-unresolved", None, 2.7, Some(1.9)),
        convergence("interface", "interface", Some((10, 5.676e-5)), 2.7, Some(1.9)),
        convergence("crack, tip resolved", "crack", Some((40, 1.0419e-5)), 2.7, None),
        convergence("crack, tip unresolved", "crack-unresolved", None, 2.7, None),
        heat(),
        properties(),
        Outcome {
            pass: true,
            line: format!("timings: recorded in the reports only, no fitted baseline to compare ({:.0} s total)", start.elapsed().as_secs_f64()),
        },
    ];
    // Straight to the stdout handle so the summary survives output capture.
    let mut out = std::io::stdout().lock();
    writeln!(out).unwrap();
    for o in &outcomes {
        writeln!(out, "{} {}", if o.pass { "PASS" } else { "FAIL" }, o.line).unwrap();
    }
    drop(out);
    assert!(outcomes.iter().all(|o| o.pass));
}
