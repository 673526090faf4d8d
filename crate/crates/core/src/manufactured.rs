//! Manufactured solutions, error norms over the physical domain and
//! convergence-order fitting.
//!
//! Body forces are closed forms; [`ElasticCase::fd_residual`] and
//! [`HeatCase::fd_residual`] check them against central differences of the
//! exact fields before any sweep is trusted.

use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::Serialize;

use crate::elasticity::{stress, LameParams};
use crate::error::{Error, Result};
use crate::fe::element::{CellGeometry, Jet};
use crate::fe::quadrature::TriangleRule;
use crate::fe::space::FeFunction;
use crate::levelset::{circle_levelset, crack_levelsets, interface_levelset, levelset_jet, mixed_secondary_levelset, LevelSet};
use crate::schemes::heat::{HeatStep, ScalarJetTimeFn, ScalarTimeFn};
use crate::schemes::{Reconstruction, VecFn, VecJetFn};

/// Gradient of a vector field, row-major `[i][j] = d_j u_i`.
pub type GradFn = Arc<dyn Fn([f64; 2]) -> [[f64; 2]; 2] + Send + Sync>;
pub type ScalarGradTimeFn = Arc<dyn Fn([f64; 2], f64) -> [f64; 2] + Send + Sync>;

/// Relative tolerance of the finite-difference oracle.
pub const FD_TOL: f64 = 1e-5;
const FD_POINTS: usize = 100;
const FD_SEED: u64 = 0x5eed;

#[derive(Clone)]
pub struct ElasticCase {
    pub tag: &'static str,
    pub phi: Arc<dyn LevelSet>,
    pub psi: Option<Arc<dyn LevelSet>>,
    /// Materials of side 1 (`phi > 0`) and side 2; equal for one material.
    pub lame: [LameParams; 2],
    pub u_ex: VecFn,
    pub grad_u_ex: GradFn,
    pub f: VecFn,
    pub ug: VecFn,
    /// `ug` with its derivatives, when available in closed form.
    pub ug_jet: Option<VecJetFn>,
    pub g: VecFn,
}

fn sin_exp() -> (VecFn, GradFn) {
    let u: VecFn = Arc::new(|[x, y]: [f64; 2]| [x.sin() * y.exp(), y.sin() * x.exp()]);
    let g: GradFn = Arc::new(|[x, y]: [f64; 2]| {
        [[x.cos() * y.exp(), x.sin() * y.exp()], [y.sin() * x.exp(), y.cos() * x.exp()]]
    });
    (u, g)
}

fn sin_exp_jets([x, y]: [f64; 2]) -> [Jet; 2] {
    let (sx, cx, ex) = (x.sin(), x.cos(), x.exp());
    let (sy, cy, ey) = (y.sin(), y.cos(), y.exp());
    [
        Jet { val: sx * ey, grad: [cx * ey, sx * ey], hess: [[-sx * ey, cx * ey], [cx * ey, sx * ey]] },
        Jet { val: sy * ex, grad: [sy * ex, cy * ex], hess: [[sy * ex, cy * ex], [cy * ex, -sy * ex]] },
    ]
}

/// `-div sigma` of the sine-exponential field (both components are harmonic).
fn sin_exp_force(l: LameParams) -> VecFn {
    let c = l.mu + l.lambda;
    Arc::new(move |[x, y]: [f64; 2]| {
        [-c * (-x.sin() * y.exp() + y.cos() * x.exp()), -c * (x.cos() * y.exp() - y.sin() * x.exp())]
    })
}

/// `u (1 + phi)`: data that agree with `u` on `{phi = 0}` only.
fn perturbed(u: &VecFn, phi: &Arc<dyn LevelSet>) -> VecFn {
    let (u, phi) = (u.clone(), phi.clone());
    Arc::new(move |p| {
        let s = 1.0 + phi.eval(p);
        let v = u(p);
        [v[0] * s, v[1] * s]
    })
}

/// Jets of the sine-exponential field times `1 + phi`.
fn perturbed_jet(phi: &Arc<dyn LevelSet>) -> VecJetFn {
    let phi = phi.clone();
    Arc::new(move |p| {
        let mut s = levelset_jet(phi.as_ref(), p);
        s.val += 1.0;
        sin_exp_jets(p).map(|j| j.mul(&s))
    })
}

/// `sigma(u) grad(phi)/|grad(phi)| + phi u`: the traction on `{phi = 0}`, perturbed elsewhere.
fn traction(u: &VecFn, grad: &GradFn, phi: &Arc<dyn LevelSet>, l: LameParams) -> VecFn {
    let (u, grad, phi) = (u.clone(), grad.clone(), phi.clone());
    Arc::new(move |p| {
        let s = stress(grad(p), &l);
        let gp = phi.grad(p);
        let n = gp[0].hypot(gp[1]);
        let (ph, v) = (phi.eval(p), u(p));
        let mut out = [0.0; 2];
        for i in 0..2 {
            out[i] = (s[i][0] * gp[0] + s[i][1] * gp[1]) / n + ph * v[i];
        }
        out
    })
}

fn sin_exp_case(tag: &'static str, phi: Arc<dyn LevelSet>, psi: Option<Arc<dyn LevelSet>>) -> ElasticCase {
    let l = LameParams::from_e_nu(2.0, 0.3).expect("valid material");
    let (u, grad) = sin_exp();
    ElasticCase {
        tag,
        lame: [l, l],
        f: sin_exp_force(l),
        ug: perturbed(&u, &phi),
        ug_jet: Some(perturbed_jet(&phi)),
        g: traction(&u, &grad, &phi, l),
        phi,
        psi,
        u_ex: u,
        grad_u_ex: grad,
    }
}

/// Circle of radius `sqrt(2)/4`, `E = 2`, `nu = 0.3`, sine-exponential solution.
pub fn case_dirichlet() -> ElasticCase {
    sin_exp_case("dirichlet", Arc::new(circle_levelset()), None)
}

/// As [`case_dirichlet`] with Dirichlet data for `x > 0.5` and Neumann data for `x < 0.5`.
pub fn case_mixed() -> ElasticCase {
    sin_exp_case("mixed", Arc::new(circle_levelset()), Some(Arc::new(mixed_secondary_levelset())))
}

/// Sine-shaped crack ending at `x = 0.5`, traction data on the crack.
pub fn case_crack() -> ElasticCase {
    let (phi, psi) = crack_levelsets();
    let mut c = sin_exp_case("crack", Arc::new(phi), Some(Arc::new(psi)));
    // The box data are imposed strongly, no perturbation needed.
    c.ug = c.u_ex.clone();
    c.ug_jet = Some(Arc::new(sin_exp_jets));
    c
}

pub const INTERFACE_RADIUS: f64 = 0.3;
/// Young moduli inside (`r < R`) and outside the inclusion.
pub const INTERFACE_E: [f64; 2] = [7.0, 2.28];

/// Radial inclusion of radius 0.3: `u = (cos r - cos R)(1, 1) / E_i`.
pub fn case_interface() -> ElasticCase {
    let r0 = INTERFACE_RADIUS;
    let inner = LameParams::from_e_nu(INTERFACE_E[0], 0.3).expect("valid material");
    let outer = LameParams::from_e_nu(INTERFACE_E[1], 0.3).expect("valid material");
    let unit = LameParams::from_e_nu(1.0, 0.3).expect("valid material");
    let modulus = move |r: f64| if r < r0 { INTERFACE_E[0] } else { INTERFACE_E[1] };
    let polar = |[x, y]: [f64; 2]| {
        let (dx, dy) = (x - 0.5, y - 0.5);
        (dx, dy, dx.hypot(dy))
    };
    let u: VecFn = Arc::new(move |p| {
        let (_, _, r) = polar(p);
        let c = (r.cos() - r0.cos()) / modulus(r);
        [c, c]
    });
    let grad: GradFn = Arc::new(move |p| {
        let (dx, dy, r) = polar(p);
        let s = sinc(r) / modulus(r);
        let row = [-s * dx, -s * dy];
        [row, row]
    });
    let f: VecFn = Arc::new(move |p| {
        let (dx, dy, r) = polar(p);
        // Hessian of cos r: -sinc(r) I + q(r) X X^T.
        let (s, q) = (sinc(r), radial_q(r));
        let x = [dx, dy];
        let hess = |i: usize, j: usize| -s * if i == j { 1.0 } else { 0.0 } + q * x[i] * x[j];
        let lap = hess(0, 0) + hess(1, 1);
        let mut out = [0.0; 2];
        for (i, o) in out.iter_mut().enumerate() {
            *o = -(unit.mu * lap + (unit.mu + unit.lambda) * (hess(i, 0) + hess(i, 1)));
        }
        out
    });
    ElasticCase {
        tag: "interface",
        phi: Arc::new(interface_levelset(r0).expect("positive radius")),
        psi: None,
        lame: [outer, inner],
        ug: u.clone(),
        ug_jet: None,
        g: Arc::new(|_| [0.0, 0.0]),
        u_ex: u,
        grad_u_ex: grad,
        f,
    }
}

fn sinc(r: f64) -> f64 {
    if r < 1e-6 {
        1.0 - r * r / 6.0
    } else {
        r.sin() / r
    }
}

/// `(sin r / r - cos r) / r^2`, smooth at the origin.
fn radial_q(r: f64) -> f64 {
    if r < 1e-3 {
        1.0 / 3.0 - r * r / 30.0
    } else {
        (sinc(r) - r.cos()) / (r * r)
    }
}

impl ElasticCase {
    pub fn sigma_ex(&self, p: [f64; 2]) -> [[f64; 2]; 2] {
        let side = if self.phi.eval(p) > 0.0 { 0 } else { 1 };
        stress((self.grad_u_ex)(p), &self.lame[side])
    }

    /// Worst relative mismatch between `f` and `-div sigma(u_ex)` computed by
    /// second-order central differences of `u_ex`, over seeded random points
    /// of the box kept away from material interfaces.
    pub fn fd_residual(&self) -> f64 {
        self.fd_residual_seeded(FD_SEED)
    }

    /// [`Self::fd_residual`] at points drawn from `seed`.
    pub fn fd_residual_seeded(&self, seed: u64) -> f64 {
        let mut rng = StdRng::seed_from_u64(seed);
        let eps = 1e-3;
        let (mut num, mut den) = (0.0f64, 0.0f64);
        let mut taken = 0;
        while taken < FD_POINTS {
            let p = [rng.random_range(0.05..0.95), rng.random_range(0.05..0.95)];
            let two_sided = self.lame[0] != self.lame[1];
            if two_sided && self.phi.eval(p).abs() < 0.05 {
                continue;
            }
            taken += 1;
            let l = self.lame[if self.phi.eval(p) > 0.0 { 0 } else { 1 }];
            let u = |dx: f64, dy: f64| (self.u_ex)([p[0] + dx, p[1] + dy]);
            let c = u(0.0, 0.0);
            let (xp, xm, yp, ym) = (u(eps, 0.0), u(-eps, 0.0), u(0.0, eps), u(0.0, -eps));
            let (pp, pm, mp, mm) = (u(eps, eps), u(eps, -eps), u(-eps, eps), u(-eps, -eps));
            let mut hess = [[[0.0; 2]; 2]; 2];
            for i in 0..2 {
                hess[i][0][0] = (xp[i] - 2.0 * c[i] + xm[i]) / (eps * eps);
                hess[i][1][1] = (yp[i] - 2.0 * c[i] + ym[i]) / (eps * eps);
                let mixed = (pp[i] - pm[i] - mp[i] + mm[i]) / (4.0 * eps * eps);
                hess[i][0][1] = mixed;
                hess[i][1][0] = mixed;
            }
            let f = (self.f)(p);
            for i in 0..2 {
                let lap = hess[i][0][0] + hess[i][1][1];
                let grad_div = hess[0][0][i] + hess[1][1][i];
                let fd = -(l.mu * lap + (l.mu + l.lambda) * grad_div);
                num = num.max((fd - f[i]).abs());
                den = den.max(f[i].abs());
            }
        }
        num / den.max(f64::MIN_POSITIVE)
    }
}

#[derive(Clone)]
pub struct HeatCase {
    pub phi: Arc<dyn LevelSet>,
    pub u_ex: ScalarTimeFn,
    pub grad_u_ex: ScalarGradTimeFn,
    pub f: ScalarTimeFn,
    pub ug: ScalarTimeFn,
    pub ug_jet: ScalarJetTimeFn,
    pub u0: Arc<dyn Fn([f64; 2]) -> f64 + Send + Sync>,
}

/// `u = e^x sin(2 pi y) sin t` on the circle of [`case_dirichlet`].
pub fn case_heat() -> HeatCase {
    let phi: Arc<dyn LevelSet> = Arc::new(circle_levelset());
    let u: ScalarTimeFn = Arc::new(|[x, y]: [f64; 2], t: f64| x.exp() * (2.0 * PI * y).sin() * t.sin());
    let grad: ScalarGradTimeFn = Arc::new(|[x, y]: [f64; 2], t: f64| {
        let e = x.exp() * t.sin();
        [e * (2.0 * PI * y).sin(), e * 2.0 * PI * (2.0 * PI * y).cos()]
    });
    let f: ScalarTimeFn = Arc::new(|[x, y]: [f64; 2], t: f64| {
        x.exp() * (2.0 * PI * y).sin() * (t.cos() - (1.0 - 4.0 * PI * PI) * t.sin())
    });
    let (uc, pc) = (u.clone(), phi.clone());
    let ug: ScalarTimeFn = Arc::new(move |p, t| uc(p, t) * (1.0 + pc.eval(p)));
    let pc = phi.clone();
    let ug_jet: ScalarJetTimeFn = Arc::new(move |p @ [x, y]: [f64; 2], t: f64| {
        let (e, s, c, w) = (x.exp() * t.sin(), (2.0 * PI * y).sin(), (2.0 * PI * y).cos(), 2.0 * PI);
        let u = Jet { val: e * s, grad: [e * s, w * e * c], hess: [[e * s, w * e * c], [w * e * c, -w * w * e * s]] };
        let mut m = levelset_jet(pc.as_ref(), p);
        m.val += 1.0;
        u.mul(&m)
    });
    HeatCase { phi, u_ex: u, grad_u_ex: grad, f, ug, ug_jet, u0: Arc::new(|_| 0.0) }
}

impl HeatCase {
    /// Worst relative mismatch between `f` and `u_t - lap u` by central differences.
    pub fn fd_residual(&self) -> f64 {
        self.fd_residual_seeded(FD_SEED)
    }

    /// [`Self::fd_residual`] at points drawn from `seed`.
    pub fn fd_residual_seeded(&self, seed: u64) -> f64 {
        let mut rng = StdRng::seed_from_u64(seed);
        let eps = 1e-3;
        let (mut num, mut den) = (0.0f64, 0.0f64);
        for _ in 0..FD_POINTS {
            let p = [rng.random_range(0.05..0.95), rng.random_range(0.05..0.95)];
            let t = rng.random_range(0.05..1.0);
            let u = |dx: f64, dy: f64, dt: f64| (self.u_ex)([p[0] + dx, p[1] + dy], t + dt);
            let c = u(0.0, 0.0, 0.0);
            let lap = (u(eps, 0.0, 0.0) + u(-eps, 0.0, 0.0) + u(0.0, eps, 0.0) + u(0.0, -eps, 0.0) - 4.0 * c) / (eps * eps);
            let ut = (u(0.0, 0.0, eps) - u(0.0, 0.0, -eps)) / (2.0 * eps);
            let f = (self.f)(p, t);
            num = num.max((ut - lap - f).abs());
            den = den.max(f.abs());
        }
        num / den.max(f64::MIN_POSITIVE)
    }
}

/// Squared error and reference integrals.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct ErrorIntegrals {
    pub err_l2: f64,
    pub ref_l2: f64,
    pub err_h1: f64,
    pub ref_h1: f64,
    /// Measure of the integration domain.
    pub area: f64,
}

impl ErrorIntegrals {
    pub fn relative(&self) -> Result<(f64, f64)> {
        if !(self.ref_l2 > 0.0 && self.ref_h1 > 0.0) {
            return Err(Error::ZeroReferenceNorm);
        }
        Ok(((self.err_l2 / self.ref_l2).sqrt(), (self.err_h1 / self.ref_h1).sqrt()))
    }
}

/// Error of `u` against `exact(x) = (values, gradients)` over every cell where
/// `u` is defined. With `mask`, quadrature points where `phi_h > 0` are dropped
/// (integration over the discrete physical domain `{phi_h <= 0}`).
pub fn error_integrals<E>(u: &Reconstruction, phi_h: &FeFunction, mask: bool, exactness: usize, exact: E) -> Result<ErrorIntegrals>
where
    E: Fn([f64; 2]) -> ([f64; 2], [[f64; 2]; 2]),
{
    let rule = TriangleRule::new(exactness)?;
    let mesh = phi_h.space.mesh().clone();
    let nc = u.n_components().min(2);
    let mut out = ErrorIntegrals::default();
    for cell in 0..mesh.n_cells() {
        let geo: CellGeometry = mesh.cell_geometry(cell);
        for (lam, &w) in rule.points.iter().zip(&rule.weights) {
            let ph = phi_h.jets(cell, &geo, lam).ok_or_else(|| Error::InvalidParameter("level set must cover the mesh".into()))?[0].val;
            if mask && ph > 0.0 {
                continue;
            }
            let Some(j) = u.jets(cell, &geo, lam, ph) else { break };
            let x = geo.point(lam);
            let (v, g) = exact(x);
            let wq = w * 2.0 * geo.area;
            out.area += wq;
            for c in 0..nc {
                let e = j[c].val - v[c];
                out.err_l2 += wq * e * e;
                out.ref_l2 += wq * v[c] * v[c];
                for d in 0..2 {
                    let e = j[c].grad[d] - g[c][d];
                    out.err_h1 += wq * e * e;
                    out.ref_h1 += wq * g[c][d] * g[c][d];
                }
            }
        }
    }
    Ok(out)
}

/// Relative L2 and H1-seminorm errors of an elasticity solution.
pub fn compute_errors(u: &Reconstruction, case: &ElasticCase, phi_h: &FeFunction, mask: bool) -> Result<(f64, f64)> {
    let k = phi_h.space.degree();
    error_integrals(u, phi_h, mask, 2 * k + 4, |x| ((case.u_ex)(x), (case.grad_u_ex)(x)))?.relative()
}

/// Running `L^inf(L^2)` and `L^2(H^1)` accumulator over the time levels `t > 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct TimeErrors {
    max_err_l2: f64,
    max_ref_l2: f64,
    sum_err_h1: f64,
    sum_ref_h1: f64,
    steps: usize,
}

impl TimeErrors {
    pub fn push(&mut self, e: &ErrorIntegrals) {
        self.max_err_l2 = self.max_err_l2.max(e.err_l2.sqrt());
        self.max_ref_l2 = self.max_ref_l2.max(e.ref_l2.sqrt());
        self.sum_err_h1 += e.err_h1;
        self.sum_ref_h1 += e.ref_h1;
        self.steps += 1;
    }

    /// `(max_n ||e^n|| / max_n ||u^n||, sqrt(sum ||grad e^n||^2 / sum ||grad u^n||^2))`;
    /// the common factor `dt` cancels in the second ratio.
    pub fn finish(&self) -> Result<(f64, f64)> {
        if self.steps == 0 || !(self.max_ref_l2 > 0.0 && self.sum_ref_h1 > 0.0) {
            return Err(Error::ZeroReferenceNorm);
        }
        Ok((self.max_err_l2 / self.max_ref_l2, (self.sum_err_h1 / self.sum_ref_h1).sqrt()))
    }
}

/// Spatial error integrals of one heat time level.
pub fn heat_step_errors(step: &HeatStep, case: &HeatCase, phi_h: &FeFunction) -> Result<ErrorIntegrals> {
    let k = phi_h.space.degree();
    let t = step.t;
    error_integrals(&step.u, phi_h, true, 2 * k + 4, |x| {
        let g = (case.grad_u_ex)(x, t);
        ([(case.u_ex)(x, t), 0.0], [g, [0.0; 2]])
    })
}

/// Time-norm errors of a stored series; the initial level `t = 0` is skipped.
pub fn time_errors(series: &[HeatStep], case: &HeatCase, phi_h: &FeFunction) -> Result<(f64, f64)> {
    let mut acc = TimeErrors::default();
    for s in series.iter().filter(|s| s.t > 0.0) {
        acc.push(&heat_step_errors(s, case, phi_h)?);
    }
    acc.finish()
}

/// Least-squares slope of `log(err)` against `log(h)`.
pub fn fit_order(h: &[f64], err: &[f64]) -> Result<f64> {
    if h.len() != err.len() || h.len() < 2 {
        return Err(Error::Fit(format!("need at least two (h, error) pairs, got {} and {}", h.len(), err.len())));
    }
    if h.iter().chain(err).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::Fit("mesh sizes and errors must be positive and finite".into()));
    }
    let xs: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = err.iter().map(|v| v.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("all mesh sizes are equal".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(sxy / sxx)
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub h: f64,
    pub ndofs: usize,
    pub rel_l2: f64,
    pub rel_h1: f64,
    pub assemble_s: f64,
    pub solve_s: f64,
}

#[derive(Debug, Clone, Copy, Serialize, PartialEq)]
pub struct Orders {
    pub l2: f64,
    pub h1: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub case: String,
    pub params: serde_json::Value,
    pub rows: Vec<ReportRow>,
    pub orders: Option<Orders>,
}

impl ConvergenceReport {
    pub fn new(case: &str, params: serde_json::Value) -> Self {
        Self { case: case.to_string(), params, rows: Vec::new(), orders: None }
    }

    /// Fits both orders from all rows (at least two are required).
    pub fn fit(&mut self) -> Result<Orders> {
        let h: Vec<f64> = self.rows.iter().map(|r| r.h).collect();
        let l2: Vec<f64> = self.rows.iter().map(|r| r.rel_l2).collect();
        let h1: Vec<f64> = self.rows.iter().map(|r| r.rel_h1).collect();
        let o = Orders { l2: fit_order(&h, &l2)?, h1: fit_order(&h, &h1)? };
        self.orders = Some(o);
        Ok(o)
    }

    pub const CSV_HEADER: &'static str = "case,N,h,ndofs,rel_l2,rel_h1,assemble_s,solve_s";

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}", Self::CSV_HEADER)?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{:e},{},{:e},{:e},{:.6},{:.6}",
                self.case, r.n, r.h, r.ndofs, r.rel_l2, r.rel_h1, r.assemble_s, r.solve_s
            )?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
