//! Implicit-Euler heat equation with the ansatz `u = phi_h w + g`, where `g`
//! is the (extended) Dirichlet data at the current time: used pointwise when
//! its derivatives are supplied, through its nodal interpolant otherwise.

use std::sync::Arc;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::fe::assembly::{Assembler, BlockLayout, DataFn, Op, PointCtx, Region, Term};
use crate::fe::element::Jet;
use crate::fe::solver::LuSolver;
use crate::fe::space::{FeFunction, ValueShape};
use crate::levelset::LevelSet;
use crate::mesh::GeometryMode;

use super::{atom, DataJet, Diagnostics, Geometry, Reconstruction};

/// Space-time scalar data `(x, t) -> value`.
pub type ScalarTimeFn = Arc<dyn Fn([f64; 2], f64) -> f64 + Send + Sync>;
/// Space-time scalar data with its spatial derivatives.
pub type ScalarJetTimeFn = Arc<dyn Fn([f64; 2], f64) -> Jet + Send + Sync>;

#[derive(Clone)]
pub struct HeatProblem<'a> {
    pub n: usize,
    pub degree: usize,
    /// Ghost-penalty weight.
    pub sigma_d: f64,
    /// Weight of the cellwise least-squares term.
    pub sigma: f64,
    pub phi: &'a dyn LevelSet,
    pub f: ScalarTimeFn,
    pub ug: ScalarTimeFn,
    /// Spatial derivatives of `ug`; when given, the data enters pointwise.
    pub ug_jet: Option<ScalarJetTimeFn>,
    pub u0: Arc<dyn Fn([f64; 2]) -> f64 + Send + Sync>,
}

#[derive(Debug, Clone)]
pub struct HeatStep {
    pub t: f64,
    pub u: Reconstruction,
}

#[derive(Debug, Clone)]
pub struct HeatSolution {
    /// Time levels `0, dt, ..., T` (the first entry is the interpolated initial datum).
    pub steps: Vec<HeatStep>,
    pub dt: f64,
    /// `residual` is the worst step residual; `solve_s` sums all steps.
    pub diagnostics: Diagnostics,
}

/// Marches to `t_final` with `round(t_final / dt)` equal steps and keeps every time level.
pub fn solve_heat(pb: &HeatProblem, dt: f64, t_final: f64) -> Result<HeatSolution> {
    let mut steps = Vec::new();
    let (dt, diagnostics) = solve_heat_with(pb, dt, t_final, |s| {
        steps.push(s.clone());
        Ok(())
    })?;
    Ok(HeatSolution { steps, dt, diagnostics })
}

/// Same marching, handing each time level (including `t = 0`) to `observe`
/// instead of storing it. Returns the effective step and the diagnostics.
pub fn solve_heat_with<F>(pb: &HeatProblem, dt: f64, t_final: f64, mut observe: F) -> Result<(f64, Diagnostics)>
where
    F: FnMut(&HeatStep) -> Result<()>,
{
    if !(dt > 0.0 && t_final > 0.0) || !dt.is_finite() || !t_final.is_finite() {
        return Err(Error::InvalidParameter(format!("need dt > 0 and T > 0, got dt={dt}, T={t_final}")));
    }
    if !(pb.sigma_d > 0.0 && pb.sigma > 0.0) {
        return Err(Error::InvalidParameter("heat stabilization weights must be positive".into()));
    }
    if pb.degree == 0 || pb.degree > 2 {
        return Err(Error::InvalidParameter(format!("degree must be 1 or 2, got {}", pb.degree)));
    }
    let n_steps = ((t_final / dt).round() as usize).max(1);
    let dt = t_final / n_steps as f64;

    let t0 = Instant::now();
    let geo = Geometry::new(pb.n, pb.degree, pb.phi, GeometryMode::Boundary)?;
    let ams = &geo.ams;
    let h = geo.h;
    let v = geo.space(&ams.active_cells, pb.degree, ValueShape::Scalar)?;
    let mut layout = BlockLayout::new();
    let w = layout.add("w", v.clone());
    let g = if pb.ug_jet.is_none() { Some(layout.add("g", v.clone())) } else { None };
    let u_atoms = |op, s: f64| {
        let mut a = vec![atom(w, op).phi().scaled(s)];
        a.extend(g.map(|g| atom(g, op).scaled(s)));
        a
    };
    let boundary: Vec<(usize, usize)> = ams.boundary_facets.iter().map(|b| (b.facet, b.cell)).collect();
    let lsq_trial = {
        let mut a = u_atoms(Op::Value, 1.0 / dt);
        a.extend(u_atoms(Op::Laplacian, -1.0));
        a
    };
    let lsq_weight = -pb.sigma * h * h;
    let terms = vec![
        Term::bilinear(Region::Cells(ams.active_cells.clone()), 1.0 / dt, u_atoms(Op::Value, 1.0), vec![atom(w, Op::Value).phi()]),
        Term::bilinear(Region::Cells(ams.active_cells.clone()), 1.0, u_atoms(Op::Grad, 1.0), vec![atom(w, Op::Grad).phi()]),
        Term::bilinear(Region::BoundaryFacets(boundary.clone()), -1.0, u_atoms(Op::NormalDeriv, 1.0), vec![atom(w, Op::Value).phi()]),
        Term::bilinear(
            Region::InteriorFacets(ams.ghost_facets.clone()),
            pb.sigma_d * h,
            u_atoms(Op::NormalDeriv, 1.0),
            vec![atom(w, Op::NormalDeriv).phi()],
        ),
        Term::bilinear(Region::Cells(ams.gamma_cells.clone()), lsq_weight, lsq_trial, vec![atom(w, Op::Laplacian).phi()]),
    ];
    let exactness = 4 * pb.degree;
    let assembler = Assembler::new(&layout, &geo.phi_h, exactness)?;
    let sys = assembler.assemble(&terms)?;
    let known: Vec<(usize, f64)> = match g {
        Some(g) => {
            let goff = layout.field(g).offset;
            (0..v.ndofs()).map(|i| (goff + i, 0.0)).collect()
        }
        None => Vec::new(),
    };
    let red = sys.reduce(&known);
    let lu = LuSolver::factorize(&red.a_ff)?;
    let mut assemble_s = t0.elapsed().as_secs_f64();

    let u0 = Arc::clone(&pb.u0);
    let mut prev = HeatStep { t: 0.0, u: Reconstruction::Plain(v.interpolate(|p| [u0(p)])) };
    observe(&prev)?;
    let (mut residual, mut solve_s) = (0.0f64, 0.0);
    for step in 1..=n_steps {
        let t = step as f64 * dt;
        let ta = Instant::now();
        let up = &prev.u;
        let data_at = |x| pb.ug_jet.as_ref().map_or(Jet::constant(0.0), |d| d(x, t));
        // u^{n-1}/dt + f^n, less what the pointwise data already accounts for.
        let source = move |ctx: &PointCtx| -> f64 {
            let u = up.jets(ctx.cell, ctx.geo, &ctx.lambda, ctx.phi.val).map_or(0.0, |j| j[0].val);
            u / dt + (pb.f)(ctx.x, t) - data_at(ctx.x).val / dt
        };
        let mass: DataFn<'_> = Box::new(move |c| [source(c), 0.0, 0.0, 0.0]);
        let lsq: DataFn<'_> = Box::new(move |c| [source(c) + data_at(c.x).laplacian(), 0.0, 0.0, 0.0]);
        let mut rhs_terms = vec![
            Term::linear(Region::Cells(ams.active_cells.clone()), 1.0, vec![atom(w, Op::Value).phi()], mass),
            Term::linear(Region::Cells(ams.gamma_cells.clone()), lsq_weight, vec![atom(w, Op::Laplacian).phi()], lsq),
        ];
        if pb.ug_jet.is_some() {
            let grad: DataFn<'_> = Box::new(move |c| {
                let d = data_at(c.x).grad;
                [-d[0], -d[1], 0.0, 0.0]
            });
            let flux: DataFn<'_> = Box::new(move |c| {
                let d = data_at(c.x).grad;
                [d[0] * c.normal[0] + d[1] * c.normal[1], 0.0, 0.0, 0.0]
            });
            rhs_terms.push(Term::linear(Region::Cells(ams.active_cells.clone()), 1.0, vec![atom(w, Op::Grad).phi()], grad));
            rhs_terms.push(Term::linear(Region::BoundaryFacets(boundary.clone()), 1.0, vec![atom(w, Op::Value).phi()], flux));
        }
        let rhs = assembler.assemble_rhs(&rhs_terms)?;
        drop(rhs_terms);
        let gn = match &pb.ug_jet {
            Some(_) => None,
            None => Some(v.interpolate(|p| [(pb.ug)(p, t)])),
        };
        let kv = gn.as_ref().map_or(&[][..], |f| &f.coeffs[..]);
        assemble_s += ta.elapsed().as_secs_f64();

        let ts = Instant::now();
        let b = red.rhs(&rhs, kv);
        let (xf, res) = lu.solve(&b)?;
        let x = red.expand(&xf, kv);
        solve_s += ts.elapsed().as_secs_f64();
        residual = residual.max(res);
        let wn = FeFunction::from_coeffs(v.clone(), x[layout.range(w)].to_vec())?;
        let phi = geo.phi_h.clone();
        let u = match (gn, &pb.ug_jet) {
            (Some(base), _) => Reconstruction::PhiProduct { base, w: wn, phi },
            (None, Some(d)) => {
                let d = Arc::clone(d);
                let data = DataJet(Arc::new(move |x| [d(x, t), Jet::constant(0.0)]));
                Reconstruction::DataPlusPhi { data, w: wn, phi }
            }
            (None, None) => unreachable!("one of the data paths is always taken"),
        };
        prev = HeatStep { t, u };
        observe(&prev)?;
    }
    Ok((dt, Diagnostics { ndofs: v.ndofs(), residual, assemble_s, solve_s }))
}
