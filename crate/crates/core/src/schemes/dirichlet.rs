//! Pure Dirichlet problems: the direct scheme (`u_h = u_h^g + phi_h w_h`) and
//! the dual scheme (penalized auxiliary multiplier on the strip).

use std::time::Instant;

use std::sync::Arc;

use crate::elasticity::{ghost_penalty, lsq_residual, stress, LameParams};
use crate::error::Result;
use crate::fe::assembly::{Assembler, BlockLayout, DataFn, Op, Region, Term};
use crate::fe::element::Jet;
use crate::fe::space::ValueShape;
use crate::mesh::GeometryMode;

use super::{atom, load, DataJet, VecJetFn, solve_system, vec_data, Diagnostics, ElasticProblem, Geometry, Reconstruction, SchemeSolution};

fn grad_of(j: &[Jet; 2]) -> [[f64; 2]; 2] {
    [j[0].grad, j[1].grad]
}

fn div_stress_of(j: &[Jet; 2], l: &LameParams) -> [f64; 2] {
    let div_grad = [j[0].hess[0][0] + j[1].hess[1][0], j[0].hess[0][1] + j[1].hess[1][1]];
    let mut out = [0.0; 2];
    for (i, o) in out.iter_mut().enumerate() {
        *o = l.mu * j[i].laplacian() + (l.mu + l.lambda) * div_grad[i];
    }
    out
}

/// Direct scheme. The unknown is `w_h`. Without derivatives of the data, its
/// nodal interpolant `u_h^g` enters as a prescribed field so that every term
/// (including the stabilizations) acts on the full reconstruction; with them,
/// the data is used pointwise.
pub fn solve_dirichlet_direct(pb: &ElasticProblem) -> Result<SchemeSolution> {
    pb.check()?;
    if let Some(ug) = &pb.ug_jet {
        return direct_with_data(pb, ug);
    }
    let t0 = Instant::now();
    let geo = Geometry::new(pb.n, pb.degree, pb.phi, GeometryMode::Boundary)?;
    let ams = &geo.ams;
    let v = geo.space(&ams.active_cells, pb.degree, ValueShape::Vector)?;
    let ug_h = v.interpolate(|p| pb.ug.as_ref()(p));

    let mut layout = BlockLayout::new();
    let w = layout.add("w", v.clone());
    let g = layout.add("ug", v.clone());
    let (h, l) = (geo.h, pb.lame);
    let trial = [(w, true), (g, false)];
    let test = [(w, true)];
    let u_atoms = |op| vec![atom(w, op).phi(), atom(g, op)];
    let boundary: Vec<(usize, usize)> = ams.boundary_facets.iter().map(|b| (b.facet, b.cell)).collect();

    let terms = vec![
        Term::bilinear(Region::Cells(ams.active_cells.clone()), 1.0, u_atoms(Op::Stress(l)), vec![atom(w, Op::Grad).phi()]),
        Term::bilinear(Region::BoundaryFacets(boundary), -1.0, u_atoms(Op::StressNormal(l)), vec![atom(w, Op::Value).phi()]),
        ghost_penalty(ams.ghost_facets.clone(), l, pb.params.sigma_d * h, &trial, &test),
        lsq_residual(ams.gamma_cells.clone(), l, pb.params.sigma_d * h * h, &trial, &test, Some(vec_data(&pb.f))),
        load(&ams.active_cells, w, &pb.f, true),
    ];
    let sys = Assembler::new(&layout, &geo.phi_h, pb.exactness())?.assemble(&terms)?;
    let assemble_s = t0.elapsed().as_secs_f64();

    let off = layout.field(g).offset;
    let known: Vec<(usize, f64)> = ug_h.coeffs.iter().enumerate().map(|(i, &c)| (off + i, c)).collect();
    let (x, residual, solve_s) = solve_system(&sys, &known)?;
    let wh = layout.extract(w, &x);
    Ok(SchemeSolution {
        u: Reconstruction::PhiProduct { base: ug_h, w: wh.clone(), phi: geo.phi_h.clone() },
        aux: vec![("w".into(), wh)],
        diagnostics: Diagnostics { ndofs: v.ndofs(), residual, assemble_s, solve_s },
    })
}

fn direct_with_data(pb: &ElasticProblem, ug: &VecJetFn) -> Result<SchemeSolution> {
    let t0 = Instant::now();
    let geo = Geometry::new(pb.n, pb.degree, pb.phi, GeometryMode::Boundary)?;
    let ams = &geo.ams;
    let v = geo.space(&ams.active_cells, pb.degree, ValueShape::Vector)?;

    let mut layout = BlockLayout::new();
    let w = layout.add("w", v.clone());
    let (h, l) = (geo.h, pb.lame);
    let trial = [(w, true)];
    let boundary: Vec<(usize, usize)> = ams.boundary_facets.iter().map(|b| (b.facet, b.cell)).collect();
    let sigma_g = || -> DataFn<'_> {
        let ug = Arc::clone(ug);
        Box::new(move |c| {
            let s = stress(grad_of(&ug(c.x)), &l);
            [-s[0][0], -s[0][1], -s[1][0], -s[1][1]]
        })
    };
    let sigma_g_n = || -> DataFn<'_> {
        let ug = Arc::clone(ug);
        Box::new(move |c| {
            let s = stress(grad_of(&ug(c.x)), &l);
            let n = c.normal;
            [s[0][0] * n[0] + s[0][1] * n[1], s[1][0] * n[0] + s[1][1] * n[1], 0.0, 0.0]
        })
    };
    let f_eff = || -> DataFn<'_> {
        let (ug, f) = (Arc::clone(ug), Arc::clone(&pb.f));
        Box::new(move |c| {
            let d = div_stress_of(&ug(c.x), &l);
            let fv = f(c.x);
            [fv[0] + d[0], fv[1] + d[1], 0.0, 0.0]
        })
    };

    let terms = vec![
        Term::bilinear(Region::Cells(ams.active_cells.clone()), 1.0, vec![atom(w, Op::Stress(l)).phi()], vec![atom(w, Op::Grad).phi()]),
        Term::linear(Region::Cells(ams.active_cells.clone()), 1.0, vec![atom(w, Op::Grad).phi()], sigma_g()),
        Term::bilinear(Region::BoundaryFacets(boundary.clone()), -1.0, vec![atom(w, Op::StressNormal(l)).phi()], vec![atom(w, Op::Value).phi()]),
        Term::linear(Region::BoundaryFacets(boundary), 1.0, vec![atom(w, Op::Value).phi()], sigma_g_n()),
        ghost_penalty(ams.ghost_facets.clone(), l, pb.params.sigma_d * h, &trial, &trial),
        lsq_residual(ams.gamma_cells.clone(), l, pb.params.sigma_d * h * h, &trial, &trial, Some(f_eff())),
        load(&ams.active_cells, w, &pb.f, true),
    ];
    let sys = Assembler::new(&layout, &geo.phi_h, pb.exactness())?.assemble(&terms)?;
    let assemble_s = t0.elapsed().as_secs_f64();
    let (x, residual, solve_s) = solve_system(&sys, &[])?;
    let wh = layout.extract(w, &x);
    Ok(SchemeSolution {
        u: Reconstruction::DataPlusPhi { data: DataJet(Arc::clone(ug)), w: wh.clone(), phi: geo.phi_h.clone() },
        aux: vec![("w".into(), wh)],
        diagnostics: Diagnostics { ndofs: v.ndofs(), residual, assemble_s, solve_s },
    })
}

/// Dual scheme in `(u_h, p_h)`, `p_h` living on the strip.
pub fn solve_dirichlet_dual(pb: &ElasticProblem) -> Result<SchemeSolution> {
    pb.check()?;
    let t0 = Instant::now();
    let geo = Geometry::new(pb.n, pb.degree, pb.phi, GeometryMode::Boundary)?;
    let ams = &geo.ams;
    let v = geo.space(&ams.active_cells, pb.degree, ValueShape::Vector)?;
    let q = geo.space(&ams.gamma_cells, pb.degree, ValueShape::Vector)?;

    let mut layout = BlockLayout::new();
    let u = layout.add("u", v);
    let p = layout.add("p", q);
    let (h, l, prm) = (geo.h, pb.lame, &pb.params);
    let boundary: Vec<(usize, usize)> = ams.boundary_facets.iter().map(|b| (b.facet, b.cell)).collect();

    let terms = vec![
        Term::bilinear(Region::Cells(ams.active_cells.clone()), 1.0, vec![atom(u, Op::Stress(l))], vec![atom(u, Op::Grad)]),
        Term::bilinear(Region::BoundaryFacets(boundary), -1.0, vec![atom(u, Op::StressNormal(l))], vec![atom(u, Op::Value)]),
        Term::least_squares(
            Region::Cells(ams.gamma_cells.clone()),
            prm.gamma / (h * h),
            vec![atom(u, Op::Value), atom(p, Op::Value).phi().scaled(-1.0 / h)],
            Some(vec_data(&pb.ug)),
        ),
        ghost_penalty(ams.ghost_facets.clone(), l, prm.sigma_d * h, &[(u, false)], &[(u, false)]),
        lsq_residual(ams.gamma_cells.clone(), l, prm.sigma_d * h * h, &[(u, false)], &[(u, false)], Some(vec_data(&pb.f))),
        load(&ams.active_cells, u, &pb.f, false),
    ];
    let sys = Assembler::new(&layout, &geo.phi_h, pb.exactness())?.assemble(&terms)?;
    let assemble_s = t0.elapsed().as_secs_f64();
    let (x, residual, solve_s) = solve_system(&sys, &[])?;
    Ok(SchemeSolution {
        u: Reconstruction::Plain(layout.extract(u, &x)),
        aux: vec![("p".into(), layout.extract(p, &x))],
        diagnostics: Diagnostics { ndofs: layout.total(), residual, assemble_s, solve_s },
    })
}
