//! Two-material problem. Each side carries its own displacement on its
//! overlapping submesh; continuity of displacement and normal force across
//! the interface is imposed in the least-squares sense on the strip.

use std::time::Instant;

use crate::elasticity::{div_lsq, ghost_penalty, LameParams, SchemeParams};
use crate::error::{Error, Result};
use crate::fe::assembly::{Assembler, BlockLayout, Op, Region, Term};
use crate::fe::space::ValueShape;
use crate::levelset::LevelSet;
use crate::mesh::GeometryMode;

use super::{atom, box_dirichlet, load, solve_system, vec_data, Diagnostics, Geometry, Reconstruction, SchemeSolution, VecFn};

#[derive(Clone)]
pub struct InterfaceProblem<'a> {
    pub n: usize,
    pub degree: usize,
    /// Materials of side 1 (`phi > 0`) and side 2 (`phi < 0`).
    pub lame: [LameParams; 2],
    pub params: SchemeParams,
    pub phi: &'a dyn LevelSet,
    pub f: VecFn,
    /// Dirichlet data on the box boundary.
    pub ug: VecFn,
}

pub fn solve_interface(pb: &InterfaceProblem) -> Result<SchemeSolution> {
    if pb.degree == 0 || pb.degree > 2 {
        return Err(Error::InvalidParameter(format!("degree must be 1 or 2, got {}", pb.degree)));
    }
    pb.params.validate()?;
    let t0 = Instant::now();
    let geo = Geometry::new(pb.n, pb.degree, pb.phi, GeometryMode::Interface)?;
    let ams = &geo.ams;
    let (h, prm, k) = (geo.h, &pb.params, pb.degree);
    let sides = [&ams.side1_cells, &ams.side2_cells];

    let mut layout = BlockLayout::new();
    let mut u = [0; 2];
    for i in 0..2 {
        u[i] = layout.add(&format!("u{}", i + 1), geo.space(sides[i], k, ValueShape::Vector)?);
    }
    let p = layout.add("p", geo.space(&ams.gamma_cells, k, ValueShape::Vector)?);
    let mut y = [0; 2];
    for i in 0..2 {
        y[i] = layout.add(&format!("y{}", i + 1), geo.space(&ams.gamma_cells, k, ValueShape::Tensor)?);
    }
    let strip = || Region::Cells(ams.gamma_cells.clone());

    let mut terms = Vec::new();
    for i in 0..2 {
        let l = pb.lame[i];
        let bnd: Vec<(usize, usize)> = ams.side_boundary_facets[i].iter().map(|b| (b.facet, b.cell)).collect();
        terms.push(Term::bilinear(Region::Cells(sides[i].clone()), 1.0, vec![atom(u[i], Op::Stress(l))], vec![atom(u[i], Op::Grad)]));
        terms.push(Term::bilinear(Region::BoundaryFacets(bnd), 1.0, vec![atom(y[i], Op::TensorNormal)], vec![atom(u[i], Op::Value)]));
        terms.push(Term::least_squares(strip(), prm.gamma_u, vec![atom(y[i], Op::Value), atom(u[i], Op::Stress(l))], None));
        terms.push(ghost_penalty(ams.side_ghost_facets[i].clone(), l, prm.sigma * h, &[(u[i], false)], &[(u[i], false)]));
        terms.push(div_lsq(ams.gamma_cells.clone(), y[i], prm.gamma_div, Some(vec_data(&pb.f))));
        terms.push(load(sides[i], u[i], &pb.f, false));
    }
    terms.push(Term::least_squares(
        strip(),
        prm.gamma_p / (h * h),
        vec![atom(u[0], Op::Value), atom(u[1], Op::Value).scaled(-1.0), atom(p, Op::Value).phi().scaled(1.0 / h)],
        None,
    ));
    terms.push(Term::least_squares(
        strip(),
        prm.gamma_y / (h * h),
        vec![atom(y[0], Op::TensorGradPhi), atom(y[1], Op::TensorGradPhi).scaled(-1.0)],
        None,
    ));

    let sys = Assembler::new(&layout, &geo.phi_h, 4 * k)?.assemble(&terms)?;
    let assemble_s = t0.elapsed().as_secs_f64();
    let mut known = Vec::new();
    for &ui in &u {
        let f = layout.field(ui);
        known.extend(box_dirichlet(&f.space, f.offset, &pb.ug));
    }
    let (x, residual, solve_s) = solve_system(&sys, &known)?;
    let aux = layout.fields().iter().enumerate().map(|(i, f)| (f.name.clone(), layout.extract(i, &x))).collect();
    Ok(SchemeSolution {
        u: Reconstruction::TwoSided { side1: layout.extract(u[0], &x), side2: layout.extract(u[1], &x) },
        aux,
        diagnostics: Diagnostics { ndofs: layout.total(), residual, assemble_s, solve_s },
    })
}
