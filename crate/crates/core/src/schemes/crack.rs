//! Crack problem: an interface split by a secondary level set into a
//! fictitious part (`psi <= 0`, continuity imposed as for two materials) and
//! the crack itself (`psi >= 0`, Neumann data imposed on both sides).

use std::time::Instant;

use crate::elasticity::{div_lsq, ghost_penalty};
use crate::error::{Error, Result};
use crate::fe::assembly::{Assembler, BlockLayout, Op, Region, Term};
use crate::fe::space::ValueShape;
use crate::mesh::{mark_crack, FacetTag, GeometryMode};

use super::{atom, box_dirichlet, load, neumann_data, solve_system, vec_data, Diagnostics, ElasticProblem, Geometry, Reconstruction, SchemeSolution};

pub fn solve_crack(pb: &ElasticProblem) -> Result<SchemeSolution> {
    pb.check()?;
    let psi = pb.psi.ok_or_else(|| Error::InvalidParameter("the crack problem needs a secondary level set".into()))?;
    let t0 = Instant::now();
    let mut geo = Geometry::new(pb.n, pb.degree, pb.phi, GeometryMode::Interface)?;
    geo.ams = mark_crack(&geo.mesh, &geo.ams, psi)?;
    let ams = &geo.ams;
    let (h, l, prm, k) = (geo.h, pb.lame, &pb.params, pb.degree);
    let sides = [&ams.side1_cells, &ams.side2_cells];

    let mut layout = BlockLayout::new();
    let mut u = [0; 2];
    for i in 0..2 {
        u[i] = layout.add(&format!("u{}", i + 1), geo.space(sides[i], k, ValueShape::Vector)?);
    }
    // Fictitious-interface unknowns.
    let int = if ams.internal_cells.is_empty() {
        None
    } else {
        let p = layout.add("p", geo.space(&ams.internal_cells, k, ValueShape::Vector)?);
        let y1 = layout.add("y1", geo.space(&ams.internal_cells, k, ValueShape::Tensor)?);
        let y2 = layout.add("y2", geo.space(&ams.internal_cells, k, ValueShape::Tensor)?);
        Some((p, [y1, y2]))
    };
    // Crack unknowns.
    let crack = if ams.crack_cells.is_empty() {
        None
    } else {
        let mut pn = [0; 2];
        let mut yn = [0; 2];
        for i in 0..2 {
            pn[i] = layout.add(&format!("p{}_n", i + 1), geo.space(&ams.crack_cells, k - 1, ValueShape::Vector)?);
        }
        for i in 0..2 {
            yn[i] = layout.add(&format!("y{}_n", i + 1), geo.space(&ams.crack_cells, k, ValueShape::Tensor)?);
        }
        Some((pn, yn))
    };

    let mut terms = Vec::new();
    for i in 0..2 {
        let (mut f_int, mut f_crack, mut f_other) = (Vec::new(), Vec::new(), Vec::new());
        for b in &ams.side_boundary_facets[i] {
            match b.tag {
                FacetTag::Internal => f_int.push((b.facet, b.cell)),
                FacetTag::Crack => f_crack.push((b.facet, b.cell)),
                _ => f_other.push((b.facet, b.cell)),
            }
        }
        terms.push(Term::bilinear(Region::Cells(sides[i].clone()), 1.0, vec![atom(u[i], Op::Stress(l))], vec![atom(u[i], Op::Grad)]));
        terms.push(Term::bilinear(Region::BoundaryFacets(f_other), -1.0, vec![atom(u[i], Op::StressNormal(l))], vec![atom(u[i], Op::Value)]));
        terms.push(ghost_penalty(ams.side_ghost_facets[i].clone(), l, prm.sigma_d * h, &[(u[i], false)], &[(u[i], false)]));
        terms.push(load(sides[i], u[i], &pb.f, false));
        if let Some((_, y)) = int {
            let cells = || Region::Cells(ams.internal_cells.clone());
            terms.push(Term::bilinear(Region::BoundaryFacets(f_int), 1.0, vec![atom(y[i], Op::TensorNormal)], vec![atom(u[i], Op::Value)]));
            terms.push(Term::least_squares(cells(), prm.gamma_u, vec![atom(y[i], Op::Value), atom(u[i], Op::Stress(l))], None));
            terms.push(div_lsq(ams.internal_cells.clone(), y[i], prm.gamma_div, Some(vec_data(&pb.f))));
        }
        if let Some((pn, yn)) = crack {
            let cells = || Region::Cells(ams.crack_cells.clone());
            terms.push(Term::bilinear(Region::BoundaryFacets(f_crack), 1.0, vec![atom(yn[i], Op::TensorNormal)], vec![atom(u[i], Op::Value)]));
            terms.push(Term::least_squares(cells(), prm.gamma_u_n, vec![atom(yn[i], Op::Value), atom(u[i], Op::Stress(l))], None));
            terms.push(Term::least_squares(
                cells(),
                prm.gamma_p_n / (h * h),
                vec![atom(yn[i], Op::TensorGradPhi), atom(pn[i], Op::Value).phi().scaled(1.0 / h)],
                Some(neumann_data(&pb.g)),
            ));
            terms.push(div_lsq(ams.crack_cells.clone(), yn[i], prm.gamma_div, Some(vec_data(&pb.f))));
        }
    }
    if let Some((p, y)) = int {
        let cells = || Region::Cells(ams.internal_cells.clone());
        terms.push(Term::least_squares(
            cells(),
            prm.gamma_p / (h * h),
            vec![atom(u[0], Op::Value), atom(u[1], Op::Value).scaled(-1.0), atom(p, Op::Value).phi().scaled(1.0 / h)],
            None,
        ));
        terms.push(Term::least_squares(
            cells(),
            prm.sigma_p / (h * h),
            vec![atom(y[0], Op::TensorGradPhi), atom(y[1], Op::TensorGradPhi).scaled(-1.0)],
            None,
        ));
    }

    let sys = Assembler::new(&layout, &geo.phi_h, pb.exactness())?.assemble(&terms)?;
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
