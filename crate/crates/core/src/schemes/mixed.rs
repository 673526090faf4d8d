//! Mixed Dirichlet/Neumann problem: the strip is split by a secondary level
//! set into Dirichlet cells (penalized multiplier), Neumann cells (stress
//! variable plus flux multiplier) and unmarked cells (stabilization only).

use std::time::Instant;

use crate::elasticity::{div_lsq, ghost_penalty, lsq_residual};
use crate::error::{Error, Result};
use crate::fe::assembly::{Assembler, BlockLayout, Op, Region, Term};
use crate::fe::space::ValueShape;
use crate::mesh::{mark_dirichlet_neumann, FacetTag, GeometryMode};

use super::{atom, load, neumann_data, solve_system, vec_data, Diagnostics, ElasticProblem, Geometry, Reconstruction, SchemeSolution};

pub fn solve_mixed(pb: &ElasticProblem) -> Result<SchemeSolution> {
    pb.check()?;
    let psi = pb.psi.ok_or_else(|| Error::InvalidParameter("the mixed problem needs a secondary level set".into()))?;
    let t0 = Instant::now();
    let mut geo = Geometry::new(pb.n, pb.degree, pb.phi, GeometryMode::Boundary)?;
    geo.ams = mark_dirichlet_neumann(&geo.mesh, &geo.ams, psi)?;
    let ams = &geo.ams;
    let (h, l, prm, k) = (geo.h, pb.lame, &pb.params, pb.degree);

    let mut layout = BlockLayout::new();
    let u = layout.add("u", geo.space(&ams.active_cells, k, ValueShape::Vector)?);
    let p_d = if ams.dirichlet_cells.is_empty() {
        None
    } else {
        Some(layout.add("p_d", geo.space(&ams.dirichlet_cells, k, ValueShape::Vector)?))
    };
    let neumann = if ams.neumann_cells.is_empty() {
        None
    } else {
        let y = layout.add("y", geo.space(&ams.neumann_cells, k, ValueShape::Tensor)?);
        let p_n = layout.add("p_n", geo.space(&ams.neumann_cells, k - 1, ValueShape::Vector)?);
        Some((y, p_n))
    };

    let mut dir_facets = Vec::new();
    let mut neu_facets = Vec::new();
    for b in &ams.boundary_facets {
        if b.tag == FacetTag::Neumann {
            neu_facets.push((b.facet, b.cell));
        } else {
            dir_facets.push((b.facet, b.cell));
        }
    }

    let mut terms = vec![
        Term::bilinear(Region::Cells(ams.active_cells.clone()), 1.0, vec![atom(u, Op::Stress(l))], vec![atom(u, Op::Grad)]),
        Term::bilinear(Region::BoundaryFacets(dir_facets), -1.0, vec![atom(u, Op::StressNormal(l))], vec![atom(u, Op::Value)]),
        ghost_penalty(ams.ghost_facets.clone(), l, prm.sigma_d * h, &[(u, false)], &[(u, false)]),
        lsq_residual(ams.gamma_minus_neumann(), l, prm.sigma_d * h * h, &[(u, false)], &[(u, false)], Some(vec_data(&pb.f))),
        load(&ams.active_cells, u, &pb.f, false),
    ];
    if let Some(p_d) = p_d {
        terms.push(Term::least_squares(
            Region::Cells(ams.dirichlet_cells.clone()),
            prm.gamma / (h * h),
            vec![atom(u, Op::Value), atom(p_d, Op::Value).phi().scaled(-1.0 / h)],
            Some(vec_data(&pb.ug)),
        ));
    }
    if let Some((y, p_n)) = neumann {
        let cells = || Region::Cells(ams.neumann_cells.clone());
        terms.push(Term::bilinear(Region::BoundaryFacets(neu_facets), 1.0, vec![atom(y, Op::TensorNormal)], vec![atom(u, Op::Value)]));
        terms.push(Term::least_squares(cells(), prm.gamma_u, vec![atom(y, Op::Value), atom(u, Op::Stress(l))], None));
        terms.push(Term::least_squares(
            cells(),
            prm.gamma_p / (h * h),
            vec![atom(y, Op::TensorGradPhi), atom(p_n, Op::Value).phi().scaled(1.0 / h)],
            Some(neumann_data(&pb.g)),
        ));
        terms.push(div_lsq(ams.neumann_cells.clone(), y, prm.gamma_div, Some(vec_data(&pb.f))));
    }

    let sys = Assembler::new(&layout, &geo.phi_h, pb.exactness())?.assemble(&terms)?;
    let assemble_s = t0.elapsed().as_secs_f64();
    let (x, residual, solve_s) = solve_system(&sys, &[])?;
    let aux = layout.fields().iter().enumerate().skip(1).map(|(i, f)| (f.name.clone(), layout.extract(i, &x))).collect();
    Ok(SchemeSolution {
        u: Reconstruction::Plain(layout.extract(u, &x)),
        aux,
        diagnostics: Diagnostics { ndofs: layout.total(), residual, assemble_s, solve_s },
    })
}
