//! The discrete problems: direct and dual Dirichlet, mixed Dirichlet/Neumann,
//! two-material interface, crack, and implicit-Euler heat.
//!
//! Every scheme builds its fields on the submeshes of an [`ActiveMeshSet`],
//! assembles one sparse system and solves it with a single LU factorization.

pub mod crack;
pub mod dirichlet;
pub mod heat;
pub mod interface;
pub mod mixed;

use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;

use crate::elasticity::{LameParams, SchemeParams};
use crate::error::{Error, Result};
use crate::fe::assembly::{Atom, DataFn, Op, Region, SparseSystem, Term};
use crate::fe::element::{CellGeometry, Jet};
use crate::fe::solver::LuSolver;
use crate::fe::space::{Continuity, FeFunction, FeSpace, ValueShape};
use crate::levelset::{interpolate_on_background, LevelSet};
use crate::mesh::{extract_active_set, ActiveMeshSet, BackgroundMesh, GeometryMode};

/// Pointwise vector data.
pub type VecFn = Arc<dyn Fn([f64; 2]) -> [f64; 2] + Send + Sync>;
/// Pointwise vector data with first and second derivatives, per component.
pub type VecJetFn = Arc<dyn Fn([f64; 2]) -> [Jet; 2] + Send + Sync>;

/// A [`VecJetFn`] that can sit inside a `Debug` type.
#[derive(Clone)]
pub struct DataJet(pub VecJetFn);

impl std::fmt::Debug for DataJet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("DataJet(..)")
    }
}

/// Background mesh, discrete level set and derived submeshes.
#[derive(Debug, Clone)]
pub struct Geometry {
    pub mesh: Arc<BackgroundMesh>,
    pub phi_h: FeFunction,
    pub ams: ActiveMeshSet,
    pub h: f64,
}

impl Geometry {
    pub fn new(n: usize, degree: usize, phi: &dyn LevelSet, mode: GeometryMode) -> Result<Self> {
        let mesh = Arc::new(BackgroundMesh::new(n)?);
        let phi_h = interpolate_on_background(phi, mesh.clone(), degree)?;
        let ams = extract_active_set(&mesh, &phi_h, mode)?;
        let h = mesh.h();
        Ok(Self { mesh, phi_h, ams, h })
    }

    pub fn space(&self, cells: &[usize], degree: usize, shape: ValueShape) -> Result<Arc<FeSpace>> {
        let continuity = if degree == 0 { Continuity::Discontinuous } else { Continuity::Continuous };
        Ok(Arc::new(FeSpace::new(self.mesh.clone(), cells, degree, shape, continuity)?))
    }
}

/// Discrete displacement (or temperature) in the form the scheme produces it.
#[derive(Debug, Clone)]
pub enum Reconstruction {
    Plain(FeFunction),
    /// `base + phi_h * w`.
    PhiProduct { base: FeFunction, w: FeFunction, phi: FeFunction },
    /// `data + phi_h * w` with pointwise data.
    DataPlusPhi { data: DataJet, w: FeFunction, phi: FeFunction },
    /// `side1` where `phi_h > 0`, `side2` elsewhere (falling back to the other
    /// side on cells outside one support).
    TwoSided { side1: FeFunction, side2: FeFunction },
}

impl Reconstruction {
    pub fn n_components(&self) -> usize {
        match self {
            Reconstruction::Plain(u) => u.space.n_components(),
            Reconstruction::PhiProduct { base, .. } => base.space.n_components(),
            Reconstruction::DataPlusPhi { w, .. } => w.space.n_components(),
            Reconstruction::TwoSided { side1, .. } => side1.space.n_components(),
        }
    }

    pub fn mesh(&self) -> &Arc<BackgroundMesh> {
        match self {
            Reconstruction::Plain(u) => u.space.mesh(),
            Reconstruction::PhiProduct { w, .. } | Reconstruction::DataPlusPhi { w, .. } => w.space.mesh(),
            Reconstruction::TwoSided { side1, .. } => side1.space.mesh(),
        }
    }

    /// Per-component jets on `cell`; `phi_val` selects the side of two-sided fields.
    pub fn jets(&self, cell: usize, geo: &CellGeometry, lam: &[f64; 3], phi_val: f64) -> Option<[Jet; 4]> {
        match self {
            Reconstruction::Plain(u) => u.jets(cell, geo, lam),
            Reconstruction::PhiProduct { base, w, phi } => {
                let mut out = base.jets(cell, geo, lam)?;
                let wj = w.jets(cell, geo, lam)?;
                let pj = phi.jets(cell, geo, lam)?[0];
                for (o, wc) in out.iter_mut().zip(&wj) {
                    o.axpy(1.0, &pj.mul(wc));
                }
                Some(out)
            }
            Reconstruction::DataPlusPhi { data, w, phi } => {
                let mut out = w.jets(cell, geo, lam)?;
                let pj = phi.jets(cell, geo, lam)?[0];
                let d = (data.0)(geo.point(lam));
                for (c, o) in out.iter_mut().enumerate() {
                    *o = pj.mul(o);
                    if c < 2 {
                        o.axpy(1.0, &d[c]);
                    }
                }
                Some(out)
            }
            Reconstruction::TwoSided { side1, side2 } => {
                let (first, second) = if phi_val > 0.0 { (side1, side2) } else { (side2, side1) };
                first.jets(cell, geo, lam).or_else(|| second.jets(cell, geo, lam))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct Diagnostics {
    pub ndofs: usize,
    pub residual: f64,
    pub assemble_s: f64,
    pub solve_s: f64,
}

#[derive(Debug, Clone)]
pub struct SchemeSolution {
    pub u: Reconstruction,
    /// Auxiliary unknowns by name.
    pub aux: Vec<(String, FeFunction)>,
    pub diagnostics: Diagnostics,
}

impl SchemeSolution {
    pub fn aux(&self, name: &str) -> Option<&FeFunction> {
        self.aux.iter().find(|(n, _)| n == name).map(|(_, f)| f)
    }

    /// Largest coefficient magnitude over the primary and auxiliary fields.
    pub fn max_abs_coeff(&self) -> f64 {
        let prim = match &self.u {
            Reconstruction::Plain(u) => u.max_abs(),
            Reconstruction::PhiProduct { base, w, .. } => base.max_abs().max(w.max_abs()),
            Reconstruction::DataPlusPhi { w, .. } => w.max_abs(),
            Reconstruction::TwoSided { side1, side2 } => side1.max_abs().max(side2.max_abs()),
        };
        self.aux.iter().fold(prim, |m, (_, f)| m.max(f.max_abs()))
    }
}

/// Elastic problem posed through a level set.
#[derive(Clone)]
pub struct ElasticProblem<'a> {
    pub n: usize,
    pub degree: usize,
    pub lame: LameParams,
    pub params: SchemeParams,
    pub phi: &'a dyn LevelSet,
    /// Secondary level set (mixed and crack problems).
    pub psi: Option<&'a dyn LevelSet>,
    pub f: VecFn,
    /// Dirichlet data (extended off the boundary).
    pub ug: VecFn,
    /// Derivatives of `ug`; when given, the direct scheme uses the data
    /// pointwise instead of through its nodal interpolant.
    pub ug_jet: Option<VecJetFn>,
    /// Neumann data (extended off the boundary).
    pub g: VecFn,
}

impl ElasticProblem<'_> {
    pub(crate) fn check(&self) -> Result<()> {
        if self.degree == 0 || self.degree > 2 {
            return Err(Error::InvalidParameter(format!("degree must be 1 or 2, got {}", self.degree)));
        }
        if self.n < 2 {
            return Err(Error::InvalidParameter(format!("N must be >= 2, got {}", self.n)));
        }
        self.params.validate()
    }

    pub(crate) fn exactness(&self) -> usize {
        4 * self.degree
    }
}

pub(crate) fn vec_data<'a>(f: &VecFn) -> DataFn<'a> {
    let f = Arc::clone(f);
    Box::new(move |c| {
        let v = f(c.x);
        [v[0], v[1], 0.0, 0.0]
    })
}

/// `-g |grad phi_h|` (right-hand side of the Neumann relation).
pub(crate) fn neumann_data<'a>(g: &VecFn) -> DataFn<'a> {
    let g = Arc::clone(g);
    Box::new(move |c| {
        let v = g(c.x);
        let n = c.phi.grad[0].hypot(c.phi.grad[1]);
        [-v[0] * n, -v[1] * n, 0.0, 0.0]
    })
}

pub(crate) fn atom(field: usize, op: Op) -> Atom {
    Atom::new(field, op)
}

/// `int f . v` over `cells`.
pub(crate) fn load<'a>(cells: &[usize], field: usize, f: &VecFn, times_phi: bool) -> Term<'a> {
    let a = if times_phi { atom(field, Op::Value).phi() } else { atom(field, Op::Value) };
    Term::linear(Region::Cells(cells.to_vec()), 1.0, vec![a], vec_data(f))
}

/// DOFs of a vector field located on the box boundary, with prescribed values.
pub(crate) fn box_dirichlet(space: &FeSpace, offset: usize, ug: &VecFn) -> Vec<(usize, f64)> {
    let on_box = |p: [f64; 2]| p[0] == 0.0 || p[0] == 1.0 || p[1] == 0.0 || p[1] == 1.0;
    let mut out = Vec::new();
    for (i, &p) in space.node_points().iter().enumerate() {
        if on_box(p) {
            let v = ug(p);
            out.push((offset + space.dof(i, 0), v[0]));
            out.push((offset + space.dof(i, 1), v[1]));
        }
    }
    out
}

/// Factorizes and solves, eliminating `known` DOFs first. Returns the full
/// solution, the relative residual and the solve time.
pub(crate) fn solve_system(sys: &SparseSystem, known: &[(usize, f64)]) -> Result<(Vec<f64>, f64, f64)> {
    let t = Instant::now();
    let out = if known.is_empty() {
        let lu = LuSolver::factorize(&sys.matrix)?;
        let (x, res) = lu.solve(&sys.rhs)?;
        (x, res)
    } else {
        let red = sys.reduce(known);
        let lu = LuSolver::factorize(&red.a_ff)?;
        let b = red.rhs(&sys.rhs, &red.known_values);
        let (xf, res) = lu.solve(&b)?;
        (red.expand(&xf, &red.known_values), res)
    };
    log::debug!("solved {} dofs, residual {:.2e}", sys.layout.total(), out.1);
    Ok((out.0, out.1, t.elapsed().as_secs_f64()))
}
