//! Level-set driven unfitted finite elements on structured triangular meshes.
//!
//! The geometry of the physical domain (or of an interface/crack) enters only
//! through a level-set function `phi`, interpolated on a uniform background
//! mesh of the unit square. Boundary and interface conditions are imposed
//! through the level set (`u = u_g + phi * w`, or auxiliary unknowns on the
//! strip of cut cells) and the discrete problems are stabilized with a ghost
//! penalty on facet jumps plus cell-wise least squares on the strong equation.
//!
//! Module map:
//! - [`levelset`]: analytic level sets and their Lagrange interpolants.
//! - [`mesh`]: background mesh, cell classification, active submeshes, facet sets.
//! - [`fe`]: quadrature, Lagrange spaces, form assembly, sparse LU.
//! - [`elasticity`]: material law and the shared stabilization kernels.
//! - [`schemes`]: the Dirichlet (direct/dual), mixed, interface, crack and heat solvers.
//! - [`manufactured`]: exact solutions, error norms, convergence reports.
//! - [`cli`]: case registry and refinement sweeps behind the `phifem` binary.

pub mod cli;
pub mod elasticity;
pub mod error;
pub mod fe;
pub mod levelset;
pub mod manufactured;
pub mod mesh;
pub mod schemes;

pub use error::{Error, Result};
