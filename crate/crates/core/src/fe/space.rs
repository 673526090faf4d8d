use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fe::element::{basis_jets, local_node_barycentric, n_local_nodes, CellGeometry, Jet};
use crate::mesh::BackgroundMesh;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum ValueShape {
    Scalar,
    Vector,
    /// 2x2 tensor, components stored row-major `(00, 01, 10, 11)`.
    Tensor,
}

impl ValueShape {
    pub fn n_components(self) -> usize {
        match self {
            ValueShape::Scalar => 1,
            ValueShape::Vector => 2,
            ValueShape::Tensor => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Continuity {
    Continuous,
    Discontinuous,
}

/// Lagrange space of degree 0, 1 or 2 on a subset of background cells.
///
/// Nodes are the mesh entities touched by the scope (vertices, then edges
/// for P2; cells for P0), numbered in increasing entity order. DOF index is
/// `node * n_components + component`.
#[derive(Debug, Clone)]
pub struct FeSpace {
    mesh: Arc<BackgroundMesh>,
    degree: usize,
    shape: ValueShape,
    cells: Vec<usize>,
    cell_slot: Vec<u32>,
    cell_nodes: Vec<u32>,
    node_points: Vec<[f64; 2]>,
}

const NOT_IN_SCOPE: u32 = u32::MAX;

impl FeSpace {
    pub fn new(
        mesh: Arc<BackgroundMesh>,
        scope: &[usize],
        degree: usize,
        shape: ValueShape,
        continuity: Continuity,
    ) -> Result<Self> {
        if scope.is_empty() {
            return Err(Error::InvalidParameter("finite element space on an empty set of cells".into()));
        }
        match (degree, continuity) {
            (0, Continuity::Discontinuous) | (1, Continuity::Continuous) | (2, Continuity::Continuous) => {}
            (0, Continuity::Continuous) => {
                return Err(Error::InvalidParameter("continuous spaces need degree >= 1".into()))
            }
            _ => {
                return Err(Error::InvalidParameter(format!(
                    "unsupported Lagrange space: degree {degree}, {continuity:?}"
                )))
            }
        }
        let mut cells = scope.to_vec();
        cells.sort_unstable();
        cells.dedup();
        let n_bg = mesh.n_cells();
        if let Some(&c) = cells.last() {
            if c >= n_bg {
                return Err(Error::InvalidParameter(format!("cell {c} outside background mesh")));
            }
        }
        let mut cell_slot = vec![NOT_IN_SCOPE; n_bg];
        for (i, &c) in cells.iter().enumerate() {
            cell_slot[c] = i as u32;
        }

        let nloc = n_local_nodes(degree);
        let nv = mesh.n_vertices();
        let entity_of = |cell: usize, local: usize| -> usize {
            match degree {
                0 => cell,
                _ if local < 3 => mesh.cells()[cell][local],
                _ => nv + mesh.cell_facets()[cell][local - 3],
            }
        };
        let n_entities = match degree {
            0 => n_bg,
            1 => nv,
            _ => nv + mesh.n_facets(),
        };
        let mut compact = vec![NOT_IN_SCOPE; n_entities];
        for &c in &cells {
            for l in 0..nloc {
                compact[entity_of(c, l)] = 0;
            }
        }
        let mut node_points = Vec::new();
        for (e, slot) in compact.iter_mut().enumerate() {
            if *slot != NOT_IN_SCOPE {
                *slot = node_points.len() as u32;
                node_points.push(match degree {
                    0 => mesh.cell_geometry(e).centroid(),
                    _ if e < nv => mesh.vertices()[e],
                    _ => {
                        let [a, b] = mesh.facets()[e - nv].vertices;
                        let (pa, pb) = (mesh.vertices()[a], mesh.vertices()[b]);
                        [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]
                    }
                });
            }
        }
        let mut cell_nodes = Vec::with_capacity(cells.len() * nloc);
        for &c in &cells {
            for l in 0..nloc {
                cell_nodes.push(compact[entity_of(c, l)]);
            }
        }
        Ok(Self { mesh, degree, shape, cells, cell_slot, cell_nodes, node_points })
    }

    /// Continuous scalar/vector/tensor space on every background cell.
    pub fn on_background(mesh: Arc<BackgroundMesh>, degree: usize, shape: ValueShape) -> Result<Self> {
        let all: Vec<usize> = (0..mesh.n_cells()).collect();
        let continuity = if degree == 0 { Continuity::Discontinuous } else { Continuity::Continuous };
        Self::new(mesh, &all, degree, shape, continuity)
    }

    pub fn mesh(&self) -> &Arc<BackgroundMesh> {
        &self.mesh
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn shape(&self) -> ValueShape {
        self.shape
    }

    pub fn n_components(&self) -> usize {
        self.shape.n_components()
    }

    pub fn continuity(&self) -> Continuity {
        if self.degree == 0 {
            Continuity::Discontinuous
        } else {
            Continuity::Continuous
        }
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn contains_cell(&self, cell: usize) -> bool {
        self.cell_slot.get(cell).is_some_and(|&s| s != NOT_IN_SCOPE)
    }

    pub fn n_local_nodes(&self) -> usize {
        n_local_nodes(self.degree)
    }

    pub fn n_nodes(&self) -> usize {
        self.node_points.len()
    }

    pub fn ndofs(&self) -> usize {
        self.n_nodes() * self.n_components()
    }

    pub fn node_points(&self) -> &[[f64; 2]] {
        &self.node_points
    }

    /// Compact node indices of `cell`, or `None` outside the scope.
    pub fn cell_nodes(&self, cell: usize) -> Option<&[u32]> {
        let slot = *self.cell_slot.get(cell)?;
        if slot == NOT_IN_SCOPE {
            return None;
        }
        let n = self.n_local_nodes();
        let s = slot as usize * n;
        Some(&self.cell_nodes[s..s + n])
    }

    /// Local DOFs of `cell` in `(node, component)` order.
    pub fn cell_dofs(&self, cell: usize, out: &mut Vec<usize>) -> bool {
        out.clear();
        let Some(nodes) = self.cell_nodes(cell) else { return false };
        let nc = self.n_components();
        for &n in nodes {
            for c in 0..nc {
                out.push(n as usize * nc + c);
            }
        }
        true
    }

    pub fn dof(&self, node: usize, component: usize) -> usize {
        node * self.n_components() + component
    }

    /// Nodal interpolation of a pointwise map returning `n_components` values.
    pub fn interpolate<F, V>(self: &Arc<Self>, f: F) -> FeFunction
    where
        F: Fn([f64; 2]) -> V,
        V: AsRef<[f64]>,
    {
        let nc = self.n_components();
        let mut coeffs = vec![0.0; self.ndofs()];
        for (i, &p) in self.node_points.iter().enumerate() {
            let v = f(p);
            coeffs[i * nc..(i + 1) * nc].copy_from_slice(&v.as_ref()[..nc]);
        }
        FeFunction { space: Arc::clone(self), coeffs }
    }
}

/// Coefficient vector over an [`FeSpace`].
#[derive(Debug, Clone)]
pub struct FeFunction {
    pub space: Arc<FeSpace>,
    pub coeffs: Vec<f64>,
}

impl FeFunction {
    pub fn zeros(space: Arc<FeSpace>) -> Self {
        let n = space.ndofs();
        Self { space, coeffs: vec![0.0; n] }
    }

    pub fn from_coeffs(space: Arc<FeSpace>, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != space.ndofs() {
            return Err(Error::InvalidParameter(format!(
                "coefficient vector of length {} for a space with {} dofs",
                coeffs.len(),
                space.ndofs()
            )));
        }
        Ok(Self { space, coeffs })
    }

    /// Per-component jets on `cell` at barycentric `lambda`. `None` outside scope.
    pub fn jets(&self, cell: usize, geo: &CellGeometry, lambda: &[f64; 3]) -> Option<[Jet; 4]> {
        let nodes = self.space.cell_nodes(cell)?;
        let mut basis = [Jet::ZERO; 6];
        basis_jets(self.space.degree, geo, lambda, &mut basis);
        let nc = self.space.n_components();
        let mut out = [Jet::ZERO; 4];
        for (b, &n) in basis.iter().zip(nodes) {
            for (c, o) in out.iter_mut().enumerate().take(nc) {
                o.axpy(self.coeffs[n as usize * nc + c], b);
            }
        }
        Some(out)
    }

    /// Nodal values of `cell` for component `c`, in local node order.
    pub fn cell_nodal_values(&self, cell: usize, c: usize) -> Option<Vec<f64>> {
        let nc = self.space.n_components();
        Some(self.space.cell_nodes(cell)?.iter().map(|&n| self.coeffs[n as usize * nc + c]).collect())
    }

    /// Value at a physical point of the unit square (component-wise).
    pub fn eval(&self, p: [f64; 2]) -> Option<[f64; 4]> {
        let mesh = self.space.mesh();
        let cell = mesh.locate(p)?;
        let geo = mesh.cell_geometry(cell);
        let lam = geo.barycentric(p);
        self.jets(cell, &geo, &lam).map(|j| [j[0].val, j[1].val, j[2].val, j[3].val])
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Barycentric coordinates of the Lagrange nodes of a space's cells.
pub fn lagrange_nodes(degree: usize) -> &'static [[f64; 3]] {
    local_node_barycentric(degree)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mesh(n: usize) -> Arc<BackgroundMesh> {
        Arc::new(BackgroundMesh::new(n).unwrap())
    }

    #[test]
    fn ndofs_on_full_mesh() {
        let m1 = mesh(1);
        assert_eq!(FeSpace::on_background(m1, 1, ValueShape::Scalar).unwrap().ndofs(), 4);
        let m4 = mesh(4);
        assert_eq!(FeSpace::on_background(m4.clone(), 2, ValueShape::Scalar).unwrap().ndofs(), 81);
        assert_eq!(FeSpace::on_background(m4.clone(), 2, ValueShape::Vector).unwrap().ndofs(), 162);
        assert_eq!(FeSpace::on_background(m4.clone(), 2, ValueShape::Tensor).unwrap().ndofs(), 324);
        assert_eq!(FeSpace::on_background(m4, 0, ValueShape::Vector).unwrap().ndofs(), 64);
    }

    #[test]
    fn empty_scope_and_bad_continuity_rejected() {
        let m = mesh(2);
        assert!(FeSpace::new(m.clone(), &[], 1, ValueShape::Scalar, Continuity::Continuous).is_err());
        assert!(FeSpace::new(m, &[0], 0, ValueShape::Scalar, Continuity::Continuous).is_err());
    }

    #[test]
    fn submesh_space_is_local() {
        let m = mesh(4);
        let space = FeSpace::new(m.clone(), &[4, 5], 2, ValueShape::Scalar, Continuity::Continuous).unwrap();
        // two cells sharing one facet: 4 vertices + 5 edges
        assert_eq!(space.n_nodes(), 9);
        assert!(space.cell_nodes(7).is_none());
        assert!(space.contains_cell(5) && !space.contains_cell(6));
    }

    #[test]
    fn interpolation_values() {
        let m = mesh(16);
        let s = Arc::new(FeSpace::on_background(m, 2, ValueShape::Vector).unwrap());
        let f = s.interpolate(|p| [p[0].sin() * p[1].exp(), 0.0]);
        let v = f.eval([0.5, 0.5]).unwrap();
        assert!((v[0] - 0.5f64.sin() * 0.5f64.exp()).abs() < 1e-15);
        let z = s.interpolate(|_| [0.0, 0.0]);
        assert!(z.coeffs.iter().all(|&c| c == 0.0));
    }

    #[test]
    fn linear_reproduction_at_random_points() {
        use rand::{Rng, SeedableRng};
        let m = mesh(5);
        let s = Arc::new(FeSpace::on_background(m, 1, ValueShape::Scalar).unwrap());
        let f = s.interpolate(|p| [p[0] + p[1]]);
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        for _ in 0..20 {
            let p = [rng.random::<f64>(), rng.random::<f64>()];
            assert!((f.eval(p).unwrap()[0] - (p[0] + p[1])).abs() < 1e-13);
        }
    }
}
