//! Structured background mesh of the unit square and the submeshes and facet
//! sets derived from a discrete level set.

use std::collections::HashMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fe::element::{local_node_barycentric, CellGeometry};
use crate::fe::space::FeFunction;
use crate::levelset::LevelSet;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Facet {
    pub vertices: [usize; 2],
    /// Incident cells, lowest index first; `cells[1]` is `None` on the box boundary.
    pub cells: [Option<usize>; 2],
}

impl Facet {
    pub fn is_box_boundary(&self) -> bool {
        self.cells[1].is_none()
    }
}

/// Uniform triangulation of `[0,1]^2`: each of the `N x N` squares is split
/// along its lower-left to upper-right diagonal.
#[derive(Debug, Clone)]
pub struct BackgroundMesh {
    n: usize,
    vertices: Vec<[f64; 2]>,
    cells: Vec<[usize; 3]>,
    facets: Vec<Facet>,
    /// Local facet `k` of a cell is opposite its local vertex `k`.
    cell_facets: Vec<[usize; 3]>,
}

impl BackgroundMesh {
    pub fn new(n: usize) -> Result<Self> {
        if n < 1 {
            return Err(Error::InvalidParameter("mesh needs N >= 1".into()));
        }
        let nf = n as f64;
        let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
        for j in 0..=n {
            for i in 0..=n {
                vertices.push([i as f64 / nf, j as f64 / nf]);
            }
        }
        let vid = |i: usize, j: usize| j * (n + 1) + i;
        let mut cells = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                let (v00, v10, v01, v11) = (vid(i, j), vid(i + 1, j), vid(i, j + 1), vid(i + 1, j + 1));
                cells.push([v00, v10, v11]);
                cells.push([v00, v11, v01]);
            }
        }
        let mut lookup: HashMap<(usize, usize), usize> = HashMap::with_capacity(3 * n * n + 2 * n);
        let mut facets: Vec<Facet> = Vec::with_capacity(3 * n * n + 2 * n);
        let mut cell_facets = Vec::with_capacity(cells.len());
        for (c, tri) in cells.iter().enumerate() {
            let mut cf = [0; 3];
            for (k, slot) in cf.iter_mut().enumerate() {
                let a = tri[(k + 1) % 3];
                let b = tri[(k + 2) % 3];
                let key = (a.min(b), a.max(b));
                *slot = *lookup.entry(key).or_insert_with(|| {
                    facets.push(Facet { vertices: [a, b], cells: [None, None] });
                    facets.len() - 1
                });
                let f = &mut facets[*slot];
                if f.cells[0].is_none() {
                    f.cells[0] = Some(c);
                } else {
                    f.cells[1] = Some(c);
                }
            }
            cell_facets.push(cf);
        }
        Ok(Self { n, vertices, cells, facets, cell_facets })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Cell diameter `sqrt(2)/N`.
    pub fn h(&self) -> f64 {
        Self::h_of(self.n)
    }

    /// Cell diameter of the `n x n` mesh.
    pub fn h_of(n: usize) -> f64 {
        std::f64::consts::SQRT_2 / n as f64
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn cells(&self) -> &[[usize; 3]] {
        &self.cells
    }

    pub fn facets(&self) -> &[Facet] {
        &self.facets
    }

    pub fn cell_facets(&self) -> &[[usize; 3]] {
        &self.cell_facets
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn n_facets(&self) -> usize {
        self.facets.len()
    }

    pub fn cell_geometry(&self, cell: usize) -> CellGeometry {
        let [a, b, c] = self.cells[cell];
        CellGeometry::new([self.vertices[a], self.vertices[b], self.vertices[c]])
    }

    /// Local index (0..3) of `facet` in `cell`.
    pub fn local_facet(&self, cell: usize, facet: usize) -> Option<usize> {
        self.cell_facets[cell].iter().position(|&f| f == facet)
    }

    /// Unit normal of `facet` pointing out of `cell`, and the facet length.
    pub fn outward_normal(&self, cell: usize, facet: usize) -> ([f64; 2], f64) {
        let k = self.local_facet(cell, facet).expect("facet not on cell");
        let tri = self.cells[cell];
        let a = self.vertices[tri[(k + 1) % 3]];
        let b = self.vertices[tri[(k + 2) % 3]];
        let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
        let len = dx.hypot(dy);
        // counterclockwise cells: the right-hand normal of each edge points out
        ([dy / len, -dx / len], len)
    }

    /// Cell containing `p` (ties resolved towards the lower/left cell).
    pub fn locate(&self, p: [f64; 2]) -> Option<usize> {
        if !(0.0..=1.0).contains(&p[0]) || !(0.0..=1.0).contains(&p[1]) {
            return None;
        }
        let n = self.n;
        let nf = n as f64;
        let i = ((p[0] * nf).floor() as usize).min(n - 1);
        let j = ((p[1] * nf).floor() as usize).min(n - 1);
        let (xl, yl) = (p[0] * nf - i as f64, p[1] * nf - j as f64);
        let base = 2 * (j * n + i);
        Some(if yl <= xl { base } else { base + 1 })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SignStatus {
    AllNegative,
    AllPositive,
    Mixed,
}

/// Sign status of `cell` from the nodal values of `phi_h` on it. A nodal zero
/// counts as a sign change.
pub fn classify_cell(cell: usize, phi_h: &FeFunction) -> Result<SignStatus> {
    let vals = phi_h
        .cell_nodal_values(cell, 0)
        .ok_or_else(|| Error::InvalidParameter(format!("level set not defined on cell {cell}")))?;
    Ok(status_of(&vals))
}

fn status_of(vals: &[f64]) -> SignStatus {
    if vals.iter().all(|&v| v < 0.0) {
        SignStatus::AllNegative
    } else if vals.iter().all(|&v| v > 0.0) {
        SignStatus::AllPositive
    } else {
        SignStatus::Mixed
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GeometryMode {
    /// Physical domain `{phi < 0}` with boundary `{phi = 0}`.
    Boundary,
    /// Two subdomains separated by `{phi = 0}`; side 1 is `{phi > 0}`.
    Interface,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FacetTag {
    Untagged,
    /// Boundary facet of a Dirichlet-marked cell.
    Dirichlet,
    /// Boundary facet of a Neumann-marked cell.
    Neumann,
    /// Side boundary facet of a cell of the fictitious-interface strip.
    Internal,
    /// Side boundary facet of a cell of the crack strip.
    Crack,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BoundaryFacet {
    pub facet: usize,
    /// The unique incident cell inside the (sub)mesh.
    pub cell: usize,
    pub tag: FacetTag,
}

/// Cell and facet sets derived from a discrete level set. All sets are sorted.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActiveMeshSet {
    pub mode: GeometryMode,
    pub n: usize,
    pub active_cells: Vec<usize>,
    pub gamma_cells: Vec<usize>,
    pub dirichlet_cells: Vec<usize>,
    pub neumann_cells: Vec<usize>,
    pub side1_cells: Vec<usize>,
    pub side2_cells: Vec<usize>,
    pub internal_cells: Vec<usize>,
    pub crack_cells: Vec<usize>,
    /// Boundary mode: internal facets of `T_h` touching the strip.
    /// Interface mode: union of the two per-side sets.
    pub ghost_facets: Vec<usize>,
    /// Interface mode only: ghost facets of side 1 and side 2.
    pub side_ghost_facets: [Vec<usize>; 2],
    /// Boundary mode: facets of `partial Omega_h`.
    pub boundary_facets: Vec<BoundaryFacet>,
    /// Interface mode: fictitious boundary of each side (box facets excluded).
    pub side_boundary_facets: [Vec<BoundaryFacet>; 2],
}

fn mask(n: usize, set: &[usize]) -> Vec<bool> {
    let mut m = vec![false; n];
    for &c in set {
        m[c] = true;
    }
    m
}

impl ActiveMeshSet {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Strip cells that are neither Neumann-marked (boundary mode) nor crack
    /// cells (interface mode); with no secondary marking this is the whole strip.
    pub fn gamma_minus_neumann(&self) -> Vec<usize> {
        let nm = mask(2 * self.n * self.n, &self.neumann_cells);
        self.gamma_cells.iter().copied().filter(|&c| !nm[c]).collect()
    }
}

/// Active set of `phi_h` (a scalar function on the whole background mesh).
pub fn extract_active_set(bg: &BackgroundMesh, phi_h: &FeFunction, mode: GeometryMode) -> Result<ActiveMeshSet> {
    let n_cells = bg.n_cells();
    let mut status = Vec::with_capacity(n_cells);
    for c in 0..n_cells {
        status.push(classify_cell(c, phi_h)?);
    }
    let pick = |f: &dyn Fn(SignStatus) -> bool| -> Vec<usize> { (0..n_cells).filter(|&c| f(status[c])).collect() };
    let gamma_cells = pick(&|s| s == SignStatus::Mixed);
    let mut ams = ActiveMeshSet {
        mode,
        n: bg.n(),
        active_cells: Vec::new(),
        gamma_cells,
        dirichlet_cells: Vec::new(),
        neumann_cells: Vec::new(),
        side1_cells: Vec::new(),
        side2_cells: Vec::new(),
        internal_cells: Vec::new(),
        crack_cells: Vec::new(),
        ghost_facets: Vec::new(),
        side_ghost_facets: [Vec::new(), Vec::new()],
        boundary_facets: Vec::new(),
        side_boundary_facets: [Vec::new(), Vec::new()],
    };
    match mode {
        GeometryMode::Boundary => {
            ams.active_cells = pick(&|s| s != SignStatus::AllPositive);
            if ams.active_cells.is_empty() {
                return Err(Error::DegenerateGeometry("no background cell meets {phi_h < 0}".into()));
            }
        }
        GeometryMode::Interface => {
            ams.side1_cells = pick(&|s| s != SignStatus::AllNegative);
            ams.side2_cells = pick(&|s| s != SignStatus::AllPositive);
            if ams.side1_cells.is_empty() || ams.side2_cells.is_empty() {
                return Err(Error::DegenerateGeometry("interface level set does not split the box".into()));
            }
            ams.active_cells = (0..n_cells).collect();
            ams.internal_cells = ams.gamma_cells.clone();
        }
    }
    refresh_facet_sets(bg, &mut ams);
    Ok(ams)
}

/// Sample points of the secondary-level-set test: vertices and edge midpoints.
fn psi_samples(bg: &BackgroundMesh, cell: usize, psi: &dyn LevelSet) -> [f64; 6] {
    let geo = bg.cell_geometry(cell);
    let mut out = [0.0; 6];
    for (o, lam) in out.iter_mut().zip(local_node_barycentric(2)) {
        *o = psi.eval(geo.point(lam));
    }
    out
}

fn split_by_psi(bg: &BackgroundMesh, cells: &[usize], psi: &dyn LevelSet) -> (Vec<usize>, Vec<usize>) {
    let mut nonpos = Vec::new();
    let mut nonneg = Vec::new();
    for &c in cells {
        let s = psi_samples(bg, c, psi);
        if s.iter().all(|&v| v <= 0.0) {
            nonpos.push(c);
        }
        if s.iter().all(|&v| v >= 0.0) {
            nonneg.push(c);
        }
    }
    (nonpos, nonneg)
}

/// Splits the strip of a boundary-mode set into Dirichlet (`psi <= 0`) and
/// Neumann (`psi >= 0`) cells; cells where `psi` changes sign stay unmarked.
pub fn mark_dirichlet_neumann(bg: &BackgroundMesh, ams: &ActiveMeshSet, psi: &dyn LevelSet) -> Result<ActiveMeshSet> {
    if ams.mode != GeometryMode::Boundary {
        return Err(Error::InvalidParameter("Dirichlet/Neumann marking needs a boundary-mode set".into()));
    }
    let mut out = ams.clone();
    (out.dirichlet_cells, out.neumann_cells) = split_by_psi(bg, &ams.gamma_cells, psi);
    refresh_facet_sets(bg, &mut out);
    Ok(out)
}

/// Splits the strip of an interface-mode set into the fictitious-interface
/// part (`psi <= 0`) and the crack part (`psi >= 0`).
pub fn mark_crack(bg: &BackgroundMesh, ams: &ActiveMeshSet, psi: &dyn LevelSet) -> Result<ActiveMeshSet> {
    if ams.mode != GeometryMode::Interface {
        return Err(Error::InvalidParameter("crack marking needs an interface-mode set".into()));
    }
    let mut out = ams.clone();
    (out.internal_cells, out.crack_cells) = split_by_psi(bg, &ams.gamma_cells, psi);
    refresh_facet_sets(bg, &mut out);
    Ok(out)
}

/// Internal facets of the submesh `scope` with at least one incident strip cell.
fn ghost_facets_of(bg: &BackgroundMesh, scope: &[bool], gamma: &[bool]) -> Vec<usize> {
    bg.facets()
        .iter()
        .enumerate()
        .filter_map(|(i, f)| match f.cells {
            [Some(a), Some(b)] if scope[a] && scope[b] && (gamma[a] || gamma[b]) => Some(i),
            _ => None,
        })
        .collect()
}

/// Facets with exactly one incident cell in `scope`.
fn boundary_of(bg: &BackgroundMesh, scope: &[bool], include_box: bool) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (i, f) in bg.facets().iter().enumerate() {
        match f.cells {
            [Some(a), Some(b)] => {
                if scope[a] != scope[b] {
                    out.push((i, if scope[a] { a } else { b }));
                }
            }
            [Some(a), None] if include_box && scope[a] => out.push((i, a)),
            _ => {}
        }
    }
    out
}

/// Facet set `F_h^Gamma` of the set (union of the per-side sets in interface mode).
pub fn ghost_facet_set(bg: &BackgroundMesh, ams: &ActiveMeshSet) -> Vec<usize> {
    let nc = bg.n_cells();
    let gamma = mask(nc, &ams.gamma_cells);
    match ams.mode {
        GeometryMode::Boundary => ghost_facets_of(bg, &mask(nc, &ams.active_cells), &gamma),
        GeometryMode::Interface => {
            let mut all: Vec<usize> = ghost_facets_of(bg, &mask(nc, &ams.side1_cells), &gamma);
            all.extend(ghost_facets_of(bg, &mask(nc, &ams.side2_cells), &gamma));
            all.sort_unstable();
            all.dedup();
            all
        }
    }
}

/// Tagged boundary facets: `partial Omega_h` in boundary mode, the two
/// fictitious side boundaries in interface mode.
pub fn boundary_subsets(bg: &BackgroundMesh, ams: &ActiveMeshSet) -> (Vec<BoundaryFacet>, [Vec<BoundaryFacet>; 2]) {
    let nc = bg.n_cells();
    match ams.mode {
        GeometryMode::Boundary => {
            let neu = mask(nc, &ams.neumann_cells);
            let dir = mask(nc, &ams.dirichlet_cells);
            let list = boundary_of(bg, &mask(nc, &ams.active_cells), true)
                .into_iter()
                .map(|(facet, cell)| {
                    let tag = if neu[cell] {
                        FacetTag::Neumann
                    } else if dir[cell] {
                        FacetTag::Dirichlet
                    } else {
                        FacetTag::Untagged
                    };
                    BoundaryFacet { facet, cell, tag }
                })
                .collect();
            (list, [Vec::new(), Vec::new()])
        }
        GeometryMode::Interface => {
            let int = mask(nc, &ams.internal_cells);
            let crk = mask(nc, &ams.crack_cells);
            let side = |cells: &[usize]| -> Vec<BoundaryFacet> {
                boundary_of(bg, &mask(nc, cells), false)
                    .into_iter()
                    .map(|(facet, cell)| {
                        let tag = if int[cell] {
                            FacetTag::Internal
                        } else if crk[cell] {
                            FacetTag::Crack
                        } else {
                            FacetTag::Untagged
                        };
                        BoundaryFacet { facet, cell, tag }
                    })
                    .collect()
            };
            (Vec::new(), [side(&ams.side1_cells), side(&ams.side2_cells)])
        }
    }
}

fn refresh_facet_sets(bg: &BackgroundMesh, ams: &mut ActiveMeshSet) {
    if ams.mode == GeometryMode::Interface {
        let nc = bg.n_cells();
        let gamma = mask(nc, &ams.gamma_cells);
        ams.side_ghost_facets = [
            ghost_facets_of(bg, &mask(nc, &ams.side1_cells), &gamma),
            ghost_facets_of(bg, &mask(nc, &ams.side2_cells), &gamma),
        ];
    }
    ams.ghost_facets = ghost_facet_set(bg, ams);
    let (b, s) = boundary_subsets(bg, ams);
    ams.boundary_facets = b;
    ams.side_boundary_facets = s;
}
