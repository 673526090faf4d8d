//! Generic cell/facet assembly of multi-field bilinear and linear forms.
//!
//! A [`Term`] integrates `coef * (sum of trial atoms) . (sum of test atoms)`
//! into the matrix and `coef * data . (sum of test atoms)` into the right-hand
//! side, over a list of cells, interior facets (jumps) or boundary facets.
//! An [`Atom`] is a differential operator applied to one field, optionally
//! after multiplication by the discrete level set.

use std::io::Write;
use std::sync::Arc;

use crate::elasticity::LameParams;
use crate::error::{Error, Result};
use crate::fe::element::{basis_jets, CellGeometry, Jet};
use crate::fe::quadrature::{SegmentRule, TriangleRule};
use crate::fe::space::{FeFunction, FeSpace, ValueShape};
use crate::mesh::BackgroundMesh;

#[derive(Debug, Clone)]
pub struct Field {
    pub name: String,
    pub space: Arc<FeSpace>,
    pub offset: usize,
}

/// Fields concatenated in declaration order.
#[derive(Debug, Clone, Default)]
pub struct BlockLayout {
    fields: Vec<Field>,
    total: usize,
}

impl BlockLayout {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a field and returns its index.
    pub fn add(&mut self, name: &str, space: Arc<FeSpace>) -> usize {
        let n = space.ndofs();
        self.fields.push(Field { name: name.to_string(), space, offset: self.total });
        self.total += n;
        self.fields.len() - 1
    }

    pub fn fields(&self) -> &[Field] {
        &self.fields
    }

    pub fn field(&self, i: usize) -> &Field {
        &self.fields[i]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.fields.iter().position(|f| f.name == name)
    }

    pub fn range(&self, i: usize) -> std::ops::Range<usize> {
        let f = &self.fields[i];
        f.offset..f.offset + f.space.ndofs()
    }

    pub fn total(&self) -> usize {
        self.total
    }

    /// Coefficients of field `i` extracted from a global vector.
    pub fn extract(&self, i: usize, x: &[f64]) -> FeFunction {
        FeFunction { space: Arc::clone(&self.fields[i].space), coeffs: x[self.range(i)].to_vec() }
    }
}

/// Differential operator applied to the basis functions of one field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Op {
    Value,
    /// Scalar: gradient. Vector: row-major `d_j u_i`.
    Grad,
    Stress(LameParams),
    StressNormal(LameParams),
    DivStress(LameParams),
    /// `y n` for a tensor field.
    TensorNormal,
    /// `y grad(phi_h)` for a tensor field.
    TensorGradPhi,
    /// Row-wise divergence of a tensor field.
    TensorDiv,
    Laplacian,
    NormalDeriv,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub field: usize,
    pub op: Op,
    pub scale: f64,
    /// Apply the operator to `phi_h * v` instead of `v`.
    pub times_phi: bool,
}

impl Atom {
    pub fn new(field: usize, op: Op) -> Self {
        Self { field, op, scale: 1.0, times_phi: false }
    }

    pub fn scaled(mut self, s: f64) -> Self {
        self.scale *= s;
        self
    }

    pub fn phi(mut self) -> Self {
        self.times_phi = true;
        self
    }
}

fn out_dim(op: Op, shape: ValueShape) -> Result<usize> {
    use ValueShape::*;
    let d = match (op, shape) {
        (Op::Value, s) => s.n_components(),
        (Op::Grad, Scalar) => 2,
        (Op::Grad, Vector) => 4,
        (Op::Stress(_), Vector) => 4,
        (Op::StressNormal(_) | Op::DivStress(_), Vector) => 2,
        (Op::TensorNormal | Op::TensorGradPhi | Op::TensorDiv, Tensor) => 2,
        (Op::Laplacian | Op::NormalDeriv, Scalar) => 1,
        _ => return Err(Error::Assembly(format!("operator {op:?} not defined for {shape:?} fields"))),
    };
    Ok(d)
}

/// Operator applied to the basis function `jet * e_comp`, accumulated into `out`.
#[inline]
fn apply_op(op: Op, comp: usize, j: &Jet, normal: [f64; 2], grad_phi: [f64; 2], s: f64, out: &mut [f64; 4]) {
    match op {
        Op::Value => out[comp] += s * j.val,
        Op::Grad => {
            out[2 * comp] += s * j.grad[0];
            out[2 * comp + 1] += s * j.grad[1];
        }
        Op::Stress(l) => {
            let g = j.grad;
            for a in 0..2 {
                for b in 0..2 {
                    let mut v = 0.0;
                    if a == comp {
                        v += l.mu * g[b];
                    }
                    if b == comp {
                        v += l.mu * g[a];
                    }
                    if a == b {
                        v += l.lambda * g[comp];
                    }
                    out[2 * a + b] += s * v;
                }
            }
        }
        Op::StressNormal(l) => {
            let g = j.grad;
            let gn = g[0] * normal[0] + g[1] * normal[1];
            for a in 0..2 {
                let mut v = l.mu * normal[comp] * g[a] + l.lambda * g[comp] * normal[a];
                if a == comp {
                    v += l.mu * gn;
                }
                out[a] += s * v;
            }
        }
        Op::DivStress(l) => {
            let lap = j.laplacian();
            for i in 0..2 {
                let mut v = (l.mu + l.lambda) * j.hess[i][comp];
                if i == comp {
                    v += l.mu * lap;
                }
                out[i] += s * v;
            }
        }
        Op::TensorNormal => out[comp / 2] += s * j.val * normal[comp % 2],
        Op::TensorGradPhi => out[comp / 2] += s * j.val * grad_phi[comp % 2],
        Op::TensorDiv => out[comp / 2] += s * j.grad[comp % 2],
        Op::Laplacian => out[0] += s * j.laplacian(),
        Op::NormalDeriv => out[0] += s * (j.grad[0] * normal[0] + j.grad[1] * normal[1]),
    }
}

#[derive(Debug, Clone)]
pub enum Region {
    Cells(Vec<usize>),
    /// Interior facets; the jump is `plus - minus` with `plus` the lower cell
    /// index, and the normal points out of `plus`.
    InteriorFacets(Vec<usize>),
    /// `(facet, cell)`: the normal points out of `cell`.
    BoundaryFacets(Vec<(usize, usize)>),
}

/// Quadrature-point context handed to data callbacks.
pub struct PointCtx<'c> {
    pub x: [f64; 2],
    pub cell: usize,
    pub lambda: [f64; 3],
    pub geo: &'c CellGeometry,
    /// Jet of the discrete level set on `cell`.
    pub phi: Jet,
    pub normal: [f64; 2],
}

pub type DataFn<'a> = Box<dyn Fn(&PointCtx) -> [f64; 4] + Sync + 'a>;

pub struct Term<'a> {
    pub region: Region,
    pub coef: f64,
    pub trial: Vec<Atom>,
    pub test: Vec<Atom>,
    pub data: Option<DataFn<'a>>,
}

impl<'a> Term<'a> {
    pub fn bilinear(region: Region, coef: f64, trial: Vec<Atom>, test: Vec<Atom>) -> Self {
        Self { region, coef, trial, test, data: None }
    }

    pub fn linear(region: Region, coef: f64, test: Vec<Atom>, data: DataFn<'a>) -> Self {
        Self { region, coef, trial: Vec::new(), test, data: Some(data) }
    }

    /// Least-squares term `coef * int (L u - d) . L v` with both sides built from `ops`.
    pub fn least_squares(region: Region, coef: f64, ops: Vec<Atom>, data: Option<DataFn<'a>>) -> Self {
        Self { region, coef, trial: ops.clone(), test: ops, data }
    }
}

/// Compressed sparse row matrix with sorted, unique column indices per row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self { nrows, ncols, row_ptr: vec![0; nrows + 1], col_idx: Vec::new(), values: Vec::new() }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let cols = &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]];
        match cols.binary_search(&j) {
            Ok(k) => self.values[self.row_ptr[i] + k],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.nrows)
            .map(|i| (self.row_ptr[i]..self.row_ptr[i + 1]).map(|k| self.values[k] * x[self.col_idx[k]]).sum())
            .collect()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for (i, row) in d.iter_mut().enumerate() {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                row[self.col_idx[k]] += self.values[k];
            }
        }
        d
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Sub-matrix of the given rows and columns (`col_map[j]` is the new index
    /// of column `j`, or `usize::MAX` to drop it).
    pub fn select(&self, rows: &[usize], col_map: &[usize], ncols: usize) -> CsrMatrix {
        let mut out = CsrMatrix::zeros(rows.len(), ncols);
        out.row_ptr.clear();
        out.row_ptr.push(0);
        for &r in rows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = col_map[self.col_idx[k]];
                if c != usize::MAX {
                    out.col_idx.push(c);
                    out.values.push(self.values[k]);
                }
            }
            out.row_ptr.push(out.col_idx.len());
        }
        out
    }

    /// Matrix Market coordinate dump (1-based indices).
    pub fn write_matrix_market<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(w, "{} {} {}", self.nrows, self.ncols, self.nnz())?;
        for i in 0..self.nrows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                writeln!(w, "{} {} {:.17e}", i + 1, self.col_idx[k] + 1, self.values[k])?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SparseSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub layout: BlockLayout,
}

impl SparseSystem {
    /// Eliminates the prescribed `(dof, value)` pairs.
    pub fn reduce(&self, known: &[(usize, f64)]) -> ReducedSystem {
        let n = self.layout.total();
        let mut is_known = vec![false; n];
        let mut known_val = vec![0.0; n];
        for &(d, v) in known {
            is_known[d] = true;
            known_val[d] = v;
        }
        let free: Vec<usize> = (0..n).filter(|&i| !is_known[i]).collect();
        let known_idx: Vec<usize> = (0..n).filter(|&i| is_known[i]).collect();
        let mut free_map = vec![usize::MAX; n];
        for (k, &i) in free.iter().enumerate() {
            free_map[i] = k;
        }
        let mut known_map = vec![usize::MAX; n];
        for (k, &i) in known_idx.iter().enumerate() {
            known_map[i] = k;
        }
        let a_ff = self.matrix.select(&free, &free_map, free.len());
        let a_fk = self.matrix.select(&free, &known_map, known_idx.len());
        let known_values: Vec<f64> = known_idx.iter().map(|&i| known_val[i]).collect();
        ReducedSystem { n, a_ff, a_fk, free, known_idx, known_values }
    }
}

/// System restricted to the free DOFs after eliminating prescribed values.
#[derive(Debug, Clone)]
pub struct ReducedSystem {
    pub n: usize,
    pub a_ff: CsrMatrix,
    pub a_fk: CsrMatrix,
    pub free: Vec<usize>,
    pub known_idx: Vec<usize>,
    pub known_values: Vec<f64>,
}

impl ReducedSystem {
    /// Free-row right-hand side lifted by the prescribed values.
    pub fn rhs(&self, full_rhs: &[f64], known_values: &[f64]) -> Vec<f64> {
        let lift = self.a_fk.matvec(known_values);
        self.free.iter().zip(lift).map(|(&i, l)| full_rhs[i] - l).collect()
    }

    pub fn expand(&self, x_free: &[f64], known_values: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.n];
        for (&i, &v) in self.free.iter().zip(x_free) {
            x[i] = v;
        }
        for (&i, &v) in self.known_idx.iter().zip(known_values) {
            x[i] = v;
        }
        x
    }
}

/// Assembles [`Term`]s over a [`BlockLayout`].
pub struct Assembler<'l> {
    layout: &'l BlockLayout,
    mesh: Arc<BackgroundMesh>,
    phi: &'l FeFunction,
    cell_rule: TriangleRule,
    facet_rule: SegmentRule,
}

struct Side {
    cell: usize,
    sign: f64,
    geo: CellGeometry,
}

#[derive(Default)]
struct Block {
    side: usize,
    field: usize,
    start: usize,
}

#[derive(Default)]
struct Local {
    trial_dofs: Vec<usize>,
    test_dofs: Vec<usize>,
    trial_blocks: Vec<Block>,
    test_blocks: Vec<Block>,
    mat: Vec<f64>,
    vec: Vec<f64>,
    trial_out: Vec<[f64; 4]>,
    test_out: Vec<[f64; 4]>,
    scratch: Vec<usize>,
}

impl<'l> Assembler<'l> {
    /// `exactness` is the polynomial degree integrated exactly on cells and facets.
    pub fn new(layout: &'l BlockLayout, phi: &'l FeFunction, exactness: usize) -> Result<Self> {
        let mesh = Arc::clone(phi.space.mesh());
        for f in layout.fields() {
            if !Arc::ptr_eq(f.space.mesh(), &mesh) {
                return Err(Error::Assembly(format!("field {} lives on another background mesh", f.name)));
            }
        }
        Ok(Self {
            layout,
            mesh,
            phi,
            cell_rule: TriangleRule::new(exactness)?,
            facet_rule: SegmentRule::new(exactness)?,
        })
    }

    fn validate(&self, term: &Term) -> Result<usize> {
        let mut dim = None;
        for a in term.trial.iter().chain(&term.test) {
            let field = self
                .layout
                .fields()
                .get(a.field)
                .ok_or_else(|| Error::Assembly(format!("field index {} outside the block layout", a.field)))?;
            let d = out_dim(a.op, field.space.shape())?;
            match dim {
                None => dim = Some(d),
                Some(e) if e != d => {
                    return Err(Error::Assembly(format!("atoms of one term have output sizes {e} and {d}")))
                }
                _ => {}
            }
        }
        if let Region::InteriorFacets(_) = term.region {
            if term.data.is_some() {
                return Err(Error::Assembly("data terms on interior facets are not supported".into()));
            }
        }
        dim.ok_or_else(|| Error::Assembly("term without atoms".into()))
    }

    fn n_items(region: &Region) -> usize {
        match region {
            Region::Cells(v) => v.len(),
            Region::InteriorFacets(v) => v.len(),
            Region::BoundaryFacets(v) => v.len(),
        }
    }

    fn sides(&self, region: &Region, item: usize, out: &mut Vec<Side>) -> Result<Option<usize>> {
        out.clear();
        let side = |cell: usize, sign: f64| Side { cell, sign, geo: self.mesh.cell_geometry(cell) };
        Ok(match region {
            Region::Cells(v) => {
                out.push(side(v[item], 1.0));
                None
            }
            Region::InteriorFacets(v) => {
                let f = v[item];
                match self.mesh.facets().get(f).map(|fa| fa.cells) {
                    Some([Some(a), Some(b)]) => {
                        out.push(side(a.min(b), 1.0));
                        out.push(side(a.max(b), -1.0));
                    }
                    _ => return Err(Error::Assembly(format!("facet {f} is not an interior facet"))),
                }
                Some(f)
            }
            Region::BoundaryFacets(v) => {
                let (f, c) = v[item];
                if self.mesh.local_facet(c, f).is_none() {
                    return Err(Error::Assembly(format!("facet {f} is not a facet of cell {c}")));
                }
                out.push(side(c, 1.0));
                Some(f)
            }
        })
    }

    /// Global DOFs for the atoms over the given sides, grouped in blocks.
    fn gather(&self, atoms: &[Atom], sides: &[Side], dofs: &mut Vec<usize>, blocks: &mut Vec<Block>, scratch: &mut Vec<usize>) -> Result<()> {
        dofs.clear();
        blocks.clear();
        for (si, s) in sides.iter().enumerate() {
            for a in atoms {
                if blocks.iter().any(|b| b.side == si && b.field == a.field) {
                    continue;
                }
                let field = self.layout.field(a.field);
                if !field.space.cell_dofs(s.cell, scratch) {
                    return Err(Error::Assembly(format!("cell {} outside the support of field {}", s.cell, field.name)));
                }
                blocks.push(Block { side: si, field: a.field, start: dofs.len() });
                dofs.extend(scratch.iter().map(|d| d + field.offset));
            }
        }
        Ok(())
    }

    /// Matrix sparsity induced by the terms.
    fn pattern(&self, terms: &[Term]) -> Result<CsrMatrix> {
        let n = self.layout.total();
        let mut rows: Vec<Vec<u32>> = vec![Vec::new(); n];
        let mut sides = Vec::new();
        let mut loc = Local::default();
        for term in terms {
            if term.trial.is_empty() {
                continue;
            }
            for item in 0..Self::n_items(&term.region) {
                self.sides(&term.region, item, &mut sides)?;
                self.gather(&term.trial, &sides, &mut loc.trial_dofs, &mut loc.trial_blocks, &mut loc.scratch)?;
                self.gather(&term.test, &sides, &mut loc.test_dofs, &mut loc.test_blocks, &mut loc.scratch)?;
                for &r in &loc.test_dofs {
                    rows[r].extend(loc.trial_dofs.iter().map(|&c| c as u32));
                }
            }
            for r in rows.iter_mut() {
                r.sort_unstable();
                r.dedup();
            }
        }
        let mut m = CsrMatrix::zeros(n, n);
        m.row_ptr.clear();
        m.row_ptr.push(0);
        for r in rows {
            m.col_idx.extend(r.iter().map(|&c| c as usize));
            m.row_ptr.push(m.col_idx.len());
        }
        m.values = vec![0.0; m.col_idx.len()];
        Ok(m)
    }

    fn eval_atoms(
        &self,
        atoms: &[Atom],
        blocks: &[Block],
        sides: &[Side],
        basis: &[[[Jet; 6]; 3]],
        phis: &[Jet],
        normal: [f64; 2],
        out: &mut [[f64; 4]],
    ) {
        out.iter_mut().for_each(|o| *o = [0.0; 4]);
        for a in atoms {
            let field = self.layout.field(a.field);
            let space = &field.space;
            let nc = space.n_components();
            let nloc = space.n_local_nodes();
            for (si, s) in sides.iter().enumerate() {
                let block = blocks.iter().find(|b| b.side == si && b.field == a.field).expect("gathered block");
                let phi = phis[si];
                let scale = a.scale * s.sign;
                for (l, b) in basis[si][space.degree()][..nloc].iter().enumerate() {
                    let j = if a.times_phi { b.mul(&phi) } else { *b };
                    for c in 0..nc {
                        apply_op(a.op, c, &j, normal, phi.grad, scale, &mut out[block.start + l * nc + c]);
                    }
                }
            }
        }
    }

    /// Quadrature points as per-side barycentric coordinates plus weight.
    fn points(&self, sides: &[Side], facet: Option<usize>) -> Vec<([[f64; 3]; 2], f64)> {
        match facet {
            None => self
                .cell_rule
                .points
                .iter()
                .zip(&self.cell_rule.weights)
                .map(|(p, &w)| ([*p, [0.0; 3]], w * 2.0 * sides[0].geo.area))
                .collect(),
            Some(f) => {
                let [va, vb] = self.mesh.facets()[f].vertices;
                let (pa, pb) = (self.mesh.vertices()[va], self.mesh.vertices()[vb]);
                let len = (pb[0] - pa[0]).hypot(pb[1] - pa[1]);
                self.facet_rule
                    .points
                    .iter()
                    .zip(&self.facet_rule.weights)
                    .map(|(&t, &w)| {
                        let mut lam = [[0.0; 3]; 2];
                        for (si, s) in sides.iter().enumerate() {
                            let tri = self.mesh.cells()[s.cell];
                            for (k, &v) in tri.iter().enumerate() {
                                if v == va {
                                    lam[si][k] = 1.0 - t;
                                } else if v == vb {
                                    lam[si][k] = t;
                                }
                            }
                        }
                        (lam, w * len)
                    })
                    .collect()
            }
        }
    }

    fn local(&self, term: &Term, dim: usize, sides: &[Side], facet: Option<usize>, loc: &mut Local, want_mat: bool) -> Result<()> {
        let has_trial = want_mat && !term.trial.is_empty();
        if has_trial {
            self.gather(&term.trial, sides, &mut loc.trial_dofs, &mut loc.trial_blocks, &mut loc.scratch)?;
        } else {
            loc.trial_dofs.clear();
        }
        self.gather(&term.test, sides, &mut loc.test_dofs, &mut loc.test_blocks, &mut loc.scratch)?;
        let (ntr, nte) = (loc.trial_dofs.len(), loc.test_dofs.len());
        loc.mat.clear();
        loc.mat.resize(ntr * nte, 0.0);
        loc.vec.clear();
        loc.vec.resize(nte, 0.0);
        loc.trial_out.resize(ntr, [0.0; 4]);
        loc.test_out.resize(nte, [0.0; 4]);

        let normal = match facet {
            Some(f) => self.mesh.outward_normal(sides[0].cell, f).0,
            None => [0.0; 2],
        };
        let mut basis = [[[Jet::ZERO; 6]; 3]; 2];
        let mut phis = [Jet::ZERO; 2];
        for (lam, w) in self.points(sides, facet) {
            for (si, s) in sides.iter().enumerate() {
                for deg in 0..3 {
                    basis_jets(deg, &s.geo, &lam[si], &mut basis[si][deg]);
                }
                phis[si] = self
                    .phi
                    .jets(s.cell, &s.geo, &lam[si])
                    .ok_or_else(|| Error::Assembly(format!("level set undefined on cell {}", s.cell)))?[0];
            }
            let wq = w * term.coef;
            self.eval_atoms(&term.test, &loc.test_blocks, sides, &basis, &phis, normal, &mut loc.test_out);
            if has_trial {
                self.eval_atoms(&term.trial, &loc.trial_blocks, sides, &basis, &phis, normal, &mut loc.trial_out);
                for (i, te) in loc.test_out.iter().enumerate() {
                    let row = &mut loc.mat[i * ntr..(i + 1) * ntr];
                    for (m, tr) in row.iter_mut().zip(&loc.trial_out) {
                        let mut d = 0.0;
                        for k in 0..dim {
                            d += te[k] * tr[k];
                        }
                        *m += wq * d;
                    }
                }
            }
            if let Some(data) = &term.data {
                let s = &sides[0];
                let ctx = PointCtx {
                    x: s.geo.point(&lam[0]),
                    cell: s.cell,
                    lambda: lam[0],
                    geo: &s.geo,
                    phi: phis[0],
                    normal,
                };
                let d = data(&ctx);
                for (v, te) in loc.vec.iter_mut().zip(&loc.test_out) {
                    let mut acc = 0.0;
                    for k in 0..dim {
                        acc += d[k] * te[k];
                    }
                    *v += wq * acc;
                }
            }
        }
        Ok(())
    }

    pub fn assemble(&self, terms: &[Term]) -> Result<SparseSystem> {
        let dims: Vec<usize> = terms.iter().map(|t| self.validate(t)).collect::<Result<_>>()?;
        let mut matrix = self.pattern(terms)?;
        let mut rhs = vec![0.0; self.layout.total()];
        let mut sides = Vec::new();
        let mut loc = Local::default();
        for (term, &dim) in terms.iter().zip(&dims) {
            for item in 0..Self::n_items(&term.region) {
                let facet = self.sides(&term.region, item, &mut sides)?;
                self.local(term, dim, &sides, facet, &mut loc, true)?;
                let ntr = loc.trial_dofs.len();
                for (i, &r) in loc.test_dofs.iter().enumerate() {
                    rhs[r] += loc.vec[i];
                    if ntr == 0 {
                        continue;
                    }
                    let (s, e) = (matrix.row_ptr[r], matrix.row_ptr[r + 1]);
                    let cols = &matrix.col_idx[s..e];
                    for (j, &c) in loc.trial_dofs.iter().enumerate() {
                        let k = cols.binary_search(&c).map_err(|_| Error::Assembly("entry outside pattern".into()))?;
                        matrix.values[s + k] += loc.mat[i * ntr + j];
                    }
                }
            }
        }
        Ok(SparseSystem { matrix, rhs, layout: self.layout.clone() })
    }

    /// Right-hand side only; bilinear parts of the terms are ignored.
    pub fn assemble_rhs(&self, terms: &[Term]) -> Result<Vec<f64>> {
        let mut rhs = vec![0.0; self.layout.total()];
        let mut sides = Vec::new();
        let mut loc = Local::default();
        for term in terms {
            let dim = self.validate(term)?;
            if term.data.is_none() {
                continue;
            }
            for item in 0..Self::n_items(&term.region) {
                let facet = self.sides(&term.region, item, &mut sides)?;
                self.local(term, dim, &sides, facet, &mut loc, false)?;
                for (i, &r) in loc.test_dofs.iter().enumerate() {
                    rhs[r] += loc.vec[i];
                }
            }
        }
        Ok(rhs)
    }
}

/// Jump `plus - minus` of a cellwise expression across an interior facet,
/// evaluated at the facet point with parameter `t` in `[0, 1]`.
pub fn eval_jump<F>(mesh: &BackgroundMesh, facet: usize, t: f64, expr: F) -> Result<[f64; 4]>
where
    F: Fn(usize, &CellGeometry, &[f64; 3], [f64; 2]) -> [f64; 4],
{
    let f = &mesh.facets()[facet];
    let [Some(a), Some(b)] = f.cells else {
        return Err(Error::InvalidParameter(format!("facet {facet} is on the box boundary")));
    };
    let (plus, minus) = (a.min(b), a.max(b));
    let normal = mesh.outward_normal(plus, facet).0;
    let [va, vb] = f.vertices;
    let (pa, pb) = (mesh.vertices()[va], mesh.vertices()[vb]);
    let x = [(1.0 - t) * pa[0] + t * pb[0], (1.0 - t) * pa[1] + t * pb[1]];
    let trace = |c: usize| {
        let geo = mesh.cell_geometry(c);
        let lam = geo.barycentric(x);
        expr(c, &geo, &lam, normal)
    };
    let (p, m) = (trace(plus), trace(minus));
    Ok([p[0] - m[0], p[1] - m[1], p[2] - m[2], p[3] - m[3]])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fe::space::Continuity;
    use crate::levelset::{interpolate_on_background, ConstantLevelSet};

    fn setup(n: usize, k: usize, shape: ValueShape) -> (Arc<BackgroundMesh>, BlockLayout, FeFunction) {
        let mesh = Arc::new(BackgroundMesh::new(n).unwrap());
        let phi = interpolate_on_background(&ConstantLevelSet(-1.0), mesh.clone(), 1).unwrap();
        let mut layout = BlockLayout::new();
        layout.add("u", Arc::new(FeSpace::on_background(mesh.clone(), k, shape).unwrap()));
        (mesh, layout, phi)
    }

    #[test]
    fn no_terms_gives_zero_system() {
        let (_, layout, phi) = setup(2, 1, ValueShape::Scalar);
        let sys = Assembler::new(&layout, &phi, 2).unwrap().assemble(&[]).unwrap();
        assert_eq!(sys.matrix.nnz(), 0);
        assert!(sys.rhs.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn p1_mass_matrix_on_one_cell() {
        let (mesh, layout, phi) = setup(1, 1, ValueShape::Scalar);
        let asm = Assembler::new(&layout, &phi, 2).unwrap();
        let t = Term::bilinear(Region::Cells(vec![0]), 1.0, vec![Atom::new(0, Op::Value)], vec![Atom::new(0, Op::Value)]);
        let sys = asm.assemble(&[t]).unwrap();
        let area = mesh.cell_geometry(0).area;
        let nodes = layout.field(0).space.cell_nodes(0).unwrap().to_vec();
        for &i in &nodes {
            for &j in &nodes {
                let expect = if i == j { area / 6.0 } else { area / 12.0 };
                assert!((sys.matrix.get(i as usize, j as usize) - expect).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn continuous_p1_has_no_value_jump() {
        let (_, layout, phi) = setup(1, 1, ValueShape::Scalar);
        let asm = Assembler::new(&layout, &phi, 2).unwrap();
        // facet shared by the two cells of the N=1 mesh
        let mesh = layout.field(0).space.mesh().clone();
        let f = (0..mesh.n_facets()).find(|&f| !mesh.facets()[f].is_box_boundary()).unwrap();
        let t = Term::bilinear(Region::InteriorFacets(vec![f]), 1.0, vec![Atom::new(0, Op::Value)], vec![Atom::new(0, Op::Value)]);
        let sys = asm.assemble(&[t]).unwrap();
        assert!(sys.matrix.max_abs() < 1e-15);
    }

    #[test]
    fn piecewise_constant_jump() {
        let mesh = BackgroundMesh::new(1).unwrap();
        let f = (0..mesh.n_facets()).find(|&f| !mesh.facets()[f].is_box_boundary()).unwrap();
        let j = eval_jump(&mesh, f, 0.3, |c, _, _, _| [if c == 0 { 1.0 } else { 3.0 }, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(j[0].abs(), 2.0);
        let boundary = (0..mesh.n_facets()).find(|&f| mesh.facets()[f].is_box_boundary()).unwrap();
        assert!(eval_jump(&mesh, boundary, 0.5, |_, _, _, _| [0.0; 4]).is_err());
    }

    #[test]
    fn linearity_of_assembly() {
        let (mesh, layout, phi) = setup(3, 2, ValueShape::Vector);
        let lame = LameParams::from_e_nu(2.0, 0.3).unwrap();
        let asm = Assembler::new(&layout, &phi, 8).unwrap();
        let cells: Vec<usize> = (0..mesh.n_cells()).collect();
        let facets: Vec<usize> = (0..mesh.n_facets()).filter(|&f| !mesh.facets()[f].is_box_boundary()).collect();
        let k1 = || Term::bilinear(Region::Cells(cells.clone()), 1.0, vec![Atom::new(0, Op::Stress(lame))], vec![Atom::new(0, Op::Grad)]);
        let k2 = || {
            Term::bilinear(Region::InteriorFacets(facets.clone()), 0.5, vec![Atom::new(0, Op::StressNormal(lame))], vec![Atom::new(0, Op::StressNormal(lame))])
        };
        let a1 = asm.assemble(&[k1()]).unwrap().matrix.to_dense();
        let a2 = asm.assemble(&[k2()]).unwrap().matrix.to_dense();
        let a12 = asm.assemble(&[k1(), k2()]).unwrap().matrix.to_dense();
        for i in 0..a1.len() {
            for j in 0..a1.len() {
                assert!((a12[i][j] - a1[i][j] - a2[i][j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn submesh_locality_and_scope_errors() {
        let mesh = Arc::new(BackgroundMesh::new(3).unwrap());
        let phi = interpolate_on_background(&ConstantLevelSet(-1.0), mesh.clone(), 1).unwrap();
        let mut layout = BlockLayout::new();
        layout.add("u", Arc::new(FeSpace::on_background(mesh.clone(), 1, ValueShape::Scalar).unwrap()));
        let sub = Arc::new(FeSpace::new(mesh.clone(), &[0, 1], 1, ValueShape::Scalar, Continuity::Continuous).unwrap());
        layout.add("p", sub);
        let asm = Assembler::new(&layout, &phi, 2).unwrap();
        let t = Term::bilinear(Region::Cells(vec![0]), 1.0, vec![Atom::new(1, Op::Value)], vec![Atom::new(0, Op::Value)]);
        let sys = asm.assemble(&[t]).unwrap();
        let touched: Vec<usize> = (0..sys.matrix.nrows).filter(|&r| sys.matrix.row_ptr[r + 1] > sys.matrix.row_ptr[r]).collect();
        let mut expect: Vec<usize> = layout.field(0).space.cell_nodes(0).unwrap().iter().map(|&n| n as usize).collect();
        expect.sort();
        assert_eq!(touched, expect);
        let bad = Term::bilinear(Region::Cells(vec![5]), 1.0, vec![Atom::new(1, Op::Value)], vec![Atom::new(1, Op::Value)]);
        assert!(matches!(asm.assemble(&[bad]), Err(Error::Assembly(_))));
        let out = Term::bilinear(Region::Cells(vec![0]), 1.0, vec![Atom::new(7, Op::Value)], vec![Atom::new(0, Op::Value)]);
        assert!(matches!(asm.assemble(&[out]), Err(Error::Assembly(_))));
    }

    #[test]
    fn known_dof_elimination() {
        let (mesh, layout, phi) = setup(2, 1, ValueShape::Scalar);
        let asm = Assembler::new(&layout, &phi, 2).unwrap();
        let cells: Vec<usize> = (0..mesh.n_cells()).collect();
        let t = Term::bilinear(Region::Cells(cells), 1.0, vec![Atom::new(0, Op::Grad)], vec![Atom::new(0, Op::Grad)]);
        let sys = asm.assemble(&[t]).unwrap();
        let known: Vec<(usize, f64)> = (0..9).filter(|&i| i != 4).map(|i| (i, 1.0)).collect();
        let red = sys.reduce(&known);
        assert_eq!(red.free, vec![4]);
        let b = red.rhs(&sys.rhs, &red.known_values);
        // harmonic with constant boundary data: interior value equals the data
        let x = b[0] / red.a_ff.get(0, 0);
        assert!((x - 1.0).abs() < 1e-13);
    }

    #[test]
    fn matrix_market_dump() {
        let (_, layout, phi) = setup(1, 1, ValueShape::Scalar);
        let asm = Assembler::new(&layout, &phi, 2).unwrap();
        let t = Term::bilinear(Region::Cells(vec![0, 1]), 1.0, vec![Atom::new(0, Op::Value)], vec![Atom::new(0, Op::Value)]);
        let sys = asm.assemble(&[t]).unwrap();
        let mut buf = Vec::new();
        sys.matrix.write_matrix_market(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("%%MatrixMarket matrix coordinate real general\n4 4 "));
        assert_eq!(s.lines().count(), 2 + sys.matrix.nnz());
    }
}
