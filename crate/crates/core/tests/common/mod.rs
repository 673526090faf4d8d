//! Property checks shared by the `properties` and `acceptance` tests.
#![allow(dead_code)]

use std::sync::Arc;

use nalgebra::DMatrix;
use phifem::elasticity::{ghost_penalty, lsq_residual, LameParams, SchemeParams};
use phifem::fe::assembly::{Assembler, BlockLayout};
use phifem::fe::element::Jet;
use phifem::fe::space::{Continuity, FeFunction, FeSpace, ValueShape};
use phifem::levelset::{circle_levelset, crack_levelsets, interface_levelset, interpolate_on_background, mixed_secondary_levelset, ConstantLevelSet, LevelSet};
use phifem::manufactured::*;
use phifem::mesh::{extract_active_set, BackgroundMesh, GeometryMode};
use phifem::schemes::crack::solve_crack;
use phifem::schemes::dirichlet::{solve_dirichlet_direct, solve_dirichlet_dual};
use phifem::schemes::heat::{solve_heat_with, HeatProblem};
use phifem::schemes::interface::{solve_interface, InterfaceProblem};
use phifem::schemes::mixed::solve_mixed;
use phifem::schemes::{ElasticProblem, Reconstruction, SchemeSolution, VecFn, VecJetFn};

const RES_TOL: f64 = 1e-9;

fn zero() -> VecFn {
    Arc::new(|_| [0.0, 0.0])
}

fn lame() -> LameParams {
    LameParams::from_e_nu(2.0, 0.3).unwrap()
}

fn problem<'a>(n: usize, phi: &'a dyn LevelSet, psi: Option<&'a dyn LevelSet>) -> ElasticProblem<'a> {
    ElasticProblem { n, degree: 2, lame: lame(), params: SchemeParams::default(), phi, psi, f: zero(), ug: zero(), ug_jet: None, g: zero() }
}

fn check_zero(name: &str, s: &SchemeSolution) {
    assert!(s.diagnostics.residual <= RES_TOL, "{name}: residual {}", s.diagnostics.residual);
    assert!(s.max_abs_coeff() <= 1e-10, "{name}: max coefficient {}", s.max_abs_coeff());
}

pub fn zero_data_gives_zero_solution_for_every_solver() {
    let circle = circle_levelset();
    let psi = mixed_secondary_levelset();
    let (crack_phi, crack_psi) = crack_levelsets();
    let iface = interface_levelset(0.3).unwrap();

    check_zero("direct", &solve_dirichlet_direct(&problem(8, &circle, None)).unwrap());
    let zero_jet: VecJetFn = Arc::new(|_| [Jet::constant(0.0); 2]);
    let pb = ElasticProblem { ug_jet: Some(zero_jet), ..problem(8, &circle, None) };
    check_zero("direct, pointwise data", &solve_dirichlet_direct(&pb).unwrap());
    check_zero("dual", &solve_dirichlet_dual(&problem(8, &circle, None)).unwrap());
    check_zero("mixed", &solve_mixed(&problem(8, &circle, Some(&psi))).unwrap());
    check_zero("crack", &solve_crack(&problem(10, &crack_phi, Some(&crack_psi))).unwrap());
    let pb = InterfaceProblem { n: 10, degree: 2, lame: [lame(); 2], params: SchemeParams::default(), phi: &iface, f: zero(), ug: zero() };
    check_zero("interface", &solve_interface(&pb).unwrap());

    let pb = HeatProblem {
        n: 8,
        degree: 1,
        sigma_d: 20.0,
        sigma: 20.0,
        phi: &circle,
        f: Arc::new(|_, _| 0.0),
        ug: Arc::new(|_, _| 0.0),
        ug_jet: None,
        u0: Arc::new(|_| 0.0),
    };
    let mut steps = 0;
    let (_, d) = solve_heat_with(&pb, 0.1, 0.5, |s| {
        let m = match &s.u {
            Reconstruction::Plain(u) => u.max_abs(),
            Reconstruction::PhiProduct { base, w, .. } => base.max_abs().max(w.max_abs()),
            other => panic!("unexpected reconstruction {other:?}"),
        };
        assert!(m <= 1e-10, "heat: max coefficient {m} at t={}", s.t);
        steps += 1;
        Ok(())
    })
    .unwrap();
    assert_eq!(steps, 6);
    assert!(d.residual <= RES_TOL);
}

fn affine() -> (VecFn, GradFn) {
    let u: VecFn = Arc::new(|[x, y]| [0.3 + 1.2 * x - 0.7 * y, -0.4 + 0.5 * x + 2.0 * y]);
    let g: GradFn = Arc::new(|_| [[1.2, -0.7], [0.5, 2.0]]);
    (u, g)
}

fn relative_errors(u: &Reconstruction, phi: &dyn LevelSet, exact: (&VecFn, &GradFn)) -> (f64, f64) {
    let phi_h = interpolate_on_background(phi, u.mesh().clone(), 2).unwrap();
    let e = error_integrals(u, &phi_h, true, 8, |x| ((exact.0)(x), (exact.1)(x))).unwrap();
    e.relative().unwrap()
}

pub fn direct_scheme_reproduces_affine_fields() {
    let circle = circle_levelset();
    let (u, grad) = affine();
    // Nodal data: the interpolant of an affine field is exact, so w_h = 0.
    let pb = ElasticProblem { ug: u.clone(), ..problem(8, &circle, None) };
    let s = solve_dirichlet_direct(&pb).unwrap();
    let (l2, h1) = relative_errors(&s.u, &circle, (&u, &grad));
    assert!(l2 <= 1e-9 && h1 <= 1e-9, "nodal data: {l2:e} {h1:e}");

    // Perturbed pointwise data u (1 + phi): w = -u is affine again.
    let c = Arc::new(circle);
    let (uc, pc) = (u.clone(), c.clone());
    let jet: VecJetFn = Arc::new(move |p| {
        let v = uc(p);
        let mut s = phifem::levelset::levelset_jet(pc.as_ref(), p);
        s.val += 1.0;
        let lin = |i: usize| Jet { val: v[i], grad: [[1.2, -0.7], [0.5, 2.0]][i], hess: [[0.0; 2]; 2] };
        [lin(0).mul(&s), lin(1).mul(&s)]
    });
    let pb = ElasticProblem { ug_jet: Some(jet), ..problem(8, c.as_ref(), None) };
    let s = solve_dirichlet_direct(&pb).unwrap();
    let (l2, h1) = relative_errors(&s.u, c.as_ref(), (&u, &grad));
    assert!(l2 <= 1e-9 && h1 <= 1e-9, "pointwise data: {l2:e} {h1:e}");
}

fn dense(m: &phifem::fe::assembly::CsrMatrix) -> DMatrix<f64> {
    let d = m.to_dense();
    DMatrix::from_fn(m.nrows, m.ncols, |i, j| d[i][j])
}

fn assert_symmetric_psd(name: &str, a: &DMatrix<f64>) {
    let scale = a.amax();
    assert!(scale > 0.0, "{name} is empty");
    assert!((a - a.transpose()).amax() <= 1e-12 * scale, "{name} not symmetric");
    let eig = a.clone().symmetric_eigen().eigenvalues;
    let min = eig.min();
    assert!(min >= -1e-10 * scale, "{name}: eigenvalue {min:e} (scale {scale:e})");
}

pub fn stabilization_blocks_are_symmetric_psd() {
    let circle = circle_levelset();
    for n in [4, 6, 8] {
        let mesh = Arc::new(BackgroundMesh::new(n).unwrap());
        let phi_h = interpolate_on_background(&circle, mesh.clone(), 2).unwrap();
        let ams = extract_active_set(&mesh, &phi_h, GeometryMode::Boundary).unwrap();
        let v = Arc::new(FeSpace::new(mesh.clone(), &ams.active_cells, 2, ValueShape::Vector, Continuity::Continuous).unwrap());
        let mut layout = BlockLayout::new();
        let u = layout.add("u", v);
        let asm = Assembler::new(&layout, &phi_h, 8).unwrap();
        let h = mesh.h();
        for (label, phi) in [("plain", false), ("times phi_h", true)] {
            let g = ghost_penalty(ams.ghost_facets.clone(), lame(), 20.0 * h, &[(u, phi)], &[(u, phi)]);
            assert_symmetric_psd(&format!("G_h {label}, N={n}"), &dense(&asm.assemble(&[g]).unwrap().matrix));
            let j = lsq_residual(ams.gamma_cells.clone(), lame(), 20.0 * h * h, &[(u, phi)], &[(u, phi)], None);
            assert_symmetric_psd(&format!("J_h {label}, N={n}"), &dense(&asm.assemble(&[j]).unwrap().matrix));
        }
    }
}

pub fn manufactured_forces_pass_the_finite_difference_oracle() {
    for c in [case_dirichlet(), case_mixed(), case_interface(), case_crack()] {
        let r = c.fd_residual();
        assert!(r <= FD_TOL, "{}: {r:e}", c.tag);
    }
    let r = case_heat().fd_residual();
    assert!(r <= FD_TOL, "heat: {r:e}");
}

pub fn mixed_with_dirichlet_everywhere_matches_dual() {
    let c = case_dirichlet();
    let all_dirichlet = ConstantLevelSet(-1.0);
    let base = ElasticProblem { f: c.f.clone(), ug: c.ug.clone(), g: c.g.clone(), ..problem(12, c.phi.as_ref(), None) };
    let dual = solve_dirichlet_dual(&base).unwrap();
    let mixed = solve_mixed(&ElasticProblem { psi: Some(&all_dirichlet), ..base.clone() }).unwrap();
    let (Reconstruction::Plain(a), Reconstruction::Plain(b)) = (&dual.u, &mixed.u) else { panic!("plain fields expected") };
    assert_eq!(a.coeffs.len(), b.coeffs.len());
    let diff = a.coeffs.iter().zip(&b.coeffs).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    assert!(diff <= 1e-9 * a.max_abs(), "max difference {diff:e}");
}

pub fn masked_domain_area_converges_to_the_disc() {
    let circle = circle_levelset();
    let target = std::f64::consts::PI / 8.0;
    let mut last = f64::INFINITY;
    for n in [16, 32, 64] {
        let mesh = Arc::new(BackgroundMesh::new(n).unwrap());
        let phi_h = interpolate_on_background(&circle, mesh.clone(), 2).unwrap();
        let ams = extract_active_set(&mesh, &phi_h, GeometryMode::Boundary).unwrap();
        let v = Arc::new(FeSpace::new(mesh, &ams.active_cells, 1, ValueShape::Vector, Continuity::Continuous).unwrap());
        let one = Reconstruction::Plain(v.interpolate(|_| [1.0, 0.0]));
        let e = error_integrals(&one, &phi_h, true, 6, |_| ([1.0, 0.0], [[0.0; 2]; 2])).unwrap();
        last = (e.area - target).abs() / target;
    }
    assert!(last <= 0.02, "relative area mismatch {last:e}");
}

pub fn repeated_solves_are_bit_identical() {
    let c = case_mixed();
    let pb = ElasticProblem { f: c.f.clone(), ug: c.ug.clone(), g: c.g.clone(), ..problem(10, c.phi.as_ref(), c.psi.as_deref()) };
    let coeffs = |s: &SchemeSolution| -> Vec<f64> { s.aux.iter().flat_map(|(_, f): &(String, FeFunction)| f.coeffs.clone()).collect() };
    let a = coeffs(&solve_mixed(&pb).unwrap());
    let b = coeffs(&solve_mixed(&pb).unwrap());
    assert_eq!(a, b);
}

pub fn interface_flux_mismatch_decreases_under_refinement() {
    let c = case_interface();
    let mut prev = f64::INFINITY;
    for n in [10, 20, 40] {
        let pb = InterfaceProblem { n, degree: 2, lame: c.lame, params: SchemeParams::default(), phi: c.phi.as_ref(), f: c.f.clone(), ug: c.ug.clone() };
        let s = solve_interface(&pb).unwrap();
        let (y1, y2) = (s.aux("y1").unwrap(), s.aux("y2").unwrap());
        let mesh = y1.space.mesh().clone();
        let phi_h = interpolate_on_background(c.phi.as_ref(), mesh.clone(), 2).unwrap();
        let rule = phifem::fe::quadrature::TriangleRule::new(8).unwrap();
        let mut total = 0.0;
        for &cell in y1.space.cells() {
            let geo = mesh.cell_geometry(cell);
            for (lam, &w) in rule.points.iter().zip(&rule.weights) {
                let (a, b) = (y1.jets(cell, &geo, lam).unwrap(), y2.jets(cell, &geo, lam).unwrap());
                let gp = phi_h.jets(cell, &geo, lam).unwrap()[0].grad;
                for i in 0..2 {
                    let d: f64 = (0..2).map(|j| (a[2 * i + j].val - b[2 * i + j].val) * gp[j]).sum();
                    total += w * 2.0 * geo.area * d * d;
                }
            }
        }
        assert!(total < prev, "N={n}: {total:e} after {prev:e}");
        prev = total;
    }
}

pub mod classification {
    use super::*;
    use phifem::levelset::AffineLevelSet;
    use phifem::levelset::CircleLevelSet;
    use phifem::mesh::ActiveMeshSet;
    use proptest::prelude::*;
    use proptest::test_runner::TestRunner;

    fn sets(n: usize, ls: &dyn LevelSet, mode: GeometryMode) -> Option<(BackgroundMesh, ActiveMeshSet)> {
        let mesh = Arc::new(BackgroundMesh::new(n).unwrap());
        let phi_h = interpolate_on_background(ls, mesh.clone(), 2).unwrap();
        let ams = extract_active_set(&mesh, &phi_h, mode).ok()?;
        Some(((*mesh).clone(), ams))
    }

    fn check(n: usize, ls: &dyn LevelSet) {
        let nc = 2 * n * n;
        if let Some((mesh, b)) = sets(n, ls, GeometryMode::Boundary) {
            assert!(b.gamma_cells.iter().all(|c| b.active_cells.binary_search(c).is_ok()), "strip outside the active set");
            for &f in &b.ghost_facets {
                let [Some(c0), Some(c1)] = mesh.facets()[f].cells else { panic!("ghost facet {f} on the box boundary") };
                assert!(b.active_cells.binary_search(&c0).is_ok() && b.active_cells.binary_search(&c1).is_ok());
                assert!(b.gamma_cells.binary_search(&c0).is_ok() || b.gamma_cells.binary_search(&c1).is_ok());
            }
            for bf in &b.boundary_facets {
                let inside = mesh.facets()[bf.facet].cells.iter().flatten().filter(|c| b.active_cells.binary_search(c).is_ok()).count();
                assert_eq!(inside, 1, "boundary facet {} has {inside} active cells", bf.facet);
            }
            let (_, again) = sets(n, ls, GeometryMode::Boundary).unwrap();
            assert_eq!(b, again, "extraction is not deterministic");
        }
        if let Some((_, s)) = sets(n, ls, GeometryMode::Interface) {
            let mut union: Vec<usize> = s.side1_cells.iter().chain(&s.side2_cells).copied().collect();
            union.sort_unstable();
            union.dedup();
            assert_eq!(union, (0..nc).collect::<Vec<_>>(), "sides do not cover the mesh");
            let overlap: Vec<usize> = s.side1_cells.iter().copied().filter(|c| s.side2_cells.binary_search(c).is_ok()).collect();
            assert_eq!(overlap, s.gamma_cells);
            assert_eq!(s.side1_cells.len() + s.side2_cells.len() - s.gamma_cells.len(), nc);

            // The active set of -phi is side 1 of phi.
            struct Neg<'a>(&'a dyn LevelSet);
            impl LevelSet for Neg<'_> {
                fn eval(&self, p: [f64; 2]) -> f64 {
                    -self.0.eval(p)
                }
                fn grad(&self, p: [f64; 2]) -> [f64; 2] {
                    let g = self.0.grad(p);
                    [-g[0], -g[1]]
                }
                fn hess(&self, p: [f64; 2]) -> [[f64; 2]; 2] {
                    let h = self.0.hess(p);
                    [[-h[0][0], -h[0][1]], [-h[1][0], -h[1][1]]]
                }
                fn degree_hint(&self) -> Option<usize> {
                    self.0.degree_hint()
                }
            }
            let (_, flipped) = sets(n, &Neg(ls), GeometryMode::Boundary).unwrap();
            assert_eq!(flipped.active_cells, s.side1_cells);
        }
    }

    /// Classification invariants on 20 random circles and 20 random lines.
    pub fn random_level_sets() {
        let config = ProptestConfig { cases: 20, failure_persistence: None, ..ProptestConfig::default() };
        let mut runner = TestRunner::new(config.clone());
        runner
            .run(&(3usize..12, 0.1f64..0.9, 0.1f64..0.9, 0.05f64..0.6), |(n, cx, cy, r)| {
                check(n, &CircleLevelSet { center: [cx, cy], radius_sq: r * r });
                Ok(())
            })
            .unwrap();
        let mut runner = TestRunner::new(config);
        runner
            .run(&(3usize..12, -1.0f64..1.0, -1.0f64..1.0, -0.5f64..0.5), |(n, a, b, c)| {
                prop_assume!(a.abs() + b.abs() > 0.1);
                check(n, &AffineLevelSet { a, b, c });
                Ok(())
            })
            .unwrap();
    }
}
